pub mod arith;
pub mod curves;
pub mod descent;
pub mod enumerate;
pub mod error;
pub mod heights;
pub mod ledger;
pub mod mestre;
pub mod pointsearch;
pub mod surfaces;
pub mod verify;

pub use error::{Error, Result};

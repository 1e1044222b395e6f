//! Integer arithmetic shared by the rest of the crate.

pub mod cubefree;
pub mod f3;
pub mod factor;
pub mod residue;

pub use cubefree::{cubefree_from_factored, cubefree_part, CubefreeK, CubefreePart};
pub use f3::{f3_rank, F3Matrix};
pub use factor::{
    factor_u64, factorize, factorize_int, factorize_with, is_prime_u64, is_probable_prime,
    primes_up_to, FactorConfig, FactoredInteger,
};
pub use residue::{cubic_character_mod9, cubic_residue_symbol};

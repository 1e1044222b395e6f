//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` fail for documented reasons (exact
//! counterexample or measured gap); the run exits nonzero if any other
//! criterion fails, or if a known failure stops failing the documented way.

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cubesum::arith::{cubic_residue_symbol, factor_u64, primes_up_to, CubefreeK};
use cubesum::curves::{conductor, convert, minimal_model, phi_hat, phi_weierstrass, CurveForm, CurveModel, CurvePoint};
use cubesum::descent::{selmer_bound_u64, selmer_rank_bound};
use cubesum::enumerate::{enumerate_candidates, Measure};
use cubesum::heights::{certify_independent, Verdict};
use cubesum::mestre::{ap, mestre_score, ApTables};
use cubesum::pointsearch::{search, SearchTask};
use cubesum::surfaces::{class_invariant, evaluate, factored_invariant, scan_box, ScanFilters, SurfaceId, SurfaceTriple};
use cubesum::verify::{independent_subset, load_fixtures, plain_on_curve, rederive_minimality, Fixtures};

const MARGIN_TOL: f64 = 1e-3;
/// Criteria that fail on exact or measured grounds, with the reason.
const KNOWN_FAILURES: [(usize, &str); 2] = [
    (2, "the eight integral solutions satisfy an exact torsion relation"),
    (7, "measured Mestre gap is below 3 log log 10^4"),
];

struct Outcome {
    pass: bool,
    detail: String,
    /// For known failures: whether the failure is the documented one.
    as_documented: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            as_documented: false,
        }
    }
}

fn big(s: &str) -> BigInt {
    s.parse().unwrap()
}

fn criterion1(fx: &Fixtures) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut min_margin = f64::INFINITY;
    for list in fx.point_lists.iter().filter(|l| (6..=11).contains(&l.rank)) {
        let k = CubefreeK::parse(&list.k).unwrap();
        let model = Arc::new(minimal_model(&k));
        let (a3, a6) = model.weierstrass_coeffs().unwrap();
        if a6.to_string() != list.constant || a3 != BigInt::from(list.a3) {
            ok = false;
            notes.push(format!("k={}: constant {} vs printed {}", list.k, a6, list.constant));
        }
        let on: bool = list
            .points
            .iter()
            .all(|[x, y]| plain_on_curve(list.a3, &big(&list.constant), x, y).unwrap());
        let pts: Vec<CurvePoint> = list
            .points
            .iter()
            .filter_map(|[x, y]| CurvePoint::parse(model.clone(), x, y).ok())
            .collect();
        if !on || pts.len() != list.points.len() {
            ok = false;
            notes.push(format!("k={}: point off the curve", list.k));
            continue;
        }
        let cert = certify_independent(&pts, MARGIN_TOL).unwrap();
        min_margin = min_margin.min(cert.margin);
        if cert.verdict != Verdict::Independent || cert.margin <= MARGIN_TOL || pts.len() != list.rank {
            ok = false;
            notes.push(format!("k={}: {:?}, margin {:.3e}", list.k, cert.verdict, cert.margin));
        }
    }
    let n = fx.point_lists.iter().filter(|l| (6..=11).contains(&l.rank)).count();
    notes.insert(0, format!("{n} lists, ranks 6-11, min margin {min_margin:.3} (need > {MARGIN_TOL:e})"));
    Outcome::new(ok && n >= 6, notes.join("; "))
}

fn criterion2(fx: &Fixtures) -> Outcome {
    let sol = &fx.integral_solutions;
    let k_int = big(&sol.k);
    let fixed = sol.corrected();
    let exact = fixed.iter().all(|[x, y]| {
        let (x, y) = (big(x), big(y));
        &x * &y * (&x + &y) == k_int
    });
    let misprints: Vec<String> = sol
        .corrections
        .iter()
        .map(|c| format!("({}, {}) printed, ({}, {}) solves", c.printed[0], c.printed[1], c.corrected[0], c.corrected[1]))
        .collect();
    let k = CubefreeK::parse(&sol.k).unwrap();
    let model = Arc::new(CurveModel::new(k, CurveForm::CubicEkPrime).unwrap());
    let pts: Vec<CurvePoint> = fixed.iter().map(|[x, y]| CurvePoint::parse(model.clone(), x, y).unwrap()).collect();
    let cert = certify_independent(&pts, MARGIN_TOL).unwrap();
    let pass = exact && cert.verdict == Verdict::Independent && cert.margin > MARGIN_TOL;
    let mut detail = format!("exact on xy(x+y)=k: {exact} [{}]; certificate {:?}", misprints.join(", "), cert.verdict);
    let mut as_documented = false;
    if let Some(rel) = &cert.relation {
        let span = independent_subset(&pts, pts.len()).unwrap();
        let sub = certify_independent(&span, MARGIN_TOL).unwrap();
        // recheck the relation here: sum lands on a point of order 3
        let w: Vec<CurvePoint> = pts.iter().map(|p| convert(p, CurveForm::WeierstrassEkPrime).unwrap()).collect();
        let mut sum = CurvePoint::infinity(w[0].model().clone());
        for (c, p) in rel.iter().zip(&w) {
            sum = sum.add(&p.mul(*c).unwrap()).unwrap();
        }
        let order3 = !sum.is_infinity() && sum.mul(3).unwrap().is_infinity();
        detail += &format!(
            "; relation {rel:?} sums to a 3-torsion point: {order3}; {} independent, margin {:.3}",
            span.len(),
            sub.margin
        );
        as_documented = exact && order3 && span.len() == 7 && sub.verdict == Verdict::Independent;
    }
    Outcome {
        pass,
        detail,
        as_documented,
    }
}

fn criterion3(fx: &Fixtures) -> Outcome {
    let mut bad = Vec::new();
    let exact = ["1", "6", "19", "657", "21691"];
    for row in &fx.rank_table {
        let b = selmer_rank_bound(&CubefreeK::parse(&row.k).unwrap()).unwrap().bound;
        if b < row.rank || (exact.contains(&row.k.as_str()) && b != row.rank) {
            bad.push(format!("k={} bound {b} rank {}", row.k, row.rank));
        }
    }
    let seen = exact.iter().filter(|k| fx.rank_table.iter().any(|r| r.k == **k)).count();
    Outcome::new(
        bad.is_empty() && seen == exact.len(),
        format!("{} rows, exact for {exact:?}; mismatches {bad:?}", fx.rank_table.len()),
    )
}

fn criterion4(fx: &Fixtures) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for rank in 2..=4 {
        let row = fx.rank_table.iter().find(|r| r.rank == rank).unwrap();
        let m = rederive_minimality(rank, &CubefreeK::parse(&row.k).unwrap(), 60).unwrap();
        ok &= m.passed;
        let best = m.candidates.iter().map(|c| c.independent_found).max().unwrap_or(0);
        notes.push(format!(
            "r={rank} k={}: {} smaller candidates, best {best} independent, record {}",
            row.k,
            m.candidates.len(),
            m.record_points
        ));
    }
    Outcome::new(ok, notes.join("; "))
}

fn criterion5(fx: &Fixtures) -> Outcome {
    let rows: Vec<_> = fx.conductor_table.iter().filter(|r| r.rank <= 8).collect();
    let ns: Vec<BigUint> = rows.iter().map(|r| conductor(&CubefreeK::parse(&r.k).unwrap()).value).collect();
    let increasing = ns.windows(2).all(|w| w[0] < w[1]);
    let in_rank = |t: &[cubesum::verify::TableRow]| t.iter().any(|r| r.rank == 7 && r.k == "1144421889");
    let shared = in_rank(&fx.rank_table) && in_rank(&fx.conductor_table);
    Outcome::new(
        increasing && shared && rows.len() == 9,
        format!("{} rows through rank 8, strictly increasing: {increasing}; 1144421889 shared: {shared}", rows.len()),
    )
}

/// Projective points on `x³ + y³ = k z³` over `F_p`.
fn count_cubic(k: u64, p: u64) -> u64 {
    let cubes: Vec<u64> = (0..p).map(|x| x * x % p * x % p).collect();
    let mut hist = vec![0u64; p as usize];
    for &c in &cubes {
        hist[c as usize] += 1;
    }
    let affine: u64 = cubes.iter().map(|&c| hist[((k % p + p - c) % p) as usize]).sum();
    let at_infinity = (0..p).filter(|&x| (cubes[x as usize] + 1) % p == 0).count() as u64;
    affine + at_infinity
}

fn oracle_ap() -> Result<String, String> {
    let tables = ApTables::build(500);
    let mut n = 0;
    for p in primes_up_to(499).into_iter().filter(|&p| p > 3) {
        for kk in 1..=40u64 {
            let Ok(k) = CubefreeK::from_u64(kk) else { continue };
            if kk % p == 0 {
                continue;
            }
            let a = ap(&k, p, &tables).map_err(|e| e.to_string())?;
            let want = p as i64 + 1 - count_cubic(kk, p) as i64;
            if a != want {
                return Err(format!("a_{p}(k={kk}) = {a}, count gives {want}"));
            }
            n += 1;
        }
    }
    Ok(format!("(a) {n} a_p values"))
}

fn oracle_enumerate() -> Result<String, String> {
    let budget = 100_000u64;
    let mut bounds = Vec::new();
    for kk in 1..=budget {
        let f = factor_u64(kk);
        if f.iter().all(|&(_, e)| e < 3) {
            bounds.push((kk, selmer_bound_u64(&f, kk % 9)));
        }
    }
    let mut total = 0;
    for target in 0..=6 {
        let want: Vec<u64> = bounds.iter().filter(|b| b.1 >= target).map(|b| b.0).collect();
        let got: Vec<u64> = enumerate_candidates(Measure::MaxK(budget as u128), target)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|c| c.k as u64)
            .collect();
        if got != want {
            return Err(format!("target {target}: {} vs {} candidates", got.len(), want.len()));
        }
        total += got.len();
    }
    Ok(format!("(b) {total} candidates over targets 0-6"))
}

fn oracle_search() -> Result<String, String> {
    const B: i64 = 1000;
    const D: u64 = 12;
    let mut targets = HashMap::new();
    for kk in 1..=100u64 {
        if CubefreeK::from_u64(kk).is_ok() {
            for d in 1..=D {
                targets.insert((kk * d * d * d) as i64, (kk, d));
            }
        }
    }
    let mut brute: HashMap<u64, BTreeSet<(i64, i64, u64)>> = HashMap::new();
    for x in -B..=B {
        for y in x..=B {
            if let Some(&(kk, d)) = targets.get(&(x * x * x + y * y * y)) {
                if x.gcd(&y).gcd(&(d as i64)) == 1 {
                    brute.entry(kk).or_default().insert((x, y, d));
                }
            }
        }
    }
    let mut n = 0;
    for kk in 1..=100u64 {
        let Ok(k) = CubefreeK::from_u64(kk) else { continue };
        let got: BTreeSet<(i64, i64, u64)> = search(&SearchTask::new(k, D))
            .map_err(|e| e.to_string())?
            .points
            .iter()
            .map(|p| (p.x.to_i64().unwrap(), p.y.to_i64().unwrap(), p.d))
            .filter(|&(x, y, _)| x.abs() <= B && y.abs() <= B)
            .collect();
        let want = brute.remove(&kk).unwrap_or_default();
        if got != want {
            return Err(format!("k={kk}: search {} vs loop {}", got.len(), want.len()));
        }
        n += want.len();
    }
    Ok(format!("(c) {n} solutions with |x|,|y| <= {B}, d <= {D}"))
}

fn raw_coords(s: SurfaceId, [r, u, t]: [i64; 3]) -> Option<[i128; 4]> {
    let (r, s_, t) = (r as i128, u as i128, t as i128);
    match s {
        SurfaceId::S3 => Some([
            r.pow(3) - s_.pow(3),
            s_.pow(3) + t.pow(3),
            r * r * s_ - s_ * s_ * t + t * t * r,
            r * r * t - s_ * s_ * r - t * t * s_,
        ]),
        SurfaceId::S2 => Some([
            -r * r * s_ + s_ * s_ * t,
            r * r * s_ - r * t * t,
            -r * r * t + s_ * t * t,
            r * s_ * s_ - s_ * t * t,
        ]),
        SurfaceId::S1 => None,
    }
}

fn is_cube(n: &BigInt) -> bool {
    let r = n.cbrt();
    &(&r * &r * &r) == n
}

fn oracle_surfaces() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let per = 100_000;
    for s in SurfaceId::ALL {
        for _ in 0..per {
            let params = loop {
                let p: [i64; 3] = [0; 3].map(|_| rng.gen_range(-2000..=2000));
                if p != [0, 0, 0] {
                    break p;
                }
            };
            let t = SurfaceTriple::new(s, params).unwrap();
            let [w, x, y, z] = evaluate(&t);
            let holds = match s {
                SurfaceId::S1 => w.pow(3) + x.pow(3) == y.pow(3) + z.pow(3),
                SurfaceId::S2 => &w * &x * (&w + &x) == &y * &z * (&y + &z),
                SurfaceId::S3 => &w * &x * (&w + &x) == y.pow(3) + z.pow(3),
            };
            if !holds {
                return Err(format!("{s} {params:?}: surface equation fails"));
            }
            let inv = class_invariant(s, &[w.clone(), x.clone(), y.clone(), z.clone()]);
            let prod: BigInt = factored_invariant(&t).iter().map(|(v, e)| v.pow(*e)).product();
            let matches = match raw_coords(s, params) {
                Some(raw) => {
                    let raw = raw.map(BigInt::from);
                    let g = raw.iter().fold(BigInt::zero(), |g, v| g.gcd(v));
                    let ok = g.is_zero() || [&w, &x, &y, &z].iter().zip(&raw).all(|(c, r)| *c * &g == *r);
                    ok && prod == class_invariant(s, &raw)
                        && (s != SurfaceId::S3 || &raw[0] + &raw[1] == BigInt::from(params[0]).pow(3) + BigInt::from(params[2]).pow(3))
                }
                None => {
                    if inv.is_zero() {
                        prod.is_zero()
                    } else {
                        let (q, rem) = prod.div_rem(&inv);
                        rem.is_zero() && q.is_positive() && is_cube(&q)
                    }
                }
            };
            if !matches {
                return Err(format!("{s} {params:?}: factored invariant mismatch"));
            }
        }
    }
    Ok(format!("(d) {per} random triples per surface"))
}

fn oracle_residue() -> Result<String, String> {
    let mut n = 0;
    for q in primes_up_to(499).into_iter().filter(|q| q % 3 == 1) {
        let cubes: BTreeSet<u64> = (1..q).map(|x| x * x % q * x % q).collect();
        let qb = BigUint::from(q);
        let sym: Vec<u8> = (0..q)
            .map(|a| if a == 0 { 0 } else { cubic_residue_symbol(&BigInt::from(a), &qb).unwrap() })
            .collect();
        let inv = |b: u64| (1..q).find(|c| b * c % q == 1).unwrap();
        for a in 1..q {
            if (sym[a as usize] == 0) != cubes.contains(&a) {
                return Err(format!("q={q}, a={a}: cube status"));
            }
        }
        for b in 1..q {
            let bi = inv(b);
            for a in 1..q {
                if (sym[a as usize] == sym[b as usize]) != cubes.contains(&(a * bi % q)) {
                    return Err(format!("q={q}: classes of {a}, {b}"));
                }
            }
        }
        if cubic_residue_symbol(&BigInt::from(q), &qb).is_ok() {
            return Err(format!("q={q}: symbol of 0 accepted"));
        }
        n += 1;
    }
    Ok(format!("(e) {n} primes q < 500"))
}

fn criterion6() -> Outcome {
    let runs: [fn() -> Result<String, String>; 5] = [oracle_ap, oracle_enumerate, oracle_search, oracle_surfaces, oracle_residue];
    let mut ok = true;
    let mut notes = Vec::new();
    for f in runs {
        match f() {
            Ok(s) => notes.push(s),
            Err(e) => {
                ok = false;
                notes.push(format!("FAILED {e}"));
            }
        }
    }
    Outcome::new(ok, notes.join("; "))
}

fn criterion7() -> Outcome {
    let x_cut = 10_000;
    let tables = ApTables::build(x_cut);
    let hi = mestre_score(&CubefreeK::parse("9902523").unwrap(), x_cut, &tables).log_score;
    let lo = mestre_score(&CubefreeK::from_u64(6).unwrap(), x_cut, &tables).log_score;
    let gap = hi - lo;
    let need = 3.0 * (x_cut as f64).ln().ln();
    Outcome {
        pass: gap >= need,
        detail: format!("log-scores {hi:.4} (9902523) and {lo:.4} (6), gap {gap:.4}, need {need:.4}"),
        as_documented: gap > 0.0 && (gap - 5.3744).abs() < 1e-3,
    }
}

fn criterion8() -> Outcome {
    let mut ek: Vec<CurvePoint> = Vec::new();
    let mut ekp: Vec<CurvePoint> = Vec::new();
    let mut seen = BTreeSet::new();
    for (s, bound) in [(SurfaceId::S3, 6), (SurfaceId::S2, 6)] {
        let (samples, _) = scan_box(s, bound, &ScanFilters::default()).unwrap();
        for smp in samples {
            let Some((p, q)) = smp.pair else { continue };
            for pt in [p, q] {
                if pt.is_infinity() || !seen.insert(pt.to_string() + &pt.k().to_string()) {
                    continue;
                }
                match pt.model().form() {
                    CurveForm::CubicEk => ek.push(pt),
                    _ => ekp.push(pt),
                }
            }
        }
    }
    ek.truncate(100);
    ekp.truncate(100);
    let mut signs = BTreeSet::new();
    let mut bad = 0;
    for p in &ek {
        let w = convert(p, CurveForm::WeierstrassEk).unwrap();
        let img = phi_hat(&phi_weierstrass(p).unwrap()).unwrap();
        let three = w.mul(3).unwrap();
        // 6P = O fixes no sign
        let ambiguous = three == three.neg().unwrap();
        match () {
            _ if img == three && ambiguous => false,
            _ if img == three => signs.insert(3),
            _ if img == three.neg().unwrap() => signs.insert(-3),
            _ => {
                bad += 1;
                false
            }
        };
    }
    let mut back = BTreeSet::new();
    for q in &ekp {
        let w = convert(q, CurveForm::WeierstrassEkPrime).unwrap();
        let img = phi_weierstrass(&phi_hat(q).unwrap()).unwrap();
        let three = w.mul(3).unwrap();
        // 6P = O fixes no sign
        let ambiguous = three == three.neg().unwrap();
        match () {
            _ if img == three && ambiguous => false,
            _ if img == three => back.insert(3),
            _ if img == three.neg().unwrap() => back.insert(-3),
            _ => {
                bad += 1;
                false
            }
        };
    }
    Outcome::new(
        ek.len() == 100 && bad == 0 && signs.len() == 1 && back.len() <= 1,
        format!(
            "{} E_k points give phi_hat.phi = {signs:?}; {} E'_k points give phi.phi_hat = {back:?}; {bad} mismatches",
            ek.len(),
            ekp.len()
        ),
    )
}

fn main() -> ExitCode {
    let fx = load_fixtures().expect("fixtures");
    let criteria: Vec<(usize, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, Box::new(|| criterion1(&fx))),
        (2, Box::new(|| criterion2(&fx))),
        (3, Box::new(|| criterion3(&fx))),
        (4, Box::new(|| criterion4(&fx))),
        (5, Box::new(|| criterion5(&fx))),
        (6, Box::new(criterion6)),
        (7, Box::new(criterion7)),
        (8, Box::new(criterion8)),
    ];
    let mut unexpected = Vec::new();
    for (n, run) in criteria {
        let t = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {verdict} ({:.1}s) {}", t.elapsed().as_secs_f64(), out.detail);
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == n);
        match (out.pass, known) {
            (true, _) => {}
            (false, Some((_, why))) if out.as_documented => println!("  known failure: {why}"),
            _ => unexpected.push(n),
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}

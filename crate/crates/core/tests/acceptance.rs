//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always printed.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use emdkern::gram::{
    absolute_gram, eigen_verdict, ksvm_correct, shift_correct, GramKind, GramMatrix, SpectralBasis, DEFAULT_TOL,
};
use emdkern::ground::{FnGround, GroundDistance, SinkSpec};
use emdkern::harness::{
    generate_synthetic, run_on_dataset, DatasetFormat, DatasetSource, ExperimentSpec, GroundSpec, PipelineSpec,
    Protocol, RbfStage, SampleSpec, SyntheticConfig, TemplateSharing, Variant,
};
use emdkern::linalg::{label_conjugate, sym_eigen, Matrix};
use emdkern::multiset::WeightedPointSet;
use emdkern::svm::{train_binary, train_one_vs_all, CorrectionMode};
use emdkern::transform::{nested_gram, pd_ization_order, tanimoto_gram, DEFAULT_CAP};
use emdkern::transport::{emd, emd_1d, emd_circle, emdhat_p, emi, emi_from_kernel, emi_prime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: emdkern::Error) -> String {
    e.to_string()
}

/// Equal-mass pair with 1..=8 support points each, coordinates in `[lo, hi)`.
fn equal_mass_pair(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> (WeightedPointSet, WeightedPointSet) {
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=8);
    let a: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(lo..hi), rng.random_range(0.1..2.0))).collect();
    let mut b: Vec<(f64, f64)> = (0..m).map(|_| (rng.random_range(lo..hi), rng.random_range(0.1..2.0))).collect();
    let ma: f64 = a.iter().map(|p| p.1).sum();
    let mb: f64 = b.iter().map(|p| p.1).sum();
    b.iter_mut().for_each(|p| p.1 *= ma / mb);
    (WeightedPointSet::from_1d(&a).unwrap(), WeightedPointSet::from_1d(&b).unwrap())
}

#[derive(Deserialize)]
struct OracleCase {
    family: String,
    a: Vec<f64>,
    a_mass: Vec<f64>,
    b: Vec<f64>,
    b_mass: Vec<f64>,
    value: f64,
}

#[derive(Deserialize)]
struct BridgeCase {
    x: f64,
    y: f64,
    value: f64,
}

#[derive(Deserialize)]
struct Oracle {
    transport: Vec<OracleCase>,
    bridge: Vec<BridgeCase>,
}

fn oracle() -> Oracle {
    let text = std::fs::read_to_string(fixtures().join("lp_oracle.json")).expect("lp_oracle.json present");
    serde_json::from_str(&text).expect("lp_oracle.json parses")
}

fn oracle_sets(c: &OracleCase) -> (WeightedPointSet, WeightedPointSet) {
    let pairs = |x: &[f64], m: &[f64]| x.iter().copied().zip(m.iter().copied()).collect::<Vec<_>>();
    (
        WeightedPointSet::from_1d(&pairs(&c.a, &c.a_mass)).unwrap(),
        WeightedPointSet::from_1d(&pairs(&c.b, &c.b_mass)).unwrap(),
    )
}

fn line_transport() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let abs = FnGround(|x: &[f64], y: &[f64]| (x[0] - y[0]).abs());
    let sq = FnGround(|x: &[f64], y: &[f64]| (x[0] - y[0]).powi(2));
    let mut worst = 0.0f64;
    for k in 0..500 {
        let (a, b) = equal_mass_pair(&mut rng, -5.0, 5.0);
        let (lp, closed) = if k % 2 == 0 {
            (emd(&a, &b, &abs).map_err(e2s)?.cost, emd_1d(&a, &b, f64::abs).map_err(e2s)?)
        } else {
            (emd(&a, &b, &sq).map_err(e2s)?.cost, emd_1d(&a, &b, |t| t * t).map_err(e2s)?)
        };
        worst = worst.max(rel_err(closed, lp));
    }
    let mut worst_frozen = 0.0f64;
    for c in oracle().transport.iter().filter(|c| c.family.starts_with("line")) {
        let (a, b) = oracle_sets(c);
        let (lp, closed) = if c.family == "line_abs" {
            (emd(&a, &b, &abs).map_err(e2s)?.cost, emd_1d(&a, &b, f64::abs).map_err(e2s)?)
        } else {
            (emd(&a, &b, &sq).map_err(e2s)?.cost, emd_1d(&a, &b, |t| t * t).map_err(e2s)?)
        };
        worst_frozen = worst_frozen.max(rel_err(lp, c.value)).max(rel_err(closed, c.value));
    }
    ensure(worst <= 1e-8 && worst_frozen <= 1e-8, || {
        format!("max rel err {worst:.2e} vs flow LP, {worst_frozen:.2e} vs frozen HiGHS values")
    })?;
    Ok(format!("500 instances, max rel err {worst:.1e}; 80 frozen HiGHS values, {worst_frozen:.1e}"))
}

fn circle_transport() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let ground = GroundDistance::circle();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (a, b) = equal_mass_pair(&mut rng, 0.0, 2.0 * PI);
        let lp = emd(&a, &b, &ground).map_err(e2s)?.cost;
        worst = worst.max(rel_err(emd_circle(&a, &b).map_err(e2s)?, lp));
    }
    let mut worst_frozen = 0.0f64;
    for c in oracle().transport.iter().filter(|c| c.family == "circle") {
        let (a, b) = oracle_sets(c);
        let lp = emd(&a, &b, &ground).map_err(e2s)?.cost;
        worst_frozen = worst_frozen.max(rel_err(lp, c.value)).max(rel_err(emd_circle(&a, &b).map_err(e2s)?, c.value));
    }
    ensure(worst <= 1e-8 && worst_frozen <= 1e-8, || {
        format!("max rel err {worst:.2e} vs flow LP, {worst_frozen:.2e} vs frozen HiGHS values")
    })?;
    Ok(format!("500 instances, max rel err {worst:.1e}; 40 frozen HiGHS values, {worst_frozen:.1e}"))
}

/// Integer-mass multiset over the letters `0..alphabet`, possibly empty.
fn multiset(rng: &mut ChaCha8Rng, alphabet: usize, max_mass: u32) -> WeightedPointSet {
    let pairs: Vec<(f64, f64)> =
        (0..alphabet).map(|x| (x as f64, rng.random_range(0..=max_mass) as f64)).collect();
    WeightedPointSet::from_1d(&pairs).unwrap()
}

fn discrete_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let d = GroundDistance::discrete();
    let half = SinkSpec::flat(0.5).unwrap();
    let unit = SinkSpec::flat(1.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let a = multiset(&mut rng, 8, 5);
        let b = multiset(&mut rng, 8, 5);
        let inter = a.intersect(&b).map_err(e2s)?.total_mass();
        let (ma, mb) = (a.total_mass(), b.total_mass());
        let (small, large) = if ma <= mb { (&a, &b) } else { (&b, &a) };
        let small_minus = small.total_mass() - inter;
        let large_minus = large.total_mass() - inter;

        let e = emi(&a, &b, &d, &half).map_err(e2s)?;
        let plain = emd(&a, &b, &d).map_err(e2s)?.cost;
        let hat = emdhat_p(&a, &b, &d, &unit).map_err(e2s)?;
        let checks = [
            (e, inter),
            (plain, small_minus),
            (hat, large_minus),
            (plain + hat, ma + mb - 2.0 * inter),
            (ma.max(mb) + plain, a.unite(&b).map_err(e2s)?.total_mass()),
        ];
        for (got, want) in checks {
            worst = worst.max((got - want).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max abs err {worst:.2e}"))?;
    Ok(format!("500 pairs, intersection / differences / union, max abs err {worst:.1e}"))
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let f = Matrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
    f.transpose() * f
}

fn preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_pd = f64::INFINITY;
    for _ in 0..200 {
        let n = rng.random_range(3..=30);
        let d = rng.random_range(1..=n + 3);
        let g = random_pd(&mut rng, n, d);
        let r = eigen_verdict(&tanimoto_gram(&g).map_err(e2s)?, DEFAULT_TOL).map_err(e2s)?;
        ensure(r.is_psd, || format!("T_K Gram of size {n} has min eig {:.3e} (max |eig| {:.3e})", r.min_eig, r.max_abs_eig))?;
        worst_pd = worst_pd.min(r.min_eig / r.max_abs_eig);
    }
    let mut worst_cnd = f64::NEG_INFINITY;
    for k in 0..200 {
        let n = rng.random_range(4..=30);
        let dmat = if k % 2 == 0 {
            let dim = rng.random_range(1..=5);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            Matrix::from_fn(n, n, |i, j| pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum())
        } else {
            // letters, with row 0 a letter no other row uses
            let letters: Vec<usize> =
                (0..n).map(|i| if i == 0 { 0 } else { rng.random_range(1..=(n / 2).max(2)) }).collect();
            Matrix::from_fn(n, n, |i, j| if letters[i] == letters[j] { 0.0 } else { 1.0 })
        };
        ensure(eigen_verdict(&dmat, DEFAULT_TOL).map_err(e2s)?.is_cnd, || "generated matrix is not CND".into())?;
        let b = emdkern::transform::biotope_gram(&dmat, 0).map_err(e2s)?;
        let r = eigen_verdict(&b, DEFAULT_TOL).map_err(e2s)?;
        ensure(r.is_cnd, || {
            format!("biotope matrix of size {} has centred max eig {:.3e} (max |eig| {:.3e})", n - 1, r.centered_max_eig, r.max_abs_eig)
        })?;
        worst_cnd = worst_cnd.max(r.centered_max_eig / r.max_abs_eig.max(f64::MIN_POSITIVE));
    }
    Ok(format!(
        "200 PD Grams, worst min eig / max|eig| = {worst_pd:.1e}; 200 CND matrices, worst centred max eig / max|eig| = {worst_cnd:.1e}"
    ))
}

fn nesting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_iter = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(3..=15);
        let g = random_pd(&mut rng, n, n + 2);
        let mut iterated = g.clone();
        for depth in 1..=20u32 {
            iterated = tanimoto_gram(&iterated).map_err(e2s)?;
            let closed = nested_gram(&g, depth).map_err(e2s)?;
            worst_iter = worst_iter.max((&iterated - &closed).abs().max());
        }
    }
    ensure(worst_iter <= 1e-12, || format!("closed form vs iteration differs by {worst_iter:.2e}"))?;

    let mut worst_off = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(3..=30);
        let mut f = Matrix::from_fn(n + 5, n, |_, _| rng.random_range(-1.0..1.0));
        for mut c in f.column_iter_mut() {
            let norm = c.norm();
            c /= norm;
        }
        let g = f.transpose() * f;
        let k30 = nested_gram(&g, 30).map_err(e2s)?;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst_off = worst_off.max(k30[(i, j)].abs());
                }
            }
        }
    }
    ensure(worst_off <= 2f64.powi(-25), || format!("max off-diagonal of K_T^30 is {worst_off:.3e} > 2^-25"))?;

    let mut orders = Vec::new();
    while orders.len() < 100 {
        let n = rng.random_range(3..=20);
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            g[(i, i)] = rng.random_range(0.5..2.0);
            for j in 0..i {
                let v = rng.random_range(-1.5..1.5);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        if eigen_verdict(&g, DEFAULT_TOL).map_err(e2s)?.is_psd {
            continue;
        }
        orders.push(pd_ization_order(&g, DEFAULT_TOL, DEFAULT_CAP).map_err(e2s)?);
    }
    let max_order = orders.iter().max().copied().unwrap_or(0);
    Ok(format!(
        "iteration max diff {worst_iter:.1e}; K_T^30 max off-diagonal {worst_off:.1e}; 100 indefinite Grams PD-ized, n0 in [{}, {max_order}]",
        orders.iter().min().copied().unwrap_or(0)
    ))
}

fn rbf_bridge() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let d = GroundDistance::discrete();
    let sink = SinkSpec::flat(1.0).unwrap();
    let mut summary = Vec::new();
    for rep in 0..3 {
        let sets: Vec<WeightedPointSet> = (0..30).map(|_| multiset(&mut rng, 6, 4)).collect();
        let dm = emdkern::gram::assemble_matrix(&sets, |a, b| emdhat_p(a, b, &d, &sink)).map_err(e2s)?;
        let r = eigen_verdict(&dm, DEFAULT_TOL).map_err(e2s)?;
        ensure(r.is_cnd, || format!("EMDHat Gram {rep} is not CND: centred max eig {:.3e}", r.centered_max_eig))?;
        for u in [0.1, 1.0, 10.0] {
            let k = dm.map(|v| (-u * v).exp());
            let r = eigen_verdict(&k, DEFAULT_TOL).map_err(e2s)?;
            ensure(r.is_psd, || format!("exp(-{u} D) has min eig {:.3e}", r.min_eig))?;
            if rep == 0 {
                summary.push(format!("u={u}: min eig {:.1e}", r.min_eig));
            }
        }
    }
    Ok(format!("3 Grams of 30 multisets CND; {}", summary.join(", ")))
}

fn constant_ground() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_emi = 0.0f64;
    let mut worst_prime = 0.0f64;
    for _ in 0..3 {
        let (c0, c1, c2) = (rng.random_range(0.5..2.0), rng.random_range(0.1..0.5), rng.random_range(0.5..3.0));
        let g = move |x: f64| c0 + c1 * (c2 * x).sin();
        let ground = FnGround(move |x: &[f64], y: &[f64]| g(x[0]) + g(y[0]));
        for _ in 0..100 {
            let na = rng.random_range(1..=6);
            let nb = rng.random_range(1..=6);
            let a: Vec<(f64, f64)> = (0..na).map(|_| (rng.random_range(-4.0..4.0), rng.random_range(0.1..3.0))).collect();
            let b: Vec<(f64, f64)> = (0..nb).map(|_| (rng.random_range(-4.0..4.0), rng.random_range(0.1..3.0))).collect();
            let (a, b) = (WeightedPointSet::from_1d(&a).unwrap(), WeightedPointSet::from_1d(&b).unwrap());
            let p = rng.random_range(-4.0..4.0);
            let sink = SinkSpec::point(vec![p]);
            let scale = (a.total_mass() + b.total_mass()) * 2.0 * (c0 + c1);
            let e = emi(&a, &b, &ground, &sink).map_err(e2s)?;
            let ep = emi_prime(&a, &b, &ground, &sink).map_err(e2s)?;
            worst_emi = worst_emi.max(e.abs() / scale);
            worst_prime = worst_prime.max((ep - 2.0 * g(p) * a.total_mass().min(b.total_mass())).abs());
        }
    }
    ensure(worst_emi <= 1e-9 && worst_prime <= 1e-9, || {
        format!("|EMI_p|/scale up to {worst_emi:.2e}, EMI' error up to {worst_prime:.2e}")
    })?;
    Ok(format!("300 pairs, |EMI_p|/scale <= {worst_emi:.1e}, EMI' err <= {worst_prime:.1e}"))
}

fn bridge_set(x: f64) -> WeightedPointSet {
    WeightedPointSet::from_1d(&[(1.0, x), (-1.0, 1.0 - x)]).unwrap()
}

fn brownian_bridge() -> Outcome {
    // D(a, b) = (a - b)² / 2 anchored at 0 is the product kernel a·b
    let half_sq = FnGround(|x: &[f64], y: &[f64]| 0.5 * (x[0] - y[0]).powi(2));
    let sink = SinkSpec::point(vec![0.0]);
    let frozen = oracle().bridge;
    let mut worst = 0.0f64;
    for i in 0..=20 {
        for j in 0..=20 {
            let (x, y) = (i as f64 / 20.0, j as f64 / 20.0);
            let (u, v) = (bridge_set(x), bridge_set(y));
            let formula = 2.0 * (x.min(y) + (1.0 - x).min(1.0 - y)) - 1.0;
            let via_distance = emi(&u, &v, &half_sq, &sink).map_err(e2s)?;
            let via_kernel = emi_from_kernel(&u, &v, |a: &[f64], b: &[f64]| a[0] * b[0]).map_err(e2s)?;
            let hi = frozen
                .iter()
                .find(|c| (c.x - x).abs() < 1e-12 && (c.y - y).abs() < 1e-12)
                .ok_or_else(|| format!("no frozen value for ({x}, {y})"))?;
            for v in [via_distance, via_kernel, hi.value] {
                worst = worst.max((v - formula).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max abs err {worst:.2e}"))?;
    Ok(format!("441 grid points, LP, kernel flow and frozen HiGHS values vs formula, max err {worst:.1e}"))
}

#[derive(Serialize, Deserialize)]
struct CircleWitness {
    angles: Vec<f64>,
    masses: Vec<Vec<f64>>,
    centered_max_eig: f64,
    max_abs_eig: f64,
}

fn witness_gram(angles: &[f64], masses: &[Vec<f64>]) -> Result<Matrix, String> {
    let sets: Vec<WeightedPointSet> = masses
        .iter()
        .map(|m| WeightedPointSet::from_1d(&angles.iter().copied().zip(m.iter().copied()).collect::<Vec<_>>()).unwrap())
        .collect();
    emdkern::gram::assemble_matrix(&sets, emd_circle).map_err(e2s)
}

/// Re-derives every entry with the flow LP, then checks the centred spectrum.
fn verify_witness(w: &CircleWitness) -> Result<f64, String> {
    let d = witness_gram(&w.angles, &w.masses)?;
    let sets: Vec<WeightedPointSet> = w
        .masses
        .iter()
        .map(|m| WeightedPointSet::from_1d(&w.angles.iter().copied().zip(m.iter().copied()).collect::<Vec<_>>()).unwrap())
        .collect();
    for i in 0..sets.len() {
        for j in 0..sets.len() {
            let lp = emd(&sets[i], &sets[j], &GroundDistance::circle()).map_err(e2s)?.cost;
            ensure((d[(i, j)] - lp).abs() <= 1e-8 * lp.abs().max(1.0), || {
                format!("witness entry ({i},{j}) {} disagrees with LP {lp}", d[(i, j)])
            })?;
        }
    }
    let r = eigen_verdict(&d, DEFAULT_TOL).map_err(e2s)?;
    let ratio = r.centered_max_eig / r.max_abs_eig;
    ensure(ratio > 1e-6, || format!("centred max eig / max|eig| = {ratio:.3e}, not a witness"))?;
    Ok(ratio)
}

fn circle_witness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let angles: Vec<f64> = (0..4).map(|k| k as f64 * PI / 2.0).collect();
    let mut found: Option<(usize, CircleWitness)> = None;
    let mut hits = 0;
    for trial in 0..2000 {
        let masses: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0f64).powi(4) + 1e-3).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let d = witness_gram(&angles, &masses)?;
        let r = eigen_verdict(&d, DEFAULT_TOL).map_err(e2s)?;
        if r.centered_max_eig > 1e-6 * r.max_abs_eig {
            hits += 1;
            if found.is_none() {
                let w = CircleWitness {
                    angles: angles.clone(),
                    masses,
                    centered_max_eig: r.centered_max_eig,
                    max_abs_eig: r.max_abs_eig,
                };
                found = Some((trial, w));
            }
        }
    }
    let (trial, w) = found.ok_or("no witness in 2000 trials")?;
    let fresh = serde_json::to_string_pretty(&w).map_err(|e| e.to_string())?;
    let back: CircleWitness = serde_json::from_str(&fresh).map_err(|e| e.to_string())?;
    verify_witness(&back)?;

    let path = fixtures().join("circle_witness.json");
    if !path.exists() {
        std::fs::write(&path, &fresh).map_err(|e| e.to_string())?;
    }
    let stored: CircleWitness =
        serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let ratio = verify_witness(&stored)?;
    Ok(format!(
        "{hits} witnesses in 2000 trials (first at trial {trial}); stored witness re-verified, centred max eig / max|eig| = {ratio:.2e}; {}",
        grid_probe()?
    ))
}

/// The same search on the corners of the unit square with the Euclidean
/// ground distance. Reported, not asserted.
fn grid_probe() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let ground = GroundDistance::euclidean();
    let mut best = f64::NEG_INFINITY;
    let mut hits = 0;
    for _ in 0..2000 {
        let masses: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0f64).powi(4) + 1e-3).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let sets: Vec<WeightedPointSet> = masses
            .iter()
            .map(|m| WeightedPointSet::new(2, corners.iter().map(|c| c.to_vec()).collect(), m.clone()).unwrap())
            .collect();
        let d = emdkern::gram::assemble_matrix(&sets, |a, b| emd(a, b, &ground).map(|p| p.cost)).map_err(e2s)?;
        let r = eigen_verdict(&d, DEFAULT_TOL).map_err(e2s)?;
        let ratio = r.centered_max_eig / r.max_abs_eig;
        best = best.max(ratio);
        if ratio > 1e-6 {
            if hits == 0 {
                let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("grid_witness.json");
                let w = serde_json::json!({ "corners": corners, "masses": masses, "centered_max_eig": r.centered_max_eig });
                std::fs::write(&path, w.to_string()).map_err(|e| e.to_string())?;
            }
            hits += 1;
        }
    }
    Ok(format!("unit-square grid probe: {hits} witnesses in 2000 trials (best ratio {best:.1e}, reported only)"))
}

fn ksvm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst_dec = 0.0f64;
    for _ in 0..20 {
        let (n, t) = (rng.random_range(10..=40), 15);
        let d = rng.random_range(2..=n);
        let f = Matrix::from_fn(d, n + t, |_, _| rng.random_range(-1.0..1.0));
        let full = f.transpose() * &f;
        let train: Vec<usize> = (0..n).collect();
        let g = GramMatrix::new(
            full.select_rows(&train).select_columns(&train),
            (0..n).map(|i| i.to_string()).collect(),
            GramKind::Kernel,
            "features",
        )
        .map_err(e2s)?;
        let block = full.select_rows(&(n..n + t).collect::<Vec<_>>()).select_columns(&train);
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let plain = train_binary(&g, &y, 1.0, CorrectionMode::None).map_err(e2s)?;
        let krein = train_binary(&g, &y, 1.0, CorrectionMode::Ksvm).map_err(e2s)?;
        let (dp, dk) = (plain.decision_values(&block).map_err(e2s)?, krein.decision_values(&block).map_err(e2s)?);
        for (a, b) in dp.iter().zip(&dk) {
            worst_dec = worst_dec.max((a - b).abs());
        }
    }
    ensure(worst_dec <= 1e-6, || format!("decision values differ by {worst_dec:.2e} on PSD Grams"))?;

    let mut worst_reuse = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(6..=25);
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let g = (&a + a.transpose()) * 0.5;
        let gm = GramMatrix::new(g.clone(), (0..n).map(|i| i.to_string()).collect(), GramKind::Kernel, "rand")
            .map_err(e2s)?;
        let basis = SpectralBasis::of(&g).map_err(e2s)?;
        let probe: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        for class in 0..4 {
            let y: Vec<f64> = (0..n).map(|i| if i % 4 == class { 1.0 } else { -1.0 }).collect();
            let reused = basis.for_labels(&y).map_err(e2s)?;
            // per-class decomposition of Y G Y from scratch
            let (vals, vecs) = sym_eigen(&label_conjugate(&g, &y)).map_err(e2s)?;
            let spectral = |f: &dyn Fn(f64) -> f64| {
                let mut scaled = vecs.clone();
                for (k, &l) in vals.iter().enumerate() {
                    scaled.column_mut(k).scale_mut(f(l));
                }
                &scaled * vecs.transpose()
            };
            let direct_abs = spectral(&f64::abs);
            let direct_sign = spectral(&f64::signum);
            worst_reuse = worst_reuse.max((&reused.corrected - &direct_abs).abs().max());
            let mapped = reused.map_coefficients(&probe);
            let want = &direct_sign * nalgebra::DVector::from_column_slice(&probe);
            for (a, b) in mapped.iter().zip(want.iter()) {
                worst_reuse = worst_reuse.max((a - b).abs());
            }
            let via_gram = ksvm_correct(&gm, &y).map_err(e2s)?;
            worst_reuse = worst_reuse.max((&reused.corrected - &via_gram.corrected).abs().max());
        }
        // the one-vs-all trainer must run on the shared decomposition
        let labels: Vec<String> = (0..n).map(|i| format!("k{}", i % 4)).collect();
        train_one_vs_all(&gm, &labels, 1.0, CorrectionMode::Ksvm).map_err(e2s)?;
    }
    ensure(worst_reuse <= 1e-9, || format!("shared decomposition differs by {worst_reuse:.2e}"))?;

    let swap = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let abs = absolute_gram(&SpectralBasis::of(&swap).map_err(e2s)?);
    let id_err = (&abs - Matrix::identity(2, 2)).abs().max();
    ensure(id_err <= 1e-12, || format!("|G| of the swap matrix is off identity by {id_err:.2e}"))?;
    Ok(format!(
        "PSD decision diff {worst_dec:.1e}; reuse vs per-class diff {worst_reuse:.1e}; |[[0,1],[1,0]]| = I within {id_err:.0e}"
    ))
}

fn shift() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst_indef = f64::INFINITY;
    for _ in 0..50 {
        let n = rng.random_range(3..=30);
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let g = GramMatrix::new((&a + a.transpose()) * 0.5, (0..n).map(|i| i.to_string()).collect(), GramKind::Kernel, "rand")
            .map_err(e2s)?;
        let (s, amount) = shift_correct(&g, None).map_err(e2s)?;
        let r = eigen_verdict(s.values(), DEFAULT_TOL).map_err(e2s)?;
        ensure(r.is_psd && amount > 0.0, || format!("shifted Gram has min eig {:.3e} (s = {amount})", r.min_eig))?;
        worst_indef = worst_indef.min(r.min_eig / r.max_abs_eig);
    }
    for _ in 0..20 {
        let n = rng.random_range(6..=30);
        let f = Matrix::from_fn(n + 2, n, |_, _| rng.random_range(-1.0..1.0));
        let g = GramMatrix::new(f.transpose() * f, (0..n).map(|i| i.to_string()).collect(), GramKind::Kernel, "pd")
            .map_err(e2s)?;
        let (_, amount) = shift_correct(&g, None).map_err(e2s)?;
        ensure(amount == 0.0, || format!("PSD input shifted by {amount}"))?;
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let plain = train_binary(&g, &y, 1.0, CorrectionMode::None).map_err(e2s)?;
        let shifted = train_binary(&g, &y, 1.0, CorrectionMode::Shift).map_err(e2s)?;
        ensure(plain.alphas == shifted.alphas && plain.bias == shifted.bias, || "PSD model changed under shift".into())?;
    }
    Ok(format!("50 indefinite Grams PSD after shift (worst min eig / max|eig| {worst_indef:.1e}); 20 PSD Grams: s = 0, identical models"))
}

fn e2e_spec(variant: Variant) -> ExperimentSpec {
    let mut pipeline = PipelineSpec::new(GroundSpec { kind: "euclidean".into(), threshold: Some(3.0) }, variant);
    pipeline.rbf = RbfStage::Auto;
    ExperimentSpec {
        dataset: DatasetSource { path: "<synthetic>".into(), format: DatasetFormat::Json },
        sample: None,
        pipeline,
        correction: CorrectionMode::None,
        protocol: Protocol::Kfold { k: 5, seed: 1 },
        c: 10.0,
    }
}

fn end_to_end() -> Outcome {
    let ds = generate_synthetic(&SyntheticConfig {
        classes: 5,
        per_class: 75,
        cardinality: (3, 12),
        dim: 2,
        separation: 5.0,
        sharing: TemplateSharing::Paired,
        seed: 11,
        ..SyntheticConfig::default()
    })
    .map_err(e2s)?;
    let acc = |v| run_on_dataset(&e2e_spec(v), &ds).map(|r| r.mean_accuracy).map_err(e2s);
    let hat = acc(Variant::EmdhatSink)?;
    let jd = acc(Variant::Emjd)?;
    let rubner = acc(Variant::EmdRubner)?;
    let line = format!("EMDHat {hat:.1}%, EMJD {jd:.1}%, Rubner EMD {rubner:.1}%");
    ensure(hat >= 95.0 && (jd - hat).abs() <= 2.0 && hat - rubner >= 5.0, || line.clone())?;
    Ok(line)
}

fn posture() -> Outcome {
    let path = std::env::var("EMDKERN_POSTURE_CSV").map_err(|_| "SKIP".to_string())?;
    let mut pipeline = PipelineSpec::new(GroundSpec { kind: "euclidean".into(), threshold: Some(100.0) }, Variant::EmdhatSink);
    pipeline.rbf = RbfStage::Auto;
    let spec = ExperimentSpec {
        dataset: DatasetSource { path, format: DatasetFormat::Posture },
        sample: Some(SampleSpec { per_class_per_group: 75, seed: 1 }),
        pipeline,
        correction: CorrectionMode::None,
        protocol: Protocol::LeaveOneGroupOut,
        c: 10.0,
    };
    let r = emdkern::harness::run_experiment(&spec).map_err(e2s)?;
    let line = format!("mean {:.2}% ± {:.2} over {} users (target 95.02 ± 4.0)", r.mean_accuracy, r.std_accuracy, r.folds.len());
    ensure((r.mean_accuracy - 95.02).abs() <= 4.0, || line.clone())?;
    Ok(line)
}

fn main() {
    let criteria = [
        Criterion { name: "1-D transport oracle", budget: Duration::from_secs(10), run: line_transport },
        Criterion { name: "circle transport oracle", budget: Duration::from_secs(20), run: circle_transport },
        Criterion { name: "discrete-metric reduction", budget: Duration::from_secs(5), run: discrete_reduction },
        Criterion { name: "T_K / biotope preservation", budget: Duration::from_secs(30), run: preservation },
        Criterion { name: "closed-form nesting", budget: Duration::from_secs(30), run: nesting },
        Criterion { name: "CND -> RBF bridge", budget: Duration::from_secs(20), run: rbf_bridge },
        Criterion { name: "constant ground distance", budget: Duration::from_secs(30), run: constant_ground },
        Criterion { name: "two-point Brownian bridge", budget: Duration::from_secs(30), run: brownian_bridge },
        Criterion { name: "circle non-CND witness", budget: Duration::from_secs(60), run: circle_witness },
        Criterion { name: "KSVM correctness", budget: Duration::from_secs(60), run: ksvm },
        Criterion { name: "shift correctness", budget: Duration::from_secs(60), run: shift },
        Criterion { name: "end-to-end synthetic", budget: Duration::from_secs(300), run: end_to_end },
        Criterion { name: "posture band (optional)", budget: Duration::from_secs(1800), run: posture },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (tag, detail) = match outcome {
            Err(msg) if msg == "SKIP" => ("SKIP", "set EMDKERN_POSTURE_CSV to the raw posture CSV to run".to_string()),
            Ok(_) if took > c.budget => ("FAIL", format!("over the {:?} budget", c.budget)),
            Ok(detail) => ("PASS", detail),
            Err(msg) => ("FAIL", msg),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag}  {:<28} {:>7.2}s  {detail}", c.name, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

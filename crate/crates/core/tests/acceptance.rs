//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gmacsec::channel::{Alphabets, Builtin, GmacChannel};
use gmacsec::closed_form::{
    binary_region_slice, binary_secrecy_capacity, binary_time_sharing_secrecy, gaussian_secrecy_capacity, GaussianBranch,
    GaussianParams,
};
use gmacsec::info::{binary_entropy, binary_epi_floor, bsc_vector_output, entropy_of};
use gmacsec::regions::{
    contains, convexify, degraded_region, inner_region_one, linear_grid, secrecy_capacity_region_one, two_message_inner_bound, Axis,
    DistributionGrid, GridConfig, OneMessageDist, RatePoint, TwoMessageDist,
};
use gmacsec::sim::{measure_equivocation, simulate, Codebook, DecoderMode, Encoder, InputDist, SimConfig};
use gmacsec::verify::{random_kernel, verify_thm8};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("{what} took {t:?}, limit {limit:?}"))?;
    Ok(t)
}

fn binary_region_reproduced() -> Outcome {
    let start = Instant::now();
    let ch = GmacChannel::builtin(Builtin::MultiplierBias).map_err(|e| e.to_string())?;
    let trace = secrecy_capacity_region_one(&ch, &DistributionGrid::Lattice(GridConfig::default())).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 0..50 {
        let r0 = k as f64 / 49.0;
        let best = trace
            .maximize(Axis::R1, &[(Axis::R0, r0)])
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("no point with R0 >= {r0}"))?;
        worst = worst.max((best - (1.0 - r0)).abs());
    }
    let t = within(start, Duration::from_secs(10), "region evaluation")?;
    ensure(worst <= 1e-6, || format!("boundary deviates from R0 + R1 = 1 by {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e} over 50 slices in {t:.2?}"))
}

fn binary_endpoints() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..=1000 {
        let r0 = k as f64 / 1000.0;
        let zero = binary_secrecy_capacity(0.0, r0).map_err(|e| e.to_string())?;
        let half = binary_secrecy_capacity(0.5, r0).map_err(|e| e.to_string())?;
        worst = worst.max(zero.abs()).max((half - (1.0 - r0)).abs());
    }
    for k in 0..=100 {
        let p = 0.5 * k as f64 / 100.0;
        let c = binary_secrecy_capacity(p, 0.0).map_err(|e| e.to_string())?;
        worst = worst.max((c - binary_entropy(p).unwrap()).abs());
    }
    let t = within(start, Duration::from_secs(1), "endpoint sweep")?;
    ensure(worst <= 1e-9, || format!("endpoint error {worst:e}"))?;
    Ok(format!("max endpoint error {worst:.1e} in {t:.2?}"))
}

fn time_sharing_suboptimal() -> Outcome {
    let p = 0.11;
    let mut min_gap = f64::INFINITY;
    for k in 1..1000 {
        let r0 = k as f64 / 1000.0;
        let gap = binary_secrecy_capacity(p, r0).unwrap() - binary_time_sharing_secrecy(p, r0).unwrap();
        ensure(gap > 1e-9, || format!("gap {gap:e} at R0 = {r0}"))?;
        min_gap = min_gap.min(gap);
    }
    let mid = binary_secrecy_capacity(p, 0.5).unwrap() - binary_time_sharing_secrecy(p, 0.5).unwrap();
    ensure(mid > 0.01 + 1e-9, || format!("gap at R0 = 0.5 is {mid}"))?;
    // value fixed by an independent high-precision evaluation
    ensure((mid - (0.28642351814083731 - 0.24995797908226400)).abs() < 1e-9, || format!("gap at 0.5 = {mid}"))?;
    Ok(format!("interior gap >= {min_gap:.2e}, gap at 0.5 = {mid:.6}"))
}

fn gaussian_shape() -> Outcome {
    let mk = |n2: f64| GaussianParams::new(10.0, 10.0, 1.0, n2).map(|p| p.0).map_err(|e| e.to_string());
    let mut jump = 0.0f64;
    let mut grids = Vec::new();
    for n2 in [2.0, 5.0, 10.0] {
        let g = mk(n2)?;
        let t = g.threshold();
        let flat = gaussian_secrecy_capacity(&g, t).unwrap();
        let above = gaussian_secrecy_capacity(&g, t + 1e-10).unwrap();
        ensure(flat.branch == GaussianBranch::Flat && above.branch == GaussianBranch::Bisected, || "branch labels".into())?;
        jump = jump.max((flat.value - above.value).abs());
        let r0s = linear_grid(0.0, 2.7, 0.0027);
        let vals: Vec<f64> = r0s.iter().map(|&r0| gaussian_secrecy_capacity(&g, r0).unwrap().value).collect();
        if let Some(w) = vals.windows(2).position(|w| w[1] > w[0] + 1e-12) {
            return Err(format!("Cs increases in R0 at {} for N2 = {n2}", r0s[w]));
        }
        grids.push(vals);
    }
    ensure(jump <= 1e-9, || format!("branch jump {jump:e}"))?;
    for pair in grids.windows(2) {
        if pair[0].iter().zip(&pair[1]).any(|(a, b)| b + 1e-12 < *a) {
            return Err("Cs decreases as N2 grows".into());
        }
    }
    let same = mk(1.0)?;
    let worst = linear_grid(0.0, 2.7, 0.01)
        .iter()
        .map(|&r0| gaussian_secrecy_capacity(&same, r0).unwrap().value.abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-9, || format!("Cs at N2 = N reaches {worst:e}"))?;
    Ok(format!("threshold jump {jump:.1e}, monotone on 3 noise levels"))
}

fn thm8_equivalence() -> Outcome {
    let start = Instant::now();
    let report = verify_thm8(1000, 64, 2024).map_err(|e| e.to_string())?;
    let t = within(start, Duration::from_secs(60), "verification")?;
    ensure(report.disagreements == 0, || {
        format!("{} disagreements, first {:?}", report.disagreements, report.counterexamples.first())
    })?;
    Ok(format!("{} cells, 0 disagreements in {t:.2?}", report.cells_checked))
}

fn random_one_message(ch: &GmacChannel, rng: &mut ChaCha8Rng) -> OneMessageDist {
    let a = ch.alphabets();
    let q = 2;
    OneMessageDist::new(q, random_kernel(1, q * a.x2, rng), random_kernel(q, 2, rng), random_kernel(2, a.x1, rng), None).unwrap()
}

fn specialization_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let alphabets = Alphabets { x1: 2, x2: 2, y: 2, y1: 2, y2: 2 };
    let mut compared = 0usize;
    for c in 0..20 {
        let ch = GmacChannel::random(alphabets, &mut rng);
        let d1 = random_one_message(&ch, &mut rng);
        let d2 = TwoMessageDist::from_one_message(&d1).map_err(|e| e.to_string())?;
        let r0s = linear_grid(0.0, 1.0, 0.05);
        let one = inner_region_one(&ch, &DistributionGrid::Explicit(vec![d1.clone()]), &r0s).map_err(|e| e.to_string())?;
        // Rate grid plus the exact rates of every one-message vertex, so both
        // hulls are built from the same rate pairs.
        let mut triples: Vec<(f64, f64, f64)> =
            r0s.iter().flat_map(|&r0| linear_grid(0.0, 1.0, 0.05).into_iter().map(move |r1| (r0, r1, 0.0))).collect();
        triples.extend(one.points.iter().map(|t| (t.point.r0, t.point.r1, 0.0)));
        let two = two_message_inner_bound(&ch, &d2, &triples).map_err(|e| e.to_string())?;
        ensure(!two.points.is_empty(), || format!("channel {c}: empty two-message region"))?;
        for t in &two.points {
            let p = RatePoint::one_message(t.point.r0, t.point.r1, t.point.r1e);
            ensure(contains(&one, &p, 1e-9).unwrap_or(false), || format!("channel {c}: {p:?} outside the one-message region"))?;
            compared += 1;
        }
        for t in &one.points {
            ensure(contains(&two, &t.point, 1e-9).unwrap_or(false), || {
                format!("channel {c}: {:?} outside the two-message region", t.point)
            })?;
            compared += 1;
        }
    }
    Ok(format!("20 channels, {compared} vertices contained both ways"))
}

fn degraded_cross_check() -> Outcome {
    let mut worst = 0.0f64;
    let r0s = linear_grid(0.0, 1.0, 0.05);
    for p in [0.1, 0.3, 0.5] {
        let ch = GmacChannel::builtin(Builtin::DegradedBinary { p }).map_err(|e| e.to_string())?;
        let lattice = degraded_region(&ch, &DistributionGrid::Lattice(GridConfig::default()), &r0s).map_err(|e| e.to_string())?;
        let k = lattice.grid.lattice_k_used;
        for j in 0..=k / 2 {
            let alpha = j as f64 / k as f64;
            let d = OneMessageDist::binary_superposition(alpha).map_err(|e| e.to_string())?;
            let single = degraded_region(&ch, &DistributionGrid::Explicit(vec![d]), &r0s).map_err(|e| e.to_string())?;
            for &r0 in &r0s {
                let closed = binary_region_slice(p, alpha, r0).map_err(|e| e.to_string())?.slice(r0, false);
                let mut grid_pts: Vec<RatePoint> = single.rate_points().into_iter().filter(|q| q.r0 == r0).collect();
                let mut closed_pts: Vec<RatePoint> =
                    convexify(&closed).into_iter().map(|q| RatePoint { r0, ..q }).collect();
                let key = |a: &RatePoint, b: &RatePoint| (a.r1, a.r1e).partial_cmp(&(b.r1, b.r1e)).unwrap();
                grid_pts.sort_by(key);
                closed_pts.sort_by(key);
                closed_pts.dedup();
                ensure(grid_pts.len() == closed_pts.len(), || {
                    format!("p = {p}, alpha = {alpha}, R0 = {r0}: {} vs {} vertices", grid_pts.len(), closed_pts.len())
                })?;
                for (g, c) in grid_pts.iter().zip(&closed_pts) {
                    worst = worst.max((g.r1 - c.r1).abs()).max((g.r1e - c.r1e).abs());
                }
                for c in &closed {
                    ensure(contains(&lattice, c, 1e-6).unwrap_or(false), || {
                        format!("p = {p}: closed-form point {c:?} missing from the grid region")
                    })?;
                }
            }
        }
        // The grid never exceeds the capacity curve.
        for &r0 in &r0s {
            let best = lattice.maximize(Axis::R1e, &[(Axis::R0, r0)]).map_err(|e| e.to_string())?.unwrap_or(0.0);
            let cap = binary_secrecy_capacity(p, r0).unwrap();
            ensure(best <= cap + 1e-6, || format!("p = {p}, R0 = {r0}: grid {best} above capacity {cap}"))?;
        }
    }
    ensure(worst <= 1e-6, || format!("vertex mismatch {worst:e}"))?;
    Ok(format!("3 channels, shared alpha lattice, max vertex mismatch {worst:.1e}"))
}

fn mrs_gerber() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut checked = 0usize;
    let mut min_slack = f64::INFINITY;
    for n in 1..=4usize {
        let len = 1usize << n;
        for trial in 0..300 {
            let mut px: Vec<f64> = (0..len).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            // Sparse supports stress the low-entropy end.
            if trial % 3 == 0 {
                let keep = rng.gen_range(1..=len);
                for (i, v) in px.iter_mut().enumerate() {
                    if (i * 7 + trial) % len >= keep {
                        *v = 0.0;
                    }
                }
            }
            let s: f64 = px.iter().sum();
            px.iter_mut().for_each(|v| *v /= s);
            let hx = entropy_of(&px);
            for p0 in [0.01, 0.11, 0.25, 0.4, 0.5] {
                let hy = entropy_of(&bsc_vector_output(&px, p0).map_err(|e| e.to_string())?);
                let floor = n as f64 * binary_epi_floor((hx / n as f64).min(1.0), p0).map_err(|e| e.to_string())?;
                let slack = hy - floor;
                ensure(slack >= -1e-10, || format!("n = {n}, p0 = {p0}: H(Y) = {hy} < {floor}"))?;
                min_slack = min_slack.min(slack);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} checks over 1200 distributions, min slack {min_slack:.1e}"))
}

fn corner_witness() -> Outcome {
    let ch = GmacChannel::builtin(Builtin::MultiplierBias).map_err(|e| e.to_string())?;
    let cb = Codebook::multiplier_corner(&ch).map_err(|e| e.to_string())?;
    let enc = Encoder::new(&cb, 1.0, 0.0).map_err(|e| e.to_string())?;
    let s = measure_equivocation(&cb, &enc, &ch, 10_000, 1, DecoderMode::Map).map_err(|e| e.to_string())?;
    ensure(s.equivocation1.mean == 1.0, || format!("equivocation {}", s.equivocation1.mean))?;
    ensure(s.lambda.mean == 0.0, || format!("lambda {}", s.lambda.mean))?;
    ensure(s.max_posterior_deviation1 == 0.0, || format!("posterior deviation {}", s.max_posterior_deviation1))?;
    Ok("equivocation 1.0, lambda 0 over 10^4 trials".into())
}

fn simulator_trend() -> Outcome {
    let start = Instant::now();
    let ch = GmacChannel::builtin(Builtin::DegradedBinary { p: 0.3 }).map_err(|e| e.to_string())?;
    let input = InputDist::binary_superposition(0.5).map_err(|e| e.to_string())?;
    // 70% of the destination bound I(X1; Y | X2, Q) = 1 bit.
    let rate = 0.7;
    let target = 0.5812908992306926;
    let mut passed = 0;
    let mut lines = Vec::new();
    for seed in [101u64, 202, 303] {
        let run = |n: usize| {
            let cfg = SimConfig {
                n,
                r0: 0.0,
                r1_prime: rate,
                r1: rate,
                r2_prime: 0.0,
                r2: 0.0,
                eps: None,
                seed,
                trials: 10_000,
                decoder: DecoderMode::Map,
            };
            simulate(&ch, &input, &cfg).map_err(|e| e.to_string())
        };
        let (s8, s16) = (run(8)?, run(16)?);
        let ok = s16.lambda.mean < s8.lambda.mean && (s16.equivocation1.mean - target).abs() <= 0.15;
        passed += usize::from(ok);
        lines.push(format!(
            "seed {seed}: lambda {:.3}->{:.3}, equivocation {:.4}",
            s8.lambda.mean, s16.lambda.mean, s16.equivocation1.mean
        ));
    }
    let t = within(start, Duration::from_secs(300), "simulation")?;
    ensure(passed >= 2, || format!("only {passed}/3 seeds pass: {}", lines.join("; ")))?;
    Ok(format!("{passed}/3 seeds pass in {t:.1?} ({})", lines.join("; ")))
}

fn run_cli(args: &[&str], out: &std::path::Path) -> Result<Vec<u8>, String> {
    let mut full = vec!["gmacsec"];
    full.extend_from_slice(args);
    let out_s = out.to_str().unwrap().to_string();
    full.extend(["--out", &out_s]);
    let code = gmacsec::cli::run(full.iter().copied());
    ensure(code == 0, || format!("{args:?} exited with {code}"))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: Vec<Vec<&str>> = vec![
        vec!["region", "--builtin", "multiplier_bias", "--theorem", "secrecy1"],
        vec!["region", "--builtin", "random", "--theorem", "inner2", "--seed", "5"],
        vec!["region", "--builtin", "degraded_binary", "--p", "0.2", "--theorem", "degraded", "--format", "doc"],
        vec!["figure", "--figure", "fig5"],
        vec!["figure", "--figure", "fig7", "--format", "doc"],
        vec!["figure", "--figure", "fig8", "--seed", "3"],
        vec!["simulate", "--builtin", "degraded_binary", "--p", "0.3", "--n", "12", "--r1", "0.7", "--trials", "2000", "--seed", "9"],
        vec!["simulate", "--corner", "--trials", "500", "--seed", "1", "--format", "doc"],
        vec!["verify-thm8", "--instances", "100", "--grid", "32", "--seed", "4"],
    ];
    for (i, cmd) in commands.iter().enumerate() {
        let a = run_cli(cmd, &dir.path().join(format!("a{i}")))?;
        let b = run_cli(cmd, &dir.path().join(format!("b{i}")))?;
        ensure(a == b, || format!("{cmd:?} differs between runs"))?;
    }
    Ok(format!("{} seeded commands byte-identical", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("binary example region", binary_region_reproduced),
        ("binary closed-form endpoints", binary_endpoints),
        ("time sharing strictly suboptimal", time_sharing_suboptimal),
        ("Gaussian continuity and monotonicity", gaussian_shape),
        ("explicit and union forms agree", thm8_equivalence),
        ("two-message bound specializes", specialization_chain),
        ("degraded grid matches closed form", degraded_cross_check),
        ("binary entropy floor holds", mrs_gerber),
        ("corner codebook is perfectly secret", corner_witness),
        ("simulator error and equivocation trend", simulator_trend),
        ("seeded commands are deterministic", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

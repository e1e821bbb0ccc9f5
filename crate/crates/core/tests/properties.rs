use gmacsec::channel::{Alphabets, Builtin, GmacChannel};
use gmacsec::closed_form::{
    binary_secrecy_capacity, binary_time_sharing_secrecy, gaussian_secrecy_capacity, GaussianParams,
};
use gmacsec::regions::{
    contains, inner_bound_one, linear_grid, mi_bundle_one_message, outer_bound_one, secrecy_capacity_at_r0,
    secrecy_capacity_region_one, DistributionGrid, GridConfig, OneMessageBounds, OneMessageDist, RatePoint,
};
use gmacsec::sim::{simulate, DecoderMode, InputDist, PartitionMap, SimConfig};
use gmacsec::verify::random_kernel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_one_message(ch: &GmacChannel, rng: &mut ChaCha8Rng, with_v: bool) -> OneMessageDist {
    let a = ch.alphabets();
    let d = OneMessageDist::new(2, random_kernel(1, 2 * a.x2, rng), random_kernel(2, 2, rng), random_kernel(2, a.x1, rng), None)
        .unwrap();
    if with_v {
        d.with_v_equal_q()
    } else {
        d
    }
}

fn binary_alphabets() -> Alphabets {
    Alphabets { x1: 2, x2: 2, y: 2, y1: 2, y2: 2 }
}

fn normal_cdf(x: f64, var: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / (2.0 * var).sqrt()))
}

/// Mass of `N(mean, var)` in each of `edges.len() + 1` bins.
fn bin_masses(mean: f64, var: f64, edges: &[f64]) -> Vec<f64> {
    let mut cdf: Vec<f64> = vec![0.0];
    cdf.extend(edges.iter().map(|e| normal_cdf(e - mean, var)));
    cdf.push(1.0);
    cdf.windows(2).map(|w| w[1] - w[0]).collect()
}

// 4-level quantized pair: Y from X1 + X2 + Z, Y2 from Y's level plus independent noise.
#[test]
fn quantized_gaussian_pair_is_stochastically_degraded() {
    let (n, n2) = (1.0, 3.0);
    let levels = [-3.0, -1.0, 1.0, 3.0];
    let edges = [-2.0, 0.0, 2.0];
    let amp = [-1.0, 1.0];
    let kernel: Vec<Vec<f64>> = levels.iter().map(|&c| bin_masses(c, n2 - n, &edges)).collect();
    let a = Alphabets { x1: 2, x2: 2, y: 4, y1: 1, y2: 4 };
    let mut t = Vec::new();
    for x1 in 0..2 {
        for x2 in 0..2 {
            let py = bin_masses(amp[x1] + amp[x2], n, &edges);
            for y in 0..4 {
                for y2 in 0..4 {
                    t.push(py[y] * kernel[y][y2]);
                }
            }
        }
    }
    let ch = GmacChannel::new(a, t).unwrap();
    let rep = ch.find_stochastic_degradation(1e-9);
    assert!(rep.stochastically_degraded, "residual {}", rep.residual);
    assert!(rep.residual < 1e-9);
}

#[test]
fn outer_matches_inner_except_first_bound_when_v_is_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let ch = GmacChannel::random(binary_alphabets(), &mut rng);
        let d = random_one_message(&ch, &mut rng, true);
        let mi = mi_bundle_one_message(&ch, &d).unwrap();
        let (inner, outer) = (OneMessageBounds::inner(&mi), OneMessageBounds::outer(&mi).unwrap());
        assert_eq!((inner.sum, inner.re, inner.re_sum), (outer.sum, outer.re, outer.re_sum));
        // With V = Q the first bound conditions on the same variables.
        assert!((inner.r1 - outer.r1).abs() < 1e-12);
        let r0s = linear_grid(0.0, 1.0, 0.1);
        let ip = inner_bound_one(&ch, &d, &r0s).unwrap();
        for p in &ip {
            assert!(outer.admits(p, true, 1e-9), "{p:?}");
        }
        assert!(!outer_bound_one(&ch, &d, &r0s).unwrap().is_empty());
    }
}

#[test]
fn secrecy_capacity_is_nonincreasing_in_r0() {
    let ch = GmacChannel::builtin(Builtin::MultiplierBias).unwrap();
    let grid = DistributionGrid::Lattice(GridConfig { lattice_k: 8, ..GridConfig::default() });
    let mut prev = f64::INFINITY;
    for r0 in linear_grid(0.0, 1.0, 0.1) {
        let v = secrecy_capacity_at_r0(&ch, r0, &grid).unwrap().value;
        assert!(v <= prev + 1e-9, "R0 = {r0}: {v} > {prev}");
        prev = v;
    }
}

#[test]
fn region_points_are_nonnegative_and_hull_is_convex() {
    let ch = GmacChannel::builtin(Builtin::DegradedBinary { p: 0.2 }).unwrap();
    let grid = DistributionGrid::Lattice(GridConfig { lattice_k: 8, ..GridConfig::default() });
    let region = secrecy_capacity_region_one(&ch, &grid).unwrap();
    let pts = region.rate_points();
    assert!(pts.iter().all(|p| p.coords().iter().all(|&c| c >= 0.0)));
    for a in &pts {
        for b in &pts {
            let mid = RatePoint::secrecy(0.5 * (a.r0 + b.r0), 0.5 * (a.r1 + b.r1), 0.5 * (a.r2 + b.r2));
            assert!(contains(&region, &mid, 1e-9).unwrap(), "{a:?} {b:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binary_capacity_monotone(p in 0.01f64..0.5, r0 in 0.0f64..0.95, dp in 0.0f64..0.05, dr in 0.0f64..0.05) {
        let c = binary_secrecy_capacity(p, r0).unwrap();
        prop_assert!(binary_secrecy_capacity(p, r0 + dr).unwrap() <= c + 1e-12);
        prop_assert!(binary_secrecy_capacity((p + dp).min(0.5), r0).unwrap() >= c - 1e-12);
        prop_assert!(c >= binary_time_sharing_secrecy(p, r0).unwrap() - 1e-12);
    }

    #[test]
    fn gaussian_r0_of_alpha_strictly_decreasing(p1 in 0.5f64..20.0, p2 in 0.5f64..20.0, n in 0.5f64..4.0, a in 0.0f64..0.99, da in 0.001f64..0.01) {
        let (g, _) = GaussianParams::new(p1, p2, n, 2.0 * n).unwrap();
        prop_assert!(g.r0_of_alpha((a + da).min(1.0)) < g.r0_of_alpha(a));
    }

    #[test]
    fn gaussian_capacity_monotone(n2 in 1.0f64..20.0, r0 in 0.0f64..2.5, dr in 0.0f64..0.2) {
        let (g, _) = GaussianParams::new(10.0, 10.0, 1.0, n2).unwrap();
        let c = gaussian_secrecy_capacity(&g, r0).unwrap().value;
        prop_assert!(gaussian_secrecy_capacity(&g, r0 + dr).unwrap().value <= c + 1e-9);
        let (g2, _) = GaussianParams::new(10.0, 10.0, 1.0, n2 + 1.0).unwrap();
        prop_assert!(gaussian_secrecy_capacity(&g2, r0).unwrap().value >= c - 1e-9);
    }

    #[test]
    fn round_robin_balance(domain in 1usize..500, range in 1usize..50) {
        prop_assume!(range <= domain);
        let p = PartitionMap::round_robin(domain, range).unwrap();
        prop_assert!(p.balance_ratio() <= 2.0);
        prop_assert_eq!((0..range).map(|j| p.cell(j).len()).sum::<usize>(), domain);
    }
}

fn sim_config(seed: u64, n: usize, decoder: DecoderMode) -> SimConfig {
    SimConfig {
        n,
        r0: 0.0,
        r1_prime: 0.7,
        r1: 0.7,
        r2_prime: 0.0,
        r2: 0.0,
        eps: None,
        seed,
        trials: 2000,
        decoder,
    }
}

#[test]
fn simulation_is_deterministic_and_bounded() {
    let ch = GmacChannel::builtin(Builtin::DegradedBinary { p: 0.3 }).unwrap();
    let input = InputDist::binary_superposition(0.5).unwrap();
    let cfg = sim_config(17, 10, DecoderMode::Map);
    let a = simulate(&ch, &input, &cfg).unwrap();
    assert_eq!(a, simulate(&ch, &input, &cfg).unwrap());
    a.check_invariants().unwrap();
    assert!(a.equivocation1.mean <= a.message_rates[0] + 1e-9);
}

#[test]
fn map_decoder_beats_typicality() {
    let ch = GmacChannel::builtin(Builtin::DegradedBinary { p: 0.3 }).unwrap();
    let input = InputDist::binary_superposition(0.5).unwrap();
    for seed in [101, 202, 303] {
        let map = simulate(&ch, &input, &sim_config(seed, 12, DecoderMode::Map)).unwrap();
        let eps = gmacsec::sim::default_eps(12);
        let typ = simulate(&ch, &input, &sim_config(seed, 12, DecoderMode::Typicality { eps })).unwrap();
        assert!(map.lambda.mean <= typ.lambda.mean, "seed {seed}: {} > {}", map.lambda.mean, typ.lambda.mean);
    }
}

#[test]
fn error_falls_with_blocklength_for_most_seeds() {
    let ch = GmacChannel::builtin(Builtin::DegradedBinary { p: 0.3 }).unwrap();
    let input = InputDist::binary_superposition(0.5).unwrap();
    let falling = [101u64, 202, 303]
        .iter()
        .filter(|&&seed| {
            let short = simulate(&ch, &input, &sim_config(seed, 8, DecoderMode::Map)).unwrap();
            let long = simulate(&ch, &input, &sim_config(seed, 16, DecoderMode::Map)).unwrap();
            long.lambda.mean < short.lambda.mean
        })
        .count();
    assert!(falling >= 2, "only {falling} of 3 seeds");
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_gmacsec")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn cli_validation_errors_exit_one() {
    assert_eq!(cli(&["region", "--builtin", "degraded_binary", "--p", "0.7", "--theorem", "degraded"]).0, 1);
    assert_eq!(cli(&["figure", "--figure", "fig9"]).0, 1);
    assert_eq!(cli(&["figure", "--figure", "fig7", "--N", "5", "--N2", "2"]).0, 1);
    assert_eq!(cli(&["no-such-command"]).0, 1);
}

#[test]
fn cli_csv_has_header_and_footer() {
    let (code, text) = cli(&["figure", "--figure", "fig5"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "series,r0,value");
    let last = lines.last().unwrap();
    assert!(last.starts_with("# config_hash=") && last.contains("version="), "{last}");
}

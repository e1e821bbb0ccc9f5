//! Randomized cross-check of the explicit equivocation set against its union form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Alphabets, GmacChannel};
use crate::regions::{
    equivocation_set_explicit, equivocation_set_union_form, mi_bundle_two_message, random_mac_triple, Kernel, RegionError,
    TwoMessageDist, TwoMessageMi,
};

/// Membership tolerance shared by both forms.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Row-stochastic matrix with flat-Dirichlet rows.
pub fn random_kernel<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Kernel {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let s: f64 = raw.iter().sum();
        data.extend(raw.iter().map(|v| v / s));
    }
    Kernel { rows, cols, data }
}

/// Random two-message distribution with the given auxiliary cardinalities.
pub fn random_two_message_dist<R: Rng + ?Sized>(
    ch: &GmacChannel,
    q: usize,
    u: usize,
    v: usize,
    rng: &mut R,
) -> Result<TwoMessageDist, RegionError> {
    let a = ch.alphabets();
    TwoMessageDist::new(
        random_kernel(1, q, rng),
        random_kernel(q, u, rng),
        random_kernel(u, a.x1, rng),
        random_kernel(q, v, rng),
        random_kernel(v, a.x2, rng),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub instance: usize,
    pub mi: TwoMessageMi,
    pub rates: (f64, f64, f64),
    pub r1e: f64,
    pub r2e: f64,
    pub explicit: bool,
    pub union_form: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm8Report {
    pub instances: usize,
    pub grid: usize,
    pub seed: u64,
    pub cells_checked: usize,
    pub disagreements: usize,
    /// Up to the first 20 disagreeing cells, verbatim.
    pub counterexamples: Vec<Counterexample>,
}

/// Draws `instances` random channels, distributions and MAC-feasible rate
/// triples, then compares both forms on a `grid x grid` lattice over
/// `[0, R1] x [0, R2]`.
pub fn verify_thm8(instances: usize, grid: usize, seed: u64) -> Result<Thm8Report, RegionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = grid.max(2);
    let mut report = Thm8Report {
        instances,
        grid,
        seed,
        cells_checked: 0,
        disagreements: 0,
        counterexamples: Vec::new(),
    };
    for instance in 0..instances {
        let mi = random_bundle(&mut rng)?;
        let (r0, r1, r2) = random_mac_triple(&mi, &mut rng);
        check_instance(instance, &mi, (r0, r1, r2), grid, &mut report)?;
    }
    Ok(report)
}

/// A bundle from a random 2-ary channel and random auxiliaries; one in ten is
/// the all-zero bundle.
fn random_bundle(rng: &mut ChaCha8Rng) -> Result<TwoMessageMi, RegionError> {
    if rng.gen_range(0..10) == 0 {
        return Ok(TwoMessageMi::mac_only(0.0, 0.0, 0.0, 0.0));
    }
    let alphabets = Alphabets { x1: 2, x2: 2, y: 2, y1: 2, y2: 2 };
    let ch = GmacChannel::random(alphabets, rng);
    let q = rng.gen_range(1..=2);
    let u = rng.gen_range(2..=3);
    let v = rng.gen_range(2..=3);
    let d = random_two_message_dist(&ch, q, u, v, rng)?;
    mi_bundle_two_message(&ch, &d)
}

pub(crate) fn check_instance(
    instance: usize,
    mi: &TwoMessageMi,
    rates: (f64, f64, f64),
    grid: usize,
    report: &mut Thm8Report,
) -> Result<(), RegionError> {
    let (r0, r1, r2) = rates;
    let explicit = equivocation_set_explicit(r0, r1, r2, mi)?;
    let union = equivocation_set_union_form(r0, r1, r2, mi)?;
    for i in 0..grid {
        for j in 0..grid {
            let r1e = r1 * i as f64 / (grid - 1) as f64;
            let r2e = r2 * j as f64 / (grid - 1) as f64;
            let a = explicit.contains(r1e, r2e, MEMBERSHIP_TOL);
            let b = union.contains(r1e, r2e, MEMBERSHIP_TOL);
            report.cells_checked += 1;
            if a != b {
                report.disagreements += 1;
                if report.counterexamples.len() < 20 {
                    report.counterexamples.push(Counterexample {
                        instance,
                        mi: *mi,
                        rates,
                        r1e,
                        r2e,
                        explicit: a,
                        union_form: b,
                    });
                }
            }
        }
    }
    Ok(())
}

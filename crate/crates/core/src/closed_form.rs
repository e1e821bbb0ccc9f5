//! Closed-form regions for the binary and Gaussian channels with one
//! confidential message.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::info::{h2, inverse_binary_entropy, star, InfoError};
use crate::regions::OneMessageBounds;

const BISECT_TOL: f64 = 1e-12;
const BISECT_MAX_ITER: usize = 200;
/// Finite stand-in for an eavesdropper noise variance of infinity.
pub const N2_INFINITY: f64 = 1e12;

#[derive(Debug, Error)]
pub enum ClosedFormError {
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid Gaussian parameters: {0}")]
    Gaussian(String),
    #[error(transparent)]
    Info(#[from] InfoError),
}

fn check(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), ClosedFormError> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ClosedFormError::Range { what, value, lo, hi })
    }
}

fn half_log(x: f64) -> f64 {
    0.5 * x.log2()
}

/// Bounds of the binary channel's capacity-equivocation region at superposition
/// parameter `alpha` (raw right-hand sides; slice with `clamp = false`).
pub fn binary_region_slice(p: f64, alpha: f64, r0: f64) -> Result<OneMessageBounds, ClosedFormError> {
    check("p", p, 0.0, 0.5)?;
    check("alpha", alpha, 0.0, 0.5)?;
    check("R0", r0, 0.0, f64::INFINITY)?;
    let leak = h2(star(p, alpha)?) - h2(p);
    Ok(OneMessageBounds {
        r1: h2(alpha),
        sum: 1.0,
        re: h2(alpha) - leak,
        re_sum: 1.0 - leak,
    })
}

/// Secrecy capacity of the binary channel at common rate `r0`.
pub fn binary_secrecy_capacity(p: f64, r0: f64) -> Result<f64, ClosedFormError> {
    check("p", p, 0.0, 0.5)?;
    check("R0", r0, 0.0, 1.0)?;
    let alpha = inverse_binary_entropy(1.0 - r0)?;
    Ok((h2(alpha) + h2(p) - h2(star(p, alpha)?)).max(0.0))
}

/// Chord from `(0, h(p))` to `(1, 0)`: time sharing between the two extreme
/// perfect-secrecy operating points.
pub fn binary_time_sharing_secrecy(p: f64, r0: f64) -> Result<f64, ClosedFormError> {
    check("p", p, 0.0, 0.5)?;
    check("R0", r0, 0.0, 1.0)?;
    Ok((1.0 - r0) * h2(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub p1: f64,
    pub p2: f64,
    pub n: f64,
    pub n2: f64,
}

impl GaussianParams {
    /// Validates `P1, P2 > 0`, `0 < N <= N2`; an infinite `N2` becomes
    /// [`N2_INFINITY`] and the returned warning says so.
    pub fn new(p1: f64, p2: f64, n: f64, n2: f64) -> Result<(Self, Option<String>), ClosedFormError> {
        if !(p1 > 0.0 && p2 > 0.0 && p1.is_finite() && p2.is_finite()) {
            return Err(ClosedFormError::Gaussian(format!("powers must be positive, got P1 = {p1}, P2 = {p2}")));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(ClosedFormError::Gaussian(format!("N must be positive, got {n}")));
        }
        let (n2, warning) = if n2 == f64::INFINITY {
            (N2_INFINITY, Some(format!("N2 = inf replaced by {N2_INFINITY:e}")))
        } else {
            (n2, None)
        };
        if !(n2 >= n) {
            return Err(ClosedFormError::Gaussian(format!("need N <= N2, got N = {n}, N2 = {n2}")));
        }
        Ok((Self { p1, p2, n, n2 }, warning))
    }

    fn sum_rate(&self, alpha: f64) -> f64 {
        half_log(1.0 + (self.p1 + self.p2 + 2.0 * ((1.0 - alpha) * self.p1 * self.p2).sqrt()) / self.n)
    }

    fn user1_rate(&self, alpha: f64) -> f64 {
        half_log(1.0 + alpha * self.p1 / self.n)
    }

    fn leak(&self, alpha: f64) -> f64 {
        half_log(1.0 + alpha * self.p1 / self.n2)
    }

    /// Common rate at which the user-1 bound stops binding for correlation `alpha`:
    /// `1/2 log((P1 + P2 + 2 sqrt((1-alpha) P1 P2) + N) / (alpha P1 + N))`.
    /// Strictly decreasing in `alpha`.
    pub fn r0_of_alpha(&self, alpha: f64) -> f64 {
        half_log(
            (self.p1 + self.p2 + 2.0 * ((1.0 - alpha) * self.p1 * self.p2).sqrt() + self.n) / (alpha * self.p1 + self.n),
        )
    }

    /// End of the flat branch: `1/2 log((P1 + P2 + N) / (P1 + N))`.
    pub fn threshold(&self) -> f64 {
        half_log((self.p1 + self.p2 + self.n) / (self.p1 + self.n))
    }

    /// Largest common rate with a feasible correlation parameter (`alpha = 0`).
    pub fn r0_max(&self) -> f64 {
        self.r0_of_alpha(0.0)
    }
}

/// Bounds of the Gaussian region at correlation parameter `alpha`.
pub fn gaussian_region_slice(params: &GaussianParams, alpha: f64, r0: f64) -> Result<OneMessageBounds, ClosedFormError> {
    check("alpha", alpha, 0.0, 1.0)?;
    check("R0", r0, 0.0, f64::INFINITY)?;
    let (r1, sum, leak) = (params.user1_rate(alpha), params.sum_rate(alpha), params.leak(alpha));
    Ok(OneMessageBounds {
        r1,
        sum,
        re: r1 - leak,
        re_sum: sum - leak,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianBranch {
    /// `R0` at or below the threshold: `alpha* = 1`.
    Flat,
    /// `alpha*` found by bisection.
    Bisected,
    /// `R0` beyond the largest feasible common rate; value reported as 0.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCapacity {
    pub value: f64,
    pub alpha_star: f64,
    pub branch: GaussianBranch,
}

/// Solves `r0_of_alpha(alpha) = r0` on `[0, 1]` by bisection.
fn alpha_star(params: &GaussianParams, r0: f64) -> (f64, GaussianBranch) {
    if r0 <= params.threshold() {
        return (1.0, GaussianBranch::Flat);
    }
    if r0 > params.r0_max() {
        return (0.0, GaussianBranch::Infeasible);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if params.r0_of_alpha(mid) > r0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < BISECT_TOL {
            break;
        }
    }
    (0.5 * (lo + hi), GaussianBranch::Bisected)
}

/// Secrecy capacity of the Gaussian channel at common rate `r0`.
pub fn gaussian_secrecy_capacity(params: &GaussianParams, r0: f64) -> Result<GaussianCapacity, ClosedFormError> {
    check("R0", r0, 0.0, f64::INFINITY)?;
    let (alpha, branch) = alpha_star(params, r0);
    let value = match branch {
        GaussianBranch::Infeasible => 0.0,
        _ => (params.user1_rate(alpha) - params.leak(alpha)).max(0.0),
    };
    Ok(GaussianCapacity { value, alpha_star: alpha, branch })
}

/// Largest `R1` at common rate `r0` with no secrecy constraint.
pub fn gaussian_mac_rate(params: &GaussianParams, r0: f64) -> Result<f64, ClosedFormError> {
    check("R0", r0, 0.0, f64::INFINITY)?;
    let (alpha, branch) = alpha_star(params, r0);
    Ok(match branch {
        GaussianBranch::Infeasible => 0.0,
        _ => params.user1_rate(alpha),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

/// `(R0, value)` rows shared by all series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureTable {
    pub figure: String,
    pub r0: Vec<f64>,
    pub series: Vec<Series>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FigureRequest {
    /// Binary secrecy capacity for several crossover probabilities.
    Fig5 { ps: Vec<f64> },
    /// Binary capacity against the time-sharing chord.
    Fig6 { p: f64 },
    /// Gaussian secrecy capacity for several eavesdropper noise levels, plus the no-secrecy curve.
    Fig7 { p1: f64, p2: f64, n: f64, n2s: Vec<f64> },
}

impl FigureRequest {
    pub fn fig5_default() -> Self {
        FigureRequest::Fig5 { ps: vec![0.1, 0.2, 0.35, 0.5] }
    }

    pub fn fig6_default() -> Self {
        FigureRequest::Fig6 { p: 0.11 }
    }

    pub fn fig7_default() -> Self {
        FigureRequest::Fig7 { p1: 10.0, p2: 10.0, n: 1.0, n2s: vec![2.0, 5.0, 10.0] }
    }
}

pub fn figure_trace(req: &FigureRequest, r0_grid: &[f64]) -> Result<FigureTable, ClosedFormError> {
    let mut warnings = Vec::new();
    let (figure, series) = match req {
        FigureRequest::Fig5 { ps } => {
            let series = ps
                .iter()
                .map(|&p| {
                    let values = r0_grid
                        .iter()
                        .map(|&r0| binary_secrecy_capacity(p, r0))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(Series { label: format!("p={p}"), values })
                })
                .collect::<Result<Vec<_>, ClosedFormError>>()?;
            ("fig5", series)
        }
        FigureRequest::Fig6 { p } => {
            let cap = r0_grid.iter().map(|&r0| binary_secrecy_capacity(*p, r0)).collect::<Result<Vec<_>, _>>()?;
            let ts = r0_grid
                .iter()
                .map(|&r0| binary_time_sharing_secrecy(*p, r0))
                .collect::<Result<Vec<_>, _>>()?;
            (
                "fig6",
                vec![
                    Series { label: "capacity".into(), values: cap },
                    Series { label: "time_sharing".into(), values: ts },
                ],
            )
        }
        FigureRequest::Fig7 { p1, p2, n, n2s } => {
            let mut series = Vec::new();
            let mut mac_params = None;
            for &n2 in n2s {
                let (params, warn) = GaussianParams::new(*p1, *p2, *n, n2)?;
                warnings.extend(warn);
                mac_params.get_or_insert(params);
                let values = r0_grid
                    .iter()
                    .map(|&r0| gaussian_secrecy_capacity(&params, r0).map(|c| c.value))
                    .collect::<Result<Vec<_>, _>>()?;
                series.push(Series { label: format!("N2={n2}"), values });
            }
            let params = match mac_params {
                Some(p) => p,
                None => GaussianParams::new(*p1, *p2, *n, N2_INFINITY)?.0,
            };
            let values = r0_grid
                .iter()
                .map(|&r0| gaussian_mac_rate(&params, r0))
                .collect::<Result<Vec<_>, _>>()?;
            series.push(Series { label: "mac".into(), values });
            ("fig7", series)
        }
    };
    Ok(FigureTable {
        figure: figure.to_string(),
        r0: r0_grid.to_vec(),
        series,
        warnings,
    })
}

//! Exact finite-alphabet information arithmetic.
//!
//! Everything here is in bits. Distributions are dense row-major tensors;
//! the alphabets in this crate are tiny, so no sparse representation is kept.

use thiserror::Error;

/// Masses below this are treated as exact zeros inside entropy sums.
pub const ZERO_MASS: f64 = 1e-15;

/// Total-mass tolerance for a [`FiniteDist`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Negative information values within this distance of zero are rounding noise.
pub const NEGATIVE_MI_TOL: f64 = 1e-9;

const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITERS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("shape {shape:?} does not match {len} mass entries")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
    #[error("negative probability mass {0}")]
    NegativeMass(f64),
    #[error("total mass {0} differs from 1")]
    Normalization(f64),
    #[error("variable index {index} out of range for {nvars} variables")]
    InvalidVariable { index: usize, nvars: usize },
    #[error("variable {0} appears in more than one argument")]
    OverlappingSets(usize),
    #[error("empty variable set")]
    EmptySet,
    #[error("mutual information evaluated to {0}, below the rounding tolerance")]
    NegativeInformation(f64),
}

fn check_unit(what: &'static str, value: f64, hi: f64) -> Result<(), InfoError> {
    if (0.0..=hi).contains(&value) {
        Ok(())
    } else {
        Err(InfoError::Domain {
            what,
            value,
            lo: 0.0,
            hi,
        })
    }
}

/// Binary entropy `h(a)` with `0 log 0 = 0`.
pub fn binary_entropy(a: f64) -> Result<f64, InfoError> {
    check_unit("a", a, 1.0)?;
    Ok(h2(a))
}

// Unchecked kernel; callers guarantee a in [0, 1].
pub(crate) fn h2(a: f64) -> f64 {
    if a <= 0.0 || a >= 1.0 {
        return 0.0;
    }
    -a * a.log2() - (1.0 - a) * (1.0 - a).log2()
}

/// The unique `a` in `[0, 1/2]` with `h(a) = c`, found by bisection.
pub fn inverse_binary_entropy(c: f64) -> Result<f64, InfoError> {
    check_unit("c", c, 1.0)?;
    if c >= 1.0 {
        return Ok(0.5);
    }
    if c <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if h2(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < BISECTION_TOL * 1e-3 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Binary convolution `a * b = a(1 - b) + (1 - a)b`.
pub fn star(a: f64, b: f64) -> Result<f64, InfoError> {
    check_unit("a", a, 1.0)?;
    check_unit("b", b, 1.0)?;
    Ok(a * (1.0 - b) + (1.0 - a) * b)
}

/// Per-symbol output-entropy floor of a BSC(`p0`) driven by inputs of
/// per-symbol entropy `v`: `h(p0 * h^-1(v))`.
pub fn binary_epi_floor(v: f64, p0: f64) -> Result<f64, InfoError> {
    check_unit("v", v, 1.0)?;
    if !(p0 > 0.0 && p0 <= 0.5) {
        return Err(InfoError::Domain {
            what: "p0",
            value: p0,
            lo: 0.0,
            hi: 0.5,
        });
    }
    let a = inverse_binary_entropy(v)?;
    Ok(h2(star(p0, a)?))
}

/// Law of `X^n xor Z^n` for a pmf `px` over `{0,1}^n` (index bit `i` is
/// symbol `i`) and i.i.d. `Z_i ~ Bern(p0)` independent of `X^n`.
pub fn bsc_vector_output(px: &[f64], p0: f64) -> Result<Vec<f64>, InfoError> {
    check_unit("p0", p0, 1.0)?;
    let len = px.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(InfoError::ShapeMismatch { shape: vec![len], len });
    }
    let n = len.trailing_zeros();
    // One symbol at a time: mix each pair differing in bit i.
    let mut out = px.to_vec();
    for i in 0..n {
        let bit = 1usize << i;
        for x in 0..len {
            if x & bit == 0 {
                let (a, b) = (out[x], out[x | bit]);
                out[x] = (1.0 - p0) * a + p0 * b;
                out[x | bit] = p0 * a + (1.0 - p0) * b;
            }
        }
    }
    Ok(out)
}

/// Entropy (bits) of a probability vector, skipping near-zero masses.
pub fn entropy_of(mass: &[f64]) -> f64 {
    mass.iter()
        .filter(|&&p| p > ZERO_MASS)
        .map(|&p| -p * p.log2())
        .sum()
}

/// A joint probability mass function over a fixed list of finite variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDist {
    shape: Vec<usize>,
    mass: Vec<f64>,
}

impl FiniteDist {
    /// Validates shape, non-negativity and normalization.
    pub fn new(shape: Vec<usize>, mass: Vec<f64>) -> Result<Self, InfoError> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || expected != mass.len() {
            return Err(InfoError::ShapeMismatch {
                shape,
                len: mass.len(),
            });
        }
        if let Some(&neg) = mass.iter().find(|&&p| !(p >= 0.0)) {
            return Err(InfoError::NegativeMass(neg));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(InfoError::Normalization(total));
        }
        Ok(Self { shape, mass })
    }

    /// Builds the tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self, InfoError> {
        let len: usize = shape.iter().product();
        let mut mass = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            mass.push(f(&idx));
            advance(&mut idx, &shape);
        }
        Self::new(shape, mass)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn num_vars(&self) -> usize {
        self.shape.len()
    }

    fn check_vars(&self, vars: &[usize]) -> Result<(), InfoError> {
        for (k, &v) in vars.iter().enumerate() {
            if v >= self.shape.len() {
                return Err(InfoError::InvalidVariable {
                    index: v,
                    nvars: self.shape.len(),
                });
            }
            if vars[..k].contains(&v) {
                return Err(InfoError::OverlappingSets(v));
            }
        }
        Ok(())
    }

    /// Marginal mass over `vars`, laid out row-major in the order given.
    pub fn marginal_mass(&self, vars: &[usize]) -> Result<Vec<f64>, InfoError> {
        self.check_vars(vars)?;
        Ok(self.marginal_unchecked(vars))
    }

    fn marginal_unchecked(&self, vars: &[usize]) -> Vec<f64> {
        // Stride of each source variable inside the target tensor (0 if summed out).
        let mut target_stride = vec![0usize; self.shape.len()];
        let mut stride = 1usize;
        for &v in vars.iter().rev() {
            target_stride[v] = stride;
            stride *= self.shape[v];
        }
        let mut out = vec![0.0; stride];
        let mut idx = vec![0usize; self.shape.len()];
        let mut target = 0usize;
        let last = self.shape.len() - 1;
        for &p in &self.mass {
            out[target] += p;
            // Odometer step that keeps the target offset in sync.
            let mut k = last;
            loop {
                idx[k] += 1;
                target += target_stride[k];
                if idx[k] < self.shape[k] {
                    break;
                }
                target -= target_stride[k] * idx[k];
                idx[k] = 0;
                if k == 0 {
                    break;
                }
                k -= 1;
            }
        }
        out
    }

    pub fn marginal(&self, vars: &[usize]) -> Result<FiniteDist, InfoError> {
        let mass = self.marginal_mass(vars)?;
        Ok(FiniteDist {
            shape: vars.iter().map(|&v| self.shape[v]).collect(),
            mass,
        })
    }

    /// Shannon entropy of the marginal over `vars`.
    pub fn entropy(&self, vars: &[usize]) -> Result<f64, InfoError> {
        if vars.is_empty() {
            return Err(InfoError::EmptySet);
        }
        Ok(entropy_of(&self.marginal_mass(vars)?))
    }

    fn joint_entropy(&self, vars: &[usize]) -> f64 {
        if vars.is_empty() {
            0.0
        } else {
            entropy_of(&self.marginal_unchecked(vars))
        }
    }

    /// `I(A; B | C)` from exact marginals.
    ///
    /// `a` and `b` must be nonempty; `c` may be empty. Results within
    /// [`NEGATIVE_MI_TOL`] below zero are clamped to zero.
    pub fn cond_mutual_info(&self, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64, InfoError> {
        if a.is_empty() || b.is_empty() {
            return Err(InfoError::EmptySet);
        }
        let all: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        self.check_vars(&all)?;
        let ac: Vec<usize> = a.iter().chain(c).copied().collect();
        let bc: Vec<usize> = b.iter().chain(c).copied().collect();
        let value = self.joint_entropy(&ac) + self.joint_entropy(&bc)
            - self.joint_entropy(&all)
            - self.joint_entropy(c);
        clamp_information(value)
    }

    pub fn mutual_info(&self, a: &[usize], b: &[usize]) -> Result<f64, InfoError> {
        self.cond_mutual_info(a, b, &[])
    }
}

pub(crate) fn clamp_information(value: f64) -> Result<f64, InfoError> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -NEGATIVE_MI_TOL {
        Ok(0.0)
    } else {
        Err(InfoError::NegativeInformation(value))
    }
}

/// Row-major odometer increment.
pub(crate) fn advance(idx: &mut [usize], shape: &[usize]) {
    for k in (0..shape.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dist(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> FiniteDist {
        let len: usize = shape.iter().product();
        let raw: Vec<f64> = (0..len).map(|_| rng.gen::<f64>().powi(3)).collect();
        let total: f64 = raw.iter().sum();
        FiniteDist::new(shape, raw.into_iter().map(|p| p / total).collect()).unwrap()
    }

    // Independent route: I(A;B|C) = sum p(a,b,c) log p(a,b,c) p(c) / (p(a,c) p(b,c)),
    // accumulated directly over the full joint with explicit index arithmetic.
    fn brute_cmi(d: &FiniteDist, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        use std::collections::HashMap;
        let shape = d.shape().to_vec();
        let key = |idx: &[usize], vars: &[usize]| -> Vec<usize> { vars.iter().map(|&v| idx[v]).collect() };
        let mut pabc: HashMap<(Vec<usize>, Vec<usize>, Vec<usize>), f64> = HashMap::new();
        let mut pac: HashMap<(Vec<usize>, Vec<usize>), f64> = HashMap::new();
        let mut pbc: HashMap<(Vec<usize>, Vec<usize>), f64> = HashMap::new();
        let mut pc: HashMap<Vec<usize>, f64> = HashMap::new();
        let mut idx = vec![0; shape.len()];
        for &p in d.mass() {
            let (ka, kb, kc) = (key(&idx, a), key(&idx, b), key(&idx, c));
            *pabc.entry((ka.clone(), kb.clone(), kc.clone())).or_default() += p;
            *pac.entry((ka, kc.clone())).or_default() += p;
            *pbc.entry((kb, kc.clone())).or_default() += p;
            *pc.entry(kc).or_default() += p;
            advance(&mut idx, &shape);
        }
        pabc.iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|((ka, kb, kc), &p)| {
                let num = p * pc[kc];
                let den = pac[&(ka.clone(), kc.clone())] * pbc[&(kb.clone(), kc.clone())];
                p * (num / den).log2()
            })
            .sum()
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // mpmath, 40 digits
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_124_459_132_9).abs() < 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.01).is_err());
    }

    #[test]
    fn inverse_binary_entropy_values() {
        assert_eq!(inverse_binary_entropy(1.0).unwrap(), 0.5);
        assert_eq!(inverse_binary_entropy(0.0).unwrap(), 0.0);
        // mpmath bisection of h(a) = 0.8112781
        assert!((inverse_binary_entropy(0.8112781).unwrap() - 0.249_999_984_568_005_9).abs() < 1e-12);
        assert!(inverse_binary_entropy(1.5).is_err());
    }

    #[test]
    fn inverse_round_trip_on_grid() {
        for k in 0..=10_000 {
            let c = k as f64 / 10_000.0;
            let a = inverse_binary_entropy(c).unwrap();
            assert!((0.0..=0.5).contains(&a));
            assert!((h2(a) - c).abs() < 1e-10, "c={c}");
        }
    }

    #[test]
    fn star_values() {
        for b in [0.0, 0.1, 0.37, 1.0] {
            assert_eq!(star(0.5, b).unwrap(), 0.5);
            assert_eq!(star(0.0, b).unwrap(), b);
        }
        assert_eq!(star(0.25, 0.25).unwrap(), 0.375);
        assert!(star(0.2, 1.2).is_err());
    }

    #[test]
    fn star_commutative_and_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let (a, b, c): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            assert!((star(a, b).unwrap() - star(b, a).unwrap()).abs() < 1e-14);
            let left = star(a, star(b, c).unwrap()).unwrap();
            let right = star(star(a, b).unwrap(), c).unwrap();
            assert!((left - right).abs() < 1e-14);
        }
    }

    #[test]
    fn epi_floor_values() {
        for p0 in [0.05, 0.11, 0.5] {
            assert!((binary_epi_floor(1.0, p0).unwrap() - 1.0).abs() < 1e-12);
            assert!((binary_epi_floor(0.0, p0).unwrap() - h2(p0)).abs() < 1e-15);
        }
        // mpmath: h(0.11 * h^-1(0.8112781))
        assert!((binary_epi_floor(0.8112781, 0.11).unwrap() - 0.887_317_241_972_850_9).abs() < 1e-9);
        assert!(binary_epi_floor(0.5, 0.0).is_err());
        assert!(binary_epi_floor(0.5, 0.6).is_err());
    }

    #[test]
    fn composed_entropy_is_strictly_convex() {
        for rho in [0.05, 0.11, 0.25, 0.5] {
            let f = |u: f64| h2(star(rho, inverse_binary_entropy(u).unwrap()).unwrap());
            let m = 1000;
            let step = 1.0 / m as f64;
            for k in 1..m {
                let u = k as f64 * step;
                let second = f(u - step) - 2.0 * f(u) + f(u + step);
                if rho < 0.5 {
                    assert!(second > 0.0, "rho={rho} u={u} second={second}");
                } else {
                    // h(1/2 * x) = 1 identically: the degenerate edge of the family.
                    assert!(second.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn entropy_examples() {
        let uniform4 = FiniteDist::new(vec![4], vec![0.25; 4]).unwrap();
        assert!((uniform4.entropy(&[0]).unwrap() - 2.0).abs() < 1e-15);
        let point = FiniteDist::new(vec![3], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(point.entropy(&[0]).unwrap(), 0.0);
        let d = FiniteDist::new(vec![2, 2], vec![0.1, 0.15, 0.3, 0.45]).unwrap();
        assert!((d.entropy(&[0]).unwrap() - h2(0.25)).abs() < 1e-15);
        assert!(d.entropy(&[]).is_err());
        assert!(d.entropy(&[2]).is_err());
    }

    #[test]
    fn construction_rejects_bad_tensors() {
        assert!(FiniteDist::new(vec![2], vec![0.5, 0.4]).is_err());
        assert!(FiniteDist::new(vec![2], vec![1.5, -0.5]).is_err());
        assert!(FiniteDist::new(vec![2, 2], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn cond_mutual_info_examples() {
        let indep = FiniteDist::new(vec![2, 2], vec![0.25; 4]).unwrap();
        assert!(indep.mutual_info(&[0], &[1]).unwrap().abs() < 1e-15);
        let equal = FiniteDist::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((equal.mutual_info(&[0], &[1]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(equal.cond_mutual_info(&[0], &[0], &[]), Err(InfoError::OverlappingSets(0)));
        assert!(equal.cond_mutual_info(&[0], &[1], &[1]).is_err());

        // Binary multiplier with uniform independent inputs, vars (x1, x2, y).
        let mult = FiniteDist::from_fn(vec![2, 2, 2], |i| {
            if i[2] == i[0] * i[1] {
                0.25
            } else {
                0.0
            }
        })
        .unwrap();
        let v = mult.cond_mutual_info(&[0], &[2], &[1]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!((brute_cmi(&mult, &[0], &[2], &[1]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cond_mutual_info_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let shape = vec![2 + trial % 2, 3, 2, 2 + trial % 3];
            let d = random_dist(&mut rng, shape);
            for (a, b, c) in [
                (vec![0], vec![1], vec![]),
                (vec![0], vec![2], vec![3]),
                (vec![1, 3], vec![0], vec![2]),
                (vec![2], vec![0, 1], vec![3]),
            ] {
                let fast = d.cond_mutual_info(&a, &b, &c).unwrap();
                let slow = brute_cmi(&d, &a, &b, &c);
                assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn chain_rule_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let d = random_dist(&mut rng, vec![2, 3, 2]);
            let joint = d.mutual_info(&[0, 1], &[2]).unwrap();
            let split = d.mutual_info(&[0], &[2]).unwrap() + d.cond_mutual_info(&[1], &[2], &[0]).unwrap();
            assert!((joint - split).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_order_follows_request() {
        let d = FiniteDist::new(vec![2, 3], vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2]).unwrap();
        let m = d.marginal(&[1, 0]).unwrap();
        assert_eq!(m.shape(), &[3, 2]);
        let expect = [0.1, 0.3, 0.2, 0.15, 0.05, 0.2];
        for (x, y) in m.mass().iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}

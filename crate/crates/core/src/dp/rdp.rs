use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Largest Rényi order kept on the grid.
pub const ALPHA_MAX: u32 = 512;

/// `ε(α)` on the integer orders `2..=alpha_max`, plus the order-∞ value
/// used by the subsampling bound.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    pub epsilons: Vec<f64>,
    pub eps_inf: f64,
}

impl RdpCurve {
    pub fn orders(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.epsilons.len()).map(|i| i as u32 + 2)
    }

    pub fn alpha_max(&self) -> u32 {
        self.epsilons.len() as u32 + 1
    }

    pub fn at(&self, alpha: u32) -> Option<f64> {
        alpha
            .checked_sub(2)
            .and_then(|i| self.epsilons.get(i as usize))
            .copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.orders().zip(self.epsilons.iter().copied())
    }
}

/// `ε(α) = α / (2σ²)` over `2..=ALPHA_MAX`.
pub fn gaussian_rdp(sigma: f64) -> RdpCurve {
    gaussian_rdp_to(sigma, ALPHA_MAX)
}

pub fn gaussian_rdp_to(sigma: f64, alpha_max: u32) -> RdpCurve {
    RdpCurve {
        epsilons: (2..=alpha_max)
            .map(|a| a as f64 / (2.0 * sigma * sigma))
            .collect(),
        eps_inf: f64::INFINITY,
    }
}

/// `ln(eˣ − 1)` for `x > 0` without overflow.
fn log_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// RDP of the mechanism applied to a uniformly subsampled fraction `γ` of
/// the data (sampling without replacement), evaluated in log space:
///
/// `ε′(α) = 1/(α−1) · ln(1 + γ²·C(α,2)·min{4(e^{ε(2)}−1), e^{ε(2)}·min{2,(e^{ε(∞)}−1)²}}
///          + Σ_{j=3..α} γʲ·C(α,j)·e^{(j−1)ε(j)}·min{2,(e^{ε(∞)}−1)ʲ})`.
///
/// The bound is combined with the unsubsampled curve by a pointwise minimum,
/// since subsampling never weakens the guarantee.
pub fn subsample_amplify(curve: &RdpCurve, gamma: f64) -> Result<RdpCurve> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "sampling rate must lie in [0, 1], got {gamma}"
        )));
    }
    if curve.epsilons.is_empty() {
        return Err(Error::InvalidArgument("empty RDP curve".into()));
    }
    let alpha_max = curve.alpha_max();
    if gamma == 0.0 {
        return Ok(RdpCurve {
            epsilons: vec![0.0; curve.epsilons.len()],
            eps_inf: 0.0,
        });
    }
    let ln_gamma = gamma.ln();
    let ln_fact: Vec<f64> = (0..=alpha_max as u64).map(ln_factorial).collect();
    let ln_binom =
        |n: u32, k: u32| ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize];
    let ln2 = std::f64::consts::LN_2;
    let ln_min2 = |j: u32| {
        if curve.eps_inf.is_infinite() {
            ln2
        } else {
            ln2.min(j as f64 * log_expm1(curve.eps_inf))
        }
    };
    let eps = |j: u32| curve.epsilons[(j - 2) as usize];

    let e2 = eps(2);
    let second = (4f64.ln() + log_expm1(e2)).min(e2 + ln_min2(2));

    let mut out = Vec::with_capacity(curve.epsilons.len());
    let mut terms = Vec::with_capacity(alpha_max as usize);
    for alpha in 2..=alpha_max {
        terms.clear();
        terms.push(0.0);
        terms.push(2.0 * ln_gamma + ln_binom(alpha, 2) + second);
        for j in 3..=alpha {
            terms.push(
                j as f64 * ln_gamma + ln_binom(alpha, j) + (j - 1) as f64 * eps(j) + ln_min2(j),
            );
        }
        let amplified = log_sum_exp(&terms) / (alpha - 1) as f64;
        out.push(amplified.min(eps(alpha)));
    }
    Ok(RdpCurve {
        epsilons: out,
        eps_inf: curve.eps_inf,
    })
}

/// `T`-fold composition.
pub fn compose(curve: &RdpCurve, steps: u64) -> RdpCurve {
    let t = steps as f64;
    RdpCurve {
        epsilons: curve.epsilons.iter().map(|e| e * t).collect(),
        eps_inf: if steps == 0 { 0.0 } else { curve.eps_inf * t },
    }
}

/// `min_α ε(α) + ln(1/δ)/(α−1)` over the grid, with the minimizing order.
pub fn to_dp(curve: &RdpCurve, delta: f64) -> Result<(f64, u32)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let log_inv = (1.0 / delta).ln();
    curve
        .pairs()
        .map(|(a, e)| (e + log_inv / (a - 1) as f64, a))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .ok_or_else(|| Error::InvalidArgument("empty RDP curve".into()))
}

/// External (subsampled) privacy loss after `steps` noised releases.
pub fn epsilon_for(sigma: f64, gamma: f64, steps: u64, delta: f64) -> Result<(f64, u32)> {
    let curve = compose(&subsample_amplify(&gaussian_rdp(sigma), gamma)?, steps);
    to_dp(&curve, delta)
}

pub const SIGMA_MIN: f64 = 0.01;
pub const SIGMA_MAX: f64 = 1000.0;
const REL_WIDTH: f64 = 1e-3;

/// Smallest noise multiplier (to relative precision 1e-3) whose external
/// privacy loss stays within `target_epsilon`.
pub fn calibrate(target_epsilon: f64, delta: f64, gamma: f64, steps: u64) -> Result<f64> {
    if !(target_epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target epsilon must be positive, got {target_epsilon}"
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling rate must lie in (0, 1], got {gamma}"
        )));
    }
    let eps = |s: f64| epsilon_for(s, gamma, steps, delta).map(|r| r.0);

    let at_max = eps(SIGMA_MAX)?;
    if at_max > target_epsilon {
        return Err(Error::Infeasible {
            sigma: SIGMA_MAX,
            achieved: at_max,
            target: target_epsilon,
        });
    }
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    let at_min = eps(lo)?;
    if at_min <= target_epsilon {
        return Ok(lo);
    }

    // ε′ must be non-increasing in σ across the bracket for bisection to be valid.
    let probes = 24;
    let mut prev = at_min;
    for k in 1..=probes {
        let s = lo * (hi / lo).powf(k as f64 / probes as f64);
        let e = eps(s)?;
        if e > prev * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "privacy loss is not monotone in sigma near {s}"
            )));
        }
        prev = e;
    }

    while hi / lo - 1.0 > REL_WIDTH {
        let mid = (lo * hi).sqrt();
        if eps(mid)? <= target_epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountantReport {
    pub sigma: f64,
    pub sampling_rate: f64,
    pub steps: u64,
    pub delta: f64,
    /// Guarantee against external observers, with subsampling amplification.
    pub epsilon: f64,
    pub alpha: u32,
    /// Guarantee without amplification, relevant to parties that know the
    /// batch selection.
    pub internal_epsilon: f64,
    pub internal_alpha: u32,
    #[serde(skip)]
    pub curve: RdpCurve,
}

pub fn report(sigma: f64, gamma: f64, steps: u64, delta: f64) -> Result<AccountantReport> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let base = gaussian_rdp(sigma);
    let curve = compose(&subsample_amplify(&base, gamma)?, steps);
    let (epsilon, alpha) = to_dp(&curve, delta)?;
    let (internal_epsilon, internal_alpha) = to_dp(&compose(&base, steps), delta)?;
    Ok(AccountantReport {
        sigma,
        sampling_rate: gamma,
        steps,
        delta,
        epsilon,
        alpha,
        internal_epsilon,
        internal_alpha,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_formula() {
        let c = gaussian_rdp(1.0);
        assert_eq!(c.at(2), Some(1.0));
        assert_eq!(gaussian_rdp(2.0).at(8), Some(1.0));
        assert_eq!(c.at(1), None);
        assert_eq!(c.alpha_max(), ALPHA_MAX);
        for a in 2..=256 {
            assert!((c.at(2 * a).unwrap() - 2.0 * c.at(a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn composition() {
        let c = gaussian_rdp(1.3);
        assert!(compose(&c, 0).epsilons.iter().all(|&e| e == 0.0));
        assert_eq!(compose(&c, 1).epsilons, c.epsilons);
        let a = compose(&compose(&c, 3), 7);
        let b = compose(&c, 21);
        for (x, y) in a.epsilons.iter().zip(&b.epsilons) {
            assert!((x - y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn zero_rate_gives_zero_curve() {
        let c = subsample_amplify(&gaussian_rdp(0.7), 0.0).unwrap();
        assert!(c.epsilons.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn log_expm1_branches_agree() {
        for x in [1e-8, 0.5, 3.0, 29.9] {
            assert!(
                (log_expm1(x) - x.exp_m1().ln()).abs() < 1e-12 * x.exp_m1().ln().abs().max(1.0)
            );
        }
        assert!((log_expm1(30.1) - 30.1).abs() < 1e-12);
    }

    #[test]
    fn no_overflow_in_supported_range() {
        for sigma in [0.3, 0.5, 1.0] {
            for gamma in [0.01, 0.1, 0.5] {
                let c = subsample_amplify(&gaussian_rdp(sigma), gamma).unwrap();
                assert!(c.epsilons.iter().all(|e| e.is_finite() && *e >= 0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(to_dp(&gaussian_rdp(1.0), 0.0).is_err());
        assert!(subsample_amplify(&gaussian_rdp(1.0), 1.5).is_err());
        assert!(calibrate(1.0, 1e-5, 1.2, 10).is_err());
        assert!(matches!(
            calibrate(1e-9, 1e-5, 1.0, 1_000_000),
            Err(Error::Infeasible { .. })
        ));
    }
}

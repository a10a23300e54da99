//! Closed-form quantities of the block-count chain.
//!
//! Every function takes [`ModelParams`]; `theta` is never passed on its own.
//! Probability vectors are indexed from block count 1, i.e. `v[k - 1]`
//! holds the value at `k`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::{gamma, gamma_ratio, ln_gamma_ratio, STIRLING_THRESHOLD};
use crate::params::{ModelParams, Regime};
use crate::summation::NeumaierSum;

pub fn classify_regime(params: &ModelParams) -> Regime {
    params.regime()
}

fn check_levels(n: u64, k: u64) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::domain(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// Probability that the chain started from `n` blocks reaches `k` blocks
/// before any fragmentation:
/// `p_{n,k} = Γ(k + θ) Γ(n) / (Γ(n + θ) Γ(k))`.
pub fn p_descend(params: &ModelParams, n: u64, k: u64) -> Result<f64> {
    check_levels(n, k)?;
    let theta = params.theta();
    if n == k || theta == 0.0 {
        return Ok(1.0);
    }
    Ok((ln_gamma_ratio(k as f64, theta) - ln_gamma_ratio(n as f64, theta)).exp())
}

/// Same quantity as [`p_descend`] by the product `Π_{i=k}^{n-1} i / (i + θ)`.
/// O(n - k); kept as an independent route for cross-checks.
pub fn p_descend_product(params: &ModelParams, n: u64, k: u64) -> Result<f64> {
    check_levels(n, k)?;
    let theta = params.theta();
    let mut p = 1.0;
    for i in k..n {
        let i = i as f64;
        p *= i / (i + theta);
    }
    Ok(p)
}

/// Law of the block count at which the first fragmentation happens, started
/// from `n` blocks: `r_k = θ Γ(n) Γ(k - 1 + θ) / (Γ(n + θ) Γ(k))`.
pub fn frag_state_pmf(params: &ModelParams, n: u64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::domain("frag_state_pmf requires n >= 1"));
    }
    let theta = params.theta();
    let n_usize = n as usize;
    let mut r = vec![0.0; n_usize];
    // p_{n,k} by downward recurrence, r_k = θ/(k - 1 + θ) p_{n,k}; r_1 = p_{n,1}.
    let mut p = 1.0;
    for k in (1..=n).rev() {
        if k < n {
            let kf = k as f64;
            p *= kf / (kf + theta);
        }
        r[(k - 1) as usize] = if k == 1 { p } else { theta / ((k - 1) as f64 + theta) * p };
    }
    Ok(r)
}

/// Expected time to descend from `n` to `k` blocks given no fragmentation:
/// `Σ_{j=k+1}^{n} 2 / (2λj + c j (j - 1))`.
pub fn descent_time(params: &ModelParams, n: u64, k: u64) -> Result<f64> {
    check_levels(n, k)?;
    let mut s = NeumaierSum::new();
    for j in (k + 1..=n).rev() {
        s.add(1.0 / params.total_rate(j));
    }
    Ok(s.value())
}

/// Mean holding time in state `k`: `u_k = 2 / (2λk + c k (k - 1))`.
pub fn holding_time(params: &ModelParams, k: u64) -> Result<f64> {
    if k < 1 {
        return Err(Error::domain("holding_time requires k >= 1"));
    }
    let rate = params.total_rate(k);
    if rate <= 0.0 {
        return Err(Error::domain(format!("state {k} is absorbing (total rate 0)")));
    }
    Ok(1.0 / rate)
}

/// Expected time until the first fragmentation from `n` blocks:
/// `Σ_k (t_k^{(n)} + u_k) r_k^{(n)}`.
pub fn mean_time_to_frag(params: &ModelParams, n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("mean_time_to_frag requires n >= 1"));
    }
    params.require_fragmentation()?;
    let r = frag_state_pmf(params, n)?;
    let mut descent = NeumaierSum::new();
    let mut total = NeumaierSum::new();
    for k in (1..=n).rev() {
        let u = 1.0 / params.total_rate(k);
        total.add((descent.value() + u) * r[(k - 1) as usize]);
        descent.add(u);
    }
    Ok(total.value())
}

/// Stationary law `ρ(k) = (1 - θ)/Γ(θ) · Γ(k - 1 + θ)/Γ(k + 1)`, `0 < θ < 1`.
pub fn stationary_pmf(params: &ModelParams, k: u64) -> Result<f64> {
    let theta = params.require_subcritical()?;
    if k < 1 {
        return Err(Error::domain("stationary_pmf requires k >= 1"));
    }
    if (k as f64) < STIRLING_THRESHOLD {
        let mut rho = 1.0 - theta;
        for j in 1..k {
            let j = j as f64;
            rho *= (j - 1.0 + theta) / (j + 1.0);
        }
        return Ok(rho);
    }
    Ok((1.0 - theta) / gamma(theta) * gamma_ratio(k as f64 + 1.0, theta - 2.0))
}

/// Stationary mass beyond `k`: `P(N > k) = Γ(k + θ) / (Γ(θ) Γ(k + 1))`.
pub fn stationary_tail(params: &ModelParams, k: u64) -> Result<f64> {
    let theta = params.require_subcritical()?;
    Ok(gamma_ratio(k as f64 + 1.0, theta - 1.0) / gamma(theta))
}

/// A pmf on `{1..cutoff}` plus the exact mass above the cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedPmf {
    /// `pmf[k - 1]` is the mass at `k`.
    pub pmf: Vec<f64>,
    pub tail_mass: f64,
}

impl TruncatedPmf {
    pub fn cutoff(&self) -> usize {
        self.pmf.len()
    }

    /// Compensated `Σ pmf + tail_mass`; equals 1 up to rounding.
    pub fn total(&self) -> f64 {
        let mut s: NeumaierSum = self.pmf.iter().copied().collect();
        s.add(self.tail_mass);
        s.value()
    }
}

/// Stationary pmf on `{1..cutoff}` (by the ratio recurrence) with its tail.
pub fn stationary_table(params: &ModelParams, cutoff: u64) -> Result<TruncatedPmf> {
    let theta = params.require_subcritical()?;
    if cutoff < 1 {
        return Err(Error::domain("stationary_table requires cutoff >= 1"));
    }
    let mut pmf = Vec::with_capacity(cutoff as usize);
    let mut rho = 1.0 - theta;
    pmf.push(rho);
    for k in 1..cutoff {
        let k = k as f64;
        rho *= (k - 1.0 + theta) / (k + 1.0);
        pmf.push(rho);
    }
    Ok(TruncatedPmf { pmf, tail_mass: stationary_tail(params, cutoff)? })
}

/// Stationary pgf `G(s) = 1 - (1 - s)^{1 - θ}` on `[0, 1)`.
pub fn stationary_pgf(params: &ModelParams, s: f64) -> Result<f64> {
    let theta = params.require_subcritical()?;
    if !(0.0..1.0).contains(&s) {
        return Err(Error::domain(format!("pgf argument must lie in [0, 1), got {s}")));
    }
    Ok(-((1.0 - theta) * (-s).ln_1p()).exp_m1())
}

/// Expected first hitting time of `k` blocks from `∞`: `2 / (c (1 - θ) k)`.
pub fn hitting_time_from_zero(params: &ModelParams, k: u64) -> Result<f64> {
    let theta = params.require_subcritical()?;
    if k < 1 {
        return Err(Error::domain("hitting_time_from_zero requires k >= 1"));
    }
    Ok(2.0 / (params.c() * (1.0 - theta) * k as f64))
}

/// Excursion-measure weight of reaching `n` blocks, normalised so that
/// `Q(σ_{1/n} < ζ) = Γ(n + θ) / Γ(n)`.
pub fn excursion_reach_weight(params: &ModelParams, n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("excursion_reach_weight requires n >= 1"));
    }
    Ok(gamma_ratio(n as f64, params.theta()))
}

/// Expected time spent with `k` blocks before first reaching one block, when
/// started from `∞`: `g_k = u_k / p_{k,1}`.
pub fn occupation_before_one(params: &ModelParams, k: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain("occupation_before_one requires k >= 2"));
    }
    Ok(holding_time(params, k)? / p_descend(params, k, 1)?)
}

/// Mean and variance of `φ_j = Σ_{i > j} ξ_i`, `ξ_i ~ Exp(c C(i,2) + λ i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiMoments {
    pub mean: f64,
    pub variance: f64,
}

pub fn aldous_phi_moments(params: &ModelParams, j: u64) -> Result<PhiMoments> {
    if j < 1 {
        return Err(Error::domain("aldous_phi_moments requires j >= 1"));
    }
    let m = (j.saturating_mul(1000)).max(100_000);
    let mut mean = NeumaierSum::new();
    let mut var = NeumaierSum::new();
    for i in (j + 1..=m).rev() {
        let a = 1.0 / params.total_rate(i);
        mean.add(a);
        var.add(a * a);
    }
    // Tail i > m by the midpoint integral of 2 / (c x (x + s)), s = θ - 1.
    let c = params.c();
    let s = params.theta() - 1.0;
    let x = m as f64 + 0.5;
    let mean_tail = if s == 0.0 { 1.0 / x } else { (s / x).ln_1p() / s };
    mean.add(2.0 / c * mean_tail);
    // ∫_x^∞ dy / (y² (y + s)²) = 1/(3x³) - s/(2x⁴) + 3s²/(5x⁵) - ...
    let var_tail = 1.0 / (3.0 * x.powi(3)) - s / (2.0 * x.powi(4)) + 3.0 * s * s / (5.0 * x.powi(5));
    var.add(4.0 / (c * c) * var_tail);
    Ok(PhiMoments { mean: mean.value(), variance: var.value() })
}

/// Partial sum `S_m = Σ_{k=1}^{m} Γ(k + θ) / (Γ(k) Γ(1 + θ) k (k - 1 + θ))`.
///
/// The series converges iff `θ < 1`; its divergence for `θ >= 1` is what
/// forces `∞` to be absorbing.
pub fn absorption_series(params: &ModelParams, m: u64) -> f64 {
    let theta = params.theta();
    let mut s = NeumaierSum::new();
    // w_k = Γ(k + θ) / (Γ(k) Γ(1 + θ)) = Π_{i=1}^{k-1} (i + θ)/i
    let mut w = 1.0;
    for k in 1..=m {
        let kf = k as f64;
        if k > 1 {
            let i = kf - 1.0;
            w *= (i + theta) / i;
        }
        s.add(w / (kf * (kf - 1.0 + theta)));
    }
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(c: f64, lambda: f64) -> ModelParams {
        ModelParams::new(c, lambda).unwrap()
    }

    /// Parameters with c = 1 and the requested θ.
    fn th(theta: f64) -> ModelParams {
        p(1.0, theta / 2.0)
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(&p(1.0, 0.2)), Regime::Subcritical);
        assert_eq!(classify_regime(&p(1.0, 0.5)), Regime::Critical);
        assert_eq!(classify_regime(&p(1.0, 0.8)), Regime::Supercritical);
    }

    #[test]
    fn p_descend_examples() {
        // (1/1.5)(2/2.5)(3/3.5) = 16/35
        assert_relative_eq!(p_descend(&th(0.5), 4, 1).unwrap(), 16.0 / 35.0, max_relative = 1e-14);
        assert_relative_eq!(p_descend_product(&th(0.5), 4, 1).unwrap(), 16.0 / 35.0, max_relative = 1e-15);
        assert_eq!(p_descend(&th(0.3), 17, 17).unwrap(), 1.0);
        let n = 1_000_000u64;
        let v = p_descend(&th(0.4), n, 1).unwrap();
        let asym = gamma(1.4) * (n as f64).powf(-0.4);
        assert!(v > 0.0);
        assert_relative_eq!(v, asym, max_relative = 1e-3);
    }

    #[test]
    fn p_descend_domain() {
        assert!(p_descend(&th(0.5), 3, 4).is_err());
        assert!(p_descend(&th(0.5), 3, 0).is_err());
        assert!(p_descend_product(&th(0.5), 3, 4).is_err());
    }

    #[test]
    fn p_descend_routes_agree_up_to_a_million() {
        for &theta in &[0.05, 0.4, 0.999, 1.2] {
            let params = th(theta);
            for &n in &[2u64, 19, 20, 21, 1000, 123_457, 1_000_000] {
                for &k in &[1u64, 2, 10, 20, n / 2 + 1] {
                    if k > n {
                        continue;
                    }
                    let a = p_descend(&params, n, k).unwrap();
                    let b = p_descend_product(&params, n, k).unwrap();
                    assert_relative_eq!(a, b, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn frag_state_examples() {
        assert_eq!(frag_state_pmf(&th(0.7), 1).unwrap(), vec![1.0]);
        let r = frag_state_pmf(&th(0.5), 2).unwrap();
        assert_relative_eq!(r[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(r[1], 1.0 / 3.0, max_relative = 1e-15);
        let r = frag_state_pmf(&th(0.4), 50).unwrap();
        assert_relative_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(frag_state_pmf(&th(0.4), 0).is_err());
    }

    #[test]
    fn frag_state_matches_gamma_closed_form() {
        let params = th(0.35);
        let n = 300u64;
        let r = frag_state_pmf(&params, n).unwrap();
        let theta = params.theta();
        for k in 1..=n {
            // θ Γ(n) Γ(k - 1 + θ) / (Γ(n + θ) Γ(k))
            let closed = theta * (ln_gamma_ratio(k as f64, theta - 1.0) - ln_gamma_ratio(n as f64, theta)).exp();
            assert_relative_eq!(r[(k - 1) as usize], closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn descent_time_examples() {
        let params = p(1.0, 0.25);
        assert_eq!(descent_time(&params, 7, 7).unwrap(), 0.0);
        assert_relative_eq!(descent_time(&params, 2, 1).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        let t = descent_time(&params, 10_000, 10).unwrap();
        assert!(t > 0.0 && t <= 0.2, "t = {t}");
    }

    #[test]
    fn holding_time_examples() {
        assert_relative_eq!(holding_time(&p(1.0, 0.2), 1).unwrap(), 5.0, max_relative = 1e-15);
        assert_relative_eq!(holding_time(&p(1.0, 0.25), 2).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(holding_time(&p(1.0, 0.25), 10).unwrap(), 2.0 / 95.0, max_relative = 1e-15);
        assert!(holding_time(&ModelParams::kingman(1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn mean_time_to_frag_examples() {
        let params = p(1.0, 0.25);
        assert_relative_eq!(mean_time_to_frag(&params, 1).unwrap(), 4.0, max_relative = 1e-15);
        // (1/3)(2/3) + (2/3)(2/3 + 4)
        assert_relative_eq!(mean_time_to_frag(&params, 2).unwrap(), 10.0 / 3.0, max_relative = 1e-14);
        assert!(mean_time_to_frag(&ModelParams::kingman(1.0).unwrap(), 3).is_err());
    }

    #[test]
    fn mean_time_to_frag_is_cauchy_in_n() {
        let params = th(0.4);
        let v: Vec<f64> = [1_000u64, 10_000, 100_000].iter().map(|&n| mean_time_to_frag(&params, n).unwrap()).collect();
        assert!(v.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!((v[2] - v[1]).abs() < (v[1] - v[0]).abs());
    }

    #[test]
    fn stationary_examples() {
        assert_relative_eq!(stationary_pmf(&th(0.4), 1).unwrap(), 0.6, max_relative = 1e-15);
        assert_relative_eq!(stationary_pmf(&th(0.5), 2).unwrap(), 0.125, max_relative = 1e-15);
        let k = 100u64;
        let exact = stationary_pmf(&th(0.4), k).unwrap();
        let asym = 0.6 / gamma(0.4) * (k as f64).powf(-1.6);
        assert_relative_eq!(exact, asym, max_relative = 1e-2);
        assert!(matches!(stationary_pmf(&th(1.0), 1), Err(Error::Regime { .. })));
        assert!(matches!(stationary_pmf(&th(1.4), 1), Err(Error::Regime { .. })));
    }

    #[test]
    fn stationary_table_matches_pointwise() {
        let params = th(0.3);
        let t = stationary_table(&params, 5000).unwrap();
        for k in [1u64, 2, 19, 20, 21, 100, 4999, 5000] {
            assert_relative_eq!(t.pmf[(k - 1) as usize], stationary_pmf(&params, k).unwrap(), max_relative = 1e-12);
        }
        assert_relative_eq!(t.total(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(stationary_tail(&params, 0).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn pgf_examples() {
        assert_eq!(stationary_pgf(&th(0.5), 0.0).unwrap(), 0.0);
        assert_relative_eq!(stationary_pgf(&th(0.5), 0.75).unwrap(), 0.5, max_relative = 1e-15);
        assert!(stationary_pgf(&th(0.4), 1.0 - 1e-12).unwrap() > 0.999);
        assert!(stationary_pgf(&th(0.4), 1.0).is_err());
        assert!(stationary_pgf(&th(0.4), -0.1).is_err());
    }

    #[test]
    fn pgf_matches_pmf_series() {
        let params = th(0.5);
        let t = stationary_table(&params, 1_000_000).unwrap();
        let s = 0.75f64;
        let mut acc = NeumaierSum::new();
        let mut sk = 1.0;
        for &rho in &t.pmf {
            sk *= s;
            acc.add(rho * sk);
        }
        assert!((acc.value() - 0.5).abs() < 1e-8);

        let params = th(0.4);
        let t = stationary_table(&params, 1000).unwrap();
        let s = 0.5f64;
        let series: f64 = t.pmf.iter().enumerate().map(|(i, r)| r * s.powi(i as i32 + 1)).sum();
        assert!((series - stationary_pgf(&params, s).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn hitting_time_examples() {
        assert_relative_eq!(hitting_time_from_zero(&th(0.4), 10).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(hitting_time_from_zero(&th(0.5), 1).unwrap(), 4.0, max_relative = 1e-15);
        assert_relative_eq!(hitting_time_from_zero(&p(2.0, 0.5), 4).unwrap(), 0.5, max_relative = 1e-15);
        assert!(hitting_time_from_zero(&th(1.0), 4).is_err());
    }

    #[test]
    fn reach_weight_examples() {
        assert_relative_eq!(excursion_reach_weight(&th(0.5), 1).unwrap(), 0.886_226_925_452_758, max_relative = 1e-13);
        for &theta in &[0.1, 0.5, 0.9] {
            let params = th(theta);
            let ratio = excursion_reach_weight(&params, 2).unwrap() / excursion_reach_weight(&params, 1).unwrap();
            assert_relative_eq!(ratio, 1.0 + theta, max_relative = 1e-14);
        }
        let n: f64 = 1e4;
        let w = excursion_reach_weight(&th(0.4), n as u64).unwrap();
        let stirling = n.powf(0.4) * (1.0 + 0.4 * (0.4 - 1.0) / (2.0 * n));
        assert_relative_eq!(w, stirling, max_relative = 1e-3);
    }

    #[test]
    fn occupation_before_one_examples() {
        assert_relative_eq!(occupation_before_one(&p(1.0, 0.25), 2).unwrap(), 1.0, max_relative = 1e-14);
        // Γ(10.5)/(Γ(10) Γ(1.5)) · u_10, gammas from an independent implementation.
        let g = statrs::function::gamma::gamma;
        let expected = g(10.5) / (g(10.0) * g(1.5)) * (2.0 / (2.0 * 0.25 * 10.0 + 90.0));
        assert_relative_eq!(occupation_before_one(&th(0.5), 10).unwrap(), expected, max_relative = 1e-12);
        // θ → 0: single visit, g = u_k.
        let small = p(1.0, 1e-12);
        assert_relative_eq!(
            occupation_before_one(&small, 7).unwrap(),
            holding_time(&small, 7).unwrap(),
            max_relative = 1e-9
        );
        assert!(occupation_before_one(&th(0.5), 1).is_err());
    }

    #[test]
    fn aldous_moments() {
        let kingman = ModelParams::kingman(1.0).unwrap();
        for &j in &[1u64, 10, 100, 5000] {
            let m = aldous_phi_moments(&kingman, j).unwrap();
            assert_relative_eq!(m.mean, 2.0 / j as f64, max_relative = 1e-10);
        }
        let params = p(1.0, 0.2);
        let m = aldous_phi_moments(&params, 100).unwrap();
        assert_relative_eq!(m.mean, 0.02, max_relative = 0.02);
        assert_relative_eq!(m.variance, 4.0 / (3.0 * 1e6), max_relative = 0.05);
        let m = aldous_phi_moments(&params, 100_000).unwrap();
        assert_relative_eq!(m.mean * 1e5 / 2.0, 1.0, max_relative = 1e-4);
        assert_relative_eq!(m.variance * 3.0 * 1e15 / 4.0, 1.0, max_relative = 1e-4);
    }

    #[test]
    fn aldous_tail_matches_long_direct_sum() {
        // Truncating at 10^7 instead of the default leaves a tail below 1e-13.
        let params = p(1.3, 0.9);
        let j = 50u64;
        let mut mean = NeumaierSum::new();
        let mut var = NeumaierSum::new();
        for i in (j + 1..=20_000_000).rev() {
            let a = 1.0 / params.total_rate(i);
            mean.add(a);
            var.add(a * a);
        }
        // add the leading tail 2/(c x) of the direct sum for a fair comparison
        mean.add(2.0 / (1.3 * 20_000_000.5));
        let m = aldous_phi_moments(&params, j).unwrap();
        assert_relative_eq!(m.mean, mean.value(), max_relative = 1e-9);
        assert_relative_eq!(m.variance, var.value(), max_relative = 1e-9);
    }

    #[test]
    fn absorption_series_behaviour() {
        // θ = 1: terms are exactly 1/k, so S_2m - S_m → ln 2.
        let crit = th(1.0);
        let d = absorption_series(&crit, 200_000) - absorption_series(&crit, 100_000);
        assert_relative_eq!(d, std::f64::consts::LN_2, max_relative = 1e-4);
        // θ < 1: Cauchy.
        let sub = th(0.5);
        let d1 = absorption_series(&sub, 2000) - absorption_series(&sub, 1000);
        let d2 = absorption_series(&sub, 200_000) - absorption_series(&sub, 100_000);
        assert!(d2 < d1 / 5.0);
    }

    #[test]
    fn monotonicity() {
        let params = th(0.6);
        let mut prev = f64::INFINITY;
        for n in [5u64, 10, 100, 1000, 10_000] {
            let v = p_descend(&params, n, 5).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let v = hitting_time_from_zero(&params, k).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev = 0.0;
        for n in 1..200 {
            let v = excursion_reach_weight(&params, n).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn frag_state_pmf_normalised(theta in 0.001f64..0.999, n in 1u64..10_000) {
            let r = frag_state_pmf(&th(theta), n).unwrap();
            prop_assert!(r.iter().all(|&x| x > 0.0));
            let s: NeumaierSum = r.into_iter().collect();
            prop_assert!((s.value() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn descent_time_below_kingman_bound(theta in 0.0f64..3.0, c in 0.1f64..10.0, n in 2u64..5000, frac in 0.0f64..1.0) {
            let k = 1 + ((n - 1) as f64 * frac) as u64;
            let params = ModelParams::new(c, theta * c / 2.0).unwrap();
            let t = descent_time(&params, n, k).unwrap();
            prop_assert!(t >= 0.0);
            prop_assert!(t <= 2.0 / (c * k as f64) * (1.0 + 1e-12));
        }

        #[test]
        fn pgf_in_unit_interval(theta in 0.01f64..0.99, s in 0.0f64..0.999) {
            let g = stationary_pgf(&th(theta), s).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
        }
    }
}

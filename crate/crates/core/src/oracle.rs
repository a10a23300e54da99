//! Exact computations on the truncated chain on `{1..K}`: fragmentation
//! jumps to `K`, and the shatter at `K` is a self-loop with no generator
//! effect. Every solve here is O(K) and uses no closed form from
//! [`crate::analytic`].

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::summation::NeumaierSum;

/// Sparse generator: each row has at most a unit step down and a jump to `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    params: ModelParams,
    /// `down[j-1]` = rate `j -> j-1`.
    down: Vec<f64>,
    /// `up[j-1]` = rate `j -> K` (zero at `j = K`).
    up: Vec<f64>,
}

pub fn build_generator(params: &ModelParams, k: usize) -> Result<GeneratorMatrix> {
    if k < 2 {
        return Err(Error::domain(format!("generator needs K >= 2, got {k}")));
    }
    let down = (1..=k as u64).map(|j| params.coalescence_rate(j)).collect();
    let mut up: Vec<f64> = (1..=k as u64).map(|j| params.fragmentation_rate(j)).collect();
    up[k - 1] = 0.0;
    Ok(GeneratorMatrix { params: *params, down, up })
}

impl GeneratorMatrix {
    pub fn size(&self) -> usize {
        self.down.len()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Entry `Q[i][j]` with 1-based states.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        let k = self.size();
        assert!((1..=k).contains(&i) && (1..=k).contains(&j), "state out of range");
        let (d, u) = (self.down[i - 1], self.up[i - 1]);
        if i == j {
            -(d + u)
        } else if j + 1 == i {
            d
        } else if j == k {
            u
        } else {
            0.0
        }
    }

    /// Row-major dense copy (tests and small K only).
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let k = self.size();
        (1..=k).map(|i| (1..=k).map(|j| self.rate(i, j)).collect()).collect()
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        self.down.iter().zip(&self.up).map(|(d, u)| (-(d + u) + d + u).abs()).fold(0.0, f64::max)
    }

    /// `x Q` for a row vector `x`.
    pub fn left_apply(&self, x: &[f64]) -> Vec<f64> {
        let k = self.size();
        let mut out = vec![0.0; k];
        let mut into_k = NeumaierSum::new();
        for i in 0..k {
            out[i] -= x[i] * (self.down[i] + self.up[i]);
            if i >= 1 {
                out[i - 1] += x[i] * self.down[i];
            }
            into_k.add(x[i] * self.up[i]);
        }
        out[k - 1] += into_k.value();
        out
    }

    /// `Q h` for a column vector `h`.
    pub fn right_apply(&self, h: &[f64]) -> Vec<f64> {
        let k = self.size();
        (0..k)
            .map(|i| {
                let below = if i >= 1 { self.down[i] * (h[i - 1] - h[i]) } else { 0.0 };
                below + self.up[i] * (h[k - 1] - h[i])
            })
            .collect()
    }
}

/// Stationary law from the cut equations: the probability flow up across
/// the cut between `j` and `j + 1` (all shatters from `{1..j}`) balances the
/// single downward edge `j + 1 -> j`.
pub fn stationary_solve(gen: &GeneratorMatrix) -> Result<Vec<f64>> {
    let k = gen.size();
    if gen.params.lambda() == 0.0 {
        return Err(Error::Numerical {
            message: "generator is reducible (lambda = 0): state 1 absorbs".into(),
            condition: f64::INFINITY,
        });
    }
    let mut pi = vec![0.0; k];
    pi[0] = 1.0;
    let mut up_flow = NeumaierSum::new();
    for j in 1..k {
        up_flow.add(pi[j - 1] * gen.params.fragmentation_rate(j as u64));
        pi[j] = up_flow.value() / gen.down[j];
    }
    let total = pi.iter().copied().collect::<NeumaierSum>().value();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numerical { message: "stationary weights overflowed".into(), condition: total });
    }
    for p in &mut pi {
        *p /= total;
    }
    let residual = gen.left_apply(&pi);
    let scale = pi.iter().zip(gen.down.iter().zip(&gen.up)).map(|(p, (d, u))| p * (d + u)).fold(0.0, f64::max);
    let rel = residual.iter().map(|r| r.abs()).fold(0.0, f64::max) / scale;
    if rel > 1e-12 {
        return Err(Error::Numerical {
            message: format!("stationary residual {rel:e} exceeds 1e-12"),
            condition: 1.0 / pi.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    Ok(pi)
}

/// Expected time to hit `target` from every state (index `j - 1`).
///
/// Each `h_j` is affine in the unknown `h_K`; one upward sweep fixes `h_K`
/// and a second one fills in the states below the target. States that can
/// never reach the target (below it with `lambda = 0`) get `+∞`.
pub fn exact_hitting_times(gen: &GeneratorMatrix, target: usize) -> Result<Vec<f64>> {
    let k = gen.size();
    if !(1..=k).contains(&target) {
        return Err(Error::domain(format!("target {target} outside 1..={k}")));
    }
    let mut h = vec![0.0; k];
    // h_j = a_j + (1 - s_j) h_K above the target, with s_j kept directly
    // so that 1 - b_K never cancels.
    let h_k = if target == k {
        0.0
    } else {
        let (mut a, mut s) = (0.0, 1.0);
        for j in target + 1..=k {
            let (d, u) = (gen.down[j - 1], gen.up[j - 1]);
            let q = d + u;
            a = (1.0 + d * a) / q;
            s = d * s / q;
        }
        if s <= 0.0 {
            return Err(Error::Numerical {
                message: "target unreachable from the ceiling".into(),
                condition: f64::INFINITY,
            });
        }
        a / s
    };
    h[k - 1] = h_k;
    for j in target + 1..k {
        let (d, u) = (gen.down[j - 1], gen.up[j - 1]);
        h[j - 1] = (1.0 + d * h[j - 2] + u * h_k) / (d + u);
    }
    for j in 1..target {
        let (d, u) = (gen.down[j - 1], gen.up[j - 1]);
        h[j - 1] = if u == 0.0 {
            f64::INFINITY
        } else {
            let below = if j >= 2 { d * h[j - 2] } else { 0.0 };
            (1.0 + below + u * h_k) / (d + u)
        };
    }
    // Residual of Q h = -1, relative to the size of the terms in each row.
    let residual = gen.right_apply(&h);
    let worst = residual
        .iter()
        .enumerate()
        .filter(|&(i, _)| i + 1 != target && h[i].is_finite())
        .map(|(i, r)| (r + 1.0).abs() / (1.0 + (gen.down[i] + gen.up[i]) * h[i].max(h_k)))
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        return Err(Error::Numerical { message: format!("hitting-time residual {worst:e}"), condition: h_k });
    }
    Ok(h)
}

/// Expected time until the first shatter from every state (index `j - 1`),
/// counting the shatter at `K` as an event: the chain is killed at rate
/// `lambda j` everywhere and otherwise descends.
pub fn absorption_times(gen: &GeneratorMatrix) -> Result<Vec<f64>> {
    gen.params.require_fragmentation()?;
    let k = gen.size();
    let mut m = vec![0.0; k];
    for j in 1..=k {
        let d = gen.down[j - 1];
        let kill = gen.params.fragmentation_rate(j as u64);
        let below = if j >= 2 { d * m[j - 2] } else { 0.0 };
        m[j - 1] = (1.0 + below) / (d + kill);
    }
    Ok(m)
}

//! Excursions away from the ceiling (the stand-in for `∞`) and the
//! estimators built on them.

use std::ops::Range;

use rand::RngCore;
use serde::Serialize;

use crate::analytic;
use crate::dynamics::{Kernel, OccupationHistogram, PathSink, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::{linear_fit, log_log_fit, mean_and_se, tv_distance, LinearFit};
use crate::summation::NeumaierSum;

/// One maximal stretch below the ceiling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excursion {
    /// Ceiling exit (or 0 if the path started below the ceiling).
    pub start_time: f64,
    /// Next ceiling entry (or the end of the window).
    pub end_time: f64,
    pub min_state: u32,
    /// The path was already below the ceiling at time 0.
    pub left_clipped: bool,
    /// The window ended before the excursion did.
    pub right_clipped: bool,
    /// Holding segments of the source path that make up this excursion.
    pub path: Range<usize>,
}

impl Excursion {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    pub fn is_clipped(&self) -> bool {
        self.left_clipped || self.right_clipped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    pub excursions: Vec<Excursion>,
    pub ceiling_time: f64,
    pub covered_until: f64,
}

impl Segmentation {
    pub fn excursion_time(&self) -> f64 {
        self.excursions.iter().map(Excursion::duration).collect::<NeumaierSum>().value()
    }

    /// `start,end,duration,min_state` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "start,end,duration,min_state")?;
        for e in &self.excursions {
            writeln!(w, "{},{},{},{}", e.start_time, e.end_time, e.duration(), e.min_state)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenExcursion {
    start: f64,
    min_state: u32,
    last_state: u32,
    first_segment: usize,
    left_clipped: bool,
}

/// Streaming segmentation; feed it a path and call [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct ExcursionCollector {
    ceiling: u32,
    segment: usize,
    open: Option<OpenExcursion>,
    excursions: Vec<Excursion>,
    ceiling_time: NeumaierSum,
    violation: Option<String>,
}

impl ExcursionCollector {
    pub fn new(ceiling: u32) -> Self {
        Self {
            ceiling,
            segment: 0,
            open: None,
            excursions: Vec::new(),
            ceiling_time: NeumaierSum::new(),
            violation: None,
        }
    }

    fn close(&mut self, end: f64, right_clipped: bool) {
        if let Some(o) = self.open.take() {
            self.excursions.push(Excursion {
                start_time: o.start,
                end_time: end,
                min_state: o.min_state,
                left_clipped: o.left_clipped,
                right_clipped,
                path: o.first_segment..self.segment,
            });
        }
    }

    /// Closes a still-open excursion at `covered_until`; errors if the path
    /// broke the one-visit-per-state structure inside an excursion.
    pub fn finish(mut self, covered_until: f64) -> Result<Segmentation> {
        if let Some(v) = self.violation.take() {
            return Err(Error::domain(v));
        }
        self.close(covered_until, true);
        Ok(Segmentation { excursions: self.excursions, ceiling_time: self.ceiling_time.value(), covered_until })
    }
}

impl PathSink for ExcursionCollector {
    fn hold(&mut self, state: u32, start: f64, duration: f64) {
        if state == self.ceiling {
            self.ceiling_time.add(duration);
        } else {
            match &mut self.open {
                Some(o) => {
                    // Inside an excursion every move is one step down.
                    if state + 1 != o.last_state && self.violation.is_none() {
                        self.violation =
                            Some(format!("state {} followed by {state} inside an excursion", o.last_state));
                    }
                    o.last_state = state;
                    o.min_state = o.min_state.min(state);
                }
                None => {
                    self.open = Some(OpenExcursion {
                        start,
                        min_state: state,
                        last_state: state,
                        first_segment: self.segment,
                        left_clipped: self.segment == 0,
                    });
                }
            }
        }
        self.segment += 1;
    }

    fn jump(&mut self, time: f64, to: u32, _: Transition) {
        if to == self.ceiling {
            self.close(time, false);
        }
    }
}

/// Splits a stored trajectory at its ceiling visits.
pub fn segment(trajectory: &Trajectory) -> Result<Segmentation> {
    let mut collector = ExcursionCollector::new(trajectory.n_max());
    trajectory.replay(&mut collector);
    collector.finish(trajectory.covered_until())
}

/// Level hitting times of one excursion, measured from the ceiling exit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionSample {
    /// `phi[i]`: time to reach `levels[i]`, if reached.
    pub phi: Vec<Option<f64>>,
    /// Lowest state seen, floored at the stopping level.
    pub min_state: u32,
    /// Excursion length, when the sampler ran it to the end.
    pub duration: Option<f64>,
}

/// Runs one excursion from `n_max - 1` until the next shatter, or until it
/// reaches `stop_at` (whichever is first). `levels` must be decreasing.
pub fn sample_excursion<R: RngCore + ?Sized>(
    params: &ModelParams,
    n_max: u32,
    levels: &[u32],
    stop_at: u32,
    rng: &mut R,
) -> Result<ExcursionSample> {
    if n_max < 2 || stop_at == 0 || stop_at >= n_max {
        return Err(Error::domain(format!("need 1 <= stop_at < n_max, got stop_at = {stop_at}, n_max = {n_max}")));
    }
    if levels.windows(2).any(|w| w[1] >= w[0]) || levels.iter().any(|&l| l >= n_max) {
        return Err(Error::domain("levels must be strictly decreasing and below n_max"));
    }
    let kernel = Kernel::new(params);
    let mut phi = vec![None; levels.len()];
    let mut next_level = 0;
    let mut time = NeumaierSum::new();
    let mut j = n_max - 1;
    loop {
        while next_level < levels.len() && levels[next_level] > j {
            next_level += 1;
        }
        if next_level < levels.len() && levels[next_level] == j {
            phi[next_level] = Some(time.value());
            next_level += 1;
        }
        if j <= stop_at {
            return Ok(ExcursionSample { phi, min_state: j, duration: None });
        }
        let Some((coalesces, dwell)) = kernel.draw(j, rng) else {
            return Ok(ExcursionSample { phi, min_state: j, duration: None });
        };
        time.add(dwell);
        if coalesces {
            j -= 1;
        } else {
            return Ok(ExcursionSample { phi, min_state: j, duration: Some(time.value()) });
        }
    }
}

/// Normalized speed statistic at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedPoint {
    pub j: u32,
    /// Mean of `c j phi_j / 2`.
    pub ratio: f64,
    pub se: f64,
    pub used: usize,
    /// Excursions that ended before reaching `j`.
    pub excluded: usize,
}

/// `c j phi_j / 2` averaged over the excursions that reach each level.
pub fn speed_estimate(samples: &[ExcursionSample], levels: &[u32], c: f64) -> Result<Vec<SpeedPoint>> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let ratios: Vec<f64> = samples
                .iter()
                .filter_map(|s| s.phi.get(i).copied().flatten())
                .map(|t| c * f64::from(j) * t / 2.0)
                .collect();
            if ratios.len() < 2 {
                return Err(Error::FitDegenerate(format!("{} excursions reached level {j}", ratios.len())));
            }
            let (ratio, se) = mean_and_se(&ratios);
            Ok(SpeedPoint { j, ratio, se, used: ratios.len(), excluded: samples.len() - ratios.len() })
        })
        .collect()
}

/// `phi_j` values read off a segmented trajectory, for the excursions that
/// start at a genuine ceiling exit.
pub fn excursion_samples(trajectory: &Trajectory, seg: &Segmentation, levels: &[u32]) -> Vec<ExcursionSample> {
    seg.excursions
        .iter()
        .filter(|e| !e.left_clipped)
        .map(|e| {
            let mut phi = vec![None; levels.len()];
            for i in e.path.clone() {
                let state = trajectory.segment_state(i);
                if let Some(pos) = levels.iter().position(|&l| l == state) {
                    phi[pos] = Some(trajectory.segment_bounds(i).0 - e.start_time);
                }
            }
            ExcursionSample { phi, min_state: e.min_state, duration: (!e.right_clipped).then(|| e.duration()) }
        })
        .collect()
}

/// Reach counts and their power-law fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachFit {
    /// `(n, #excursions with min_state <= n)`.
    pub counts: Vec<(u32, u64)>,
    pub fit: LinearFit,
}

/// Log-log slope of the number of excursions reaching level `n` against
/// `n`, over a logarithmic grid of `points` levels in `[n_lo, n_hi]`.
pub fn reach_tail_exponent(min_states: &[u32], n_lo: u32, n_hi: u32, points: usize) -> Result<ReachFit> {
    if min_states.len() < 1000 {
        return Err(Error::FitDegenerate(format!("{} excursions, need at least 1000", min_states.len())));
    }
    if !(1 <= n_lo && n_lo < n_hi) || points < 3 {
        return Err(Error::domain("need 1 <= n_lo < n_hi and at least 3 points"));
    }
    let mut sorted = min_states.to_vec();
    sorted.sort_unstable();
    let mut grid: Vec<u32> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            (f64::from(n_lo) * (f64::from(n_hi) / f64::from(n_lo)).powf(f)).round() as u32
        })
        .collect();
    grid.dedup();
    let counts: Vec<(u32, u64)> = grid.iter().map(|&n| (n, sorted.partition_point(|&m| m <= n) as u64)).collect();
    debug_assert!(counts.windows(2).all(|w| w[0].1 <= w[1].1));
    let usable: Vec<&(u32, u64)> = counts.iter().filter(|c| c.1 > 0).collect();
    if usable.len() < 3 {
        return Err(Error::FitDegenerate("too few levels were ever reached".into()));
    }
    let x: Vec<f64> = usable.iter().map(|c| f64::from(c.0)).collect();
    let y: Vec<f64> = usable.iter().map(|c| c.1 as f64).collect();
    Ok(ReachFit { fit: log_log_fit(&x, &y)?, counts })
}

/// Time-average law of the block count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStationary {
    /// `pmf[k - 1]` for `k = 1..=n_max`.
    pub pmf: Vec<f64>,
    pub total_time: f64,
}

/// Pools occupation histograms (same ceiling) into one pmf.
pub fn empirical_stationary(histograms: &[OccupationHistogram]) -> Result<EmpiricalStationary> {
    let first = histograms.first().ok_or_else(|| Error::domain("no histograms"))?;
    let mut pooled = OccupationHistogram::new(first.n_max());
    for h in histograms {
        if h.n_max() != first.n_max() {
            return Err(Error::domain("histograms have different ceilings"));
        }
        pooled.merge(h);
    }
    let total_time = pooled.total();
    if total_time <= 0.0 {
        return Err(Error::domain("no occupation time"));
    }
    let pmf = (1..=pooled.n_max()).map(|k| pooled.dwell(k) / total_time).collect();
    Ok(EmpiricalStationary { pmf, total_time })
}

impl EmpiricalStationary {
    pub fn mass(&self, k: u32) -> f64 {
        self.pmf.get(k as usize - 1).copied().unwrap_or(0.0)
    }

    /// TV distance to the analytic law on `k <= k_max`.
    pub fn tv_to_analytic(&self, params: &ModelParams, k_max: u32) -> Result<f64> {
        let exact = (1..=u64::from(k_max)).map(|k| analytic::stationary_pmf(params, k)).collect::<Result<Vec<_>>>()?;
        let emp: Vec<f64> = (1..=k_max).map(|k| self.mass(k)).collect();
        Ok(tv_distance(&emp, &exact))
    }

    /// Log-log slope of the pmf over `[k_lo, k_hi]`; the law predicts
    /// `-(2 - theta)`.
    pub fn tail_exponent(&self, k_lo: u32, k_hi: u32) -> Result<LinearFit> {
        let x: Vec<f64> = (k_lo..=k_hi).map(f64::from).collect();
        let y: Vec<f64> = (k_lo..=k_hi).map(|k| self.mass(k)).collect();
        log_log_fit(&x, &y)
    }
}

/// Records the time intervals spent at the ceiling, the proxy for the set
/// of times with infinitely many blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZeroSet {
    ceiling: u32,
    intervals: Vec<(f64, f64)>,
    total: NeumaierSum,
}

impl ZeroSet {
    pub fn new(ceiling: u32) -> Self {
        Self { ceiling, intervals: Vec::new(), total: NeumaierSum::new() }
    }

    pub fn from_trajectory(trajectory: &Trajectory) -> Self {
        let mut z = Self::new(trajectory.n_max());
        trajectory.replay(&mut z);
        z
    }

    /// Disjoint, time-ordered `[start, end)` intervals.
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total_time(&self) -> f64 {
        self.total.value()
    }

    /// Number of grid boxes `[m delta, (m + 1) delta)` that meet the set.
    pub fn box_count(&self, delta: f64) -> u64 {
        let mut count = 0u64;
        let mut last: Option<u64> = None;
        for &(a, b) in &self.intervals {
            let first = (a / delta).floor() as u64;
            // half-open interval: a box starting exactly at b is not hit
            let end = ((b / delta).ceil() as u64).max(first + 1) - 1;
            let from = match last {
                Some(l) if l >= first => l + 1,
                _ => first,
            };
            if end >= from {
                count += end - from + 1;
            }
            last = Some(last.map_or(end, |l| l.max(end)));
        }
        count
    }
}

impl PathSink for ZeroSet {
    fn hold(&mut self, state: u32, start: f64, duration: f64) {
        if state != self.ceiling {
            return;
        }
        self.total.add(duration);
        let end = start + duration;
        match self.intervals.last_mut() {
            // ceiling self-transitions continue the same interval
            Some(last) if last.1 >= start => last.1 = end,
            _ => self.intervals.push((start, end)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    /// Box sizes, decreasing.
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// Index range into `scales` used for the fit.
    pub window: Range<usize>,
    pub slope: f64,
    /// Standard error of the slope.
    pub ci: f64,
    pub r2: f64,
}

impl DimensionEstimate {
    /// `delta,count` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "delta,count")?;
        for (d, c) in self.scales.iter().zip(&self.counts) {
            writeln!(w, "{d},{c}")?;
        }
        Ok(())
    }
}

/// `count` box sizes spaced evenly in log between `hi` and `lo`.
pub fn log_scales(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| hi * (lo / hi).powf(i as f64 / (count - 1) as f64)).collect()
}

/// Box-counting slope of `zero` on `[0, t_end]`.
///
/// Scales above `t_end / 10` (saturated) and below `10 * floor` (where
/// truncation at the ceiling shows) are dropped. Among the remaining
/// contiguous windows of at least four scales whose log-log fit has
/// `R² >= 0.98`, the one spanning the most decades is used.
pub fn box_dimension(zero: &ZeroSet, t_end: f64, scales: &[f64], floor: f64) -> Result<DimensionEstimate> {
    if scales.windows(2).any(|w| w[1] >= w[0]) || scales.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::domain("scales must be positive and strictly decreasing"));
    }
    if let (Some(&hi), Some(&lo)) = (scales.first(), scales.last()) {
        if hi / lo < 100.0 {
            return Err(Error::domain("scales must span at least two decades"));
        }
        if t_end / lo > 1e8 {
            return Err(Error::domain("finest scale too small for the window"));
        }
    }
    let counts: Vec<u64> = scales.iter().map(|&d| zero.box_count(d)).collect();
    let usable: Vec<usize> =
        (0..scales.len()).filter(|&i| scales[i] <= t_end / 10.0 && scales[i] >= 10.0 * floor).collect();
    if usable.len() < 4 {
        return Err(Error::FitDegenerate(format!("{} usable scales, need 4", usable.len())));
    }
    let (lo_idx, hi_idx) = (usable[0], usable[usable.len() - 1] + 1);
    if counts[lo_idx..hi_idx].iter().all(|&c| c == 0) {
        // the empty set has dimension 0
        return Ok(DimensionEstimate {
            scales: scales.to_vec(),
            counts,
            window: lo_idx..hi_idx,
            slope: 0.0,
            ci: 0.0,
            r2: 1.0,
        });
    }
    let fit_window = |r: Range<usize>| -> Option<LinearFit> {
        if counts[r.clone()].contains(&0) {
            return None;
        }
        let x: Vec<f64> = r.clone().map(|i| (1.0 / scales[i]).ln()).collect();
        let y: Vec<f64> = r.map(|i| (counts[i] as f64).ln()).collect();
        linear_fit(&x, &y).ok()
    };
    let mut best: Option<(Range<usize>, LinearFit, f64)> = None;
    for a in lo_idx..hi_idx {
        for b in a + 4..=hi_idx {
            let Some(fit) = fit_window(a..b) else { continue };
            if fit.r2 < 0.98 {
                continue;
            }
            let span = (scales[a] / scales[b - 1]).log10();
            let better = match &best {
                None => true,
                Some((_, f, s)) => span > *s + 1e-12 || ((span - *s).abs() <= 1e-12 && fit.r2 > f.r2),
            };
            if better {
                best = Some((a..b, fit, span));
            }
        }
    }
    let (window, fit, _) =
        best.ok_or_else(|| Error::FitDegenerate("no window of 4 or more scales reaches R² >= 0.98".into()))?;
    Ok(DimensionEstimate { scales: scales.to_vec(), counts, window, slope: fit.slope, ci: fit.slope_se, r2: fit.r2 })
}

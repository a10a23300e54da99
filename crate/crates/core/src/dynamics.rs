//! Event-driven simulation of the block-count chain truncated at a ceiling.
//!
//! From `j` blocks the chain moves to `j - 1` at rate `c C(j, 2)` and is
//! shattered at rate `lambda j`. The ceiling `n_max` stands in for `∞`: a
//! shatter lands on `n_max`, and a shatter *at* `n_max` is a recorded
//! self-transition. Only the block count is tracked here.

use std::io::{BufRead, Write};

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_replicas_with, Execution};
use crate::params::ModelParams;
use crate::rng::{exponential, replica_rng, uniform_open};
use crate::summation::NeumaierSum;

/// Current block count of the truncated chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainState {
    blocks: u32,
    n_max: u32,
}

impl ChainState {
    pub fn new(blocks: u32, n_max: u32) -> Result<Self> {
        if n_max < 1 || blocks < 1 || blocks > n_max {
            return Err(Error::domain(format!("need 1 <= blocks <= n_max, got blocks = {blocks}, n_max = {n_max}")));
        }
        Ok(Self { blocks, n_max })
    }

    pub fn ceiling(n_max: u32) -> Result<Self> {
        Self::new(n_max, n_max)
    }

    pub fn blocks(&self) -> u32 {
        self.blocks
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn at_ceiling(&self) -> bool {
        self.blocks == self.n_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Transition {
    Coalescence,
    Fragmentation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: ChainState,
    pub dwell: f64,
    pub transition: Transition,
}

/// Rates with the constant factors folded in, for the inner loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    half_c: f64,
    lambda: f64,
}

impl Kernel {
    pub(crate) fn new(params: &ModelParams) -> Self {
        Self { half_c: 0.5 * params.c(), lambda: params.lambda() }
    }

    /// `(coalesces, dwell)` or `None` if `j` is absorbing.
    #[inline(always)]
    pub(crate) fn draw<R: RngCore + ?Sized>(&self, j: u32, rng: &mut R) -> Option<(bool, f64)> {
        let jf = f64::from(j);
        let down = self.half_c * jf * (jf - 1.0);
        let frag = self.lambda * jf;
        let total = down + frag;
        if total <= 0.0 {
            return None;
        }
        let dwell = exponential(rng, total);
        let coalesces = if frag == 0.0 {
            true
        } else if down == 0.0 {
            false
        } else {
            uniform_open(rng) * total < down
        };
        Some((coalesces, dwell))
    }
}

/// One transition from `state`. `None` when no transition is possible
/// (one block and `lambda = 0`).
pub fn step<R: RngCore + ?Sized>(state: ChainState, params: &ModelParams, rng: &mut R) -> Option<Step> {
    let (coalesces, dwell) = Kernel::new(params).draw(state.blocks, rng)?;
    let (blocks, transition) =
        if coalesces { (state.blocks - 1, Transition::Coalescence) } else { (state.n_max, Transition::Fragmentation) };
    Some(Step { next: ChainState { blocks, n_max: state.n_max }, dwell, transition })
}

/// Outcome of one descent to a target level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentRecord {
    pub total_time: f64,
    pub frag_count: u64,
    pub min_state_reached: u32,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DescentOutcome {
    Reached(DescentRecord),
    /// The step budget ran out before the target was hit.
    BudgetExhausted(DescentRecord),
}

impl DescentOutcome {
    pub fn record(&self) -> &DescentRecord {
        match self {
            DescentOutcome::Reached(r) | DescentOutcome::BudgetExhausted(r) => r,
        }
    }

    pub fn reached(&self) -> Option<&DescentRecord> {
        match self {
            DescentOutcome::Reached(r) => Some(r),
            DescentOutcome::BudgetExhausted(_) => None,
        }
    }
}

/// Runs the chain from `n_start` until it first has `k_target` blocks,
/// restarting from `n_max` after every shatter.
pub fn simulate_descent<R: RngCore + ?Sized>(
    params: &ModelParams,
    n_start: u32,
    k_target: u32,
    n_max: u32,
    budget: Option<u64>,
    rng: &mut R,
) -> Result<DescentOutcome> {
    if !(1 <= k_target && k_target < n_start && n_start <= n_max) {
        return Err(Error::domain(format!(
            "need 1 <= k_target < n_start <= n_max, got {k_target}, {n_start}, {n_max}"
        )));
    }
    let kernel = Kernel::new(params);
    let budget = budget.unwrap_or(u64::MAX);
    let mut time = NeumaierSum::new();
    let mut j = n_start;
    let mut min_state = n_start;
    let mut frag_count = 0u64;
    let mut steps = 0u64;
    loop {
        if steps >= budget {
            let rec = DescentRecord { total_time: time.value(), frag_count, min_state_reached: min_state, steps };
            return Ok(DescentOutcome::BudgetExhausted(rec));
        }
        // j >= 2 here, so a transition is always available.
        let (coalesces, dwell) = kernel.draw(j, rng).expect("j >= 2 is never absorbing");
        time.add(dwell);
        steps += 1;
        if coalesces {
            j -= 1;
            min_state = min_state.min(j);
            if j == k_target {
                let rec = DescentRecord { total_time: time.value(), frag_count, min_state_reached: min_state, steps };
                return Ok(DescentOutcome::Reached(rec));
            }
        } else {
            frag_count += 1;
            j = n_max;
        }
    }
}

/// Independent descents, replica `i` seeded with stream `i` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn descent_replicas(
    params: &ModelParams,
    n_start: u32,
    k_target: u32,
    n_max: u32,
    budget: Option<u64>,
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<DescentOutcome>> {
    map_replicas_with(exec, replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        simulate_descent(params, n_start, k_target, n_max, budget, &mut rng)
    })
    .into_iter()
    .collect()
}

/// Time until the first shatter, started from `n_start` blocks.
pub fn first_fragmentation_time<R: RngCore + ?Sized>(params: &ModelParams, n_start: u32, rng: &mut R) -> Result<f64> {
    params.require_fragmentation()?;
    if n_start < 1 {
        return Err(Error::domain("n_start must be >= 1"));
    }
    let kernel = Kernel::new(params);
    let mut time = NeumaierSum::new();
    let mut j = n_start;
    loop {
        let (coalesces, dwell) = kernel.draw(j, rng).expect("lambda > 0 keeps every state active");
        time.add(dwell);
        if !coalesces {
            return Ok(time.value());
        }
        j -= 1;
    }
}

/// Receives a simulated path as it is generated.
pub trait PathSink {
    /// The chain held `state` on `[start, start + duration)`.
    fn hold(&mut self, state: u32, start: f64, duration: f64);

    /// The chain jumped into `to` at `time`.
    fn jump(&mut self, _time: f64, _to: u32, _transition: Transition) {}

    /// Returning `true` ends the simulation at the last event, reported as
    /// truncated. Lets a sink whose writer failed stop the run.
    fn done(&self) -> bool {
        false
    }
}

impl<A: PathSink, B: PathSink> PathSink for (A, B) {
    fn hold(&mut self, state: u32, start: f64, duration: f64) {
        self.0.hold(state, start, duration);
        self.1.hold(state, start, duration);
    }

    fn jump(&mut self, time: f64, to: u32, transition: Transition) {
        self.0.jump(time, to, transition);
        self.1.jump(time, to, transition);
    }

    fn done(&self) -> bool {
        self.0.done() || self.1.done()
    }
}

impl<S: PathSink + ?Sized> PathSink for &mut S {
    fn hold(&mut self, state: u32, start: f64, duration: f64) {
        (**self).hold(state, start, duration);
    }

    fn jump(&mut self, time: f64, to: u32, transition: Transition) {
        (**self).jump(time, to, transition);
    }

    fn done(&self) -> bool {
        (**self).done()
    }
}

/// Bookkeeping returned by [`simulate_path_into`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSummary {
    pub events: u64,
    /// End of the simulated window: `t_end`, or the last event time if the
    /// event budget ran out.
    pub covered_until: f64,
    pub truncated: bool,
}

/// Free-running simulation on `[0, t_end]` streamed into `sink`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path_into<R: RngCore + ?Sized, S: PathSink + ?Sized>(
    params: &ModelParams,
    n_max: u32,
    t_end: f64,
    initial: u32,
    max_events: Option<u64>,
    rng: &mut R,
    sink: &mut S,
) -> Result<PathSummary> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::domain(format!("t_end must be finite and > 0, got {t_end}")));
    }
    ChainState::new(initial, n_max)?;
    let kernel = Kernel::new(params);
    let max_events = max_events.unwrap_or(u64::MAX);
    let mut time = NeumaierSum::new();
    let mut j = initial;
    let mut events = 0u64;
    loop {
        let start = time.value();
        let Some((coalesces, dwell)) = kernel.draw(j, rng) else {
            sink.hold(j, start, t_end - start);
            return Ok(PathSummary { events, covered_until: t_end, truncated: false });
        };
        time.add(dwell);
        let end = time.value();
        if end >= t_end {
            sink.hold(j, start, t_end - start);
            return Ok(PathSummary { events, covered_until: t_end, truncated: false });
        }
        if events >= max_events || sink.done() {
            return Ok(PathSummary { events, covered_until: start, truncated: true });
        }
        sink.hold(j, start, dwell);
        events += 1;
        let transition = if coalesces {
            j -= 1;
            Transition::Coalescence
        } else {
            j = n_max;
            Transition::Fragmentation
        };
        sink.jump(end, j, transition);
    }
}

/// Run seed and stream, kept with a trajectory for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

/// Piecewise-constant block-count path on `[0, covered_until]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    params: ModelParams,
    n_max: u32,
    initial: u32,
    t_end: f64,
    covered_until: f64,
    jump_times: Vec<f64>,
    states: Vec<u32>,
    seed: Option<SeedRecord>,
    truncated: bool,
}

/// Sink that stores every jump.
#[derive(Debug, Default, Clone)]
pub struct JumpRecorder {
    pub jump_times: Vec<f64>,
    pub states: Vec<u32>,
}

impl PathSink for JumpRecorder {
    fn hold(&mut self, _: u32, _: f64, _: f64) {}

    fn jump(&mut self, time: f64, to: u32, _: Transition) {
        self.jump_times.push(time);
        self.states.push(to);
    }
}

/// Simulates and stores a full trajectory. `max_events` bounds memory; when
/// it is hit the trajectory is cut at the last event and flagged.
pub fn simulate_path<R: RngCore + ?Sized>(
    params: &ModelParams,
    n_max: u32,
    t_end: f64,
    initial: u32,
    max_events: Option<u64>,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut rec = JumpRecorder::default();
    let summary = simulate_path_into(params, n_max, t_end, initial, max_events, rng, &mut rec)?;
    Ok(Trajectory {
        params: *params,
        n_max,
        initial,
        t_end,
        covered_until: summary.covered_until,
        jump_times: rec.jump_times,
        states: rec.states,
        seed: None,
        truncated: summary.truncated,
    })
}

/// [`simulate_path`] on stream `stream` of `seed`, with the seed recorded.
pub fn simulate_path_seeded(
    params: &ModelParams,
    n_max: u32,
    t_end: f64,
    initial: u32,
    max_events: Option<u64>,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    let mut rng = replica_rng(seed, stream);
    let mut traj = simulate_path(params, n_max, t_end, initial, max_events, &mut rng)?;
    traj.seed = Some(SeedRecord { seed, stream });
    Ok(traj)
}

const BINARY_MAGIC: &[u8; 8] = b"EFFCTRJ\x01";

impl Trajectory {
    /// Builds a trajectory from stored parts, checking the path invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        params: ModelParams,
        n_max: u32,
        initial: u32,
        t_end: f64,
        covered_until: f64,
        jump_times: Vec<f64>,
        states: Vec<u32>,
        seed: Option<SeedRecord>,
        truncated: bool,
    ) -> Result<Self> {
        let traj = Self { params, n_max, initial, t_end, covered_until, jump_times, states, seed, truncated };
        traj.validate()?;
        Ok(traj)
    }

    /// Checks: times strictly increasing inside the window; every move is a
    /// unit step down or a jump to the ceiling.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::domain(m));
        if self.jump_times.len() != self.states.len() {
            return bad("jump_times and states differ in length".into());
        }
        ChainState::new(self.initial, self.n_max)?;
        if !(self.covered_until <= self.t_end) {
            return bad("covered window exceeds t_end".into());
        }
        let mut prev_t = 0.0;
        let mut prev_s = self.initial;
        for (&t, &s) in self.jump_times.iter().zip(&self.states) {
            if !(t > prev_t) || t > self.covered_until {
                return bad(format!("jump time {t} not increasing within window"));
            }
            let unit_down = s + 1 == prev_s;
            let to_ceiling = s == self.n_max;
            if !(unit_down || to_ceiling) {
                return bad(format!("illegal move {prev_s} -> {s} at t = {t}"));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    /// Requested horizon.
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// End of the simulated window (equals `t_end` unless truncated).
    pub fn covered_until(&self) -> f64 {
        self.covered_until
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn seed(&self) -> Option<SeedRecord> {
        self.seed
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn event_count(&self) -> usize {
        self.jump_times.len()
    }

    /// State held during segment `i` (segment 0 precedes the first jump).
    pub fn segment_state(&self, i: usize) -> u32 {
        if i == 0 {
            self.initial
        } else {
            self.states[i - 1]
        }
    }

    /// `[start, end)` of segment `i`, `0 <= i <= event_count()`.
    pub fn segment_bounds(&self, i: usize) -> (f64, f64) {
        let start = if i == 0 { 0.0 } else { self.jump_times[i - 1] };
        let end = self.jump_times.get(i).copied().unwrap_or(self.covered_until);
        (start, end)
    }

    /// Replays the stored path into a sink.
    pub fn replay<S: PathSink + ?Sized>(&self, sink: &mut S) {
        for i in 0..=self.event_count() {
            let (start, end) = self.segment_bounds(i);
            sink.hold(self.segment_state(i), start, end - start);
            if i < self.event_count() {
                let to = self.states[i];
                let transition =
                    if to + 1 == self.segment_state(i) { Transition::Coalescence } else { Transition::Fragmentation };
                sink.jump(end, to, transition);
            }
        }
    }

    /// CSV with header `t,state`: one row for time 0, then one per jump.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut sink = CsvSink::new(w, self.initial)?;
        self.replay(&mut sink);
        sink.finish()
    }

    /// Little-endian binary encoding; [`Trajectory::from_bytes`] inverts it exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.jump_times.len();
        let mut out = Vec::with_capacity(64 + 12 * n);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&self.params.c().to_le_bytes());
        out.extend_from_slice(&self.params.lambda().to_le_bytes());
        out.extend_from_slice(&self.n_max.to_le_bytes());
        out.extend_from_slice(&self.initial.to_le_bytes());
        out.extend_from_slice(&self.t_end.to_le_bytes());
        out.extend_from_slice(&self.covered_until.to_le_bytes());
        out.push(u8::from(self.truncated));
        match self.seed {
            Some(s) => {
                out.push(1);
                out.extend_from_slice(&s.seed.to_le_bytes());
                out.extend_from_slice(&s.stream.to_le_bytes());
            }
            None => out.push(0),
        }
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for t in &self.jump_times {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for s in &self.states {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { buf: bytes, pos: 0 };
        if r.take(8)? != BINARY_MAGIC {
            return Err(Error::Parse("bad trajectory magic".into()));
        }
        let c = r.f64()?;
        let lambda = r.f64()?;
        let params = ModelParams::new(c, lambda)?;
        let n_max = r.u32()?;
        let initial = r.u32()?;
        let t_end = r.f64()?;
        let covered_until = r.f64()?;
        let truncated = r.take(1)?[0] != 0;
        let seed = match r.take(1)?[0] {
            0 => None,
            _ => Some(SeedRecord { seed: r.u64()?, stream: r.u64()? }),
        };
        let n = usize::try_from(r.u64()?).map_err(|_| Error::Parse("length overflow".into()))?;
        if bytes.len().saturating_sub(r.pos) != n * 12 {
            return Err(Error::Parse("trajectory payload length mismatch".into()));
        }
        let jump_times = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let states = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        Self::from_parts(params, n_max, initial, t_end, covered_until, jump_times, states, seed, truncated)
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self.buf.get(self.pos..end).ok_or_else(|| Error::Parse("truncated trajectory bytes".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Streams `t,state` rows straight to a writer, so paths with hundreds of
/// millions of events never have to be held in memory.
pub struct CsvSink<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, initial: u32) -> Result<Self> {
        writeln!(out, "t,state")?;
        writeln!(out, "0,{initial}")?;
        Ok(Self { out, error: None })
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(())
    }
}

impl<W: Write> PathSink for CsvSink<W> {
    fn hold(&mut self, _: u32, _: f64, _: f64) {}

    fn jump(&mut self, time: f64, to: u32, _: Transition) {
        if self.error.is_none() {
            if let Err(e) = writeln!(self.out, "{time},{to}") {
                self.error = Some(e);
            }
        }
    }

    fn done(&self) -> bool {
        self.error.is_some()
    }
}

/// Parses the `t,state` CSV written by [`Trajectory::write_csv`].
pub fn read_csv_rows<R: BufRead>(reader: R) -> Result<Vec<(f64, u32)>> {
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h == "t,state" => {}
        _ => return Err(Error::Parse("missing `t,state` header".into())),
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        let (t, s) = line.split_once(',').ok_or_else(|| Error::Parse(format!("bad row `{line}`")))?;
        let t: f64 = t.parse().map_err(|_| Error::Parse(format!("bad time `{t}`")))?;
        let s: u32 = s.parse().map_err(|_| Error::Parse(format!("bad state `{s}`")))?;
        rows.push((t, s));
    }
    Ok(rows)
}

/// Total time spent in each block count.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationHistogram {
    dwell: Vec<NeumaierSum>,
    visits: Vec<u64>,
}

impl OccupationHistogram {
    pub fn new(n_max: u32) -> Self {
        let len = n_max as usize + 1;
        Self { dwell: vec![NeumaierSum::new(); len], visits: vec![0; len] }
    }

    pub fn n_max(&self) -> u32 {
        (self.dwell.len() - 1) as u32
    }

    pub fn dwell(&self, k: u32) -> f64 {
        self.dwell.get(k as usize).map_or(0.0, NeumaierSum::value)
    }

    /// Number of holding intervals spent in `k` (a ceiling self-transition
    /// starts a new interval).
    pub fn visits(&self, k: u32) -> u64 {
        self.visits.get(k as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> f64 {
        self.dwell.iter().map(NeumaierSum::value).collect::<NeumaierSum>().value()
    }

    pub fn fraction(&self, k: u32) -> f64 {
        self.dwell(k) / self.total()
    }

    /// Nonzero entries `(k, dwell)` in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.dwell.iter().enumerate().map(|(k, s)| (k as u32, s.value())).filter(|&(_, d)| d > 0.0)
    }

    /// Adds another histogram with the same ceiling.
    pub fn merge(&mut self, other: &OccupationHistogram) {
        assert_eq!(self.dwell.len(), other.dwell.len(), "histograms have different ceilings");
        for (a, b) in self.dwell.iter_mut().zip(&other.dwell) {
            a.add(b.value());
        }
        for (a, b) in self.visits.iter_mut().zip(&other.visits) {
            *a += b;
        }
    }
}

impl PathSink for OccupationHistogram {
    #[inline]
    fn hold(&mut self, state: u32, _start: f64, duration: f64) {
        let k = state as usize;
        self.dwell[k].add(duration);
        self.visits[k] += 1;
    }
}

pub fn occupation_histogram(trajectory: &Trajectory) -> Result<OccupationHistogram> {
    if trajectory.covered_until() <= 0.0 {
        return Err(Error::domain("empty trajectory"));
    }
    let mut hist = OccupationHistogram::new(trajectory.n_max());
    trajectory.replay(&mut hist);
    Ok(hist)
}

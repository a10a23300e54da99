//! Partitions of `{1..n}` and the shatter-coalescence dynamics on them.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rng::{exponential, uniform_open};
use crate::summation::NeumaierSum;

/// A partition of `{1..n}` in canonical form: elements ascending inside each
/// block, blocks ordered by least element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    n: u32,
    blocks: Vec<Vec<u32>>,
}

impl Partition {
    /// Validates and canonicalizes `blocks`.
    pub fn new(n: u32, mut blocks: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("ground set must be nonempty".into()));
        }
        let mut seen = vec![false; n as usize + 1];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            b.sort_unstable();
            for &e in b.iter() {
                if e == 0 || e > n {
                    return Err(Error::InvalidPartition(format!("element {e} outside 1..={n}")));
                }
                if std::mem::replace(&mut seen[e as usize], true) {
                    return Err(Error::InvalidPartition(format!("element {e} appears twice")));
                }
            }
        }
        if let Some(missing) = (1..=n).find(|&e| !seen[e as usize]) {
            return Err(Error::InvalidPartition(format!("element {missing} not covered")));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    pub fn singletons(n: u32) -> Result<Self> {
        Self::new(n, (1..=n).map(|e| vec![e]).collect())
    }

    pub fn single_block(n: u32) -> Result<Self> {
        Self::new(n, vec![(1..=n).collect()])
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    /// Index (0-based, canonical order) of the block holding `e`.
    pub fn block_of(&self, e: u32) -> Option<usize> {
        self.blocks.iter().position(|b| b.binary_search(&e).is_ok())
    }

    /// Restriction to `{1..m}`.
    pub fn restrict(&self, m: u32) -> Result<Self> {
        if m == 0 || m > self.n {
            return Err(Error::domain(format!("cannot restrict a partition of 1..={} to 1..={m}", self.n)));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().copied().filter(|&e| e <= m).collect::<Vec<_>>())
            .filter(|b| !b.is_empty())
            .collect();
        Self::new(m, blocks)
    }

    /// Image under the permutation `sigma`, given as `sigma[i - 1] = σ(i)`.
    pub fn permute(&self, sigma: &[u32]) -> Result<Self> {
        if sigma.len() != self.n as usize {
            return Err(Error::domain("permutation length differs from n"));
        }
        let blocks = self.blocks.iter().map(|b| b.iter().map(|&e| sigma[e as usize - 1]).collect()).collect();
        Self::new(self.n, blocks)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            for (j, e) in b.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{e}")?;
            }
        }
        f.write_str("}")
    }
}

impl FromStr for Partition {
    type Err = Error;

    /// Parses the canonical text form; non-canonical input is rejected so
    /// that text and value correspond one-to-one.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::Parse(format!("partition `{s}` must be wrapped in braces")))?;
        let blocks = inner
            .split('|')
            .map(|b| {
                b.split(',')
                    .map(|e| e.parse::<u32>().map_err(|_| Error::Parse(format!("bad element `{e}` in `{s}`"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let n = blocks.iter().map(Vec::len).sum::<usize>() as u32;
        let parsed = Self::new(n, blocks)?;
        if parsed.to_string() != s {
            return Err(Error::Parse(format!("`{s}` is not in canonical form")));
        }
        Ok(parsed)
    }
}

/// Coagulation of `pi` by `pi2`: block `i` of the result is the union of
/// the blocks `pi_j` with `j` in block `i` of `pi2`.
pub fn coag(pi: &Partition, pi2: &Partition) -> Result<Partition> {
    let b = pi.block_count() as u32;
    if pi2.n() < b {
        return Err(Error::InvalidPartition(format!("coagulating partition has {} indices for {b} blocks", pi2.n())));
    }
    let blocks = pi2
        .blocks()
        .iter()
        .map(|idx| {
            idx.iter().filter(|&&j| j <= b).flat_map(|&j| pi.blocks[j as usize - 1].iter().copied()).collect::<Vec<_>>()
        })
        .filter(|blk| !blk.is_empty())
        .collect();
    Partition::new(pi.n(), blocks)
}

/// Fragmentation of block `k` (1-based) of `pi` by `pi2`.
pub fn frag(pi: &Partition, pi2: &Partition, k: usize) -> Result<Partition> {
    if k == 0 || k > pi.block_count() {
        return Err(Error::domain(format!("block index {k} outside 1..={}", pi.block_count())));
    }
    if pi2.n() < pi.n() {
        return Err(Error::InvalidPartition("fragmenting partition does not cover the ground set".into()));
    }
    let target = &pi.blocks[k - 1];
    let mut blocks: Vec<Vec<u32>> =
        pi.blocks.iter().enumerate().filter(|&(i, _)| i != k - 1).map(|(_, b)| b.clone()).collect();
    for piece in pi2.blocks() {
        let part: Vec<u32> = target.iter().copied().filter(|e| piece.binary_search(e).is_ok()).collect();
        if !part.is_empty() {
            blocks.push(part);
        }
    }
    Partition::new(pi.n(), blocks)
}

/// Exchangeable partition of `{1..n}` from a paintbox with the given masses;
/// elements falling in the leftover mass become singletons.
pub fn paintbox_sample<R: RngCore + ?Sized>(masses: &[f64], n: u32, rng: &mut R) -> Result<Partition> {
    if masses.iter().any(|m| !(*m >= 0.0)) || masses.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::domain("masses must be nonnegative and decreasing"));
    }
    let mut cumulative = Vec::with_capacity(masses.len());
    let mut acc = NeumaierSum::new();
    for &m in masses {
        acc.add(m);
        cumulative.push(acc.value());
    }
    if acc.value() > 1.0 + 1e-12 {
        return Err(Error::domain(format!("masses sum to {} > 1", acc.value())));
    }
    let mut boxes: Vec<Vec<u32>> = vec![Vec::new(); masses.len()];
    let mut dust = Vec::new();
    for e in 1..=n {
        let u = uniform_open(rng);
        let i = cumulative.partition_point(|&c| c <= u);
        if i < masses.len() {
            boxes[i].push(e);
        } else {
            dust.push(vec![e]);
        }
    }
    boxes.retain(|b| !b.is_empty());
    boxes.extend(dust);
    Partition::new(n, boxes)
}

/// Block sizes over `n`, in decreasing order.
pub fn asymptotic_frequencies(pi: &Partition) -> Vec<f64> {
    let mut sizes: Vec<usize> = pi.blocks.iter().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.into_iter().map(|s| s as f64 / f64::from(pi.n)).collect()
}

/// Mutable state for simulation: a block label per element plus the block
/// member lists, so merges cost the size of the smaller block.
#[derive(Debug, Clone)]
struct WorkingPartition {
    label: Vec<usize>,
    blocks: Vec<Vec<u32>>,
}

impl WorkingPartition {
    fn from_partition(pi: &Partition) -> Self {
        let mut label = vec![0; pi.n as usize + 1];
        for (i, b) in pi.blocks.iter().enumerate() {
            for &e in b {
                label[e as usize] = i;
            }
        }
        Self { label, blocks: pi.blocks.clone() }
    }

    fn block_count(&self) -> usize {
        self.blocks.len()
    }

    fn remove_block(&mut self, i: usize) -> Vec<u32> {
        let removed = self.blocks.swap_remove(i);
        if i < self.blocks.len() {
            for &e in &self.blocks[i] {
                self.label[e as usize] = i;
            }
        }
        removed
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (keep, drop) = if self.blocks[a].len() >= self.blocks[b].len() { (a, b) } else { (b, a) };
        let moved = std::mem::take(&mut self.blocks[drop]);
        for &e in &moved {
            self.label[e as usize] = keep;
        }
        self.blocks[keep].extend(moved);
        self.remove_block(drop);
    }

    fn shatter(&mut self, i: usize) {
        let members = self.remove_block(i);
        for e in members {
            self.label[e as usize] = self.blocks.len();
            self.blocks.push(vec![e]);
        }
    }

    fn snapshot(&self, n: u32) -> Partition {
        Partition::new(n, self.blocks.clone()).expect("working partition stays valid")
    }
}

fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> usize {
    ((uniform_open(rng) * len as f64) as usize).min(len - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionEvent {
    Coalescence,
    Shatter,
}

/// Waiting time to the next event and the coalescence probability, or
/// `None` if nothing can happen.
fn next_event_time<R: RngCore + ?Sized>(params: &ModelParams, blocks: usize, rng: &mut R) -> Option<(f64, f64)> {
    let b = blocks as u64;
    let coal = params.coalescence_rate(b);
    let total = coal + params.fragmentation_rate(b);
    if total <= 0.0 {
        return None;
    }
    Some((exponential(rng, total), coal / total))
}

fn apply_event<R: RngCore + ?Sized>(state: &mut WorkingPartition, p_coal: f64, rng: &mut R) -> PartitionEvent {
    let b = state.block_count();
    if uniform_open(rng) < p_coal {
        let i = uniform_index(rng, b);
        let mut j = uniform_index(rng, b - 1);
        if j >= i {
            j += 1;
        }
        state.merge(i, j);
        PartitionEvent::Coalescence
    } else {
        state.shatter(uniform_index(rng, b));
        PartitionEvent::Shatter
    }
}

/// Piecewise-constant partition path: `snapshots[0]` is the initial value
/// at time 0, each later entry the value right after an event.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPath {
    pub snapshots: Vec<(f64, Partition)>,
    pub t_end: f64,
    pub truncated: bool,
}

impl PartitionPath {
    pub fn block_counts(&self) -> Vec<(f64, usize)> {
        self.snapshots.iter().map(|(t, p)| (*t, p.block_count())).collect()
    }

    /// Value at time `t` (right-continuous).
    pub fn at(&self, t: f64) -> &Partition {
        let i = self.snapshots.partition_point(|(s, _)| *s <= t);
        &self.snapshots[i.saturating_sub(1)].1
    }
}

/// Shatter-coalescence dynamics on `{1..n}`: each pair of blocks merges at
/// rate `c`, each block shatters into singletons at rate `lambda`.
pub fn simulate_restricted_effc<R: RngCore + ?Sized>(
    params: &ModelParams,
    t_end: f64,
    initial: &Partition,
    max_events: Option<u64>,
    rng: &mut R,
) -> Result<PartitionPath> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::domain(format!("t_end must be finite and > 0, got {t_end}")));
    }
    let n = initial.n();
    let mut state = WorkingPartition::from_partition(initial);
    let mut snapshots = vec![(0.0, initial.clone())];
    let mut time = NeumaierSum::new();
    let max_events = max_events.unwrap_or(u64::MAX);
    let mut events = 0u64;
    let mut truncated = false;
    loop {
        if events >= max_events {
            truncated = true;
            break;
        }
        let Some((dwell, p_coal)) = next_event_time(params, state.block_count(), rng) else { break };
        time.add(dwell);
        if time.value() >= t_end {
            break;
        }
        apply_event(&mut state, p_coal, rng);
        events += 1;
        snapshots.push((time.value(), state.snapshot(n)));
    }
    Ok(PartitionPath { snapshots, t_end, truncated })
}

/// Time of the first shatter event starting from `initial`.
pub fn first_shatter_time<R: RngCore + ?Sized>(params: &ModelParams, initial: &Partition, rng: &mut R) -> Result<f64> {
    params.require_fragmentation()?;
    let mut state = WorkingPartition::from_partition(initial);
    let mut time = NeumaierSum::new();
    loop {
        let (dwell, p_coal) =
            next_event_time(params, state.block_count(), rng).expect("lambda > 0 keeps every state active");
        time.add(dwell);
        if apply_event(&mut state, p_coal, rng) == PartitionEvent::Shatter {
            return Ok(time.value());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::mean_and_se;
    use proptest::prelude::*;

    fn part(s: &str) -> Partition {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_text() {
        let p = Partition::new(4, vec![vec![4], vec![3, 1], vec![2]]).unwrap();
        assert_eq!(p.to_string(), "{1,3|2|4}");
        assert_eq!(part("{1,3|2|4}"), p);
        assert!("{3,1|2|4}".parse::<Partition>().is_err());
        assert!("{1,4|2}".parse::<Partition>().is_err());
        assert!("1,2".parse::<Partition>().is_err());
        assert!("{1,x}".parse::<Partition>().is_err());
    }

    #[test]
    fn invalid_partitions() {
        assert!(Partition::new(3, vec![vec![1, 2], vec![2, 3]]).is_err());
        assert!(Partition::new(3, vec![vec![1, 2]]).is_err());
        assert!(Partition::new(3, vec![vec![1, 2, 3], vec![]]).is_err());
        assert!(Partition::new(2, vec![vec![1, 2, 3]]).is_err());
        assert!(Partition::new(0, vec![]).is_err());
    }

    #[test]
    fn coag_examples() {
        let s4 = Partition::singletons(4).unwrap();
        assert_eq!(coag(&s4, &part("{1,2|3,4}")).unwrap(), part("{1,2|3,4}"));
        assert_eq!(coag(&part("{1,3|2|4}"), &part("{1,2|3}")).unwrap(), part("{1,2,3|4}"));
        assert!(coag(&part("{1,3|2|4}"), &part("{1,2}")).is_err());
    }

    #[test]
    fn coag_ignores_indices_beyond_block_count() {
        // pi2 on 5 indices, pi has 2 blocks: only {1,2} matter.
        assert_eq!(coag(&part("{1,2|3}"), &part("{1,3|2,4|5}")).unwrap(), part("{1,2|3}"));
    }

    #[test]
    fn frag_examples() {
        let s3 = Partition::singletons(3).unwrap();
        assert_eq!(frag(&part("{1,2,3}"), &s3, 1).unwrap(), s3);
        let s4 = Partition::singletons(4).unwrap();
        assert_eq!(frag(&part("{1,4|2,3}"), &s4, 2).unwrap(), part("{1,4|2|3}"));
        assert_eq!(frag(&part("{1,2,3,4}"), &part("{1,3|2,4}"), 1).unwrap(), part("{1,3|2,4}"));
        assert!(frag(&part("{1,4|2,3}"), &s4, 3).is_err());
        assert!(frag(&part("{1,4|2,3}"), &s4, 0).is_err());
    }

    #[test]
    fn frequencies() {
        assert_eq!(asymptotic_frequencies(&Partition::single_block(7).unwrap()), vec![1.0]);
        assert_eq!(asymptotic_frequencies(&Partition::singletons(4).unwrap()), vec![0.25; 4]);
        assert_eq!(asymptotic_frequencies(&part("{1,2,3|4}")), vec![0.75, 0.25]);
        assert_eq!(asymptotic_frequencies(&part("{1|2,3,4}")), vec![0.75, 0.25]);
    }

    #[test]
    fn paintbox_trivial_cases() {
        let mut rng = replica_rng(1, 0);
        assert_eq!(paintbox_sample(&[1.0], 9, &mut rng).unwrap(), Partition::single_block(9).unwrap());
        assert_eq!(paintbox_sample(&[], 9, &mut rng).unwrap(), Partition::singletons(9).unwrap());
        assert!(paintbox_sample(&[0.3, 0.5], 3, &mut rng).is_err());
        assert!(paintbox_sample(&[0.6, 0.5], 3, &mut rng).is_err());
        assert!(paintbox_sample(&[-0.1], 3, &mut rng).is_err());
    }

    #[test]
    fn paintbox_pair_collision() {
        let mut rng = replica_rng(2, 0);
        let n = 100_000;
        let same = (0..n).filter(|_| paintbox_sample(&[0.5, 0.5], 2, &mut rng).unwrap().block_count() == 1).count();
        let phat = same as f64 / n as f64;
        assert!((phat - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "phat = {phat}");
    }

    #[test]
    fn paintbox_exchangeable_under_transposition() {
        // Size of the block holding 1 in σ(π) equals that of 2 in π; both
        // must have the law of the block of 1 in π.
        let mut rng = replica_rng(3, 0);
        let masses = [0.4, 0.25, 0.1];
        let sigma = [2, 1, 3, 4, 5, 6];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..10_000 {
            let pi = paintbox_sample(&masses, 6, &mut rng).unwrap();
            let size = |p: &Partition| p.blocks()[p.block_of(1).unwrap()].len() as f64;
            a.push(size(&pi));
            b.push(size(&pi.permute(&sigma).unwrap()));
        }
        let (ma, sa) = mean_and_se(&a);
        let (mb, sb) = mean_and_se(&b);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn pure_kingman_on_three() {
        let params = ModelParams::kingman(1.0).unwrap();
        let mut rng = replica_rng(4, 0);
        let path = simulate_restricted_effc(&params, 1e9, &Partition::singletons(3).unwrap(), None, &mut rng).unwrap();
        assert_eq!(path.snapshots.len(), 3);
        assert_eq!(path.snapshots.last().unwrap().1, Partition::single_block(3).unwrap());
        assert!(!path.truncated);
    }

    #[test]
    fn budget_truncates_path() {
        let params = ModelParams::new(1.0, 0.5).unwrap();
        let mut rng = replica_rng(5, 0);
        let path =
            simulate_restricted_effc(&params, 1e6, &Partition::singletons(20).unwrap(), Some(50), &mut rng).unwrap();
        assert!(path.truncated);
        assert_eq!(path.snapshots.len(), 51);
    }

    #[test]
    fn block_count_moves_like_the_chain() {
        let params = ModelParams::new(1.0, 0.3).unwrap();
        let mut rng = replica_rng(6, 0);
        let n = 40;
        let path =
            simulate_restricted_effc(&params, 200.0, &Partition::singletons(n).unwrap(), None, &mut rng).unwrap();
        for w in path.snapshots.windows(2) {
            let (b0, b1) = (w[0].1.block_count(), w[1].1.block_count());
            // a shatter of a singleton leaves the count unchanged
            assert!(b1 + 1 == b0 || b1 >= b0);
            assert!(w[1].0 > w[0].0);
        }
        assert_eq!(path.at(0.0), &Partition::singletons(n).unwrap());
    }

    #[test]
    fn restriction_consistency() {
        // Block count at t = 1 restricted to [10] vs a direct size-10 run.
        let params = ModelParams::new(1.0, 0.4).unwrap();
        let (mut big, mut small) = (Vec::new(), Vec::new());
        for r in 0..4000u64 {
            let mut rng = replica_rng(7, r);
            let p =
                simulate_restricted_effc(&params, 1.0, &Partition::singletons(30).unwrap(), None, &mut rng).unwrap();
            big.push(p.at(1.0).restrict(10).unwrap().block_count() as f64);
            let mut rng = replica_rng(8, r);
            let q =
                simulate_restricted_effc(&params, 1.0, &Partition::singletons(10).unwrap(), None, &mut rng).unwrap();
            small.push(q.at(1.0).block_count() as f64);
        }
        let (ma, sa) = mean_and_se(&big);
        let (mb, sb) = mean_and_se(&small);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "{ma} vs {mb}");
    }

    #[test]
    fn first_shatter_needs_fragmentation() {
        let mut rng = replica_rng(9, 0);
        let s = Partition::singletons(3).unwrap();
        assert!(first_shatter_time(&ModelParams::kingman(1.0).unwrap(), &s, &mut rng).is_err());
    }

    fn arb_partition() -> impl Strategy<Value = Partition> {
        (1u32..30).prop_flat_map(|n| {
            proptest::collection::vec(0u32..n, n as usize).prop_map(move |labels| {
                let mut blocks: Vec<Vec<u32>> = vec![Vec::new(); n as usize];
                for (i, l) in labels.into_iter().enumerate() {
                    blocks[l as usize].push(i as u32 + 1);
                }
                blocks.retain(|b| !b.is_empty());
                Partition::new(n, blocks).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(p in arb_partition()) {
            let text = p.to_string();
            let back: Partition = text.parse().unwrap();
            prop_assert_eq!(back.to_string(), text);
            prop_assert_eq!(back, p);
        }

        #[test]
        fn identity_laws(p in arb_partition(), k in 0usize..30) {
            let n = p.n();
            prop_assert_eq!(coag(&p, &Partition::singletons(n).unwrap()).unwrap(), p.clone());
            let k = 1 + k % p.block_count();
            prop_assert_eq!(frag(&p, &Partition::single_block(n).unwrap(), k).unwrap(), p.clone());
        }

        #[test]
        fn frag_only_splits_block_k(p in arb_partition(), q in arb_partition(), k in 0usize..30) {
            prop_assume!(q.n() >= p.n());
            let k = 1 + k % p.block_count();
            let r = frag(&p, &q, k).unwrap();
            prop_assert_eq!(r.n(), p.n());
            for (i, b) in p.blocks().iter().enumerate() {
                if i + 1 != k {
                    prop_assert!(r.blocks().contains(b));
                }
            }
        }

        #[test]
        fn simulation_keeps_partitions_valid(seed in any::<u64>(), n in 1u32..40, lambda in 0.0f64..2.0) {
            let params = ModelParams::new(1.0, lambda).unwrap();
            let mut rng = replica_rng(seed, 0);
            let path = simulate_restricted_effc(&params, 3.0, &Partition::singletons(n).unwrap(), Some(5000), &mut rng).unwrap();
            for (_, p) in &path.snapshots {
                prop_assert_eq!(p.n(), n);
                prop_assert_eq!(p.blocks().iter().map(Vec::len).sum::<usize>(), n as usize);
            }
        }
    }
}

use crate::error::{arg_err, Result};
use crate::random::{seeded_rng, Rng64};
use rand::seq::SliceRandom;
use rand::Rng;

/// Tolerance on `sum p_i = 1` for custom distributions.
const PROB_SUM_TOL: f64 = 1e-9;

/// Rule selecting the constraint used at each iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlSequence {
    /// `0, 1, ..., N1-1, 0, 1, ...`.
    Cyclic,
    /// Uniform i.i.d. draws.
    UniformRandom { seed: u64 },
    /// I.i.d. draws with `P(i) = ||A(i)||^2 / ||A||^2`.
    WeightedRandom { seed: u64 },
    /// I.i.d. draws from a caller-supplied distribution.
    CustomProb { probs: Vec<f64>, seed: u64 },
    /// A fixed list, one index per iteration.
    Explicit(Vec<usize>),
}

impl ControlSequence {
    pub fn name(&self) -> &'static str {
        match self {
            ControlSequence::Cyclic => "cyclic",
            ControlSequence::UniformRandom { .. } => "uniform_random",
            ControlSequence::WeightedRandom { .. } => "weighted_random",
            ControlSequence::CustomProb { .. } => "custom_prob",
            ControlSequence::Explicit(_) => "explicit_list",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ControlSequence::UniformRandom { seed }
            | ControlSequence::WeightedRandom { seed }
            | ControlSequence::CustomProb { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// How constraints are grouped in the batched solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchOrder {
    /// Consecutive indices, wrapping around.
    Cyclic,
    /// Consecutive chunks of a fresh random permutation per sweep.
    Shuffled { seed: u64 },
    /// Independent draws of `b` distinct indices.
    Random { seed: u64 },
}

/// How the increments of a batch are scaled before the proximal step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchMode {
    /// Each increment `t A(i)^T (B(i) - A(i) X) / ||A(i)||^2` is added.
    Sum,
    /// The batch is one stacked constraint normalized by its squared norm:
    /// increments carry `t / sum_{i in batch} ||A(i)||^2`.
    Slab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchSchedule {
    pub size: usize,
    pub order: BatchOrder,
    pub mode: BatchMode,
}

impl BatchSchedule {
    pub fn new(size: usize, order: BatchOrder, mode: BatchMode) -> Self {
        Self { size, order, mode }
    }
}

/// Source of the index set used at each outer iteration.
pub(crate) trait IndexSource {
    fn next_batch(&mut self, out: &mut Vec<usize>);
}

pub(crate) struct SequenceSource {
    seq: ControlSequence,
    n: usize,
    pos: usize,
    rng: Option<Rng64>,
    cum: Vec<f64>,
}

impl SequenceSource {
    pub(crate) fn new(seq: &ControlSequence, norms_sq: &[f64], max_iters: usize) -> Result<Self> {
        let n = norms_sq.len();
        let mut cum = Vec::new();
        match seq {
            ControlSequence::WeightedRandom { .. } => cum = cumulative(norms_sq),
            ControlSequence::CustomProb { probs, .. } => {
                if probs.len() != n {
                    return arg_err(format!("{} probabilities for {n} constraints", probs.len()));
                }
                if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return arg_err("probabilities must be finite and nonnegative");
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return arg_err(format!("probabilities sum to {total}, not 1"));
                }
                cum = cumulative(probs);
            }
            ControlSequence::Explicit(list) => {
                if list.len() < max_iters {
                    return arg_err(format!(
                        "explicit index list has {} entries but {max_iters} iterations were requested",
                        list.len()
                    ));
                }
                if let Some(&i) = list.iter().find(|&&i| i >= n) {
                    return arg_err(format!("explicit index {i} out of range for {n} constraints"));
                }
            }
            _ => {}
        }
        Ok(Self { seq: seq.clone(), n, pos: 0, rng: seq.seed().map(seeded_rng), cum })
    }

    pub(crate) fn next_index(&mut self) -> usize {
        let i = match &self.seq {
            ControlSequence::Cyclic => self.pos % self.n,
            ControlSequence::UniformRandom { .. } => self.rng.as_mut().unwrap().random_range(0..self.n),
            ControlSequence::WeightedRandom { .. } | ControlSequence::CustomProb { .. } => {
                let u: f64 = self.rng.as_mut().unwrap().random();
                sample_cumulative(&self.cum, u)
            }
            ControlSequence::Explicit(list) => list[self.pos],
        };
        self.pos += 1;
        i
    }
}

impl IndexSource for SequenceSource {
    fn next_batch(&mut self, out: &mut Vec<usize>) {
        out.clear();
        out.push(self.next_index());
    }
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

/// Index `i` with `cum[i-1] <= u * total < cum[i]`, found by bisection.
pub(crate) fn sample_cumulative(cum: &[f64], u: f64) -> usize {
    let target = u * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= target).min(cum.len() - 1)
}

pub(crate) struct BatchSource {
    order: BatchOrder,
    size: usize,
    n: usize,
    next: usize,
    perm: Vec<usize>,
    rng: Option<Rng64>,
}

impl BatchSource {
    pub(crate) fn new(schedule: &BatchSchedule, n: usize) -> Result<Self> {
        if schedule.size == 0 || schedule.size > n {
            return arg_err(format!("batch size {} must lie in 1..={n}", schedule.size));
        }
        let rng = match schedule.order {
            BatchOrder::Cyclic => None,
            BatchOrder::Shuffled { seed } | BatchOrder::Random { seed } => Some(seeded_rng(seed)),
        };
        let mut s = Self { order: schedule.order, size: schedule.size, n, next: 0, perm: (0..n).collect(), rng };
        if let BatchOrder::Shuffled { .. } = s.order {
            s.perm.shuffle(s.rng.as_mut().unwrap());
        }
        Ok(s)
    }
}

impl IndexSource for BatchSource {
    fn next_batch(&mut self, out: &mut Vec<usize>) {
        out.clear();
        match self.order {
            BatchOrder::Cyclic => {
                for _ in 0..self.size {
                    out.push(self.next);
                    self.next = (self.next + 1) % self.n;
                }
            }
            BatchOrder::Shuffled { .. } => {
                for _ in 0..self.size {
                    if self.next == self.n {
                        self.perm.shuffle(self.rng.as_mut().unwrap());
                        self.next = 0;
                    }
                    out.push(self.perm[self.next]);
                    self.next += 1;
                }
            }
            BatchOrder::Random { .. } => {
                let picks = rand::seq::index::sample(self.rng.as_mut().unwrap(), self.n, self.size);
                out.extend(picks.iter());
            }
        }
    }
}

/// Every constraint at every iteration, for full-gradient methods.
pub(crate) struct FullSource(pub usize);

impl IndexSource for FullSource {
    fn next_batch(&mut self, out: &mut Vec<usize>) {
        if out.len() != self.0 {
            out.clear();
            out.extend(0..self.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(seq: ControlSequence, norms: &[f64], k: usize) -> Vec<usize> {
        let mut s = SequenceSource::new(&seq, norms, k).unwrap();
        (0..k).map(|_| s.next_index()).collect()
    }

    #[test]
    fn cyclic_wraps() {
        assert_eq!(draw(ControlSequence::Cyclic, &[1.0; 3], 7), vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = draw(ControlSequence::UniformRandom { seed: 3 }, &[1.0; 10], 50);
        let b = draw(ControlSequence::UniformRandom { seed: 3 }, &[1.0; 10], 50);
        assert_eq!(a, b);
        assert_ne!(a, draw(ControlSequence::UniformRandom { seed: 4 }, &[1.0; 10], 50));
    }

    #[test]
    fn weighted_frequencies_follow_norms() {
        let norms = [1.0, 3.0, 0.0, 4.0];
        let n = 80_000;
        let idx = draw(ControlSequence::WeightedRandom { seed: 1 }, &norms, n);
        let mut counts = [0usize; 4];
        idx.iter().for_each(|&i| counts[i] += 1);
        assert_eq!(counts[2], 0);
        for (c, w) in counts.iter().zip(norms) {
            assert!((*c as f64 / n as f64 - w / 8.0).abs() < 0.01);
        }
    }

    #[test]
    fn custom_prob_validation() {
        let bad = |p: Vec<f64>| {
            SequenceSource::new(&ControlSequence::CustomProb { probs: p, seed: 0 }, &[1.0; 2], 1).is_err()
        };
        assert!(bad(vec![0.5, 0.4]));
        assert!(bad(vec![1.5, -0.5]));
        assert!(bad(vec![1.0]));
        assert!(!bad(vec![0.25, 0.75]));
    }

    #[test]
    fn explicit_list_validation() {
        let e = |l: Vec<usize>, k| SequenceSource::new(&ControlSequence::Explicit(l), &[1.0; 3], k).is_ok();
        assert!(!e(vec![0, 1], 3));
        assert!(!e(vec![0, 1, 3], 3));
        assert!(e(vec![2, 2, 0], 3));
    }

    #[test]
    fn sample_cumulative_edges() {
        let cum = [1.0, 1.0, 3.0];
        assert_eq!(sample_cumulative(&cum, 0.0), 0);
        assert_eq!(sample_cumulative(&cum, 0.34), 2);
        assert_eq!(sample_cumulative(&cum, 0.9999), 2);
    }

    #[test]
    fn batch_orders() {
        let mut out = Vec::new();
        let mut c = BatchSource::new(&BatchSchedule::new(3, BatchOrder::Cyclic, BatchMode::Sum), 5).unwrap();
        c.next_batch(&mut out);
        assert_eq!(out, vec![0, 1, 2]);
        c.next_batch(&mut out);
        assert_eq!(out, vec![3, 4, 0]);

        let mut s =
            BatchSource::new(&BatchSchedule::new(2, BatchOrder::Shuffled { seed: 9 }, BatchMode::Sum), 6).unwrap();
        let mut seen = Vec::new();
        for _ in 0..3 {
            s.next_batch(&mut out);
            seen.extend_from_slice(&out);
        }
        seen.sort();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());

        let mut r =
            BatchSource::new(&BatchSchedule::new(4, BatchOrder::Random { seed: 2 }, BatchMode::Sum), 6).unwrap();
        r.next_batch(&mut out);
        let mut u = out.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 4);
        assert!(BatchSource::new(&BatchSchedule::new(7, BatchOrder::Cyclic, BatchMode::Sum), 6).is_err());
    }
}

//! Data collection: group sampling, verification, Monte-Carlo correctness
//! rates, old-likelihood caching, prompt filtering, and mini-batching.

use crate::policy::FrozenSnapshot;
use crate::rng::stream_rng;
use crate::taskenv::{TaskSpec, Token};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// K sampled answers for one question, with rewards, the Monte-Carlo
/// correctness rate, and per-token log-likelihoods cached from the
/// snapshot at generation time.
#[derive(Debug, Clone)]
pub struct RolloutGroup {
    pub q: u32,
    pub answers: Vec<Vec<Token>>,
    pub rewards: Vec<u8>,
    pub r_hat: f64,
    pub old_token_logprobs: Vec<Vec<f64>>,
    /// Exact-expectation mode only: per-answer probability mass under the
    /// snapshot. `None` for ordinary Monte-Carlo groups (unit weights).
    pub answer_weights: Option<Vec<f64>>,
}

impl RolloutGroup {
    pub fn num_answers(&self) -> usize {
        self.answers.len()
    }

    /// Groups with all-correct or all-incorrect answers carry no usable
    /// gradient signal.
    pub fn is_retained(&self) -> bool {
        self.r_hat > 0.0 && self.r_hat < 1.0
    }

    pub fn weight(&self, answer: usize) -> f64 {
        self.answer_weights
            .as_ref()
            .map_or(1.0, |w| w[answer])
    }
}

/// Sample K answers for one question from the frozen snapshot, verify
/// them, and cache old per-token log-likelihoods.
///
/// Randomness comes from per-(iteration, question, slot) streams, so
/// collection is reproducible and order-independent.
pub fn collect_group(
    snapshot: &FrozenSnapshot,
    task: &TaskSpec,
    q: u32,
    k: usize,
    seed: u64,
) -> Result<RolloutGroup> {
    if k < 2 {
        return Err(Error::InputContract(format!(
            "need K >= 2 answers per question, got {k}"
        )));
    }
    let policy = snapshot.policy();
    let mut answers = Vec::with_capacity(k);
    let mut rewards = Vec::with_capacity(k);
    let mut old_token_logprobs = Vec::with_capacity(k);
    for slot in 0..k {
        let mut rng = stream_rng(
            seed,
            "rollout",
            &[snapshot.iteration(), u64::from(q), slot as u64],
        );
        let answer = policy.sample_answer(q, &mut rng)?;
        rewards.push(task.verify(q, &answer)?.value());
        let mut lps = Vec::with_capacity(answer.len());
        for (t, &tok) in answer.iter().enumerate() {
            lps.push(policy.token_logprob(q, &answer[..t], tok)?);
        }
        old_token_logprobs.push(lps);
        answers.push(answer);
    }
    let r_hat = rewards.iter().map(|&r| f64::from(r)).sum::<f64>() / k as f64;
    Ok(RolloutGroup {
        q,
        answers,
        rewards,
        r_hat,
        old_token_logprobs,
        answer_weights: None,
    })
}

/// Exact-expectation pseudo-group: every answer in the space, weighted by
/// its exact probability under the snapshot, with the exact correctness
/// rate in place of the Monte-Carlo estimate. Removes sampling noise for
/// convergence experiments.
pub fn exact_expectation_group(
    snapshot: &FrozenSnapshot,
    task: &TaskSpec,
    q: u32,
) -> Result<RolloutGroup> {
    let policy = snapshot.policy();
    let mut answers = Vec::new();
    let mut rewards = Vec::new();
    let mut weights = Vec::new();
    let mut old_token_logprobs = Vec::new();
    let mut rate = 0.0;
    for answer in task.enumerate_answers()? {
        let reward = task.verify(q, &answer)?.value();
        let mut lps = Vec::with_capacity(answer.len());
        for (t, &tok) in answer.iter().enumerate() {
            lps.push(policy.token_logprob(q, &answer[..t], tok)?);
        }
        let mass: f64 = lps.iter().sum::<f64>().exp();
        rate += f64::from(reward) * mass;
        answers.push(answer);
        rewards.push(reward);
        weights.push(mass);
        old_token_logprobs.push(lps);
    }
    Ok(RolloutGroup {
        q,
        answers,
        rewards,
        r_hat: rate,
        old_token_logprobs,
        answer_weights: Some(weights),
    })
}

/// Retain exactly the groups with 0 < r_hat < 1, preserving order.
pub fn filter_groups(groups: Vec<RolloutGroup>) -> Vec<RolloutGroup> {
    groups.into_iter().filter(RolloutGroup::is_retained).collect()
}

/// Collect one group per question and drop degenerate ones. With
/// `refill = true`, resample dropped questions (fresh streams per attempt)
/// until the retained count stops improving or every question is retained.
pub fn collect_filtered_groups(
    snapshot: &FrozenSnapshot,
    task: &TaskSpec,
    questions: &[u32],
    k: usize,
    seed: u64,
    refill: bool,
) -> Result<Vec<RolloutGroup>> {
    let mut retained = Vec::new();
    let mut pending: Vec<u32> = questions.to_vec();
    let max_attempts = if refill { 8 } else { 1 };
    for attempt in 0..max_attempts {
        let mut still_pending = Vec::new();
        for &q in &pending {
            // mix the attempt counter into the seed so refills draw fresh streams
            let group = collect_group(snapshot, task, q, k, seed.wrapping_add(attempt * 0x9e37), )?;
            if group.is_retained() {
                retained.push(group);
            } else {
                still_pending.push(q);
            }
        }
        pending = still_pending;
        if pending.is_empty() {
            break;
        }
    }
    Ok(retained)
}

/// One answer of one retained group; the unit of mini-batch shuffling.
/// Tokens of an answer never straddle mini-batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchUnit {
    pub group: usize,
    pub answer: usize,
}

/// Shuffled training units partitioned into near-equal mini-batches.
#[derive(Debug, Clone)]
pub struct Batch {
    units: Vec<BatchUnit>,
    boundaries: Vec<usize>,
}

impl Batch {
    pub fn num_minibatches(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn minibatch(&self, index: usize) -> &[BatchUnit] {
        &self.units[self.boundaries[index]..self.boundaries[index + 1]]
    }

    pub fn units(&self) -> &[BatchUnit] {
        &self.units
    }
}

/// Shuffle all answer units and split them into `num_minibatches` parts
/// whose sizes differ by at most one unit.
pub fn build_batch(
    groups: &[RolloutGroup],
    num_minibatches: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Batch> {
    if num_minibatches == 0 {
        return Err(Error::InputContract("num_minibatches must be >= 1".into()));
    }
    let mut units = Vec::new();
    for (gi, group) in groups.iter().enumerate() {
        debug_assert!(group.is_retained(), "build_batch expects filtered groups");
        for ai in 0..group.num_answers() {
            units.push(BatchUnit {
                group: gi,
                answer: ai,
            });
        }
    }
    if units.len() < num_minibatches {
        return Err(Error::DegeneratePartition(format!(
            "{} answer units cannot fill {} mini-batches",
            units.len(),
            num_minibatches
        )));
    }
    units.shuffle(rng);
    let base = units.len() / num_minibatches;
    let extra = units.len() % num_minibatches;
    let mut boundaries = Vec::with_capacity(num_minibatches + 1);
    boundaries.push(0);
    let mut pos = 0;
    for b in 0..num_minibatches {
        pos += base + usize::from(b < extra);
        boundaries.push(pos);
    }
    Ok(Batch { units, boundaries })
}

/// Line-delimited rollout dump, one record per answer.
pub fn dump_records(groups: &[RolloutGroup], iteration: u64) -> String {
    let mut out = String::new();
    for group in groups {
        for k in 0..group.num_answers() {
            let tokens = group.answers[k]
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let old_lp: f64 = group.old_token_logprobs[k].iter().sum();
            let _ = writeln!(
                out,
                "iter={iteration} q={} k={k} answer={tokens} reward={} r_hat={} old_logprob={old_lp}",
                group.q, group.rewards[k], group.r_hat
            );
        }
    }
    out
}

//! Brute-force ground truth: exact Bayes target policies, the policy
//! split identity, divergence metrics, finite-difference gradients, the
//! on-policy equivalence checker, and exact-expectation convergence runs.

use crate::objectives::{minibatch_loss_and_grad, LossNorm, ObjectiveConfig};
use crate::policy::{GradBuffer, TabularPolicy};
use crate::rollout::{BatchUnit, RolloutGroup};
use crate::taskenv::TaskSpec;
use crate::{Error, Result};
use std::fmt;

/// Exact per-question distribution over all enumerated answers
/// (lexicographic order), plus the exact correctness rate it was built from.
#[derive(Debug, Clone)]
pub struct TargetDistribution {
    pub probs: Vec<f64>,
    pub r_exact: f64,
}

fn bayes_restricted(
    policy: &TabularPolicy,
    task: &TaskSpec,
    q: u32,
    keep_correct: bool,
) -> Result<TargetDistribution> {
    let rate = task.correctness_rate_exact(q, policy)?;
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::DegenerateQuestion { question: q, rate });
    }
    let mass = if keep_correct { rate } else { 1.0 - rate };
    let mut probs = Vec::new();
    for answer in task.enumerate_answers()? {
        let correct = task.verify(q, &answer)?.is_correct();
        if correct == keep_correct {
            probs.push(policy.seq_logprob(q, &answer)?.exp() / mass);
        } else {
            probs.push(0.0);
        }
    }
    Ok(TargetDistribution {
        probs,
        r_exact: rate,
    })
}

/// The Bayes-restricted positive policy: the generation policy conditioned
/// on producing a correct answer, renormalized by the exact rate.
pub fn bayes_positive(policy: &TabularPolicy, task: &TaskSpec, q: u32) -> Result<TargetDistribution> {
    bayes_restricted(policy, task, q, true)
}

/// Mirror of [`bayes_positive`] on the incorrect answer set.
pub fn bayes_negative(policy: &TabularPolicy, task: &TaskSpec, q: u32) -> Result<TargetDistribution> {
    bayes_restricted(policy, task, q, false)
}

/// Max over answers of |r_q pi+ + (1 - r_q) pi- - pi|; the exact mixture
/// decomposition should hold to floating-point roundoff.
pub fn split_identity_residual(policy: &TabularPolicy, task: &TaskSpec, q: u32) -> Result<f64> {
    let pos = bayes_positive(policy, task, q)?;
    let neg = bayes_negative(policy, task, q)?;
    let r = pos.r_exact;
    let mut residual = 0.0f64;
    for (i, answer) in task.enumerate_answers()?.enumerate() {
        let p = policy.seq_logprob(q, &answer)?.exp();
        let mix = r * pos.probs[i] + (1.0 - r) * neg.probs[i];
        residual = residual.max((mix - p).abs());
    }
    Ok(residual)
}

/// KL(p || policy) in nats over the enumerated answer space.
pub fn kl_divergence(p: &TargetDistribution, policy: &TabularPolicy, task: &TaskSpec, q: u32) -> Result<f64> {
    let mut kl = 0.0;
    for (i, answer) in task.enumerate_answers()?.enumerate() {
        let mass = p.probs[i];
        if mass > 0.0 {
            kl += mass * (mass.ln() - policy.seq_logprob(q, &answer)?);
        }
    }
    Ok(kl)
}

/// Central finite differences of a scalar loss over every logit entry.
pub fn fd_gradient<F>(loss: F, policy: &TabularPolicy, h: f64) -> Result<GradBuffer>
where
    F: Fn(&TabularPolicy) -> Result<f64>,
{
    let mut grad = GradBuffer::zeros_like(policy);
    let mut probe = policy.clone();
    for i in 0..policy.logits().len() {
        let original = probe.logits()[i];
        probe.logits_mut()[i] = original + h;
        let plus = loss(&probe)?;
        probe.logits_mut()[i] = original - h;
        let minus = loss(&probe)?;
        probe.logits_mut()[i] = original;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Largest relative deviation between an analytic gradient buffer and its
/// finite-difference counterpart.
pub fn max_relative_error(analytic: &GradBuffer, fd: &GradBuffer) -> f64 {
    let scale = analytic.max_abs().max(fd.max_abs()).max(1e-8);
    analytic
        .data()
        .iter()
        .zip(fd.data())
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

/// Build gradients for two objective configs on the same on-policy batch
/// (SUM normalization) and return the infinity norm of their difference.
///
/// The batch must be strictly on-policy: every cached old likelihood must
/// match the current policy bit-for-bit up to 1e-12.
pub fn onpolicy_equivalence_report(
    units: &[BatchUnit],
    groups: &[RolloutGroup],
    policy: &TabularPolicy,
    cfg_a: &ObjectiveConfig,
    cfg_b: &ObjectiveConfig,
) -> Result<f64> {
    for unit in units {
        let group = &groups[unit.group];
        let answer = &group.answers[unit.answer];
        for (t, &tok) in answer.iter().enumerate() {
            let current = policy.token_logprob(group.q, &answer[..t], tok)?;
            let cached = group.old_token_logprobs[unit.answer][t];
            if ((current - cached).exp() - 1.0).abs() > 1e-12 {
                return Err(Error::InputContract(
                    "equivalence check requires an on-policy batch (ratio != 1)".into(),
                ));
            }
        }
    }
    let mut a = cfg_a.clone();
    a.loss_norm = LossNorm::Sum;
    let mut b = cfg_b.clone();
    b.loss_norm = LossNorm::Sum;
    let ga = minibatch_loss_and_grad(units, groups, policy, &a)?.grad;
    let gb = minibatch_loss_and_grad(units, groups, policy, &b)?.grad;
    Ok(ga.max_abs_diff(&gb))
}

/// One named verification outcome, printable as a structured record.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub max_abs_diff: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, max_abs_diff: f64, threshold: f64) -> Self {
        let pass = max_abs_diff < threshold;
        CheckReport {
            name: name.into(),
            max_abs_diff,
            threshold,
            pass,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} max_abs_diff={:e} threshold={:e} pass={}",
            self.name, self.max_abs_diff, self.threshold, self.pass
        )
    }
}

/// Outcome of an exact-expectation convergence run.
#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    /// Max-over-questions KL(pi+ || pi_theta) recorded every step.
    pub kl_series: Vec<f64>,
    /// First step index at which the KL dropped below the target.
    pub steps_to_target: Option<usize>,
}

/// Per-question state for the exact-expectation convergence run: every
/// answer enumerated with its frozen data-policy probability, reward, and
/// the fixed Bayes-positive target.
struct ConvergenceQuestion {
    old: Vec<f64>,
    rewards: Vec<u8>,
    rate: f64,
    target: Vec<f64>,
    current: Vec<f64>,
}

/// Minimize the exact-expectation implicit-negative objective against a
/// frozen data policy and track KL(pi+ || pi_theta) to that policy's
/// fixed Bayes-positive target, recorded once per step.
///
/// With `negative_only` the loss is the sequence-level negative branch
/// weighted by enumerated negative-policy mass (the pure
/// learn-from-mistakes objective); otherwise both branches of the
/// sequence-level objective, weighted by generation-policy mass.
///
/// Steps are exponentiated-gradient (mirror-descent) updates on the
/// enumerated per-question answer distribution: steepest descent in the
/// KL geometry that the theorem's unlimited-capacity premise describes.
/// Plain logit-space descent cannot work here: with a deterministic
/// binary verifier the negative-only loss never references correct
/// answers, so any policy supported on them is optimal, and the softmax
/// flow drifts their relative proportions away from the Bayes target.
/// The multiplicative update leaves unreferenced answers' proportions
/// exactly invariant, so the data-policy initialization converges to the
/// unique target the theorem names.
pub fn exact_expectation_convergence(
    task: &TaskSpec,
    initial: &TabularPolicy,
    negative_only: bool,
    learning_rate: f64,
    max_steps: usize,
    target_kl: f64,
) -> Result<ConvergenceRun> {
    let mut questions = Vec::new();
    for &q in task.questions() {
        let rate = task.correctness_rate_exact(q, initial)?;
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::DegenerateQuestion { question: q, rate });
        }
        let mut old = Vec::new();
        let mut rewards = Vec::new();
        for answer in task.enumerate_answers()? {
            old.push(initial.seq_logprob(q, &answer)?.exp());
            rewards.push(task.verify(q, &answer)?.value());
        }
        let target: Vec<f64> = old
            .iter()
            .zip(&rewards)
            .map(|(&p, &r)| if r == 1 { p / rate } else { 0.0 })
            .collect();
        questions.push(ConvergenceQuestion {
            current: old.clone(),
            old,
            rewards,
            rate,
            target,
        });
    }
    let mut kl_series = Vec::new();
    let mut steps_to_target = None;
    for step in 0..max_steps {
        let mut kl_max = 0.0f64;
        for cq in &mut questions {
            // answer-space gradient of the sequence-level loss
            let mut log_next: Vec<f64> = cq
                .current
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let grad = if cq.rewards[k] == 1 {
                        if negative_only {
                            0.0
                        } else {
                            -cq.old[k] / p
                        }
                    } else {
                        let weight = if negative_only {
                            cq.old[k] / (1.0 - cq.rate)
                        } else {
                            cq.old[k]
                        };
                        // d/dp of -log((old - rate*p) / ((1-rate)*old));
                        // the denominator stays positive along the flow
                        // (negative answers only ever shrink)
                        weight * cq.rate / (cq.old[k] - cq.rate * p).max(f64::MIN_POSITIVE)
                    };
                    p.ln() - learning_rate * grad
                })
                .collect();
            let top = log_next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let norm: f64 = log_next.iter().map(|l| (l - top).exp()).sum();
            for (p, l) in cq.current.iter_mut().zip(&mut log_next) {
                *p = (*l - top).exp() / norm;
            }
            let kl: f64 = cq
                .target
                .iter()
                .zip(&cq.current)
                .filter(|(&t, _)| t > 0.0)
                .map(|(&t, &p)| t * (t / p).ln())
                .sum();
            kl_max = kl_max.max(kl);
        }
        kl_series.push(kl_max);
        if kl_max < target_kl {
            steps_to_target = Some(step + 1);
            break;
        }
    }
    Ok(ConvergenceRun {
        kl_series,
        steps_to_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskenv::{VerifierRule, VocabSpec};

    fn modsum_task(v: u32, l: u32, targets: Vec<u32>) -> TaskSpec {
        let n = targets.len() as u32;
        TaskSpec::new(
            VocabSpec::new(v).unwrap(),
            (0..n).collect(),
            l,
            VerifierRule::ModSum { targets },
        )
        .unwrap()
    }

    fn exact_task(v: u32, golden: Vec<Vec<u32>>) -> TaskSpec {
        let l = golden[0].len() as u32;
        let n = golden.len() as u32;
        TaskSpec::new(
            VocabSpec::new(v).unwrap(),
            (0..n).collect(),
            l,
            VerifierRule::Exact { golden },
        )
        .unwrap()
    }

    #[test]
    fn bayes_positive_uniform_single_correct() {
        // uniform over 4 answers, 1 correct: point mass on the golden answer
        let task = exact_task(2, vec![vec![1, 0]]);
        let policy = TabularPolicy::uniform(&task);
        let pos = bayes_positive(&policy, &task, 0).unwrap();
        // lexicographic order: 00, 01, 10, 11; golden = 10 at index 2
        assert_eq!(pos.probs.len(), 4);
        assert!((pos.probs[2] - 1.0).abs() < 1e-12);
        assert_eq!(pos.probs[0], 0.0);
        assert!((pos.r_exact - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bayes_positive_uniform_two_correct() {
        // MODSUM V=2, L=2, target 1: {01, 10} correct, uniform over the two
        let task = modsum_task(2, 2, vec![1]);
        let policy = TabularPolicy::uniform(&task);
        let pos = bayes_positive(&policy, &task, 0).unwrap();
        assert!((pos.probs[1] - 0.5).abs() < 1e-12);
        assert!((pos.probs[2] - 0.5).abs() < 1e-12);
        assert_eq!(pos.probs[0], 0.0);
        assert_eq!(pos.probs[3], 0.0);
    }

    #[test]
    fn bayes_negative_support_and_uniform_case() {
        let task = exact_task(2, vec![vec![1, 0]]);
        let policy = TabularPolicy::uniform(&task);
        let neg = bayes_negative(&policy, &task, 0).unwrap();
        assert_eq!(neg.probs[2], 0.0); // correct answer excluded
        for i in [0, 1, 3] {
            assert!((neg.probs[i] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_positive_nonuniform_independent_normalization() {
        let task = modsum_task(3, 2, vec![2]);
        let policy = TabularPolicy::random_dirichlet(&task, 17);
        let pos = bayes_positive(&policy, &task, 0).unwrap();
        // independent pass: renormalize the restriction from scratch
        let mut raw = Vec::new();
        for a in task.enumerate_answers().unwrap() {
            let mass = if task.verify(0, &a).unwrap().is_correct() {
                policy.seq_logprob(0, &a).unwrap().exp()
            } else {
                0.0
            };
            raw.push(mass);
        }
        let total: f64 = raw.iter().sum();
        for (p, r) in pos.probs.iter().zip(&raw) {
            assert!((p - r / total).abs() < 1e-12);
        }
        assert!((pos.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_identity_uniform_counting_case() {
        let task = exact_task(2, vec![vec![0, 1]]);
        let policy = TabularPolicy::uniform(&task);
        let residual = split_identity_residual(&policy, &task, 0).unwrap();
        assert!(residual < 1e-15);
    }

    #[test]
    fn split_identity_random_policies() {
        for seed in 0..5 {
            let task = modsum_task(3, 3, vec![seed as u32 % 3, (seed as u32 + 1) % 3]);
            let policy = TabularPolicy::random_dirichlet(&task, 100 + seed);
            for &q in task.questions() {
                let residual = split_identity_residual(&policy, &task, q).unwrap();
                assert!(residual < 1e-12, "residual {residual} at seed {seed} q {q}");
            }
        }
    }

    #[test]
    fn split_identity_rejects_degenerate() {
        let task = exact_task(2, vec![vec![1, 1]]);
        let mut policy = TabularPolicy::uniform(&task);
        policy.nudge_towards(0, &[1, 1], 80.0).unwrap();
        assert!(matches!(
            split_identity_residual(&policy, &task, 0),
            Err(Error::DegenerateQuestion { .. })
        ));
    }

    #[test]
    fn kl_self_is_zero() {
        let task = modsum_task(2, 2, vec![1]);
        let policy = TabularPolicy::random_dirichlet(&task, 23);
        let own = TargetDistribution {
            probs: task
                .enumerate_answers()
                .unwrap()
                .map(|a| policy.seq_logprob(0, &a).unwrap().exp())
                .collect(),
            r_exact: 0.5,
        };
        let kl = kl_divergence(&own, &policy, &task, 0).unwrap();
        assert!(kl.abs() < 1e-10);
    }

    #[test]
    fn kl_point_mass_vs_uniform() {
        let task = modsum_task(2, 2, vec![1]);
        let policy = TabularPolicy::uniform(&task);
        let point = TargetDistribution {
            probs: vec![0.0, 1.0, 0.0, 0.0],
            r_exact: 0.5,
        };
        let kl = kl_divergence(&point, &policy, &task, 0).unwrap();
        assert!((kl - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_nonnegative_random_pairs() {
        let task = modsum_task(3, 2, vec![0]);
        for seed in 0..100 {
            let p_policy = TabularPolicy::random_dirichlet(&task, 2 * seed);
            let q_policy = TabularPolicy::random_dirichlet(&task, 2 * seed + 1);
            let p = TargetDistribution {
                probs: task
                    .enumerate_answers()
                    .unwrap()
                    .map(|a| p_policy.seq_logprob(0, &a).unwrap().exp())
                    .collect(),
                r_exact: 0.5,
            };
            let kl = kl_divergence(&p, &q_policy, &task, 0).unwrap();
            assert!(kl > -1e-12, "negative KL {kl} at seed {seed}");
        }
    }

    #[test]
    fn fd_gradient_quadratic_closure() {
        let task = modsum_task(2, 2, vec![1]);
        let policy = TabularPolicy::random_gaussian(&task, 3, 0.5);
        let grad = fd_gradient(
            |p| Ok(p.logits().iter().map(|x| x * x).sum()),
            &policy,
            1e-5,
        )
        .unwrap();
        for (g, x) in grad.data().iter().zip(policy.logits()) {
            assert!((g - 2.0 * x).abs() < 1e-8);
        }
    }

    #[test]
    fn fd_gradient_constant_entry_zero() {
        let task = modsum_task(2, 2, vec![1]);
        let policy = TabularPolicy::uniform(&task);
        // loss ignores everything: every entry must be ~0
        let grad = fd_gradient(|_| Ok(42.0), &policy, 1e-5).unwrap();
        assert!(grad.max_abs() < 1e-8);
    }
}

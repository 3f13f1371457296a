//! The objective zoo: per-token losses and analytic gradients for NFT,
//! RFT, GRPO, Dr. GRPO, importance-sampled policy gradient, and InfoNCA,
//! plus the shared primitives (likelihood ratio, implicit negative ratio,
//! straight-through clamp, prompt weighting, normalized advantage).
//!
//! Gradient bookkeeping convention: every per-token report carries the
//! coefficient `g` multiplying the ratio gradient, so the loss gradient is
//! `-sum g * grad(R)`. Accumulation into a logit-shaped buffer converts
//! via `grad(R) = R * grad(log pi)` and stores the gradient of the loss
//! itself (descent direction is minus the buffer).

use crate::policy::{GradBuffer, TabularPolicy};
use crate::rollout::{BatchUnit, RolloutGroup};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Nft,
    Rft,
    Grpo,
    DrGrpo,
    Pg,
    InfoNca,
}

impl ObjectiveKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NFT" => Ok(ObjectiveKind::Nft),
            "RFT" => Ok(ObjectiveKind::Rft),
            "GRPO" => Ok(ObjectiveKind::Grpo),
            "DRGRPO" | "DR_GRPO" | "DR.GRPO" => Ok(ObjectiveKind::DrGrpo),
            "PG" => Ok(ObjectiveKind::Pg),
            "INFONCA" => Ok(ObjectiveKind::InfoNca),
            _ => Err(Error::config(format!("unknown objective kind {s:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Nft => "NFT",
            ObjectiveKind::Rft => "RFT",
            ObjectiveKind::Grpo => "GRPO",
            ObjectiveKind::DrGrpo => "DRGRPO",
            ObjectiveKind::Pg => "PG",
            ObjectiveKind::InfoNca => "INFONCA",
        }
    }
}

/// Per-question loss multiplier emphasizing hard questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaKind {
    Const,
    OneMinusR,
    SqrtRatio,
}

impl OmegaKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CONST" => Ok(OmegaKind::Const),
            "ONE_MINUS_R" => Ok(OmegaKind::OneMinusR),
            "SQRT_RATIO" => Ok(OmegaKind::SqrtRatio),
            _ => Err(Error::config(format!("unknown omega kind {s:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OmegaKind::Const => "CONST",
            OmegaKind::OneMinusR => "ONE_MINUS_R",
            OmegaKind::SqrtRatio => "SQRT_RATIO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossNorm {
    /// Divide the mini-batch loss and gradient by the token count.
    TokenMean,
    /// Raw sum; normalization-free, used by the equivalence checks.
    Sum,
}

impl LossNorm {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TOKEN_MEAN" => Ok(LossNorm::TokenMean),
            "SUM" => Ok(LossNorm::Sum),
            _ => Err(Error::config(format!("unknown loss norm {s:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossNorm::TokenMean => "TOKEN_MEAN",
            LossNorm::Sum => "SUM",
        }
    }
}

/// Objective family selector and its knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    /// Floor for the implicit negative ratio (straight-through clamp).
    pub epsilon: f64,
    /// GRPO clip range: low side 1 - eps_clip_low, high side 1 + eps_clip_high.
    pub eps_clip_low: f64,
    pub eps_clip_high: f64,
    pub omega_kind: OmegaKind,
    /// InfoNCA temperature.
    pub beta: f64,
    /// Sequence-level loss (one term per answer) instead of token-level.
    pub theory_mode: bool,
    pub loss_norm: LossNorm,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            kind: ObjectiveKind::Nft,
            epsilon: 1.0,
            eps_clip_low: 0.2,
            eps_clip_high: 0.28,
            omega_kind: OmegaKind::SqrtRatio,
            beta: 0.1,
            theory_mode: false,
            loss_norm: LossNorm::TokenMean,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon must be > 0"));
        }
        if !(self.eps_clip_low > 0.0 && self.eps_clip_low < 1.0) {
            return Err(Error::config("eps_clip_low must lie in (0, 1)"));
        }
        if !(self.eps_clip_high > 0.0) {
            return Err(Error::config("eps_clip_high must be > 0"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::config("beta must be > 0"));
        }
        Ok(())
    }

    pub fn with_kind(mut self, kind: ObjectiveKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Per-token decomposition of an objective's gradient: the coefficient `g`
/// multiplying the ratio gradient, the ratio itself, and the loss term.
#[derive(Debug, Clone, Copy)]
pub struct TokenGradReport {
    pub coeff: f64,
    pub ratio: f64,
    pub loss: f64,
}

/// exp(new - old): current over rollout-time token likelihood.
pub fn likelihood_ratio(new_logprob: f64, old_logprob: f64) -> f64 {
    (new_logprob - old_logprob).exp()
}

/// (1 - r_hat * R) / (1 - r_hat), the implicit negative likelihood ratio.
/// May be <= 0; callers clamp via [`max_v`].
pub fn implicit_negative_ratio(ratio: f64, r_hat: f64) -> Result<f64> {
    check_rate(r_hat)?;
    Ok((1.0 - r_hat * ratio) / (1.0 - r_hat))
}

/// Straight-through floor: the value is `max(x, eps)` but downstream
/// gradients treat d(value)/dx = 1 regardless of the branch. Returns the
/// value and whether the clamp engaged.
pub fn max_v(x: f64, eps: f64) -> (f64, bool) {
    if x < eps {
        (eps, true)
    } else {
        (x, false)
    }
}

fn check_rate(r_hat: f64) -> Result<()> {
    if r_hat > 0.0 && r_hat < 1.0 {
        Ok(())
    } else {
        Err(Error::InputContract(format!(
            "correctness rate {r_hat} outside (0, 1); group should have been filtered"
        )))
    }
}

/// Prompt weight for a question with Monte-Carlo correctness rate `r_hat`.
pub fn omega(kind: OmegaKind, r_hat: f64) -> Result<f64> {
    check_rate(r_hat)?;
    Ok(match kind {
        OmegaKind::Const => 1.0,
        OmegaKind::OneMinusR => 1.0 - r_hat,
        OmegaKind::SqrtRatio => ((1.0 - r_hat) / r_hat).sqrt(),
    })
}

/// Group-normalized advantages: reward centered by the group mean and,
/// with `use_std`, scaled by the population standard deviation.
pub fn normalized_advantage(rewards: &[u8], use_std: bool) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::InputContract("empty reward group".into()));
    }
    let k = rewards.len() as f64;
    let mean = rewards.iter().map(|&r| f64::from(r)).sum::<f64>() / k;
    if use_std {
        let var = rewards
            .iter()
            .map(|&r| (f64::from(r) - mean).powi(2))
            .sum::<f64>()
            / k;
        let std = var.sqrt();
        if std == 0.0 {
            return Err(Error::UndefinedAdvantage {
                count: rewards.len(),
                value: rewards[0],
            });
        }
        Ok(rewards
            .iter()
            .map(|&r| (f64::from(r) - mean) / std)
            .collect())
    } else {
        Ok(rewards.iter().map(|&r| f64::from(r) - mean).collect())
    }
}

/// Closed-form binary advantages: A+ = sqrt((1-r)/r), A- = -sqrt(r/(1-r)).
pub fn binary_advantage(correct: bool, r_hat: f64, use_std: bool) -> Result<f64> {
    check_rate(r_hat)?;
    Ok(if use_std {
        if correct {
            ((1.0 - r_hat) / r_hat).sqrt()
        } else {
            -(r_hat / (1.0 - r_hat)).sqrt()
        }
    } else if correct {
        1.0 - r_hat
    } else {
        -r_hat
    })
}

/// NFT per-token loss and gradient weight.
///
/// Positive answers contribute `-omega * log R`; negative answers
/// contribute `-omega * log max_v((1 - r_hat R)/(1 - r_hat), eps)` with a
/// straight-through clamp, so the reported coefficient stays live even
/// where the clamp flattens the loss value.
pub fn nft_token_grad(
    correct: bool,
    ratio: f64,
    r_hat: f64,
    cfg: &ObjectiveConfig,
) -> Result<TokenGradReport> {
    if !(ratio > 0.0) {
        return Err(Error::InputContract(format!(
            "likelihood ratio must be positive, got {ratio}"
        )));
    }
    let w = omega(cfg.omega_kind, r_hat)?;
    if correct {
        Ok(TokenGradReport {
            coeff: w / ratio,
            ratio,
            loss: -w * ratio.ln(),
        })
    } else {
        let inner = implicit_negative_ratio(ratio, r_hat)?;
        let (value, _) = max_v(inner, cfg.epsilon);
        Ok(TokenGradReport {
            coeff: -w * r_hat / ((1.0 - r_hat) * value),
            ratio,
            loss: -w * value.ln(),
        })
    }
}

/// GRPO per-token gradient weight in the indicator closed form, with the
/// min/clip surrogate loss as the loss value. `use_std = false` is the
/// Dr. GRPO variant (mean-only advantage).
pub fn grpo_token_grad(
    correct: bool,
    ratio: f64,
    r_hat: f64,
    cfg: &ObjectiveConfig,
    use_std: bool,
) -> Result<TokenGradReport> {
    let advantage = binary_advantage(correct, r_hat, use_std)?;
    let (loss, _) = grpo_surrogate(ratio, advantage, cfg);
    let coeff = if advantage > 0.0 {
        if ratio < 1.0 + cfg.eps_clip_high {
            advantage
        } else {
            0.0
        }
    } else if ratio > 1.0 - cfg.eps_clip_low {
        advantage
    } else {
        0.0
    };
    Ok(TokenGradReport { coeff, ratio, loss })
}

/// The generic min/clip surrogate: loss value and its derivative with
/// respect to the ratio, computed by differentiating the active branch of
/// the min. Kept as an independent route for consistency checks against
/// the indicator form above.
pub fn grpo_surrogate(ratio: f64, advantage: f64, cfg: &ObjectiveConfig) -> (f64, f64) {
    let lo = 1.0 - cfg.eps_clip_low;
    let hi = 1.0 + cfg.eps_clip_high;
    let clipped = ratio.clamp(lo, hi);
    let unclipped_term = ratio * advantage;
    let clipped_term = clipped * advantage;
    if unclipped_term <= clipped_term {
        (-unclipped_term, -advantage)
    } else {
        let d_clip = if ratio > lo && ratio < hi { advantage } else { 0.0 };
        (-clipped_term, -d_clip)
    }
}

/// RFT: NFT's positive branch with constant prompt weight; negative
/// answers contribute nothing.
pub fn rft_token_grad(correct: bool, ratio: f64) -> Result<TokenGradReport> {
    if correct {
        if !(ratio > 0.0) {
            return Err(Error::InputContract(format!(
                "likelihood ratio must be positive, got {ratio}"
            )));
        }
        Ok(TokenGradReport {
            coeff: 1.0 / ratio,
            ratio,
            loss: -ratio.ln(),
        })
    } else {
        Ok(TokenGradReport {
            coeff: 0.0,
            ratio,
            loss: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgMode {
    /// Reward-weighted log-likelihood gradient; coefficient on grad(log pi).
    OnPolicy,
    /// Importance-sampled form; coefficient on grad(R), loss -r * R.
    ImportanceSampled,
}

/// REINFORCE / importance-sampled policy gradient weight.
pub fn pg_token_grad(correct: bool, ratio: f64, mode: PgMode) -> TokenGradReport {
    let r = f64::from(u8::from(correct));
    match mode {
        PgMode::OnPolicy => TokenGradReport {
            coeff: r, // on grad(log pi), not grad(R)
            ratio,
            loss: -r * ratio.ln(),
        },
        PgMode::ImportanceSampled => TokenGradReport {
            coeff: r,
            ratio,
            loss: -r * ratio,
        },
    }
}

/// Sequence-level loss (one term per answer, ratio = product over tokens).
/// Returns the loss term and its derivative with respect to the sequence
/// ratio (straight-through on the clamp).
pub fn theory_loss_seq(
    correct: bool,
    seq_ratio: f64,
    r_hat: f64,
    cfg: &ObjectiveConfig,
) -> Result<(f64, f64)> {
    let w = omega(cfg.omega_kind, r_hat)?;
    if correct {
        Ok((-w * seq_ratio.ln(), -w / seq_ratio))
    } else {
        let inner = implicit_negative_ratio(seq_ratio, r_hat)?;
        let (value, _) = max_v(inner, cfg.epsilon);
        let dldr = w * r_hat / ((1.0 - r_hat) * value);
        Ok((-w * value.ln(), dldr))
    }
}

/// InfoNCA group loss: cross-entropy between the reward-normalized target
/// and a softmax over temperature-scaled sequence log-ratios. Returns the
/// loss and per-answer derivatives with respect to the log-ratios.
pub fn infonca_loss(rewards: &[u8], seq_log_ratios: &[f64], beta: f64) -> Result<(f64, Vec<f64>)> {
    if rewards.len() != seq_log_ratios.len() || rewards.is_empty() {
        return Err(Error::InputContract(
            "rewards and log-ratios must be equal-length and nonempty".into(),
        ));
    }
    let reward_sum: f64 = rewards.iter().map(|&r| f64::from(r)).sum();
    if reward_sum == 0.0 {
        return Err(Error::InputContract(
            "InfoNCA target undefined for all-zero rewards".into(),
        ));
    }
    let scaled: Vec<f64> = seq_log_ratios.iter().map(|&x| beta * x).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scaled.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(rewards.len());
    for (k, &r) in rewards.iter().enumerate() {
        let target = f64::from(r) / reward_sum;
        let log_softmax = scaled[k] - lse;
        loss -= target * log_softmax;
        grads.push(beta * (log_softmax.exp() - target));
    }
    Ok((loss, grads))
}

/// Result of one mini-batch pass: scalar loss, the gradient of that loss
/// over the policy's logits, per-token reports, and the token count used
/// for normalization.
#[derive(Debug)]
pub struct MinibatchResult {
    pub loss: f64,
    pub grad: GradBuffer,
    pub reports: Vec<TokenGradReport>,
    pub token_count: usize,
}

/// Compute the configured objective's loss and analytic gradient over one
/// mini-batch of answer units.
///
/// The gradient buffer holds d(loss)/d(logit); optimizers descend it. For
/// token-level objectives each token contributes `dldr * R * grad(log pi)`
/// with `dldr = -g`; sequence-level objectives distribute their per-answer
/// derivative across the answer's tokens.
pub fn minibatch_loss_and_grad(
    units: &[BatchUnit],
    groups: &[RolloutGroup],
    policy: &TabularPolicy,
    cfg: &ObjectiveConfig,
) -> Result<MinibatchResult> {
    if units.is_empty() {
        return Err(Error::DegeneratePartition("empty mini-batch".into()));
    }
    cfg.validate()?;
    let mut grad = GradBuffer::zeros_like(policy);
    let mut reports = Vec::new();
    let mut loss = 0.0;
    let mut token_count = 0usize;

    match cfg.kind {
        ObjectiveKind::InfoNca => {
            // sequence-level, group-coupled: each group referenced by the
            // mini-batch contributes its full K-answer softmax once
            let mut group_ids: Vec<usize> = units.iter().map(|u| u.group).collect();
            group_ids.sort_unstable();
            group_ids.dedup();
            for gi in group_ids {
                let group = &groups[gi];
                let mut log_ratios = Vec::with_capacity(group.num_answers());
                for k in 0..group.num_answers() {
                    log_ratios.push(seq_log_ratio(policy, group, k)?);
                }
                let (group_loss, dl_dlogratio) =
                    infonca_loss(&group.rewards, &log_ratios, cfg.beta)?;
                loss += group_loss;
                for (k, &coeff) in dl_dlogratio.iter().enumerate() {
                    let answer = &group.answers[k];
                    for (t, &tok) in answer.iter().enumerate() {
                        // d log-ratio / d token-logprob = 1
                        policy.accumulate_logprob_grad(group.q, &answer[..t], tok, coeff, &mut grad)?;
                        token_count += 1;
                    }
                    reports.push(TokenGradReport {
                        coeff: -coeff,
                        ratio: log_ratios[k].exp(),
                        loss: group_loss,
                    });
                }
            }
        }
        _ if cfg.theory_mode => {
            for unit in units {
                let group = &groups[unit.group];
                let answer = &group.answers[unit.answer];
                let correct = group.rewards[unit.answer] == 1;
                let weight = group.weight(unit.answer);
                let seq_ratio = seq_log_ratio(policy, group, unit.answer)?.exp();
                let (term, dldr) = match cfg.kind {
                    ObjectiveKind::Nft => theory_loss_seq(correct, seq_ratio, group.r_hat, cfg)?,
                    other => {
                        return Err(Error::InputContract(format!(
                            "theory_mode is defined for NFT only, not {}",
                            other.name()
                        )))
                    }
                };
                loss += weight * term;
                for (t, &tok) in answer.iter().enumerate() {
                    policy.accumulate_logprob_grad(
                        group.q,
                        &answer[..t],
                        tok,
                        weight * dldr * seq_ratio,
                        &mut grad,
                    )?;
                    token_count += 1;
                }
                reports.push(TokenGradReport {
                    coeff: -dldr,
                    ratio: seq_ratio,
                    loss: term,
                });
            }
        }
        _ => {
            for unit in units {
                let group = &groups[unit.group];
                let answer = &group.answers[unit.answer];
                let correct = group.rewards[unit.answer] == 1;
                let weight = group.weight(unit.answer);
                for (t, &tok) in answer.iter().enumerate() {
                    let new_lp = policy.token_logprob(group.q, &answer[..t], tok)?;
                    let old_lp = group.old_token_logprobs[unit.answer][t];
                    let ratio = likelihood_ratio(new_lp, old_lp);
                    let report = match cfg.kind {
                        ObjectiveKind::Nft => nft_token_grad(correct, ratio, group.r_hat, cfg)?,
                        ObjectiveKind::Rft => rft_token_grad(correct, ratio)?,
                        ObjectiveKind::Grpo => {
                            grpo_token_grad(correct, ratio, group.r_hat, cfg, true)?
                        }
                        ObjectiveKind::DrGrpo => {
                            grpo_token_grad(correct, ratio, group.r_hat, cfg, false)?
                        }
                        ObjectiveKind::Pg => {
                            pg_token_grad(correct, ratio, PgMode::ImportanceSampled)
                        }
                        ObjectiveKind::InfoNca => unreachable!(),
                    };
                    loss += weight * report.loss;
                    // dloss/d(logprob) = dldr * R with dldr = -coeff
                    policy.accumulate_logprob_grad(
                        group.q,
                        &answer[..t],
                        tok,
                        weight * (-report.coeff) * ratio,
                        &mut grad,
                    )?;
                    token_count += 1;
                    reports.push(report);
                }
            }
        }
    }

    if cfg.loss_norm == LossNorm::TokenMean && token_count > 0 {
        let inv = 1.0 / token_count as f64;
        loss *= inv;
        grad.scale(inv);
    }
    Ok(MinibatchResult {
        loss,
        grad,
        reports,
        token_count,
    })
}

fn seq_log_ratio(policy: &TabularPolicy, group: &RolloutGroup, answer: usize) -> Result<f64> {
    let tokens = &group.answers[answer];
    let mut total = 0.0;
    for (t, &tok) in tokens.iter().enumerate() {
        let new_lp = policy.token_logprob(group.q, &tokens[..t], tok)?;
        total += new_lp - group.old_token_logprobs[answer][t];
    }
    Ok(total)
}

//! Tabular autoregressive softmax policies.
//!
//! A policy stores one logit row of width V for every (question, prefix)
//! context, where prefixes range over all token strings of length 0..L-1.
//! Conditionals are exact log-softmax values, sampling is ancestral, and
//! the gradient of a token log-likelihood with respect to its context row
//! is the analytic `onehot - softmax`.

use crate::rng::stream_rng;
use crate::taskenv::{TaskSpec, Token, ORACLE_CAP};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Index space shared by a policy's logit table and its gradient buffers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableShape {
    questions: Vec<u32>,
    vocab_size: u32,
    answer_len: u32,
    contexts_per_question: usize,
}

impl TableShape {
    pub fn for_task(task: &TaskSpec) -> Self {
        let v = task.vocab_size() as usize;
        // sum_{t=0}^{L-1} V^t contexts per question
        let mut contexts = 0usize;
        let mut level = 1usize;
        for _ in 0..task.answer_len() {
            contexts += level;
            level *= v;
        }
        TableShape {
            questions: task.questions().to_vec(),
            vocab_size: task.vocab_size(),
            answer_len: task.answer_len(),
            contexts_per_question: contexts,
        }
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn answer_len(&self) -> u32 {
        self.answer_len
    }

    pub fn questions(&self) -> &[u32] {
        &self.questions
    }

    pub fn contexts_per_question(&self) -> usize {
        self.contexts_per_question
    }

    pub fn total_len(&self) -> usize {
        self.questions.len() * self.contexts_per_question * self.vocab_size as usize
    }

    pub fn question_index(&self, q: u32) -> Result<usize> {
        self.questions
            .iter()
            .position(|&id| id == q)
            .ok_or_else(|| Error::InputContract(format!("unknown question id {q}")))
    }

    /// Context index of a prefix within one question's trie.
    pub fn context_index(&self, prefix: &[Token]) -> Result<usize> {
        if prefix.len() as u32 >= self.answer_len {
            return Err(Error::InputContract(format!(
                "prefix length {} not below answer_len {}",
                prefix.len(),
                self.answer_len
            )));
        }
        let v = self.vocab_size as usize;
        let mut offset = 0usize;
        let mut level = 1usize;
        for _ in 0..prefix.len() {
            offset += level;
            level *= v;
        }
        let mut within = 0usize;
        for &tok in prefix {
            if tok >= self.vocab_size {
                return Err(Error::InputContract(format!(
                    "out-of-vocab token {tok} in prefix"
                )));
            }
            within = within * v + tok as usize;
        }
        Ok(offset + within)
    }

    /// Inverse of [`context_index`]: the prefix tokens at a context slot.
    pub fn context_prefix(&self, mut ctx: usize) -> Vec<Token> {
        let v = self.vocab_size as usize;
        let mut len = 0usize;
        let mut level = 1usize;
        while ctx >= level {
            ctx -= level;
            level *= v;
            len += 1;
        }
        let mut prefix = vec![0u32; len];
        for slot in (0..len).rev() {
            prefix[slot] = (ctx % v) as Token;
            ctx /= v;
        }
        prefix
    }

    pub fn flat_index(&self, question_index: usize, ctx: usize, token: Token) -> usize {
        (question_index * self.contexts_per_question + ctx) * self.vocab_size as usize
            + token as usize
    }

    fn row_range(&self, question_index: usize, ctx: usize) -> std::ops::Range<usize> {
        let start = self.flat_index(question_index, ctx, 0);
        start..start + self.vocab_size as usize
    }
}

/// Dense gradient accumulator, shape-congruent to a policy's logit table.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    shape: TableShape,
    data: Vec<f64>,
}

impl GradBuffer {
    pub fn zeros(shape: &TableShape) -> Self {
        GradBuffer {
            shape: shape.clone(),
            data: vec![0.0; shape.total_len()],
        }
    }

    pub fn zeros_like(policy: &TabularPolicy) -> Self {
        Self::zeros(&policy.shape)
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn add_buffer(&mut self, other: &GradBuffer) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs_diff(&self, other: &GradBuffer) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// First non-finite entry, as (question, context, token, value).
    pub fn find_non_finite(&self) -> Option<(u32, usize, Token, f64)> {
        let v = self.shape.vocab_size as usize;
        let c = self.shape.contexts_per_question;
        self.data.iter().position(|x| !x.is_finite()).map(|i| {
            let tok = (i % v) as Token;
            let ctx = (i / v) % c;
            let qi = i / (v * c);
            (self.shape.questions[qi], ctx, tok, self.data[i])
        })
    }
}

/// Per-(question, prefix) logit table defining an autoregressive
/// categorical distribution over next tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    shape: TableShape,
    logits: Vec<f64>,
}

impl TabularPolicy {
    /// All-zero logits: uniform conditionals everywhere.
    pub fn uniform(task: &TaskSpec) -> Self {
        let shape = TableShape::for_task(task);
        let len = shape.total_len();
        TabularPolicy {
            shape,
            logits: vec![0.0; len],
        }
    }

    /// Dirichlet(1)-random conditional distributions at every context,
    /// stored as log-probability logits.
    pub fn random_dirichlet(task: &TaskSpec, seed: u64) -> Self {
        let mut policy = Self::uniform(task);
        let mut rng = stream_rng(seed, "policy-dirichlet", &[]);
        let v = policy.shape.vocab_size as usize;
        for row in policy.logits.chunks_mut(v) {
            // V iid Exp(1) draws normalized are Dirichlet(1,...,1)
            let draws: Vec<f64> = row.iter().map(|_| -rng.gen::<f64>().ln()).collect();
            let total: f64 = draws.iter().sum();
            for (slot, d) in row.iter_mut().zip(draws) {
                *slot = (d / total).ln();
            }
        }
        policy
    }

    /// Uniform policy plus iid N(0, scale^2)-ish noise on every logit.
    pub fn random_gaussian(task: &TaskSpec, seed: u64, scale: f64) -> Self {
        let mut policy = Self::uniform(task);
        let mut rng = stream_rng(seed, "policy-gaussian", &[]);
        for x in &mut policy.logits {
            // sum of 12 uniforms minus 6: cheap approximate standard normal
            let z: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
            *x = scale * z;
        }
        policy
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn logit(&self, q: u32, prefix: &[Token], token: Token) -> Result<f64> {
        let qi = self.shape.question_index(q)?;
        let ctx = self.shape.context_index(prefix)?;
        Ok(self.logits[self.shape.flat_index(qi, ctx, token)])
    }

    pub fn add_to_logit(&mut self, q: u32, prefix: &[Token], token: Token, delta: f64) -> Result<()> {
        let qi = self.shape.question_index(q)?;
        let ctx = self.shape.context_index(prefix)?;
        let idx = self.shape.flat_index(qi, ctx, token);
        self.logits[idx] += delta;
        Ok(())
    }

    /// Raise the logit of every token along `answer` by `delta`; with a
    /// large delta this saturates the policy into a near point mass.
    pub fn nudge_towards(&mut self, q: u32, answer: &[Token], delta: f64) -> Result<()> {
        for (t, &tok) in answer.iter().enumerate() {
            self.add_to_logit(q, &answer[..t], tok, delta)?;
        }
        Ok(())
    }

    fn log_softmax_row(&self, qi: usize, ctx: usize) -> Vec<f64> {
        let row = &self.logits[self.shape.row_range(qi, ctx)];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        row.iter().map(|x| x - lse).collect()
    }

    fn softmax_row(&self, qi: usize, ctx: usize) -> Vec<f64> {
        self.log_softmax_row(qi, ctx).iter().map(|x| x.exp()).collect()
    }

    /// log pi(token | q, prefix), an exact log-softmax value.
    pub fn token_logprob(&self, q: u32, prefix: &[Token], token: Token) -> Result<f64> {
        let qi = self.shape.question_index(q)?;
        let ctx = self.shape.context_index(prefix)?;
        if token >= self.shape.vocab_size {
            return Err(Error::InputContract(format!(
                "out-of-vocab token {token}"
            )));
        }
        Ok(self.log_softmax_row(qi, ctx)[token as usize])
    }

    /// log pi(a | q) as the sum of per-token conditionals.
    pub fn seq_logprob(&self, q: u32, answer: &[Token]) -> Result<f64> {
        if answer.len() as u32 != self.shape.answer_len {
            return Err(Error::InputContract(format!(
                "answer length {} != answer_len {}",
                answer.len(),
                self.shape.answer_len
            )));
        }
        let mut total = 0.0;
        for (t, &tok) in answer.iter().enumerate() {
            total += self.token_logprob(q, &answer[..t], tok)?;
        }
        Ok(total)
    }

    /// Ancestral sampling of one length-L answer, deterministic in the rng.
    pub fn sample_answer(&self, q: u32, rng: &mut ChaCha8Rng) -> Result<Vec<Token>> {
        let qi = self.shape.question_index(q)?;
        let mut answer = Vec::with_capacity(self.shape.answer_len as usize);
        for _ in 0..self.shape.answer_len {
            let ctx = self.shape.context_index(&answer)?;
            let probs = self.softmax_row(qi, ctx);
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut picked = probs.len() - 1;
            for (tok, p) in probs.iter().enumerate() {
                acc += p;
                if draw < acc {
                    picked = tok;
                    break;
                }
            }
            answer.push(picked as Token);
        }
        Ok(answer)
    }

    /// Exact entropy of the length-L answer distribution, in nats.
    ///
    /// Computed by the entropy chain rule over the prefix trie, which is
    /// exact and cheaper than enumerating all V^L sequences separately.
    pub fn entropy_exact(&self, q: u32) -> Result<f64> {
        let space = (self.shape.vocab_size as u128).pow(self.shape.answer_len);
        if space > ORACLE_CAP as u128 {
            return Err(Error::OracleUnavailable {
                size: space,
                cap: ORACLE_CAP,
            });
        }
        let qi = self.shape.question_index(q)?;
        let v = self.shape.vocab_size as usize;
        let mut entropy = 0.0;
        let mut reach = vec![1.0f64]; // prefix reach probabilities at level t
        let mut level_offset = 0usize;
        let mut level_size = 1usize;
        for _ in 0..self.shape.answer_len {
            let mut next = vec![0.0; level_size * v];
            for (slot, &w) in reach.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let ctx = level_offset + slot;
                let logp = self.log_softmax_row(qi, ctx);
                for (tok, &lp) in logp.iter().enumerate() {
                    let p = lp.exp();
                    entropy -= w * p * lp;
                    next[slot * v + tok] = w * p;
                }
            }
            level_offset += level_size;
            level_size *= v;
            reach = next;
        }
        Ok(entropy)
    }

    /// Add `coeff * (onehot(token) - softmax(row))` into the buffer at the
    /// context row: the exact analytic gradient of the token log-likelihood.
    pub fn accumulate_logprob_grad(
        &self,
        q: u32,
        prefix: &[Token],
        token: Token,
        coeff: f64,
        buf: &mut GradBuffer,
    ) -> Result<()> {
        if coeff == 0.0 {
            return Ok(());
        }
        let qi = self.shape.question_index(q)?;
        let ctx = self.shape.context_index(prefix)?;
        let probs = self.softmax_row(qi, ctx);
        let range = self.shape.row_range(qi, ctx);
        let row = &mut buf.data_mut()[range];
        for (tok, p) in probs.iter().enumerate() {
            let onehot = if tok == token as usize { 1.0 } else { 0.0 };
            row[tok] += coeff * (onehot - p);
        }
        Ok(())
    }
}

/// Immutable deep copy of a policy's logits, tagged with an iteration.
#[derive(Debug, Clone)]
pub struct FrozenSnapshot {
    policy: TabularPolicy,
    iteration: u64,
}

impl FrozenSnapshot {
    pub fn take(policy: &TabularPolicy, iteration: u64) -> Self {
        FrozenSnapshot {
            policy: policy.clone(),
            iteration,
        }
    }

    pub fn policy(&self) -> &TabularPolicy {
        &self.policy
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }
}

const CHECKPOINT_MAGIC: &str = "nftlab-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Write a checkpoint atomically (temp file + rename).
///
/// The format is plain text: a fixed header followed by one `row` line per
/// (question, prefix) context with full-precision decimal floats. Decimal
/// strings round-trip bit-identically.
pub fn save_checkpoint(
    policy: &TabularPolicy,
    task: &TaskSpec,
    iteration: u64,
    path: &Path,
) -> Result<()> {
    let shape = policy.shape();
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(out, "fingerprint {:016x}", task.fingerprint());
    let _ = writeln!(out, "iteration {iteration}");
    let _ = writeln!(out, "vocab_size {}", shape.vocab_size());
    let _ = writeln!(out, "answer_len {}", shape.answer_len());
    let _ = writeln!(out, "num_questions {}", shape.questions().len());
    for (qi, &q) in shape.questions().iter().enumerate() {
        for ctx in 0..shape.contexts_per_question() {
            let prefix = shape.context_prefix(ctx);
            let prefix_str = if prefix.is_empty() {
                "-".to_string()
            } else {
                prefix
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let _ = write!(out, "row {q} {prefix_str}");
            for tok in 0..shape.vocab_size() {
                let _ = write!(out, " {}", policy.logits()[shape.flat_index(qi, ctx, tok)]);
            }
            out.push('\n');
        }
    }
    let tmp = path.with_extension("tmp");
    let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a checkpoint written by [`save_checkpoint`], validating the task
/// fingerprint. Returns the policy and its iteration tag.
pub fn load_checkpoint(path: &Path, task: &TaskSpec) -> Result<(TabularPolicy, u64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty file".into()))?;
    let expected = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    if header != expected {
        return Err(Error::Checkpoint(format!(
            "bad header {header:?}, expected {expected:?}"
        )));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("missing field {name}")))?;
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| Error::Checkpoint(format!("malformed field line {line:?}")))?;
        if key != name {
            return Err(Error::Checkpoint(format!(
                "expected field {name}, found {key}"
            )));
        }
        Ok(value.to_string())
    };
    let fingerprint = field("fingerprint")?;
    if fingerprint != format!("{:016x}", task.fingerprint()) {
        return Err(Error::Checkpoint(
            "task fingerprint does not match checkpoint".into(),
        ));
    }
    let iteration: u64 = field("iteration")?
        .parse()
        .map_err(|_| Error::Checkpoint("bad iteration".into()))?;
    let vocab_size: u32 = field("vocab_size")?
        .parse()
        .map_err(|_| Error::Checkpoint("bad vocab_size".into()))?;
    let answer_len: u32 = field("answer_len")?
        .parse()
        .map_err(|_| Error::Checkpoint("bad answer_len".into()))?;
    let num_questions: usize = field("num_questions")?
        .parse()
        .map_err(|_| Error::Checkpoint("bad num_questions".into()))?;
    if vocab_size != task.vocab_size()
        || answer_len != task.answer_len()
        || num_questions != task.num_questions()
    {
        return Err(Error::Checkpoint("task dimensions mismatch".into()));
    }
    let mut policy = TabularPolicy::uniform(task);
    let shape = policy.shape.clone();
    let mut seen = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        if parts.next() != Some("row") {
            return Err(Error::Checkpoint(format!("unexpected line {line:?}")));
        }
        let q: u32 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Checkpoint("bad row question".into()))?;
        let prefix_str = parts
            .next()
            .ok_or_else(|| Error::Checkpoint("missing prefix".into()))?;
        let prefix: Vec<Token> = if prefix_str == "-" {
            Vec::new()
        } else {
            prefix_str
                .split(',')
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Checkpoint(format!("bad prefix token {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        let qi = shape.question_index(q).map_err(|_| {
            Error::Checkpoint(format!("row references unknown question {q}"))
        })?;
        let ctx = shape
            .context_index(&prefix)
            .map_err(|_| Error::Checkpoint(format!("bad prefix {prefix_str:?}")))?;
        for tok in 0..vocab_size {
            let raw = parts
                .next()
                .ok_or_else(|| Error::Checkpoint("short row".into()))?;
            let value: f64 = raw
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad logit {raw:?}")))?;
            policy.logits[shape.flat_index(qi, ctx, tok)] = value;
        }
        seen += 1;
    }
    let expected_rows = num_questions * shape.contexts_per_question();
    if seen != expected_rows {
        return Err(Error::Checkpoint(format!(
            "expected {expected_rows} rows, found {seen}"
        )));
    }
    Ok((policy, iteration))
}

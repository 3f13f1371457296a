//! Plain-text run configuration: `[section]` headers with `key = value`
//! lines, dotted-path overrides, and fail-closed unknown-key handling.

use crate::objectives::{LossNorm, ObjectiveConfig, ObjectiveKind, OmegaKind};
use crate::taskenv::{TaskSpec, VerifierRule, VocabSpec};
use crate::trainer::{OptimizerKind, TrainerConfig};
use crate::{Error, Result};
use std::path::PathBuf;

/// `[task]` section: everything needed to rebuild a task deterministically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSection {
    pub vocab_size: u32,
    pub answer_len: u32,
    pub num_questions: u32,
    pub rule: String,
    /// Explicit rule parameters; empty means "draw from `seed`".
    pub rule_params: Vec<u32>,
    pub seed: u64,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            vocab_size: 4,
            answer_len: 3,
            num_questions: 8,
            rule: "modsum".to_string(),
            rule_params: Vec::new(),
            seed: 0,
        }
    }
}

impl TaskSection {
    /// Materialize the task. Explicit `rule_params` are used verbatim
    /// (exact answers are given as `answer_len`-sized token runs, prefixes
    /// as single tokens); otherwise parameters are drawn from `seed`.
    pub fn build(&self) -> Result<TaskSpec> {
        let vocab = VocabSpec::new(self.vocab_size)?;
        let n = self.num_questions as usize;
        let rule = match self.rule.as_str() {
            "modsum" => {
                if self.rule_params.is_empty() {
                    VerifierRule::random_modsum(vocab, n, self.seed)
                } else {
                    VerifierRule::ModSum {
                        targets: self.rule_params.clone(),
                    }
                }
            }
            "exact" => {
                if self.rule_params.is_empty() {
                    VerifierRule::random_exact(vocab, self.answer_len, n, self.seed)
                } else {
                    let l = self.answer_len as usize;
                    if self.rule_params.len() % l != 0 {
                        return Err(Error::config(format!(
                            "exact rule_params length {} is not a multiple of answer_len {}",
                            self.rule_params.len(),
                            l
                        )));
                    }
                    VerifierRule::Exact {
                        golden: self.rule_params.chunks(l).map(|c| c.to_vec()).collect(),
                    }
                }
            }
            "prefix" => {
                if self.rule_params.is_empty() {
                    VerifierRule::random_prefix(vocab, 1, n, self.seed)
                } else {
                    VerifierRule::Prefix {
                        prefixes: self.rule_params.iter().map(|&t| vec![t]).collect(),
                    }
                }
            }
            other => {
                return Err(Error::config(format!(
                    "unknown rule {other:?} (expected modsum, exact, or prefix)"
                )))
            }
        };
        TaskSpec::new(vocab, (0..self.num_questions).collect(), self.answer_len, rule)
    }
}

/// `[output]` section: artifact destinations; all optional.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutputSection {
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub rollout_dump_path: Option<PathBuf>,
}

/// Full run configuration, one struct per config section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskSection,
    pub trainer: TrainerConfig,
    pub objective: ObjectiveConfig,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: TaskSection::default(),
            trainer: TrainerConfig::default(),
            objective: ObjectiveConfig::default(),
            output: OutputSection::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: Option<usize>) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config {
        message: format!("invalid value {value:?} for key {key:?}"),
        line,
    })
}

fn parse_bool(key: &str, value: &str, line: Option<usize>) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config {
            message: format!("invalid boolean {value:?} for key {key:?}"),
            line,
        }),
    }
}

fn parse_u32_list(key: &str, value: &str, line: Option<usize>) -> Result<Vec<u32>> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|s| parse_num::<u32>(key, s, line))
        .collect()
}

fn wrap_line<T>(result: Result<T>, line: Option<usize>) -> Result<T> {
    match result {
        Err(Error::Config {
            message,
            line: None,
        }) => Err(Error::Config { message, line }),
        other => other,
    }
}

impl RunConfig {
    /// Set one `section.key` to a textual value. Unknown sections and keys
    /// are rejected (fail-closed); `line` feeds the diagnostic.
    pub fn set(&mut self, section: &str, key: &str, value: &str, line: Option<usize>) -> Result<()> {
        let unknown = |what: &str| Error::Config {
            message: format!("unknown {what} {key:?} in section [{section}]"),
            line,
        };
        match section {
            "task" => match key {
                "vocab_size" => self.task.vocab_size = parse_num(key, value, line)?,
                "answer_len" => self.task.answer_len = parse_num(key, value, line)?,
                "num_questions" => self.task.num_questions = parse_num(key, value, line)?,
                "rule" => self.task.rule = value.trim().to_string(),
                "rule_params" => self.task.rule_params = parse_u32_list(key, value, line)?,
                "seed" => self.task.seed = parse_num(key, value, line)?,
                _ => return Err(unknown("key")),
            },
            "trainer" => match key {
                "learning_rate" => self.trainer.learning_rate = parse_num(key, value, line)?,
                "iterations" => self.trainer.iterations = parse_num(key, value, line)?,
                "questions_per_iter" => {
                    self.trainer.questions_per_iter = parse_num(key, value, line)?
                }
                "answers_per_question" => {
                    self.trainer.answers_per_question = parse_num(key, value, line)?
                }
                "num_minibatches" => self.trainer.num_minibatches = parse_num(key, value, line)?,
                "optimizer" => {
                    self.trainer.optimizer =
                        wrap_line(OptimizerKind::parse(value.trim()), line)?
                }
                "warmup_steps" => self.trainer.warmup_steps = parse_num(key, value, line)?,
                "seed" => self.trainer.seed = parse_num(key, value, line)?,
                "exact_expectation" => {
                    self.trainer.exact_expectation = parse_bool(key, value, line)?
                }
                "refill" => self.trainer.refill = parse_bool(key, value, line)?,
                "oracle_stride" => self.trainer.oracle_stride = parse_num(key, value, line)?,
                _ => return Err(unknown("key")),
            },
            "objective" => match key {
                "kind" => {
                    self.objective.kind = wrap_line(ObjectiveKind::parse(value.trim()), line)?
                }
                "epsilon" => self.objective.epsilon = parse_num(key, value, line)?,
                "eps_clip_low" => self.objective.eps_clip_low = parse_num(key, value, line)?,
                "eps_clip_high" => self.objective.eps_clip_high = parse_num(key, value, line)?,
                "omega" => {
                    self.objective.omega_kind = wrap_line(OmegaKind::parse(value.trim()), line)?
                }
                "beta" => self.objective.beta = parse_num(key, value, line)?,
                "theory_mode" => self.objective.theory_mode = parse_bool(key, value, line)?,
                "loss_norm" => {
                    self.objective.loss_norm = wrap_line(LossNorm::parse(value.trim()), line)?
                }
                _ => return Err(unknown("key")),
            },
            "output" => {
                let path = {
                    let trimmed = value.trim();
                    if trimmed.is_empty() {
                        None
                    } else {
                        Some(PathBuf::from(trimmed))
                    }
                };
                match key {
                    "metrics_path" => self.output.metrics_path = path,
                    "checkpoint_path" => self.output.checkpoint_path = path,
                    "rollout_dump_path" => self.output.rollout_dump_path = path,
                    _ => return Err(unknown("key")),
                }
            }
            _ => {
                return Err(Error::Config {
                    message: format!("unknown section [{section}]"),
                    line,
                })
            }
        }
        Ok(())
    }

    /// Parse the `[section]` / `key = value` text form. Blank lines and
    /// `#`-comments are ignored; everything else must parse or the whole
    /// load fails with a line diagnostic.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = Some(name.trim().to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config_at(format!("expected `key = value`, got {line:?}"), line_no)
            })?;
            let section = section.as_deref().ok_or_else(|| {
                Error::config_at(
                    format!("key {:?} appears before any [section] header", key.trim()),
                    line_no,
                )
            })?;
            cfg.set(section, key.trim(), value, Some(line_no))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        // an unreadable config is a usage problem, not a runtime failure
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Apply a dotted-path override of the form `section.key=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {spec:?} is not of form section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::config(format!("override key {path:?} is not dotted (section.key)")))?;
        self.set(section, key, value, None)
    }

    /// Serialize so that `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let list = |xs: &[u32]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        format!(
            "[task]\n\
             vocab_size = {}\n\
             answer_len = {}\n\
             num_questions = {}\n\
             rule = {}\n\
             rule_params = {}\n\
             seed = {}\n\
             \n\
             [trainer]\n\
             learning_rate = {}\n\
             iterations = {}\n\
             questions_per_iter = {}\n\
             answers_per_question = {}\n\
             num_minibatches = {}\n\
             optimizer = {}\n\
             warmup_steps = {}\n\
             seed = {}\n\
             exact_expectation = {}\n\
             refill = {}\n\
             oracle_stride = {}\n\
             \n\
             [objective]\n\
             kind = {}\n\
             epsilon = {}\n\
             eps_clip_low = {}\n\
             eps_clip_high = {}\n\
             omega = {}\n\
             beta = {}\n\
             theory_mode = {}\n\
             loss_norm = {}\n\
             \n\
             [output]\n\
             metrics_path = {}\n\
             checkpoint_path = {}\n\
             rollout_dump_path = {}\n",
            self.task.vocab_size,
            self.task.answer_len,
            self.task.num_questions,
            self.task.rule,
            list(&self.task.rule_params),
            self.task.seed,
            self.trainer.learning_rate,
            self.trainer.iterations,
            self.trainer.questions_per_iter,
            self.trainer.answers_per_question,
            self.trainer.num_minibatches,
            self.trainer.optimizer.name(),
            self.trainer.warmup_steps,
            self.trainer.seed,
            self.trainer.exact_expectation,
            self.trainer.refill,
            self.trainer.oracle_stride,
            self.objective.kind.name(),
            self.objective.epsilon,
            self.objective.eps_clip_low,
            self.objective.eps_clip_high,
            self.objective.omega_kind.name(),
            self.objective.beta,
            self.objective.theory_mode,
            self.objective.loss_norm.name(),
            path(&self.output.metrics_path),
            path(&self.output.checkpoint_path),
            path(&self.output.rollout_dump_path),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        self.objective.validate()?;
        self.task.build().map(|_| ())
    }
}

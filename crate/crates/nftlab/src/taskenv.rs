//! Synthetic verifiable tasks with enumerable answer spaces.
//!
//! A task fixes a token vocabulary, a set of questions, a fixed answer
//! length, and a deterministic binary verifier. Answers are token strings
//! of exactly `answer_len` tokens, so the answer space is the V^L grid and
//! every expectation over it can be computed by brute force (below the
//! enumeration cap).

use crate::policy::TabularPolicy;
use crate::rng::stream_rng;
use crate::{Error, Result};
use rand::Rng;

/// Token symbol, identified 0..V-1.
pub type Token = u32;

/// Answer space cap for oracle-enabled tasks; keeps brute-force passes fast.
pub const ORACLE_CAP: u64 = 1_000_000;

/// Token alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSpec {
    size: u32,
}

impl VocabSpec {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::InputContract(format!(
                "vocab size must be >= 2, got {size}"
            )));
        }
        Ok(VocabSpec { size })
    }

    pub fn size(&self) -> u32 {
        self.size
    }
}

/// Binary correctness label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reward(u8);

impl Reward {
    pub fn correct() -> Self {
        Reward(1)
    }

    pub fn incorrect() -> Self {
        Reward(0)
    }

    pub fn from_bool(correct: bool) -> Self {
        Reward(u8::from(correct))
    }

    pub fn value(&self) -> u8 {
        self.0
    }

    pub fn is_correct(&self) -> bool {
        self.0 == 1
    }
}

/// Closed-form verifier predicates. Parameters are per-question, indexed by
/// question position (cycled if fewer parameters than questions are given).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifierRule {
    /// Reward 1 iff the token sum mod V equals the per-question target.
    ModSum { targets: Vec<u32> },
    /// Reward 1 iff the answer equals the per-question golden sequence.
    Exact { golden: Vec<Vec<Token>> },
    /// Reward 1 iff the answer starts with the per-question prefix.
    Prefix { prefixes: Vec<Vec<Token>> },
}

impl VerifierRule {
    pub fn tag(&self) -> &'static str {
        match self {
            VerifierRule::ModSum { .. } => "modsum",
            VerifierRule::Exact { .. } => "exact",
            VerifierRule::Prefix { .. } => "prefix",
        }
    }

    /// Random per-question mod-sum targets.
    pub fn random_modsum(vocab: VocabSpec, num_questions: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "task-modsum", &[]);
        let targets = (0..num_questions)
            .map(|_| rng.gen_range(0..vocab.size()))
            .collect();
        VerifierRule::ModSum { targets }
    }

    /// Random per-question golden sequences.
    pub fn random_exact(
        vocab: VocabSpec,
        answer_len: u32,
        num_questions: usize,
        seed: u64,
    ) -> Self {
        let mut rng = stream_rng(seed, "task-exact", &[]);
        let golden = (0..num_questions)
            .map(|_| {
                (0..answer_len)
                    .map(|_| rng.gen_range(0..vocab.size()))
                    .collect()
            })
            .collect();
        VerifierRule::Exact { golden }
    }

    /// Random per-question prefixes of the given length.
    pub fn random_prefix(
        vocab: VocabSpec,
        prefix_len: u32,
        num_questions: usize,
        seed: u64,
    ) -> Self {
        let mut rng = stream_rng(seed, "task-prefix", &[]);
        let prefixes = (0..num_questions)
            .map(|_| {
                (0..prefix_len)
                    .map(|_| rng.gen_range(0..vocab.size()))
                    .collect()
            })
            .collect();
        VerifierRule::Prefix { prefixes }
    }
}

/// A finite question set with a deterministic binary verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    vocab: VocabSpec,
    questions: Vec<u32>,
    answer_len: u32,
    rule: VerifierRule,
}

impl TaskSpec {
    pub fn new(
        vocab: VocabSpec,
        questions: Vec<u32>,
        answer_len: u32,
        rule: VerifierRule,
    ) -> Result<Self> {
        if answer_len == 0 {
            return Err(Error::InputContract("answer_len must be positive".into()));
        }
        if questions.is_empty() {
            return Err(Error::InputContract("question set must be nonempty".into()));
        }
        let mut seen = questions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != questions.len() {
            return Err(Error::InputContract("question ids must be unique".into()));
        }
        let check_tokens = |seq: &[Token], max_len: u32, what: &str| -> Result<()> {
            if seq.len() as u32 > max_len {
                return Err(Error::InputContract(format!(
                    "{what} longer than answer_len {max_len}"
                )));
            }
            for &t in seq {
                if t >= vocab.size() {
                    return Err(Error::InputContract(format!(
                        "{what} contains out-of-vocab token {t}"
                    )));
                }
            }
            Ok(())
        };
        match &rule {
            VerifierRule::ModSum { targets } => {
                if targets.is_empty() {
                    return Err(Error::InputContract("modsum needs >= 1 target".into()));
                }
                for &t in targets {
                    if t >= vocab.size() {
                        return Err(Error::InputContract(format!(
                            "modsum target {t} not below vocab size {}",
                            vocab.size()
                        )));
                    }
                }
            }
            VerifierRule::Exact { golden } => {
                if golden.is_empty() {
                    return Err(Error::InputContract("exact needs >= 1 golden".into()));
                }
                for g in golden {
                    check_tokens(g, answer_len, "golden sequence")?;
                    if g.len() as u32 != answer_len {
                        return Err(Error::InputContract(
                            "golden sequence length must equal answer_len".into(),
                        ));
                    }
                }
            }
            VerifierRule::Prefix { prefixes } => {
                if prefixes.is_empty() {
                    return Err(Error::InputContract("prefix needs >= 1 prefix".into()));
                }
                for p in prefixes {
                    check_tokens(p, answer_len, "prefix")?;
                    if p.is_empty() {
                        return Err(Error::InputContract(
                            "prefix must be nonempty (would reward everything)".into(),
                        ));
                    }
                }
            }
        }
        Ok(TaskSpec {
            vocab,
            questions,
            answer_len,
            rule,
        })
    }

    pub fn vocab(&self) -> VocabSpec {
        self.vocab
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab.size()
    }

    pub fn answer_len(&self) -> u32 {
        self.answer_len
    }

    pub fn questions(&self) -> &[u32] {
        &self.questions
    }

    pub fn num_questions(&self) -> usize {
        self.questions.len()
    }

    pub fn rule(&self) -> &VerifierRule {
        &self.rule
    }

    /// Position of a question id in the question list.
    pub fn question_index(&self, q: u32) -> Result<usize> {
        self.questions
            .iter()
            .position(|&id| id == q)
            .ok_or_else(|| Error::InputContract(format!("unknown question id {q}")))
    }

    /// V^L as a u128 (never overflows for sane inputs).
    pub fn answer_space_size(&self) -> u128 {
        (self.vocab.size() as u128).pow(self.answer_len)
    }

    pub fn oracle_available(&self) -> bool {
        self.answer_space_size() <= ORACLE_CAP as u128
    }

    fn require_oracle(&self) -> Result<()> {
        if self.oracle_available() {
            Ok(())
        } else {
            Err(Error::OracleUnavailable {
                size: self.answer_space_size(),
                cap: ORACLE_CAP,
            })
        }
    }

    /// Deterministic binary verification of an answer.
    pub fn verify(&self, q: u32, answer: &[Token]) -> Result<Reward> {
        let qi = self.question_index(q)?;
        if answer.len() as u32 != self.answer_len {
            return Err(Error::InputContract(format!(
                "answer length {} != answer_len {}",
                answer.len(),
                self.answer_len
            )));
        }
        for &t in answer {
            if t >= self.vocab.size() {
                return Err(Error::InputContract(format!(
                    "out-of-vocab token {t} (vocab size {})",
                    self.vocab.size()
                )));
            }
        }
        let correct = match &self.rule {
            VerifierRule::ModSum { targets } => {
                let target = targets[qi % targets.len()];
                let sum: u64 = answer.iter().map(|&t| u64::from(t)).sum();
                sum % u64::from(self.vocab.size()) == u64::from(target)
            }
            VerifierRule::Exact { golden } => answer == golden[qi % golden.len()].as_slice(),
            VerifierRule::Prefix { prefixes } => {
                let p = &prefixes[qi % prefixes.len()];
                answer.starts_with(p)
            }
        };
        Ok(Reward::from_bool(correct))
    }

    /// All V^L answers in lexicographic order.
    pub fn enumerate_answers(&self) -> Result<AnswerEnumeration> {
        self.require_oracle()?;
        Ok(AnswerEnumeration {
            vocab_size: self.vocab.size(),
            next: Some(vec![0; self.answer_len as usize]),
        })
    }

    /// Exact correctness rate of a policy on one question: the enumeration
    /// sum of answer probability times verifier outcome.
    pub fn correctness_rate_exact(&self, q: u32, policy: &TabularPolicy) -> Result<f64> {
        self.require_oracle()?;
        let mut rate = 0.0;
        for answer in self.enumerate_answers()? {
            if self.verify(q, &answer)?.is_correct() {
                rate += policy.seq_logprob(q, &answer)?.exp();
            }
        }
        Ok(rate)
    }

    /// Canonical one-line serialization; the checkpoint fingerprint hashes it.
    pub fn canonical_string(&self) -> String {
        let mut s = format!(
            "v={};l={};q={:?};rule={}",
            self.vocab.size(),
            self.answer_len,
            self.questions,
            self.rule.tag()
        );
        match &self.rule {
            VerifierRule::ModSum { targets } => s.push_str(&format!(";params={targets:?}")),
            VerifierRule::Exact { golden } => s.push_str(&format!(";params={golden:?}")),
            VerifierRule::Prefix { prefixes } => s.push_str(&format!(";params={prefixes:?}")),
        }
        s
    }

    /// FNV-1a fingerprint of the canonical serialization.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical_string().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Lexicographic odometer over all length-L token strings.
pub struct AnswerEnumeration {
    vocab_size: u32,
    next: Option<Vec<Token>>,
}

impl Iterator for AnswerEnumeration {
    type Item = Vec<Token>;

    fn next(&mut self) -> Option<Vec<Token>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut pos = succ.len();
        loop {
            if pos == 0 {
                // odometer rolled over; enumeration done
                break;
            }
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < self.vocab_size {
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::TabularPolicy;

    fn modsum_task(v: u32, l: u32, targets: Vec<u32>) -> TaskSpec {
        let n = targets.len();
        TaskSpec::new(
            VocabSpec::new(v).unwrap(),
            (0..n as u32).collect(),
            l,
            VerifierRule::ModSum { targets },
        )
        .unwrap()
    }

    #[test]
    fn modsum_hand_arithmetic() {
        let task = modsum_task(4, 3, vec![2]);
        assert!(task.verify(0, &[1, 1, 0]).unwrap().is_correct());
        // 6 mod 4 = 2 is also correct; 3 mod 4 = 3 is not
        assert!(task.verify(0, &[3, 3, 0]).unwrap().is_correct());
        assert!(!task.verify(0, &[3, 0, 0]).unwrap().is_correct());
    }

    #[test]
    fn exact_identity_case() {
        let task = TaskSpec::new(
            VocabSpec::new(4).unwrap(),
            vec![0],
            3,
            VerifierRule::Exact {
                golden: vec![vec![0, 1, 2]],
            },
        )
        .unwrap();
        assert!(task.verify(0, &[0, 1, 2]).unwrap().is_correct());
        assert!(!task.verify(0, &[0, 1, 3]).unwrap().is_correct());
    }

    #[test]
    fn prefix_rule() {
        let task = TaskSpec::new(
            VocabSpec::new(3).unwrap(),
            vec![0],
            3,
            VerifierRule::Prefix {
                prefixes: vec![vec![2, 1]],
            },
        )
        .unwrap();
        assert!(task.verify(0, &[2, 1, 0]).unwrap().is_correct());
        assert!(!task.verify(0, &[1, 2, 0]).unwrap().is_correct());
    }

    #[test]
    fn verify_rejects_bad_inputs() {
        let task = modsum_task(4, 3, vec![2]);
        assert!(matches!(
            task.verify(0, &[1, 1]),
            Err(Error::InputContract(_))
        ));
        assert!(matches!(
            task.verify(0, &[1, 1, 9]),
            Err(Error::InputContract(_))
        ));
        assert!(matches!(
            task.verify(99, &[1, 1, 0]),
            Err(Error::InputContract(_))
        ));
    }

    #[test]
    fn verify_is_pure() {
        let task = modsum_task(5, 4, vec![3, 1]);
        for q in [0, 1] {
            let r1 = task.verify(q, &[1, 2, 0, 0]).unwrap();
            let r2 = task.verify(q, &[1, 2, 0, 0]).unwrap();
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn enumeration_binary_strings() {
        let task = modsum_task(2, 2, vec![1]);
        let all: Vec<_> = task.enumerate_answers().unwrap().collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn enumeration_single_step() {
        let task = modsum_task(3, 1, vec![0]);
        let all: Vec<_> = task.enumerate_answers().unwrap().collect();
        assert_eq!(all, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn enumeration_count_and_extremes() {
        let task = modsum_task(2, 3, vec![0]);
        let all: Vec<_> = task.enumerate_answers().unwrap().collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0], vec![0, 0, 0]);
        assert_eq!(all[7], vec![1, 1, 1]);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let task = modsum_task(10, 7, vec![0]); // 10^7 > cap
        assert!(matches!(
            task.enumerate_answers(),
            Err(Error::OracleUnavailable { .. })
        ));
    }

    #[test]
    fn exact_rate_uniform_modsum() {
        // MODSUM V=2, L=2, target 1: correct answers {01, 10}, 2 of 4.
        let task = modsum_task(2, 2, vec![1]);
        let policy = TabularPolicy::uniform(&task);
        let rate = task.correctness_rate_exact(0, &policy).unwrap();
        assert!((rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_rate_point_mass() {
        let task = TaskSpec::new(
            VocabSpec::new(3).unwrap(),
            vec![0],
            2,
            VerifierRule::Exact {
                golden: vec![vec![2, 1]],
            },
        )
        .unwrap();
        let mut policy = TabularPolicy::uniform(&task);
        // saturate logits along the golden sequence
        policy.nudge_towards(0, &[2, 1], 50.0).unwrap();
        let rate = task.correctness_rate_exact(0, &policy).unwrap();
        assert!(rate > 0.999999);
    }

    #[test]
    fn exact_rate_matches_enumeration_weighted_sum() {
        let task = modsum_task(3, 2, vec![1, 2]);
        let policy = TabularPolicy::random_dirichlet(&task, 11);
        for &q in task.questions() {
            let rate = task.correctness_rate_exact(q, &policy).unwrap();
            let mut acc = 0.0;
            for a in task.enumerate_answers().unwrap() {
                acc += f64::from(task.verify(q, &a).unwrap().value())
                    * policy.seq_logprob(q, &a).unwrap().exp();
            }
            assert!((0.0..=1.0).contains(&rate));
            assert!((rate - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn unique_question_ids_required() {
        let res = TaskSpec::new(
            VocabSpec::new(2).unwrap(),
            vec![0, 0],
            2,
            VerifierRule::ModSum { targets: vec![0] },
        );
        assert!(res.is_err());
    }
}

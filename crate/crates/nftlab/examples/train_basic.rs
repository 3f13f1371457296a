//! Train the default objective on a small MODSUM task and stream the
//! metrics CSV to stdout.
//!
//! Run with: `cargo run --example train_basic`

use nftlab::objectives::ObjectiveConfig;
use nftlab::policy::TabularPolicy;
use nftlab::taskenv::{TaskSpec, VerifierRule, VocabSpec};
use nftlab::trainer::{run_experiment, ExperimentSinks, TrainerConfig};

fn main() -> nftlab::Result<()> {
    // 8 questions over a 4-token vocabulary; an answer is correct when
    // its token sum modulo 4 hits the question's target.
    let vocab = VocabSpec::new(4)?;
    let task = TaskSpec::new(
        vocab,
        (0..8).collect(),
        3,
        VerifierRule::random_modsum(vocab, 8, 42),
    )?;

    let tcfg = TrainerConfig {
        learning_rate: 4.0,
        iterations: 60,
        answers_per_question: 8,
        num_minibatches: 4,
        seed: 0,
        ..TrainerConfig::default()
    };
    let ocfg = ObjectiveConfig::default();

    let mut stdout = std::io::stdout();
    let mut sinks = ExperimentSinks {
        metrics: &mut stdout,
        rollout_dump: None,
        checkpoint_path: None,
    };
    let (last, policy) = run_experiment(
        &task,
        TabularPolicy::uniform(&task),
        &tcfg,
        &ocfg,
        &mut sinks,
        None,
    )?;

    let mean_entropy: f64 = task
        .questions()
        .iter()
        .map(|&q| policy.entropy_exact(q))
        .sum::<nftlab::Result<f64>>()?
        / task.num_questions() as f64;
    eprintln!(
        "final: train_accuracy={} exact_entropy={mean_entropy:.4} nats",
        last.train_accuracy
    );
    Ok(())
}

//! Paired-seed comparison of several objectives on one task: same task,
//! same seeds, only the objective differs. Prints mean final accuracy
//! and exact entropy per objective.
//!
//! Run with: `cargo run --release --example compare_objectives`

use nftlab::objectives::{ObjectiveConfig, ObjectiveKind};
use nftlab::policy::TabularPolicy;
use nftlab::taskenv::{TaskSpec, VerifierRule, VocabSpec};
use nftlab::trainer::{run_experiment, ExperimentSinks, TrainerConfig};

fn main() -> nftlab::Result<()> {
    let vocab = VocabSpec::new(4)?;
    let task = TaskSpec::new(
        vocab,
        (0..16).collect(),
        3,
        VerifierRule::random_modsum(vocab, 16, 7),
    )?;
    let seeds = [0u64, 1, 2];
    let kinds = [
        ObjectiveKind::Nft,
        ObjectiveKind::Rft,
        ObjectiveKind::Grpo,
        ObjectiveKind::DrGrpo,
        ObjectiveKind::Pg,
    ];

    println!("objective  mean_final_accuracy  mean_final_entropy");
    for kind in kinds {
        let mut acc = 0.0;
        let mut ent = 0.0;
        for &seed in &seeds {
            let tcfg = TrainerConfig {
                learning_rate: 4.0,
                iterations: 150,
                answers_per_question: 8,
                num_minibatches: 4,
                seed,
                ..TrainerConfig::default()
            };
            let ocfg = ObjectiveConfig::default().with_kind(kind);
            let mut sink = Vec::new();
            let mut sinks = ExperimentSinks {
                metrics: &mut sink,
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
            acc += last.train_accuracy / seeds.len() as f64;
            ent += task
                .questions()
                .iter()
                .map(|&q| policy.entropy_exact(q))
                .sum::<nftlab::Result<f64>>()?
                / (task.num_questions() * seeds.len()) as f64;
        }
        println!("{:9}  {acc:<19.4}  {ent:.4}", kind.name());
    }
    Ok(())
}

//! Anatomy of one data-collection pass: sample K answers per question
//! from a frozen snapshot, filter out all-correct / all-incorrect
//! groups, shuffle the survivors into mini-batches, and print the
//! dump-format records.
//!
//! Run with: `cargo run --example rollout_anatomy`

use nftlab::policy::{FrozenSnapshot, TabularPolicy};
use nftlab::rng::stream_rng;
use nftlab::rollout::{build_batch, collect_group, dump_records, filter_groups};
use nftlab::taskenv::{TaskSpec, VerifierRule, VocabSpec};

fn main() -> nftlab::Result<()> {
    let vocab = VocabSpec::new(3)?;
    let task = TaskSpec::new(
        vocab,
        vec![0, 1, 2, 3],
        2,
        VerifierRule::random_modsum(vocab, 4, 13),
    )?;
    let policy = TabularPolicy::uniform(&task);
    let snapshot = FrozenSnapshot::take(&policy, 0);

    let mut groups = Vec::new();
    for &q in task.questions() {
        let group = collect_group(&snapshot, &task, q, 8, 0)?;
        println!(
            "question {q}: r_hat = {:.3}, retained = {}",
            group.r_hat,
            group.is_retained()
        );
        groups.push(group);
    }

    let retained = filter_groups(groups);
    println!(
        "\n{} of 4 groups carry usable signal; records:",
        retained.len()
    );
    print!("{}", dump_records(&retained, 0));

    let mut rng = stream_rng(0, "shuffle", &[0]);
    let batch = build_batch(&retained, 2, &mut rng)?;
    println!("\nsplit into {} mini-batches:", batch.num_minibatches());
    for m in 0..batch.num_minibatches() {
        println!("  mini-batch {m}: {} answer units", batch.minibatch(m).len());
    }
    Ok(())
}

//! On a strictly on-policy batch (likelihood ratios identically 1), the
//! supervised implicit-negative gradient coincides with the clipped
//! group-advantage gradients: sqrt-ratio prompt weighting reproduces the
//! std-normalized variant, one-minus-r weighting the mean-only variant.
//!
//! Run with: `cargo run --example onpolicy_equivalence`

use nftlab::objectives::{ObjectiveConfig, ObjectiveKind, OmegaKind};
use nftlab::oracle::onpolicy_equivalence_report;
use nftlab::policy::{FrozenSnapshot, TabularPolicy};
use nftlab::rng::stream_rng;
use nftlab::rollout::{build_batch, collect_group, filter_groups};
use nftlab::taskenv::{TaskSpec, VerifierRule, VocabSpec};

fn main() -> nftlab::Result<()> {
    let vocab = VocabSpec::new(3)?;
    let task = TaskSpec::new(
        vocab,
        vec![0, 1, 2],
        2,
        VerifierRule::random_modsum(vocab, 3, 21),
    )?;
    let policy = TabularPolicy::random_dirichlet(&task, 4);

    // collect from the current policy and do NOT update: ratios stay 1
    let snapshot = FrozenSnapshot::take(&policy, 0);
    let mut groups = Vec::new();
    for &q in task.questions() {
        groups.push(collect_group(&snapshot, &task, q, 8, 6)?);
    }
    let groups = filter_groups(groups);
    let mut rng = stream_rng(6, "batch", &[]);
    let batch = build_batch(&groups, 1, &mut rng)?;

    let nft_sqrt = ObjectiveConfig {
        epsilon: 1.0,
        omega_kind: OmegaKind::SqrtRatio,
        ..ObjectiveConfig::default()
    };
    let nft_omr = ObjectiveConfig {
        omega_kind: OmegaKind::OneMinusR,
        ..nft_sqrt.clone()
    };
    let grpo = ObjectiveConfig::default().with_kind(ObjectiveKind::Grpo);
    let drgrpo = ObjectiveConfig::default().with_kind(ObjectiveKind::DrGrpo);

    let d1 = onpolicy_equivalence_report(batch.units(), &groups, &policy, &nft_sqrt, &grpo)?;
    let d2 = onpolicy_equivalence_report(batch.units(), &groups, &policy, &nft_omr, &drgrpo)?;
    println!("|grad nft(sqrt_ratio) - grad grpo|_inf     = {d1:e}");
    println!("|grad nft(one_minus_r) - grad dr_grpo|_inf = {d2:e}");
    Ok(())
}

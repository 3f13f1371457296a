//! Verify the analytic mini-batch gradient of each objective family
//! against central finite differences on one off-policy batch.
//!
//! Run with: `cargo run --release --example gradient_check`

use nftlab::objectives::{minibatch_loss_and_grad, ObjectiveConfig, ObjectiveKind};
use nftlab::oracle::{fd_gradient, max_relative_error};
use nftlab::policy::{FrozenSnapshot, TabularPolicy};
use nftlab::rng::stream_rng;
use nftlab::rollout::{build_batch, collect_group, filter_groups};
use nftlab::taskenv::{TaskSpec, VerifierRule, VocabSpec};
use rand::Rng;

fn main() -> nftlab::Result<()> {
    let vocab = VocabSpec::new(3)?;
    let task = TaskSpec::new(
        vocab,
        vec![0, 1, 2],
        2,
        VerifierRule::random_modsum(vocab, 3, 5),
    )?;
    let mut policy = TabularPolicy::random_dirichlet(&task, 17);

    // sample a batch from a frozen snapshot...
    let snapshot = FrozenSnapshot::take(&policy, 0);
    let mut groups = Vec::new();
    for &q in task.questions() {
        groups.push(collect_group(&snapshot, &task, q, 8, 3)?);
    }
    let groups = filter_groups(groups);
    let mut rng = stream_rng(3, "example-batch", &[]);
    let batch = build_batch(&groups, 1, &mut rng)?;

    // ...then drift slightly off-policy so the likelihood ratios leave 1
    let mut noise = stream_rng(3, "example-noise", &[]);
    for logit in policy.logits_mut() {
        *logit += 0.05 * (noise.gen::<f64>() - 0.5);
    }

    for kind in [
        ObjectiveKind::Nft,
        ObjectiveKind::Grpo,
        ObjectiveKind::DrGrpo,
        ObjectiveKind::Rft,
        ObjectiveKind::Pg,
        ObjectiveKind::InfoNca,
    ] {
        let mut cfg = ObjectiveConfig::default().with_kind(kind);
        if kind == ObjectiveKind::Nft {
            // keep the straight-through clamp inactive near R = 1 so the
            // finite differences see the same branch as the analytic form
            cfg.epsilon = 0.25;
        }
        let analytic = minibatch_loss_and_grad(batch.units(), &groups, &policy, &cfg)?.grad;
        let fd = fd_gradient(
            |p| minibatch_loss_and_grad(batch.units(), &groups, p, &cfg).map(|r| r.loss),
            &policy,
            1e-5,
        )?;
        println!(
            "{:8}  max relative error {:e}",
            kind.name(),
            max_relative_error(&analytic, &fd)
        );
    }
    Ok(())
}

//! Enumerate a question's answer space, build the exact Bayes-restricted
//! positive and negative policies, and show the mixture decomposition
//! r_q * pi+ + (1 - r_q) * pi- == pi holding to roundoff.
//!
//! Run with: `cargo run --example bayes_targets`

use nftlab::oracle::{bayes_negative, bayes_positive, split_identity_residual};
use nftlab::policy::TabularPolicy;
use nftlab::taskenv::{TaskSpec, VerifierRule, VocabSpec};

fn main() -> nftlab::Result<()> {
    let vocab = VocabSpec::new(3)?;
    let task = TaskSpec::new(
        vocab,
        vec![0],
        2,
        VerifierRule::random_modsum(vocab, 1, 1),
    )?;
    let policy = TabularPolicy::random_dirichlet(&task, 9);
    let q = 0;

    let pos = bayes_positive(&policy, &task, q)?;
    let neg = bayes_negative(&policy, &task, q)?;
    println!("exact correctness rate r_q = {:.6}", pos.r_exact);
    println!("answer        pi        pi+       pi-       reward");
    for (i, answer) in task.enumerate_answers()?.enumerate() {
        let p = policy.seq_logprob(q, &answer)?.exp();
        let r = task.verify(q, &answer)?.value();
        println!(
            "{answer:?}    {p:.6}  {:.6}  {:.6}  {r}",
            pos.probs[i], neg.probs[i]
        );
    }
    let residual = split_identity_residual(&policy, &task, q)?;
    println!("split identity max residual: {residual:e}");
    Ok(())
}

//! The acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line with the measured quantity and its pinned tolerance.
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! lines; the assertions fail the build either way.

use nftlab::cli::{check_equivalence, check_gradcheck, check_identities, run, weight_curve_table};
use nftlab::objectives::{
    binary_advantage, grpo_surrogate, grpo_token_grad, ObjectiveConfig, ObjectiveKind,
};
use nftlab::oracle::exact_expectation_convergence;
use nftlab::policy::TabularPolicy;
use nftlab::rng::stream_rng;
use nftlab::taskenv::{TaskSpec, VerifierRule, VocabSpec};
use nftlab::trainer::{ExperimentSinks, TrainerConfig};
use rand::Rng;

fn report(name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {name}: {verdict} ({detail})");
    assert!(pass, "{name}: {detail}");
}

/// 1. Mixture decomposition r_q*pi+ + (1-r_q)*pi- == pi on 25 random
/// tasks with dirichlet-random policies, residual < 1e-12.
#[test]
fn criterion_1_split_identity() {
    let r = check_identities(41, 25).unwrap();
    report(
        "1 split_identity",
        r.pass,
        &format!("max_residual={:e} threshold={:e}", r.max_abs_diff, r.threshold),
    );
}

/// 2. On-policy gradient equivalence over 50 random mini-batches under
/// SUM normalization: NFT(omega=sqrt_ratio, eps=1) vs GRPO and
/// NFT(omega=one_minus_r) vs Dr. GRPO, infinity norm < 1e-10.
#[test]
fn criterion_2_onpolicy_equivalence() {
    let reports = check_equivalence(42, 50).unwrap();
    let worst = reports
        .iter()
        .map(|r| r.max_abs_diff)
        .fold(0.0f64, f64::max);
    let pass = reports.iter().all(|r| r.pass);
    report(
        "2 onpolicy_equivalence",
        pass,
        &format!("worst_inf_norm={worst:e} threshold=1e-10 batches=50"),
    );
}

/// 3. Analytic gradients of all six objective families match central
/// finite differences (h=1e-5) to relative error < 1e-6 at 20 random
/// off-policy points each, away from clip/clamp kinks (margin 1e-3).
#[test]
fn criterion_3_gradient_correctness() {
    let reports = check_gradcheck(43, 20).unwrap();
    let worst = reports
        .iter()
        .map(|r| r.max_abs_diff)
        .fold(0.0f64, f64::max);
    let pass = reports.iter().all(|r| r.pass);
    report(
        "3 gradient_correctness",
        pass,
        &format!("worst_rel_err={worst:e} threshold=1e-6 points_per_kind=20"),
    );
}

/// 4. Exact-expectation training of the negative-only implicit-negative
/// objective reaches KL(pi+ || pi_theta) < 1e-6 within 5,000 steps on 5
/// random MODSUM tasks (V=3, L=3), and the full objective is at least as
/// fast on every task.
#[test]
fn criterion_4_convergence() {
    let mut worst_neg_steps = 0usize;
    let mut ordering_ok = true;
    let mut converged = true;
    for t in 0..5u64 {
        let vocab = VocabSpec::new(3).unwrap();
        let task = TaskSpec::new(
            vocab,
            vec![0, 1, 2],
            3,
            VerifierRule::random_modsum(vocab, 3, 1000 + t),
        )
        .unwrap();
        let initial = TabularPolicy::random_gaussian(&task, 1000 + t, 0.3);
        let neg = exact_expectation_convergence(&task, &initial, true, 0.5, 5000, 1e-6).unwrap();
        let full = exact_expectation_convergence(&task, &initial, false, 0.5, 5000, 1e-6).unwrap();
        match (neg.steps_to_target, full.steps_to_target) {
            (Some(n), Some(f)) => {
                worst_neg_steps = worst_neg_steps.max(n);
                ordering_ok &= f <= n;
            }
            _ => converged = false,
        }
    }
    report(
        "4 theorem1_convergence",
        converged && ordering_ok,
        &format!(
            "tasks=5 kl_target=1e-6 budget=5000 worst_negative_only_steps={worst_neg_steps} \
             full_at_least_as_fast={ordering_ok}"
        ),
    );
}

/// 5. The curve table at r_hat=0.5, eps=1 matches the closed forms
/// nft_pos=1/R and nft_neg=-1/max(2-R, 1) pointwise to 1e-12, both pairs
/// agree at R=1, and the GRPO columns are exactly zero beyond their clip
/// thresholds.
#[test]
fn criterion_5_weight_curves() {
    let table = weight_curve_table(0.5, 1.0, 0.2, 0.28, 0.0, 2.0, 200).unwrap();
    let mut worst = 0.0f64;
    let mut clip_zero = true;
    let mut r1_agree = false;
    for line in table.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (r, nft_pos, nft_neg, grpo_pos, grpo_neg) =
            (cols[0], cols[1], cols[2], cols[3], cols[4]);
        worst = worst.max((nft_pos - 1.0 / r).abs());
        worst = worst.max((nft_neg + 1.0 / (2.0 - r).max(1.0)).abs());
        if r > 1.28 + 1e-9 {
            clip_zero &= grpo_pos == 0.0;
        }
        if r < 0.8 - 1e-9 {
            clip_zero &= grpo_neg == 0.0;
        }
        if r == 1.0 {
            r1_agree = (nft_pos - grpo_pos).abs() < 1e-12 && (nft_neg - grpo_neg).abs() < 1e-12;
        }
    }
    report(
        "5 weight_curves",
        worst < 1e-12 && clip_zero && r1_agree,
        &format!(
            "max_closed_form_dev={worst:e} threshold=1e-12 clip_columns_zero={clip_zero} \
             r1_pairs_agree={r1_agree}"
        ),
    );
}

/// 6. The generic min/clip surrogate's derivative equals the indicator
/// closed form at 10^4 random (R, r_hat) points off the clip boundaries,
/// difference < 1e-12.
#[test]
fn criterion_6_surrogate_consistency() {
    let cfg = ObjectiveConfig::default();
    let mut rng = stream_rng(44, "surrogate-points", &[]);
    let mut worst = 0.0f64;
    let mut done = 0usize;
    while done < 10_000 {
        let ratio: f64 = 0.05 + 2.45 * rng.gen::<f64>();
        let r_hat: f64 = 0.05 + 0.9 * rng.gen::<f64>();
        if (ratio - (1.0 - cfg.eps_clip_low)).abs() < 1e-6
            || (ratio - (1.0 + cfg.eps_clip_high)).abs() < 1e-6
        {
            continue;
        }
        for correct in [true, false] {
            for use_std in [true, false] {
                let adv = binary_advantage(correct, r_hat, use_std).unwrap();
                let indicator = grpo_token_grad(correct, ratio, r_hat, &cfg, use_std)
                    .unwrap()
                    .coeff;
                let (_, dldr) = grpo_surrogate(ratio, adv, &cfg);
                worst = worst.max((indicator + dldr).abs());
            }
        }
        done += 1;
    }
    report(
        "6 surrogate_consistency",
        worst < 1e-12,
        &format!("max_diff={worst:e} threshold=1e-12 points={done}"),
    );
}

/// 7. Directional synthetic comparison on MODSUM (V=4, L=3, 32
/// questions, K=8, 300 iterations, 5 paired seeds): NFT's mean final
/// train accuracy is within 0.01 of RFT's, and NFT's exact final policy
/// entropy exceeds RFT's in at least 3 of 5 seeds.
///
/// Both objectives start from the same warm policy (~0.6 accuracy,
/// standing in for a supervised-fine-tuned starting point) and each uses
/// a learning rate calibrated so the two end at matched accuracy
/// (~0.9); the entropy comparison is then apples-to-apples: at equal
/// final accuracy the positives-only objective holds a visibly sharper
/// policy.
#[test]
fn criterion_7_directional_comparison() {
    let vocab = VocabSpec::new(4).unwrap();
    let task = TaskSpec::new(
        vocab,
        (0..32).collect(),
        3,
        VerifierRule::random_modsum(vocab, 32, 7),
    )
    .unwrap();
    let mut warm = TabularPolicy::uniform(&task);
    for &q in task.questions() {
        for answer in task.enumerate_answers().unwrap() {
            if task.verify(q, &answer).unwrap().is_correct() {
                warm.nudge_towards(q, &answer, 1.5).unwrap();
            }
        }
    }
    let run_one = |kind: ObjectiveKind, learning_rate: f64, seed: u64| -> (f64, f64) {
        let tcfg = TrainerConfig {
            learning_rate,
            iterations: 300,
            answers_per_question: 8,
            num_minibatches: 4,
            seed,
            ..TrainerConfig::default()
        };
        let ocfg = ObjectiveConfig::default().with_kind(kind);
        let mut buf = Vec::new();
        let mut sinks = ExperimentSinks {
            metrics: &mut buf,
            rollout_dump: None,
            checkpoint_path: None,
        };
        let (last, policy) = nftlab::trainer::run_experiment(
            &task,
            warm.clone(),
            &tcfg,
            &ocfg,
            &mut sinks,
            None,
        )
        .unwrap();
        let entropy: f64 = task
            .questions()
            .iter()
            .map(|&q| policy.entropy_exact(q).unwrap())
            .sum::<f64>()
            / task.num_questions() as f64;
        (last.train_accuracy, entropy)
    };
    let mut nft_acc = 0.0;
    let mut rft_acc = 0.0;
    let mut entropy_wins = 0;
    for seed in 0..5 {
        let (acc_n, ent_n) = run_one(ObjectiveKind::Nft, 4.0, seed);
        let (acc_r, ent_r) = run_one(ObjectiveKind::Rft, 8.0, seed);
        nft_acc += acc_n / 5.0;
        rft_acc += acc_r / 5.0;
        if ent_n > ent_r {
            entropy_wins += 1;
        }
    }
    report(
        "7 directional_comparison",
        nft_acc >= rft_acc - 0.01 && entropy_wins >= 3,
        &format!(
            "nft_mean_acc={nft_acc:.4} rft_mean_acc={rft_acc:.4} margin=0.01 \
             nft_entropy_wins={entropy_wins}/5 (need >=3)"
        ),
    );
}

/// 8. Two train invocations with identical seed and config produce
/// byte-identical metric streams with the timestamp suppressed.
#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "[task]\n\
         vocab_size = 3\n\
         answer_len = 2\n\
         num_questions = 4\n\
         rule = modsum\n\
         seed = 7\n\
         \n\
         [trainer]\n\
         iterations = 25\n\
         answers_per_question = 8\n\
         num_minibatches = 2\n\
         seed = 3\n",
    )
    .unwrap();
    let mut streams = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let code = run([
            "nftlab",
            "--no-timestamp",
            "--override",
            &format!("output.metrics_path={}", out.display()),
            "train",
            cfg_path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "train run failed");
        streams.push(std::fs::read(&out).unwrap());
    }
    let identical = streams[0] == streams[1];
    report(
        "8 determinism",
        identical,
        &format!(
            "byte_identical={identical} bytes={} iterations=25",
            streams[0].len()
        ),
    );
}

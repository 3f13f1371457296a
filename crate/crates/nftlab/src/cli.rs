//! Command-line front end: train / verify / curves / compare /
//! dump-rollouts, with dotted-path config overrides.

use crate::config::RunConfig;
use crate::objectives::{
    grpo_token_grad, nft_token_grad, ObjectiveConfig, ObjectiveKind, OmegaKind,
};
use crate::oracle::{
    exact_expectation_convergence, fd_gradient, max_relative_error, onpolicy_equivalence_report,
    split_identity_residual, CheckReport,
};
use crate::policy::{FrozenSnapshot, TabularPolicy};
use crate::rng::stream_rng;
use crate::rollout::{build_batch, collect_group, dump_records, filter_groups, RolloutGroup};
use crate::taskenv::{TaskSpec, VerifierRule, VocabSpec};
use crate::trainer::{run_experiment, ExperimentSinks};
use crate::{Error, Result};
use clap::{Parser, Subcommand};
use rand::Rng;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable naming the root directory for relative output
/// paths.
pub const OUTPUT_ROOT_ENV: &str = "NFTLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "nftlab", version, about = "Tabular fine-tuning laboratory")]
pub struct Cli {
    /// Override the trainer seed from the command line.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Dotted-path config override, e.g. `objective.kind=GRPO`. Repeatable.
    #[arg(long = "override", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Suppress the timestamp header in metrics files.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a training experiment from a config file.
    Train {
        config: PathBuf,
    },
    /// Run a verification suite on randomized small tasks.
    Verify {
        /// identities | equivalence | gradcheck | theorem1 | all
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Emit the gradient-weight curve table (CSV).
    Curves {
        #[arg(long, default_value_t = 0.5)]
        r_hat: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.2)]
        eps_clip_low: f64,
        #[arg(long, default_value_t = 0.28)]
        eps_clip_high: f64,
        #[arg(long, default_value_t = 0.0)]
        min: f64,
        #[arg(long, default_value_t = 2.0)]
        max: f64,
        #[arg(long, default_value_t = 200)]
        steps: u32,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run paired-seed experiments for several objectives on one task.
    Compare {
        config: PathBuf,
        /// Comma-separated objective names, e.g. NFT,RFT,GRPO.
        #[arg(long, value_delimiter = ',')]
        objectives: Vec<String>,
        /// Comma-separated seeds; every objective runs on every seed.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
    },
    /// Collect one iteration of rollouts and print the records.
    DumpRollouts {
        config: PathBuf,
    },
}

/// Parse and dispatch, mapping errors to process exit codes:
/// 0 success, 1 runtime/check failure, 2 usage or config error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train { ref config } => {
            let cfg = load_config(config, &cli)?;
            cmd_train(&cfg, cli.no_timestamp)
        }
        Command::Verify { ref suite } => {
            let seed = cli.seed.unwrap_or(0);
            let reports = verify_suite(suite, seed)?;
            let mut all_pass = true;
            for r in &reports {
                println!("{r}");
                all_pass &= r.pass;
            }
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::Curves {
            r_hat,
            eps,
            eps_clip_low,
            eps_clip_high,
            min,
            max,
            steps,
            ref out,
        } => {
            let table = weight_curve_table(r_hat, eps, eps_clip_low, eps_clip_high, min, max, steps)?;
            match out {
                Some(path) => {
                    let path = resolve_output(path);
                    std::fs::write(&path, table).map_err(|e| Error::io(path, e))?;
                }
                None => print!("{table}"),
            }
            Ok(0)
        }
        Command::Compare {
            ref config,
            ref objectives,
            ref seeds,
        } => {
            let cfg = load_config(config, &cli)?;
            cmd_compare(&cfg, objectives, seeds)
        }
        Command::DumpRollouts { ref config } => {
            let cfg = load_config(config, &cli)?;
            cmd_dump_rollouts(&cfg)
        }
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    for spec in &cli.overrides {
        cfg.apply_override(spec)?;
    }
    if let Some(seed) = cli.seed {
        cfg.trainer.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Resolve a path against the optional output-root environment variable.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}

fn open_sink(path: &Path) -> Result<std::fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn cmd_train(cfg: &RunConfig, no_timestamp: bool) -> Result<i32> {
    let task = cfg.task.build()?;
    let initial = TabularPolicy::uniform(&task);
    let start = Instant::now();

    let mut metrics: Box<dyn Write> = match &cfg.output.metrics_path {
        Some(p) => Box::new(open_sink(&resolve_output(p))?),
        None => Box::new(std::io::stdout()),
    };
    if !no_timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(metrics, "# timestamp {now}").map_err(|e| Error::io("metrics sink", e))?;
    }
    let mut dump = match &cfg.output.rollout_dump_path {
        Some(p) => Some(open_sink(&resolve_output(p))?),
        None => None,
    };
    let checkpoint = cfg.output.checkpoint_path.as_ref().map(|p| resolve_output(p));
    let mut sinks = ExperimentSinks {
        metrics: &mut metrics,
        rollout_dump: dump.as_mut().map(|f| f as &mut dyn Write),
        checkpoint_path: checkpoint.as_deref(),
    };
    let (last, policy) = run_experiment(
        &task,
        initial,
        &cfg.trainer,
        &cfg.objective,
        &mut sinks,
        None,
    )?;
    let entropy = if task.oracle_available() {
        let sum: f64 = task
            .questions()
            .iter()
            .map(|&q| policy.entropy_exact(q))
            .sum::<Result<f64>>()?;
        Some(sum / task.num_questions() as f64)
    } else {
        None
    };
    println!(
        "final_accuracy={} final_entropy={} wall_time_s={:.3}",
        last.train_accuracy,
        entropy.map(|e| e.to_string()).unwrap_or_else(|| "n/a".into()),
        start.elapsed().as_secs_f64()
    );
    Ok(0)
}

fn cmd_compare(cfg: &RunConfig, objectives: &[String], seeds: &[u64]) -> Result<i32> {
    if objectives.len() < 2 {
        return Err(Error::config("compare needs at least 2 objectives"));
    }
    let kinds = objectives
        .iter()
        .map(|s| ObjectiveKind::parse(s))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::config("compare needs at least 1 seed"));
    }
    let task = cfg.task.build()?;
    let mut merged = String::new();
    merged.push_str("objective,seed,");
    merged.push_str(crate::trainer::MetricsRecord::CSV_HEADER);
    merged.push('\n');
    let mut summaries = Vec::new();
    for &kind in &kinds {
        let mut finals = Vec::new();
        for &seed in seeds {
            let mut tcfg = cfg.trainer.clone();
            tcfg.seed = seed;
            let ocfg = cfg.objective.clone().with_kind(kind);
            let mut buf = Vec::new();
            let mut sinks = ExperimentSinks {
                metrics: &mut buf,
                rollout_dump: None,
                checkpoint_path: None,
            };
            let (last, _) = run_experiment(
                &task,
                TabularPolicy::uniform(&task),
                &tcfg,
                &ocfg,
                &mut sinks,
                None,
            )?;
            let text = String::from_utf8(buf)
                .map_err(|_| Error::config("metrics stream was not UTF-8"))?;
            for line in text.lines().skip(1) {
                merged.push_str(&format!("{},{},{}\n", kind.name(), seed, line));
            }
            finals.push(last.train_accuracy);
        }
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let var = finals.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        summaries.push((kind, mean, var.sqrt()));
    }
    if let Some(p) = &cfg.output.metrics_path {
        let path = resolve_output(p);
        std::fs::write(&path, &merged).map_err(|e| Error::io(path, e))?;
    } else {
        print!("{merged}");
    }
    for (kind, mean, std) in summaries {
        println!("objective={} final_accuracy_mean={mean} std={std}", kind.name());
    }
    Ok(0)
}

fn cmd_dump_rollouts(cfg: &RunConfig) -> Result<i32> {
    let task = cfg.task.build()?;
    let policy = TabularPolicy::uniform(&task);
    let snapshot = FrozenSnapshot::take(&policy, 0);
    let mut groups = Vec::new();
    for &q in task.questions() {
        groups.push(collect_group(
            &snapshot,
            &task,
            q,
            cfg.trainer.answers_per_question,
            cfg.trainer.seed,
        )?);
    }
    let text = dump_records(&groups, 0);
    match &cfg.output.rollout_dump_path {
        Some(p) => {
            let path = resolve_output(p);
            std::fs::write(&path, text).map_err(|e| Error::io(path, e))?;
        }
        None => print!("{text}"),
    }
    Ok(0)
}

/// CSV table of per-token gradient weights as a function of the
/// likelihood ratio R, matching the indicator closed forms. The grid is
/// `R_i = min + (max - min) * i / steps` for i in 0..=steps; non-positive
/// R (where the positive weight 1/R blows up) is skipped.
pub fn weight_curve_table(
    r_hat: f64,
    eps: f64,
    eps_clip_low: f64,
    eps_clip_high: f64,
    min: f64,
    max: f64,
    steps: u32,
) -> Result<String> {
    if !(min < max) || steps == 0 {
        return Err(Error::config("curve grid needs min < max and steps >= 1"));
    }
    let nft_cfg = ObjectiveConfig {
        epsilon: eps,
        omega_kind: OmegaKind::SqrtRatio,
        ..ObjectiveConfig::default()
    };
    let grpo_cfg = ObjectiveConfig {
        eps_clip_low,
        eps_clip_high,
        ..ObjectiveConfig::default()
    };
    let mut out = String::from("R,nft_pos,nft_neg,grpo_pos,grpo_neg\n");
    for i in 0..=steps {
        let ratio = min + (max - min) * f64::from(i) / f64::from(steps);
        if !(ratio > 0.0) {
            continue;
        }
        let nft_pos = nft_token_grad(true, ratio, r_hat, &nft_cfg)?.coeff;
        let nft_neg = nft_token_grad(false, ratio, r_hat, &nft_cfg)?.coeff;
        let grpo_pos = grpo_token_grad(true, ratio, r_hat, &grpo_cfg, true)?.coeff;
        let grpo_neg = grpo_token_grad(false, ratio, r_hat, &grpo_cfg, true)?.coeff;
        out.push_str(&format!("{ratio},{nft_pos},{nft_neg},{grpo_pos},{grpo_neg}\n"));
    }
    Ok(out)
}

fn random_small_task(seed: u64, max_vocab: u32, max_len: u32) -> TaskSpec {
    let mut rng = stream_rng(seed, "verify-task", &[]);
    let v = rng.gen_range(2..=max_vocab);
    let l = rng.gen_range(1..=max_len);
    let n = rng.gen_range(2..=4u32);
    let vocab = VocabSpec::new(v).unwrap();
    let rule = match rng.gen_range(0..3u32) {
        0 => VerifierRule::random_modsum(vocab, n as usize, seed),
        1 => VerifierRule::random_exact(vocab, l, n as usize, seed),
        _ => VerifierRule::random_prefix(vocab, 1.min(l), n as usize, seed),
    };
    TaskSpec::new(vocab, (0..n).collect(), l, rule).unwrap()
}

/// Split-identity residual over randomized tasks and policies.
pub fn check_identities(seed: u64, trials: usize) -> Result<CheckReport> {
    let mut worst = 0.0f64;
    for t in 0..trials {
        let task = random_small_task(seed.wrapping_add(t as u64), 4, 3);
        let policy = TabularPolicy::random_dirichlet(&task, seed ^ (t as u64) << 8);
        for &q in task.questions() {
            match split_identity_residual(&policy, &task, q) {
                Ok(res) => worst = worst.max(res),
                Err(Error::DegenerateQuestion { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(CheckReport::new("split_identity", worst, 1e-12))
}

fn onpolicy_minibatch(
    seed: u64,
) -> Result<(TaskSpec, TabularPolicy, Vec<RolloutGroup>, Vec<crate::rollout::BatchUnit>)> {
    let task = random_small_task(seed, 4, 3);
    let policy = TabularPolicy::random_dirichlet(&task, seed.wrapping_mul(31).wrapping_add(7));
    let snapshot = FrozenSnapshot::take(&policy, 0);
    let mut groups = Vec::new();
    for &q in task.questions() {
        groups.push(collect_group(&snapshot, &task, q, 8, seed)?);
    }
    let groups = filter_groups(groups);
    if groups.is_empty() {
        return Err(Error::DegeneratePartition("all groups filtered".into()));
    }
    let mut rng = stream_rng(seed, "verify-batch", &[]);
    let batch = build_batch(&groups, 1, &mut rng)?;
    Ok((task, policy, groups.clone(), batch.units().to_vec()))
}

/// On-policy gradient equivalence: NFT vs GRPO and NFT vs Dr. GRPO.
pub fn check_equivalence(seed: u64, trials: usize) -> Result<Vec<CheckReport>> {
    let mut worst_grpo = 0.0f64;
    let mut worst_drgrpo = 0.0f64;
    let mut done = 0usize;
    let mut attempt = 0u64;
    while done < trials && attempt < trials as u64 * 8 {
        attempt += 1;
        let (_, policy, groups, units) = match onpolicy_minibatch(seed.wrapping_add(attempt * 977))
        {
            Ok(v) => v,
            Err(Error::DegeneratePartition(_)) => continue,
            Err(e) => return Err(e),
        };
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
        worst_grpo = worst_grpo.max(onpolicy_equivalence_report(
            &units, &groups, &policy, &nft_sqrt, &grpo,
        )?);
        worst_drgrpo = worst_drgrpo.max(onpolicy_equivalence_report(
            &units, &groups, &policy, &nft_omr, &drgrpo,
        )?);
        done += 1;
    }
    if done < trials {
        return Err(Error::InputContract(format!(
            "only {done}/{trials} usable on-policy mini-batches"
        )));
    }
    Ok(vec![
        CheckReport::new("onpolicy_nft_vs_grpo", worst_grpo, 1e-10),
        CheckReport::new("onpolicy_nft_vs_drgrpo", worst_drgrpo, 1e-10),
    ])
}

/// Margin to the nearest gradient kink for one off-policy batch: clip
/// boundaries for the clipped objectives, the clamp floor for NFT.
fn kink_margin(
    kind: ObjectiveKind,
    units: &[crate::rollout::BatchUnit],
    groups: &[RolloutGroup],
    policy: &TabularPolicy,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for unit in units {
        let group = &groups[unit.group];
        let answer = &group.answers[unit.answer];
        for (t, &tok) in answer.iter().enumerate() {
            let lp = policy.token_logprob(group.q, &answer[..t], tok)?;
            let ratio = (lp - group.old_token_logprobs[unit.answer][t]).exp();
            match kind {
                ObjectiveKind::Grpo | ObjectiveKind::DrGrpo => {
                    margin = margin
                        .min((ratio - (1.0 - cfg.eps_clip_low)).abs())
                        .min((ratio - (1.0 + cfg.eps_clip_high)).abs());
                }
                ObjectiveKind::Nft => {
                    if group.rewards[unit.answer] == 0 {
                        let inner = (1.0 - group.r_hat * ratio) / (1.0 - group.r_hat);
                        // FD only agrees with the straight-through
                        // gradient strictly above the clamp floor
                        margin = margin.min(inner - cfg.epsilon);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(margin)
}

/// Analytic-vs-finite-difference gradient agreement for every objective
/// family at slightly off-policy points away from kinks.
pub fn check_gradcheck(seed: u64, points_per_kind: usize) -> Result<Vec<CheckReport>> {
    let kinds = [
        ObjectiveKind::Nft,
        ObjectiveKind::Grpo,
        ObjectiveKind::DrGrpo,
        ObjectiveKind::Rft,
        ObjectiveKind::Pg,
        ObjectiveKind::InfoNca,
    ];
    let mut reports = Vec::new();
    for kind in kinds {
        let mut cfg = ObjectiveConfig::default().with_kind(kind);
        if kind == ObjectiveKind::Nft {
            // keep the clamp comfortably inactive at near-on-policy ratios
            cfg.epsilon = 0.25;
        }
        let mut worst = 0.0f64;
        let mut done = 0usize;
        let mut attempt = 0u64;
        while done < points_per_kind && attempt < points_per_kind as u64 * 20 {
            attempt += 1;
            let point_seed = seed
                .wrapping_add(attempt * 7919)
                .wrapping_add(kind as u64 * 104_729);
            let (_, mut policy, groups, units) = match onpolicy_minibatch(point_seed) {
                Ok(v) => v,
                Err(Error::DegeneratePartition(_)) => continue,
                Err(e) => return Err(e),
            };
            // drift off-policy with small logit noise so ratios sit near 1
            let mut rng = stream_rng(point_seed, "gradcheck-noise", &[]);
            for logit in policy.logits_mut() {
                *logit += 0.05 * (rng.gen::<f64>() - 0.5);
            }
            if kink_margin(kind, &units, &groups, &policy, &cfg)? < 1e-3 {
                continue;
            }
            let analytic =
                crate::objectives::minibatch_loss_and_grad(&units, &groups, &policy, &cfg)?.grad;
            let fd = fd_gradient(
                |p| {
                    crate::objectives::minibatch_loss_and_grad(&units, &groups, p, &cfg)
                        .map(|r| r.loss)
                },
                &policy,
                1e-5,
            )?;
            worst = worst.max(max_relative_error(&analytic, &fd));
            done += 1;
        }
        if done < points_per_kind {
            return Err(Error::InputContract(format!(
                "gradcheck {}: only {done}/{points_per_kind} usable points",
                kind.name()
            )));
        }
        reports.push(CheckReport::new(
            format!("gradcheck_{}", kind.name().to_ascii_lowercase()),
            worst,
            1e-6,
        ));
    }
    Ok(reports)
}

/// Exact-expectation convergence of the implicit-negative objective on
/// random MODSUM tasks (V=3, L=3).
pub fn check_theorem1(seed: u64, tasks: usize) -> Result<Vec<CheckReport>> {
    let mut worst_neg = 0.0f64;
    let mut worst_full = 0.0f64;
    for t in 0..tasks {
        let vocab = VocabSpec::new(3).unwrap();
        let task = TaskSpec::new(
            vocab,
            vec![0, 1, 2],
            3,
            VerifierRule::random_modsum(vocab, 3, seed.wrapping_add(t as u64)),
        )?;
        let initial = TabularPolicy::random_gaussian(&task, seed.wrapping_add(t as u64), 0.3);
        let neg = exact_expectation_convergence(&task, &initial, true, 0.5, 5000, 1e-6)?;
        let full = exact_expectation_convergence(&task, &initial, false, 0.5, 5000, 1e-6)?;
        worst_neg = worst_neg.max(*neg.kl_series.last().unwrap());
        worst_full = worst_full.max(*full.kl_series.last().unwrap());
    }
    Ok(vec![
        CheckReport::new("theorem1_negative_only_kl", worst_neg, 1e-6),
        CheckReport::new("theorem1_full_objective_kl", worst_full, 1e-6),
    ])
}

/// Run one named verification suite (or `all`).
pub fn verify_suite(suite: &str, seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    match suite {
        "identities" => reports.push(check_identities(seed, 25)?),
        "equivalence" => reports.extend(check_equivalence(seed, 20)?),
        "gradcheck" => reports.extend(check_gradcheck(seed, 5)?),
        "theorem1" => reports.extend(check_theorem1(seed, 2)?),
        "all" => {
            reports.push(check_identities(seed, 25)?);
            reports.extend(check_equivalence(seed, 20)?);
            reports.extend(check_gradcheck(seed, 5)?);
            reports.extend(check_theorem1(seed, 2)?);
        }
        other => {
            return Err(Error::config(format!(
                "unknown verify suite {other:?} (identities, equivalence, gradcheck, theorem1, all)"
            )))
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_table_prop2_point() {
        let table = weight_curve_table(0.5, 1.0, 0.2, 0.28, 0.0, 2.0, 4).unwrap();
        // R=1 row: all four weights agree at the on-policy point
        let row: Vec<&str> = table
            .lines()
            .find(|l| l.starts_with("1,"))
            .unwrap()
            .split(',')
            .collect();
        assert_eq!(row, vec!["1", "1", "-1", "1", "-1"]);
    }

    #[test]
    fn curve_table_cap_row() {
        // r_hat=0.5, eps=1, R=2: nft_pos=0.5, nft_neg=-1 (cap reached)
        let table = weight_curve_table(0.5, 1.0, 0.2, 0.28, 0.0, 4.0, 2).unwrap();
        let row: Vec<&str> = table
            .lines()
            .find(|l| l.starts_with("2,"))
            .unwrap()
            .split(',')
            .collect();
        assert_eq!(row[1], "0.5");
        assert_eq!(row[2], "-1");
        // GRPO columns clipped to zero at R=2
        assert_eq!(row[3], "0");
    }

    #[test]
    fn curve_table_skips_pole() {
        // the R=0 pole of the positive weight is skipped, not emitted as inf
        let table = weight_curve_table(0.5, 1.0, 0.2, 0.28, 0.0, 4.0, 4).unwrap();
        assert!(!table.contains("inf"));
        assert!(!table.lines().any(|l| l.starts_with("0,")));
        // header plus R in {1, 2, 3, 4}
        assert_eq!(table.lines().count(), 5);
    }

    #[test]
    fn identities_suite_passes() {
        let report = check_identities(3, 5).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn equivalence_suite_passes() {
        for r in check_equivalence(5, 4).unwrap() {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn unknown_suite_is_config_error() {
        assert!(matches!(
            verify_suite("bogus", 0),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn cli_rejects_unknown_subcommand() {
        assert_eq!(run(["nftlab", "frobnicate"]), 2);
    }
}

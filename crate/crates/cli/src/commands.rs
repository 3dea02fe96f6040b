use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pdlab_core::baselines::RulePolicy;
use pdlab_core::emfac::{
    evaluate, learner_policy, write_curve_csv, CurveRow, EvalMetrics, Learner, MechanismReport, TrainConfig, Trainer,
    Variant,
};
use pdlab_core::engine::GameConfig;
use pdlab_core::geometry::{
    nash_scenarios, write_nash_csv, write_surface_csv, zero_payoff_surface, Scenario,
};
use pdlab_core::neural::{load_checkpoint, save_checkpoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::{Algo, CommandSpec, RunManifest, MANIFEST_FILE};
use crate::{run_dir, to_json, write_file, CliError};

pub const THREADS_ENV: &str = "PD_LAB_THREADS";
const STATE_FILE: &str = "train_state.json";
const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Pins the learner variant an algorithm implies, so the manifest snapshot is self-contained.
fn resolve(command: &CommandSpec, config: &mut RunConfig) {
    let algo = match command {
        CommandSpec::Train { algo, .. } | CommandSpec::Eval { algo, .. } => *algo,
        _ => return,
    };
    match algo {
        Algo::Iac => config.train.variant = Variant::Independent,
        Algo::Mf => config.train.variant = Variant::MeanField,
        Algo::Emfac | Algo::Rule => {}
    }
}

/// Runs `command` into `out` with manifest bookkeeping.
pub fn run(command: CommandSpec, mut config: RunConfig, out: &Path) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    resolve(&command, &mut config);
    let mut manifest = RunManifest::begin(command, config);
    manifest.write(out)?;
    let outcome = execute(&manifest.command, &manifest.config, out);
    manifest.finish(&outcome);
    manifest.write(out)?;
    outcome.map(|_| manifest)
}

pub fn execute(command: &CommandSpec, config: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    match command {
        CommandSpec::NashVerify => nash_verify(config, out),
        CommandSpec::Surface => surface(config, out),
        CommandSpec::Train { algo: Algo::Rule, .. } => train_rule(config, out),
        CommandSpec::Train { resume, .. } => train(config, resume.as_deref(), out),
        CommandSpec::Eval { algo, checkpoint, episodes, trace } => {
            eval(config, *algo, checkpoint.as_deref(), *episodes, *trace, out)
        }
        CommandSpec::Ablate => ablate(config, out),
    }
}

/// Re-executes the run recorded in `manifest_path` into `out` and compares every output file
/// byte for byte. Returns the list of compared files.
pub fn rerun(manifest_path: &Path, out: &Path) -> Result<Vec<String>, CliError> {
    let original = RunManifest::read(manifest_path)?;
    let source = run_dir(manifest_path);
    if source.canonicalize().ok() == out.canonicalize().ok() {
        return Err(CliError::Config("rerun output directory must differ from the original run".into()));
    }
    let fresh = run(original.command.clone(), original.config.clone(), out)?;
    if fresh.outputs != original.outputs {
        return Err(CliError::Check(format!("output lists differ: {:?} vs {:?}", original.outputs, fresh.outputs)));
    }
    let mut differing = Vec::new();
    for name in &original.outputs {
        let a = std::fs::read(source.join(name)).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        let b = std::fs::read(out.join(name)).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        if a != b {
            differing.push(name.clone());
        }
    }
    if differing.is_empty() {
        Ok(original.outputs)
    } else {
        Err(CliError::Check(format!("outputs differ from the recorded run: {}", differing.join(", "))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashSummary {
    pub instances: usize,
    pub dt: f64,
    /// Largest `|defender_arrival − attacker_arrival|` with both players optimal.
    pub max_gap_both_optimal: f64,
    /// Instances where the deviating defender arrived earlier than the optimal one.
    pub defender_gains: usize,
    /// Instances where the deviating attacker arrived earlier than the optimal one.
    pub attacker_gains: usize,
}

fn nash_verify(config: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let p = &config.nash;
    let records = nash_scenarios(p)?;
    let mut summary =
        NashSummary { instances: p.instances, dt: p.dt, max_gap_both_optimal: 0.0, defender_gains: 0, attacker_gains: 0 };
    for rows in records.chunks(Scenario::ALL.len()) {
        let (opt, dev_d, dev_a) = (&rows[0], &rows[1], &rows[2]);
        summary.max_gap_both_optimal = summary.max_gap_both_optimal.max((opt.defender_arrival - opt.attacker_arrival).abs());
        if dev_d.defender_arrival < opt.defender_arrival - 1e-9 {
            summary.defender_gains += 1;
        }
        if dev_a.attacker_arrival < opt.attacker_arrival - 1e-9 {
            summary.attacker_gains += 1;
        }
    }
    let mut csv = Vec::new();
    write_nash_csv(&records, &mut csv)?;
    write_file(&out.join("nash.csv"), csv)?;
    write_file(&out.join("nash_summary.json"), to_json(&summary))?;
    eprintln!(
        "nash-verify: {} instances, max optimal gap {:.3e}, defender gains {}, attacker gains {}",
        summary.instances, summary.max_gap_both_optimal, summary.defender_gains, summary.attacker_gains
    );
    Ok(vec!["nash.csv".into(), "nash_summary.json".into()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub points: usize,
    pub omitted: usize,
    pub max_abs_payoff: f64,
    pub closure_gap: f64,
    /// Share of points whose payoff is positive 1% inside and negative 1% outside.
    pub sign_flip_fraction: f64,
}

fn surface(config: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let s = &config.surface;
    let d = s.defender();
    let surf = zero_payoff_surface(d, s.v, &s.params())?;
    let summary = SurfaceSummary {
        points: surf.points.len(),
        omitted: surf.omitted.len(),
        max_abs_payoff: surf.points.iter().map(|p| p.payoff.abs()).fold(0.0, f64::max),
        closure_gap: surf.closure_gap,
        sign_flip_fraction: surf.sign_flip_fraction(0.01, s.radius),
    };
    let mut csv = Vec::new();
    write_surface_csv(&surf, &mut csv)?;
    write_file(&out.join("surface.csv"), csv)?;
    let mut planar = String::from("theta,radius\n");
    for (t, r) in &surf.planar {
        planar.push_str(&format!("{t},{r}\n"));
    }
    write_file(&out.join("planar.csv"), planar)?;
    write_file(&out.join("surface_summary.json"), to_json(&summary))?;
    eprintln!(
        "surface: {} points, {} omitted, max |P| {:.3e}, closure gap {:.3e}",
        summary.points, summary.omitted, summary.max_abs_payoff, summary.closure_gap
    );
    Ok(vec!["surface.csv".into(), "planar.csv".into(), "surface_summary.json".into()])
}

fn eval_row(step: usize, m: &EvalMetrics) -> CurveRow {
    CurveRow {
        step,
        mean_reward: m.mean_reward,
        success_rate: m.success_rate,
        collision_rate: m.collision_rate,
        l1: None,
        l2: None,
        critic_loss: None,
    }
}

/// The scripted baseline has nothing to train; its curve is a single evaluation.
fn train_rule(config: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let t = &config.train;
    let mut policy = RulePolicy::new(t.seed);
    let m = evaluate(&config.game, t.eval_episodes, t.seed, &mut |w| policy.actions(w), None)?;
    write_curve_csv(&out.join("curve.csv"), &[eval_row(0, &m)])?;
    write_file(&out.join("metrics.json"), to_json(&m))?;
    Ok(vec!["curve.csv".into(), "metrics.json".into()])
}

fn network_shapes(learner: &Learner) -> BTreeMap<String, Vec<usize>> {
    learner.checkpoint().networks.into_iter().map(|(name, net)| (name, net.dims)).collect()
}

fn write_learner(learner: &Learner, dir: &Path) -> Result<(), CliError> {
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &learner.checkpoint())?;
    write_file(&dir.join("networks.json"), to_json(&network_shapes(learner)))
}

/// Trains to `total_steps`, saving the curve, checkpoint and resumable state after every
/// evaluation. A divergence leaves `divergence.json` next to the last good state.
fn drive(mut trainer: Trainer, dir: &Path, label: &str) -> Result<Trainer, CliError> {
    let total = trainer.config.total_steps;
    let every = trainer.config.eval_every;
    loop {
        let target = ((trainer.step / every + 1) * every).min(total);
        let result = trainer.run(target, &mut |r| {
            eprintln!(
                "{label} step {:>7}  reward {:>9.4}  success {:.3}  collision {:.4}",
                r.step, r.mean_reward, r.success_rate, r.collision_rate
            )
        });
        write_curve_csv(&dir.join("curve.csv"), &trainer.curve)?;
        if let Err(e) = result {
            let e = CliError::from(e);
            if let CliError::Divergence { step, detail } = &e {
                #[derive(Serialize)]
                struct Divergence<'a> {
                    step: usize,
                    detail: &'a str,
                }
                write_file(&dir.join("divergence.json"), to_json(&Divergence { step: *step, detail }))?;
            }
            return Err(e);
        }
        trainer.save_state(&dir.join(STATE_FILE))?;
        write_learner(&trainer.learner, dir)?;
        if trainer.step >= total {
            return Ok(trainer);
        }
    }
}

const LEARNER_OUTPUTS: [&str; 5] = ["curve.csv", CHECKPOINT_FILE, "networks.json", STATE_FILE, "metrics.json"];

fn train(config: &RunConfig, resume: Option<&Path>, out: &Path) -> Result<Vec<String>, CliError> {
    let trainer = match resume {
        Some(from) => {
            let mut t = Trainer::load_state(&run_dir(from).join(STATE_FILE))?;
            t.config.total_steps = config.train.total_steps;
            if t.config != config.train || t.game != config.game {
                return Err(CliError::Config("resume state was produced with a different game or train config".into()));
            }
            t
        }
        None => Trainer::new(&config.game, &config.train)?,
    };
    let trainer = drive(trainer, out, config.train.variant.name())?;
    let last = trainer.curve.last().expect("run records at least one row");
    write_file(&out.join("metrics.json"), to_json(last))?;
    Ok(LEARNER_OUTPUTS.iter().map(|s| s.to_string()).collect())
}

fn eval(
    config: &RunConfig,
    algo: Algo,
    checkpoint: Option<&Path>,
    episodes: usize,
    trace: bool,
    out: &Path,
) -> Result<Vec<String>, CliError> {
    let seed = config.train.seed;
    let mut trace_file = if trace {
        Some(BufWriter::new(File::create(out.join("trace.jsonl"))?))
    } else {
        None
    };
    let sink = trace_file.as_mut().map(|w| w as &mut dyn Write);
    let m = if algo == Algo::Rule {
        let mut policy = RulePolicy::new(seed);
        evaluate(&config.game, episodes, seed, &mut |w| policy.actions(w), sink)?
    } else {
        let path = checkpoint.ok_or_else(|| CliError::Config("eval needs --checkpoint for learned policies".into()))?;
        let file = if path.is_dir() { path.join(CHECKPOINT_FILE) } else { path.to_path_buf() };
        let ck = load_checkpoint(&file).map_err(|e| CliError::Io(e.to_string()))?;
        let learner = Learner::from_checkpoint(&config.game, &config.train, ck)?;
        let mut policy = learner_policy(&learner);
        evaluate(&config.game, episodes, seed, &mut policy, sink)?
    };
    if let Some(mut w) = trace_file {
        w.flush()?;
    }
    write_file(&out.join("metrics.json"), to_json(&m))?;
    let csv = format!(
        "episodes,mean_reward,success_rate,collision_rate,captures,attackers,collisions,pair_steps\n{},{},{},{},{},{},{},{}\n",
        m.episodes, m.mean_reward, m.success_rate, m.collision_rate, m.captures, m.attackers, m.collisions, m.pair_steps
    );
    write_file(&out.join("metrics.csv"), csv)?;
    eprintln!(
        "eval: {} episodes, reward {:.4}, success {:.3}, collision {:.4}",
        m.episodes, m.mean_reward, m.success_rate, m.collision_rate
    );
    let mut outputs = vec!["metrics.json".to_string(), "metrics.csv".to_string()];
    if trace {
        outputs.push("trace.jsonl".into());
    }
    Ok(outputs)
}

/// Whether `report` shows exactly the pathway changes `variant` asks for.
pub fn mechanism_matches(variant: Variant, report: &MechanismReport) -> bool {
    report.state_weights_all_one == !variant.state_attention()
        && report.action_weights_uniform == !variant.action_attention()
        && report.raw_actions == !variant.embedded()
}

fn worker_threads() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV}={v}: expected a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

struct AblationResult {
    variant: Variant,
    last: CurveRow,
    report: MechanismReport,
}

fn ablate_one(game: &GameConfig, train: &TrainConfig, out: &Path) -> Result<AblationResult, CliError> {
    let variant = train.variant;
    let dir = out.join(variant.name());
    std::fs::create_dir_all(&dir)?;
    let trainer = drive(Trainer::new(game, train)?, &dir, variant.name())?;
    let batch = trainer.probe_batch(train.batch_size).ok_or_else(|| {
        CliError::Config(format!("{}: too few steps to fill one batch for the mechanism check", variant.name()))
    })?;
    let report = trainer.learner.mechanism_report(&batch);
    let last = trainer.curve.last().expect("run records at least one row").clone();
    write_file(&dir.join("metrics.json"), to_json(&last))?;
    write_file(&dir.join("mechanism.json"), to_json(&report))?;
    Ok(AblationResult { variant, last, report })
}

fn ablate(config: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    let results: Vec<Result<AblationResult, CliError>> = pool.install(|| {
        Variant::ABLATIONS
            .par_iter()
            .map(|&v| ablate_one(&config.game, &TrainConfig { variant: v, ..config.train.clone() }, out))
            .collect()
    });
    let mut csv = String::from(
        "variant,step,mean_reward,success_rate,collision_rate,state_weights_all_one,action_weights_uniform,raw_actions,mechanism_ok\n",
    );
    let mut outputs = Vec::new();
    let mut wrong = Vec::new();
    for r in results {
        let r = r?;
        let ok = mechanism_matches(r.variant, &r.report);
        if !ok {
            wrong.push(r.variant.name());
        }
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.variant.name(),
            r.last.step,
            r.last.mean_reward,
            r.last.success_rate,
            r.last.collision_rate,
            r.report.state_weights_all_one,
            r.report.action_weights_uniform,
            r.report.raw_actions,
            ok
        ));
        for f in LEARNER_OUTPUTS.iter().chain(&["mechanism.json"]) {
            outputs.push(format!("{}/{f}", r.variant.name()));
        }
    }
    write_file(&out.join("ablation.csv"), csv)?;
    outputs.insert(0, "ablation.csv".into());
    if wrong.is_empty() {
        Ok(outputs)
    } else {
        Err(CliError::Check(format!("mechanism check failed for {}", wrong.join(", "))))
    }
}

/// Base table for commands that read an earlier run: that run's config snapshot.
pub fn snapshot_table(run: &Path) -> Result<Option<toml::Table>, CliError> {
    let path: PathBuf = run_dir(run).join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(RunManifest::read(&path)?.config.to_table()))
}

//! Experiment commands. Each `cmd_*` function writes its artifacts and a
//! manifest into the output directory; the plain functions return results in
//! memory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use trajrl::controller::LinearGaussianController;
use trajrl::cost::{
    expand_cost, imitation_cost, manipulation_cost, pose_cost, weighted_pickup_cost, TaskCost,
};
use trajrl::dynamics::LinearGaussianDynamics;
use trajrl::env::{
    canonical_pickup_plan, generate_demo, linear_env, Demonstration, Environment, LinearEnv, PickupConfig,
    PickupEnv,
};
use trajrl::generalization::{
    evaluate_sweep, generate_cloning_data, train_mlp, uniform_conditions, LibraryEntry, LibraryFile, LocalPolicyLibrary,
    MlpFile, MlpPolicy, MlpTrainConfig, MlpTraining, ObservationMode, ObservationSpec, SweepCondition, SweepPolicy,
    SweepResult, SweepSettings,
};
use trajrl::json::format_f64;
use trajrl::learner::{train, LearningCurve, TrainOutcome};
use trajrl::linalg::{Mat, Vector};
use trajrl::lqg::backward_pass;
use trajrl::oracle::solve_riccati;
use trajrl::rng::derive_seed;
use trajrl::trajectory::{rollout_mean, trajectory_total_cost, Trajectory};

use crate::artifacts::{read_json, RunWriter};
use crate::config::{CostBlock, EnvBlock, ExperimentConfig};
use crate::error::{HarnessError, Result};

pub fn make_env(block: &EnvBlock) -> Box<dyn Environment> {
    match block {
        EnvBlock::Linear(c) => Box::new(linear_env(c.clone())),
        EnvBlock::Arm(c) => Box::new(trajrl::env::ArmEnv::new(c.clone())),
        EnvBlock::Pickup(c) => Box::new(PickupEnv::new(c.clone())),
    }
}

fn pickup_config(cfg: &ExperimentConfig) -> Result<&PickupConfig> {
    match &cfg.env {
        EnvBlock::Pickup(c) => Ok(c),
        _ => Err(HarnessError::Config("env: this command needs the pickup environment".into())),
    }
}

fn uses_demo(cfg: &ExperimentConfig) -> bool {
    cfg.demo.is_some() || matches!(cfg.cost, Some(CostBlock::Imitation { .. }))
}

/// Scripted teleoperated demonstration at the pickup environment's own angle.
pub fn make_demo(cfg: &ExperimentConfig, env: &PickupEnv, index: u64) -> Result<Demonstration> {
    let mut plan = canonical_pickup_plan(env, env.config().angle);
    plan.tremor = cfg.demo.as_ref().map_or(0.0, |d| d.tremor);
    generate_demo(env, &plan, derive_seed(cfg.seed, "demo", index)).map_err(|e| match e {
        trajrl::Error::DemoFailed { .. } => {
            HarnessError::Training(format!("demonstration at {:.1} deg failed: {e}", env.config().angle.to_degrees()))
        }
        e => e.into(),
    })
}

fn vec_or(v: &Option<Vec<f64>>, default: Vector) -> Vector {
    v.as_ref().map(|v| Vector::from_vec(v.clone())).unwrap_or(default)
}

pub fn make_cost(cfg: &ExperimentConfig, env: &dyn Environment, demo: Option<&Demonstration>) -> Result<TaskCost> {
    let block = cfg.cost.clone().unwrap_or(CostBlock::Pose { target: None });
    let layout = env.layout();
    let nq = layout.q.len();
    let x0 = env.nominal_state();
    let nominal_q = x0.rows(layout.q.start, nq).into_owned();
    let lifted = || -> Vector {
        match &layout.obj_pos {
            Some(r) => {
                let mut p = x0.rows(r.start, r.len()).into_owned();
                let last = p.len() - 1;
                p[last] = 0.12;
                p
            }
            None => Vector::zeros(0),
        }
    };
    let rot_zero = || Vector::zeros(layout.obj_rot.as_ref().map_or(0, |r| r.len()));
    let cost = match &block {
        CostBlock::Pose { target } => {
            let default = match &cfg.env {
                EnvBlock::Arm(c) => Vector::from_vec(c.target_q.to_vec()),
                _ => Vector::zeros(nq),
            };
            pose_cost(env, &vec_or(target, default))
        }
        CostBlock::Manipulation { joint_target, position_target, rotation_target } => manipulation_cost(
            env,
            &vec_or(joint_target, nominal_q),
            &vec_or(position_target, lifted()),
            &vec_or(rotation_target, rot_zero()),
        ),
        CostBlock::WeightedPickup { weights, joint_target, position_target, rotation_target } => weighted_pickup_cost(
            env,
            *weights,
            &vec_or(joint_target, nominal_q),
            &vec_or(position_target, lifted()),
            &vec_or(rotation_target, rot_zero()),
        ),
        CostBlock::Imitation { lift_height } => {
            let demo = demo.ok_or_else(|| HarnessError::Config("cost: the imitation cost needs a demonstration".into()))?;
            imitation_cost(env, &demo.trajectory, *lift_height)
        }
    };
    cost.map_err(|e| HarnessError::Config(format!("cost: {e}")))
}

/// Task cost used to score sweeps: the manipulation cost with default targets.
fn sweep_cost(env: &dyn Environment) -> Result<TaskCost> {
    let layout = env.layout();
    let x0 = env.nominal_state();
    let (Some(pos), Some(rot)) = (&layout.obj_pos, &layout.obj_rot) else {
        return Err(HarnessError::Config("env: sweeps need an environment with an object".into()));
    };
    let mut p = x0.rows(pos.start, pos.len()).into_owned();
    let last = p.len() - 1;
    p[last] = 0.12;
    Ok(manipulation_cost(env, &x0.rows(layout.q.start, layout.q.len()).into_owned(), &p, &Vector::zeros(rot.len()))?)
}

fn learner_config(cfg: &ExperimentConfig, label: &str, index: u64) -> trajrl::learner::LearnerConfig {
    let mut l = cfg.learner.clone();
    l.seed = derive_seed(cfg.seed, label, index);
    l
}

// ---------------------------------------------------------------- train-local

pub fn train_local(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let env = make_env(&cfg.env);
    let demo = if uses_demo(cfg) {
        let env = PickupEnv::new(pickup_config(cfg)?.clone());
        Some(make_demo(cfg, &env, 0)?)
    } else {
        None
    };
    let cost = make_cost(cfg, env.as_ref(), demo.as_ref())?;
    Ok(train(env.as_ref(), &cost, &learner_config(cfg, "learner", 0), demo.as_ref())?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDiagnostics {
    pub aborted: Option<String>,
    pub stalled_iterations: Vec<usize>,
    pub final_mean_law_success: bool,
    pub final_mean_law_cost: f64,
}

pub fn cmd_train_local(cfg: &ExperimentConfig, out: &Path) -> Result<TrainOutcome> {
    let outcome = train_local(cfg)?;
    let mut run = RunWriter::create(out)?;
    let env = make_env(&cfg.env);
    let (success, cost) = match rollout_mean(env.as_ref(), &outcome.controller, &env.nominal_state()) {
        Ok(mut t) => {
            let demo = if uses_demo(cfg) { Some(make_demo(cfg, &PickupEnv::new(pickup_config(cfg)?.clone()), 0)?) } else { None };
            let c = make_cost(cfg, env.as_ref(), demo.as_ref())?;
            (env.is_success(&t), trajectory_total_cost(&mut t, &c)?)
        }
        Err(_) => (false, f64::INFINITY),
    };
    let mut file = outcome.controller.to_file();
    let diag = TrainDiagnostics {
        aborted: outcome.aborted.clone(),
        stalled_iterations: outcome.stalled_iterations.clone(),
        final_mean_law_success: success,
        final_mean_law_cost: cost,
    };
    file.diagnostics = Some(serde_json::to_value(&diag).expect("diagnostics serialize"));
    run.write_json("controller.json", &file)?;
    run.write("curve.csv", &outcome.curve.to_csv())?;
    run.write_json("curve.json", &outcome.curve)?;
    run.finish("train-local", cfg.seed, cfg.to_value())?;
    if let Some(reason) = &outcome.aborted {
        return Err(HarnessError::Training(reason.clone()));
    }
    Ok(outcome)
}

// ------------------------------------------------------------- build-library

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryRow {
    pub condition: usize,
    pub angle_deg: f64,
    pub final_success: bool,
    pub final_cost: f64,
}

pub fn build_library(cfg: &ExperimentConfig) -> Result<(LocalPolicyLibrary, Vec<LibraryRow>)> {
    let base = pickup_config(cfg)?;
    let mut learner = cfg.learner.clone();
    learner.iterations = cfg.library.iterations;
    let mut demos = Vec::new();
    let mut failed = Vec::new();
    for (i, &deg) in cfg.library.conditions_deg.iter().enumerate() {
        let env = PickupEnv::new(PickupConfig { angle: deg.to_radians(), ..base.clone() });
        match make_demo(cfg, &env, i as u64) {
            Ok(d) => demos.push((env, d)),
            Err(HarnessError::Training(_)) => failed.push(format!("{deg}")),
            Err(e) => return Err(e),
        }
    }
    if !failed.is_empty() {
        return Err(HarnessError::Training(format!("demonstrations failed at conditions [{}] deg", failed.join(", "))));
    }
    let mut lib = LocalPolicyLibrary::new(1)?;
    let mut rows = Vec::new();
    for (i, ((env, demo), &deg)) in demos.iter().zip(&cfg.library.conditions_deg).enumerate() {
        let cost = imitation_cost(env, &demo.trajectory, cfg.library.lift_height)?;
        learner.seed = derive_seed(cfg.seed, "library", i as u64);
        let outcome = train(env, &cost, &learner, Some(demo))?;
        if let Some(reason) = outcome.aborted {
            return Err(HarnessError::Training(format!("condition {deg} deg: {reason}")));
        }
        let x0 = demo.trajectory.state(0).clone();
        let (final_success, final_cost) = match rollout_mean(env, &outcome.controller, &x0) {
            Ok(mut t) => (env.is_success(&t), trajectory_total_cost(&mut t, &cost)?),
            Err(_) => (false, f64::INFINITY),
        };
        rows.push(LibraryRow { condition: i, angle_deg: deg, final_success, final_cost });
        lib.push(LibraryEntry { key: Vector::from_element(1, deg.to_radians()), initial_state: x0, controller: outcome.controller })?;
    }
    Ok((lib, rows))
}

pub fn cmd_build_library(cfg: &ExperimentConfig, out: &Path) -> Result<LocalPolicyLibrary> {
    let (lib, rows) = build_library(cfg)?;
    let mut run = RunWriter::create(out)?;
    run.write_json("library.json", &lib.to_file())?;
    let mut csv = String::from("condition,angle_deg,final_success,final_cost\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.condition, format_f64(r.angle_deg), r.final_success as u8, format_f64(r.final_cost)));
    }
    run.write("library.csv", &csv)?;
    run.finish("build-library", cfg.seed, cfg.to_value())?;
    Ok(lib)
}

// ------------------------------------------------------------------- distill

/// A trained network together with the observation it expects.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub observation: ObservationMode,
    pub network: MlpFile,
}

pub fn distill(cfg: &ExperimentConfig, lib: &LocalPolicyLibrary) -> Result<(MlpTraining, ObservationSpec, usize)> {
    let env = make_env(&cfg.env);
    let d = &cfg.distill;
    let spec = ObservationSpec::new(d.observation, env.as_ref())
        .map_err(|e| HarnessError::Config(format!("distill.observation: {e}")))?;
    let lib = match &d.entries {
        Some(keep) => lib.subset(keep).map_err(|e| HarnessError::Config(format!("distill.entries: {e}")))?,
        None => lib.clone(),
    };
    let data = generate_cloning_data(&lib, env.as_ref(), &spec, d.samples_per_policy, d.noise_scale, derive_seed(cfg.seed, "distill-data", 0))?;
    let train_cfg = MlpTrainConfig {
        hidden_layers: d.hidden_layers,
        width: d.width,
        epochs: d.epochs,
        batch: d.batch,
        learning_rate: d.learning_rate,
        momentum: d.momentum,
        seed: derive_seed(cfg.seed, "distill-mlp", 0),
    };
    let training = train_mlp(&data, &train_cfg).map_err(|e| match e {
        e @ trajrl::Error::MlpDiverged { .. } => HarnessError::Training(e.to_string()),
        e => e.into(),
    })?;
    Ok((training, spec, data.len()))
}

fn library_path(explicit: &Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out.join("library.json"))
}

pub fn load_library(path: &Path) -> Result<LocalPolicyLibrary> {
    let file: LibraryFile = read_json(path)?;
    Ok(LocalPolicyLibrary::from_file(&file)?)
}

pub fn cmd_distill(cfg: &ExperimentConfig, out: &Path) -> Result<MlpPolicy> {
    let lib_path = library_path(&cfg.distill.library, out);
    let lib = load_library(&lib_path)?;
    let (training, spec, pairs) = distill(cfg, &lib)?;
    let mut run = RunWriter::create(out)?;
    run.record_input(&lib_path)?;
    let name = format!("policy_{}.json", mode_name(spec.mode()));
    run.write_json(&name, &PolicyFile { observation: spec.mode(), network: training.policy.to_file() })?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in training.losses.iter().enumerate() {
        csv.push_str(&format!("{e},{}\n", format_f64(*l)));
    }
    run.write(&format!("loss_{}.csv", mode_name(spec.mode())), &csv)?;
    let stats = serde_json::json!({"pairs": pairs, "final_loss": training.losses.last().copied()});
    run.write_json(&format!("distill_{}.json", mode_name(spec.mode())), &stats)?;
    run.finish("distill", cfg.seed, cfg.to_value())?;
    Ok(training.policy)
}

fn mode_name(mode: ObservationMode) -> &'static str {
    match mode {
        ObservationMode::Full => "full",
        ObservationMode::PartialTouch => "partial_touch",
        ObservationMode::Proprioceptive => "proprioceptive",
    }
}

// ------------------------------------------------------------------ evaluate

pub fn sweep_conditions(cfg: &ExperimentConfig) -> Vec<SweepCondition> {
    let e = &cfg.evaluate;
    uniform_conditions(e.range_deg[0].to_radians(), e.range_deg[1].to_radians(), e.conditions)
}

pub fn sweep_settings(cfg: &ExperimentConfig, label: &str) -> SweepSettings {
    SweepSettings {
        trials_per_condition: cfg.evaluate.trials_per_condition,
        action_noise: cfg.evaluate.action_noise,
        seed: derive_seed(cfg.seed, label, 0),
        reset: cfg.evaluate.reset,
    }
}

pub enum NamedPolicy<'a> {
    Nearest(&'a LocalPolicyLibrary),
    Local(usize, &'a LinearGaussianController),
    Network(String, &'a MlpPolicy, &'a ObservationSpec),
}

impl NamedPolicy<'_> {
    pub fn name(&self) -> String {
        match self {
            NamedPolicy::Nearest(_) => "nearest".into(),
            NamedPolicy::Local(i, _) => format!("local_{i}"),
            NamedPolicy::Network(n, _, _) => n.clone(),
        }
    }

    fn sweep_policy(&self) -> SweepPolicy<'_> {
        match self {
            NamedPolicy::Nearest(lib) => SweepPolicy::Nearest(lib),
            NamedPolicy::Local(_, c) => SweepPolicy::Single(c),
            NamedPolicy::Network(_, p, s) => SweepPolicy::Mlp { policy: p, spec: s },
        }
    }
}

/// Sweep `policy` over the configured random-angle conditions. Every policy
/// sees the same trial keys.
pub fn sweep(cfg: &ExperimentConfig, policy: &NamedPolicy<'_>) -> Result<SweepResult> {
    let env = make_env(&cfg.env);
    let cost = sweep_cost(env.as_ref())?;
    let mut settings = sweep_settings(cfg, "sweep");
    if !matches!(policy, NamedPolicy::Nearest(_)) {
        settings.reset = trajrl::generalization::ResetMode::Nominal;
    }
    Ok(evaluate_sweep(policy.sweep_policy(), env.as_ref(), &cost, &sweep_conditions(cfg), &settings)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub overall: f64,
    pub per_condition: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub conditions_deg: Vec<f64>,
    pub trials_per_condition: usize,
    pub policies: Vec<PolicySummary>,
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<EvaluationSummary> {
    let lib_path = library_path(&cfg.evaluate.library, out);
    let lib = load_library(&lib_path)?;
    let env = make_env(&cfg.env);
    let mut networks = Vec::new();
    for path in &cfg.evaluate.networks {
        let file: PolicyFile = read_json(path)?;
        let spec = ObservationSpec::new(file.observation, env.as_ref())?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "network".into());
        networks.push((name, MlpPolicy::from_file(&file.network)?, spec));
    }
    let mut policies = vec![NamedPolicy::Nearest(&lib)];
    if cfg.evaluate.single_policies {
        policies.extend(lib.entries().iter().enumerate().map(|(i, e)| NamedPolicy::Local(i, &e.controller)));
    }
    policies.extend(networks.iter().map(|(n, p, s)| NamedPolicy::Network(n.clone(), p, s)));

    let mut run = RunWriter::create(out)?;
    run.record_input(&lib_path)?;
    for path in &cfg.evaluate.networks {
        run.record_input(path)?;
    }
    let mut summary = EvaluationSummary {
        conditions_deg: sweep_conditions(cfg).iter().map(|c| c.key[0].to_degrees()).collect(),
        trials_per_condition: cfg.evaluate.trials_per_condition,
        policies: Vec::new(),
    };
    for p in &policies {
        let result = sweep(cfg, p)?;
        run.write(&format!("sweep_{}.csv", p.name()), &result.to_csv())?;
        summary.policies.push(PolicySummary { policy: p.name(), overall: result.overall_rate(), per_condition: result.condition_rates() });
    }
    run.write("cross_validation.csv", &cross_validation(cfg, &lib, &policies, &summary)?)?;
    run.write_json("summary.json", &summary)?;
    run.finish("evaluate", cfg.seed, cfg.to_value())?;
    for p in &summary.policies {
        println!("{:<24} {:.3}", p.policy, p.overall);
    }
    Ok(summary)
}

/// Success of every policy at every library condition (exact angle), plus
/// the random-condition sweep rate.
fn cross_validation(
    cfg: &ExperimentConfig,
    lib: &LocalPolicyLibrary,
    policies: &[NamedPolicy<'_>],
    summary: &EvaluationSummary,
) -> Result<String> {
    let env = make_env(&cfg.env);
    let cost = sweep_cost(env.as_ref())?;
    let conditions: Vec<SweepCondition> =
        lib.entries().iter().map(|e| SweepCondition { key: e.key.clone(), jitter: Vector::zeros(e.key.len()) }).collect();
    let mut settings = sweep_settings(cfg, "cross-validation");
    if settings.action_noise == 0.0 {
        settings.trials_per_condition = 1;
    }
    let mut csv = String::from("policy");
    for e in lib.entries() {
        csv.push_str(&format!(",deg_{:.1}", e.key[0].to_degrees()));
    }
    csv.push_str(",random\n");
    for (p, s) in policies.iter().zip(&summary.policies) {
        let mut st = settings.clone();
        if !matches!(p, NamedPolicy::Nearest(_)) {
            st.reset = trajrl::generalization::ResetMode::Nominal;
        }
        let r = evaluate_sweep(p.sweep_policy(), env.as_ref(), &cost, &conditions, &st)?;
        csv.push_str(&p.name());
        for rate in r.condition_rates() {
            csv.push_str(&format!(",{}", format_f64(rate)));
        }
        csv.push_str(&format!(",{}\n", format_f64(s.overall)));
    }
    Ok(csv)
}

// -------------------------------------------------------------------- oracle

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleReport {
    pub max_gain_delta: f64,
    pub max_offset_delta: f64,
    pub oracle_cost: f64,
    pub solver_cost: f64,
    pub cost_delta_relative: f64,
    pub trained_model_cost: Option<f64>,
    pub trained_delta_relative: Option<f64>,
    pub passed: bool,
}

fn linear_setup(cfg: &ExperimentConfig) -> Result<(LinearEnv, TaskCost)> {
    let EnvBlock::Linear(c) = &cfg.env else {
        return Err(HarnessError::Config("env: the Riccati oracle needs the linear environment".into()));
    };
    let env = linear_env(c.clone());
    let cost = make_cost(cfg, &env, None)?;
    Ok((env, cost))
}

/// Riccati oracle versus the maximum-entropy backward pass on the true
/// dynamics, and optionally versus a full training run.
pub fn oracle_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let (env, cost) = linear_setup(cfg)?;
    let (t, dx, du) = (env.horizon(), env.state_dim(), env.action_dim());
    let zero = LinearGaussianController::zero_mean(t, dx, du, 1.0)?;
    let probe = rollout_mean(&env, &zero, &env.nominal_state())?;
    let expansion = expand_cost(&cost, std::slice::from_ref(&probe))?;
    let model = env.oracle_model();
    let riccati = solve_riccati(model, &expansion)?;
    let dynamics = LinearGaussianDynamics::time_invariant(&model.a, &model.b, &model.c, &Mat::zeros(dx, dx), t);
    let solved = backward_pass(&dynamics, &expansion, None, 1.0)?;
    let mut max_gain_delta: f64 = 0.0;
    let mut max_offset_delta: f64 = 0.0;
    for s in 0..t {
        max_gain_delta = max_gain_delta.max((solved.controller.gain(s) - &riccati.gains[s]).amax());
        max_offset_delta = max_offset_delta.max((solved.controller.offset(s) - &riccati.offsets[s]).amax());
    }
    let x0 = env.nominal_state();
    let oracle_cost = riccati.value(0, &x0);
    let mut traj: Trajectory = rollout_mean(&env, &solved.controller, &x0)?;
    let solver_cost = trajectory_total_cost(&mut traj, &cost)?;
    let cost_delta_relative = (solver_cost - oracle_cost).abs() / oracle_cost.abs().max(f64::MIN_POSITIVE);
    let o = &cfg.oracle;
    let mut passed = max_gain_delta < o.gain_tolerance && cost_delta_relative < o.cost_tolerance;
    let (mut trained_model_cost, mut trained_delta_relative) = (None, None);
    if o.train {
        let outcome = train(&env, &cost, &learner_config(cfg, "learner", 0), None)?;
        if let Some(reason) = outcome.aborted {
            return Err(HarnessError::Training(reason));
        }
        let last = outcome.curve.rows.last().map(|r| r.model_cost).unwrap_or(f64::INFINITY);
        let delta = (last - oracle_cost) / oracle_cost.abs().max(f64::MIN_POSITIVE);
        passed &= delta < o.trained_cost_tolerance;
        trained_model_cost = Some(last);
        trained_delta_relative = Some(delta);
    }
    Ok(OracleReport {
        max_gain_delta,
        max_offset_delta,
        oracle_cost,
        solver_cost,
        cost_delta_relative,
        trained_model_cost,
        trained_delta_relative,
        passed,
    })
}

pub fn cmd_oracle(cfg: &ExperimentConfig, out: &Path) -> Result<OracleReport> {
    let report = oracle_report(cfg)?;
    let mut run = RunWriter::create(out)?;
    run.write_json("oracle.json", &report)?;
    run.finish("oracle", cfg.seed, cfg.to_value())?;
    println!(
        "max |dK| {:.3e}  cost delta {:.3e}  trained delta {}",
        report.max_gain_delta,
        report.cost_delta_relative,
        report.trained_delta_relative.map_or("-".to_string(), |d| format!("{d:.4}"))
    );
    if !report.passed {
        return Err(HarnessError::Gate("solver deviates from the Riccati oracle beyond the configured tolerances".into()));
    }
    Ok(report)
}

// ------------------------------------------------------------- export-curves

pub fn cmd_export_curves(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let runs = if cfg.export.runs.is_empty() { vec![out.to_path_buf()] } else { cfg.export.runs.clone() };
    let mut run = RunWriter::create(out)?;
    let mut csv = String::from("run,iteration,mean_cost,model_cost,prev_model_cost,kl,eta,dual_iters,stalled,successes,robust,diverged\n");
    for dir in &runs {
        let path = dir.join("curve.json");
        let curve: LearningCurve = read_json(&path)?;
        run.record_input(&path)?;
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for r in &curve.rows {
            csv.push_str(&format!(
                "{name},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.iteration,
                format_f64(r.mean_cost),
                format_f64(r.model_cost),
                format_f64(r.prev_model_cost),
                format_f64(r.kl),
                format_f64(r.eta),
                r.dual_iters,
                r.stalled as u8,
                r.successes,
                r.robust as u8,
                r.diverged
            ));
        }
    }
    run.write("curves.csv", &csv)?;
    run.finish("export-curves", cfg.seed, cfg.to_value())?;
    Ok(csv)
}

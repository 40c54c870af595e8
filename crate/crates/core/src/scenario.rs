//! JSON-configured runs: simulation, convergence and effectivity studies, the adaptive
//! loop and the oracle self-checks. Every run writes its CSV artifacts and a
//! `manifest.json` into the output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{adapt_loop, estimate, AdaptStatus};
use crate::harness::{
    convergence_study, effectivity_study, snapshot_errors, DtRule, ManufacturedProblem, SnapshotProblem, Solution,
};
use crate::mesh::write_dump;
use crate::oracle::{self, OracleCheck};
use crate::twoscale::{
    assemble_system, initial_state, CouplingMode, Forcing, ModelParams, NoForcing, ReactionTerm, Scheme, Stepper,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[default]
    Simulate,
    Converge,
    Adapt,
    Effectivity,
    OracleCheck,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Converge => "converge",
            Scenario::Adapt => "adapt",
            Scenario::Effectivity => "effectivity",
            Scenario::OracleCheck => "oracle-check",
        }
    }
}

/// Domains and exact solution. Without a `solution` the run is unforced and starts from
/// the constant micro density `initial_rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub solution: Option<Solution>,
    pub macro_dim: usize,
    pub micro_dim: usize,
    pub initial_rho: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            solution: Some(Solution::Smooth),
            macro_dim: 2,
            micro_dim: 1,
            initial_rho: 0.0,
        }
    }
}

/// Cells per direction on each scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(rename = "macro")]
    pub macro_n: usize,
    #[serde(rename = "micro")]
    pub micro_n: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { macro_n: 8, micro_n: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// Used by `simulate`; studies use `dt_rule`.
    pub dt: f64,
    pub dt_rule: DtRule,
    pub scheme: Scheme,
    pub coupling: CouplingMode,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            dt_rule: DtRule::default(),
            scheme: Scheme::CrankNicolson,
            coupling: CouplingMode::Iterated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub levels: Vec<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            levels: vec![4, 8, 16, 32],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub eta_bar: f64,
    pub max_rounds: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            eta_bar: 0.25,
            max_rounds: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub model: ModelParams,
    pub reaction: ReactionTerm,
    pub problem: ProblemConfig,
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    pub study: StudyConfig,
    pub adapt: AdaptConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelParams::default();
        Self {
            scenario: Scenario::default(),
            reaction: ReactionTerm::standard(0.5, model.theta),
            model,
            problem: ProblemConfig::default(),
            mesh: MeshConfig::default(),
            time: TimeConfig::default(),
            study: StudyConfig::default(),
            adapt: AdaptConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn config_error(msg: String) -> Error {
    Error::Validation(msg)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Structural checks, the positivity and coercivity assumptions against the declared
    /// reaction bounds, and the sampled Lipschitz check.
    pub fn validate(&self) -> Result<()> {
        self.model.validate(&self.reaction)?;
        self.reaction.validate_sampled(self.model.theta, self.seed)?;
        let p = &self.problem;
        if !(1..=2).contains(&p.macro_dim) || !(1..=2).contains(&p.micro_dim) {
            return Err(config_error("problem dimensions must be 1 or 2".into()));
        }
        if self.mesh.macro_n == 0 || self.mesh.micro_n == 0 {
            return Err(config_error("mesh levels must be positive".into()));
        }
        if !(self.time.dt > 0.0) {
            return Err(config_error(format!("dt must be positive, got {}", self.time.dt)));
        }
        if let DtRule::Quadratic { factor } = self.time.dt_rule {
            if !(factor > 0.0) {
                return Err(config_error("dt_rule factor must be positive".into()));
            }
        }
        match self.scenario {
            Scenario::Converge if self.study.levels.len() < 3 => {
                return Err(config_error("converge needs at least three levels".into()))
            }
            Scenario::Effectivity if self.study.levels.len() < 4 => {
                return Err(config_error("effectivity needs at least four levels".into()))
            }
            Scenario::Converge | Scenario::Effectivity | Scenario::Adapt if p.solution.is_none() => {
                return Err(config_error(format!(
                    "{} needs a manufactured solution",
                    self.scenario.as_str()
                )))
            }
            _ => {}
        }
        if self.study.levels.contains(&0) {
            return Err(config_error("study levels must be positive".into()));
        }
        if !(self.adapt.eta_bar > 0.0) || self.adapt.max_rounds == 0 {
            return Err(config_error("adapt needs eta_bar > 0 and max_rounds >= 1".into()));
        }
        Ok(())
    }

    fn manufactured(&self) -> ManufacturedProblem {
        ManufacturedProblem::new(
            self.problem.solution.unwrap_or(Solution::Zero),
            self.model,
            self.reaction.clone(),
            self.problem.macro_dim,
            self.problem.micro_dim,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptSummary {
    pub rounds: usize,
    pub eta_trace: Vec<f64>,
}

impl AdaptSummary {
    pub fn into_error(self) -> Error {
        Error::AdaptIncomplete {
            rounds: self.rounds,
            trace: self.eta_trace,
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub outputs: Vec<PathBuf>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
    /// Adaptive runs that stopped before reaching the tolerance.
    pub adapt_incomplete: Option<AdaptSummary>,
    /// Oracle checks that failed.
    pub failed_checks: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'static str,
    parallel: bool,
    config: &'a RunConfig,
    outputs: Vec<String>,
    summary: &'a [String],
    wall_time_s: f64,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        Ok(BufWriter::new(File::create(path)?))
    }
}

/// Validates and executes a configuration.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&config.output_dir)?;
    let mut out = Outputs {
        dir: config.output_dir.clone(),
        files: Vec::new(),
    };
    let mut outcome = RunOutcome {
        scenario: config.scenario,
        outputs: Vec::new(),
        summary: Vec::new(),
        adapt_incomplete: None,
        failed_checks: 0,
    };
    match config.scenario {
        Scenario::Simulate => simulate(config, &mut out, &mut outcome)?,
        Scenario::Converge => converge(config, &mut out, &mut outcome)?,
        Scenario::Adapt => adapt(config, &mut out, &mut outcome)?,
        Scenario::Effectivity => effectivity(config, &mut out, &mut outcome)?,
        Scenario::OracleCheck => oracle_check(config, &mut out, &mut outcome)?,
    }
    outcome.outputs = out.files.clone();
    let manifest = Manifest {
        tool: "twoscale",
        version: env!("CARGO_PKG_VERSION"),
        scenario: config.scenario.as_str(),
        parallel: cfg!(feature = "parallel"),
        config,
        outputs: out
            .files
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect(),
        summary: &outcome.summary,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    serde_json::to_writer_pretty(out.create("manifest.json")?, &manifest)?;
    outcome.outputs = out.files;
    Ok(outcome)
}

#[derive(Serialize)]
struct TrajectoryRow {
    step: usize,
    t: f64,
    outer_iterations: usize,
    elliptic_iterations: usize,
    max_ratio: Option<f64>,
    pi_max: f64,
    rho_mean: f64,
    #[serde(rename = "e_pi_L2")]
    e_pi_l2: Option<f64>,
    #[serde(rename = "e_pi_H1")]
    e_pi_h1: Option<f64>,
}

fn simulate(config: &RunConfig, out: &mut Outputs, outcome: &mut RunOutcome) -> Result<()> {
    let problem = config.manufactured();
    let (xs, ys) = problem.spaces(config.mesh.macro_n, config.mesh.micro_n)?;
    let ops = assemble_system(&xs, &ys, &config.model)?;
    let forcing: &dyn Forcing = if config.problem.solution.is_some() {
        &problem
    } else {
        &NoForcing
    };
    let rho0 = config.problem.initial_rho;
    let (mut state, first) = if config.problem.solution.is_some() {
        initial_state(&ops, &config.reaction, forcing, |x, y| problem.initial_rho(x, y))?
    } else {
        initial_state(&ops, &config.reaction, forcing, |_, _| rho0)?
    };
    let t_final = config.model.t_final;
    let steps = (t_final / config.time.dt).round() as usize;
    if steps == 0 || (steps as f64 * config.time.dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return invalid(format!("dt = {} does not divide T = {t_final}", config.time.dt));
    }
    let mut stepper = Stepper::new(
        &ops,
        &config.reaction,
        forcing,
        config.time.dt,
        config.time.scheme,
        config.time.coupling,
    )?;
    let area = ys.mesh().total_measure();
    let row = |step: usize, s: &crate::twoscale::CoupledState, outer, elliptic, ratio| {
        let errors = config.problem.solution.map(|_| snapshot_errors(&ops, s, &problem));
        TrajectoryRow {
            step,
            t: s.t,
            outer_iterations: outer,
            elliptic_iterations: elliptic,
            max_ratio: ratio,
            pi_max: s.alpha.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            rho_mean: {
                let w = ops.my.mul_vec(&vec![1.0; ops.n_micro()]);
                let total: f64 = s.beta.iter().enumerate().map(|(k, b)| b * w[k % ops.n_micro()]).sum();
                total / (area * ops.n_macro() as f64)
            },
            e_pi_l2: errors.map(|e| e.pi_l2_sq.sqrt()),
            e_pi_h1: errors.map(|e| e.pi_h1_sq.sqrt()),
        }
    };
    let mut csv_out = csv::Writer::from_writer(out.create("trajectory.csv")?);
    csv_out.serialize(row(0, &state, 0, first.iterations, first.max_ratio))?;
    for n in 1..=steps {
        let (mut next, stats) = stepper.step(&state)?;
        next.t = n as f64 * config.time.dt;
        csv_out.serialize(row(
            n,
            &next,
            stats.outer_iterations,
            stats.elliptic_iterations,
            stats.max_ratio,
        ))?;
        state = next;
    }
    csv_out.flush()?;
    state.write_text(out.create("state.txt")?)?;
    write_dump(xs.mesh(), out.create("macro_mesh.txt")?)?;
    write_dump(ys.mesh(), out.create("micro_mesh.txt")?)?;
    let report = estimate(&state, &ops, &config.reaction, forcing, config.adapt.eta_bar)?;
    outcome.summary.push(format!("steps {steps}, final t {}", state.t));
    outcome.summary.push(format!("eta_R(T) = {:e}", report.eta_global));
    Ok(())
}

fn converge(config: &RunConfig, out: &mut Outputs, outcome: &mut RunOutcome) -> Result<()> {
    let problem = config.manufactured();
    let table = convergence_study(&problem, &config.study.levels, config.time.dt_rule, config.time.scheme)?;
    table.write_csv(out.create("rates.csv")?)?;
    table.write_split_csv(out.create("rho_split.csv")?)?;
    outcome
        .summary
        .push(format!("slope e_pi_L2 {:.4}", table.slope(|r| r.e_pi_l2)));
    outcome
        .summary
        .push(format!("slope e_pi_H1 {:.4}", table.slope(|r| r.e_pi_h1)));
    outcome
        .summary
        .push(format!("slope e_rho {:.4}", table.slope(|r| r.e_rho)));
    outcome
        .summary
        .push(format!("slope e_rho (L2 part) {:.4}", table.slope(|r| r.e_rho_l2)));
    Ok(())
}

fn effectivity(config: &RunConfig, out: &mut Outputs, outcome: &mut RunOutcome) -> Result<()> {
    let problem = config.manufactured();
    let table = effectivity_study(&problem, &config.study.levels)?;
    table.write_csv(out.create("effectivity.csv")?)?;
    outcome
        .summary
        .push(format!("effectivity spread (max/min) {:.4}", table.spread()));
    Ok(())
}

fn adapt(config: &RunConfig, out: &mut Outputs, outcome: &mut RunOutcome) -> Result<()> {
    let problem = config.manufactured();
    let snap = SnapshotProblem {
        problem: &problem,
        n_micro: config.mesh.micro_n,
    };
    let history = adapt_loop(
        &snap,
        problem.macro_mesh(config.mesh.macro_n)?,
        config.adapt.eta_bar,
        config.adapt.max_rounds,
    )?;
    history.write_csv(out.create("adapt.csv")?)?;
    write_dump(&history.last().mesh, out.create("adapt_mesh.txt")?)?;
    let converged = history.status == AdaptStatus::Converged;
    outcome.summary.push(format!(
        "{} after {} rounds, eta_R trace {:?}",
        if converged { "converged" } else { "incomplete" },
        history.rounds.len(),
        history.eta_trace()
    ));
    if !converged {
        outcome.adapt_incomplete = Some(AdaptSummary {
            rounds: history.rounds.len(),
            eta_trace: history.eta_trace(),
        });
    }
    Ok(())
}

fn oracle_check(config: &RunConfig, out: &mut Outputs, outcome: &mut RunOutcome) -> Result<()> {
    let checks: Vec<OracleCheck> = oracle::run_all(config.seed)?;
    let mut w = csv::Writer::from_writer(out.create("oracle.csv")?);
    for c in &checks {
        w.serialize(c)?;
        outcome.summary.push(format!(
            "{} {}/{}: {:e} (tolerance {:e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.value,
            c.tolerance
        ));
    }
    w.flush()?;
    outcome.failed_checks = checks.iter().filter(|c| !c.passed).count();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_json() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn partial_config_takes_defaults() {
        let c =
            RunConfig::from_json(r#"{"scenario": "converge", "model": {"A": 2.0}, "study": {"levels": [2, 4, 8]}}"#)
                .unwrap();
        assert_eq!(c.scenario, Scenario::Converge);
        assert_eq!(c.model.a, 2.0);
        assert_eq!(c.model.d, 1.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"modle": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model": {"B": 1.0}}"#).is_err());
    }

    #[test]
    fn coercivity_violation_names_the_assumption() {
        let c = RunConfig::from_json(
            r#"{"model": {"A": 0.1}, "reaction": {"kind": "standard", "c_f": 0.5, "theta": 4.0}}"#,
        )
        .unwrap();
        match c.validate() {
            Err(Error::Assumption { assumption, .. }) => assert_eq!(assumption, "A3"),
            other => panic!("expected an assumption error, got {other:?}"),
        }
    }

    #[test]
    fn studies_need_enough_levels() {
        let c = RunConfig::from_json(r#"{"scenario": "effectivity", "study": {"levels": [2, 4, 8]}}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
    }
}

//! Scenario configuration, the built-in scenarios and the end-to-end run that
//! produces a JSON summary plus CSV artifacts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::attractor::{check_dissipative, levinson_center, verify_invariance, DissipativityEstimate, FiberMap, InvarianceReport, LevinsonFiber};
use crate::base_flow::{BaseFlowSpec, BasePoint};
use crate::bronshtein::{bronshtein_pipeline, DistinguishedSolution, PipelineSettings};
use crate::cocycle::{CocycleSpec, SystemKind};
use crate::error::{Error, Result, Stage};
use crate::field::{build_field, VectorField, BUILTIN_KEYS};
use crate::integrator::IntegratorSettings;
use crate::io;
use crate::recurrence::{classify, RecurrenceReport, RecurrenceSettings};

pub const SCHEMA_VERSION: u32 = 1;

/// Stages of a full run, in execution order.
pub const STAGES: [Stage; 11] = [
    Stage::Monotonicity,
    Stage::Dissipativity,
    Stage::Stability,
    Stage::Attractor,
    Stage::Alpha,
    Stage::Gamma,
    Stage::Delta,
    Stage::Trajectory,
    Stage::Attraction,
    Stage::Comparability,
    Stage::Recurrence,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub key: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: SystemKind,
    pub dim: usize,
    pub base: BaseFlowSpec,
    pub field: FieldConfig,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    /// Base point of the distinguished solution; zeros when absent.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: Option<PipelineSettings>,
    #[serde(default)]
    pub recurrence: Option<RecurrenceSettings>,
    /// Negative controls name the stage they must fail.
    #[serde(default)]
    pub expected_failure: Option<Stage>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !BUILTIN_KEYS.contains(&self.field.key.as_str()) {
            return Err(Error::Config(format!(
                "unknown field key `{}` (registered: {})",
                self.field.key,
                BUILTIN_KEYS.join(", ")
            )));
        }
        if let Some(th) = &self.theta0 {
            if th.len() != self.base.dim() {
                return Err(Error::Config(format!("theta0 has {} coordinates, base has {}", th.len(), self.base.dim())));
            }
        }
        self.build_spec().map(|_| ())
    }

    pub fn build_field(&self) -> Result<Arc<dyn VectorField>> {
        build_field(&self.field.key, self.dim, self.base.dim(), &self.field.params)
    }

    pub fn build_spec(&self) -> Result<CocycleSpec> {
        let to_config = |e: Error| match e {
            Error::InvalidArgument(m) | Error::Config(m) => Error::Config(m),
            other => other,
        };
        self.base.validate().map_err(to_config)?;
        CocycleSpec::new(self.kind, self.dim, self.base.clone(), self.build_field()?)
            .and_then(|s| s.with_integrator(self.integrator))
            .map_err(to_config)
    }

    pub fn theta0(&self) -> BasePoint {
        self.theta0.clone().map_or_else(|| BasePoint::zeros(self.base.dim()), BasePoint::new)
    }

    /// Copy with every default filled in and every seed set to `seed`, so the
    /// summary describes the run completely.
    pub fn resolved(&self) -> Result<ScenarioConfig> {
        let spec = self.build_spec()?;
        let mut out = self.clone();
        out.theta0 = Some(self.theta0().phases().to_vec());
        out.pipeline =
            Some(self.pipeline.clone().unwrap_or_else(|| PipelineSettings::for_spec(&spec)).with_seed(self.seed));
        out.recurrence = Some(self.recurrence.clone().unwrap_or_default());
        Ok(out)
    }

    /// Sets the forward horizon of the distinguished trajectory (and so of the
    /// comparability and recurrence evidence).
    pub fn set_horizon(&mut self, horizon: f64) -> Result<()> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let resolved = self.resolved()?;
        let mut pipeline = resolved.pipeline.expect("resolved");
        pipeline.trajectory.t_plus = horizon;
        self.pipeline = Some(pipeline);
        Ok(())
    }
}

fn affine_params(matrix: &[&[f64]], cos: &[(usize, usize, f64)]) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::new();
    for (i, row) in matrix.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            p.insert(format!("a_{}_{}", i + 1, j + 1), *a);
        }
    }
    for &(i, k, b) in cos {
        p.insert(format!("b_{i}_{k}"), b);
    }
    p
}

fn builtin(
    name: &str,
    description: &str,
    kind: SystemKind,
    base: BaseFlowSpec,
    matrix: &[&[f64]],
    cos: &[(usize, usize, f64)],
    expected_failure: Option<Stage>,
) -> ScenarioConfig {
    let cfg = ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        description: description.to_string(),
        kind,
        dim: matrix.len(),
        base,
        field: FieldConfig { key: "affine".into(), params: affine_params(matrix, cos) },
        integrator: IntegratorSettings::default(),
        theta0: None,
        seed: 0,
        pipeline: None,
        recurrence: None,
        expected_failure,
        output_dir: None,
    };
    cfg.resolved().expect("built-in scenarios are valid")
}

/// The built-in scenarios `S1`–`S6`, with all defaults embedded.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let two = || BaseFlowSpec::continuous(vec![1.0 / TAU, 2f64.sqrt() / TAU]).expect("valid").declare_independent();
    let one = || BaseFlowSpec::continuous(vec![1.0 / TAU]).expect("valid").declare_independent();
    vec![
        builtin(
            "S1",
            "scalar periodic: u' = -u + cos t",
            SystemKind::Ode,
            one(),
            &[&[-1.0]],
            &[(1, 1, 1.0)],
            None,
        ),
        builtin(
            "S2",
            "scalar quasi-periodic: u' = -u + cos t + cos(sqrt(2) t)",
            SystemKind::Ode,
            two(),
            &[&[-1.0]],
            &[(1, 1, 1.0), (1, 2, 1.0)],
            None,
        ),
        builtin(
            "S3",
            "planar cooperative linear: A = [[-2, 1], [1, -2]], forcing (cos t, cos(sqrt(2) t))",
            SystemKind::Ode,
            two(),
            &[&[-2.0, 1.0], &[1.0, -2.0]],
            &[(1, 1, 1.0), (2, 2, 1.0)],
            None,
        ),
        builtin(
            "S4",
            "difference equation: u_{n+1} = u_n / 2 + cos(2 pi theta_n), golden-mean rotation",
            SystemKind::Difference,
            BaseFlowSpec::discrete(vec![golden]).expect("valid").declare_independent(),
            &[&[0.5]],
            &[(1, 1, 1.0)],
            None,
        ),
        builtin(
            "S5",
            "negative control, competitive planar field: A = [[-2, -1], [-1, -2]]",
            SystemKind::Ode,
            two(),
            &[&[-2.0, -1.0], &[-1.0, -2.0]],
            &[(1, 1, 1.0), (2, 2, 1.0)],
            Some(Stage::Monotonicity),
        ),
        builtin(
            "S6",
            "negative control, expanding: u' = u",
            SystemKind::Ode,
            one(),
            &[&[1.0]],
            &[],
            Some(Stage::Dissipativity),
        ),
    ]
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().find(|c| c.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pass,
    Fail,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub status: StageStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub passed: bool,
    pub exit_code: i32,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub expected_failure: Option<Stage>,
    /// For negative controls: the run failed exactly at the designated stage.
    pub expectation_met: bool,
    pub stages: Vec<StageOutcome>,
    pub config: ScenarioConfig,
    pub solution: Option<DistinguishedSolution>,
    pub recurrence: Option<RecurrenceReport>,
    /// Seconds since the Unix epoch; excluded from [`comparable_summary`].
    pub generated_at: u64,
}

/// Summary as JSON without the timestamp, for reproducibility comparisons.
pub fn comparable_summary(summary: &RunSummary) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(summary)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("generated_at");
    }
    Ok(v)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub solution: Option<DistinguishedSolution>,
    pub error: Option<Error>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

fn stage_table(failed: Option<Stage>) -> Vec<StageOutcome> {
    let mut seen_failure = false;
    STAGES
        .iter()
        .map(|&stage| {
            let status = if seen_failure {
                StageStatus::NotRun
            } else if Some(stage) == failed {
                seen_failure = true;
                StageStatus::Fail
            } else {
                StageStatus::Pass
            };
            StageOutcome { stage, status }
        })
        .collect()
}

fn recurrence_stage(solution: &DistinguishedSolution, settings: &RecurrenceSettings) -> Result<RecurrenceReport> {
    let report = classify(&solution.trajectory, settings)?;
    if !report.flags.lagrange_stable {
        return Err(Error::NotRecurrent("trajectory is unbounded".into()));
    }
    if !report.flags.poisson_plus {
        return Err(Error::NotRecurrent("no returns to the initial point late in the horizon".into()));
    }
    Ok(report)
}

/// Runs the full pipeline and recurrence classification. Stage failures are
/// reported in the outcome; only invalid configuration and I/O problems are
/// returned as errors. Artifacts go to `config.output_dir` when set.
pub fn run(config: &ScenarioConfig) -> Result<RunOutcome> {
    config.validate()?;
    let cfg = config.resolved()?;
    let spec = cfg.build_spec()?;
    let pipeline = cfg.pipeline.as_ref().expect("resolved");
    let rec_settings = cfg.recurrence.as_ref().expect("resolved");

    let mut recurrence = None;
    let result = bronshtein_pipeline(&spec, &cfg.theta0(), pipeline).and_then(|sol| {
        recurrence = Some(recurrence_stage(&sol, rec_settings).map_err(|e| e.at(Stage::Recurrence))?);
        Ok(sol)
    });
    let (solution, error) = match result {
        Ok(sol) => (Some(sol), None),
        Err(e) => (None, Some(e)),
    };
    let failed_stage = error.as_ref().and_then(Error::stage);
    let exit_code = error.as_ref().map_or(0, Error::exit_code);
    let expectation_met = match cfg.expected_failure {
        Some(stage) => failed_stage == Some(stage),
        None => error.is_none(),
    };
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.name.clone(),
        passed: error.is_none(),
        exit_code,
        failed_stage,
        error: error.as_ref().map(ToString::to_string),
        expected_failure: cfg.expected_failure,
        expectation_met,
        stages: stage_table(failed_stage),
        config: cfg.clone(),
        solution: solution.clone(),
        recurrence,
        generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    let outcome = RunOutcome { summary, solution, error };
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(dir, &outcome)?;
    }
    Ok(outcome)
}

/// Writes `summary.json` and, when available, the CSV artifacts.
pub fn write_artifacts(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_json(&dir.join("summary.json"), &outcome.summary)?;
    if let Some(sol) = &outcome.solution {
        io::write_trajectory_csv(&dir.join("trajectory.csv"), &sol.trajectory)?;
        io::write_fiber_csv(&dir.join("fiber.csv"), &sol.fiber.cloud)?;
        io::write_attraction_csv(&dir.join("attraction.csv"), &sol.attraction_profile)?;
        io::write_comparability_csv(&dir.join("comparability.csv"), &sol.comparability)?;
        io::write_stability_csv(&dir.join("stability.csv"), &sol.stability)?;
    }
    if let Some(rec) = &outcome.summary.recurrence {
        io::write_eps_table_csv(&dir.join("recurrence_eps.csv"), &rec.eps_table)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorReport {
    pub scenario: String,
    pub dissipativity: DissipativityEstimate,
    pub fiber: LevinsonFiber,
    pub invariance: Vec<InvarianceReport>,
}

/// Dissipativity estimate, the Levinson fiber over `θ0`, and its invariance
/// under the flow for `t ∈ {1, 5, 10}` with tolerance twice the resolution.
pub fn run_attractor(config: &ScenarioConfig) -> Result<AttractorReport> {
    let cfg = config.resolved()?;
    let spec = cfg.build_spec()?;
    let pipeline = cfg.pipeline.as_ref().expect("resolved");
    let theta0 = cfg.theta0();
    let diss = check_dissipative(&spec, &pipeline.dissipativity).map_err(|e| e.at(Stage::Dissipativity))?;
    let fiber = levinson_center(&spec, &diss, &theta0, &pipeline.fiber).map_err(|e| e.at(Stage::Attractor))?;
    let mut map = FiberMap::new();
    map.insert(fiber.clone());
    let tol = 2.0 * pipeline.fiber.resolution;
    let mut invariance = Vec::new();
    for t in [1.0, 5.0, 10.0] {
        let later = spec.advance(&theta0, t)?;
        map.insert(levinson_center(&spec, &diss, &later, &pipeline.fiber).map_err(|e| e.at(Stage::Attractor))?);
        invariance.push(verify_invariance(&spec, &map, &theta0, t, tol).map_err(|e| e.at(Stage::Attractor))?);
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        io::write_fiber_csv(&dir.join("fiber.csv"), &fiber.cloud)?;
    }
    let report = AttractorReport { scenario: cfg.name.clone(), dissipativity: diss, fiber, invariance };
    if let Some(dir) = &cfg.output_dir {
        io::write_json(&dir.join("attractor.json"), &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_complete_and_valid() {
        let all = builtin_scenarios();
        let names: Vec<&str> = all.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["S1", "S2", "S3", "S4", "S5", "S6"]);
        for c in &all {
            c.validate().unwrap();
            assert!(c.pipeline.is_some() && c.recurrence.is_some() && c.theta0.is_some());
        }
        assert_eq!(builtin_scenario("s4").unwrap().kind, SystemKind::Difference);
    }

    #[test]
    fn config_json_round_trip() {
        let c = builtin_scenario("S3").unwrap();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let text = r#"{
            "name": "mini",
            "kind": "ode",
            "dim": 1,
            "base": {"nu": [0.15915494309189535], "time_kind": "continuous"},
            "field": {"key": "affine", "params": {"a_1_1": -1.0, "b_1_1": 1.0}}
        }"#;
        let c = ScenarioConfig::from_json(text).unwrap();
        let r = c.resolved().unwrap();
        assert_eq!(r.theta0, Some(vec![0.0]));
        assert_eq!(r.pipeline.unwrap().gamma.return_eps, 0.02);
    }

    #[test]
    fn config_errors() {
        let bad_key = r#"{"name":"x","kind":"ode","dim":1,"base":{"nu":[0.1],"time_kind":"continuous"},"field":{"key":"nope"}}"#;
        assert!(matches!(ScenarioConfig::from_json(bad_key), Err(Error::Config(_))));
        let missing = r#"{"name":"x","kind":"ode","dim":1,"base":{"nu":[0.1],"time_kind":"continuous"},"field":{"key":"affine"}}"#;
        assert!(matches!(ScenarioConfig::from_json(missing), Err(Error::Config(_))));
        let typo = r#"{"name":"x","kind":"ode","dim":1,"base":{"nu":[0.1],"time_kind":"continuous"},"field":{"key":"affine","params":{"a_1_1":-1}},"sed":3}"#;
        assert!(matches!(ScenarioConfig::from_json(typo), Err(Error::Config(_))));
        let kind = r#"{"name":"x","kind":"difference","dim":1,"base":{"nu":[0.1],"time_kind":"continuous"},"field":{"key":"affine","params":{"a_1_1":-1}}}"#;
        let err = ScenarioConfig::from_json(kind).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn stage_table_marks_later_stages() {
        let t = stage_table(Some(Stage::Stability));
        assert_eq!(t[0].status, StageStatus::Pass);
        assert_eq!(t[2].status, StageStatus::Fail);
        assert!(t[3..].iter().all(|s| s.status == StageStatus::NotRun));
        assert!(stage_table(None).iter().all(|s| s.status == StageStatus::Pass));
    }
}

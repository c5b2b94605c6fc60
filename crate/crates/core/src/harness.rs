//! Parameter sweeps for the counterexample claims, the lemma suite, kernel
//! tables and jet extensions, with CSV/JSON output.
//!
//! Every row carries a `converged` flag: the reported norm is recomputed with
//! doubled quadrature orders and must move by less than 1%.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bergman::{factorial, BergmanModel, ModelOptions};
use crate::error::{Error, Result};
use crate::extension::{extend_cross, extend_jet_direct, extend_jet_recursive, rhs_estimate_jet, CrossData, Jet};
use crate::functionals::{branch_l2_norm, derivative_norm_on_y, NormKind, NormSpec};
use crate::quadrature::{BidiskRuleSpec, DiskRuleSpec, QuadratureRule};
use crate::weights::{clamp_max, clamp_radius, AnyWeight, Domain, RegularizedLogWeight, Weight};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the worker count of the sweep pool.
pub const WORKERS_ENV: &str = "BERGMAN_EXT_WORKERS";

/// Relative change allowed between a norm and its doubled-order recomputation.
pub const CONVERGENCE_TOL: f64 = 0.01;

/// Largest index of the `B_k(0)` tables.
pub const LEMMA_MAX_K: usize = 6;

/// Margin below which an inequality of the lemma suite counts as violated.
pub const LEMMA_MARGIN: f64 = -1e-9;

/// Largest relative stencil residual accepted by the lemma suite.
pub const STENCIL_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Claim1,
    Claim2,
    Claim34,
    Lemmas,
    KernelTable,
    Extend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `D(m) = max(min, ceil(per_m · m))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeSchedule {
    pub min: usize,
    pub per_m: usize,
}

impl Default for DegreeSchedule {
    fn default() -> Self {
        DegreeSchedule { min: 24, per_m: 6 }
    }
}

impl DegreeSchedule {
    pub fn degree(&self, m: f64) -> usize {
        self.min.max((self.per_m as f64 * m).ceil() as usize).max(1)
    }
}

/// Sweep description, read from JSON (`"schema": 1`). Unset grids fall back
/// to per-experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub schema: u32,
    pub experiment: Experiment,
    /// `m` values of the linear weights `-2m Re z`.
    pub ms: Option<Vec<f64>>,
    pub epsilons: Option<Vec<f64>>,
    /// The floor `A` of the clamped weights.
    pub floor: f64,
    /// `m` of the clamped weight.
    pub m: f64,
    /// Fixed truncation degree; overrides the schedule.
    pub degree: Option<usize>,
    pub schedule: DegreeSchedule,
    pub radial_order: Option<usize>,
    pub angular_order: Option<usize>,
    /// Lemma-suite family name, used when `weights` is empty.
    pub family: String,
    pub weights: Vec<AnyWeight>,
    pub jet: Vec<Complex64>,
    pub check_convergence: bool,
    pub check_degree: bool,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            schema: SCHEMA_VERSION,
            experiment: Experiment::Claim1,
            ms: None,
            epsilons: None,
            floor: 20.0,
            m: 4.0,
            degree: None,
            schedule: DegreeSchedule::default(),
            radial_order: None,
            angular_order: None,
            family: "default".into(),
            weights: Vec::new(),
            jet: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            check_convergence: true,
            check_degree: true,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

impl SweepConfig {
    pub fn new(experiment: Experiment) -> Self {
        SweepConfig {
            experiment,
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ms(&self) -> Vec<f64> {
        self.ms.clone().unwrap_or_else(|| (1..=8).map(f64::from).collect())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.epsilons.clone().unwrap_or_else(|| match self.experiment {
            Experiment::Claim34 => vec![0.2, 0.1, 0.05, 0.025],
            _ => vec![0.4, 0.2, 0.1, 0.05],
        })
    }

    /// Truncation degree of the experiments with a fixed degree.
    pub fn fixed_degree(&self) -> usize {
        self.degree.unwrap_or(match self.experiment {
            Experiment::Claim34 => 16,
            _ => 24,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Parameter(format!(
                "unsupported config schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        let ms = self.ms();
        if ms.is_empty() || self.epsilons().is_empty() {
            return Err(Error::Parameter("parameter grids must be nonempty".into()));
        }
        if ms.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Parameter("m values must be finite and >= 0".into()));
        }
        if self.epsilons().iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Parameter("epsilon values must be positive".into()));
        }
        if !(self.floor.is_finite() && self.floor > 0.0) {
            return Err(Error::Parameter(format!("floor must be positive, got {}", self.floor)));
        }
        if !(self.m.is_finite() && self.m >= 0.0) {
            return Err(Error::Parameter(format!("m must be finite and >= 0, got {}", self.m)));
        }
        if self.degree == Some(0) || self.schedule.min == 0 && self.schedule.per_m == 0 {
            return Err(Error::Parameter("degree must be at least 1".into()));
        }
        if self.radial_order.is_some_and(|r| r < 2) || self.angular_order.is_some_and(|a| a < 4) {
            return Err(Error::Parameter("radial order must be >= 2 and angular order >= 4".into()));
        }
        if self.jet.is_empty() {
            return Err(Error::Parameter("the jet must have at least one value".into()));
        }
        if self.experiment == Experiment::Extend && self.jet.len() > self.fixed_degree() + 1 {
            return Err(Error::Parameter(format!(
                "jet of length {} needs degree >= {}",
                self.jet.len(),
                self.jet.len() - 1
            )));
        }
        for w in &self.weights {
            w.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the config without its output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let text = serde_json::to_string(&c).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Where a result came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub library_version: String,
    /// Quadrature layout of the rows, in words.
    pub quadrature: Vec<String>,
}

/// Outcome of rerunning the most demanding row at twice the degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeCheck {
    pub parameter: f64,
    pub degree: usize,
    /// Degree actually used for the comparison: `2·degree`, or the largest
    /// degree below it whose Gram matrix is not degenerate.
    pub check_degree: usize,
    pub norm: f64,
    pub check_norm: f64,
    pub relative_change: f64,
    pub within_tolerance: bool,
}

/// The divergence criterion applied to a sweep, stated so it can be audited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceVerdict {
    pub criterion: String,
    pub quantity: String,
    pub strictly_increasing: bool,
    pub final_over_initial: f64,
    pub threshold: f64,
    pub diverges: bool,
}

impl DivergenceVerdict {
    fn evaluate(quantity: &str, values: &[f64], threshold: f64) -> Self {
        let strictly_increasing = values.len() >= 2 && values.windows(2).all(|w| w[1] > w[0]);
        let final_over_initial = match (values.first(), values.last()) {
            (Some(a), Some(b)) if *a > 0.0 => b / a,
            _ => f64::NAN,
        };
        DivergenceVerdict {
            criterion: format!(
                "strictly increasing across at least 4 swept values and final/initial > {threshold}"
            ),
            quantity: quantity.into(),
            strictly_increasing,
            final_over_initial,
            threshold,
            diverges: values.len() >= 4 && strictly_increasing && final_over_initial > threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim1Row {
    pub m: f64,
    pub degree: usize,
    pub norm: f64,
    /// `‖h‖² e^{φ(0)} / (|a0|²+|a1|²)`
    pub ratio: f64,
    pub converged: bool,
    pub refined_norm: f64,
    pub condition_number: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim2Row {
    pub epsilon: f64,
    pub floor: f64,
    pub m: f64,
    pub degree: usize,
    pub norm: f64,
    /// `(|a0|²+|a1|²) e^{-ψ(0)}`
    pub rhs_naive: f64,
    /// `(|a0|²+|a1 - a0 ∂ψ(0)|²) e^{-ψ(0)}`
    pub rhs_connection: f64,
    /// `norm / rhs_connection`
    pub ratio: f64,
    /// The exact two-term right-hand side built from `B_0(0)` and `ω_B(0)`.
    pub rhs_exact: f64,
    /// Radius below which `ψ = -A`; `NaN` when the floor is never reached.
    pub clamp_radius: f64,
    pub dpsi0: f64,
    pub converged: bool,
    pub refined_norm: f64,
    pub condition_number: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim34Row {
    pub epsilon: f64,
    pub degree: usize,
    pub norm: f64,
    /// `∫_V |f|² e^{-φ_ε} dλ`
    pub rhs_l2: f64,
    /// `rhs_l2 + ∫_V |∂^{φ_ε} f|² e^{-φ_ε} dλ`
    pub rhs_twisted: f64,
    pub ratio_l2: f64,
    pub ratio_twisted: f64,
    pub h0_norm_sqr: f64,
    pub h1_norm_sqr: f64,
    pub stationarity_residual: f64,
    pub converged: bool,
    pub refined_norm: f64,
    pub condition_number: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub name: String,
    pub weight: String,
    pub degree: usize,
    pub negative_control: bool,
    /// `B_k(0)` for `k = 0..=6`.
    pub b_k: Vec<f64>,
    pub omega_b: f64,
    /// `ω_B(0) - 1`
    pub metric_margin: f64,
    /// `min_k B_k(0)/((k!)² B_0(0)) - 1` over `1 <= k <= 6`.
    pub kernel_margin: f64,
    /// Relative gap between the stencil value of `∂∂̄ log B_0` and `ω_B(0)`.
    pub stencil_residual: f64,
    pub metric_ok: bool,
    pub kernel_ok: bool,
    pub stencil_ok: bool,
    pub converged: bool,
    pub all_pass: bool,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub name: String,
    pub weight: String,
    pub degree: usize,
    pub condition_number: f64,
    pub b_k: Vec<f64>,
    pub omega_b: f64,
    pub gradient: [f64; 2],
    pub converged: bool,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendRow {
    pub name: String,
    pub weight: String,
    pub degree: usize,
    pub norm: f64,
    pub norm_recursive: f64,
    /// Two-term right-hand sides, only for jets of length 2.
    pub rhs_exact: Option<f64>,
    pub rhs_ot: Option<f64>,
    pub constraint_residual: f64,
    pub converged: bool,
    pub status: String,
}

/// Rows of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Rows {
    Claim1(Vec<Claim1Row>),
    Claim2(Vec<Claim2Row>),
    Claim34(Vec<Claim34Row>),
    Lemmas(Vec<LemmaRow>),
    KernelTable(Vec<KernelRow>),
    Extend(Vec<ExtendRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Claim1(r) => r.len(),
            Rows::Claim2(r) => r.len(),
            Rows::Claim34(r) => r.len(),
            Rows::Lemmas(r) => r.len(),
            Rows::KernelTable(r) => r.len(),
            Rows::Extend(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub schema: u32,
    pub experiment: Experiment,
    pub provenance: Provenance,
    pub rows: Rows,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree_check: Option<DegreeCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceVerdict>,
}

impl SweepResult {
    pub fn claim1_rows(&self) -> &[Claim1Row] {
        match &self.rows {
            Rows::Claim1(r) => r,
            _ => &[],
        }
    }

    pub fn claim2_rows(&self) -> &[Claim2Row] {
        match &self.rows {
            Rows::Claim2(r) => r,
            _ => &[],
        }
    }

    pub fn claim34_rows(&self) -> &[Claim34Row] {
        match &self.rows {
            Rows::Claim34(r) => r,
            _ => &[],
        }
    }

    pub fn lemma_rows(&self) -> &[LemmaRow] {
        match &self.rows {
            Rows::Lemmas(r) => r,
            _ => &[],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with the fixed columns of the experiment.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.rows {
            Rows::Claim1(rows) => write_rows(&mut w, rows)?,
            Rows::Claim2(rows) => write_rows(&mut w, rows)?,
            Rows::Claim34(rows) => write_rows(&mut w, rows)?,
            Rows::Lemmas(rows) => write_rows(&mut w, rows)?,
            Rows::KernelTable(rows) => write_rows(&mut w, rows)?,
            Rows::Extend(rows) => write_rows(&mut w, rows)?,
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        fs::write(path, self.render(format)?)?;
        Ok(())
    }
}

/// Fixed CSV layout of a row type.
trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

fn write_rows<R: CsvRow>(w: &mut csv::Writer<Vec<u8>>, rows: &[R]) -> Result<()> {
    w.write_record(R::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    x.to_string()
}

fn table(b_k: &[f64]) -> impl Iterator<Item = String> + '_ {
    (0..=LEMMA_MAX_K).map(|k| b_k.get(k).map_or(String::new(), |v| num(*v)))
}

impl CsvRow for Claim1Row {
    const HEADER: &'static [&'static str] = &["m", "degree", "norm", "ratio", "converged"];
    fn fields(&self) -> Vec<String> {
        vec![
            num(self.m),
            self.degree.to_string(),
            num(self.norm),
            num(self.ratio),
            self.converged.to_string(),
        ]
    }
}

impl CsvRow for Claim2Row {
    const HEADER: &'static [&'static str] = &[
        "epsilon",
        "floor",
        "m",
        "degree",
        "norm",
        "rhs_naive",
        "rhs_connection",
        "ratio",
        "rhs_exact",
        "clamp_radius",
        "converged",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            num(self.epsilon),
            num(self.floor),
            num(self.m),
            self.degree.to_string(),
            num(self.norm),
            num(self.rhs_naive),
            num(self.rhs_connection),
            num(self.ratio),
            num(self.rhs_exact),
            num(self.clamp_radius),
            self.converged.to_string(),
        ]
    }
}

impl CsvRow for Claim34Row {
    const HEADER: &'static [&'static str] = &[
        "epsilon",
        "degree",
        "norm",
        "rhs_l2",
        "rhs_twisted",
        "ratio_l2",
        "ratio_twisted",
        "h0_norm_sqr",
        "h1_norm_sqr",
        "converged",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            num(self.epsilon),
            self.degree.to_string(),
            num(self.norm),
            num(self.rhs_l2),
            num(self.rhs_twisted),
            num(self.ratio_l2),
            num(self.ratio_twisted),
            num(self.h0_norm_sqr),
            num(self.h1_norm_sqr),
            self.converged.to_string(),
        ]
    }
}

impl CsvRow for LemmaRow {
    const HEADER: &'static [&'static str] = &[
        "name",
        "degree",
        "b0",
        "b1",
        "b2",
        "b3",
        "b4",
        "b5",
        "b6",
        "omega_b",
        "metric_margin",
        "kernel_margin",
        "stencil_residual",
        "all_pass",
        "converged",
    ];
    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.name.clone(), self.degree.to_string()];
        f.extend(table(&self.b_k));
        f.extend([
            num(self.omega_b),
            num(self.metric_margin),
            num(self.kernel_margin),
            num(self.stencil_residual),
            self.all_pass.to_string(),
            self.converged.to_string(),
        ]);
        f
    }
}

impl CsvRow for KernelRow {
    const HEADER: &'static [&'static str] = &[
        "name",
        "degree",
        "condition_number",
        "b0",
        "b1",
        "b2",
        "b3",
        "b4",
        "b5",
        "b6",
        "omega_b",
        "gradient_re",
        "gradient_im",
        "converged",
    ];
    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.name.clone(), self.degree.to_string(), num(self.condition_number)];
        f.extend(table(&self.b_k));
        f.extend([
            num(self.omega_b),
            num(self.gradient[0]),
            num(self.gradient[1]),
            self.converged.to_string(),
        ]);
        f
    }
}

impl CsvRow for ExtendRow {
    const HEADER: &'static [&'static str] =
        &["name", "degree", "norm", "norm_recursive", "rhs_exact", "rhs_ot", "converged"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            self.degree.to_string(),
            num(self.norm),
            num(self.norm_recursive),
            self.rhs_exact.map_or(String::new(), num),
            self.rhs_ot.map_or(String::new(), num),
            self.converged.to_string(),
        ]
    }
}

/// A weight of the lemma suite. `rule` overrides the default quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyMember {
    pub name: String,
    pub weight: AnyWeight,
    pub rule: Option<DiskRuleSpec>,
    pub negative_control: bool,
}

impl FamilyMember {
    fn new(name: impl Into<String>, weight: impl Into<AnyWeight>) -> Self {
        FamilyMember {
            name: name.into(),
            weight: weight.into(),
            rule: None,
            negative_control: false,
        }
    }
}

/// `0`, `-2m Re z` for `m = 1..4`, two clamped weights, and an
/// under-resolved control that must be flagged.
pub fn default_family() -> Vec<FamilyMember> {
    let mut f = vec![FamilyMember::new("flat", Weight::zero(Domain::Disk))];
    for m in 1..=4 {
        f.push(FamilyMember::new(format!("linear_m{m}"), Weight::linear_re(m as f64)));
    }
    let clamp = |w: &Weight, c: f64, a: f64| clamp_max(w, c, a).expect("valid clamp parameters");
    f.push(FamilyMember::new("clamp_flat", clamp(&Weight::zero(Domain::Disk), 0.1, 10.0)));
    f.push(FamilyMember::new("clamp_linear_m2", clamp(&Weight::linear_re(2.0), 0.2, 5.0)));
    f.push(FamilyMember {
        name: "control_under_resolved".into(),
        weight: Weight::zero(Domain::Disk).into(),
        rule: Some(DiskRuleSpec::new(4, 8).with_annuli(1)),
        negative_control: true,
    });
    f
}

pub fn family(name: &str) -> Result<Vec<FamilyMember>> {
    match name {
        "default" => Ok(default_family()),
        other => Err(Error::Parameter(format!("unknown weight family '{other}'"))),
    }
}

/// Run a sweep in a worker pool sized by [`WORKERS_ENV`].
pub fn run(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let pool = worker_pool()?;
    pool.install(|| match cfg.experiment {
        Experiment::Claim1 => claim1(cfg),
        Experiment::Claim2 => claim2(cfg),
        Experiment::Claim34 => claim34(cfg),
        Experiment::Lemmas => lemmas(cfg),
        Experiment::KernelTable => kernel_table(cfg),
        Experiment::Extend => extend(cfg),
    })
}

/// Run a sweep and write it to `cfg.out` when set.
pub fn run_and_write(cfg: &SweepConfig) -> Result<SweepResult> {
    let result = run(cfg)?;
    if let Some(path) = &cfg.out {
        result.write(path, cfg.format)?;
    }
    Ok(result)
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parameter(format!("{WORKERS_ENV} must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))
}

/// Linear weights `-2m Re z`, jet `(1, 0)`.
pub fn run_claim1(ms: &[f64], schedule: DegreeSchedule) -> Result<SweepResult> {
    run(&SweepConfig {
        ms: Some(ms.to_vec()),
        schedule,
        ..SweepConfig::new(Experiment::Claim1)
    })
}

/// Clamped weights `max(-2m Re z + ε log|z|², -A)`, jet `(1, 0)`.
pub fn run_claim2(epsilons: &[f64], floor: f64, m: f64, degree: usize) -> Result<SweepResult> {
    run(&SweepConfig {
        epsilons: Some(epsilons.to_vec()),
        floor,
        m,
        degree: Some(degree),
        ..SweepConfig::new(Experiment::Claim2)
    })
}

/// Regularized `log|z1 - z2|²`, cross data `f = (0, z1)`.
pub fn run_claim34(epsilons: &[f64], degree: usize) -> Result<SweepResult> {
    run(&SweepConfig {
        epsilons: Some(epsilons.to_vec()),
        degree: Some(degree),
        ..SweepConfig::new(Experiment::Claim34)
    })
}

pub fn run_lemma_suite(family_name: &str) -> Result<SweepResult> {
    run(&SweepConfig {
        family: family_name.into(),
        ..SweepConfig::new(Experiment::Lemmas)
    })
}

fn quick() -> ModelOptions {
    ModelOptions {
        basis: None,
        check_refinement: false,
    }
}

fn converged(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONVERGENCE_TOL * a.abs().max(b.abs())
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn provenance(cfg: &SweepConfig, quadrature: Vec<String>) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        library_version: env!("CARGO_PKG_VERSION").into(),
        quadrature,
    }
}

fn describe_disk(s: &DiskRuleSpec) -> String {
    format!(
        "disk: radial {} x angular {}, {} annuli at ratio {}, map {:?}",
        s.radial_order, s.angular_order, s.annuli, s.grading_ratio, s.radial_map
    )
}

/// Numerical failures become flagged rows; anything else aborts the sweep.
fn flag<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if e.is_numerical() => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Rerun `norm_at(2D)` (or the largest nondegenerate degree below it) and
/// compare with the norm at `D`.
fn degree_check(
    parameter: f64,
    degree: usize,
    norm: f64,
    norm_at: impl Fn(usize) -> Result<f64>,
) -> Result<Option<DegreeCheck>> {
    if !norm.is_finite() {
        return Ok(None);
    }
    let step = (degree / 8).max(1);
    let mut d = 2 * degree;
    while d > degree {
        match flag(norm_at(d))? {
            Ok(check_norm) => {
                let rel = relative_change(norm, check_norm);
                return Ok(Some(DegreeCheck {
                    parameter,
                    degree,
                    check_degree: d,
                    norm,
                    check_norm,
                    relative_change: rel,
                    within_tolerance: rel < CONVERGENCE_TOL,
                }));
            }
            Err(msg) => log::info!("degree check at D={d} skipped: {msg}"),
        }
        d = d.saturating_sub(step);
    }
    Ok(None)
}

fn claim1_rule(cfg: &SweepConfig, degree: usize) -> DiskRuleSpec {
    DiskRuleSpec::new(
        cfg.radial_order.unwrap_or(64),
        cfg.angular_order.unwrap_or(2 * degree + 64),
    )
    .with_annuli(4)
}

fn jet_norm(weight: &AnyWeight, degree: usize, rule: &DiskRuleSpec, jet: &Jet) -> Result<(f64, f64)> {
    let rule: QuadratureRule = rule.build()?.into();
    let model = BergmanModel::build(weight, degree, &rule, &quick())?;
    let r = extend_jet_direct(&model, jet)?;
    Ok((r.norm_sqr, model.condition_number()))
}

fn claim1(cfg: &SweepConfig) -> Result<SweepResult> {
    let mut ms = cfg.ms();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    let jet = Jet::real(&[1.0, 0.0])?;
    let degree_of = |m: f64| cfg.degree.unwrap_or_else(|| cfg.schedule.degree(m));
    let rows: Vec<Claim1Row> = ms
        .par_iter()
        .map(|&m| -> Result<Claim1Row> {
            let degree = degree_of(m);
            let weight: AnyWeight = Weight::linear_re(m).into();
            let rule = claim1_rule(cfg, degree);
            let row = match flag(jet_norm(&weight, degree, &rule, &jet))? {
                Ok((norm, cond)) => {
                    let refined = if cfg.check_convergence {
                        flag(jet_norm(&weight, degree, &rule.refined(), &jet))?.map_or(f64::NAN, |r| r.0)
                    } else {
                        f64::NAN
                    };
                    Claim1Row {
                        m,
                        degree,
                        norm,
                        // φ(0) = 0 and |a0|² + |a1|² = 1
                        ratio: norm,
                        converged: converged(norm, refined),
                        refined_norm: refined,
                        condition_number: cond,
                        status: "ok".into(),
                    }
                }
                Err(msg) => Claim1Row {
                    m,
                    degree,
                    norm: f64::NAN,
                    ratio: f64::NAN,
                    converged: false,
                    refined_norm: f64::NAN,
                    condition_number: f64::NAN,
                    status: msg,
                },
            };
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let check = match (cfg.check_degree, rows.last()) {
        (true, Some(last)) => {
            let weight: AnyWeight = Weight::linear_re(last.m).into();
            degree_check(last.m, last.degree, last.norm, |d| {
                jet_norm(&weight, d, &claim1_rule(cfg, d), &jet).map(|r| r.0)
            })?
        }
        _ => None,
    };
    let values: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let quadrature = vec![describe_disk(&claim1_rule(cfg, degree_of(*ms.last().unwrap_or(&0.0))))
        + " (angular order 2D+64 per row unless fixed)"];
    Ok(SweepResult {
        schema: SCHEMA_VERSION,
        experiment: Experiment::Claim1,
        provenance: provenance(cfg, quadrature),
        rows: Rows::Claim1(rows),
        degree_check: check,
        divergence: Some(DivergenceVerdict::evaluate("ratio over increasing m", &values, 10.0)),
    })
}

fn claim2_rule(cfg: &SweepConfig, degree: usize, weight: &AnyWeight) -> DiskRuleSpec {
    let mut s = DiskRuleSpec::new(
        cfg.radial_order.unwrap_or(64),
        cfg.angular_order.unwrap_or(2 * degree + 64),
    )
    .with_annuli(40)
    .with_breakpoints(weight.kink_radii());
    s.grading_ratio = 0.25;
    s
}

fn claim2(cfg: &SweepConfig) -> Result<SweepResult> {
    let mut eps = cfg.epsilons();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let degree = cfg.fixed_degree();
    let jet = Jet::real(&[1.0, 0.0])?;
    let base = Weight::linear_re(cfg.m);
    let origin = [Complex64::new(0.0, 0.0)];
    let rows: Vec<Claim2Row> = eps
        .par_iter()
        .map(|&e| -> Result<Claim2Row> {
            let clamped = clamp_max(&base, e, cfg.floor)?;
            let radius = clamp_radius(&clamped).unwrap_or(f64::NAN);
            let weight: AnyWeight = clamped.into();
            let psi0 = weight.eval(&origin).value();
            let dpsi0 = weight.d_dz(&origin, 0)?;
            let (a0, a1) = (1.0f64, Complex64::new(0.0, 0.0));
            let rhs_naive = (a0 * a0 + a1.norm_sqr()) * (-psi0).exp();
            let rhs_connection = (a0 * a0 + (a1 - dpsi0 * a0).norm_sqr()) * (-psi0).exp();
            let rule = claim2_rule(cfg, degree, &weight);
            let solved = flag((|| -> Result<(f64, f64, f64)> {
                let q: QuadratureRule = rule.build()?.into();
                let model = BergmanModel::build(&weight, degree, &q, &quick())?;
                let norm = extend_jet_direct(&model, &jet)?.norm_sqr;
                let exact = rhs_estimate_jet(&model, &jet)?.exact;
                Ok((norm, exact, model.condition_number()))
            })())?;
            Ok(match solved {
                Ok((norm, rhs_exact, cond)) => {
                    let refined = if cfg.check_convergence {
                        flag(jet_norm(&weight, degree, &rule.refined(), &jet))?.map_or(f64::NAN, |r| r.0)
                    } else {
                        f64::NAN
                    };
                    Claim2Row {
                        epsilon: e,
                        floor: cfg.floor,
                        m: cfg.m,
                        degree,
                        norm,
                        rhs_naive,
                        rhs_connection,
                        ratio: norm / rhs_connection,
                        rhs_exact,
                        clamp_radius: radius,
                        dpsi0: dpsi0.norm(),
                        converged: converged(norm, refined),
                        refined_norm: refined,
                        condition_number: cond,
                        status: "ok".into(),
                    }
                }
                Err(msg) => Claim2Row {
                    epsilon: e,
                    floor: cfg.floor,
                    m: cfg.m,
                    degree,
                    norm: f64::NAN,
                    rhs_naive,
                    rhs_connection,
                    ratio: f64::NAN,
                    rhs_exact: f64::NAN,
                    clamp_radius: radius,
                    dpsi0: dpsi0.norm(),
                    converged: false,
                    refined_norm: f64::NAN,
                    condition_number: f64::NAN,
                    status: msg,
                },
            })
        })
        .collect::<Result<_>>()?;
    let check = match (cfg.check_degree, rows.last()) {
        (true, Some(last)) => {
            let weight: AnyWeight = clamp_max(&base, last.epsilon, cfg.floor)?.into();
            degree_check(last.epsilon, degree, last.norm, |d| {
                jet_norm(&weight, d, &claim2_rule(cfg, d, &weight), &jet).map(|r| r.0)
            })?
        }
        _ => None,
    };
    let values: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let quadrature = vec![describe_disk(&claim2_rule(cfg, degree, &Weight::zero(Domain::Disk).into()))
        + " plus a breakpoint at the clamp radius"];
    Ok(SweepResult {
        schema: SCHEMA_VERSION,
        experiment: Experiment::Claim2,
        provenance: provenance(cfg, quadrature),
        rows: Rows::Claim2(rows),
        degree_check: check,
        divergence: Some(DivergenceVerdict::evaluate("ratio over decreasing epsilon", &values, 2.0)),
    })
}

/// Diagonal-graded, circularly reduced bidisk rule with a breakpoint at the
/// kink `|z1 - z2| = ε`.
pub fn claim34_rule(radial: usize, angular: usize, epsilon: f64) -> BidiskRuleSpec {
    let f1 = DiskRuleSpec {
        radial_order: radial,
        angular_order: angular,
        annuli: 6,
        ..Default::default()
    };
    let mut f2 = f1.clone();
    f2.annuli = 8;
    f2.breakpoints = vec![epsilon];
    BidiskRuleSpec::diagonal(f1, f2).with_circular_reduction(true)
}

/// Branch rule for the `V` integrals of the regularized diagonal weight.
pub fn claim34_branch_rule(epsilon: f64) -> DiskRuleSpec {
    DiskRuleSpec::default().with_breakpoints(vec![epsilon])
}

fn cross_norm(weight: &AnyWeight, degree: usize, rule: &BidiskRuleSpec, cross: &CrossData) -> Result<(f64, BergmanModel, crate::extension::ExtensionReport)> {
    let q: QuadratureRule = rule.build()?.into();
    let model = BergmanModel::build(weight, degree, &q, &quick())?;
    let r = extend_cross(&model, cross)?;
    Ok((r.norm_sqr, model, r))
}

fn claim34(cfg: &SweepConfig) -> Result<SweepResult> {
    let mut eps = cfg.epsilons();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let degree = cfg.fixed_degree();
    let (radial, angular) = (cfg.radial_order.unwrap_or(16), cfg.angular_order.unwrap_or(48));
    let cross = CrossData::real(&[0.0], &[0.0, 1.0])?;
    let mut plain = NormSpec::new(NormKind::DerivativeOnY);
    plain.log_factor = false;
    let rows: Vec<Claim34Row> = eps
        .par_iter()
        .map(|&e| -> Result<Claim34Row> {
            let weight: AnyWeight = RegularizedLogWeight::diagonal(e).into();
            let branch = claim34_branch_rule(e);
            let rhs_l2 = branch_l2_norm(&cross, &weight, &plain, &branch)?.value();
            let rhs_twisted = rhs_l2 + derivative_norm_on_y(&cross, &weight, &plain, &branch)?.value();
            let rule = claim34_rule(radial, angular, e);
            Ok(match flag(cross_norm(&weight, degree, &rule, &cross))? {
                Ok((norm, model, report)) => {
                    let refined = if cfg.check_convergence {
                        flag(cross_norm(&weight, degree, &rule.refined(), &cross))?.map_or(f64::NAN, |r| r.0)
                    } else {
                        f64::NAN
                    };
                    let (h0, h1) = match report.breakdown {
                        crate::extension::Breakdown::Cross {
                            h0_norm_sqr,
                            h1_norm_sqr,
                        } => (h0_norm_sqr, h1_norm_sqr),
                        _ => (f64::NAN, f64::NAN),
                    };
                    Claim34Row {
                        epsilon: e,
                        degree,
                        norm,
                        rhs_l2,
                        rhs_twisted,
                        ratio_l2: norm / rhs_l2,
                        ratio_twisted: norm / rhs_twisted,
                        h0_norm_sqr: h0,
                        h1_norm_sqr: h1,
                        stationarity_residual: report.diagnostics.stationarity_residual,
                        converged: converged(norm, refined),
                        refined_norm: refined,
                        condition_number: model.condition_number(),
                        status: "ok".into(),
                    }
                }
                Err(msg) => Claim34Row {
                    epsilon: e,
                    degree,
                    norm: f64::NAN,
                    rhs_l2,
                    rhs_twisted,
                    ratio_l2: f64::NAN,
                    ratio_twisted: f64::NAN,
                    h0_norm_sqr: f64::NAN,
                    h1_norm_sqr: f64::NAN,
                    stationarity_residual: f64::NAN,
                    converged: false,
                    refined_norm: f64::NAN,
                    condition_number: f64::NAN,
                    status: msg,
                },
            })
        })
        .collect::<Result<_>>()?;
    let check = match (cfg.check_degree, rows.last()) {
        (true, Some(last)) => {
            let weight: AnyWeight = RegularizedLogWeight::diagonal(last.epsilon).into();
            let rule = claim34_rule(radial, angular, last.epsilon);
            degree_check(last.epsilon, degree, last.norm, |d| {
                cross_norm(&weight, d, &rule, &cross).map(|r| r.0)
            })?
        }
        _ => None,
    };
    let values: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let sample = claim34_rule(radial, angular, eps.last().copied().unwrap_or(0.1));
    let quadrature = vec![
        format!("bidisk z1 factor, circularly reduced: {}", describe_disk(&sample.factor1)),
        format!(
            "bidisk z2 factor, polar patch centered at z1 with a breakpoint at epsilon: {}",
            describe_disk(&sample.factor2)
        ),
        format!("branch integrals: {}", describe_disk(&claim34_branch_rule(0.1))),
    ];
    Ok(SweepResult {
        schema: SCHEMA_VERSION,
        experiment: Experiment::Claim34,
        provenance: provenance(cfg, quadrature),
        rows: Rows::Claim34(rows),
        degree_check: check,
        divergence: Some(DivergenceVerdict::evaluate("norm over decreasing epsilon", &values, 3.0)),
    })
}

fn default_disk_rule(cfg: &SweepConfig, weight: &AnyWeight) -> DiskRuleSpec {
    let mut s = DiskRuleSpec::new(cfg.radial_order.unwrap_or(64), cfg.angular_order.unwrap_or(128))
        .with_breakpoints(weight.kink_radii());
    s.grading_centers = weight.grading_centers();
    s
}

fn members(cfg: &SweepConfig) -> Result<Vec<FamilyMember>> {
    if cfg.weights.is_empty() {
        return family(&cfg.family);
    }
    Ok(cfg
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| FamilyMember::new(format!("weight{i}"), w.clone()))
        .collect())
}

fn disk_model(weight: &AnyWeight, degree: usize, rule: &DiskRuleSpec) -> Result<BergmanModel> {
    if weight.domain() != Domain::Disk {
        return Err(Error::Parameter("kernel tables and jets need disk weights".into()));
    }
    let q: QuadratureRule = rule.build()?.into();
    BergmanModel::build(weight, degree, &q, &quick())
}

fn kernel_table_of(model: &BergmanModel) -> Result<Vec<f64>> {
    (0..=LEMMA_MAX_K.min(model.degree())).map(|k| model.higher_kernel(k)).collect()
}

struct LemmaValues {
    b_k: Vec<f64>,
    omega_b: f64,
    stencil_residual: f64,
}

fn lemma_values(weight: &AnyWeight, degree: usize, rule: &DiskRuleSpec) -> Result<LemmaValues> {
    let model = disk_model(weight, degree, rule)?;
    Ok(LemmaValues {
        b_k: kernel_table_of(&model)?,
        omega_b: model.bergman_metric_at_zero()?,
        stencil_residual: model.metric_fd_residual()?,
    })
}

fn lemmas(cfg: &SweepConfig) -> Result<SweepResult> {
    let degree = cfg.fixed_degree();
    if degree < LEMMA_MAX_K {
        return Err(Error::Parameter(format!("the lemma suite needs degree >= {LEMMA_MAX_K}")));
    }
    let fam = members(cfg)?;
    let rows: Vec<LemmaRow> = fam
        .par_iter()
        .map(|mem| -> Result<LemmaRow> {
            let rule = mem.rule.clone().unwrap_or_else(|| default_disk_rule(cfg, &mem.weight));
            let weight_json = mem.weight.to_string();
            Ok(match flag(lemma_values(&mem.weight, degree, &rule))? {
                Ok(v) => {
                    let b0 = v.b_k[0];
                    let kernel_margin = (1..v.b_k.len())
                        .map(|k| {
                            let f = factorial(k);
                            v.b_k[k] / (f * f * b0) - 1.0
                        })
                        .fold(f64::INFINITY, f64::min);
                    let metric_margin = v.omega_b - 1.0;
                    let conv = if cfg.check_convergence {
                        match flag(lemma_values(&mem.weight, degree, &rule.refined()))? {
                            Ok(fine) => converged(b0, fine.b_k[0]) && converged(v.omega_b, fine.omega_b),
                            Err(_) => false,
                        }
                    } else {
                        true
                    };
                    let metric_ok = metric_margin >= LEMMA_MARGIN;
                    let kernel_ok = kernel_margin >= LEMMA_MARGIN;
                    let stencil_ok = v.stencil_residual < STENCIL_TOL;
                    LemmaRow {
                        name: mem.name.clone(),
                        weight: weight_json,
                        degree,
                        negative_control: mem.negative_control,
                        b_k: v.b_k,
                        omega_b: v.omega_b,
                        metric_margin,
                        kernel_margin,
                        stencil_residual: v.stencil_residual,
                        metric_ok,
                        kernel_ok,
                        stencil_ok,
                        converged: conv,
                        all_pass: metric_ok && kernel_ok && stencil_ok && conv,
                        status: "ok".into(),
                    }
                }
                Err(msg) => LemmaRow {
                    name: mem.name.clone(),
                    weight: weight_json,
                    degree,
                    negative_control: mem.negative_control,
                    b_k: Vec::new(),
                    omega_b: f64::NAN,
                    metric_margin: f64::NAN,
                    kernel_margin: f64::NAN,
                    stencil_residual: f64::NAN,
                    metric_ok: false,
                    kernel_ok: false,
                    stencil_ok: false,
                    converged: false,
                    all_pass: false,
                    status: msg,
                },
            })
        })
        .collect::<Result<_>>()?;
    let quadrature = vec![describe_disk(&default_disk_rule(cfg, &Weight::zero(Domain::Disk).into()))
        + ", graded toward the weight's singular centers and kinks"];
    Ok(SweepResult {
        schema: SCHEMA_VERSION,
        experiment: Experiment::Lemmas,
        provenance: provenance(cfg, quadrature),
        rows: Rows::Lemmas(rows),
        degree_check: None,
        divergence: None,
    })
}

fn kernel_table(cfg: &SweepConfig) -> Result<SweepResult> {
    let degree = cfg.fixed_degree();
    let fam = members(cfg)?;
    let rows: Vec<KernelRow> = fam
        .par_iter()
        .map(|mem| -> Result<KernelRow> {
            let rule = mem.rule.clone().unwrap_or_else(|| default_disk_rule(cfg, &mem.weight));
            let name = mem.name.clone();
            let weight_json = mem.weight.to_string();
            let built = flag((|| -> Result<(BergmanModel, Vec<f64>)> {
                let model = disk_model(&mem.weight, degree, &rule)?;
                let table = kernel_table_of(&model)?;
                Ok((model, table))
            })())?;
            Ok(match built {
                Ok((model, b_k)) => {
                    let conv = if cfg.check_convergence {
                        flag(disk_model(&mem.weight, degree, &rule.refined()).and_then(|m| m.higher_kernel(0)))?
                            .is_ok_and(|b| converged(b, b_k[0]))
                    } else {
                        true
                    };
                    let g = model.log_kernel_gradient_at_zero()?;
                    KernelRow {
                        name,
                        weight: weight_json,
                        degree,
                        condition_number: model.condition_number(),
                        b_k,
                        omega_b: model.bergman_metric_at_zero()?,
                        gradient: [g.re, g.im],
                        converged: conv,
                        status: "ok".into(),
                    }
                }
                Err(msg) => KernelRow {
                    name,
                    weight: weight_json,
                    degree,
                    condition_number: f64::NAN,
                    b_k: Vec::new(),
                    omega_b: f64::NAN,
                    gradient: [f64::NAN; 2],
                    converged: false,
                    status: msg,
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        schema: SCHEMA_VERSION,
        experiment: Experiment::KernelTable,
        provenance: provenance(cfg, vec![describe_disk(&default_disk_rule(cfg, &Weight::zero(Domain::Disk).into()))]),
        rows: Rows::KernelTable(rows),
        degree_check: None,
        divergence: None,
    })
}

fn extend(cfg: &SweepConfig) -> Result<SweepResult> {
    let degree = cfg.fixed_degree();
    let jet = Jet::new(cfg.jet.clone())?;
    let fam = members(cfg)?;
    let rows: Vec<ExtendRow> = fam
        .par_iter()
        .filter(|m| !m.negative_control)
        .map(|mem| -> Result<ExtendRow> {
            let rule = mem.rule.clone().unwrap_or_else(|| default_disk_rule(cfg, &mem.weight));
            let name = mem.name.clone();
            let weight_json = mem.weight.to_string();
            let solved = flag((|| {
                let model = disk_model(&mem.weight, degree, &rule)?;
                let direct = extend_jet_direct(&model, &jet)?;
                let recursive = extend_jet_recursive(&model, &jet)?;
                let est = if jet.len() == 2 {
                    Some(rhs_estimate_jet(&model, &jet)?)
                } else {
                    None
                };
                Ok((direct, recursive, est))
            })())?;
            Ok(match solved {
                Ok((direct, recursive, est)) => {
                    let conv = if cfg.check_convergence {
                        flag(jet_norm(&mem.weight, degree, &rule.refined(), &jet))?
                            .is_ok_and(|r| converged(direct.norm_sqr, r.0))
                    } else {
                        true
                    };
                    ExtendRow {
                        name,
                        weight: weight_json,
                        degree,
                        norm: direct.norm_sqr,
                        norm_recursive: recursive.norm_sqr,
                        rhs_exact: est.as_ref().map(|e| e.exact),
                        rhs_ot: est.as_ref().map(|e| e.ot_style),
                        constraint_residual: direct.diagnostics.constraint_residual,
                        converged: conv,
                        status: "ok".into(),
                    }
                }
                Err(msg) => ExtendRow {
                    name,
                    weight: weight_json,
                    degree,
                    norm: f64::NAN,
                    norm_recursive: f64::NAN,
                    rhs_exact: None,
                    rhs_ot: None,
                    constraint_residual: f64::NAN,
                    converged: false,
                    status: msg,
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        schema: SCHEMA_VERSION,
        experiment: Experiment::Extend,
        provenance: provenance(cfg, vec![describe_disk(&default_disk_rule(cfg, &Weight::zero(Domain::Disk).into()))]),
        rows: Rows::Extend(rows),
        degree_check: None,
        divergence: None,
    })
}

/// `π(1 + m²/2)`: the minimal norm of the jet `(1, 0)` for `φ = -2m Re z`.
pub fn claim1_exact(m: f64) -> f64 {
    PI * (1.0 + 0.5 * m * m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claim1_small_sweep() {
        let cfg = SweepConfig {
            ms: Some(vec![2.0, 0.0, 1.0]),
            check_degree: false,
            ..SweepConfig::new(Experiment::Claim1)
        };
        let r = run(&cfg).unwrap();
        let rows = r.claim1_rows();
        assert_eq!(rows.iter().map(|r| r.m).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        for row in rows {
            assert!((row.norm - claim1_exact(row.m)).abs() < 1e-8 * row.norm, "{row:?}");
            assert!(row.converged);
        }
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("m,degree,norm,ratio,converged\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn config_roundtrip_and_hash() {
        let cfg = SweepConfig {
            epsilons: Some(vec![0.3, 0.1]),
            ..SweepConfig::new(Experiment::Claim2)
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back = SweepConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.out = Some("x.csv".into());
        assert_eq!(other.hash(), cfg.hash());
        other.floor = 10.0;
        assert_ne!(other.hash(), cfg.hash());
        assert!(SweepConfig::from_json(r#"{"schema": 2}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"schema": 1, "bogus": 3}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"schema": 1, "ms": []}"#).is_err());
    }

    #[test]
    fn divergence_verdict() {
        let v = DivergenceVerdict::evaluate("x", &[1.0, 2.0, 5.0, 11.0], 10.0);
        assert!(v.diverges && v.strictly_increasing);
        let v = DivergenceVerdict::evaluate("x", &[1.0, 2.0, 5.0, 9.0], 10.0);
        assert!(!v.diverges);
        let v = DivergenceVerdict::evaluate("x", &[1.0, 20.0], 10.0);
        assert!(!v.diverges);
    }

    #[test]
    fn schedule() {
        let s = DegreeSchedule::default();
        assert_eq!(s.degree(1.0), 24);
        assert_eq!(s.degree(8.0), 48);
    }
}

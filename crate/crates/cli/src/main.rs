use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bergman_ext::bergman::{BergmanModel, ModelOptions, ModelSummary};
use bergman_ext::extension::{
    extend_cross, extend_jet_direct, extend_jet_recursive, rhs_estimate_cross, rhs_estimate_jet, CrossData,
    CrossEstimate, ExtensionReport, Jet, JetEstimate,
};
use bergman_ext::functionals::{
    derivative_norm_on_y, final_example_exact, final_example_integral, gamma_branch_norm, log_weighted_bulk_norm,
    FunctionalValue, GammaVariant, NormKind, NormSpec, Region,
};
use bergman_ext::harness::{self, claim34_rule, DegreeSchedule, Experiment, OutputFormat, SweepConfig};
use bergman_ext::poly::{parse_complex, ComplexPoly};
use bergman_ext::quadrature::{BidiskRuleSpec, DiskRuleSpec, QuadratureRule};
use bergman_ext::weights::{AnyWeight, Domain, Weight};
use bergman_ext::{Complex64, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "bergman-ext", version, about = "Weighted Bergman kernels, minimal L2 extensions and counterexample sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Model summary (B_k(0) table, metric, condition) and optional kernel value.
    Kernel(KernelArgs),
    /// Minimal extension of a jet at the origin of the disk.
    ExtendJet(ExtendJetArgs),
    /// Minimal extension of data on the cross {z1 z2 = 0} in the bidisk.
    ExtendCross(ExtendCrossArgs),
    /// Linear weights -2m Re z with the jet (1, 0).
    Claim1(Claim1Args),
    /// Clamped weights max(-2m Re z + eps log|z|^2, -A) with the jet (1, 0).
    Claim2(Claim2Args),
    /// Regularized log|z1 - z2|^2 with cross data (0, z1).
    Claim34(Claim34Args),
    /// Kernel inequalities and the stencil check over a weight family.
    Lemmas(LemmaArgs),
    /// Norm functionals on the cross.
    Norms(NormArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    radial_order: Option<usize>,
    #[arg(long)]
    angular_order: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SweepFlags {
    /// Skip the doubled-order recomputation behind the `converged` column.
    #[arg(long)]
    no_convergence_check: bool,
    /// Skip the doubled-degree check at the last swept parameter.
    #[arg(long)]
    no_degree_check: bool,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Weight as JSON, or @path to a JSON file.
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Point z, comma separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    /// Point w (defaults to z).
    #[arg(long, allow_hyphen_values = true)]
    w: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Direct,
    Recursive,
}

#[derive(Args, Debug)]
struct ExtendJetArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Jet values a0,a1,... (complex values like 1+2i allowed).
    #[arg(long, allow_hyphen_values = true)]
    jet: Option<String>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ExtendCrossArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Coefficients of f1(z2) on {z1 = 0}.
    #[arg(long, allow_hyphen_values = true)]
    f1: Option<String>,
    /// Coefficients of f2(z1) on {z2 = 0}.
    #[arg(long, allow_hyphen_values = true)]
    f2: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Claim1Args {
    /// m values: a range `1..8` (inclusive) or a list `1,2,4`.
    #[arg(long)]
    m: Option<String>,
    /// Fixed degree instead of the schedule max(min, per_m·m).
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    degree_min: Option<usize>,
    #[arg(long)]
    degree_per_m: Option<usize>,
    #[command(flatten)]
    checks: SweepFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Claim2Args {
    /// Epsilon values, comma separated.
    #[arg(long)]
    eps: Option<String>,
    /// The floor A.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    degree: Option<usize>,
    #[command(flatten)]
    checks: SweepFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Claim34Args {
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[command(flatten)]
    checks: SweepFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[command(flatten)]
    checks: SweepFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Bulk,
    GammaBranch,
    Derivative,
    FinalExample,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Theorem,
    Conjecture,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RegionArg {
    Full,
    Neighborhood,
    Excluding,
}

#[derive(Args, Debug)]
struct NormArgs {
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Bidisk weight as JSON or @path (default: the flat weight).
    #[arg(long)]
    weight: Option<String>,
    /// Bulk data U(z1, z2), e.g. "z1*z2".
    #[arg(long)]
    u: Option<String>,
    /// Branch data coefficients for the gamma-branch norm.
    #[arg(long, allow_hyphen_values = true)]
    data: Option<String>,
    /// 0 for {z1 = 0}, 1 for {z2 = 0}.
    #[arg(long)]
    branch: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    f1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    f2: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    region: Option<RegionArg>,
    #[arg(long)]
    r_sing: Option<f64>,
    #[arg(long)]
    normalization: Option<f64>,
    #[arg(long)]
    conic_k: Option<u32>,
    #[arg(long)]
    no_log_factor: bool,
    #[command(flatten)]
    common: Common,
}

/// Config file of the single-model commands.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SingleConfig {
    schema: Option<u32>,
    weight: Option<AnyWeight>,
    degree: Option<usize>,
    jet: Option<Vec<Complex64>>,
    method: Option<Method>,
    f1: Option<Vec<Complex64>>,
    f2: Option<Vec<Complex64>>,
    z: Option<Vec<Complex64>>,
    w: Option<Vec<Complex64>>,
    radial_order: Option<usize>,
    angular_order: Option<usize>,
    norm: Option<NormSpec>,
    u: Option<ComplexPoly>,
    data: Option<Vec<Complex64>>,
    branch: Option<usize>,
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Kernel(a) => kernel(a),
        Command::ExtendJet(a) => extend_jet(a),
        Command::ExtendCross(a) => extend_cross_cmd(a),
        Command::Claim1(a) => claim1(a),
        Command::Claim2(a) => claim2(a),
        Command::Claim34(a) => claim34(a),
        Command::Lemmas(a) => lemmas(a),
        Command::Norms(a) => norms(a),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_list(s: &str) -> CliResult<Vec<Complex64>> {
    s.split(',')
        .map(|t| parse_complex(t).map_err(CliError::from))
        .collect()
}

fn parse_reals(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("'{t}' is not a number")))
        })
        .collect()
}

/// `a..b` (inclusive, integer steps) or a comma-separated list.
fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| CliError::Usage(format!("bad range start in '{s}'")))?;
        let b: i64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| CliError::Usage(format!("bad range end in '{s}'")))?;
        if b < a {
            return Err(CliError::Usage(format!("empty range '{s}'")));
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    parse_reals(s)
}

fn parse_weight(s: &str) -> CliResult<AnyWeight> {
    let text = match s.strip_prefix('@') {
        Some(path) => read_text(Path::new(path))?,
        None => s.to_string(),
    };
    let w: AnyWeight =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("cannot parse weight: {e}")))?;
    w.validate()?;
    Ok(w)
}

fn load_single(common: &Common) -> CliResult<SingleConfig> {
    match &common.config {
        None => Ok(SingleConfig::default()),
        Some(p) => {
            let cfg: SingleConfig = serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))?;
            if cfg.schema.is_some_and(|s| s != harness::SCHEMA_VERSION) {
                return Err(CliError::Usage(format!(
                    "unsupported config schema (expected {})",
                    harness::SCHEMA_VERSION
                )));
            }
            Ok(cfg)
        }
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Lib(e.into())),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", text.trim_end()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Lib(e.into())),
                _ => Ok(()),
            }
        }
    }
}

/// Single-model commands write JSON only.
fn emit_json<T: Serialize>(value: &T, common: &Common) -> CliResult<()> {
    if common.format == Some(Format::Csv) {
        return Err(CliError::Usage("csv output is only available for sweeps".into()));
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Lib(e.into()))?;
    emit(&text, &common.out)
}

struct ModelInputs {
    weight: AnyWeight,
    degree: usize,
    radial: Option<usize>,
    angular: Option<usize>,
}

fn model_inputs(args: &ModelArgs, common: &Common, cfg: &SingleConfig, fallback: Option<AnyWeight>) -> CliResult<ModelInputs> {
    let weight = match (&args.weight, &cfg.weight, fallback) {
        (Some(s), _, _) => parse_weight(s)?,
        (None, Some(w), _) => {
            w.validate()?;
            w.clone()
        }
        (None, None, Some(w)) => w,
        (None, None, None) => return Err(CliError::Usage("--weight is required".into())),
    };
    let degree = args.degree.or(cfg.degree).unwrap_or(match weight.domain() {
        Domain::Disk => 24,
        Domain::Bidisk => 16,
    });
    Ok(ModelInputs {
        weight,
        degree,
        radial: common.radial_order.or(cfg.radial_order),
        angular: common.angular_order.or(cfg.angular_order),
    })
}

fn disk_rule(inputs: &ModelInputs) -> DiskRuleSpec {
    let mut s = DiskRuleSpec::new(
        inputs.radial.unwrap_or(64),
        inputs.angular.unwrap_or((2 * inputs.degree + 64).max(128)),
    )
    .with_breakpoints(inputs.weight.kink_radii());
    s.grading_centers = inputs.weight.grading_centers();
    s
}

/// Diagonal grading for weights singular along `z1 = z2`, a tensor rule
/// otherwise.
fn bidisk_rule(inputs: &ModelInputs) -> BidiskRuleSpec {
    let (r, a) = (inputs.radial.unwrap_or(16), inputs.angular.unwrap_or(48));
    let diagonal = match &inputs.weight {
        AnyWeight::Regularized(w) => Some(w.epsilon),
        AnyWeight::Plain(w) if w.log_terms.iter().any(|t| t.f.vars_used() == 2) => Some(0.0),
        _ => None,
    };
    match diagonal {
        Some(eps) => {
            let mut s = claim34_rule(r, a, eps.max(1e-3));
            if eps == 0.0 {
                s.factor2.breakpoints.clear();
            }
            s.with_circular_reduction(inputs.weight.is_jointly_circular())
        }
        None => {
            let f = DiskRuleSpec {
                radial_order: r,
                angular_order: a,
                annuli: 4,
                ..Default::default()
            };
            BidiskRuleSpec::tensor(f.clone(), f)
        }
    }
}

fn build(inputs: &ModelInputs) -> CliResult<BergmanModel> {
    let rule: QuadratureRule = match inputs.weight.domain() {
        Domain::Disk => disk_rule(inputs).build()?.into(),
        Domain::Bidisk => bidisk_rule(inputs).build()?.into(),
    };
    let opts = ModelOptions {
        basis: None,
        check_refinement: false,
    };
    Ok(BergmanModel::build(&inputs.weight, inputs.degree, &rule, &opts)?)
}

#[derive(Serialize)]
struct KernelOutput {
    summary: ModelSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<Complex64>,
}

fn kernel(a: KernelArgs) -> CliResult<()> {
    let cfg = load_single(&a.common)?;
    let inputs = model_inputs(&a.model, &a.common, &cfg, None)?;
    let model = build(&inputs)?;
    let z = match &a.z {
        Some(s) => Some(parse_list(s)?),
        None => cfg.z.clone(),
    };
    let w = match &a.w {
        Some(s) => Some(parse_list(s)?),
        None => cfg.w.clone().or_else(|| z.clone()),
    };
    let kernel = match (z, w) {
        (Some(z), Some(w)) => {
            let domain = model.domain();
            if !domain.contains(&z) || !domain.contains(&w) {
                return Err(CliError::Usage(format!(
                    "points must have {} coordinate(s) inside the unit polydisk",
                    domain.dim()
                )));
            }
            Some(model.kernel(&z, &w))
        }
        _ => None,
    };
    emit_json(
        &KernelOutput {
            summary: model.summary(),
            kernel,
        },
        &a.common,
    )
}

#[derive(Serialize)]
struct JetOutput {
    report: ExtensionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<JetEstimate>,
}

fn extend_jet(a: ExtendJetArgs) -> CliResult<()> {
    let cfg = load_single(&a.common)?;
    let inputs = model_inputs(&a.model, &a.common, &cfg, None)?;
    if inputs.weight.domain() != Domain::Disk {
        return Err(CliError::Usage("extend-jet needs a disk weight".into()));
    }
    let values = match (&a.jet, &cfg.jet) {
        (Some(s), _) => parse_list(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(CliError::Usage("--jet is required".into())),
    };
    let jet = Jet::new(values)?;
    let model = build(&inputs)?;
    let report = match a.method.or(cfg.method).unwrap_or(Method::Direct) {
        Method::Direct => extend_jet_direct(&model, &jet)?,
        Method::Recursive => extend_jet_recursive(&model, &jet)?,
    };
    let estimate = if jet.len() == 2 {
        Some(rhs_estimate_jet(&model, &jet)?)
    } else {
        None
    };
    emit_json(&JetOutput { report, estimate }, &a.common)
}

#[derive(Serialize)]
struct CrossOutput {
    report: ExtensionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<CrossEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate_error: Option<String>,
}

fn cross_data(f1: &Option<String>, f2: &Option<String>, cfg: &SingleConfig) -> CliResult<CrossData> {
    let get = |flag: &Option<String>, conf: &Option<Vec<Complex64>>, name: &str| -> CliResult<Vec<Complex64>> {
        match (flag, conf) {
            (Some(s), _) => parse_list(s),
            (None, Some(v)) => Ok(v.clone()),
            (None, None) => Err(CliError::Usage(format!("--{name} is required"))),
        }
    };
    Ok(CrossData::new(get(f1, &cfg.f1, "f1")?, get(f2, &cfg.f2, "f2")?)?)
}

fn extend_cross_cmd(a: ExtendCrossArgs) -> CliResult<()> {
    let cfg = load_single(&a.common)?;
    let inputs = model_inputs(&a.model, &a.common, &cfg, Some(Weight::zero(Domain::Bidisk).into()))?;
    if inputs.weight.domain() != Domain::Bidisk {
        return Err(CliError::Usage("extend-cross needs a bidisk weight".into()));
    }
    let cross = cross_data(&a.f1, &a.f2, &cfg)?;
    let model = build(&inputs)?;
    let report = extend_cross(&model, &cross)?;
    let mut branch = DiskRuleSpec::default().with_breakpoints(inputs.weight.kink_radii());
    if let Some(r) = inputs.radial {
        branch.radial_order = r;
    }
    let (estimate, estimate_error) = match branch.build().and_then(|r| rhs_estimate_cross(&model, &cross, &r)) {
        Ok(e) => (Some(e), None),
        Err(e) if e.is_numerical() => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    emit_json(
        &CrossOutput {
            report,
            estimate,
            estimate_error,
        },
        &a.common,
    )
}

fn load_sweep(common: &Common, experiment: Experiment) -> CliResult<(SweepConfig, Option<OutputFormat>)> {
    let (mut cfg, file_format) = match &common.config {
        None => (SweepConfig::new(experiment), None),
        Some(p) => {
            let text = read_text(p)?;
            let raw: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))?;
            let has_format = raw.get("format").is_some();
            let cfg: SweepConfig = serde_json::from_value(raw)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))?;
            let f = has_format.then_some(cfg.format);
            (cfg, f)
        }
    };
    cfg.experiment = experiment;
    if let Some(r) = common.radial_order {
        cfg.radial_order = Some(r);
    }
    if let Some(a) = common.angular_order {
        cfg.angular_order = Some(a);
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok((cfg, file_format))
}

fn apply_checks(cfg: &mut SweepConfig, flags: &SweepFlags) {
    if flags.no_convergence_check {
        cfg.check_convergence = false;
    }
    if flags.no_degree_check {
        cfg.check_degree = false;
    }
}

/// Explicit flag, then the extension of `--out`, then the config file, then
/// the command default.
fn sweep_format(common: &Common, file_format: Option<OutputFormat>, default: OutputFormat) -> OutputFormat {
    if let Some(f) = common.format {
        return match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(ext) = common.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        match ext.to_ascii_lowercase().as_str() {
            "json" => return OutputFormat::Json,
            "csv" => return OutputFormat::Csv,
            _ => {}
        }
    }
    file_format.unwrap_or(default)
}

fn finish_sweep(mut cfg: SweepConfig, common: &Common, file_format: Option<OutputFormat>, default: OutputFormat) -> CliResult<()> {
    cfg.format = sweep_format(common, file_format, default);
    cfg.validate()?;
    let result = harness::run(&cfg)?;
    let text = result.render(cfg.format)?;
    emit(&text, &cfg.out)
}

fn claim1(a: Claim1Args) -> CliResult<()> {
    let (mut cfg, ff) = load_sweep(&a.common, Experiment::Claim1)?;
    if let Some(m) = &a.m {
        cfg.ms = Some(parse_grid(m)?);
    }
    if a.degree.is_some() {
        cfg.degree = a.degree;
    }
    let mut s: DegreeSchedule = cfg.schedule;
    if let Some(v) = a.degree_min {
        s.min = v;
    }
    if let Some(v) = a.degree_per_m {
        s.per_m = v;
    }
    cfg.schedule = s;
    apply_checks(&mut cfg, &a.checks);
    finish_sweep(cfg, &a.common, ff, OutputFormat::Csv)
}

fn claim2(a: Claim2Args) -> CliResult<()> {
    let (mut cfg, ff) = load_sweep(&a.common, Experiment::Claim2)?;
    if let Some(e) = &a.eps {
        cfg.epsilons = Some(parse_reals(e)?);
    }
    if let Some(f) = a.floor {
        cfg.floor = f;
    }
    if let Some(m) = a.m {
        cfg.m = m;
    }
    if a.degree.is_some() {
        cfg.degree = a.degree;
    }
    apply_checks(&mut cfg, &a.checks);
    finish_sweep(cfg, &a.common, ff, OutputFormat::Csv)
}

fn claim34(a: Claim34Args) -> CliResult<()> {
    let (mut cfg, ff) = load_sweep(&a.common, Experiment::Claim34)?;
    if let Some(e) = &a.eps {
        cfg.epsilons = Some(parse_reals(e)?);
    }
    if a.degree.is_some() {
        cfg.degree = a.degree;
    }
    apply_checks(&mut cfg, &a.checks);
    finish_sweep(cfg, &a.common, ff, OutputFormat::Csv)
}

fn lemmas(a: LemmaArgs) -> CliResult<()> {
    let (mut cfg, ff) = load_sweep(&a.common, Experiment::Lemmas)?;
    if let Some(f) = &a.family {
        harness::family(f)?;
        cfg.family = f.clone();
    }
    if a.degree.is_some() {
        cfg.degree = a.degree;
    }
    apply_checks(&mut cfg, &a.checks);
    finish_sweep(cfg, &a.common, ff, OutputFormat::Json)
}

#[derive(Serialize)]
struct NormOutput {
    spec: NormSpec,
    value: FunctionalValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<f64>,
}

fn norm_spec(a: &NormArgs, cfg: &SingleConfig) -> CliResult<NormSpec> {
    let mut spec = match (a.kind, &cfg.norm) {
        (Some(k), _) => {
            let kind = match k {
                KindArg::Bulk => NormKind::LogWeightedBulk,
                KindArg::GammaBranch => NormKind::GammaBranch,
                KindArg::Derivative => NormKind::DerivativeOnY,
                KindArg::FinalExample => NormKind::FinalExample,
            };
            let mut s = cfg.norm.clone().unwrap_or_else(|| NormSpec::new(kind));
            s.kind = kind;
            s
        }
        (None, Some(s)) => s.clone(),
        (None, None) => return Err(CliError::Usage("--kind is required".into())),
    };
    if let Some(g) = a.gamma {
        spec.gamma = g;
    }
    if let Some(v) = a.variant {
        spec.variant = match v {
            VariantArg::Theorem => GammaVariant::Theorem,
            VariantArg::Conjecture => GammaVariant::Conjecture,
        };
    }
    if a.epsilon.is_some() {
        spec.epsilon = a.epsilon;
    }
    if let Some(n) = a.normalization {
        spec.normalization = n;
    }
    if a.conic_k.is_some() {
        spec.conic_k = a.conic_k;
    }
    if a.no_log_factor {
        spec.log_factor = false;
    }
    let r_sing = a.r_sing.unwrap_or(0.5);
    match a.region {
        Some(RegionArg::Full) => spec.region = Region::Full,
        Some(RegionArg::Neighborhood) => spec.region = Region::SingularNeighborhood { r_sing },
        Some(RegionArg::Excluding) => spec.region = Region::ExcludingSingular { r_sing },
        None if a.r_sing.is_some() => {
            return Err(CliError::Usage("--r-sing needs --region neighborhood or excluding".into()))
        }
        None => {}
    }
    spec.validate()?;
    Ok(spec)
}

fn norms(a: NormArgs) -> CliResult<()> {
    let cfg = load_single(&a.common)?;
    let spec = norm_spec(&a, &cfg)?;
    let margs = ModelArgs {
        weight: a.weight.clone(),
        degree: None,
    };
    let inputs = model_inputs(&margs, &a.common, &cfg, Some(Weight::zero(Domain::Bidisk).into()))?;
    let mut branch_rule = DiskRuleSpec::default().with_breakpoints(inputs.weight.kink_radii());
    if let Some(r) = inputs.radial {
        branch_rule.radial_order = r;
    }
    if let Some(an) = inputs.angular {
        branch_rule.angular_order = an;
    }
    let (value, exact) = match spec.kind {
        NormKind::LogWeightedBulk => {
            let u = match (&a.u, &cfg.u) {
                (Some(s), _) => ComplexPoly::parse(s)?,
                (None, Some(p)) => p.clone(),
                (None, None) => return Err(CliError::Usage("--u is required for the bulk norm".into())),
            };
            (log_weighted_bulk_norm(&u, &inputs.weight, &spec, &bidisk_rule(&inputs))?, None)
        }
        NormKind::GammaBranch => {
            let data = match (&a.data, &cfg.data) {
                (Some(s), _) => parse_list(s)?,
                (None, Some(v)) => v.clone(),
                (None, None) => return Err(CliError::Usage("--data is required for the branch norm".into())),
            };
            let branch = a.branch.or(cfg.branch).unwrap_or(1);
            (gamma_branch_norm(&data, branch, &inputs.weight, &spec, &branch_rule)?, None)
        }
        NormKind::DerivativeOnY => {
            let cross = cross_data(&a.f1, &a.f2, &cfg)?;
            (derivative_norm_on_y(&cross, &inputs.weight, &spec, &branch_rule)?, None)
        }
        NormKind::FinalExample => {
            let eps = spec.epsilon.unwrap_or_default();
            let rule = branch_rule.clone().with_breakpoints(vec![eps]);
            (final_example_integral(eps, &rule)?, Some(final_example_exact(eps)))
        }
    };
    emit_json(&NormOutput { spec, value, exact }, &a.common)
}

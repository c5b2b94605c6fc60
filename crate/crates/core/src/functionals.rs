//! Norm functionals on the cross `V = {z1 z2 = 0}` in the bidisk: the
//! log-weighted bulk norm, the `γ`-branch norms, the twisted-derivative norm
//! on `Y`, and the model integral `∫ dλ/(ε²+|z|²)`.
//!
//! Branch convention: branch 0 is `V1 = {z1 = 0}` parametrized by `z2`,
//! branch 1 is `V2 = {z2 = 0}` parametrized by `z1`. On each branch the
//! section `s_Y = z1 z2` has `|u/ds| = |u(z)/z|`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::CrossData;
use crate::poly::{horner, horner_derivative, ComplexPoly};
use crate::quadrature::{BidiskRuleSpec, DiskRule, DiskRuleSpec, LevelSums};
use crate::weights::{twisted_derivative, AnyWeight, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    LogWeightedBulk,
    GammaBranch,
    DerivativeOnY,
    FinalExample,
}

/// Weight inside the `γ`-branch bracket: `e^{-φ/(1+γ)}` or `e^{-φ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaVariant {
    #[default]
    Theorem,
    Conjecture,
}

/// Where a functional is integrated. `V_sing` is the polydisk of radius
/// `r_sing` around the node of the cross.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Region {
    #[default]
    Full,
    SingularNeighborhood { r_sing: f64 },
    ExcludingSingular { r_sing: f64 },
}

impl Region {
    fn validate(self) -> Result<()> {
        match self {
            Region::Full => Ok(()),
            Region::SingularNeighborhood { r_sing } | Region::ExcludingSingular { r_sing } => {
                if r_sing > 0.0 && r_sing < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("r_sing must lie in (0,1), got {r_sing}")))
                }
            }
        }
    }

    /// Adapt a unit-disk recipe to the region.
    fn disk_spec(self, base: &DiskRuleSpec) -> DiskRuleSpec {
        match self {
            Region::Full => base.clone(),
            Region::SingularNeighborhood { r_sing } => base.clone().with_radius(r_sing * base.radius),
            Region::ExcludingSingular { r_sing } => {
                let mut s = base.clone();
                s.breakpoints.push(r_sing * base.radius);
                s
            }
        }
    }

    fn keeps(self, z: &[Complex64]) -> bool {
        match self {
            Region::ExcludingSingular { r_sing } => z.iter().any(|v| v.norm() >= r_sing),
            _ => true,
        }
    }
}

fn default_normalization() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Parameters of a norm functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub kind: NormKind,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub variant: GammaVariant,
    /// Regularization parameter of the final example.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub region: Region,
    /// `δ` in `|s_j|² = e^{-δ}|z_j|²`, which keeps `log²|s_j|²` away from 0
    /// on the boundary of the bidisk.
    #[serde(default = "default_normalization")]
    pub normalization: f64,
    /// Optional conic density `|z|^{-2(1-1/k)}` on the branches, `k ∈ {2,3}`.
    #[serde(default)]
    pub conic_k: Option<u32>,
    /// Include `log²(max|s_j|²)` in the derivative norm.
    #[serde(default = "default_true")]
    pub log_factor: bool,
}

impl NormSpec {
    pub fn new(kind: NormKind) -> Self {
        NormSpec {
            kind,
            gamma: 0.0,
            variant: GammaVariant::Theorem,
            epsilon: None,
            region: Region::Full,
            normalization: 1.0,
            conic_k: None,
            log_factor: true,
        }
    }

    pub fn gamma_branch(gamma: f64, variant: GammaVariant) -> Self {
        NormSpec {
            gamma,
            variant,
            ..NormSpec::new(NormKind::GammaBranch)
        }
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Parameter(format!("gamma must lie in [0,1], got {}", self.gamma)));
        }
        self.region.validate()?;
        if !(self.normalization >= 0.0 && self.normalization.is_finite()) {
            return Err(Error::Parameter(format!(
                "normalization must be finite and >= 0, got {}",
                self.normalization
            )));
        }
        if let Some(k) = self.conic_k {
            if !(k == 2 || k == 3) {
                return Err(Error::Parameter(format!("conic_k must be 2 or 3, got {k}")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Parameter(format!("epsilon must be positive, got {e}")));
            }
        } else if self.kind == NormKind::FinalExample {
            return Err(Error::Parameter("the final example needs epsilon".into()));
        }
        Ok(())
    }

    fn conic_density(&self, z: Complex64) -> f64 {
        match self.conic_k {
            Some(k) => z.norm_sqr().powf(-(1.0 - 1.0 / k as f64)),
            None => 1.0,
        }
    }
}

/// Value of a functional. Divergent integrals carry the growth observed when
/// the radial grading is deepened instead of an overflowed number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum FunctionalValue {
    Finite {
        value: f64,
    },
    Divergent {
        /// Innermost-to-next shell ratio of the integrand mass.
        shell_ratio: f64,
        /// Increase of the integral per added graded annulus.
        growth_per_annulus: f64,
    },
}

impl FunctionalValue {
    /// The value, `+∞` when divergent.
    pub fn value(self) -> f64 {
        match self {
            FunctionalValue::Finite { value } => value,
            FunctionalValue::Divergent { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, FunctionalValue::Finite { .. })
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        match self {
            FunctionalValue::Finite { value } => FunctionalValue::Finite { value: f(value) },
            d => d,
        }
    }
}

/// Relative size below which `|∂^φ f|²` is treated as an exact zero.
const CANCELLATION: f64 = 1e-26;

fn finite(value: f64) -> FunctionalValue {
    FunctionalValue::Finite { value }
}

fn branch_point(branch: usize, z: Complex64) -> [Complex64; 2] {
    let zero = Complex64::new(0.0, 0.0);
    match branch {
        0 => [zero, z],
        _ => [z, zero],
    }
}

fn check_branch(branch: usize) -> Result<()> {
    if branch > 1 {
        return Err(Error::Parameter(format!("branch must be 0 or 1, got {branch}")));
    }
    Ok(())
}

fn check_bidisk(weight: &AnyWeight) -> Result<()> {
    if weight.domain() != Domain::Bidisk {
        return Err(Error::Parameter("branch and bulk functionals need a bidisk weight".into()));
    }
    Ok(())
}

fn level_sums(spec: &DiskRuleSpec, f: &(dyn Fn(Complex64) -> f64 + Sync)) -> Result<(DiskRule, LevelSums)> {
    let rule = spec.build()?;
    let sums = rule.integrate_by_level(f)?;
    Ok((rule, sums))
}

/// `∫ f dλ` over a branch disk, with divergence at the center reported as
/// [`FunctionalValue::Divergent`].
fn branch_integral(
    base: &DiskRuleSpec,
    region: Region,
    f: impl Fn(Complex64) -> f64 + Sync,
) -> Result<FunctionalValue> {
    let spec = region.disk_spec(base);
    let g = |z: Complex64| if region.keeps(&[z]) { f(z) } else { 0.0 };
    let (_, sums) = level_sums(&spec, &g)?;
    if !sums.diverges() {
        return Ok(finite(sums.total()));
    }
    let shell_ratio = sums.growth().map_or(f64::NAN, |s| s.ratio);
    let mut deeper = spec.clone();
    deeper.annuli *= 2;
    let (_, deep) = level_sums(&deeper, &g)?;
    let added = (deeper.annuli - spec.annuli).max(1) as f64;
    Ok(FunctionalValue::Divergent {
        shell_ratio,
        growth_per_annulus: (deep.total() - sums.total()) / added,
    })
}

/// `∫_{region} |U|²/(|s_Y|² ∏_j log²|s_j|²) e^{-φ} dλ²` with `s_Y = z1 z2`
/// and `|s_j|² = e^{-δ}|z_j|²`. When `U` vanishes on `V` the division by
/// `z1 z2` is carried out on the polynomial.
///
/// Divergence is detected by deepening the grading of both factors twice:
/// increments that do not shrink mean the integral is not finite.
pub fn log_weighted_bulk_norm(
    u: &ComplexPoly,
    weight: &AnyWeight,
    spec: &NormSpec,
    rule: &BidiskRuleSpec,
) -> Result<FunctionalValue> {
    spec.validate()?;
    check_bidisk(weight)?;
    if u.vars_used() > 2 {
        return Err(Error::Parameter("bulk data must be a polynomial in z1, z2".into()));
    }
    if u.is_zero() {
        return Ok(finite(0.0));
    }
    let terms: Vec<(u32, u32, Complex64)> = u.terms().collect();
    let divisible = terms.iter().all(|&(a, b, _)| a >= 1 && b >= 1);
    let delta = spec.normalization;
    let region = spec.region;
    let integrand = |z1: Complex64, z2: Complex64| -> Complex64 {
        let z = [z1, z2];
        if !region.keeps(&z) {
            return Complex64::new(0.0, 0.0);
        }
        let l1 = z1.norm_sqr().ln() - delta;
        let l2 = z2.norm_sqr().ln() - delta;
        let num = if divisible {
            terms
                .iter()
                .map(|&(a, b, c)| c * z1.powu(a - 1) * z2.powu(b - 1))
                .sum::<Complex64>()
                .norm_sqr()
        } else {
            u.eval(&z).norm_sqr() / (z1.norm_sqr() * z2.norm_sqr())
        };
        if num == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(num * weight.density(&z) / (l1 * l1 * l2 * l2), 0.0)
    };
    let region_spec = |s: &BidiskRuleSpec| -> BidiskRuleSpec {
        let mut s = s.clone();
        s.factor1 = region.disk_spec(&s.factor1);
        s.factor2 = region.disk_spec(&s.factor2);
        s
    };
    let deepen = |s: &BidiskRuleSpec, factor: f64| -> BidiskRuleSpec {
        let mut s = s.clone();
        s.factor1.annuli = ((s.factor1.annuli as f64 * factor).round() as usize).max(1);
        s.factor2.annuli = ((s.factor2.annuli as f64 * factor).round() as usize).max(1);
        s
    };
    let base = region_spec(rule);
    let value = base.build()?.integrate(integrand)?.re;
    let coarse = deepen(&base, 0.5);
    let fine = deepen(&base, 2.0);
    if coarse.factor1.annuli == base.factor1.annuli && coarse.factor2.annuli == base.factor2.annuli {
        return Ok(finite(value));
    }
    let v_coarse = coarse.build()?.integrate(integrand)?.re;
    let v_fine = fine.build()?.integrate(integrand)?.re;
    let d1 = value - v_coarse;
    let d2 = v_fine - value;
    let steps = (fine.factor1.annuli - base.factor1.annuli).max(1) as f64;
    // a convergent tail shrinks as the grading deepens; a divergent one keeps
    // growing at least linearly in the number of annuli
    if d2 > 1e-6 * value.abs() && d2 >= d1 * 1.5 {
        let shell_ratio = if d1 > 0.0 { d2 / d1 } else { f64::INFINITY };
        return Ok(FunctionalValue::Divergent {
            shell_ratio,
            growth_per_annulus: d2 / steps,
        });
    }
    Ok(finite(value))
}

/// `(∫_{V_i ∩ region} |u/ds|^{2/(1+γ)} w dλ)^{1+γ}` with `|u/ds| = |u(z)/z|`
/// and `w = e^{-φ/(1+γ)}` (theorem) or `e^{-φ}` (conjecture), optionally
/// times the conic density.
pub fn gamma_branch_norm(
    u: &[Complex64],
    branch: usize,
    weight: &AnyWeight,
    spec: &NormSpec,
    rule: &DiskRuleSpec,
) -> Result<FunctionalValue> {
    spec.validate()?;
    check_bidisk(weight)?;
    check_branch(branch)?;
    if u.iter().all(|c| c.norm_sqr() == 0.0) {
        return Ok(finite(0.0));
    }
    let p = 1.0 + spec.gamma;
    let wexp = match spec.variant {
        GammaVariant::Theorem => 1.0 / p,
        GammaVariant::Conjecture => 1.0,
    };
    // u/z as a polynomial plus the residual pole u(0)/z
    let pole = u[0];
    let quotient = &u[1..];
    let v = branch_integral(rule, spec.region, |z| {
        let q = horner(quotient, z) + pole / z;
        let a = q.norm_sqr();
        if a == 0.0 {
            return 0.0;
        }
        let pt = branch_point(branch, z);
        let phi = weight.eval(&pt).value();
        a.powf(1.0 / p) * (-phi * wexp).exp() * spec.conic_density(z)
    })?;
    Ok(v.map(|x| x.powf(p)))
}

/// `Σ_i ∫_{V_i ∩ region} log²(max|s_j|²) |∂^φ f_i|² e^{-φ} dλ` (the log factor
/// is dropped when `spec.log_factor` is false). On `V_i` the maximum is the
/// modulus of the branch coordinate.
pub fn derivative_norm_on_y(
    cross: &CrossData,
    weight: &AnyWeight,
    spec: &NormSpec,
    rule: &DiskRuleSpec,
) -> Result<FunctionalValue> {
    spec.validate()?;
    check_bidisk(weight)?;
    let delta = spec.normalization;
    let mut total = 0.0;
    for branch in 0..2 {
        let data = if branch == 0 { cross.f1() } else { cross.f2() };
        if data.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        let var = 1 - branch;
        let err = std::sync::Mutex::new(None);
        let v = branch_integral(rule, spec.region, |z| {
            let pt = branch_point(branch, z);
            let d = match twisted_derivative(weight, data, &pt, var) {
                Ok(d) => d.norm_sqr(),
                Err(e) => {
                    err.lock().unwrap().get_or_insert(e);
                    return 0.0;
                }
            };
            // exact cancellation of f' against f ∂φ leaves rounding noise only
            let scale = horner_derivative(data, z).norm_sqr()
                + horner(data, z).norm_sqr() * weight.d_dz(&pt, var).map_or(0.0, |g| g.norm_sqr());
            if d <= CANCELLATION * scale {
                return 0.0;
            }
            let lf = if spec.log_factor {
                let l = z.norm_sqr().ln() - delta;
                l * l
            } else {
                1.0
            };
            lf * d * weight.density(&pt) * spec.conic_density(z)
        })?;
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        match v {
            FunctionalValue::Finite { value } => total += value,
            d => return Ok(d),
        }
    }
    Ok(finite(total))
}

/// `Σ_i ∫_{V_i ∩ region} |f_i|² e^{-φ} dλ`.
pub fn branch_l2_norm(
    cross: &CrossData,
    weight: &AnyWeight,
    spec: &NormSpec,
    rule: &DiskRuleSpec,
) -> Result<FunctionalValue> {
    spec.validate()?;
    check_bidisk(weight)?;
    let mut total = 0.0;
    for branch in 0..2 {
        let data = if branch == 0 { cross.f1() } else { cross.f2() };
        if data.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        let v = branch_integral(rule, spec.region, |z| {
            let a = horner(data, z).norm_sqr();
            if a == 0.0 {
                return 0.0;
            }
            a * weight.density(&branch_point(branch, z)) * spec.conic_density(z)
        })?;
        match v {
            FunctionalValue::Finite { value } => total += value,
            d => return Ok(d),
        }
    }
    Ok(finite(total))
}

/// `∫_Δ dλ/(ε²+|z|²)` by quadrature.
pub fn final_example_integral(epsilon: f64, rule: &DiskRuleSpec) -> Result<FunctionalValue> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    branch_integral(rule, Region::Full, |z| 1.0 / (epsilon * epsilon + z.norm_sqr()))
}

/// Closed form `π ln(1 + 1/ε²)` of [`final_example_integral`].
pub fn final_example_exact(epsilon: f64) -> f64 {
    PI * (1.0 / (epsilon * epsilon)).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{RegularizationKind, RegularizedLogWeight, Weight};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn flat() -> AnyWeight {
        Weight::zero(Domain::Bidisk).into()
    }

    /// `∫_0^∞ e^{-t}/(t+δ)² dt` by the series of `E_1`.
    fn bulk_factor_oracle(delta: f64) -> f64 {
        // ∫ e^{-t}/(t+δ)² = 1/δ - e^δ E_1(δ)
        let mut e1 = -0.577_215_664_901_532_9 - delta.ln();
        let mut term = 1.0;
        for k in 1..200 {
            term *= -delta / k as f64;
            e1 -= term / k as f64;
        }
        PI * (1.0 / delta - delta.exp() * e1)
    }

    #[test]
    fn bulk_norm_of_z1z2_factorizes() {
        let u = ComplexPoly::parse("z1*z2").unwrap();
        let spec = NormSpec::new(NormKind::LogWeightedBulk);
        let v = log_weighted_bulk_norm(&u, &flat(), &spec, &BidiskRuleSpec::default()).unwrap();
        let one = bulk_factor_oracle(1.0);
        assert!((v.value() - one * one).abs() < 1e-6 * one * one, "{v:?} vs {}", one * one);
        let u2 = ComplexPoly::parse("2*z1*z2").unwrap();
        let v2 = log_weighted_bulk_norm(&u2, &flat(), &spec, &BidiskRuleSpec::default()).unwrap();
        assert!((v2.value() - 4.0 * v.value()).abs() < 1e-12 * v2.value());
        let zero = ComplexPoly::parse("0").unwrap();
        assert_eq!(log_weighted_bulk_norm(&zero, &flat(), &spec, &BidiskRuleSpec::default()).unwrap().value(), 0.0);
    }

    #[test]
    fn gamma_branch_examples() {
        let rule = DiskRuleSpec::default();
        let spec = NormSpec::gamma_branch(1.0, GammaVariant::Theorem);
        let v = gamma_branch_norm(&[c(0.0), c(1.0)], 1, &flat(), &spec, &rule).unwrap();
        assert!((v.value() - PI * PI).abs() < 1e-10);
        assert_eq!(gamma_branch_norm(&[c(0.0)], 1, &flat(), &spec, &rule).unwrap().value(), 0.0);
        // u(0) != 0 leaves a 1/|z|² pole
        let spec0 = NormSpec::gamma_branch(0.0, GammaVariant::Conjecture);
        let d = gamma_branch_norm(&[c(1.0)], 1, &flat(), &spec0, &rule).unwrap();
        assert!(!d.is_finite());
        if let FunctionalValue::Divergent { growth_per_annulus, .. } = d {
            // each halving of the radius adds 2π ln 2
            assert!((growth_per_annulus - 2.0 * PI * 2f64.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn final_example_matches_closed_form() {
        for eps in [0.1, 0.05] {
            let spec = DiskRuleSpec::default().with_breakpoints(vec![eps]);
            let v = final_example_integral(eps, &spec).unwrap().value();
            assert!((v - final_example_exact(eps)).abs() < 1e-4);
            let w: AnyWeight = RegularizedLogWeight::diagonal(eps)
                .with_kind(RegularizationKind::Additive)
                .into();
            let g = gamma_branch_norm(&[c(0.0), c(1.0)], 1, &w, &NormSpec::gamma_branch(0.0, GammaVariant::Conjecture), &spec)
                .unwrap()
                .value();
            assert!((g - final_example_exact(eps)).abs() < 1e-4 * g);
        }
    }

    #[test]
    fn derivative_norm_vanishes_for_log_diagonal() {
        let cross = CrossData::real(&[0.0], &[0.0, 1.0]).unwrap();
        let w: AnyWeight = Weight::diagonal_log().into();
        let spec = NormSpec::new(NormKind::DerivativeOnY);
        let v = derivative_norm_on_y(&cross, &w, &spec, &DiskRuleSpec::default()).unwrap();
        assert!(v.value().abs() < 1e-12, "{v:?}");
        let zero = CrossData::real(&[0.0], &[0.0]).unwrap();
        assert_eq!(derivative_norm_on_y(&zero, &w, &spec, &DiskRuleSpec::default()).unwrap().value(), 0.0);
    }

    #[test]
    fn derivative_norm_is_flat_in_epsilon_without_log_factor() {
        let cross = CrossData::real(&[0.0], &[0.0, 1.0]).unwrap();
        let mut spec = NormSpec::new(NormKind::DerivativeOnY);
        spec.log_factor = false;
        // π ∫_0^1 (1-t)² e^{1-t} dt, supported in |z| < ε
        let exact = PI * (1.0f64.exp() - 2.0);
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let w: AnyWeight = RegularizedLogWeight::diagonal(eps).into();
            let rule = DiskRuleSpec::default().with_breakpoints(vec![eps]);
            let v = derivative_norm_on_y(&cross, &w, &spec, &rule).unwrap().value();
            assert!((v - exact).abs() < 1e-8 * exact, "eps={eps}: {v} vs {exact}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(NormSpec::gamma_branch(1.5, GammaVariant::Theorem).validate().is_err());
        let s = NormSpec::new(NormKind::GammaBranch).with_region(Region::SingularNeighborhood { r_sing: 1.0 });
        assert!(s.validate().is_err());
        assert!(NormSpec::new(NormKind::FinalExample).validate().is_err());
        let json = r#"{"kind":"gamma_branch","gamma":0.5,"region":{"kind":"singular_neighborhood","r_sing":0.5}}"#;
        let s: NormSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.region, Region::SingularNeighborhood { r_sing: 0.5 });
        assert_eq!(s.normalization, 1.0);
    }
}

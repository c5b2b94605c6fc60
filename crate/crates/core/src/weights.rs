//! Weights `φ` on the disk and bidisk, their regularizations, twisted
//! derivatives and cut-off families.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::{horner, horner_derivative, ComplexPoly, RealPoly};
use crate::quadrature::{gauss_legendre, DiskRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Disk,
    Bidisk,
}

impl Domain {
    pub fn dim(self) -> usize {
        match self {
            Domain::Disk => 1,
            Domain::Bidisk => 2,
        }
    }

    pub fn contains(self, z: &[Complex64]) -> bool {
        z.len() == self.dim() && z.iter().all(|v| v.norm() < 1.0)
    }
}

/// Value of a weight at a point. `Singular` stands for `-∞`, reached on the
/// zero set of a logarithmic term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightValue {
    Finite(f64),
    Singular,
}

impl WeightValue {
    pub fn value(self) -> f64 {
        match self {
            WeightValue::Finite(v) => v,
            WeightValue::Singular => f64::NEG_INFINITY,
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, WeightValue::Singular)
    }

    /// `e^{-φ}`, `+∞` at a singular point.
    pub fn density(self) -> f64 {
        (-self.value()).exp()
    }
}

/// `r log|f|^2` with `r >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogTerm {
    pub r: f64,
    pub f: ComplexPoly,
}

/// Smooth part of a weight: a real polynomial in the real coordinates, or a
/// named closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum SmoothPart {
    Poly(RealPoly),
    /// `log(1 + Σ |z_i|^2)`
    FubiniStudy,
}

impl Default for SmoothPart {
    fn default() -> Self {
        SmoothPart::Poly(RealPoly::zero())
    }
}

const FUBINI_STUDY: &str = "fubini_study";

impl fmt::Display for SmoothPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothPart::Poly(p) => write!(f, "{p}"),
            SmoothPart::FubiniStudy => f.write_str(FUBINI_STUDY),
        }
    }
}

impl SmoothPart {
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case(FUBINI_STUDY) || t.eq_ignore_ascii_case("fubini-study") {
            Ok(SmoothPart::FubiniStudy)
        } else {
            Ok(SmoothPart::Poly(RealPoly::parse(t)?))
        }
    }

    fn eval(&self, z: &[Complex64]) -> f64 {
        match self {
            SmoothPart::Poly(p) => p.eval(z),
            SmoothPart::FubiniStudy => (1.0 + z.iter().map(|v| v.norm_sqr()).sum::<f64>()).ln(),
        }
    }

    fn d_dz(&self, z: &[Complex64], var: usize) -> Complex64 {
        match self {
            SmoothPart::Poly(p) => p.d_dz(z, var),
            SmoothPart::FubiniStudy => {
                z[var].conj() / (1.0 + z.iter().map(|v| v.norm_sqr()).sum::<f64>())
            }
        }
    }
}

impl Serialize for SmoothPart {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SmoothPart {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SmoothPart::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// `φ = Σ r_j log|f_j|^2 + ψ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weight {
    #[serde(default)]
    pub log_terms: Vec<LogTerm>,
    #[serde(default)]
    pub smooth: SmoothPart,
    pub domain: Domain,
    /// Declares `φ` subharmonic; checked by [`check_subharmonic`].
    #[serde(default)]
    pub subharmonic: bool,
}

impl Weight {
    pub fn zero(domain: Domain) -> Self {
        Weight {
            log_terms: Vec::new(),
            smooth: SmoothPart::default(),
            domain,
            subharmonic: true,
        }
    }

    /// `φ(z) = -2m Re z` on the disk.
    pub fn linear_re(m: f64) -> Self {
        let smooth = if m == 0.0 {
            SmoothPart::default()
        } else {
            SmoothPart::Poly(RealPoly::parse(&format!("{}*x", -2.0 * m)).expect("valid"))
        };
        Weight {
            smooth,
            ..Weight::zero(Domain::Disk)
        }
    }

    /// `φ = r log|f|^2`.
    pub fn log(r: f64, f: ComplexPoly, domain: Domain) -> Self {
        Weight {
            log_terms: vec![LogTerm { r, f }],
            ..Weight::zero(domain)
        }
    }

    /// `φ = log|z1 - z2|^2` on the bidisk.
    pub fn diagonal_log() -> Self {
        Weight::log(
            1.0,
            ComplexPoly::parse("z1 - z2").expect("valid"),
            Domain::Bidisk,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.log_terms {
            if !(t.r >= 0.0 && t.r.is_finite()) {
                return Err(Error::Parameter(format!(
                    "log term coefficient must be finite and >= 0, got {}",
                    t.r
                )));
            }
            if t.f.is_zero() {
                return Err(Error::Parameter("log term of the zero polynomial".into()));
            }
            if t.f.vars_used() > self.domain.dim() {
                return Err(Error::Parameter(format!(
                    "log term '{}' uses z2 on the disk",
                    t.f
                )));
            }
        }
        if let SmoothPart::Poly(p) = &self.smooth {
            if p.complex_vars_used() > self.domain.dim() {
                return Err(Error::Parameter(format!(
                    "smooth part '{p}' uses z2 on the disk"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, z: &[Complex64]) -> WeightValue {
        let mut v = self.smooth.eval(z);
        for t in &self.log_terms {
            if t.r == 0.0 {
                continue;
            }
            let a = t.f.eval(z).norm_sqr();
            if a == 0.0 {
                return WeightValue::Singular;
            }
            v += t.r * a.ln();
        }
        WeightValue::Finite(v)
    }

    pub fn d_dz(&self, z: &[Complex64], var: usize) -> Result<Complex64> {
        let mut g = self.smooth.d_dz(z, var);
        for t in &self.log_terms {
            if t.r == 0.0 {
                continue;
            }
            let fz = t.f.eval(z);
            if fz.norm_sqr() == 0.0 {
                return Err(Error::SingularPoint(format!(
                    "log|{}|^2 is singular at {}",
                    t.f,
                    fmt_point(z)
                )));
            }
            g += t.f.derivative(var).eval(z) / fz * t.r;
        }
        Ok(g)
    }

    /// The origin, when a log term vanishes there; used as a grading center.
    fn singular_centers(&self) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        if self.domain == Domain::Disk
            && self
                .log_terms
                .iter()
                .any(|t| t.r > 0.0 && t.f.eval(&[zero]).norm() == 0.0)
        {
            vec![zero]
        } else {
            Vec::new()
        }
    }
}

fn fmt_point(z: &[Complex64]) -> String {
    let parts: Vec<String> = z.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(", "))
}

/// Regularization of `log|ζ|^2` for a linear form `ζ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationKind {
    /// `(|ζ|^2 - ε^2)/ε^2 + log ε^2` inside `|ζ| < ε`, `log|ζ|^2` outside.
    #[default]
    Convolution,
    /// `log(ε^2 + |ζ|^2)`.
    Additive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizedLogWeight {
    pub epsilon: f64,
    /// The linear form `ζ`, e.g. `z1 - z2` or `z`.
    pub form: ComplexPoly,
    #[serde(default)]
    pub kind: RegularizationKind,
    pub domain: Domain,
}

impl RegularizedLogWeight {
    pub fn new(epsilon: f64, form: ComplexPoly, domain: Domain) -> Result<Self> {
        let w = RegularizedLogWeight {
            epsilon,
            form,
            kind: RegularizationKind::Convolution,
            domain,
        };
        w.validate()?;
        Ok(w)
    }

    /// `φ_ε` for `ζ = z1 - z2` on the bidisk.
    pub fn diagonal(epsilon: f64) -> Self {
        RegularizedLogWeight::new(
            epsilon,
            ComplexPoly::parse("z1 - z2").expect("valid"),
            Domain::Bidisk,
        )
        .expect("valid regularization")
    }

    pub fn with_kind(mut self, kind: RegularizationKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        let linear = self.form.terms().all(|(a, b, _)| a + b == 1);
        if !linear || self.form.is_zero() {
            return Err(Error::Parameter(format!(
                "regularized form '{}' must be a nonzero linear form",
                self.form
            )));
        }
        if self.form.vars_used() > self.domain.dim() {
            return Err(Error::Parameter(format!(
                "form '{}' uses z2 on the disk",
                self.form
            )));
        }
        Ok(())
    }

    /// `φ_ε` as a function of `|ζ|^2`.
    pub fn profile(&self, zeta_sq: f64) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        match self.kind {
            RegularizationKind::Convolution => {
                if zeta_sq < e2 {
                    (zeta_sq - e2) / e2 + e2.ln()
                } else {
                    zeta_sq.ln()
                }
            }
            RegularizationKind::Additive => (e2 + zeta_sq).ln(),
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> f64 {
        self.profile(self.form.eval(z).norm_sqr())
    }

    /// `∂φ_ε/∂ζ`.
    pub fn d_dzeta(&self, zeta: Complex64) -> Complex64 {
        let e2 = self.epsilon * self.epsilon;
        let a = zeta.norm_sqr();
        match self.kind {
            RegularizationKind::Convolution => {
                if a < e2 {
                    zeta.conj() / e2
                } else {
                    zeta.inv()
                }
            }
            RegularizationKind::Additive => zeta.conj() / (e2 + a),
        }
    }

    pub fn d_dz(&self, z: &[Complex64], var: usize) -> Complex64 {
        let zeta = self.form.eval(z);
        self.d_dzeta(zeta) * self.form.derivative(var).eval(z)
    }
}

/// `ψ = max(φ + c log|z|^2, -A)` on the disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClampedWeight {
    pub base: Weight,
    pub eps_coeff: f64,
    pub floor: f64,
}

/// Build `max(φ + eps_coeff·log|z|^2, -floor)`.
pub fn clamp_max(w: &Weight, eps_coeff: f64, floor: f64) -> Result<ClampedWeight> {
    let c = ClampedWeight {
        base: w.clone(),
        eps_coeff,
        floor,
    };
    c.validate()?;
    Ok(c)
}

impl ClampedWeight {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.base.domain != Domain::Disk {
            return Err(Error::Parameter("clamped weights live on the disk".into()));
        }
        if !(self.eps_coeff > 0.0 && self.eps_coeff.is_finite()) {
            return Err(Error::Parameter(format!(
                "clamp coefficient must be positive, got {}",
                self.eps_coeff
            )));
        }
        if !self.floor.is_finite() {
            return Err(Error::Parameter("clamp floor must be finite".into()));
        }
        Ok(())
    }

    fn inner(&self, z: &[Complex64]) -> f64 {
        let r2 = z[0].norm_sqr();
        if r2 == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.base.eval(z).value() + self.eps_coeff * r2.ln()
    }

    pub fn eval(&self, z: &[Complex64]) -> f64 {
        self.inner(z).max(-self.floor)
    }

    pub fn d_dz(&self, z: &[Complex64], var: usize) -> Result<Complex64> {
        if self.inner(z) <= -self.floor {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(self.base.d_dz(z, var)? + self.eps_coeff / z[0])
    }
}

/// Any of the supported weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyWeight {
    Regularized(RegularizedLogWeight),
    Clamped(ClampedWeight),
    Plain(Weight),
}

impl From<Weight> for AnyWeight {
    fn from(w: Weight) -> Self {
        AnyWeight::Plain(w)
    }
}

impl From<RegularizedLogWeight> for AnyWeight {
    fn from(w: RegularizedLogWeight) -> Self {
        AnyWeight::Regularized(w)
    }
}

impl From<ClampedWeight> for AnyWeight {
    fn from(w: ClampedWeight) -> Self {
        AnyWeight::Clamped(w)
    }
}

impl AnyWeight {
    pub fn domain(&self) -> Domain {
        match self {
            AnyWeight::Plain(w) => w.domain,
            AnyWeight::Regularized(w) => w.domain,
            AnyWeight::Clamped(_) => Domain::Disk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnyWeight::Plain(w) => w.validate(),
            AnyWeight::Regularized(w) => w.validate(),
            AnyWeight::Clamped(w) => w.validate(),
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> WeightValue {
        match self {
            AnyWeight::Plain(w) => w.eval(z),
            AnyWeight::Regularized(w) => WeightValue::Finite(w.eval(z)),
            AnyWeight::Clamped(w) => WeightValue::Finite(w.eval(z)),
        }
    }

    /// `e^{-φ(z)}`.
    pub fn density(&self, z: &[Complex64]) -> f64 {
        self.eval(z).density()
    }

    /// `∂φ/∂z_{var+1}`.
    pub fn d_dz(&self, z: &[Complex64], var: usize) -> Result<Complex64> {
        match self {
            AnyWeight::Plain(w) => w.d_dz(z, var),
            AnyWeight::Regularized(w) => Ok(w.d_dz(z, var)),
            AnyWeight::Clamped(w) => w.d_dz(z, var),
        }
    }

    pub fn is_subharmonic(&self) -> bool {
        match self {
            AnyWeight::Plain(w) => w.subharmonic,
            AnyWeight::Regularized(_) => true,
            AnyWeight::Clamped(w) => w.base.subharmonic,
        }
    }

    /// Points toward which disk quadrature should be graded.
    pub fn grading_centers(&self) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let mut c = match self {
            AnyWeight::Plain(w) => w.singular_centers(),
            AnyWeight::Regularized(w) if w.domain == Domain::Disk => vec![-w.form.eval(&[zero])],
            AnyWeight::Regularized(_) => Vec::new(),
            AnyWeight::Clamped(_) => vec![zero],
        };
        if c.is_empty() {
            c.push(zero);
        }
        c
    }

    /// Radii (from the grading center) where the weight has a kink.
    pub fn kink_radii(&self) -> Vec<f64> {
        match self {
            AnyWeight::Regularized(w) if w.kind == RegularizationKind::Convolution => {
                // |ζ| = ε, measured in the variable of a disk form a·z
                let slope = w.form.derivative(0).eval(&[Complex64::new(0.0, 0.0)]).norm();
                if w.domain == Domain::Disk && slope > 0.0 {
                    vec![w.epsilon / slope]
                } else {
                    vec![w.epsilon]
                }
            }
            AnyWeight::Clamped(w) => clamp_radius(w).into_iter().collect(),
            _ => Vec::new(),
        }
    }

    /// Numerical test for invariance under `z -> e^{it} z` (jointly on the
    /// bidisk), at deterministic sample points.
    pub fn is_jointly_circular(&self) -> bool {
        let dim = self.domain().dim();
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..24 {
            let z: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::from_polar(0.05 + 0.9 * next(), 2.0 * PI * next()))
                .collect();
            let rot = Complex64::from_polar(1.0, 2.0 * PI * next());
            let zr: Vec<Complex64> = z.iter().map(|v| v * rot).collect();
            let (a, b) = (self.eval(&z), self.eval(&zr));
            match (a, b) {
                (WeightValue::Finite(a), WeightValue::Finite(b)) => {
                    if (a - b).abs() > 1e-11 * (1.0 + a.abs()) {
                        return false;
                    }
                }
                (WeightValue::Singular, WeightValue::Singular) => {}
                _ => return false,
            }
        }
        true
    }
}

impl fmt::Display for AnyWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match serde_json::to_string(self) {
            Ok(s) => f.write_str(&s),
            Err(_) => f.write_str("<weight>"),
        }
    }
}

/// Evaluate `φ(z)`; singular points give [`WeightValue::Singular`].
pub fn eval_weight(w: &AnyWeight, z: &[Complex64]) -> WeightValue {
    w.eval(z)
}

/// `f'(z) - f(z) ∂φ/∂z_{var+1}` for a one-variable polynomial `f` (given by
/// its coefficients) acting on the coordinate `z_{var+1}`.
pub fn twisted_derivative(
    w: &AnyWeight,
    f: &[Complex64],
    z: &[Complex64],
    var: usize,
) -> Result<Complex64> {
    if f.iter().all(|c| c.norm_sqr() == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let x = z[var];
    let val = horner(f, x);
    let der = horner_derivative(f, x);
    if val.norm_sqr() == 0.0 {
        // f(z) = 0 kills the weight term even where ∂φ is singular
        return Ok(der);
    }
    Ok(der - val * w.d_dz(z, var)?)
}

/// Radius below which a clamped weight sits at its floor, found by bisection
/// on circles. `None` if the floor is never reached away from 0.
pub fn clamp_radius(w: &ClampedWeight) -> Option<f64> {
    // φ + c log r^2 <= -A  for r below the returned radius, on every sampled angle
    let active = |r: f64| {
        (0..32).all(|j| {
            let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / 32.0);
            w.inner(&[z]) <= -w.floor
        })
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // locate on a log scale first, radii can be astronomically small
    let mut e = -1.0f64;
    while !active(10f64.powf(e)) {
        e -= 1.0;
        if e < -300.0 {
            return None;
        }
    }
    lo = lo.max(10f64.powf(e));
    hi = hi.min(10f64.powf(e + 1.0));
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if active(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-14 {
            break;
        }
    }
    Some(lo)
}

/// Result of sampling the Laplacian of a weight.
#[derive(Clone, Debug, Serialize)]
pub struct SubharmonicReport {
    pub min_laplacian: f64,
    pub samples: usize,
    pub subharmonic: bool,
}

/// Five-point-stencil Laplacian on a 50×50 grid (on the bidisk: in each
/// variable, with the other one fixed at a few sample values).
///
/// Log terms with `r >= 0` are subharmonic and are not sampled: the stencil
/// cannot resolve them near their zero sets. A clamp is subharmonic when its
/// base is, so the base is checked.
pub fn check_subharmonic(w: &AnyWeight) -> SubharmonicReport {
    match w {
        AnyWeight::Plain(p) => {
            let smooth = p.smooth.clone();
            let dim = p.domain.dim();
            stencil_report(dim, move |z| smooth.eval(z))
        }
        AnyWeight::Clamped(c) => check_subharmonic(&AnyWeight::Plain(c.base.clone())),
        AnyWeight::Regularized(r) => {
            let r = r.clone();
            stencil_report(r.domain.dim(), move |z| r.eval(z))
        }
    }
}

fn stencil_report(dim: usize, f: impl Fn(&[Complex64]) -> f64) -> SubharmonicReport {
    let n = 50;
    let h = 1e-3;
    let mut min_lap = f64::INFINITY;
    let mut samples = 0;
    let others = [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.3, 0.2),
        Complex64::new(-0.5, 0.1),
    ];
    let slices: Vec<(usize, Complex64)> = if dim == 1 {
        vec![(0, Complex64::new(0.0, 0.0))]
    } else {
        (0..2).flat_map(|v| others.iter().map(move |o| (v, *o))).collect()
    };
    let stencil = [
        Complex64::new(0.0, 0.0),
        Complex64::new(h, 0.0),
        Complex64::new(-h, 0.0),
        Complex64::new(0.0, h),
        Complex64::new(0.0, -h),
    ];
    for (var, other) in slices {
        for i in 0..n {
            for j in 0..n {
                let x = -0.95 + 1.9 * (i as f64 + 0.5) / n as f64;
                let y = -0.95 + 1.9 * (j as f64 + 0.5) / n as f64;
                let c = Complex64::new(x, y);
                if c.norm() > 0.95 {
                    continue;
                }
                let v: Vec<f64> = stencil
                    .iter()
                    .map(|d| {
                        let mut z = vec![other; dim];
                        z[var] = c + d;
                        f(&z)
                    })
                    .collect();
                if v.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let lap = (v[1] + v[2] + v[3] + v[4] - 4.0 * v[0]) / (h * h);
                min_lap = min_lap.min(lap);
                samples += 1;
            }
        }
    }
    SubharmonicReport {
        min_laplacian: min_lap,
        samples,
        subharmonic: min_lap >= -1e-6,
    }
}

/// The interpolating profile: 1 on `[0,1]`, 0 on `[2,∞)`,
/// `1 - 3(t-1)^2 + 2(t-1)^3` in between.
pub fn profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let s = t - 1.0;
        1.0 - 3.0 * s * s + 2.0 * s * s * s
    }
}

pub fn profile_derivative(t: f64) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        0.0
    } else {
        let s = t - 1.0;
        -6.0 * s + 6.0 * s * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// `ρ(|s|^2 / ε^2)`.
    RhoEps,
    /// `ρ(log log(1/|s|^2) - 1/ε + 1)`: equals 1 where
    /// `log log(1/|s|^2) <= 1/ε`, 0 beyond `1/ε + 1`.
    XiEps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub kind: CutoffKind,
    pub epsilon: f64,
    pub section: ComplexPoly,
    /// `|s|^2` is replaced by `normalization · |s(z)|^2`.
    #[serde(default = "one")]
    pub normalization: f64,
}

fn one() -> f64 {
    1.0
}

/// Value of a cut-off together with its Wirtinger derivatives `∂/∂z_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffValue {
    pub value: f64,
    pub d_dz: Vec<Complex64>,
}

impl CutoffValue {
    /// Euclidean `|∇u|^2 = 4 Σ |∂u/∂z_i|^2` for the real function `u`.
    pub fn gradient_norm_sqr(&self) -> f64 {
        4.0 * self.d_dz.iter().map(|d| d.norm_sqr()).sum::<f64>()
    }
}

impl CutoffFamily {
    pub fn new(kind: CutoffKind, epsilon: f64, section: ComplexPoly) -> Result<Self> {
        let c = CutoffFamily {
            kind,
            epsilon,
            section,
            normalization: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.normalization > 0.0 && self.normalization.is_finite()) {
            return Err(Error::Parameter("normalization must be positive".into()));
        }
        if self.section.is_zero() {
            return Err(Error::Parameter("cut-off section is zero".into()));
        }
        Ok(())
    }

    /// For `Ξ_ε`: the largest ε for which `Ξ_ε(z) = 1`; every smaller ε also
    /// gives 1. `+∞` where `|s|^2 >= 1/e`.
    pub fn xi_plateau_epsilon(&self, z: &[Complex64]) -> f64 {
        let a = self.normalization * self.section.eval(z).norm_sqr();
        if a >= 1.0 {
            return f64::INFINITY;
        }
        let t = -a.ln();
        let l = t.ln();
        if l <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / l
        }
    }
}

/// Evaluate a cut-off and its derivatives at `z`. Points with
/// `|s|^2 >= 1` give `Ξ_ε = 1`.
pub fn cutoff_eval(c: &CutoffFamily, z: &[Complex64]) -> CutoffValue {
    let s = c.section.eval(z);
    let a = c.normalization * s.norm_sqr();
    let ds: Vec<Complex64> = (0..z.len()).map(|v| c.section.derivative(v).eval(z)).collect();
    let zero = Complex64::new(0.0, 0.0);
    match c.kind {
        CutoffKind::RhoEps => {
            let e2 = c.epsilon * c.epsilon;
            let t = a / e2;
            let dp = profile_derivative(t);
            // ∂|s|^2 = s̄ ∂s
            let d_dz = ds
                .iter()
                .map(|d| s.conj() * d * (c.normalization * dp / e2))
                .collect();
            CutoffValue {
                value: profile(t),
                d_dz,
            }
        }
        CutoffKind::XiEps => {
            if a >= 1.0 || a == 0.0 {
                // a == 0: log log(1/|s|^2) = +∞, Ξ = 0 with zero gradient
                let value = if a == 0.0 { 0.0 } else { 1.0 };
                return CutoffValue {
                    value,
                    d_dz: vec![zero; z.len()],
                };
            }
            let t = -a.ln();
            let l = t.ln();
            let arg = l - 1.0 / c.epsilon + 1.0;
            let dp = profile_derivative(arg);
            // ∂t = -∂s / s, ∂L = ∂t / t
            let d_dz = ds.iter().map(|d| -(d / s) * (dp / t)).collect();
            CutoffValue {
                value: profile(arg),
                d_dz,
            }
        }
    }
}

/// `∫_Δ |∇u|^2 dλ` for a cut-off on the disk.
///
/// Sections of the form `a z^k` are reduced to a one-dimensional integral in
/// the natural variable of the profile (`|s|^2/ε^2` or `log log(1/|s|^2)`),
/// which stays accurate when the transition band is far below the smallest
/// representable radius. Other sections are integrated with `rule`.
pub fn cutoff_gradient_energy(c: &CutoffFamily, rule: &DiskRule) -> Result<f64> {
    c.validate()?;
    if let Some((a, k)) = monomial_section(&c.section) {
        return Ok(monomial_energy(c, a, k));
    }
    cutoff_gradient_energy_quadrature(c, rule)
}

/// Same integral evaluated directly with a disk rule.
pub fn cutoff_gradient_energy_quadrature(c: &CutoffFamily, rule: &DiskRule) -> Result<f64> {
    let v = rule.integrate(|z| Complex64::new(cutoff_eval(c, &[z]).gradient_norm_sqr(), 0.0))?;
    Ok(v.re)
}

fn monomial_section(p: &ComplexPoly) -> Option<(f64, u32)> {
    let terms: Vec<_> = p.terms().collect();
    match terms.as_slice() {
        [(k, 0, coef)] if *k >= 1 => Some((coef.norm(), *k)),
        _ => None,
    }
}

fn monomial_energy(c: &CutoffFamily, a: f64, k: u32) -> f64 {
    let (gx, gw) = gauss_legendre(64);
    let k = k as f64;
    // |s|^2 on the unit circle
    let amax = c.normalization * a * a;
    let quad = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let half = 0.5 * (hi - lo);
        gx.iter()
            .zip(&gw)
            .map(|(x, w)| w * half * f(lo + half * (x + 1.0)))
            .sum()
    };
    match c.kind {
        CutoffKind::RhoEps => {
            // u = |s|^2/ε^2: energy = 4πk ∫ ρ'(u)^2 u du over the band
            let umax = amax / (c.epsilon * c.epsilon);
            4.0 * PI * k * quad(1.0, 2.0f64.min(umax), &|u| profile_derivative(u).powi(2) * u)
        }
        CutoffKind::XiEps => {
            // L = log log(1/|s|^2): energy = 4πk ∫ ρ'(L - 1/ε + 1)^2 e^{-L} dL,
            // restricted to |s| < 1 on the disk
            let inv = 1.0 / c.epsilon;
            let lmin = if amax < 1.0 {
                (-amax.ln()).ln()
            } else {
                f64::NEG_INFINITY
            };
            let lo = inv.max(lmin);
            let hi = inv + 1.0;
            // factor e^{-1/ε} out to keep the integrand O(1)
            4.0 * PI
                * k
                * (-inv).exp()
                * quad(lo - inv, hi - inv, &|s| {
                    profile_derivative(s + 1.0).powi(2) * (-s).exp()
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::DiskRuleSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn linear_weight_at_origin() {
        let w: AnyWeight = Weight::linear_re(3.0).into();
        assert_eq!(eval_weight(&w, &[c(0.0, 0.0)]), WeightValue::Finite(0.0));
        let v = eval_weight(&w, &[c(0.5, 0.7)]).value();
        assert!((v + 3.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_log_value() {
        let w: AnyWeight = Weight::diagonal_log().into();
        let v = eval_weight(&w, &[c(0.5, 0.0), c(0.1, 0.0)]).value();
        assert!((v - 0.16f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn singular_sentinel() {
        let w: AnyWeight = Weight::log(1.0, ComplexPoly::parse("z").unwrap(), Domain::Disk).into();
        let v = eval_weight(&w, &[c(0.0, 0.0)]);
        assert!(v.is_singular());
        assert_eq!(v.value(), f64::NEG_INFINITY);
    }

    #[test]
    fn clamp_examples() {
        let w = clamp_max(&Weight::zero(Domain::Disk), 0.1, 10.0).unwrap();
        assert_eq!(w.eval(&[c(0.0, 0.0)]), -10.0);
        assert_eq!(w.eval(&[c(1.0, 0.0)]), 0.0);
        let r = (-10.0f64 / 0.1 * 0.5).exp();
        let g = w.d_dz(&[c(0.5 * r, 0.0)], 0).unwrap();
        assert_eq!(g.norm(), 0.0);
        let rc = clamp_radius(&w).unwrap();
        assert!((rc / r - 1.0).abs() < 1e-10, "{rc} vs {r}");
    }

    #[test]
    fn clamp_never_below_base() {
        let base = Weight::linear_re(2.0);
        let w = clamp_max(&base, 0.3, 20.0).unwrap();
        for k in 0..50 {
            let z = Complex64::from_polar(0.02 * k as f64, 0.7 * k as f64);
            let v = w.eval(&[z]);
            assert!(v >= -20.0);
            assert!(v >= base.eval(&[z]).value() + 0.3 * z.norm_sqr().ln() - 1e-12);
        }
    }

    #[test]
    fn regularized_is_continuous_and_monotone() {
        for eps in [0.3, 0.1, 0.02] {
            let w = RegularizedLogWeight::new(eps, ComplexPoly::parse("z").unwrap(), Domain::Disk)
                .unwrap();
            let inside = w.profile(eps * eps * (1.0 - 1e-15));
            let outside = w.profile(eps * eps);
            assert!((inside - outside).abs() < 1e-12);
        }
        for k in 1..40 {
            let a = (k as f64 * 0.025).powi(2);
            let mut prev = f64::INFINITY;
            for eps in [0.4, 0.2, 0.1, 0.05, 0.01] {
                let w = RegularizedLogWeight::new(eps, ComplexPoly::parse("z").unwrap(), Domain::Disk)
                    .unwrap();
                let v = w.profile(a);
                assert!(v <= prev + 1e-15);
                assert!(v >= a.ln() - 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn twisted_derivative_examples() {
        let w: AnyWeight = Weight::diagonal_log().into();
        let f = [c(0.0, 0.0), c(1.0, 0.0)];
        let v = twisted_derivative(&w, &f, &[c(0.3, 0.0), c(0.0, 0.0)], 0).unwrap();
        assert!(v.norm() < 1e-15);
        let we: AnyWeight = RegularizedLogWeight::diagonal(0.2).into();
        let v = twisted_derivative(&we, &f, &[c(0.1, 0.0), c(0.0, 0.0)], 0).unwrap();
        assert!((v - c(0.75, 0.0)).norm() < 1e-14);
        let zero = [c(0.0, 0.0)];
        assert_eq!(
            twisted_derivative(&w, &zero, &[c(0.3, 0.0), c(0.0, 0.0)], 0).unwrap(),
            c(0.0, 0.0)
        );
    }

    #[test]
    fn twisted_derivative_matches_finite_difference() {
        let weights: Vec<AnyWeight> = vec![
            Weight::linear_re(2.0).into(),
            Weight {
                smooth: SmoothPart::FubiniStudy,
                ..Weight::zero(Domain::Disk)
            }
            .into(),
            RegularizedLogWeight::new(0.3, ComplexPoly::parse("z").unwrap(), Domain::Disk)
                .unwrap()
                .with_kind(RegularizationKind::Additive)
                .into(),
        ];
        let f = [c(0.2, 0.1), c(1.0, -0.5), c(0.3, 0.0)];
        for w in &weights {
            for z in [c(0.4, 0.1), c(-0.2, 0.5)] {
                let exact = twisted_derivative(w, &f, &[z], 0).unwrap();
                // e^φ ∂(e^{-φ} f) with ∂ = (∂x - i ∂y)/2
                let h = 1e-5;
                let g = |p: Complex64| horner(&f, p) * (-w.eval(&[p]).value()).exp();
                let dx = (g(z + h) - g(z - h)) / (2.0 * h);
                let dy = (g(z + c(0.0, h)) - g(z - c(0.0, h))) / (2.0 * h);
                let fd = (dx - c(0.0, 1.0) * dy) * 0.5 * w.eval(&[z]).value().exp();
                assert!((exact - fd).norm() < 1e-6 * exact.norm().max(1.0));
            }
        }
    }

    #[test]
    fn subharmonic_checks() {
        for w in [
            AnyWeight::from(Weight::linear_re(4.0)),
            clamp_max(&Weight::linear_re(1.0), 0.1, 5.0).unwrap().into(),
            Weight::diagonal_log().into(),
        ] {
            let r = check_subharmonic(&w);
            assert!(r.subharmonic, "{w}: {}", r.min_laplacian);
            assert!(r.samples > 100);
        }
        let bad: AnyWeight = Weight {
            smooth: SmoothPart::Poly(RealPoly::parse("-(x^2+y^2)").unwrap()),
            ..Weight::zero(Domain::Disk)
        }
        .into();
        assert!(!check_subharmonic(&bad).subharmonic);
    }

    #[test]
    fn circularity_detection() {
        assert!(AnyWeight::from(Weight::diagonal_log()).is_jointly_circular());
        assert!(AnyWeight::from(RegularizedLogWeight::diagonal(0.1)).is_jointly_circular());
        assert!(!AnyWeight::from(Weight::linear_re(1.0)).is_jointly_circular());
        assert!(AnyWeight::from(Weight::zero(Domain::Bidisk)).is_jointly_circular());
    }

    #[test]
    fn weight_json_round_trip() {
        let json = r#"{"log_terms":[{"r":1,"f":"z1 - z2"}],"smooth":"0","domain":"bidisk"}"#;
        let w: AnyWeight = serde_json::from_str(json).unwrap();
        assert!(matches!(w, AnyWeight::Plain(_)));
        let back: AnyWeight = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(w, back);
        let reg = r#"{"epsilon":0.1,"form":"z1-z2","domain":"bidisk"}"#;
        assert!(matches!(
            serde_json::from_str::<AnyWeight>(reg).unwrap(),
            AnyWeight::Regularized(_)
        ));
        let cl = r#"{"base":{"smooth":"-8*Re(z)","domain":"disk"},"eps_coeff":0.05,"floor":20}"#;
        assert!(matches!(
            serde_json::from_str::<AnyWeight>(cl).unwrap(),
            AnyWeight::Clamped(_)
        ));
        let fs = r#"{"smooth":"fubini_study","domain":"disk"}"#;
        assert!(serde_json::from_str::<AnyWeight>(fs).is_ok());
    }

    #[test]
    fn rho_cutoff_values() {
        let z = ComplexPoly::parse("z").unwrap();
        let eps = 0.3;
        let cf = CutoffFamily::new(CutoffKind::RhoEps, eps, z).unwrap();
        let p = Complex64::from_polar((0.5f64).sqrt() * eps, 0.4);
        assert_eq!(cutoff_eval(&cf, &[p]).value, 1.0);
        let p = Complex64::from_polar(3f64.sqrt() * eps, 0.4);
        assert_eq!(cutoff_eval(&cf, &[p]).value, 0.0);
        for k in 0..100 {
            let v = cutoff_eval(&cf, &[c(0.01 * k as f64, 0.0)]).value;
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn xi_plateau_threshold() {
        let z = ComplexPoly::parse("z").unwrap();
        let p = [c(0.2, 0.1)];
        let base = CutoffFamily::new(CutoffKind::XiEps, 1.0, z).unwrap();
        let star = base.xi_plateau_epsilon(&p);
        for eps in [star, 0.5 * star, 0.1 * star] {
            let f = CutoffFamily {
                epsilon: eps,
                ..base.clone()
            };
            assert_eq!(cutoff_eval(&f, &p).value, 1.0);
        }
        let f = CutoffFamily {
            epsilon: 2.0 * star,
            ..base
        };
        assert!(cutoff_eval(&f, &p).value < 1.0);
    }

    #[test]
    fn cutoff_gradient_matches_finite_difference() {
        let s = ComplexPoly::parse("z + 0.3*z^2").unwrap();
        for (kind, eps, z) in [
            (CutoffKind::RhoEps, 0.5, c(0.45, 0.2)),
            (CutoffKind::XiEps, 0.5, c(0.01, 0.002)),
        ] {
            let cf = CutoffFamily::new(kind, eps, s.clone()).unwrap();
            let v = cutoff_eval(&cf, &[z]);
            assert!(v.value > 0.0 && v.value < 1.0, "{kind:?} {}", v.value);
            let h = 1e-7 * z.norm();
            let u = |p: Complex64| cutoff_eval(&cf, &[p]).value;
            let dx = (u(z + h) - u(z - h)) / (2.0 * h);
            let dy = (u(z + c(0.0, h)) - u(z - c(0.0, h))) / (2.0 * h);
            let fd = c(dx, -dy) * 0.5;
            assert!((fd - v.d_dz[0]).norm() < 1e-5 * fd.norm(), "{kind:?}");
        }
    }

    #[test]
    fn xi_energy_closed_form_matches_quadrature() {
        let cf = CutoffFamily::new(CutoffKind::XiEps, 0.5, ComplexPoly::parse("z").unwrap())
            .unwrap();
        // transition band: log log(1/r^2) in [2, 3]
        let band = vec![(-(3f64.exp()) / 2.0).exp(), (-(2f64.exp()) / 2.0).exp()];
        let rule = DiskRuleSpec::new(64, 16)
            .with_annuli(40)
            .with_breakpoints(band)
            .build()
            .unwrap();
        let reduced = cutoff_gradient_energy(&cf, &rule).unwrap();
        let direct = cutoff_gradient_energy_quadrature(&cf, &rule).unwrap();
        assert!((reduced - direct).abs() < 1e-8 * reduced, "{reduced} vs {direct}");
        // 4π e^{-2} ∫_0^1 (6s - 6s^2)^2 e^{-s} ds
        let (gx, gw) = gauss_legendre(20);
        let inner: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| {
                let s = 0.5 * (x + 1.0);
                0.5 * w * (6.0 * s - 6.0 * s * s).powi(2) * (-s).exp()
            })
            .sum();
        assert!((reduced - 4.0 * PI * (-2.0f64).exp() * inner).abs() < 1e-13);
    }

    #[test]
    fn rho_energy_is_scale_invariant() {
        let rule = DiskRuleSpec::new(64, 32).build().unwrap();
        let z = ComplexPoly::parse("z").unwrap();
        let e1 = cutoff_gradient_energy(&CutoffFamily::new(CutoffKind::RhoEps, 0.3, z.clone()).unwrap(), &rule).unwrap();
        let e2 = cutoff_gradient_energy(&CutoffFamily::new(CutoffKind::RhoEps, 0.03, z.clone()).unwrap(), &rule).unwrap();
        assert!((e1 - e2).abs() < 1e-12 * e1);
        // 4π ∫_1^2 ρ'(t)^2 t dt = 4π · 9/5
        assert!((e1 - 4.0 * PI * 1.8).abs() < 1e-12);
        let cf = CutoffFamily::new(CutoffKind::RhoEps, 0.3, z).unwrap();
        let q = cutoff_gradient_energy_quadrature(&cf, &DiskRuleSpec::new(64, 32).with_breakpoints(vec![0.3, 0.3 * 2f64.sqrt()]).build().unwrap()).unwrap();
        assert!((q - e1).abs() < 1e-9 * e1);
    }
}

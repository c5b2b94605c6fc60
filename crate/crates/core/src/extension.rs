//! Minimal-norm extensions: jets at the origin of the disk, and data on the
//! cross `{z1 z2 = 0}` in the bidisk.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bergman::{factorial, monomial_name, Basis, BergmanModel};
use crate::error::{Error, Result};
use crate::linalg::HermitianFactor;
use crate::poly::horner;
use crate::quadrature::DiskRule;
use crate::weights::Domain;

/// Prescribed derivatives `h^{(k)}(0) = a_k`, `k < N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    values: Vec<Complex64>,
}

impl Jet {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("a jet needs at least one value".into()));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Parameter("jet values must be finite".into()));
        }
        Ok(Jet { values })
    }

    pub fn real(values: &[f64]) -> Result<Self> {
        Jet::new(values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Data on the cross: `f1(z2)` on `{z1 = 0}` and `f2(z1)` on `{z2 = 0}`,
/// as coefficient lists, with `f1(0) = f2(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossData {
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
}

impl CrossData {
    pub fn new(f1: Vec<Complex64>, f2: Vec<Complex64>) -> Result<Self> {
        let zero = Complex64::new(0.0, 0.0);
        let a = f1.first().copied().unwrap_or(zero);
        let b = f2.first().copied().unwrap_or(zero);
        if a != b {
            return Err(Error::Parameter(format!(
                "cross data must agree at the origin: f1(0) = {a}, f2(0) = {b}"
            )));
        }
        if f1.iter().chain(&f2).any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Parameter("cross data must be finite".into()));
        }
        Ok(CrossData { f1, f2 })
    }

    pub fn real(f1: &[f64], f2: &[f64]) -> Result<Self> {
        let c = |v: &[f64]| v.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        CrossData::new(c(f1), c(f2))
    }

    pub fn f1(&self) -> &[Complex64] {
        &self.f1
    }

    pub fn f2(&self) -> &[Complex64] {
        &self.f2
    }

    /// The shared value `a0 = f1(0) = f2(0)`.
    pub fn a0(&self) -> Complex64 {
        self.f1
            .first()
            .or(self.f2.first())
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn degree(&self) -> usize {
        let deg = |v: &[Complex64]| v.iter().rposition(|c| c.norm_sqr() != 0.0).unwrap_or(0);
        deg(&self.f1).max(deg(&self.f2))
    }

    fn norm(&self) -> f64 {
        self.f1
            .iter()
            .chain(self.f2.iter().skip(1))
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// One level of the jet decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTerm {
    pub k: usize,
    pub b_k: Complex64,
    /// `B_k(0)`
    pub kernel: f64,
    /// `‖h_k‖^2 = |b_k|^2 / B_k(0)`
    pub norm_sqr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Breakdown {
    None,
    Jet { levels: Vec<LevelTerm> },
    Cross { h0_norm_sqr: f64, h1_norm_sqr: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: String,
    /// Largest constraint violation divided by `1 + ‖data‖`.
    pub constraint_residual: f64,
    /// First-order optimality residual on the free coordinates, relative.
    pub stationarity_residual: f64,
    pub gram_condition_number: f64,
    /// Condition number of the constraint system that was solved.
    pub system_condition_number: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    /// `(exponent of z1, exponent of z2)` for each coefficient.
    pub exponents: Vec<(u32, u32)>,
    pub coefficients: Vec<Complex64>,
    pub norm_sqr: f64,
    pub breakdown: Breakdown,
    /// Cross solver: `h0` and `h1 = h - h0`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h0: Option<Vec<Complex64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h1: Option<Vec<Complex64>>,
    pub diagnostics: Diagnostics,
}

impl ExtensionReport {
    pub fn coeff_vector(&self) -> DVector<Complex64> {
        DVector::from_vec(self.coefficients.clone())
    }

    /// Sum of the per-level (or per-piece) squared norms.
    pub fn breakdown_total(&self) -> Option<f64> {
        match &self.breakdown {
            Breakdown::None => None,
            Breakdown::Jet { levels } => Some(levels.iter().map(|l| l.norm_sqr).sum()),
            Breakdown::Cross {
                h0_norm_sqr,
                h1_norm_sqr,
            } => Some(h0_norm_sqr + h1_norm_sqr),
        }
    }
}

fn check_jet(model: &BergmanModel, jet: &Jet) -> Result<()> {
    if model.basis() != Basis::Disk {
        return Err(Error::Parameter("jet extension needs a disk model".into()));
    }
    if jet.len() > model.degree() + 1 {
        return Err(Error::Parameter(format!(
            "jet of length {} does not fit degree {}",
            jet.len(),
            model.degree()
        )));
    }
    Ok(())
}

fn jet_residual(c: &DVector<Complex64>, jet: &Jet) -> f64 {
    let worst = jet
        .values()
        .iter()
        .enumerate()
        .map(|(k, a)| (c[k] * factorial(k) - a).norm())
        .fold(0.0, f64::max);
    worst / (1.0 + jet.norm())
}

/// `max_{j free} |(Q c)_j|` relative to `‖Q‖ ‖c‖`.
fn stationarity(model: &BergmanModel, c: &DVector<Complex64>, free: &[usize]) -> f64 {
    let g = model.norm_matrix() * c;
    let worst = free.iter().map(|&j| g[j].norm()).fold(0.0, f64::max);
    let scale = model.norm_matrix().iter().map(|v| v.norm()).fold(0.0, f64::max) * c.norm();
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Minimal extension through the representers of the derivative functionals:
/// `c = Q^{-1} L λ`, `(L^T Q^{-1} L) λ = a`, `L = [k! e_k]`.
pub fn extend_jet_direct(model: &BergmanModel, jet: &Jet) -> Result<ExtensionReport> {
    check_jet(model, jet)?;
    let n = jet.len();
    let dim = model.dim();
    let qi = model.norm_matrix_inverse();
    let r = DMatrix::from_fn(n, n, |k, l| qi[(k, l)] * (factorial(k) * factorial(l)));
    let (c, cond) = if jet.values().iter().all(|v| v.norm_sqr() == 0.0) {
        (DVector::zeros(dim), None)
    } else {
        let f = HermitianFactor::new(&r).map_err(|f| Error::Degenerate {
            reason: format!(
                "representer system is singular ({}); the weight does not allow this jet",
                f.reason
            ),
            monomials: model.monomial_names(&f.indices),
        })?;
        let lambda = f.solve(&DVector::from_column_slice(jet.values()));
        let mut c = DVector::zeros(dim);
        for k in 0..n {
            let s = lambda[k] * factorial(k);
            for i in 0..dim {
                c[i] += qi[(i, k)] * s;
            }
        }
        (c, Some(f.condition_number()))
    };
    let free: Vec<usize> = (n..dim).collect();
    Ok(ExtensionReport {
        exponents: model.exponents().to_vec(),
        norm_sqr: model.norm_sqr(&c),
        breakdown: Breakdown::None,
        h0: None,
        h1: None,
        diagnostics: Diagnostics {
            method: "representer".into(),
            constraint_residual: jet_residual(&c, jet),
            stationarity_residual: stationarity(model, &c, &free),
            gram_condition_number: model.condition_number(),
            system_condition_number: cond,
        },
        coefficients: c.iter().copied().collect(),
    })
}

/// Minimal extension built level by level:
/// `b_k = a_k - Σ_{j<k} h_j^{(k)}(0)`, `h_k = (b_k / e_k^{(k)}(0)) e_k`.
pub fn extend_jet_recursive(model: &BergmanModel, jet: &Jet) -> Result<ExtensionReport> {
    check_jet(model, jet)?;
    let dim = model.dim();
    let mut h = DVector::<Complex64>::zeros(dim);
    let mut levels = Vec::with_capacity(jet.len());
    for (k, a) in jet.values().iter().enumerate() {
        let fk = factorial(k);
        let b = a - h[k] * fk;
        let bk = model.higher_kernel(k)?;
        let e = model.level_element(k)?;
        // e_k^{(k)}(0) = sqrt(B_k(0))
        let scale = b / bk.sqrt();
        h += e * scale;
        levels.push(LevelTerm {
            k,
            b_k: b,
            kernel: bk,
            norm_sqr: b.norm_sqr() / bk,
        });
    }
    let free: Vec<usize> = (jet.len()..dim).collect();
    Ok(ExtensionReport {
        exponents: model.exponents().to_vec(),
        norm_sqr: model.norm_sqr(&h),
        breakdown: Breakdown::Jet { levels },
        h0: None,
        h1: None,
        diagnostics: Diagnostics {
            method: "recursive".into(),
            constraint_residual: jet_residual(&h, jet),
            stationarity_residual: stationarity(model, &h, &free),
            gram_condition_number: model.condition_number(),
            system_condition_number: None,
        },
        coefficients: h.iter().copied().collect(),
    })
}

/// Right-hand sides of the two-term jet estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetEstimate {
    /// `(|a0|^2 + |a1 - a0 g|^2 / ω_B(0)) / B_0(0)`
    pub exact: f64,
    /// `(|a0|^2 + |a1 - a0 g|^2 / ω_B(0)) e^{-φ(0)}`
    pub ot_style: f64,
    /// `g = e_0'(0)/e_0(0)`
    pub gradient: Complex64,
    pub omega_b: f64,
    pub b0: f64,
    pub phi0: f64,
}

pub fn rhs_estimate_jet(model: &BergmanModel, jet: &Jet) -> Result<JetEstimate> {
    check_jet(model, jet)?;
    if jet.len() != 2 {
        return Err(Error::Parameter("the two-term estimate needs a jet of length 2".into()));
    }
    let (a0, a1) = (jet.values()[0], jet.values()[1]);
    let g = model.log_kernel_gradient_at_zero()?;
    let w = model.bergman_metric_at_zero()?;
    let b0 = model.higher_kernel(0)?;
    let phi0 = model.weight().eval(&[Complex64::new(0.0, 0.0)]).value();
    let bracket = a0.norm_sqr() + (a1 - a0 * g).norm_sqr() / w;
    let ot = if bracket == 0.0 { 0.0 } else { bracket * (-phi0).exp() };
    Ok(JetEstimate {
        exact: bracket / b0,
        ot_style: ot,
        gradient: g,
        omega_b: w,
        b0,
        phi0,
    })
}

fn check_cross(model: &BergmanModel, cross: &CrossData) -> Result<()> {
    if model.basis() != Basis::BidiskTensor {
        return Err(Error::Parameter(
            "cross extension needs a bidisk model with the tensor basis".into(),
        ));
    }
    if cross.degree() > model.degree() {
        return Err(Error::Parameter(format!(
            "cross data of degree {} exceeds the model degree {}",
            cross.degree(),
            model.degree()
        )));
    }
    Ok(())
}

/// `h0 = (a0 / e_0(0)) e_0 = a0 Q^{-1} e_{00} / B_0(0)`.
fn h0_coeffs(model: &BergmanModel, a0: Complex64) -> DVector<Complex64> {
    let qi = model.norm_matrix_inverse();
    qi.column(0).into_owned() * (a0 / qi[(0, 0)].re)
}

/// Minimal extension with `c_{0,n} = f1_n`, `c_{m,0} = f2_m` and the mixed
/// coefficients chosen by a Schur-complement solve.
pub fn extend_cross(model: &BergmanModel, cross: &CrossData) -> Result<ExtensionReport> {
    check_cross(model, cross)?;
    let exps = model.exponents();
    let dim = model.dim();
    let zero = Complex64::new(0.0, 0.0);
    let mut c = DVector::<Complex64>::zeros(dim);
    let mut fixed = Vec::new();
    let mut free = Vec::new();
    for (i, &(a, b)) in exps.iter().enumerate() {
        if a == 0 {
            c[i] = cross.f1().get(b as usize).copied().unwrap_or(zero);
            fixed.push(i);
        } else if b == 0 {
            c[i] = cross.f2().get(a as usize).copied().unwrap_or(zero);
            fixed.push(i);
        } else {
            free.push(i);
        }
    }
    let q = model.norm_matrix();
    let qff = DMatrix::from_fn(free.len(), free.len(), |i, j| q[(free[i], free[j])]);
    let rhs = DVector::from_fn(free.len(), |i, _| {
        -fixed
            .iter()
            .map(|&j| q[(free[i], j)] * c[j])
            .fold(zero, |s, v| s + v)
    });
    let f = HermitianFactor::new(&qff).map_err(|f| Error::Degenerate {
        reason: format!("mixed-coefficient block is singular: {}", f.reason),
        monomials: f
            .indices
            .iter()
            .map(|&i| monomial_name(Domain::Bidisk, exps[free[i]]))
            .collect(),
    })?;
    let cf = f.solve(&rhs);
    for (k, &i) in free.iter().enumerate() {
        c[i] = cf[k];
    }
    let h0 = h0_coeffs(model, cross.a0());
    let h1 = &c - &h0;
    let n0 = model.norm_sqr(&h0);
    let n1 = model.norm_sqr(&h1);
    let residual = fixed
        .iter()
        .map(|&i| {
            let (a, b) = exps[i];
            let want = if a == 0 {
                cross.f1().get(b as usize).copied().unwrap_or(zero)
            } else {
                cross.f2().get(a as usize).copied().unwrap_or(zero)
            };
            (c[i] - want).norm()
        })
        .fold(0.0, f64::max)
        / (1.0 + cross.norm());
    Ok(ExtensionReport {
        exponents: exps.to_vec(),
        norm_sqr: model.norm_sqr(&c),
        breakdown: Breakdown::Cross {
            h0_norm_sqr: n0,
            h1_norm_sqr: n1,
        },
        h0: Some(h0.iter().copied().collect()),
        h1: Some(h1.iter().copied().collect()),
        diagnostics: Diagnostics {
            method: "schur".into(),
            constraint_residual: residual,
            stationarity_residual: stationarity(model, &c, &free),
            gram_condition_number: model.condition_number(),
            system_condition_number: Some(f.condition_number()),
        },
        coefficients: c.iter().copied().collect(),
    })
}

/// `(h0, h1)` with `h = h0 + h1` the minimal cross extension.
pub fn decompose_cross(
    model: &BergmanModel,
    cross: &CrossData,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let r = extend_cross(model, cross)?;
    let h0 = DVector::from_vec(r.h0.expect("cross report carries h0"));
    let h1 = DVector::from_vec(r.h1.expect("cross report carries h1"));
    Ok((h0, h1))
}

/// Right-hand side of the cross estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossEstimate {
    /// `|a0|^2 / B_0(0)`
    pub point_term: f64,
    /// `∫_{V_1} |f1 - h0|^2 / |z2|^2 e^{-φ}` and the same on `V_2`.
    pub branch_terms: [f64; 2],
    pub total: f64,
}

/// `|a0|^2/B_0(0) + ∫_V |f - h0|^2 / |z|^2 e^{-φ} dλ`, the `V` integral
/// evaluated branch by branch with `rule_on_v`.
pub fn rhs_estimate_cross(
    model: &BergmanModel,
    cross: &CrossData,
    rule_on_v: &DiskRule,
) -> Result<CrossEstimate> {
    check_cross(model, cross)?;
    let a0 = cross.a0();
    let b0 = model.higher_kernel(0)?;
    let h0 = h0_coeffs(model, a0);
    let exps = model.exponents();
    let d = model.degree();
    let mut terms = [0.0; 2];
    for (branch, term) in terms.iter_mut().enumerate() {
        // branch 0: V1 = {z1 = 0}, data f1(z2); branch 1: V2 = {z2 = 0}, data f2(z1)
        let data = if branch == 0 { cross.f1() } else { cross.f2() };
        let mut p = vec![Complex64::new(0.0, 0.0); d + 1];
        for (k, v) in data.iter().enumerate() {
            p[k] += v;
        }
        for (i, &(a, b)) in exps.iter().enumerate() {
            match branch {
                0 if a == 0 => p[b as usize] -= h0[i],
                1 if b == 0 => p[a as usize] -= h0[i],
                _ => {}
            }
        }
        let scale = 1.0 + data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if p[0].norm() > 1e-10 * scale {
            return Err(Error::NonIntegrable(format!(
                "f - h0 does not vanish at the origin on branch V{} (value {})",
                branch + 1,
                p[0]
            )));
        }
        // (f - h0)/z as a polynomial
        let quotient: Vec<Complex64> = p[1..].to_vec();
        let weight = model.weight();
        let sums = rule_on_v.integrate_by_level(|z| {
            let pt = if branch == 0 {
                [Complex64::new(0.0, 0.0), z]
            } else {
                [z, Complex64::new(0.0, 0.0)]
            };
            let v = horner(&quotient, z).norm_sqr();
            if v == 0.0 {
                0.0
            } else {
                v * weight.density(&pt)
            }
        })?;
        if sums.diverges() {
            return Err(Error::NonIntegrable(format!(
                "the integral over V{} diverges at the origin (shell ratio {:.4})",
                branch + 1,
                sums.growth().map_or(f64::NAN, |g| g.ratio)
            )));
        }
        *term = sums.total();
    }
    let point_term = a0.norm_sqr() / b0;
    Ok(CrossEstimate {
        point_term,
        branch_terms: terms,
        total: point_term + terms[0] + terms[1],
    })
}

/// Values of the function with coefficients `c` on the branch `V_{branch+1}`
/// (`branch = 0`: `z1 = 0`), as a one-variable coefficient list.
pub fn restrict_to_branch(model: &BergmanModel, c: &DVector<Complex64>, branch: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); model.degree() + 1];
    for (i, &(a, b)) in model.exponents().iter().enumerate() {
        match branch {
            0 if a == 0 => out[b as usize] += c[i],
            1 if b == 0 => out[a as usize] += c[i],
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::ModelOptions;
    use crate::quadrature::{BidiskRuleSpec, DiskRuleSpec, QuadratureRule};
    use crate::weights::{AnyWeight, Weight};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quick() -> ModelOptions {
        ModelOptions {
            basis: None,
            check_refinement: false,
        }
    }

    fn disk_model(w: Weight, d: usize) -> BergmanModel {
        let rule: QuadratureRule = DiskRuleSpec::default().build().unwrap().into();
        BergmanModel::build(&w.into(), d, &rule, &quick()).unwrap()
    }

    fn bidisk_model(d: usize) -> BergmanModel {
        let rule: QuadratureRule = BidiskRuleSpec::default().build().unwrap().into();
        let w: AnyWeight = Weight::zero(Domain::Bidisk).into();
        BergmanModel::build(&w, d, &rule, &quick()).unwrap()
    }

    #[test]
    fn unweighted_jets() {
        let m = disk_model(Weight::zero(Domain::Disk), 6);
        let r = extend_jet_direct(&m, &Jet::real(&[1.0, 0.0]).unwrap()).unwrap();
        assert!((r.norm_sqr - PI).abs() < 1e-10);
        assert!((r.coefficients[0] - c(1.0, 0.0)).norm() < 1e-10);
        let r = extend_jet_direct(&m, &Jet::real(&[0.0, 1.0]).unwrap()).unwrap();
        assert!((r.norm_sqr - PI / 2.0).abs() < 1e-10);
        let r = extend_jet_recursive(&m, &Jet::new(vec![c(2.0, 1.0), c(0.0, -3.0)]).unwrap()).unwrap();
        assert!((r.norm_sqr - (5.0 * PI + 9.0 * PI / 2.0)).abs() < 1e-9);
        let z = extend_jet_direct(&m, &Jet::real(&[0.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(z.norm_sqr, 0.0);
    }

    #[test]
    fn solvers_agree_and_breakdown_sums() {
        let m = disk_model(Weight::linear_re(2.0), 16);
        let jet = Jet::new(vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.7, 0.0), c(0.0, 1.0)]).unwrap();
        let a = extend_jet_direct(&m, &jet).unwrap();
        let b = extend_jet_recursive(&m, &jet).unwrap();
        let diff = (a.coeff_vector() - b.coeff_vector()).norm() / a.coeff_vector().norm();
        assert!(diff < 1e-8, "{diff}");
        assert!((a.norm_sqr / b.norm_sqr - 1.0).abs() < 1e-8);
        assert!((b.breakdown_total().unwrap() / a.norm_sqr - 1.0).abs() < 1e-8);
        assert!(a.diagnostics.constraint_residual < 1e-8);
        assert!(b.diagnostics.constraint_residual < 1e-8);
        assert!(a.diagnostics.stationarity_residual < 1e-8);
        assert!(b.diagnostics.stationarity_residual < 1e-8);
        let one = extend_jet_recursive(&m, &Jet::real(&[1.5]).unwrap()).unwrap();
        assert!((one.norm_sqr - 2.25 / m.higher_kernel(0).unwrap()).abs() < 1e-9 * one.norm_sqr);
    }

    #[test]
    fn two_term_estimate_is_exact() {
        let m = disk_model(Weight::linear_re(1.5), 14);
        let jet = Jet::new(vec![c(0.8, -0.1), c(0.4, 1.2)]).unwrap();
        let est = rhs_estimate_jet(&m, &jet).unwrap();
        let n = extend_jet_direct(&m, &jet).unwrap().norm_sqr;
        assert!((est.exact / n - 1.0).abs() < 1e-8);
        let m0 = disk_model(Weight::zero(Domain::Disk), 6);
        let e0 = rhs_estimate_jet(&m0, &Jet::real(&[1.0, 0.0]).unwrap()).unwrap();
        assert!((e0.exact - PI).abs() < 1e-10);
        assert!((e0.ot_style - 1.0).abs() < 1e-12);
        let zz = rhs_estimate_jet(&m0, &Jet::real(&[0.0, 0.0]).unwrap()).unwrap();
        assert_eq!((zz.exact, zz.ot_style), (0.0, 0.0));
    }

    #[test]
    fn jet_too_long() {
        let m = disk_model(Weight::zero(Domain::Disk), 2);
        assert!(extend_jet_direct(&m, &Jet::real(&[1.0; 4]).unwrap()).is_err());
    }

    #[test]
    fn cross_data_constructor() {
        assert!(CrossData::real(&[1.0, 2.0], &[1.5]).is_err());
        assert!(CrossData::real(&[1.0, 2.0], &[1.0, 3.0]).is_ok());
    }

    #[test]
    fn unweighted_cross() {
        let m = bidisk_model(4);
        let k = CrossData::real(&[2.0], &[2.0]).unwrap();
        let r = extend_cross(&m, &k).unwrap();
        assert!((r.norm_sqr - 4.0 * PI * PI).abs() < 1e-9);
        let (h0, h1) = decompose_cross(&m, &k).unwrap();
        assert!((h0[0] - c(2.0, 0.0)).norm() < 1e-10);
        assert!(h1.norm() < 1e-10);

        let k = CrossData::real(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        let r = extend_cross(&m, &k).unwrap();
        assert!((r.norm_sqr - PI * PI).abs() < 1e-9);
        let h = r.coeff_vector();
        for (i, &(a, b)) in m.exponents().iter().enumerate() {
            let want = if (a, b) == (1, 0) || (a, b) == (0, 1) { 1.0 } else { 0.0 };
            assert!((h[i] - c(want, 0.0)).norm() < 1e-10);
        }
        let (h0, _) = decompose_cross(&m, &k).unwrap();
        assert!(h0.norm() == 0.0);
    }

    #[test]
    fn cross_estimates() {
        let m = bidisk_model(3);
        let v = DiskRuleSpec::default().build().unwrap();
        let e = rhs_estimate_cross(&m, &CrossData::real(&[1.5], &[1.5]).unwrap(), &v).unwrap();
        assert!((e.total - 2.25 * PI * PI).abs() < 1e-9);
        assert!(e.branch_terms.iter().all(|t| t.abs() < 1e-12));
        let e = rhs_estimate_cross(&m, &CrossData::real(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), &v).unwrap();
        assert!((e.total - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn cross_rejects_high_degree() {
        let m = bidisk_model(2);
        assert!(extend_cross(&m, &CrossData::real(&[0.0, 0.0, 0.0, 1.0], &[0.0]).unwrap()).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let m = bidisk_model(2);
        let r = extend_cross(&m, &CrossData::real(&[1.0, 0.5], &[1.0, -0.5]).unwrap()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: ExtensionReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.exponents, r.exponents);
        assert!((back.norm_sqr - r.norm_sqr).abs() == 0.0);
    }
}

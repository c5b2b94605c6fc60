//! Truncated weighted Bergman spaces: Gram matrices, orthonormal bases,
//! reproducing kernels and higher-order kernels at the origin.
//!
//! Coefficient vectors `c` stand for `Σ c_i m_i` over the monomial list of the
//! model. The Gram matrix follows `G_ij = ∫ m_i conj(m_j) e^{-φ}`; the
//! squared norm is `c* Q c` with `Q = G^T`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitize, FactorFailure, HermitianFactor};
use crate::quadrature::{
    add_vec, tree_reduce, BidiskRule, DiskRule, LevelSums, QuadratureRule, CHUNK,
};
use crate::weights::{AnyWeight, Domain};

/// Monomial basis of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `z^n`, `n <= D`.
    #[default]
    Disk,
    /// `z1^m z2^n`, `m, n <= D`.
    BidiskTensor,
    /// `z1^m z2^n`, `m + n <= D`.
    BidiskTotal,
}

impl Basis {
    pub fn domain(self) -> Domain {
        match self {
            Basis::Disk => Domain::Disk,
            _ => Domain::Bidisk,
        }
    }

    /// Exponent pairs, ordered by total degree and then by the `z1` exponent.
    pub fn exponents(self, degree: usize) -> Vec<(u32, u32)> {
        let d = degree as u32;
        let mut e: Vec<(u32, u32)> = match self {
            Basis::Disk => (0..=d).map(|n| (n, 0)).collect(),
            Basis::BidiskTensor => (0..=d).flat_map(|a| (0..=d).map(move |b| (a, b))).collect(),
            Basis::BidiskTotal => (0..=d)
                .flat_map(|a| (0..=d - a).map(move |b| (a, b)))
                .collect(),
        };
        e.sort_by_key(|&(a, b)| (a + b, a));
        e
    }
}

pub fn monomial_name(domain: Domain, (a, b): (u32, u32)) -> String {
    let pow = |v: &str, k: u32| match k {
        0 => String::new(),
        1 => v.to_string(),
        _ => format!("{v}^{k}"),
    };
    let parts: Vec<String> = match domain {
        Domain::Disk => vec![pow("z", a)],
        Domain::Bidisk => vec![pow("z1", a), pow("z2", b)],
    }
    .into_iter()
    .filter(|s| !s.is_empty())
    .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOptions {
    /// Defaults to [`Basis::Disk`] or [`Basis::BidiskTensor`].
    pub basis: Option<Basis>,
    /// Rebuild the Gram matrix with doubled quadrature orders and warn when
    /// the entries move by more than `1e-8` of the largest entry.
    pub check_refinement: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            basis: None,
            check_refinement: true,
        }
    }
}

/// `(B_k(0), e_k)` for one level of the disk filtration.
#[derive(Clone, Debug)]
struct Level {
    b_k: f64,
    element: DVector<Complex64>,
}

#[derive(Clone, Debug)]
pub struct BergmanModel {
    weight: AnyWeight,
    degree: usize,
    basis: Basis,
    exps: Vec<(u32, u32)>,
    gram: DMatrix<Complex64>,
    q: DMatrix<Complex64>,
    factor: HermitianFactor,
    q_inv: DMatrix<Complex64>,
    levels: Vec<Level>,
    raw_condition_number: f64,
    refinement_change: Option<f64>,
    warnings: Vec<String>,
}

/// Build a model with default options.
pub fn build_model(weight: &AnyWeight, degree: usize, rule: &QuadratureRule) -> Result<BergmanModel> {
    BergmanModel::build(weight, degree, rule, &ModelOptions::default())
}

impl BergmanModel {
    pub fn build(
        weight: &AnyWeight,
        degree: usize,
        rule: &QuadratureRule,
        options: &ModelOptions,
    ) -> Result<BergmanModel> {
        weight.validate()?;
        if degree < 1 {
            return Err(Error::Parameter("degree must be at least 1".into()));
        }
        let domain = weight.domain();
        let basis = options.basis.unwrap_or(match domain {
            Domain::Disk => Basis::Disk,
            Domain::Bidisk => Basis::BidiskTensor,
        });
        if basis.domain() != domain {
            return Err(Error::Parameter(format!(
                "basis {basis:?} does not match the {domain:?} weight"
            )));
        }
        let exps = basis.exponents(degree);
        let gram = assemble_gram(weight, &exps, rule)?;

        let mut warnings = Vec::new();
        let mut refinement_change = None;
        if options.check_refinement {
            let fine = assemble_gram(weight, &exps, &rule.refined()?)?;
            let scale = gram.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let diff = (&fine - &gram).iter().map(|v| v.norm()).fold(0.0, f64::max);
            let rel = diff / scale;
            refinement_change = Some(rel);
            if !(rel < 1e-8) {
                let msg = format!(
                    "Gram entries change by {rel:.2e} (relative) when quadrature orders double"
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        Self::from_gram(weight.clone(), degree, basis, exps, gram, refinement_change, warnings)
    }

    fn from_gram(
        weight: AnyWeight,
        degree: usize,
        basis: Basis,
        exps: Vec<(u32, u32)>,
        gram: DMatrix<Complex64>,
        refinement_change: Option<f64>,
        warnings: Vec<String>,
    ) -> Result<BergmanModel> {
        let domain = basis.domain();
        let mut q = gram.transpose();
        hermitize(&mut q);
        let factor = HermitianFactor::new(&q).map_err(|f| degeneracy(domain, &exps, f))?;
        let q_inv = factor.inverse();
        let raw = q.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = raw
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        let mut model = BergmanModel {
            weight,
            degree,
            basis,
            exps,
            gram,
            q,
            factor,
            q_inv,
            levels: Vec::new(),
            raw_condition_number: hi / lo,
            refinement_change,
            warnings,
        };
        if basis == Basis::Disk {
            model.levels = model.compute_levels()?;
        }
        Ok(model)
    }

    fn compute_levels(&self) -> Result<Vec<Level>> {
        let n = self.exps.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let (b_k, element) = if k == 0 {
                let col = self.q_inv.column(0).into_owned();
                (self.q_inv[(0, 0)].re, col)
            } else {
                let sub = self.q.view((k, k), (n - k, n - k)).into_owned();
                let f = HermitianFactor::new(&sub).map_err(|f| {
                    let shifted = FactorFailure {
                        reason: f.reason,
                        indices: f.indices.iter().map(|i| i + k).collect(),
                    };
                    degeneracy(Domain::Disk, &self.exps, shifted)
                })?;
                let mut e = DVector::zeros(n - k);
                e[0] = Complex64::new(1.0, 0.0);
                let col = f.solve(&e);
                let mut full = DVector::zeros(n);
                full.rows_mut(k, n - k).copy_from(&col);
                (col[0].re, full)
            };
            let scale = 1.0 / b_k.sqrt();
            let fact = factorial(k);
            out.push(Level {
                b_k: fact * fact * b_k,
                element: element * Complex64::new(scale, 0.0),
            });
        }
        Ok(out)
    }

    pub fn weight(&self) -> &AnyWeight {
        &self.weight
    }

    pub fn domain(&self) -> Domain {
        self.basis.domain()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exps
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn index_of(&self, a: u32, b: u32) -> Option<usize> {
        self.exps.iter().position(|e| *e == (a, b))
    }

    pub fn monomial_names(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .map(|&i| monomial_name(self.domain(), self.exps[i]))
            .collect()
    }

    /// `G_ij = ∫ m_i conj(m_j) e^{-φ}`.
    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    /// Norm matrix `Q = G^T`: `‖c‖^2 = c* Q c`.
    pub fn norm_matrix(&self) -> &DMatrix<Complex64> {
        &self.q
    }

    pub fn norm_matrix_inverse(&self) -> &DMatrix<Complex64> {
        &self.q_inv
    }

    pub fn factor(&self) -> &HermitianFactor {
        &self.factor
    }

    /// Matrix `T` with `T G T* = I`.
    pub fn orthonormal_coeffs(&self) -> DMatrix<Complex64> {
        self.factor.orthonormalizer().transpose()
    }

    /// Columns are the coefficient vectors of an orthonormal basis.
    pub fn orthonormal_basis(&self) -> DMatrix<Complex64> {
        self.factor.orthonormalizer()
    }

    /// Condition number of the diagonally equilibrated Gram matrix.
    pub fn condition_number(&self) -> f64 {
        self.factor.condition_number()
    }

    pub fn raw_condition_number(&self) -> f64 {
        self.raw_condition_number
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.factor.min_eigenvalue()
    }

    pub fn refinement_change(&self) -> Option<f64> {
        self.refinement_change
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn monomials_at(&self, z: &[Complex64]) -> DVector<Complex64> {
        let z1 = z[0];
        let z2 = z.get(1).copied().unwrap_or(Complex64::new(0.0, 0.0));
        DVector::from_iterator(
            self.exps.len(),
            self.exps
                .iter()
                .map(|&(a, b)| z1.powu(a) * if b == 0 { Complex64::new(1.0, 0.0) } else { z2.powu(b) }),
        )
    }

    /// Value at `z` of the function with coefficients `c`.
    pub fn eval(&self, c: &DVector<Complex64>, z: &[Complex64]) -> Complex64 {
        self.monomials_at(z).dot(c)
    }

    pub fn norm_sqr(&self, c: &DVector<Complex64>) -> f64 {
        c.dotc(&(&self.q * c)).re
    }

    /// `⟨f, g⟩ = ∫ f conj(g) e^{-φ}` for coefficient vectors `f`, `g`.
    pub fn inner(&self, f: &DVector<Complex64>, g: &DVector<Complex64>) -> Complex64 {
        g.dotc(&(&self.q * f))
    }

    /// Coefficients of `B(·, w)`.
    pub fn kernel_coeffs(&self, w: &[Complex64]) -> DVector<Complex64> {
        &self.q_inv * self.monomials_at(w).map(|v| v.conj())
    }

    /// `B(z, w) = Σ_j e_j(z) conj(e_j(w))`.
    pub fn kernel(&self, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        self.eval(&self.kernel_coeffs(w), z)
    }

    fn require_disk(&self, what: &str) -> Result<()> {
        if self.basis != Basis::Disk {
            return Err(Error::Parameter(format!("{what} is only defined on the disk")));
        }
        Ok(())
    }

    /// `B_k(0) = sup { |f^{(k)}(0)|^2 / ‖f‖^2 : f ∈ E_k }`, where `E_k`
    /// is spanned by the monomials of degree `>= k`. `k = 0` is also
    /// available on the bidisk.
    pub fn higher_kernel(&self, k: usize) -> Result<f64> {
        if k > self.degree {
            return Err(Error::Parameter(format!(
                "k = {k} exceeds the truncation degree {}",
                self.degree
            )));
        }
        if k == 0 {
            return Ok(self.q_inv[(0, 0)].re);
        }
        self.require_disk("B_k(0) for k >= 1")?;
        Ok(self.levels[k].b_k)
    }

    /// Unit vector of `E_k ⊖ E_{k+1}` with `e_k^{(k)}(0) = sqrt(B_k(0)) > 0`.
    pub fn level_element(&self, k: usize) -> Result<&DVector<Complex64>> {
        self.require_disk("the level decomposition")?;
        self.levels
            .get(k)
            .map(|l| &l.element)
            .ok_or_else(|| Error::Parameter(format!("k = {k} exceeds the truncation degree")))
    }

    /// `ω_B(0) = B_1(0) / B_0(0)`.
    pub fn bergman_metric_at_zero(&self) -> Result<f64> {
        Ok(self.higher_kernel(1)? / self.higher_kernel(0)?)
    }

    /// `e_0'(0)/e_0(0) = ∂ log B_0(z, z)` at 0.
    pub fn log_kernel_gradient_at_zero(&self) -> Result<Complex64> {
        self.require_disk("the log-kernel gradient")?;
        Ok(self.q_inv[(1, 0)] / self.q_inv[(0, 0)])
    }

    /// `∂∂̄ log B_0(z, z)` at 0 by the five-point stencil with step `h`.
    pub fn metric_finite_difference(&self, h: f64) -> Result<f64> {
        self.require_disk("the finite-difference metric")?;
        let lb = |z: Complex64| self.kernel(&[z], &[z]).re.ln();
        let o = Complex64::new(0.0, 0.0);
        let s = lb(Complex64::new(h, 0.0))
            + lb(Complex64::new(-h, 0.0))
            + lb(Complex64::new(0.0, h))
            + lb(Complex64::new(0.0, -h))
            - 4.0 * lb(o);
        Ok(0.25 * s / (h * h))
    }

    /// Relative gap between the stencil value and `B_1(0)/B_0(0)`.
    pub fn metric_fd_residual(&self) -> Result<f64> {
        let w = self.bergman_metric_at_zero()?;
        Ok((self.metric_finite_difference(1e-3)? - w).abs() / w.abs())
    }

    pub fn summary(&self) -> ModelSummary {
        let b_k = (0..=self.degree)
            .filter_map(|k| self.higher_kernel(k).ok().map(|v| (k, v)))
            .collect();
        ModelSummary {
            domain: self.domain(),
            basis: self.basis,
            degree: self.degree,
            dimension: self.dim(),
            condition_number: self.condition_number(),
            raw_condition_number: self.raw_condition_number,
            min_eigenvalue: self.min_eigenvalue(),
            b_k,
            omega_b: self.bergman_metric_at_zero().ok(),
            log_kernel_gradient: self.log_kernel_gradient_at_zero().ok().map(|g| [g.re, g.im]),
            refinement_change: self.refinement_change,
            warnings: self.warnings.clone(),
        }
    }
}

/// JSON-friendly digest of a model.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelSummary {
    pub domain: Domain,
    pub basis: Basis,
    pub degree: usize,
    pub dimension: usize,
    pub condition_number: f64,
    pub raw_condition_number: f64,
    pub min_eigenvalue: f64,
    /// `(k, B_k(0))`
    pub b_k: Vec<(usize, f64)>,
    pub omega_b: Option<f64>,
    pub log_kernel_gradient: Option<[f64; 2]>,
    pub refinement_change: Option<f64>,
    pub warnings: Vec<String>,
}

/// The functional `f ↦ f^{(k)}(0)` or `f ↦ f(p)` in the monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionalTarget {
    Evaluation(Vec<Complex64>),
    DerivativeAtZero(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelFunctional {
    pub target: FunctionalTarget,
    /// `ℓ(f) = Σ coeffs_i c_i`.
    pub coeffs: DVector<Complex64>,
}

impl KernelFunctional {
    pub fn derivative(model: &BergmanModel, k: usize) -> Result<Self> {
        model.require_disk("the derivative functional")?;
        if k > model.degree {
            return Err(Error::Parameter(format!("k = {k} exceeds the degree")));
        }
        let mut coeffs = DVector::zeros(model.dim());
        coeffs[k] = Complex64::new(factorial(k), 0.0);
        Ok(KernelFunctional {
            target: FunctionalTarget::DerivativeAtZero(k),
            coeffs,
        })
    }

    pub fn evaluation(model: &BergmanModel, z: &[Complex64]) -> Self {
        KernelFunctional {
            target: FunctionalTarget::Evaluation(z.to_vec()),
            coeffs: model.monomials_at(z),
        }
    }

    pub fn apply(&self, c: &DVector<Complex64>) -> Complex64 {
        self.coeffs.dot(c)
    }

    /// Riesz representer: `ℓ(f) = ⟨f, r⟩`.
    pub fn representer(&self, model: &BergmanModel) -> DVector<Complex64> {
        &model.q_inv * self.coeffs.map(|v| v.conj())
    }

    /// `sup |ℓ(f)|^2 / ‖f‖^2` over the whole truncated space.
    pub fn norm_sqr(&self, model: &BergmanModel) -> f64 {
        model.norm_sqr(&self.representer(model))
    }
}

pub fn kernel(model: &BergmanModel, z: &[Complex64], w: &[Complex64]) -> Complex64 {
    model.kernel(z, w)
}

pub fn higher_kernel(model: &BergmanModel, k: usize) -> Result<f64> {
    model.higher_kernel(k)
}

pub fn bergman_metric_at_zero(model: &BergmanModel) -> Result<f64> {
    model.bergman_metric_at_zero()
}

pub fn log_kernel_gradient_at_zero(model: &BergmanModel) -> Result<Complex64> {
    model.log_kernel_gradient_at_zero()
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn degeneracy(domain: Domain, exps: &[(u32, u32)], f: FactorFailure) -> Error {
    Error::Degenerate {
        reason: format!(
            "Gram matrix is numerically singular: {}; lower the degree or change the quadrature grading",
            f.reason
        ),
        monomials: f.indices.iter().map(|&i| monomial_name(domain, exps[i])).collect(),
    }
}

fn divergence_error(domain: Domain, exps: &[(u32, u32)], bad: Vec<usize>) -> Error {
    Error::Degenerate {
        reason: "e^{-φ} is not integrable against some monomials (shell contributions do not decay at a singular center); lower the weight's singularity or drop those monomials".into(),
        monomials: bad.into_iter().map(|i| monomial_name(domain, exps[i])).collect(),
    }
}

fn assemble_gram(
    weight: &AnyWeight,
    exps: &[(u32, u32)],
    rule: &QuadratureRule,
) -> Result<DMatrix<Complex64>> {
    match (weight.domain(), rule) {
        (Domain::Disk, QuadratureRule::Disk(r)) => disk_gram(weight, exps, r),
        (Domain::Bidisk, QuadratureRule::Bidisk(r)) => bidisk_gram(weight, exps, r),
        (d, _) => Err(Error::Parameter(format!(
            "quadrature rule does not match the {d:?} domain"
        ))),
    }
}

fn fill_lower(acc: &[Complex64], n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i <= j {
            acc[i * n + j]
        } else {
            acc[j * n + i].conj()
        }
    })
}

fn disk_gram(weight: &AnyWeight, exps: &[(u32, u32)], rule: &DiskRule) -> Result<DMatrix<Complex64>> {
    let n = exps.len();
    let npatch = rule.tags().iter().map(|t| t.patch as usize + 1).max().unwrap_or(1);
    let nlevel = rule.tags().iter().map(|t| t.level as usize + 1).max().unwrap_or(1);
    let maxe = exps.iter().map(|e| e.0).max().unwrap_or(0) as usize;
    // (upper-triangular Gram accumulator, diagonal split by shell)
    type Acc = (Vec<Complex64>, Vec<f64>);
    let partials: Vec<Result<Acc>> = rule
        .nodes()
        .par_chunks(CHUNK)
        .zip(rule.weights().par_chunks(CHUNK))
        .zip(rule.tags().par_chunks(CHUNK))
        .map(|((zs, ws), ts)| {
            let mut g = vec![Complex64::new(0.0, 0.0); n * n];
            let mut diag = vec![0.0; n * npatch * nlevel];
            let mut pw = vec![Complex64::new(0.0, 0.0); maxe + 1];
            let mut p = vec![Complex64::new(0.0, 0.0); n];
            for ((z, w), t) in zs.iter().zip(ws).zip(ts) {
                let dens = weight.density(&[*z]);
                let d = w * dens;
                if !d.is_finite() {
                    return Err(Error::Evaluation {
                        node: z.to_string(),
                        value: format!("e^(-phi) = {dens}"),
                    });
                }
                pw[0] = Complex64::new(1.0, 0.0);
                for k in 1..=maxe {
                    pw[k] = pw[k - 1] * z;
                }
                for (i, e) in exps.iter().enumerate() {
                    p[i] = pw[e.0 as usize];
                }
                let shell = t.patch as usize * nlevel + t.level as usize;
                for i in 0..n {
                    let a = p[i] * d;
                    for j in i..n {
                        g[i * n + j] += a * p[j].conj();
                    }
                    diag[i * npatch * nlevel + shell] += d * p[i].norm_sqr();
                }
            }
            Ok((g, diag))
        })
        .collect();
    let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
    let zero: Acc = (vec![Complex64::new(0.0, 0.0); n * n], vec![0.0; n * npatch * nlevel]);
    let (g, diag) = tree_reduce(partials, zero, |a, b| {
        (
            a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect(),
            add_vec(a.1, b.1),
        )
    });
    let annuli = match rule.spec().radial_map {
        crate::quadrature::RadialMap::Graded => rule.spec().annuli,
        crate::quadrature::RadialMap::LogLog => 0,
    };
    let bad: Vec<usize> = (0..n)
        .filter(|&i| {
            let block = &diag[i * npatch * nlevel..(i + 1) * npatch * nlevel];
            LevelSums {
                patches: block.chunks(nlevel).map(|c| c.to_vec()).collect(),
                graded_annuli: annuli,
                ratio: rule.spec().grading_ratio,
            }
            .diverges()
        })
        .collect();
    if !bad.is_empty() {
        return Err(divergence_error(Domain::Disk, exps, bad));
    }
    Ok(fill_lower(&g, n))
}

/// Outer nodes per work item in the bidisk assembly.
const OUTER_CHUNK: usize = 8;

fn bidisk_gram(
    weight: &AnyWeight,
    exps: &[(u32, u32)],
    rule: &BidiskRule,
) -> Result<DMatrix<Complex64>> {
    let circular = rule.spec().circular_reduction;
    if circular && !weight.is_jointly_circular() {
        return Err(Error::Parameter(
            "circular quadrature reduction requires a weight invariant under joint rotation"
                .into(),
        ));
    }
    let n = exps.len();
    let d1 = exps.iter().map(|e| e.0).max().unwrap_or(0) as usize;
    let d2 = exps.iter().map(|e| e.1).max().unwrap_or(0) as usize;
    let m2 = d2 + 1;
    let outer = rule.outer();
    let inner_levels = rule.spec().factor2.annuli + 1;
    let outer_levels = outer.tags().iter().map(|t| t.level as usize + 1).max().unwrap_or(1);
    // keep only pairs that survive the reduction
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            !circular || exps[i].0 + exps[i].1 == exps[j].0 + exps[j].1
        })
        .collect();
    type Acc = (Vec<Complex64>, Vec<f64>, Vec<f64>);
    let idx: Vec<usize> = (0..outer.len()).collect();
    let partials: Vec<Result<Acc>> = idx
        .par_chunks(OUTER_CHUNK)
        .map(|chunk| {
            let mut g = vec![Complex64::new(0.0, 0.0); pairs.len()];
            let mut diag_in = vec![0.0; n * inner_levels];
            let mut diag_out = vec![0.0; n * outer_levels];
            let mut s = vec![Complex64::new(0.0, 0.0); m2 * m2];
            let mut s_lvl = vec![0.0; m2 * inner_levels];
            let mut p2 = vec![Complex64::new(0.0, 0.0); m2];
            let mut p1 = vec![Complex64::new(0.0, 0.0); d1 + 1];
            for &oi in chunk {
                let z1 = outer.nodes()[oi];
                let w1 = outer.weights()[oi];
                let olvl = outer.tags()[oi].level as usize;
                let inner = rule.inner_for(z1);
                s.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                s_lvl.iter_mut().for_each(|v| *v = 0.0);
                for ((z2, w2), t) in inner.nodes().iter().zip(inner.weights()).zip(inner.tags()) {
                    let dens = weight.density(&[z1, *z2]);
                    let d = w2 * dens;
                    if !d.is_finite() {
                        return Err(Error::Evaluation {
                            node: format!("({z1}, {z2})"),
                            value: format!("e^(-phi) = {dens}"),
                        });
                    }
                    p2[0] = Complex64::new(1.0, 0.0);
                    for k in 1..m2 {
                        p2[k] = p2[k - 1] * z2;
                    }
                    let lvl = (t.level as usize).min(inner_levels - 1);
                    for b in 0..m2 {
                        let a = p2[b] * d;
                        for dd in b..m2 {
                            s[b * m2 + dd] += a * p2[dd].conj();
                        }
                        s_lvl[b * inner_levels + lvl] += d * p2[b].norm_sqr();
                    }
                }
                p1[0] = Complex64::new(1.0, 0.0);
                for k in 1..=d1 {
                    p1[k] = p1[k - 1] * z1;
                }
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    let (a, b) = exps[i];
                    let (c, dd) = exps[j];
                    let sv = if b <= dd {
                        s[b as usize * m2 + dd as usize]
                    } else {
                        s[dd as usize * m2 + b as usize].conj()
                    };
                    g[k] += p1[a as usize] * p1[c as usize].conj() * sv * w1;
                }
                for (i, &(a, b)) in exps.iter().enumerate() {
                    let r1 = p1[a as usize].norm_sqr() * w1;
                    for l in 0..inner_levels {
                        diag_in[i * inner_levels + l] += r1 * s_lvl[b as usize * inner_levels + l];
                    }
                    diag_out[i * outer_levels + olvl] += r1 * s[b as usize * m2 + b as usize].re;
                }
            }
            Ok((g, diag_in, diag_out))
        })
        .collect();
    let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
    let zero: Acc = (
        vec![Complex64::new(0.0, 0.0); pairs.len()],
        vec![0.0; n * inner_levels],
        vec![0.0; n * outer_levels],
    );
    let (g, diag_in, diag_out) = tree_reduce(partials, zero, |a, b| {
        (
            a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect(),
            add_vec(a.1, b.1),
            add_vec(a.2, b.2),
        )
    });
    let check = |diag: &[f64], levels: usize, annuli: usize, ratio: f64| -> Vec<usize> {
        (0..n)
            .filter(|&i| {
                LevelSums {
                    patches: vec![diag[i * levels..(i + 1) * levels].to_vec()],
                    graded_annuli: annuli,
                    ratio,
                }
                .diverges()
            })
            .collect()
    };
    let mut bad = check(
        &diag_in,
        inner_levels,
        rule.spec().factor2.annuli,
        rule.spec().factor2.grading_ratio,
    );
    // the outer split only reflects grading when the outer rule has a single patch
    if rule.spec().factor1.grading_centers.len() <= 1 {
        bad.extend(check(
            &diag_out,
            outer_levels,
            rule.spec().factor1.annuli,
            rule.spec().factor1.grading_ratio,
        ));
    }
    bad.sort_unstable();
    bad.dedup();
    if !bad.is_empty() {
        return Err(divergence_error(Domain::Bidisk, exps, bad));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        acc[i * n + j] = g[k];
    }
    Ok(fill_lower(&acc, n))
}

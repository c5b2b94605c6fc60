//! Tensor polar quadrature on the unit disk and bidisk.
//!
//! Every rule is a product of Gauss–Legendre nodes in the radial direction
//! and the uniform trapezoid rule in the angle. Radii are split into annuli
//! that shrink geometrically toward a grading center, so integrands with
//! `log|z - c|` or `|z - c|^{-2a}` (`a < 1`) singularities at the center
//! converge as the orders grow. Several centers are handled with a smooth
//! partition of unity, one polar patch per center.
//!
//! Sums run over fixed-size node chunks and are combined with a fixed
//! pairwise tree, so results do not depend on the thread count.

use std::borrow::Cow;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const CHUNK: usize = 4096;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// How radii are distributed inside a polar patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadialMap {
    /// Geometric annuli toward the center, Gauss–Legendre on each.
    #[default]
    Graded,
    /// Single substitution `r = R exp(-(1-t)/t)`, which turns
    /// `dr / (r log^2 r)`-type singularities into smooth integrands.
    LogLog,
}

/// Recipe for a disk rule. Rules are rebuilt from their recipe when refined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiskRuleSpec {
    /// Gauss–Legendre nodes per radial segment.
    pub radial_order: usize,
    pub angular_order: usize,
    pub grading_centers: Vec<Complex64>,
    pub grading_ratio: f64,
    /// Number of geometrically graded annuli around each center.
    pub annuli: usize,
    /// Extra radial breakpoints (distances from the center), e.g. the radius
    /// of a kink in the weight.
    pub breakpoints: Vec<f64>,
    pub radius: f64,
    pub radial_map: RadialMap,
}

impl Default for DiskRuleSpec {
    fn default() -> Self {
        DiskRuleSpec {
            radial_order: 64,
            angular_order: 128,
            grading_centers: vec![Complex64::new(0.0, 0.0)],
            grading_ratio: 0.5,
            annuli: 20,
            breakpoints: Vec::new(),
            radius: 1.0,
            radial_map: RadialMap::Graded,
        }
    }
}

impl DiskRuleSpec {
    pub fn new(radial_order: usize, angular_order: usize) -> Self {
        DiskRuleSpec {
            radial_order,
            angular_order,
            ..Default::default()
        }
    }

    pub fn with_annuli(mut self, annuli: usize) -> Self {
        self.annuli = annuli;
        self
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        let scale = radius / self.radius;
        self.grading_centers.iter_mut().for_each(|c| *c *= scale);
        self.breakpoints.iter_mut().for_each(|b| *b *= scale);
        self.radius = radius;
        self
    }

    pub fn with_radial_map(mut self, map: RadialMap) -> Self {
        self.radial_map = map;
        self
    }

    /// Same layout with radial and angular orders doubled.
    pub fn refined(&self) -> Self {
        let mut s = self.clone();
        s.radial_order *= 2;
        s.angular_order *= 2;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_order < 2 {
            return Err(Error::Parameter(format!(
                "radial order must be >= 2, got {}",
                self.radial_order
            )));
        }
        if self.angular_order < 4 {
            return Err(Error::Parameter(format!(
                "angular order must be >= 4, got {}",
                self.angular_order
            )));
        }
        if !(self.grading_ratio > 0.0 && self.grading_ratio < 1.0) {
            return Err(Error::Parameter(format!(
                "grading ratio must lie in (0,1), got {}",
                self.grading_ratio
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Parameter(format!("bad radius {}", self.radius)));
        }
        for c in &self.grading_centers {
            if !(c.norm() <= self.radius * (1.0 + 1e-12)) {
                return Err(Error::Parameter(format!(
                    "grading center {c} lies outside the closed disk"
                )));
            }
        }
        for (i, a) in self.grading_centers.iter().enumerate() {
            for b in &self.grading_centers[i + 1..] {
                if (a - b).norm() < 1e-12 {
                    return Err(Error::Parameter(format!("duplicate grading center {a}")));
                }
            }
        }
        if self.breakpoints.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::Parameter("breakpoints must be positive".into()));
        }
        if self.radial_map == RadialMap::LogLog
            && self.grading_centers.iter().any(|c| c.norm() > 0.0)
        {
            return Err(Error::Parameter(
                "the log-log radial map is only available for a center at the origin".into(),
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<DiskRule> {
        self.validate()?;
        Ok(build_disk(self, self.angular_order, None))
    }
}

/// Shell bookkeeping for a node: which polar patch it belongs to and how many
/// grading steps it sits below the outer radius of that patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeTag {
    pub patch: u16,
    pub level: u16,
}

/// Quadrature rule on a disk of radius `spec.radius` centered at 0.
#[derive(Clone, Debug)]
pub struct DiskRule {
    nodes: Vec<Complex64>,
    weights: Vec<f64>,
    tags: Vec<NodeTag>,
    spec: DiskRuleSpec,
}

/// Build a graded polar rule on the unit disk.
pub fn disk_rule(
    radial_order: usize,
    angular_order: usize,
    grading_centers: &[Complex64],
    grading_ratio: f64,
) -> Result<DiskRule> {
    DiskRuleSpec {
        radial_order,
        angular_order,
        grading_centers: grading_centers.to_vec(),
        grading_ratio,
        ..Default::default()
    }
    .build()
}

struct Segment {
    lo: f64,
    hi: f64,
    level: u16,
}

fn segments(spec: &DiskRuleSpec, extent: f64) -> Vec<Segment> {
    let q = spec.grading_ratio;
    let mut cuts: Vec<(f64, u16)> = Vec::new();
    // outer edge of each level, outermost first
    for k in 0..=spec.annuli {
        let r = extent * q.powi(k as i32);
        cuts.push((r, k as u16));
    }
    let mut segs = Vec::new();
    for k in 0..spec.annuli {
        segs.push(Segment {
            lo: cuts[k + 1].0,
            hi: cuts[k].0,
            level: k as u16,
        });
    }
    segs.push(Segment {
        lo: 0.0,
        hi: cuts[spec.annuli].0,
        level: spec.annuli as u16,
    });
    for &b in &spec.breakpoints {
        if let Some(pos) = segs
            .iter()
            .position(|s| b > s.lo * (1.0 + 1e-12) && b < s.hi * (1.0 - 1e-12))
        {
            let s = segs.remove(pos);
            segs.insert(
                pos,
                Segment {
                    lo: s.lo,
                    hi: b,
                    level: s.level,
                },
            );
            segs.insert(
                pos,
                Segment {
                    lo: b,
                    hi: s.hi,
                    level: s.level,
                },
            );
        }
    }
    segs
}

/// Distance from `c` to the circle `|z| = radius` along direction `dir`.
fn boundary_distance(c: Complex64, dir: Complex64, radius: f64) -> f64 {
    if c.norm_sqr() == 0.0 {
        return radius;
    }
    let b = (c.conj() * dir).re;
    let disc = (b * b + radius * radius - c.norm_sqr()).max(0.0);
    -b + disc.sqrt()
}

/// Weight of patch `i` in the partition of unity at `z`.
fn partition_weight(centers: &[Complex64], i: usize, z: Complex64) -> f64 {
    if centers.len() == 1 {
        return 1.0;
    }
    // chi_i = d_i^{-1} / sum_k d_k^{-1}, d_k = |z - c_k|^4
    let inv: Vec<f64> = centers
        .iter()
        .map(|c| {
            let d = (z - c).norm_sqr();
            1.0 / (d * d)
        })
        .collect();
    if inv[i].is_infinite() {
        return 1.0;
    }
    if inv.iter().any(|v| v.is_infinite()) {
        return 0.0;
    }
    inv[i] / inv.iter().sum::<f64>()
}

/// Build a disk rule. `angular` may be 1 for rotation-reduced outer rules;
/// `extent` overrides the outer radius used for the geometric grading.
fn build_disk(spec: &DiskRuleSpec, angular: usize, extent: Option<f64>) -> DiskRule {
    let (gx, gw) = gauss_legendre(spec.radial_order);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut tags = Vec::new();
    let dtheta = 2.0 * PI / angular as f64;
    let centers = if spec.grading_centers.is_empty() {
        vec![Complex64::new(0.0, 0.0)]
    } else {
        spec.grading_centers.clone()
    };
    for (patch, &c) in centers.iter().enumerate() {
        let ext = extent.unwrap_or(spec.radius + c.norm());
        let segs = segments(spec, ext);
        for j in 0..angular {
            let theta = dtheta * (j as f64 + 0.5);
            let dir = Complex64::from_polar(1.0, theta);
            let rmax = boundary_distance(c, dir, spec.radius);
            if rmax <= 0.0 {
                continue;
            }
            let mut push = |rho: f64, w: f64, level: u16| {
                let z = c + dir * rho;
                let chi = partition_weight(&centers, patch, z);
                let wt = w * rho * dtheta * chi;
                if wt > 0.0 {
                    nodes.push(z);
                    weights.push(wt);
                    tags.push(NodeTag {
                        patch: patch as u16,
                        level,
                    });
                }
            };
            match spec.radial_map {
                RadialMap::Graded => {
                    for s in &segs {
                        if s.lo >= rmax {
                            continue;
                        }
                        let hi = s.hi.min(rmax);
                        let half = 0.5 * (hi - s.lo);
                        for (x, w) in gx.iter().zip(&gw) {
                            push(s.lo + half * (x + 1.0), half * w, s.level);
                        }
                    }
                }
                RadialMap::LogLog => {
                    // t in (0, 1], split into four equal pieces
                    let pieces = 4;
                    for p in 0..pieces {
                        let a = p as f64 / pieces as f64;
                        let half = 0.5 / pieces as f64;
                        for (x, w) in gx.iter().zip(&gw) {
                            let t = a + half * (x + 1.0);
                            let rho = rmax * (-(1.0 - t) / t).exp();
                            let jac = rho / (t * t);
                            let level = (rmax / rho).log2().clamp(0.0, u16::MAX as f64) as u16;
                            push(rho, half * w * jac, level);
                        }
                    }
                }
            }
        }
    }
    DiskRule {
        nodes,
        weights,
        tags,
        spec: spec.clone(),
    }
}

/// Sum a sequence with a fixed pairwise tree.
pub(crate) fn tree_reduce<T, F>(mut items: Vec<T>, zero: T, combine: F) -> T
where
    F: Fn(T, T) -> T,
{
    if items.is_empty() {
        return zero;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop().unwrap()
}

fn check_finite(v: Complex64, node: impl FnOnce() -> String) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            node: node(),
            value: v.to_string(),
        })
    }
}

impl DiskRule {
    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    pub fn spec(&self) -> &DiskRuleSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn refined(&self) -> Result<DiskRule> {
        self.spec.refined().build()
    }

    /// `Σ w_i f(z_i)`; fails on the first non-finite value, naming the node.
    pub fn integrate<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let partials: Vec<Result<Complex64>> = self
            .nodes
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(zs, ws)| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (z, w) in zs.iter().zip(ws) {
                    let v = check_finite(f(*z), || z.to_string())?;
                    acc += v * *w;
                }
                Ok(acc)
            })
            .collect();
        let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(tree_reduce(partials, Complex64::new(0.0, 0.0), |a, b| a + b))
    }

    /// Real integral together with its split over (patch, level) shells.
    pub fn integrate_by_level<F>(&self, f: F) -> Result<LevelSums>
    where
        F: Fn(Complex64) -> f64 + Sync,
    {
        let npatch = self.tags.iter().map(|t| t.patch as usize + 1).max().unwrap_or(1);
        let nlevel = self.tags.iter().map(|t| t.level as usize + 1).max().unwrap_or(1);
        let partials: Vec<Result<Vec<f64>>> = self
            .nodes
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .zip(self.tags.par_chunks(CHUNK))
            .map(|((zs, ws), ts)| {
                let mut acc = vec![0.0; npatch * nlevel];
                for ((z, w), t) in zs.iter().zip(ws).zip(ts) {
                    let v = f(*z);
                    if !v.is_finite() {
                        return Err(Error::Evaluation {
                            node: z.to_string(),
                            value: v.to_string(),
                        });
                    }
                    acc[t.patch as usize * nlevel + t.level as usize] += w * v;
                }
                Ok(acc)
            })
            .collect();
        let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
        let sums = tree_reduce(partials, vec![0.0; npatch * nlevel], add_vec);
        Ok(LevelSums {
            patches: sums.chunks(nlevel).map(|c| c.to_vec()).collect(),
            graded_annuli: if self.spec.radial_map == RadialMap::Graded {
                self.spec.annuli
            } else {
                0
            },
            ratio: self.spec.grading_ratio,
        })
    }
}

pub(crate) fn add_vec(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
    a
}

/// Per-shell split of a nonnegative integral.
#[derive(Clone, Debug)]
pub struct LevelSums {
    /// `patches[p][level]`; level 0 is the outermost annulus.
    pub patches: Vec<Vec<f64>>,
    pub graded_annuli: usize,
    pub ratio: f64,
}

/// Growth diagnostics of a shell split at the innermost graded annuli.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellGrowth {
    /// Contribution of the innermost graded annulus.
    pub innermost: f64,
    /// Ratio of the innermost to the next annulus; `>= 1` means the
    /// contributions do not decay as the shells shrink.
    pub ratio: f64,
}

/// Shell ratio above which an integral is declared divergent at the center.
pub const DIVERGENCE_RATIO: f64 = 1.0 - 1e-3;

impl LevelSums {
    pub fn total(&self) -> f64 {
        let parts: Vec<f64> = self.patches.iter().map(|p| p.iter().sum()).collect();
        tree_reduce(parts, 0.0, |a, b| a + b)
    }

    /// Worst growth over patches, `None` when fewer than two graded annuli.
    pub fn growth(&self) -> Option<ShellGrowth> {
        let k = self.graded_annuli;
        if k < 2 {
            return None;
        }
        self.patches
            .iter()
            .filter_map(|p| {
                let inner = *p.get(k - 1)?;
                let outer = *p.get(k - 2)?;
                if outer > 0.0 {
                    Some(ShellGrowth {
                        innermost: inner,
                        ratio: inner / outer,
                    })
                } else {
                    None
                }
            })
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
    }

    pub fn diverges(&self) -> bool {
        self.growth().is_some_and(|g| g.ratio >= DIVERGENCE_RATIO)
    }
}

/// How the second factor of a bidisk rule is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BidiskGrading {
    /// Plain tensor product of the two factor rules.
    #[default]
    Tensor,
    /// For every outer node `z1`, the `z2` rule is a polar patch centered at
    /// `z2 = z1`, graded toward the diagonal.
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BidiskRuleSpec {
    pub factor1: DiskRuleSpec,
    pub factor2: DiskRuleSpec,
    pub grading: BidiskGrading,
    /// Replace the `z1` angle by a single node carrying the full `2π`.
    /// Exact only for integrands invariant under
    /// `(z1, z2) -> (e^{it} z1, e^{it} z2)`.
    pub circular_reduction: bool,
}

impl Default for BidiskRuleSpec {
    fn default() -> Self {
        let f = DiskRuleSpec {
            radial_order: 16,
            angular_order: 48,
            annuli: 4,
            ..Default::default()
        };
        BidiskRuleSpec {
            factor1: f.clone(),
            factor2: f,
            grading: BidiskGrading::Tensor,
            circular_reduction: false,
        }
    }
}

impl BidiskRuleSpec {
    pub fn tensor(factor1: DiskRuleSpec, factor2: DiskRuleSpec) -> Self {
        BidiskRuleSpec {
            factor1,
            factor2,
            grading: BidiskGrading::Tensor,
            circular_reduction: false,
        }
    }

    pub fn diagonal(factor1: DiskRuleSpec, factor2: DiskRuleSpec) -> Self {
        BidiskRuleSpec {
            factor1,
            factor2,
            grading: BidiskGrading::Diagonal,
            circular_reduction: false,
        }
    }

    pub fn with_circular_reduction(mut self, on: bool) -> Self {
        self.circular_reduction = on;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.factor1 = self.factor1.with_radius(radius);
        self.factor2 = self.factor2.with_radius(radius);
        self
    }

    pub fn refined(&self) -> Self {
        let mut s = self.clone();
        s.factor1 = s.factor1.refined();
        s.factor2 = s.factor2.refined();
        s
    }

    pub fn build(&self) -> Result<BidiskRule> {
        self.factor1.validate()?;
        self.factor2.validate()?;
        if self.grading == BidiskGrading::Diagonal {
            if self.factor2.radial_map != RadialMap::Graded {
                return Err(Error::Parameter(
                    "diagonal grading needs a graded second factor".into(),
                ));
            }
            if (self.factor1.radius - self.factor2.radius).abs() > 1e-15 {
                return Err(Error::Parameter(
                    "diagonal grading needs equal factor radii".into(),
                ));
            }
        }
        let angular = if self.circular_reduction {
            1
        } else {
            self.factor1.angular_order
        };
        let outer = build_disk(&self.factor1, angular, None);
        let inner = match self.grading {
            BidiskGrading::Tensor => InnerRule::Shared(self.factor2.build()?),
            BidiskGrading::Diagonal => InnerRule::Centered(self.factor2.clone()),
        };
        Ok(BidiskRule {
            outer,
            inner,
            spec: self.clone(),
        })
    }
}

#[derive(Clone, Debug)]
enum InnerRule {
    Shared(DiskRule),
    Centered(DiskRuleSpec),
}

/// Quadrature rule on the bidisk. Nodes are produced lazily: an outer `z1`
/// rule and, per outer node, a `z2` rule.
#[derive(Clone, Debug)]
pub struct BidiskRule {
    outer: DiskRule,
    inner: InnerRule,
    spec: BidiskRuleSpec,
}

/// Build a bidisk rule from per-factor recipes.
pub fn bidisk_rule(
    factor1: DiskRuleSpec,
    factor2: DiskRuleSpec,
    grading: BidiskGrading,
) -> Result<BidiskRule> {
    BidiskRuleSpec {
        factor1,
        factor2,
        grading,
        circular_reduction: false,
    }
    .build()
}

impl BidiskRule {
    pub fn spec(&self) -> &BidiskRuleSpec {
        &self.spec
    }

    pub fn outer(&self) -> &DiskRule {
        &self.outer
    }

    /// The `z2` rule attached to the outer node `z1`.
    pub fn inner_for(&self, z1: Complex64) -> Cow<'_, DiskRule> {
        match &self.inner {
            InnerRule::Shared(r) => Cow::Borrowed(r),
            InnerRule::Centered(spec) => {
                let mut s = spec.clone();
                s.grading_centers = vec![z1];
                Cow::Owned(build_disk(&s, s.angular_order, Some(2.0 * s.radius)))
            }
        }
    }

    pub fn refined(&self) -> Result<BidiskRule> {
        self.spec.refined().build()
    }

    pub fn node_count(&self) -> usize {
        match &self.inner {
            InnerRule::Shared(r) => self.outer.len() * r.len(),
            InnerRule::Centered(_) => self
                .outer
                .nodes()
                .iter()
                .map(|z| self.inner_for(*z).len())
                .sum(),
        }
    }

    /// `Σ w f(z1, z2)` over all node pairs.
    pub fn integrate<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        let partials: Vec<Result<Complex64>> = self
            .outer
            .nodes()
            .par_iter()
            .zip(self.outer.weights().par_iter())
            .map(|(z1, w1)| {
                let inner = self.inner_for(*z1);
                let mut chunks = Vec::new();
                for (zs, ws) in inner.nodes().chunks(CHUNK).zip(inner.weights().chunks(CHUNK)) {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (z2, w2) in zs.iter().zip(ws) {
                        let v = check_finite(f(*z1, *z2), || format!("({z1}, {z2})"))?;
                        acc += v * *w2;
                    }
                    chunks.push(acc);
                }
                Ok(tree_reduce(chunks, Complex64::new(0.0, 0.0), |a, b| a + b) * *w1)
            })
            .collect();
        let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(tree_reduce(partials, Complex64::new(0.0, 0.0), |a, b| a + b))
    }
}

/// A rule on either domain.
#[derive(Clone, Debug)]
pub enum QuadratureRule {
    Disk(DiskRule),
    Bidisk(BidiskRule),
}

impl From<DiskRule> for QuadratureRule {
    fn from(r: DiskRule) -> Self {
        QuadratureRule::Disk(r)
    }
}

impl From<BidiskRule> for QuadratureRule {
    fn from(r: BidiskRule) -> Self {
        QuadratureRule::Bidisk(r)
    }
}

impl QuadratureRule {
    pub fn refined(&self) -> Result<QuadratureRule> {
        Ok(match self {
            QuadratureRule::Disk(r) => QuadratureRule::Disk(r.refined()?),
            QuadratureRule::Bidisk(r) => QuadratureRule::Bidisk(r.refined()?),
        })
    }

    /// Integrate a function of the point coordinates (`[z]` or `[z1, z2]`).
    pub fn integrate<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(&[Complex64]) -> Complex64 + Sync,
    {
        match self {
            QuadratureRule::Disk(r) => r.integrate(|z| f(&[z])),
            QuadratureRule::Bidisk(r) => r.integrate(|a, b| f(&[a, b])),
        }
    }
}

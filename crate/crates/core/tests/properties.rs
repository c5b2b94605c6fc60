use std::f64::consts::PI;
use std::sync::OnceLock;

use bergman_ext::bergman::{BergmanModel, ModelOptions};
use bergman_ext::extension::{
    decompose_cross, extend_cross, extend_jet_direct, extend_jet_recursive, CrossData, Jet,
};
use bergman_ext::functionals::{
    branch_l2_norm, derivative_norm_on_y, gamma_branch_norm, log_weighted_bulk_norm, GammaVariant, NormKind,
    NormSpec, Region,
};
use bergman_ext::harness::{run, Experiment, SweepConfig};
use bergman_ext::poly::ComplexPoly;
use bergman_ext::quadrature::{BidiskRuleSpec, DiskRuleSpec, QuadratureRule};
use bergman_ext::weights::{clamp_max, AnyWeight, Domain, RegularizedLogWeight, SmoothPart, Weight};
use bergman_ext::Complex64;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quick() -> ModelOptions {
    ModelOptions {
        basis: None,
        check_refinement: false,
    }
}

fn disk_rule() -> QuadratureRule {
    DiskRuleSpec::default().build().unwrap().into()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Disk models shared by the property tests: flat, linear `m = 1..4`, two clamps.
fn family() -> &'static [BergmanModel] {
    static MODELS: OnceLock<Vec<BergmanModel>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let mut weights: Vec<AnyWeight> = vec![Weight::zero(Domain::Disk).into()];
        for m in 1..=4 {
            weights.push(Weight::linear_re(m as f64).into());
        }
        weights.push(clamp_max(&Weight::zero(Domain::Disk), 0.1, 10.0).unwrap().into());
        weights.push(clamp_max(&Weight::linear_re(2.0), 0.2, 5.0).unwrap().into());
        weights
            .iter()
            .map(|w| {
                let mut spec = DiskRuleSpec::default().with_breakpoints(w.kink_radii());
                spec.grading_centers = w.grading_centers();
                let rule: QuadratureRule = spec.build().unwrap().into();
                BergmanModel::build(w, 16, &rule, &quick()).unwrap()
            })
            .collect()
    })
}

fn bidisk_model() -> &'static BergmanModel {
    static MODEL: OnceLock<BergmanModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let w = Weight {
            log_terms: Vec::new(),
            smooth: SmoothPart::parse("-x1 + 0.5*y2 + 0.3*x1*x2").unwrap(),
            domain: Domain::Bidisk,
            subharmonic: true,
        };
        let rule: QuadratureRule = BidiskRuleSpec::default().build().unwrap().into();
        BergmanModel::build(&w.into(), 4, &rule, &quick()).unwrap()
    })
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| c(a, b)), n)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polar_moments_are_exact(a in 0u32..12, b in 0u32..12) {
        let rule = DiskRuleSpec::default().build().unwrap();
        let v = rule.integrate(|z| z.powu(a) * z.conj().powu(b)).unwrap();
        let exact = if a == b { PI / (a as f64 + 1.0) } else { 0.0 };
        prop_assert!((v - c(exact, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn odd_integrands_vanish(k in 0u32..6, x in -1.0f64..1.0) {
        let rule = DiskRuleSpec::default().build().unwrap();
        let v = rule.integrate(|z| c(z.re.powi(2 * k as i32 + 1) * (1.0 + x * z.im * z.im), 0.0)).unwrap();
        prop_assert!(v.norm() < 1e-12);
    }

    #[test]
    fn regularized_weight_decreases_with_epsilon(r in 0.001f64..0.99, t in 0.0f64..6.3, e in 0.01f64..0.5) {
        let z = [Complex64::from_polar(r, t), c(0.0, 0.0)];
        let big = RegularizedLogWeight::diagonal(e);
        let small = RegularizedLogWeight::diagonal(0.5 * e);
        let exact = (r * r).ln();
        prop_assert!(small.eval(&z) <= big.eval(&z) + 1e-12);
        prop_assert!(small.eval(&z) >= exact - 1e-12);
    }

    #[test]
    fn gram_invariants(idx in 0usize..7) {
        let model = &family()[idx];
        let g = model.gram();
        let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!((g - g.adjoint()).iter().all(|v| v.norm() < 1e-12 * scale));
        prop_assert!(model.min_eigenvalue() > 0.0);
        let t = model.orthonormal_coeffs();
        let id = &t * g * t.adjoint();
        for i in 0..id.nrows() {
            for j in 0..id.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((id[(i, j)] - c(e, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn kernel_inequalities(idx in 0usize..7) {
        let model = &family()[idx];
        let b0 = model.higher_kernel(0).unwrap();
        prop_assert!(model.bergman_metric_at_zero().unwrap() >= 1.0 - 1e-9);
        let mut f = 1.0;
        for k in 1..=6 {
            f *= k as f64;
            prop_assert!(model.higher_kernel(k).unwrap() >= f * f * b0 * (1.0 - 1e-9));
        }
        prop_assert!((model.kernel(&[c(0.0, 0.0)], &[c(0.0, 0.0)]).re - b0).abs() < 1e-12 * b0);
    }

    #[test]
    fn kernel_is_hermitian(idx in 0usize..7, z in complex_vec(1), w in complex_vec(1)) {
        let model = &family()[idx];
        let (z, w) = (z[0] * 0.4, w[0] * 0.4);
        let a = model.kernel(&[z], &[w]);
        let b = model.kernel(&[w], &[z]).conj();
        prop_assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn recursive_equals_direct(idx in 0usize..7, n in 1usize..7, vals in complex_vec(6)) {
        let model = &family()[idx];
        let jet = Jet::new(vals[..n].to_vec()).unwrap();
        let d = extend_jet_direct(model, &jet).unwrap();
        let r = extend_jet_recursive(model, &jet).unwrap();
        let cd = d.coeff_vector();
        let cr = r.coeff_vector();
        prop_assert!((&cd - &cr).norm() <= 1e-8 * cd.norm());
        prop_assert!(rel(d.norm_sqr, r.norm_sqr) < 1e-8);
        prop_assert!(rel(d.norm_sqr, r.breakdown_total().unwrap()) < 1e-8);
        prop_assert!(d.diagnostics.constraint_residual < 1e-8);
    }

    #[test]
    fn feasible_perturbations_do_not_decrease_norm(idx in 0usize..7, n in 1usize..5, vals in complex_vec(4), seed in 0u64..1000) {
        let model = &family()[idx];
        let jet = Jet::new(vals[..n].to_vec()).unwrap();
        let h = extend_jet_direct(model, &jet).unwrap();
        prop_assert!(h.diagnostics.stationarity_residual < 1e-8);
        let base = h.coeff_vector();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            // directions keep the first n Taylor coefficients fixed
            let mut d = DVector::from_fn(model.dim(), |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            for k in 0..n {
                d[k] = c(0.0, 0.0);
            }
            let t = 1e-3 * (1.0 + base.norm());
            let moved = &base + d * c(t, 0.0);
            prop_assert!(model.norm_sqr(&moved) >= h.norm_sqr * (1.0 - 1e-12));
        }
    }

    #[test]
    fn cross_pythagoras(f1 in complex_vec(4), f2 in complex_vec(4)) {
        let mut f2 = f2;
        f2[0] = f1[0];
        let cross = CrossData::new(f1, f2).unwrap();
        let model = bidisk_model();
        let r = extend_cross(model, &cross).unwrap();
        let (h0, h1) = decompose_cross(model, &cross).unwrap();
        let total = model.norm_sqr(&h0) + model.norm_sqr(&h1);
        prop_assert!(rel(r.norm_sqr, total) < 1e-8);
        prop_assert!(r.diagnostics.constraint_residual < 1e-8);
        prop_assert!(r.diagnostics.stationarity_residual < 1e-8);
        let b0 = model.higher_kernel(0).unwrap();
        prop_assert!(rel(model.norm_sqr(&h0), cross.a0().norm_sqr() / b0) < 1e-8 || cross.a0().norm() < 1e-12);
    }

    #[test]
    fn functionals_are_quadratic(t in 0.1f64..3.0) {
        let w: AnyWeight = Weight::zero(Domain::Bidisk).into();
        let rule = DiskRuleSpec::new(32, 64);
        let cross = CrossData::real(&[0.5, 1.0], &[0.5, -0.3, 0.2]).unwrap();
        let scaled = CrossData::real(&[0.5 * t, t], &[0.5 * t, -0.3 * t, 0.2 * t]).unwrap();
        let spec = NormSpec::new(NormKind::DerivativeOnY);
        let a = derivative_norm_on_y(&cross, &w, &spec, &rule).unwrap().value();
        let b = derivative_norm_on_y(&scaled, &w, &spec, &rule).unwrap().value();
        prop_assert!(rel(b, t * t * a) < 1e-12);
        let a = branch_l2_norm(&cross, &w, &spec, &rule).unwrap().value();
        let b = branch_l2_norm(&scaled, &w, &spec, &rule).unwrap().value();
        prop_assert!(rel(b, t * t * a) < 1e-12);
        let g = NormSpec::gamma_branch(0.5, GammaVariant::Theorem);
        let u = [c(0.0, 0.0), c(1.0, 0.5), c(0.2, 0.0)];
        let ut: Vec<Complex64> = u.iter().map(|v| v * t).collect();
        let a = gamma_branch_norm(&u, 1, &w, &g, &rule).unwrap().value();
        let b = gamma_branch_norm(&ut, 1, &w, &g, &rule).unwrap().value();
        prop_assert!(rel(b, t * t * a) < 1e-10);
    }
}

#[test]
fn higher_kernel_is_the_supremum_over_e_k() {
    let model = &family()[3];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..=3 {
        let bk = model.higher_kernel(k).unwrap();
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        let mut best = 0.0f64;
        for _ in 0..10_000 {
            let mut v = DVector::from_fn(model.dim(), |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            for j in 0..k {
                v[j] = c(0.0, 0.0);
            }
            let ratio = (v[k] * fact).norm_sqr() / model.norm_sqr(&v);
            best = best.max(ratio);
        }
        assert!(best <= bk * (1.0 + 1e-9), "k={k}: {best} > {bk}");
        // the level element attains it
        let e = model.level_element(k).unwrap();
        let attained = (e[k] * fact).norm_sqr() / model.norm_sqr(e);
        assert!(rel(attained, bk) < 1e-9);
    }
}

#[test]
fn kernel_value_grows_with_degree() {
    let w: AnyWeight = Weight::linear_re(2.0).into();
    let mut last = 0.0;
    for d in [4, 8, 12, 16] {
        let model = BergmanModel::build(&w, d, &disk_rule(), &quick()).unwrap();
        let b0 = model.higher_kernel(0).unwrap();
        assert!(b0 >= last * (1.0 - 1e-12));
        last = b0;
    }
}

#[test]
fn jet_norm_does_not_increase_with_degree() {
    let w: AnyWeight = Weight::linear_re(3.0).into();
    let jet = Jet::real(&[1.0, -0.5]).unwrap();
    let mut last = f64::INFINITY;
    for d in [2, 4, 8, 16] {
        let model = BergmanModel::build(&w, d, &disk_rule(), &quick()).unwrap();
        let n = extend_jet_direct(&model, &jet).unwrap().norm_sqr;
        assert!(n <= last * (1.0 + 1e-12));
        last = n;
    }
}

#[test]
fn reproducing_property_by_quadrature() {
    let model = &family()[2];
    let spec = DiskRuleSpec::default();
    let rule = spec.build().unwrap();
    let w = model.weight().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let z = Complex64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0 * PI));
        let kz = model.kernel_coeffs(&[z]);
        for p in [0u32, 3, 7, 14] {
            let v = rule
                .integrate(|x| x.powu(p) * model.eval(&kz, &[x]).conj() * w.density(&[x]))
                .unwrap();
            let exact = z.powu(p);
            assert!((v - exact).norm() <= 1e-5 * exact.norm().max(1e-3), "p={p} z={z}: {v} vs {exact}");
        }
    }
}

#[test]
fn gradient_rotates_with_the_weight() {
    let (m, theta) = (1.5f64, 0.7f64);
    let base: AnyWeight = Weight::linear_re(m).into();
    // φ(e^{iθ} z) = -2m (cos θ x - sin θ y)
    let smooth = format!("{}*x + {}*y", -2.0 * m * theta.cos(), 2.0 * m * theta.sin());
    let rotated: AnyWeight = Weight {
        log_terms: Vec::new(),
        smooth: SmoothPart::parse(&smooth).unwrap(),
        domain: Domain::Disk,
        subharmonic: true,
    }
    .into();
    let g = BergmanModel::build(&base, 20, &disk_rule(), &quick()).unwrap().log_kernel_gradient_at_zero().unwrap();
    let gr = BergmanModel::build(&rotated, 20, &disk_rule(), &quick()).unwrap().log_kernel_gradient_at_zero().unwrap();
    assert!(g.norm() > 0.1);
    assert!((gr - g * Complex64::from_polar(1.0, theta)).norm() < 1e-8 * g.norm());
}

#[test]
fn clamped_norm_is_dominated_by_its_lower_envelopes() {
    // ψ = max(φ + c log|z|^2, -A) dominates both pieces, so e^{-ψ} is below each density
    let (cc, a) = (0.1, 5.0);
    let base = Weight::linear_re(1.0);
    let clamped: AnyWeight = clamp_max(&base, cc, a).unwrap().into();
    let shifted: AnyWeight = Weight {
        log_terms: Weight::log(cc, ComplexPoly::parse("z").unwrap(), Domain::Disk).log_terms,
        ..base
    }
    .into();
    let mut spec = DiskRuleSpec::default().with_breakpoints(clamped.kink_radii());
    spec.grading_centers = clamped.grading_centers();
    let rule: QuadratureRule = spec.build().unwrap().into();
    let mp = BergmanModel::build(&clamped, 12, &rule, &quick()).unwrap();
    let ms = BergmanModel::build(&shifted, 12, &rule, &quick()).unwrap();
    let mf = BergmanModel::build(&Weight::zero(Domain::Disk).into(), 12, &rule, &quick()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let v = DVector::from_fn(13, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = mp.norm_sqr(&v);
        assert!(n <= ms.norm_sqr(&v) * (1.0 + 1e-10));
        assert!(n <= mf.norm_sqr(&v) * a.exp() * (1.0 + 1e-10));
    }
}

#[test]
fn holder_consistency_on_the_singular_neighborhood() {
    let w: AnyWeight = Weight::zero(Domain::Bidisk).into();
    let rule = DiskRuleSpec::default();
    let data = [
        vec![c(0.0, 0.0), c(1.0, 0.0)],
        vec![c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.5)],
        vec![c(0.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
    ];
    for u in &data {
        let vals: Vec<f64> = [0.0, 0.25, 0.5, 1.0]
            .iter()
            .map(|&g| {
                let spec = NormSpec::gamma_branch(g, GammaVariant::Theorem)
                    .with_region(Region::SingularNeighborhood { r_sing: 0.5 });
                gamma_branch_norm(u, 1, &w, &spec, &rule).unwrap().value()
            })
            .collect();
        for p in vals.windows(2) {
            assert!(rel(p[0], p[1]) < 0.2, "{vals:?}");
        }
    }
}

#[test]
fn bulk_norm_regions_add_up() {
    let w: AnyWeight = Weight::zero(Domain::Bidisk).into();
    let u = ComplexPoly::parse("z1*z2 + z1^2*z2").unwrap();
    let rule = BidiskRuleSpec::default();
    let full = log_weighted_bulk_norm(&u, &w, &NormSpec::new(NormKind::LogWeightedBulk), &rule).unwrap().value();
    let near = log_weighted_bulk_norm(
        &u,
        &w,
        &NormSpec::new(NormKind::LogWeightedBulk).with_region(Region::SingularNeighborhood { r_sing: 0.5 }),
        &rule,
    )
    .unwrap()
    .value();
    let far = log_weighted_bulk_norm(
        &u,
        &w,
        &NormSpec::new(NormKind::LogWeightedBulk).with_region(Region::ExcludingSingular { r_sing: 0.5 }),
        &rule,
    )
    .unwrap()
    .value();
    assert!(rel(near + far, full) < 1e-6, "{near} + {far} vs {full}");
}

#[test]
fn sweeps_are_reproducible_and_sorted() {
    let a = SweepConfig {
        ms: Some(vec![2.0, 1.0, 0.0]),
        check_degree: false,
        check_convergence: false,
        degree: Some(12),
        ..SweepConfig::new(Experiment::Claim1)
    };
    let b = SweepConfig {
        ms: Some(vec![0.0, 1.0, 2.0]),
        ..a.clone()
    };
    let ra = run(&a).unwrap();
    let rb = run(&b).unwrap();
    assert_eq!(ra.to_csv().unwrap(), rb.to_csv().unwrap());
    assert_eq!(ra.to_csv().unwrap(), run(&a).unwrap().to_csv().unwrap());
    let ms: Vec<f64> = ra.claim1_rows().iter().map(|r| r.m).collect();
    assert_eq!(ms, vec![0.0, 1.0, 2.0]);
}

#[test]
fn flat_weight_control_shows_no_growth() {
    // m = 0 repeated at growing degrees: the harness itself adds nothing
    let cfg = SweepConfig {
        ms: Some(vec![0.0]),
        check_degree: false,
        ..SweepConfig::new(Experiment::Claim1)
    };
    let mut values = Vec::new();
    for d in [8, 16, 24] {
        let r = run(&SweepConfig { degree: Some(d), ..cfg.clone() }).unwrap();
        values.push(r.claim1_rows()[0].ratio);
    }
    for v in &values {
        assert!((v - PI).abs() < 1e-10);
    }
}

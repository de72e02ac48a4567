use std::f64::consts::FRAC_PI_4;

use vexp_core::energy::{EnergyAssembly, Truncation};
use vexp_core::grid::{Grid, GridFunction};
use vexp_core::mountain_pass::{
    decay_study, decay_verdict, default_endpoint, positivity_check, tail_measure, verify_blowdown, verify_cone_lemma,
    verify_mp_geometry, BlowdownOutcome, ConeSet, ConeTestFunction, GeometryError, SolverConfig,
};
use vexp_core::problem::{self, ProblemInstance};
use vexp_core::sampling::seeded;

fn with_exponent(p: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ProblemInstance {
    ProblemInstance::builder("exponent-only", 1)
        .exponent(p)
        .alpha(|_| 3.5)
        .log_exponent(|_| 4.0)
        .potential(|_| 1.0)
        .nonlinearity(|_, t| t * t * t)
        .build()
        .unwrap()
}

const EPS: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];

#[test]
fn cone_lemma_for_linear_exponent() {
    let inst = with_exponent(|x| 2.0 + 0.1 * x[0]);
    let r = verify_cone_lemma(&inst, &[0.0], &EPS, 0.01, FRAC_PI_4, 401).unwrap();
    assert_eq!(r.certified_eps, Some(0.05));
    assert!(r.rows.iter().all(|row| row.applicable && row.positive_flux && row.max_on_cap && row.nodes_checked > 0));
}

#[test]
fn cone_lemma_with_small_perturbation() {
    let inst = with_exponent(|x| 2.0 + 0.1 * x[0] + 0.001 * (5.0 * x[0]).sin());
    let r = verify_cone_lemma(&inst, &[0.3], &[0.05, 0.1, 0.2, 0.5], 0.01, FRAC_PI_4, 401).unwrap();
    assert_eq!(r.certified_eps, Some(0.05));
    assert!(r.rows.iter().all(|row| row.positive_flux && row.max_on_cap));
}

#[test]
fn cone_lemma_needs_a_gradient() {
    let inst = with_exponent(|x| 3.0 - x[0] * x[0]);
    let err = verify_cone_lemma(&inst, &[0.0], &EPS, 0.01, FRAC_PI_4, 401).unwrap_err();
    assert_eq!(err, GeometryError::LemmaInapplicable { x0: vec![0.0] });
    assert!(matches!(verify_cone_lemma(&inst, &[0.5], &[], 0.01, FRAC_PI_4, 401), Err(GeometryError::InvalidCone(_))));
}

#[test]
fn cone_lemma_on_paper_exponent() {
    let inst = problem::paper_example(1).unwrap();
    let r = verify_cone_lemma(&inst, &[0.0], &EPS, 0.01, FRAC_PI_4, 401).unwrap();
    assert!(r.certified_eps.is_some());
}

#[test]
fn cone_set_membership() {
    let cone = ConeSet::new(&[0.0, 0.0], 1.0, 0.1, FRAC_PI_4, &[1.0, 0.0]).unwrap();
    assert!(cone.contains(&[0.5, 0.1]));
    assert!(!cone.contains(&[0.05, 0.0]));
    assert!(!cone.contains(&[1.5, 0.0]));
    assert!(!cone.contains(&[0.1, 0.5]));
    assert!(!cone.contains(&[-0.5, 0.0]));
    assert!(matches!(ConeSet::new(&[0.0], 0.1, 0.2, FRAC_PI_4, &[1.0]), Err(GeometryError::InvalidCone(_))));
}

#[test]
fn cone_test_function_shape() {
    let grid = Grid::centered(1, 5.0, 101).unwrap();
    let h = ConeTestFunction::new(&grid, &[1.0], 2.0).unwrap();
    let peak = grid.len() / 2 + 10;
    assert!((h.values[peak] - 2.0).abs() < 1e-12);
    assert!(h.support_nodes(&grid).all(|i| (grid.point(i)[0] - 1.0).abs() < 2.0));
    assert!(matches!(ConeTestFunction::new(&grid, &[4.0], 2.0), Err(GeometryError::ConeOutsideBox { .. })));
}

fn cubic(n: usize, radius: f64) -> EnergyAssembly {
    let grid = Grid::centered(1, radius, n).unwrap();
    EnergyAssembly::new(problem::cubic_constant_exponent(1).unwrap(), grid).unwrap()
}

#[test]
fn blowdown_crossing_of_quartic() {
    let assembly = cubic(201, 10.0);
    let grid = assembly.grid().clone();
    let h = ConeTestFunction::new(&grid, &[0.0], 2.0).unwrap().values;
    let e1 = assembly.energy(&h).unwrap();
    let e2 = assembly.energy(&h.scaled(2.0)).unwrap();
    // φ(t h) = a t² - b t⁴
    let b = (4.0 * e1 - e2) / 12.0;
    let a = e1 + b;
    let r = verify_blowdown(&assembly, &h, 200).unwrap();
    let crossing = r.crossing().unwrap();
    assert!((crossing - (a / b).sqrt()).abs() < 1e-9 * crossing, "{crossing}");
    assert!(r.samples.last().unwrap().1 < -1e3);
}

#[test]
fn no_blowdown_without_nonlinearity() {
    let grid = Grid::centered(1, 10.0, 201).unwrap();
    let inst = problem::cubic_constant_exponent(1).unwrap().with_nonlinearity(|_, _| 0.0);
    let assembly = EnergyAssembly::new(inst, grid.clone()).unwrap();
    let h = ConeTestFunction::new(&grid, &[0.0], 2.0).unwrap().values;
    let r = verify_blowdown(&assembly, &h, 60).unwrap();
    assert_eq!(r.outcome, BlowdownOutcome::NoBlowdown);
    assert!(matches!(default_endpoint(&assembly, 2.0, 1.0), Err(GeometryError::NoNegativeEndpoint { .. })));
}

#[test]
fn paper_example_blows_down() {
    let grid = Grid::centered(1, 15.0, 301).unwrap();
    let assembly = EnergyAssembly::new(problem::paper_example(1).unwrap(), grid.clone()).unwrap();
    let h = ConeTestFunction::new(&grid, &[0.0], 2.0).unwrap().values;
    let r = verify_blowdown(&assembly, &h, 200).unwrap();
    let BlowdownOutcome::Blowdown { crossing, below } = r.outcome else { panic!("{:?}", r.outcome) };
    assert!(crossing > 0.0 && below > crossing);
    let e = default_endpoint(&assembly, 2.0, 1.0).unwrap();
    assert!(assembly.energy(&e).unwrap() < 0.0);
}

#[test]
fn mountain_pass_geometry_examples() {
    let radii = [1e-3, 1e-2, 0.1, 0.5];
    let assembly = cubic(201, 10.0).truncated(Truncation::Plus);
    let e = default_endpoint(&assembly, 2.0, 1.0).unwrap();
    let r = verify_mp_geometry(&assembly, &radii, 20, Some(&e), &mut seeded(1)).unwrap();
    assert!(r.certified);
    assert!(r.rows[0].min_energy < r.rows[1].min_energy);
    assert!(r.rows[0].min_energy < 1e-5 && r.rows[0].min_energy > 0.0);

    // f = 10 t dominates ½‖u‖² at every scale
    let grid = Grid::centered(1, 10.0, 201).unwrap();
    let inst = problem::cubic_constant_exponent(1).unwrap().with_nonlinearity(|_, t| 10.0 * t);
    let bad = EnergyAssembly::new(inst, grid).unwrap().truncated(Truncation::Plus);
    let r = verify_mp_geometry(&bad, &radii, 20, Some(&e), &mut seeded(1)).unwrap();
    assert!(!r.certified);
    assert!(r.rows.iter().all(|row| row.min_energy < 0.0));
}

#[test]
fn decay_of_cubic_ground_state() {
    let inst = problem::cubic_constant_exponent(1).unwrap();
    let rows = decay_study(&inst, &[10.0, 15.0, 20.0], 0.05, Truncation::Plus, 2.0, &SolverConfig::default()).unwrap();
    let v = decay_verdict(&rows, 1e-3);
    assert!(v.passed(), "{rows:?}");
    // √2 sech tail at R/2
    for row in &rows {
        let bound = 2.0 * std::f64::consts::SQRT_2 * (-row.radius / 2.0).exp();
        assert!(row.tail.max_u < 1.5 * bound, "{row:?}");
    }
}

#[test]
fn growing_potential_decays_faster() {
    let flat = problem::cubic_constant_exponent(1).unwrap();
    let growing = ProblemInstance::builder("cubic-growing-v", 1)
        .exponent(|_| 2.0)
        .alpha(|_| 4.0)
        .log_exponent(|_| 3.0)
        .potential(|x| 1.0 + x[0] * x[0])
        .nonlinearity(|_, t| t * t * t)
        .primitive(|_, t| 0.25 * t.powi(4))
        .build()
        .unwrap();
    let config = SolverConfig::default();
    let a = decay_study(&flat, &[10.0], 0.05, Truncation::Plus, 2.0, &config).unwrap();
    let b = decay_study(&growing, &[10.0], 0.05, Truncation::Plus, 2.0, &config).unwrap();
    assert!(a[0].converged && b[0].converged);
    assert!(b[0].tail.max_u < a[0].tail.max_u);
    assert!(b[0].tail.max_grad < a[0].tail.max_grad);
}

#[test]
fn trivial_profile_has_no_tail() {
    let grid = Grid::centered(2, 5.0, 21).unwrap();
    let t = tail_measure(&grid, &GridFunction::zeros(&grid));
    assert_eq!((t.max_u, t.max_grad), (0.0, 0.0));
    let one = GridFunction::from_fn_dirichlet(&grid, |_| 1.0);
    assert!(positivity_check(&grid, &one).positive);
    let mut dip = one.into_values();
    dip[grid.len() / 2] = 0.0;
    let p = positivity_check(&grid, &dip);
    assert!(!p.positive && p.min_node == grid.len() / 2);
}

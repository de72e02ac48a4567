use vexp_core::energy::EnergyAssembly;
use vexp_core::grid::Grid;
use vexp_core::multiplicity::{
    beta_closed_form, beta_k, beta_profile, build_cone_family, verify_a1_proxy, verify_a2, BetaConfig, DiscreteBasis,
    MultiplicityError,
};
use vexp_core::problem::{self, ProblemInstance};
use vexp_core::sampling::seeded;
use vexp_core::spaces::ExponentField;

fn grid() -> Grid {
    Grid::centered(1, 5.0, 64).unwrap()
}

fn rho_grid() -> Vec<f64> {
    (0..=6).map(|k| 10f64.powi(k)).collect()
}

#[test]
fn beta_profile_is_non_increasing_and_matches_closed_form() {
    let g = grid();
    let basis = DiscreteBasis::new(&g);
    // α = p is outside the admissible ordering, so build it unchecked
    let zero = |_: &[f64], d: &mut [f64]| d.fill(0.0);
    let field = ExponentField::from_fns_unchecked(&g, |_| 2.0, Some(&zero), |_| 2.0, |_| 3.0);
    let v = vec![1.0; g.len()];
    let betas = beta_profile(&basis, &field, &v, &BetaConfig::default()).unwrap();
    assert_eq!(betas.len(), basis.len());
    assert!(betas[0] > 0.0);
    for w in betas.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
    for (k, b) in betas.iter().enumerate() {
        assert!((b - beta_closed_form(&basis, k + 1)).abs() < 1e-6, "k = {}: {b}", k + 1);
    }
}

#[test]
fn beta_rejects_out_of_range_k() {
    let g = grid();
    let basis = DiscreteBasis::new(&g);
    let field = problem::paper_example(1).unwrap().exponent_field(&g).unwrap();
    let v = vec![1.0; g.len()];
    let err = beta_k(&basis, 0, &field, &v, &BetaConfig::default()).unwrap_err();
    assert_eq!(err, MultiplicityError::KOutOfRange { k: 0, max: basis.len() });
    assert!(beta_k(&basis, basis.len() + 1, &field, &v, &BetaConfig::default()).is_err());
    assert!(beta_k(&basis, 1, &field, &v, &BetaConfig::default()).unwrap() > 0.0);
}

#[test]
fn cone_families_have_disjoint_supports() {
    let g = Grid::centered(1, 5.0, 101).unwrap();
    let one = build_cone_family(&g, 1).unwrap();
    assert!(one.centers()[0][0].abs() < 1e-12);
    let four = build_cone_family(&g, 4).unwrap();
    assert_eq!(four.len(), 4);
    assert!(four.supports_disjoint(&g));
    let err = build_cone_family(&g, 15).unwrap_err();
    assert_eq!(err, MultiplicityError::Capacity { requested: 15, max_k: 14 });
    assert!(build_cone_family(&g, 14).unwrap().supports_disjoint(&g));
}

#[test]
fn a2_examples() {
    let g = grid();
    let cubic = EnergyAssembly::new(problem::cubic_constant_exponent(1).unwrap(), g.clone()).unwrap();
    let one = build_cone_family(&g, 1).unwrap();
    let r = verify_a2(&cubic, &one, &rho_grid(), 16, &mut seeded(2)).unwrap();
    assert!(r.certified_rho.is_some());

    let two = build_cone_family(&g, 2).unwrap();
    let r = verify_a2(&cubic, &two, &rho_grid(), 16, &mut seeded(2)).unwrap();
    assert!(r.additivity_defect <= 1e-10 * r.additivity_scale.max(1.0));

    let free =
        EnergyAssembly::new(problem::cubic_constant_exponent(1).unwrap().with_nonlinearity(|_, _| 0.0), g.clone())
            .unwrap();
    let r = verify_a2(&free, &two, &rho_grid(), 16, &mut seeded(2)).unwrap();
    assert!(r.certified_rho.is_none());
    assert!(r.rows.iter().all(|&(_, phi)| phi > 0.0));
}

#[test]
fn a1_proxy_examples() {
    let g = grid();
    let basis = DiscreteBasis::new(&g);
    let config = BetaConfig::default();
    let cubic = EnergyAssembly::new(problem::cubic_constant_exponent(1).unwrap(), g.clone()).unwrap();
    let r = verify_a1_proxy(&basis, &cubic, &[1, 4, 16], 16, &config, &mut seeded(4)).unwrap();
    assert!(r.applicable && r.increasing, "{:?}", r.rows);
    assert!(r.rows.iter().all(|row| row.index_consistent && row.codim_plus + 1 == row.dim_minus));

    let free =
        EnergyAssembly::new(problem::cubic_constant_exponent(1).unwrap().with_nonlinearity(|_, _| 0.0), g.clone())
            .unwrap();
    let r = verify_a1_proxy(&basis, &free, &[1, 4, 16], 16, &config, &mut seeded(4)).unwrap();
    assert!(r.applicable && r.increasing);

    let sublinear = ProblemInstance::builder("alpha-below-p", 1)
        .exponent(|_| 3.0)
        .alpha(|_| 2.5)
        .log_exponent(|_| 4.0)
        .potential(|_| 1.0)
        .nonlinearity(|_, t| t * t * t)
        .primitive(|_, t| 0.25 * t.powi(4))
        .build()
        .unwrap();
    let assembly = EnergyAssembly::new_unchecked(sublinear, g);
    let r = verify_a1_proxy(&basis, &assembly, &[1, 4, 16], 16, &config, &mut seeded(4)).unwrap();
    assert!(!r.applicable && r.rows.is_empty());
}

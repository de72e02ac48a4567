use proptest::prelude::*;
use rand::Rng;
use vexp_core::energy::{EnergyAssembly, Truncation};
use vexp_core::grid::{Grid, GridFunction};
use vexp_core::problem::{self, ProblemInstance};
use vexp_core::sampling::{random_dirichlet, random_smooth, seeded, uniform};
use vexp_core::spaces::{holder_defect, luxemburg_norm, modular, modular_norm_witness, SpaceError};

fn grid1(n: usize) -> Grid {
    Grid::centered(1, 3.0, n).unwrap()
}

/// Random exponent `p(x) = lo + (hi - lo) (1 + sin(k x + φ)) / 2`.
fn wavy_exponent(grid: &Grid, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed ^ 0x5eed);
    let k = uniform(&mut rng, 0.2, 3.0);
    let phase = uniform(&mut rng, 0.0, 6.0);
    (0..grid.len()).map(|i| lo + (hi - lo) * 0.5 * (1.0 + (k * grid.point(i)[0] + phase).sin())).collect()
}

fn random_function(grid: &Grid, seed: u64, scale: f64) -> GridFunction {
    let mut rng = seeded(seed);
    let u =
        if seed.is_multiple_of(2) { random_smooth(grid, &mut rng, 6) } else { random_dirichlet(grid, &mut rng, 1.0) };
    u.scaled(scale)
}

fn scaled_to(grid: &Grid, u: &GridFunction, p: &[f64], norm: f64) -> GridFunction {
    u.scaled(norm / luxemburg_norm(grid, u, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unit_ball(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let grid = grid1(64);
        let u = random_function(&grid, seed, scale);
        prop_assume!(!u.is_zero());
        let p = wavy_exponent(&grid, 1.5, 3.0, seed);
        let n = luxemburg_norm(&grid, &u, &p).unwrap();
        let rho = modular(&grid, &u.scaled(1.0 / n), &p).unwrap();
        prop_assert!((rho - 1.0).abs() < 1e-9, "rho = {rho}");
        let rho_u = modular(&grid, &u, &p).unwrap();
        prop_assert_eq!(rho_u < 1.0, n < 1.0);
    }

    #[test]
    fn modular_decreases_along_the_bracket(seed in any::<u64>(), a in 0.01f64..10.0, ratio in 1.001f64..4.0) {
        let grid = grid1(48);
        let u = random_function(&grid, seed, 1.0);
        prop_assume!(!u.is_zero());
        let p = wavy_exponent(&grid, 1.2, 4.0, seed);
        let lo = modular(&grid, &u.scaled(1.0 / a), &p).unwrap();
        let hi = modular(&grid, &u.scaled(1.0 / (a * ratio)), &p).unwrap();
        prop_assert!(hi < lo);
    }

    #[test]
    fn holder_defect_is_nonnegative(seed in any::<u64>(), lo in 1.5f64..3.0, width in 0.0f64..1.5) {
        let grid = grid1(64);
        let hi = (lo + width).min(3.0);
        let p = wavy_exponent(&grid, lo, hi, seed);
        let u = random_function(&grid, seed, 2.0);
        let v = random_function(&grid, seed.wrapping_add(17), 0.5);
        prop_assume!(!u.is_zero() && !v.is_zero());
        prop_assert!(holder_defect(&grid, &u, &v, &p).unwrap() >= -1e-10);
    }

    #[test]
    fn modular_norm_inequalities(seed in any::<u64>(), log_norm in -2.302f64..2.302) {
        let grid = grid1(64);
        let p = wavy_exponent(&grid, 1.5, 3.0, seed);
        let pm = p.iter().copied().fold(f64::INFINITY, f64::min);
        let pp = p.iter().copied().fold(0.0, f64::max);
        let u = random_function(&grid, seed, 1.0);
        prop_assume!(!u.is_zero());
        let target = log_norm.exp();
        let u = scaled_to(&grid, &u, &p, target);
        let n = luxemburg_norm(&grid, &u, &p).unwrap();
        let rho = modular(&grid, &u, &p).unwrap();
        let slack = 1e-9 * rho.max(1.0);
        let (lower, upper) = if n > 1.0 { (n.powf(pm), n.powf(pp)) } else { (n.powf(pp), n.powf(pm)) };
        prop_assert!(lower - slack <= rho && rho <= upper + slack, "n = {n}, rho = {rho}");

        match modular_norm_witness(&grid, &u, &p) {
            Ok(s) => prop_assert!(s >= pm - 1e-6 && s <= pp + 1e-6, "s = {s}"),
            Err(SpaceError::WitnessUndefined) => prop_assert!((n - 1.0).abs() < 1e-9),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        }
    }

    #[test]
    fn norm_and_modular_vanish_together(seed in any::<u64>(), jump in 0.5f64..2.0) {
        let grid = grid1(64);
        let p = wavy_exponent(&grid, 1.5, 3.0, seed);
        let u = random_function(&grid, seed, 1.0);
        let w = random_function(&grid, seed.wrapping_add(3), 1.0);
        prop_assume!(!w.is_zero());
        let mut last = (f64::INFINITY, f64::INFINITY);
        for k in 1..=20 {
            let dk = w.scaled(0.5f64.powi(k));
            let uk = u.add_scaled(1.0, &dk);
            let diff: Vec<f64> = uk.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
            let pair = (luxemburg_norm(&grid, &diff, &p).unwrap(), modular(&grid, &diff, &p).unwrap());
            prop_assert!(pair.0 < last.0 && pair.1 < last.1);
            last = pair;
        }
        prop_assert!(last.0 < 1e-3 && last.1 < 1e-6);

        let fixed = w.scaled(jump / luxemburg_norm(&grid, &w, &p).unwrap());
        for k in 1..=12 {
            let uk = u.add_scaled(1.0, &fixed.scaled(1.0 + 0.5f64.powi(k)));
            let diff: Vec<f64> = uk.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
            prop_assert!(luxemburg_norm(&grid, &diff, &p).unwrap() >= jump);
            prop_assert!(modular(&grid, &diff, &p).unwrap() >= jump.powf(3.0).min(jump.powf(1.5)) * (1.0 - 1e-9));
        }
    }
}

fn variable_cubic() -> ProblemInstance {
    ProblemInstance::builder("variable-cubic", 1)
        .exponent(|x| 2.2 + 0.2 * (0.7 * x[0]).sin())
        .alpha(|x| 3.2 + 0.2 * (0.7 * x[0]).sin())
        .log_exponent(|_| 3.0)
        .potential(|x| 1.0 + 0.1 * x[0] * x[0])
        .nonlinearity(|_, t| t * t * t)
        .primitive(|_, t| 0.25 * t.powi(4))
        .build()
        .unwrap()
}

fn instances() -> Vec<(&'static str, EnergyAssembly)> {
    let grid = Grid::centered(1, 4.0, 32).unwrap();
    let make = |i: ProblemInstance| EnergyAssembly::new(i, grid.clone()).unwrap();
    vec![
        ("paper-example", make(problem::paper_example(1).unwrap())),
        ("paper-example plus", make(problem::paper_example(1).unwrap()).truncated(Truncation::Plus)),
        ("pure-power", make(problem::pure_power(1).unwrap())),
        ("cubic", make(problem::cubic_constant_exponent(1).unwrap())),
        ("variable cubic", make(variable_cubic())),
    ]
}

/// `max |g - g_fd| / max |g_fd|` over interior nodes, step `1e-6`.
fn fd_error(assembly: &EnergyAssembly, u: &GridFunction) -> f64 {
    let grid = assembly.grid();
    let g = assembly.gradient(u).unwrap();
    let step = 1e-6;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in grid.interior_nodes() {
        let mut up = u.clone().into_values();
        let mut dn = up.clone();
        up[i] += step;
        dn[i] -= step;
        let fd = (assembly.energy(&up).unwrap() - assembly.energy(&dn).unwrap()) / (2.0 * step);
        err = err.max((g[i] - fd).abs());
        scale = scale.max(fd.abs());
    }
    err / scale
}

#[test]
fn gradient_matches_central_differences() {
    for (k, (name, assembly)) in instances().iter().enumerate() {
        let mut rng = seeded(100 + k as u64);
        let u = random_smooth(assembly.grid(), &mut rng, 5).scaled(2.0);
        let err = fd_error(assembly, &u);
        assert!(err < 1e-6, "{name}: relative error {err:e}");
    }
}

#[test]
fn pairing_is_the_ray_derivative() {
    for (name, assembly) in instances() {
        let mut rng = seeded(7);
        let u = random_smooth(assembly.grid(), &mut rng, 4);
        let v = random_smooth(assembly.grid(), &mut rng, 4);
        let g = assembly.gradient(&u).unwrap();
        let dt = 1e-5;
        let d = (assembly.energy(&u.scaled(1.0 + dt)).unwrap() - assembly.energy(&u.scaled(1.0 - dt)).unwrap())
            / (2.0 * dt);
        assert!((assembly.pairing(&g, &u) - d).abs() < 1e-8 * d.abs().max(1.0), "{name}");
        assert!((assembly.pairing(&u, &v) - assembly.pairing(&v, &u)).abs() < 1e-14);
        assert_eq!(assembly.pairing(&g, &GridFunction::zeros(assembly.grid())), 0.0);
    }
}

#[test]
fn strict_monotonicity_on_random_pairs() {
    for (name, assembly) in instances() {
        let mut rng = seeded(11);
        for _ in 0..100 {
            let u = random_dirichlet(assembly.grid(), &mut rng, 3.0);
            let v = random_smooth(assembly.grid(), &mut rng, 6).scaled(rng.random_range(0.1..5.0));
            let m = assembly.monotonicity_check(&u, &v).unwrap();
            assert!(m > 0.0, "{name}: {m}");
        }
        let u = random_dirichlet(assembly.grid(), &mut rng, 1.0);
        assert_eq!(assembly.monotonicity_check(&u, &u).unwrap(), 0.0);
    }
}

#[test]
fn energy_is_even_and_vanishes_at_zero() {
    let grid = Grid::centered(1, 6.0, 61).unwrap();
    for name in problem::BUILTIN_NAMES {
        let assembly = EnergyAssembly::new(problem::builtin(name, 1).unwrap(), grid.clone()).unwrap();
        assert_eq!(assembly.energy(&GridFunction::zeros(&grid)).unwrap(), 0.0);
        let mut rng = seeded(5);
        for _ in 0..20 {
            let u = random_smooth(&grid, &mut rng, 6).scaled(3.0);
            let a = assembly.energy(&u).unwrap();
            let b = assembly.energy(&u.negated()).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn grid_quadrature_invariants() {
    let mut rng = seeded(3);
    for dim in [1, 2] {
        for _ in 0..20 {
            let lo = uniform(&mut rng, -5.0, 0.0);
            let hi = uniform(&mut rng, 0.5, 5.0);
            let n = rng.random_range(2..40);
            let grid = Grid::new(dim, lo, hi, n).unwrap();
            let total: f64 = vexp_core::grid::compensated_sum(grid.weights().iter().copied());
            assert!((total - grid.measure()).abs() <= 1e-12 * grid.measure());
            let (a, b, c) = (uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0));
            let affine = GridFunction::from_fn(&grid, |x| a + b * x[0] + if dim == 2 { c * x[1] } else { 0.0 });
            let mut g = [0.0; 2];
            for cell in 0..grid.cell_count() {
                grid.gradient_on_cell(&affine, cell, &mut g);
                assert!((g[0] - b).abs() < 1e-10);
                if dim == 2 {
                    assert!((g[1] - c).abs() < 1e-10);
                }
            }
        }
    }
}

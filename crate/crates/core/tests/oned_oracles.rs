use lrpde::oned::{analytic_solution, snapshot_rank, Fem1D};
use proptest::prelude::*;

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper.first().copied().unwrap_or(0.0) / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    let mut x = d.clone();
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn tridiagonal_fem(d: usize, cells: usize, theta: f64, y: &[f64]) -> Vec<f64> {
    let n_cells = d * cells;
    let h = 1.0 / n_cells as f64;
    let k: Vec<f64> = (0..n_cells).map(|c| (1.0 - theta * y[c / cells]) / h).collect();
    let n = n_cells - 1;
    let diag: Vec<f64> = (0..n).map(|i| k[i] + k[i + 1]).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| -k[i + 1]).collect();
    thomas(&off, &diag, &off, &vec![h; n])
}

#[test]
fn single_interval_is_a_parabola() {
    let sol = analytic_solution(1, 0.5, &[0.4], 1.0).unwrap();
    let a = 1.0 - 0.5 * 0.4;
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        assert!((sol.eval(x) - x * (1.0 - x) / (2.0 * a)).abs() < 1e-15);
    }
}

#[test]
fn fem_matches_independent_tridiagonal_solve() {
    let y = [0.3, -0.8, 0.5, 0.9];
    let fem = Fem1D::new(4, 6).unwrap();
    let uh = fem.solve(0.5, &y, 1.0).unwrap();
    let oracle = tridiagonal_fem(4, 6, 0.5, &y);
    for (a, b) in uh.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn snapshot_rank_is_at_most_two_d_minus_one() {
    for d in 1..=5 {
        let study = snapshot_rank(d, 0.5, 40, 3, 6).unwrap();
        assert!(study.nodal_mismatch < 1e-12);
        let rank = study.sigma.iter().filter(|&&s| s > 1e-10 * study.sigma[0]).count();
        assert!(rank < 2 * d, "d = {d}: rank {rank}");
    }
}

#[test]
fn ellipticity_violation_is_rejected() {
    assert!(analytic_solution(2, 1.0, &[1.0, 0.0], 1.0).is_err());
    assert!(analytic_solution(2, 0.5, &[0.0], 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_solution_is_continuous_with_continuous_flux(
        y in prop::collection::vec(-1.0f64..1.0, 1..7),
        f in 0.1f64..5.0,
    ) {
        let sol = analytic_solution(y.len(), 0.5, &y, f).unwrap();
        let (jump, flux) = sol.continuity_defects();
        prop_assert!(jump < 1e-14 && flux < 1e-13);
        prop_assert!(sol.eval(0.0).abs() < 1e-15);
        prop_assert!(sol.eval(1.0).abs() < 1e-14);
        for (c, a) in sol.coefficients.iter().zip(&sol.diffusion) {
            prop_assert!((-a * c[2] - f).abs() < 1e-13 * f);
        }
    }

    #[test]
    fn fem_is_nodally_exact(y in prop::collection::vec(-1.0f64..1.0, 1..5), cells in 1usize..6) {
        let d = y.len();
        prop_assume!(d * cells >= 2);
        let fem = Fem1D::new(d, cells).unwrap();
        let uh = fem.solve(0.5, &y, 1.0).unwrap();
        let sol = analytic_solution(d, 0.5, &y, 1.0).unwrap();
        for (x, u) in fem.interior_nodes().iter().zip(&uh) {
            prop_assert!((sol.eval(*x) - u).abs() < 1e-13);
        }
    }
}

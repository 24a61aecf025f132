use lrpde::legendre::*;
use proptest::prelude::*;

/// Gauss–Legendre rule for the uniform probability measure on `[-1,1]`,
/// from Newton iteration on the classical recurrence.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

#[test]
fn basis_is_orthonormal_under_quadrature() {
    let rule = gauss_legendre(24);
    assert!((rule.iter().map(|q| q.1).sum::<f64>() - 1.0).abs() < 1e-14);
    for m in 0..=15 {
        for n in 0..=15 {
            let s: f64 = rule.iter().map(|&(x, w)| w * legendre(m, x) * legendre(n, x)).sum();
            let expect = if m == n { 1.0 } else { 0.0 };
            assert!((s - expect).abs() < 1e-12, "m={m} n={n}: {s}");
        }
    }
}

#[test]
fn multiplication_entries_match_quadrature() {
    let rule = gauss_legendre(12);
    let set = MultiIndexSet::total_degree(2, 6).unwrap();
    for axis in 0..2 {
        let mat = multiplication_matrix(axis, &set).unwrap();
        for (a, nu) in set.iter().enumerate() {
            for (b, mu) in set.iter().enumerate() {
                let mut s = 0.0;
                for &(x0, w0) in &rule {
                    for &(x1, w1) in &rule {
                        let y = [x0, x1];
                        s += w0 * w1 * y[axis] * eval_tensor_legendre(nu, &y) * eval_tensor_legendre(mu, &y);
                    }
                }
                assert!((s - mat.entry(a, b)).abs() < 1e-13, "axis {axis} ({a},{b}): {s}");
            }
        }
    }
}

#[test]
fn large_index_set_counts() {
    assert_eq!(n_dk(4, 15), Some(3876));
    assert_eq!(n_dk(16, 5), Some(20349));
    assert_eq!(MultiIndexSet::total_degree(16, 5).unwrap().len(), 20349);
    assert_eq!(n_dk(4, 11), Some(1365));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn index_sets_are_downward_closed(d in 1usize..6, degree in 0usize..7) {
        let set = MultiIndexSet::total_degree(d, degree).unwrap();
        prop_assert_eq!(set.len() as u128, n_dk(d, degree).unwrap());
        prop_assert_eq!(set.index(0).iter().sum::<u32>(), 0);
        let mut last = 0;
        for (k, nu) in set.iter().enumerate() {
            let t: u32 = nu.iter().sum();
            prop_assert!(t >= last);
            last = t;
            prop_assert_eq!(set.position(nu), Some(k));
            for i in 0..d {
                if nu[i] > 0 {
                    let mut down = nu.to_vec();
                    down[i] -= 1;
                    prop_assert!(set.position(&down).is_some());
                }
            }
        }
    }

    #[test]
    fn basis_values_match_tensor_products(y in proptest::collection::vec(-1.0f64..=1.0, 3)) {
        let set = MultiIndexSet::total_degree(3, 4).unwrap();
        let b = set.evaluate_basis(&y).unwrap();
        for (k, nu) in set.iter().enumerate() {
            prop_assert!((b[k] - eval_tensor_legendre(nu, &y)).abs() < 1e-13);
        }
    }

    #[test]
    fn multiplication_is_exact_below_top_degree(x in -1.0f64..=1.0, n in 0usize..8) {
        // y L_n = β_{n-1} L_{n-1} + β_n L_{n+1}
        let lhs = x * legendre(n, x);
        let mut rhs = beta(n) * legendre(n + 1, x);
        if n > 0 {
            rhs += beta(n - 1) * legendre(n - 1, x);
        }
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}

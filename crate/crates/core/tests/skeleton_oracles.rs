use faer::Mat;
use lrpde::fem::Discretization;
use lrpde::mesh::{build_mesh, GeometrySpec};
use lrpde::neumann::{iterate, sample_points, ProblemSetup};
use lrpde::skeleton::{SkeletonSetup, SpanGrowth};

fn symmetric(refine: u32) -> (Discretization, SkeletonSetup) {
    let disc = Discretization::new(build_mesh(&GeometrySpec::checkerboard(2, refine, 0.3)).unwrap()).unwrap();
    let sk = SkeletonSetup::new(&disc, 0.5, true).unwrap();
    (disc, sk)
}

fn quad(m: &Mat<f64>, v: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..w.len() {
            s += v[i] * m[(i, j)] * w[j];
        }
    }
    s
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    sample_points(n, 1, seed, false).pop().unwrap()
}

#[test]
fn steklov_operators_are_reflection_conjugate() {
    let (_, sk) = symmetric(2);
    let n = sk.trace_dim();
    let s1 = sk.steklov_matrix(1).unwrap();
    for seed in 0..5 {
        let v = random_vec(n, seed);
        let w = random_vec(n, seed + 100);
        let scale = quad(s1, &v, &v).abs().max(1.0);
        let xv = sk.reflect_trace(0, &v);
        let xw = sk.reflect_trace(0, &w);
        let yv = sk.reflect_trace(1, &v);
        let yw = sk.reflect_trace(1, &w);
        let xyv = sk.reflect_trace(1, &xv);
        let xyw = sk.reflect_trace(1, &xw);
        let s2 = quad(sk.steklov_matrix(2).unwrap(), &v, &w);
        let s3 = quad(sk.steklov_matrix(3).unwrap(), &v, &w);
        let s4 = quad(sk.steklov_matrix(4).unwrap(), &v, &w);
        assert!((s2 - quad(s1, &xv, &xw)).abs() < 1e-12 * scale);
        assert!((s3 - quad(s1, &yv, &yw)).abs() < 1e-12 * scale);
        assert!((s4 - quad(s1, &xyv, &xyw)).abs() < 1e-12 * scale);
    }
}

#[test]
fn steklov_energies_sum_to_extension_energy() {
    let (disc, sk) = symmetric(2);
    for seed in 0..5 {
        let w = random_vec(sk.trace_dim(), seed);
        let e = sk.harmonic_extension(&w).unwrap();
        let energy = disc.abar.quadratic_form(&e);
        let parts: f64 = (1..=4).map(|i| quad(sk.steklov_matrix(i).unwrap(), &w, &w)).sum();
        assert!((energy - parts).abs() < 1e-11 * energy);
        for i in 1..=4 {
            assert!(quad(sk.steklov_matrix(i).unwrap(), &w, &w) >= -1e-14 * energy);
        }
    }
}

#[test]
fn harmonic_extension_minimizes_energy() {
    let (disc, sk) = symmetric(2);
    let w = random_vec(sk.trace_dim(), 7);
    let e = sk.harmonic_extension(&w).unwrap();
    assert_eq!(sk.trace_of(&e), w);
    let base = disc.abar.quadratic_form(&e);
    for seed in 0..10 {
        let mut z = random_vec(e.len(), 50 + seed);
        for &i in &sk.skeleton {
            z[i] = 0.0;
        }
        let other: Vec<f64> = e.iter().zip(&z).map(|(a, b)| a + 0.1 * b).collect();
        assert!(disc.abar.quadratic_form(&other) >= base);
    }
}

#[test]
fn harmonic_extension_commutes_with_reflections() {
    let (_, sk) = symmetric(2);
    let w = random_vec(sk.trace_dim(), 3);
    let e = sk.harmonic_extension(&w).unwrap();
    for axis in 0..2 {
        let lhs = sk.harmonic_extension(&sk.reflect_trace(axis, &w)).unwrap();
        let rhs = sk.reflect_full(axis, &e);
        let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-13, "axis {axis}: {err}");
    }
}

#[test]
fn skeleton_load_is_trace_of_mean_solution() {
    let (disc, sk) = symmetric(2);
    let load = disc.load(1.0);
    let g = disc.abar_factor.solve(&load).unwrap();
    let gg = sk.g_gamma(&load).unwrap();
    let t = sk.trace_of(&g);
    let err = gg.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-14);
}

#[test]
fn identities_hold_on_symmetric_mesh() {
    let (_, sk) = symmetric(3);
    let rep = sk.verify_lemmas(5, 1).unwrap();
    assert!(rep.failures(1e-10).is_empty(), "{:?}", rep.failures(1e-10));
    assert!(rep.checks.len() >= 18);
}

#[test]
fn span_growth_is_linear_and_enumerations_agree() {
    let (disc, sk) = symmetric(2);
    let g = sk.g_gamma(&disc.load(1.0)).unwrap();
    let pruned = sk.span_growth(&g, 5).unwrap();
    let full = sk.span_growth_full(&g, 5).unwrap();
    assert_eq!(pruned.dims, full.dims);
    assert!(pruned.within_bounds());
    assert_eq!(pruned.dims.len(), 6);
    assert_eq!(SpanGrowth::bound(3), 25);
    let mut buf = Vec::new();
    pruned.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("k,dim,bound_8k1\n0,1,1\n"));
}

#[test]
fn interior_parts_have_small_rank() {
    let (disc, sk) = symmetric(2);
    let setup = ProblemSetup::subdomain_indicators(disc, 0.5, 1.0, 6).unwrap();
    let (u, _) = iterate(&setup, 3, 1e-15).unwrap();
    let split = sk.skeleton_rank_split(&u, 1e-10).unwrap();
    assert!(split.trace_rank <= 8 * 3 + 1);
    assert!(split.interior_ranks.iter().all(|&r| r <= 1));
}

//! Piecewise constant diffusion on `]0,1[` split into `d` equal subintervals,
//! and the rank-one proportional perturbation case.
//!
//! On `D_i` the coefficient is `1 − θ y_i`; with constant `f` the solution is
//! quadratic on each subinterval, so `rank(u) ≤ 2d − 1`.

use std::io::Write;

use faer::Mat;

use crate::error::{Error, Result};
use crate::fem::{cholesky, CholeskyFactor, Discretization, SparseSymOperator};
use crate::legendre::evaluate_expansion;
use crate::lowrank::{singular_values_in_metric, LowRankPair};
use crate::mesh::{build_interval_mesh, IntervalMesh};
use crate::neumann::{iterate_with, sample_points, IterationOptions, IterationTrace, ProblemSetup};

/// Exact solution `u = c₀ + c₁x + c₂x²/2` on each subinterval.
#[derive(Clone, Debug)]
pub struct AnalyticSolution1D {
    pub breakpoints: Vec<f64>,
    pub coefficients: Vec<[f64; 3]>,
    pub diffusion: Vec<f64>,
}

impl AnalyticSolution1D {
    fn piece(&self, x: f64) -> usize {
        let d = self.coefficients.len();
        self.breakpoints[1..d].iter().take_while(|&&b| x >= b).count()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.coefficients[self.piece(x)];
        c0 + c1 * x + 0.5 * c2 * x * x
    }

    /// Value and flux `a u′` from the left and right of each interior breakpoint.
    pub fn continuity_defects(&self) -> (f64, f64) {
        let mut jump = 0.0f64;
        let mut flux_jump = 0.0f64;
        for i in 1..self.coefficients.len() {
            let x = self.breakpoints[i];
            let value = |c: [f64; 3]| c[0] + c[1] * x + 0.5 * c[2] * x * x;
            let slope = |c: [f64; 3]| c[1] + c[2] * x;
            let (l, r) = (self.coefficients[i - 1], self.coefficients[i]);
            jump = jump.max((value(l) - value(r)).abs());
            flux_jump = flux_jump.max((self.diffusion[i - 1] * slope(l) - self.diffusion[i] * slope(r)).abs());
        }
        (jump, flux_jump)
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot1D {
    pub y: Vec<f64>,
    pub nodal: Vec<f64>,
    pub analytic: AnalyticSolution1D,
}

fn diffusion(theta: f64, y: &[f64]) -> Result<Vec<f64>> {
    if let Some(k) = y.iter().position(|&yi| !(theta * yi.abs() < 1.0)) {
        return Err(Error::EllipticityViolation(format!(
            "theta * |y_{}| = {} is not below one",
            k + 1,
            theta * y[k].abs()
        )));
    }
    Ok(y.iter().map(|&yi| 1.0 - theta * yi).collect())
}

/// Solves `−((1 − θ y_i) u′)′ = f`, `u(0) = u(1) = 0` by double integration.
pub fn analytic_solution(d: usize, theta: f64, y: &[f64], f: f64) -> Result<AnalyticSolution1D> {
    if d == 0 || y.len() != d {
        return Err(Error::DimensionMismatch { expected: d.max(1), got: y.len() });
    }
    let a = diffusion(theta, y)?;
    let x: Vec<f64> = (0..=d).map(|i| i as f64 / d as f64).collect();
    let num: f64 = (1..=d).map(|i| (x[i] * x[i] - x[i - 1] * x[i - 1]) / (2.0 * a[i - 1])).sum();
    let den: f64 = (1..=d).map(|i| (x[i] - x[i - 1]) / a[i - 1]).sum();
    let c = num / den;
    let mut coefficients = Vec::with_capacity(d);
    let mut left = 0.0;
    for i in 0..d {
        let c2 = -f / a[i];
        let c1 = f * c / a[i];
        let c0 = left - c1 * x[i] - 0.5 * c2 * x[i] * x[i];
        coefficients.push([c0, c1, c2]);
        left = c0 + c1 * x[i + 1] + 0.5 * c2 * x[i + 1] * x[i + 1];
    }
    Ok(AnalyticSolution1D { breakpoints: x, coefficients, diffusion: a })
}

/// P1 elements on an interval mesh with Dirichlet ends removed.
#[derive(Clone, Debug)]
pub struct Fem1D {
    pub mesh: IntervalMesh,
    pub laplacian: SparseSymOperator,
    pub factor: CholeskyFactor,
}

impl Fem1D {
    pub fn new(d: usize, cells_per_subinterval: usize) -> Result<Self> {
        let mesh = build_interval_mesh(d, cells_per_subinterval)?;
        let laplacian = Self::stiffness_on(&mesh, &vec![1.0; d])?;
        let factor = cholesky(&laplacian)?;
        Ok(Self { mesh, laplacian, factor })
    }

    fn stiffness_on(mesh: &IntervalMesh, weights: &[f64]) -> Result<SparseSymOperator> {
        let n = mesh.nodes.len() - 2;
        let mut trip = Vec::with_capacity(3 * mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let k = weights[mesh.subdomain_of_cell[c]] / (mesh.nodes[c + 1] - mesh.nodes[c]);
            let (l, r) = (c.checked_sub(1), if c < n { Some(c) } else { None });
            if let Some(l) = l {
                trip.push((l, l, k));
            }
            if let Some(r) = r {
                trip.push((r, r, k));
            }
            if let (Some(l), Some(r)) = (l, r) {
                trip.push((r, l, -k));
            }
        }
        SparseSymOperator::from_sym_triplets(n, &trip)
    }

    pub fn num_free(&self) -> usize {
        self.mesh.nodes.len() - 2
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.mesh.nodes[1..self.mesh.nodes.len() - 1]
    }

    pub fn load(&self, f: f64) -> Vec<f64> {
        let x = &self.mesh.nodes;
        (1..x.len() - 1).map(|i| 0.5 * f * (x[i + 1] - x[i - 1])).collect()
    }

    pub fn solve(&self, theta: f64, y: &[f64], f: f64) -> Result<Vec<f64>> {
        if y.len() != self.mesh.d {
            return Err(Error::DimensionMismatch { expected: self.mesh.d, got: y.len() });
        }
        let a = diffusion(theta, y)?;
        cholesky(&Self::stiffness_on(&self.mesh, &a)?)?.solve(&self.load(f))
    }
}

pub fn solve_1d_analytic(fem: &Fem1D, theta: f64, y: &[f64], f: f64) -> Result<Snapshot1D> {
    let analytic = analytic_solution(fem.mesh.d, theta, y, f)?;
    let nodal = fem.interior_nodes().iter().map(|&x| analytic.eval(x)).collect();
    Ok(Snapshot1D { y: y.to_vec(), nodal, analytic })
}

/// Parameter samples for snapshot matrices: all corners first when `d ≤ 4`
/// and they fit, then uniform points.
pub fn snapshot_parameters(d: usize, n_samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let corners = if d <= 4 && (1usize << d) <= n_samples { 1usize << d } else { 0 };
    let mut pts = sample_points(d, 0, seed, corners > 0);
    pts.extend(sample_points(d, n_samples - corners, seed, false));
    pts
}

#[derive(Clone, Debug)]
pub struct SnapshotStudy {
    pub sigma: Vec<f64>,
    /// Largest nodal difference between the analytic and the FEM solution.
    pub nodal_mismatch: f64,
}

/// Singular values in the `H¹₀` metric of `n_samples` nodal snapshots.
pub fn snapshot_rank(d: usize, theta: f64, n_samples: usize, seed: u64, cells_per_subinterval: usize) -> Result<SnapshotStudy> {
    if n_samples < 2 * d {
        return Err(Error::InvalidArgument(format!("need at least {} samples, got {n_samples}", 2 * d)));
    }
    let fem = Fem1D::new(d, cells_per_subinterval)?;
    let params = snapshot_parameters(d, n_samples, seed);
    let m = fem.num_free();
    let mut v = Mat::zeros(m, params.len());
    let mut mismatch = 0.0f64;
    for (c, y) in params.iter().enumerate() {
        let snap = solve_1d_analytic(&fem, theta, y, 1.0)?;
        let uh = fem.solve(theta, y, 1.0)?;
        for i in 0..m {
            v[(i, c)] = snap.nodal[i];
            mismatch = mismatch.max((snap.nodal[i] - uh[i]).abs());
        }
    }
    let pair = LowRankPair::new(v, Mat::identity(params.len(), params.len()))?;
    Ok(SnapshotStudy { sigma: singular_values_in_metric(&pair, &fem.factor)?, nodal_mismatch: mismatch })
}

pub fn write_oned_csv<W: Write>(w: W, sigma: &[f64]) -> Result<()> {
    crate::lowrank::write_sigma_csv(w, sigma)
}

#[derive(Clone, Debug)]
pub struct ProportionalCheck {
    pub setup: ProblemSetup,
    pub pair: LowRankPair,
    pub trace: IterationTrace,
    pub sigma: Vec<f64>,
}

impl ProportionalCheck {
    /// `⟨u(y), g⟩_Ā / ‖g‖²_Ā`, which is `(1 − c·y)⁻¹` for the exact solution.
    pub fn parametric_factor(&self, y: &[f64]) -> Result<f64> {
        let u = evaluate_expansion(&self.pair, &self.setup.set, y)?;
        let ag = self.setup.disc.abar.mul_vec(&self.setup.g);
        let num: f64 = u.iter().zip(&ag).map(|(a, b)| a * b).sum();
        let den: f64 = self.setup.g.iter().zip(&ag).map(|(a, b)| a * b).sum();
        Ok(num / den)
    }
}

/// Runs the iteration with `A_i = c_i Ā` until the step difference drops
/// below `1e−14` or `k_max` is reached.
pub fn proportional_rank_check(
    disc: Discretization,
    c: &[f64],
    f: f64,
    degree: usize,
    k_max: usize,
) -> Result<ProportionalCheck> {
    let setup = ProblemSetup::proportional(disc, c, f, degree)?;
    let opts = IterationOptions { stop_tol: Some(1e-14), ..IterationOptions::default() };
    let (pair, trace) = iterate_with(&setup, k_max, opts, |_, _| Ok(()))?;
    let sigma = singular_values_in_metric(&pair, setup.factor())?;
    Ok(ProportionalCheck { setup, pair, trace, sigma })
}

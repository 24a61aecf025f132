//! Truncated Neumann iteration in the Legendre coefficient space.
//!
//! One step maps `u_k = V Φᵀ` to
//! `ũ_{k+1} = g e₀ᵀ + Σ_i (Ā⁻¹A_i V)(M_i Φ)ᵀ`, followed by SVD truncation in
//! the `Ā` metric. With zero tolerance and `k < J` the iterate is the exact
//! Taylor partial sum `Σ_{|ν|≤k} t_ν y^ν` written in the Legendre basis.

use std::collections::HashMap;
use std::time::Instant;

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{CholeskyFactor, Discretization, SparseSymOperator};
use crate::legendre::{
    evaluate_expansion, monomial_to_legendre, multiplication_matrices, n_dk, MultiIndexSet, MultiplicationMatrix,
    DEFAULT_INDEX_CAP,
};
use crate::lowrank::{add, norm_in_metric, numerical_rank, product_svd_with, truncate_svd, LowRankPair, TruncationMode};

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    /// `ψ_i = θ χ_{D_i}`.
    SubdomainIndicators { theta: f64 },
    /// `ψ_i = c_i ā`, so `A_i = c_i Ā`.
    Proportional { c: Vec<f64> },
}

/// Discretized parametric problem `(Ā − Σ y_i A_i) u = f` together with the
/// Legendre index set and multiplication matrices.
#[derive(Clone, Debug)]
pub struct ProblemSetup {
    pub disc: Discretization,
    pub kind: ProblemKind,
    pub operators: Vec<SparseSymOperator>,
    pub load: Vec<f64>,
    pub g: Vec<f64>,
    pub set: MultiIndexSet,
    pub mults: Vec<MultiplicationMatrix>,
    /// Contraction factor of `y ↦ Σ y_i Ā⁻¹A_i` in the `Ā` norm.
    pub rho: f64,
}

impl ProblemSetup {
    pub fn subdomain_indicators(disc: Discretization, theta: f64, f: f64, degree: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::EllipticityViolation(format!("theta = {theta} must lie in (0, 1)")));
        }
        let d = disc.num_subdomains();
        let operators = (0..d)
            .map(|i| {
                let mut w = vec![0.0; d];
                w[i] = theta;
                disc.stiffness(&w)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(disc, ProblemKind::SubdomainIndicators { theta }, operators, f, degree, theta)
    }

    pub fn proportional(disc: Discretization, c: &[f64], f: f64, degree: usize) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidArgument("at least one coefficient is required".into()));
        }
        let total: f64 = c.iter().map(|x| x.abs()).sum();
        if !(total < 1.0) {
            return Err(Error::EllipticityViolation(format!("sum of |c_i| = {total} is not below one")));
        }
        let operators = c.iter().map(|&ci| disc.abar.scaled(ci)).collect();
        Self::assemble(disc, ProblemKind::Proportional { c: c.to_vec() }, operators, f, degree, total)
    }

    fn assemble(
        disc: Discretization,
        kind: ProblemKind,
        operators: Vec<SparseSymOperator>,
        f: f64,
        degree: usize,
        rho: f64,
    ) -> Result<Self> {
        let set = MultiIndexSet::total_degree(operators.len(), degree)?;
        let mults = multiplication_matrices(&set);
        let load = disc.load(f);
        let g = disc.abar_factor.solve(&load)?;
        Ok(Self { disc, kind, operators, load, g, set, mults, rho })
    }

    pub fn d(&self) -> usize {
        self.operators.len()
    }

    pub fn num_free(&self) -> usize {
        self.disc.num_free()
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.disc.abar_factor
    }

    /// `Σ y_i A_i`.
    pub fn perturbation(&self, y: &[f64]) -> Result<SparseSymOperator> {
        self.check_len(y)?;
        let zero = self.disc.abar.scaled(0.0);
        let terms: Vec<(f64, &SparseSymOperator)> = y.iter().copied().zip(&self.operators).collect();
        zero.plus_combination(&terms)
    }

    /// Galerkin solution at a fixed parameter.
    pub fn direct_solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        match &self.kind {
            ProblemKind::SubdomainIndicators { theta } => {
                if let Some(k) = y.iter().position(|&yi| !(theta * yi.abs() < 1.0)) {
                    return Err(Error::EllipticityViolation(format!(
                        "theta * |y_{}| = {} is not below one",
                        k + 1,
                        theta * y[k].abs()
                    )));
                }
            }
            ProblemKind::Proportional { c } => {
                let s: f64 = c.iter().zip(y).map(|(a, b)| a * b).sum();
                if !(s.abs() < 1.0) {
                    return Err(Error::EllipticityViolation(format!("|c·y| = {} is not below one", s.abs())));
                }
            }
        }
        let terms: Vec<(f64, &SparseSymOperator)> = y.iter().map(|&yi| -yi).zip(&self.operators).collect();
        let op = self.disc.abar.plus_combination(&terms)?;
        self.disc.factor(&op)?.solve(&self.load)
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: y.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IterationOptions {
    pub eps: f64,
    pub mode: TruncationMode,
    /// Relative cutoff for the reported numerical rank.
    pub rank_cutoff: f64,
    /// Stop once discarded tail plus step difference drops below this.
    pub stop_tol: Option<f64>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self { eps: 1e-15, mode: TruncationMode::Absolute, rank_cutoff: 1e-10, stop_tol: None }
    }
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: usize,
    pub rank_before: usize,
    pub rank_after: usize,
    pub numerical_rank: usize,
    /// Full singular value sequence before truncation.
    pub singular_values: Vec<f64>,
    pub discarded_tail: f64,
    pub step_difference: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct IterationTrace {
    pub steps: Vec<StepRecord>,
    pub converged_at: Option<usize>,
}

impl IterationTrace {
    pub fn ranks(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.numerical_rank).collect()
    }
}

/// Stateful driver exposing each iterate in turn.
pub struct NeumannIteration<'a> {
    setup: &'a ProblemSetup,
    opts: IterationOptions,
    g_metric: Mat<f64>,
    current: LowRankPair,
    trace: IterationTrace,
}

impl<'a> NeumannIteration<'a> {
    /// Starts from `u₀ = g ⊗ e₀`.
    pub fn new(setup: &'a ProblemSetup, opts: IterationOptions) -> Result<Self> {
        if !(opts.eps >= 0.0) {
            return Err(Error::NegativeTolerance(opts.eps));
        }
        let start = Instant::now();
        let g = Mat::from_fn(setup.num_free(), 1, |i, _| setup.g[i]);
        let g_metric = setup.factor().mul_factor_t(g.as_ref())?;
        let n = setup.set.len();
        let svd = product_svd_with(g_metric.as_ref(), n, |ra| {
            Ok(Mat::from_fn(n, ra.nrows(), |i, j| if i == 0 { ra[(j, 0)] } else { 0.0 }))
        })?;
        let (current, report) = truncate_svd(svd, 1, setup.factor(), opts.eps, opts.mode)?;
        let record = StepRecord {
            k: 0,
            rank_before: 1,
            rank_after: report.output_rank,
            numerical_rank: numerical_rank(&report.singular_values, opts.rank_cutoff),
            singular_values: report.singular_values,
            discarded_tail: report.discarded_tail_norm,
            step_difference: None,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok(Self { setup, opts, g_metric, current, trace: IterationTrace { steps: vec![record], converged_at: None } })
    }

    pub fn k(&self) -> usize {
        self.trace.steps.len() - 1
    }

    pub fn current(&self) -> &LowRankPair {
        &self.current
    }

    pub fn trace(&self) -> &IterationTrace {
        &self.trace
    }

    pub fn last_record(&self) -> &StepRecord {
        self.trace.steps.last().expect("trace always holds step 0")
    }

    /// Whether the stop rule has fired.
    pub fn converged(&self) -> bool {
        self.trace.converged_at.is_some()
    }

    pub fn step(&mut self) -> Result<&StepRecord> {
        let start = Instant::now();
        let s = self.setup;
        let fac = s.factor();
        let (m, n, d) = (s.num_free(), s.set.len(), s.d());
        let r = self.current.rank();
        let width = d * r + 1;
        let mut a = Mat::zeros(m, width);
        a.col_mut(0).copy_from(self.g_metric.col(0));
        for (i, op) in s.operators.iter().enumerate() {
            let av = op.mul_mat(self.current.v.as_ref());
            let block = fac.solve_factor(av.as_ref())?;
            a.subcols_mut(1 + i * r, r).copy_from(&block);
        }
        let phi = self.current.phi.as_ref();
        let svd = product_svd_with(a.as_ref(), n, |ra| Ok(parametric_core(ra, phi, &s.mults, r)))?;
        let (next, report) = truncate_svd(svd, width, fac, self.opts.eps, self.opts.mode)?;
        let step_difference = match self.opts.stop_tol {
            Some(_) => Some(norm_in_metric(&add(&[next.clone(), self.current.scaled(-1.0)])?, fac)?),
            None => None,
        };
        let k = self.k() + 1;
        if let (Some(tol), Some(diff)) = (self.opts.stop_tol, step_difference) {
            if self.trace.converged_at.is_none() && report.discarded_tail_norm + diff < tol {
                self.trace.converged_at = Some(k);
            }
        }
        self.current = next;
        self.trace.steps.push(StepRecord {
            k,
            rank_before: width,
            rank_after: report.output_rank,
            numerical_rank: numerical_rank(&report.singular_values, self.opts.rank_cutoff),
            singular_values: report.singular_values,
            discarded_tail: report.discarded_tail_norm,
            step_difference,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(self.last_record())
    }

    pub fn into_parts(self) -> (LowRankPair, IterationTrace) {
        (self.current, self.trace)
    }
}

/// `C = e₀ r₀ᵀ + Σ_i M_i (Φ R_iᵀ)` where `R_A = [r₀, R_1, …, R_d]`, so that
/// the stacked parametric factor is never formed.
fn parametric_core(ra: MatRef<'_, f64>, phi: MatRef<'_, f64>, mults: &[MultiplicationMatrix], r: usize) -> Mat<f64> {
    let n = phi.nrows();
    let p = ra.nrows();
    let mut c = Mat::zeros(n, p);
    for j in 0..p {
        c[(0, j)] = ra[(j, 0)];
    }
    if r > 0 {
        for (i, mi) in mults.iter().enumerate() {
            let t = phi * ra.subcols(1 + i * r, r).transpose();
            mi.apply_add(t.as_ref(), &mut c);
        }
    }
    c
}

/// Runs `k_max` steps with absolute tolerance `eps`.
pub fn iterate(setup: &ProblemSetup, k_max: usize, eps: f64) -> Result<(LowRankPair, IterationTrace)> {
    let opts = IterationOptions { eps, ..IterationOptions::default() };
    iterate_with(setup, k_max, opts, |_, _| Ok(()))
}

/// Runs up to `k_max` steps, calling `observer` on every iterate including
/// `u₀`, and stops early once the stop rule in `opts` fires.
pub fn iterate_with(
    setup: &ProblemSetup,
    k_max: usize,
    opts: IterationOptions,
    mut observer: impl FnMut(&LowRankPair, &StepRecord) -> Result<()>,
) -> Result<(LowRankPair, IterationTrace)> {
    let mut it = NeumannIteration::new(setup, opts)?;
    observer(it.current(), it.last_record())?;
    while it.k() < k_max && !it.converged() {
        it.step()?;
        observer(it.current(), it.last_record())?;
    }
    Ok(it.into_parts())
}

/// Discrete Taylor coefficients `t_ν` for all `|ν| ≤ k`, one column each.
#[derive(Clone, Debug)]
pub struct TaylorCoefficients {
    pub set: MultiIndexSet,
    pub coeffs: Mat<f64>,
}

impl TaylorCoefficients {
    pub fn compute(setup: &ProblemSetup, k: usize) -> Result<Self> {
        Self::compute_capped(setup, k, DEFAULT_INDEX_CAP)
    }

    pub fn compute_capped(setup: &ProblemSetup, k: usize, cap: usize) -> Result<Self> {
        let set = MultiIndexSet::total_degree_capped(setup.d(), k, cap)?;
        let m = setup.num_free();
        let mut coeffs = Mat::zeros(m, set.len());
        for (j, gj) in setup.g.iter().enumerate() {
            coeffs[(j, 0)] = *gj;
        }
        let mut rhs = vec![0.0; m];
        let mut mu = vec![0u32; setup.d()];
        for pos in 1..set.len() {
            rhs.iter_mut().for_each(|x| *x = 0.0);
            mu.copy_from_slice(set.index(pos));
            for i in 0..setup.d() {
                if mu[i] == 0 {
                    continue;
                }
                mu[i] -= 1;
                let prev = set.position(&mu).expect("index sets are downward closed");
                setup.operators[i].mul_vec_into_add(coeffs.col_as_slice(prev), &mut rhs);
                mu[i] += 1;
            }
            setup.factor().solve_in_place(&mut rhs)?;
            for (j, v) in rhs.iter().enumerate() {
                coeffs[(j, pos)] = *v;
            }
        }
        Ok(Self { set, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.set.degree()
    }

    pub fn coefficient(&self, nu: &[u32]) -> Option<Vec<f64>> {
        let p = self.set.position(nu)?;
        Some(self.coeffs.col(p).iter().copied().collect())
    }

    /// Legendre coefficients of `Σ_{|ν|≤k} t_ν y^ν` over `target`.
    pub fn to_legendre(&self, target: &MultiIndexSet) -> Result<Mat<f64>> {
        if target.d() != self.set.d() {
            return Err(Error::DimensionMismatch { expected: self.set.d(), got: target.d() });
        }
        if target.degree() < self.degree() {
            return Err(Error::InvalidArgument(format!(
                "target degree {} is below the Taylor degree {}",
                target.degree(),
                self.degree()
            )));
        }
        let table = monomial_to_legendre(self.degree());
        let mut out = Mat::zeros(self.coeffs.nrows(), target.len());
        let mut mu = vec![0u32; self.set.d()];
        for (p, nu) in self.set.iter().enumerate() {
            // all μ ≤ ν with matching parity in every axis
            mu.iter_mut().zip(nu).for_each(|(m, &n)| *m = n % 2);
            loop {
                let w: f64 = nu.iter().zip(&mu).map(|(&n, &m)| table[n as usize][m as usize]).product();
                let q = target.position(&mu).expect("degree checked above");
                for i in 0..out.nrows() {
                    out[(i, q)] += w * self.coeffs[(i, p)];
                }
                let mut axis = 0;
                while axis < mu.len() {
                    if mu[axis] + 2 <= nu[axis] {
                        mu[axis] += 2;
                        break;
                    }
                    mu[axis] = nu[axis] % 2;
                    axis += 1;
                }
                if axis == mu.len() {
                    break;
                }
            }
        }
        Ok(out)
    }
}

/// Single Taylor coefficient through the recursion over `{μ ≤ ν}`.
pub fn taylor_coefficient(setup: &ProblemSetup, nu: &[u32], cap: usize) -> Result<Vec<f64>> {
    setup.check_len_u32(nu)?;
    let size = nu.iter().try_fold(1u128, |acc, &n| acc.checked_mul(n as u128 + 1)).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::IndexSetTooLarge { size, cap });
    }
    let mut box_indices: Vec<Vec<u32>> = vec![vec![0; nu.len()]];
    for (axis, &n) in nu.iter().enumerate() {
        let base = std::mem::take(&mut box_indices);
        for b in base {
            for v in 0..=n {
                let mut c = b.clone();
                c[axis] = v;
                box_indices.push(c);
            }
        }
    }
    box_indices.sort_by_key(|m| m.iter().map(|&x| x as u64).sum::<u64>());
    let mut memo: HashMap<Vec<u32>, Vec<f64>> = HashMap::with_capacity(box_indices.len());
    for mu in box_indices {
        let t = if mu.iter().all(|&x| x == 0) {
            setup.g.clone()
        } else {
            let mut rhs = vec![0.0; setup.num_free()];
            let mut prev = mu.clone();
            for i in 0..mu.len() {
                if mu[i] == 0 {
                    continue;
                }
                prev[i] -= 1;
                setup.operators[i].mul_vec_into_add(&memo[&prev], &mut rhs);
                prev[i] += 1;
            }
            setup.factor().solve_in_place(&mut rhs)?;
            rhs
        };
        memo.insert(mu, t);
    }
    Ok(memo.remove(nu).expect("ν is in its own box"))
}

impl ProblemSetup {
    fn check_len_u32(&self, nu: &[u32]) -> Result<()> {
        if nu.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: nu.len() });
        }
        Ok(())
    }
}

/// Power-iteration lower estimate of `‖Σ y_i Ā⁻¹A_i‖` in the `Ā` norm.
///
/// Iterates on `R⁻¹(Σ y_i A_i)R⁻ᵀ` and returns the largest `‖Kx‖` seen
/// for unit `x`.
pub fn contraction_estimate(setup: &ProblemSetup, y: &[f64], n_power_iters: usize) -> Result<f64> {
    let op = setup.perturbation(y)?;
    if y.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let fac = setup.factor();
    let m = setup.num_free();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nrm);
    let mut best = 0.0f64;
    let mut w = vec![0.0; m];
    for _ in 0..n_power_iters.max(1) {
        let mut z = x.clone();
        fac.solve_factor_t_in_place(&mut z)?;
        op.mul_vec_into(&z, &mut w);
        fac.solve_factor_in_place(&mut w)?;
        let nw = norm2(&w);
        best = best.max(nw);
        if nw == 0.0 {
            break;
        }
        x.iter_mut().zip(&w).for_each(|(a, b)| *a = b / nw);
    }
    Ok(best)
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Parameter samples: `n_random` uniform points on `[-1,1]^d` followed,
/// if requested, by `2^min(d,4)` corners. For `d > 4` the corner signs
/// repeat cyclically over the axes.
pub fn sample_points(d: usize, n_random: usize, seed: u64, corners: bool) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec<f64>> =
        (0..n_random).map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    if corners && d > 0 {
        let c = d.min(4);
        for mask in 0..(1usize << c) {
            pts.push((0..d).map(|i| if mask >> (i % c) & 1 == 1 { 1.0 } else { -1.0 }).collect());
        }
    }
    pts
}

/// Reference solutions at fixed parameter samples, for repeated error
/// evaluation along an iteration.
#[derive(Clone, Debug)]
pub struct ErrorSampler {
    pub points: Vec<Vec<f64>>,
    reference: Vec<Vec<f64>>,
}

impl ErrorSampler {
    pub fn new(setup: &ProblemSetup, n_random: usize, seed: u64, corners: bool) -> Result<Self> {
        Self::at_points(setup, sample_points(setup.d(), n_random, seed, corners))
    }

    pub fn at_points(setup: &ProblemSetup, points: Vec<Vec<f64>>) -> Result<Self> {
        let reference = points.iter().map(|y| setup.direct_solve(y)).collect::<Result<Vec<_>>>()?;
        Ok(Self { points, reference })
    }

    /// `‖u_k(y) − u(y)‖_Ā` at every sample.
    pub fn errors(&self, setup: &ProblemSetup, pair: &LowRankPair) -> Result<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.reference)
            .map(|(y, u)| {
                let mut e = evaluate_expansion(pair, &setup.set, y)?;
                e.iter_mut().zip(u).for_each(|(a, b)| *a -= b);
                setup.factor().energy_norm(&e)
            })
            .collect()
    }

    pub fn sup_error(&self, setup: &ProblemSetup, pair: &LowRankPair) -> Result<f64> {
        Ok(self.errors(setup, pair)?.into_iter().fold(0.0, f64::max))
    }
}

/// Sampled lower bound on `sup_y ‖u_k(y) − u(y)‖_Ā` over uniform samples.
pub fn sampled_sup_error(setup: &ProblemSetup, iterate: &LowRankPair, sample_count: usize, seed: u64) -> Result<f64> {
    ErrorSampler::new(setup, sample_count, seed, false)?.sup_error(setup, iterate)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankBounds {
    pub generic: u128,
    pub improved: u128,
    pub checkerboard_2x2: u128,
}

/// `n(d,k)`, `n(d−1,k)` and `8k+5`.
pub fn rank_bound_table(d: usize, k: usize) -> Result<RankBounds> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let overflow = || Error::IndexSetTooLarge { size: u128::MAX, cap: usize::MAX };
    Ok(RankBounds {
        generic: n_dk(d, k).ok_or_else(overflow)?,
        improved: n_dk(d - 1, k).ok_or_else(overflow)?,
        checkerboard_2x2: 8 * k as u128 + 5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, GeometrySpec};

    fn setup(degree: usize) -> ProblemSetup {
        let disc = Discretization::new(build_mesh(&GeometrySpec::checkerboard(2, 1, 0.5)).unwrap()).unwrap();
        ProblemSetup::subdomain_indicators(disc, 0.5, 1.0, degree).unwrap()
    }

    #[test]
    fn rank_bounds() {
        assert_eq!(rank_bound_table(4, 10).unwrap(), RankBounds { generic: 1001, improved: 286, checkerboard_2x2: 85 });
        assert_eq!(rank_bound_table(2, 3).unwrap().improved, 4);
        let b = rank_bound_table(3, 0).unwrap();
        assert_eq!(b.generic, 1);
        assert!(b.improved >= 1 && b.checkerboard_2x2 >= 1);
    }

    #[test]
    fn zeroth_iterate_is_g() {
        let s = setup(3);
        let (pair, trace) = iterate(&s, 0, 1e-15).unwrap();
        assert_eq!(pair.rank(), 1);
        let norm_g = s.factor().energy_norm(&s.g).unwrap();
        assert!((trace.steps[0].singular_values[0] - norm_g).abs() < 1e-14 * norm_g);
        let at0 = evaluate_expansion(&pair, &s.set, &[0.3, -0.2, 0.1, 0.9]).unwrap();
        for (a, b) in at0.iter().zip(&s.g) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_is_contiguous_and_ranks_drop() {
        let s = setup(4);
        let (_, trace) = iterate(&s, 3, 1e-15).unwrap();
        for (k, st) in trace.steps.iter().enumerate() {
            assert_eq!(st.k, k);
            assert!(st.rank_after <= st.rank_before);
        }
        assert_eq!(trace.steps[2].rank_before, 4 * trace.steps[1].rank_after + 1);
    }

    #[test]
    fn contraction_trivial_cases() {
        let s = setup(1);
        assert_eq!(contraction_estimate(&s, &[0.0; 4], 10).unwrap(), 0.0);
        let e = contraction_estimate(&s, &[1.0; 4], 5).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_taylor_coefficient_matches_table() {
        let s = setup(1);
        let table = TaylorCoefficients::compute(&s, 3).unwrap();
        for nu in [[0u32, 0, 0, 0], [1, 0, 2, 0], [0, 1, 1, 1]] {
            let a = taylor_coefficient(&s, &nu, 1000).unwrap();
            let b = table.coefficient(&nu).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-14 * (1.0 + y.abs()));
            }
        }
        assert!(matches!(taylor_coefficient(&s, &[9, 9, 9, 9], 100), Err(Error::IndexSetTooLarge { .. })));
    }

    #[test]
    fn sample_points_include_corners() {
        let pts = sample_points(4, 3, 7, true);
        assert_eq!(pts.len(), 3 + 16);
        assert!(pts[3..].iter().all(|p| p.iter().all(|v| v.abs() == 1.0)));
        assert_eq!(sample_points(16, 0, 7, true).len(), 16);
        assert_eq!(sample_points(2, 5, 1, false), sample_points(2, 5, 1, false));
    }

    #[test]
    fn proportional_requires_small_coefficients() {
        let disc = Discretization::new(build_mesh(&GeometrySpec::checkerboard(2, 0, 0.0)).unwrap()).unwrap();
        assert!(matches!(
            ProblemSetup::proportional(disc, &[0.6, -0.5], 1.0, 3),
            Err(Error::EllipticityViolation(_))
        ));
    }
}

//! Factored representations `V Φᵀ` with SVD truncation in an energy metric.
//!
//! For a symmetric positive definite Gram matrix `G = R Rᵀ` on the spatial
//! side, the singular values of `V Φᵀ` as an operator from `ℓ²` into
//! `(ℝ^M, ‖·‖_G)` are those of `Rᵀ V Φᵀ`. They are computed from thin QR
//! factorizations of both factors followed by a small dense SVD.

use std::io::Write;

use faer::linalg::triangular_solve::solve_upper_triangular_in_place;
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Error, Result};
use crate::fem::CholeskyFactor;

/// Spatial inner product given through a factor `R` with `G = R Rᵀ`.
pub trait Metric {
    fn dim(&self) -> usize;
    /// `Rᵀ x`.
    fn to_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>>;
    /// `R⁻ᵀ x`.
    fn from_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>>;
}

impl Metric for CholeskyFactor {
    fn dim(&self) -> usize {
        CholeskyFactor::dim(self)
    }

    fn to_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.mul_factor_t(x)
    }

    fn from_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.solve_factor_t(x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EuclideanMetric(pub usize);

impl Metric for EuclideanMetric {
    fn dim(&self) -> usize {
        self.0
    }

    fn to_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(self.0, x.nrows())?;
        Ok(x.to_owned())
    }

    fn from_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(self.0, x.nrows())?;
        Ok(x.to_owned())
    }
}

/// Dense Gram matrix metric with its lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct DenseMetric {
    gram: Mat<f64>,
    l: Mat<f64>,
}

impl DenseMetric {
    pub fn new(gram: Mat<f64>) -> Result<Self> {
        let llt = gram
            .llt(Side::Lower)
            .map_err(|_| Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?;
        let l = llt.L().to_owned();
        Ok(Self { gram, l })
    }

    pub fn gram(&self) -> MatRef<'_, f64> {
        self.gram.as_ref()
    }

    pub fn factor(&self) -> MatRef<'_, f64> {
        self.l.as_ref()
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(self.l.nrows(), b.nrows())?;
        let mut x = b.to_owned();
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(self.l.as_ref(), x.as_mut(), Par::Seq);
        solve_upper_triangular_in_place(self.l.transpose(), x.as_mut(), Par::Seq);
        Ok(x)
    }
}

impl Metric for DenseMetric {
    fn dim(&self) -> usize {
        self.l.nrows()
    }

    fn to_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(self.l.nrows(), x.nrows())?;
        Ok(self.l.transpose() * x)
    }

    fn from_metric_coords(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(self.l.nrows(), x.nrows())?;
        let mut out = x.to_owned();
        solve_upper_triangular_in_place(self.l.transpose(), out.as_mut(), Par::Seq);
        Ok(out)
    }
}

fn check_rows(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `u = V Φᵀ` with spatial factor `V` (`M × r`) and parametric factor `Φ` (`N × r`).
///
/// In SVD-normalized form the columns of `Rᵀ V` are orthogonal with norms
/// `σ_k`, the columns of `Φ` are orthonormal and `singular_values` is set.
#[derive(Clone, Debug)]
pub struct LowRankPair {
    pub v: Mat<f64>,
    pub phi: Mat<f64>,
    pub singular_values: Option<Vec<f64>>,
}

impl LowRankPair {
    pub fn new(v: Mat<f64>, phi: Mat<f64>) -> Result<Self> {
        if v.ncols() != phi.ncols() {
            return Err(Error::DimensionMismatch { expected: v.ncols(), got: phi.ncols() });
        }
        Ok(Self { v, phi, singular_values: None })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self { v: Mat::zeros(m, 0), phi: Mat::zeros(n, 0), singular_values: Some(Vec::new()) }
    }

    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn spatial_dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn parametric_dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        &self.v * self.phi.transpose()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { v: &self.v * faer::Scale(s), phi: self.phi.clone(), singular_values: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationMode {
    Absolute,
    Relative,
}

#[derive(Clone, Debug)]
pub struct TruncationReport {
    pub input_rank: usize,
    pub output_rank: usize,
    /// `sqrt(Σ discarded σ_k²)`.
    pub discarded_tail_norm: f64,
    /// Absolute tolerance the tail was held to.
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
}

/// Thin SVD `A Bᵀ = U diag(s) Wᵀ` with nonincreasing `s`.
#[derive(Clone, Debug)]
pub struct ProductSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub w: Mat<f64>,
}

/// SVD of `A Bᵀ` without forming the product.
pub fn product_svd(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<ProductSvd> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
    }
    product_svd_with(a, b.nrows(), |r_a| Ok(b * r_a.transpose()))
}

/// SVD of `A Bᵀ` where `B` is only available through `C = B R_Aᵀ`, with
/// `R_A` the triangular factor of a thin QR of `A`.
pub fn product_svd_with(
    a: MatRef<'_, f64>,
    n: usize,
    c_of: impl FnOnce(MatRef<'_, f64>) -> Result<Mat<f64>>,
) -> Result<ProductSvd> {
    let m = a.nrows();
    if m == 0 || n == 0 || a.ncols() == 0 {
        return Ok(ProductSvd { u: Mat::zeros(m, 0), s: Vec::new(), w: Mat::zeros(n, 0) });
    }
    let qr_a = a.qr();
    let q_a = qr_a.compute_thin_Q();
    let r_a = qr_a.thin_R().to_owned();
    let c = c_of(r_a.as_ref())?;
    if c.nrows() != n || c.ncols() != r_a.nrows() {
        return Err(Error::DimensionMismatch { expected: r_a.nrows(), got: c.ncols() });
    }
    let qr_c = c.qr();
    let q_c = qr_c.compute_thin_Q();
    let core = qr_c.thin_R().transpose().to_owned();
    let svd = core
        .thin_svd()
        .map_err(|e| Error::InvalidArgument(format!("dense SVD failed: {e:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));
    let (u_core, w_core) = (svd.U(), svd.V());
    let u_sorted = Mat::from_fn(u_core.nrows(), order.len(), |i, k| u_core[(i, order[k])]);
    let w_sorted = Mat::from_fn(w_core.nrows(), order.len(), |i, k| w_core[(i, order[k])]);
    Ok(ProductSvd {
        u: &q_a * &u_sorted,
        s: order.iter().map(|&k| sv[k]).collect(),
        w: &q_c * &w_sorted,
    })
}

/// Smallest `n` with `sqrt(Σ_{k≥n} s_k²) ≤ tol`, and that tail.
pub fn kept_count(s: &[f64], tol: f64) -> (usize, f64) {
    let mut suffix = vec![0.0; s.len() + 1];
    for k in (0..s.len()).rev() {
        suffix[k] = suffix[k + 1] + s[k] * s[k];
    }
    let n = (0..=s.len()).find(|&n| suffix[n].sqrt() <= tol).unwrap_or(s.len());
    (n, suffix[n].sqrt())
}

/// Flips singular vector pairs so that the largest-magnitude entry of each
/// parametric vector is positive.
pub fn fix_phase(u: &mut Mat<f64>, w: &mut Mat<f64>) {
    for k in 0..w.ncols() {
        let mut best = 0;
        for i in 0..w.nrows() {
            if w[(i, k)].abs() > w[(best, k)].abs() {
                best = i;
            }
        }
        if w.nrows() > 0 && w[(best, k)] < 0.0 {
            for i in 0..w.nrows() {
                w[(i, k)] = -w[(i, k)];
            }
            for i in 0..u.nrows() {
                u[(i, k)] = -u[(i, k)];
            }
        }
    }
}

/// Truncates an SVD given in metric coordinates and maps the spatial
/// factor back with `R⁻ᵀ`.
pub fn truncate_svd<M: Metric + ?Sized>(
    svd: ProductSvd,
    input_rank: usize,
    metric: &M,
    tol: f64,
    mode: TruncationMode,
) -> Result<(LowRankPair, TruncationReport)> {
    if !(tol >= 0.0) {
        return Err(Error::NegativeTolerance(tol));
    }
    let ProductSvd { u, s, w } = svd;
    let total = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol_abs = match mode {
        TruncationMode::Absolute => tol,
        TruncationMode::Relative => tol * total,
    };
    let (n, tail) = kept_count(&s, tol_abs);
    let mut u = u.subcols(0, n).to_owned();
    let mut w = w.subcols(0, n).to_owned();
    fix_phase(&mut u, &mut w);
    for k in 0..n {
        for i in 0..u.nrows() {
            u[(i, k)] *= s[k];
        }
    }
    let v = metric.from_metric_coords(u.as_ref())?;
    let pair = LowRankPair { v, phi: w, singular_values: Some(s[..n].to_vec()) };
    let report = TruncationReport {
        input_rank,
        output_rank: n,
        discarded_tail_norm: tail,
        tolerance: tol_abs,
        singular_values: s,
    };
    Ok((pair, report))
}

pub fn svd_truncate<M: Metric + ?Sized>(
    pair: &LowRankPair,
    metric: &M,
    tol: f64,
    mode: TruncationMode,
) -> Result<(LowRankPair, TruncationReport)> {
    if !(tol >= 0.0) {
        return Err(Error::NegativeTolerance(tol));
    }
    check_rows(metric.dim(), pair.v.nrows())?;
    let a = metric.to_metric_coords(pair.v.as_ref())?;
    let svd = product_svd(a.as_ref(), pair.phi.as_ref())?;
    truncate_svd(svd, pair.rank(), metric, tol, mode)
}

pub fn singular_values_in_metric<M: Metric + ?Sized>(pair: &LowRankPair, metric: &M) -> Result<Vec<f64>> {
    check_rows(metric.dim(), pair.v.nrows())?;
    let a = metric.to_metric_coords(pair.v.as_ref())?;
    Ok(product_svd(a.as_ref(), pair.phi.as_ref())?.s)
}

/// Frobenius norm of `Rᵀ V Φᵀ`.
pub fn norm_in_metric<M: Metric + ?Sized>(pair: &LowRankPair, metric: &M) -> Result<f64> {
    Ok(singular_values_in_metric(pair, metric)?.iter().map(|s| s * s).sum::<f64>().sqrt())
}

/// Number of `σ_k > cutoff_relative · max σ`.
pub fn numerical_rank(sigma: &[f64], cutoff_relative: f64) -> usize {
    let top = sigma.iter().copied().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return 0;
    }
    sigma.iter().filter(|&&s| s > cutoff_relative * top).count()
}

/// Concatenates the factors, representing the sum without truncation.
pub fn add(pairs: &[LowRankPair]) -> Result<LowRankPair> {
    let first = pairs.first().ok_or_else(|| Error::InvalidArgument("add needs at least one pair".into()))?;
    let (m, n) = (first.spatial_dim(), first.parametric_dim());
    for p in pairs {
        check_rows(m, p.spatial_dim())?;
        check_rows(n, p.parametric_dim())?;
    }
    let r: usize = pairs.iter().map(LowRankPair::rank).sum();
    let mut v = Mat::zeros(m, r);
    let mut phi = Mat::zeros(n, r);
    let mut off = 0;
    for p in pairs {
        v.subcols_mut(off, p.rank()).copy_from(&p.v);
        phi.subcols_mut(off, p.rank()).copy_from(&p.phi);
        off += p.rank();
    }
    Ok(LowRankPair { v, phi, singular_values: None })
}

/// Metric norms `‖V φ_ν‖` of every parametric coefficient, computed from
/// the triangular factor of a thin QR of `RᵀV`.
pub fn coefficient_norms<M: Metric + ?Sized>(pair: &LowRankPair, metric: &M) -> Result<Vec<f64>> {
    check_rows(metric.dim(), pair.v.nrows())?;
    let n = pair.parametric_dim();
    if pair.rank() == 0 {
        return Ok(vec![0.0; n]);
    }
    let a = metric.to_metric_coords(pair.v.as_ref())?;
    let r = a.qr().thin_R().to_owned();
    let t = &r * pair.phi.transpose();
    Ok((0..n).map(|j| t.col(j).norm_l2()).collect())
}

/// Same quantity from explicit coefficient columns `V Φᵀ e_ν`, assembled
/// in blocks of `block` columns.
pub fn coefficient_norms_dense<M: Metric + ?Sized>(pair: &LowRankPair, metric: &M, block: usize) -> Result<Vec<f64>> {
    check_rows(metric.dim(), pair.v.nrows())?;
    let n = pair.parametric_dim();
    let block = block.max(1);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let len = block.min(n - start);
        let cols = &pair.v * pair.phi.subrows(start, len).transpose();
        let y = metric.to_metric_coords(cols.as_ref())?;
        out.extend((0..len).map(|j| y.col(j).norm_l2()));
        start += len;
    }
    Ok(out)
}

/// Indices sorted by decreasing value; ties keep index order.
pub fn sorted_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
}

/// CSV with header `k,sigma`, 1-based `k`.
pub fn write_sigma_csv<W: Write>(mut w: W, sigma: &[f64]) -> Result<()> {
    writeln!(w, "k,sigma")?;
    for (k, s) in sigma.iter().enumerate() {
        writeln!(w, "{},{:.17e}", k + 1, s)?;
    }
    Ok(())
}

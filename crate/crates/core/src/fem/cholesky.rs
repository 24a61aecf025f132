//! Simplicial up-looking sparse Cholesky factorization.
//!
//! The symbolic analysis (fill-reducing ordering, elimination tree, column
//! counts) depends only on the sparsity pattern and is shared between
//! factorizations of matrices with equal patterns, such as `Ā - Σ y_i A_i`
//! for different `y`.
//!
//! With `P` the fill-reducing permutation, the factor satisfies
//! `P A Pᵀ = L Lᵀ`. The metric factor used throughout the crate is
//! `R = Pᵀ L`, so that `A = R Rᵀ` and `‖Rᵀ v‖² = vᵀ A v`.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::amd;
use faer::sparse::SymbolicSparseColMatRef;
use faer::{Mat, MatRef};

use super::SparseSymOperator;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    Amd,
    Natural,
}

#[derive(Debug)]
pub struct SymbolicCholesky {
    n: usize,
    perm: Vec<usize>,
    /// Upper triangle of `P A Pᵀ` in compressed columns, with the position
    /// of every entry in the value array of the source operator.
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    c_src: Vec<usize>,
    parent: Vec<usize>,
    l_col_ptr: Vec<usize>,
    src_col_ptr: Vec<usize>,
    src_row_idx: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    symbolic: Arc<SymbolicCholesky>,
    l_row_idx: Vec<usize>,
    l_values: Vec<f64>,
    min_pivot: (usize, f64),
}

fn ereach(
    col_ptr: &[usize],
    row_idx: &[usize],
    k: usize,
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &i0 in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
        let mut i = i0;
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

pub fn analyze(op: &SparseSymOperator, ordering: Ordering) -> Result<Arc<SymbolicCholesky>> {
    let n = op.dim();
    let (col_ptr, row_idx) = (op.col_ptr(), op.row_idx());
    let (perm, perm_inv) = match ordering {
        Ordering::Natural => ((0..n).collect::<Vec<_>>(), (0..n).collect::<Vec<_>>()),
        Ordering::Amd => {
            let mut up_ptr = vec![0usize; n + 1];
            let mut up_idx = Vec::with_capacity(op.nnz() / 2 + n);
            for j in 0..n {
                for &i in &row_idx[col_ptr[j]..col_ptr[j + 1]] {
                    if i <= j {
                        up_idx.push(i);
                    }
                }
                up_ptr[j + 1] = up_idx.len();
            }
            let mut perm = vec![0usize; n];
            let mut perm_inv = vec![0usize; n];
            if n > 0 {
                let sym = SymbolicSparseColMatRef::new_checked(n, n, &up_ptr, None, &up_idx);
                let mut buf = MemBuffer::new(amd::order_scratch::<usize>(n, up_idx.len()));
                amd::order(&mut perm, &mut perm_inv, sym, amd::Control::default(), MemStack::new(&mut buf))
                    .map_err(|e| Error::InvalidArgument(format!("ordering failed: {e:?}")))?;
            }
            (perm, perm_inv)
        }
    };

    let mut count = vec![0usize; n + 1];
    for j in 0..n {
        for &i in &row_idx[col_ptr[j]..col_ptr[j + 1]] {
            let (pi, pj) = (perm_inv[i], perm_inv[j]);
            if pi <= pj {
                count[pj + 1] += 1;
            }
        }
    }
    for j in 0..n {
        count[j + 1] += count[j];
    }
    let c_col_ptr = count.clone();
    let mut next = count;
    let nnz_c = c_col_ptr[n];
    let mut c_row_idx = vec![0usize; nnz_c];
    let mut c_src = vec![0usize; nnz_c];
    for j in 0..n {
        for p in col_ptr[j]..col_ptr[j + 1] {
            let (pi, pj) = (perm_inv[row_idx[p]], perm_inv[j]);
            if pi <= pj {
                let q = next[pj];
                next[pj] += 1;
                c_row_idx[q] = pi;
                c_src[q] = p;
            }
        }
    }
    for j in 0..n {
        let (a, b) = (c_col_ptr[j], c_col_ptr[j + 1]);
        let mut pairs: Vec<(usize, usize)> = (a..b).map(|q| (c_row_idx[q], c_src[q])).collect();
        pairs.sort_unstable();
        for (q, (r, s)) in (a..b).zip(pairs) {
            c_row_idx[q] = r;
            c_src[q] = s;
        }
    }

    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &i0 in &c_row_idx[c_col_ptr[k]..c_col_ptr[k + 1]] {
            let mut i = i0;
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }

    let mut col_count = vec![1usize; n];
    let mut stack = vec![0usize; n];
    let mut mark = vec![NONE; n];
    for k in 0..n {
        let top = ereach(&c_col_ptr, &c_row_idx, k, &parent, &mut stack, &mut mark);
        for &i in &stack[top..n] {
            col_count[i] += 1;
        }
    }
    let mut l_col_ptr = vec![0usize; n + 1];
    for j in 0..n {
        l_col_ptr[j + 1] = l_col_ptr[j] + col_count[j];
    }

    Ok(Arc::new(SymbolicCholesky {
        n,
        perm,
        c_col_ptr,
        c_row_idx,
        c_src,
        parent,
        l_col_ptr,
        src_col_ptr: col_ptr.to_vec(),
        src_row_idx: row_idx.to_vec(),
    }))
}

impl SymbolicCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn nnz_l(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    pub fn matches_pattern(&self, op: &SparseSymOperator) -> bool {
        op.col_ptr() == self.src_col_ptr.as_slice() && op.row_idx() == self.src_row_idx.as_slice()
    }
}

/// Numeric factorization reusing an existing symbolic analysis.
pub fn factorize(symbolic: &Arc<SymbolicCholesky>, op: &SparseSymOperator) -> Result<CholeskyFactor> {
    let s = symbolic.as_ref();
    if !s.matches_pattern(op) {
        return Err(Error::InvalidArgument("operator pattern differs from the symbolic analysis".into()));
    }
    let n = s.n;
    let vals = op.values();
    let nnz_l = s.nnz_l();
    let mut l_row_idx = vec![0usize; nnz_l];
    let mut l_values = vec![0.0f64; nnz_l];
    let mut next: Vec<usize> = s.l_col_ptr[..n].to_vec();
    let mut x = vec![0.0f64; n];
    let mut stack = vec![0usize; n];
    let mut mark = vec![NONE; n];
    let mut min_pivot = (0usize, f64::INFINITY);
    for k in 0..n {
        let top = ereach(&s.c_col_ptr, &s.c_row_idx, k, &s.parent, &mut stack, &mut mark);
        for q in s.c_col_ptr[k]..s.c_col_ptr[k + 1] {
            x[s.c_row_idx[q]] = vals[s.c_src[q]];
        }
        let mut d = x[k];
        x[k] = 0.0;
        for &i in &stack[top..n] {
            let start = s.l_col_ptr[i];
            let lki = x[i] / l_values[start];
            x[i] = 0.0;
            for p in start + 1..next[i] {
                x[l_row_idx[p]] -= l_values[p] * lki;
            }
            d -= lki * lki;
            let p = next[i];
            next[i] += 1;
            l_row_idx[p] = k;
            l_values[p] = lki;
        }
        if d < min_pivot.1 {
            min_pivot = (s.perm[k], d);
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: s.perm[k], value: d });
        }
        let p = next[k];
        next[k] += 1;
        l_row_idx[p] = k;
        l_values[p] = d.sqrt();
    }
    Ok(CholeskyFactor { symbolic: symbolic.clone(), l_row_idx, l_values, min_pivot })
}

pub fn cholesky(op: &SparseSymOperator) -> Result<CholeskyFactor> {
    cholesky_with_ordering(op, Ordering::Amd)
}

pub fn cholesky_with_ordering(op: &SparseSymOperator, ordering: Ordering) -> Result<CholeskyFactor> {
    let symbolic = analyze(op, ordering)?;
    factorize(&symbolic, op)
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    pub fn perm(&self) -> &[usize] {
        &self.symbolic.perm
    }

    pub fn nnz_l(&self) -> usize {
        self.l_values.len()
    }

    /// Smallest pivot `d_k` before the square root, with its original row index.
    pub fn min_pivot(&self) -> (usize, f64) {
        self.min_pivot
    }

    /// Dense copy of the triangular factor `L` of `P A Pᵀ`.
    pub fn l_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            for p in self.symbolic.l_col_ptr[j]..self.symbolic.l_col_ptr[j + 1] {
                l[(self.l_row_idx[p], j)] = self.l_values[p];
            }
        }
        l
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    fn lower_solve(&self, x: &mut [f64]) {
        let lp = &self.symbolic.l_col_ptr;
        for j in 0..self.dim() {
            let xj = x[j] / self.l_values[lp[j]];
            x[j] = xj;
            for p in lp[j] + 1..lp[j + 1] {
                x[self.l_row_idx[p]] -= self.l_values[p] * xj;
            }
        }
    }

    fn upper_solve(&self, x: &mut [f64]) {
        let lp = &self.symbolic.l_col_ptr;
        for j in (0..self.dim()).rev() {
            let mut s = x[j];
            for p in lp[j] + 1..lp[j + 1] {
                s -= self.l_values[p] * x[self.l_row_idx[p]];
            }
            x[j] = s / self.l_values[lp[j]];
        }
    }

    fn permute(&self, x: &[f64], out: &mut [f64]) {
        for (k, &pk) in self.symbolic.perm.iter().enumerate() {
            out[k] = x[pk];
        }
    }

    fn unpermute(&self, z: &[f64], out: &mut [f64]) {
        for (k, &pk) in self.symbolic.perm.iter().enumerate() {
            out[pk] = z[k];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        self.check(b.len())?;
        let mut z = vec![0.0; b.len()];
        self.permute(b, &mut z);
        self.lower_solve(&mut z);
        self.upper_solve(&mut z);
        self.unpermute(&z, b);
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// `R x = Pᵀ L x`.
    pub fn mul_factor_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check(x.len())?;
        let lp = &self.symbolic.l_col_ptr;
        let mut y = vec![0.0; x.len()];
        for j in 0..self.dim() {
            let xj = x[j];
            for p in lp[j]..lp[j + 1] {
                y[self.l_row_idx[p]] += self.l_values[p] * xj;
            }
        }
        self.unpermute(&y, x);
        Ok(())
    }

    /// `Rᵀ x = Lᵀ P x`.
    pub fn mul_factor_t_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check(x.len())?;
        let lp = &self.symbolic.l_col_ptr;
        let mut z = vec![0.0; x.len()];
        self.permute(x, &mut z);
        for j in 0..self.dim() {
            x[j] = (lp[j]..lp[j + 1]).map(|p| self.l_values[p] * z[self.l_row_idx[p]]).sum();
        }
        Ok(())
    }

    /// `R⁻¹ x = L⁻¹ P x`.
    pub fn solve_factor_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check(x.len())?;
        let mut z = vec![0.0; x.len()];
        self.permute(x, &mut z);
        self.lower_solve(&mut z);
        x.copy_from_slice(&z);
        Ok(())
    }

    /// `R⁻ᵀ x = Pᵀ L⁻ᵀ x`.
    pub fn solve_factor_t_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check(x.len())?;
        let mut z = x.to_vec();
        self.upper_solve(&mut z);
        self.unpermute(&z, x);
        Ok(())
    }

    fn columnwise(
        &self,
        x: MatRef<'_, f64>,
        f: impl Fn(&Self, &mut [f64]) -> Result<()>,
    ) -> Result<Mat<f64>> {
        self.check(x.nrows())?;
        let mut out = x.to_owned();
        for j in 0..out.ncols() {
            f(self, out.col_as_slice_mut(j))?;
        }
        Ok(out)
    }

    pub fn solve_mat(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.columnwise(x, Self::solve_in_place)
    }

    pub fn mul_factor(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.columnwise(x, Self::mul_factor_in_place)
    }

    pub fn mul_factor_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.columnwise(x, Self::mul_factor_t_in_place)
    }

    pub fn solve_factor(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.columnwise(x, Self::solve_factor_in_place)
    }

    pub fn solve_factor_t(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.columnwise(x, Self::solve_factor_t_in_place)
    }

    /// Energy norm `sqrt(vᵀ A v)` computed as `‖Rᵀ v‖`.
    pub fn energy_norm(&self, v: &[f64]) -> Result<f64> {
        let mut w = v.to_vec();
        self.mul_factor_t_in_place(&mut w)?;
        Ok(w.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap1d(n: usize) -> SparseSymOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseSymOperator::from_sym_triplets(n, &t).unwrap()
    }

    #[test]
    fn identity_factor_is_identity() {
        let f = cholesky(&SparseSymOperator::identity(5)).unwrap();
        let l = f.l_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(l[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn two_by_two_hand_factor() {
        let op = SparseSymOperator::from_sym_triplets(2, &[(0, 0, 4.0), (0, 1, 2.0), (1, 1, 3.0)]).unwrap();
        let f = cholesky_with_ordering(&op, Ordering::Natural).unwrap();
        let l = f.l_dense();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(1, 0)], 1.0);
        assert_eq!(l[(0, 1)], 0.0);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_reports_pivot() {
        let op = SparseSymOperator::from_sym_triplets(3, &[(0, 0, 1.0), (1, 1, -2.0), (2, 2, 1.0), (0, 2, 0.5)])
            .unwrap();
        match cholesky_with_ordering(&op, Ordering::Natural) {
            Err(Error::NotPositiveDefinite { pivot, value }) => {
                assert_eq!(pivot, 1);
                assert_eq!(value, -2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn factor_reproduces_matrix_and_solves() {
        let op = lap1d(40);
        for ordering in [Ordering::Amd, Ordering::Natural] {
            let f = cholesky_with_ordering(&op, ordering).unwrap();
            let l = f.l_dense();
            let llt = &l * l.transpose();
            let p = f.perm();
            for i in 0..40 {
                for j in 0..40 {
                    assert!((llt[(i, j)] - op.get(p[i], p[j])).abs() < 1e-13);
                }
            }
            let w: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = op.mul_vec(&w);
            let x = f.solve(&b).unwrap();
            for i in 0..40 {
                assert!((x[i] - w[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn metric_factor_identities() {
        let op = lap1d(25);
        let f = cholesky(&op).unwrap();
        let v: Vec<f64> = (0..25).map(|i| ((i * i) as f64 * 0.11).cos()).collect();
        let energy = op.quadratic_form(&v);
        let n = f.energy_norm(&v).unwrap();
        assert!((n * n - energy).abs() < 1e-12 * energy);
        let mut w = v.clone();
        f.mul_factor_t_in_place(&mut w).unwrap();
        f.solve_factor_t_in_place(&mut w).unwrap();
        let mut u = v.clone();
        f.mul_factor_in_place(&mut u).unwrap();
        f.solve_factor_in_place(&mut u).unwrap();
        for i in 0..25 {
            assert!((w[i] - v[i]).abs() < 1e-12);
            assert!((u[i] - v[i]).abs() < 1e-12);
        }
        let mut rrt = v.clone();
        f.mul_factor_t_in_place(&mut rrt).unwrap();
        f.mul_factor_in_place(&mut rrt).unwrap();
        let av = op.mul_vec(&v);
        for i in 0..25 {
            assert!((rrt[i] - av[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = cholesky(&lap1d(4)).unwrap();
        assert!(matches!(f.solve(&[1.0; 3]), Err(Error::DimensionMismatch { .. })));
    }
}

//! Tensor Legendre polynomials on `[-1,1]^d`, orthonormal with respect to
//! the uniform probability measure, total-degree index sets and the
//! Galerkin matrices of multiplication by `y_i`.
//!
//! Univariate polynomials are `L_n = sqrt(2n+1) P_n` and satisfy
//! `y L_n = β_{n-1} L_{n-1} + β_n L_{n+1}` with
//! `β_n = (n+1)/sqrt((2n+1)(2n+3))`.
//!
//! Multiplication matrices are truncated to the index set: the coupling of
//! an index with `|ν| = J` to degree `J + 1` is dropped. This is the
//! Galerkin projection of multiplication by `y_i`, not a rounding artefact.

use std::collections::HashMap;
use std::io::Write;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::lowrank::LowRankPair;

pub const DEFAULT_INDEX_CAP: usize = 5_000_000;

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of multi-indices in `d` variables with total degree at most `k`.
pub fn n_dk(d: usize, k: usize) -> Option<u128> {
    binomial((k + d) as u64, d as u64)
}

/// Multi-indices of total degree at most `J`, ordered by total degree and
/// then lexicographically; position 0 is the zero index.
#[derive(Clone, Debug)]
pub struct MultiIndexSet {
    d: usize,
    degree: usize,
    data: Vec<u32>,
    lookup: HashMap<Vec<u32>, usize>,
}

pub fn total_degree_set(d: usize, degree: usize) -> Result<MultiIndexSet> {
    MultiIndexSet::total_degree_capped(d, degree, DEFAULT_INDEX_CAP)
}

impl MultiIndexSet {
    pub fn total_degree(d: usize, degree: usize) -> Result<Self> {
        Self::total_degree_capped(d, degree, DEFAULT_INDEX_CAP)
    }

    pub fn total_degree_capped(d: usize, degree: usize, cap: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("index set needs d >= 1".into()));
        }
        let size = n_dk(d, degree).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::IndexSetTooLarge { size, cap });
        }
        let mut data = Vec::with_capacity(size as usize * d);
        let mut nu = vec![0u32; d];
        fn fill(pos: usize, rem: u32, nu: &mut [u32], out: &mut Vec<u32>) {
            if pos + 1 == nu.len() {
                nu[pos] = rem;
                out.extend_from_slice(nu);
                return;
            }
            for v in 0..=rem {
                nu[pos] = v;
                fill(pos + 1, rem - v, nu, out);
            }
        }
        for t in 0..=degree as u32 {
            fill(0, t, &mut nu, &mut data);
        }
        let lookup = data.chunks(d).enumerate().map(|(k, c)| (c.to_vec(), k)).collect();
        Ok(Self { d, degree, data, lookup })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, k: usize) -> &[u32] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn position(&self, nu: &[u32]) -> Option<usize> {
        self.lookup.get(nu).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.data.chunks(self.d)
    }

    /// Values `L_ν(y)` for every index in storage order.
    pub fn evaluate_basis(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: y.len() });
        }
        let tables: Vec<Vec<f64>> = y.iter().map(|&yi| legendre_values(self.degree, yi)).collect();
        Ok(self
            .iter()
            .map(|nu| nu.iter().zip(&tables).map(|(&n, t)| t[n as usize]).product())
            .collect())
    }

    /// One multi-index per line, entries separated by spaces.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for nu in self.iter() {
            let line: Vec<String> = nu.iter().map(u32::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

pub fn beta(n: usize) -> f64 {
    let n = n as f64;
    (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n + 3.0)).sqrt()
}

/// `L_0(x), …, L_nmax(x)` by the three-term recurrence.
pub fn legendre_values(nmax: usize, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(nmax + 1);
    v.push(1.0);
    if nmax >= 1 {
        v.push(3f64.sqrt() * x);
    }
    for n in 1..nmax {
        let next = (x * v[n] - beta(n - 1) * v[n - 1]) / beta(n);
        v.push(next);
    }
    v
}

pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_values(n, x)[n]
}

pub fn eval_tensor_legendre(nu: &[u32], y: &[f64]) -> f64 {
    nu.iter().zip(y).map(|(&n, &yi)| legendre(n as usize, yi)).product()
}

/// Row `n` holds the coefficients of `y^n` in `L_0, …, L_n`.
pub fn monomial_to_legendre(nmax: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for n in 0..nmax {
        let prev = &rows[n];
        let mut next = vec![0.0; n + 2];
        for (m, &c) in prev.iter().enumerate() {
            if m > 0 {
                next[m - 1] += c * beta(m - 1);
            }
            next[m + 1] += c * beta(m);
        }
        rows.push(next);
    }
    rows
}

/// Galerkin matrix of multiplication by `y_axis` on the span of an index set.
#[derive(Clone, Debug)]
pub struct MultiplicationMatrix {
    axis: usize,
    n: usize,
    /// `(position of ν, position of ν + e_axis, β_{ν_axis})`.
    couplings: Vec<(usize, usize, f64)>,
}

/// `axis` is 0-based.
pub fn multiplication_matrix(axis: usize, set: &MultiIndexSet) -> Result<MultiplicationMatrix> {
    if axis >= set.d() {
        return Err(Error::AxisOutOfRange { axis, d: set.d() });
    }
    let mut couplings = Vec::new();
    let mut up = vec![0u32; set.d()];
    for (lo, nu) in set.iter().enumerate() {
        let total: u32 = nu.iter().sum();
        if total as usize >= set.degree() {
            continue;
        }
        up.copy_from_slice(nu);
        up[axis] += 1;
        let hi = set.position(&up).expect("index sets are downward closed");
        couplings.push((lo, hi, beta(nu[axis] as usize)));
    }
    Ok(MultiplicationMatrix { axis, n: set.len(), couplings })
}

pub fn multiplication_matrices(set: &MultiIndexSet) -> Vec<MultiplicationMatrix> {
    (0..set.d()).map(|i| multiplication_matrix(i, set).expect("axis in range")).collect()
}

impl MultiplicationMatrix {
    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        2 * self.couplings.len()
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.couplings
            .iter()
            .find(|&&(lo, hi, _)| (lo == row && hi == col) || (lo == col && hi == row))
            .map_or(0.0, |c| c.2)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for &(lo, hi, b) in &self.couplings {
            m[(lo, hi)] = b;
            m[(hi, lo)] = b;
        }
        m
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(lo, hi, b) in &self.couplings {
            y[lo] += b * x[hi];
            y[hi] += b * x[lo];
        }
        y
    }

    /// `out += M x` column by column.
    pub fn apply_add(&self, x: MatRef<'_, f64>, out: &mut Mat<f64>) {
        for j in 0..x.ncols() {
            let xc = x.col(j);
            let oc = out.col_as_slice_mut(j);
            for &(lo, hi, b) in &self.couplings {
                oc[lo] += b * xc[hi];
                oc[hi] += b * xc[lo];
            }
        }
    }

    pub fn apply(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = Mat::zeros(self.n, x.ncols());
        self.apply_add(x, &mut out);
        out
    }
}

/// `Σ_ν u_ν L_ν(y)` for a factored expansion, evaluated as `V (Φᵀ L(y))`.
pub fn evaluate_expansion(pair: &LowRankPair, set: &MultiIndexSet, y: &[f64]) -> Result<Vec<f64>> {
    if pair.phi.nrows() != set.len() {
        return Err(Error::DimensionMismatch { expected: set.len(), got: pair.phi.nrows() });
    }
    let b = set.evaluate_basis(y)?;
    let r = pair.rank();
    let coeff: Vec<f64> = (0..r).map(|k| (0..b.len()).map(|n| pair.phi[(n, k)] * b[n]).sum()).collect();
    let m = pair.v.nrows();
    let mut out = vec![0.0; m];
    for (k, &c) in coeff.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += pair.v[(i, k)] * c;
        }
    }
    Ok(out)
}

/// `Σ_ν u_ν L_ν(y)` for a dense coefficient matrix with one column per index.
pub fn evaluate_dense_expansion(coeffs: MatRef<'_, f64>, set: &MultiIndexSet, y: &[f64]) -> Result<Vec<f64>> {
    if coeffs.ncols() != set.len() {
        return Err(Error::DimensionMismatch { expected: set.len(), got: coeffs.ncols() });
    }
    let b = set.evaluate_basis(y)?;
    Ok((0..coeffs.nrows()).map(|i| (0..b.len()).map(|n| coeffs[(i, n)] * b[n]).sum()).collect())
}

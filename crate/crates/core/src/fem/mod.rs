//! P1 finite elements on [`Mesh2D`]: stiffness and load assembly with
//! Dirichlet elimination, and sparse Cholesky solves.

pub mod cholesky;

use std::io::Write;
use std::sync::Arc;

use faer::{Mat, MatRef};

pub use cholesky::{analyze, cholesky, cholesky_with_ordering, factorize, CholeskyFactor, Ordering, SymbolicCholesky};

use crate::error::{Error, Result};
use crate::mesh::Mesh2D;

/// Symmetric sparse matrix with both triangles stored in compressed columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymOperator {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    negative_weights: bool,
}

impl SparseSymOperator {
    /// Builds from triplets; an off-diagonal `(i, j, v)` contributes to both
    /// `(i, j)` and `(j, i)`, duplicates are summed.
    pub fn from_sym_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch { expected: n, got: i.max(j) + 1 });
            }
            cols[j].push((i, v));
            if i != j {
                cols[i].push((j, v));
            }
        }
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for mut col in cols {
            col.sort_by_key(|e| e.0);
            for (i, v) in col {
                if row_idx.len() > *col_ptr.last().unwrap() && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { n, col_ptr, row_idx, values, negative_weights: false })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
            negative_weights: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when assembled with a negative subdomain weight, in which case
    /// the operator need not be semidefinite.
    pub fn flagged_indefinite(&self) -> bool {
        self.negative_weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let rows = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
        match rows.binary_search(&i) {
            Ok(p) => self.values[self.col_ptr[j] + p],
            Err(_) => 0.0,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).all(|p| self.get(j, self.row_idx[p]) == self.values[p])
        })
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.mul_vec_into_add(x, y);
    }

    /// `y += A x`.
    pub fn mul_vec_into_add(&self, x: &[f64], y: &mut [f64]) {
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_mat(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = Mat::zeros(self.n, x.ncols());
        let mut xj = vec![0.0; self.n];
        for j in 0..x.ncols() {
            for i in 0..self.n {
                xj[i] = x[(i, j)];
            }
            self.mul_vec_into(&xj, out.col_as_slice_mut(j));
        }
        out
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut a = Mat::zeros(self.n, self.n);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                a[(self.row_idx[p], j)] = self.values[p];
            }
        }
        a
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.col_ptr == other.col_ptr && self.row_idx == other.row_idx
    }

    /// `self + Σ c_k B_k` for operators sharing this sparsity pattern.
    pub fn plus_combination(&self, terms: &[(f64, &SparseSymOperator)]) -> Result<Self> {
        let mut out = self.clone();
        for &(c, op) in terms {
            if !self.same_pattern(op) {
                return Err(Error::InvalidArgument("operators have different sparsity patterns".into()));
            }
            for (v, w) in out.values.iter_mut().zip(&op.values) {
                *v += c * w;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.negative_weights = self.negative_weights || s < 0.0;
        out
    }

    /// Principal submatrix on `indices`, renumbered in the given order.
    pub fn principal_submatrix(&self, indices: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in indices.iter().enumerate() {
            local[i] = k;
        }
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for &j in indices {
            let mut col: Vec<(usize, f64)> = (self.col_ptr[j]..self.col_ptr[j + 1])
                .filter(|&p| local[self.row_idx[p]] != usize::MAX)
                .map(|p| (local[self.row_idx[p]], self.values[p]))
                .collect();
            col.sort_by_key(|e| e.0);
            for (i, v) in col {
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self { n: indices.len(), col_ptr, row_idx, values, negative_weights: self.negative_weights }
    }

    /// Entries of the block `rows × cols` as local `(row, col, value)` triplets.
    pub fn block_triplets(&self, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in rows.iter().enumerate() {
            local[i] = k;
        }
        let mut out = Vec::new();
        for (c, &j) in cols.iter().enumerate() {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = local[self.row_idx[p]];
                if r != usize::MAX && self.values[p] != 0.0 {
                    out.push((r, c, self.values[p]));
                }
            }
        }
        out
    }

    /// Coordinate text export, one `i j value` line per stored entry.
    pub fn write_coordinates<W: Write>(&self, mut w: W) -> Result<()> {
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                writeln!(w, "{} {} {:.17e}", self.row_idx[p], j, self.values[p])?;
            }
        }
        Ok(())
    }
}

/// Numbering of the free (non-Dirichlet) vertices.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub free_index_of_vertex: Vec<Option<usize>>,
    pub vertex_of_free: Vec<usize>,
    pub skeleton_dofs: Vec<usize>,
    pub interior_dofs_of_subdomain: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D) -> Self {
        let nv = mesh.num_vertices();
        let mut free_index_of_vertex = vec![None; nv];
        let mut vertex_of_free = Vec::new();
        for v in 0..nv {
            if !mesh.is_dirichlet_vertex[v] {
                free_index_of_vertex[v] = Some(vertex_of_free.len());
                vertex_of_free.push(v);
            }
        }
        let mut label = vec![usize::MAX; nv];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                label[v] = mesh.subdomain_of_triangle[t];
            }
        }
        let mut skeleton_dofs = Vec::new();
        let mut interior_dofs_of_subdomain = vec![Vec::new(); mesh.num_subdomains];
        for (k, &v) in vertex_of_free.iter().enumerate() {
            if mesh.is_skeleton_vertex[v] {
                skeleton_dofs.push(k);
            } else if label[v] != usize::MAX {
                interior_dofs_of_subdomain[label[v]].push(k);
            }
        }
        Self { free_index_of_vertex, vertex_of_free, skeleton_dofs, interior_dofs_of_subdomain }
    }

    pub fn num_free(&self) -> usize {
        self.vertex_of_free.len()
    }

    /// Vertex values with zeros at eliminated vertices.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.free_index_of_vertex.iter().map(|f| f.map_or(0.0, |k| u[k])).collect()
    }
}

/// Element stiffness `|T| ∇λ_a·∇λ_b` of a P1 triangle.
pub fn local_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let e = |a: usize| {
        let (b, c) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        [c[0] - b[0], c[1] - b[1]]
    };
    let edges = [e(0), e(1), e(2)];
    let twice_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
    let scale = 1.0 / (2.0 * twice_area);
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let v = (edges[a][0] * edges[b][0] + edges[a][1] * edges[b][1]) * scale;
            k[a][b] = v;
            k[b][a] = v;
        }
    }
    k
}

/// Precomputed pattern and element matrices for repeated assembly with
/// different subdomain weights.
#[derive(Clone, Debug)]
pub struct Assembler {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    local: Vec<[[f64; 3]; 3]>,
    slots: Vec<[[usize; 3]; 3]>,
    labels: Vec<usize>,
    num_subdomains: usize,
}

impl Assembler {
    pub fn new(mesh: &Mesh2D, dofs: &DofMap) -> Self {
        let n = dofs.num_free();
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    if let (Some(i), Some(j)) = (dofs.free_index_of_vertex[a], dofs.free_index_of_vertex[b]) {
                        cols[j].push(i);
                    }
                }
            }
        }
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let slot = |i: usize, j: usize| col_ptr[j] + row_idx[col_ptr[j]..col_ptr[j + 1]].binary_search(&i).unwrap();
        let mut local = Vec::with_capacity(mesh.num_triangles());
        let mut slots = Vec::with_capacity(mesh.num_triangles());
        for tri in &mesh.triangles {
            local.push(local_stiffness([mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]]));
            let mut s = [[usize::MAX; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    if let (Some(i), Some(j)) =
                        (dofs.free_index_of_vertex[tri[a]], dofs.free_index_of_vertex[tri[b]])
                    {
                        s[a][b] = slot(i, j);
                    }
                }
            }
            slots.push(s);
        }
        Self {
            n,
            col_ptr,
            row_idx,
            local,
            slots,
            labels: mesh.subdomain_of_triangle.clone(),
            num_subdomains: mesh.num_subdomains,
        }
    }

    /// Stiffness matrix of `∫ w ∇u·∇v` for piecewise constant `w`.
    pub fn assemble(&self, weights: &[f64]) -> Result<SparseSymOperator> {
        if weights.len() != self.num_subdomains {
            return Err(Error::DimensionMismatch { expected: self.num_subdomains, got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite subdomain weight {w}")));
        }
        let mut values = vec![0.0; self.row_idx.len()];
        for ((k, s), &label) in self.local.iter().zip(&self.slots).zip(&self.labels) {
            let w = weights[label];
            if w == 0.0 {
                continue;
            }
            for a in 0..3 {
                for b in 0..3 {
                    if s[a][b] != usize::MAX {
                        values[s[a][b]] += w * k[a][b];
                    }
                }
            }
        }
        Ok(SparseSymOperator {
            n: self.n,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values,
            negative_weights: weights.iter().any(|&w| w < 0.0),
        })
    }
}

pub fn assemble_stiffness(mesh: &Mesh2D, subdomain_weights: &[f64]) -> Result<SparseSymOperator> {
    Assembler::new(mesh, &DofMap::new(mesh)).assemble(subdomain_weights)
}

/// Load `∫ f φ_v` for every vertex, including eliminated ones.
pub fn assemble_load_all_vertices(mesh: &Mesh2D, f: f64) -> Vec<f64> {
    let per_triangle = vec![f; mesh.num_triangles()];
    load_p0_all_vertices(mesh, &per_triangle)
}

fn load_p0_all_vertices(mesh: &Mesh2D, f: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let share = f[t] * mesh.triangle_area(t) / 3.0;
        for &v in tri {
            b[v] += share;
        }
    }
    b
}

fn restrict(dofs: &DofMap, all: &[f64]) -> Vec<f64> {
    dofs.vertex_of_free.iter().map(|&v| all[v]).collect()
}

/// Load vector over free DOFs for constant `f`.
pub fn assemble_load(mesh: &Mesh2D, f: f64) -> Vec<f64> {
    restrict(&DofMap::new(mesh), &assemble_load_all_vertices(mesh, f))
}

/// Load vector over free DOFs for `f` constant on each triangle.
pub fn assemble_load_p0(mesh: &Mesh2D, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != mesh.num_triangles() {
        return Err(Error::DimensionMismatch { expected: mesh.num_triangles(), got: f.len() });
    }
    Ok(restrict(&DofMap::new(mesh), &load_p0_all_vertices(mesh, f)))
}

pub fn solve(factor: &CholeskyFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    factor.solve(rhs)
}

/// Mesh, DOF numbering, the operator `Ā` (weights all one) and its factor.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh2D,
    pub dofs: DofMap,
    pub assembler: Assembler,
    pub abar: SparseSymOperator,
    pub abar_factor: CholeskyFactor,
}

impl Discretization {
    pub fn new(mesh: Mesh2D) -> Result<Self> {
        let dofs = DofMap::new(&mesh);
        if dofs.num_free() == 0 {
            return Err(Error::InvalidGeometry("mesh has no free degrees of freedom".into()));
        }
        let assembler = Assembler::new(&mesh, &dofs);
        let abar = assembler.assemble(&vec![1.0; mesh.num_subdomains])?;
        let abar_factor = cholesky(&abar)?;
        Ok(Self { mesh, dofs, assembler, abar, abar_factor })
    }

    pub fn num_free(&self) -> usize {
        self.dofs.num_free()
    }

    pub fn num_subdomains(&self) -> usize {
        self.mesh.num_subdomains
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        self.abar_factor.symbolic()
    }

    pub fn stiffness(&self, weights: &[f64]) -> Result<SparseSymOperator> {
        self.assembler.assemble(weights)
    }

    pub fn load(&self, f: f64) -> Vec<f64> {
        restrict(&self.dofs, &assemble_load_all_vertices(&self.mesh, f))
    }

    pub fn load_p0(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.mesh.num_triangles() {
            return Err(Error::DimensionMismatch { expected: self.mesh.num_triangles(), got: f.len() });
        }
        Ok(restrict(&self.dofs, &load_p0_all_vertices(&self.mesh, f)))
    }

    /// Factorizes an operator with the pattern of `Ā`, reusing its ordering.
    pub fn factor(&self, op: &SparseSymOperator) -> Result<CholeskyFactor> {
        factorize(self.symbolic(), op)
    }

    /// Solves `(Σ_s w_s ∫_{D_s} ∇u·∇v) = rhs`.
    pub fn solve_with_weights(&self, weights: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let op = self.stiffness(weights)?;
        self.factor(&op)?.solve(rhs)
    }

    /// Galerkin solution of `(Ā - Σ y_i A_i) u = f` with `A_i = θ χ_{D_i}`,
    /// i.e. subdomain weights `1 - θ y_i`.
    pub fn direct_parametric_solve(&self, theta: f64, y: &[f64], f: f64) -> Result<Vec<f64>> {
        if y.len() != self.num_subdomains() {
            return Err(Error::DimensionMismatch { expected: self.num_subdomains(), got: y.len() });
        }
        if let Some(k) = y.iter().position(|&yi| !(theta * yi.abs() < 1.0)) {
            return Err(Error::EllipticityViolation(format!(
                "theta * |y_{}| = {} is not below one",
                k + 1,
                theta * y[k].abs()
            )));
        }
        let weights: Vec<f64> = y.iter().map(|&yi| 1.0 - theta * yi).collect();
        self.solve_with_weights(&weights, &self.load(f))
    }
}

pub fn direct_parametric_solve(disc: &Discretization, theta: f64, y: &[f64], f: f64) -> Result<Vec<f64>> {
    disc.direct_parametric_solve(theta, y, f)
}

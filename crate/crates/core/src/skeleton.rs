//! Steklov–Poincaré operators on the skeleton of the 2×2 partition.
//!
//! Subdomains are numbered so that the logical reflection `X` swaps
//! `D₁ ↔ D₂`, `D₃ ↔ D₄` and `Y` swaps `D₁ ↔ D₃`, `D₂ ↔ D₄`. On a symmetric
//! checkerboard these are the coordinate reflections `x₁ ↦ −x₁` and
//! `x₂ ↦ −x₂`.

use std::io::Write;

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{cholesky, CholeskyFactor, Discretization};
use crate::lowrank::{numerical_rank, singular_values_in_metric, DenseMetric, LowRankPair, Metric};

/// Signs of `S₁..S₄` in `H₀..H₃`.
const H_SIGNS: [[f64; 4]; 4] = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, -1.0, 1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]];

/// Relative cutoff on Gram eigenvalues for span dimensions.
pub const SPAN_CUTOFF: f64 = 1e-10;

/// Largest word length for which all `3^k` words are enumerated.
pub const FULL_ENUMERATION_MAX_K: usize = 8;

struct Subdomain {
    interior: Vec<usize>,
    factor: CholeskyFactor,
    /// `A^{(i)}_{IΓ}`, interior rows and skeleton columns.
    coupling: Mat<f64>,
}

/// Trace space with `S_i`, `S̄` and the reflection permutations.
pub struct SkeletonSetup {
    pub theta: f64,
    pub skeleton: Vec<usize>,
    num_free: usize,
    steklov: Vec<Mat<f64>>,
    sbar: DenseMetric,
    h: Vec<Mat<f64>>,
    refl_trace: [Vec<usize>; 2],
    refl_full: [Vec<usize>; 2],
    subdomains: Vec<Subdomain>,
    pub symmetric: bool,
}

impl SkeletonSetup {
    /// Requires a four-subdomain partition with logical reflections and,
    /// if `require_symmetry`, an exactly reflection-symmetric mesh.
    ///
    /// `theta` only scales `G_i`; the squared identities on `V̂₂`, `V̂₃` hold
    /// for `S̄⁻¹H_i`, so they carry a factor `θ²` here.
    pub fn new(disc: &Discretization, theta: f64, require_symmetry: bool) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("theta = {theta} must be positive")));
        }
        let mesh = &disc.mesh;
        let refl = match (&mesh.reflections, disc.num_subdomains()) {
            (Some(r), 4) => r,
            _ => {
                return Err(Error::UnsupportedGeometry(
                    "skeleton operators need the four-subdomain 2x2 partition".into(),
                ))
            }
        };
        let symmetric = mesh.check_reflection_symmetry().symmetric;
        if require_symmetry && !symmetric {
            return Err(Error::UnsupportedGeometry("mesh is not reflection symmetric".into()));
        }
        let dofs = &disc.dofs;
        let skeleton = dofs.skeleton_dofs.clone();
        let n = disc.num_free();
        let mut pos_in_skeleton = vec![usize::MAX; n];
        for (a, &i) in skeleton.iter().enumerate() {
            pos_in_skeleton[i] = a;
        }
        let mut refl_full = [vec![0usize; n], vec![0usize; n]];
        for r in 0..2 {
            for i in 0..n {
                let v = refl[r][dofs.vertex_of_free[i]];
                refl_full[r][i] = dofs.free_index_of_vertex[v].ok_or_else(|| {
                    Error::InvalidGeometry("reflection maps a free vertex to a Dirichlet vertex".into())
                })?;
            }
        }
        let mut refl_trace = [vec![0usize; skeleton.len()], vec![0usize; skeleton.len()]];
        for r in 0..2 {
            for (a, &i) in skeleton.iter().enumerate() {
                let b = pos_in_skeleton[refl_full[r][i]];
                if b == usize::MAX {
                    return Err(Error::InvalidGeometry("reflection does not preserve the skeleton".into()));
                }
                refl_trace[r][a] = b;
            }
        }
        let ns = skeleton.len();
        let mut steklov = Vec::with_capacity(4);
        let mut subdomains = Vec::with_capacity(4);
        for s in 0..4 {
            let mut w = [0.0; 4];
            w[s] = 1.0;
            let a = disc.stiffness(&w)?;
            let interior = dofs.interior_dofs_of_subdomain[s].clone();
            let factor = cholesky(&a.principal_submatrix(&interior))?;
            let mut coupling = Mat::zeros(interior.len(), ns);
            for (r, c, v) in a.block_triplets(&interior, &skeleton) {
                coupling[(r, c)] = v;
            }
            let mut sm = Mat::zeros(ns, ns);
            for (r, c, v) in a.block_triplets(&skeleton, &skeleton) {
                sm[(r, c)] = v;
            }
            let w_half = factor.solve_factor(coupling.as_ref())?;
            sm -= w_half.transpose() * &w_half;
            symmetrize(&mut sm);
            steklov.push(sm);
            subdomains.push(Subdomain { interior, factor, coupling });
        }
        let h: Vec<Mat<f64>> = H_SIGNS
            .iter()
            .map(|signs| {
                let mut m = Mat::zeros(ns, ns);
                for (s, &sg) in steklov.iter().zip(signs) {
                    m += s * faer::Scale(sg);
                }
                m
            })
            .collect();
        let sbar = DenseMetric::new(h[0].clone())?;
        Ok(Self { theta, skeleton, num_free: n, steklov, sbar, h, refl_trace, refl_full, subdomains, symmetric })
    }

    pub fn trace_dim(&self) -> usize {
        self.skeleton.len()
    }

    /// `S_i` for `i ∈ 1..=4`.
    pub fn steklov_matrix(&self, i: usize) -> Result<&Mat<f64>> {
        if !(1..=4).contains(&i) {
            return Err(Error::AxisOutOfRange { axis: i, d: 4 });
        }
        Ok(&self.steklov[i - 1])
    }

    pub fn sbar(&self) -> &DenseMetric {
        &self.sbar
    }

    /// `H_i` for `i ∈ 0..=3`; `H₀ = S̄`.
    pub fn h_matrix(&self, i: usize) -> Result<&Mat<f64>> {
        self.h.get(i).ok_or(Error::AxisOutOfRange { axis: i, d: 4 })
    }

    pub fn trace_of(&self, u: &[f64]) -> Vec<f64> {
        self.skeleton.iter().map(|&i| u[i]).collect()
    }

    /// Discrete harmonic extension of skeleton data, zero on `∂D`.
    pub fn harmonic_extension(&self, w: &[f64]) -> Result<Vec<f64>> {
        let w = Mat::from_fn(w.len(), 1, |i, _| w[i]);
        let e = self.harmonic_extension_mat(w.as_ref())?;
        Ok(e.col(0).iter().copied().collect())
    }

    pub fn harmonic_extension_mat(&self, w: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if w.nrows() != self.trace_dim() {
            return Err(Error::DimensionMismatch { expected: self.trace_dim(), got: w.nrows() });
        }
        let mut out = Mat::zeros(self.num_free, w.ncols());
        for (a, &i) in self.skeleton.iter().enumerate() {
            for c in 0..w.ncols() {
                out[(i, c)] = w[(a, c)];
            }
        }
        for sd in &self.subdomains {
            let rhs = &sd.coupling * w;
            let x = sd.factor.solve_mat(rhs.as_ref())?;
            for (r, &i) in sd.interior.iter().enumerate() {
                for c in 0..w.ncols() {
                    out[(i, c)] = -x[(r, c)];
                }
            }
        }
        Ok(out)
    }

    /// `(Xv)[a] = v[x(a)]` on trace vectors, `axis` 0 for `X` and 1 for `Y`.
    pub fn reflect_trace(&self, axis: usize, v: &[f64]) -> Vec<f64> {
        self.refl_trace[axis].iter().map(|&b| v[b]).collect()
    }

    pub fn reflect_full(&self, axis: usize, v: &[f64]) -> Vec<f64> {
        self.refl_full[axis].iter().map(|&b| v[b]).collect()
    }

    /// `P_j v` for `j ∈ 1..=3`: even/even, odd in `x₁`/even in `x₂`, even in
    /// `x₁`/odd in `x₂`.
    pub fn project(&self, j: usize, v: &[f64]) -> Result<Vec<f64>> {
        let (sx, sy) = match j {
            1 => (1.0, 1.0),
            2 => (-1.0, 1.0),
            3 => (1.0, -1.0),
            _ => return Err(Error::AxisOutOfRange { axis: j, d: 3 }),
        };
        let xv = self.reflect_trace(0, v);
        let yv = self.reflect_trace(1, v);
        let xyv = self.reflect_trace(1, &xv);
        Ok((0..v.len()).map(|a| 0.25 * (v[a] + sx * xv[a] + sy * yv[a] + sx * sy * xyv[a])).collect())
    }

    /// `G_i v = θ S̄⁻¹ H_i v` for `i ∈ 0..=3`.
    pub fn apply_g(&self, i: usize, v: &[f64]) -> Result<Vec<f64>> {
        let h = self.h_matrix(i)?;
        if v.len() != self.trace_dim() {
            return Err(Error::DimensionMismatch { expected: self.trace_dim(), got: v.len() });
        }
        let hv = h * Mat::from_fn(v.len(), 1, |a, _| v[a]);
        let x = self.sbar.solve(hv.as_ref())?;
        Ok(x.col(0).iter().map(|t| self.theta * t).collect())
    }

    /// `‖v‖_Γ = sqrt(vᵀ S̄ v)`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        let g = self.sbar.gram();
        let mut s = 0.0;
        for b in 0..v.len() {
            let mut col = 0.0;
            for a in 0..v.len() {
                col += g[(a, b)] * v[a];
            }
            s += col * w[b];
        }
        s
    }

    /// `S̄⁻¹(f_Γ − Σ_i A_{ΓI}^{(i)} (A_{II}^{(i)})⁻¹ f_I)`, the skeleton trace of
    /// `Ā⁻¹ f`.
    pub fn g_gamma(&self, load: &[f64]) -> Result<Vec<f64>> {
        if load.len() != self.num_free {
            return Err(Error::DimensionMismatch { expected: self.num_free, got: load.len() });
        }
        let ns = self.trace_dim();
        let mut rhs = Mat::from_fn(ns, 1, |a, _| load[self.skeleton[a]]);
        for sd in &self.subdomains {
            let fi: Vec<f64> = sd.interior.iter().map(|&i| load[i]).collect();
            let x = sd.factor.solve(&fi)?;
            let xm = Mat::from_fn(x.len(), 1, |r, _| x[r]);
            rhs -= sd.coupling.transpose() * &xm;
        }
        Ok(self.sbar.solve(rhs.as_ref())?.col(0).iter().copied().collect())
    }

    /// Runs every identity check over `n_random_trials` random trace vectors.
    pub fn verify_lemmas(&self, n_random_trials: usize, seed: u64) -> Result<LemmaReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ns = self.trace_dim();
        let mut report = LemmaReport::default();
        for _ in 0..n_random_trials {
            let v: Vec<f64> = (0..ns).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..ns).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            self.check_vectors(&v, &w, &y, &mut report)?;
        }
        Ok(report)
    }

    fn check_vectors(&self, v: &[f64], w: &[f64], y: &[f64], report: &mut LemmaReport) -> Result<()> {
        let p: Vec<Vec<f64>> = (1..=3).map(|j| self.project(j, v)).collect::<Result<_>>()?;
        let q: Vec<Vec<f64>> = (1..=3).map(|j| self.project(j, w)).collect::<Result<_>>()?;
        let sum: Vec<f64> = (0..v.len()).map(|a| p[0][a] + p[1][a] + p[2][a]).collect();
        report.record("projectors_sum_to_identity", rel(self.norm(&diff(&sum, v)), self.norm(v)));
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            report.record(
                &format!("orthogonal_V{}_V{}", a + 1, b + 1),
                rel(self.inner(&p[a], &q[b]).abs(), self.norm(v) * self.norm(w)),
            );
        }
        for i in 1..=3 {
            let g = self.apply_g(i, &p[i - 1])?;
            report.record(&format!("G{i}_annihilates_V{i}"), rel(self.norm(&g), self.norm(&p[i - 1])));
        }
        for (gi, src, dst) in [(2, 1, 3), (1, 2, 3), (3, 1, 2), (1, 3, 2), (3, 2, 1), (2, 3, 1)] {
            let x = &p[src - 1];
            let gx = self.apply_g(gi, x)?;
            let off = diff(&gx, &self.project(dst, &gx)?);
            report.record(&format!("G{gi}_maps_V{src}_into_V{dst}"), rel(self.norm(&off), self.norm(x)));
        }
        // with the factor θ in G_i the identities read G₂G₃v₂ = θG₁v₂ and G₃²v₂ = θ²v₂
        let (v2, v3) = (&p[1], &p[2]);
        let t = self.theta;
        let g1v2 = scaled(&self.apply_g(1, v2)?, t);
        let g2g3v2 = self.apply_g(2, &self.apply_g(3, v2)?)?;
        report.record("G2G3_equals_G1_on_V2", rel(self.norm(&diff(&g2g3v2, &g1v2)), t * t * self.norm(v2)));
        let g1v3 = scaled(&self.apply_g(1, v3)?, t);
        let g3g2v3 = self.apply_g(3, &self.apply_g(2, v3)?)?;
        report.record("G3G2_equals_G1_on_V3", rel(self.norm(&diff(&g3g2v3, &g1v3)), t * t * self.norm(v3)));
        let g3g3v2 = self.apply_g(3, &self.apply_g(3, v2)?)?;
        report.record(
            "G3_squared_is_identity_on_V2",
            rel(self.norm(&diff(&g3g3v2, &scaled(v2, t * t))), t * t * self.norm(v2)),
        );
        let g2g2v3 = self.apply_g(2, &self.apply_g(2, v3)?)?;
        report.record(
            "G2_squared_is_identity_on_V3",
            rel(self.norm(&diff(&g2g2v3, &scaled(v3, t * t))), t * t * self.norm(v3)),
        );
        for i in 1..=3 {
            let lhs = self.inner(&self.apply_g(i, v)?, w);
            let rhs = self.inner(v, &self.apply_g(i, w)?);
            report.record(&format!("G{i}_self_adjoint"), rel((lhs - rhs).abs(), self.norm(v) * self.norm(w)));
        }
        let mut t = vec![0.0; v.len()];
        let vm = Mat::from_fn(v.len(), 1, |a, _| v[a]);
        for (s, &yi) in self.steklov.iter().zip(y) {
            let sv = s * &vm;
            t.iter_mut().enumerate().for_each(|(a, x)| *x += yi * sv[(a, 0)]);
        }
        let tm = Mat::from_fn(t.len(), 1, |a, _| t[a]);
        let kt: Vec<f64> = self.sbar.solve(tm.as_ref())?.col(0).iter().map(|x| self.theta * x).collect();
        let excess = (self.norm(&kt) - self.theta * self.norm(v)).max(0.0);
        report.record("trace_contraction_excess", rel(excess, self.norm(v)));
        Ok(())
    }

    /// Words in `{G₁,G₂,G₃}` that can act nontrivially on some trace vector,
    /// grouped by the symmetry class of their argument. Each word lists
    /// operator indices in application order.
    pub fn pruned_words(k: usize) -> Vec<Vec<u8>> {
        let mut words: Vec<Vec<u8>> = vec![Vec::new()];
        let push = |w: Vec<u8>, words: &mut Vec<Vec<u8>>| {
            if w.len() <= k && !words.contains(&w) {
                words.push(w);
            }
        };
        for w in odd_class_words(k, 2) {
            push(w, &mut words);
        }
        for w in odd_class_words(k, 3) {
            push(w, &mut words);
        }
        if k >= 1 {
            // even/even data: G₂ leads into V̂₃, G₃ into V̂₂
            for (first, class) in [(2u8, 3usize), (3u8, 2usize)] {
                for tail in odd_class_words(k - 1, class) {
                    let mut w = vec![first];
                    w.extend(tail);
                    push(w, &mut words);
                }
            }
        }
        words
    }

    fn apply_word(&self, word: &[u8], v: &[f64]) -> Result<Vec<f64>> {
        let mut x = v.to_vec();
        for &i in word {
            x = self.apply_g(i as usize, &x)?;
        }
        Ok(x)
    }

    /// Span dimensions of `F_k(g)` for `k = 0..=k_max` using the pruned word
    /// graph.
    pub fn span_growth(&self, g: &[f64], k_max: usize) -> Result<SpanGrowth> {
        let mut dims = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let vectors = Self::pruned_words(k)
                .iter()
                .map(|w| self.apply_word(w, g))
                .collect::<Result<Vec<_>>>()?;
            dims.push(self.span_dimension(&vectors)?);
        }
        Ok(SpanGrowth::new(dims, self.trace_dim()))
    }

    /// Same as [`span_growth`](Self::span_growth) over all `3^j` words.
    pub fn span_growth_full(&self, g: &[f64], k_max: usize) -> Result<SpanGrowth> {
        if k_max > FULL_ENUMERATION_MAX_K {
            return Err(Error::EnumerationTooLarge(format!(
                "full enumeration is limited to k <= {FULL_ENUMERATION_MAX_K}, got {k_max}"
            )));
        }
        let mut all = vec![g.to_vec()];
        let mut level = vec![g.to_vec()];
        let mut dims = vec![self.span_dimension(&all)?];
        for _ in 1..=k_max {
            let mut next = Vec::with_capacity(level.len() * 3);
            for x in &level {
                for i in 1..=3 {
                    next.push(self.apply_g(i, x)?);
                }
            }
            all.extend(next.iter().cloned());
            dims.push(self.span_dimension(&all)?);
            level = next;
        }
        Ok(SpanGrowth::new(dims, self.trace_dim()))
    }

    /// Number of Gram eigenvalues in the `S̄` metric above
    /// `SPAN_CUTOFF · λ_max`, computed as squared singular values of `Rᵀ W`.
    pub fn span_dimension(&self, vectors: &[Vec<f64>]) -> Result<usize> {
        if vectors.is_empty() {
            return Ok(0);
        }
        let w = Mat::from_fn(self.trace_dim(), vectors.len(), |a, c| vectors[c][a]);
        let rw = self.sbar.to_metric_coords(w.as_ref())?;
        let s = rw
            .singular_values()
            .map_err(|e| Error::InvalidArgument(format!("dense SVD failed: {e:?}")))?;
        let top = s.iter().copied().fold(0.0f64, f64::max);
        if !(top > 0.0) {
            return Ok(0);
        }
        Ok(s.iter().filter(|&&x| x * x > SPAN_CUTOFF * top * top).count())
    }

    /// Splits `u = u_W + Σ u_i` with `u_W` the harmonic extension of the
    /// skeleton trace and reports numerical ranks of each part.
    pub fn skeleton_rank_split(&self, u: &LowRankPair, cutoff: f64) -> Result<RankSplit> {
        if u.v.nrows() != self.num_free {
            return Err(Error::DimensionMismatch { expected: self.num_free, got: u.v.nrows() });
        }
        let r = u.rank();
        let vg = Mat::from_fn(self.trace_dim(), r, |a, c| u.v[(self.skeleton[a], c)]);
        let ext = self.harmonic_extension_mat(vg.as_ref())?;
        let trace_pair = LowRankPair::new(vg, u.phi.clone())?;
        let trace_sv = singular_values_in_metric(&trace_pair, &self.sbar)?;
        let mut interior_ranks = [0usize; 4];
        let mut interior_sv = Vec::with_capacity(4);
        for (s, sd) in self.subdomains.iter().enumerate() {
            let vi = Mat::from_fn(sd.interior.len(), r, |row, c| {
                let i = sd.interior[row];
                u.v[(i, c)] - ext[(i, c)]
            });
            let pair = LowRankPair::new(vi, u.phi.clone())?;
            let sv = singular_values_in_metric(&pair, &sd.factor)?;
            interior_ranks[s] = numerical_rank(&sv, cutoff);
            interior_sv.push(sv);
        }
        Ok(RankSplit {
            interior_ranks,
            trace_rank: numerical_rank(&trace_sv, cutoff),
            trace_singular_values: trace_sv,
            interior_singular_values: interior_sv,
        })
    }
}

/// `G₁^i` for `i ≤ k`, then `G_b G₁^i` and `G_c G₁^i` with parities fixed by
/// the class of the argument (`class` 2 or 3).
fn odd_class_words(k: usize, class: usize) -> Vec<Vec<u8>> {
    let (odd_op, even_op) = if class == 2 { (2u8, 3u8) } else { (3u8, 2u8) };
    let mut words = Vec::new();
    for i in 0..=k {
        words.push(vec![1u8; i]);
    }
    for i in 0..k {
        let mut w = vec![1u8; i];
        w.push(if i % 2 == 1 { odd_op } else { even_op });
        words.push(w);
    }
    words
}

fn symmetrize(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in 0..j {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

fn rel(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Maximum residual per named check.
#[derive(Clone, Debug, Default)]
pub struct LemmaReport {
    pub checks: Vec<(String, f64)>,
}

impl LemmaReport {
    fn record(&mut self, name: &str, value: f64) {
        match self.checks.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = v.max(value),
            None => self.checks.push((name.to_string(), value)),
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.1).fold(0.0, f64::max)
    }

    pub fn failures(&self, tol: f64) -> Vec<&(String, f64)> {
        self.checks.iter().filter(|c| !(c.1 <= tol)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "check_name,residual")?;
        for (name, v) in &self.checks {
            writeln!(w, "{name},{v:.17e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanGrowth {
    pub dims: Vec<usize>,
    pub trace_dim: usize,
}

impl SpanGrowth {
    fn new(dims: Vec<usize>, trace_dim: usize) -> Self {
        Self { dims, trace_dim }
    }

    pub fn bound(k: usize) -> usize {
        8 * k + 1
    }

    pub fn within_bounds(&self) -> bool {
        self.dims.iter().enumerate().all(|(k, &d)| d <= Self::bound(k).min(self.trace_dim))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,dim,bound_8k1")?;
        for (k, d) in self.dims.iter().enumerate() {
            writeln!(w, "{k},{d},{}", Self::bound(k))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RankSplit {
    pub interior_ranks: [usize; 4],
    pub trace_rank: usize,
    pub trace_singular_values: Vec<f64>,
    pub interior_singular_values: Vec<Vec<f64>>,
}

//! The `run`, `lemmas`, `oned` and `mesh` subcommands, split into a compute
//! step returning plain data and a step writing the artifacts.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lrpde::fem::Discretization;
use lrpde::lowrank::{coefficient_norms, coefficient_norms_dense, sorted_descending, write_sigma_csv};
use lrpde::mesh::{build_mesh, Mesh2D, SymmetryReport};
use lrpde::neumann::{iterate_with, rank_bound_table, ErrorSampler, IterationOptions, IterationTrace, ProblemSetup};
use lrpde::oned::{snapshot_rank, write_oned_csv, SnapshotStudy};
use lrpde::skeleton::{LemmaReport, SkeletonSetup, SpanGrowth};
use serde_json::{json, Value};

use crate::config::{Geometry, RunConfig};

pub const LEMMA_TOL: f64 = 1e-8;
pub const LEGENDRE_PATH_TOL: f64 = 1e-10;
pub const FULL_ENUMERATION_K: usize = 4;
pub const ONED_SIGMA_TOL: f64 = 1e-10;
pub const ONED_NODAL_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(lrpde::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lrpde::Error> for CliError {
    fn from(e: lrpde::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn sci(x: f64) -> String {
    format!("{x:.17e}")
}

fn create(dir: &Path, name: &str) -> CliResult<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((path.clone(), BufWriter::new(File::create(&path)?)))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> CliResult<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| CliError::Run(lrpde::Error::Io(e.into())))?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

pub fn format_multi_index(nu: &[u32]) -> String {
    nu.iter().map(u32::to_string).collect::<Vec<_>>().join("-")
}

/// Everything `run` computes.
#[derive(Clone, Debug)]
pub struct RunData {
    pub config: RunConfig,
    pub d: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub dofs: usize,
    pub skeleton_dofs: usize,
    pub parametric_dim: usize,
    pub symmetric: bool,
    pub trace: IterationTrace,
    /// Sampled sup error of `u_k`, indexed by `k`.
    pub errors: Vec<f64>,
    /// Singular values of the last iterate before truncation.
    pub sigma: Vec<f64>,
    /// Coefficient norms in decreasing order with their multi-indices.
    pub legendre: Vec<(Vec<u32>, f64)>,
    /// Largest difference between factor and dense coefficient norms,
    /// relative to the largest norm.
    pub legendre_gap: f64,
    pub seconds: f64,
}

impl RunData {
    pub fn numerical_ranks(&self) -> Vec<usize> {
        self.trace.steps.iter().map(|s| s.numerical_rank).collect()
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ceiling = self.d + self.skeleton_dofs;
        for s in &self.trace.steps {
            if s.numerical_rank > ceiling {
                out.push(format!("k={}: numerical rank {} exceeds d + skeleton DOFs = {ceiling}", s.k, s.numerical_rank));
            }
        }
        if !(self.legendre_gap <= LEGENDRE_PATH_TOL) {
            out.push(format!("coefficient norm paths differ by {:e}", self.legendre_gap));
        }
        out
    }
}

pub fn run_experiment(cfg: &RunConfig) -> CliResult<RunData> {
    cfg.validate().map_err(CliError::Usage)?;
    let start = Instant::now();
    let mesh = build_mesh(&cfg.geometry_spec())?;
    let symmetric = mesh.check_reflection_symmetry().symmetric;
    let (vertices, triangles) = (mesh.num_vertices(), mesh.num_triangles());
    let disc = Discretization::new(mesh)?;
    let skeleton_dofs = disc.dofs.skeleton_dofs.len();
    let setup = ProblemSetup::subdomain_indicators(disc, cfg.theta, cfg.f, cfg.degree)?;
    let sampler = ErrorSampler::new(&setup, cfg.samples, cfg.seed, false)?;
    let opts = IterationOptions { eps: cfg.eps, mode: cfg.truncation, rank_cutoff: cfg.rank_cutoff, stop_tol: cfg.stop_tol };
    let mut errors = Vec::new();
    let (pair, trace) = iterate_with(&setup, cfg.k_max, opts, |u, _| {
        errors.push(sampler.sup_error(&setup, u)?);
        Ok(())
    })?;
    let sigma = trace.steps.last().map(|s| s.singular_values.clone()).unwrap_or_default();
    let norms = coefficient_norms(&pair, setup.factor())?;
    let dense = coefficient_norms_dense(&pair, setup.factor(), 256)?;
    let top = norms.iter().copied().fold(0.0f64, f64::max);
    let gap = norms.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    let legendre_gap = if top > 0.0 { gap / top } else { gap };
    let legendre = sorted_descending(&norms)
        .into_iter()
        .map(|j| (setup.set.index(j).to_vec(), norms[j]))
        .collect();
    Ok(RunData {
        config: cfg.clone(),
        d: setup.d(),
        vertices,
        triangles,
        dofs: setup.num_free(),
        skeleton_dofs,
        parametric_dim: setup.set.len(),
        symmetric,
        trace,
        errors,
        sigma,
        legendre,
        legendre_gap,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn write_run(data: &RunData, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();

    let (path, mut w) = create(dir, "ranks.csv")?;
    writeln!(
        w,
        "k,rank_before,rank_after,numerical_rank,bound_generic,bound_improved,bound_8k5,discarded_tail,step_difference"
    )?;
    for s in &data.trace.steps {
        let b = rank_bound_table(data.d, s.k)?;
        let bound_2x2 = if data.d == 4 { b.checkerboard_2x2.to_string() } else { String::new() };
        let diff = s.step_difference.map(sci).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.k,
            s.rank_before,
            s.rank_after,
            s.numerical_rank,
            b.generic,
            b.improved,
            bound_2x2,
            sci(s.discarded_tail),
            diff
        )?;
    }
    w.flush()?;
    files.push(path);

    let (path, mut w) = create(dir, "singular_values.csv")?;
    write_sigma_csv(&mut w, &data.sigma)?;
    w.flush()?;
    files.push(path);

    let (path, mut w) = create(dir, "singular_values_by_step.csv")?;
    writeln!(w, "step,k,sigma")?;
    for s in &data.trace.steps {
        for (j, x) in s.singular_values.iter().enumerate() {
            writeln!(w, "{},{},{}", s.k, j + 1, sci(*x))?;
        }
    }
    w.flush()?;
    files.push(path);

    let (path, mut w) = create(dir, "legendre_norms.csv")?;
    writeln!(w, "k,norm,multi_index")?;
    for (j, (nu, x)) in data.legendre.iter().enumerate() {
        writeln!(w, "{},{},{}", j + 1, sci(*x), format_multi_index(nu))?;
    }
    w.flush()?;
    files.push(path);

    let (path, mut w) = create(dir, "error.csv")?;
    writeln!(w, "k,sampled_sup_error")?;
    for (k, e) in data.errors.iter().enumerate() {
        writeln!(w, "{k},{}", sci(*e))?;
    }
    w.flush()?;
    files.push(path);

    let meta = json!({
        "command": "run",
        "config": data.config.to_json(),
        "mesh": {
            "vertices": data.vertices,
            "triangles": data.triangles,
            "subdomains": data.d,
            "reflection_symmetric": data.symmetric,
        },
        "dofs": data.dofs,
        "skeleton_dofs": data.skeleton_dofs,
        "legendre_coefficients": data.parametric_dim,
        "steps": data.trace.steps.len().saturating_sub(1),
        "converged_at": data.trace.converged_at,
        "final_numerical_rank": data.trace.steps.last().map(|s| s.numerical_rank),
        "legendre_path_gap": data.legendre_gap,
        "step_seconds": data.trace.steps.iter().map(|s| s.seconds).collect::<Vec<_>>(),
        "seconds": data.seconds,
        "failures": data.failures(),
    });
    files.push(write_json(dir, "meta.json", &meta)?);
    Ok(files)
}

#[derive(Clone, Debug)]
pub struct LemmaData {
    pub trace_dim: usize,
    pub report: LemmaReport,
    pub growth: SpanGrowth,
    pub full: SpanGrowth,
}

impl LemmaData {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .report
            .failures(LEMMA_TOL)
            .into_iter()
            .map(|(name, r)| format!("{name}: residual {r:e} exceeds {LEMMA_TOL:e}"))
            .collect();
        for (k, &dim) in self.growth.dims.iter().enumerate() {
            if dim > SpanGrowth::bound(k) {
                out.push(format!("k={k}: span dimension {dim} exceeds 8k+1 = {}", SpanGrowth::bound(k)));
            }
        }
        for (k, (a, b)) in self.growth.dims.iter().zip(&self.full.dims).enumerate() {
            if a != b {
                out.push(format!("k={k}: pruned span dimension {a} differs from full enumeration {b}"));
            }
        }
        out
    }
}

pub fn run_lemmas(cfg: &RunConfig) -> CliResult<LemmaData> {
    cfg.validate().map_err(CliError::Usage)?;
    if cfg.geometry != Geometry::Checkerboard(2) {
        return Err(CliError::Usage(format!(
            "lemmas requires the symmetric checkerboard(2) geometry, got {}",
            cfg.geometry.label()
        )));
    }
    let disc = Discretization::new(build_mesh(&cfg.geometry_spec())?)?;
    let sk = SkeletonSetup::new(&disc, cfg.theta, true)?;
    let report = sk.verify_lemmas(cfg.lemma_trials, cfg.seed)?;
    let g = sk.g_gamma(&disc.load(cfg.f))?;
    let growth = sk.span_growth(&g, cfg.span_k_max)?;
    let full = sk.span_growth_full(&g, cfg.span_k_max.min(FULL_ENUMERATION_K))?;
    Ok(LemmaData { trace_dim: sk.trace_dim(), report, growth, full })
}

pub fn write_lemmas(data: &LemmaData, cfg: &RunConfig, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let (p1, mut w) = create(dir, "lemma_residuals.csv")?;
    data.report.write_csv(&mut w)?;
    w.flush()?;
    let (p2, mut w) = create(dir, "span_growth.csv")?;
    data.growth.write_csv(&mut w)?;
    w.flush()?;
    let meta = json!({
        "command": "lemmas",
        "config": cfg.to_json(),
        "trace_dim": data.trace_dim,
        "max_residual": data.report.max_residual(),
        "span_dims": data.growth.dims,
        "full_enumeration_dims": data.full.dims,
        "failures": data.failures(),
    });
    let p3 = write_json(dir, "lemmas_meta.json", &meta)?;
    Ok(vec![p1, p2, p3])
}

#[derive(Clone, Debug)]
pub struct OnedData {
    pub d: usize,
    pub study: SnapshotStudy,
    /// `σ_{2d}/σ₁`, zero when fewer than `2d` values exist.
    pub ratio: f64,
}

impl OnedData {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.ratio <= ONED_SIGMA_TOL) {
            out.push(format!("sigma_{}/sigma_1 = {:e} exceeds {ONED_SIGMA_TOL:e}", 2 * self.d, self.ratio));
        }
        if !(self.study.nodal_mismatch <= ONED_NODAL_TOL) {
            out.push(format!("nodal mismatch {:e} exceeds {ONED_NODAL_TOL:e}", self.study.nodal_mismatch));
        }
        out
    }
}

pub fn run_oned(cfg: &RunConfig) -> CliResult<OnedData> {
    cfg.validate().map_err(CliError::Usage)?;
    let d = cfg.oned_d;
    if cfg.oned_samples < 2 * d {
        return Err(CliError::Usage(format!("oned_samples must be at least 2 * oned_d = {}", 2 * d)));
    }
    let study = snapshot_rank(d, cfg.theta, cfg.oned_samples, cfg.seed, cfg.oned_cells)?;
    let ratio = match (study.sigma.first(), study.sigma.get(2 * d - 1)) {
        (Some(&s1), Some(&s)) if s1 > 0.0 => s / s1,
        _ => 0.0,
    };
    Ok(OnedData { d, study, ratio })
}

pub fn write_oned(data: &OnedData, cfg: &RunConfig, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let (p1, mut w) = create(dir, "oned_svs.csv")?;
    write_oned_csv(&mut w, &data.study.sigma)?;
    w.flush()?;
    let meta = json!({
        "command": "oned",
        "config": cfg.to_json(),
        "sigma_2d_over_sigma_1": data.ratio,
        "nodal_mismatch": data.study.nodal_mismatch,
        "failures": data.failures(),
    });
    let p2 = write_json(dir, "oned_meta.json", &meta)?;
    Ok(vec![p1, p2])
}

#[derive(Clone, Debug)]
pub struct MeshData {
    pub mesh: Mesh2D,
    pub symmetry: SymmetryReport,
    pub validation: Option<String>,
}

pub fn run_mesh(cfg: &RunConfig) -> CliResult<MeshData> {
    cfg.validate().map_err(CliError::Usage)?;
    let mesh = build_mesh(&cfg.geometry_spec())?;
    let symmetry = mesh.check_reflection_symmetry();
    let validation = mesh.validate().err().map(|e| e.to_string());
    Ok(MeshData { mesh, symmetry, validation })
}

/// Compares everything the mesh file stores.
pub fn same_mesh_content(a: &Mesh2D, b: &Mesh2D) -> bool {
    a.vertices == b.vertices
        && a.triangles == b.triangles
        && a.subdomain_of_triangle == b.subdomain_of_triangle
        && a.is_dirichlet_vertex == b.is_dirichlet_vertex
        && a.is_skeleton_vertex == b.is_skeleton_vertex
        && a.num_subdomains == b.num_subdomains
}

/// Writes `mesh.txt` and `mesh_meta.json`; returns the files and failures.
pub fn write_mesh(data: &MeshData, cfg: &RunConfig, dir: &Path) -> CliResult<(Vec<PathBuf>, Vec<String>)> {
    let (p1, mut w) = create(dir, "mesh.txt")?;
    data.mesh.write_to(&mut w)?;
    w.flush()?;
    drop(w);
    let reloaded = Mesh2D::read_from(BufReader::new(File::open(&p1)?))?;
    let round_trip = same_mesh_content(&data.mesh, &reloaded);
    let mut failures = Vec::new();
    if !round_trip {
        failures.push("reloaded mesh differs from the written mesh".to_string());
    }
    if let Some(e) = &data.validation {
        failures.push(format!("mesh invariant violated: {e}"));
    }
    let m = &data.mesh;
    let meta = json!({
        "command": "mesh",
        "geometry": cfg.geometry.label(),
        "refine": cfg.refine,
        "grading": cfg.grading,
        "vertices": m.num_vertices(),
        "triangles": m.num_triangles(),
        "subdomains": m.num_subdomains,
        "dirichlet_vertices": m.is_dirichlet_vertex.iter().filter(|&&b| b).count(),
        "skeleton_vertices": m.num_skeleton_vertices(),
        "reflection_symmetric": data.symmetry.symmetric,
        "symmetry_violating_vertices": data.symmetry.violating_vertices.len(),
        "round_trip": round_trip,
        "failures": failures,
    });
    let p2 = write_json(dir, "mesh_meta.json", &meta)?;
    Ok((vec![p1, p2], failures))
}

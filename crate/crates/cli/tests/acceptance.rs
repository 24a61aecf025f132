//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::time::Instant;

use lrpde::fem::Discretization;
use lrpde::legendre::{beta, multiplication_matrix, n_dk, MultiIndexSet};
use lrpde::mesh::{build_mesh, GeometrySpec};
use lrpde::neumann::{contraction_estimate, iterate, sample_points, ProblemSetup, TaylorCoefficients};
use lrpde::oned::{proportional_rank_check, snapshot_rank};
use lrpde_cli::commands::{run_experiment, run_lemmas, RunData};
use lrpde_cli::config::RunConfig;

type Outcome = Result<(bool, String), String>;

fn coarse_2x2(refine: u32) -> Result<Discretization, String> {
    let mesh = build_mesh(&GeometrySpec::checkerboard(2, refine, 0.3)).map_err(|e| e.to_string())?;
    Discretization::new(mesh).map_err(|e| e.to_string())
}

/// Least-squares slope and coefficient of determination.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (sxy / sxx, r2)
}

fn c1_contraction() -> Outcome {
    let disc = coarse_2x2(3)?;
    let setup = ProblemSetup::subdomain_indicators(disc, 0.5, 1.0, 1).map_err(|e| e.to_string())?;
    let corners: Vec<Vec<f64>> = sample_points(4, 0, 0, true).into_iter().take(8).collect();
    let mut worst = 0.0f64;
    for y in &corners {
        worst = worst.max(contraction_estimate(&setup, y, 200).map_err(|e| e.to_string())?);
    }
    let ones = contraction_estimate(&setup, &[1.0; 4], 200).map_err(|e| e.to_string())?;
    let ok = worst <= 0.5 + 1e-8 && (ones - 0.5).abs() <= 1e-10;
    Ok((ok, format!("max over 8 corners {worst:.12}, at (1,1,1,1) {ones:.15}")))
}

fn c2_error_decay(sym: &RunData) -> Outcome {
    let e = &sym.errors;
    if e.len() < 10 {
        return Err(format!("only {} error values", e.len()));
    }
    let floor = 1e-10 * e[0];
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 1..=8 {
        if e[k] <= floor {
            break;
        }
        worst = worst.max(e[k + 1] / e[k]);
        checked += 1;
    }
    Ok((checked > 0 && worst <= 0.55, format!("max e_(k+1)/e_k over k=1..{checked}: {worst:.4}")))
}

fn c3_taylor_recovery() -> Outcome {
    let disc = coarse_2x2(1)?;
    let setup = ProblemSetup::subdomain_indicators(disc, 0.5, 1.0, 8).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 0..=6 {
        let (pair, _) = iterate(&setup, k, 0.0).map_err(|e| e.to_string())?;
        let taylor = TaylorCoefficients::compute(&setup, k)
            .and_then(|t| t.to_legendre(&setup.set))
            .map_err(|e| e.to_string())?;
        let dense = pair.to_dense();
        worst = worst.max((&dense - &taylor).norm_l2() / taylor.norm_l2());
    }
    Ok((worst <= 1e-11, format!("max relative Frobenius difference for k<=6: {worst:.3e}")))
}

fn c4_rank_bound(sym: &RunData) -> Outcome {
    let ranks = sym.numerical_ranks();
    if ranks.len() < 11 {
        return Err(format!("only {} iterates", ranks.len()));
    }
    let within = (1..=10).all(|k| ranks[k] <= 8 * k + 5);
    let xs: Vec<f64> = (1..=10).map(|k| k as f64).collect();
    let ys: Vec<f64> = (1..=10).map(|k| ranks[k] as f64).collect();
    let (slope, _) = linear_fit(&xs, &ys);
    Ok((within && slope <= 9.0, format!("ranks k=1..10 {:?}, fitted slope {slope:.3}", &ranks[1..=10])))
}

fn c5_geometry(dist: &RunData) -> Outcome {
    let ranks = dist.numerical_ranks();
    let over: Vec<usize> = (1..ranks.len().min(9)).filter(|&k| ranks[k] > 8 * k + 5).collect();
    Ok((!over.is_empty(), format!("ranks k=1..8 {:?}, k with rank > 8k+5: {over:?}", &ranks[1..ranks.len().min(9)])))
}

fn c6_svd_vs_legendre(sym: &RunData) -> Outcome {
    let sigma = &sym.sigma;
    let norms: Vec<f64> = sym.legendre.iter().map(|(_, x)| *x).collect();
    let mut violations = 0;
    for k in 5..=sigma.len().min(norms.len()) {
        if sigma[k - 1] > norms[k - 1] {
            violations += 1;
        }
    }
    let s1 = sigma.first().copied().unwrap_or(0.0);
    let n_sigma = sigma.iter().filter(|&&s| s > 1e-8 * s1).count();
    let n_leg = norms.iter().filter(|&&s| s > 1e-8 * s1).count();
    let ok = violations == 0 && 2 * n_sigma <= n_leg;
    Ok((ok, format!("sigma_k > k-th norm for {violations} k>=5; counts above 1e-8 sigma_1: {n_sigma} vs {n_leg}")))
}

fn c7_lemmas(cfg: &RunConfig) -> Outcome {
    let data = run_lemmas(cfg).map_err(|e| e.to_string())?;
    let fails = data.failures();
    Ok((
        fails.is_empty() && data.growth.dims.len() == 7,
        format!(
            "max residual {:.2e} over {} trials, span dims {:?}, full enumeration {:?}",
            data.report.max_residual(),
            cfg.lemma_trials,
            data.growth.dims,
            data.full.dims
        ),
    ))
}

fn c8_oned() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [2usize, 4, 8] {
        let st = snapshot_rank(d, 0.5, 50, 8, 8).map_err(|e| e.to_string())?;
        let ratio = st.sigma.get(2 * d - 1).copied().unwrap_or(0.0) / st.sigma[0];
        ok &= ratio <= 1e-10 && st.nodal_mismatch <= 1e-12;
        parts.push(format!("d={d}: ratio {ratio:.1e}, nodal {:.1e}", st.nodal_mismatch));
    }
    Ok((ok, parts.join("; ")))
}

fn c9_rank_one() -> Outcome {
    let disc = coarse_2x2(2)?;
    let c = [0.3, 0.2];
    let check = proportional_rank_check(disc, &c, 1.0, 24, 80).map_err(|e| e.to_string())?;
    let ratio = check.sigma.get(1).copied().unwrap_or(0.0) / check.sigma[0];
    let mut worst = 0.0f64;
    for y in sample_points(2, 10, 9, false) {
        let exact = 1.0 / (1.0 - c[0] * y[0] - c[1] * y[1]);
        let got = check.parametric_factor(&y).map_err(|e| e.to_string())?;
        worst = worst.max((got - exact).abs() / exact.abs());
    }
    Ok((ratio <= 1e-12 && worst <= 1e-10, format!("sigma_2/sigma_1 {ratio:.1e}, factor mismatch {worst:.1e}")))
}

fn c10_generic_bound(sym: &RunData) -> Outcome {
    let ranks = sym.numerical_ranks();
    let bad: Vec<usize> = (1..ranks.len().min(9))
        .filter(|&k| ranks[k] as u128 > n_dk(3, k).unwrap_or(u128::MAX))
        .collect();
    Ok((bad.is_empty() && ranks.len() >= 9, format!("ranks {:?} vs binomial(k+3,3), violations at {bad:?}", &ranks[1..ranks.len().min(9)])))
}

fn c11_combinatorics() -> Outcome {
    let counts_ok = n_dk(4, 15) == Some(3876) && n_dk(16, 5) == Some(20349);
    let set = MultiIndexSet::total_degree(4, 5).map_err(|e| e.to_string())?;
    let mut structure_ok = set.len() == 126;
    for axis in 0..4 {
        let m = multiplication_matrix(axis, &set).map_err(|e| e.to_string())?;
        let mut expected = 0;
        for nu in set.iter() {
            if nu.iter().sum::<u32>() < 5 {
                expected += 1;
            }
        }
        structure_ok &= m.couplings().len() == expected;
        for &(lo, hi, v) in m.couplings() {
            let (a, b) = (set.index(lo), set.index(hi));
            let diff_ok = (0..4).all(|j| if j == axis { b[j] == a[j] + 1 } else { b[j] == a[j] });
            structure_ok &= diff_ok && v == beta(a[axis] as usize) && v > 0.0;
        }
    }
    Ok((counts_ok && structure_ok, format!("n(4,15)={:?}, n(16,5)={:?}, pattern ok: {structure_ok}", n_dk(4, 15), n_dk(16, 5))))
}

fn c12_four_by_four() -> Outcome {
    let cfg = RunConfig::preset("fig-6").ok_or("missing preset")?;
    let data = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let sigma = &data.sigma;
    if sigma.len() < 40 {
        return Err(format!("only {} singular values", sigma.len()));
    }
    let xs: Vec<f64> = (5..=40).map(|k| k as f64).collect();
    let ys: Vec<f64> = (5..=40).map(|k| (sigma[k - 1] / sigma[0]).ln()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    let ranks = data.numerical_ranks();
    if ranks.len() < 5 {
        return Err(format!("only {} iterates", ranks.len()));
    }
    let lk: Vec<f64> = (1..=4).map(|k| (k as f64).ln()).collect();
    let lr: Vec<f64> = (1..=4).map(|k| (ranks[k] as f64).ln()).collect();
    let (growth, _) = linear_fit(&lk, &lr);
    let ok = slope < 0.0 && r2 >= 0.95 && growth > 1.0;
    Ok((
        ok,
        format!(
            "M={} skeleton={} N={}: log-sigma fit over 5..40 slope {slope:.4}, R^2 {r2:.4}; ranks {:?}, log-log growth {growth:.2}; last step difference {:.1e}",
            data.dofs,
            data.skeleton_dofs,
            data.parametric_dim,
            ranks,
            data.trace.steps.last().and_then(|s| s.step_difference).unwrap_or(f64::NAN)
        ),
    ))
}

fn report(id: usize, name: &str, start: Instant, outcome: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok((true, msg)) => {
            println!("PASS {id:>2} {name}: {msg} [{secs:.1}s]");
            true
        }
        Ok((false, msg)) => {
            println!("FAIL {id:>2} {name}: {msg} [{secs:.1}s]");
            false
        }
        Err(e) => {
            println!("FAIL {id:>2} {name}: error: {e} [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += ok as usize;
    };

    let t = Instant::now();
    tally(report(1, "contraction", t, c1_contraction()));

    let sym_cfg = RunConfig::preset("fig-4-2a").expect("preset");
    let t = Instant::now();
    let sym = run_experiment(&sym_cfg).map_err(|e| e.to_string());
    let with_sym = |f: fn(&RunData) -> Outcome| sym.as_ref().map_err(Clone::clone).and_then(f);

    tally(report(2, "error decay", t, with_sym(c2_error_decay)));
    let t = Instant::now();
    tally(report(3, "exact partial-sum recovery", t, c3_taylor_recovery()));
    let t = Instant::now();
    tally(report(4, "rank bound 8k+5", t, with_sym(c4_rank_bound)));

    let t = Instant::now();
    let dist_cfg = RunConfig::preset("fig-4-2b").expect("preset");
    let dist = run_experiment(&dist_cfg).map_err(|e| e.to_string());
    tally(report(5, "geometry sensitivity", t, dist.and_then(|d| c5_geometry(&d))));

    let t = Instant::now();
    tally(report(6, "SVD vs Legendre decay", t, with_sym(c6_svd_vs_legendre)));
    let t = Instant::now();
    tally(report(7, "skeleton identities", t, c7_lemmas(&sym_cfg)));
    let t = Instant::now();
    tally(report(8, "1D exact rank", t, c8_oned()));
    let t = Instant::now();
    tally(report(9, "rank-one case", t, c9_rank_one()));
    let t = Instant::now();
    tally(report(10, "generic rank bound", t, with_sym(c10_generic_bound)));
    let t = Instant::now();
    tally(report(11, "combinatorics", t, c11_combinatorics()));
    let t = Instant::now();
    tally(report(12, "4x4 checkerboard", t, c12_four_by_four()));

    println!("acceptance: {passed}/{total} criteria passed");
    if passed != total {
        std::process::exit(1);
    }
}

//! Flat `key = value` run configuration and the named presets.

use std::path::PathBuf;

use lrpde::lowrank::TruncationMode;
use lrpde::mesh::{GeometryKind, GeometrySpec, DEFAULT_EDGE_POINTS, DEFAULT_INTERIOR_POINT};
use serde_json::{json, Value};

pub const PRESETS: [&str; 4] = ["fig-4-2a", "fig-4-2b", "fig-1-1", "fig-6"];

pub const KEYS: [(&str, &str); 21] = [
    ("geometry", "checkerboard(m) | distorted"),
    ("interior_point", "x, y (distorted only)"),
    ("edge_points", "8 numbers: bottom, right, top, left interface end points"),
    ("refine", "refinement level r, 2^(r+1) cells per subdomain edge"),
    ("grading", "grading strength g, layer ratio 2^-g toward the skeleton"),
    ("theta", "perturbation amplitude in (0,1)"),
    ("f", "constant source"),
    ("degree", "total polynomial degree J"),
    ("k_max", "number of iteration steps"),
    ("eps", "truncation tolerance"),
    ("truncation", "absolute | relative"),
    ("rank_cutoff", "relative cutoff for reported numerical ranks"),
    ("stop_tol", "early stop tolerance, or none"),
    ("samples", "random parameter samples for error.csv"),
    ("seed", "sampling seed"),
    ("lemma_trials", "random trace vectors per identity check"),
    ("span_k_max", "largest word length in span_growth.csv"),
    ("oned_d", "number of subintervals for oned"),
    ("oned_samples", "snapshots for oned"),
    ("oned_cells", "cells per subinterval for oned"),
    ("out", "output directory"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Checkerboard(usize),
    Distorted,
}

impl Geometry {
    pub fn parse(s: &str) -> Result<Self, String> {
        let t = s.trim().to_ascii_lowercase();
        if t == "distorted" || t == "distorted_quad" {
            return Ok(Geometry::Distorted);
        }
        if t == "checkerboard" {
            return Ok(Geometry::Checkerboard(2));
        }
        let rest = t.strip_prefix("checkerboard").ok_or_else(|| format!("unknown geometry `{s}`"))?;
        let inner = rest.trim_start_matches(['(', ':']).trim_end_matches(')');
        match inner.parse::<usize>() {
            Ok(m) if m >= 1 => Ok(Geometry::Checkerboard(m)),
            _ => Err(format!("unknown geometry `{s}`")),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Geometry::Checkerboard(m) => format!("checkerboard({m})"),
            Geometry::Distorted => "distorted".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub interior_point: [f64; 2],
    pub edge_points: [[f64; 2]; 4],
    pub refine: u32,
    pub grading: f64,
    pub theta: f64,
    pub f: f64,
    pub degree: usize,
    pub k_max: usize,
    pub eps: f64,
    pub truncation: TruncationMode,
    pub rank_cutoff: f64,
    pub stop_tol: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub lemma_trials: usize,
    pub span_k_max: usize,
    pub oned_d: usize,
    pub oned_samples: usize,
    pub oned_cells: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::Checkerboard(2),
            interior_point: DEFAULT_INTERIOR_POINT,
            edge_points: DEFAULT_EDGE_POINTS,
            refine: 3,
            grading: 0.3,
            theta: 0.5,
            f: 1.0,
            degree: 11,
            k_max: 10,
            eps: 1e-15,
            truncation: TruncationMode::Absolute,
            rank_cutoff: 1e-10,
            stop_tol: Some(1e-14),
            samples: 20,
            seed: 20,
            lemma_trials: 20,
            span_k_max: 6,
            oned_d: 4,
            oned_samples: 50,
            oned_cells: 8,
            out: None,
        }
    }
}

impl RunConfig {
    /// Reduced-scale settings for the named experiment.
    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        let cfg = match name {
            "fig-4-2a" => Self { refine: 5, grading: 0.1, ..base },
            "fig-4-2b" => Self { geometry: Geometry::Distorted, refine: 5, grading: 0.1, ..base },
            "fig-1-1" => Self {
                geometry: Geometry::Checkerboard(4),
                refine: 2,
                grading: 0.3,
                degree: 5,
                k_max: 12,
                eps: 1e-10,
                truncation: TruncationMode::Relative,
                ..base
            },
            "fig-6" => Self {
                geometry: Geometry::Checkerboard(4),
                refine: 3,
                grading: 0.2,
                degree: 5,
                k_max: 7,
                eps: 1e-10,
                truncation: TruncationMode::Relative,
                ..base
            },
            _ => return None,
        };
        Some(cfg)
    }

    /// Applies every `key = value` line of `text`; returns how many were set.
    pub fn apply_text(&mut self, text: &str) -> Result<usize, String> {
        let mut count = 0;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            self.set(key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", n + 1))?;
            count += 1;
        }
        Ok(count)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        fn reals(key: &str, v: &str, n: usize) -> Result<Vec<f64>, String> {
            let xs: Vec<f64> = v
                .split([',', ';', ' '])
                .filter(|s| !s.trim().is_empty())
                .map(|s| num(key, s.trim()))
                .collect::<Result<_, _>>()?;
            if xs.len() != n {
                return Err(format!("`{key}` needs {n} numbers, got {}", xs.len()));
            }
            Ok(xs)
        }
        match key {
            "geometry" => self.geometry = Geometry::parse(value)?,
            "interior_point" => {
                let p = reals(key, value, 2)?;
                self.interior_point = [p[0], p[1]];
            }
            "edge_points" => {
                let p = reals(key, value, 8)?;
                self.edge_points = [[p[0], p[1]], [p[2], p[3]], [p[4], p[5]], [p[6], p[7]]];
            }
            "refine" => self.refine = num(key, value)?,
            "grading" => self.grading = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "f" => self.f = num(key, value)?,
            "degree" => self.degree = num(key, value)?,
            "k_max" => self.k_max = num(key, value)?,
            "eps" => self.eps = num(key, value)?,
            "truncation" => {
                self.truncation = match value {
                    "absolute" => TruncationMode::Absolute,
                    "relative" => TruncationMode::Relative,
                    _ => return Err(format!("invalid value `{value}` for `truncation`")),
                }
            }
            "rank_cutoff" => self.rank_cutoff = num(key, value)?,
            "stop_tol" => self.stop_tol = if value == "none" { None } else { Some(num(key, value)?) },
            "samples" => self.samples = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "lemma_trials" => self.lemma_trials = num(key, value)?,
            "span_k_max" => self.span_k_max = num(key, value)?,
            "oned_d" => self.oned_d = num(key, value)?,
            "oned_samples" => self.oned_samples = num(key, value)?,
            "oned_cells" => self.oned_cells = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(format!("theta must lie in (0,1), got {}", self.theta));
        }
        if self.degree < 1 {
            return Err("degree must be at least 1".into());
        }
        if !(self.eps >= 0.0) {
            return Err(format!("eps must be nonnegative, got {}", self.eps));
        }
        if !(self.rank_cutoff > 0.0 && self.rank_cutoff < 1.0) {
            return Err(format!("rank_cutoff must lie in (0,1), got {}", self.rank_cutoff));
        }
        if let Some(t) = self.stop_tol {
            if !(t > 0.0) {
                return Err(format!("stop_tol must be positive, got {t}"));
            }
        }
        if !(self.grading >= 0.0) || !self.f.is_finite() {
            return Err("grading must be nonnegative and f finite".into());
        }
        if self.samples == 0 || self.oned_d == 0 || self.oned_cells == 0 {
            return Err("samples, oned_d and oned_cells must be positive".into());
        }
        self.geometry_spec().validate().map_err(|e| e.to_string())
    }

    pub fn geometry_spec(&self) -> GeometrySpec {
        match self.geometry {
            Geometry::Checkerboard(m) => GeometrySpec::checkerboard(m, self.refine, self.grading),
            Geometry::Distorted => GeometrySpec {
                kind: GeometryKind::DistortedQuad { interior_point: self.interior_point, edge_points: self.edge_points },
                refinement_level: self.refine,
                grading_strength: self.grading,
            },
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "geometry": self.geometry.label(),
            "refine": self.refine,
            "grading": self.grading,
            "theta": self.theta,
            "f": self.f,
            "degree": self.degree,
            "k_max": self.k_max,
            "eps": self.eps,
            "truncation": match self.truncation {
                TruncationMode::Absolute => "absolute",
                TruncationMode::Relative => "relative",
            },
            "rank_cutoff": self.rank_cutoff,
            "stop_tol": self.stop_tol,
            "samples": self.samples,
            "seed": self.seed,
            "lemma_trials": self.lemma_trials,
            "span_k_max": self.span_k_max,
            "oned_d": self.oned_d,
            "oned_samples": self.oned_samples,
            "oned_cells": self.oned_cells,
        });
        if self.geometry == Geometry::Distorted {
            v["interior_point"] = json!(self.interior_point);
            v["edge_points"] = json!(self.edge_points);
        }
        v
    }
}

pub fn usage_keys() -> String {
    let mut s = String::from("config keys (`key = value`, `#` starts a comment):\n");
    for (k, help) in KEYS {
        s.push_str(&format!("  {k:<15} {help}\n"));
    }
    s.push_str(&format!("presets: {}\n", PRESETS.join(", ")));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let mut c = RunConfig::default();
        let n = c
            .apply_text("# header\ngeometry = checkerboard(4)\n\ntheta = 0.25 # inline\ntruncation = relative\nstop_tol = none\n")
            .unwrap();
        assert_eq!(n, 4);
        assert_eq!(c.geometry, Geometry::Checkerboard(4));
        assert_eq!(c.theta, 0.25);
        assert_eq!(c.truncation, TruncationMode::Relative);
        assert_eq!(c.stop_tol, None);
        assert_eq!(c.apply_text("  # only comments\n"), Ok(0));
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("nonsense").is_err());
        assert!(c.apply_text("colour = red").is_err());
        assert!(c.apply_text("theta = abc").is_err());
        assert!(c.apply_text("interior_point = 0.1").is_err());
        c.theta = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn geometry_names() {
        assert_eq!(Geometry::parse("checkerboard"), Ok(Geometry::Checkerboard(2)));
        assert_eq!(Geometry::parse("checkerboard4"), Ok(Geometry::Checkerboard(4)));
        assert_eq!(Geometry::parse("checkerboard:3"), Ok(Geometry::Checkerboard(3)));
        assert_eq!(Geometry::parse("Distorted"), Ok(Geometry::Distorted));
        assert!(Geometry::parse("hexagon").is_err());
        assert!(Geometry::parse("checkerboard(0)").is_err());
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            c.validate().unwrap();
        }
        assert!(RunConfig::preset("fig-9").is_none());
        assert_eq!(RunConfig::preset("fig-4-2b").unwrap().geometry, Geometry::Distorted);
    }
}

//! Run configuration: a flat `key = value` text file, every field
//! overridable from the command line. Kept deliberately diff-able.
//!
//! Validation guards use `!(x > y)` so NaN inputs fail like out-of-range
//! ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use anyhow::{anyhow, bail, Context, Result};
use spikechain::geometry::{CurvatureModel, PolyModel, SplineModel};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryKind {
    /// Symmetric quadratic `h0 + a (s - s*)²` with endpoint matching.
    Quadratic,
    /// Cubic family `h0 + a u² + beta u³`, vertex solved for endpoint match.
    Cubic,
    /// Spline through an `(s, H)` sample table.
    Samples,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub p: f64,
    pub eps_list: Vec<f64>,
    pub geometry: GeometryKind,
    pub b: f64,
    pub h0: f64,
    pub a: f64,
    pub beta: f64,
    pub s_begin: f64,
    pub samples_file: Option<PathBuf>,
    pub r_max: f64,
    pub gs_tol: f64,
    pub kernel_s_min: f64,
    pub kernel_s_max: f64,
    pub kernel_ds: f64,
    pub shoot_tol_factor: f64,
    pub solve_tol_factor: f64,
    pub c_admis: f64,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Check names gating the exit status; empty means all.
    pub checks: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 3.0,
            eps_list: vec![1e-2, 5e-3, 2e-3, 1e-3],
            geometry: GeometryKind::Quadratic,
            b: 4.0,
            h0: 1.0,
            a: 28.0,
            beta: 0.0,
            s_begin: 0.0,
            samples_file: None,
            r_max: 30.0,
            gs_tol: 1e-10,
            kernel_s_min: 2.0,
            kernel_s_max: 40.0,
            kernel_ds: 0.1,
            shoot_tol_factor: 1e-10,
            solve_tol_factor: 1e-12,
            c_admis: 10.0,
            cache_dir: PathBuf::from("cache"),
            out_dir: PathBuf::from("out"),
            checks: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", lineno + 1))?;
            cfg.set(key.trim(), value.trim(), base_dir)
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .with_context(|| format!("{key}: not a number: {value:?}"))
        };
        match key {
            "p" => self.p = num()?,
            "eps" | "eps_list" => {
                self.eps_list = value
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("eps list: {value:?}"))?;
            }
            "geometry" => {
                self.geometry = match value {
                    "quadratic" => GeometryKind::Quadratic,
                    "cubic" => GeometryKind::Cubic,
                    "samples" => GeometryKind::Samples,
                    other => bail!("unknown geometry kind {other:?}"),
                }
            }
            "b" => self.b = num()?,
            "h0" => self.h0 = num()?,
            "a" => self.a = num()?,
            "beta" => self.beta = num()?,
            "s_begin" => self.s_begin = num()?,
            "samples_file" => self.samples_file = Some(base_dir.join(value)),
            "r_max" => self.r_max = num()?,
            "gs_tol" => self.gs_tol = num()?,
            "kernel_s_min" => self.kernel_s_min = num()?,
            "kernel_s_max" => self.kernel_s_max = num()?,
            "kernel_ds" => self.kernel_ds = num()?,
            "shoot_tol_factor" => self.shoot_tol_factor = num()?,
            "solve_tol_factor" => self.solve_tol_factor = num()?,
            "c_admis" => self.c_admis = num()?,
            "cache_dir" => self.cache_dir = base_dir.join(value),
            "out_dir" => self.out_dir = base_dir.join(value),
            "checks" => {
                self.checks = if value == "all" {
                    Vec::new()
                } else {
                    value.split(',').map(|t| t.trim().to_string()).collect()
                }
            }
            other => bail!("unknown configuration key {other:?}"),
        }
        Ok(())
    }

    /// Validation gate: every precondition that must hold before any compute.
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0) {
            bail!("p = {} out of range: the exponent must exceed 2", self.p);
        }
        if self.eps_list.is_empty() {
            bail!("at least one eps value is required");
        }
        let e_inv = (-1.0f64).exp();
        for &eps in &self.eps_list {
            if !(eps > 0.0 && eps < e_inv) {
                bail!("eps = {eps} out of range (0, 1/e)");
            }
        }
        for (name, v) in [
            ("b", self.b),
            ("gs_tol", self.gs_tol),
            ("kernel_ds", self.kernel_ds),
            ("shoot_tol_factor", self.shoot_tol_factor),
            ("solve_tol_factor", self.solve_tol_factor),
            ("c_admis", self.c_admis),
        ] {
            if !(v > 0.0) {
                bail!("{name} = {v} must be positive");
            }
        }
        if !(self.r_max >= 20.0) {
            bail!("r_max = {} must be at least 20", self.r_max);
        }
        if !(self.kernel_s_min >= 2.0 && self.kernel_s_max > self.kernel_s_min) {
            bail!(
                "kernel range [{}, {}] invalid: need 2 <= s_min < s_max",
                self.kernel_s_min,
                self.kernel_s_max
            );
        }
        if self.geometry == GeometryKind::Samples && self.samples_file.is_none() {
            bail!("geometry = samples requires samples_file");
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<CurvatureModel> {
        match self.geometry {
            GeometryKind::Quadratic => Ok(CurvatureModel::Poly(
                PolyModel::new(self.h0, self.a, 0.0, self.b, self.s_begin)
                    .map_err(|e| anyhow!("{e}"))?,
            )),
            GeometryKind::Cubic => Ok(CurvatureModel::Poly(
                PolyModel::new(self.h0, self.a, self.beta, self.b, self.s_begin)
                    .map_err(|e| anyhow!("{e}"))?,
            )),
            GeometryKind::Samples => {
                let path = self.samples_file.as_ref().expect("validated");
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading curvature samples {}", path.display()))?;
                let mut samples = Vec::new();
                for line in text.lines() {
                    let line = line.split('#').next().unwrap_or("").trim();
                    if line.is_empty() {
                        continue;
                    }
                    let mut it = line.split_whitespace();
                    let s = it.next().and_then(|t| t.parse::<f64>().ok());
                    let h = it.next().and_then(|t| t.parse::<f64>().ok());
                    match (s, h) {
                        (Some(s), Some(h)) => samples.push((s, h)),
                        _ => bail!("bad curvature sample row: {line:?}"),
                    }
                }
                Ok(CurvatureModel::Spline(
                    SplineModel::from_samples(&samples).map_err(|e| anyhow!("{e}"))?,
                ))
            }
        }
    }
}

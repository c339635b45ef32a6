use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Grid, MaskSummary, Topology};
use crate::error::{invalid, Error, Result};
use crate::vector::{Vector, MAX_DIM};

/// One scalar per grid node.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&Vector) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("{what}: node {i} holds {}", self.values[i]))),
            None => Ok(()),
        }
    }

    /// Multilinear interpolation at a world point; `None` outside a non-periodic grid.
    pub fn interpolate(&self, x: &Vector) -> Option<f64> {
        let g = &*self.grid;
        let y = g.to_local(x);
        let dim = g.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..dim {
            let n = g.counts()[k];
            let s = (y[k] - g.origin()[k]) / g.h();
            if g.is_torus() {
                let s = s.rem_euclid(n as f64);
                let i = (s.floor() as usize).min(n - 1);
                base[k] = i;
                frac[k] = s - i as f64;
            } else {
                let tol = 1e-9;
                if s < -tol || s > (n - 1) as f64 + tol {
                    return None;
                }
                let s = s.clamp(0.0, (n - 1) as f64);
                let i = (s.floor() as usize).min(n - 2);
                base[k] = i;
                frac[k] = s - i as f64;
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut c = base;
            let mut w = 1.0;
            for k in 0..dim {
                if (corner >> k) & 1 == 1 {
                    c[k] += 1;
                    if g.is_torus() {
                        c[k] %= g.counts()[k];
                    }
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[g.index(c)];
            }
        }
        Some(acc)
    }

    /// Writes `<stem>.bin` (little-endian f64) and `<stem>.json` (header).
    pub fn write_dump(&self, stem: &Path, extra: serde_json::Value) -> Result<(PathBuf, PathBuf)> {
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(&bin)?.write_all(&bytes)?;
        let header = DumpHeader {
            dim: self.grid.dim(),
            counts: self.grid.counts().to_vec(),
            h: self.grid.h(),
            origin: self.grid.origin().to_vec(),
            frame: self.grid.frame()[..self.grid.dim()].iter().map(|v| v[..self.grid.dim()].to_vec()).collect(),
            topology: self.grid.topology().clone(),
            mask: self.grid.mask_summary(),
            value_type: "f64-le".into(),
            layout: "axis-0-fastest".into(),
            extra,
        };
        fs::write(&json, serde_json::to_string_pretty(&header)?)?;
        Ok((bin, json))
    }

    /// Reads the values and header of a dump written by [`GridFunction::write_dump`].
    pub fn read_dump(stem: &Path) -> Result<(DumpHeader, Vec<f64>)> {
        let header: DumpHeader = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
        let bytes = fs::read(stem.with_extension("bin"))?;
        if bytes.len() % 8 != 0 {
            return Err(invalid("dump length is not a multiple of 8"));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let expected: usize = header.counts.iter().product();
        if values.len() != expected {
            return Err(invalid(format!("dump holds {} values, header says {expected}", values.len())));
        }
        Ok((header, values))
    }
}

/// Structured-text header of a grid dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub dim: usize,
    pub counts: Vec<usize>,
    pub h: f64,
    pub origin: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub topology: Topology,
    pub mask: MaskSummary,
    pub value_type: String,
    pub layout: String,
    #[serde(default)]
    pub extra: serde_json::Value,
}

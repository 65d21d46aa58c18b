//! Run configuration: one TOML file with a section per module. Every field
//! has a default, and the whole configuration is validated before any
//! computation starts.

use std::path::{Path, PathBuf};

use anderson_core::verify::CRITERIA;
use anderson_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "ANDERSON_LAB_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: 2, n: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Mollification scale `ε`.
    pub eps: f64,
    pub seeds: Vec<u64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            eps: 1.0 / 16.0,
            seeds: vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub num_eigs: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { num_eigs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodalSection {
    pub delta: f64,
    /// Dyadic radii for the doubling index.
    pub radii: Vec<f64>,
}

impl Default for NodalSection {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            radii: vec![1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcSection {
    /// Eigenfunction index.
    pub k: usize,
    /// Patch centre; the grid minimum of `|u_k|` when absent.
    pub center: Option<[f64; 2]>,
    pub radius: f64,
    pub m: usize,
    pub delta: f64,
}

impl Default for QcSection {
    fn default() -> Self {
        Self {
            k: 1,
            center: None,
            radius: 1.0 / 16.0,
            m: 256,
            delta: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub omega: [f64; 2],
    pub horizon: f64,
    pub modes: usize,
    /// Random coefficient vectors per cutoff in the spectral inequality probe.
    pub trials: usize,
    /// Cutoffs for the probe; the computed eigenvalues when empty.
    pub lambdas: Vec<f64>,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            omega: [0.0, 0.2],
            horizon: 1.0,
            modes: 20,
            trials: 100,
            lambdas: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub criteria: Vec<usize>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            criteria: CRITERIA.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub spectrum: SpectrumSection,
    pub nodal: NodalSection,
    pub qc: QcSection,
    pub control: ControlSection,
    pub verify: VerifySection,
    pub output: Option<PathBuf>,
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every field against the preconditions of the subcommand.
    pub fn validate(&self, subcommand: &str) -> Result<()> {
        let g = &self.grid;
        if !(g.dim == 1 || g.dim == 2) {
            return Err(bad(format!("grid.dim must be 1 or 2, got {}", g.dim)));
        }
        if g.n < 8 || !g.n.is_power_of_two() {
            return Err(bad(format!("grid.n must be a power of two >= 8, got {}", g.n)));
        }
        if !(self.noise.eps > 0.0 && self.noise.eps.is_finite()) {
            return Err(bad(format!("noise.eps must be positive, got {}", self.noise.eps)));
        }
        if self.noise.seeds.is_empty() {
            return Err(bad("noise.seeds must not be empty".into()));
        }
        let cells = g.n.pow(g.dim as u32);
        let m = self.spectrum.num_eigs;
        if m == 0 || m > cells / 4 {
            return Err(bad(format!("spectrum.num_eigs must be in 1..={}, got {m}", cells / 4)));
        }
        if !(0.0..=0.1).contains(&self.nodal.delta) {
            return Err(bad(format!("nodal.delta must be in [0, 0.1], got {}", self.nodal.delta)));
        }
        if self.nodal.radii.iter().any(|r| !(*r > 0.0 && *r < 0.25)) {
            return Err(bad("nodal.radii must lie in (0, 1/4)".into()));
        }
        match subcommand {
            "qc" => self.validate_qc()?,
            "control" => self.validate_control()?,
            "verify" if self.verify.criteria.is_empty() || self.verify.criteria.iter().any(|c| !CRITERIA.contains(c)) => {
                return Err(bad(format!(
                    "verify.criteria must be a non-empty subset of 1..=15, got {:?}",
                    self.verify.criteria
                )));
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_qc(&self) -> Result<()> {
        let q = &self.qc;
        if self.grid.dim != 2 {
            return Err(bad("qc needs grid.dim = 2".into()));
        }
        if q.k == 0 || q.k >= self.spectrum.num_eigs {
            return Err(bad(format!("qc.k must be in 1..{}, got {}", self.spectrum.num_eigs, q.k)));
        }
        if !(q.radius > 0.0 && q.radius <= 0.125) {
            return Err(bad(format!("qc.radius must be in (0, 1/8], got {}", q.radius)));
        }
        if q.m < 64 || !q.m.is_power_of_two() {
            return Err(bad(format!("qc.m must be a power of two >= 64, got {}", q.m)));
        }
        if !(q.delta > 0.0 && q.delta < 1.0) {
            return Err(bad(format!("qc.delta must be in (0, 1), got {}", q.delta)));
        }
        Ok(())
    }

    fn validate_control(&self) -> Result<()> {
        let c = &self.control;
        if self.grid.dim != 1 {
            return Err(bad("control needs grid.dim = 1".into()));
        }
        let [a, b] = c.omega;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(bad(format!("control.omega must satisfy 0 <= a < b <= 1, got {:?}", c.omega)));
        }
        if (b - a) * (self.grid.n as f64) < 4.0 {
            return Err(bad(format!("control.omega {:?} must cover at least 4 grid cells", c.omega)));
        }
        if !(c.horizon > 0.0 && c.horizon.is_finite()) {
            return Err(bad(format!("control.horizon must be positive, got {}", c.horizon)));
        }
        if c.modes == 0 || c.modes > self.spectrum.num_eigs {
            return Err(bad(format!(
                "control.modes must be in 1..={}, got {}",
                self.spectrum.num_eigs, c.modes
            )));
        }
        if c.trials < 100 {
            return Err(bad(format!("control.trials must be at least 100, got {}", c.trials)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_file() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate("spectrum").unwrap();
    }

    #[test]
    fn sections_override_defaults() {
        let c = RunConfig::from_toml("[grid]\ndim = 1\nn = 64\n[noise]\nseeds = [3, 4]\n").unwrap();
        assert_eq!(c.grid, GridSection { dim: 1, n: 64 });
        assert_eq!(c.noise.seeds, vec![3, 4]);
        assert_eq!(c.noise.eps, 1.0 / 16.0);
    }

    #[test]
    fn invalid_fields_rejected() {
        assert!(RunConfig::from_toml("[grid]\nsize = 3\n").is_err());
        let mut c = RunConfig::default();
        c.grid.n = 100;
        assert!(c.validate("spectrum").is_err());
        let c = RunConfig::default();
        assert!(c.validate("control").is_err());
        let mut c = RunConfig::default();
        c.qc.k = 0;
        assert!(c.validate("qc").is_err());
        let mut c = RunConfig::default();
        c.verify.criteria = vec![16];
        assert!(c.validate("verify").is_err());
    }
}

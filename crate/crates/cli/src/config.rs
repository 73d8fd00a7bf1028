//! TOML run configuration: one flat table per concern, unknown keys rejected.
//!
//! ```toml
//! [system]
//! n_b = 2
//! g_bc = 0.1
//! n = 3            # or omega_c = 2.98
//!
//! [numerics]
//! modes_battery = 12
//! ```

use std::path::Path;

use qbat::basis::ParitySector;
use qbat::dynamics::{SystemConfig, DEFAULT_MODES};
use qbat::experiments::{linspace, SweptParameter, TuneOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub resonance: ResonanceSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_b: Option<usize>,
    pub g_b: Option<f64>,
    pub g_bc: Option<f64>,
    pub omega_b: Option<f64>,
    pub omega_c: Option<f64>,
    /// Targeted battery excitation; fixes `omega_c` at its resonance when
    /// `omega_c` is absent.
    pub n: Option<usize>,
    pub charger_level: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub modes_battery: Option<usize>,
    pub modes_charger: Option<usize>,
    pub sector: Option<ParitySector>,
    /// End of the time series; defaults to 1.5 charging periods.
    pub t_end: Option<f64>,
    pub points: Option<usize>,
    pub population_levels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub parameter: Option<SweptParameter>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub values: Option<Vec<f64>>,
    pub peak_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceSection {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub tolerance: Option<f64>,
    pub threshold: Option<f64>,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Physical system after defaulting; `omega_c` may still be pending a
/// resonance search when only `n` was given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub system: SystemConfig,
    pub n: Option<usize>,
    pub omega_c_given: bool,
}

impl RunConfig {
    /// Fills defaults and checks ranges. Returns the system and any warnings.
    /// With `needs_omega` false, a missing `omega_c` is left as NaN for the
    /// caller to fill.
    pub fn resolve_system(&self, needs_omega: bool) -> Result<(Resolved, Vec<String>), CliError> {
        let s = &self.system;
        let nb = s.n_b.ok_or_else(|| missing("system.n_b"))?;
        let g_bc = s.g_bc.ok_or_else(|| missing("system.g_bc"))?;
        if needs_omega && s.omega_c.is_none() && s.n.is_none() {
            return Err(CliError::Config("set system.omega_c or system.n".into()));
        }
        let mut c = SystemConfig::new(nb, s.omega_c.unwrap_or(f64::NAN), s.g_b.unwrap_or(0.0), g_bc);
        c.omega_b = s.omega_b.unwrap_or(1.0);
        c.charger_level = s.charger_level.unwrap_or(1);
        let n = &self.numerics;
        c.modes_battery = n.modes_battery.unwrap_or(DEFAULT_MODES);
        c.modes_charger = n.modes_charger.unwrap_or(DEFAULT_MODES);
        c.sector = n.sector.unwrap_or(ParitySector::Odd);

        for (name, v) in [("system.g_b", c.g_b), ("system.g_bc", c.g_bc), ("system.omega_b", c.omega_b)] {
            if !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be finite")));
            }
        }
        if !(c.omega_b > 0.0) {
            return Err(CliError::Config("system.omega_b must be positive".into()));
        }
        if let Some(w) = s.omega_c {
            if !(w.is_finite() && w > 0.0) {
                return Err(CliError::Config(format!("system.omega_c must be positive, got {w}")));
            }
        }
        if c.charger_level == 0 || c.charger_level >= c.modes_charger {
            return Err(CliError::Config(format!(
                "system.charger_level must lie in 1..{} (the retained charger modes)",
                c.modes_charger
            )));
        }
        if s.n == Some(0) {
            return Err(CliError::Config("system.n must be at least 1".into()));
        }
        c.battery().map_err(config_err)?;
        if let Some(w) = s.omega_c {
            c.omega_c = w;
            c.charger().map_err(config_err)?;
        }
        if let Some(t) = n.t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config("numerics.t_end must be positive".into()));
            }
        }
        if n.points == Some(0) {
            return Err(CliError::Config("numerics.points must be positive".into()));
        }

        let mut warnings = Vec::new();
        if c.g_bc < 0.0 {
            warnings.push(format!(
                "g_BC = {} is attractive; runs proceed but no reference results cover this regime",
                c.g_bc
            ));
        }
        let target = s.n.or_else(|| s.omega_c.map(|w| (w * c.charger_level as f64 / c.omega_b).round() as usize));
        if let Some(k) = target {
            if c.modes_battery < k + 4 {
                warnings.push(format!(
                    "battery cutoff of {} modes is below n + 4 = {} for the targeted excitation; results may be unconverged",
                    c.modes_battery,
                    k + 4
                ));
            }
        }
        Ok((Resolved { system: c, n: s.n, omega_c_given: s.omega_c.is_some() }, warnings))
    }

    pub fn time_points(&self) -> usize {
        self.numerics.points.unwrap_or(401)
    }

    pub fn population_levels(&self) -> usize {
        self.numerics.population_levels.unwrap_or(6)
    }

    pub fn scan_grid(&self) -> Result<(SweptParameter, Vec<f64>), CliError> {
        let s = &self.scan;
        let parameter = s.parameter.unwrap_or(SweptParameter::OmegaC);
        let values = match (&s.values, s.start, s.stop) {
            (Some(v), None, None) => v.clone(),
            (None, Some(a), Some(b)) => linspace(a, b, s.points.unwrap_or(101)),
            (Some(_), _, _) => return Err(CliError::Config("give scan.values or scan.start/stop, not both".into())),
            _ => return Err(CliError::Config("scan needs scan.values or both scan.start and scan.stop".into())),
        };
        qbat::experiments::check_grid(&values).map_err(config_err)?;
        Ok((parameter, values))
    }

    pub fn peak_threshold(&self) -> f64 {
        self.scan.peak_threshold.unwrap_or(0.5)
    }

    pub fn tune_options(&self) -> Result<TuneOptions, CliError> {
        let mut t = TuneOptions::default();
        if let Some(tol) = self.resonance.tolerance {
            if !(tol > 0.0) {
                return Err(CliError::Config("resonance.tolerance must be positive".into()));
            }
            t.tolerance = tol;
        }
        if let Some(th) = self.resonance.threshold {
            t.threshold = th;
        }
        Ok(t)
    }

    /// Resonance window: explicit bounds, else `n ± 0.5` in units of the
    /// charger quantum.
    pub fn resonance_window(&self, r: &Resolved) -> Result<(f64, f64), CliError> {
        let c = &r.system;
        let (lo, hi) = match (self.resonance.lo, self.resonance.hi, r.n) {
            (Some(lo), Some(hi), _) => (lo, hi),
            (None, None, Some(n)) => {
                let q = c.omega_b / c.charger_level as f64;
                (q * (n as f64 - 0.5), q * (n as f64 + 0.5))
            }
            _ => return Err(CliError::Config("set resonance.lo and resonance.hi, or system.n".into())),
        };
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::Config(format!("resonance window [{lo}, {hi}] is invalid")));
        }
        Ok((lo, hi))
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

fn config_err(e: qbat::Error) -> CliError {
    CliError::Config(e.to_string())
}

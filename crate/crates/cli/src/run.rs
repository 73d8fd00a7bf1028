//! Subcommand bodies and figure presets. Each run writes into its own
//! directory: CSV tables, plot scripts and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use qbat::dynamics::{ChargingSystem, SystemConfig, DEFAULT_MODES};
use qbat::experiments::{
    self, linspace, population_series, resonance_peaks, resonant_scan, series_end, spectrum_scan, ResonantScan,
    ScanConfig, SweptParameter, TuneOptions,
};
use qbat::io::{self, fmt_f64, plot_script, Curve, Manifest, Table};
use qbat::tlm;
use serde_json::{json, Value};

use crate::config::{Resolved, RunConfig};
use crate::CliError;

fn run_dir(out: &Path, name: &str) -> Result<PathBuf, CliError> {
    let dir = out.join(name);
    fs::create_dir_all(&dir).map_err(qbat::Error::from)?;
    Ok(dir)
}

/// Collects outputs for the manifest as files are written.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Outputs { dir, files: Vec::new() }
    }

    fn table(&mut self, file: &str, t: &Table) -> Result<(), CliError> {
        t.write_file(&self.dir.join(file))?;
        self.files.push(file.to_string());
        Ok(())
    }

    fn script(&mut self, file: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(file), text).map_err(qbat::Error::from)?;
        self.files.push(file.to_string());
        Ok(())
    }

    fn finish(mut self, mut manifest: Manifest, diagnostics: Value) -> Result<PathBuf, CliError> {
        self.files.push("manifest.json".into());
        manifest.outputs = self.files;
        manifest.diagnostics = diagnostics;
        manifest.write_file(&self.dir.join("manifest.json"))?;
        Ok(self.dir)
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

/// Fixes `omega_c` from the targeted excitation when it was not given.
fn resolve_omega(cfg: &RunConfig, r: &Resolved) -> Result<SystemConfig, CliError> {
    let mut c = r.system;
    if r.omega_c_given {
        return Ok(c);
    }
    let n = r.n.ok_or_else(|| CliError::Config("set system.omega_c or system.n".into()))?;
    if c.g_b == 0.0 && c.charger_level == 1 {
        c.omega_c = tlm::resonance_solve_general(n, c.num_particles, c.g_bc, c.omega_b)?;
    } else {
        let (lo, hi) = cfg.resonance_window(r)?;
        c.omega_c = experiments::fine_tune_resonance(&c, lo, hi, &cfg.tune_options()?)?.omega_c;
    }
    Ok(c)
}

/// Time series (with two-level overlay columns when they apply) and
/// populations for one system. Returns diagnostics.
fn write_series(
    out: &mut Outputs,
    stem: &str,
    c: &SystemConfig,
    overlay_n: Option<usize>,
    t_end: Option<f64>,
    points: usize,
    levels: usize,
) -> Result<Value, CliError> {
    let sys = ChargingSystem::build(*c)?;
    let summary = match sys.charging_summary(None) {
        Ok(s) => serde_json::to_value(s).map_err(qbat::Error::from)?,
        Err(qbat::Error::NoTransfer { .. }) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let end = match t_end {
        Some(t) => t,
        None => series_end(&sys)?,
    };
    let times = linspace(0.0, end, points.max(2));
    let series = sys.time_series(&times)?;
    let mut table = io::series_table(&series);
    let mut curves = vec![Curve::new("W_B", "stored work"), Curve::new("ergotropy", "ergotropy")];
    if let (Some(n), 1) = (overlay_n, c.charger_level) {
        let p = tlm::tlm_params(n, c.num_particles, c.g_bc, c.omega_b, c.omega_c)?;
        table.add_column("W_B_tlm", times.iter().map(|&t| fmt_f64(tlm::wb_tlm(&p, t))).collect())?;
        table.add_column("ergotropy_tlm", times.iter().map(|&t| fmt_f64(tlm::ergotropy_tlm(&p, t))).collect())?;
        curves.push(Curve::new("W_B_tlm", "stored work (two-level)"));
        curves.push(Curve::new("ergotropy_tlm", "ergotropy (two-level)"));
    }
    out.table(&format!("{stem}.csv"), &table)?;
    out.script(&format!("{stem}.py"), &plot_script(&format!("{stem}.csv"), "t", &curves, stem, "energy"))?;

    let pops = population_series(&sys, &times, levels)?;
    let k = pops.populations.first().map_or(0, Vec::len);
    let mut pc: Vec<Curve> = (0..k).map(|i| Curve::new(&format!("p_{i}"), &format!("p_{i}"))).collect();
    pc.extend((0..k).map(|i| Curve::new(&format!("lambda_{i}"), &format!("λ_{i}"))));
    let pstem = format!("{stem}_populations");
    out.table(&format!("{pstem}.csv"), &io::population_table(&pops))?;
    out.script(&format!("{pstem}.py"), &plot_script(&format!("{pstem}.csv"), "t", &pc, &pstem, "probability"))?;

    Ok(json!({
        "omega_c": c.omega_c,
        "dim": sys.basis().dim(),
        "propagator_rank": sys.propagator().rank(),
        "qsl_num": sys.qsl_numeric()?,
        "summary": summary,
    }))
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let (r, warnings) = cfg.resolve_system(true)?;
    warn_all(&warnings);
    let c = resolve_omega(cfg, &r)?;
    let mut o = Outputs::new(run_dir(out, "simulate")?);
    let overlay = if c.g_b == 0.0 { r.n } else { None };
    let diag = write_series(&mut o, "series", &c, overlay, cfg.numerics.t_end, cfg.time_points(), cfg.population_levels())?;
    let manifest = Manifest::new("simulate", &json!({ "input": cfg, "resolved": c }))?;
    o.finish(manifest, json!({ "run": diag, "warnings": warnings }))
}

pub fn scan(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let (r, warnings) = cfg.resolve_system(false)?;
    warn_all(&warnings);
    let (parameter, values) = cfg.scan_grid()?;
    let mut base = r.system;
    if base.omega_c.is_nan() {
        base.omega_c = match parameter {
            SweptParameter::OmegaC | SweptParameter::ChargerWork => 1.0,
            _ => resolve_omega(cfg, &r)?.omega_c,
        };
    }
    let scan = ScanConfig { base, parameter, values };
    let points = spectrum_scan(&scan)?;
    let mut o = Outputs::new(run_dir(out, "scan")?);
    let name = parameter.name();
    o.table("spectrum.csv", &io::spectrum_table(&points, name))?;
    o.script(
        "spectrum.py",
        &plot_script(
            "spectrum.csv",
            name,
            &[Curve::new("ratio_w", "W_B(t_max)/W_C(0)"), Curve::new("ratio_e", "ergotropy/W_C(0)")],
            "transfer spectrum",
            "ratio",
        ),
    )?;
    let peaks: Vec<Value> = experiments::grid_peaks(&points, cfg.peak_threshold())
        .into_iter()
        .map(|i| json!({ "value": points[i].value, "ratio_w": points[i].ratio_w }))
        .collect();
    let failures = points.iter().filter(|p| p.error.is_some()).count();
    let manifest = Manifest::new("scan", &json!({ "input": cfg, "resolved": scan }))?;
    o.finish(manifest, json!({ "grid_peaks": peaks, "failed_points": failures, "warnings": warnings }))
}

pub fn resonance(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let (r, warnings) = cfg.resolve_system(false)?;
    warn_all(&warnings);
    let (lo, hi) = cfg.resonance_window(&r)?;
    let mut c = r.system;
    if c.omega_c.is_nan() {
        c.omega_c = 0.5 * (lo + hi);
    }
    let tune = cfg.tune_options()?;
    let peaks = resonance_peaks(&c, lo, hi, &tune)?;
    let mut o = Outputs::new(run_dir(out, "resonance")?);
    o.table("peaks.csv", &io::peaks_table(&peaks))?;
    let manifest = Manifest::new("resonance", &json!({ "input": cfg, "resolved": c, "window": [lo, hi], "tune": tune }))?;
    let best = peaks.iter().map(|p| p.ratio).fold(0.0f64, f64::max);
    let dir = o.finish(manifest, json!({ "peaks": peaks.len(), "warnings": warnings }))?;
    if peaks.is_empty() {
        return Err(qbat::Error::NoResonance { lo, hi, best_ratio: best }.into());
    }
    Ok(dir)
}

pub fn tlm(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let (r, warnings) = cfg.resolve_system(false)?;
    warn_all(&warnings);
    let n = r.n.ok_or_else(|| CliError::Config("the two-level model needs system.n".into()))?;
    let c = r.system;
    let omega_c = if r.omega_c_given {
        c.omega_c
    } else {
        tlm::resonance_solve_general(n, c.num_particles, c.g_bc, c.omega_b)?
    };
    let p = tlm::tlm_params(n, c.num_particles, c.g_bc, c.omega_b, omega_c)?;
    let qsl = tlm::qsl_tlm(&p);
    let qsl_f = tlm::qsl_fermionic(c.num_particles, n, c.g_bc, c.omega_b, omega_c)?;
    let mut t = Table::new(
        "tlm",
        [
            "n", "N_B", "g_BC", "omega_b", "omega_c", "delta", "coupling", "rabi", "contrast", "I_n", "qsl", "power",
            "qsl_fermionic",
        ],
    );
    let mut row = vec![n.to_string(), c.num_particles.to_string()];
    row.extend(
        [c.g_bc, c.omega_b, omega_c, p.delta, p.coupling, p.rabi, p.contrast(), p.overlaps.i_n, qsl, tlm::power_tlm(&p), qsl_f]
            .into_iter()
            .map(fmt_f64),
    );
    t.push(row)?;
    let end = cfg.numerics.t_end.unwrap_or(if qsl.is_finite() { 3.0 * qsl } else { 1.0 });
    let times = linspace(0.0, end, cfg.time_points().max(2));
    let mut s = Table::new("tlm_series", ["t", "W_B_tlm", "ergotropy_tlm"]);
    for &time in &times {
        s.push(vec![fmt_f64(time), fmt_f64(tlm::wb_tlm(&p, time)), fmt_f64(tlm::ergotropy_tlm(&p, time))])?;
    }
    let mut o = Outputs::new(run_dir(out, "tlm")?);
    o.table("tlm.csv", &t)?;
    o.table("tlm_series.csv", &s)?;
    o.script(
        "tlm_series.py",
        &plot_script(
            "tlm_series.csv",
            "t",
            &[Curve::new("W_B_tlm", "stored work"), Curve::new("ergotropy_tlm", "ergotropy")],
            "two-level model",
            "energy",
        ),
    )?;
    println!("{}", serde_json::to_string(&p).map_err(qbat::Error::from)?);
    let manifest = Manifest::new("tlm", &json!({ "input": cfg, "omega_c": omega_c }))?;
    o.finish(manifest, json!({ "warnings": warnings }))
}

/// Overrides accepted by `reproduce`.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct Preset {
    pub modes_battery: Option<usize>,
    pub modes_charger: Option<usize>,
    pub g_b_values: Vec<f64>,
    pub particle_counts: Vec<usize>,
}

impl Preset {
    fn system(&self, nb: usize, omega_c: f64, g_b: f64, g_bc: f64) -> SystemConfig {
        SystemConfig::new(nb, omega_c, g_b, g_bc).with_modes(
            self.modes_battery.unwrap_or(DEFAULT_MODES),
            self.modes_charger.unwrap_or(DEFAULT_MODES),
        )
    }

    fn particles(&self, default: &[usize]) -> Vec<usize> {
        if self.particle_counts.is_empty() {
            default.to_vec()
        } else {
            self.particle_counts.clone()
        }
    }

    fn g_b(&self, default: &[f64]) -> Vec<f64> {
        if self.g_b_values.is_empty() {
            default.to_vec()
        } else {
            self.g_b_values.clone()
        }
    }

    fn check(&self) -> Result<(), CliError> {
        for m in [self.modes_battery, self.modes_charger].into_iter().flatten() {
            if m < 2 {
                return Err(CliError::Config("cutoffs must be at least 2".into()));
            }
        }
        if self.particle_counts.iter().any(|&n| n == 0) {
            return Err(CliError::Config("battery sizes must be positive".into()));
        }
        Ok(())
    }

    fn cutoff_warnings(&self, max_n: usize) -> Vec<String> {
        let m = self.modes_battery.unwrap_or(DEFAULT_MODES);
        if m < max_n + 4 {
            vec![format!("battery cutoff of {m} modes is below n + 4 = {} for n = {max_n}", max_n + 4)]
        } else {
            Vec::new()
        }
    }
}

pub const FIGURES: [&str; 11] =
    ["fig2a", "fig2b", "fig2g", "fig3a", "fig3b", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

pub fn reproduce(figure: &str, preset: &Preset, out: &Path) -> Result<PathBuf, CliError> {
    if !FIGURES.contains(&figure) {
        return Err(CliError::Config(format!("unknown figure `{figure}`; expected one of {}", FIGURES.join(", "))));
    }
    preset.check()?;
    let mut o = Outputs::new(run_dir(out, figure)?);
    let tune = TuneOptions::default();
    let (config, diag, warnings): (Value, Value, Vec<String>) = match figure {
        "fig2a" | "fig2b" | "fig9" => {
            let (n, g_bc, nb) = match figure {
                "fig2a" => (1, 0.1, 2),
                "fig2b" => (3, 0.1, 2),
                _ => (5, 1.4, 2),
            };
            let omega_c = if figure == "fig2a" { 1.0 } else { tlm::resonance_solve(n, nb, g_bc)? };
            let c = preset.system(nb, omega_c, 0.0, g_bc);
            let warnings = preset.cutoff_warnings(n);
            warn_all(&warnings);
            let d = write_series(&mut o, "series", &c, Some(n), None, 601, 6)?;
            (json!({ "system": c, "n": n }), d, warnings)
        }
        "fig2g" => {
            let omegas = linspace(0.5, 7.5, 701);
            let mut d = serde_json::Map::new();
            for nb in preset.particles(&[1, 2]) {
                let scan = ScanConfig {
                    base: preset.system(nb, 1.0, 0.0, 0.1),
                    parameter: SweptParameter::OmegaC,
                    values: omegas.clone(),
                };
                let pts = spectrum_scan(&scan)?;
                let stem = format!("spectrum_N{nb}");
                o.table(&format!("{stem}.csv"), &io::spectrum_table(&pts, "omega_c"))?;
                o.script(
                    &format!("{stem}.py"),
                    &plot_script(
                        &format!("{stem}.csv"),
                        "omega_c",
                        &[Curve::new("ratio_w", "W_B/W_C(0)"), Curve::new("ratio_e", "ergotropy/W_C(0)")],
                        &stem,
                        "ratio",
                    ),
                )?;
                let peaks: Vec<f64> = experiments::grid_peaks(&pts, 0.5).into_iter().map(|i| pts[i].omega_c).collect();
                d.insert(stem, json!({ "grid_peaks": peaks }));
            }
            let w = preset.cutoff_warnings(7);
            warn_all(&w);
            (json!({ "omega_c": [0.5, 7.5, 701], "g_bc": 0.1 }), Value::Object(d), w)
        }
        "fig3a" | "fig3b" | "fig5" | "fig6" | "fig8" => {
            let (excitations, particles, g_b_values, g_bc_values): (Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>) =
                match figure {
                    "fig3a" => (vec![5], preset.particles(&[1, 2, 3]), vec![0.0], linspace(0.02, 0.2, 10)),
                    "fig3b" => (vec![1, 3, 5, 7, 9], preset.particles(&[1, 2, 3]), vec![0.0], vec![0.1]),
                    "fig5" => (vec![3, 5, 7, 9], preset.particles(&[1, 2, 3]), vec![0.0], linspace(0.05, 0.4, 8)),
                    "fig6" => (vec![5], preset.particles(&[1, 2, 3]), vec![0.0], linspace(0.5, 1.4, 10)),
                    _ => (vec![1, 3, 5], preset.particles(&[2, 3]), preset.g_b(&[-0.5, 0.0, 0.5]), vec![0.1]),
                };
            let mut g_b_values = g_b_values;
            g_b_values.sort_by(f64::total_cmp);
            g_b_values.dedup();
            let scan = ResonantScan {
                base: preset.system(1, 1.0, 0.0, 0.1),
                excitations: excitations.clone(),
                particle_counts: particles,
                g_b_values,
                g_bc_values,
                tune,
            };
            let w = preset.cutoff_warnings(*excitations.iter().max().unwrap_or(&1));
            warn_all(&w);
            let rows = resonant_scan(&scan)?;
            o.table("resonant.csv", &io::resonant_table(&rows))?;
            let x = if figure == "fig3b" || figure == "fig8" { "w_c" } else { "g_BC" };
            let (curves, ylabel) = if figure == "fig5" {
                (vec![Curve::new("w_irr", "W_irr(t_max)")], "irreversible work")
            } else {
                (vec![Curve::new("power_ed", "ED"), Curve::new("power_tlm", "two-level")], "power")
            };
            o.script("resonant.py", &plot_script("resonant.csv", x, &curves, figure, ylabel))?;
            let failures = rows.iter().filter(|r| r.error.is_some()).count();
            (serde_json::to_value(&scan).map_err(qbat::Error::from)?, json!({ "failed_rows": failures }), w)
        }
        "fig4" => {
            let mut systems = Vec::new();
            for nb in preset.particles(&[1, 2, 3]) {
                systems.push(preset.system(nb, tlm::resonance_solve(5, nb, 0.1)?, 0.0, 0.1));
            }
            let t_end = match systems.first() {
                Some(c) => series_end(&ChargingSystem::build(*c)?)?,
                None => 1.0,
            };
            let mut d = serde_json::Map::new();
            for c in &systems {
                let stem = format!("series_N{}", c.num_particles);
                let v = write_series(&mut o, &stem, c, None, Some(t_end), 601, 6)?;
                d.insert(stem, v);
            }
            let w = preset.cutoff_warnings(5);
            warn_all(&w);
            (json!({ "systems": systems, "t_end": t_end }), Value::Object(d), w)
        }
        "fig7" => {
            let mut d = serde_json::Map::new();
            for nb in preset.particles(&[1, 2]) {
                for g_b in preset.g_b(&[-0.5, 0.0, 0.5, 3.0]) {
                    for n in [1usize, 3, 5, 7] {
                        let (lo, hi) = (n as f64 - 0.5, n as f64 + 0.5);
                        let base = preset.system(nb, n as f64, g_b, 0.1);
                        let scan = ScanConfig { base, parameter: SweptParameter::OmegaC, values: linspace(lo, hi, 41) };
                        let pts = spectrum_scan(&scan)?;
                        let peaks = resonance_peaks(&base, lo, hi, &tune)?;
                        let stem = format!("N{nb}_gB{g_b}_n{n}");
                        o.table(&format!("spectrum_{stem}.csv"), &io::spectrum_table(&pts, "omega_c"))?;
                        o.table(&format!("peaks_{stem}.csv"), &io::peaks_table(&peaks))?;
                        d.insert(stem, json!({ "peaks": peaks.iter().map(|p| p.omega_c).collect::<Vec<_>>() }));
                    }
                }
            }
            let w = preset.cutoff_warnings(7);
            warn_all(&w);
            (json!({ "g_bc": 0.1, "windows": [1, 3, 5, 7], "points": 41, "tune": tune }), Value::Object(d), w)
        }
        _ => unreachable!("figure ids are checked above"),
    };
    let manifest = Manifest::new(&format!("reproduce {figure}"), &json!({ "preset": preset, "config": config }))?;
    o.finish(manifest, json!({ "run": diag, "warnings": warnings }))
}

//! Parameter scans, resonance search and the resonant operating points
//! behind the power and irreversible-work tables.
//!
//! Every scan point is an independent job on the rayon pool; results come
//! back in grid order, and a failing point is recorded rather than aborting
//! the scan.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{CompositeBasis, Parity};
use crate::dynamics::{initial_state, ChargingSystem, SystemConfig};
use crate::hamiltonian::{assemble_hint, battery_hamiltonian, BatteryHamiltonian};
use crate::thermo::{self, ChargingSummary};
use crate::tlm;
use crate::{Error, Result};

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Rejects empty, non-finite or non-increasing grids.
pub fn check_grid(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("scan grid is empty".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("scan grid contains a non-finite value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("scan grid must be strictly ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    OmegaC,
    GBc,
    /// Initial charger energy; sets `ω_C = W / charger_level`.
    ChargerWork,
    GB,
}

impl SweptParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::OmegaC => "omega_c",
            SweptParameter::GBc => "g_bc",
            SweptParameter::ChargerWork => "w_c",
            SweptParameter::GB => "g_b",
        }
    }

    fn apply(self, base: &SystemConfig, value: f64) -> SystemConfig {
        let mut c = *base;
        match self {
            SweptParameter::OmegaC => c.omega_c = value,
            SweptParameter::GBc => c.g_bc = value,
            SweptParameter::ChargerWork => c.omega_c = value / c.charger_level.max(1) as f64,
            SweptParameter::GB => c.g_b = value,
        }
        c
    }
}

/// One swept parameter over a grid, everything else fixed by `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub base: SystemConfig,
    pub parameter: SweptParameter,
    pub values: Vec<f64>,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.values)?;
        self.base.battery()?;
        for c in self.configs() {
            c.charger()?;
        }
        Ok(())
    }

    pub fn configs(&self) -> Vec<SystemConfig> {
        self.values.iter().map(|&v| self.parameter.apply(&self.base, v)).collect()
    }
}

/// Charging summary at the first stored-work maximum; when the transfer
/// stays below the detection threshold, the summary is taken at the largest
/// stored work seen in the search window instead.
pub fn transfer_summary(sys: &ChargingSystem) -> Result<ChargingSummary> {
    match sys.charging_summary(None) {
        Err(Error::NoTransfer { horizon, .. }) if horizon.is_finite() => {
            let times = linspace(0.0, horizon, 4000);
            let w = sys.stored_work_batch(&times);
            let k = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
            sys.summary_at(times[k])
        }
        Err(Error::NoTransfer { .. }) => sys.summary_at(0.0),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// Value of the swept parameter.
    pub value: f64,
    pub omega_c: f64,
    pub w_c: f64,
    /// `W_B(t_max) / W_C(0)`.
    pub ratio_w: f64,
    /// Ergotropy at `t_max` over `W_C(0)`.
    pub ratio_e: f64,
    pub t_max: f64,
    pub error: Option<String>,
}

/// Full ED pipeline at each grid point. Only an invalid scan definition is an
/// error; per-point failures land in [`SpectrumPoint::error`].
pub fn spectrum_scan(scan: &ScanConfig) -> Result<Vec<SpectrumPoint>> {
    scan.validate()?;
    let shared = match scan.parameter {
        SweptParameter::GB => None,
        _ => Some(Arc::new(battery_hamiltonian(&scan.base.battery()?, scan.base.g_b)?)),
    };
    let configs = scan.configs();
    Ok(configs
        .par_iter()
        .zip(scan.values.par_iter())
        .map(|(cfg, &value)| {
            let w_c = cfg.initial_charger_work();
            let run = || -> Result<ChargingSummary> {
                let sys = match &shared {
                    Some(b) => ChargingSystem::with_battery(*cfg, Arc::clone(b))?,
                    None => ChargingSystem::build(*cfg)?,
                };
                transfer_summary(&sys)
            };
            match run() {
                Ok(s) => SpectrumPoint {
                    value,
                    omega_c: cfg.omega_c,
                    w_c,
                    ratio_w: s.w_max / w_c,
                    ratio_e: s.ergotropy_at_t_max / w_c,
                    t_max: s.t_max,
                    error: None,
                },
                Err(e) => SpectrumPoint {
                    value,
                    omega_c: cfg.omega_c,
                    w_c,
                    ratio_w: f64::NAN,
                    ratio_e: f64::NAN,
                    t_max: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Indices of grid-local maxima of `ratio_w` above `threshold`. Plateaus
/// report their first point.
pub fn grid_peaks(points: &[SpectrumPoint], threshold: f64) -> Vec<usize> {
    let r: Vec<f64> = points.iter().map(|p| if p.ratio_w.is_nan() { f64::NEG_INFINITY } else { p.ratio_w }).collect();
    (0..r.len())
        .filter(|&i| {
            r[i] > threshold
                && (i == 0 || r[i] > r[i - 1])
                && (i + 1 == r.len() || r[i] >= r[i + 1])
        })
        .collect()
}

/// A group of degenerate battery levels that the charger can feed by
/// releasing `drop` quanta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    /// Battery excitation energy above the ground state.
    pub gap: f64,
    pub drop: usize,
    /// Indices into the battery spectrum.
    pub levels: Vec<usize>,
}

impl Channel {
    /// Charger frequency at which the decoupled spectra are degenerate.
    pub fn bare_omega(&self) -> f64 {
        self.gap / self.drop as f64
    }
}

/// Degeneracies between the decoupled battery and charger spectra with bare
/// frequency in `[lo, hi]`, restricted to parity-allowed transitions.
pub fn decoupled_channels(battery: &BatteryHamiltonian, charger_level: usize, lo: f64, hi: f64) -> Vec<Channel> {
    let e = battery.eigenvalues();
    let e0 = battery.ground_energy();
    let p0 = battery.eigenstate_parity(0);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 1..e.len() {
        match clusters.last_mut() {
            Some(c) if (e[k] - e[c[0]]).abs() <= 1e-8 * e[k].abs().max(1.0) => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    let mut out = Vec::new();
    for drop in 1..=charger_level {
        let needed = p0.combine(Parity::from_quanta(drop));
        for c in &clusters {
            let gap = e[c[0]] - e0;
            let omega = gap / drop as f64;
            if omega < lo || omega > hi {
                continue;
            }
            let levels: Vec<usize> = c.iter().copied().filter(|&k| battery.eigenstate_parity(k) == needed).collect();
            if !levels.is_empty() {
                out.push(Channel { gap, drop, levels });
            }
        }
    }
    out.sort_by(|a, b| a.bare_omega().total_cmp(&b.bare_omega()));
    out
}

/// Two-level reduction of one channel at a given charger frequency: the
/// initial product state against the brightest combination of the channel's
/// levels with the charger `drop` quanta lower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub omega_c: f64,
    /// Initial minus final diagonal energy.
    pub delta: f64,
    /// Magnitude of the off-diagonal element.
    pub coupling: f64,
}

impl ChannelModel {
    pub fn qsl(&self) -> f64 {
        if self.coupling == 0.0 {
            f64::INFINITY
        } else {
            PI / (2.0 * self.coupling)
        }
    }
}

pub fn channel_model(
    config: &SystemConfig,
    battery: &BatteryHamiltonian,
    channel: &Channel,
) -> Result<ChannelModel> {
    let level = config.charger_level;
    if channel.drop == 0 || channel.drop > level {
        return Err(Error::InvalidParameter(format!("charger cannot release {} quanta from level {level}", channel.drop)));
    }
    let basis = CompositeBasis::build(&config.battery()?, &config.charger()?, config.sector)?;
    let hint = assemble_hint(&basis, config.g_bc);
    let (psi0, _) = initial_state(&basis, battery, level)?.split();
    let h_psi0 = hint.dot(&psi0);
    let target = level - channel.drop;
    let mut bright = Array1::<f64>::zeros(basis.dim());
    let mut norm2 = 0.0;
    let mut fallback = None;
    for &k in &channel.levels {
        let phi = embed(&basis, battery, k, target)?;
        let v = phi.dot(&h_psi0);
        bright.scaled_add(v, &phi);
        norm2 += v * v;
        fallback.get_or_insert(phi);
    }
    let coupling = norm2.sqrt();
    if coupling > 0.0 {
        bright /= coupling;
    } else if let Some(phi) = fallback {
        bright = phi;
    }
    let w = config.omega_c;
    let e_init = battery.ground_energy() + (level as f64 + 0.5) * w + psi0.dot(&h_psi0);
    let e_final =
        battery.eigenvalues()[channel.levels[0]] + (target as f64 + 0.5) * w + bright.dot(&hint.dot(&bright));
    Ok(ChannelModel { omega_c: w, delta: e_init - e_final, coupling })
}

fn embed(basis: &CompositeBasis, battery: &BatteryHamiltonian, level: usize, charger_mode: usize) -> Result<Array1<f64>> {
    let ic = basis
        .charger_index_of_mode(charger_mode)
        .ok_or_else(|| Error::InvalidParameter(format!("charger mode {charger_mode} not retained")))?;
    let mut out = Array1::<f64>::zeros(basis.dim());
    let mut weight = 0.0;
    for (ib, &v) in battery.eigenvector(level).iter().enumerate() {
        if let Some(r) = basis.index_of(ib, ic) {
            out[r] = v;
            weight += v * v;
        }
    }
    if weight < 1.0 - 1e-10 {
        return Err(Error::SectorWeight { weight });
    }
    Ok(out)
}

/// Charger frequency where the channel's two-level detuning vanishes, found
/// by secant iteration from the bare degeneracy.
pub fn channel_resonance(
    config: &SystemConfig,
    battery: &BatteryHamiltonian,
    channel: &Channel,
) -> Result<ChannelModel> {
    let at = |w: f64| {
        let mut c = *config;
        c.omega_c = w;
        channel_model(&c, battery, channel)
    };
    let mut x0 = channel.bare_omega();
    let mut m0 = at(x0)?;
    let mut x1 = x0 - m0.delta / channel.drop as f64;
    for _ in 0..60 {
        if !(x1 > 0.0) {
            return Err(Error::NumericalBreakdown(format!("resonance search left ω_C > 0 (at {x1})")));
        }
        let m1 = at(x1)?;
        if m1.delta.abs() < 1e-13 * x1.max(1.0) || (x1 - x0).abs() < 1e-14 * x1.max(1.0) {
            return Ok(m1);
        }
        let slope = (m1.delta - m0.delta) / (x1 - x0);
        let next = if slope.is_finite() && slope != 0.0 { x1 - m1.delta / slope } else { x1 - m1.delta / channel.drop as f64 };
        x0 = x1;
        m0 = m1;
        x1 = next;
    }
    Err(Error::NumericalBreakdown("channel resonance did not converge".into()))
}

/// Controls for refining a resonance by ED.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// Final bracket width in `ω_C`.
    pub tolerance: f64,
    /// Refinement half-width in units of the channel coupling.
    pub width_factor: f64,
    pub min_half_width: f64,
    /// Peaks below this transfer ratio are discarded.
    pub threshold: f64,
    /// Channels whose coupling falls below this fraction of `|g_BC|` are
    /// treated as dark and skipped.
    pub min_relative_coupling: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { tolerance: 1e-5, width_factor: 3.0, min_half_width: 2e-3, threshold: 0.5, min_relative_coupling: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonancePeak {
    pub omega_c: f64,
    /// `W_B(t_max) / W_C(0)`.
    pub ratio: f64,
    pub ergotropy_ratio: f64,
    pub t_max: f64,
    pub power: f64,
    /// Two-level estimate of the resonance that seeded the refinement.
    pub seed: f64,
    /// Battery gap of the channel.
    pub gap: f64,
    /// Two-level coupling of the channel at the seed.
    pub coupling: f64,
}

/// ED transfer ratio and summary at one charger frequency.
pub fn transfer_at(
    config: &SystemConfig,
    battery: &Arc<BatteryHamiltonian>,
    omega_c: f64,
) -> Result<(f64, ChargingSummary)> {
    let mut c = *config;
    c.omega_c = omega_c;
    let sys = ChargingSystem::with_battery(c, Arc::clone(battery))?;
    let s = transfer_summary(&sys)?;
    Ok((s.w_max / c.initial_charger_work(), s))
}

/// Golden-section maximization of the ED transfer ratio around `seed`.
pub fn refine_peak(
    config: &SystemConfig,
    battery: &Arc<BatteryHamiltonian>,
    seed: f64,
    half_width: f64,
    tolerance: f64,
) -> Result<(f64, f64, ChargingSummary)> {
    let lo = (seed - half_width).max(1e-6);
    let hi = seed + half_width;
    let (w, _) = thermo::golden_section_max(|w| Ok(transfer_at(config, battery, w)?.0), lo, hi, tolerance)?;
    let (ratio, summary) = transfer_at(config, battery, w)?;
    Ok((w, ratio, summary))
}

/// Every resonance in `[lo, hi]` with transfer ratio above the threshold,
/// ordered by `ω_C`. Each bright decoupled degeneracy seeds a two-level
/// estimate, which is then refined by ED.
pub fn resonance_peaks(config: &SystemConfig, lo: f64, hi: f64, opts: &TuneOptions) -> Result<Vec<ResonancePeak>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("resonance window [{lo}, {hi}] is invalid")));
    }
    let battery = Arc::new(battery_hamiltonian(&config.battery()?, config.g_b)?);
    let margin = 0.25 * (hi - lo);
    let channels = decoupled_channels(&battery, config.charger_level, (lo - margin).max(0.0), hi + margin);
    let min_coupling = opts.min_relative_coupling * config.g_bc.abs();
    let found: Vec<Option<ResonancePeak>> = channels
        .par_iter()
        .map(|ch| -> Result<Option<ResonancePeak>> {
            let model = channel_resonance(config, &battery, ch)?;
            if model.omega_c < lo || model.omega_c > hi || model.coupling <= min_coupling {
                return Ok(None);
            }
            let hw = (opts.width_factor * model.coupling).max(opts.min_half_width);
            let (w, ratio, s) = refine_peak(config, &battery, model.omega_c, hw, opts.tolerance)?;
            let w_c = w * config.charger_level as f64;
            Ok((ratio >= opts.threshold).then_some(ResonancePeak {
                omega_c: w,
                ratio,
                ergotropy_ratio: s.ergotropy_at_t_max / w_c,
                t_max: s.t_max,
                power: s.power,
                seed: model.omega_c,
                gap: ch.gap,
                coupling: model.coupling,
            }))
        })
        .collect::<Result<_>>()?;
    let mut peaks: Vec<ResonancePeak> = found.into_iter().flatten().collect();
    peaks.sort_by(|a, b| a.omega_c.total_cmp(&b.omega_c));
    let mut merged: Vec<ResonancePeak> = Vec::with_capacity(peaks.len());
    for p in peaks {
        match merged.last_mut() {
            Some(q) if (p.omega_c - q.omega_c).abs() < 10.0 * opts.tolerance => {
                if p.ratio > q.ratio {
                    *q = p;
                }
            }
            _ => merged.push(p),
        }
    }
    Ok(merged)
}

/// Strongest resonance in `[lo, hi]`.
pub fn fine_tune_resonance(config: &SystemConfig, lo: f64, hi: f64, opts: &TuneOptions) -> Result<ResonancePeak> {
    let mut relaxed = *opts;
    relaxed.threshold = f64::NEG_INFINITY;
    let peaks = resonance_peaks(config, lo, hi, &relaxed)?;
    let best = peaks.into_iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio));
    match best {
        Some(p) if p.ratio >= opts.threshold => Ok(p),
        other => Err(Error::NoResonance { lo, hi, best_ratio: other.map_or(0.0, |p| p.ratio) }),
    }
}

/// ED and two-level figures of merit at the resonance of excitation `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantPoint {
    pub n: usize,
    pub num_particles: usize,
    pub g_b: f64,
    pub g_bc: f64,
    pub omega_c: f64,
    pub w_c: f64,
    pub t_max: f64,
    pub w_max: f64,
    pub ergotropy: f64,
    pub entropy: f64,
    pub w_irr: f64,
    pub power_ed: f64,
    pub power_tlm: f64,
    pub qsl_num: f64,
    pub qsl_tlm: f64,
    pub error: Option<String>,
}

impl ResonantPoint {
    fn failed(n: usize, config: &SystemConfig, err: &Error) -> Self {
        let nan = f64::NAN;
        ResonantPoint {
            n,
            num_particles: config.num_particles,
            g_b: config.g_b,
            g_bc: config.g_bc,
            omega_c: nan,
            w_c: nan,
            t_max: nan,
            w_max: nan,
            ergotropy: nan,
            entropy: nan,
            w_irr: nan,
            power_ed: nan,
            power_tlm: nan,
            qsl_num: nan,
            qsl_tlm: nan,
            error: Some(err.to_string()),
        }
    }

    pub fn ratio(&self) -> f64 {
        self.w_max / self.w_c
    }

    /// `W_irr(t_max) < 0.01 · W_C(0)`.
    pub fn w_irr_below_one_percent(&self) -> bool {
        self.w_irr < 0.01 * self.w_c
    }
}

/// Resonant operating point for excitation `n`; `config.omega_c` is
/// replaced. A non-interacting battery charged from the first excited
/// charger level uses the analytic resonance and two-level model; otherwise
/// the resonance is fine-tuned by ED within `n ± 0.5` and the two-level
/// columns come from the tuned channel.
pub fn resonant_point(config: &SystemConfig, n: usize, opts: &TuneOptions) -> Result<ResonantPoint> {
    let mut c = *config;
    let (power_tlm, qsl_tlm) = if config.g_b == 0.0 && config.charger_level == 1 {
        c.omega_c = tlm::resonance_solve_general(n, c.num_particles, c.g_bc, c.omega_b)?;
        let p = tlm::tlm_params(n, c.num_particles, c.g_bc, c.omega_b, c.omega_c)?;
        (tlm::power_tlm(&p), tlm::qsl_tlm(&p))
    } else {
        let w = n as f64 * c.omega_b / c.charger_level as f64;
        let half = 0.5 * c.omega_b / c.charger_level as f64;
        let peak = fine_tune_resonance(&c, w - half, w + half, opts)?;
        c.omega_c = peak.omega_c;
        let qsl = PI / (2.0 * peak.coupling);
        (c.initial_charger_work() / qsl, qsl)
    };
    let sys = ChargingSystem::build(c)?;
    let s = sys.charging_summary(None)?;
    Ok(ResonantPoint {
        n,
        num_particles: c.num_particles,
        g_b: c.g_b,
        g_bc: c.g_bc,
        omega_c: c.omega_c,
        w_c: c.initial_charger_work(),
        t_max: s.t_max,
        w_max: s.w_max,
        ergotropy: s.ergotropy_at_t_max,
        entropy: s.entropy_at_t_max,
        w_irr: s.w_irr_at_t_max,
        power_ed: s.power,
        power_tlm,
        qsl_num: sys.qsl_numeric()?,
        qsl_tlm,
        error: None,
    })
}

/// Cartesian grid of resonant points; rows ordered by `n`, `N_B`, `g_B`,
/// then `g_BC`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantScan {
    /// Supplies cutoffs, `ω_B`, sector and charger level.
    pub base: SystemConfig,
    pub excitations: Vec<usize>,
    pub particle_counts: Vec<usize>,
    pub g_b_values: Vec<f64>,
    pub g_bc_values: Vec<f64>,
    pub tune: TuneOptions,
}

impl ResonantScan {
    pub fn validate(&self) -> Result<()> {
        if self.excitations.is_empty() || self.particle_counts.is_empty() {
            return Err(Error::InvalidParameter("need at least one excitation and one particle count".into()));
        }
        check_grid(&self.g_b_values)?;
        check_grid(&self.g_bc_values)?;
        for &nb in &self.particle_counts {
            let mut c = self.base;
            c.num_particles = nb;
            c.battery()?;
        }
        self.base.charger()?;
        Ok(())
    }

    pub fn jobs(&self) -> Vec<(usize, SystemConfig)> {
        let mut out = Vec::new();
        for &n in &self.excitations {
            for &nb in &self.particle_counts {
                for &g_b in &self.g_b_values {
                    for &g_bc in &self.g_bc_values {
                        let mut c = self.base;
                        c.num_particles = nb;
                        c.g_b = g_b;
                        c.g_bc = g_bc;
                        out.push((n, c));
                    }
                }
            }
        }
        out
    }
}

/// Resonant points over the whole grid; failures are recorded per row.
pub fn resonant_scan(scan: &ResonantScan) -> Result<Vec<ResonantPoint>> {
    scan.validate()?;
    Ok(scan
        .jobs()
        .par_iter()
        .map(|(n, c)| resonant_point(c, *n, &scan.tune).unwrap_or_else(|e| ResonantPoint::failed(*n, c, &e)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: usize,
    pub num_particles: usize,
    pub g_b: f64,
    pub g_bc: f64,
    pub omega_c: f64,
    pub w_c: f64,
    pub power_ed: f64,
    pub power_tlm: f64,
    pub qsl_num: f64,
    pub qsl_tlm: f64,
    pub t_max: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirrRow {
    pub n: usize,
    pub num_particles: usize,
    pub g_b: f64,
    pub g_bc: f64,
    pub omega_c: f64,
    pub w_c: f64,
    pub w_max: f64,
    pub w_irr: f64,
    pub below_one_percent: bool,
    pub error: Option<String>,
}

impl From<&ResonantPoint> for PowerRow {
    fn from(p: &ResonantPoint) -> Self {
        PowerRow {
            n: p.n,
            num_particles: p.num_particles,
            g_b: p.g_b,
            g_bc: p.g_bc,
            omega_c: p.omega_c,
            w_c: p.w_c,
            power_ed: p.power_ed,
            power_tlm: p.power_tlm,
            qsl_num: p.qsl_num,
            qsl_tlm: p.qsl_tlm,
            t_max: p.t_max,
            error: p.error.clone(),
        }
    }
}

impl From<&ResonantPoint> for WirrRow {
    fn from(p: &ResonantPoint) -> Self {
        WirrRow {
            n: p.n,
            num_particles: p.num_particles,
            g_b: p.g_b,
            g_bc: p.g_bc,
            omega_c: p.omega_c,
            w_c: p.w_c,
            w_max: p.w_max,
            w_irr: p.w_irr,
            below_one_percent: p.error.is_none() && p.w_irr_below_one_percent(),
            error: p.error.clone(),
        }
    }
}

pub fn power_scan(scan: &ResonantScan) -> Result<Vec<PowerRow>> {
    Ok(resonant_scan(scan)?.iter().map(PowerRow::from).collect())
}

pub fn wirr_scan(scan: &ResonantScan) -> Result<Vec<WirrRow>> {
    Ok(resonant_scan(scan)?.iter().map(WirrRow::from).collect())
}

/// Change of the first stored-work maximum when the cutoffs grow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub modes_small: (usize, usize),
    pub modes_large: (usize, usize),
    pub w_small: f64,
    pub w_large: f64,
    pub t_small: f64,
    pub t_large: f64,
    pub relative_change: f64,
}

impl ConvergenceReport {
    pub fn converged(&self, tolerance: f64) -> bool {
        self.relative_change < tolerance
    }
}

pub fn convergence_check(config: &SystemConfig, modes_battery: usize, modes_charger: usize) -> Result<ConvergenceReport> {
    let small = ChargingSystem::build(*config)?.charging_summary(None)?;
    let large = ChargingSystem::build(config.with_modes(modes_battery, modes_charger))?.charging_summary(None)?;
    Ok(ConvergenceReport {
        modes_small: (config.modes_battery, config.modes_charger),
        modes_large: (modes_battery, modes_charger),
        w_small: small.w_max,
        w_large: large.w_max,
        t_small: small.t_max,
        t_large: large.t_max,
        relative_change: ((large.w_max - small.w_max) / large.w_max).abs(),
    })
}

/// Battery populations `p_i` in its energy eigenbasis and the reduced-state
/// eigenvalues `λ_i`, both truncated to the first `levels` entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationSeries {
    pub t: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Vec<f64>>,
}

pub fn population_series(sys: &ChargingSystem, times: &[f64], levels: usize) -> Result<PopulationSeries> {
    let rows: Vec<(Vec<f64>, Vec<f64>)> = times
        .par_iter()
        .map(|&t| {
            let rho = thermo::partial_trace_charger(&sys.state_at(t), sys.basis())?;
            let p = rho.populations(sys.battery())?;
            let k = levels.min(p.len());
            Ok((p.iter().take(k).copied().collect(), rho.eigenvalues().iter().take(k).copied().collect()))
        })
        .collect::<Result<_>>()?;
    let (populations, eigenvalues) = rows.into_iter().unzip();
    Ok(PopulationSeries { t: times.to_vec(), populations, eigenvalues })
}

/// Default end of a plotted time series: one and a half charging periods,
/// or three speed-limit times when no transfer peak exists.
pub fn series_end(sys: &ChargingSystem) -> Result<f64> {
    match sys.charging_summary(None) {
        Ok(s) => Ok(1.5 * s.t_max.max(f64::MIN_POSITIVE)),
        Err(Error::NoTransfer { .. }) => {
            let q = sys.qsl_numeric()?;
            Ok(if q.is_finite() { 3.0 * q } else { 1.0 })
        }
        Err(e) => Err(e),
    }
}

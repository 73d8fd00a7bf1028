//! Exact spectral time evolution of the coupled battery–charger system.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{CompositeBasis, ParitySector, SpeciesConfig};
use crate::hamiltonian::{battery_hamiltonian, BatteryHamiltonian, Couplings, HamiltonianSet};
use crate::linalg;
use crate::thermo::{self, ChargingSummary, PeakLocation, TmaxOptions};
use crate::{Error, Result, C64};

/// Eigenpairs of a real symmetric Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    pub fn new(h: &Array2<f64>) -> Result<Self> {
        let (eigenvalues, eigenvectors) = linalg::eigh(h)?;
        Ok(SpectralDecomposition { eigenvalues, eigenvectors })
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max_i ‖H v_i − E_i v_i‖`.
    pub fn max_residual(&self, h: &Array2<f64>) -> f64 {
        let hv = h.dot(&self.eigenvectors);
        let mut worst = 0.0f64;
        for (i, &e) in self.eigenvalues.iter().enumerate() {
            let r = &hv.column(i) - &(&self.eigenvectors.column(i) * e);
            worst = worst.max(r.dot(&r).sqrt());
        }
        worst
    }
}

/// Complex amplitudes over a composite basis at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Array1<C64>,
    time: f64,
}

impl QuantumState {
    pub fn new(amplitudes: Array1<C64>, time: f64) -> Self {
        QuantumState { amplitudes, time }
    }

    pub fn from_real(amplitudes: ArrayView1<'_, f64>, time: f64) -> Self {
        QuantumState { amplitudes: amplitudes.mapv(|x| C64::new(x, 0.0)), time }
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real and imaginary parts as separate vectors.
    pub fn split(&self) -> (Array1<f64>, Array1<f64>) {
        (self.amplitudes.mapv(|z| z.re), self.amplitudes.mapv(|z| z.im))
    }

    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }
}

/// Battery ground state (from the battery-only Hamiltonian) times charger
/// level `charger_level`, embedded in the kept sector.
pub fn initial_state(
    basis: &CompositeBasis,
    battery: &BatteryHamiltonian,
    charger_level: usize,
) -> Result<QuantumState> {
    if battery.config() != basis.battery_config() {
        return Err(Error::InvalidParameter("battery Hamiltonian does not match the basis".into()));
    }
    let ic = basis.charger_index_of_mode(charger_level).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "charger level {charger_level} outside the {} retained modes",
            basis.charger_dim()
        ))
    })?;
    let ground = battery.ground_state();
    // Fix the eigenvector's arbitrary sign: largest component positive.
    let lead = ground.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    let mut amps = Array1::<C64>::zeros(basis.dim());
    let mut weight = 0.0;
    for (ib, &v) in ground.iter().enumerate() {
        if let Some(r) = basis.index_of(ib, ic) {
            amps[r] = C64::new(sign * v, 0.0);
            weight += v * v;
        }
    }
    if weight < 1.0 - 1e-10 {
        return Err(Error::SectorWeight { weight });
    }
    let norm = weight.sqrt();
    amps.mapv_inplace(|z| z / norm);
    Ok(QuantumState::new(amps, 0.0))
}

/// Eigenbasis coefficients below this magnitude are dropped from the
/// propagator; the resulting norm defect is far below 1e-10.
const COEFFICIENT_CUTOFF: f64 = 1e-13;

/// `ψ(t) = Σ_i c_i e^{-iE_i t} Φ_i`, restricted to eigenvectors that carry
/// weight in the initial state.
#[derive(Debug, Clone)]
pub struct Propagator {
    energies: Array1<f64>,
    coefficients: Array1<C64>,
    vectors: Array2<f64>,
}

impl Propagator {
    pub fn new(spectrum: &SpectralDecomposition, state0: &QuantumState) -> Result<Self> {
        if spectrum.dim() != state0.dim() {
            return Err(Error::DimensionMismatch { expected: spectrum.dim(), got: state0.dim() });
        }
        let (re, im) = state0.split();
        let v = spectrum.eigenvectors();
        let cr = v.t().dot(&re);
        let ci = v.t().dot(&im);
        let keep: Vec<usize> = (0..spectrum.dim())
            .filter(|&i| cr[i].hypot(ci[i]) > COEFFICIENT_CUTOFF)
            .collect();
        let energies = keep.iter().map(|&i| spectrum.eigenvalues()[i]).collect();
        let coefficients = keep.iter().map(|&i| C64::new(cr[i], ci[i])).collect();
        let vectors = v.select(Axis(1), &keep);
        Ok(Propagator { energies, coefficients, vectors })
    }

    /// Number of eigenvectors retained.
    pub fn rank(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &Array1<f64> {
        &self.energies
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    /// Eigenbasis coefficients at time `t`.
    pub fn coefficients_at(&self, t: f64) -> Array1<C64> {
        self.energies
            .iter()
            .zip(&self.coefficients)
            .map(|(&e, &c)| c * C64::from_polar(1.0, -e * t))
            .collect()
    }

    /// Real and imaginary parts of the eigenbasis coefficients at every time,
    /// one column per time.
    pub fn coefficient_columns(&self, times: &[f64]) -> (Array2<f64>, Array2<f64>) {
        let k = self.rank();
        let mut zr = Array2::<f64>::zeros((k, times.len()));
        let mut zi = Array2::<f64>::zeros((k, times.len()));
        for (j, &t) in times.iter().enumerate() {
            for (i, z) in self.coefficients_at(t).iter().enumerate() {
                zr[[i, j]] = z.re;
                zi[[i, j]] = z.im;
            }
        }
        (zr, zi)
    }

    pub fn state_at(&self, t: f64) -> QuantumState {
        let z = self.coefficients_at(t);
        let re = self.vectors.dot(&z.mapv(|c| c.re));
        let im = self.vectors.dot(&z.mapv(|c| c.im));
        let amps = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        QuantumState::new(amps, t)
    }
}

pub fn evolve(state0: &QuantumState, spectrum: &SpectralDecomposition, t: f64) -> Result<QuantumState> {
    Ok(Propagator::new(spectrum, state0)?.state_at(t))
}

/// `⟨ψ|O|ψ⟩` for a real symmetric `O`; the imaginary residue must vanish.
pub fn expectation(op: &Array2<f64>, state: &QuantumState) -> Result<f64> {
    if op.nrows() != state.dim() || op.ncols() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), got: op.nrows() });
    }
    let (re, im) = state.split();
    let ore = op.dot(&re);
    let oim = op.dot(&im);
    let real = re.dot(&ore) + im.dot(&oim);
    let imag = re.dot(&oim) - im.dot(&ore);
    if imag.abs() > 1e-10 * real.abs().max(1.0) {
        return Err(Error::NonHermitian(imag));
    }
    Ok(real)
}

/// Physical and numerical parameters of one charging run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_particles: usize,
    pub modes_battery: usize,
    pub modes_charger: usize,
    pub omega_b: f64,
    pub omega_c: f64,
    pub g_b: f64,
    pub g_bc: f64,
    pub sector: ParitySector,
    pub charger_level: usize,
}

pub const DEFAULT_MODES: usize = 12;

impl SystemConfig {
    /// Defaults: 12 modes per species, `ω_B = 1`, odd sector, charger in its
    /// first excited level.
    pub fn new(num_particles: usize, omega_c: f64, g_b: f64, g_bc: f64) -> Self {
        SystemConfig {
            num_particles,
            modes_battery: DEFAULT_MODES,
            modes_charger: DEFAULT_MODES,
            omega_b: 1.0,
            omega_c,
            g_b,
            g_bc,
            sector: ParitySector::Odd,
            charger_level: 1,
        }
    }

    pub fn with_modes(mut self, battery: usize, charger: usize) -> Self {
        self.modes_battery = battery;
        self.modes_charger = charger;
        self
    }

    pub fn battery(&self) -> Result<SpeciesConfig> {
        SpeciesConfig::battery(self.num_particles, self.modes_battery, self.omega_b)
    }

    pub fn charger(&self) -> Result<SpeciesConfig> {
        SpeciesConfig::charger(self.modes_charger, self.omega_c)
    }

    pub fn couplings(&self) -> Couplings {
        Couplings { g_b: self.g_b, g_bc: self.g_bc }
    }

    /// Energy initially stored in the charger, `ε_L − ε_0 = L·ω_C`.
    pub fn initial_charger_work(&self) -> f64 {
        self.charger_level as f64 * self.omega_c
    }
}

/// Values of every tracked observable at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub stored_work: f64,
    pub ergotropy: f64,
    pub entropy: f64,
    pub interaction_energy: f64,
    pub irreversible_work: f64,
    pub total_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub stored_work: Vec<f64>,
    pub ergotropy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub interaction_energy: Vec<f64>,
    pub irreversible_work: Vec<f64>,
    pub total_energy: Vec<f64>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, o: &Observables) {
        self.times.push(o.t);
        self.stored_work.push(o.stored_work);
        self.ergotropy.push(o.ergotropy);
        self.entropy.push(o.entropy);
        self.interaction_energy.push(o.interaction_energy);
        self.irreversible_work.push(o.irreversible_work);
        self.total_energy.push(o.total_energy);
    }

    pub const COLUMNS: [&'static str; 7] = ["t", "W_B", "ergotropy", "S_B", "E_int", "W_irr", "E_total"];

    /// Column-major view matching [`Self::COLUMNS`].
    pub fn columns(&self) -> [&[f64]; 7] {
        [
            &self.times,
            &self.stored_work,
            &self.ergotropy,
            &self.entropy,
            &self.interaction_energy,
            &self.irreversible_work,
            &self.total_energy,
        ]
    }
}

/// Everything needed to evolve one configuration: basis, Hamiltonians,
/// spectrum, initial state and propagator.
#[derive(Debug, Clone)]
pub struct ChargingSystem {
    config: SystemConfig,
    basis: Arc<CompositeBasis>,
    battery: Arc<BatteryHamiltonian>,
    hamiltonians: HamiltonianSet,
    spectrum: SpectralDecomposition,
    state0: QuantumState,
    propagator: Propagator,
    h0_initial: f64,
    /// `H^B ⊗ 1` projected onto the retained eigenvectors.
    work_operator: Array2<f64>,
}

impl ChargingSystem {
    pub fn build(config: SystemConfig) -> Result<Self> {
        let battery = Arc::new(battery_hamiltonian(&config.battery()?, config.g_b)?);
        Self::with_battery(config, battery)
    }

    /// Reuses a battery Hamiltonian, which does not depend on the charger.
    pub fn with_battery(config: SystemConfig, battery: Arc<BatteryHamiltonian>) -> Result<Self> {
        let bcfg = config.battery()?;
        if *battery.config() != bcfg || battery.g_b() != config.g_b {
            return Err(Error::InvalidParameter("battery Hamiltonian does not match the configuration".into()));
        }
        let basis = Arc::new(CompositeBasis::build(&bcfg, &config.charger()?, config.sector)?);
        let hamiltonians = HamiltonianSet::assemble(Arc::clone(&basis), config.couplings())?;
        let spectrum = SpectralDecomposition::new(&hamiltonians.h1)?;
        let state0 = initial_state(&basis, &battery, config.charger_level)?;
        let propagator = Propagator::new(&spectrum, &state0)?;
        let h0_initial = expectation(&hamiltonians.h0, &state0)?;

        let omega_c = config.omega_c;
        let mut battery_op = hamiltonians.h0.clone();
        for (r, &(_, ic)) in basis.kept_pairs().iter().enumerate() {
            battery_op[[r, r]] -= (basis.charger_mode(ic) as f64 + 0.5) * omega_c;
        }
        let vk = propagator.vectors();
        let work_operator = vk.t().dot(&battery_op.dot(vk));

        Ok(ChargingSystem {
            config,
            basis,
            battery,
            hamiltonians,
            spectrum,
            state0,
            propagator,
            h0_initial,
            work_operator,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn basis(&self) -> &Arc<CompositeBasis> {
        &self.basis
    }

    pub fn battery(&self) -> &Arc<BatteryHamiltonian> {
        &self.battery
    }

    pub fn hamiltonians(&self) -> &HamiltonianSet {
        &self.hamiltonians
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn initial_state(&self) -> &QuantumState {
        &self.state0
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn initial_charger_work(&self) -> f64 {
        self.config.initial_charger_work()
    }

    pub fn state_at(&self, t: f64) -> QuantumState {
        self.propagator.state_at(t)
    }

    /// Stored work at many times without forming the states.
    pub fn stored_work_batch(&self, times: &[f64]) -> Vec<f64> {
        let (zr, zi) = self.propagator.coefficient_columns(times);
        let ar = self.work_operator.dot(&zr);
        let ai = self.work_operator.dot(&zi);
        let e0 = self.battery.ground_energy();
        (0..times.len())
            .map(|j| {
                let col = s![.., j];
                zr.slice(col).dot(&ar.slice(col)) + zi.slice(col).dot(&ai.slice(col)) - e0
            })
            .collect()
    }

    pub fn observables_at(&self, t: f64) -> Result<Observables> {
        let state = self.state_at(t);
        let rho = thermo::partial_trace_charger(&state, &self.basis)?;
        let h0 = expectation(&self.hamiltonians.h0, &state)?;
        let hint = expectation(&self.hamiltonians.hint, &state)?;
        Ok(Observables {
            t,
            stored_work: thermo::stored_work(&rho, &self.battery)?,
            ergotropy: thermo::ergotropy(&rho, &self.battery)?,
            entropy: thermo::von_neumann_entropy(&rho),
            interaction_energy: hint,
            irreversible_work: h0 - self.h0_initial,
            total_energy: h0 + hint,
        })
    }

    /// Observables on an ascending time grid, each point evolved directly
    /// from `t = 0`.
    pub fn time_series(&self, times: &[f64]) -> Result<ObservableSeries> {
        if times.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidParameter("time grid must be ascending".into()));
        }
        let points: Vec<Observables> =
            times.par_iter().map(|&t| self.observables_at(t)).collect::<Result<_>>()?;
        let mut series = ObservableSeries::default();
        for p in &points {
            series.push(p);
        }
        Ok(series)
    }

    pub fn qsl_numeric(&self) -> Result<f64> {
        thermo::qsl_numeric(&self.state0, &self.hamiltonians.h1)
    }

    /// Search window of three speed-limit times; a transfer below 5% of the
    /// charger's initial energy counts as none.
    pub fn default_tmax_options(&self) -> Result<TmaxOptions> {
        let qsl = self.qsl_numeric()?;
        if !qsl.is_finite() {
            return Err(Error::NoTransfer { horizon: f64::INFINITY, max_work: 0.0 });
        }
        Ok(TmaxOptions::new(3.0 * qsl).min_transfer(0.05 * self.initial_charger_work()))
    }

    pub fn find_t_max(&self, opts: &TmaxOptions) -> Result<PeakLocation> {
        thermo::find_t_max(|ts| Ok(self.stored_work_batch(ts)), opts)
    }

    pub fn charging_summary(&self, opts: Option<&TmaxOptions>) -> Result<ChargingSummary> {
        let opts = match opts {
            Some(o) => *o,
            None => self.default_tmax_options()?,
        };
        let peak = self.find_t_max(&opts)?;
        self.summary_at(peak.t_max)
    }

    /// Summary fields evaluated at a given time.
    pub fn summary_at(&self, t: f64) -> Result<ChargingSummary> {
        let o = self.observables_at(t)?;
        Ok(ChargingSummary::new(t, o.stored_work, o.ergotropy, o.irreversible_work, o.entropy))
    }

    /// Largest stored work on a uniform grid over `[0, horizon]`.
    pub fn max_stored_work(&self, horizon: f64, points: usize) -> f64 {
        let n = points.max(2);
        let times: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
        self.stored_work_batch(&times).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

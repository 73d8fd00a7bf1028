//! Reduced battery state and the work-like quantities derived from it.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::CompositeBasis;
use crate::dynamics::{expectation, QuantumState};
use crate::hamiltonian::BatteryHamiltonian;
use crate::linalg;
use crate::{Error, Result, C64};

/// Negative eigenvalue mass of a reduced state that is clipped silently;
/// anything larger means the state is not a density matrix.
pub const CLIP_TOLERANCE: f64 = 1e-8;

/// `ρ^B` together with its spectrum in descending order.
#[derive(Debug, Clone)]
pub struct BatteryDensityMatrix {
    rho: Array2<C64>,
    eigenvalues: Array1<f64>,
}

impl BatteryDensityMatrix {
    /// Hermitizes `rho`, diagonalizes it and clips round-off negativity.
    pub fn from_matrix(rho: Array2<C64>) -> Result<Self> {
        let n = rho.nrows();
        if rho.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rho.ncols() });
        }
        let rho = (&rho + &rho.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let mut w = linalg::eigvalsh_complex(&rho)?.to_vec();
        w.reverse();
        let negative: f64 = w.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
        if negative >= CLIP_TOLERANCE {
            return Err(Error::NumericalBreakdown(format!(
                "reduced state has negative eigenvalue mass {negative:.3e}"
            )));
        }
        for x in w.iter_mut() {
            *x = x.max(0.0);
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NumericalBreakdown("reduced state has zero trace".into()));
        }
        for x in w.iter_mut() {
            *x /= total;
        }
        Ok(BatteryDensityMatrix { rho, eigenvalues: Array1::from(w) })
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.rho
    }

    /// Eigenvalues `λ_i`, descending, non-negative and summing to one.
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.diag().iter().map(|z| z.re).sum()
    }

    /// Populations `p_i = ⟨ψ_i|ρ|ψ_i⟩` of the battery eigenstates, in
    /// ascending-energy order.
    pub fn populations(&self, battery: &BatteryHamiltonian) -> Result<Array1<f64>> {
        check_dim(battery.dim(), self.dim())?;
        let v = battery.eigenvectors();
        let rho_re = self.rho.mapv(|z| z.re);
        // ψ real ⇒ ψᵀ Im(ρ) ψ vanishes for Hermitian ρ.
        let rv = rho_re.dot(v);
        Ok((0..v.ncols()).map(|i| v.column(i).dot(&rv.column(i))).collect())
    }

    /// `Tr[H^B ρ]`.
    pub fn energy(&self, battery: &BatteryHamiltonian) -> Result<f64> {
        check_dim(battery.dim(), self.dim())?;
        let h = battery.matrix();
        let mut acc = 0.0;
        for ((a, b), z) in self.rho.indexed_iter() {
            acc += h[[b, a]] * z.re;
        }
        Ok(acc)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn amplitude_grid(state: &QuantumState, basis: &CompositeBasis) -> Result<Array2<C64>> {
    check_dim(basis.dim(), state.dim())?;
    let mut grid = Array2::<C64>::zeros((basis.battery_dim(), basis.charger_dim()));
    for (&(ib, ic), &a) in basis.kept_pairs().iter().zip(state.amplitudes()) {
        grid[[ib, ic]] = a;
    }
    Ok(grid)
}

/// `ρ^B_{ab} = Σ_c ψ_{ac} ψ*_{bc}`.
pub fn partial_trace_charger(state: &QuantumState, basis: &CompositeBasis) -> Result<BatteryDensityMatrix> {
    let grid = amplitude_grid(state, basis)?;
    let rho = grid.dot(&grid.t().mapv(|z| z.conj()));
    BatteryDensityMatrix::from_matrix(rho)
}

/// Entropy of the charger's reduced state, for the Schmidt-symmetry check.
pub fn charger_entropy(state: &QuantumState, basis: &CompositeBasis) -> Result<f64> {
    let grid = amplitude_grid(state, basis)?;
    // This is the complex conjugate of ρ^C, which has the same spectrum.
    let rho = grid.t().mapv(|z| z.conj()).dot(&grid);
    let reduced = BatteryDensityMatrix::from_matrix(rho)?;
    Ok(von_neumann_entropy(&reduced))
}

/// `Tr[H^B ρ^B] − ε₀`.
pub fn stored_work(rho: &BatteryDensityMatrix, battery: &BatteryHamiltonian) -> Result<f64> {
    Ok(rho.energy(battery)? - battery.ground_energy())
}

/// `Σ_i (p_i − λ_i) ε_i`: energy above the passive rearrangement of the
/// spectrum.
pub fn ergotropy(rho: &BatteryDensityMatrix, battery: &BatteryHamiltonian) -> Result<f64> {
    let p = rho.populations(battery)?;
    let eps = battery.eigenvalues();
    let lambda = rho.eigenvalues();
    Ok(p.iter().zip(lambda).zip(eps).map(|((p, l), e)| (p - l) * e).sum())
}

/// `−Σ λ ln λ` with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &BatteryDensityMatrix) -> f64 {
    entropy_of(rho.eigenvalues().iter().copied())
}

pub fn entropy_of<I: IntoIterator<Item = f64>>(weights: I) -> f64 {
    let s: f64 = weights.into_iter().filter(|&l| l > 0.0).map(|l| -l * l.ln()).sum();
    s.max(0.0)
}

/// `⟨H0⟩_t − ⟨H0⟩_0`.
pub fn irreversible_work(state_t: &QuantumState, state_0: &QuantumState, h0: &Array2<f64>) -> Result<f64> {
    Ok(expectation(h0, state_t)? - expectation(h0, state_0)?)
}

/// Mandelstam–Tamm time `π / (2ΔE)` from the energy spread of `state`;
/// infinite for an eigenstate.
pub fn qsl_numeric(state: &QuantumState, h: &Array2<f64>) -> Result<f64> {
    check_dim(h.nrows(), state.dim())?;
    let (re, im) = state.split();
    let hre = h.dot(&re);
    let him = h.dot(&im);
    let mean = re.dot(&hre) + im.dot(&him);
    let spread_sq = (&hre - &(&re * mean)).mapv(|x| x * x).sum() + (&him - &(&im * mean)).mapv(|x| x * x).sum();
    let spread = spread_sq.sqrt();
    if spread <= 1e-9 * mean.abs().max(1.0) {
        return Ok(f64::INFINITY);
    }
    Ok(PI / (2.0 * spread))
}

/// Controls for locating the first stored-work maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmaxOptions {
    /// Initial search window `[0, horizon]`.
    pub horizon: f64,
    pub grid_points: usize,
    /// Final bracket width of the refinement.
    pub tolerance: f64,
    /// A lobe starts where the signal first reaches this fraction of the
    /// window maximum; ripples below it are ignored.
    pub prominence: f64,
    /// Peaks below this value count as no transfer.
    pub min_transfer: f64,
    /// How many times the window may double when the first lobe is cut off
    /// or nothing rises above `min_transfer`.
    pub max_extensions: usize,
}

impl TmaxOptions {
    pub fn new(horizon: f64) -> Self {
        TmaxOptions {
            horizon,
            grid_points: 600,
            tolerance: 1e-6,
            prominence: 0.5,
            min_transfer: 1e-9,
            max_extensions: 4,
        }
    }

    pub fn min_transfer(mut self, value: f64) -> Self {
        self.min_transfer = value;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.grid_points < 3 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("need ≥ 3 grid points and a positive tolerance".into()));
        }
        if !(self.prominence > 0.0 && self.prominence <= 1.0) {
            return Err(Error::InvalidParameter("prominence must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakLocation {
    pub t_max: f64,
    pub w_max: f64,
    /// Window that was finally searched.
    pub horizon: f64,
}

/// First maximum of a signal given by a batch evaluator: coarse grid, then
/// golden-section refinement around the best grid point of the first lobe.
pub fn find_t_max<F>(eval: F, opts: &TmaxOptions) -> Result<PeakLocation>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    opts.validate()?;
    let mut horizon = opts.horizon;
    for attempt in 0..=opts.max_extensions {
        let last_try = attempt == opts.max_extensions;
        let n = opts.grid_points;
        let times: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
        let values = eval(&times)?;
        check_dim(n, values.len())?;
        let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::NumericalBreakdown("stored work is not finite".into()));
        }
        if peak < opts.min_transfer {
            if last_try {
                return Err(Error::NoTransfer { horizon, max_work: peak.max(0.0) });
            }
            horizon *= 2.0;
            continue;
        }
        let threshold = opts.prominence * peak;
        let start = values.iter().position(|&w| w >= threshold).expect("peak is attained");
        let end = values[start..].iter().position(|&w| w < threshold).map(|e| start + e);
        if end.is_none() && !last_try {
            horizon *= 2.0;
            continue;
        }
        let end = end.unwrap_or(n);
        let k = (start..end)
            .max_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("lobe is non-empty");
        let lo = times[k.saturating_sub(1)];
        let hi = times[(k + 1).min(n - 1)];
        let (t, w) = golden_max(&eval, lo, hi, opts.tolerance, (times[k], values[k]))?;
        return Ok(PeakLocation { t_max: t, w_max: w, horizon });
    }
    unreachable!("loop returns on its last iteration")
}

fn golden_max<F>(eval: &F, a: f64, b: f64, tol: f64, seed: (f64, f64)) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let best = golden_section_max(|t| Ok(eval(&[t])?[0]), a, b, tol)?;
    Ok(if best.1 > seed.1 { best } else { seed })
}

/// Golden-section search for the maximum of `f` on `[a, b]`, returning the
/// best probed point.
pub(crate) fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

/// Thermodynamic snapshot at the first stored-work maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingSummary {
    pub t_max: f64,
    pub w_max: f64,
    pub ergotropy_at_t_max: f64,
    /// `w_max / t_max`.
    pub power: f64,
    pub w_irr_at_t_max: f64,
    pub entropy_at_t_max: f64,
}

impl ChargingSummary {
    pub fn new(t_max: f64, w_max: f64, ergotropy: f64, w_irr: f64, entropy: f64) -> Self {
        let power = if t_max > 0.0 { w_max / t_max } else { 0.0 };
        ChargingSummary {
            t_max,
            w_max,
            ergotropy_at_t_max: ergotropy,
            power,
            w_irr_at_t_max: w_irr,
            entropy_at_t_max: entropy,
        }
    }
}

/// Evaluates a scalar function at many times on the rayon pool, preserving
/// order.
pub fn par_map_times<F>(times: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    times.par_iter().map(|&t| f(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{ParitySector, SpeciesConfig};
    use crate::hamiltonian::assemble_battery_only;
    use ndarray::Array1;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diag_rho(p: &[f64]) -> BatteryDensityMatrix {
        let n = p.len();
        let mut m = Array2::<C64>::zeros((n, n));
        for (i, &x) in p.iter().enumerate() {
            m[[i, i]] = c(x);
        }
        BatteryDensityMatrix::from_matrix(m).unwrap()
    }

    fn eigen_projector(h: &BatteryHamiltonian, i: usize) -> BatteryDensityMatrix {
        let v = h.eigenvector(i);
        let n = h.dim();
        let m = Array2::from_shape_fn((n, n), |(a, b)| c(v[a] * v[b]));
        BatteryDensityMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn product_state_reduces_to_pure() {
        let b = SpeciesConfig::battery(1, 3, 1.0).unwrap();
        let ch = SpeciesConfig::charger(3, 1.0).unwrap();
        let basis = CompositeBasis::build(&b, &ch, ParitySector::Odd).unwrap();
        let idx = basis.index_of(0, 1).unwrap();
        let mut amps = Array1::<C64>::zeros(basis.dim());
        amps[idx] = c(1.0);
        let state = QuantumState::new(amps, 0.0);
        let rho = partial_trace_charger(&state, &basis).unwrap();
        assert!((rho.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert!(rho.eigenvalues().iter().skip(1).all(|&l| l.abs() < 1e-14));
        assert!(von_neumann_entropy(&rho).abs() < 1e-12);
    }

    #[test]
    fn entangled_pair_reduces_to_half_half() {
        let b = SpeciesConfig::battery(1, 3, 1.0).unwrap();
        let ch = SpeciesConfig::charger(3, 1.0).unwrap();
        let basis = CompositeBasis::build(&b, &ch, ParitySector::Odd).unwrap();
        let mut amps = Array1::<C64>::zeros(basis.dim());
        let s = 0.5f64.sqrt();
        amps[basis.index_of(0, 1).unwrap()] = c(s);
        amps[basis.index_of(1, 0).unwrap()] = C64::new(0.0, s);
        let state = QuantumState::new(amps, 0.0);
        let rho = partial_trace_charger(&state, &basis).unwrap();
        assert!((rho.eigenvalues()[0] - 0.5).abs() < 1e-14);
        assert!((rho.eigenvalues()[1] - 0.5).abs() < 1e-14);
        assert!((von_neumann_entropy(&rho) - 2f64.ln()).abs() < 1e-12);
        assert!((von_neumann_entropy(&rho) - 0.693147).abs() < 1e-6);
        let sc = charger_entropy(&state, &basis).unwrap();
        assert!((sc - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn clipping_rejects_large_negative_mass() {
        let m = Array2::from_diag(&Array1::from(vec![c(1.1), c(-0.1)]));
        assert!(matches!(BatteryDensityMatrix::from_matrix(m), Err(Error::NumericalBreakdown(_))));
        let tiny = Array2::from_diag(&Array1::from(vec![c(1.0 + 1e-12), c(-1e-12)]));
        let rho = BatteryDensityMatrix::from_matrix(tiny).unwrap();
        assert!(rho.eigenvalues().iter().all(|&l| l >= 0.0));
        assert!((rho.eigenvalues().sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn work_and_ergotropy_of_eigenstates() {
        let h = assemble_battery_only(1, 8, 0.0, 1.0).unwrap();
        let ground = eigen_projector(&h, 0);
        assert!(stored_work(&ground, &h).unwrap().abs() < 1e-12);
        assert!(ergotropy(&ground, &h).unwrap().abs() < 1e-12);
        for n in 1..5 {
            let excited = eigen_projector(&h, n);
            assert!((stored_work(&excited, &h).unwrap() - n as f64).abs() < 1e-12);
            assert!((ergotropy(&excited, &h).unwrap() - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn passive_diagonal_state_has_no_ergotropy() {
        let h = assemble_battery_only(1, 5, 0.0, 1.0).unwrap();
        let rho = diag_rho(&[0.5, 0.25, 0.15, 0.07, 0.03]);
        assert!(ergotropy(&rho, &h).unwrap().abs() < 1e-14);
        assert!(stored_work(&rho, &h).unwrap() > 0.0);
        // Inverted populations are fully active.
        let inv = diag_rho(&[0.03, 0.07, 0.15, 0.25, 0.5]);
        let e = ergotropy(&inv, &h).unwrap();
        assert!((e - 2.24).abs() < 1e-12);
    }

    #[test]
    fn degenerate_tie_break_invariance() {
        let h = assemble_battery_only(1, 4, 0.0, 1.0).unwrap();
        let a = diag_rho(&[0.2, 0.3, 0.3, 0.2]);
        let b = diag_rho(&[0.2, 0.3, 0.2, 0.3]);
        let ea = ergotropy(&a, &h).unwrap();
        let eb = ergotropy(&b, &h).unwrap();
        assert!(ea >= -1e-12 && eb >= -1e-12);
        // Same λ multiset, both computed through a sort of tied values.
        assert!((von_neumann_entropy(&a) - von_neumann_entropy(&b)).abs() < 1e-14);
    }

    #[test]
    fn t_max_of_sine_squared() {
        let omega = 0.37;
        let eval = |ts: &[f64]| Ok(ts.iter().map(|t| (omega * t / 2.0).sin().powi(2)).collect());
        let peak = find_t_max(eval, &TmaxOptions::new(3.0 * PI / omega)).unwrap();
        let expect = PI / omega;
        assert!((peak.t_max - expect).abs() / expect < 1e-6);
        assert!((peak.w_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_max_ignores_ripples_and_extends_window() {
        // Fast small ripple on top of a slow lobe peaking at t = 10.
        let eval = |ts: &[f64]| {
            Ok(ts.iter().map(|&t| (PI * t / 20.0).sin().powi(2) + 0.01 * (7.0 * t).sin().powi(2)).collect())
        };
        let peak = find_t_max(eval, &TmaxOptions::new(4.0)).unwrap();
        assert!((peak.t_max - 10.0).abs() < 0.25, "{peak:?}");
        assert!(peak.horizon > 10.0);
    }

    #[test]
    fn t_max_reports_flat_signal() {
        let eval = |ts: &[f64]| Ok(vec![1e-12; ts.len()]);
        let err = find_t_max(eval, &TmaxOptions::new(1.0).min_transfer(1e-3)).unwrap_err();
        assert!(matches!(err, Error::NoTransfer { .. }));
    }

    #[test]
    fn summary_power_is_ratio() {
        let s = ChargingSummary::new(2.0, 3.0, 2.9, 0.01, 0.0);
        assert_eq!(s.power, 1.5);
    }
}

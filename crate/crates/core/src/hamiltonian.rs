//! Second-quantized Hamiltonians on the composite and battery-only Fock bases.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_fock_states, CompositeBasis, FockState, Parity, SpeciesConfig};
use crate::integrals::ContactTable;
use crate::linalg;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    /// Intra-battery contact strength.
    pub g_b: f64,
    /// Battery–charger contact strength.
    pub g_bc: f64,
}

/// Real symmetric `H^B` acting on the full battery Fock space, with its
/// eigendecomposition.
#[derive(Debug, Clone)]
pub struct BatteryHamiltonian {
    config: SpeciesConfig,
    g_b: f64,
    states: Vec<FockState>,
    matrix: Array2<f64>,
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl BatteryHamiltonian {
    pub fn config(&self) -> &SpeciesConfig {
        &self.config
    }

    pub fn g_b(&self) -> f64 {
        self.g_b
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Ascending eigenvalues `ε_i`.
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Eigenvectors `ψ_i` as columns.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.eigenvectors.column(i)
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> ArrayView1<'_, f64> {
        self.eigenvector(0)
    }

    /// Parity of eigenstate `i`, read off from where its weight lives.
    pub fn eigenstate_parity(&self, i: usize) -> Parity {
        let odd: f64 = self
            .eigenvector(i)
            .iter()
            .zip(&self.states)
            .filter(|(_, s)| s.parity() == Parity::Odd)
            .map(|(v, _)| v * v)
            .sum();
        if odd > 0.5 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

pub fn assemble_battery_only(
    num_particles: usize,
    num_modes: usize,
    g_b: f64,
    omega_b: f64,
) -> Result<BatteryHamiltonian> {
    let config = SpeciesConfig::battery(num_particles, num_modes, omega_b)?;
    battery_hamiltonian(&config, g_b)
}

pub fn battery_hamiltonian(config: &SpeciesConfig, g_b: f64) -> Result<BatteryHamiltonian> {
    config.validate()?;
    if !g_b.is_finite() {
        return Err(Error::InvalidParameter(format!("g_B must be finite, got {g_b}")));
    }
    let states = enumerate_fock_states(config.num_particles, config.num_modes)?;
    let matrix = battery_matrix(&states, config, g_b);
    let (eigenvalues, eigenvectors) = linalg::eigh(&matrix)?;
    Ok(BatteryHamiltonian { config: *config, g_b, states, matrix, eigenvalues, eigenvectors })
}

fn lookup_table(states: &[FockState]) -> HashMap<Vec<u8>, usize> {
    states.iter().enumerate().map(|(i, s)| (s.occupations().to_vec(), i)).collect()
}

/// One-body ladder plus `(g/2) Σ U_{ijkl} a†_i a†_j a_l a_k` on `states`.
fn battery_matrix(states: &[FockState], config: &SpeciesConfig, g_b: f64) -> Array2<f64> {
    let dim = states.len();
    let modes = config.num_modes;
    let omega = config.omega;
    let lookup = lookup_table(states);
    let table = (g_b != 0.0 && config.num_particles > 1)
        .then(|| ContactTable::cached(modes, modes, omega, omega));
    let mut matrix = Array2::<f64>::zeros((dim, dim));
    matrix.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(r, mut row)| {
        let state = &states[r];
        row[r] += state.oscillator_energy(omega);
        let Some(table) = table.as_deref() else { return };
        let mut occ = state.occupations().to_vec();
        let half_g = 0.5 * g_b;
        for k in 0..modes {
            if occ[k] == 0 {
                continue;
            }
            let a1 = (occ[k] as f64).sqrt();
            occ[k] -= 1;
            for l in 0..modes {
                if occ[l] == 0 {
                    continue;
                }
                let a2 = a1 * (occ[l] as f64).sqrt();
                occ[l] -= 1;
                for j in 0..modes {
                    let a3 = a2 * (occ[j] as f64 + 1.0).sqrt();
                    occ[j] += 1;
                    // Only i with i + j + k + l even contributes.
                    let start = (j + k + l) % 2;
                    for i in (start..modes).step_by(2) {
                        let u = table.get(i, j, k, l);
                        if u == 0.0 {
                            continue;
                        }
                        let a4 = a3 * (occ[i] as f64 + 1.0).sqrt();
                        occ[i] += 1;
                        let target = lookup[occ.as_slice()];
                        row[target] += half_g * u * a4;
                        occ[i] -= 1;
                    }
                    occ[j] -= 1;
                }
                occ[l] += 1;
            }
            occ[k] += 1;
        }
    });
    matrix
}

/// Non-interacting-between-species part: `H^B ⊗ 1 + 1 ⊗ H^C` on the kept
/// pairs.
pub fn assemble_h0(basis: &CompositeBasis, g_b: f64) -> Array2<f64> {
    let battery = battery_matrix(basis.battery_states(), basis.battery_config(), g_b);
    let omega_c = basis.charger_config().omega;
    let dim = basis.dim();
    let pairs = basis.kept_pairs();
    let mut matrix = Array2::<f64>::zeros((dim, dim));
    matrix.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(r, mut row)| {
        let (ib, ic) = pairs[r];
        row[r] += (basis.charger_mode(ic) as f64 + 0.5) * omega_c;
        for (jb, &h) in battery.row(ib).iter().enumerate() {
            if h != 0.0 {
                if let Some(c) = basis.index_of(jb, ic) {
                    row[c] += h;
                }
            }
        }
    });
    matrix
}

/// Battery–charger contact term `g_BC Σ U^{BC}_{ijkl} a†_i c†_j c_l a_k`.
pub fn assemble_hint(basis: &CompositeBasis, g_bc: f64) -> Array2<f64> {
    let dim = basis.dim();
    let mut matrix = Array2::<f64>::zeros((dim, dim));
    if g_bc == 0.0 {
        return matrix;
    }
    let bcfg = basis.battery_config();
    let ccfg = basis.charger_config();
    let (mb, mc) = (bcfg.num_modes, ccfg.num_modes);
    let table = ContactTable::cached(mb, mc, bcfg.omega, ccfg.omega);
    let pairs = basis.kept_pairs();
    let states = basis.battery_states();
    matrix.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(r, mut row)| {
        let (ib, ic) = pairs[r];
        let c = basis.charger_mode(ic);
        let mut occ = states[ib].occupations().to_vec();
        for k in 0..mb {
            if occ[k] == 0 {
                continue;
            }
            let a1 = (occ[k] as f64).sqrt();
            occ[k] -= 1;
            for i in 0..mb {
                let a2 = a1 * (occ[i] as f64 + 1.0).sqrt();
                occ[i] += 1;
                if let Some(jb) = basis.battery_index(&occ) {
                    let start = (i + k + c) % 2;
                    for j in (start..mc).step_by(2) {
                        let u = table.get(i, j, k, c);
                        if u == 0.0 {
                            continue;
                        }
                        if let Some(col) = basis.index_of(jb, j) {
                            row[col] += g_bc * u * a2;
                        }
                    }
                }
                occ[i] -= 1;
            }
            occ[k] += 1;
        }
    });
    matrix
}

/// `H0`, `Hint` and `H1 = H0 + Hint` on one composite basis.
#[derive(Debug, Clone)]
pub struct HamiltonianSet {
    pub h0: Array2<f64>,
    pub hint: Array2<f64>,
    pub h1: Array2<f64>,
    pub basis: Arc<CompositeBasis>,
    pub couplings: Couplings,
}

impl HamiltonianSet {
    pub fn assemble(basis: Arc<CompositeBasis>, couplings: Couplings) -> Result<Self> {
        if !(couplings.g_b.is_finite() && couplings.g_bc.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        let h0 = assemble_h0(&basis, couplings.g_b);
        let hint = assemble_hint(&basis, couplings.g_bc);
        let h1 = &h0 + &hint;
        Ok(HamiltonianSet { h0, hint, h1, basis, couplings })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Largest deviation from symmetry across the three matrices.
    pub fn asymmetry(&self) -> f64 {
        linalg::asymmetry(&self.h0).max(linalg::asymmetry(&self.hint)).max(linalg::asymmetry(&self.h1))
    }
}

/// Writes a matrix as CSV, row-major, after a comment header recording the
/// dimension and couplings.
pub fn dump_matrix<W: Write>(mut out: W, matrix: &Array2<f64>, couplings: Couplings) -> Result<()> {
    writeln!(
        out,
        "# schema: qbat.matrix.v1 dim={} g_B={:e} g_BC={:e}",
        matrix.nrows(),
        couplings.g_b,
        couplings.g_bc
    )?;
    for row in matrix.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

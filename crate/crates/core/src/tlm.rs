//! Analytical two-level model: the charger's excitation `|0⟩` exchanged with
//! one symmetrized battery excitation `|1⟩` of `n` quanta.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::hamiltonian::HamiltonianSet;
use crate::integrals::{fermionic_overlap, overlap_set, OverlapSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams {
    pub n: usize,
    pub num_particles: usize,
    pub g_bc: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    /// Detuning `⟨0|H1|0⟩ − ⟨1|H1|1⟩`.
    pub delta: f64,
    /// Off-diagonal coupling `g_BC √N_B |I_n|`.
    pub coupling: f64,
    /// Rabi frequency `√((2J)² + δ²)`.
    pub rabi: f64,
    pub overlaps: OverlapSet,
}

impl TwoLevelParams {
    /// Whether the model predicts any transfer at all.
    pub fn transfers(&self) -> bool {
        self.coupling > 0.0
    }

    /// Peak fraction `(2J/Ω)²` of the excitation that reaches the battery.
    pub fn contrast(&self) -> f64 {
        if self.rabi == 0.0 {
            return 0.0;
        }
        (2.0 * self.coupling / self.rabi).powi(2)
    }

    /// The 2×2 charging Hamiltonian in the basis `{|0⟩, |1⟩}`, with the
    /// overlap's sign kept on the off-diagonal.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let nb = self.num_particles as f64;
        let n = self.n as f64;
        let o = &self.overlaps;
        let e0 = 0.5 * nb * self.omega_b + 1.5 * self.omega_c + nb * self.g_bc * o.i01;
        let e1 = (0.5 * nb + n) * self.omega_b + 0.5 * self.omega_c + self.g_bc * ((nb - 1.0) * o.i00 + o.in0);
        let off = self.g_bc * nb.sqrt() * o.i_n;
        [[e0, off], [off, e1]]
    }
}

/// Restriction of the composite `H1` to `|0⟩` (all bosons in the lowest
/// mode, charger in its first excited level) and `|1⟩` (one boson promoted to
/// mode `n`, charger in its ground level).
pub fn project_h1(set: &HamiltonianSet, n: usize) -> Result<[[f64; 2]; 2]> {
    let basis = &set.basis;
    let nb = basis.battery_config().num_particles;
    let modes = basis.battery_config().num_modes;
    if n == 0 || n >= modes {
        return Err(Error::InvalidParameter(format!("excitation {n} outside 1..{modes}")));
    }
    let mut ground = vec![0u8; modes];
    ground[0] = nb as u8;
    let mut excited = ground.clone();
    excited[0] -= 1;
    excited[n] += 1;
    let missing = || Error::InvalidParameter(format!("two-level states for n = {n} are not in the retained sector"));
    let i0 = basis.index_of_fock(&ground, 1).ok_or_else(missing)?;
    let i1 = basis.index_of_fock(&excited, 0).ok_or_else(missing)?;
    let h = &set.h1;
    Ok([[h[[i0, i0]], h[[i0, i1]]], [h[[i1, i0]], h[[i1, i1]]]])
}

pub fn tlm_params(n: usize, num_particles: usize, g_bc: f64, omega_b: f64, omega_c: f64) -> Result<TwoLevelParams> {
    if num_particles == 0 {
        return Err(Error::InvalidParameter("need at least one battery particle".into()));
    }
    let overlaps = overlap_set(n, omega_b, omega_c)?;
    let nb = num_particles as f64;
    let delta = omega_c - n as f64 * omega_b
        + g_bc * (nb * overlaps.i01 - (nb - 1.0) * overlaps.i00 - overlaps.in0);
    let coupling = g_bc.abs() * nb.sqrt() * overlaps.i_n.abs();
    let rabi = ((2.0 * coupling).powi(2) + delta * delta).sqrt();
    Ok(TwoLevelParams { n, num_particles, g_bc, omega_b, omega_c, delta, coupling, rabi, overlaps })
}

/// Detuning as an explicit polynomial in `ω_C` (with `ω_B = 1`) for the
/// tabulated odd excitations.
pub fn delta_poly(n: usize, num_particles: usize, g_bc: f64, omega_c: f64) -> Result<f64> {
    let w = omega_c;
    let nb = num_particles as f64;
    let (poly, power) = match n {
        1 => (w - nb, 1.5),
        3 => (w.powi(3) + (1.5 - nb) * w * w + (3.0 - 2.0 * nb) * w - nb, 3.5),
        5 => (
            w.powi(5) + (25.0 / 8.0 - nb) * w.powi(4) + (10.0 - 4.0 * nb) * w.powi(3)
                + (5.0 - 6.0 * nb) * w * w
                + (5.0 - 4.0 * nb) * w
                - nb,
            5.5,
        ),
        7 => (
            w.powi(7) + (77.0 / 16.0 - nb) * w.powi(6) + (21.0 - 6.0 * nb) * w.powi(5)
                + (175.0 / 8.0 - 15.0 * nb) * w.powi(4)
                + (35.0 - 20.0 * nb) * w.powi(3)
                + (10.5 - 15.0 * nb) * w * w
                + (7.0 - 6.0 * nb) * w
                - nb,
            7.5,
        ),
        9 => (
            w.powi(9) + (837.0 / 128.0 - nb) * w.powi(8) + (36.0 - 8.0 * nb) * w.powi(7)
                + (231.0 / 4.0 - 28.0 * nb) * w.powi(6)
                + (126.0 - 56.0 * nb) * w.powi(5)
                + (315.0 / 4.0 - 70.0 * nb) * w.powi(4)
                + (84.0 - 56.0 * nb) * w.powi(3)
                + (18.0 - 28.0 * nb) * w * w
                + (9.0 - 8.0 * nb) * w
                - nb,
            9.5,
        ),
        _ => return Err(Error::UnsupportedExcitation(n)),
    };
    Ok(w - n as f64 + g_bc * (w / PI).sqrt() / (1.0 + w).powf(power) * poly)
}

/// Charger frequency with zero detuning for `ω_B = 1`.
pub fn resonance_solve(n: usize, num_particles: usize, g_bc: f64) -> Result<f64> {
    if delta_poly(n, num_particles, g_bc, n as f64).is_ok() {
        solve_root(n, |w| delta_poly(n, num_particles, g_bc, w))
    } else {
        resonance_solve_general(n, num_particles, g_bc, 1.0)
    }
}

pub fn resonance_solve_general(n: usize, num_particles: usize, g_bc: f64, omega_b: f64) -> Result<f64> {
    solve_root(n, |w| Ok(tlm_params(n, num_particles, g_bc, omega_b, w)?.delta))
}

/// Bisection in `[n − h, n + h]` with `h = 0.5`, widened while the bracket
/// has no sign change (never below `ω_C = 0`).
fn solve_root<F: Fn(f64) -> Result<f64>>(n: usize, delta: F) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("excitation n must be at least 1".into()));
    }
    let center = n as f64;
    let mut half = 0.5;
    let (mut lo, mut hi, mut flo, mut fhi);
    loop {
        lo = (center - half).max(1e-9);
        hi = center + half;
        flo = delta(lo)?;
        fhi = delta(hi)?;
        if flo == 0.0 {
            return Ok(lo);
        }
        if fhi == 0.0 {
            return Ok(hi);
        }
        if flo.signum() != fhi.signum() {
            break;
        }
        if half >= 8.0 * center.max(1.0) {
            return Err(Error::NoBracket { lo, hi });
        }
        half *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = delta(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `W_B(t) = nω_B (2J/Ω)² sin²(Ωt/2)`.
pub fn wb_tlm(p: &TwoLevelParams, t: f64) -> f64 {
    p.n as f64 * p.omega_b * excitation(p, t)
}

/// `max[(n−1)ω_B A, (n+1)ω_B A − ω_B]` with `A = (2J/Ω)² sin²(Ωt/2)`.
pub fn ergotropy_tlm(p: &TwoLevelParams, t: f64) -> f64 {
    let a = excitation(p, t);
    let n = p.n as f64;
    ((n - 1.0) * p.omega_b * a).max((n + 1.0) * p.omega_b * a - p.omega_b)
}

fn excitation(p: &TwoLevelParams, t: f64) -> f64 {
    p.contrast() * (0.5 * p.rabi * t).sin().powi(2)
}

/// `π / (2 g_BC √N_B |I_n|)`; infinite when the overlap vanishes.
pub fn qsl_tlm(p: &TwoLevelParams) -> f64 {
    if p.coupling == 0.0 {
        return f64::INFINITY;
    }
    PI / (2.0 * p.coupling)
}

/// `W_C(0) / τ` with `W_C(0) = ω_C`.
pub fn power_tlm(p: &TwoLevelParams) -> f64 {
    2.0 * p.omega_c * p.coupling / PI
}

/// Speed-limit time for a spin-polarized Fermi sea battery.
pub fn qsl_fermionic(num_particles: usize, n: usize, g_bc: f64, omega_b: f64, omega_c: f64) -> Result<f64> {
    let overlap = fermionic_overlap(num_particles, n, omega_b, omega_c)?;
    let j = g_bc.abs() * overlap.abs();
    if j == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(PI / (2.0 * j))
}

/// Resonant frequency, speed-limit time and power for one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlmPrediction {
    pub n: usize,
    pub num_particles: usize,
    pub g_bc: f64,
    pub omega_c_star: f64,
    pub qsl: f64,
    pub power: f64,
}

pub fn predict(n: usize, num_particles: usize, g_bc: f64) -> Result<TlmPrediction> {
    let omega_c_star = resonance_solve(n, num_particles, g_bc)?;
    let p = tlm_params(n, num_particles, g_bc, 1.0, omega_c_star)?;
    Ok(TlmPrediction { n, num_particles, g_bc, omega_c_star, qsl: qsl_tlm(&p), power: power_tlm(&p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_diagonal_difference_is_detuning() {
        let p = tlm_params(3, 2, 0.1, 1.0, 2.9).unwrap();
        let m = p.matrix();
        assert!((m[0][0] - m[1][1] - p.delta).abs() < 1e-14);
        assert!((m[0][1].abs() - p.coupling).abs() < 1e-15);
    }

    #[test]
    fn bare_degeneracy_has_no_detuning() {
        for n in [1, 3, 5, 7, 9, 11] {
            let p = tlm_params(n, 2, 0.0, 1.0, n as f64).unwrap();
            assert_eq!(p.delta, 0.0);
            assert_eq!(p.coupling, 0.0);
        }
    }

    #[test]
    fn detuning_examples() {
        let p = tlm_params(1, 2, 0.1, 1.0, 1.0).unwrap();
        let expect = 0.1 * (1.0 / PI).sqrt() / 2f64.powf(1.5) * (1.0 - 2.0);
        assert!((p.delta - expect).abs() < 1e-15);
        assert!((p.delta + 0.019947).abs() < 1e-6);
        let p3 = tlm_params(3, 2, 0.1, 1.0, 3.0).unwrap();
        let bracket = 27.0 + (1.5 - 2.0) * 9.0 + (3.0 - 4.0) * 3.0 - 2.0;
        assert_eq!(bracket, 17.5);
        assert!((p3.delta - 0.1 * (3.0 / PI).sqrt() / 4f64.powf(3.5) * bracket).abs() < 1e-15);
        assert!((p3.delta - 0.013360).abs() < 1e-6);
    }

    #[test]
    fn polynomial_detuning_examples() {
        assert!((delta_poly(1, 2, 0.1, 1.0).unwrap() + 0.019947).abs() < 1e-6);
        let bracket = 5f64.powi(5) + (25.0 / 8.0 - 1.0) * 5f64.powi(4) + 6.0 * 125.0 - 25.0 + 5.0 - 1.0;
        let expect = 0.1 * (5.0 / PI).sqrt() / 6f64.powf(5.5) * bracket;
        let v = delta_poly(5, 1, 0.1, 5.0).unwrap();
        assert!((v - expect).abs() < 1e-14);
        let general = tlm_params(5, 1, 0.1, 1.0, 5.0).unwrap().delta;
        assert!((v - general).abs() < 1e-12);
        for n in [1, 3, 5, 7, 9] {
            assert_eq!(delta_poly(n, 3, 0.0, n as f64).unwrap(), 0.0);
        }
        assert!(matches!(delta_poly(11, 1, 0.1, 11.0), Err(Error::UnsupportedExcitation(11))));
    }

    #[test]
    fn polynomial_matches_general_on_grid() {
        for n in [1, 3, 5, 7, 9] {
            for nb in 1..=4 {
                for i in 0..50 {
                    let w = 0.2 + 12.0 * i as f64 / 49.0;
                    let a = delta_poly(n, nb, 0.37, w).unwrap();
                    let b = tlm_params(n, nb, 0.37, 1.0, w).unwrap().delta;
                    assert!((a - b).abs() < 1e-12, "n={n} N={nb} ω={w}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn resonance_roots() {
        let r1 = resonance_solve(1, 2, 0.1).unwrap();
        assert!((r1 - 1.0194634876425832).abs() < 1e-10);
        let r3 = resonance_solve(3, 2, 0.1).unwrap();
        assert!((r3 - 2.9867473294563522).abs() < 1e-10);
        assert!(delta_poly(3, 2, 0.1, r3).unwrap().abs() < 1e-10);
        for n in [1, 3, 5, 7, 9, 11] {
            assert_eq!(resonance_solve(n, 2, 0.0).unwrap(), n as f64);
        }
        let r11 = resonance_solve(11, 2, 0.1).unwrap();
        assert!(tlm_params(11, 2, 0.1, 1.0, r11).unwrap().delta.abs() < 1e-10);
    }

    #[test]
    fn closed_form_dynamics() {
        let w = resonance_solve(3, 2, 0.1).unwrap();
        let p = tlm_params(3, 2, 0.1, 1.0, w).unwrap();
        assert_eq!(wb_tlm(&p, 0.0), 0.0);
        assert_eq!(ergotropy_tlm(&p, 0.0), 0.0);
        let tau = PI / (2.0 * p.coupling);
        assert!((tau - qsl_tlm(&p)).abs() < 1e-12);
        assert!((wb_tlm(&p, tau) - 3.0).abs() < 1e-9);
        assert!((ergotropy_tlm(&p, tau) - 3.0).abs() < 1e-9);
        for i in 0..200 {
            let t = i as f64 * tau / 50.0;
            let wb = wb_tlm(&p, t);
            assert!((0.0..=3.0 + 1e-12).contains(&wb));
            assert!(ergotropy_tlm(&p, t) <= wb + 1e-12);
        }
    }

    #[test]
    fn off_resonant_peak_is_incomplete() {
        let p = tlm_params(1, 2, 0.1, 1.0, 1.0).unwrap();
        let peak = wb_tlm(&p, PI / p.rabi);
        assert!(peak < 1.0);
        assert!((peak - p.contrast()).abs() < 1e-12);
    }

    #[test]
    fn speed_limit_and_power() {
        let p1 = tlm_params(1, 1, 0.1, 1.0, 1.0).unwrap();
        assert!((qsl_tlm(&p1) - PI / (2.0 * 0.1 * 0.199471)).abs() < 1e-3);
        assert!((qsl_tlm(&p1) - 78.75).abs() < 0.01);
        let p2 = tlm_params(1, 2, 0.1, 1.0, 1.0).unwrap();
        assert!((qsl_tlm(&p2) - 55.68).abs() < 0.01);
        assert!((power_tlm(&p2) / power_tlm(&p1) - 2f64.sqrt()).abs() < 1e-14);
        assert!((power_tlm(&p1) - 1.0 / qsl_tlm(&p1)).abs() < 1e-15);
        let even = tlm_params(2, 2, 0.1, 1.0, 2.0).unwrap();
        assert!(!even.transfers());
        assert!(qsl_tlm(&even).is_infinite());
    }

    #[test]
    fn fermionic_speed_limit() {
        let f1 = qsl_fermionic(1, 1, 0.1, 1.0, 1.0).unwrap();
        let b1 = qsl_tlm(&tlm_params(1, 1, 0.1, 1.0, 1.0).unwrap());
        assert!((f1 - b1).abs() < 1e-10);
        assert!(qsl_fermionic(3, 1, 0.1, 1.0, 1.0).unwrap() > f1);
        assert!(qsl_fermionic(2, 2, 0.1, 1.0, 2.0).unwrap().is_infinite());
        for wc in [0.5, 1.0] {
            let mut prev = 0.0;
            for nb in 1..=6 {
                let t = qsl_fermionic(nb, 1, 0.1, 1.0, wc).unwrap();
                assert!(t >= prev, "ω_C={wc} N={nb}");
                prev = t;
            }
        }
    }

    #[test]
    fn fermionic_speed_limit_is_not_monotone_for_higher_excitations() {
        // Independent trapezoid quadrature gives τ ≈ 80.83, 646.62, 233.69 for
        // N_B = 1, 2, 3 at n = 3, ω_C = 3, g_BC = 0.1: nodes of the Fermi-surface
        // orbitals make the overlap oscillate with N_B.
        let t: Vec<f64> = (1..=3).map(|nb| qsl_fermionic(nb, 3, 0.1, 1.0, 3.0).unwrap()).collect();
        for (got, want) in t.iter().zip([80.83, 646.62, 233.69]) {
            assert!((got - want).abs() < 0.01, "{got} vs {want}");
        }
        assert!(t[2] < t[1]);
    }

    #[test]
    fn predictions_table() {
        let p = predict(5, 2, 0.1).unwrap();
        assert!((p.omega_c_star - 5.0).abs() < 0.1);
        assert!((p.power * p.qsl - p.omega_c_star).abs() < 1e-12);
    }
}

//! Single-particle oscillator states and bosonic Fock bases.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default upper bound on the number of Fock states a single enumeration may
/// produce.
pub const DEFAULT_BASIS_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    Battery,
    Charger,
}

/// Trap and truncation parameters for one atomic species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesConfig {
    pub label: Species,
    pub omega: f64,
    pub num_modes: usize,
    pub num_particles: usize,
}

impl SpeciesConfig {
    pub fn battery(num_particles: usize, num_modes: usize, omega: f64) -> Result<Self> {
        let cfg = SpeciesConfig { label: Species::Battery, omega, num_modes, num_particles };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn charger(num_modes: usize, omega: f64) -> Result<Self> {
        let cfg = SpeciesConfig { label: Species::Charger, omega, num_modes, num_particles: 1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{:?} trap frequency must be positive, got {}",
                self.label, self.omega
            )));
        }
        if self.num_modes < 2 {
            return Err(Error::InvalidParameter(format!(
                "{:?} needs at least 2 modes, got {}",
                self.label, self.num_modes
            )));
        }
        if self.num_particles == 0 || self.num_particles > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "{:?} particle number must be in 1..=255, got {}",
                self.label, self.num_particles
            )));
        }
        if self.label == Species::Charger && self.num_particles != 1 {
            return Err(Error::InvalidParameter("the charger holds exactly one particle".into()));
        }
        Ok(())
    }
}

/// Spatial parity `(-1)^{Σ_j j n_j}` of a Fock configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn from_quanta(quanta: usize) -> Self {
        if quanta % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn combine(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Which total-parity block of the product space to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParitySector {
    Even,
    Odd,
    Full,
}

impl ParitySector {
    pub fn admits(self, parity: Parity) -> bool {
        match self {
            ParitySector::Full => true,
            ParitySector::Even => parity == Parity::Even,
            ParitySector::Odd => parity == Parity::Odd,
        }
    }
}

impl fmt::Display for ParitySector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParitySector::Even => "even",
            ParitySector::Odd => "odd",
            ParitySector::Full => "full",
        };
        f.write_str(s)
    }
}

/// Occupation numbers of the truncated single-particle modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState {
    occupations: Vec<u8>,
}

impl FockState {
    pub fn new(occupations: Vec<u8>) -> Self {
        FockState { occupations }
    }

    pub fn occupations(&self) -> &[u8] {
        &self.occupations
    }

    pub fn occupation(&self, mode: usize) -> u8 {
        self.occupations[mode]
    }

    pub fn num_modes(&self) -> usize {
        self.occupations.len()
    }

    pub fn num_particles(&self) -> usize {
        self.occupations.iter().map(|&n| n as usize).sum()
    }

    /// Total oscillator quanta `Σ_j j n_j`.
    pub fn quanta(&self) -> usize {
        self.occupations.iter().enumerate().map(|(j, &n)| j * n as usize).sum()
    }

    pub fn parity(&self) -> Parity {
        Parity::from_quanta(self.quanta())
    }

    /// Non-interacting energy `Σ_j (j + 1/2) ω n_j`.
    pub fn oscillator_energy(&self, omega: f64) -> f64 {
        self.occupations
            .iter()
            .enumerate()
            .map(|(j, &n)| (j as f64 + 0.5) * omega * n as f64)
            .sum()
    }

    /// Index of the occupied mode of a single-particle state.
    pub fn single_mode(&self) -> Option<usize> {
        if self.num_particles() != 1 {
            return None;
        }
        self.occupations.iter().position(|&n| n == 1)
    }

    /// `a†_create a_destroy |self⟩` as (target, bosonic amplitude), or `None`
    /// when the destroyed mode is empty.
    pub fn hop(&self, create: usize, destroy: usize) -> Option<(FockState, f64)> {
        let nd = self.occupations[destroy];
        if nd == 0 {
            return None;
        }
        let mut occ = self.occupations.clone();
        occ[destroy] -= 1;
        let nc = occ[create];
        occ[create] += 1;
        let amp = (nd as f64).sqrt() * (nc as f64 + 1.0).sqrt();
        Some((FockState { occupations: occ }, amp))
    }
}

impl Borrow<[u8]> for FockState {
    fn borrow(&self) -> &[u8] {
        &self.occupations
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.occupations.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// L²-normalized `n`-th eigenfunction of a unit-mass oscillator of frequency
/// `omega`, evaluated at `x`.
pub fn hermite_eigenfunction(n: usize, omega: f64, x: f64) -> f64 {
    let xi = omega.sqrt() * x;
    let mut prev = 0.0;
    let mut cur = (omega / PI).powf(0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * xi * cur
            - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Values of the eigenfunctions `0..count` at `x`, written into `out`.
pub fn hermite_eigenfunctions_into(omega: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let xi = omega.sqrt() * x;
    out[0] = (omega / PI).powf(0.25) * (-0.5 * xi * xi).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * xi * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * xi * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Number of ways to place `particles` bosons in `modes` modes, saturating at
/// `usize::MAX`.
pub fn fock_dimension(particles: usize, modes: usize) -> usize {
    if modes == 0 {
        return usize::from(particles == 0);
    }
    // C(particles + modes - 1, particles), built incrementally so each partial
    // product is itself a binomial coefficient.
    let k = particles.min(modes - 1);
    let n = particles + modes - 1;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

pub fn enumerate_fock_states(particles: usize, modes: usize) -> Result<Vec<FockState>> {
    enumerate_fock_states_capped(particles, modes, DEFAULT_BASIS_CAP)
}

/// All bosonic configurations of `particles` over `modes`, in descending
/// lexicographic order of the occupation vector (so the first state has every
/// particle in mode 0).
pub fn enumerate_fock_states_capped(
    particles: usize,
    modes: usize,
    cap: usize,
) -> Result<Vec<FockState>> {
    if particles == 0 || modes == 0 {
        return Err(Error::InvalidParameter(format!(
            "need at least one particle and one mode, got N = {particles}, M = {modes}"
        )));
    }
    if particles > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!("at most 255 particles, got {particles}")));
    }
    let count = fock_dimension(particles, modes);
    if count > cap {
        return Err(Error::BasisTooLarge { count, cap });
    }
    let mut out = Vec::with_capacity(count);
    let mut occ = vec![0u8; modes];
    fill(&mut occ, 0, particles, &mut out);
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

fn fill(occ: &mut [u8], mode: usize, left: usize, out: &mut Vec<FockState>) {
    if mode + 1 == occ.len() {
        occ[mode] = left as u8;
        out.push(FockState { occupations: occ.to_vec() });
        occ[mode] = 0;
        return;
    }
    for n in (0..=left).rev() {
        occ[mode] = n as u8;
        fill(occ, mode + 1, left - n, out);
    }
    occ[mode] = 0;
}

/// Parity-filtered tensor product of battery and charger Fock bases.
#[derive(Debug, Clone)]
pub struct CompositeBasis {
    battery: SpeciesConfig,
    charger: SpeciesConfig,
    battery_states: Vec<FockState>,
    charger_states: Vec<FockState>,
    kept_pairs: Vec<(usize, usize)>,
    sector: ParitySector,
    pair_index: Vec<Option<usize>>,
    battery_lookup: HashMap<FockState, usize>,
}

impl CompositeBasis {
    pub fn build(
        battery: &SpeciesConfig,
        charger: &SpeciesConfig,
        sector: ParitySector,
    ) -> Result<Self> {
        Self::build_capped(battery, charger, sector, DEFAULT_BASIS_CAP)
    }

    pub fn build_capped(
        battery: &SpeciesConfig,
        charger: &SpeciesConfig,
        sector: ParitySector,
        cap: usize,
    ) -> Result<Self> {
        battery.validate()?;
        charger.validate()?;
        if battery.label != Species::Battery || charger.label != Species::Charger {
            return Err(Error::InvalidParameter("species labels are swapped".into()));
        }
        let battery_states =
            enumerate_fock_states_capped(battery.num_particles, battery.num_modes, cap)?;
        let charger_states =
            enumerate_fock_states_capped(charger.num_particles, charger.num_modes, cap)?;
        let (db, dc) = (battery_states.len(), charger_states.len());
        if db.saturating_mul(dc) > cap.saturating_mul(2) {
            return Err(Error::BasisTooLarge { count: db.saturating_mul(dc), cap });
        }

        let charger_parity: Vec<Parity> = charger_states.iter().map(FockState::parity).collect();
        let mut kept_pairs = Vec::new();
        let mut pair_index = vec![None; db * dc];
        for (ib, b) in battery_states.iter().enumerate() {
            let pb = b.parity();
            for (ic, &pc) in charger_parity.iter().enumerate() {
                if sector.admits(pb.combine(pc)) {
                    pair_index[ib * dc + ic] = Some(kept_pairs.len());
                    kept_pairs.push((ib, ic));
                }
            }
        }
        if kept_pairs.is_empty() {
            return Err(Error::EmptySector(sector.to_string()));
        }
        if kept_pairs.len() > cap {
            return Err(Error::BasisTooLarge { count: kept_pairs.len(), cap });
        }
        let battery_lookup =
            battery_states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(CompositeBasis {
            battery: *battery,
            charger: *charger,
            battery_states,
            charger_states,
            kept_pairs,
            sector,
            pair_index,
            battery_lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.kept_pairs.len()
    }

    pub fn battery_config(&self) -> &SpeciesConfig {
        &self.battery
    }

    pub fn charger_config(&self) -> &SpeciesConfig {
        &self.charger
    }

    pub fn battery_states(&self) -> &[FockState] {
        &self.battery_states
    }

    pub fn charger_states(&self) -> &[FockState] {
        &self.charger_states
    }

    pub fn kept_pairs(&self) -> &[(usize, usize)] {
        &self.kept_pairs
    }

    pub fn sector(&self) -> ParitySector {
        self.sector
    }

    pub fn battery_dim(&self) -> usize {
        self.battery_states.len()
    }

    pub fn charger_dim(&self) -> usize {
        self.charger_states.len()
    }

    /// Position of the product state `(battery index, charger index)` in the
    /// kept basis.
    pub fn index_of(&self, battery: usize, charger: usize) -> Option<usize> {
        if battery >= self.battery_dim() || charger >= self.charger_dim() {
            return None;
        }
        self.pair_index[battery * self.charger_dim() + charger]
    }

    pub fn battery_index(&self, occupations: &[u8]) -> Option<usize> {
        self.battery_lookup.get(occupations).copied()
    }

    /// Kept-basis position of `battery ⊗ (charger particle in mode)`.
    pub fn index_of_fock(&self, battery: &[u8], charger_mode: usize) -> Option<usize> {
        let ib = self.battery_index(battery)?;
        self.index_of(ib, self.charger_index_of_mode(charger_mode)?)
    }

    /// Mode occupied by the charger particle in charger state `ic`.
    pub fn charger_mode(&self, ic: usize) -> usize {
        self.charger_states[ic].single_mode().expect("charger holds one particle")
    }

    /// Charger state index whose particle sits in `mode`.
    pub fn charger_index_of_mode(&self, mode: usize) -> Option<usize> {
        (mode < self.charger_dim()).then_some(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid<F: Fn(f64) -> f64>(f: F, half_width: f64, steps: usize) -> f64 {
        let h = 2.0 * half_width / steps as f64;
        (0..=steps)
            .map(|i| {
                let x = -half_width + i as f64 * h;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                w * f(x)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn ground_state_at_origin() {
        let v = hermite_eigenfunction(0, 1.0, 0.0);
        assert!((v - PI.powf(-0.25)).abs() < 1e-15);
        assert!((v - 0.751126).abs() < 1e-6);
        let norm = trapezoid(|x| hermite_eigenfunction(0, 1.0, x).powi(2), 12.0, 4000);
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odd_function_vanishes_at_origin() {
        assert_eq!(hermite_eigenfunction(1, 1.0, 0.0), 0.0);
    }

    #[test]
    fn second_level_at_origin_is_negative_and_normalized() {
        let v = hermite_eigenfunction(2, 4.0, 0.0);
        let expect = -(4.0 / PI).powf(0.25) / 2f64.sqrt();
        assert!(v < 0.0);
        assert!((v - expect).abs() < 1e-14);
        let norm = trapezoid(|x| hermite_eigenfunction(2, 4.0, x).powi(2), 8.0, 4000);
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn high_levels_stay_finite() {
        for &x in &[0.0, 3.0, 13.0, 40.0] {
            let v = hermite_eigenfunction(150, 1.0, x);
            assert!(v.is_finite());
        }
    }

    #[test]
    fn batch_evaluation_matches_single() {
        let mut buf = vec![0.0; 20];
        hermite_eigenfunctions_into(2.5, 0.7, &mut buf);
        for (n, v) in buf.iter().enumerate() {
            assert!((v - hermite_eigenfunction(n, 2.5, 0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_particle_enumeration() {
        let states = enumerate_fock_states(1, 3).unwrap();
        let occ: Vec<&[u8]> = states.iter().map(|s| s.occupations()).collect();
        assert_eq!(occ, vec![&[1, 0, 0][..], &[0, 1, 0], &[0, 0, 1]]);
    }

    #[test]
    fn two_particles_three_modes() {
        let states = enumerate_fock_states(2, 3).unwrap();
        assert_eq!(states.len(), 6);
        assert_eq!(states[0].occupations(), &[2, 0, 0]);
        assert_eq!(states[5].occupations(), &[0, 0, 2]);
    }

    #[test]
    fn three_particles_twelve_modes_matches_brute_force() {
        let states = enumerate_fock_states(3, 12).unwrap();
        // Brute force: count non-decreasing mode triples.
        let mut brute = 0;
        for a in 0..12 {
            for b in a..12 {
                for _c in b..12 {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 364);
        assert_eq!(states.len(), 364);
        assert!(states.windows(2).all(|w| w[0] > w[1]), "strictly descending");
        assert!(states.iter().all(|s| s.num_particles() == 3));
    }

    #[test]
    fn enumeration_cap() {
        let err = enumerate_fock_states_capped(3, 12, 100).unwrap_err();
        assert!(matches!(err, Error::BasisTooLarge { count: 364, cap: 100 }));
    }

    #[test]
    fn fock_dimension_formula() {
        assert_eq!(fock_dimension(3, 12), 364);
        assert_eq!(fock_dimension(2, 24), 300);
        assert_eq!(fock_dimension(1, 7), 7);
    }

    #[test]
    fn hop_amplitudes() {
        let s = FockState::new(vec![2, 1, 0]);
        let (t, amp) = s.hop(1, 0).unwrap();
        assert_eq!(t.occupations(), &[1, 2, 0]);
        assert!((amp - (2.0f64 * 2.0).sqrt()).abs() < 1e-15);
        assert!(s.hop(0, 2).is_none());
        let (same, n) = s.hop(0, 0).unwrap();
        assert_eq!(same, s);
        assert!((n - 2.0).abs() < 1e-15);
    }

    #[test]
    fn odd_sector_single_boson() {
        let b = SpeciesConfig::battery(1, 2, 1.0).unwrap();
        let c = SpeciesConfig::charger(2, 1.0).unwrap();
        let basis = CompositeBasis::build(&b, &c, ParitySector::Odd).unwrap();
        assert_eq!(basis.dim(), 2);
        // (φ0, ϕ1) and (φ1, ϕ0)
        assert_eq!(basis.kept_pairs(), &[(0, 1), (1, 0)]);
        assert_eq!(basis.battery_states()[0].occupations(), &[1, 0]);
        assert_eq!(basis.charger_mode(1), 1);
    }

    #[test]
    fn odd_sector_two_bosons() {
        let b = SpeciesConfig::battery(2, 2, 1.0).unwrap();
        let c = SpeciesConfig::charger(2, 1.0).unwrap();
        let full = CompositeBasis::build(&b, &c, ParitySector::Full).unwrap();
        let odd = CompositeBasis::build(&b, &c, ParitySector::Odd).unwrap();
        assert_eq!(full.dim(), 6);
        // Filter by hand: battery quanta {0,1,2} for |2,0⟩,|1,1⟩,|0,2⟩.
        let brute = full
            .kept_pairs()
            .iter()
            .filter(|&&(ib, ic)| (full.battery_states()[ib].quanta() + ic) % 2 == 1)
            .count();
        assert_eq!(brute, 3);
        assert_eq!(odd.dim(), 3);
    }

    #[test]
    fn full_sector_is_product() {
        for (nb, mb, mc) in [(1, 4, 3), (2, 5, 4), (3, 6, 2)] {
            let b = SpeciesConfig::battery(nb, mb, 1.0).unwrap();
            let c = SpeciesConfig::charger(mc, 2.0).unwrap();
            let full = CompositeBasis::build(&b, &c, ParitySector::Full).unwrap();
            assert_eq!(full.dim(), fock_dimension(nb, mb) * mc);
        }
    }

    #[test]
    fn deterministic_ordering() {
        let b = SpeciesConfig::battery(3, 6, 1.0).unwrap();
        let c = SpeciesConfig::charger(5, 3.0).unwrap();
        let a1 = CompositeBasis::build(&b, &c, ParitySector::Odd).unwrap();
        let a2 = CompositeBasis::build(&b, &c, ParitySector::Odd).unwrap();
        assert_eq!(a1.kept_pairs(), a2.kept_pairs());
        assert_eq!(a1.battery_states(), a2.battery_states());
    }

    #[test]
    fn sectors_partition_full() {
        let b = SpeciesConfig::battery(2, 5, 1.0).unwrap();
        let c = SpeciesConfig::charger(4, 1.0).unwrap();
        let e = CompositeBasis::build(&b, &c, ParitySector::Even).unwrap();
        let o = CompositeBasis::build(&b, &c, ParitySector::Odd).unwrap();
        let f = CompositeBasis::build(&b, &c, ParitySector::Full).unwrap();
        assert_eq!(e.dim() + o.dim(), f.dim());
    }

    #[test]
    fn invalid_configs() {
        assert!(SpeciesConfig::battery(1, 1, 1.0).is_err());
        assert!(SpeciesConfig::battery(0, 4, 1.0).is_err());
        assert!(SpeciesConfig::battery(2, 4, -1.0).is_err());
        let bad = SpeciesConfig { label: Species::Charger, omega: 1.0, num_modes: 4, num_particles: 2 };
        assert!(bad.validate().is_err());
    }
}

//! One-body energies, contact-interaction integrals over oscillator
//! eigenfunctions, and the overlaps entering the two-level model.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::basis::{hermite_eigenfunctions_into, SpeciesConfig};
use crate::{Error, Result};

/// Gauss–Hermite rule in "function weight" form: `Σ w_q f(x_q)` integrates
/// `f(x) = e^{-scale·x²}·p(x)` exactly for polynomials `p` of degree below
/// `2·len`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scale: f64,
}

impl QuadratureRule {
    /// Unit-scale rule with `count` nodes, shared through a process-wide cache.
    pub fn gauss_hermite(count: usize) -> Arc<QuadratureRule> {
        static RULES: OnceLock<RwLock<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
        let rules = RULES.get_or_init(Default::default);
        if let Some(rule) = rules.read().expect("rule cache poisoned").get(&count) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(compute_gauss_hermite(count));
        rules.write().expect("rule cache poisoned").entry(count).or_insert(rule).clone()
    }

    /// Rule for the Gaussian `e^{-scale·x²}`.
    pub fn scaled(&self, scale: f64) -> QuadratureRule {
        let r = (scale / self.scale).sqrt();
        QuadratureRule {
            nodes: self.nodes.iter().map(|y| y / r).collect(),
            weights: self.weights.iter().map(|w| w / r).collect(),
            scale,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes by Newton iteration on the normalized Hermite recurrence, with the
/// usual asymptotic starting guesses.
fn compute_gauss_hermite(n: usize) -> QuadratureRule {
    assert!(n >= 1, "quadrature needs at least one node");
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (p1, p2) = hermite_poly_pair(n, z, pim4);
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                let (_, p2) = hermite_poly_pair(n, z, pim4);
                pp = (2.0 * nf).sqrt() * p2;
                break;
            }
        }
        // Standard weight is 2/pp²; fold the Gaussian back in.
        let g = pp * (-0.5 * z * z).exp();
        let w = 2.0 / (g * g);
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights, scale: 1.0 }
}

/// Normalized Hermite polynomials of degree `n` and `n-1` at `z`.
fn hermite_poly_pair(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Nodes needed for exactness on a residual polynomial of degree `degree`,
/// with a fixed safety margin.
pub fn node_count(degree: usize) -> usize {
    degree.div_ceil(2) + 1 + 8
}

/// `(i + 1/2)·ω` for mode `i` of a species.
pub fn one_body_energy(species: &SpeciesConfig, mode: usize) -> Result<f64> {
    if mode >= species.num_modes {
        return Err(Error::InvalidParameter(format!(
            "mode {mode} outside the {} retained levels",
            species.num_modes
        )));
    }
    Ok((mode as f64 + 0.5) * species.omega)
}

/// `∫ψ_i ψ_j ψ_k ψ_l dx`, with `i`, `k` at frequency `omega_a` and `j`, `l` at
/// `omega_b`.
pub fn two_body_contact(i: usize, j: usize, k: usize, l: usize, omega_a: f64, omega_b: f64) -> f64 {
    let degree = i + j + k + l;
    if degree % 2 == 1 {
        return 0.0;
    }
    let rule = QuadratureRule::gauss_hermite(node_count(degree)).scaled(omega_a + omega_b);
    let na = i.max(k) + 1;
    let nb = j.max(l) + 1;
    let mut fa = vec![0.0; na];
    let mut fb = vec![0.0; nb];
    rule.integrate(|x| {
        hermite_eigenfunctions_into(omega_a, x, &mut fa);
        hermite_eigenfunctions_into(omega_b, x, &mut fb);
        (fa[i] * fa[k]) * (fb[j] * fb[l])
    })
}

/// All contact integrals between `modes_a` levels at `omega_a` (indices `i`,
/// `k`) and `modes_b` levels at `omega_b` (indices `j`, `l`).
#[derive(Debug, Clone)]
pub struct ContactTable {
    modes_a: usize,
    modes_b: usize,
    omega_a: f64,
    omega_b: f64,
    values: Array2<f64>,
}

impl ContactTable {
    pub fn compute(modes_a: usize, modes_b: usize, omega_a: f64, omega_b: f64) -> Self {
        let degree = 2 * (modes_a.saturating_sub(1) + modes_b.saturating_sub(1));
        let rule = QuadratureRule::gauss_hermite(node_count(degree)).scaled(omega_a + omega_b);
        let q = rule.len();
        let mut a = Array2::<f64>::zeros((q, modes_a * modes_a));
        let mut b = Array2::<f64>::zeros((q, modes_b * modes_b));
        let mut fa = vec![0.0; modes_a];
        let mut fb = vec![0.0; modes_b];
        for (iq, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            hermite_eigenfunctions_into(omega_a, x, &mut fa);
            hermite_eigenfunctions_into(omega_b, x, &mut fb);
            for i in 0..modes_a {
                for k in 0..modes_a {
                    a[[iq, i * modes_a + k]] = w * (fa[i] * fa[k]);
                }
            }
            for j in 0..modes_b {
                for l in 0..modes_b {
                    b[[iq, j * modes_b + l]] = fb[j] * fb[l];
                }
            }
        }
        let mut values = a.t().dot(&b);
        // Parity zeros are exact, not round-off.
        for i in 0..modes_a {
            for k in 0..modes_a {
                for j in 0..modes_b {
                    for l in 0..modes_b {
                        if (i + j + k + l) % 2 == 1 {
                            values[[i * modes_a + k, j * modes_b + l]] = 0.0;
                        }
                    }
                }
            }
        }
        ContactTable { modes_a, modes_b, omega_a, omega_b, values }
    }

    /// Shared table from a process-wide cache keyed by cutoffs and quantized
    /// frequencies.
    pub fn cached(modes_a: usize, modes_b: usize, omega_a: f64, omega_b: f64) -> Arc<ContactTable> {
        type Key = (usize, usize, i64, i64);
        const CAPACITY: usize = 256;
        static TABLES: OnceLock<RwLock<HashMap<Key, Arc<ContactTable>>>> = OnceLock::new();
        let key = (modes_a, modes_b, quantize(omega_a), quantize(omega_b));
        let tables = TABLES.get_or_init(Default::default);
        if let Some(t) = tables.read().expect("table cache poisoned").get(&key) {
            return Arc::clone(t);
        }
        let table = Arc::new(ContactTable::compute(modes_a, modes_b, omega_a, omega_b));
        let mut guard = tables.write().expect("table cache poisoned");
        if guard.len() >= CAPACITY {
            guard.clear();
        }
        guard.entry(key).or_insert(table).clone()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.values[[i * self.modes_a + k, j * self.modes_b + l]]
    }

    pub fn modes_a(&self) -> usize {
        self.modes_a
    }

    pub fn modes_b(&self) -> usize {
        self.modes_b
    }

    pub fn omegas(&self) -> (f64, f64) {
        (self.omega_a, self.omega_b)
    }
}

fn quantize(omega: f64) -> i64 {
    (omega / 1e-12).round() as i64
}

/// Overlaps that fix the two-level model for a target excitation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapSet {
    pub n: usize,
    /// `∫φ₀²ϕ₀²`
    pub i00: f64,
    /// `∫φ₀²ϕ₁²`
    pub i01: f64,
    /// `∫φ_n²ϕ₀²`
    pub in0: f64,
    /// `∫φ₀ϕ₁φ_nϕ₀`, the transfer overlap.
    pub i_n: f64,
}

/// Transfer overlap `∫φ₀ϕ₁φ_nϕ₀` in closed form; zero for even `n`.
pub fn overlap_in(n: usize, omega_b: f64, omega_c: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("excitation n must be at least 1".into()));
    }
    if n % 2 == 0 {
        return Ok(0.0);
    }
    let k = (n - 1) / 2;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    // √(n!/2^{n-1}) / k! accumulated as a running product to avoid factorials.
    let mut ratio = 1.0f64;
    for m in 1..=n {
        ratio *= (m as f64).sqrt();
    }
    ratio /= 2f64.powf((n as f64 - 1.0) / 2.0);
    for m in 1..=k {
        ratio /= m as f64;
    }
    let s = omega_b + omega_c;
    Ok(sign * ratio / PI.sqrt() * omega_b * omega_c.powf((n as f64 + 1.0) / 2.0)
        / s.powf((n as f64 + 2.0) / 2.0))
}

/// `∫φ_n²ϕ₀²` from the tabulated closed forms for `n ∈ {1,3,5,7,9}`.
pub fn in0_closed_form(n: usize, omega_b: f64, omega_c: f64) -> Option<f64> {
    let (wb, wc) = (omega_b, omega_c);
    let s = wb + wc;
    let pre = wb * (wb * wc).sqrt() / PI.sqrt();
    let (coef, poly, power) = match n {
        1 => (1.0, 1.0, 1.5),
        3 => (0.5, 3.0 * wc.powi(2) + 2.0 * wb.powi(2), 3.5),
        5 => (
            0.125,
            15.0 * wc.powi(4) + 40.0 * wb.powi(2) * wc.powi(2) + 8.0 * wb.powi(4),
            5.5,
        ),
        7 => (
            1.0 / 16.0,
            35.0 * wc.powi(6)
                + 210.0 * wb.powi(2) * wc.powi(4)
                + 168.0 * wb.powi(4) * wc.powi(2)
                + 16.0 * wb.powi(6),
            7.5,
        ),
        9 => (
            1.0 / 128.0,
            315.0 * wc.powi(8)
                + 3360.0 * wb.powi(2) * wc.powi(6)
                + 6048.0 * wb.powi(4) * wc.powi(4)
                + 2304.0 * wb.powi(6) * wc.powi(2)
                + 128.0 * wb.powi(8),
            9.5,
        ),
        _ => return None,
    };
    Some(coef * pre * poly / s.powf(power))
}

pub fn overlap_set(n: usize, omega_b: f64, omega_c: f64) -> Result<OverlapSet> {
    if !(omega_b > 0.0 && omega_c > 0.0) {
        return Err(Error::InvalidParameter("trap frequencies must be positive".into()));
    }
    let s = omega_b + omega_c;
    let i00 = (omega_b * omega_c / s).sqrt() / PI.sqrt();
    let i01 = omega_c * (omega_b * omega_c).sqrt() / s.powf(1.5) / PI.sqrt();
    let in0 = match in0_closed_form(n, omega_b, omega_c) {
        Some(v) => v,
        None => two_body_contact(n, 0, n, 0, omega_b, omega_c),
    };
    let i_n = overlap_in(n, omega_b, omega_c)?;
    Ok(OverlapSet { n, i00, i01, in0, i_n })
}

/// `∫φ_{N−1}ϕ₁φ_{N+n−1}ϕ₀`: transfer overlap for a spin-polarized Fermi sea
/// of `num_particles` in the battery.
pub fn fermionic_overlap(num_particles: usize, n: usize, omega_b: f64, omega_c: f64) -> Result<f64> {
    if num_particles == 0 || n == 0 {
        return Err(Error::InvalidParameter("need N_B ≥ 1 and n ≥ 1".into()));
    }
    let top = num_particles - 1;
    Ok(two_body_contact(top, 1, top + n, 0, omega_b, omega_c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{hermite_eigenfunction, SpeciesConfig};

    const GRID: [f64; 5] = [0.5, 1.0, 3.0, 5.0, 9.0];

    /// Independent oracle: composite Simpson on a wide interval.
    fn simpson<F: Fn(f64) -> f64>(f: F, half_width: f64, steps: usize) -> f64 {
        let h = 2.0 * half_width / steps as f64;
        let mut acc = f(-half_width) + f(half_width);
        for i in 1..steps {
            let x = -half_width + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0
    }

    fn contact_oracle(i: usize, j: usize, k: usize, l: usize, wa: f64, wb: f64) -> f64 {
        simpson(
            |x| {
                hermite_eigenfunction(i, wa, x)
                    * hermite_eigenfunction(j, wb, x)
                    * hermite_eigenfunction(k, wa, x)
                    * hermite_eigenfunction(l, wb, x)
            },
            14.0,
            20_000,
        )
    }

    #[test]
    fn rule_integrates_gaussian_moments() {
        let rule = QuadratureRule::gauss_hermite(12);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        let r = rule.scaled(1.0);
        let m0 = r.integrate(|x| (-x * x).exp());
        let m4 = r.integrate(|x| x.powi(4) * (-x * x).exp());
        assert!((m0 - PI.sqrt()).abs() < 1e-13);
        assert!((m4 - 0.75 * PI.sqrt()).abs() < 1e-13);
        let s = QuadratureRule::gauss_hermite(10).scaled(3.0);
        let m2 = s.integrate(|x| x * x * (-3.0 * x * x).exp());
        assert!((m2 - 0.5 * (PI / 27.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn eigenfunctions_orthonormal_under_quadrature() {
        let m = 30;
        let rule = QuadratureRule::gauss_hermite(node_count(2 * m)).scaled(1.0);
        let mut buf = vec![0.0; m];
        let mut gram = vec![0.0; m * m];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            hermite_eigenfunctions_into(1.0, x, &mut buf);
            for a in 0..m {
                for b in 0..m {
                    gram[a * m + b] += w * buf[a] * buf[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * m + b] - expect).abs() < 1e-10, "({a},{b})");
            }
        }
    }

    #[test]
    fn one_body_energies() {
        let b = SpeciesConfig::battery(1, 8, 1.0).unwrap();
        let c = SpeciesConfig::charger(4, 3.0).unwrap();
        assert_eq!(one_body_energy(&b, 0).unwrap(), 0.5);
        assert_eq!(one_body_energy(&c, 1).unwrap(), 4.5);
        assert_eq!(one_body_energy(&b, 7).unwrap(), 7.5);
        assert!(one_body_energy(&c, 4).is_err());
    }

    #[test]
    fn contact_examples() {
        let v = two_body_contact(0, 0, 0, 0, 1.0, 1.0);
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
        assert!((v - 0.398942).abs() < 1e-6);
        assert_eq!(two_body_contact(0, 1, 0, 0, 1.0, 1.0), 0.0);
        let w = two_body_contact(0, 0, 0, 0, 1.0, 3.0);
        assert!((w - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-14);
        assert!((w - 0.488603).abs() < 1e-6);
    }

    #[test]
    fn contact_matches_independent_quadrature() {
        for &(i, j, k, l) in &[(0, 1, 3, 0), (2, 2, 4, 0), (5, 3, 1, 1), (7, 0, 7, 0)] {
            for &wc in &[0.5, 3.0] {
                let q = two_body_contact(i, j, k, l, 1.0, wc);
                let o = contact_oracle(i, j, k, l, 1.0, wc);
                assert!((q - o).abs() < 1e-10, "{i}{j}{k}{l} ω={wc}: {q} vs {o}");
            }
        }
    }

    #[test]
    fn contact_symmetries() {
        let (wa, wb) = (1.0, 2.7);
        for (i, j, k, l) in [(1, 2, 3, 0), (4, 1, 0, 3), (2, 2, 6, 4)] {
            let v = two_body_contact(i, j, k, l, wa, wb);
            assert_eq!(v, two_body_contact(k, j, i, l, wa, wb));
            assert_eq!(v, two_body_contact(i, l, k, j, wa, wb));
        }
        let v = two_body_contact(1, 2, 3, 4, 1.3, 1.3);
        for p in [(2, 1, 3, 4), (4, 3, 2, 1), (3, 4, 1, 2), (1, 4, 3, 2)] {
            let u = two_body_contact(p.0, p.1, p.2, p.3, 1.3, 1.3);
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn table_agrees_with_direct_evaluation() {
        let t = ContactTable::compute(6, 5, 1.0, 2.5);
        for i in 0..6 {
            for k in 0..6 {
                for j in 0..5 {
                    for l in 0..5 {
                        let d = two_body_contact(i, j, k, l, 1.0, 2.5);
                        assert!((t.get(i, j, k, l) - d).abs() < 1e-13);
                        assert_eq!(t.get(i, j, k, l), t.get(k, j, i, l));
                        assert_eq!(t.get(i, j, k, l), t.get(i, l, k, j));
                    }
                }
            }
        }
        let a = ContactTable::cached(6, 5, 1.0, 2.5);
        let b = ContactTable::cached(6, 5, 1.0, 2.5 + 1e-14);
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn transfer_overlap_examples() {
        let i1 = overlap_in(1, 1.0, 1.0).unwrap();
        assert!((i1 - 1.0 / (PI.sqrt() * 2f64.powf(1.5))).abs() < 1e-15);
        assert!((i1 - 0.199471).abs() < 1e-6);
        assert_eq!(overlap_in(2, 1.0, 1.0).unwrap(), 0.0);
        let i3 = overlap_in(3, 1.0, 1.0).unwrap();
        assert!((i3 + (3.0 / (2.0 * PI)).sqrt() / 2f64.powf(2.5)).abs() < 1e-15);
        assert!((i3 + 0.122151).abs() < 1e-6);
        // The closed form at n = 5 evaluates to √(30/16π)/2^{7/2}.
        let i5 = overlap_in(5, 1.0, 1.0).unwrap();
        assert!((i5 - (30.0 / (16.0 * PI)).sqrt() / 2f64.powf(3.5)).abs() < 1e-15);
        assert!((i5 - 0.068284).abs() < 1e-6);
        assert!(overlap_in(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for &wc in &GRID {
            let s = overlap_set(1, 1.0, wc).unwrap();
            assert!((s.i00 - contact_oracle(0, 0, 0, 0, 1.0, wc)).abs() < 1e-10);
            assert!((s.i01 - contact_oracle(0, 1, 0, 1, 1.0, wc)).abs() < 1e-10);
            for n in [1, 3, 5, 7, 9, 11] {
                let closed = overlap_in(n, 1.0, wc).unwrap();
                let quad = two_body_contact(0, 1, n, 0, 1.0, wc);
                assert!((closed - quad).abs() < 1e-10, "I_{n} at ω_C={wc}");
                let tab = in0_closed_form(n, 1.0, wc);
                if let Some(tab) = tab {
                    let quad = contact_oracle(n, 0, n, 0, 1.0, wc);
                    assert!((tab - quad).abs() < 1e-10, "I_{n}0 at ω_C={wc}");
                }
            }
        }
        // General ω_B.
        let closed = overlap_in(5, 1.7, 0.8).unwrap();
        assert!((closed - contact_oracle(0, 1, 5, 0, 1.7, 0.8)).abs() < 1e-10);
        let tab = in0_closed_form(7, 1.7, 0.8).unwrap();
        assert!((tab - contact_oracle(7, 0, 7, 0, 1.7, 0.8)).abs() < 1e-10);
    }

    #[test]
    fn overlap_set_examples() {
        let s = overlap_set(1, 1.0, 1.0).unwrap();
        assert!((s.i00 - 0.398942).abs() < 1e-6);
        assert!((s.i01 - 0.199471).abs() < 1e-6);
        assert!((s.in0 - 0.199471).abs() < 1e-6);
        assert!((s.i_n - 0.199471).abs() < 1e-6);
        let s3 = overlap_set(3, 1.0, 3.0).unwrap();
        let expect = 0.5 / PI.sqrt() * 3f64.sqrt() * 29.0 / 4f64.powf(3.5);
        assert!((s3.in0 - expect).abs() < 1e-14);
        assert!((s3.in0 - contact_oracle(3, 0, 3, 0, 1.0, 3.0)).abs() < 1e-10);
        // Beyond the tabulated forms the quadrature path takes over.
        let s11 = overlap_set(11, 1.0, 11.0).unwrap();
        assert!((s11.in0 - contact_oracle(11, 0, 11, 0, 1.0, 11.0)).abs() < 1e-10);
        assert_eq!(overlap_set(4, 1.0, 4.0).unwrap().i_n, 0.0);
    }

    #[test]
    fn transfer_overlap_signs_and_decay() {
        let mut prev = f64::INFINITY;
        let mut prev_scaled = 0.0;
        for (idx, n) in [1usize, 3, 5, 7, 9, 11, 13].into_iter().enumerate() {
            let v = overlap_in(n, 1.0, n as f64).unwrap();
            let expect_sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(v.signum(), expect_sign);
            assert!(v.abs() < prev, "|I_n| must decrease");
            assert!(n as f64 * v.abs() > prev_scaled, "n|I_n| must increase");
            prev = v.abs();
            prev_scaled = n as f64 * v.abs();
        }
    }

    #[test]
    fn fermionic_overlaps() {
        let f1 = fermionic_overlap(1, 1, 1.0, 1.0).unwrap();
        assert!((f1 - 0.199471).abs() < 1e-6);
        let f2 = fermionic_overlap(2, 1, 1.0, 1.0).unwrap();
        assert!(f2.abs() < f1.abs());
        assert!((f2 - contact_oracle(1, 1, 2, 0, 1.0, 1.0)).abs() < 1e-10);
        assert_eq!(fermionic_overlap(1, 2, 1.0, 1.0).unwrap(), 0.0);
    }
}

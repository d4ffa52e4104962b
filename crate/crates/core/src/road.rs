//! Random road excitation built as a finite sum of phase-shifted sines whose
//! amplitudes follow an inverse-square displacement PSD.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Lowest spatial angular frequency of the grid (rad/m).
pub const OMEGA_FIRST: f64 = 0.02 * PI;
/// Highest spatial angular frequency of the grid (rad/m).
pub const OMEGA_LAST: f64 = 6.0 * PI;
/// Reference frequency of the PSD.
pub const OMEGA_REF: f64 = 1.0;

pub const DEFAULT_FREQUENCIES: usize = 100;
pub const DEFAULT_VELOCITY: f64 = 25.0;

/// Roughness grade. Class `A` is the smoothest, `E` the roughest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoadClass {
    A,
    B,
    C,
    D,
    E,
}

impl RoadClass {
    pub const ALL: [RoadClass; 5] = [RoadClass::A, RoadClass::B, RoadClass::C, RoadClass::D, RoadClass::E];

    /// Roughness exponent `k` in `Φ(ω0) = 2^k · 1e-6`.
    pub fn k(self) -> u32 {
        match self {
            RoadClass::A => 0,
            RoadClass::B => 2,
            RoadClass::C => 4,
            RoadClass::D => 6,
            RoadClass::E => 8,
        }
    }

    pub fn from_k(k: u32) -> Result<Self> {
        RoadClass::ALL
            .into_iter()
            .find(|c| c.k() == k)
            .ok_or_else(|| Error::invalid(format!("no road class with k = {k}")))
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RoadClass::A => "A",
            RoadClass::B => "B",
            RoadClass::C => "C",
            RoadClass::D => "D",
            RoadClass::E => "E",
        };
        f.write_str(s)
    }
}

impl FromStr for RoadClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(RoadClass::A),
            "B" => Ok(RoadClass::B),
            "C" => Ok(RoadClass::C),
            "D" => Ok(RoadClass::D),
            "E" => Ok(RoadClass::E),
            other => Err(Error::invalid(format!("unknown road class {other:?}"))),
        }
    }
}

/// Displacement PSD at the reference frequency, `2^k · 1e-6`.
pub fn roughness_coefficient(class: RoadClass) -> f64 {
    f64::from(1u32 << class.k()) * 1e-6
}

/// Inverse-square PSD `Φ(ω) = Φ(ω0) (ω/ω0)^-2`.
pub fn psd(phi0: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("psd needs omega > 0, got {omega}")));
    }
    let ratio = omega / OMEGA_REF;
    Ok(phi0 / (ratio * ratio))
}

/// Sine amplitude `sqrt(Φ Δω / π)` for one grid line.
pub fn amplitude(phi: f64, delta_omega: f64) -> Result<f64> {
    if !(phi >= 0.0) || !(delta_omega >= 0.0) {
        return Err(Error::Domain(format!(
            "amplitude needs non-negative inputs, got phi={phi}, delta_omega={delta_omega}"
        )));
    }
    Ok((phi * delta_omega / PI).sqrt())
}

/// Linearly spaced spatial frequency grid from `0.02π` to `6π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega: Vec<f64>,
    pub delta_omega: f64,
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

pub fn build_grid(m: usize) -> Result<FrequencyGrid> {
    if m < 2 {
        return Err(Error::invalid(format!("frequency grid needs M >= 2, got {m}")));
    }
    let delta_omega = (OMEGA_LAST - OMEGA_FIRST) / (m - 1) as f64;
    let mut omega: Vec<f64> = (0..m).map(|i| OMEGA_FIRST + i as f64 * delta_omega).collect();
    // Pin the endpoint; the accumulated product can land one ulp off.
    omega[m - 1] = OMEGA_LAST;
    Ok(FrequencyGrid { omega, delta_omega })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    pub class: RoadClass,
    pub amplitudes: Vec<f64>,
    pub grid: FrequencyGrid,
    pub phases: Vec<f64>,
    pub velocity: f64,
    pub seed: u64,
}

/// Draws a road of the given class. Phases are the only random part, so two
/// seeds give identical amplitudes.
pub fn generate_road(class: RoadClass, m: usize, velocity: f64, seed: u64) -> Result<RoadProfile> {
    if !(velocity > 0.0) || !velocity.is_finite() {
        return Err(Error::invalid(format!("velocity must be positive, got {velocity}")));
    }
    let grid = build_grid(m)?;
    let phi0 = roughness_coefficient(class);
    let amplitudes = grid
        .omega
        .iter()
        .map(|&w| amplitude(psd(phi0, w)?, grid.delta_omega))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed::rng(seed);
    let phases = (0..m).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    Ok(RoadProfile { class, amplitudes, grid, phases, velocity, seed })
}

impl RoadProfile {
    /// Road displacement at time `t` for constant vehicle speed.
    pub fn evaluate(&self, t: f64) -> f64 {
        let s = t * self.velocity;
        self.amplitudes
            .iter()
            .zip(&self.grid.omega)
            .zip(&self.phases)
            .map(|((a, w), phi)| a * (w * s - phi).sin())
            .sum()
    }

    /// Samples `r(k h)` for `k = 0..n`.
    pub fn sample(&self, h: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.evaluate(k as f64 * h)).collect()
    }

    /// Upper bound on `|r(t)|`.
    pub fn amplitude_sum(&self) -> f64 {
        self.amplitudes.iter().sum()
    }
}

pub fn evaluate_road(profile: &RoadProfile, t: f64) -> f64 {
    profile.evaluate(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roughness_per_class() {
        assert_eq!(roughness_coefficient(RoadClass::A), 1.0e-6);
        assert_relative_eq!(roughness_coefficient(RoadClass::C), 1.6e-5, max_relative = 1e-15);
        assert_relative_eq!(roughness_coefficient(RoadClass::E), 2.56e-4, max_relative = 1e-15);
        for c in RoadClass::ALL {
            assert_eq!(RoadClass::from_k(c.k()).unwrap(), c);
            assert_eq!(c.to_string().parse::<RoadClass>().unwrap(), c);
        }
        assert!(RoadClass::from_k(3).is_err());
    }

    #[test]
    fn psd_inverse_square() {
        assert_eq!(psd(1e-6, 1.0).unwrap(), 1e-6);
        assert_relative_eq!(psd(1e-6, 2.0).unwrap(), 2.5e-7, max_relative = 1e-15);
        assert_relative_eq!(psd(2.56e-4, 4.0).unwrap(), 1.6e-5, max_relative = 1e-15);
        assert!(psd(1e-6, 0.0).is_err());
        assert!(psd(1e-6, -1.0).is_err());
    }

    #[test]
    fn amplitude_values() {
        assert_relative_eq!(amplitude(1.0, PI).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(amplitude(0.0, PI).unwrap(), 0.0);
        // sqrt(2.5e-7 * 0.18978 / pi), evaluated to 30 digits with mpmath.
        assert_relative_eq!(
            amplitude(2.5e-7, 0.18978).unwrap(),
            1.228_910_596_829_157e-4,
            max_relative = 1e-14
        );
        assert!(amplitude(-1.0, 1.0).is_err());
        assert!(amplitude(1.0, -1.0).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = build_grid(2).unwrap();
        assert_eq!(g.omega, vec![0.02 * PI, 6.0 * PI]);
        assert_relative_eq!(g.delta_omega, 5.98 * PI, max_relative = 1e-15);

        let g = build_grid(100).unwrap();
        assert_relative_eq!(g.delta_omega, 0.189_765, epsilon = 1e-6);
        assert_relative_eq!(g.omega[1], 0.252_597, epsilon = 1e-6);
        assert_eq!(g.omega[99], 6.0 * PI);
        assert!(g.omega.windows(2).all(|w| w[1] > w[0]));
        assert!(build_grid(1).is_err());
        assert!(build_grid(0).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate_road(RoadClass::C, 100, 25.0, 11).unwrap();
        let b = generate_road(RoadClass::C, 100, 25.0, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_road(RoadClass::C, 100, 25.0, 12).unwrap();
        assert_eq!(a.amplitudes, c.amplitudes);
        assert_ne!(a.phases, c.phases);
        assert!(a.phases.iter().all(|&p| (0.0..2.0 * PI).contains(&p)));

        let class_a = generate_road(RoadClass::A, 100, 25.0, 11).unwrap();
        let class_e = generate_road(RoadClass::E, 100, 25.0, 11).unwrap();
        for (ae, aa) in class_e.amplitudes.iter().zip(&class_a.amplitudes) {
            assert_relative_eq!(ae / aa, 16.0, max_relative = 1e-14);
        }
        assert!(generate_road(RoadClass::A, 100, 0.0, 1).is_err());
        assert!(generate_road(RoadClass::A, 1, 25.0, 1).is_err());
    }

    #[test]
    fn evaluate_single_line() {
        let p = RoadProfile {
            class: RoadClass::A,
            amplitudes: vec![1.0],
            grid: FrequencyGrid { omega: vec![1.0], delta_omega: 1.0 },
            phases: vec![0.0],
            velocity: 1.0,
            seed: 0,
        };
        assert_relative_eq!(p.evaluate(PI / 2.0), 1.0, max_relative = 1e-15);

        let mut q = generate_road(RoadClass::D, 50, 25.0, 3).unwrap();
        q.phases.iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(q.evaluate(0.0), 0.0);
    }
}

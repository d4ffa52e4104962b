//! Quarter-car model: wheel suspension (`x`, mass `m1`), car body (`y`, `m2`)
//! and passenger with seat (`z`, `m3`), integrated with a sequential
//! semi-implicit Euler scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road::RoadProfile;

pub const DEFAULT_STEP: f64 = 0.005;
pub const DEFAULT_STEPS: usize = 6000;
pub const MASS_MIN: u32 = 50;
pub const MASS_MAX: u32 = 200;

/// Damping (N·s/m), stiffness (N/m) and mass (kg) constants.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcmParams {
    pub C2: f64,
    pub C3: f64,
    pub K1: f64,
    pub K2: f64,
    pub K3: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl Default for QcmParams {
    fn default() -> Self {
        QcmParams::with_passenger_mass(100.0)
    }
}

impl QcmParams {
    /// Reference vehicle with the given passenger-plus-seat mass.
    pub fn with_passenger_mass(m3: f64) -> Self {
        QcmParams {
            C2: 4741.0,
            C3: 615.0,
            K1: 40000.0,
            K2: 149171.0,
            K3: 98935.0,
            m1: 145.0,
            m2: 2160.0,
            m3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.C2, self.C3, self.K1, self.K2, self.K3, self.m1, self.m2, self.m3];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!("quarter-car constants must be positive: {self:?}")))
        }
    }
}

/// Velocities `u, v, w` and displacements `x, y, z` of the three bodies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QcmState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl QcmState {
    pub fn is_finite(&self) -> bool {
        [self.u, self.v, self.w, self.x, self.y, self.z].iter().all(|c| c.is_finite())
    }

    /// Components in the first-order ordering `(ż, ẏ, ẋ, z, y, x)`.
    pub fn to_rho(&self) -> [f64; 6] {
        [self.w, self.v, self.u, self.z, self.y, self.x]
    }

    pub fn from_rho(rho: [f64; 6]) -> Self {
        QcmState { w: rho[0], v: rho[1], u: rho[2], z: rho[3], y: rho[4], x: rho[5] }
    }
}

/// The two hidden parameters `p1 = C3/m3` (1/s) and `p2 = K3/m3` (1/s²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    pub p1: f64,
    pub p2: f64,
}

impl TargetParams {
    pub fn as_array(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }
}

pub fn true_parameters(params: &QcmParams) -> TargetParams {
    TargetParams { p1: params.C3 / params.m3, p2: params.K3 / params.m3 }
}

/// System matrix acting on `ρ = (ż, ẏ, ẋ, z, y, x)`.
pub fn assemble_system_matrix(p: &QcmParams) -> [[f64; 6]; 6] {
    let (m1, m2, m3) = (p.m1, p.m2, p.m3);
    [
        [-p.C3 / m3, p.C3 / m3, 0.0, -p.K3 / m3, p.K3 / m3, 0.0],
        [p.C3 / m2, -(p.C2 + p.C3) / m2, p.C2 / m2, p.K3 / m2, -(p.K2 + p.K3) / m2, p.K2 / m2],
        [0.0, p.C2 / m1, -p.C2 / m1, 0.0, p.K2 / m1, -(p.K1 + p.K2) / m1],
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    ]
}

/// Forcing vector of the first-order system for road displacement `r`.
pub fn forcing(p: &QcmParams, r: f64) -> [f64; 6] {
    [0.0, 0.0, p.K1 / p.m1 * r, 0.0, 0.0, 0.0]
}

/// Wheel acceleration for the `u` update.
pub fn wheel_acceleration(s: &QcmState, r: f64, p: &QcmParams) -> f64 {
    p.C2 / p.m1 * s.v - p.C2 / p.m1 * s.u + p.K2 / p.m1 * s.y - (p.K1 + p.K2) / p.m1 * s.x
        + p.K1 / p.m1 * r
}

/// Body acceleration for the `v` update; `u_next` is the already-updated
/// wheel velocity.
pub fn body_acceleration(s: &QcmState, u_next: f64, p: &QcmParams) -> f64 {
    p.C3 / p.m2 * s.w - (p.C2 + p.C3) / p.m2 * s.v + p.C2 / p.m2 * u_next + p.K3 / p.m2 * s.z
        - (p.K2 + p.K3) / p.m2 * s.y
        + p.K2 / p.m2 * s.x
}

/// Seat acceleration for the `w` update; `v_next` is the already-updated body
/// velocity.
pub fn seat_acceleration(s: &QcmState, v_next: f64, p: &QcmParams) -> f64 {
    -p.C3 / p.m3 * s.w + p.C3 / p.m3 * v_next - p.K3 / p.m3 * s.z + p.K3 / p.m3 * s.y
}

/// One step of the scheme. Velocities update in the order `u, v, w`, each
/// using the freshest neighbour velocity; positions then use the new
/// velocities.
pub fn symplectic_step(s: &QcmState, r: f64, p: &QcmParams, h: f64) -> QcmState {
    let u = s.u + h * wheel_acceleration(s, r, p);
    let v = s.v + h * body_acceleration(s, u, p);
    let w = s.w + h * seat_acceleration(s, v, p);
    QcmState { u, v, w, x: s.x + h * u, y: s.y + h * v, z: s.z + h * w }
}

/// Continuous-time seat and body accelerations from a single state.
pub fn acceleration_at(s: &QcmState, p: &QcmParams) -> (f64, f64) {
    let z = -p.C3 / p.m3 * (s.w - s.v) - p.K3 / p.m3 * (s.z - s.y);
    let y = -p.C3 / p.m2 * (s.v - s.w)
        - p.C2 / p.m2 * (s.v - s.u)
        - p.K3 / p.m2 * (s.y - s.z)
        - p.K2 / p.m2 * (s.y - s.x);
    (z, y)
}

/// Recorded seat and body accelerations for `k = 0..len-1`, i.e. the exact
/// rates the scheme applied between consecutive states, so that
/// `w[k+1] = w[k] + h * z_ddot[k]` holds bitwise (same for `v`).
pub fn accelerations(states: &[QcmState], p: &QcmParams) -> (Vec<f64>, Vec<f64>) {
    states
        .windows(2)
        .map(|pair| {
            let (cur, next) = (&pair[0], &pair[1]);
            (seat_acceleration(cur, next.v, p), body_acceleration(cur, next.u, p))
        })
        .unzip()
}

/// One simulated run sampled at `t_k = k h`.
///
/// `states` has `n + 1` entries (`t_0..t_n`), everything else has `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub h: f64,
    pub n: usize,
    pub params: QcmParams,
    pub states: Vec<QcmState>,
    pub road: Vec<f64>,
    pub z_ddot: Vec<f64>,
    pub y_ddot: Vec<f64>,
}

/// Simulates `n` steps from rest, with `r_k = r(k h)` driving step `k`.
pub fn simulate(params: &QcmParams, profile: &RoadProfile, h: f64, n: usize) -> Result<SimTrace> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step width must be positive, got {h}")));
    }
    let road = profile.sample(h, n);
    simulate_samples(params, road, h)
}

/// Same as [`simulate`] with a pre-sampled road, so one road can drive many
/// mass variants without re-evaluating the sine sum.
pub fn simulate_samples(params: &QcmParams, road: Vec<f64>, h: f64) -> Result<SimTrace> {
    params.validate()?;
    let n = road.len();
    if n == 0 {
        return Err(Error::invalid("simulation needs N >= 1"));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step width must be positive, got {h}")));
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut s = QcmState::default();
    states.push(s);
    for (k, &r) in road.iter().enumerate() {
        s = symplectic_step(&s, r, params, h);
        if !s.is_finite() {
            return Err(Error::Diverged { step: k + 1 });
        }
        states.push(s);
    }
    let (z_ddot, y_ddot) = accelerations(&states, params);
    Ok(SimTrace { h, n, params: *params, states, road, z_ddot, y_ddot })
}

/// Mechanical energy: kinetic plus spring potential for road displacement `r`.
pub fn mechanical_energy(s: &QcmState, p: &QcmParams, r: f64) -> f64 {
    0.5 * (p.m1 * s.u * s.u + p.m2 * s.v * s.v + p.m3 * s.w * s.w)
        + 0.5 * p.K1 * (s.x - r).powi(2)
        + 0.5 * p.K2 * (s.y - s.x).powi(2)
        + 0.5 * p.K3 * (s.z - s.y).powi(2)
}

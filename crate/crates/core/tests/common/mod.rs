//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use qcm_sysid::dataset::reconstruct_kinematics;
use qcm_sysid::road::{generate_road, RoadClass, RoadProfile};
use qcm_sysid::sim::{simulate, true_parameters, QcmParams, QcmState};
use qcm_sysid::training::fit_parameters;

/// Right-hand side of the quarter-car equations written directly from the
/// force balance on each body.
fn rates(p: &QcmParams, s: &[f64; 6], r: f64) -> [f64; 6] {
    // s = (u, v, w, x, y, z)
    let [u, v, w, x, y, z] = *s;
    let f1 = -p.K1 * (x - r) + p.K2 * (y - x) + p.C2 * (v - u);
    let f2 = -p.K2 * (y - x) - p.C2 * (v - u) + p.K3 * (z - y) + p.C3 * (w - v);
    let f3 = -p.K3 * (z - y) - p.C3 * (w - v);
    [f1 / p.m1, f2 / p.m2, f3 / p.m3, u, v, w]
}

/// Classic RK4 with continuous road input, starting from rest. Returns the
/// state every `record_every` substeps, beginning at `t = 0`.
pub fn rk4_reference(p: &QcmParams, road: &RoadProfile, dt: f64, substeps: usize, record_every: usize) -> Vec<[f64; 6]> {
    let mut s = [0.0; 6];
    let mut out = vec![s];
    let add = |a: &[f64; 6], b: &[f64; 6], c: f64| -> [f64; 6] { std::array::from_fn(|i| a[i] + c * b[i]) };
    for k in 0..substeps {
        let t = k as f64 * dt;
        let r0 = road.evaluate(t);
        let rm = road.evaluate(t + 0.5 * dt);
        let r1 = road.evaluate(t + dt);
        let k1 = rates(p, &s, r0);
        let k2 = rates(p, &add(&s, &k1, 0.5 * dt), rm);
        let k3 = rates(p, &add(&s, &k2, 0.5 * dt), rm);
        let k4 = rates(p, &add(&s, &k3, dt), r1);
        for i in 0..6 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (k + 1) % record_every == 0 {
            out.push(s);
        }
    }
    out
}

fn as_array(s: &QcmState) -> [f64; 6] {
    [s.u, s.v, s.w, s.x, s.y, s.z]
}

/// Worst per-component relative error of the scheme against `reference`,
/// sampled every `stride` reference records: max |err| / max |ref| for each
/// component, maximised over components.
pub fn max_relative_state_error(states: &[QcmState], reference: &[[f64; 6]], stride: usize) -> f64 {
    let mut err = [0.0f64; 6];
    let mut mag = [0.0f64; 6];
    for (k, s) in states.iter().enumerate() {
        let r = &reference[k * stride];
        let a = as_array(s);
        for i in 0..6 {
            err[i] = err[i].max((a[i] - r[i]).abs());
            mag[i] = mag[i].max(r[i].abs());
        }
    }
    (0..6).map(|i| err[i] / mag[i]).fold(0.0, f64::max)
}

/// Scheme errors at `h`, `h/2` and `h/4` over `duration` seconds against one
/// RK4 run at `h / 100`.
pub fn integrator_errors(class: RoadClass, m3: f64, seed: u64, h: f64, duration: f64) -> [f64; 3] {
    let road = generate_road(class, 100, 25.0, seed).unwrap();
    let p = QcmParams::with_passenger_mass(m3);
    let n = (duration / h).round() as usize;
    // 100 substeps per step of h; records every h/4.
    let reference = rk4_reference(&p, &road, h / 100.0, n * 100, 25);
    let mut out = [0.0; 3];
    for (i, div) in [1usize, 2, 4].into_iter().enumerate() {
        let trace = simulate(&p, &road, h / div as f64, n * div).unwrap();
        out[i] = max_relative_state_error(&trace.states, &reference, 4 / div);
    }
    out
}

/// Log-log least-squares slope of a Hann-windowed periodogram of the road
/// height sampled in space, evaluated at the road's own frequencies.
pub fn periodogram_slope(road: &RoadProfile, length: f64, ds: f64) -> f64 {
    let count = (length / ds) as usize;
    // Sample in space: r(t) with t = s / velocity.
    let heights: Vec<f64> = (0..count).map(|k| road.evaluate(k as f64 * ds / road.velocity)).collect();
    let hann: Vec<f64> = (0..count).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (count - 1) as f64).cos()).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &omega in &road.grid.omega {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..count {
            let arg = omega * k as f64 * ds;
            re += hann[k] * heights[k] * arg.cos();
            im += hann[k] * heights[k] * arg.sin();
        }
        xs.push(omega.ln());
        ys.push((re * re + im * im).ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Relative errors `[p1, p2]` of the closed-form least-squares fit on a
/// clean simulated trace, bypassing any network.
pub fn least_squares_errors(class: RoadClass, m3: f64, seed: u64) -> [f64; 2] {
    let road = generate_road(class, 100, 25.0, seed).unwrap();
    let p = QcmParams::with_passenger_mass(m3);
    let trace = simulate(&p, &road, 0.005, 6000).unwrap();
    let kin = reconstruct_kinematics(&trace.z_ddot, &trace.y_ddot, 0.005).unwrap();
    let fit = fit_parameters(&kin, 0..trace.n, &trace.z_ddot).unwrap();
    let truth = true_parameters(&p);
    [((fit[0] - truth.p1) / truth.p1).abs(), ((fit[1] - truth.p2) / truth.p2).abs()]
}

/// Runs the command-line tool, returning (success, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (bool, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_qcm-sysid"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("failed to launch qcm-sysid");
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

/// SHA-256 of every file below `dir` except run manifests, keyed by the
/// path relative to `dir`.
pub fn artifact_hashes(dir: &std::path::Path) -> std::collections::BTreeMap<String, String> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().is_some_and(|n| n != "run.json") {
                let bytes = std::fs::read(&path).unwrap();
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, qcm_sysid::dataset::sha256_hex(&bytes));
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// gen, train and eval into `root` with fixed small-scale flags.
pub fn small_pipeline(root: &std::path::Path) {
    let p = |sub: &str| root.join(sub).to_string_lossy().into_owned();
    let (data, run, eval, ckpt) = (p("data"), p("train"), p("eval"), p("train/checkpoint"));
    let steps = [
        vec!["gen", "--roads", "3", "--masses", "2", "--train-roads", "2", "--seed", "5", "-n", "600", "-o", &data],
        vec![
            "--threads", "2", "train", &data, "--objective", "unlabelled", "--steps", "3", "--batch-size", "4",
            "--eval-every", "2", "--log-every", "0", "-o", &run,
        ],
        vec!["eval", &ckpt, &data, "--split", "both", "--noise-sigma", "0.01", "-o", &eval],
    ];
    for args in steps {
        let (ok, _, err) = run_cli(&args);
        assert!(ok, "{args:?} failed: {err}");
    }
}

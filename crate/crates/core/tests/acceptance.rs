//! Acceptance criteria, one verdict line each.
//!
//! Run all: `cargo test --test acceptance`. Select some: `cargo test --test
//! acceptance -- 1 3 7`. A failed criterion is reported, not hidden; set
//! `QCM_ACCEPTANCE_STRICT=1` to turn any FAIL into a non-zero exit.
//!
//! Criteria 4 to 6 reuse desk-scale checkpoints under
//! `target/tmp/acceptance/{labelled,unlabelled}/checkpoint` (as written by
//! `qcm-sysid train`). Missing or unfinished runs are trained or resumed here,
//! which takes hours.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use qcm_sysid::dataset::{generate_dataset, load_dataset, save_dataset, split, Dataset, GenConfig};
use qcm_sysid::net::{backward, forward, init_network, load_checkpoint, save_checkpoint, Checkpoint, NetShape, Tensor};
use qcm_sysid::road::{generate_road, RoadClass};
use qcm_sysid::training::{evaluate, robustness_report, train, Model, Objective, SplitName, TrainConfig, TrainObserver};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn integrator() -> Verdict {
    let t = Instant::now();
    let errs = common::integrator_errors(RoadClass::C, 100.0, 42, 0.005, 30.0);
    let secs = t.elapsed().as_secs_f64();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let ratios_ok = ratios.iter().all(|r| (1.5..=2.5).contains(r));
    verdict(
        errs[0] < 1e-3 && ratios_ok && secs < 10.0,
        format!(
            "max relative state error {:.3e} (bound 1e-3); halving ratios {:.2}, {:.2} (bound 1.5..2.5); {secs:.1} s (bound 10 s)",
            errs[0], ratios[0], ratios[1]
        ),
    )
}

fn gradients() -> Verdict {
    let t = Instant::now();
    let shape = NetShape::shrunk();
    let mut params = init_network::<f64>(shape, 11).unwrap();
    for (i, v) in params.data.iter_mut().enumerate() {
        *v += 0.05 * (i as f64 * 0.73).cos();
    }
    let x: Vec<f64> = (0..shape.input_size()).map(|i| (0.29 * i as f64).sin() - 0.3 * (0.07 * i as f64).cos()).collect();
    let c = [1.1, -0.6];
    let probe = |p: &qcm_sysid::net::NetParams<f64>| -> f64 { forward(p, &x).unwrap().iter().zip(&c).map(|(o, w)| o * w).sum() };
    let grad = backward(&params, &x, &c).unwrap();
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for tensor in Tensor::ALL {
        let off = shape.offset(tensor);
        for j in 0..shape.tensor_len(tensor) {
            let mut p = params.clone();
            p.data[off + j] += step;
            let up = probe(&p);
            p.data[off + j] -= 2.0 * step;
            let numeric = (up - probe(&p)) / (2.0 * step);
            let analytic = grad.data[off + j];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            count += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && secs < 60.0,
        format!("{count} parameters, worst relative error {worst:.2e} (bound 1e-4); {secs:.1} s (bound 60 s)"),
    )
}

fn identifiability() -> Verdict {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for m3 in [50.0, 125.0, 200.0] {
        let e = common::least_squares_errors(RoadClass::C, m3, 5);
        pass &= e[0] < 0.05 && e[1] < 0.05;
        parts.push(format!("m3={m3}: p1 {:.2}%, p2 {:.2}%", 100.0 * e[0], 100.0 * e[1]));
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(pass && secs < 10.0, format!("{} (bound 5%); {secs:.1} s (bound 10 s)", parts.join("; ")))
}

fn road_spectrum() -> Verdict {
    let t = Instant::now();
    let a = generate_road(RoadClass::A, 100, 25.0, 1).unwrap();
    let e = generate_road(RoadClass::E, 100, 25.0, 1).unwrap();
    let slope = common::periodogram_slope(&a, 2000.0, 0.1);
    let exact = e.amplitudes.iter().zip(&a.amplitudes).all(|(x, y)| x / y == 16.0);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        (slope + 2.0).abs() <= 0.3 && exact && secs < 5.0,
        format!("class A slope {slope:.3} (bound -2 +/- 0.3); E/A amplitude ratio exactly 16: {exact}; {secs:.1} s (bound 5 s)"),
    )
}

fn determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    common::small_pipeline(a.path());
    common::small_pipeline(b.path());
    let (ha, hb) = (common::artifact_hashes(a.path()), common::artifact_hashes(b.path()));
    let differing: Vec<&String> = ha.keys().filter(|k| ha.get(*k) != hb.get(*k)).collect();
    verdict(
        ha.len() == hb.len() && differing.is_empty(),
        format!("gen/train/eval reruns: {} artifacts hashed, {} differ", ha.len(), differing.len()),
    )
}

// ---------------------------------------------------------------------------
// Desk-scale runs

const DESK_STEPS: u64 = 50_000;

fn desk_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn desk_gen_config() -> GenConfig {
    GenConfig { roads: 20, masses: 50, train_roads: 16, master_seed: 0, ..GenConfig::default() }
}

fn desk_train_config(objective: Objective) -> TrainConfig {
    TrainConfig { objective, steps: DESK_STEPS, batch_size: 100, learning_rate: 1e-3, eval_every: 5000, ..TrainConfig::default() }
}

fn desk_dataset() -> Dataset {
    let dir = desk_root().join("data");
    let config = desk_gen_config();
    if let Ok(ds) = load_dataset(&dir) {
        assert_eq!(ds.config, config, "cached dataset in {} was generated with other flags", dir.display());
        return ds;
    }
    eprintln!("generating desk dataset in {}", dir.display());
    let ds = generate_dataset(&config).unwrap();
    save_dataset(&ds, &dir).unwrap();
    ds
}

struct Saver(PathBuf);

impl TrainObserver for Saver {
    fn checkpoint_interval(&self) -> Option<u64> {
        Some(2500)
    }

    fn on_checkpoint(&mut self, ckpt: &Checkpoint) -> qcm_sysid::Result<()> {
        save_checkpoint(ckpt, &self.0).map(|_| ())
    }
}

fn desk_model(ds: &Dataset, objective: Objective) -> Model {
    let dir = desk_root().join(objective.to_string()).join("checkpoint");
    let config = desk_train_config(objective);
    let cached = load_checkpoint(&dir).ok();
    if let Some(ckpt) = &cached {
        let stored: TrainConfig = serde_json::from_value(ckpt.extra["config"].clone()).unwrap();
        assert_eq!(stored, config, "cached {objective} checkpoint in {} has another configuration", dir.display());
        if ckpt.step == DESK_STEPS {
            return Model::from_checkpoint(ckpt).unwrap();
        }
    }
    eprintln!("training {objective} from step {} in {}", cached.as_ref().map_or(0, |c| c.step), dir.display());
    let sp = split(ds, ds.config.train_roads).unwrap();
    let out = train(&sp.train_view(ds), &sp.test_view(ds), &config, cached.as_ref(), &mut Saver(dir.clone())).unwrap();
    save_checkpoint(&out.checkpoint, &dir).unwrap();
    out.model
}

struct Desk {
    ds: Dataset,
    labelled: Model,
    unlabelled: Model,
}

impl Desk {
    fn clean_test_mu(&self, model: &Model) -> [f64; 2] {
        let sp = split(&self.ds, self.ds.config.train_roads).unwrap();
        let r = evaluate(model, &sp.test_view(&self.ds), SplitName::Test, 0.0, 0).unwrap();
        [r.p1.mu, r.p2.mu]
    }
}

fn desk_labelled(desk: &Desk) -> Verdict {
    let mu = desk.clean_test_mu(&desk.labelled);
    verdict(
        mu.iter().all(|&m| m < 0.15),
        format!("J_L clean-test mu p1 {:.4}, p2 {:.4} (bound 0.15)", mu[0], mu[1]),
    )
}

fn desk_unlabelled(desk: &Desk) -> Verdict {
    let l = desk.clean_test_mu(&desk.labelled);
    let u = desk.clean_test_mu(&desk.unlabelled);
    let ordered = l[0] <= u[0] && l[1] <= u[1];
    verdict(
        u.iter().all(|&m| m < 0.25) && ordered,
        format!(
            "J_U clean-test mu p1 {:.4}, p2 {:.4} (bound 0.25); J_L <= J_U for both: {ordered} (J_L {:.4}, {:.4})",
            u[0], u[1], l[0], l[1]
        ),
    )
}

fn desk_robustness(desk: &Desk) -> Verdict {
    let sp = split(&desk.ds, desk.ds.config.train_roads).unwrap();
    let r = robustness_report(&desk.labelled, &desk.unlabelled, &sp.test_view(&desk.ds), 0.01, 0).unwrap();
    let noisy = |o: Objective, p: usize| r.get(o, true, p).mu;
    verdict(
        r.unlabelled_more_robust(),
        format!(
            "noisy-test mu J_L {:.4}/{:.4} vs J_U {:.4}/{:.4}; noisy/clean ratio J_L {:.3}/{:.3} vs J_U {:.3}/{:.3}",
            noisy(Objective::Labelled, 1),
            noisy(Objective::Labelled, 2),
            noisy(Objective::Unlabelled, 1),
            noisy(Objective::Unlabelled, 2),
            r.degradation[0][0],
            r.degradation[1][0],
            r.degradation[0][1],
            r.degradation[1][1]
        ),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let strict = std::env::var("QCM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |n: u32, name: &'static str, v: Verdict| {
        println!("criterion {n} [{name}]: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };
    if wanted(1) {
        record(1, "integrator vs RK4", integrator());
    }
    if wanted(2) {
        record(2, "gradient fidelity", gradients());
    }
    if wanted(3) {
        record(3, "least-squares identifiability", identifiability());
    }
    if [4, 5, 6].into_iter().any(wanted) {
        let ds = desk_dataset();
        let labelled = desk_model(&ds, Objective::Labelled);
        let unlabelled = desk_model(&ds, Objective::Unlabelled);
        let desk = Desk { ds, labelled, unlabelled };
        if wanted(4) {
            record(4, "desk-scale J_L", desk_labelled(&desk));
        }
        if wanted(5) {
            record(5, "desk-scale J_U", desk_unlabelled(&desk));
        }
        if wanted(6) {
            record(6, "robustness ordering", desk_robustness(&desk));
        }
    }
    if wanted(7) {
        record(7, "road spectrum", road_spectrum());
    }
    if wanted(8) {
        record(8, "determinism", determinism());
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass; failing: {failed:?}", results.len() - failed.len(), results.len());
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}

use qcm_sysid::dataset::{generate_dataset, split, Dataset, Sample, Split};
use qcm_sysid::net::{load_checkpoint, save_checkpoint, NetShape};
use qcm_sysid::training::{
    deviations, evaluate, robustness_report, train, Model, NoObserver, Objective, Precision, Predictor, SplitName,
    TrainConfig,
};
use qcm_sysid::Result;

fn small_dataset(roads: usize, masses: usize, n: usize) -> (Dataset, Split) {
    let cfg = qcm_sysid::dataset::GenConfig { roads, masses, n, train_roads: roads - 1, master_seed: 4, ..Default::default() };
    let ds = generate_dataset(&cfg).unwrap();
    let sp = split(&ds, roads - 1).unwrap();
    (ds, sp)
}

fn shrunk_config(objective: Objective, steps: u64) -> TrainConfig {
    TrainConfig {
        objective,
        steps,
        batch_size: 4,
        eval_every: 0,
        noise_sigma_eval: 0.0,
        shape: NetShape::shrunk(),
        ..TrainConfig::default()
    }
}

/// Returns the ground truth, scaled.
struct Oracle(f64);

impl Predictor for Oracle {
    fn predict(&self, batch: &[(&Sample, &[f64])]) -> Result<Vec<[f64; 2]>> {
        Ok(batch.iter().map(|(s, _)| s.target().as_array().map(|p| p * self.0)).collect())
    }
}

struct Constant([f64; 2]);

impl Predictor for Constant {
    fn predict(&self, batch: &[(&Sample, &[f64])]) -> Result<Vec<[f64; 2]>> {
        Ok(vec![self.0; batch.len()])
    }
}

#[test]
fn labelled_objective_fits_a_single_sample() {
    let (ds, _) = small_dataset(2, 1, 200);
    let indices = [0usize];
    let view = qcm_sysid::dataset::DatasetView { dataset: &ds, indices: &indices };
    let config = TrainConfig { learning_rate: 1e-2, ..shrunk_config(Objective::Labelled, 2000) };
    let out = train(&view, &view, &config, None, &mut NoObserver).unwrap();
    let last = out.history.last().unwrap();
    assert_eq!(last.step, 2000);
    assert!(last.p1.mu < 0.05 && last.p2.mu < 0.05, "{last:?}");
}

#[test]
fn training_is_reproducible_and_resumable() {
    let (ds, sp) = small_dataset(3, 2, 120);
    let (tr, te) = (sp.train_view(&ds), sp.test_view(&ds));
    let config = shrunk_config(Objective::Unlabelled, 12);
    let a = train(&tr, &te, &config, None, &mut NoObserver).unwrap();
    let b = train(&tr, &te, &config, None, &mut NoObserver).unwrap();
    assert_eq!(a.checkpoint.params, b.checkpoint.params);
    assert_eq!(a.history, b.history);

    let half = train(&tr, &te, &TrainConfig { steps: 6, ..config.clone() }, None, &mut NoObserver).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&half.checkpoint, dir.path()).unwrap();
    let reloaded = load_checkpoint(dir.path()).unwrap();
    let resumed = train(&tr, &te, &config, Some(&reloaded), &mut NoObserver).unwrap();
    assert_eq!(resumed.checkpoint.params, a.checkpoint.params);
    assert_eq!(resumed.checkpoint.adam.m, a.checkpoint.adam.m);

    let other = TrainConfig { learning_rate: 2e-3, ..config };
    assert!(train(&tr, &te, &other, Some(&reloaded), &mut NoObserver).is_err());
}

#[test]
fn zero_steps_returns_the_initialisation() {
    let (ds, sp) = small_dataset(3, 1, 60);
    let (tr, te) = (sp.train_view(&ds), sp.test_view(&ds));
    let config = shrunk_config(Objective::Labelled, 0);
    let out = train(&tr, &te, &config, None, &mut NoObserver).unwrap();
    let init = qcm_sysid::net::init_network::<f64>(config.shape, config.seed).unwrap();
    assert_eq!(out.checkpoint.step, 0);
    assert!(out.history.is_empty());
    assert_eq!(out.checkpoint.params.data.iter().map(|&v| v as f32).collect::<Vec<_>>(), init.cast::<f32>().data);
}

#[test]
fn checkpointed_model_evaluates_like_the_trained_one() {
    let (ds, sp) = small_dataset(3, 2, 80);
    let (tr, te) = (sp.train_view(&ds), sp.test_view(&ds));
    let config = TrainConfig { precision: Precision::F64, ..shrunk_config(Objective::Labelled, 5) };
    let out = train(&tr, &te, &config, None, &mut NoObserver).unwrap();
    let model = Model::from_checkpoint(&out.checkpoint).unwrap();
    assert_eq!(model, out.model);
    let a = evaluate(&model, &te, SplitName::Test, 0.01, 9).unwrap();
    let b = evaluate(&out.model, &te, SplitName::Test, 0.01, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn perfect_and_constant_predictors() {
    let (ds, sp) = small_dataset(4, 3, 600);
    let te = sp.test_view(&ds);
    let exact = evaluate(&Oracle(1.0), &te, SplitName::Test, 0.0, 0).unwrap();
    assert_eq!((exact.p1.mu, exact.p1.sigma, exact.p2.mu), (0.0, 0.0, 0.0));
    let off = evaluate(&Oracle(1.1), &te, SplitName::Test, 0.0, 0).unwrap();
    assert!((off.p1.mu - 0.1).abs() < 1e-12 && off.p2.sigma < 1e-12);

    let c = [5.0, 800.0];
    let r = evaluate(&Constant(c), &te, SplitName::Test, 0.0, 0).unwrap();
    let expect: f64 = te.iter().map(|s| (s.target().p2 - c[1]).abs() / s.target().p2).sum::<f64>() / te.len() as f64;
    assert!((r.p2.mu - expect).abs() < 1e-12);
}

#[test]
fn noiseless_evaluation_is_bitwise_clean() {
    let (ds, sp) = small_dataset(3, 2, 600);
    let te = sp.test_view(&ds);
    let config = TrainConfig { shape: NetShape::default(), ..shrunk_config(Objective::Labelled, 0) };
    let out = train(&sp.train_view(&ds), &te, &config, None, &mut NoObserver).unwrap();
    let clean = deviations(&out.model, &te, 0.0, 3).unwrap();
    assert_eq!(clean, deviations(&out.model, &te, 0.0, 3).unwrap());
    let noisy = deviations(&out.model, &te, 0.01, 3).unwrap();
    assert_ne!(clean, noisy);
}

#[test]
fn robustness_verdict_needs_both_orderings() {
    let (ds, sp) = small_dataset(3, 2, 600);
    let te = sp.test_view(&ds);
    // Neither stub reacts to noise, so no degradation ordering can hold.
    let report = robustness_report(&Constant([5.0, 800.0]), &Oracle(1.0), &te, 0.01, 0).unwrap();
    assert_eq!(report.rows.len(), 8);
    assert_eq!(report.unlabelled_lower_noisy, [true, true]);
    assert_eq!(report.labelled_degrades_more, [false, false]);
    assert!(!report.unlabelled_more_robust());
    assert_eq!(report.get(Objective::Unlabelled, true, 2).mu, 0.0);
}

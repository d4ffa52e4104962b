use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objectives::relative_deviation;
use super::{Objective, Precision};
use crate::dataset::{add_noise, draw_start_for_len, window_with_len, DatasetView, Sample, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::net::{predict, Checkpoint, NetParams, NetShape, Real};
use crate::seed::{self, Stream};

/// Windows evaluated per network call.
const EVAL_BATCH: usize = 100;

/// Anything that maps a sample's input window to a parameter estimate.
///
/// The sample is passed alongside its window so test doubles can look up
/// ground truth.
pub trait Predictor: Sync {
    fn predict(&self, batch: &[(&Sample, &[f64])]) -> Result<Vec<[f64; 2]>>;

    /// Rows per input window.
    fn window_len(&self) -> usize {
        WINDOW_LEN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    F32(NetParams<f32>),
    F64(NetParams<f64>),
}

/// Trained network plus the input scaling it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    /// Per-channel divisor applied to `[z̈, ÿ]` before the network.
    pub input_scale: [f64; 2],
}

/// Metadata a training run stores in its checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub precision: Precision,
    pub input_scale: [f64; 2],
}

impl Model {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let meta: ModelMeta = serde_json::from_value(ckpt.extra.get("model").cloned().unwrap_or_default())
            .map_err(|e| Error::invalid(format!("checkpoint lacks model metadata: {e}")))?;
        let network = match meta.precision {
            Precision::F32 => Network::F32(ckpt.params.cast()),
            Precision::F64 => Network::F64(ckpt.params.clone()),
        };
        Ok(Model { network, input_scale: meta.input_scale })
    }

    pub fn shape(&self) -> NetShape {
        match &self.network {
            Network::F32(p) => p.shape,
            Network::F64(p) => p.shape,
        }
    }

    fn run<T: Real>(&self, params: &NetParams<T>, windows: &[&[f64]]) -> Result<Vec<[f64; 2]>> {
        let inputs: Vec<Vec<T>> = windows
            .iter()
            .map(|w| w.chunks_exact(2).flat_map(|r| [T::of(r[0] / self.input_scale[0]), T::of(r[1] / self.input_scale[1])]).collect())
            .collect();
        let refs: Vec<&[T]> = inputs.iter().map(|v| v.as_slice()).collect();
        let out = predict(params, &refs)?;
        Ok(out.chunks_exact(2).map(|o| [o[0].f64(), o[1].f64()]).collect())
    }

    /// Estimates `[p1, p2]` for raw (unscaled) windows of interleaved
    /// `[z̈, ÿ]` rows.
    pub fn predict_windows(&self, windows: &[&[f64]]) -> Result<Vec<[f64; 2]>> {
        match &self.network {
            Network::F32(p) => self.run(p, windows),
            Network::F64(p) => self.run(p, windows),
        }
    }
}

impl Predictor for Model {
    fn predict(&self, batch: &[(&Sample, &[f64])]) -> Result<Vec<[f64; 2]>> {
        let windows: Vec<&[f64]> = batch.iter().map(|(_, w)| *w).collect();
        self.predict_windows(&windows)
    }

    fn window_len(&self) -> usize {
        self.shape().input_len
    }
}

/// Mean and population standard deviation of per-sample relative deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub mu: f64,
    pub sigma: f64,
}

impl Deviation {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Deviation { mu: 0.0, sigma: 0.0 };
        }
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        Deviation { mu, sigma: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Test => "test",
        })
    }
}

/// Relative deviation statistics for `p1` and `p2` on one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub step: u64,
    pub split: SplitName,
    pub noise_sigma: f64,
    pub samples: usize,
    pub p1: Deviation,
    pub p2: Deviation,
}

impl EvalReport {
    pub fn params(&self) -> [Deviation; 2] {
        [self.p1, self.p2]
    }
}

/// Per-sample evaluation input: one window per sample, fixed by
/// `(seed, road, mass)`. With `sigma > 0` the whole trace is perturbed first
/// with noise seeded the same way, so repeated calls see the same noise.
fn eval_window(sample: &Sample, len: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let key = sample.key();
    let start = draw_start_for_len(sample.len(), len, &mut seed::derived_rng(seed, Stream::EvalWindow, &key))?;
    if sigma == 0.0 {
        return Ok(window_with_len(sample, start, len)?.values);
    }
    let mut rng = seed::derived_rng(seed, Stream::EvalNoise, &key);
    let noisy = add_noise(sample, sigma, &mut rng)?;
    Ok(window_with_len(&noisy, start, len)?.values)
}

/// Per-sample relative deviations `[p1, p2]`, in view order.
pub fn deviations(model: &dyn Predictor, view: &DatasetView<'_>, sigma: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    let samples: Vec<&Sample> = view.iter().collect();
    let windows = samples.par_iter().map(|s| eval_window(s, model.window_len(), sigma, seed)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(samples.len());
    for (ss, ws) in samples.chunks(EVAL_BATCH).zip(windows.chunks(EVAL_BATCH)) {
        let batch: Vec<(&Sample, &[f64])> = ss.iter().zip(ws).map(|(s, w)| (*s, w.as_slice())).collect();
        let preds = model.predict(&batch)?;
        if preds.len() != batch.len() {
            return Err(Error::Shape(format!("predictor returned {} estimates for {} windows", preds.len(), batch.len())));
        }
        for (s, p) in ss.iter().zip(preds) {
            let t = s.target();
            out.push([relative_deviation(t.p1, p[0])?, relative_deviation(t.p2, p[1])?]);
        }
    }
    Ok(out)
}

pub fn evaluate(
    model: &dyn Predictor,
    view: &DatasetView<'_>,
    split: SplitName,
    sigma: f64,
    seed: u64,
) -> Result<EvalReport> {
    if view.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty view"));
    }
    let devs = deviations(model, view, sigma, seed)?;
    let p1: Vec<f64> = devs.iter().map(|d| d[0]).collect();
    let p2: Vec<f64> = devs.iter().map(|d| d[1]).collect();
    Ok(EvalReport { step: 0, split, noise_sigma: sigma, samples: devs.len(), p1: Deviation::of(&p1), p2: Deviation::of(&p2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub objective: Objective,
    pub noise_sigma: f64,
    pub param: usize,
    pub mu: f64,
    pub sigma: f64,
}

/// Clean and noisy test deviations of the two objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub noise_sigma: f64,
    pub rows: Vec<RobustnessRow>,
    /// Noisy-test `μ` of the unlabelled network is strictly lower, per parameter.
    pub unlabelled_lower_noisy: [bool; 2],
    /// Noisy/clean `μ` ratios `[labelled, unlabelled]` per parameter.
    pub degradation: [[f64; 2]; 2],
    /// Labelled degrades strictly more than unlabelled, per parameter.
    pub labelled_degrades_more: [bool; 2],
}

impl RobustnessReport {
    pub fn get(&self, objective: Objective, noisy: bool, param: usize) -> &RobustnessRow {
        self.rows
            .iter()
            .find(|r| r.objective == objective && (r.noise_sigma > 0.0) == noisy && r.param == param)
            .expect("report covers every combination")
    }

    /// Both orderings hold for both parameters.
    pub fn unlabelled_more_robust(&self) -> bool {
        self.unlabelled_lower_noisy.iter().chain(&self.labelled_degrades_more).all(|&b| b)
    }

    pub fn verdict(&self) -> &'static str {
        if self.unlabelled_more_robust() {
            "J_U more robust"
        } else {
            "J_U not more robust"
        }
    }
}

fn ratio(noisy: f64, clean: f64) -> f64 {
    if clean > 0.0 {
        noisy / clean
    } else if noisy > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

pub fn robustness_report(
    labelled: &dyn Predictor,
    unlabelled: &dyn Predictor,
    test: &DatasetView<'_>,
    sigma: f64,
    seed: u64,
) -> Result<RobustnessReport> {
    let mut rows = Vec::with_capacity(8);
    let mut mu = [[[0.0; 2]; 2]; 2]; // [objective][noisy][param]
    for (o, (objective, model)) in [(Objective::Labelled, labelled), (Objective::Unlabelled, unlabelled)].into_iter().enumerate() {
        for (n, s) in [0.0, sigma].into_iter().enumerate() {
            let r = evaluate(model, test, SplitName::Test, s, seed)?;
            for (param, d) in r.params().into_iter().enumerate() {
                mu[o][n][param] = d.mu;
                rows.push(RobustnessRow { objective, noise_sigma: s, param: param + 1, mu: d.mu, sigma: d.sigma });
            }
        }
    }
    let mut lower = [false; 2];
    let mut degrades = [false; 2];
    let mut degradation = [[0.0; 2]; 2];
    for p in 0..2 {
        lower[p] = mu[1][1][p] < mu[0][1][p];
        degradation[p] = [ratio(mu[0][1][p], mu[0][0][p]), ratio(mu[1][1][p], mu[1][0][p])];
        degrades[p] = degradation[p][0] > degradation[p][1];
    }
    Ok(RobustnessReport {
        noise_sigma: sigma,
        rows,
        unlabelled_lower_noisy: lower,
        degradation,
        labelled_degrades_more: degrades,
    })
}

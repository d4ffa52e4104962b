use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use super::eval::{evaluate, EvalReport, Model, ModelMeta, Network, SplitName};
use super::objectives::{grad_labelled, loss_grad_unlabelled, loss_labelled};
use super::{Objective, Precision, TrainConfig};
use crate::dataset::{reconstruct_kinematics, DatasetView, Kinematics};
use crate::error::{Error, Result};
use crate::net::{adam_step, backward_batch, forward_batch, init_network, AdamState, Checkpoint, NetParams, Real};
use crate::seed::{self, Stream};

/// Hooks into a running training loop. All methods default to no-ops.
pub trait TrainObserver {
    fn on_step(&mut self, _step: u64, _loss: f64) {}

    fn on_eval(&mut self, _report: &EvalReport) {}

    /// Steps between calls to [`TrainObserver::on_checkpoint`].
    fn checkpoint_interval(&self) -> Option<u64> {
        None
    }

    fn on_checkpoint(&mut self, _ckpt: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EvalReport>,
    pub model: Model,
}

/// Per-sample training inputs prepared once before the loop.
struct Prepared<T> {
    inputs: Vec<Vec<T>>,
    kinematics: Vec<Kinematics>,
    input_scale: [f64; 2],
}

fn input_scale(view: &DatasetView<'_>, normalize: bool) -> [f64; 2] {
    if !normalize {
        return [1.0, 1.0];
    }
    let (mut sz, mut sy, mut n) = (0.0, 0.0, 0usize);
    for s in view.iter() {
        sz += s.z_ddot.iter().map(|v| v * v).sum::<f64>();
        sy += s.y_ddot.iter().map(|v| v * v).sum::<f64>();
        n += s.len();
    }
    let rms = |q: f64| if q > 0.0 { (q / n as f64).sqrt() } else { 1.0 };
    [rms(sz), rms(sy)]
}

fn prepare<T: Real>(view: &DatasetView<'_>, config: &TrainConfig) -> Result<Prepared<T>> {
    let input_scale = input_scale(view, config.normalize_inputs);
    let inputs = view
        .iter()
        .map(|s| {
            s.z_ddot
                .iter()
                .zip(&s.y_ddot)
                .flat_map(|(&z, &y)| [T::of(z / input_scale[0]), T::of(y / input_scale[1])])
                .collect()
        })
        .collect();
    let kinematics = match config.objective {
        Objective::Unlabelled => {
            let h = view.dataset.config.h;
            view.iter().map(|s| reconstruct_kinematics(&s.z_ddot, &s.y_ddot, h)).collect::<Result<_>>()?
        }
        Objective::Labelled => Vec::new(),
    };
    Ok(Prepared { inputs, kinematics, input_scale })
}

fn model_of<T: Real>(params: &NetParams<T>, precision: Precision, input_scale: [f64; 2]) -> Model {
    let network = match precision {
        Precision::F32 => Network::F32(params.cast()),
        Precision::F64 => Network::F64(params.cast()),
    };
    Model { network, input_scale }
}

fn extra(config: &TrainConfig, input_scale: [f64; 2], history: &[EvalReport]) -> serde_json::Value {
    json!({
        "config": config,
        "model": ModelMeta { precision: config.precision, input_scale },
        "history": history,
    })
}

/// Checks that a checkpoint was produced by the same configuration, up to
/// the step budget, and returns its stored history.
fn resume_history(ckpt: &Checkpoint, config: &TrainConfig) -> Result<Vec<EvalReport>> {
    let stored: TrainConfig = serde_json::from_value(ckpt.extra.get("config").cloned().unwrap_or_default())
        .map_err(|e| Error::invalid(format!("checkpoint lacks a training configuration: {e}")))?;
    if (TrainConfig { steps: config.steps, ..stored }) != *config {
        return Err(Error::invalid("checkpoint was trained with a different configuration"));
    }
    if ckpt.step > config.steps {
        return Err(Error::invalid(format!("checkpoint is at step {}, beyond the budget {}", ckpt.step, config.steps)));
    }
    serde_json::from_value(ckpt.extra.get("history").cloned().unwrap_or_else(|| json!([])))
        .map_err(|e| Error::invalid(format!("malformed checkpoint history: {e}")))
}

/// Trains a network on `train` and evaluates it on both views every
/// `eval_every` steps and after the last step.
///
/// Every step draws its batch from a generator derived from `(seed, step)`,
/// so resuming from a checkpoint continues exactly where the run stopped.
pub fn train(
    train: &DatasetView<'_>,
    test: &DatasetView<'_>,
    config: &TrainConfig,
    resume: Option<&Checkpoint>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training view is empty"));
    }
    let n = train.dataset.config.n;
    if train.iter().any(|s| s.len() != n) || n < config.shape.input_len {
        return Err(Error::invalid(format!("training traces must all hold N = {n} >= {} rows", config.shape.input_len)));
    }
    match config.precision {
        Precision::F32 => run::<f32>(train, test, config, resume, observer),
        Precision::F64 => run::<f64>(train, test, config, resume, observer),
    }
}

fn run<T: Real>(
    train: &DatasetView<'_>,
    test: &DatasetView<'_>,
    config: &TrainConfig,
    resume: Option<&Checkpoint>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let prep = prepare::<T>(train, config)?;
    let (mut params, mut adam, mut history, first) = match resume {
        Some(ckpt) => {
            let history = resume_history(ckpt, config)?;
            (ckpt.params.cast::<T>(), ckpt.adam_as::<T>(), history, ckpt.step + 1)
        }
        None => {
            let params = init_network::<T>(config.shape, config.seed)?;
            let adam = AdamState::for_params(config.adam(), &params);
            (params, adam, Vec::new(), 1)
        }
    };
    if params.shape != config.shape {
        return Err(Error::Shape("checkpoint architecture differs from the configuration".into()));
    }

    let len = config.shape.input_len;
    let n = train.dataset.config.n;
    let batch = config.batch_size;
    let noise = if config.noise_sigma_train > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma_train).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let interval = observer.checkpoint_interval().filter(|&i| i > 0);

    for step in first..=config.steps {
        let mut rng = seed::derived_rng(config.seed, Stream::Batch, &[step]);
        let picks: Vec<(usize, usize)> =
            (0..batch).map(|_| (rng.random_range(0..train.len()), rng.random_range(0..=n - len))).collect();

        let noisy: Vec<Vec<T>>;
        let windows: Vec<&[T]> = match &noise {
            None => picks.iter().map(|&(i, s)| &prep.inputs[i][2 * s..2 * (s + len)]).collect(),
            Some(dist) => {
                let mut nrng = seed::derived_rng(config.seed, Stream::TrainNoise, &[step]);
                noisy = picks
                    .iter()
                    .map(|&(i, s)| {
                        let scale = prep.input_scale;
                        prep.inputs[i][2 * s..2 * (s + len)]
                            .iter()
                            .enumerate()
                            .map(|(k, &v)| v + T::of(dist.sample(&mut nrng) / scale[k % 2]))
                            .collect()
                    })
                    .collect();
                noisy.iter().map(|v| v.as_slice()).collect()
            }
        };

        let fwd = forward_batch(&params, &windows)?;
        let mut upstream = vec![T::zero(); 2 * batch];
        let mut total = 0.0;
        for (b, &(i, s)) in picks.iter().enumerate() {
            let out = fwd.output(b);
            let pred = [out[0].f64(), out[1].f64()];
            let sample = train.get(i);
            let (loss, grad) = match config.objective {
                Objective::Labelled => {
                    let truth = sample.target().as_array();
                    (loss_labelled(pred, truth), grad_labelled(pred, truth))
                }
                Objective::Unlabelled => loss_grad_unlabelled(pred, &prep.kinematics[i], s..s + len, &sample.z_ddot)?,
            };
            total += loss;
            upstream[2 * b] = T::of(grad[0] / batch as f64);
            upstream[2 * b + 1] = T::of(grad[1] / batch as f64);
        }
        let loss = total / batch as f64;
        let grads = backward_batch(&params, &fwd, &upstream)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: step as usize,
                batch: picks.iter().map(|&(i, _)| train.indices[i]).collect(),
            });
        }
        adam_step(&mut params, &grads, &mut adam)?;
        observer.on_step(step, loss);

        let periodic = config.eval_every > 0 && step % config.eval_every == 0;
        if periodic || step == config.steps {
            let model = model_of(&params, config.precision, prep.input_scale);
            for report in evaluate_views(&model, train, test, config, step)? {
                observer.on_eval(&report);
                history.push(report);
            }
        }
        if interval.is_some_and(|i| step % i == 0) && step != config.steps {
            let ckpt = Checkpoint::from_state(config.seed, step, &params, &adam, extra(config, prep.input_scale, &history));
            observer.on_checkpoint(&ckpt)?;
        }
    }

    let step = config.steps.max(first - 1);
    let checkpoint = Checkpoint::from_state(config.seed, step, &params, &adam, extra(config, prep.input_scale, &history));
    let model = model_of(&params, config.precision, prep.input_scale);
    Ok(TrainOutcome { checkpoint, history, model })
}

/// Clean train and test reports, then noisy ones when a noise level is set.
fn evaluate_views(
    model: &Model,
    train: &DatasetView<'_>,
    test: &DatasetView<'_>,
    config: &TrainConfig,
    step: u64,
) -> Result<Vec<EvalReport>> {
    let mut sigmas = vec![0.0];
    if config.noise_sigma_eval > 0.0 {
        sigmas.push(config.noise_sigma_eval);
    }
    let mut out = Vec::new();
    for sigma in sigmas {
        for (view, split) in [(train, SplitName::Train), (test, SplitName::Test)] {
            if view.is_empty() {
                continue;
            }
            let mut r = evaluate(model, view, split, sigma, config.eval_seed)?;
            r.step = step;
            out.push(r);
        }
    }
    Ok(out)
}

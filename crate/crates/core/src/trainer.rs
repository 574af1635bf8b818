//! Optimisation loop and evaluation.
//!
//! Each step draws `m_boundary` of the dense boundary samples, predicts all
//! supervision points and takes one Adam step on the mean squared error.
//! The returned model is the best-loss snapshot.

use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{adam_step, AdamConfig, AdamState, Tensor};
use crate::model::{FienoModel, ModelError};
use crate::rng::stream;
use crate::truth::Dataset;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub m_boundary: usize,
    pub n_interior: usize,
    pub dense_boundary: usize,
    pub seed: u64,
    pub early_stop_patience: usize,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            lr: 1e-3,
            m_boundary: 200,
            n_interior: 200,
            dense_boundary: 2000,
            seed: 1,
            early_stop_patience: 500,
            eval_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.m_boundary == 0 || self.m_boundary > self.dense_boundary {
            return Err(TrainError::Config(format!(
                "need 0 < m_boundary ({}) <= dense_boundary ({})",
                self.m_boundary, self.dense_boundary
            )));
        }
        if self.n_interior == 0 {
            return Err(TrainError::Config("n_interior must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub train_mse: f64,
    pub holdout_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FienoModel,
    pub history: Vec<LossRecord>,
    pub best_loss: f64,
    pub best_step: usize,
}

impl TrainOutcome {
    /// Best training loss seen up to and including each recorded step.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.history
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.train_mse);
                Some(*best)
            })
            .collect()
    }
}

/// Trains `model` on `data`. `holdout`, when given, is scored every
/// `eval_every` steps for the loss history only; it never influences the
/// parameters or the snapshot choice.
pub fn train(
    mut model: FienoModel,
    data: &Dataset,
    cfg: &TrainConfig,
    holdout: Option<&Dataset>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if model.m() != cfg.m_boundary {
        return Err(TrainError::Config(format!(
            "model expects {} boundary samples but m_boundary = {}",
            model.m(),
            cfg.m_boundary
        )));
    }
    if data.boundary.len() < cfg.dense_boundary {
        return Err(TrainError::Config(format!(
            "dataset has {} boundary samples, dense_boundary = {}",
            data.boundary.len(),
            cfg.dense_boundary
        )));
    }
    if data.interior.len() < cfg.n_interior {
        return Err(TrainError::Config(format!(
            "dataset has {} interior points, n_interior = {}",
            data.interior.len(),
            cfg.n_interior
        )));
    }
    let dense = &data.boundary[..cfg.dense_boundary];
    let supervised = &data.interior[..cfg.n_interior];
    let points: Vec<_> = supervised.iter().map(|p| p.point).collect();
    let features = model.elm_features(&points);
    let targets = Tensor::vector(supervised.iter().map(|p| p.true_value).collect());

    let holdout_cache = holdout.map(|h| evaluation_inputs(&model, h)).transpose()?;

    let adam = AdamConfig::with_lr(cfg.lr);
    let mut state = AdamState::new();
    let mut rng = stream(cfg.seed, "batches");
    let mut history = Vec::with_capacity(cfg.steps);
    let mut best = (f64::INFINITY, 0usize, model.params().to_vec());

    for step in 0..cfg.steps {
        let batch: Vec<_> = sample(&mut rng, dense.len(), cfg.m_boundary)
            .into_iter()
            .map(|i| dense[i])
            .collect();
        let image = model.boundary_image(&batch)?;
        let (loss, grads) = model.mse_and_gradients(&features, &image, &targets)?;
        if !loss.is_finite() || grads.iter().any(|g| g.data().iter().any(|v| !v.is_finite())) {
            return Err(TrainError::Diverged { step, loss });
        }
        if loss < best.0 {
            best = (loss, step, model.params().to_vec());
        }
        let holdout_mse = match &holdout_cache {
            Some((f, i, t)) if cfg.eval_every > 0 && step % cfg.eval_every == 0 => Some(mse(&model, f, i, t)?),
            _ => None,
        };
        history.push(LossRecord {
            step,
            train_mse: loss,
            holdout_mse,
        });
        if step - best.1 >= cfg.early_stop_patience {
            log::info!("early stop at step {step}; best loss {:.3e} at step {}", best.0, best.1);
            break;
        }
        adam_step(model.params_mut(), &grads, &mut state, &adam);
    }

    let (best_loss, best_step, params) = best;
    if best_loss.is_finite() {
        model.params_mut().clone_from_slice(&params);
    }
    Ok(TrainOutcome {
        model,
        history,
        best_loss,
        best_step,
    })
}

fn evaluation_inputs(model: &FienoModel, data: &Dataset) -> Result<(Tensor, Tensor, Vec<f64>), ModelError> {
    let boundary = data.boundary_input(model.m());
    let image = model.boundary_image(&boundary)?;
    let features = model.elm_features(&data.points());
    Ok((features, image, data.truths()))
}

fn mse(model: &FienoModel, features: &Tensor, image: &Tensor, truths: &[f64]) -> Result<f64, ModelError> {
    let pred = model.predict_cached(features, image)?;
    Ok(mean_squared_error(&pred, truths))
}

pub fn mean_squared_error(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// Interior predictions using the first `m` boundary samples (α-sorted).
pub fn predict(model: &FienoModel, data: &Dataset) -> Result<Vec<f64>, ModelError> {
    let (features, image, _) = evaluation_inputs(model, data)?;
    model.predict_cached(&features, &image)
}

/// Mean squared error over every interior point of `data`, with the first
/// `m` boundary samples as input.
pub fn evaluate(model: &FienoModel, data: &Dataset) -> Result<f64, ModelError> {
    let (features, image, truths) = evaluation_inputs(model, data)?;
    mse(model, &features, &image, &truths)
}

pub fn write_loss_csv(history: &[LossRecord], path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "train_mse", "holdout_mse"])?;
    for r in history {
        w.write_record([
            r.step.to_string(),
            format!("{:e}", r.train_mse),
            r.holdout_mse.map(|v| format!("{v:e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Padding;
    use crate::geometry::BoundaryId;
    use crate::model::{IanConfig, KanConfig, ModelConfig};
    use crate::truth::{build_dataset, AnalyticField, BcKind, Equation, PdeSpec, TruthMode};

    fn tiny_model(seed: u64) -> FienoModel {
        FienoModel::new(ModelConfig {
            kan: KanConfig {
                elm_layers: vec![16, 16],
                mlp_layers: vec![16, 4],
                d: 4,
                elm_seed: seed,
                elm_fan_in_scaling: true,
            },
            ian: IanConfig {
                conv_channels: vec![2, 4],
                kernel_size: 3,
                fc_layers: vec![8, 4],
                d: 4,
                m: 16,
                padding: Padding::Valid,
            },
            bc_kind: BcKind::Dirichlet,
            init_seed: seed,
        })
        .unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            steps: 60,
            lr: 1e-2,
            m_boundary: 16,
            n_interior: 20,
            dense_boundary: 64,
            seed: 3,
            early_stop_patience: 500,
            eval_every: 10,
        }
    }

    fn laplace_data(seed: u64) -> Dataset {
        let pde = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::Analytic);
        build_dataset(BoundaryId::BTrain, &pde, 64, 40, seed).unwrap()
    }

    #[test]
    fn zero_target_zero_lambda_starts_at_zero_loss() {
        let mut pde = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::Analytic);
        pde.analytic_field = AnalyticField::Constant(0.0);
        let data = build_dataset(BoundaryId::BTrain, &pde, 64, 40, 1).unwrap();
        let mut model = tiny_model(1);
        model.set_lambda(0.0);
        let out = train(model, &data, &tiny_cfg(), None).unwrap();
        assert_eq!(out.history[0].train_mse, 0.0);
        assert_eq!(out.best_loss, 0.0);
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let model = tiny_model(2);
        let mut data = laplace_data(2);
        data.boundary.truncate(16);
        let preds = predict(&model, &data).unwrap();
        for (p, y) in data.interior.iter_mut().zip(&preds) {
            p.true_value = *y;
        }
        let cfg = TrainConfig {
            dense_boundary: 16,
            steps: 5,
            ..tiny_cfg()
        };
        let out = train(model.clone(), &data, &cfg, None).unwrap();
        assert_eq!(out.history[0].train_mse, 0.0);
        assert_eq!(out.model, model);
        assert_eq!(evaluate(&model, &data).unwrap(), 0.0);

        for p in data.interior.iter_mut() {
            p.true_value -= 0.01;
        }
        assert!((evaluate(&model, &data).unwrap() - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let model = tiny_model(3);
        let data = laplace_data(3);
        assert_eq!(evaluate(&model, &data).unwrap(), evaluate(&model, &data).unwrap());
    }

    #[test]
    fn training_is_seed_deterministic_and_reduces_loss() {
        let data = laplace_data(4);
        let holdout = laplace_data(5);
        let a = train(tiny_model(4), &data, &tiny_cfg(), Some(&holdout)).unwrap();
        let b = train(tiny_model(4), &data, &tiny_cfg(), Some(&holdout)).unwrap();
        let bits = |o: &TrainOutcome| {
            o.history
                .iter()
                .map(|r| (r.train_mse.to_bits(), r.holdout_mse.map(f64::to_bits)))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.model, b.model);
        assert!(a.best_loss < a.history[0].train_mse);
        assert_eq!(a.history.iter().filter(|r| r.holdout_mse.is_some()).count(), 6);
        let best = a.best_so_far();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*best.last().unwrap(), a.best_loss);
    }

    #[test]
    fn early_stopping() {
        let data = laplace_data(6);
        let cfg = TrainConfig {
            steps: 200,
            lr: 10.0,
            early_stop_patience: 5,
            ..tiny_cfg()
        };
        let out = train(tiny_model(6), &data, &cfg, None).unwrap();
        assert!(out.history.len() < 200);
        assert_eq!(out.history.last().unwrap().step - out.best_step, 5);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut data = laplace_data(7);
        data.interior[0].true_value = f64::NAN;
        assert!(matches!(
            train(tiny_model(7), &data, &tiny_cfg(), None),
            Err(TrainError::Diverged { step: 0, .. })
        ));
    }

    #[test]
    fn config_checks() {
        let data = laplace_data(8);
        for cfg in [
            TrainConfig { lr: 0.0, ..tiny_cfg() },
            TrainConfig { m_boundary: 100, ..tiny_cfg() },
            TrainConfig { n_interior: 41, ..tiny_cfg() },
            TrainConfig { dense_boundary: 65, ..tiny_cfg() },
            TrainConfig { m_boundary: 17, dense_boundary: 64, ..tiny_cfg() },
        ] {
            assert!(train(tiny_model(8), &data, &cfg, None).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn loss_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        let history = [
            LossRecord { step: 0, train_mse: 0.5, holdout_mse: Some(0.25) },
            LossRecord { step: 1, train_mse: 0.125, holdout_mse: None },
        ];
        write_loss_csv(&history, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "step,train_mse,holdout_mse\n0,5e-1,2.5e-1\n1,1.25e-1,\n");
    }
}

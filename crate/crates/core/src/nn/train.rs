//! Mini-batch training loop and evaluation.

use rand::seq::SliceRandom;

use super::{softmax_cross_entropy, Adam, AdamConfig, Model, Tensor};
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, initial_lr: 0.001, lr_decay: 0.96, adam: AdamConfig::default(), batch_size: 64, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be positive"));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(invalid(format!("initial_lr {} must be positive", self.initial_lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(invalid(format!("lr_decay {} outside (0, 1]", self.lr_decay)));
        }
        if !(a.beta1 > 0.0 && a.beta1 < 1.0 && a.beta2 > 0.0 && a.beta2 < 1.0 && a.eps > 0.0) {
            return Err(invalid("adam betas must lie in (0, 1) and eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Kernel control parameters at the end of the epoch.
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.test_acc)
    }

    /// `epoch,train_loss,train_acc,test_acc`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,test_acc\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{:?},{:?},{:?}\n", r.epoch, r.train_loss, r.train_acc, r.test_acc));
        }
        s
    }

    /// `epoch,<name_0>,<name_1>,…`; `None` when no epoch recorded θ.
    pub fn theta_csv(&self, names: &[String]) -> Option<String> {
        if self.epochs.iter().any(|r| r.theta.is_none()) || self.epochs.is_empty() {
            return None;
        }
        let mut s = String::from("epoch");
        for n in names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for r in &self.epochs {
            s.push_str(&r.epoch.to_string());
            for v in r.theta.as_ref().unwrap() {
                s.push_str(&format!(",{v:?}"));
            }
            s.push('\n');
        }
        Some(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

/// Shuffled mini-batches; a trailing batch of one sample joins the previous
/// batch so batch norm always sees at least two samples.
fn batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng_indexed(seed, "train.shuffle", epoch as u64));
    let mut out: Vec<Vec<usize>> = idx.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    (0..row.len()).fold(0, |best, i| if row[i] > row[best] { i } else { best })
}

fn check_labels(model: &Model, ds: &Dataset) -> Result<()> {
    if ds.n_classes() > model.n_classes {
        return Err(invalid(format!(
            "dataset has {} classes but the model predicts {}",
            ds.n_classes(),
            model.n_classes
        )));
    }
    Ok(())
}

pub fn train(model: &mut Model, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(invalid("training set is empty"));
    }
    check_labels(model, train_set)?;
    check_labels(model, test_set)?;
    let mut adam = Adam::new(cfg.adam);
    let mut lr = cfg.initial_lr;
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in batches(train_set.len(), cfg.batch_size, cfg.seed, epoch) {
            let x = train_set.samples.select(&batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train_set.labels[i]).collect();
            model.zero_grad();
            let logits = model.forward(&x, true)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(invalid(format!("training diverged at epoch {} (loss {loss})", epoch + 1)));
            }
            loss_sum += loss * batch.len() as f64;
            correct += (0..batch.len()).filter(|&b| argmax(logits.sample(b)) == labels[b]).count();
            model.backward(&grad)?;
            adam.step(&mut model.layers, lr);
        }
        model.clear_cache();
        lr *= cfg.lr_decay;
        let test_acc = if test_set.is_empty() { f64::NAN } else { evaluate(model, test_set)?.accuracy };
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            test_acc,
            theta: model.tfconv_layer().map(|t| t.params.theta.clone()),
        });
    }
    Ok(history)
}

const EVAL_CHUNK: usize = 128;

/// Inference-mode accuracy and confusion matrix.
pub fn evaluate(model: &mut Model, ds: &Dataset) -> Result<Evaluation> {
    check_labels(model, ds)?;
    let preds = predict(model, &ds.samples)?;
    let mut confusion = vec![vec![0; model.n_classes]; model.n_classes];
    for (&t, &p) in ds.labels.iter().zip(&preds) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..model.n_classes).map(|i| confusion[i][i]).sum();
    let accuracy = if ds.is_empty() { 0.0 } else { correct as f64 / ds.len() as f64 };
    Ok(Evaluation { accuracy, confusion })
}

pub fn predict(model: &mut Model, x: &Tensor) -> Result<Vec<usize>> {
    let mut preds = Vec::with_capacity(x.batch);
    let all: Vec<usize> = (0..x.batch).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let logits = model.forward(&x.select(chunk), false)?;
        preds.extend((0..chunk.len()).map(|b| argmax(logits.sample(b))));
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthSpec};
    use crate::nn::{assemble_model, build_backbone, Backbone, ModelMode, TfConvConfig};

    #[test]
    fn batching_covers_all_and_merges_singletons() {
        let b = batches(129, 64, 0, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![64, 65]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..129).collect::<Vec<_>>());
        assert_ne!(batches(10, 4, 0, 0), batches(10, 4, 0, 1));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lr_decay: 1.5, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
    }

    fn toy() -> Dataset {
        let x = Tensor::from_vec(
            2,
            1,
            64,
            (0..128).map(|i| if i < 64 { (i as f64 * 0.4).sin() } else { (i as f64 * 2.5).cos() }).collect(),
        )
        .unwrap();
        Dataset::new(x, vec![0, 1], 2, None).unwrap()
    }

    #[test]
    fn memorises_two_samples() {
        let ds = toy();
        let mut m = assemble_model(ModelMode::TfnAdd, Backbone::Lenet1d, TfConvConfig { channels: 2, ..Default::default() }, 2, 1).unwrap();
        let h = train(&mut m, &ds, &ds, &TrainConfig { epochs: 200, ..Default::default() }).unwrap();
        assert_eq!(h.epochs.len(), 200);
        assert_eq!(h.epochs.last().unwrap().train_acc, 1.0);
        for r in &h.epochs {
            let theta = r.theta.as_ref().unwrap();
            assert!(theta.iter().all(|f| (0.0..=0.5).contains(f)));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy();
        let run = || {
            let mut m = assemble_model(ModelMode::TfnAdd, Backbone::Lenet1d, TfConvConfig { channels: 2, ..Default::default() }, 2, 4).unwrap();
            let h = train(&mut m, &ds, &ds, &TrainConfig { epochs: 3, ..Default::default() }).unwrap();
            (h, m.layers.iter().map(|l| format!("{l:?}")).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn untrained_model_is_near_chance() {
        let ds = synth_generate(&SynthSpec::synth_bearing5(40), 0).unwrap();
        let mut m = build_backbone(Backbone::Lenet1d, 1, 5, 0).unwrap();
        let e = evaluate(&mut m, &ds).unwrap();
        assert!((e.accuracy - 0.2).abs() <= 0.1 + 1e-12, "{}", e.accuracy);
        let rows: Vec<usize> = e.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(rows, ds.class_counts());
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let ds = toy();
        let empty = ds.subset(&[]);
        let mut m = build_backbone(Backbone::Lenet1d, 1, 2, 0).unwrap();
        assert!(train(&mut m, &empty, &ds, &TrainConfig::default()).is_err());
    }
}

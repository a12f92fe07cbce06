//! Adam training under L1 loss with plateau learning-rate decay.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mlp::{Grads, Mlp, Scalar};
use crate::config::{Activation, TrainConfig};
use crate::error::{Error, Result};
use crate::game::RegretSample;

/// Rows per gradient work unit; fixed so the summation order never changes.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub width: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(width: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if width == 0 || x.len() != width * y.len() {
            return Err(Error::InvalidArgument(format!("{} feature values for {} targets of width {width}", x.len(), y.len())));
        }
        Ok(Self { width, x, y })
    }

    pub fn from_samples(samples: &[RegretSample]) -> Result<Self> {
        let width = super::FEATURE_LEN;
        let x = samples.iter().flat_map(|s| s.features.iter().copied()).collect();
        Self::new(width, x, samples.iter().map(|s| s.regret).collect())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.width..(i + 1) * self.width]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub hidden: usize,
    pub activation: Activation,
    pub alpha: f64,
    pub batch: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub val_fraction: f64,
    pub clip_output: bool,
    pub seed: u64,
}

impl TrainOptions {
    pub fn from_config(cfg: &TrainConfig, seed: u64) -> Self {
        Self {
            hidden: cfg.hidden,
            activation: cfg.activation,
            alpha: cfg.alpha,
            batch: cfg.batch,
            epochs: cfg.epochs,
            lr0: cfg.lr0,
            plateau_patience: cfg.plateau_patience,
            plateau_factor: cfg.plateau_factor,
            val_fraction: cfg.val_fraction,
            clip_output: cfg.clip_output,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_l1: f64,
    pub val_l1: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult<T> {
    /// Parameters of the epoch with the lowest validation loss.
    pub model: Mlp<T>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val: f64,
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    fn step(&mut self, params: Vec<&mut T>, grads: &[T], lr: f64) {
        let c = |v: f64| T::from_f64(v).unwrap();
        let (b1, b2, eps) = (c(0.9), c(0.999), c(1e-8));
        self.t += 1;
        let bc1 = T::one() - b1.powi(self.t);
        let bc2 = T::one() - b2.powi(self.t);
        let lr = c(lr);
        for (i, p) in params.into_iter().enumerate() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        }
    }
}

fn flatten<T: Scalar>(g: &Grads<T>) -> Vec<T> {
    g.w1.iter().chain(&g.b1).chain(&g.w2).copied().chain(std::iter::once(g.b2)).collect()
}

fn cast_rows<T: Scalar>(d: &Dataset, idx: &[usize]) -> (Vec<T>, Vec<T>) {
    let mut x = Vec::with_capacity(idx.len() * d.width);
    let mut y = Vec::with_capacity(idx.len());
    for &i in idx {
        x.extend(d.row(i).iter().map(|v| T::from_f64(*v).unwrap()));
        y.push(T::from_f64(d.y[i]).unwrap());
    }
    (x, y)
}

fn mean_l1<T: Scalar>(model: &Mlp<T>, x: &[T], y: &[T]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let pred = model.forward_batch(x);
    pred.iter().zip(y).map(|(p, t)| (*p - *t).abs().to_f64().unwrap()).sum::<f64>() / y.len() as f64
}

/// Trains a fresh model. The validation split is drawn once from the seed;
/// minibatch order is reshuffled every epoch from the same generator.
pub fn train<T: Scalar>(data: &Dataset, opts: &TrainOptions) -> Result<TrainResult<T>> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", data.len())));
    }
    if opts.batch == 0 || !(opts.lr0 >= 0.0) || opts.hidden == 0 {
        return Err(Error::InvalidArgument("batch and hidden must be >= 1 and lr0 >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((opts.val_fraction * data.len() as f64).round() as usize).clamp(1, data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    if train_idx.len() < 2 * opts.batch {
        log::warn!("training set of {} samples is smaller than two batches of {}", train_idx.len(), opts.batch);
    }
    let (vx, vy) = cast_rows::<T>(data, val_idx);

    let mut model: Mlp<T> = Mlp::random(data.width, opts.hidden, opts.activation, opts.alpha, opts.seed ^ 0x5eed);
    model.clip_output = opts.clip_output;
    let mut adam = Adam::new(model.param_count());
    let mut lr = opts.lr0;
    let mut best = (model.clone(), f64::INFINITY, 0usize);
    let mut since_best = 0usize;
    let mut log = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        train_idx.shuffle(&mut rng);
        let mut train_sum = 0.0;
        for batch in train_idx.chunks(opts.batch) {
            let (bx, by) = cast_rows::<T>(data, batch);
            let scale = T::one() / T::from_usize(batch.len()).unwrap();
            let parts: Vec<(Grads<T>, f64)> = bx
                .par_chunks(CHUNK * data.width)
                .zip(by.par_chunks(CHUNK))
                .map(|(cx, cy)| {
                    let mut g = Grads::zeros(model.input, model.hidden);
                    let mut l = 0.0;
                    for (x, t) in cx.chunks(data.width).zip(cy) {
                        l += model.accumulate_l1_grad(x, *t, scale, &mut g).abs().to_f64().unwrap();
                    }
                    (g, l)
                })
                .collect();
            let mut g = Grads::zeros(model.input, model.hidden);
            for (p, l) in &parts {
                g.add(p);
                train_sum += l;
            }
            adam.step(model.params_mut(), &flatten(&g), lr);
        }
        let train_l1 = train_sum / train_idx.len() as f64;
        let val_l1 = mean_l1(&model, &vx, &vy);
        if !train_l1.is_finite() || !val_l1.is_finite() || !model.is_finite() {
            return Err(Error::Training(format!("non-finite loss at epoch {epoch} (train {train_l1}, val {val_l1}, lr {lr})")));
        }
        log.push(EpochLog { epoch, train_l1, val_l1, lr });
        if val_l1 < best.1 {
            best = (model.clone(), val_l1, epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= opts.plateau_patience {
                lr *= opts.plateau_factor;
                since_best = 0;
                log::debug!("epoch {epoch}: learning rate reduced to {lr}");
            }
        }
    }
    if opts.epochs == 0 {
        best.1 = mean_l1(&model, &vx, &vy);
    }
    Ok(TrainResult { model: best.0, log, best_epoch: best.2, best_val: best.1 })
}

pub fn write_train_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "epoch,train_l1,val_l1,lr").map_err(io)?;
    for e in log {
        writeln!(f, "{},{},{},{}", e.epoch, e.train_l1, e.val_l1, e.lr).map_err(io)?;
    }
    f.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn opts(epochs: usize, lr0: f64) -> TrainOptions {
        TrainOptions {
            hidden: 16,
            activation: Activation::LeakyRelu,
            alpha: 0.01,
            batch: 32,
            epochs,
            lr0,
            plateau_patience: 5,
            plateau_factor: 0.5,
            val_fraction: 0.1,
            clip_output: false,
            seed: 1,
        }
    }

    fn linear_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = [0.5, -1.0, 0.25, 2.0];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            y.push(r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.1);
            x.extend(r);
        }
        Dataset::new(4, x, y).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_initial_parameters() {
        let d = linear_data(100, 0);
        let r = train::<f64>(&d, &opts(3, 0.0)).unwrap();
        let mut init: Mlp<f64> = Mlp::random(4, 16, Activation::LeakyRelu, 0.01, 1 ^ 0x5eed);
        init.clip_output = false;
        assert_eq!(r.model, init);
    }

    #[test]
    fn constant_features_learn_the_median() {
        let y = vec![0.0, 0.0, 0.0, 1.0, 5.0, 0.0, 0.0, 9.0, 0.0, 0.0, 0.0, 0.0];
        let mut ys = Vec::new();
        for _ in 0..20 {
            ys.extend(&y);
        }
        let d = Dataset::new(2, vec![0.0; 2 * ys.len()], ys).unwrap();
        let mut o = opts(300, 0.01);
        o.val_fraction = 0.2;
        let r = train::<f64>(&d, &o).unwrap();
        let p = r.model.forward(&[0.0, 0.0]);
        assert!(p.abs() < 0.05, "prediction {p}");
    }

    #[test]
    fn training_is_reproducible() {
        let d = linear_data(200, 3);
        let a = train::<f32>(&d, &opts(5, 0.005)).unwrap();
        let b = train::<f32>(&d, &opts(5, 0.005)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn loss_decreases_on_realizable_data() {
        let d = linear_data(500, 4);
        let r = train::<f64>(&d, &opts(60, 0.005)).unwrap();
        assert!(r.best_val < r.log[0].val_l1 * 0.2, "{} vs {}", r.best_val, r.log[0].val_l1);
    }
}

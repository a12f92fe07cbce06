//! One-hidden-layer scalar-output perceptron.

use std::fmt::Debug;
use std::path::Path;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::config::Activation;
use crate::error::{Error, Result};

pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}
impl<T: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static> Scalar for T {}

fn c<T: Scalar>(v: f64) -> T {
    T::from_f64(v).unwrap()
}

const MODEL_MAGIC: &[u8; 4] = b"PCSR";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub input: usize,
    pub hidden: usize,
    /// `hidden x input`, row-major.
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
    pub activation: Activation,
    pub alpha: T,
    /// Clip predictions at zero (training always sees the raw output).
    pub clip_output: bool,
}

/// Gradient buffer laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { w1: vec![T::zero(); input * hidden], b1: vec![T::zero(); hidden], w2: vec![T::zero(); hidden], b2: T::zero() }
    }

    pub fn add(&mut self, o: &Self) {
        for (a, b) in self.w1.iter_mut().zip(&o.w1) {
            *a = *a + *b;
        }
        for (a, b) in self.b1.iter_mut().zip(&o.b1) {
            *a = *a + *b;
        }
        for (a, b) in self.w2.iter_mut().zip(&o.w2) {
            *a = *a + *b;
        }
        self.b2 = self.b2 + o.b2;
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(input: usize, hidden: usize, activation: Activation, alpha: f64) -> Self {
        Self {
            input,
            hidden,
            w1: vec![T::zero(); input * hidden],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); hidden],
            b2: T::zero(),
            activation,
            alpha: c(alpha),
            clip_output: false,
        }
    }

    /// Uniform `+-1/sqrt(fan_in)` initialization.
    pub fn random(input: usize, hidden: usize, activation: Activation, alpha: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(input, hidden, activation, alpha);
        let k1 = 1.0 / (input as f64).sqrt();
        let k2 = 1.0 / (hidden as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = c(rng.random_range(-k1..k1)));
        m.b1.iter_mut().for_each(|w| *w = c(rng.random_range(-k1..k1)));
        m.w2.iter_mut().for_each(|w| *w = c(rng.random_range(-k2..k2)));
        m.b2 = c(rng.random_range(-k2..k2));
        m
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    fn act(&self, z: T) -> T {
        match self.activation {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::LeakyRelu => {
                if z > T::zero() {
                    z
                } else {
                    self.alpha * z
                }
            }
        }
    }

    fn act_grad(&self, z: T) -> T {
        match self.activation {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu => {
                if z > T::zero() {
                    T::one()
                } else {
                    self.alpha
                }
            }
        }
    }

    fn pre(&self, x: &[T], h: usize) -> T {
        let row = &self.w1[h * self.input..(h + 1) * self.input];
        row.iter().zip(x).fold(self.b1[h], |acc, (w, v)| acc + *w * *v)
    }

    /// Raw network output.
    pub fn forward(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.input);
        (0..self.hidden).fold(self.b2, |acc, h| acc + self.w2[h] * self.act(self.pre(x, h)))
    }

    /// Output as used by the strategy: clipped at zero when enabled.
    pub fn predict(&self, x: &[T]) -> T {
        let y = self.forward(x);
        if self.clip_output {
            y.max(T::zero())
        } else {
            y
        }
    }

    /// Raw outputs for rows of `xs` (`n x input`, row-major).
    pub fn forward_batch(&self, xs: &[T]) -> Vec<T> {
        xs.par_chunks(self.input).map(|x| self.forward(x)).collect()
    }

    /// Adds the gradient of `scale * |f(x) - target|` to `g`; returns the residual.
    pub fn accumulate_l1_grad(&self, x: &[T], target: T, scale: T, g: &mut Grads<T>) -> T {
        let z: Vec<T> = (0..self.hidden).map(|h| self.pre(x, h)).collect();
        let y = z.iter().zip(&self.w2).fold(self.b2, |acc, (zh, w)| acc + *w * self.act(*zh));
        let r = y - target;
        let d = if r > T::zero() {
            scale
        } else if r < T::zero() {
            -scale
        } else {
            T::zero()
        };
        if d == T::zero() {
            return r;
        }
        g.b2 = g.b2 + d;
        for h in 0..self.hidden {
            g.w2[h] = g.w2[h] + d * self.act(z[h]);
            let dz = d * self.w2[h] * self.act_grad(z[h]);
            if dz == T::zero() {
                continue;
            }
            g.b1[h] = g.b1[h] + dz;
            let row = &mut g.w1[h * self.input..(h + 1) * self.input];
            for (gw, xv) in row.iter_mut().zip(x) {
                *gw = *gw + dz * *xv;
            }
        }
        r
    }

    pub fn params_mut(&mut self) -> Vec<&mut T> {
        let mut v: Vec<&mut T> = Vec::with_capacity(self.param_count());
        v.extend(self.w1.iter_mut());
        v.extend(self.b1.iter_mut());
        v.extend(self.w2.iter_mut());
        v.push(&mut self.b2);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite()) && self.b2.is_finite()
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        let f = |v: &T| U::from_f64(v.to_f64().unwrap()).unwrap();
        Mlp {
            input: self.input,
            hidden: self.hidden,
            w1: self.w1.iter().map(f).collect(),
            b1: self.b1.iter().map(f).collect(),
            w2: self.w2.iter().map(f).collect(),
            b2: f(&self.b2),
            activation: self.activation,
            alpha: f(&self.alpha),
            clip_output: self.clip_output,
        }
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::LeakyRelu => 0,
        Activation::Relu => 1,
        Activation::Identity => 2,
    }
}

impl Mlp<f32> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = ByteWriter::new();
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.u32(self.input as u32);
        w.u32(self.hidden as u32);
        w.f32(self.alpha);
        w.u8(activation_code(self.activation));
        w.u8(self.clip_output as u8);
        for v in self.w1.iter().chain(&self.b1).chain(&self.w2) {
            w.f32(*v);
        }
        w.f32(self.b2);
        w.write_to(path)
    }

    /// Loads a model and checks its input width against `expected_input`.
    pub fn load(path: &Path, expected_input: usize) -> Result<Self> {
        let data = read_file(path)?;
        let mut r = ByteReader::new(&data, "regret model");
        r.expect_magic(MODEL_MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("model version {version}, expected {MODEL_VERSION}")));
        }
        let input = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        if input != expected_input {
            return Err(Error::Format(format!("model feature_len {input} does not match expected {expected_input}")));
        }
        let alpha = r.f32()?;
        let activation = match r.u8()? {
            0 => Activation::LeakyRelu,
            1 => Activation::Relu,
            2 => Activation::Identity,
            k => return Err(Error::Format(format!("unknown activation code {k}"))),
        };
        let clip_output = r.u8()? != 0;
        let mut read = |n: usize| -> Result<Vec<f32>> { (0..n).map(|_| r.f32()).collect() };
        let w1 = read(input * hidden)?;
        let b1 = read(hidden)?;
        let w2 = read(hidden)?;
        let b2 = r.f32()?;
        r.finish()?;
        Ok(Self { input, hidden, w1, b1, w2, b2, activation, alpha, clip_output })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// The sample sat on a kink of the loss or of an activation.
    pub skipped: bool,
}

/// Compares the analytic L1 gradient with central differences of step `h`.
pub fn grad_check(model: &Mlp<f64>, x: &[f64], target: f64, h: f64) -> GradCheck {
    let skip = GradCheck { max_rel_err: 0.0, checked: 0, skipped: true };
    let y = model.forward(x);
    let margin = 10.0 * h * (1.0 + x.iter().map(|v| v.abs()).sum::<f64>() + model.w2.iter().map(|v| v.abs()).sum::<f64>());
    if (y - target).abs() <= margin {
        return skip;
    }
    if model.activation != Activation::Identity && (0..model.hidden).any(|k| model.pre(x, k).abs() <= margin) {
        return skip;
    }
    let mut g = Grads::zeros(model.input, model.hidden);
    model.accumulate_l1_grad(x, target, 1.0, &mut g);
    let analytic: Vec<f64> = g.w1.iter().chain(&g.b1).chain(&g.w2).copied().chain(std::iter::once(g.b2)).collect();
    let mut m = model.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let orig = *m.params_mut()[i];
        *m.params_mut()[i] = orig + h;
        let up = (m.forward(x) - target).abs();
        *m.params_mut()[i] = orig - h;
        let down = (m.forward(x) - target).abs();
        *m.params_mut()[i] = orig;
        let num = (up - down) / (2.0 * h);
        let scale = a.abs().max(num.abs());
        if scale > 1e-10 {
            worst = worst.max((a - num).abs() / scale);
        }
    }
    GradCheck { max_rel_err: worst, checked: analytic.len(), skipped: false }
}

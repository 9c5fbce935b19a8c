use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::Normalization;
use super::prediction::Prediction;
use crate::dynamics::{Class, Trajectory};
use crate::error::{Error, Result};

/// Output index of the dark class (`p1`); bright is index 1 (`p2`).
pub const DARK_OUTPUT: usize = 0;
pub const BRIGHT_OUTPUT: usize = 1;

/// Hidden width rule: 12.5 neurons per 1000 repetitions, at least one.
pub fn hidden_width(n_inputs: usize) -> usize {
    ((12.5 * n_inputs as f64 / 1000.0).round() as usize).max(1)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn class_index(class: Class) -> usize {
    match class {
        Class::Dark => DARK_OUTPUT,
        Class::Bright => BRIGHT_OUTPUT,
    }
}

/// Two-layer feed-forward classifier: sigmoid hidden layer, softmax output.
#[derive(Clone, Debug, PartialEq)]
pub struct ShallowNet {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub normalization: Normalization,
}

/// Parameter-shaped gradient of the mean cross-entropy loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl ShallowNet {
    pub fn zeros(n_inputs: usize, hidden: usize) -> Self {
        ShallowNet {
            w1: DMatrix::zeros(hidden, n_inputs),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(2, hidden),
            b2: DVector::zeros(2),
            normalization: Normalization::default(),
        }
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` per layer.
    pub fn random<R: Rng>(n_inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let a1 = 1.0 / (n_inputs as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        let mut u = |a: f64| rng.random_range(-a..a);
        let w1 = DMatrix::from_fn(hidden, n_inputs, |_, _| u(a1));
        let b1 = DVector::from_fn(hidden, |_, _| u(a1));
        let w2 = DMatrix::from_fn(2, hidden, |_, _| u(a2));
        let b2 = DVector::from_fn(2, |_, _| u(a2));
        ShallowNet { w1, b1, w2, b2, normalization: Normalization::default() }
    }

    pub fn n_inputs(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Hidden activations and output probabilities for a batch of
    /// already-normalized inputs stored one sample per column.
    fn forward(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = &self.w1 * x;
        for mut col in a.column_iter_mut() {
            for (v, b) in col.iter_mut().zip(self.b1.iter()) {
                *v = sigmoid(*v + b);
            }
        }
        let mut p = &self.w2 * &a;
        for mut col in p.column_iter_mut() {
            let z0 = col[0] + self.b2[0];
            let z1 = col[1] + self.b2[1];
            let m = z0.max(z1);
            let e0 = (z0 - m).exp();
            let e1 = (z1 - m).exp();
            col[0] = e0 / (e0 + e1);
            col[1] = e1 / (e0 + e1);
        }
        (a, p)
    }

    /// Output probabilities `(p_dark, p_bright)` for normalized inputs.
    pub fn probabilities(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n_inputs() {
            return Err(Error::LengthMismatch { expected: self.n_inputs(), actual: x.nrows() });
        }
        Ok(self.forward(x).1)
    }

    /// Mean cross-entropy over the columns of `x`.
    pub fn loss(&self, x: &DMatrix<f64>, targets: &[usize]) -> f64 {
        let (_, p) = self.forward(x);
        cross_entropy(&p, targets)
    }

    /// Mean cross-entropy and its analytic gradient.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, targets: &[usize]) -> (f64, Gradient) {
        let b = x.ncols() as f64;
        let (a, p) = self.forward(x);
        let loss = cross_entropy(&p, targets);

        let mut dz2 = p;
        for (j, &t) in targets.iter().enumerate() {
            dz2[(t, j)] -= 1.0;
        }
        dz2 /= b;
        let w2 = &dz2 * a.transpose();
        let b2 = dz2.column_sum();
        let mut dz1 = self.w2.transpose() * &dz2;
        dz1.zip_apply(&a, |d, s| *d *= s * (1.0 - s));
        let w1 = &dz1 * x.transpose();
        let b1 = dz1.column_sum();
        (loss, Gradient { w1, b1, w2, b2 })
    }

    /// Normalized cumulative-sum features of one trace.
    pub fn features(&self, trace: &[u16]) -> Result<DVector<f64>> {
        if trace.len() != self.n_inputs() {
            return Err(Error::LengthMismatch { expected: self.n_inputs(), actual: trace.len() });
        }
        Ok(DVector::from_vec(self.normalization.apply(trace)))
    }

    pub fn predict(&self, trace: &[u16]) -> Result<Prediction> {
        let x = self.features(trace)?;
        let p = self.forward(&DMatrix::from_column_slice(x.len(), 1, x.as_slice())).1;
        Ok(Prediction::from_probabilities(p[(DARK_OUTPUT, 0)], p[(BRIGHT_OUTPUT, 0)]))
    }

    pub fn predict_batch(&self, traces: &[&[u16]]) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(traces.len());
        for chunk in traces.chunks(512) {
            let x = feature_matrix(chunk, self.n_inputs(), &self.normalization)?;
            let p = self.forward(&x).1;
            out.extend(
                p.column_iter().map(|c| Prediction::from_probabilities(c[DARK_OUTPUT], c[BRIGHT_OUTPUT])),
            );
        }
        Ok(out)
    }

    fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w1.as_mut_slice(), self.b1.as_mut_slice(), self.w2.as_mut_slice(), self.b2.as_mut_slice()]
    }
}

impl Gradient {
    fn slices(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), self.b1.as_slice(), self.w2.as_slice(), self.b2.as_slice()]
    }
}

fn cross_entropy(p: &DMatrix<f64>, targets: &[usize]) -> f64 {
    let n = targets.len().max(1) as f64;
    -targets.iter().enumerate().map(|(j, &t)| p[(t, j)].max(1e-300).ln()).sum::<f64>() / n
}

/// Feature matrix with one normalized cumsum column per trace.
pub fn feature_matrix(traces: &[&[u16]], n_inputs: usize, norm: &Normalization) -> Result<DMatrix<f64>> {
    let mut x = DMatrix::zeros(n_inputs, traces.len());
    let inv = 1.0 / norm.scale;
    for (j, trace) in traces.iter().enumerate() {
        if trace.len() != n_inputs {
            return Err(Error::LengthMismatch { expected: n_inputs, actual: trace.len() });
        }
        let mut acc = 0.0;
        for (i, &c) in trace.iter().enumerate() {
            acc += c as f64;
            x[(i, j)] = acc * inv;
        }
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub val_fraction: f64,
    pub stratified: bool,
    pub patience: usize,
    pub max_epochs: usize,
    /// Samples per Adam step; the whole training split is used when it is smaller.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Overrides the width rule when set.
    pub hidden: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            val_fraction: 0.15,
            stratified: true,
            patience: 6,
            max_epochs: 300,
            batch_size: 64,
            learning_rate: 2e-3,
            hidden: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.val_fraction && self.val_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("val_fraction must be in (0,1), got {}", self.val_fraction)));
        }
        if self.patience == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("patience, max_epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.hidden == Some(0) {
            return Err(Error::InvalidParameter("hidden width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were restored.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub n_train: usize,
    pub n_val: usize,
}

/// Splits indices into (train, validation). The stratified split draws the
/// validation share from each class separately.
pub fn split_indices(classes: &[Class], val_fraction: f64, stratified: bool, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let groups: Vec<Vec<usize>> = if stratified {
        [Class::Dark, Class::Bright]
            .iter()
            .map(|&c| (0..classes.len()).filter(|&i| classes[i] == c).collect())
            .collect()
    } else {
        vec![(0..classes.len()).collect()]
    };
    for mut g in groups {
        g.shuffle(rng);
        let k = ((g.len() as f64) * val_fraction).round() as usize;
        val.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &mut ShallowNet, lr: f64) -> Self {
        let sizes: Vec<usize> = net.params_mut().iter().map(|s| s.len()).collect();
        Adam {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, net: &mut ShallowNet, grad: &Gradient) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        for (k, (p, g)) in net.params_mut().into_iter().zip(grad.slices()).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= step * m[i] / (v[i].sqrt() + Self::EPS);
            }
        }
    }
}

fn gather_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.column_mut(j).copy_from(&x.column(i));
    }
    out
}

fn accuracy(p: &DMatrix<f64>, targets: &[usize]) -> f64 {
    let correct = p
        .column_iter()
        .zip(targets)
        .filter(|(c, &t)| {
            let predicted = if c[BRIGHT_OUTPUT] > c[DARK_OUTPUT] { BRIGHT_OUTPUT } else { DARK_OUTPUT };
            predicted == t
        })
        .count();
    correct as f64 / targets.len().max(1) as f64
}

/// Trains a network on labeled traces of equal length.
pub fn train_shallow_net(traces: &[&Trajectory], config: &TrainConfig) -> Result<(ShallowNet, TrainingLog)> {
    config.validate()?;
    let n_inputs = traces.first().map(|t| t.counts.len()).ok_or(Error::MissingClass)?;
    let classes: Vec<Class> = traces.iter().map(|t| t.label.class()).collect();
    if !classes.contains(&Class::Dark) || !classes.contains(&Class::Bright) {
        return Err(Error::MissingClass);
    }
    if n_inputs == 0 {
        return Err(Error::InvalidParameter("traces must be nonempty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train_idx, val_idx) = split_indices(&classes, config.val_fraction, config.stratified, &mut rng);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::InvalidParameter("too few traces for a train/validation split".into()));
    }

    let train_traces: Vec<&Trajectory> = train_idx.iter().map(|&i| traces[i]).collect();
    let normalization = Normalization::fit(&train_traces);
    let counts: Vec<&[u16]> = traces.iter().map(|t| t.counts.as_slice()).collect();
    let mut x_all = feature_matrix(&counts, n_inputs, &normalization)?;
    // Optimization runs on inputs centered at the training mean, which removes
    // the common mode shared by all cumulative sums. The mean is folded back
    // into the hidden bias afterwards, so the stored net sees raw features.
    let mean = gather_columns(&x_all, &train_idx).column_mean();
    for mut col in x_all.column_iter_mut() {
        col -= &mean;
    }
    let targets: Vec<usize> = classes.iter().map(|&c| class_index(c)).collect();

    let x_val = gather_columns(&x_all, &val_idx);
    let t_val: Vec<usize> = val_idx.iter().map(|&i| targets[i]).collect();

    let hidden = config.hidden.unwrap_or_else(|| hidden_width(n_inputs));
    let mut net = ShallowNet::random(n_inputs, hidden, &mut rng);
    net.normalization = normalization;
    let mut adam = Adam::new(&mut net, config.learning_rate);

    let mut best = net.clone();
    let mut best_val = net.loss(&x_val, &t_val);
    let mut best_epoch = 0;
    let mut epochs = Vec::new();
    let mut order = train_idx.clone();
    let batch = config.batch_size.min(order.len());

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let xb = gather_columns(&x_all, chunk);
            let tb: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&xb, &tb);
            loss_sum += loss * chunk.len() as f64;
            adam.step(&mut net, &grad);
        }
        let (_, p_val) = net.forward(&x_val);
        let val_loss = cross_entropy(&p_val, &t_val);
        epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_loss,
            val_accuracy: accuracy(&p_val, &t_val),
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best = net.clone();
        } else if epoch - best_epoch >= config.patience {
            break;
        }
    }

    best.b1 -= &best.w1 * &mean;
    let log = TrainingLog { epochs, best_epoch, best_val_loss: best_val, n_train: train_idx.len(), n_val: val_idx.len() };
    Ok((best, log))
}

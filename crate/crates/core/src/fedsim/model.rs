//! Multinomial logistic regression on flat weight vectors, with the
//! minibatch SGD local trainer.

use rand::seq::SliceRandom;
use rand::Rng;
use std::io::{Read, Write};
use std::path::Path;

use super::data::Dataset;
use crate::error::{Error, Result};

/// Flat model weights: classes x (features + bias), row-major per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    pub weights: Vec<f64>,
    pub classes: usize,
    pub features: usize,
}

impl ModelVector {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self { weights: vec![0.0; classes * (features + 1)], classes, features }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        let stride = self.features + 1;
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * stride..(c + 1) * stride];
                row[..self.features].iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
                    + row[self.features]
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        z.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
    }

    /// Writes the little-endian binary dump: u64 dim header then the
    /// weights (classes and features follow the header for reload).
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.dim() as u64).to_le_bytes())?;
        out.write_all(&(self.classes as u64).to_le_bytes())?;
        out.write_all(&(self.features as u64).to_le_bytes())?;
        for w in &self.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut u64buf = [0u8; 8];
        let mut next_u64 = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let dim = next_u64(&mut input)? as usize;
        let classes = next_u64(&mut input)? as usize;
        let features = next_u64(&mut input)? as usize;
        if dim != classes * (features + 1) {
            return Err(Error::DimensionMismatch { expected: classes * (features + 1), got: dim });
        }
        let mut weights = Vec::with_capacity(dim);
        let mut buf = [0u8; 8];
        for _ in 0..dim {
            input.read_exact(&mut buf)?;
            weights.push(f64::from_le_bytes(buf));
        }
        Ok(Self { weights, classes, features })
    }

    pub fn write_binary_path(&self, path: &Path) -> Result<()> {
        self.write_binary(std::fs::File::create(path)?)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy over a dataset plus ridge/2 * ||w||^2.
pub fn loss(model: &ModelVector, data: &Dataset, ridge: f64) -> f64 {
    let mut total = 0.0;
    for (x, &y) in data.xs.iter().zip(&data.ys) {
        let z = model.logits(x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + m;
        total += log_sum - z[y];
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum::<f64>();
    total / data.len() as f64 + 0.5 * ridge * reg
}

/// Classification accuracy on a dataset.
pub fn accuracy(model: &ModelVector, data: &Dataset) -> f64 {
    let hits =
        data.xs.iter().zip(&data.ys).filter(|(x, &y)| model.predict(x) == y).count();
    hits as f64 / data.len() as f64
}

/// Adds the minibatch gradient (mean over `idx`) into a step on `model`.
fn sgd_step(model: &mut ModelVector, data: &Dataset, idx: &[usize], lr: f64, ridge: f64) {
    let stride = model.features + 1;
    let mut grad = vec![0.0; model.weights.len()];
    for &i in idx {
        let x = &data.xs[i];
        let y = data.ys[i];
        let p = softmax(&model.logits(x));
        for c in 0..model.classes {
            let err = p[c] - if c == y { 1.0 } else { 0.0 };
            let row = &mut grad[c * stride..(c + 1) * stride];
            for (g, &xf) in row[..model.features].iter_mut().zip(x) {
                *g += err * xf;
            }
            row[model.features] += err;
        }
    }
    let scale = 1.0 / idx.len() as f64;
    for (w, g) in model.weights.iter_mut().zip(&grad) {
        *w -= lr * (g * scale + ridge * *w);
    }
}

/// Runs `epochs` full passes of minibatch SGD with cross-entropy loss.
/// Shuffling comes from the supplied stream, so runs are reproducible.
pub fn local_train<R: Rng + ?Sized>(
    model: &ModelVector,
    data: &Dataset,
    epochs: usize,
    lr: f64,
    batch: usize,
    ridge: f64,
    rng: &mut R,
) -> ModelVector {
    assert!(!data.is_empty(), "local training needs a nonempty dataset");
    let mut m = model.clone();
    let batch = batch.max(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            sgd_step(&mut m, data, chunk, lr, ridge);
        }
    }
    m
}

/// Full-batch gradient descent to near-optimum, for heterogeneity
/// estimation on convex instances.
pub fn train_to_optimum(
    classes: usize,
    features: usize,
    eval: &dyn Fn(&ModelVector) -> f64,
    datasets: &[(&Dataset, f64)],
    ridge: f64,
    iters: usize,
    lr: f64,
) -> (ModelVector, f64) {
    let mut m = ModelVector::zeros(classes, features);
    let total_weight: f64 = datasets.iter().map(|(_, w)| w).sum();
    for _ in 0..iters {
        let stride = features + 1;
        let mut grad = vec![0.0; m.weights.len()];
        for (ds, w) in datasets {
            let per = w / (ds.len() as f64 * total_weight);
            for (x, &y) in ds.xs.iter().zip(&ds.ys) {
                let p = softmax(&m.logits(x));
                for c in 0..classes {
                    let err = (p[c] - if c == y { 1.0 } else { 0.0 }) * per;
                    let row = &mut grad[c * stride..(c + 1) * stride];
                    for (g, &xf) in row[..features].iter_mut().zip(x) {
                        *g += err * xf;
                    }
                    row[features] += err;
                }
            }
        }
        for (wt, g) in m.weights.iter_mut().zip(&grad) {
            *wt -= lr * (g + ridge * *wt);
        }
    }
    let v = eval(&m);
    (m, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn tiny_dataset() -> Dataset {
        Dataset { xs: vec![vec![1.0, 2.0]], ys: vec![0] }
    }

    #[test]
    fn zero_lr_leaves_model_unchanged() {
        let m = ModelVector::zeros(3, 2);
        let data = tiny_dataset();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let out = local_train(&m, &data, 3, 0.0, 4, 0.0, &mut rng);
        assert_eq!(out, m);
    }

    #[test]
    fn single_step_matches_hand_gradient() {
        // Two classes, one feature, zero init: softmax is (1/2, 1/2).
        // Sample (x=2, y=0): grad_w0 = (p0-1)*x = -1, grad_b0 = -0.5,
        // grad_w1 = +1, grad_b1 = +0.5. With lr=0.1:
        let m = ModelVector::zeros(2, 1);
        let data = Dataset { xs: vec![vec![2.0]], ys: vec![0] };
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let out = local_train(&m, &data, 1, 0.1, 1, 0.0, &mut rng);
        let expect = [0.1, 0.05, -0.1, -0.05];
        for (w, e) in out.weights.iter().zip(expect) {
            assert!((w - e).abs() < 1e-12, "{w} vs {e}");
        }
    }

    #[test]
    fn training_reduces_convex_loss() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut data = Dataset::default();
        for i in 0..60 {
            let y = i % 3;
            let x: Vec<f64> = (0..4)
                .map(|f| if f == y { 2.0 } else { 0.0 } + rng.random::<f64>() - 0.5)
                .collect();
            data.xs.push(x);
            data.ys.push(y);
        }
        let m = ModelVector::zeros(3, 4);
        let before = loss(&m, &data, 1e-3);
        let trained = local_train(&m, &data, 3, 0.05, 8, 1e-3, &mut rng);
        let after = loss(&trained, &data, 1e-3);
        assert!(after < before, "{after} !< {before}");
        assert!(accuracy(&trained, &data) > 0.6);
    }

    #[test]
    fn binary_dump_round_trips() {
        let mut m = ModelVector::zeros(2, 3);
        m.weights.iter_mut().enumerate().for_each(|(i, w)| *w = i as f64 * 0.25 - 1.0);
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 3 * 8 + m.dim() * 8);
        // dim header is little-endian.
        assert_eq!(u64::from_le_bytes(buf[..8].try_into().unwrap()), m.dim() as u64);
        let back = ModelVector::read_binary(&buf[..]).unwrap();
        assert_eq!(back, m);
    }
}

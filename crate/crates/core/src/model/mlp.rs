//! One-hidden-layer ReLU MLP with softmax cross-entropy, trained by plain SGD.
//!
//! Parameter layout: `w1` is `hidden x input` row-major, `b1` has `hidden`
//! entries, `w2` is `classes x hidden` row-major, `b2` has `classes` entries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Architecture, Layer, LabeledSample, ModelError, ModelParams};

struct Dims {
    input: usize,
    hidden: usize,
    classes: usize,
}

fn dims(model: &ModelParams) -> Result<Dims, ModelError> {
    let layers = model.layers();
    if layers.len() != 4 {
        return Err(ModelError::Shape(format!("expected 4 layers, found {}", layers.len())));
    }
    let hidden = layers[1].values.len();
    let classes = layers[3].values.len();
    if hidden == 0 || layers[0].values.len() % hidden != 0 {
        return Err(ModelError::Shape("w1 is not a multiple of b1".into()));
    }
    let input = layers[0].values.len() / hidden;
    let arch = Architecture::mlp(input, hidden, classes);
    arch.check(model)?;
    Ok(Dims {
        input,
        hidden,
        classes,
    })
}

fn check_sample(d: &Dims, s: &LabeledSample) -> Result<(), ModelError> {
    if s.features.len() != d.input {
        return Err(ModelError::FeatureDim {
            expected: d.input,
            actual: s.features.len(),
        });
    }
    if s.label >= d.classes {
        return Err(ModelError::LabelOutOfRange {
            label: s.label,
            classes: d.classes,
        });
    }
    Ok(())
}

/// Seeded initialization: uniform He-style bounds for weights, zero biases.
pub fn init_model(descriptor: &str, seed: u64) -> Result<ModelParams, ModelError> {
    let arch = Architecture::parse(descriptor)?;
    let Architecture::Mlp {
        input,
        hidden,
        classes,
    } = arch;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |n: usize, bound: f64| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-bound..bound)).collect()
    };
    let w1 = uniform(hidden * input, (6.0 / input as f64).sqrt());
    let w2 = uniform(classes * hidden, (6.0 / (hidden + classes) as f64).sqrt());
    ModelParams::for_architecture(&arch, vec![w1, vec![0.0; hidden], w2, vec![0.0; classes]])
}

struct Forward {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

fn forward(d: &Dims, l: &[Layer], x: &[f64]) -> Forward {
    let (w1, b1, w2, b2) = (&l[0].values, &l[1].values, &l[2].values, &l[3].values);
    let mut pre = b1.clone();
    for (j, p) in pre.iter_mut().enumerate() {
        let row = &w1[j * d.input..(j + 1) * d.input];
        *p += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
    let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
    let mut logits = b2.clone();
    for (k, z) in logits.iter_mut().enumerate() {
        let row = &w2[k * d.hidden..(k + 1) * d.hidden];
        *z += row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
    }
    Forward { pre, hidden, logits }
}

/// Numerically stable softmax in place; returns log of the normalizer.
fn softmax(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over the batch.
pub fn loss(model: &ModelParams, batch: &[LabeledSample]) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let d = dims(model)?;
    let mut total = 0.0;
    for s in batch {
        check_sample(&d, s)?;
        let f = forward(&d, model.layers(), &s.features);
        let mut z = f.logits.clone();
        let log_norm = softmax(&mut z);
        total += log_norm - f.logits[s.label];
    }
    Ok(total / batch.len() as f64)
}

/// Mean cross-entropy and its gradient, shaped like the model.
pub fn loss_and_gradient(
    model: &ModelParams,
    batch: &[LabeledSample],
) -> Result<(f64, ModelParams), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let d = dims(model)?;
    let l = model.layers();
    let w2 = &l[2].values;
    let mut gw1 = vec![0.0; d.hidden * d.input];
    let mut gb1 = vec![0.0; d.hidden];
    let mut gw2 = vec![0.0; d.classes * d.hidden];
    let mut gb2 = vec![0.0; d.classes];
    let mut total = 0.0;
    let mut dh = vec![0.0; d.hidden];

    for s in batch {
        check_sample(&d, s)?;
        let f = forward(&d, l, &s.features);
        let mut p = f.logits.clone();
        let log_norm = softmax(&mut p);
        total += log_norm - f.logits[s.label];
        p[s.label] -= 1.0;

        dh.iter_mut().for_each(|v| *v = 0.0);
        for (k, &dz) in p.iter().enumerate() {
            gb2[k] += dz;
            let row = k * d.hidden;
            for j in 0..d.hidden {
                gw2[row + j] += dz * f.hidden[j];
                dh[j] += w2[row + j] * dz;
            }
        }
        for j in 0..d.hidden {
            if f.pre[j] <= 0.0 {
                continue;
            }
            let g = dh[j];
            gb1[j] += g;
            let row = &mut gw1[j * d.input..(j + 1) * d.input];
            for (w, x) in row.iter_mut().zip(&s.features) {
                *w += g * x;
            }
        }
    }

    let scale = 1.0 / batch.len() as f64;
    let grads = [gw1, gb1, gw2, gb2];
    let layers = l
        .iter()
        .zip(grads)
        .map(|(layer, mut g)| {
            g.iter_mut().for_each(|v| *v *= scale);
            Layer {
                name: layer.name.clone(),
                values: g,
            }
        })
        .collect();
    let grad = ModelParams::new(*model.architecture_id(), layers)?;
    Ok((total * scale, grad))
}

/// One SGD step on mean cross-entropy.
pub fn train_step(
    model: &ModelParams,
    batch: &[LabeledSample],
    lr: f64,
) -> Result<ModelParams, ModelError> {
    let (_, grad) = loss_and_gradient(model, batch)?;
    let g = grad.layers();
    model.map_weights(|li, i, w| w - lr * g[li].values[i])
}

pub fn predict(model: &ModelParams, features: &[f64]) -> Result<usize, ModelError> {
    let d = dims(model)?;
    if features.len() != d.input {
        return Err(ModelError::FeatureDim {
            expected: d.input,
            actual: features.len(),
        });
    }
    Ok(argmax(&forward(&d, model.layers(), features).logits))
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn evaluate(model: &ModelParams, samples: &[LabeledSample]) -> Result<f64, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptySamples);
    }
    let d = dims(model)?;
    let mut correct = 0usize;
    for s in samples {
        check_sample(&d, s)?;
        if argmax(&forward(&d, model.layers(), &s.features).logits) == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

//! Forward and backward passes.
//!
//! Activations are stored batch-major and row-major in `T`; every dot
//! product and reduction accumulates in `f64`.

use super::params::{real, wide, ModelParams, Real};
use super::spec::{LayerSpec, ModelSpec};
use crate::error::{Error, Result};

/// A borrowed mini-batch: `labels.len()` samples laid out contiguously.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a, T> {
    pub inputs: &'a [T],
    pub labels: &'a [u32],
}

impl<'a, T> Batch<'a, T> {
    pub fn new(inputs: &'a [T], labels: &'a [u32]) -> Self {
        Batch { inputs, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Everything `backward` needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    /// Input to each layer, in spec order.
    inputs: Vec<Vec<T>>,
    labels: Vec<u32>,
    /// Softmax probabilities, one row per sample.
    probs: Vec<f64>,
    params_hash: u64,
    spec_fingerprint: u64,
}

#[derive(Clone, Debug)]
pub struct Forward<T> {
    pub logits: Vec<T>,
    /// Mean softmax cross-entropy over the batch.
    pub loss: f64,
    pub cache: ForwardCache<T>,
}

fn check_batch<T: Real>(spec: &ModelSpec, batch: &Batch<'_, T>) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let expected = batch.len() * spec.input_len();
    if batch.inputs.len() != expected {
        return Err(Error::Shape(format!(
            "batch of {} samples with shape {:?} needs {expected} values, got {}",
            batch.len(),
            spec.input_shape,
            batch.inputs.len()
        )));
    }
    if batch.inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("batch input".into()));
    }
    if let Some(&bad) = batch.labels.iter().find(|&&l| l as usize >= spec.classes) {
        return Err(Error::Shape(format!(
            "label {bad} out of range for {} classes",
            spec.classes
        )));
    }
    Ok(())
}

/// Runs every layer before the loss head and returns the per-layer inputs
/// plus the logits.
fn run_layers<T: Real>(
    params: &ModelParams<T>,
    spec: &ModelSpec,
    shapes: &[Vec<usize>],
    inputs: &[T],
    batch: usize,
    keep: bool,
) -> (Vec<Vec<T>>, Vec<T>) {
    let mut kept = Vec::new();
    let mut x = inputs.to_vec();
    for (idx, layer) in spec.layers.iter().enumerate() {
        if matches!(layer, LayerSpec::SoftmaxCrossEntropy) {
            break;
        }
        let y = match *layer {
            LayerSpec::Dense { inputs, outputs } => dense_forward(
                &x,
                params.weight(idx),
                params.bias(idx),
                batch,
                inputs,
                outputs,
            ),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                padding,
            } => {
                let geom = ConvGeom::new(&shapes[idx], in_channels, out_channels, kernel, padding);
                conv_forward(&x, params.weight(idx), params.bias(idx), batch, &geom)
            }
            LayerSpec::Relu => x.iter().map(|&v| v.max(T::zero())).collect(),
            LayerSpec::Flatten => x.clone(),
            LayerSpec::SoftmaxCrossEntropy => unreachable!(),
        };
        if keep {
            kept.push(std::mem::replace(&mut x, y));
        } else {
            x = y;
        }
    }
    (kept, x)
}

/// Forward pass with mean softmax cross-entropy loss.
pub fn forward<T: Real>(
    params: &ModelParams<T>,
    spec: &ModelSpec,
    batch: Batch<'_, T>,
) -> Result<Forward<T>> {
    let shapes = spec.shapes()?;
    check_batch(spec, &batch)?;
    if params.len() != params.layout().len() || params.layout().num_layers() != spec.layers.len() {
        return Err(Error::Shape("parameters do not belong to this spec".into()));
    }
    let n = batch.len();
    let (mut inputs, logits) = run_layers(params, spec, &shapes, batch.inputs, n, true);

    let classes = spec.classes;
    let mut probs = vec![0.0f64; n * classes];
    let mut total = 0.0f64;
    for (s, (row, p)) in logits
        .chunks_exact(classes)
        .zip(probs.chunks_exact_mut(classes))
        .enumerate()
    {
        let max = row.iter().map(|&z| wide(z)).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (pj, &z) in p.iter_mut().zip(row) {
            *pj = (wide(z) - max).exp();
            sum += *pj;
        }
        p.iter_mut().for_each(|pj| *pj /= sum);
        let lse = max + sum.ln();
        total += lse - wide(row[batch.labels[s] as usize]);
    }
    let loss = total / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss = {loss}")));
    }
    // Head input is the logits themselves.
    inputs.push(logits.clone());
    Ok(Forward {
        logits,
        loss,
        cache: ForwardCache {
            inputs,
            labels: batch.labels.to_vec(),
            probs,
            params_hash: params.content_hash(),
            spec_fingerprint: spec.fingerprint(),
        },
    })
}

/// Gradient of the mean loss with respect to every parameter.
pub fn backward<T: Real>(
    params: &ModelParams<T>,
    spec: &ModelSpec,
    cache: &ForwardCache<T>,
) -> Result<ModelParams<T>> {
    if cache.spec_fingerprint != spec.fingerprint() {
        return Err(Error::StaleCache("cache was produced for a different spec".into()));
    }
    if cache.params_hash != params.content_hash() {
        return Err(Error::StaleCache(
            "parameters changed since the forward pass".into(),
        ));
    }
    let shapes = spec.shapes()?;
    let n = cache.labels.len();
    let classes = spec.classes;

    // d(mean CE)/d(logits) = (softmax - onehot) / n
    let mut delta: Vec<T> = cache
        .probs
        .chunks_exact(classes)
        .zip(&cache.labels)
        .flat_map(|(p, &label)| {
            p.iter().enumerate().map(move |(j, &pj)| {
                let target = if j == label as usize { 1.0 } else { 0.0 };
                real::<T>((pj - target) / n as f64)
            })
        })
        .collect();

    let mut grad = params.zeros_like();
    let head = spec.layers.len() - 1;
    for idx in (0..head).rev() {
        let x = &cache.inputs[idx];
        delta = match spec.layers[idx] {
            LayerSpec::Dense { inputs, outputs } => {
                let (dw, db, dx) = dense_backward(x, params.weight(idx), &delta, n, inputs, outputs);
                grad.weight_mut(idx).copy_from_slice(&dw);
                grad.bias_mut(idx).copy_from_slice(&db);
                dx
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                padding,
            } => {
                let geom = ConvGeom::new(&shapes[idx], in_channels, out_channels, kernel, padding);
                let (dw, db, dx) = conv_backward(x, params.weight(idx), &delta, n, &geom);
                grad.weight_mut(idx).copy_from_slice(&dw);
                grad.bias_mut(idx).copy_from_slice(&db);
                dx
            }
            LayerSpec::Relu => x
                .iter()
                .zip(&delta)
                .map(|(&xi, &d)| if xi > T::zero() { d } else { T::zero() })
                .collect(),
            LayerSpec::Flatten => delta,
            LayerSpec::SoftmaxCrossEntropy => unreachable!("head is last"),
        };
    }
    Ok(grad)
}

/// Logits for `n` samples without keeping intermediate activations.
pub fn predict<T: Real>(
    params: &ModelParams<T>,
    spec: &ModelSpec,
    inputs: &[T],
    n: usize,
) -> Result<Vec<T>> {
    let shapes = spec.shapes()?;
    if inputs.len() != n * spec.input_len() {
        return Err(Error::Shape(format!(
            "{} values for {n} samples of shape {:?}",
            inputs.len(),
            spec.input_shape
        )));
    }
    Ok(run_layers(params, spec, &shapes, inputs, n, false).1)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

fn dense_forward<T: Real>(
    x: &[T],
    w: &[T],
    b: &[T],
    n: usize,
    inputs: usize,
    outputs: usize,
) -> Vec<T> {
    let mut y = Vec::with_capacity(n * outputs);
    let mut acc = vec![0.0f64; outputs];
    for row in x.chunks_exact(inputs).take(n) {
        for (a, &bo) in acc.iter_mut().zip(b) {
            *a = wide(bo);
        }
        for (&xi, w_row) in row.iter().zip(w.chunks_exact(outputs)) {
            let xi = wide(xi);
            if xi == 0.0 {
                continue;
            }
            for (a, &wio) in acc.iter_mut().zip(w_row) {
                *a += xi * wide(wio);
            }
        }
        y.extend(acc.iter().map(|&a| real::<T>(a)));
    }
    y
}

fn dense_backward<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    n: usize,
    inputs: usize,
    outputs: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut dw = vec![0.0f64; inputs * outputs];
    let mut db = vec![0.0f64; outputs];
    let mut dx = Vec::with_capacity(n * inputs);
    for (row, dy_row) in x.chunks_exact(inputs).zip(dy.chunks_exact(outputs)) {
        for (acc, &d) in db.iter_mut().zip(dy_row) {
            *acc += wide(d);
        }
        for (i, &xi) in row.iter().enumerate() {
            let xi = wide(xi);
            let w_row = &w[i * outputs..(i + 1) * outputs];
            let mut dxi = 0.0f64;
            for ((acc, &d), &wio) in dw[i * outputs..(i + 1) * outputs]
                .iter_mut()
                .zip(dy_row)
                .zip(w_row)
            {
                let d = wide(d);
                *acc += xi * d;
                dxi += wide(wio) * d;
            }
            dx.push(real(dxi));
        }
    }
    (
        dw.into_iter().map(real).collect(),
        db.into_iter().map(real).collect(),
        dx,
    )
}

struct ConvGeom {
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    out_h: usize,
    out_w: usize,
    kernel: usize,
    padding: usize,
}

impl ConvGeom {
    fn new(shape: &[usize], in_c: usize, out_c: usize, kernel: usize, padding: usize) -> Self {
        let (in_h, in_w) = (shape[1], shape[2]);
        ConvGeom {
            in_c,
            in_h,
            in_w,
            out_c,
            out_h: in_h + 2 * padding - kernel + 1,
            out_w: in_w + 2 * padding - kernel + 1,
            kernel,
            padding,
        }
    }

    fn in_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    fn out_len(&self) -> usize {
        self.out_c * self.out_h * self.out_w
    }

    /// Input coordinate read by output (oy, ox) at kernel offset (ky, kx),
    /// or `None` when it falls in the zero padding.
    #[inline]
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy + ky).checked_sub(self.padding)?;
        let ix = (ox + kx).checked_sub(self.padding)?;
        (iy < self.in_h && ix < self.in_w).then_some((iy, ix))
    }
}

fn conv_forward<T: Real>(x: &[T], w: &[T], b: &[T], n: usize, g: &ConvGeom) -> Vec<T> {
    let k = g.kernel;
    let mut y = Vec::with_capacity(n * g.out_len());
    for sample in x.chunks_exact(g.in_len()).take(n) {
        for oc in 0..g.out_c {
            for oy in 0..g.out_h {
                for ox in 0..g.out_w {
                    let mut acc = wide(b[oc]);
                    for ic in 0..g.in_c {
                        for ky in 0..k {
                            for kx in 0..k {
                                if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                                    let xv = sample[(ic * g.in_h + iy) * g.in_w + ix];
                                    let wv = w[((oc * g.in_c + ic) * k + ky) * k + kx];
                                    acc += wide(xv) * wide(wv);
                                }
                            }
                        }
                    }
                    y.push(real(acc));
                }
            }
        }
    }
    y
}

fn conv_backward<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    n: usize,
    g: &ConvGeom,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let k = g.kernel;
    let mut dw = vec![0.0f64; w.len()];
    let mut db = vec![0.0f64; g.out_c];
    let mut dx = vec![0.0f64; n * g.in_len()];
    for s in 0..n {
        let sample = &x[s * g.in_len()..(s + 1) * g.in_len()];
        let dsample = &mut dx[s * g.in_len()..(s + 1) * g.in_len()];
        let dys = &dy[s * g.out_len()..(s + 1) * g.out_len()];
        for oc in 0..g.out_c {
            for oy in 0..g.out_h {
                for ox in 0..g.out_w {
                    let d = wide(dys[(oc * g.out_h + oy) * g.out_w + ox]);
                    db[oc] += d;
                    for ic in 0..g.in_c {
                        for ky in 0..k {
                            for kx in 0..k {
                                if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                                    let xi = (ic * g.in_h + iy) * g.in_w + ix;
                                    let wi = ((oc * g.in_c + ic) * k + ky) * k + kx;
                                    dw[wi] += wide(sample[xi]) * d;
                                    dsample[xi] += wide(w[wi]) * d;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (
        dw.into_iter().map(real).collect(),
        db.into_iter().map(real).collect(),
        dx.into_iter().map(real).collect(),
    )
}

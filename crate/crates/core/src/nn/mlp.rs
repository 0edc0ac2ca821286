use super::real::Real;
use super::sparse::SparseRows;
use super::NnError;

/// Fully connected layer with `weights` of shape `(inputs, outputs)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::ZERO; inputs * outputs],
            bias: vec![T::ZERO; outputs],
        }
    }

    /// Layer with the given kernel values and zero biases.
    pub fn from_weights(inputs: usize, outputs: usize, weights: Vec<T>) -> Result<Self, NnError> {
        if weights.len() != inputs * outputs {
            return Err(NnError::ShapeMismatch(format!(
                "kernel has {} values, expected {inputs}x{outputs}",
                weights.len()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias: vec![T::ZERO; outputs],
        })
    }
}

/// Dense layers with ReLU between them and softmax on the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activations<T> {
    pub batch: usize,
    /// Post-ReLU outputs of each hidden layer, `batch x width`.
    pub hidden: Vec<Vec<T>>,
    /// Pre-softmax outputs, `batch x classes`.
    pub logits: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Mlp<T>) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![T::ZERO; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![T::ZERO; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.iter_mut().for_each(|x| *x = T::ZERO);
        }
    }
}

/// Reusable buffers for one mini-batch step.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    pub activations: Activations<T>,
    pub gradients: Gradients<T>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new(model: &Mlp<T>) -> Self {
        Self {
            activations: Activations {
                batch: 0,
                hidden: vec![Vec::new(); model.layers.len().saturating_sub(1)],
                logits: Vec::new(),
            },
            gradients: Gradients::zeros_like(model),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }
}

/// Row-wise softmax in f64.
pub fn softmax(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / total));
    }
    out
}

/// Mean cross-entropy of integer `labels` under row-wise softmax of `logits`,
/// via log-sum-exp.
pub fn cross_entropy(logits: &[f64], classes: usize, labels: &[u8]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.chunks_exact(classes).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        total += lse - row[y as usize];
    }
    total / labels.len() as f64
}

impl<T: Real> Mlp<T> {
    pub fn new(layers: Vec<Dense<T>>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::ShapeMismatch("a model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(NnError::ShapeMismatch(format!(
                    "layer of width {} feeds a layer expecting {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_batch(&self, x: &SparseRows<T>, rows: &[usize]) -> Result<(), NnError> {
        if x.cols() != self.input_dim() {
            return Err(NnError::ShapeMismatch(format!(
                "features have {} columns, model expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(NnError::ShapeMismatch(format!("row {bad} is out of range for {} rows", x.rows())));
        }
        Ok(())
    }

    /// Forward pass over the selected rows of `x`.
    pub fn forward(&self, x: &SparseRows<T>, rows: &[usize]) -> Result<Activations<T>, NnError> {
        let mut ws = Workspace::new(self);
        self.forward_into(x, rows, &mut ws.activations)?;
        Ok(ws.activations)
    }

    pub fn forward_into(&self, x: &SparseRows<T>, rows: &[usize], act: &mut Activations<T>) -> Result<(), NnError> {
        self.check_batch(x, rows)?;
        let batch = rows.len();
        act.batch = batch;
        let n_layers = self.layers.len();
        for (li, layer) in self.layers.iter().enumerate() {
            let width = layer.outputs;
            let mut out = if li + 1 == n_layers {
                std::mem::take(&mut act.logits)
            } else {
                std::mem::take(&mut act.hidden[li])
            };
            out.clear();
            for _ in 0..batch {
                out.extend_from_slice(&layer.bias);
            }
            if li == 0 {
                for (b, &r) in rows.iter().enumerate() {
                    let acc = &mut out[b * width..(b + 1) * width];
                    let (idx, val) = x.row(r);
                    for (&j, &v) in idx.iter().zip(val) {
                        let w = &layer.weights[j as usize * width..(j as usize + 1) * width];
                        for (a, &wk) in acc.iter_mut().zip(w) {
                            *a += v * wk;
                        }
                    }
                }
            } else {
                let input = &act.hidden[li - 1];
                dense_affine(input, &layer.weights, layer.inputs, width, &mut out);
            }
            if li + 1 < n_layers {
                out.iter_mut().for_each(|v| {
                    if *v < T::ZERO {
                        *v = T::ZERO
                    }
                });
                act.hidden[li] = out;
            } else {
                act.logits = out;
            }
        }
        Ok(())
    }

    /// Gradients of the mean cross-entropy over the batch, given the forward
    /// pass for the same rows. Returns the loss.
    pub fn backward(
        &self,
        x: &SparseRows<T>,
        rows: &[usize],
        labels: &[u8],
        ws: &mut Workspace<T>,
    ) -> Result<f64, NnError> {
        self.check_batch(x, rows)?;
        let batch = rows.len();
        if labels.len() != batch || ws.activations.batch != batch {
            return Err(NnError::ShapeMismatch(format!(
                "{} labels and {} activations for a batch of {batch}",
                labels.len(),
                ws.activations.batch
            )));
        }
        let classes = self.classes();
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
            return Err(NnError::ShapeMismatch(format!("label {bad} out of range for {classes} classes")));
        }
        let Workspace {
            activations: act,
            gradients: grads,
            delta,
            delta_prev,
        } = ws;
        grads.clear();

        // Softmax cross-entropy gradient w.r.t. logits, averaged over the batch.
        let inv_batch = 1.0 / batch as f64;
        let mut loss = 0.0;
        delta.clear();
        for (row, &y) in act.logits.chunks_exact(classes).zip(labels) {
            let max = row.iter().map(|z| z.to_f64()).fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|z| (z.to_f64() - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            loss += max + total.ln() - row[y as usize].to_f64();
            for (c, e) in exps.iter().enumerate() {
                let target = if c == y as usize { 1.0 } else { 0.0 };
                delta.push(T::from_f64((e / total - target) * inv_batch));
            }
        }
        loss *= inv_batch;

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let width = layer.outputs;
            let gb = &mut grads.bias[li];
            for row in delta.chunks_exact(width) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let gw = &mut grads.weights[li];
            if li == 0 {
                for (b, &r) in rows.iter().enumerate() {
                    let d = &delta[b * width..(b + 1) * width];
                    let (idx, val) = x.row(r);
                    for (&j, &v) in idx.iter().zip(val) {
                        let g = &mut gw[j as usize * width..(j as usize + 1) * width];
                        for (gk, &dk) in g.iter_mut().zip(d) {
                            *gk += v * dk;
                        }
                    }
                }
                break;
            }
            let input = &act.hidden[li - 1];
            let in_w = layer.inputs;
            for b in 0..batch {
                let d = &delta[b * width..(b + 1) * width];
                let h = &input[b * in_w..(b + 1) * in_w];
                for (i, &hi) in h.iter().enumerate() {
                    if hi == T::ZERO {
                        continue;
                    }
                    let g = &mut gw[i * width..(i + 1) * width];
                    for (gk, &dk) in g.iter_mut().zip(d) {
                        *gk += hi * dk;
                    }
                }
            }
            // Propagate through the kernel, then through the ReLU mask.
            delta_prev.clear();
            delta_prev.resize(batch * in_w, T::ZERO);
            for b in 0..batch {
                let d = &delta[b * width..(b + 1) * width];
                let h = &input[b * in_w..(b + 1) * in_w];
                let out = &mut delta_prev[b * in_w..(b + 1) * in_w];
                for i in 0..in_w {
                    if h[i] > T::ZERO {
                        let w = &layer.weights[i * width..(i + 1) * width];
                        out[i] = w.iter().zip(d).map(|(&wk, &dk)| wk * dk).sum();
                    }
                }
            }
            std::mem::swap(delta, delta_prev);
        }
        Ok(loss)
    }

    /// Predicted class per row (first maximum on ties).
    pub fn predict(&self, x: &SparseRows<T>, rows: &[usize]) -> Result<Vec<u8>, NnError> {
        let act = self.forward(x, rows)?;
        Ok(argmax_rows(&act.logits, self.classes()))
    }
}

fn dense_affine<T: Real>(input: &[T], weights: &[T], in_w: usize, out_w: usize, out: &mut [T]) {
    for (x, o) in input.chunks_exact(in_w).zip(out.chunks_exact_mut(out_w)) {
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::ZERO {
                continue;
            }
            let w = &weights[i * out_w..(i + 1) * out_w];
            for (ok, &wk) in o.iter_mut().zip(w) {
                *ok += xi * wk;
            }
        }
    }
}

pub fn argmax_rows<T: Real>(values: &[T], width: usize) -> Vec<u8> {
    values
        .chunks_exact(width)
        .map(|row| {
            let mut best = 0;
            for (c, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect()
}

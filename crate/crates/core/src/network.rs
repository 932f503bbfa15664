//! Two-branch MLP with hand-written backpropagation.
//!
//! ```text
//! x ─▶ [Dense ─ ReLU] × k ─▶ h ─┬─▶ reg_head  ─▶ O ─▶ activation ─▶ P (or |P|)
//!                              └─▶ sign_head ─▶ sign logits
//! ```
//!
//! With no activation (direct regression) `P = O`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::heads::{sign_xent_into, RegressionLoss, SphereKind};
use crate::numeric::{dot_slices, norm, DenseMatrix, DenseVector, Rng};
use crate::{Error, Result};

/// Fully connected layer `y = W·x + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weight: DenseMatrix,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::LengthMismatch {
                expected: weight.rows(),
                found: bias.len(),
            });
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { weight, bias })
    }

    /// Weights ~ Normal(0, √(2/fan_in)), zero biases.
    pub fn he_init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let std = libm::sqrt(2.0 / inputs as f64);
        let data = (0..inputs * outputs).map(|_| std * rng.normal()).collect();
        Self {
            weight: DenseMatrix::new(outputs, inputs, data).expect("finite init"),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.bias[r] + dot_slices(self.weight.row(r), x);
        }
    }

    /// Accumulates `scale·(g ⊗ x)` and `scale·g` into `grad`; writes `Wᵀ·g`
    /// into `dx` when given.
    fn backward_into(
        &self,
        x: &[f64],
        g: &[f64],
        scale: f64,
        grad: &mut LayerGrad,
        dx: Option<&mut [f64]>,
    ) {
        let cols = self.inputs();
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            let s = scale * gr;
            grad.bias[r] += s;
            let row = &mut grad.weight[r * cols..(r + 1) * cols];
            for (w, &xi) in row.iter_mut().zip(x) {
                *w += s * xi;
            }
        }
        if let Some(dx) = dx {
            dx.fill(0.0);
            for (r, &gr) in g.iter().enumerate() {
                if gr == 0.0 {
                    continue;
                }
                for (d, &w) in dx.iter_mut().zip(self.weight.row(r)) {
                    *d += gr * w;
                }
            }
        }
    }
}

/// Gradient buffers shaped like one [`DenseLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients for a whole [`MlpModel`], in layer order: trunk
/// layers, regression head, sign head.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<LayerGrad>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers()
                .map(|l| LayerGrad {
                    weight: vec![0.0; l.weight.as_slice().len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGrad] {
        &self.layers
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    /// All entries in [`MlpModel::parameters`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| *v == 0.0))
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Raw embedding from the regression head.
    pub o: DenseVector,
    /// `activation(O)`, or `O` itself for direct regression.
    pub p: DenseVector,
    pub logits: DenseVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutput {
    pub grads: Gradients,
    pub grad_o: DenseVector,
}

#[derive(Debug, Clone, Default)]
struct Cache {
    /// `acts[0]` is the input; `acts[k]` the post-ReLU output of trunk layer `k`.
    acts: Vec<Vec<f64>>,
    o: Vec<f64>,
    p: Vec<f64>,
    logits: Vec<f64>,
    valid: bool,
    // backward scratch
    g_o: Vec<f64>,
    dh: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    trunk: Vec<DenseLayer>,
    reg_head: DenseLayer,
    sign_head: DenseLayer,
    activation: Option<ActivationKind>,
    kind: SphereKind,
    cache: Cache,
}

impl PartialEq for MlpModel {
    fn eq(&self, other: &Self) -> bool {
        self.trunk == other.trunk
            && self.reg_head == other.reg_head
            && self.sign_head == other.sign_head
            && self.activation == other.activation
            && self.kind == other.kind
    }
}

impl MlpModel {
    /// He-initialized model: `input → hidden[0] → … → hidden[last]` with ReLU,
    /// then a `kind.dims()`-wide regression head and a
    /// `kind.sign_classes()`-wide sign head.
    pub fn new(
        input: usize,
        hidden: &[usize],
        kind: SphereKind,
        activation: Option<ActivationKind>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if input == 0 || hidden.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = input;
        for &h in hidden {
            trunk.push(DenseLayer::he_init(width, h, rng));
            width = h;
        }
        let reg_head = DenseLayer::he_init(width, kind.dims(), rng);
        let sign_head = DenseLayer::he_init(width, kind.sign_classes(), rng);
        Self::from_layers(trunk, reg_head, sign_head, kind, activation)
    }

    pub fn from_layers(
        trunk: Vec<DenseLayer>,
        reg_head: DenseLayer,
        sign_head: DenseLayer,
        kind: SphereKind,
        activation: Option<ActivationKind>,
    ) -> Result<Self> {
        for pair in trunk.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::LengthMismatch {
                    expected: pair[0].outputs(),
                    found: pair[1].inputs(),
                });
            }
        }
        let width = trunk.last().map_or(reg_head.inputs(), DenseLayer::outputs);
        for head in [&reg_head, &sign_head] {
            if head.inputs() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    found: head.inputs(),
                });
            }
        }
        if reg_head.outputs() != kind.dims() {
            return Err(Error::LengthMismatch {
                expected: kind.dims(),
                found: reg_head.outputs(),
            });
        }
        if sign_head.outputs() != kind.sign_classes() {
            return Err(Error::LengthMismatch {
                expected: kind.sign_classes(),
                found: sign_head.outputs(),
            });
        }
        let mut model = Self {
            trunk,
            reg_head,
            sign_head,
            activation,
            kind,
            cache: Cache::default(),
        };
        model.cache = model.fresh_cache();
        Ok(model)
    }

    fn fresh_cache(&self) -> Cache {
        let mut acts = vec![vec![0.0; self.input_dim()]];
        acts.extend(self.trunk.iter().map(|l| vec![0.0; l.outputs()]));
        let dh = acts.iter().map(|a| vec![0.0; a.len()]).collect();
        let dims = self.kind.dims();
        Cache {
            acts,
            o: vec![0.0; dims],
            p: vec![0.0; dims],
            logits: vec![0.0; self.kind.sign_classes()],
            valid: false,
            g_o: vec![0.0; dims],
            dh,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.first().unwrap_or(&self.reg_head).inputs()
    }

    pub fn kind(&self) -> SphereKind {
        self.kind
    }

    pub fn activation(&self) -> Option<ActivationKind> {
        self.activation
    }

    pub fn trunk(&self) -> &[DenseLayer] {
        &self.trunk
    }

    pub fn reg_head(&self) -> &DenseLayer {
        &self.reg_head
    }

    pub fn sign_head(&self) -> &DenseLayer {
        &self.sign_head
    }

    /// Trunk layers, then regression head, then sign head.
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.trunk
            .iter()
            .chain(core::iter::once(&self.reg_head))
            .chain(core::iter::once(&self.sign_head))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.trunk
            .iter_mut()
            .chain(core::iter::once(&mut self.reg_head))
            .chain(core::iter::once(&mut self.sign_head))
    }

    /// Layer names matching [`MlpModel::layers`] order.
    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.trunk.len()).map(|i| format!("trunk.{i}")).collect();
        names.push("reg_head".into());
        names.push("sign_head".into());
        names
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(DenseLayer::param_count).sum()
    }

    /// Flat parameter vector: per layer, row-major weights then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut rest = params;
        for l in self.layers_mut() {
            let (w, tail) = rest.split_at(l.weight.as_slice().len());
            l.weight.as_mut_slice().copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        self.cache.valid = false;
        Ok(())
    }

    fn forward_cached(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::LengthMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let c = &mut self.cache;
        c.valid = false;
        c.acts[0].copy_from_slice(x);
        for (k, layer) in self.trunk.iter().enumerate() {
            let (before, after) = c.acts.split_at_mut(k + 1);
            let out = &mut after[0];
            layer.forward_into(&before[k], out);
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        }
        let h = c.acts.last().expect("input is always cached");
        self.reg_head.forward_into(h, &mut c.o);
        self.sign_head.forward_into(h, &mut c.logits);
        match self.activation {
            Some(kind) => kind.forward_into(&c.o, &mut c.p)?,
            None => c.p.copy_from_slice(&c.o),
        }
        if c.p.iter().chain(&c.logits).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        c.valid = true;
        Ok(())
    }

    pub fn forward(&mut self, x: &DenseVector) -> Result<ForwardOutput> {
        self.forward_cached(x)?;
        Ok(ForwardOutput {
            o: DenseVector::new(self.cache.o.clone())?,
            p: DenseVector::new(self.cache.p.clone())?,
            logits: DenseVector::new(self.cache.logits.clone())?,
        })
    }

    /// Smallest `|pre-activation|` over all trunk units for input `x`;
    /// finite-difference checks near zero would straddle a ReLU kink.
    pub fn relu_margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::LengthMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut h = x.to_vec();
        let mut margin = f64::INFINITY;
        for layer in &self.trunk {
            let mut z = vec![0.0; layer.outputs()];
            layer.forward_into(&h, &mut z);
            margin = z.iter().fold(margin, |m, v| m.min(libm::fabs(*v)));
            h = z.into_iter().map(|v| v.max(0.0)).collect();
        }
        Ok(margin)
    }

    /// Forward pass without touching the training cache.
    pub fn predict(&self, x: &[f64]) -> Result<ForwardOutput> {
        let mut scratch = self.clone();
        scratch.forward(&DenseVector::from_slice(x)?)
    }

    /// Backpropagates `∂L/∂P` and `∂L/∂logits` from the last forward pass,
    /// adding `scale ×` the parameter gradients into `grads` and writing
    /// `∂L/∂O` into `grad_o`.
    fn backward_accumulate(
        &mut self,
        g_p: &[f64],
        g_logits: &[f64],
        scale: f64,
        grads: &mut Gradients,
        grad_o: &mut [f64],
    ) -> Result<()> {
        if !self.cache.valid {
            return Err(Error::BackwardBeforeForward);
        }
        let dims = self.kind.dims();
        if g_p.len() != dims {
            return Err(Error::LengthMismatch {
                expected: dims,
                found: g_p.len(),
            });
        }
        if g_logits.len() != self.kind.sign_classes() {
            return Err(Error::LengthMismatch {
                expected: self.kind.sign_classes(),
                found: g_logits.len(),
            });
        }
        let c = &mut self.cache;
        match self.activation {
            Some(kind) => kind.vjp_into(&c.o, &c.p, g_p, grad_o),
            None => grad_o.copy_from_slice(g_p),
        }
        c.g_o.copy_from_slice(grad_o);

        let n_trunk = self.trunk.len();
        let (head_grads, trunk_grads) = {
            let (t, h) = grads.layers.split_at_mut(n_trunk);
            (h, t)
        };
        let (reg_grad, sign_grad) = head_grads.split_at_mut(1);
        let h = &c.acts[n_trunk];
        let dh_last = &mut c.dh[n_trunk];
        self.reg_head
            .backward_into(h, &c.g_o, scale, &mut reg_grad[0], Some(dh_last));
        let mut tmp = vec![0.0; dh_last.len()];
        self.sign_head
            .backward_into(h, g_logits, scale, &mut sign_grad[0], Some(&mut tmp));
        for (d, t) in c.dh[n_trunk].iter_mut().zip(&tmp) {
            *d += t;
        }

        for k in (0..n_trunk).rev() {
            // ReLU mask from the cached post-activation output
            let (lower, upper) = c.dh.split_at_mut(k + 1);
            let dz = &mut upper[0];
            for (d, &a) in dz.iter_mut().zip(&c.acts[k + 1]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let dx = if k > 0 { Some(&mut lower[k][..]) } else { None };
            self.trunk[k].backward_into(&c.acts[k], dz, scale, &mut trunk_grads[k], dx);
        }
        Ok(())
    }

    pub fn backward(&mut self, g_p: &DenseVector, g_logits: &DenseVector) -> Result<BackwardOutput> {
        let mut grads = Gradients::zeros_like(self);
        let mut grad_o = vec![0.0; self.kind.dims()];
        self.backward_accumulate(g_p, g_logits, 1.0, &mut grads, &mut grad_o)?;
        Ok(BackwardOutput {
            grads,
            grad_o: DenseVector::new(grad_o)?,
        })
    }

    /// `θ ← θ − γ·g`; refuses non-finite gradients and reports the layer group
    /// that produced them.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be non-negative, got {lr}"
            )));
        }
        if grads.layers.len() != self.trunk.len() + 2 {
            return Err(Error::LengthMismatch {
                expected: self.trunk.len() + 2,
                found: grads.layers.len(),
            });
        }
        let n_trunk = self.trunk.len();
        for (i, g) in grads.layers.iter().enumerate() {
            if g.weight.iter().chain(&g.bias).any(|v| !v.is_finite()) {
                let head = match i {
                    i if i < n_trunk => "trunk",
                    i if i == n_trunk => "regression",
                    _ => "sign",
                };
                return Err(Error::NonFiniteGradient { head });
            }
        }
        for (layer, g) in self.layers_mut().zip(&grads.layers) {
            if layer.weight.as_slice().len() != g.weight.len() || layer.bias.len() != g.bias.len() {
                return Err(Error::LengthMismatch {
                    expected: layer.param_count(),
                    found: g.weight.len() + g.bias.len(),
                });
            }
            for (w, d) in layer.weight.as_mut_slice().iter_mut().zip(&g.weight) {
                *w -= lr * d;
            }
            for (b, d) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * d;
            }
        }
        self.cache.valid = false;
        Ok(())
    }

    /// Loss of one sample under `objective`.
    pub fn sample_loss(&mut self, sample: &Sample, objective: &Objective) -> Result<f64> {
        self.forward_cached(&sample.features)?;
        let mut g_p = vec![0.0; self.kind.dims()];
        let mut g_l = vec![0.0; self.kind.sign_classes()];
        Ok(objective.evaluate(self.activation, &self.cache, sample, &mut g_p, &mut g_l)?.total)
    }

    /// Loss, parameter gradients and `∂L/∂O` for one sample.
    pub fn sample_gradient(
        &mut self,
        sample: &Sample,
        objective: &Objective,
    ) -> Result<(f64, Gradients, DenseVector)> {
        let mut grads = Gradients::zeros_like(self);
        let mut grad_o = vec![0.0; self.kind.dims()];
        let loss = self.accumulate_sample(sample, objective, 1.0, &mut grads, &mut grad_o)?;
        Ok((loss.total, grads, DenseVector::new(grad_o)?))
    }

    fn accumulate_sample(
        &mut self,
        sample: &Sample,
        objective: &Objective,
        scale: f64,
        grads: &mut Gradients,
        grad_o: &mut [f64],
    ) -> Result<SampleLoss> {
        self.forward_cached(&sample.features)?;
        let mut g_p = vec![0.0; self.kind.dims()];
        let mut g_l = vec![0.0; self.kind.sign_classes()];
        let loss = objective.evaluate(self.activation, &self.cache, sample, &mut g_p, &mut g_l)?;
        self.backward_accumulate(&g_p, &g_l, scale, grads, grad_o)?;
        Ok(loss)
    }
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// `|Y|` for sphere heads, signed `Y` for direct regression.
    pub target: Vec<f64>,
    pub sign_class: usize,
}

/// Training objective: a regression loss on the branch output plus, when
/// `lambda > 0`, `lambda ×` sign cross-entropy on the logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub loss: RegressionLoss,
    pub lambda: f64,
}

struct SampleLoss {
    total: f64,
}

impl Objective {
    fn evaluate(
        &self,
        activation: Option<ActivationKind>,
        cache: &Cache,
        sample: &Sample,
        g_p: &mut [f64],
        g_logits: &mut [f64],
    ) -> Result<SampleLoss> {
        if sample.target.len() != g_p.len() {
            return Err(Error::LengthMismatch {
                expected: g_p.len(),
                found: sample.target.len(),
            });
        }
        if sample.sign_class >= g_logits.len() {
            return Err(Error::ClassOutOfRange {
                class: sample.sign_class,
                classes: g_logits.len(),
            });
        }
        let mut total = if activation == Some(ActivationKind::SphericalFlat) {
            // S_flat outputs carry signs; the loss sees |P| and the gradient
            // picks up sign(P) (zeros count as positive).
            let abs: Vec<f64> = cache.p.iter().map(|v| libm::fabs(*v)).collect();
            let value = self.loss.eval_into(&abs, &sample.target, g_p)?;
            for (g, p) in g_p.iter_mut().zip(&cache.p) {
                if *p < 0.0 {
                    *g = -*g;
                }
            }
            value
        } else {
            self.loss.eval_into(&cache.p, &sample.target, g_p)?
        };
        if self.lambda > 0.0 {
            total += self.lambda * sign_xent_into(&cache.logits, sample.sign_class, g_logits);
            for g in g_logits.iter_mut() {
                *g *= self.lambda;
            }
        } else {
            g_logits.fill(0.0);
        }
        Ok(SampleLoss { total })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub objective: Objective,
}

/// Per-minibatch telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub batch: usize,
    /// Mean total loss over the batch.
    pub loss: f64,
    /// Mean over the batch of per-sample `‖∂L/∂O‖₂`.
    pub grad_o_norm: f64,
}

/// Minibatch SGD over `samples`, reshuffled every epoch with a permutation
/// seeded from `config.seed`. Batch gradients are sample means.
pub fn train(
    mut model: MlpModel,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<(MlpModel, Vec<TrainRecord>)> {
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidArgument("epochs and batch size must be ≥ 1".into()));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {}",
            config.lr
        )));
    }
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = Rng::with_stream(config.seed, 2);
    let mut grads = Gradients::zeros_like(&model);
    let mut grad_o = vec![0.0; model.kind.dims()];
    let batches = samples.len().div_ceil(config.batch_size);
    let mut records = Vec::with_capacity(config.epochs * batches);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            grads.clear();
            let scale = 1.0 / idx.len() as f64;
            let mut loss_sum = 0.0;
            let mut norm_sum = 0.0;
            for &i in idx {
                let l = model
                    .accumulate_sample(&samples[i], &config.objective, scale, &mut grads, &mut grad_o)
                    .map_err(|e| match e {
                        Error::NonFinite => Error::NanLoss { epoch, batch },
                        other => other,
                    })?;
                loss_sum += l.total;
                norm_sum += norm(&grad_o);
            }
            let loss = loss_sum * scale;
            if !loss.is_finite() {
                return Err(Error::NanLoss { epoch, batch });
            }
            model.sgd_step(&grads, config.lr)?;
            records.push(TrainRecord {
                epoch,
                batch,
                loss,
                grad_o_norm: norm_sum * scale,
            });
        }
    }
    Ok((model, records))
}

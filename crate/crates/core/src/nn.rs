//! One-hidden-layer classifier with hand-written backpropagation.
//!
//! Parameters are stored row-major: `w1` is `hidden_dim x input_dim`, `w2` is
//! `classes x hidden_dim`. Gradients reuse the [`ModelParams`] layout so the
//! optimizer and the finite-difference checks can address both through the
//! same flat coordinate view.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Domain};

/// Lower clamp applied to every probability before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    input_dim: usize,
    hidden_dim: usize,
    classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub activation: Activation,
}

/// Gradient of a scalar loss with respect to every entry of [`ModelParams`].
pub type Gradient = ModelParams;

impl ModelParams {
    pub fn zeros(
        input_dim: usize,
        hidden_dim: usize,
        classes: usize,
        activation: Activation,
    ) -> Self {
        ModelParams {
            input_dim,
            hidden_dim,
            classes,
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; classes * hidden_dim],
            b2: vec![0.0; classes],
            activation,
        }
    }

    /// Builds parameters from raw tensors, checking every length.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        input_dim: usize,
        hidden_dim: usize,
        classes: usize,
        activation: Activation,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        let expect = |what, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    what,
                    expected,
                    got,
                })
            }
        };
        if input_dim == 0 || hidden_dim == 0 || classes == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        expect("w1", hidden_dim * input_dim, w1.len())?;
        expect("b1", hidden_dim, b1.len())?;
        expect("w2", classes * hidden_dim, w2.len())?;
        expect("b2", classes, b2.len())?;
        Ok(ModelParams {
            input_dim,
            hidden_dim,
            classes,
            w1,
            b1,
            w2,
            b2,
            activation,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(
            self.input_dim,
            self.hidden_dim,
            self.classes,
            self.activation,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.input_dim == other.input_dim
            && self.hidden_dim == other.hidden_dim
            && self.classes == other.classes
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// The four tensors in canonical order `w1, b1, w2, b2`.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    fn locate(&self, mut i: usize) -> (usize, usize) {
        for (t, len) in self.tensors().iter().map(|t| t.len()).enumerate() {
            if i < len {
                return (t, i);
            }
            i -= len;
        }
        panic!("coordinate out of range");
    }

    /// Flat coordinate access over `w1, b1, w2, b2`.
    pub fn coord(&self, i: usize) -> f64 {
        let (t, j) = self.locate(i);
        self.tensors()[t][j]
    }

    pub fn set_coord(&mut self, i: usize, value: f64) {
        let (t, j) = self.locate(i);
        self.tensors_mut()[t][j] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("input".into()));
        }
        Ok(())
    }

    fn forward_unchecked(&self, x: &[f64]) -> Prediction {
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| self.activation.apply(dot(row, x) + b))
            .collect();
        let logits: Vec<f64> = self
            .w2
            .chunks_exact(self.hidden_dim)
            .zip(&self.b2)
            .map(|(row, b)| dot(row, &hidden) + b)
            .collect();
        let probs = softmax(&logits);
        Prediction {
            logits,
            probs,
            hidden,
        }
    }

    /// Accumulates `scale * dL/dparams` for one sample given `dL/dlogits`.
    fn backprop(
        &self,
        x: &[f64],
        pred: &Prediction,
        dlogits: &[f64],
        scale: f64,
        grad: &mut Gradient,
    ) {
        let h = &pred.hidden;
        let mut dhidden = vec![0.0; self.hidden_dim];
        for (k, &dz) in dlogits.iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            let dz = dz * scale;
            grad.b2[k] += dz;
            let row = &self.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
            let grow = &mut grad.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
            for j in 0..self.hidden_dim {
                grow[j] += dz * h[j];
                dhidden[j] += dz * row[j];
            }
        }
        for j in 0..self.hidden_dim {
            let dpre = dhidden[j] * self.activation.derivative_from_output(h[j]);
            if dpre == 0.0 {
                continue;
            }
            grad.b1[j] += dpre;
            let grow = &mut grad.w1[j * self.input_dim..(j + 1) * self.input_dim];
            for (g, xi) in grow.iter_mut().zip(x) {
                *g += dpre * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// Hidden-layer activation; the embedding used for distance-based selection.
    pub hidden: Vec<f64>,
}

impl Prediction {
    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (shifted by the max logit).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= s);
    out
}

/// Shannon entropy in nats, with the usual `0 log 0 = 0` convention.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

pub fn forward(params: &ModelParams, x: &[f64]) -> Result<Prediction> {
    params.check_input(x)?;
    Ok(params.forward_unchecked(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    SquaredL2,
    KlDivergence,
}

impl Distance {
    /// `D(p, q)` where `p` is the clean prediction and `q` the augmented one.
    pub fn eval(self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Distance::SquaredL2 => p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(),
            Distance::KlDivergence => p
                .iter()
                .zip(q)
                .map(|(&a, &b)| a * (a.max(PROB_FLOOR).ln() - b.max(PROB_FLOOR).ln()))
                .sum::<f64>()
                .max(0.0),
        }
    }

    /// `dD/dq`, treating `p` as a constant target.
    fn grad_q(self, p: &[f64], q: &[f64]) -> Vec<f64> {
        match self {
            Distance::SquaredL2 => p.iter().zip(q).map(|(a, b)| 2.0 * (b - a)).collect(),
            Distance::KlDivergence => p
                .iter()
                .zip(q)
                .map(|(&a, &b)| if b > PROB_FLOOR { -a / b } else { 0.0 })
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Distance::SquaredL2 => "squared_l2",
            Distance::KlDivergence => "kl_divergence",
        }
    }
}

impl std::str::FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared_l2" | "l2" => Ok(Distance::SquaredL2),
            "kl_divergence" | "kl" => Ok(Distance::KlDivergence),
            other => Err(Error::invalid(format!("unknown distance `{other}`"))),
        }
    }
}

/// Chain rule through softmax: `dL/dz_k = q_k (g_k - sum_j q_j g_j)`.
fn softmax_backward(q: &[f64], dq: &[f64]) -> Vec<f64> {
    let s = dot(q, dq);
    q.iter().zip(dq).map(|(qk, gk)| qk * (gk - s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub distance: Distance,
    /// Weight of the consistency term.
    pub unsup_weight: f64,
    /// Augmentations drawn per unlabeled sample per training step.
    pub n_train_augs: usize,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            distance: Distance::SquaredL2,
            unsup_weight: 1.0,
            n_train_augs: 1,
        }
    }
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.unsup_weight >= 0.0 && self.unsup_weight.is_finite()) {
            return Err(Error::invalid("unsup_weight must be finite and >= 0"));
        }
        if self.n_train_augs == 0 {
            return Err(Error::invalid("n_train_augs must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabeledSample<'a> {
    pub x: &'a [f64],
    pub label: usize,
}

/// An unlabeled sample together with the augmented views drawn for it.
#[derive(Debug, Clone)]
pub struct AugmentedSample<'a> {
    pub x: &'a [f64],
    pub augs: Vec<Vec<f64>>,
}

fn check_label(params: &ModelParams, label: usize) -> Result<()> {
    if label >= params.classes {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            params.classes
        )));
    }
    Ok(())
}

/// Mean cross-entropy of the labeled batch.
pub fn supervised_loss(params: &ModelParams, batch: &[LabeledSample<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("labeled batch"));
    }
    let mut total = 0.0;
    for s in batch {
        check_label(params, s.label)?;
        let pred = forward(params, s.x)?;
        total -= pred.probs[s.label].max(PROB_FLOOR).ln();
    }
    Ok(total / batch.len() as f64)
}

/// Mean distance between the clean prediction and each augmented prediction.
pub fn consistency_loss(
    params: &ModelParams,
    x: &[f64],
    x_augs: &[Vec<f64>],
    spec: &LossSpec,
) -> Result<f64> {
    if x_augs.is_empty() {
        return Err(Error::Empty("augmentation set"));
    }
    let clean = forward(params, x)?;
    let mut total = 0.0;
    for aug in x_augs {
        let q = forward(params, aug)?;
        total += spec.distance.eval(&clean.probs, &q.probs);
    }
    Ok(total / x_augs.len() as f64)
}

/// Composite loss `L_l + unsup_weight * mean(L_u)` and its exact gradient.
///
/// The clean prediction inside the consistency term is a constant target, so
/// gradient flows only through the augmented views.
pub fn total_loss_and_grad(
    params: &ModelParams,
    labeled: &[LabeledSample<'_>],
    unlabeled: &[AugmentedSample<'_>],
    spec: &LossSpec,
) -> Result<(f64, Gradient)> {
    if labeled.is_empty() {
        return Err(Error::Empty("labeled batch"));
    }
    let mut grad = params.zeros_like();
    let mut sup = 0.0;
    let inv_l = 1.0 / labeled.len() as f64;
    for s in labeled {
        check_label(params, s.label)?;
        let pred = forward(params, s.x)?;
        let py = pred.probs[s.label];
        sup -= py.max(PROB_FLOOR).ln();
        if py > PROB_FLOOR {
            let mut dz = pred.probs.clone();
            dz[s.label] -= 1.0;
            params.backprop(s.x, &pred, &dz, inv_l, &mut grad);
        }
    }
    let mut loss = sup * inv_l;

    if spec.unsup_weight > 0.0 && !unlabeled.is_empty() {
        let inv_u = spec.unsup_weight / unlabeled.len() as f64;
        let mut unsup = 0.0;
        for s in unlabeled {
            if s.augs.is_empty() {
                return Err(Error::Empty("augmentation set"));
            }
            let target = forward(params, s.x)?.probs;
            let scale = inv_u / s.augs.len() as f64;
            let mut per = 0.0;
            for aug in &s.augs {
                let pred = forward(params, aug)?;
                per += spec.distance.eval(&target, &pred.probs);
                let dq = spec.distance.grad_q(&target, &pred.probs);
                let dz = softmax_backward(&pred.probs, &dq);
                params.backprop(aug, &pred, &dz, scale, &mut grad);
            }
            unsup += per / s.augs.len() as f64;
        }
        loss += spec.unsup_weight * unsup / unlabeled.len() as f64;
    }
    Ok((loss, grad))
}

/// Momentum buffer for [`sgd_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub velocity: Gradient,
}

impl SgdState {
    pub fn new(params: &ModelParams) -> Self {
        SgdState {
            velocity: params.zeros_like(),
        }
    }
}

fn check_sgd(
    params: &ModelParams,
    grad: &Gradient,
    lr: f64,
    momentum: f64,
    state: &SgdState,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::invalid("momentum must lie in [0, 1)"));
    }
    if !params.same_shape(grad) || !params.same_shape(&state.velocity) {
        return Err(Error::invalid("gradient shape does not match parameters"));
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient (training diverged)".into()));
    }
    Ok(())
}

/// `v <- momentum * v + g; params <- params - lr * v`.
pub fn sgd_step(
    params: &ModelParams,
    grad: &Gradient,
    lr: f64,
    momentum: f64,
    state: &SgdState,
) -> Result<(ModelParams, SgdState)> {
    let mut params = params.clone();
    let mut state = state.clone();
    sgd_step_in_place(&mut params, grad, lr, momentum, &mut state)?;
    Ok((params, state))
}

pub fn sgd_step_in_place(
    params: &mut ModelParams,
    grad: &Gradient,
    lr: f64,
    momentum: f64,
    state: &mut SgdState,
) -> Result<()> {
    check_sgd(params, grad, lr, momentum, state)?;
    for ((p, v), g) in params
        .iter_mut()
        .zip(state.velocity.iter_mut())
        .zip(grad.iter())
    {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Weights i.i.d. uniform in `[-scale, scale]`, biases zero.
pub fn init_params(
    seed: u64,
    input_dim: usize,
    hidden_dim: usize,
    classes: usize,
    scale: f64,
    activation: Activation,
) -> Result<ModelParams> {
    if input_dim == 0 || hidden_dim == 0 || classes == 0 {
        return Err(Error::invalid("model dimensions must be positive"));
    }
    let mut params = ModelParams::zeros(input_dim, hidden_dim, classes, activation);
    let mut rng = rng_for(seed, Domain::Init, 0);
    for w in params.w1.iter_mut().chain(params.w2.iter_mut()) {
        *w = scale * (2.0 * rng.gen::<f64>() - 1.0);
    }
    Ok(params)
}

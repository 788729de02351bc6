//! The bidirectional cascaded network.
//!
//! A bottom-up stream of `conv3×3 → relu → maxpool2` stages produces feature
//! maps `F_1..F_K` at halving resolution. A top-down stream starts from
//! `B_K = F_K` and, for `k = K−1` down to `1`, refines the upsampled coarser
//! map together with the same-resolution bottom-up map:
//! `B_k = relu(conv3×3(F_k ⊕ upsample2(B_{k+1})))`. The classifier reads the
//! global average of both the finest top-down map `B_1` and the coarsest
//! bottom-up map `F_K`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::ops::{
    concat_channels, conv2d, dense, global_avg_pool, maxpool2, relu, upsample2, ConcatCtx,
    Conv2dCtx, DenseCtx, GapCtx, MaxPoolCtx, OpContext, ReluCtx, UpsampleCtx,
};
use crate::tensor::Tensor;

const KERNEL: usize = 3;
const PAD: usize = 1;

/// Architecture hyperparameters. Everything about the parameter layout is
/// derivable from this struct alone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Square spatial extent of the input images.
    pub input_size: usize,
    pub input_channels: usize,
    /// Output channels of each cascade stage; its length is the stage count.
    pub channels: Vec<usize>,
    pub classes: usize,
    pub seed: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            input_channels: 1,
            channels: vec![16, 32, 64],
            classes: 3,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn stages(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.stages();
        if k < 2 {
            return Err(Error::Config(format!(
                "a cascade needs at least two stages, got {k}"
            )));
        }
        if self.channels.contains(&0) {
            return Err(Error::Config(format!(
                "stage channel counts must be positive, got {:?}",
                self.channels
            )));
        }
        if self.input_channels == 0 {
            return Err(Error::Config("input_channels must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least two classes, got {}",
                self.classes
            )));
        }
        let ladder = 1usize.checked_shl(k as u32).unwrap_or(0);
        if self.input_size == 0 || ladder == 0 || !self.input_size.is_multiple_of(ladder) {
            return Err(Error::Config(format!(
                "input_size {} must be a positive multiple of 2^{k} = {ladder}",
                self.input_size
            )));
        }
        Ok(())
    }

    /// Spatial extent of `F_k` (and `B_k`), 1-based.
    pub fn stage_extent(&self, k: usize) -> usize {
        self.input_size >> k
    }

    /// Length of the classifier's input vector.
    pub fn head_features(&self) -> usize {
        self.channels[0] + self.channels[self.stages() - 1]
    }

    /// Parameter names and shapes in canonical order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let k = self.stages();
        let mut shapes = Vec::with_capacity(2 * (2 * k - 1) + 2);
        let mut cin = self.input_channels;
        for (i, &c) in self.channels.iter().enumerate() {
            shapes.push((forward_weight(i + 1), vec![c, cin, KERNEL, KERNEL]));
            shapes.push((forward_bias(i + 1), vec![c]));
            cin = c;
        }
        for i in 0..k - 1 {
            let (c, next) = (self.channels[i], self.channels[i + 1]);
            shapes.push((refine_weight(i + 1), vec![c, c + next, KERNEL, KERNEL]));
            shapes.push((refine_bias(i + 1), vec![c]));
        }
        shapes.push((HEAD_WEIGHT.into(), vec![self.head_features(), self.classes]));
        shapes.push((HEAD_BIAS.into(), vec![self.classes]));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

pub const HEAD_WEIGHT: &str = "head.weight";
pub const HEAD_BIAS: &str = "head.bias";

pub fn forward_weight(stage: usize) -> String {
    format!("forward.{stage}.weight")
}

pub fn forward_bias(stage: usize) -> String {
    format!("forward.{stage}.bias")
}

pub fn refine_weight(stage: usize) -> String {
    format!("refine.{stage}.weight")
}

pub fn refine_bias(stage: usize) -> String {
    format!("refine.{stage}.bias")
}

/// Named tensors in the canonical order of [`ModelConfig::parameter_shapes`].
///
/// Also used for gradients and optimizer moments, which mirror the
/// parameters name-for-name.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet<T> {
    config: ModelConfig,
    tensors: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> ParameterSet<T> {
    /// Assembles a set from named tensors, checking names and shapes against
    /// the config.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<(String, Tensor<T>)>) -> Result<Self> {
        config.validate()?;
        let expected = config.parameter_shapes();
        if expected.len() != tensors.len() {
            return Err(Error::Consistency(format!(
                "config implies {} parameter tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&tensors) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::Consistency(format!(
                    "expected {name} {shape:?}, got {got_name} {:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { config, tensors })
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = config
            .parameter_shapes()
            .into_iter()
            .map(|(name, shape)| Ok((name, Tensor::zeros(&shape)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), t.zeros_like()))
                .collect(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    fn expect(&self, name: &str) -> Result<&Tensor<T>> {
        self.get(name)
            .ok_or_else(|| Error::Consistency(format!("missing parameter {name}")))
    }

    fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = self
            .get_mut(name)
            .ok_or_else(|| Error::Consistency(format!("missing parameter {name}")))?;
        *slot = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|(_, t)| t.all_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
        }
    }

    /// True when both sets carry the same names and shapes in the same order.
    pub fn congruent<U: Scalar>(&self, other: &ParameterSet<U>) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((a, x), (b, y))| a == b && x.shape() == y.shape())
    }

    pub fn squared_norm(&self) -> T {
        self.tensors.iter().map(|(_, t)| t.squared_norm()).sum()
    }

    pub fn into_tensors(self) -> Vec<(String, Tensor<T>)> {
        self.tensors
    }
}

/// Allocates the parameters for `config` with He-normal weights
/// (`σ = sqrt(2 / fan_in)`) and zero biases, seeded by `config.seed`.
pub fn build_model<T: Scalar>(config: &ModelConfig) -> Result<ParameterSet<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(config.seed));
    let tensors = config
        .parameter_shapes()
        .into_iter()
        .map(|(name, shape)| {
            let n: usize = shape.iter().product();
            let t = if shape.len() == 1 {
                Tensor::zeros(&shape)?
            } else {
                let fan_in: usize = if shape.len() == 4 {
                    shape[1..].iter().product()
                } else {
                    shape[0]
                };
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                    .map_err(|e| Error::Config(e.to_string()))?;
                let data = (0..n).map(|_| T::lit(normal.sample(&mut rng))).collect();
                Tensor::new(&shape, data)?
            };
            Ok((name, t))
        })
        .collect::<Result<_>>()?;
    Ok(ParameterSet {
        config: config.clone(),
        tensors,
    })
}

/// One bottom-up stage: `conv → relu → maxpool2`.
#[derive(Clone, Debug)]
struct StageCtx<T> {
    conv: Conv2dCtx<T>,
    relu: ReluCtx,
    pool: MaxPoolCtx,
}

/// One top-down refinement: `upsample2 → concat → conv → relu`.
#[derive(Clone, Debug)]
struct RefineCtx<T> {
    up: UpsampleCtx,
    cat: ConcatCtx,
    conv: Conv2dCtx<T>,
    relu: ReluCtx,
}

#[derive(Clone, Debug)]
struct HeadCtx<T> {
    gap_fine: GapCtx,
    gap_coarse: GapCtx,
    cat: ConcatCtx,
    /// Inverted-dropout scale applied to the pooled features, if any.
    mask: Option<Tensor<T>>,
    dense: DenseCtx<T>,
}

/// Everything the backward pass needs, plus the intermediate maps for
/// inspection.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    config: ModelConfig,
    /// `F_1..F_K`.
    pub features: Vec<Tensor<T>>,
    /// `B_1..B_{K−1}`; `B_K` is `F_K`.
    pub topdown: Vec<Tensor<T>>,
    /// Head input `GAP(B_1) ⊕ GAP(F_K)` before any dropout.
    pub pooled: Tensor<T>,
    stages: Vec<StageCtx<T>>,
    /// Indexed by `k − 1`; applied in order `K−1, …, 1`.
    refines: Vec<RefineCtx<T>>,
    head: HeadCtx<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn batch_size(&self) -> usize {
        self.pooled.shape()[0]
    }

    /// Operation contexts in application order.
    pub fn contexts(&self) -> Vec<OpContext<T>> {
        let mut ops = Vec::new();
        for s in &self.stages {
            ops.push(OpContext::Conv2d(s.conv.clone()));
            ops.push(OpContext::Relu(s.relu.clone()));
            ops.push(OpContext::MaxPool(s.pool.clone()));
        }
        for r in self.refines.iter().rev() {
            ops.push(OpContext::Upsample(r.up.clone()));
            ops.push(OpContext::Concat(r.cat.clone()));
            ops.push(OpContext::Conv2d(r.conv.clone()));
            ops.push(OpContext::Relu(r.relu.clone()));
        }
        ops.push(OpContext::GlobalAvgPool(self.head.gap_fine.clone()));
        ops.push(OpContext::GlobalAvgPool(self.head.gap_coarse.clone()));
        ops.push(OpContext::Concat(self.head.cat.clone()));
        ops.push(OpContext::Dense(self.head.dense.clone()));
        ops
    }
}

pub fn forward<T: Scalar>(
    params: &ParameterSet<T>,
    batch: &Tensor<T>,
) -> Result<(Tensor<T>, ForwardTrace<T>)> {
    forward_masked(params, batch, None)
}

/// Forward pass with an optional multiplicative mask `[B × head_features]`
/// on the classifier input (inverted dropout during training).
pub fn forward_masked<T: Scalar>(
    params: &ParameterSet<T>,
    batch: &Tensor<T>,
    mask: Option<&Tensor<T>>,
) -> Result<(Tensor<T>, ForwardTrace<T>)> {
    let cfg = params.config();
    let (b, c, h, w) = batch.dims4()?;
    if c != cfg.input_channels || h != cfg.input_size || w != cfg.input_size {
        return Err(Error::Dimension(format!(
            "model expects [B×{}×{}×{}] input, got {:?}",
            cfg.input_channels,
            cfg.input_size,
            cfg.input_size,
            batch.shape()
        )));
    }
    let k = cfg.stages();

    let mut features = Vec::with_capacity(k);
    let mut stages = Vec::with_capacity(k);
    for s in 1..=k {
        let input = features.last().unwrap_or(batch);
        let (z, conv) = conv2d(
            input,
            params.expect(&forward_weight(s))?,
            params.expect(&forward_bias(s))?,
            1,
            PAD,
        )?;
        let (a, relu_ctx) = relu(&z);
        let (f, pool) = maxpool2(&a)?;
        features.push(f);
        stages.push(StageCtx {
            conv,
            relu: relu_ctx,
            pool,
        });
    }

    // Top-down: topdown[s-1] holds B_s.
    let mut topdown: Vec<Option<Tensor<T>>> = vec![None; k - 1];
    let mut refines: Vec<Option<RefineCtx<T>>> = vec![None; k - 1];
    for s in (1..k).rev() {
        let coarser = if s + 1 == k {
            &features[k - 1]
        } else {
            topdown[s].as_ref().expect("coarser map computed first")
        };
        let (u, up) = upsample2(coarser)?;
        let (cat_in, cat) = concat_channels(&features[s - 1], &u)?;
        let (z, conv) = conv2d(
            &cat_in,
            params.expect(&refine_weight(s))?,
            params.expect(&refine_bias(s))?,
            1,
            PAD,
        )?;
        let (bmap, relu_ctx) = relu(&z);
        topdown[s - 1] = Some(bmap);
        refines[s - 1] = Some(RefineCtx {
            up,
            cat,
            conv,
            relu: relu_ctx,
        });
    }
    let topdown: Vec<Tensor<T>> = topdown.into_iter().map(|t| t.expect("filled")).collect();
    let refines: Vec<RefineCtx<T>> = refines.into_iter().map(|r| r.expect("filled")).collect();

    let (fine, gap_fine) = global_avg_pool(&topdown[0])?;
    let (coarse, gap_coarse) = global_avg_pool(&features[k - 1])?;
    let (pooled, cat) = concat_channels(&fine, &coarse)?;
    let head_in = match mask {
        Some(m) => {
            if m.shape() != pooled.shape() {
                return Err(Error::Dimension(format!(
                    "dropout mask {:?} does not match head input {:?}",
                    m.shape(),
                    pooled.shape()
                )));
            }
            let mut x = pooled.clone();
            for (v, &s) in x.data_mut().iter_mut().zip(m.data()) {
                *v *= s;
            }
            x
        }
        None => pooled.clone(),
    };
    let (logits, dense_ctx) = dense(
        &head_in,
        params.expect(HEAD_WEIGHT)?,
        params.expect(HEAD_BIAS)?,
    )?;
    debug_assert_eq!(logits.shape(), &[b, cfg.classes]);

    Ok((
        logits,
        ForwardTrace {
            config: cfg.clone(),
            features,
            topdown,
            pooled,
            stages,
            refines,
            head: HeadCtx {
                gap_fine,
                gap_coarse,
                cat,
                mask: mask.cloned(),
                dense: dense_ctx,
            },
        },
    ))
}

/// Gradient of the loss w.r.t. every parameter, given `dL/dlogits`.
pub fn backward<T: Scalar>(
    params: &ParameterSet<T>,
    trace: &ForwardTrace<T>,
    d_logits: &Tensor<T>,
) -> Result<ParameterSet<T>> {
    let cfg = params.config();
    if *cfg != trace.config {
        return Err(Error::Consistency(
            "trace was produced with a different model config".into(),
        ));
    }
    let consistent = trace.stages.iter().enumerate().all(|(i, s)| {
        params.get(&forward_weight(i + 1)).map(|t| t.shape()) == Some(s.conv.weight_shape())
    }) && params.get(HEAD_WEIGHT).map(|t| t.shape()) == Some(trace.head.dense.weight_shape());
    if !consistent {
        return Err(Error::Consistency(
            "trace does not match the parameter shapes".into(),
        ));
    }
    let k = cfg.stages();
    let b = trace.batch_size();
    if d_logits.shape() != [b, cfg.classes] {
        return Err(Error::Dimension(format!(
            "dLogits has shape {:?}, expected [{b}, {}]",
            d_logits.shape(),
            cfg.classes
        )));
    }

    let mut grads = params.zeros_like();

    let head = trace.head.dense.backward(d_logits)?;
    grads.set(HEAD_WEIGHT, head.weight)?;
    grads.set(HEAD_BIAS, head.bias)?;
    let mut d_pooled = head.input;
    if let Some(mask) = &trace.head.mask {
        for (g, &s) in d_pooled.data_mut().iter_mut().zip(mask.data()) {
            *g *= s;
        }
    }
    let (d_fine, d_coarse) = trace.head.cat.backward(&d_pooled)?;

    // d_feat[s-1] accumulates dL/dF_s from every consumer.
    let mut d_feat: Vec<Tensor<T>> = trace.features.iter().map(Tensor::zeros_like).collect();
    d_feat[k - 1].add_assign(&trace.head.gap_coarse.backward(&d_coarse)?)?;

    // Top-down stream in reverse creation order: B_1 first.
    let mut d_top = trace.head.gap_fine.backward(&d_fine)?;
    for s in 1..k {
        let r = &trace.refines[s - 1];
        let dz = r.relu.backward(&d_top)?;
        let g = r.conv.backward(&dz)?;
        grads.set(&refine_weight(s), g.weight)?;
        grads.set(&refine_bias(s), g.bias)?;
        let (d_f, d_up) = r.cat.backward(&g.input)?;
        d_feat[s - 1].add_assign(&d_f)?;
        let d_coarser = r.up.backward(&d_up)?;
        if s + 1 == k {
            d_feat[k - 1].add_assign(&d_coarser)?;
        } else {
            d_top = d_coarser;
        }
    }

    // Bottom-up stream, coarsest stage first.
    for s in (1..=k).rev() {
        let st = &trace.stages[s - 1];
        let da = st.pool.backward(&d_feat[s - 1])?;
        let dz = st.relu.backward(&da)?;
        let g = st.conv.backward(&dz)?;
        grads.set(&forward_weight(s), g.weight)?;
        grads.set(&forward_bias(s), g.bias)?;
        if s > 1 {
            d_feat[s - 2].add_assign(&g.input)?;
        }
    }
    Ok(grads)
}

/// Index of the largest entry in each row; ties go to the lowest index.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Vec<usize>> {
    let (_, k) = logits.dims2()?;
    Ok(logits
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

pub fn predict<T: Scalar>(params: &ParameterSet<T>, batch: &Tensor<T>) -> Result<Vec<usize>> {
    let (logits, _) = forward(params, batch)?;
    argmax_rows(&logits)
}

/// Mean cross-entropy loss of `params` on `batch` evaluated at `f64`,
/// together with the analytic gradient. Used by the gradient gate.
pub fn loss_and_gradient(
    params: &ParameterSet<f64>,
    batch: &Tensor<f64>,
    labels: &[usize],
) -> Result<(f64, ParameterSet<f64>)> {
    let (logits, trace) = forward(params, batch)?;
    let (loss, d_logits) = crate::tensor::softmax_xent(&logits, labels)?;
    Ok((loss, backward(params, &trace, &d_logits)?))
}

/// Per-tensor outcome of [`gradcheck_model`].
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
}

/// Compares the analytic gradient of the mean cross-entropy w.r.t. every
/// parameter tensor against central differences, at double precision.
pub fn gradcheck_model(
    params: &ParameterSet<f64>,
    batch: &Tensor<f64>,
    labels: &[usize],
    h: f64,
) -> Result<Vec<TensorCheck>> {
    let (_, grads) = loss_and_gradient(params, batch, labels)?;
    let mut report = Vec::with_capacity(params.len());
    for (name, analytic) in grads.iter() {
        let base = params.expect(name)?;
        let mut probe_set = params.clone();
        let err = crate::tensor::finite_diff_gradcheck(
            |p| {
                probe_set.set(name, p.clone())?;
                let (logits, _) = forward(&probe_set, batch)?;
                Ok(crate::tensor::softmax_xent(&logits, labels)?.0)
            },
            base,
            analytic,
            h,
        )?;
        report.push(TensorCheck {
            name: name.to_string(),
            max_rel_error: err,
        });
    }
    Ok(report)
}

/// The small configuration used by the gradient gate: 8×8 input, two stages
/// with 2 and 3 channels.
pub fn tiny_config(seed: u32) -> ModelConfig {
    ModelConfig {
        input_size: 8,
        input_channels: 1,
        channels: vec![2, 3],
        classes: 3,
        seed,
    }
}

/// Outcome of the full gradient gate.
#[derive(Clone, Debug)]
pub struct GradientGate {
    pub primitives: Vec<crate::tensor::PrimitiveCheck>,
    pub tensors: Vec<TensorCheck>,
}

impl GradientGate {
    pub fn max_rel_error(&self) -> f64 {
        self.primitives
            .iter()
            .map(|c| c.max_rel_error)
            .chain(self.tensors.iter().map(|c| c.max_rel_error))
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error() < tol
    }
}

/// Step used for the per-primitive checks on unit-scale inputs.
pub const PRIMITIVE_STEP: f64 = 1e-3;
/// Step used for the full-model check.
pub const MODEL_STEP: f64 = 1e-6;

/// Runs every primitive's gradient check and the full-model check on a
/// random tiny network (8×8 input, channels `[2, 3]`, batch of 2).
///
/// Biases are drawn at random rather than left at zero so no pre-activation
/// sits exactly on a ReLU kink, where central differences see a one-sided
/// slope.
pub fn gradient_gate(seed: u64) -> Result<GradientGate> {
    use rand::Rng;

    let primitives = crate::tensor::check_primitives(seed, PRIMITIVE_STEP)?;

    let cfg = tiny_config(seed as u32);
    let mut params = build_model::<f64>(&cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for (name, t) in params.iter_mut() {
        if name.ends_with(".bias") {
            for v in t.data_mut() {
                *v = rng.gen_range(-0.2..0.2);
            }
        }
    }
    let s = cfg.input_size;
    let batch = Tensor::new(
        &[2, 1, s, s],
        (0..2 * s * s).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )?;
    let labels = [
        rng.gen_range(0..cfg.classes),
        rng.gen_range(0..cfg.classes),
    ];
    let tensors = gradcheck_model(&params, &batch, &labels, MODEL_STEP)?;
    Ok(GradientGate {
        primitives,
        tensors,
    })
}

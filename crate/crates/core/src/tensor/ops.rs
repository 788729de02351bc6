//! Forward/backward pairs for every primitive used by the network.
//!
//! Each forward returns the output together with a context holding what its
//! backward rule needs. There is no general graph: the model calls the
//! backward rules itself, in reverse application order.

use super::gemm::{gemm_nn, gemm_nt, gemm_tn};
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Saved state of one primitive application.
#[derive(Clone, Debug)]
pub enum OpContext<T> {
    Matmul(MatmulCtx<T>),
    Conv2d(Conv2dCtx<T>),
    MaxPool(MaxPoolCtx),
    Relu(ReluCtx),
    Upsample(UpsampleCtx),
    Concat(ConcatCtx),
    Dense(DenseCtx<T>),
    GlobalAvgPool(GapCtx),
}

impl<T> OpContext<T> {
    pub fn op_name(&self) -> &'static str {
        match self {
            OpContext::Matmul(_) => "matmul",
            OpContext::Conv2d(_) => "conv2d",
            OpContext::MaxPool(_) => "maxpool2",
            OpContext::Relu(_) => "relu",
            OpContext::Upsample(_) => "upsample2",
            OpContext::Concat(_) => "concat_channels",
            OpContext::Dense(_) => "dense",
            OpContext::GlobalAvgPool(_) => "global_avg_pool",
        }
    }
}

// ---------------------------------------------------------------- matmul

#[derive(Clone, Debug)]
pub struct MatmulCtx<T> {
    a: Tensor<T>,
    b: Tensor<T>,
}

pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(Tensor<T>, MatmulCtx<T>)> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul inner extents differ: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(&[m, n])?;
    gemm_nn(m, k, n, a.data(), b.data(), out.data_mut());
    Ok((
        out,
        MatmulCtx {
            a: a.clone(),
            b: b.clone(),
        },
    ))
}

impl<T: Scalar> MatmulCtx<T> {
    /// Returns `(dA, dB)` with `dA = dY·Bᵀ` and `dB = Aᵀ·dY`.
    pub fn backward(&self, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let (m, k) = self.a.dims2()?;
        let n = self.b.shape()[1];
        expect_shape(dy, &[m, n], "matmul upstream")?;
        let mut da = Tensor::zeros(&[m, k])?;
        gemm_nt(m, n, k, dy.data(), self.b.data(), da.data_mut());
        let mut db = Tensor::zeros(&[k, n])?;
        gemm_tn(k, m, n, self.a.data(), dy.data(), db.data_mut());
        Ok((da, db))
    }
}

// ---------------------------------------------------------------- conv2d

#[derive(Clone, Debug)]
pub struct Conv2dCtx<T> {
    input: Tensor<T>,
    weight: Tensor<T>,
    stride: usize,
    pad: usize,
}

/// Gradients produced by [`Conv2dCtx::backward`].
#[derive(Clone, Debug)]
pub struct Conv2dGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn patch_len(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn out_len(&self) -> usize {
        self.oh * self.ow
    }

    /// Unfolds one image `[cin×h×w]` into `[cin·kh·kw × oh·ow]` with zero padding.
    fn im2col<T: Scalar>(&self, img: &[T], cols: &mut [T]) {
        let p = self.out_len();
        for c in 0..self.cin {
            let plane = &img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        if iy < 0 || iy as usize >= self.h {
                            line.fill(T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            *v = if ix < 0 || ix as usize >= self.w {
                                T::zero()
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`ConvGeom::im2col`]: scatters column gradients back onto the image.
    fn col2im<T: Scalar>(&self, cols: &[T], img: &mut [T]) {
        let p = self.out_len();
        for c in 0..self.cin {
            let plane = &mut img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= self.h {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in 0..self.ow {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && (ix as usize) < self.w {
                                dst[ix as usize] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn conv_geometry(
    input: &[usize],
    weight: &[usize],
    stride: usize,
    pad: usize,
) -> Result<(usize, usize, ConvGeom)> {
    let [b, cin, h, w] = *input else {
        return Err(Error::Dimension(format!(
            "conv2d input must be rank 4, got {input:?}"
        )));
    };
    let [cout, wcin, kh, kw] = *weight else {
        return Err(Error::Dimension(format!(
            "conv2d weight must be rank 4, got {weight:?}"
        )));
    };
    if stride == 0 {
        return Err(Error::Dimension("conv2d stride must be positive".into()));
    }
    if wcin != cin {
        return Err(Error::Dimension(format!(
            "conv2d weight {weight:?} expects {wcin} input channels but input {input:?} has {cin}"
        )));
    }
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return Err(Error::Dimension(format!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{} (input {input:?}, pad {pad})",
            h + 2 * pad,
            w + 2 * pad
        )));
    }
    let geom = ConvGeom {
        cin,
        h,
        w,
        kh,
        kw,
        oh: (h + 2 * pad - kh) / stride + 1,
        ow: (w + 2 * pad - kw) / stride + 1,
        stride,
        pad,
    };
    Ok((b, cout, geom))
}

/// 2-D cross-correlation with zero padding.
///
/// `x: [B×Cin×H×W]`, `w: [Cout×Cin×kh×kw]`, `bias: [Cout]`.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, Conv2dCtx<T>)> {
    let (batch, cout, g) = conv_geometry(x.shape(), w.shape(), stride, pad)?;
    expect_shape(bias, &[cout], "conv2d bias")?;

    let (klen, p) = (g.patch_len(), g.out_len());
    let in_len = g.cin * g.h * g.w;
    let mut out = Tensor::zeros(&[batch, cout, g.oh, g.ow])?;
    let mut cols = vec![T::zero(); klen * p];
    for n in 0..batch {
        g.im2col(&x.data()[n * in_len..(n + 1) * in_len], &mut cols);
        let dst = &mut out.data_mut()[n * cout * p..(n + 1) * cout * p];
        for (o, row) in dst.chunks_exact_mut(p).enumerate() {
            row.fill(bias.data()[o]);
        }
        gemm_nn(cout, klen, p, w.data(), &cols, dst);
    }
    Ok((
        out,
        Conv2dCtx {
            input: x.clone(),
            weight: w.clone(),
            stride,
            pad,
        },
    ))
}

impl<T: Scalar> Conv2dCtx<T> {
    pub fn weight_shape(&self) -> &[usize] {
        self.weight.shape()
    }

    pub fn input_shape(&self) -> &[usize] {
        self.input.shape()
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Result<Conv2dGrads<T>> {
        let (batch, cout, g) =
            conv_geometry(self.input.shape(), self.weight.shape(), self.stride, self.pad)?;
        expect_shape(dy, &[batch, cout, g.oh, g.ow], "conv2d upstream")?;

        let (klen, p) = (g.patch_len(), g.out_len());
        let in_len = g.cin * g.h * g.w;
        let mut dx = self.input.zeros_like();
        let mut dw = self.weight.zeros_like();
        let mut db = Tensor::zeros(&[cout])?;
        let mut cols = vec![T::zero(); klen * p];
        let mut dcols = vec![T::zero(); klen * p];
        for n in 0..batch {
            let dy_n = &dy.data()[n * cout * p..(n + 1) * cout * p];
            g.im2col(&self.input.data()[n * in_len..(n + 1) * in_len], &mut cols);
            gemm_nt(cout, p, klen, dy_n, &cols, dw.data_mut());
            for (o, row) in dy_n.chunks_exact(p).enumerate() {
                db.data_mut()[o] += row.iter().copied().sum::<T>();
            }
            dcols.fill(T::zero());
            gemm_tn(klen, cout, p, self.weight.data(), dy_n, &mut dcols);
            g.col2im(&dcols, &mut dx.data_mut()[n * in_len..(n + 1) * in_len]);
        }
        Ok(Conv2dGrads {
            input: dx,
            weight: dw,
            bias: db,
        })
    }
}

// ---------------------------------------------------------------- maxpool2

#[derive(Clone, Debug)]
pub struct MaxPoolCtx {
    input_shape: Vec<usize>,
    /// Flat input index of the winning element for every output element.
    argmax: Vec<usize>,
}

/// Non-overlapping 2×2 max pooling. Ties go to the lowest flat input index.
pub fn maxpool2<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, MaxPoolCtx)> {
    let (b, c, h, w) = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!(
            "maxpool2 needs even height and width, got {h}x{w}; pad or resize the input"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[b, c, oh, ow])?;
    let mut argmax = Vec::with_capacity(out.len());
    let src = x.data();
    for plane in 0..b * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let top = base + 2 * i * w + 2 * j;
                let mut best = top;
                for cand in [top + 1, top + w, top + w + 1] {
                    if src[cand] > src[best] {
                        best = cand;
                    }
                }
                argmax.push(best);
            }
        }
    }
    for (o, &idx) in out.data_mut().iter_mut().zip(&argmax) {
        *o = src[idx];
    }
    Ok((
        out,
        MaxPoolCtx {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

impl MaxPoolCtx {
    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        if dy.len() != self.argmax.len() {
            return Err(Error::Dimension(format!(
                "maxpool2 upstream {:?} does not match pooled output of {:?}",
                dy.shape(),
                self.input_shape
            )));
        }
        let mut dx = Tensor::zeros(&self.input_shape)?;
        for (&g, &idx) in dy.data().iter().zip(&self.argmax) {
            dx.data_mut()[idx] += g;
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- relu

#[derive(Clone, Debug)]
pub struct ReluCtx {
    shape: Vec<usize>,
    /// `x > 0` per element; the gradient at exactly zero is zero.
    active: Vec<bool>,
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, ReluCtx) {
    let active: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
    let out = x.map(|v| if v > T::zero() { v } else { T::zero() });
    (
        out,
        ReluCtx {
            shape: x.shape().to_vec(),
            active,
        },
    )
}

impl ReluCtx {
    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        if dy.shape() != self.shape.as_slice() {
            return Err(Error::Dimension(format!(
                "relu upstream {:?} does not match input {:?}",
                dy.shape(),
                self.shape
            )));
        }
        let data = dy
            .data()
            .iter()
            .zip(&self.active)
            .map(|(&g, &on)| if on { g } else { T::zero() })
            .collect();
        Tensor::new(&self.shape, data)
    }
}

// ---------------------------------------------------------------- upsample2

#[derive(Clone, Debug)]
pub struct UpsampleCtx {
    input_shape: Vec<usize>,
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, UpsampleCtx)> {
    let (b, c, h, w) = x.dims4()?;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros(&[b, c, oh, ow])?;
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..b * c {
        for i in 0..oh {
            let s = &src[plane * h * w + (i / 2) * w..plane * h * w + (i / 2 + 1) * w];
            let d = &mut dst[plane * oh * ow + i * ow..plane * oh * ow + (i + 1) * ow];
            for (j, v) in d.iter_mut().enumerate() {
                *v = s[j / 2];
            }
        }
    }
    Ok((
        out,
        UpsampleCtx {
            input_shape: x.shape().to_vec(),
        },
    ))
}

impl UpsampleCtx {
    /// Sums each 2×2 upstream block into its source element.
    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, h, w) = (
            self.input_shape[0],
            self.input_shape[1],
            self.input_shape[2],
            self.input_shape[3],
        );
        expect_shape(dy, &[b, c, 2 * h, 2 * w], "upsample2 upstream")?;
        let mut dx = Tensor::zeros(&self.input_shape)?;
        let (oh, ow) = (2 * h, 2 * w);
        let g = dy.data();
        for plane in 0..b * c {
            for i in 0..h {
                for j in 0..w {
                    let top = plane * oh * ow + 2 * i * ow + 2 * j;
                    dx.data_mut()[plane * h * w + i * w + j] =
                        (g[top] + g[top + 1]) + (g[top + ow] + g[top + ow + 1]);
                }
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- concat

#[derive(Clone, Debug)]
pub struct ConcatCtx {
    a_shape: Vec<usize>,
    b_shape: Vec<usize>,
}

/// Concatenates along axis 1 (channels for rank-4 maps, features for rank-2
/// vectors), `a` first.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(Tensor<T>, ConcatCtx)> {
    let (sa, sb) = (a.shape(), b.shape());
    let same_rest = sa.len() == sb.len()
        && (sa.len() == 2 || sa.len() == 4)
        && sa[0] == sb[0]
        && sa[2..] == sb[2..];
    if !same_rest {
        return Err(Error::Dimension(format!(
            "concat_channels needs matching batch and spatial extents, got {sa:?} and {sb:?}"
        )));
    }
    let (ca, cb) = (sa[1], sb[1]);
    if ca == 0 || cb == 0 {
        return Err(Error::Dimension(
            "concat_channels inputs must each have at least one channel".into(),
        ));
    }
    let inner: usize = sa[2..].iter().product();
    let mut shape = sa.to_vec();
    shape[1] = ca + cb;
    let mut data = Vec::with_capacity(a.len() + b.len());
    for n in 0..sa[0] {
        data.extend_from_slice(&a.data()[n * ca * inner..(n + 1) * ca * inner]);
        data.extend_from_slice(&b.data()[n * cb * inner..(n + 1) * cb * inner]);
    }
    Ok((
        Tensor::new(&shape, data)?,
        ConcatCtx {
            a_shape: sa.to_vec(),
            b_shape: sb.to_vec(),
        },
    ))
}

impl ConcatCtx {
    /// Splits the upstream gradient at the first input's channel count.
    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let (ca, cb) = (self.a_shape[1], self.b_shape[1]);
        let mut shape = self.a_shape.clone();
        shape[1] = ca + cb;
        expect_shape(dy, &shape, "concat_channels upstream")?;
        let inner: usize = self.a_shape[2..].iter().product();
        let mut da = Vec::with_capacity(self.a_shape.iter().product());
        let mut db = Vec::with_capacity(self.b_shape.iter().product());
        for chunk in dy.data().chunks_exact((ca + cb) * inner) {
            da.extend_from_slice(&chunk[..ca * inner]);
            db.extend_from_slice(&chunk[ca * inner..]);
        }
        Ok((Tensor::new(&self.a_shape, da)?, Tensor::new(&self.b_shape, db)?))
    }
}

// ---------------------------------------------------------------- dense

#[derive(Clone, Debug)]
pub struct DenseCtx<T> {
    input: Tensor<T>,
    weight: Tensor<T>,
}

/// Gradients produced by [`DenseCtx::backward`].
#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// `x[B×F] · w[F×K] + bias[K]`, bias broadcast over the batch.
pub fn dense<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(Tensor<T>, DenseCtx<T>)> {
    let (b, f) = x.dims2()?;
    let (f2, k) = w.dims2()?;
    if f != f2 {
        return Err(Error::Dimension(format!(
            "dense input {:?} does not match weight {:?}",
            x.shape(),
            w.shape()
        )));
    }
    expect_shape(bias, &[k], "dense bias")?;
    let mut out = Tensor::zeros(&[b, k])?;
    for row in out.data_mut().chunks_exact_mut(k) {
        row.copy_from_slice(bias.data());
    }
    gemm_nn(b, f, k, x.data(), w.data(), out.data_mut());
    Ok((
        out,
        DenseCtx {
            input: x.clone(),
            weight: w.clone(),
        },
    ))
}

impl<T: Scalar> DenseCtx<T> {
    pub fn weight_shape(&self) -> &[usize] {
        self.weight.shape()
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Result<DenseGrads<T>> {
        let (b, f) = self.input.dims2()?;
        let k = self.weight.shape()[1];
        expect_shape(dy, &[b, k], "dense upstream")?;
        let mut dx = Tensor::zeros(&[b, f])?;
        gemm_nt(b, k, f, dy.data(), self.weight.data(), dx.data_mut());
        let mut dw = Tensor::zeros(&[f, k])?;
        gemm_tn(f, b, k, self.input.data(), dy.data(), dw.data_mut());
        let mut db = Tensor::zeros(&[k])?;
        for row in dy.data().chunks_exact(k) {
            for (acc, &g) in db.data_mut().iter_mut().zip(row) {
                *acc += g;
            }
        }
        Ok(DenseGrads {
            input: dx,
            weight: dw,
            bias: db,
        })
    }
}

// ---------------------------------------------------------------- global average pool

#[derive(Clone, Debug)]
pub struct GapCtx {
    input_shape: Vec<usize>,
}

/// Per-channel spatial mean: `[B×C×H×W] → [B×C]`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, GapCtx)> {
    let (b, c, h, w) = x.dims4()?;
    let area = T::from_usize(h * w).expect("spatial area fits scalar");
    let data = x
        .data()
        .chunks_exact(h * w)
        .map(|plane| plane.iter().copied().sum::<T>() / area)
        .collect();
    Ok((
        Tensor::new(&[b, c], data)?,
        GapCtx {
            input_shape: x.shape().to_vec(),
        },
    ))
}

impl GapCtx {
    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, h, w) = (
            self.input_shape[0],
            self.input_shape[1],
            self.input_shape[2],
            self.input_shape[3],
        );
        expect_shape(dy, &[b, c], "global_avg_pool upstream")?;
        let area = T::from_usize(h * w).expect("spatial area fits scalar");
        let mut data = Vec::with_capacity(b * c * h * w);
        for &g in dy.data() {
            data.extend(std::iter::repeat_n(g / area, h * w));
        }
        Tensor::new(&self.input_shape, data)
    }
}

// ---------------------------------------------------------------- softmax cross-entropy

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = logits.dims2()?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
///
/// The gradient is `(softmax − onehot) / B`.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<(T, Tensor<T>)> {
    let (b, k) = logits.dims2()?;
    if k < 2 {
        return Err(Error::Dimension(format!(
            "softmax_xent needs at least two classes, got {k}"
        )));
    }
    if targets.len() != b {
        return Err(Error::Dimension(format!(
            "softmax_xent has {b} logit rows but {} targets",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::Index(format!(
            "target class {bad} out of range for {k} classes"
        )));
    }
    let batch = T::from_usize(b).expect("batch size fits scalar");
    let mut grad = logits.clone();
    let mut loss = T::zero();
    for (row, &t) in grad.data_mut().chunks_exact_mut(k).zip(targets) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_total = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        loss += log_total - (row[t] - max);
        for v in row.iter_mut() {
            *v = (*v - max - log_total).exp();
        }
        row[t] -= T::one();
        for v in row.iter_mut() {
            *v /= batch;
        }
    }
    Ok((loss / batch, grad))
}

fn expect_shape<T: Scalar>(t: &Tensor<T>, shape: &[usize], what: &str) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::Dimension(format!(
            "{what} has shape {:?}, expected {shape:?}",
            t.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let eye = t(&[2, 2], &[1., 0., 0., 1.]);
        let m = t(&[2, 2], &[1., 2., 3., 4.]);
        assert_eq!(matmul(&eye, &m).unwrap().0, m);
        let (p, _) = matmul(&m, &t(&[2, 2], &[5., 6., 7., 8.])).unwrap();
        assert_eq!(p.data(), &[19., 22., 43., 50.]);
        let z = Tensor::<f64>::zeros(&[2, 3]).unwrap();
        let any = Tensor::from_f64(&[3, 4], &[1.5; 12]).unwrap();
        let (p, _) = matmul(&z, &any).unwrap();
        assert_eq!(p.shape(), &[2, 4]);
        assert!(p.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let err = matmul(&t(&[2, 3], &[0.; 6]), &t(&[2, 3], &[0.; 6])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3] x [2, 3]"), "{msg}");
    }

    #[test]
    fn conv2d_examples() {
        let x = t(&[1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let one = t(&[1, 1, 1, 1], &[1.]);
        let zero_b = t(&[1], &[0.]);
        assert_eq!(conv2d(&x, &one, &zero_b, 1, 0).unwrap().0, x);

        let ones = t(&[1, 1, 2, 2], &[1.; 4]);
        let (y, _) = conv2d(&x, &ones, &zero_b, 1, 0).unwrap();
        assert_eq!(y.data(), &[12., 16., 24., 28.]);

        let k3 = t(&[2, 1, 3, 3], &[0.1; 18]);
        let (y, _) = conv2d(&x, &k3, &t(&[2], &[0., 0.]), 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 2, 3, 3]);
    }

    #[test]
    fn conv2d_stride_floor_and_errors() {
        let x = Tensor::<f64>::zeros(&[1, 1, 5, 5]).unwrap();
        let k = Tensor::<f64>::zeros(&[1, 1, 2, 2]).unwrap();
        let b = Tensor::<f64>::zeros(&[1]).unwrap();
        let (y, _) = conv2d(&x, &k, &b, 2, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);

        let big = Tensor::<f64>::zeros(&[1, 1, 7, 7]).unwrap();
        assert!(matches!(
            conv2d(&x, &big, &b, 1, 0),
            Err(Error::Dimension(_))
        ));
        assert!(conv2d(&x, &big, &b, 1, 1).is_ok());
    }

    #[test]
    fn maxpool_examples() {
        let x = t(&[1, 1, 2, 2], &[1., 2., 3., 4.]);
        let (y, ctx) = maxpool2(&x).unwrap();
        assert_eq!(y.data(), &[4.]);
        let dx = ctx.backward(&t(&[1, 1, 1, 1], &[1.])).unwrap();
        assert_eq!(dx.data(), &[0., 0., 0., 1.]);

        let c = Tensor::<f64>::full(&[1, 2, 4, 4], 3.5).unwrap();
        let (y, _) = maxpool2(&c).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 3.5));

        assert!(matches!(
            maxpool2(&Tensor::<f64>::zeros(&[1, 1, 3, 4]).unwrap()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn maxpool_ties_route_to_lowest_index() {
        let x = t(&[1, 1, 2, 2], &[2., 2., 2., 2.]);
        let (_, ctx) = maxpool2(&x).unwrap();
        let dx = ctx.backward(&t(&[1, 1, 1, 1], &[1.])).unwrap();
        assert_eq!(dx.data(), &[1., 0., 0., 0.]);
        let x = t(&[1, 1, 2, 2], &[0., 5., 1., 5.]);
        let (_, ctx) = maxpool2(&x).unwrap();
        let dx = ctx.backward(&t(&[1, 1, 1, 1], &[1.])).unwrap();
        assert_eq!(dx.data(), &[0., 1., 0., 0.]);
    }

    #[test]
    fn relu_examples() {
        let x = t(&[3], &[-1., 2., 0.]);
        let (y, ctx) = relu(&x);
        assert_eq!(y.data(), &[0., 2., 0.]);
        let dx = ctx.backward(&t(&[3], &[1., 1., 1.])).unwrap();
        assert_eq!(dx.data(), &[0., 1., 0.]);
        let pos = t(&[4], &[0.5, 1., 2., 3.]);
        assert_eq!(relu(&pos).0, pos);
    }

    #[test]
    fn upsample_examples() {
        let (y, ctx) = upsample2(&t(&[1, 1, 1, 1], &[1.])).unwrap();
        assert_eq!(y.data(), &[1.; 4]);
        let dx = ctx.backward(&t(&[1, 1, 2, 2], &[1.; 4])).unwrap();
        assert_eq!(dx.data(), &[4.]);

        let (y, _) = upsample2(&t(&[1, 1, 2, 2], &[1., 2., 3., 4.])).unwrap();
        #[rustfmt::skip]
        let want = [
            1., 1., 2., 2.,
            1., 1., 2., 2.,
            3., 3., 4., 4.,
            3., 3., 4., 4.,
        ];
        assert_eq!(y.data(), &want);
    }

    #[test]
    fn concat_examples() {
        let a = Tensor::<f64>::full(&[1, 2, 4, 4], 1.).unwrap();
        let b = Tensor::<f64>::full(&[1, 3, 4, 4], 2.).unwrap();
        let (y, ctx) = concat_channels(&a, &b).unwrap();
        assert_eq!(y.shape(), &[1, 5, 4, 4]);
        let (da, db) = ctx.backward(&Tensor::full(&[1, 5, 4, 4], 1.).unwrap()).unwrap();
        assert_eq!(da, Tensor::full(&[1, 2, 4, 4], 1.).unwrap());
        assert_eq!(db, Tensor::full(&[1, 3, 4, 4], 1.).unwrap());

        let off = Tensor::<f64>::zeros(&[1, 3, 2, 4]).unwrap();
        assert!(matches!(concat_channels(&a, &off), Err(Error::Dimension(_))));
        // zero-channel inputs cannot even be constructed
        assert!(Tensor::<f64>::zeros(&[1, 0, 4, 4]).is_err());
    }

    #[test]
    fn dense_examples() {
        let x = t(&[1, 2], &[1., 2.]);
        let eye = t(&[2, 2], &[1., 0., 0., 1.]);
        let (y, _) = dense(&x, &eye, &t(&[2], &[0., 0.])).unwrap();
        assert_eq!(y, x);
        let (y, _) = dense(&x, &eye, &t(&[2], &[10., 20.])).unwrap();
        assert_eq!(y.data(), &[11., 22.]);
        let xs = t(&[3, 2], &[1., 2., -3., 4., 5., 6.]);
        let (y, _) = dense(&xs, &Tensor::zeros(&[2, 2]).unwrap(), &t(&[2], &[7., 8.])).unwrap();
        assert_eq!(y.data(), &[7., 8., 7., 8., 7., 8.]);
        assert!(dense(&xs, &t(&[3, 2], &[0.; 6]), &t(&[2], &[0.; 2])).is_err());
    }

    #[test]
    fn softmax_xent_examples() {
        let (loss, grad) = softmax_xent(&t(&[1, 3], &[0., 0., 0.]), &[0]).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        assert!((loss - 1.0986).abs() < 1e-4);
        let want = [-2. / 3., 1. / 3., 1. / 3.];
        for (g, w) in grad.data().iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        let (loss, _) = softmax_xent(&t(&[1, 3], &[1000., 0., 0.]), &[0]).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(matches!(
            softmax_xent(&t(&[1, 3], &[0.; 3]), &[3]),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn gap_mean_and_adjoint() {
        let x = t(&[1, 2, 2, 2], &[1., 2., 3., 4., 0., 0., 0., 8.]);
        let (y, ctx) = global_avg_pool(&x).unwrap();
        assert_eq!(y.data(), &[2.5, 2.]);
        let dx = ctx.backward(&t(&[1, 2], &[4., 8.])).unwrap();
        assert_eq!(dx.data(), &[1., 1., 1., 1., 2., 2., 2., 2.]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = t(&[1, 2, 4, 4], &(0..32).map(|i| (i as f64).sin()).collect::<Vec<_>>());
        let w = t(&[3, 2, 3, 3], &(0..54).map(|i| (i as f64).cos()).collect::<Vec<_>>());
        let (y, ctx) = conv2d(&x, &w, &t(&[3], &[0.1, 0.2, 0.3]), 1, 1).unwrap();
        let g = ctx.backward(&y.zeros_like()).unwrap();
        assert!(g.input.data().iter().chain(g.weight.data()).chain(g.bias.data()).all(|&v| v == 0.0));
        let (p, pctx) = maxpool2(&x).unwrap();
        assert!(pctx.backward(&p.zeros_like()).unwrap().data().iter().all(|&v| v == 0.0));
        let (u, uctx) = upsample2(&x).unwrap();
        assert!(uctx.backward(&u.zeros_like()).unwrap().data().iter().all(|&v| v == 0.0));
    }
}

//! Fully connected tanh network with a linear output layer.
//!
//! Besides plain evaluation, the network propagates first and per-axis
//! second input derivatives forward through every layer, so the last hidden
//! layer features `phi_j` come with exact gradients and Laplacians. A
//! reverse pass over the same tape yields parameter gradients of any loss
//! built from the output value and its input derivatives, which is what PINN
//! training needs.
//!
//! Batched evaluation lays out the points of every derivative *stream*
//! side by side: column `s * P + p` holds stream `s` of point `p`, where
//! stream 0 is the value, streams `1..=d` are `d/dx_i` and streams
//! `d+1..=2d` are `d^2/dx_i^2`. Each layer is then a single matrix product.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::PointSet;

/// Affine map `x -> W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Self {
        Layer { weights: DMatrix::zeros(rows, cols), biases: DVector::zeros(rows) }
    }
}

/// Parameter-shaped container used for gradients and optimiser moments.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradient {
    pub layers: Vec<Layer>,
}

impl NetworkGradient {
    pub fn zeros_like(net: &FeatureNetwork) -> Self {
        NetworkGradient {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &NetworkGradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.zip_apply(&b.weights, |w, g| *w += alpha * g);
            a.biases.axpy(alpha, &b.biases, 1.0);
        }
    }

    /// All entries, layer by layer, weights (column-major) before biases.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNetwork {
    dims: Vec<usize>,
    seed: u64,
    layers: Vec<Layer>,
}

/// Forward tape of a batched evaluation.
#[derive(Debug, Clone)]
pub struct Tape {
    n_points: usize,
    n_streams: usize,
    dim: usize,
    inputs: DMatrix<f64>,
    pre: Vec<DMatrix<f64>>,
    post: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

impl Tape {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn has_derivatives(&self) -> bool {
        self.n_streams > 1
    }

    fn block(&self, m: &DMatrix<f64>, stream: usize) -> Vec<f64> {
        let p = self.n_points;
        m.columns(stream * p, p).iter().copied().collect()
    }

    /// Network output at every point.
    pub fn output_values(&self) -> Vec<f64> {
        self.block(&self.output, 0)
    }

    /// `d u / d x_axis` at every point.
    pub fn output_gradient(&self, axis: usize) -> Vec<f64> {
        assert!(self.has_derivatives());
        self.block(&self.output, 1 + axis)
    }

    /// `d^2 u / d x_axis^2` at every point.
    pub fn output_second(&self, axis: usize) -> Vec<f64> {
        assert!(self.has_derivatives());
        self.block(&self.output, 1 + self.dim + axis)
    }

    /// Stream index of the first derivative along `axis`.
    pub fn gradient_stream(&self, axis: usize) -> usize {
        1 + axis
    }

    /// Stream index of the second derivative along `axis`.
    pub fn second_stream(&self, axis: usize) -> usize {
        1 + self.dim + axis
    }

    /// Feature matrix `P x (d_L + 1)` of one stream, with the constant
    /// feature in column 0 (one for values, zero for derivatives).
    pub fn feature_block(&self, stream: usize) -> DMatrix<f64> {
        assert!(stream < self.n_streams);
        let p = self.n_points;
        let last = self.post.last().expect("network has a hidden layer");
        let width = last.nrows();
        let mut out = DMatrix::zeros(p, width + 1);
        if stream == 0 {
            out.column_mut(0).fill(1.0);
        }
        out.columns_mut(1, width)
            .copy_from(&last.columns(stream * p, p).transpose());
        out
    }
}

fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl FeatureNetwork {
    /// Glorot-uniform weights and zero biases, deterministic in `seed`.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let lim = glorot_limit(fan_in, fan_out);
                // Row-major draw order keeps the persisted layout and the
                // random stream aligned.
                let mut weights = DMatrix::zeros(fan_out, fan_in);
                for i in 0..fan_out {
                    for j in 0..fan_in {
                        weights[(i, j)] = rng.random_range(-lim..lim);
                    }
                }
                Layer { weights, biases: DVector::zeros(fan_out) }
            })
            .collect();
        Ok(FeatureNetwork { dims: dims.to_vec(), seed, layers })
    }

    pub fn from_layers(dims: &[usize], seed: u64, layers: Vec<Layer>) -> Result<Self> {
        validate_dims(dims)?;
        if layers.len() != dims.len() - 1 {
            return Err(Error::InvalidArchitecture(format!(
                "{} layers for {} dims",
                layers.len(),
                dims.len()
            )));
        }
        for (l, w) in layers.iter().zip(dims.windows(2)) {
            if l.weights.shape() != (w[1], w[0]) || l.biases.len() != w[1] {
                return Err(Error::InvalidArchitecture(format!(
                    "layer shape {:?} does not match {}x{}",
                    l.weights.shape(),
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(FeatureNetwork { dims: dims.to_vec(), seed, layers })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Width `d_L` of the last hidden layer.
    pub fn n_features(&self) -> usize {
        self.dims[self.dims.len() - 2]
    }

    pub fn parameter_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Architecture string such as `1-30-30-1`.
    pub fn arch_tag(&self) -> String {
        self.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("-")
    }

    /// Coefficients `w_0..w_{d_L}` of the output as a combination of
    /// features, `w_0` being the output bias.
    pub fn output_weights(&self) -> DVector<f64> {
        let out = self.layers.last().unwrap();
        let mut w = DVector::zeros(self.n_features() + 1);
        w[0] = out.biases[0];
        w.rows_mut(1, self.n_features()).copy_from(&out.weights.row(0).transpose());
        w
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// Batched forward evaluation, optionally with input derivatives.
    pub fn forward_batch(&self, points: &PointSet, derivatives: bool) -> Result<Tape> {
        let d = self.input_dim();
        if points.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: points.dim() });
        }
        let p = points.len();
        let n_streams = if derivatives { 1 + 2 * d } else { 1 };
        let cols = p * n_streams;

        let mut inputs = DMatrix::zeros(d, cols);
        for (k, x) in points.iter().enumerate() {
            for (i, xi) in x.iter().enumerate() {
                inputs[(i, k)] = *xi;
                if derivatives {
                    inputs[(i, (1 + i) * p + k)] = 1.0;
                }
            }
        }

        let n_hidden = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(n_hidden);
        let mut post: Vec<DMatrix<f64>> = Vec::with_capacity(n_hidden);
        for layer in &self.layers[..n_hidden] {
            let prev = post.last().unwrap_or(&inputs);
            let mut a = &layer.weights * prev;
            for mut col in a.columns_mut(0, p).column_iter_mut() {
                col += &layer.biases;
            }
            let z = activate(&a, p, d, n_streams);
            pre.push(a);
            post.push(z);
        }

        let out_layer = self.layers.last().unwrap();
        let last = post.last().unwrap();
        let w = out_layer.weights.as_slice();
        let dot = |col: &[f64]| col.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let mut output = DMatrix::from_iterator(1, last.ncols(), last.as_slice().chunks_exact(w.len()).map(dot));
        let b = out_layer.biases[0];
        for v in output.columns_mut(0, p).iter_mut() {
            *v += b;
        }

        Ok(Tape { n_points: p, n_streams, dim: d, inputs, pre, post, output })
    }

    /// Reverse pass: gradient of `sum_c adj[c] * output[c]` over all tape
    /// columns with respect to every parameter.
    pub fn backward(&self, tape: &Tape, adj_output: &DMatrix<f64>) -> NetworkGradient {
        assert_eq!(adj_output.shape(), tape.output.shape());
        let p = tape.n_points;
        let d = tape.dim;
        let s_count = tape.n_streams;
        let n_hidden = self.layers.len() - 1;
        let mut grad = NetworkGradient::zeros_like(self);

        let out_layer = self.layers.last().unwrap();
        let last = tape.post.last().unwrap();
        let adj = adj_output.as_slice();
        let f = last.nrows();
        let mut gw = vec![0.0; f];
        for (col, a) in last.as_slice().chunks_exact(f).zip(adj) {
            for (g, v) in gw.iter_mut().zip(col) {
                *g += a * v;
            }
        }
        grad.layers[n_hidden].weights = DMatrix::from_row_slice(1, f, &gw);
        grad.layers[n_hidden].biases[0] = adj_output.columns(0, p).iter().sum();

        let w = out_layer.weights.as_slice();
        let mut adj_post = DMatrix::zeros(f, adj.len());
        for (col, a) in adj_post.as_mut_slice().chunks_exact_mut(f).zip(adj) {
            for (c, wj) in col.iter_mut().zip(w) {
                *c = a * wj;
            }
        }
        for l in (0..n_hidden).rev() {
            let adj_pre = activate_adjoint(&tape.pre[l], &tape.post[l], &adj_post, p, d, s_count);
            let prev = if l == 0 { &tape.inputs } else { &tape.post[l - 1] };
            grad.layers[l].weights = gemm_strided(&adj_pre, false, prev, true);
            grad.layers[l].biases = adj_pre.columns(0, p).column_sum();
            if l > 0 {
                adj_post = gemm_strided(&self.layers[l].weights, true, &adj_pre, false);
            }
        }
        grad
    }

    /// Network output `u_NN(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let pts = PointSet::from_flat(x.len(), x.to_vec())?;
        Ok(self.forward_batch(&pts, false)?.output[(0, 0)])
    }

    /// `[1, phi_1(x), ..., phi_{d_L}(x)]`.
    pub fn features(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let pts = PointSet::from_flat(x.len(), x.to_vec())?;
        let tape = self.forward_batch(&pts, false)?;
        Ok(tape.feature_block(0).row(0).transpose())
    }

    /// `(d_L + 1) x d_0` matrix of `d phi_j / d x_i`; row 0 is zero.
    pub fn feature_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let pts = PointSet::from_flat(x.len(), x.to_vec())?;
        let tape = self.forward_batch(&pts, true)?;
        let d = self.input_dim();
        let mut jac = DMatrix::zeros(self.n_features() + 1, d);
        for i in 0..d {
            jac.column_mut(i).copy_from(&tape.feature_block(tape.gradient_stream(i)).row(0).transpose());
        }
        Ok(jac)
    }

    /// `(d_L + 1) x d_0` matrix of `d^2 phi_j / d x_i^2`; row 0 is zero.
    pub fn feature_second_derivatives(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let pts = PointSet::from_flat(x.len(), x.to_vec())?;
        let tape = self.forward_batch(&pts, true)?;
        let d = self.input_dim();
        let mut sec = DMatrix::zeros(self.n_features() + 1, d);
        for i in 0..d {
            sec.column_mut(i).copy_from(&tape.feature_block(tape.second_stream(i)).row(0).transpose());
        }
        Ok(sec)
    }

    /// `Delta phi_j(x)` for every feature.
    pub fn feature_laplacian(&self, x: &[f64]) -> Result<DVector<f64>> {
        let sec = self.feature_second_derivatives(x)?;
        Ok(DVector::from_iterator(sec.nrows(), sec.row_iter().map(|r| r.sum())))
    }

    /// Gradient of `upstream * u_NN(x)` with respect to all parameters.
    pub fn parameter_gradient(&self, x: &[f64], upstream: f64) -> Result<NetworkGradient> {
        self.check_point(x)?;
        let pts = PointSet::from_flat(x.len(), x.to_vec())?;
        let tape = self.forward_batch(&pts, false)?;
        let adj = DMatrix::from_element(1, 1, upstream);
        Ok(self.backward(&tape, &adj))
    }

    /// Applies `self += alpha * step` parameter-wise.
    pub fn apply_update(&mut self, alpha: f64, step: &NetworkGradient) {
        for (a, b) in self.layers.iter_mut().zip(&step.layers) {
            a.weights.zip_apply(&b.weights, |w, g| *w += alpha * g);
            a.biases.axpy(alpha, &b.biases, 1.0);
        }
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            format: NETWORK_FORMAT.to_string(),
            version: 1,
            activation: "tanh".to_string(),
            layer_dims: self.dims.clone(),
            seed: self.seed,
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.weights.nrows(),
                    cols: l.weights.ncols(),
                    weights: l.weights.transpose().as_slice().to_vec(),
                    biases: l.biases.as_slice().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        if file.format != NETWORK_FORMAT || file.version != 1 {
            return Err(Error::Format(format!("unsupported network format {} v{}", file.format, file.version)));
        }
        if file.activation != "tanh" {
            return Err(Error::Format(format!("unsupported activation {}", file.activation)));
        }
        let layers = file
            .layers
            .into_iter()
            .map(|r| {
                if r.weights.len() != r.rows * r.cols || r.biases.len() != r.rows {
                    return Err(Error::Format("layer array length mismatch".into()));
                }
                Ok(Layer {
                    weights: DMatrix::from_row_slice(r.rows, r.cols, &r.weights),
                    biases: DVector::from_vec(r.biases),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureNetwork::from_layers(&file.layer_dims, file.seed, layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        FeatureNetwork::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the persisted representation.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

const NETWORK_FORMAT: &str = "pinnbasis-network";

/// On-disk network layout; weight matrices are stored row-major.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    version: u32,
    activation: String,
    layer_dims: Vec<usize>,
    seed: u64,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 {
        return Err(Error::InvalidArchitecture(format!(
            "need input, at least one hidden layer and output, got {dims:?}"
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArchitecture(format!("zero-width layer in {dims:?}")));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::InvalidArchitecture(format!("output width must be 1, got {dims:?}")));
    }
    if dims[0] > 2 {
        return Err(Error::InvalidArchitecture(format!("input dimension {} not supported", dims[0])));
    }
    Ok(())
}

/// tanh applied to the value stream, chain rule applied to the derivative
/// streams: `z' = s a'`, `z'' = s a'' + t a'^2` with `s = 1 - z^2`,
/// `t = -2 z s`.
fn activate(a: &DMatrix<f64>, p: usize, d: usize, n_streams: usize) -> DMatrix<f64> {
    let n = p * a.nrows();
    let mut z = DMatrix::zeros(a.nrows(), a.ncols());
    let av = a.as_slice();
    let zv = z.as_mut_slice();
    tanh_slice(&av[..n], &mut zv[..n]);
    if n_streams == 1 {
        return z;
    }
    let (value, derivs) = zv.split_at_mut(n);
    let s: Vec<f64> = value.iter().map(|z| 1.0 - z * z).collect();
    let t: Vec<f64> = value.iter().zip(&s).map(|(z, s)| -2.0 * z * s).collect();
    let (first, second) = derivs.split_at_mut(d * n);
    for i in 0..d {
        let a1 = &av[(1 + i) * n..(2 + i) * n];
        let a2 = &av[(1 + d + i) * n..(2 + d + i) * n];
        for ((z1, &a1), &s) in first[i * n..(i + 1) * n].iter_mut().zip(a1).zip(&s) {
            *z1 = s * a1;
        }
        for ((((z2, &a1), &a2), &s), &t) in second[i * n..(i + 1) * n].iter_mut().zip(a1).zip(a2).zip(&s).zip(&t) {
            *z2 = s * a2 + t * a1 * a1;
        }
    }
    z
}

/// Elementwise tanh, written branch-free so the loop vectorizes.
///
/// `tanh |x| = -m / (2 + m)` with `m = expm1(-2|x|)`, evaluated through a
/// Cody-Waite reduction by `ln 2` and a degree-13 Taylor polynomial.
pub fn tanh_slice(x: &[f64], out: &mut [f64]) {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const C: [f64; 14] = [
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5_040.0,
        1.0 / 40_320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    for (o, &v) in out.iter_mut().zip(x) {
        let y = -2.0 * v.abs().min(20.0);
        let shifted = y * LOG2E + SHIFT;
        let k = shifted - SHIFT;
        let r = (y - k * LN2_HI) - k * LN2_LO;
        let mut q = C[13];
        for c in C[1..13].iter().rev() {
            q = q * r + c;
        }
        let m = q * r;
        // k is integral in [-58, 0]; 2^k goes straight into the exponent field
        let scale = f64::from_bits(1f64.to_bits().wrapping_add(shifted.to_bits().wrapping_sub(SHIFT.to_bits()) << 52));
        let em1 = scale * m + (scale - 1.0);
        let t = (-em1 / (2.0 + em1)).copysign(v);
        *o = if v.is_nan() { v } else { t };
    }
}

/// `op(a) op(b)` with the transposes expressed as strides, so neither
/// operand is copied.
fn gemm_strided(a: &DMatrix<f64>, ta: bool, b: &DMatrix<f64>, tb: bool) -> DMatrix<f64> {
    let (m, k) = if ta { (a.ncols(), a.nrows()) } else { a.shape() };
    let (kb, n) = if tb { (b.ncols(), b.nrows()) } else { b.shape() };
    assert_eq!(k, kb, "inner dimensions differ");
    let (rsa, csa) = if ta { (a.nrows() as isize, 1) } else { (1, a.nrows() as isize) };
    let (rsb, csb) = if tb { (b.nrows() as isize, 1) } else { (1, b.nrows() as isize) };
    let mut c = DMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: the shapes and strides above address exactly the elements of
    // the column-major buffers of a, b and c.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// Adjoint of [`activate`].
fn activate_adjoint(
    a: &DMatrix<f64>,
    z: &DMatrix<f64>,
    adj_z: &DMatrix<f64>,
    p: usize,
    d: usize,
    n_streams: usize,
) -> DMatrix<f64> {
    let n = p * a.nrows();
    let mut adj_a = DMatrix::zeros(a.nrows(), a.ncols());
    let av = a.as_slice();
    let value = &z.as_slice()[..n];
    let gz = adj_z.as_slice();
    let (ga_value, ga_derivs) = adj_a.as_mut_slice().split_at_mut(n);
    let s: Vec<f64> = value.iter().map(|z| 1.0 - z * z).collect();
    let mut adj_value = gz[..n].to_vec();
    if n_streams > 1 {
        let t: Vec<f64> = value.iter().zip(&s).map(|(z, s)| -2.0 * z * s).collect();
        let mut adj_s = vec![0.0; n];
        let mut adj_t = vec![0.0; n];
        let (ga_first, ga_second) = ga_derivs.split_at_mut(d * n);
        for i in 0..d {
            let r1 = (1 + i) * n..(2 + i) * n;
            let r2 = (1 + d + i) * n..(2 + d + i) * n;
            let (a1, a2, g1, g2) = (&av[r1.clone()], &av[r2.clone()], &gz[r1], &gz[r2]);
            let ga1 = &mut ga_first[i * n..(i + 1) * n];
            let ga2 = &mut ga_second[i * n..(i + 1) * n];
            for m in 0..n {
                ga2[m] = g2[m] * s[m];
                ga1[m] = g1[m] * s[m] + 2.0 * g2[m] * t[m] * a1[m];
                adj_s[m] += g1[m] * a1[m] + g2[m] * a2[m];
                adj_t[m] += g2[m] * a1[m] * a1[m];
            }
        }
        // ds/dz = -2z, dt/dz = 6z^2 - 2
        for m in 0..n {
            let zz = value[m];
            adj_value[m] += -2.0 * zz * adj_s[m] + (6.0 * zz * zz - 2.0) * adj_t[m];
        }
    }
    for ((ga, adj), s) in ga_value.iter_mut().zip(&adj_value).zip(&s) {
        *ga = adj * s;
    }
    adj_a
}

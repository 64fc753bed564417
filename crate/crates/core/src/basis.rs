//! Hierarchical orthonormal bases.
//!
//! [`OrthonormalBasis`] is extracted from the last hidden layer of a trained
//! network: the features are sampled on a quadrature rule with square-root
//! weights, the resulting matrix is decomposed as `Phi = Q S V^T`, and
//!
//! ```text
//! q_k(x) = (1 / S_k) * sum_l phi_l(x) V_lk
//! ```
//!
//! gives functions that are orthonormal in the discrete inner product of
//! the rule and can be evaluated, with exact derivatives, anywhere.
//!
//! Evaluating the sum in floating point loses orthonormality in proportion
//! to `S_0 / S_k`, so one Cholesky reorthogonalization pass on the build
//! rule follows. The correction is upper triangular and therefore keeps the
//! hierarchy: `span{q_0..q_r}` is unchanged for every `r`.
//!
//! [`LegendreBasis`] provides normalised Legendre polynomials on an
//! interval behind the same [`SpectralBasis`] interface; it serves as the
//! polynomial control in experiments and tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::FeatureNetwork;
use crate::quadrature::{Domain, PointSet, QuadratureRule};

/// Relative singular-value cut-off below which basis functions are dropped.
pub const DROP_TOLERANCE: f64 = 1e-13;

/// Values and derivatives of the first `count` basis functions at a set of
/// points; every matrix is `points x count`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub values: DMatrix<f64>,
    pub gradients: Vec<DMatrix<f64>>,
    pub seconds: Vec<DMatrix<f64>>,
}

impl BasisTable {
    pub fn count(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = self.seconds[0].clone();
        for s in &self.seconds[1..] {
            lap += s;
        }
        lap
    }

    /// `sum_a n_a(x_i) d q_k / d x_a` at every point.
    pub fn normal_derivative(&self, normals: &PointSet) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_points(), self.count());
        for (a, g) in self.gradients.iter().enumerate() {
            for i in 0..self.n_points() {
                let na = normals.point(i)[a];
                if na != 0.0 {
                    for k in 0..self.count() {
                        out[(i, k)] += na * g[(i, k)];
                    }
                }
            }
        }
        out
    }

    /// Leading `count` columns.
    pub fn truncated(&self, count: usize) -> BasisTable {
        assert!(count <= self.count());
        let cut = |m: &DMatrix<f64>| m.columns(0, count).into_owned();
        BasisTable {
            values: cut(&self.values),
            gradients: self.gradients.iter().map(cut).collect(),
            seconds: self.seconds.iter().map(cut).collect(),
        }
    }
}

/// A finite hierarchical basis that can be evaluated with derivatives.
pub trait SpectralBasis {
    /// Spatial dimension of the points it accepts.
    fn dim(&self) -> usize;

    /// Number of admissible basis functions; ranks `r` run over
    /// `0..max_count()`.
    fn max_count(&self) -> usize;

    /// Tabulates the first `count` functions and derivatives at `points`.
    fn tabulate(&self, points: &PointSet, count: usize) -> Result<BasisTable>;

    /// Short description for reports.
    fn label(&self) -> String;

    fn check_rank(&self, r: usize) -> Result<()> {
        if r >= self.max_count() {
            return Err(Error::RankOutOfRange { r, available: self.max_count() });
        }
        Ok(())
    }

    /// `[q_0(x), ..., q_r(x)]`
    fn eval(&self, x: &[f64], r: usize) -> Result<DVector<f64>> {
        self.check_rank(r)?;
        let t = self.tabulate(&PointSet::from_flat(x.len(), x.to_vec())?, r + 1)?;
        Ok(t.values.row(0).transpose())
    }

    /// `(r + 1) x d` matrix of basis gradients.
    fn eval_gradient(&self, x: &[f64], r: usize) -> Result<DMatrix<f64>> {
        self.check_rank(r)?;
        let t = self.tabulate(&PointSet::from_flat(x.len(), x.to_vec())?, r + 1)?;
        let mut g = DMatrix::zeros(r + 1, x.len());
        for (a, ga) in t.gradients.iter().enumerate() {
            g.column_mut(a).copy_from(&ga.row(0).transpose());
        }
        Ok(g)
    }

    /// `[Delta q_0(x), ..., Delta q_r(x)]`
    fn eval_laplacian(&self, x: &[f64], r: usize) -> Result<DVector<f64>> {
        self.check_rank(r)?;
        let t = self.tabulate(&PointSet::from_flat(x.len(), x.to_vec())?, r + 1)?;
        Ok(t.laplacian().row(0).transpose())
    }
}

/// `Phi_ij = sqrt(w_i) phi_j(x_i)` over the interior nodes of `rule`.
pub fn assemble_feature_matrix(net: &FeatureNetwork, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    let tape = net.forward_batch(&rule.interior_nodes, false)?;
    let mut phi = tape.feature_block(0);
    for (i, w) in rule.interior_weights.iter().enumerate() {
        let sw = w.sqrt();
        phi.row_mut(i).scale_mut(sw);
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature matrix"));
    }
    Ok(phi)
}

/// Thin SVD with singular values sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct FeatureSvd {
    pub left: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub right: DMatrix<f64>,
}

pub fn svd_sorted(phi: &DMatrix<f64>) -> Result<FeatureSvd> {
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to SVD"));
    }
    let svd = phi.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::SvdFailed),
    };
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let n = order.len();
    let mut left = DMatrix::zeros(u.nrows(), n);
    let mut right = DMatrix::zeros(vt.ncols(), n);
    let mut sv = DVector::zeros(n);
    for (k, &src) in order.iter().enumerate() {
        left.set_column(k, &u.column(src));
        right.set_column(k, &vt.row(src).transpose());
        sv[k] = s[src];
    }
    Ok(FeatureSvd { left, singular_values: sv, right })
}

/// Basis extracted from the last hidden layer of a network.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    network: FeatureNetwork,
    domain: Domain,
    order: usize,
    singular_values: DVector<f64>,
    right_vectors: DMatrix<f64>,
    r_max: usize,
    /// Upper triangular `R^{-1}` from `Q^T W Q = R^T R` on the build rule.
    correction: DMatrix<f64>,
}

impl OrthonormalBasis {
    /// Samples the features on `rule` and extracts the basis.
    pub fn build(net: &FeatureNetwork, rule: &QuadratureRule) -> Result<Self> {
        let phi = assemble_feature_matrix(net, rule)?;
        Ok(Self::from_feature_matrix(net, rule, &phi)?.0)
    }

    /// Extracts the basis from a precomputed feature matrix; also returns
    /// the decomposition for inspection.
    pub fn from_feature_matrix(
        net: &FeatureNetwork,
        rule: &QuadratureRule,
        phi: &DMatrix<f64>,
    ) -> Result<(Self, FeatureSvd)> {
        let cols = net.n_features() + 1;
        if phi.ncols() != cols {
            return Err(Error::DimensionMismatch { expected: cols, got: phi.ncols() });
        }
        if phi.nrows() < cols {
            return Err(Error::InvalidConfig(format!(
                "{} quadrature nodes cannot resolve {} features",
                phi.nrows(),
                cols
            )));
        }
        let svd = svd_sorted(phi)?;
        let basis = Self::from_factors(
            net.clone(),
            rule,
            svd.singular_values.clone(),
            svd.right.clone(),
        )?;
        Ok((basis, svd))
    }

    fn from_factors(
        network: FeatureNetwork,
        rule: &QuadratureRule,
        singular_values: DVector<f64>,
        right_vectors: DMatrix<f64>,
    ) -> Result<Self> {
        let s0 = singular_values[0];
        if !(s0 > 0.0) {
            return Err(Error::SvdFailed);
        }
        let r_max = singular_values.iter().filter(|&&s| s > DROP_TOLERANCE * s0).count();
        let mut basis = OrthonormalBasis {
            network,
            domain: rule.domain,
            order: rule.order,
            singular_values,
            right_vectors,
            r_max,
            correction: DMatrix::identity(r_max, r_max),
        };
        let q = basis.tabulate(&rule.interior_nodes, r_max)?.values;
        let mut wq = q.clone();
        for (mut row, w) in wq.row_iter_mut().zip(&rule.interior_weights) {
            row.scale_mut(*w);
        }
        let gram = q.transpose() * wq;
        let chol = gram.cholesky().ok_or(Error::SvdFailed)?;
        let upper = chol.l().transpose();
        basis.correction = upper
            .solve_upper_triangular(&DMatrix::identity(r_max, r_max))
            .ok_or(Error::SvdFailed)?;
        Ok(basis)
    }

    pub fn network(&self) -> &FeatureNetwork {
        &self.network
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Order of the rule the basis was built on.
    pub fn build_order(&self) -> usize {
        self.order
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right_vectors
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// `(d_L + 1) x count` change of basis `V diag(1/S)`, before the
    /// reorthogonalization.
    pub fn change_of_basis(&self, count: usize) -> DMatrix<f64> {
        let mut c = self.right_vectors.columns(0, count).into_owned();
        for k in 0..count {
            c.column_mut(k).unscale_mut(self.singular_values[k]);
        }
        c
    }

    /// Leading `count x count` block of the triangular reorthogonalization.
    pub fn correction(&self, count: usize) -> DMatrix<f64> {
        self.correction.view((0, 0), (count, count)).into_owned()
    }

    pub fn to_json(&self) -> String {
        let n = self.right_vectors.nrows();
        let file = BasisFile {
            format: BASIS_FORMAT.to_string(),
            version: 1,
            network_sha256: self.network.fingerprint(),
            layer_dims: self.network.dims().to_vec(),
            domain: self.domain,
            order: self.order,
            drop_tolerance: DROP_TOLERANCE,
            r_max: self.r_max,
            singular_values: self.singular_values.as_slice().to_vec(),
            right_vectors: self.right_vectors.transpose().as_slice().to_vec(),
            size: n,
        };
        serde_json::to_string_pretty(&file).expect("basis serialises")
    }

    /// Restores a basis saved with [`to_json`](Self::to_json); `network`
    /// must be the one it was extracted from.
    pub fn from_json(text: &str, network: &FeatureNetwork) -> Result<Self> {
        let file: BasisFile = serde_json::from_str(text)?;
        if file.format != BASIS_FORMAT || file.version != 1 {
            return Err(Error::Format(format!("unsupported basis format {} v{}", file.format, file.version)));
        }
        if file.network_sha256 != network.fingerprint() {
            return Err(Error::Format("basis was extracted from a different network".into()));
        }
        let n = file.size;
        if n != network.n_features() + 1 || file.singular_values.len() != n || file.right_vectors.len() != n * n {
            return Err(Error::Format("basis array sizes do not match the network".into()));
        }
        let rule = QuadratureRule::new(file.domain, file.order)?;
        let basis = Self::from_factors(
            network.clone(),
            &rule,
            DVector::from_vec(file.singular_values),
            DMatrix::from_row_slice(n, n, &file.right_vectors),
        )?;
        if basis.r_max != file.r_max {
            return Err(Error::Format("stored admissible rank is inconsistent".into()));
        }
        Ok(basis)
    }
}

const BASIS_FORMAT: &str = "pinnbasis-basis";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisFile {
    format: String,
    version: u32,
    network_sha256: String,
    layer_dims: Vec<usize>,
    domain: Domain,
    order: usize,
    drop_tolerance: f64,
    r_max: usize,
    size: usize,
    singular_values: Vec<f64>,
    /// Row-major `size x size`.
    right_vectors: Vec<f64>,
}

const TABULATE_CHUNK: usize = 2048;

impl SpectralBasis for OrthonormalBasis {
    fn dim(&self) -> usize {
        self.network.input_dim()
    }

    fn max_count(&self) -> usize {
        self.r_max
    }

    fn tabulate(&self, points: &PointSet, count: usize) -> Result<BasisTable> {
        if count == 0 || count > self.r_max {
            return Err(Error::RankOutOfRange { r: count.saturating_sub(1), available: self.r_max });
        }
        let d = self.dim();
        if points.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: points.dim() });
        }
        // always mapped at full width, so leading columns never depend on count
        let cob = self.change_of_basis(self.r_max);
        let n = points.len();
        let mut table = BasisTable {
            values: DMatrix::zeros(n, count),
            gradients: vec![DMatrix::zeros(n, count); d],
            seconds: vec![DMatrix::zeros(n, count); d],
        };
        let mut start = 0;
        while start < n {
            let len = TABULATE_CHUNK.min(n - start);
            let chunk = PointSet::from_flat(d, points.as_flat()[start * d..(start + len) * d].to_vec())?;
            let tape = self.network.forward_batch(&chunk, true)?;
            let map = |stream: usize| {
                let full = (tape.feature_block(stream) * &cob) * &self.correction;
                full.columns(0, count).into_owned()
            };
            table.values.rows_mut(start, len).copy_from(&map(0));
            for a in 0..d {
                table.gradients[a].rows_mut(start, len).copy_from(&map(tape.gradient_stream(a)));
                table.seconds[a].rows_mut(start, len).copy_from(&map(tape.second_stream(a)));
            }
            start += len;
        }
        if table.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("basis evaluation"));
        }
        Ok(table)
    }

    fn label(&self) -> String {
        format!("network {}", self.network.arch_tag())
    }
}

/// Legendre polynomials on `[a, b]`, normalised to unit `L^2` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreBasis {
    pub a: f64,
    pub b: f64,
    pub degree: usize,
}

impl LegendreBasis {
    pub fn new(domain: &Domain, degree: usize) -> Result<Self> {
        match *domain {
            Domain::Interval { a, b } => Ok(LegendreBasis { a, b, degree }),
            _ => Err(Error::InvalidDomain("Legendre basis is only available on intervals".into())),
        }
    }

    /// Nitsche penalty at least `default` that keeps the Nitsche form
    /// coercive for this degree: `4 (N + 1)^2 / (b - a)`, from the inverse
    /// trace inequality `|p'(b)|^2 + |p'(a)|^2 <= (2 N^2 / (b - a)) ||p'||^2`.
    pub fn coercive_penalty(&self, default: f64) -> f64 {
        let n = (self.degree + 1) as f64;
        default.max(4.0 * n * n / (self.b - self.a))
    }
}

impl SpectralBasis for LegendreBasis {
    fn dim(&self) -> usize {
        1
    }

    fn max_count(&self) -> usize {
        self.degree + 1
    }

    fn tabulate(&self, points: &PointSet, count: usize) -> Result<BasisTable> {
        if count == 0 || count > self.max_count() {
            return Err(Error::RankOutOfRange { r: count.saturating_sub(1), available: self.max_count() });
        }
        if points.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: points.dim() });
        }
        let n = points.len();
        let h = self.b - self.a;
        let jac = 2.0 / h;
        let mut values = DMatrix::zeros(n, count);
        let mut grads = DMatrix::zeros(n, count);
        let mut secs = DMatrix::zeros(n, count);
        let mut p = vec![0.0; count];
        let mut dp = vec![0.0; count];
        let mut ddp = vec![0.0; count];
        for (i, x) in points.iter().enumerate() {
            let t = (2.0 * x[0] - self.a - self.b) / h;
            p[0] = 1.0;
            dp[0] = 0.0;
            ddp[0] = 0.0;
            if count > 1 {
                p[1] = t;
                dp[1] = 1.0;
                ddp[1] = 0.0;
            }
            for k in 1..count.saturating_sub(1) {
                let kf = k as f64;
                p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
                dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
                ddp[k + 1] = ddp[k - 1] + (2.0 * kf + 1.0) * dp[k];
            }
            for k in 0..count {
                let norm = ((2.0 * k as f64 + 1.0) / h).sqrt();
                values[(i, k)] = norm * p[k];
                grads[(i, k)] = norm * jac * dp[k];
                secs[(i, k)] = norm * jac * jac * ddp[k];
            }
        }
        Ok(BasisTable { values, gradients: vec![grads], seconds: vec![secs] })
    }

    fn label(&self) -> String {
        format!("legendre degree {}", self.degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;

    fn interval() -> Domain {
        Domain::Interval { a: -1.0, b: 1.0 }
    }

    #[test]
    fn zero_network_feature_matrix() {
        let dims = [1, 4, 1];
        let layers = vec![
            Layer { weights: DMatrix::zeros(4, 1), biases: DVector::zeros(4) },
            Layer { weights: DMatrix::zeros(1, 4), biases: DVector::zeros(1) },
        ];
        let net = FeatureNetwork::from_layers(&dims, 0, layers).unwrap();
        let rule = QuadratureRule::new(interval(), 10).unwrap();
        let phi = assemble_feature_matrix(&net, &rule).unwrap();
        for i in 0..10 {
            assert_eq!(phi[(i, 0)], rule.interior_weights[i].sqrt());
            assert!(phi.row(i).iter().skip(1).all(|&v| v == 0.0));
        }
        let s: f64 = phi.column(0).iter().map(|v| v * v).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn identity_matrix_has_unit_singular_values() {
        let svd = svd_sorted(&DMatrix::identity(5, 5)).unwrap();
        assert!(svd.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn duplicate_columns_reduce_rank() {
        // Two identical first-layer neurons feed identical last-layer
        // features.
        let mut net = FeatureNetwork::new(&[1, 3, 1], 2).unwrap();
        let w = net.layers()[0].weights[(0, 0)];
        net.layers_mut()[0].weights[(1, 0)] = w;
        let rule = QuadratureRule::new(interval(), 20).unwrap();
        let basis = OrthonormalBasis::build(&net, &rule).unwrap();
        assert!(basis.r_max() < 4);
    }

    #[test]
    fn singular_values_sorted_and_v_orthogonal() {
        let net = FeatureNetwork::new(&[2, 10, 12, 1], 4).unwrap();
        let rule = QuadratureRule::new(Domain::LShape, 8).unwrap();
        let basis = OrthonormalBasis::build(&net, &rule).unwrap();
        let s = basis.singular_values();
        assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let vtv = basis.right_vectors().transpose() * basis.right_vectors();
        assert!((vtv - DMatrix::identity(13, 13)).amax() < 1e-12);
    }

    #[test]
    fn rank_errors() {
        let net = FeatureNetwork::new(&[1, 5, 1], 0).unwrap();
        let rule = QuadratureRule::new(interval(), 20).unwrap();
        let basis = OrthonormalBasis::build(&net, &rule).unwrap();
        assert!(basis.eval(&[0.0], basis.r_max()).is_err());
        assert!(basis.eval(&[0.0], basis.r_max() - 1).is_ok());
        assert!(basis.eval(&[0.0, 1.0], 0).is_err());
    }

    #[test]
    fn too_few_nodes() {
        let net = FeatureNetwork::new(&[1, 30, 1], 0).unwrap();
        let rule = QuadratureRule::new(interval(), 10).unwrap();
        assert!(OrthonormalBasis::build(&net, &rule).is_err());
    }

    #[test]
    fn legendre_is_orthonormal_on_mapped_interval() {
        let d = Domain::Interval { a: 0.5, b: 3.0 };
        let leg = LegendreBasis::new(&d, 12).unwrap();
        let rule = QuadratureRule::new(d, 20).unwrap();
        let t = leg.tabulate(&rule.interior_nodes, 13).unwrap();
        let mut g = t.values.clone();
        for (i, w) in rule.interior_weights.iter().enumerate() {
            g.row_mut(i).scale_mut(w.sqrt());
        }
        assert!((g.transpose() * g - DMatrix::identity(13, 13)).amax() < 1e-13);
        assert!(LegendreBasis::new(&Domain::LShape, 3).is_err());
    }

    #[test]
    fn legendre_derivatives_closed_form() {
        // P_2 = (3t^2 - 1)/2, normalised by sqrt(5/2) on (-1,1).
        let leg = LegendreBasis::new(&interval(), 4).unwrap();
        let x = 0.3;
        let n = (2.5f64).sqrt();
        assert!((leg.eval(&[x], 2).unwrap()[2] - n * (3.0 * x * x - 1.0) / 2.0).abs() < 1e-15);
        assert!((leg.eval_gradient(&[x], 2).unwrap()[(2, 0)] - n * 3.0 * x).abs() < 1e-14);
        assert!((leg.eval_laplacian(&[x], 2).unwrap()[2] - n * 3.0).abs() < 1e-14);
    }
}

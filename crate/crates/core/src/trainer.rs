//! PINN training of a [`FeatureNetwork`] on a Poisson problem with Adam.

use std::io::Write;
use std::path::Path;

use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FeatureNetwork, NetworkGradient};
use crate::nitsche::PoissonProblem;
use crate::quadrature::{Domain, PointSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub n_collocation: usize,
    pub n_boundary: usize,
    pub boundary_weight: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for a domain: 2000 interior points in 1D, 8000 in 2D.
    pub fn for_domain(domain: &Domain) -> Self {
        let (n_collocation, n_boundary, epochs) = match domain.dim() {
            1 => (2000, 2, 5000),
            _ => (8000, 800, 10000),
        };
        TrainConfig {
            learning_rate: 1e-3,
            epochs,
            n_collocation,
            n_boundary,
            boundary_weight: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.n_collocation == 0 || self.n_boundary == 0 {
            return bad("point counts must be at least 1");
        }
        if !(self.boundary_weight > 0.0 && self.boundary_weight.is_finite()) {
            return bad("boundary_weight must be positive");
        }
        Ok(())
    }
}

/// Fixed training points with the problem data pre-evaluated on them.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub collocation: PointSet,
    pub boundary: PointSet,
    forcing: Vec<f64>,
    diffusion: Vec<f64>,
    diffusion_grad: Vec<Vec<f64>>,
    boundary_data: Vec<f64>,
}

impl TrainingSet {
    pub fn new(problem: &PoissonProblem, collocation: PointSet, boundary: PointSet) -> Result<Self> {
        if collocation.is_empty() || boundary.is_empty() {
            return Err(Error::InvalidConfig("empty training point set".into()));
        }
        let d = problem.domain.dim();
        if collocation.dim() != d || boundary.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: collocation.dim() });
        }
        Ok(TrainingSet {
            forcing: collocation.iter().map(|x| (problem.forcing)(x)).collect(),
            diffusion: collocation.iter().map(|x| problem.diffusion.value(x)).collect(),
            diffusion_grad: collocation.iter().map(|x| problem.diffusion.gradient(x)).collect(),
            boundary_data: boundary.iter().map(|x| (problem.boundary)(x)).collect(),
            collocation,
            boundary,
        })
    }

    /// Uniform random interior points (rejection sampling on non-box
    /// domains) and boundary points distributed by edge length. In 1D the
    /// boundary set is the two end points.
    pub fn sample(problem: &PoissonProblem, n_collocation: usize, n_boundary: usize, rng: &mut impl Rng) -> Result<Self> {
        let domain = &problem.domain;
        let d = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let mut collocation = PointSet::new(d);
        let mut x = vec![0.0; d];
        while collocation.len() < n_collocation {
            for i in 0..d {
                x[i] = rng.random_range(lo[i]..hi[i]);
            }
            if domain.contains(&x) {
                collocation.push(&x);
            }
        }
        let mut boundary = PointSet::new(d);
        match *domain {
            Domain::Interval { a, b } => {
                boundary.push(&[a]);
                boundary.push(&[b]);
            }
            _ => {
                let edges = domain.edges();
                let total: f64 = edges.iter().map(|e| e.length()).sum();
                for _ in 0..n_boundary {
                    let mut pick = rng.random_range(0.0..total);
                    let mut chosen = edges[edges.len() - 1];
                    for e in &edges {
                        if pick < e.length() {
                            chosen = *e;
                            break;
                        }
                        pick -= e.length();
                    }
                    boundary.push(&chosen.point_at(rng.random_range(0.0..1.0)));
                }
            }
        }
        TrainingSet::new(problem, collocation, boundary)
    }
}

/// PINN loss on fixed point sets:
/// `mean (-div(k grad u) - f)^2 + lambda_b * mean (u - g)^2`.
pub fn pinn_loss(net: &FeatureNetwork, set: &TrainingSet, boundary_weight: f64) -> Result<f64> {
    Ok(loss_terms(net, set, boundary_weight, false)?.0)
}

/// Loss together with its parameter gradient.
pub fn pinn_loss_and_gradient(
    net: &FeatureNetwork,
    set: &TrainingSet,
    boundary_weight: f64,
) -> Result<(f64, NetworkGradient)> {
    let (loss, grad) = loss_terms(net, set, boundary_weight, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

/// Collocation points per forward/backward pass; keeps the tapes cache-sized.
const CHUNK: usize = 512;

fn loss_terms(
    net: &FeatureNetwork,
    set: &TrainingSet,
    boundary_weight: f64,
    with_grad: bool,
) -> Result<(f64, Option<NetworkGradient>)> {
    let d = net.input_dim();
    let n_streams = 1 + 2 * d;
    let p_total = set.collocation.len();
    let flat = set.collocation.as_flat();
    let mut sum_sq = 0.0;
    let mut grad = with_grad.then(|| NetworkGradient::zeros_like(net));
    for start in (0..p_total).step_by(CHUNK) {
        let end = (start + CHUNK).min(p_total);
        let chunk = PointSet::from_flat(d, flat[start * d..end * d].to_vec())?;
        let tape = net.forward_batch(&chunk, true)?;
        let p = end - start;
        let grads: Vec<Vec<f64>> = (0..d).map(|i| tape.output_gradient(i)).collect();
        let seconds: Vec<Vec<f64>> = (0..d).map(|i| tape.output_second(i)).collect();
        let residual: Vec<f64> = (0..p)
            .map(|k| {
                let g = start + k;
                let lap: f64 = seconds.iter().map(|s| s[k]).sum();
                let adv: f64 = (0..d).map(|i| set.diffusion_grad[g][i] * grads[i][k]).sum();
                -set.diffusion[g] * lap - adv - set.forcing[g]
            })
            .collect();
        sum_sq += residual.iter().map(|r| r * r).sum::<f64>();
        if let Some(grad) = grad.as_mut() {
            let mut adj = DMatrix::zeros(1, p * n_streams);
            for k in 0..p {
                let g = start + k;
                let c = 2.0 * residual[k] / p_total as f64;
                for i in 0..d {
                    adj[(0, (1 + i) * p + k)] = -c * set.diffusion_grad[g][i];
                    adj[(0, (1 + d + i) * p + k)] = -c * set.diffusion[g];
                }
            }
            grad.add_scaled(1.0, &net.backward(&tape, &adj));
        }
    }
    let interior = sum_sq / p_total as f64;

    let btape = net.forward_batch(&set.boundary, false)?;
    let ub = btape.output_values();
    let pb = ub.len();
    let mismatch: Vec<f64> = ub.iter().zip(&set.boundary_data).map(|(u, g)| u - g).collect();
    let bterm = mismatch.iter().map(|m| m * m).sum::<f64>() / pb as f64;
    let loss = interior + boundary_weight * bterm;

    if let Some(grad) = grad.as_mut() {
        let badj = DMatrix::from_iterator(1, pb, mismatch.iter().map(|m| 2.0 * boundary_weight * m / pb as f64));
        grad.add_scaled(1.0, &net.backward(&btape, &badj));
    }
    Ok((loss, grad))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: NetworkGradient,
    v: NetworkGradient,
}

impl Adam {
    pub fn new(net: &FeatureNetwork, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: NetworkGradient::zeros_like(net),
            v: NetworkGradient::zeros_like(net),
        }
    }

    pub fn update(&mut self, net: &mut FeatureNetwork, grad: &NetworkGradient) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grad.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            let gs = g.weights.iter().chain(g.biases.iter());
            let ms = m.weights.iter_mut().chain(m.biases.iter_mut());
            let vs = v.weights.iter_mut().chain(v.biases.iter_mut());
            for (((p, g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: FeatureNetwork,
    /// Loss before each epoch's update.
    pub loss_history: Vec<f64>,
}

/// Full-batch Adam on points drawn once from `config.seed`.
pub fn train_adam(net: &FeatureNetwork, problem: &PoissonProblem, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if net.input_dim() != problem.domain.dim() {
        return Err(Error::DimensionMismatch { expected: problem.domain.dim(), got: net.input_dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let set = TrainingSet::sample(problem, config.n_collocation, config.n_boundary, &mut rng)?;
    let mut network = net.clone();
    let mut adam = Adam::new(&network, config.learning_rate);
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad) = pinn_loss_and_gradient(&network, &set, config.boundary_weight)?;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        loss_history.push(loss);
        if epoch % 500 == 0 {
            debug!("epoch {epoch}: loss {loss:.6e}");
        }
        adam.update(&mut network, &grad);
    }
    Ok(TrainOutcome { network, loss_history })
}

pub fn write_loss_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,loss")?;
    for (i, l) in history.iter().enumerate() {
        writeln!(out, "{i},{l:e}")?;
    }
    Ok(())
}

//! Pointwise callable coefficient fields.

use std::fmt;
use std::sync::Arc;

/// `x -> f(x)`
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `x -> grad f(x)`, a vector of the domain dimension.
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `(t, x) -> f(t, x)`
pub type TimeField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

pub fn scalar<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> ScalarField {
    Arc::new(f)
}

pub fn vector<F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static>(f: F) -> VectorField {
    Arc::new(f)
}

pub fn timed<F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static>(f: F) -> TimeField {
    Arc::new(f)
}

pub fn constant(c: f64) -> ScalarField {
    Arc::new(move |_| c)
}

/// Diffusion coefficient `k(x) > 0`.
#[derive(Clone)]
pub enum Diffusion {
    Constant(f64),
    /// Variable coefficient; the gradient must be supplied analytically.
    Variable { value: ScalarField, gradient: VectorField },
}

impl Diffusion {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Diffusion::Constant(k) => *k,
            Diffusion::Variable { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Diffusion::Constant(_) => vec![0.0; x.len()],
            Diffusion::Variable { gradient, .. } => gradient(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Diffusion::Constant(_))
    }
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Constant(k) => write!(f, "Constant({k})"),
            Diffusion::Variable { .. } => write!(f, "Variable"),
        }
    }
}

/// `(t, x) -> grad f(t, x)`
pub type TimeVectorField = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// Known stationary solution with its derivatives.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarField,
    pub gradient: VectorField,
    pub laplacian: ScalarField,
}

/// Known time-dependent solution with its derivatives.
#[derive(Clone)]
pub struct ExactEvolution {
    pub value: TimeField,
    pub time_derivative: TimeField,
    pub gradient: TimeVectorField,
    pub laplacian: TimeField,
}

impl ExactEvolution {
    /// Snapshot at a fixed time as a spatial field.
    pub fn at(&self, t: f64) -> ScalarField {
        let v = self.value.clone();
        Arc::new(move |x| v(t, x))
    }
}

impl fmt::Debug for ExactEvolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactEvolution")
    }
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution")
    }
}

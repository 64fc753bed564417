//! Manufactured and benchmark problems, addressed by stable identifiers.

use std::fmt;

use crate::error::{Error, Result};
use crate::fields::{scalar, timed, vector, Diffusion, ExactEvolution, ExactSolution};
use crate::nitsche::PoissonProblem;
use crate::quadrature::Domain;
use crate::timestep::{EvolutionProblem, Nonlinearity};

pub const IDS: [&str; 8] = [
    "poisson_1d",
    "poisson_square",
    "poisson_lshape",
    "heat_1d",
    "heat_square",
    "heat_lshape",
    "burgers_steady",
    "pb_steady",
];

#[derive(Debug, Clone)]
pub enum ProblemKind {
    Stationary(PoissonProblem),
    Evolution(EvolutionProblem),
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub id: String,
    pub provenance: &'static str,
    pub kind: ProblemKind,
}

impl ProblemSpec {
    pub fn domain(&self) -> Domain {
        match &self.kind {
            ProblemKind::Stationary(p) => p.domain,
            ProblemKind::Evolution(p) => p.domain,
        }
    }

    pub fn stationary(&self) -> Result<&PoissonProblem> {
        match &self.kind {
            ProblemKind::Stationary(p) => Ok(p),
            ProblemKind::Evolution(_) => {
                Err(Error::WrongProblemKind { id: self.id.clone(), reason: "expected a stationary problem".into() })
            }
        }
    }

    pub fn evolution(&self) -> Result<&EvolutionProblem> {
        match &self.kind {
            ProblemKind::Evolution(p) => Ok(p),
            ProblemKind::Stationary(_) => {
                Err(Error::WrongProblemKind { id: self.id.clone(), reason: "expected a time-dependent problem".into() })
            }
        }
    }

    /// Time-dependent entries whose interest is the steady state.
    pub fn is_steady(&self) -> bool {
        matches!(self.id.as_str(), "burgers_steady" | "pb_steady")
    }

    pub fn has_exact(&self) -> bool {
        match &self.kind {
            ProblemKind::Stationary(p) => p.exact.is_some(),
            ProblemKind::Evolution(p) => p.exact.is_some(),
        }
    }
}

/// Parameters of the parameterised entries.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemParams {
    /// Burgers viscosity.
    pub nu: f64,
    /// Poisson-Boltzmann screening constant `K`.
    pub kappa: f64,
    /// Poisson-Boltzmann boundary values at `x = 1` and `x = -1`.
    pub g_plus: f64,
    pub g_minus: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams { nu: 0.1, kappa: 2.0, g_plus: 2.0, g_minus: -3.0 }
    }
}

impl fmt::Display for ProblemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nu={} K={} g+={} g-={}", self.nu, self.kappa, self.g_plus, self.g_minus)
    }
}

fn unit_interval() -> Domain {
    Domain::Interval { a: -1.0, b: 1.0 }
}

fn unit_square() -> Domain {
    Domain::Box { ax: -1.0, bx: 1.0, ay: -1.0, by: 1.0 }
}

/// `-u'' = sin(6x)` on `(-1, 1)`, `u(-1) = 0`, `u(1) = 2`.
pub fn poisson_1d() -> PoissonProblem {
    let slope = 1.0 - 6f64.sin() / 36.0;
    PoissonProblem {
        id: "poisson_1d".into(),
        domain: unit_interval(),
        diffusion: Diffusion::Constant(1.0),
        forcing: scalar(|x| (6.0 * x[0]).sin()),
        boundary: scalar(|x| if x[0] < 0.0 { 0.0 } else { 2.0 }),
        exact: Some(ExactSolution {
            value: scalar(move |x| (6.0 * x[0]).sin() / 36.0 + slope * x[0] + 1.0),
            gradient: vector(move |x| vec![(6.0 * x[0]).cos() / 6.0 + slope]),
            laplacian: scalar(|x| -(6.0 * x[0]).sin()),
        }),
    }
}

fn cos_sin_value(x: &[f64]) -> f64 {
    (x[0].sin() - x[1] * x[1]).cos()
}

fn cos_sin_gradient(x: &[f64]) -> Vec<f64> {
    let s = x[0].sin() - x[1] * x[1];
    vec![-s.sin() * x[0].cos(), 2.0 * x[1] * s.sin()]
}

fn cos_sin_laplacian(x: &[f64]) -> f64 {
    let (sx, cx, y) = (x[0].sin(), x[0].cos(), x[1]);
    let s = sx - y * y;
    -s.cos() * cx * cx + s.sin() * sx + 2.0 * s.sin() - 4.0 * y * y * s.cos()
}

fn cos_sin_problem(id: &str, domain: Domain) -> PoissonProblem {
    PoissonProblem {
        id: id.into(),
        domain,
        diffusion: Diffusion::Constant(1.0),
        forcing: scalar(|x| -cos_sin_laplacian(x)),
        boundary: scalar(cos_sin_value),
        exact: Some(ExactSolution {
            value: scalar(cos_sin_value),
            gradient: vector(cos_sin_gradient),
            laplacian: scalar(cos_sin_laplacian),
        }),
    }
}

/// `-Δu = f` on `(-1, 1)^2` with `u = cos(sin x - y^2)`.
pub fn poisson_square() -> PoissonProblem {
    cos_sin_problem("poisson_square", unit_square())
}

/// As [`poisson_square`] on the L-shaped domain.
pub fn poisson_lshape() -> PoissonProblem {
    cos_sin_problem("poisson_lshape", Domain::LShape)
}

/// `u_t = u_xx + f` on `(-1, 1)` with `u = sin(5x) cos(4t)`.
pub fn heat_1d() -> EvolutionProblem {
    let u = |t: f64, x: &[f64]| (5.0 * x[0]).sin() * (4.0 * t).cos();
    EvolutionProblem {
        id: "heat_1d".into(),
        domain: unit_interval(),
        diffusion: Diffusion::Constant(1.0),
        nonlinearity: Nonlinearity::Zero,
        forcing: timed(|t, x| {
            let s = (5.0 * x[0]).sin();
            -4.0 * s * (4.0 * t).sin() + 25.0 * s * (4.0 * t).cos()
        }),
        boundary: timed(u),
        initial: scalar(move |x| u(0.0, x)),
        exact: Some(ExactEvolution {
            value: timed(u),
            time_derivative: timed(|t, x| -4.0 * (5.0 * x[0]).sin() * (4.0 * t).sin()),
            gradient: std::sync::Arc::new(|t, x: &[f64]| vec![5.0 * (5.0 * x[0]).cos() * (4.0 * t).cos()]),
            laplacian: timed(|t, x| -25.0 * (5.0 * x[0]).sin() * (4.0 * t).cos()),
        }),
    }
}

fn exp_sin_value(t: f64, x: &[f64]) -> f64 {
    (x[0].exp() + x[1].powi(3)).sin() * (4.0 * t).cos().exp()
}

fn exp_sin_time_derivative(t: f64, x: &[f64]) -> f64 {
    -4.0 * (4.0 * t).sin() * exp_sin_value(t, x)
}

fn exp_sin_laplacian(t: f64, x: &[f64]) -> f64 {
    let ex = x[0].exp();
    let w = ex + x[1].powi(3);
    let uxx = -w.sin() * ex * ex + w.cos() * ex;
    let uyy = -9.0 * x[1].powi(4) * w.sin() + 6.0 * x[1] * w.cos();
    (uxx + uyy) * (4.0 * t).cos().exp()
}

fn exp_sin_problem(id: &str, domain: Domain) -> EvolutionProblem {
    EvolutionProblem {
        id: id.into(),
        domain,
        diffusion: Diffusion::Constant(1.0),
        nonlinearity: Nonlinearity::Zero,
        forcing: timed(|t, x| exp_sin_time_derivative(t, x) - exp_sin_laplacian(t, x)),
        boundary: timed(exp_sin_value),
        initial: scalar(|x| exp_sin_value(0.0, x)),
        exact: Some(ExactEvolution {
            value: timed(exp_sin_value),
            time_derivative: timed(exp_sin_time_derivative),
            gradient: std::sync::Arc::new(|t, x: &[f64]| {
                let ex = x[0].exp();
                let c = (ex + x[1].powi(3)).cos() * (4.0 * t).cos().exp();
                vec![c * ex, 3.0 * x[1] * x[1] * c]
            }),
            laplacian: timed(exp_sin_laplacian),
        }),
    }
}

/// `u_t = Δu + f` on `(-1, 1)^2` with `u = sin(e^x + y^3) e^{cos 4t}`.
pub fn heat_square() -> EvolutionProblem {
    exp_sin_problem("heat_square", unit_square())
}

/// As [`heat_square`] on the L-shaped domain.
pub fn heat_lshape() -> EvolutionProblem {
    exp_sin_problem("heat_lshape", Domain::LShape)
}

fn linear_interpolant(left: f64, right: f64) -> crate::fields::ScalarField {
    scalar(move |x| 0.5 * (left + right) + 0.5 * (right - left) * x[0])
}

/// Steady viscous Burgers `nu u'' - u u' = 0` on `(-1, 1)` with the exact
/// profile `u = -0.6 tanh(0.3 (x - 0.2) / nu)`, posed as `u_t = nu u_xx - u u_x`
/// from the linear interpolant of the boundary values.
pub fn burgers_steady(nu: f64) -> Result<EvolutionProblem> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidConfig(format!("viscosity must be positive, got {nu}")));
    }
    let b = 0.3 / nu;
    let u = move |x: f64| -0.6 * (b * (x - 0.2)).tanh();
    let du = move |x: f64| -0.6 * b / (b * (x - 0.2)).cosh().powi(2);
    let d2u = move |x: f64| {
        let z = b * (x - 0.2);
        1.2 * b * b * z.tanh() / z.cosh().powi(2)
    };
    for i in 0..100 {
        let x = -1.0 + 2.0 * (i as f64 + 0.5) / 100.0;
        let defect = nu * d2u(x) - u(x) * du(x);
        if defect.abs() > 1e-9 * (1.0 + (nu * d2u(x)).abs()) {
            return Err(Error::InvalidConfig(format!("Burgers profile is not a steady state at x = {x}")));
        }
    }
    Ok(EvolutionProblem {
        id: "burgers_steady".into(),
        domain: unit_interval(),
        diffusion: Diffusion::Constant(nu),
        nonlinearity: Nonlinearity::Burgers,
        forcing: timed(|_, _| 0.0),
        boundary: timed(move |_, x| u(x[0])),
        initial: linear_interpolant(u(-1.0), u(1.0)),
        exact: Some(ExactEvolution {
            value: timed(move |_, x| u(x[0])),
            time_derivative: timed(|_, _| 0.0),
            gradient: std::sync::Arc::new(move |_, x: &[f64]| vec![du(x[0])]),
            laplacian: timed(move |_, x| d2u(x[0])),
        }),
    })
}

/// Steady Poisson-Boltzmann `u'' - K^2 sinh(u) = 0` on `(-1, 1)` with
/// `u(1) = g_plus`, `u(-1) = g_minus`; no closed-form solution.
pub fn pb_steady(kappa: f64, g_plus: f64, g_minus: f64) -> Result<EvolutionProblem> {
    if !(kappa.is_finite() && g_plus.is_finite() && g_minus.is_finite()) {
        return Err(Error::InvalidConfig("Poisson-Boltzmann parameters must be finite".into()));
    }
    Ok(EvolutionProblem {
        id: "pb_steady".into(),
        domain: unit_interval(),
        diffusion: Diffusion::Constant(1.0),
        nonlinearity: Nonlinearity::PoissonBoltzmann { kappa },
        forcing: timed(|_, _| 0.0),
        boundary: timed(move |_, x| if x[0] < 0.0 { g_minus } else { g_plus }),
        initial: linear_interpolant(g_minus, g_plus),
        exact: None,
    })
}

fn provenance(id: &str) -> &'static str {
    match id {
        "poisson_1d" => "interval benchmark; exact solution from integrating -u'' = sin 6x",
        "poisson_square" | "poisson_lshape" => "manufactured from u = cos(sin x - y^2)",
        "heat_1d" => "manufactured from u = sin(5x) cos(4t)",
        "heat_square" | "heat_lshape" => "manufactured from u = sin(e^x + y^3) exp(cos 4t)",
        "burgers_steady" => "travelling tanh profile of viscous Burgers",
        "pb_steady" => "no closed form; compare against a high-degree Legendre solve",
        _ => "",
    }
}

pub fn lookup_with(id: &str, params: &ProblemParams) -> Result<ProblemSpec> {
    let kind = match id {
        "poisson_1d" => ProblemKind::Stationary(poisson_1d()),
        "poisson_square" => ProblemKind::Stationary(poisson_square()),
        "poisson_lshape" => ProblemKind::Stationary(poisson_lshape()),
        "heat_1d" => ProblemKind::Evolution(heat_1d()),
        "heat_square" => ProblemKind::Evolution(heat_square()),
        "heat_lshape" => ProblemKind::Evolution(heat_lshape()),
        "burgers_steady" => ProblemKind::Evolution(burgers_steady(params.nu)?),
        "pb_steady" => ProblemKind::Evolution(pb_steady(params.kappa, params.g_plus, params.g_minus)?),
        _ => return Err(Error::UnknownProblem(id.into())),
    };
    Ok(ProblemSpec { id: id.into(), provenance: provenance(id), kind })
}

/// Looks up an entry with default parameters.
pub fn lookup(id: &str) -> Result<ProblemSpec> {
    lookup_with(id, &ProblemParams::default())
}

/// Every registered problem with default parameters.
pub fn registry() -> Vec<ProblemSpec> {
    IDS.iter().map(|id| lookup(id).expect("registered id")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete() {
        let reg = registry();
        assert_eq!(reg.len(), IDS.len());
        for (spec, id) in reg.iter().zip(IDS) {
            assert_eq!(spec.id, id);
            assert!(!spec.provenance.is_empty());
        }
        assert!(matches!(lookup("poisson_3d"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn kinds() {
        assert!(lookup("poisson_1d").unwrap().evolution().is_err());
        assert!(lookup("heat_1d").unwrap().stationary().is_err());
        assert!(!lookup("pb_steady").unwrap().has_exact());
    }

    #[test]
    fn poisson_1d_boundary_values() {
        let ex = poisson_1d().exact.unwrap();
        assert!((ex.value)(&[-1.0]).abs() < 1e-15);
        assert!(((ex.value)(&[1.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn square_forcing_at_origin() {
        assert!(((poisson_square().forcing)(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn burgers_rejects_bad_viscosity() {
        assert!(burgers_steady(0.0).is_err());
        assert!(burgers_steady(0.05).is_ok());
    }

    #[test]
    fn initial_conditions_match_boundary_data() {
        let p = pb_steady(2.0, 2.0, -3.0).unwrap();
        assert_eq!((p.initial)(&[-1.0]), -3.0);
        assert_eq!((p.initial)(&[1.0]), 2.0);
    }
}

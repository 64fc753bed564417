//! Time-dependent and steady nonlinear problems in a fixed basis.
//!
//! `u_t = div(k grad u) + N[u] + f` with Dirichlet data imposed through the
//! Nitsche terms is advanced with the four-step BDF formula, diffusion
//! implicit and `N` extrapolated explicitly:
//!
//! ```text
//! (M - 12dt/25 A) c^{n+1} = M (48 c^n - 36 c^{n-1} + 16 c^{n-2} - 3 c^{n-3}) / 25
//!     + 12dt/25 (F^{n+1} + 4 N^n - 6 N^{n-1} + 4 N^{n-2} - N^{n-3})
//! ```
//!
//! where `A` is the Nitsche operator, `F^{n+1} = -b(f(t_{n+1}), g(t_{n+1}))`
//! and `N^m = <q, N[u^m]>`. The first three levels come from backward Euler.
//! Steady problems are solved by marching this scheme in pseudo-time.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use serde::Serialize;

use crate::basis::{BasisTable, LegendreBasis, SpectralBasis};
use crate::error::{Error, Result};
use crate::fields::{Diffusion, ExactEvolution, ScalarField, TimeField};
use crate::nitsche::{error_norms, select_rank, DiscreteSpace, Norms, SweepRecord, DEFAULT_BETA};
use crate::quadrature::{Domain, PointSet, QuadratureRule};

/// Pointwise nonlinearity `N[u](x) = n(u(x), grad u(x))`.
#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    /// `-u du/dx`
    Burgers,
    /// `-kappa^2 sinh(u)`
    PoissonBoltzmann { kappa: f64 },
    Custom(Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>),
}

impl Nonlinearity {
    pub fn eval(&self, u: f64, grad: &[f64]) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Burgers => -u * grad[0],
            Nonlinearity::PoissonBoltzmann { kappa } => -kappa * kappa * u.sinh(),
            Nonlinearity::Custom(f) => f(u, grad),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Nonlinearity::Zero)
    }
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => f.write_str("Zero"),
            Nonlinearity::Burgers => f.write_str("Burgers"),
            Nonlinearity::PoissonBoltzmann { kappa } => write!(f, "PoissonBoltzmann({kappa})"),
            Nonlinearity::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Clone)]
pub struct EvolutionProblem {
    pub id: String,
    pub domain: Domain,
    pub diffusion: Diffusion,
    pub nonlinearity: Nonlinearity,
    pub forcing: TimeField,
    pub boundary: TimeField,
    pub initial: ScalarField,
    pub exact: Option<ExactEvolution>,
}

impl fmt::Debug for EvolutionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolutionProblem")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("diffusion", &self.diffusion)
            .field("nonlinearity", &self.nonlinearity)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub beta: f64,
    /// Backward-Euler substeps per jump-start step; `None` picks
    /// [`auto_startup_substeps`].
    pub startup_substeps: Option<usize>,
    /// Rebuild and refactorise the implicit matrix every step.
    pub reassemble_each_step: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt: 1e-2, t_final: 1.0, beta: DEFAULT_BETA, startup_substeps: None, reassemble_each_step: false }
    }
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 4.0 * self.dt) {
            return Err(Error::InvalidConfig("final time must exceed four time steps".into()));
        }
        if !(self.beta > 0.0) || self.startup_substeps == Some(0) {
            return Err(Error::InvalidConfig("penalty and startup substeps must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps to reach `t_final`, rounding to the nearest step.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn substeps(&self) -> usize {
        self.startup_substeps.unwrap_or_else(|| auto_startup_substeps(self.dt))
    }
}

/// `ceil(1 / dt^2)` substeps: the backward-Euler substep is then `O(dt^3)`
/// and the startup error `O(dt^4)`, matching the BDF-4 error.
pub fn auto_startup_substeps(dt: f64) -> usize {
    (1.0 / (dt * dt)).ceil().max(1.0) as usize
}

/// BDF-4 weights on `c^n, c^{n-1}, c^{n-2}, c^{n-3}` (over 25).
const BDF4_HISTORY: [f64; 4] = [48.0, -36.0, 16.0, -3.0];
/// Extrapolation weights for the explicit term.
const BDF4_EXTRAPOLATION: [f64; 4] = [4.0, -6.0, 4.0, -1.0];

/// Implicit matrix `M - gamma A`, factorised.
pub struct ImplicitSystem {
    pub matrix: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl ImplicitSystem {
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu.solve(rhs).ok_or(Error::Singular)
    }
}

/// `M - gamma A` with `gamma = 12 dt / 25` (BDF-4) or `gamma = dt`
/// (backward Euler).
pub fn build_implicit_system(mass: &DMatrix<f64>, operator: &DMatrix<f64>, gamma: f64) -> Result<ImplicitSystem> {
    let matrix = mass - operator * gamma;
    let lu = matrix.clone().lu();
    if !lu.is_invertible() {
        return Err(Error::Singular);
    }
    Ok(ImplicitSystem { matrix, lu })
}

/// State of a BDF-4 integration in coefficient space.
pub struct TimeStepper {
    problem: EvolutionProblem,
    config: TimeConfig,
    space: DiscreteSpace,
    mass: DMatrix<f64>,
    operator: DMatrix<f64>,
    bdf: ImplicitSystem,
    /// Latest first.
    history: VecDeque<DVector<f64>>,
    nonlinear_history: VecDeque<DVector<f64>>,
    /// `dc/dt` at levels 1..=3 from the last backward-Euler substep.
    startup_rates: Vec<DVector<f64>>,
    step: usize,
}

impl TimeStepper {
    pub fn new(
        basis: &dyn SpectralBasis,
        rule: &QuadratureRule,
        problem: &EvolutionProblem,
        r: usize,
        config: &TimeConfig,
    ) -> Result<Self> {
        config.validate()?;
        basis.check_rank(r)?;
        let space = DiscreteSpace::new(basis, rule, r + 1, &problem.diffusion)?;
        let mass = space.mass();
        let operator = space.operator(config.beta);
        let growth = operator.clone().symmetric_eigenvalues().max();
        if growth > 0.0 {
            log::warn!(
                "Nitsche operator has a positive eigenvalue {growth:.3e} at r = {r}, beta = {}; \
                 the penalty is too small for this basis and solutions may grow",
                config.beta
            );
        }
        let bdf = build_implicit_system(&mass, &operator, 12.0 * config.dt / 25.0)?;
        Ok(TimeStepper {
            problem: problem.clone(),
            config: config.clone(),
            space,
            mass,
            operator,
            bdf,
            history: VecDeque::with_capacity(5),
            nonlinear_history: VecDeque::with_capacity(5),
            startup_rates: Vec::new(),
            step: 0,
        })
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn implicit_matrix(&self) -> &DMatrix<f64> {
        &self.bdf.matrix
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    /// Most recent coefficients.
    pub fn current(&self) -> &DVector<f64> {
        &self.history[0]
    }

    /// `c_k = sum_i w_i u0(x_i) q_k(x_i)`.
    pub fn project_initial(&self, u0: &ScalarField) -> DVector<f64> {
        let vals: Vec<f64> = self.space.interior_nodes.iter().map(|x| u0(x)).collect();
        self.space.project(&vals)
    }

    /// `<q_l, N[u]>` on the build rule.
    pub fn nonlinear_projection(&self, c: &DVector<f64>) -> DVector<f64> {
        let m = c.len();
        if self.problem.nonlinearity.is_zero() {
            return DVector::zeros(m);
        }
        let u = &self.space.interior.values * c;
        let grads: Vec<DVector<f64>> = self.space.interior.gradients.iter().map(|g| g * c).collect();
        let mut gx = vec![0.0; grads.len()];
        let vals: Vec<f64> = (0..u.len())
            .map(|i| {
                for (a, g) in grads.iter().enumerate() {
                    gx[a] = g[i];
                }
                self.problem.nonlinearity.eval(u[i], &gx)
            })
            .collect();
        self.space.project(&vals)
    }

    /// `F(t) = <q, f(t)> - oint k (dn q - beta q) g(t) ds`.
    pub fn load(&self, t: f64) -> DVector<f64> {
        let f: Vec<f64> = self.space.interior_nodes.iter().map(|x| (self.problem.forcing)(t, x)).collect();
        let g: Vec<f64> = self.space.boundary_nodes.iter().map(|x| (self.problem.boundary)(t, x)).collect();
        -self.space.rhs(&f, &g, self.config.beta)
    }

    /// Seeds the history with explicit coefficient levels, latest first,
    /// `levels[j]` being the state at `t = (levels.len() - 1 - j) dt`.
    pub fn set_history(&mut self, levels: &[DVector<f64>]) -> Result<()> {
        if levels.is_empty() || levels.len() > 4 {
            return Err(Error::InvalidConfig("history must hold one to four levels".into()));
        }
        let m = self.space.count();
        if levels.iter().any(|c| c.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: levels[0].len() });
        }
        self.history = levels.iter().cloned().collect();
        self.nonlinear_history = levels.iter().map(|c| self.nonlinear_projection(c)).collect();
        self.step = levels.len() - 1;
        Ok(())
    }

    /// Projects the initial condition and takes three backward-Euler steps,
    /// each split into `startup_substeps` substeps.
    pub fn jump_start(&mut self) -> Result<()> {
        let c0 = self.project_initial(&self.problem.initial.clone());
        self.set_history(&[c0])?;
        self.startup_rates.clear();
        let substeps = self.config.substeps();
        let h = self.config.dt / substeps as f64;
        let be = build_implicit_system(&self.mass, &self.operator, h)?;
        for _ in 0..3 {
            let t0 = self.time();
            let mut c = self.history[0].clone();
            let mut rate = DVector::zeros(c.len());
            for s in 0..substeps {
                let t_new = t0 + (s + 1) as f64 * h;
                let rhs = &self.mass * &c + (self.load(t_new) + self.nonlinear_projection(&c)) * h;
                let next = be.solve(&rhs)?;
                rate = (&next - &c) / h;
                c = next;
            }
            self.push(c)?;
            self.startup_rates.push(rate);
        }
        Ok(())
    }

    fn push(&mut self, c: DVector<f64>) -> Result<()> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable { step: self.step + 1 });
        }
        let n = self.nonlinear_projection(&c);
        self.history.push_front(c);
        self.nonlinear_history.push_front(n);
        self.history.truncate(4);
        self.nonlinear_history.truncate(4);
        self.step += 1;
        Ok(())
    }

    /// One BDF-4 step; requires a full four-level history.
    pub fn bdf4_step(&mut self) -> Result<&DVector<f64>> {
        if self.history.len() < 4 {
            return Err(Error::InvalidConfig("BDF-4 needs four history levels; jump-start first".into()));
        }
        let gamma = 12.0 * self.config.dt / 25.0;
        let t_new = (self.step + 1) as f64 * self.config.dt;
        let m = self.space.count();
        let mut combo = DVector::zeros(m);
        let mut nl = DVector::zeros(m);
        for j in 0..4 {
            combo.axpy(BDF4_HISTORY[j] / 25.0, &self.history[j], 1.0);
            nl.axpy(BDF4_EXTRAPOLATION[j], &self.nonlinear_history[j], 1.0);
        }
        let rhs = &self.mass * combo + (self.load(t_new) + nl) * gamma;
        let c = if self.config.reassemble_each_step {
            let mass = self.space.mass();
            let op = self.space.operator(self.config.beta);
            build_implicit_system(&mass, &op, gamma)?.solve(&rhs)?
        } else {
            self.bdf.solve(&rhs)?
        };
        self.push(c)?;
        Ok(&self.history[0])
    }

    /// BDF-4 approximation of `dc/dt` at the latest level, given the level
    /// that dropped out of the history on the last step.
    fn bdf4_rate(&self, dropped: &DVector<f64>) -> DVector<f64> {
        let h = &self.history;
        (&h[0] * 25.0 - &h[1] * 48.0 + &h[2] * 36.0 - &h[3] * 16.0 + dropped * 3.0) / (12.0 * self.config.dt)
    }
}

/// Nodal values needed to evaluate `u_r`, its derivatives and `N[u_r]`.
struct Evaluator {
    table: BasisTable,
    laplacian: DMatrix<f64>,
    nodes: PointSet,
    weights: Vec<f64>,
    k: Vec<f64>,
    dk: Option<Vec<Vec<f64>>>,
}

impl Evaluator {
    fn new(basis: &dyn SpectralBasis, rule: &QuadratureRule, count: usize, diffusion: &Diffusion) -> Result<Self> {
        let table = basis.tabulate(&rule.interior_nodes, count)?;
        Ok(Evaluator {
            laplacian: table.laplacian(),
            table,
            k: rule.interior_nodes.iter().map(|x| diffusion.value(x)).collect(),
            dk: (!diffusion.is_constant()).then(|| rule.interior_nodes.iter().map(|x| diffusion.gradient(x)).collect()),
            nodes: rule.interior_nodes.clone(),
            weights: rule.interior_weights.clone(),
        })
    }

    fn values(&self, c: &DVector<f64>) -> Vec<f64> {
        (&self.table.values * c).as_slice().to_vec()
    }

    /// `div(k grad u) + N[u] + f(t) - rate` at every node.
    fn defect(&self, c: &DVector<f64>, rate: Option<&DVector<f64>>, problem: &EvolutionProblem, t: f64) -> Vec<f64> {
        let u = &self.table.values * c;
        let lap = &self.laplacian * c;
        let grads: Vec<DVector<f64>> = self.table.gradients.iter().map(|g| g * c).collect();
        let ut = rate.map(|r| &self.table.values * r);
        let mut gx = vec![0.0; grads.len()];
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, x)| {
                for (a, g) in grads.iter().enumerate() {
                    gx[a] = g[i];
                }
                let mut div = self.k[i] * lap[i];
                if let Some(dk) = &self.dk {
                    div += dk[i].iter().zip(&gx).map(|(a, b)| a * b).sum::<f64>();
                }
                let mut e = div + problem.nonlinearity.eval(u[i], &gx) + (problem.forcing)(t, x);
                if let Some(ut) = &ut {
                    e -= ut[i];
                }
                e
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub error: Option<Norms>,
    /// Strong residual of the time-discrete equation; `None` at `t = 0`.
    pub residual: Option<Norms>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionReport {
    pub problem: String,
    pub r: usize,
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    /// `E_{r,2}` and `E_{r,inf}`: time `L^2` (trapezoid) of spatial error norms.
    pub time_error: Option<Norms>,
    /// Time mean of the per-step residual norms.
    pub mean_residual: Norms,
    #[serde(skip)]
    pub final_coefficients: DVector<f64>,
}

/// `(int_0^T g(t)^2 dt)^{1/2}` by the composite trapezoid rule.
pub fn time_l2(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] * v[0] + v[1] * v[1]))
        .sum::<f64>()
        .sqrt()
}

/// Jump-starts, then marches with BDF-4 to `t_final`, recording error and
/// residual norms on `fine_rule` at every level.
pub fn run_evolution(
    problem: &EvolutionProblem,
    basis: &dyn SpectralBasis,
    r: usize,
    config: &TimeConfig,
    build_rule: &QuadratureRule,
    fine_rule: &QuadratureRule,
) -> Result<EvolutionReport> {
    let mut stepper = TimeStepper::new(basis, build_rule, problem, r, config)?;
    let eval = Evaluator::new(basis, fine_rule, r + 1, &problem.diffusion)?;
    stepper.jump_start()?;

    let n_steps = config.n_steps();
    let levels: Vec<DVector<f64>> = stepper.history.iter().rev().cloned().collect();
    let mut steps = Vec::with_capacity(n_steps + 1);
    let record = |c: &DVector<f64>, rate: Option<&DVector<f64>>, t: f64| {
        let error = problem.exact.as_ref().map(|ex| error_norms(&eval.values(c), &ex.at(t), fine_rule));
        let residual = rate.map(|rt| Norms::of(&eval.defect(c, Some(rt), problem, t), &eval.weights));
        StepRecord { t, error, residual }
    };
    for (j, c) in levels.iter().enumerate() {
        let rate = j.checked_sub(1).map(|i| &stepper.startup_rates[i]);
        steps.push(record(c, rate, j as f64 * config.dt));
    }
    while stepper.step_index() < n_steps {
        let oldest = stepper.history[3].clone();
        stepper.bdf4_step()?;
        let rate = stepper.bdf4_rate(&oldest);
        steps.push(record(stepper.current(), Some(&rate), stepper.time()));
    }

    let times: Vec<f64> = steps.iter().map(|s| s.t).collect();
    let time_error = problem.exact.as_ref().map(|_| {
        let l2: Vec<f64> = steps.iter().map(|s| s.error.unwrap().l2).collect();
        let linf: Vec<f64> = steps.iter().map(|s| s.error.unwrap().linf).collect();
        Norms { l2: time_l2(&times, &l2), linf: time_l2(&times, &linf) }
    });
    let res: Vec<Norms> = steps.iter().filter_map(|s| s.residual).collect();
    let count = res.len().max(1) as f64;
    let mean_residual = Norms {
        l2: res.iter().map(|n| n.l2).sum::<f64>() / count,
        linf: res.iter().map(|n| n.linf).sum::<f64>() / count,
    };
    Ok(EvolutionReport {
        problem: problem.id.clone(),
        r,
        dt: config.dt,
        steps,
        time_error,
        mean_residual,
        final_coefficients: stepper.current().clone(),
    })
}

impl EvolutionReport {
    /// `t,err_L2,err_Linf,res_L2,res_Linf` per level, then a row starting
    /// with `E` holding `E_{r,2}`, `E_{r,inf}` and the mean residual norms.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t,err_L2,err_Linf,res_L2,res_Linf")?;
        for s in &self.steps {
            let e = s.error.unwrap_or_else(Norms::nan);
            let r = s.residual.unwrap_or_else(Norms::nan);
            writeln!(out, "{},{:e},{:e},{:e},{:e}", s.t, e.l2, e.linf, r.l2, r.linf)?;
        }
        let e = self.time_error.unwrap_or_else(Norms::nan);
        writeln!(out, "E,{:e},{:e},{:e},{:e}", e.l2, e.linf, self.mean_residual.l2, self.mean_residual.linf)?;
        Ok(())
    }

    pub fn as_sweep_record(&self) -> SweepRecord {
        SweepRecord {
            r: self.r,
            error: self.time_error,
            residual: self.mean_residual,
            condition: f64::NAN,
            flagged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyConfig {
    pub time: TimeConfig,
    /// Early stop once `||c^{n+1} - c^n||_inf / dt < tol`.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyReport {
    pub problem: String,
    pub r: usize,
    pub steps_taken: usize,
    pub t_reached: f64,
    pub converged: bool,
    /// Last observed `||c^{n+1} - c^n||_inf / dt`.
    pub increment: f64,
    /// `div(k grad u) + N[u] + f` on the fine rule.
    pub residual: Norms,
    pub error: Option<Norms>,
    #[serde(skip)]
    pub coefficients: DVector<f64>,
}

/// Marches to a steady state; non-convergence by `t_final` is reported in
/// the result rather than treated as an error.
pub fn run_to_steady(
    problem: &EvolutionProblem,
    basis: &dyn SpectralBasis,
    r: usize,
    config: &SteadyConfig,
    build_rule: &QuadratureRule,
    fine_rule: &QuadratureRule,
    reference: Option<&ScalarField>,
) -> Result<SteadyReport> {
    let mut stepper = TimeStepper::new(basis, build_rule, problem, r, &config.time)?;
    stepper.jump_start()?;
    let dt = config.time.dt;
    let n_steps = config.time.n_steps();
    let mut increment = (&stepper.history[0] - &stepper.history[1]).amax() / dt;
    let mut converged = false;
    while stepper.step_index() < n_steps {
        let prev = stepper.current().clone();
        let c = stepper.bdf4_step()?;
        increment = (c - prev).amax() / dt;
        if increment < config.tol {
            converged = true;
            break;
        }
    }
    let t_reached = stepper.time();
    let c = stepper.current().clone();
    let eval = Evaluator::new(basis, fine_rule, r + 1, &problem.diffusion)?;
    let residual = Norms::of(&eval.defect(&c, None, problem, t_reached), &eval.weights);
    let exact_ref = problem.exact.as_ref().map(|e| e.at(t_reached));
    let error = reference.or(exact_ref.as_ref()).map(|f| error_norms(&eval.values(&c), f, fine_rule));
    Ok(SteadyReport {
        problem: problem.id.clone(),
        r,
        steps_taken: stepper.step_index(),
        t_reached,
        converged,
        increment,
        residual,
        error,
        coefficients: c,
    })
}

/// Steady state in a Legendre basis of the given degree, with the penalty
/// raised to keep the Nitsche form coercive; used as the reference for
/// problems without a closed-form solution.
pub fn legendre_steady_reference(
    problem: &EvolutionProblem,
    degree: usize,
    config: &SteadyConfig,
    build_rule: &QuadratureRule,
    fine_rule: &QuadratureRule,
) -> Result<(ScalarField, SteadyReport)> {
    let leg = LegendreBasis::new(&problem.domain, degree)?;
    let mut cfg = config.clone();
    cfg.time.beta = leg.coercive_penalty(config.time.beta);
    let report = run_to_steady(problem, &leg, degree, &cfg, build_rule, fine_rule, None)?;
    let c = report.coefficients.clone();
    let field: ScalarField = Arc::new(move |x: &[f64]| {
        let pts = PointSet::from_flat(1, x.to_vec()).expect("one-dimensional point");
        let t = leg.tabulate(&pts, c.len()).expect("degree within range");
        (t.values.row(0) * &c)[0]
    });
    Ok((field, report))
}

/// Per-rank records and the residual-selected rank of a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankStudy {
    pub problem: String,
    pub basis: String,
    pub records: Vec<SweepRecord>,
    pub selected_r: usize,
}

impl RankStudy {
    pub fn from_records(problem: &str, basis: &str, records: Vec<SweepRecord>) -> Self {
        let selected_r = select_rank(&records);
        RankStudy { problem: problem.into(), basis: basis.into(), records, selected_r }
    }

    pub fn selected(&self) -> &SweepRecord {
        self.records.iter().find(|r| r.r == self.selected_r).expect("selected rank is recorded")
    }

    pub fn best_by_error(&self) -> Option<&SweepRecord> {
        self.records
            .iter()
            .filter(|r| r.error.map(|e| e.l2.is_finite()).unwrap_or(false))
            .min_by(|a, b| a.error.unwrap().l2.total_cmp(&b.error.unwrap().l2))
    }
}

fn unstable_record(r: usize, has_error: bool) -> SweepRecord {
    SweepRecord { r, error: has_error.then(Norms::nan), residual: Norms::nan(), condition: f64::NAN, flagged: true }
}

/// Runs [`run_evolution`] for each rank; unstable runs are recorded with
/// NaN norms and flagged.
pub fn evolution_sweep(
    problem: &EvolutionProblem,
    basis: &dyn SpectralBasis,
    r_list: &[usize],
    config: &TimeConfig,
    build_rule: &QuadratureRule,
    fine_rule: &QuadratureRule,
) -> Result<RankStudy> {
    if r_list.is_empty() {
        return Err(Error::InvalidConfig("empty rank list".into()));
    }
    let mut records = Vec::new();
    for &r in r_list {
        match run_evolution(problem, basis, r, config, build_rule, fine_rule) {
            Ok(rep) => records.push(rep.as_sweep_record()),
            Err(Error::Unstable { .. }) | Err(Error::Singular) => {
                records.push(unstable_record(r, problem.exact.is_some()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RankStudy::from_records(&problem.id, &basis.label(), records))
}

/// Runs [`run_to_steady`] for each rank.
pub fn steady_sweep(
    problem: &EvolutionProblem,
    basis: &dyn SpectralBasis,
    r_list: &[usize],
    config: &SteadyConfig,
    build_rule: &QuadratureRule,
    fine_rule: &QuadratureRule,
    reference: Option<&ScalarField>,
) -> Result<RankStudy> {
    if r_list.is_empty() {
        return Err(Error::InvalidConfig("empty rank list".into()));
    }
    let mut records = Vec::new();
    for &r in r_list {
        match run_to_steady(problem, basis, r, config, build_rule, fine_rule, reference) {
            Ok(rep) => records.push(SweepRecord {
                r,
                error: rep.error,
                residual: rep.residual,
                condition: f64::NAN,
                flagged: !rep.converged,
            }),
            Err(Error::Unstable { .. }) | Err(Error::Singular) => {
                records.push(unstable_record(r, reference.is_some() || problem.exact.is_some()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RankStudy::from_records(&problem.id, &basis.label(), records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{constant, scalar, timed};

    fn interval() -> Domain {
        Domain::Interval { a: -1.0, b: 1.0 }
    }

    fn homogeneous() -> EvolutionProblem {
        EvolutionProblem {
            id: "zero".into(),
            domain: interval(),
            diffusion: Diffusion::Constant(1.0),
            nonlinearity: Nonlinearity::Zero,
            forcing: timed(|_, _| 0.0),
            boundary: timed(|_, _| 0.0),
            initial: constant(0.0),
            exact: None,
        }
    }

    #[test]
    fn config_validation() {
        assert!(TimeConfig::default().validate().is_ok());
        assert!(TimeConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(TimeConfig { t_final: 0.03, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_problem_stays_zero() {
        let rule = QuadratureRule::new(interval(), 30).unwrap();
        let leg = LegendreBasis::new(&interval(), 8).unwrap();
        let mut st = TimeStepper::new(&leg, &rule, &homogeneous(), 8, &TimeConfig::default()).unwrap();
        st.jump_start().unwrap();
        assert!(st.history.iter().all(|c| c.iter().all(|&v| v == 0.0)));
        for _ in 0..10 {
            assert!(st.bdf4_step().unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bdf4_requires_history() {
        let rule = QuadratureRule::new(interval(), 30).unwrap();
        let leg = LegendreBasis::new(&interval(), 4).unwrap();
        let mut st = TimeStepper::new(&leg, &rule, &homogeneous(), 4, &TimeConfig::default()).unwrap();
        assert!(st.bdf4_step().is_err());
    }

    #[test]
    fn small_step_limit_is_mass_matrix() {
        let rule = QuadratureRule::new(interval(), 30).unwrap();
        let leg = LegendreBasis::new(&interval(), 10).unwrap();
        let cfg = TimeConfig { dt: 1e-14, t_final: 1e-12, ..Default::default() };
        let st = TimeStepper::new(&leg, &rule, &homogeneous(), 10, &cfg).unwrap();
        assert!((st.implicit_matrix() - DMatrix::identity(11, 11)).amax() < 1e-10);
    }

    #[test]
    fn backward_euler_matrix_uses_plain_step() {
        let rule = QuadratureRule::new(interval(), 30).unwrap();
        let leg = LegendreBasis::new(&interval(), 5).unwrap();
        let st = TimeStepper::new(&leg, &rule, &homogeneous(), 5, &TimeConfig::default()).unwrap();
        let be = build_implicit_system(st.mass(), st.operator(), 0.01).unwrap();
        assert_eq!(be.matrix, st.mass() - st.operator() * 0.01);
        let expected_bdf = st.mass() - st.operator() * (12.0 * 0.01 / 25.0);
        assert_eq!(st.implicit_matrix(), &expected_bdf);
    }

    #[test]
    fn initial_projection_formula() {
        let rule = QuadratureRule::new(interval(), 40).unwrap();
        let leg = LegendreBasis::new(&interval(), 12).unwrap();
        let mut p = homogeneous();
        p.initial = scalar(|x| (3.0 * x[0]).exp());
        let st = TimeStepper::new(&leg, &rule, &p, 12, &TimeConfig::default()).unwrap();
        let c = st.project_initial(&p.initial);
        for k in 0..13 {
            let direct: f64 = rule
                .interior_nodes
                .iter()
                .zip(&rule.interior_weights)
                .map(|(x, w)| w * (3.0 * x[0]).exp() * leg.eval(x, 12).unwrap()[k])
                .sum();
            assert!((c[k] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn trapezoid_time_norm() {
        assert_eq!(time_l2(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]), 0.0);
        let v = time_l2(&[0.0, 1.0], &[1.0, 1.0]);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonlinearities() {
        assert_eq!(Nonlinearity::Burgers.eval(2.0, &[3.0]), -6.0);
        let pb = Nonlinearity::PoissonBoltzmann { kappa: 2.0 };
        assert!((pb.eval(1.0, &[0.0]) + 4.0 * 1f64.sinh()).abs() < 1e-15);
        assert_eq!(Nonlinearity::Zero.eval(5.0, &[1.0]), 0.0);
    }
}

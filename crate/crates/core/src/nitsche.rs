//! Nitsche formulation of the Poisson problem in a spectral basis.
//!
//! For `u_r = sum_{j<=r} c_j q_j` the stationarity conditions of the
//! Nitsche functional give `A c = b` with
//!
//! ```text
//! A_lj = -<grad q_l, k grad q_j> + oint k (q_l dn q_j + dn q_l q_j - beta q_l q_j) ds
//! b_l  = -<q_l, f>               + oint k (dn q_l g - beta q_l g) ds
//! ```
//!
//! (the negative of the usual symmetric positive definite form). Volume
//! terms use the interior rule, boundary terms the boundary rule with its
//! stored outward normals.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::{BasisTable, SpectralBasis};
use crate::error::{Error, Result};
use crate::fields::{Diffusion, ExactSolution, ScalarField};
use crate::network::FeatureNetwork;
use crate::quadrature::{Domain, PointSet, QuadratureRule};

/// Default Nitsche penalty.
pub const DEFAULT_BETA: f64 = 200.0;

/// Condition numbers above this are flagged in solves and sweeps.
pub const CONDITION_LIMIT: f64 = 1e14;

/// `-div(k grad u) = f` in the domain, `u = g` on its boundary.
#[derive(Clone)]
pub struct PoissonProblem {
    pub id: String,
    pub domain: Domain,
    pub diffusion: Diffusion,
    pub forcing: ScalarField,
    pub boundary: ScalarField,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for PoissonProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonProblem")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("diffusion", &self.diffusion)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Basis tables and coefficient data on one quadrature rule, shared by the
/// stationary and time-dependent solvers.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    pub interior: BasisTable,
    pub interior_nodes: PointSet,
    pub interior_weights: Vec<f64>,
    pub boundary_values: DMatrix<f64>,
    pub boundary_normal_derivs: DMatrix<f64>,
    pub boundary_nodes: PointSet,
    pub boundary_weights: Vec<f64>,
    interior_k: Vec<f64>,
    boundary_k: Vec<f64>,
}

impl DiscreteSpace {
    pub fn new(basis: &dyn SpectralBasis, rule: &QuadratureRule, count: usize, diffusion: &Diffusion) -> Result<Self> {
        if count == 0 || count > basis.max_count() {
            return Err(Error::RankOutOfRange { r: count.saturating_sub(1), available: basis.max_count() });
        }
        let interior = basis.tabulate(&rule.interior_nodes, count)?;
        let btab = basis.tabulate(&rule.boundary_nodes, count)?;
        Ok(DiscreteSpace {
            boundary_normal_derivs: btab.normal_derivative(&rule.boundary_normals),
            boundary_values: btab.values,
            interior,
            interior_k: rule.interior_nodes.iter().map(|x| diffusion.value(x)).collect(),
            boundary_k: rule.boundary_nodes.iter().map(|x| diffusion.value(x)).collect(),
            interior_nodes: rule.interior_nodes.clone(),
            interior_weights: rule.interior_weights.clone(),
            boundary_nodes: rule.boundary_nodes.clone(),
            boundary_weights: rule.boundary_weights.clone(),
        })
    }

    pub fn count(&self) -> usize {
        self.interior.count()
    }

    /// Operator part of the Nitsche matrix.
    pub fn operator(&self, beta: f64) -> DMatrix<f64> {
        let m = self.count();
        let mut a = DMatrix::zeros(m, m);
        for g in &self.interior.gradients {
            let mut wg = g.clone();
            for (i, (w, k)) in self.interior_weights.iter().zip(&self.interior_k).enumerate() {
                wg.row_mut(i).scale_mut(w * k);
            }
            a -= g.transpose() * wg;
        }
        let mut wb = self.boundary_values.clone();
        for (i, (w, k)) in self.boundary_weights.iter().zip(&self.boundary_k).enumerate() {
            wb.row_mut(i).scale_mut(w * k);
        }
        let cross = wb.transpose() * &self.boundary_normal_derivs;
        a += &cross + cross.transpose();
        a -= (wb.transpose() * &self.boundary_values) * beta;
        a
    }

    /// `M_lj = <q_l, q_j>` on the interior rule.
    pub fn mass(&self) -> DMatrix<f64> {
        let v = &self.interior.values;
        let mut wv = v.clone();
        for (i, w) in self.interior_weights.iter().enumerate() {
            wv.row_mut(i).scale_mut(*w);
        }
        v.transpose() * wv
    }

    /// `<q_l, h>` from values of `h` at the interior nodes.
    pub fn project(&self, h: &[f64]) -> DVector<f64> {
        let wh = DVector::from_iterator(h.len(), h.iter().zip(&self.interior_weights).map(|(h, w)| h * w));
        self.interior.values.tr_mul(&wh)
    }

    /// `oint k (dn q_l g - beta q_l g) ds` from boundary values of `g`.
    pub fn boundary_load(&self, g: &[f64], beta: f64) -> DVector<f64> {
        let wg = DVector::from_iterator(
            g.len(),
            g.iter().zip(&self.boundary_weights).zip(&self.boundary_k).map(|((g, w), k)| g * w * k),
        );
        self.boundary_normal_derivs.tr_mul(&wg) - self.boundary_values.tr_mul(&wg) * beta
    }

    /// Right-hand side `b` from nodal forcing and boundary data.
    pub fn rhs(&self, f: &[f64], g: &[f64], beta: f64) -> DVector<f64> {
        self.boundary_load(g, beta) - self.project(f)
    }

    /// Copy restricted to the first `count` basis functions.
    pub fn truncated(&self, count: usize) -> DiscreteSpace {
        DiscreteSpace {
            interior: self.interior.truncated(count),
            boundary_values: self.boundary_values.columns(0, count).into_owned(),
            boundary_normal_derivs: self.boundary_normal_derivs.columns(0, count).into_owned(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NitscheSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub beta: f64,
    pub rank: usize,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidConfig(format!("penalty must be positive, got {beta}")));
    }
    Ok(())
}

/// Assembles the rank-`r` system on the interior and boundary parts of `rule`.
pub fn assemble(
    basis: &dyn SpectralBasis,
    r: usize,
    problem: &PoissonProblem,
    beta: f64,
    rule: &QuadratureRule,
) -> Result<NitscheSystem> {
    basis.check_rank(r)?;
    check_beta(beta)?;
    let space = DiscreteSpace::new(basis, rule, r + 1, &problem.diffusion)?;
    assemble_in(&space, problem, beta)
}

/// Assembles on a precomputed space, using all of its basis functions.
pub fn assemble_in(space: &DiscreteSpace, problem: &PoissonProblem, beta: f64) -> Result<NitscheSystem> {
    check_beta(beta)?;
    let f: Vec<f64> = space.interior_nodes.iter().map(|x| (problem.forcing)(x)).collect();
    let g: Vec<f64> = space.boundary_nodes.iter().map(|x| (problem.boundary)(x)).collect();
    let system = NitscheSystem {
        matrix: space.operator(beta),
        rhs: space.rhs(&f, &g, beta),
        beta,
        rank: space.count() - 1,
    };
    if system.matrix.iter().chain(system.rhs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Nitsche system"));
    }
    Ok(system)
}

impl NitscheSystem {
    /// Leading `(r + 1) x (r + 1)` block; valid because the entries only
    /// depend on the pair of basis functions involved.
    pub fn leading(&self, r: usize) -> NitscheSystem {
        NitscheSystem {
            matrix: self.matrix.view((0, 0), (r + 1, r + 1)).into_owned(),
            rhs: self.rhs.rows(0, r + 1).into_owned(),
            beta: self.beta,
            rank: r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub coefficients: DVector<f64>,
    /// 1-norm condition number `||A||_1 ||A^{-1}||_1`.
    pub condition: f64,
    pub ill_conditioned: bool,
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Dense LU solve with partial pivoting and a condition estimate.
pub fn solve_dense(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<LinearSolution> {
    let lu = matrix.clone().lu();
    let coefficients = lu.solve(rhs).ok_or(Error::Singular)?;
    let condition = match lu.try_inverse() {
        Some(inv) => norm1(matrix) * norm1(&inv),
        None => f64::INFINITY,
    };
    let condition = if condition.is_finite() { condition } else { f64::INFINITY };
    Ok(LinearSolution { coefficients, ill_conditioned: !(condition <= CONDITION_LIMIT), condition })
}

pub fn solve(system: &NitscheSystem) -> Result<LinearSolution> {
    solve_dense(&system.matrix, &system.rhs)
}

/// `u_r(x_i) = sum_j c_j q_j(x_i)`.
pub fn evaluate_solution(basis: &dyn SpectralBasis, c: &DVector<f64>, points: &PointSet) -> Result<Vec<f64>> {
    check_coefficients(basis, c)?;
    let t = basis.tabulate(points, c.len())?;
    Ok((t.values * c).as_slice().to_vec())
}

/// Gradients of `u_r`, one vector per point.
pub fn evaluate_gradient(basis: &dyn SpectralBasis, c: &DVector<f64>, points: &PointSet) -> Result<Vec<Vec<f64>>> {
    check_coefficients(basis, c)?;
    let t = basis.tabulate(points, c.len())?;
    let cols: Vec<DVector<f64>> = t.gradients.iter().map(|g| g * c).collect();
    Ok((0..points.len()).map(|i| cols.iter().map(|g| g[i]).collect()).collect())
}

fn check_coefficients(basis: &dyn SpectralBasis, c: &DVector<f64>) -> Result<()> {
    if c.is_empty() || c.len() > basis.max_count() {
        return Err(Error::RankOutOfRange { r: c.len().saturating_sub(1), available: basis.max_count() });
    }
    Ok(())
}

/// `L^2` norm (weighted sum) and maximum absolute value over nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
}

impl Norms {
    pub fn of(values: &[f64], weights: &[f64]) -> Norms {
        let l2 = values.iter().zip(weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
        let linf = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Norms { l2, linf }
    }

    pub fn nan() -> Norms {
        Norms { l2: f64::NAN, linf: f64::NAN }
    }
}

/// Strong residual `-div(k grad u_r) - f` at tabulated nodes.
fn residual_values(
    table: &BasisTable,
    c: &DVector<f64>,
    nodes: &PointSet,
    diffusion: &Diffusion,
    forcing: &ScalarField,
) -> Vec<f64> {
    let lap = table.laplacian() * c;
    let grads: Vec<DVector<f64>> = if diffusion.is_constant() {
        Vec::new()
    } else {
        table.gradients.iter().map(|g| g * c).collect()
    };
    nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut e = -diffusion.value(x) * lap[i] - forcing(x);
            if !grads.is_empty() {
                let dk = diffusion.gradient(x);
                e -= grads.iter().zip(&dk).map(|(g, k)| g[i] * k).sum::<f64>();
            }
            e
        })
        .collect()
}

/// Norms of the strong residual on the interior of `fine_rule`.
pub fn residual_norms(
    basis: &dyn SpectralBasis,
    c: &DVector<f64>,
    problem: &PoissonProblem,
    fine_rule: &QuadratureRule,
) -> Result<Norms> {
    check_coefficients(basis, c)?;
    let t = basis.tabulate(&fine_rule.interior_nodes, c.len())?;
    let e = residual_values(&t, c, &fine_rule.interior_nodes, &problem.diffusion, &problem.forcing);
    Ok(Norms::of(&e, &fine_rule.interior_weights))
}

/// Error norms of nodal values against a reference on a rule.
pub fn error_norms(values: &[f64], reference: &ScalarField, rule: &QuadratureRule) -> Norms {
    let e: Vec<f64> = values
        .iter()
        .zip(rule.interior_nodes.iter())
        .map(|(v, x)| v - reference(x))
        .collect();
    Norms::of(&e, &rule.interior_weights)
}

/// Nitsche energy whose stationary point is the solution of `A c = b`:
/// `1/2 int k |grad v|^2 - int f v - oint k dn v (v - g) + beta/2 oint k (v - g)^2`.
pub fn nitsche_energy(
    basis: &dyn SpectralBasis,
    c: &DVector<f64>,
    problem: &PoissonProblem,
    beta: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_coefficients(basis, c)?;
    let t = basis.tabulate(&rule.interior_nodes, c.len())?;
    let v = &t.values * c;
    let grads: Vec<DVector<f64>> = t.gradients.iter().map(|g| g * c).collect();
    let mut energy = 0.0;
    for (i, x) in rule.interior_nodes.iter().enumerate() {
        let g2: f64 = grads.iter().map(|g| g[i] * g[i]).sum();
        let k = problem.diffusion.value(x);
        energy += rule.interior_weights[i] * (0.5 * k * g2 - (problem.forcing)(x) * v[i]);
    }
    let bt = basis.tabulate(&rule.boundary_nodes, c.len())?;
    let vb = &bt.values * c;
    let dn = bt.normal_derivative(&rule.boundary_normals) * c;
    for (i, x) in rule.boundary_nodes.iter().enumerate() {
        let k = problem.diffusion.value(x);
        let jump = vb[i] - (problem.boundary)(x);
        energy += rule.boundary_weights[i] * k * (-dn[i] * jump + 0.5 * beta * jump * jump);
    }
    Ok(energy)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub r: usize,
    pub error: Option<Norms>,
    pub residual: Norms,
    pub condition: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub basis: String,
    pub problem: String,
    pub beta: f64,
    pub records: Vec<SweepRecord>,
    /// Error of the parent network, when one was supplied.
    pub baseline: Option<Norms>,
    /// Rank minimising the residual `L^2` norm (smallest on ties).
    pub selected_r: usize,
}

impl SweepReport {
    pub fn record(&self, r: usize) -> Option<&SweepRecord> {
        self.records.iter().find(|rec| rec.r == r)
    }

    pub fn selected(&self) -> &SweepRecord {
        self.record(self.selected_r).expect("selected rank is recorded")
    }

    /// Record with the smallest `L^2` error, if errors are known.
    pub fn best_by_error(&self) -> Option<&SweepRecord> {
        self.records
            .iter()
            .filter(|r| r.error.map(|e| e.l2.is_finite()).unwrap_or(false))
            .min_by(|a, b| a.error.unwrap().l2.total_cmp(&b.error.unwrap().l2))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_sweep_csv(&mut out, &self.records)?;
        Ok(())
    }
}

/// `r,err_L2,err_Linf,res_L2,res_Linf,cond_flag`
pub fn write_sweep_csv<W: Write>(out: &mut W, records: &[SweepRecord]) -> std::io::Result<()> {
    writeln!(out, "r,err_L2,err_Linf,res_L2,res_Linf,cond_flag")?;
    for rec in records {
        let e = rec.error.unwrap_or_else(Norms::nan);
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{}",
            rec.r,
            e.l2,
            e.linf,
            rec.residual.l2,
            rec.residual.linf,
            u8::from(rec.flagged)
        )?;
    }
    Ok(())
}

/// Picks the rank with the smallest finite residual `L^2` norm.
pub fn select_rank(records: &[SweepRecord]) -> usize {
    let mut best: Option<&SweepRecord> = None;
    for rec in records {
        if !rec.residual.l2.is_finite() {
            continue;
        }
        match best {
            Some(b) if rec.residual.l2 > b.residual.l2 || (rec.residual.l2 == b.residual.l2 && rec.r > b.r) => {}
            _ => best = Some(rec),
        }
    }
    best.or(records.first()).map(|r| r.r).unwrap_or(0)
}

/// Inputs shared by a rank sweep.
pub struct SweepSetup<'a> {
    pub build_rule: &'a QuadratureRule,
    pub fine_rule: &'a QuadratureRule,
    pub beta: f64,
    /// Reference used for error columns; defaults to the problem's exact
    /// solution.
    pub reference: Option<ScalarField>,
    pub baseline: Option<&'a FeatureNetwork>,
}

/// Assembles once at the largest rank, then solves every leading block.
pub fn rank_sweep(
    basis: &dyn SpectralBasis,
    problem: &PoissonProblem,
    r_list: &[usize],
    setup: &SweepSetup<'_>,
) -> Result<SweepReport> {
    if r_list.is_empty() {
        return Err(Error::InvalidConfig("empty rank list".into()));
    }
    let mut ranks = r_list.to_vec();
    ranks.sort_unstable();
    ranks.dedup();
    let r_top = *ranks.last().unwrap();
    basis.check_rank(r_top)?;
    check_beta(setup.beta)?;

    let space = DiscreteSpace::new(basis, setup.build_rule, r_top + 1, &problem.diffusion)?;
    let full = assemble_in(&space, problem, setup.beta)?;
    let fine_nodes = &setup.fine_rule.interior_nodes;
    let fine = basis.tabulate(fine_nodes, r_top + 1)?;
    let reference = setup
        .reference
        .clone()
        .or_else(|| problem.exact.as_ref().map(|e| e.value.clone()));

    let mut records = Vec::with_capacity(ranks.len());
    for &r in &ranks {
        let system = full.leading(r);
        let rec = match solve(&system) {
            Ok(sol) => {
                let t = fine.truncated(r + 1);
                let u = (&t.values * &sol.coefficients).as_slice().to_vec();
                let e = residual_values(&t, &sol.coefficients, fine_nodes, &problem.diffusion, &problem.forcing);
                SweepRecord {
                    r,
                    error: reference.as_ref().map(|f| error_norms(&u, f, setup.fine_rule)),
                    residual: Norms::of(&e, &setup.fine_rule.interior_weights),
                    condition: sol.condition,
                    flagged: sol.ill_conditioned,
                }
            }
            Err(_) => SweepRecord {
                r,
                error: reference.as_ref().map(|_| Norms::nan()),
                residual: Norms::nan(),
                condition: f64::INFINITY,
                flagged: true,
            },
        };
        records.push(rec);
    }

    let baseline = match (setup.baseline, reference.as_ref()) {
        (Some(net), Some(f)) => {
            let u = net.forward_batch(fine_nodes, false)?.output_values();
            Some(error_norms(&u, f, setup.fine_rule))
        }
        _ => None,
    };
    let selected_r = select_rank(&records);
    Ok(SweepReport {
        basis: basis.label(),
        problem: problem.id.clone(),
        beta: setup.beta,
        records,
        baseline,
        selected_r,
    })
}

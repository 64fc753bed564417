//! Command-line driver: train, sweep, evolve, steady and oracle runs.
//!
//! Each run writes `{command}_{problem}_{arch}.csv` plus a JSON manifest
//! holding the effective configuration, its SHA-256, the seed and the
//! network fingerprint, which is enough to repeat the run exactly.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::basis::{LegendreBasis, OrthonormalBasis, SpectralBasis};
use crate::config::{RankList, Resolved, RunConfig};
use crate::error::{Error, Result};
use crate::network::FeatureNetwork;
use crate::nitsche::{error_norms, rank_sweep, write_sweep_csv, SweepSetup};
use crate::quadrature::QuadratureRule;
use crate::timestep::{evolution_sweep, legendre_steady_reference, run_evolution, steady_sweep, RankStudy};
use crate::trainer::{train_adam, write_loss_csv};

#[derive(Debug, Parser)]
#[command(name = "pinnbasis", version, about = "Spectral solvers on bases extracted from trained PINNs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a PINN on a stationary problem and save it.
    Train(RunArgs),
    /// Extract the basis and solve the Poisson problem for a range of ranks.
    Sweep(RunArgs),
    /// Integrate a time-dependent problem in the basis.
    Evolve(RunArgs),
    /// March a nonlinear problem to its steady state in the basis.
    Steady(RunArgs),
    /// Run the problem in a Legendre basis instead of a network basis.
    Oracle(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub network: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DEGREE")]
    pub oracle_legendre: Option<usize>,
    #[arg(long, value_name = "a:b:step")]
    pub r_list: Option<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Sweep(_) => "sweep",
            Command::Evolve(_) => "evolve",
            Command::Steady(_) => "steady",
            Command::Oracle(_) => "oracle",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Train(a) | Command::Sweep(a) | Command::Evolve(a) | Command::Steady(a) | Command::Oracle(a) => a,
        }
    }
}

/// Degree used by `oracle` when no `--oracle-legendre` is given.
pub const DEFAULT_ORACLE_DEGREE: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub problem: String,
    pub arch: String,
    pub seed: u64,
    pub config: String,
    pub config_sha256: String,
    pub network_sha256: Option<String>,
    pub oracle_legendre: Option<usize>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

/// Files written by a run and a one-line human summary per result.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub lines: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads the config and folds the command-line overrides into it.
pub fn effective_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.clone());
    }
    if let Some(r) = &args.r_list {
        cfg.solve.r_list = Some(RankList::Range(r.clone()));
    }
    Ok(cfg)
}

struct Context {
    command: &'static str,
    cfg: RunConfig,
    res: Resolved,
    args: RunArgs,
    outputs: Vec<String>,
    lines: Vec<String>,
    network_sha256: Option<String>,
}

impl Context {
    fn path(&mut self, name: String) -> PathBuf {
        self.outputs.push(name.clone());
        self.res.out_dir.join(name)
    }

    fn rules(&self) -> Result<(QuadratureRule, QuadratureRule)> {
        let d = self.res.problem.domain();
        Ok((QuadratureRule::new(d, self.res.build_order)?, QuadratureRule::new(d, self.res.fine_order)?))
    }

    fn finish(mut self, arch: &str, summary: serde_json::Value) -> Result<RunReport> {
        let config = self.cfg.to_toml();
        let manifest = Manifest {
            tool: "pinnbasis",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.into(),
            problem: self.res.problem.id.clone(),
            arch: arch.into(),
            seed: self.res.train.seed,
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            network_sha256: self.network_sha256.take(),
            oracle_legendre: self.args.oracle_legendre,
            outputs: self.outputs.clone(),
            summary,
        };
        let manifest_path = self
            .res
            .out_dir
            .join(format!("manifest_{}_{}_{}.json", self.command, self.res.problem.id, arch));
        std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(RunReport { manifest, manifest_path, lines: self.lines })
    }
}

/// Either basis kind behind one interface, with its file-name tag.
enum Basis {
    Network(Box<OrthonormalBasis>),
    Legendre(LegendreBasis),
}

impl Basis {
    fn as_dyn(&self) -> &dyn SpectralBasis {
        match self {
            Basis::Network(b) => b.as_ref(),
            Basis::Legendre(b) => b,
        }
    }

    fn arch(&self) -> String {
        match self {
            Basis::Network(b) => b.network().arch_tag(),
            Basis::Legendre(b) => format!("legendre{}", b.degree),
        }
    }

    /// Penalty to use: raised for polynomial bases so the form stays coercive.
    fn beta(&self, configured: f64) -> f64 {
        match self {
            Basis::Network(_) => configured,
            Basis::Legendre(b) => b.coercive_penalty(configured),
        }
    }

    fn max_rank(&self) -> usize {
        self.as_dyn().max_count() - 1
    }
}

fn load_basis(ctx: &mut Context, oracle_default: Option<usize>) -> Result<Basis> {
    let domain = ctx.res.problem.domain();
    if let Some(deg) = ctx.args.oracle_legendre.or(oracle_default) {
        return Ok(Basis::Legendre(LegendreBasis::new(&domain, deg)?));
    }
    let path = ctx
        .args
        .network
        .clone()
        .ok_or_else(|| Error::InvalidConfig("a network file (--network) or --oracle-legendre is required".into()))?;
    let net = FeatureNetwork::load(&path)?;
    if net.input_dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: net.input_dim() });
    }
    ctx.network_sha256 = Some(net.fingerprint());
    let rule = QuadratureRule::new(domain, ctx.res.build_order)?;
    let basis = OrthonormalBasis::build(&net, &rule)?;
    info!("basis r_max = {} from {}", basis.r_max(), path.display());
    Ok(Basis::Network(Box::new(basis)))
}

/// Configured ranks clipped to the basis, or every rank when none are given.
fn ranks(ctx: &Context, basis: &Basis) -> Result<Vec<usize>> {
    let max = basis.max_rank();
    let Some(list) = &ctx.res.r_list else {
        return Ok((0..=max).collect());
    };
    let kept: Vec<usize> = list.iter().copied().filter(|&r| r <= max).collect();
    if kept.len() < list.len() {
        warn!("rank list clipped to the available maximum r = {max}");
    }
    if kept.is_empty() {
        return Err(Error::RankOutOfRange { r: list[0], available: max + 1 });
    }
    Ok(kept)
}

pub fn run(cli: &Cli) -> Result<RunReport> {
    let args = cli.command.args().clone();
    let cfg = effective_config(&args)?;
    let res = cfg.resolve()?;
    std::fs::create_dir_all(&res.out_dir)?;
    let mut ctx = Context {
        command: cli.command.name(),
        cfg,
        res,
        args,
        outputs: Vec::new(),
        lines: Vec::new(),
        network_sha256: None,
    };
    match &cli.command {
        Command::Train(_) => cmd_train(ctx),
        Command::Sweep(_) => {
            let basis = load_basis(&mut ctx, None)?;
            cmd_sweep(ctx, basis)
        }
        Command::Evolve(_) => {
            let basis = load_basis(&mut ctx, None)?;
            cmd_evolve(ctx, basis)
        }
        Command::Steady(_) => {
            let basis = load_basis(&mut ctx, None)?;
            cmd_steady(ctx, basis)
        }
        Command::Oracle(_) => {
            let basis = load_basis(&mut ctx, Some(DEFAULT_ORACLE_DEGREE))?;
            if ctx.res.problem.stationary().is_ok() {
                cmd_sweep(ctx, basis)
            } else if ctx.res.problem.is_steady() {
                cmd_steady(ctx, basis)
            } else {
                cmd_evolve(ctx, basis)
            }
        }
    }
}

fn cmd_train(mut ctx: Context) -> Result<RunReport> {
    let problem = ctx.res.problem.stationary()?.clone();
    let net = FeatureNetwork::new(&ctx.res.dims, ctx.res.train.seed)?;
    let outcome = train_adam(&net, &problem, &ctx.res.train)?;
    let arch = outcome.network.arch_tag();
    let net_path = ctx.path(format!("network_{}_{arch}.json", problem.id));
    outcome.network.save(&net_path)?;
    let loss_path = ctx.path(format!("train_{}_{arch}.csv", problem.id));
    write_loss_csv(&loss_path, &outcome.loss_history)?;
    ctx.network_sha256 = Some(outcome.network.fingerprint());

    let final_loss = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
    let (_, fine) = ctx.rules()?;
    let error = problem.exact.as_ref().map(|ex| {
        let u = outcome.network.forward_batch(&fine.interior_nodes, false).map(|t| t.output_values());
        u.map(|u| error_norms(&u, &ex.value, &fine))
    });
    let error = error.transpose()?;
    ctx.lines.push(format!("trained {arch} for {} epochs, final loss {final_loss:.3e}", ctx.res.train.epochs));
    if let Some(e) = error {
        ctx.lines.push(format!("network error L2 {:.3e}, Linf {:.3e}", e.l2, e.linf));
    }
    let summary = serde_json::json!({ "final_loss": final_loss, "network_error": error });
    ctx.finish(&arch, summary)
}

fn cmd_sweep(mut ctx: Context, basis: Basis) -> Result<RunReport> {
    let problem = ctx.res.problem.stationary()?.clone();
    let (build, fine) = ctx.rules()?;
    let r_list = ranks(&ctx, &basis)?;
    let net = match &basis {
        Basis::Network(b) => Some(b.network().clone()),
        Basis::Legendre(_) => None,
    };
    let setup = SweepSetup {
        build_rule: &build,
        fine_rule: &fine,
        beta: basis.beta(ctx.res.beta),
        reference: None,
        baseline: net.as_ref(),
    };
    let report = rank_sweep(basis.as_dyn(), &problem, &r_list, &setup)?;
    let arch = basis.arch();
    let csv = ctx.path(format!("{}_{}_{arch}.csv", ctx.command, problem.id));
    report.write_csv(&csv)?;
    if let Basis::Network(b) = &basis {
        let path = ctx.path(format!("basis_{}_{arch}.json", problem.id));
        std::fs::write(path, b.to_json())?;
    }

    let sel = report.selected();
    ctx.lines.push(format!("selected r* = {} (residual L2 {:.3e})", sel.r, sel.residual.l2));
    if let (Some(e), Some(best)) = (sel.error, report.best_by_error()) {
        let b = best.error.unwrap();
        ctx.lines.push(format!("err_L2(r*) = {:.3e}; min err_L2 = {:.3e} at r = {}", e.l2, b.l2, best.r));
    }
    if let Some(b) = report.baseline {
        ctx.lines.push(format!("network baseline err_L2 = {:.3e}", b.l2));
    }
    let summary = serde_json::json!({
        "beta": report.beta,
        "selected_r": report.selected_r,
        "selected": sel,
        "best_by_error": report.best_by_error(),
        "baseline": report.baseline,
    });
    ctx.finish(&arch, summary)
}

fn study_lines(ctx: &mut Context, study: &RankStudy) {
    let sel = study.selected();
    ctx.lines.push(format!("selected r* = {} (residual L2 {:.3e})", sel.r, sel.residual.l2));
    if let (Some(e), Some(best)) = (sel.error, study.best_by_error()) {
        let b = best.error.unwrap();
        ctx.lines.push(format!("err_L2(r*) = {:.3e}; min err_L2 = {:.3e} at r = {}", e.l2, b.l2, best.r));
    }
}

fn write_study(path: &Path, study: &RankStudy) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_sweep_csv(&mut out, &study.records)?;
    Ok(())
}

fn cmd_evolve(mut ctx: Context, basis: Basis) -> Result<RunReport> {
    let problem = ctx.res.problem.evolution()?.clone();
    let (build, fine) = ctx.rules()?;
    let r_list = ranks(&ctx, &basis)?;
    let mut time = ctx.res.steady.time.clone();
    time.beta = basis.beta(time.beta);
    let arch = basis.arch();
    let stem = format!("{}_{}_{arch}", ctx.command, problem.id);

    let (r_traj, summary) = if r_list.len() == 1 {
        (r_list[0], serde_json::Value::Null)
    } else {
        let study = evolution_sweep(&problem, basis.as_dyn(), &r_list, &time, &build, &fine)?;
        let path = ctx.path(format!("{stem}.csv"));
        write_study(&path, &study)?;
        study_lines(&mut ctx, &study);
        (study.selected_r, serde_json::to_value(&study)?)
    };
    let traj = run_evolution(&problem, basis.as_dyn(), r_traj, &time, &build, &fine)?;
    let name = if r_list.len() == 1 { format!("{stem}.csv") } else { format!("{stem}_trajectory.csv") };
    let path = ctx.path(name);
    traj.write_csv(&path)?;
    if let Some(e) = traj.time_error {
        ctx.lines.push(format!("r = {r_traj}: E_2 = {:.3e}, E_inf = {:.3e}", e.l2, e.linf));
    }
    ctx.lines.push(format!("r = {r_traj}: mean residual L2 = {:.3e}", traj.mean_residual.l2));
    let summary = serde_json::json!({
        "dt": time.dt,
        "t_final": time.t_final,
        "beta": time.beta,
        "startup_substeps": time.substeps(),
        "trajectory_r": r_traj,
        "time_error": traj.time_error,
        "mean_residual": traj.mean_residual,
        "ranks": summary,
    });
    ctx.finish(&arch, summary)
}

fn cmd_steady(mut ctx: Context, basis: Basis) -> Result<RunReport> {
    let problem = ctx.res.problem.evolution()?.clone();
    let (build, fine) = ctx.rules()?;
    let r_list = ranks(&ctx, &basis)?;
    let mut config = ctx.res.steady.clone();
    let reference = if problem.exact.is_none() && problem.domain.dim() == 1 {
        let deg = ctx.res.reference_degree;
        let (field, rep) = legendre_steady_reference(&problem, deg, &config, &build, &fine)?;
        ctx.lines.push(format!(
            "reference: Legendre degree {deg}, {} steps, converged {}",
            rep.steps_taken, rep.converged
        ));
        Some(field)
    } else {
        None
    };
    config.time.beta = basis.beta(config.time.beta);
    let study = steady_sweep(&problem, basis.as_dyn(), &r_list, &config, &build, &fine, reference.as_ref())?;
    let arch = basis.arch();
    let path = ctx.path(format!("{}_{}_{arch}.csv", ctx.command, problem.id));
    write_study(&path, &study)?;
    study_lines(&mut ctx, &study);
    let unconverged = study.records.iter().filter(|r| r.flagged).count();
    if unconverged > 0 {
        ctx.lines.push(format!("{unconverged} rank(s) did not reach the steady tolerance or became unstable"));
    }
    let summary = serde_json::json!({
        "dt": config.time.dt,
        "t_final": config.time.t_final,
        "tol": config.tol,
        "beta": config.time.beta,
        "study": study,
    });
    ctx.finish(&arch, summary)
}

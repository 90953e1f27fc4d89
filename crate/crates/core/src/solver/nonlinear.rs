//! Fixed-point iterations for `a_h(u; u, v) = (f, v₀)`.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::models::KappaModel;
use crate::solver::assembly::{load_vector, local_matrices, residual, scatter_free, FormOptions};
use crate::solver::linear::{LinearSolver, LinearSolverKind};
use crate::weak_gradient::{WeakFunction, WgSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Frozen-coefficient iteration `u ← (1−θ)u + θ A(u)⁻¹ b`.
    Kacanov { theta: f64 },
    /// `u ← u − ε G⁻¹ r(u)` with `G` the `κ ≡ 1` matrix.
    Richardson { eps: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Kacanov { theta: 1.0 }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kacanov" | "picard" => Ok(Method::Kacanov { theta: 1.0 }),
            "richardson" => Ok(Method::Richardson { eps: f64::NAN }),
            other => Err(Error::invalid(format!("unknown method '{other}' (kacanov or richardson)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Stop when `|||u^{n+1} − u^n||| < tol (1 + |||u^{n+1}|||)` or
    /// `‖r(u)‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub form: FormOptions,
    pub linear: LinearSolverKind,
    /// Eliminate interior DOFs before the global solve.
    pub condense: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::default(),
            tol: 1e-10,
            max_iter: 200,
            form: FormOptions::default(),
            linear: LinearSolverKind::default(),
            condense: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::invalid("max iterations must be at least 1"));
        }
        match self.method {
            Method::Kacanov { theta } if !(theta > 0.0 && theta <= 1.0) => {
                Err(Error::invalid(format!("relaxation theta must lie in (0, 1], got {theta}")))
            }
            Method::Richardson { eps } if !(eps > 0.0 && eps.is_finite()) => {
                Err(Error::invalid(format!("richardson step eps must be positive, got {eps}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|||u^n − u^{n−1}|||`
    pub update_norm: f64,
    /// `‖A(u^n) u^n − b‖` over free DOFs.
    pub residual_norm: f64,
    /// Seconds since the start of the solve.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationHistory {
    pub records: Vec<IterationRecord>,
}

impl IterationHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_update(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.update_norm)
    }

    pub fn last_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual_norm)
    }

    /// Ratios of consecutive update norms.
    pub fn update_ratios(&self) -> Vec<f64> {
        self.records.windows(2).map(|w| w[1].update_norm / w[0].update_norm).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["iteration", "update_norm", "residual_norm", "wall_time"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                format!("{:e}", r.update_norm),
                format!("{:e}", r.residual_norm),
                format!("{:.6}", r.wall_time),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: WeakFunction,
    pub history: IterationHistory,
    pub iterations: usize,
    /// `‖r(u)‖` of the returned iterate.
    pub residual_norm: f64,
    /// Size of the globally solved linear system.
    pub system_size: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `A(u) u − b` from local matrices.
fn frozen_residual(space: &WgSpace, locals: &[nalgebra::DMatrix<f64>], u: &WeakFunction, b: &[f64]) -> Vec<f64> {
    let parts: Vec<DVector<f64>> = locals.par_iter().enumerate().map(|(c, a)| a * space.gather(u, c)).collect();
    let mut r = scatter_free(space, &parts);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    r
}

/// Solves with the configured method.
pub fn solve(
    space: &WgSpace,
    kappa: &KappaModel,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    config: &SolverConfig,
    initial: Option<&WeakFunction>,
) -> Result<Solution> {
    match config.method {
        Method::Kacanov { .. } => solve_kacanov(space, kappa, f, config, initial),
        Method::Richardson { .. } => solve_richardson(space, kappa, f, config, initial),
    }
}

fn check_initial(space: &WgSpace, initial: Option<&WeakFunction>) -> Result<WeakFunction> {
    match initial {
        None => Ok(space.zero()),
        Some(u) if u.len() != space.dofs().total() => {
            Err(Error::invalid(format!("initial guess has {} coefficients, expected {}", u.len(), space.dofs().total())))
        }
        Some(u) if !u.has_zero_boundary(space.dofs()) => Err(Error::invalid("initial guess must vanish on the boundary")),
        Some(u) => Ok(u.clone()),
    }
}

pub fn solve_kacanov(
    space: &WgSpace,
    kappa: &KappaModel,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    config: &SolverConfig,
    initial: Option<&WeakFunction>,
) -> Result<Solution> {
    config.validate()?;
    let Method::Kacanov { mut theta } = config.method else {
        return Err(Error::invalid("solve_kacanov needs the kacanov method"));
    };
    let start = Instant::now();
    let dofs = space.dofs();
    let b = load_vector(space, f);
    let bnorm = norm(&b).max(f64::MIN_POSITIVE);
    let mut solver = LinearSolver::new(space, config.linear, config.condense);
    let mut u = check_initial(space, initial)?;
    let mut locals = local_matrices(space, kappa, &u, config.form)?;
    let mut rnorm = norm(&frozen_residual(space, &locals, &u, &b));
    let mut history = IterationHistory::default();
    let mut prev_update = f64::INFINITY;
    let mut n = 0;
    loop {
        if n > 0 && rnorm <= config.tol * bnorm {
            debug!("kacanov: residual criterion met after {n} iterations");
            break;
        }
        if n == config.max_iter {
            warn!("kacanov: no convergence in {n} iterations");
            return Err(Error::NotConverged { history });
        }
        let op = solver.factor(&locals)?;
        let (w, _) = op.solve(&b)?;
        let w = WeakFunction::from_free(dofs, &w);
        let mut next = u.scaled(1.0 - theta);
        next.axpy(theta, &w);
        let update = space.energy_norm(&next.sub(&u));
        n += 1;
        if update > prev_update && theta > 0.5 {
            info!("kacanov: update norm increased at iteration {n}; relaxing theta to 0.5");
            theta = 0.5;
        }
        prev_update = update;
        u = next;
        locals = local_matrices(space, kappa, &u, config.form)?;
        rnorm = norm(&frozen_residual(space, &locals, &u, &b));
        history.records.push(IterationRecord {
            iteration: n,
            update_norm: update,
            residual_norm: rnorm,
            wall_time: start.elapsed().as_secs_f64(),
        });
        debug!("kacanov {n}: update {update:.3e}, residual {rnorm:.3e}");
        if update < config.tol * (1.0 + space.energy_norm(&u)) {
            break;
        }
    }
    Ok(Solution { u, history, iterations: n, residual_norm: rnorm, system_size: solver.system_size() })
}

pub fn solve_richardson(
    space: &WgSpace,
    kappa: &KappaModel,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    config: &SolverConfig,
    initial: Option<&WeakFunction>,
) -> Result<Solution> {
    config.validate()?;
    let Method::Richardson { eps } = config.method else {
        return Err(Error::invalid("solve_richardson needs the richardson method"));
    };
    let start = Instant::now();
    let dofs = space.dofs();
    let bnorm = norm(&load_vector(space, f)).max(f64::MIN_POSITIVE);
    let mut solver = LinearSolver::new(space, config.linear, config.condense);
    let gram = solver.factor(&local_matrices(space, &KappaModel::constant(1.0), &space.zero(), config.form)?)?;
    let mut u = check_initial(space, initial)?;
    let mut r = residual(space, kappa, &u, f, config.form)?;
    let mut rnorm = norm(&r);
    let mut history = IterationHistory::default();
    let mut n = 0;
    loop {
        if n > 0 && rnorm <= config.tol * bnorm {
            break;
        }
        if n == config.max_iter {
            warn!("richardson: no convergence in {n} iterations");
            return Err(Error::NotConverged { history });
        }
        let (z, _) = gram.solve(&r)?;
        let z = WeakFunction::from_free(dofs, &z);
        u.axpy(-eps, &z);
        let update = eps * space.energy_norm(&z);
        n += 1;
        r = residual(space, kappa, &u, f, config.form)?;
        rnorm = norm(&r);
        history.records.push(IterationRecord {
            iteration: n,
            update_norm: update,
            residual_norm: rnorm,
            wall_time: start.elapsed().as_secs_f64(),
        });
        if n > 10 && update > 5.0 * history.records[n - 11].update_norm {
            warn!("richardson: diverging at iteration {n}");
            return Err(Error::Diverged { iteration: n, history });
        }
        if !update.is_finite() {
            return Err(Error::Diverged { iteration: n, history });
        }
        if update < config.tol * (1.0 + space.energy_norm(&u)) {
            break;
        }
    }
    Ok(Solution { u, history, iterations: n, residual_norm: rnorm, system_size: solver.system_size() })
}

/// Per-step contraction bound `√(1 − 2εα + β²ε²)`.
pub fn richardson_contraction_bound(eps: f64, alpha: f64, beta: f64) -> f64 {
    (1.0 - 2.0 * eps * alpha + beta * beta * eps * eps).max(0.0).sqrt()
}

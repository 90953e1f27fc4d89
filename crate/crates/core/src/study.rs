//! Convergence studies over a range of mesh levels.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::time::Instant;

use log::info;

use crate::error::{Error, Result};
use crate::error_norms::{energy_error, format_sci, l2_error, EnergyErrorMode, ErrorReport, RateTable};
use crate::mesh::GridFamily;
use crate::models::Benchmark;
use crate::solver::{solve, Penalty, SolverConfig};
use crate::weak_gradient::{GradientDegree, SpaceOptions, WgSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub benchmark: Benchmark,
    pub family: GridFamily,
    pub k: usize,
    pub degree: GradientDegree,
    pub levels: RangeInclusive<u32>,
    pub solver: SolverConfig,
    pub energy_mode: EnergyErrorMode,
    pub space: SpaceOptions,
}

impl StudySpec {
    /// Defaults: `j = k+1` on rectangles, `j = k+2` on qph grids, Kačanov.
    pub fn new(benchmark: Benchmark, family: GridFamily, k: usize, levels: RangeInclusive<u32>) -> Self {
        let degree = match family {
            GridFamily::Rect => GradientDegree::KPlus1,
            GridFamily::Qph => GradientDegree::KPlus2,
        };
        StudySpec {
            benchmark,
            family,
            k,
            degree,
            levels,
            solver: SolverConfig::default(),
            energy_mode: EnergyErrorMode::default(),
            space: SpaceOptions::default(),
        }
    }

    pub fn with_degree(self, degree: GradientDegree) -> Self {
        StudySpec { degree, ..self }
    }

    pub fn with_solver(self, solver: SolverConfig) -> Self {
        StudySpec { solver, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (*self.levels.start(), *self.levels.end());
        if a < 1 || a > b {
            return Err(Error::invalid(format!("level range {a}..{b} must be nonempty and start at 1 or above")));
        }
        if !(1..=4).contains(&self.k) {
            return Err(Error::invalid(format!("k = {} outside the supported range 1..=4", self.k)));
        }
        for n in [3usize, 4, 5, 6] {
            let j = self.degree.for_cell(self.k, n);
            if j <= self.k {
                return Err(Error::invalid(format!("gradient degree j = {j} must exceed k = {}", self.k)));
            }
        }
        self.solver.validate()
    }
}

/// Reports of the completed levels and the error that stopped the study, if
/// any.
#[derive(Debug)]
pub struct StudyRun {
    pub table: RateTable,
    pub failure: Option<Error>,
}

fn run_level(spec: &StudySpec, space: &WgSpace, level: u32, penalty: Penalty, start: Instant) -> Result<ErrorReport> {
    let b = &spec.benchmark;
    let f = |p: &crate::mesh::Point| b.forcing(p);
    let mut cfg = spec.solver;
    cfg.form.penalty = penalty;
    let sol = solve(space, &b.kappa, &f, &cfg, None)?;
    let l2 = l2_error(space, &sol.u, &b.exact);
    let en = energy_error(space, &sol.u, &b.exact, spec.energy_mode)?;
    Ok(ErrorReport {
        family: spec.family,
        level,
        dofs: space.dofs().num_free(),
        l2_error: l2,
        energy_error: en,
        l2_rate: None,
        energy_rate: None,
        iterations: sol.iterations,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn build_space(spec: &StudySpec, level: u32) -> Result<WgSpace> {
    let mesh = spec.family.build(level, spec.benchmark.domain)?;
    WgSpace::with_options(mesh, spec.k, spec.degree, spec.space)
}

/// Builds, solves and measures every level in order. Stops at the first
/// failing level; the table then holds the levels before it.
pub fn run_study(spec: &StudySpec) -> Result<StudyRun> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut failure = None;
    for level in spec.levels.clone() {
        let start = Instant::now();
        let out = build_space(spec, level).and_then(|s| run_level(spec, &s, level, spec.solver.form.penalty, start));
        match out {
            Ok(r) => {
                info!("level {level}: dofs {} energy {:.4e} l2 {:.4e} ({} iters)", r.dofs, r.energy_error, r.l2_error, r.iterations);
                rows.push(r);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    Ok(StudyRun { table: RateTable::new(rows)?, failure })
}

/// Stabilizer-free and stabilized runs on identical meshes.
#[derive(Debug)]
pub struct Comparison {
    pub sfwg: RateTable,
    pub stabilized: RateTable,
    pub failure: Option<Error>,
}

impl Comparison {
    /// Running totals of the per-level seconds.
    pub fn cumulative_seconds(table: &RateTable) -> Vec<f64> {
        table
            .rows
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.seconds;
                Some(*acc)
            })
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| level | SFWG \\|\\|\\|u−u_h\\|\\|\\| | rate | SFWG total s | stabilized \\|\\|\\|u−u_h\\|\\|\\| | rate | stabilized total s |\n");
        s.push_str("|---:|---:|---:|---:|---:|---:|---:|\n");
        let ca = Self::cumulative_seconds(&self.sfwg);
        let cb = Self::cumulative_seconds(&self.stabilized);
        let opt = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_default();
        for (i, (a, b)) in self.sfwg.rows.iter().zip(&self.stabilized.rows).enumerate() {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.2} | {} | {} | {:.2} |",
                a.level,
                format_sci(a.energy_error),
                opt(a.energy_rate),
                ca[i],
                format_sci(b.energy_error),
                opt(b.energy_rate),
                cb[i]
            );
        }
        let _ = writeln!(
            s,
            "\nTotal wall-clock time: SFWG {:.2} s, stabilized {:.2} s",
            self.sfwg.total_seconds(),
            self.stabilized.total_seconds()
        );
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,");
        let a = self.sfwg.to_csv();
        let mut lines = a.lines();
        out.push_str(lines.next().unwrap_or_default());
        out.push('\n');
        for l in lines {
            let _ = writeln!(out, "sfwg,{l}");
        }
        for l in self.stabilized.to_csv().lines().skip(1) {
            let _ = writeln!(out, "stabilized,{l}");
        }
        out
    }
}

/// Runs the stabilizer-free scheme and the `1/h`-penalized scheme (same
/// `k`, `j` and meshes). The penalty variant of `spec.solver.form` is used
/// for the stabilized run when set, otherwise the global `1/h`.
pub fn run_comparison(spec: &StudySpec) -> Result<Comparison> {
    spec.validate()?;
    let penalty = if spec.solver.form.penalty.is_active() { spec.solver.form.penalty } else { Penalty::GlobalH };
    let mut a_rows = Vec::new();
    let mut b_rows = Vec::new();
    let mut failure = None;
    for level in spec.levels.clone() {
        let start = Instant::now();
        let space = match build_space(spec, level) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let setup = start.elapsed().as_secs_f64();
        let a = run_level(spec, &space, level, Penalty::None, start);
        let start_b = Instant::now();
        let b = run_level(spec, &space, level, penalty, start_b);
        match (a, b) {
            (Ok(a), Ok(mut b)) => {
                b.seconds += setup;
                a_rows.push(a);
                b_rows.push(b);
            }
            (Err(e), _) | (_, Err(e)) => {
                failure = Some(e);
                break;
            }
        }
    }
    Ok(Comparison { sfwg: RateTable::new(a_rows)?, stabilized: RateTable::new(b_rows)?, failure })
}

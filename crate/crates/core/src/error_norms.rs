//! Errors against exact solutions and convergence-rate tables.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::GridFamily;
use crate::projection::{project_qbold, SmoothFunction};
use crate::weak_gradient::{WeakFunction, WgSpace};

/// `‖u − u₀‖ = (Σ_T ∫_T (u − u₀)²)^{1/2}`.
pub fn l2_error(space: &WgSpace, uh: &WeakFunction, exact: &dyn SmoothFunction) -> f64 {
    let parts: Vec<f64> = space
        .locals()
        .par_iter()
        .map(|l| {
            let coeffs = &uh.coeffs[space.dofs().cell_dofs(l.cell)];
            let table = l.interior.table(&l.rule.points);
            l.rule
                .points
                .iter()
                .zip(&l.rule.weights)
                .enumerate()
                .map(|(q, (p, w))| {
                    let u0: f64 = (0..coeffs.len()).map(|i| table[(q, i)] * coeffs[i]).sum();
                    let d = exact.value(p) - u0;
                    w * d * d
                })
                .sum()
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// What `∇_w u_h` is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyErrorMode {
    /// `∇u` at the quadrature points.
    #[default]
    Pointwise,
    /// `ℚ_h ∇u`, the weak gradient of the exact solution.
    Projected,
}

/// `(Σ_T ‖∇_w u_h − ∇u‖²_T)^{1/2}`.
pub fn energy_error(space: &WgSpace, uh: &WeakFunction, exact: &dyn SmoothFunction, mode: EnergyErrorMode) -> Result<f64> {
    let parts = space
        .locals()
        .par_iter()
        .map(|l| {
            let local = space.gather(uh, l.cell);
            match mode {
                EnergyErrorMode::Pointwise => {
                    let (gx, gy) = l.values_at_quadrature(&local);
                    Ok(l.rule
                        .points
                        .iter()
                        .zip(&l.rule.weights)
                        .enumerate()
                        .map(|(q, (p, w))| {
                            let g = exact.gradient(p);
                            w * ((g.x - gx[q]).powi(2) + (g.y - gy[q]).powi(2))
                        })
                        .sum::<f64>())
                }
                EnergyErrorMode::Projected => {
                    let d = l.apply(&local) - project_qbold(l, &|p| exact.gradient(p))?;
                    let nj = l.gradient_dim();
                    let (dx, dy) = (d.rows(0, nj), d.rows(nj, nj));
                    Ok((dx.transpose() * &l.mass * dx)[(0, 0)] + (dy.transpose() * &l.mass * dy)[(0, 0)])
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub family: GridFamily,
    pub level: u32,
    pub dofs: usize,
    pub l2_error: f64,
    pub energy_error: f64,
    pub l2_rate: Option<f64>,
    pub energy_rate: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
}

/// `log₂(e_prev / e)`.
pub fn rate(prev: f64, cur: f64) -> f64 {
    (prev / cur).log2()
}

/// `0.6829E-03` style: mantissa in `[0.1, 1)`.
pub fn format_sci(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mut e = x.abs().log10().floor() as i32 + 1;
    let mut m = x / 10f64.powi(e);
    // rounding can push the mantissa to 1.0000
    if (m.abs() * 1e4).round() >= 1e4 {
        e += 1;
        m = x / 10f64.powi(e);
    }
    format!("{m:.4}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

/// Consecutive-level reports of one grid family with rates filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rows: Vec<ErrorReport>,
}

impl RateTable {
    pub fn new(mut rows: Vec<ErrorReport>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let family = first.family;
            if rows.iter().any(|r| r.family != family) {
                return Err(Error::invalid("rate table mixes grid families"));
            }
        }
        for i in 0..rows.len() {
            if i == 0 {
                rows[i].l2_rate = None;
                rows[i].energy_rate = None;
            } else {
                rows[i].l2_rate = Some(rate(rows[i - 1].l2_error, rows[i].l2_error));
                rows[i].energy_rate = Some(rate(rows[i - 1].energy_error, rows[i].energy_error));
            }
        }
        Ok(RateTable { rows })
    }

    pub fn last(&self) -> Option<&ErrorReport> {
        self.rows.last()
    }

    pub fn total_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.seconds).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["level", "dofs", "l2_error", "l2_rate", "energy_error", "energy_rate", "iters", "seconds"])?;
        let opt = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.level.to_string(),
                r.dofs.to_string(),
                format!("{:.6e}", r.l2_error),
                opt(r.l2_rate),
                format!("{:.6e}", r.energy_error),
                opt(r.energy_rate),
                r.iterations.to_string(),
                format!("{:.3}", r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| level | dofs | ‖u−u_h‖₀ | rate | \\|\\|\\|u−u_h\\|\\|\\| | rate | iters | seconds |\n");
        s.push_str("|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        let opt = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {:.2} |",
                r.level,
                r.dofs,
                format_sci(r.l2_error),
                opt(r.l2_rate),
                format_sci(r.energy_error),
                opt(r.energy_rate),
                r.iterations,
                r.seconds
            );
        }
        s
    }
}

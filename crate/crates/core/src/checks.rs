//! Numerical probes of the structural properties the scheme relies on:
//! monotonicity of the coefficient, strong monotonicity and Lipschitz
//! continuity of the discrete form, commutation of the weak gradient with
//! projections, and equivalence of the discrete norms.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mesh::{GridFamily, Rect};
use crate::models::{assumption_sweep, flux_probe, KappaModel};
use crate::projection::{commutation_residual, Polynomial};
use crate::solver::{lipschitz_slack, monotonicity_gap, KappaInterpolation};
use crate::weak_gradient::{norm_equivalence_bounds, GradientDegree, WgSpace};

pub const POINTWISE_TOL: f64 = 1e-10;
pub const ASSEMBLED_TOL: f64 = 1e-10;
pub const COMMUTATION_TOL: f64 = 1e-11;
/// Largest relative change of the minimal norm ratio between levels.
pub const NORM_RATIO_SPREAD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: String) {
        self.outcomes.push(CheckOutcome { name: name.into(), passed, detail });
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    /// Random `ξ, η` pairs per coefficient model.
    pub flux_samples: usize,
    /// Random weak-function pairs per mesh and degree.
    pub form_samples: usize,
    pub models: Vec<KappaModel>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seed: 20,
            flux_samples: 100_000,
            form_samples: 1_000,
            models: vec![KappaModel::example1(), KappaModel::example2(), KappaModel::smooth()],
        }
    }
}

impl CheckOptions {
    /// Replaces `β` of the first model; used for fault injection.
    pub fn with_tampered_beta(mut self, beta: f64) -> Self {
        if let Some(m) = self.models.first_mut() {
            *m = m.with_bounds(m.alpha, beta);
        }
        self
    }
}

/// Worst slacks of the assembled monotonicity and Lipschitz inequalities,
/// each divided by its natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormProbe {
    pub monotone_slack: f64,
    pub lipschitz_slack: f64,
    pub samples: usize,
}

impl FormProbe {
    pub fn passed(&self, tol: f64) -> bool {
        self.monotone_slack >= -tol && self.lipschitz_slack >= -tol
    }
}

/// Random pairs `u₁, u₂`, amplitudes log-uniform over `[10⁻³, 10^{1.5}]` so
/// that `|∇_w u|` samples the whole range of `κ`. Every other test function
/// is `u₁ − u₂`, the rest are random.
pub fn form_probe<R: Rng + ?Sized>(space: &WgSpace, kappa: &KappaModel, samples: usize, rng: &mut R) -> Result<FormProbe> {
    let interp = KappaInterpolation::Pointwise;
    let mut mono = f64::INFINITY;
    let mut lip = f64::INFINITY;
    for i in 0..samples {
        let a1 = 10f64.powf(rng.random_range(-3.0..1.5));
        let a2 = 10f64.powf(rng.random_range(-3.0..1.5));
        let u1 = space.random_function(rng).scaled(a1);
        let u2 = space.random_function(rng).scaled(a2);
        let v = if i % 2 == 0 { u1.sub(&u2) } else { space.random_function(rng) };
        let (gap, scale) = monotonicity_gap(space, kappa, interp, &u1, &u2)?;
        if scale > 0.0 {
            mono = mono.min(gap / scale);
        }
        let (slack, bound) = lipschitz_slack(space, kappa, interp, &u1, &u2, &v)?;
        if bound > 0.0 {
            lip = lip.min(slack / bound);
        }
    }
    Ok(FormProbe { monotone_slack: mono, lipschitz_slack: lip, samples })
}

/// Random polynomial with every monomial of total degree `≤ degree`,
/// coefficients uniform in `[-1, 1]`.
pub fn random_polynomial<R: Rng + ?Sized>(degree: u32, rng: &mut R) -> Polynomial {
    let mut terms = Vec::new();
    for d in 0..=degree {
        for a in 0..=d {
            terms.push((rng.random_range(-1.0..=1.0), a, d - a));
        }
    }
    Polynomial::new(terms)
}

/// Largest commutation residual over random polynomials of degree up to
/// `j + 1`; `j` is the largest gradient degree of the space.
pub fn commutation_probe<R: Rng + ?Sized>(space: &WgSpace, trials: usize, rng: &mut R) -> Result<f64> {
    let jmax = space.locals().iter().map(|l| l.j).max().unwrap_or(0) as u32;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        for d in 0..=jmax + 1 {
            let p = random_polynomial(d, rng);
            worst = worst.max(commutation_residual(space, &p)?);
        }
    }
    Ok(worst)
}

/// Exact extremes of `|||v||| / ‖v‖_{1,h}` on consecutive rectangular
/// levels; returns `(level, min, max)` rows.
pub fn norm_ratio_levels(k: usize, degree: GradientDegree, levels: std::ops::RangeInclusive<u32>) -> Result<Vec<(u32, f64, f64)>> {
    let mut rows = Vec::new();
    for level in levels {
        let space = WgSpace::new(GridFamily::Rect.build(level, Rect::unit_square())?, k, degree)?;
        let (min, max) = norm_equivalence_bounds(&space)?;
        rows.push((level, min, max));
    }
    Ok(rows)
}

/// Largest relative change of the minimal ratio between consecutive rows.
/// The coarsest rows are pre-asymptotic; callers pass the rows to judge.
pub fn norm_ratio_spread(rows: &[(u32, f64, f64)]) -> f64 {
    rows.windows(2).map(|w| (w[1].1 - w[0].1).abs() / w[0].1.max(w[1].1)).fold(0.0, f64::max)
}

pub fn run_checks(options: &CheckOptions) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut report = CheckReport::default();

    for (i, m) in options.models.iter().enumerate() {
        let sweep = assumption_sweep(m, 20.0, 2000);
        report.push(
            format!("coefficient bounds [{m}]"),
            sweep.passed(POINTWISE_TOL),
            format!(
                "{} pairs, lower slack {:.3e}, upper slack {:.3e}, range slack ({:.3e}, {:.3e})",
                sweep.pairs, sweep.lower_slack, sweep.upper_slack, sweep.range_slack.0, sweep.range_slack.1
            ),
        );
        let probe = flux_probe(m, options.flux_samples, 10.0, options.seed.wrapping_add(i as u64));
        report.push(
            format!("flux monotonicity [{m}]"),
            probe.monotone_slack >= -POINTWISE_TOL,
            format!("{} pairs, slack {:.3e}", probe.samples, probe.monotone_slack),
        );
        report.push(
            format!("flux Lipschitz [{m}]"),
            probe.lipschitz_slack >= -POINTWISE_TOL,
            format!("{} pairs, slack {:.3e}", probe.samples, probe.lipschitz_slack),
        );
    }

    for (family, level) in [(GridFamily::Rect, 3), (GridFamily::Qph, 2)] {
        for k in [1, 2] {
            let space = WgSpace::new(family.build(level, Rect::unit_square())?, k, GradientDegree::KPlus1)?;
            for m in &options.models {
                let p = form_probe(&space, m, options.form_samples, &mut rng)?;
                let name = format!("{} level {level} k={k}", family.name());
                report.push(
                    format!("form monotonicity [{m}, {name}]"),
                    p.monotone_slack >= -ASSEMBLED_TOL,
                    format!("{} pairs, relative slack {:.3e}", p.samples, p.monotone_slack),
                );
                report.push(
                    format!("form Lipschitz [{m}, {name}]"),
                    p.lipschitz_slack >= -ASSEMBLED_TOL,
                    format!("{} pairs, relative slack {:.3e}", p.samples, p.lipschitz_slack),
                );
            }
        }
    }

    for (family, level, degree) in [(GridFamily::Rect, 2, GradientDegree::KPlus1), (GridFamily::Qph, 1, GradientDegree::KPlus2)] {
        for k in [1, 2] {
            let space = WgSpace::new(family.build(level, Rect::unit_square())?, k, degree)?;
            let r = commutation_probe(&space, 3, &mut rng)?;
            report.push(
                format!("weak gradient commutation [{} level {level} k={k} j={}]", family.name(), degree.label()),
                r <= COMMUTATION_TOL,
                format!("max residual {r:.3e}"),
            );
        }
    }

    let rows = norm_ratio_levels(1, GradientDegree::EdgesPlusKMinus1, 2..=5)?;
    let spread = norm_ratio_spread(&rows[1..]);
    let detail = rows.iter().map(|(l, a, b)| format!("L{l} [{a:.4}, {b:.4}]")).collect::<Vec<_>>().join(", ");
    report.push("norm equivalence [rect k=1 j=n+k-1]", spread <= NORM_RATIO_SPREAD && rows.iter().all(|r| r.1 > 0.0), format!("{detail}; spread from level 3 {spread:.3}"));

    Ok(report)
}

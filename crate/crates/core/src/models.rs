//! Diffusion coefficient models `κ(s)`, manufactured benchmarks and their
//! forcing terms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{Point, Rect};
use crate::projection::{Polynomial, SmoothFunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaKind {
    Constant(f64),
    /// `1 + exp(−s²)`
    Exponential,
    /// `(3 + 2s) / (1 + s)`
    Rational,
    /// `2 + 1 / (1 + s²)`
    Smooth,
}

/// `κ(s)` together with monotonicity bounds `α`, `β` such that
/// `α(t − s) ≤ κ(t)t − κ(s)s ≤ β(t − s)` for `t ≥ s ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaModel {
    pub kind: KappaKind,
    pub alpha: f64,
    pub beta: f64,
}

impl KappaModel {
    pub fn constant(c: f64) -> Self {
        KappaModel { kind: KappaKind::Constant(c), alpha: c, beta: c }
    }

    pub fn example1() -> Self {
        KappaModel { kind: KappaKind::Exponential, alpha: 1.0 - (2.0 / std::f64::consts::E).sqrt(), beta: 2.0 }
    }

    pub fn example2() -> Self {
        KappaModel { kind: KappaKind::Rational, alpha: 2.0, beta: 3.0 }
    }

    pub fn smooth() -> Self {
        KappaModel { kind: KappaKind::Smooth, alpha: 15.0 / 8.0, beta: 3.0 }
    }

    /// Same `κ` with different declared bounds (used for fault injection).
    pub fn with_bounds(self, alpha: f64, beta: f64) -> Self {
        KappaModel { alpha, beta, ..self }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, KappaKind::Constant(_))
    }

    pub fn value(&self, s: f64) -> f64 {
        match self.kind {
            KappaKind::Constant(c) => c,
            KappaKind::Exponential => 1.0 + (-s * s).exp(),
            KappaKind::Rational => (3.0 + 2.0 * s) / (1.0 + s),
            KappaKind::Smooth => 2.0 + 1.0 / (1.0 + s * s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self.kind {
            KappaKind::Constant(_) => 0.0,
            KappaKind::Exponential => -2.0 * s * (-s * s).exp(),
            KappaKind::Rational => -1.0 / ((1.0 + s) * (1.0 + s)),
            KappaKind::Smooth => -2.0 * s / ((1.0 + s * s) * (1.0 + s * s)),
        }
    }

    /// `κ(|ξ|) ξ`.
    pub fn flux(&self, xi: &Vector2<f64>) -> Vector2<f64> {
        xi * self.value(xi.norm())
    }

    pub fn name(&self) -> String {
        match self.kind {
            KappaKind::Constant(c) => format!("const:{c}"),
            KappaKind::Exponential => "exp".into(),
            KappaKind::Rational => "rational".into(),
            KappaKind::Smooth => "smooth".into(),
        }
    }
}

impl fmt::Display for KappaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (alpha={}, beta={})", self.name(), self.alpha, self.beta)
    }
}

impl FromStr for KappaModel {
    type Err = Error;

    /// `exp`, `rational`, `smooth`, `const` or `const:<c>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "exp" | "example1" => Ok(KappaModel::example1()),
            "rational" | "example2" => Ok(KappaModel::example2()),
            "smooth" => Ok(KappaModel::smooth()),
            "const" | "constant" | "one" => Ok(KappaModel::constant(1.0)),
            other => {
                let c = other
                    .strip_prefix("const:")
                    .and_then(|c| c.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown kappa model '{other}'")))?;
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::invalid(format!("constant kappa must be positive, got {c}")));
                }
                Ok(KappaModel::constant(c))
            }
        }
    }
}

/// Worst slacks of the monotonicity assumption over a sample grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionSweep {
    /// `min (κ(t)t − κ(s)s − α(t−s))`
    pub lower_slack: f64,
    /// `min (β(t−s) − κ(t)t + κ(s)s)`
    pub upper_slack: f64,
    /// `min (κ(s) − α)` and `min (β − κ(s))`
    pub range_slack: (f64, f64),
    pub pairs: usize,
}

impl AssumptionSweep {
    pub fn passed(&self, tol: f64) -> bool {
        self.lower_slack >= -tol && self.upper_slack >= -tol && self.range_slack.0 >= -tol && self.range_slack.1 >= -tol
    }
}

/// Checks the monotonicity assumption on all pairs `0 ≤ s ≤ t ≤ s_max` of a
/// uniform grid with `n + 1` nodes.
pub fn assumption_sweep(kappa: &KappaModel, s_max: f64, n: usize) -> AssumptionSweep {
    let nodes: Vec<f64> = (0..=n).map(|i| s_max * i as f64 / n as f64).collect();
    let flux: Vec<f64> = nodes.iter().map(|&s| kappa.value(s) * s).collect();
    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    let mut range = (f64::INFINITY, f64::INFINITY);
    let mut pairs = 0;
    for i in 0..nodes.len() {
        let kv = kappa.value(nodes[i]);
        range.0 = range.0.min(kv - kappa.alpha);
        range.1 = range.1.min(kappa.beta - kv);
        for jdx in i + 1..nodes.len() {
            let d = nodes[jdx] - nodes[i];
            let df = flux[jdx] - flux[i];
            lower = lower.min(df - kappa.alpha * d);
            upper = upper.min(kappa.beta * d - df);
            pairs += 1;
        }
    }
    AssumptionSweep { lower_slack: lower, upper_slack: upper, range_slack: range, pairs }
}

/// Worst slacks of the pointwise flux inequalities over random pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxProbe {
    /// `min ((F(ξ) − F(η))·(ξ − η) − α|ξ − η|²)`
    pub monotone_slack: f64,
    /// `min (β|ξ − η| − |F(ξ) − F(η)|)`
    pub lipschitz_slack: f64,
    pub samples: usize,
}

impl FluxProbe {
    pub fn passed(&self, tol: f64) -> bool {
        self.monotone_slack >= -tol && self.lipschitz_slack >= -tol
    }
}

/// Samples `ξ` with log-uniform magnitude in `[10⁻³r, r]` and uniform
/// direction. Half of the `η` are drawn the same way, the other half are
/// perturbations of `ξ` with relative size down to `10⁻⁶`.
pub fn flux_probe(kappa: &KappaModel, samples: usize, radius: f64, seed: u64) -> FluxProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mono = f64::INFINITY;
    let mut lip = f64::INFINITY;
    let polar = |rng: &mut ChaCha8Rng, r: f64| {
        let m = r * 10f64.powf(rng.random_range(-3.0..=0.0));
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        Vector2::new(m * t.cos(), m * t.sin())
    };
    for i in 0..samples {
        let xi = polar(&mut rng, radius);
        let eta = if i % 2 == 0 {
            polar(&mut rng, radius)
        } else {
            let rel = 10f64.powf(rng.random_range(-6.0..=0.0));
            xi + polar(&mut rng, rel * xi.norm())
        };
        let d = xi - eta;
        let df = kappa.flux(&xi) - kappa.flux(&eta);
        mono = mono.min(df.dot(&d) - kappa.alpha * d.norm_squared());
        lip = lip.min(kappa.beta * d.norm() - df.norm());
    }
    FluxProbe { monotone_slack: mono, lipschitz_slack: lip, samples }
}

/// Manufactured exact solutions on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactSolution {
    /// `sin(πx)(y − y²)`
    SinX,
    /// `(x − x²) sin(πy)`
    SinY,
    Polynomial(Polynomial),
}

impl SmoothFunction for ExactSolution {
    fn value(&self, p: &Point) -> f64 {
        match self {
            ExactSolution::SinX => (PI * p.x).sin() * (p.y - p.y * p.y),
            ExactSolution::SinY => (p.x - p.x * p.x) * (PI * p.y).sin(),
            ExactSolution::Polynomial(q) => q.value(p),
        }
    }

    fn gradient(&self, p: &Point) -> Vector2<f64> {
        match self {
            ExactSolution::SinX => {
                Vector2::new(PI * (PI * p.x).cos() * (p.y - p.y * p.y), (PI * p.x).sin() * (1.0 - 2.0 * p.y))
            }
            ExactSolution::SinY => {
                Vector2::new((1.0 - 2.0 * p.x) * (PI * p.y).sin(), PI * (p.x - p.x * p.x) * (PI * p.y).cos())
            }
            ExactSolution::Polynomial(q) => q.gradient(p),
        }
    }

    fn hessian(&self, p: &Point) -> Matrix2<f64> {
        match self {
            ExactSolution::SinX => {
                let (s, c) = (PI * p.x).sin_cos();
                let xy = PI * c * (1.0 - 2.0 * p.y);
                Matrix2::new(-PI * PI * s * (p.y - p.y * p.y), xy, xy, -2.0 * s)
            }
            ExactSolution::SinY => {
                let (s, c) = (PI * p.y).sin_cos();
                let xy = PI * (1.0 - 2.0 * p.x) * c;
                Matrix2::new(-2.0 * s, xy, xy, -PI * PI * (p.x - p.x * p.x) * s)
            }
            ExactSolution::Polynomial(q) => q.hessian(p),
        }
    }
}

/// `f = −∇·(κ(|∇u|)∇u) = −[κ Δu + (κ′/s) ∇uᵀ H ∇u]`, `s = |∇u|`.
pub fn forcing_from_exact(kappa: &KappaModel, exact: &dyn SmoothFunction, p: &Point) -> f64 {
    let g = exact.gradient(p);
    let h = exact.hessian(p);
    let s = g.norm();
    let mut f = kappa.value(s) * h.trace();
    if s >= 1e-12 {
        f += kappa.derivative(s) / s * (g.transpose() * h * g)[(0, 0)];
    }
    -f
}

/// A manufactured problem: `κ`, exact solution and domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub id: Option<u8>,
    pub kappa: KappaModel,
    pub exact: ExactSolution,
    pub domain: Rect,
}

impl Benchmark {
    /// Example 1 (`κ = 1 + e^{−s²}`, `u = sin(πx)(y − y²)`) or example 2
    /// (`κ = (3 + 2s)/(1 + s)`, `u = (x − x²) sin(πy)`).
    pub fn example(id: u8) -> Result<Self> {
        let (kappa, exact) = match id {
            1 => (KappaModel::example1(), ExactSolution::SinX),
            2 => (KappaModel::example2(), ExactSolution::SinY),
            other => return Err(Error::invalid(format!("unknown example {other} (expected 1 or 2)"))),
        };
        Ok(Benchmark { id: Some(id), kappa, exact, domain: Rect::unit_square() })
    }

    pub fn new(kappa: KappaModel, exact: ExactSolution) -> Self {
        Benchmark { id: None, kappa, exact, domain: Rect::unit_square() }
    }

    pub fn with_kappa(self, kappa: KappaModel) -> Self {
        Benchmark { kappa, ..self }
    }

    pub fn forcing(&self, p: &Point) -> f64 {
        forcing_from_exact(&self.kappa, &self.exact, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::derivative_mismatch;

    #[test]
    fn example1_constants() {
        let k = KappaModel::example1();
        assert_eq!(k.value(0.0), 2.0);
        assert!((k.alpha - 0.142_236_2).abs() < 1e-7);
        assert_eq!(k.beta, 2.0);
        assert!(assumption_sweep(&k, 100.0, 2000).passed(1e-12));
    }

    #[test]
    fn example2_constants() {
        let k = KappaModel::example2();
        assert_eq!(k.value(0.0), 3.0);
        assert!((k.value(1e9) - 2.0).abs() < 1e-8);
        assert_eq!((k.alpha, k.beta), (2.0, 3.0));
        assert!(assumption_sweep(&k, 100.0, 2000).passed(1e-12));
    }

    #[test]
    fn smooth_and_constant_models_satisfy_assumption() {
        assert!(assumption_sweep(&KappaModel::smooth(), 100.0, 2000).passed(1e-12));
        assert!(assumption_sweep(&KappaModel::constant(1.0), 100.0, 200).passed(1e-12));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for k in [KappaModel::example1(), KappaModel::example2(), KappaModel::smooth()] {
            for s in [0.0, 0.3, 1.7, 12.0] {
                let d = 1e-6;
                let lo = if s > d { s - d } else { s };
                let fd = (k.value(s + d) - k.value(lo)) / (s + d - lo);
                assert!((fd - k.derivative(s)).abs() < 1e-5, "{k} at {s}");
            }
        }
    }

    #[test]
    fn flux_inequalities_and_fault_injection() {
        for k in [KappaModel::example1(), KappaModel::example2(), KappaModel::smooth(), KappaModel::constant(1.0)] {
            assert!(flux_probe(&k, 20_000, 10.0, 7).passed(1e-10), "{k}");
        }
        let tampered = KappaModel::example1().with_bounds(KappaModel::example1().alpha, 1.0);
        let p = flux_probe(&tampered, 20_000, 10.0, 7);
        assert!(p.lipschitz_slack < -1e-10);
        assert!(!assumption_sweep(&tampered, 100.0, 500).passed(1e-12));
    }

    #[test]
    fn parse_models() {
        assert_eq!("exp".parse::<KappaModel>().unwrap(), KappaModel::example1());
        assert_eq!("const:2.5".parse::<KappaModel>().unwrap(), KappaModel::constant(2.5));
        assert!("const:-1".parse::<KappaModel>().is_err());
        assert!("newton".parse::<KappaModel>().is_err());
    }

    #[test]
    fn benchmark_values() {
        let b1 = Benchmark::example(1).unwrap();
        assert!((b1.exact.value(&Point::new(0.5, 0.5)) - 0.25).abs() < 1e-15);
        assert_eq!(b1.exact.gradient(&Point::new(0.0, 0.0)), Vector2::zeros());
        let b2 = Benchmark::example(2).unwrap();
        for t in [0.0, 0.3, 0.77, 1.0] {
            for p in [Point::new(t, 0.0), Point::new(t, 1.0), Point::new(0.0, t), Point::new(1.0, t)] {
                assert!(b2.exact.value(&p).abs() < 1e-15);
            }
        }
        assert!(Benchmark::example(3).is_err());
        let pts: Vec<Point> = (0..10).map(|i| Point::new(0.05 + 0.09 * i as f64, 0.9 - 0.08 * i as f64)).collect();
        assert!(derivative_mismatch(&ExactSolution::SinX, &pts, 1e-5) < 1e-5);
        assert!(derivative_mismatch(&ExactSolution::SinY, &pts, 1e-5) < 1e-5);
    }

    #[test]
    fn forcing_for_constant_kappa_is_minus_laplacian() {
        let k = KappaModel::constant(1.0);
        for p in [Point::new(0.3, 0.4), Point::new(0.9, 0.05)] {
            let s = (PI * p.x).sin();
            let expected = PI * PI * s * (p.y - p.y * p.y) + 2.0 * s;
            assert!((forcing_from_exact(&k, &ExactSolution::SinX, &p) - expected).abs() < 1e-13);
        }
        let zero = ExactSolution::Polynomial(Polynomial::constant(0.0));
        assert_eq!(forcing_from_exact(&KappaModel::example2(), &zero, &Point::new(0.2, 0.2)), 0.0);
    }

    #[test]
    fn forcing_matches_divergence_of_flux() {
        for id in [1, 2] {
            let b = Benchmark::example(id).unwrap();
            let flux = |p: Point| b.kappa.flux(&b.exact.gradient(&p));
            let p = Point::new(0.3, 0.4);
            let d = 1e-5;
            let div = (flux(Point::new(p.x + d, p.y)).x - flux(Point::new(p.x - d, p.y)).x) / (2.0 * d)
                + (flux(Point::new(p.x, p.y + d)).y - flux(Point::new(p.x, p.y - d)).y) / (2.0 * d);
            assert!((b.forcing(&p) + div).abs() < 1e-7, "example {id}");
        }
    }
}

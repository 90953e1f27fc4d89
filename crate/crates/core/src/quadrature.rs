//! Quadrature on polygons and segments.
//!
//! Cells are fan-triangulated from their centroid; every triangle gets a
//! collapsed (Duffy) tensor Gauss–Legendre rule, which exists for any
//! degree and has strictly positive weights.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::{triangle_area, Point, PolygonalMesh};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values of the Legendre polynomials `P_0..=P_degree` at `t`.
pub fn legendre_values(degree: usize, t: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = t;
    }
    for k in 2..=degree {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * t * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Points and positive weights on a cell; exact for polynomials up to
/// `exactness`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Reference rule on the triangle (0,0), (1,0), (0,1): barycentric-free
/// coordinates `(ξ, η)` and weights summing to 1/2.
fn reference_triangle_rule(exactness: usize) -> Vec<(f64, f64, f64)> {
    // ξ-direction carries the (1 - ξ) Jacobian: degree exactness + 1.
    let n = (exactness + 2).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let xi = 0.5 * (x[i] + 1.0);
        let wi = 0.5 * w[i];
        for j in 0..n {
            let eta = 0.5 * (x[j] + 1.0);
            let wj = 0.5 * w[j];
            out.push((xi, eta * (1.0 - xi), wi * wj * (1.0 - xi)));
        }
    }
    out
}

/// Quadrature on the triangle `(a, b, c)` (counterclockwise).
pub fn triangle_quadrature(a: &Point, b: &Point, c: &Point, exactness: usize) -> QuadratureRule {
    let area2 = 2.0 * triangle_area(a, b, c).abs();
    let ab = b - a;
    let ac = c - a;
    let reference = reference_triangle_rule(exactness);
    let mut points = Vec::with_capacity(reference.len());
    let mut weights = Vec::with_capacity(reference.len());
    for (xi, eta, w) in reference {
        points.push(a + ab * xi + ac * eta);
        weights.push(w * area2);
    }
    QuadratureRule { points, weights, exactness }
}

/// Fan-triangulates a cell from its centroid and unites the triangle rules.
pub fn cell_quadrature(mesh: &PolygonalMesh, cell: usize, exactness: usize) -> Result<QuadratureRule> {
    let c = &mesh.cells()[cell];
    let pts = mesh.cell_points(cell);
    let n = pts.len();
    let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), exactness };
    for i in 0..n {
        let (a, b) = (&pts[i], &pts[(i + 1) % n]);
        if triangle_area(&c.centroid, a, b) <= 0.0 {
            return Err(Error::Geometry {
                cell,
                reason: "fan triangle with non-positive area; cell not star-shaped w.r.t. centroid".into(),
            });
        }
        let t = triangle_quadrature(&c.centroid, a, b, exactness);
        rule.points.extend(t.points);
        rule.weights.extend(t.weights);
    }
    Ok(rule)
}

/// Gauss rule on a segment. `params` are the Gauss nodes in `[-1, 1]` along
/// the direction `a → b`.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub params: Vec<f64>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl EdgeRule {
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// `⌈(exactness + 1) / 2⌉`-point Gauss–Legendre rule mapped onto `a → b`.
pub fn edge_quadrature(a: &Point, b: &Point, exactness: usize) -> EdgeRule {
    let n = (exactness + 1).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a).norm();
    let d: Vector2<f64> = b - a;
    EdgeRule {
        points: x.iter().map(|&t| a + d * (0.5 * (t + 1.0))).collect(),
        weights: w.iter().map(|&wi| wi * half).collect(),
        params: x,
    }
}

//! Scaled monomial bases on cells.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::QuadratureRule;

/// `dim P_m` in two variables.
pub const fn poly_dim(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Exponents `(a, b)` of `x^a y^b`, ordered by total degree, then by
/// increasing power of `y`.
pub fn monomial_exponents(m: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(poly_dim(m));
    for d in 0..=m as u32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// `((x - x_T)/h_T)^a ((y - y_T)/h_T)^b` for `a + b <= degree`, optionally
/// replaced by an orthonormal combination (rows of `transform` hold the
/// monomial coefficients of each basis function).
#[derive(Debug, Clone)]
pub struct CellBasis {
    degree: usize,
    exps: Vec<(u32, u32)>,
    center: Point,
    scale: f64,
    transform: Option<DMatrix<f64>>,
}

impl CellBasis {
    pub fn new(degree: usize, center: Point, scale: f64) -> Self {
        CellBasis { degree, exps: monomial_exponents(degree), center, scale, transform: None }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exps
    }

    pub fn is_orthonormalized(&self) -> bool {
        self.transform.is_some()
    }

    fn powers(&self, p: &Point) -> ([f64; 16], [f64; 16]) {
        let sx = (p.x - self.center.x) / self.scale;
        let sy = (p.y - self.center.y) / self.scale;
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * sx;
            py[i] = py[i - 1] * sy;
        }
        (px, py)
    }

    fn apply_transform(&self, raw: &mut [f64]) {
        if let Some(t) = &self.transform {
            let v = DVector::from_column_slice(raw);
            let r = t * v;
            raw.copy_from_slice(r.as_slice());
        }
    }

    /// Basis values at `p` written into `out[..dim]`.
    pub fn eval(&self, p: &Point, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exps) {
            *o = px[a as usize] * py[b as usize];
        }
        self.apply_transform(&mut out[..self.exps.len()]);
    }

    /// Basis values and both partial derivatives at `p`.
    pub fn eval_with_grad(&self, p: &Point, val: &mut [f64], dx: &mut [f64], dy: &mut [f64]) {
        let (px, py) = self.powers(p);
        let inv = 1.0 / self.scale;
        for (i, &(a, b)) in self.exps.iter().enumerate() {
            let (a, b) = (a as usize, b as usize);
            val[i] = px[a] * py[b];
            dx[i] = if a > 0 { a as f64 * px[a - 1] * py[b] * inv } else { 0.0 };
            dy[i] = if b > 0 { b as f64 * px[a] * py[b - 1] * inv } else { 0.0 };
        }
        let n = self.exps.len();
        self.apply_transform(&mut val[..n]);
        self.apply_transform(&mut dx[..n]);
        self.apply_transform(&mut dy[..n]);
    }

    /// Values at every quadrature point: `rule.len() × dim`.
    pub fn table(&self, points: &[Point]) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = DMatrix::zeros(points.len(), n);
        let mut buf = vec![0.0; n];
        for (q, p) in points.iter().enumerate() {
            self.eval(p, &mut buf);
            for i in 0..n {
                t[(q, i)] = buf[i];
            }
        }
        t
    }

    /// Gram matrix `(φ_i, φ_j)_T` under `rule`.
    pub fn mass_matrix(&self, rule: &QuadratureRule) -> DMatrix<f64> {
        self.weighted_mass_matrix(rule, |_| 1.0)
    }

    pub fn weighted_mass_matrix(&self, rule: &QuadratureRule, weight: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut buf = vec![0.0; n];
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            self.eval(p, &mut buf);
            let wq = w * weight(q);
            for i in 0..n {
                let wi = wq * buf[i];
                for j in i..n {
                    m[(i, j)] += wi * buf[j];
                }
            }
        }
        m.fill_lower_triangle_with_upper_triangle();
        m
    }

    /// The same space with a basis orthonormal in `L²(T)` under `rule`
    /// (Cholesky-based Gram–Schmidt).
    pub fn orthonormalized(&self, rule: &QuadratureRule, cell: usize) -> Result<CellBasis> {
        let raw = CellBasis { transform: None, ..self.clone() };
        let mass = raw.mass_matrix(rule);
        let chol = mass.cholesky().ok_or(Error::SingularLocal { cell, what: "basis mass matrix" })?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(self.dim(), self.dim()))
            .ok_or(Error::SingularLocal { cell, what: "basis mass matrix" })?;
        Ok(CellBasis { transform: Some(l_inv), ..raw })
    }

    /// Coefficients of the `L²(T)` projection of `f` onto this space.
    pub fn project(&self, rule: &QuadratureRule, f: impl Fn(&Point) -> f64) -> Result<DVector<f64>> {
        let mass = self.mass_matrix(rule);
        let mut rhs = DVector::zeros(self.dim());
        let mut buf = vec![0.0; self.dim()];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            self.eval(p, &mut buf);
            let fv = w * f(p);
            for i in 0..self.dim() {
                rhs[i] += fv * buf[i];
            }
        }
        solve_spd(mass, &rhs, 0, "projection mass matrix")
    }

    /// Evaluates `Σ coeffs_i φ_i(p)`.
    pub fn evaluate(&self, coeffs: &[f64], p: &Point) -> f64 {
        let mut buf = vec![0.0; self.dim()];
        self.eval(p, &mut buf);
        buf.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }
}

/// Block-diagonal mass matrix of `[P_j]²` (x-component block first).
pub fn vector_mass_matrix(scalar: &DMatrix<f64>) -> DMatrix<f64> {
    let n = scalar.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(scalar);
    m.view_mut((n, n), (n, n)).copy_from(scalar);
    m
}

pub(crate) fn solve_spd(m: DMatrix<f64>, rhs: &DVector<f64>, cell: usize, what: &'static str) -> Result<DVector<f64>> {
    let chol = m.cholesky().ok_or(Error::SingularLocal { cell, what })?;
    Ok(chol.solve(rhs))
}

/// 2-norm condition number of a symmetric positive definite matrix.
pub fn spd_condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_rect_grid, Rect};
    use crate::quadrature::cell_quadrature;

    #[test]
    fn dimensions() {
        for m in 0..=9 {
            assert_eq!(monomial_exponents(m).len(), poly_dim(m));
        }
        assert_eq!(poly_dim(2), 6);
    }

    #[test]
    fn p0_mass_on_unit_square() {
        let mesh = make_rect_grid(1, Rect::unit_square()).unwrap();
        let c = &mesh.cells()[0];
        let rule = cell_quadrature(&mesh, 0, 0).unwrap();
        let m = CellBasis::new(0, c.centroid, c.diameter).mass_matrix(&rule);
        assert_eq!(m.shape(), (1, 1));
        assert!((m[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p1_mass_matches_direct_integration() {
        let mesh = make_rect_grid(1, Rect::unit_square()).unwrap();
        let c = &mesh.cells()[0];
        let rule = cell_quadrature(&mesh, 0, 2).unwrap();
        let basis = CellBasis::new(1, c.centroid, c.diameter);
        let m = basis.mass_matrix(&rule);
        // basis {1, (x-1/2)/√2, (y-1/2)/√2}: ∫(x-1/2)² = 1/12
        let s2 = 2.0;
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0 / (12.0 * s2), 0.0, 0.0, 0.0, 1.0 / (12.0 * s2)]);
        assert!((&m - &expected).abs().max() < 1e-15);
        assert!(m.clone().cholesky().is_some());
        let v = vector_mass_matrix(&m);
        assert_eq!(v.view((0, 0), (3, 3)), v.view((3, 3), (3, 3)));
        assert_eq!(v.view((0, 3), (3, 3)).abs().max(), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = CellBasis::new(4, Point::new(0.3, 0.2), 0.7);
        let n = b.dim();
        let p = Point::new(0.41, 0.13);
        let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        b.eval_with_grad(&p, &mut v, &mut dx, &mut dy);
        let d = 1e-6;
        let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
        b.eval(&Point::new(p.x + d, p.y), &mut vp);
        b.eval(&Point::new(p.x - d, p.y), &mut vm);
        for i in 0..n {
            assert!((dx[i] - (vp[i] - vm[i]) / (2.0 * d)).abs() < 1e-8);
        }
        b.eval(&Point::new(p.x, p.y + d), &mut vp);
        b.eval(&Point::new(p.x, p.y - d), &mut vm);
        for i in 0..n {
            assert!((dy[i] - (vp[i] - vm[i]) / (2.0 * d)).abs() < 1e-8);
        }
    }

    #[test]
    fn orthonormalized_basis_has_identity_mass() {
        let mesh = make_rect_grid(2, Rect::unit_square()).unwrap();
        let c = &mesh.cells()[1];
        let rule = cell_quadrature(&mesh, 1, 10).unwrap();
        let b = CellBasis::new(5, c.centroid, c.diameter).orthonormalized(&rule, 1).unwrap();
        let m = b.mass_matrix(&rule);
        assert!((m - DMatrix::identity(b.dim(), b.dim())).abs().max() < 1e-10);
    }

    #[test]
    fn mass_condition_is_scale_invariant() {
        let mut prev = None;
        for level in 1..=6 {
            let mesh = make_rect_grid(level, Rect::unit_square()).unwrap();
            let c = &mesh.cells()[0];
            let rule = cell_quadrature(&mesh, 0, 6).unwrap();
            let cond = spd_condition_number(&CellBasis::new(3, c.centroid, c.diameter).mass_matrix(&rule));
            assert!(cond.is_finite());
            if let Some(p) = prev {
                assert!(cond <= 1.01 * p, "level {level}: {cond} vs {p}");
            }
            prev = Some(cond);
        }
    }
}

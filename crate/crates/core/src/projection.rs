//! Local L² projections `Q₀`, `Q_b`, `ℚ_h` and the commutation check
//! `∇_w v = ℚ_h ∇v`.

use nalgebra::{DVector, Matrix2, Vector2};
use rayon::prelude::*;

use crate::basis::solve_spd;
use crate::error::Result;
use crate::mesh::Point;
use crate::quadrature::legendre_values;
use crate::weak_gradient::{LocalWeakGradient, WeakFunction, WgSpace};

/// A smooth scalar field with analytic first and second derivatives.
pub trait SmoothFunction: Sync {
    fn value(&self, p: &Point) -> f64;
    fn gradient(&self, p: &Point) -> Vector2<f64>;
    fn hessian(&self, p: &Point) -> Matrix2<f64>;
}

/// Sum of monomials `c·x^a·y^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(f64, u32, u32)>,
}

impl Polynomial {
    pub fn new(terms: Vec<(f64, u32, u32)>) -> Self {
        Polynomial { terms }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { terms: vec![(c, 0, 0)] }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(_, a, b)| a + b).max().unwrap_or(0)
    }
}

fn pw(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl SmoothFunction for Polynomial {
    fn value(&self, p: &Point) -> f64 {
        self.terms.iter().map(|&(c, a, b)| c * pw(p.x, a) * pw(p.y, b)).sum()
    }

    fn gradient(&self, p: &Point) -> Vector2<f64> {
        let mut g = Vector2::zeros();
        for &(c, a, b) in &self.terms {
            if a > 0 {
                g.x += c * a as f64 * pw(p.x, a - 1) * pw(p.y, b);
            }
            if b > 0 {
                g.y += c * b as f64 * pw(p.x, a) * pw(p.y, b - 1);
            }
        }
        g
    }

    fn hessian(&self, p: &Point) -> Matrix2<f64> {
        let mut h = Matrix2::zeros();
        for &(c, a, b) in &self.terms {
            let (af, bf) = (a as f64, b as f64);
            if a > 1 {
                h[(0, 0)] += c * af * (af - 1.0) * pw(p.x, a - 2) * pw(p.y, b);
            }
            if b > 1 {
                h[(1, 1)] += c * bf * (bf - 1.0) * pw(p.x, a) * pw(p.y, b - 2);
            }
            if a > 0 && b > 0 {
                let m = c * af * bf * pw(p.x, a - 1) * pw(p.y, b - 1);
                h[(0, 1)] += m;
                h[(1, 0)] += m;
            }
        }
        h
    }
}

/// Largest relative mismatch between the analytic derivatives of `u` and
/// central differences with step `delta`, over the given points.
pub fn derivative_mismatch(u: &dyn SmoothFunction, points: &[Point], delta: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    for p in points {
        let dx = Vector2::new(delta, 0.0);
        let dy = Vector2::new(0.0, delta);
        let g = u.gradient(p);
        let fx = (u.value(&(p + dx)) - u.value(&(p - dx))) / (2.0 * delta);
        let fy = (u.value(&(p + dy)) - u.value(&(p - dy))) / (2.0 * delta);
        worst = worst.max(rel(fx, g.x)).max(rel(fy, g.y));
        let h = u.hessian(p);
        let hx = (u.gradient(&(p + dx)) - u.gradient(&(p - dx))) / (2.0 * delta);
        let hy = (u.gradient(&(p + dy)) - u.gradient(&(p - dy))) / (2.0 * delta);
        for r in 0..2 {
            worst = worst.max(rel(hx[r], h[(r, 0)])).max(rel(hy[r], h[(r, 1)]));
        }
    }
    worst
}

/// `Q_h f = {Q₀f, Q_b f}` for a plain closure, including boundary edges.
pub fn project_fn(space: &WgSpace, f: &(dyn Fn(&Point) -> f64 + Sync)) -> Result<WeakFunction> {
    let mesh = space.mesh();
    let dofs = space.dofs();
    let k = space.k();
    let mut v = space.zero();

    let cells = space
        .locals()
        .par_iter()
        .map(|l| {
            l.interior.project(&l.rule, f).map_err(|e| match e {
                crate::Error::SingularLocal { what, .. } => crate::Error::SingularLocal { cell: l.cell, what },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for (c, coeffs) in cells.iter().enumerate() {
        v.coeffs[dofs.cell_dofs(c)].copy_from_slice(coeffs.as_slice());
    }

    let mut psi = vec![0.0; k + 1];
    for (e, edge) in mesh.edges().iter().enumerate() {
        let owner = edge.cells.0;
        let li = mesh.cells()[owner].edges.iter().position(|&x| x == e).expect("edge incidence");
        let rule = &space.local(owner).edges[li].rule;
        // Legendre mass on an edge of length L is diag(L / (2l + 1)).
        let mut coeffs = vec![0.0; k + 1];
        for ((p, &t), &w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
            legendre_values(k, t, &mut psi);
            let fv = f(p);
            for l in 0..=k {
                coeffs[l] += w * fv * psi[l];
            }
        }
        for (l, g) in dofs.edge_dofs(e).enumerate() {
            v.coeffs[g] = coeffs[l] * (2 * l + 1) as f64 / edge.length;
        }
    }
    Ok(v)
}

/// `Q_h u = {Q₀u, Q_b u}`.
pub fn project_qh(space: &WgSpace, u: &dyn SmoothFunction) -> Result<WeakFunction> {
    project_fn(space, &|p| u.value(p))
}

/// `ℚ_h g` on one cell: coefficients in `[P_j(T)]²` (x-block first).
pub fn project_qbold(local: &LocalWeakGradient, g: &dyn Fn(&Point) -> Vector2<f64>) -> Result<DVector<f64>> {
    let nj = local.gradient_dim();
    let mut rx = DVector::zeros(nj);
    let mut ry = DVector::zeros(nj);
    let mut q = vec![0.0; nj];
    for (p, &w) in local.rule.points.iter().zip(&local.rule.weights) {
        local.gradient.eval(p, &mut q);
        let gv = g(p);
        for m in 0..nj {
            rx[m] += w * gv.x * q[m];
            ry[m] += w * gv.y * q[m];
        }
    }
    let cx = solve_spd(local.mass.clone(), &rx, local.cell, "vector mass matrix")?;
    let cy = solve_spd(local.mass.clone(), &ry, local.cell, "vector mass matrix")?;
    let mut out = DVector::zeros(2 * nj);
    out.rows_mut(0, nj).copy_from(&cx);
    out.rows_mut(nj, nj).copy_from(&cy);
    Ok(out)
}

/// Weak gradient of the exact trace pair `{u|_T, u|_∂T}` on one cell,
/// formed from the defining relation with `u` sampled at quadrature points.
pub fn trace_pair_weak_gradient(local: &LocalWeakGradient, u: &dyn SmoothFunction) -> Result<DVector<f64>> {
    let nj = local.gradient_dim();
    let (mut q, mut qx, mut qy) = (vec![0.0; nj], vec![0.0; nj], vec![0.0; nj]);
    let mut bx = DVector::zeros(nj);
    let mut by = DVector::zeros(nj);
    for (p, &w) in local.rule.points.iter().zip(&local.rule.weights) {
        local.gradient.eval_with_grad(p, &mut q, &mut qx, &mut qy);
        let uv = w * u.value(p);
        for m in 0..nj {
            bx[m] -= uv * qx[m];
            by[m] -= uv * qy[m];
        }
    }
    for ce in &local.edges {
        for (p, &w) in ce.rule.points.iter().zip(&ce.rule.weights) {
            local.gradient.eval(p, &mut q);
            let uv = w * u.value(p);
            for m in 0..nj {
                bx[m] += uv * q[m] * ce.normal.x;
                by[m] += uv * q[m] * ce.normal.y;
            }
        }
    }
    let cx = solve_spd(local.mass.clone(), &bx, local.cell, "vector mass matrix")?;
    let cy = solve_spd(local.mass.clone(), &by, local.cell, "vector mass matrix")?;
    let mut out = DVector::zeros(2 * nj);
    out.rows_mut(0, nj).copy_from(&cx);
    out.rows_mut(nj, nj).copy_from(&cy);
    Ok(out)
}

/// `max_T ‖∇_w{u, u} − ℚ_h∇u‖_T`.
pub fn commutation_residual(space: &WgSpace, u: &dyn SmoothFunction) -> Result<f64> {
    let per_cell = space
        .locals()
        .par_iter()
        .map(|l| {
            let wg = trace_pair_weak_gradient(l, u)?;
            let qg = project_qbold(l, &|p| u.gradient(p))?;
            let d = wg - qg;
            let nj = l.gradient_dim();
            let dx = d.rows(0, nj);
            let dy = d.rows(nj, nj);
            let sq = (dx.transpose() * &l.mass * dx)[(0, 0)] + (dy.transpose() * &l.mass * dy)[(0, 0)];
            Ok(sq.max(0.0).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_cell.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_qph_grid, make_rect_grid, Rect};
    use crate::weak_gradient::GradientDegree;

    struct SinBump;

    impl SmoothFunction for SinBump {
        fn value(&self, p: &Point) -> f64 {
            (std::f64::consts::PI * p.x).sin() * (p.y - p.y * p.y)
        }
        fn gradient(&self, p: &Point) -> Vector2<f64> {
            let pi = std::f64::consts::PI;
            Vector2::new(pi * (pi * p.x).cos() * (p.y - p.y * p.y), (pi * p.x).sin() * (1.0 - 2.0 * p.y))
        }
        fn hessian(&self, p: &Point) -> Matrix2<f64> {
            let pi = std::f64::consts::PI;
            let xy = pi * (pi * p.x).cos() * (1.0 - 2.0 * p.y);
            Matrix2::new(-pi * pi * (pi * p.x).sin() * (p.y - p.y * p.y), xy, xy, -2.0 * (pi * p.x).sin())
        }
    }

    #[test]
    fn polynomial_derivatives() {
        let p = Polynomial::new(vec![(1.5, 3, 1), (-2.0, 0, 2), (0.5, 1, 0)]);
        let pts = [Point::new(0.3, 0.7), Point::new(-0.2, 0.1)];
        assert!(derivative_mismatch(&p, &pts, 1e-5) < 1e-5);
        assert_eq!(p.degree(), 4);
        assert!(derivative_mismatch(&SinBump, &pts, 1e-5) < 1e-5);
    }

    #[test]
    fn qh_reproduces_polynomials() {
        let mesh = make_qph_grid(2, Rect::unit_square()).unwrap();
        let space = WgSpace::new(mesh, 2, GradientDegree::KPlus2).unwrap();
        let u = Polynomial::new(vec![(1.0, 2, 0), (-0.5, 1, 1), (0.25, 0, 1), (2.0, 0, 0)]);
        let v = project_qh(&space, &u).unwrap();
        for c in 0..space.mesh().num_cells() {
            for p in &space.local(c).rule.points {
                assert!((space.eval_interior(&v, c, p) - u.value(p)).abs() < 1e-12);
            }
        }
        for (e, edge) in space.mesh().edges().iter().enumerate() {
            let a = space.mesh().vertices()[edge.vertices[0]];
            let b = space.mesh().vertices()[edge.vertices[1]];
            for t in [-0.7, 0.0, 0.4] {
                let p = a + (b - a) * (0.5 * (t + 1.0));
                assert!((space.eval_edge(&v, e, t) - u.value(&p)).abs() < 1e-12);
            }
        }
        assert!(project_qh(&space, &Polynomial::constant(0.0)).unwrap().coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn q0_is_orthogonal() {
        let mesh = make_rect_grid(2, Rect::unit_square()).unwrap();
        let space = WgSpace::new(mesh, 2, GradientDegree::KPlus1).unwrap();
        let v = project_qh(&space, &SinBump).unwrap();
        for l in space.locals() {
            let n0 = l.num_interior();
            let mut phi = vec![0.0; n0];
            let coeffs = &v.coeffs[space.dofs().cell_dofs(l.cell)];
            let mut r = vec![0.0; n0];
            for (p, w) in l.rule.points.iter().zip(&l.rule.weights) {
                l.interior.eval(p, &mut phi);
                let diff = SinBump.value(p) - l.interior.evaluate(coeffs, p);
                for i in 0..n0 {
                    r[i] += w * diff * phi[i];
                }
            }
            assert!(r.iter().all(|x| x.abs() < 1e-14), "{r:?}");
        }
    }

    #[test]
    fn qbold_reproduces_gradients_of_polynomials() {
        let mesh = make_qph_grid(1, Rect::unit_square()).unwrap();
        let space = WgSpace::new(mesh, 1, GradientDegree::KPlus2).unwrap();
        let u = Polynomial::new(vec![(1.0, 3, 1), (2.0, 1, 1)]);
        for l in space.locals() {
            let c = project_qbold(l, &|p| u.gradient(p)).unwrap();
            let nj = l.gradient_dim();
            for p in &l.rule.points {
                let gx = l.gradient.evaluate(&c.as_slice()[..nj], p);
                let gy = l.gradient.evaluate(&c.as_slice()[nj..], p);
                let g = u.gradient(p);
                assert!((gx - g.x).abs() < 1e-11 && (gy - g.y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn commutation_for_polynomials_and_constants() {
        for mesh in [make_rect_grid(2, Rect::unit_square()).unwrap(), make_qph_grid(2, Rect::unit_square()).unwrap()] {
            let space = WgSpace::new(mesh, 1, GradientDegree::Fixed(2)).unwrap();
            let u = Polynomial::new(vec![(1.0, 2, 1)]);
            assert!(commutation_residual(&space, &u).unwrap() < 1e-12);
            assert!(commutation_residual(&space, &Polynomial::constant(3.0)).unwrap() < 1e-13);
        }
    }

    #[test]
    fn commutation_for_transcendental_input() {
        let mesh = make_rect_grid(4, Rect::unit_square()).unwrap();
        let space = WgSpace::new(mesh, 2, GradientDegree::Fixed(3)).unwrap();
        assert!(commutation_residual(&space, &SinBump).unwrap() < 1e-9);
    }

    #[test]
    fn interpolation_error_is_first_order_for_k1() {
        let mut prev = None;
        for level in 3..=5 {
            let mesh = make_rect_grid(level, Rect::unit_square()).unwrap();
            let space = WgSpace::new(mesh, 1, GradientDegree::KPlus1).unwrap();
            let qh = project_qh(&space, &SinBump).unwrap();
            // |||u − Q_h u||| measured as ‖∇u − ∇_w Q_h u‖
            let mut sq = 0.0;
            for l in space.locals() {
                let (gx, gy) = l.values_at_quadrature(&space.gather(&qh, l.cell));
                for (q, (p, w)) in l.rule.points.iter().zip(&l.rule.weights).enumerate() {
                    let g = SinBump.gradient(p);
                    sq += w * ((g.x - gx[q]).powi(2) + (g.y - gy[q]).powi(2));
                }
            }
            let err = sq.sqrt();
            if let Some(p) = prev {
                let ratio: f64 = p / err;
                assert!(ratio > 1.9, "level {level}: ratio {ratio}");
            }
            prev = Some(err);
        }
    }
}

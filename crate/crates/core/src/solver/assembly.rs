//! Local matrices of the frozen-coefficient form, the residual and the
//! nonlinear form `a_h(u; u, v) = (κ(|∇_w u|)∇_w u, ∇_w v)`.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::CellBasis;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::models::KappaModel;
use crate::quadrature::legendre_values;
use crate::solver::linear::{LinearSolver, SparseSystem};
use crate::weak_gradient::{LocalWeakGradient, WeakFunction, WgSpace};

/// How `κ(|∇_w u|)` enters the quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaInterpolation {
    /// L² projection onto discontinuous `P_{k−1}` per cell.
    #[default]
    Projected,
    /// Evaluated directly at every quadrature point.
    Pointwise,
}

impl FromStr for KappaInterpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pk-1" | "projected" => Ok(KappaInterpolation::Projected),
            "pointwise" => Ok(KappaInterpolation::Pointwise),
            other => Err(Error::invalid(format!("unknown kappa interpolation '{other}' (pk-1 or pointwise)"))),
        }
    }
}

/// Penalty `Σ_T Σ_e ∫_e c (u₀ − u_b)(v₀ − v_b)` of the stabilized scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    #[default]
    None,
    /// `c = 1/h` with the global mesh size.
    GlobalH,
    /// `c = 1/h_T` per cell.
    LocalH,
}

impl Penalty {
    pub fn is_active(self) -> bool {
        self != Penalty::None
    }

    fn scale(self, space: &WgSpace, local: &LocalWeakGradient) -> Option<f64> {
        match self {
            Penalty::None => None,
            Penalty::GlobalH => Some(1.0 / space.mesh().h()),
            Penalty::LocalH => Some(1.0 / local.diameter),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FormOptions {
    pub interpolation: KappaInterpolation,
    pub penalty: Penalty,
}

/// `∇_w u` at the cell quadrature points and `κ` evaluated there.
pub struct CellState {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub kappa: Vec<f64>,
}

/// `κ(|∇_w u|)` at the quadrature points of one cell.
pub fn cell_state(
    local: &LocalWeakGradient,
    kappa: &KappaModel,
    interpolation: KappaInterpolation,
    u_local: &DVector<f64>,
) -> Result<CellState> {
    let (gx, gy) = local.values_at_quadrature(u_local);
    let mut kv: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| kappa.value(x.hypot(*y))).collect();
    if interpolation == KappaInterpolation::Projected && !kappa.is_constant() {
        let basis = CellBasis::new(local.k - 1, local.interior.center(), local.interior.scale());
        let table = basis.table(&local.rule.points);
        let wk = DVector::from_iterator(kv.len(), local.rule.weights.iter().zip(&kv).map(|(w, k)| w * k));
        let mass = basis.mass_matrix(&local.rule);
        let coeffs = mass
            .cholesky()
            .ok_or(Error::SingularLocal { cell: local.cell, what: "kappa projection mass matrix" })?
            .solve(&(table.transpose() * wk));
        let projected = table * coeffs;
        kv.copy_from_slice(projected.as_slice());
    }
    if let Some(q) = kv.iter().position(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(Error::NotPositiveDefinite(format!(
            "kappa = {} at quadrature point {q} of cell {}; the frozen matrix would be indefinite",
            kv[q], local.cell
        )));
    }
    Ok(CellState { gx, gy, kappa: kv })
}

/// `G_xᵀ W G_x + G_yᵀ W G_y` with `W = Σ_q w_q κ_q p_q p_qᵀ`, plus the
/// optional penalty block. Symmetrized exactly.
pub fn local_matrix(local: &LocalWeakGradient, kappa_q: &[f64], penalty: Option<f64>) -> DMatrix<f64> {
    let nj = local.gradient_dim();
    let table = local.gradient.table(&local.rule.points);
    let mut scaled = table.clone();
    for (q, (w, k)) in local.rule.weights.iter().zip(kappa_q).enumerate() {
        scaled.row_mut(q).scale_mut(w * k);
    }
    let weight = table.transpose() * scaled;
    let gxm = local.operator.rows(0, nj);
    let gym = local.operator.rows(nj, nj);
    let mut a = gxm.transpose() * &weight * gxm + gym.transpose() * &weight * gym;
    if let Some(c) = penalty {
        add_penalty(local, c, &mut a);
    }
    (&a + a.transpose()) * 0.5
}

fn add_penalty(local: &LocalWeakGradient, c: f64, a: &mut DMatrix<f64>) {
    let n0 = local.num_interior();
    let nb = local.k + 1;
    let nl = local.num_local_dofs();
    let mut phi = vec![0.0; n0];
    let mut psi = vec![0.0; nb];
    let mut d = DVector::zeros(nl);
    for (li, ce) in local.edges.iter().enumerate() {
        for ((p, &t), &w) in ce.rule.points.iter().zip(&ce.rule.params).zip(&ce.rule.weights) {
            local.interior.eval(p, &mut phi);
            legendre_values(local.k, t, &mut psi);
            d.fill(0.0);
            d.rows_mut(0, n0).copy_from_slice(&phi);
            for l in 0..nb {
                d[n0 + li * nb + l] = -psi[l];
            }
            a.ger(c * w, &d, &d, 1.0);
        }
    }
}

/// `(f, φ₀)_T` over the local DOFs (edge entries are zero).
pub fn local_load(local: &LocalWeakGradient, f: &(dyn Fn(&Point) -> f64 + Sync)) -> DVector<f64> {
    let n0 = local.num_interior();
    let mut b = DVector::zeros(local.num_local_dofs());
    let mut phi = vec![0.0; n0];
    for (p, &w) in local.rule.points.iter().zip(&local.rule.weights) {
        local.interior.eval(p, &mut phi);
        let fw = w * f(p);
        for i in 0..n0 {
            b[i] += fw * phi[i];
        }
    }
    b
}

/// Local frozen matrices for state `u`.
pub fn local_matrices(space: &WgSpace, kappa: &KappaModel, state: &WeakFunction, options: FormOptions) -> Result<Vec<DMatrix<f64>>> {
    space
        .locals()
        .par_iter()
        .map(|l| {
            let st = cell_state(l, kappa, options.interpolation, &space.gather(state, l.cell))?;
            Ok(local_matrix(l, &st.kappa, options.penalty.scale(space, l)))
        })
        .collect()
}

/// `(f, v₀)` over free DOFs.
pub fn load_vector(space: &WgSpace, f: &(dyn Fn(&Point) -> f64 + Sync)) -> Vec<f64> {
    let parts: Vec<DVector<f64>> = space.locals().par_iter().map(|l| local_load(l, f)).collect();
    scatter_free(space, &parts)
}

pub(crate) fn scatter_free(space: &WgSpace, parts: &[DVector<f64>]) -> Vec<f64> {
    let dofs = space.dofs();
    let mut out = vec![0.0; dofs.num_free()];
    for (c, part) in parts.iter().enumerate() {
        for (a, g) in dofs.local_dofs(space.mesh(), c).into_iter().enumerate() {
            if let Some(i) = dofs.free_index(g) {
                out[i] += part[a];
            }
        }
    }
    out
}

/// Frozen system `A(state) x = b` over free DOFs.
pub fn assemble_frozen(
    space: &WgSpace,
    kappa: &KappaModel,
    state: &WeakFunction,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    options: FormOptions,
) -> Result<SparseSystem> {
    let locals = local_matrices(space, kappa, state, options)?;
    Ok(LinearSolver::assemble_full(space, &locals, load_vector(space, f)))
}

/// Frozen system of the stabilized scheme; uses the global `1/h` penalty
/// unless `options` already selects one.
pub fn assemble_stabilized(
    space: &WgSpace,
    kappa: &KappaModel,
    state: &WeakFunction,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    options: FormOptions,
) -> Result<SparseSystem> {
    let penalty = if options.penalty.is_active() { options.penalty } else { Penalty::GlobalH };
    assemble_frozen(space, kappa, state, f, FormOptions { penalty, ..options })
}

/// Local residual `a_h(u; u, φ) + penalty − (f, φ₀)` evaluated from fluxes
/// at quadrature points.
fn local_residual(
    space: &WgSpace,
    local: &LocalWeakGradient,
    kappa: &KappaModel,
    u: &WeakFunction,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    options: FormOptions,
) -> Result<DVector<f64>> {
    let ul = space.gather(u, local.cell);
    let st = cell_state(local, kappa, options.interpolation, &ul)?;
    let nj = local.gradient_dim();
    let table = local.gradient.table(&local.rule.points);
    let fx = DVector::from_iterator(st.gx.len(), (0..st.gx.len()).map(|q| local.rule.weights[q] * st.kappa[q] * st.gx[q]));
    let fy = DVector::from_iterator(st.gy.len(), (0..st.gy.len()).map(|q| local.rule.weights[q] * st.kappa[q] * st.gy[q]));
    let mut r = local.operator.rows(0, nj).transpose() * (table.transpose() * fx)
        + local.operator.rows(nj, nj).transpose() * (table.transpose() * fy);
    if let Some(c) = options.penalty.scale(space, local) {
        let n0 = local.num_interior();
        let nb = local.k + 1;
        let mut phi = vec![0.0; n0];
        let mut psi = vec![0.0; nb];
        for (li, ce) in local.edges.iter().enumerate() {
            for ((p, &t), &w) in ce.rule.points.iter().zip(&ce.rule.params).zip(&ce.rule.weights) {
                local.interior.eval(p, &mut phi);
                legendre_values(local.k, t, &mut psi);
                let u0: f64 = (0..n0).map(|i| phi[i] * ul[i]).sum();
                let ub: f64 = (0..nb).map(|l| psi[l] * ul[n0 + li * nb + l]).sum();
                let jump = c * w * (u0 - ub);
                for i in 0..n0 {
                    r[i] += jump * phi[i];
                }
                for l in 0..nb {
                    r[n0 + li * nb + l] -= jump * psi[l];
                }
            }
        }
    }
    Ok(r - local_load(local, f))
}

/// Residual `r_i = a_h(u; u, φ_i) − (f, φ_{i,0})` over free DOFs.
pub fn residual(
    space: &WgSpace,
    kappa: &KappaModel,
    u: &WeakFunction,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    options: FormOptions,
) -> Result<Vec<f64>> {
    let parts = space
        .locals()
        .par_iter()
        .map(|l| local_residual(space, l, kappa, u, f, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(scatter_free(space, &parts))
}

/// `a_h(u; u, v) = Σ_T (κ(|∇_w u|)∇_w u, ∇_w v)_T`.
pub fn nonlinear_form(
    space: &WgSpace,
    kappa: &KappaModel,
    interpolation: KappaInterpolation,
    u: &WeakFunction,
    v: &WeakFunction,
) -> Result<f64> {
    let parts = space
        .locals()
        .par_iter()
        .map(|l| {
            let st = cell_state(l, kappa, interpolation, &space.gather(u, l.cell))?;
            let (vx, vy) = l.values_at_quadrature(&space.gather(v, l.cell));
            Ok((0..vx.len()).map(|q| l.rule.weights[q] * st.kappa[q] * (st.gx[q] * vx[q] + st.gy[q] * vy[q])).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// `a_h(u₁; u₁, u₁−u₂) − a_h(u₂; u₂, u₁−u₂) − α|||u₁−u₂|||²`; returns the gap
/// and `|||u₁−u₂|||²` for scaling.
pub fn monotonicity_gap(
    space: &WgSpace,
    kappa: &KappaModel,
    interpolation: KappaInterpolation,
    u1: &WeakFunction,
    u2: &WeakFunction,
) -> Result<(f64, f64)> {
    let d = u1.sub(u2);
    let a1 = nonlinear_form(space, kappa, interpolation, u1, &d)?;
    let a2 = nonlinear_form(space, kappa, interpolation, u2, &d)?;
    let e = space.energy_norm(&d);
    Ok((a1 - a2 - kappa.alpha * e * e, e * e))
}

/// `β|||u₁−u₂||| |||v||| − |a_h(u₁; u₁, v) − a_h(u₂; u₂, v)|`; returns the
/// slack and `β|||u₁−u₂||| |||v|||` for scaling.
pub fn lipschitz_slack(
    space: &WgSpace,
    kappa: &KappaModel,
    interpolation: KappaInterpolation,
    u1: &WeakFunction,
    u2: &WeakFunction,
    v: &WeakFunction,
) -> Result<(f64, f64)> {
    let a1 = nonlinear_form(space, kappa, interpolation, u1, v)?;
    let a2 = nonlinear_form(space, kappa, interpolation, u2, v)?;
    let bound = kappa.beta * space.energy_norm(&u1.sub(u2)) * space.energy_norm(v);
    Ok((bound - (a1 - a2).abs(), bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_qph_grid, make_rect_grid, Rect};
    use crate::weak_gradient::GradientDegree;

    fn space(level: u32) -> WgSpace {
        WgSpace::new(make_rect_grid(level, Rect::unit_square()).unwrap(), 1, GradientDegree::KPlus1).unwrap()
    }

    #[test]
    fn constant_kappa_matrix_is_state_independent() {
        let s = space(3);
        let k = KappaModel::constant(1.0);
        let mut rng = rand::rng();
        let a = assemble_frozen(&s, &k, &s.random_function(&mut rng), &|_| 1.0, FormOptions::default()).unwrap();
        let b = assemble_frozen(&s, &k, &s.random_function(&mut rng), &|_| 1.0, FormOptions::default()).unwrap();
        assert_eq!(a.matrix.val(), b.matrix.val());
        assert_eq!(a.symmetry_error(), 0.0);
    }

    #[test]
    fn example1_at_zero_state_doubles_the_laplacian() {
        let s = space(3);
        let lap = assemble_frozen(&s, &KappaModel::constant(1.0), &s.zero(), &|_| 0.0, FormOptions::default()).unwrap();
        let ex = assemble_frozen(&s, &KappaModel::example1(), &s.zero(), &|_| 0.0, FormOptions::default()).unwrap();
        for (a, b) in lap.matrix.val().iter().zip(ex.matrix.val()) {
            assert!((2.0 * a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn residual_is_au_minus_b_for_linear_kappa() {
        let s = WgSpace::new(make_qph_grid(2, Rect::unit_square()).unwrap(), 2, GradientDegree::KPlus2).unwrap();
        let k = KappaModel::constant(1.5);
        let f = |p: &Point| p.x + 2.0 * p.y;
        let u = s.random_function(&mut rand::rng());
        for penalty in [Penalty::None, Penalty::GlobalH, Penalty::LocalH] {
            let opts = FormOptions { penalty, ..Default::default() };
            let sys = assemble_frozen(&s, &k, &u, &f, opts).unwrap();
            let au = sys.matvec(&s.dofs().restrict_to_free(&u.coeffs));
            let r = residual(&s, &k, &u, &f, opts).unwrap();
            let scale = au.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..r.len() {
                assert!((r[i] - (au[i] - sys.rhs[i])).abs() < 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn penalty_vanishes_on_matching_traces() {
        let s = space(2);
        let u = crate::projection::project_fn(&s, &|p| 0.3 * p.x - 0.1 * p.y).unwrap();
        let opts = FormOptions { penalty: Penalty::GlobalH, ..Default::default() };
        let plain = local_matrices(&s, &KappaModel::constant(1.0), &s.zero(), FormOptions::default()).unwrap();
        let pen = local_matrices(&s, &KappaModel::constant(1.0), &s.zero(), opts).unwrap();
        for c in 0..s.mesh().num_cells() {
            let ul = s.gather(&u, c);
            let diff = (&pen[c] - &plain[c]) * &ul;
            assert!(diff.amax() < 1e-13);
        }
    }

    #[test]
    fn monotonicity_and_lipschitz_on_random_pairs() {
        let s = WgSpace::new(make_qph_grid(2, Rect::unit_square()).unwrap(), 1, GradientDegree::KPlus2).unwrap();
        let mut rng = rand::rng();
        for k in [KappaModel::example1(), KappaModel::example2()] {
            for _ in 0..20 {
                let u1 = s.random_function(&mut rng).scaled(5.0);
                let u2 = s.random_function(&mut rng);
                let v = s.random_function(&mut rng);
                let (gap, scale) = monotonicity_gap(&s, &k, KappaInterpolation::Pointwise, &u1, &u2).unwrap();
                assert!(gap >= -1e-10 * scale);
                let (slack, bound) = lipschitz_slack(&s, &k, KappaInterpolation::Pointwise, &u1, &u2, &v).unwrap();
                assert!(slack >= -1e-10 * bound.max(1.0));
            }
            let u = s.random_function(&mut rng);
            assert_eq!(monotonicity_gap(&s, &k, KappaInterpolation::Projected, &u, &u).unwrap().0, 0.0);
        }
    }

    #[test]
    fn projected_kappa_is_cell_average_for_k1() {
        let s = space(2);
        let k = KappaModel::example1();
        let u = s.random_function(&mut rand::rng());
        let l = s.local(0);
        let ul = s.gather(&u, 0);
        let pw = cell_state(l, &k, KappaInterpolation::Pointwise, &ul).unwrap();
        let pr = cell_state(l, &k, KappaInterpolation::Projected, &ul).unwrap();
        let area: f64 = l.rule.weights.iter().sum();
        let mean = l.rule.weights.iter().zip(&pw.kappa).map(|(w, k)| w * k).sum::<f64>() / area;
        assert!(pr.kappa.iter().all(|k| (k - mean).abs() < 1e-14));
    }
}

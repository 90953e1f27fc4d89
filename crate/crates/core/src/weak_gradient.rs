//! Discrete weak gradient and the weak function space built on a mesh.
//!
//! On a cell `T` with `n` edges, a weak function has `dim P_k(T)` interior
//! coefficients (scaled monomials) and `k + 1` Legendre coefficients per edge.
//! The weak gradient `g ∈ [P_j(T)]²` solves
//!
//! ```text
//! (g, τ)_T = −(v₀, ∇·τ)_T + ⟨v_b, τ·n⟩_∂T   for all τ ∈ [P_j(T)]²
//! ```
//!
//! which in matrix form reads `M_T g = B_T v`, hence `G_T = M_T⁻¹ B_T`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use rayon::prelude::*;

use crate::basis::{poly_dim, CellBasis};
use crate::error::{Error, Result};
use crate::mesh::{Point, PolygonalMesh};
use crate::quadrature::{cell_quadrature, edge_quadrature, legendre_values, EdgeRule, QuadratureRule};

/// Degree `j` of the weak gradient space relative to `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientDegree {
    KPlus1,
    KPlus2,
    /// `j = n + k − 1` with `n` the number of edges of the cell.
    EdgesPlusKMinus1,
    Fixed(usize),
}

impl GradientDegree {
    pub fn for_cell(self, k: usize, edges: usize) -> usize {
        match self {
            GradientDegree::KPlus1 => k + 1,
            GradientDegree::KPlus2 => k + 2,
            GradientDegree::EdgesPlusKMinus1 => edges + k - 1,
            GradientDegree::Fixed(j) => j,
        }
    }

    pub fn label(self) -> String {
        match self {
            GradientDegree::KPlus1 => "k+1".into(),
            GradientDegree::KPlus2 => "k+2".into(),
            GradientDegree::EdgesPlusKMinus1 => "n+k-1".into(),
            GradientDegree::Fixed(j) => j.to_string(),
        }
    }
}

impl std::str::FromStr for GradientDegree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace(' ', "").as_str() {
            "k+1" => Ok(GradientDegree::KPlus1),
            "k+2" => Ok(GradientDegree::KPlus2),
            "n+k-1" => Ok(GradientDegree::EdgesPlusKMinus1),
            other => other
                .parse()
                .map(GradientDegree::Fixed)
                .map_err(|_| Error::invalid(format!("bad gradient degree '{s}' (k+1, k+2, n+k-1 or an integer)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceOptions {
    /// Orthonormalize the cell bases against the local mass matrix.
    pub orthonormal: bool,
    /// Overrides the default cell quadrature exactness `2j + max(k−1, 0) + 1`.
    pub cell_exactness: Option<usize>,
    /// Overrides the default edge quadrature exactness `2j + k`.
    pub edge_exactness: Option<usize>,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        SpaceOptions { orthonormal: false, cell_exactness: None, edge_exactness: None }
    }
}

/// Global numbering of the weak function coefficients.
///
/// Cell blocks come first (`dim P_k` each), followed by edge blocks (`k + 1`
/// each). Free DOFs exclude the boundary edge blocks.
#[derive(Debug, Clone)]
pub struct DofMap {
    k: usize,
    cell_block: usize,
    edge_block: usize,
    num_cells: usize,
    num_edges: usize,
    boundary: Vec<bool>,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &PolygonalMesh, k: usize) -> Self {
        let cell_block = poly_dim(k);
        let edge_block = k + 1;
        let boundary = mesh.boundary_edge_flags();
        let total = mesh.num_cells() * cell_block + mesh.num_edges() * edge_block;
        let mut free_index = vec![None; total];
        let mut free_dofs = Vec::new();
        let cell_total = mesh.num_cells() * cell_block;
        for (g, slot) in free_index.iter_mut().enumerate() {
            let is_free = g < cell_total || !boundary[(g - cell_total) / edge_block];
            if is_free {
                *slot = Some(free_dofs.len());
                free_dofs.push(g);
            }
        }
        DofMap {
            k,
            cell_block,
            edge_block,
            num_cells: mesh.num_cells(),
            num_edges: mesh.num_edges(),
            boundary,
            free_index,
            free_dofs,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> usize {
        self.free_index.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn cell_block_size(&self) -> usize {
        self.cell_block
    }

    pub fn edge_block_size(&self) -> usize {
        self.edge_block
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn cell_dofs(&self, cell: usize) -> Range<usize> {
        cell * self.cell_block..(cell + 1) * self.cell_block
    }

    pub fn edge_dofs(&self, edge: usize) -> Range<usize> {
        let base = self.num_cells * self.cell_block + edge * self.edge_block;
        base..base + self.edge_block
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.boundary[edge]
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// Global DOF of every free index.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Global DOFs of a cell in local order: interior block, then the edge
    /// blocks in the cell's counterclockwise edge order.
    pub fn local_dofs(&self, mesh: &PolygonalMesh, cell: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.cell_dofs(cell).collect();
        for &e in &mesh.cells()[cell].edges {
            out.extend(self.edge_dofs(e));
        }
        out
    }

    pub fn restrict_to_free(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&g| full[g]).collect()
    }

    pub fn extend_from_free(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.total()];
        for (&g, &v) in self.free_dofs.iter().zip(free) {
            full[g] = v;
        }
        full
    }
}

/// A weak function `{v₀, v_b}` as a coefficient vector over a [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFunction {
    pub coeffs: Vec<f64>,
}

impl WeakFunction {
    pub fn zeros(dofs: &DofMap) -> Self {
        WeakFunction { coeffs: vec![0.0; dofs.total()] }
    }

    pub fn from_free(dofs: &DofMap, free: &[f64]) -> Self {
        WeakFunction { coeffs: dofs.extend_from_free(free) }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Whether the boundary edge blocks vanish (membership in `V_h⁰`).
    pub fn has_zero_boundary(&self, dofs: &DofMap) -> bool {
        (0..dofs.num_edges())
            .filter(|&e| dofs.is_boundary_edge(e))
            .all(|e| dofs.edge_dofs(e).all(|g| self.coeffs[g] == 0.0))
    }

    pub fn axpy(&mut self, a: f64, x: &WeakFunction) {
        for (s, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += a * xv;
        }
    }

    pub fn sub(&self, other: &WeakFunction) -> WeakFunction {
        WeakFunction { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    pub fn scaled(&self, a: f64) -> WeakFunction {
        WeakFunction { coeffs: self.coeffs.iter().map(|v| a * v).collect() }
    }
}

/// Per-edge data of one cell.
#[derive(Debug, Clone)]
pub struct CellEdge {
    pub edge: usize,
    /// Outward unit normal with respect to the owning cell.
    pub normal: Vector2<f64>,
    /// Gauss rule in the edge's canonical orientation.
    pub rule: EdgeRule,
}

/// The weak gradient operator of a single cell, `G_T = M_T⁻¹ B_T`.
#[derive(Debug, Clone)]
pub struct LocalWeakGradient {
    pub cell: usize,
    pub k: usize,
    pub j: usize,
    pub diameter: f64,
    pub interior: CellBasis,
    pub gradient: CellBasis,
    pub rule: QuadratureRule,
    pub edges: Vec<CellEdge>,
    /// Scalar `P_j` mass matrix; the vector mass matrix is two copies of it.
    pub mass: DMatrix<f64>,
    /// `B_T`, shape `2·dim P_j × local DOFs`.
    pub rhs: DMatrix<f64>,
    /// `G_T`, shape `2·dim P_j × local DOFs`.
    pub operator: DMatrix<f64>,
}

impl LocalWeakGradient {
    pub fn num_interior(&self) -> usize {
        self.interior.dim()
    }

    pub fn num_local_dofs(&self) -> usize {
        self.interior.dim() + self.edges.len() * (self.k + 1)
    }

    pub fn gradient_dim(&self) -> usize {
        self.gradient.dim()
    }

    /// Coefficients of `∇_w v` (x-block, then y-block) for local DOFs `v`.
    pub fn apply(&self, local: &DVector<f64>) -> DVector<f64> {
        &self.operator * local
    }

    /// `∇_w v` evaluated at every cell quadrature point.
    pub fn values_at_quadrature(&self, local: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let g = self.apply(local);
        let nj = self.gradient_dim();
        let table = self.gradient.table(&self.rule.points);
        let gx = &table * g.rows(0, nj);
        let gy = &table * g.rows(nj, nj);
        (gx.as_slice().to_vec(), gy.as_slice().to_vec())
    }

    /// `Σ_c g_cᵀ M g_c = ‖∇_w v‖²_T`.
    pub fn energy_squared(&self, local: &DVector<f64>) -> f64 {
        let g = self.apply(local);
        let nj = self.gradient_dim();
        let gx = g.rows(0, nj);
        let gy = g.rows(nj, nj);
        (gx.transpose() * &self.mass * gx)[(0, 0)] + (gy.transpose() * &self.mass * gy)[(0, 0)]
    }

    /// Legendre values of the edge basis at the Gauss nodes of local edge `i`:
    /// `nodes × (k+1)`.
    pub fn edge_basis_table(&self, i: usize) -> DMatrix<f64> {
        let rule = &self.edges[i].rule;
        let mut t = DMatrix::zeros(rule.params.len(), self.k + 1);
        let mut buf = vec![0.0; self.k + 1];
        for (q, &s) in rule.params.iter().enumerate() {
            legendre_values(self.k, s, &mut buf);
            for l in 0..=self.k {
                t[(q, l)] = buf[l];
            }
        }
        t
    }
}

fn build_local(
    mesh: &PolygonalMesh,
    cell: usize,
    k: usize,
    j: usize,
    options: &SpaceOptions,
) -> Result<LocalWeakGradient> {
    let c = &mesh.cells()[cell];
    let cell_exactness = options.cell_exactness.unwrap_or(2 * j + k.saturating_sub(1) + 1);
    let edge_exactness = options.edge_exactness.unwrap_or(2 * j + k);
    let rule = cell_quadrature(mesh, cell, cell_exactness)?;

    let mut interior = CellBasis::new(k, c.centroid, c.diameter);
    let mut gradient = CellBasis::new(j, c.centroid, c.diameter);
    if options.orthonormal {
        interior = interior.orthonormalized(&rule, cell)?;
        gradient = gradient.orthonormalized(&rule, cell)?;
    }
    let n0 = interior.dim();
    let nj = gradient.dim();
    let nb = k + 1;
    let nloc = n0 + c.num_edges() * nb;

    let mut rhs = DMatrix::zeros(2 * nj, nloc);
    let mut v0 = vec![0.0; n0];
    let (mut q, mut qx, mut qy) = (vec![0.0; nj], vec![0.0; nj], vec![0.0; nj]);
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        interior.eval(p, &mut v0);
        gradient.eval_with_grad(p, &mut q, &mut qx, &mut qy);
        for i in 0..n0 {
            let wi = w * v0[i];
            for m in 0..nj {
                rhs[(m, i)] -= wi * qx[m];
                rhs[(nj + m, i)] -= wi * qy[m];
            }
        }
    }

    let mut edges = Vec::with_capacity(c.num_edges());
    let mut psi = vec![0.0; nb];
    for (li, &e) in c.edges.iter().enumerate() {
        let (a, b) = mesh.edge_points(e);
        let erule = edge_quadrature(&a, &b, edge_exactness);
        let normal = mesh.outward_normal(cell, li);
        let col0 = n0 + li * nb;
        for ((p, &t), &w) in erule.points.iter().zip(&erule.params).zip(&erule.weights) {
            gradient.eval(p, &mut q);
            legendre_values(k, t, &mut psi);
            for l in 0..nb {
                let wl = w * psi[l];
                for m in 0..nj {
                    rhs[(m, col0 + l)] += wl * q[m] * normal.x;
                    rhs[(nj + m, col0 + l)] += wl * q[m] * normal.y;
                }
            }
        }
        edges.push(CellEdge { edge: e, normal, rule: erule });
    }

    let mass = gradient.mass_matrix(&rule);
    let chol = mass.clone().cholesky().ok_or(Error::SingularLocal { cell, what: "weak gradient mass matrix" })?;
    let mut operator = DMatrix::zeros(2 * nj, nloc);
    let top = chol.solve(&rhs.rows(0, nj).into_owned());
    let bottom = chol.solve(&rhs.rows(nj, nj).into_owned());
    operator.rows_mut(0, nj).copy_from(&top);
    operator.rows_mut(nj, nj).copy_from(&bottom);

    Ok(LocalWeakGradient {
        cell,
        k,
        j,
        diameter: c.diameter,
        interior,
        gradient,
        rule,
        edges,
        mass,
        rhs,
        operator,
    })
}

/// The weak function space `V_h` on a mesh, with every cell's weak
/// gradient operator.
#[derive(Debug, Clone)]
pub struct WgSpace {
    mesh: PolygonalMesh,
    k: usize,
    degree: GradientDegree,
    options: SpaceOptions,
    dofs: DofMap,
    locals: Vec<LocalWeakGradient>,
}

impl WgSpace {
    pub fn new(mesh: PolygonalMesh, k: usize, degree: GradientDegree) -> Result<Self> {
        Self::with_options(mesh, k, degree, SpaceOptions::default())
    }

    pub fn with_options(mesh: PolygonalMesh, k: usize, degree: GradientDegree, options: SpaceOptions) -> Result<Self> {
        if k < 1 {
            return Err(Error::invalid("polynomial degree k must be at least 1"));
        }
        if k > 6 {
            return Err(Error::invalid(format!("polynomial degree k = {k} is not supported (max 6)")));
        }
        for c in mesh.cells() {
            let j = degree.for_cell(k, c.num_edges());
            if j <= k {
                return Err(Error::invalid(format!("gradient degree j = {j} must exceed k = {k}")));
            }
            if j > 15 {
                return Err(Error::invalid(format!("gradient degree j = {j} is too large")));
            }
        }
        let locals = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| build_local(&mesh, c, k, degree.for_cell(k, mesh.cells()[c].num_edges()), &options))
            .collect::<Result<Vec<_>>>()?;
        let dofs = DofMap::new(&mesh, k);
        Ok(WgSpace { mesh, k, degree, options, dofs, locals })
    }

    pub fn mesh(&self) -> &PolygonalMesh {
        &self.mesh
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> GradientDegree {
        self.degree
    }

    pub fn options(&self) -> &SpaceOptions {
        &self.options
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn locals(&self) -> &[LocalWeakGradient] {
        &self.locals
    }

    pub fn local(&self, cell: usize) -> &LocalWeakGradient {
        &self.locals[cell]
    }

    pub fn zero(&self) -> WeakFunction {
        WeakFunction::zeros(&self.dofs)
    }

    /// Local coefficient vector of `v` on `cell`.
    pub fn gather(&self, v: &WeakFunction, cell: usize) -> DVector<f64> {
        let idx = self.dofs.local_dofs(&self.mesh, cell);
        DVector::from_iterator(idx.len(), idx.iter().map(|&g| v.coeffs[g]))
    }

    /// A member of `V_h⁰` with free coefficients uniform in `[-1, 1]`.
    pub fn random_function<R: Rng + ?Sized>(&self, rng: &mut R) -> WeakFunction {
        let free: Vec<f64> = (0..self.dofs.num_free()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        WeakFunction::from_free(&self.dofs, &free)
    }

    /// Weak gradient coefficients of `v` on every cell.
    pub fn weak_gradient(&self, v: &WeakFunction) -> Vec<DVector<f64>> {
        self.locals.par_iter().map(|l| l.apply(&self.gather(v, l.cell))).collect()
    }

    /// `|||v||| = (Σ_T ‖∇_w v‖²_T)^{1/2}`.
    pub fn energy_norm(&self, v: &WeakFunction) -> f64 {
        let parts: Vec<f64> = self.locals.par_iter().map(|l| l.energy_squared(&self.gather(v, l.cell))).collect();
        parts.iter().sum::<f64>().sqrt()
    }

    /// `‖v‖_{1,h} = (Σ_T ‖∇v₀‖²_T + h_T⁻¹ ‖v₀ − v_b‖²_∂T)^{1/2}`.
    pub fn discrete_h1_norm(&self, v: &WeakFunction) -> f64 {
        let parts: Vec<f64> = self
            .locals
            .par_iter()
            .map(|l| {
                let local = self.gather(v, l.cell);
                local.dot(&(self.h1_local_matrix(l) * &local))
            })
            .collect();
        parts.iter().sum::<f64>().max(0.0).sqrt()
    }

    /// Gram matrix of `‖·‖_{1,h}` restricted to one cell, in local DOF order.
    pub fn h1_local_matrix(&self, l: &LocalWeakGradient) -> DMatrix<f64> {
        let n0 = l.num_interior();
        let nb = self.k + 1;
        let nl = l.num_local_dofs();
        let mut h = DMatrix::zeros(nl, nl);
        let (mut val, mut dx, mut dy) = (vec![0.0; n0], vec![0.0; n0], vec![0.0; n0]);
        for (p, w) in l.rule.points.iter().zip(&l.rule.weights) {
            l.interior.eval_with_grad(p, &mut val, &mut dx, &mut dy);
            for a in 0..n0 {
                for b in 0..n0 {
                    h[(a, b)] += w * (dx[a] * dx[b] + dy[a] * dy[b]);
                }
            }
        }
        let mut psi = vec![0.0; nb];
        let mut d = DVector::zeros(nl);
        for (li, ce) in l.edges.iter().enumerate() {
            for ((p, &t), &w) in ce.rule.points.iter().zip(&ce.rule.params).zip(&ce.rule.weights) {
                l.interior.eval(p, &mut val);
                legendre_values(self.k, t, &mut psi);
                d.fill(0.0);
                d.rows_mut(0, n0).copy_from_slice(&val);
                for m in 0..nb {
                    d[n0 + li * nb + m] = -psi[m];
                }
                h.ger(w / l.diameter, &d, &d, 1.0);
            }
        }
        h
    }

    /// Interior polynomial `v₀` of `v` on `cell` evaluated at `p`.
    pub fn eval_interior(&self, v: &WeakFunction, cell: usize, p: &Point) -> f64 {
        let r = self.dofs.cell_dofs(cell);
        self.locals[cell].interior.evaluate(&v.coeffs[r], p)
    }

    /// Edge polynomial `v_b` on edge `e` at canonical parameter `t ∈ [-1, 1]`.
    pub fn eval_edge(&self, v: &WeakFunction, edge: usize, t: f64) -> f64 {
        let mut psi = vec![0.0; self.k + 1];
        legendre_values(self.k, t, &mut psi);
        self.dofs.edge_dofs(edge).zip(&psi).map(|(g, p)| v.coeffs[g] * p).sum()
    }
}

/// Extremes of `|||v||| / ‖v‖_{1,h}` over random members of `V_h⁰`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRatioProbe {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

pub fn norm_equivalence_probe<R: Rng + ?Sized>(space: &WgSpace, samples: usize, rng: &mut R) -> Result<NormRatioProbe> {
    if samples == 0 {
        return Err(Error::invalid("norm equivalence probe needs at least one sample"));
    }
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let mut used = 0;
    for _ in 0..samples {
        let v = space.random_function(rng);
        let h1 = space.discrete_h1_norm(&v);
        if h1 == 0.0 {
            continue;
        }
        let r = space.energy_norm(&v) / h1;
        min = min.min(r);
        max = max.max(r);
        used += 1;
    }
    Ok(NormRatioProbe { min, max, samples: used })
}

/// Exact extremes of `|||v||| / ‖v‖_{1,h}` over `V_h⁰`, from the dense
/// generalized eigenproblem of the two Gram matrices. Cost is cubic in the
/// number of free DOFs.
pub fn norm_equivalence_bounds(space: &WgSpace) -> Result<(f64, f64)> {
    let dofs = space.dofs();
    let n = dofs.num_free();
    if n == 0 {
        return Err(Error::invalid("space has no free DOFs"));
    }
    let mut a = DMatrix::zeros(n, n);
    let mut h = DMatrix::zeros(n, n);
    for l in space.locals() {
        let nj = l.gradient_dim();
        let gx = l.operator.rows(0, nj);
        let gy = l.operator.rows(nj, nj);
        let al = gx.transpose() * &l.mass * gx + gy.transpose() * &l.mass * gy;
        let hl = space.h1_local_matrix(l);
        let idx: Vec<Option<usize>> = dofs.local_dofs(space.mesh(), l.cell).iter().map(|&g| dofs.free_index(g)).collect();
        for (r, gr) in idx.iter().enumerate() {
            let Some(gr) = gr else { continue };
            for (c, gc) in idx.iter().enumerate() {
                let Some(gc) = gc else { continue };
                a[(*gr, *gc)] += al[(r, c)];
                h[(*gr, *gc)] += hl[(r, c)];
            }
        }
    }
    let chol = h.cholesky().ok_or(Error::NotPositiveDefinite("discrete H1 Gram matrix".into()))?;
    let linv: DMatrix<f64> = chol.l().solve_lower_triangular(&DMatrix::identity(n, n)).ok_or(Error::NotPositiveDefinite("discrete H1 factor".into()))?;
    let c: DMatrix<f64> = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let max = eig.iter().copied().fold(0.0, f64::max);
    Ok((min.sqrt(), max.sqrt()))
}

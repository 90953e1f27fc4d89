//! Global sparse assembly over free DOFs and SPD linear solves.
//!
//! The sparsity pattern and the scatter positions of every local entry are
//! computed once per space, so repeated assemblies only write values. Local
//! contributions are added in cell order, which keeps the matrix
//! bit-reproducible regardless of how the local matrices were computed.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Side};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::weak_gradient::WgSpace;

const NONE: usize = usize::MAX;

/// Linear solver used for every frozen system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolverKind {
    /// Sparse Cholesky with a fill-reducing ordering.
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Cg { tol: f64, max_iter: usize },
}

impl Default for LinearSolverKind {
    fn default() -> Self {
        LinearSolverKind::Cholesky
    }
}

impl LinearSolverKind {
    pub fn cg() -> Self {
        LinearSolverKind::Cg { tol: 1e-12, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖Ax − b‖ / ‖b‖` of the reduced system.
    pub relative_residual: f64,
}

/// Symmetric sparse matrix and right-hand side over free DOFs.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
    pub stats: SolveStats,
}

impl SparseSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.val().len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        csc_matvec(&self.matrix, x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut d = DMatrix::zeros(n, n);
        let (sym, val) = self.matrix.parts();
        for c in 0..n {
            for p in sym.col_ptr()[c]..sym.col_ptr()[c + 1] {
                d[(sym.row_idx()[p], c)] += val[p];
            }
        }
        d
    }

    /// `max |A_ij − A_ji| / max |A_ij|`.
    pub fn symmetry_error(&self) -> f64 {
        let d = self.to_dense();
        let scale = d.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&d - d.transpose()).amax() / scale
    }

    /// Solves the system with a fresh factorization.
    pub fn solve(&self, kind: LinearSolverKind) -> Result<Vec<f64>> {
        let f = Factor::new(&self.matrix, kind, None)?;
        Ok(f.solve(&self.rhs)?.0)
    }
}

fn csc_matvec(a: &SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let (sym, val) = a.parts();
    let mut y = vec![0.0; sym.nrows()];
    for c in 0..sym.ncols() {
        let xc = x[c];
        if xc == 0.0 {
            continue;
        }
        for p in sym.col_ptr()[c]..sym.col_ptr()[c + 1] {
            y[sym.row_idx()[p]] += val[p] * xc;
        }
    }
    y
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

enum FactorKind {
    Cholesky(Llt<usize, f64>),
    Cg { diag_inv: Vec<f64>, tol: f64, max_iter: usize },
}

/// A factored (or CG-ready) SPD matrix.
struct Factor {
    matrix: SparseColMat<usize, f64>,
    kind: FactorKind,
}

impl Factor {
    fn new(matrix: &SparseColMat<usize, f64>, kind: LinearSolverKind, symbolic: Option<&SymbolicLlt<usize>>) -> Result<Self> {
        let kind = match kind {
            LinearSolverKind::Cholesky => {
                let sym = match symbolic {
                    Some(s) => s.clone(),
                    None => SymbolicLlt::try_new(matrix.symbolic(), Side::Lower)
                        .map_err(|e| Error::LinearSolver(format!("symbolic factorization: {e:?}")))?,
                };
                let llt = Llt::try_new_with_symbolic(sym, matrix.as_ref(), Side::Lower)
                    .map_err(|e| Error::NotPositiveDefinite(format!("cholesky failed: {e:?}")))?;
                FactorKind::Cholesky(llt)
            }
            LinearSolverKind::Cg { tol, max_iter } => {
                let (sym, val) = matrix.parts();
                let mut diag_inv = vec![0.0; sym.ncols()];
                for c in 0..sym.ncols() {
                    for p in sym.col_ptr()[c]..sym.col_ptr()[c + 1] {
                        if sym.row_idx()[p] == c {
                            diag_inv[c] += val[p];
                        }
                    }
                }
                for (i, d) in diag_inv.iter_mut().enumerate() {
                    if *d <= 0.0 {
                        return Err(Error::NotPositiveDefinite(format!("non-positive diagonal entry at {i}")));
                    }
                    *d = 1.0 / *d;
                }
                FactorKind::Cg { diag_inv, tol, max_iter }
            }
        };
        Ok(Factor { matrix: matrix.clone(), kind })
    }

    fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let n = b.len();
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], SolveStats::default()));
        }
        match &self.kind {
            FactorKind::Cholesky(llt) => {
                let mut x = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
                llt.solve_in_place_with_conj(Conj::No, x.as_mut());
                let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
                let r = csc_matvec(&self.matrix, &x);
                let res = norm(&r.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>()) / bnorm;
                Ok((x, SolveStats { iterations: 1, relative_residual: res }))
            }
            FactorKind::Cg { diag_inv, tol, max_iter } => {
                let mut x = vec![0.0; n];
                let mut r = b.to_vec();
                let mut z: Vec<f64> = r.iter().zip(diag_inv).map(|(a, d)| a * d).collect();
                let mut p = z.clone();
                let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
                for it in 1..=*max_iter {
                    let ap = csc_matvec(&self.matrix, &p);
                    let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
                    if pap <= 0.0 {
                        return Err(Error::NotPositiveDefinite("non-positive curvature in conjugate gradients".into()));
                    }
                    let a = rz / pap;
                    for i in 0..n {
                        x[i] += a * p[i];
                        r[i] -= a * ap[i];
                    }
                    let res = norm(&r) / bnorm;
                    if res <= *tol {
                        return Ok((x, SolveStats { iterations: it, relative_residual: res }));
                    }
                    for i in 0..n {
                        z[i] = r[i] * diag_inv[i];
                    }
                    let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
                    let beta = rz_new / rz;
                    rz = rz_new;
                    for i in 0..n {
                        p[i] = z[i] + beta * p[i];
                    }
                }
                Err(Error::LinearSolver(format!("conjugate gradients did not reach {tol:e} in {max_iter} iterations")))
            }
        }
    }
}

/// Sparsity pattern and scatter map from local matrices to the global one.
#[derive(Debug, Clone)]
struct Pattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Per cell, row-major `nl × nl` positions into the value array
    /// (`NONE` for constrained pairs).
    positions: Vec<Vec<usize>>,
}

impl Pattern {
    fn build(n: usize, cell_indices: &[Vec<usize>]) -> Pattern {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for idx in cell_indices {
            for &c in idx.iter().filter(|&&c| c != NONE) {
                cols[c].extend(idx.iter().copied().filter(|&r| r != NONE));
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in cols.iter_mut() {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let positions = cell_indices
            .par_iter()
            .map(|idx| {
                let nl = idx.len();
                let mut pos = vec![NONE; nl * nl];
                for (a, &r) in idx.iter().enumerate() {
                    if r == NONE {
                        continue;
                    }
                    for (b, &c) in idx.iter().enumerate() {
                        if c == NONE {
                            continue;
                        }
                        let col = &row_idx[col_ptr[c]..col_ptr[c + 1]];
                        pos[a * nl + b] = col_ptr[c] + col.binary_search(&r).expect("entry in pattern");
                    }
                }
                pos
            })
            .collect();
        Pattern { n, col_ptr, row_idx, positions }
    }

    fn assemble(&self, locals: &[DMatrix<f64>]) -> SparseColMat<usize, f64> {
        let mut val = vec![0.0; self.row_idx.len()];
        for (pos, m) in self.positions.iter().zip(locals) {
            let nl = m.nrows();
            for a in 0..nl {
                for b in 0..nl {
                    let p = pos[a * nl + b];
                    if p != NONE {
                        val[p] += m[(a, b)];
                    }
                }
            }
        }
        let sym = SymbolicSparseColMat::new_checked(self.n, self.n, self.col_ptr.clone(), None, self.row_idx.clone());
        SparseColMat::new(sym, val)
    }
}

/// Interior elimination data of one cell.
struct CondensedCell {
    a00: Cholesky<f64, Dyn>,
    /// `A₀_b`, `n0 × nb`
    a0b: DMatrix<f64>,
}

/// Assembles and factors frozen systems for one space; with `condense` the
/// interior DOFs are eliminated cell by cell before the global solve.
pub struct LinearSolver {
    kind: LinearSolverKind,
    condense: bool,
    /// Free index (full numbering) of each local DOF, per cell.
    free: Vec<Vec<usize>>,
    pattern: Pattern,
    n_free: usize,
    n_interior: usize,
    symbolic: Option<SymbolicLlt<usize>>,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("kind", &self.kind)
            .field("condense", &self.condense)
            .field("size", &self.pattern.n)
            .finish()
    }
}

impl LinearSolver {
    pub fn new(space: &WgSpace, kind: LinearSolverKind, condense: bool) -> Self {
        let dofs = space.dofs();
        let free: Vec<Vec<usize>> = (0..space.mesh().num_cells())
            .map(|c| {
                dofs.local_dofs(space.mesh(), c)
                    .into_iter()
                    .map(|g| dofs.free_index(g).unwrap_or(NONE))
                    .collect()
            })
            .collect();
        // Cell DOFs come first and are all free.
        let n_interior = dofs.num_cells() * dofs.cell_block_size();
        let n_free = dofs.num_free();
        let pattern = if condense {
            let reduced: Vec<Vec<usize>> = space
                .locals()
                .iter()
                .zip(&free)
                .map(|(l, f)| f[l.num_interior()..].iter().map(|&i| if i == NONE { NONE } else { i - n_interior }).collect())
                .collect();
            Pattern::build(n_free - n_interior, &reduced)
        } else {
            Pattern::build(n_free, &free)
        };
        LinearSolver { kind, condense, free, pattern, n_free, n_interior, symbolic: None }
    }

    pub fn kind(&self) -> LinearSolverKind {
        self.kind
    }

    pub fn is_condensed(&self) -> bool {
        self.condense
    }

    /// Number of unknowns of the globally solved system.
    pub fn system_size(&self) -> usize {
        self.pattern.n
    }

    /// Global matrix over all free DOFs (no condensation).
    pub fn assemble_full(space: &WgSpace, locals: &[DMatrix<f64>], rhs: Vec<f64>) -> SparseSystem {
        let dofs = space.dofs();
        let free: Vec<Vec<usize>> = (0..space.mesh().num_cells())
            .map(|c| {
                dofs.local_dofs(space.mesh(), c)
                    .into_iter()
                    .map(|g| dofs.free_index(g).unwrap_or(NONE))
                    .collect()
            })
            .collect();
        let pattern = Pattern::build(dofs.num_free(), &free);
        SparseSystem { matrix: pattern.assemble(locals), rhs, stats: SolveStats::default() }
    }

    /// Assembles the (possibly condensed) matrix from local matrices in
    /// local DOF order and factors it.
    pub fn factor(&mut self, locals: &[DMatrix<f64>]) -> Result<FactoredOperator> {
        let (global_locals, cells) = if self.condense {
            let parts = locals
                .par_iter()
                .enumerate()
                .map(|(c, a)| {
                    let n0 = self.local_interior(c);
                    let nb = a.nrows() - n0;
                    let a00 = a.view((0, 0), (n0, n0)).into_owned();
                    let a0b = a.view((0, n0), (n0, nb)).into_owned();
                    let abb = a.view((n0, n0), (nb, nb)).into_owned();
                    let chol = a00.cholesky().ok_or(Error::SingularLocal { cell: c, what: "interior block" })?;
                    let x = chol.solve(&a0b);
                    let mut schur = abb - a0b.transpose() * x;
                    schur = (&schur + schur.transpose()) * 0.5;
                    Ok((schur, CondensedCell { a00: chol, a0b }))
                })
                .collect::<Result<Vec<_>>>()?;
            let (s, cells): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
            (s, Some(cells))
        } else {
            (Vec::new(), None)
        };
        let matrix = if self.condense { self.pattern.assemble(&global_locals) } else { self.pattern.assemble(locals) };
        if matches!(self.kind, LinearSolverKind::Cholesky) && self.symbolic.is_none() {
            self.symbolic = Some(
                SymbolicLlt::try_new(matrix.symbolic(), Side::Lower)
                    .map_err(|e| Error::LinearSolver(format!("symbolic factorization: {e:?}")))?,
            );
        }
        let factor = Factor::new(&matrix, self.kind, self.symbolic.as_ref())?;
        Ok(FactoredOperator {
            factor,
            cells,
            free: self.free.clone(),
            n_free: self.n_free,
            n_interior: self.n_interior,
        })
    }

    fn local_interior(&self, cell: usize) -> usize {
        self.free[cell].iter().take_while(|&&i| i != NONE && i < self.n_interior).count()
    }
}

/// A factored frozen operator that solves `A x = y` for `y` over all free
/// DOFs.
pub struct FactoredOperator {
    factor: Factor,
    cells: Option<Vec<CondensedCell>>,
    free: Vec<Vec<usize>>,
    n_free: usize,
    n_interior: usize,
}

impl FactoredOperator {
    /// The globally factored matrix (the Schur complement when condensed).
    pub fn matrix(&self) -> &SparseColMat<usize, f64> {
        &self.factor.matrix
    }

    pub fn solve(&self, y: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        assert_eq!(y.len(), self.n_free);
        let Some(cells) = &self.cells else {
            return self.factor.solve(y);
        };
        let ni = self.n_interior;
        // reduce: g_b = y_b − Σ A_b0 A00⁻¹ y0
        let corrections: Vec<(DVector<f64>, DVector<f64>)> = cells
            .par_iter()
            .enumerate()
            .map(|(c, cc)| {
                let n0 = cc.a0b.nrows();
                let y0 = DVector::from_iterator(n0, self.free[c][..n0].iter().map(|&i| y[i]));
                let z0 = cc.a00.solve(&y0);
                (cc.a0b.transpose() * &z0, z0)
            })
            .collect();
        let mut g: Vec<f64> = y[ni..].to_vec();
        for (c, (corr, _)) in corrections.iter().enumerate() {
            let n0 = cells[c].a0b.nrows();
            for (b, &i) in self.free[c][n0..].iter().enumerate() {
                if i != NONE {
                    g[i - ni] -= corr[b];
                }
            }
        }
        let (xb, stats) = self.factor.solve(&g)?;
        let mut x = vec![0.0; self.n_free];
        x[ni..].copy_from_slice(&xb);
        let interiors: Vec<DVector<f64>> = cells
            .par_iter()
            .enumerate()
            .map(|(c, cc)| {
                let n0 = cc.a0b.nrows();
                let xl = DVector::from_iterator(
                    cc.a0b.ncols(),
                    self.free[c][n0..].iter().map(|&i| if i == NONE { 0.0 } else { xb[i - ni] }),
                );
                &corrections[c].1 - cc.a00.solve(&(&cc.a0b * xl))
            })
            .collect();
        for (c, x0) in interiors.iter().enumerate() {
            for (a, &i) in self.free[c][..x0.len()].iter().enumerate() {
                x[i] = x0[a];
            }
        }
        Ok((x, stats))
    }
}

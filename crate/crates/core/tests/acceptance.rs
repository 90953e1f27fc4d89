//! End-to-end acceptance run. Every criterion is evaluated, a PASS/FAIL line
//! is printed for each, and the binary exits nonzero if any failed.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfwg::checks::{commutation_probe, form_probe, ASSEMBLED_TOL, COMMUTATION_TOL, POINTWISE_TOL};
use sfwg::error_norms::{energy_error, rate, EnergyErrorMode, ErrorReport};
use sfwg::mesh::Point;
use sfwg::models::flux_probe;
use sfwg::projection::project_qh;
use sfwg::solver::{
    assemble_frozen, assembly::local_matrices, assembly::local_matrix, residual, richardson_contraction_bound, solve, FormOptions,
    KappaInterpolation, Method, SolverConfig,
};
use sfwg::study::{run_study, StudySpec};
use sfwg::{Benchmark, GradientDegree, GridFamily, KappaModel, Rect, WgSpace};

struct Verdict {
    passed: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { passed: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("  [{}] {line}", if ok { "ok" } else { "x" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("  [-] {line}"));
    }

    fn within(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, format!("{what}: {got:.4} (want {want} ± {tol})"));
    }

    fn relative(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let r = (got - want).abs() / want.abs();
        self.check(r <= tol, format!("{what}: {got:.4e} vs {want:.4e}, relative diff {r:.3}"));
    }
}

fn study(example: u8, family: GridFamily, k: usize, degree: GradientDegree, levels: std::ops::RangeInclusive<u32>) -> Vec<ErrorReport> {
    let spec = StudySpec::new(Benchmark::example(example).unwrap(), family, k, levels).with_degree(degree);
    let run = run_study(&spec).unwrap();
    if let Some(e) = run.failure {
        panic!("study failed: {e}");
    }
    run.table.rows
}

fn row(rows: &[ErrorReport], level: u32) -> &ErrorReport {
    rows.iter().find(|r| r.level == level).unwrap()
}

fn rect_space(level: u32, k: usize, degree: GradientDegree) -> WgSpace {
    WgSpace::new(GridFamily::Rect.build(level, Rect::unit_square()).unwrap(), k, degree).unwrap()
}

fn criterion1() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let rows = study(1, GridFamily::Rect, 1, GradientDegree::Fixed(2), 3..=7);
    let secs = start.elapsed().as_secs_f64();
    let l2_rates = [2.58, 2.35, 2.13, 2.04];
    let l2 = [0.6829e-3, 0.1343e-3, 0.3071e-4, 0.7483e-5];
    let en = [0.3218e-1, 0.8080e-2, 0.2022e-2, 0.5056e-3];
    for (i, level) in (4..=7).enumerate() {
        let r = row(&rows, level);
        v.within(&format!("k=1 L{level} energy rate"), r.energy_rate.unwrap(), 2.0, 0.1);
        v.within(&format!("k=1 L{level} L2 rate"), r.l2_rate.unwrap(), l2_rates[i], 0.15);
        v.relative(&format!("k=1 L{level} L2 error"), r.l2_error, l2[i], 0.25);
        v.relative(&format!("k=1 L{level} energy error"), r.energy_error, en[i], 0.25);
    }
    v.check(secs < 300.0, format!("k=1 levels 3-7 wall-clock {secs:.1} s (limit 300 s)"));
    let rows = study(1, GridFamily::Rect, 2, GradientDegree::Fixed(3), 3..=6);
    for level in 4..=6 {
        v.within(&format!("k=2 L{level} energy rate"), row(&rows, level).energy_rate.unwrap(), 3.0, 0.1);
    }
    v
}

fn criterion2() -> Verdict {
    let mut v = Verdict::new();
    let rows = study(1, GridFamily::Qph, 1, GradientDegree::Fixed(3), 3..=6);
    let last = row(&rows, 6);
    v.within("k=1 L6 energy rate", last.energy_rate.unwrap(), 1.0, 0.1);
    v.within("k=1 L6 L2 rate", last.l2_rate.unwrap(), 2.0, 0.15);
    let rows = study(1, GridFamily::Qph, 3, GradientDegree::Fixed(5), 2..=5);
    let en = [1.865e-2, 4.905e-3, 6.854e-4, 8.820e-5];
    for (i, level) in (2..=5).enumerate() {
        v.relative(&format!("k=3 L{level} energy error"), row(&rows, level).energy_error, en[i], 0.25);
    }
    v
}

fn criterion3() -> Verdict {
    let mut v = Verdict::new();
    let rows = study(2, GridFamily::Rect, 1, GradientDegree::Fixed(2), 3..=7);
    for level in 4..=7 {
        v.within(&format!("k=1 L{level} energy rate"), row(&rows, level).energy_rate.unwrap(), 2.0, 0.1);
    }
    for (k, j) in [(3, 4), (4, 5)] {
        let rows = study(2, GridFamily::Rect, k, GradientDegree::Fixed(j), 3..=5);
        for level in 4..=5 {
            v.within(&format!("k={k} L{level} energy rate"), row(&rows, level).energy_rate.unwrap(), 3.0, 0.3);
        }
    }
    v
}

fn criterion4() -> Verdict {
    let mut v = Verdict::new();
    let rows = study(2, GridFamily::Qph, 1, GradientDegree::Fixed(3), 4..=6);
    for level in 5..=6 {
        v.within(&format!("k=1 L{level} energy rate"), row(&rows, level).energy_rate.unwrap(), 1.0, 0.05);
    }
    let rows = study(2, GridFamily::Qph, 3, GradientDegree::Fixed(5), 4..=5);
    let r = row(&rows, 5);
    v.within("k=3 L5 L2 rate", r.l2_rate.unwrap(), 4.0, 0.2);
    v.within("k=3 L5 energy rate", r.energy_rate.unwrap(), 3.0, 0.1);
    v
}

fn criterion5() -> Verdict {
    let mut v = Verdict::new();
    let bench = Benchmark::example(1).unwrap();
    for k in 1..=3 {
        let mut proj = Vec::new();
        for level in 4..=6 {
            let space = rect_space(level, k, GradientDegree::KPlus1);
            let q = project_qh(&space, &bench.exact).unwrap();
            proj.push(energy_error(&space, &q, &bench.exact, EnergyErrorMode::Pointwise).unwrap());
        }
        let rows = study(1, GridFamily::Rect, k, GradientDegree::KPlus1, 4..=6);
        let floor = k as f64 - 0.1;
        for i in 1..proj.len() {
            let rp = rate(proj[i - 1], proj[i]);
            v.check(rp >= floor, format!("k={k} L{} |||u - Q_h u||| rate {rp:.3} (>= {floor})", i + 4));
            let ru = rows[i].energy_rate.unwrap();
            v.check(ru >= floor, format!("k={k} L{} |||u - u_h||| rate {ru:.3} (>= {floor})", i + 4));
        }
    }
    v
}

fn models() -> Vec<KappaModel> {
    vec![KappaModel::example1(), KappaModel::example2(), KappaModel::smooth()]
}

fn criterion6() -> Verdict {
    let mut v = Verdict::new();
    for (i, m) in models().iter().enumerate() {
        let p = flux_probe(m, 100_000, 10.0, 100 + i as u64);
        v.check(
            p.monotone_slack >= -POINTWISE_TOL && p.lipschitz_slack >= -POINTWISE_TOL,
            format!("{m}: {} pairs, monotone slack {:.3e}, Lipschitz slack {:.3e}", p.samples, p.monotone_slack, p.lipschitz_slack),
        );
    }
    let m = KappaModel::example1();
    let tampered = m.with_bounds(m.alpha, 1.0);
    let p = flux_probe(&tampered, 100_000, 10.0, 100);
    v.check(p.lipschitz_slack < -POINTWISE_TOL, format!("understated beta=1 detected, Lipschitz slack {:.3e}", p.lipschitz_slack));
    v
}

fn criterion7() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (family, level) in [(GridFamily::Rect, 3), (GridFamily::Qph, 2)] {
        for k in [1, 2] {
            let space = WgSpace::new(family.build(level, Rect::unit_square()).unwrap(), k, GradientDegree::KPlus1).unwrap();
            for m in models() {
                let p = form_probe(&space, &m, 1_000, &mut rng).unwrap();
                v.check(
                    p.passed(ASSEMBLED_TOL),
                    format!(
                        "{} L{level} k={k} {m}: monotone {:.3e}, Lipschitz {:.3e}",
                        family.name(),
                        p.monotone_slack,
                        p.lipschitz_slack
                    ),
                );
            }
        }
    }
    v
}

fn criterion8() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (family, level, degree) in [(GridFamily::Rect, 2, GradientDegree::KPlus1), (GridFamily::Qph, 1, GradientDegree::KPlus2)] {
        for k in 1..=3 {
            let space = WgSpace::new(family.build(level, Rect::unit_square()).unwrap(), k, degree).unwrap();
            let r = commutation_probe(&space, 3, &mut rng).unwrap();
            v.check(r <= COMMUTATION_TOL, format!("{} L{level} k={k}: max residual {r:.3e}", family.name()));
        }
    }
    v
}

fn criterion9() -> Verdict {
    let mut v = Verdict::new();
    let bench = Benchmark::example(1).unwrap();
    let f = |p: &Point| bench.forcing(p);
    let space = rect_space(4, 1, GradientDegree::KPlus1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let config = SolverConfig { tol: 1e-12, ..SolverConfig::default() };
    let reference = solve(&space, &bench.kappa, &f, &config, None).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let start = space.random_function(&mut rng).scaled(10f64.powf(rng.random_range(-1.0..1.0)));
        let s = solve(&space, &bench.kappa, &f, &config, Some(&start)).unwrap();
        worst = worst.max(space.energy_norm(&s.u.sub(&reference.u)));
    }
    v.check(worst <= 1e-8, format!("Kacanov from 5 random starts: max |||u_i - u_ref||| = {worst:.3e}"));

    let kappa = &bench.kappa;
    let eps = kappa.alpha / (kappa.beta * kappa.beta);
    let bound = richardson_contraction_bound(eps, kappa.alpha, kappa.beta);
    let mut config = SolverConfig { method: Method::Richardson { eps }, tol: 1e-8, max_iter: 20_000, ..SolverConfig::default() };
    config.form.interpolation = KappaInterpolation::Pointwise;
    let mut kacanov = SolverConfig { tol: 1e-12, ..SolverConfig::default() };
    kacanov.form.interpolation = KappaInterpolation::Pointwise;
    let reference = solve(&space, kappa, &f, &kacanov, None).unwrap();
    match solve(&space, kappa, &f, &config, None) {
        Ok(s) => {
            let recs = &s.history.records;
            let first = recs[0].update_norm;
            // ratios of successive updates while they are well above round-off
            let worst_ratio = recs
                .windows(2)
                .filter(|w| w[1].update_norm > 1e-6 * first)
                .map(|w| w[1].update_norm / w[0].update_norm)
                .fold(0.0, f64::max);
            v.check(worst_ratio <= bound + 0.002, format!("Richardson eps={eps:.5}: worst update ratio {worst_ratio:.5}, bound {bound:.5}"));
            let target = config.tol * (1.0 + space.energy_norm(&s.u)) / first;
            let predicted = target.ln() / bound.ln() + 1.0;
            v.note(format!("Richardson iterations {} (bound predicts at most {predicted:.0})", s.iterations));
            let diff = space.energy_norm(&s.u.sub(&reference.u));
            v.check(diff <= 1e-6, format!("Richardson agrees with Kacanov on the same form: {diff:.3e}"));
        }
        Err(e) => v.check(false, format!("Richardson failed: {e}")),
    }
    v
}

// ---- independent single-cell oracle ----

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * z * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

fn legendre_all(k: usize, t: f64) -> Vec<f64> {
    (0..=k).map(|l| legendre(l, t).0).collect()
}

fn exponents(m: usize) -> Vec<(i32, i32)> {
    let mut e = Vec::new();
    for d in 0..=m as i32 {
        for b in 0..=d {
            e.push((d - b, b));
        }
    }
    e
}

struct Oracle {
    k: usize,
    /// Interior basis: scaled monomials about the centroid.
    center: Point,
    scale: f64,
    /// Raw monomials for `P_j`.
    grad_exp: Vec<(i32, i32)>,
    /// `∇_w φ_i` coefficients, x-block and y-block, `dim P_j × n`.
    gx: DMatrix<f64>,
    gy: DMatrix<f64>,
}

impl Oracle {
    fn new(space: &WgSpace, j: usize) -> Self {
        let mesh = space.mesh();
        let k = space.k();
        let cell = &mesh.cells()[0];
        let pts: Vec<Point> = cell.vertices.iter().map(|&i| mesh.vertices()[i]).collect();
        let (xmin, xmax) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.x), a.1.max(p.x)));
        let (ymin, ymax) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.y), a.1.max(p.y)));
        let center = Point::new(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
        let scale = (xmax - xmin).hypot(ymax - ymin);
        let int_exp = exponents(k);
        let grad_exp = exponents(j);
        let n0 = int_exp.len();
        let nl = n0 + pts.len() * (k + 1);
        let nj = grad_exp.len();
        let (gp, gw) = gauss_legendre(12);

        let mut mass = DMatrix::<f64>::zeros(nj, nj);
        let mut bx = DMatrix::<f64>::zeros(nj, nl);
        let mut by = DMatrix::<f64>::zeros(nj, nl);
        let mono = |e: (i32, i32), p: &Point| p.x.powi(e.0) * p.y.powi(e.1);
        let dmono = |e: (i32, i32), p: &Point| {
            let dx = if e.0 > 0 { e.0 as f64 * p.x.powi(e.0 - 1) * p.y.powi(e.1) } else { 0.0 };
            let dy = if e.1 > 0 { e.1 as f64 * p.x.powi(e.0) * p.y.powi(e.1 - 1) } else { 0.0 };
            (dx, dy)
        };
        let phi = |e: (i32, i32), p: &Point| ((p.x - center.x) / scale).powi(e.0) * ((p.y - center.y) / scale).powi(e.1);
        // tensor Gauss on the bounding rectangle, which is the cell itself
        for (a, wa) in gp.iter().zip(&gw) {
            for (b, wb) in gp.iter().zip(&gw) {
                let p = Point::new(xmin + 0.5 * (a + 1.0) * (xmax - xmin), ymin + 0.5 * (b + 1.0) * (ymax - ymin));
                let w = wa * wb * 0.25 * (xmax - xmin) * (ymax - ymin);
                for m in 0..nj {
                    for n in 0..nj {
                        mass[(m, n)] += w * mono(grad_exp[m], &p) * mono(grad_exp[n], &p);
                    }
                    let (dx, dy) = dmono(grad_exp[m], &p);
                    for i in 0..n0 {
                        bx[(m, i)] -= w * phi(int_exp[i], &p) * dx;
                        by[(m, i)] -= w * phi(int_exp[i], &p) * dy;
                    }
                }
            }
        }
        for (li, &e) in cell.edges.iter().enumerate() {
            let ev = mesh.edges()[e].vertices;
            let (a, b) = (mesh.vertices()[ev[0]], mesh.vertices()[ev[1]]);
            // outward normal from the counterclockwise traversal
            let p0 = pts[li];
            let p1 = pts[(li + 1) % pts.len()];
            let len = (p1 - p0).norm();
            let normal = Vector2::new(p1.y - p0.y, p0.x - p1.x) / len;
            for (t, wt) in gp.iter().zip(&gw) {
                let p = a + (b - a) * (0.5 * (t + 1.0));
                let w = wt * 0.5 * len;
                let psi = legendre_all(k, *t);
                for m in 0..nj {
                    let q = mono(grad_exp[m], &p);
                    for l in 0..=k {
                        bx[(m, n0 + li * (k + 1) + l)] += w * psi[l] * q * normal.x;
                        by[(m, n0 + li * (k + 1) + l)] += w * psi[l] * q * normal.y;
                    }
                }
            }
        }
        let inv = mass.try_inverse().unwrap();
        Oracle { k, center, scale, grad_exp, gx: &inv * bx, gy: &inv * by }
    }

    fn num_interior(&self) -> usize {
        (self.k + 1) * (self.k + 2) / 2
    }

    /// `∇_w φ_i(p)` for every local DOF.
    fn grads(&self, p: &Point) -> (DVector<f64>, DVector<f64>) {
        let q = DVector::from_iterator(self.grad_exp.len(), self.grad_exp.iter().map(|e| p.x.powi(e.0) * p.y.powi(e.1)));
        (self.gx.transpose() * &q, self.gy.transpose() * &q)
    }

    fn interior_values(&self, p: &Point) -> Vec<f64> {
        exponents(self.k)
            .into_iter()
            .map(|e| ((p.x - self.center.x) / self.scale).powi(e.0) * ((p.y - self.center.y) / self.scale).powi(e.1))
            .collect()
    }

    /// `Σ_q w_q κ_q ∇_w φ_i · ∇_w φ_j` over the given nodes.
    fn matrix(&self, points: &[Point], weights: &[f64], kappa: &[f64]) -> DMatrix<f64> {
        let n = self.gx.ncols();
        let mut a = DMatrix::zeros(n, n);
        for ((p, w), k) in points.iter().zip(weights).zip(kappa) {
            let (x, y) = self.grads(p);
            a += (&x * x.transpose() + &y * y.transpose()) * (w * k);
        }
        a
    }

    fn kappa_at(&self, model: &KappaModel, points: &[Point], u: &DVector<f64>) -> Vec<f64> {
        points
            .iter()
            .map(|p| {
                let (x, y) = self.grads(p);
                model.value(x.dot(u).hypot(y.dot(u)))
            })
            .collect()
    }
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn criterion10() -> Verdict {
    let mut v = Verdict::new();
    let tol = 1e-11;
    let space = rect_space(1, 1, GradientDegree::KPlus1);
    let oracle = Oracle::new(&space, 2);
    let local = space.local(0);
    let n = local.num_local_dofs();
    let n0 = oracle.num_interior();

    // constant coefficient, oracle's own quadrature
    let (gp, gw) = gauss_legendre(8);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for (a, wa) in gp.iter().zip(&gw) {
        for (b, wb) in gp.iter().zip(&gw) {
            pts.push(Point::new(0.5 * (a + 1.0), 0.5 * (b + 1.0)));
            wts.push(0.25 * wa * wb);
        }
    }
    let ones = vec![1.0; pts.len()];
    let a_oracle = oracle.matrix(&pts, &wts, &ones);
    let a_lib = local_matrix(local, &vec![1.0; local.rule.weights.len()], None);
    let r = rel(&a_lib, &a_oracle);
    v.check(r <= tol, format!("constant kappa local matrix {n}x{n}: relative diff {r:.2e}"));
    let unit = KappaModel::constant(1.0);
    let sys = assemble_frozen(&space, &unit, &space.zero(), &|_| 0.0, FormOptions::default()).unwrap();
    let free = sys.to_dense();
    let r = rel(&free, &a_oracle.view((0, 0), (n0, n0)).into_owned());
    v.check(r <= tol, format!("constant kappa assembled {}x{}: relative diff {r:.2e}", free.nrows(), free.ncols()));

    // nonlinear coefficient at a random state, library nodes
    let bench = Benchmark::example(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut u = space.zero();
    for c in u.coeffs.iter_mut().take(n0) {
        *c = rng.random_range(-1.0..1.0);
    }
    let ul = DVector::from_column_slice(&u.coeffs[..n]);
    let (lp, lw) = (&local.rule.points, &local.rule.weights);
    let kq = oracle.kappa_at(&bench.kappa, lp, &ul);
    let mean = lw.iter().zip(&kq).map(|(w, k)| w * k).sum::<f64>() / lw.iter().sum::<f64>();
    for (interp, kv) in [(KappaInterpolation::Pointwise, kq.clone()), (KappaInterpolation::Projected, vec![mean; kq.len()])] {
        let opts = FormOptions { interpolation: interp, ..FormOptions::default() };
        let a_oracle = oracle.matrix(lp, lw, &kv);
        let a_lib = &local_matrices(&space, &bench.kappa, &u, opts).unwrap()[0];
        let r = rel(a_lib, &a_oracle);
        v.check(r <= tol, format!("{interp:?} kappa local matrix: relative diff {r:.2e}"));
        let free = assemble_frozen(&space, &bench.kappa, &u, &|_| 0.0, opts).unwrap().to_dense();
        let r = rel(&free, &a_oracle.view((0, 0), (n0, n0)).into_owned());
        v.check(r <= tol, format!("{interp:?} kappa assembled: relative diff {r:.2e}"));

        let au = &a_oracle * &ul;
        let mut want = DVector::zeros(n0);
        for (p, w) in lp.iter().zip(lw) {
            let phi = oracle.interior_values(p);
            for i in 0..n0 {
                want[i] += w * bench.forcing(p) * phi[i];
            }
        }
        let want = au.rows(0, n0) - want;
        let got = DVector::from_vec(residual(&space, &bench.kappa, &u, &|p| bench.forcing(p), opts).unwrap());
        let r = (&got - &want).norm() / want.norm();
        v.check(r <= tol, format!("{interp:?} kappa residual: relative diff {r:.2e}"));
    }

    // energy norm of an arbitrary local function, boundary DOFs included
    let mut w = space.zero();
    for c in w.coeffs.iter_mut() {
        *c = rng.random_range(-1.0..1.0);
    }
    let wl = DVector::from_column_slice(&w.coeffs[..n]);
    let want = (wl.transpose() * oracle.matrix(&pts, &wts, &ones) * &wl)[(0, 0)].sqrt();
    let got = space.energy_norm(&w);
    let r = (got - want).abs() / want;
    v.check(r <= tol, format!("energy norm {got:.6} vs {want:.6}: relative diff {r:.2e}"));
    v
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("1 example 1 rectangles, k=1 and k=2", criterion1),
        ("2 example 1 quadrilateral-hexagon grids", criterion2),
        ("3 example 2 rectangles", criterion3),
        ("4 example 2 quadrilateral-hexagon grids", criterion4),
        ("5 energy error rates against the projection", criterion5),
        ("6 coefficient monotonicity and Lipschitz probes", criterion6),
        ("7 assembled form monotonicity and Lipschitz probes", criterion7),
        ("8 weak gradient commutes with projections", criterion8),
        ("9 nonlinear iterations", criterion9),
        ("10 single-cell dense oracle", criterion10),
    ];
    let mut all = true;
    for (name, run) in criteria {
        let start = Instant::now();
        let verdict = run();
        for l in &verdict.lines {
            println!("{l}");
        }
        println!("{} criterion {name} ({:.1} s)", if verdict.passed { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
        all &= verdict.passed;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

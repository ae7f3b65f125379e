//! Log-barrier Newton method over node arrival times.
//!
//! Platooned edges share both endpoint times, so the program is re-expressed
//! in node times with every meeting folded into a single point. Differences
//! that the constraints fix exactly are pinned before the barrier starts; what
//! remains has a strictly interior point, taken as the centroid of the
//! network's extreme solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::nnls;
use super::stn::Stn;
use super::{ReducedProgram, SolverResult, SolverStatus};

/// Differences within this many hours of being forced are pinned.
const PIN_TOL: f64 = 1e-9;
const FRACTION_TO_BOUNDARY: f64 = 0.99;
const ARMIJO: f64 = 0.25;
/// Target `m * mu` on the objective normalized to 1 at the start point.
const GAP_TARGET: f64 = 1e-11;
/// Slack below which an inequality counts as active in the certificate.
const ACTIVE_TOL: f64 = 1e-7;
/// Newton decrement threshold ending one centering step.
const CENTERING_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stationarity and complementarity tolerance.
    pub kkt_tol: f64,
    /// Primal feasibility tolerance in hours.
    pub feas_tol: f64,
    /// Total Newton step budget.
    pub max_newton_steps: usize,
    /// Barrier parameter reduction factor.
    pub mu_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-6,
            feas_tol: 1e-8,
            max_newton_steps: 500,
            mu_factor: 5.0,
        }
    }
}

/// Affine function `constant + sum coef * y[var]` of the free node times.
#[derive(Debug, Clone)]
struct Affine {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Affine {
    fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * y[v]).sum::<f64>()
    }

    fn dot(&self, d: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * d[v]).sum()
    }
}

/// The program in free node-time coordinates.
struct Reduced {
    /// Traversal time of each group.
    durations: Vec<Affine>,
    /// Slacks kept positive by the barrier.
    slacks: Vec<Affine>,
    start: Vec<f64>,
}

/// Minimal union-find; the smaller index becomes the root.
fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

fn infeasible(iterations: usize) -> SolverResult {
    SolverResult {
        status: SolverStatus::Infeasible,
        traversal_h: Vec::new(),
        variables: Vec::new(),
        objective: f64::INFINITY,
        stationarity: f64::INFINITY,
        primal_violation: f64::INFINITY,
        complementarity: f64::INFINITY,
        iterations,
    }
}

/// Builds node-time coordinates; `None` when the constraints are inconsistent.
fn reduce(p: &ReducedProgram, warm_start: Option<&[f64]>) -> Option<Reduced> {
    let route_edges: Vec<usize> = p.groups.group_of.iter().map(Vec::len).collect();
    let mut point_offset = Vec::with_capacity(route_edges.len());
    let mut n_points = 0;
    for &e in &route_edges {
        point_offset.push(n_points);
        n_points += e + 1;
    }
    let z = n_points;
    let pt = |k: usize, i: usize| point_offset[k] + i;

    // merged edges share both endpoint times
    let mut parent: Vec<usize> = (0..=n_points).collect();
    for m in &p.groups.members {
        let (k0, i0) = (m[0].0 as usize - 1, m[0].1);
        for &(k, i) in &m[1..] {
            let k = k as usize - 1;
            union(&mut parent, pt(k0, i0), pt(k, i));
            union(&mut parent, pt(k0, i0 + 1), pt(k, i + 1));
        }
    }
    let mut class_of = vec![usize::MAX; n_points + 1];
    let mut n_classes = 0;
    let mut class_index = vec![usize::MAX; n_points + 1];
    for q in 0..=n_points {
        let r = find(&mut parent, q);
        if class_index[r] == usize::MAX {
            class_index[r] = n_classes;
            n_classes += 1;
        }
        class_of[q] = class_index[r];
    }
    let zc = class_of[z];

    let mut stn = Stn::new(n_classes);
    for (k, &e) in route_edges.iter().enumerate() {
        let (s, d) = (p.starts[k], p.deadlines[k]);
        let first = class_of[pt(k, 0)];
        stn.add(zc, first, s);
        stn.add(first, zc, -s);
        stn.add(zc, class_of[pt(k, e)], d);
        for i in 0..e {
            let lb = p.lower_bounds[p.groups.group_of[k][i]];
            stn.add(class_of[pt(k, i + 1)], class_of[pt(k, i)], -lb);
        }
    }
    if !stn.close(PIN_TOL) {
        return None;
    }

    // clusters of classes whose mutual offsets are forced
    let mut cluster_root = vec![usize::MAX; n_classes];
    let mut offset = vec![0.0; n_classes];
    let mut roots: Vec<usize> = vec![zc];
    cluster_root[zc] = zc;
    for c in 0..n_classes {
        if c == zc {
            continue;
        }
        match roots
            .iter()
            .copied()
            .find(|&r| stn.dist(r, c) + stn.dist(c, r) <= PIN_TOL)
        {
            Some(r) => {
                cluster_root[c] = r;
                offset[c] = 0.5 * (stn.dist(r, c) - stn.dist(c, r));
            }
            None => {
                cluster_root[c] = c;
                roots.push(c);
            }
        }
    }
    let mut var_of = vec![usize::MAX; n_classes];
    let mut free_roots = Vec::new();
    for &r in &roots[1..] {
        var_of[r] = free_roots.len();
        free_roots.push(r);
    }

    // affine time of a point
    let time_of = |q: usize| -> Affine {
        let c = class_of[q];
        let r = cluster_root[c];
        Affine {
            constant: offset[c],
            terms: if r == zc { Vec::new() } else { vec![(var_of[r], 1.0)] },
        }
    };
    let diff = |a: &Affine, b: &Affine| -> Affine {
        let mut terms = b.terms.clone();
        for &(v, c) in &a.terms {
            match terms.iter_mut().find(|t| t.0 == v) {
                Some(t) => t.1 -= c,
                None => terms.push((v, -c)),
            }
        }
        terms.retain(|t| t.1 != 0.0);
        terms.sort_by_key(|t| t.0);
        Affine {
            constant: b.constant - a.constant,
            terms,
        }
    };

    let mut durations = Vec::with_capacity(p.num_vars());
    let mut slacks = Vec::new();
    for (g, m) in p.groups.members.iter().enumerate() {
        let (k, i) = (m[0].0 as usize - 1, m[0].1);
        let dur = diff(&time_of(pt(k, i)), &time_of(pt(k, i + 1)));
        if !dur.terms.is_empty() {
            let mut s = dur.clone();
            s.constant -= p.lower_bounds[g];
            slacks.push(s);
        }
        durations.push(dur);
    }
    for (k, &e) in route_edges.iter().enumerate() {
        let end = time_of(pt(k, e));
        if !end.terms.is_empty() {
            let s = Affine {
                constant: p.deadlines[k] - end.constant,
                terms: end.terms.iter().map(|&(v, c)| (v, -c)).collect(),
            };
            slacks.push(s);
        }
    }

    // centroid of the extreme solutions x_c = d[a][c] - d[a][z]
    let mut start = vec![0.0; free_roots.len()];
    for a in 0..n_classes {
        let shift = stn.dist(a, zc);
        for (v, &r) in free_roots.iter().enumerate() {
            start[v] += stn.dist(a, r) - shift;
        }
    }
    for s in &mut start {
        *s /= n_classes as f64;
    }

    if let Some(ws) = warm_start.filter(|ws| ws.len() == p.num_vars()) {
        let mut cand = vec![0.0; free_roots.len()];
        for (k, row) in p.groups.group_of.iter().enumerate() {
            let mut t = p.starts[k];
            for i in 0..=row.len() {
                let c = class_of[pt(k, i)];
                if cluster_root[c] == c && var_of[c] != usize::MAX {
                    cand[var_of[c]] = t;
                }
                if i < row.len() {
                    t += ws[row[i]];
                }
            }
        }
        if slacks.iter().all(|s| s.eval(&cand) > 0.0) {
            start = cand;
        }
    }

    Some(Reduced {
        durations,
        slacks,
        start,
    })
}

struct Barrier<'a> {
    p: &'a ReducedProgram,
    r: &'a Reduced,
    scale: f64,
}

impl Barrier<'_> {
    fn objective(&self, y: &[f64]) -> f64 {
        self.r
            .durations
            .iter()
            .zip(&self.p.coeffs)
            .map(|(d, c)| c / d.eval(y).powi(2))
            .sum()
    }

    /// Barrier function value, `+inf` outside the domain.
    fn value(&self, y: &[f64], mu: f64) -> f64 {
        let mut log_sum = 0.0;
        for s in &self.r.slacks {
            let v = s.eval(y);
            if v <= 0.0 {
                return f64::INFINITY;
            }
            log_sum += v.ln();
        }
        self.objective(y) * self.scale - mu * log_sum
    }

    fn derivatives(&self, y: &[f64], mu: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = y.len();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let mut add = |a: &Affine, d1: f64, d2: f64| {
            for &(i, ci) in &a.terms {
                g[i] += d1 * ci;
                for &(j, cj) in &a.terms {
                    h[(i, j)] += d2 * ci * cj;
                }
            }
        };
        for (d, c) in self.r.durations.iter().zip(&self.p.coeffs) {
            if d.terms.is_empty() {
                continue;
            }
            let t = d.eval(y);
            let c = c * self.scale;
            add(d, -2.0 * c / t.powi(3), 6.0 * c / t.powi(4));
        }
        for s in &self.r.slacks {
            let v = s.eval(y);
            add(s, -mu / v, mu / (v * v));
        }
        (g, h)
    }
}

/// Cholesky solve of `h d = -g`, regularizing if `h` is numerically singular.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let mut reg = 0.0;
    let diag_scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            return Some(-ch.solve(g));
        }
        reg = if reg == 0.0 { diag_scale * 1e-14 } else { reg * 100.0 };
    }
    None
}

pub(super) fn solve(p: &ReducedProgram, warm_start: Option<&[f64]>, opts: &SolverOptions) -> SolverResult {
    let Some(r) = reduce(p, warm_start) else {
        return infeasible(0);
    };
    let n = r.start.len();
    let m = r.slacks.len();
    let mut y = r.start.clone();
    let mut iterations = 0;
    let mut hit_cap = false;

    if n > 0 {
        let f0 = Barrier { p, r: &r, scale: 1.0 }.objective(&y);
        let bar = Barrier {
            p,
            r: &r,
            scale: 1.0 / f0.max(f64::MIN_POSITIVE),
        };
        let mut mu = 1.0 / m.max(1) as f64;
        'outer: loop {
            loop {
                if iterations >= opts.max_newton_steps {
                    hit_cap = true;
                    break 'outer;
                }
                let (g, h) = bar.derivatives(&y, mu);
                let Some(d) = newton_direction(&g, &h) else {
                    hit_cap = true;
                    break 'outer;
                };
                iterations += 1;
                let decrement = -g.dot(&d);
                if decrement <= CENTERING_TOL {
                    break;
                }
                let mut alpha: f64 = 1.0;
                for s in &r.slacks {
                    let ds = s.dot(d.as_slice());
                    if ds < 0.0 {
                        alpha = alpha.min(-FRACTION_TO_BOUNDARY * s.eval(&y) / ds);
                    }
                }
                let phi = bar.value(&y, mu);
                let mut accepted = false;
                for _ in 0..60 {
                    let cand: Vec<f64> = y.iter().zip(d.iter()).map(|(a, b)| a + alpha * b).collect();
                    if bar.value(&cand, mu) <= phi - ARMIJO * alpha * decrement {
                        y = cand;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            if m as f64 * mu <= GAP_TARGET {
                break;
            }
            mu /= opts.mu_factor;
        }
    }

    if hit_cap {
        log::debug!("newton budget exhausted after {iterations} steps");
    }
    finish(p, &r, &y, iterations, opts)
}

/// Maps back to traversal times and certifies first-order optimality.
///
/// Multipliers are fitted by least squares over the equalities and the
/// inequalities with slack below `ACTIVE_TOL`; inactive ones get zero.
fn finish(p: &ReducedProgram, r: &Reduced, y: &[f64], iterations: usize, opts: &SolverOptions) -> SolverResult {
    let x: Vec<f64> = r.durations.iter().map(|d| d.eval(y)).collect();
    let objective = p.objective(&x);
    let n = x.len();
    let grad = DVector::from_vec(p.gradient(&x));

    // outward normals of the active inequalities and their slacks
    let mut normals: Vec<(DVector<f64>, f64)> = Vec::new();
    for (g, lb) in p.lower_bounds.iter().enumerate() {
        if x[g] - lb <= ACTIVE_TOL {
            let mut col = DVector::zeros(n);
            col[g] = -1.0;
            normals.push((col, x[g] - lb));
        }
    }
    for row in &p.deadline_rows {
        let slack = row.rhs - row.eval(&x);
        if slack <= ACTIVE_TOL {
            let mut col = DVector::zeros(n);
            for &(v, c) in &row.terms {
                col[v] += c;
            }
            normals.push((col, slack));
        }
    }
    let q_eq = p.equalities.len();
    let q = q_eq + normals.len();
    let mut resid = grad.clone();
    let mut dual_infeasibility = 0.0f64;
    let mut gap = 0.0;
    if q > 0 && n > 0 {
        let mut a = DMatrix::zeros(n, q);
        for (j, row) in p.equalities.iter().enumerate() {
            for &(v, c) in &row.terms {
                a[(v, j)] += c;
            }
        }
        for (j, (col, _)) in normals.iter().enumerate() {
            a.set_column(q_eq + j, col);
        }
        let mult = nnls::solve(&a, &(-&grad), q_eq);
        resid += &a * &mult;
        for (j, (_, slack)) in normals.iter().enumerate() {
            let lambda = mult[q_eq + j];
            dual_infeasibility = dual_infeasibility.max(-lambda);
            gap += lambda.abs() * slack.abs();
        }
    }
    let scale = grad.amax().max(1.0);
    let stationarity = resid.amax().max(dual_infeasibility) / scale;
    let complementarity = gap / objective.abs().max(1.0);
    let primal_violation = p.primal_violation(&x);

    let certified =
        stationarity <= opts.kkt_tol && complementarity <= opts.kkt_tol && primal_violation <= opts.feas_tol;
    SolverResult {
        status: if certified {
            SolverStatus::Optimal
        } else {
            SolverStatus::MaxIterations
        },
        traversal_h: p.unmerge(&x),
        variables: x,
        objective,
        stationarity,
        primal_violation,
        complementarity,
        iterations,
    }
}

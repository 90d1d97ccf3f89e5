//! The core l1 row-recovery linear program:
//!
//! ```text
//! minimize ||w^T Y||_1   subject to   r^T w = 1
//! ```
//!
//! solved exactly by an active-set simplex working directly in `w`-space.
//! A vertex is a point where `n - 1` linearly independent columns of `Y`
//! have `y_j^T w = 0` together with the normalization constraint; the solver
//! walks edges between such vertices. This is the revised simplex on the
//! slack reformulation (free `w` split plus `p` slacks) with the unit slack
//! columns condensed away, so an iteration costs `O(np + n^3)` instead of a
//! dense `(2p+1) x (2n+3p)` tableau update.
//!
//! Pivoting: steepest-edge-free Dantzig rule with a long-step ratio test
//! (multiple breakpoints per pivot); Bland's rule is engaged after
//! `10 (n + p)` iterations to guarantee termination under degeneracy.
//! Objective is bounded below by zero, so no unbounded status exists.

use crate::error::{Error, Result};
use crate::mat::{dot, norm2, norm_inf, Mat};

/// Feasibility tolerance on `|r^T w - 1|`.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for declaring optimality.
pub const OPT_TOL: f64 = 1e-9;
/// Relative pivot magnitude floor in the ratio test.
pub const PIVOT_TOL: f64 = 1e-10;
/// Residuals above this (relative) resync the tracked basic side; smaller
/// ones are treated as degenerate and keep their bookkeeping.
const SIGN_ZERO_REL: f64 = 1e-11;
/// Independence tolerance when assembling the initial basis.
const INIT_TOL: f64 = 1e-8;

/// One row-recovery instance: `Y` is n-by-p, `r` the constraint vector.
#[derive(Clone, Copy, Debug)]
pub struct RowRecoveryProblem<'a> {
    pub y: &'a Mat,
    pub r: &'a [f64],
}

impl RowRecoveryProblem<'_> {
    pub fn solve(&self) -> Result<RowRecoverySolution> {
        solve_row_recovery(self.y, self.r)
    }
}

/// Termination state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// Constraint vector is (numerically) zero; the hyperplane is empty.
    Infeasible,
}

/// Result of one l1 LP: weight vector `w`, candidate row `s = w^T Y`,
/// objective `||s||_1`, status, and pivot count.
#[derive(Clone, Debug)]
pub struct RowRecoverySolution {
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

impl RowRecoverySolution {
    fn infeasible(n: usize, p: usize) -> Self {
        RowRecoverySolution {
            w: vec![0.0; n],
            s: vec![0.0; p],
            objective: f64::INFINITY,
            status: LpStatus::Infeasible,
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solve `min ||w^T Y||_1 : r^T w = 1`.
pub fn solve_row_recovery(y: &Mat, r: &[f64]) -> Result<RowRecoverySolution> {
    let n = y.rows();
    let p = y.cols();
    if n == 0 || p == 0 {
        return Err(Error::Dim(format!("row recovery needs n >= 1, p >= 1, got {n}x{p}")));
    }
    if r.len() != n {
        return Err(Error::Dim(format!("constraint vector length {} != n = {n}", r.len())));
    }
    if !y.is_finite() || !r.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("row recovery inputs must be finite".into()));
    }
    if r.iter().all(|&v| v == 0.0) {
        return Ok(RowRecoverySolution::infeasible(n, p));
    }
    match Simplex::new(y, r).run(None) {
        Ok(sol) => Ok(sol),
        Err(RunFail::Hard(err)) => Err(err),
        Err(RunFail::Stalled { objective_scale }) => {
            // Massively degenerate vertex (the optimum of these instances
            // has most residuals at zero): restart with tiny distinct kink
            // offsets so every vertex of the perturbed problem is
            // nondegenerate, then polish the final basis at zero offsets.
            let mut rng = crate::randmodel::Prng::seed_from(0x06FF_5E75);
            let eps = 1e-7 * (1.0 + objective_scale) / p as f64;
            let delta: Vec<f64> = (0..p).map(|_| eps * (1.0 + rng.next_f64())).collect();
            match Simplex::new(y, r).run(Some(&delta)) {
                Ok(sol) => Ok(sol),
                Err(RunFail::Hard(err)) => Err(err),
                Err(RunFail::Stalled { .. }) => {
                    unreachable!("stall detection is disabled on perturbed runs")
                }
            }
        }
    }
}

/// Projected variant used by the iterative-projections pipeline: the
/// constraint vector is replaced by its component orthogonal to `basis`.
/// Infeasible when that component vanishes.
pub fn solve_projected_row_recovery(
    y: &Mat,
    r: &[f64],
    basis: &[Vec<f64>],
) -> Result<RowRecoverySolution> {
    let mut projected = r.to_vec();
    for u in basis {
        if u.len() != r.len() {
            return Err(Error::Dim("projection basis vector length mismatch".into()));
        }
        let coeff = dot(u, &projected);
        for (pi, ui) in projected.iter_mut().zip(u) {
            *pi -= coeff * ui;
        }
    }
    if norm2(&projected) <= 1e-10 * norm2(r) {
        return Ok(RowRecoverySolution::infeasible(y.rows(), y.cols()));
    }
    solve_row_recovery(y, &projected)
}

// ---- the active-set simplex ----

#[derive(Clone, Copy, Debug, PartialEq)]
enum BasisEntry {
    /// Active zero `y_j^T w = 0` for column `j`.
    Col(usize),
    /// The normalization row `r^T w = 1`.
    Constraint,
    /// Unit-vector pin used only when `[Y^T; r^T]` is rank deficient.
    Virtual(usize),
}

/// Internal outcome of one simplex run.
enum RunFail {
    /// No objective progress across a long degenerate stretch; the caller
    /// restarts with perturbed kinks.
    Stalled { objective_scale: f64 },
    Hard(Error),
}

impl From<Error> for RunFail {
    fn from(err: Error) -> Self {
        RunFail::Hard(err)
    }
}

struct Simplex<'a> {
    n: usize,
    p: usize,
    /// Columns of `Y`, stored contiguously: row `j` of this buffer is `y_j`.
    yt: Vec<f64>,
    /// 2-norms of the columns, for relative pivot admissibility.
    col_norm: Vec<f64>,
    r: &'a [f64],
    basis: Vec<BasisEntry>,
    constraint_pos: usize,
    in_basis: Vec<bool>,
}

impl<'a> Simplex<'a> {
    fn new(y: &Mat, r: &'a [f64]) -> Self {
        let n = y.rows();
        let p = y.cols();
        let mut yt = vec![0.0; n * p];
        for i in 0..n {
            for (j, &v) in y.row(i).iter().enumerate() {
                yt[j * n + i] = v;
            }
        }
        let col_norm = (0..p).map(|j| norm2(&yt[j * n..(j + 1) * n])).collect();
        Simplex { n, p, yt, col_norm, r, basis: Vec::new(), constraint_pos: 0, in_basis: vec![false; p] }
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.yt[j * self.n..(j + 1) * self.n]
    }

    fn basis_row(&self, k: usize) -> &[f64] {
        match self.basis[k] {
            BasisEntry::Col(j) => self.col(j),
            BasisEntry::Constraint => self.r,
            BasisEntry::Virtual(_) => unreachable!("virtual rows are materialized on demand"),
        }
    }

    fn build_m(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for k in 0..self.n {
            match self.basis[k] {
                BasisEntry::Virtual(i) => m.set(k, i, 1.0),
                _ => {
                    for (i, &v) in self.basis_row(k).iter().enumerate() {
                        m.set(k, i, v);
                    }
                }
            }
        }
        m
    }

    /// Assemble an initial vertex basis: the constraint row, then columns of
    /// `Y` in index order while they extend the span, then unit-vector pins
    /// for any rank deficiency of `[Y^T; r^T]`.
    fn init_basis(&mut self) {
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(self.n);
        let rn = norm2(self.r);
        ortho.push(self.r.iter().map(|v| v / rn).collect());
        self.basis.push(BasisEntry::Constraint);
        self.constraint_pos = 0;

        for j in 0..self.p {
            if self.basis.len() == self.n {
                break;
            }
            if let Some(u) = crate::mat::orthobasis_append(&ortho, self.col(j), INIT_TOL) {
                ortho.push(u);
                self.basis.push(BasisEntry::Col(j));
                self.in_basis[j] = true;
            }
        }
        let mut unit = vec![0.0; self.n];
        for i in 0..self.n {
            if self.basis.len() == self.n {
                break;
            }
            unit[i] = 1.0;
            if let Some(u) = crate::mat::orthobasis_append(&ortho, &unit, INIT_TOL) {
                ortho.push(u);
                self.basis.push(BasisEntry::Virtual(i));
            }
            unit[i] = 0.0;
        }
        debug_assert_eq!(self.basis.len(), self.n);
    }

    /// One simplex run. `delta` shifts each kink from `y_j^T w = 0` to
    /// `y_j^T w = delta_j` (the perturbed restart); the returned vertex is
    /// always polished at zero offsets.
    fn run(mut self, delta: Option<&[f64]>) -> std::result::Result<RowRecoverySolution, RunFail> {
        self.init_basis();
        let mut lu = LuFactors::factor(&self.build_m())?;

        let bland_after = 10 * (self.n + self.p);
        let hard_cap = 100 * (self.n + self.p) + 10_000;
        let stall_after = 3 * (self.n + self.p);
        let mut iterations = 0usize;

        // Basic-side bookkeeping: for a nonbasic column, `side[j]` records
        // which of the two slack variables of `|s_j|` is basic. This matches
        // the exact simplex algebra even while `s_j = 0` (degenerate), which
        // is what makes Bland's rule sound here.
        let mut side: Vec<i8> = vec![1; self.p];
        let mut rhs = vec![0.0; self.n];
        let mut s = vec![0.0; self.p];
        let mut first = true;
        // these LPs are massively degenerate at optima (most residuals hit
        // zero); basis conditioning can decay across degenerate pivots and
        // turn pricing into noise, so rebuild the basis in place when the
        // dual solve blows up
        let mut last_repair: Option<usize> = None;
        let mut repaired_at_bland = false;
        // objective progress tracking for the stall escape
        let mut best_obj = f64::INFINITY;
        let mut last_improve = 0usize;

        loop {
            // vertex for the current basis, with one refinement pass
            self.vertex_rhs(delta, &mut rhs);
            let mut w = lu.solve(&rhs);
            self.refine(&lu, &rhs, &mut w);

            // residuals relative to the kinks; basis columns sit exactly on
            // theirs by definition
            for j in 0..self.p {
                s[j] = if self.in_basis[j] {
                    0.0
                } else {
                    dot(self.col(j), &w) - delta.map_or(0.0, |d| d[j])
                };
            }

            let objective: f64 = s.iter().map(|v| v.abs()).sum();
            if objective < best_obj - 1e-10 * (1.0 + best_obj.min(1e300)) {
                best_obj = objective;
                last_improve = iterations;
            } else if delta.is_none() && iterations - last_improve > stall_after {
                return Err(RunFail::Stalled { objective_scale: best_obj });
            }
            // resync sides against residuals that are unambiguously signed;
            // ones near zero keep their tracked side
            let resync = SIGN_ZERO_REL * norm_inf(&s).max(1.0);
            for j in 0..self.p {
                if first || s[j].abs() > resync {
                    side[j] = if s[j] >= 0.0 { 1 } else { -1 };
                }
            }
            first = false;

            // pricing: g = sum of side_j y_j over all nonbasic columns, then
            // q = M^-T g gives every edge derivative at once
            let mut g = vec![0.0; self.n];
            for j in 0..self.p {
                if !self.in_basis[j] {
                    let sj = f64::from(side[j]);
                    for (gi, &cv) in g.iter_mut().zip(self.col(j)) {
                        *gi += sj * cv;
                    }
                }
            }
            let q = lu.solve_t(&g);

            let bland = iterations >= bland_after;
            let q_blown = !q.iter().all(|v| v.is_finite())
                || norm_inf(&q) > 1e7 * (1.0 + norm_inf(&g));
            let repair_cooled = last_repair.is_none_or(|at| iterations >= at + 10);
            if (q_blown || (bland && !repaired_at_bland)) && repair_cooled {
                repaired_at_bland |= bland;
                last_repair = Some(iterations);
                self.repair_basis(&s, &mut side);
                lu = LuFactors::factor(&self.build_m())?;
                if std::env::var_os("ERSPUD_LP_TRACE").is_some() {
                    eprintln!(
                        "lp repair iter={iterations} bland={bland} q_blown={q_blown} qmax={:.3e}",
                        norm_inf(&q)
                    );
                }
                continue;
            }
            // entering edge: relax one active zero in one direction
            let mut entering: Option<(usize, f64, f64, usize)> = None; // (k, dir, cost, column)
            for k in 0..self.n {
                let j_k = match self.basis[k] {
                    BasisEntry::Col(j) => j,
                    _ => continue,
                };
                for dir in [1.0, -1.0] {
                    let cost = 1.0 + dir * q[k];
                    if cost >= -OPT_TOL {
                        continue;
                    }
                    // Dantzig: most negative cost. Bland: lowest column index
                    // (the + direction is visited first on ties).
                    let take = match entering {
                        None => true,
                        Some((_, _, best_cost, best_j)) => {
                            if bland {
                                j_k < best_j
                            } else {
                                cost < best_cost
                            }
                        }
                    };
                    if take {
                        entering = Some((k, dir, cost, j_k));
                    }
                }
            }

            let Some((k_enter, dir, enter_cost, relaxed_col)) = entering else {
                return Ok(self.finish(&lu, iterations)?);
            };

            // edge direction relaxing the active zero at position k_enter,
            // with one refinement pass
            rhs.iter_mut().for_each(|v| *v = 0.0);
            rhs[k_enter] = dir;
            let mut d = lu.solve(&rhs);
            self.refine(&lu, &rhs, &mut d);
            let d_norm = norm2(&d);

            // breakpoints: nonbasic residuals reaching zero from their basic
            // side along the edge. Pivot admissibility is relative to column
            // and edge scale so a near-orthogonal pivot cannot drag the
            // basis toward singularity.
            let mut xi = vec![0.0; self.p];
            for j in 0..self.p {
                if !self.in_basis[j] {
                    xi[j] = dot(self.col(j), &d);
                }
            }
            let mut breakpoints: Vec<(f64, usize)> = Vec::new();
            for j in 0..self.p {
                if self.in_basis[j] {
                    continue;
                }
                if xi[j].abs() <= PIVOT_TOL * (1.0 + self.col_norm[j] * d_norm) {
                    continue;
                }
                if f64::from(side[j]) * xi[j] < 0.0 {
                    breakpoints.push(((-s[j] / xi[j]).max(0.0), j));
                }
            }
            if breakpoints.is_empty() {
                return Err(Error::LpNumerical(
                    "descent edge with no blocking breakpoint".into(),
                )
                .into());
            }

            // Harris-style ratio-test band: degenerate ties smear across
            // tiny ratios, and picking the largest pivot inside the band
            // keeps the basis conditioned. Perturbed runs separate kinks on
            // purpose, so their band must stay below the offset spacing.
            let band_rel = if delta.is_some() { 1e-12 } else { 1e-9 };
            let leave_j = if bland {
                let t_min = breakpoints
                    .iter()
                    .map(|&(t, _)| t)
                    .fold(f64::INFINITY, f64::min);
                let band = band_rel * (1.0 + t_min);
                breakpoints
                    .iter()
                    .filter(|&&(t, _)| t <= t_min + band)
                    .max_by(|a, b| {
                        xi[a.1].abs().partial_cmp(&xi[b.1].abs()).expect("finite pivots")
                    })
                    .map(|&(_, j)| j)
                    .expect("nonempty breakpoint set")
            } else {
                // long step: walk breakpoints while the edge still descends
                // (each crossing flips a residual's contribution, +2|xi|),
                // then take the largest pivot within the stopping cluster;
                // strictly earlier breakpoints are crossed and change side
                breakpoints
                    .sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite ratios"));
                let mut slope = enter_cost;
                let mut stop_t = breakpoints[breakpoints.len() - 1].0;
                for &(t, j) in &breakpoints {
                    slope += 2.0 * xi[j].abs();
                    if slope >= 0.0 {
                        stop_t = t;
                        break;
                    }
                }
                let cluster = band_rel * (1.0 + stop_t.abs());
                let pick = breakpoints
                    .iter()
                    .filter(|&&(t, _)| (t - stop_t).abs() <= cluster)
                    .max_by(|a, b| {
                        xi[a.1].abs().partial_cmp(&xi[b.1].abs()).expect("finite pivots")
                    })
                    .map(|&(_, j)| j)
                    .expect("stopping cluster nonempty");
                for &(t, j) in &breakpoints {
                    if t >= stop_t - cluster {
                        break;
                    }
                    side[j] = -side[j];
                }
                pick
            };

            if std::env::var_os("ERSPUD_LP_TRACE").is_some() {
                let objective: f64 = s.iter().map(|v| v.abs()).sum();
                eprintln!(
                    "lp iter={iterations} bland={bland} relax_col={relaxed_col} dir={dir} cost={enter_cost:.3e} enter_col={leave_j} obj={objective:.12e}"
                );
            }

            // swap: the relaxed column goes nonbasic on the side it was
            // pushed toward, leave_j becomes an active zero
            side[relaxed_col] = if dir > 0.0 { 1 } else { -1 };
            self.swap_basis(k_enter, leave_j);
            lu = LuFactors::factor(&self.build_m())?;

            iterations += 1;
            if iterations > hard_cap {
                return Err(Error::IterationLimit(iterations).into());
            }
        }
    }

    fn swap_basis(&mut self, k: usize, new_col: usize) {
        if let BasisEntry::Col(old) = self.basis[k] {
            self.in_basis[old] = false;
        }
        self.basis[k] = BasisEntry::Col(new_col);
        self.in_basis[new_col] = true;
    }

    /// Rebuild a well-conditioned basis at the current vertex. Any maximal
    /// independent subset of the active columns together with the
    /// normalization row pins the same point, so this resets conditioning
    /// without moving `w`. Uses greedy max-residual (pivoted) selection.
    fn repair_basis(&mut self, s: &[f64], side: &mut [i8]) {
        let ztol = 1e-9 * norm_inf(s).max(1.0);
        let active: Vec<usize> = (0..self.p)
            .filter(|&j| self.in_basis[j] || s[j].abs() <= ztol)
            .collect();

        let rn = norm2(self.r);
        let mut ortho: Vec<Vec<f64>> = vec![self.r.iter().map(|v| v / rn).collect()];
        let mut residuals: Vec<(usize, Vec<f64>)> = active
            .iter()
            .map(|&j| (j, self.col(j).to_vec()))
            .collect();
        // project out the constraint direction up front
        for (_, v) in residuals.iter_mut() {
            let proj = dot(&ortho[0], v);
            for (vi, ui) in v.iter_mut().zip(&ortho[0]) {
                *vi -= proj * ui;
            }
        }

        for j in 0..self.p {
            if self.in_basis[j] {
                side[j] = 1;
            }
        }
        self.in_basis.iter_mut().for_each(|b| *b = false);
        let mut new_basis = vec![BasisEntry::Constraint];

        while new_basis.len() < self.n {
            let Some((slot, _)) = residuals
                .iter()
                .enumerate()
                .map(|(i, (j, v))| (i, norm2(v) / self.col_norm[*j].max(f64::MIN_POSITIVE)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite residuals"))
            else {
                break;
            };
            let rel = norm2(&residuals[slot].1) / self.col_norm[residuals[slot].0].max(f64::MIN_POSITIVE);
            if rel <= INIT_TOL {
                break;
            }
            let (j, mut u) = residuals.swap_remove(slot);
            let un = norm2(&u);
            u.iter_mut().for_each(|v| *v /= un);
            for (_, v) in residuals.iter_mut() {
                let proj = dot(&u, v);
                for (vi, ui) in v.iter_mut().zip(&u) {
                    *vi -= proj * ui;
                }
            }
            ortho.push(u);
            new_basis.push(BasisEntry::Col(j));
            self.in_basis[j] = true;
        }
        // fill any rank deficiency with unit pins
        let mut unit = vec![0.0; self.n];
        for i in 0..self.n {
            if new_basis.len() == self.n {
                break;
            }
            unit[i] = 1.0;
            if let Some(u) = crate::mat::orthobasis_append(&ortho, &unit, INIT_TOL) {
                ortho.push(u);
                new_basis.push(BasisEntry::Virtual(i));
            }
            unit[i] = 0.0;
        }
        self.basis = new_basis;
        self.constraint_pos = 0;
    }

    /// Right-hand side pinning the current basis: each active column sits
    /// on its kink (zero, or its perturbation offset) and the normalization
    /// row equals one.
    fn vertex_rhs(&self, delta: Option<&[f64]>, out: &mut [f64]) {
        for (k, entry) in self.basis.iter().enumerate() {
            out[k] = match entry {
                BasisEntry::Col(j) => delta.map_or(0.0, |d| d[*j]),
                BasisEntry::Constraint => 1.0,
                BasisEntry::Virtual(_) => 0.0,
            };
        }
    }

    fn refine(&self, lu: &LuFactors, rhs: &[f64], w: &mut [f64]) {
        let mut residual = rhs.to_vec();
        for k in 0..self.n {
            let row_dot = match self.basis[k] {
                BasisEntry::Virtual(i) => w[i],
                _ => dot(self.basis_row(k), w),
            };
            residual[k] -= row_dot;
        }
        let correction = lu.solve(&residual);
        for (wi, ci) in w.iter_mut().zip(&correction) {
            *wi += ci;
        }
    }

    /// Resolve the final basis at zero kink offsets, exactify the
    /// normalization and assemble the solution.
    fn finish(&self, lu: &LuFactors, iterations: usize) -> Result<RowRecoverySolution> {
        let mut rhs = vec![0.0; self.n];
        self.vertex_rhs(None, &mut rhs);
        let mut w = lu.solve(&rhs);
        self.refine(lu, &rhs, &mut w);
        let mut s = vec![0.0; self.p];
        // exactify the normalization; active zeros are scale invariant
        let rw = dot(self.r, &w);
        if !rw.is_finite() || rw.abs() < 1e-300 {
            return Err(Error::LpNumerical("degenerate normalization at optimum".into()));
        }
        if (rw - 1.0).abs() > FEAS_TOL {
            return Err(Error::LpNumerical(format!(
                "feasibility residual {:.3e} above tolerance",
                (rw - 1.0).abs()
            )));
        }
        for v in w.iter_mut() {
            *v /= rw;
        }
        for (j, sv) in s.iter_mut().enumerate() {
            if !self.in_basis[j] {
                *sv = dot(self.col(j), &w);
            }
        }
        let objective = s.iter().map(|v| v.abs()).sum();
        Ok(RowRecoverySolution { w, s, objective, status: LpStatus::Optimal, iterations })
    }
}

/// Dense LU with partial pivoting, kept around for repeated solves against
/// the same basis matrix.
struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    fn factor(m: &Mat) -> Result<Self> {
        let n = m.rows();
        let threshold = 1e-14 * m.max_abs().max(f64::MIN_POSITIVE);
        let mut lu = m.data().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pmax = 0.0;
            let mut prow = k;
            for i in k..n {
                let v = lu[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    prow = i;
                }
            }
            if pmax <= threshold {
                return Err(Error::LpNumerical(format!(
                    "basis matrix singular at pivot {k} ({pmax:.3e})"
                )));
            }
            if prow != k {
                for j in 0..n {
                    lu.swap(k * n + j, prow * n + j);
                }
                perm.swap(k, prow);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                for j in (k + 1)..n {
                    lu[i * n + j] -= factor * lu[k * n + j];
                }
            }
        }
        Ok(LuFactors { n, lu, perm })
    }

    /// Solve `M x = b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }

    /// Solve `M^T x = b` (for pricing).
    fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        // U^T y = b (forward, U upper triangular)
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[j * n + i] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        // L^T z = y (backward, unit lower)
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[j * n + i] * x[j];
            }
            x[i] = acc;
        }
        // undo row permutation: (PM)^T x' = b solved above, x = P^T-consistent
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[self.perm[i]] = x[i];
        }
        out
    }
}

/// Exact optimum of the row-recovery LP by basic-solution enumeration.
/// Test oracle only: refuses instances beyond `n <= 6, p <= 8`.
pub fn lp_vertex_oracle(y: &Mat, r: &[f64]) -> Result<f64> {
    let n = y.rows();
    let p = y.cols();
    if n > 6 || p > 8 {
        return Err(Error::Guard(format!(
            "vertex oracle is combinatorial; refuses n = {n} > 6 or p = {p} > 8"
        )));
    }
    if r.len() != n {
        return Err(Error::Dim("constraint vector length mismatch".into()));
    }
    if r.iter().all(|&v| v == 0.0) {
        return Err(Error::Config("zero constraint vector is infeasible".into()));
    }

    // candidate active rows: the p columns of Y plus unit pins that stand in
    // for rank deficiency of [Y^T; r^T]
    let mut candidates: Vec<Vec<f64>> = (0..p).map(|j| y.col(j)).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        candidates.push(e);
    }

    let mut best = f64::INFINITY;
    let mut subset = vec![0usize; n.saturating_sub(1)];
    enumerate_subsets(candidates.len(), n - 1, &mut subset, 0, 0, &mut |chosen| {
        let mut m = Mat::zeros(n, n);
        for (k, &c) in chosen.iter().enumerate() {
            for (i, &v) in candidates[c].iter().enumerate() {
                m.set(k, i, v);
            }
        }
        for (i, &v) in r.iter().enumerate() {
            m.set(n - 1, i, v);
        }
        let mut rhs = Mat::zeros(n, 1);
        rhs.set(n - 1, 0, 1.0);
        if let Ok(w) = crate::mat::solve_linear(&m, &rhs) {
            let wv: Vec<f64> = (0..n).map(|i| w.get(i, 0)).collect();
            if wv.iter().all(|v| v.is_finite()) {
                let obj: f64 = (0..p).map(|j| dot(&y.col(j), &wv).abs()).sum();
                if obj < best {
                    best = obj;
                }
            }
        }
    });
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::LpNumerical("no invertible active set found".into()))
    }
}

fn enumerate_subsets(
    total: usize,
    size: usize,
    buf: &mut [usize],
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == size {
        visit(&buf[..size]);
        return;
    }
    for c in start..total {
        buf[depth] = c;
        enumerate_subsets(total, size, buf, depth + 1, c + 1, visit);
    }
}

/// Visit all size-`size` subsets of `0..total` in lexicographic order.
/// Shared with the other combinatorial test oracles in this crate.
pub(crate) fn visit_subsets(
    total: usize,
    size: usize,
    buf: &mut [usize],
    visit: &mut impl FnMut(&[usize]),
) {
    enumerate_subsets(total, size, buf, 0, 0, visit);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{matmul, solve_linear};
    use crate::randmodel::Prng;
    use approx::assert_relative_eq;

    fn gaussian_mat(rng: &mut Prng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_forced_by_constraint() {
        let y = Mat::identity(2);
        let sol = RowRecoveryProblem { y: &y, r: &[1.0, 0.0] }.solve().unwrap();
        assert!(sol.is_optimal());
        assert_relative_eq!(sol.w[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.w[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_worked_two_by_two() {
        // minimize |w1| + |w1 + w2| with w1 = 1 forced
        let y = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let sol = solve_row_recovery(&y, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.w[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.w[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.s[0], 1.0, epsilon = 1e-12);
        assert_eq!(sol.s[1], 0.0);
    }

    #[test]
    fn one_by_one_forced() {
        let y = Mat::from_rows(&[vec![2.0]]).unwrap();
        let sol = solve_row_recovery(&y, &[1.0]).unwrap();
        assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-12);
        assert_eq!(lp_vertex_oracle(&y, &[1.0]).unwrap(), 2.0);
    }

    #[test]
    fn zero_constraint_is_infeasible() {
        let y = Mat::identity(3);
        let sol = solve_row_recovery(&y, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn non_finite_rejected() {
        let y = Mat::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(matches!(
            solve_row_recovery(&y, &[1.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn oracle_identity_case() {
        let y = Mat::identity(2);
        assert_relative_eq!(lp_vertex_oracle(&y, &[1.0, 0.0]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_guard_refuses_large() {
        let y = Mat::zeros(7, 4);
        let ones = vec![1.0; 7];
        assert!(matches!(lp_vertex_oracle(&y, &ones), Err(Error::Guard(_))));
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = Prng::seed_from(0x11B5);
        for trial in 0..100 {
            let n = 1 + rng.uniform_usize(4);
            let p = 1 + rng.uniform_usize(6);
            let y = gaussian_mat(&mut rng, n, p);
            let r: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            if r.iter().all(|&v| v.abs() < 1e-12) {
                continue;
            }
            let sol = solve_row_recovery(&y, &r).unwrap();
            let oracle = lp_vertex_oracle(&y, &r).unwrap();
            assert!(
                (sol.objective - oracle).abs() <= 1e-7 * (1.0 + oracle),
                "trial {trial}: solver {} vs oracle {}",
                sol.objective,
                oracle
            );
        }
    }

    #[test]
    fn feasibility_and_objective_invariants() {
        let mut rng = Prng::seed_from(0xFEA5);
        for _ in 0..50 {
            let n = 2 + rng.uniform_usize(4);
            let p = 2 + rng.uniform_usize(8);
            let y = gaussian_mat(&mut rng, n, p);
            let r: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let sol = solve_row_recovery(&y, &r).unwrap();
            assert!(sol.objective >= 0.0);
            assert!((dot(&r, &sol.w) - 1.0).abs() <= FEAS_TOL);
            let l1: f64 = sol.s.iter().map(|v| v.abs()).sum();
            assert!((sol.objective - l1).abs() <= 1e-9 * (1.0 + l1));
        }
    }

    #[test]
    fn scale_invariance_of_objective() {
        let mut rng = Prng::seed_from(0x5CA1);
        for _ in 0..30 {
            let n = 2 + rng.uniform_usize(3);
            let p = 3 + rng.uniform_usize(5);
            let y = gaussian_mat(&mut rng, n, p);
            let r: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let c = 0.25 + 3.0 * rng.next_f64();
            let c = if rng.rademacher() > 0.0 { c } else { -c };
            let scaled: Vec<f64> = r.iter().map(|v| c * v).collect();
            let base = solve_row_recovery(&y, &r).unwrap();
            let scl = solve_row_recovery(&y, &scaled).unwrap();
            assert!(
                (scl.objective - base.objective / c.abs()).abs()
                    <= 1e-8 * (1.0 + base.objective),
                "objective not 1/|c|-homogeneous"
            );
        }
    }

    #[test]
    fn change_of_variables_equivalence() {
        // solving on (Y = AX, r) and on (X, b = A^-1 r) gives equal objectives
        let mut rng = Prng::seed_from(0xC0DE);
        for _ in 0..20 {
            let n = 3;
            let p = 6;
            let a = gaussian_mat(&mut rng, n, n);
            let x = gaussian_mat(&mut rng, n, p);
            let y = matmul(&a, &x).unwrap();
            let r: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let rmat = Mat::from_vec(n, 1, r.clone()).unwrap();
            let b = match solve_linear(&a, &rmat) {
                Ok(b) => b,
                Err(_) => continue, // nearly singular A; skip
            };
            let bv: Vec<f64> = (0..n).map(|i| b.get(i, 0)).collect();
            let on_y = solve_row_recovery(&y, &r).unwrap();
            let on_x = solve_row_recovery(&x, &bv).unwrap();
            assert!(
                (on_y.objective - on_x.objective).abs() <= 1e-7 * (1.0 + on_y.objective),
                "objectives differ: {} vs {}",
                on_y.objective,
                on_x.objective
            );
        }
    }

    #[test]
    fn projected_with_empty_basis_matches_plain() {
        let mut rng = Prng::seed_from(0xBA5E);
        let y = gaussian_mat(&mut rng, 3, 5);
        let r: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let plain = solve_row_recovery(&y, &r).unwrap();
        let proj = solve_projected_row_recovery(&y, &r, &[]).unwrap();
        assert_relative_eq!(plain.objective, proj.objective, epsilon = 1e-12);
    }

    #[test]
    fn projected_with_full_basis_is_infeasible() {
        let y = Mat::identity(3);
        let basis: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let mut e = vec![0.0; 3];
                e[i] = 1.0;
                e
            })
            .collect();
        let sol = solve_projected_row_recovery(&y, &[0.3, -0.7, 0.2], &basis).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn projected_matches_explicit_projection() {
        let mut rng = Prng::seed_from(0x9906);
        let y = gaussian_mat(&mut rng, 3, 6);
        let r: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let raw: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let nrm = norm2(&raw);
        let u: Vec<f64> = raw.iter().map(|v| v / nrm).collect();
        let coeff = dot(&u, &r);
        let explicit: Vec<f64> = r.iter().zip(&u).map(|(ri, ui)| ri - coeff * ui).collect();

        let via_op = solve_projected_row_recovery(&y, &r, &[u]).unwrap();
        let via_explicit = solve_row_recovery(&y, &explicit).unwrap();
        assert!((via_op.objective - via_explicit.objective).abs() <= 1e-8 * (1.0 + via_explicit.objective));
        for (a, b) in via_op.w.iter().zip(&via_explicit.w) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }
}

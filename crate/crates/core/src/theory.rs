//! Monte-Carlo and brute-force verifiers for the statistical claims behind
//! the recovery pipelines: sparsity-based uniqueness of the factorization,
//! support containment and 1-sparsity of the LP solutions, row-l1
//! concentration, the dense-beats-sparse breakdown mechanism, and Gaussian
//! order-statistic gaps.
//!
//! Probabilistic assertions always carry 3-standard-error slack on empirical
//! frequencies; a check never asserts a with-high-probability event as
//! certain. The absolute constants these claims hide are exposed as
//! configurable parameters whose defaults are empirical (chosen so the stock
//! seeded runs pass), not normative.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1lp::solve_row_recovery;
use crate::mat::{norm1, norm_inf, numerical_l0, Mat};
use crate::randmodel::{derive_seed, gen_coeffs, CoeffModel, Prng, ValueDist};

/// Outcome of one statistical check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub trials: u64,
    pub violations: u64,
    /// The headline empirical quantity (documented per check).
    pub statistic: f64,
    /// The bound the statistic is compared against.
    pub bound: f64,
    pub pass: bool,
}

pub const CHECK_NAMES: &[&str] = &[
    "uniqueness_sparsity",
    "row_l1_concentration",
    "avg_lower_bound",
    "gap_statistics",
    "p1_support",
    "p2_onesparse",
    "ub_mechanism",
];

/// Run a named check with JSON parameter overrides (missing fields take the
/// documented defaults).
pub fn run_check(name: &str, params_json: Option<&str>) -> Result<CheckReport> {
    let json = params_json.unwrap_or("{}");
    fn parse<T: serde::de::DeserializeOwned>(json: &str) -> Result<T> {
        serde_json::from_str(json).map_err(|e| Error::Config(format!("bad check params: {e}")))
    }
    match name {
        "uniqueness_sparsity" => check_uniqueness_sparsity(&parse(json)?),
        "row_l1_concentration" => check_row_l1_concentration(&parse(json)?),
        "avg_lower_bound" => check_avg_lower_bound(&parse(json)?),
        "gap_statistics" => check_gap_statistics(&parse(json)?),
        "p1_support" => check_p1_support(&parse(json)?),
        "p2_onesparse" => check_p2_onesparse(&parse(json)?),
        "ub_mechanism" => check_ub_mechanism(&parse(json)?),
        other => Err(Error::Config(format!("unknown check `{other}`"))),
    }
}

fn binomial_se(freq: f64, samples: u64) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    (freq * (1.0 - freq) / samples as f64).sqrt()
}

// ---- uniqueness: rows are sparse, nontrivial combinations are not ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct UniquenessParams {
    pub n: usize,
    pub theta: f64,
    pub p: usize,
    pub trials: u64,
    pub seed: u64,
    /// Sample-growth constant: requires `p >= growth_c * n * ln n`.
    pub growth_c: f64,
}

impl Default for UniquenessParams {
    fn default() -> Self {
        UniquenessParams { n: 50, theta: 0.1, p: 2000, trials: 1000, seed: 2, growth_c: 5.0 }
    }
}

/// Every row of a Bernoulli-Gaussian `X` has at most `(10/9) theta p`
/// nonzeros, while every combination of two or more rows has at least
/// `(11/9) theta p`. Statistic: smallest combination support observed.
pub fn check_uniqueness_sparsity(params: &UniquenessParams) -> Result<CheckReport> {
    let &UniquenessParams { n, theta, p, trials, seed, growth_c } = params;
    if n < 3 || !(theta > 1.0 / n as f64 && theta < 0.25) {
        return Err(Error::Guard(format!("needs theta in (1/n, 1/4), got theta={theta}, n={n}")));
    }
    let p_floor = growth_c * n as f64 * (n as f64).ln();
    if (p as f64) < p_floor {
        return Err(Error::Guard(format!(
            "theta p too small: p = {p} below growth floor {p_floor:.0}"
        )));
    }
    let x = gen_coeffs(&CoeffModel::bernoulli(
        n,
        p,
        theta,
        ValueDist::Gaussian,
        derive_seed(seed, &[1]),
    ))?;

    let row_bound = 10.0 / 9.0 * theta * p as f64;
    let combo_bound = 11.0 / 9.0 * theta * p as f64;
    let mut violations = 0u64;
    for i in 0..n {
        if numerical_l0(x.row(i), 1e-9) as f64 > row_bound {
            violations += 1;
        }
    }

    // combination trials run concurrently on per-trial derived streams;
    // aggregation is a count and a min, so order does not matter
    let per_trial: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = Prng::seed_from(derive_seed(seed, &[2, t]));
            // support size uniform in {2, ..., n}; size 1 is the excluded
            // case (a single row is itself sparse)
            let sigma = 2 + rng.uniform_usize(n - 1);
            let mut positions: Vec<usize> = (0..n).collect();
            let mut alpha = vec![0.0; n];
            for t in 0..sigma {
                let u = t + rng.uniform_usize(n - t);
                positions.swap(t, u);
            }
            for &i in &positions[..sigma] {
                alpha[i] = rng.normal();
            }
            let combo = x.tr_matvec(&alpha);
            numerical_l0(&combo, 1e-9)
        })
        .collect();
    let min_combo = per_trial.iter().copied().min().unwrap_or(usize::MAX);
    violations += per_trial
        .iter()
        .filter(|&&l0| (l0 as f64) < combo_bound)
        .count() as u64;
    Ok(CheckReport {
        name: "uniqueness_sparsity".into(),
        trials,
        violations,
        statistic: min_combo as f64,
        bound: combo_bound,
        pass: violations == 0,
    })
}

// ---- maximum row l1 norm concentration ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RowL1Params {
    pub n: usize,
    pub p: usize,
    pub theta: f64,
    pub delta: f64,
    pub dist: ValueDist,
    pub seed: u64,
}

impl Default for RowL1Params {
    fn default() -> Self {
        RowL1Params { n: 50, p: 5000, theta: 0.1, delta: 0.2, dist: ValueDist::Gaussian, seed: 0 }
    }
}

/// The maximum row l1 norm of a generated `X` lies in
/// `[(1-delta) mu theta p, (1+delta) mu theta p]`. Statistic: max row l1.
pub fn check_row_l1_concentration(params: &RowL1Params) -> Result<CheckReport> {
    let &RowL1Params { n, p, theta, delta, dist, seed } = params;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Guard(format!("delta {delta} outside (0, 1)")));
    }
    let x = gen_coeffs(&CoeffModel::bernoulli(n, p, theta, dist, seed))?;
    let max_row_l1 = (0..n).map(|i| norm1(x.row(i))).fold(0.0, f64::max);
    let center = dist.mean_abs() * theta * p as f64;
    let lo = (1.0 - delta) * center;
    let hi = (1.0 + delta) * center;
    let inside = max_row_l1 >= lo && max_row_l1 <= hi;
    Ok(CheckReport {
        name: "row_l1_concentration".into(),
        trials: 1,
        violations: u64::from(!inside),
        statistic: max_row_l1,
        bound: hi,
        pass: inside,
    })
}

// ---- lower bound on E|v^T x| ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AvgLowerBoundParams {
    pub n: usize,
    pub theta: f64,
    /// Direction vector; all-ones of length `n` when omitted.
    pub v: Option<Vec<f64>>,
    pub samples: u64,
    pub dist: ValueDist,
    pub seed: u64,
}

impl Default for AvgLowerBoundParams {
    fn default() -> Self {
        AvgLowerBoundParams {
            n: 16,
            theta: 0.25,
            v: None,
            samples: 100_000,
            dist: ValueDist::Gaussian,
            seed: 4,
        }
    }
}

/// Monte-Carlo estimate of `E|v^T x|` stays above
/// `(mu/4) sqrt(theta/n) ||v||_1` within 3 standard errors.
/// Statistic: the empirical mean.
pub fn check_avg_lower_bound(params: &AvgLowerBoundParams) -> Result<CheckReport> {
    let AvgLowerBoundParams { n, theta, v, samples, dist, seed } = params;
    let (n, theta, samples) = (*n, *theta, *samples);
    if (n as f64) * theta < 2.0 {
        return Err(Error::Guard(format!("needs n theta >= 2, got {}", n as f64 * theta)));
    }
    let ones = vec![1.0; n];
    let v = v.as_deref().unwrap_or(&ones);
    if v.len() != n {
        return Err(Error::Config(format!("v has length {}, expected n = {n}", v.len())));
    }
    let mut rng = Prng::seed_from(*seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let mut acc = 0.0;
        for &vi in v {
            if rng.next_f64() < theta {
                let value = match dist {
                    ValueDist::Gaussian => rng.normal(),
                    ValueDist::Rademacher => rng.rademacher(),
                };
                acc += vi * value;
            }
        }
        let a = acc.abs();
        sum += a;
        sum_sq += a * a;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    let se = (var / samples as f64).sqrt();
    let bound = dist.mean_abs() / 4.0 * (theta / n as f64).sqrt() * norm1(v);
    let pass = mean >= bound - 3.0 * se;
    Ok(CheckReport {
        name: "avg_lower_bound".into(),
        trials: samples,
        violations: u64::from(!pass),
        statistic: mean,
        bound,
        pass,
    })
}

// ---- Gaussian order-statistic gaps ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GapStatsParams {
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub samples: u64,
    pub seed: u64,
}

impl Default for GapStatsParams {
    fn default() -> Self {
        GapStatsParams { d: 100, n: 100, alpha: 0.05, samples: 100_000, seed: 5 }
    }
}

/// Two order-statistic bounds on `|r|` for a Gaussian d-vector, each with
/// 3-SE slack: the top value exceeds `4 sqrt(ln d)` with frequency at most
/// `d^-3`, and the relative gap event `1 - s(2)/s(1) < alpha / ln n` has
/// frequency below 1/2. Statistic: the gap-event frequency.
pub fn check_gap_statistics(params: &GapStatsParams) -> Result<CheckReport> {
    let &GapStatsParams { d, n, alpha, samples, seed } = params;
    if d < 2 || d > n {
        return Err(Error::Guard(format!("needs 2 <= d <= n, got d={d}, n={n}")));
    }
    if alpha < 0.0 {
        return Err(Error::Guard("alpha must be nonnegative".into()));
    }
    let mut rng = Prng::seed_from(seed);
    let top_threshold = 4.0 * (d as f64).ln().sqrt();
    let gap_threshold = alpha / (n as f64).ln();
    let mut top_hits = 0u64;
    let mut gap_hits = 0u64;
    for _ in 0..samples {
        let mut s1 = 0.0_f64;
        let mut s2 = 0.0_f64;
        for _ in 0..d {
            let a = rng.normal().abs();
            if a > s1 {
                s2 = s1;
                s1 = a;
            } else if a > s2 {
                s2 = a;
            }
        }
        if s1 > top_threshold {
            top_hits += 1;
        }
        if 1.0 - s2 / s1 < gap_threshold {
            gap_hits += 1;
        }
    }
    let top_freq = top_hits as f64 / samples as f64;
    let gap_freq = gap_hits as f64 / samples as f64;
    let top_bound = (d as f64).powi(-3);
    let mut violations = 0u64;
    if top_freq > top_bound + 3.0 * binomial_se(top_freq, samples) {
        violations += 1;
    }
    if gap_freq >= 0.5 + 3.0 * binomial_se(gap_freq, samples) {
        violations += 1;
    }
    Ok(CheckReport {
        name: "gap_statistics".into(),
        trials: samples,
        violations,
        statistic: gap_freq,
        bound: 0.5,
        pass: violations == 0,
    })
}

// ---- P1: LP solutions inherit the constraint's support ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct P1Params {
    pub n: usize,
    pub p: usize,
    pub theta: f64,
    pub b_sparsity: usize,
    pub trials: u64,
    pub seed: u64,
    pub zero_tol_rel: f64,
}

impl Default for P1Params {
    fn default() -> Self {
        P1Params {
            n: 30,
            p: 4000,
            theta: 0.1,
            b_sparsity: 1,
            trials: 50,
            seed: 0,
            zero_tol_rel: crate::erspud::ZERO_TOL_REL,
        }
    }
}

/// For sparse constraint vectors `b`, the minimizer of `||z^T X||_1` under
/// `b^T z = 1` is supported inside `supp(b)`. Statistic: worst relative
/// leakage outside the support.
pub fn check_p1_support(params: &P1Params) -> Result<CheckReport> {
    let &P1Params { n, p, theta, b_sparsity, trials, seed, zero_tol_rel } = params;
    if b_sparsity == 0 || b_sparsity as f64 > 1.0 / (8.0 * theta) {
        return Err(Error::Guard(format!(
            "needs 1 <= b_sparsity <= 1/(8 theta) = {:.2}",
            1.0 / (8.0 * theta)
        )));
    }
    if b_sparsity > n {
        return Err(Error::Guard("b_sparsity exceeds n".into()));
    }
    // per-trial derived seeds; trials run concurrently
    let outcomes: Result<Vec<(bool, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = gen_coeffs(&CoeffModel::bernoulli(
                n,
                p,
                theta,
                ValueDist::Gaussian,
                derive_seed(seed, &[t, 1]),
            ))?;
            let mut rng = Prng::seed_from(derive_seed(seed, &[t, 2]));
            let mut positions: Vec<usize> = (0..n).collect();
            for i in 0..b_sparsity {
                let u = i + rng.uniform_usize(n - i);
                positions.swap(i, u);
            }
            let mut b = vec![0.0; n];
            for &i in &positions[..b_sparsity] {
                let mut value = rng.normal();
                while value == 0.0 {
                    value = rng.normal();
                }
                b[i] = value;
            }
            let sol = solve_row_recovery(&x, &b)?;
            if !sol.is_optimal() {
                return Ok((true, f64::INFINITY));
            }
            let z_scale = norm_inf(&sol.w);
            if z_scale == 0.0 {
                return Ok((true, f64::INFINITY));
            }
            let leak = sol
                .w
                .iter()
                .enumerate()
                .filter(|(i, _)| b[*i] == 0.0)
                .map(|(_, z)| z.abs() / z_scale)
                .fold(0.0, f64::max);
            Ok((leak > zero_tol_rel, leak))
        })
        .collect();
    let outcomes = outcomes?;
    let violations = outcomes.iter().filter(|(bad, _)| *bad).count() as u64;
    let worst_leak = outcomes
        .iter()
        .map(|&(_, leak)| leak)
        .filter(|l| l.is_finite())
        .fold(0.0, f64::max);
    Ok(CheckReport {
        name: "p1_support".into(),
        trials,
        violations,
        statistic: worst_leak,
        bound: zero_tol_rel,
        pass: violations == 0,
    })
}

// ---- P2: with a magnitude gap, the restricted solution is 1-sparse ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct P2Params {
    pub n: usize,
    pub p: usize,
    pub theta: f64,
    pub s: usize,
    pub gamma: f64,
    pub trials: u64,
    pub seed: u64,
    pub zero_tol_rel: f64,
}

impl Default for P2Params {
    fn default() -> Self {
        P2Params {
            n: 30,
            p: 4000,
            theta: 0.01,
            s: 4,
            gamma: 0.5,
            trials: 50,
            seed: 1,
            zero_tol_rel: crate::erspud::ZERO_TOL_REL,
        }
    }
}

/// Restricted to `s` random rows, with `|b|_(2)/|b|_(1) <= 1 - gamma`, the
/// solution is 1-sparse at the index of the largest entry of `b`.
/// Statistic: fraction of violating trials.
pub fn check_p2_onesparse(params: &P2Params) -> Result<CheckReport> {
    let &P2Params { n, p, theta, s, gamma, trials, seed, zero_tol_rel } = params;
    if s == 0 || s > n {
        return Err(Error::Guard(format!("needs 1 <= s <= n, got s={s}")));
    }
    if theta * s as f64 >= gamma / 8.0 {
        return Err(Error::Guard(format!(
            "needs theta s < gamma/8: {} !< {}",
            theta * s as f64,
            gamma / 8.0
        )));
    }
    // per-trial derived seeds; trials run concurrently
    let outcomes: Result<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = gen_coeffs(&CoeffModel::bernoulli(
                n,
                p,
                theta,
                ValueDist::Gaussian,
                derive_seed(seed, &[t, 1]),
            ))?;
            let mut rng = Prng::seed_from(derive_seed(seed, &[t, 2]));
            let mut rows: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut rows);
            let restricted: Vec<Vec<f64>> =
                rows[..s].iter().map(|&i| x.row(i).to_vec()).collect();
            let x_j = Mat::from_rows(&restricted)?;

            // b on J with the required magnitude gap: scale up the largest entry
            let mut b: Vec<f64> = (0..s).map(|_| rng.normal()).collect();
            let i_max = (0..s)
                .max_by(|&a, &c| b[a].abs().partial_cmp(&b[c].abs()).unwrap())
                .unwrap();
            let second = (0..s)
                .filter(|&i| i != i_max)
                .map(|i| b[i].abs())
                .fold(0.0, f64::max);
            let needed = second / (1.0 - gamma) * (1.0 + 0.5 * rng.next_f64());
            if b[i_max].abs() < needed {
                b[i_max] = b[i_max].signum() * needed;
            }
            if b[i_max] == 0.0 {
                b[i_max] = 1.0;
            }

            let sol = solve_row_recovery(&x_j, &b)?;
            if !sol.is_optimal() {
                return Ok(true);
            }
            let l0 = numerical_l0(&sol.w, zero_tol_rel);
            let z_argmax = (0..s)
                .max_by(|&a, &c| sol.w[a].abs().partial_cmp(&sol.w[c].abs()).unwrap())
                .unwrap();
            Ok(l0 != 1 || z_argmax != i_max)
        })
        .collect();
    let violations = outcomes?.iter().filter(|&&bad| bad).count() as u64;
    Ok(CheckReport {
        name: "p2_onesparse".into(),
        trials,
        violations,
        statistic: violations as f64 / trials.max(1) as f64,
        bound: 0.0,
        pass: violations == 0,
    })
}

// ---- breakdown mechanism: the dense feasible point wins when theta is large ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct UbMechanismParams {
    pub n: usize,
    pub p: usize,
    pub beta: f64,
    pub seed: u64,
    /// Explicit theta instead of `sqrt(beta ln n / n)` (sanity inversions).
    pub theta_override: Option<f64>,
}

impl Default for UbMechanismParams {
    fn default() -> Self {
        UbMechanismParams { n: 100, p: 3000, beta: 9.0, seed: 8, theta_override: None }
    }
}

/// At `theta = sqrt(beta ln n / n)`, compare the objective of the dense
/// feasible point `v = sign(b)/||b||_1` against every 1-sparse feasible
/// point `e_i / b_i` for each column constraint `b = X e_j`. Statistic:
/// fraction of columns where the dense point strictly wins; passes when the
/// fraction exceeds 1/2. Single-nonzero columns tie and never count as wins.
pub fn check_ub_mechanism(params: &UbMechanismParams) -> Result<CheckReport> {
    let &UbMechanismParams { n, p, beta, seed, theta_override } = params;
    if n < 2 {
        return Err(Error::Guard("needs n >= 2".into()));
    }
    let theta = theta_override.unwrap_or_else(|| (beta * (n as f64).ln() / n as f64).sqrt());
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Guard(format!("theta = {theta:.4} outside (0, 1)")));
    }
    let x = gen_coeffs(&CoeffModel::bernoulli(n, p, theta, ValueDist::Gaussian, seed))?;
    let row_l1: Vec<f64> = (0..n).map(|i| norm1(x.row(i))).collect();

    let mut counted = 0u64;
    let mut dense_wins = 0u64;
    let mut combo = vec![0.0; p];
    for j in 0..p {
        let b = x.col(j);
        let support: Vec<usize> = (0..n).filter(|&i| b[i] != 0.0).collect();
        if support.is_empty() {
            continue;
        }
        counted += 1;
        let b_l1: f64 = support.iter().map(|&i| b[i].abs()).sum();
        combo.iter_mut().for_each(|v| *v = 0.0);
        for &i in &support {
            let sign = b[i].signum();
            for (acc, &v) in combo.iter_mut().zip(x.row(i)) {
                *acc += sign * v;
            }
        }
        let dense_obj = norm1(&combo) / b_l1;
        let sparse_best = support
            .iter()
            .map(|&i| row_l1[i] / b[i].abs())
            .fold(f64::INFINITY, f64::min);
        if dense_obj < sparse_best {
            dense_wins += 1;
        }
    }
    let fraction = dense_wins as f64 / counted.max(1) as f64;
    Ok(CheckReport {
        name: "ub_mechanism".into(),
        trials: counted,
        violations: counted - dense_wins,
        statistic: fraction,
        bound: 0.5,
        pass: fraction > 0.5,
    })
}

// ---- toy-scale sparsest-vector oracle ----

/// Sparsest vector in the row span of `Y` with support at most
/// `max_support`, by enumerating candidate zero sets and computing left
/// nullspaces. Returns the combination weights and the support size.
/// Combinatorial: refuses `n > 5` or `p > 12`.
pub fn bruteforce_sparsest_rowspan(y: &Mat, max_support: usize) -> Result<(Vec<f64>, usize)> {
    let levels = sparsest_rowspan_directions(y, max_support, 1)?;
    levels
        .into_iter()
        .next()
        .map(|(w, _, l0)| (w, l0))
        .ok_or_else(|| Error::Guard(format!("no row-span vector with support <= {max_support}")))
}

/// A sparse row-span vector: combination weights, the normalized direction
/// `w^T Y`, and its support size.
pub type SparseDirection = (Vec<f64>, Vec<f64>, usize);

/// All distinct sparsest directions in the row span of `Y`, ascending in
/// support size, up to `want` of them. Returns `(w, s, l0)` triples with
/// `s = w^T Y` normalized. Toy-scale verification helper.
pub fn sparsest_rowspan_directions(
    y: &Mat,
    max_support: usize,
    want: usize,
) -> Result<Vec<SparseDirection>> {
    let n = y.rows();
    let p = y.cols();
    if n > 5 || p > 12 {
        return Err(Error::Guard(format!(
            "row-span enumeration is combinatorial; refuses n = {n} > 5 or p = {p} > 12"
        )));
    }
    if max_support == 0 || max_support > p {
        return Err(Error::Guard("max_support must be in [1, p]".into()));
    }
    let cols: Vec<Vec<f64>> = (0..p).map(|j| y.col(j)).collect();
    let mut found: Vec<SparseDirection> = Vec::new();

    for m in 1..=max_support {
        let mut support = vec![0usize; m];
        let mut visit = |keep: &[usize]| {
            if found.len() >= want {
                return;
            }
            // zero set = complement of the kept columns
            let zero_rows: Vec<&[f64]> =
                (0..p).filter(|j| !keep.contains(j)).map(|j| cols[j].as_slice()).collect();
            let Some(w) = left_null_vector(&zero_rows, n) else {
                return;
            };
            let s = y.tr_matvec(&w);
            let l0 = numerical_l0(&s, 1e-9);
            if l0 > m {
                return; // numerically failed to vanish on the zero set
            }
            let s_norm = crate::mat::norm2(&s);
            if s_norm == 0.0 {
                return;
            }
            let direction: Vec<f64> = s.iter().map(|v| v / s_norm).collect();
            let duplicate = found.iter().any(|(_, d, _)| {
                crate::mat::dot(d, &direction).abs() > 1.0 - 1e-8
            });
            if !duplicate {
                found.push((w, direction, l0));
            }
        };
        crate::l1lp::visit_subsets(p, m, &mut support, &mut visit);
        if found.len() >= want {
            break;
        }
    }
    found.sort_by_key(|&(_, _, l0)| l0);
    Ok(found)
}

/// Toy instance squarely inside the uniqueness regime: every column has one
/// nonzero, row loads are balanced to within one (so any combination of two
/// or more rows is strictly denser than every single row), supports are a
/// seeded shuffle and values are Gaussian. Used by the toy-scale oracle
/// verification.
pub fn balanced_one_sparse_coeffs(n: usize, p: usize, seed: u64) -> Result<Mat> {
    if n == 0 || p < n {
        return Err(Error::Config(format!("needs p >= n >= 1, got n={n}, p={p}")));
    }
    let mut owners: Vec<usize> = (0..p).map(|j| j % n).collect();
    let mut rng = Prng::seed_from(seed);
    rng.shuffle(&mut owners);
    let mut x = Mat::zeros(n, p);
    for (j, &row) in owners.iter().enumerate() {
        let mut value = rng.normal();
        while value == 0.0 {
            value = rng.normal();
        }
        x.set(row, j, value);
    }
    Ok(x)
}

/// Any nonzero `w` with `w` orthogonal to every row in `rows` (vectors of
/// length `n`), or `None` when they span R^n.
fn left_null_vector(rows: &[&[f64]], n: usize) -> Option<Vec<f64>> {
    let m = rows.len();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        let mut w = vec![0.0; n];
        w[0] = 1.0;
        return Some(w);
    }
    let tol = 1e-10 * scale;
    let mut a: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut rank = 0usize;
    for col in 0..n {
        let mut best = tol;
        let mut best_row = None;
        for r in rank..m {
            let v = a[r][col].abs();
            if v > best {
                best = v;
                best_row = Some(r);
            }
        }
        let Some(prow) = best_row else { continue };
        a.swap(rank, prow);
        let pivot = a[rank][col];
        // eliminate everywhere (Gauss-Jordan)
        for r in 0..m {
            if r == rank {
                continue;
            }
            let factor = a[r][col] / pivot;
            if factor != 0.0 {
                for c in col..n {
                    let sub = factor * a[rank][c];
                    a[r][c] -= sub;
                }
            }
        }
        pivots.push((rank, col));
        rank += 1;
        if rank == m.min(n) {
            break;
        }
    }
    if rank == n {
        return None;
    }
    // first free column, back-substitute against the pivot rows
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let free = (0..n).find(|c| !pivot_cols.contains(c))?;
    let mut w = vec![0.0; n];
    w[free] = 1.0;
    for &(prow, pcol) in &pivots {
        w[pcol] = -a[prow][free] / a[prow][pcol];
    }
    Some(w)
}

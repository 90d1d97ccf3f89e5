//! Candidate-generation pipelines and the greedy selector.
//!
//! First stage: collect potential rows of `X` by solving the l1 row-recovery
//! LP with different constraint vectors — every column of `Y` (`spud_sc`),
//! sums of randomly paired columns (`spud_dc`), iteratively projected
//! constraints (`spud_proj`), or plain elementary vectors (`siv_baseline`,
//! the reference point the column-based constraints improve on).
//!
//! Second stage: `greedy_select` keeps the `n` sparsest linearly independent
//! candidates, and `reconstruct_dict` recovers the dictionary from them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::l1lp::{solve_projected_row_recovery, solve_row_recovery, RowRecoverySolution};
use crate::mat::{matmul, numerical_l0, orthobasis_append, solve_linear, Mat};
use crate::randmodel::Prng;

/// Default relative threshold below which a residual entry counts as zero.
/// LP vertices carry O(1e-12) noise that must not count as support.
pub const ZERO_TOL_REL: f64 = 1e-6;
/// Default rank tolerance for greedy selection and rank checks.
pub const RANK_TOL: f64 = 1e-8;

/// Which constraint vector produced a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateSource {
    /// `r = Y e_j`.
    Column(usize),
    /// `r = Y e_j1 + Y e_j2`.
    ColumnPair(usize, usize),
    /// `r = e_i`.
    Elementary(usize),
    /// Projected constraint from round `round` using column `column`.
    Projected { round: usize, column: usize },
}

/// One candidate row of `X`: the LP weight vector and `s = w^T Y`.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub source: CandidateSource,
}

/// Output of a first-stage pipeline.
#[derive(Clone, Debug, Default)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    /// Constraint choices that produced no candidate (zero columns,
    /// infeasible projections).
    pub skipped: Vec<CandidateSource>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Recovered factorization: `X̂` (n x p), `Â` (n x n), which candidates were
/// kept and the zero threshold they were ranked with.
#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub x_hat: Mat,
    pub a_hat: Mat,
    pub chosen: Vec<usize>,
    pub zero_tol_used: f64,
}

fn solve_batch<F>(y: &Mat, constraints: Vec<(CandidateSource, Vec<f64>)>, fail: F) -> Result<CandidateSet>
where
    F: Fn() -> Error,
{
    // independent solves run concurrently; candidates are assembled in
    // constraint order so the output is schedule independent
    let solved: Vec<(CandidateSource, Result<Option<RowRecoverySolution>>)> = constraints
        .into_par_iter()
        .map(|(source, r)| {
            if r.iter().all(|&v| v == 0.0) {
                return (source, Ok(None));
            }
            (source, solve_row_recovery(y, &r).map(Some))
        })
        .collect();

    let mut set = CandidateSet::default();
    for (source, outcome) in solved {
        match outcome? {
            Some(sol) if sol.is_optimal() => {
                set.candidates.push(Candidate { w: sol.w, s: sol.s, source });
            }
            _ => set.skipped.push(source),
        }
    }
    if set.is_empty() {
        return Err(fail());
    }
    Ok(set)
}

/// Single-column pipeline: one candidate per column `j`, from the LP with
/// `r = Y e_j`. Zero columns are skipped with a record.
pub fn spud_sc(y: &Mat) -> Result<CandidateSet> {
    let constraints = (0..y.cols())
        .map(|j| (CandidateSource::Column(j), y.col(j)))
        .collect();
    solve_batch(y, constraints, || {
        Error::EmptyCandidates("every column of Y is zero".into())
    })
}

/// Double-column pipeline: columns are randomly paired (a uniform perfect
/// matching, deterministic in `pair_seed`; one leftover column is dropped
/// when `p` is odd) and each constraint is the sum of a pair.
pub fn spud_dc(y: &Mat, pair_seed: u64) -> Result<CandidateSet> {
    let p = y.cols();
    if p < 2 {
        return Err(Error::Config(format!("double-column pairing needs p >= 2, got {p}")));
    }
    let mut order: Vec<usize> = (0..p).collect();
    Prng::seed_from(pair_seed).shuffle(&mut order);
    let constraints = (0..p / 2)
        .map(|i| {
            let (a, b) = (order[2 * i], order[2 * i + 1]);
            let r: Vec<f64> = y
                .col(a)
                .iter()
                .zip(y.col(b))
                .map(|(x, y)| x + y)
                .collect();
            (CandidateSource::ColumnPair(a, b), r)
        })
        .collect();
    solve_batch(y, constraints, || {
        Error::EmptyCandidates("every paired column sum is zero".into())
    })
}

/// Elementary-vector baseline: constraints `r = e_i`, `i = 1..n`.
pub fn siv_baseline(y: &Mat) -> Result<CandidateSet> {
    let n = y.rows();
    let constraints = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            (CandidateSource::Elementary(i), e)
        })
        .collect();
    solve_batch(y, constraints, || {
        Error::EmptyCandidates("all elementary constraints infeasible".into())
    })
}

/// Iterative-projections pipeline, first stage only: returns the selected
/// rows (stacked as X̂), the constraint column chosen per round, and the
/// per-round winning candidates.
pub fn spud_proj_rows(
    y: &Mat,
    cols_per_round: usize,
    zero_tol_rel: f64,
) -> Result<(Mat, Vec<usize>)> {
    let n = y.rows();
    let p = y.cols();
    if cols_per_round == 0 || cols_per_round > p {
        return Err(Error::Config(format!(
            "cols_per_round = {cols_per_round} outside [1, p = {p}]"
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(n);

    for round in 0..n {
        // all columns by default; a strided, round-rotated subsample when
        // the LP budget is capped
        let columns: Vec<usize> = if cols_per_round == p {
            (0..p).collect()
        } else {
            (0..cols_per_round).map(|t| (round + t * p / cols_per_round) % p).collect()
        };
        let solved: Vec<(usize, Result<RowRecoverySolution>)> = columns
            .into_par_iter()
            .map(|j| (j, solve_projected_row_recovery(y, &y.col(j), &basis)))
            .collect();

        let mut best: Option<(usize, usize, RowRecoverySolution)> = None; // (l0, column, sol)
        for (j, outcome) in solved {
            let sol = outcome?;
            if !sol.is_optimal() {
                continue;
            }
            let l0 = numerical_l0(&sol.s, zero_tol_rel);
            let better = match &best {
                None => true,
                Some((best_l0, _, _)) => l0 < *best_l0,
            };
            if better {
                best = Some((l0, j, sol));
            }
        }
        let Some((_, column, sol)) = best else {
            return Err(Error::RankDeficient(format!(
                "projection round {round} produced only infeasible solves"
            )));
        };
        match orthobasis_append(&basis, &sol.w, 1e-12) {
            Some(u) => basis.push(u),
            None => {
                return Err(Error::RankDeficient(format!(
                    "round {round} winner lies in the accumulated span"
                )))
            }
        }
        chosen.push(column);
        rows.push(sol.s);
    }
    Ok((Mat::from_rows(&rows)?, chosen))
}

/// Full iterative-projections pipeline: `n` rounds of projected LPs, keeping
/// the candidate of minimal numerical l0 per round, then reconstruction.
pub fn spud_proj(y: &Mat, cols_per_round: usize) -> Result<RecoveryResult> {
    let (x_hat, chosen) = spud_proj_rows(y, cols_per_round, ZERO_TOL_REL)?;
    let a_hat = reconstruct_dict(y, &x_hat)?;
    Ok(RecoveryResult { x_hat, a_hat, chosen, zero_tol_used: ZERO_TOL_REL })
}

/// Indices of the `n` sparsest linearly independent candidates, in
/// acceptance order: ascending numerical l0 (insertion order on ties),
/// keeping a candidate only if it increases numerical rank.
pub fn greedy_select_indices(
    cands: &CandidateSet,
    n: usize,
    zero_tol_rel: f64,
    rank_tol: f64,
) -> Result<Vec<usize>> {
    if cands.is_empty() {
        return Err(Error::EmptyCandidates("greedy selection over empty set".into()));
    }
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by_key(|&i| numerical_l0(&cands.candidates[i].s, zero_tol_rel));

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut picked = Vec::with_capacity(n);
    for &i in &order {
        if picked.len() == n {
            break;
        }
        if let Some(u) = orthobasis_append(&basis, &cands.candidates[i].s, rank_tol) {
            basis.push(u);
            picked.push(i);
        }
    }
    if picked.len() < n {
        return Err(Error::UnderRank { found: picked.len(), needed: n });
    }
    Ok(picked)
}

/// Greedy selection returning the chosen candidate rows stacked as X̂.
pub fn greedy_select(
    cands: &CandidateSet,
    n: usize,
    zero_tol_rel: f64,
    rank_tol: f64,
) -> Result<Mat> {
    let picked = greedy_select_indices(cands, n, zero_tol_rel, rank_tol)?;
    let rows: Vec<Vec<f64>> = picked
        .iter()
        .map(|&i| cands.candidates[i].s.clone())
        .collect();
    Mat::from_rows(&rows)
}

/// Reconstruct the dictionary: `Â = Y Y^T (X̂ Y^T)^{-1}`, computed through
/// the transposed system `(X̂ Y^T)^T Â^T = Y Y^T`.
pub fn reconstruct_dict(y: &Mat, x_hat: &Mat) -> Result<Mat> {
    let n = y.rows();
    if x_hat.rows() != n || x_hat.cols() != y.cols() {
        return Err(Error::Dim(format!(
            "X̂ is {}x{}, expected {}x{}",
            x_hat.rows(),
            x_hat.cols(),
            n,
            y.cols()
        )));
    }
    let gram = y.gram();
    let xyt = matmul(x_hat, &y.transpose())?;
    let a_t = solve_linear(&xyt.transpose(), &gram).map_err(|e| match e {
        Error::Singular { .. } => {
            Error::Reconstruction("X̂ Y^T is numerically singular".into())
        }
        other => other,
    })?;
    Ok(a_t.transpose())
}

/// Precondition: `T = (Y Y^T)^{-1/2}`, `Yp = T Y`, so `Yp Yp^T = I`.
/// Candidate weight vectors found on `Yp` map back to `Y` via `w -> T w`;
/// the `s` vectors need no mapping since `w^T Yp = (T w)^T Y`.
pub fn precondition(y: &Mat) -> Result<(Mat, Mat)> {
    let gram = y.gram();
    let t = crate::mat::inv_sqrt_spd(&gram).map_err(|e| match e {
        Error::NotSpd(msg) => Error::RankDeficient(format!("Y Y^T not SPD: {msg}")),
        other => other,
    })?;
    let yp = matmul(&t, y)?;
    Ok((yp, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l1lp::FEAS_TOL;
    use crate::mat::{dot, norm_inf, rank_with_tol};
    use crate::randmodel::{gen_coeffs, gen_dict, CoeffModel, DictKind, DictModel, Prng, ValueDist};
    use approx::assert_relative_eq;

    fn gaussian_mat(rng: &mut Prng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    fn is_scaled_unit_row(s: &[f64]) -> bool {
        numerical_l0(s, ZERO_TOL_REL) == 1
    }

    #[test]
    fn sc_on_identity_recovers_coordinates() {
        let y = Mat::identity(2);
        let set = spud_sc(&y).unwrap();
        assert_eq!(set.len(), 2);
        for cand in &set.candidates {
            assert!(is_scaled_unit_row(&cand.s));
        }
    }

    #[test]
    fn sc_skips_zero_columns() {
        let y = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let set = spud_sc(&y).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.skipped, vec![CandidateSource::Column(1)]);
    }

    #[test]
    fn sc_errors_on_all_zero() {
        let y = Mat::zeros(2, 3);
        assert!(matches!(spud_sc(&y), Err(Error::EmptyCandidates(_))));
    }

    #[test]
    fn sc_with_identity_coefficients() {
        // X = I: each constraint b = A^-1 Y e_j = e_j, so every candidate is
        // a scaled coordinate row
        let mut rng = Prng::seed_from(0x51C0);
        let a = gaussian_mat(&mut rng, 3, 3);
        let set = spud_sc(&a).unwrap(); // Y = A * I = A
        assert_eq!(set.len(), 3);
        for cand in &set.candidates {
            assert!(is_scaled_unit_row(&cand.s), "candidate not 1-sparse: {:?}", cand.s);
        }
    }

    #[test]
    fn candidates_satisfy_their_constraints() {
        let mut rng = Prng::seed_from(0xCAFE);
        let y = gaussian_mat(&mut rng, 4, 9);
        let set = spud_sc(&y).unwrap();
        for cand in &set.candidates {
            let CandidateSource::Column(j) = cand.source else { panic!() };
            let r = y.col(j);
            assert!((dot(&r, &cand.w) - 1.0).abs() <= FEAS_TOL);
            // s really is w^T Y
            let recomputed = y.tr_matvec(&cand.w);
            let scale = norm_inf(&recomputed).max(1.0);
            for (a, b) in cand.s.iter().zip(&recomputed) {
                assert!((a - b).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn dc_pairs_and_determinism() {
        let mut rng = Prng::seed_from(0xDC0);
        let y = gaussian_mat(&mut rng, 3, 8);
        let set1 = spud_dc(&y, 42).unwrap();
        let set2 = spud_dc(&y, 42).unwrap();
        assert_eq!(set1.len(), 4);
        let pairs1: Vec<_> = set1.candidates.iter().map(|c| c.source).collect();
        let pairs2: Vec<_> = set2.candidates.iter().map(|c| c.source).collect();
        assert_eq!(pairs1, pairs2);

        // even p partitions all columns exactly once
        let mut seen = [false; 8];
        for c in &set1.candidates {
            let CandidateSource::ColumnPair(a, b) = c.source else { panic!() };
            assert!(!seen[a] && !seen[b]);
            seen[a] = true;
            seen[b] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn dc_single_pair_and_odd_leftover() {
        let mut rng = Prng::seed_from(0xDC1);
        let y = gaussian_mat(&mut rng, 2, 2);
        let set = spud_dc(&y, 0).unwrap();
        assert_eq!(set.len(), 1);

        let y = gaussian_mat(&mut rng, 2, 5);
        let set = spud_dc(&y, 7).unwrap();
        assert_eq!(set.len(), 2);

        let narrow = gaussian_mat(&mut rng, 2, 1);
        assert!(matches!(spud_dc(&narrow, 0), Err(Error::Config(_))));
    }

    #[test]
    fn siv_counts_and_identity_case() {
        let mut rng = Prng::seed_from(0x517);
        let y = gaussian_mat(&mut rng, 3, 7);
        let set = siv_baseline(&y).unwrap();
        assert_eq!(set.len(), 3);

        let on_eye = siv_baseline(&Mat::identity(2)).unwrap();
        let from_sc = spud_sc(&Mat::identity(2)).unwrap();
        for (a, b) in on_eye.candidates.iter().zip(&from_sc.candidates) {
            assert_eq!(a.s, b.s);
        }
    }

    #[test]
    fn greedy_orders_by_sparsity() {
        let mk = |s: Vec<f64>| Candidate { w: vec![], s, source: CandidateSource::Elementary(0) };
        let set = CandidateSet {
            candidates: vec![
                mk(vec![1.0, 0.0, 0.0]),
                mk(vec![1.0, 1.0, 0.0]),
                mk(vec![0.0, 0.0, 1.0]),
            ],
            skipped: vec![],
        };
        let x = greedy_select(&set, 3, ZERO_TOL_REL, RANK_TOL).unwrap();
        assert_eq!(x.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(x.row(1), &[0.0, 0.0, 1.0]);
        assert_eq!(x.row(2), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn greedy_rejects_duplicates_and_scales() {
        let mk = |s: Vec<f64>| Candidate { w: vec![], s, source: CandidateSource::Elementary(0) };
        let set = CandidateSet {
            candidates: vec![
                mk(vec![1.0, 0.0]),
                mk(vec![1.0, 0.0]),
                mk(vec![2.0, 0.0]),
                mk(vec![0.0, 3.0]),
            ],
            skipped: vec![],
        };
        let picked = greedy_select_indices(&set, 2, ZERO_TOL_REL, RANK_TOL).unwrap();
        assert_eq!(picked, vec![0, 3]);

        let err = greedy_select(&set, 3, ZERO_TOL_REL, RANK_TOL).unwrap_err();
        match err {
            Error::UnderRank { found, needed } => {
                assert_eq!((found, needed), (2, 3));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn reconstruct_recovers_exact_dictionary() {
        let mut rng = Prng::seed_from(0xAB);
        let a = gaussian_mat(&mut rng, 4, 4);
        let x = gen_coeffs(&CoeffModel::fixed_k(4, 30, 2, ValueDist::Gaussian, 5)).unwrap();
        let y = matmul(&a, &x).unwrap();
        let a_hat = reconstruct_dict(&y, &x).unwrap();
        for (got, want) in a_hat.data().iter().zip(a.data()) {
            assert!((got - want).abs() <= 1e-8 * a.max_abs());
        }
        // residual invariant
        let resid = {
            let ax = matmul(&a_hat, &x).unwrap();
            let mut acc = 0.0;
            for (u, v) in ax.data().iter().zip(y.data()) {
                acc += (u - v) * (u - v);
            }
            acc.sqrt()
        };
        assert!(resid <= 1e-6 * y.frob_norm());

        let eye = Mat::identity(3);
        let back = reconstruct_dict(&eye, &eye).unwrap();
        assert_eq!(back, Mat::identity(3));
    }

    #[test]
    fn reconstruct_covariant_under_permutation_scale() {
        let mut rng = Prng::seed_from(0xAC);
        let n = 4;
        let a = gaussian_mat(&mut rng, n, n);
        let x = gen_coeffs(&CoeffModel::fixed_k(n, 40, 2, ValueDist::Gaussian, 9)).unwrap();
        let y = matmul(&a, &x).unwrap();
        // X̂ = Λ Π X with Π: i -> (i+1) mod n, Λ = diag(1, 2, -1, 0.5)
        let lambda = [1.0, 2.0, -1.0, 0.5];
        let mut xh_rows = Vec::new();
        for i in 0..n {
            let src = (i + 1) % n;
            xh_rows.push(x.row(src).iter().map(|v| lambda[i] * v).collect());
        }
        let x_hat = Mat::from_rows(&xh_rows).unwrap();
        let a_hat = reconstruct_dict(&y, &x_hat).unwrap();
        // Â columns must be columns of A permuted and rescaled by 1/λ
        for i in 0..n {
            let got = a_hat.col(i);
            let want: Vec<f64> = a.col((i + 1) % n).iter().map(|v| v / lambda[i]).collect();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-8 * a.max_abs());
            }
        }
    }

    #[test]
    fn reconstruct_rejects_singular_xyt() {
        let y = Mat::identity(3);
        let x_hat = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            reconstruct_dict(&y, &x_hat),
            Err(Error::Reconstruction(_))
        ));
    }

    #[test]
    fn precondition_identities() {
        // orthonormal rows: Yp = Y, T = I
        let y = Mat::identity(3);
        let (yp, t) = precondition(&y).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(yp.get(i, j), e, epsilon = 1e-10);
                assert_relative_eq!(t.get(i, j), e, epsilon = 1e-10);
            }
        }
        let d = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let (yp, _) = precondition(&d).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(yp.get(i, j), e, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn precondition_whitens_random_full_rank() {
        let mut rng = Prng::seed_from(0xFACE);
        let y = gaussian_mat(&mut rng, 4, 20);
        let (yp, _) = precondition(&y).unwrap();
        let gram = yp.gram();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram.get(i, j) - e).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn precondition_rank_deficient_fails() {
        let y = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        assert!(matches!(precondition(&y), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn proj_on_identity_recovers_permutation_scale() {
        let res = spud_proj(&Mat::identity(3), 3).unwrap();
        assert_eq!(rank_with_tol(&res.x_hat, RANK_TOL), 3);
        for i in 0..3 {
            assert!(is_scaled_unit_row(res.x_hat.row(i)));
        }
    }

    #[test]
    fn proj_first_round_matches_best_sc_candidate() {
        let mut rng = Prng::seed_from(0x960);
        let a = gaussian_mat(&mut rng, 4, 4);
        let x = gen_coeffs(&CoeffModel::fixed_k(4, 24, 2, ValueDist::Gaussian, 21)).unwrap();
        let y = matmul(&a, &x).unwrap();

        let sc = spud_sc(&y).unwrap();
        let best_sc = sc
            .candidates
            .iter()
            .map(|c| numerical_l0(&c.s, ZERO_TOL_REL))
            .min()
            .unwrap();
        let (x_hat, _) = spud_proj_rows(&y, y.cols(), ZERO_TOL_REL).unwrap();
        assert_eq!(numerical_l0(x_hat.row(0), ZERO_TOL_REL), best_sc);
    }

    #[test]
    fn exact_recovery_regime_candidates_contain_all_rows() {
        // n = 16, p = ceil(5 n ln n), k = 2, gaussian dictionary: the
        // single-column pipeline should surface every true row up to scale
        let n = 16usize;
        let p = (5.0 * n as f64 * (n as f64).ln()).ceil() as usize;
        let a = gen_dict(&DictModel { n, kind: DictKind::GaussianIid, seed: 1601 }).unwrap();
        let x = gen_coeffs(&CoeffModel::fixed_k(n, p, 2, ValueDist::Gaussian, 1602)).unwrap();
        let y = matmul(&a, &x).unwrap();
        let (yp, _) = precondition(&y).unwrap();
        let set = spud_sc(&yp).unwrap();
        let hits = crate::metrics::rows_recovered(&set, &x, 1e-6).unwrap();
        assert_eq!(hits, n, "only {hits} of {n} true rows recovered");
    }
}

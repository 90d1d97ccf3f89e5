//! Recovery quality metrics.
//!
//! The headline metric is the permutation-scale relative error
//! `min over (Π, Λ) of ||Â Λ Π - A||_F / ||A||_F`. Because the squared
//! Frobenius norm separates over columns and the optimal per-pair scale has
//! the closed form `λ = <â, a> / ||â||²`, the joint minimum reduces to an
//! exact minimum-cost assignment over per-pair costs, solved by the
//! Hungarian algorithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::erspud::CandidateSet;
use crate::mat::{dot, norm2, Mat};

/// Result of matching a recovered dictionary against the reference.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchReport {
    /// `assignment[i] = j`: column `i` of `Â` is paired with column `j` of `A`.
    pub assignment: Vec<usize>,
    /// Optimal scale for each pair, indexed like `assignment`.
    pub scales: Vec<f64>,
    /// `min ||Â Λ Π - A||_F / ||A||_F`.
    pub rel_error: f64,
    /// Squared per-pair residuals, indexed like `assignment`.
    pub per_pair_cost: Vec<f64>,
}

/// Permutation-scale relative error between `a_hat` and `a`.
///
/// Zero columns of `a_hat` cost the full `||a_j||²` instead of erroring, so
/// failed recoveries still produce a comparable score (an all-zero `a_hat`
/// scores exactly 1).
pub fn rel_error(a_hat: &Mat, a: &Mat) -> Result<MatchReport> {
    let n = a.rows();
    if a.cols() != n || a_hat.rows() != n || a_hat.cols() != n {
        return Err(Error::Dim(format!(
            "rel_error needs matching square inputs, got {}x{} vs {}x{}",
            a_hat.rows(),
            a_hat.cols(),
            a.rows(),
            a.cols()
        )));
    }
    let a_norm = a.frob_norm();
    if a_norm == 0.0 {
        return Err(Error::Config("reference dictionary is identically zero".into()));
    }

    let hat_cols: Vec<Vec<f64>> = (0..n).map(|i| a_hat.col(i)).collect();
    let ref_cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let hat_sq: Vec<f64> = hat_cols.iter().map(|c| dot(c, c)).collect();
    let ref_sq: Vec<f64> = ref_cols.iter().map(|c| dot(c, c)).collect();

    // pair cost min over lambda of ||lambda â_i - a_j||² with the closed-form
    // scale, evaluated as an explicit residual: the algebraically equal
    // ||a_j||² - <â_i,a_j>²/||â_i||² cancels catastrophically near zero
    let mut cost = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let c = if hat_sq[i] == 0.0 {
                ref_sq[j]
            } else {
                let lambda = dot(&hat_cols[i], &ref_cols[j]) / hat_sq[i];
                hat_cols[i]
                    .iter()
                    .zip(&ref_cols[j])
                    .map(|(h, r)| {
                        let d = lambda * h - r;
                        d * d
                    })
                    .sum()
            };
            cost.set(i, j, c);
        }
    }

    let (assignment, total) = hungarian(&cost)?;
    let mut scales = Vec::with_capacity(n);
    let mut per_pair_cost = Vec::with_capacity(n);
    for i in 0..n {
        let j = assignment[i];
        per_pair_cost.push(cost.get(i, j));
        scales.push(if hat_sq[i] == 0.0 {
            0.0
        } else {
            dot(&hat_cols[i], &ref_cols[j]) / hat_sq[i]
        });
    }
    Ok(MatchReport {
        assignment,
        scales,
        rel_error: total.max(0.0).sqrt() / a_norm,
        per_pair_cost,
    })
}

/// Exact minimum-cost perfect assignment on a square cost matrix, by
/// shortest augmenting paths with potentials (O(n^3)).
/// Returns `(assignment, total)` with `assignment[row] = column`.
pub fn hungarian(cost: &Mat) -> Result<(Vec<usize>, f64)> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::Dim(format!("assignment needs a square matrix, got {}x{}", n, cost.cols())));
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite("assignment costs must be finite".into()));
    }
    if n == 0 {
        return Ok((vec![], 0.0));
    }

    let mut row_pot = vec![0.0; n];
    let mut col_pot = vec![0.0; n + 1];
    // owner[j] = row currently assigned to column j; column n is the staging slot
    let mut owner: Vec<Option<usize>> = vec![None; n + 1];

    for row in 0..n {
        owner[n] = Some(row);
        let mut j_cur = n;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev = vec![n; n + 1];
        let mut in_tree = vec![false; n + 1];

        while let Some(r) = owner[j_cur] {
            in_tree[j_cur] = true;
            let mut delta = f64::INFINITY;
            let mut j_next = n;
            for j in 0..n {
                if in_tree[j] {
                    continue;
                }
                let reduced = cost.get(r, j) - row_pot[r] - col_pot[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    prev[j] = j_cur;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j_next = j;
                }
            }
            for j in 0..=n {
                if in_tree[j] {
                    if let Some(rj) = owner[j] {
                        row_pot[rj] += delta;
                    }
                    col_pot[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j_cur = j_next;
        }
        while j_cur != n {
            let pj = prev[j_cur];
            owner[j_cur] = owner[pj];
            j_cur = pj;
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 0..n {
        if let Some(r) = owner[j] {
            assignment[r] = j;
        }
    }
    let total = (0..n).map(|i| cost.get(i, assignment[i])).sum();
    Ok((assignment, total))
}

/// Number of rows of `x_true` matched by some candidate up to scale:
/// row `i` counts when `min over λ of ||λ s - x_i||` is within `tol ||x_i||`
/// for at least one candidate `s`. Zero rows of `x_true` are skipped.
pub fn rows_recovered(cands: &CandidateSet, x_true: &Mat, tol: f64) -> Result<usize> {
    if tol <= 0.0 {
        return Err(Error::Config("rows_recovered needs tol > 0".into()));
    }
    let mut count = 0;
    for i in 0..x_true.rows() {
        let truth = x_true.row(i);
        let t_norm = norm2(truth);
        if t_norm == 0.0 {
            continue; // degenerate row, nothing to match
        }
        let hit = cands.candidates.iter().any(|cand| {
            let s_sq = dot(&cand.s, &cand.s);
            let dist_sq: f64 = if s_sq == 0.0 {
                t_norm * t_norm
            } else {
                let lambda = dot(&cand.s, truth) / s_sq;
                cand.s
                    .iter()
                    .zip(truth)
                    .map(|(s, x)| {
                        let d = lambda * s - x;
                        d * d
                    })
                    .sum()
            };
            dist_sq.sqrt() <= tol * t_norm
        });
        if hit {
            count += 1;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erspud::{Candidate, CandidateSource};
    use crate::randmodel::Prng;
    use approx::assert_relative_eq;

    fn gaussian_mat(rng: &mut Prng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    /// Reference: exact minimum over all permutations with closed-form scales.
    fn brute_force_rel_error(a_hat: &Mat, a: &Mat) -> f64 {
        let n = a.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let mut total = 0.0;
            for i in 0..n {
                let hat = a_hat.col(i);
                let refc = a.col(p[i]);
                let hs = dot(&hat, &hat);
                let c: f64 = if hs == 0.0 {
                    dot(&refc, &refc)
                } else {
                    let lambda = dot(&hat, &refc) / hs;
                    hat.iter()
                        .zip(&refc)
                        .map(|(h, r)| {
                            let d = lambda * h - r;
                            d * d
                        })
                        .sum()
                };
                total += c;
            }
            if total < best {
                best = total;
            }
        });
        best.sqrt() / a.frob_norm()
    }

    fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == perm.len() {
            visit(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute(perm, k + 1, visit);
            perm.swap(k, i);
        }
    }

    #[test]
    fn identical_dictionaries_score_zero() {
        let mut rng = Prng::seed_from(1);
        let a = gaussian_mat(&mut rng, 4, 4);
        let report = rel_error(&a, &a).unwrap();
        assert!(report.rel_error < 1e-14);
        assert_eq!(report.assignment, vec![0, 1, 2, 3]);
    }

    #[test]
    fn permutation_and_scale_removed() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        // columns swapped and scaled by (2, -3)
        let hat = Mat::from_rows(&[vec![0.0, 2.0], vec![-3.0, 0.0]]).unwrap();
        let report = rel_error(&hat, &a).unwrap();
        assert!(report.rel_error < 1e-14);
        assert_eq!(report.assignment, vec![1, 0]);
        assert_relative_eq!(report.scales[0], -1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(report.scales[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn hand_computed_mismatch() {
        let hat = Mat::identity(2);
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.1, 1.0]]).unwrap();
        let report = rel_error(&hat, &a).unwrap();
        assert_relative_eq!(report.rel_error, (0.01f64).sqrt() / (2.01f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn all_zero_recovery_scores_one() {
        let mut rng = Prng::seed_from(2);
        let a = gaussian_mat(&mut rng, 3, 3);
        let report = rel_error(&Mat::zeros(3, 3), &a).unwrap();
        assert_relative_eq!(report.rel_error, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_permutation_scale_scores_zero() {
        let mut rng = Prng::seed_from(3);
        for _ in 0..20 {
            let n = 2 + rng.uniform_usize(5);
            let a = gaussian_mat(&mut rng, n, n);
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let mut hat = Mat::zeros(n, n);
            for j in 0..n {
                let mut lambda = 0.0_f64;
                while lambda.abs() < 0.1 {
                    lambda = 2.0 * rng.normal();
                }
                for i in 0..n {
                    hat.set(i, j, lambda * a.get(i, perm[j]));
                }
            }
            let report = rel_error(&hat, &a).unwrap();
            assert!(report.rel_error < 1e-10, "rel_error {}", report.rel_error);
        }
    }

    #[test]
    fn invariant_under_simultaneous_permutation() {
        let mut rng = Prng::seed_from(4);
        let a = gaussian_mat(&mut rng, 5, 5);
        let hat = gaussian_mat(&mut rng, 5, 5);
        let base = rel_error(&hat, &a).unwrap().rel_error;
        let mut perm: Vec<usize> = (0..5).collect();
        rng.shuffle(&mut perm);
        let permute_cols = |m: &Mat| {
            let mut out = Mat::zeros(5, 5);
            for j in 0..5 {
                for i in 0..5 {
                    out.set(i, j, m.get(i, perm[j]));
                }
            }
            out
        };
        let again = rel_error(&permute_cols(&hat), &permute_cols(&a)).unwrap().rel_error;
        assert_relative_eq!(base, again, epsilon = 1e-12);
    }

    #[test]
    fn hungarian_examples() {
        let c = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (asg, total) = hungarian(&c).unwrap();
        assert_eq!(asg, vec![0, 1]);
        assert_eq!(total, 0.0);

        let c = Mat::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let (asg, total) = hungarian(&c).unwrap();
        assert_eq!(asg, vec![1, 0]);
        assert_eq!(total, 3.0);
    }

    #[test]
    fn hungarian_matches_brute_force_and_beats_random() {
        let mut rng = Prng::seed_from(5);
        for _ in 0..10 {
            let c = {
                let mut m = gaussian_mat(&mut rng, 6, 6);
                for v in 0..36 {
                    let (i, j) = (v / 6, v % 6);
                    m.set(i, j, m.get(i, j).abs());
                }
                m
            };
            let (asg, total) = hungarian(&c).unwrap();
            // assignment is a bijection
            let mut seen = [false; 6];
            for &j in &asg {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..6).collect();
            permute(&mut perm, 0, &mut |p| {
                let t: f64 = (0..6).map(|i| c.get(i, p[i])).sum();
                if t < best {
                    best = t;
                }
            });
            assert_relative_eq!(total, best, epsilon = 1e-10);
            // and never beaten by sampled permutations
            for _ in 0..50 {
                let mut p: Vec<usize> = (0..6).collect();
                rng.shuffle(&mut p);
                let t: f64 = (0..6).map(|i| c.get(i, p[i])).sum();
                assert!(total <= t + 1e-12);
            }
        }
    }

    #[test]
    fn rel_error_matches_brute_force_small() {
        let mut rng = Prng::seed_from(6);
        for _ in 0..20 {
            let n = 2 + rng.uniform_usize(4);
            let a = gaussian_mat(&mut rng, n, n);
            let hat = gaussian_mat(&mut rng, n, n);
            let fast = rel_error(&hat, &a).unwrap().rel_error;
            let slow = brute_force_rel_error(&hat, &a);
            assert_relative_eq!(fast, slow, epsilon = 1e-10);
        }
    }

    fn candidate_set_from_rows(m: &Mat, scale: f64) -> CandidateSet {
        CandidateSet {
            candidates: (0..m.rows())
                .map(|i| Candidate {
                    w: vec![],
                    s: m.row(i).iter().map(|v| scale * v).collect(),
                    source: CandidateSource::Column(i),
                })
                .collect(),
            skipped: vec![],
        }
    }

    #[test]
    fn rows_recovered_examples() {
        let mut rng = Prng::seed_from(7);
        let x = gaussian_mat(&mut rng, 4, 9);
        let exact = candidate_set_from_rows(&x, 1.0);
        assert_eq!(rows_recovered(&exact, &x, 1e-8).unwrap(), 4);
        let scaled = candidate_set_from_rows(&x, 7.0);
        assert_eq!(rows_recovered(&scaled, &x, 1e-8).unwrap(), 4);
        let empty = CandidateSet::default();
        assert_eq!(rows_recovered(&empty, &x, 1e-8).unwrap(), 0);
        assert!(rows_recovered(&empty, &x, 0.0).is_err());
    }
}

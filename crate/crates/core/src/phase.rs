//! Phase-transition experiment harness.
//!
//! Sweeps a grid of basis sizes `n` and per-column support sizes `k`,
//! running seeded recovery trials with `p = ceil(m n ln n)` samples per
//! instance, and writes `grid.csv`, `summary.csv`, `phase.pgm` and
//! `meta.json` into the output directory. Identical configs produce
//! byte-identical data files regardless of thread count; `meta.json` carries
//! the wall time and is the only output excluded from that contract.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::erspud::{
    greedy_select, precondition, reconstruct_dict, spud_dc, spud_proj_rows, spud_sc,
    siv_baseline, RANK_TOL, ZERO_TOL_REL,
};
use crate::error::{Error, Result};
use crate::mat::{matmul, rank_with_tol, Mat};
use crate::metrics::rel_error;
use crate::randmodel::{derive_seed, gen_coeffs, gen_dict, CoeffModel, DictKind, DictModel, ValueDist};

/// Which candidate pipeline drives a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sc,
    Dc,
    Proj,
    Siv,
}

/// Grid sweep configuration; JSON field names match exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Sample-count multiplier: `p = ceil(p_rule * n * ln n)`.
    #[serde(default = "default_p_rule")]
    pub p_rule: f64,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub dict_kind: DictKind,
    #[serde(default = "default_true")]
    pub precondition: bool,
    pub master_seed: u64,
    #[serde(default = "default_success_threshold")]
    pub success_threshold: f64,
    /// Distribution of the nonzero coefficient values.
    #[serde(default)]
    pub dist: ValueDist,
    /// LP budget cap for the projection pipeline; all columns when omitted.
    #[serde(default)]
    pub proj_cols_per_round: Option<usize>,
    pub output_dir: PathBuf,
}

fn default_trials() -> usize {
    10
}
fn default_p_rule() -> f64 {
    5.0
}
fn default_true() -> bool {
    true
}
fn default_success_threshold() -> f64 {
    1e-4
}

impl PhaseConfig {
    fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.k_values.is_empty() {
            return Err(Error::Config("n_values and k_values must be nonempty".into()));
        }
        if self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::Config("all n values must be >= 2".into()));
        }
        let n_min = *self.n_values.iter().min().expect("nonempty");
        if self.k_values.iter().any(|&k| k < 1 || k > n_min) {
            return Err(Error::Config(format!(
                "all k values must lie in [1, min(n) = {n_min}]"
            )));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.p_rule <= 0.0 || !self.p_rule.is_finite() {
            return Err(Error::Config("p_rule must be positive".into()));
        }
        Ok(())
    }
}

/// One grid cell: per-trial relative errors plus summary statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseCell {
    pub n: usize,
    pub k: usize,
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub success_rate: f64,
}

/// Sample count for a basis size under the `p = ceil(m n ln n)` rule.
pub fn samples_for(n: usize, p_rule: f64) -> usize {
    (p_rule * n as f64 * (n as f64).ln()).ceil() as usize
}

/// Everything needed to run one recovery trial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub dict_kind: DictKind,
    #[serde(default)]
    pub dist: ValueDist,
    #[serde(default = "default_true")]
    pub precondition: bool,
    #[serde(default)]
    pub proj_cols_per_round: Option<usize>,
}

const TAG_DICT: u64 = 0xD1C7;
const TAG_COEFF: u64 = 0xC0EF;
const TAG_PAIR: u64 = 0x9A12;

/// A pipeline failure scores the relative error of the all-zero dictionary,
/// which is exactly 1; anything else propagates.
fn failure_score(err: Error) -> Result<f64> {
    match err {
        Error::EmptyCandidates(_)
        | Error::UnderRank { .. }
        | Error::Reconstruction(_)
        | Error::RankDeficient(_)
        | Error::Singular { .. }
        | Error::NotSpd(_)
        | Error::IterationLimit(_)
        | Error::LpNumerical(_) => Ok(1.0),
        other => Err(other),
    }
}

/// Run one seeded trial: generate `A` and a full-rank `X` (rejection
/// resampling, at most 10 draws), form `Y = A X`, run the chosen pipeline,
/// and score `rel_error(Â, A)`. Pipeline failures score 1.0.
pub fn run_trial(cfg: &TrialConfig, trial_seed: u64) -> Result<f64> {
    run_trial_detailed(cfg, trial_seed).map(|report| report.rel_error)
}

/// Like [`run_trial`] but returns the full match report. A failed pipeline
/// reports the all-zero dictionary, whose relative error is exactly 1.
pub fn run_trial_detailed(cfg: &TrialConfig, trial_seed: u64) -> Result<crate::metrics::MatchReport> {
    let a = gen_dict(&DictModel {
        n: cfg.n,
        kind: cfg.dict_kind,
        seed: derive_seed(trial_seed, &[TAG_DICT]),
    })?;
    let mut x = None;
    for attempt in 0..10u64 {
        let candidate = gen_coeffs(&CoeffModel::fixed_k(
            cfg.n,
            cfg.p,
            cfg.k,
            cfg.dist,
            derive_seed(trial_seed, &[TAG_COEFF, attempt]),
        ))?;
        if rank_with_tol(&candidate, RANK_TOL) == cfg.n {
            x = Some(candidate);
            break;
        }
    }
    let Some(x) = x else {
        return Err(Error::DataGeneration(format!(
            "10 consecutive rank-deficient coefficient draws at n={}, k={}, p={}",
            cfg.n, cfg.k, cfg.p
        )));
    };
    let y = matmul(&a, &x)?;

    match recover(cfg, &y, trial_seed) {
        Ok(a_hat) => rel_error(&a_hat, &a),
        Err(err) => {
            failure_score(err)?;
            rel_error(&Mat::zeros(cfg.n, cfg.n), &a)
        }
    }
}

fn recover(cfg: &TrialConfig, y: &Mat, trial_seed: u64) -> Result<Mat> {
    let work = if cfg.precondition {
        precondition(y)?.0
    } else {
        y.clone()
    };
    let x_hat = match cfg.algorithm {
        Algorithm::Sc => greedy_select(&spud_sc(&work)?, cfg.n, ZERO_TOL_REL, RANK_TOL)?,
        Algorithm::Dc => {
            let pair_seed = derive_seed(trial_seed, &[TAG_PAIR]);
            greedy_select(&spud_dc(&work, pair_seed)?, cfg.n, ZERO_TOL_REL, RANK_TOL)?
        }
        Algorithm::Siv => greedy_select(&siv_baseline(&work)?, cfg.n, ZERO_TOL_REL, RANK_TOL)?,
        Algorithm::Proj => {
            let cols = cfg.proj_cols_per_round.unwrap_or(work.cols());
            spud_proj_rows(&work, cols, ZERO_TOL_REL)?.0
        }
    };
    // reconstruct against the original Y: the candidate rows live in its row
    // space whether or not the pipeline ran preconditioned
    reconstruct_dict(y, &x_hat)
}

/// Run the full Cartesian grid and write all outputs. The returned cells
/// (and the data files) are identical regardless of thread count.
pub fn run_grid(cfg: &PhaseConfig) -> Result<Vec<PhaseCell>> {
    cfg.validate()?;
    let started = Instant::now();

    let mut jobs: Vec<(usize, usize, u64)> = Vec::new(); // (n, k, trial_seed)
    for &n in &cfg.n_values {
        for &k in &cfg.k_values {
            for trial in 0..cfg.trials {
                let seed = derive_seed(cfg.master_seed, &[n as u64, k as u64, trial as u64]);
                jobs.push((n, k, seed));
            }
        }
    }
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(n, k, seed)| {
            let trial_cfg = TrialConfig {
                n,
                k,
                p: samples_for(n, cfg.p_rule),
                algorithm: cfg.algorithm,
                dict_kind: cfg.dict_kind,
                dist: cfg.dist,
                precondition: cfg.precondition,
                proj_cols_per_round: cfg.proj_cols_per_round,
            };
            run_trial(&trial_cfg, seed)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut cells = Vec::with_capacity(cfg.n_values.len() * cfg.k_values.len());
    let mut cursor = 0;
    for &n in &cfg.n_values {
        for &k in &cfg.k_values {
            let errors: Vec<f64> = results[cursor..cursor + cfg.trials].to_vec();
            cursor += cfg.trials;
            let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
            let success_rate = errors
                .iter()
                .filter(|&&e| e < cfg.success_threshold)
                .count() as f64
                / errors.len() as f64;
            cells.push(PhaseCell { n, k, errors, mean_error, success_rate });
        }
    }

    write_outputs(cfg, &cells, started.elapsed().as_millis())?;
    Ok(cells)
}

/// C-style `%.10e` (two-or-more exponent digits with sign).
fn fmt_e10(x: f64) -> String {
    let s = format!("{x:.10e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

fn write_outputs(cfg: &PhaseConfig, cells: &[PhaseCell], wall_ms: u128) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(Error::io(cfg.output_dir.display().to_string()))?;

    let mut grid = String::from("n,k,trial,rel_error\n");
    for cell in cells {
        for (trial, err) in cell.errors.iter().enumerate() {
            grid.push_str(&format!("{},{},{},{}\n", cell.n, cell.k, trial, fmt_e10(*err)));
        }
    }
    write_file(&cfg.output_dir.join("grid.csv"), &grid)?;

    let mut summary = String::from("n,k,mean_error,success_rate\n");
    for cell in cells {
        summary.push_str(&format!(
            "{},{},{},{}\n",
            cell.n,
            cell.k,
            fmt_e10(cell.mean_error),
            fmt_e10(cell.success_rate)
        ));
    }
    write_file(&cfg.output_dir.join("summary.csv"), &summary)?;

    emit_pgm(cells, &cfg.output_dir.join("phase.pgm"))?;

    #[derive(Serialize)]
    struct Meta<'a> {
        config: &'a PhaseConfig,
        toolkit_version: &'static str,
        wall_time_ms: u128,
    }
    let meta = serde_json::to_string_pretty(&Meta {
        config: cfg,
        toolkit_version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: wall_ms,
    })
    .expect("config serializes");
    write_file(&cfg.output_dir.join("meta.json"), &(meta + "\n"))?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(Error::io(path.display().to_string()))
}

/// Render mean errors as an ASCII PGM (P2, 256 levels): pixel value is
/// `round(255 * min(mean_error, 1))`, `n` increases left to right and `k`
/// bottom to top.
pub fn emit_pgm(cells: &[PhaseCell], path: &Path) -> Result<()> {
    let mut ns: Vec<usize> = cells.iter().map(|c| c.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut ks: Vec<usize> = cells.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    if cells.len() != ns.len() * ks.len() {
        return Err(Error::Config(format!(
            "ragged grid: {} cells cannot tile {} x {}",
            cells.len(),
            ns.len(),
            ks.len()
        )));
    }
    let mut values = vec![vec![None; ns.len()]; ks.len()];
    for cell in cells {
        let col = ns.binary_search(&cell.n).expect("n present");
        let row = ks.binary_search(&cell.k).expect("k present");
        if values[row][col].replace(cell.mean_error).is_some() {
            return Err(Error::Config(format!("duplicate cell (n={}, k={})", cell.n, cell.k)));
        }
    }
    let mut out = format!("P2\n{} {}\n255\n", ns.len(), ks.len());
    for row in (0..ks.len()).rev() {
        let pixels: Vec<String> = (0..ns.len())
            .map(|col| {
                let v = values[row][col].expect("tiled grid");
                let level = (255.0 * v.clamp(0.0, 1.0) + 0.5).floor() as u32;
                level.min(255).to_string()
            })
            .collect();
        out.push_str(&pixels.join(" "));
        out.push('\n');
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(n: usize, k: usize, mean: f64) -> PhaseCell {
        PhaseCell { n, k, errors: vec![mean], mean_error: mean, success_rate: 0.0 }
    }

    #[test]
    fn e10_formatting_matches_c_style() {
        assert_eq!(fmt_e10(0.0), "0.0000000000e+00");
        assert_eq!(fmt_e10(1.0), "1.0000000000e+00");
        assert_eq!(fmt_e10(-2.5e-7), "-2.5000000000e-07");
        assert_eq!(fmt_e10(3.25e12), "3.2500000000e+12");
    }

    #[test]
    fn samples_rule_uses_natural_log() {
        assert_eq!(samples_for(20, 5.0), 300); // 5 * 20 * ln 20 = 299.57...
        assert_eq!(samples_for(8, 5.0), 84); // 5 * 8 * ln 8 = 83.18...
    }

    #[test]
    fn pgm_levels_and_orientation() {
        let dir = std::env::temp_dir().join(format!("erspud-pgm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.pgm");

        emit_pgm(&[cell(2, 1, 0.0), cell(3, 1, 1.0)], &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert_eq!(body, "P2\n2 1\n255\n0 255\n");

        // k grows bottom-to-top: the k=2 row is printed first
        emit_pgm(
            &[cell(2, 1, 0.5), cell(2, 2, 2.0)],
            &path,
        )
        .unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert_eq!(body, "P2\n1 2\n255\n255\n128\n");

        let ragged = vec![cell(2, 1, 0.0), cell(3, 1, 0.0), cell(3, 2, 0.0)];
        assert!(emit_pgm(&ragged, &path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn failure_mapping_scores_one() {
        assert_eq!(
            failure_score(Error::UnderRank { found: 1, needed: 3 }).unwrap(),
            1.0
        );
        assert_eq!(
            failure_score(Error::EmptyCandidates("x".into())).unwrap(),
            1.0
        );
        assert!(failure_score(Error::Config("bad".into())).is_err());
    }

    // Success region at n = 2 means k = 1: with k = n the coefficient matrix
    // is fully dense, a dense row is never a vertex of the recovery LP, and
    // the pipeline cannot return it.
    #[test]
    fn tiny_dc_trial_recovers() {
        let cfg = TrialConfig {
            n: 2,
            k: 1,
            p: 20,
            algorithm: Algorithm::Dc,
            dict_kind: DictKind::GaussianIid,
            dist: ValueDist::Gaussian,
            precondition: true,
            proj_cols_per_round: None,
        };
        let err = run_trial(&cfg, derive_seed(2024, &[0])).unwrap();
        assert!(err < 1e-6, "rel_error = {err}");
    }

    #[test]
    fn dense_k_trial_fails_structurally() {
        let cfg = TrialConfig {
            n: 2,
            k: 2,
            p: 20,
            algorithm: Algorithm::Dc,
            dict_kind: DictKind::GaussianIid,
            dist: ValueDist::Gaussian,
            precondition: true,
            proj_cols_per_round: None,
        };
        let err = run_trial(&cfg, derive_seed(2024, &[1])).unwrap();
        assert!(err > 1e-6, "dense coefficients should not be recoverable, got {err}");
    }

    #[test]
    fn grid_single_cell_shape() {
        let dir = std::env::temp_dir().join(format!("erspud-grid-{}", std::process::id()));
        let cfg = PhaseConfig {
            n_values: vec![4],
            k_values: vec![1],
            trials: 1,
            p_rule: 5.0,
            algorithm: Algorithm::Dc,
            dict_kind: DictKind::GaussianIid,
            precondition: true,
            master_seed: 11,
            success_threshold: 1e-4,
            dist: ValueDist::Gaussian,
            proj_cols_per_round: None,
            output_dir: dir.clone(),
        };
        let cells = run_grid(&cfg).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].errors.len(), 1);
        assert!(cells[0].errors[0].is_finite() && cells[0].errors[0] >= 0.0);
        for name in ["grid.csv", "summary.csv", "phase.pgm", "meta.json"] {
            assert!(dir.join(name).exists(), "{name} missing");
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn config_validation() {
        let dir = std::env::temp_dir();
        let base = PhaseConfig {
            n_values: vec![4],
            k_values: vec![1],
            trials: 1,
            p_rule: 5.0,
            algorithm: Algorithm::Sc,
            dict_kind: DictKind::GaussianIid,
            precondition: false,
            master_seed: 0,
            success_threshold: 1e-4,
            dist: ValueDist::Gaussian,
            proj_cols_per_round: None,
            output_dir: dir,
        };
        let mut bad = base.clone();
        bad.n_values = vec![1];
        assert!(run_grid(&bad).is_err());
        let mut bad = base.clone();
        bad.k_values = vec![9];
        assert!(run_grid(&bad).is_err());
        let mut bad = base;
        bad.trials = 0;
        assert!(run_grid(&bad).is_err());
    }

    #[test]
    fn phase_config_json_field_names() {
        let json = r#"{
            "n_values": [10, 20],
            "k_values": [1, 2],
            "trials": 3,
            "p_rule": 5.0,
            "algorithm": "dc",
            "dict_kind": "gaussian_iid",
            "precondition": true,
            "master_seed": 7,
            "success_threshold": 1e-4,
            "output_dir": "/tmp/out"
        }"#;
        let cfg: PhaseConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.n_values, vec![10, 20]);
        assert_eq!(cfg.algorithm, Algorithm::Dc);
        assert_eq!(cfg.trials, 3);
        // defaulted fields
        let minimal = r#"{
            "n_values": [4],
            "k_values": [1],
            "algorithm": "proj",
            "master_seed": 1,
            "output_dir": "/tmp/out"
        }"#;
        let cfg: PhaseConfig = serde_json::from_str(minimal).unwrap();
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.p_rule, 5.0);
        assert!(cfg.precondition);
        assert_eq!(cfg.success_threshold, 1e-4);
    }
}

//! Ensemble aggregation with nonparametric bootstrap standard errors.
//!
//! Aggregation always runs sequentially in trajectory index order, so the
//! results do not depend on how many workers produced the records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Simulation, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::{trace_distance, trace_product_re, CMat};

pub const BOOTSTRAP_RESAMPLES: usize = 400;
pub const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn resample_indices(n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) {
    out.clear();
    out.extend((0..n).map(|_| rng.random_range(0..n)));
}

/// Sample mean and bootstrap standard error of the mean.
pub fn bootstrap_mean(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let n = values.len();
    let full = mean(values);
    if n < 2 || resamples == 0 {
        return (full, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..resamples {
        resample_indices(n, &mut rng, &mut idx);
        let m = idx.iter().map(|&i| values[i]).sum::<f64>() / n as f64;
        acc += m;
        acc2 += m * m;
    }
    let r = resamples as f64;
    let var = (acc2 / r - (acc / r).powi(2)).max(0.0);
    (full, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationEstimate {
    /// Sample mean of `e^(−Δs_na)`.
    pub value: f64,
    pub stderr: f64,
    pub mean_ds_na: f64,
    pub mean_ds_na_stderr: f64,
    /// Extremes of the exponent `−Δs_na`.
    pub min_exponent: f64,
    pub max_exponent: f64,
}

/// `E[e^(−Δs_na)]` and `E[Δs_na]` with bootstrap standard errors.
pub fn fluctuation_functional(records: &[TrajectoryRecord]) -> Result<FluctuationEstimate> {
    if records.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: records.len(),
        });
    }
    let exponents: Vec<f64> = records.iter().map(|r| -r.ds_na_total).collect();
    let values: Vec<f64> = exponents.iter().map(|x| x.exp()).collect();
    let ds_na: Vec<f64> = records.iter().map(|r| r.ds_na_total).collect();
    let (value, stderr) = bootstrap_mean(&values, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED);
    let (mean_ds_na, mean_ds_na_stderr) = bootstrap_mean(&ds_na, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED + 1);
    Ok(FluctuationEstimate {
        value,
        stderr,
        mean_ds_na,
        mean_ds_na_stderr,
        min_exponent: exponents.iter().copied().fold(f64::INFINITY, f64::min),
        max_exponent: exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub t: f64,
    /// `½‖mean ϱ_t − ρ_t‖₁`.
    pub trace_distance: f64,
    /// Root-mean-square trace distance of bootstrap mean states from the
    /// full-sample mean state.
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowStat {
    pub t_start: f64,
    pub t_end: f64,
    /// Ensemble mean of the collected excess entropy per unit time.
    pub mean_rate: f64,
    pub stderr: f64,
    /// Time average of `Σ_k Tr[L_k†L_kρ_t] ln ϖ_k` over the window.
    pub predicted_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub dt: f64,
    pub epsilon_mix: f64,
    pub checkpoints: Vec<CheckpointStat>,
    pub windows: Vec<WindowStat>,
    /// Excess entropy rate over the whole horizon.
    pub mean_ds_ex_rate: WindowStat,
    pub ft: Option<FluctuationEstimate>,
    pub mean_ds_na: f64,
    pub mean_ds_na_stderr: f64,
    /// Observed jumps per channel.
    pub jump_counts: Vec<usize>,
    /// `∫ Tr[L_k†L_kρ_t] dt` per channel and trajectory, times `n_traj`.
    pub expected_jump_counts: Vec<f64>,
}

impl EnsembleStats {
    pub fn from_records(sim: &Simulation, records: &[TrajectoryRecord]) -> Result<Self> {
        let n = records.len();
        if n == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let background = sim.background();
        let cps = sim.checkpoints();
        let h = sim.step();
        let nf = n as f64;

        let mut means: Vec<CMat> = cps.iter().map(|&i| CMat::zeros(background[i].1.dim(), background[i].1.dim())).collect();
        for r in records {
            for (m, s) in means.iter_mut().zip(&r.checkpoint_states) {
                *m += s;
            }
        }
        for m in means.iter_mut() {
            m.unscale_mut(nf);
        }

        let windows_n = cps.len() - 1;
        let lengths: Vec<f64> = cps.windows(2).map(|w| background[w[1]].0 - background[w[0]].0).collect();
        let window_means: Vec<f64> = (0..windows_n)
            .map(|w| records.iter().map(|r| r.window_ds_ex[w]).sum::<f64>() / nf / lengths[w])
            .collect();
        let horizon = background[background.len() - 1].0 - background[0].0;
        let totals: Vec<f64> = records.iter().map(|r| r.ds_ex_total / horizon).collect();
        let ds_na: Vec<f64> = records.iter().map(|r| r.ds_na_total).collect();

        let mut dist2 = vec![0.0; cps.len()];
        let mut win_acc = vec![(0.0, 0.0); windows_n];
        if n >= 2 {
            let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
            let mut idx = Vec::with_capacity(n);
            for _ in 0..BOOTSTRAP_RESAMPLES {
                resample_indices(n, &mut rng, &mut idx);
                for (c_i, full) in means.iter().enumerate() {
                    let mut m = CMat::zeros(full.nrows(), full.ncols());
                    for &i in &idx {
                        m += &records[i].checkpoint_states[c_i];
                    }
                    m.unscale_mut(nf);
                    dist2[c_i] += trace_distance(&m, full).powi(2);
                }
                for (w, acc) in win_acc.iter_mut().enumerate() {
                    let x = idx.iter().map(|&i| records[i].window_ds_ex[w]).sum::<f64>() / nf / lengths[w];
                    acc.0 += x;
                    acc.1 += x * x;
                }
            }
        }
        let r = BOOTSTRAP_RESAMPLES as f64;
        let checkpoints = cps
            .iter()
            .enumerate()
            .map(|(c_i, &i)| CheckpointStat {
                t: background[i].0,
                trace_distance: trace_distance(&means[c_i], background[i].1.matrix()),
                stderr: if n >= 2 { (dist2[c_i] / r).sqrt() } else { 0.0 },
            })
            .collect();

        let predicted = |from: usize, to: usize| -> Option<f64> {
            let mut acc = 0.0;
            for step in from..to {
                let rho = background[step].1.matrix();
                for (product, lw) in sim.step_ops_products(step).iter().zip(sim.step_log_weights(step)) {
                    let rate = trace_product_re(product, rho);
                    if rate == 0.0 {
                        continue;
                    }
                    acc += rate * (*lw)? * h;
                }
            }
            Some(acc / (background[to].0 - background[from].0))
        };
        let windows = (0..windows_n)
            .map(|w| {
                let (a, a2) = win_acc[w];
                let se = if n >= 2 { (a2 / r - (a / r).powi(2)).max(0.0).sqrt() } else { 0.0 };
                WindowStat {
                    t_start: background[cps[w]].0,
                    t_end: background[cps[w + 1]].0,
                    mean_rate: window_means[w],
                    stderr: se,
                    predicted_rate: predicted(cps[w], cps[w + 1]),
                }
            })
            .collect();
        let (total_mean, total_se) = bootstrap_mean(&totals, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED + 2);
        let mean_ds_ex_rate = WindowStat {
            t_start: background[0].0,
            t_end: background[background.len() - 1].0,
            mean_rate: total_mean,
            stderr: total_se,
            predicted_rate: predicted(0, background.len() - 1),
        };
        let (mean_ds_na, mean_ds_na_stderr) = bootstrap_mean(&ds_na, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED + 1);

        let channels = sim.step_ops_products(0).len();
        let mut jump_counts = vec![0; channels];
        for r in records {
            for &(_, k) in &r.events {
                jump_counts[k] += 1;
            }
        }
        let mut expected_jump_counts = vec![0.0; channels];
        for step in 0..sim.steps() {
            let rho = background[step].1.matrix();
            for (k, product) in sim.step_ops_products(step).iter().enumerate() {
                expected_jump_counts[k] += trace_product_re(product, rho) * h * nf;
            }
        }

        Ok(Self {
            n_traj: n,
            dt: h,
            epsilon_mix: sim.config().epsilon_mix,
            checkpoints,
            windows,
            mean_ds_ex_rate,
            ft: fluctuation_functional(records).ok(),
            mean_ds_na,
            mean_ds_na_stderr,
            jump_counts,
            expected_jump_counts,
        })
    }

    /// Largest `trace_distance / stderr` over the checkpoints after the first.
    pub fn max_state_z(&self) -> f64 {
        self.checkpoints
            .iter()
            .skip(1)
            .map(|c| if c.stderr > 0.0 { c.trace_distance / c.stderr } else if c.trace_distance == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DensityMatrix;
    use crate::model::{qubit_model, steady_state};
    use crate::trajectory::{default_schedule, TrajectoryConfig};

    #[test]
    fn bootstrap_of_constant_is_exact() {
        let (m, se) = bootstrap_mean(&[2.5; 50], 200, 1);
        assert_eq!(m, 2.5);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn bootstrap_matches_analytic_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let values: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let (_, se) = bootstrap_mean(&values, 400, 3);
        let analytic = (1.0 / 12.0 / 4000.0f64).sqrt();
        assert!((se / analytic - 1.0).abs() < 0.15, "{se} vs {analytic}");
    }

    #[test]
    fn fluctuation_needs_two_records() {
        assert!(matches!(
            fluctuation_functional(&[]),
            Err(Error::InsufficientSamples { needed: 2, got: 0 })
        ));
    }

    #[test]
    fn single_record_ensemble() {
        let m = qubit_model(1.0, 1.0, 1.0);
        let rho0 = DensityMatrix::maximally_mixed(2);
        let config = TrajectoryConfig::new(0.0, 0.5, 1e-3).with_checkpoints(2);
        let schedule = default_schedule(&m, &config, None).unwrap();
        let sim = Simulation::new(&m, &rho0, config, schedule).unwrap();
        let (records, stats) = sim.run_ensemble(1, 9).unwrap();
        assert_eq!(stats.n_traj, 1);
        assert_eq!(stats.mean_ds_na, records[0].ds_na_total);
        assert!(stats.ft.is_none());
        assert_eq!(stats.checkpoints[0].stderr, 0.0);
    }

    #[test]
    fn steady_undriven_ensemble_has_unit_ft() {
        let m = qubit_model(1.0, 1.0, 1.0);
        let ssi = steady_state(&m, 0.0).unwrap();
        let config = TrajectoryConfig::new(0.0, 1e-3, 1e-3);
        let schedule = default_schedule(&m, &config, Some(&ssi)).unwrap();
        let sim = Simulation::new(&m, &ssi.pi, config, schedule).unwrap();
        let records = sim.run_many(50, 0).unwrap();
        let quiet: Vec<_> = records.into_iter().filter(|r| r.events.is_empty()).collect();
        let ft = fluctuation_functional(&quiet).unwrap();
        // Without jumps the state stays a π eigenvector and ρ_t = π.
        assert!((ft.value - 1.0).abs() < 1e-9);
        assert!(ft.stderr < 1e-9);
    }
}

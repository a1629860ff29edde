//! Model fitting: truncated backpropagation through time on multi-step
//! temperature predictions.
//!
//! Each training window is a `horizon+1`-record slice of a trajectory. The
//! rollout starts teacher-forced (`D_0` = measured temperature, `E_0 = 0`)
//! and then runs open loop; the loss is the mean squared error of the
//! predicted temperature over the window. Network weights and the four
//! physical parameters are trained together; the physical parameters get
//! their own (larger) step size because their scale is set by the data
//! units rather than by the weight initialization.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    exogenous_from_record, sigmoid, ExogenousStep, PcnnModel, PcnnPhysParams, PcnnState,
    EXO_FEATURES,
};
use crate::data::{fit_normalizer, DatasetSplit, Mode, Normalizer, Trajectory};
use crate::error::{Error, Result};
use crate::neural::{
    adam_step, mlp_gradients, mlp_init, AdamConfig, MlpGradients, MlpSpec, OptimizerState,
    OutputActivation,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PcnnTrainConfig {
    /// Hidden layer sizes of the unforced-dynamics network.
    pub hidden: Vec<usize>,
    /// Rollout length in steps (48 = 12 h).
    pub horizon: usize,
    pub epochs: usize,
    /// Windows per gradient step.
    pub batch_windows: usize,
    /// Offset between window starts within a trajectory.
    pub window_stride: usize,
    pub learning_rate: f64,
    pub phys_learning_rate: f64,
}

impl Default for PcnnTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 64],
            horizon: 48,
            epochs: 30,
            batch_windows: 16,
            window_stride: 12,
            learning_rate: 1e-3,
            phys_learning_rate: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainEpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch, degrees C squared.
    pub train_mse_c2: f64,
    /// Multi-step validation MSE, degrees C squared.
    pub val_mse_c2: f64,
}

#[derive(Debug, Clone)]
pub struct PcnnTrainResult {
    /// The parameters with the lowest validation MSE seen during training.
    pub model: PcnnModel,
    pub history: Vec<TrainEpochStats>,
    pub best_val_mse_c2: f64,
}

/// Starting physical parameters. Loss fractions `b`, `c` are dimensionless
/// per-step values; the power gains are seeded as 0.1 degrees C per kW-step
/// converted into normalized units, so the starting point is physically
/// plausible whatever temperature range the normalizer covers.
pub(crate) fn initial_phys(normalizer: &Normalizer) -> PcnnPhysParams {
    let gain = 0.1 * normalizer.temperature.scale();
    PcnnPhysParams::from_effective(gain, 0.02, 0.01, gain)
}

/// A trajectory converted to normalized arrays once, up front.
struct Prepped {
    /// Measured zone temperature, normalized.
    t: Vec<f64>,
    exo: Vec<ExogenousStep>,
    u: Vec<f64>,
    start_epoch_s: i64,
}

fn prep(traj: &Trajectory, norm: &Normalizer) -> Prepped {
    Prepped {
        t: traj
            .records
            .iter()
            .map(|r| norm.temperature.apply(r.t_zone))
            .collect(),
        exo: traj
            .records
            .iter()
            .map(|r| exogenous_from_record(r, norm))
            .collect(),
        u: traj.records.iter().map(|r| r.power).collect(),
        start_epoch_s: traj.start().timestamp(),
    }
}

/// Accumulated gradients for one batch: network plus the four raw
/// physical parameters (a, b, c, d order).
struct GradAcc {
    net: MlpGradients,
    phys: [f64; 4],
}

/// Forward-and-backward for one window. Returns the window loss in
/// normalized units; gradients are accumulated into `acc`.
fn window_loss_and_grads(
    model: &PcnnModel,
    p: &Prepped,
    start: usize,
    horizon: usize,
    acc: Option<&mut GradAcc>,
) -> f64 {
    let (a, b, c, d) = (
        model.phys.a(),
        model.phys.b(),
        model.phys.c(),
        model.phys.d(),
    );

    // Forward, keeping the whole path.
    let mut ds = Vec::with_capacity(horizon + 1);
    let mut es = Vec::with_capacity(horizon + 1);
    ds.push(p.t[start]);
    es.push(0.0);
    let mut f_inputs: Vec<[f64; 1 + EXO_FEATURES]> = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let exo = &p.exo[start + k];
        let mut f_in = [0.0; 1 + EXO_FEATURES];
        f_in[0] = ds[k];
        f_in[1..].copy_from_slice(&exo.features);
        let f = crate::neural::mlp_forward(&model.f_net, &f_in).expect("validated shapes")[0];
        f_inputs.push(f_in);
        let t_k = ds[k] + es[k];
        let g = match exo.mode {
            Mode::Heating => a,
            Mode::Cooling => d,
        };
        es.push(es[k] + g * p.u[start + k] - b * (t_k - exo.t_out) - c * (t_k - exo.t_neigh));
        ds.push(ds[k] + f);
    }

    let h = horizon as f64;
    let mut loss = 0.0;
    for k in 1..=horizon {
        let err = ds[k] + es[k] - p.t[start + k];
        loss += err * err;
    }
    loss /= h;

    let Some(acc) = acc else { return loss };

    // Backward over the rollout.
    let ell = |k: usize| -> f64 {
        if k == 0 {
            0.0
        } else {
            2.0 * (ds[k] + es[k] - p.t[start + k]) / h
        }
    };
    let mut g_d = ell(horizon);
    let mut g_e = ell(horizon);
    let mut phys_eff = [0.0_f64; 4]; // d/d(a_eff), b_eff, c_eff, d_eff
    for k in (0..horizon).rev() {
        let exo = &p.exo[start + k];
        let t_k = ds[k] + es[k];
        // Physical-parameter contributions through E[k+1].
        match exo.mode {
            Mode::Heating => phys_eff[0] += g_e * p.u[start + k],
            Mode::Cooling => phys_eff[3] += g_e * p.u[start + k],
        }
        phys_eff[1] += g_e * (exo.t_out - t_k);
        phys_eff[2] += g_e * (exo.t_neigh - t_k);
        // Network contribution through D[k+1].
        let (net_g, in_g) = mlp_gradients(&model.f_net, &f_inputs[k], &[g_d]).expect("shapes");
        acc.net.add(&net_g);
        // State adjoints for step k.
        let g_d_prev = ell(k) - (b + c) * g_e + g_d + in_g[0];
        let g_e_prev = ell(k) + (1.0 - b - c) * g_e;
        g_d = g_d_prev;
        g_e = g_e_prev;
    }
    // Chain through softplus to the raw parameters.
    acc.phys[0] += phys_eff[0] * sigmoid(model.phys.a_raw);
    acc.phys[1] += phys_eff[1] * sigmoid(model.phys.b_raw);
    acc.phys[2] += phys_eff[2] * sigmoid(model.phys.c_raw);
    acc.phys[3] += phys_eff[3] * sigmoid(model.phys.d_raw);

    loss
}

/// Plain Adam over the four raw physical parameters.
struct PhysAdam {
    m: [f64; 4],
    v: [f64; 4],
    t: u64,
    lr: f64,
}

impl PhysAdam {
    fn step(&mut self, phys: &mut PcnnPhysParams, g: &[f64; 4]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let t = self.t as f64;
        let raws = [
            &mut phys.a_raw,
            &mut phys.b_raw,
            &mut phys.c_raw,
            &mut phys.d_raw,
        ];
        for (i, raw) in raws.into_iter().enumerate() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
            let m_hat = self.m[i] / (1.0 - B1.powf(t));
            let v_hat = self.v[i] / (1.0 - B2.powf(t));
            *raw -= self.lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}

/// Distinct window starts across overlapping trajectories, keyed by wall
/// time so duplicated slices are trained once.
fn collect_windows(prepped: &[Prepped], horizon: usize, stride: usize) -> Vec<(usize, usize)> {
    let mut seen: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for (ti, p) in prepped.iter().enumerate() {
        if p.t.len() < horizon + 1 {
            continue;
        }
        let mut s = 0;
        while s + horizon < p.t.len() {
            let key = p.start_epoch_s + (s as i64) * 900;
            seen.entry(key).or_insert((ti, s));
            s += stride;
        }
    }
    seen.into_values().collect()
}

/// Multi-step prediction MSE over whole trajectories, reported in degrees
/// C squared. `horizon = 1` gives the one-step error.
pub fn pcnn_multistep_mse(model: &PcnnModel, trajectories: &[Trajectory], horizon: usize) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::Data("no trajectories for evaluation".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let scale = model.temp_scale();
    for traj in trajectories {
        let p = prep(traj, &model.normalizer);
        if p.t.len() < horizon + 1 {
            continue;
        }
        let mut s = 0;
        while s + horizon < p.t.len() {
            let loss = window_loss_and_grads(model, &p, s, horizon, None);
            total += loss * scale * scale;
            count += 1;
            s += horizon; // non-overlapping evaluation windows
        }
    }
    if count == 0 {
        return Err(Error::Data(format!(
            "no trajectory long enough for horizon {horizon} (need {} records)",
            horizon + 1
        )));
    }
    Ok(total / count as f64)
}

/// Fit a model on the training split, tracking multi-step validation MSE
/// after every epoch and returning the best parameters seen.
pub fn pcnn_train(split: &DatasetSplit, cfg: &PcnnTrainConfig, seed: u64) -> Result<PcnnTrainResult> {
    if split.train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if split.validation.is_empty() {
        return Err(Error::Data("validation set is empty".into()));
    }
    let shortest = split
        .train
        .iter()
        .chain(split.validation.iter())
        .map(Trajectory::len)
        .min()
        .unwrap();
    if shortest < cfg.horizon + 1 {
        return Err(Error::InvalidConfig(format!(
            "horizon {} needs {} records, shortest trajectory has {}",
            cfg.horizon,
            cfg.horizon + 1,
            shortest
        )));
    }

    let normalizer = fit_normalizer(&split.train)?;
    let mut sizes = vec![1 + EXO_FEATURES];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(1);
    let spec = MlpSpec::relu(sizes, OutputActivation::Identity)?;
    let mut model = PcnnModel {
        phys: PcnnPhysParams::default(),
        f_net: mlp_init(&spec, seed)?,
        normalizer,
    };
    model.validate()?;

    let train_prepped: Vec<Prepped> = split
        .train
        .iter()
        .map(|t| prep(t, &model.normalizer))
        .collect();
    let windows = collect_windows(&train_prepped, cfg.horizon, cfg.window_stride);
    if windows.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut opt = OptimizerState::new(&model.f_net, AdamConfig::new(cfg.learning_rate));
    let mut phys_opt = PhysAdam {
        m: [0.0; 4],
        v: [0.0; 4],
        t: 0,
        lr: cfg.phys_learning_rate,
    };

    let scale2 = model.temp_scale() * model.temp_scale();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = model.clone();
    let mut best_val = if cfg.epochs == 0 {
        0.0
    } else {
        f64::INFINITY
    };

    let mut order: Vec<usize> = (0..windows.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_windows) {
            let mut acc = GradAcc {
                net: MlpGradients::zeros_like(&model.f_net),
                phys: [0.0; 4],
            };
            for &wi in chunk {
                let (ti, s) = windows[wi];
                epoch_loss +=
                    window_loss_and_grads(&model, &train_prepped[ti], s, cfg.horizon, Some(&mut acc));
            }
            let inv = 1.0 / chunk.len() as f64;
            acc.net.scale(inv);
            for g in &mut acc.phys {
                *g *= inv;
            }
            adam_step(&mut opt, &mut model.f_net, &acc.net)?;
            phys_opt.step(&mut model.phys, &acc.phys);
        }
        let val = pcnn_multistep_mse(&model, &split.validation, cfg.horizon)?;
        history.push(TrainEpochStats {
            epoch,
            train_mse_c2: epoch_loss / windows.len() as f64 * scale2,
            val_mse_c2: val,
        });
        if val < best_val {
            best_val = val;
            best = model.clone();
        }
    }

    Ok(PcnnTrainResult {
        model: best,
        history,
        best_val_mse_c2: best_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{extract_trajectories, generate_synthetic, split_dataset, ExtractParams};
    use crate::neural::HiddenActivation;

    fn tiny_split(days: u32, seed: u64) -> DatasetSplit {
        let records = generate_synthetic(days, seed).unwrap();
        let trajs = extract_trajectories(&records, ExtractParams::default());
        split_dataset(trajs, 0.25)
    }

    #[test]
    fn zero_epochs_returns_initialized_model() {
        let split = tiny_split(16, 0);
        let cfg = PcnnTrainConfig {
            epochs: 0,
            hidden: vec![8],
            ..Default::default()
        };
        let out = pcnn_train(&split, &cfg, 5).unwrap();
        let normalizer = fit_normalizer(&split.train).unwrap();
        let spec = MlpSpec::relu(vec![1 + EXO_FEATURES, 8, 1], OutputActivation::Identity).unwrap();
        let expect = PcnnModel {
            phys: PcnnPhysParams::default(),
            f_net: mlp_init(&spec, 5).unwrap(),
            normalizer,
        };
        assert_eq!(out.model, expect);
        assert!(out.history.is_empty());
    }

    #[test]
    fn empty_dataset_and_short_horizon_errors() {
        let empty = DatasetSplit {
            train: vec![],
            validation: vec![],
        };
        assert!(pcnn_train(&empty, &PcnnTrainConfig::default(), 0).is_err());

        let split = tiny_split(16, 0);
        let cfg = PcnnTrainConfig {
            horizon: 4000,
            ..Default::default()
        };
        assert!(pcnn_train(&split, &cfg, 0).is_err());
    }

    #[test]
    fn a_few_epochs_reduce_validation_mse() {
        let split = tiny_split(16, 3);
        let cfg = PcnnTrainConfig {
            hidden: vec![16],
            horizon: 24,
            epochs: 5,
            ..Default::default()
        };
        let out = pcnn_train(&split, &cfg, 1).unwrap();
        let first = out.history.first().unwrap().val_mse_c2;
        assert!(
            out.best_val_mse_c2 < first,
            "no improvement: best {} vs first-epoch {}",
            out.best_val_mse_c2,
            first
        );
        // Best is the minimum of the history by construction.
        let min_hist = out
            .history
            .iter()
            .map(|h| h.val_mse_c2)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_mse_c2, min_hist);
    }

    /// Finite-difference check of the full window loss: network weights and
    /// all four raw physical parameters. Uses tanh hidden layers so the
    /// loss is smooth.
    #[test]
    fn window_gradients_match_finite_differences() {
        let split = tiny_split(8, 7);
        let normalizer = fit_normalizer(&split.train).unwrap();
        let spec = MlpSpec::new(
            vec![1 + EXO_FEATURES, 6, 1],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )
        .unwrap();
        let model = PcnnModel {
            phys: PcnnPhysParams::default(),
            f_net: mlp_init(&spec, 9).unwrap(),
            normalizer: normalizer.clone(),
        };
        let p = prep(&split.train[0], &normalizer);
        let horizon = 6;

        let mut acc = GradAcc {
            net: MlpGradients::zeros_like(&model.f_net),
            phys: [0.0; 4],
        };
        window_loss_and_grads(&model, &p, 3, horizon, Some(&mut acc));

        let h = 1e-6;
        let loss_of = |m: &PcnnModel| window_loss_and_grads(m, &p, 3, horizon, None);
        // Raw physical parameters.
        for (i, name) in ["a", "b", "c", "d"].iter().enumerate() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let (rp, rm) = match i {
                0 => (&mut plus.phys.a_raw, &mut minus.phys.a_raw),
                1 => (&mut plus.phys.b_raw, &mut minus.phys.b_raw),
                2 => (&mut plus.phys.c_raw, &mut minus.phys.c_raw),
                _ => (&mut plus.phys.d_raw, &mut minus.phys.d_raw),
            };
            *rp += h;
            *rm -= h;
            let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let an = acc.phys[i];
            let denom = fd.abs().max(1e-8);
            assert!(
                ((an - fd) / denom).abs() < 1e-4,
                "phys {name}: analytic {an} vs fd {fd}"
            );
        }
        // A sample of network weights.
        for li in 0..model.f_net.layers.len() {
            for wi in (0..model.f_net.layers[li].weights.len()).step_by(5) {
                let mut plus = model.clone();
                plus.f_net.layers[li].weights[wi] += h;
                let mut minus = model.clone();
                minus.f_net.layers[li].weights[wi] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let an = acc.net.layers[li].weights[wi];
                let denom = fd.abs().max(1e-8);
                assert!(
                    ((an - fd) / denom).abs() < 1e-4,
                    "layer {li} weight {wi}: analytic {an} vs fd {fd}"
                );
            }
        }
    }
}

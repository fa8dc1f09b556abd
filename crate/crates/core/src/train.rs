//! Minibatch SGD with momentum, snapshot recording, and early stopping.
//!
//! Update rule per minibatch, in this exact order:
//!
//! ```text
//! g = grad(summed minibatch loss) / batch_len
//! v = momentum * v - learning_rate * g
//! p = p + v
//! ```
//!
//! Minibatch membership for epoch `e` comes from a ChaCha stream keyed by
//! `(seed, e)`, so epoch order never depends on earlier epochs and reruns are
//! bit-identical. Indices inside each minibatch are sorted ascending before
//! the gradient is accumulated, keeping the reduction order fixed.

use crate::data::{DataConfig, Splits};
use crate::error::{Error, Result};
use crate::linalg::{permutation, seeded_stream};
use crate::model::{self, NetworkSpec};
use crate::params::ParamVector;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without improving the best
    /// validation objective (train objective when there is no validation
    /// split). Zero disables early stopping.
    pub patience: usize,
    /// Record a full parameter snapshot every this many epochs. The initial
    /// parameters and the final epoch are always recorded.
    pub snapshot_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            batch_size: 32,
            max_epochs: 100,
            patience: 0,
            snapshot_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max epochs must be at least 1".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidArgument(
                "snapshot interval must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub params: ParamVector,
}

/// Everything a training run leaves behind: the network, how the data is
/// rebuilt, parameter snapshots (snapshot 0 is always the initial point),
/// which snapshot scored the best validation objective, and the per-epoch
/// objective curves (index 0 is the untrained objective).
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    spec: NetworkSpec,
    data: DataConfig,
    config: TrainConfig,
    snapshots: Vec<Snapshot>,
    solution_index: usize,
    train_objective: Vec<f64>,
    valid_objective: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn new(
        spec: NetworkSpec,
        data: DataConfig,
        config: TrainConfig,
        snapshots: Vec<Snapshot>,
        solution_index: usize,
        train_objective: Vec<f64>,
        valid_objective: Option<Vec<f64>>,
    ) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidArgument("record has no snapshots".into()));
        }
        if snapshots[0].epoch != 0 {
            return Err(Error::InvalidArgument(
                "the first snapshot must be the initial parameters at epoch 0".into(),
            ));
        }
        for w in snapshots.windows(2) {
            if w[1].epoch <= w[0].epoch {
                return Err(Error::InvalidArgument(
                    "snapshot epochs must be strictly increasing".into(),
                ));
            }
        }
        let manifest = spec.manifest();
        for s in &snapshots {
            if !s.params.manifest().same_layout(&manifest) {
                return Err(Error::ManifestMismatch(
                    "snapshot does not match the network layout".into(),
                ));
            }
        }
        if solution_index >= snapshots.len() {
            return Err(Error::InvalidArgument(format!(
                "solution index {solution_index} out of range for {} snapshots",
                snapshots.len()
            )));
        }
        let epochs_recorded = snapshots.last().unwrap().epoch + 1;
        if train_objective.len() != epochs_recorded {
            return Err(Error::InvalidArgument(format!(
                "{} train objectives for {} epochs",
                train_objective.len(),
                epochs_recorded
            )));
        }
        if let Some(v) = &valid_objective {
            if v.len() != train_objective.len() {
                return Err(Error::InvalidArgument(
                    "validation objective length does not match".into(),
                ));
            }
        }
        Ok(TrajectoryRecord {
            spec,
            data,
            config,
            snapshots,
            solution_index,
            train_objective,
            valid_objective,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn spec_digest(&self) -> String {
        self.spec.digest()
    }

    pub fn data(&self) -> &DataConfig {
        &self.data
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn solution_index(&self) -> usize {
        self.solution_index
    }

    pub fn initial(&self) -> &ParamVector {
        &self.snapshots[0].params
    }

    pub fn solution(&self) -> &ParamVector {
        &self.snapshots[self.solution_index].params
    }

    pub fn train_objective(&self) -> &[f64] {
        &self.train_objective
    }

    pub fn valid_objective(&self) -> Option<&[f64]> {
        self.valid_objective.as_deref()
    }

    /// Objective the solution was selected on, per epoch: validation when
    /// present, train otherwise.
    pub fn selection_objective(&self) -> &[f64] {
        self.valid_objective
            .as_deref()
            .unwrap_or(&self.train_objective)
    }
}

/// Biases start at zero; weights are independent draws from the open
/// interval (-scale, scale).
pub fn init_params(spec: &NetworkSpec, scale: f64, seed: u64) -> Result<ParamVector> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "init scale must be positive, got {scale}"
        )));
    }
    let manifest = spec.manifest();
    let mut out = ParamVector::zeros(manifest.clone());
    let mut rng = seeded_stream(seed, 0);
    for seg in manifest.segments().to_vec() {
        if seg.name.ends_with(".bias") {
            continue;
        }
        let values = out.segment_mut(&seg.name).expect("segment from manifest");
        for v in values {
            // rand's f64 sampler covers [0, 1); skip 0 so the interval stays
            // open on both sides.
            let mut u: f64 = rand::Rng::gen(&mut rng);
            while u == 0.0 {
                u = rand::Rng::gen(&mut rng);
            }
            *v = -scale + 2.0 * scale * u;
        }
    }
    Ok(out)
}

/// Runs SGD with momentum from `initial`, recording snapshots and per-epoch
/// objectives (totals, not means). The solution is the recorded snapshot
/// with the lowest selection objective; training keeps going after it, so
/// records usually continue past their solution. Non-finite losses abort
/// with [`Error::Diverged`] carrying everything recorded up to the last
/// finite epoch.
pub fn sgd_train(
    spec: &NetworkSpec,
    initial: &ParamVector,
    splits: &Splits,
    data: &DataConfig,
    config: &TrainConfig,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    if !initial.manifest().same_layout(&spec.manifest()) {
        return Err(Error::ManifestMismatch(
            "initial parameters do not match the network".into(),
        ));
    }

    let n = splits.train.len();
    let mut params = initial.clone();
    let mut velocity = ParamVector::zeros(params.manifest().clone());

    let eval_objectives = |p: &ParamVector| -> Result<(f64, Option<f64>)> {
        let train = model::loss_total(spec, p, splits.train.view())?.sum;
        let valid = match &splits.valid {
            Some(v) => Some(model::loss_total(spec, p, v.view())?.sum),
            None => None,
        };
        Ok((train, valid))
    };

    let (j0_train, j0_valid) = eval_objectives(&params)?;
    let mut train_objective = vec![j0_train];
    let mut valid_objective = j0_valid.map(|v| vec![v]);
    let mut snapshots = vec![Snapshot {
        epoch: 0,
        params: params.clone(),
    }];

    let selection0 = j0_valid.unwrap_or(j0_train);
    let mut best = selection0;
    let mut epochs_since_best = 0usize;

    let finish = |snapshots: Vec<Snapshot>,
                  train_objective: Vec<f64>,
                  valid_objective: Option<Vec<f64>>|
     -> Result<TrajectoryRecord> {
        // Solution = recorded snapshot with the lowest selection objective;
        // earliest wins ties.
        let selection: &[f64] = valid_objective.as_deref().unwrap_or(&train_objective);
        let mut solution_index = 0usize;
        for (i, s) in snapshots.iter().enumerate() {
            if selection[s.epoch] < selection[snapshots[solution_index].epoch] {
                solution_index = i;
            }
        }
        TrajectoryRecord::new(
            spec.clone(),
            data.clone(),
            config.clone(),
            snapshots,
            solution_index,
            train_objective,
            valid_objective,
        )
    };

    for epoch in 1..=config.max_epochs {
        let mut order = permutation(&mut seeded_stream(config.seed, epoch as u64), n);
        let mut diverged = false;
        for chunk in order.chunks_mut(config.batch_size) {
            chunk.sort_unstable();
            let batch = splits.train.gather(chunk)?;
            let (grad_sum, loss_sum) = model::grad_with_loss(spec, &params, batch.view())?;
            if !loss_sum.is_finite() {
                diverged = true;
                break;
            }
            let inv_len = 1.0 / chunk.len() as f64;
            let v = velocity.values_mut();
            let p = params.values_mut();
            let g = grad_sum.values();
            for i in 0..p.len() {
                v[i] = config.momentum * v[i] - config.learning_rate * (g[i] * inv_len);
                p[i] += v[i];
            }
        }

        let objectives = if diverged {
            None
        } else {
            match eval_objectives(&params) {
                Ok((t, v)) if t.is_finite() && v.map_or(true, f64::is_finite) => Some((t, v)),
                Ok(_) => None,
                Err(e) => return Err(e),
            }
        };

        let Some((jt, jv)) = objectives else {
            // Parameters for epochs after the last snapshot are gone, so the
            // partial record ends at that snapshot.
            let keep = snapshots.last().unwrap().epoch + 1;
            train_objective.truncate(keep);
            if let Some(vs) = valid_objective.as_mut() {
                vs.truncate(keep);
            }
            let partial = finish(snapshots, train_objective, valid_objective)?;
            return Err(Error::Diverged {
                epoch,
                partial: Box::new(partial),
            });
        };

        train_objective.push(jt);
        if let Some(vs) = valid_objective.as_mut() {
            vs.push(jv.expect("validation split cannot disappear mid-run"));
        }
        if epoch % config.snapshot_every == 0 {
            snapshots.push(Snapshot {
                epoch,
                params: params.clone(),
            });
        }

        let selection = jv.unwrap_or(jt);
        if selection < best {
            best = selection;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }
        if config.patience > 0 && epochs_since_best >= config.patience {
            if snapshots.last().unwrap().epoch != epoch {
                snapshots.push(Snapshot {
                    epoch,
                    params: params.clone(),
                });
            }
            // The objective vectors stop here too, so lengths stay aligned.
            return finish(snapshots, train_objective, valid_objective);
        }
    }

    if snapshots.last().unwrap().epoch != config.max_epochs {
        snapshots.push(Snapshot {
            epoch: config.max_epochs,
            params: params.clone(),
        });
    }
    finish(snapshots, train_objective, valid_objective)
}

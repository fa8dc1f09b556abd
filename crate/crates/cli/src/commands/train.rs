use std::path::PathBuf;

use clap::Args;
use landscape_core::train::{init_params, sgd_train, TrajectoryRecord};
use landscape_core::{export, trajfile, Error};

use crate::config::ExperimentConfig;
use crate::svg;

use super::{write_text, CmdResult, Failure};

/// Train a network as described by a config file and record the trajectory.
#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's [output] dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &TrainArgs) -> CmdResult {
    let config = ExperimentConfig::load(&args.config)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| Failure::usage("no output directory: pass --out or set [output] dir"))?;

    let splits = config.data.build()?;
    println!(
        "model digest: {}\nparameters: {}\ntrain examples: {}{}",
        config.spec.digest(),
        config.spec.param_count(),
        splits.train.len(),
        match &splits.valid {
            Some(v) => format!(" (validation: {})", v.len()),
            None => String::new(),
        },
    );

    let initial = init_params(&config.spec, config.init_scale, config.train.seed)?;
    match sgd_train(&config.spec, &initial, &splits, &config.data, &config.train) {
        Ok(record) => {
            write_outputs(&out, &config, &record, "trajectory")?;
            let solution_epoch = record.snapshots()[record.solution_index()].epoch;
            println!(
                "epochs run: {} (max {})\nsolution epoch: {}\nJ_train at solution: {:.6e}",
                record.train_objective().len() - 1,
                config.train.max_epochs,
                solution_epoch,
                record.train_objective()[solution_epoch],
            );
            if let Some(valid) = record.valid_objective() {
                println!("J_valid at solution: {:.6e}", valid[solution_epoch]);
            }
            println!("wrote: {}", out.join("trajectory.lptraj").display());
            Ok(())
        }
        Err(Error::Diverged { epoch, partial }) => {
            write_outputs(&out, &config, &partial, "trajectory_partial")?;
            Err(Failure {
                code: 3,
                message: format!(
                    "training diverged at epoch {epoch}; partial record written to {}",
                    out.join("trajectory_partial.lptraj").display()
                ),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn write_outputs(
    out: &std::path::Path,
    config: &ExperimentConfig,
    record: &TrajectoryRecord,
    stem: &str,
) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let traj_path = out.join(format!("{stem}.lptraj"));
    trajfile::save_trajectory(record, &traj_path)?;
    write_text(out, "learning_curve.csv", &export::learning_curve_csv(record))?;

    let mut series = vec![svg::Series::line(
        "train",
        record
            .train_objective()
            .iter()
            .enumerate()
            .map(|(e, &j)| (e as f64, j))
            .collect(),
    )];
    if let Some(valid) = record.valid_objective() {
        series.push(svg::Series::line(
            "valid",
            valid.iter().enumerate().map(|(e, &j)| (e as f64, j)).collect(),
        ));
    }
    let figure = svg::Figure::new("training objective", "epoch", "J").log_y();
    write_text(out, "learning_curve.svg", &svg::line_plot(&figure, &series))?;

    let manifest = format!(
        "command = train\n\
         version = {}\n\
         model_digest = {}\n\
         param_count = {}\n\
         init_scale = {}\n\
         snapshot_count = {}\n\
         solution_epoch = {}\n\
         epochs_recorded = {}\n\
         files = {stem}.lptraj, learning_curve.csv, learning_curve.svg\n\
         [model]\n{}\
         [data]\n{}\
         [train]\n\
         learning_rate = {}\nmomentum = {}\nbatch_size = {}\nmax_epochs = {}\n\
         patience = {}\nsnapshot_every = {}\nseed = {}\n",
        env!("CARGO_PKG_VERSION"),
        record.spec_digest(),
        record.spec().param_count(),
        config.init_scale,
        record.snapshots().len(),
        record.snapshots()[record.solution_index()].epoch,
        record.train_objective().len() - 1,
        record.spec().canonical_text(),
        record.data().to_lines(),
        record.config().learning_rate,
        record.config().momentum,
        record.config().batch_size,
        record.config().max_epochs,
        record.config().patience,
        record.config().snapshot_every,
        record.config().seed,
    );
    write_text(out, "run_manifest.txt", &manifest)?;
    Ok(())
}

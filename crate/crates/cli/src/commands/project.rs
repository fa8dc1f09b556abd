use std::path::PathBuf;

use clap::Args;
use landscape_core::{export, probe};

use crate::svg;

use super::{out_dir_or_parent, write_text, CmdResult};

/// Express every snapshot of a trajectory in chord coordinates: position
/// along the initial-to-solution line and Euclidean distance off it.
#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Trajectory file produced by `train`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Output directory; defaults to the trajectory's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &ProjectArgs) -> CmdResult {
    let (record, _splits) = super::load_record(&args.trajectory)?;
    let trace = probe::projection_trace(&record)?;
    let out = out_dir_or_parent(&args.out, &args.trajectory);
    write_text(&out, "projection.csv", &export::trace_csv(&trace))?;

    let progress = svg::line_plot(
        &svg::Figure::new("progress along the chord", "epoch", "coordinate"),
        &[
            svg::Series::line(
                "alpha_hat",
                trace.points.iter().map(|p| (p.step as f64, p.alpha_hat)).collect(),
            ),
            svg::Series::line(
                "beta / |theta|",
                trace
                    .points
                    .iter()
                    .map(|p| (p.step as f64, p.residual_ratio))
                    .collect(),
            ),
        ],
    );
    let chord_points: Vec<(f64, f64)> =
        trace.points.iter().map(|p| (p.alpha, p.beta)).collect();
    let side = svg::line_plot(
        &svg::Figure::new("path in chord coordinates", "alpha", "beta"),
        &[
            svg::Series::line("", chord_points.clone()),
            svg::Series::scatter("", chord_points),
        ],
    );
    write_text(
        &out,
        "projection.svg",
        &svg::panel(&[progress, side], 2, 640.0, 420.0),
    )?;

    println!(
        "snapshots: {}\nchord length: {:.6e}\nmax beta: {:.6e}\nmax beta / |theta|: {:.6}",
        trace.points.len(),
        trace.chord_length,
        trace.max_beta(),
        trace.max_residual_ratio(),
    );
    println!("wrote: {}", out.join("projection.csv").display());
    Ok(())
}

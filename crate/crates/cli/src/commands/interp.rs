use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use landscape_core::{export, probe, trajfile};

use crate::svg;

use super::{out_dir_or_parent, parse_float_list, write_text, CmdResult, Failure};

/// Evaluate the objective along a straight line through parameter space.
#[derive(Args, Debug)]
pub struct InterpArgs {
    /// Trajectory file produced by `train`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Which two points to join.
    #[arg(long, value_enum, default_value_t = InterpMode::InitFinal)]
    pub mode: InterpMode,
    /// Second trajectory, for two-solutions mode.
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// Named alpha grid: coarse-50, fine-200, zoom-start-200, zoom-end-200.
    #[arg(long, default_value = "fine-200")]
    pub grid: String,
    /// Explicit comma-separated alphas; overrides --grid.
    #[arg(long)]
    pub alphas: Option<String>,
    /// Random endpoint norm as a multiple of the solution norm
    /// (random-point mode).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Seed for the random endpoint (random-point mode).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plot the objective on a log axis.
    #[arg(long)]
    pub log_y: bool,
    /// Output directory; defaults to the trajectory's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpMode {
    /// From the initial parameters to the solution.
    InitFinal,
    /// From this run's solution to another run's solution.
    TwoSolutions,
    /// From a random Gaussian point to the solution.
    RandomPoint,
}

impl InterpMode {
    fn stem(self) -> &'static str {
        match self {
            InterpMode::InitFinal => "interp_init_final",
            InterpMode::TwoSolutions => "interp_two_solutions",
            InterpMode::RandomPoint => "interp_random_point",
        }
    }
}

pub fn run(args: &InterpArgs) -> CmdResult {
    let (record, splits) = super::load_record(&args.trajectory)?;
    let spec = record.spec().clone();

    let grid = match &args.alphas {
        Some(text) => parse_float_list("--alphas", text)?,
        None => probe::grid_by_name(&args.grid).ok_or_else(|| {
            Failure::usage(format!(
                "unknown grid '{}' (expected coarse-50, fine-200, zoom-start-200, \
                 or zoom-end-200)",
                args.grid
            ))
        })?,
    };

    let curve = match args.mode {
        InterpMode::InitFinal => {
            let mut c =
                probe::interp_curve(&spec, &splits, record.initial(), record.solution(), &grid)?;
            c.endpoints = (
                "initial(epoch 0)".into(),
                format!(
                    "solution(epoch {})",
                    record.snapshots()[record.solution_index()].epoch
                ),
            );
            c
        }
        InterpMode::TwoSolutions => {
            let other_path = args.other.as_ref().ok_or_else(|| {
                Failure::usage("two-solutions mode needs --other <trajectory>")
            })?;
            let other = trajfile::load_trajectory(other_path)?;
            if other.data().to_lines() != record.data().to_lines() {
                return Err(Failure::usage(
                    "the two trajectories were trained on different data configurations",
                ));
            }
            probe::two_solution_curve(&spec, &splits, &record, &other, &grid)?
        }
        InterpMode::RandomPoint => {
            probe::random_point_curve(&spec, &splits, &record, args.scale, args.seed, &grid)?
        }
    };
    let stem = args.mode.stem();
    let out = out_dir_or_parent(&args.out, &args.trajectory);
    write_text(&out, &format!("{stem}.csv"), &export::curve_csv(&curve))?;

    let mut series = vec![svg::Series::line(
        "J_train",
        curve.alphas.iter().zip(&curve.train).map(|(&a, &j)| (a, j)).collect(),
    )];
    if let Some(valid) = &curve.valid {
        series.push(svg::Series::line(
            "J_valid",
            curve.alphas.iter().zip(valid).map(|(&a, &j)| (a, j)).collect(),
        ));
    }
    let mut figure = svg::Figure::new(
        &format!("{} to {}", curve.endpoints.0, curve.endpoints.1),
        "alpha",
        "J",
    );
    if args.log_y {
        figure = figure.log_y();
    }
    write_text(&out, &format!("{stem}.svg"), &svg::line_plot(&figure, &series))?;

    let report = probe::bump_report(&curve.alphas, &curve.train, None)?;
    let text = report_text(&curve, &report);
    write_text(&out, &format!("{stem}_report.txt"), &text)?;
    print!("{text}");
    println!("wrote: {}", out.join(format!("{stem}.csv")).display());
    Ok(())
}

fn report_text(curve: &probe::InterpolationCurve, report: &probe::BumpReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "endpoints = {} -> {}", curve.endpoints.0, curve.endpoints.1);
    let _ = writeln!(
        out,
        "points = {} over alpha [{}, {}]",
        curve.alphas.len(),
        curve.alphas[0],
        curve.alphas[curve.alphas.len() - 1]
    );
    let _ = writeln!(
        out,
        "J at endpoints = {:.6e} and {:.6e}",
        curve.train[0],
        curve.train[curve.train.len() - 1]
    );
    let _ = writeln!(out, "tolerance = {:.6e}", report.tolerance);
    let _ = writeln!(
        out,
        "upward violations = {} (mass {:.6e}, max {:.6e})",
        report.upward_count, report.upward_mass, report.max_upward
    );
    let _ = writeln!(out, "barriers = {}", report.barriers.len());
    for b in &report.barriers {
        let _ = writeln!(
            out,
            "  barrier at alpha {:.6} value {:.6e} height {:.6e}",
            b.alpha, b.value, b.magnitude
        );
    }
    let _ = writeln!(out, "interior minima = {}", report.interior_minima.len());
    for m in &report.interior_minima {
        let _ = writeln!(
            out,
            "  minimum at alpha {:.6} value {:.6e} depth {:.6e}",
            m.alpha, m.value, m.magnitude
        );
    }
    out
}

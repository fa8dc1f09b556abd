use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use landscape_core::surface::{BasisProvenance, SurfaceGrid};
use landscape_core::{export, probe, surface};

use crate::svg;

use super::{out_dir_or_parent, write_text, CmdResult, Failure};

/// Scan the objective over two coordinates around a trajectory.
#[derive(Args, Debug)]
pub struct SurfaceArgs {
    /// Trajectory file produced by `train`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Which scan to run.
    #[arg(long, value_enum, default_value_t = SurfaceKind::Trajectory)]
    pub kind: SurfaceKind,
    /// Alpha grid for the trajectory scan: coarse-50, fine-200,
    /// zoom-start-200, zoom-end-200.
    #[arg(long, default_value = "coarse-50")]
    pub grid: String,
    /// Grid points per axis for the control scans (odd).
    #[arg(long, default_value_t = 51)]
    pub resolution: usize,
    /// Half-width of the random plane, in parameter units; defaults to half
    /// the chord length.
    #[arg(long)]
    pub extent: Option<f64>,
    /// Seed for the random directions of the control scans.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to the trajectory's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    /// Chord position against per-column snapshot residual directions.
    Trajectory,
    /// Random plane through the solution.
    RandomPlane,
    /// Chord against one fixed random orthogonal direction.
    AlphaRandom,
}

impl SurfaceKind {
    fn stem(self) -> &'static str {
        match self {
            SurfaceKind::Trajectory => "surface_trajectory",
            SurfaceKind::RandomPlane => "surface_random_plane",
            SurfaceKind::AlphaRandom => "surface_alpha_random",
        }
    }
}

pub fn run(args: &SurfaceArgs) -> CmdResult {
    let (record, splits) = super::load_record(&args.trajectory)?;
    let spec = record.spec().clone();

    let (grid, highlight) = match args.kind {
        SurfaceKind::Trajectory => {
            let alphas = probe::grid_by_name(&args.grid).ok_or_else(|| {
                Failure::usage(format!(
                    "unknown grid '{}' (expected coarse-50, fine-200, zoom-start-200, \
                     or zoom-end-200)",
                    args.grid
                ))
            })?;
            let grid = surface::surface_from_trajectory(&spec, &splits, &record, &alphas, None)?;
            (grid, (1.0, 0.0))
        }
        SurfaceKind::RandomPlane => {
            let extent = match args.extent {
                Some(e) => e,
                None => {
                    let chord = record.solution().sub(record.initial())?;
                    0.5 * chord.norm()
                }
            };
            let grid = surface::random_plane_control(
                &spec,
                &splits,
                &record,
                extent,
                args.resolution,
                args.seed,
            )?;
            (grid, (0.0, 0.0))
        }
        SurfaceKind::AlphaRandom => {
            let grid = surface::alpha_random_control(
                &spec,
                &splits,
                &record,
                args.resolution,
                args.seed,
            )?;
            (grid, (1.0, 0.0))
        }
    };

    let stem = args.kind.stem();
    let out = out_dir_or_parent(&args.out, &args.trajectory);
    write_text(&out, &format!("{stem}.csv"), &export::surface_csv(&grid))?;
    write_text(&out, &format!("{stem}.json"), &export::surface_json(&grid))?;
    write_text(&out, &format!("{stem}_overlay.csv"), &export::overlay_csv(&grid))?;

    let figure = svg::Figure::new(stem, "alpha", "beta");
    let overlay: Vec<(f64, f64)> = grid.overlay.iter().map(|p| (p.a, p.b)).collect();
    write_text(
        &out,
        &format!("{stem}.svg"),
        &svg::heatmap_plot(
            &figure,
            &grid.alpha,
            &grid.beta,
            &grid.values,
            &overlay,
            Some(highlight),
        ),
    )?;

    let (lo, hi) = value_range(&grid);
    println!(
        "grid: {} x {} cells\nJ range: [{:.6e}, {:.6e}]\nbasis: {}",
        grid.alpha.len(),
        grid.beta.len(),
        lo,
        hi,
        basis_summary(&grid),
    );
    println!("wrote: {}", out.join(format!("{stem}.csv")).display());
    Ok(())
}

fn value_range(grid: &SurfaceGrid) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &grid.values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

fn basis_summary(grid: &SurfaceGrid) -> String {
    let snapshots: BTreeSet<usize> = grid
        .provenance
        .iter()
        .filter_map(|p| match p {
            BasisProvenance::Snapshot(i) => Some(*i),
            _ => None,
        })
        .collect();
    if snapshots.is_empty() {
        grid.provenance
            .first()
            .map(|p| p.label())
            .unwrap_or_default()
    } else {
        format!(
            "residual directions from {} distinct snapshots",
            snapshots.len()
        )
    }
}

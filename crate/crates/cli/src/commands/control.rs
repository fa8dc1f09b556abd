use std::path::PathBuf;

use clap::{Args, Subcommand};
use landscape_core::dynamics::{self, Spectrum, WalkConfig};
use landscape_core::model::BatchView;
use landscape_core::{export, model};

use crate::config::ExperimentConfig;
use crate::svg;

use super::{parse_float_list, parse_usize_list, write_text, CmdResult, Failure};

/// Synthetic baselines with known geometry.
#[derive(Subcommand, Debug)]
pub enum ControlCommand {
    /// Project Gaussian random walks onto their own chord.
    Walk(WalkArgs),
    /// Gradient descent on diagonal quadratic bowls.
    Quadratic(QuadraticArgs),
    /// The two-parameter factored objective (1 - uv)^2 on a grid.
    Heatmap(HeatmapArgs),
    /// Compare short gradient flow against its second-order step.
    Taylor(TaylorArgs),
}

#[derive(Args, Debug)]
pub struct WalkArgs {
    /// Comma-separated walk dimensions.
    #[arg(long, default_value = "1,10,100,1000")]
    pub dimensions: String,
    /// Steps per walk.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Step treated as the solution end of the chord.
    #[arg(long, default_value_t = 900)]
    pub solution_step: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct QuadraticArgs {
    #[arg(long, default_value_t = 100)]
    pub dimension: usize,
    /// iso:<value>, loguniform:<min>,<max>, or explicit:<v1>,<v2>,...
    #[arg(long, default_value = "loguniform:0.01,1.0")]
    pub spectrum: String,
    /// Comma-separated learning rates.
    #[arg(long, default_value = "0.1,0.5,1.0,1.9")]
    pub eps: String,
    /// Comma-separated momentum coefficients.
    #[arg(long, default_value = "0.0,0.9")]
    pub mu: String,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    /// Half-width of the square grid around the origin.
    #[arg(long, default_value_t = 3.0)]
    pub extent: f64,
    /// Grid points per axis (odd).
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TaylorArgs {
    /// Experiment config naming the model and data.
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated flow times, largest first.
    #[arg(long, default_value = "0.04,0.02,0.01,0.005")]
    pub times: String,
    /// Integration steps per flow.
    #[arg(long, default_value_t = 1000)]
    pub flow_steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cmd: &ControlCommand) -> CmdResult {
    match cmd {
        ControlCommand::Walk(args) => run_walk(args),
        ControlCommand::Quadratic(args) => run_quadratic(args),
        ControlCommand::Heatmap(args) => run_heatmap(args),
        ControlCommand::Taylor(args) => run_taylor(args),
    }
}

fn run_walk(args: &WalkArgs) -> CmdResult {
    let dimensions = parse_usize_list("--dimensions", &args.dimensions)?;
    if dimensions.is_empty() {
        return Err(Failure::usage("--dimensions is empty"));
    }

    let mut summary = String::from(
        "dimension,chord_length,max_beta,max_beta_over_chord,max_residual_ratio\n",
    );
    let mut cells = Vec::new();
    for &dim in &dimensions {
        let config = WalkConfig {
            dimension: dim,
            steps: args.steps,
            solution_step: args.solution_step,
            seed: args.seed,
        };
        let trace = dynamics::random_walk_trace(&config)?;
        let max_beta = trace.max_beta();
        let over_chord = max_beta / trace.chord_length;
        summary.push_str(&format!(
            "{dim},{},{},{},{}\n",
            export::fmt_f64(trace.chord_length),
            export::fmt_f64(max_beta),
            export::fmt_f64(over_chord),
            export::fmt_f64(trace.max_residual_ratio()),
        ));
        println!(
            "d={dim}: chord {:.4e}, max beta {:.4e} ({:.2}% of chord)",
            trace.chord_length,
            max_beta,
            100.0 * over_chord,
        );
        write_text(
            &args.out,
            &format!("walk_d{dim}.csv"),
            &export::trace_csv(&trace),
        )?;
        let points: Vec<(f64, f64)> = trace
            .points
            .iter()
            .map(|p| (p.step as f64, p.beta / trace.chord_length))
            .collect();
        let figure = svg::Figure::new(
            &format!("off-chord distance, d={dim}"),
            "step",
            "beta / chord length",
        );
        cells.push(svg::line_plot(&figure, &[svg::Series::line("", points)]));
    }
    write_text(&args.out, "walk_summary.csv", &summary)?;

    // One sub-plot per dimension, two columns wide.
    write_text(
        &args.out,
        "walks.svg",
        &svg::panel(&cells, 2.min(cells.len()).max(1), 640.0, 420.0),
    )?;
    println!("wrote: {}", args.out.join("walk_summary.csv").display());
    Ok(())
}

fn parse_spectrum(text: &str) -> Result<Spectrum, Failure> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| Failure::usage(format!("--spectrum '{text}' has no ':'")))?;
    let values = parse_float_list("--spectrum", rest)?;
    match (kind, values.as_slice()) {
        ("iso", [v]) => Ok(Spectrum::Isotropic(*v)),
        ("loguniform", [min, max]) => Ok(Spectrum::LogUniform {
            min: *min,
            max: *max,
        }),
        ("explicit", _) if !values.is_empty() => Ok(Spectrum::Explicit(values)),
        _ => Err(Failure::usage(format!(
            "--spectrum '{text}' not understood; use iso:<v>, loguniform:<min>,<max>, \
             or explicit:<v1>,<v2>,..."
        ))),
    }
}

fn run_quadratic(args: &QuadraticArgs) -> CmdResult {
    let spectrum = parse_spectrum(&args.spectrum)?;
    let eps = parse_float_list("--eps", &args.eps)?;
    let mus = parse_float_list("--mu", &args.mu)?;
    if eps.is_empty() || mus.is_empty() {
        return Err(Failure::usage("--eps and --mu must be non-empty"));
    }

    let mut summary =
        String::from("eps,mu,steps_run,diverged,final_objective,max_beta,max_alpha_hat\n");
    let mut series = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        for (j, &m) in mus.iter().enumerate() {
            let run = dynamics::quadratic_descent_trace(
                args.dimension,
                &spectrum,
                e,
                m,
                args.steps,
                args.seed,
            )?;
            let steps_run = run.objective.len() - 1;
            let diverged = run.trace.diverged_at.is_some();
            let final_objective = *run.objective.last().unwrap();
            let max_alpha_hat = run
                .trace
                .points
                .iter()
                .map(|p| p.alpha_hat)
                .fold(f64::NEG_INFINITY, f64::max);
            summary.push_str(&format!(
                "{},{},{steps_run},{},{},{},{}\n",
                export::fmt_f64(e),
                export::fmt_f64(m),
                diverged as u8,
                export::fmt_f64(final_objective),
                export::fmt_f64(run.trace.max_beta()),
                export::fmt_f64(max_alpha_hat),
            ));
            println!(
                "eps={e} mu={m}: {} after {steps_run} steps, J {:.4e}",
                if diverged { "diverged" } else { "converging" },
                final_objective,
            );

            let mut combo = String::from("step,J\n");
            for (step, &value) in run.objective.iter().enumerate() {
                combo.push_str(&format!("{step},{}\n", export::fmt_f64(value)));
            }
            write_text(&args.out, &format!("quadratic_e{i}_m{j}.csv"), &combo)?;

            let points: Vec<(f64, f64)> = run
                .objective
                .iter()
                .enumerate()
                .map(|(step, &value)| (step as f64, value))
                .collect();
            series.push(svg::Series::line(&format!("eps={e} mu={m}"), points));
        }
    }
    write_text(&args.out, "quadratic_summary.csv", &summary)?;

    let figure = svg::Figure::new("descent on a quadratic bowl", "step", "J").log_y();
    write_text(&args.out, "quadratic.svg", &svg::line_plot(&figure, &series))?;
    println!("wrote: {}", args.out.join("quadratic_summary.csv").display());
    Ok(())
}

fn run_heatmap(args: &HeatmapArgs) -> CmdResult {
    let grid = dynamics::heatmap_grid(args.extent, args.resolution)?;
    write_text(&args.out, "factored_heatmap.csv", &export::surface_csv(&grid))?;
    write_text(&args.out, "factored_heatmap.json", &export::surface_json(&grid))?;

    let figure = svg::Figure::new("(1 - uv)^2", "u", "v");
    let overlay: Vec<(f64, f64)> = grid.overlay.iter().map(|p| (p.a, p.b)).collect();
    write_text(
        &args.out,
        "factored_heatmap.svg",
        &svg::heatmap_plot(&figure, &grid.alpha, &grid.beta, &grid.values, &overlay, None),
    )?;

    // The line between the two minima (2, 0.5) and (0.5, 2) crosses a barrier
    // whose height has the closed form 81/256.
    let curve = dynamics::closed_form_interp((2.0, 0.5), (0.5, 2.0));
    let mut section = String::from("alpha,J\n");
    let mut barrier = f64::NEG_INFINITY;
    for i in 0..=400 {
        let alpha = i as f64 / 400.0;
        let value = curve.eval(alpha);
        barrier = barrier.max(value);
        section.push_str(&format!(
            "{},{}\n",
            export::fmt_f64(alpha),
            export::fmt_f64(value),
        ));
    }
    write_text(&args.out, "section_two_minima.csv", &section)?;

    println!(
        "grid: {0} x {0} cells\nbarrier between the two minima: {1:.8} (exactly 81/256)",
        args.resolution, barrier,
    );
    println!(
        "wrote: {}",
        args.out.join("factored_heatmap.csv").display()
    );
    Ok(())
}

fn run_taylor(args: &TaylorArgs) -> CmdResult {
    let config = ExperimentConfig::load(&args.config)?;
    let times = parse_float_list("--times", &args.times)?;
    if times.is_empty() {
        return Err(Failure::usage("--times is empty"));
    }

    let splits = config.data.build()?;
    let params = landscape_core::train::init_params(
        &config.spec,
        config.init_scale,
        config.train.seed,
    )?;
    let batch = BatchView {
        inputs: &splits.train.inputs,
        targets: &splits.train.targets,
    };
    let rows = dynamics::taylor_check(&config.spec, &params, batch, &times, args.flow_steps)?;

    write_text(&args.out, "taylor.csv", &export::taylor_csv(&rows))?;

    let g = model::grad(&config.spec, &params, batch)?;
    println!("gradient norm at the start point: {:.6e}", g.norm());
    println!("t,discrepancy,ratio_to_previous");
    let mut prev: Option<f64> = None;
    for row in &rows {
        let ratio = prev
            .map(|p| format!("{:.2}", p / row.discrepancy))
            .unwrap_or_else(|| "-".into());
        println!("{},{:.6e},{ratio}", row.t, row.discrepancy);
        prev = Some(row.discrepancy);
    }
    println!("wrote: {}", args.out.join("taylor.csv").display());
    Ok(())
}

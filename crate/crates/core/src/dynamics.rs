//! Synthetic systems whose geometry is known in closed form, for calibrating
//! the probes, plus a local check of how well a second-order model predicts
//! short-time gradient flow.
//!
//! Three controls: the two-weight factored model `J = (1 - w1 w2)^2` with
//! its saddle at the origin and a hyperbola of minima, unstructured Gaussian
//! random walks in high dimension, and gradient descent on diagonal
//! quadratic bowls. None of them involve a network; they pin down what the
//! chord projections and scans look like when the answer is known.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, BatchView, NetworkSpec};
use crate::params::ParamVector;
use crate::probe::{ChordProjector, ProjectionTrace};
use crate::surface::{BasisProvenance, SurfaceGrid, SurfacePoint};

/// `J(w1, w2) = (1 - w1 w2)^2`.
pub fn factored_cost(w1: f64, w2: f64) -> f64 {
    let r = 1.0 - w1 * w2;
    r * r
}

/// Gradient of [`factored_cost`]; exactly zero at the saddle (0, 0) and on
/// the hyperbola `w2 = 1 / w1`.
pub fn factored_grad(w1: f64, w2: f64) -> (f64, f64) {
    let r = 1.0 - w1 * w2;
    (-2.0 * w2 * r, -2.0 * w1 * r)
}

/// Quartic polynomial `c0 + c1 a + c2 a^2 + c3 a^3 + c4 a^4`.
#[derive(Debug, Clone, Copy)]
pub struct QuarticCurve {
    pub coefficients: [f64; 5],
}

impl QuarticCurve {
    pub fn eval(&self, alpha: f64) -> f64 {
        let c = &self.coefficients;
        (((c[4] * alpha + c[3]) * alpha + c[2]) * alpha + c[1]) * alpha + c[0]
    }
}

/// The factored cost along the segment from `a` to `b`, as an explicit
/// quartic in the interpolation coordinate.
pub fn closed_form_interp(a: (f64, f64), b: (f64, f64)) -> QuarticCurve {
    // The product of the interpolated weights is a quadratic
    // p(t) = p0 + p1 t + p2 t^2, and J = (1 - p)^2.
    let u = b.0 - a.0;
    let v = b.1 - a.1;
    let p0 = a.0 * a.1;
    let p1 = a.0 * v + a.1 * u;
    let p2 = u * v;
    QuarticCurve {
        coefficients: [
            1.0 - 2.0 * p0 + p0 * p0,
            -2.0 * p1 + 2.0 * p0 * p1,
            -2.0 * p2 + p1 * p1 + 2.0 * p0 * p2,
            2.0 * p1 * p2,
            p2 * p2,
        ],
    }
}

/// The factored cost tabulated over a symmetric (w1, w2) square, with the
/// two solution branches `w2 = 1 / w1` overlaid when they cross the window.
pub fn heatmap_grid(extent: f64, resolution: usize) -> Result<SurfaceGrid> {
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "heatmap extent must be positive, got {extent}"
        )));
    }
    if resolution < 3 || resolution % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "heatmap needs an odd resolution of at least 3, got {resolution}"
        )));
    }
    let axis = linalg::symmetric_linspace(extent, resolution);
    let mut values = Vec::with_capacity(resolution * resolution);
    for &w1 in &axis {
        for &w2 in &axis {
            values.push(factored_cost(w1, w2));
        }
    }

    // Hyperbola points stay inside the window only when extent > 1.
    let mut overlay = Vec::new();
    if extent > 1.0 {
        let m = 128;
        let lo = (1.0 / extent).ln();
        let hi = extent.ln();
        for k in 0..m {
            let w1 = (lo + (hi - lo) * (k as f64 / (m - 1) as f64)).exp();
            let w2 = 1.0 / w1;
            overlay.push(SurfacePoint {
                a: w1,
                b: w2,
                value: factored_cost(w1, w2),
            });
            overlay.push(SurfacePoint {
                a: -w1,
                b: -w2,
                value: factored_cost(-w1, -w2),
            });
        }
    }

    Ok(SurfaceGrid {
        alpha: axis.clone(),
        beta: axis,
        values,
        provenance: vec![BasisProvenance::Analytic; resolution],
        overlay,
        dir1: None,
        dir2: None,
    })
}

/// An unstructured Gaussian walk with one step declared the "solution".
#[derive(Debug, Clone, Copy)]
pub struct WalkConfig {
    pub dimension: usize,
    pub steps: usize,
    /// Step whose position becomes the chord end; later steps keep walking
    /// past it.
    pub solution_step: usize,
    pub seed: u64,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("walk dimension must be >= 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("walk needs at least one step".into()));
        }
        if self.solution_step == 0 || self.solution_step > self.steps {
            return Err(Error::InvalidArgument(format!(
                "solution step must lie in 1..={}, got {}",
                self.steps, self.solution_step
            )));
        }
        Ok(())
    }
}

/// Chord projection of a Gaussian random walk started at the origin, against
/// the chord from the origin to the walk's position at `solution_step`.
///
/// The walk is regenerated twice from the same stream instead of being
/// stored, so memory stays O(dimension). Both passes accumulate positions
/// with the same operation order, which makes the projection exact at the
/// endpoints: beta is bitwise zero at step 0 and at the solution step. In
/// one dimension every position lies on the chord, so beta is zero by
/// construction there too.
pub fn random_walk_trace(config: &WalkConfig) -> Result<ProjectionTrace> {
    config.validate()?;
    let d = config.dimension;

    // Pass 1: find the chord end.
    let mut rng = linalg::seeded_stream(config.seed, 0);
    let mut position = vec![0.0f64; d];
    let mut end = Vec::new();
    for step in 1..=config.steps {
        for slot in position.iter_mut() {
            *slot += linalg::standard_normal(&mut rng);
        }
        if step == config.solution_step {
            end = position.clone();
            break;
        }
    }

    let projector = ChordProjector::new(&vec![0.0; d], &end)?;

    // Pass 2: replay the stream and project every position.
    let mut rng = linalg::seeded_stream(config.seed, 0);
    let mut position = vec![0.0f64; d];
    let mut points = Vec::with_capacity(config.steps + 1);
    points.push(projector.project(0, &position));
    for step in 1..=config.steps {
        for slot in position.iter_mut() {
            *slot += linalg::standard_normal(&mut rng);
        }
        let mut p = projector.project(step, &position);
        if d == 1 {
            // A 1-D point is never off its own line; the projection residual
            // is pure rounding noise.
            p.beta = 0.0;
            p.residual_ratio = 0.0;
        }
        points.push(p);
    }

    Ok(ProjectionTrace {
        points,
        chord_length: projector.chord_length(),
        solution_point: Some(config.solution_step),
        diverged_at: None,
    })
}

/// Eigenvalue layout of a diagonal quadratic bowl `J = 0.5 sum l_k t_k^2`.
#[derive(Debug, Clone)]
pub enum Spectrum {
    /// Every eigenvalue equal.
    Isotropic(f64),
    /// Eigenvalues drawn log-uniformly from [min, max].
    LogUniform { min: f64, max: f64 },
    Explicit(Vec<f64>),
}

impl Spectrum {
    fn realize(&self, dim: usize, rng: &mut impl rand::Rng) -> Result<Vec<f64>> {
        let eigenvalues = match self {
            Spectrum::Isotropic(l) => vec![*l; dim],
            Spectrum::LogUniform { min, max } => {
                if !(*min > 0.0) || !(*max >= *min) || !max.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "log-uniform spectrum needs 0 < min <= max, got [{min}, {max}]"
                    )));
                }
                let (lo, hi) = (min.ln(), max.ln());
                (0..dim)
                    .map(|_| (lo + (hi - lo) * rng.gen::<f64>()).exp())
                    .collect()
            }
            Spectrum::Explicit(values) => {
                if values.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "spectrum has {} eigenvalues for dimension {dim}",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if eigenvalues.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(
                "quadratic bowl eigenvalues must be positive and finite".into(),
            ));
        }
        Ok(eigenvalues)
    }
}

/// Momentum gradient descent on a diagonal quadratic bowl, projected onto
/// the chord from the Gaussian start to the minimum at the origin.
#[derive(Debug, Clone)]
pub struct QuadraticTrace {
    pub trace: ProjectionTrace,
    /// `J` at every recorded point, index-aligned with the trace.
    pub objective: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Runs `steps` updates of `v = mu v - eps (l . t); t = t + v` from a seeded
/// Gaussian start. Iterates whose norm exceeds 1e6 times the start norm mark
/// the trace as diverged; the offending point is kept and iteration stops.
pub fn quadratic_descent_trace(
    dim: usize,
    spectrum: &Spectrum,
    learning_rate: f64,
    momentum: f64,
    steps: usize,
    seed: u64,
) -> Result<QuadraticTrace> {
    if dim == 0 {
        return Err(Error::InvalidArgument("bowl dimension must be >= 1".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    if !(learning_rate > 0.0) || !learning_rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::InvalidArgument(format!(
            "momentum must lie in [0, 1), got {momentum}"
        )));
    }
    let eigenvalues = spectrum.realize(dim, &mut linalg::seeded_stream(seed, 0))?;
    let start = linalg::normal_vec(&mut linalg::seeded_stream(seed, 1), dim);
    let start_norm = linalg::norm(&start);
    let limit = 1e6 * start_norm;

    let objective_of = |theta: &[f64]| -> f64 {
        let mut j = 0.0;
        for k in 0..dim {
            j += 0.5 * eigenvalues[k] * theta[k] * theta[k];
        }
        j
    };

    let projector = ChordProjector::new(&start, &vec![0.0; dim])?;
    let mut theta = start.clone();
    let mut velocity = vec![0.0f64; dim];
    let mut points = vec![projector.project(0, &theta)];
    let mut objective = vec![objective_of(&theta)];
    let mut diverged_at = None;

    for step in 1..=steps {
        for k in 0..dim {
            velocity[k] = momentum * velocity[k] - learning_rate * eigenvalues[k] * theta[k];
            theta[k] += velocity[k];
        }
        points.push(projector.project(step, &theta));
        objective.push(objective_of(&theta));
        if linalg::norm(&theta) > limit {
            diverged_at = Some(step);
            break;
        }
    }

    Ok(QuadraticTrace {
        trace: ProjectionTrace {
            points,
            chord_length: projector.chord_length(),
            solution_point: None,
            diverged_at,
        },
        objective,
        eigenvalues,
    })
}

/// Integrates gradient flow `d theta / ds = -grad J` for time `t` with
/// classical fourth-order Runge-Kutta in `steps` equal steps.
pub fn gradient_flow(
    spec: &NetworkSpec,
    params: &ParamVector,
    view: BatchView<'_>,
    t: f64,
    steps: usize,
) -> Result<ParamVector> {
    if steps == 0 {
        return Err(Error::InvalidArgument("flow needs at least one step".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "flow time must be non-negative, got {t}"
        )));
    }
    let h = t / steps as f64;
    let n = params.len();
    let mut theta = params.clone();
    let deriv = |p: &ParamVector| -> Result<Vec<f64>> {
        Ok(model::grad(spec, p, view)?.values().iter().map(|g| -g).collect())
    };
    let offset = |p: &ParamVector, scale: f64, k: &[f64]| -> Result<ParamVector> {
        let values = (0..n).map(|i| p.values()[i] + scale * k[i]).collect();
        ParamVector::from_values(p.manifest().clone(), values)
    };
    for _ in 0..steps {
        let k1 = deriv(&theta)?;
        let k2 = deriv(&offset(&theta, 0.5 * h, &k1)?)?;
        let k3 = deriv(&offset(&theta, 0.5 * h, &k2)?)?;
        let k4 = deriv(&offset(&theta, h, &k3)?)?;
        let values = (0..n)
            .map(|i| theta.values()[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        theta = ParamVector::from_values(theta.manifest().clone(), values)?;
    }
    Ok(theta)
}

/// How far the second-order prediction
/// `theta - t g + 0.5 t^2 H g` lands from integrated gradient flow at the
/// same time, together with the first- and second-order step lengths.
#[derive(Debug, Clone, Copy)]
pub struct TaylorRow {
    pub t: f64,
    /// `| prediction - flow |`.
    pub discrepancy: f64,
    /// `| t g |`.
    pub first_order_step: f64,
    /// `| -t g + 0.5 t^2 H g |`.
    pub second_order_step: f64,
}

/// Evaluates the second-order flow prediction at each time in `ts`,
/// integrating the reference flow with `flow_steps` Runge-Kutta steps per
/// time. The discrepancy shrinks like t^3, so halving t should divide it by
/// about eight.
pub fn taylor_check(
    spec: &NetworkSpec,
    params: &ParamVector,
    view: BatchView<'_>,
    ts: &[f64],
    flow_steps: usize,
) -> Result<Vec<TaylorRow>> {
    if ts.is_empty() {
        return Err(Error::InvalidArgument("no times to check".into()));
    }
    for &t in ts {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "flow times must be positive, got {t}"
            )));
        }
    }
    let g = model::grad(spec, params, view)?;
    let hg = model::hvp(spec, params, &g, view)?;
    let n = params.len();

    ts.iter()
        .map(|&t| -> Result<TaylorRow> {
            let mut first_sq = 0.0;
            let mut second_sq = 0.0;
            let mut predicted = Vec::with_capacity(n);
            for i in 0..n {
                let first = -t * g.values()[i];
                let second = first + 0.5 * t * t * hg.values()[i];
                first_sq += first * first;
                second_sq += second * second;
                predicted.push(params.values()[i] + second);
            }
            let flowed = gradient_flow(spec, params, view, t, flow_steps)?;
            let mut gap_sq = 0.0;
            for i in 0..n {
                let gap = predicted[i] - flowed.values()[i];
                gap_sq += gap * gap;
            }
            Ok(TaylorRow {
                t,
                discrepancy: gap_sq.sqrt(),
                first_order_step: first_sq.sqrt(),
                second_order_step: second_sq.sqrt(),
            })
        })
        .collect()
}

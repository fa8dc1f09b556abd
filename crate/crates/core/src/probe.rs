//! Straight-line probes of the objective and chord projections of whole
//! trajectories.
//!
//! The basic object is the segment `p(alpha) = (1 - alpha) a + alpha b`
//! between two parameter vectors; curves evaluate the total objective along
//! it (alpha may run outside [0, 1] to look past either endpoint). A
//! trajectory projects onto the chord from its initial point to its solution:
//! `alpha_hat(t)` is the normalised position of snapshot t along the chord
//! and `beta(t)` the Euclidean distance off it. Both are exactly zero at the
//! start, and `beta` is exactly zero at the solution, because the projection
//! coefficient is computed from the same fixed-order sums that define the
//! chord.

use rayon::prelude::*;

use crate::data::Splits;
use crate::error::{Error, Result};
use crate::linalg::{self, project_onto_chord};
use crate::model::{self, NetworkSpec, Targets};
use crate::params::ParamVector;
use crate::train::TrajectoryRecord;

/// Objective values along one line through parameter space.
#[derive(Debug, Clone)]
pub struct InterpolationCurve {
    pub alphas: Vec<f64>,
    /// Total train objective at each alpha.
    pub train: Vec<f64>,
    /// Total validation objective, when a validation split exists.
    pub valid: Option<Vec<f64>>,
    /// Train classification error at each alpha, when targets are labels.
    pub error_rate: Option<Vec<f64>>,
    /// Human-readable descriptions of the two endpoints.
    pub endpoints: (String, String),
}

/// Point on the segment between `a` and `b`. `alpha` 0 and 1 return exact
/// clones of the endpoints; other values may extrapolate past them.
pub fn interp_point(a: &ParamVector, b: &ParamVector, alpha: f64) -> Result<ParamVector> {
    a.manifest()
        .check_same(b.manifest(), "interpolation endpoints")?;
    if alpha == 0.0 {
        return Ok(a.clone());
    }
    if alpha == 1.0 {
        return Ok(b.clone());
    }
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (1.0 - alpha) * x + alpha * y)
        .collect();
    ParamVector::from_values(a.manifest().clone(), values)
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    for w in alphas.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!(
                "alpha grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Evaluates the objective along the segment from `a` to `b` at every grid
/// alpha. Independent alphas evaluate in parallel; results are assembled in
/// grid order, so the output never depends on thread count.
pub fn interp_curve(
    spec: &NetworkSpec,
    splits: &Splits,
    a: &ParamVector,
    b: &ParamVector,
    alphas: &[f64],
) -> Result<InterpolationCurve> {
    check_grid(alphas)?;
    a.manifest()
        .check_same(b.manifest(), "interpolation endpoints")?;
    let labelled = matches!(splits.train.targets, Targets::Labels { .. });

    struct Row {
        train: f64,
        valid: Option<f64>,
        err: Option<f64>,
    }
    let rows: Vec<Row> = alphas
        .par_iter()
        .map(|&alpha| -> Result<Row> {
            let wrap = |e: Error| Error::CurveEval {
                alpha,
                source: Box::new(e),
            };
            let point = interp_point(a, b, alpha).map_err(wrap)?;
            let train = model::loss_total(spec, &point, splits.train.view())
                .map_err(wrap)?
                .sum;
            let valid = match &splits.valid {
                Some(v) => Some(model::loss_total(spec, &point, v.view()).map_err(wrap)?.sum),
                None => None,
            };
            let err = if labelled {
                Some(model::error_rate(spec, &point, splits.train.view()).map_err(wrap)?)
            } else {
                None
            };
            Ok(Row { train, valid, err })
        })
        .collect::<Result<Vec<Row>>>()?;

    Ok(InterpolationCurve {
        alphas: alphas.to_vec(),
        train: rows.iter().map(|r| r.train).collect(),
        valid: rows[0].valid.map(|_| rows.iter().map(|r| r.valid.unwrap()).collect()),
        error_rate: rows[0].err.map(|_| rows.iter().map(|r| r.err.unwrap()).collect()),
        endpoints: ("point-a".into(), "point-b".into()),
    })
}

/// The four stock alpha grids: a coarse and a fine tiling of [0, 1] plus
/// dense zooms into the first and last percent.
pub fn standard_grids() -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("coarse-50", linalg::linspace(0.0, 1.0, 50)),
        ("fine-200", linalg::linspace(0.0, 1.0, 200)),
        ("zoom-start-200", linalg::linspace(0.0, 0.01, 200)),
        ("zoom-end-200", linalg::linspace(0.99, 1.0, 200)),
    ]
}

pub fn grid_by_name(name: &str) -> Option<Vec<f64>> {
    standard_grids()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, g)| g)
}

/// Objective along the line between the solutions of two independent runs of
/// the same network. Both records and the passed spec must agree on the
/// model digest.
pub fn two_solution_curve(
    spec: &NetworkSpec,
    splits: &Splits,
    run_a: &TrajectoryRecord,
    run_b: &TrajectoryRecord,
    alphas: &[f64],
) -> Result<InterpolationCurve> {
    let digest = spec.digest();
    for (name, record) in [("first", run_a), ("second", run_b)] {
        if record.spec_digest() != digest {
            return Err(Error::DigestMismatch(
                format!("{name} record: {}", record.spec_digest()),
                digest,
            ));
        }
    }
    let mut curve = interp_curve(spec, splits, run_a.solution(), run_b.solution(), alphas)?;
    curve.endpoints = (
        format!("solution-a(epoch {})", run_a.snapshots()[run_a.solution_index()].epoch),
        format!("solution-b(epoch {})", run_b.snapshots()[run_b.solution_index()].epoch),
    );
    Ok(curve)
}

/// Objective along the line from a random Gaussian point to the record's
/// solution. The random endpoint is rescaled to `norm_scale` times the
/// solution norm; zero is allowed and pins the endpoint to the origin.
pub fn random_point_curve(
    spec: &NetworkSpec,
    splits: &Splits,
    record: &TrajectoryRecord,
    norm_scale: f64,
    seed: u64,
    alphas: &[f64],
) -> Result<InterpolationCurve> {
    if !(norm_scale >= 0.0) || !norm_scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "norm scale must be non-negative, got {norm_scale}"
        )));
    }
    let solution = record.solution();
    let mut rng = linalg::seeded_stream(seed, 0);
    let direction = linalg::normal_vec(&mut rng, solution.len());
    let d_norm = linalg::norm(&direction);
    if d_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "random direction degenerated to zero".into(),
        ));
    }
    let factor = norm_scale * solution.norm() / d_norm;
    let start = ParamVector::from_values(
        solution.manifest().clone(),
        direction.iter().map(|v| factor * v).collect(),
    )?;
    let mut curve = interp_curve(spec, splits, &start, solution, alphas)?;
    curve.endpoints = (
        format!("random(seed {seed}, scale {norm_scale})"),
        format!("solution(epoch {})", record.snapshots()[record.solution_index()].epoch),
    );
    Ok(curve)
}

/// One trajectory snapshot in chord coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionPoint {
    /// Epoch for training records, step index for synthetic traces.
    pub step: usize,
    /// Distance along the chord, in parameter units.
    pub alpha: f64,
    /// Position along the chord normalised so the solution sits at 1.
    pub alpha_hat: f64,
    /// Euclidean distance off the chord.
    pub beta: f64,
    pub theta_norm: f64,
    /// `beta / |theta|`; zero when theta itself is the origin.
    pub residual_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ProjectionTrace {
    pub points: Vec<ProjectionPoint>,
    /// Euclidean length of the chord from start to solution.
    pub chord_length: f64,
    /// Index into `points` of the chord's far end, when the trace itself
    /// contains that point.
    pub solution_point: Option<usize>,
    /// Step at which iteration blew up, for traces that diverged.
    pub diverged_at: Option<usize>,
}

impl ProjectionTrace {
    pub fn max_beta(&self) -> f64 {
        self.points.iter().map(|p| p.beta).fold(0.0, f64::max)
    }

    pub fn max_residual_ratio(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.residual_ratio)
            .fold(0.0, f64::max)
    }
}

/// Projects points onto the chord between two fixed vectors. Construction
/// fails when the chord has zero length.
pub struct ChordProjector {
    start: Vec<f64>,
    d: Vec<f64>,
    d_dot_d: f64,
    d_norm: f64,
}

impl ChordProjector {
    pub fn new(start: &[f64], end: &[f64]) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::InvalidArgument(
                "chord endpoints have different lengths".into(),
            ));
        }
        let d: Vec<f64> = (0..start.len()).map(|i| end[i] - start[i]).collect();
        let d_dot_d = linalg::dot(&d, &d);
        if d_dot_d == 0.0 {
            return Err(Error::DegenerateTrajectory(
                "initial and final points coincide".into(),
            ));
        }
        Ok(ChordProjector {
            start: start.to_vec(),
            d,
            d_dot_d,
            d_norm: d_dot_d.sqrt(),
        })
    }

    pub fn chord_length(&self) -> f64 {
        self.d_norm
    }

    pub fn project(&self, step: usize, x: &[f64]) -> ProjectionPoint {
        let (c, beta, _) = project_onto_chord(x, &self.start, &self.d, self.d_dot_d);
        let theta_norm = linalg::norm(x);
        ProjectionPoint {
            step,
            alpha: c * self.d_norm,
            alpha_hat: c,
            beta,
            theta_norm,
            residual_ratio: if theta_norm > 0.0 { beta / theta_norm } else { 0.0 },
        }
    }

    /// Off-chord residual of `x`, and its norm.
    pub fn residual(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let (_, beta, r) = project_onto_chord(x, &self.start, &self.d, self.d_dot_d);
        (r, beta)
    }
}

/// Chord coordinates of every snapshot in a training record, against the
/// chord from the initial parameters to the solution.
pub fn projection_trace(record: &TrajectoryRecord) -> Result<ProjectionTrace> {
    let projector = ChordProjector::new(record.initial().values(), record.solution().values())?;
    let points = record
        .snapshots()
        .iter()
        .map(|s| projector.project(s.epoch, s.params.values()))
        .collect();
    Ok(ProjectionTrace {
        points,
        chord_length: projector.chord_length(),
        solution_point: Some(record.solution_index()),
        diverged_at: None,
    })
}

/// A local extremum of a curve, with how far it pokes out.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub alpha: f64,
    pub value: f64,
    /// Height above both endpoints for barriers; depth below both
    /// neighbouring walls for interior minima.
    pub magnitude: f64,
}

/// Monotonicity audit of one curve.
#[derive(Debug, Clone)]
pub struct BumpReport {
    pub tolerance: f64,
    /// Consecutive increases larger than the tolerance.
    pub upward_count: usize,
    /// Sum of those increases.
    pub upward_mass: f64,
    pub max_upward: f64,
    /// Interior maxima rising above both curve endpoints.
    pub barriers: Vec<Bump>,
    /// Interior minima deeper than the tolerance.
    pub interior_minima: Vec<Bump>,
}

/// Scans a curve for departures from monotone decrease. The default
/// tolerance is 1e-6 of the curve's value range; plateaus are treated as one
/// extremum at their left edge.
pub fn bump_report(alphas: &[f64], values: &[f64], tolerance: Option<f64>) -> Result<BumpReport> {
    if alphas.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} alphas but {} values",
            alphas.len(),
            values.len()
        )));
    }
    check_grid(alphas)?;
    if alphas.len() < 2 {
        return Err(Error::InvalidArgument(
            "bump analysis needs at least two points".into(),
        ));
    }
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tolerance = tolerance.unwrap_or(1e-6 * (hi - lo));

    let mut upward_count = 0usize;
    let mut upward_mass = 0.0;
    let mut max_upward = 0.0f64;
    for w in values.windows(2) {
        let rise = w[1] - w[0];
        if rise > tolerance {
            upward_count += 1;
            upward_mass += rise;
            max_upward = max_upward.max(rise);
        }
    }

    let n = values.len();
    let endpoint_max = values[0].max(values[n - 1]);
    let mut barriers = Vec::new();
    let mut interior_minima = Vec::new();
    let mut s = 1usize;
    while s < n - 1 {
        // Maximal run of equal values starting at s.
        let mut e = s;
        while e + 1 < n && values[e + 1] == values[s] {
            e += 1;
        }
        if e < n - 1 {
            let v = values[s];
            let (left, right) = (values[s - 1], values[e + 1]);
            if v > left && v > right {
                let height = v - endpoint_max;
                if height > tolerance {
                    barriers.push(Bump {
                        alpha: alphas[s],
                        value: v,
                        magnitude: height,
                    });
                }
            } else if v < left && v < right {
                let depth = left.min(right) - v;
                if depth > tolerance {
                    interior_minima.push(Bump {
                        alpha: alphas[s],
                        value: v,
                        magnitude: depth,
                    });
                }
            }
        }
        s = e + 1;
    }

    Ok(BumpReport {
        tolerance,
        upward_count,
        upward_mass,
        max_upward,
        barriers,
        interior_minima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_scalar_regression, DataConfig, SourceConfig};
    use crate::model::scalar_factored_spec;
    use crate::train::{Snapshot, TrainConfig, TrajectoryRecord};
    use proptest::prelude::*;

    fn scalar_splits() -> Splits {
        Splits::from_whole(gen_scalar_regression())
    }

    fn scalar_record(snapshots: Vec<(usize, Vec<f64>)>, solution_index: usize) -> TrajectoryRecord {
        let spec = scalar_factored_spec();
        let manifest = spec.manifest();
        let last_epoch = snapshots.last().unwrap().0;
        let snaps: Vec<Snapshot> = snapshots
            .into_iter()
            .map(|(epoch, values)| Snapshot {
                epoch,
                params: ParamVector::from_values(manifest.clone(), values).unwrap(),
            })
            .collect();
        TrajectoryRecord::new(
            spec,
            DataConfig {
                source: SourceConfig::ScalarRegression,
                fractions: (1.0, 0.0, 0.0),
                split_seed: 0,
            },
            TrainConfig::default(),
            snaps,
            solution_index,
            (0..=last_epoch).map(|e| 1.0 / (e + 1) as f64).collect(),
            None,
        )
        .unwrap()
    }

    fn pv(values: Vec<f64>) -> ParamVector {
        ParamVector::from_values(scalar_factored_spec().manifest(), values).unwrap()
    }

    #[test]
    fn endpoints_come_back_as_exact_clones() {
        let a = pv(vec![0.1234567890123, -7.5]);
        let b = pv(vec![2.718281828, 0.333333333333]);
        assert_eq!(interp_point(&a, &b, 0.0).unwrap().values(), a.values());
        assert_eq!(interp_point(&a, &b, 1.0).unwrap().values(), b.values());
    }

    #[test]
    fn mismatched_endpoints_are_rejected() {
        let a = pv(vec![0.0, 0.0]);
        let other = crate::model::build_deep_linear_chain(&[2, 1]).unwrap();
        let b = ParamVector::zeros(other.manifest());
        assert!(matches!(
            interp_point(&a, &b, 0.5),
            Err(Error::ManifestMismatch(_))
        ));
    }

    #[test]
    fn scalar_curve_matches_the_closed_form() {
        // Between (0, 0) and (1, 1) the interpolated weights are (alpha,
        // alpha), so the objective is (1 - alpha^2)^2.
        let spec = scalar_factored_spec();
        let splits = scalar_splits();
        let grid = linalg::linspace(0.0, 1.0, 201);
        let curve = interp_curve(&spec, &splits, &pv(vec![0.0, 0.0]), &pv(vec![1.0, 1.0]), &grid)
            .unwrap();
        assert_eq!(curve.train[0], 1.0);
        assert_eq!(curve.train[200], 0.0);
        assert_eq!(curve.train[100], 0.5625);
        for (i, &alpha) in grid.iter().enumerate() {
            let p = alpha * alpha;
            let expected = (1.0 - p) * (1.0 - p);
            assert!(
                (curve.train[i] - expected).abs() <= 1e-12,
                "alpha {alpha}: {} vs {expected}",
                curve.train[i]
            );
        }
        assert!(curve.valid.is_none());
        assert!(curve.error_rate.is_none());
    }

    #[test]
    fn extrapolation_past_the_endpoints_is_allowed() {
        let spec = scalar_factored_spec();
        let splits = scalar_splits();
        let grid = vec![-0.5, 0.0, 1.0, 1.5];
        let curve = interp_curve(&spec, &splits, &pv(vec![0.0, 0.0]), &pv(vec![1.0, 1.0]), &grid)
            .unwrap();
        assert_eq!(curve.train[0], 0.5625);
        assert_eq!(curve.train[3], (1.0 - 2.25) * (1.0 - 2.25));
    }

    #[test]
    fn non_increasing_grid_is_rejected() {
        let spec = scalar_factored_spec();
        let splits = scalar_splits();
        let a = pv(vec![0.0, 0.0]);
        let b = pv(vec![1.0, 1.0]);
        assert!(interp_curve(&spec, &splits, &a, &b, &[0.0, 0.0]).is_err());
        assert!(interp_curve(&spec, &splits, &a, &b, &[0.5, 0.2]).is_err());
        assert!(interp_curve(&spec, &splits, &a, &b, &[]).is_err());
    }

    #[test]
    fn curve_endpoint_values_match_direct_evaluation_bitwise() {
        let spec = scalar_factored_spec();
        let splits = scalar_splits();
        let a = pv(vec![0.137, -0.482]);
        let b = pv(vec![1.9, 0.526]);
        let grid = linalg::linspace(0.0, 1.0, 50);
        let curve = interp_curve(&spec, &splits, &a, &b, &grid).unwrap();
        let ja = model::loss_total(&spec, &a, splits.train.view()).unwrap().sum;
        let jb = model::loss_total(&spec, &b, splits.train.view()).unwrap().sum;
        assert_eq!(curve.train[0], ja);
        assert_eq!(curve.train[49], jb);
    }

    #[test]
    fn standard_grids_cover_the_documented_ranges() {
        let grids = standard_grids();
        assert_eq!(grids.len(), 4);
        let by_name: std::collections::BTreeMap<&str, &Vec<f64>> =
            grids.iter().map(|(n, g)| (*n, g)).collect();
        let coarse = by_name["coarse-50"];
        assert_eq!((coarse.len(), coarse[0], coarse[49]), (50, 0.0, 1.0));
        let fine = by_name["fine-200"];
        assert_eq!((fine.len(), fine[0], fine[199]), (200, 0.0, 1.0));
        let zs = by_name["zoom-start-200"];
        assert_eq!((zs.len(), zs[0], zs[199]), (200, 0.0, 0.01));
        let ze = by_name["zoom-end-200"];
        assert_eq!((ze.len(), ze[0], ze[199]), (200, 0.99, 1.0));
        assert!(grid_by_name("coarse-50").is_some());
        assert!(grid_by_name("bogus").is_none());
    }

    #[test]
    fn two_solution_curve_finds_the_known_barrier() {
        // Both endpoints sit on the solution hyperbola w2 = 1/w1; halfway
        // between (2, 0.5) and (0.5, 2) the product is 1.5625, so the
        // objective peaks at 0.5625^2 = 0.31640625 exactly.
        let run_a = scalar_record(vec![(0, vec![0.1, 0.1]), (1, vec![2.0, 0.5])], 1);
        let run_b = scalar_record(vec![(0, vec![0.2, 0.2]), (1, vec![0.5, 2.0])], 1);
        let spec = scalar_factored_spec();
        let splits = scalar_splits();
        let grid = linalg::linspace(0.0, 1.0, 201);
        let curve = two_solution_curve(&spec, &splits, &run_a, &run_b, &grid).unwrap();
        assert_eq!(curve.train[0], 0.0);
        assert_eq!(curve.train[200], 0.0);
        assert_eq!(curve.train[100], 0.31640625);
        let report = bump_report(&curve.alphas, &curve.train, None).unwrap();
        assert_eq!(report.barriers.len(), 1);
        assert!((report.barriers[0].magnitude - 0.31640625).abs() <= 1e-12);
        assert_eq!(report.barriers[0].alpha, 0.5);
    }

    #[test]
    fn two_solution_curve_requires_matching_digests() {
        let run_a = scalar_record(vec![(0, vec![0.1, 0.1]), (1, vec![2.0, 0.5])], 1);
        let other_spec = crate::model::build_deep_linear_chain(&[1, 2, 1]).unwrap();
        let other = TrajectoryRecord::new(
            other_spec.clone(),
            DataConfig {
                source: SourceConfig::ScalarRegression,
                fractions: (1.0, 0.0, 0.0),
                split_seed: 0,
            },
            TrainConfig::default(),
            vec![Snapshot {
                epoch: 0,
                params: ParamVector::zeros(other_spec.manifest()),
            }],
            0,
            vec![1.0],
            None,
        )
        .unwrap();
        let spec = scalar_factored_spec();
        let splits = scalar_splits();
        let grid = linalg::linspace(0.0, 1.0, 5);
        assert!(matches!(
            two_solution_curve(&spec, &splits, &run_a, &other, &grid),
            Err(Error::DigestMismatch(_, _))
        ));
    }

    #[test]
    fn random_start_scales_to_the_requested_norm() {
        let record = scalar_record(vec![(0, vec![0.1, 0.1]), (1, vec![2.0, 0.5])], 1);
        let spec = scalar_factored_spec();
        let splits = scalar_splits();
        let grid = linalg::linspace(0.0, 1.0, 5);
        for &scale in &[0.5, 1.0, 2.0] {
            let curve =
                random_point_curve(&spec, &splits, &record, scale, 11, &grid).unwrap();
            // Rebuild the start from the same seed and check its norm.
            let mut rng = linalg::seeded_stream(11, 0);
            let dir = linalg::normal_vec(&mut rng, 2);
            let f = scale * record.solution().norm() / linalg::norm(&dir);
            let start = [f * dir[0], f * dir[1]];
            let j0 = {
                let p = pv(start.to_vec());
                model::loss_total(&spec, &p, splits.train.view()).unwrap().sum
            };
            assert_eq!(curve.train[0], j0);
            let want = scale * record.solution().norm();
            assert!((linalg::norm(&start) - want).abs() <= 1e-12 * want.max(1.0));
        }
        // Zero scale pins the start to the origin: J(0) = 1 on this model.
        let curve = random_point_curve(&spec, &splits, &record, 0.0, 11, &grid).unwrap();
        assert_eq!(curve.train[0], 1.0);
        assert!(random_point_curve(&spec, &splits, &record, -1.0, 11, &grid).is_err());
    }

    #[test]
    fn projection_coordinates_on_a_hand_worked_triangle() {
        // Chord (0,0) -> (2,0); the middle snapshot (1,2) sits 2 off it.
        let record = scalar_record(
            vec![(0, vec![0.0, 0.0]), (1, vec![1.0, 2.0]), (2, vec![2.0, 0.0])],
            2,
        );
        let trace = projection_trace(&record).unwrap();
        assert_eq!(trace.chord_length, 2.0);
        assert_eq!(trace.solution_point, Some(2));

        let p0 = trace.points[0];
        assert_eq!((p0.alpha, p0.alpha_hat, p0.beta), (0.0, 0.0, 0.0));
        assert_eq!(p0.residual_ratio, 0.0);

        let p1 = trace.points[1];
        assert_eq!(p1.alpha_hat, 0.5);
        assert_eq!(p1.alpha, 1.0);
        // Euclidean distance, not its square.
        assert_eq!(p1.beta, 2.0);
        assert!((p1.residual_ratio - 2.0 / 5.0f64.sqrt()).abs() < 1e-15);

        let p2 = trace.points[2];
        assert_eq!((p2.alpha_hat, p2.beta), (1.0, 0.0));
        assert_eq!(p2.alpha, 2.0);
    }

    #[test]
    fn degenerate_chord_is_an_error() {
        let record = scalar_record(vec![(0, vec![0.3, 0.4]), (1, vec![0.3, 0.4])], 1);
        assert!(matches!(
            projection_trace(&record),
            Err(Error::DegenerateTrajectory(_))
        ));
    }

    proptest! {
        /// |x - start|^2 decomposes into alpha^2 + beta^2 within 1e-9
        /// relative, in any dimension.
        #[test]
        fn projection_satisfies_the_norm_identity(
            dim in 2usize..10,
            seed in 0u64..500,
        ) {
            let mut rng = linalg::seeded_stream(seed, 3);
            let start = linalg::normal_vec(&mut rng, dim);
            let end = linalg::normal_vec(&mut rng, dim);
            let x = linalg::normal_vec(&mut rng, dim);
            let proj = ChordProjector::new(&start, &end);
            prop_assume!(proj.is_ok());
            let proj = proj.unwrap();
            let p = proj.project(0, &x);
            let diff_sq: f64 = (0..dim).map(|i| (x[i] - start[i]) * (x[i] - start[i])).sum();
            let decomposed = p.alpha * p.alpha + p.beta * p.beta;
            prop_assert!(
                (diff_sq - decomposed).abs() <= 1e-9 * diff_sq.max(1e-12),
                "{diff_sq} vs {decomposed}"
            );
        }

        /// Rotating everything by a plane rotation leaves beta unchanged (it
        /// is a Euclidean distance) within 1e-9.
        #[test]
        fn beta_is_rotation_invariant(
            dim in 2usize..8,
            seed in 0u64..200,
            angle in 0.1f64..3.0,
        ) {
            let mut rng = linalg::seeded_stream(seed, 4);
            let start = linalg::normal_vec(&mut rng, dim);
            let end = linalg::normal_vec(&mut rng, dim);
            let x = linalg::normal_vec(&mut rng, dim);
            let rotate = |v: &[f64]| {
                let mut out = v.to_vec();
                let (s, c) = angle.sin_cos();
                out[0] = c * v[0] - s * v[1];
                out[1] = s * v[0] + c * v[1];
                out
            };
            let proj = ChordProjector::new(&start, &end);
            prop_assume!(proj.is_ok());
            let before = proj.unwrap().project(0, &x);
            let after = ChordProjector::new(&rotate(&start), &rotate(&end))
                .unwrap()
                .project(0, &rotate(&x));
            prop_assert!(
                (before.beta - after.beta).abs() <= 1e-9 * before.beta.max(1e-9),
                "{} vs {}",
                before.beta,
                after.beta
            );
        }
    }

    #[test]
    fn bump_report_on_a_single_spike() {
        let report = bump_report(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0], None).unwrap();
        assert_eq!(report.upward_count, 1);
        assert_eq!(report.upward_mass, 1.0);
        assert_eq!(report.max_upward, 1.0);
        assert_eq!(report.barriers.len(), 1);
        assert_eq!(report.barriers[0].value, 1.0);
        assert_eq!(report.barriers[0].magnitude, 1.0);
        assert!(report.interior_minima.is_empty());
    }

    #[test]
    fn monotone_curves_report_nothing() {
        let alphas = linalg::linspace(0.0, 1.0, 20);
        let values: Vec<f64> = alphas.iter().map(|a| 2.0 - a).collect();
        let report = bump_report(&alphas, &values, None).unwrap();
        assert_eq!(report.upward_count, 0);
        assert_eq!(report.upward_mass, 0.0);
        assert!(report.barriers.is_empty());
        assert!(report.interior_minima.is_empty());
    }

    #[test]
    fn plateau_minimum_is_one_dip_with_full_depth() {
        let report = bump_report(
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            &[2.0, 0.5, 0.5, 1.5, 1.0],
            None,
        )
        .unwrap();
        assert_eq!(report.interior_minima.len(), 1);
        assert_eq!(report.interior_minima[0].alpha, 0.25);
        assert_eq!(report.interior_minima[0].magnitude, 1.0);
        // The rise out of the dip counts as upward mass but is no barrier:
        // 1.5 sits below the left endpoint.
        assert_eq!(report.upward_count, 1);
        assert!(report.barriers.is_empty());
    }

    #[test]
    fn ripple_below_tolerance_is_ignored() {
        let alphas = linalg::linspace(0.0, 1.0, 5);
        let values = vec![1.0, 0.6, 0.600000001, 0.3, 0.0];
        let report = bump_report(&alphas, &values, None).unwrap();
        assert_eq!(report.upward_count, 0);
        assert!(report.interior_minima.is_empty());
        let strict = bump_report(&alphas, &values, Some(0.0)).unwrap();
        assert_eq!(strict.upward_count, 1);
    }
}

//! Two-coordinate scans of the objective around a trajectory.
//!
//! The main scan keeps the chord from the initial point to the solution as
//! its first axis and, for each grid alpha, steps off the chord along the
//! unit residual direction of the nearest snapshot. Columns therefore come
//! from different 1-D subspaces; the `provenance` field records which
//! snapshot supplied each one. Two controls replace the residual directions
//! with fixed random ones: a random plane through the solution, and the
//! chord paired with a single random orthogonal direction (a genuine 2-D
//! subspace).

use rayon::prelude::*;

use crate::data::Splits;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, NetworkSpec};
use crate::params::ParamVector;
use crate::probe::{interp_point, ChordProjector};
use crate::train::TrajectoryRecord;

/// Where the off-chord direction of one grid column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisProvenance {
    /// Unit residual of this snapshot index.
    Snapshot(usize),
    /// A seeded random direction shared by the whole grid.
    FixedRandom,
    /// The grid axes are the model's own coordinates.
    Analytic,
}

impl BasisProvenance {
    pub fn label(&self) -> String {
        match self {
            BasisProvenance::Snapshot(i) => format!("snapshot:{i}"),
            BasisProvenance::FixedRandom => "fixed-random".into(),
            BasisProvenance::Analytic => "analytic".into(),
        }
    }
}

/// A trajectory point in grid coordinates, carried along for plotting.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

/// Objective values over a 2-coordinate grid, plus the trajectory overlay.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    /// First coordinate; position along the chord for trajectory scans.
    pub alpha: Vec<f64>,
    /// Second coordinate; distance off the chord for trajectory scans.
    pub beta: Vec<f64>,
    /// Row-major: `values[i * beta.len() + j]` belongs to `(alpha[i], beta[j])`.
    pub values: Vec<f64>,
    /// One entry per alpha column.
    pub provenance: Vec<BasisProvenance>,
    /// Snapshots of the generating trajectory in grid coordinates.
    pub overlay: Vec<SurfacePoint>,
    /// Basis vectors for scans that use fixed directions.
    pub dir1: Option<Vec<f64>>,
    pub dir2: Option<Vec<f64>>,
}

impl SurfaceGrid {
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.beta.len() + j]
    }
}

fn check_axis(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!(
                "{name} grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn odd_resolution(resolution: usize) -> Result<()> {
    if resolution < 3 || resolution % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "control grids need an odd resolution of at least 3, got {resolution}"
        )));
    }
    Ok(())
}

struct SnapshotFrame {
    alpha_hat: f64,
    beta: f64,
    /// Unit off-chord residual; absent when the snapshot sits on the chord.
    direction: Option<Vec<f64>>,
}

/// Scans the objective over position along the initial-to-solution chord
/// (alpha, normalised) and distance off it (beta). Each alpha column steps
/// off along the unit residual of the snapshot whose alpha is nearest;
/// snapshots that sit exactly on the chord defer to the nearest one that
/// does not. Ties prefer the later snapshot. `beta_grid` defaults to
/// `alpha_grid.len()` points from 0 to 1.2x the largest snapshot residual.
pub fn surface_from_trajectory(
    spec: &NetworkSpec,
    splits: &Splits,
    record: &TrajectoryRecord,
    alpha_grid: &[f64],
    beta_grid: Option<&[f64]>,
) -> Result<SurfaceGrid> {
    check_axis("alpha", alpha_grid)?;
    let initial = record.initial();
    let solution = record.solution();
    let projector = ChordProjector::new(initial.values(), solution.values())?;

    let frames: Vec<SnapshotFrame> = record
        .snapshots()
        .iter()
        .map(|s| {
            let p = projector.project(s.epoch, s.params.values());
            let (residual, beta) = projector.residual(s.params.values());
            SnapshotFrame {
                alpha_hat: p.alpha_hat,
                beta,
                direction: if beta > 0.0 {
                    Some(residual.iter().map(|r| r / beta).collect())
                } else {
                    None
                },
            }
        })
        .collect();
    if frames.iter().all(|f| f.direction.is_none()) {
        return Err(Error::DegenerateTrajectory(
            "trajectory never leaves the chord, so there is no off-chord direction to scan".into(),
        ));
    }

    let max_beta = frames.iter().map(|f| f.beta).fold(0.0, f64::max);
    let default_beta;
    let beta_grid = match beta_grid {
        Some(g) => {
            check_axis("beta", g)?;
            g
        }
        None => {
            default_beta = linalg::linspace(0.0, 1.2 * max_beta, alpha_grid.len().max(2));
            &default_beta
        }
    };

    // Nearest snapshot by alpha, restricted to `usable`, ties to the later
    // snapshot (the one further into training).
    let nearest = |alpha: f64, usable: &dyn Fn(&SnapshotFrame) -> bool| -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (idx, frame) in frames.iter().enumerate() {
            if !usable(frame) {
                continue;
            }
            let dist = (frame.alpha_hat - alpha).abs();
            if best.map_or(true, |(d, _)| dist <= d) {
                best = Some((dist, idx));
            }
        }
        best.map(|(_, idx)| idx)
    };

    let columns: Vec<(usize, Vec<f64>)> = alpha_grid
        .iter()
        .map(|&alpha| {
            let chosen = nearest(alpha, &|f: &SnapshotFrame| f.direction.is_some())
                .expect("checked above that some snapshot leaves the chord");
            let direct = nearest(alpha, &|_: &SnapshotFrame| true).unwrap();
            // Prefer the truly nearest snapshot only when it has a direction.
            let idx = if frames[direct].direction.is_some() { direct } else { chosen };
            (idx, frames[idx].direction.clone().unwrap())
        })
        .collect();

    let beta_len = beta_grid.len();
    let rows: Vec<Vec<f64>> = alpha_grid
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| -> Result<Vec<f64>> {
            let wrap = |e: Error| Error::CurveEval {
                alpha,
                source: Box::new(e),
            };
            let base = interp_point(initial, solution, alpha).map_err(wrap)?;
            let direction = &columns[i].1;
            let mut row = Vec::with_capacity(beta_len);
            for &beta in beta_grid {
                let point = if beta == 0.0 {
                    base.clone()
                } else {
                    let values = base
                        .values()
                        .iter()
                        .zip(direction)
                        .map(|(&p, &d)| p + beta * d)
                        .collect();
                    ParamVector::from_values(base.manifest().clone(), values).map_err(wrap)?
                };
                row.push(
                    model::loss_total(spec, &point, splits.train.view())
                        .map_err(wrap)?
                        .sum,
                );
            }
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let overlay = record
        .snapshots()
        .iter()
        .zip(&frames)
        .map(|(s, f)| -> Result<SurfacePoint> {
            Ok(SurfacePoint {
                a: f.alpha_hat,
                b: f.beta,
                value: model::loss_total(spec, &s.params, splits.train.view())?.sum,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SurfaceGrid {
        alpha: alpha_grid.to_vec(),
        beta: beta_grid.to_vec(),
        values: rows.into_iter().flatten().collect(),
        provenance: columns.iter().map(|(idx, _)| BasisProvenance::Snapshot(*idx)).collect(),
        overlay,
        dir1: None,
        dir2: None,
    })
}

/// Gram-Schmidt pair: `first` normalised, `second` orthonormalised against it.
fn orthonormal_pair(first: Vec<f64>, second: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n1 = linalg::norm(&first);
    if n1 == 0.0 {
        return Err(Error::InvalidArgument("first direction is zero".into()));
    }
    let u1: Vec<f64> = first.iter().map(|v| v / n1).collect();
    let overlap = linalg::dot(&second, &u1);
    let w: Vec<f64> = second
        .iter()
        .zip(&u1)
        .map(|(&s, &u)| s - overlap * u)
        .collect();
    let nw = linalg::norm(&w);
    if nw <= 1e-12 * linalg::norm(&second) {
        return Err(Error::InvalidArgument(
            "directions are numerically parallel".into(),
        ));
    }
    Ok((u1, w.iter().map(|v| v / nw).collect()))
}

fn grid_values_around(
    spec: &NetworkSpec,
    splits: &Splits,
    center: &ParamVector,
    u1: &[f64],
    u2: &[f64],
    a_grid: &[f64],
    b_grid: &[f64],
) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = a_grid
        .par_iter()
        .map(|&a| -> Result<Vec<f64>> {
            let wrap = |e: Error| Error::CurveEval {
                alpha: a,
                source: Box::new(e),
            };
            let mut row = Vec::with_capacity(b_grid.len());
            for &b in b_grid {
                let point = if a == 0.0 && b == 0.0 {
                    center.clone()
                } else {
                    let values = center
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| p + a * u1[k] + b * u2[k])
                        .collect();
                    ParamVector::from_values(center.manifest().clone(), values).map_err(wrap)?
                };
                row.push(
                    model::loss_total(spec, &point, splits.train.view())
                        .map_err(wrap)?
                        .sum,
                );
            }
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Control scan: the objective over a random plane through the solution,
/// spanned by an orthonormalised pair of seeded Gaussian directions. Both
/// axes run symmetrically from `-extent` to `extent`; the centre cell is the
/// solution itself.
pub fn random_plane_control(
    spec: &NetworkSpec,
    splits: &Splits,
    record: &TrajectoryRecord,
    extent: f64,
    resolution: usize,
    seed: u64,
) -> Result<SurfaceGrid> {
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "plane extent must be positive, got {extent}"
        )));
    }
    odd_resolution(resolution)?;
    let solution = record.solution();
    let n = solution.len();
    let (u1, u2) = orthonormal_pair(
        linalg::normal_vec(&mut linalg::seeded_stream(seed, 0), n),
        linalg::normal_vec(&mut linalg::seeded_stream(seed, 1), n),
    )?;

    let a_grid = linalg::symmetric_linspace(extent, resolution);
    let b_grid = a_grid.clone();
    let values = grid_values_around(spec, splits, solution, &u1, &u2, &a_grid, &b_grid)?;

    let overlay = record
        .snapshots()
        .iter()
        .map(|s| -> Result<SurfacePoint> {
            let diff: Vec<f64> = s
                .params
                .values()
                .iter()
                .zip(solution.values())
                .map(|(&x, &c)| x - c)
                .collect();
            Ok(SurfacePoint {
                a: linalg::dot(&diff, &u1),
                b: linalg::dot(&diff, &u2),
                value: model::loss_total(spec, &s.params, splits.train.view())?.sum,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SurfaceGrid {
        alpha: a_grid,
        beta: b_grid,
        values,
        provenance: vec![BasisProvenance::FixedRandom; resolution],
        overlay,
        dir1: Some(u1),
        dir2: Some(u2),
    })
}

/// Control scan: first axis along the initial-to-solution chord (normalised
/// so the solution sits at 1), second axis a single seeded random direction
/// orthogonal to it. Unlike the trajectory scan this is one true 2-D
/// subspace. The off-chord extent defaults to 1.2x the largest snapshot
/// residual, or a quarter of the chord length if the trajectory is straight.
pub fn alpha_random_control(
    spec: &NetworkSpec,
    splits: &Splits,
    record: &TrajectoryRecord,
    resolution: usize,
    seed: u64,
) -> Result<SurfaceGrid> {
    odd_resolution(resolution)?;
    let initial = record.initial();
    let solution = record.solution();
    let projector = ChordProjector::new(initial.values(), solution.values())?;
    let chord: Vec<f64> = solution
        .values()
        .iter()
        .zip(initial.values())
        .map(|(&f, &i)| f - i)
        .collect();
    let (u, w) = orthonormal_pair(
        chord,
        linalg::normal_vec(&mut linalg::seeded_stream(seed, 0), initial.len()),
    )?;
    // Orthonormal pair comes back as (chord direction, random ⟂ chord); the
    // grid walks the chord by interpolation, so only `w` scales points.

    let max_beta = record
        .snapshots()
        .iter()
        .map(|s| projector.project(s.epoch, s.params.values()).beta)
        .fold(0.0, f64::max);
    let extent = if max_beta > 0.0 {
        1.2 * max_beta
    } else {
        0.25 * projector.chord_length()
    };

    let alpha_grid = linalg::linspace(0.0, 1.0, resolution);
    let beta_grid = linalg::symmetric_linspace(extent, resolution);

    let rows: Vec<Vec<f64>> = alpha_grid
        .par_iter()
        .map(|&alpha| -> Result<Vec<f64>> {
            let wrap = |e: Error| Error::CurveEval {
                alpha,
                source: Box::new(e),
            };
            let base = interp_point(initial, solution, alpha).map_err(wrap)?;
            let mut row = Vec::with_capacity(beta_grid.len());
            for &beta in &beta_grid {
                let point = if beta == 0.0 {
                    base.clone()
                } else {
                    let values = base
                        .values()
                        .iter()
                        .zip(&w)
                        .map(|(&p, &d)| p + beta * d)
                        .collect();
                    ParamVector::from_values(base.manifest().clone(), values).map_err(wrap)?
                };
                row.push(
                    model::loss_total(spec, &point, splits.train.view())
                        .map_err(wrap)?
                        .sum,
                );
            }
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let overlay = record
        .snapshots()
        .iter()
        .map(|s| -> Result<SurfacePoint> {
            let p = projector.project(s.epoch, s.params.values());
            let diff: Vec<f64> = s
                .params
                .values()
                .iter()
                .zip(initial.values())
                .map(|(&x, &i)| x - i)
                .collect();
            Ok(SurfacePoint {
                a: p.alpha_hat,
                b: linalg::dot(&diff, &w),
                value: model::loss_total(spec, &s.params, splits.train.view())?.sum,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SurfaceGrid {
        alpha: alpha_grid,
        beta: beta_grid,
        values: rows.into_iter().flatten().collect(),
        provenance: vec![BasisProvenance::FixedRandom; resolution],
        overlay,
        dir1: Some(u),
        dir2: Some(w),
    })
}

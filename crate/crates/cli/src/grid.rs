//! Decision-boundary grid export.

use std::fmt::Write as _;

use drocc_core::nd::Tensor2;

use crate::error::{CliError, CliResult};
use crate::snapshot::Snapshot;

/// Plotting window `[x1_min, x1_max, x2_min, x2_max]` in raw feature units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl Bounds {
    /// Parses `x1min,x1max,x2min,x2max`.
    pub fn parse(s: &str) -> CliResult<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("--bounds: {e}")))?;
        if v.len() != 4 {
            return Err(CliError::Config(format!("--bounds: expected 4 numbers, got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) || !(v[0] < v[1] && v[2] < v[3]) {
            return Err(CliError::Config("--bounds: need finite min < max on both axes".into()));
        }
        Ok(Self {
            x1: (v[0], v[1]),
            x2: (v[2], v[3]),
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Scores a `resolution x resolution` grid. 10-D models are sliced along the first two
/// coordinates with the rest held at 0. Rows are ordered x2-major.
pub fn boundary_grid(snap: &Snapshot, bounds: Bounds, resolution: usize) -> CliResult<Vec<[f64; 3]>> {
    let d = snap.model.input_dim();
    if d != 2 && d != 10 {
        return Err(CliError::Config(format!(
            "boundary-grid supports input dim 2 or 10, model has {d}"
        )));
    }
    if resolution == 0 {
        return Err(CliError::Config("--resolution must be >= 1".into()));
    }
    let xs = linspace(bounds.x1.0, bounds.x1.1, resolution);
    let ys = linspace(bounds.x2.0, bounds.x2.1, resolution);
    let mut pts = Tensor2::zeros(resolution * resolution, d);
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let row = pts.row_mut(j * resolution + i);
            row[0] = x;
            row[1] = y;
        }
    }
    let scores = snap.score(&pts)?;
    Ok(pts
        .iter_rows()
        .zip(scores)
        .map(|(p, s)| [p[0], p[1], s])
        .collect())
}

pub fn to_csv(grid: &[[f64; 3]]) -> String {
    let mut out = String::from("x1,x2,score\n");
    for [x, y, s] in grid {
        let _ = writeln!(out, "{x},{y},{s}");
    }
    out
}

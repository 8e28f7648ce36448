//! Exhaustive two-parameter sweep over 2x2 games: shift each player's payoff
//! at the (first action, first action) cell, solve the shifted game and score
//! the solution on the unshifted one.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::NormalFormGame;
use crate::solvers::Solver;

#[derive(Debug, Clone, Serialize)]
pub struct SweepGrid {
    /// Grid coordinates shared by both axes.
    pub deltas: Vec<f64>,
    /// `values[i * deltas.len() + j]` is the NashConv at `(deltas[i], deltas[j])`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub delta1: f64,
    pub delta2: f64,
    pub nash_conv: f64,
}

impl SweepGrid {
    pub fn side(&self) -> usize {
        self.deltas.len()
    }

    pub fn at(&self, i: usize, j: usize) -> SweepPoint {
        SweepPoint {
            delta1: self.deltas[i],
            delta2: self.deltas[j],
            nash_conv: self.values[i * self.side() + j],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = SweepPoint> + '_ {
        (0..self.side()).flat_map(move |i| (0..self.side()).map(move |j| self.at(i, j)))
    }

    /// Grid cell with the smallest NashConv; the first one in row-major order
    /// on ties.
    pub fn argmin(&self) -> SweepPoint {
        self.points()
            .reduce(|best, p| if p.nash_conv < best.nash_conv { p } else { best })
            .expect("grid is nonempty")
    }

    /// The cell closest to `(0, 0)`.
    pub fn origin(&self) -> SweepPoint {
        let closest = (0..self.side())
            .min_by(|&a, &b| self.deltas[a].abs().total_cmp(&self.deltas[b].abs()))
            .expect("grid is nonempty");
        self.at(closest, closest)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer
            .write_record(["delta1", "delta2", "nashconv"])
            .map_err(|e| csv_error(path, e))?;
        for p in self.points() {
            writer
                .write_record([p.delta1.to_string(), p.delta2.to_string(), p.nash_conv.to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_summary(&self, mut out: impl Write) -> std::io::Result<()> {
        let origin = self.origin();
        let best = self.argmin();
        writeln!(out, "grid {}x{}", self.side(), self.side())?;
        writeln!(out, "unmodified nashconv {:.6}", origin.nash_conv)?;
        writeln!(
            out,
            "minimum nashconv {:.6} at delta1={:.1} delta2={:.1}",
            best.nash_conv, best.delta1, best.delta2
        )
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Evenly spaced values from `lo` to `hi` inclusive.
pub fn grid_axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::invalid(format!("bad sweep range [{lo}, {hi}] step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

pub fn sweep_2x2(
    game: &NormalFormGame,
    solver: &impl Solver,
    range: (f64, f64),
    step: f64,
) -> Result<SweepGrid> {
    if game.action_counts() != [2, 2] {
        return Err(Error::shape(format!(
            "sweeps need a 2-player 2-action game, got {:?}",
            game.action_counts()
        )));
    }
    let deltas = grid_axis(range.0, range.1, step)?;
    let mut values = Vec::with_capacity(deltas.len() * deltas.len());
    for &d1 in &deltas {
        for &d2 in &deltas {
            let mut shifted = game.clone();
            *shifted.payoff_mut(0, 0) += d1;
            *shifted.payoff_mut(1, 0) += d2;
            let solution = solver.solve(&shifted)?;
            values.push(game.nash_conv(&solution.profile)?);
        }
    }
    Ok(SweepGrid { deltas, values })
}

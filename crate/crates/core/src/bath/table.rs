use std::io::Write;

use rayon::prelude::*;

use super::{thermal_correlation, BathSpec};
use crate::{Error, Result, C64};

/// `C(u)` and `m(t)` tabulated on the uniform grid `u_i = i h`, `i = 0..=n`,
/// with `n h = T` exactly.
#[derive(Clone, Debug)]
pub struct CorrelationTable {
    horizon: f64,
    step: f64,
    steps: usize,
    values: Vec<C64>,
    means: Vec<f64>,
    has_mean: bool,
    description: String,
}

/// Tabulate the bath over `[0, horizon]` with a step no larger than `h`.
pub fn build_correlation_table(bath: &BathSpec, horizon: f64, h: f64) -> Result<CorrelationTable> {
    bath.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let steps = ((horizon / h) - 1e-9).ceil().max(1.0) as usize;
    let step = horizon / steps as f64;
    let values = (0..=steps)
        .into_par_iter()
        .map(|i| thermal_correlation(bath, grid_time(i, steps, horizon)))
        .collect::<Result<Vec<_>>>()?;
    let means = (0..=steps)
        .map(|i| bath.mean_at(grid_time(i, steps, horizon)))
        .collect();
    Ok(CorrelationTable {
        horizon,
        step,
        steps,
        values,
        means,
        has_mean: bath.has_mean(),
        description: bath.describe(),
    })
}

fn grid_time(i: usize, steps: usize, horizon: f64) -> f64 {
    if i == steps {
        horizon
    } else {
        horizon * i as f64 / steps as f64
    }
}

impl CorrelationTable {
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of intervals; the grid has `steps() + 1` points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn time(&self, i: usize) -> f64 {
        grid_time(i, self.steps, self.horizon)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    pub fn has_mean(&self) -> bool {
        self.has_mean
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// `C(u_i)` for `i >= 0`.
    pub fn value(&self, i: usize) -> C64 {
        self.values[i]
    }

    /// `C((i - j) h) = <dB(t_i) dB(t_j)>`.
    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> C64 {
        if i >= j {
            self.values[i - j]
        } else {
            self.values[j - i].conj()
        }
    }

    #[inline]
    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    /// Grid index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.step;
        let i = x.round();
        if t < -1e-12 || i > self.steps as f64 {
            return Err(Error::OutOfRange {
                time: t,
                max: self.horizon(),
            });
        }
        if (x - i).abs() > 1e-8 {
            return Err(Error::GridMismatch(format!(
                "time {t} is not on the grid with step {}",
                self.step
            )));
        }
        Ok(i as usize)
    }

    /// Cubic Lagrange interpolation of `C(u)` for `|u| <= T`.
    pub fn interpolate(&self, u: f64) -> Result<C64> {
        if u < 0.0 {
            return self.interpolate(-u).map(|c| c.conj());
        }
        if u > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                time: u,
                max: self.horizon(),
            });
        }
        let x = u / self.step;
        let last_base = (self.steps as isize - 3).max(0);
        let base = (x.floor() as isize - 1).clamp(0, last_base) as usize;
        let top = (base + 3).min(self.steps);
        let nodes: Vec<usize> = (base..=top).collect();
        let mut acc = C64::new(0.0, 0.0);
        for &i in &nodes {
            let mut w = 1.0;
            for &j in &nodes {
                if j != i {
                    w *= (x - j as f64) / (i as f64 - j as f64);
                }
            }
            acc += self.values[i] * w;
        }
        Ok(acc)
    }

    /// CSV with columns `u,re,im` for the non-negative lags.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "u,re,im")?;
        for (i, c) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", self.time(i), c.re, c.im)?;
        }
        Ok(())
    }
}

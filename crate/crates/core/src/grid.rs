//! Uniform one-dimensional grids used for quadrature axes, time axes and
//! outcome axes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A uniform grid of `n >= 2` points on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    min: f64,
    max: f64,
    n: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::Config(format!("bad grid bounds [{min}, {max}]")));
        }
        if n < 2 {
            return Err(Error::Config(format!("grid needs >= 2 points, got {n}")));
        }
        Ok(Self { min, max, n })
    }

    /// Symmetric grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.min + self.step() * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }

    /// Trapezoid quadrature of sampled values over this grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.n, "value count must match grid");
        let h = self.step();
        let interior: f64 = values[1..self.n - 1].iter().sum();
        h * (0.5 * (values[0] + values[self.n - 1]) + interior)
    }

    /// Index of the grid point closest to `x`, clamped to the range.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.min) / self.step()).round();
        (i.max(0.0) as usize).min(self.n - 1)
    }

    /// Linear interpolation of `values` at `x`; zero outside the grid.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        if x < self.min || x > self.max {
            return 0.0;
        }
        let s = (x - self.min) / self.step();
        let i = (s.floor() as usize).min(self.n - 2);
        let frac = s - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }
}

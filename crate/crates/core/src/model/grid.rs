use crate::error::{Error, Result};

/// Uniform grid `t_n = start + n·dt`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Relative tolerance for `end - start` being a multiple of `step`.
    pub const DIVISIBILITY_TOLERANCE: f64 = 1e-9;

    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Invalid("grid_step must be positive".into()));
        }
        if !start.is_finite() || !end.is_finite() || end < start {
            return Err(Error::Invalid(format!("grid interval [{start}, {end}] is invalid")));
        }
        let exact = (end - start) / step;
        let steps = exact.round();
        if (steps - exact).abs() > Self::DIVISIBILITY_TOLERANCE * exact.max(1.0) {
            return Err(Error::Invalid(format!("horizon {} is not a multiple of grid_step {step}", end - start)));
        }
        Ok(TimeGrid { start, end, steps: steps as usize })
    }

    pub fn with_steps(start: f64, end: f64, steps: usize) -> Self {
        assert!(steps > 0 && end > start);
        TimeGrid { start, end, steps }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.end
        } else {
            self.start + n as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    /// Index of the first grid point at or after `t`, if inside the grid.
    pub fn node_at_or_after(&self, t: f64) -> Option<usize> {
        let slack = Self::DIVISIBILITY_TOLERANCE * self.end.abs().max(1.0);
        if t < self.start - slack || t > self.end + slack {
            return None;
        }
        let x = ((t - self.start) / self.dt() - 1e-9).ceil().max(0.0) as usize;
        Some(x.min(self.steps))
    }

    /// Index of the grid point equal to `t`, if any.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        let n = self.node_at_or_after(t)?;
        let slack = 1e-7 * self.dt();
        ((self.time(n) - t).abs() <= slack).then_some(n)
    }
}

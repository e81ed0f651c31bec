use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment at the two ends of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Zero-gradient ghost cells.
    Outflow,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Outflow => "outflow",
        })
    }
}

/// Uniform cell-centred grid on `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n_cells: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub boundary: Boundary,
}

impl Grid1D {
    pub fn new(n_cells: usize, x_lo: f64, x_hi: f64, boundary: Boundary) -> Result<Self> {
        let g = Grid1D {
            n_cells,
            x_lo,
            x_hi,
            boundary,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 4 {
            return Err(Error::Domain(format!(
                "grid needs at least 4 cells, got {}",
                self.n_cells
            )));
        }
        if !(self.x_hi > self.x_lo && self.x_lo.is_finite() && self.x_hi.is_finite()) {
            return Err(Error::Domain(format!(
                "grid interval [{}, {}] is empty",
                self.x_lo, self.x_hi
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_cells as f64
    }

    pub fn length(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Index of cell `i`, or of the cell a ghost at `i` copies from.
    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        let n = self.n_cells as isize;
        match self.boundary {
            Boundary::Periodic => i.rem_euclid(n) as usize,
            Boundary::Outflow => i.clamp(0, n - 1) as usize,
        }
    }

    /// Same grid with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Self {
        Grid1D {
            n_cells: self.n_cells * factor,
            ..*self
        }
    }

    /// Central differences of a cell field; one-sided at outflow ends.
    pub fn gradient(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let dx = self.dx();
        (0..n)
            .map(|i| match self.boundary {
                Boundary::Periodic => (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * dx),
                Boundary::Outflow if i == 0 => (values[1] - values[0]) / dx,
                Boundary::Outflow if i == n - 1 => (values[n - 1] - values[n - 2]) / dx,
                Boundary::Outflow => (values[i + 1] - values[i - 1]) / (2.0 * dx),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid1D::new(3, 0.0, 1.0, Boundary::Periodic).is_err());
        assert!(Grid1D::new(10, 1.0, 1.0, Boundary::Periodic).is_err());
        let g = Grid1D::new(8, 0.0, 2.0, Boundary::Outflow).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.center(0), 0.125);
    }

    #[test]
    fn wrapping() {
        let p = Grid1D::new(5, 0.0, 1.0, Boundary::Periodic).unwrap();
        assert_eq!((p.wrap(-1), p.wrap(5), p.wrap(2)), (4, 0, 2));
        let o = Grid1D {
            boundary: Boundary::Outflow,
            ..p
        };
        assert_eq!((o.wrap(-1), o.wrap(5), o.wrap(2)), (0, 4, 2));
    }

    #[test]
    fn gradient_of_linear_profile_is_exact_with_outflow() {
        let g = Grid1D::new(50, 0.0, 2.0, Boundary::Outflow).unwrap();
        let v: Vec<f64> = g.centers().iter().map(|x| 3.0 * x - 1.0).collect();
        for d in g.gradient(&v) {
            assert!((d - 3.0).abs() < 1e-12);
        }
    }
}

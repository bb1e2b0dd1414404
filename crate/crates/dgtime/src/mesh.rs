use crate::error::{Error, Result};

/// Which one-sided limit to take when evaluating at a slab boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Partition of `(t0, tN]` into time slabs with a polynomial degree per slab.
///
/// Slab `n` (0-based here) is the interval `(boundaries[n], boundaries[n+1]]`
/// and carries degree `degrees[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    boundaries: Vec<f64>,
    degrees: Vec<usize>,
}

impl TimeMesh {
    pub fn new(boundaries: Vec<f64>, degrees: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::Validation(
                "time mesh needs at least one slab (two boundaries)".into(),
            ));
        }
        if degrees.len() != boundaries.len() - 1 {
            return Err(Error::Validation(format!(
                "degree list has length {}, expected {} (one per slab)",
                degrees.len(),
                boundaries.len() - 1
            )));
        }
        if boundaries.iter().any(|t| !t.is_finite()) {
            return Err(Error::Validation("non-finite slab boundary".into()));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "slab boundaries must be strictly increasing".into(),
            ));
        }
        Ok(TimeMesh { boundaries, degrees })
    }

    /// Uniform mesh of `n_slabs` slabs on `(t_start, t_end]` with a common degree.
    pub fn uniform(t_start: f64, t_end: f64, n_slabs: usize, degree: usize) -> Result<Self> {
        if n_slabs == 0 {
            return Err(Error::Validation("time mesh needs at least one slab".into()));
        }
        if !(t_end > t_start) {
            return Err(Error::Validation(format!(
                "empty time interval: [{t_start}, {t_end}]"
            )));
        }
        let dt = (t_end - t_start) / n_slabs as f64;
        let mut boundaries: Vec<f64> = (0..=n_slabs).map(|k| t_start + k as f64 * dt).collect();
        // Pin the last boundary so t_end is hit exactly.
        *boundaries.last_mut().unwrap() = t_end;
        Self::new(boundaries, vec![degree; n_slabs])
    }

    pub fn num_slabs(&self) -> usize {
        self.degrees.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, slab: usize) -> usize {
        self.degrees[slab]
    }

    pub fn max_degree(&self) -> usize {
        *self.degrees.iter().max().unwrap()
    }

    /// Slab endpoints `(t_{n-1}, t_n)` for 0-based slab index `n`.
    pub fn slab(&self, n: usize) -> (f64, f64) {
        (self.boundaries[n], self.boundaries[n + 1])
    }

    pub fn slab_length(&self, n: usize) -> f64 {
        self.boundaries[n + 1] - self.boundaries[n]
    }

    pub fn start(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn end(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    fn snap_tol(&self) -> f64 {
        1e-12 * (self.end() - self.start()).abs().max(1.0)
    }

    /// Locate the slab owning the one-sided limit at `t` and the reference
    /// coordinate within it. Boundary hits are snapped within a relative
    /// tolerance of the mesh span.
    pub fn locate(&self, t: f64, side: Side) -> Result<(usize, f64)> {
        let tol = self.snap_tol();
        if t < self.start() - tol || t > self.end() + tol {
            return Err(Error::Range(format!(
                "t = {t} outside time domain [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        // Boundary node?
        if let Some(k) = self
            .boundaries
            .iter()
            .position(|&b| (t - b).abs() <= tol)
        {
            return match side {
                Side::Left => {
                    if k == 0 {
                        Err(Error::Range(format!(
                            "left limit at t0 = {} is not part of the trajectory",
                            self.start()
                        )))
                    } else {
                        Ok((k - 1, 1.0))
                    }
                }
                Side::Right => {
                    if k == self.num_slabs() {
                        Err(Error::Range(format!(
                            "right limit at final time {} is not defined",
                            self.end()
                        )))
                    } else {
                        Ok((k, 0.0))
                    }
                }
            };
        }
        // Interior point: both sides agree.
        let n = self
            .boundaries
            .partition_point(|&b| b < t)
            .saturating_sub(1)
            .min(self.num_slabs() - 1);
        let (a, b) = self.slab(n);
        Ok((n, (t - a) / (b - a)))
    }
}

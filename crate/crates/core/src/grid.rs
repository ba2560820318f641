use crate::error::{Result, SheqError};

/// Uniform time grid on `[0, T]` with `N` steps.
///
/// Nodes are computed as `n * T / N` so that the last node is `T` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(SheqError::InvalidArgument(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if steps == 0 {
            return Err(SheqError::InvalidArgument("number of steps must be >= 1".into()));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        n as f64 * self.t_final / self.steps as f64
    }

    /// Grid with `factor` times as many steps over the same horizon.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.t_final, self.steps * factor)
    }

    /// Ratio `other.steps / self.steps` if `other` refines `self` on the same horizon.
    pub fn refinement_factor(&self, other: &TimeGrid) -> Option<usize> {
        if self.t_final != other.t_final || other.steps % self.steps != 0 {
            return None;
        }
        Some(other.steps / self.steps)
    }
}

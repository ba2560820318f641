//! Discrete sine transform (type I) on top of `rustfft`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// DST-I of order `n`: maps `x[0..n-1]` (values for `m = 1..n-1`) to
/// `y[i-1] = sum_m x[m-1] * sin(pi * m * i / n)` for `i = 1..n-1`.
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform").field("n", &self.n).finish()
    }
}

impl SineTransform {
    /// `n >= 2`; the transform length is `n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "sine transform order must be >= 2");
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * n);
        Self { n, fft }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n - 1];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n - 1);
        assert_eq!(out.len(), n - 1);
        // odd extension of length 2n
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * n];
        for m in 1..n {
            buf[m].re = x[m - 1];
            buf[2 * n - m].re = -x[m - 1];
        }
        self.fft.process(&mut buf);
        for i in 1..n {
            out[i - 1] = -0.5 * buf[i].im;
        }
    }
}

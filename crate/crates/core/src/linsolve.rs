//! Banded symmetric positive-definite solver.
//!
//! Grid stencil systems have half bandwidth equal to the largest axis stride,
//! so a band Cholesky factorization is exact and runs in `O(n·b²)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Lower band of a symmetric matrix: `entry(d, j) = A[j + d][j]`.
pub(crate) struct BandedSpd {
    n: usize,
    hbw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, hbw: usize) -> Self {
        BandedSpd { n, hbw, band: vec![0.0; n * (hbw + 1)] }
    }

    #[inline]
    fn idx(&self, d: usize, j: usize) -> usize {
        j * (self.hbw + 1) + d
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(d <= self.hbw);
        let at = self.idx(d, lo);
        self.band[at] = value;
    }

    /// In-place Cholesky `A = L Lᵀ`. Fails on a non-positive pivot, which for
    /// our assemblies signals a numerically singular (disconnected) system.
    pub fn cholesky(&mut self) -> Result<(), usize> {
        let hbw = self.hbw;
        for j in 0..self.n {
            let start = j.saturating_sub(hbw);
            let mut diag = self.band[self.idx(0, j)];
            for k in start..j {
                let l = self.band[self.idx(j - k, k)];
                diag -= l * l;
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(j);
            }
            let ljj = math::sqrt(diag);
            let at = self.idx(0, j);
            self.band[at] = ljj;
            let last = (j + hbw).min(self.n - 1);
            for i in (j + 1)..=last {
                let mut v = self.band[self.idx(i - j, j)];
                let lo = i.saturating_sub(hbw).max(start);
                for k in lo..j {
                    v -= self.band[self.idx(i - k, k)] * self.band[self.idx(j - k, k)];
                }
                let at = self.idx(i - j, j);
                self.band[at] = v / ljj;
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` after [`Self::cholesky`], overwriting `b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let hbw = self.hbw;
        for i in 0..self.n {
            let mut v = b[i];
            let start = i.saturating_sub(hbw);
            for k in start..i {
                v -= self.band[self.idx(i - k, k)] * b[k];
            }
            b[i] = v / self.band[self.idx(0, i)];
        }
        for i in (0..self.n).rev() {
            let mut v = b[i];
            let last = (i + hbw).min(self.n - 1);
            for k in (i + 1)..=last {
                v -= self.band[self.idx(k - i, i)] * b[k];
            }
            b[i] = v / self.band[self.idx(0, i)];
        }
    }
}

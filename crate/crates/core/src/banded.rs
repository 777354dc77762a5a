//! Symmetric banded storage and an in-place banded Cholesky factorization.
//!
//! Only the lower band is stored. Row `i` holds `A[i][i - bw ..= i]`, with the
//! diagonal in the last slot, so a system of `n` unknowns with half-bandwidth
//! `bw` occupies `n * (bw + 1)` values. Factorization and solve are both
//! `O(n * bw^2)`.

use thiserror::Error;

/// Pivots smaller than this fraction of the largest diagonal entry are
/// treated as numerically singular.
const PIVOT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(
        "matrix is not positive definite at row {row} (pivot {pivot:e}, \
         pivot ratio {pivot_ratio:e})"
    )]
    NotPositiveDefinite {
        row: usize,
        pivot: f64,
        /// Smallest accepted pivot over largest diagonal entry; a cheap
        /// condition diagnostic.
        pivot_ratio: f64,
    },
    #[error("right-hand side has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        Self {
            n,
            bw: half_bandwidth,
            data: vec![0.0; n * (half_bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            None
        } else {
            Some(r * (self.bw + 1) + self.bw - (r - c))
        }
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to the symmetric pair `(i, j)`/`(j, i)`.
    ///
    /// Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside half-bandwidth {}", self.bw));
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside half-bandwidth {}", self.bw));
        self.data[s] = v;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// `b − A x` accumulated with error-free products and sums, so the result
    /// is accurate even when it is tiny compared with `A x`.
    pub fn residual_compensated(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (mut s, mut comp) = (b[i], 0.0);
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                for j in lo..=hi {
                    let a = if j <= i { self.get(i, j) } else { self.get(j, i) };
                    let p = -a * x[j];
                    let p_err = (-a).mul_add(x[j], -p);
                    let t = s + p;
                    let z = t - s;
                    comp += (s - (t - z)) + (p - z) + p_err;
                    s = t;
                }
                s + comp
            })
            .collect()
    }

    /// Factorizes `A = L Lᵀ`, consuming the matrix.
    pub fn cholesky(self) -> Result<BandedCholesky, SolverError> {
        let n = self.n;
        let bw = self.bw;
        let max_diag = (0..n).map(|i| self.get(i, i).abs()).fold(0.0_f64, f64::max);
        let floor = PIVOT_FLOOR * max_diag.max(f64::MIN_POSITIVE);
        let mut l = self;
        let mut min_pivot = f64::INFINITY;

        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut s = l.get(j, j);
            for k in lo..j {
                let v = l.get(j, k);
                s -= v * v;
            }
            if !(s > floor) {
                return Err(SolverError::NotPositiveDefinite {
                    row: j,
                    pivot: s,
                    pivot_ratio: if max_diag > 0.0 { s / max_diag } else { 0.0 },
                });
            }
            min_pivot = min_pivot.min(s);
            let d = s.sqrt();
            l.set(j, j, d);
            for i in (j + 1)..n.min(j + bw + 1) {
                let lo_i = i.saturating_sub(bw);
                let mut t = l.get(i, j);
                for k in lo_i.max(lo)..j {
                    t -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, t / d);
            }
        }

        Ok(BandedCholesky {
            factor: l,
            pivot_ratio: if n == 0 { 1.0 } else { min_pivot / max_diag },
        })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedSym,
    pivot_ratio: f64,
}

impl BandedCholesky {
    /// Smallest squared pivot relative to the largest diagonal entry of the
    /// original matrix.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        let l = &self.factor;
        let n = l.n;
        if rhs.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let bw = l.bw;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.get(i, k) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= l.get(k, i) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        Ok(x)
    }
}

//! Tridiagonal systems and the Thomas elimination.

use crate::error::{KsError, Result};

/// `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[m-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn identity(m: usize) -> Self {
        TridiagonalSystem {
            sub: vec![0.0; m],
            diag: vec![1.0; m],
            sup: vec![0.0; m],
            rhs: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn check_dims(&self) -> Result<()> {
        let m = self.diag.len();
        if self.sub.len() != m || self.sup.len() != m || self.rhs.len() != m {
            return Err(KsError::InvalidParams(format!(
                "tridiagonal dimensions disagree: sub {}, diag {m}, sup {}, rhs {}",
                self.sub.len(),
                self.sup.len(),
                self.rhs.len()
            )));
        }
        Ok(())
    }

    /// Strict row diagonal dominance `|diag| > |sub| + |sup|` on every row.
    pub fn is_strictly_diagonally_dominant(&self) -> bool {
        let m = self.diag.len();
        (0..m).all(|i| {
            let lower = if i > 0 { self.sub[i].abs() } else { 0.0 };
            let upper = if i + 1 < m { self.sup[i].abs() } else { 0.0 };
            self.diag[i].abs() > lower + upper
        })
    }

    /// Applies the matrix to `x` (used for residual checks).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.diag.len();
        (0..m)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.sub[i] * x[i - 1];
                }
                if i + 1 < m {
                    acc += self.sup[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Thomas algorithm; no pivoting.
    pub fn solve(&self) -> Result<Vec<f64>> {
        self.check_dims()?;
        let m = self.diag.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let mut c_prime = vec![0.0; m];
        let mut d_prime = vec![0.0; m];

        let pivot = |den: f64, row: usize| -> Result<f64> {
            if den == 0.0 || !den.is_finite() {
                Err(KsError::InvalidParams(format!(
                    "singular tridiagonal pivot at row {row}"
                )))
            } else {
                Ok(den)
            }
        };

        let den = pivot(self.diag[0], 0)?;
        c_prime[0] = if m > 1 { self.sup[0] / den } else { 0.0 };
        d_prime[0] = self.rhs[0] / den;
        for i in 1..m {
            let den = pivot(self.diag[i] - self.sub[i] * c_prime[i - 1], i)?;
            if i + 1 < m {
                c_prime[i] = self.sup[i] / den;
            }
            d_prime[i] = (self.rhs[i] - self.sub[i] * d_prime[i - 1]) / den;
        }

        let mut x = vec![0.0; m];
        x[m - 1] = d_prime[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = d_prime[i] - c_prime[i] * x[i + 1];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let mut s = TridiagonalSystem::identity(4);
        s.rhs = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(s.solve().unwrap(), s.rhs);
    }

    #[test]
    fn solves_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3, 5, 3] -> x = [1, 1, 1]
        let s = TridiagonalSystem {
            sub: vec![0.0, 1.0, 1.0],
            diag: vec![2.0, 3.0, 2.0],
            sup: vec![1.0, 1.0, 0.0],
            rhs: vec![3.0, 5.0, 3.0],
        };
        let x = s.solve().unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-15);
        }
        assert!(s.is_strictly_diagonally_dominant());
    }

    #[test]
    fn singular_pivot_reported() {
        let s = TridiagonalSystem {
            sub: vec![0.0, 1.0],
            diag: vec![0.0, 1.0],
            sup: vec![1.0, 0.0],
            rhs: vec![1.0, 1.0],
        };
        assert!(s.solve().is_err());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let mut s = TridiagonalSystem::identity(3);
        s.rhs.pop();
        assert!(s.solve().is_err());
    }
}

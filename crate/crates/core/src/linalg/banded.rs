use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Square matrix with equal lower and upper half-bandwidth `bw`.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw, "entry ({i}, {j}) outside the band");
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j);
        self.data[k] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw + 1).min(self.n);
                (lo..hi).map(|j| self.data[self.offset(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization without pivoting. Intended for diagonally dominant
    /// or symmetric positive definite band matrices, where it is stable.
    pub fn factorize(mut self) -> Result<BandedLu> {
        let (n, bw) = (self.n, self.bw);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = self.data[self.offset(k, k)];
            if !pivot.is_finite() || pivot.abs() <= 1e-14 * scale {
                return Err(Error::Factorization(format!("pivot {pivot:e} at row {k}")));
            }
            let hi = (k + bw + 1).min(n);
            for i in k + 1..hi {
                let oik = self.offset(i, k);
                let l = self.data[oik] / pivot;
                self.data[oik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..hi {
                    let okj = self.offset(k, j);
                    let oij = self.offset(i, j);
                    self.data[oij] -= l * self.data[okj];
                }
            }
        }
        Ok(BandedLu { lu: self })
    }
}

/// Packed `L` (unit lower) and `U` factors of a [`BandedMatrix`].
#[derive(Clone, Debug)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.lu.n, self.lu.bw);
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.lu.data[self.lu.offset(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = x[i];
            for j in i + 1..hi {
                s -= self.lu.data[self.lu.offset(i, j)] * x[j];
            }
            x[i] = s / self.lu.data[self.lu.offset(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b` with the same factors (`Uᵀ` forward, then `Lᵀ` backward).
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.lu.n, self.lu.bw);
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.lu.data[self.lu.offset(j, i)] * x[j];
            }
            x[i] = s / self.lu.data[self.lu.offset(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = x[i];
            for j in i + 1..hi {
                s -= self.lu.data[self.lu.offset(j, i)] * x[j];
            }
            x[i] = s;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn sample() -> BandedMatrix {
        let n = 7;
        let mut a = BandedMatrix::zeros(n, 2);
        for i in 0..n {
            a.set(i, i, 6.0 + i as f64);
            if i + 1 < n {
                a.set(i, i + 1, -1.0 - 0.1 * i as f64);
                a.set(i + 1, i, -2.0);
            }
            if i + 2 < n {
                a.set(i, i + 2, 0.5);
                a.set(i + 2, i, -0.3 * i as f64);
            }
        }
        a
    }

    #[test]
    fn solve_and_transpose_solve() {
        let a = sample();
        let dense = Matrix::from_fn(7, 7, |i, j| a.get(i, j));
        let b: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let lu = a.clone().factorize().unwrap();
        let x = lu.solve(&b);
        let y = lu.solve_transpose(&b);
        let r1 = dense.matvec(&x);
        let r2 = dense.tr_matvec(&y);
        for i in 0..7 {
            assert!((r1[i] - b[i]).abs() < 1e-13);
            assert!((r2[i] - b[i]).abs() < 1e-13);
        }
        assert_eq!(a.matvec(&x).len(), 7);
    }

    #[test]
    fn singular_pivot_is_reported() {
        let a = BandedMatrix::zeros(3, 1);
        assert!(matches!(a.factorize(), Err(Error::Factorization(_))));
    }
}

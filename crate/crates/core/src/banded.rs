//! Real band matrices stored by rows, with an LU factorisation using partial pivoting.

use crate::error::{Error, Result};
use faer::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+ku at offsets 0 ..= kl+ku
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.fill(1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n);
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n);
        assert!(self.in_band(i, j), "({i}, {j}) lies outside bandwidths ({}, {})", self.kl, self.ku);
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    /// Column range of row `i` that lies inside the matrix and the band.
    pub fn row_range(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kl)..=(i + self.ku).min(self.n - 1)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `a·self + b·other`, on the union of the two bands.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.n, other.n);
        let mut m = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in m.row_range(i) {
                m.set(i, j, a * self.get(i, j) + b * other.get(i, j));
            }
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut m = Self::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.row_range(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.row_range(k) {
                    let v = m.get(i, j) + a * other.get(k, j);
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn lu(&self) -> Result<BandedLu> {
        BandedLu::factor(self)
    }
}

/// `P A = L U` for a band matrix. Row interchanges widen U to `kl + ku` superdiagonals.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    // rows store columns i-kl ..= i+kl+ku; multipliers sit below the diagonal
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    fn w(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[i * self.w() + j + self.kl - i]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let w = self.w();
        &mut self.ab[i * w + j + self.kl - i]
    }

    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut lu = BandedLu { n, kl, ku, ab: vec![0.0; n * (2 * kl + ku + 1)], piv: vec![0; n] };
        for i in 0..n {
            for j in a.row_range(i) {
                *lu.at_mut(i, j) = a.get(i, j);
            }
        }
        let kuu = kl + ku;
        let scale = a.norm_inf().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kuu).min(n - 1);
            let mut p = k;
            for i in k + 1..=last_row {
                if lu.at(i, k).abs() > lu.at(p, k).abs() {
                    p = i;
                }
            }
            lu.piv[k] = p;
            let pivot = lu.at(p, k);
            if pivot.abs() <= 1e-14 * scale {
                return Err(Error::Solve(format!("zero pivot at column {k} of {n}")));
            }
            if p != k {
                for j in k..=last_col {
                    let t = lu.at(k, j);
                    *lu.at_mut(k, j) = lu.at(p, j);
                    *lu.at_mut(p, j) = t;
                }
            }
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let v = lu.at(i, j) - l * lu.at(k, j);
                        *lu.at_mut(i, j) = v;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
        let kuu = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kuu).min(n - 1) {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::{DenseSolveCore, Solve};
    use proptest::prelude::*;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandedMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = BandedMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in m.row_range(i) {
                m.set(i, j, next());
            }
        }
        m
    }

    #[test]
    fn get_set_and_dense() {
        let mut m = BandedMatrix::zeros(4, 1, 2);
        m.set(0, 2, 3.0);
        m.set(3, 2, -1.0);
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(3, 0), 0.0);
        let d = m.to_dense();
        assert_eq!(d[(3, 2)], -1.0);
        assert_eq!(m.transpose().get(2, 3), -1.0);
        assert_eq!(m.transpose().bandwidths(), (2, 1));
    }

    #[test]
    #[should_panic]
    fn set_outside_band_panics() {
        BandedMatrix::zeros(4, 1, 0).set(0, 1, 1.0);
    }

    #[test]
    fn product_matches_dense() {
        let a = random_band(9, 2, 1, 1);
        let b = random_band(9, 1, 2, 2);
        let c = a.mul(&b);
        assert_eq!(c.bandwidths(), (3, 3));
        let d = &a.to_dense() * &b.to_dense();
        for i in 0..9 {
            for j in 0..9 {
                assert!((c.get(i, j) - d[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn singular_band_is_reported() {
        let m = BandedMatrix::zeros(5, 1, 1);
        assert!(matches!(m.lu(), Err(Error::Solve(_))));
    }

    #[test]
    fn solve_needs_pivoting() {
        // zero leading diagonal forces a row swap
        let mut m = BandedMatrix::zeros(3, 1, 1);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 2, 1.0);
        m.set(2, 1, 1.0);
        m.set(2, 2, 1.0);
        let x = m.lu().unwrap().solve(&[1.0, 2.0, 3.0]);
        let r = m.matvec(&x);
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_oracle() {
        let mut a = random_band(40, 3, 2, 7);
        for i in 0..40 {
            a.set(i, i, a.get(i, i) + 0.1);
        }
        let inv = a.to_dense().partial_piv_lu().inverse();
        let lu = a.lu().unwrap();
        for j in 0..40 {
            let mut e = vec![0.0; 40];
            e[j] = 1.0;
            let x = lu.solve(&e);
            for i in 0..40 {
                assert!((x[i] - inv[(i, j)]).abs() < 1e-9 * (1.0 + inv[(i, j)].abs()));
            }
        }
        let b = faer::Mat::<f64>::from_fn(40, 1, |i, _| i as f64);
        let y = a.to_dense().partial_piv_lu().solve(&b);
        let x = lu.solve(&(0..40).map(|i| i as f64).collect::<Vec<_>>());
        for i in 0..40 {
            assert!((x[i] - y[(i, 0)]).abs() < 1e-9 * (1.0 + y[(i, 0)].abs()));
        }
    }

    proptest! {
        #[test]
        fn residual_is_small(n in 3usize..40, kl in 0usize..4, ku in 0usize..4, seed in any::<u64>()) {
            let mut a = random_band(n, kl, ku, seed);
            for i in 0..n {
                a.set(i, i, a.get(i, i) + 4.0);
            }
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = a.lu().unwrap().solve(&b);
            let r = a.matvec(&x);
            for i in 0..n {
                prop_assert!((r[i] - b[i]).abs() < 1e-11);
            }
        }
    }
}

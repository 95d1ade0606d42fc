//! Banded linear algebra for the penalized least-squares systems.
//!
//! The normal matrix `BᵀDWB + 2λP` is never formed. Instead every data row
//! and every penalty quadrature row is rotated into an upper-triangular
//! banded factor `R` with Givens rotations, so `RᵀR` equals the normal
//! matrix while the factorization stays row-wise backward stable even when
//! `λ` spans twenty orders of magnitude.

use crate::scalar::Scalar;

/// Symmetric banded matrix stored by lower diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand<S> {
    n: usize,
    kd: usize,
    // data[i * (kd + 1) + d] = A[i + d][i]
    data: Vec<S>,
}

impl<S: Scalar> SymBand<S> {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self {
            n,
            kd,
            data: vec![S::zero(); n * (kd + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of sub-diagonals.
    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.kd {
            S::zero()
        } else {
            self.data[lo * (self.kd + 1) + (hi - lo)]
        }
    }

    /// Adds `v` at `(i, j)` (and implicitly at `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: S) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.kd, "entry ({i}, {j}) outside band");
        let idx = lo * (self.kd + 1) + (hi - lo);
        self.data[idx] = self.data[idx] + v;
    }

    pub fn trace(&self) -> S {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[S]) -> S {
        let mut acc = S::zero();
        for i in 0..self.n {
            acc = acc + self.get(i, i) * x[i] * x[i];
            for d in 1..=self.kd.min(self.n - 1 - i) {
                acc = acc + S::lit(2.0) * self.get(i, i + d) * x[i] * x[i + d];
            }
        }
        acc
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.n];
        for i in 0..self.n {
            out[i] = out[i] + self.get(i, i) * x[i];
            for d in 1..=self.kd.min(self.n - 1 - i) {
                let v = self.get(i, i + d);
                out[i] = out[i] + v * x[i + d];
                out[i + d] = out[i + d] + v * x[i];
            }
        }
        out
    }

    /// Quadratic form of a row vector with `vals.len()` consecutive nonzeros
    /// starting at column `start`; all pairs must fall inside the band.
    pub fn local_quad_form(&self, start: usize, vals: &[S]) -> S {
        let mut acc = S::zero();
        for (p, &bp) in vals.iter().enumerate() {
            if bp == S::zero() {
                continue;
            }
            acc = acc + bp * bp * self.get(start + p, start + p);
            for (q, &bq) in vals.iter().enumerate().skip(p + 1) {
                acc = acc + S::lit(2.0) * bp * bq * self.get(start + p, start + q);
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<Vec<S>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Upper-triangular banded factor accumulated row by row with Givens rotations.
#[derive(Debug, Clone)]
pub struct BandQr<S> {
    n: usize,
    width: usize,
    // r[i * width + k] = R[i][i + k]
    r: Vec<S>,
    z: Vec<S>,
    scratch: Vec<S>,
}

impl<S: Scalar> BandQr<S> {
    /// `width` is the number of stored entries per row (diagonal included).
    pub fn new(n: usize, width: usize) -> Self {
        Self {
            n,
            width,
            r: vec![S::zero(); n * width],
            z: vec![S::zero(); n],
            scratch: vec![S::zero(); width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn reset(&mut self) {
        self.r.iter_mut().for_each(|v| *v = S::zero());
        self.z.iter_mut().for_each(|v| *v = S::zero());
    }

    /// Rotates the row `(vals at columns start.., rhs)` into the factor.
    ///
    /// Rows are cheapest when added in nondecreasing `start` order; fill-in
    /// beyond the row's own span is still handled correctly otherwise.
    pub fn add_row(&mut self, start: usize, vals: &[S], rhs: S) {
        debug_assert!(vals.len() <= self.width && start + vals.len() <= self.n);
        let w = self.width;
        let h = &mut self.scratch;
        h.iter_mut().for_each(|v| *v = S::zero());
        h[..vals.len()].copy_from_slice(vals);
        let mut rhs = rhs;
        // h[k] holds the coefficient of column col + k.
        let mut col = start;
        while col < self.n {
            let piv = h[0];
            if piv != S::zero() {
                let row = &mut self.r[col * w..(col + 1) * w];
                let (c, s, rr) = givens(row[0], piv);
                row[0] = rr;
                for k in 1..w.min(self.n - col) {
                    let a = row[k];
                    let b = h[k];
                    row[k] = c * a + s * b;
                    h[k] = c * b - s * a;
                }
                let za = self.z[col];
                self.z[col] = c * za + s * rhs;
                rhs = c * rhs - s * za;
            }
            h.rotate_left(1);
            h[w - 1] = S::zero();
            col += 1;
            if h.iter().all(|v| *v == S::zero()) {
                break;
            }
        }
    }

    /// Smallest and largest absolute diagonal entries of `R`.
    pub fn diag_range(&self) -> (S, S) {
        let mut lo = S::infinity();
        let mut hi = S::zero();
        for i in 0..self.n {
            let d = self.r[i * self.width].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// True when a diagonal entry is zero, non-finite, or negligible.
    pub fn is_singular(&self) -> bool {
        let (lo, hi) = self.diag_range();
        !(lo.is_finite() && hi.is_finite()) || hi == S::zero() || lo <= hi * S::epsilon()
    }

    /// Back-substitution for the least-squares solution.
    pub fn solve(&self) -> Vec<S> {
        let w = self.width;
        let mut x = vec![S::zero(); self.n];
        for i in (0..self.n).rev() {
            let row = &self.r[i * w..(i + 1) * w];
            let mut acc = self.z[i];
            for k in 1..w.min(self.n - i) {
                acc = acc - row[k] * x[i + k];
            }
            x[i] = acc / row[0];
        }
        x
    }

    /// Entries of `(RᵀR)⁻¹` within the band (Takahashi recursion).
    pub fn inverse_band(&self) -> SymBand<S> {
        let n = self.n;
        let kd = self.width - 1;
        let w = self.width;
        let mut sigma = SymBand::zeros(n, kd);
        for i in (0..n).rev() {
            let row = &self.r[i * w..(i + 1) * w];
            let rii = row[0];
            let last = (i + kd).min(n - 1);
            // unit lower factor entries L[k][i] = R[i][k] / R[i][i]
            for j in (i + 1..=last).rev() {
                let mut acc = S::zero();
                for k in i + 1..=last {
                    acc = acc + row[k - i] / rii * sigma.get(j, k);
                }
                sigma.add(j, i, -acc);
            }
            let mut acc = S::one() / (rii * rii);
            for k in i + 1..=last {
                acc = acc - row[k - i] / rii * sigma.get(k, i);
            }
            sigma.add(i, i, acc);
        }
        sigma
    }

    /// Forms `RᵀR` explicitly (tests and diagnostics).
    pub fn normal_matrix(&self) -> SymBand<S> {
        let kd = self.width - 1;
        let mut a = SymBand::zeros(self.n, kd);
        for i in 0..self.n {
            let row = &self.r[i * self.width..(i + 1) * self.width];
            for p in 0..self.width.min(self.n - i) {
                for q in p..self.width.min(self.n - i) {
                    a.add(i + p, i + q, row[p] * row[q]);
                }
            }
        }
        a
    }
}

fn givens<S: Scalar>(a: S, b: S) -> (S, S, S) {
    if b == S::zero() {
        return (S::one(), S::zero(), a);
    }
    if a == S::zero() {
        return (S::zero(), S::one(), b);
    }
    let r = a.hypot(b);
    (a / r, b / r, r)
}

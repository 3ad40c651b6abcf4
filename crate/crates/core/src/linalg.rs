//! Dense and banded LU factorizations over real or complex scalars, plus
//! spectral helpers.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialEq
    + std::fmt::Debug
    + Send
    + Sync
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Magnitude used for pivot selection.
    fn mag(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn mag(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn mag(self) -> f64 {
        self.re.abs() + self.im.abs()
    }
}

/// LU with partial pivoting of a row-major n x n matrix.
#[derive(Clone, Debug)]
pub struct DenseLu<T> {
    n: usize,
    a: Vec<T>,
    piv: Vec<usize>,
    sign: f64,
}

impl<T: Scalar> DenseLu<T> {
    pub fn factor(n: usize, mut a: Vec<T>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv = vec![0; n];
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].mag();
            for i in k + 1..n {
                let m = a[i * n + k].mag();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Convergence { msg: "singular matrix in LU".into(), residual: best });
            }
            piv[k] = p;
            if p != k {
                sign = -sign;
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / d;
                a[i * n + k] = l;
                if l != T::zero() {
                    for j in k + 1..n {
                        let u = a[k * n + j];
                        a[i * n + j] = a[i * n + j] - l * u;
                    }
                }
            }
        }
        Ok(DenseLu { n, a, piv, sign })
    }

    pub fn solve(&self, b: &mut [T]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s = s - self.a[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s = s - self.a[i * n + j] * b[j];
            }
            b[i] = s / self.a[i * n + i];
        }
    }

    pub fn det(&self) -> T {
        let mut d = if self.sign > 0.0 { T::one() } else { -T::one() };
        for i in 0..self.n {
            d = d * self.a[i * self.n + i];
        }
        d
    }
}

/// Band matrix with `kl` sub- and `ku` super-diagonals, stored row-wise in
/// compact form: row i holds columns i-kl ..= i+ku in slots 0..kl+ku+1.
#[derive(Clone, Debug)]
pub struct Band<T> {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Band<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Band { n, kl, ku, data: vec![T::zero(); n * (kl + ku + 1)] }
    }

    pub fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    /// Slot of entry (i, j); caller guarantees |i - j| within the band.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) && j < self.n {
            self.data[self.idx(i, j)]
        } else {
            T::zero()
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = T::zero();
            for j in lo..=hi {
                s = s + self.data[self.idx(i, j)] * x[j];
            }
            y[i] = s;
        }
    }
}

/// Banded LU with partial pivoting (row interchanges within the band).
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    /// Upper factor rows, width kl + ku + 1, left-aligned after shifting.
    u: Vec<T>,
    /// Multipliers, n x kl.
    l: Vec<T>,
    piv: Vec<usize>,
    w: usize,
}

impl<T: Scalar> BandLu<T> {
    pub fn factor(band: Band<T>) -> Result<Self> {
        let (n, kl, w) = (band.n, band.kl, band.width());
        let mut a = band.data;
        // Left-align the first kl rows so each row starts at its first stored column.
        let mut shift = kl;
        for i in 0..kl.min(n) {
            for j in shift..w {
                a[i * w + j - shift] = a[i * w + j];
            }
            for j in w - shift..w {
                a[i * w + j] = T::zero();
            }
            shift -= 1;
        }
        let mut l = vec![T::zero(); n * kl.max(1)];
        let mut piv = vec![0; n];
        let mut last = kl.min(n);
        for k in 0..n {
            if last < n {
                last += 1;
            }
            let mut p = k;
            let mut best = a[k * w].mag();
            for i in k + 1..last {
                let m = a[i * w].mag();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Convergence { msg: "singular banded matrix".into(), residual: best });
            }
            piv[k] = p;
            if p != k {
                for j in 0..w {
                    a.swap(k * w + j, p * w + j);
                }
            }
            let d = a[k * w];
            for i in k + 1..last {
                let f = a[i * w] / d;
                l[k * kl + (i - k - 1)] = f;
                for j in 1..w {
                    let u = a[k * w + j];
                    a[i * w + j - 1] = a[i * w + j] - f * u;
                }
                a[i * w + w - 1] = T::zero();
            }
        }
        Ok(BandLu { n, kl, u: a, l, piv, w })
    }

    pub fn solve(&self, b: &mut [T]) {
        let (n, kl, w) = (self.n, self.kl, self.w);
        let mut last = kl.min(n);
        for k in 0..n {
            if last < n {
                last += 1;
            }
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            for i in k + 1..last {
                let f = self.l[k * kl + (i - k - 1)];
                b[i] = b[i] - f * b[k];
            }
        }
        let mut span = 1;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in 1..span {
                s = s - self.u[i * w + k] * b[i + k];
            }
            b[i] = s / self.u[i * w];
            if span < w {
                span += 1;
            }
        }
    }
}

/// Eigenvalues of a square real matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::Eigen(0));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::Eigen(10_000))?;
    let ev = schur.complex_eigenvalues();
    let mut v: Vec<Complex64> = ev.iter().map(|c| Complex64::new(c.re, c.im)).collect();
    v.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal));
    Ok(v)
}

/// Coefficients a1..an of the monic characteristic polynomial
/// λ^n + a1 λ^(n-1) + ... + an, from the eigenvalues.
pub fn char_poly_from_eigs(eigs: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &z in eigs {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k] += ck;
            next[k + 1] -= ck * z;
        }
        c = next;
    }
    c[1..].iter().map(|z| z.re).collect()
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut v = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve A x = b for dense A.
pub fn solve_dense(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let lu = DenseLu::factor(a.nrows(), to_row_major(a))?;
    let mut x = b.to_vec();
    lu.solve(&mut x);
    Ok(x)
}

/// Unit right singular vector for the smallest singular value, and that value.
pub fn null_vector(a: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    // Thin SVD of a wide matrix omits the null direction; pad with zero rows.
    let sq = if a.nrows() < a.ncols() { a.clone().resize_vertically(a.ncols(), 0.0) } else { a.clone() };
    let svd = sq.try_svd(false, true, f64::EPSILON, 10_000).ok_or(Error::Eigen(10_000))?;
    let vt = svd.v_t.ok_or(Error::Eigen(0))?;
    let (k, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    Ok((vt.row(k).iter().copied().collect(), smin))
}

//! Complex linear-algebra kernels and scalar Gaussian-message algebra.
//!
//! Only what the equalizers need: a dense Hermitian factor-and-solve, a
//! banded `LDLᴴ` factorization with selected inversion of the band, and the
//! product/quotient of scalar proper complex Gaussians.

use std::ops::{Index, IndexMut};

pub use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexVec = Vec<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn column(v: &[Complex64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> ComplexVec {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<ComplexVec> {
        if self.cols != v.len() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMat {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves `A·X = B` for Hermitian positive-definite `A` by Cholesky
/// factorization; no explicit inverse is formed.
pub fn hermitian_solve(a: &ComplexMat, b: &ComplexMat) -> Result<ComplexMat> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!(
            "A is {}x{}, not square",
            n,
            a.cols()
        )));
    }
    if b.rows() != n {
        return Err(Error::Dimension(format!(
            "A is {n}x{n} but B has {} rows",
            b.rows()
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let tol = 1e-10 * a.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..=i {
            let dev = (a[(i, j)] - a[(j, i)].conj()).norm();
            if dev > tol {
                return Err(Error::NotHermitian {
                    row: i,
                    col: j,
                    deviation: dev,
                });
            }
        }
    }
    let mut factor = a.data.clone();
    cholesky_in_place(&mut factor, n)?;
    let mut x = ComplexMat::zeros(n, b.cols());
    let mut rhs = vec![ZERO; n];
    for j in 0..b.cols() {
        for i in 0..n {
            rhs[i] = b[(i, j)];
        }
        cholesky_solve_in_place(&factor, n, &mut rhs);
        for i in 0..n {
            x[(i, j)] = rhs[i];
        }
    }
    Ok(x)
}

/// Overwrites the lower triangle of the row-major `n×n` buffer with the
/// Cholesky factor `G` (`A = G·Gᴴ`). Only the lower triangle of `a` is read.
pub fn cholesky_in_place(a: &mut [Complex64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let g = d.sqrt();
        a[j * n + j] = Complex64::new(g, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / g;
        }
    }
    Ok(())
}

/// Solves `G·Gᴴ·x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve_in_place(g: &[Complex64], n: usize, b: &mut [Complex64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= g[i * n + k] * b[k];
        }
        b[i] = s / g[i * n + i].re;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= g[k * n + i].conj() * b[k];
        }
        b[i] = s / g[i * n + i].re;
    }
}

/// Hermitian matrix with nonzeros only within `bandwidth` of the diagonal.
/// The lower band is stored row by row: `(i, d)` holds `A[i, i-d]`.
#[derive(Debug, Clone)]
pub struct BandedHermitian {
    n: usize,
    bandwidth: usize,
    lower: Vec<Complex64>,
}

impl BandedHermitian {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            lower: vec![ZERO; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Entry `A[i, j]`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            let d = i - j;
            if d > self.bandwidth {
                ZERO
            } else {
                self.lower[i * (self.bandwidth + 1) + d]
            }
        } else {
            self.get(j, i).conj()
        }
    }

    /// Adds `v` to `A[i, j]` for `i ≥ j` (and implicitly its conjugate to `A[j, i]`).
    pub fn add_lower(&mut self, i: usize, j: usize, v: Complex64) {
        debug_assert!(i >= j && i - j <= self.bandwidth);
        self.lower[i * (self.bandwidth + 1) + (i - j)] += v;
    }

    pub fn to_dense(&self) -> ComplexMat {
        ComplexMat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `A = L·D·Lᴴ` with unit lower-triangular banded `L` and positive `D`.
    pub fn factor(&self) -> Result<BandedLdl> {
        let n = self.n;
        let p = self.bandwidth;
        let w = p + 1;
        let mut l = vec![ZERO; n * w];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..i {
                let mut s = self.lower[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(p));
                for k in klo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)].conj() * d[k];
                }
                l[i * w + (i - j)] = s / d[j];
            }
            let mut di = self.lower[i * w].re;
            for k in lo..i {
                di -= l[i * w + (i - k)].norm_sqr() * d[k];
            }
            if !(di > 0.0) || !di.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: i,
                    value: di,
                });
            }
            d[i] = di;
            l[i * w] = Complex64::new(1.0, 0.0);
        }
        Ok(BandedLdl {
            n,
            bandwidth: p,
            l,
            d,
        })
    }
}

/// Banded `LDLᴴ` factor.
#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bandwidth: usize,
    /// `(i, d)` holds `L[i, i-d]`.
    l: Vec<Complex64>,
    d: Vec<f64>,
}

impl BandedLdl {
    fn l_at(&self, i: usize, j: usize) -> Complex64 {
        self.l[i * (self.bandwidth + 1) + (i - j)]
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let p = self.bandwidth;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= self.l_at(i, k) * b[k];
            }
            b[i] = s;
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + p + 1).min(n) {
                s -= self.l_at(k, i).conj() * b[k];
            }
            b[i] = s;
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> ComplexVec {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Entries of `A⁻¹` inside the band (Takahashi recursion), `O(n·p²)`.
    pub fn band_inverse(&self) -> BandInverse {
        let n = self.n;
        let p = self.bandwidth;
        let w = p + 1;
        let mut z = BandInverse {
            n,
            bandwidth: p,
            upper: vec![ZERO; n * w],
        };
        for i in (0..n).rev() {
            let hi = (i + p).min(n - 1);
            for j in (i + 1..=hi).rev() {
                let mut s = ZERO;
                for k in i + 1..=hi {
                    s -= self.l_at(k, i).conj() * z.get(k, j);
                }
                z.upper[i * w + (j - i)] = s;
            }
            let mut s = Complex64::new(1.0 / self.d[i], 0.0);
            for k in i + 1..=hi {
                s -= self.l_at(k, i).conj() * z.get(k, i);
            }
            z.upper[i * w] = Complex64::new(s.re, 0.0);
        }
        z
    }
}

/// Band of a Hermitian inverse; `(i, d)` holds `Z[i, i+d]`.
#[derive(Debug, Clone)]
pub struct BandInverse {
    n: usize,
    bandwidth: usize,
    upper: Vec<Complex64>,
}

impl BandInverse {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Z[i, j]` for `|i - j| ≤ bandwidth`.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j >= i {
            debug_assert!(j - i <= self.bandwidth);
            self.upper[i * (self.bandwidth + 1) + (j - i)]
        } else {
            self.get(j, i).conj()
        }
    }

    /// Real part of `hᴴ·Z[o..o+len, o..o+len]·h` for `h` supported at offset `o`.
    pub fn quadratic_form(&self, offset: usize, h: &[Complex64]) -> f64 {
        let mut acc = ZERO;
        for (a, ha) in h.iter().enumerate() {
            for (b, hb) in h.iter().enumerate() {
                acc += ha.conj() * self.get(offset + a, offset + b) * hb;
            }
        }
        acc.re
    }
}

/// Scalar proper complex Gaussian `CN(mean, var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMsg {
    pub mean: Complex64,
    pub var: f64,
}

impl GaussianMsg {
    pub fn new(mean: Complex64, var: f64) -> Result<Self> {
        if !(var >= 0.0) || !mean.re.is_finite() || !mean.im.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Gaussian message needs finite mean and var >= 0, got ({mean}, {var})"
            )));
        }
        Ok(Self { mean, var })
    }

    pub fn real(mean: f64, var: f64) -> Result<Self> {
        Self::new(Complex64::new(mean, 0.0), var)
    }

    /// Variance clamped from below.
    pub fn floored(self, eps: f64) -> Self {
        Self {
            mean: self.mean,
            var: self.var.max(eps),
        }
    }
}

/// Quotient `num / den` of two Gaussians, renormalized.
///
/// With `num = (μ, s²)` and `den = (m, η)` this is
/// `z = (μη − m·s²)/(η − s²)` and `v² = s²η/(η − s²)`.
pub fn gaussian_divide(num: GaussianMsg, den: GaussianMsg) -> Result<GaussianMsg> {
    if den.var.is_infinite() {
        return Ok(num);
    }
    let gap = den.var - num.var;
    if !(gap > 0.0) {
        return Err(Error::NonPositiveVariance(gap));
    }
    let mean = (num.mean * den.var - den.mean * num.var) / gap;
    let var = num.var * den.var / gap;
    Ok(GaussianMsg { mean, var })
}

/// Product of two Gaussian densities: the normalized result and the log of
/// the scale factor `CN(a.mean; b.mean, a.var + b.var)`.
pub fn gaussian_product(a: GaussianMsg, b: GaussianMsg) -> Result<(GaussianMsg, f64)> {
    if !(a.var > 0.0 && b.var > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "product needs positive variances, got {} and {}",
            a.var, b.var
        )));
    }
    let prec = 1.0 / a.var + 1.0 / b.var;
    let var = 1.0 / prec;
    let mean = (a.mean / a.var + b.mean / b.var) * var;
    let sum = a.var + b.var;
    let log_scale = -(std::f64::consts::PI * sum).ln() - (a.mean - b.mean).norm_sqr() / sum;
    let out = GaussianMsg::new(mean, var)?;
    Ok((out, log_scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> ComplexMat {
        ComplexMat::from_fn(r, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hpd(rng: &mut ChaCha8Rng, n: usize) -> ComplexMat {
        let g = random_mat(rng, n, n);
        g.conj_transpose()
            .matmul(&g)
            .unwrap()
            .add(&ComplexMat::identity(n))
            .unwrap()
    }

    /// Gauss-Jordan elimination with partial pivoting; independent of the
    /// Cholesky route.
    fn gauss_solve(a: &ComplexMat, b: &[Complex64]) -> ComplexVec {
        let n = a.rows();
        let mut m: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                let mut row: Vec<_> = (0..n).map(|j| a[(i, j)]).collect();
                row.push(b[i]);
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| m[x][col].norm().partial_cmp(&m[y][col].norm()).unwrap())
                .unwrap();
            m.swap(col, piv);
            let p = m[col][col];
            for j in col..=n {
                m[col][j] /= p;
            }
            for i in 0..n {
                if i != col {
                    let f = m[i][col];
                    for j in col..=n {
                        let v = m[col][j];
                        m[i][j] -= f * v;
                    }
                }
            }
        }
        m.into_iter().map(|row| row[n]).collect()
    }

    #[test]
    fn solve_identity_returns_rhs() {
        let b = ComplexMat::column(&[c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0)]);
        let x = hermitian_solve(&ComplexMat::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_scaled_identity() {
        let a = ComplexMat::identity(2).scale(2.0);
        let x = hermitian_solve(&a, &ComplexMat::identity(2)).unwrap();
        let want = ComplexMat::identity(2).scale(0.5);
        assert!(x.sub(&want).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn solve_matches_gauss_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hpd(&mut rng, 8);
        let b: ComplexVec = (0..8)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let x = hermitian_solve(&a, &ComplexMat::column(&b)).unwrap();
        let oracle = gauss_solve(&a, &b);
        for i in 0..8 {
            assert!((x[(i, 0)] - oracle[i]).norm() < 1e-10);
        }
        let resid = a.mul_vec(&x.col(0)).unwrap();
        let err = resid
            .iter()
            .zip(&b)
            .map(|(r, b)| (r - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn residual_bound_up_to_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &n in &[1usize, 2, 7, 16, 33, 64] {
            let a = random_hpd(&mut rng, n);
            let b = random_mat(&mut rng, n, 3);
            let x = hermitian_solve(&a, &b).unwrap();
            let r = a.matmul(&x).unwrap().sub(&b).unwrap();
            assert!(
                r.max_abs() <= 1e-9 * b.max_abs(),
                "n={n} residual {}",
                r.max_abs()
            );
        }
    }

    #[test]
    fn indefinite_matrix_names_pivot() {
        let mut a = ComplexMat::identity(3);
        a[(2, 2)] = c(-1.0, 0.0);
        match hermitian_solve(&a, &ComplexMat::identity(3)) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected pivot error, got {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut a = ComplexMat::identity(2);
        a[(1, 0)] = c(0.5, 0.0);
        assert!(matches!(
            hermitian_solve(&a, &ComplexMat::identity(2)),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn banded_factor_and_band_inverse_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, p) in &[(1usize, 0usize), (5, 1), (12, 2), (20, 4), (9, 8)] {
            let mut band = BandedHermitian::zeros(n, p);
            for i in 0..n {
                band.add_lower(i, i, c(3.0 + p as f64 + rng.random_range(0.0..1.0), 0.0));
                for j in i.saturating_sub(p)..i {
                    band.add_lower(
                        i,
                        j,
                        c(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                    );
                }
            }
            let dense = band.to_dense();
            let ldl = band.factor().unwrap();
            let b: ComplexVec = (0..n)
                .map(|_| c(rng.random_range(-1.0..1.0), 0.3))
                .collect();
            let x = ldl.solve(&b);
            let oracle = gauss_solve(&dense, &b);
            for i in 0..n {
                assert!((x[i] - oracle[i]).norm() < 1e-12);
            }
            let z = ldl.band_inverse();
            for j in 0..n {
                let mut e = vec![c(0.0, 0.0); n];
                e[j] = c(1.0, 0.0);
                let col = gauss_solve(&dense, &e);
                for i in j.saturating_sub(p)..(j + p + 1).min(n) {
                    assert!(
                        (z.get(i, j) - col[i]).norm() < 1e-12,
                        "n={n} p={p} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn divide_by_flat_is_identity() {
        let num = GaussianMsg::new(c(0.3, -0.2), 0.4).unwrap();
        let den = GaussianMsg::real(0.0, f64::INFINITY).unwrap();
        assert_eq!(gaussian_divide(num, den).unwrap(), num);
        let den = GaussianMsg::real(0.0, 1e12).unwrap();
        let q = gaussian_divide(num, den).unwrap();
        assert!((q.mean - num.mean).norm() < 1e-9 && (q.var - num.var).abs() < 1e-9);
    }

    #[test]
    fn divide_hand_value() {
        let q = gaussian_divide(
            GaussianMsg::real(1.0, 0.5).unwrap(),
            GaussianMsg::real(1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!((q.mean - c(1.0, 0.0)).norm() < 1e-15);
        assert!((q.var - 1.0).abs() < 1e-15);
    }

    #[test]
    fn divide_rejects_wider_numerator() {
        let r = gaussian_divide(
            GaussianMsg::real(0.0, 2.0).unwrap(),
            GaussianMsg::real(0.0, 1.0).unwrap(),
        );
        assert!(matches!(r, Err(Error::NonPositiveVariance(_))));
    }

    #[test]
    fn product_equal_and_symmetric() {
        let (p, _) = gaussian_product(
            GaussianMsg::real(0.0, 1.0).unwrap(),
            GaussianMsg::real(0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(p, GaussianMsg::real(0.0, 0.5).unwrap());
        let (p, _) = gaussian_product(
            GaussianMsg::real(1.0, 1.0).unwrap(),
            GaussianMsg::real(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(p, GaussianMsg::real(0.0, 0.5).unwrap());
    }

    /// A proper complex Gaussian with real mean factors into independent
    /// real and imaginary parts of variance `var/2`, so a 1-D quadrature
    /// over each axis recovers the product's moments and scale.
    #[test]
    fn product_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let a =
                GaussianMsg::real(rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0)).unwrap();
            let b =
                GaussianMsg::real(rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0)).unwrap();
            let (p, log_scale) = gaussian_product(a, b).unwrap();
            let dens = |x: f64, m: f64, v: f64| {
                (-(x - m).powi(2) / v).exp() / (std::f64::consts::PI * v).sqrt()
            };
            let (lo, hi, steps) = (-12.0, 12.0, 24_000);
            let h = (hi - lo) / steps as f64;
            let (mut z_re, mut m1, mut m2, mut z_im) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..=steps {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 } * h;
                let f = dens(x, a.mean.re, a.var) * dens(x, b.mean.re, b.var);
                z_re += w * f;
                m1 += w * f * x;
                m2 += w * f * x * x;
                z_im += w * dens(x, 0.0, a.var) * dens(x, 0.0, b.var);
            }
            let mean = m1 / z_re;
            let var_re = m2 / z_re - mean * mean;
            assert!((mean - p.mean.re).abs() < 1e-9);
            assert!((2.0 * var_re - p.var).abs() < 1e-9);
            assert!(((z_re * z_im).ln() - log_scale).abs() < 1e-9);
        }
    }

    proptest::proptest! {
        #[test]
        fn divide_inverts_product(
            ar in -3.0f64..3.0, ai in -3.0f64..3.0, av in 0.01f64..5.0,
            br in -3.0f64..3.0, bi in -3.0f64..3.0, bv in 0.01f64..5.0,
        ) {
            let a = GaussianMsg::new(c(ar, ai), av).unwrap();
            let b = GaussianMsg::new(c(br, bi), bv).unwrap();
            let (p, _) = gaussian_product(a, b).unwrap();
            let back = gaussian_divide(p, b).unwrap();
            let scale = 1.0 + a.mean.norm() + b.mean.norm() * av / bv;
            proptest::prop_assert!((back.mean - a.mean).norm() <= 1e-12 * scale * (1.0 + av / bv));
            proptest::prop_assert!((back.var - a.var).abs() <= 1e-12 * av * (1.0 + av / bv));
        }
    }
}

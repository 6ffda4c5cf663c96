//! Dense matrices and the stochastic-kernel primitives built on them.
//!
//! [`Matrix`] is a row-major wrapper whose factorizations, products and
//! exponential delegate to `nalgebra`; uniformization and the generator
//! utilities are implemented here.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row sums of a generator must vanish to this tolerance.
pub const GENERATOR_ROW_SUM_TOL: f64 = 1e-12;

/// Default Poisson tail mass at which the uniformization series is cut.
pub const DEFAULT_POISSON_TAIL: f64 = 1e-13;

/// Largest uniformized horizon `Λt` handled by a single series; longer
/// horizons are split into `2^s` equal steps and recombined by squaring.
const MAX_SERIES_HORIZON: f64 = 32.0;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from nested rows. Fails on ragged or empty input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if n == 0 || m == 0 {
            return Err(Error::Dimension("matrix must have at least one row and one column".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {m}",
                rows[bad].len()
            )));
        }
        Ok(Matrix { rows: n, cols: m, data: rows.concat() })
    }

    /// Single-row matrix.
    pub fn row_vector(v: &[f64]) -> Self {
        Matrix { rows: 1, cols: v.len(), data: v.to_vec() }
    }

    /// Single-column matrix.
    pub fn col_vector(v: &[f64]) -> Self {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn ones_col(n: usize) -> Self {
        Matrix { rows: n, cols: 1, data: vec![1.0; n] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Max-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Copy of the `rows × cols` sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Adds `b` into the sub-block starting at `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] += b[(i, j)];
            }
        }
    }

    /// Principal sub-matrix on the given index set.
    pub fn select(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    /// `v · self` for a row vector `v`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "row vector length mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// `self · v` for a column vector `v`.
    pub fn right_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "column vector length mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        Matrix::from_dense(&(self.to_dense() * other.to_dense()))
    }

    fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_dense(m: &DMatrix<f64>) -> Matrix {
        Matrix { rows: m.nrows(), cols: m.ncols(), data: m.transpose().as_slice().to_vec() }
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<Lu> {
        Lu::new(self)
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        self.lu()?.solve(rhs)
    }

    /// Solves `x · self = b` for a row vector `x`.
    pub fn solve_left(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = self.transpose().solve(&Matrix::col_vector(b))?;
        Ok(x.data)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.rows))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Partial-pivot LU factors of a square matrix. Construction fails when a
/// pivot is negligible relative to the largest entry.
pub struct Lu {
    n: usize,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Lu {
    fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::NotSquare { rows: a.rows, cols: a.cols });
        }
        let n = a.rows;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let lu = a.to_dense().lu();
        let u = lu.u();
        if let Some(k) = (0..n).find(|&k| u[(k, k)].abs() <= scale * 1e-14) {
            return Err(Error::Singular(format!("pivot {k} of {n} vanishes")));
        }
        Ok(Lu { n, lu })
    }

    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if rhs.rows != self.n {
            return Err(Error::Dimension(format!("rhs has {} rows, system has {}", rhs.rows, self.n)));
        }
        let x = self.lu.solve(&rhs.to_dense()).ok_or_else(|| Error::Singular("LU solve failed".into()))?;
        Ok(Matrix::from_dense(&x))
    }
}

/// A validated infinitesimal generator: nonnegative off-diagonal entries and
/// zero row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix(Matrix);

impl GeneratorMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tolerance(m, GENERATOR_ROW_SUM_TOL)
    }

    pub fn with_tolerance(m: Matrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare { rows: m.rows, cols: m.cols });
        }
        if !m.is_finite() {
            return Err(Error::InvalidGenerator("non-finite entry".into()));
        }
        for i in 0..m.rows {
            for j in 0..m.cols {
                if i != j && m[(i, j)] < 0.0 {
                    return Err(Error::InvalidGenerator(format!(
                        "negative off-diagonal entry {} at ({i}, {j})",
                        m[(i, j)]
                    )));
                }
            }
            let s: f64 = m.row(i).iter().sum();
            if s.abs() > tol {
                return Err(Error::InvalidGenerator(format!("row {i} sums to {s:e}")));
            }
        }
        Ok(GeneratorMatrix(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }
}

/// Kronecker product.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_dense(&a.to_dense().kronecker(&b.to_dense()))
}

/// Kronecker product of a chain of factors, left to right.
pub fn kron_all(factors: &[&Matrix]) -> Matrix {
    factors
        .iter()
        .fold(Matrix::identity(1), |acc, f| kron(&acc, f))
}

/// Kronecker sum `a ⊗ I + I ⊗ b`.
pub fn kron_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    for m in [a, b] {
        if !m.is_square() {
            return Err(Error::NotSquare { rows: m.rows, cols: m.cols });
        }
    }
    Ok(&kron(a, &Matrix::identity(b.rows)) + &kron(&Matrix::identity(a.rows), b))
}

/// Options for the uniformization series.
#[derive(Clone, Copy, Debug)]
pub struct UniformizationOptions {
    /// Poisson tail mass at which the series is truncated.
    pub poisson_tail: f64,
}

impl Default for UniformizationOptions {
    fn default() -> Self {
        UniformizationOptions { poisson_tail: DEFAULT_POISSON_TAIL }
    }
}

/// `exp(q t)` for a generator by uniformization.
pub fn expm_generator(q: &GeneratorMatrix, t: f64) -> Result<Matrix> {
    expm_generator_with(q, t, UniformizationOptions::default())
}

pub fn expm_generator_with(q: &GeneratorMatrix, t: f64, opts: UniformizationOptions) -> Result<Matrix> {
    expm_uniformized(q.matrix(), t, opts)
}

/// Uniformization for any matrix with nonnegative off-diagonal entries and
/// nonpositive row sums (generators and subgenerators alike).
pub fn expm_uniformized(q: &Matrix, t: f64, opts: UniformizationOptions) -> Result<Matrix> {
    check_time(t)?;
    if !q.is_square() {
        return Err(Error::NotSquare { rows: q.rows, cols: q.cols });
    }
    let n = q.rows;
    let rate = (0..n).map(|i| -q[(i, i)]).fold(0.0, f64::max);
    if t == 0.0 || rate == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let jump = &Matrix::identity(n) + &q.scale(1.0 / rate);

    let mut steps = 0u32;
    let mut tau = t;
    while rate * tau > MAX_SERIES_HORIZON {
        tau *= 0.5;
        steps += 1;
    }
    let mut result = poisson_series(&jump, rate * tau, opts.poisson_tail);
    for _ in 0..steps {
        result = result.matmul(&result);
    }
    Ok(result)
}

/// `Σ_k Poisson(μ; k) P^k`, truncated once the remaining Poisson mass drops
/// below `tail`.
fn poisson_series(p: &Matrix, mu: f64, tail: f64) -> Matrix {
    let n = p.rows;
    let mut weight = (-mu).exp();
    let mut cumulative = weight;
    let mut power = Matrix::identity(n);
    let mut acc = Matrix::identity(n).scale(weight);
    let max_terms = (mu + 12.0 * mu.sqrt() + 60.0) as usize;
    for k in 1..=max_terms {
        if 1.0 - cumulative < tail {
            break;
        }
        power = power.matmul(p);
        weight *= mu / k as f64;
        cumulative += weight;
        for (a, b) in acc.data.iter_mut().zip(&power.data) {
            *a += weight * b;
        }
    }
    acc
}

/// `p0 · exp(q t)` without forming the exponential: the horizon is cut into
/// segments with `Λτ ≤ 32` and each segment is a truncated Poisson mixture
/// of vector-matrix products.
pub fn uniformized_vector(q: &Matrix, p0: &[f64], t: f64, opts: UniformizationOptions) -> Result<Vec<f64>> {
    check_time(t)?;
    if !q.is_square() {
        return Err(Error::NotSquare { rows: q.rows, cols: q.cols });
    }
    if p0.len() != q.rows {
        return Err(Error::Dimension(format!("vector of length {} against {}x{} matrix", p0.len(), q.rows, q.cols)));
    }
    let n = q.rows;
    let rate = (0..n).map(|i| -q[(i, i)]).fold(0.0, f64::max);
    if t == 0.0 || rate == 0.0 {
        return Ok(p0.to_vec());
    }
    let jump = &Matrix::identity(n) + &q.scale(1.0 / rate);
    let segments = (rate * t / MAX_SERIES_HORIZON).ceil().max(1.0);
    let mu = rate * t / segments;
    let mut p = p0.to_vec();
    for _ in 0..segments as usize {
        let mut weight = (-mu).exp();
        let mut cumulative = weight;
        let mut term = p.clone();
        let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
        let max_terms = (mu + 12.0 * mu.sqrt() + 60.0) as usize;
        for k in 1..=max_terms {
            if 1.0 - cumulative < opts.poisson_tail {
                break;
            }
            term = jump.left_mul(&term);
            weight *= mu / k as f64;
            cumulative += weight;
            for (a, b) in acc.iter_mut().zip(&term) {
                *a += weight * b;
            }
        }
        p = acc;
    }
    Ok(p)
}

/// `∫₀ᵗ exp(q u) du`, read off the upper-right block of the exponential of
/// the augmented matrix `[[q, I], [0, 0]]`.
pub fn expm_integral(q: &GeneratorMatrix, t: f64) -> Result<Matrix> {
    integral_of_exp(q.matrix(), t)
}

/// Same as [`expm_integral`] for an arbitrary square matrix.
pub fn integral_of_exp(q: &Matrix, t: f64) -> Result<Matrix> {
    check_time(t)?;
    if !q.is_square() {
        return Err(Error::NotSquare { rows: q.rows, cols: q.cols });
    }
    let n = q.rows;
    if t == 0.0 {
        return Ok(Matrix::zeros(n, n));
    }
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    aug.add_block(0, 0, q);
    aug.add_block(0, n, &Matrix::identity(n));
    let e = expm_pade(&aug.scale(t))?;
    Ok(e.block(0, n, n, n))
}

/// General matrix exponential (scaling and squaring with a Padé
/// approximant).
pub fn expm_pade(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows, cols: a.cols });
    }
    let e = Matrix::from_dense(&a.to_dense().exp());
    if !e.is_finite() {
        return Err(Error::Singular("matrix exponential overflowed".into()));
    }
    Ok(e)
}

/// Stationary vector of an irreducible generator: the last column of `q` is
/// replaced by ones and `π · (q* | e) = (0, …, 0, 1)` is solved.
pub fn stationary_of_generator(q: &GeneratorMatrix) -> Result<Vec<f64>> {
    let m = q.matrix();
    let n = m.rows;
    let mut a = m.clone();
    for i in 0..n {
        a[(i, n - 1)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    a.solve_left(&rhs).map_err(|e| match e {
        Error::Singular(msg) => Error::Reducible(msg),
        other => other,
    })
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_generator(n: usize, rates: &[f64]) -> GeneratorMatrix {
        let mut m = Matrix::zeros(n, n);
        let mut it = rates.iter().cycle();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if i != j {
                    let r = *it.next().unwrap();
                    m[(i, j)] = r;
                    s += r;
                }
            }
            m[(i, i)] = -s;
        }
        GeneratorMatrix::with_tolerance(m, 1e-10).unwrap()
    }

    fn two_state() -> GeneratorMatrix {
        GeneratorMatrix::new(Matrix::from_rows(&[vec![-2.9, 2.9], vec![3.0, -3.0]]).unwrap()).unwrap()
    }

    #[test]
    fn kron_identity_cases() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(3)), Matrix::identity(6));
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-4.0, 5.0, 6.5]]).unwrap();
        assert_eq!(kron(&a, &Matrix::identity(1)), a);
    }

    #[test]
    fn kron_matches_quadruple_loop() {
        let a = Matrix::from_rows(&[vec![0.3, -1.2], vec![2.0, 0.7], vec![-0.5, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.5, -0.25], vec![3.0, 0.125]]).unwrap();
        let k = kron(&a, &b);
        assert_eq!((k.rows(), k.cols()), (6, 4));
        for i in 0..3 {
            for j in 0..2 {
                for r in 0..2 {
                    for c in 0..2 {
                        assert_eq!(k[(i * 2 + r, j * 2 + c)], a[(i, j)] * b[(r, c)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_sum_cases() {
        let r = kron_sum(&Matrix::from_rows(&[vec![-1.0]]).unwrap(), &Matrix::from_rows(&[vec![-2.0]]).unwrap())
            .unwrap();
        assert_eq!(r, Matrix::from_rows(&[vec![-3.0]]).unwrap());

        let a = Matrix::from_rows(&[vec![-1.0, 1.0], vec![0.5, -0.5]]).unwrap();
        assert_eq!(kron_sum(&a, &Matrix::zeros(3, 3)).unwrap(), kron(&a, &Matrix::identity(3)));

        let b = Matrix::from_rows(&[vec![-0.2, 0.2], vec![4.0, -4.0]]).unwrap();
        let s = kron_sum(&a, &b).unwrap();
        for (i, rs) in s.row_sums().iter().enumerate() {
            let expect = a.row_sums()[i / 2] + b.row_sums()[i % 2];
            assert!((rs - expect).abs() < 1e-14);
        }

        assert!(matches!(
            kron_sum(&Matrix::zeros(2, 3), &b),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn expm_zero_time_is_identity() {
        assert_eq!(expm_generator(&two_state(), 0.0).unwrap(), Matrix::identity(2));
        assert!(matches!(expm_generator(&two_state(), -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn expm_two_state_closed_form() {
        // P(t) = Π + e^{-(a+b)t} (I - Π) with Π rows (b, a)/(a+b)
        let (a, b) = (2.9, 3.0);
        let p = expm_generator(&two_state(), 1.0).unwrap();
        let d = (-(a + b) * 1.0f64).exp();
        let pi = [b / (a + b), a / (a + b)];
        let expect = Matrix::from_fn(2, 2, |i, j| pi[j] + d * (if i == j { 1.0 } else { 0.0 } - pi[j]));
        assert!(p.max_abs_diff(&expect) < 1e-10);
        assert!(expm_pade(&two_state().matrix().scale(1.0)).unwrap().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn expm_long_horizon_reaches_stationary() {
        let q = random_generator(4, &[0.3, 1.7, 0.05, 2.2, 0.9]);
        let pi = stationary_of_generator(&q).unwrap();
        let p = expm_generator(&q, 200.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((p[(i, j)] - pi[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn expm_integral_cases() {
        let q = two_state();
        assert!(expm_integral(&q, 0.0).unwrap().is_zero());
        let z = GeneratorMatrix::new(Matrix::zeros(1, 1)).unwrap();
        assert!((expm_integral(&z, 7.0).unwrap()[(0, 0)] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn expm_integral_matches_simpson() {
        let q = random_generator(3, &[0.4, 1.1, 2.5, 0.3, 0.8, 1.9]);
        let t = 2.0;
        let m = expm_integral(&q, t).unwrap();
        // composite Simpson on 400 panels
        let n = 400;
        let h = t / n as f64;
        let mut acc = Matrix::zeros(3, 3);
        for k in 0..=n {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc = &acc + &expm_generator(&q, k as f64 * h).unwrap().scale(w * h / 3.0);
        }
        assert!(m.max_abs_diff(&acc) < 1e-7);
        for s in m.row_sums() {
            assert!((s - t).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_examples() {
        let w = stationary_of_generator(&two_state()).unwrap();
        assert!((w[0] - 3.0 / 5.9).abs() < 1e-14 && (w[1] - 2.9 / 5.9).abs() < 1e-14);
        assert!((w[0] - 0.50847).abs() < 1e-5);

        let sym = GeneratorMatrix::new(Matrix::from_rows(&[vec![-0.7, 0.7], vec![0.7, -0.7]]).unwrap()).unwrap();
        let w = stationary_of_generator(&sym).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);

        let q = random_generator(4, &[0.3, 1.7, 0.05, 2.2, 0.9]);
        let pi = stationary_of_generator(&q).unwrap();
        let res = q.matrix().left_mul(&pi);
        assert!(res.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn reducible_generator_is_reported() {
        let q = GeneratorMatrix::new(
            Matrix::from_rows(&[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![1.0, 1.0, -2.0]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(stationary_of_generator(&q), Err(Error::Reducible(_))));
    }

    #[test]
    fn generator_validation() {
        let bad = Matrix::from_rows(&[vec![-1.0, 1.1], vec![1.0, -1.0]]).unwrap();
        assert!(GeneratorMatrix::new(bad).is_err());
        let neg = Matrix::from_rows(&[vec![1.0, -1.0], vec![1.0, -1.0]]).unwrap();
        assert!(GeneratorMatrix::new(neg).is_err());
    }

    fn small_matrix(max: usize) -> impl Strategy<Value = Matrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            prop::collection::vec(-3.0f64..3.0, r * c)
                .prop_map(move |d| Matrix::from_fn(r, c, |i, j| d[i * c + j]))
        })
    }

    fn small_generator() -> impl Strategy<Value = GeneratorMatrix> {
        (2usize..=4).prop_flat_map(|n| {
            prop::collection::vec(0.0f64..3.0, n * n).prop_map(move |d| {
                let mut m = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { d[i * n + j] });
                for i in 0..n {
                    let s: f64 = m.row(i).iter().sum();
                    m[(i, i)] = -s;
                }
                GeneratorMatrix::with_tolerance(m, 1e-12).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kron_is_associative(a in small_matrix(3), b in small_matrix(3), c in small_matrix(3)) {
            let l = kron(&kron(&a, &b), &c);
            let r = kron(&a, &kron(&b, &c));
            prop_assert!(l.max_abs_diff(&r) < 1e-12);
        }

        #[test]
        fn kron_is_bilinear(a in small_matrix(3), b in small_matrix(3), s in -2.0f64..2.0) {
            let a2 = a.scale(s);
            let l = kron(&(&a + &a2), &b);
            let r = &kron(&a, &b) + &kron(&a2, &b);
            prop_assert!(l.max_abs_diff(&r) < 1e-12);
            let l = kron(&a, &b.scale(s));
            prop_assert!(l.max_abs_diff(&kron(&a, &b).scale(s)) < 1e-12);
        }

        #[test]
        fn expm_semigroup(q in small_generator(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
            let lhs = expm_generator(&q, s + t).unwrap();
            let rhs = expm_generator(&q, s).unwrap().matmul(&expm_generator(&q, t).unwrap());
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
            for r in lhs.row_sums() {
                prop_assert!((r - 1.0).abs() < 1e-10);
            }
            prop_assert!(lhs.as_slice().iter().all(|&x| (-1e-15..=1.0 + 1e-12).contains(&x)));
        }

        #[test]
        fn integral_derivative_is_exponential(q in small_generator(), t in 0.1f64..4.0) {
            let h = 1e-4;
            let up = expm_integral(&q, t + h).unwrap();
            let down = expm_integral(&q, t - h).unwrap();
            let fd = (&up - &down).scale(0.5 / h);
            prop_assert!(fd.max_abs_diff(&expm_generator(&q, t).unwrap()) < 1e-6);
        }

        #[test]
        fn stationary_left_annihilates_and_permutes(q in small_generator(), seed in 0usize..24) {
            let pi = match stationary_of_generator(&q) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            let res = q.matrix().left_mul(&pi);
            prop_assert!(res.iter().all(|r| r.abs() < 1e-12));

            let n = q.dim();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.rotate_left(seed % n);
            let qp = GeneratorMatrix::with_tolerance(
                Matrix::from_fn(n, n, |i, j| q.matrix()[(perm[i], perm[j])]),
                1e-12,
            ).unwrap();
            let pip = stationary_of_generator(&qp).unwrap();
            for i in 0..n {
                prop_assert!((pip[i] - pi[perm[i]]).abs() < 1e-10);
            }
        }
    }
}

//! Small dense/banded matrix kit used by the discretization and the eigensolvers.
//!
//! Everything the solver assembles is banded once the two species are interleaved
//! node by node, so products and factorizations are O(n · bandwidth) rather than
//! O(n²). `DenseMatrix` exists for exports and for test oracles.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

/// Square matrix with `lower` sub-diagonals and `upper` super-diagonals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![T::zero(); n * (lower + upper + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    #[inline]
    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.lower >= i && j <= i + self.upper
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.lower - i]
        } else {
            T::zero()
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.lower - i] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: T) {
        let v = self.get(i, j);
        self.set(i, j, v + value);
    }

    #[inline]
    fn col_range(&self, i: usize) -> (usize, usize) {
        (i.saturating_sub(self.lower), (i + self.upper + 1).min(self.n))
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        let w = self.width();
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (lo, hi) = self.col_range(i);
            let row = &self.data[i * w..(i + 1) * w];
            let off = lo + self.lower - i;
            let mut acc = T::zero();
            for (k, &xj) in x[lo..hi].iter().enumerate() {
                acc += row[off + k] * xj;
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose_matvec_into(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        let w = self.width();
        for (i, &xi) in x.iter().enumerate().take(self.n) {
            let (lo, hi) = self.col_range(i);
            let row = &self.data[i * w..(i + 1) * w];
            let off = lo + self.lower - i;
            for (k, yj) in y[lo..hi].iter_mut().enumerate() {
                *yj += row[off + k] * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.upper, self.lower);
        for i in 0..self.n {
            let (lo, hi) = self.col_range(i);
            for j in lo..hi {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&mut self, shift: T) {
        for i in 0..self.n {
            self.add(i, i, shift);
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= factor);
        m
    }

    /// `self - other`, both with identical band layout.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.n, self.lower, self.upper), (other.n, other.lower, other.upper));
        let mut m = self.clone();
        m.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a -= b);
        m
    }

    pub fn inf_norm(&self) -> T {
        let w = self.width();
        (0..self.n)
            .map(|i| self.data[i * w..(i + 1) * w].iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest off-diagonal-signed row sum, `max_i (a_ii + sum_{j != i} |a_ij|)`.
    /// For a Metzler matrix this bounds the spectral bound from above and controls
    /// `||(lambda I - A)^{-1}||_inf <= 1 / (lambda - bound)`.
    pub fn log_inf_norm(&self) -> T {
        (0..self.n)
            .map(|i| {
                let (lo, hi) = self.col_range(i);
                (lo..hi)
                    .map(|j| if j == i { self.get(i, j) } else { self.get(i, j).abs() })
                    .sum::<T>()
            })
            .fold(T::neg_infinity(), T::max)
    }

    pub fn min_off_diagonal(&self) -> T {
        let mut m = T::infinity();
        for i in 0..self.n {
            let (lo, hi) = self.col_range(i);
            for j in (lo..hi).filter(|&j| j != i) {
                m = m.min(self.get(i, j));
            }
        }
        m
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (lo, hi) = self.col_range(i);
            for j in lo..hi {
                d.set(i, j, self.get(i, j));
            }
        }
        d
    }

    /// LU factorization with partial pivoting. Returns `None` for an exactly singular pivot.
    pub fn lu(&self) -> Option<BandLu<T>> {
        let n = self.n;
        let lower = self.lower;
        let upper = self.lower + self.upper;
        let mut f = BandMatrix::zeros(n, lower, upper);
        for i in 0..n {
            let (lo, hi) = self.col_range(i);
            for j in lo..hi {
                f.set(i, j, self.get(i, j));
            }
        }
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let last = (k + lower + 1).min(n);
            let mut p = k;
            let mut best = f.get(k, k).abs();
            for i in k + 1..last {
                let v = f.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return None;
            }
            let cend = (k + upper + 1).min(n);
            if p != k {
                for j in k..cend {
                    let a = f.get(k, j);
                    let b = f.get(p, j);
                    f.set(k, j, b);
                    f.set(p, j, a);
                }
            }
            pivots.push(p);
            let pivot = f.get(k, k);
            for i in k + 1..last {
                let l = f.get(i, k) / pivot;
                if l == T::zero() {
                    continue;
                }
                f.set(i, k, l);
                for j in k + 1..cend {
                    let v = f.get(i, j) - l * f.get(k, j);
                    f.set(i, j, v);
                }
            }
        }
        Some(BandLu { factors: f, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu<T> {
    factors: BandMatrix<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let f = &self.factors;
        let n = f.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != T::zero() {
                for i in k + 1..(k + f.lower + 1).min(n) {
                    b[i] -= f.get(i, k) * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..(i + f.upper + 1).min(n) {
                acc -= f.get(i, j) * b[j];
            }
            b[i] = acc / f.get(i, i);
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Outcome of [`power_iteration`].
#[derive(Debug, Clone)]
pub struct PowerOutcome<T> {
    /// Dominant eigenvalue estimate (the spectral radius for a nonnegative operator).
    pub value: T,
    /// Eigenvector estimate with sup-norm 1.
    pub vector: Vec<T>,
    pub iterations: usize,
    /// `||A x - value x||_inf` for the returned `x`.
    pub residual: T,
    pub converged: bool,
}

/// Power iteration for a nonnegative linear operator given as `apply(x, y): y = A x`.
///
/// Stops once `||A x - theta x||_inf <= tol * |theta|` with `theta = x.Ax / x.x`.
pub fn power_iteration<T, F>(mut apply: F, start: Vec<T>, tol: T, max_iter: usize) -> PowerOutcome<T>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    let n = start.len();
    let mut x = start;
    let s = crate::scalar::max_abs(&x);
    if s > T::zero() {
        x.iter_mut().for_each(|v| *v /= s);
    }
    let mut y = vec![T::zero(); n];
    let mut theta = T::zero();
    let mut residual = T::infinity();
    for it in 0..max_iter {
        apply(&x, &mut y);
        let xy: T = x.iter().zip(&y).map(|(&a, &b)| a * b).sum();
        let xx: T = x.iter().map(|&a| a * a).sum();
        theta = xy / xx;
        residual = x
            .iter()
            .zip(&y)
            .fold(T::zero(), |m, (&a, &b)| m.max((b - theta * a).abs()));
        if residual <= tol * theta.abs() {
            return PowerOutcome { value: theta, vector: x, iterations: it + 1, residual, converged: true };
        }
        let norm = crate::scalar::max_abs(&y);
        if norm == T::zero() {
            return PowerOutcome { value: T::zero(), vector: x, iterations: it + 1, residual: T::zero(), converged: true };
        }
        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    PowerOutcome { value: theta, vector: x, iterations: max_iter, residual, converged: false }
}

/// Outcome of [`perron_iteration`].
#[derive(Debug, Clone)]
pub struct PerronOutcome<T> {
    pub value: T,
    /// Collatz–Wielandt enclosure `lower <= rho <= upper` for the last iterate.
    pub lower: T,
    pub upper: T,
    /// Nonnegative iterate with sup-norm 1.
    pub vector: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> PerronOutcome<T> {
    /// Position of the spectral radius relative to `target`, if the enclosure settles it.
    pub fn compare(&self, target: T) -> Option<std::cmp::Ordering> {
        if self.upper < target {
            Some(std::cmp::Ordering::Less)
        } else if self.lower > target {
            Some(std::cmp::Ordering::Greater)
        } else {
            None
        }
    }
}

fn cw_bounds<T: Scalar>(x: &[T], y: &[T]) -> (T, T) {
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        if a > T::zero() {
            let r = b / a;
            lo = lo.min(r);
            hi = hi.max(r);
        } else if b > T::zero() {
            hi = T::infinity();
        }
    }
    if lo == T::infinity() {
        lo = T::zero();
    }
    (lo, hi)
}

/// Power iteration for a nonnegative operator that tracks Collatz–Wielandt
/// bounds. Converges when `upper - lower <= tol * value`; with `target` set it
/// also returns as soon as the enclosure lies strictly on one side of it.
pub fn perron_iteration<T, F>(
    mut apply: F,
    start: Vec<T>,
    tol: T,
    max_iter: usize,
    target: Option<T>,
) -> PerronOutcome<T>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    let n = start.len();
    let mut x = start;
    let s = crate::scalar::max_abs(&x);
    if s > T::zero() {
        x.iter_mut().for_each(|v| *v /= s);
    }
    let mut y = vec![T::zero(); n];
    let (mut value, mut lower, mut upper) = (T::zero(), T::zero(), T::infinity());
    for it in 0..max_iter {
        apply(&x, &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            let inf = T::infinity();
            return PerronOutcome { value: inf, lower: inf, upper: inf, vector: x, iterations: it + 1, converged: false };
        }
        (lower, upper) = cw_bounds(&x, &y);
        let xy: T = x.iter().zip(&y).map(|(&a, &b)| a * b).sum();
        let xx: T = x.iter().map(|&a| a * a).sum();
        value = (xy / xx).max(lower).min(upper);
        let done = upper - lower <= tol * value;
        let decided = target.is_some_and(|t| upper < t || lower > t);
        let norm = crate::scalar::max_abs(&y);
        if norm == T::zero() {
            return PerronOutcome {
                value: T::zero(),
                lower: T::zero(),
                upper: T::zero(),
                vector: x,
                iterations: it + 1,
                converged: true,
            };
        }
        if done || decided {
            return PerronOutcome { value, lower, upper, vector: x, iterations: it + 1, converged: done };
        }
        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    PerronOutcome { value, lower, upper, vector: x, iterations: max_iter, converged: false }
}

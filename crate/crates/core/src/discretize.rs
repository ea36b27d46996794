//! Fixed background lattice, quadrature, and the discrete operators built on it.
//!
//! Fields are stored on the whole lattice and vanish outside the active set, so
//! every operator can be applied to zero-padded vectors; the zero padding is the
//! Dirichlet ghost value.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, DenseMatrix};
use crate::model::{KernelSpec, ModelParams};
use crate::scalar::Scalar;

/// Uniform lattice `x_i = (i - cells) dx`, `i = 0..=2 cells`, symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid<T> {
    spacing: T,
    cells: usize,
    initial_cells: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Number of cells between the centre node and either window edge.
    pub fn half_cells(&self) -> usize {
        self.cells
    }

    pub fn half_width(&self) -> T {
        self.length_of(self.cells)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Trapezoid weights on the whole window.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn centre(&self) -> usize {
        self.cells
    }

    /// `h0` after snapping to the nearest node.
    pub fn snapped_h0(&self) -> T {
        self.length_of(self.initial_cells)
    }

    pub fn h0_cells(&self) -> usize {
        self.initial_cells
    }

    pub fn length_of(&self, cells: usize) -> T {
        T::from_usize_lossy(cells) * self.spacing
    }

    /// Nearest whole number of cells to `half_length` (never negative).
    pub fn cells_of(&self, half_length: T) -> usize {
        let r = (half_length / self.spacing).round();
        if r <= T::zero() {
            0
        } else {
            r.to_usize().unwrap_or(usize::MAX)
        }
    }

    /// Interior nodes of `[-m dx, m dx]`, i.e. `|x_i| < m dx`.
    pub fn centred_range(&self, m: usize) -> Range<usize> {
        if m == 0 {
            return self.cells..self.cells;
        }
        let m = m.min(self.cells);
        (self.cells + 1 - m)..(self.cells + m)
    }

    /// Nodes strictly inside the open interval `(lo, hi)`.
    pub fn open_range(&self, lo: T, hi: T) -> Range<usize> {
        let n = self.len();
        let first = self.nodes.partition_point(|&x| x <= lo);
        let end = self.nodes.partition_point(|&x| x < hi);
        first.min(n)..end.max(first.min(n))
    }
}

/// Builds the lattice. The window half-width is `window_factor * h0` rounded
/// outward to whole cells, and `h0` is snapped to the nearest node.
pub fn build_grid<T: Scalar>(h0: T, dx: T, window_factor: T) -> Result<Grid<T>> {
    if !(dx > T::zero()) || !dx.is_finite() {
        return Err(Error::InvalidGrid(format!("spacing must be positive (got {dx})")));
    }
    if !(window_factor >= T::lit(4.0)) {
        return Err(Error::InvalidGrid(format!("window factor must be at least 4 (got {window_factor})")));
    }
    if !(h0 > T::zero()) || !h0.is_finite() {
        return Err(Error::InvalidGrid(format!("h0 must be positive (got {h0})")));
    }
    if dx >= h0 {
        return Err(Error::GridTooCoarse { dx: dx.to_f64_lossy(), h0: h0.to_f64_lossy() });
    }
    let cells = (window_factor * h0 / dx - T::lit(1e-9)).ceil().to_usize().ok_or_else(|| {
        Error::InvalidGrid("window too large for the index type".into())
    })?;
    let initial_cells = (h0 / dx).round().to_usize().unwrap_or(1).max(1);
    let n = 2 * cells + 1;
    let nodes = (0..n).map(|i| (T::from_usize_lossy(i) - T::from_usize_lossy(cells)) * dx).collect();
    let mut weights = vec![dx; n];
    weights[0] = dx / T::lit(2.0);
    weights[n - 1] = dx / T::lit(2.0);
    Ok(Grid { spacing: dx, cells, initial_cells, nodes, weights })
}

/// Right tail mass `∫_d^∞ J(z) dz` of the kernel.
pub fn kernel_tail<T: Scalar>(kernel: &KernelSpec<T>, distance: T) -> T {
    kernel.tail(distance)
}

/// Discrete convolution `(W f)_i = Σ_j J(x_i - x_j) w_j f_j`.
///
/// Stored as the kernel stencil `J(k dx)`, `k = 0..=reach`, together with the
/// quadrature weights, so `W[i,j] / w_j = W[j,i] / w_i` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionOperator<T> {
    stencil: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> ConvolutionOperator<T> {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Largest index offset with a nonzero entry.
    pub fn reach(&self) -> usize {
        self.stencil.len() - 1
    }

    pub fn stencil(&self) -> &[T] {
        &self.stencil
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        let k = i.abs_diff(j);
        if k < self.stencil.len() {
            self.stencil[k] * self.weights[j]
        } else {
            T::zero()
        }
    }

    pub fn row_sum(&self, i: usize) -> T {
        let b = self.reach();
        let lo = i.saturating_sub(b);
        let hi = (i + b + 1).min(self.dim());
        (lo..hi).map(|j| self.get(i, j)).sum()
    }

    /// `out[i] = Σ_{j in range} W[i,j] f[j]` for `i in range`; other entries of
    /// `out` are untouched.
    pub fn apply_on(&self, range: Range<usize>, f: &[T], out: &mut [T]) {
        let b = self.reach();
        for i in range.clone() {
            let lo = i.saturating_sub(b).max(range.start);
            let hi = (i + b + 1).min(range.end);
            let mut acc = T::zero();
            for j in lo..hi {
                acc += self.stencil[i.abs_diff(j)] * self.weights[j] * f[j];
            }
            out[i] = acc;
        }
    }

    pub fn apply(&self, f: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_on(0..self.dim(), f, &mut out);
        out
    }

    /// Block restricted to `range` as a banded matrix.
    pub fn restricted(&self, range: Range<usize>) -> BandMatrix<T> {
        let m = range.len();
        let b = self.reach().min(m.saturating_sub(1));
        let mut out = BandMatrix::zeros(m, b, b);
        for i in 0..m {
            for j in i.saturating_sub(b)..(i + b + 1).min(m) {
                out.set(i, j, self.get(range.start + i, range.start + j));
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }
}

/// Convolution with the kernel samples rescaled once so that
/// `Σ_j J(x_j) w_j = 1` over the full window.
pub fn assemble_convolution<T: Scalar>(kernel: &KernelSpec<T>, grid: &Grid<T>) -> Result<ConvolutionOperator<T>> {
    assemble_convolution_with(kernel, grid, true)
}

/// As [`assemble_convolution`], optionally skipping the discrete
/// renormalization (plain trapezoid samples of `J`).
pub fn assemble_convolution_with<T: Scalar>(
    kernel: &KernelSpec<T>,
    grid: &Grid<T>,
    renormalize: bool,
) -> Result<ConvolutionOperator<T>> {
    if kernel.support_radius > grid.half_width() {
        return Err(Error::KernelWiderThanWindow {
            radius: kernel.support_radius.to_f64_lossy(),
            half_width: grid.half_width().to_f64_lossy(),
        });
    }
    let dx = grid.spacing();
    let reach = (kernel.support_radius / dx + T::lit(1e-9)).floor().to_usize().unwrap_or(0).min(grid.len() - 1);
    let mut stencil: Vec<T> = (0..=reach).map(|k| kernel.eval(grid.length_of(k))).collect();
    if renormalize {
        let c = grid.centre();
        let w = grid.weights();
        let mass: T = (c.saturating_sub(reach)..=(c + reach).min(grid.len() - 1))
            .map(|j| stencil[j.abs_diff(c)] * w[j])
            .sum();
        for s in &mut stencil {
            *s /= mass;
        }
    }
    Ok(ConvolutionOperator { stencil, weights: grid.weights().to_vec() })
}

/// `speed * D` with `D` the upwind first difference: forward for `speed > 0`,
/// backward for `speed < 0`. Ghost values beyond the lattice are zero.
pub fn assemble_upwind<T: Scalar>(speed: T, grid: &Grid<T>) -> BandMatrix<T> {
    upwind_matrix(speed, grid.spacing(), grid.len())
}

pub(crate) fn upwind_matrix<T: Scalar>(speed: T, dx: T, n: usize) -> BandMatrix<T> {
    let mut m = BandMatrix::zeros(n, 1, 1);
    let c = speed.abs() / dx;
    if speed > T::zero() {
        for i in 0..n {
            m.set(i, i, -c);
            if i + 1 < n {
                m.set(i, i + 1, c);
            }
        }
    } else if speed < T::zero() {
        for i in 0..n {
            m.set(i, i, -c);
            if i > 0 {
                m.set(i, i - 1, c);
            }
        }
    }
    m
}

/// `speed * (D f)_i` on `range`, with `f` treated as zero outside it.
#[inline]
pub(crate) fn upwind_apply_on<T: Scalar>(speed: T, dx: T, range: Range<usize>, f: &[T], out: &mut [T]) {
    let c = speed.abs() / dx;
    if speed > T::zero() {
        for i in range.clone() {
            let next = if i + 1 < range.end { f[i + 1] } else { T::zero() };
            out[i] = c * (next - f[i]);
        }
    } else if speed < T::zero() {
        for i in range.clone() {
            let prev = if i > range.start { f[i - 1] } else { T::zero() };
            out[i] = c * (prev - f[i]);
        }
    } else {
        for i in range {
            out[i] = T::zero();
        }
    }
}

/// Everything the time stepper needs from the lattice for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperators<T> {
    pub grid: Grid<T>,
    /// `[W1, W2]`.
    pub convolution: [ConvolutionOperator<T>; 2],
    /// `[p D, q D]`.
    pub upwind: [BandMatrix<T>; 2],
    pub kernels: [KernelSpec<T>; 2],
}

impl<T: Scalar> DiscreteOperators<T> {
    pub fn new(params: &ModelParams<T>, grid: &Grid<T>) -> Result<Self> {
        let [u, v] = &params.species;
        Ok(Self {
            grid: grid.clone(),
            convolution: [assemble_convolution(&u.kernel, grid)?, assemble_convolution(&v.kernel, grid)?],
            upwind: [assemble_upwind(u.drift, grid), assemble_upwind(v.drift, grid)],
            kernels: [u.kernel, v.kernel],
        })
    }

    /// Right tail values `T_k(boundary - x_i)` on `range`.
    pub fn right_tails(&self, species: usize, boundary: T, range: Range<usize>) -> Vec<T> {
        let x = self.grid.nodes();
        range.map(|i| self.kernels[species].tail(boundary - x[i])).collect()
    }

    /// Left tail values `T_k(x_i - boundary)` on `range`.
    pub fn left_tails(&self, species: usize, boundary: T, range: Range<usize>) -> Vec<T> {
        let x = self.grid.nodes();
        range.map(|i| self.kernels[species].tail(x[i] - boundary)).collect()
    }
}

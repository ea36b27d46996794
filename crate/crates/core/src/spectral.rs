//! Linearization at the zero state on a fixed interval `[-Z, Z]` and its
//! principal eigenvalue `λ*(Z)`.
//!
//! Unknowns are interleaved per node, `(u_0, v_0, u_1, v_1, ...)`, so the
//! coupled operator stays banded. `λ* > 0` means persistence.

use std::cmp::Ordering;
use std::ops::Range;

use serde::Serialize;

use crate::discretize::{assemble_convolution, upwind_matrix, Grid};
use crate::error::{Error, Result};
use crate::linalg::{perron_iteration, power_iteration, BandLu, BandMatrix};
use crate::model::ModelParams;
use crate::scalar::{max_abs, Scalar};

const DIRECT_MAX_ITER: usize = 100_000;
const RHO_MAX_ITER: usize = 200_000;

/// `L = L_J + L_T` on the active nodes of `[-Z, Z]`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator<T> {
    /// `Z` after snapping to the lattice.
    pub half_length: T,
    /// Lattice indices of the active nodes `|x_i| < Z`.
    pub nodes: Range<usize>,
    pub spacing: T,
    /// `blockdiag(d1 W1, d2 W2)`, interleaved.
    pub convolution: BandMatrix<T>,
    /// Loss, drift and coupling part, interleaved.
    pub transport: BandMatrix<T>,
    /// `convolution + transport`.
    pub full: BandMatrix<T>,
    /// `[W1, W2]` on the active nodes, without the dispersal rates.
    pub kernel_blocks: [BandMatrix<T>; 2],
}

impl<T: Scalar> LinearizedOperator<T> {
    /// Number of active nodes.
    pub fn active(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.active()
    }

    /// Quadrature weight of an active node; all active nodes are interior.
    pub fn weight(&self) -> T {
        self.spacing
    }

    /// Weighted pairing `Σ dx (a1 b1 + a2 b2)` of interleaved vectors.
    pub fn pairing(&self, a: &[T], b: &[T]) -> T {
        self.spacing * a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>()
    }
}

/// Splits an interleaved vector into its two species components.
pub fn split<T: Scalar>(v: &[T]) -> [Vec<T>; 2] {
    [v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect()]
}

pub fn interleave<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).flat_map(|(&x, &y)| [x, y]).collect()
}

pub fn assemble<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>, half_length: T) -> Result<LinearizedOperator<T>> {
    let m = grid.cells_of(half_length);
    if m > grid.half_cells() {
        return Err(Error::DomainExceedsWindow {
            half_length: half_length.to_f64_lossy(),
            half_width: grid.half_width().to_f64_lossy(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter(format!(
            "half-length {half_length} is below one lattice cell ({})",
            grid.spacing()
        )));
    }
    let nodes = grid.centred_range(m);
    let n = nodes.len();
    let dx = grid.spacing();
    let x = &grid.nodes()[nodes.clone()];

    let conv = [
        assemble_convolution(&params.species[0].kernel, grid)?.restricted(nodes.clone()),
        assemble_convolution(&params.species[1].kernel, grid)?.restricted(nodes.clone()),
    ];
    let reach = conv[0].lower().max(conv[1].lower());
    let band = (2 * reach).max(2);
    let mut convolution = BandMatrix::zeros(2 * n, band, band);
    let mut transport = BandMatrix::zeros(2 * n, band, band);
    for (s, sp) in params.species.iter().enumerate() {
        let w = &conv[s];
        let up = upwind_matrix(sp.drift, dx, n);
        let partner = sp.source.slope_at_zero;
        for i in 0..n {
            let r = 2 * i + s;
            for j in i.saturating_sub(w.lower())..(i + w.upper() + 1).min(n) {
                convolution.set(r, 2 * j + s, sp.dispersal * w.get(i, j));
            }
            transport.set(r, r, -sp.dispersal - sp.decay.eval(x[i]) + up.get(i, i));
            if i > 0 {
                transport.set(r, r - 2, up.get(i, i - 1));
            }
            if i + 1 < n {
                transport.set(r, r + 2, up.get(i, i + 1));
            }
            transport.set(r, 2 * i + 1 - s, partner);
        }
    }
    let full = {
        let mut f = transport.clone();
        for r in 0..2 * n {
            for c in r.saturating_sub(band)..(r + band + 1).min(2 * n) {
                let v = convolution.get(r, c);
                if v != T::zero() {
                    f.add(r, c, v);
                }
            }
        }
        f
    };
    Ok(LinearizedOperator {
        half_length: grid.length_of(m),
        nodes,
        spacing: dx,
        convolution,
        transport,
        full,
        kernel_blocks: conv,
    })
}

/// Principal eigenpair with its adjoint.
#[derive(Debug, Clone, Serialize)]
pub struct EigenResult<T> {
    pub half_length: T,
    pub lambda: T,
    /// `[φ1, φ2]` on the active nodes, joint sup-norm 1.
    pub eigenvector: [Vec<T>; 2],
    /// `[w1*, w2*]` scaled so that the weighted pairing with the eigenvector is 1.
    pub adjoint: [Vec<T>; 2],
    /// `||L φ - λ φ||_inf`.
    pub residual: T,
    /// `||L^T w - λ w||_inf / ||w||_inf`.
    pub adjoint_residual: T,
    pub iterations: usize,
    pub adjoint_iterations: usize,
    /// Every eigenvector entry exceeds `1e-14` times the largest.
    pub positive: bool,
}

impl<T: Scalar> EigenResult<T> {
    pub fn eigenvector_interleaved(&self) -> Vec<T> {
        interleave(&self.eigenvector[0], &self.eigenvector[1])
    }

    pub fn adjoint_interleaved(&self) -> Vec<T> {
        interleave(&self.adjoint[0], &self.adjoint[1])
    }

    pub fn min_entry(&self) -> T {
        self.eigenvector.iter().flatten().fold(T::infinity(), |m, &v| m.min(v))
    }
}

fn residual_of<T: Scalar>(m: &BandMatrix<T>, x: &[T], value: T) -> T {
    m.matvec(x).iter().zip(x).fold(T::zero(), |r, (&y, &xi)| r.max((y - value * xi).abs()))
}

fn finish<T: Scalar>(
    op: &LinearizedOperator<T>,
    mut phi: Vec<T>,
    mut adj: Vec<T>,
    lambda: T,
    iterations: (usize, usize),
) -> Result<EigenResult<T>> {
    let s = max_abs(&phi);
    phi.iter_mut().for_each(|v| *v /= s);
    let top = phi.iter().fold(T::zero(), |m, &v| m.max(v));
    let positive = phi.iter().all(|&v| v > T::lit(1e-14) * top);
    let pairing = op.pairing(&adj, &phi);
    if !positive && !(pairing > T::min_positive_value().sqrt()) {
        return Err(Error::IrreducibilityViolated);
    }
    adj.iter_mut().for_each(|v| *v /= pairing);
    let residual = residual_of(&op.full, &phi, lambda);
    let adjoint_residual = residual_of(&op.full.transpose(), &adj, lambda) / max_abs(&adj);
    Ok(EigenResult {
        half_length: op.half_length,
        lambda,
        eigenvector: split(&phi),
        adjoint: split(&adj),
        residual,
        adjoint_residual,
        iterations: iterations.0,
        adjoint_iterations: iterations.1,
        positive,
    })
}

/// Power iteration on `L + c I`, `c = 1 + max |L_ii|`, from the all-ones vector.
///
/// The eigenvalue is the two-sided Rayleigh quotient with the adjoint iterate.
/// When the drift makes `L` strongly non-normal that quotient can sit further
/// from the one-sided estimate than the stopping tolerance; the primal
/// iteration is then continued with a tenfold tighter tolerance (at most
/// twice) until `||L φ - λ φ||_inf <= 1e-10`.
pub fn principal_eig_direct<T: Scalar>(op: &LinearizedOperator<T>) -> Result<EigenResult<T>> {
    let n = op.dim();
    let shift = T::one() + max_abs(&op.full.diagonal());
    let mut shifted = op.full.clone();
    shifted.shift_diagonal(shift);
    let mut tol = T::attainable(1e-12);
    let target = T::attainable(1e-10);

    let stalled = |o: &crate::linalg::PowerOutcome<T>| Error::PowerIterationStalled {
        iterations: o.iterations,
        residual: o.residual.to_f64_lossy(),
    };
    let dual = power_iteration(|x, y| shifted.transpose_matvec_into(x, y), vec![T::one(); n], tol, DIRECT_MAX_ITER);
    if !dual.converged {
        return Err(stalled(&dual));
    }
    let mut primal = power_iteration(|x, y| shifted.matvec_into(x, y), vec![T::one(); n], tol, DIRECT_MAX_ITER);
    if !primal.converged {
        return Err(stalled(&primal));
    }
    let mut iterations = primal.iterations;
    let two_sided = |x: &[T]| {
        let mx = shifted.matvec(x);
        let num: T = dual.vector.iter().zip(&mx).map(|(&a, &b)| a * b).sum();
        let den: T = dual.vector.iter().zip(x).map(|(&a, &b)| a * b).sum();
        if den > T::zero() {
            Some(num / den - shift)
        } else {
            None
        }
    };
    let mut lambda = two_sided(&primal.vector).unwrap_or(primal.value - shift);
    for _ in 0..2 {
        if residual_of(&op.full, &primal.vector, lambda) <= target * max_abs(&primal.vector) {
            break;
        }
        tol /= T::lit(10.0);
        let next = power_iteration(|x, y| shifted.matvec_into(x, y), primal.vector.clone(), tol, DIRECT_MAX_ITER);
        iterations += next.iterations;
        if !next.converged {
            break;
        }
        primal = next;
        lambda = two_sided(&primal.vector).unwrap_or(primal.value - shift);
    }
    finish(op, primal.vector, dual.vector, lambda, (iterations, dual.iterations))
}

/// `λ* (Z)` through the direct route, falling back to the resolvent route when
/// power iteration stalls (large dispersal rates make the shift dominate).
pub fn principal_eigen<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>, half_length: T) -> Result<EigenResult<T>> {
    let op = assemble(params, grid, half_length)?;
    match principal_eig_direct(&op) {
        Err(Error::PowerIterationStalled { .. }) => principal_eig_resolvent(&op, None).map(|s| s.eigen),
        other => other,
    }
}

/// Whether `λ I - A` is a nonsingular M-matrix, i.e. `λ` exceeds the spectral
/// bound of the Metzler matrix `A`: the solve against the all-ones vector must
/// come out strictly positive.
fn shifted_factor<T: Scalar>(a: &BandMatrix<T>, lambda: T) -> Option<BandLu<T>> {
    let mut m = a.scaled(-T::one());
    m.shift_diagonal(lambda);
    let lu = m.lu()?;
    let x = lu.solve(&vec![T::one(); a.dim()]);
    if x.iter().all(|&v| v > T::zero()) {
        Some(lu)
    } else {
        None
    }
}

/// Spectral bound (rightmost eigenvalue) of the Metzler transport part,
/// located by bisection on the M-matrix test between `max_i a_ii` and the
/// logarithmic ∞-norm.
pub fn transport_spectral_bound<T: Scalar>(op: &LinearizedOperator<T>) -> T {
    metzler_spectral_bound(&op.transport)
}

pub(crate) fn metzler_spectral_bound<T: Scalar>(a: &BandMatrix<T>) -> T {
    let mut lo = a.diagonal().into_iter().fold(T::neg_infinity(), T::max);
    let mut hi = a.log_inf_norm();
    if shifted_factor(a, hi).is_none() {
        hi += T::lit(1e-9) * (T::one() + hi.abs());
    }
    let tol = T::attainable(1e-13);
    while hi - lo > tol * (T::one() + lo.abs().max(hi.abs())) {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if shifted_factor(a, mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `(λ I - L_T)` factored once, for repeated resolvent applications.
pub struct Resolvent<'a, T> {
    op: &'a LinearizedOperator<T>,
    pub lambda: T,
    lu: BandLu<T>,
}

impl<'a, T: Scalar> Resolvent<'a, T> {
    pub fn new(op: &'a LinearizedOperator<T>, lambda: T) -> Result<Self> {
        let lu = shifted_factor(&op.transport, lambda)
            .ok_or(Error::BelowTransportBound { lambda: lambda.to_f64_lossy() })?;
        Ok(Self { op, lambda, lu })
    }

    /// `y = L_J (λ I - L_T)^{-1} x`.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        let r = self.lu.solve(x);
        self.op.convolution.matvec_into(&r, y);
    }

    pub fn solve(&self, x: &[T]) -> Vec<T> {
        self.lu.solve(x)
    }

    /// Perron iteration for the spectral radius, optionally stopping early once
    /// its position relative to `target` is certain.
    fn perron(&self, start: Vec<T>, target: Option<T>) -> crate::linalg::PerronOutcome<T> {
        perron_iteration(|x, y| self.apply(x, y), start, T::attainable(1e-13), RHO_MAX_ITER, target)
    }

    pub fn spectral_radius(&self) -> Result<T> {
        let out = self.perron(vec![T::one(); self.op.dim()], None);
        if out.value.is_infinite() {
            return Ok(out.value);
        }
        if !out.converged {
            return Err(Error::PowerIterationStalled {
                iterations: out.iterations,
                residual: (out.upper - out.lower).to_f64_lossy(),
            });
        }
        Ok(out.value)
    }
}

/// `ρ(λ) = ρ(L_J (λ I - L_T)^{-1})`, for `λ` above the spectral bound of `L_T`.
pub fn rho_curve<T: Scalar>(op: &LinearizedOperator<T>, lambda: T) -> Result<T> {
    Resolvent::new(op, lambda)?.spectral_radius()
}

/// Principal eigenpair from the resolvent route together with the bisection history.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventSolution<T> {
    pub eigen: EigenResult<T>,
    /// `(lo, hi)` before every bisection step.
    pub brackets: Vec<(T, T)>,
    pub rho_evaluations: usize,
}

/// Finds `λ` with `ρ(λ) = 1` by bisection; `bracket` defaults to an automatic
/// search upward from the transport spectral bound.
pub fn principal_eig_resolvent<T: Scalar>(
    op: &LinearizedOperator<T>,
    bracket: Option<(T, T)>,
) -> Result<ResolventSolution<T>> {
    let n = op.dim();
    let bound = transport_spectral_bound(op);
    let floor = bound + T::lit(1e-6);
    let ceiling = bound + T::lit(1e6);
    let mut warm: Vec<T> = vec![T::one(); n];
    let mut evaluations = 0usize;
    let mut total_iterations = 0usize;

    // Position of ρ(λ) relative to 1; `Greater` also covers λ at or below the bound.
    let mut side = |lambda: T, warm: &mut Vec<T>| -> Result<Ordering> {
        evaluations += 1;
        let res = match Resolvent::new(op, lambda) {
            Ok(r) => r,
            Err(_) => return Ok(Ordering::Greater),
        };
        let out = res.perron(warm.clone(), Some(T::one()));
        total_iterations += out.iterations;
        if out.value.is_infinite() {
            return Ok(Ordering::Greater);
        }
        if out.vector.iter().all(|v| v.is_finite()) && out.vector.iter().any(|&v| v > T::zero()) {
            warm.clone_from(&out.vector);
        }
        match out.compare(T::one()) {
            Some(o) => Ok(o),
            None if out.converged => Ok(out.value.partial_cmp(&T::one()).unwrap_or(Ordering::Greater)),
            None => Err(Error::PowerIterationStalled {
                iterations: out.iterations,
                residual: (out.upper - out.lower).to_f64_lossy(),
            }),
        }
    };

    let (mut lo, mut hi) = match bracket {
        Some((lo, hi)) => (lo.max(floor), hi),
        None => {
            let mut gap = T::one();
            let mut hi = bound + gap;
            while side(hi, &mut warm)? != Ordering::Less {
                if hi >= ceiling {
                    return Err(Error::NoRoot { lo: floor.to_f64_lossy(), hi: ceiling.to_f64_lossy() });
                }
                gap *= T::lit(2.0);
                hi = (bound + gap).min(ceiling);
            }
            (floor, hi)
        }
    };
    if side(hi, &mut warm)? != Ordering::Less || side(lo, &mut warm)? == Ordering::Less {
        return Err(Error::NoRoot { lo: lo.to_f64_lossy(), hi: hi.to_f64_lossy() });
    }

    let tol = T::attainable(1e-10).max(T::epsilon() * T::lit(8.0) * (T::one() + lo.abs().max(hi.abs())));
    let mut brackets = Vec::new();
    while hi - lo > tol {
        brackets.push((lo, hi));
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        match side(mid, &mut warm)? {
            Ordering::Less => hi = mid,
            _ => lo = mid,
        }
    }
    let lambda = (lo + hi) / T::lit(2.0);

    let res = Resolvent::new(op, lambda)?;
    let fwd = res.perron(warm, None);
    let phi = res.solve(&fwd.vector);

    let mut tshift = op.transport.transpose().scaled(-T::one());
    tshift.shift_diagonal(lambda);
    let lu_t = tshift.lu().ok_or(Error::BelowTransportBound { lambda: lambda.to_f64_lossy() })?;
    let conv_t = op.convolution.transpose();
    // Perron vector of (R L_J)^T = L_J^T R^T, then w = R^T y.
    let dual = perron_iteration(
        |x, y| {
            let r = lu_t.solve(x);
            conv_t.matvec_into(&r, y);
        },
        vec![T::one(); n],
        T::attainable(1e-13),
        RHO_MAX_ITER,
        None,
    );
    let adj = lu_t.solve(&dual.vector);
    evaluations += 1;
    let mut eigen = finish(op, phi, adj, lambda, (total_iterations + fwd.iterations, dual.iterations))?;
    eigen.iterations = total_iterations + fwd.iterations;
    Ok(ResolventSolution { eigen, brackets, rho_evaluations: evaluations })
}

/// `(min_i (Lψ)_i / ψ_i, max_i (Lψ)_i / ψ_i)` for a positive test pair.
pub fn collatz_wielandt_bounds<T: Scalar>(op: &LinearizedOperator<T>, psi1: &[T], psi2: &[T]) -> Result<(T, T)> {
    let psi = interleave(psi1, psi2);
    if let Some((index, &value)) = psi.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
        return Err(Error::NonPositiveTestFunction { index, value: value.to_f64_lossy() });
    }
    let lpsi = op.full.matvec(&psi);
    Ok(lpsi.iter().zip(&psi).fold((T::infinity(), T::neg_infinity()), |(lo, hi), (&a, &b)| {
        let r = a / b;
        (lo.min(r), hi.max(r))
    }))
}

/// Eigenvalue sign at `Z`: `Less` means `λ*(Z) < 0`, i.e. `-L` is a nonsingular M-matrix.
pub fn growth_sign<T: Scalar>(op: &LinearizedOperator<T>) -> Ordering {
    if shifted_factor(&op.full, T::zero()).is_some() {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CriticalDomain<T> {
    /// `λ*(z_lo) < 0 <= λ*(z_hi)`, one cell apart; `critical` interpolates linearly.
    Found { z_lo: T, z_hi: T, lambda_lo: T, lambda_hi: T, critical: T },
    /// `λ*(z_max) < 0`: no critical size in the search range.
    None { z_max: T, lambda_max: T },
}

impl<T: Scalar> CriticalDomain<T> {
    pub fn critical(&self) -> Option<T> {
        match self {
            CriticalDomain::Found { critical, .. } => Some(*critical),
            CriticalDomain::None { .. } => None,
        }
    }
}

/// Bisection over lattice half-lengths for the sign change of `λ*(Z)`.
///
/// Steps use the exact sign test of [`growth_sign`]; the two final half-lengths
/// are confirmed by direct eigensolves.
pub fn critical_domain<T: Scalar>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    search: (T, T),
) -> Result<CriticalDomain<T>> {
    let mut m_lo = grid.cells_of(search.0).max(1);
    let mut m_hi = grid.cells_of(search.1).max(m_lo);
    let sign_at = |m: usize| assemble(params, grid, grid.length_of(m)).map(|op| growth_sign(&op));
    let lambda_at = |m: usize| principal_eigen(params, grid, grid.length_of(m)).map(|e| e.lambda);

    if sign_at(m_hi)? == Ordering::Less {
        return Ok(CriticalDomain::None { z_max: grid.length_of(m_hi), lambda_max: lambda_at(m_hi)? });
    }
    if sign_at(m_lo)? != Ordering::Less {
        return Err(Error::InitialDomainSupercritical {
            half_length: grid.length_of(m_lo).to_f64_lossy(),
            lambda: lambda_at(m_lo)?.to_f64_lossy(),
        });
    }
    while m_hi - m_lo > 1 {
        let mid = (m_lo + m_hi) / 2;
        if sign_at(mid)? == Ordering::Less {
            m_lo = mid;
        } else {
            m_hi = mid;
        }
    }
    let (mut l_lo, mut l_hi) = (lambda_at(m_lo)?, lambda_at(m_hi)?);
    // The sign test and the eigensolve can disagree only within roundoff of zero.
    while l_lo >= T::zero() && m_lo > 1 {
        m_hi = m_lo;
        l_hi = l_lo;
        m_lo -= 1;
        l_lo = lambda_at(m_lo)?;
    }
    while l_hi < T::zero() && m_hi < grid.half_cells() {
        m_lo = m_hi;
        l_lo = l_hi;
        m_hi += 1;
        l_hi = lambda_at(m_hi)?;
    }
    let (z_lo, z_hi) = (grid.length_of(m_lo), grid.length_of(m_hi));
    let critical = z_lo + (z_hi - z_lo) * (-l_lo) / (l_hi - l_lo);
    Ok(CriticalDomain::Found { z_lo, z_hi, lambda_lo: l_lo, lambda_hi: l_hi, critical })
}

/// `∂λ*/∂d_j = Σ dx w_j* (W_j φ_j - φ_j)` from a computed eigenpair.
pub fn hadamard_from<T: Scalar>(op: &LinearizedOperator<T>, eig: &EigenResult<T>, species: usize) -> T {
    let phi = &eig.eigenvector[species];
    let w = &eig.adjoint[species];
    let wphi = op.kernel_blocks[species].matvec(phi);
    let acc: T = (0..phi.len()).map(|i| w[i] * (wphi[i] - phi[i])).sum();
    acc * op.spacing
}

pub fn hadamard_derivative<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>, half_length: T, species: usize) -> Result<T> {
    let op = assemble(params, grid, half_length)?;
    let eig = principal_eig_direct(&op)?;
    Ok(hadamard_from(&op, &eig, species))
}

/// `ρ(L_J (-L_T)^{-1})` on `[-Z, Z]`.
pub fn operator_r0<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>, half_length: T) -> Result<T> {
    next_generation_radius(&assemble(params, grid, half_length)?)
}

pub fn next_generation_radius<T: Scalar>(op: &LinearizedOperator<T>) -> Result<T> {
    match Resolvent::new(op, T::zero()) {
        Ok(r) => r.spectral_radius(),
        Err(_) => Err(Error::TransportNotInvertible { bound: transport_spectral_bound(op).to_f64_lossy() }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispersalTrend {
    /// `ρ(W) > 1`: `λ*` grows without bound in `d`.
    Growing,
    /// `ρ(W) < 1`: `λ*` settles towards a finite limit.
    Plateau,
    /// `ρ(W) = 1`: `λ*` stays bounded.
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersalProbe<T> {
    pub species: usize,
    /// `(d, λ*(d))` for each requested rate.
    pub rows: Vec<(T, T)>,
    /// `ρ(W_j)` on the active nodes, for `j = 1, 2`.
    pub kernel_radius: [T; 2],
    pub trend: DispersalTrend,
}

/// `λ*` as a function of one dispersal rate, with the kernel spectral radii that
/// decide its large-rate behaviour.
pub fn diffusion_limit_probe<T: Scalar>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    half_length: T,
    species: usize,
    d_values: &[T],
) -> Result<DispersalProbe<T>> {
    let m = grid.cells_of(half_length);
    let nodes = grid.centred_range(m);
    let mut radius = [T::zero(); 2];
    for (s, r) in radius.iter_mut().enumerate() {
        let w = assemble_convolution(&params.species[s].kernel, grid)?.restricted(nodes.clone());
        let out = perron_iteration(|x, y| w.matvec_into(x, y), vec![T::one(); w.dim()], T::attainable(1e-13), RHO_MAX_ITER, None);
        *r = out.value;
    }
    let mut rows = Vec::with_capacity(d_values.len());
    for &d in d_values {
        let mut p = *params;
        p.species[species].dispersal = d;
        rows.push((d, principal_eigen(&p, grid, half_length)?.lambda));
    }
    let r = radius[species];
    let tol = T::lit(1e-9);
    let trend = if r > T::one() + tol {
        DispersalTrend::Growing
    } else if r < T::one() - tol {
        DispersalTrend::Plateau
    } else {
        DispersalTrend::Bounded
    };
    Ok(DispersalProbe { species, rows, kernel_radius: radius, trend })
}

/// `C = 2 max_i d_i ||J_i||_inf / m`, with `m` the smallest eigenvector entry at
/// the largest half-length of interest.
pub fn lipschitz_constant<T: Scalar>(params: &ModelParams<T>, eig_at_max: &EigenResult<T>) -> T {
    let top = params
        .species
        .iter()
        .map(|s| s.dispersal * s.kernel.peak())
        .fold(T::zero(), T::max);
    T::lit(2.0) * top / eig_at_max.min_entry()
}

//! Homogeneous coexistence states, the bifurcation branch in the coupling
//! scale, and spatial steady states on fixed intervals.

use serde::Serialize;

use crate::discretize::{DiscreteOperators, Grid};
use crate::error::{Error, Result};
use crate::freeboundary::{SimState, Stepper};
use crate::model::{scalar_r0, ModelParams};
use crate::scalar::Scalar;

fn constant_rates<T: Scalar>(params: &ModelParams<T>) -> Result<(T, T)> {
    let [u, v] = &params.species;
    if !u.decay.is_constant() || !v.decay.is_constant() {
        return Err(Error::HeterogeneousCoefficients);
    }
    Ok((u.decay.value(), v.decay.value()))
}

/// `F_μ(u) = H(μ G(u) / b) / a`.
pub fn scaled_fixed_point_map<T: Scalar>(u: T, params: &ModelParams<T>, mu: T) -> Result<T> {
    let (a, b) = constant_rates(params)?;
    let [su, sv] = &params.species;
    Ok(su.source.eval(mu * sv.source.eval(u) / b) / a)
}

/// `F(u) = H(G(u) / b) / a`; positive fixed points are homogeneous coexistence states.
pub fn fixed_point_map<T: Scalar>(u: T, params: &ModelParams<T>) -> Result<T> {
    scaled_fixed_point_map(u, params, T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMethod {
    FixedPoint,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoexistenceState<T> {
    pub u_star: T,
    pub v_star: T,
    /// `[|-a u* + H(v*)|, |-b v* + G(u*)|]`.
    pub residuals: [T; 2],
    pub iterations: usize,
    pub method: RootMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Coexistence<T> {
    /// `R0 <= 1`: only the zero state.
    ExtinctOnly,
    Positive(CoexistenceState<T>),
}

impl<T: Scalar> Coexistence<T> {
    pub fn state(&self) -> Option<&CoexistenceState<T>> {
        match self {
            Coexistence::Positive(s) => Some(s),
            Coexistence::ExtinctOnly => None,
        }
    }

    /// `(u*, v*)`, zero when extinct-only.
    pub fn levels(&self) -> (T, T) {
        self.state().map(|s| (s.u_star, s.v_star)).unwrap_or((T::zero(), T::zero()))
    }
}

/// `10 H(1e6 s) / a`: every fixed point lies below it for saturating couplings.
pub fn default_u_max<T: Scalar>(params: &ModelParams<T>) -> Result<T> {
    let (a, _) = constant_rates(params)?;
    Ok(T::lit(10.0) * params.species[0].source.saturation_proxy() / a)
}

fn residuals<T: Scalar>(params: &ModelParams<T>, mu: T, u: T, v: T) -> Result<[T; 2]> {
    let (a, b) = constant_rates(params)?;
    let [su, sv] = &params.species;
    Ok([(-a * u + su.source.eval(v)).abs(), (-b * v + mu * sv.source.eval(u)).abs()])
}

/// Bisection for the positive root of `u - F_μ(u)` on `[1e-12 u_max, u_max]`.
fn bisect_root<T: Scalar>(params: &ModelParams<T>, mu: T, u_max: T) -> Result<Option<(T, usize)>> {
    let phi = |u: T| scaled_fixed_point_map(u, params, mu).map(|f| u - f);
    let mut lo = T::lit(1e-12) * u_max;
    let mut hi = u_max;
    if !(phi(lo)? < T::zero() && phi(hi)? > T::zero()) {
        return Ok(None);
    }
    let mut it = 0;
    while hi - lo > T::epsilon() * hi && it < 400 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid)? < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    let (plo, phi_hi) = (phi(lo)?.abs(), phi(hi)?.abs());
    Ok(Some((if plo <= phi_hi { lo } else { hi }, it)))
}

/// Homogeneous coexistence state. Iterates `u <- F(u)` from `u_max` (monotone
/// for increasing couplings) and falls back to bisection.
pub fn solve_coexistence<T: Scalar>(params: &ModelParams<T>, u_max: Option<T>) -> Result<Coexistence<T>> {
    let r0 = scalar_r0(params)?;
    if r0 <= T::one() {
        return Ok(Coexistence::ExtinctOnly);
    }
    let (_, b) = constant_rates(params)?;
    let u_max = match u_max {
        Some(m) => m,
        None => default_u_max(params)?,
    };
    let gap = |u: T| fixed_point_map(u, params).map(|f| u - f);
    if !(gap(u_max)? > T::zero() && gap(T::lit(1e-12) * u_max)? < T::zero()) {
        return Err(Error::UMaxTooSmall { u_max: u_max.to_f64_lossy(), r0: r0.to_f64_lossy() });
    }
    let tol = T::attainable(1e-10);
    let state = |u: T, iterations: usize, method: RootMethod| -> Result<CoexistenceState<T>> {
        let v = params.species[1].source.eval(u) / b;
        Ok(CoexistenceState { u_star: u, v_star: v, residuals: residuals(params, T::one(), u, v)?, iterations, method })
    };

    let mut u = u_max;
    for it in 1..=10_000 {
        let next = fixed_point_map(u, params)?;
        let step = (next - u).abs();
        u = next;
        if step <= T::epsilon() * T::lit(4.0) * u {
            let s = state(u, it, RootMethod::FixedPoint)?;
            if u > T::zero() && s.residuals.iter().all(|&r| r <= tol) {
                return Ok(Coexistence::Positive(s));
            }
            break;
        }
    }
    match bisect_root(params, T::one(), u_max)? {
        Some((root, it)) => Ok(Coexistence::Positive(state(root, it, RootMethod::Bisection)?)),
        None => Err(Error::UMaxTooSmall { u_max: u_max.to_f64_lossy(), r0: r0.to_f64_lossy() }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint<T> {
    pub mu: T,
    /// Zero when only the trivial root exists.
    pub u_star: T,
    pub v_star: T,
    pub residual: T,
}

/// Positive root of `u = F_μ(u)` across a grid of coupling scales `μ`.
pub fn bifurcation_scan<T: Scalar>(params: &ModelParams<T>, mu_grid: &[T]) -> Result<Vec<BranchPoint<T>>> {
    let (a, b) = constant_rates(params)?;
    let u_max = default_u_max(params)?;
    mu_grid
        .iter()
        .map(|&mu| {
            Ok(match bisect_root(params, mu, u_max)? {
                Some((u, _)) => {
                    let f = scaled_fixed_point_map(u, params, mu)?;
                    BranchPoint { mu, u_star: u, v_star: mu * params.species[1].source.eval(u) / b, residual: a * (u - f).abs() }
                }
                None => BranchPoint { mu, u_star: T::zero(), v_star: T::zero(), residual: T::zero() },
            })
        })
        .collect()
}

/// Smallest `μ` in a scan with a positive root.
pub fn first_positive<T: Scalar>(branch: &[BranchPoint<T>]) -> Option<T> {
    branch.iter().find(|p| p.u_star > T::zero()).map(|p| p.mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyOutcome {
    Positive,
    Extinct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialSteady<T> {
    pub outcome: SteadyOutcome,
    pub half_length: T,
    /// Node coordinates of the active set.
    pub x: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// `||(∂t u, ∂t v)||_inf` at the last step.
    pub residual: T,
    pub time: T,
}

impl<T: Scalar> SpatialSteady<T> {
    /// Values at `x = 0`.
    pub fn centre(&self) -> (T, T) {
        let i = self.x.len() / 2;
        (self.u[i], self.v[i])
    }

    pub fn sup(&self) -> T {
        self.u.iter().chain(&self.v).fold(T::zero(), |m, &x| m.max(x))
    }
}

/// Relaxes the fixed-interval problem on `[-Z, Z]` from constant data `start`
/// until `||∂t||_inf <= 1e-9` with the sup-norm above `1e-6` (positive limit),
/// or the sup-norm drops below `1e-10` (extinction).
pub fn spatial_steady<T: Scalar>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    half_length: T,
    t_relax: T,
    start: [T; 2],
) -> Result<SpatialSteady<T>> {
    let m = grid.cells_of(half_length);
    if m + 2 > grid.half_cells() {
        return Err(Error::DomainExceedsWindow {
            half_length: half_length.to_f64_lossy(),
            half_width: grid.half_width().to_f64_lossy(),
        });
    }
    let z = grid.length_of(m);
    let frozen = params.with_expansion_rate(T::zero());
    let ops = DiscreteOperators::new(&frozen, grid)?;
    let mut stepper = Stepper::new(&frozen, &ops);
    stepper.frozen = true;
    let dt = stepper.dt_max();
    let mut state = SimState::plateau(grid, z, start);
    let rate_tol = T::attainable(1e-9);
    let extinct_tol = T::lit(1e-10);
    let positive_floor = T::lit(1e-6);
    let mut k = 0usize;
    let mut residual;
    let outcome = loop {
        let report = stepper.advance(&mut state, dt)?;
        k += 1;
        state.t = T::from_usize_lossy(k) * dt;
        residual = report.rate;
        let sup = state.sup_u().max(state.sup_v());
        if sup <= extinct_tol {
            break SteadyOutcome::Extinct;
        }
        if residual <= rate_tol && sup > positive_floor {
            break SteadyOutcome::Positive;
        }
        if state.t >= t_relax {
            return Err(Error::RelaxationHorizonExceeded { time: state.t.to_f64_lossy(), residual: residual.to_f64_lossy() });
        }
    };
    let range = state.active(grid);
    Ok(SpatialSteady {
        outcome,
        half_length: z,
        x: grid.nodes()[range.clone()].to_vec(),
        u: state.u[range.clone()].to_vec(),
        v: state.v[range].to_vec(),
        residual,
        time: state.t,
    })
}

//! Computations behind each subcommand, independent of file output.

use driftfront::freeboundary::{run, SimTrace};
use driftfront::model::scalar_r0;
use driftfront::spectral::{
    assemble, critical_domain, principal_eig_direct, principal_eig_resolvent, principal_eigen, rho_curve,
};
use driftfront::steady::{solve_coexistence, spatial_steady, Coexistence, SpatialSteady};
use driftfront::thresholds::{find_mu_hat, ThresholdResult};
use driftfront::{Error, Grid, ModelParams};
use serde::Serialize;

use crate::config::RunConfig;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Route {
    /// Shifted power iteration, falling back to the resolvent route if it stalls.
    Direct,
    /// Bisection on the spectral radius of the next-generation operator.
    Resolvent,
}

/// `Z*` for the classifier, searched over `[dx, min(X_max, 10)]`. A domain that
/// is already supercritical at one cell counts as `Z* = dx`.
pub fn critical_half_length(params: &ModelParams, grid: &Grid) -> Result<Option<f64>> {
    let zmax = grid.half_width().min(10.0);
    match critical_domain(params, grid, (grid.spacing(), zmax)) {
        Ok(c) => Ok(c.critical()),
        Err(Error::InitialDomainSupercritical { .. }) => Ok(Some(grid.spacing())),
        Err(e) => Err(e),
    }
}

pub fn coexistence_levels(params: &ModelParams) -> Option<(f64, f64)> {
    solve_coexistence(params, None).ok().and_then(|c| c.state().map(|s| (s.u_star, s.v_star)))
}

pub struct Simulation {
    pub trace: SimTrace<f64>,
    pub grid: Grid,
    pub critical_half_length: Option<f64>,
    pub coexistence: Option<(f64, f64)>,
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let params = cfg.params();
    let grid = cfg.grid()?;
    let critical = critical_half_length(&params, &grid)?;
    let coexistence = coexistence_levels(&params);
    let mut options = cfg.run_options(grid.snapped_h0());
    options.context.critical_half_length = critical;
    options.context.coexistence = coexistence;
    let trace = run(&params, &grid, &cfg.initial(), &options)?;
    Ok(Simulation { trace, grid, critical_half_length: critical, coexistence })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenRow {
    /// Snapped half-length.
    pub z: f64,
    pub lambda_star: f64,
    /// Spectral radius of the next-generation operator; infinite when the
    /// transport part is not invertible.
    pub rho_at_zero: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub fn eigen_at(params: &ModelParams, grid: &Grid, z: f64, route: Route) -> Result<EigenRow> {
    let op = assemble(params, grid, z)?;
    let eig = match route {
        Route::Direct => match principal_eig_direct(&op) {
            Err(Error::PowerIterationStalled { .. }) => principal_eigen(params, grid, z)?,
            other => other?,
        },
        Route::Resolvent => principal_eig_resolvent(&op, None)?.eigen,
    };
    let rho_at_zero = match rho_curve(&op, 0.0) {
        Ok(r) => r,
        Err(Error::TransportNotInvertible { .. } | Error::BelowTransportBound { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(EigenRow { z: eig.half_length, lambda_star: eig.lambda, rho_at_zero, iterations: eig.iterations, residual: eig.residual })
}

pub struct SteadyReport {
    pub coexistence: Coexistence<f64>,
    pub r0: f64,
    pub spatial: Option<SpatialSteady<f64>>,
}

pub fn steady(cfg: &RunConfig) -> Result<SteadyReport> {
    let params = cfg.params();
    let coexistence = solve_coexistence(&params, cfg.steady.u_max)?;
    let r0 = scalar_r0(&params)?;
    let spatial = match cfg.steady.half_length {
        Some(z) => {
            let grid = cfg.grid()?;
            let (u, v) = coexistence.levels();
            let start = if u > 0.0 { [u, v] } else { [1.0, 1.0] };
            Some(spatial_steady(&params, &grid, z, cfg.steady.t_relax, start)?)
        }
        None => None,
    };
    Ok(SteadyReport { coexistence, r0, spatial })
}

pub fn threshold(cfg: &RunConfig) -> Result<ThresholdResult<f64>> {
    let grid = cfg.grid()?;
    let options = cfg.threshold_options(grid.snapped_h0());
    find_mu_hat(&cfg.params(), &grid, &cfg.initial(), &options)
}

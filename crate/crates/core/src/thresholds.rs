//! Search for the critical expansion rate `μ̂` and `(μ, h0)` dichotomy tables.
//!
//! Probes at distinct `μ` are independent simulations and run on the rayon
//! pool. The search refines a bracket by multisection, which is deterministic
//! for a fixed [`ThresholdOptions::sections`] regardless of the thread count.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{build_grid, DiscreteOperators, Grid};
use crate::error::{Error, Result};
use crate::freeboundary::{
    run_from, Classification, ClassifyContext, ClassifyThresholds, RunOptions, SimState,
};
use crate::model::{scalar_r0, validate, validate_initial, InitialData, ModelParams};
use crate::scalar::Scalar;
use crate::spectral::{assemble, critical_domain, growth_sign, principal_eig_direct, CriticalDomain};
use crate::steady::solve_coexistence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdOptions<T> {
    /// Initial classification horizon per probe.
    pub horizon: T,
    /// Stop once `mu_hi - mu_lo <= tol_rel * mu_hi`.
    pub tol_rel: T,
    pub mu_start: T,
    pub mu_cap: T,
    /// Lower limit when the first probe already spreads.
    pub mu_floor: T,
    /// Ratio between consecutive search probes.
    pub growth: T,
    /// Horizon doublings granted to an undecided probe.
    pub max_doublings: usize,
    /// Interior probes per refinement round (1 gives bisection).
    pub sections: usize,
    /// Points in each re-probe set below `mu_lo` and above `mu_hi`.
    pub reprobe_points: usize,
    pub thresholds: ClassifyThresholds<T>,
    pub dt: Option<T>,
    /// Upper end of the `Z*` search, default `min(X_max, 10)`.
    pub critical_search_max: Option<T>,
}

impl<T: Scalar> ThresholdOptions<T> {
    pub fn new(h0: T) -> Self {
        Self {
            horizon: T::lit(200.0),
            tol_rel: T::lit(0.05),
            mu_start: T::lit(1e-3),
            mu_cap: T::lit(1e6),
            mu_floor: T::lit(1e-9),
            growth: T::lit(4.0),
            max_doublings: 2,
            sections: 3,
            reprobe_points: 5,
            thresholds: ClassifyThresholds::with_h0(h0),
            dt: None,
            critical_search_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbePhase {
    Search,
    Refine,
    Reprobe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord<T> {
    pub mu: T,
    pub phase: ProbePhase,
    /// Raw classifier output after all horizon doublings.
    pub class: Classification,
    /// Time at which the run stopped.
    pub horizon_used: T,
    pub g: T,
    pub h: T,
    pub sup_u: T,
    pub sup_v: T,
    pub evidence: String,
    pub warning: Option<String>,
}

impl<T> ProbeRecord<T> {
    /// Undecided probes count on the vanishing side.
    pub fn spreads(&self) -> bool {
        self.class == Classification::Spreading
    }
}

/// Everything a probe needs besides `μ`.
#[derive(Debug, Clone)]
pub struct ProbeSetup<'a, T> {
    pub params: &'a ModelParams<T>,
    pub grid: &'a Grid<T>,
    pub initial: &'a InitialData<T>,
    pub context: ClassifyContext<T>,
    pub horizon: T,
    pub max_doublings: usize,
    pub dt: Option<T>,
}

/// Runs one simulation at expansion rate `mu` and classifies it.
///
/// An undecided run is continued to twice its horizon up to `max_doublings`
/// times. A run that reaches the lattice edge counts as spreading when the
/// interval is already longer than the spreading length rule allows for a
/// vanishing run; otherwise the window error is returned.
pub fn probe<T: Scalar>(setup: &ProbeSetup<'_, T>, mu: T, phase: ProbePhase) -> Result<ProbeRecord<T>> {
    let params = (*setup.params).with_expansion_rate(mu);
    let ops = DiscreteOperators::new(&params, setup.grid)?;
    let mut state = SimState::initial(setup.grid, setup.initial);
    let mut horizon = setup.horizon;
    let th = &setup.context.thresholds;
    for round in 0..=setup.max_doublings {
        let mut options = RunOptions::new(horizon, setup.grid.snapped_h0());
        options.context = setup.context;
        options.dt = setup.dt;
        options.sample_every = horizon;
        let trace = match run_from(state.clone(), &params, &ops, &options) {
            Ok(trace) => trace,
            Err(Error::WindowExhausted { time, width }) => {
                let limit = setup
                    .context
                    .critical_half_length
                    .map(|z| (T::lit(2.0) * th.spread_safety * z).min(th.spread_length))
                    .unwrap_or(th.spread_length);
                if T::lit(width) > limit {
                    return Ok(ProbeRecord {
                        mu,
                        phase,
                        class: Classification::Spreading,
                        horizon_used: T::lit(time),
                        g: T::lit(-width / 2.0),
                        h: T::lit(width / 2.0),
                        sup_u: T::nan(),
                        sup_v: T::nan(),
                        evidence: format!("boundary reached the lattice edge with h - g = {width} > {limit}"),
                        warning: Some("window exhausted before the density rule fired".into()),
                    });
                }
                return Err(Error::WindowExhausted { time, width });
            }
            Err(e) => return Err(e),
        };
        let s = &trace.final_state;
        let class = trace.classification();
        if class != Classification::Undecided || round == setup.max_doublings {
            let warning = (class == Classification::Undecided)
                .then(|| format!("undecided at t = {}; counted on the vanishing side", s.t));
            return Ok(ProbeRecord {
                mu,
                phase,
                class,
                horizon_used: s.t,
                g: s.g,
                h: s.h,
                sup_u: s.sup_u(),
                sup_v: s.sup_v(),
                evidence: trace.verdict.evidence,
                warning,
            });
        }
        state = trace.final_state;
        horizon *= T::lit(2.0);
    }
    unreachable!("the last round always returns")
}

fn probe_all<T: Scalar>(setup: &ProbeSetup<'_, T>, mus: &[T], phase: ProbePhase) -> Result<Vec<ProbeRecord<T>>> {
    mus.par_iter().map(|&mu| probe(setup, mu, phase)).collect()
}

/// Vanishing guarantee from the decaying upper solution built on `[-c1, c1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallMuBound<T> {
    /// Every `μ <= mu0` vanishes for the given initial data.
    pub mu0: T,
    /// Half-length of the intermediate domain, `h0 < c1 < Z*`.
    pub c1: T,
    /// Half the principal eigenvalue on `[-c1, c1]`.
    pub sigma1: T,
    /// Largest eigenfunction mass `max_i ∫ ψ_i`.
    pub m0: T,
    /// Amplitude needed for the upper solution to cover the initial data.
    pub amplitude: T,
}

/// `μ0 = -σ1 (c1 - h0) / (M0 (1 + ρ) M)` where `σ1 = λ*(c1)/2`, `M0` is the
/// largest mass of the sup-normalized eigenfunction and `M` is the smallest
/// amplitude with `M ψ_i >= sup` of the initial data on `[-h0, h0]`.
pub fn small_mu_bound<T: Scalar>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    initial: &InitialData<T>,
    critical: T,
) -> Result<SmallMuBound<T>> {
    let h0 = grid.snapped_h0();
    let m0_cells = grid.h0_cells();
    let mut m1 = grid.cells_of((h0 + critical) / T::lit(2.0));
    if m1 <= m0_cells {
        m1 = m0_cells + 1;
    }
    let c1 = grid.length_of(m1);
    let op = assemble(params, grid, c1)?;
    let eig = principal_eig_direct(&op)?;
    if !(eig.lambda < T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "no subcritical domain between h0 = {h0} and Z* = {critical} on this lattice (lambda*({c1}) = {})",
            eig.lambda
        )));
    }
    let sigma1 = eig.lambda / T::lit(2.0);
    let top = eig.eigenvector.iter().flatten().fold(T::zero(), |m, &x| m.max(x));
    let dx = grid.spacing();
    let mass = |s: usize| eig.eigenvector[s].iter().map(|&x| x / top).sum::<T>() * dx;
    let m0 = mass(0).max(mass(1));
    // Nodes of the initial interval inside the operator's node range.
    let start = op.nodes.start;
    let inner = grid.centred_range(m0_cells);
    let min_on = |s: usize| {
        inner.clone().map(|i| eig.eigenvector[s][i - start] / top).fold(T::infinity(), T::min)
    };
    let amplitude = (initial.u.peak() / min_on(0)).max(initial.v.peak() / min_on(1));
    let mu0 = -sigma1 * (c1 - h0) / (m0 * (T::one() + params.flux_weight) * amplitude);
    Ok(SmallMuBound { mu0, c1, sigma1, m0, amplitude })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult<T> {
    /// Largest probe on the vanishing side.
    pub mu_lo: T,
    /// Smallest spreading probe.
    pub mu_hi: T,
    pub width: T,
    pub relative_width: T,
    pub probe_count: usize,
    pub probes: Vec<ProbeRecord<T>>,
    pub r0: Option<T>,
    pub critical_half_length: Option<T>,
    pub lambda_at_h0: T,
    pub coexistence: Option<(T, T)>,
    /// Re-running `mu_lo` and `mu_hi` reproduced their classifications.
    pub verified: bool,
    /// Every re-probe below `mu_lo` vanished and every one above `mu_hi` spread.
    pub reprobe_consistent: bool,
    /// No vanishing-side probe lies above a spreading one.
    pub monotone: bool,
    /// Probes that stayed undecided.
    pub undecided: usize,
    pub small_mu_bound: Option<SmallMuBound<T>>,
}

/// True when no vanishing-side probe sits above a spreading one.
pub fn probes_monotone<T: Scalar>(probes: &[ProbeRecord<T>]) -> bool {
    let lowest_spread = probes.iter().filter(|p| p.spreads()).map(|p| p.mu).fold(T::infinity(), T::min);
    probes.iter().filter(|p| !p.spreads()).all(|p| p.mu < lowest_spread)
}

/// Brackets the critical expansion rate: exponential search from `mu_start`,
/// multisection down to `tol_rel`, then re-probes around both endpoints.
pub fn find_mu_hat<T: Scalar>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    initial: &InitialData<T>,
    options: &ThresholdOptions<T>,
) -> Result<ThresholdResult<T>> {
    validate(params).into_result()?;
    validate_initial(initial).into_result()?;
    if options.sections == 0 || !(options.growth > T::one()) || !(options.tol_rel > T::zero()) {
        return Err(Error::InvalidParameter("threshold search needs sections >= 1, growth > 1 and tol_rel > 0".into()));
    }
    let r0 = scalar_r0(params).ok();
    if let Some(r0) = r0 {
        if r0 <= T::one() {
            return Err(Error::VanishingForAllMu { r0: r0.to_f64_lossy() });
        }
    }
    let h0 = grid.snapped_h0();
    let zmax = options.critical_search_max.unwrap_or_else(|| grid.half_width().min(T::lit(10.0)));
    let critical = match critical_domain(params, grid, (grid.spacing(), zmax)) {
        Ok(CriticalDomain::Found { critical, .. }) => Some(critical),
        Ok(CriticalDomain::None { .. }) => None,
        Err(Error::InitialDomainSupercritical { .. }) => Some(grid.spacing()),
        Err(e) => return Err(e),
    };
    let op_h0 = assemble(params, grid, h0)?;
    if growth_sign(&op_h0) != Ordering::Less {
        return Err(Error::SpreadingRegardlessOfMu {
            h0: h0.to_f64_lossy(),
            critical: critical.map(|z| z.to_f64_lossy()).unwrap_or(f64::NAN),
        });
    }
    if critical.is_none() && r0.is_none() {
        return Err(Error::VanishingForAllMu { r0: f64::NAN });
    }
    let lambda_at_h0 = principal_eig_direct(&op_h0)?.lambda;
    let coexistence = solve_coexistence(params, None).ok().and_then(|c| c.state().map(|s| (s.u_star, s.v_star)));
    let setup = ProbeSetup {
        params,
        grid,
        initial,
        context: ClassifyContext { thresholds: options.thresholds, critical_half_length: critical, coexistence },
        horizon: options.horizon,
        max_doublings: options.max_doublings,
        dt: options.dt,
    };

    let mut probes: Vec<ProbeRecord<T>> = Vec::new();
    let k = options.sections;
    let first = probe(&setup, options.mu_start, ProbePhase::Search)?;
    let start_spreads = first.spreads();
    probes.push(first);
    let (mut lo, mut hi);
    if start_spreads {
        hi = options.mu_start;
        loop {
            let mus: Vec<T> = (1..=k).map(|j| hi / options.growth.powi(j as i32)).collect();
            let batch = probe_all(&setup, &mus, ProbePhase::Search)?;
            let found = batch.iter().position(|p| !p.spreads());
            // Spreading probes above the first vanishing one tighten hi.
            let upto = found.unwrap_or(batch.len());
            if upto > 0 {
                hi = batch[upto - 1].mu;
            }
            let found_mu = found.map(|i| batch[i].mu);
            probes.extend(batch);
            if let Some(mu) = found_mu {
                lo = mu;
                break;
            }
            if hi < options.mu_floor {
                return Err(Error::NoVanishingAboveFloor { floor: options.mu_floor.to_f64_lossy() });
            }
        }
    } else {
        lo = options.mu_start;
        loop {
            if lo >= options.mu_cap {
                return Err(Error::NoSpreadingBelowCap { cap: options.mu_cap.to_f64_lossy() });
            }
            let mus: Vec<T> =
                (1..=k).map(|j| (lo * options.growth.powi(j as i32)).min(options.mu_cap)).collect();
            let batch = probe_all(&setup, &mus, ProbePhase::Search)?;
            let found = batch.iter().position(|p| p.spreads());
            let upto = found.unwrap_or(batch.len());
            if upto > 0 {
                lo = batch[upto - 1].mu;
            }
            let found_mu = found.map(|i| batch[i].mu);
            probes.extend(batch);
            if let Some(mu) = found_mu {
                hi = mu;
                break;
            }
        }
    }

    while hi - lo > options.tol_rel * hi {
        let step = (hi - lo) / T::from_usize_lossy(k + 1);
        let mus: Vec<T> = (1..=k).map(|j| lo + step * T::from_usize_lossy(j)).collect();
        let batch = probe_all(&setup, &mus, ProbePhase::Refine)?;
        let found = batch.iter().position(|p| p.spreads());
        let upto = found.unwrap_or(batch.len());
        if upto > 0 {
            lo = batch[upto - 1].mu;
        }
        if let Some(i) = found {
            hi = batch[i].mu;
        }
        probes.extend(batch);
    }

    // Five points give 0.2 lo, ..., lo and hi, 1.25 hi, ..., 2 hi.
    let n = options.reprobe_points.max(1);
    let below: Vec<T> = (1..=n).map(|j| lo * T::from_usize_lossy(j) / T::from_usize_lossy(n)).collect();
    let above: Vec<T> =
        (0..n).map(|j| hi * (T::one() + T::from_usize_lossy(j) / T::from_usize_lossy((n - 1).max(1)))).collect();
    let mut reprobes = probe_all(&setup, &below, ProbePhase::Reprobe)?;
    reprobes.extend(probe_all(&setup, &above, ProbePhase::Reprobe)?);
    let class_of = |mu: T, phase_filter: bool| {
        probes.iter().find(|p| p.mu == mu && (p.phase != ProbePhase::Reprobe || phase_filter)).map(|p| p.class)
    };
    let again = |mu: T| reprobes.iter().find(|p| p.mu == mu).map(|p| p.class);
    let verified = class_of(lo, false) == again(lo)
        && class_of(hi, false) == again(hi)
        && again(hi) == Some(Classification::Spreading)
        && again(lo) == Some(Classification::Vanishing);
    let reprobe_consistent = reprobes.iter().all(|p| if p.mu <= lo { !p.spreads() } else { p.spreads() });
    probes.extend(reprobes);
    let monotone = probes_monotone(&probes);
    let undecided = probes.iter().filter(|p| p.class == Classification::Undecided).count();
    let small_mu_bound = critical.and_then(|z| small_mu_bound(params, grid, initial, z).ok());
    let width = hi - lo;
    Ok(ThresholdResult {
        mu_lo: lo,
        mu_hi: hi,
        width,
        relative_width: width / hi,
        probe_count: probes.len(),
        probes,
        r0,
        critical_half_length: critical,
        lambda_at_h0,
        coexistence,
        verified,
        reprobe_consistent,
        monotone,
        undecided,
        small_mu_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyCell<T> {
    pub mu: T,
    pub class: Classification,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyRow<T> {
    /// Snapped initial half-width.
    pub h0: T,
    pub lambda_h0: T,
    pub critical_half_length: Option<T>,
    pub cells: Vec<DichotomyCell<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyTable<T> {
    pub mu_values: Vec<T>,
    pub rows: Vec<DichotomyRow<T>>,
}

impl<T: Scalar> DichotomyTable<T> {
    /// No vanishing entry to the right of (larger `μ`) or below (larger `h0`)
    /// a spreading one, with rows and columns sorted ascending.
    pub fn is_monotone(&self) -> bool {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| self.rows[a].h0.partial_cmp(&self.rows[b].h0).unwrap_or(Ordering::Equal));
        let mut cols: Vec<usize> = (0..self.mu_values.len()).collect();
        cols.sort_by(|&a, &b| self.mu_values[a].partial_cmp(&self.mu_values[b]).unwrap_or(Ordering::Equal));
        let spreads = |r: usize, c: usize| self.rows[r].cells[c].class == Classification::Spreading;
        let rows_ok = order.iter().all(|&r| cols.windows(2).all(|w| !spreads(r, w[0]) || spreads(r, w[1])));
        let cols_ok = cols.iter().all(|&c| order.windows(2).all(|w| !spreads(w[0], c) || spreads(w[1], c)));
        rows_ok && cols_ok
    }
}

/// Classifies every `(μ, h0)` pair. Each `h0` gets its own lattice of spacing
/// `dx` and window `window_factor * h0`.
#[allow(clippy::too_many_arguments)]
pub fn dichotomy_table<T: Scalar>(
    params: &ModelParams<T>,
    dx: T,
    window_factor: T,
    mu_values: &[T],
    h0_values: &[T],
    horizon: T,
    initial: &InitialData<T>,
    max_doublings: usize,
) -> Result<DichotomyTable<T>> {
    validate(params).into_result()?;
    validate_initial(initial).into_result()?;
    let coexistence = solve_coexistence(params, None).ok().and_then(|c| c.state().map(|s| (s.u_star, s.v_star)));
    let rows: Vec<DichotomyRow<T>> = h0_values
        .par_iter()
        .map(|&h0| {
            let grid = build_grid(h0, dx, window_factor)?;
            let h0 = grid.snapped_h0();
            let lambda_h0 = principal_eig_direct(&assemble(params, &grid, h0)?)?.lambda;
            let zmax = grid.half_width().min(T::lit(10.0));
            let critical = match critical_domain(params, &grid, (dx, zmax)) {
                Ok(c) => c.critical(),
                Err(Error::InitialDomainSupercritical { .. }) => Some(dx),
                Err(e) => return Err(e),
            };
            let setup = ProbeSetup {
                params,
                grid: &grid,
                initial,
                context: ClassifyContext {
                    thresholds: ClassifyThresholds::with_h0(h0),
                    critical_half_length: critical,
                    coexistence,
                },
                horizon,
                max_doublings,
                dt: None,
            };
            let cells = mu_values
                .par_iter()
                .map(|&mu| {
                    probe(&setup, mu, ProbePhase::Search)
                        .map(|p| DichotomyCell { mu, class: p.class, warning: p.warning })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DichotomyRow { h0, lambda_h0, critical_half_length: critical, cells })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DichotomyTable { mu_values: mu_values.to_vec(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NonlinearitySpec;

    fn record(mu: f64, class: Classification) -> ProbeRecord<f64> {
        ProbeRecord {
            mu,
            phase: ProbePhase::Refine,
            class,
            horizon_used: 1.0,
            g: -1.0,
            h: 1.0,
            sup_u: 0.0,
            sup_v: 0.0,
            evidence: String::new(),
            warning: None,
        }
    }

    #[test]
    fn monotone_history() {
        use Classification::*;
        let ok = [record(0.1, Vanishing), record(0.2, Undecided), record(0.3, Spreading), record(1.0, Spreading)];
        assert!(probes_monotone(&ok));
        let bad = [record(0.1, Vanishing), record(0.3, Spreading), record(0.5, Vanishing)];
        assert!(!probes_monotone(&bad));
    }

    #[test]
    fn rejects_subthreshold_r0() {
        let p = ModelParams::<f64>::reference().with_sources(NonlinearitySpec::linear(0.5), NonlinearitySpec::linear(0.5));
        let g = build_grid(0.2, 0.05, 16.0).unwrap();
        let err = find_mu_hat(&p, &g, &InitialData::cosine_bumps(1.0), &ThresholdOptions::new(0.2)).unwrap_err();
        assert!(matches!(err, Error::VanishingForAllMu { .. }));
    }

    #[test]
    fn rejects_supercritical_h0() {
        let p = ModelParams::<f64>::reference();
        let g = build_grid(1.0, 0.05, 8.0).unwrap();
        let err = find_mu_hat(&p, &g, &InitialData::cosine_bumps(1.0), &ThresholdOptions::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::SpreadingRegardlessOfMu { .. }));
    }

    #[test]
    fn small_mu_bound_is_positive_and_scales_with_data() {
        let p = ModelParams::<f64>::reference();
        let g = build_grid(0.15, 0.05, 40.0).unwrap();
        let z = critical_domain(&p, &g, (0.05, 3.0)).unwrap().critical().unwrap();
        let a = small_mu_bound(&p, &g, &InitialData::cosine_bumps(1.0), z).unwrap();
        let b = small_mu_bound(&p, &g, &InitialData::cosine_bumps(2.0), z).unwrap();
        assert!(a.mu0 > 0.0 && a.sigma1 < 0.0 && a.c1 > 0.15 && a.c1 < z);
        assert!((a.mu0 / b.mu0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn probe_below_small_mu_bound_vanishes() {
        let p = ModelParams::<f64>::reference();
        let g = build_grid(0.15, 0.05, 40.0).unwrap();
        let init = InitialData::cosine_bumps(1.0);
        let z = critical_domain(&p, &g, (0.05, 3.0)).unwrap().critical().unwrap();
        let bound = small_mu_bound(&p, &g, &init, z).unwrap();
        let setup = ProbeSetup {
            params: &p,
            grid: &g,
            initial: &init,
            context: ClassifyContext {
                thresholds: ClassifyThresholds::with_h0(0.15),
                critical_half_length: Some(z),
                coexistence: Some((1.0, 1.0)),
            },
            horizon: 200.0,
            max_doublings: 0,
            dt: None,
        };
        let rec = probe(&setup, bound.mu0, ProbePhase::Search).unwrap();
        assert_eq!(rec.class, Classification::Vanishing, "{rec:?}");
        assert!(rec.h < bound.c1);
    }
}

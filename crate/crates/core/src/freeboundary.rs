//! Explicit time stepping of the moving-boundary system and trajectory
//! classification.
//!
//! Fields live on the fixed lattice; node `i` is active iff `g < x_i < h`.
//! Inactive nodes hold zero, which is the Dirichlet condition.

use std::ops::Range;

use serde::Serialize;

use crate::discretize::{upwind_apply_on, DiscreteOperators, Grid};
use crate::error::{Error, Result};
use crate::model::{InitialData, ModelParams};
use crate::scalar::{max_abs, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimState<T> {
    pub t: T,
    pub g: T,
    pub h: T,
    /// Full-lattice fields, zero off the active set.
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// Total magnitude removed by clamping negative values.
    pub clamped: T,
    pub steps: usize,
}

impl<T: Scalar> SimState<T> {
    /// Initial state on `[-h0, h0]` with `h0` snapped to the lattice.
    pub fn initial(grid: &Grid<T>, initial: &InitialData<T>) -> Self {
        let h0 = grid.snapped_h0();
        let u = grid.nodes().iter().map(|&x| initial.u.eval(x, h0)).collect();
        let v = grid.nodes().iter().map(|&x| initial.v.eval(x, h0)).collect();
        Self { t: T::zero(), g: -h0, h: h0, u, v, clamped: T::zero(), steps: 0 }
    }

    /// Constant levels on the open interval `(-half_length, half_length)`.
    pub fn plateau(grid: &Grid<T>, half_length: T, levels: [T; 2]) -> Self {
        let range = grid.open_range(-half_length, half_length);
        let mut u = vec![T::zero(); grid.len()];
        let mut v = vec![T::zero(); grid.len()];
        for i in range {
            u[i] = levels[0];
            v[i] = levels[1];
        }
        Self { t: T::zero(), g: -half_length, h: half_length, u, v, clamped: T::zero(), steps: 0 }
    }

    pub fn active(&self, grid: &Grid<T>) -> Range<usize> {
        grid.open_range(self.g, self.h)
    }

    pub fn sup_u(&self) -> T {
        max_abs(&self.u)
    }

    pub fn sup_v(&self) -> T {
        max_abs(&self.v)
    }

    /// Values at the active node closest to the interval midpoint.
    pub fn midpoint_values(&self, grid: &Grid<T>) -> (T, T) {
        let mid = (self.g + self.h) / T::lit(2.0);
        let i = grid.cells_of(mid + grid.half_width()).min(grid.len() - 1);
        (self.u[i], self.v[i])
    }
}

/// `Φ = ∫ (u + v) dx`: trapezoid rule on the lattice with zero values at the
/// nodes bounding the active set.
pub fn lyapunov_mass<T: Scalar>(state: &SimState<T>, grid: &Grid<T>) -> T {
    let r = state.active(grid);
    let s: T = r.map(|i| state.u[i] + state.v[i]).sum();
    s * grid.spacing()
}

/// Largest explicit Euler step that keeps the update positivity preserving:
/// `0.4 min(dx / max(|p|, |q|, ε), 1 / (d1 + d2 + sup a + sup b + H'(0) + G'(0)))`.
pub fn dt_max<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>) -> T {
    let [u, v] = &params.species;
    let speed = u.drift.abs().max(v.drift.abs()).max(T::epsilon());
    let xw = grid.half_width();
    let rates = u.dispersal
        + v.dispersal
        + u.decay.sup_on(xw)
        + v.decay.sup_on(xw)
        + u.source.slope_at_zero
        + v.source.slope_at_zero;
    T::lit(0.4) * (grid.spacing() / speed).min(T::one() / rates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport<T> {
    /// `g'` and `h'` evaluated on the pre-step state.
    pub dg: T,
    pub dh: T,
    /// `||(∂t u, ∂t v)||_inf` on the pre-step active set.
    pub rate: T,
    /// Magnitude clamped to zero in this step.
    pub clamped: T,
}

/// Reusable buffers for repeated steps.
pub struct Stepper<'a, T> {
    params: &'a ModelParams<T>,
    ops: &'a DiscreteOperators<T>,
    decay: [Vec<T>; 2],
    dt_max: T,
    /// Keep `g` and `h` fixed regardless of the expansion rate.
    pub frozen: bool,
    du: Vec<T>,
    dv: Vec<T>,
    scratch: Vec<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    pub fn new(params: &'a ModelParams<T>, ops: &'a DiscreteOperators<T>) -> Self {
        let n = ops.grid.len();
        let x = ops.grid.nodes();
        let decay = [
            x.iter().map(|&xi| params.species[0].decay.eval(xi)).collect(),
            x.iter().map(|&xi| params.species[1].decay.eval(xi)).collect(),
        ];
        Self {
            params,
            ops,
            decay,
            dt_max: dt_max(params, &ops.grid),
            frozen: false,
            du: vec![T::zero(); n],
            dv: vec![T::zero(); n],
            scratch: vec![T::zero(); n],
        }
    }

    pub fn dt_max(&self) -> T {
        self.dt_max
    }

    /// Boundary velocities `(g', h')` for the current fields.
    pub fn boundary_speeds(&self, state: &SimState<T>) -> (T, T) {
        let grid = &self.ops.grid;
        let range = state.active(grid);
        let x = grid.nodes();
        let dx = grid.spacing();
        let [k1, k2] = &self.ops.kernels;
        let rho = self.params.flux_weight;
        let (mut right, mut left) = (T::zero(), T::zero());
        for i in range {
            let (u, v) = (state.u[i], state.v[i]);
            if u == T::zero() && v == T::zero() {
                continue;
            }
            right += u * k1.tail(state.h - x[i]) + rho * v * k2.tail(state.h - x[i]);
            left += u * k1.tail(x[i] - state.g) + rho * v * k2.tail(x[i] - state.g);
        }
        let mu = self.params.expansion_rate;
        (-mu * left * dx, mu * right * dx)
    }

    /// Time derivatives of `u` and `v` on the active set, into `du`, `dv`.
    fn rates(&mut self, state: &SimState<T>, range: Range<usize>) {
        let grid = &self.ops.grid;
        let dx = grid.spacing();
        let [su, sv] = &self.params.species;
        for (s, (field, other)) in [(&state.u, &state.v), (&state.v, &state.u)].into_iter().enumerate() {
            let sp = if s == 0 { su } else { sv };
            self.ops.convolution[s].apply_on(range.clone(), field, &mut self.scratch);
            let out = if s == 0 { &mut self.du } else { &mut self.dv };
            for i in range.clone() {
                out[i] = sp.dispersal * (self.scratch[i] - field[i]) - self.decay[s][i] * field[i] + sp.source.eval(other[i]);
            }
            upwind_apply_on(sp.drift, dx, range.clone(), field, &mut self.scratch);
            for i in range.clone() {
                out[i] += self.scratch[i];
            }
        }
    }

    /// One explicit Euler step in place.
    pub fn advance(&mut self, state: &mut SimState<T>, dt: T) -> Result<StepReport<T>> {
        if dt > self.dt_max * (T::one() + T::lit(1e-12)) || !(dt >= T::zero()) {
            return Err(Error::DtTooLarge { dt: dt.to_f64_lossy(), dt_max: self.dt_max.to_f64_lossy() });
        }
        let grid = &self.ops.grid;
        let range = state.active(grid);
        let (dg, dh) = if self.frozen { (T::zero(), T::zero()) } else { self.boundary_speeds(state) };
        self.rates(state, range.clone());
        let mut clamped = T::zero();
        let mut rate = T::zero();
        for i in range.clone() {
            rate = rate.max(self.du[i].abs()).max(self.dv[i].abs());
            let mut u = state.u[i] + dt * self.du[i];
            let mut v = state.v[i] + dt * self.dv[i];
            if u < T::zero() {
                clamped -= u;
                u = T::zero();
            }
            if v < T::zero() {
                clamped -= v;
                v = T::zero();
            }
            state.u[i] = u;
            state.v[i] = v;
        }
        let g = state.g + dt * dg;
        let h = state.h + dt * dh;
        let x = grid.nodes();
        let n = grid.len();
        state.t += dt;
        if h >= x[n - 2] || g <= x[1] {
            return Err(Error::WindowExhausted { time: state.t.to_f64_lossy(), width: (h - g).to_f64_lossy() });
        }
        state.g = g;
        state.h = h;
        state.clamped += clamped;
        state.steps += 1;
        Ok(StepReport { dg, dh, rate, clamped })
    }
}

/// Single step returning the new state.
pub fn step<T: Scalar>(
    state: &SimState<T>,
    params: &ModelParams<T>,
    ops: &DiscreteOperators<T>,
    dt: T,
) -> Result<(SimState<T>, StepReport<T>)> {
    let mut next = state.clone();
    let report = Stepper::new(params, ops).advance(&mut next, dt)?;
    Ok((next, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Vanishing,
    Spreading,
    Undecided,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Vanishing => "vanishing",
            Classification::Spreading => "spreading",
            Classification::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyThresholds<T> {
    /// `sup u + sup v` below this counts as extinct.
    pub vanish_density: T,
    /// `h' + |g'|` below this counts as halted.
    pub vanish_speed: T,
    /// Spreading once `h - g > 2 * spread_safety * Z*`.
    pub spread_safety: T,
    /// Fallback length for spreading when `Z*` is unknown or larger.
    pub spread_length: T,
    /// Mid-interval densities must reach this fraction of `min(u*, v*)`.
    pub spread_fraction: T,
}

impl<T: Scalar> ClassifyThresholds<T> {
    /// Defaults, with the fallback spreading length `20 h0`.
    pub fn with_h0(h0: T) -> Self {
        Self {
            vanish_density: T::lit(1e-7),
            vanish_speed: T::lit(1e-9),
            spread_safety: T::lit(1.25),
            spread_length: T::lit(20.0) * h0,
            spread_fraction: T::lit(0.5),
        }
    }
}

/// What the classifier knows about the limiting objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyContext<T> {
    pub thresholds: ClassifyThresholds<T>,
    /// Critical half-length `Z*`, if finite.
    pub critical_half_length: Option<T>,
    /// Homogeneous coexistence state `(u*, v*)`, if any.
    pub coexistence: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub class: Classification,
    /// The rule that fired.
    pub evidence: String,
}

/// Classifies the current state given the latest boundary speeds.
pub fn classify<T: Scalar>(
    state: &SimState<T>,
    grid: &Grid<T>,
    speeds: (T, T),
    ctx: &ClassifyContext<T>,
) -> Verdict {
    let th = &ctx.thresholds;
    let sup = state.sup_u() + state.sup_v();
    let speed = speeds.1 + speeds.0.abs();
    if sup < th.vanish_density && speed < th.vanish_speed {
        return Verdict {
            class: Classification::Vanishing,
            evidence: format!("sup u + sup v = {sup:e} and h' + |g'| = {speed:e} below thresholds"),
        };
    }
    let width = state.h - state.g;
    let by_critical = ctx
        .critical_half_length
        .map(|z| width > T::lit(2.0) * th.spread_safety * z)
        .unwrap_or(false);
    let by_length = width > th.spread_length;
    if by_critical || by_length {
        let (um, vm) = state.midpoint_values(grid);
        let floor = ctx.coexistence.map(|(us, vs)| th.spread_fraction * us.min(vs)).unwrap_or(th.vanish_density);
        if um >= floor && vm >= floor && um > T::zero() && vm > T::zero() {
            let rule = if by_critical { "2 x safety x critical half-length" } else { "spreading length" };
            return Verdict {
                class: Classification::Spreading,
                evidence: format!("h - g = {width} exceeds {rule}; mid-interval (u, v) = ({um}, {vm}) >= {floor}"),
            };
        }
    }
    Verdict { class: Classification::Undecided, evidence: "no rule fired".into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample<T> {
    pub t: T,
    pub g: T,
    pub h: T,
    pub phi: T,
    pub sup_u: T,
    pub sup_v: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot<T> {
    pub t: T,
    pub u: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions<T> {
    pub horizon: T,
    pub sample_every: T,
    /// Defaults to [`dt_max`].
    pub dt: Option<T>,
    pub context: ClassifyContext<T>,
    /// End the run at the first vanishing or spreading verdict.
    pub stop_on_classification: bool,
    pub snapshots: bool,
}

impl<T: Scalar> RunOptions<T> {
    pub fn new(horizon: T, h0: T) -> Self {
        Self {
            horizon,
            sample_every: T::one(),
            dt: None,
            context: ClassifyContext {
                thresholds: ClassifyThresholds::with_h0(h0),
                critical_half_length: None,
                coexistence: None,
            },
            stop_on_classification: true,
            snapshots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace<T> {
    pub samples: Vec<Sample<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub verdict: Verdict,
    pub final_state: SimState<T>,
    pub dt: T,
}

impl<T: Scalar> SimTrace<T> {
    pub fn classification(&self) -> Classification {
        self.verdict.class
    }
}

fn sample_of<T: Scalar>(state: &SimState<T>, grid: &Grid<T>) -> Sample<T> {
    Sample { t: state.t, g: state.g, h: state.h, phi: lyapunov_mass(state, grid), sup_u: state.sup_u(), sup_v: state.sup_v() }
}

/// Integrates from the initial data to the horizon (or the first verdict).
///
/// The horizon is an absolute time, so [`run_from`] can extend a run.
pub fn run<T: Scalar>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    initial: &InitialData<T>,
    options: &RunOptions<T>,
) -> Result<SimTrace<T>> {
    let ops = DiscreteOperators::new(params, grid)?;
    run_from(SimState::initial(grid, initial), params, &ops, options)
}

pub fn run_from<T: Scalar>(
    mut state: SimState<T>,
    params: &ModelParams<T>,
    ops: &DiscreteOperators<T>,
    options: &RunOptions<T>,
) -> Result<SimTrace<T>> {
    let grid = &ops.grid;
    let mut stepper = Stepper::new(params, ops);
    let dt = options.dt.unwrap_or_else(|| stepper.dt_max());
    if dt > stepper.dt_max() * (T::one() + T::lit(1e-12)) || !(dt > T::zero()) {
        return Err(Error::DtTooLarge { dt: dt.to_f64_lossy(), dt_max: stepper.dt_max().to_f64_lossy() });
    }
    let mut samples = vec![sample_of(&state, grid)];
    let mut snapshots = Vec::new();
    if options.snapshots {
        snapshots.push(Snapshot { t: state.t, u: state.u.clone(), v: state.v.clone() });
    }
    let mut verdict = Verdict { class: Classification::Undecided, evidence: "horizon reached".into() };
    let t0 = state.t;
    let mut next_sample = t0 + options.sample_every;
    let end = options.horizon;
    let mut k = 0usize;
    while state.t < end {
        // Step count based time keeps the sampling free of drift.
        let target = (t0 + T::from_usize_lossy(k + 1) * dt).min(end);
        let h = target - state.t;
        if h <= T::zero() {
            break;
        }
        stepper.advance(&mut state, h)?;
        state.t = target;
        k += 1;
        if verdict.class != Classification::Spreading {
            // Speeds only matter once the densities are tiny.
            let speeds = if state.sup_u() + state.sup_v() < options.context.thresholds.vanish_density {
                stepper.boundary_speeds(&state)
            } else {
                (T::neg_infinity(), T::infinity())
            };
            let v = classify(&state, grid, speeds, &options.context);
            if v.class != Classification::Undecided || verdict.class == Classification::Vanishing {
                verdict = v;
            }
        }
        let done = options.stop_on_classification && verdict.class != Classification::Undecided;
        if state.t >= next_sample * (T::one() - T::lit(1e-12)) || state.t >= end || done {
            samples.push(sample_of(&state, grid));
            if options.snapshots {
                snapshots.push(Snapshot { t: state.t, u: state.u.clone(), v: state.v.clone() });
            }
            while next_sample <= state.t * (T::one() + T::lit(1e-12)) {
                next_sample += options.sample_every;
            }
        }
        if done {
            break;
        }
    }
    if verdict.class == Classification::Undecided && samples.len() == 1 {
        verdict.evidence = "no time elapsed".into();
    }
    Ok(SimTrace { samples, snapshots, verdict, final_state: state, dt })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport<T> {
    pub passed: bool,
    pub samples_checked: usize,
    pub violations: Vec<String>,
    /// Smallest `h_B - h_A`, `g_A - g_B`, `u_B - u_A`, `v_B - v_A` over all samples.
    pub min_margins: [T; 4],
}

/// A scenario for [`comparison_check`].
#[derive(Debug, Clone, Copy)]
pub struct Scenario<'a, T> {
    pub params: &'a ModelParams<T>,
    pub initial: &'a InitialData<T>,
}

/// Runs two scenarios in lockstep and checks that B dominates A at every sample.
pub fn comparison_check<T: Scalar>(
    a: Scenario<'_, T>,
    b: Scenario<'_, T>,
    grid: &Grid<T>,
    horizon: T,
    sample_every: T,
    tolerance: T,
) -> Result<ComparisonReport<T>> {
    let ops_a = DiscreteOperators::new(a.params, grid)?;
    let ops_b = DiscreteOperators::new(b.params, grid)?;
    let mut sa = Stepper::new(a.params, &ops_a);
    let mut sb = Stepper::new(b.params, &ops_b);
    let dt = sa.dt_max().min(sb.dt_max());
    let mut xa = SimState::initial(grid, a.initial);
    let mut xb = SimState::initial(grid, b.initial);
    let mut margins = [T::infinity(); 4];
    let mut violations = Vec::new();
    let mut checked = 0usize;
    let check = |xa: &SimState<T>, xb: &SimState<T>, margins: &mut [T; 4], violations: &mut Vec<String>| {
        let m = [
            xb.h - xa.h,
            xa.g - xb.g,
            xb.u.iter().zip(&xa.u).fold(T::infinity(), |m, (&p, &q)| m.min(p - q)),
            xb.v.iter().zip(&xa.v).fold(T::infinity(), |m, (&p, &q)| m.min(p - q)),
        ];
        for (k, name) in ["h", "g", "u", "v"].iter().enumerate() {
            margins[k] = margins[k].min(m[k]);
            if m[k] < -tolerance {
                violations.push(format!("t = {}: {name} ordering violated by {}", xa.t, -m[k]));
            }
        }
    };
    check(&xa, &xb, &mut margins, &mut violations);
    checked += 1;
    let mut next = sample_every;
    let mut k = 0usize;
    while xa.t < horizon {
        let target = (T::from_usize_lossy(k + 1) * dt).min(horizon);
        let h = target - xa.t;
        sa.advance(&mut xa, h)?;
        sb.advance(&mut xb, h)?;
        xa.t = target;
        xb.t = target;
        k += 1;
        if xa.t >= next * (T::one() - T::lit(1e-12)) || xa.t >= horizon {
            check(&xa, &xb, &mut margins, &mut violations);
            checked += 1;
            while next <= xa.t * (T::one() + T::lit(1e-12)) {
                next += sample_every;
            }
        }
    }
    Ok(ComparisonReport { passed: violations.is_empty(), samples_checked: checked, violations, min_margins: margins })
}

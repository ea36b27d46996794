//! Parameter objects of the two-species system and their validation.
//!
//! Species 0 (`u`) and species 1 (`v`) share the same structure: nonlocal
//! dispersal with rate `d` and kernel `J`, drift `+s ∂x`, a spatially varying
//! loss rate, and a saturating inflow driven by the partner species
//! (`H(v)` for `u`, `G(u)` for `v`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// Gaussian of standard deviation `width`, cut off at `|x| > support_radius`
    /// and rescaled to unit mass.
    TruncatedGaussian,
    /// `c (1 - (x/R)^2)^2` on `|x| <= R`; C¹ with exact compact support. The
    /// shape is fixed by the radius; `width` is carried for reporting only.
    QuarticBump,
}

/// Symmetric dispersal kernel with unit mass and compact support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub width: T,
    pub support_radius: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: KernelFamily, width: T, support_radius: T) -> Self {
        Self { family, width, support_radius }
    }

    pub fn quartic_bump(support_radius: T) -> Self {
        Self::new(KernelFamily::QuarticBump, support_radius / T::lit(2.0), support_radius)
    }

    pub fn truncated_gaussian(width: T, support_radius: T) -> Self {
        Self::new(KernelFamily::TruncatedGaussian, width, support_radius)
    }

    fn gaussian_mass(&self) -> f64 {
        libm::erf(self.support_radius.to_f64_lossy() / (self.width.to_f64_lossy() * std::f64::consts::SQRT_2))
    }

    pub fn eval(&self, x: T) -> T {
        let r = self.support_radius;
        if x.abs() > r {
            return T::zero();
        }
        match self.family {
            KernelFamily::QuarticBump => {
                let s = x / r;
                let one_minus = T::one() - s * s;
                T::lit(15.0 / 16.0) / r * one_minus * one_minus
            }
            KernelFamily::TruncatedGaussian => {
                let w = self.width;
                let norm = w * (T::lit(2.0) * T::PI()).sqrt() * T::lit(self.gaussian_mass());
                (-(x * x) / (T::lit(2.0) * w * w)).exp() / norm
            }
        }
    }

    /// `sup J = J(0)`.
    pub fn peak(&self) -> T {
        self.eval(T::zero())
    }

    /// Right tail mass `∫_d^∞ J(z) dz`, in closed form.
    pub fn tail(&self, distance: T) -> T {
        let r = self.support_radius;
        if distance >= r {
            return T::zero();
        }
        if distance <= -r {
            return T::one();
        }
        match self.family {
            KernelFamily::QuarticBump => {
                let s = distance / r;
                let s2 = s * s;
                let antiderivative = s * (T::one() - s2 * T::lit(2.0 / 3.0) + s2 * s2 * T::lit(0.2));
                T::lit(0.5) - T::lit(15.0 / 16.0) * antiderivative
            }
            KernelFamily::TruncatedGaussian => {
                let mass = self.gaussian_mass();
                let e = libm::erf(distance.to_f64_lossy() / (self.width.to_f64_lossy() * std::f64::consts::SQRT_2));
                T::lit(((mass - e) / (2.0 * mass)).clamp(0.0, 1.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityFamily {
    /// `c z`
    Linear,
    /// `c z / (1 + z / s)`
    Monod,
}

/// Increasing inflow function `F` with `F(0) = 0` and `F'(0) = c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearitySpec<T> {
    pub family: NonlinearityFamily,
    pub slope_at_zero: T,
    /// Ignored by the linear family.
    pub saturation: T,
}

impl<T: Scalar> NonlinearitySpec<T> {
    pub fn linear(slope: T) -> Self {
        Self { family: NonlinearityFamily::Linear, slope_at_zero: slope, saturation: T::one() }
    }

    pub fn monod(slope: T, saturation: T) -> Self {
        Self { family: NonlinearityFamily::Monod, slope_at_zero: slope, saturation }
    }

    #[inline]
    pub fn eval(&self, z: T) -> T {
        match self.family {
            NonlinearityFamily::Linear => self.slope_at_zero * z,
            NonlinearityFamily::Monod => self.slope_at_zero * z / (T::one() + z / self.saturation),
        }
    }

    #[inline]
    pub fn derivative(&self, z: T) -> T {
        match self.family {
            NonlinearityFamily::Linear => self.slope_at_zero,
            NonlinearityFamily::Monod => {
                let d = T::one() + z / self.saturation;
                self.slope_at_zero / (d * d)
            }
        }
    }

    /// A level the function never exceeds in practice: `F(1e6 s)`.
    pub fn saturation_proxy(&self) -> T {
        let s = match self.family {
            NonlinearityFamily::Linear => T::one(),
            NonlinearityFamily::Monod => self.saturation,
        };
        self.eval(T::lit(1e6) * s)
    }
}

/// `x ↦ base + amplitude · cos(wavenumber · x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientField<T> {
    pub base: T,
    pub amplitude: T,
    pub wavenumber: T,
}

impl<T: Scalar> CoefficientField<T> {
    pub fn constant(value: T) -> Self {
        Self { base: value, amplitude: T::zero(), wavenumber: T::zero() }
    }

    pub fn cosine(base: T, amplitude: T, wavenumber: T) -> Self {
        Self { base, amplitude, wavenumber }
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        self.base + self.amplitude * (self.wavenumber * x).cos()
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude == T::zero() || self.wavenumber == T::zero()
    }

    /// Constant value, meaningful only when [`is_constant`](Self::is_constant).
    pub fn value(&self) -> T {
        self.eval(T::zero())
    }

    /// Smallest value of `cos(k x)` over `|x| <= half_length`.
    fn min_cos(&self, half_length: T) -> T {
        let phase = (self.wavenumber * half_length).abs();
        if phase >= T::PI() {
            -T::one()
        } else {
            phase.cos()
        }
    }

    pub fn sup_on(&self, half_length: T) -> T {
        if self.is_constant() {
            return self.value();
        }
        if self.amplitude > T::zero() {
            self.base + self.amplitude
        } else {
            self.base + self.amplitude * self.min_cos(half_length)
        }
    }

    pub fn inf_on(&self, half_length: T) -> T {
        if self.is_constant() {
            return self.value();
        }
        if self.amplitude > T::zero() {
            self.base + self.amplitude * self.min_cos(half_length)
        } else {
            self.base + self.amplitude
        }
    }
}

/// Coefficients belonging to one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Species<T> {
    /// Nonlocal dispersal rate (`d1` / `d2`).
    pub dispersal: T,
    /// Drift speed multiplying `∂x` (`p` / `q`).
    pub drift: T,
    /// Loss rate field (`a(x)` / `b(x)`).
    pub decay: CoefficientField<T>,
    pub kernel: KernelSpec<T>,
    /// Inflow from the partner species (`H` for u, `G` for v).
    pub source: NonlinearitySpec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams<T> {
    /// `[u, v]`.
    pub species: [Species<T>; 2],
    /// Boundary response coefficient `mu`.
    pub expansion_rate: T,
    /// Weight `rho` of the v-flux in the boundary law.
    pub flux_weight: T,
    /// Initial half-length `h0`.
    pub initial_half_width: T,
}

impl<T: Scalar> ModelParams<T> {
    /// The reference configuration of the acceptance suite: quartic-bump kernels
    /// of radius 1, `d1 = d2 = 1`, `p = q = 0.2`, `a = b = 1`, Monod couplings with
    /// `c = 2, s = 1` (so `R0 = 4`), `mu = 1`, `rho = 0.5`, `h0 = 1`.
    pub fn reference() -> Self {
        let sp = Species {
            dispersal: T::one(),
            drift: T::lit(0.2),
            decay: CoefficientField::constant(T::one()),
            kernel: KernelSpec::quartic_bump(T::one()),
            source: NonlinearitySpec::monod(T::lit(2.0), T::one()),
        };
        Self { species: [sp, sp], expansion_rate: T::one(), flux_weight: T::lit(0.5), initial_half_width: T::one() }
    }

    /// Same parameters with both couplings replaced.
    pub fn with_sources(mut self, source_u: NonlinearitySpec<T>, source_v: NonlinearitySpec<T>) -> Self {
        self.species[0].source = source_u;
        self.species[1].source = source_v;
        self
    }

    pub fn with_expansion_rate(mut self, mu: T) -> Self {
        self.expansion_rate = mu;
        self
    }

    pub fn with_initial_half_width(mut self, h0: T) -> Self {
        self.initial_half_width = h0;
        self
    }

    pub fn with_drifts(mut self, p: T, q: T) -> Self {
        self.species[0].drift = p;
        self.species[1].drift = q;
        self
    }

    pub fn with_dispersals(mut self, d1: T, d2: T) -> Self {
        self.species[0].dispersal = d1;
        self.species[1].dispersal = d2;
        self
    }

    pub fn with_decays(mut self, a: CoefficientField<T>, b: CoefficientField<T>) -> Self {
        self.species[0].decay = a;
        self.species[1].decay = b;
        self
    }

    pub fn with_kernels(mut self, j1: KernelSpec<T>, j2: KernelSpec<T>) -> Self {
        self.species[0].kernel = j1;
        self.species[1].kernel = j2;
        self
    }

    /// `(H'(0), G'(0))`.
    pub fn coupling_slopes(&self) -> (T, T) {
        (self.species[0].source.slope_at_zero, self.species[1].source.slope_at_zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Profile<T> {
    /// `amplitude · cos(π x / (2 h0))` on `[-h0, h0]`.
    CosineBump { amplitude: T },
    /// `level` on the open interval, zero at the endpoints.
    ConstantPlateau { level: T },
}

impl<T: Scalar> Profile<T> {
    pub fn eval(&self, x: T, half_width: T) -> T {
        if x.abs() >= half_width {
            return T::zero();
        }
        match *self {
            Profile::CosineBump { amplitude } => amplitude * (T::FRAC_PI_2() * x / half_width).cos(),
            Profile::ConstantPlateau { level } => level,
        }
    }

    pub fn peak(&self) -> T {
        match *self {
            Profile::CosineBump { amplitude } => amplitude,
            Profile::ConstantPlateau { level } => level,
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        match *self {
            Profile::CosineBump { amplitude } => Profile::CosineBump { amplitude: amplitude * factor },
            Profile::ConstantPlateau { level } => Profile::ConstantPlateau { level: level * factor },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialData<T> {
    pub u: Profile<T>,
    pub v: Profile<T>,
}

impl<T: Scalar> InitialData<T> {
    pub fn cosine_bumps(amplitude: T) -> Self {
        Self { u: Profile::CosineBump { amplitude }, v: Profile::CosineBump { amplitude } }
    }

    pub fn plateaus(level_u: T, level_v: T) -> Self {
        Self { u: Profile::ConstantPlateau { level: level_u }, v: Profile::ConstantPlateau { level: level_v } }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { u: self.u.scaled(factor), v: self.v.scaled(factor) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `Err` carrying every failed check.
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msg = self.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ");
            Err(Error::InvalidParameter(msg))
        }
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, failure: impl FnOnce() -> String) {
        let detail = if passed { "ok".to_string() } else { failure() };
        self.checks.push(Check { name: name.into(), passed, detail });
    }
}

const SPECIES_NAMES: [&str; 2] = ["u", "v"];
const KERNEL_NAMES: [&str; 2] = ["J1", "J2"];
const SOURCE_NAMES: [&str; 2] = ["H", "G"];
const DECAY_NAMES: [&str; 2] = ["a", "b"];

fn log_samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
}

fn check_kernel<T: Scalar>(report: &mut ValidationReport, name: &str, k: &KernelSpec<T>) {
    report.push(format!("{name} width"), k.width > T::zero(), || format!("width must be positive (got {})", k.width));
    report.push(format!("{name} support"), k.support_radius > T::zero(), || {
        format!("support radius must be positive (got {})", k.support_radius)
    });
    if !(k.width > T::zero() && k.support_radius > T::zero()) {
        return;
    }
    let r = k.support_radius;
    let mut bad = None;
    for i in 0..=300 {
        let x = r * T::lit(1.5 * (i as f64 / 150.0 - 1.0));
        let (jp, jm) = (k.eval(x), k.eval(-x));
        if jp < T::zero() || jp != jm || !jp.is_finite() {
            bad = Some(x);
            break;
        }
    }
    report.push(format!("{name} even and nonnegative"), bad.is_none(), || {
        format!("J(x) != J(-x) or J(x) < 0 at x = {}", bad.unwrap())
    });
    report.push(format!("{name} positive at origin"), k.peak() > T::zero(), || "J(0) must be positive".into());
}

fn check_source<T: Scalar>(report: &mut ValidationReport, name: &str, f: &NonlinearitySpec<T>) {
    report.push(format!("{name} slope at zero"), f.slope_at_zero > T::zero(), || {
        format!("{name}'(0) must be positive (got {})", f.slope_at_zero)
    });
    if f.family == NonlinearityFamily::Monod {
        report.push(format!("{name} saturation"), f.saturation > T::zero(), || {
            format!("saturation must be positive (got {})", f.saturation)
        });
        if f.saturation <= T::zero() {
            return;
        }
    }
    report.push(format!("{name} vanishes at zero"), f.eval(T::zero()) == T::zero(), || format!("{name}(0) != 0"));
    if f.slope_at_zero <= T::zero() {
        return;
    }
    let mut prev = T::zero();
    let mut bad_pos = None;
    let mut bad_mono = None;
    let mut bad_sub = None;
    for z in log_samples(1e-8, 1e3, 221) {
        let zt = T::lit(z);
        let val = f.eval(zt);
        if bad_pos.is_none() && val <= T::zero() {
            bad_pos = Some(z);
        }
        if bad_mono.is_none() && val < prev {
            bad_mono = Some(z);
        }
        if bad_sub.is_none() && val > f.slope_at_zero * zt * (T::one() + T::epsilon() * T::lit(4.0)) {
            bad_sub = Some(z);
        }
        prev = val;
    }
    report.push(format!("{name} positive"), bad_pos.is_none(), || format!("{name}(z) <= 0 at z = {:e}", bad_pos.unwrap()));
    report.push(format!("{name} increasing"), bad_mono.is_none(), || {
        format!("{name} decreases at z = {:e}", bad_mono.unwrap())
    });
    report.push(format!("{name} sublinear"), bad_sub.is_none(), || {
        format!("{name}(z) > {name}'(0) z at z = {:e}", bad_sub.unwrap())
    });
}

/// Checks every standing assumption on the parameters. Never fails; the report
/// carries the failures together with an offending sample point.
pub fn validate<T: Scalar>(params: &ModelParams<T>) -> ValidationReport {
    let mut report = ValidationReport { checks: Vec::new() };
    for (k, sp) in params.species.iter().enumerate() {
        let sname = SPECIES_NAMES[k];
        report.push(format!("dispersal of {sname}"), sp.dispersal >= T::zero() && sp.dispersal.is_finite(), || {
            format!("dispersal rate must be nonnegative (got {})", sp.dispersal)
        });
        report.push(format!("drift of {sname}"), sp.drift.is_finite(), || "drift must be finite".into());
        check_kernel(&mut report, KERNEL_NAMES[k], &sp.kernel);
        check_source(&mut report, SOURCE_NAMES[k], &sp.source);
        let d = sp.decay;
        let positive = d.base > d.amplitude.abs();
        report.push(format!("coefficient {}", DECAY_NAMES[k]), positive, || {
            let x = if d.wavenumber == T::zero() { T::zero() } else { T::PI() / d.wavenumber.abs() };
            let x = if d.amplitude < T::zero() { T::zero() } else { x };
            format!("coefficient not strictly positive (value {} at x = {})", d.eval(x), x)
        });
    }
    report.push("expansion rate", params.expansion_rate >= T::zero(), || {
        format!("mu must be nonnegative (got {})", params.expansion_rate)
    });
    report.push("flux weight", params.flux_weight >= T::zero(), || {
        format!("rho must be nonnegative (got {})", params.flux_weight)
    });
    report.push("initial half-width", params.initial_half_width > T::zero(), || {
        format!("h0 must be positive (got {})", params.initial_half_width)
    });

    // Saturation: some z > 0 with G(H(z)/a) < b z, using the smallest loss rates.
    let a = params.species[0].decay.base - params.species[0].decay.amplitude.abs();
    let b = params.species[1].decay.base - params.species[1].decay.amplitude.abs();
    if a > T::zero() && b > T::zero() {
        let (hf, gf) = (params.species[0].source, params.species[1].source);
        let found = log_samples(1e-6, 1e6, 241).any(|z| {
            let zt = T::lit(z);
            gf.eval(hf.eval(zt) / a) < b * zt
        });
        report.push("saturation of G(H(z)/a)", found, || "G(H(z)/a) >= b z for every sampled z in [1e-6, 1e6]".into());
    }
    report
}

pub fn validate_initial<T: Scalar>(initial: &InitialData<T>) -> ValidationReport {
    let mut report = ValidationReport { checks: Vec::new() };
    for (name, prof) in [("u0", initial.u), ("v0", initial.v)] {
        report.push(format!("{name} positive"), prof.peak() > T::zero(), || {
            format!("{name} must be positive inside the initial interval (peak {})", prof.peak())
        });
    }
    report
}

/// `K = max{M1, M2} + (|H'(0)| + |G'(0)|)/2` with `M_i = d_i + sup` of the loss
/// rate over `[-half_length, half_length]`.
pub fn coercivity_constant<T: Scalar>(params: &ModelParams<T>, half_length: T) -> T {
    let [u, v] = &params.species;
    let m1 = u.dispersal + u.decay.sup_on(half_length);
    let m2 = v.dispersal + v.decay.sup_on(half_length);
    let cross = (u.source.slope_at_zero.abs() + v.source.slope_at_zero.abs()) / T::lit(2.0);
    m1.max(m2) + cross
}

/// `R0 = H'(0) G'(0) / (a b)` for constant loss rates.
pub fn scalar_r0<T: Scalar>(params: &ModelParams<T>) -> Result<T> {
    let [u, v] = &params.species;
    if !u.decay.is_constant() || !v.decay.is_constant() {
        return Err(Error::HeterogeneousCoefficients);
    }
    Ok(u.source.slope_at_zero * v.source.slope_at_zero / (u.decay.value() * v.decay.value()))
}

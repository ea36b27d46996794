use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid too coarse: dx = {dx} must be smaller than h0 = {h0}")]
    GridTooCoarse { dx: f64, h0: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("kernel wider than window: support radius {radius} exceeds window half-width {half_width}")]
    KernelWiderThanWindow { radius: f64, half_width: f64 },
    #[error("domain exceeds window: half-length {half_length} does not fit in window half-width {half_width}")]
    DomainExceedsWindow { half_length: f64, half_width: f64 },
    #[error("heterogeneous decay coefficients: the scalar reproduction number needs constant a and b (use the operator-based R0)")]
    HeterogeneousCoefficients,
    #[error("power iteration stalled after {iterations} iterations (residual {residual:e})")]
    PowerIterationStalled { iterations: usize, residual: f64 },
    #[error("irreducibility violated: principal eigenvector has vanishing entries and no normalizable adjoint")]
    IrreducibilityViolated,
    #[error("lambda = {lambda} lies below the spectral bound of the transport part")]
    BelowTransportBound { lambda: f64 },
    #[error("no root of rho(lambda) = 1 in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("transport part not invertible at 0 (spectral bound {bound} >= 0)")]
    TransportNotInvertible { bound: f64 },
    #[error("test function must be positive (entry {index} = {value})")]
    NonPositiveTestFunction { index: usize, value: f64 },
    #[error("initial domain already supercritical: lambda*({half_length}) = {lambda} > 0")]
    InitialDomainSupercritical { half_length: f64, lambda: f64 },
    #[error("u_max too small: no sign change of u - F(u) on (0, {u_max}] although R0 = {r0} > 1")]
    UMaxTooSmall { u_max: f64, r0: f64 },
    #[error("relaxation horizon exceeded at t = {time} (residual {residual:e})")]
    RelaxationHorizonExceeded { time: f64, residual: f64 },
    #[error("dt too large: {dt} exceeds stability bound {dt_max}")]
    DtTooLarge { dt: f64, dt_max: f64 },
    #[error("window exhausted at t = {time}: boundary reached the edge of the lattice (h - g = {width})")]
    WindowExhausted { time: f64, width: f64 },
    #[error("R0 = {r0} <= 1: vanishing for all mu")]
    VanishingForAllMu { r0: f64 },
    #[error("h0 = {h0} >= critical half-length {critical}: spreading regardless of mu")]
    SpreadingRegardlessOfMu { h0: f64, critical: f64 },
    #[error("no spreading found below mu cap {cap}")]
    NoSpreadingBelowCap { cap: f64 },
    #[error("no vanishing found above mu floor {floor}")]
    NoVanishingAboveFloor { floor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

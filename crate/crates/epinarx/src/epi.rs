//! Compartmental epidemic machinery: a susceptible/exposed/infected/removed/
//! deceased model, time-varying rate reconstruction from case counts, and the
//! reproduction-number series that drives the identification pipeline.

use std::fmt::Write as _;

use crate::data::TimeSeries;
use crate::error::{Error, Result};

/// A per-day rate: either constant or a daily path.
#[derive(Debug, Clone, PartialEq)]
pub enum RatePath {
    Constant(f64),
    /// One value per simulated day; day `d` uses entry `d` for the whole day.
    Daily(Vec<f64>),
}

impl RatePath {
    fn at(&self, day: usize) -> f64 {
        match self {
            RatePath::Constant(v) => *v,
            RatePath::Daily(values) => values[day],
        }
    }

    fn validate(&self, name: &str, days: usize) -> Result<()> {
        match self {
            RatePath::Constant(v) => {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::InvalidEpiParams {
                        reason: format!("{name} must be finite and non-negative, got {v}"),
                    });
                }
            }
            RatePath::Daily(values) => {
                if values.len() < days {
                    return Err(Error::InvalidEpiParams {
                        reason: format!(
                            "{name} path has {} entries but {days} days are simulated",
                            values.len()
                        ),
                    });
                }
                for (d, v) in values.iter().enumerate() {
                    if !v.is_finite() || *v < 0.0 {
                        return Err(Error::InvalidEpiParams {
                            reason: format!("{name}[{d}] must be finite and non-negative, got {v}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Average latent period, days (reciprocal of the exposed→infectious rate).
pub const DEFAULT_LATENT_DAYS: f64 = 5.0;
/// Average transmission time, days (reciprocal of the removal rate).
pub const DEFAULT_TRANSMISSION_DAYS: f64 = 14.0;

/// Model parameters: population, latent and removal rates, and per-day
/// transmission and lethality rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SEIRParams {
    pub population: f64,
    /// Exposed → infectious rate δ (1/day); default 1/5.
    pub delta: f64,
    /// Infectious → removed rate γ (1/day); default 1/14.
    pub gamma: f64,
    /// Transmission rate β(t) (1/day).
    pub beta: RatePath,
    /// Lethality rate r(t) (1/day).
    pub lethality: RatePath,
}

impl SEIRParams {
    /// Parameters with the default latent (5-day) and transmission (14-day)
    /// periods.
    pub fn new(population: f64, beta: RatePath, lethality: RatePath) -> SEIRParams {
        SEIRParams {
            population,
            delta: 1.0 / DEFAULT_LATENT_DAYS,
            gamma: 1.0 / DEFAULT_TRANSMISSION_DAYS,
            beta,
            lethality,
        }
    }

    fn validate(&self, days: usize) -> Result<()> {
        if !self.population.is_finite() || self.population <= 0.0 {
            return Err(Error::InvalidEpiParams {
                reason: format!("population must be positive, got {}", self.population),
            });
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::InvalidEpiParams {
                reason: format!("delta must be positive, got {}", self.delta),
            });
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::InvalidEpiParams {
                reason: format!("gamma must be positive, got {}", self.gamma),
            });
        }
        self.beta.validate("beta", days)?;
        self.lethality.validate("lethality", days)?;
        Ok(())
    }
}

/// One day's compartment counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SEIRState {
    pub day: usize,
    pub susceptible: f64,
    pub exposed: f64,
    pub infected: f64,
    pub removed: f64,
    pub deceased: f64,
}

impl SEIRState {
    pub fn new(susceptible: f64, exposed: f64, infected: f64, removed: f64, deceased: f64) -> SEIRState {
        SEIRState {
            day: 0,
            susceptible,
            exposed,
            infected,
            removed,
            deceased,
        }
    }

    /// Total population represented by this state.
    pub fn total(&self) -> f64 {
        self.susceptible + self.exposed + self.infected + self.removed + self.deceased
    }

    fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("susceptible", self.susceptible),
            ("exposed", self.exposed),
            ("infected", self.infected),
            ("removed", self.removed),
            ("deceased", self.deceased),
        ]
    }
}

/// Compartment flow derivatives for the mass-action model:
/// S′ = −βIS/N, E′ = βIS/N − δE, I′ = δE − (r+γ)I, R′ = γI, D′ = rI.
fn derivatives(v: [f64; 5], beta: f64, lethality: f64, params: &SEIRParams) -> [f64; 5] {
    let [s, e, i, _, _] = v;
    let infection = beta * i * s / params.population;
    [
        -infection,
        infection - params.delta * e,
        params.delta * e - (lethality + params.gamma) * i,
        params.gamma * i,
        lethality * i,
    ]
}

fn rk4_step(v: [f64; 5], h: f64, beta: f64, lethality: f64, params: &SEIRParams) -> [f64; 5] {
    let k1 = derivatives(v, beta, lethality, params);
    let mut v2 = v;
    for (x, k) in v2.iter_mut().zip(k1) {
        *x += 0.5 * h * k;
    }
    let k2 = derivatives(v2, beta, lethality, params);
    let mut v3 = v;
    for (x, k) in v3.iter_mut().zip(k2) {
        *x += 0.5 * h * k;
    }
    let k3 = derivatives(v3, beta, lethality, params);
    let mut v4 = v;
    for (x, k) in v4.iter_mut().zip(k3) {
        *x += h * k;
    }
    let k4 = derivatives(v4, beta, lethality, params);
    let mut out = v;
    for (j, x) in out.iter_mut().enumerate() {
        *x += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

/// Integrates the model with fixed-step fourth-order Runge–Kutta and returns
/// the trajectory sampled at integer days (`days + 1` states, day 0 first).
///
/// `step` is the nominal sub-day step in `(0, 1]`; it is rounded to the
/// nearest integer divisor of one day so samples land exactly on day
/// boundaries. The rate paths are piecewise constant per day. Conservation
/// holds to rounding because the flows cancel exactly. A component that
/// leaves `[−1e-9·N, ∞)` or stops being finite aborts with
/// [`Error::IntegratorFailure`].
pub fn seir_integrate(
    params: &SEIRParams,
    initial: &SEIRState,
    days: usize,
    step: f64,
) -> Result<Vec<SEIRState>> {
    params.validate(days)?;
    if !step.is_finite() || step <= 0.0 || step > 1.0 {
        return Err(Error::InvalidEpiParams {
            reason: format!("step must be in (0, 1], got {step}"),
        });
    }
    let tolerance = 1e-9 * params.population;
    for (name, value) in initial.components() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidEpiParams {
                reason: format!("initial {name} must be finite and non-negative, got {value}"),
            });
        }
    }
    if (initial.total() - params.population).abs() > tolerance {
        return Err(Error::InvalidEpiParams {
            reason: format!(
                "initial state sums to {} but the population is {}",
                initial.total(),
                params.population
            ),
        });
    }

    let n_sub = (1.0 / step).round().max(1.0) as usize;
    let h = 1.0 / n_sub as f64;

    let mut v = [
        initial.susceptible,
        initial.exposed,
        initial.infected,
        initial.removed,
        initial.deceased,
    ];
    let mut trajectory = Vec::with_capacity(days + 1);
    trajectory.push(SEIRState { day: 0, ..*initial });

    for day in 0..days {
        let beta = params.beta.at(day);
        let lethality = params.lethality.at(day);
        for _ in 0..n_sub {
            v = rk4_step(v, h, beta, lethality, params);
        }
        let state = SEIRState {
            day: day + 1,
            susceptible: v[0],
            exposed: v[1],
            infected: v[2],
            removed: v[3],
            deceased: v[4],
        };
        for (name, value) in state.components() {
            if !value.is_finite() || value < -tolerance {
                return Err(Error::IntegratorFailure {
                    day: day + 1,
                    compartment: name,
                    value,
                });
            }
        }
        trajectory.push(state);
    }
    Ok(trajectory)
}

/// Expected secondary infections per case: `β·(S/N)/(r+γ)`.
///
/// With `S = N` and `r = 0` this is exactly `β/γ`, and scaling `β` by a power
/// of two scales the result by the same factor exactly.
pub fn reproduction_number(beta: f64, susceptible: f64, lethality: f64, gamma: f64, population: f64) -> Result<f64> {
    if lethality + gamma <= 0.0 {
        return Err(Error::UndefinedReproductionNumber {
            reason: format!("lethality + gamma must be positive, got {}", lethality + gamma),
        });
    }
    if !(0.0..=population).contains(&susceptible) || population <= 0.0 {
        return Err(Error::UndefinedReproductionNumber {
            reason: format!("susceptible {susceptible} outside [0, population {population}]"),
        });
    }
    Ok(beta * (susceptible / population) / (lethality + gamma))
}

/// Active infections from daily new cases: the trailing-`window` sum,
/// matching a mean infectious period of `window` days. The first `window − 1`
/// entries use the partial window that is available.
pub fn active_infections(new_cases: &TimeSeries, window: usize) -> Result<TimeSeries> {
    if window == 0 {
        return Err(Error::InvalidEpiParams {
            reason: "active-infection window must be at least 1 day".to_string(),
        });
    }
    let values = new_cases.values();
    let mut active = Vec::with_capacity(values.len());
    let mut rolling = 0.0;
    for t in 0..values.len() {
        rolling += values[t];
        if t >= window {
            rolling -= values[t - window];
        }
        active.push(rolling);
    }
    TimeSeries::new(new_cases.name(), new_cases.start(), active)
}

/// Running sum of a series (daily increments → cumulative totals).
pub fn cumulative(series: &TimeSeries) -> TimeSeries {
    let mut total = 0.0;
    let values = series
        .values()
        .iter()
        .map(|v| {
            total += v;
            total
        })
        .collect();
    TimeSeries::new(series.name(), series.start(), values)
        .expect("running sum of finite values is finite")
}

/// Smoothing applied to the estimated rate series before the
/// reproduction-number computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// No smoothing.
    Raw,
    /// Centered moving average over an odd window. Near the edges the window
    /// shrinks symmetrically, so linear trends pass through unchanged.
    CenteredMovingAverage { window: usize },
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::CenteredMovingAverage { window: 7 }
    }
}

fn smooth(values: &[f64], smoothing: Smoothing) -> Result<Vec<f64>> {
    match smoothing {
        Smoothing::Raw => Ok(values.to_vec()),
        Smoothing::CenteredMovingAverage { window } => {
            if window == 0 || window % 2 == 0 {
                return Err(Error::InvalidEpiParams {
                    reason: format!("smoothing window must be odd and positive, got {window}"),
                });
            }
            let n = values.len();
            let radius = window / 2;
            Ok((0..n)
                .map(|t| {
                    let r = radius.min(t).min(n - 1 - t);
                    let slice = &values[t - r..=t + r];
                    slice.iter().sum::<f64>() / slice.len() as f64
                })
                .collect())
        }
    }
}

/// Configuration for [`estimate_rates`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimation {
    pub population: f64,
    /// Exposed → infectious rate δ; default 1/5.
    pub delta: f64,
    /// Infectious → removed rate γ; default 1/14.
    pub gamma: f64,
    /// Removed count at the first sample (0 when the window starts at the
    /// epidemic's beginning).
    pub initial_removed: f64,
    pub smoothing: Smoothing,
}

impl RateEstimation {
    pub fn new(population: f64) -> RateEstimation {
        RateEstimation {
            population,
            delta: 1.0 / DEFAULT_LATENT_DAYS,
            gamma: 1.0 / DEFAULT_TRANSMISSION_DAYS,
            initial_removed: 0.0,
            smoothing: Smoothing::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("population", self.population),
            ("delta", self.delta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidEpiParams {
                    reason: format!("{name} must be positive, got {v}"),
                });
            }
        }
        if !self.initial_removed.is_finite() || self.initial_removed < 0.0 {
            return Err(Error::InvalidEpiParams {
                reason: format!(
                    "initial_removed must be non-negative, got {}",
                    self.initial_removed
                ),
            });
        }
        Ok(())
    }
}

/// Daily transmission rate, lethality rate, and reproduction number on one
/// shared date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub beta: TimeSeries,
    pub lethality: TimeSeries,
    pub rn: TimeSeries,
}

impl RateSeries {
    /// Renders as CSV with columns `date,beta,r,rn`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date,beta,r,rn\n");
        for t in 0..self.beta.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.beta.date_at(t),
                self.beta.values()[t],
                self.lethality.values()[t],
                self.rn.values()[t]
            )
            .expect("string writes cannot fail");
        }
        out
    }
}

/// Reconstructs daily transmission and lethality rates from an active
/// infection count `I(t)` and a cumulative death count `D(t)`.
///
/// The reconstruction inverts the compartment flows with forward differences:
///
/// * lethality `r̂(t) = (D(t+1) − D(t)) / I(t)`;
/// * exposed `Ê(t) = (I(t+1) − I(t) + (r̂(t)+γ)·I(t)) / δ` (the infected
///   flow, solved for E);
/// * removed `R̂(t)` accumulates `γ·I(t)` from `initial_removed`;
/// * susceptible from conservation: `Ŝ(t) = N − Ê(t) − I(t) − R̂(t) − D(t)`,
///   i.e. the population minus cumulative infections;
/// * transmission `β̂(t) = −N·(Ŝ(t+1) − Ŝ(t)) / (I(t)·Ŝ(t))`.
///
/// Rates are floored at zero, the trailing samples that forward differencing
/// cannot reach are filled with the last computed value (so the output keeps
/// the source date axis), and the configured smoothing is applied before the
/// reproduction number `RN(t) = β̂(t)·(Ŝ(t)/N)/(r̂(t)+γ)` is formed.
pub fn estimate_rates(
    cases: &TimeSeries,
    deaths: &TimeSeries,
    config: &RateEstimation,
) -> Result<RateSeries> {
    config.validate()?;
    if !cases.same_axis(deaths) {
        return Err(Error::AxisMismatch {
            a: cases.name().to_string(),
            b: deaths.name().to_string(),
        });
    }
    let n = cases.len();
    if n < 3 {
        return Err(Error::InvalidEpiParams {
            reason: format!("rate estimation needs at least 3 samples, got {n}"),
        });
    }
    let i = cases.values();
    let d = deaths.values();

    for t in 0..n - 1 {
        if d[t + 1] < d[t] {
            return Err(Error::DecreasingDeaths {
                date: deaths.date_at(t + 1).to_string(),
            });
        }
        if i[t] <= 0.0 {
            return Err(Error::RateGap {
                date: cases.date_at(t).to_string(),
            });
        }
    }

    let population = config.population;
    let (delta, gamma) = (config.delta, config.gamma);

    // Lethality by forward difference, last point filled.
    let mut lethality_raw = Vec::with_capacity(n);
    for t in 0..n - 1 {
        lethality_raw.push(((d[t + 1] - d[t]) / i[t]).max(0.0));
    }
    lethality_raw.push(lethality_raw[n - 2]);

    // Exposed from the infected-compartment flow, valid through n−2.
    let mut exposed = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        let flow = i[t + 1] - i[t] + (lethality_raw[t] + gamma) * i[t];
        exposed.push((flow / delta).max(0.0));
    }

    // Removed accumulates γ·I; susceptible follows from conservation.
    let mut removed = config.initial_removed;
    let mut susceptible = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        susceptible.push(population - exposed[t] - i[t] - removed - d[t]);
        removed += gamma * i[t];
    }

    // Transmission by forward difference of susceptibles, valid through n−3;
    // the last two points are filled.
    let mut beta_raw = Vec::with_capacity(n);
    for t in 0..n - 2 {
        if susceptible[t] <= 0.0 {
            return Err(Error::SusceptibleExhausted {
                date: cases.date_at(t).to_string(),
                value: susceptible[t],
            });
        }
        let rate = -population * (susceptible[t + 1] - susceptible[t]) / (i[t] * susceptible[t]);
        beta_raw.push(rate.max(0.0));
    }
    beta_raw.push(beta_raw[n - 3]);
    beta_raw.push(beta_raw[n - 3]);

    let beta_smooth = smooth(&beta_raw, config.smoothing)?;
    let lethality_smooth = smooth(&lethality_raw, config.smoothing)?;

    let mut rn = Vec::with_capacity(n);
    for t in 0..n {
        let s = susceptible[t.min(n - 2)];
        rn.push(reproduction_number(
            beta_smooth[t],
            s.clamp(0.0, population),
            lethality_smooth[t],
            gamma,
            population,
        )?);
    }

    let start = cases.start();
    Ok(RateSeries {
        beta: TimeSeries::new("beta", start, beta_smooth)?,
        lethality: TimeSeries::new("r", start, lethality_smooth)?,
        rn: TimeSeries::new("rn", start, rn)?,
    })
}

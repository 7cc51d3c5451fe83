//! Deterministic synthetic data: fixtures for the self-verification suite
//! and a full campaign dataset for running the pipeline without real data.
//!
//! Everything is driven by a ChaCha stream cipher seeded explicitly, so a
//! given seed always produces the same bytes.

use epinarx::data::{Dataset, EpochDay, TimeSeries};
use epinarx::dictionary::{LagSpec, Term, VariableLags};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// First date of every synthetic series.
pub const SYNTHETIC_START: &str = "2020-03-04";

fn start_day() -> EpochDay {
    EpochDay::parse_iso(SYNTHETIC_START).expect("constant date is valid")
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("unit normal is valid")
        .sample(rng)
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

// ---------------------------------------------------------------------------
// Three-term autoregressive benchmark
// ---------------------------------------------------------------------------

/// Coefficients of the benchmark system
/// `y(t) = 0.5·y(t−1) − 0.3·u(t−1) + 0.1·u²(t−1) + e(t)`.
pub const THREE_TERM_PARAMS: [f64; 3] = [0.5, -0.3, 0.1];

/// Simulates the three-term system with `u ~ U(−1, 1)` and white process
/// noise scaled to `noise_frac` of the clean output's standard deviation.
pub fn three_term_narx(seed: u64, n: usize, noise_frac: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();

    let simulate = |sigma: f64| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = THREE_TERM_PARAMS[0] * y[t - 1]
                + THREE_TERM_PARAMS[1] * u[t - 1]
                + THREE_TERM_PARAMS[2] * u[t - 1] * u[t - 1]
                + sigma * noise[t];
        }
        y
    };
    // First pass sets the noise scale from the clean trajectory, the second
    // applies it as process noise.
    let clean = simulate(0.0);
    let y = simulate(noise_frac * std_dev(&clean));

    let start = start_day();
    Dataset::new(
        vec![
            TimeSeries::new("y", start, y).expect("finite by construction"),
            TimeSeries::new("u", start, u).expect("finite by construction"),
        ],
        "y",
    )
    .expect("aligned by construction")
}

/// The cubic one-lag dictionary the three-term system is identified over.
pub fn three_term_spec() -> LagSpec {
    LagSpec::new(
        "y",
        Some((1, 1)),
        vec![VariableLags::new("u", 1, 1)],
        3,
        false,
    )
    .expect("fixed benchmark spec is valid")
}

/// The true term set, in the order the greedy search typically finds it.
pub fn three_term_truth() -> Vec<(String, f64)> {
    vec![
        ("y(t-1)".to_string(), THREE_TERM_PARAMS[0]),
        ("u(t-1)".to_string(), THREE_TERM_PARAMS[1]),
        ("u^2(t-1)".to_string(), THREE_TERM_PARAMS[2]),
    ]
}

// ---------------------------------------------------------------------------
// Delayed-response benchmark
// ---------------------------------------------------------------------------

/// Gain on the 12-day-lagged input of the delayed-response generator.
pub const DELAYED_GAIN_12: f64 = 3.5551e4;
/// Gain on the 40-day-lagged input.
pub const DELAYED_GAIN_40: f64 = -6.2117e3;
/// Constant offset.
pub const DELAYED_OFFSET: f64 = -1.17395e4;

/// Input evaluated on an extended axis: a slow sinusoid around a positive
/// level plus clipped Gaussian jitter (clipping keeps derived counts
/// positive).
fn delayed_input(t: i64, jitter: f64) -> f64 {
    2.2 + 0.4 * (0.07 * t as f64).sin() + 0.25 * jitter.clamp(-2.0, 2.0)
}

/// Generates `y(t) = g₁₂·u(t−12) + g₄₀·u(t−40) + c + e(t)` with measurement
/// noise at `noise_frac` of the clean output's standard deviation. Every row
/// is on-model: the input is simulated far enough back for the longest lag.
pub fn delayed_response(seed: u64, n: usize, noise_frac: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Input from t = −40 so y(0) has both lags available.
    let u_ext: Vec<f64> = (-40..n as i64)
        .map(|t| delayed_input(t, standard_normal(&mut rng)))
        .collect();
    let at = |t: i64| u_ext[(t + 40) as usize];

    let clean: Vec<f64> = (0..n as i64)
        .map(|t| DELAYED_GAIN_12 * at(t - 12) + DELAYED_GAIN_40 * at(t - 40) + DELAYED_OFFSET)
        .collect();
    let sigma = noise_frac * std_dev(&clean);
    let y: Vec<f64> = clean
        .iter()
        .map(|v| v + sigma * standard_normal(&mut rng))
        .collect();
    let u: Vec<f64> = (0..n as i64).map(at).collect();

    let start = start_day();
    Dataset::new(
        vec![
            TimeSeries::new("y", start, y).expect("finite by construction"),
            TimeSeries::new("u", start, u).expect("finite by construction"),
        ],
        "y",
    )
    .expect("aligned by construction")
}

/// The linear lag-sweep dictionary the delayed-response system is identified
/// over (input lags 1..=45 plus a constant, no autoregressive terms).
pub fn delayed_response_spec() -> LagSpec {
    LagSpec::new(
        "y",
        None,
        vec![VariableLags::new("u", 1, 45)],
        1,
        true,
    )
    .expect("fixed benchmark spec is valid")
}

/// The true delayed-response terms as (rendered term, coefficient) pairs.
pub fn delayed_response_truth() -> Vec<(String, f64)> {
    vec![
        ("u(t-12)".to_string(), DELAYED_GAIN_12),
        ("u(t-40)".to_string(), DELAYED_GAIN_40),
        ("1".to_string(), DELAYED_OFFSET),
    ]
}

// ---------------------------------------------------------------------------
// Full synthetic campaign for the pipeline
// ---------------------------------------------------------------------------

/// Gain from 13-day-lagged cases to deaths in the synthetic campaign.
pub const CAMPAIGN_DEATH_GAIN: f64 = 0.018;
/// Gain from the 14-day-lagged reproduction number to deaths.
pub const CAMPAIGN_DEATH_RN_GAIN: f64 = 120.0;

/// A dataset shaped like the real pipeline input: daily `cases`, daily
/// `deaths`, and a reproduction-number series `rn`.
///
/// The relations are the two benchmarks stacked: cases respond to `rn` with
/// the delayed-response law, and deaths respond mostly to 13-day-lagged
/// cases with a weaker reproduction-number contribution, both with 1%
/// measurement noise. Identification over this campaign should therefore
/// rediscover the generating lags.
pub fn synthetic_campaign(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // rn from t = −54: cases need 40 days of history, deaths need cases 14
    // days back, so the deepest reach is 54 days before the first sample.
    let rn_ext: Vec<f64> = (-54..n as i64)
        .map(|t| delayed_input(t, standard_normal(&mut rng)))
        .collect();
    let rn_at = |t: i64| rn_ext[(t + 54) as usize];

    let cases_clean: Vec<f64> = (-14..n as i64)
        .map(|t| {
            DELAYED_GAIN_12 * rn_at(t - 12) + DELAYED_GAIN_40 * rn_at(t - 40) + DELAYED_OFFSET
        })
        .collect();
    let cases_at = |t: i64| cases_clean[(t + 14) as usize];

    let deaths_clean: Vec<f64> = (0..n as i64)
        .map(|t| CAMPAIGN_DEATH_GAIN * cases_at(t - 13) + CAMPAIGN_DEATH_RN_GAIN * rn_at(t - 14))
        .collect();

    let case_sigma = 0.01 * std_dev(&cases_clean[14..]);
    let death_sigma = 0.01 * std_dev(&deaths_clean);
    let cases: Vec<f64> = (0..n as i64)
        .map(|t| cases_at(t) + case_sigma * standard_normal(&mut rng))
        .collect();
    let deaths: Vec<f64> = deaths_clean
        .iter()
        .map(|v| v + death_sigma * standard_normal(&mut rng))
        .collect();
    let rn: Vec<f64> = (0..n as i64).map(rn_at).collect();

    let start = start_day();
    Dataset::new(
        vec![
            TimeSeries::new("cases", start, cases).expect("finite by construction"),
            TimeSeries::new("deaths", start, deaths).expect("finite by construction"),
            TimeSeries::new("rn", start, rn).expect("finite by construction"),
        ],
        "cases",
    )
    .expect("aligned by construction")
}

/// Renders a term list for set comparisons in checks.
pub fn rendered_terms(terms: &[Term]) -> Vec<String> {
    terms.iter().map(|t| t.to_string()).collect()
}

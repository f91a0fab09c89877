//! Population-weighted validity rate over two audit strata.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct StratifiedSample {
    pub N_I: u64,
    pub N_C: u64,
    pub n_I: u64,
    pub n_C: u64,
    pub h_I: u64,
    pub h_C: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityEstimate {
    pub p_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ValidityEstimate {
    /// `p̂% [low%, high%]` with two decimals.
    pub fn display(&self) -> String {
        format!("{:.2}% [{:.2}%, {:.2}%]", self.p_hat * 100.0, self.ci_low * 100.0, self.ci_high * 100.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("EmptyStratum: stratum {0} has population but no samples")]
    EmptyStratum(&'static str),
    #[error("invalid counts in stratum {0}: need 0 <= h <= n <= N")]
    InvalidCounts(&'static str),
    #[error("confidence multiplier must be positive")]
    NonPositiveZ,
    #[error("empty population")]
    EmptyPopulation,
}

pub const DEFAULT_Z: f64 = 1.96;

fn stratum(name: &'static str, big_n: u64, n: u64, h: u64) -> Result<(f64, f64), StatsError> {
    if h > n || n > big_n {
        return Err(StatsError::InvalidCounts(name));
    }
    if big_n == 0 {
        return Ok((0.0, 0.0));
    }
    if n == 0 {
        return Err(StatsError::EmptyStratum(name));
    }
    let p = h as f64 / n as f64;
    Ok((p, p * (1.0 - p) / n as f64))
}

/// `p̂ = Σ W_h p̂_h` with `W_h = N_h / N` and `SE² = Σ W_h² p̂_h (1 − p̂_h) / n_h`.
pub fn compute_stratified_validity(s: &StratifiedSample, z: f64) -> Result<ValidityEstimate, StatsError> {
    if !(z > 0.0) {
        return Err(StatsError::NonPositiveZ);
    }
    let (p_i, v_i) = stratum("I", s.N_I, s.n_I, s.h_I)?;
    let (p_c, v_c) = stratum("C", s.N_C, s.n_C, s.h_C)?;
    let total = (s.N_I + s.N_C) as f64;
    if total == 0.0 {
        return Err(StatsError::EmptyPopulation);
    }
    let (w_i, w_c) = (s.N_I as f64 / total, s.N_C as f64 / total);
    let p_hat = w_i * p_i + w_c * p_c;
    let se = (w_i * w_i * v_i + w_c * w_c * v_c).sqrt();
    Ok(ValidityEstimate { p_hat, se, ci_low: p_hat - z * se, ci_high: p_hat + z * se })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n_i: u64, n_c: u64, s_i: u64, s_c: u64, h_i: u64, h_c: u64) -> ValidityEstimate {
        compute_stratified_validity(
            &StratifiedSample { N_I: n_i, N_C: n_c, n_I: s_i, n_C: s_c, h_I: h_i, h_C: h_c },
            DEFAULT_Z,
        )
        .unwrap()
    }

    #[test]
    fn audit_rows_round_as_expected() {
        assert_eq!(row(5541, 1498, 200, 100, 189, 93).display(), "94.18% [91.48%, 96.89%]");
        assert_eq!(row(9846, 3171, 150, 50, 140, 46).display(), "93.01% [89.48%, 96.54%]");
        assert_eq!(row(6075, 1642, 150, 50, 141, 46).display(), "93.57% [90.18%, 96.97%]");
    }

    #[test]
    fn degenerate_inputs() {
        let bad = |s: StratifiedSample| compute_stratified_validity(&s, DEFAULT_Z).unwrap_err();
        let base = StratifiedSample { N_I: 10, N_C: 10, n_I: 5, n_C: 5, h_I: 5, h_C: 5 };
        assert_eq!(bad(StratifiedSample { n_C: 0, h_C: 0, ..base }), StatsError::EmptyStratum("C"));
        assert_eq!(bad(StratifiedSample { h_I: 6, ..base }), StatsError::InvalidCounts("I"));
        assert_eq!(bad(StratifiedSample { N_I: 0, N_C: 0, n_I: 0, n_C: 0, h_I: 0, h_C: 0 }), StatsError::EmptyPopulation);
        assert_eq!(compute_stratified_validity(&base, 0.0).unwrap_err(), StatsError::NonPositiveZ);
        let e = compute_stratified_validity(&StratifiedSample { N_C: 0, n_C: 0, h_C: 0, ..base }, DEFAULT_Z).unwrap();
        assert_eq!((e.p_hat, e.se), (1.0, 0.0));
    }
}

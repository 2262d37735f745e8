//! Long-range decay of critical P-mode propagation on a 2D grid.
//!
//! At `γ = 1` the transmitted mass from a source to the node `Δx` steps right
//! and `Δ − Δx` steps down is `C(Δ, Δx) α^Δx (1−α)^(Δ−Δx)`, which along the
//! leading direction decays like `1/√(2π α(1−α) Δ)`.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::paths::{binomial, ln_biguint};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Range(format!("alpha = {alpha} must lie strictly inside (0, 1)")));
    }
    Ok(())
}

/// `C(Δ, Δx) α^Δx (1−α)^(Δ−Δx)` evaluated in log space with an exact binomial.
pub fn t_full(alpha: f64, delta: u64, dx: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if dx > delta {
        return Ok(0.0);
    }
    let log = ln_biguint(&binomial(delta, dx)) + dx as f64 * alpha.ln() + (delta - dx) as f64 * (1.0 - alpha).ln();
    Ok(log.exp())
}

/// `1/√(2π α(1−α) Δ)`.
pub fn asymptote(alpha: f64, delta: u64) -> f64 {
    1.0 / (2.0 * PI * alpha * (1.0 - alpha) * delta as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub delta: u64,
    /// `round(αΔ)`.
    pub dx: u64,
    pub t_full: f64,
    /// Values at `floor(αΔ)` and `ceil(αΔ)`.
    pub bracket: (f64, f64),
    pub asymptote: f64,
    pub ratio: f64,
}

/// One row per `Δ ∈ 1..=delta_max` along the leading direction.
pub fn decay_profile(alpha: f64, delta_max: u64) -> Result<Vec<DecayRow>> {
    check_alpha(alpha)?;
    if delta_max < 1 {
        return Err(Error::Range("delta_max must be at least 1".into()));
    }
    (1..=delta_max)
        .map(|delta| {
            let center = alpha * delta as f64;
            let dx = center.round() as u64;
            let t = t_full(alpha, delta, dx)?;
            let bracket = (t_full(alpha, delta, center.floor() as u64)?, t_full(alpha, delta, center.ceil() as u64)?);
            let a = asymptote(alpha, delta);
            Ok(DecayRow { delta, dx, t_full: t, bracket, asymptote: a, ratio: t / a })
        })
        .collect()
}

/// CSV with header `delta,t_full_exact,asymptote,ratio`.
pub fn write_decay_csv(rows: &[DecayRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "delta,t_full_exact,asymptote,ratio")?;
    for r in rows {
        writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.delta, r.t_full, r.asymptote, r.ratio)?;
    }
    Ok(())
}

/// `Σ_{Δx} T_full(Δ, Δx)`, which is one by the binomial theorem.
pub fn anti_diagonal_mass(alpha: f64, delta: u64) -> Result<f64> {
    (0..=delta).map(|dx| t_full(alpha, delta, dx)).sum()
}

/// `Δx*/Δ` maximizing `T_full(Δ, Δx)`.
pub fn leading_direction(alpha: f64, delta: u64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut best = (0, f64::NEG_INFINITY);
    for dx in 0..=delta {
        let t = t_full(alpha, delta, dx)?;
        if t > best.1 {
            best = (dx, t);
        }
    }
    Ok(best.0 as f64 / delta.max(1) as f64)
}

use serde::Serialize;

use crate::error::{Error, Result};

/// Accuracy target for learning a `k`-component product mixture over `m` edges
/// and `n` nodes from pairwise correlations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleSizeSpec {
    pub epsilon: f64,
    pub delta: f64,
    pub m: u64,
    pub n: u64,
    pub k: u32,
}

impl SampleSizeSpec {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain("ε and δ must lie in (0, 1)"));
        }
        if self.m < 2 || self.n < 1 || self.k < 1 {
            return Err(Error::domain("need m ≥ 2 edges, n ≥ 1 nodes and k ≥ 1"));
        }
        Ok(())
    }

    /// `(ε'² / m²)^(k+1)` with `ε' = ε / (m n)`.
    pub fn matrix_epsilon(&self) -> f64 {
        let m = self.m as f64;
        let eps_prime = self.epsilon / (m * self.n as f64);
        (eps_prime * eps_prime / (m * m)).powi(self.k as i32 + 1)
    }

    /// `2δ / (m (m − 1))`.
    pub fn matrix_delta(&self) -> f64 {
        let m = self.m as f64;
        2.0 * self.delta / (m * (m - 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleSizeReport {
    pub matrix_epsilon: f64,
    pub matrix_delta: f64,
    pub samples: u64,
    /// `log10` of `(n⁴ m⁸ / ε⁴)^(k+1) · ln(m/δ)`, for scale only.
    pub complexity_log10: f64,
}

/// `ceil((2 + ε) / ε² · ln(2/δ))` for per-entry accuracy `ε` and failure `δ`.
pub fn samples_for_matrix(eps: f64, delta: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "ε_matrix = {eps} and δ_matrix = {delta} must lie in (0, 1)"
        )));
    }
    let bound = ((2.0 + eps) / (eps * eps) * (2.0 / delta).ln()).ceil();
    if !bound.is_finite() || bound > u64::MAX as f64 {
        return Err(Error::domain(format!(
            "sample bound for ε_matrix = {eps} exceeds u64"
        )));
    }
    Ok(bound as u64)
}

pub fn required_samples(spec: &SampleSizeSpec) -> Result<SampleSizeReport> {
    spec.validate()?;
    let (eps_m, delta_m) = (spec.matrix_epsilon(), spec.matrix_delta());
    let (m, n) = (spec.m as f64, spec.n as f64);
    let complexity_log10 = (spec.k as f64 + 1.0)
        * (4.0 * n.log10() + 8.0 * m.log10() - 4.0 * spec.epsilon.log10())
        + (m / spec.delta).ln().log10();
    Ok(SampleSizeReport {
        matrix_epsilon: eps_m,
        matrix_delta: delta_m,
        samples: samples_for_matrix(eps_m, delta_m)?,
        complexity_log10,
    })
}

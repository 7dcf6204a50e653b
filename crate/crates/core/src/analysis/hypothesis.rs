use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::cascade::Cascade;
use crate::error::{Error, Result};

/// Combined sample size up to which Mann–Whitney p-values are exact.
pub const EXACT_MWU_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub test: &'static str,
    /// Welch `t`, or `U` of the first group for Mann–Whitney.
    pub statistic: f64,
    /// Normal-approximation z-score (Mann–Whitney only).
    pub z: Option<f64>,
    /// Welch–Satterthwaite degrees of freedom (t-test only).
    pub df: Option<f64>,
    /// One-sided p-value for "first group larger".
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub exact: bool,
    /// Mann–Whitney input contained tied values across the pooled sample.
    pub ties: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// One-sided Welch t-test of `mean(a) > mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::domain("each group needs at least two observations"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::domain("observations must be finite"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Err(Error::UndefinedStatistic(
            "both groups have zero variance".into(),
        ));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist =
        StudentsT::new(0.0, 1.0, df).map_err(|e| Error::UndefinedStatistic(e.to_string()))?;
    Ok(TestResult {
        test: "welch_t",
        statistic: t,
        z: None,
        df: Some(df),
        p_value: dist.sf(t),
        n1: a.len(),
        n2: b.len(),
        exact: false,
        ties: false,
    })
}

/// Natural log of each cascade's mean inter-engagement delay. Cascades whose
/// engagements all share one timestamp are skipped (their log delay is `−∞`).
pub fn log_mean_delays(cascades: &[Cascade]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(cascades.len());
    for c in cascades {
        let d = c.mean_delay().ok_or_else(|| {
            Error::domain(format!("cascade {} has fewer than two engagements", c.id()))
        })?;
        if d > 0.0 {
            out.push(d.ln());
        }
    }
    Ok(out)
}

/// Welch test on log mean delays, H1: fake cascades are slower.
pub fn temporal_test(fake: &[Cascade], truth: &[Cascade]) -> Result<TestResult> {
    let f = log_mean_delays(fake)?;
    let t = log_mean_delays(truth)?;
    let skipped = fake.len() + truth.len() - f.len() - t.len();
    if skipped > 0 {
        log::warn!("temporal test skipped {skipped} cascade(s) with zero mean delay");
    }
    Ok(TestResult {
        test: "temporal",
        ..welch_t_test(&f, &t)?
    })
}

/// Midranks of the pooled sample, first group then second.
fn midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn u_statistic(ranks: &[f64], n1: usize) -> f64 {
    ranks[..n1].iter().sum::<f64>() - (n1 * (n1 + 1)) as f64 / 2.0
}

fn check_groups(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("both groups must be non-empty"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::domain("observations must not be NaN"));
    }
    Ok(())
}

/// `P(U ≥ u_obs)` by enumerating every split of the pooled midranks.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_groups(a, b)?;
    let n = a.len() + b.len();
    if n > 20 {
        return Err(Error::domain(
            "exact enumeration is limited to 20 observations",
        ));
    }
    let (ranks, ties) = midranks(a, b);
    let n1 = a.len();
    let u = u_statistic(&ranks, n1);
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        total += 1;
        // midranks are multiples of 0.5, so the comparison is exact up to rounding
        if rank_sum - offset >= u - 1e-9 {
            hits += 1;
        }
    }
    Ok(TestResult {
        test: "mann_whitney",
        statistic: u,
        z: None,
        df: None,
        p_value: hits as f64 / total as f64,
        n1,
        n2: b.len(),
        exact: true,
        ties: ties.iter().any(|&t| t > 1),
    })
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_groups(a, b)?;
    let (ranks, ties) = midranks(a, b);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let u = u_statistic(&ranks, a.len());
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let tied = ties.iter().any(|&t| t > 1);
    let (z, p) = if var <= 0.0 {
        // every observation equal: nothing to rank
        (0.0, 1.0)
    } else {
        let z = (u - n1 * n2 / 2.0 - 0.5) / var.sqrt();
        (z, Normal::standard().sf(z))
    };
    Ok(TestResult {
        test: "mann_whitney",
        statistic: u,
        z: Some(z),
        df: None,
        p_value: p,
        n1: a.len(),
        n2: b.len(),
        exact: false,
        ties: tied,
    })
}

/// One-sided Mann–Whitney U, H1: `a` stochastically larger. Exact when the
/// combined size is at most [`EXACT_MWU_LIMIT`]; the z-score is always reported.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let approx = mann_whitney_normal(a, b)?;
    if a.len() + b.len() <= EXACT_MWU_LIMIT {
        Ok(TestResult {
            z: approx.z,
            ..mann_whitney_exact(a, b)?
        })
    } else {
        Ok(approx)
    }
}

/// Mann–Whitney on connected-component proportions, H1: fake `r` larger.
pub fn structural_test(fake_r: &[f64], true_r: &[f64]) -> Result<TestResult> {
    Ok(TestResult {
        test: "structural",
        ..mann_whitney_u(fake_r, true_r)?
    })
}

/// Empirical CDF as `(value, F(value))` at each distinct value.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

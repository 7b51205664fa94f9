use crate::error::{Error, Result};

/// Truth magnitudes at or below this are excluded from MAPE.
pub const MAPE_EPS: f64 = 1e-9;

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Metrics(format!(
            "length mismatch: {} predictions, {} truths",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mape {
    /// Percent; `None` when every truth was excluded.
    pub value: Option<f64>,
    pub excluded: usize,
}

pub fn mape(pred: &[f64], truth: &[f64]) -> Result<Mape> {
    check_lengths(pred, truth)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if t.abs() > MAPE_EPS {
            sum += ((p - t) / t).abs();
            used += 1;
        }
    }
    Ok(Mape {
        value: (used > 0).then(|| 100.0 * sum / used as f64),
        excluded: truth.len() - used,
    })
}

/// `1 − SS_res / SS_tot`; `None` for fewer than two samples or constant truth.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    check_lengths(pred, truth)?;
    if truth.len() < 2 {
        return Ok(None);
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(None);
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(Some(1.0 - ss_res / ss_tot))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks; `None` below two samples or for
/// constant input.
pub fn spearman_rho(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    check_lengths(pred, truth)?;
    if pred.len() < 2 {
        return Ok(None);
    }
    Ok(pearson(&average_ranks(pred), &average_ranks(truth)))
}

/// Kendall τ-b; `None` below two samples or when either side is all tied.
pub fn kendall_tau(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    check_lengths(pred, truth)?;
    let n = pred.len();
    if n < 2 {
        return Ok(None);
    }
    let (mut concordant, mut discordant, mut tied_pred, mut tied_truth) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (pred[i] - pred[j])
                .partial_cmp(&0.0)
                .map(|o| o as i64)
                .unwrap_or(0);
            let b = (truth[i] - truth[j])
                .partial_cmp(&0.0)
                .map(|o| o as i64)
                .unwrap_or(0);
            if a == 0 {
                tied_pred += 1;
            }
            if b == 0 {
                tied_truth += 1;
            }
            match a * b {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - tied_pred) * (n0 - tied_truth)) as f64).sqrt();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((concordant - discordant) as f64 / denom))
}

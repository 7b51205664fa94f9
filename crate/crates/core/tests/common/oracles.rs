//! Brute-force metric definitions used as test oracles.

pub fn loop_mape(p: &[f64], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += ((p[i] - t[i]) / t[i]).abs();
    }
    100.0 * s / p.len() as f64
}

pub fn loop_r2(p: &[f64], t: &[f64]) -> f64 {
    let mut mean = 0.0;
    for v in t {
        mean += v;
    }
    mean /= t.len() as f64;
    let (mut res, mut tot) = (0.0, 0.0);
    for i in 0..t.len() {
        res += (t[i] - p[i]) * (t[i] - p[i]);
        tot += (t[i] - mean) * (t[i] - mean);
    }
    1.0 - res / tot
}

/// Average ranks by counting, without sorting.
pub fn counting_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&a| {
            let less = x.iter().filter(|&&b| b < a).count() as f64;
            let equal = x.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn definitional_spearman(p: &[f64], t: &[f64]) -> f64 {
    let (a, b) = (counting_ranks(p), counting_ranks(t));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// τ-b from ordered-pair enumeration and tie-group sizes.
pub fn pairwise_kendall(p: &[f64], t: &[f64]) -> f64 {
    let n = p.len();
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = (p[i] - p[j]) * (t[i] - t[j]);
            if s > 0.0 {
                c += 1;
            } else if s < 0.0 {
                d += 1;
            }
        }
    }
    let (c, d) = (c / 2, d / 2);
    let tie_pairs = |x: &[f64]| -> i64 {
        let mut seen: Vec<f64> = Vec::new();
        let mut total = 0;
        for &v in x {
            if !seen.contains(&v) {
                seen.push(v);
                let k = x.iter().filter(|&&w| w == v).count() as i64;
                total += k * (k - 1) / 2;
            }
        }
        total
    };
    let n0 = (n * (n - 1) / 2) as i64;
    (c - d) as f64 / (((n0 - tie_pairs(p)) * (n0 - tie_pairs(t))) as f64).sqrt()
}

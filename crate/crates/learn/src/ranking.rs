use std::cmp::Ordering;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{LearnError, Result};

/// Bin count per axis for the mutual-information estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiBins {
    /// `ceil(sqrt(n))`.
    #[default]
    SqrtRows,
    Fixed(usize),
}

impl MiBins {
    pub fn count(self, n: usize) -> usize {
        match self {
            MiBins::SqrtRows => ((n as f64).sqrt().ceil() as usize).max(1),
            MiBins::Fixed(b) => b.max(1),
        }
    }
}

/// Feature orders under three criteria plus their rank vote. Every list is
/// a permutation of the feature indices, best first.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureRanking {
    pub variance: Vec<usize>,
    pub p_value: Vec<usize>,
    pub mutual_information: Vec<usize>,
    /// Ascending by summed rank.
    pub global: Vec<usize>,
    /// Summed 1-based rank of each feature, by feature index.
    pub scores: Vec<usize>,
}

/// 1-based rank of every feature in an order list.
pub fn ranks_of(order: &[usize]) -> Vec<usize> {
    let mut ranks = vec![0; order.len()];
    for (pos, &f) in order.iter().enumerate() {
        ranks[f] = pos + 1;
    }
    ranks
}

/// Orders features by the per-method ranks summed, ties to the lower index.
pub fn vote(orders: &[&[usize]]) -> (Vec<usize>, Vec<usize>) {
    let d = orders.first().map_or(0, |o| o.len());
    let mut scores = vec![0; d];
    for order in orders {
        for (f, r) in ranks_of(order).into_iter().enumerate() {
            scores[f] += r;
        }
    }
    let mut global: Vec<usize> = (0..d).collect();
    global.sort_by_key(|&f| (scores[f], f));
    (global, scores)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Pearson correlation, 0 when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Two-sided p-value of the Pearson correlation `r` over `n` rows under
/// the t distribution with `n - 2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = n as f64 - 2.0;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("n >= 3 gives positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn bin_index(v: &[f64], bins: usize) -> Vec<usize> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0; v.len()];
    }
    v.iter()
        .map(|&x| (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1))
        .collect()
}

/// Plug-in mutual information (nats) of two columns over equal-width bins.
pub fn mutual_information(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let n = a.len() as f64;
    let (ia, ib) = (bin_index(a, bins), bin_index(b, bins));
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&i, &j) in ia.iter().zip(&ib) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (pxy / ((pa[i] as f64 / n) * (pb[j] as f64 / n))).ln();
            }
        }
    }
    mi.max(0.0)
}

fn order_by(d: usize, cmp: impl Fn(usize, usize) -> Ordering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| cmp(a, b).then(a.cmp(&b)));
    order
}

pub fn rank_features(x: &[Vec<f64>], y: &[f64], bins: MiBins) -> Result<FeatureRanking> {
    let n = x.len();
    if n < 3 {
        return Err(LearnError::TooFewRows { needed: 3, got: n });
    }
    let d = x[0].len();
    crate::dataset::check_width(x, d)?;
    let columns: Vec<Vec<f64>> = (0..d).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let var: Vec<f64> = columns.iter().map(|c| sample_variance(c)).collect();
    let r: Vec<f64> = columns.iter().map(|c| pearson(c, y)).collect();
    let p: Vec<f64> = r.iter().map(|&r| correlation_p_value(r, n)).collect();
    let b = bins.count(n);
    let mi: Vec<f64> = columns
        .iter()
        .map(|c| mutual_information(c, y, b))
        .collect();

    let variance = order_by(d, |a, b| var[b].total_cmp(&var[a]));
    // p underflows to 0 for strong correlations; |r| orders those
    let p_value = order_by(d, |a, b| {
        p[a].total_cmp(&p[b])
            .then(r[b].abs().total_cmp(&r[a].abs()))
    });
    let mutual_information = order_by(d, |a, b| mi[b].total_cmp(&mi[a]));
    let (global, scores) = vote(&[&variance, &p_value, &mutual_information]);
    Ok(FeatureRanking {
        variance,
        p_value,
        mutual_information,
        global,
        scores,
    })
}

use serde::{Deserialize, Serialize};

/// Linearly interpolated quantile of sorted data (`q` in [0, 1]).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Five-number summary plus the mean, as drawn in a box plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    /// One-sided p-value for "first sample tends to be smaller".
    pub p_less: f64,
    pub exact: bool,
}

/// Pooled sample size up to which the permutation distribution is enumerated.
const EXACT_LIMIT: usize = 120;

/// Wilcoxon rank-sum / Mann-Whitney U test of `x` against `y`.
///
/// Ties get mid-ranks. Up to [`EXACT_LIMIT`] pooled observations the p-value is
/// the exact permutation probability `P(U <= u_obs)`, counted by dynamic
/// programming over subset rank sums; beyond that a tie-corrected normal
/// approximation with continuity correction is used.
pub fn rank_sum_test(x: &[f64], y: &[f64]) -> RankSumResult {
    assert!(!x.is_empty() && !y.is_empty(), "rank-sum test needs two non-empty samples");
    let (nx, ny) = (x.len(), y.len());
    let n = nx + ny;
    let mut pooled: Vec<(f64, bool)> = x.iter().map(|&v| (v, true)).chain(y.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // doubled mid-ranks keep everything integral
    let mut ranks2 = vec![0usize; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let r2 = (i + 1) + (j + 1);
        ranks2[i..=j].iter_mut().for_each(|r| *r = r2);
        i = j + 1;
    }
    let obs2: usize = ranks2.iter().zip(&pooled).filter(|(_, p)| p.1).map(|(r, _)| r).sum();
    let u = obs2 as f64 / 2.0 - (nx * (nx + 1)) as f64 / 2.0;

    if n <= EXACT_LIMIT {
        let max_sum: usize = ranks2.iter().sum();
        // ways[k][s]: subsets of size k with doubled rank sum s
        let mut ways = vec![vec![0.0f64; max_sum + 1]; nx + 1];
        ways[0][0] = 1.0;
        for &r in &ranks2 {
            for k in (1..=nx).rev() {
                let (lo, hi) = ways.split_at_mut(k);
                let prev = &lo[k - 1];
                for s in (r..=max_sum).rev() {
                    if prev[s - r] != 0.0 {
                        hi[0][s] += prev[s - r];
                    }
                }
            }
        }
        let total: f64 = ways[nx].iter().sum();
        let below: f64 = ways[nx][..=obs2].iter().sum();
        return RankSumResult {
            u,
            p_less: (below / total).min(1.0),
            exact: true,
        };
    }

    let (nxf, nyf, nf) = (nx as f64, ny as f64, n as f64);
    let mean_u = nxf * nyf / 2.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var_u = nxf * nyf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p_less = if var_u <= 0.0 {
        1.0
    } else {
        let z = (u - mean_u + 0.5) / var_u.sqrt();
        normal_cdf(z)
    };
    RankSumResult {
        u,
        p_less,
        exact: false,
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, relative error < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

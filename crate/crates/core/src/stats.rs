//! Small statistical helpers: goodness of fit, binomial confidence bounds
//! and plug-in mutual information.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Pearson goodness of fit of `observed` counts against `expected`
/// probabilities. Categories with zero expected probability must have zero
/// counts; they are dropped from the statistic.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let norm: f64 = expected.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        let e = total as f64 * p / norm;
        if e == 0.0 {
            if o > 0 {
                return ChiSquareTest {
                    statistic: f64::INFINITY,
                    degrees_of_freedom: 1,
                    p_value: 0.0,
                };
            }
            continue;
        }
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let df = cells.saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        degrees_of_freedom: df,
        p_value,
    }
}

/// Standard normal quantile for a one-sided test at level `alpha`.
pub fn one_sided_z(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha)
}

/// Wilson score interval for `successes` out of `trials`, one-sided level
/// `alpha` on each end.
pub fn wilson_interval(successes: u64, trials: u64, alpha: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = one_sided_z(alpha);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Plug-in estimate of I(X;Y) in bits from paired samples.
pub fn mutual_information<X, Y>(samples: &[(X, Y)]) -> f64
where
    X: Eq + Hash + Clone,
    Y: Eq + Hash + Clone,
{
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mut joint: HashMap<(X, Y), u64> = HashMap::new();
    let mut px: HashMap<X, u64> = HashMap::new();
    let mut py: HashMap<Y, u64> = HashMap::new();
    for (x, y) in samples {
        *joint.entry((x.clone(), y.clone())).or_default() += 1;
        *px.entry(x.clone()).or_default() += 1;
        *py.entry(y.clone()).or_default() += 1;
    }
    let mi: f64 = joint
        .iter()
        .map(|((x, y), &c)| {
            let pxy = c as f64 / n;
            let prod = (px[x] as f64 / n) * (py[y] as f64 / n);
            pxy * (pxy / prod).log2()
        })
        .sum();
    mi.max(0.0)
}

//! Goodness-of-fit statistics and small estimators used by the experiments.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> Result<(f64, f64)> {
    let m = mean(xs)?;
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Ok((m, f64::INFINITY));
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    Ok((m, (var / n).sqrt()))
}

/// Standard error of a binomial proportion.
pub fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF,
/// including left limits of the empirical CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let xs = sorted(sample);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut k = i;
        while k < xs.len() && xs[k] == x {
            k += 1;
        }
        let f = cdf(x);
        d = d
            .max((i as f64 / n - f).abs())
            .max((k as f64 / n - f).abs());
        i = k;
    }
    Ok(d)
}

/// Weighted KS distance evaluated on the support of the sample.
///
/// The empirical CDF is compared with `cdf` at every distinct sample value.
/// This is the right comparison for lattice-valued data (multiples of `h/2`)
/// against a law with a density: left limits at lattice points would only
/// measure the lattice spacing. `cdf` must include any atom at the point.
pub fn ks_on_support(sample: &[f64], weights: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.len() != weights.len() {
        return Err(Error::param("sample and weights differ in length"));
    }
    let mut pairs: Vec<(f64, f64)> = sample
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::param("weights must have positive total"));
    }
    let mut acc = 0.0;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < pairs.len() {
        let x = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == x {
            acc += pairs[i].1;
            i += 1;
        }
        d = d.max((acc / total - cdf(x)).abs());
    }
    Ok(d)
}

/// Unweighted version of [`ks_on_support`].
pub fn ks_lattice(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    ks_on_support(sample, &vec![1.0; sample.len()], cdf)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let xa = sorted(a);
    let xb = sorted(b);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Half-width `ε` with `P(sup |F_n − F| > ε) ≤ alpha` by the
/// Dvoretzky-Kiefer-Wolfowitz inequality.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Two-sided tail mass beyond three standard deviations.
pub const THREE_SIGMA_ALPHA: f64 = 0.0027;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson χ² of observed counts against category probabilities.
///
/// Categories with expected count below 5 are pooled with their right
/// neighbour (the last with its left) before the statistic is formed.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.is_empty() || observed.len() != probs.len() {
        return Err(Error::param("observed counts and probabilities must align"));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let total_p: f64 = probs.iter().sum();
    if (total_p - 1.0).abs() > 1e-6 {
        return Err(Error::param(format!("probabilities sum to {total_p}")));
    }
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        pending.0 += o as f64;
        pending.1 += p * nf;
        if pending.1 >= 5.0 {
            cells.push(pending);
            pending = (0.0, 0.0);
        }
    }
    if pending.1 > 0.0 || pending.0 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => cells.push(pending),
        }
    }
    if cells.len() < 2 {
        return Err(Error::param("fewer than two usable χ² cells"));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// Fisher dispersion index `Σ (c − m)²/m / n` of counts against their
/// predicted Poisson means. Entries with non-positive mean are skipped.
pub fn poisson_dispersion(counts: &[u64], means: &[f64]) -> Result<f64> {
    if counts.len() != means.len() {
        return Err(Error::param("counts and means must align"));
    }
    let (sum, n) = counts.iter().zip(means).filter(|(_, &m)| m > 0.0).fold(
        (0.0, 0usize),
        |(s, n), (&c, &m)| {
            let d = c as f64 - m;
            (s + d * d / m, n + 1)
        },
    );
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bootstrap {
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Nonparametric bootstrap of `statistic`; the interval is `estimate ± 3·se`.
pub fn bootstrap_ci<R, F>(
    sample: &[f64],
    statistic: F,
    resamples: usize,
    rng: &mut R,
) -> Result<Bootstrap>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if resamples < 2 {
        return Err(Error::param("bootstrap needs at least two resamples"));
    }
    let estimate = statistic(sample);
    let n = sample.len();
    let mut buf = vec![0.0; n];
    let reps: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = sample[rng.random_range(0..n)];
            }
            statistic(&buf)
        })
        .collect();
    let (_, se) = mean_se(&reps)?;
    let std_error = se * (resamples as f64).sqrt();
    Ok(Bootstrap {
        estimate,
        std_error,
        lower: estimate - 3.0 * std_error,
        upper: estimate + 3.0 * std_error,
    })
}

/// Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    weighted_correlation(xs, ys, &vec![1.0; xs.len()])
}

/// Weighted Pearson correlation.
pub fn weighted_correlation(xs: &[f64], ys: &[f64], ws: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() != ws.len() {
        return Err(Error::param("correlation inputs must align"));
    }
    if xs.len() < 2 {
        return Err(Error::EmptySample);
    }
    let w: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / w;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / w;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxy += w * (x - mx) * (y - my);
        sxx += w * (x - mx) * (x - mx);
        syy += w * (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Kish effective sample size `(Σw)²/Σw²`.
pub fn effective_sample_size(ws: &[f64]) -> f64 {
    let s: f64 = ws.iter().sum();
    let s2: f64 = ws.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Median (average of the middle pair for even sizes).
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = sorted(xs);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Equal-count bins: returns the indices of `keys` grouped by quantile.
pub fn quantile_bins(keys: &[f64], bins: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    let bins = bins.max(1);
    let n = order.len();
    (0..bins)
        .map(|b| order[b * n / bins..(b + 1) * n / bins].to_vec())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, Exp, Geometric, Poisson};

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(ks_distance(&[], |x| x), Err(Error::EmptySample)));
        assert!(matches!(
            ks_two_sample(&[], &[1.0]),
            Err(Error::EmptySample)
        ));
        assert!(matches!(mean(&[]), Err(Error::EmptySample)));
        assert!(chi_square(&[], &[]).is_err());
    }

    #[test]
    fn ks_of_sample_against_own_ecdf_is_zero() {
        let xs = [0.3, 0.1, 0.7, 0.1, 0.9];
        let sorted = sorted(&xs);
        let ecdf = |x: f64| sorted.iter().filter(|&&y| y <= x).count() as f64 / 5.0;
        assert_eq!(ks_lattice(&xs, ecdf).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&xs, &xs).unwrap(), 0.0);
    }

    #[test]
    fn ks_detects_uniform_sample() {
        let mut rng = stream(3, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1.63 / (20_000f64).sqrt());
        let shifted = ks_distance(&xs, |x| (x * 0.8).clamp(0.0, 1.0)).unwrap();
        assert!(shifted > 0.15);
    }

    #[test]
    fn chi_square_on_synthetic_geometric_data() {
        // The statistic of exact-law data is χ²-distributed: its p-values
        // should look uniform across repetitions.
        let p = 0.25;
        let geo = Geometric::new(p).unwrap();
        let mut pvals = Vec::new();
        for rep in 0..200 {
            let mut rng = stream(17, rep);
            let mut counts = vec![0u64; 13];
            for _ in 0..2_000 {
                let k = geo.sample(&mut rng) as usize; // failures before success
                counts[k.min(12)] += 1;
            }
            let mut probs: Vec<f64> = (0..12).map(|k| (1.0 - p).powi(k) * p).collect();
            probs.push((1.0 - p).powi(12));
            pvals.push(chi_square(&counts, &probs).unwrap().p_value);
        }
        let d = ks_distance(&pvals, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1.63 / (200f64).sqrt(), "p-values not uniform: {d}");
    }

    #[test]
    fn dispersion_of_poisson_counts_is_one() {
        let mut rng = stream(19, 0);
        let pois = Poisson::new(5.0).unwrap();
        let counts: Vec<u64> = (0..50_000).map(|_| pois.sample(&mut rng) as u64).collect();
        let d = poisson_dispersion(&counts, &vec![5.0; counts.len()]).unwrap();
        // Var of the index is about 2/n.
        assert!((d - 1.0).abs() < 4.0 * (2.0 / 50_000f64).sqrt(), "{d}");
    }

    #[test]
    fn bootstrap_se_matches_analytic() {
        let mut rng = stream(23, 0);
        let e = Exp::new(1.0).unwrap();
        let xs: Vec<f64> = (0..5_000).map(|_| e.sample(&mut rng)).collect();
        let b = bootstrap_ci(&xs, |s| mean(s).unwrap(), 400, &mut rng).unwrap();
        let analytic = 1.0 / (5_000f64).sqrt();
        assert!((b.std_error / analytic - 1.0).abs() < 0.15, "{b:?}");
        assert!(b.lower < 1.0 && 1.0 < b.upper);
    }

    #[test]
    fn chi_square_pools_small_cells() {
        let c = chi_square(&[50, 48, 1, 1], &[0.5, 0.48, 0.01, 0.01]).unwrap();
        assert_eq!(c.dof, 1);
    }

    #[test]
    fn correlation_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((correlation(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y = [4.0, 3.0, 2.0, 1.0];
        assert!((correlation(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(effective_sample_size(&[1.0, 1.0, 1.0]), 3.0);
    }

    #[test]
    fn quantile_bins_partition() {
        let keys: Vec<f64> = (0..10).rev().map(f64::from).collect();
        let bins = quantile_bins(&keys, 3);
        assert_eq!(bins.iter().map(Vec::len).sum::<usize>(), 10);
        assert!(bins[0].iter().all(|&i| keys[i] <= 2.0));
    }
}

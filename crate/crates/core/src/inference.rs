//! Split-sample bootstrap test for candidate modes.
//!
//! The first half of the sample locates candidate modes with mean-shift;
//! the second half is resampled with replacement to build percentile
//! intervals for the curvature statistic at each candidate. A candidate is
//! significant when its whole interval, at simultaneous level `1 − α/r`,
//! lies below zero.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{quantile_sorted, BandwidthRule, BandwidthSpec, DensityModel, LambdaPair, Normalization};
use crate::engine::{cluster, MeanShiftConfig, ModeSet};
use crate::error::{Error, Result};
use crate::function_space::{Curve, DistanceSpec, FunctionalSample};
use crate::kernels::KernelPair;
use crate::scalar::Scalar;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Exact supremum of the second differential over unit directions.
    #[default]
    LambdaEigen,
    /// Closed-form statistic evaluated term by term.
    LambdaPaper,
}

impl Statistic {
    fn pick(self, l: &LambdaPair) -> Option<f64> {
        match self {
            Statistic::LambdaEigen => Some(l.eigen),
            Statistic::LambdaPaper => l.paper,
        }
    }

    fn other(self) -> Self {
        match self {
            Statistic::LambdaEigen => Statistic::LambdaPaper,
            Statistic::LambdaPaper => Statistic::LambdaEigen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    FirstHalf,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Percentile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub n_boot: usize,
    pub statistic: Statistic,
    pub split: SplitRule,
    pub ci_method: CiMethod,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_boot: 1000,
            statistic: Statistic::LambdaEigen,
            split: SplitRule::FirstHalf,
            ci_method: CiMethod::Percentile,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_boot < 100 {
            return Err(Error::InvalidConfig(format!(
                "at least 100 bootstrap replicates are required, got {}",
                self.n_boot
            )));
        }
        Ok(())
    }
}

/// Summary of one set of bootstrap replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub count: usize,
    pub undefined: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl ReplicateSummary {
    fn from_values(values: &[Option<f64>]) -> Self {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let n = defined.len();
        let mean = if n > 0 { defined.iter().sum::<f64>() / n as f64 } else { f64::NAN };
        let sd = if n > 1 {
            (defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            count: n,
            undefined: values.len() - n,
            mean,
            sd,
            min: defined.iter().copied().fold(f64::INFINITY, f64::min),
            max: defined.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Test outcome for one candidate mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTest {
    pub mode: usize,
    pub cluster_size: usize,
    pub atomic: bool,
    /// Both statistics on the whole second subsample.
    pub observed: LambdaPair,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub significant: bool,
    /// Replicates of the selected statistic, in replicate order.
    pub replicates: Vec<f64>,
    pub summary: ReplicateSummary,
    /// The statistic that was not selected, for comparison.
    pub other_summary: ReplicateSummary,
}

#[derive(Debug, Clone)]
pub struct ModeTestReport<T> {
    pub config: TestConfig,
    pub seed: u64,
    /// Indices of the original sample in each half.
    pub first_half: Vec<usize>,
    pub second_half: Vec<usize>,
    /// Bandwidth rule resolved on the first half.
    pub bandwidth: BandwidthRule<T>,
    pub candidates: ModeSet<T>,
    pub level: f64,
    pub tests: Vec<ModeTest>,
    /// Resamples redrawn because the statistic was undefined.
    pub redraws: usize,
}

impl<T: Scalar> ModeTestReport<T> {
    /// Indices of the significant candidates.
    pub fn significant_modes(&self) -> Vec<usize> {
        self.tests.iter().filter(|t| t.significant).map(|t| t.mode).collect()
    }

    /// Significant set at another `alpha`, reusing the stored replicates.
    pub fn significant_at(&self, alpha: f64) -> Result<Vec<usize>> {
        let r = self.tests.len().max(1) as f64;
        let level = 1.0 - alpha / r;
        let mut out = Vec::new();
        for t in &self.tests {
            let (_, hi) = bootstrap_ci(&t.replicates, level)?;
            if hi < 0.0 {
                out.push(t.mode);
            }
        }
        Ok(out)
    }
}

/// Percentile interval `[q_{(1−level)/2}, q_{1−(1−level)/2}]` with
/// linear-interpolation quantiles.
pub fn bootstrap_ci(replicates: &[f64], level: f64) -> Result<(f64, f64)> {
    if replicates.is_empty() {
        return Err(Error::InvalidConfig("no bootstrap replicates".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {level}")));
    }
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail)))
}

/// Splits `0..n` into the two halves; the first gets the extra index when `n` is odd.
pub fn split_indices(n: usize, rule: SplitRule) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    if let SplitRule::Random { seed } = rule {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let n1 = n.div_ceil(2);
    let second = idx.split_off(n1);
    (idx, second)
}

/// Observed and resampled statistics at fixed candidate locations.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    /// Both statistics on the whole second subsample, per candidate.
    pub observed: Vec<LambdaPair>,
    /// Per replicate, both statistics per candidate.
    pub replicates: Vec<Vec<LambdaPair>>,
    pub redraws: usize,
}

/// Resamples `sub2` with replacement `t_cfg.n_boot` times and evaluates
/// both statistics at every candidate. Only `sub2` enters the computation.
/// Replicate `b` draws from its own generator seeded by the `b`-th output
/// of a root generator, so results do not depend on thread scheduling.
pub fn stage_two<T: Scalar>(
    modes: &[Curve<T>],
    sub2: &FunctionalSample<T>,
    pair: &KernelPair,
    distance: &DistanceSpec<T>,
    rule: &BandwidthRule<T>,
    t_cfg: &TestConfig,
    seed: u64,
) -> Result<Bootstrap> {
    let model2 = DensityModel::new(sub2.clone(), pair.clone(), *distance, rule.clone())?;
    let observed: Vec<LambdaPair> = modes.iter().map(|m| model2.lambdas(m)).collect::<Result<_>>()?;

    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..t_cfg.n_boot).map(|_| root.next_u64()).collect();
    let n2 = sub2.len();
    let stat = t_cfg.statistic;
    let runs: Vec<(Vec<LambdaPair>, usize)> = seeds
        .par_iter()
        .map(|&s| -> Result<(Vec<LambdaPair>, usize)> {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            for attempt in 0..MAX_REDRAWS {
                let idx: Vec<usize> = (0..n2).map(|_| rng.random_range(0..n2)).collect();
                let m = DensityModel::new(sub2.select(&idx)?, pair.clone(), *distance, rule.select(&idx))?;
                match modes.iter().map(|x| m.lambdas(x)).collect::<Result<Vec<_>>>() {
                    Ok(v) if v.iter().all(|l| stat.pick(l).is_some()) => return Ok((v, attempt)),
                    Ok(_) | Err(Error::NormalizerZero { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::InvalidConfig(format!(
                "statistic stayed undefined after {MAX_REDRAWS} resamples"
            )))
        })
        .collect::<Result<_>>()?;
    Ok(Bootstrap {
        observed,
        redraws: runs.iter().map(|r| r.1).sum(),
        replicates: runs.into_iter().map(|r| r.0).collect(),
    })
}

/// Runs the two-stage mode test.
#[allow(clippy::too_many_arguments)]
pub fn test_modes<T: Scalar>(
    sample: &FunctionalSample<T>,
    pair: &KernelPair,
    distance: &DistanceSpec<T>,
    bandwidth: &BandwidthSpec<T>,
    ms_cfg: &MeanShiftConfig<T>,
    t_cfg: &TestConfig,
    seed: u64,
) -> Result<ModeTestReport<T>> {
    t_cfg.validate()?;
    if sample.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "the mode test needs at least 4 curves, got {}",
            sample.len()
        )));
    }
    let (first, second) = split_indices(sample.len(), t_cfg.split);

    // Stage 1: candidates and bandwidth from the first half only
    let sub1 = sample.select(&first)?;
    let rule1 = bandwidth.select(&first).resolve(&sub1, distance)?;
    let model1 = DensityModel::new(sub1, pair.clone(), *distance, rule1.clone())?
        .with_normalization(Normalization::Numerator);
    let candidates = cluster(&model1, ms_cfg, None)?;
    let r = candidates.len();
    let level = 1.0 - t_cfg.alpha / r.max(1) as f64;

    let mut report = ModeTestReport {
        config: t_cfg.clone(),
        seed,
        first_half: first,
        second_half: second.clone(),
        bandwidth: rule1.clone(),
        candidates,
        level,
        tests: Vec::new(),
        redraws: 0,
    };
    if r == 0 {
        return Ok(report);
    }

    // Stage 2: statistics from the second half only
    let sub2 = sample.select(&second)?;
    let rule2 = match bandwidth {
        BandwidthSpec::PerDatum(hs) => BandwidthRule::PerDatum(second.iter().map(|&i| hs[i]).collect()),
        _ => rule1,
    };
    let boot = stage_two(&report.candidates.modes, &sub2, pair, distance, &rule2, t_cfg, seed)?;
    let stat = t_cfg.statistic;
    report.redraws = boot.redraws;

    for (j, obs) in boot.observed.into_iter().enumerate() {
        let chosen: Vec<Option<f64>> = boot.replicates.iter().map(|r| stat.pick(&r[j])).collect();
        let other: Vec<Option<f64>> = boot.replicates.iter().map(|r| stat.other().pick(&r[j])).collect();
        let values: Vec<f64> = chosen.iter().flatten().copied().collect();
        let (lo, hi) = bootstrap_ci(&values, level)?;
        report.tests.push(ModeTest {
            mode: j,
            cluster_size: report.candidates.sizes[j],
            atomic: report.candidates.atomic_flags[j],
            observed: obs,
            ci_lo: lo,
            ci_hi: hi,
            significant: hi < 0.0,
            summary: ReplicateSummary::from_values(&chosen),
            other_summary: ReplicateSummary::from_values(&other),
            replicates: values,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ci_of_constant_replicates() {
        let v = vec![2.5; 50];
        assert_eq!(bootstrap_ci(&v, 0.9).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn ci_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let (lo, hi) = bootstrap_ci(&v, 0.90).unwrap();
        assert_abs_diff_eq!(lo, 5.95, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 95.05, epsilon = 1e-12);
    }

    #[test]
    fn wider_level_nests() {
        let v: Vec<f64> = (0..337).map(|i| ((i * 7919) % 337) as f64 * 0.3 - 20.0).collect();
        let (a, b) = bootstrap_ci(&v, 0.90).unwrap();
        let (c, d) = bootstrap_ci(&v, 0.99).unwrap();
        assert!(c <= a && b <= d);
    }

    #[test]
    fn ci_rejects_bad_input() {
        assert!(bootstrap_ci(&[], 0.9).is_err());
        assert!(bootstrap_ci(&[1.0], 1.0).is_err());
    }

    #[test]
    fn odd_split_favours_first_half() {
        let (a, b) = split_indices(7, SplitRule::FirstHalf);
        assert_eq!(a, vec![0, 1, 2, 3]);
        assert_eq!(b, vec![4, 5, 6]);
        let (a, b) = split_indices(10, SplitRule::Random { seed: 3 });
        assert_eq!(a.len(), 5);
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn config_validation() {
        let mut c = TestConfig::default();
        c.n_boot = 99;
        assert!(c.validate().is_err());
        let c = TestConfig {
            alpha: 1.0,
            ..TestConfig::default()
        };
        assert!(c.validate().is_err());
    }
}

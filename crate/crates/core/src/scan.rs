//! Bandwidth stability scan: sweep `h` over a fraction range of the largest
//! pairwise distance, count non-atomic clusters at each value and keep the
//! midpoints of the runs where that count holds still.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{BandwidthRule, DensityModel};
use crate::engine::{cluster, MeanShiftConfig};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub n_values: usize,
    pub lo_frac: f64,
    pub hi_frac: f64,
    pub min_plateau_len: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            n_values: 100,
            lo_frac: 0.05,
            hi_frac: 0.50,
            min_plateau_len: 5,
        }
    }
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo_frac > 0.0 && self.lo_frac < self.hi_frac && self.hi_frac <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < lo < hi ≤ 1, got lo = {}, hi = {}",
                self.lo_frac, self.hi_frac
            )));
        }
        if self.n_values < 2 {
            return Err(Error::InvalidConfig("n_values must be at least 2".into()));
        }
        if self.min_plateau_len < 2 {
            return Err(Error::InvalidConfig("min_plateau_len must be at least 2".into()));
        }
        Ok(())
    }

    /// Fractions of the largest distance, equally spaced and inclusive.
    pub fn fractions(&self) -> Vec<f64> {
        let step = (self.hi_frac - self.lo_frac) / (self.n_values - 1) as f64;
        (0..self.n_values)
            .map(|i| {
                if i + 1 == self.n_values {
                    self.hi_frac
                } else {
                    self.lo_frac + step * i as f64
                }
            })
            .collect()
    }
}

/// A maximal run of equal non-atomic counts, inclusive index range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plateau {
    pub start: usize,
    pub end: usize,
    pub count: usize,
}

impl Plateau {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub max_distance: f64,
    pub bandwidths: Vec<f64>,
    pub nonatomic_counts: Vec<usize>,
    pub clustered_counts: Vec<usize>,
    pub mode_counts: Vec<usize>,
    pub plateaus: Vec<Plateau>,
    /// Bandwidth midpoints of the plateaus, in increasing order.
    pub candidates: Vec<f64>,
}

impl ScanResult {
    /// Plateaus whose count equals `count`.
    pub fn plateaus_with(&self, count: usize) -> impl Iterator<Item = (&Plateau, f64)> {
        self.plateaus
            .iter()
            .zip(&self.candidates)
            .filter(move |(p, _)| p.count == count)
            .map(|(p, &c)| (p, c))
    }
}

/// Maximal runs of at least `min_len` equal values. Runs of zero clusters
/// carry no bandwidth information and are skipped.
pub fn find_plateaus(counts: &[usize], min_len: usize) -> Vec<Plateau> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=counts.len() {
        if i == counts.len() || counts[i] != counts[start] {
            let p = Plateau {
                start,
                end: i - 1,
                count: counts[start],
            };
            if p.len() >= min_len && p.count > 0 {
                out.push(p);
            }
            start = i;
        }
    }
    out
}

/// Runs `cluster` at every bandwidth of the sweep. `template` provides
/// the sample, kernel, distance and normalization; its bandwidth is ignored.
pub fn scan<T: Scalar>(
    template: &DensityModel<T>,
    spec: &ScanSpec,
    cfg: &MeanShiftConfig<T>,
) -> Result<ScanResult> {
    spec.validate()?;
    if template.len() < 2 {
        return Err(Error::InvalidConfig("a bandwidth scan needs at least two curves".into()));
    }
    let max_d = template.max_pairwise();
    if !(max_d > T::zero()) {
        return Err(Error::InvalidConfig(
            "all curves coincide; there is no distance scale to sweep".into(),
        ));
    }
    let fracs = spec.fractions();
    let bandwidths: Vec<T> = fracs.iter().map(|&f| T::lit(f) * max_d).collect();
    // one tolerance for the whole sweep so runs are comparable
    let mut cfg = cfg.clone();
    cfg.step_tolerance = Some(cfg.tolerance_for(template));
    let rows = bandwidths
        .par_iter()
        .map(|&h| -> Result<(usize, usize, usize)> {
            let model = template.with_bandwidth(BandwidthRule::Fixed(h))?;
            let ms = cluster(&model, &cfg, None)?;
            Ok((ms.nonatomic_count(), ms.nonatomic_members(), ms.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let nonatomic_counts: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let plateaus = find_plateaus(&nonatomic_counts, spec.min_plateau_len);
    let candidates = plateaus
        .iter()
        .map(|p| ((bandwidths[p.start] + bandwidths[p.end]) / from_usize(2)).as_f64())
        .collect();
    Ok(ScanResult {
        max_distance: max_d.as_f64(),
        bandwidths: bandwidths.iter().map(|h| h.as_f64()).collect(),
        nonatomic_counts,
        clustered_counts: rows.iter().map(|r| r.1).collect(),
        mode_counts: rows.iter().map(|r| r.2).collect(),
        plateaus,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_mirrors_five_to_fifty_percent() {
        let s = ScanSpec::default();
        let f = s.fractions();
        assert_eq!(f.len(), 100);
        assert_eq!(f[0], 0.05);
        assert_eq!(f[99], 0.50);
        let step = f[1] - f[0];
        assert!(f.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-12));
    }

    #[test]
    fn plateau_detection() {
        let counts = [0, 0, 0, 0, 0, 3, 3, 3, 2, 2, 2, 2, 2, 1, 1, 1, 1, 1, 1];
        let p = find_plateaus(&counts, 5);
        assert_eq!(
            p,
            vec![
                Plateau { start: 8, end: 12, count: 2 },
                Plateau { start: 13, end: 18, count: 1 }
            ]
        );
        assert_eq!(find_plateaus(&counts, 3).len(), 3);
    }

    #[test]
    fn spec_validation() {
        let mut s = ScanSpec::default();
        s.lo_frac = 0.6;
        assert!(s.validate().is_err());
        let s = ScanSpec {
            min_plateau_len: 1,
            ..ScanSpec::default()
        };
        assert!(s.validate().is_err());
    }
}

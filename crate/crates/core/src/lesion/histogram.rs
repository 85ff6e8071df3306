use alloc::vec;
use alloc::vec::Vec;

use super::mi::region_samples;
use crate::error::{bail, Result};
use crate::volume::{check_region, LabelMask, Volume};

/// Piecewise-linear CDF with knots at histogram bin edges.
#[derive(Debug, Clone, PartialEq)]
struct EdgeCdf {
    lo: f64,
    width: f64,
    /// `cdf[j]` = fraction of samples below edge `j`; `cdf[bins] = 1`.
    cdf: Vec<f64>,
}

impl EdgeCdf {
    fn new(samples: &[f64], bins: usize) -> Self {
        let (lo, hi) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in samples {
            let j = if width > 0.0 {
                ((v - lo) / width) as usize
            } else {
                0
            };
            counts[j.min(bins - 1)] += 1;
        }
        let n = samples.len() as f64;
        let mut cdf = Vec::with_capacity(bins + 1);
        let mut acc = 0u64;
        cdf.push(0.0);
        for c in counts {
            acc += c;
            cdf.push(acc as f64 / n);
        }
        Self { lo, width, cdf }
    }

    fn bins(&self) -> usize {
        self.cdf.len() - 1
    }

    fn edge(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.width
    }

    fn eval(&self, v: f64) -> f64 {
        if self.width == 0.0 {
            return if v < self.lo { 0.0 } else { 1.0 };
        }
        let s = (v - self.lo) / self.width;
        if s <= 0.0 {
            return 0.0;
        }
        let j = s as usize;
        if j >= self.bins() {
            return 1.0;
        }
        let f = s - j as f64;
        self.cdf[j] + f * (self.cdf[j + 1] - self.cdf[j])
    }

    /// Smallest value whose CDF reaches `u`.
    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 || self.width == 0.0 {
            return self.lo;
        }
        let j = self.cdf[1..]
            .partition_point(|&c| c < u)
            .min(self.bins() - 1);
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        let f = if c1 > c0 {
            ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        self.edge(j) + f * self.width
    }
}

/// Monotone intensity map from one region's distribution onto another's.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramMap {
    source: EdgeCdf,
    reference: EdgeCdf,
}

impl HistogramMap {
    pub fn fit(source: &[f64], reference: &[f64], bins: usize) -> Result<Self> {
        if bins < 8 {
            bail!(
                Argument,
                "histogram matching needs at least 8 bins, got {bins}"
            );
        }
        if source.is_empty() || reference.is_empty() {
            bail!(Argument, "histogram matching needs nonempty samples");
        }
        Ok(Self {
            source: EdgeCdf::new(source, bins),
            reference: EdgeCdf::new(reference, bins),
        })
    }

    /// Reference quantile at the source CDF level of `v`.
    pub fn apply(&self, v: f64) -> f64 {
        self.reference.quantile(self.source.eval(v))
    }
}

/// Maps all voxels of `source` so that its distribution over
/// `source_region` follows that of `reference` over `reference_region`.
pub fn match_histogram(
    source: &Volume,
    reference: &Volume,
    source_region: &LabelMask,
    reference_region: &LabelMask,
    bins: usize,
) -> Result<Volume> {
    check_region(source.dims(), source_region)?;
    check_region(reference.dims(), reference_region)?;
    let map = HistogramMap::fit(
        &region_samples(source, source_region),
        &region_samples(reference, reference_region),
        bins,
    )?;
    source.map(|v| map.apply(f64::from(v)) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_cdf_interpolates() {
        let c = EdgeCdf::new(&[0.0, 1.0, 2.0, 3.0], 4);
        assert_eq!(c.eval(-1.0), 0.0);
        assert_eq!(c.eval(0.0), 0.0);
        assert!((c.eval(0.375) - 0.125).abs() < 1e-12);
        assert!((c.eval(0.75) - 0.25).abs() < 1e-12);
        assert_eq!(c.eval(3.0), 1.0);
        assert!((c.quantile(0.25) - 0.75).abs() < 1e-12);
        assert!((c.quantile(c.eval(1.3)) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn constant_reference_maps_to_constant() {
        let m = HistogramMap::fit(&[0.0, 1.0, 2.0], &[5.0; 4], 8).unwrap();
        assert!([0.0, 1.5, 9.0].iter().all(|&v| m.apply(v) == 5.0));
    }
}

//! The observed data: an N×J matrix of taxa counts with row depths.

use crate::{Error, Result};

/// Nonnegative integer taxa counts for N samples over J taxa, stored
/// row-major, together with per-row sequencing depths and the sample/taxon
/// labels used at the file-format boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    n_samples: usize,
    n_taxa: usize,
    counts: Vec<u32>,
    depths: Vec<u64>,
    sample_ids: Vec<String>,
    taxon_ids: Vec<String>,
}

impl CountMatrix {
    /// Build from per-sample rows. Requires N ≥ 1, J ≥ 2, consistent row
    /// lengths and matching label counts. All-zero taxa are accepted (the
    /// prior-mean recipe substitutes a pseudo-abundance for them; see
    /// [`crate::model::Hyperparams`]).
    pub fn new(
        rows: Vec<Vec<u32>>,
        sample_ids: Vec<String>,
        taxon_ids: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        let n_taxa = rows[0].len();
        if n_taxa < 2 {
            return Err(Error::InvalidArgument("need at least two taxa".into()));
        }
        if sample_ids.len() != rows.len() {
            return Err(Error::Dimension(format!(
                "{} sample ids for {} rows",
                sample_ids.len(),
                rows.len()
            )));
        }
        if taxon_ids.len() != n_taxa {
            return Err(Error::Dimension(format!(
                "{} taxon ids for {} columns",
                taxon_ids.len(),
                n_taxa
            )));
        }
        let mut counts = Vec::with_capacity(rows.len() * n_taxa);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_taxa {
                return Err(Error::Dimension(format!(
                    "row {} has {} columns, expected {}",
                    i,
                    row.len(),
                    n_taxa
                )));
            }
            counts.extend_from_slice(row);
        }
        let depths = counts
            .chunks_exact(n_taxa)
            .map(|row| row.iter().map(|&z| z as u64).sum())
            .collect();
        Ok(CountMatrix {
            n_samples: rows.len(),
            n_taxa,
            counts,
            depths,
            sample_ids,
            taxon_ids,
        })
    }

    /// Convenience constructor with generated `s###`/`t###` labels.
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = rows.len();
        let j = rows.first().map_or(0, Vec::len);
        let sample_ids = (1..=n).map(|i| format!("s{i:03}")).collect();
        let taxon_ids = (1..=j).map(|j| format!("t{j:03}")).collect();
        Self::new(rows, sample_ids, taxon_ids)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_taxa(&self) -> usize {
        self.n_taxa
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n_taxa + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.n_taxa..(i + 1) * self.n_taxa]
    }

    #[inline]
    pub fn depth(&self, i: usize) -> u64 {
        self.depths[i]
    }

    pub fn depths(&self) -> &[u64] {
        &self.depths
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn taxon_ids(&self) -> &[String] {
        &self.taxon_ids
    }

    pub fn total_depth(&self) -> u64 {
        self.depths.iter().sum()
    }

    /// Fraction of zero cells in the matrix.
    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.counts.iter().filter(|&&z| z == 0).count();
        zeros as f64 / self.counts.len() as f64
    }

    /// Columns whose counts are zero in every sample.
    pub fn all_zero_taxa(&self) -> Vec<usize> {
        (0..self.n_taxa)
            .filter(|&j| (0..self.n_samples).all(|i| self.count(i, j) == 0))
            .collect()
    }

    /// Mean observed relative abundance per taxon, averaging z_ij / depth_i
    /// over samples with positive depth. Zero-depth samples carry no
    /// compositional information and are skipped; with no positive-depth
    /// samples at all the result is all zeros.
    pub fn mean_relative_abundance(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n_taxa];
        let mut used = 0usize;
        for i in 0..self.n_samples {
            let d = self.depths[i];
            if d == 0 {
                continue;
            }
            used += 1;
            for (j, &z) in self.row(i).iter().enumerate() {
                means[j] += z as f64 / d as f64;
            }
        }
        if used > 0 {
            for m in &mut means {
                *m /= used as f64;
            }
        }
        means
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depths_are_row_sums() {
        let m = CountMatrix::from_rows(vec![vec![1, 2, 3], vec![0, 0, 0]]).unwrap();
        assert_eq!(m.depth(0), 6);
        assert_eq!(m.depth(1), 0);
        assert_eq!(m.row(1), &[0, 0, 0]);
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = CountMatrix::from_rows(vec![vec![1, 2], vec![1]]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn rejects_single_taxon() {
        assert!(CountMatrix::from_rows(vec![vec![5]]).is_err());
        assert!(CountMatrix::from_rows(vec![]).is_err());
    }

    #[test]
    fn mean_relative_abundance_skips_zero_depth() {
        let m = CountMatrix::from_rows(vec![vec![2, 2], vec![0, 0], vec![4, 0]]).unwrap();
        let ra = m.mean_relative_abundance();
        assert!((ra[0] - 0.75).abs() < 1e-15);
        assert!((ra[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn flags_all_zero_taxa() {
        let m = CountMatrix::from_rows(vec![vec![2, 0, 1], vec![3, 0, 0]]).unwrap();
        assert_eq!(m.all_zero_taxa(), vec![1]);
        assert!((m.zero_fraction() - 3.0 / 6.0).abs() < 1e-15);
    }
}

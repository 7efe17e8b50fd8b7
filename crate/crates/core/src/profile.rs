//! Voter profiles: plain multisets of preferred vectors, and their weighted,
//! canonically ordered form consumed by the aggregators.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::vector_core::{Point, SpdMatrix};

/// A nonempty multiset of voters' preferred vectors, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VoterProfile {
    voters: Vec<Point>,
    dim: usize,
}

impl VoterProfile {
    pub fn new(voters: Vec<Point>) -> Result<Self> {
        let dim = voters.first().ok_or(Error::EmptyProfile)?.len();
        if dim == 0 {
            return Err(Error::InvalidInput("voter points must have dimension >= 1".into()));
        }
        for v in &voters {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("voter coordinates must be finite".into()));
            }
        }
        Ok(Self { voters, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| Point::from_column_slice(r)).collect())
    }

    pub fn voters(&self) -> &[Point] {
        &self.voters
    }

    pub fn len(&self) -> usize {
        self.voters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voters.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Profile with one more voter appended.
    pub fn with_voter(&self, extra: Point) -> Result<Self> {
        let mut voters = self.voters.clone();
        voters.push(extra);
        Self::new(voters)
    }

    /// Every voter mapped through `z -> m z`.
    pub fn transformed(&self, m: &SpdMatrix) -> Result<Self> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.dim(),
            });
        }
        Ok(Self {
            voters: self.voters.iter().map(|v| m.matrix() * v).collect(),
            dim: self.dim,
        })
    }

    /// Every voter mapped through `z -> scale * z + shift`.
    pub fn affine(&self, scale: f64, shift: &Point) -> Result<Self> {
        Self::new(self.voters.iter().map(|v| v * scale + shift).collect())
    }

    /// Dimension of the affine hull of the voters (numerical rank of the
    /// centered data, relative tolerance `1e-10`).
    pub fn affine_dim(&self) -> usize {
        affine_dim(&self.voters)
    }

    /// `Sigma(theta)` with the `1/V` normalization.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.len() as f64;
        let mean = self.voters.iter().fold(Point::zeros(self.dim), |a, v| a + v) / n;
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for v in &self.voters {
            let c = v - &mean;
            cov += &c * c.transpose();
        }
        cov / n
    }
}

pub(crate) fn affine_dim(points: &[Point]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let d = points[0].len();
    let base = &points[0];
    let m = DMatrix::from_fn(points.len() - 1, d, |r, c| points[r + 1][c] - base[c]);
    let svd = SVD::new(m, false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count()
}

fn lex_cmp(a: &Point, b: &Point) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Voter points with positive weights summing to 1.
///
/// Entries are kept in lexicographic order with exact duplicates merged, so
/// every aggregate computed from a `WeightedProfile` is bit-for-bit invariant
/// under any reordering of the input voters.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedProfile {
    points: Vec<Point>,
    weights: Vec<f64>,
    dim: usize,
    voter_count: usize,
}

impl WeightedProfile {
    /// Equal weight `1/V` for each of the `V` voters.
    pub fn uniform(profile: &VoterProfile) -> Self {
        let w = vec![1.0; profile.len()];
        Self::build(profile.voters().to_vec(), w, profile.dim())
    }

    /// Explicit positive weights; normalized to sum to 1.
    pub fn with_weights(profile: &VoterProfile, weights: &[f64]) -> Result<Self> {
        if weights.len() != profile.len() {
            return Err(Error::DimensionMismatch {
                expected: profile.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and strictly positive".into()));
        }
        Ok(Self::build(profile.voters().to_vec(), weights.to_vec(), profile.dim()))
    }

    /// Distinct points with voter multiplicities (each count > 0).
    pub fn from_counts(points: Vec<Point>, counts: &[f64]) -> Result<Self> {
        let profile = VoterProfile::new(points)?;
        let mut wp = Self::with_weights(&profile, counts)?;
        wp.voter_count = counts.iter().sum::<f64>().round().max(1.0) as usize;
        Ok(wp)
    }

    fn build(points: Vec<Point>, raw: Vec<f64>, dim: usize) -> Self {
        let voter_count = points.len();
        let mut entries: Vec<(Point, f64)> = points.into_iter().zip(raw).collect();
        entries.sort_by(|a, b| lex_cmp(&a.0, &b.0).then(a.1.total_cmp(&b.1)));
        let mut merged: Vec<(Point, f64)> = Vec::with_capacity(entries.len());
        for (p, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += w,
                _ => merged.push((p, w)),
            }
        }
        let total: f64 = merged.iter().map(|e| e.1).sum();
        let (points, weights) = merged.into_iter().map(|(p, w)| (p, w / total)).unzip();
        Self {
            points,
            weights,
            dim,
            voter_count,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct points after merging duplicates.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of voters the profile stands for (before merging).
    pub fn voter_count(&self) -> usize {
        self.voter_count
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub fn affine_dim(&self) -> usize {
        affine_dim(&self.points)
    }

    /// Adds one more voter carrying the weight of a single honest voter, i.e.
    /// the honest weights are scaled by `V/(V+1)` and the newcomer gets `1/(V+1)`.
    pub fn with_extra_voter(&self, extra: &Point) -> Result<Self> {
        if extra.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: extra.len(),
            });
        }
        let v = self.voter_count as f64;
        let mut points = self.points.clone();
        let mut weights: Vec<f64> = self.weights.iter().map(|w| w * v).collect();
        match points.binary_search_by(|p| lex_cmp(p, extra)) {
            Ok(i) => weights[i] += 1.0,
            Err(i) => {
                points.insert(i, extra.clone());
                weights.insert(i, 1.0);
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self {
            points,
            weights,
            dim: self.dim,
            voter_count: self.voter_count + 1,
        })
    }

    /// Every point mapped through `z -> m z`; weights unchanged.
    pub fn transformed(&self, m: &SpdMatrix) -> Result<Self> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.dim(),
            });
        }
        let points = self.points.iter().map(|p| m.matrix() * p).collect();
        let mut out = Self::build(points, self.weights.clone(), self.dim);
        out.voter_count = self.voter_count;
        Ok(out)
    }
}

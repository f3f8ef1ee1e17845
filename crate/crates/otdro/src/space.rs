//! Partitioned ground spaces and product metrics.
//!
//! The uncertainty lives in ℝ^d split into n blocks of dimensions d₁…dₙ.
//! Each block carries the metric induced by the q-norm and the full space
//! carries the product metric ρ(ζ,ξ) = (Σ_k ρ_k(ζ_k,ξ_k)^q)^{1/q}, which for
//! q-norm blocks coincides with the plain q-norm on ℝ^d.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A norm/metric exponent in [1, ∞]. Infinity selects the max norm.
///
/// Serialized as a JSON number, or the string `"inf"` for the max norm
/// (JSON has no literal for infinity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(f64);

impl Exponent {
    /// A finite exponent; must be ≥ 1.
    pub fn finite(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 1.0 {
            return Err(Error::input(format!(
                "exponent must be in [1, inf], got {value}"
            )));
        }
        Ok(Exponent(value))
    }

    /// The max-norm sentinel.
    pub fn infinity() -> Self {
        Exponent(f64::INFINITY)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// q-norm of a vector under this exponent.
    pub fn norm(self, v: &[f64]) -> f64 {
        if self.is_infinite() {
            v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
        } else if self.0 == 1.0 {
            v.iter().map(|x| x.abs()).sum()
        } else if self.0 == 2.0 {
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        } else {
            v.iter()
                .map(|x| x.abs().powf(self.0))
                .sum::<f64>()
                .powf(1.0 / self.0)
        }
    }

    /// Combine nonnegative per-block distances: (Σ r_k^q)^{1/q}, max for q=∞.
    fn combine(self, parts: &[f64]) -> f64 {
        if self.is_infinite() {
            parts.iter().fold(0.0, |acc, &r| acc.max(r))
        } else if self.0 == 1.0 {
            parts.iter().sum()
        } else {
            parts
                .iter()
                .map(|r| r.powf(self.0))
                .sum::<f64>()
                .powf(1.0 / self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Exponent::finite(v).map_err(serde::de::Error::custom),
            Raw::Word(w) if w == "inf" => Ok(Exponent::infinity()),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number >= 1 or \"inf\", got {w:?}"
            ))),
        }
    }
}

/// Optional axis-aligned bounding box for a partitioned space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// ℝ^{d₁} × ··· × ℝ^{dₙ} with the q-norm metric on each block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct PartitionedSpace {
    block_dims: Vec<usize>,
    q: Exponent,
    bounds: Option<Bounds>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    block_dims: Vec<usize>,
    q: Exponent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<Bounds>,
}

impl TryFrom<RawSpace> for PartitionedSpace {
    type Error = Error;
    fn try_from(raw: RawSpace) -> Result<Self> {
        PartitionedSpace::with_bounds(raw.block_dims, raw.q, raw.bounds)
    }
}

impl From<PartitionedSpace> for RawSpace {
    fn from(s: PartitionedSpace) -> Self {
        RawSpace {
            block_dims: s.block_dims,
            q: s.q,
            bounds: s.bounds,
        }
    }
}

impl PartitionedSpace {
    pub fn new(block_dims: Vec<usize>, q: Exponent) -> Result<Self> {
        Self::with_bounds(block_dims, q, None)
    }

    pub fn with_bounds(
        block_dims: Vec<usize>,
        q: Exponent,
        bounds: Option<Bounds>,
    ) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::input("a partitioned space needs at least one block"));
        }
        if block_dims.contains(&0) {
            return Err(Error::input("every block dimension must be >= 1"));
        }
        let d: usize = block_dims.iter().sum();
        if let Some(b) = &bounds {
            if b.lower.len() != d || b.upper.len() != d {
                return Err(Error::input(format!(
                    "bounds must have dimension {d}, got {} and {}",
                    b.lower.len(),
                    b.upper.len()
                )));
            }
            if b.lower.iter().zip(&b.upper).any(|(l, u)| l > u) {
                return Err(Error::input(
                    "bounds lower corner must be <= upper componentwise",
                ));
            }
        }
        Ok(PartitionedSpace {
            block_dims,
            q,
            bounds,
        })
    }

    /// Single block of dimension `d`: the plain q-normed ℝ^d.
    pub fn unpartitioned(d: usize, q: Exponent) -> Result<Self> {
        Self::new(vec![d], q)
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn n_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    /// Index range of block `k` inside a full point.
    pub fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.block_dims[..k].iter().sum();
        start..start + self.block_dims[k]
    }

    /// Slice block `k` out of a full point.
    pub fn block<'a>(&self, point: &'a [f64], k: usize) -> &'a [f64] {
        &point[self.block_range(k)]
    }

    fn check_dim(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.total_dim() {
            return Err(Error::input(format!(
                "point has dimension {}, space expects {}",
                point.len(),
                self.total_dim()
            )));
        }
        Ok(())
    }

    /// Distance between the k-th blocks of two full points (q-norm).
    pub fn block_distance(&self, a: &[f64], b: &[f64], k: usize) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self.block_distance_unchecked(a, b, k))
    }

    fn block_distance_unchecked(&self, a: &[f64], b: &[f64], k: usize) -> f64 {
        let r = self.block_range(k);
        let diff: Vec<f64> = a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x - y).collect();
        self.q.norm(&diff)
    }

    /// Distance between two block-k points given directly in ℝ^{d_k}.
    pub fn component_distance(&self, a: &[f64], b: &[f64], k: usize) -> Result<f64> {
        let dk = self.block_dims[k];
        if a.len() != dk || b.len() != dk {
            return Err(Error::input(format!(
                "component-{k} points must have dimension {dk}, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Ok(self.q.norm(&diff))
    }

    /// Product metric ρ(ζ,ξ) = (Σ_k ρ_k(ζ_k,ξ_k)^q)^{1/q}.
    pub fn product_metric(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let parts: Vec<f64> = (0..self.n_blocks())
            .map(|k| self.block_distance_unchecked(a, b, k))
            .collect();
        Ok(self.q.combine(&parts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(dims: &[usize], q: f64) -> PartitionedSpace {
        PartitionedSpace::new(dims.to_vec(), Exponent::finite(q).unwrap()).unwrap()
    }

    #[test]
    fn identical_points_have_zero_distance() {
        let s = space(&[2, 3], 2.0);
        let p = vec![1.0, -2.0, 0.5, 3.0, 4.0];
        assert_eq!(s.product_metric(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn single_block_reduces_to_plain_norm() {
        for q in [1.0, 2.0, 3.5] {
            let s = space(&[3], q);
            let a = vec![1.0, 2.0, -1.0];
            let b = vec![0.0, -1.0, 2.0];
            let diff = vec![1.0, 3.0, -3.0];
            let want = Exponent::finite(q).unwrap().norm(&diff);
            assert!((s.product_metric(&a, &b).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn two_unit_blocks_give_pythagoras() {
        // two 1-D blocks, q = 2, ζ = (0,0), ξ = (3,4) -> 5
        let s = space(&[1, 1], 2.0);
        let d = s.product_metric(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn max_norm_sentinel() {
        let s = PartitionedSpace::new(vec![1, 1], Exponent::infinity()).unwrap();
        let d = s.product_metric(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(d, 4.0);
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let s = space(&[2], 2.0);
        assert!(matches!(
            s.product_metric(&[0.0], &[1.0, 2.0]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn invalid_construction_rejected() {
        assert!(PartitionedSpace::new(vec![], Exponent::infinity()).is_err());
        assert!(PartitionedSpace::new(vec![2, 0], Exponent::infinity()).is_err());
        assert!(Exponent::finite(0.5).is_err());
        assert!(Exponent::finite(f64::NAN).is_err());
        let bad = PartitionedSpace::with_bounds(
            vec![2],
            Exponent::finite(2.0).unwrap(),
            Some(Bounds {
                lower: vec![1.0, 0.0],
                upper: vec![0.0, 1.0],
            }),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn exponent_serde_roundtrip() {
        let inf: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(inf.is_infinite());
        let two: Exponent = serde_json::from_str("2.0").unwrap();
        assert_eq!(two.value(), 2.0);
        assert_eq!(serde_json::to_string(&inf).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&two).unwrap(), "2.0");
        assert!(serde_json::from_str::<Exponent>("0.2").is_err());
    }
}

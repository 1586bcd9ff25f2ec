//! Smooth bump and the normalized frequency-uniform window family.
//!
//! The window attached to a lattice point `k` is the tensor product of
//! one-dimensional factors `eta(2 (xi_i - k_i))`, normalized by the sum of
//! the same products over the whole integer lattice. Because both numerator
//! and denominator factor over axes, every window is a product of normalized
//! one-dimensional windows, which is how it is evaluated here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The one-dimensional bump `eta`: 1 on `|t| <= 1`, 0 on `|t| >= 2`, and a
/// smoothstep transition in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    transition_sharpness: f64,
    evaluation_cache_resolution: usize,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self {
            transition_sharpness: 1.0,
            evaluation_cache_resolution: 64,
        }
    }
}

impl BumpProfile {
    pub fn new(transition_sharpness: f64, evaluation_cache_resolution: usize) -> Result<Self> {
        if !(transition_sharpness.is_finite() && transition_sharpness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transition sharpness must be positive, got {transition_sharpness}"
            )));
        }
        if evaluation_cache_resolution == 0 {
            return Err(Error::InvalidParameter(
                "cache resolution must be positive".into(),
            ));
        }
        Ok(Self {
            transition_sharpness,
            evaluation_cache_resolution,
        })
    }

    pub fn transition_sharpness(&self) -> f64 {
        self.transition_sharpness
    }

    pub fn evaluation_cache_resolution(&self) -> usize {
        self.evaluation_cache_resolution
    }

    fn flat(&self, u: f64) -> f64 {
        if u > 0.0 {
            (-self.transition_sharpness / u).exp()
        } else {
            0.0
        }
    }

    /// Smoothstep on `[0, 1]`, symmetric about `1/2`.
    fn step(&self, u: f64) -> f64 {
        let a = self.flat(u);
        let b = self.flat(1.0 - u);
        a / (a + b)
    }

    /// Evaluates `eta(t)`. The plateau and the tail are exact.
    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 1.0 {
            1.0
        } else if a >= 2.0 {
            0.0
        } else {
            self.step(2.0 - a)
        }
    }

    /// Samples `eta` on `[0, 2]` at `evaluation_cache_resolution` points per
    /// unit, endpoints included.
    pub fn tabulate(&self) -> Vec<f64> {
        let per_unit = self.evaluation_cache_resolution;
        (0..=2 * per_unit)
            .map(|i| self.eval(i as f64 / per_unit as f64))
            .collect()
    }
}

/// Open axis-aligned box outside which a window vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SupportBox {
    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| lo < x && x < hi)
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .collect()
    }
}

/// Normalized tensor-product window family, truncated to `max_i |k_i| <= K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFamily {
    dimension: usize,
    truncation_radius: i64,
    bump: BumpProfile,
}

impl WindowFamily {
    pub fn new(dimension: usize, truncation_radius: i64, bump: BumpProfile) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::UnsupportedDimension(0, "window family needs n >= 1"));
        }
        if truncation_radius < 0 {
            return Err(Error::InvalidParameter(format!(
                "truncation radius must be nonnegative, got {truncation_radius}"
            )));
        }
        Ok(Self {
            dimension,
            truncation_radius,
            bump,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn truncation_radius(&self) -> i64 {
        self.truncation_radius
    }

    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    /// The same family in another dimension (used for traced fields).
    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        Self::new(dimension, self.truncation_radius, self.bump)
    }

    /// Number of retained windows, `(2K + 1)^n`.
    pub fn len(&self) -> usize {
        self.axis_len().pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub(crate) fn axis_len(&self) -> usize {
        (2 * self.truncation_radius + 1) as usize
    }

    /// Normalized one-dimensional window `eta(2(t - j)) / sum_m eta(2(t - m))`.
    ///
    /// Only integers with `|t - m| < 1` contribute to the denominator, and the
    /// nearest integer always contributes 1, so the denominator lies in `[1, 2]`.
    pub fn axis_window(&self, j: i64, t: f64) -> f64 {
        let numer = self.bump.eval(2.0 * (t - j as f64));
        if numer == 0.0 {
            return 0.0;
        }
        let base = t.floor() as i64;
        let denom: f64 = (base - 1..=base + 1)
            .map(|m| self.bump.eval(2.0 * (t - m as f64)))
            .sum();
        numer / denom
    }

    fn check_index(&self, k: &[i64]) -> Result<()> {
        if k.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: k.len(),
            });
        }
        if k.iter().any(|&ki| ki.abs() > self.truncation_radius) {
            return Err(Error::IndexOutOfRange {
                index: k.to_vec(),
                radius: self.truncation_radius,
            });
        }
        Ok(())
    }

    /// Evaluates the window `phi_k(xi)`.
    pub fn eval(&self, k: &[i64], xi: &[f64]) -> Result<f64> {
        self.check_index(k)?;
        if xi.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: xi.len(),
            });
        }
        Ok(k.iter()
            .zip(xi)
            .map(|(&ki, &x)| self.axis_window(ki, x))
            .product())
    }

    pub fn support(&self, k: &[i64]) -> Result<SupportBox> {
        self.check_index(k)?;
        Ok(SupportBox {
            lower: k.iter().map(|&ki| ki as f64 - 1.0).collect(),
            upper: k.iter().map(|&ki| ki as f64 + 1.0).collect(),
        })
    }

    /// All retained lattice points in row-major order (last axis fastest).
    pub fn indices(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |pos| self.index_at(pos))
    }

    pub fn index_at(&self, mut pos: usize) -> Vec<i64> {
        let side = self.axis_len();
        let mut k = vec![0i64; self.dimension];
        for slot in k.iter_mut().rev() {
            *slot = (pos % side) as i64 - self.truncation_radius;
            pos /= side;
        }
        k
    }

    pub fn position_of(&self, k: &[i64]) -> Option<usize> {
        if self.check_index(k).is_err() {
            return None;
        }
        let side = self.axis_len();
        Some(k.iter().fold(0usize, |acc, &ki| {
            acc * side + (ki + self.truncation_radius) as usize
        }))
    }
}

/// Evaluates `psi_{kbar,l}(xi) = phi_kbar(xbar) * phi_l(xi)`, where `xbar`
/// drops the last coordinate of `xi`.
pub fn eval_mixed_window(
    full: &WindowFamily,
    reduced: &WindowFamily,
    kbar: &[i64],
    l: &[i64],
    xi: &[f64],
) -> Result<f64> {
    let n = full.dimension();
    if reduced.dimension() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n.saturating_sub(1),
            got: reduced.dimension(),
        });
    }
    if kbar.len() + 1 != l.len() {
        return Err(Error::DimensionMismatch {
            expected: l.len().saturating_sub(1),
            got: kbar.len(),
        });
    }
    if xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: xi.len(),
        });
    }
    let head = reduced.eval(kbar, &xi[..n - 1])?;
    if head == 0.0 {
        // still validate l so that out-of-range indices are reported
        full.check_index(l)?;
        return Ok(0.0);
    }
    Ok(head * full.eval(l, xi)?)
}

//! Restriction to `x_n = 0`, the extension operator built from a narrow
//! frequency bump on the last axis, and the two pointwise facts the trace
//! estimate rests on: the band identity for the traced field and the
//! maximal-function bound at the hyperplane.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decomposition::{maximal_at, BandComponent, BandSet, Decomposer, MaximalParams, ShiftLattice};
use crate::error::{Error, Result};
use crate::field::{self, GridSpec, SampledField, Spectrum};
use crate::partition::{BumpProfile, WindowFamily};

/// Frequency-side window on the last axis, supported in `(-1/4, 1/4)` and
/// normalized to unit integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionProfile {
    bump: BumpProfile,
    normalization: f64,
}

/// `eta(8 xi)` is supported in `|xi| < 1/4`.
const SUPPORT_SCALE: f64 = 8.0;

impl ExtensionProfile {
    /// Rescales `bump` to `(-1/4, 1/4)` and fixes the constant by a
    /// trapezoid quadrature of the rescaled bump.
    pub fn new(bump: BumpProfile) -> Self {
        const PANELS: usize = 1 << 16;
        let h = 0.5 / PANELS as f64;
        let interior: Vec<f64> = (1..PANELS)
            .map(|i| bump.eval(SUPPORT_SCALE * (-0.25 + i as f64 * h)))
            .collect();
        // the endpoints are zero
        let integral = h * field::pairwise_sum(&interior);
        Self {
            bump,
            normalization: 1.0 / integral,
        }
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.normalization * self.bump.eval(SUPPORT_SCALE * xi)
    }
}

impl Default for ExtensionProfile {
    fn default() -> Self {
        Self::new(BumpProfile::default())
    }
}

/// The restriction `f(xbar, 0)`.
pub fn trace(f: &SampledField) -> Result<SampledField> {
    field::slice_last_axis(f)
}

/// One-dimensional weight `w = F^{-1} eta'` sampled on a periodic axis.
///
/// On the torus the value `w(0)` is the Riemann sum of `eta'` at spacing
/// `1/L`, which differs from the unit integral by quadrature error; the weight
/// is divided by that sum so that `w(0) = 1` holds on the grid.
pub fn extension_weight(profile: &ExtensionProfile, period: usize, samples: usize) -> Result<SampledField> {
    let spec = GridSpec::new(vec![period], vec![samples])?;
    let mut spectrum = Spectrum::zeros(spec.clone());
    let mut riemann = 0.0;
    for c in 0..samples {
        let v = profile.eval(spec.frequency(0, c));
        spectrum.coefficients_mut()[c] = Complex64::new(v, 0.0);
        riemann += v;
    }
    riemann /= period as f64;
    if riemann == 0.0 {
        return Err(Error::Geometry(format!(
            "last-axis period {period} does not resolve the extension window"
        )));
    }
    let w = field::inverse_transform(&spectrum);
    Ok(w.scale(Complex64::new(1.0 / riemann, 0.0)))
}

/// `g(xbar, x_n) = w(x_n) f(xbar)` on the `n`-dimensional `target` grid.
pub fn extend(f: &SampledField, profile: &ExtensionProfile, target: &GridSpec) -> Result<SampledField> {
    let n = target.dimension();
    if n != f.dimension() + 1 {
        return Err(Error::DimensionMismatch {
            expected: f.dimension() + 1,
            got: n,
        });
    }
    if &target.drop_last_axis()? != f.spec() {
        return Err(Error::Geometry(
            "target grid does not extend the field's grid".into(),
        ));
    }
    let w = extension_weight(profile, target.period()[n - 1], target.samples()[n - 1])?;
    let values: Vec<Complex64> = f
        .values()
        .iter()
        .flat_map(|v| w.values().iter().map(move |wn| v * wn))
        .collect();
    SampledField::new(target.clone(), values)
}

/// Decomposers for an `n`-dimensional grid and its hyperplane.
pub struct TraceEngine {
    full: Decomposer,
    reduced: Decomposer,
}

impl TraceEngine {
    pub fn new(spec: GridSpec, family: WindowFamily) -> Result<Self> {
        let n = spec.dimension();
        if n < 2 {
            return Err(Error::UnsupportedDimension(n, "traces need n >= 2"));
        }
        let reduced_spec = spec.drop_last_axis()?;
        let reduced_family = family.with_dimension(n - 1)?;
        Ok(Self {
            full: Decomposer::new(spec, family)?,
            reduced: Decomposer::new(reduced_spec, reduced_family)?,
        })
    }

    pub fn full(&self) -> &Decomposer {
        &self.full
    }

    pub fn reduced(&self) -> &Decomposer {
        &self.reduced
    }

    /// Both sides of `box_kbar(T f) = sum_{l : |kbar - lbar| <= 1} box_{kbar,l} f (xbar, 0)`.
    pub fn band_identity_sides(
        &self,
        f: &SampledField,
        kbar: &[i64],
    ) -> Result<(SampledField, SampledField)> {
        let lhs = self.reduced.box_op(&trace(f)?, kbar)?.field().clone();
        let spectrum = self.full.spectrum(f)?;
        let family = self.full.family();
        let reduced_family = self.reduced.family();
        let terms: Vec<SampledField> = family
            .indices()
            .filter(|l| kbar.iter().zip(l.iter()).all(|(a, b)| (a - b).abs() <= 1))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|l| {
                let band = self
                    .full
                    .mixed_from_spectrum(&spectrum, reduced_family, kbar, &l)?;
                trace(band.field())
            })
            .collect::<Result<_>>()?;
        let mut acc = vec![Complex64::default(); lhs.spec().len()];
        for t in &terms {
            for (a, v) in acc.iter_mut().zip(t.values()) {
                *a += v;
            }
        }
        Ok((lhs, SampledField::new(self.reduced.spec().clone(), acc)?))
    }

    /// Max absolute difference between the two sides of the band identity.
    pub fn band_identity_residual(&self, f: &SampledField, kbar: &[i64]) -> Result<f64> {
        let (lhs, rhs) = self.band_identity_sides(f, kbar)?;
        Ok(lhs.max_abs_difference(&rhs))
    }
}

pub fn trace_band_identity_residual(f: &SampledField, kbar: &[i64], family: &WindowFamily) -> Result<f64> {
    TraceEngine::new(f.spec().clone(), *family)?.band_identity_residual(f, kbar)
}

/// The hyperplane bound `|box_k f(xbar, 0)| <= 2 box*_k f(xbar, x_n)` over
/// samples with `|x_n| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperplaneBound {
    /// `min (2 box*_k f(x) - |box_k f(xbar, 0)|)`.
    pub margin: f64,
    /// `max |box_k f(xbar, 0)| / (2 box*_k f(x))`, with `0/0` read as 0.
    pub ratio: f64,
}

/// Minimum over samples with `|x_n| <= 1` of
/// `2 * box*_k f(xbar, x_n) - |box_k f(xbar, 0)|`.
///
/// The factor 2 bounds the weight `1 + |y_n|^b` for `|y_n| <= 1`. With
/// [`ShiftLattice::Grid`] the shift `y = (0, ..., 0, x_n)` is admissible at
/// every sample, so the margin is nonnegative; the integer-lattice read only
/// contains it for integer `x_n`.
pub fn pointwise_maximal_bound_margin(band: &BandComponent, b: f64, shifts: ShiftLattice) -> Result<f64> {
    Ok(pointwise_maximal_bound(band, b, shifts)?.margin)
}

pub fn pointwise_maximal_bound(
    band: &BandComponent,
    b: f64,
    shifts: ShiftLattice,
) -> Result<HyperplaneBound> {
    let f = band.field();
    let spec = f.spec();
    let n = spec.dimension();
    if n < 2 {
        return Err(Error::UnsupportedDimension(
            n,
            "the hyperplane bound needs n >= 2",
        ));
    }
    let last = spec.samples()[n - 1];
    let zero = spec.origin_slot(n - 1);
    let near: Vec<usize> = (0..last)
        .filter(|&j| spec.position(n - 1, j).abs() <= 1.0)
        .collect();
    let positions: Vec<usize> = (0..spec.len() / last)
        .flat_map(|line| near.iter().map(move |&j| line * last + j))
        .collect();
    let mags = band.magnitudes();
    let params = MaximalParams {
        b,
        scale: 1.0,
        shifts,
    };
    let maximal = maximal_at(spec, &mags, &params, &positions)?;
    let mut out = HyperplaneBound {
        margin: f64::INFINITY,
        ratio: 0.0,
    };
    for (&x, m) in positions.iter().zip(&maximal) {
        let on_plane = mags[(x / last) * last + zero];
        out.margin = out.margin.min(2.0 * m - on_plane);
        if on_plane > 0.0 {
            out.ratio = out.ratio.max(on_plane / (2.0 * m));
        }
    }
    Ok(out)
}

/// Max over `k` of `|box_k g - box_kbar f * box_{k_n} w|` for `g = extend(f)`,
/// plus the largest band of `g` with `|k_n| >= 2`.
pub fn extension_band_residuals(
    f: &SampledField,
    profile: &ExtensionProfile,
    target: &GridSpec,
    family: &WindowFamily,
) -> Result<(f64, f64)> {
    let n = target.dimension();
    let g = extend(f, profile, target)?;
    let bands = Decomposer::new(target.clone(), *family)?.decompose(&g)?;
    let reduced = Decomposer::new(f.spec().clone(), family.with_dimension(n - 1)?)?.decompose(f)?;
    let w = extension_weight(profile, target.period()[n - 1], target.samples()[n - 1])?;
    let w_bands = Decomposer::new(w.spec().clone(), family.with_dimension(1)?)?.decompose(&w)?;
    factorization_residuals(&bands, &reduced, &w_bands)
}

/// Same as [`extension_band_residuals`] from precomputed band sets of the
/// extension, the base field and the weight.
pub fn factorization_residuals(extended: &BandSet, base: &BandSet, weight: &BandSet) -> Result<(f64, f64)> {
    let n = extended.dimension();
    if base.dimension() + 1 != n || weight.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: base.dimension() + weight.dimension(),
        });
    }
    let mut factor_residual: f64 = 0.0;
    let mut high_band: f64 = 0.0;
    for c in extended.components() {
        let k = c.index();
        let missing = || Error::MissingBands(format!("no factor bands for {k:?}"));
        let fb = base.get(&k[..n - 1]).ok_or_else(missing)?;
        let wb = weight.get(&k[n - 1..]).ok_or_else(missing)?;
        let product = fb
            .field()
            .values()
            .iter()
            .flat_map(|v| wb.field().values().iter().map(move |u| v * u));
        let diff = c
            .field()
            .values()
            .iter()
            .zip(product)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        factor_residual = factor_residual.max(diff);
        if k[n - 1].abs() >= 2 {
            high_band = high_band.max(c.field().max_abs());
        }
    }
    Ok((factor_residual, high_band))
}

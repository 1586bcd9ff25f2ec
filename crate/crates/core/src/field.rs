//! Periodic sampled fields on `[-L/2, L/2)^n`, their spectra, and Lebesgue
//! quasi-norms by Riemann-sum quadrature.
//!
//! Fourier convention: `f^(xi) = int e^{-2 pi i x.xi} f(x) dx`. On the torus
//! the frequencies are `xi = m / L` per axis with `m` in `[-N/2, N/2)`, and a
//! pure tone `e^{2 pi i k.x}` with integer `k` has the single coefficient
//! `prod L_i` at `xi = k`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::WindowFamily;

/// Geometry of a uniform periodic grid: per axis a period `L` and `N` samples.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    period: Vec<usize>,
    samples: Vec<usize>,
}

impl GridSpec {
    pub fn new(period: Vec<usize>, samples: Vec<usize>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::UnsupportedDimension(0, "grid needs n >= 1"));
        }
        if period.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: period.len(),
                got: samples.len(),
            });
        }
        if period.contains(&0) {
            return Err(Error::Geometry("periods must be positive".into()));
        }
        if samples.iter().any(|&n| n < 2 || n % 2 != 0) {
            return Err(Error::Geometry(format!(
                "sample counts must be even and at least 2, got {samples:?}"
            )));
        }
        Ok(Self { period, samples })
    }

    /// Same `L` and `N` on every axis.
    pub fn uniform(dimension: usize, period: usize, samples: usize) -> Result<Self> {
        Self::new(vec![period; dimension], vec![samples; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.period.len()
    }

    pub fn period(&self) -> &[usize] {
        &self.period
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    /// Total number of samples, `prod N_i`.
    pub fn len(&self) -> usize {
        self.samples.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.period[axis] as f64 / self.samples[axis] as f64
    }

    /// Volume element `prod L_i / N_i` of the Riemann sum.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dimension()).map(|a| self.spacing(a)).product()
    }

    /// `prod L_i`.
    pub fn volume(&self) -> f64 {
        self.period.iter().map(|&l| l as f64).product()
    }

    /// Coordinate of sample `j` on `axis`.
    pub fn position(&self, axis: usize, j: usize) -> f64 {
        -(self.period[axis] as f64) / 2.0 + j as f64 * self.spacing(axis)
    }

    /// Signed frequency index `m` of centered slot `c`; the frequency is `m / L`.
    pub fn frequency_index(&self, axis: usize, c: usize) -> i64 {
        c as i64 - (self.samples[axis] / 2) as i64
    }

    pub fn frequency(&self, axis: usize, c: usize) -> f64 {
        self.frequency_index(axis, c) as f64 / self.period[axis] as f64
    }

    /// Largest representable frequency magnitude per axis, `N / (2L)`.
    pub fn nyquist(&self, axis: usize) -> f64 {
        self.samples[axis] as f64 / (2.0 * self.period[axis] as f64)
    }

    /// Row-major strides (last axis contiguous).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dimension()];
        for a in (0..self.dimension().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.samples[a + 1];
        }
        strides
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dimension()];
        for a in (0..self.dimension()).rev() {
            idx[a] = flat % self.samples[a];
            flat /= self.samples[a];
        }
        idx
    }

    /// Sample coordinates of a flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(a, &j)| self.position(a, j))
            .collect()
    }

    /// Slot of `x_a = 0` on each axis.
    pub fn origin_slot(&self, axis: usize) -> usize {
        self.samples[axis] / 2
    }

    /// Requires `N_i / (2 L_i) > K + 1` on every axis so that each retained
    /// window is fully representable.
    pub fn check_window_compat(&self, family: &WindowFamily) -> Result<()> {
        if family.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: family.dimension(),
            });
        }
        let need = (family.truncation_radius() + 1) as f64;
        for a in 0..self.dimension() {
            if self.nyquist(a) <= need {
                return Err(Error::Geometry(format!(
                    "axis {a}: N/(2L) = {} must exceed K + 1 = {need}",
                    self.nyquist(a)
                )));
            }
        }
        Ok(())
    }

    /// Grid of the first `n - 1` axes.
    pub fn drop_last_axis(&self) -> Result<Self> {
        let n = self.dimension();
        if n < 2 {
            return Err(Error::UnsupportedDimension(n, "cannot drop the only axis"));
        }
        Self::new(self.period[..n - 1].to_vec(), self.samples[..n - 1].to_vec())
    }

    /// Appends one axis with the given period and sample count.
    pub fn with_last_axis(&self, period: usize, samples: usize) -> Result<Self> {
        let mut p = self.period.clone();
        let mut s = self.samples.clone();
        p.push(period);
        s.push(samples);
        Self::new(p, s)
    }

    /// Same periods, different sample counts.
    pub fn with_samples(&self, samples: Vec<usize>) -> Result<Self> {
        Self::new(self.period.clone(), samples)
    }
}

/// Complex samples of a periodic function; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    spec: GridSpec,
    values: Arc<[Complex64]>,
}

impl SampledField {
    pub fn new(spec: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Geometry(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidParameter(
                "field contains non-finite samples".into(),
            ));
        }
        Ok(Self {
            spec,
            values: values.into(),
        })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); spec.len()].into();
        Self { spec, values }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        Self::new(spec, values)
    }

    /// `e^{2 pi i k.x}` for an integer frequency `k`.
    pub fn tone(spec: GridSpec, k: &[i64]) -> Result<Self> {
        if k.len() != spec.dimension() {
            return Err(Error::DimensionMismatch {
                expected: spec.dimension(),
                got: k.len(),
            });
        }
        let k: Vec<f64> = k.iter().map(|&v| v as f64).collect();
        Self::from_fn(spec, |x| {
            let phase: f64 = x.iter().zip(&k).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase)
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let values = self.values.iter().map(|v| v * c).collect();
        Self {
            spec: self.spec.clone(),
            values,
        }
    }

    /// `a * self + b * other` on a shared grid.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::Geometry("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            spec: self.spec.clone(),
            values,
        })
    }

    /// Plain l2 distance between sample vectors.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_samples(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Relative l2 error `|self - reference| / |reference|` on samples.
    pub fn relative_error(&self, reference: &Self) -> f64 {
        let denom = reference.l2_samples();
        let num = self.l2_distance(reference);
        if denom == 0.0 {
            num
        } else {
            num / denom
        }
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Resamples a band-limited field on a grid with the same periods,
    /// zero-padding or truncating its spectrum.
    pub fn resample(&self, samples: Vec<usize>) -> Result<Self> {
        let target = self.spec.with_samples(samples)?;
        Ok(inverse_transform(&forward_transform(self).resample(&target)?))
    }
}

/// Real nonnegative samples on a grid, e.g. pointwise aggregates of bands.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Geometry(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent("p", p)?;
        Ok(lp_of_magnitudes(&self.values, self.spec.cell_volume(), p))
    }
}

/// Fourier coefficients on the frequency lattice `(1/L) Z^n`, centered:
/// slot `c` on an axis holds frequency index `c - N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    spec: GridSpec,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(spec: GridSpec) -> Self {
        let coefficients = vec![Complex64::new(0.0, 0.0); spec.len()];
        Self { spec, coefficients }
    }

    pub fn from_coefficients(spec: GridSpec, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != spec.len() {
            return Err(Error::Geometry(format!(
                "expected {} coefficients, got {}",
                spec.len(),
                coefficients.len()
            )));
        }
        Ok(Self { spec, coefficients })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    fn slot(&self, m: &[i64]) -> Option<usize> {
        if m.len() != self.spec.dimension() {
            return None;
        }
        let mut flat = 0usize;
        for (a, &ma) in m.iter().enumerate() {
            let n = self.spec.samples[a] as i64;
            let c = ma + n / 2;
            if !(0..n).contains(&c) {
                return None;
            }
            flat = flat * n as usize + c as usize;
        }
        Some(flat)
    }

    /// Coefficient at integer frequency indices `m` (frequency `m_i / L_i`);
    /// zero outside the representable band.
    pub fn get(&self, m: &[i64]) -> Complex64 {
        self.slot(m).map(|s| self.coefficients[s]).unwrap_or_default()
    }

    pub fn set(&mut self, m: &[i64], value: Complex64) -> Result<()> {
        let slot = self
            .slot(m)
            .ok_or_else(|| Error::Geometry(format!("frequency index {m:?} is not representable")))?;
        self.coefficients[slot] = value;
        Ok(())
    }

    /// Frequency vector of a flat slot.
    pub fn frequency_at(&self, flat: usize) -> Vec<f64> {
        self.spec
            .unravel(flat)
            .iter()
            .enumerate()
            .map(|(a, &c)| self.spec.frequency(a, c))
            .collect()
    }

    /// Moves coefficients onto another grid with the same periods.
    pub fn resample(&self, target: &GridSpec) -> Result<Self> {
        if target.period != self.spec.period {
            return Err(Error::Geometry("resampling requires identical periods".into()));
        }
        let mut out = Spectrum::zeros(target.clone());
        for (flat, c) in self.coefficients.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let m: Vec<i64> = self
                .spec
                .unravel(flat)
                .iter()
                .enumerate()
                .map(|(a, &s)| self.spec.frequency_index(a, s))
                .collect();
            if let Some(slot) = out.slot(&m) {
                out.coefficients[slot] = *c;
            }
        }
        Ok(out)
    }

    /// Fraction of spectral energy at frequencies with `max_i |xi_i| > radius`.
    pub fn energy_outside(&self, radius: f64) -> f64 {
        let mut total = 0.0;
        let mut outside = 0.0;
        for (flat, c) in self.coefficients.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            if self.frequency_at(flat).iter().any(|xi| xi.abs() > radius + 1e-12) {
                outside += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outside / total
        }
    }
}

/// Cached one-dimensional FFT plans for an n-dimensional grid.
pub(crate) struct NdFft {
    samples: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub(crate) fn new(spec: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = spec
            .samples
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inverse = spec
            .samples
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();
        Self {
            samples: spec.samples.clone(),
            forward,
            inverse,
        }
    }

    /// Unnormalized transform along every axis of a row-major array.
    fn process(&self, data: &mut [Complex64], inverse: bool) {
        let dims = &self.samples;
        let total: usize = dims.iter().product();
        let mut buf = Vec::new();
        for a in 0..dims.len() {
            let n = dims[a];
            let stride: usize = dims[a + 1..].iter().product();
            let plan = if inverse {
                &self.inverse[a]
            } else {
                &self.forward[a]
            };
            if stride == 1 {
                plan.process(data);
                continue;
            }
            buf.resize(n, Complex64::default());
            let block = n * stride;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, b) in buf.iter_mut().enumerate() {
                        *b = data[base + j * stride];
                    }
                    plan.process(&mut buf);
                    for (j, b) in buf.iter().enumerate() {
                        data[base + j * stride] = *b;
                    }
                }
            }
        }
    }

    /// Natural-order slot and sign `(-1)^m` for each centered slot, per axis.
    fn layout(spec: &GridSpec) -> Vec<Vec<(usize, f64)>> {
        (0..spec.dimension())
            .map(|a| {
                let n = spec.samples[a];
                (0..n)
                    .map(|c| {
                        let m = spec.frequency_index(a, c);
                        let natural = m.rem_euclid(n as i64) as usize;
                        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        (natural, sign)
                    })
                    .collect()
            })
            .collect()
    }

    /// Walks centered multi-indices in row-major order, yielding the matching
    /// natural flat index and the product of per-axis signs.
    fn for_each_slot(spec: &GridSpec, mut visit: impl FnMut(usize, usize, f64)) {
        let layout = Self::layout(spec);
        let strides = spec.strides();
        let n = spec.dimension();
        let mut idx = vec![0usize; n];
        for centered in 0..spec.len() {
            let mut natural = 0usize;
            let mut sign = 1.0;
            for a in 0..n {
                let (nat, s) = layout[a][idx[a]];
                natural += nat * strides[a];
                sign *= s;
            }
            visit(centered, natural, sign);
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < spec.samples[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    pub(crate) fn forward(&self, f: &SampledField) -> Spectrum {
        let spec = f.spec();
        let mut data = f.values().to_vec();
        self.process(&mut data, false);
        let h = spec.cell_volume();
        let mut coefficients = vec![Complex64::default(); spec.len()];
        Self::for_each_slot(spec, |centered, natural, sign| {
            coefficients[centered] = data[natural] * (h * sign);
        });
        Spectrum {
            spec: spec.clone(),
            coefficients,
        }
    }

    pub(crate) fn inverse(&self, s: &Spectrum) -> SampledField {
        let spec = s.spec();
        let mut data = vec![Complex64::default(); spec.len()];
        let scale = 1.0 / spec.volume();
        Self::for_each_slot(spec, |centered, natural, sign| {
            data[natural] = s.coefficients[centered] * (scale * sign);
        });
        self.process(&mut data, true);
        SampledField {
            spec: spec.clone(),
            values: data.into(),
        }
    }
}

pub fn forward_transform(f: &SampledField) -> Spectrum {
    NdFft::new(f.spec()).forward(f)
}

pub fn inverse_transform(s: &Spectrum) -> SampledField {
    NdFft::new(s.spec()).inverse(s)
}

/// Sum with a fixed pairwise reduction tree, so the result depends only on
/// the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub(crate) fn check_exponent(name: &str, p: f64) -> Result<()> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive or infinite, got {p}"
        )));
    }
    Ok(())
}

/// Riemann-sum `L^p` quasi-norm of nonnegative samples with volume element `cell`.
pub(crate) fn lp_of_magnitudes(magnitudes: &[f64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return magnitudes.iter().copied().fold(0.0, f64::max);
    }
    let powered: Vec<f64> = magnitudes.iter().map(|&m| pow(m, p)).collect();
    root(cell * pairwise_sum(&powered), p)
}

/// `v^p` for `v >= 0`, exact-ish shortcuts for the common exponents.
pub(crate) fn pow(v: f64, p: f64) -> f64 {
    match p {
        1.0 => v,
        2.0 => v * v,
        0.5 => v.sqrt(),
        4.0 => (v * v) * (v * v),
        _ => v.powf(p),
    }
}

/// `v^{1/p}` for `v >= 0`.
pub(crate) fn root(v: f64, p: f64) -> f64 {
    match p {
        1.0 => v,
        2.0 => v.sqrt(),
        0.5 => v * v,
        4.0 => v.sqrt().sqrt(),
        _ => v.powf(1.0 / p),
    }
}

/// `((prod L_i/N_i) sum |f|^p)^{1/p}`, or the sample maximum for `p = inf`.
pub fn lp_norm(f: &SampledField, p: f64) -> Result<f64> {
    check_exponent("p", p)?;
    let mags: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    Ok(lp_of_magnitudes(&mags, f.spec().cell_volume(), p))
}

/// Restriction to the hyperplane `x_n = 0`.
pub fn slice_last_axis(f: &SampledField) -> Result<SampledField> {
    let spec = f.spec();
    let n = spec.dimension();
    if n < 2 {
        return Err(Error::UnsupportedDimension(n, "slicing needs n >= 2"));
    }
    let reduced = spec.drop_last_axis()?;
    let last = spec.samples()[n - 1];
    let zero = spec.origin_slot(n - 1);
    let values: Vec<Complex64> = f.values().chunks_exact(last).map(|line| line[zero]).collect();
    SampledField::new(reduced, values)
}

#[derive(Debug, Serialize, Deserialize)]
struct AmfHeader {
    n: usize,
    #[serde(rename = "L")]
    period: Vec<usize>,
    #[serde(rename = "N")]
    samples: Vec<usize>,
    dtype: String,
}

/// Writes the AMF format: one JSON header line, then little-endian
/// interleaved `(re, im)` f64 samples in row-major order.
pub fn write_amf<W: Write>(f: &SampledField, mut out: W) -> Result<()> {
    let header = AmfHeader {
        n: f.dimension(),
        period: f.spec().period().to_vec(),
        samples: f.spec().samples().to_vec(),
        dtype: "c128".into(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(16 * f.values().len());
    for v in f.values() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_amf<R: BufRead>(mut input: R) -> Result<SampledField> {
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("header is not newline-terminated".into()));
    }
    let header: AmfHeader = serde_json::from_slice(&line[..line.len() - 1])?;
    if header.dtype != "c128" {
        return Err(Error::Format(format!("unsupported dtype {}", header.dtype)));
    }
    if header.n != header.period.len() || header.n != header.samples.len() {
        return Err(Error::Format("n does not match the L/N arrays".into()));
    }
    let spec = GridSpec::new(header.period, header.samples)?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() != 16 * spec.len() {
        return Err(Error::Format(format!(
            "expected {} samples, payload holds {} bytes",
            spec.len(),
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    SampledField::new(spec, values)
}

pub fn save_amf(f: &SampledField, path: impl AsRef<std::path::Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_amf(f, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_amf(path: impl AsRef<std::path::Path>) -> Result<SampledField> {
    let file = std::fs::File::open(path)?;
    read_amf(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(spec: GridSpec, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..spec.len())
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        SampledField::new(spec, values).unwrap()
    }

    /// Direct O(N^2) evaluation of the Fourier sum, 1-D.
    fn dft_oracle(f: &SampledField, m: i64) -> Complex64 {
        let spec = f.spec();
        let l = spec.period()[0] as f64;
        let h = spec.spacing(0);
        f.values()
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x = spec.position(0, j);
                v * Complex64::from_polar(h, -2.0 * std::f64::consts::PI * x * m as f64 / l)
            })
            .sum()
    }

    #[test]
    fn grid_rejects_bad_geometry() {
        assert!(GridSpec::new(vec![], vec![]).is_err());
        assert!(GridSpec::new(vec![4], vec![63]).is_err());
        assert!(GridSpec::new(vec![4, 4], vec![64]).is_err());
        assert!(GridSpec::new(vec![0], vec![64]).is_err());
    }

    #[test]
    fn window_compatibility_is_strict() {
        let fam = WindowFamily::new(2, 4, Default::default()).unwrap();
        assert!(GridSpec::uniform(2, 4, 64)
            .unwrap()
            .check_window_compat(&fam)
            .is_ok());
        assert!(GridSpec::uniform(2, 4, 40)
            .unwrap()
            .check_window_compat(&fam)
            .is_err());
        assert!(GridSpec::uniform(2, 16, 64)
            .unwrap()
            .check_window_compat(&fam)
            .is_err());
        assert!(GridSpec::uniform(3, 4, 64)
            .unwrap()
            .check_window_compat(&fam)
            .is_err());
    }

    #[test]
    fn constant_maps_to_single_coefficient() {
        let spec = GridSpec::uniform(1, 1, 16).unwrap();
        let f = SampledField::from_fn(spec, |_| c(1.0, 0.0)).unwrap();
        let s = forward_transform(&f);
        assert!((s.get(&[0]) - c(1.0, 0.0)).norm() < 1e-14);
        let rest: f64 = (-8..8).filter(|&m| m != 0).map(|m| s.get(&[m]).norm()).sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn pure_tone_maps_to_single_coefficient() {
        let spec = GridSpec::uniform(1, 1, 32).unwrap();
        let s = forward_transform(&SampledField::tone(spec, &[3]).unwrap());
        assert!((s.get(&[3]) - c(1.0, 0.0)).norm() < 1e-13);
        let rest: f64 = (-16..16).filter(|&m| m != 3).map(|m| s.get(&[m]).norm()).sum();
        assert!(rest < 1e-12);

        // integer tone on a longer period sits at m = k L with weight L^n
        let spec = GridSpec::uniform(2, 4, 32).unwrap();
        let s = forward_transform(&SampledField::tone(spec, &[1, -2]).unwrap());
        assert!((s.get(&[4, -8]) - c(16.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn forward_matches_direct_sum() {
        let spec = GridSpec::uniform(1, 3, 24).unwrap();
        let f = random_field(spec, 3);
        let s = forward_transform(&f);
        for m in -12..12 {
            assert!((s.get(&[m]) - dft_oracle(&f, m)).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        for (spec, seed) in [
            (GridSpec::uniform(1, 4, 64).unwrap(), 1),
            (GridSpec::new(vec![4, 16], vec![32, 64]).unwrap(), 2),
            (GridSpec::uniform(3, 2, 16).unwrap(), 3),
        ] {
            let f = random_field(spec.clone(), seed);
            let s = forward_transform(&f);
            let back = inverse_transform(&s);
            assert!(back.relative_error(&f) <= 1e-12);

            let l2 = lp_norm(&f, 2.0).unwrap();
            let spectral: f64 = s.coefficients().iter().map(|v| v.norm_sqr()).sum::<f64>() / spec.volume();
            assert!((l2 - spectral.sqrt()).abs() / l2 <= 1e-10);
        }
    }

    #[test]
    fn linearity_of_transform() {
        let spec = GridSpec::uniform(2, 4, 32).unwrap();
        let f = random_field(spec.clone(), 10);
        let g = random_field(spec, 11);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
        let lhs = forward_transform(&f.combine(a, &g, b).unwrap());
        let fs = forward_transform(&f);
        let gs = forward_transform(&g);
        let resid = lhs
            .coefficients()
            .iter()
            .zip(fs.coefficients().iter().zip(gs.coefficients()))
            .map(|(l, (x, y))| (l - (a * x + b * y)).norm())
            .fold(0.0, f64::max);
        assert!(resid <= 1e-13 * lhs.coefficients().iter().map(|v| v.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn delta_and_zero_spectra() {
        let spec = GridSpec::uniform(2, 4, 32).unwrap();
        let mut s = Spectrum::zeros(spec.clone());
        s.set(&[8, -4], c(16.0, 0.0)).unwrap();
        let f = inverse_transform(&s);
        let tone = SampledField::tone(spec.clone(), &[2, -1]).unwrap();
        assert!(f.max_abs_difference(&tone) < 1e-13);
        assert_eq!(inverse_transform(&Spectrum::zeros(spec)).max_abs(), 0.0);
        assert!(s.clone().set(&[99, 0], c(1.0, 0.0)).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let spec = GridSpec::uniform(2, 4, 16).unwrap();
        let f = SampledField::from_fn(spec.clone(), |_| c(0.0, -3.0)).unwrap();
        for p in [0.5, 1.0, 2.0, 3.5] {
            let want = 3.0 * 16f64.powf(1.0 / p);
            assert!((lp_norm(&f, p).unwrap() - want).abs() < 1e-12 * want);
        }
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 3.0);
        let tone = SampledField::tone(spec, &[1, 1]).unwrap();
        assert!((lp_norm(&tone, 4.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(lp_norm(&tone, 0.0).is_err());
        assert!(lp_norm(&tone, -1.0).is_err());
        assert!(lp_norm(&tone, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_l2_norm() {
        // int exp(-2 pi x^2) dx = 2^{-1/2}, so the L2 norm is 2^{-1/4}
        let spec = GridSpec::uniform(1, 16, 512).unwrap();
        let f = SampledField::from_fn(spec, |x| c((-std::f64::consts::PI * x[0] * x[0]).exp(), 0.0)).unwrap();
        let got = lp_norm(&f, 2.0).unwrap();
        assert!((got - 2f64.powf(-0.25)).abs() < 1e-6);
    }

    #[test]
    fn slicing_examples() {
        let spec = GridSpec::new(vec![4, 8], vec![32, 16]).unwrap();
        let f =
            SampledField::from_fn(spec.clone(), |x| c(x[0].cos(), x[0]) * c(1.0 + x[1] * x[1], 0.5)).unwrap();
        let sliced = slice_last_axis(&f).unwrap();
        assert_eq!(sliced.spec(), &GridSpec::new(vec![4], vec![32]).unwrap());
        for (j, v) in sliced.values().iter().enumerate() {
            let x = sliced.spec().position(0, j);
            assert!((v - c(x.cos(), x) * c(1.0, 0.5)).norm() < 1e-15);
        }
        let tone = slice_last_axis(&SampledField::tone(spec.clone(), &[1, 3]).unwrap()).unwrap();
        let want = SampledField::tone(tone.spec().clone(), &[1]).unwrap();
        assert!(tone.max_abs_difference(&want) < 1e-14);
        assert_eq!(
            slice_last_axis(&SampledField::zeros(spec)).unwrap().max_abs(),
            0.0
        );
        let line = SampledField::zeros(GridSpec::uniform(1, 4, 8).unwrap());
        assert!(slice_last_axis(&line).is_err());
    }

    #[test]
    fn resampling_preserves_band_limited_fields() {
        let spec = GridSpec::uniform(2, 4, 32).unwrap();
        let f = SampledField::tone(spec, &[1, -2]).unwrap();
        let fine = f.resample(vec![64, 64]).unwrap();
        let want = SampledField::tone(fine.spec().clone(), &[1, -2]).unwrap();
        assert!(fine.max_abs_difference(&want) < 1e-12);
    }

    #[test]
    fn amf_round_trip_and_validation() {
        let spec = GridSpec::new(vec![4, 8], vec![8, 4]).unwrap();
        let f = random_field(spec, 5);
        let mut buf = Vec::new();
        write_amf(&f, &mut buf).unwrap();
        let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..header_end]).unwrap();
        assert_eq!(header["n"], 2);
        assert_eq!(header["L"], serde_json::json!([4, 8]));
        assert_eq!(header["N"], serde_json::json!([8, 4]));
        assert_eq!(header["dtype"], "c128");
        assert_eq!(buf.len() - header_end - 1, 32 * 16);
        let back = read_amf(&buf[..]).unwrap();
        assert_eq!(back, f);

        let truncated = &buf[..buf.len() - 16];
        assert!(matches!(read_amf(truncated), Err(Error::Format(_))));
        let bad = b"{\"n\":1,\"L\":[4],\"N\":[8],\"dtype\":\"f64\"}\n";
        assert!(matches!(read_amf(&bad[..]), Err(Error::Format(_))));
        let mismatched = b"{\"n\":2,\"L\":[4],\"N\":[8],\"dtype\":\"c128\"}\n";
        assert!(read_amf(&mismatched[..]).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_exact_values() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    proptest! {
        #[test]
        fn slicing_commutes_with_linear_combinations(
            seed in 0u64..1000, ar in -2.0f64..2.0, bi in -2.0f64..2.0,
        ) {
            let spec = GridSpec::new(vec![4, 4], vec![8, 16]).unwrap();
            let f = random_field(spec.clone(), seed);
            let g = random_field(spec, seed + 1);
            let (a, b) = (c(ar, 0.0), c(0.0, bi));
            let lhs = slice_last_axis(&f.combine(a, &g, b).unwrap()).unwrap();
            let rhs = slice_last_axis(&f).unwrap()
                .combine(a, &slice_last_axis(&g).unwrap(), b).unwrap();
            prop_assert!(lhs.max_abs_difference(&rhs) <= 1e-14);
        }
    }
}

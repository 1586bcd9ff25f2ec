//! Field-level checks: trace inequality, retraction, maximal-norm
//! equivalence, the vector-valued maximal inequality and the regularity scan.

use crate::decomposition::{maximal_op, BandSet, Decomposer, MaximalParams, ShiftLattice};
use crate::error::{Error, Result};
use crate::field::{lp_norm, pairwise_sum, SampledField};
use crate::norms::{lq_sum, maximal_wiener_norm, wiener_norm, NormSpec};
use crate::partition::WindowFamily;
use crate::trace::{extend, extension_weight, trace, ExtensionProfile};
use crate::verify::corpus::CorpusMember;
use crate::verify::report::ReportRow;
use crate::verify::Exponent;

/// Slack for inequalities that hold exactly up to roundoff.
pub const ROUNDOFF_SLACK: f64 = 1e-12;

fn finite_exponents(p: f64, q: f64) -> Result<()> {
    if p.is_infinite() || q.is_infinite() {
        return Err(Error::InvalidParameter(
            "the trace estimate needs finite p and q".into(),
        ));
    }
    Ok(())
}

fn pq(p: f64, q: f64, s: f64) -> String {
    format!("p={};q={};s={}", Exponent(p), Exponent(q), s)
}

/// `||T f||_{W^{p,q}_s} / ||f||_{W^{p,q,min(1,q)}_s}` from band sets of `f`
/// and of its trace.
pub fn trace_inequality_row(
    full: &BandSet,
    traced: &BandSet,
    p: f64,
    q: f64,
    s: f64,
    label: &str,
) -> Result<ReportRow> {
    finite_exponents(p, q)?;
    let lhs = wiener_norm(traced, &NormSpec::isotropic(p, q, s))?;
    let rhs = crate::norms::aniso_norm(full, &NormSpec::aniso_last(p, q, q.min(1.0), s))?;
    Ok(ReportRow::recorded(
        "trace_inequality",
        format!("{};{label}", pq(p, q, s)),
        lhs,
        rhs,
    ))
}

pub fn check_trace_inequality(
    f: &SampledField,
    p: f64,
    q: f64,
    s: f64,
    family: &WindowFamily,
) -> Result<ReportRow> {
    let n = f.dimension();
    let full = Decomposer::new(f.spec().clone(), *family)?.decompose(f)?;
    let tf = trace(f)?;
    let traced = Decomposer::new(tf.spec().clone(), family.with_dimension(n - 1)?)?.decompose(&tf)?;
    trace_inequality_row(&full, &traced, p, q, s, "field")
}

/// For `q >= 1` the `l^1` outer layer dominates the `l^q` one, so the
/// denominator with `r = q` never exceeds the one with `r = 1`.
pub fn denominator_order_row(
    full: &BandSet,
    p: f64,
    q: f64,
    s: f64,
    label: &str,
) -> Result<Option<ReportRow>> {
    if q < 1.0 {
        return Ok(None);
    }
    let with_q = crate::norms::aniso_norm(full, &NormSpec::aniso_last(p, q, q, s))?;
    let with_one = crate::norms::aniso_norm(full, &NormSpec::aniso_last(p, q, 1.0, s))?;
    let ratio = with_q / with_one;
    Ok(Some(ReportRow::with_pass(
        "trace_denominator_order",
        format!("{};{label}", pq(p, q, s)),
        with_q,
        with_one,
        Some(1.0),
        with_q <= with_one * (1.0 + ROUNDOFF_SLACK) || ratio.is_nan() && with_q == 0.0,
    )))
}

/// `||(sum_{k_n} |box_{k_n} w|^r)^{1/r}||_{L^p}` on the extension axis,
/// which is what the retraction ratio reduces to for any base field.
pub fn weight_factor(weight_bands: &BandSet, p: f64, r: f64) -> Result<f64> {
    wiener_norm(weight_bands, &NormSpec::isotropic(p, r, 0.0))
}

/// Everything needed to extend `(n-1)`-dimensional fields onto one target.
pub struct RetractionSetup {
    pub profile: ExtensionProfile,
    pub base: Decomposer,
    pub target: Decomposer,
    pub weight: BandSet,
}

impl RetractionSetup {
    pub fn new(
        base: crate::field::GridSpec,
        target: crate::field::GridSpec,
        family: WindowFamily,
        profile: ExtensionProfile,
    ) -> Result<Self> {
        let n = target.dimension();
        let w = extension_weight(&profile, target.period()[n - 1], target.samples()[n - 1])?;
        let weight = Decomposer::new(w.spec().clone(), family.with_dimension(1)?)?.decompose(&w)?;
        Ok(Self {
            profile,
            base: Decomposer::new(base, family.with_dimension(n - 1)?)?,
            target: Decomposer::new(target, family)?,
            weight,
        })
    }
}

/// Identity, band-vanishing and factorization rows for `extend(g)`, plus one
/// ratio row per exponent set. The ratio rows carry the direct weight
/// factor in `rhs` of a companion `retraction_factor` row.
pub fn check_retraction(
    g: &SampledField,
    setup: &RetractionSetup,
    exponents: &[(f64, f64, f64)],
    label: &str,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let e = extend(g, &setup.profile, setup.target.spec())?;
    let identity = trace(&e)?.relative_error(g);
    rows.push(ReportRow::residual(
        "retraction_identity",
        label.to_owned(),
        identity,
        lp_norm(g, 2.0)?,
        1e-10,
    ));
    let e_bands = setup.target.decompose(&e)?;
    let g_bands = setup.base.decompose(g)?;
    let (factor, high) = crate::trace::factorization_residuals(&e_bands, &g_bands, &setup.weight)?;
    rows.push(ReportRow::residual(
        "extension_factorization",
        label.to_owned(),
        factor,
        e.max_abs(),
        1e-10,
    ));
    rows.push(ReportRow::residual(
        "extension_band_vanishing",
        label.to_owned(),
        high,
        e.max_abs(),
        1e-12,
    ));
    for &(p, q, s) in exponents {
        finite_exponents(p, q)?;
        let r = q.min(1.0);
        let num = crate::norms::aniso_norm(&e_bands, &NormSpec::aniso_last(p, q, r, s))?;
        let den = wiener_norm(&g_bands, &NormSpec::isotropic(p, q, s))?;
        let params = format!("{};{label}", pq(p, q, s));
        let row = ReportRow::recorded("retraction_ratio", params.clone(), num, den);
        let direct = weight_factor(&setup.weight, p, r)?;
        let deviation = (row.ratio - direct).abs() / direct;
        rows.push(row);
        rows.push(ReportRow::residual(
            "retraction_factor",
            params,
            deviation,
            direct,
            1e-6,
        ));
    }
    Ok(rows)
}

/// Lower ratio `plain / maximal` (at most 1, bounded only when
/// `b > n / min(p, q)`) and the recorded upper ratio `maximal / plain`.
pub fn check_maximal_equivalence(
    bands: &BandSet,
    spec: &NormSpec,
    shifts: ShiftLattice,
    label: &str,
) -> Result<Vec<ReportRow>> {
    let plain = crate::norms::evaluate(bands, &spec.plain())?;
    let maximal = maximal_wiener_norm(bands, spec, shifts)?;
    let b = spec.b.expect("maximal spec");
    let read = match shifts {
        ShiftLattice::Integer => "lattice",
        ShiftLattice::Grid => "grid",
    };
    let params = format!(
        "{};b={b};read={read};{}{label}",
        pq(spec.p, spec.q, spec.s),
        if spec.maximal_threshold_met(bands.dimension()) {
            ""
        } else {
            "below_threshold;"
        },
    );
    let lower = if spec.maximal_threshold_met(bands.dimension()) {
        ReportRow::with_pass(
            "maximal_lower",
            params.clone(),
            plain,
            maximal,
            Some(1.0),
            plain <= maximal * (1.0 + ROUNDOFF_SLACK),
        )
    } else {
        ReportRow::recorded("maximal_lower", params.clone(), plain, maximal)
    };
    Ok(vec![
        lower,
        ReportRow::recorded("maximal_upper", params, maximal, plain),
    ])
}

/// `||(sum_k |f_k^*|^q)^{1/q}||_p / ||(sum_k |f_k|^q)^{1/q}||_p` with
/// `f_k = box_k f`, `f_k^*(x) = sup_z |f_k(x - z)| / (1 + |d_k z|^{n/r})` over
/// sample shifts and `d_k = 2 sqrt n`, the diameter of a window support.
pub fn check_triebel_maximal(bands: &BandSet, p: f64, q: f64, r: f64, label: &str) -> Result<ReportRow> {
    if !(r > 0.0 && r < p.min(q)) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < r < min(p, q), got r={r} with p={p}, q={q}"
        )));
    }
    let n = bands.dimension();
    let params = MaximalParams {
        b: n as f64 / r,
        scale: 2.0 * (n as f64).sqrt(),
        shifts: ShiftLattice::Grid,
    };
    let live: Vec<_> = bands.components().iter().filter(|c| !c.is_zero()).collect();
    let plain: Vec<Vec<f64>> = live.iter().map(|c| c.magnitudes()).collect();
    let maximal: Vec<Vec<f64>> = live
        .iter()
        .map(|c| Ok(maximal_op(c, &params)?.into_values()))
        .collect::<Result<_>>()?;
    let norm = |mags: &[Vec<f64>]| -> f64 {
        let profile: Vec<f64> = (0..bands.spec().len())
            .map(|x| lq_sum(mags.iter().map(|m| m[x]), q))
            .collect();
        crate::field::lp_of_magnitudes(&profile, bands.spec().cell_volume(), p)
    };
    let (lhs, rhs) = (norm(&maximal), norm(&plain));
    Ok(ReportRow::recorded(
        "triebel_maximal",
        format!("p={};q={};r={r};b={};{label}", Exponent(p), Exponent(q), params.b),
        lhs,
        rhs,
    ))
}

/// For each `s`, the largest `||T f||_{W^{p,q}_s} / ||f||_{W^{p,q}_{s + 1/(1 ^ q) - 1/q + eps}}`
/// over the corpus. Recorded only.
#[allow(clippy::too_many_arguments)]
pub fn regularity_scan(
    p: f64,
    q: f64,
    s_grid: &[f64],
    epsilon: f64,
    corpus: &[CorpusMember],
    family: &WindowFamily,
) -> Result<Vec<ReportRow>> {
    finite_exponents(p, q)?;
    let Some(first) = corpus.first() else {
        return Ok(Vec::new());
    };
    let spec = first.spectrum().spec().clone();
    let n = spec.dimension();
    let full = Decomposer::new(spec.clone(), *family)?;
    let reduced = Decomposer::new(spec.drop_last_axis()?, family.with_dimension(n - 1)?)?;
    let pairs: Vec<(BandSet, BandSet)> = corpus
        .iter()
        .map(|m| {
            let f = m.field();
            Ok((full.decompose(&f)?, reduced.decompose(&trace(&f)?)?))
        })
        .collect::<Result<_>>()?;
    let loss = 1.0 / q.min(1.0) - 1.0 / q + epsilon;
    s_grid
        .iter()
        .map(|&s| {
            let mut best: Option<(f64, f64, f64, usize)> = None;
            for (i, (bands, traced)) in pairs.iter().enumerate() {
                let lhs = wiener_norm(traced, &NormSpec::isotropic(p, q, s))?;
                let rhs = wiener_norm(bands, &NormSpec::isotropic(p, q, s + loss))?;
                let ratio = lhs / rhs;
                if best.is_none_or(|b| ratio > b.2) {
                    best = Some((lhs, rhs, ratio, i));
                }
            }
            let (lhs, rhs, _, i) = best.expect("nonempty corpus");
            Ok(ReportRow::recorded(
                "regularity_scan",
                format!("{};eps={epsilon};argmax={}", pq(p, q, s), corpus[i].label()),
                lhs,
                rhs,
            ))
        })
        .collect()
}

/// Coefficient of variation of `values` (0 for fewer than two values).
pub fn coefficient_of_variation(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / values.len() as f64;
    if values.len() < 2 {
        return (0.0, mean);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let sd = (pairwise_sum(&dev) / (values.len() - 1) as f64).sqrt();
    (sd / mean.abs(), mean)
}

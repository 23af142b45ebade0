use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Estimate, Mapping, QuadSpec};
use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_270_303,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Weights of the embedded 10-point Gauss rule on XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

const MAX_SEGMENTS: usize = 20_000;

struct Rule {
    value: f64,
    error: f64,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Rule> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    if !res_k.is_finite() {
        let bad = std::iter::once((center, fc))
            .chain((0..10).flat_map(|j| {
                [
                    (center - half * XGK[j], fv1[j]),
                    (center + half * XGK[j], fv2[j]),
                ]
            }))
            .find(|(_, v)| !v.is_finite())
            .map(|(t, _)| t)
            .unwrap_or(center);
        return Err(Error::Domain(format!("integrand is not finite at t = {bad:e}")));
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Rule { value, error })
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// error meets `max(abs_tol, rel_tol·|value|)`. The returned pair is the best
/// (smallest-error) state seen along the way, so tightening a tolerance never
/// increases the returned error.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::adaptive(0.0, 0.0, 0));
    }
    if a > b {
        return integrate(f, b, a, spec).map(|e| -e);
    }
    let first = gk21(&f, a, b)?;
    let mut evaluations: u64 = 21;
    let mut total_value = first.value;
    let mut total_error = first.error;
    let mut best = (total_value, total_error);
    let mut frozen_error = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: first.value,
        error: first.error,
        depth: 0,
    });
    let mut segments = 1usize;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total_value.abs());
        if total_error <= best.1 {
            best = (total_value, total_error);
        }
        if total_error <= tol {
            return Ok(Estimate::adaptive(best.0, best.1, evaluations));
        }
        if frozen_error > tol || segments >= MAX_SEGMENTS {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        let too_narrow = mid <= seg.a || mid >= seg.b || (seg.b - seg.a) <= 4.0 * f64::EPSILON * seg.a.abs().max(seg.b.abs());
        if seg.depth >= spec.max_depth || too_narrow {
            frozen_error += seg.error;
            continue;
        }
        let left = gk21(&f, seg.a, mid)?;
        let right = gk21(&f, mid, seg.b)?;
        evaluations += 42;
        segments += 1;
        total_value += left.value + right.value - seg.value;
        total_error += left.error + right.error - seg.error;
        for (lo, hi, r) in [(seg.a, mid, left), (mid, seg.b, right)] {
            heap.push(Segment {
                a: lo,
                b: hi,
                value: r.value,
                error: r.error,
                depth: seg.depth + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        value: best.0,
        error: best.1,
        evaluations,
    })
}

/// Integrate `f` over `[0, ∞)` using the mapping selected in `spec`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, spec: &QuadSpec) -> Result<Estimate> {
    match spec.mapping {
        Mapping::Rational => integrate(rational_map(&f), 0.0, 1.0, spec),
        Mapping::Exponential => {
            let head = integrate(&f, 0.0, 1.0, spec)?;
            let tail_fn = |v: f64| {
                let t = v.exp();
                if !t.is_finite() {
                    return 0.0;
                }
                far_field(f(t) * t, t)
            };
            let tail = integrate(rational_map(&tail_fn), 0.0, 1.0, spec)?;
            Ok(head + tail)
        }
        Mapping::None => {
            let mut total = Estimate::adaptive(0.0, 0.0, 0);
            let mut prev: Option<f64> = None;
            for j in 0..1000 {
                let lo = (2f64).powi(j) - 1.0;
                let hi = (2f64).powi(j + 1) - 1.0;
                let part = integrate(&f, lo, hi, spec)?;
                total = total + part;
                let tol = spec.abs_tol.max(spec.rel_tol * total.value.abs());
                let size = part.value.abs();
                // Geometric model of the remaining tail from the last two pieces.
                let tail = match prev {
                    Some(p) if size == 0.0 && p == 0.0 => Some(0.0),
                    Some(p) if size < p => {
                        let q = size / p;
                        Some(size * q / (1.0 - q))
                    }
                    _ => None,
                };
                prev = Some(size);
                if let Some(t) = tail {
                    if j >= 2 && t <= tol {
                        total.error += t;
                        return Ok(total);
                    }
                }
            }
            Err(Error::NonConvergence {
                value: total.value,
                error: total.error,
                evaluations: total.evaluations,
            })
        }
    }
}

// Overflow far out on the mapped half-line stands for a vanishing tail.
fn far_field(y: f64, t: f64) -> f64 {
    if !y.is_finite() && t > 1e100 {
        0.0
    } else {
        y
    }
}

fn rational_map<F: Fn(f64) -> f64>(f: &F) -> impl Fn(f64) -> f64 + '_ {
    move |u: f64| {
        let w = 1.0 - u;
        let t = u / w;
        if !t.is_finite() {
            return 0.0;
        }
        far_field(f(t) / (w * w), t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec() -> QuadSpec {
        QuadSpec::default()
    }

    #[test]
    fn finite_interval_polynomial_is_exact() {
        let e = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, &spec()).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((e.value - exact).abs() < 1e-12);
        let r = integrate(|x| x * x, 1.0, 0.0, &spec()).unwrap();
        assert!((r.value + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_examples() {
        for mapping in [Mapping::Rational, Mapping::Exponential, Mapping::None] {
            let s = spec().with_mapping(mapping);
            let a = integrate_semi_infinite(|t| (1.0 + t * t).powf(-1.5), &s).unwrap();
            assert!((a.value - 1.0).abs() < 1e-7, "{mapping:?}: {a:?}");
            let b = integrate_semi_infinite(|t: f64| (-t).exp(), &s).unwrap();
            assert!((b.value - 1.0).abs() < 1e-7, "{mapping:?}: {b:?}");
            let c = integrate_semi_infinite(|t| t * t / (1.0 + t * t).powi(2), &s).unwrap();
            assert!((c.value - PI / 4.0).abs() < 1e-7, "{mapping:?}: {c:?}");
        }
    }

    #[test]
    fn rational_map_handles_polynomial_decay() {
        let e = integrate_semi_infinite(|t| 1.0 / (1.0 + t * t).powi(2), &spec()).unwrap();
        assert!((e.value - PI / 4.0).abs() < 1e-10);
        assert!(e.error <= 1e-8 * PI / 4.0 + 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let e = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &spec()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_mapping_resolves_slow_tails() {
        // ∫₀^∞ (1+t)^{-1.05} dt = 20
        let s = spec().with_mapping(Mapping::Exponential);
        let e = integrate_semi_infinite(|t: f64| (1.0 + t).powf(-1.05), &s).unwrap();
        assert!((e.value - 20.0).abs() < 1e-6, "{e:?}");
    }

    #[test]
    fn non_convergence_carries_best_estimate() {
        let s = QuadSpec {
            max_depth: 3,
            ..spec()
        };
        match integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &s) {
            Err(Error::NonConvergence { value, error, .. }) => {
                assert!(value.is_finite() && error > 0.0)
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = integrate(|x: f64| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, &spec());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn tighter_tolerance_never_increases_error() {
        let f = |t: f64| (t * 3.0).cos() * (-t * t).exp() / (1.0 + t).sqrt();
        let mut tol = 1e-3;
        let mut prev = f64::INFINITY;
        while tol > 1e-12 {
            let e = integrate_semi_infinite(f, &QuadSpec::with_tol(tol, 1e-300)).unwrap();
            assert!(e.error <= prev, "tol {tol}: {} > {prev}", e.error);
            prev = e.error;
            tol /= 2.0;
        }
    }
}

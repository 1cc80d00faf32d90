//! Adaptive Gauss–Kronrod (10/21 point) quadrature.
//!
//! Intervals are bisected greedily by largest local error until the summed
//! error estimate is below the requested absolute tolerance. Callers can
//! force breakpoints (coefficient knots), request the power substitution
//! `y = lo + (hi - lo) u^k` for an integrable endpoint singularity at `lo`,
//! or integrate over `[lo, ∞)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_365,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for the odd Kronrod abscissae XGK[1], XGK[3], ...
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    /// False when the subdivision budget ran out before reaching `tol`;
    /// `value` is then the best available estimate.
    pub converged: bool,
}

impl QuadratureResult {
    fn exact(value: f64) -> Self {
        Self {
            value,
            error_estimate: 0.0,
            evaluations: 1,
            converged: true,
        }
    }
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    roundoff: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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

fn rescale_error(err: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    scaled
}

/// One 21-point Kronrod pass. Returns (value, error, roundoff floor).
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let abs_half = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_asc * abs_half);
    let roundoff = 50.0 * f64::EPSILON * res_abs * abs_half;
    (value, err, roundoff)
}

/// Adaptive integration of `f` over `[lo, hi]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> QuadratureResult {
    integrate_with_breakpoints(f, lo, hi, &[], tol)
}

/// Like [`integrate`], but every point of `breaks` strictly inside
/// `(lo, hi)` starts as a segment boundary.
pub fn integrate_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: f64,
) -> QuadratureResult {
    assert!(lo <= hi, "integrate: lo = {lo} > hi = {hi}");
    assert!(tol > 0.0, "integrate: tol must be positive");
    if lo == hi {
        return QuadratureResult::exact(0.0);
    }
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(hi);

    let mut heap = BinaryHeap::with_capacity(64);
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        let (value, error, roundoff) = gk21(&mut f, w[0], w[1]);
        evaluations += 21;
        heap.push(Segment {
            lo: w[0],
            hi: w[1],
            value,
            error,
            roundoff,
        });
    }

    let mut converged = false;
    loop {
        let total_err: f64 = heap.iter().map(|s| s.error).sum();
        let total_val: f64 = heap.iter().map(|s| s.value).sum();
        let floor: f64 = heap.iter().map(|s| s.roundoff).sum();
        if total_err <= tol.max(floor) || total_err <= 4.0 * f64::EPSILON * total_val.abs() {
            converged = true;
            break;
        }
        if heap.len() >= MAX_INTERVALS {
            break;
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval can no longer be split in floating point
            heap.push(worst);
            break;
        }
        for (a, b) in [(worst.lo, mid), (mid, worst.hi)] {
            let (value, error, roundoff) = gk21(&mut f, a, b);
            evaluations += 21;
            heap.push(Segment {
                lo: a,
                hi: b,
                value,
                error,
                roundoff,
            });
        }
    }

    // Sum in interval order so the result does not depend on heap layout.
    let mut segs = heap.into_vec();
    segs.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    QuadratureResult {
        value: segs.iter().map(|s| s.value).sum(),
        error_estimate: segs.iter().map(|s| s.error).sum(),
        evaluations,
        converged,
    }
}

/// Integrate `f` on `(lo, hi]` where `f(y) ~ (y - lo)^exponent` as `y ↓ lo`,
/// with `exponent > -1`. Uses `y = lo + (hi - lo) u^k`, `k = 1/(1 + exponent)`,
/// which turns the leading singular term into a constant.
pub fn integrate_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    exponent: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    if exponent <= -1.0 {
        return Err(Error::NonIntegrable(format!(
            "endpoint exponent {exponent} <= -1"
        )));
    }
    if exponent >= 0.0 {
        return Ok(integrate(f, lo, hi, tol));
    }
    let k = 1.0 / (1.0 + exponent);
    let width = hi - lo;
    let res = integrate(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let y = lo + width * u.powf(k);
            f(y) * width * k * u.powf(k - 1.0)
        },
        0.0,
        1.0,
        tol,
    );
    Ok(res)
}

/// Integrate `f` over `[lo, ∞)` via `y = lo + (1 - u)/u`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, lo: f64, tol: f64) -> QuadratureResult {
    integrate(
        |u: f64| {
            let y = lo + (1.0 - u) / u;
            let v = f(y) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

//! Adaptive Gauss–Kronrod (G10/K21) quadrature on finite intervals.
//!
//! The integrator is vector valued: one pass over the abscissae produces
//! several integrals that share a weight function, which is how the
//! parabolic-cylinder moments are evaluated. Subintervals are refined in
//! order of decreasing error estimate until every component satisfies
//! `err <= max(abs_tol, rel_tol * max(|I_k|, scale_k))`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
    0.123_491_976_262_065_851_077_958_109_831,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Tolerances and limits for [`integrate_vec`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-12, max_subdivisions: 2000 }
    }
}

/// Integral estimates and error bounds for each component.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    // Largest error normalised by its component's tolerance scale.
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn kronrod21<const N: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; N], [f64; N])
where
    F: FnMut(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let mut res_abs = [0.0; N];
    let mut nodes = [[0.0; N]; 21];
    nodes[20] = fc;
    for k in 0..N {
        kronrod[k] = fc[k] * WGK[10];
        res_abs[k] = fc[k].abs() * WGK[10];
    }
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(10).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] += w * s;
            res_abs[k] += w * (f1[k].abs() + f2[k].abs());
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
        nodes[2 * j] = f1;
        nodes[2 * j + 1] = f2;
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        // QUADPACK error heuristic: rescale |K - G| by the integrand's
        // variation and never claim less than the rounding floor.
        let mean = 0.5 * kronrod[k];
        let mut res_asc = WGK[10] * (fc[k] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((nodes[2 * j][k] - mean).abs() + (nodes[2 * j + 1][k] - mean).abs());
        }
        let res_asc = res_asc * half.abs();
        let res_abs = res_abs[k] * half.abs();
        let mut err = ((kronrod[k] - gauss[k]) * half).abs();
        if res_asc != 0.0 && err != 0.0 {
            err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
        }
        if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * res_abs);
        }
        value[k] = kronrod[k] * half;
        error[k] = err;
    }
    (value, error)
}

/// Integrates a vector-valued function over `[a, b]`.
///
/// `scale` supplies a floor for the relative tolerance of each component,
/// which matters for components whose integral may legitimately be close to
/// zero (centred moments, for instance).
pub fn integrate_vec<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    scale: [f64; N],
    cfg: &QuadConfig,
) -> Result<QuadResult<N>>
where
    F: FnMut(f64) -> [f64; N],
{
    if a == b {
        return Ok(QuadResult { value: [0.0; N], error: [0.0; N], evaluations: 0 });
    }
    let tol = |total: &[f64; N], k: usize| {
        cfg.abs_tol.max(cfg.rel_tol * total[k].abs().max(scale[k].abs()))
    };
    let priority = |err: &[f64; N], total: &[f64; N]| {
        (0..N).map(|k| err[k] / tol(total, k)).fold(0.0_f64, f64::max)
    };

    let (v0, e0) = kronrod21(&mut f, a, b);
    let mut evaluations = 21;
    let mut total_value = v0;
    let mut total_error = e0;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v0, error: e0, priority: priority(&e0, &v0) });

    let mut finished: Vec<Segment<N>> = Vec::new();
    let mut subdivisions = 1;
    loop {
        if (0..N).all(|k| total_error[k] <= tol(&total_value, k)) {
            break;
        }
        if subdivisions >= cfg.max_subdivisions {
            // The running error total can drift; re-sum before giving up.
            total_error = [0.0; N];
            for seg in heap.iter().chain(finished.iter()) {
                for (t, e) in total_error.iter_mut().zip(&seg.error) {
                    *t += e;
                }
            }
            if (0..N).all(|k| total_error[k] <= tol(&total_value, k)) {
                break;
            }
            let achieved = (0..N)
                .map(|k| total_error[k] / total_value[k].abs().max(scale[k].abs()).max(f64::MIN_POSITIVE))
                .fold(0.0_f64, f64::max);
            return Err(Error::QuadratureNonConvergence { achieved, requested: cfg.rel_tol });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further in floating point; accept it.
            for (t, e) in total_error.iter_mut().zip(&seg.error) {
                *t -= e;
            }
            finished.push(seg);
            continue;
        }
        let (vl, el) = kronrod21(&mut f, seg.a, mid);
        let (vr, er) = kronrod21(&mut f, mid, seg.b);
        evaluations += 42;
        for k in 0..N {
            total_value[k] += vl[k] + vr[k] - seg.value[k];
            total_error[k] += el[k] + er[k] - seg.error[k];
        }
        heap.push(Segment { a: seg.a, b: mid, value: vl, error: el, priority: priority(&el, &total_value) });
        heap.push(Segment { a: mid, b: seg.b, value: vr, error: er, priority: priority(&er, &total_value) });
        subdivisions += 1;
    }

    // Re-sum from the segments to shed accumulated rounding in the running totals.
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for seg in heap.iter().chain(finished.iter()) {
        for k in 0..N {
            value[k] += seg.value[k];
            error[k] += seg.error[k];
        }
    }
    Ok(QuadResult { value, error, evaluations })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_vec(|x| [f(x)], a, b, [0.0], cfg)?;
    Ok((r.value[0], r.error[0]))
}

/// Locates the point where a unimodal log-integrand has dropped by `drop`
/// below its peak value, searching from `peak` in direction `dir` (±1).
///
/// Steps start at `width` and double until the threshold is crossed, then the
/// crossing is refined by bisection.
pub(crate) fn tail_bound<F>(log_f: F, peak: f64, width: f64, drop: f64, dir: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let target = log_f(peak) - drop;
    let mut inner = peak;
    let mut step = width.max(1e-12);
    let mut outer = peak + dir * step;
    let mut guard = 0;
    while log_f(outer) > target && guard < 200 {
        inner = outer;
        step *= 2.0;
        outer = peak + dir * step;
        guard += 1;
    }
    for _ in 0..60 {
        let mid = 0.5 * (inner + outer);
        if log_f(mid) > target {
            inner = mid;
        } else {
            outer = mid;
        }
        if (outer - inner).abs() <= 1e-3 * width {
            break;
        }
    }
    outer
}

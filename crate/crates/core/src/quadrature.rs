//! Adaptive 7/15-point Gauss–Kronrod quadrature, plus a panel scheme for
//! exponentially damped integrands on `[a, inf)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadOptions {
    pub fn relative(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
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
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = kronrod15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut splits = 0;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if splits >= opts.max_subdivisions {
            if total_err > 10.0 * tol {
                return Err(Error::QuadratureFailed { a, b, error: total_err });
            }
            break;
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point; accept what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        splits += 1;
    }
    // re-sum to shed the drift of the running updates
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error, evaluations })
}

/// Integrates an exponentially damped `f` over `[a, inf)` panel by panel.
/// Panel widths start at `scale` and double; stops once a panel adds less than
/// `tail_cutoff` times the accumulated value.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    opts: QuadOptions,
    tail_cutoff: f64,
) -> Result<QuadResult> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("panel scale must be positive, got {scale}")));
    }
    let mut acc: f64 = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut left = a;
    let mut width = scale;
    let mut quiet = 0;
    for panel in 0..200 {
        let right = left + width;
        let local = QuadOptions {
            abs_tol: opts.abs_tol.max(opts.rel_tol * acc.abs() * 0.1),
            ..opts
        };
        let r = integrate(&mut f, left, right, local)?;
        acc += r.value;
        err += r.error;
        evals += r.evaluations;
        if r.value.abs() <= tail_cutoff * acc.abs() {
            quiet += 1;
            if quiet >= 2 && panel >= 2 {
                err += r.value.abs();
                return Ok(QuadResult { value: acc, error: err, evaluations: evals });
            }
        } else {
            quiet = 0;
        }
        if acc == 0.0 && panel > 60 {
            return Ok(QuadResult { value: 0.0, error: err, evaluations: evals });
        }
        left = right;
        width *= 2.0;
    }
    Err(Error::QuadratureFailed { a, b: f64::INFINITY, error: err })
}

/// [`integrate`] for integrands that can fail; the first error wins.
pub fn try_integrate<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    let mut failure = None;
    let r = integrate(|x| lift(&mut f, &mut failure, x), a, b, opts);
    match failure {
        Some(e) => Err(e),
        None => r,
    }
}

pub fn try_integrate_semi_infinite<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    scale: f64,
    opts: QuadOptions,
    tail_cutoff: f64,
) -> Result<QuadResult> {
    let mut failure = None;
    let r = integrate_semi_infinite(|x| lift(&mut f, &mut failure, x), a, scale, opts, tail_cutoff);
    match failure {
        Some(e) => Err(e),
        None => r,
    }
}

fn lift<F: FnMut(f64) -> Result<f64>>(f: &mut F, failure: &mut Option<Error>, x: f64) -> f64 {
    if failure.is_some() {
        return 0.0;
    }
    match f(x) {
        Ok(v) => v,
        Err(e) => {
            *failure = Some(e);
            0.0
        }
    }
}

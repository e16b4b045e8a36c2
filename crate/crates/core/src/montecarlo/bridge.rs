//! Exact sampling primitives for Brownian bridges.
//!
//! All functions work in units where the bridge has unit volatility unless a
//! variance argument says otherwise.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

const SERIES_TERMS: usize = 10_000;
const BISECTION_STEPS: usize = 200;

/// Minimum of a Brownian bridge from `a` to `b` with endpoint variance `var`,
/// given an Exp(1) draw `e`. Inverts `P(min <= m) = exp(-2 (a - m)(b - m) / var)`.
pub(crate) fn bridge_min(a: f64, b: f64, var: f64, e: f64) -> f64 {
    let d = b - a;
    0.5 * (a + b - (d * d + 2.0 * var * e).sqrt())
}

pub(crate) fn bridge_max(a: f64, b: f64, var: f64, e: f64) -> f64 {
    let d = b - a;
    0.5 * (a + b + (d * d + 2.0 * var * e).sqrt())
}

/// Inverse Gaussian draw; `mean = inf` gives the Levy distribution.
pub(crate) fn inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    let y = n * n;
    if !mean.is_finite() {
        return shape / y;
    }
    let r = mean * y / (2.0 * shape);
    let x = mean / (1.0 + r + (r * r + 2.0 * r).sqrt());
    let v: f64 = rng.random();
    if v * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    }
}

/// Time of the extremum of a unit-volatility bridge of length `l` whose
/// extremum lies at distances `da` and `db` from the start and end values.
///
/// With `V = theta / (l - theta)` the density is proportional to
/// `(1 + V) V^{-3/2} exp(-da^2 / (2 l V) - db^2 V / (2 l))`, which splits into
/// an inverse Gaussian part and a reciprocal inverse Gaussian part.
pub(crate) fn extreme_time<R: Rng + ?Sized>(da: f64, db: f64, l: f64, rng: &mut R) -> f64 {
    if !(da > 0.0) {
        return 0.0;
    }
    if !(db > 0.0) {
        return l;
    }
    let v: f64 = rng.random();
    let ratio = if v * (da + db) < db {
        inverse_gaussian(da / db, da * da / l, rng)
    } else {
        1.0 / inverse_gaussian(db / da, db * db / l, rng)
    };
    if ratio.is_infinite() {
        l
    } else {
        (l * ratio / (1.0 + ratio)).clamp(0.0, l)
    }
}

/// `P(sup < k)` for a 3-dimensional Bessel bridge from 0 to `y >= 0` over
/// time `s` (unit volatility).
///
/// Uses the image series `sum_j (1 + 2 j k / y) exp(-2 j k (j k + y) / s)`
/// with the terms `j` and `-j` folded together.
pub(crate) fn bes3_bridge_sup_cdf(k: f64, y: f64, s: f64) -> f64 {
    if k <= y {
        return 0.0;
    }
    if k * k < 0.0025 * s {
        // below exp(-1900)
        return 0.0;
    }
    let mut total = 1.0;
    for j in 1..=SERIES_TERMS {
        let jk = j as f64 * k;
        let a = 2.0 * jk * jk / s;
        let c = 2.0 * jk * y / s;
        let lead = (c - a).exp();
        let cosh_part = 0.5 * (lead + (-c - a).exp());
        let sinhc_part = if c > 0.0 {
            lead * -(-2.0 * c).exp_m1() / (2.0 * c)
        } else {
            (-a).exp()
        };
        total += 2.0 * (cosh_part - 2.0 * a * sinhc_part);
        if lead * (1.0 + 2.0 * a) < 1e-18 {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Supremum of a 3-dimensional Bessel bridge from 0 to `y` over time `s`, by
/// bisection on its distribution function at level `v`.
pub(crate) fn bes3_bridge_sup(y: f64, s: f64, v: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(y);
    }
    let root = s.sqrt();
    let mut lo = y;
    let mut hi = y + root;
    let mut grow = 0;
    while bes3_bridge_sup_cdf(hi, y, s) < v {
        lo = hi;
        hi += root * f64::powi(2.0, grow);
        grow += 1;
        if grow > 200 {
            return Err(Error::RejectionLimit(grow as usize));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if bes3_bridge_sup_cdf(mid, y, s) < v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn gauss(w: f64, t: f64) -> f64 {
    (-w * w / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// Density of the first passage of a 3-dimensional Bessel process from 0 to
/// `k`, up to the factor `k`.
fn bes3_passage_kernel(k: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for j in 0..SERIES_TERMS {
        let w = (2 * j + 1) as f64 * k;
        let g = gauss(w, t);
        sum += g * (w * w / t - 1.0) / t;
        if g == 0.0 || (w * w / (2.0 * t) > 50.0 && j > 0) {
            break;
        }
    }
    2.0 * sum
}

/// Density of the first passage from `y` to `k` of a Brownian motion killed
/// at 0, for `0 <= y < k`.
fn strip_passage_density(k: f64, y: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for j in 0..SERIES_TERMS as i64 {
        let mut done = true;
        for jj in [j, -j - 1] {
            let w = (2 * jj + 1) as f64 * k - y;
            let g = gauss(w, t);
            sum += w / t * g;
            if w * w / (2.0 * t) < 50.0 {
                done = false;
            }
        }
        if done {
            break;
        }
    }
    sum.max(0.0)
}

/// Time of the supremum of a 3-dimensional Bessel bridge from 0 to `y` over
/// `s`, given that the supremum equals `k`. Inverts the conditional
/// distribution function numerically.
pub(crate) fn bes3_bridge_sup_time(k: f64, y: f64, s: f64, v: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(0.0);
    }
    // the mass sits at scale k^2 after 0 and (k - y)^2 before s; the right
    // half is integrated in r = s - t to keep resolution near s
    let left = |t: f64| bes3_passage_kernel(k, t) * strip_passage_density(k, y, s - t);
    let right = |r: f64| bes3_passage_kernel(k, s - r) * strip_passage_density(k, y, r);
    let half = 0.5 * s;
    let graded = |scale: f64| {
        let mut g = vec![0.0, half];
        g.extend((-10..=2).map(|p| 10f64.powi(p) * scale));
        g.extend((1..8).map(|i| half * i as f64 / 8.0));
        g.retain(|x| (0.0..=half).contains(x));
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    };
    // (in r, start, end) in the direction of increasing t
    let mut cells: Vec<(bool, f64, f64)> = graded(k * k).windows(2).map(|w| (false, w[0], w[1])).collect();
    cells.extend(graded((k - y) * (k - y)).windows(2).rev().map(|w| (true, w[1], w[0])));
    let mass = |c: (bool, f64, f64), from: f64, to: f64, opts: QuadOptions| {
        let (lo, hi) = (from.min(to), from.max(to));
        let r = if c.0 { integrate(right, lo, hi, opts) } else { integrate(left, lo, hi, opts) };
        r.map(|r| r.value)
    };
    // crude pass for the overall scale, then a pass at tolerance relative to it
    let crude = QuadOptions {
        rel_tol: 1e-3,
        abs_tol: 1e-300,
        max_subdivisions: 50,
    };
    let scale: f64 = cells.iter().map(|&c| mass(c, c.1, c.2, crude).unwrap_or(0.0)).sum();
    let opts = QuadOptions {
        rel_tol: 1e-8,
        abs_tol: 1e-12 * scale,
        ..QuadOptions::default()
    };
    let masses = cells
        .iter()
        .map(|&c| mass(c, c.1, c.2, opts))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Ok(s);
    }
    let mut target = v * total;
    let mut pick = cells.len() - 1;
    for (i, &m) in masses.iter().enumerate() {
        if target <= m {
            pick = i;
            break;
        }
        target -= m;
    }
    let c = cells[pick];
    let (mut p, mut q) = (c.1, c.2);
    let mut acc = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (p + q);
        let piece = mass(c, p, mid, opts)?;
        if acc + piece < target {
            p = mid;
            acc += piece;
        } else {
            q = mid;
        }
        if (q - p).abs() <= 1e-12 * s {
            break;
        }
    }
    let x = 0.5 * (p + q);
    Ok(if c.0 { s - x } else { x })
}

/// Extremes of a bridge: value and time of the infimum, then of the supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BridgeExtremes {
    pub inf: f64,
    pub t_inf: f64,
    pub sup: f64,
    pub t_sup: f64,
}

/// Joint infimum and supremum of a bridge from `a` to `b` over `l` with
/// volatility `sigma`. The infimum comes from the explicit law; conditionally
/// on it the two halves are Bessel(3) bridges whose suprema are sampled by
/// inversion. Times are relative to the bridge start and only computed when
/// `with_times` is set (the supremum time then takes a numerical inversion).
pub(crate) fn bridge_extremes<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    sigma: f64,
    l: f64,
    with_times: bool,
    rng: &mut R,
) -> Result<BridgeExtremes> {
    let e: f64 = rng.sample(rand_distr::Exp1);
    let m = bridge_min(a, b, sigma * sigma * l, e).min(a).min(b);
    let (ya, yb) = ((a - m) / sigma, (b - m) / sigma);
    let theta = extreme_time(ya, yb, l, rng);
    let left = bes3_bridge_sup(ya, theta, rng.random())?;
    let right = bes3_bridge_sup(yb, l - theta, rng.random())?;
    let (depth, t_sup) = if left >= right {
        let t = if with_times { theta - bes3_bridge_sup_time(left, ya, theta, rng.random())? } else { 0.0 };
        (left, t)
    } else {
        let t = if with_times { theta + bes3_bridge_sup_time(right, yb, l - theta, rng.random())? } else { 0.0 };
        (right, t)
    };
    Ok(BridgeExtremes {
        inf: m,
        t_inf: theta,
        sup: (m + sigma * depth).max(a).max(b),
        t_sup: t_sup.clamp(0.0, l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::stats::{ks_one_sample, ks_two_sample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Exp1;

    #[test]
    fn extreme_time_of_free_path_is_arcsine() {
        // argmin of a Brownian motion on [0, 1] has P(theta <= t) = (2/pi) asin(sqrt t)
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<f64> = (0..20_000)
            .map(|_| {
                let b: f64 = rng.sample(StandardNormal);
                let m = bridge_min(0.0, b, 1.0, rng.sample(Exp1));
                extreme_time(-m, b - m, 1.0, &mut rng)
            })
            .collect();
        let p = ks_one_sample(&samples, |t| 2.0 / std::f64::consts::PI * t.sqrt().asin());
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn bes3_cdf_is_a_distribution() {
        for &(y, s) in &[(0.0f64, 1.0f64), (0.5, 1.0), (2.0, 0.5), (0.1, 4.0)] {
            let mut prev = 0.0;
            for i in 0..400 {
                let k = y + 0.02 * s.sqrt() * i as f64;
                let f = bes3_bridge_sup_cdf(k, y, s);
                assert!(f >= prev - 1e-12, "y={y} s={s} k={k}: {f} < {prev}");
                prev = f;
            }
            assert!(prev > 0.999_999);
        }
        // excursion: P(max < k) = sum_j (1 - 4 j^2 k^2) exp(-2 j^2 k^2) at s = 1
        let k: f64 = 0.8;
        let direct: f64 = (-200i32..=200)
            .map(|j| {
                let jk = j as f64 * k;
                (1.0 - 4.0 * jk * jk) * (-2.0 * jk * jk).exp()
            })
            .sum();
        assert!((bes3_bridge_sup_cdf(k, 0.0, 1.0) - direct).abs() < 1e-12);
    }

    #[test]
    fn joint_extremes_reproduce_free_bridge_laws() {
        // the supremum sampled via the infimum decomposition must follow
        // P(sup <= z) = 1 - exp(-2 (z - a)(z - b) / l); its time must match
        // the direct inverse Gaussian sampler
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b, l) = (0.0, 0.4, 1.5);
        let mut sups = Vec::new();
        let mut times = Vec::new();
        for _ in 0..4000 {
            let e = bridge_extremes(a, b, 1.0, l, true, &mut rng).unwrap();
            assert!(e.inf <= a.min(b) && e.sup >= a.max(b));
            assert!((0.0..=l).contains(&e.t_inf) && (0.0..=l).contains(&e.t_sup));
            sups.push(e.sup);
            times.push(e.t_sup);
        }
        let p = ks_one_sample(&sups, |z| 1.0 - (-2.0 * (z - a) * (z - b) / l).exp());
        assert!(p > 0.01, "sup law p = {p}");
        let direct: Vec<f64> = (0..4000)
            .map(|_| {
                let z = bridge_max(a, b, l, rng.sample(Exp1));
                extreme_time(z - a, z - b, l, &mut rng)
            })
            .collect();
        let p = ks_two_sample(&times, &direct);
        assert!(p > 0.01, "argmax law p = {p}");
    }
}

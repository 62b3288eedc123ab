use serde::{Deserialize, Serialize};

use super::network::{input_impedance, s11};
use super::{ResonatorError, ResonatorSpec};

/// Location and shape of a reflection dip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSummary {
    /// Frequency of minimum |S11|.
    pub f_r_hz: f64,
    /// Zero of Im Z_in nearest the dip, where the network is resonant in the
    /// reactive sense; NaN when unavailable (sampled traces, no sign change in band).
    pub f_reactance_hz: f64,
    /// −20·log10(min |S11|).
    pub dip_depth_db: f64,
    /// Full width at half depth of the linear-magnitude dip; NaN if a crossing lies
    /// outside the searched band.
    pub linewidth_hz: f64,
    pub loaded_q: f64,
}

const GRID_POINTS: usize = 20_001;
const MIN_DIP: f64 = 1e-6;
const F_REL_TOL: f64 = 1e-9;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > F_REL_TOL * 0.5 * (a + b).abs() {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisects for `g(x) = level` between `inside` (g < level) and `outside` (g >= level).
fn bisect_crossing(g: impl Fn(f64) -> f64, level: f64, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if (outside - inside).abs() <= F_REL_TOL * mid.abs() {
            break;
        }
        if g(mid) < level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Locates the |S11| minimum of the linear network between `f_lo` and `f_hi`.
///
/// A dense grid scan brackets the minimum, golden-section search refines it to a
/// relative tolerance of 1e-9, and the half-depth crossings are bisected on either side.
pub fn find_resonance(
    spec: &ResonatorSpec,
    lk_nh: f64,
    r_shunt_ohm: f64,
    f_lo: f64,
    f_hi: f64,
) -> Result<ResonanceSummary, ResonatorError> {
    let none = ResonatorError::NoResonanceInRange { f_lo, f_hi };
    if !(f_lo > 0.0 && f_hi > f_lo) {
        return Err(none);
    }
    let mag = |f: f64| s11(spec, lk_nh, r_shunt_ohm, f).norm();
    let step = (f_hi - f_lo) / (GRID_POINTS - 1) as f64;
    let grid = |k: usize| f_lo + step * k as f64;
    let (k_min, m_min) = (0..GRID_POINTS)
        .map(|k| (k, mag(grid(k))))
        .fold((0, f64::INFINITY), |acc, (k, m)| if m < acc.1 { (k, m) } else { acc });
    if k_min == 0 || k_min == GRID_POINTS - 1 || m_min >= 1.0 - MIN_DIP {
        return Err(none);
    }
    let f_r = golden_min(mag, grid(k_min - 1), grid(k_min + 1));
    let m = mag(f_r).min(m_min);
    if m >= 1.0 - MIN_DIP {
        return Err(none);
    }
    let level = 0.5 * (1.0 + m);
    let right = (k_min + 1..GRID_POINTS).find(|&k| mag(grid(k)) >= level);
    let left = (0..k_min).rev().find(|&k| mag(grid(k)) >= level);
    let linewidth = match (left, right) {
        (Some(l), Some(r)) => {
            bisect_crossing(mag, level, f_r, grid(r)) - bisect_crossing(mag, level, f_r, grid(l))
        }
        _ => f64::NAN,
    };
    let reactance = |f: f64| input_impedance(spec, lk_nh, r_shunt_ohm, f).im;
    let sign = reactance(f_r).signum();
    let flip = |k: &usize| reactance(grid(*k)).signum() != sign;
    let above = (k_min..GRID_POINTS).find(flip);
    let below = (0..=k_min).rev().find(flip);
    let root = |a: f64, b: f64| {
        let (mut a, mut b) = (a, b);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (b - a).abs() <= 1e-15 * m {
                break;
            }
            if reactance(m).signum() == sign {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let f_reactance = match (below, above) {
        (Some(l), Some(h)) if f_r - grid(l) <= grid(h) - f_r => root(f_r, grid(l)),
        (_, Some(h)) => root(f_r, grid(h)),
        (Some(l), None) => root(f_r, grid(l)),
        (None, None) => f64::NAN,
    };
    Ok(ResonanceSummary {
        f_r_hz: f_r,
        f_reactance_hz: f_reactance,
        dip_depth_db: -20.0 * m.log10(),
        linewidth_hz: linewidth,
        loaded_q: f_r / linewidth,
    })
}

/// Dip extraction from a sampled |S11| trace (e.g. a nonlinear sweep), using
/// parabolic interpolation around the smallest interior sample and linear
/// interpolation for the half-depth crossings.
///
/// Returns `None` when the minimum sits on the band edge or the dip is shallower than 1e-6.
pub fn dip_from_samples(freqs: &[f64], mags: &[f64]) -> Option<ResonanceSummary> {
    let n = freqs.len().min(mags.len());
    if n < 3 {
        return None;
    }
    let k = (0..n)
        .filter(|&k| mags[k].is_finite())
        .min_by(|&a, &b| mags[a].total_cmp(&mags[b]))?;
    if k == 0 || k == n - 1 || mags[k] >= 1.0 - MIN_DIP {
        return None;
    }
    let (x0, x1, x2) = (freqs[k - 1], freqs[k], freqs[k + 1]);
    let (y0, y1, y2) = (mags[k - 1], mags[k], mags[k + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    let (f_r, m) = if a > 0.0 && a.is_finite() {
        let xv = (-b / (2.0 * a)).clamp(x0, x2);
        let c = y1 - a * x1 * x1 - b * x1;
        (xv, (a * xv * xv + b * xv + c).min(y1))
    } else {
        (x1, y1)
    };
    let level = 0.5 * (1.0 + m);
    let interp = |i: usize, j: usize| {
        let t = (level - mags[i]) / (mags[j] - mags[i]);
        freqs[i] + t * (freqs[j] - freqs[i])
    };
    let right = (k + 1..n).find(|&j| mags[j] >= level).map(|j| interp(j - 1, j));
    let left = (0..k).rev().find(|&j| mags[j] >= level).map(|j| interp(j + 1, j));
    let linewidth = match (left, right) {
        (Some(l), Some(r)) => r - l,
        _ => f64::NAN,
    };
    Some(ResonanceSummary {
        f_r_hz: f_r,
        f_reactance_hz: f64::NAN,
        dip_depth_db: -20.0 * m.log10(),
        linewidth_hz: linewidth,
        loaded_q: f_r / linewidth,
    })
}

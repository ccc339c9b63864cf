//! Good-Turing estimators adapted to a known number of bins: the mass they
//! reserve for unseen outcomes is spread evenly over the zero-count bins.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::prob::{CountSample, Distribution};

/// Critical value of the Turing-vs-regression switch.
const SWITCH_Z: f64 = 1.96;

/// `N_r`: number of bins seen exactly `r >= 1` times.
fn count_of_counts(s: &CountSample) -> BTreeMap<u64, f64> {
    let mut n_r = BTreeMap::new();
    for &c in s.counts().iter().filter(|&&c| c > 0) {
        *n_r.entry(c).or_insert(0.0) += 1.0;
    }
    n_r
}

/// Gives zero bins `p0` in equal shares and scales `seen` (indexed by count)
/// to the remaining mass. With no zero bins the seen mass is scaled to 1.
fn assemble(s: &CountSample, seen: impl Fn(u64) -> f64, p0: f64) -> Result<Distribution> {
    let zeros = s.counts().iter().filter(|&&c| c == 0).count();
    let p0 = if zeros == 0 { 0.0 } else { p0 };
    if p0 >= 1.0 {
        // every observed bin is a singleton: nothing is left for them, so
        // fall back to treating seen and unseen bins alike
        return Distribution::uniform(s.m());
    }
    let seen_total: f64 = s.counts().iter().filter(|&&c| c > 0).map(|&c| seen(c)).sum();
    let scale = (1.0 - p0) / seen_total;
    let probs = s
        .counts()
        .iter()
        .map(|&c| if c == 0 { p0 / zeros as f64 } else { seen(c) * scale })
        .collect();
    Distribution::normalize(probs)
}

/// Turing's estimate `(r + 1) / n * N_{r+1} / N_r` for a bin seen `r` times;
/// bins whose `N_{r+1}` is zero keep `r / n`. Unseen bins share `N_1 / n`.
pub fn good_turing_simplest(s: &CountSample) -> Result<Distribution> {
    let n = s.n() as f64;
    let n_r = count_of_counts(s);
    let adjusted = |r: u64| match n_r.get(&(r + 1)) {
        Some(next) => (r + 1) as f64 / n * next / n_r[&r],
        None => r as f64 / n,
    };
    let p0 = n_r.get(&1).copied().unwrap_or(0.0) / n;
    assemble(s, adjusted, p0)
}

/// Gale and Sampson's Simple Good-Turing: averaged count-of-counts, a
/// log-log regression for smoothing, and a switch from Turing's estimate to
/// the smoothed one once the two stop differing significantly.
pub fn simple_good_turing(s: &CountSample) -> Result<Distribution> {
    let n_r = count_of_counts(s);
    let rs: Vec<u64> = n_r.keys().copied().collect();
    if rs.len() < 2 {
        return good_turing_simplest(s);
    }

    let mut xs = Vec::with_capacity(rs.len());
    let mut ys = Vec::with_capacity(rs.len());
    for (j, &r) in rs.iter().enumerate() {
        let q = if j == 0 { 0 } else { rs[j - 1] };
        let t = rs.get(j + 1).copied().unwrap_or(2 * r - q);
        let z = n_r[&r] / (0.5 * (t - q) as f64);
        xs.push((r as f64).ln());
        ys.push(z.ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !slope.is_finite() || !intercept.is_finite() {
        return good_turing_simplest(s);
    }
    let smoothed = |r: f64| (intercept + slope * r.ln()).exp();

    let mut r_star = BTreeMap::new();
    let mut use_regression = false;
    for &r in &rs {
        let rf = r as f64;
        let y = (rf + 1.0) * smoothed(rf + 1.0) / smoothed(rf);
        let star = match n_r.get(&(r + 1)) {
            Some(&next) if !use_regression => {
                let nr = n_r[&r];
                let x = (rf + 1.0) * next / nr;
                let sd = ((rf + 1.0).powi(2) * next / (nr * nr) * (1.0 + next / nr)).sqrt();
                if (x - y).abs() > SWITCH_Z * sd {
                    x
                } else {
                    use_regression = true;
                    y
                }
            }
            _ => {
                use_regression = true;
                y
            }
        };
        if !(star > 0.0 && star.is_finite()) {
            return good_turing_simplest(s);
        }
        r_star.insert(r, star);
    }
    let p0 = n_r.get(&1).copied().unwrap_or(0.0) / s.n() as f64;
    assemble(s, |r| r_star[&r], p0)
}

//! Pressure of the geometric potential on preimage trees, its joint form on
//! matched trees, and the dimension obtained as its zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{build_tree_with, BaseKind, MatchedTree, PreimageTree, NODE_BUDGET};
use crate::par;
use crate::poly::{periodic_points, Polynomial};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub value: f64,
    /// `(n, (1/n) log S_n)` for every level.
    pub depth_sequence: Vec<(usize, f64)>,
    pub extrapolated: f64,
    pub uncertainty: f64,
    /// `|extrapolated − (1/n) log S_n|` at the deepest level.
    pub cesaro_gap: f64,
    /// Fraction of deepest-level nodes dropped for a vanishing derivative.
    pub excluded_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub delta: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    pub uncertainty: f64,
    pub evaluations: usize,
}

/// Default depth by degree, sized to the node budget.
pub fn default_depth(degree: usize) -> usize {
    match degree {
        2 => 14,
        3 => 9,
        d => ((NODE_BUDGET as f64).ln() / (d as f64).ln()).floor().max(1.0) as usize - 1,
    }
}

/// The first critical point, or the most repelling fixed point when that
/// critical point is periodic.
pub fn default_base(f: &Polynomial) -> Result<(C64, BaseKind)> {
    let c = f.critical_points()[0];
    let mut z = c;
    let tol = 1e-12 * (1.0 + c.norm());
    let mut periodic = false;
    for _ in 0..64 {
        z = f.eval(z);
        if !z.is_finite() || z.norm() > f.default_escape_radius() {
            break;
        }
        if (z - c).norm() <= tol {
            periodic = true;
            break;
        }
    }
    if !periodic {
        return Ok((c, BaseKind::Critical(0)));
    }
    let fixed = periodic_points(f, 1)?;
    let best = fixed.iter().max_by(|a, b| a.multiplier.norm().total_cmp(&b.multiplier.norm())).ok_or(Error::DegenerateFiber)?;
    Ok((best.z, BaseKind::Periodic(1)))
}

/// Preimage tree at `base` (default base when `None`).
pub fn pressure_tree(f: &Polynomial, base: Option<C64>, depth: usize) -> Result<PreimageTree> {
    let (b, kind) = match base {
        Some(b) => (b, BaseKind::Constant),
        None => default_base(f)?,
    };
    build_tree_with(f, b, kind, depth, NODE_BUDGET)
}

pub fn pressure_estimate(f: &Polynomial, base: Option<C64>, t: f64, depth: usize) -> Result<PressureEstimate> {
    check_t(t)?;
    pressure_from_tree(&pressure_tree(f, base, depth)?, t)
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&t) {
        return Err(Error::ParamOutOfRange(format!("t = {t} outside [0, 2]")));
    }
    Ok(())
}

/// `p(t)` from the derivative products already stored in `tree`.
pub fn pressure_from_tree(tree: &PreimageTree, t: f64) -> Result<PressureEstimate> {
    let mut log_s = Vec::with_capacity(tree.depth());
    let mut excluded = 0.0;
    for n in 1..=tree.depth() {
        let derivs = &tree.levels[n].derivs;
        let logs: Vec<f64> = par::map(derivs, |d| if *d == C64::new(0.0, 0.0) { f64::NAN } else { -t * d.norm().ln() });
        let (s, ex) = reduce_level(&logs)?;
        log_s.push(s);
        excluded = ex;
    }
    Ok(estimate(&log_s, excluded))
}

/// Joint pressure on two motions of the same base tree.
pub fn joint_pressure(m1: &MatchedTree, m2: &MatchedTree, t1: f64, t2: f64) -> Result<PressureEstimate> {
    check_t(t1)?;
    check_t(t2)?;
    if t1 + t2 <= 0.0 {
        return Err(Error::ParamOutOfRange("t1 + t2 must be positive".into()));
    }
    let (a, b) = (&m1.tree0, &m2.tree0);
    let same_shape =
        a.degree == b.degree && a.levels.len() == b.levels.len() && a.levels.iter().zip(&b.levels).all(|(x, y)| x.points == y.points);
    if !same_shape || m1.lambda0 != m2.lambda0 {
        return Err(Error::ItineraryMismatch);
    }
    let (p, q) = (&m1.tree1, &m2.tree1);
    let mut log_s = Vec::with_capacity(p.depth());
    let mut excluded = 0.0;
    let zero = C64::new(0.0, 0.0);
    for n in 1..=p.depth() {
        let (d1, d2) = (&p.levels[n].derivs, &q.levels[n].derivs);
        let logs: Vec<f64> = par::map_range(d1.len(), |i| {
            if d1[i] == zero || d2[i] == zero {
                return f64::NAN;
            }
            match (t1 == 0.0, t2 == 0.0) {
                (false, true) => -t1 * d1[i].norm().ln(),
                (true, false) => -t2 * d2[i].norm().ln(),
                _ => -t1 * d1[i].norm().ln() + -t2 * d2[i].norm().ln(),
            }
        });
        let (s, ex) = reduce_level(&logs)?;
        log_s.push(s);
        excluded = ex;
    }
    Ok(estimate(&log_s, excluded))
}

/// `log Σ exp` over the non-NaN entries and the excluded fraction.
fn reduce_level(logs: &[f64]) -> Result<(f64, f64)> {
    let kept: Vec<f64> = logs.iter().copied().filter(|x| !x.is_nan()).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateFiber);
    }
    let excluded = (logs.len() - kept.len()) as f64 / logs.len() as f64;
    Ok((par::log_sum_exp(&kept), excluded))
}

fn estimate(log_s: &[f64], excluded: f64) -> PressureEstimate {
    let depth_sequence: Vec<(usize, f64)> = log_s.iter().enumerate().map(|(i, s)| (i + 1, s / (i + 1) as f64)).collect();
    let mut inc = Vec::with_capacity(log_s.len());
    let mut prev = 0.0;
    for &s in log_s {
        inc.push(s - prev);
        prev = s;
    }
    let (extrapolated, uncertainty) = aitken_tail(&inc);
    let last = depth_sequence.last().map_or(extrapolated, |x| x.1);
    PressureEstimate {
        value: extrapolated,
        depth_sequence,
        extrapolated,
        uncertainty,
        cesaro_gap: (extrapolated - last).abs(),
        excluded_mass: excluded,
    }
}

/// Aitken Δ² on the last three terms, falling back to the last term when the
/// tail is not contracting.
pub fn aitken_tail(seq: &[f64]) -> (f64, f64) {
    let n = seq.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let last = seq[n - 1];
    if n < 3 {
        let unc = if n == 2 { (seq[1] - seq[0]).abs() } else { f64::INFINITY };
        return (last, unc);
    }
    let (a, b, c) = (seq[n - 3], seq[n - 2], last);
    let d1 = b - a;
    let d2 = c - b;
    let den = d2 - d1;
    if d2 == 0.0 || den == 0.0 || (d2 / d1).abs() >= 1.0 || !(d2 / d1).is_finite() {
        return (last, d2.abs());
    }
    let acc = c - d2 * d2 / den;
    (acc, (acc - last).abs().max(f64::EPSILON * last.abs()))
}

/// Zero of `t ↦ p(t)` for `f`, by Brent's method on `[0, 2]`.
pub fn bowen_dimension(f: &Polynomial, tol: f64, depth: usize) -> Result<DimensionResult> {
    let tree = pressure_tree(f, None, depth)?;
    bowen_from_tree(&tree, tol)
}

pub fn bowen_from_tree(tree: &PreimageTree, tol: f64) -> Result<DimensionResult> {
    if !(tol >= 1e-8) {
        return Err(Error::ParamOutOfRange(format!("tol = {tol} below 1e-8")));
    }
    let p = |t: f64| pressure_from_tree(tree, t);
    let lo = p(0.0)?;
    let hi = p(2.0)?;
    if lo.value - lo.uncertainty <= 0.0 || hi.value + hi.uncertainty >= 0.0 {
        return Err(Error::NoBracket { t_lo: 0.0, t_hi: 2.0 });
    }
    let mut evals = 2;
    let mut unc = 0.0;
    let delta = brent(0.0, 2.0, lo.value, hi.value, tol, |t| {
        evals += 1;
        let e = p(t)?;
        unc = e.uncertainty;
        Ok(e.value)
    })?;
    let fin = p(delta)?;
    // dp/dt ≈ −Lyapunov, so pressure uncertainty maps to t by that slope
    let slope = (hi.value - lo.value) / 2.0;
    Ok(DimensionResult {
        delta,
        bracket: (0.0, 2.0),
        residual: fin.value.abs(),
        uncertainty: (fin.uncertainty.max(unc) / slope.abs()).max(fin.value.abs() / slope.abs()),
        evaluations: evals + 1,
    })
}

/// Brent's method for a sign change on `[a, b]`, stopping when `|g| ≤ tol`
/// or the bracket is below machine resolution.
pub fn brent(mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if fa * fb > 0.0 {
        return Err(Error::NoBracket { t_lo: a, t_hi: b });
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb.abs() <= tol || (b - a).abs() <= 4.0 * f64::EPSILON * (1.0 + b.abs()) {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let out_of_range = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected { (s - b).abs() >= (b - c).abs() / 2.0 } else { (s - b).abs() >= (c - d).abs() / 2.0 };
        if out_of_range || slow || !s.is_finite() {
            s = (a + b) / 2.0;
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = g(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessDiagnostics {
    pub h: f64,
    /// Largest `|Δ³δ|`.
    pub max_third_difference: f64,
    /// `max |Δ³δ| / h³`.
    pub indicator: f64,
}

/// Third-difference smoothness indicator on a uniform grid `(s_k, δ_k)`.
pub fn smoothness_probe(values: &[(f64, f64)]) -> Result<SmoothnessDiagnostics> {
    if values.len() < 7 {
        return Err(Error::InvalidInput("smoothness probe needs at least 7 points".into()));
    }
    let h = values[1].0 - values[0].0;
    if h == 0.0 {
        return Err(Error::InvalidInput("grid spacing is zero".into()));
    }
    let mut worst: f64 = 0.0;
    for w in values.windows(4) {
        let d3 = (w[3].1 - w[0].1) - 3.0 * (w[2].1 - w[1].1);
        worst = worst.max(d3.abs());
    }
    Ok(SmoothnessDiagnostics { h, max_third_difference: worst, indicator: worst / h.abs().powi(3) })
}

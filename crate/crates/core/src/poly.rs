//! Polynomial dynamics: evaluation, orbits, preimages, periodic points,
//! Green functions and Lyapunov exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{self, NewtonRatio};
use crate::C64;

/// Default root-count budget for [`periodic_points`].
pub const PERIODIC_BUDGET: usize = 1 << 16;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Degree-D complex polynomial with its critical points (with multiplicity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyJson", into = "PolyJson")]
pub struct Polynomial {
    coeffs: Vec<C64>,
    critical_points: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    coeffs: Vec<[f64; 2]>,
}

impl TryFrom<PolyJson> for Polynomial {
    type Error = Error;
    fn try_from(p: PolyJson) -> Result<Self> {
        Polynomial::new(p.coeffs.iter().map(|c| C64::new(c[0], c[1])).collect())
    }
}

impl From<Polynomial> for PolyJson {
    fn from(p: Polynomial) -> Self {
        PolyJson { coeffs: p.coeffs.iter().map(|c| [c.re, c.im]).collect() }
    }
}

impl Polynomial {
    /// Builds a polynomial from coefficients (constant term first) and
    /// computes its critical points numerically.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        validate_coeffs(&coeffs)?;
        let dcoeffs = derivative_coeffs(&coeffs);
        let raw = roots::poly_roots(&dcoeffs)?;
        let critical_points = snap_clusters(&dcoeffs, raw);
        Self::with_critical_points(coeffs, critical_points)
    }

    /// Builds a polynomial whose critical points are known in closed form.
    pub fn with_critical_points(coeffs: Vec<C64>, mut critical_points: Vec<C64>) -> Result<Self> {
        validate_coeffs(&coeffs)?;
        let d = coeffs.len() - 1;
        if critical_points.len() != d - 1 {
            return Err(Error::InvalidInput(format!("expected {} critical points, got {}", d - 1, critical_points.len())));
        }
        let p = Polynomial { coeffs, critical_points: vec![] };
        let tol = 1e-10 * p.scale() * (1.0 + critical_points.iter().map(|c| c.norm()).fold(0.0, f64::max)).powi(d as i32 - 2);
        for c in &critical_points {
            if p.derivative(*c).norm() >= tol {
                return Err(Error::InvalidInput(format!("{c} is not a critical point")));
            }
        }
        critical_points.sort_by(roots::lex_cmp);
        Ok(Polynomial { critical_points, ..p })
    }

    /// `z² + c`.
    pub fn quadratic(c: C64) -> Self {
        Polynomial { coeffs: vec![c, ZERO, ONE], critical_points: vec![ZERO] }
    }

    /// `z^d`.
    pub fn monomial(d: usize) -> Result<Self> {
        let mut coeffs = vec![ZERO; d + 1];
        coeffs[d] = ONE;
        Self::with_critical_points(coeffs, vec![ZERO; d.saturating_sub(1)])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn leading(&self) -> C64 {
        self.coeffs[self.degree()]
    }

    pub fn critical_points(&self) -> &[C64] {
        &self.critical_points
    }

    /// Distinct critical points with the order of vanishing of `f'`.
    pub fn distinct_critical_points(&self) -> Vec<(C64, usize)> {
        let mut out: Vec<(C64, usize)> = Vec::new();
        for &c in &self.critical_points {
            match out.iter_mut().find(|(z, _)| *z == c) {
                Some(e) => e.1 += 1,
                None => out.push((c, 1)),
            }
        }
        out
    }

    /// Max coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `2 + max|coeff|`.
    pub fn default_escape_radius(&self) -> f64 {
        2.0 + self.scale()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &a| acc * z + a)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        roots::horner_with_derivative(&self.coeffs, z).1
    }

    /// `(f, f')` at `z`.
    pub fn eval_d1(&self, z: C64) -> (C64, C64) {
        roots::horner_with_derivative(&self.coeffs, z)
    }

    /// `(f, f', f'')` at `z`.
    pub fn eval_d2(&self, z: C64) -> (C64, C64, C64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        let mut ddp = ZERO;
        for &a in self.coeffs.iter().rev() {
            ddp = ddp * z + dp;
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp, 2.0 * ddp)
    }

    /// `f^n(z)`.
    pub fn iterate(&self, mut z: C64, n: usize) -> C64 {
        for _ in 0..n {
            z = self.eval(z);
        }
        z
    }

    /// `(f^n(z), (f^n)'(z))`.
    pub fn iterate_d1(&self, mut z: C64, n: usize) -> (C64, C64) {
        let mut d = ONE;
        for _ in 0..n {
            let (w, dw) = self.eval_d1(z);
            d *= dw;
            z = w;
        }
        (z, d)
    }
}

fn validate_coeffs(coeffs: &[C64]) -> Result<()> {
    if coeffs.len() < 3 {
        return Err(Error::InvalidInput("degree must be at least 2".into()));
    }
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidInput("non-finite coefficient".into()));
    }
    if coeffs.last().is_none_or(|c| c.norm() == 0.0) {
        return Err(Error::InvalidInput("leading coefficient is zero".into()));
    }
    Ok(())
}

pub(crate) fn derivative_coeffs(c: &[C64]) -> Vec<C64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| a * k as f64).collect()
}

/// Replaces clusters of nearly coincident roots by their centroid.
fn snap_clusters(coeffs: &[C64], raw: Vec<C64>) -> Vec<C64> {
    let n = raw.len();
    let mut out = raw.clone();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        let tol = 1e-6 * (1.0 + raw[i].norm());
        let members: Vec<usize> = (i..n).filter(|&j| !used[j] && (raw[j] - raw[i]).norm() < tol).collect();
        if members.len() > 1 {
            let mean = members.iter().map(|&j| raw[j]).sum::<C64>() / members.len() as f64;
            for &j in &members {
                out[j] = mean;
                used[j] = true;
            }
        } else {
            out[i] = roots::newton_polish(coeffs, raw[i]);
            used[i] = true;
        }
    }
    out
}

/// Iterates of a point together with the chain-rule derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub points: Vec<C64>,
    pub derivative_product: C64,
    pub escaped: bool,
}

/// First `n` iterates of `z`, stopping once `|f^k(z)| > escape_radius`.
pub fn evaluate_orbit(f: &Polynomial, z: C64, n: usize, escape_radius: f64) -> OrbitRecord {
    let mut points = Vec::with_capacity(n + 1);
    points.push(z);
    let mut d = ONE;
    let mut w = z;
    let mut escaped = w.norm() > escape_radius;
    for _ in 0..n {
        if escaped {
            break;
        }
        let (fw, dw) = f.eval_d1(w);
        d *= dw;
        w = fw;
        points.push(w);
        escaped = w.norm() > escape_radius;
    }
    OrbitRecord { points, derivative_product: d, escaped }
}

/// All D solutions of `f(z) = w` with multiplicity, sorted by (re, im).
///
/// Roots that coalesce at a critical point are reported as exact copies of it.
pub fn preimages(f: &Polynomial, w: C64) -> Result<Vec<C64>> {
    let mut c = f.coeffs.clone();
    c[0] -= w;
    let mut r = if f.degree() == 2 { roots::quadratic_roots(c[2], c[1], c[0]).to_vec() } else { roots::poly_roots(&c)? };
    snap_to_critical(f, w, &mut r);
    r.sort_by(roots::lex_cmp);
    Ok(r)
}

fn snap_to_critical(f: &Polynomial, w: C64, r: &mut [C64]) {
    let tol = 1e-12 * f.scale() * (1.0 + w.norm());
    for (c, m) in f.distinct_critical_points() {
        if (f.eval(c) - w).norm() > tol {
            continue;
        }
        let mut idx: Vec<usize> = (0..r.len()).collect();
        idx.sort_by(|&a, &b| (r[a] - c).norm().total_cmp(&(r[b] - c).norm()));
        for &i in idx.iter().take(m + 1) {
            r[i] = c;
        }
    }
}

/// Preimages grouped by exact coincidence: `(point, multiplicity)`.
pub fn preimages_with_multiplicity(f: &Polynomial, w: C64) -> Result<Vec<(C64, usize)>> {
    let r = preimages(f, w)?;
    let mut out: Vec<(C64, usize)> = Vec::new();
    for z in r {
        match out.last_mut() {
            Some((p, m)) if *p == z => *m += 1,
            _ => out.push((z, 1)),
        }
    }
    Ok(out)
}

/// A root of `f^n(z) = z` with its multiplier `(f^n)'(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub z: C64,
    pub multiplier: C64,
}

struct PeriodicTarget<'a> {
    f: &'a Polynomial,
    n: usize,
}

impl NewtonRatio for PeriodicTarget<'_> {
    fn ratio(&self, z: C64) -> Option<C64> {
        let d = self.f.degree() as f64;
        let mut w = z;
        let mut dw = ONE;
        for k in 0..self.n {
            if w.norm() > 1e40 {
                // f^j/(f^j)' shrinks by a factor D per step once w is huge
                let r = w / dw;
                return Some(r / d.powi((self.n - k) as i32));
            }
            let (fw, dfw) = self.f.eval_d1(w);
            dw *= dfw;
            w = fw;
        }
        let g = w - z;
        let dg = dw - ONE;
        if dg.norm() == 0.0 {
            None
        } else {
            Some(g / dg)
        }
    }
}

/// The D^n roots of `f^n(z) = z` with multipliers, sorted by (re, im).
pub fn periodic_points(f: &Polynomial, n: usize) -> Result<Vec<PeriodicPoint>> {
    periodic_points_with_budget(f, n, PERIODIC_BUDGET)
}

pub fn periodic_points_with_budget(f: &Polynomial, n: usize, budget: usize) -> Result<Vec<PeriodicPoint>> {
    if n == 0 {
        return Err(Error::InvalidInput("period must be at least 1".into()));
    }
    let d = f.degree() as u128;
    let count = d.checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > budget as u128 {
        return Err(Error::BudgetExceeded { needed: count, budget: budget as u128 });
    }
    let count = count as usize;
    let seeds = if n < 6 { roots::circle_seeds(count, 1.0 + f.scale(), ZERO) } else { tree_seeds(f, n)? };
    let target = PeriodicTarget { f, n };
    let z = roots::aberth(&target, seeds, 1000)?;
    let scale = f.scale();
    let mut out = Vec::with_capacity(count);
    for mut zk in z {
        for _ in 0..3 {
            match target.ratio(zk) {
                Some(s) if s.norm() > 0.0 => {
                    let cand = zk - s;
                    if (f.iterate(cand, n) - cand).norm() <= (f.iterate(zk, n) - zk).norm() {
                        zk = cand;
                    } else {
                        break;
                    }
                }
                _ => break,
            }
        }
        let (w, mult) = f.iterate_d1(zk, n);
        let residual = (w - zk).norm();
        if !(residual <= 1e-8 * scale.max(1.0) * (1.0 + zk.norm())) {
            return Err(Error::RootFindingFailed(format!("periodic residual {residual:e} at {zk}")));
        }
        out.push(PeriodicPoint { z: zk, multiplier: mult });
    }
    out.sort_by(|a, b| roots::lex_cmp(&a.z, &b.z));
    Ok(out)
}

/// Depth-n backward orbit of the most repelling fixed point; one seed per inverse branch of f^n.
fn tree_seeds(f: &Polynomial, n: usize) -> Result<Vec<C64>> {
    let fixed = periodic_points_with_budget(f, 1, usize::MAX)?;
    let base = fixed.iter().max_by(|a, b| a.multiplier.norm().total_cmp(&b.multiplier.norm())).map(|p| p.z).unwrap_or(ZERO);
    let mut level = vec![base];
    for _ in 0..n {
        let next: Vec<Vec<C64>> = crate::par::try_map(&level, |&w| preimages(f, w))?;
        level = next.into_iter().flatten().collect();
    }
    // split exact duplicates (critical fibers) so the simultaneous iteration can separate them
    let mut sorted: Vec<(C64, usize)> = level.iter().copied().zip(0..).collect();
    sorted.sort_by(|a, b| roots::lex_cmp(&a.0, &b.0));
    for k in 1..sorted.len() {
        if (sorted[k].0 - sorted[k - 1].0).norm() < 1e-12 {
            let i = sorted[k].1;
            let r = 1e-7 * (1.0 + level[i].norm());
            level[i] += C64::from_polar(r, 0.7 * k as f64);
        }
    }
    Ok(level)
}

/// Green function estimate with its refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenEstimate {
    pub value: f64,
    /// First n with `|f^n(z)|` beyond the escape radius, if any.
    pub escape_step: Option<usize>,
    /// Tail-corrected estimates at each refinement step after escape.
    pub refinements: Vec<f64>,
}

pub fn green_function(f: &Polynomial, z: C64, depth: usize) -> f64 {
    green_estimate(f, z, depth).value
}

pub fn green_estimate(f: &Polynomial, z: C64, depth: usize) -> GreenEstimate {
    let radius = f.default_escape_radius();
    let d = f.degree() as f64;
    let tail = f.leading().norm().ln() / (d - 1.0);
    let mut w = z;
    let mut escape_step = None;
    for n in 0..=depth {
        if w.norm() > radius {
            escape_step = Some(n);
            break;
        }
        if n < depth {
            w = f.eval(w);
        }
    }
    let Some(n0) = escape_step else {
        return GreenEstimate { value: 0.0, escape_step: None, refinements: vec![] };
    };
    let mut refinements = Vec::new();
    let mut n = n0;
    loop {
        refinements.push((w.norm().ln() + tail) / d.powi(n as i32));
        if w.norm() > 1e12 || refinements.len() > 200 {
            break;
        }
        w = f.eval(w);
        n += 1;
    }
    let value = *refinements.last().unwrap();
    GreenEstimate { value: value.max(0.0), escape_step, refinements }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LyapunovMethod {
    Periodic,
    Przytycki,
}

/// Lyapunov exponent of the maximal-entropy measure.
///
/// `Periodic` averages `(1/n) log|multiplier|` over the repelling points of
/// period n; `Przytycki` returns `log D + Σ_j G(c_j)`.
pub fn lyapunov_exponent(f: &Polynomial, method: LyapunovMethod, n_or_depth: usize) -> Result<f64> {
    match method {
        LyapunovMethod::Periodic => {
            let pts = periodic_points(f, n_or_depth)?;
            let logs: Vec<f64> = pts.iter().map(|p| p.multiplier.norm()).filter(|&m| m > 1.0).map(f64::ln).collect();
            if logs.is_empty() {
                return Err(Error::DegenerateFiber);
            }
            Ok(crate::par::pairwise_sum(&logs) / (logs.len() as f64 * n_or_depth as f64))
        }
        LyapunovMethod::Przytycki => {
            let d = f.degree() as f64;
            let g: f64 = f.critical_points().iter().map(|&c| green_function(f, c, n_or_depth)).sum();
            Ok(d.ln() + g)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn orbit_examples() {
        let sq = Polynomial::quadratic(ZERO);
        let o = evaluate_orbit(&sq, ONE, 3, 10.0);
        assert_eq!(o.points, vec![ONE; 4]);
        assert_eq!(o.derivative_product, c(8.0, 0.0));
        let cheb = Polynomial::quadratic(c(-2.0, 0.0));
        let o = evaluate_orbit(&cheb, ZERO, 3, 10.0);
        assert_eq!(o.points, vec![ZERO, c(-2.0, 0.0), c(2.0, 0.0), c(2.0, 0.0)]);
        let o = evaluate_orbit(&sq, c(3.0, 0.0), 10, 100.0);
        assert!(o.escaped);
        assert_eq!(o.points, vec![c(3.0, 0.0), c(9.0, 0.0), c(81.0, 0.0), c(6561.0, 0.0)]);
    }

    #[test]
    fn preimage_examples() {
        let cheb = Polynomial::quadratic(c(-2.0, 0.0));
        assert_eq!(preimages(&cheb, c(2.0, 0.0)).unwrap(), vec![c(-2.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(preimages(&cheb, c(-2.0, 0.0)).unwrap(), vec![ZERO, ZERO]);
        let sq = Polynomial::quadratic(ZERO);
        assert_eq!(preimages(&sq, ZERO).unwrap(), vec![ZERO, ZERO]);
        assert_eq!(preimages_with_multiplicity(&sq, ZERO).unwrap(), vec![(ZERO, 2)]);
    }

    #[test]
    fn cubic_critical_fiber_multiplicity() {
        // z^3 - 3z has critical points ±1, critical values ∓2
        let f = Polynomial::new(vec![ZERO, c(-3.0, 0.0), ZERO, ONE]).unwrap();
        assert_eq!(f.critical_points(), &[c(-1.0, 0.0), c(1.0, 0.0)]);
        let m = preimages_with_multiplicity(&f, c(-2.0, 0.0)).unwrap();
        assert!(m.contains(&(ONE, 2)));
        assert_eq!(m.iter().map(|x| x.1).sum::<usize>(), 3);
    }

    #[test]
    fn periodic_examples() {
        let sq = Polynomial::quadratic(ZERO);
        let p = periodic_points(&sq, 1).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p[0].z.norm() < 1e-14 && p[0].multiplier.norm() < 1e-13);
        assert!((p[1].z - ONE).norm() < 1e-14 && (p[1].multiplier - c(2.0, 0.0)).norm() < 1e-13);

        let cheb = Polynomial::quadratic(c(-2.0, 0.0));
        let p = periodic_points(&cheb, 1).unwrap();
        assert!((p[0].z + ONE).norm() < 1e-13 && (p[0].multiplier + c(2.0, 0.0)).norm() < 1e-12);
        assert!((p[1].z - c(2.0, 0.0)).norm() < 1e-13 && (p[1].multiplier - c(4.0, 0.0)).norm() < 1e-12);

        // z^4 - z = z (z - 1)(z^2 + z + 1)
        let p = periodic_points(&sq, 2).unwrap();
        assert_eq!(p.len(), 4);
        let h = 3f64.sqrt() / 2.0;
        for q in [c(-0.5, -h), c(-0.5, h)] {
            let hit = p.iter().find(|x| (x.z - q).norm() < 1e-12).expect("2-cycle point");
            assert!((hit.multiplier - c(4.0, 0.0)).norm() < 1e-11);
        }
    }

    #[test]
    fn periodic_tree_seeded_branch() {
        let f = Polynomial::quadratic(c(0.1, 0.0));
        let p = periodic_points(&f, 7).unwrap();
        assert_eq!(p.len(), 128);
        for w in p.windows(2) {
            assert!((w[0].z - w[1].z).norm() > 1e-8);
        }
    }

    #[test]
    fn periodic_budget() {
        let sq = Polynomial::quadratic(ZERO);
        assert!(matches!(periodic_points(&sq, 17), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn green_examples() {
        let sq = Polynomial::quadratic(ZERO);
        assert_eq!(green_function(&sq, c(0.6, 0.7), 50), 0.0);
        assert!((green_function(&sq, c(2.0, 0.0), 50) - 2f64.ln()).abs() < 1e-12);
        let cheb = Polynomial::quadratic(c(-2.0, 0.0));
        let want = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((green_function(&cheb, c(3.0, 0.0), 50) - want).abs() < 1e-10);
    }

    #[test]
    fn green_z2_plus_5_at_zero() {
        // Independent oracle: G(0) = G(5)/2 and G(w) = log|w| + Σ_k 2^{-k-1} log|1 + c/w_k²|.
        let c5 = 5.0_f64;
        let mut w = c5;
        let mut g = w.ln();
        for k in 0..6 {
            g += 0.5f64.powi(k + 1) * (1.0 + c5 / (w * w)).ln();
            w = w * w + c5;
        }
        let want = g / 2.0;
        // brute force: 2^{-4} log|f^4(0)| = log(819030)/16
        assert!((want - 819030f64.ln() / 16.0).abs() < 1e-10, "oracle {want}");
        let f = Polynomial::quadratic(c(5.0, 0.0));
        assert!((green_function(&f, ZERO, 60) - want).abs() < 1e-12);
        let l = lyapunov_exponent(&f, LyapunovMethod::Przytycki, 60).unwrap();
        assert!((l - 2f64.ln() - want).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_z2() {
        let sq = Polynomial::quadratic(ZERO);
        for m in [LyapunovMethod::Periodic, LyapunovMethod::Przytycki] {
            assert!((lyapunov_exponent(&sq, m, 8).unwrap() - 2f64.ln()).abs() < 1e-12);
        }
        let cheb = Polynomial::quadratic(c(-2.0, 0.0));
        let l = lyapunov_exponent(&cheb, LyapunovMethod::Przytycki, 60).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let f = Polynomial::quadratic(c(-0.5, 0.25));
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"coeffs":[[-0.5,0.25],[0.0,0.0],[1.0,0.0]]}"#);
        let g: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }

    proptest! {
        #[test]
        fn chain_rule(re in -1.0f64..1.0, im in -1.0f64..1.0, zr in -1.5f64..1.5, zi in -1.5f64..1.5, n in 0usize..12) {
            let f = Polynomial::quadratic(c(re, im));
            let o = evaluate_orbit(&f, c(zr, zi), n, 1e6);
            let steps = o.points.len() - 1;
            let prod: C64 = o.points[..steps].iter().map(|&z| f.derivative(z)).product();
            let scale = prod.norm().max(1e-300);
            prop_assert!((prod - o.derivative_product).norm() <= 1e-12 * scale);
        }

        #[test]
        fn preimage_residuals(a in -2.0f64..2.0, b in -2.0f64..2.0, wr in -3.0f64..3.0, wi in -3.0f64..3.0) {
            let f = Polynomial::new(vec![c(b, 0.3), c(a, -0.2), c(0.0, 0.0), ONE]).unwrap();
            let w = c(wr, wi);
            let r = preimages(&f, w).unwrap();
            prop_assert_eq!(r.len(), 3);
            for z in r {
                prop_assert!((f.eval(z) - w).norm() <= 1e-10 * f.scale().max(1.0) * (1.0 + w.norm()));
            }
        }

        #[test]
        fn green_subinvariance(re in -0.5f64..0.5, im in -0.5f64..0.5, zr in 2.5f64..6.0, th in 0.0f64..std::f64::consts::TAU) {
            let f = Polynomial::quadratic(c(re, im));
            let z = C64::from_polar(zr, th);
            let g0 = green_function(&f, z, 60);
            let g1 = green_function(&f, f.eval(z), 60);
            prop_assert!((g1 - 2.0 * g0).abs() <= 1e-8);
        }
    }
}

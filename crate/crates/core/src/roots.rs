//! Simultaneous polynomial root finding (Aberth–Ehrlich).

use crate::error::{Error, Result};
use crate::par;
use crate::C64;

/// Newton correction `p/p'` of some function at a point, supplied by the caller.
pub trait NewtonRatio: Sync {
    /// Returns `p(z)/p'(z)`, or `None` when `p'(z)` vanishes.
    fn ratio(&self, z: C64) -> Option<C64>;
}

/// Dense polynomial, coefficients constant term first.
pub struct Dense<'a>(pub &'a [C64]);

impl NewtonRatio for Dense<'_> {
    fn ratio(&self, z: C64) -> Option<C64> {
        let (p, dp) = horner_with_derivative(self.0, z);
        if dp == C64::new(0.0, 0.0) {
            None
        } else {
            Some(p / dp)
        }
    }
}

/// Value and first derivative by Horner's rule.
pub fn horner_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &a in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Deterministic starting points on the circle `|z - shift| = radius`.
pub fn circle_seeds(n: usize, radius: f64, shift: C64) -> Vec<C64> {
    (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64) / (n as f64) + 0.4;
            shift + C64::from_polar(radius, theta)
        })
        .collect()
}

/// Aberth–Ehrlich iteration in Jacobi form from the given seeds.
///
/// The number of seeds must equal the number of roots of the target.
pub fn aberth<R: NewtonRatio>(target: &R, mut z: Vec<C64>, max_iter: usize) -> Result<Vec<C64>> {
    let n = z.len();
    if n == 0 {
        return Ok(z);
    }
    let mut converged = vec![false; n];
    for _ in 0..max_iter {
        let next: Vec<(C64, bool)> = par::map_range(n, |k| {
            if converged[k] {
                return (z[k], true);
            }
            let zk = z[k];
            let Some(w) = target.ratio(zk) else {
                // p' vanished: nudge deterministically
                return (zk + C64::new(1e-9, 1e-9) * (1.0 + zk.norm()), false);
            };
            let mut s = C64::new(0.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != k {
                    let d = zk - zj;
                    if d != C64::new(0.0, 0.0) {
                        s += 1.0 / d;
                    }
                }
            }
            let denom = 1.0 - w * s;
            let step = if denom.norm() > 1e-300 { w / denom } else { w };
            let znew = zk - step;
            let done = step.norm() <= 4.0 * f64::EPSILON * (1.0 + znew.norm());
            (znew, done)
        });
        let mut all = true;
        for (k, (zn, done)) in next.into_iter().enumerate() {
            if !zn.re.is_finite() || !zn.im.is_finite() {
                return Err(Error::RootFindingFailed("non-finite iterate".into()));
            }
            z[k] = zn;
            converged[k] = done;
            all &= done;
        }
        if all {
            return Ok(z);
        }
    }
    // accept slow convergence at multiple roots if residual corrections are tiny
    let worst = z.iter().map(|&zk| target.ratio(zk).map_or(0.0, |w| w.norm() / (1.0 + zk.norm()))).fold(0.0, f64::max);
    if worst < 1e-7 {
        Ok(z)
    } else {
        Err(Error::RootFindingFailed(format!("Aberth iteration stalled (max relative correction {worst:e})")))
    }
}

/// All roots of a dense polynomial (constant term first), with multiplicity.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().is_some_and(|a| a.norm() == 0.0) {
        c.pop();
    }
    let d = c.len() - 1;
    if d == 0 {
        return Ok(vec![]);
    }
    let lead = c[d];
    if d == 1 {
        return Ok(vec![-c[0] / lead]);
    }
    if d == 2 {
        return Ok(quadratic_roots(c[2], c[1], c[0]).to_vec());
    }
    let radius = 1.0 + c[..d].iter().map(|a| (a / lead).norm()).fold(0.0, f64::max);
    let shift = -c[d - 1] / (lead * d as f64);
    let roots = aberth(&Dense(&c), circle_seeds(d, radius, shift), 500)?;
    Ok(roots.into_iter().map(|z| newton_polish(&c, z)).collect())
}

/// Roots of `a z² + b z + c` using the cancellation-free formula.
pub fn quadratic_roots(a: C64, b: C64, c: C64) -> [C64; 2] {
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 { -0.5 * (b + disc) } else { -0.5 * (b - disc) };
    if q.norm() == 0.0 {
        let z = -b / (2.0 * a);
        return [z, z];
    }
    [q / a, c / q]
}

/// A few guarded Newton steps; keeps the input if a step would make things worse.
pub fn newton_polish(coeffs: &[C64], mut z: C64) -> C64 {
    for _ in 0..4 {
        let (p, dp) = horner_with_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let znew = z - p / dp;
        let pn = horner_with_derivative(coeffs, znew).0;
        if pn.norm() < p.norm() {
            z = znew;
        } else {
            break;
        }
    }
    z
}

/// Lexicographic order by (re, im).
pub fn lex_cmp(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

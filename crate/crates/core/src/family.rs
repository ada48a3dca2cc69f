//! Misiurewicz families: parametrizations, critical relations, certification
//! and continuation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::poly::{green_function, Polynomial};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `f^{preperiod}(c_i) = f^{preperiod + period}(c_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub critical_index: usize,
    pub preperiod: usize,
    pub period: usize,
}

impl Relation {
    pub fn new(critical_index: usize, preperiod: usize, period: usize) -> Self {
        Relation { critical_index, preperiod, period }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parametrization {
    /// `z² + l0`, critical point 0.
    Quadratic,
    /// `z³ − 3 l0² z + l1`, marked critical points `[l0, −l0]`.
    CubicPmA,
    /// Coefficient formulas, constant term first; critical points found numerically.
    Custom(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub parametrization: Parametrization,
    pub relations: Vec<Relation>,
    pub ambient_dim: usize,
}

/// Serialized form: `{"name": ..., "coeffs": [...], "ambient_dim": .., "relations": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeffs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_dim: Option<usize>,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

impl FamilySpec {
    pub fn quadratic(relations: Vec<Relation>) -> Result<Self> {
        Self::checked(Parametrization::Quadratic, relations, 1)
    }

    pub fn cubic_pm_a(relations: Vec<Relation>) -> Result<Self> {
        Self::checked(Parametrization::CubicPmA, relations, 2)
    }

    pub fn custom(coeffs: &[&str], ambient_dim: usize, relations: Vec<Relation>) -> Result<Self> {
        let exprs = coeffs.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        if exprs.len() < 3 {
            return Err(Error::InvalidInput("custom family needs degree ≥ 2".into()));
        }
        if let Some(k) = exprs.iter().filter_map(Expr::max_param).max() {
            if k >= ambient_dim {
                return Err(Error::InvalidInput(format!("l{k} exceeds ambient_dim {ambient_dim}")));
            }
        }
        Self::checked(Parametrization::Custom(exprs), relations, ambient_dim)
    }

    pub fn from_def(def: &FamilyDef) -> Result<Self> {
        match def.name.as_str() {
            "quadratic" => Self::quadratic(def.relations.clone()),
            "cubic_pm_a" => Self::cubic_pm_a(def.relations.clone()),
            "custom" => {
                let dim = def.ambient_dim.ok_or_else(|| Error::InvalidInput("custom family needs ambient_dim".into()))?;
                let refs: Vec<&str> = def.coeffs.iter().map(String::as_str).collect();
                Self::custom(&refs, dim, def.relations.clone())
            }
            other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
        }
    }

    pub fn to_def(&self) -> FamilyDef {
        let (name, coeffs) = match &self.parametrization {
            Parametrization::Quadratic => ("quadratic", vec![]),
            Parametrization::CubicPmA => ("cubic_pm_a", vec![]),
            Parametrization::Custom(e) => ("custom", e.iter().map(|x| x.to_string()).collect()),
        };
        FamilyDef { name: name.into(), coeffs, ambient_dim: Some(self.ambient_dim), relations: self.relations.clone() }
    }

    fn checked(parametrization: Parametrization, relations: Vec<Relation>, ambient_dim: usize) -> Result<Self> {
        let spec = FamilySpec { parametrization, relations, ambient_dim };
        let n_crit = spec.degree() - 1;
        for r in &spec.relations {
            if r.preperiod < 1 || r.period < 1 {
                return Err(Error::InvalidInput("relations need preperiod ≥ 1 and period ≥ 1".into()));
            }
            if r.critical_index >= n_crit {
                return Err(Error::InvalidInput(format!("critical index {} out of range", r.critical_index)));
            }
        }
        Ok(spec)
    }

    pub fn degree(&self) -> usize {
        match &self.parametrization {
            Parametrization::Quadratic => 2,
            Parametrization::CubicPmA => 3,
            Parametrization::Custom(e) => e.len() - 1,
        }
    }

    fn check_dim(&self, lambda: &[C64]) -> Result<()> {
        if lambda.len() != self.ambient_dim {
            return Err(Error::InvalidInput(format!("parameter has {} components, family expects {}", lambda.len(), self.ambient_dim)));
        }
        Ok(())
    }

    /// `f_λ`.
    pub fn poly(&self, lambda: &[C64]) -> Result<Polynomial> {
        self.check_dim(lambda)?;
        match &self.parametrization {
            Parametrization::Quadratic => Ok(Polynomial::quadratic(lambda[0])),
            Parametrization::CubicPmA => {
                let a = lambda[0];
                Polynomial::with_critical_points(vec![lambda[1], -3.0 * a * a, ZERO, ONE], vec![a, -a])
            }
            Parametrization::Custom(e) => Polynomial::new(e.iter().map(|x| x.eval(lambda)).collect::<Result<Vec<_>>>()?),
        }
    }

    /// Marked critical points `c_j(λ)`.
    pub fn critical_points(&self, lambda: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(lambda)?;
        match &self.parametrization {
            Parametrization::Quadratic => Ok(vec![ZERO]),
            Parametrization::CubicPmA => Ok(vec![lambda[0], -lambda[0]]),
            Parametrization::Custom(_) => Ok(self.poly(lambda)?.critical_points().to_vec()),
        }
    }

    /// `f^n(c_i) − f^{n+m}(c_i)` for every relation.
    pub fn relation_residuals(&self, lambda: &[C64]) -> Result<Vec<C64>> {
        let f = self.poly(lambda)?;
        let crit = self.critical_points(lambda)?;
        Ok(self
            .relations
            .iter()
            .map(|r| {
                let a = f.iterate(crit[r.critical_index], r.preperiod);
                a - f.iterate(a, r.period)
            })
            .collect())
    }
}

/// Affine subspace `guess + span(directions)` on which relations are solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeSlice {
    pub directions: Vec<Vec<C64>>,
}

impl FreeSlice {
    /// Coordinate slice freeing the given components.
    pub fn coordinates(free: &[usize], dim: usize) -> Self {
        let directions = free.iter().map(|&k| (0..dim).map(|j| if j == k { ONE } else { ZERO }).collect()).collect();
        FreeSlice { directions }
    }

    fn point(&self, base: &[C64], s: &[C64]) -> Vec<C64> {
        let mut out = base.to_vec();
        for (d, &sk) in self.directions.iter().zip(s) {
            for (o, &dj) in out.iter_mut().zip(d) {
                *o += sk * dj;
            }
        }
        out
    }
}

/// A certified Misiurewicz parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisiurewiczParam {
    pub lambda: Vec<C64>,
    pub poly: Polynomial,
    pub critical_points: Vec<C64>,
    pub relations: Vec<Relation>,
    pub landing_points: Vec<C64>,
    pub multipliers: Vec<C64>,
    pub relation_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Largest allowed distance of the iterate from the guess.
    pub max_drift: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iter: 200, max_drift: 1.0 }
    }
}

/// Checks relations, computes landing points and multipliers, certifies repulsion.
pub fn certify(spec: &FamilySpec, lambda: &[C64]) -> Result<MisiurewiczParam> {
    let poly = spec.poly(lambda)?;
    let crit = spec.critical_points(lambda)?;
    let scale = poly.scale();
    let mut landing_points = Vec::new();
    let mut multipliers = Vec::new();
    let mut relation_residuals = Vec::new();
    for r in &spec.relations {
        let land = poly.iterate(crit[r.critical_index], r.preperiod);
        let (back, chi) = poly.iterate_d1(land, r.period);
        let res = (land - back).norm();
        if !(res <= 1e-9 * scale) {
            return Err(Error::NotMisiurewicz(format!("relation residual {res:e}")));
        }
        if !(chi.norm() >= 1.0 + 1e-6) {
            return Err(Error::NotRepelling { modulus: chi.norm() });
        }
        landing_points.push(land);
        multipliers.push(chi);
        relation_residuals.push(res);
    }
    Ok(MisiurewiczParam {
        lambda: lambda.to_vec(),
        poly,
        critical_points: crit,
        relations: spec.relations.clone(),
        landing_points,
        multipliers,
        relation_residuals,
    })
}

/// Newton solve of the critical relations restricted to `guess + span(slice)`.
pub fn solve_critical_relation(spec: &FamilySpec, guess: &[C64], slice: &FreeSlice) -> Result<MisiurewiczParam> {
    solve_with(spec, guess, slice, SolveOptions::default())
}

pub fn solve_with(spec: &FamilySpec, guess: &[C64], slice: &FreeSlice, opts: SolveOptions) -> Result<MisiurewiczParam> {
    let r = spec.relations.len();
    if slice.directions.len() != r {
        return Err(Error::InvalidInput(format!("{} relations but {} free directions", r, slice.directions.len())));
    }
    if slice.directions.iter().any(|d| d.len() != spec.ambient_dim) {
        return Err(Error::InvalidInput("slice direction has wrong dimension".into()));
    }
    let mut s = vec![ZERO; r];
    let mut last_res = f64::INFINITY;
    let mut converged_steps = 0;
    for it in 0..opts.max_iter {
        let lam = slice.point(guess, &s);
        let scale = spec.poly(&lam)?.scale();
        let f0 = spec.relation_residuals(&lam)?;
        let res = f0.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if !res.is_finite() {
            return Err(Error::NewtonDiverged { iterations: it, residual: res });
        }
        last_res = res;
        if res <= 1e-12 * scale {
            converged_steps += 1;
            if converged_steps >= 2 || res == 0.0 {
                return certify(spec, &lam);
            }
        }
        let jac = jacobian(spec, guess, slice, &s)?;
        let rhs = DVector::from_iterator(r, f0.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(Error::NewtonDiverged { iterations: it, residual: res })?;
        // backtracking on the residual norm
        let mut t = 1.0;
        let trial = loop {
            let cand: Vec<C64> = s.iter().zip(step.iter()).map(|(sk, dk)| sk + dk * t).collect();
            let r_new = spec.relation_residuals(&slice.point(guess, &cand))?.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if r_new < res || t < 1e-4 {
                break cand;
            }
            t *= 0.5;
        };
        s = trial;
        let drift = slice.point(guess, &s).iter().zip(guess).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if !(drift <= opts.max_drift) {
            return Err(Error::NewtonDiverged { iterations: it + 1, residual: res });
        }
    }
    Err(Error::NewtonDiverged { iterations: opts.max_iter, residual: last_res })
}

fn jacobian(spec: &FamilySpec, guess: &[C64], slice: &FreeSlice, s: &[C64]) -> Result<DMatrix<C64>> {
    let r = s.len();
    let mut jac = DMatrix::from_element(r, r, ZERO);
    for j in 0..r {
        let h = 1e-6 * (1.0 + s[j].norm());
        let mut sp = s.to_vec();
        let mut sm = s.to_vec();
        sp[j] += h;
        sm[j] -= h;
        let fp = spec.relation_residuals(&slice.point(guess, &sp))?;
        let fm = spec.relation_residuals(&slice.point(guess, &sm))?;
        for i in 0..r {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// `(f^period)'(z)` for a point of the given period.
pub fn multiplier_at(f: &Polynomial, z: C64, period: usize) -> Result<C64> {
    let (w, d) = f.iterate_d1(z, period);
    let residual = (w - z).norm();
    if residual <= 1e-8 * f.scale() {
        Ok(d)
    } else {
        Err(Error::NotPeriodic { residual })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum CriticalFate {
    Attracted { period: usize, cycle_point: C64, multiplier: C64 },
    Escaped { step: usize },
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeCritical {
    pub index: usize,
    pub point: C64,
    pub fate: CriticalFate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicReport {
    /// Critical points not bound by a relation (the free/bound split stands in for passive/active).
    pub free: Vec<FreeCritical>,
    /// True when every free critical point is attracted or escapes.
    pub lambda_hyperbolic: bool,
    pub przytycki_sum: f64,
    pub heuristic: &'static str,
}

/// Classifies the orbits of the relation-free critical points.
pub fn lambda_hyperbolic_check(param: &MisiurewiczParam, max_iter: usize) -> HyperbolicReport {
    let f = &param.poly;
    let bound: Vec<usize> = param.relations.iter().map(|r| r.critical_index).collect();
    let free: Vec<FreeCritical> = param
        .critical_points
        .iter()
        .enumerate()
        .filter(|(i, _)| !bound.contains(i))
        .map(|(index, &point)| FreeCritical { index, point, fate: critical_fate(f, point, max_iter) })
        .collect();
    let lambda_hyperbolic = free.iter().all(|c| !matches!(c.fate, CriticalFate::Undecided));
    let przytycki_sum = f.critical_points().iter().map(|&c| green_function(f, c, 200)).sum();
    HyperbolicReport { free, lambda_hyperbolic, przytycki_sum, heuristic: "active critical points approximated by relation-bound ones" }
}

const CYCLE_TOL: f64 = 1e-9;
const CYCLE_CAP: usize = 64;

/// Brent cycle detection with a distance tolerance and cycle-length cap.
fn critical_fate(f: &Polynomial, c: C64, max_iter: usize) -> CriticalFate {
    let radius = f.default_escape_radius();
    let mut power = 1usize;
    let mut lam = 1usize;
    let mut tortoise = c;
    let mut hare = f.eval(c);
    for step in 1..=max_iter {
        if hare.norm() > radius {
            return CriticalFate::Escaped { step };
        }
        if (hare - tortoise).norm() < CYCLE_TOL {
            return refine_cycle(f, hare, lam);
        }
        if power == lam {
            tortoise = hare;
            if power < CYCLE_CAP {
                power *= 2;
            }
            lam = 0;
        }
        hare = f.eval(hare);
        lam += 1;
    }
    CriticalFate::Undecided
}

fn refine_cycle(f: &Polynomial, mut z: C64, period: usize) -> CriticalFate {
    for _ in 0..50 {
        let (w, d) = f.iterate_d1(z, period);
        let g = w - z;
        let dg = d - ONE;
        if dg.norm() == 0.0 || g.norm() == 0.0 {
            break;
        }
        let step = g / dg;
        z -= step;
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    let multiplier = f.iterate_d1(z, period).1;
    if multiplier.norm() < 1.0 {
        CriticalFate::Attracted { period, cycle_point: z, multiplier }
    } else {
        CriticalFate::Undecided
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub min_step: f64,
    pub solve: SolveOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions { min_step: 1e-6, solve: SolveOptions::default() }
    }
}

/// Continuation of the relation solution along `start.lambda → end`, with
/// `steps + 1` certified output points.
///
/// The slice directions are the solved coordinates; the remaining coordinates
/// follow the straight segment.
pub fn family_path(
    spec: &FamilySpec,
    start: &MisiurewiczParam,
    end: &[C64],
    slice: &FreeSlice,
    steps: usize,
) -> Result<Vec<MisiurewiczParam>> {
    family_path_with(spec, start, end, slice, steps, PathOptions::default())
}

pub fn family_path_with(
    spec: &FamilySpec,
    start: &MisiurewiczParam,
    end: &[C64],
    slice: &FreeSlice,
    steps: usize,
    opts: PathOptions,
) -> Result<Vec<MisiurewiczParam>> {
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    spec.check_dim(end)?;
    let lin = |s: f64| -> Vec<C64> { start.lambda.iter().zip(end).map(|(&a, &b)| a + (b - a) * s).collect() };
    let mut out = vec![start.clone()];
    let mut s = 0.0;
    let mut current = start.clone();
    let mut ds = 1.0 / steps as f64;
    for k in 1..=steps {
        let target = k as f64 / steps as f64;
        while s < target - 1e-15 {
            let s_next = (s + ds).min(target);
            // zero-order predictor: carry the solved offset from the straight segment
            let base_prev = lin(s);
            let guess: Vec<C64> = lin(s_next).iter().zip(current.lambda.iter().zip(&base_prev)).map(|(&l, (&c, &b))| l + (c - b)).collect();
            match solve_with(spec, &guess, slice, opts.solve) {
                Ok(p) if jump_ok(&current, &p) => {
                    current = p;
                    s = s_next;
                    ds = (ds * 2.0).min(1.0 / steps as f64);
                }
                _ => {
                    ds *= 0.5;
                    if ds < opts.min_step {
                        return Err(Error::ContinuationStuck { fraction: s, step: ds });
                    }
                }
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Rejects corrector jumps to a different solution branch.
fn jump_ok(a: &MisiurewiczParam, b: &MisiurewiczParam) -> bool {
    a.multipliers.iter().zip(&b.multipliers).all(|(x, y)| {
        let rel = (x.norm() - y.norm()).abs() / x.norm().max(y.norm());
        rel < 0.25
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cubic_spec() -> FamilySpec {
        FamilySpec::cubic_pm_a(vec![Relation::new(0, 1, 1)]).unwrap()
    }

    #[test]
    fn chebyshev_relation() {
        let spec = FamilySpec::quadratic(vec![Relation::new(0, 2, 1)]).unwrap();
        let p = solve_critical_relation(&spec, &[c(-1.9, 0.0)], &FreeSlice::coordinates(&[0], 1)).unwrap();
        assert!((p.lambda[0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((p.landing_points[0] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((p.multipliers[0] - c(4.0, 0.0)).norm() < 1e-11);
        // oracle: the orbit 0 → −2 → 2 → 2
        let f = &p.poly;
        assert!((f.iterate(ZERO, 3) - f.iterate(ZERO, 2)).norm() <= 1e-12 * f.scale());
    }

    #[test]
    fn quadratic_two_cycle_relation() {
        let spec = FamilySpec::quadratic(vec![Relation::new(0, 2, 2)]).unwrap();
        let p = solve_critical_relation(&spec, &[c(-0.2, 1.0)], &FreeSlice::coordinates(&[0], 1)).unwrap();
        let f = &p.poly;
        let a = f.iterate(ZERO, 2);
        assert!((a - f.iterate(a, 2)).norm() <= 1e-12 * f.scale());
        assert!((p.lambda[0] - c(0.0, 1.0)).norm() < 1e-10);
        assert!((p.multipliers[0].norm() - 4.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn far_guess_diverges() {
        let spec = FamilySpec::quadratic(vec![Relation::new(0, 2, 1)]).unwrap();
        let e = solve_critical_relation(&spec, &[c(40.0, 30.0)], &FreeSlice::coordinates(&[0], 1)).unwrap_err();
        assert!(matches!(e, Error::NewtonDiverged { .. }), "{e:?}");
    }

    #[test]
    fn superattracting_root_is_not_repelling() {
        let spec = FamilySpec::quadratic(vec![Relation::new(0, 2, 1)]).unwrap();
        let e = solve_critical_relation(&spec, &[c(0.05, 0.02)], &FreeSlice::coordinates(&[0], 1)).unwrap_err();
        assert!(matches!(e, Error::NotRepelling { .. }), "{e:?}");
    }

    #[test]
    fn cubic_relation_closed_form() {
        // (r − a)²(r + 2a) = 0 on the repelling branch: r = −2a, b = 2a³ − 2a, χ = 9a²
        let a = c(0.5, 0.1);
        let p = solve_critical_relation(&cubic_spec(), &[a, c(-0.7, 0.0)], &FreeSlice::coordinates(&[1], 2)).unwrap();
        assert!((p.lambda[1] - (2.0 * a * a * a - 2.0 * a)).norm() < 1e-12);
        assert!((p.landing_points[0] + 2.0 * a).norm() < 1e-12);
        assert!((p.multipliers[0] - 9.0 * a * a).norm() < 1e-10);
    }

    #[test]
    fn multiplier_examples() {
        let cheb = Polynomial::quadratic(c(-2.0, 0.0));
        assert_eq!(multiplier_at(&cheb, c(2.0, 0.0), 1).unwrap(), c(4.0, 0.0));
        let sq = Polynomial::quadratic(ZERO);
        assert_eq!(multiplier_at(&sq, ONE, 1).unwrap(), c(2.0, 0.0));
        let w = c(-0.5, 3f64.sqrt() / 2.0);
        assert!((multiplier_at(&sq, w, 2).unwrap() - c(4.0, 0.0)).norm() < 1e-12);
        assert!(matches!(multiplier_at(&sq, c(0.5, 0.0), 1), Err(Error::NotPeriodic { .. })));
    }

    #[test]
    fn hyperbolicity_reports() {
        let spec = FamilySpec::quadratic(vec![Relation::new(0, 2, 1)]).unwrap();
        let p = certify(&spec, &[c(-2.0, 0.0)]).unwrap();
        let r = lambda_hyperbolic_check(&p, 500);
        assert!(r.free.is_empty() && r.lambda_hyperbolic && r.przytycki_sum == 0.0);

        // a = 0.5: the free critical point −a is a superattracting fixed point
        let a = c(0.5, 0.0);
        let p = certify(&cubic_spec(), &[a, 2.0 * a * a * a - 2.0 * a]).unwrap();
        let r = lambda_hyperbolic_check(&p, 500);
        match &r.free[0].fate {
            CriticalFate::Attracted { period, cycle_point, multiplier } => {
                assert_eq!(*period, 1);
                assert!((cycle_point + a).norm() < 1e-12);
                assert!(multiplier.norm() < 1.0);
            }
            other => panic!("{other:?}"),
        }

        // a = √3: the free critical point escapes
        let a = c(3f64.sqrt(), 0.0);
        let p = certify(&cubic_spec(), &[a, 2.0 * a * a * a - 2.0 * a]).unwrap();
        let r = lambda_hyperbolic_check(&p, 500);
        assert!(matches!(r.free[0].fate, CriticalFate::Escaped { .. }));
        assert!(r.przytycki_sum > 0.0);
    }

    #[test]
    fn attracting_two_cycle_detected() {
        // z² − 1 has the superattracting cycle 0 ↔ −1; use it through a cubic-free check
        let f = Polynomial::quadratic(c(-1.0, 0.0));
        match critical_fate(&f, ZERO, 200) {
            CriticalFate::Attracted { period, .. } => assert_eq!(period, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn path_identity_and_continuity() {
        let spec = cubic_spec();
        let slice = FreeSlice::coordinates(&[1], 2);
        let a = c(0.5, 0.0);
        let start = solve_critical_relation(&spec, &[a, c(-0.7, 0.0)], &slice).unwrap();
        let same = family_path(&spec, &start, &start.lambda, &slice, 3).unwrap();
        assert_eq!(same.len(), 4);
        for p in &same {
            assert_eq!(p.lambda, start.lambda);
        }
        let end = [c(0.6, 0.05), c(-0.7, 0.0)];
        let path = family_path(&spec, &start, &end, &slice, 10).unwrap();
        for w in path.windows(2) {
            let (x, y) = (w[0].multipliers[0].norm(), w[1].multipliers[0].norm());
            assert!((x - y).abs() / x < 0.1);
        }
        for p in &path {
            assert!(p.relation_residuals[0] <= 1e-9 * p.poly.scale());
            // independent re-solve from the path value
            let again = solve_critical_relation(&spec, &p.lambda, &slice).unwrap();
            assert!((again.lambda[1] - p.lambda[1]).norm() < 1e-10);
        }
    }

    #[test]
    fn path_through_neutral_multiplier_gets_stuck() {
        // |χ| = 9|a|² crosses 1 at a = 1/3
        let spec = cubic_spec();
        let slice = FreeSlice::coordinates(&[1], 2);
        let start = solve_critical_relation(&spec, &[c(0.5, 0.0), c(-0.7, 0.0)], &slice).unwrap();
        let e = family_path(&spec, &start, &[c(0.2, 0.0), c(-0.7, 0.0)], &slice, 4).unwrap_err();
        assert!(matches!(e, Error::ContinuationStuck { .. }), "{e:?}");
    }

    #[test]
    fn family_def_round_trip() {
        let spec = FamilySpec::custom(&["l1", "-3*l0^2", "0", "1"], 2, vec![Relation::new(0, 1, 1)]).unwrap();
        let json = serde_json::to_string(&spec.to_def()).unwrap();
        let back = FamilySpec::from_def(&serde_json::from_str(&json).unwrap()).unwrap();
        let lam = [c(0.4, 0.1), c(0.3, -0.2)];
        assert_eq!(spec.poly(&lam).unwrap(), back.poly(&lam).unwrap());
        assert!(FamilySpec::quadratic(vec![Relation::new(0, 0, 1)]).is_err());
    }

    proptest! {
        #[test]
        fn emitted_points_are_certified(re in 0.45f64..1.6, im in -0.3f64..0.3) {
            let a = c(re, im);
            let p = solve_critical_relation(&cubic_spec(), &[a, 2.0 * a * a * a - 2.0 * a + c(0.01, 0.0)], &FreeSlice::coordinates(&[1], 2)).unwrap();
            let f = &p.poly;
            let crit = p.critical_points[0];
            let direct = (f.iterate(crit, 1) - f.iterate(crit, 2)).norm();
            prop_assert!(direct <= 1e-9 * f.scale());
            prop_assert!(p.multipliers[0].norm() >= 1.0 + 1e-6);
        }
    }
}

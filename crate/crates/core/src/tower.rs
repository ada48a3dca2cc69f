//! Tower extension of a Misiurewicz polynomial: nested critical domains,
//! the climb/fall map, the dilated metric and the weight `R`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MisiurewiczParam;
use crate::poly::{preimages, Polynomial};
use crate::C64;

/// Relative linearization error defining the disk geometry.
pub const LINEARIZATION_TOLERANCE: f64 = 0.1;
/// Relative margin around domain boundaries treated as ambiguous.
pub const BOUNDARY_MARGIN: f64 = 1e-6;
/// Default floor truncation for quadratic maps.
pub const DEFAULT_K_MAX: usize = 18;

/// Shape of the reference domain `V₀` around the landing point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// `V₀ = U₀ = B(0, radius)`; pieces of `f⁻¹(U₀)` are told apart by
    /// continuing the univalent inverse branches.
    Puzzle { radius: f64 },
    /// `V₀ = B(r, radius)` with `f` close to its linearization at `r`.
    Disk { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryChoice {
    Auto,
    Puzzle,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerOptions {
    pub chi_star: f64,
    pub k_max: usize,
    pub geometry: GeometryChoice,
    /// Relation of the parameter used to define the tower.
    pub relation: usize,
}

impl TowerOptions {
    pub fn new(chi_star: f64, k_max: usize) -> Self {
        TowerOptions { chi_star, k_max, geometry: GeometryChoice::Auto, relation: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerModel {
    pub poly: Polynomial,
    pub lambda: Vec<C64>,
    pub critical_index: usize,
    pub critical: C64,
    /// Steps from the critical point to the landing point.
    pub preperiod: usize,
    pub landing: C64,
    pub multiplier: C64,
    pub chi_hat: f64,
    pub chi_star: f64,
    pub k_max: usize,
    pub geometry: Geometry,
    /// Radius of the disk `U₀` containing the Julia set.
    pub u0_radius: f64,
    /// `|(f^{s−1})'(f(c))|·|f''(c)|`.
    pub a_eff: f64,
    /// `c, f(c), …, f^s(c) = r`.
    pub critical_orbit: Vec<C64>,
    /// Taylor coefficients of `f` about each point of the critical orbit.
    taylor: Vec<Vec<C64>>,
    /// Outer radius of `V_k` about `r`, `k = 0..=k_max`.
    pub v_radius: Vec<f64>,
    /// Outer radius of `U_k` about `c`, `k = 1..=k_max + 1`; index 0 holds `U₀`.
    pub u_radius: Vec<f64>,
    /// Simple preimages of `r` that start the univalent inverse branches.
    pub univalent_roots: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerPoint {
    pub z: C64,
    pub k: usize,
}

impl TowerPoint {
    pub fn new(z: C64, k: usize) -> Self {
        TowerPoint { z, k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "branch", content = "floor", rename_all = "snake_case")]
pub enum Branch {
    Climb,
    /// Fall from the given floor.
    Fall(usize),
    /// Fall from the top floor; mass above it is covered by the tail bound.
    TailFall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Inside,
    Outside,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerPreimages {
    pub points: Vec<(TowerPoint, Branch)>,
    /// Branches whose root finding failed.
    pub defects: usize,
    /// Preimages dropped because they are exactly critical.
    pub critical_skipped: usize,
}

impl TowerModel {
    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    /// `χ_*/√χ̂`.
    pub fn contraction(&self) -> f64 {
        self.chi_star / self.chi_hat.sqrt()
    }

    /// Bound on the weight carried above the top floor at exponent `t`.
    pub fn tail_bound(&self, t: f64) -> f64 {
        let q = self.contraction().powf(t);
        q.powi(self.k_max as i32) / (1.0 - q)
    }

    fn v0_center(&self) -> C64 {
        match self.geometry {
            Geometry::Puzzle { .. } => C64::new(0.0, 0.0),
            Geometry::Disk { .. } => self.landing,
        }
    }

    fn v0_radius(&self) -> f64 {
        match self.geometry {
            Geometry::Puzzle { radius } | Geometry::Disk { radius } => radius,
        }
    }

    fn v0_status(&self, w: C64) -> Membership {
        let d = (w - self.v0_center()).norm();
        let rho = self.v0_radius();
        if (d - rho).abs() <= BOUNDARY_MARGIN * rho {
            Membership::Boundary
        } else if d < rho {
            Membership::Inside
        } else {
            Membership::Outside
        }
    }

    /// Inverse branch of `f` fixing `r`, defined on `V₀`.
    pub fn pull_r(&self, w: C64) -> Option<C64> {
        if self.v0_status(w) == Membership::Outside {
            return None;
        }
        follow_branch(&self.poly, self.landing, self.landing, w, self.branch_steps())
    }

    fn branch_steps(&self) -> usize {
        match self.geometry {
            Geometry::Puzzle { .. } => 32,
            Geometry::Disk { .. } => 8,
        }
    }

    /// `g_r^n(w)`.
    pub fn pull_r_n(&self, mut w: C64, n: usize) -> Option<C64> {
        for _ in 0..n {
            w = self.pull_r(w)?;
        }
        Some(w)
    }

    /// `u` lies on a univalent branch of `f⁻¹` over `f(u)`; `None` if `f(u) ∉ V₀`.
    fn on_univalent_branch(&self, u: C64, roots: &[C64]) -> Option<bool> {
        let w = self.poly.eval(u);
        if self.v0_status(w) != Membership::Inside {
            return None;
        }
        Some(self.matches_branch(u, w, roots))
    }

    fn matches_branch(&self, u: C64, w: C64, roots: &[C64]) -> bool {
        let tol = 1e-8 * (1.0 + u.norm());
        roots.iter().any(|&q| follow_branch(&self.poly, q, self.landing, w, self.branch_steps()).is_some_and(|g| (g - u).norm() <= tol))
    }

    fn v_status(&self, z: C64, k: usize) -> Membership {
        self.v_status_offset(z - self.landing, k)
    }

    /// Status of `r + v` against `V_k`. Steps that stay well inside `V₁` are
    /// taken in offsets from `r`.
    fn v_status_offset(&self, mut v: C64, k: usize) -> Membership {
        let near = 0.02 * self.v_radius[1];
        let s = self.preperiod;
        let mut steps = 0;
        while steps < k && v.norm() < near {
            v = self.taylor_step(s, v);
            steps += 1;
        }
        let mut u = self.landing + v;
        let r_only = [self.landing];
        for _ in steps..k {
            match self.on_univalent_branch(u, &r_only) {
                Some(true) => u = self.poly.eval(u),
                _ => {
                    // f(u) outside or on the edge of V₀, or u on another sheet
                    let w = self.poly.eval(u);
                    return if self.v0_status(w) == Membership::Boundary { Membership::Boundary } else { Membership::Outside };
                }
            }
        }
        self.v0_status(u)
    }

    /// Largest `k ≤ k_max` with `z ∈ V_k`, or `None` outside `V₀`.
    pub fn v_level(&self, z: C64) -> Option<usize> {
        self.v_walk(z - self.landing, self.k_max)
    }

    /// Consecutive `g_r`-branch steps of `r + v`, capped at `max`.
    fn v_walk(&self, mut v: C64, max: usize) -> Option<usize> {
        let near = 0.02 * self.v_radius[1];
        let s = self.preperiod;
        let mut k = 0;
        while k < max && v.norm() < near {
            v = self.taylor_step(s, v);
            k += 1;
        }
        let mut u = self.landing + v;
        if k == 0 && self.v0_status(u) != Membership::Inside {
            return None;
        }
        let r_only = [self.landing];
        while k < max && self.on_univalent_branch(u, &r_only) == Some(true) {
            u = self.poly.eval(u);
            k += 1;
        }
        Some(k)
    }

    /// Largest `k ≤ k_max + 1` with `z ∈ U_k`.
    pub fn u_level(&self, z: C64) -> usize {
        if self.u_status(z, 2) != Membership::Inside {
            return 1;
        }
        let vl = match self.anchored_state(z, self.preperiod) {
            (Some(i), v) if i == self.preperiod => self.v_walk(v, self.k_max),
            (Some(i), v) => self.v_walk(self.critical_orbit[i] + v - self.landing, self.k_max),
            (None, w) => self.v_walk(w - self.landing, self.k_max),
        };
        let mut k = vl.map_or(1, |l| l + 1).max(2);
        while k > 2 && !self.in_critical_region(z, k) {
            k -= 1;
        }
        k
    }

    /// `z ∈ V_k`.
    pub fn in_v(&self, z: C64, k: usize) -> bool {
        self.v_status(z, k) == Membership::Inside
    }

    fn in_critical_region(&self, z: C64, k: usize) -> bool {
        match self.geometry {
            Geometry::Puzzle { .. } => {
                matches!(self.on_univalent_branch(z, &self.univalent_roots), Some(false))
            }
            Geometry::Disk { .. } => (z - self.critical).norm() <= 1.5 * self.u_radius[k.min(self.u_radius.len() - 1)],
        }
    }

    /// Classification of `z` against `U_k` for `k ≥ 1`.
    pub fn u_status(&self, z: C64, k: usize) -> Membership {
        if k <= 1 {
            return match self.geometry {
                Geometry::Puzzle { .. } if !self.in_critical_region(z, 1) => Membership::Outside,
                _ => Membership::Inside,
            };
        }
        if !self.in_critical_region(z, k) {
            return Membership::Outside;
        }
        match self.anchored_state(z, self.preperiod) {
            (Some(i), v) if i == self.preperiod => self.v_status_offset(v, k - 1),
            (Some(i), v) => self.v_status(self.critical_orbit[i] + v, k - 1),
            (None, w) => self.v_status(w, k - 1),
        }
    }

    /// `z ∈ U_{k+1}`: the climb condition on floor `k`. Boundary points are not members.
    pub fn floor_membership(&self, z: C64, k: usize) -> bool {
        self.u_status(z, k + 1) == Membership::Inside
    }

    /// The climb/fall map.
    pub fn tower_map(&self, p: TowerPoint) -> Result<TowerPoint> {
        if p.k == 0 || p.k > self.k_max {
            return Err(Error::ParamOutOfRange(format!("floor {} outside 1..={}", p.k, self.k_max)));
        }
        if self.floor_membership(p.z, p.k) {
            if p.k == self.k_max {
                return Err(Error::TruncationHit { k_max: self.k_max });
            }
            return Ok(TowerPoint::new(p.z, p.k + 1));
        }
        Ok(TowerPoint::new(self.iterate_anchored(p.z, p.k), 1))
    }

    /// `f^n(z)`, tracking points near the critical orbit as offsets from it
    /// so that the expansion at `r` does not amplify rounding of `z`.
    pub fn iterate_anchored(&self, z: C64, n: usize) -> C64 {
        match self.anchored_state(z, n) {
            (Some(i), d) => self.critical_orbit[i] + d,
            (None, d) => d,
        }
    }

    /// `f^n(z)` as `(orbit index, offset)` while it stays near the critical
    /// orbit, or `(None, absolute value)` once it leaves.
    fn anchored_state(&self, z: C64, n: usize) -> (Option<usize>, C64) {
        let orbit = &self.critical_orbit;
        let near = 0.05 * (1.0 + self.poly.scale());
        let mut anchor = orbit
            .iter()
            .enumerate()
            .map(|(i, a)| (i, (z - a).norm()))
            .filter(|&(_, d)| d < near)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        let mut delta = anchor.map_or(z, |i| z - orbit[i]);
        for _ in 0..n {
            match anchor {
                Some(i) => {
                    delta = self.taylor_step(i, delta);
                    let next = (i + 1).min(orbit.len() - 1);
                    if delta.norm() < near {
                        anchor = Some(next);
                    } else {
                        delta += orbit[next];
                        anchor = None;
                    }
                }
                None => delta = self.poly.eval(delta),
            }
        }
        (anchor, delta)
    }

    /// `f(a_i + e) − f(a_i)`.
    fn taylor_step(&self, i: usize, e: C64) -> C64 {
        let b = &self.taylor[i];
        let mut acc = C64::new(0.0, 0.0);
        for &bj in b[1..].iter().rev() {
            acc = acc * e + bj;
        }
        acc * e
    }

    /// The top floor falls from all of `U_K`.
    pub fn tower_map_truncated(&self, p: TowerPoint) -> Result<TowerPoint> {
        if p.k == self.k_max {
            return Ok(TowerPoint::new(self.iterate_anchored(p.z, p.k), 1));
        }
        self.tower_map(p)
    }

    pub fn tower_distance(&self, p: TowerPoint, q: TowerPoint) -> f64 {
        if p.k != q.k {
            return f64::INFINITY;
        }
        self.chi_star.powi(p.k as i32 - 1) * (p.z - q.z).norm()
    }

    /// `R(y)`: `χ_*` on a climb, `χ_*^{1−k}|(f^k)'(y)|` on a fall from floor `k`.
    /// `f` and `y` are the moved map and point.
    pub fn weight_r(&self, f: &Polynomial, y: C64, k: usize, climb: bool) -> f64 {
        if climb {
            return self.chi_star;
        }
        let (_, d) = f.iterate_d1(y, k);
        self.chi_star.powi(1 - k as i32) * d.norm()
    }

    /// Preimages of `w` under `f^s` near the critical point.
    pub fn critical_pullback(&self, w: C64) -> Result<Vec<C64>> {
        self.critical_pullback_n(w, self.preperiod)
    }

    /// Preimages of `w` under `f^n` (`1 ≤ n ≤ s`) along the critical orbit.
    pub fn critical_pullback_n(&self, w: C64, n: usize) -> Result<Vec<C64>> {
        let mut u = w;
        for i in (1..n).rev() {
            let target = self.critical_orbit[i];
            u = nearest(&preimages(&self.poly, u)?, target);
        }
        let pre = preimages(&self.poly, u)?;
        let picked: Vec<C64> = match self.geometry {
            Geometry::Puzzle { .. } if n == 1 => pre.into_iter().filter(|&y| !self.matches_branch(y, u, &self.univalent_roots)).collect(),
            _ => {
                let mut by_dist: Vec<C64> = pre;
                by_dist.sort_by(|a, b| (a - self.critical).norm().total_cmp(&(b - self.critical).norm()));
                by_dist.truncate(2);
                by_dist
            }
        };
        if picked.len() != 2 {
            return Err(Error::RootFindingFailed(format!("expected 2 critical preimages, found {}", picked.len())));
        }
        Ok(picked)
    }

    /// `g_r^j(x)` for `j = 1..=n` with their offsets from `r`, stopping early
    /// when a pullback leaves the domain of `g_r`.
    pub fn pull_chain(&self, x: C64, n: usize) -> Vec<(C64, C64)> {
        let s = self.preperiod;
        let r = self.critical_orbit[s];
        let mut out = Vec::with_capacity(n);
        let mut w = x;
        let mut v = x - r;
        for _ in 0..n {
            let Some(next) = self.pull_r(w) else { break };
            v = self.local_solve(s, v, next - r);
            w = r + v;
            out.push((w, v));
        }
        out
    }

    /// The two chains `[y, f(y), …, f^{n−1}(y)]` with `f^n(y) = a_n + v = w`
    /// along the critical orbit.
    pub fn critical_chains(&self, w: C64, v: C64, n: usize) -> Result<Vec<Vec<C64>>> {
        let ys = self.critical_pullback_n(w, n)?;
        let mut tail = vec![C64::new(0.0, 0.0); n];
        let mut z = self.poly.eval(ys[0]);
        let mut e = v;
        let mut guesses = Vec::with_capacity(n);
        for i in 1..n {
            guesses.push(z - self.critical_orbit[i]);
            z = self.poly.eval(z);
        }
        for i in (1..n).rev() {
            e = self.local_solve(i, e, guesses[i - 1]);
            tail[i] = self.critical_orbit[i] + e;
        }
        // near the critical point the local solution is an m-th root of the target
        let b = &self.taylor[0];
        let big = b[1..].iter().map(|x| x.norm()).fold(0.0, f64::max);
        let m = (1..b.len()).find(|&j| b[j].norm() > 1e-9 * big).unwrap_or(1);
        let root = (e / b[m]).powf(1.0 / m as f64);
        let mut seeds: Vec<C64> = (0..2).map(|j| root * C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64)).collect();
        let c = self.critical_orbit[0];
        let keep = (ys[0] - c - seeds[0]).norm() + (ys[1] - c - seeds[1]).norm();
        let swap = (ys[0] - c - seeds[1]).norm() + (ys[1] - c - seeds[0]).norm();
        if swap < keep {
            seeds.swap(0, 1);
        }
        Ok(seeds
            .into_iter()
            .map(|s0| {
                let mut chain = tail.clone();
                chain[0] = c + self.local_solve(0, e, s0);
                chain
            })
            .collect())
    }

    /// Orbit segments `[y, …, f^{k−1}(y)]` of the candidate fall points from
    /// floor `k ≥ 2` over `x`, before membership filtering. `pulls` holds
    /// `pull_chain(x, ·)` and is extended on demand.
    pub fn fall_chains_with(&self, x: C64, k: usize, pulls: &[(C64, C64)]) -> Result<Vec<Vec<C64>>> {
        let n = k.min(self.preperiod);
        let j = k - n;
        let (w, v) = if j == 0 {
            (x, x - self.critical_orbit[n])
        } else {
            match pulls.get(j - 1) {
                Some(&p) => p,
                None => return Ok(vec![]),
            }
        };
        let mut chains = self.critical_chains(w, v, n)?;
        for c in &mut chains {
            c.extend(pulls[..j].iter().rev().map(|p| p.0));
        }
        Ok(chains)
    }

    /// Candidate fall points from floor `k ≥ 2` over `x`, before membership filtering.
    pub fn fall_candidates(&self, x: C64, k: usize) -> Result<Vec<C64>> {
        let pulls = self.pull_chain(x, k.saturating_sub(self.preperiod));
        Ok(self.fall_chains_with(x, k, &pulls)?.into_iter().map(|c| c[0]).collect())
    }

    /// Solves `f(a_i + e) − a_{i+1} = target` for `e` near `guess`, in
    /// offsets from the critical orbit point `a_i`.
    fn local_solve(&self, i: usize, target: C64, guess: C64) -> C64 {
        let b = &self.taylor[i];
        let mut e = guess;
        for _ in 0..40 {
            let (mut val, mut der) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for (j, &bj) in b.iter().enumerate().skip(1).rev() {
                der = der * e + bj * j as f64;
                val = val * e + bj;
            }
            val = val * e - target;
            if der == C64::new(0.0, 0.0) {
                break;
            }
            let step = val / der;
            e -= step;
            if !(step.norm() > 1e-16 * e.norm()) {
                break;
            }
        }
        if e.is_finite() {
            e
        } else {
            guess
        }
    }

    /// Whether a fall point from floor `k` passes the floor test.
    pub fn is_fall_point(&self, y: C64, k: usize) -> bool {
        if self.u_status(y, k) != Membership::Inside {
            return false;
        }
        self.u_status(y, k + 1) == Membership::Outside
    }

    pub fn enumerate_tower_preimages(&self, x: TowerPoint) -> Result<TowerPreimages> {
        let mut out = TowerPreimages { points: Vec::new(), defects: 0, critical_skipped: 0 };
        if x.k >= 2 {
            out.points.push((TowerPoint::new(x.z, x.k - 1), Branch::Climb));
            return Ok(out);
        }
        match preimages(&self.poly, x.z) {
            Ok(ys) => {
                for y in ys {
                    if self.poly.critical_points().contains(&y) {
                        out.critical_skipped += 1;
                    } else if self.u_status(y, 2) == Membership::Outside {
                        out.points.push((TowerPoint::new(y, 1), Branch::Fall(1)));
                    }
                }
            }
            Err(_) => out.defects += 1,
        }
        for k in 2..=self.k_max {
            let ys = match self.fall_candidates(x.z, k) {
                Ok(ys) => ys,
                Err(_) => {
                    out.defects += 1;
                    continue;
                }
            };
            for y in ys {
                if y == self.critical {
                    out.critical_skipped += 1;
                } else if self.is_fall_point(y, k) {
                    let b = if k == self.k_max { Branch::TailFall(k) } else { Branch::Fall(k) };
                    out.points.push((TowerPoint::new(y, k), b));
                }
            }
        }
        Ok(out)
    }

    /// `(floor, center, radius)` rows for `V_k` then `U_k`.
    pub fn geometry_rows(&self) -> Vec<(String, usize, C64, f64)> {
        let mut rows = Vec::new();
        for (k, &r) in self.v_radius.iter().enumerate() {
            let center = if k == 0 { self.v0_center() } else { self.landing };
            rows.push(("V".to_string(), k, center, r));
        }
        for (k, &r) in self.u_radius.iter().enumerate() {
            let center = if k == 0 { C64::new(0.0, 0.0) } else { self.critical };
            rows.push(("U".to_string(), k, center, r));
        }
        rows
    }

    /// Diameter of floor `k ≥ 2` in the dilated metric.
    pub fn floor_diameter(&self, k: usize) -> f64 {
        self.chi_star.powi(k as i32 - 1) * 2.0 * self.u_radius[k]
    }
}

/// Coefficients of `f(a + δ)` in powers of `δ`.
fn taylor_coeffs(coeffs: &[C64], a: C64) -> Vec<C64> {
    let mut b = coeffs.to_vec();
    let n = b.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let hi = b[j + 1];
            b[j] += a * hi;
        }
    }
    b
}

fn nearest(pts: &[C64], target: C64) -> C64 {
    *pts.iter().min_by(|a, b| (*a - target).norm().total_cmp(&(*b - target).norm())).expect("nonempty preimage set")
}

/// Continues the root `z0` of `f(z) = w0` along the segment to `w1`.
pub fn follow_branch(f: &Polynomial, z0: C64, w0: C64, w1: C64, steps: usize) -> Option<C64> {
    let mut z = z0;
    let mut s = 0.0f64;
    let mut ds = 1.0 / steps as f64;
    let mut halvings = 0;
    while s < 1.0 {
        let s1 = (s + ds).min(1.0);
        let target = w0 + (w1 - w0) * s1;
        let (fz, d) = f.eval_d1(z);
        if d.norm() == 0.0 {
            return None;
        }
        let mut y = z - (fz - target) / d;
        let mut ok = false;
        for _ in 0..30 {
            let (fy, dy) = f.eval_d1(y);
            let step = (fy - target) / dy;
            if !step.is_finite() {
                break;
            }
            y -= step;
            if step.norm() <= 1e-15 * (1.0 + y.norm()) {
                ok = true;
                break;
            }
        }
        let residual = (f.eval(y) - target).norm();
        ok = ok || residual <= 1e-13 * f.scale().max(1.0) * (1.0 + target.norm());
        // reject jumps to another sheet
        let jump = (y - z).norm();
        let expected = ((w1 - w0) * ds).norm() / d.norm();
        if ok && jump <= 4.0 * expected + 1e-14 {
            z = y;
            s = s1;
            ds = (ds * 1.5).min(1.0 / steps as f64);
        } else {
            ds *= 0.5;
            halvings += 1;
            if halvings > 60 || ds < 1e-9 {
                return None;
            }
        }
    }
    Some(z)
}

/// Radius of the disk about `r` on which `f` is within `tol` of its linearization.
pub fn linearization_radius(f: &Polynomial, r: C64, chi: C64, tol: f64) -> Result<f64> {
    let ok = |rho: f64| {
        (0..64).all(|j| {
            let u = C64::from_polar(rho, std::f64::consts::TAU * (j as f64 + 0.5) / 64.0);
            let lin = chi * u;
            (f.eval(r + u) - r - lin).norm() <= tol * lin.norm()
        })
    };
    let mut hi = 1e-3;
    if !ok(1e-12) {
        return Err(Error::LinearizationFailed);
    }
    let cap = f.default_escape_radius();
    while ok(hi) {
        hi *= 2.0;
        if hi > cap {
            return Ok(cap);
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::LinearizationFailed);
    }
    Ok(lo)
}

pub fn build_tower(param: &MisiurewiczParam, chi_star: f64, k_max: usize) -> Result<TowerModel> {
    build_tower_with(param, TowerOptions::new(chi_star, k_max))
}

pub fn build_tower_with(param: &MisiurewiczParam, opts: TowerOptions) -> Result<TowerModel> {
    let rel = *param.relations.get(opts.relation).ok_or_else(|| Error::NotMisiurewicz("parameter carries no critical relation".into()))?;
    if rel.period != 1 {
        return Err(Error::NotMisiurewicz(format!("landing cycle has period {}, tower needs a fixed point", rel.period)));
    }
    if rel.preperiod == 0 {
        return Err(Error::NotMisiurewicz("critical point is periodic".into()));
    }
    let f = param.poly.clone();
    let c = param.critical_points[rel.critical_index];
    let multiplicity = f.critical_points().iter().filter(|&&x| (x - c).norm() < 1e-9).count();
    if multiplicity != 1 {
        return Err(Error::NotMisiurewicz(format!("critical point of multiplicity {multiplicity}")));
    }
    let r = param.landing_points[opts.relation];
    let chi = param.multipliers[opts.relation];
    let chi_hat = chi.norm();
    if !(opts.chi_star > 1.0 + 1e-6 && opts.chi_star * opts.chi_star < chi_hat - 1e-6) {
        return Err(Error::ParamOutOfRange(format!(
            "chi_star = {} must satisfy 1 < chi_star < sqrt(chi_hat) = {:.6}",
            opts.chi_star,
            chi_hat.sqrt()
        )));
    }
    if opts.k_max < 4 {
        return Err(Error::ParamOutOfRange(format!("k_max = {} below 4", opts.k_max)));
    }
    let s = rel.preperiod;
    let mut orbit = vec![c];
    for _ in 0..s {
        orbit.push(f.eval(*orbit.last().unwrap()));
    }
    for (i, &ci) in orbit.iter().enumerate().skip(1).take(s - 1) {
        if f.derivative(ci).norm() < 1e-12 {
            return Err(Error::NotMisiurewicz(format!("critical orbit meets a critical point at step {i}")));
        }
    }
    let (_, ds) = f.iterate_d1(orbit[1], s - 1);
    let (_, _, d2) = f.eval_d2(c);
    let a_eff = ds.norm() * d2.norm();
    let u0 = f.default_escape_radius();
    let puzzle_ok =
        s == 1 && f.degree() >= 3 && f.distinct_critical_points().iter().all(|&(cj, _)| (cj - c).norm() < 1e-9 || f.eval(cj).norm() > u0);
    let geometry = match opts.geometry {
        GeometryChoice::Puzzle if !puzzle_ok => {
            return Err(Error::ParamOutOfRange("puzzle geometry needs preperiod 1 and all other critical values outside U0".into()))
        }
        GeometryChoice::Puzzle => Geometry::Puzzle { radius: u0 },
        GeometryChoice::Auto if puzzle_ok => Geometry::Puzzle { radius: u0 },
        _ => Geometry::Disk { radius: linearization_radius(&f, r, chi, LINEARIZATION_TOLERANCE)? },
    };
    let univalent_roots: Vec<C64> = {
        let mut pre = preimages(&f, r)?;
        pre.retain(|&y| (y - c).norm() > 1e-9);
        pre
    };
    let mut model = TowerModel {
        poly: f.clone(),
        lambda: param.lambda.clone(),
        critical_index: rel.critical_index,
        critical: c,
        preperiod: s,
        landing: r,
        multiplier: chi,
        chi_hat,
        chi_star: opts.chi_star,
        k_max: opts.k_max,
        geometry,
        u0_radius: u0,
        a_eff,
        taylor: orbit.iter().map(|&a| taylor_coeffs(f.coeffs(), a)).collect(),
        critical_orbit: orbit,
        v_radius: vec![],
        u_radius: vec![],
        univalent_roots,
    };
    // boundary of V₀, pulled back along the fixed branch
    let n_bdry = 64;
    let center = model.v0_center();
    let rho0 = model.v0_radius();
    let mut ring: Vec<C64> = (0..n_bdry)
        .map(|j| center + C64::from_polar(rho0 * (1.0 - 1e-9), std::f64::consts::TAU * (j as f64 + 0.25) / n_bdry as f64))
        .collect();
    let mut v_radius = vec![ring.iter().map(|z| (z - r).norm()).fold(0.0, f64::max)];
    let mut u_radius = vec![u0];
    // the ring is carried as offsets from r so that deep floors keep their precision
    let mut offsets: Vec<C64> = ring.iter().map(|&w| w - r).collect();
    let s = model.preperiod;
    for k in 1..=opts.k_max + 1 {
        // U_k comes from ∂V_{k−1}
        let mut ru: f64 = 0.0;
        for (&w, &v) in ring.iter().zip(&offsets) {
            for chain in model.critical_chains(w, v, s)? {
                ru = ru.max((chain[0] - c).norm());
            }
        }
        u_radius.push(ru);
        if k <= opts.k_max {
            for (w, v) in ring.iter_mut().zip(offsets.iter_mut()) {
                let next = model.pull_r(*w).ok_or(Error::LinearizationFailed)?;
                *v = model.local_solve(s, *v, next - r);
                *w = r + *v;
            }
            v_radius.push(offsets.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    model.v_radius = v_radius;
    model.u_radius = u_radius;
    Ok(model)
}

/// `e^P > χ̂^{−(t₁+t₂)/2}`.
pub fn check_gap_condition(model: &TowerModel, t1: f64, t2: f64, p_est: f64) -> bool {
    gap_condition(model.chi_hat, t1, t2, p_est)
}

pub fn gap_condition(chi_hat: f64, t1: f64, t2: f64, p_est: f64) -> bool {
    p_est.exp() > chi_hat.powf(-(t1 + t2) / 2.0)
}

//! Preimage trees and their transport along parameter segments: a finite
//! version of the holomorphic motion of the Julia set.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::par;
use crate::poly::{preimages, Polynomial};
use crate::spatial::GridIndex;
use crate::C64;

/// Default node budget for the deepest tree level.
pub const NODE_BUDGET: usize = 1 << 20;

const NO_PARENT: u32 = u32::MAX;
const NOT_CRITICAL: u8 = u8::MAX;

/// How the root of a tree or chain moves with the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum BaseKind {
    /// Held fixed in the plane.
    Constant,
    /// The marked critical point `c_j(λ)`.
    Critical(usize),
    /// The critical value `f_λ(c_j(λ))`.
    CriticalValue(usize),
    /// A periodic point of the given period, continued by Newton.
    Periodic(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeLevel {
    pub points: Vec<C64>,
    /// `(f^n)'(z)`; exactly zero below a critical node.
    pub derivs: Vec<C64>,
    /// Node coincides with a critical point.
    pub critical: Vec<bool>,
}

/// Complete D-ary tree of iterated preimages of `base`.
///
/// Node `i` of level `k` has parent `i / D`; its itinerary is the base-D
/// expansion of `i` (sibling order is the lexicographic preimage order).
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageTree {
    pub degree: usize,
    pub base: C64,
    pub base_kind: BaseKind,
    pub levels: Vec<TreeLevel>,
}

impl PreimageTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &TreeLevel {
        &self.levels[k]
    }

    /// Itinerary word of node `i` on level `k`, first symbol for the first pullback.
    pub fn itinerary(&self, k: usize, mut i: usize) -> Vec<u8> {
        let mut w = vec![0u8; k];
        for slot in w.iter_mut().rev() {
            *slot = (i % self.degree) as u8;
            i /= self.degree;
        }
        w
    }

    /// `log|(f^n)'|` per node of level `n`.
    pub fn log_abs_derivs(&self, n: usize) -> Vec<f64> {
        self.levels[n].derivs.iter().map(|d| d.norm().ln()).collect()
    }

    /// JSON lines `{"level", "itinerary", "z", "deriv"}` for every node.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, lvl) in self.levels.iter().enumerate() {
            for i in 0..lvl.points.len() {
                let word: String = self.itinerary(k, i).iter().map(|d| char::from(b'0' + d)).collect();
                let rec = serde_json::json!({
                    "level": k,
                    "itinerary": word,
                    "z": [lvl.points[i].re, lvl.points[i].im],
                    "deriv": [lvl.derivs[i].re, lvl.derivs[i].im],
                });
                writeln!(out, "{rec}")?;
            }
        }
        Ok(())
    }
}

/// Tree with a constant base.
pub fn build_preimage_tree(f: &Polynomial, base: C64, depth: usize) -> Result<PreimageTree> {
    build_tree_with(f, base, BaseKind::Constant, depth, NODE_BUDGET)
}

pub fn build_tree_with(f: &Polynomial, base: C64, base_kind: BaseKind, depth: usize, budget: usize) -> Result<PreimageTree> {
    let d = f.degree();
    let needed = (d as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget: budget as u128 });
    }
    let crit = f.critical_points();
    let mut levels = vec![TreeLevel { points: vec![base], derivs: vec![C64::new(1.0, 0.0)], critical: vec![crit.contains(&base)] }];
    for _ in 0..depth {
        let prev = levels.last().unwrap();
        let idx: Vec<usize> = (0..prev.points.len()).collect();
        let kids = par::try_map(&idx, |&i| -> Result<Vec<(C64, C64, bool)>> {
            let w = prev.points[i];
            let dw = prev.derivs[i];
            Ok(preimages(f, w)?
                .into_iter()
                .map(|z| {
                    let is_crit = crit.contains(&z);
                    let dz = if is_crit { C64::new(0.0, 0.0) } else { f.derivative(z) * dw };
                    (z, dz, is_crit)
                })
                .collect())
        })?;
        let n = prev.points.len() * d;
        let mut lvl = TreeLevel { points: Vec::with_capacity(n), derivs: Vec::with_capacity(n), critical: Vec::with_capacity(n) };
        for (z, dz, c) in kids.into_iter().flatten() {
            lvl.points.push(z);
            lvl.derivs.push(dz);
            lvl.critical.push(c);
        }
        levels.push(lvl);
    }
    Ok(PreimageTree { degree: d, base, base_kind, levels })
}

/// Points linked by `f(point) = parent`, rooted at moving base points.
///
/// Parents always precede children, so a single forward sweep can move
/// every point once its parent has moved.
#[derive(Debug, Clone, Default)]
pub struct Arena {
    pub points: Vec<C64>,
    parent: Vec<u32>,
    root_kind: Vec<Option<BaseKind>>,
    critical: Vec<u8>,
    depth: Vec<u32>,
}

impl Arena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push_root(&mut self, z: C64, kind: BaseKind) -> usize {
        self.points.push(z);
        self.parent.push(NO_PARENT);
        self.root_kind.push(Some(kind));
        self.critical.push(NOT_CRITICAL);
        self.depth.push(0);
        self.points.len() - 1
    }

    /// Adds `z` with `f(z) = points[parent]`; `critical` marks an exact critical point.
    pub fn push(&mut self, z: C64, parent: usize, critical: Option<usize>) -> usize {
        assert!(parent < self.points.len(), "parent must precede child");
        self.points.push(z);
        self.parent.push(parent as u32);
        self.root_kind.push(None);
        self.critical.push(critical.map_or(NOT_CRITICAL, |j| j as u8));
        self.depth.push(self.depth[parent] + 1);
        self.points.len() - 1
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        let p = self.parent[i];
        (p != NO_PARENT).then_some(p as usize)
    }

    pub fn critical_index(&self, i: usize) -> Option<usize> {
        let c = self.critical[i];
        (c != NOT_CRITICAL).then_some(c as usize)
    }

    /// `f^k` image of point `i`, following parent links.
    pub fn ancestor(&self, mut i: usize, k: usize) -> Option<usize> {
        for _ in 0..k {
            i = self.parent(i)?;
        }
        Some(i)
    }

    fn generations(&self) -> Vec<Vec<usize>> {
        let max = self.depth.iter().copied().max().unwrap_or(0) as usize;
        let mut g = vec![Vec::new(); max + 1];
        for (i, &d) in self.depth.iter().enumerate() {
            g[d as usize].push(i);
        }
        g
    }

    /// Groups of children sharing a parent that are distinct at the start.
    fn sibling_groups(&self) -> Vec<Vec<usize>> {
        let mut by_parent: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for (i, &p) in self.parent.iter().enumerate() {
            if p != NO_PARENT {
                by_parent.entry(p).or_default().push(i);
            }
        }
        by_parent
            .into_values()
            .filter(|v| v.len() > 1)
            .map(|mut v| {
                v.sort_by(|&a, &b| crate::roots::lex_cmp(&self.points[a], &self.points[b]));
                v.dedup_by(|a, b| (self.points[*a] - self.points[*b]).norm() <= 1e-12);
                v
            })
            .filter(|v| v.len() > 1)
            .collect()
    }

    /// Positions of every point at `lambda1`, continued from `lambda0` along
    /// the straight segment.
    pub fn transport(&self, spec: &FamilySpec, lambda0: &[C64], lambda1: &[C64], opts: TransportOptions) -> Result<Vec<C64>> {
        let dist = lambda0.iter().zip(lambda1).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let lin = |s: f64| -> Result<Vec<C64>> { Ok(lambda0.iter().zip(lambda1).map(|(&a, &b)| a + (b - a) * s).collect()) };
        self.transport_along(spec, lin, dist, opts)
    }

    /// Positions continued along the parameter path `path(s)`, `s ∈ [0, 1]`,
    /// starting from the current points at `path(0)`; `length` sets the
    /// default step count.
    pub fn transport_along<P>(&self, spec: &FamilySpec, path: P, length: f64, opts: TransportOptions) -> Result<Vec<C64>>
    where
        P: Fn(f64) -> Result<Vec<C64>>,
    {
        if length == 0.0 {
            return Ok(self.points.clone());
        }
        let steps = opts.steps.unwrap_or_else(|| (length / 0.01).ceil().max(1.0) as usize);
        let gens = self.generations();
        let siblings = self.sibling_groups();
        let mut pos = self.points.clone();
        let mut crit = spec.critical_points(&path(0.0)?)?;
        let mut s = 0.0;
        let base_ds = 1.0 / steps as f64;
        let mut ds = base_ds;
        while s < 1.0 {
            let s_next = if s + ds > 1.0 - 1e-14 { 1.0 } else { s + ds };
            let lam = path(s_next)?;
            let f = spec.poly(&lam)?;
            let crit_next = spec.critical_points(&lam)?;
            match self.advance(&f, &crit, &crit_next, &pos, &gens, &siblings) {
                Ok(next) => {
                    pos = next;
                    crit = crit_next;
                    s = s_next;
                    ds = (ds * 2.0).min(base_ds);
                }
                Err(separation) => {
                    ds *= 0.5;
                    if ds < opts.min_fraction {
                        return Err(Error::BranchCollision { separation });
                    }
                }
            }
        }
        Ok(pos)
    }

    fn advance(
        &self,
        f: &Polynomial,
        crit_old: &[C64],
        crit_new: &[C64],
        old: &[C64],
        gens: &[Vec<usize>],
        siblings: &[Vec<usize>],
    ) -> std::result::Result<Vec<C64>, f64> {
        let mut new = old.to_vec();
        for gen in gens {
            let moved: Vec<std::result::Result<C64, f64>> = par::map(gen, |&i| {
                if let Some(kind) = self.root_kind[i] {
                    return move_root(f, kind, old[i], crit_new);
                }
                if let Some(j) = self.critical_index(i) {
                    return Ok(crit_new[j]);
                }
                follow_preimage(f, new[self.parent[i] as usize], old[i], crit_old, crit_new)
            });
            for (&i, m) in gen.iter().zip(moved) {
                new[i] = m?;
            }
        }
        for g in siblings {
            for (a, &i) in g.iter().enumerate() {
                for &j in &g[a + 1..] {
                    let sep = (new[i] - new[j]).norm();
                    if sep <= 1e-12 {
                        return Err(sep);
                    }
                }
            }
        }
        Ok(new)
    }
}

fn move_root(f: &Polynomial, kind: BaseKind, z_old: C64, crit: &[C64]) -> std::result::Result<C64, f64> {
    match kind {
        BaseKind::Constant => Ok(z_old),
        BaseKind::Critical(j) => Ok(crit[j]),
        BaseKind::CriticalValue(j) => Ok(f.eval(crit[j])),
        BaseKind::Periodic(m) => {
            let mut z = z_old;
            for it in 0..50 {
                let (w, d) = f.iterate_d1(z, m);
                let dg = d - 1.0;
                if dg.norm() < 1e-3 {
                    return Err(dg.norm());
                }
                let step = (w - z) / dg;
                if it == 0 && step.norm() > 0.1 * (1.0 + z.norm()) {
                    return Err(step.norm());
                }
                z -= step;
                if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                    return Ok(z);
                }
            }
            Ok(z)
        }
    }
}

/// Newton continuation of the preimage of `p` that sat at `z_old`, with a
/// Kantorovich-style acceptance test. Near-critical points are predicted by
/// translating along with the nearest critical point.
fn follow_preimage(f: &Polynomial, p: C64, z_old: C64, crit_old: &[C64], crit_new: &[C64]) -> std::result::Result<C64, f64> {
    let mut cands = vec![z_old];
    if let Some((j, _)) = crit_old.iter().enumerate().map(|(j, c)| (j, (c - z_old).norm())).min_by(|a, b| a.1.total_cmp(&b.1)) {
        let shift = crit_new[j] - crit_old[j];
        if shift.norm() > 0.0 {
            cands.push(z_old + shift);
        }
        // local square root at the moved critical point
        let cn = crit_new[j];
        let (fc, _, f2) = f.eval_d2(cn);
        if f2.norm() > 0.0 {
            let e = ((p - fc) / (0.5 * f2)).sqrt();
            let e_old = z_old - crit_old[j];
            cands.push(if (e - e_old).norm() <= (-e - e_old).norm() { cn + e } else { cn - e });
        }
    }
    let mut best: Option<(f64, C64)> = None;
    for z in cands {
        let (w, d1, d2) = f.eval_d2(z);
        if d1.norm() == 0.0 {
            if (w - p).norm() <= 1e-15 * (1.0 + p.norm()) {
                return Ok(z);
            }
            continue;
        }
        let step = (w - p) / d1;
        let h = step.norm() * d2.norm() / d1.norm();
        if best.is_none_or(|(bh, _)| h < bh) {
            best = Some((h, z));
        }
    }
    let Some((h, mut z)) = best else { return Err(0.0) };
    if !(h <= 0.25) {
        return Err(f.derivative(z).norm());
    }
    for _ in 0..40 {
        let (w, d1) = f.eval_d1(z);
        let step = (w - p) / d1;
        z -= step;
        if !(step.norm() > 1e-15 * (1.0 + z.norm())) {
            if step.norm().is_nan() {
                return Err(0.0);
            }
            return Ok(z);
        }
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Initial step count; defaults to `ceil(|λ₁ − λ₀| / 0.01)`.
    pub steps: Option<usize>,
    /// Smallest step as a fraction of the segment before giving up.
    pub min_fraction: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { steps: None, min_fraction: 1e-7 }
    }
}

/// Trees at two parameters related by the itinerary-preserving bijection.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedTree {
    pub lambda0: Vec<C64>,
    pub lambda1: Vec<C64>,
    pub tree0: PreimageTree,
    pub tree1: PreimageTree,
    pub conjugacy_residual: f64,
}

impl MatchedTree {
    /// Identity motion.
    pub fn identity(tree: PreimageTree, lambda: &[C64]) -> Self {
        MatchedTree { lambda0: lambda.to_vec(), lambda1: lambda.to_vec(), tree1: tree.clone(), tree0: tree, conjugacy_residual: 0.0 }
    }
}

/// Continues every node of `tree0` from `lambda0` to `lambda1`.
pub fn transport_tree(
    spec: &FamilySpec,
    tree0: &PreimageTree,
    lambda0: &[C64],
    lambda1: &[C64],
    steps: Option<usize>,
) -> Result<MatchedTree> {
    if lambda0 == lambda1 {
        return Ok(MatchedTree::identity(tree0.clone(), lambda0));
    }
    let crit0 = spec.critical_points(lambda0)?;
    let mut arena = Arena::new();
    arena.push_root(tree0.base, tree0.base_kind);
    let mut offset = 0usize;
    for k in 1..tree0.levels.len() {
        let lvl = &tree0.levels[k];
        let prev_len = tree0.levels[k - 1].points.len();
        let start = offset + prev_len;
        for (i, &z) in lvl.points.iter().enumerate() {
            let cj = if lvl.critical[i] { crit0.iter().position(|c| (c - z).norm() < 1e-12) } else { None };
            let id = arena.push(z, offset + i / tree0.degree, cj);
            debug_assert_eq!(id, start + i);
        }
        offset = start;
    }
    let pos = arena.transport(spec, lambda0, lambda1, TransportOptions { steps, ..Default::default() })?;
    let f1 = spec.poly(lambda1)?;
    let mut levels = Vec::with_capacity(tree0.levels.len());
    let mut offset = 0usize;
    let mut residual: f64 = 0.0;
    for (k, lvl) in tree0.levels.iter().enumerate() {
        let n = lvl.points.len();
        let points = pos[offset..offset + n].to_vec();
        let derivs: Vec<C64> = if k == 0 {
            vec![C64::new(1.0, 0.0)]
        } else {
            let prev: &TreeLevel = &levels[k - 1];
            (0..n)
                .map(|i| if lvl.critical[i] { C64::new(0.0, 0.0) } else { f1.derivative(points[i]) * prev.derivs[i / tree0.degree] })
                .collect()
        };
        if k > 0 {
            let prev: &TreeLevel = &levels[k - 1];
            for (i, z) in points.iter().enumerate() {
                residual = residual.max((f1.eval(*z) - prev.points[i / tree0.degree]).norm());
            }
        }
        levels.push(TreeLevel { points, derivs, critical: lvl.critical.clone() });
        offset += n;
    }
    let base1 = levels[0].points[0];
    Ok(MatchedTree {
        lambda0: lambda0.to_vec(),
        lambda1: lambda1.to_vec(),
        tree0: tree0.clone(),
        tree1: PreimageTree { degree: tree0.degree, base: base1, base_kind: tree0.base_kind, levels },
        conjugacy_residual: residual,
    })
}

/// Hölder exponent of the motion from the per-level upper envelopes of
/// nearest-neighbour distances.
pub fn holder_estimate(m: &MatchedTree) -> f64 {
    let depth = m.tree0.depth();
    let first = depth.saturating_sub(5).max(1);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in first..=depth {
        let p0 = &m.tree0.levels[k].points;
        let p1 = &m.tree1.levels[k].points;
        if let Some((x, y)) = level_envelope(p0, p1) {
            xs.push(x);
            ys.push(y);
        }
    }
    if xs.len() < 2 {
        return 1.0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 1.0;
    }
    (sxy / sxx).clamp(1e-6, 1.0)
}

fn level_envelope(p0: &[C64], p1: &[C64]) -> Option<(f64, f64)> {
    if p0.len() < 4 {
        return None;
    }
    let idx = GridIndex::auto(p0);
    let pairs: Vec<Option<(f64, f64)>> = par::map_range(p0.len(), |i| {
        let nn = idx.k_nearest(p0[i], 1, |j| j == i || p0[j] == p0[i]);
        nn.first().map(|&(j, d)| (d.ln(), (p1[i] - p1[j]).norm().ln()))
    });
    let mut x = f64::NEG_INFINITY;
    let mut y = f64::NEG_INFINITY;
    for (a, b) in pairs.into_iter().flatten() {
        x = x.max(a);
        y = y.max(b);
    }
    (x.is_finite() && y.is_finite()).then_some((x, y))
}

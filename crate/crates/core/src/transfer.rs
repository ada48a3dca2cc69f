//! Discretized transfer operators on the tower: mesh, assembly, leading
//! eigendata, equilibrium states and Lasota–Yorke diagnostics.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::motion::{build_tree_with, Arena, BaseKind, TransportOptions, NODE_BUDGET};
use crate::par;
use crate::poly::{preimages, Polynomial};
use crate::spatial::{thin, GridIndex};
use crate::tower::{Branch, Membership, TowerModel};
use crate::C64;

/// Branch, floor, fall point and arena id of one floor-1 fall.
type FallRow = (Branch, usize, C64, usize);

pub const DEFAULT_MESH_DENSITY: usize = 256;
/// Default tolerance on the Collatz–Wielandt bracket of the leading eigenvalue.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-12;
const MAX_POWER_ITERS: usize = 200_000;
const SUPPORT_FLOOR: f64 = 1e-12;

/// One `T`-preimage `y` of the node `row`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub row: u32,
    pub branch: Branch,
    /// Floor of `y`.
    pub floor: u16,
    pub point: C64,
    /// Arena index of `y` for falls; source node for climbs.
    pub source: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    col: u32,
    edge: u32,
    alpha: f64,
}

/// `(top floor, V-level or −1)`; interpolation only mixes nodes with equal labels.
pub type Label = (u16, i16);

/// Sample points of the tower with their preimage structure.
#[derive(Debug, Clone)]
pub struct TowerMesh {
    pub model: TowerModel,
    pub density: usize,
    pub sites: Vec<C64>,
    /// Site `i` carries nodes on floors `1..=site_top[i]`.
    pub site_top: Vec<u16>,
    pub site_label: Vec<Label>,
    pub site_arena: Vec<u32>,
    /// Sites drawn from the preimage tree; the rest are fall points over them.
    pub primary_sites: usize,
    node_offset: Vec<u32>,
    pub node_site: Vec<u32>,
    pub node_floor: Vec<u16>,
    pub arena: Arena,
    pub edges: Vec<Edge>,
    row_ptr: Vec<u32>,
    terms: Vec<Term>,
    col_ptr: Vec<u32>,
    /// Term indices ordered by column.
    col_terms: Vec<u32>,
    term_row: Vec<u32>,
    /// Branches whose root finding failed.
    pub defects: usize,
    /// Preimages dropped because they are exactly critical.
    pub critical_skipped: usize,
}

struct Fall {
    floor: usize,
    branch: Branch,
    /// `[y, f(y), …, f^{floor−1}(y)]`.
    chain: Vec<C64>,
}

struct SiteFalls {
    pulls: Vec<(C64, C64)>,
    falls: Vec<Fall>,
    defects: usize,
    skipped: usize,
}

fn site_falls(m: &TowerModel, x: C64) -> SiteFalls {
    let mut out = SiteFalls { pulls: vec![], falls: vec![], defects: 0, skipped: 0 };
    match preimages(&m.poly, x) {
        Ok(ys) => {
            for y in ys {
                if m.poly.critical_points().contains(&y) {
                    out.skipped += 1;
                } else if m.u_status(y, 2) == Membership::Outside {
                    out.falls.push(Fall { floor: 1, branch: Branch::Fall(1), chain: vec![y] });
                }
            }
        }
        Err(_) => out.defects += 1,
    }
    out.pulls = m.pull_chain(x, m.k_max.saturating_sub(m.preperiod));
    for k in 2..=m.k_max {
        match m.fall_chains_with(x, k, &out.pulls) {
            Ok(chains) => {
                for chain in chains {
                    if chain[0] == m.critical {
                        out.skipped += 1;
                    } else if m.is_fall_point(chain[0], k) {
                        let branch = if k == m.k_max { Branch::TailFall(k) } else { Branch::Fall(k) };
                        out.falls.push(Fall { floor: k, branch, chain });
                    }
                }
            }
            Err(_) => out.defects += 1,
        }
    }
    out
}

/// Pushes the chains of `sf` below the arena node `ax`; returns the arena
/// index of every fall point.
fn push_falls(arena: &mut Arena, ax: usize, sf: &SiteFalls, s: usize) -> Vec<usize> {
    let mut pull_ids: Vec<usize> = Vec::new();
    let mut ids = Vec::with_capacity(sf.falls.len());
    for fall in &sf.falls {
        let k = fall.floor;
        if k == 1 {
            ids.push(arena.push(fall.chain[0], ax, None));
            continue;
        }
        let n = k.min(s);
        let j = k - n;
        while pull_ids.len() < j {
            let parent = pull_ids.last().copied().unwrap_or(ax);
            pull_ids.push(arena.push(sf.pulls[pull_ids.len()].0, parent, None));
        }
        let mut parent = if j == 0 { ax } else { pull_ids[j - 1] };
        for i in (0..n).rev() {
            parent = arena.push(fall.chain[i], parent, None);
        }
        ids.push(parent);
    }
    ids
}

struct Interpolator {
    groups: BTreeMap<Label, (Vec<u32>, GridIndex)>,
    floors: Vec<(Vec<u32>, GridIndex)>,
}

impl Interpolator {
    fn new(sites: &[C64], top: &[u16], label: &[Label], k_max: usize) -> Self {
        let mut members: BTreeMap<Label, Vec<u32>> = BTreeMap::new();
        for (i, l) in label.iter().enumerate() {
            members.entry(*l).or_default().push(i as u32);
        }
        let index = |ids: Vec<u32>| {
            let pts: Vec<C64> = ids.iter().map(|&i| sites[i as usize]).collect();
            let idx = GridIndex::auto(&pts);
            (ids, idx)
        };
        let groups = members.into_iter().map(|(l, ids)| (l, index(ids))).collect();
        let floors = (1..=k_max).map(|k| index((0..sites.len() as u32).filter(|&i| top[i as usize] as usize >= k).collect())).collect();
        Interpolator { groups, floors }
    }

    /// Sites and weights interpolating at `y` on `floor`.
    fn stencil(&self, y: C64, floor: usize, label: Label) -> Vec<(u32, f64)> {
        let (ids, idx) = match self.groups.get(&label) {
            Some(g) if label.0 as usize >= floor => g,
            _ => &self.floors[floor - 1],
        };
        let nn = idx.k_nearest(y, 2, |_| false);
        if nn.is_empty() {
            return vec![];
        }
        let (a, da) = nn[0];
        if nn.len() == 1 || da <= 1e-12 * (1.0 + y.norm()) {
            return vec![(ids[a], 1.0)];
        }
        let (b, _) = nn[1];
        let pa = idx.points()[a];
        let d = idx.points()[b] - pa;
        let tau = (((y - pa) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
        if tau == 0.0 {
            vec![(ids[a], 1.0)]
        } else if tau == 1.0 {
            vec![(ids[b], 1.0)]
        } else {
            vec![(ids[a], 1.0 - tau), (ids[b], tau)]
        }
    }
}

impl TowerMesh {
    pub fn node_count(&self) -> usize {
        self.node_site.len()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Node index of site `i` on floor `k`.
    pub fn node(&self, site: usize, k: usize) -> Option<usize> {
        (k >= 1 && k <= self.site_top[site] as usize).then(|| self.node_offset[site] as usize + k - 1)
    }

    pub fn node_point(&self, node: usize) -> C64 {
        self.sites[self.node_site[node] as usize]
    }

    /// Edges ending at `node`.
    pub fn edges_into(&self, node: usize) -> impl Iterator<Item = &Edge> {
        let lo = self.edges.partition_point(|e| (e.row as usize) < node);
        self.edges[lo..].iter().take_while(move |e| e.row as usize == node)
    }

    /// `log R` of every edge for the map `f` with moved arena positions `pos`.
    pub fn log_weights(&self, f: &Polynomial, pos: &[C64]) -> Result<Vec<f64>> {
        let log_chi = self.model.chi_star.ln();
        let out = par::map(&self.edges, |e| match e.branch {
            Branch::Climb => log_chi,
            Branch::Fall(k) | Branch::TailFall(k) => {
                let mut i = e.source as usize;
                let mut acc = (1.0 - k as f64) * log_chi;
                for _ in 0..k {
                    acc += f.derivative(pos[i]).norm().ln();
                    match self.arena.parent(i) {
                        Some(p) => i = p,
                        None => break,
                    }
                }
                acc
            }
        });
        if out.iter().any(|w| !w.is_finite()) {
            return Err(Error::DegenerateFiber);
        }
        Ok(out)
    }

    /// Edge weights at the base parameter.
    pub fn identity_motion(&self) -> Result<MeshMotion> {
        Ok(MeshMotion { lambda: self.model.lambda.clone(), log_r: self.log_weights(&self.model.poly, &self.arena.points)? })
    }

    /// Edge weights at `lambda`, following every mesh point by the motion.
    pub fn motion(&self, spec: &FamilySpec, lambda: &[C64]) -> Result<MeshMotion> {
        if lambda == self.model.lambda.as_slice() {
            return self.identity_motion();
        }
        let pos = self.positions_from(spec, &self.model.lambda, &self.arena.points, lambda)?;
        self.motion_at(&spec.poly(lambda)?, lambda, &pos)
    }

    /// Arena positions at `lambda`, continued from positions `from_pos` at `from`
    /// along the straight segment.
    pub fn positions_from(&self, spec: &FamilySpec, from: &[C64], from_pos: &[C64], lambda: &[C64]) -> Result<Vec<C64>> {
        let dist = from.iter().zip(lambda).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let lin = |s: f64| -> Result<Vec<C64>> { Ok(from.iter().zip(lambda).map(|(&a, &b)| a + (b - a) * s).collect()) };
        self.positions_along(spec, from_pos, lin, dist)
    }

    /// Arena positions continued from `from_pos` at `path(0)` to `path(1)`.
    pub fn positions_along<P>(&self, spec: &FamilySpec, from_pos: &[C64], path: P, length: f64) -> Result<Vec<C64>>
    where
        P: Fn(f64) -> Result<Vec<C64>>,
    {
        if from_pos.len() != self.arena.len() {
            return Err(Error::InvalidInput("position count does not match the arena".into()));
        }
        if std::ptr::eq(from_pos, self.arena.points.as_slice()) {
            return self.arena.transport_along(spec, path, length, TransportOptions::default());
        }
        let mut arena = self.arena.clone();
        arena.points.copy_from_slice(from_pos);
        arena.transport_along(spec, path, length, TransportOptions::default())
    }

    /// Edge weights of `f` at moved positions `pos`.
    pub fn motion_at(&self, f: &Polynomial, lambda: &[C64], pos: &[C64]) -> Result<MeshMotion> {
        Ok(MeshMotion { lambda: lambda.to_vec(), log_r: self.log_weights(f, pos)? })
    }

    /// Diameter of floor `k` in the dilated metric, from the mesh nodes.
    pub fn floor_diameter(&self, k: usize) -> f64 {
        let pts: Vec<C64> = (0..self.sites.len()).filter(|&i| self.site_top[i] as usize >= k).map(|i| self.sites[i]).collect();
        let diam = par::map_range(pts.len(), |i| pts[i + 1..].iter().map(|q| (q - pts[i]).norm()).fold(0.0, f64::max))
            .into_iter()
            .fold(0.0, f64::max);
        self.model.chi_star.powi(k as i32 - 1) * diam
    }
}

/// Builds the tower mesh with about `density` primary sites.
pub fn build_mesh(model: &TowerModel, density: usize) -> Result<TowerMesh> {
    if density < 8 {
        return Err(Error::ParamOutOfRange(format!("mesh density {density} below 8")));
    }
    let f = &model.poly;
    let d = f.degree();
    let mut depth = 1;
    while (d as f64).powi(depth as i32) < 8.0 * density as f64 && (d as u128).pow(depth as u32 + 1) <= NODE_BUDGET as u128 {
        depth += 1;
    }
    let tree = build_tree_with(f, model.critical, BaseKind::Critical(model.critical_index), depth, NODE_BUDGET)?;
    let mut arena = Arena::new();
    arena.push_root(tree.base, tree.base_kind);
    let mut offset = 0usize;
    for k in 1..=depth {
        let prev_len = tree.levels[k - 1].points.len();
        for (i, &z) in tree.levels[k].points.iter().enumerate() {
            let cj = tree.levels[k].critical[i].then_some(model.critical_index);
            arena.push(z, offset + i / d, cj);
        }
        offset += prev_len;
    }
    let deepest = &tree.levels[depth];
    let candidates: Vec<usize> = (0..deepest.points.len()).filter(|&i| !deepest.critical[i]).collect();
    let pts: Vec<C64> = candidates.iter().map(|&i| deepest.points[i]).collect();
    let chosen = thin_to(&pts, density);
    let mut sites: Vec<C64> = chosen.iter().map(|&i| pts[i]).collect();
    let mut site_arena: Vec<u32> = chosen.iter().map(|&i| (offset + candidates[i]) as u32).collect();
    let primary_sites = sites.len();

    let s = model.preperiod;
    let mut defects = 0;
    let mut skipped = 0;
    // floor-1 rows: (site, fall data, arena ids of the fall points)
    let mut rows: Vec<(usize, Vec<FallRow>)> = Vec::new();
    let primary = par::map(&sites, |&x| site_falls(model, x));
    for (i, sf) in primary.iter().enumerate() {
        let ids = push_falls(&mut arena, site_arena[i] as usize, sf, s);
        defects += sf.defects;
        skipped += sf.skipped;
        let mut row = Vec::new();
        for (fall, &id) in sf.falls.iter().zip(&ids) {
            row.push((fall.branch, fall.floor, fall.chain[0], id));
            if fall.floor >= 2 {
                sites.push(fall.chain[0]);
                site_arena.push(id as u32);
            }
        }
        rows.push((i, row));
    }
    let secondary_sites: Vec<C64> = sites[primary_sites..].to_vec();
    let secondary = par::map(&secondary_sites, |&x| site_falls(model, x));
    for (j, sf) in secondary.iter().enumerate() {
        let i = primary_sites + j;
        let ids = push_falls(&mut arena, site_arena[i] as usize, sf, s);
        defects += sf.defects;
        skipped += sf.skipped;
        let row = sf.falls.iter().zip(&ids).map(|(fall, &id)| (fall.branch, fall.floor, fall.chain[0], id)).collect();
        rows.push((i, row));
    }

    let k_max = model.k_max;
    let label_of = |z: C64| -> Label {
        let top = model.u_level(z).min(k_max) as u16;
        let vl = model.v_level(z).map_or(-1, |v| v as i16);
        (top, vl)
    };
    let site_label: Vec<Label> = par::map(&sites, |&z| label_of(z));
    let site_top: Vec<u16> = site_label.iter().map(|l| l.0).collect();
    let mut node_offset = Vec::with_capacity(sites.len());
    let mut node_site = Vec::new();
    let mut node_floor = Vec::new();
    for (i, &top) in site_top.iter().enumerate() {
        node_offset.push(node_site.len() as u32);
        for k in 1..=top {
            node_site.push(i as u32);
            node_floor.push(k);
        }
    }

    let interp = Interpolator::new(&sites, &site_top, &site_label, k_max);
    let mut edges = Vec::new();
    let mut terms: Vec<(u32, Term)> = Vec::new();
    let fall_list: Vec<(usize, Branch, usize, C64, usize)> =
        rows.iter().flat_map(|(i, row)| row.iter().map(move |&(b, k, y, id)| (*i, b, k, y, id))).collect();
    let stencils = par::map(&fall_list, |&(_, _, k, y, _)| {
        let mut label = label_of(y);
        if label.0 as usize > k && k < k_max {
            label.0 = k as u16;
        }
        interp.stencil(y, k, label)
    });
    for (&(i, branch, k, y, id), st) in fall_list.iter().zip(&stencils) {
        let row = node_offset[i];
        let e = edges.len() as u32;
        edges.push(Edge { row, branch, floor: k as u16, point: y, source: id as u32 });
        for &(site, alpha) in st {
            let col = node_offset[site as usize] + k as u32 - 1;
            terms.push((row, Term { col, edge: e, alpha }));
        }
    }
    for (i, &top) in site_top.iter().enumerate() {
        for k in 2..=top as u32 {
            let row = node_offset[i] + k - 1;
            let src = row - 1;
            let e = edges.len() as u32;
            edges.push(Edge { row, branch: Branch::Climb, floor: (k - 1) as u16, point: sites[i], source: src });
            terms.push((row, Term { col: src, edge: e, alpha: 1.0 }));
        }
    }
    // edges and terms grouped by row, insertion order kept within a row
    let mut order: Vec<u32> = (0..edges.len() as u32).collect();
    order.sort_by_key(|&e| edges[e as usize].row);
    let mut remap = vec![0u32; edges.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let edges: Vec<Edge> = order.iter().map(|&e| edges[e as usize]).collect();
    terms.sort_by_key(|t| (t.0, remap[t.1.edge as usize]));
    let n = node_site.len();
    let mut row_ptr = vec![0u32; n + 1];
    for (r, _) in &terms {
        row_ptr[*r as usize + 1] += 1;
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let term_row: Vec<u32> = terms.iter().map(|t| t.0).collect();
    let terms: Vec<Term> = terms.into_iter().map(|(_, t)| Term { edge: remap[t.edge as usize], ..t }).collect();
    let mut col_terms: Vec<u32> = (0..terms.len() as u32).collect();
    col_terms.sort_by_key(|&t| (terms[t as usize].col, t));
    let mut col_ptr = vec![0u32; n + 1];
    for t in &terms {
        col_ptr[t.col as usize + 1] += 1;
    }
    for i in 0..n {
        col_ptr[i + 1] += col_ptr[i];
    }

    Ok(TowerMesh {
        model: model.clone(),
        density,
        sites,
        site_top,
        site_label,
        site_arena,
        primary_sites,
        node_offset,
        node_site,
        node_floor,
        arena,
        edges,
        row_ptr,
        terms,
        col_ptr,
        col_terms,
        term_row,
        defects,
        critical_skipped: skipped,
    })
}

/// Indices of about `target` points, one per grid cell.
fn thin_to(points: &[C64], target: usize) -> Vec<usize> {
    if points.len() <= target {
        return (0..points.len()).collect();
    }
    let (mut lo, mut hi) = (C64::new(f64::MAX, f64::MAX), C64::new(f64::MIN, f64::MIN));
    for z in points {
        lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    let extent = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
    let mut spacing = extent / target as f64;
    let mut keep = thin(points, spacing);
    for _ in 0..60 {
        if keep.len() as f64 > 1.1 * target as f64 {
            spacing *= 1.1;
        } else if (keep.len() as f64) < 0.8 * target as f64 {
            spacing /= 1.1;
        } else {
            break;
        }
        keep = thin(points, spacing);
    }
    keep
}

/// Edge weights `log R_λ` at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshMotion {
    pub lambda: Vec<C64>,
    pub log_r: Vec<f64>,
}

/// `𝓛 g(x) = Σ_{T(y)=x} g(y) R₁(y)^{−t₁} R₂(y)^{−t₂}` on the mesh.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub mesh: Arc<TowerMesh>,
    pub t1: f64,
    pub t2: f64,
    pub lambda1: Vec<C64>,
    pub lambda2: Vec<C64>,
    pub kappa: f64,
    /// `log R` at `λ₁`, kept for equilibrium integrals.
    pub log_r1: Vec<f64>,
    /// `−t₁ log R₁ − t₂ log R₂` per edge.
    pub log_weight: Vec<f64>,
    values: Vec<f64>,
}

pub fn assemble_operator(
    mesh: &Arc<TowerMesh>,
    m1: &MeshMotion,
    m2: &MeshMotion,
    t1: f64,
    t2: f64,
    kappa: f64,
) -> Result<DiscretizedOperator> {
    if !(t1 >= 0.0 && t2 >= 0.0 && t1 + t2 > 0.0) {
        return Err(Error::ParamOutOfRange(format!("need t1, t2 ≥ 0 and t1 + t2 > 0 (got {t1}, {t2})")));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::ParamOutOfRange(format!("kappa = {kappa} outside (0, 1]")));
    }
    let log_weight: Vec<f64> = m1
        .log_r
        .iter()
        .zip(&m2.log_r)
        .map(|(&a, &b)| match (t1 == 0.0, t2 == 0.0) {
            (false, true) => -t1 * a,
            (true, false) => -t2 * b,
            _ => -t1 * a + -t2 * b,
        })
        .collect();
    Ok(with_log_weights(mesh, m1, m2.lambda.clone(), t1, t2, kappa, log_weight))
}

fn with_log_weights(
    mesh: &Arc<TowerMesh>,
    m1: &MeshMotion,
    lambda2: Vec<C64>,
    t1: f64,
    t2: f64,
    kappa: f64,
    log_weight: Vec<f64>,
) -> DiscretizedOperator {
    let values = mesh.terms.iter().map(|t| t.alpha * log_weight[t.edge as usize].exp()).collect();
    DiscretizedOperator {
        mesh: Arc::clone(mesh),
        t1,
        t2,
        lambda1: m1.lambda.clone(),
        lambda2,
        kappa,
        log_r1: m1.log_r.clone(),
        log_weight,
        values,
    }
}

/// Operator with weights `R^{−t}` at a single parameter.
pub fn single_operator(mesh: &Arc<TowerMesh>, m: &MeshMotion, t: f64, kappa: f64) -> Result<DiscretizedOperator> {
    assemble_operator(mesh, m, m, t, 0.0, kappa)
}

impl DiscretizedOperator {
    pub fn dim(&self) -> usize {
        self.mesh.node_count()
    }

    /// Combined matrix entry of every term.
    pub fn term_values(&self) -> &[f64] {
        &self.values
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let m = &self.mesh;
        par::fill(out, |i| {
            let (a, b) = (m.row_ptr[i] as usize, m.row_ptr[i + 1] as usize);
            let mut acc = 0.0;
            for t in a..b {
                acc += self.values[t] * v[m.terms[t].col as usize];
            }
            acc
        });
    }

    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        let m = &self.mesh;
        par::fill(out, |j| {
            let (a, b) = (m.col_ptr[j] as usize, m.col_ptr[j + 1] as usize);
            let mut acc = 0.0;
            for &t in &m.col_terms[a..b] {
                acc += self.values[t as usize] * v[m.term_row[t as usize] as usize];
            }
            acc
        });
    }

    /// Nodes with no incoming preimage.
    pub fn empty_rows(&self) -> usize {
        let m = &self.mesh;
        (0..self.dim()).filter(|&i| m.row_ptr[i] == m.row_ptr[i + 1]).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub eta: f64,
    /// Collatz–Wielandt bracket `[min (𝓛h)/h, max (𝓛h)/h]`.
    pub bracket: (f64, f64),
    /// Positive right eigenvector, `max = 1`.
    pub right_fn: Vec<f64>,
    /// Left eigenvector with `⟨left, right⟩ = 1`.
    pub left_fn: Vec<f64>,
    /// Deflated second eigenvalue modulus over `eta`.
    pub gap: f64,
    pub power_iters: usize,
}

struct Power {
    eta: f64,
    lo: f64,
    hi: f64,
    v: Vec<f64>,
    iters: usize,
}

fn power(n: usize, init: Option<&[f64]>, tol: f64, apply: impl Fn(&[f64], &mut [f64])) -> Result<Power> {
    let mut v = init.map_or_else(|| vec![1.0; n], |x| x.to_vec());
    let mut w = vec![0.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 1..=MAX_POWER_ITERS {
        apply(&v, &mut w);
        lo = f64::INFINITY;
        hi = 0.0f64;
        let mut top = 0.0f64;
        for (a, b) in w.iter().zip(&v) {
            top = top.max(*a);
            // transient nodes decay to nothing and carry no information
            if *b > SUPPORT_FLOOR {
                let q = a / b;
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::NoConvergence { iterations: it, drift: f64::NAN });
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / top;
        }
        if hi - lo <= tol * hi {
            return Ok(Power { eta: 0.5 * (lo + hi), lo, hi, v, iters: it });
        }
    }
    Err(Error::NoConvergence { iterations: MAX_POWER_ITERS, drift: (hi - lo) / hi })
}

/// Leading eigenvalue with right and left eigenvectors and a deflated gap estimate.
pub fn leading_eigendata(op: &DiscretizedOperator, tol: f64) -> Result<EigenData> {
    leading_eigendata_from(op, tol, None)
}

/// As [`leading_eigendata`], starting the right iteration from `init`.
pub fn leading_eigendata_from(op: &DiscretizedOperator, tol: f64, init: Option<&[f64]>) -> Result<EigenData> {
    let n = op.dim();
    let right = power(n, init, tol, |v, w| op.apply(v, w))?;
    let left = power(n, None, tol, |v, w| op.apply_transpose(v, w))?;
    let dot: f64 = par::pairwise_sum(&left.v.iter().zip(&right.v).map(|(a, b)| a * b).collect::<Vec<_>>());
    let left_fn: Vec<f64> = left.v.iter().map(|x| x / dot).collect();
    let gap = deflated_ratio(op, &right.v, &left_fn, right.eta);
    Ok(EigenData { eta: right.eta, bracket: (right.lo, right.hi), right_fn: right.v, left_fn, gap, power_iters: right.iters + left.iters })
}

/// Leading eigenvalue only.
pub fn leading_eta(op: &DiscretizedOperator, tol: f64, init: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let p = power(op.dim(), init, tol, |v, w| op.apply(v, w))?;
    Ok((p.eta, p.v))
}

fn deflated_ratio(op: &DiscretizedOperator, r: &[f64], l: &[f64], eta: f64) -> f64 {
    let n = op.dim();
    let mut v: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
    let mut w = vec![0.0; n];
    let project = |v: &mut Vec<f64>| {
        let c = par::pairwise_sum(&l.iter().zip(v.iter()).map(|(a, b)| a * b).collect::<Vec<_>>());
        for (x, y) in v.iter_mut().zip(r) {
            *x -= c * y;
        }
    };
    let norm = |v: &[f64]| par::pairwise_sum(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
    project(&mut v);
    let n0 = norm(&v);
    if n0 == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let (burn, window) = (100, 200);
    let mut log_growth = 0.0;
    for it in 0..burn + window {
        op.apply(&v, &mut w);
        std::mem::swap(&mut v, &mut w);
        project(&mut v);
        let nv = norm(&v);
        if nv == 0.0 || !nv.is_finite() {
            return 0.0;
        }
        if it >= burn {
            log_growth += nv.ln();
        }
        v.iter_mut().for_each(|x| *x /= nv);
    }
    (log_growth / window as f64).exp() / eta
}

pub fn pressure_from_eta(ed: &EigenData) -> f64 {
    ed.eta.ln()
}

/// `e^P > χ̂^{−(t₁+t₂)/2}`.
pub fn check_gap_condition(model: &TowerModel, t1: f64, t2: f64, p: f64) -> bool {
    crate::tower::check_gap_condition(model, t1, t2, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    /// Mass of every node; sums to 1.
    pub node_mass: Vec<f64>,
    /// Node mass summed over floors.
    pub site_mass: Vec<f64>,
    /// Stationary mass of every edge of the induced Markov chain.
    pub edge_mass: Vec<f64>,
    /// `∫ log R dν` over edges; one `T`-step is one step of `f`.
    pub lyapunov: f64,
    pub total_mass: f64,
    pub eta: f64,
}

/// Equilibrium state `ν = left · right` of an operator at the Bowen parameter.
pub fn equilibrium_state(op: &DiscretizedOperator, ed: &EigenData) -> Result<EquilibriumState> {
    if !((ed.eta - 1.0).abs() <= 5e-2) {
        return Err(Error::NotAtBowenParameter { eta: ed.eta });
    }
    let m = &op.mesh;
    let prod: Vec<f64> = ed.left_fn.iter().zip(&ed.right_fn).map(|(a, b)| a * b).collect();
    let z = par::pairwise_sum(&prod);
    let node_mass: Vec<f64> = prod.iter().map(|x| x / z).collect();
    let mut site_mass = vec![0.0; m.sites.len()];
    for (i, &mass) in node_mass.iter().enumerate() {
        site_mass[m.node_site[i] as usize] += mass;
    }
    let mut edge_mass = vec![0.0; m.edges.len()];
    for (t, term) in m.terms.iter().enumerate() {
        let row = m.term_row[t] as usize;
        edge_mass[term.edge as usize] += ed.left_fn[row] * op.values[t] * ed.right_fn[term.col as usize] / (ed.eta * z);
    }
    let total = par::pairwise_sum(&edge_mass);
    for x in &mut edge_mass {
        *x /= total;
    }
    let lyapunov = par::pairwise_sum(&edge_mass.iter().zip(&op.log_r1).map(|(a, b)| a * b).collect::<Vec<_>>());
    Ok(EquilibriumState { total_mass: par::pairwise_sum(&node_mass), node_mass, site_mass, edge_mass, lyapunov, eta: ed.eta })
}

/// Stationary Markov chain on nodes read off an equilibrium state: the edge
/// `y → x` goes from the column node to the row node.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeChain {
    pub nodes: usize,
    pub from: Vec<u32>,
    pub to: Vec<u32>,
    pub mass: Vec<f64>,
}

impl EdgeChain {
    /// Chain whose edges are the operator terms of `op` weighted by `state`.
    pub fn from_state(op: &DiscretizedOperator, ed: &EigenData) -> Self {
        let m = &op.mesh;
        let prod: f64 = par::pairwise_sum(&ed.left_fn.iter().zip(&ed.right_fn).map(|(a, b)| a * b).collect::<Vec<_>>());
        let mut from = Vec::with_capacity(m.terms.len());
        let mut to = Vec::with_capacity(m.terms.len());
        let mut mass = Vec::with_capacity(m.terms.len());
        for (t, term) in m.terms.iter().enumerate() {
            let row = m.term_row[t] as usize;
            from.push(term.col);
            to.push(row as u32);
            mass.push(ed.left_fn[row] * op.values[t] * ed.right_fn[term.col as usize] / (ed.eta * prod));
        }
        let total = par::pairwise_sum(&mass);
        mass.iter_mut().for_each(|x| *x /= total);
        EdgeChain { nodes: op.dim(), from, to, mass }
    }

    /// Edge of the mesh carrying each chain edge.
    pub fn term_edges(op: &DiscretizedOperator) -> Vec<u32> {
        op.mesh.terms.iter().map(|t| t.edge).collect()
    }

    /// Mass leaving every node.
    pub fn node_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes];
        for (f, m) in self.from.iter().zip(&self.mass) {
            out[*f as usize] += m;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LasotaYorkeRow {
    pub n: usize,
    pub c_n: f64,
    /// Largest `‖𝓛ⁿg‖′_κ / ηⁿ` over the probes.
    pub max_seminorm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LasotaYorkeReport {
    pub rows: Vec<LasotaYorkeRow>,
    /// Constant `C`, fitted at twice the largest `n`.
    pub constant: f64,
    pub decreasing: bool,
    pub probes: usize,
    pub seed: u64,
}

/// Pairs of nearby nodes on a common floor with their dilated distance.
fn holder_pairs(m: &TowerMesh) -> Vec<(u32, u32, f64)> {
    let k_max = m.model.k_max;
    let mut pairs = Vec::new();
    for k in 1..=k_max {
        let ids: Vec<usize> = (0..m.sites.len()).filter(|&i| m.site_top[i] as usize >= k).collect();
        if ids.len() < 2 {
            continue;
        }
        let pts: Vec<C64> = ids.iter().map(|&i| m.sites[i]).collect();
        let idx = GridIndex::auto(&pts);
        let scale = m.model.chi_star.powi(k as i32 - 1);
        let found = par::map_range(ids.len(), |a| {
            idx.k_nearest(pts[a], 4, |b| b == a).into_iter().filter(|&(b, d)| d > 0.0 && b > a).map(|(b, d)| (a, b, d)).collect::<Vec<_>>()
        });
        for (a, b, d) in found.into_iter().flatten() {
            let na = m.node(ids[a], k).unwrap() as u32;
            let nb = m.node(ids[b], k).unwrap() as u32;
            pairs.push((na, nb, scale * d));
        }
    }
    pairs
}

/// `max |g(a) − g(b)| / d(a, b)^κ` over the Hölder pairs.
pub fn holder_seminorm(op: &DiscretizedOperator, g: &[f64]) -> f64 {
    seminorm(&holder_pairs(&op.mesh), g, op.kappa)
}

fn seminorm(pairs: &[(u32, u32, f64)], g: &[f64], kappa: f64) -> f64 {
    pairs.iter().map(|&(a, b, d)| (g[a as usize] - g[b as usize]).abs() / d.powf(kappa)).fold(0.0, f64::max)
}

/// Fits `‖𝓛ⁿg‖′_κ ≤ c_n ηⁿ ‖g‖′_κ + C ‖𝓛ⁿ|g|‖_∞` on random Hölder probes.
pub fn lasota_yorke_diagnostic(
    op: &DiscretizedOperator,
    ed: &EigenData,
    n_list: &[usize],
    probe_count: usize,
    seed: u64,
) -> Result<LasotaYorkeReport> {
    if n_list.is_empty() || probe_count == 0 {
        return Err(Error::InvalidInput("need at least one n and one probe".into()));
    }
    let m = &op.mesh;
    let pairs = holder_pairs(m);
    let dmin = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let dmax = pairs.iter().map(|p| p.2).fold(0.0, f64::max).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.dim();
    let big_n = 2 * n_list.iter().copied().max().unwrap();
    let mut probes = Vec::with_capacity(probe_count);
    for _ in 0..probe_count {
        let modes: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                let omega = (1.0 / dmax) * (dmax / dmin.max(1e-300)).powf(rng.gen::<f64>());
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                let phase = rng.gen::<f64>() * std::f64::consts::TAU;
                (omega, theta, phase, rng.gen::<f64>() - 0.5)
            })
            .collect();
        let offset = rng.gen::<f64>();
        let mut g: Vec<f64> = (0..n)
            .map(|i| {
                let z = m.node_point(i) * m.model.chi_star.powi(m.node_floor[i] as i32 - 1);
                offset + modes.iter().map(|&(w, th, ph, a)| a * (w * (z.re * th.cos() + z.im * th.sin()) + ph).cos()).sum::<f64>()
            })
            .collect();
        let sn = seminorm(&pairs, &g, op.kappa);
        if sn > 0.0 {
            g.iter_mut().for_each(|x| *x /= sn);
            probes.push(g);
        }
    }
    // (n, probe) → (seminorm, sup of 𝓛ⁿ|g|), both over ηⁿ
    let mut needed: Vec<usize> = n_list.to_vec();
    needed.push(big_n);
    needed.sort_unstable();
    needed.dedup();
    let mut table: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for g in &probes {
        let mut v = g.clone();
        let mut a: Vec<f64> = g.iter().map(|x| x.abs()).collect();
        let mut w = vec![0.0; n];
        let mut done = 0;
        for &target in &needed {
            while done < target {
                op.apply(&v, &mut w);
                v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / ed.eta);
                op.apply(&a, &mut w);
                a.iter_mut().zip(&w).for_each(|(x, y)| *x = y / ed.eta);
                done += 1;
            }
            let s = seminorm(&pairs, &v, op.kappa);
            let sup = a.iter().copied().fold(0.0, f64::max);
            table.entry(target).or_default().push((s, sup));
        }
    }
    let constant = table[&big_n].iter().map(|&(s, a)| if a > 0.0 { s / a } else { 0.0 }).fold(0.0, f64::max);
    let rows: Vec<LasotaYorkeRow> = n_list
        .iter()
        .map(|&k| {
            let t = &table[&k];
            LasotaYorkeRow {
                n: k,
                c_n: t.iter().map(|&(s, a)| (s - constant * a).max(0.0)).fold(0.0, f64::max),
                max_seminorm: t.iter().map(|p| p.0).fold(0.0, f64::max),
            }
        })
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].c_n < w[0].c_n);
    Ok(LasotaYorkeReport { rows, constant, decreasing, probes: probes.len(), seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerDiagnostics {
    /// Smallest local expansion of `T` over the mesh nodes.
    pub expansion_min: f64,
    /// Smallest expansion over nodes of the top floor that lie above it.
    pub tail_expansion_min: f64,
    pub floor_diameters: Vec<f64>,
    /// `diam_{k+1}/diam_k` for `k ≥ 2`.
    pub diameter_ratios: Vec<f64>,
    pub contraction: f64,
    /// `(n, max |(Tⁿ)''/(Tⁿ)'²|)`.
    pub distortion: Vec<(usize, f64)>,
}

impl TowerDiagnostics {
    /// Largest over smallest distortion constant.
    pub fn distortion_spread(&self) -> f64 {
        let hi = self.distortion.iter().map(|d| d.1).fold(0.0, f64::max);
        let lo = self.distortion.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Expansion, floor diameters and distortion of `T` sampled on the mesh.
///
/// Tail nodes, top-floor nodes whose site lies above the truncation, are
/// reported separately and do not start distortion orbits.
pub fn tower_diagnostics(mesh: &TowerMesh, max_n: usize) -> TowerDiagnostics {
    let m = &mesh.model;
    let n = mesh.node_count();
    let tail_site: Vec<bool> = par::map(&mesh.sites, |&z| m.u_level(z) > m.k_max);
    let exp: Vec<(f64, bool)> = par::map_range(n, |i| {
        let site = mesh.node_site[i] as usize;
        let k = mesh.node_floor[i] as usize;
        let top = mesh.site_top[site] as usize;
        if k < top {
            return (m.chi_star, false);
        }
        let (_, d) = m.poly.iterate_d1(mesh.sites[site], k);
        (m.chi_star.powi(1 - k as i32) * d.norm(), tail_site[site])
    });
    let expansion_min = exp.iter().filter(|e| !e.1).map(|e| e.0).fold(f64::INFINITY, f64::min);
    let tail_expansion_min = exp.iter().filter(|e| e.1).map(|e| e.0).fold(f64::INFINITY, f64::min);
    let floor_diameters: Vec<f64> = (1..=m.k_max).map(|k| mesh.floor_diameter(k)).collect();
    let diameter_ratios = floor_diameters.windows(2).skip(1).map(|w| w[1] / w[0]).collect();
    let starts: Vec<usize> = (0..n).filter(|&i| !tail_site[mesh.node_site[i] as usize]).collect();
    let step = (starts.len() / 4000).max(1);
    let samples: Vec<usize> = starts.into_iter().step_by(step).collect();
    let qs = par::map(&samples, |&i| distortion_orbit(m, mesh.node_point(i), mesh.node_floor[i] as usize, max_n));
    let distortion = (1..=max_n).map(|j| (j, qs.iter().filter_map(|q| q.get(j - 1)).map(|q| q.norm()).fold(0.0, f64::max))).collect();
    TowerDiagnostics { expansion_min, tail_expansion_min, floor_diameters, diameter_ratios, contraction: m.contraction(), distortion }
}

/// `Q_j = (T^j)''/(T^j)'²` along the forward orbit of `(z, k)`, `j = 1..=max_n`,
/// stopping early at a top-floor point that belongs to a deeper floor.
fn distortion_orbit(m: &TowerModel, z: C64, k: usize, max_n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(max_n);
    let mut p = crate::tower::TowerPoint::new(z, k);
    let mut q = C64::new(0.0, 0.0);
    for _ in 0..max_n {
        let climb = p.k < m.k_max && m.floor_membership(p.z, p.k);
        if p.k == m.k_max && m.u_level(p.z) > m.k_max {
            break;
        }
        let (qt, dt) = if climb {
            (C64::new(0.0, 0.0), C64::new(m.chi_star, 0.0))
        } else {
            let (mut d1, mut d2, mut u) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), p.z);
            for _ in 0..p.k {
                let (_, f1, f2) = m.poly.eval_d2(u);
                d2 = f2 * d1 * d1 + f1 * d2;
                d1 *= f1;
                u = m.poly.eval(u);
            }
            (d2 / (d1 * d1), d1 * m.chi_star.powi(1 - p.k as i32))
        };
        q = qt + q / dt;
        out.push(q);
        p = match m.tower_map_truncated(p) {
            Ok(next) => next,
            Err(_) => break,
        };
    }
    out
}

/// Exponent `t` with leading eigenvalue 1, by Brent's method on `log η`.
pub fn tower_bowen_parameter(mesh: &Arc<TowerMesh>, motion: &MeshMotion, kappa: f64, tol: f64) -> Result<(f64, EigenData)> {
    let log_eta = |t: f64| -> Result<f64> {
        let op = single_operator(mesh, motion, t, kappa)?;
        Ok(leading_eta(&op, DEFAULT_EIGEN_TOL, None)?.0.ln())
    };
    let (mut a, mut b) = (0.25, 2.0);
    let (mut fa, mut fb) = (log_eta(a)?, log_eta(b)?);
    while fa < 0.0 && a > 1e-3 {
        a *= 0.5;
        fa = log_eta(a)?;
    }
    while fb > 0.0 && b < 16.0 {
        b *= 2.0;
        fb = log_eta(b)?;
    }
    if fa < 0.0 || fb > 0.0 {
        return Err(Error::NoBracket { t_lo: a, t_hi: b });
    }
    let t = crate::pressure::brent(a, b, fa, fb, tol, log_eta)?;
    let op = single_operator(mesh, motion, t, kappa)?;
    Ok((t, leading_eigendata(&op, DEFAULT_EIGEN_TOL)?))
}

/// Spectral summary written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub t1: f64,
    pub t2: f64,
    pub lambda1: Vec<C64>,
    pub lambda2: Vec<C64>,
    pub eta: f64,
    pub gap: f64,
    pub mesh_density: usize,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub tail_bound: f64,
}

impl SpectralReport {
    pub fn new(op: &DiscretizedOperator, ed: &EigenData) -> Self {
        SpectralReport {
            t1: op.t1,
            t2: op.t2,
            lambda1: op.lambda1.clone(),
            lambda2: op.lambda2.clone(),
            eta: ed.eta,
            gap: ed.gap,
            mesh_density: op.mesh.density,
            k_max: op.mesh.model.k_max,
            tail_bound: op.mesh.model.tail_bound(op.t1 + op.t2),
        }
    }
}

/// Reweights `op`'s graph with `R^{−t}` from `motion`.
pub fn reweighted(op: &DiscretizedOperator, motion: &MeshMotion, t: f64) -> DiscretizedOperator {
    let log_weight = motion.log_r.iter().map(|x| -t * x).collect();
    with_log_weights(&op.mesh, motion, motion.lambda.clone(), t, 0.0, op.kappa, log_weight)
}

/// Uniform random index in `0..n` from a seeded generator.
pub fn seeded_indices(seed: u64, n: usize, count: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(0..n)).collect()
}

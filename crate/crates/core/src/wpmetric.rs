//! Hessian metric of `G_{λ₀}(λ) = δ(λ)·Ly_{λ₀}(λ)`, Birkhoff variances, the
//! pressure form, multiplier degeneracy probes, path lengths and grid distances.
//!
//! Parameters are handled in real chart coordinates: every complex chart
//! coordinate contributes its real and imaginary parts. The remaining
//! coordinates are solved from the critical relations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{certify, solve_with, FamilySpec, FreeSlice, MisiurewiczParam, SolveOptions};
use crate::par;
use crate::poly::{periodic_points, Polynomial};
use crate::tower::build_tower;
use crate::transfer::{
    build_mesh, equilibrium_state, single_operator, tower_bowen_parameter, DiscretizedOperator, EdgeChain, EigenData, EquilibriumState,
    MeshMotion, TowerMesh,
};
use crate::C64;

/// Largest lag summed by [`birkhoff_variance`].
pub const MAX_LAG: usize = 20_000;
const LAG_TOL: f64 = 1e-13;
/// Largest chart step of a single relation solve.
pub const CHART_STEP: f64 = 5e-3;
/// Hessian eigenvalues above this count as positive semi-definite.
pub const PSD_TOL: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub chi_star: f64,
    pub k_max: usize,
    pub mesh_density: usize,
    pub kappa: f64,
    /// Finite-difference step in chart coordinates.
    pub h: f64,
    /// Tolerance of the Bowen parameter solve.
    pub delta_tol: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions { chi_star: 1.5, k_max: 6, mesh_density: 128, kappa: 0.5, h: 1e-3, delta_tol: 1e-13 }
    }
}

/// A family, a chart on it and one tower mesh shared by every evaluation.
#[derive(Debug, Clone)]
pub struct MetricContext {
    pub spec: FamilySpec,
    /// Indices of the complex coordinates used as chart coordinates.
    pub chart: Vec<usize>,
    pub slice: FreeSlice,
    pub base: MisiurewiczParam,
    pub mesh: Arc<TowerMesh>,
    pub opts: MetricOptions,
}

/// Everything attached to a base point `λ₀`: moved mesh, Bowen parameter and
/// equilibrium state.
#[derive(Debug, Clone)]
pub struct BasePoint {
    pub coords: Vec<f64>,
    pub lambda: Vec<C64>,
    pub positions: Vec<C64>,
    pub motion: MeshMotion,
    pub delta: f64,
    pub eigen: EigenData,
    pub op: DiscretizedOperator,
    pub state: EquilibriumState,
}

/// One evaluation of `G_{λ₀}` at a probe parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GValue {
    pub coords: Vec<f64>,
    pub lambda: Vec<C64>,
    pub delta: f64,
    pub ly: f64,
    pub g: f64,
}

impl MetricContext {
    /// Builds the tower mesh at `base`; `chart` lists the complex coordinates
    /// kept free, the others are solved from the relations.
    pub fn new(spec: FamilySpec, base: MisiurewiczParam, chart: Vec<usize>, opts: MetricOptions) -> Result<Self> {
        let dim = base.lambda.len();
        if chart.is_empty() || chart.iter().any(|&i| i >= dim) {
            return Err(Error::InvalidInput(format!("chart {chart:?} is not a set of coordinates below {dim}")));
        }
        let solved: Vec<usize> = (0..dim).filter(|i| !chart.contains(i)).collect();
        if solved.len() != spec.relations.len() {
            return Err(Error::InvalidInput(format!("{} solved coordinates for {} relations", solved.len(), spec.relations.len())));
        }
        if !(opts.h > 0.0) {
            return Err(Error::ParamOutOfRange(format!("step h = {} must be positive", opts.h)));
        }
        let slice = FreeSlice::coordinates(&solved, dim);
        let model = build_tower(&base, opts.chi_star, opts.k_max)?;
        let mesh = Arc::new(build_mesh(&model, opts.mesh_density)?);
        Ok(MetricContext { spec, chart, slice, base, mesh, opts })
    }

    /// Number of real chart coordinates.
    pub fn real_dim(&self) -> usize {
        2 * self.chart.len()
    }

    pub fn coords(&self, lambda: &[C64]) -> Vec<f64> {
        self.chart.iter().flat_map(|&i| [lambda[i].re, lambda[i].im]).collect()
    }

    /// Parameter with chart coordinates `x`, continued from the solution `guess`
    /// in chart steps of at most [`CHART_STEP`].
    pub fn lambda_at(&self, x: &[f64], guess: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.real_dim() {
            return Err(Error::InvalidInput(format!("expected {} chart coordinates, got {}", self.real_dim(), x.len())));
        }
        let x0 = self.coords(guess);
        let dist = x0.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let steps = (dist / CHART_STEP).ceil().max(1.0) as usize;
        let mut lam = guess.to_vec();
        for k in 1..=steps {
            let s = k as f64 / steps as f64;
            for (j, &i) in self.chart.iter().enumerate() {
                let at = |c: usize| if k == steps { x[c] } else { x0[c] + (x[c] - x0[c]) * s };
                lam[i] = C64::new(at(2 * j), at(2 * j + 1));
            }
            let p = if self.slice.directions.is_empty() {
                certify(&self.spec, &lam)?
            } else {
                solve_with(&self.spec, &lam, &self.slice, SolveOptions { max_iter: 200, max_drift: 0.1 })?
            };
            lam = p.lambda;
        }
        Ok(lam)
    }

    fn bowen(&self, motion: &MeshMotion) -> Result<(f64, EigenData)> {
        tower_bowen_parameter(&self.mesh, motion, self.opts.kappa, self.opts.delta_tol)
    }

    /// Positions moved from chart point `x0` (positions `pos0`, parameter
    /// `lambda0`) to `x1` along the chart segment, staying on the family.
    fn move_positions(&self, x0: &[f64], lambda0: &[C64], pos0: &[C64], x1: &[f64]) -> Result<(Vec<C64>, Vec<C64>)> {
        let lambda1 = self.lambda_at(x1, lambda0)?;
        let path = |s: f64| -> Result<Vec<C64>> {
            if s == 0.0 {
                return Ok(lambda0.to_vec());
            }
            if s == 1.0 {
                return Ok(lambda1.clone());
            }
            let x: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| a + (b - a) * s).collect();
            self.lambda_at(&x, lambda0)
        };
        let length = lambda0.iter().zip(&lambda1).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let pos = self.mesh.positions_along(&self.spec, pos0, path, length)?;
        Ok((lambda1, pos))
    }

    /// Moves the mesh to chart point `x` and computes the equilibrium state there.
    pub fn base_point(&self, x: &[f64]) -> Result<BasePoint> {
        let mesh = &self.mesh;
        let x0 = self.coords(&mesh.model.lambda);
        let (lambda, positions) = self.move_positions(&x0, &mesh.model.lambda, &mesh.arena.points, x)?;
        let motion = mesh.motion_at(&self.spec.poly(&lambda)?, &lambda, &positions)?;
        let (delta, eigen) = self.bowen(&motion)?;
        let op = single_operator(mesh, &motion, delta, self.opts.kappa)?;
        let state = equilibrium_state(&op, &eigen)?;
        Ok(BasePoint { coords: x.to_vec(), lambda, positions, motion, delta, eigen, op, state })
    }

    /// Base point at the context's own parameter.
    pub fn origin(&self) -> Result<BasePoint> {
        self.base_point(&self.coords(&self.base.lambda))
    }

    /// Motion from `bp` to chart point `x`.
    pub fn motion_from(&self, bp: &BasePoint, x: &[f64]) -> Result<MeshMotion> {
        if x == bp.coords.as_slice() {
            return Ok(bp.motion.clone());
        }
        let (lambda, pos) = self.move_positions(&bp.coords, &bp.lambda, &bp.positions, x)?;
        self.mesh.motion_at(&self.spec.poly(&lambda)?, &lambda, &pos)
    }

    /// `G_{λ₀}` at chart point `x` with `λ₀` the parameter of `bp`.
    pub fn evaluate(&self, bp: &BasePoint, x: &[f64]) -> Result<GValue> {
        let motion = self.motion_from(bp, x)?;
        let (delta, _) = self.bowen(&motion)?;
        let ly = ly_function(&bp.state, &motion)?;
        Ok(GValue { coords: x.to_vec(), lambda: motion.lambda.clone(), delta, ly, g: g_function(ly, delta) })
    }

    /// Potential `φ = −δ log R` on every mesh edge at chart point `x`.
    pub fn potential(&self, bp: &BasePoint, x: &[f64]) -> Result<Vec<f64>> {
        let motion = self.motion_from(bp, x)?;
        let (delta, _) = self.bowen(&motion)?;
        Ok(motion.log_r.iter().map(|l| -delta * l).collect())
    }
}

/// `∫ log R_λ dν` with `ν` the base equilibrium state carried by the motion.
///
/// Edges whose weight is not finite are dropped together with their mass.
pub fn ly_function(state: &EquilibriumState, motion: &MeshMotion) -> Result<f64> {
    if state.edge_mass.len() != motion.log_r.len() {
        return Err(Error::InvalidInput("motion and state live on different meshes".into()));
    }
    let mut excluded = 0.0;
    let terms: Vec<f64> = state
        .edge_mass
        .iter()
        .zip(&motion.log_r)
        .map(|(&m, &l)| {
            if l.is_finite() {
                m * l
            } else {
                excluded += m;
                0.0
            }
        })
        .collect();
    if excluded > 1e-6 {
        return Err(Error::MassOnCriticalFiber { mass: excluded });
    }
    Ok(par::pairwise_sum(&terms))
}

pub fn g_function(ly: f64, delta: f64) -> f64 {
    delta * ly
}

/// Central finite differences of a scalar function of real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifferences {
    pub center: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    /// Stencil points and values, center first.
    pub values: Vec<(Vec<f64>, f64)>,
}

fn stencil(x0: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x0.len();
    let shifted = |moves: &[(usize, f64)]| {
        let mut x = x0.to_vec();
        for &(i, s) in moves {
            x[i] += s * h;
        }
        x
    };
    let mut pts = vec![x0.to_vec()];
    for i in 0..n {
        pts.push(shifted(&[(i, 1.0)]));
        pts.push(shifted(&[(i, -1.0)]));
    }
    for i in 0..n {
        for j in i + 1..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                pts.push(shifted(&[(i, si), (j, sj)]));
            }
        }
    }
    pts
}

/// Gradient and Hessian of `f` at `x0` from the `2n² + 1`-point central stencil.
#[allow(clippy::needless_range_loop)]
pub fn finite_differences<F>(f: F, x0: &[f64], h: f64) -> Result<FiniteDifferences>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if !(h > 0.0) || x0.is_empty() {
        return Err(Error::InvalidInput("need a positive step and at least one coordinate".into()));
    }
    let n = x0.len();
    let pts = stencil(x0, h);
    let vals = par::try_map(&pts, |p| f(p))?;
    let f0 = vals[0];
    let mut gradient = vec![0.0; n];
    let mut hessian = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (fp, fm) = (vals[1 + 2 * i], vals[2 + 2 * i]);
        gradient[i] = (fp - fm) / (2.0 * h);
        hessian[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    let mut k = 1 + 2 * n;
    for i in 0..n {
        for j in i + 1..n {
            let v = (vals[k] - vals[k + 1] - vals[k + 2] + vals[k + 3]) / (4.0 * h * h);
            hessian[i][j] = v;
            hessian[j][i] = v;
            k += 4;
        }
    }
    Ok(FiniteDifferences { center: f0, gradient, hessian, values: pts.into_iter().zip(vals).collect() })
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let mut ev: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn quadratic_form(m: &[Vec<f64>], v: &[f64]) -> f64 {
    m.iter().zip(v).map(|(row, &vi)| vi * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub lambda0: Vec<C64>,
    pub coords: Vec<f64>,
    pub h: f64,
    pub g_values: Vec<GValue>,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// `‖∇G‖ / (‖H‖·h)`.
    pub gradient_ratio: f64,
    pub psd: bool,
    /// Largest entry of `|H(h) − H(2h)|/3`, when requested.
    pub hessian_error: Option<f64>,
}

fn spectral_norm(ev: &[f64]) -> f64 {
    ev.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

/// Hessian of `G_{λ₀}` at the base point by central differences with step `h`.
pub fn hessian_form(ctx: &MetricContext, bp: &BasePoint, h: f64, estimate_error: bool) -> Result<MetricSample> {
    let eval = |x: &[f64]| ctx.evaluate(bp, x);
    let pts = stencil(&bp.coords, h);
    let g_values = par::try_map(&pts, |p| eval(p))?;
    let table: Vec<(Vec<f64>, f64)> = g_values.iter().map(|g| (g.coords.clone(), g.g)).collect();
    let lookup = |x: &[f64]| -> Result<f64> {
        table
            .iter()
            .find(|(p, _)| p.as_slice() == x)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::InvalidInput("stencil point not evaluated".into()))
    };
    let fd = finite_differences(lookup, &bp.coords, h)?;
    let eigenvalues = symmetric_eigenvalues(&fd.hessian);
    let hessian_error = if estimate_error {
        let wide = finite_differences(|x| Ok(eval(x)?.g), &bp.coords, 2.0 * h)?;
        let err = fd.hessian.iter().flatten().zip(wide.hessian.iter().flatten()).fold(0.0, |a: f64, (x, y)| a.max((x - y).abs() / 3.0));
        Some(err)
    } else {
        None
    };
    let norm = spectral_norm(&eigenvalues);
    let grad_norm = fd.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(MetricSample {
        lambda0: bp.lambda.clone(),
        coords: bp.coords.clone(),
        h,
        g_values,
        gradient: fd.gradient,
        psd: eigenvalues.iter().all(|&e| e >= PSD_TOL),
        gradient_ratio: if norm > 0.0 { grad_norm / (norm * h) } else { f64::INFINITY },
        hessian: fd.hessian,
        eigenvalues,
        hessian_error,
    })
}

/// Asymptotic variance of Birkhoff sums of an edge observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// `∫ψ dν` before centering.
    pub mean: f64,
    /// `(n, (1/n)∫(S_nψ)² dν)`.
    pub sequence: Vec<(usize, f64)>,
    pub limit: f64,
    /// Number of correlations summed.
    pub lags: usize,
    pub converged: bool,
}

/// Variance of `ψ` along the stationary chain; `psi` has one value per chain edge.
///
/// Correlations `c_n = ∫ψ·ψ∘Tⁿ` come from iterating the chain's transition
/// operator on the conditional mean of `ψ`.
pub fn birkhoff_variance(chain: &EdgeChain, psi: &[f64], n_list: &[usize]) -> Result<VarianceEstimate> {
    if psi.len() != chain.mass.len() {
        return Err(Error::InvalidInput(format!("{} values for {} chain edges", psi.len(), chain.mass.len())));
    }
    if n_list.contains(&0) {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mean = par::pairwise_sum(&chain.mass.iter().zip(psi).map(|(m, p)| m * p).collect::<Vec<_>>());
    let psi: Vec<f64> = psi.iter().map(|p| p - mean).collect();
    let mu = chain.node_mass();
    let weighted: Vec<f64> = chain.mass.iter().zip(&psi).map(|(m, p)| m * p).collect();
    let c0 = par::pairwise_sum(&weighted.iter().zip(&psi).map(|(w, p)| w * p).collect::<Vec<_>>());
    let conditional = |vals: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; chain.nodes];
        for (t, &f) in chain.from.iter().enumerate() {
            out[f as usize] += vals[t];
        }
        out.iter().zip(&mu).map(|(s, &m)| if m > 0.0 { s / m } else { 0.0 }).collect()
    };
    let mut u = conditional(&weighted);
    let scale = u.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
    let need = n_list.iter().copied().max().unwrap_or(1);
    let mut corr = vec![c0];
    let mut converged = scale == 0.0;
    while corr.len() < MAX_LAG && !(converged && corr.len() >= need) {
        let terms: Vec<f64> = weighted.iter().zip(&chain.to).map(|(w, &to)| w * u[to as usize]).collect();
        corr.push(par::pairwise_sum(&terms));
        let next: Vec<f64> = chain.mass.iter().zip(&chain.to).map(|(m, &to)| m * u[to as usize]).collect();
        u = conditional(&next);
        let size = u.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
        converged = converged || size <= LAG_TOL * scale;
    }
    let sequence = n_list
        .iter()
        .map(|&n| {
            let s: f64 = (1..n.min(corr.len())).map(|k| (1.0 - k as f64 / n as f64) * corr[k]).sum();
            (n, c0 + 2.0 * s)
        })
        .collect();
    let partial = |m: usize| c0 + 2.0 * corr[1..m].iter().sum::<f64>();
    let l = corr.len();
    let limit = if converged || l < 4 {
        partial(l)
    } else {
        let (a, b, c) = (partial(l - 2), partial(l - 1), partial(l));
        let den = c - 2.0 * b + a;
        if den.abs() > 1e-300 {
            c - (c - b) * (c - b) / den
        } else {
            c
        }
    };
    Ok(VarianceEstimate { mean, sequence, limit, lags: l - 1, converged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureFormSample {
    pub direction: Vec<f64>,
    pub variance: f64,
    pub sequence: Vec<(usize, f64)>,
    /// `−∫φ₀ dν = δ·Ly > 0`.
    pub denom: f64,
    pub pm_norm_sq: f64,
}

/// Correlation lags reported in pressure form samples.
pub const VARIANCE_N_LIST: [usize; 5] = [1, 4, 16, 64, 256];

/// Pressure form of the edge derivative `phi_dot` (one value per mesh edge).
pub fn pressure_form(chain: &EdgeChain, term_edges: &[u32], phi_dot: &[f64], denom: f64, direction: &[f64]) -> Result<PressureFormSample> {
    if !(denom > 0.0) {
        return Err(Error::ParamOutOfRange(format!("pressure form denominator {denom} is not positive")));
    }
    let psi: Vec<f64> = term_edges.iter().map(|&e| phi_dot[e as usize]).collect();
    let var = birkhoff_variance(chain, &psi, &VARIANCE_N_LIST)?;
    Ok(PressureFormSample {
        direction: direction.to_vec(),
        variance: var.limit,
        sequence: var.sequence,
        denom,
        pm_norm_sq: var.limit / denom,
    })
}

/// `‖v‖²` in the pressure form at the base point, with `φ̇` by central
/// differences of step `h` along the unit vector of `v`.
pub fn pressure_form_norm(ctx: &MetricContext, bp: &BasePoint, v: &[f64], h: f64) -> Result<PressureFormSample> {
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v.len() != bp.coords.len() || !(len > 0.0) {
        return Err(Error::InvalidInput("direction must be a nonzero chart vector".into()));
    }
    let at = |s: f64| -> Vec<f64> { bp.coords.iter().zip(v).map(|(x, d)| x + s * h * d / len).collect() };
    let ends = par::try_map(&[1.0, -1.0], |&s| ctx.potential(bp, &at(s)))?;
    let phi_dot: Vec<f64> = ends[0].iter().zip(&ends[1]).map(|(p, m)| (p - m) / (2.0 * h) * len).collect();
    let chain = EdgeChain::from_state(&bp.op, &bp.eigen);
    let denom = bp.delta * bp.state.lyapunov;
    pressure_form(&chain, &EdgeChain::term_edges(&bp.op), &phi_dot, denom, v)
}

/// `(vᵀHv / ∫φ₀dν) / ‖v‖²_pm`, equal to 1 under conformal equivalence.
pub fn conformal_ratio(sample: &MetricSample, pf: &PressureFormSample) -> f64 {
    quadratic_form(&sample.hessian, &pf.direction) / (pf.denom * pf.pm_norm_sq)
}

/// Per-cycle ratios `(d/dt log|m|) / log|m|` along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub h: f64,
    pub periods: Vec<usize>,
    pub points: Vec<C64>,
    pub log_multipliers: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Mean ratio.
    pub k_estimate: f64,
    /// Standard deviation of the ratios.
    pub dispersion: f64,
    /// Largest step-halving change of a ratio.
    pub noise: f64,
}

/// Ratio statistics from `log_mults(t)`, the log-moduli of a fixed list of
/// multipliers at path time `t`.
pub fn degeneracy_from_path<F>(log_mults: F, h: f64) -> Result<DegeneracyReport>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let l0 = log_mults(0.0)?;
    let diff = |s: f64| -> Result<Vec<f64>> {
        let (p, m) = (log_mults(s)?, log_mults(-s)?);
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * s)).collect())
    };
    let (d1, d2) = (diff(h)?, diff(0.5 * h)?);
    if d1.len() != l0.len() || d2.len() != l0.len() || l0.is_empty() {
        return Err(Error::InvalidInput("multiplier lists must be nonempty and of equal length".into()));
    }
    if l0.contains(&0.0) {
        return Err(Error::NotRepelling { modulus: 1.0 });
    }
    let derivatives: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let ratios: Vec<f64> = derivatives.iter().zip(&l0).map(|(d, l)| d / l).collect();
    let noise = d1.iter().zip(&d2).zip(&l0).fold(0.0, |acc: f64, ((a, b), l)| acc.max(((a - b) / l).abs()));
    let n = ratios.len() as f64;
    let k_estimate = ratios.iter().sum::<f64>() / n;
    let dispersion = (ratios.iter().map(|r| (r - k_estimate).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DegeneracyReport {
        h,
        periods: Vec::new(),
        points: Vec::new(),
        log_multipliers: l0,
        derivatives,
        ratios,
        k_estimate,
        dispersion,
        noise,
    })
}

/// One representative per repelling cycle of exact period `p ≤ max_period`:
/// the cycle point farthest from every other root of `f^p(z) = z`, with that
/// distance.
pub fn repelling_cycles(f: &Polynomial, max_period: usize) -> Result<Vec<(usize, C64, f64)>> {
    let mut out = Vec::new();
    let scale = f.scale().max(1.0);
    for p in 1..=max_period {
        let pts = periodic_points(f, p)?;
        let nearest = |z: C64| pts.iter().map(|q| (q.z - z).norm()).filter(|&d| d > 1e-8 * scale).fold(f64::INFINITY, f64::min);
        let mut seen: Vec<C64> = Vec::new();
        for q in &pts {
            if q.multiplier.norm() <= 1.0 + 1e-9 {
                continue;
            }
            let lower = (1..p).filter(|d| p % d == 0).any(|d| (f.iterate(q.z, d) - q.z).norm() <= 1e-8 * scale);
            if lower || seen.iter().any(|s| (s - q.z).norm() <= 1e-8 * scale) {
                continue;
            }
            let mut orbit = Vec::with_capacity(p);
            let mut z = q.z;
            for _ in 0..p {
                orbit.push(z);
                z = f.eval(z);
            }
            seen.extend(&orbit);
            let (rep, sep) = orbit.into_iter().map(|z| (z, nearest(z))).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            out.push((p, rep, sep));
        }
    }
    Ok(out)
}

fn continue_cycle(f: &Polynomial, z0: C64, p: usize, reach: f64) -> Result<C64> {
    // the first Newton step is the tangent predictor; the corrector after it
    // must stay well inside the separation of the period-p points
    let mut z = z0;
    let mut first = z0;
    for it in 0..60 {
        let (w, dw) = f.iterate_d1(z, p);
        let step = (w - z) / (dw - C64::new(1.0, 0.0));
        if !step.norm().is_finite() {
            return Err(Error::NewtonDiverged { iterations: it, residual: f64::INFINITY });
        }
        z -= step;
        if it == 0 {
            first = z;
        }
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    let res = (f.iterate(z, p) - z).norm();
    if res > 1e-9 * z.norm().max(1.0) || (z - first).norm() > reach || (first - z0).norm() > 3.0 * reach {
        return Err(Error::NewtonDiverged { iterations: 60, residual: res });
    }
    Ok(z)
}

/// Multiplier ratios of the repelling cycles of period `≤ max_period` along
/// the straight chart path `x0 + t·u`, `u` the unit vector of `direction`.
pub fn degeneracy_probe(ctx: &MetricContext, x0: &[f64], direction: &[f64], max_period: usize, h: f64) -> Result<DegeneracyReport> {
    let len = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if direction.len() != x0.len() {
        return Err(Error::InvalidInput("direction has the wrong dimension".into()));
    }
    let lambda0 = ctx.lambda_at(x0, &ctx.base.lambda)?;
    let f0 = ctx.spec.poly(&lambda0)?;
    let cycles = repelling_cycles(&f0, max_period)?;
    // cycles of high period sit closer together than a step moves them, so
    // they are followed in substeps with a secant predictor
    let substeps = 1024;
    let log_mults = |t: f64| -> Result<Vec<f64>> {
        if t == 0.0 || len == 0.0 {
            return cycles.iter().map(|&(p, z, _)| Ok(f0.iterate_d1(z, p).1.norm().ln())).collect();
        }
        let mut lam = lambda0.clone();
        let mut polys = Vec::with_capacity(substeps);
        for k in 1..=substeps {
            let s = t * k as f64 / substeps as f64;
            let x: Vec<f64> = x0.iter().zip(direction).map(|(a, d)| a + s * d / len).collect();
            lam = ctx.lambda_at(&x, &lam)?;
            polys.push(ctx.spec.poly(&lam)?);
        }
        cycles
            .iter()
            .map(|&(p, z0, sep)| {
                let (mut prev, mut z) = (z0, z0);
                for f in &polys {
                    let next = continue_cycle(f, z + (z - prev), p, 0.3 * sep)?;
                    prev = z;
                    z = next;
                }
                Ok(polys.last().unwrap().iterate_d1(z, p).1.norm().ln())
            })
            .collect()
    };
    let mut rep = degeneracy_from_path(log_mults, h)?;
    rep.periods = cycles.iter().map(|c| c.0).collect();
    rep.points = cycles.iter().map(|c| c.1).collect();
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub coords: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    /// Entrywise error bound of `hessian`.
    pub hessian_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    pub length: f64,
    /// Change against the path sampled at every other point.
    pub refinement: f64,
    /// Length change allowed by the Hessian errors.
    pub hessian_noise: f64,
    pub noise_floor: f64,
}

fn segment_length(a: &PathSample, b: &PathSample, d: &[f64]) -> (f64, f64) {
    let qa = quadratic_form(&a.hessian, d).max(0.0).sqrt();
    let qb = quadratic_form(&b.hessian, d).max(0.0).sqrt();
    let len = 0.5 * (qa + qb);
    let d1: f64 = d.iter().map(|x| x.abs()).sum();
    let e = 0.5 * (a.hessian_error + b.hessian_error) * d1 * d1;
    let noise = if len > 0.0 { (e / (2.0 * len)).min(e.sqrt()) } else { e.sqrt() };
    (len, noise)
}

fn trapezoid(samples: &[&PathSample]) -> (f64, f64) {
    samples.windows(2).fold((0.0, 0.0), |(l, n), w| {
        let d: Vec<f64> = w[1].coords.iter().zip(&w[0].coords).map(|(b, a)| b - a).collect();
        let (sl, sn) = segment_length(w[0], w[1], &d);
        (l + sl, n + sn)
    })
}

/// `ℓ_G` of a sampled path by the composite trapezoid rule on `√(γ′ᵀHγ′)`.
pub fn path_length(samples: &[PathSample]) -> Result<PathLength> {
    let dim = samples.first().map(|s| s.coords.len()).ok_or_else(|| Error::InvalidInput("empty path".into()))?;
    if samples.iter().any(|s| s.coords.len() != dim || s.hessian.len() != dim || s.hessian.iter().any(|r| r.len() != dim)) {
        return Err(Error::InvalidInput("inconsistent path sample dimensions".into()));
    }
    let all: Vec<&PathSample> = samples.iter().collect();
    let (length, hessian_noise) = trapezoid(&all);
    let refinement = if samples.len() >= 3 {
        let mut coarse: Vec<&PathSample> = samples.iter().step_by(2).collect();
        if samples.len().is_multiple_of(2) {
            coarse.push(&samples[samples.len() - 1]);
        }
        (length - trapezoid(&coarse).0).abs()
    } else {
        0.0
    };
    Ok(PathLength { length, refinement, hessian_noise, noise_floor: refinement + hessian_noise })
}

/// Rectangle of chart coordinates for a one-dimensional complex chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Parses `"re0,re1,im0,im1,nx,ny"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidInput(format!("grid \"{s}\" is not re0,re1,im0,im1,nx,ny"));
        if parts.len() != 6 {
            return Err(bad());
        }
        let f = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
        let n = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        let g = GridSpec { re: (f(0)?, f(1)?), im: (f(2)?, f(3)?), nx: n(4)?, ny: n(5)? };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re.0, self.re.1, self.im.0, self.im.1].iter().all(|x| x.is_finite());
        if !finite || self.nx < 1 || self.ny < 1 || self.nx * self.ny < 2 {
            return Err(Error::InvalidInput("grid needs finite bounds and at least two nodes".into()));
        }
        if (self.nx > 1 && self.re.0 == self.re.1) || (self.ny > 1 && self.im.0 == self.im.1) {
            return Err(Error::InvalidInput("grid bounds collapse".into()));
        }
        Ok(())
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        let lerp = |(a, b): (f64, f64), i: usize, n: usize| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
        (0..self.ny).flat_map(|j| (0..self.nx).map(move |i| [lerp(self.re, i, self.nx), lerp(self.im, j, self.ny)])).collect()
    }
}

/// Hessian field on a grid; index `j·nx + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGrid {
    pub nx: usize,
    pub ny: usize,
    pub coords: Vec<[f64; 2]>,
    pub hessian: Vec<Option<[[f64; 2]; 2]>>,
    pub eigenvalues: Vec<Option<[f64; 2]>>,
    pub delta: Vec<Option<f64>>,
    /// Error name for nodes where the computation failed.
    pub failures: Vec<Option<String>>,
}

impl MetricGrid {
    pub fn from_hessians(spec: &GridSpec, hessian: Vec<Option<[[f64; 2]; 2]>>) -> Result<Self> {
        spec.validate()?;
        if hessian.len() != spec.nx * spec.ny {
            return Err(Error::InvalidInput("one Hessian per grid node required".into()));
        }
        let eigenvalues = hessian
            .iter()
            .map(|h| {
                h.map(|m| {
                    let ev = symmetric_eigenvalues(&[m[0].to_vec(), m[1].to_vec()]);
                    [ev[0], ev[1]]
                })
            })
            .collect();
        let n = hessian.len();
        Ok(MetricGrid {
            nx: spec.nx,
            ny: spec.ny,
            coords: spec.coords(),
            hessian,
            eigenvalues,
            delta: vec![None; n],
            failures: vec![None; n],
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((k % self.nx) as isize, (k / self.nx) as isize);
        (-1..=1isize).flat_map(move |dj| (-1..=1isize).map(move |di| (i + di, j + dj))).filter_map(move |(a, b)| {
            let inside = a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny;
            (inside && (a, b) != (i, j)).then(|| self.index(a as usize, b as usize))
        })
    }

    /// Midpoint quadratic-form length of the grid edge between nodes `p` and `q`.
    pub fn edge_weight(&self, p: usize, q: usize) -> Option<f64> {
        let (p, q) = (p.min(q), p.max(q));
        let (a, b) = (self.hessian[p]?, self.hessian[q]?);
        let d = [self.coords[q][0] - self.coords[p][0], self.coords[q][1] - self.coords[p][1]];
        let m: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| 0.5 * (a[i][j] + b[i][j])).collect()).collect();
        Some(quadratic_form(&m, &d).max(0.0).sqrt())
    }

    /// Shortest-path distances and predecessors from `source`.
    pub fn distances_from(&self, source: usize) -> Result<(Vec<f64>, Vec<Option<usize>>)> {
        if source >= self.len() {
            return Err(Error::InvalidInput(format!("node {source} outside a grid of {} nodes", self.len())));
        }
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut prev = vec![None; self.len()];
        if self.hessian[source].is_none() {
            return Ok((dist, prev));
        }
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, k)) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            for q in self.neighbors(k) {
                if let Some(w) = self.edge_weight(k, q) {
                    let nd = d + w;
                    if nd < dist[q] {
                        dist[q] = nd;
                        prev[q] = Some(k);
                        heap.push(Entry(nd, q));
                    }
                }
            }
        }
        Ok((dist, prev))
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub distance: f64,
    /// Grid node indices from `x` to `y`.
    pub path: Vec<usize>,
    pub coords: Vec<[f64; 2]>,
}

/// Grid distance `d_G(x, y)`; the search always runs from the smaller index.
pub fn wp_distance(grid: &MetricGrid, x: usize, y: usize) -> Result<Distance> {
    let (s, t) = (x.min(y), x.max(y));
    if t >= grid.len() {
        return Err(Error::InvalidInput(format!("node {t} outside a grid of {} nodes", grid.len())));
    }
    let (dist, prev) = grid.distances_from(s)?;
    if !dist[t].is_finite() {
        return Err(Error::Disconnected);
    }
    let mut path = vec![t];
    while let Some(p) = prev[*path.last().unwrap()] {
        path.push(p);
    }
    if x < y {
        path.reverse();
    }
    let coords = path.iter().map(|&k| grid.coords[k]).collect();
    Ok(Distance { distance: dist[t], path, coords })
}

/// Hessian field of `G` over a grid in a one-dimensional complex chart.
/// Nodes where continuation or the spectral solve fails are left empty.
pub fn metric_field(ctx: &MetricContext, spec: &GridSpec, h: f64) -> Result<MetricGrid> {
    if ctx.real_dim() != 2 {
        return Err(Error::InvalidInput("metric grids need a one-dimensional complex chart".into()));
    }
    spec.validate()?;
    let coords = spec.coords();
    let results = par::map(&coords, |c| {
        let bp = ctx.base_point(c)?;
        let s = hessian_form(ctx, &bp, h, false)?;
        Ok::<_, Error>(([[s.hessian[0][0], s.hessian[0][1]], [s.hessian[1][0], s.hessian[1][1]]], bp.delta))
    });
    let hessian = results.iter().map(|r| r.as_ref().ok().map(|x| x.0)).collect();
    let mut grid = MetricGrid::from_hessians(spec, hessian)?;
    grid.delta = results.iter().map(|r| r.as_ref().ok().map(|x| x.1)).collect();
    grid.failures = results.iter().map(|r| r.as_ref().err().map(|e| e.name().to_string())).collect();
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doubling_chain(n: usize) -> EdgeChain {
        let mut from = Vec::new();
        let mut to = Vec::new();
        for j in 0..n {
            for b in 0..2 {
                from.push(j as u32);
                to.push(((2 * j + b) % n) as u32);
            }
        }
        EdgeChain { nodes: n, mass: vec![0.5 / n as f64; 2 * n], from, to }
    }

    fn theta(j: u32, n: usize) -> f64 {
        (j as f64 + 0.5) / n as f64
    }

    #[test]
    fn doubling_cosine_variance_is_one_half() {
        let n = 1024;
        let c = doubling_chain(n);
        let psi: Vec<f64> = c.from.iter().map(|&j| (2.0 * std::f64::consts::PI * theta(j, n)).cos()).collect();
        let v = birkhoff_variance(&c, &psi, &[1, 10, 100]).unwrap();
        assert!(v.converged);
        assert!((v.limit - 0.5).abs() <= 2e-2, "{}", v.limit);
        assert!(v.mean.abs() < 1e-12);
        assert!((v.sequence[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_observable_has_zero_variance() {
        let c = doubling_chain(64);
        let v = birkhoff_variance(&c, &vec![0.0; c.mass.len()], &[1, 8]).unwrap();
        assert_eq!(v.limit, 0.0);
        assert!(v.sequence.iter().all(|s| s.1 == 0.0));
    }

    #[test]
    fn coboundary_has_vanishing_variance() {
        let n = 256;
        let c = doubling_chain(n);
        let g = |j: u32| (theta(j, n) * 7.0).sin() + theta(j, n).powi(2);
        let psi: Vec<f64> = c.from.iter().zip(&c.to).map(|(&a, &b)| g(b) - g(a)).collect();
        let v = birkhoff_variance(&c, &psi, &[1]).unwrap();
        assert!(v.limit.abs() <= 1e-10, "{}", v.limit);
        let pf = pressure_form(&c, &(0..c.mass.len() as u32).collect::<Vec<_>>(), &psi, 0.7, &[1.0, 0.0]).unwrap();
        assert!(pf.pm_norm_sq.abs() <= 1e-3);
    }

    #[test]
    fn mean_is_removed() {
        let n = 128;
        let c = doubling_chain(n);
        let base: Vec<f64> = c.from.iter().map(|&j| (2.0 * std::f64::consts::PI * theta(j, n)).cos()).collect();
        let shifted: Vec<f64> = base.iter().map(|x| x + 3.0).collect();
        let (a, b) = (birkhoff_variance(&c, &base, &[4]).unwrap(), birkhoff_variance(&c, &shifted, &[4]).unwrap());
        assert!((a.limit - b.limit).abs() < 1e-12);
        assert!((b.mean - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = doubling_chain(8);
        assert!(birkhoff_variance(&c, &[0.0], &[1]).is_err());
        assert!(birkhoff_variance(&c, &[0.0; 16], &[0]).is_err());
        assert!(pressure_form(&c, &[0; 16], &[0.0], -1.0, &[1.0]).is_err());
    }

    #[test]
    fn synthetic_quadratic_hessian_is_twice_identity() {
        let f = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
        let fd = finite_differences(f, &[0.3, -0.7, 1.1], 1e-3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((fd.hessian[i][j] - want).abs() <= 1e-6);
            }
        }
        assert!((fd.gradient[0] - 0.6).abs() < 1e-9);
        let ev = symmetric_eigenvalues(&fd.hessian);
        assert!(ev.iter().all(|e| (e - 2.0).abs() < 1e-6));
    }

    #[test]
    fn g_is_linear_in_delta() {
        let ly = 0.75;
        assert_eq!(g_function(ly, 2.0 * 0.83), 2.0 * g_function(ly, 0.83));
    }

    #[test]
    fn synthetic_conformal_rescaling() {
        let l0 = [0.4, 1.3, 2.2, 0.9];
        let k = 0.7;
        let r = degeneracy_from_path(|t| Ok(l0.iter().map(|l| l * (k * t).exp()).collect()), 1e-3).unwrap();
        assert!((r.k_estimate - k).abs() <= 1e-4);
        assert!(r.dispersion <= r.noise.max(1e-12));
    }

    #[test]
    fn frozen_family_is_degenerate() {
        let l0 = vec![0.4, 1.3, 2.2];
        let r = degeneracy_from_path(|_| Ok(l0.clone()), 1e-3).unwrap();
        assert!(r.ratios.iter().all(|x| *x == 0.0));
        assert_eq!(r.dispersion, 0.0);
    }

    #[test]
    fn cycles_of_the_square_map() {
        let f = Polynomial::quadratic(C64::new(0.0, 0.0));
        let c = repelling_cycles(&f, 3).unwrap();
        // 1 repelling fixed point, 1 two-cycle, 2 three-cycles
        assert_eq!(c.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 2, 3, 3]);
    }

    fn sample(coords: Vec<f64>, h: [[f64; 2]; 2]) -> PathSample {
        PathSample { coords, hessian: h.iter().map(|r| r.to_vec()).collect(), hessian_error: 0.0 }
    }

    const ID: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn constant_path_has_zero_length() {
        let p: Vec<PathSample> = (0..5).map(|_| sample(vec![0.2, 0.1], ID)).collect();
        assert_eq!(path_length(&p).unwrap().length, 0.0);
    }

    #[test]
    fn identity_field_gives_euclidean_length() {
        let p: Vec<PathSample> = (0..=10).map(|i| sample(vec![0.3 * i as f64 / 10.0, 0.4 * i as f64 / 10.0], ID)).collect();
        let l = path_length(&p).unwrap();
        assert!((l.length - 0.5).abs() <= 1e-6);
        assert!(l.refinement < 1e-12);
    }

    #[test]
    fn grid_spec_parsing() {
        let g = GridSpec::parse("1.7,1.75, -0.02,0.02, 9,9").unwrap();
        assert_eq!((g.nx, g.ny), (9, 9));
        assert_eq!(g.coords()[80], [1.75, 0.02]);
        assert!(GridSpec::parse("1,2,3").is_err());
        assert!(GridSpec::parse("1,1,0,1,3,3").is_err());
    }

    fn field(nx: usize, ny: usize, seed: u64) -> MetricGrid {
        let spec = GridSpec { re: (0.0, 1.0), im: (0.0, 0.5), nx, ny };
        let h = (0..nx * ny)
            .map(|k| {
                let s = ((k as u64 * 2654435761 + seed) % 97) as f64 / 97.0;
                Some([[1.0 + s, 0.3 * s], [0.3 * s, 0.5 + s * s]])
            })
            .collect();
        MetricGrid::from_hessians(&spec, h).unwrap()
    }

    #[test]
    fn identity_grid_distance_is_euclidean_along_axes() {
        let spec = GridSpec { re: (0.0, 1.0), im: (0.0, 1.0), nx: 5, ny: 5 };
        let g = MetricGrid::from_hessians(&spec, vec![Some(ID); 25]).unwrap();
        let d = wp_distance(&g, 0, 4).unwrap();
        assert!((d.distance - 1.0).abs() < 1e-12);
        assert_eq!(d.path, vec![0, 1, 2, 3, 4]);
        let diag = wp_distance(&g, 0, 24).unwrap();
        assert!((diag.distance - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(wp_distance(&g, 7, 7).unwrap().distance, 0.0);
    }

    #[test]
    fn removed_nodes_disconnect() {
        let spec = GridSpec { re: (0.0, 1.0), im: (0.0, 1.0), nx: 3, ny: 3 };
        let mut h = vec![Some(ID); 9];
        for k in [1, 4, 7] {
            h[k] = None;
        }
        let g = MetricGrid::from_hessians(&spec, h).unwrap();
        assert!(matches!(wp_distance(&g, 0, 2), Err(Error::Disconnected)));
    }

    proptest! {
        #[test]
        fn grid_distance_is_a_metric(seed in 0u64..1000, a in 0usize..42, b in 0usize..42, c in 0usize..42) {
            let g = field(7, 6, seed);
            let d = |x, y| wp_distance(&g, x, y).unwrap().distance;
            prop_assert_eq!(d(a, b), d(b, a));
            prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
            prop_assert_eq!(d(a, a), 0.0);
            if a != b {
                prop_assert!(d(a, b) > 0.0);
            }
            let p = wp_distance(&g, a, b).unwrap().path;
            prop_assert_eq!(p[0], a);
            prop_assert_eq!(*p.last().unwrap(), b);
        }

        #[test]
        fn reversed_path_has_equal_length(pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.1f64..2.0), 2..12)) {
            let fwd: Vec<PathSample> = pts.iter().map(|&(x, y, s)| sample(vec![x, y], [[s, 0.1], [0.1, s + 0.5]])).collect();
            let rev: Vec<PathSample> = fwd.iter().rev().cloned().collect();
            let (a, b) = (path_length(&fwd).unwrap(), path_length(&rev).unwrap());
            prop_assert!((a.length - b.length).abs() <= 1e-12);
        }

        #[test]
        fn pressure_form_scales_quadratically(s in 0.1f64..10.0, freq in 1u32..5) {
            let n = 64;
            let c = doubling_chain(n);
            let psi: Vec<f64> = c.from.iter().map(|&j| (2.0 * std::f64::consts::PI * freq as f64 * theta(j, n)).cos()).collect();
            let scaled: Vec<f64> = psi.iter().map(|x| s * x).collect();
            let edges: Vec<u32> = (0..c.mass.len() as u32).collect();
            let a = pressure_form(&c, &edges, &psi, 0.5, &[1.0]).unwrap();
            let b = pressure_form(&c, &edges, &scaled, 0.5, &[s]).unwrap();
            prop_assert!((b.pm_norm_sq - s * s * a.pm_norm_sq).abs() <= 1e-6 * b.pm_norm_sq.abs().max(1e-12));
        }

        #[test]
        fn finite_difference_hessian_is_symmetric(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
            let f = move |x: &[f64]| Ok(a * x[0] * x[0] + b * x[0] * x[1] + c * x[1].powi(2) + (x[0] * 0.3).sin());
            let fd = finite_differences(f, &[0.1, 0.2], 1e-3).unwrap();
            prop_assert_eq!(fd.hessian[0][1], fd.hessian[1][0]);
            prop_assert!((fd.hessian[0][1] - b).abs() < 1e-5);
        }
    }
}

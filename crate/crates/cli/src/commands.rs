//! One function per subcommand.

use std::path::PathBuf;
use std::sync::Arc;

use julia_thermo::family::{certify, lambda_hyperbolic_check, solve_critical_relation, FreeSlice, MisiurewiczParam};
use julia_thermo::motion::{transport_tree, MatchedTree};
use julia_thermo::pressure::{bowen_dimension, joint_pressure, pressure_from_tree, pressure_tree};
use julia_thermo::tower::{build_tower_with, TowerModel, TowerOptions};
use julia_thermo::transfer::{
    build_mesh, check_gap_condition, lasota_yorke_diagnostic, leading_eigendata, pressure_from_eta, single_operator, tower_bowen_parameter,
    tower_diagnostics, SpectralReport, TowerMesh, DEFAULT_EIGEN_TOL,
};
use julia_thermo::wpmetric::{metric_field, wp_distance, MetricContext, MetricGrid};
use julia_thermo::C64;
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, Run};
use crate::output::{num, opt, write_csv, write_json, Header, Table};

const LY_STEPS: [usize; 4] = [1, 2, 4, 8];
const LY_PROBES: usize = 16;
const DIAGNOSTIC_DEPTH: usize = 6;
const HYPERBOLIC_ITER: usize = 1000;

pub fn execute(run: &Run) -> anyhow::Result<Vec<PathBuf>> {
    let mut header = Header::new(run)?;
    match run.command {
        Command::Dimension => dimension(run, &mut header),
        Command::Pressure => pressure(run, &mut header),
        Command::JointPressure => joint(run, &mut header),
        Command::TowerSpectrum => spectrum(run, &mut header),
        Command::MetricField => field(run, &mut header),
        Command::Distance => distance(run, &mut header),
        Command::Diagnostics => diagnostics(run, &mut header),
    }
}

fn lambda_columns(dim: usize) -> Vec<String> {
    if dim == 1 {
        return vec!["lambda_re".into(), "lambda_im".into()];
    }
    (0..dim).flat_map(|i| [format!("lambda{i}_re"), format!("lambda{i}_im")]).collect()
}

fn lambda_cells(l: &[C64]) -> Vec<String> {
    l.iter().flat_map(|z| [num(z.re), num(z.im)]).collect()
}

/// The configured parameter, Newton-solved if requested.
fn parameter(run: &Run, lambda: &[C64]) -> anyhow::Result<Vec<C64>> {
    if run.solve {
        Ok(misiurewicz(run, lambda)?.lambda)
    } else {
        Ok(lambda.to_vec())
    }
}

fn misiurewicz(run: &Run, lambda: &[C64]) -> anyhow::Result<MisiurewiczParam> {
    Ok(if run.solve {
        let solved: Vec<usize> = (0..run.spec.ambient_dim).filter(|i| !run.chart.contains(i)).collect();
        solve_critical_relation(&run.spec, lambda, &FreeSlice::coordinates(&solved, run.spec.ambient_dim))?
    } else {
        certify(&run.spec, lambda)?
    })
}

fn tower(run: &Run, header: &mut Header) -> anyhow::Result<(MisiurewiczParam, TowerModel, Arc<TowerMesh>)> {
    let p = misiurewicz(run, &run.lambda)?;
    let model = build_tower_with(&p, TowerOptions::new(run.chi_star, run.kmax))?;
    let mesh = Arc::new(build_mesh(&model, run.mesh)?);
    header.constant("chi_hat", model.chi_hat);
    header.constant("chi_star", model.chi_star);
    header.constant("contraction", model.contraction());
    header.constant("kappa", run.kappa);
    Ok((p, model, mesh))
}

fn dimension(run: &Run, header: &mut Header) -> anyhow::Result<Vec<PathBuf>> {
    let mut table =
        Table::new(lambda_columns(run.spec.ambient_dim).into_iter().chain(["delta".into(), "residual".into(), "uncertainty".into()]));
    for l in &run.scan {
        let l = parameter(run, l)?;
        let d = bowen_dimension(&run.spec.poly(&l)?, run.tol, run.depth)?;
        let mut row = lambda_cells(&l);
        row.extend([num(d.delta), num(d.residual), num(d.uncertainty)]);
        table.push(row);
    }
    Ok(vec![write_csv(&run.out, "dimension.csv", header, &table)?])
}

fn pressure(run: &Run, header: &mut Header) -> anyhow::Result<Vec<PathBuf>> {
    let mut table =
        Table::new(lambda_columns(run.spec.ambient_dim).into_iter().chain(["t".into(), "pressure".into(), "uncertainty".into()]));
    for l in &run.scan {
        let l = parameter(run, l)?;
        let tree = pressure_tree(&run.spec.poly(&l)?, None, run.depth)?;
        for &t in &run.t {
            let p = pressure_from_tree(&tree, t)?;
            let mut row = lambda_cells(&l);
            row.extend([num(t), num(p.value), num(p.uncertainty)]);
            table.push(row);
        }
    }
    Ok(vec![write_csv(&run.out, "pressure.csv", header, &table)?])
}

fn joint(run: &Run, header: &mut Header) -> anyhow::Result<Vec<PathBuf>> {
    let lambda = parameter(run, &run.lambda)?;
    let mu = parameter(run, &run.mu)?;
    let tree = pressure_tree(&run.spec.poly(&lambda)?, None, run.depth)?;
    let m1 = MatchedTree::identity(tree.clone(), &lambda);
    let m2 = transport_tree(&run.spec, &tree, &lambda, &mu, None)?;
    header.constant("conjugacy_residual", m2.conjugacy_residual);
    let mut table = Table::new(["t1", "t2", "pressure", "uncertainty"]);
    for &t1 in &run.t {
        for &t2 in &run.t2 {
            let p = joint_pressure(&m1, &m2, t1, t2)?;
            table.push(vec![num(t1), num(t2), num(p.value), num(p.uncertainty)]);
        }
    }
    Ok(vec![write_csv(&run.out, "joint_pressure.csv", header, &table)?])
}

#[derive(Serialize)]
struct SpectrumRow {
    #[serde(flatten)]
    report: SpectralReport,
    log_eta: f64,
    gap_condition: bool,
    power_iters: usize,
}

fn spectrum(run: &Run, header: &mut Header) -> anyhow::Result<Vec<PathBuf>> {
    let (p, model, mesh) = tower(run, header)?;
    let motion = mesh.identity_motion()?;
    let mut rows = Vec::new();
    for &t in &run.t {
        let op = single_operator(&mesh, &motion, t, run.kappa)?;
        let ed = leading_eigendata(&op, DEFAULT_EIGEN_TOL)?;
        let log_eta = pressure_from_eta(&ed);
        rows.push(SpectrumRow {
            gap_condition: check_gap_condition(&model, t, 0.0, log_eta),
            power_iters: ed.power_iters,
            log_eta,
            report: SpectralReport::new(&op, &ed),
        });
    }
    let (delta, _) = tower_bowen_parameter(&mesh, &motion, run.kappa, run.tol)?;
    let body = json!({
        "lambda": p.lambda,
        "nodes": mesh.node_count(),
        "tower_delta": delta,
        "spectra": rows,
    });
    Ok(vec![write_json(&run.out, "tower_spectrum.json", header, &body)?])
}

fn diagnostics(run: &Run, header: &mut Header) -> anyhow::Result<Vec<PathBuf>> {
    let (p, _, mesh) = tower(run, header)?;
    let structure = tower_diagnostics(&mesh, DIAGNOSTIC_DEPTH);
    let motion = mesh.identity_motion()?;
    let (delta, ed) = tower_bowen_parameter(&mesh, &motion, run.kappa, run.tol)?;
    let op = single_operator(&mesh, &motion, delta, run.kappa)?;
    let ly = lasota_yorke_diagnostic(&op, &ed, &LY_STEPS, LY_PROBES, run.seed)?;
    let body = json!({
        "lambda": p.lambda,
        "relation_residuals": p.relation_residuals,
        "hyperbolicity": lambda_hyperbolic_check(&p, HYPERBOLIC_ITER),
        "tower": structure,
        "distortion_spread": structure.distortion_spread(),
        "tower_delta": delta,
        "lasota_yorke": ly,
    });
    Ok(vec![write_json(&run.out, "diagnostics.json", header, &body)?])
}

fn grid(run: &Run, header: &mut Header) -> anyhow::Result<MetricGrid> {
    let spec = run.grid.expect("validated");
    let p = misiurewicz(run, &run.lambda)?;
    let ctx = MetricContext::new(run.spec.clone(), p, run.chart.clone(), run.metric_options())?;
    header.constant("chi_hat", ctx.mesh.model.chi_hat);
    header.constant("chi_star", ctx.mesh.model.chi_star);
    header.constant("kappa", run.kappa);
    header.constant("h", run.h);
    Ok(metric_field(&ctx, &spec, run.h)?)
}

fn field(run: &Run, header: &mut Header) -> anyhow::Result<Vec<PathBuf>> {
    let g = grid(run, header)?;
    let mut table = Table::new(["node", "x", "y", "h11", "h12", "h22", "ev_min", "ev_max", "delta", "failure"]);
    for k in 0..g.len() {
        let h = g.hessian[k];
        let ev = g.eigenvalues[k];
        table.push(vec![
            k.to_string(),
            num(g.coords[k][0]),
            num(g.coords[k][1]),
            opt(h.map(|m| m[0][0])),
            opt(h.map(|m| m[0][1])),
            opt(h.map(|m| m[1][1])),
            opt(ev.map(|e| e[0])),
            opt(ev.map(|e| e[1])),
            opt(g.delta[k]),
            g.failures[k].clone().unwrap_or_default(),
        ]);
    }
    Ok(vec![write_csv(&run.out, "metric_field.csv", header, &table)?, write_json(&run.out, "metric_field.json", header, &g)?])
}

fn distance(run: &Run, header: &mut Header) -> anyhow::Result<Vec<PathBuf>> {
    let g = grid(run, header)?;
    let to = run.to.unwrap_or(g.len() - 1);
    let d = wp_distance(&g, run.from, to)?;
    let body = json!({ "from": run.from, "to": to, "distance": d.distance, "path": d.path, "coords": d.coords });
    Ok(vec![write_json(&run.out, "distance.json", header, &body)?])
}

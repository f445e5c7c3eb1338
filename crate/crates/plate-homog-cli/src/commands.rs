//! Subcommand implementations.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use plate_homog::effective::{effective_delta, effective_delta0, effective_deltainf, TensorRegime};
use plate_homog::fine::{compare_with_limit, fine_eigs, FineConfig, FineParity, FineProblem};
use plate_homog::geometry::{build_cell_mesh, CellMesh};
use plate_homog::inclusion::bloch_spectrum;
use plate_homog::limit::{
    evolve, solve_limit_resolvent, EvolveOptions, InitialData, LimitInputs, LimitProblem, ScaleLimit,
};
use plate_homog::spectrum::{compute_limit_spectrum, SpectralProblem};
use plate_homog::zhikov::{dispersion_samples, ZhikovFunction};

use crate::config::LoadedConfig;
use crate::output::Output;
use crate::Failure;

fn cell_mesh(cfg: &LoadedConfig, dim: usize) -> Result<CellMesh, Failure> {
    let c = &cfg.run.cell;
    Ok(build_cell_mesh(&c.shape, c.n, dim, if dim == 3 { c.n_z } else { 0 })?)
}

fn problem(cfg: &LoadedConfig) -> Result<SpectralProblem, Failure> {
    Ok(SpectralProblem::from_regime(&cfg.run.regime)?)
}

fn limit_problem(cfg: &LoadedConfig) -> Result<LimitProblem, Failure> {
    let regime = cfg.run.regime.validate()?;
    let cell = cell_mesh(cfg, regime.cell_dim())?;
    let mesh = cfg.macro_mesh()?;
    Ok(LimitProblem::new(&LimitInputs {
        regime: cfg.run.regime,
        material: &cfg.material,
        cell: &cell,
        macro_mesh: &mesh,
        modes: cfg.run.spectrum.modes,
        eig: cfg.run.solver.eig,
    })?)
}

fn write_dispersion(out: &Output, zf: &ZhikovFunction, points: usize) -> Result<(), Failure> {
    let samples = dispersion_samples(zf, points);
    let width = samples.first().map_or(0, |s| s.1.len());
    let mut header = vec!["lambda".to_string()];
    header.extend((0..width).map(|i| format!("beta_{i}")));
    let rows = samples.into_iter().map(|(l, b)| std::iter::once(l).chain(b).map(|v| v.to_string()).collect());
    out.csv("dispersion.csv", &header, rows)
}

/// Effective tensor of the regime.
pub fn tensor(cfg: &LoadedConfig, out: &Output) -> Result<(), Failure> {
    let problem = problem(cfg)?;
    let cell = cell_mesh(cfg, problem.cell_dim())?;
    let t = match problem.tensor_regime() {
        TensorRegime::DeltaFinite { delta } => effective_delta(&cfg.material, &cell, delta)?,
        TensorRegime::DeltaZero => effective_delta0(&cfg.material, &cell)?,
        TensorRegime::DeltaInfty => effective_deltainf(&cfg.material, &cell)?,
    };
    out.json("tensor.json", &json!({ "tensor": t, "form_eigenvalues": t.form_eigenvalues().as_slice() }))?;
    out.say(&format!("effective tensor written, form eigenvalues {:?}", t.form_eigenvalues().as_slice()));
    Ok(())
}

/// Inclusion spectrum of the regime.
pub fn bloch(cfg: &LoadedConfig, out: &Output) -> Result<(), Failure> {
    let problem = problem(cfg)?;
    let (tag, _) = problem
        .inclusion()
        .ok_or_else(|| Failure::Config(format!("{} has no resonant inclusion spectrum", problem.label())))?;
    let cell = cell_mesh(cfg, problem.cell_dim())?;
    let s = bloch_spectrum(&cfg.material, &cell, tag, cfg.run.spectrum.modes, &cfg.run.solver.eig)?;
    let report = s.report();
    out.json("bloch.json", &json!({ "spectrum": report }))?;
    let header: Vec<String> = ["index", "eigenvalue", "class"]
        .iter()
        .map(|s| s.to_string())
        .chain(s.tracked.iter().map(|c| format!("mean_{c}")))
        .collect();
    let rows = (0..s.len()).map(|i| {
        let mut row = vec![i.to_string(), s.eigenvalues[i].to_string(), format!("{:?}", s.classification[i]).to_lowercase()];
        row.extend(s.tracked.iter().map(|&c| s.weighted_means[i][c].to_string()));
        row
    });
    out.csv("bloch.csv", &header, rows)?;
    out.say(&format!("{} inclusion eigenvalues written", s.len()));
    Ok(())
}

/// Zhikov function samples of the regime.
pub fn zhikov(cfg: &LoadedConfig, out: &Output) -> Result<(), Failure> {
    let problem = problem(cfg)?;
    let (tag, components) = problem
        .inclusion()
        .ok_or_else(|| Failure::Config(format!("{} has no Zhikov function", problem.label())))?;
    let cell = cell_mesh(cfg, problem.cell_dim())?;
    let s = bloch_spectrum(&cfg.material, &cell, tag, cfg.run.spectrum.modes, &cfg.run.solver.eig)?;
    let zf = ZhikovFunction::new(&s, &components, cfg.run.spectrum.truncation.min(s.len()))?;
    out.json(
        "zhikov.json",
        &json!({
            "components": zf.components,
            "rho_mean": zf.rho_mean,
            "poles": zf.poles.iter().map(|p| [p.lo, p.hi]).collect::<Vec<_>>(),
            "uncoupled": zf.uncoupled,
            "lambda_max": zf.lambda_max(),
        }),
    )?;
    write_dispersion(out, &zf, cfg.run.spectrum.dispersion_points)?;
    out.say(&format!("Zhikov function with {} poles written", zf.poles.len()));
    Ok(())
}

/// Limit spectrum of the regime.
pub fn spectrum(cfg: &LoadedConfig, out: &Output) -> Result<(), Failure> {
    let problem = problem(cfg)?;
    let cell = cell_mesh(cfg, problem.cell_dim())?;
    let mesh = cfg.macro_mesh()?;
    let run = compute_limit_spectrum(problem, &cfg.material, &cell, &mesh, &cfg.spectrum_settings())?;
    out.json(
        "spectrum.json",
        &json!({
            "problem": run.problem,
            "tensor": run.tensor,
            "macro_values": run.macro_values,
            "strip": run.strip,
            "limit": run.limit,
        }),
    )?;
    let header: Vec<String> = ["index", "lambda", "kind", "matched_mu", "pole_interval"].iter().map(|s| s.to_string()).collect();
    let rows = run.limit.points.iter().enumerate().map(|(i, p)| {
        vec![
            i.to_string(),
            p.lambda.to_string(),
            serde_json::to_value(p.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            p.matched_mu.map(|m| m.to_string()).unwrap_or_default(),
            p.pole_interval.map(|m| m.to_string()).unwrap_or_default(),
        ]
    });
    out.csv("eigenvalues.csv", &header, rows)?;
    if let Some(zf) = &run.zhikov {
        write_dispersion(out, zf, cfg.run.spectrum.dispersion_points)?;
    }
    out.say(&format!(
        "{}: {} points, {} gaps, {} intervals",
        run.limit.regime,
        run.limit.points.len(),
        run.limit.gaps.len(),
        run.limit.intervals.len()
    ));
    Ok(())
}

/// Time evolution of the limit system.
pub fn evolve_cmd(cfg: &LoadedConfig, out: &Output) -> Result<(), Failure> {
    let ec = cfg.run.evolve.as_ref().ok_or_else(|| Failure::Config("missing \"evolve\" section".into()))?;
    let regime = cfg.run.regime.validate()?;
    let opts = EvolveOptions { dt: ec.dt.unwrap_or(ec.t_end / 1000.0), record_every: ec.record_every, ..EvolveOptions::new(ec.t_end) };
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Failure::Config(format!("dt = {} must be positive", opts.dt)));
    }
    ec.load.validate()?;
    let p = limit_problem(cfg)?;
    let init = match &ec.initial {
        Some(i) => InitialData::macro_mode(&p, i.mode, i.amplitude, &cfg.run.solver.eig)?,
        None => InitialData::zero(p.ndof()),
    };
    let tr = evolve(&p, regime.variant(), &init, &ec.load, &opts)?;
    let header: Vec<String> = ["time", "kinetic", "elastic", "total"].iter().map(|s| s.to_string()).collect();
    let rows = tr
        .energy
        .iter()
        .map(|e| [e.time, e.kinetic, e.elastic, e.total].iter().map(|v| v.to_string()).collect());
    out.csv("trajectory.csv", &header, rows)?;
    out.json("evolve.json", &tr)?;
    out.say(&format!("{} steps of {:?} written", tr.steps, tr.variant));
    Ok(())
}

/// Limit resolvent solve.
pub fn resolvent(cfg: &LoadedConfig, out: &Output) -> Result<(), Failure> {
    let rc = cfg.run.resolvent.as_ref().ok_or_else(|| Failure::Config("missing \"resolvent\" section".into()))?;
    if !(rc.lambda > 0.0 && rc.lambda.is_finite()) {
        return Err(Failure::Config(format!("lambda = {} must be positive", rc.lambda)));
    }
    rc.load.validate()?;
    let p = limit_problem(cfg)?;
    let state = solve_limit_resolvent(&p, rc.lambda, &rc.load)?;
    out.json("resolvent.json", &state)?;
    out.say(&format!("resolvent at lambda = {} written", rc.lambda));
    Ok(())
}

#[derive(Serialize)]
struct ValidateRow {
    epsilon: f64,
    h: f64,
    index: usize,
    fine: f64,
    nearest: f64,
    distance: f64,
    pollution_candidate: bool,
}

/// Fine-scale comparison against the computed limit spectrum.
pub fn validate(cfg: &LoadedConfig, out: &Output) -> Result<(), Failure> {
    let vc = cfg.run.validate.as_ref().ok_or_else(|| Failure::Config("missing \"validate\" section".into()))?;
    let problem = problem(cfg)?;
    let thickness: Vec<f64> = match (cfg.run.regime.delta, &vc.thickness) {
        (_, Some(h)) if h.len() == vc.epsilons.len() => h.clone(),
        (_, Some(_)) => return Err(Failure::Config("one thickness per period is required".into())),
        (ScaleLimit::Finite(delta), None) => vc.epsilons.iter().map(|e| delta * e).collect(),
        _ => return Err(Failure::Config("thickness values are required when delta is zero or infinite".into())),
    };
    let cell = cell_mesh(cfg, problem.cell_dim())?;
    let mesh = cfg.macro_mesh()?;
    let run = compute_limit_spectrum(problem, &cfg.material, &cell, &mesh, &cfg.spectrum_settings())?;
    let planar = cell_mesh(cfg, 2)?;
    let parity = match problem {
        SpectralProblem::Membrane { .. } => FineParity::Membrane,
        _ => FineParity::Bending,
    };
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (&epsilon, &h) in vc.epsilons.iter().zip(&thickness) {
        let fc = FineConfig {
            h,
            epsilon,
            mu_scaling: Some(cfg.run.regime.mu_scaling),
            tau: cfg.run.regime.tau,
            layers: vc.layers,
            lengths: cfg.run.macro_domain.lengths,
            clamped: cfg.run.macro_domain.clamped.clone(),
            parity,
            budget: cfg.run.solver.budget,
        };
        let fp = FineProblem::new(fc, &cfg.material, &planar)?;
        let values = fine_eigs(&fp, vc.count, &cfg.run.solver.eig)?;
        let report = compare_with_limit(&fp, &values, &run.limit, vc.pollution_tol);
        for r in &report.rows {
            rows.push(ValidateRow {
                epsilon,
                h,
                index: r.index,
                fine: r.fine,
                nearest: r.nearest,
                distance: r.distance,
                pollution_candidate: r.pollution_candidate,
            });
        }
        out.say(&format!("epsilon = {epsilon}: {} unknowns, eigenvalues {values:?}", fp.ndof()));
        reports.push(report);
    }
    out.json("validate.json", &json!({ "limit": run.limit, "reports": reports }))?;
    out.csv_records("validate.csv", &rows)?;
    Ok(())
}

/// Creates the output directory.
pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Solver(format!("cannot create {}: {e}", dir.display())))
}

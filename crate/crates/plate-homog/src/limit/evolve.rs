//! Implicit-midpoint time stepping of the limit systems and the memory-kernel formulation.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::system::{FieldRole, LimitProblem, LimitState, TermLoad};
use super::LoadSpec;
use crate::error::{Error, Result};
use crate::fem::eig::EigOptions;
use crate::fem::sparse::{axpy, Factor, SparseMatrix};
use crate::macro_plate::macro_eigs;

/// Evolution problem of a regime row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionVariant {
    /// Bending dynamics with quasistatic membrane and inclusion fields.
    LongTimeBending,
    /// Membrane dynamics with resonant inclusions on the unscaled time.
    RealTime,
    /// Bending dynamics coupled to resonant inclusions.
    StrongHcBending,
    /// Bending dynamics coupled to resonant bending inclusions of vanishing relative thickness.
    Delta0Hc,
}

/// Initial displacement and velocity on the unknowns of the coupled system.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialData {
    /// Displacement.
    pub displacement: Vec<f64>,
    /// Velocity.
    pub velocity: Vec<f64>,
}

impl InitialData {
    /// Zero data for a system with `n` unknowns.
    pub fn zero(n: usize) -> Self {
        Self { displacement: vec![0.0; n], velocity: vec![0.0; n] }
    }

    /// Macroscopic eigenmode `index` (zero-based) of amplitude `amplitude` in the first field, at rest.
    pub fn macro_mode(problem: &LimitProblem, index: usize, amplitude: f64, opts: &EigOptions) -> Result<Self> {
        let spec = macro_eigs(&problem.macro_op, index + 1, opts)?;
        let mut data = Self::zero(problem.ndof());
        let f = &problem.fields[0];
        for (d, m) in data.displacement[f.offset..f.offset + f.len()].iter_mut().zip(&spec.modes[index]) {
            *d = amplitude * m;
        }
        Ok(data)
    }
}

/// Time-stepping settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Final time.
    pub t_end: f64,
    /// Step size.
    pub dt: f64,
    /// Record a state every this many steps.
    pub record_every: usize,
}

impl EvolveOptions {
    /// Settings with the default step `t_end / 1000`, recording every step.
    pub fn new(t_end: f64) -> Self {
        Self { t_end, dt: t_end / 1000.0, record_every: 1 }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("final time {} must be positive", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record interval must be at least one step".into()));
        }
        Ok(((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize)
    }
}

/// Kinetic and elastic energy at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    /// Time.
    pub time: f64,
    /// `½ vᵀ M v`.
    pub kinetic: f64,
    /// `½ xᵀ K x`.
    pub elastic: f64,
    /// Sum of both.
    pub total: f64,
}

/// Recorded states and the energy log of an evolution.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// Evolution problem.
    pub variant: EvolutionVariant,
    /// Step size.
    pub dt: f64,
    /// Number of steps taken.
    pub steps: usize,
    /// Recorded states, the initial state first.
    pub states: Vec<LimitState>,
    /// Energy after every step, the initial energy first.
    pub energy: Vec<EnergySample>,
}

fn add_scaled(out: &mut [f64], s: f64, x: &[f64]) {
    axpy(s, x, out);
}

fn midpoint_rhs(m: &SparseMatrix, k: &SparseMatrix, x: &[f64], v: &[f64], f: &[f64], dt: f64) -> Vec<f64> {
    let xv: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + dt * b).collect();
    let mut rhs = m.matvec(&xv);
    k.matvec_add(x, -0.25 * dt * dt, &mut rhs);
    add_scaled(&mut rhs, 0.5 * dt * dt, f);
    rhs
}

fn velocity_update(x_new: &[f64], x: &[f64], v: &[f64], dt: f64) -> Vec<f64> {
    x_new.iter().zip(x).zip(v).map(|((a, b), c)| 2.0 * (a - b) / dt - c).collect()
}

struct CellState {
    factor: Factor,
    gram: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

fn energy(problem: &LimitProblem, x: &[f64], v: &[f64], cells: Option<&CellState>, time: f64) -> EnergySample {
    let mut kinetic = 0.5 * problem.m.form(v, v);
    let mut elastic = 0.5 * problem.k.form(x, x);
    if let (Some(c), Some((k1, m1))) = (cells, problem.cell_pair()) {
        for (t, row) in c.gram.iter().enumerate() {
            for (s, g) in row.iter().enumerate() {
                kinetic += 0.5 * g * m1.form(&c.v[t], &c.v[s]);
                elastic += 0.5 * g * k1.form(&c.b[t], &c.b[s]);
            }
        }
    }
    EnergySample { time, kinetic, elastic, total: kinetic + elastic }
}

fn scales_at(loads: &[TermLoad], t: f64) -> Vec<f64> {
    loads.iter().map(|l| l.term.time_profile.eval(t)).collect()
}

fn load_at(loads: &[TermLoad], n: usize, t: f64) -> Vec<f64> {
    let mut f = vec![0.0; n];
    for l in loads {
        add_scaled(&mut f, l.term.time_profile.eval(t), &l.dynamic);
    }
    f
}

/// Integrates `M ẍ + K x = F(t)` with the implicit midpoint rule and reconstructs the limit fields.
pub fn evolve(
    problem: &LimitProblem,
    variant: EvolutionVariant,
    initial: &InitialData,
    load: &LoadSpec,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if variant != problem.regime.variant() {
        return Err(Error::Config(format!(
            "evolution {variant:?} does not belong to the regime {:?}",
            problem.regime
        )));
    }
    let steps = opts.steps()?;
    let n = problem.ndof();
    if initial.displacement.len() != n || initial.velocity.len() != n {
        return Err(Error::Config(format!("initial data must have {n} entries")));
    }
    let dt = opts.dt;
    let loads = problem.assemble_load(load)?;
    let a = SparseMatrix::lin_comb(1.0, &problem.m, 0.25 * dt * dt, &problem.k)?;
    let factor = Factor::cholesky(&a)?;
    let mut cells = match problem.cell_pair() {
        Some((k1, m1)) => {
            let ac = SparseMatrix::lin_comb(1.0, m1, 0.25 * dt * dt, k1)?;
            let nc = k1.nrows();
            let gram = loads
                .iter()
                .map(|t| loads.iter().map(|s| problem.scalar_mass.form(&t.nodal_profile, &s.nodal_profile)).collect())
                .collect();
            Some(CellState {
                factor: Factor::cholesky(&ac)?,
                gram,
                b: vec![vec![0.0; nc]; loads.len()],
                v: vec![vec![0.0; nc]; loads.len()],
            })
        }
        None => None,
    };
    let mut x = initial.displacement.clone();
    let mut v = initial.velocity.clone();
    let record = |x: &[f64], cells: &Option<CellState>, t: f64| {
        let cb = cells.as_ref().map(|c| c.b.clone()).unwrap_or_default();
        problem.state(x, &loads, &scales_at(&loads, t), cb, None, Some(t))
    };
    let mut states = vec![record(&x, &cells, 0.0)?];
    let mut log = vec![energy(problem, &x, &v, cells.as_ref(), 0.0)];
    for step in 0..steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let t_new = (step + 1) as f64 * dt;
        let f = load_at(&loads, n, t_mid);
        let x_new = factor.solve(&midpoint_rhs(&problem.m, &problem.k, &x, &v, &f, dt));
        v = velocity_update(&x_new, &x, &v, dt);
        x = x_new;
        if let (Some(c), Some((k1, m1))) = (cells.as_mut(), problem.cell_pair()) {
            for (t, l) in loads.iter().enumerate() {
                let g = l.term.time_profile.eval(t_mid);
                let lt: Vec<f64> = l.cell_load.as_ref().map(|v| v.iter().map(|x| g * x).collect()).unwrap_or_default();
                let b_new = c.factor.solve(&midpoint_rhs(m1, k1, &c.b[t], &c.v[t], &lt, dt));
                c.v[t] = velocity_update(&b_new, &c.b[t], &c.v[t], dt);
                c.b[t] = b_new;
            }
        }
        log.push(energy(problem, &x, &v, cells.as_ref(), t_new));
        if (step + 1) % opts.record_every == 0 || step + 1 == steps {
            states.push(record(&x, &cells, t_new)?);
        }
    }
    Ok(Trajectory { variant, dt, steps, states, energy: log })
}

/// Coupling of every inclusion mode to the macro unknowns.
struct ModalCoupling {
    /// Per scalar unknown, the macro unknowns and mode components it couples to.
    links: Vec<Vec<(usize, usize)>>,
    /// Per mode, its weighted means.
    means: Vec<Vec<f64>>,
}

impl ModalCoupling {
    /// `E_n X`: the coupled macro combination as a scalar field.
    fn apply(&self, n: usize, x: &[f64]) -> Vec<f64> {
        self.links
            .iter()
            .map(|l| l.iter().map(|&(i, k)| self.means[n][k] * x[i]).sum())
            .collect()
    }

    /// `E_nᵀ w` added into `out` with scale `s`.
    fn apply_t(&self, n: usize, w: &[f64], s: f64, out: &mut [f64]) {
        for (l, &ws) in self.links.iter().zip(w) {
            for &(i, k) in l {
                out[i] += s * self.means[n][k] * ws;
            }
        }
    }

    /// `Σ_n α_n E_nᵀ Ms E_n` as triplets on the macro unknowns.
    fn gram(&self, ms: &SparseMatrix, alpha: &[f64]) -> Vec<(usize, usize, f64)> {
        let nk = self.means.first().map(|m| m.len()).unwrap_or(0);
        let mut w = vec![vec![0.0; nk]; nk];
        for (n, m) in self.means.iter().enumerate() {
            for k1 in 0..nk {
                for k2 in 0..nk {
                    w[k1][k2] += alpha[n] * m[k1] * m[k2];
                }
            }
        }
        let mut out = Vec::new();
        for (s1, s2, val) in ms.triplets() {
            for &(i1, k1) in &self.links[s1] {
                for &(i2, k2) in &self.links[s2] {
                    out.push((i1, i2, w[k1][k2] * val));
                }
            }
        }
        out
    }
}

/// Macro unknowns of the midpoint evolution with the inclusion modes eliminated.
///
/// Each modal field `u_n = c_n + E_n X` obeys `ü_n + η_n u_n = η_n E_n X + M_s⁻¹ F_n`, which is
/// solved by the discrete convolution of the trapezoidal recurrence with the history of `X`;
/// the macro equation then carries a memory term. Returns `X` at every step, the initial value first.
pub fn evolve_memory_kernel(
    problem: &LimitProblem,
    initial: &InitialData,
    load: &LoadSpec,
    opts: &EvolveOptions,
) -> Result<Vec<Vec<f64>>> {
    let sp = problem
        .spectrum
        .as_ref()
        .ok_or_else(|| Error::Config("regime has no resonant inclusion modes".into()))?;
    let steps = opts.steps()?;
    let dt = opts.dt;
    let n = problem.ndof();
    if initial.displacement.len() != n || initial.velocity.len() != n {
        return Err(Error::Config(format!("initial data must have {n} entries")));
    }
    let nx = problem.macro_len;
    let q = problem.family.per_node();
    let ms = &problem.scalar_mass;
    let len = ms.nrows();
    let mut links = vec![Vec::new(); len];
    for cp in &problem.couplings {
        let f = &problem.fields[cp.field];
        for (s, l) in links.iter_mut().enumerate() {
            if let Some(i) = f.index(q, s / q, cp.comp, s % q) {
                l.push((i, cp.mode_comp));
            }
        }
    }
    let modes: Vec<usize> = problem
        .fields
        .iter()
        .filter(|f| matches!(f.role, FieldRole::Micro(_)))
        .map(|f| f.offset)
        .collect();
    let etas = &sp.eigenvalues;
    let coupling = ModalCoupling { links, means: sp.weighted_means.clone() };

    let keep: Vec<usize> = (0..nx).collect();
    let mxx = problem.m.principal_submatrix(&keep)?;
    let kxx = problem.k.principal_submatrix(&keep)?;
    let mut eff = mxx.triplets();
    for (i, j, v) in coupling.gram(ms, &vec![1.0; modes.len()]) {
        eff.push((i, j, -v));
    }
    let m_eff = SparseMatrix::from_triplets(nx, nx, &eff)?;
    let w0: Vec<f64> = etas.iter().map(|&e| 0.5 * dt * dt / (1.0 + 0.25 * e * dt * dt)).collect();
    let alpha: Vec<f64> = etas.iter().zip(&w0).map(|(&e, &w)| e * (0.5 - 0.25 * w * e)).collect();
    let mut s_trip = SparseMatrix::lin_comb(1.0, &m_eff, 0.25 * dt * dt, &kxx)?.triplets();
    for (i, j, v) in coupling.gram(ms, &alpha) {
        s_trip.push((i, j, 0.5 * dt * dt * v));
    }
    let s_factor = Factor::cholesky(&SparseMatrix::from_triplets(nx, nx, &s_trip)?)?;
    let ms_factor = Factor::cholesky(ms)?;

    let recurrence: Vec<(Matrix2<f64>, Vector2<f64>)> = etas
        .iter()
        .map(|&e| {
            let a = Matrix2::new(0.0, 1.0, -e, 0.0);
            let lhs = (Matrix2::identity() - 0.5 * dt * a).try_inverse().expect("trapezoidal matrix is invertible");
            (lhs * (Matrix2::identity() + 0.5 * dt * a), lhs * Vector2::new(0.0, dt))
        })
        .collect();
    let kernels: Vec<Vec<f64>> = recurrence
        .iter()
        .map(|(r, p)| {
            let mut out = Vec::with_capacity(steps + 1);
            let mut y = *p;
            for _ in 0..=steps {
                out.push(y[0]);
                y = r * y;
            }
            out
        })
        .collect();

    let loads = problem.assemble_load(load)?;
    let x0 = &initial.displacement;
    let v0 = &initial.velocity;
    let mut xk: Vec<f64> = x0[..nx].to_vec();
    let mut vk: Vec<f64> = v0[..nx].to_vec();
    let mut free: Vec<(Vec<f64>, Vec<f64>)> = modes
        .iter()
        .enumerate()
        .map(|(m, &o)| {
            let ex = coupling.apply(m, &xk);
            let ev = coupling.apply(m, &vk);
            let u: Vec<f64> = (0..len).map(|s| x0[o + s] + ex[s]).collect();
            let w: Vec<f64> = (0..len).map(|s| v0[o + s] + ev[s]).collect();
            (u, w)
        })
        .collect();
    let mut u: Vec<Vec<f64>> = free.iter().map(|(u, _)| u.clone()).collect();
    let mut history: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(steps); modes.len()];
    let mut out = vec![xk.clone()];
    for step in 0..steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let mut fx = vec![0.0; nx];
        let mut fm = vec![vec![0.0; len]; modes.len()];
        for l in &loads {
            let g = l.term.time_profile.eval(t_mid);
            add_scaled(&mut fx, g, &l.dynamic[..nx]);
            for (f, &o) in fm.iter_mut().zip(&modes) {
                add_scaled(f, g, &l.dynamic[o..o + len]);
            }
        }
        for (m, (r, _)) in recurrence.iter().enumerate() {
            let (fu, fw) = &mut free[m];
            for s in 0..len {
                let y = r * Vector2::new(fu[s], fw[s]);
                fu[s] = y[0];
                fw[s] = y[1];
            }
        }
        let mut rhs_force = fx.clone();
        let mut rhs_memory = vec![0.0; nx];
        let mut hist_now = Vec::with_capacity(modes.len());
        let mut q_now = Vec::with_capacity(modes.len());
        let half_kx = kxx.matvec(&xk);
        for (m, &eta) in etas.iter().enumerate() {
            coupling.apply_t(m, &fm[m], -1.0, &mut rhs_force);
            let qn = ms_factor.solve(&fm[m]);
            let mut h = free[m].0.clone();
            for (j, g) in history[m].iter().enumerate() {
                add_scaled(&mut h, kernels[m][step - j], g);
            }
            let ex = coupling.apply(m, &xk);
            let u_tilde: Vec<f64> =
                (0..len).map(|s| 0.5 * (u[m][s] + h[s] + w0[m] * (0.5 * eta * ex[s] + qn[s]))).collect();
            let diff: Vec<f64> = (0..len).map(|s| 0.5 * ex[s] - u_tilde[s]).collect();
            coupling.apply_t(m, &ms.matvec(&diff), -eta, &mut rhs_memory);
            hist_now.push(h);
            q_now.push(qn);
        }
        let xv: Vec<f64> = xk.iter().zip(&vk).map(|(a, b)| a + dt * b).collect();
        let mut rhs = m_eff.matvec(&xv);
        for i in 0..nx {
            rhs[i] += 0.5 * dt * dt * (rhs_force[i] - 0.5 * half_kx[i] + rhs_memory[i]);
        }
        let x_new = s_factor.solve(&rhs);
        for (m, &eta) in etas.iter().enumerate() {
            let e_old = coupling.apply(m, &xk);
            let e_new = coupling.apply(m, &x_new);
            let g: Vec<f64> = (0..len).map(|s| 0.5 * eta * (e_old[s] + e_new[s]) + q_now[m][s]).collect();
            u[m] = (0..len).map(|s| hist_now[m][s] + w0[m] * g[s]).collect();
            history[m].push(g);
        }
        vk = velocity_update(&x_new, &xk, &vk, dt);
        xk = x_new;
        out.push(xk.clone());
    }
    Ok(out)
}

/// Trapezoidal approximation of `∫ e^{-s t} x(t) dt` from equally or unequally spaced samples.
pub fn laplace_transform(times: &[f64], values: &[Vec<f64>], s: f64) -> Vec<f64> {
    let n = values.first().map(|v| v.len()).unwrap_or(0);
    let mut out = vec![0.0; n];
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        add_scaled(&mut out, 0.5 * h * (-s * times[i - 1]).exp(), &values[i - 1]);
        add_scaled(&mut out, 0.5 * h * (-s * times[i]).exp(), &values[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::sparse::norm;
    use crate::geometry::{build_cell_mesh, build_macro_mesh, Edge, InclusionShape};
    use crate::limit::{
        CellProfile, LimitInputs, LoadTerm, MacroProfile, MuScaling, RegimeConfig, ScaleLimit, TimeProfile,
    };
    use crate::tensor::{isotropic, MaterialSpec};

    fn problem(regime: RegimeConfig, modes: usize, lengths: [f64; 2], n: usize) -> LimitProblem {
        let dim = if matches!(regime.delta, ScaleLimit::Finite(_)) { 3 } else { 2 };
        let cell = build_cell_mesh(&InclusionShape::disk(0.26), 8, dim, if dim == 3 { 4 } else { 0 }).unwrap();
        let mesh = build_macro_mesh(lengths[0], lengths[1], n, n, &[Edge::Left, Edge::Right]).unwrap();
        let mat = MaterialSpec::new(isotropic(1.0, 1.0), isotropic(10.0, 10.0), 1.0, 2.0, 0.01).unwrap();
        LimitProblem::new(&LimitInputs {
            regime,
            material: &mat,
            cell: &cell,
            macro_mesh: &mesh,
            modes,
            eig: EigOptions::default(),
        })
        .unwrap()
    }

    fn long_time() -> RegimeConfig {
        RegimeConfig { delta: ScaleLimit::Finite(1.0), kappa: None, mu_scaling: MuScaling::Eps, tau: 2 }
    }

    fn membrane_zero() -> RegimeConfig {
        RegimeConfig {
            delta: ScaleLimit::Zero,
            kappa: Some(ScaleLimit::Infinite),
            mu_scaling: MuScaling::Eps,
            tau: 0,
        }
    }

    fn mode_error(p: &LimitProblem, dt: f64, t_end: f64) -> f64 {
        let init = InitialData::macro_mode(p, 0, 1.0, &EigOptions::default()).unwrap();
        let nu = macro_eigs(&p.macro_op, 1, &EigOptions::default()).unwrap().values[0];
        let opts = EvolveOptions { t_end, dt, record_every: 1 };
        let tr = evolve(p, EvolutionVariant::LongTimeBending, &init, &LoadSpec::default(), &opts).unwrap();
        let mut err = 0.0f64;
        for s in &tr.states {
            let t = s.time.unwrap();
            let exact: Vec<f64> = init.displacement.iter().map(|v| v * (nu.sqrt() * t).cos()).collect();
            let d: Vec<f64> = s.dynamic.iter().zip(&exact).map(|(a, b)| a - b).collect();
            err = err.max(norm(&d) / norm(&init.displacement));
        }
        err
    }

    #[test]
    fn single_mode_has_second_order_phase_error() {
        let p = problem(long_time(), 0, [4.0, 4.0], 6);
        let nu = macro_eigs(&p.macro_op, 1, &EigOptions::default()).unwrap().values[0];
        let period = 2.0 * std::f64::consts::PI / nu.sqrt();
        let t_end = 2.0 * period;
        let e1 = mode_error(&p, period / 40.0, t_end);
        let e2 = mode_error(&p, period / 80.0, t_end);
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "errors {e1:e} {e2:e} ratio {ratio}");
    }

    #[test]
    fn free_energy_is_conserved() {
        let p = problem(membrane_zero(), 6, [1.0, 1.0], 4);
        let mut init = InitialData::macro_mode(&p, 0, 1.0, &EigOptions::default()).unwrap();
        for (i, v) in init.velocity.iter_mut().enumerate() {
            *v = ((i as f64) * 0.37).sin();
        }
        let opts = EvolveOptions { t_end: 1.0, dt: 1e-3, record_every: 500 };
        let tr = evolve(&p, EvolutionVariant::RealTime, &init, &LoadSpec::default(), &opts).unwrap();
        assert_eq!(tr.energy.len(), 1001);
        let e0 = tr.energy[0].total;
        for e in &tr.energy {
            assert!((e.total - e0).abs() <= 1e-10 * e0, "{} vs {e0}", e.total);
        }
    }

    #[test]
    fn cell_problem_energy_is_conserved() {
        let cfg = RegimeConfig { kappa: Some(ScaleLimit::Finite(1.0)), ..membrane_zero() };
        let p = problem(cfg, 3, [1.0, 1.0], 3);
        let load = LoadSpec {
            terms: vec![LoadTerm {
                component: 2,
                amplitude: 1.0,
                macro_profile: MacroProfile::Constant,
                transverse_power: 0,
                cell_profile: CellProfile::StiffOnly,
                time_profile: TimeProfile::Pulse { duration: 0.1 },
            }],
        };
        let opts = EvolveOptions { t_end: 0.4, dt: 1e-3, record_every: 100 };
        let tr = evolve(&p, EvolutionVariant::RealTime, &InitialData::zero(p.ndof()), &load, &opts).unwrap();
        let after: Vec<f64> = tr.energy.iter().filter(|e| e.time > 0.1 + 1e-9).map(|e| e.total).collect();
        assert!(after[0] > 0.0);
        for e in &after {
            assert!((e - after[0]).abs() <= 1e-9 * after[0]);
        }
    }

    #[test]
    fn memory_kernel_matches_the_coupled_solve() {
        let p = problem(membrane_zero(), 8, [1.0, 1.0], 4);
        let mut init = InitialData::macro_mode(&p, 0, 1.0, &EigOptions::default()).unwrap();
        let o = p.macro_len;
        init.velocity[o + 3] = 0.5;
        init.displacement[o + 7] = -0.2;
        let load = LoadSpec {
            terms: vec![LoadTerm {
                component: 0,
                amplitude: 2.0,
                macro_profile: MacroProfile::Sine { k: [1.0, 2.0] },
                transverse_power: 0,
                cell_profile: CellProfile::SoftOnly,
                time_profile: TimeProfile::Sine { omega: 3.0 },
            }],
        };
        let opts = EvolveOptions { t_end: 1.0, dt: 5e-3, record_every: 1 };
        let tr = evolve(&p, EvolutionVariant::RealTime, &init, &load, &opts).unwrap();
        let mk = evolve_memory_kernel(&p, &init, &load, &opts).unwrap();
        assert_eq!(mk.len(), tr.states.len());
        let scale = tr.states.iter().map(|s| norm(&s.dynamic[..o])).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for (s, x) in tr.states.iter().zip(&mk) {
            for (a, b) in s.dynamic[..o].iter().zip(x) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst <= 1e-6 * scale.max(1.0), "sup difference {worst:e}");
    }

    #[test]
    fn laplace_transform_matches_the_resolvent() {
        let p = problem(long_time(), 0, [4.0, 4.0], 6);
        let opts_eig = EigOptions::default();
        let a = InitialData::macro_mode(&p, 0, 1.0, &opts_eig).unwrap();
        let b = InitialData::macro_mode(&p, 1, 0.5, &opts_eig).unwrap();
        let init = InitialData {
            displacement: a.displacement.iter().zip(&b.displacement).map(|(x, y)| x + y).collect(),
            velocity: b.displacement.iter().map(|y| 0.3 * y).collect(),
        };
        let opts = EvolveOptions { t_end: 12.0, dt: 1e-3, record_every: 1 };
        let tr = evolve(&p, EvolutionVariant::LongTimeBending, &init, &LoadSpec::default(), &opts).unwrap();
        let times: Vec<f64> = tr.states.iter().map(|s| s.time.unwrap()).collect();
        let values: Vec<Vec<f64>> = tr.states.iter().map(|s| s.dynamic.clone()).collect();
        for s in [2.0, 5.0] {
            let lt = laplace_transform(&times, &values, s);
            let data: Vec<f64> = init.displacement.iter().zip(&init.velocity).map(|(u0, u1)| s * u0 + u1).collect();
            let rhs = p.m.matvec(&data);
            let r = p.resolve(s * s, &rhs).unwrap();
            let d: Vec<f64> = lt.iter().zip(&r).map(|(x, y)| x - y).collect();
            assert!(norm(&d) <= 1e-4 * norm(&r), "s = {s}: {:e}", norm(&d) / norm(&r));
        }
    }

    #[test]
    fn loaded_energy_obeys_the_a_priori_bound() {
        let p = problem(membrane_zero(), 4, [1.0, 1.0], 4);
        let load = LoadSpec {
            terms: vec![
                LoadTerm {
                    component: 1,
                    amplitude: 1.0,
                    macro_profile: MacroProfile::Sine { k: [1.0, 1.0] },
                    transverse_power: 0,
                    cell_profile: CellProfile::Uniform,
                    time_profile: TimeProfile::Sine { omega: 2.0 },
                },
                LoadTerm {
                    component: 2,
                    amplitude: 0.5,
                    macro_profile: MacroProfile::Constant,
                    transverse_power: 0,
                    cell_profile: CellProfile::SoftOnly,
                    time_profile: TimeProfile::Constant,
                },
            ],
        };
        let init = InitialData::macro_mode(&p, 0, 0.1, &EigOptions::default()).unwrap();
        let opts = EvolveOptions { t_end: 2.0, dt: 2e-3, record_every: 1000 };
        let tr = evolve(&p, EvolutionVariant::RealTime, &init, &load, &opts).unwrap();
        let loads = p.assemble_load(&load).unwrap();
        let mf = Factor::cholesky(&p.m).unwrap();
        let mut integral = 0.0;
        let e0 = tr.energy[0].total;
        for (i, e) in tr.energy.iter().enumerate().skip(1) {
            let t = (i as f64 - 0.5) * opts.dt;
            let f = load_at(&loads, p.ndof(), t);
            integral += opts.dt * f.iter().zip(mf.solve(&f)).map(|(a, b)| a * b).sum::<f64>();
            let bound = e.time.exp() * (e0 + 0.5 * integral);
            assert!(e.total <= bound * (1.0 + 1e-9), "t = {}: {} > {bound}", e.time, e.total);
        }
    }

    #[test]
    fn wrong_variant_and_step_are_rejected() {
        let p = problem(membrane_zero(), 2, [1.0, 1.0], 3);
        let init = InitialData::zero(p.ndof());
        let opts = EvolveOptions::new(1.0);
        assert!(evolve(&p, EvolutionVariant::Delta0Hc, &init, &LoadSpec::default(), &opts).is_err());
        let bad = EvolveOptions { dt: 0.0, ..opts };
        assert!(matches!(
            evolve(&p, EvolutionVariant::RealTime, &init, &LoadSpec::default(), &bad),
            Err(Error::Config(_))
        ));
        let bad = EvolveOptions { dt: -1.0, ..opts };
        assert!(evolve(&p, EvolutionVariant::RealTime, &init, &LoadSpec::default(), &bad).is_err());
    }
}

//! Time integration of the free-surface problem: the volume potential solve
//! feeding the surface equations, the classical fourth-order Runge-Kutta
//! loop, relaxation zones with a start-up ramp, and the modal filter.

use std::path::PathBuf;
use std::time::Instant;

use crate::assembly::{self, DirichletLayout, SurfaceForm, VolumeAssembler};
use crate::basis::{FilterSpec, QuadratureRule, ReferenceElement};
use crate::config::{
    CaseConfig, FilterCadence, FilterField, InitialState, MeshUpdatePolicy,
    PreconditionerChoice, SpacingChoice, WaveHeightInput, WaveLengthInput, WaveMode,
};
use crate::error::{Error, Result, Routine};
use crate::mesh::{SurfaceMesh, VerticalSpacing, VolumeMesh};
use crate::output::{self, ProbeSeries};
use crate::solver::{
    self, JacobiPreconditioner, Preconditioner, SolveReport, SolverParams, SparseOperator,
    SymmetricGaussSeidel,
};
use crate::wavetheory::{dispersion_solve, max_steepness, AiryWave, StreamFunctionWave,
    WaveTargets};

/// Blending coefficient of a relaxation zone as a function of the
/// normalized distance `s` from the outer boundary: 1 at the boundary
/// (solution pinned to the target), 0 at the inner edge (untouched).
///
/// The taper must stay soft at the inner edge: per-step blending repeats
/// tens of times per wave period, so even a modest coefficient there acts
/// as a wall and reflects. This shape keeps the inner half of the zone
/// below 0.06 and does nearly all the work in the outer quarter.
pub fn relaxation_coefficient(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    ((1.0 - s).powf(3.5).exp() - 1.0) / (std::f64::consts::E - 1.0)
}

/// Start-up factor multiplying the generation targets: raised-cosine from
/// 0 to 1 over `ramp_time`, 1 afterwards.
pub fn ramp_factor(t: f64, ramp_time: f64) -> f64 {
    if ramp_time <= 0.0 || t >= ramp_time {
        1.0
    } else if t <= 0.0 {
        0.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * t / ramp_time).cos())
    }
}

/// Construct the wave prescribed by the configuration. Linearized runs get
/// linear theory targets; fully nonlinear runs get the stream function
/// solution. The reference depth is the one at x = 0, where waves enter.
pub fn build_wave(case: &CaseConfig) -> Result<Box<dyn WaveTargets>> {
    let h = case.depth.depth_at(0.0);
    let g = case.gravity;
    enum Scale {
        Wavenumber(f64),
        Period(f64),
    }
    let scale = match case.wave_length_input {
        WaveLengthInput::RelativeDepth(kh) => Scale::Wavenumber(kh / h),
        WaveLengthInput::Wavelength(l) => Scale::Wavenumber(2.0 * std::f64::consts::PI / l),
        WaveLengthInput::Period(t) => Scale::Period(t),
    };
    let height = match case.wave_height_input {
        WaveHeightInput::Height(height) => height,
        WaveHeightInput::SteepnessRatio(ratio) => {
            // The ratio is interpreted through the linear wavelength, which
            // is the only one known before the wave is solved.
            let k = match scale {
                Scale::Wavenumber(k) => k,
                Scale::Period(t) => {
                    dispersion_solve(2.0 * std::f64::consts::PI / t, h, g)?
                }
            };
            let wavelength = 2.0 * std::f64::consts::PI / k;
            ratio * max_steepness(k * h) * wavelength
        }
    };
    match (case.mode, scale) {
        (WaveMode::Lpf, Scale::Wavenumber(k)) => {
            Ok(Box::new(AiryWave::from_wavenumber(k, height, h, g)?))
        }
        (WaveMode::Lpf, Scale::Period(t)) => {
            Ok(Box::new(AiryWave::from_period(t, height, h, g)?))
        }
        (WaveMode::Fnpf, Scale::Wavenumber(k)) => {
            Ok(Box::new(StreamFunctionWave::from_wavenumber(k, height, h, g)?))
        }
        (WaveMode::Fnpf, Scale::Period(t)) => {
            Ok(Box::new(StreamFunctionWave::from_period(t, height, h, g)?))
        }
    }
}

/// Surface DoFs inside a relaxation zone with their precomputed blending
/// coefficients.
struct ZoneBlend {
    dofs: Vec<(usize, f64)>,
}

impl ZoneBlend {
    fn new(surface: &SurfaceMesh, start: f64, end: f64, outer_left: bool) -> Self {
        let width = end - start;
        let dofs = surface
            .coords()
            .iter()
            .enumerate()
            .filter(|&(_, &x)| x >= start - 1e-12 && x <= end + 1e-12)
            .map(|(i, &x)| {
                let s = if outer_left {
                    (x - start) / width
                } else {
                    (end - x) / width
                };
                (i, relaxation_coefficient(s))
            })
            .collect();
        ZoneBlend { dofs }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Clock {
    calls: usize,
    seconds: f64,
}

impl Clock {
    fn add(&mut self, start: Instant) {
        self.calls += 1;
        self.seconds += start.elapsed().as_secs_f64();
    }
}

/// Aggregated outcome of one family of linear solves over a run.
#[derive(Debug, Default, Clone, Copy)]
pub struct SolveAggregate {
    pub solves: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_rel_residual: f64,
}

impl SolveAggregate {
    fn add(&mut self, r: &SolveReport) {
        self.solves += 1;
        self.total_iterations += r.iterations;
        self.max_iterations = self.max_iterations.max(r.iterations);
        self.max_rel_residual = self.max_rel_residual.max(r.rel_residual);
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.solves == 0 {
            0.0
        } else {
            self.total_iterations as f64 / self.solves as f64
        }
    }
}

/// Everything a caller needs after a run: final surface state, probe
/// series, per-step surface extrema, solve statistics and wall-clock
/// attribution.
#[derive(Debug)]
pub struct RunReport {
    pub dt: f64,
    pub n_steps: usize,
    pub t_end: f64,
    pub wave_period: f64,
    pub wave_length: f64,
    pub wave_celerity: f64,
    pub wave_height: f64,
    pub surface_x: Vec<f64>,
    pub eta: Vec<f64>,
    pub phi_eta: Vec<f64>,
    pub w_eta: Vec<f64>,
    pub probes: Vec<ProbeSeries>,
    /// (t, min eta, max eta) once per step plus the final state.
    pub extrema: Vec<(f64, f64, f64)>,
    pub surface_dofs: usize,
    pub volume_dofs: usize,
    pub timings: Vec<(Routine, usize, f64)>,
    pub laplace: SolveAggregate,
    pub volume_mass: SolveAggregate,
    pub surface_mass: SolveAggregate,
    pub snapshot_files: Vec<String>,
    pub elapsed_seconds: f64,
}

pub struct Simulation {
    elem: ReferenceElement,
    mesh: VolumeMesh,
    assembler: VolumeAssembler,
    layout: DirichletLayout,
    a_full: SparseOperator,
    m_vol: SparseOperator,
    a_red: SparseOperator,
    rhs_red: Vec<f64>,
    precond_choice: PreconditionerChoice,
    precond_laplace: Box<dyn Preconditioner>,
    jacobi_mass: JacobiPreconditioner,
    laplace_params: SolverParams,
    mass_params: SolverParams,
    form: SurfaceForm,
    fs_rule: QuadratureRule,
    surf_mass: Option<SparseOperator>,
    surf_precond: Option<JacobiPreconditioner>,
    wave: Box<dyn WaveTargets>,
    generation: Option<ZoneBlend>,
    absorption: Option<ZoneBlend>,
    ramp_time: f64,
    per_stage_update: bool,
    gravity: f64,
    filter_cadence: FilterCadence,
    filter_eta: bool,
    filter_phi: bool,
    dt: f64,
    n_steps: usize,
    t_end: f64,
    eta: Vec<f64>,
    phi: Vec<f64>,
    w_surf: Vec<f64>,
    phi_red: Vec<f64>,
    phi_vol: Vec<f64>,
    w_vol: Vec<f64>,
    probes: Vec<ProbeSeries>,
    extrema: Vec<(f64, f64, f64)>,
    clock_update: Clock,
    clock_solve: Clock,
    clock_rhs: Clock,
    laplace_agg: SolveAggregate,
    volmass_agg: SolveAggregate,
    surfmass_agg: SolveAggregate,
    snapshot: Option<(PathBuf, usize)>,
    snapshot_files: Vec<String>,
}

impl Simulation {
    pub fn new(case: &CaseConfig) -> Result<Self> {
        let p = case.order;
        let filter_spec = FilterSpec {
            cutoff: case.filter.cutoff.unwrap_or(p.saturating_sub(1)),
            alpha: case.filter.alpha,
            exponent: case.filter.exponent,
        };
        let elem = ReferenceElement::with_filter(p, filter_spec)?;
        let surface = SurfaceMesh::new(case.length, case.elements, p, case.periodic)?;
        let spacing = match case.spacing {
            SpacingChoice::Uniform => VerticalSpacing::Uniform,
            SpacingChoice::Clustered => VerticalSpacing::Clustered,
        };
        let depth = case.depth.clone();
        let mesh = VolumeMesh::extrude(surface, case.layers, spacing, |x| depth.depth_at(x))?;

        let wave = build_wave(case)?;
        if case.periodic && case.initial == InitialState::Wave {
            let count = case.length / wave.wavelength();
            if (count - count.round()).abs() > 1e-6 * count.max(1.0) {
                return Err(Error::invalid(
                    "domain.length",
                    format!(
                        "a periodic wave start needs an integer number of wavelengths; \
                         length / wavelength = {count:.6}"
                    ),
                ));
            }
        }

        let assembler = VolumeAssembler::new(&mesh, &elem);
        let a_full = assembler.assemble_laplace(&mesh)?;
        let m_vol = assembler.assemble_mass(&mesh)?;
        let surface_dofs: Vec<usize> = mesh.surface_map().to_vec();
        let layout = DirichletLayout::new(&a_full, &surface_dofs);
        let zeros = vec![0.0; surface_dofs.len()];
        let (a_red, rhs_red) = layout.reduce(&a_full, &zeros);
        let precond_laplace: Box<dyn Preconditioner> = match case.solver.preconditioner {
            PreconditionerChoice::Jacobi => Box::new(JacobiPreconditioner::new(&a_red)?),
            PreconditionerChoice::Sgs => Box::new(SymmetricGaussSeidel::new(&a_red)?),
        };
        let jacobi_mass = JacobiPreconditioner::new(&m_vol)?;

        let (form, fs_rule, surf_mass) = match case.mode {
            WaveMode::Fnpf => {
                let degree = case.over_integration.unwrap_or(3 * p);
                let rule = QuadratureRule::gauss_exact(degree);
                let m = assembly::surface_mass_exact(mesh.surface(), &elem);
                (SurfaceForm::Nonlinear, rule, Some(m))
            }
            WaveMode::Lpf => (SurfaceForm::Linear, elem.collocation_rule(), None),
        };
        let surf_precond = match &surf_mass {
            Some(m) => Some(JacobiPreconditioner::new(m)?),
            None => None,
        };

        let n = mesh.surface().n_dofs();
        let (eta, phi) = match case.initial {
            InitialState::Rest => (vec![0.0; n], vec![0.0; n]),
            InitialState::Wave => (
                mesh.surface().field_from_fn(|x| wave.eta(x, 0.0))?,
                mesh.surface().field_from_fn(|x| wave.phi_eta(x, 0.0))?,
            ),
        };

        let generation = case
            .generation_zone
            .map(|(a, b)| ZoneBlend::new(mesh.surface(), a, b, true));
        let absorption = case
            .absorption_zone
            .map(|(a, b)| ZoneBlend::new(mesh.surface(), a, b, false));

        let t_wave = wave.period();
        let t_end = case.periods * t_wave;
        let u_ref = case.u_max.unwrap_or_else(|| {
            wave.celerity()
                .max(1.5 * 2.0 * std::f64::consts::PI * wave.height() / t_wave)
        });
        let dt0 = case.cfl * mesh.surface().dx_min() / u_ref;
        let n_steps = ((t_end / dt0).ceil() as usize).max(1);
        let dt = t_end / n_steps as f64;

        let laplace_params = SolverParams {
            rtol: case.solver.laplace_rtol,
            atol: case.solver.laplace_atol,
            max_iter: case.solver.max_iter,
        };
        let mass_params = SolverParams {
            rtol: case.solver.mass_rtol,
            atol: case.solver.mass_atol,
            max_iter: case.solver.max_iter,
        };

        let probes = case.probes.iter().map(|&x| ProbeSeries::new(x)).collect();
        let n_free = layout.n_free();
        let n_vol = mesh.n_dofs();
        Ok(Simulation {
            elem,
            mesh,
            assembler,
            layout,
            a_full,
            m_vol,
            a_red,
            rhs_red,
            precond_choice: case.solver.preconditioner,
            precond_laplace,
            jacobi_mass,
            laplace_params,
            mass_params,
            form,
            fs_rule,
            surf_mass,
            surf_precond,
            wave,
            generation,
            absorption,
            ramp_time: case.ramp_periods * t_wave,
            per_stage_update: case.mesh_update == MeshUpdatePolicy::Stage,
            gravity: case.gravity,
            filter_cadence: case.filter.cadence,
            filter_eta: case.filter.fields.contains(&FilterField::Eta),
            filter_phi: case.filter.fields.contains(&FilterField::Phi),
            dt,
            n_steps,
            t_end,
            eta,
            phi,
            w_surf: vec![0.0; n],
            phi_red: vec![0.0; n_free],
            phi_vol: vec![0.0; n_vol],
            w_vol: vec![0.0; n_vol],
            probes,
            extrema: Vec::new(),
            clock_update: Clock::default(),
            clock_solve: Clock::default(),
            clock_rhs: Clock::default(),
            laplace_agg: SolveAggregate::default(),
            volmass_agg: SolveAggregate::default(),
            surfmass_agg: SolveAggregate::default(),
            snapshot: None,
            snapshot_files: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn wave(&self) -> &dyn WaveTargets {
        self.wave.as_ref()
    }

    pub fn volume_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }

    /// Write volume snapshots into `dir` every `every` steps during the run.
    pub fn set_snapshot_dir(&mut self, dir: impl Into<PathBuf>, every: usize) {
        if every > 0 {
            self.snapshot = Some((dir.into(), every));
        }
    }

    #[cfg(test)]
    pub(crate) fn eta_mut(&mut self) -> &mut [f64] {
        &mut self.eta
    }

    fn require_converged(&self, r: SolveReport, rtol: f64) -> Result<SolveReport> {
        if r.converged {
            Ok(r)
        } else {
            Err(Error::SolveFailure {
                routine: r.routine,
                iterations: r.iterations,
                rel_residual: r.rel_residual,
                rtol,
            })
        }
    }

    fn check_finite(
        &self,
        fields: &[&[f64]],
        t: f64,
        step: usize,
        stage: usize,
    ) -> Result<()> {
        for f in fields {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    routine: Routine::EvaluateRhs,
                    time: t,
                    step,
                    stage,
                });
            }
        }
        Ok(())
    }

    /// One evaluation of the semi-discrete right-hand side at state
    /// (`eta`, `phi`). `refresh` re-fits the volume mesh and operators to
    /// `eta` first (fully nonlinear runs only; the linearized problem keeps
    /// the rest geometry). Leaves the volume potential, vertical velocity
    /// and surface velocity behind for probing and snapshots.
    fn evaluate_rhs(
        &mut self,
        t: f64,
        eta: &[f64],
        phi: &[f64],
        refresh: bool,
        step: usize,
        stage: usize,
        d_eta: &mut [f64],
        d_phi: &mut [f64],
    ) -> Result<()> {
        self.check_finite(&[eta, phi], t, step, stage)?;
        let nonlinear = matches!(self.form, SurfaceForm::Nonlinear);
        let refresh = nonlinear && refresh;

        if refresh {
            let s = Instant::now();
            self.mesh.update(eta)?;
            self.clock_update.add(s);
        }

        let s = Instant::now();
        if refresh {
            self.assembler.assemble_laplace_into(&self.mesh, &mut self.a_full)?;
            self.assembler.assemble_mass_into(&self.mesh, &mut self.m_vol)?;
            self.precond_laplace = match self.precond_choice {
                PreconditionerChoice::Jacobi => {
                    Box::new(JacobiPreconditioner::new(&self.a_red)?)
                }
                PreconditionerChoice::Sgs => Box::new(SymmetricGaussSeidel::new(&self.a_red)?),
            };
            self.jacobi_mass = JacobiPreconditioner::new(&self.m_vol)?;
        }
        self.layout
            .reduce_into(&self.a_full, phi, &mut self.a_red, &mut self.rhs_red);
        let report = solver::cg_solve(
            &self.a_red,
            &self.rhs_red,
            &mut self.phi_red,
            self.precond_laplace.as_ref(),
            self.laplace_params,
            Routine::LaplaceSolve,
        )?;
        let report = self.require_converged(report, self.laplace_params.rtol)?;
        self.laplace_agg.add(&report);
        self.layout.expand_into(&self.phi_red, phi, &mut self.phi_vol);

        let rhs_w = self.assembler.recovery_rhs(&self.mesh, &self.phi_vol);
        let report = solver::cg_solve(
            &self.m_vol,
            &rhs_w,
            &mut self.w_vol,
            &self.jacobi_mass,
            self.mass_params,
            Routine::LaplaceSolve,
        )?;
        let report = self.require_converged(report, self.mass_params.rtol)?;
        self.volmass_agg.add(&report);
        for (i, &g) in self.mesh.surface_map().iter().enumerate() {
            self.w_surf[i] = self.w_vol[g];
        }
        self.clock_solve.add(s);

        let s = Instant::now();
        match self.form {
            SurfaceForm::Nonlinear => {
                let (rk, rd) = assembly::assemble_fs_rhs(
                    self.mesh.surface(),
                    &self.elem,
                    &self.fs_rule,
                    SurfaceForm::Nonlinear,
                    self.gravity,
                    eta,
                    phi,
                    &self.w_surf,
                );
                let m = self.surf_mass.as_ref().expect("nonlinear surface mass");
                let pc = self.surf_precond.as_ref().expect("nonlinear surface mass");
                for (rhs, out) in [(&rk, &mut *d_eta), (&rd, &mut *d_phi)] {
                    let report = solver::cg_solve(
                        m,
                        rhs,
                        out,
                        pc,
                        self.mass_params,
                        Routine::EvaluateRhs,
                    )?;
                    let report = self.require_converged(report, self.mass_params.rtol)?;
                    self.surfmass_agg.add(&report);
                }
            }
            SurfaceForm::Linear => {
                // Collocation makes both projections plain evaluations.
                d_eta.copy_from_slice(&self.w_surf);
                for (o, &e) in d_phi.iter_mut().zip(eta.iter()) {
                    *o = -self.gravity * e;
                }
            }
        }
        self.clock_rhs.add(s);
        self.check_finite(&[d_eta, d_phi], t, step, stage)
    }

    fn apply_relaxation(&mut self, t: f64) {
        if let Some(zone) = &self.generation {
            let ramp = ramp_factor(t, self.ramp_time);
            for &(dof, cr) in &zone.dofs {
                let x = self.mesh.surface().coords()[dof];
                let eta_t = ramp * self.wave.eta(x, t);
                let phi_t = ramp * self.wave.phi_eta(x, t);
                self.eta[dof] = (1.0 - cr) * self.eta[dof] + cr * eta_t;
                self.phi[dof] = (1.0 - cr) * self.phi[dof] + cr * phi_t;
            }
        }
        if let Some(zone) = &self.absorption {
            for &(dof, cr) in &zone.dofs {
                self.eta[dof] *= 1.0 - cr;
                self.phi[dof] *= 1.0 - cr;
            }
        }
    }

    fn apply_filter_to(elem: &ReferenceElement, mesh: &VolumeMesh, flags: (bool, bool),
        eta: &mut [f64], phi: &mut [f64]) {
        if flags.0 {
            mesh.surface().filter_field(elem, eta);
        }
        if flags.1 {
            mesh.surface().filter_field(elem, phi);
        }
    }

    fn record_state(&mut self, t: f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &e in &self.eta {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        self.extrema.push((t, lo, hi));
        for probe in &mut self.probes {
            let x = probe.x;
            probe.push(
                t,
                self.mesh.surface().eval_field(&self.elem, &self.eta, x),
                self.mesh.surface().eval_field(&self.elem, &self.phi, x),
                self.mesh.surface().eval_field(&self.elem, &self.w_surf, x),
            );
        }
    }

    fn write_snapshot(&mut self, step: usize, t: f64) -> Result<()> {
        let Some((dir, every)) = &self.snapshot else {
            return Ok(());
        };
        if step % every != 0 {
            return Ok(());
        }
        let name = format!("solution_{step:06}.vtk");
        let path = dir.join(&name);
        output::write_vtk_snapshot(&path, &self.mesh, t, &self.phi_vol, &self.w_vol)?;
        self.snapshot_files.push(name);
        Ok(())
    }

    /// Integrate to `t_end` and hand back the full report. Consumes the
    /// simulation: the state it leaves behind is the final one.
    pub fn run(mut self) -> Result<RunReport> {
        let started = Instant::now();
        let n = self.mesh.surface().n_dofs();
        let mut stage_eta = vec![0.0; n];
        let mut stage_phi = vec![0.0; n];
        let mut k_eta = [
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
        ];
        let mut k_phi = k_eta.clone();
        // (state weight, time offset) for stages 2..4 of the classical
        // fourth-order scheme.
        const STAGES: [(f64, f64); 3] = [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)];

        for step in 0..self.n_steps {
            let t = step as f64 * self.dt;
            stage_eta.copy_from_slice(&self.eta);
            stage_phi.copy_from_slice(&self.phi);
            self.evaluate_rhs(
                t, &stage_eta, &stage_phi, true, step, 1, &mut k_eta[0], &mut k_phi[0],
            )?;
            self.record_state(t);
            self.write_snapshot(step, t)?;

            for s in 1..4 {
                let (a, tau) = STAGES[s - 1];
                for i in 0..n {
                    stage_eta[i] = self.eta[i] + self.dt * a * k_eta[s - 1][i];
                    stage_phi[i] = self.phi[i] + self.dt * a * k_phi[s - 1][i];
                }
                if self.filter_cadence == FilterCadence::Stage {
                    Self::apply_filter_to(
                        &self.elem,
                        &self.mesh,
                        (self.filter_eta, self.filter_phi),
                        &mut stage_eta,
                        &mut stage_phi,
                    );
                }
                self.evaluate_rhs(
                    t + tau * self.dt,
                    &stage_eta,
                    &stage_phi,
                    self.per_stage_update,
                    step,
                    s + 1,
                    &mut k_eta[s],
                    &mut k_phi[s],
                )?;
            }
            let w = self.dt / 6.0;
            for i in 0..n {
                self.eta[i] +=
                    w * (k_eta[0][i] + 2.0 * k_eta[1][i] + 2.0 * k_eta[2][i] + k_eta[3][i]);
                self.phi[i] +=
                    w * (k_phi[0][i] + 2.0 * k_phi[1][i] + 2.0 * k_phi[2][i] + k_phi[3][i]);
            }

            let t_next = (step + 1) as f64 * self.dt;
            self.apply_relaxation(t_next);
            if self.filter_cadence != FilterCadence::Off {
                let flags = (self.filter_eta, self.filter_phi);
                let (elem, mesh) = (&self.elem, &self.mesh);
                if flags.0 {
                    mesh.surface().filter_field(elem, &mut self.eta);
                }
                if flags.1 {
                    mesh.surface().filter_field(elem, &mut self.phi);
                }
            }
        }

        // One more evaluation so the final row carries a consistent w.
        stage_eta.copy_from_slice(&self.eta);
        stage_phi.copy_from_slice(&self.phi);
        self.evaluate_rhs(
            self.t_end,
            &stage_eta,
            &stage_phi,
            true,
            self.n_steps,
            1,
            &mut k_eta[0],
            &mut k_phi[0],
        )?;
        self.record_state(self.t_end);
        self.write_snapshot(self.n_steps, self.t_end)?;

        Ok(RunReport {
            dt: self.dt,
            n_steps: self.n_steps,
            t_end: self.t_end,
            wave_period: self.wave.period(),
            wave_length: self.wave.wavelength(),
            wave_celerity: self.wave.celerity(),
            wave_height: self.wave.height(),
            surface_x: self.mesh.surface().coords().to_vec(),
            eta: self.eta,
            phi_eta: self.phi,
            w_eta: self.w_surf,
            probes: self.probes,
            extrema: self.extrema,
            surface_dofs: n,
            volume_dofs: self.mesh.n_dofs(),
            timings: vec![
                (
                    Routine::LaplaceSolve,
                    self.clock_solve.calls,
                    self.clock_solve.seconds,
                ),
                (Routine::EvaluateRhs, self.clock_rhs.calls, self.clock_rhs.seconds),
                (
                    Routine::LaplaceUpdate,
                    self.clock_update.calls,
                    self.clock_update.seconds,
                ),
            ],
            laplace: self.laplace_agg,
            volume_mass: self.volmass_agg,
            surface_mass: self.surfmass_agg,
            snapshot_files: self.snapshot_files,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// Tight-tolerance potential solve on a fixed surface state, for accuracy
/// studies where the production solver tolerances would floor the error.
pub struct PotentialSolution {
    pub phi: Vec<f64>,
    pub w: Vec<f64>,
    pub laplace: SolveReport,
    pub recovery: SolveReport,
}

pub fn solve_potential(
    mesh: &mut VolumeMesh,
    elem: &ReferenceElement,
    eta: &[f64],
    phi_surface: &[f64],
) -> Result<PotentialSolution> {
    mesh.update(eta)?;
    let assembler = VolumeAssembler::new(mesh, elem);
    let a = assembler.assemble_laplace(mesh)?;
    let m = assembler.assemble_mass(mesh)?;
    let surface_dofs: Vec<usize> = mesh.surface_map().to_vec();
    let layout = DirichletLayout::new(&a, &surface_dofs);
    let (a_red, rhs) = layout.reduce(&a, phi_surface);
    let params = SolverParams {
        rtol: 1e-12,
        atol: 1e-15,
        max_iter: 200_000,
    };
    let pc = JacobiPreconditioner::new(&a_red)?;
    let mut x = vec![0.0; layout.n_free()];
    let laplace = solver::cg_solve(
        &a_red,
        &rhs,
        &mut x,
        &pc,
        params,
        Routine::LaplaceSolve,
    )?;
    if !laplace.converged {
        return Err(Error::SolveFailure {
            routine: Routine::LaplaceSolve,
            iterations: laplace.iterations,
            rel_residual: laplace.rel_residual,
            rtol: params.rtol,
        });
    }
    let mut phi = vec![0.0; mesh.n_dofs()];
    layout.expand_into(&x, phi_surface, &mut phi);

    let rhs_w = assembler.recovery_rhs(mesh, &phi);
    let pc_m = JacobiPreconditioner::new(&m)?;
    let mut w = vec![0.0; mesh.n_dofs()];
    let recovery = solver::cg_solve(&m, &rhs_w, &mut w, &pc_m, params, Routine::LaplaceSolve)?;
    if !recovery.converged {
        return Err(Error::SolveFailure {
            routine: Routine::LaplaceSolve,
            iterations: recovery.iterations,
            rel_residual: recovery.rel_residual,
            rtol: params.rtol,
        });
    }
    Ok(PotentialSolution {
        phi,
        w,
        laplace,
        recovery,
    })
}

/// Infinity-norm error of the recovered surface vertical velocity against
/// the wave's own, with the exact surface state imposed at t = 0 on one
/// periodic wavelength. This isolates the spatial accuracy of the
/// potential solve from time integration.
pub fn wave_velocity_error(
    wave: &dyn WaveTargets,
    depth: f64,
    elements: usize,
    order: usize,
    layers: usize,
) -> Result<f64> {
    let surface = SurfaceMesh::new(wave.wavelength(), elements, order, true)?;
    let eta = surface.field_from_fn(|x| wave.eta(x, 0.0))?;
    let phi = surface.field_from_fn(|x| wave.phi_eta(x, 0.0))?;
    let elem = ReferenceElement::new(order)?;
    let mut mesh = VolumeMesh::extrude(surface, layers, VerticalSpacing::Uniform, |_| depth)?;
    let sol = solve_potential(&mut mesh, &elem, &eta, &phi)?;
    let w_surf = mesh.extract_surface(&sol.w);
    let mut err = 0.0f64;
    for (i, &x) in mesh.surface().coords().iter().enumerate() {
        err = err.max((w_surf[i] - wave.w_eta(x, 0.0)).abs());
    }
    Ok(err)
}

pub struct ManufacturedErrors {
    pub phi: f64,
    pub w: f64,
    pub volume_dofs: usize,
}

/// Errors of the potential solve against the harmonic field
/// `cos(kx) cosh(k(z+h)) / cosh(kh)` on the rest geometry: the potential
/// everywhere and its recovered vertical derivative everywhere.
pub fn manufactured_potential_errors(
    elements: usize,
    order: usize,
    layers: usize,
) -> Result<ManufacturedErrors> {
    let length = 1.0;
    let depth = 0.5;
    let k = 2.0 * std::f64::consts::PI;
    let surface = SurfaceMesh::new(length, elements, order, true)?;
    let eta = vec![0.0; surface.n_dofs()];
    let phi_bc: Vec<f64> = surface.coords().iter().map(|&x| (k * x).cos()).collect();
    let elem = ReferenceElement::new(order)?;
    let mut mesh = VolumeMesh::extrude(surface, layers, VerticalSpacing::Uniform, |_| depth)?;
    let sol = solve_potential(&mut mesh, &elem, &eta, &phi_bc)?;

    let cosh_kh = (k * depth).cosh();
    let n_cols = mesh.n_cols();
    let mut err_phi = 0.0f64;
    let mut err_w = 0.0f64;
    for level in 0..mesh.n_levels() {
        for c in 0..n_cols {
            let dof = mesh.dof(c, level);
            let x = mesh.surface().coords()[c];
            let z = mesh.z()[dof];
            let phi_exact = (k * x).cos() * (k * (z + depth)).cosh() / cosh_kh;
            let w_exact = k * (k * x).cos() * (k * (z + depth)).sinh() / cosh_kh;
            err_phi = err_phi.max((sol.phi[dof] - phi_exact).abs());
            err_w = err_w.max((sol.w[dof] - w_exact).abs());
        }
    }
    Ok(ManufacturedErrors {
        phi: err_phi,
        w: err_w,
        volume_dofs: mesh.n_dofs(),
    })
}

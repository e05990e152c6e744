//! Acceptance gate: nine checks covering convergence, wave fidelity, the
//! submerged-bar harmonics, absorption quality, solver contracts, scaling
//! behavior, and determinism. Each test prints a `criterion N: PASS` line;
//! run with `--nocapture` to see the numbers behind them.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use semwave::analysis::{fit_rate_loglog, harmonic_fit, reflection_estimate, window_indices};
use semwave::assembly::{DirichletLayout, VolumeAssembler};
use semwave::basis::ReferenceElement;
use semwave::config::FileConfig;
use semwave::dynamics::{
    build_wave, manufactured_potential_errors, wave_velocity_error, Simulation,
};
use semwave::mesh::{SurfaceMesh, VerticalSpacing, VolumeMesh};
use semwave::output::write_timing_csv;
use semwave::solver::{
    cg_solve, JacobiPreconditioner, SolverParams, LAPLACE_ATOL, LAPLACE_RTOL, MASS_RTOL,
};
use semwave::wavetheory::{max_steepness, StreamFunctionWave, WaveTargets};
use semwave::Routine;

// Pinned thresholds. Observed orders may exceed the nominal rate (nodal
// superconvergence on near-linear waves); falling short is the failure.
const RATE_DEFECT: f64 = 0.4;
const P_SWEEP_MIN_REDUCTION: f64 = 1e3;
const CREST_DRIFT_LIMIT: f64 = 0.01;
const PHASE_DRIFT_LIMIT: f64 = 0.02;
const BOUND_FACTOR: f64 = 1.5;
const UPSTREAM_A2_LIMIT: f64 = 0.35;
const CREST_A2_FACTOR: f64 = 0.5;
const NONNEGLIGIBLE: f64 = 0.1;
const ABSORPTION_DECAY: f64 = 0.8;
const REFLECTION_LIMIT: f64 = 0.03;
const STRONG_SPEEDUP_MIN: f64 = 2.0;
const WEAK_EFFICIENCY_MIN: f64 = 0.6;
const SCALING_MIN_DOFS: usize = 200_000;

const GRAVITY: f64 = 9.82;
/// depth for kh = 1 with a 1 m wavelength
const DEPTH_KH1: f64 = 0.159154943091895;

fn periodic_wave(kh: f64, steepness_ratio: f64) -> StreamFunctionWave {
    let k = 2.0 * std::f64::consts::PI;
    let depth = kh / k;
    let height = steepness_ratio * max_steepness(kh);
    StreamFunctionWave::from_wavenumber(k, height, depth, GRAVITY).expect("wave build")
}

#[test]
fn criterion_1_h_convergence() {
    // (order, base elements, base layers); four meshes doubling both
    let ladders = [(1usize, 16usize, 8usize), (2, 8, 4), (3, 4, 2), (4, 4, 2)];
    let mut detail = String::new();
    for ratio in [0.1, 0.5] {
        let wave = periodic_wave(1.0, ratio);
        for &(p, e0, l0) in &ladders {
            let mut h = Vec::new();
            let mut err = Vec::new();
            for k in 0..4 {
                let elements = e0 << k;
                let layers = l0 << k;
                let e = wave_velocity_error(&wave, DEPTH_KH1, elements, p, layers)
                    .expect("potential solve");
                h.push(1.0 / elements as f64);
                err.push(e);
            }
            let rate = fit_rate_loglog(&h, &err);
            assert!(
                rate >= p as f64 - RATE_DEFECT,
                "criterion 1: FAIL, w order {rate:.2} below {} at p = {p}, eps ratio {ratio}",
                p as f64 - RATE_DEFECT
            );
            let note = if rate > p as f64 + RATE_DEFECT { " (exceeds nominal)" } else { "" };
            write!(detail, " [p={p} {:.0}%: {rate:.2}{note}]", 100.0 * ratio).unwrap();
        }
    }

    // resolution-hungry near-breaking deep-water case runs as a smoke test
    let smoke = periodic_wave(6.0, 0.9);
    let e = wave_velocity_error(&smoke, 6.0 / (2.0 * std::f64::consts::PI), 32, 4, 16)
        .expect("smoke solve");
    assert!(e.is_finite() && e < smoke.height(), "criterion 1: FAIL, smoke error {e:.3e}");

    println!("criterion 1: PASS, observed w orders{detail}; kh=6 90% smoke error {e:.2e}");
}

#[test]
fn criterion_2_p_convergence() {
    let wave = periodic_wave(1.0, 0.1);
    let mut errors = Vec::new();
    for p in 2..=6 {
        let e = wave_velocity_error(&wave, DEPTH_KH1, 8, p, 4).expect("potential solve");
        errors.push(e);
    }
    for pair in errors.windows(2) {
        assert!(
            pair[1] < pair[0],
            "criterion 2: FAIL, error grew under p-refinement: {errors:?}"
        );
    }
    let reduction = errors[0] / errors[errors.len() - 1];
    assert!(
        reduction >= P_SWEEP_MIN_REDUCTION,
        "criterion 2: FAIL, reduction {reduction:.1} below {P_SWEEP_MIN_REDUCTION:.0}"
    );
    println!(
        "criterion 2: PASS, errors fall monotonically from {:.2e} (p=2) to {:.2e} (p=6), {reduction:.0}x",
        errors[0],
        errors[errors.len() - 1]
    );
}

#[test]
fn criterion_3_manufactured_laplace() {
    let mut detail = String::new();
    for p in 1..=3 {
        let mut h = Vec::new();
        let mut phi = Vec::new();
        let mut w = Vec::new();
        for k in 0..4 {
            let elements = 4 << k;
            let layers = 2 << k;
            let e = manufactured_potential_errors(elements, p, layers).expect("solve");
            h.push(1.0 / elements as f64);
            phi.push(e.phi);
            w.push(e.w);
        }
        let phi_rate = fit_rate_loglog(&h, &phi);
        let w_rate = fit_rate_loglog(&h, &w);
        assert!(
            phi_rate >= (p + 1) as f64 - RATE_DEFECT,
            "criterion 3: FAIL, phi order {phi_rate:.2} below {} at p = {p}",
            (p + 1) as f64 - RATE_DEFECT
        );
        assert!(
            w_rate >= p as f64 - RATE_DEFECT,
            "criterion 3: FAIL, w order {w_rate:.2} below {} at p = {p}",
            p as f64 - RATE_DEFECT
        );
        write!(detail, " [p={p}: phi {phi_rate:.2}, w {w_rate:.2}]").unwrap();
    }
    println!("criterion 3: PASS, observed orders{detail} (w one lower than phi)");
}

fn traveling_wave_config(periods: f64) -> String {
    format!(
        r#"
[domain]
length = 1.0
depth = {DEPTH_KH1}
periodic = true

[discretization]
elements = 16
order = 5
layers = 4

[wave]
mode = "fnpf"
wavelength = 1.0
steepness_ratio = 0.5

[time]
periods = {periods}
"#
    )
}

#[test]
fn criterion_4_traveling_wave_fidelity() {
    let case = FileConfig::from_toml_str(&traveling_wave_config(10.0))
        .unwrap()
        .single_case()
        .unwrap();
    let wave = build_wave(&case).unwrap();
    let crest0 = wave.eta(0.0, 0.0);

    let report = Simulation::new(&case).unwrap().run().expect("10-period run");
    let surface = SurfaceMesh::new(case.length, case.elements, case.order, true).unwrap();
    let elem = ReferenceElement::new(case.order).unwrap();
    let mut crest = f64::NEG_INFINITY;
    let mut crest_x = 0.0;
    for i in 0..4000 {
        let x = case.length * i as f64 / 4000.0;
        let v = surface.eval_field(&elem, &report.eta, x);
        if v > crest {
            crest = v;
            crest_x = x;
        }
    }
    let mut phase = crest_x % case.length;
    if phase > 0.5 * case.length {
        phase -= case.length;
    }
    let crest_drift = (crest - crest0).abs() / crest0;
    let phase_drift = phase.abs() / wave.wavelength();
    assert!(
        crest_drift < CREST_DRIFT_LIMIT,
        "criterion 4: FAIL, crest drift {:.2}% over 10 periods",
        100.0 * crest_drift
    );
    assert!(
        phase_drift < PHASE_DRIFT_LIMIT,
        "criterion 4: FAIL, phase drift {:.2}% of a wavelength",
        100.0 * phase_drift
    );

    // stability horizon: stays bounded for 25 periods with default filtering
    let case = FileConfig::from_toml_str(&traveling_wave_config(25.0))
        .unwrap()
        .single_case()
        .unwrap();
    let report = Simulation::new(&case).unwrap().run().expect("25-period run");
    let bound = BOUND_FACTOR * crest0;
    let worst = report
        .extrema
        .iter()
        .fold(0.0_f64, |m, &(_, lo, hi)| m.max(hi).max(lo.abs()));
    assert!(
        worst < bound,
        "criterion 4: FAIL, |eta| reached {worst:.4} against bound {bound:.4}"
    );
    println!(
        "criterion 4: PASS, crest drift {:.3}%, phase drift {:.3}% at 10 periods; max|eta| {:.4} < {:.4} over 25",
        100.0 * crest_drift,
        100.0 * phase_drift,
        worst,
        bound
    );
}

const BAR_CONFIG: &str = r#"
[domain]
length = 38.0
bathymetry = [
    [0.0,  0.4],
    [14.0, 0.4],
    [20.0, 0.1],
    [22.0, 0.1],
    [25.0, 0.4],
    [38.0, 0.4],
]

[discretization]
elements = 190
order = 4
layers = 4

[wave]
mode = "fnpf"
period = 2.018
height = 0.02

[zones]
generation = [0.0, 8.0]
absorption = [30.0, 38.0]
ramp_periods = 4.0

[time]
periods = 25.0

[probes]
x = [10.0, 12.0, 16.0, 19.0, 20.5, 22.0, 23.5, 25.0, 27.0, 29.0, 33.0, 36.0]
"#;

#[test]
fn criterion_5_submerged_bar_harmonics() {
    let case = FileConfig::from_toml_str(BAR_CONFIG).unwrap().single_case().unwrap();
    let sim = Simulation::new(&case).unwrap();
    let period = sim.wave().period();
    let kh = {
        // generation-side relative depth must match the published setup
        let k = 2.0 * std::f64::consts::PI / sim.wave().wavelength();
        k * 0.4
    };
    assert!((kh - 0.6725).abs() < 5e-3, "criterion 5: FAIL, kh {kh:.4}");
    let report = sim.run().expect("bar run");

    // per-probe amplitudes of the first four harmonics over the last ten
    // periods
    let omega = 2.0 * std::f64::consts::PI / period;
    let mut amps: Vec<(f64, [f64; 4])> = Vec::new();
    for probe in &report.probes {
        let window = window_indices(&probe.t, 15.0 * period, 25.0 * period);
        let fit = harmonic_fit(&probe.t[window.clone()], &probe.eta[window.clone()], omega, 4)
            .expect("harmonic fit");
        amps.push((probe.x, [fit.amplitudes[0], fit.amplitudes[1], fit.amplitudes[2], fit.amplitudes[3]]));
    }
    let at = |x: f64| -> [f64; 4] {
        amps.iter().find(|(px, _)| (px - x).abs() < 1e-9).expect("probe").1
    };

    // (a) upstream of the bar the fundamental dominates
    for x in [10.0, 12.0] {
        let a = at(x);
        let ratio = a[1] / a[0];
        assert!(
            ratio < UPSTREAM_A2_LIMIT,
            "criterion 5: FAIL, A2/A1 = {ratio:.3} at x = {x} m"
        );
    }

    // (b) over and past the crest the energy moves into harmonics
    let crest_region = [20.5, 22.0, 23.5, 25.0, 27.0];
    let best = |n: usize| -> f64 {
        crest_region
            .iter()
            .map(|&x| {
                let a = at(x);
                a[n] / a[0]
            })
            .fold(f64::MIN, f64::max)
    };
    let (r2, r3, r4) = (best(1), best(2), best(3));
    assert!(
        r2 >= CREST_A2_FACTOR,
        "criterion 5: FAIL, best A2/A1 over the crest region is {r2:.3}"
    );
    assert!(
        r3 > NONNEGLIGIBLE && r4 > NONNEGLIGIBLE,
        "criterion 5: FAIL, A3/A1 {r3:.3}, A4/A1 {r4:.3} over the crest region"
    );

    // (c) the absorption zone dissipates every harmonic. The zone's
    // blending is deliberately soft near its inner edge, so the decay is
    // judged deep inside the zone; the mid-zone gauge just documents the
    // profile.
    let mut worst_decay = f64::INFINITY;
    for n in 0..4 {
        let interior_max = amps
            .iter()
            .filter(|(x, _)| *x < 30.0)
            .map(|(_, a)| a[n])
            .fold(f64::MIN, f64::max);
        let a = at(36.0)[n];
        let decay = 1.0 - a / interior_max;
        worst_decay = worst_decay.min(decay);
        assert!(
            decay >= ABSORPTION_DECAY,
            "criterion 5: FAIL, A{} only decayed {:.0}% at x = 36 m (from {interior_max:.2e} to {a:.2e})",
            n + 1,
            100.0 * decay
        );
    }
    let mid_zone_a1 = at(33.0)[0]
        / amps.iter().filter(|(x, _)| *x < 30.0).map(|(_, a)| a[0]).fold(f64::MIN, f64::max);
    println!(
        "criterion 5: PASS, upstream A2/A1 {:.2}; crest-region A2/A1 {r2:.2}, A3/A1 {r3:.2}, A4/A1 {r4:.2}; \
         beach decay >= {:.2}% (A1 at mid-zone already down to {:.0}%)",
        at(10.0)[1] / at(10.0)[0],
        100.0 * worst_decay,
        100.0 * mid_zone_a1
    );
}

const TANK_CONFIG: &str = r#"
[domain]
length = 6.0
depth = 0.159154943091895

[discretization]
elements = 48
order = 4
layers = 4

[wave]
mode = "lpf"
wavelength = 1.0
height = 0.01

[zones]
generation = [0.0, 2.0]
absorption = [4.0, 6.0]
ramp_periods = 3.0

[time]
periods = 15.0

[probes]
x = [2.5, 2.75]
"#;

#[test]
fn criterion_6_absorption_reflection() {
    let case = FileConfig::from_toml_str(TANK_CONFIG).unwrap().single_case().unwrap();
    let sim = Simulation::new(&case).unwrap();
    let period = sim.wave().period();
    let lambda = sim.wave().wavelength();
    let report = sim.run().expect("tank run");

    let window = window_indices(&report.probes[0].t, 8.0 * period, 15.0 * period);
    let r = reflection_estimate(
        &report.probes[0].t[window.clone()],
        &report.probes[0].eta[window.clone()],
        &report.probes[1].eta[window.clone()],
        2.0 * std::f64::consts::PI / period,
        2.0 * std::f64::consts::PI / lambda,
        0.25 * lambda,
    )
    .expect("two-gauge estimate");
    assert!(
        r < REFLECTION_LIMIT,
        "criterion 6: FAIL, reflection {:.2}% from a two-wavelength absorber",
        100.0 * r
    );
    println!(
        "criterion 6: PASS, reflection {:.2}% from a two-wavelength absorber",
        100.0 * r
    );
}

#[test]
fn criterion_7_solver_contract() {
    let laplace = SolverParams::laplace();
    let mass = SolverParams::mass();
    assert_eq!(
        (laplace.rtol, laplace.atol),
        (1e-6, 1e-15),
        "criterion 7: FAIL, potential-solve tolerances moved"
    );
    assert_eq!(mass.rtol, 1e-5, "criterion 7: FAIL, mass-solve tolerance moved");
    assert_eq!((LAPLACE_RTOL, LAPLACE_ATOL, MASS_RTOL), (1e-6, 1e-15, 1e-5));

    // a representative nonlinear run: every solve converged (the driver
    // fails hard otherwise) and the confirmed residuals respect the
    // tolerances
    let text = traveling_wave_config(1.0).replace("elements = 16", "elements = 8");
    let case = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap();
    let report = Simulation::new(&case).unwrap().run().expect("run");
    assert!(report.laplace.solves > 0 && report.surface_mass.solves > 0);
    assert!(
        report.laplace.max_rel_residual <= LAPLACE_RTOL,
        "criterion 7: FAIL, potential-solve residual {:.2e}",
        report.laplace.max_rel_residual
    );
    assert!(
        report.volume_mass.max_rel_residual <= MASS_RTOL
            && report.surface_mass.max_rel_residual <= MASS_RTOL,
        "criterion 7: FAIL, mass residuals {:.2e} / {:.2e}",
        report.volume_mass.max_rel_residual,
        report.surface_mass.max_rel_residual
    );
    println!(
        "criterion 7: PASS, {} potential solves within 1e-6, {} mass solves within 1e-5",
        report.laplace.solves,
        report.volume_mass.solves + report.surface_mass.solves
    );
}

/// Assemble the reference scaling problem and time one refresh + solve
/// inside a pool of `threads` workers.
fn timed_scaling_solve(elements: usize, threads: usize) -> (usize, f64) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let order = 4;
        let elem = ReferenceElement::new(order).unwrap();
        let surface = SurfaceMesh::new(elements as f64 * 0.2, elements, order, false).unwrap();
        let mesh = VolumeMesh::extrude(surface, 25, VerticalSpacing::Uniform, |_| 1.0).unwrap();
        let assembler = VolumeAssembler::new(&mesh, &elem);
        let mut a = assembler.assemble_laplace(&mesh).unwrap();
        let surface_dofs: Vec<usize> = mesh.surface_map().to_vec();
        let layout = DirichletLayout::new(&a, &surface_dofs);
        let bc: Vec<f64> =
            mesh.surface().coords().iter().map(|&x| (0.5 * x).cos()).collect();
        let (mut a_red, mut rhs) = layout.reduce(&a, &bc);
        let mut x = vec![0.0; layout.n_free()];

        let started = Instant::now();
        assembler.assemble_laplace_into(&mesh, &mut a).unwrap();
        layout.reduce_into(&a, &bc, &mut a_red, &mut rhs);
        let pc = JacobiPreconditioner::new(&a_red).unwrap();
        let report = cg_solve(
            &a_red,
            &rhs,
            &mut x,
            &pc,
            SolverParams::laplace(),
            Routine::LaplaceSolve,
        )
        .unwrap();
        assert!(report.converged);
        (mesh.n_dofs(), started.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_8_scaling_metrics() {
    // the timing breakdown itself has no hardware gate: the potential
    // solve must dominate a single-thread nonlinear run
    let text = traveling_wave_config(2.0);
    let case = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap();
    let report = Simulation::new(&case).unwrap().run().expect("run");
    let seconds = |r: Routine| -> f64 {
        report.timings.iter().find(|(t, _, _)| *t == r).unwrap().2
    };
    let dir = std::env::temp_dir().join("semwave_acceptance_scaling");
    std::fs::create_dir_all(&dir).unwrap();
    write_timing_csv(&dir.join("timing.csv"), &report.timings).unwrap();
    let dominant = seconds(Routine::LaplaceSolve);
    assert!(
        dominant > seconds(Routine::EvaluateRhs) && dominant > seconds(Routine::LaplaceUpdate),
        "criterion 8: FAIL, potential solve is not the dominant routine"
    );

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    if threads < 4 {
        println!(
            "criterion 8: SKIP, thread-scaling thresholds need 4 hardware threads, found {threads}; \
             single-thread breakdown has the potential solve dominant ({:.1}% of attributed time)",
            100.0 * dominant / (dominant + seconds(Routine::EvaluateRhs) + seconds(Routine::LaplaceUpdate))
        );
        return;
    }

    // strong scaling on a fixed problem of at least 200k DoFs
    let (dofs, t1) = timed_scaling_solve(500, 1);
    assert!(dofs >= SCALING_MIN_DOFS, "criterion 8: FAIL, problem too small ({dofs} DoFs)");
    let (_, t4) = timed_scaling_solve(500, 4);
    let speedup = t1 / t4;
    assert!(
        speedup >= STRONG_SPEEDUP_MIN,
        "criterion 8: FAIL, strong-scaling speedup {speedup:.2} at 4 threads"
    );

    // weak scaling: work per thread held constant
    let (_, tw1) = timed_scaling_solve(125, 1);
    let (_, tw4) = timed_scaling_solve(500, 4);
    let efficiency = tw1 / tw4;
    assert!(
        efficiency >= WEAK_EFFICIENCY_MIN,
        "criterion 8: FAIL, weak-scaling efficiency {efficiency:.2} at 4 threads"
    );
    println!(
        "criterion 8: PASS, {dofs} DoFs: {speedup:.2}x strong speedup, {efficiency:.2} weak efficiency at 4 threads; potential solve dominant"
    );
}

fn run_cli_case(config: &Path, out: &Path) {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_semwave"))
        .args(["run", "--quiet", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .expect("launch solver binary");
    assert!(status.success(), "criterion 9: FAIL, solver run failed");
}

#[test]
fn criterion_9_determinism() {
    // identical probe records across two separate processes
    let base = std::env::temp_dir().join("semwave_acceptance_determinism");
    std::fs::create_dir_all(&base).unwrap();
    let config = base.join("case.toml");
    let text = TANK_CONFIG.replace("periods = 15.0", "periods = 4.0");
    std::fs::write(&config, text).unwrap();
    let (out_a, out_b) = (base.join("a"), base.join("b"));
    run_cli_case(&config, &out_a);
    run_cli_case(&config, &out_b);
    let mut compared = 0;
    for name in ["probe_000.csv", "probe_001.csv"] {
        let a = std::fs::read(out_a.join(name)).expect("first run output");
        let b = std::fs::read(out_b.join(name)).expect("second run output");
        assert!(!a.is_empty());
        assert_eq!(a, b, "criterion 9: FAIL, {name} differs between reruns");
        compared += 1;
    }

    // operator values independent of the worker count
    let assemble = |threads: usize| -> Vec<f64> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let elem = ReferenceElement::new(4).unwrap();
            let surface = SurfaceMesh::new(20.0, 100, 4, false).unwrap();
            let mesh =
                VolumeMesh::extrude(surface, 10, VerticalSpacing::Uniform, |_| 1.0).unwrap();
            let assembler = VolumeAssembler::new(&mesh, &elem);
            assembler.assemble_laplace(&mesh).unwrap().vals().to_vec()
        })
    };
    let reference = assemble(1);
    for threads in [2, 4] {
        let vals = assemble(threads);
        assert!(
            reference.len() == vals.len()
                && reference.iter().zip(&vals).all(|(a, b)| a.to_bits() == b.to_bits()),
            "criterion 9: FAIL, operator differs with {threads} workers"
        );
    }
    println!(
        "criterion 9: PASS, {compared} probe files bitwise identical across reruns; operator bitwise stable across 1/2/4 workers"
    );
}

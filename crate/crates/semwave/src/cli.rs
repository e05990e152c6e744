//! Command-line front end: `run` drives a configured simulation to its
//! output directory, `convergence` sweeps discretization lists, `scaling`
//! times the potential solve over worker counts, `analyze` summarizes
//! probe records.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis;
use crate::assembly::{DirichletLayout, VolumeAssembler};
use crate::basis::ReferenceElement;
use crate::config::{CaseConfig, FileConfig};
use crate::dynamics::{self, Simulation};
use crate::error::{Error, Result, Routine};
use crate::mesh::{SurfaceMesh, VerticalSpacing, VolumeMesh};
use crate::output::{self, Manifest, ManifestFiles, ManifestRun, ManifestSolves, ManifestWave};
use crate::solver::{self, JacobiPreconditioner, SolverParams};

#[derive(Parser)]
#[command(
    name = "semwave",
    version,
    about = "Spectral element time stepping for free-surface potential flow"
)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress output
    #[arg(long, global = true)]
    quiet: bool,
    /// Recorded in the run manifest; nothing in a run is randomized
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step the configured problem and write probes, snapshots and a
    /// manifest
    Run(RunArgs),
    /// Solve the t = 0 potential problem over the configured
    /// elements/order lists and report errors and observed orders
    Convergence(ConvergenceArgs),
    /// Time one potential solve over a list of worker counts
    Scaling(ScalingArgs),
    /// Summarize probe CSV files: statistics, harmonics, reflection
    Analyze(AnalyzeArgs),
    /// Write the configured wave's surface profile over one wavelength as
    /// CSV, for cross-tool comparison
    Wave(WaveArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output].dir)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write convergence.csv here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check against the built-in harmonic solution instead of the
    /// configured wave
    #[arg(long)]
    manufactured: bool,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write scaling.csv here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated worker counts
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    counts: Vec<usize>,
    /// Grow the horizontal mesh with the worker count (weak scaling)
    #[arg(long)]
    weak: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Probe CSV files, as written by `run`
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Fundamental period for harmonic fitting
    #[arg(long)]
    period: Option<f64>,
    /// Number of harmonics to fit
    #[arg(long, default_value_t = 3)]
    harmonics: usize,
    /// Time window `t0:t1` (default: everything)
    #[arg(long)]
    window: Option<String>,
    /// Wavelength for the two-gauge reflection estimate
    #[arg(long)]
    wavelength: Option<f64>,
    /// Gauge spacing x2 - x1 for the reflection estimate
    #[arg(long)]
    spacing: Option<f64>,
    /// Write harmonics.csv here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WaveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path
    #[arg(long, default_value = "wave_profile.csv")]
    out: PathBuf,
    /// Sample count over one wavelength
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Evaluation time
    #[arg(long, default_value_t = 0.0)]
    time: f64,
}

pub fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("threads", "need at least one worker"));
        }
        // Ignore the error when a pool already exists (repeated calls in
        // one process); the recorded count below reflects reality.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Run(args) => cmd_run(args, cli.quiet, cli.seed),
        Command::Convergence(args) => cmd_convergence(args, cli.quiet),
        Command::Scaling(args) => cmd_scaling(args, cli.quiet),
        Command::Analyze(args) => cmd_analyze(args, cli.quiet),
        Command::Wave(args) => cmd_wave(args, cli.quiet),
    }
}

fn load_config(path: &Path) -> Result<(FileConfig, String)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok((FileConfig::from_toml_str(&text)?, text))
}

fn cmd_run(args: RunArgs, quiet: bool, seed: Option<u64>) -> Result<()> {
    let (fc, config_text) = load_config(&args.config)?;
    let case = fc.single_case()?;
    let out_dir = args
        .out
        .unwrap_or_else(|| PathBuf::from(&case.out_dir));

    let mut sim = Simulation::new(&case)?;
    if case.snapshot_every > 0 {
        sim.set_snapshot_dir(&out_dir, case.snapshot_every);
    }
    if !quiet {
        println!(
            "wave: T = {:.6} s, L = {:.6} m, c = {:.6} m/s, H = {:.6} m",
            sim.wave().period(),
            sim.wave().wavelength(),
            sim.wave().celerity(),
            sim.wave().height()
        );
        println!(
            "mesh: {} volume DoFs; dt = {:.6e} s, {} steps",
            sim.volume_dofs(),
            sim.dt(),
            sim.n_steps()
        );
    }
    let report = sim.run()?;

    let mut probe_files = Vec::new();
    for (i, probe) in report.probes.iter().enumerate() {
        let name = format!("probe_{i:03}.csv");
        output::write_probe_csv(&out_dir.join(&name), probe)?;
        probe_files.push(name);
    }
    output::write_timing_csv(&out_dir.join("timing.csv"), &report.timings)?;
    let manifest = Manifest {
        run: ManifestRun {
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            elapsed_seconds: report.elapsed_seconds,
            threads: rayon::current_num_threads(),
            seed,
            steps: report.n_steps,
            dt: report.dt,
            t_end: report.t_end,
            surface_dofs: report.surface_dofs,
            volume_dofs: report.volume_dofs,
        },
        wave: ManifestWave {
            period: report.wave_period,
            wavelength: report.wave_length,
            celerity: report.wave_celerity,
            height: report.wave_height,
        },
        solves: ManifestSolves {
            laplace_solves: report.laplace.solves,
            laplace_total_iterations: report.laplace.total_iterations,
            laplace_max_iterations: report.laplace.max_iterations,
            mass_solves: report.volume_mass.solves + report.surface_mass.solves,
            mass_total_iterations: report.volume_mass.total_iterations
                + report.surface_mass.total_iterations,
            mass_max_iterations: report
                .volume_mass
                .max_iterations
                .max(report.surface_mass.max_iterations),
        },
        files: ManifestFiles {
            probes: probe_files,
            snapshots: report.snapshot_files.clone(),
            timing: Some("timing.csv".into()),
        },
        config_text,
    };
    output::write_manifest(&out_dir.join("manifest.toml"), &manifest)?;

    if !quiet {
        println!(
            "laplace: {} solves, mean {:.1} iterations, max {}",
            report.laplace.solves,
            report.laplace.mean_iterations(),
            report.laplace.max_iterations
        );
        for (routine, calls, seconds) in &report.timings {
            println!("{}: {} calls, {:.3} s", routine.name(), calls, seconds);
        }
        println!(
            "wrote {} probe file(s), {} snapshot(s) to {}",
            report.probes.len(),
            report.snapshot_files.len(),
            out_dir.display()
        );
    }
    Ok(())
}

fn cmd_convergence(args: ConvergenceArgs, quiet: bool) -> Result<()> {
    let (fc, _) = load_config(&args.config)?;
    let cases = fc.sweep_cases()?;
    if cases.is_empty() {
        return Err(Error::Config("nothing to sweep".into()));
    }

    let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new(); // order, elements, err_a, err_b
    for case in &cases {
        let (ea, eb) = if args.manufactured {
            let m = dynamics::manufactured_potential_errors(case.elements, case.order, case.layers)?;
            (m.phi, m.w)
        } else {
            let wave = dynamics::build_wave(case)?;
            let depth = case.depth.depth_at(0.0);
            let err = dynamics::wave_velocity_error(
                wave.as_ref(),
                depth,
                case.elements,
                case.order,
                case.layers,
            )?;
            (err, f64::NAN)
        };
        rows.push((case.order, case.elements, ea, eb));
    }

    let header = if args.manufactured {
        "order,elements,phi_error,w_error,phi_rate,w_rate"
    } else {
        "order,elements,w_error,rate"
    };
    if !quiet {
        println!("{header}");
    }
    let mut csv = String::from(header);
    csv.push('\n');
    for i in 0..rows.len() {
        let (order, elements, ea, eb) = rows[i];
        // observed order against the previous row of the same basis order
        let rate = |col: fn(&(usize, usize, f64, f64)) -> f64| -> Option<f64> {
            if i == 0 || rows[i - 1].0 != order {
                return None;
            }
            let h0 = 1.0 / rows[i - 1].1 as f64;
            let h1 = 1.0 / elements as f64;
            Some((col(&rows[i - 1]) / col(&rows[i])).ln() / (h0 / h1).ln())
        };
        let line = if args.manufactured {
            let ra = rate(|r| r.2).map_or(String::new(), |r| format!("{r:.2}"));
            let rb = rate(|r| r.3).map_or(String::new(), |r| format!("{r:.2}"));
            format!("{order},{elements},{ea:e},{eb:e},{ra},{rb}")
        } else {
            let ra = rate(|r| r.2).map_or(String::new(), |r| format!("{r:.2}"));
            format!("{order},{elements},{ea:e},{ra}")
        };
        if !quiet {
            println!("{line}");
        }
        csv.push_str(&line);
        csv.push('\n');
    }

    if let Some(dir) = args.out {
        let path = dir.join("convergence.csv");
        let mut w = output::create_file(&path)?;
        use std::io::Write as _;
        w.write_all(csv.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if !quiet {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Assemble the configured problem and time refreshing + solving the
/// potential system once, inside a dedicated pool of `threads` workers.
fn timed_potential_solve(case: &CaseConfig, threads: usize) -> Result<(usize, f64, usize)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| -> Result<(usize, f64, usize)> {
        let elem = ReferenceElement::new(case.order)?;
        let surface = SurfaceMesh::new(case.length, case.elements, case.order, case.periodic)?;
        let depth = case.depth.clone();
        let mesh = VolumeMesh::extrude(surface, case.layers, VerticalSpacing::Uniform, |x| {
            depth.depth_at(x)
        })?;
        let assembler = VolumeAssembler::new(&mesh, &elem);
        let mut a = assembler.assemble_laplace(&mesh)?;
        let surface_dofs: Vec<usize> = mesh.surface_map().to_vec();
        let layout = DirichletLayout::new(&a, &surface_dofs);
        let k = 2.0 * std::f64::consts::PI / case.length;
        let bc: Vec<f64> = mesh
            .surface()
            .coords()
            .iter()
            .map(|&x| (k * x).cos())
            .collect();
        let (mut a_red, mut rhs) = layout.reduce(&a, &bc);
        let mut x = vec![0.0; layout.n_free()];

        let started = Instant::now();
        assembler.assemble_laplace_into(&mesh, &mut a)?;
        layout.reduce_into(&a, &bc, &mut a_red, &mut rhs);
        let pc = JacobiPreconditioner::new(&a_red)?;
        let report = solver::cg_solve(
            &a_red,
            &rhs,
            &mut x,
            &pc,
            SolverParams {
                rtol: case.solver.laplace_rtol,
                atol: case.solver.laplace_atol,
                max_iter: case.solver.max_iter,
            },
            Routine::LaplaceSolve,
        )?;
        let seconds = started.elapsed().as_secs_f64();
        if !report.converged {
            return Err(Error::SolveFailure {
                routine: Routine::LaplaceSolve,
                iterations: report.iterations,
                rel_residual: report.rel_residual,
                rtol: case.solver.laplace_rtol,
            });
        }
        Ok((mesh.n_dofs(), seconds, report.iterations))
    })
}

fn cmd_scaling(args: ScalingArgs, quiet: bool) -> Result<()> {
    if args.counts.is_empty() || args.counts.contains(&0) {
        return Err(Error::invalid("counts", "worker counts must be positive"));
    }
    let (fc, _) = load_config(&args.config)?;
    let base = fc.single_case()?;

    let mut rows = Vec::new(); // (threads, dofs, seconds, iterations)
    for &count in &args.counts {
        let case = if args.weak {
            let mut c = base.clone();
            c.elements = base.elements * count;
            c
        } else {
            base.clone()
        };
        let (dofs, seconds, iterations) = timed_potential_solve(&case, count)?;
        rows.push((count, dofs, seconds, iterations));
    }

    let header = "threads,volume_dofs,seconds,iterations,efficiency";
    if !quiet {
        println!("{header}");
    }
    let mut csv = String::from(header);
    csv.push('\n');
    let (t0, d0, s0, _) = rows[0];
    for &(threads, dofs, seconds, iterations) in &rows {
        let eff = if args.weak {
            analysis::weak_scaling_efficiency(s0, seconds)
        } else {
            analysis::strong_scaling_efficiency(s0, t0, seconds, threads) * d0 as f64
                / dofs as f64
        };
        let line = format!("{threads},{dofs},{seconds:.6},{iterations},{eff:.3}");
        if !quiet {
            println!("{line}");
        }
        csv.push_str(&line);
        csv.push('\n');
    }

    if let Some(dir) = args.out {
        let path = dir.join("scaling.csv");
        let mut w = output::create_file(&path)?;
        use std::io::Write as _;
        w.write_all(csv.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if !quiet {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_wave(args: WaveArgs, quiet: bool) -> Result<()> {
    if args.samples < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }
    let (fc, _) = load_config(&args.config)?;
    let case = fc.single_case()?;
    let wave = dynamics::build_wave(&case)?;
    let lambda = wave.wavelength();
    let mut w = output::create_file(&args.out)?;
    use std::io::Write as _;
    let io_err = |e| Error::io(args.out.display().to_string(), e);
    writeln!(w, "x,eta,phi_eta,w_eta").map_err(io_err)?;
    for i in 0..args.samples {
        let x = lambda * i as f64 / args.samples as f64;
        writeln!(
            w,
            "{x:e},{:e},{:e},{:e}",
            wave.eta(x, args.time),
            wave.phi_eta(x, args.time),
            wave.w_eta(x, args.time)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    if !quiet {
        println!(
            "T = {:.6} s, L = {:.6} m, c = {:.6} m/s, H = {:.6} m; wrote {}",
            wave.period(),
            wave.wavelength(),
            wave.celerity(),
            wave.height(),
            args.out.display()
        );
    }
    Ok(())
}

fn parse_window(spec: &str) -> Result<(f64, f64)> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| Error::invalid("window", "expected t0:t1"))?;
    let t0: f64 = a
        .trim()
        .parse()
        .map_err(|_| Error::invalid("window", format!("bad number '{a}'")))?;
    let t1: f64 = b
        .trim()
        .parse()
        .map_err(|_| Error::invalid("window", format!("bad number '{b}'")))?;
    if !(t1 > t0) {
        return Err(Error::invalid("window", "t1 must exceed t0"));
    }
    Ok((t0, t1))
}

fn cmd_analyze(args: AnalyzeArgs, quiet: bool) -> Result<()> {
    let window = args.window.as_deref().map(parse_window).transpose()?;
    let mut first_two: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut harmonics_csv = String::from("file,harmonic,amplitude,phase\n");
    for path in &args.files {
        let series = output::read_probe_csv(path)?;
        let range = match window {
            Some((t0, t1)) => analysis::window_indices(&series.t, t0, t1),
            None => 0..series.t.len(),
        };
        if range.is_empty() {
            return Err(Error::invalid(
                "window",
                format!("{} has no samples in the window", path.display()),
            ));
        }
        let t = &series.t[range.clone()];
        let eta = &series.eta[range.clone()];
        let stats = analysis::probe_stats(eta);
        if !quiet {
            println!("{}:", path.display());
        }
        println!(
            "  samples {}  eta range [{:.6e}, {:.6e}]  crest-to-trough {:.6e}  mean {:.6e}",
            stats.samples, stats.eta_min, stats.eta_max, stats.range, stats.mean
        );
        if let Some(period) = args.period {
            let omega = 2.0 * std::f64::consts::PI / period;
            let fit = analysis::harmonic_fit(t, eta, omega, args.harmonics)?;
            let amps: Vec<String> = fit
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| format!("A{} = {:.6e}", i + 1, a))
                .collect();
            println!("  harmonics: {}  (mean {:.6e})", amps.join(", "), fit.mean);
            for n in 1..=args.harmonics {
                harmonics_csv.push_str(&format!(
                    "{},{n},{:e},{:e}\n",
                    path.display(),
                    fit.amplitudes[n - 1],
                    fit.phases[n - 1]
                ));
            }
        }
        if first_two.len() < 2 {
            first_two.push((t.to_vec(), eta.to_vec()));
        }
    }

    if let (Some(wavelength), Some(spacing)) = (args.wavelength, args.spacing) {
        let period = args.period.ok_or_else(|| {
            Error::invalid("period", "the reflection estimate needs --period")
        })?;
        if first_two.len() < 2 {
            return Err(Error::invalid(
                "files",
                "the reflection estimate needs two probe files",
            ));
        }
        let omega = 2.0 * std::f64::consts::PI / period;
        let k = 2.0 * std::f64::consts::PI / wavelength;
        let (t1, y1) = &first_two[0];
        let (_, y2) = &first_two[1];
        if y1.len() != y2.len() {
            return Err(Error::invalid(
                "files",
                "the two probe records cover different windows",
            ));
        }
        let r = analysis::reflection_estimate(t1, y1, y2, omega, k, spacing)?;
        println!("reflection coefficient: {r:.4}");
    }

    if let Some(dir) = args.out {
        if args.period.is_none() {
            return Err(Error::invalid("out", "the harmonic table needs --period"));
        }
        let path = dir.join("harmonics.csv");
        let mut w = output::create_file(&path)?;
        use std::io::Write as _;
        w.write_all(harmonics_csv.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if !quiet {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

//! Time assembly and the preconditioned solve of the potential system over
//! a list of worker counts, each inside its own thread pool. The assembled
//! operator is bitwise identical whatever the pool size.
//!
//!     cargo run --release --example thread_scaling -- [counts...]

use std::time::Instant;

use semwave::assembly::{DirichletLayout, VolumeAssembler};
use semwave::basis::ReferenceElement;
use semwave::mesh::{SurfaceMesh, VerticalSpacing, VolumeMesh};
use semwave::solver::{cg_solve, JacobiPreconditioner, SolverParams};
use semwave::Routine;

fn main() -> semwave::Result<()> {
    let counts: Vec<usize> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("counts must be integers"))
        .collect();
    let counts = if counts.is_empty() { vec![1, 2, 4] } else { counts };

    let order = 4;
    let elem = ReferenceElement::new(order)?;
    let build_mesh = || -> semwave::Result<VolumeMesh> {
        let surface = SurfaceMesh::new(40.0, 200, order, false)?;
        VolumeMesh::extrude(surface, 12, VerticalSpacing::Uniform, |_| 1.0)
    };
    let probe = build_mesh()?;
    println!(
        "{} volume DoFs, order {order}; hardware threads: {}",
        probe.n_dofs(),
        std::thread::available_parallelism().map_or(1, |n| n.get())
    );
    println!(
        "{:>7} {:>12} {:>12} {:>9} {:>8}",
        "workers", "assemble [s]", "solve [s]", "iters", "speedup"
    );

    let mut reference_vals: Option<Vec<f64>> = None;
    let mut base_time = 0.0;
    for &workers in &counts {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("pool");
        let (assemble_s, solve_s, iters, vals) = pool.install(|| -> semwave::Result<_> {
            let mesh = build_mesh()?;
            let assembler = VolumeAssembler::new(&mesh, &elem);
            // warm up allocations and the pattern before timing
            let mut a = assembler.assemble_laplace(&mesh)?;

            let t0 = Instant::now();
            assembler.assemble_laplace_into(&mesh, &mut a)?;
            let assemble_s = t0.elapsed().as_secs_f64();

            let surface_dofs: Vec<usize> = mesh.surface_map().to_vec();
            let layout = DirichletLayout::new(&a, &surface_dofs);
            let bc: Vec<f64> = mesh
                .surface()
                .coords()
                .iter()
                .map(|&x| (0.5 * x).cos())
                .collect();
            let (a_red, rhs) = layout.reduce(&a, &bc);
            let pc = JacobiPreconditioner::new(&a_red)?;
            let mut x = vec![0.0; layout.n_free()];
            let t0 = Instant::now();
            let report = cg_solve(
                &a_red,
                &rhs,
                &mut x,
                &pc,
                SolverParams::laplace(),
                Routine::LaplaceSolve,
            )?;
            let solve_s = t0.elapsed().as_secs_f64();
            assert!(report.converged);
            Ok((assemble_s, solve_s, report.iterations, a.vals().to_vec()))
        })?;

        match &reference_vals {
            None => {
                reference_vals = Some(vals);
                base_time = assemble_s + solve_s;
            }
            Some(reference) => {
                assert!(
                    reference.iter().zip(&vals).all(|(a, b)| a.to_bits() == b.to_bits()),
                    "operator must not depend on the pool size"
                );
            }
        }
        println!(
            "{workers:>7} {assemble_s:>12.4} {solve_s:>12.4} {iters:>9} {:>8.2}",
            base_time / (assemble_s + solve_s)
        );
    }
    println!("assembled operators bitwise identical across all pool sizes");
    Ok(())
}

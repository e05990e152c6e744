//! Convergence of the recovered surface vertical velocity for a nonlinear
//! wave at kh = 1: refine the mesh in both directions at fixed order
//! (observed rate approaches the basis order), then raise the order on a
//! fixed mesh (errors fall exponentially).
//!
//!     cargo run --release --example convergence_study

use semwave::dynamics::{build_wave, wave_velocity_error};
use semwave::config::FileConfig;

const CONFIG: &str = r#"
[domain]
length = 1.0
depth = 0.159154943091895
periodic = true

[discretization]
elements = 8
order = 4

[wave]
mode = "fnpf"
wavelength = 1.0
steepness_ratio = 0.5

[time]
periods = 1.0
"#;

fn main() -> semwave::Result<()> {
    let case = FileConfig::from_toml_str(CONFIG)?.single_case()?;
    let wave = build_wave(&case)?;
    let depth = case.depth.depth_at(0.0);
    println!(
        "stream function wave, kh = 1, H = {:.4} m (50% of limiting steepness)\n",
        wave.height()
    );

    println!("mesh refinement at fixed order 3:");
    println!("{:>9} {:>7} {:>12} {:>6}", "elements", "layers", "w error", "rate");
    let mut last: Option<f64> = None;
    for k in 0..4 {
        let elements = 8 << k;
        let layers = 4 << k;
        let err = wave_velocity_error(wave.as_ref(), depth, elements, 3, layers)?;
        let rate = last.map_or(String::new(), |p| format!("{:.2}", (p / err).log2()));
        println!("{elements:>9} {layers:>7} {err:>12.3e} {rate:>6}");
        last = Some(err);
    }

    println!("\norder refinement on the 8-element, 4-layer mesh:");
    println!("{:>6} {:>12} {:>10}", "order", "w error", "drop");
    let mut last: Option<f64> = None;
    for order in 2..=6 {
        let err = wave_velocity_error(wave.as_ref(), depth, 8, order, 4)?;
        let drop = last.map_or(String::new(), |p| format!("{:.1}x", p / err));
        println!("{order:>6} {err:>12.3e} {drop:>10}");
        last = Some(err);
    }
    Ok(())
}

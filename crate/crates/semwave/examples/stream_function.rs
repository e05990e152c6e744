//! Nonlinear regular waves from stream function theory: build one wave per
//! steepness and show how crest sharpening and celerity amplification grow
//! toward the breaking limit. The steepest profile goes to a CSV.
//!
//!     cargo run --release --example stream_function

use std::io::Write;

use semwave::wavetheory::{max_steepness, StreamFunctionWave, WaveTargets};

fn main() -> semwave::Result<()> {
    let depth = 0.5;
    let k = 2.0; // kh = 1
    let gravity = 9.82;
    let lambda = 2.0 * std::f64::consts::PI / k;
    let h_max = max_steepness(k * depth) * lambda;
    let linear_c = (gravity / k * (k * depth).tanh()).sqrt();

    println!("kh = 1, depth {depth} m, limiting height {h_max:.4} m");
    println!(
        "{:>9} {:>8} {:>10} {:>10} {:>12} {:>8}",
        "eps/eps_m", "H [m]", "T [s]", "c [m/s]", "crest/(H/2)", "modes"
    );
    let mut steepest = None;
    for ratio in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let height = ratio * h_max;
        let wave = StreamFunctionWave::from_wavenumber(k, height, depth, gravity)?;
        let crest = wave.eta(0.0, 0.0);
        println!(
            "{:>8.0}% {:>8.4} {:>10.5} {:>10.5} {:>12.4} {:>8}",
            100.0 * ratio,
            height,
            wave.period(),
            wave.celerity(),
            crest / (0.5 * height),
            wave.n_modes()
        );
        steepest = Some(wave);
    }
    println!("linear celerity at this depth: {linear_c:.5} m/s");

    let wave = steepest.unwrap();
    let path = "stream_function_profile.csv";
    let err = |e| semwave::Error::io(path, e);
    let mut f = std::fs::File::create(path).map_err(err)?;
    writeln!(f, "x,eta,phi_eta,w_eta").map_err(err)?;
    for i in 0..400 {
        let x = lambda * i as f64 / 400.0;
        writeln!(
            f,
            "{x:e},{:e},{:e},{:e}",
            wave.eta(x, 0.0),
            wave.phi_eta(x, 0.0),
            wave.w_eta(x, 0.0)
        )
        .map_err(err)?;
    }
    println!("wrote {path} (one wavelength of the 90% wave)");
    Ok(())
}

//! Accuracy of the potential solve against a known harmonic field:
//! cos(kx) cosh(k(z+h))/cosh(kh) satisfies the Laplace equation with the
//! surface trace as Dirichlet data. The potential converges one order
//! faster than its recovered vertical derivative.
//!
//!     cargo run --release --example manufactured_laplace

use semwave::dynamics::manufactured_potential_errors;

fn main() -> semwave::Result<()> {
    for order in 1..=3 {
        println!("order {order}:");
        println!(
            "{:>9} {:>7} {:>12} {:>6} {:>12} {:>6}",
            "elements", "layers", "phi error", "rate", "w error", "rate"
        );
        let mut last: Option<(f64, f64)> = None;
        for k in 0..4 {
            let elements = 4 << k;
            let layers = 2 << k;
            let e = manufactured_potential_errors(elements, order, layers)?;
            let (rp, rw) = last.map_or((String::new(), String::new()), |(p, w)| {
                (
                    format!("{:.2}", (p / e.phi).log2()),
                    format!("{:.2}", (w / e.w).log2()),
                )
            });
            println!(
                "{elements:>9} {layers:>7} {:>12.3e} {rp:>6} {:>12.3e} {rw:>6}",
                e.phi, e.w
            );
            last = Some((e.phi, e.w));
        }
        println!();
    }
    Ok(())
}

//! Inspect the reference element for a given order: GLL nodes and weights,
//! differentiation exactness, and the modal filter response. Writes the
//! node/weight table as CSV next to the printout.
//!
//!     cargo run --release --example gll_reference -- [order]

use std::io::Write;

use semwave::basis::{QuadratureRule, ReferenceElement};

fn main() -> semwave::Result<()> {
    let order: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("order must be a small integer"))
        .unwrap_or(5);
    let elem = ReferenceElement::new(order)?;
    let rule = elem.collocation_rule();

    println!("reference element, order {order} ({} nodes)", elem.n_nodes());
    println!("{:>3} {:>22} {:>22}", "i", "node", "weight");
    for (i, (x, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        println!("{i:>3} {x:>22.16} {w:>22.16}");
    }

    // GLL weights integrate degree 2p-1 exactly; x^(2p-1) is odd so the
    // sharper check is x^(2p-2)
    let d = 2 * order - 2;
    let exact = 2.0 / (d + 1) as f64;
    let got = rule.integrate(|x| x.powi(d as i32));
    println!("\nintegral of x^{d} over [-1,1]: {got:.16} (exact {exact:.16})");

    // differentiation matrix applied to x^p recovers p x^(p-1) at the nodes
    let deriv = elem.lagrange_derivs_at(&rule.points);
    let mut err = 0.0_f64;
    for i in 0..elem.n_nodes() {
        let mut dp = 0.0;
        for j in 0..elem.n_nodes() {
            dp += deriv[(i, j)] * rule.points[j].powi(order as i32);
        }
        let want = order as f64 * rule.points[i].powi(order as i32 - 1);
        err = err.max((dp - want).abs());
    }
    println!("derivative of x^{order} at the nodes: max error {err:.3e}");

    // the filter leaves low modes alone and damps the last one hard
    let filter = elem.filter_nodal();
    let mut unit = vec![0.0; elem.n_nodes()];
    unit[order / 2] = 1.0;
    let response: Vec<f64> = (0..elem.n_nodes())
        .map(|i| (0..elem.n_nodes()).map(|j| filter[(i, j)] * unit[j]).sum())
        .collect();
    let change: f64 = response
        .iter()
        .zip(&unit)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("filter applied to a mid-node impulse: max nodal change {change:.3e}");

    let volume = QuadratureRule::gauss(order);
    println!(
        "volume rule: {} Gauss points, exactness {}",
        volume.len(),
        volume.exactness()
    );

    let path = format!("gll_nodes_p{order}.csv");
    let mut f = std::fs::File::create(&path)
        .map_err(|e| semwave::Error::io(path.clone(), e))?;
    writeln!(f, "i,node,weight").map_err(|e| semwave::Error::io(path.clone(), e))?;
    for (i, (x, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        writeln!(f, "{i},{x:e},{w:e}").map_err(|e| semwave::Error::io(path.clone(), e))?;
    }
    println!("wrote {path}");
    Ok(())
}

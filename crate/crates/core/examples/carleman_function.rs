//! The Carleman function `k(s) = conj(K(s, .))` in `L2` and its continuity.

use carleman::config::{Pipeline, RunConfig};
use carleman::kernel::ApplyRoute;
use carleman::operator::basis_vector;

fn main() -> carleman::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/diagonal_mixed.toml".into());
    let cfg = RunConfig::load(path.as_ref())?;
    let p = Pipeline::build(&cfg)?;
    let rule = p.model.quadrature_rule(&cfg.quadrature);

    for s in [-2.0, -0.5, 0.0, 0.5, 2.0] {
        let k = p.model.carleman(s);
        let row = p.model.grid(0, 0, &[s], &rule.nodes)?;
        let by_quad: f64 = (0..rule.len()).map(|c| row.get(0, c).norm_sqr() * rule.weights[c]).sum();
        let step = (&p.model.carleman(s + 1e-3).coeffs - &k.coeffs).norm();
        println!(
            "s = {s:+.2}: ||k(s)|| = {:.6e}, quadrature {:.6e}, ||k(s+1e-3) - k(s)|| = {step:.3e}",
            k.norm,
            by_quad.sqrt()
        );
    }

    // T on a frame vector, by coefficients and by quadrature
    let f = basis_vector(p.model.frame_len(), 1);
    let a = p.model.apply_t(&f, ApplyRoute::Frame)?;
    let b = p.model.apply_t(&f, ApplyRoute::Quadrature(&rule))?;
    println!("||T u_1|| = {:.6e}, routes differ by {:.3e}", a.norm(), (&a - &b).norm());
    Ok(())
}

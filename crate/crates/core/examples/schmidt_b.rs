//! Schmidt system of `J = S* E` and the operator `B` with `B*B = (J*J)^(1/4)`.

use carleman::config::RunConfig;
use carleman::operator::AuxOperators;
use carleman::schmidt::{build_b, nuclearity_report, quarter_power_of_gram, schmidt_decompose};

fn main() -> carleman::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/random_dense.toml".into());
    let spec = RunConfig::load(path.as_ref())?.operator.build()?;
    let aux = AuxOperators::new(&spec);

    let sys = schmidt_decompose(&aux.j, None)?;
    println!("rank {} (cutoff {:.3e})", sys.rank(), sys.rank_tol);
    for (n, s) in sys.s.iter().enumerate() {
        println!("  s_{n} = {s:.6e}   s^(1/4) = {:.6e}", s.powf(0.25));
    }
    println!("||J - sum s q p*|| = {:.3e}", (sys.reconstruct() - &aux.j).norm());

    let b = build_b(&sys);
    let bm = b.matrix();
    let gap = (bm.adjoint() * &bm - quarter_power_of_gram(&aux.j)).norm();
    println!("||B*B - (J*J)^(1/4)|| = {gap:.3e}");

    let nuc = nuclearity_report(&sys);
    println!("sum s^(1/2) = {:.6e}, sum s^(1/4) = {:.6e}", nuc.half.total(), nuc.quarter.total());
    Ok(())
}

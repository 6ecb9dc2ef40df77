//! Loads an operator config and reports the null-sequence and Hilbert-Schmidt checks.
//!
//!     cargo run --release --example validate_operator -- configs/perp_eigen.toml

use carleman::config::RunConfig;
use carleman::operator::{gamma_hs_summary, validate_null_sequence_default, AuxOperators};

fn main() -> carleman::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/diagonal_mixed.toml".into());
    let cfg = RunConfig::load(path.as_ref())?;
    let spec = cfg.operator.build()?;
    println!("dim {}, {} null, {} perp", spec.dim(), spec.null_indices().len(), spec.perp_indices().len());
    for w in spec.warnings() {
        println!("warning: {w}");
    }

    let null = validate_null_sequence_default(&spec)?;
    println!(
        "sum ||S* e_k||^{}: partial {:.6e}, extrapolated {:.6e}, decay {:?}, pass {}",
        null.power,
        null.series.total(),
        null.limit_estimate,
        null.series.decay.model,
        null.pass
    );

    let hs = gamma_hs_summary(&spec);
    println!("sum ||Gamma* f_n||^2 = {:.12} (bound {:.12})", hs.total, hs.bound);

    let aux = AuxOperators::new(&spec);
    println!("||J|| = {:.6e}, ||Q|| = {:.6e}, ||Gamma|| = {:.6e}", aux.j.norm(), aux.q.norm(), aux.gamma_norm());
    Ok(())
}

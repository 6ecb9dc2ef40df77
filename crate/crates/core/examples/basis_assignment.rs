//! Which wavelet each basis vector is sent to, and the condition certificates.

use carleman::assignment::{assign, condition_report, enumerate_dyadic, EnumerationOrder, Role};
use carleman::config::RunConfig;
use carleman::operator::AuxOperators;
use carleman::wavelet::MotherWavelet;

fn main() -> carleman::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/diagonal_mixed.toml".into());
    let cfg = RunConfig::load(path.as_ref())?;
    let spec = cfg.operator.build()?;
    let aux = AuxOperators::new(&spec);
    let enumeration = enumerate_dyadic(-128..=2, -4..=4, EnumerationOrder::Diagonal)?;
    let a = assign(&spec, &aux, &enumeration, MotherWavelet::standard(), &cfg.assign_params())?;

    println!("A_i = {:?}", a.a_constants);
    println!("op   role  (j, k)       D(j)");
    for p in &a.pairs {
        let e = enumeration.entries[p.enum_index];
        let role = match p.role {
            Role::G => "g",
            Role::H => "h",
        };
        println!("{:3}   {role}{:<3} ({:4}, {:2})   {:.3e}", p.op_index, p.role_pos, e.j, e.k, e.d);
    }

    let report = condition_report(&a, a.i_max)?;
    for o in &report.orders {
        let worst = o.sumrk.terms.iter().enumerate().map(|(k, t)| t * 2f64.powi(k as i32 + 1)).fold(0.0, f64::max);
        println!("i = {}: max k z H 2^k = {worst:.4}", o.i);
    }
    println!("all targets met: {}", report.sumrk_targets_met());
    Ok(())
}

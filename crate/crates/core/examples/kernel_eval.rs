//! Point evaluation of `K = P + F` and its derivatives.

use carleman::config::{Pipeline, RunConfig};

fn main() -> carleman::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/diagonal_mixed.toml".into());
    let p = Pipeline::build(&RunConfig::load(path.as_ref())?)?;
    let (np, nf) = p.model.truncation();
    println!("{np} P terms, {nf} F terms over {} wavelets", p.model.frame_len());

    for (s, t) in [(0.0, 0.0), (0.3, -1.2), (2.0, 5.0), (-40.0, 3.0)] {
        let k = p.model.eval(0, 0, s, t)?;
        println!(
            "K({s:6.2}, {t:6.2}) = {:+.6e} {:+.6e}i   |P| = {:.3e}  |F| = {:.3e}",
            k.value.re,
            k.value.im,
            k.p_part.norm(),
            k.f_part.norm()
        );
    }
    for (i, j) in [(1, 0), (0, 1), (1, 1), (2, 0), (0, 3)] {
        let v = p.model.eval(i, j, 0.3, -1.2)?;
        println!("d^({i},{j}) K(0.3, -1.2) = {:+.6e} {:+.6e}i  (omitted <= {:.1e})", v.value.re, v.value.im, v.residual);
    }
    Ok(())
}

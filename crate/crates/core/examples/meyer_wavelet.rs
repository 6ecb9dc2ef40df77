//! The Meyer wavelet and its derivatives: sup norms, the constants `A_i`,
//! and samples of one derivative written as CSV.
//!
//!     cargo run --release --example meyer_wavelet -- 2 > u2.csv

use carleman::wavelet::MotherWavelet;

fn main() -> carleman::Result<()> {
    let w = MotherWavelet::standard();
    eprintln!("quadrature order {}", w.quad_order());
    eprintln!(" i   sup|u^(i)|    at s         A_i");
    for i in 0..=4 {
        eprintln!("{i:2}   {:<12.6} {:<+12.6} {:.6e}", w.sup_abs(i)?, w.sup_location(i)?, w.a_constant(i)?);
    }
    let b = w.sup_norm_bound(-3, 1)?;
    eprintln!("u_(-3,k)': empirical sup {:.6e} <= {:.6e}", b.empirical_sup, b.certified_bound);

    let order = std::env::args().nth(1).map_or(Ok(0), |a| a.parse()).unwrap_or(0);
    let stdout = std::io::stdout();
    w.write_samples_csv(&mut stdout.lock(), order, -8.0, 8.0, 513)
}

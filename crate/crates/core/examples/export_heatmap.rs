//! Writes `|K|` on a grid as a binary graymap and the values as CSV.
//!
//!     cargo run --release --example export_heatmap -- configs/random_dense.toml out/

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use carleman::config::{Pipeline, RunConfig};
use carleman::kernel::{write_grid_csv, write_pgm};

fn main() -> carleman::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "configs/diagonal_mixed.toml".into());
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let p = Pipeline::build(&RunConfig::load(path.as_ref())?)?;

    let axis: Vec<f64> = (0..257).map(|n| -8.0 + n as f64 / 16.0).collect();
    let grid = p.model.grid(0, 0, &axis, &axis)?;
    let (peak, r, c) = grid.max_abs();
    println!("max |K| = {peak:.6e} at ({}, {})", axis[r], axis[c]);

    std::fs::create_dir_all(&dir)?;
    write_pgm(&mut BufWriter::new(File::create(dir.join("heatmap.pgm"))?), &grid)?;
    write_grid_csv(&mut BufWriter::new(File::create(dir.join("grid.csv"))?), &axis, &axis, &grid, p.model.residual(0, 0)?)?;
    println!("wrote {}", dir.display());
    Ok(())
}

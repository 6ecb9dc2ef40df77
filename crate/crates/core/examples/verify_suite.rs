//! Runs every numerical check on one config and prints the report.

use carleman::cli::verify_suite;
use carleman::config::{Pipeline, RunConfig};

fn main() -> carleman::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/diagonal_mixed.toml".into());
    let cfg = RunConfig::load(path.as_ref())?;
    let p = Pipeline::build(&cfg)?;
    let report = verify_suite(&p, &cfg)?;
    print!("{}", report.to_text());
    if !report.all_pass() {
        std::process::exit(1);
    }
    Ok(())
}

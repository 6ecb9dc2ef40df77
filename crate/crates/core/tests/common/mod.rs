#![allow(dead_code)]

use std::path::PathBuf;

use carleman::config::{Pipeline, RunConfig};
use carleman::operator::OperatorSpec;
use carleman::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// The example configs meant to pass every check.
pub fn shipped_configs() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(config_path(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

pub fn load(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).unwrap()
}

pub fn pipeline(name: &str) -> Pipeline {
    Pipeline::build(&load(name)).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
}

/// Random dense spec of size `n`, null set = odd positions.
pub fn random_spec(seed: u64, n: usize) -> OperatorSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_matrix(&mut rng, n, 1.0);
    OperatorSpec::from_dense(&m, (1..n).step_by(2).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

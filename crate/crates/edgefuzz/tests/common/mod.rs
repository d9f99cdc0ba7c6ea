//! Shared helpers for the integration and acceptance suites.

use std::path::PathBuf;

use edgefuzz::config::Config;

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

/// Full-pipeline configuration over the committed fixture tree and the
/// stdlib-backed end-to-end catalog. Deterministic given the backend.
pub fn e2e_config(out_dir: PathBuf) -> Config {
    let mut config = Config::default();
    config.miner.src = Some(fixture_path("srctree"));
    config.catalog = Some(fixture_path("e2e_catalog.json"));
    config.out_dir = out_dir;
    config.seed = 7;
    config.target.timeout_s = 15.0;
    config.synthesis.exec_timeout_s = 15.0;
    config.target.runtime_error_patterns = vec![
        "INTERNAL ASSERT FAILED".to_string(),
        "math domain error".to_string(),
    ];
    config
}

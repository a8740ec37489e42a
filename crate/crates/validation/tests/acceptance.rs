//! All acceptance checks at the default configuration, one verdict line each.
//!
//! Exits nonzero when any check fails. `cargo test --test acceptance -- 3 7`
//! runs only the listed checks.

use std::process::ExitCode;

use relaylab_cli::acceptance::{run_check, CHECK_NAMES};
use relaylab_cli::ExperimentConfig;

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids = if picked.is_empty() { (1..=CHECK_NAMES.len() as u32).collect() } else { picked };

    let cfg = ExperimentConfig::default();
    let mut failed = Vec::new();
    for id in ids {
        let report = run_check(id, &cfg);
        println!("{}", report.headline());
        for l in report.detail.lines() {
            println!("       {l}");
        }
        if !report.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed checks {failed:?}");
        ExitCode::FAILURE
    }
}

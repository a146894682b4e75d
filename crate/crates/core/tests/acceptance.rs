//! Runs every acceptance criterion and prints one line per criterion.
//! Positional arguments select criteria by number; flags are ignored.

use std::io::Write;
use std::process::ExitCode;

use fidlab::acceptance::{self, CRITERIA};
use fidlab::config::RunConfig;

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = RunConfig::default();
    let mut out = std::io::stdout().lock();
    let mut failures = 0;
    for (id, _, _) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let outcome = acceptance::run(id, &cfg);
        writeln!(out, "{outcome}").unwrap();
        out.flush().unwrap();
        failures += usize::from(!outcome.pass);
    }
    if failures == 0 {
        writeln!(out, "acceptance: all criteria passed").unwrap();
        ExitCode::SUCCESS
    } else {
        writeln!(out, "acceptance: {failures} criteria failed").unwrap();
        ExitCode::FAILURE
    }
}

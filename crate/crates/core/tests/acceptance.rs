//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Criteria 1 to 12 run at full default scale. The determinism criterion runs
//! a reduced-count suite twice, on one thread and then on four, and compares
//! the JSON byte for byte.

use std::process::ExitCode;
use std::time::Instant;

use otk_core::parallel::with_threads;
use otk_core::verify::{run_criterion, run_suite, SuiteConfig, SuiteCounts};

fn determinism_config() -> SuiteConfig {
    SuiteConfig {
        counts: SuiteCounts {
            doubly: 10,
            inequality: 40,
            normal: 10,
            single: 10,
            product: 5,
            block: 4,
            probe: 10,
            gradient: 20,
            exploratory: 6,
        },
        samples: 512,
        boundary_dirs: 64,
        probe_shifts: 300,
        toeplitz_sections: vec![4, 8, 16],
        ..SuiteConfig::default()
    }
}

fn determinism() -> Result<(bool, String), String> {
    let config = determinism_config();
    let one = with_threads(1, || run_suite(&config))
        .and_then(|r| r)
        .map_err(|e| e.to_string())?
        .to_json();
    let many = with_threads(4, || run_suite(&config))
        .and_then(|r| r)
        .map_err(|e| e.to_string())?
        .to_json();
    let same = one == many;
    Ok((same, format!("{} bytes, identical across thread counts: {same}", one.len())))
}

fn main() -> ExitCode {
    let config = SuiteConfig::default();
    let mut failed = 0;
    for id in 1..=12 {
        let t = Instant::now();
        match run_criterion(id, &config) {
            Ok(outcome) => {
                println!("{}  [{:.1}s]", outcome.line(), t.elapsed().as_secs_f64());
                for note in &outcome.notes {
                    println!("        {note}");
                }
                failed += !outcome.passed() as usize;
            }
            Err(e) => {
                println!("[FAIL] {id:>2} error: {e}");
                failed += 1;
            }
        }
    }

    let t = Instant::now();
    match determinism() {
        Ok((ok, detail)) => {
            let tag = if ok { "PASS" } else { "FAIL" };
            println!("[{tag}] 13 determinism ({detail})  [{:.1}s]", t.elapsed().as_secs_f64());
            failed += !ok as usize;
        }
        Err(e) => {
            println!("[FAIL] 13 determinism error: {e}");
            failed += 1;
        }
    }

    println!("{} of 13 criteria passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

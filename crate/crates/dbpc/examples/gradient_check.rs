//! Verify every analytic gradient against central finite differences.
//!
//! ```text
//! cargo run --release --example gradient_check [seed]
//! ```

use dbpc::gradcheck;

fn main() -> Result<(), dbpc::Error> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be a u64"))
        .unwrap_or(0);
    let mut failed = false;
    for suite in gradcheck::run_default(seed)? {
        println!(
            "{}  {}: max rel error {:.3e} over {} coordinates",
            if suite.passed() { "PASS" } else { "FAIL" },
            suite.name,
            suite.max_rel_error,
            suite.coordinates_checked
        );
        failed |= !suite.passed();
    }
    if failed {
        std::process::exit(1);
    }
    Ok(())
}

//! Print the exact parameter count of each built-in architecture.
//!
//! ```text
//! cargo run --example param_counts
//! ```

use dbpc::config::presets;

fn main() -> Result<(), dbpc::Error> {
    for name in presets::NAMES {
        let net = presets::by_name(name, 0)?;
        println!(
            "{name:<18} {:>9} parameters   {}",
            net.param_count(),
            net.describe()
        );
    }
    Ok(())
}

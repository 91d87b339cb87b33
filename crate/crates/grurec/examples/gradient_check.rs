//! Verify every analytic gradient against central finite differences in f64,
//! layer by layer and through a complete tiny model. This is the same suite
//! the `grurec gradcheck` subcommand runs.
//!
//!     cargo run --release --example gradient_check

use grurec::gradcheck::run_gradcheck;

fn main() -> grurec::Result<()> {
    let report = run_gradcheck(42, None)?;
    println!("{:<14} {:>8} {:>14}  verdict", "component", "checked", "max rel err");
    for c in &report.components {
        println!(
            "{:<14} {:>8} {:>14.3e}  {}",
            c.component,
            c.checked,
            c.max_rel_err,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    println!(
        "\nall gradients within {:.0e}: {}",
        report.components[0].tolerance,
        if report.passed { "yes" } else { "no" }
    );
    if !report.passed {
        std::process::exit(1);
    }
    Ok(())
}

//! Finite-difference check of the loss gradient on a small random instance.
//!
//! `cargo run --release --example gradcheck`

use reverb_match::loss::finite_difference_check;
use reverb_match::LossWeights;

fn main() -> reverb_match::Result<()> {
    for (lambda, gamma) in [(0.0, 1.0), (0.5, 0.5), (1.0, 1.0)] {
        let w = LossWeights::new(lambda, gamma)?;
        let check = finite_difference_check(32, 10, 3, 2, &[w], 20, 1e-6, 1)?;
        println!(
            "lambda={lambda} gamma={gamma}: max relative error {:.2e} over {} directions",
            check.max_rel_error, check.directions
        );
    }
    Ok(())
}

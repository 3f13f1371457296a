//! Print the per-token gradient-weight curves as a function of the
//! likelihood ratio R, for the implicit-negative objective and the
//! clipped group-advantage objective side by side.
//!
//! At r_hat = 0.5 the closed forms are nft_pos = 1/R and
//! nft_neg = -1/max(2 - R, 1); the clipped columns drop to exactly zero
//! beyond their clip thresholds. All four weights agree at R = 1.
//!
//! Run with: `cargo run --example weight_curves`

use nftlab::cli::weight_curve_table;

fn main() -> nftlab::Result<()> {
    let table = weight_curve_table(0.5, 1.0, 0.2, 0.28, 0.0, 2.0, 20)?;
    print!("{table}");
    Ok(())
}

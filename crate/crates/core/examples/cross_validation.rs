//! Stratified 5-fold cross-validation on Gaussian blobs.
//!
//! Run with `cargo run --release --example cross_validation`.

use riverwatch::forest::{cross_validate, Hyperparams};
use riverwatch::synthetic::gaussian_blobs;

fn main() -> riverwatch::Result<()> {
    let data = gaussian_blobs(10_000, 5, 9, 3.0, 42)?;
    let report = cross_validate(&data, &Hyperparams::with_seed(42), 5)?;
    println!("accuracy {:.4}", report.accuracy);
    println!("per fold {:?}", report.fold_accuracies);
    println!("confusion (rows = truth):");
    for (name, row) in report.class_names.iter().zip(&report.confusion) {
        println!("  {name:<15} {row:?}");
    }
    Ok(())
}

//! Trains a short deterministic run in two halves through a checkpoint and
//! checks that the resumed log matches an uninterrupted run.
//!
//! ```text
//! cargo run --release --example train_resume -- <dataset_dir> [iterations]
//! ```

use std::path::PathBuf;

use glassnerf::dataset::{Dataset, Split};
use glassnerf::train::{train, Checkpoint, TrainConfig, TrainOptions, CHECKPOINT_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(args.next().ok_or("usage: train_resume <dataset_dir> [iterations]")?);
    let iterations: u64 = args.next().map_or(Ok(40), |s| s.parse())?;
    let dataset = Dataset::load(&data, Split::Train)?;
    let mut config = TrainConfig::desk();
    config.iterations = iterations;
    config.rays_per_batch = 64;
    config.log_every = 1;

    let tmp = std::env::temp_dir().join(format!("glassnerf-resume-{}", std::process::id()));
    let whole = train(
        &dataset,
        &config,
        TrainOptions {
            deterministic: true,
            ..TrainOptions::default()
        },
    )?;

    let first = train(
        &dataset,
        &config,
        TrainOptions {
            out_dir: Some(&tmp),
            deterministic: true,
            stop_at: Some(iterations / 2),
            ..TrainOptions::default()
        },
    )?;
    let ck = Checkpoint::load(&tmp.join(CHECKPOINT_FILE))?;
    println!("interrupted at iteration {}", ck.iteration);
    let second = train(
        &dataset,
        &config,
        TrainOptions {
            resume: Some(ck),
            deterministic: true,
            ..TrainOptions::default()
        },
    )?;
    let resumed: Vec<_> = first.log.iter().chain(&second.log).collect();
    let same = resumed.len() == whole.log.len() && resumed.iter().zip(&whole.log).all(|(a, b)| *a == b);
    for row in whole.log.iter().step_by((iterations as usize / 8).max(1)) {
        println!("{:>5} loss {:.6}", row.iteration, row.total_loss);
    }
    println!("resumed log identical to uninterrupted log: {same}");
    std::fs::remove_dir_all(&tmp).ok();
    Ok(())
}

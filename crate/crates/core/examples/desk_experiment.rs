//! Trains the full model or the vanilla baseline on a dataset at desk scale,
//! then reports test metrics and the extracted glass surface.
//!
//! ```text
//! cargo run --release --example desk_experiment -- <dataset_dir> [full|vanilla] [iterations] [out_dir] [lr]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use glassnerf::dataset::{Dataset, Split};
use glassnerf::eval::{evaluate, extract_glass_surface, surface_error, EvalOptions, DEFAULT_THRESHOLD};
use glassnerf::train::{train, TrainConfig, TrainOptions};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(
        args.next()
            .ok_or("usage: desk_experiment <dataset_dir> [full|vanilla] [iterations] [out_dir] [lr]")?,
    );
    let variant = args.next().unwrap_or_else(|| "full".into());
    let mut config = match variant.as_str() {
        "full" => TrainConfig::desk(),
        "vanilla" => TrainConfig::desk().vanilla(),
        other => return Err(format!("unknown variant `{other}`").into()),
    };
    if let Some(n) = args.next() {
        config.iterations = n.parse()?;
    }
    let out = args.next().filter(|s| s != "-").map(PathBuf::from);
    if let Some(lr) = args.next() {
        config.learning_rate = lr.parse()?;
        config.final_learning_rate = 0.1 * config.learning_rate;
    }

    let train_set = Dataset::load(&data, Split::Train)?;
    let test_set = Dataset::load(&data, Split::Test)?;
    let started = Instant::now();
    let mut progress = |row: &glassnerf::train::LogRow| {
        if row.iteration.is_multiple_of(250) {
            println!(
                "it {:>6}  loss {:.5}  offset {:.3e}  lr {:.2e}  {:.0}s",
                row.iteration,
                row.render_loss,
                row.offset_loss,
                row.lr,
                started.elapsed().as_secs_f64()
            );
        }
    };
    let outcome = train(
        &train_set,
        &config,
        TrainOptions {
            out_dir: out.as_deref(),
            progress: Some(&mut progress),
            ..TrainOptions::default()
        },
    )?;
    let ck = &outcome.checkpoint;
    let render = ck.config.render_config();
    let report = evaluate(
        &ck.model,
        &test_set,
        &render,
        &EvalOptions {
            grid_dir: out.as_ref().map(|d| d.join("grids")),
            ..EvalOptions::default()
        },
    )?;
    println!("test PSNR {:.3} dB  SSIM {:.4}", report.mean_psnr, report.mean_ssim);
    if let Some(h) = report.highlight {
        println!(
            "highlight energy {:.3}  IoU {:.3}  ({} px)",
            h.energy_fraction, h.mask_iou, h.gt_pixels
        );
    }
    if render.use_glass {
        let cams: Vec<_> = test_set.views.iter().map(|v| v.camera.clone()).collect();
        let (cloud, stats) = extract_glass_surface(&ck.model, &cams, &render, DEFAULT_THRESHOLD)?;
        println!(
            "weighted offsets: mean {:.3e}  max {:.3e}  per-ray {:.3e}; {} glass points",
            stats.mean,
            stats.max,
            stats.mean_ray_shift,
            cloud.points.len()
        );
        if let Some(gt) = &test_set.manifest.ground_truth {
            if !gt.slabs.is_empty() && !cloud.points.is_empty() {
                let err = surface_error(&cloud.points, &gt.slabs)?;
                println!(
                    "surface error mean {:.4} ({:.2}% of extent)  median {:.4}",
                    err.mean,
                    100.0 * err.mean / test_set.manifest.extent(),
                    err.median
                );
            }
        }
    }
    println!("total {:.0}s", started.elapsed().as_secs_f64());
    Ok(())
}

//! Renders the test poses of a dataset from a checkpoint and writes the
//! composite, view-independent and view-dependent images side by side with
//! the ground truth.
//!
//! ```text
//! cargo run --release --example render_decomposition -- <checkpoint.bin> <dataset_dir> <out_dir>
//! ```

use std::path::PathBuf;

use glassnerf::dataset::{Dataset, Split};
use glassnerf::eval::write_grid;
use glassnerf::render::render_image;
use glassnerf::train::Checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let [ck, data, out] = args.as_slice() else {
        return Err("usage: render_decomposition <checkpoint.bin> <dataset_dir> <out_dir>".into());
    };
    let ck = Checkpoint::load(ck)?;
    let test = Dataset::load(data, Split::Test)?;
    std::fs::create_dir_all(out)?;
    let render = ck.config.render_config();
    for view in &test.views {
        let img = render_image(&ck.model, &view.camera, &render, |_, _, _| Ok(()))?;
        let path = out.join(format!("view_{:03}.png", view.index));
        write_grid(&path, &view.rgb, &img)?;
        println!("{}", path.display());
    }
    Ok(())
}

//! Renders a preset scene with the analytic tracer and writes a posed
//! dataset (images, depth, reflection-only images, glass points, manifest).
//!
//! ```text
//! cargo run --example generate_dataset -- [preset] [out_dir]
//! ```

use std::path::PathBuf;

use glassnerf::oracle::{generate_dataset, GenerateConfig, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "slab-checker".into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| format!("data/{preset}")));
    let scene = SceneSpec::preset(&preset)?;
    let manifest = generate_dataset(&scene, &GenerateConfig::default(), &out)?;
    println!(
        "wrote {} frames ({}x{}) of `{}` to {}",
        manifest.frames.len(),
        manifest.width,
        manifest.height,
        scene.name,
        out.display()
    );
    Ok(())
}

//! PSNR and SSIM between two PNG images (or of a synthetic pair when no
//! paths are given).
//!
//! ```text
//! cargo run --example image_metrics -- [a.png b.png]
//! ```

use std::path::Path;

use glassnerf::eval::{psnr, quantize, ssim};
use glassnerf::io::read_rgb_png;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (w, h, a, b) = if let [pa, pb] = args.as_slice() {
        let (w, h, a) = read_rgb_png(Path::new(pa))?;
        let (w2, h2, b) = read_rgb_png(Path::new(pb))?;
        if (w, h) != (w2, h2) {
            return Err(format!("sizes differ: {w}x{h} vs {w2}x{h2}").into());
        }
        (w, h, a, b)
    } else {
        let (w, h) = (32, 32);
        let a: Vec<f64> = (0..w * h * 3)
            .map(|i| (((i / 3) % w / 4 + (i / 3) / w / 4) % 2) as f64)
            .collect();
        let b: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(i, v)| 0.8 * v + 0.1 + 0.05 * ((i as f64) * 0.37).sin())
            .collect();
        (w, h, a, b)
    };
    println!("PSNR {:.4} dB", psnr(&a, &b, 1.0)?);
    println!("SSIM {:.6}", ssim(&a, &b, w, h)?);
    println!("PSNR (8-bit) {:.4} dB", psnr(&quantize(&a), &quantize(&b), 1.0)?);
    Ok(())
}

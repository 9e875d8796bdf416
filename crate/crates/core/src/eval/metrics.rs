//! Image-fidelity metrics on interleaved RGB buffers in `[0, 1]`.

use super::EvalError;

/// Rec. 709 luma of linear RGB.
pub fn luma(rgb: &[f64]) -> Vec<f64> {
    rgb.chunks_exact(3)
        .map(|p| 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2])
        .collect()
}

/// Rounds values to the nearest 8-bit level (after clamping to `[0, 1]`).
pub fn quantize(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
        .collect()
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(EvalError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `10·log10(peak² / MSE)`; `+∞` for identical images.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> Result<f64, EvalError> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter over every fully-covered window position.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean local SSIM of two single-channel `w × h` images with an 11×11
/// Gaussian window (σ = 1.5), population statistics and
/// `C₁ = (0.01·peak)²`, `C₂ = (0.03·peak)²`, averaged over the window
/// positions that lie fully inside the image.
pub fn ssim_gray(a: &[f64], b: &[f64], w: usize, h: usize, peak: f64) -> Result<f64, EvalError> {
    if a.len() != w * h || b.len() != w * h {
        return Err(EvalError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(EvalError::TooSmall { width: w, height: h });
    }
    let k = gaussian_kernel();
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let aa = filter_valid(&prod(a, a), w, h, &k);
    let bb = filter_valid(&prod(b, b), w, h, &k);
    let ab = filter_valid(&prod(a, b), w, h, &k);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / n as f64)
}

/// SSIM of two RGB images compared on their luma.
pub fn ssim(a: &[f64], b: &[f64], w: usize, h: usize) -> Result<f64, EvalError> {
    if a.len() != b.len() || a.len() != w * h * 3 {
        return Err(EvalError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(EvalError::TooSmall { width: w, height: h });
    }
    let (la, lb) = (luma(a), luma(b));
    if la == lb {
        return Ok(1.0);
    }
    ssim_gray(&la, &lb, w, h, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_closed_forms() {
        let a = vec![0.5; 300];
        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let c: Vec<f64> = a.iter().map(|v| v - 0.01).collect();
        assert!((psnr(&a, &c, 1.0).unwrap() - 40.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        assert!(matches!(psnr(&a, &b[..3], 1.0), Err(EvalError::SizeMismatch { .. })));
    }

    #[test]
    fn ssim_identity_and_degenerate_cases() {
        let (w, h) = (16, 12);
        let img: Vec<f64> = (0..w * h * 3).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        assert_eq!(ssim(&img, &img, w, h).unwrap(), 1.0);
        let half = vec![0.5; w * h * 3];
        let neg: Vec<f64> = half.iter().map(|v| 1.0 - v).collect();
        assert_eq!(ssim(&half, &neg, w, h).unwrap(), 1.0);
        let other: Vec<f64> = img.iter().map(|v| v * 0.7 + 0.1).collect();
        let s1 = ssim(&img, &other, w, h).unwrap();
        let s2 = ssim(&other, &img, w, h).unwrap();
        assert!((s1 - s2).abs() < 1e-12 && s1 < 1.0 && s1 > -1.0);
        assert!(matches!(
            ssim(&img[..30], &img[..30], 5, 2),
            Err(EvalError::TooSmall { .. })
        ));
    }

    #[test]
    fn ssim_constant_pair_closed_form() {
        // constant images: variances vanish, so SSIM = (2ab + C1)/(a² + b² + C1)
        let (w, h) = (20, 20);
        let c1 = 1e-4;
        let a = vec![0.5; w * h];
        let b = vec![0.0; w * h];
        let expect = c1 / (0.25 + c1);
        assert!((ssim_gray(&a, &b, w, h, 1.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_reference_on_structured_pair() {
        // reference value from scikit-image's Gaussian-weighted SSIM
        let (w, h) = (20, 24);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..h {
            for j in 0..w {
                let v = ((i * 7 + j * 13) % 17) as f64 / 16.0;
                a.push(v);
                b.push((0.6 * v + 0.2 + 0.1 * (i as f64 * 0.5 + j as f64 * 0.3).sin()).clamp(0.0, 1.0));
            }
        }
        let s = ssim_gray(&a, &b, w, h, 1.0).unwrap();
        assert!((s - 0.8610221881039919).abs() < 1e-6, "ssim {s}");
    }
}

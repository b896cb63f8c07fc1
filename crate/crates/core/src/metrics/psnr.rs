use crate::error::Result;
use crate::pairset::Image;

/// Peak signal-to-noise ratio in dB over the luma planes, with peak 255.
/// Identical images give `+inf`.
pub fn psnr(x: &Image, y: &Image) -> Result<f64> {
    x.check_same_size(y)?;
    let sse: f64 = x
        .luma()
        .iter()
        .zip(y.luma())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / x.luma().len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn identical_is_infinite() {
        let img = Image::gray(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
    }

    #[test]
    fn unit_error_everywhere() {
        let x = Image::gray(4, 4, vec![100; 16]).unwrap();
        let y = Image::gray(4, 4, (0..16).map(|i| if i % 2 == 0 { 101 } else { 99 }).collect()).unwrap();
        let expected = 20.0 * 255f64.log10();
        assert!((psnr(&x, &y).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 48.1308).abs() < 1e-4);
    }

    #[test]
    fn hand_computed_mse_of_one() {
        let x = Image::gray(2, 2, vec![0, 0, 0, 0]).unwrap();
        let y = Image::gray(2, 2, vec![0, 0, 0, 2]).unwrap();
        assert!((psnr(&x, &y).unwrap() - 48.1308).abs() < 1e-3);
        assert_eq!(psnr(&x, &y).unwrap(), psnr(&y, &x).unwrap());
    }

    #[test]
    fn size_mismatch() {
        let x = Image::gray(2, 2, vec![0; 4]).unwrap();
        let y = Image::gray(4, 1, vec![0; 4]).unwrap();
        assert!(matches!(psnr(&x, &y), Err(Error::SizeMismatch { .. })));
    }
}

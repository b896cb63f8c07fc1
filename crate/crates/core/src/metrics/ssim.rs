use super::filter::{filter_valid, gaussian_taps};
use crate::error::{Error, Result};
use crate::pairset::Image;

pub(crate) const WINDOW: usize = 11;
pub(crate) const SIGMA: f64 = 1.5;
pub(crate) const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub(crate) const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Mean structural similarity over all fully-contained 11x11 Gaussian
/// windows (sigma 1.5) of the luma planes.
pub fn ssim(x: &Image, y: &Image) -> Result<f64> {
    x.check_same_size(y)?;
    let (w, h) = (x.width(), x.height());
    if w < WINDOW || h < WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: WINDOW,
            min_height: WINDOW,
        });
    }
    let taps = gaussian_taps(WINDOW, SIGMA);
    let (lx, ly) = (x.luma(), y.luma());
    let xx: Vec<f64> = lx.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ly.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = lx.iter().zip(ly).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(lx, w, h, &taps);
    let mu_y = filter_valid(ly, w, h, &taps);
    let e_xx = filter_valid(&xx, w, h, &taps);
    let e_yy = filter_valid(&yy, w, h, &taps);
    let e_xy = filter_valid(&xy, w, h, &taps);

    let total: f64 = (0..mu_x.len())
        .map(|i| ssim_term(mu_x[i], mu_y[i], e_xx[i], e_yy[i], e_xy[i]))
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// SSIM of one window from its weighted first and second moments. Written
/// so that exchanging the x and y arguments gives a bit-identical result.
pub(crate) fn ssim_term(mx: f64, my: f64, exx: f64, eyy: f64, exy: f64) -> f64 {
    let mx2 = mx * mx;
    let my2 = my * my;
    let mxy = mx * my;
    let vx = exx - mx2;
    let vy = eyy - my2;
    let cxy = exy - mxy;
    ((2.0 * mxy + C1) * (2.0 * cxy + C2)) / ((mx2 + my2 + C1) * (vx + vy + C2))
}

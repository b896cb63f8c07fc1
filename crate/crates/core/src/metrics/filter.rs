//! Separable Gaussian filtering on row-major `f64` planes.

/// Normalized 1-D Gaussian taps of odd length `size`.
pub(crate) fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    debug_assert!(size % 2 == 1);
    let half = (size / 2) as f64;
    let mut taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Filters with the outer product of `taps`, keeping only positions where
/// the whole window fits. Output is `(w - k + 1) x (h - k + 1)`.
pub(crate) fn filter_valid(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Same-size filtering with edge samples replicated past the border.
pub(crate) fn filter_replicate(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let half = (taps.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            rows[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * src[clamp(x as isize + i as isize - half, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[clamp(y as isize + i as isize - half, h) * w + x])
                .sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_normalized_and_symmetric() {
        let t = gaussian_taps(11, 1.5);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..5 {
            assert_eq!(t[i], t[10 - i]);
        }
    }

    #[test]
    fn constant_plane_is_preserved() {
        let plane = vec![7.0; 20 * 15];
        let taps = gaussian_taps(7, 7.0 / 6.0);
        for v in filter_replicate(&plane, 20, 15, &taps) {
            assert!((v - 7.0).abs() < 1e-12);
        }
        let valid = filter_valid(&plane, 20, 15, &taps);
        assert_eq!(valid.len(), 14 * 9);
    }

    #[test]
    fn valid_matches_direct_window_sum() {
        let (w, h) = (9, 8);
        let plane: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64).collect();
        let taps = gaussian_taps(5, 1.0);
        let out = filter_valid(&plane, w, h, &taps);
        let ow = w - 4;
        for y in 0..h - 4 {
            for x in 0..ow {
                let mut direct = 0.0;
                for j in 0..5 {
                    for i in 0..5 {
                        direct += taps[j] * taps[i] * plane[(y + j) * w + x + i];
                    }
                }
                assert!((out[y * ow + x] - direct).abs() < 1e-12);
            }
        }
    }
}

//! Separable Gaussian smoothing with symmetric (edge-repeating) reflection.

use ndarray::{Array2, Axis, Zip};

/// Normalized 1-D Gaussian taps over `[-radius, radius]`, `radius = ceil(4σ)`.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Maps an out-of-range index into `[0, n)` by repeated half-sample
/// reflection: `... c b a | a b c ... x y z | z y x ...`.
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let r = i.rem_euclid(period);
    (if r < n { r } else { period - 1 - r }) as usize
}

fn convolve_axis(input: &Array2<f64>, kernel: &[f64], axis: Axis) -> Array2<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut out = Array2::zeros(input.dim());
    Zip::from(out.lanes_mut(axis))
        .and(input.lanes(axis))
        .par_for_each(|mut dst, src| {
            let n = src.len();
            for i in 0..n {
                let mut acc = 0.0;
                for (t, &k) in kernel.iter().enumerate() {
                    let j = reflect_index(i as i64 + t as i64 - radius, n);
                    acc += k * src[j];
                }
                dst[i] = acc;
            }
        });
    out
}

/// Convolves `map` with a normalized 2-D Gaussian (the outer product of two
/// 1-D kernels, so the truncated square window sums to one).
pub fn gaussian_smooth(map: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let kernel = gaussian_kernel_1d(sigma);
    let rows = convolve_axis(map, &kernel, Axis(1));
    convolve_axis(&rows, &kernel, Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_repeats_edge() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        // frames smaller than the kernel radius keep bouncing
        assert_eq!(reflect_index(-4, 2), 0);
        assert_eq!(reflect_index(5, 2), 1);
    }

    #[test]
    fn kernel_sums_to_one_with_radius_4() {
        let k = gaussian_kernel_1d(1.0);
        assert_eq!(k.len(), 9);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_map_unchanged() {
        let map = Array2::from_elem((5, 7), 3.25);
        let out = gaussian_smooth(&map, 1.0);
        assert!(out.iter().all(|&v| (v - 3.25).abs() < 1e-12));
    }
}

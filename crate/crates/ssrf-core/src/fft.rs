//! Iterative radix-2 complex FFT, enough for circulant embedding.

use alloc::vec::Vec;

use crate::math;

fn bit_reverse_permute(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
    }
}

/// In-place FFT on a power-of-two length. `inverse` applies the conjugate
/// transform and the 1/n factor.
pub fn fft_inplace(re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = re.len();
    assert_eq!(n, im.len());
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }
    bit_reverse_permute(re, im);
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * core::f64::consts::PI / len as f64;
        let (wr, wi) = (math::cos(ang), math::sin(ang));
        let mut start = 0;
        while start < n {
            let mut cr = 1.0;
            let mut ci = 0.0;
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let tr = re[b] * cr - im[b] * ci;
                let ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
            start += len;
        }
        len <<= 1;
    }
    if inverse {
        let inv_n = 1.0 / n as f64;
        for v in re.iter_mut() {
            *v *= inv_n;
        }
        for v in im.iter_mut() {
            *v *= inv_n;
        }
    }
}

/// 2-D FFT on a row-major `n_rows x n_cols` array (both powers of two).
pub fn fft2_inplace(re: &mut [f64], im: &mut [f64], n_rows: usize, n_cols: usize, inverse: bool) {
    assert_eq!(re.len(), n_rows * n_cols);
    // Rows in place.
    for r in 0..n_rows {
        fft_inplace(
            &mut re[r * n_cols..(r + 1) * n_cols],
            &mut im[r * n_cols..(r + 1) * n_cols],
            inverse,
        );
    }
    // Columns via scratch.
    let mut col_re: Vec<f64> = alloc::vec![0.0; n_rows];
    let mut col_im: Vec<f64> = alloc::vec![0.0; n_rows];
    for c in 0..n_cols {
        for r in 0..n_rows {
            col_re[r] = re[r * n_cols + c];
            col_im[r] = im[r * n_cols + c];
        }
        fft_inplace(&mut col_re, &mut col_im, inverse);
        for r in 0..n_rows {
            re[r * n_cols + c] = col_re[r];
            im[r * n_cols + c] = col_im[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn matches_direct_dft() {
        let mut rng = RandomStream::new(3);
        let n = 16;
        let re0: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let im0: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let mut re = re0.clone();
        let mut im = im0.clone();
        fft_inplace(&mut re, &mut im, false);
        for k in 0..n {
            let mut sr = 0.0;
            let mut si = 0.0;
            for j in 0..n {
                let ang = -2.0 * core::f64::consts::PI * (k * j) as f64 / n as f64;
                sr += re0[j] * math::cos(ang) - im0[j] * math::sin(ang);
                si += re0[j] * math::sin(ang) + im0[j] * math::cos(ang);
            }
            assert!(math::abs(re[k] - sr) < 1e-10);
            assert!(math::abs(im[k] - si) < 1e-10);
        }
    }

    #[test]
    fn roundtrip_2d() {
        let mut rng = RandomStream::new(5);
        let (rows, cols) = (8, 4);
        let re0: Vec<f64> = (0..rows * cols).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let im0: Vec<f64> = (0..rows * cols).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let mut re = re0.clone();
        let mut im = im0.clone();
        fft2_inplace(&mut re, &mut im, rows, cols, false);
        fft2_inplace(&mut re, &mut im, rows, cols, true);
        for i in 0..rows * cols {
            assert!(math::abs(re[i] - re0[i]) < 1e-12);
            assert!(math::abs(im[i] - im0[i]) < 1e-12);
        }
    }
}

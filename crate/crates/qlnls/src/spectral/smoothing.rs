//! Dyadic smoothing `S_j` and the Littlewood-Paley type blocks `R_j`.

use super::field::Field;

/// Cutoff radius `2^j` of the smoothing operator `S_j`.
pub fn cutoff(j: u32) -> f64 {
    2f64.powi(j as i32)
}

/// Keeps exactly the modes `|k| <= 2^j`.
pub fn smooth_s(j: u32, u: &Field) -> Field {
    u.truncate(cutoff(j))
}

/// `R_0 = S_1`, `R_j = S_{j+1} - S_j` for `j >= 1`.
pub fn block_r(j: u32, u: &Field) -> Field {
    if j == 0 {
        smooth_s(1, u)
    } else {
        let lo = cutoff(j);
        let hi = cutoff(j + 1);
        u.multiplier(|k| {
            let a = k.abs();
            if a > lo && a <= hi {
                num_complex::Complex64::new(1.0, 0.0)
            } else {
                num_complex::Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// Number of blocks needed to cover every mode of an `n`-point grid.
pub fn block_count(n: usize) -> u32 {
    let mut j = 0;
    while cutoff(j + 1) < n as f64 / 2.0 {
        j += 1;
    }
    j + 1
}

/// Constant `c_b = 2^b` of the smoothing inequality `|S_j u|_b <= 2^{j(b-a)} c_b |S_j u|_a`.
pub fn smoothing_constant(b: f64) -> f64 {
    2f64.powf(b)
}

/// Constant `5^{|b-a|/2}` in `|R_j u|_b <= 2^{j(b-a)} C |R_j u|_a`; the
/// largest bracket on the support of `R_j` is `<2^{j+1}>`, worst at `j = 0`.
pub fn block_constant(a: f64, b: f64) -> f64 {
    5f64.powf(0.5 * (b - a).abs())
}

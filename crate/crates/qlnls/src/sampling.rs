//! Seeded random fields and trajectories used by checks and examples.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::spectral::{Field, Grid};

pub use rand::SeedableRng;
pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex field with independent Gaussian-like modes `|k| <= kmax`, decaying
/// like `<k>^{-decay}`, scaled to spectral `L^2` norm `amp`.
pub fn band_limited(grid: &Grid, kmax: i64, decay: f64, amp: f64, rng: &mut Rng64) -> Field {
    let mut c = vec![C64::new(0.0, 0.0); grid.n()];
    for k in -kmax..=kmax {
        if let Some(j) = grid.index_of(k) {
            if j == grid.nyquist() {
                continue;
            }
            let w = (1.0 + (k * k) as f64).powf(-decay / 2.0);
            c[j] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w;
        }
    }
    let f = Field::from_coeffs(grid, c);
    let nrm = f.l2_norm();
    if nrm == 0.0 {
        f
    } else {
        f.scale_re(amp / nrm)
    }
}

/// Real-valued band-limited field.
pub fn band_limited_real(grid: &Grid, kmax: i64, decay: f64, amp: f64, rng: &mut Rng64) -> Field {
    let f = band_limited(grid, kmax, decay, 1.0, rng).re();
    let nrm = f.l2_norm();
    if nrm == 0.0 {
        f
    } else {
        f.scale_re(amp / nrm)
    }
}

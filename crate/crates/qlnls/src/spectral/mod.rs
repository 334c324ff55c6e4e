//! Periodic grids, spectral fields, norms, inner products, the complex
//! change of coordinates and dyadic smoothing.

mod field;
mod grid;
pub mod io;
mod pair;
pub mod smoothing;
pub mod time;

pub use field::{
    bold_l2, dealias_coeffs, fourier_multiplier, l2, l2_spectral, symplectic_w, Field,
};
pub use grid::{bracket, wavenumber, Grid};
pub use pair::{c_inverse, c_transform, complex_to_pair, pair_to_complex, BoldField, Pair};
pub use smoothing::{block_r, smooth_s};
pub use time::{TimeGrid, Traj};

/// Non-negative Sobolev index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> crate::Result<SobolevIndex> {
        if s >= 0.0 && s.is_finite() {
            Ok(SobolevIndex(s))
        } else {
            Err(crate::Error::Precondition(format!("Sobolev index must be >= 0, got {s}")))
        }
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

/// `(sum_k <k>^{2s} |c_k|^2)^{1/2}`.
pub fn sobolev_norm(u: &Field, s: SobolevIndex) -> f64 {
    u.sobolev_norm(s.get())
}

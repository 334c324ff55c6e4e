//! Hamiltonian densities, the real and complex forms of the equation, and the
//! linearized operator with its structure checks.

pub mod density;
pub mod linearize;
pub mod model;

pub use density::{builtin, check_density, CubicDensity, Density, DensityRegistry, HamiltonianDensity, ZeroDensity};
pub use linearize::{
    check_hamiltonian_structure, directional_derivative_check, linearize, linearize_at, linearize_complex,
    linearize_with_tol, m_t, structure_residuals, CoeffSet, STRUCTURE_TOL, Coeffs, OperatorL, StructureReport,
};
pub use model::{eval_nonlinearity, eval_p, hamiltonian_complex, hamiltonian_value};

//! Concrete constraint systems and the mask non-degeneracy monitor.

mod daubechies;
mod equivariance;
mod orthogonal;
mod qmf;
mod sphere;
mod winding;

pub use equivariance::{commuting_equivariance_system, CommutingSystem};
pub use orthogonal::{orthogonal_filter_system, OrthogonalSystem};
pub use qmf::{find_qmf, qmf_d2_apply, qmf_jacobian, qmf_residual, reembed, QmfSearch, QmfSystem, WaveletFilter};
pub use sphere::{sphere_system, SphereSystem};
pub use winding::{winding_zero_count, WINDING_N_QUAD, WINDING_RADIUS, WINDING_THRESHOLD};

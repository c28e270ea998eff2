//! Radially symmetric steady states, free energies and gradient flows for a
//! two-species chemotaxis system on the unit disk with Dirichlet potentials.

pub mod error;
pub mod flow;
pub mod functionals;
pub mod liouville;
pub mod model;
pub mod oracle;
pub mod phase;
pub mod radial;
pub mod scaling;

pub use error::{Error, Result};
pub use model::{
    make_grid, project_density, validate_params, FieldKind, FlowCase, FlowConfig, GridKind, Params,
    RadialField, RadialGrid, Theta,
};

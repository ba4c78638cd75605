//! Special functions, unit-interval quadrature, truncated Poisson weights and
//! seeded samplers shared by the other modules.

mod poisson;
mod quadrature;
mod sampling;
mod special;

pub use poisson::{poisson_truncate, poisson_truncate_capped, PoissonTruncation, DEFAULT_J_CAP};
pub use quadrature::{quad_rule, QuadRule, MAX_ORDER};
pub use sampling::{sample_chi2, splitmix64, SeedSpec};
pub use special::{digamma, log_beta, log_gamma};

pub(crate) use special::{digamma_unchecked, ln_beta_unchecked, ln_gamma_unchecked};

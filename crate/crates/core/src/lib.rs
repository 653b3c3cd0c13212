//! Capital-constrained hedging of equity-linked claims that maximizes the
//! expected success ratio `E^P[1{V_T >= D} + 1{V_T < D} V_T / D]`.
//!
//! The market is a finite binomial tree; non-market information (for example
//! policyholder survival) is revealed at fixed tree steps. The pipeline is
//!
//! 1. [`lattice`] and [`signals`] build the two sources of randomness,
//! 2. [`scenario`] joins them into one probability space with P and R,
//! 3. [`solver`] finds the optimal market-measurable target `Γ`,
//! 4. [`superhedge`] turns `Γ` into a self-financing strategy,
//! 5. [`dual`] and [`oracle`] certify the result independently.

pub mod claims;
pub mod config;
pub mod dual;
pub mod error;
pub mod lattice;
pub mod numeric;
pub mod oracle;
pub mod pipeline;
pub mod scenario;
pub mod signals;
pub mod solver;
pub mod superhedge;

pub use error::{HedgeError, Result};

//! The regular insurance model: state space, intensity kernel, payments and
//! discounting, plus the config document that bundles them.

mod discount;
mod grid;
mod kernel;
mod payments;
mod rates;
mod state;

pub mod config;
pub mod validate;

pub use discount::{Discount, DiscountSpec};
pub use grid::TimeGrid;
pub use kernel::{
    kernel_problems, total_rate, Atom, ContinuousFamily, ContinuousPart, Horizon, IntensityKernel, KernelProblem,
    ScaledKernel, WeightedSample,
};
pub use payments::{PaymentSpec, SojournLump, SojournRate, TransitionPayment};
pub use rates::{GompertzMakeham, RateFn, RateSpec};
pub use state::{State, StateLabel};

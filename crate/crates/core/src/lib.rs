//! Posted-price welfare maximization from revealed-preference feedback.
//!
//! A seller posts prices, a buyer drawn from an unknown population purchases
//! their favourite bundle, and the seller sees only that purchase. The crate
//! provides:
//!
//! - [`bun_to_price`]: learn prices that induce a target expected bundle.
//! - [`owel`]: maximize expected welfare over bundles, using the learnt
//!   prices as supergradients.
//! - [`unit_demand`]: the Gumbel-perturbed pricing pipeline for unit-demand
//!   buyers and indivisible goods.
//! - [`limited_supply`]: finite-horizon episodes with non-replenishable stock.
//! - [`ground_truth`]: exact oracles used to evaluate all of the above.

pub mod bun_to_price;
pub mod error;
pub mod ground_truth;
pub mod limited_supply;
pub mod market;
pub mod owel;
pub mod sgd;
pub mod types;
pub mod unit_demand;
pub mod valuations;
pub mod vector;

pub use error::{Error, Result};
pub use market::{BuyerDistribution, BuyerType, DemandOracle, MarketInstance, Mode, RepOracle};
pub use types::{project, shrunk_box, Bundle, CostVector, FeasibleSet, PriceVector, SupplyVector};
pub use valuations::{Regularity, Valuation};

// The guide's Rust snippets run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/markets.md")]
    mod markets {}
    #[doc = include_str!("../../../book/src/inducing.md")]
    mod inducing {}
    #[doc = include_str!("../../../book/src/welfare.md")]
    mod welfare {}
    #[doc = include_str!("../../../book/src/unit_demand.md")]
    mod unit_demand {}
    #[doc = include_str!("../../../book/src/limited_supply.md")]
    mod limited_supply {}
    #[doc = include_str!("../../../book/src/ground_truth.md")]
    mod ground_truth {}
}

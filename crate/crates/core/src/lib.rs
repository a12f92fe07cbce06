//! Game-theoretic racing strategies in a policy characteristic space.
//!
//! The crate is organized along the pipeline:
//!
//! - [`track`]: occupancy grid, centerline/raceline, Frenet projection
//! - [`sim`]: single-track vehicle dynamics, LiDAR and fixed-step rollouts
//! - [`planner`]: lattice/clothoid motion planner parameterized by cost weights
//! - [`pcs`]: characteristic functions, PCS actions and policy collections
//! - [`es`]: multi-objective CMA-ES policy synthesis and subset extraction
//! - [`game`]: game-tree enumeration and counterfactual regrets
//! - [`regret`]: the regret approximator (features, MLP, training, files)
//! - [`harness`]: online strategy, races, tournaments and statistics
//! - [`pipeline`]: environment construction and the collection/race glue

pub mod binio;
pub mod config;
pub mod error;
pub mod es;
pub mod game;
pub mod geom;
pub mod harness;
pub mod pcs;
pub mod pipeline;
pub mod planner;
pub mod regret;
pub mod sim;
pub mod track;

pub use config::Config;
pub use error::{Error, Result};

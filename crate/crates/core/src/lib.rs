//! Layered soil-condition maps built with ordinary kriging, and robotic
//! exploration strategies that use the kriging variance as their reward.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: field geometry, cells, penetrometer profiles and depth layers.
//! * [`variogram`]: experimental semivariograms and the bounded linear model.
//! * [`kriging`]: the ordinary kriging solver and layered variance maps.
//! * [`exploration`]: area-coverage, next-best-view and adaptive planners
//!   plus open-path TSP routing.
//! * [`simulation`]: surrogate ground-truth fields, the exploration loop and
//!   the error/variance metrics used to compare strategies.
//! * [`io`]: run configuration, CSV formats and reporting helpers.

pub mod error;
pub mod exploration;
pub mod grid;
pub mod io;
pub mod kriging;
pub mod simulation;
pub mod variogram;

pub use error::{Error, Result};
pub use grid::{CellIndex, DepthProfile, FieldGrid, GridValues, LayerSpec, Location, Sample};
pub use kriging::{KrigingSolution, KrigingSystem, LayerMap, LayeredModel};
pub use variogram::{ExperimentalVariogram, LagBin, LinearFit, VariogramParams};

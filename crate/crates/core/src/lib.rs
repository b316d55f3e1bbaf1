//! Zone partitioning for single-layer cut circuits: netlists and placed
//! footprints go in, conductive zone outlines and cut files come out.

pub mod board;
pub mod drc;
pub mod export;
pub mod footprint;
pub mod geom;
pub mod grid;
pub mod netmodel;
pub mod partition;
pub mod pipeline;
pub mod placement;

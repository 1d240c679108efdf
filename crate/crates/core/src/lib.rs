pub mod fixtures;
pub mod geometry;
pub mod metrics;
pub mod qa;
pub mod query;
pub mod render;
pub mod segcad;

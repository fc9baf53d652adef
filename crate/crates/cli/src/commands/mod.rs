pub mod bench;
pub mod cluster;
pub mod datasets;
pub mod gen;
pub mod plot;
pub mod stats;
pub mod tune;

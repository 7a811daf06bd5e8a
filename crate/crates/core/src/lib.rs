pub mod config;
pub mod data;
pub mod eval;
pub mod graph;
pub mod gst;
pub mod incremental;
pub mod numerics;
pub mod pipeline;
pub mod predictor;
pub mod seed;
pub mod sequence;
pub mod synth;

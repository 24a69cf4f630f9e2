pub mod bim;
pub mod calendar;
pub mod features;
pub mod geometry;
pub mod gru;
pub mod lookahead;
pub mod synth;
pub mod cli;

//! Batch driver for the Tucker-format SCF solver: geometry input, grid
//! ladders, box sweeps and their report files.

pub mod cache;
pub mod config;
pub mod driver;
pub mod geometry;
pub mod output;

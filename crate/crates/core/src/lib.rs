//! Neural-collapse laboratory.
//!
//! Trains small ReLU MLPs from scratch with SGD + momentum and measures how
//! tightly last-layer (and earlier-layer) features concentrate around class
//! means on the train and test splits.

pub mod numerics;
pub mod data;
pub mod network;
pub mod collapse;
pub mod harness;
pub mod cli;

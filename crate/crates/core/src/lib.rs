pub mod assign;
pub mod baselines;
pub mod censored;
pub mod datagen;
pub mod dataset;
pub mod energy;
pub mod error;
pub mod harness;
pub mod lds;
pub mod matrix;
pub mod rankmap;
pub mod rng;

//! Quasirandom (Sobol') and pseudorandom weight initialization for small
//! neural networks, plus the training and statistics needed to compare them.

pub mod data;
pub mod initializers;
pub mod linalg;
pub mod mt19937;
pub mod nn;
pub mod normal;
pub mod samplers;
pub mod seed_select;
pub mod seeding;
pub mod sobol;
pub mod stats;

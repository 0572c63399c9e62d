pub mod bands;
pub mod cli;
pub mod dist;
pub mod error;
pub mod mcquant;
pub mod procedures;
pub mod simulate;

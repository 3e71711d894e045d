//! Bit-parallel vector-composable arithmetic: bit-sliced dot products,
//! composable vector units, their power/area model and an accelerator-level
//! simulator over quantized DNN workloads.

pub mod bitslice;
pub mod cost;
pub mod cvu;
pub mod sim;
pub mod workloads;

pub mod cli;
pub mod digits;
pub mod dnet;
pub mod error;
pub mod expr;
pub mod fastgram;
pub mod halton;
pub mod kernels;
pub mod lattice;
pub mod lddata;
pub mod points;
pub mod rqmc;
pub mod rng;
pub mod transforms;

pub use error::{QmcError, Result};
pub use points::{BatchMeta, PointBatch, PointGenerator};

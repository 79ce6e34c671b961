//! Multi-modal multi-graph neighborhood embeddings: containers over
//! street-view and POI observations, modality edge layers, contrastive
//! triplet training, and the downstream evaluation protocol.

pub mod encoder;
pub mod error;
pub mod eval;
pub mod geo;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod sampler;
pub mod seeding;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

//! Contrastive language-vision training on a synthetic fashion catalog, with
//! retrieval, classification, linear-probe, grounding, and compositionality
//! evaluations.

pub mod encoder;
pub mod geom;
pub mod synthcat;
pub mod util;

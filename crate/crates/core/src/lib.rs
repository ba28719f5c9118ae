//! List decoding of Reed-Solomon codes with evaluation points in a subfield,
//! where decoded lists are pinned to an affine shift of a block-triangular-
//! Toeplitz (BTT) subspace, together with the subspace-design and BTT-evasive
//! machinery that certifies small list sizes.

pub mod capcode;
pub mod error;
pub mod evasive;
pub mod gf;
pub mod linalg;
pub mod par;
pub mod rs;
pub mod serial;
pub mod sim;

pub use error::{Error, Result};

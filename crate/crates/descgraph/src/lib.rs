//! Finite presentations of a family of infinite digraphs — those in which
//! every descendant set is a rooted q-ary tree — together with the
//! operations that make the family a combinatorial amalgamation class:
//! embeddings, free and identification-bounded amalgams, predecessor
//! completion, and an incremental construction of the generic (homogeneous)
//! limit with self-auditing checks.
//!
//! Entry points:
//! * [`presentation::Presentation`] — the core data structure;
//! * [`embed`] — embedding verification and enumeration;
//! * [`amalgam`] — amalgamation constructions and derived procedures;
//! * [`limit`] — the resumable limit-building engine;
//! * [`gamma`] — diagnostics for level-prefix structures.

pub mod amalgam;
pub mod canon;
pub mod dot;
pub mod embed;
pub mod error;
pub mod gamma;
pub mod gen;
pub mod limit;
pub mod presentation;
pub mod tree;

pub use error::{Error, Result};
pub use presentation::{ClassBound, Presentation, VertexRef};

//! Numerical toolkit for loop groups, Hardy-space splittings, parallel
//! transport and Fourier decompositions of loop bundles.
//!
//! The crate is organised bottom-up:
//!
//! - [`fourier`]: truncated Fourier series in `LCⁿ`, the `L₊`/`L₋` projections.
//! - [`subspace`]: orthonormal frames, filtrations, `W ∩ zW⊥`.
//! - [`loopgroup`]: matrix loops in `LU(n)`, det-winding, generator loops.
//! - [`transport`]: connections, RK4 parallel transport, holonomy.
//! - [`twist`]: quasi-periodic sections of twisted loop bundles.
//! - [`decomp`]: auditing Fourier decompositions and reducing cocycles.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and runs sequentially otherwise.

pub mod decomp;
pub mod error;
pub mod fourier;
pub mod linalg;
pub mod loopgroup;
pub mod par;
pub mod subspace;
pub mod transport;
pub mod twist;

pub use decomp::{audit_decomposition, build_model_decomposition, filtration, reduction_cocycle, AuditReport, SubspaceFamily};
pub use error::{Error, Result};
pub use fourier::TruncatedLoop;
pub use linalg::{CMatrix, CVector, C64};
pub use loopgroup::{loop_from_subspace, random_loop, LoopGroupElement};
pub use subspace::{expand_filtration, FiltrationSubspace, SubspaceFrame};
pub use transport::{holonomy, parallel_transport, BaseLoop, ConnectionSpec, TransportFrame};
pub use twist::{j_apply, j_embed, j_extend, module_scale, phi_inverse, rotate, GaugeTwist, TwistedSection};

//! Lossless compression of advisory lookup tables into a single reduced
//! ordered binary decision diagram, with property checking, serialization
//! and standalone evaluator generation.
//!
//! The pipeline: a table ([`table`]) is encoded state by state into Gray-coded
//! cubes ([`codec`]), merged into one diagram per advisory ([`compress`]),
//! reordered by sifting ([`reorder`]), proven to partition the state space,
//! and folded into one selector-guarded root. The result can be checked
//! against interval properties ([`verify`]), saved or turned into C source
//! ([`emit`]) and timed ([`bench`]).

pub mod bdd;
pub mod bench;
pub mod codec;
pub mod compress;
pub mod emit;
pub mod reorder;
pub mod table;
pub mod verify;

pub use bdd::{BddError, BddNode, Manager, NodeRef, VarId};
pub use codec::{
    gray_decode, gray_encode, value_bounds_to_index_set, Advisory, BitLayout, CodecError,
    Dimension, QuantizationGrid, StateIndex,
};
pub use compress::{
    classify, compress, BuildOptions, BuildReport, CompressError, CompressOptions, Compressed,
    CoverageMode, GlobalRoot, SelectorMap,
};
pub use reorder::{sift, ReorderPolicy, ReorderReport};
pub use table::{generate_synthetic, AdvisoryTable, TableError};
pub use verify::{check, brute_force_check, PropertySpec, Verdict};

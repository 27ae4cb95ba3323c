//! File formats, synthetic generators and the `tnet` command line.

pub mod cli;
pub mod format;
pub mod gen;

pub use cli::{run, run_with};
pub use format::{
    dense_from_bytes, dense_to_bytes, read_dense, write_dense, FormatError, Network, Tag, TnzFile,
};
pub use gen::{gen_synthetic, GenKind, GenParams};

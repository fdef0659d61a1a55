//! Structured array containers: nested, named collections of dense arrays
//! sharing leading dimensions, with structure-wide sliced read/write,
//! scalar broadcast, placeholder skipping, allocation from examples, and an
//! optional shared backing for inter-worker use.

mod array;
mod dump;
mod spec;
mod value;

pub use array::{Backing, DimSel, IndexExpr, LeafArray, RowsView, StructArray, WriteSrc};
pub use dump::{dump, load, load_bytes};
pub use spec::{ElemKind, LeafDesc, SpecNode, StructSpec};
pub use value::{build_spec_from_example, LeafBuf, StructValue};

pub use array::fnv1a;

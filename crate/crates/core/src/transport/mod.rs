//! Monotone triangular transport maps built from rectified Hermite expansions.

mod component;
mod hermite;
mod io;
mod map;
mod multi_index;
mod rectifier;

pub use component::{ComponentSlice, MonotoneComponent, DEFAULT_QUADRATURE_ORDER, MAX_DEGREE};
pub use hermite::{hermite_features, hermite_values, hermite_values_and_derivatives};
pub use io::{MapFile, StoredMap, MAP_FORMAT, MAP_FORMAT_VERSION};
pub use map::{map_forward, map_invert, BlockTriangularMap, Ordering, Standardization, TransportMap, TriangularMap};
pub use multi_index::{total_degree_size, MultiIndexSet};
pub use rectifier::Rectifier;

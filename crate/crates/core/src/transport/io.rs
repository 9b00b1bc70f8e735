use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BlockTriangularMap, TriangularMap};
use crate::error::{Error, Result};

pub const MAP_FORMAT: &str = "tmeig-transport-map";
pub const MAP_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredMap {
    Triangular(TriangularMap),
    Block(BlockTriangularMap),
}

/// Versioned on-disk representation of a trained map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub format: String,
    pub version: u32,
    pub map: StoredMap,
}

impl MapFile {
    pub fn new(map: StoredMap) -> Self {
        Self {
            format: MAP_FORMAT.to_string(),
            version: MAP_FORMAT_VERSION,
            map,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if file.format != MAP_FORMAT {
            return Err(Error::Serialization(format!("unknown format tag {:?}", file.format)));
        }
        if file.version != MAP_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported version {} (expected {MAP_FORMAT_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::map::tests::random_map;
    use crate::transport::{Ordering, TransportMap};

    #[test]
    fn json_round_trip_is_exact() {
        let full = random_map(4, 3, 9);
        let block = BlockTriangularMap::from_triangular(Ordering::XThenY, &full, 1).unwrap();
        for stored in [StoredMap::Triangular(full.clone()), StoredMap::Block(block)] {
            let text = MapFile::new(stored.clone()).to_json().unwrap();
            let back = MapFile::from_json(&text).unwrap();
            assert_eq!(back.map, stored);
        }
        let text = MapFile::new(StoredMap::Triangular(full.clone())).to_json().unwrap();
        assert!(text.contains("\"multi_indices\""));
        assert!(text.contains("\"softplus\""));
        assert!(text.contains("\"quadrature_order\": 32"));
        if let StoredMap::Triangular(m) = MapFile::from_json(&text).unwrap().map {
            let z = [0.1, 0.2, 0.3, 0.4];
            assert_eq!(m.forward(&z).unwrap(), full.forward(&z).unwrap());
        }
    }

    #[test]
    fn version_and_shape_are_checked() {
        let text = MapFile::new(StoredMap::Triangular(random_map(2, 1, 0)))
            .to_json()
            .unwrap();
        let bumped = text.replace("\"version\": 1", "\"version\": 99");
        assert!(MapFile::from_json(&bumped).is_err());
        let bad = text.replacen("\"coefficients\": [", "\"coefficients\": [1.0, ", 1);
        assert!(MapFile::from_json(&bad).is_err());
    }
}

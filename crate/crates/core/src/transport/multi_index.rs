use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of multi-indices `α ∈ ℕ^k` selecting tensor-product Hermite features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u32>>", into = "Vec<Vec<u32>>")]
pub struct MultiIndexSet {
    dim: usize,
    indices: Vec<Vec<u32>>,
}

impl MultiIndexSet {
    pub fn new(dim: usize, indices: Vec<Vec<u32>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("multi-index dimension must be positive"));
        }
        let mut seen = HashSet::with_capacity(indices.len());
        for a in &indices {
            if a.len() != dim {
                return Err(Error::arg(format!("multi-index {a:?} does not have length {dim}")));
            }
            if !seen.insert(a.clone()) {
                return Err(Error::arg(format!("duplicate multi-index {a:?}")));
            }
        }
        Ok(Self { dim, indices })
    }

    /// All `α` with `|α| ≤ degree`, ordered by total degree and then
    /// lexicographically.
    pub fn total_degree(dim: usize, degree: u32) -> Self {
        let mut out = Vec::new();
        let mut cur = vec![0u32; dim];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos == cur.len() {
                out.push(cur.clone());
                return;
            }
            for d in 0..=left {
                cur[pos] = d;
                rec(pos + 1, left - d, cur, out);
            }
            cur[pos] = 0;
        }
        rec(0, degree, &mut cur, &mut out);
        out.sort_by(|a, b| {
            let (sa, sb): (u32, u32) = (a.iter().sum(), b.iter().sum());
            sa.cmp(&sb).then_with(|| b.cmp(a))
        });
        Self { dim, indices: out }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, j: usize) -> &[u32] {
        &self.indices[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.indices.iter().map(Vec::as_slice)
    }

    /// Largest degree appearing in each coordinate.
    pub fn max_degrees(&self) -> Vec<u32> {
        let mut m = vec![0; self.dim];
        for a in &self.indices {
            for (mj, aj) in m.iter_mut().zip(a) {
                *mj = (*mj).max(*aj);
            }
        }
        m
    }

    /// Every `α − e_j` with `α_j > 0` is also present.
    pub fn is_downward_closed(&self) -> bool {
        let set: HashSet<&Vec<u32>> = self.indices.iter().collect();
        self.indices.iter().all(|a| {
            (0..self.dim).filter(|&j| a[j] > 0).all(|j| {
                let mut b = a.clone();
                b[j] -= 1;
                set.contains(&b)
            })
        })
    }
}

impl TryFrom<Vec<Vec<u32>>> for MultiIndexSet {
    type Error = Error;

    fn try_from(v: Vec<Vec<u32>>) -> Result<Self> {
        let dim = v.first().map_or(0, Vec::len);
        Self::new(dim, v)
    }
}

impl From<MultiIndexSet> for Vec<Vec<u32>> {
    fn from(s: MultiIndexSet) -> Self {
        s.indices
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Size of the total-degree set, `C(dim + degree, degree)`.
pub fn total_degree_size(dim: usize, degree: u32) -> usize {
    binomial(dim as u64 + degree as u64, degree as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_degree_counts() {
        for dim in 1..6 {
            for p in 0..4 {
                let s = MultiIndexSet::total_degree(dim, p);
                assert_eq!(s.len(), total_degree_size(dim, p));
                assert!(s.is_downward_closed());
            }
        }
        assert_eq!(total_degree_size(7, 2), 36);
        let s = MultiIndexSet::total_degree(2, 1);
        assert_eq!(s.get(0), &[0, 0]);
        assert_eq!(s.max_degrees(), vec![1, 1]);
    }

    #[test]
    fn rejects_duplicates_and_bad_lengths() {
        assert!(MultiIndexSet::new(2, vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(MultiIndexSet::new(2, vec![vec![0]]).is_err());
        assert!(MultiIndexSet::new(0, vec![]).is_err());
        let gap = MultiIndexSet::new(1, vec![vec![0], vec![2]]).unwrap();
        assert!(!gap.is_downward_closed());
    }
}

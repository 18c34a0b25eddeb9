use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Assignment of observations to `k` folds (ids `0..k`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    /// Indices in fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == f).collect()
    }

    /// Indices outside fold `f`, ascending.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

/// Random partition into `k` nearly equal folds. A uniform permutation is
/// cut into consecutive blocks, the first `n mod k` of which get one extra
/// index.
pub fn partition_folds(n: usize, k: usize, rng: &mut RngStream) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::BadFoldCount { n, k });
    }
    let perm = rng.permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &perm[pos..pos + size] {
            fold_of[i] = f;
        }
        pos += size;
    }
    Ok(FoldAssignment { fold_of, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_partition() {
        let mut rng = RngStream::new(1, 2);
        let f = partition_folds(10, 5, &mut rng).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
        let f = partition_folds(11, 5, &mut rng).unwrap();
        assert_eq!(f.sizes(), vec![3, 2, 2, 2, 2]);
        let mut all: Vec<usize> = (0..5).flat_map(|k| f.members(k)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(f.complement(0).len(), 8);
    }

    #[test]
    fn deterministic_and_validated() {
        let a = partition_folds(30, 4, &mut RngStream::new(3, 3)).unwrap();
        let b = partition_folds(30, 4, &mut RngStream::new(3, 3)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(partition_folds(3, 5, &mut RngStream::new(0, 0)), Err(Error::BadFoldCount { .. })));
        assert!(partition_folds(3, 1, &mut RngStream::new(0, 0)).is_err());
    }
}

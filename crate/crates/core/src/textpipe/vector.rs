use serde::{Deserialize, Serialize};

/// Sparse feature vector. Indices are strictly increasing; `space` identifies
/// the feature space (vocabulary plus any appended blocks) it was built in.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
    pub space: u64,
}

impl FeatureVector {
    pub fn zero(dim: usize, space: u64) -> Self {
        Self { indices: Vec::new(), values: Vec::new(), dim, space }
    }

    /// Builds from unordered pairs; duplicate indices are summed and zeros dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>, dim: usize, space: u64) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            debug_assert!((i as usize) < dim, "index {i} outside dim {dim}");
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = Self { indices, values, dim, space };
        out.drop_zeros();
        out
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|v| *v != 0.0) {
            return;
        }
        let (i, v): (Vec<u32>, Vec<f64>) =
            self.indices.iter().zip(&self.values).filter(|(_, v)| **v != 0.0).map(|(i, v)| (*i, *v)).unzip();
        self.indices = i;
        self.values = v;
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
        self
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Appends `block` (dense offsets relative to the current dim) and grows
    /// the dimension by `block_dim`.
    pub fn concat(mut self, block: &[(usize, f64)], block_dim: usize, space: u64) -> Self {
        let base = self.dim as u32;
        for &(off, v) in block {
            debug_assert!(off < block_dim);
            if v != 0.0 {
                self.indices.push(base + off as u32);
                self.values.push(v);
            }
        }
        self.dim += block_dim;
        self.space = space;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_sorted_and_merged() {
        let v = FeatureVector::from_pairs(vec![(3, 1.0), (1, 2.0), (3, 1.0), (2, 0.0)], 5, 0);
        assert_eq!(v.indices, [1, 3]);
        assert_eq!(v.values, [2.0, 2.0]);
    }

    #[test]
    fn single_component_normalizes_to_one() {
        let v = FeatureVector::from_pairs(vec![(4, 3.7)], 10, 0).normalized();
        assert_eq!(v.values, [1.0]);
        assert_eq!(FeatureVector::zero(3, 0).normalized().norm(), 0.0);
    }

    #[test]
    fn dot_and_concat() {
        let a = FeatureVector::from_pairs(vec![(0, 1.0), (2, 2.0)], 3, 0);
        let b = FeatureVector::from_pairs(vec![(2, 3.0)], 3, 0);
        assert_eq!(a.dot(&b), 6.0);
        let c = a.concat(&[(1, 5.0), (0, 0.0)], 2, 9);
        assert_eq!(c.indices, [0, 2, 4]);
        assert_eq!(c.dim, 5);
        assert_eq!(c.space, 9);
    }
}

//! Sorted sparse vectors over the flat parameter space.

/// A sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self {
            indices: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
        }
    }

    /// Every index of a length-`n` vector, all zero.
    pub fn dense_zeros(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            values: vec![0.0; n],
        }
    }

    /// Build from a dense slice, keeping every entry (including zeros).
    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            indices: (0..values.len()).collect(),
            values: values.to_vec(),
        }
    }

    /// Build from (index, value) pairs; panics unless indices are strictly increasing.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut out = Self::new();
        for (i, v) in pairs {
            out.push(i, v);
        }
        out
    }

    /// Append an entry. Indices must be pushed in strictly increasing order.
    #[inline]
    pub fn push(&mut self, index: usize, value: f64) {
        assert!(
            self.indices.last().is_none_or(|&last| last < index),
            "sparse indices must be strictly increasing"
        );
        self.indices.push(index);
        self.values.push(value);
    }

    pub fn clear(&mut self) {
        self.indices.clear();
        self.values.clear();
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Value at `index`, zero when absent.
    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// `a + scale_b * b` merged over the union of supports.
    ///
    /// Entries present in only one operand are copied (scaled) without an
    /// addition, so the result is bit-identical to element-wise evaluation.
    pub fn combine(a: &SparseVec, b: &SparseVec, scale_b: f64) -> SparseVec {
        Self::combine_scaled(a, 1.0, b, scale_b)
    }

    /// `scale_a * a + scale_b * b` merged over the union of supports.
    pub fn combine_scaled(a: &SparseVec, scale_a: f64, b: &SparseVec, scale_b: f64) -> SparseVec {
        let mut out = SparseVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let ia = a.indices.get(i).copied().unwrap_or(usize::MAX);
            let ib = b.indices.get(j).copied().unwrap_or(usize::MAX);
            if ia < ib {
                out.push(ia, scale_a * a.values[i]);
                i += 1;
            } else if ib < ia {
                out.push(ib, scale_b * b.values[j]);
                j += 1;
            } else {
                out.push(ia, scale_a * a.values[i] + scale_b * b.values[j]);
                i += 1;
                j += 1;
            }
        }
        out
    }
}

use crate::sparse::SparseVec;

/// Accumulating eligibility trace with an explicit support set.
///
/// The support lists every index touched since the last reset, so entries
/// outside it are exactly zero and per-step work is proportional to the
/// number of parameters that have been active this episode.
#[derive(Debug, Clone)]
pub struct Trace {
    values: Vec<f64>,
    support: Vec<usize>,
    in_support: Vec<bool>,
}

impl Trace {
    pub fn new(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            support: Vec::new(),
            in_support: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Indices that may be non-zero, in first-touched order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn reset(&mut self) {
        for &i in &self.support {
            self.values[i] = 0.0;
            self.in_support[i] = false;
        }
        self.support.clear();
    }

    /// Add indices to the support without changing values.
    pub fn touch(&mut self, indices: &[usize]) {
        for &i in indices {
            if !self.in_support[i] {
                self.in_support[i] = true;
                self.support.push(i);
            }
        }
    }

    /// z ← decay·z + g.
    pub fn decay_and_add(&mut self, decay: f64, g: &SparseVec) {
        self.touch(g.indices());
        for &i in &self.support {
            self.values[i] *= decay;
        }
        for (i, v) in g.iter() {
            self.values[i] += v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.support.iter().map(|&i| self.values[i] * self.values[i]).sum()
    }
}

/// Dense scratch buffer holding one sparse vector at a time.
#[derive(Debug, Clone)]
pub(crate) struct Scatter {
    dense: Vec<f64>,
    touched: Vec<usize>,
}

impl Scatter {
    pub fn new(n: usize) -> Self {
        Self {
            dense: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    pub fn load(&mut self, v: &SparseVec) {
        self.clear();
        for (i, x) in v.iter() {
            self.dense[i] = x;
        }
        self.touched.extend_from_slice(v.indices());
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.dense[i]
    }

    pub fn clear(&mut self) {
        for &i in &self.touched {
            self.dense[i] = 0.0;
        }
        self.touched.clear();
    }
}

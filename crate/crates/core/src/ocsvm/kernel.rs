use crate::matrix::{squared_distance, Matrix};
use crate::{par, Error, Result};

/// `exp(-gamma * |a - b|^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("kernel arguments of length {} and {}", a.len(), b.len())));
    }
    Ok(rbf(a, b, gamma))
}

#[inline]
pub(crate) fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

/// Kernel matrix rows computed on demand and kept in a least-recently-used
/// cache bounded by a byte budget.
pub(crate) struct KernelCache<'a> {
    x: &'a Matrix,
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    last_use: Vec<u64>,
    clock: u64,
    resident: usize,
    capacity: usize,
    pub(crate) misses: u64,
}

impl<'a> KernelCache<'a> {
    pub(crate) fn new(x: &'a Matrix, gamma: f64, cache_bytes: usize) -> Self {
        let row_bytes = (x.rows() * std::mem::size_of::<f64>()).max(1);
        Self {
            x,
            gamma,
            rows: vec![None; x.rows()],
            last_use: vec![0; x.rows()],
            clock: 0,
            resident: 0,
            capacity: (cache_bytes / row_bytes).max(2),
            misses: 0,
        }
    }

    fn compute(&self, i: usize) -> Vec<f64> {
        let xi = self.x.row(i);
        par::map_range(self.x.rows(), |t| rbf(xi, self.x.row(t), self.gamma))
    }

    fn ensure(&mut self, i: usize) {
        self.clock += 1;
        self.last_use[i] = self.clock;
        if self.rows[i].is_some() {
            return;
        }
        self.misses += 1;
        if self.resident >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&t| self.rows[t].is_some() && t != i)
                .min_by_key(|&t| self.last_use[t])
                .expect("cache holds at least one row");
            self.rows[victim] = None;
            self.resident -= 1;
        }
        self.rows[i] = Some(self.compute(i));
        self.resident += 1;
    }

    /// Rows `i` and `j`, both resident at the same time.
    pub(crate) fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(i);
        self.ensure(j);
        (
            self.rows[i].as_deref().expect("resident"),
            self.rows[j].as_deref().expect("resident"),
        )
    }

    pub(crate) fn row(&mut self, i: usize) -> &[f64] {
        self.ensure(i);
        self.rows[i].as_deref().expect("resident")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.3).unwrap(), 1.0);
        let k = rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((k - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(rbf_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn cache_evicts_least_recently_used() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let mut c = KernelCache::new(&x, 1.0, 2 * 4 * 8);
        c.row(0);
        c.row(1);
        c.row(0);
        c.row(2);
        assert!(c.rows[0].is_some() && c.rows[1].is_none() && c.rows[2].is_some());
        assert_eq!(c.misses, 3);
        let r = c.row(3).to_vec();
        assert!((r[1] - (-4.0f64).exp()).abs() < 1e-15);
    }
}

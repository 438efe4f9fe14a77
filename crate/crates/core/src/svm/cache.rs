use super::KernelSpec;
use crate::dataset::Dataset;

/// LRU cache of kernel matrix rows for one training run.
pub(super) struct KernelCache<'a> {
    data: &'a Dataset,
    kernel: KernelSpec,
    budget: usize,
    rows: Vec<Option<Vec<f64>>>,
    last_used: Vec<u64>,
    clock: u64,
    resident: usize,
    diag: Vec<f64>,
}

impl<'a> KernelCache<'a> {
    pub fn new(data: &'a Dataset, kernel: KernelSpec, budget: usize) -> Self {
        let l = data.len();
        let diag = (0..l)
            .map(|i| kernel.eval_unchecked(data.point(i), data.point(i)))
            .collect();
        KernelCache {
            data,
            kernel,
            budget: budget.max(2),
            rows: vec![None; l],
            last_used: vec![0; l],
            clock: 0,
            resident: 0,
            diag,
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn ensure(&mut self, i: usize) {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if self.rows[i].is_some() {
            return;
        }
        if self.resident >= self.budget {
            let victim = (0..self.rows.len())
                .filter(|&k| k != i && self.rows[k].is_some())
                .min_by_key(|&k| self.last_used[k])
                .expect("cache holds at least one other row");
            self.rows[victim] = None;
            self.resident -= 1;
        }
        let xi = self.data.point(i);
        let row = (0..self.data.len())
            .map(|k| self.kernel.eval_unchecked(xi, self.data.point(k)))
            .collect();
        self.rows[i] = Some(row);
        self.resident += 1;
    }

    /// Kernel rows `i` and `j`, both resident on return.
    pub fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(i);
        self.ensure(j);
        (
            self.rows[i].as_deref().expect("row i resident"),
            self.rows[j].as_deref().expect("row j resident"),
        )
    }

    #[cfg(test)]
    pub fn resident(&self) -> usize {
        self.resident
    }
}

//! Natural selection of the children evaluated in one iteration.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// Children with the largest `||V^+ x||_2`.
    NormEstimate,
    /// Children of the parents with the largest norm.
    ParentNorm,
}

#[derive(Debug, Clone)]
pub struct SelectionOptions {
    /// Iterations with `NormEstimate`, then with `ParentNorm`.
    pub schedule: (usize, usize),
    /// Fraction of the queue taken per iteration.
    pub fraction: f64,
    /// Batches never shrink below this many children.
    pub min_batch: usize,
    /// Children waiting this many iterations are taken unconditionally.
    pub age_threshold: usize,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self { schedule: (3, 1), fraction: 0.1, min_batch: 1000, age_threshold: 10 }
    }
}

impl SelectionOptions {
    pub fn strategy(&self, iteration: usize) -> Strategy {
        let (a, b) = self.schedule;
        if a + b == 0 || iteration % (a + b) < a {
            Strategy::NormEstimate
        } else {
            Strategy::ParentNorm
        }
    }

    pub fn batch(&self, queue_len: usize, matrices: usize) -> usize {
        let frac = (self.fraction * queue_len as f64).ceil() as usize;
        frac.max(self.min_batch).max(2 * matrices)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Pending {
    pub parent: usize,
    pub matrix: usize,
    /// Iteration in which the child entered the queue.
    pub born: usize,
}

/// Indices into `queue`. Entries are ranked by `score` (higher first, ties
/// by position); every sibling of a chosen entry is taken as well, and so
/// is every entry older than the age threshold.
pub fn natural_selection(queue: &[Pending], score: &[f64], iteration: usize, batch: usize, age_threshold: usize) -> Vec<usize> {
    if queue.len() <= batch {
        return (0..queue.len()).collect();
    }
    let mut order: Vec<usize> = (0..queue.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut parents = std::collections::BTreeSet::new();
    for &i in order.iter().take(batch) {
        parents.insert(queue[i].parent);
    }
    for p in queue.iter().filter(|p| iteration.saturating_sub(p.born) >= age_threshold) {
        parents.insert(p.parent);
    }
    (0..queue.len()).filter(|&i| parents.contains(&queue[i].parent)).collect()
}

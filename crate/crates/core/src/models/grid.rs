use crate::{Error, Result};

/// Uniform `n × n` node grid on the unit square, row-major with the bottom row first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid(alloc::format!("grid needs at least 3 nodes per side, got {n}")));
        }
        Ok(Grid { n })
    }

    /// Nodes per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    /// Total number of nodes, `n²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node in column `i` (x) and row `j` (y).
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// `(i, j)` of a node index.
    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.n, node / self.n)
    }

    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij(node);
        let h = self.spacing();
        (i as f64 * h, j as f64 * h)
    }

    pub fn is_interior(&self, node: usize) -> bool {
        let (i, j) = self.ij(node);
        i > 0 && j > 0 && i + 1 < self.n && j + 1 < self.n
    }

    /// Grid-graph neighbours (no wrap-around).
    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.ij(node);
        let n = self.n;
        [
            (i > 0).then(|| node - 1),
            (i + 1 < n).then(|| node + 1),
            (j > 0).then(|| node - n),
            (j + 1 < n).then(|| node + n),
        ]
        .into_iter()
        .flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.node(1, 2), 9);
        assert_eq!(g.ij(9), (1, 2));
        assert_eq!(g.coords(g.node(3, 0)), (1.0, 0.0));
        assert_eq!(g.neighbours(0).count(), 2);
        assert_eq!(g.neighbours(g.node(1, 1)).count(), 4);
        assert!(Grid::new(2).is_err());
    }
}

//! Transport pairs and the per-port subset families over them.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StowError};

/// Ordered transport pairs `(pol, pod)` with 1-based ports and `pol < pod`.
///
/// Pairs are sorted lexicographically, so the index of `(i, j)` is a closed
/// form in `i`, `j` and `N_P`. Subset queries return transport indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportIndex {
    n_ports: usize,
    pairs: Vec<(usize, usize)>,
}

impl TransportIndex {
    pub fn new(n_ports: usize) -> Result<Self> {
        if n_ports < 2 {
            return Err(StowError::InvalidConfig(format!(
                "n_ports must be >= 2, got {n_ports}"
            )));
        }
        let mut pairs = Vec::with_capacity(n_ports * (n_ports - 1) / 2);
        for i in 1..=n_ports {
            for j in i + 1..=n_ports {
                pairs.push((i, j));
            }
        }
        Ok(Self { n_ports, pairs })
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair(&self, tr: usize) -> (usize, usize) {
        self.pairs[tr]
    }

    /// Index of `(i, j)`; panics when `i >= j` or either port is out of range.
    pub fn index_of(&self, i: usize, j: usize) -> usize {
        assert!(1 <= i && i < j && j <= self.n_ports, "bad transport ({i},{j})");
        let n = self.n_ports;
        // pairs with pol < i come first: sum_{i'<i} (n - i')
        (i - 1) * n - (i - 1) * i / 2 + (j - i - 1)
    }

    fn filter(&self, keep: impl Fn(usize, usize) -> bool) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(|&t| {
                let (i, j) = self.pairs[t];
                keep(i, j)
            })
            .collect()
    }

    /// On board when leaving `p`: `i <= p < j`.
    pub fn onboard(&self, p: usize) -> Vec<usize> {
        self.filter(|i, j| i <= p && j > p)
    }

    /// Remaining on board through `p`: `i < p < j`.
    pub fn rob(&self, p: usize) -> Vec<usize> {
        self.filter(|i, j| i < p && j > p)
    }

    /// Discharged at `p`.
    pub fn discharge(&self, p: usize) -> Vec<usize> {
        self.filter(|_, j| j == p)
    }

    /// Loaded at `p`.
    pub fn load(&self, p: usize) -> Vec<usize> {
        self.filter(|i, _| i == p)
    }

    /// Handled at `p`: loads followed by discharges.
    pub fn moves(&self, p: usize) -> Vec<usize> {
        let mut v = self.load(p);
        v.extend(self.discharge(p));
        v
    }

    /// Largest onboard set size over all ports.
    pub fn max_onboard(&self) -> usize {
        (1..=self.n_ports).map(|p| self.onboard(p).len()).max().unwrap_or(0)
    }
}

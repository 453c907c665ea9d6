//! Spectral radius of ego interaction matrices.
//!
//! The ego matrix of node `v` over a bin window is symmetric and star-shaped:
//! only the `v` row and column are non-zero, holding the interaction weight of
//! each partner. Its spectral radius has the closed form `sqrt(sum w_u^2)`;
//! [`power_iteration`] is the generic route for arbitrary symmetric matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::snapshot::SnapshotSequence;

/// Symmetric sparse matrix in CSR form (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds from upper- or lower-triangle entries `(i, j, value)`; each
    /// off-diagonal entry is mirrored. Repeated entries add up.
    pub fn from_entries(dim: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len() * 2);
        for &(i, j, x) in entries {
            assert!(i < dim && j < dim, "entry ({i}, {j}) outside {dim}x{dim}");
            full.push((i, j, x));
            if i != j {
                full.push((j, i, x));
            }
        }
        full.sort_unstable_by_key(|e| (e.0, e.1));
        let mut offsets = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(full.len());
        let mut vals: Vec<f64> = Vec::with_capacity(full.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, x) in full {
            if last == Some((i, j)) {
                *vals.last_mut().expect("previous entry") += x;
                continue;
            }
            last = Some((i, j));
            offsets[i + 1] += 1;
            cols.push(j);
            vals.push(x);
        }
        for i in 0..dim {
            offsets[i + 1] += offsets[i];
        }
        SymmetricMatrix {
            dim,
            offsets,
            cols,
            vals,
        }
    }

    /// Star matrix: hub at index 0, leaf `k + 1` carries `weights[k]`.
    pub fn star(weights: &[f64]) -> Self {
        let entries: Vec<_> = weights
            .iter()
            .enumerate()
            .map(|(k, &w)| (0, k + 1, w))
            .collect();
        Self::from_entries(weights.len() + 1, &entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub radius: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v * v).sum())
}

/// Spectral radius by power iteration from the all-ones vector.
///
/// The estimate is `||A x_k||` for unit `x_k`, which converges to the
/// spectral radius of a symmetric matrix even when `-rho` is also an
/// eigenvalue (bipartite structure, as in star matrices). Stops when two
/// successive estimates differ by at most `tol * max(1, estimate)`.
pub fn power_iteration(m: &SymmetricMatrix, tol: f64, max_iter: usize) -> PowerIteration {
    let n = m.dim();
    if n == 0 {
        return PowerIteration {
            radius: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut x = vec![1.0 / libm::sqrt(n as f64); n];
    let mut y = vec![0.0; n];
    let mut prev = f64::NAN;
    for it in 1..=max_iter.max(1) {
        m.mul_vec(&x, &mut y);
        let lambda = norm(&y);
        if lambda == 0.0 {
            return PowerIteration {
                radius: 0.0,
                iterations: it,
                converged: true,
            };
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / lambda;
        }
        if (lambda - prev).abs() <= tol * lambda.max(1.0) {
            return PowerIteration {
                radius: lambda,
                iterations: it,
                converged: true,
            };
        }
        prev = lambda;
    }
    PowerIteration {
        radius: prev,
        iterations: max_iter.max(1),
        converged: false,
    }
}

/// Default stopping rule: tolerance `1e-10`, at most `10 * dim` iterations.
pub fn power_iteration_default(m: &SymmetricMatrix) -> PowerIteration {
    power_iteration(m, 1e-10, 10 * m.dim())
}

/// Closed-form spectral radius of a star matrix with leaf weights `weights`.
pub fn star_radius(weights: &[f64]) -> f64 {
    libm::sqrt(weights.iter().map(|w| w * w).sum())
}

/// Interaction totals between `v` and each partner over a bin window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgoCounts {
    /// `(partner index, events in either direction)`, ascending by partner.
    pub partners: Vec<(u32, u64)>,
    pub window_len: usize,
}

impl EgoCounts {
    pub fn sum_of_squares(&self) -> u128 {
        self.partners
            .iter()
            .map(|&(_, c)| u128::from(c) * u128::from(c))
            .sum()
    }

    /// Per-partner weights, divided by the window length when `normalize`.
    pub fn weights(&self, normalize: bool) -> Vec<f64> {
        let d = if normalize { self.window_len as f64 } else { 1.0 };
        self.partners.iter().map(|&(_, c)| c as f64 / d).collect()
    }

    /// `sqrt(sum w^2)` of the (optionally normalized) star matrix.
    pub fn radius(&self, normalize: bool) -> f64 {
        let r = libm::sqrt(self.sum_of_squares() as f64);
        if normalize {
            r / self.window_len as f64
        } else {
            r
        }
    }

    /// Whether the spectral radius strictly exceeds `threshold`. Compared in
    /// squared form so integer thresholds are decided exactly.
    pub fn exceeds(&self, threshold: f64, normalize: bool) -> bool {
        let scale = if normalize { self.window_len as f64 } else { 1.0 };
        let bound = threshold * scale;
        if bound < 0.0 {
            return true;
        }
        self.sum_of_squares() as f64 > bound * bound
    }

    pub fn matrix(&self, normalize: bool) -> SymmetricMatrix {
        SymmetricMatrix::star(&self.weights(normalize))
    }
}

/// Reusable scratch space for [`ego_counts`].
#[derive(Debug, Clone, Default)]
pub struct EgoScratch {
    acc: Vec<u64>,
    touched: Vec<u32>,
}

/// Counts events between `v` and every other node, either direction, over
/// the inclusive bin window.
pub fn ego_counts(
    snap: &SnapshotSequence,
    v: usize,
    window: RangeInclusive<usize>,
    scratch: &mut EgoScratch,
) -> EgoCounts {
    let n = snap.node_count();
    if scratch.acc.len() < n {
        scratch.acc.resize(n, 0);
    }
    scratch.touched.clear();
    let window_len = window.end() + 1 - window.start();
    let v32 = v as u32;
    for t in window {
        let bin = snap.bin(t);
        for e in bin.outgoing(v32) {
            let slot = &mut scratch.acc[e.target as usize];
            if *slot == 0 {
                scratch.touched.push(e.target);
            }
            *slot += u64::from(e.count);
        }
        for e in bin.incoming(v32) {
            let slot = &mut scratch.acc[e.source as usize];
            if *slot == 0 {
                scratch.touched.push(e.source);
            }
            *slot += u64::from(e.count);
        }
    }
    scratch.touched.sort_unstable();
    let partners = scratch
        .touched
        .iter()
        .map(|&u| {
            let c = scratch.acc[u as usize];
            scratch.acc[u as usize] = 0;
            (u, c)
        })
        .collect();
    EgoCounts {
        partners,
        window_len,
    }
}

//! Interval matrices and the algebra the certificates need.
//!
//! An interval matrix is the set of real matrices lying entrywise between a
//! lower and an upper bound matrix. Intervals are closed; entries are stored
//! dense row-major via [`nalgebra::DMatrix`].

use nalgebra::DMatrix;
use rand::Rng;

use crate::{Error, Result};

/// Default cap on the number of free (positive-radius) entries for vertex
/// enumeration; 2^24 combinations is the worst case admitted.
pub const DEFAULT_FREE_ENTRY_CAP: usize = 24;

/// Entrywise lower/upper bound pair representing a matrix uncertainty set.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    lower: DMatrix<f64>,
    upper: DMatrix<f64>,
}

/// Midpoint/half-width form of an interval matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterRadius {
    pub center: DMatrix<f64>,
    pub radius: DMatrix<f64>,
}

impl IntervalMatrix {
    /// Builds an interval matrix, validating shapes and `lower <= upper`.
    pub fn new(lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        if lower.shape() != upper.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", lower.shape()),
                got: format!("{:?}", upper.shape()),
            });
        }
        for j in 0..lower.ncols() {
            for i in 0..lower.nrows() {
                // also rejects NaN bounds
                if !(lower[(i, j)] <= upper[(i, j)]) {
                    return Err(Error::InvalidInterval {
                        row: i,
                        col: j,
                        lower: lower[(i, j)],
                        upper: upper[(i, j)],
                    });
                }
            }
        }
        Ok(Self { lower, upper })
    }

    /// Zero-radius interval containing exactly one matrix.
    pub fn degenerate(m: DMatrix<f64>) -> Self {
        Self {
            lower: m.clone(),
            upper: m,
        }
    }

    pub fn from_center_radius(cr: &CenterRadius) -> Result<Self> {
        if cr.center.shape() != cr.radius.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", cr.center.shape()),
                got: format!("{:?}", cr.radius.shape()),
            });
        }
        Self::new(&cr.center - &cr.radius, &cr.center + &cr.radius)
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    pub fn nrows(&self) -> usize {
        self.lower.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.lower.ncols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    /// Midpoint and half-width: center = (upper+lower)/2, radius = (upper-lower)/2.
    pub fn center_radius(&self) -> CenterRadius {
        CenterRadius {
            center: (&self.upper + &self.lower) / 2.0,
            radius: (&self.upper - &self.lower) / 2.0,
        }
    }

    /// Closed-interval membership: `lower <= candidate <= upper` entrywise.
    pub fn contains(&self, candidate: &DMatrix<f64>) -> Result<bool> {
        if candidate.shape() != self.lower.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.lower.shape()),
                got: format!("{:?}", candidate.shape()),
            });
        }
        Ok(self
            .lower
            .iter()
            .zip(self.upper.iter())
            .zip(candidate.iter())
            .all(|((lo, hi), x)| *lo <= *x && *x <= *hi))
    }

    /// Row-major positions of entries with positive radius.
    pub fn free_entries(&self) -> Vec<(usize, usize)> {
        let mut free = Vec::new();
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                if self.upper[(i, j)] > self.lower[(i, j)] {
                    free.push((i, j));
                }
            }
        }
        free
    }

    /// Number of vertices, 2^q for q free entries.
    pub fn vertex_count(&self) -> u64 {
        1u64 << self.free_entries().len().min(63)
    }

    /// Enumerates all 2^q vertex matrices in deterministic order:
    /// lexicographic over the row-major free-entry choice tuple, lower
    /// before upper. Zero-radius entries are fixed at the center.
    pub fn enumerate_vertices(&self, cap: usize) -> Result<Vec<DMatrix<f64>>> {
        let free = self.free_entries();
        let q = free.len();
        if q > cap {
            return Err(Error::VertexCapExceeded { required: q, cap });
        }
        let base = self.center_radius().center;
        let count = 1usize << q;
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let mut v = base.clone();
            for (t, &(i, j)) in free.iter().enumerate() {
                // entry t is the t-th lexicographic position, so it maps to
                // bit q-1-t: the last free entry varies fastest
                let take_upper = (k >> (q - 1 - t)) & 1 == 1;
                v[(i, j)] = if take_upper {
                    self.upper[(i, j)]
                } else {
                    self.lower[(i, j)]
                };
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Exact interval product with a constant matrix: the result's bounds
    /// are the entrywise min/max of `M * rhs` over all `M` in `self`,
    /// computed as `C*rhs -+ R*|rhs|`.
    pub fn mul_const(&self, rhs: &DMatrix<f64>) -> Result<IntervalMatrix> {
        if self.ncols() != rhs.nrows() {
            return Err(Error::ShapeMismatch {
                expected: format!("inner dimension {}", self.ncols()),
                got: format!("{}", rhs.nrows()),
            });
        }
        let cr = self.center_radius();
        let abs_rhs = rhs.map(f64::abs);
        let mid = &cr.center * rhs;
        let spread = &cr.radius * abs_rhs;
        IntervalMatrix::new(&mid - &spread, mid + spread)
    }

    /// Draws one member uniformly per entry. Degenerate entries return the
    /// center exactly; the result always satisfies `contains`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| {
            let (lo, hi) = (self.lower[(i, j)], self.upper[(i, j)]);
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        })
    }
}

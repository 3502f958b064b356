//! Quadratic-constraint abstraction of the stacked activation nonlinearity:
//! the sector selector Psi, the multiplier matrix M(lambda), their
//! composition X(lambda) acting on [x; w] coordinates, and a pointwise
//! validity check of the constraint itself.

use nalgebra::{DMatrix, DVector};

use crate::network::{EquilibriumTuple, FeedforwardNetwork, IsolationMatrices};
use crate::{Error, Result};

/// Per-neuron sector bounds for the stacked nonlinearity.
#[derive(Debug, Clone)]
pub struct SectorVectors {
    pub alpha_phi: DVector<f64>,
    pub beta_phi: DVector<f64>,
}

impl SectorVectors {
    pub fn new(alpha_phi: DVector<f64>, beta_phi: DVector<f64>) -> Result<Self> {
        if alpha_phi.len() != beta_phi.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}", alpha_phi.len()),
                got: format!("{}", beta_phi.len()),
            });
        }
        for k in 0..alpha_phi.len() {
            if !(alpha_phi[k] <= beta_phi[k]) {
                return Err(Error::Precondition(format!(
                    "sector {k}: alpha = {} exceeds beta = {}",
                    alpha_phi[k], beta_phi[k]
                )));
            }
        }
        Ok(Self {
            alpha_phi,
            beta_phi,
        })
    }

    pub fn len(&self) -> usize {
        self.alpha_phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_phi.len() == 0
    }
}

/// Nonnegative QC multiplier, one entry per neuron.
#[derive(Debug, Clone)]
pub struct Multiplier {
    pub lambda: DVector<f64>,
}

impl Multiplier {
    pub fn new(lambda: DVector<f64>) -> Result<Self> {
        if let Some(bad) = lambda.iter().find(|t| **t < 0.0) {
            return Err(Error::Precondition(format!(
                "multiplier entries must be nonnegative, got {bad}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn ones(n_phi: usize) -> Self {
        Self {
            lambda: DVector::from_element(n_phi, 1.0),
        }
    }
}

/// Psi = [[diag(beta), -I], [-diag(alpha), I]].
pub fn build_psi(s: &SectorVectors) -> DMatrix<f64> {
    let k = s.len();
    let mut psi = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        psi[(i, i)] = s.beta_phi[i];
        psi[(i, k + i)] = -1.0;
        psi[(k + i, i)] = -s.alpha_phi[i];
        psi[(k + i, k + i)] = 1.0;
    }
    psi
}

/// M(lambda) = [[0, diag(lambda)], [diag(lambda), 0]].
pub fn build_m(lam: &Multiplier) -> DMatrix<f64> {
    let k = lam.lambda.len();
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        m[(i, k + i)] = lam.lambda[i];
        m[(k + i, i)] = lam.lambda[i];
    }
    m
}

/// X(lambda) = R_phi^T Psi^T M(lambda) Psi R_phi, the QC quadratic form in
/// [x; w] coordinates. Symmetric and linear in lambda.
pub fn build_x(lam: &Multiplier, s: &SectorVectors, iso: &IsolationMatrices) -> Result<DMatrix<f64>> {
    if lam.lambda.len() != s.len() || 2 * s.len() != iso.r_phi.nrows() {
        return Err(Error::ShapeMismatch {
            expected: format!("n_phi = {}", s.len()),
            got: format!(
                "lambda {}, r_phi rows {}",
                lam.lambda.len(),
                iso.r_phi.nrows()
            ),
        });
    }
    let psi_rphi = build_psi(s) * &iso.r_phi;
    let x = psi_rphi.transpose() * build_m(lam) * psi_rphi;
    // symmetrize away rounding
    Ok((&x + x.transpose()) / 2.0)
}

/// Rank-two per-neuron summands of X(lambda): X = sum_k lambda_k X_k with
/// X_k = a_k b_k^T + b_k a_k^T, where a_k, b_k are the k-th rows of the top
/// and bottom halves of Psi R_phi. Used by the certificate assemblers to
/// keep coefficient matrices sparse.
pub fn x_summand_vectors(
    s: &SectorVectors,
    iso: &IsolationMatrices,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let psi_rphi = build_psi(s) * &iso.r_phi;
    let k = s.len();
    let a = (0..k)
        .map(|i| psi_rphi.row(i).transpose())
        .collect::<Vec<_>>();
    let b = (0..k)
        .map(|i| psi_rphi.row(k + i).transpose())
        .collect::<Vec<_>>();
    (a, b)
}

/// Evaluates the QC quadratic form at a concrete activation input and
/// returns whether it is nonnegative up to floating-point tolerance.
pub fn qc_satisfied(
    v_phi: &DVector<f64>,
    eq: &EquilibriumTuple,
    s: &SectorVectors,
    lam: &Multiplier,
    net: &FeedforwardNetwork,
) -> bool {
    let w_phi = v_phi.map(|t| net.activation().apply(t));
    let dv = v_phi - &eq.v_star;
    let dw = w_phi - &eq.w_star;
    let stacked = DVector::from_iterator(2 * s.len(), dv.iter().chain(dw.iter()).copied());
    let psi = build_psi(s);
    let m = build_m(lam);
    let z = &psi * stacked;
    let form = z.dot(&(m * &z));
    form >= -1e-12
}

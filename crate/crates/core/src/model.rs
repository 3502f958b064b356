//! On-disk model schema, benchmark system generators, and synthetic
//! controllers.
//!
//! A model file is a single JSON document with the interval system matrices
//! (row-major nested arrays), the network, the first-layer box, and optional
//! equilibrium / saturation data. Floats are serialized with 17 significant
//! digits so write -> read -> write is byte-identical.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificates::{
    ellipsoid_volume, Certificate, CertificateMethod, MethodAux, UncertainNNCS,
};
use crate::interval::IntervalMatrix;
use crate::network::{ActivationKind, FeedforwardNetwork};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// schema
// ---------------------------------------------------------------------------

/// One network layer: weight matrix (row-major) and bias.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LayerSpec {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkSpec {
    pub activation: ActivationKind,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SaturationSpec {
    pub lo: f64,
    pub hi: f64,
}

/// The model file schema. Field order is fixed; see the module docs for the
/// serialization contract.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub state_dim: usize,
    pub input_dim: usize,
    #[serde(rename = "A_lower")]
    pub a_lower: Vec<Vec<f64>>,
    #[serde(rename = "A_upper")]
    pub a_upper: Vec<Vec<f64>>,
    #[serde(rename = "B_lower")]
    pub b_lower: Vec<Vec<f64>>,
    #[serde(rename = "B_upper")]
    pub b_upper: Vec<Vec<f64>>,
    pub network: NetworkSpec,
    pub v1_lower: Vec<f64>,
    pub v1_upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<SaturationSpec>,
}

fn nested_to_matrix(v: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let rows = v.len();
    if rows == 0 {
        return Err(Error::Model(format!("{field}: empty matrix")));
    }
    let cols = v[0].len();
    for (i, row) in v.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Model(format!(
                "{field}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| v[i][j]))
}

fn matrix_to_nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ModelFile {
    /// Parses and validates a JSON document; parse errors carry line/column,
    /// semantic errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("parse: {e}")))?;
        model.to_system()?;
        Ok(model)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Serializes with 17-significant-digit floats, deterministically.
    pub fn to_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
        self.serialize(&mut ser)?;
        buf.write_all(b"\n")?;
        Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn network(&self) -> Result<FeedforwardNetwork> {
        let mut weights = Vec::with_capacity(self.network.layers.len());
        let mut biases = Vec::with_capacity(self.network.layers.len());
        for (k, layer) in self.network.layers.iter().enumerate() {
            weights.push(nested_to_matrix(&layer.w, &format!("network.layers[{k}].W"))?);
            biases.push(DVector::from_vec(layer.b.clone()));
        }
        FeedforwardNetwork::new(weights, biases, self.network.activation)
            .map_err(|e| Error::Model(format!("network: {e}")))
    }

    /// Builds the validated uncertain system plus the optional saturation.
    pub fn to_system(&self) -> Result<(UncertainNNCS, Option<(f64, f64)>)> {
        let a_lower = nested_to_matrix(&self.a_lower, "A_lower")?;
        let a_upper = nested_to_matrix(&self.a_upper, "A_upper")?;
        let b_lower = nested_to_matrix(&self.b_lower, "B_lower")?;
        let b_upper = nested_to_matrix(&self.b_upper, "B_upper")?;
        let a = IntervalMatrix::new(a_lower, a_upper)
            .map_err(|e| Error::Model(format!("A_lower/A_upper: {e}")))?;
        let b = IntervalMatrix::new(b_lower, b_upper)
            .map_err(|e| Error::Model(format!("B_lower/B_upper: {e}")))?;
        if a.nrows() != self.state_dim {
            return Err(Error::Model(format!(
                "state_dim = {} but A has {} rows",
                self.state_dim,
                a.nrows()
            )));
        }
        if b.ncols() != self.input_dim {
            return Err(Error::Model(format!(
                "input_dim = {} but B has {} columns",
                self.input_dim,
                b.ncols()
            )));
        }
        let net = self.network()?;
        let x_star = match &self.x_star {
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(self.state_dim),
        };
        let v1_lower = DVector::from_vec(self.v1_lower.clone());
        let v1_upper = DVector::from_vec(self.v1_upper.clone());
        // the box must bracket the equilibrium pre-activations
        let (w1, b1) = net.first_layer();
        if v1_lower.len() != w1.nrows() || v1_upper.len() != w1.nrows() {
            return Err(Error::Model(format!(
                "v1_lower/v1_upper: expected length {}, got {}/{}",
                w1.nrows(),
                v1_lower.len(),
                v1_upper.len()
            )));
        }
        if x_star.len() != self.state_dim {
            return Err(Error::Model(format!(
                "x_star: expected length {}, got {}",
                self.state_dim,
                x_star.len()
            )));
        }
        let v1_star = w1 * &x_star + b1;
        for k in 0..v1_star.len() {
            if !(v1_lower[k] <= v1_star[k] && v1_star[k] <= v1_upper[k]) {
                return Err(Error::Model(format!(
                    "v1_lower/v1_upper: entry {k} does not bracket W1 x* + b1 = {}",
                    v1_star[k]
                )));
            }
        }
        let saturation = self.saturation.map(|s| (s.lo, s.hi));
        let sys = UncertainNNCS::new(a, b, net, v1_lower, v1_upper, x_star)
            .map_err(|e| Error::Model(format!("system: {e}")))?;
        Ok((sys, saturation))
    }
}

/// JSON formatter printing every float with 17 significant digits.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

// ---------------------------------------------------------------------------
// synthetic controllers
// ---------------------------------------------------------------------------

/// Builds a 1-hidden-layer tanh network realizing u ~ K x near the origin:
/// W1 stacks n1/m copies of K/r, W2 averages the groups back scaled by r.
/// The Jacobian at 0 equals K exactly and pi(0) = 0 exactly.
pub fn make_synthetic_controller(
    k_gain: &DMatrix<f64>,
    n1: usize,
    linear_range: f64,
) -> Result<FeedforwardNetwork> {
    let m = k_gain.nrows();
    let n = k_gain.ncols();
    if linear_range <= 0.0 {
        return Err(Error::Precondition(format!(
            "linear range must be positive, got {linear_range}"
        )));
    }
    if n1 == 0 || n1 % m != 0 {
        return Err(Error::Precondition(format!(
            "first-layer width {n1} is not a positive multiple of the input dimension {m}"
        )));
    }
    let groups = n1 / m;
    let mut w1 = DMatrix::zeros(n1, n);
    for g in 0..groups {
        w1.view_mut((g * m, 0), (m, n))
            .copy_from(&(k_gain / linear_range));
    }
    let mut w2 = DMatrix::zeros(m, n1);
    for g in 0..groups {
        for k in 0..m {
            w2[(k, g * m + k)] = linear_range / groups as f64;
        }
    }
    FeedforwardNetwork::new(
        vec![w1, w2],
        vec![DVector::zeros(n1), DVector::zeros(m)],
        ActivationKind::Tanh,
    )
}

// ---------------------------------------------------------------------------
// benchmark generators
// ---------------------------------------------------------------------------

pub const GRAVITY: f64 = 9.81;
pub const PENDULUM_MASS: f64 = 0.15;
pub const PENDULUM_FRICTION: f64 = 0.05;
pub const PENDULUM_LENGTH: f64 = 0.5;
pub const PENDULUM_DT: f64 = 0.02;
pub const PENDULUM_V1_HALF: f64 = 0.1;
pub const PENDULUM_SATURATION: f64 = 0.7;
pub const PENDULUM_N1: usize = 32;

/// Frozen stabilizing gain for the pendulum, chosen by discrete-time pole
/// placement; a build-time test checks the closed-loop spectral radius over
/// all interval vertices.
pub fn pendulum_gain() -> DMatrix<f64> {
    DMatrix::from_row_slice(1, 2, &[-2.0, -0.7])
}

/// Inverted pendulum with uncertain length l in [0.5 - delta, 0.5 + delta]:
/// continuous matrices [[0, 1], [g/l, -mu/(m l^2)]], [[0], [1/(m l^2)]],
/// forward-Euler discretized, entrywise endpoint intervals (every uncertain
/// entry is monotone in l).
pub fn pendulum_model(delta: f64) -> Result<ModelFile> {
    if !(0.0..PENDULUM_LENGTH).contains(&delta) {
        return Err(Error::Precondition(format!(
            "pendulum uncertainty level must lie in [0, {PENDULUM_LENGTH}), got {delta}"
        )));
    }
    let (l_lo, l_hi) = (PENDULUM_LENGTH - delta, PENDULUM_LENGTH + delta);
    let endpoints = |f: &dyn Fn(f64) -> f64| {
        let (a, b) = (f(l_lo), f(l_hi));
        (a.min(b), a.max(b))
    };
    let m = PENDULUM_MASS;
    let dt = PENDULUM_DT;
    let (a21_lo, a21_hi) = endpoints(&|l| dt * GRAVITY / l);
    let (a22_lo, a22_hi) = endpoints(&|l| 1.0 - dt * PENDULUM_FRICTION / (m * l * l));
    let (b2_lo, b2_hi) = endpoints(&|l| dt / (m * l * l));

    let a_lower = vec![vec![1.0, dt], vec![a21_lo, a22_lo]];
    let a_upper = vec![vec![1.0, dt], vec![a21_hi, a22_hi]];
    let b_lower = vec![vec![0.0], vec![b2_lo]];
    let b_upper = vec![vec![0.0], vec![b2_hi]];

    let net = make_synthetic_controller(&pendulum_gain(), PENDULUM_N1, PENDULUM_SATURATION)?;
    let model = ModelFile {
        state_dim: 2,
        input_dim: 1,
        a_lower,
        a_upper,
        b_lower,
        b_upper,
        network: network_spec(&net),
        v1_lower: vec![-PENDULUM_V1_HALF; PENDULUM_N1],
        v1_upper: vec![PENDULUM_V1_HALF; PENDULUM_N1],
        x_star: None,
        saturation: Some(SaturationSpec {
            lo: -PENDULUM_SATURATION,
            hi: PENDULUM_SATURATION,
        }),
    };
    model.to_system()?;
    Ok(model)
}

pub const MSD_DT: f64 = 0.1;
pub const MSD_SPRING: f64 = 1.0;
pub const MSD_DAMPER: f64 = 0.1;
pub const MSD_V1_HALF: f64 = 0.2;

/// Frozen stabilizing gain for the cart chain: u = -2 z - zdot per cart.
pub fn msd_gain(n_carts: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n_carts, 2 * n_carts);
    for i in 0..n_carts {
        k[(i, i)] = -2.0;
        k[(i, n_carts + i)] = -1.0;
    }
    k
}

/// Default first-layer width for the cart chain: 8 neurons for small chains
/// as in the reference configuration, otherwise near 16 rounded to a
/// multiple of the input dimension (the synthetic controller needs m | n1).
pub fn msd_default_n1(n_carts: usize) -> usize {
    if n_carts <= 2 {
        8
    } else {
        let per = (16 + n_carts / 2) / n_carts;
        (per.max(1)) * n_carts
    }
}

/// Mass-spring-damper chain of `n_carts` unit-mass carts, cart i coupled to
/// cart i-1 (cart 1 to the wall) by spring k_i in [1 +- delta_k] and damper
/// c_i in [0.1 +- delta_c]. Stiffness matrix K(i,i) = k_i + k_{i+1} (with
/// k_{n_c+1} = 0), K(i, i+-1) = -k_{max(i, i+-1)}; damping analogous; the
/// parameter sharing across entries is relaxed entrywise.
pub fn msd_model(n_carts: usize, delta_k: f64, delta_c: f64) -> Result<ModelFile> {
    if n_carts == 0 {
        return Err(Error::Precondition("need at least one cart".into()));
    }
    if delta_k < 0.0 || delta_c < 0.0 || delta_k >= MSD_SPRING || delta_c >= MSD_DAMPER {
        return Err(Error::Precondition(format!(
            "uncertainty levels out of range: delta_k = {delta_k}, delta_c = {delta_c}"
        )));
    }
    let nc = n_carts;
    let n = 2 * nc;
    let dt = MSD_DT;

    // entrywise intervals of the (negated, scaled) stiffness and damping
    // blocks inside A_d = I + dt [[0, I], [-K, -C]]
    let mut a_lower = DMatrix::zeros(n, n);
    let mut a_upper = DMatrix::zeros(n, n);
    for i in 0..nc {
        a_lower[(i, i)] = 1.0;
        a_upper[(i, i)] = 1.0;
        a_lower[(i, nc + i)] = dt;
        a_upper[(i, nc + i)] = dt;
    }
    // interval [lo, hi] of entry e of K (resp. C) maps to dt*[-hi, -lo]
    let mut place = |row: usize, col: usize, center: f64, radius: f64, diag: f64| {
        let (lo, hi) = (center - radius, center + radius);
        a_lower[(row, col)] = diag - dt * hi;
        a_upper[(row, col)] = diag - dt * lo;
    };
    for i in 0..nc {
        let k_center = if i + 1 < nc { 2.0 * MSD_SPRING } else { MSD_SPRING };
        let k_radius = if i + 1 < nc { 2.0 * delta_k } else { delta_k };
        let c_center = if i + 1 < nc { 2.0 * MSD_DAMPER } else { MSD_DAMPER };
        let c_radius = if i + 1 < nc { 2.0 * delta_c } else { delta_c };
        place(nc + i, i, k_center, k_radius, 0.0);
        place(nc + i, nc + i, c_center, c_radius, 1.0);
        if i + 1 < nc {
            place(nc + i, i + 1, -MSD_SPRING, delta_k, 0.0);
            place(nc + i + 1, i, -MSD_SPRING, delta_k, 0.0);
            place(nc + i, nc + i + 1, -MSD_DAMPER, delta_c, 0.0);
            place(nc + i + 1, nc + i, -MSD_DAMPER, delta_c, 0.0);
        }
    }

    let mut b = DMatrix::zeros(n, nc);
    for i in 0..nc {
        b[(nc + i, i)] = dt;
    }

    let n1 = msd_default_n1(nc);
    let net = make_synthetic_controller(&msd_gain(nc), n1, 1.0)?;
    let model = ModelFile {
        state_dim: n,
        input_dim: nc,
        a_lower: matrix_to_nested(&a_lower),
        a_upper: matrix_to_nested(&a_upper),
        b_lower: matrix_to_nested(&b),
        b_upper: matrix_to_nested(&b),
        network: network_spec(&net),
        v1_lower: vec![-MSD_V1_HALF; n1],
        v1_upper: vec![MSD_V1_HALF; n1],
        x_star: None,
        saturation: None,
    };
    model.to_system()?;
    Ok(model)
}

pub fn network_spec(net: &FeedforwardNetwork) -> NetworkSpec {
    NetworkSpec {
        activation: net.activation(),
        layers: net
            .weights()
            .iter()
            .zip(net.biases())
            .map(|(w, b)| LayerSpec {
                w: matrix_to_nested(w),
                b: b.iter().copied().collect(),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// certificate files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxFile {
    None,
    Gamma { gamma: Vec<Vec<f64>> },
    DiagTs { t: Vec<f64>, s: Vec<f64> },
    YGamma { y: Vec<Vec<f64>>, gamma: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub worst_block_min_eig: f64,
    pub nonneg_min: f64,
    pub pass: bool,
}

/// Serialized certificate: P, lambda, method auxiliaries, and the
/// verification/solver summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub method: String,
    pub trace_p: f64,
    pub volume: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub aux: AuxFile,
    pub x_star: Vec<f64>,
    pub residuals: ResidualSummary,
    pub solver_status: String,
    pub wall_time_s: f64,
    pub iterations: usize,
}

impl CertificateFile {
    pub fn from_certificate(cert: &Certificate) -> Result<Self> {
        let aux = match &cert.aux {
            MethodAux::None => AuxFile::None,
            MethodAux::Gamma(g) => AuxFile::Gamma {
                gamma: matrix_to_nested(g),
            },
            MethodAux::DiagTS { t, s } => AuxFile::DiagTs {
                t: t.iter().copied().collect(),
                s: s.iter().copied().collect(),
            },
            MethodAux::YGamma { y, gamma } => AuxFile::YGamma {
                y: matrix_to_nested(y),
                gamma: matrix_to_nested(gamma),
            },
        };
        Ok(Self {
            method: cert.method.to_string(),
            trace_p: cert.trace_p,
            volume: ellipsoid_volume(&cert.ellipsoid)?,
            p: matrix_to_nested(&cert.p),
            lambda: cert.lambda.iter().copied().collect(),
            aux,
            x_star: cert.ellipsoid.center.iter().copied().collect(),
            residuals: ResidualSummary {
                worst_block_min_eig: cert.residuals.worst_min_eig(),
                nonneg_min: cert.residuals.nonneg_min,
                pass: cert.residuals.pass,
            },
            solver_status: format!("{:?}", cert.stats.status),
            wall_time_s: cert.stats.wall_time,
            iterations: cert.stats.iterations,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
        self.serialize(&mut ser)?;
        buf.write_all(b"\n")?;
        Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Model(format!("certificate parse: {e}")))
    }

    pub fn method(&self) -> Result<CertificateMethod> {
        CertificateMethod::parse(&self.method)
            .ok_or_else(|| Error::Model(format!("unknown method {}", self.method)))
    }

    /// Rebuilds the numeric pieces needed to re-validate against a model.
    pub fn parts(&self) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
        let p = nested_to_matrix(&self.p, "P")?;
        if p.nrows() != p.ncols() {
            return Err(Error::Model("P must be square".into()));
        }
        Ok((
            p,
            DVector::from_vec(self.lambda.clone()),
            DVector::from_vec(self.x_star.clone()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::prepare;
    use nalgebra::dvector;

    #[test]
    fn controller_exact_scalar_form() {
        // K = [[-0.6]], n1 = 1, r = 1: exactly u = -0.6 tanh(x)
        let net =
            make_synthetic_controller(&DMatrix::from_row_slice(1, 1, &[-0.6]), 1, 1.0).unwrap();
        assert_eq!(net.weights()[0], DMatrix::from_row_slice(1, 1, &[-0.6]));
        assert_eq!(net.weights()[1], DMatrix::from_row_slice(1, 1, &[1.0]));
        let u = net.forward(&dvector![0.3]).unwrap();
        assert!((u[0] - (-0.6f64 * 0.3).tanh()).abs() < 1e-15);
    }

    #[test]
    fn controller_jacobian_matches_gain() {
        let k = DMatrix::from_row_slice(2, 4, &[0.5, -1.0, 2.0, 0.1, -0.3, 0.8, 0.0, -2.0]);
        let net = make_synthetic_controller(&k, 8, 0.9).unwrap();
        assert_eq!(net.forward(&DVector::zeros(4)).unwrap(), DVector::zeros(2));
        let h = 1e-7;
        for j in 0..4 {
            let mut xp = DVector::zeros(4);
            xp[j] = h;
            let mut xm = DVector::zeros(4);
            xm[j] = -h;
            let du = (net.forward(&xp).unwrap() - net.forward(&xm).unwrap()) / (2.0 * h);
            for i in 0..2 {
                assert!(
                    (du[i] - k[(i, j)]).abs() < 1e-6,
                    "jacobian ({i},{j}): {} vs {}",
                    du[i],
                    k[(i, j)]
                );
            }
        }
    }

    #[test]
    fn controller_width_must_divide() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(make_synthetic_controller(&k, 7, 1.0).is_err());
        assert!(make_synthetic_controller(&k, 8, 1.0).is_ok());
    }

    #[test]
    fn pendulum_degenerate_euler_entries() {
        let model = pendulum_model(0.0).unwrap();
        assert_eq!(model.a_lower, model.a_upper);
        assert_eq!(model.a_lower[0][1], 0.02);
        let a21 = PENDULUM_DT * GRAVITY / PENDULUM_LENGTH;
        assert!((model.a_lower[1][0] - a21).abs() < 1e-15);
    }

    #[test]
    fn pendulum_interval_halfwidths() {
        let model = pendulum_model(0.01).unwrap();
        let half = (model.a_upper[1][0] - model.a_lower[1][0]) / 2.0;
        let expected = 0.02 * (GRAVITY / 0.49 - GRAVITY / 0.51) / 2.0;
        assert!((half - expected).abs() < 1e-12);
        // first row stays exact
        assert_eq!(model.a_lower[0], model.a_upper[0]);
    }

    #[test]
    fn pendulum_system_prepares() {
        let model = pendulum_model(0.01).unwrap();
        let (sys, sat) = model.to_system().unwrap();
        assert_eq!(sat, Some((-0.7, 0.7)));
        let prep = prepare(&sys).unwrap();
        assert_eq!(prep.dims.n, 2);
        assert_eq!(prep.dims.n1, 32);
        assert_eq!(prep.dims.n_phi, 32);
    }

    #[test]
    fn msd_single_cart_matrices() {
        let model = msd_model(1, 0.05, 0.005).unwrap();
        // K(1,1) = k_1, C(1,1) = c_1: A_d bottom row = [-dt k_1, 1 - dt c_1]
        assert!((model.a_lower[1][0] - (-0.1 * 1.05)).abs() < 1e-15);
        assert!((model.a_upper[1][0] - (-0.1 * 0.95)).abs() < 1e-15);
        assert!((model.a_lower[1][1] - (1.0 - 0.1 * 0.105)).abs() < 1e-15);
        assert!((model.a_upper[1][1] - (1.0 - 0.1 * 0.095)).abs() < 1e-15);
        assert_eq!(model.b_lower, model.b_upper);
        assert!((model.b_lower[1][0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn msd_chain_couplings() {
        let model = msd_model(3, 0.05, 0.005).unwrap();
        let (sys, _) = model.to_system().unwrap();
        assert_eq!(sys.a.nrows(), 6);
        // diagonal stiffness entries: 2k for inner carts, k for the last
        let cr = sys.a.center_radius();
        assert!((cr.center[(3, 0)] - (-0.1 * 2.0)).abs() < 1e-15);
        assert!((cr.center[(5, 2)] - (-0.1 * 1.0)).abs() < 1e-15);
        // coupling entries -k
        assert!((cr.center[(3, 1)] - 0.1).abs() < 1e-15);
        assert!((cr.radius[(3, 1)] - 0.1 * 0.05).abs() < 1e-15);
        // free entries: 7 stiffness + 7 damping
        assert_eq!(sys.a.free_entries().len(), 14);
    }

    #[test]
    fn msd_default_widths_divisible() {
        for nc in 1..=4 {
            let n1 = msd_default_n1(nc);
            assert_eq!(n1 % nc, 0, "nc = {nc}: n1 = {n1}");
        }
        assert_eq!(msd_default_n1(1), 8);
        assert_eq!(msd_default_n1(2), 8);
        assert_eq!(msd_default_n1(3), 15);
        assert_eq!(msd_default_n1(4), 16);
    }

    #[test]
    fn generated_gains_stabilize_all_vertices() {
        // spectral radius of (A_v + B_v K) < 1 over all interval vertices
        for model in [
            pendulum_model(0.02).unwrap(),
            msd_model(1, 0.05, 0.005).unwrap(),
            msd_model(2, 0.05, 0.005).unwrap(),
        ] {
            let (sys, _) = model.to_system().unwrap();
            let n = sys.a.nrows();
            let k = if n == 2 && sys.b.ncols() == 1 {
                pendulum_gain()
            } else {
                msd_gain(n / 2)
            };
            let avs = sys.a.enumerate_vertices(16).unwrap();
            let bvs = sys.b.enumerate_vertices(16).unwrap();
            for av in &avs {
                for bv in &bvs {
                    let closed = av + bv * &k;
                    let rho = closed
                        .complex_eigenvalues()
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0f64, f64::max);
                    assert!(rho < 1.0, "vertex spectral radius {rho}");
                }
            }
        }
    }

    #[test]
    fn model_round_trip_byte_identical() {
        let model = pendulum_model(0.013).unwrap();
        let first = model.to_json().unwrap();
        let reread = ModelFile::from_json(&first).unwrap();
        let second = reread.to_json().unwrap();
        assert_eq!(first, second);
        assert_eq!(model, reread);
    }

    #[test]
    fn floats_carry_17_significant_digits() {
        let model = msd_model(1, 0.05, 0.005).unwrap();
        let text = model.to_json().unwrap();
        // dt appears as a fully expanded 17-digit literal
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
    }

    #[test]
    fn malformed_model_reports_field() {
        let mut model = pendulum_model(0.0).unwrap();
        model.a_lower[1][0] = 99.0; // lower > upper
        let text = model.to_json().unwrap();
        let err = ModelFile::from_json(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("A_lower"), "{msg}");

        let err = ModelFile::from_json("{ not json").unwrap_err();
        assert!(err.to_string().contains("parse"), "{err}");
    }

    #[test]
    fn certificate_file_round_trip() {
        use crate::certificates::{certify, CertifyOptions, CertifyOutcome};
        let model = msd_model(1, 0.05, 0.005).unwrap();
        let (sys, _) = model.to_system().unwrap();
        let cert = match certify(&sys, CertificateMethod::LmiII, &CertifyOptions::default())
            .unwrap()
        {
            CertifyOutcome::Certified(c) => *c,
            _ => panic!("msd n_c=1 should certify"),
        };
        let file = CertificateFile::from_certificate(&cert).unwrap();
        let text = file.to_json().unwrap();
        let reread = CertificateFile::from_json(&text).unwrap();
        assert_eq!(reread.method().unwrap(), CertificateMethod::LmiII);
        let (p, lambda, x_star) = reread.parts().unwrap();
        assert!((p - &cert.p).amax() < 1e-15);
        assert_eq!(lambda.len(), cert.lambda.len());
        assert_eq!(x_star.len(), 2);
        assert!(reread.residuals.pass);
    }
}

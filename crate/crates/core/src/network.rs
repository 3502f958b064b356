//! Feedforward network controllers and their certification-oriented views:
//! isolation block matrices separating linear maps from activations,
//! equilibrium propagation, pre-activation bound propagation, and local
//! sector bounds for the scalar activation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scalar activation applied entrywise in every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Tanh,
    Relu,
    Sigmoid,
    LeakyRelu { slope: f64 },
}

impl ActivationKind {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ActivationKind::Tanh => v.tanh(),
            ActivationKind::Relu => v.max(0.0),
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            ActivationKind::LeakyRelu { slope } => {
                if v >= 0.0 {
                    v
                } else {
                    slope * v
                }
            }
        }
    }

    /// Derivative where defined; for the piecewise-linear kinds the value at
    /// the kink is the right-hand piece (the hull logic in [`sector_bounds`]
    /// never evaluates there).
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            ActivationKind::Tanh => 1.0 - v.tanh().powi(2),
            ActivationKind::Relu => {
                if v >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => {
                let s = 1.0 / (1.0 + (-v).exp());
                s * (1.0 - s)
            }
            ActivationKind::LeakyRelu { slope } => {
                if v >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }

    fn is_piecewise_linear(self) -> bool {
        matches!(
            self,
            ActivationKind::Relu | ActivationKind::LeakyRelu { .. }
        )
    }

    /// Odd activations admit the chord-based sector tightening at the origin.
    fn is_odd(self) -> bool {
        matches!(self, ActivationKind::Tanh)
    }

    fn validate(self) -> Result<()> {
        if let ActivationKind::LeakyRelu { slope } = self {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::InvalidNetwork(format!(
                    "leaky_relu slope must lie in (0,1), got {slope}"
                )));
            }
        }
        Ok(())
    }
}

/// An l-layer feedforward network u = W^{l+1} phi(...phi(W^1 x + b^1)...) + b^{l+1}.
///
/// `weights`/`biases` hold W^1..W^{l+1} and b^1..b^{l+1}; there is at least
/// one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNetwork {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    activation: ActivationKind,
}

impl FeedforwardNetwork {
    pub fn new(
        weights: Vec<DMatrix<f64>>,
        biases: Vec<DVector<f64>>,
        activation: ActivationKind,
    ) -> Result<Self> {
        activation.validate()?;
        if weights.len() < 2 {
            return Err(Error::InvalidNetwork(
                "need at least one hidden layer (two weight matrices)".into(),
            ));
        }
        if weights.len() != biases.len() {
            return Err(Error::InvalidNetwork(format!(
                "{} weight matrices but {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        for i in 0..weights.len() {
            if biases[i].len() != weights[i].nrows() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {}: bias length {} != weight rows {}",
                    i + 1,
                    biases[i].len(),
                    weights[i].nrows()
                )));
            }
            if i > 0 && weights[i].ncols() != weights[i - 1].nrows() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {}: {} input columns but previous layer has {} outputs",
                    i + 1,
                    weights[i].ncols(),
                    weights[i - 1].nrows()
                )));
            }
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    /// State dimension n.
    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    /// Control dimension m.
    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().nrows()
    }

    /// Number of hidden layers l.
    pub fn num_hidden_layers(&self) -> usize {
        self.weights.len() - 1
    }

    /// Hidden layer widths n_1..n_l.
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.weights[..self.weights.len() - 1]
            .iter()
            .map(|w| w.nrows())
            .collect()
    }

    /// Total neuron count n_phi.
    pub fn n_phi(&self) -> usize {
        self.hidden_sizes().iter().sum()
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    pub fn first_layer(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.weights[0], &self.biases[0])
    }

    /// Evaluates the layer recursion.
    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("input of length {}", self.input_dim()),
                got: format!("{}", x.len()),
            });
        }
        let mut w = x.clone();
        let l = self.num_hidden_layers();
        for i in 0..l {
            let v = &self.weights[i] * &w + &self.biases[i];
            w = v.map(|t| self.activation.apply(t));
        }
        Ok(&self.weights[l] * w + &self.biases[l])
    }
}

/// Block matrices isolating the network's linear maps from the stacked
/// activations: [v_phi; u] = N [x; w_phi; 1] with N partitioned into
/// N_vx, N_vw, N_vb, N_ux, N_uw, N_ub, plus the selectors R_V and R_phi.
#[derive(Debug, Clone)]
pub struct IsolationMatrices {
    pub n_vx: DMatrix<f64>,
    pub n_vw: DMatrix<f64>,
    pub n_vb: DVector<f64>,
    pub n_ux: DMatrix<f64>,
    pub n_uw: DMatrix<f64>,
    pub n_ub: DVector<f64>,
    pub r_v: DMatrix<f64>,
    pub r_phi: DMatrix<f64>,
}

/// Builds the isolation matrices. The v-rows carry W^1 in N_vx and W^i at
/// block (i, i-1) of N_vw for i >= 2; the u-row carries W^{l+1} in the last
/// block of N_uw, so N_ux is structurally zero.
pub fn assemble_isolation(net: &FeedforwardNetwork) -> IsolationMatrices {
    let n = net.input_dim();
    let m = net.output_dim();
    let sizes = net.hidden_sizes();
    let n_phi = net.n_phi();
    let l = net.num_hidden_layers();

    let mut n_vx = DMatrix::zeros(n_phi, n);
    n_vx.view_mut((0, 0), (sizes[0], n)).copy_from(&net.weights()[0]);

    let mut n_vw = DMatrix::zeros(n_phi, n_phi);
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0usize, |acc, s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    for i in 1..l {
        n_vw
            .view_mut((offsets[i], offsets[i - 1]), (sizes[i], sizes[i - 1]))
            .copy_from(&net.weights()[i]);
    }

    let mut n_vb = DVector::zeros(n_phi);
    for i in 0..l {
        n_vb.rows_mut(offsets[i], sizes[i]).copy_from(&net.biases()[i]);
    }

    let n_ux = DMatrix::zeros(m, n);
    let mut n_uw = DMatrix::zeros(m, n_phi);
    n_uw
        .view_mut((0, offsets[l - 1]), (m, sizes[l - 1]))
        .copy_from(&net.weights()[l]);
    let n_ub = net.biases()[l].clone();

    let mut r_v = DMatrix::zeros(n + m, n + n_phi);
    r_v.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    r_v.view_mut((n, 0), (m, n)).copy_from(&n_ux);
    r_v.view_mut((n, n), (m, n_phi)).copy_from(&n_uw);

    let mut r_phi = DMatrix::zeros(2 * n_phi, n + n_phi);
    r_phi.view_mut((0, 0), (n_phi, n)).copy_from(&n_vx);
    r_phi.view_mut((0, n), (n_phi, n_phi)).copy_from(&n_vw);
    r_phi
        .view_mut((n_phi, n), (n_phi, n_phi))
        .copy_from(&DMatrix::identity(n_phi, n_phi));

    IsolationMatrices {
        n_vx,
        n_vw,
        n_vb,
        n_ux,
        n_uw,
        n_ub,
        r_v,
        r_phi,
    }
}

/// Equilibrium values of state, control, and stacked activation
/// inputs/outputs: x*, u*, v*, w*.
#[derive(Debug, Clone)]
pub struct EquilibriumTuple {
    pub x_star: DVector<f64>,
    pub u_star: DVector<f64>,
    pub v_star: DVector<f64>,
    pub w_star: DVector<f64>,
}

impl EquilibriumTuple {
    /// Infinity-norm residual of [v*; u*] = N [x*; w*; 1] and w* = phi(v*).
    pub fn isolation_residual(&self, iso: &IsolationMatrices, net: &FeedforwardNetwork) -> f64 {
        let v = &iso.n_vx * &self.x_star + &iso.n_vw * &self.w_star + &iso.n_vb;
        let u = &iso.n_ux * &self.x_star + &iso.n_uw * &self.w_star + &iso.n_ub;
        let w = self.v_star.map(|t| net.activation().apply(t));
        let rv = (&v - &self.v_star).amax();
        let ru = (&u - &self.u_star).amax();
        let rw = (&w - &self.w_star).amax();
        rv.max(ru).max(rw)
    }
}

/// Propagates x* layer by layer, recording every activation input/output.
pub fn propagate_equilibrium(
    net: &FeedforwardNetwork,
    x_star: &DVector<f64>,
) -> Result<EquilibriumTuple> {
    if x_star.len() != net.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("state of length {}", net.input_dim()),
            got: format!("{}", x_star.len()),
        });
    }
    let n_phi = net.n_phi();
    let l = net.num_hidden_layers();
    let mut v_star = DVector::zeros(n_phi);
    let mut w_star = DVector::zeros(n_phi);
    let mut prev = x_star.clone();
    let mut off = 0;
    for i in 0..l {
        let v = &net.weights()[i] * &prev + &net.biases()[i];
        let w = v.map(|t| net.activation().apply(t));
        v_star.rows_mut(off, v.len()).copy_from(&v);
        w_star.rows_mut(off, w.len()).copy_from(&w);
        off += v.len();
        prev = w;
    }
    let u_star = &net.weights()[l] * prev + &net.biases()[l];
    Ok(EquilibriumTuple {
        x_star: x_star.clone(),
        u_star,
        v_star,
        w_star,
    })
}

/// Outcome of [`enforce_zero_equilibrium`]: the adjusted network and the
/// output-bias shift that was applied.
#[derive(Debug, Clone)]
pub struct ZeroEquilibrium {
    pub net: FeedforwardNetwork,
    pub shift: DVector<f64>,
}

/// Restores the standing assumption pi(0) = 0 by shifting the output bias,
/// provided the current deviation is within `tolerance`.
pub fn enforce_zero_equilibrium(
    net: &FeedforwardNetwork,
    tolerance: f64,
) -> Result<ZeroEquilibrium> {
    let zero = DVector::zeros(net.input_dim());
    let u0 = net.forward(&zero)?;
    let mag = u0.amax();
    if mag > tolerance {
        return Err(Error::EquilibriumShiftTooLarge {
            shift: mag,
            tolerance,
        });
    }
    let mut adjusted = net.clone();
    let last = adjusted.biases.len() - 1;
    adjusted.biases[last] -= &u0;
    Ok(ZeroEquilibrium {
        net: adjusted,
        shift: -u0,
    })
}

/// Entrywise bounds on the stacked pre-activations, bracketing v*.
#[derive(Debug, Clone)]
pub struct PreActivationBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

/// Propagates the given first-layer box through the remaining layers by
/// interval arithmetic: activation images of the previous box (the
/// activations are monotone), then the positive/negative weight split.
pub fn propagate_bounds(
    net: &FeedforwardNetwork,
    v1_lower: &DVector<f64>,
    v1_upper: &DVector<f64>,
    eq: &EquilibriumTuple,
) -> Result<PreActivationBounds> {
    let sizes = net.hidden_sizes();
    let n1 = sizes[0];
    if v1_lower.len() != n1 || v1_upper.len() != n1 {
        return Err(Error::ShapeMismatch {
            expected: format!("first-layer box of length {n1}"),
            got: format!("{}/{}", v1_lower.len(), v1_upper.len()),
        });
    }
    for k in 0..n1 {
        let vs = eq.v_star[k];
        if !(v1_lower[k] <= vs && vs <= v1_upper[k]) {
            return Err(Error::Precondition(format!(
                "equilibrium pre-activation v*_{k} = {vs} outside first-layer box [{}, {}]",
                v1_lower[k], v1_upper[k]
            )));
        }
    }

    let n_phi = net.n_phi();
    let mut lower = DVector::zeros(n_phi);
    let mut upper = DVector::zeros(n_phi);
    lower.rows_mut(0, n1).copy_from(v1_lower);
    upper.rows_mut(0, n1).copy_from(v1_upper);

    let act = net.activation();
    let mut off = 0;
    for i in 1..net.num_hidden_layers() {
        let prev_lo = lower.rows(off, sizes[i - 1]).map(|t| act.apply(t));
        let prev_hi = upper.rows(off, sizes[i - 1]).map(|t| act.apply(t));
        let w = &net.weights()[i];
        let w_pos = w.map(|t| t.max(0.0));
        let w_neg = w.map(|t| t.min(0.0));
        let lo = &w_pos * &prev_lo + &w_neg * &prev_hi + &net.biases()[i];
        let hi = &w_pos * &prev_hi + &w_neg * &prev_lo + &net.biases()[i];
        off += sizes[i - 1];
        lower.rows_mut(off, sizes[i]).copy_from(&lo);
        upper.rows_mut(off, sizes[i]).copy_from(&hi);
    }
    Ok(PreActivationBounds { lower, upper })
}

/// Local sector bilan for one neuron: returns (alpha, beta) with
/// alpha <= beta such that every chord of the activation from
/// (v_star, phi(v_star)) to points of [v_low, v_high] has slope in
/// [alpha, beta].
///
/// The hull of the derivative over the interval is valid by the mean value
/// theorem; for odd activations around v_star = 0 with a symmetric interval
/// the lower bound tightens to the endpoint chord phi(v_high)/v_high.
pub fn sector_bounds(
    activation: ActivationKind,
    v_low: f64,
    v_high: f64,
    v_star: f64,
) -> Result<(f64, f64)> {
    activation.validate()?;
    if v_low >= v_high {
        return Err(Error::DegenerateInterval {
            low: v_low,
            high: v_high,
        });
    }
    if !(v_low <= v_star && v_star <= v_high) {
        return Err(Error::Precondition(format!(
            "v_star = {v_star} outside [{v_low}, {v_high}]"
        )));
    }

    if activation.is_piecewise_linear() {
        // hull over the attained pieces only
        let lo_piece = match activation {
            ActivationKind::Relu => 0.0,
            ActivationKind::LeakyRelu { slope } => slope,
            _ => unreachable!(),
        };
        let mut alpha = f64::INFINITY;
        let mut beta = f64::NEG_INFINITY;
        if v_low < 0.0 {
            alpha = alpha.min(lo_piece);
            beta = beta.max(lo_piece);
        }
        if v_high > 0.0 {
            alpha = alpha.min(1.0);
            beta = beta.max(1.0);
        }
        return Ok((alpha, beta));
    }

    // smooth activations: the derivative is unimodal with its peak at 0
    let beta = if v_low <= 0.0 && 0.0 <= v_high {
        activation.derivative(0.0)
    } else if v_low > 0.0 {
        activation.derivative(v_low)
    } else {
        activation.derivative(v_high)
    };
    let mut alpha = activation
        .derivative(v_low)
        .min(activation.derivative(v_high));

    let symmetric = (v_low + v_high).abs() <= 1e-9 * v_high.abs();
    if activation.is_odd() && v_star == 0.0 && symmetric {
        alpha = activation.apply(v_high) / v_high;
    }
    Ok((alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(w1: f64, b1: f64, w2: f64, b2: f64) -> FeedforwardNetwork {
        FeedforwardNetwork::new(
            vec![dmatrix![w1], dmatrix![w2]],
            vec![dvector![b1], dvector![b2]],
            ActivationKind::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn forward_tanh_origin() {
        let net = scalar_net(1.0, 0.0, 2.0, 0.0);
        let u = net.forward(&dvector![0.0]).unwrap();
        assert_eq!(u, dvector![0.0]);
    }

    #[test]
    fn forward_hand_evaluation() {
        let net = scalar_net(1.0, 0.5, 2.0, -2.0 * 0.5f64.tanh());
        let u = net.forward(&dvector![0.1]).unwrap();
        let expected = 2.0 * 0.6f64.tanh() - 2.0 * 0.5f64.tanh();
        assert!((u[0] - expected).abs() < 1e-15);
        assert!((u[0] - 0.14986481947605107).abs() < 1e-12);
    }

    #[test]
    fn forward_relu_negative_preactivation() {
        let net = FeedforwardNetwork::new(
            vec![dmatrix![-1.0], dmatrix![1.0]],
            vec![dvector![0.0], dvector![0.0]],
            ActivationKind::Relu,
        )
        .unwrap();
        let u = net.forward(&dvector![1.0]).unwrap();
        assert_eq!(u, dvector![0.0]);
    }

    #[test]
    fn isolation_single_hidden_layer() {
        let net = scalar_net(1.0, 0.0, -0.6, 0.0);
        let iso = assemble_isolation(&net);
        assert_eq!(iso.n_vx, dmatrix![1.0]);
        assert_eq!(iso.n_vw, dmatrix![0.0]);
        assert_eq!(iso.n_uw, dmatrix![-0.6]);
        assert_eq!(iso.n_ux, dmatrix![0.0]);
        assert_eq!(iso.r_v, dmatrix![1.0, 0.0; 0.0, -0.6]);
        assert_eq!(iso.r_phi, dmatrix![1.0, 0.0; 0.0, 1.0]);
    }

    #[test]
    fn isolation_two_hidden_layers_shifted_block() {
        // n=2, layers of width 3 and 2, m=1
        let w1 = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64 + 0.5);
        let w2 = DMatrix::from_fn(2, 3, |i, j| (i as f64) - (j as f64) * 0.25);
        let w3 = DMatrix::from_fn(1, 2, |_, j| 1.0 + j as f64);
        let net = FeedforwardNetwork::new(
            vec![w1.clone(), w2.clone(), w3.clone()],
            vec![DVector::zeros(3), DVector::zeros(2), DVector::zeros(1)],
            ActivationKind::Tanh,
        )
        .unwrap();
        let iso = assemble_isolation(&net);
        assert_eq!(iso.n_vw.view((3, 0), (2, 3)).clone_owned(), w2);
        assert_eq!(iso.n_vw.view((0, 0), (3, 5)).clone_owned(), DMatrix::zeros(3, 5));
        assert_eq!(iso.n_vw.view((3, 3), (2, 2)).clone_owned(), DMatrix::zeros(2, 2));
        assert_eq!(iso.n_uw.view((0, 3), (1, 2)).clone_owned(), w3);
        assert!(iso.n_ux.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn isolation_matches_layerwise_evaluation() {
        // [v; u] computed via N equals layer-by-layer when w holds the true
        // activations
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w1 = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
        let w2 = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
        let w3 = DMatrix::from_fn(1, 2, |_, _| rng.gen_range(-1.0..1.0));
        let b1 = DVector::from_fn(3, |_, _| rng.gen_range(-0.5..0.5));
        let b2 = DVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5));
        let b3 = DVector::from_fn(1, |_, _| rng.gen_range(-0.5..0.5));
        let net = FeedforwardNetwork::new(
            vec![w1.clone(), w2.clone(), w3.clone()],
            vec![b1.clone(), b2.clone(), b3.clone()],
            ActivationKind::Tanh,
        )
        .unwrap();
        let iso = assemble_isolation(&net);

        let x = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let v1 = &w1 * &x + &b1;
        let a1 = v1.map(f64::tanh);
        let v2 = &w2 * &a1 + &b2;
        let a2 = v2.map(f64::tanh);
        let u = &w3 * &a2 + &b3;

        let w_stack = DVector::from_iterator(5, a1.iter().chain(a2.iter()).copied());
        let v_stack = DVector::from_iterator(5, v1.iter().chain(v2.iter()).copied());
        let v_via_n = &iso.n_vx * &x + &iso.n_vw * &w_stack + &iso.n_vb;
        let u_via_n = &iso.n_ux * &x + &iso.n_uw * &w_stack + &iso.n_ub;
        assert!((v_via_n - v_stack).amax() < 1e-14);
        assert!((u_via_n - u).amax() < 1e-14);
    }

    #[test]
    fn equilibrium_at_origin_for_odd_activation() {
        let net = scalar_net(1.0, 0.0, 2.0, 0.0);
        let eq = propagate_equilibrium(&net, &dvector![0.0]).unwrap();
        assert_eq!(eq.v_star, dvector![0.0]);
        assert_eq!(eq.w_star, dvector![0.0]);
        assert_eq!(eq.u_star, dvector![0.0]);
    }

    #[test]
    fn equilibrium_hand_evaluation_and_residual() {
        let net = scalar_net(1.0, 0.5, 2.0, -2.0 * 0.5f64.tanh());
        let eq = propagate_equilibrium(&net, &dvector![0.0]).unwrap();
        assert!((eq.v_star[0] - 0.5).abs() < 1e-15);
        assert!((eq.w_star[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!(eq.u_star[0].abs() < 1e-15);
        let iso = assemble_isolation(&net);
        assert!(eq.isolation_residual(&iso, &net) <= 1e-12);
    }

    #[test]
    fn equilibrium_relu_dead_neuron() {
        let net = FeedforwardNetwork::new(
            vec![dmatrix![1.0], dmatrix![1.0]],
            vec![dvector![-1.0], dvector![0.0]],
            ActivationKind::Relu,
        )
        .unwrap();
        let eq = propagate_equilibrium(&net, &dvector![0.0]).unwrap();
        assert_eq!(eq.w_star, dvector![0.0]);
    }

    #[test]
    fn zero_equilibrium_already_satisfied() {
        let net = scalar_net(1.0, 0.0, 2.0, 0.0);
        let z = enforce_zero_equilibrium(&net, 0.01).unwrap();
        assert_eq!(z.net, net);
        assert_eq!(z.shift, dvector![0.0]);
    }

    #[test]
    fn zero_equilibrium_small_shift_applied() {
        let net = scalar_net(1.0, 0.0, 2.0, 0.001);
        let z = enforce_zero_equilibrium(&net, 0.01).unwrap();
        let u0 = z.net.forward(&dvector![0.0]).unwrap();
        assert_eq!(u0, dvector![0.0]);
        assert!((z.shift[0] + 0.001).abs() < 1e-15);
    }

    #[test]
    fn zero_equilibrium_large_shift_refused() {
        let net = scalar_net(1.0, 0.0, 2.0, 0.5);
        let e = enforce_zero_equilibrium(&net, 0.01).unwrap_err();
        assert!(matches!(e, Error::EquilibriumShiftTooLarge { .. }));
    }

    #[test]
    fn bounds_second_layer_tanh_image() {
        // v2 = 2 tanh(v1), v1 in [-0.1, 0.1]
        let net = FeedforwardNetwork::new(
            vec![dmatrix![1.0], dmatrix![2.0], dmatrix![1.0]],
            vec![dvector![0.0], dvector![0.0], dvector![0.0]],
            ActivationKind::Tanh,
        )
        .unwrap();
        let eq = propagate_equilibrium(&net, &dvector![0.0]).unwrap();
        let b = propagate_bounds(&net, &dvector![-0.1], &dvector![0.1], &eq).unwrap();
        let edge = 2.0 * 0.1f64.tanh();
        assert!((b.lower[1] + edge).abs() < 1e-15);
        assert!((b.upper[1] - edge).abs() < 1e-15);
        // dense grid confirms the enclosure is tight for this monotone map
        let mut worst = f64::NEG_INFINITY;
        for k in 0..=10_000 {
            let v1 = -0.1 + 0.2 * (k as f64) / 10_000.0;
            worst = worst.max((2.0 * v1.tanh()).abs());
        }
        assert!((worst - edge).abs() < 1e-9);
    }

    #[test]
    fn bounds_mixed_sign_second_layer() {
        // two first-layer neurons in [-a, a], second layer row [1, -1]
        let a = 0.3;
        let w1 = dmatrix![1.0; 1.0];
        let w2 = dmatrix![1.0, -1.0];
        let w3 = dmatrix![1.0];
        let net = FeedforwardNetwork::new(
            vec![w1, w2, w3],
            vec![DVector::zeros(2), DVector::zeros(1), DVector::zeros(1)],
            ActivationKind::Tanh,
        )
        .unwrap();
        let eq = propagate_equilibrium(&net, &dvector![0.0]).unwrap();
        let b = propagate_bounds(&net, &dvector![-a, -a], &dvector![a, a], &eq).unwrap();
        let edge = 2.0 * a.tanh();
        assert!((b.lower[2] + edge).abs() < 1e-15);
        assert!((b.upper[2] - edge).abs() < 1e-15);
    }

    #[test]
    fn bounds_zero_width_box_degenerates() {
        let net = FeedforwardNetwork::new(
            vec![dmatrix![1.0], dmatrix![2.0], dmatrix![1.0]],
            vec![dvector![0.25], dvector![-0.5], dvector![0.0]],
            ActivationKind::Tanh,
        )
        .unwrap();
        let eq = propagate_equilibrium(&net, &dvector![0.0]).unwrap();
        let b = propagate_bounds(&net, &dvector![0.25], &dvector![0.25], &eq).unwrap();
        assert!((b.lower[1] - b.upper[1]).abs() < 1e-15);
        assert!((b.lower[1] - eq.v_star[1]).abs() < 1e-15);
    }

    #[test]
    fn bounds_precondition_vstar_outside_box() {
        let net = scalar_net(1.0, 0.5, 2.0, 0.0);
        let eq = propagate_equilibrium(&net, &dvector![0.0]).unwrap();
        let e = propagate_bounds(&net, &dvector![-0.1], &dvector![0.1], &eq).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    /// Grid oracle: min and max chord slope from (v_star, phi(v_star)).
    fn chord_hull(act: ActivationKind, lo: f64, hi: f64, v_star: f64) -> (f64, f64) {
        let w_star = act.apply(v_star);
        let mut min_s = f64::INFINITY;
        let mut max_s = f64::NEG_INFINITY;
        for k in 0..=10_000 {
            let v = lo + (hi - lo) * (k as f64) / 10_000.0;
            if (v - v_star).abs() < 1e-9 {
                continue;
            }
            let s = (act.apply(v) - w_star) / (v - v_star);
            min_s = min_s.min(s);
            max_s = max_s.max(s);
        }
        (min_s, max_s)
    }

    #[test]
    fn sector_tanh_symmetric_origin() {
        let (alpha, beta) = sector_bounds(ActivationKind::Tanh, -0.1, 0.1, 0.0).unwrap();
        assert!((alpha - 0.1f64.tanh() / 0.1).abs() < 1e-12);
        assert!((alpha - 0.9966799462495582).abs() < 1e-12);
        assert_eq!(beta, 1.0);
        let (lo, hi) = chord_hull(ActivationKind::Tanh, -0.1, 0.1, 0.0);
        assert!(alpha <= lo + 1e-12 && beta >= hi - 1e-12);
    }

    #[test]
    fn sector_relu_spanning_zero() {
        let (alpha, beta) = sector_bounds(ActivationKind::Relu, -0.4, 0.8, 0.0).unwrap();
        assert_eq!((alpha, beta), (0.0, 1.0));
    }

    #[test]
    fn sector_tanh_offset_interval() {
        let (alpha, beta) = sector_bounds(ActivationKind::Tanh, 0.3, 0.7, 0.5).unwrap();
        let da = 1.0 - 0.7f64.tanh().powi(2);
        let db = 1.0 - 0.3f64.tanh().powi(2);
        assert!((alpha - da).abs() < 1e-12);
        assert!((beta - db).abs() < 1e-12);
        let (lo, hi) = chord_hull(ActivationKind::Tanh, 0.3, 0.7, 0.5);
        assert!(alpha <= lo + 1e-12 && beta >= hi - 1e-12);
    }

    #[test]
    fn sector_degenerate_interval_rejected() {
        let e = sector_bounds(ActivationKind::Tanh, 0.5, 0.5, 0.5).unwrap_err();
        assert!(matches!(e, Error::DegenerateInterval { .. }));
    }

    #[test]
    fn sector_leaky_relu_pieces() {
        let act = ActivationKind::LeakyRelu { slope: 0.2 };
        assert_eq!(sector_bounds(act, -1.0, 1.0, 0.0).unwrap(), (0.2, 1.0));
        assert_eq!(sector_bounds(act, 0.1, 1.0, 0.5).unwrap(), (1.0, 1.0));
        assert_eq!(sector_bounds(act, -1.0, -0.1, -0.5).unwrap(), (0.2, 0.2));
    }
}

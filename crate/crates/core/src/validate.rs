//! Independent checks of everything the certificates claim: closed-loop
//! simulation, Lyapunov decrease sampling, first-layer box containment, the
//! constructive converters between the relaxed certificate families (the
//! equivalence proof turned into executable code), and the matrix-analysis
//! lemmas the construction relies on, as randomized property oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificates::{
    build_d, eval_eq15, eval_z, AssemblyInputs, Certificate, Ellipsoid, UncertainNNCS,
};
use crate::interval::IntervalMatrix;
use crate::network::FeedforwardNetwork;
use crate::sdp::{max_eigenvalue, min_eigenvalue};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

/// One closed-loop rollout under a fixed uncertainty realization.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Whether input saturation was modeled.
    pub saturated: bool,
    /// Set when the state left the finite range and the rollout was truncated.
    pub diverged: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("at least the initial state")
    }

    pub fn converged(&self, x_star: &DVector<f64>, tol: f64) -> bool {
        !self.diverged && (self.final_state() - x_star).amax() <= tol
    }
}

/// Simulates x(t+1) = A x(t) + B sat(pi(x(t))) for `steps` steps; the clamp
/// is applied entrywise only when `saturation` is given.
pub fn simulate(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    net: &FeedforwardNetwork,
    x0: &DVector<f64>,
    steps: usize,
    saturation: Option<(f64, f64)>,
) -> Result<Trajectory> {
    let n = net.input_dim();
    if a.nrows() != n || a.ncols() != n || b.nrows() != n || b.ncols() != net.output_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("A {n}x{n}, B {n}x{}", net.output_dim()),
            got: format!(
                "A {}x{}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            ),
        });
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    states.push(x.clone());
    let mut diverged = false;
    for _ in 0..steps {
        let mut u = net.forward(&x)?;
        if let Some((lo, hi)) = saturation {
            u.apply(|t| *t = t.clamp(lo, hi));
        }
        x = a * &x + b * u;
        if !x.iter().all(|t| t.is_finite()) || x.amax() > 1e12 {
            diverged = true;
            break;
        }
        states.push(x.clone());
    }
    Ok(Trajectory {
        states,
        a: a.clone(),
        b: b.clone(),
        saturated: saturation.is_some(),
        diverged,
    })
}

// ---------------------------------------------------------------------------
// ellipsoid sampling
// ---------------------------------------------------------------------------

fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    // Box-Muller normals, normalized
    loop {
        let v = DVector::from_fn(n, |_, _| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Factor M with M^T M = P (upper-triangular, from the Cholesky of P).
fn ellipsoid_factor(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = p.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.l().transpose())
}

/// Points on the ellipsoid boundary: c + M^{-1} d for unit directions d,
/// satisfying |(x-c)' P (x-c) - 1| <= 1e-10.
pub fn boundary_samples(e: &Ellipsoid, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let m = ellipsoid_factor(&e.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = e.p.nrows();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let d = unit_direction(&mut rng, n);
        let z = m
            .solve_upper_triangular(&d)
            .ok_or(Error::NotPositiveDefinite)?;
        out.push(&e.center + z);
    }
    Ok(out)
}

/// Points strictly inside the ellipsoid, level radius in [r_min, 1).
pub fn interior_samples(
    e: &Ellipsoid,
    count: usize,
    r_min: f64,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let m = ellipsoid_factor(&e.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = e.p.nrows();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let d = unit_direction(&mut rng, n);
        let r = rng.gen_range(r_min..1.0f64).powf(1.0 / n as f64).max(r_min);
        let z = m
            .solve_upper_triangular(&(d * r))
            .ok_or(Error::NotPositiveDefinite)?;
        out.push(&e.center + z);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// certificate checks
// ---------------------------------------------------------------------------

/// Uncertainty realizations for sampling checks: all vertex pairs when they
/// fit the budget, otherwise extreme corners plus random vertices and
/// interior samples.
pub fn uncertainty_realizations(
    a: &IntervalMatrix,
    b: &IntervalMatrix,
    count: usize,
    seed: u64,
) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_pairs = a.vertex_count().saturating_mul(b.vertex_count());
    let mut out = Vec::new();
    if total_pairs <= count as u64 && a.free_entries().len() + b.free_entries().len() <= 16 {
        let avs = a.enumerate_vertices(16).unwrap_or_default();
        let bvs = b.enumerate_vertices(16).unwrap_or_default();
        for av in &avs {
            for bv in &bvs {
                out.push((av.clone(), bv.clone()));
            }
        }
    } else {
        out.push((a.lower().clone(), b.lower().clone()));
        out.push((a.upper().clone(), b.upper().clone()));
        while out.len() < count / 2 {
            out.push((random_vertex(a, &mut rng), random_vertex(b, &mut rng)));
        }
    }
    while out.len() < count {
        out.push((a.sample(&mut rng), b.sample(&mut rng)));
    }
    out.truncate(count);
    out
}

fn random_vertex<R: Rng + ?Sized>(m: &IntervalMatrix, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if m.upper()[(i, j)] > m.lower()[(i, j)] && rng.gen_bool(0.5) {
            m.upper()[(i, j)]
        } else {
            m.lower()[(i, j)]
        }
    })
}

/// Outcome of Lyapunov decrease sampling over (state, uncertainty) pairs.
#[derive(Debug, Clone)]
pub struct LyapunovReport {
    pub pairs_checked: usize,
    pub violations: usize,
    /// max over pairs of V(x+) - V(x); negative when all is well.
    pub worst_margin: f64,
}

impl LyapunovReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Samples states in the certified ellipsoid (boundary and interior,
/// excluding the center) and uncertainty realizations, and checks the strict
/// Lyapunov decrease V(x+) < V(x).
pub fn lyapunov_decrease_check(
    sys: &UncertainNNCS,
    cert: &Certificate,
    n_state_samples: usize,
    n_uncertainty_samples: usize,
    seed: u64,
) -> Result<LyapunovReport> {
    let e = &cert.ellipsoid;
    let n_boundary = n_state_samples / 2;
    let mut states = boundary_samples(e, n_boundary, seed)?;
    states.extend(interior_samples(
        e,
        n_state_samples - n_boundary,
        0.05,
        seed ^ 0x9e3779b97f4a7c15,
    )?);
    let realizations =
        uncertainty_realizations(&sys.a, &sys.b, n_uncertainty_samples, seed ^ 0xdeadbeef);

    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    for x in &states {
        let v = e.level(x);
        if v < 1e-12 {
            continue; // the fixed point itself carries no decrease claim
        }
        let u = sys.net.forward(x)?;
        for (a, b) in &realizations {
            let x_next = a * x + b * &u;
            let v_next = e.level(&x_next);
            let margin = v_next - v;
            worst = worst.max(margin);
            if margin >= 0.0 {
                violations += 1;
            }
            pairs += 1;
        }
    }
    Ok(LyapunovReport {
        pairs_checked: pairs,
        violations,
        worst_margin: worst,
    })
}

/// Outcome of first-layer box containment sampling plus the direct PSD check
/// of the per-neuron containment blocks.
#[derive(Debug, Clone)]
pub struct ContainmentReport {
    pub samples_checked: usize,
    pub box_violations: usize,
    /// min eigenvalue over the n_1 containment blocks at the certificate P.
    pub min_block_eig: f64,
    pub pass: bool,
}

/// Samples the certified ellipsoid and checks W^1 x + b^1 stays inside the
/// first-layer box; also re-checks the containment blocks by eigenvalue.
pub fn containment_check(
    cert: &Certificate,
    net: &FeedforwardNetwork,
    v1_lower: &DVector<f64>,
    v1_upper: &DVector<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<ContainmentReport> {
    let e = &cert.ellipsoid;
    let (w1, b1) = net.first_layer();
    let mut points = boundary_samples(e, n_samples / 2, seed)?;
    points.extend(interior_samples(
        e,
        n_samples - n_samples / 2,
        0.01,
        seed ^ 0xabcdef,
    )?);

    let mut box_violations = 0usize;
    // closed box with a hair of floating-point slack on the faces
    let slack = 1e-9;
    for x in &points {
        let v1 = w1 * x + b1;
        for k in 0..v1.len() {
            if v1[k] < v1_lower[k] - slack || v1[k] > v1_upper[k] + slack {
                box_violations += 1;
                break;
            }
        }
    }

    let eq = crate::network::propagate_equilibrium(net, &e.center)?;
    let n = e.center.len();
    let mut min_block_eig = f64::INFINITY;
    for i in 0..w1.nrows() {
        let half = (v1_upper[i] - eq.v_star[i]).min(eq.v_star[i] - v1_lower[i]);
        let mut block = DMatrix::zeros(n + 1, n + 1);
        block[(0, 0)] = half * half;
        for t in 0..n {
            block[(0, 1 + t)] = w1[(i, t)];
            block[(1 + t, 0)] = w1[(i, t)];
        }
        block.view_mut((1, 1), (n, n)).copy_from(&cert.p);
        min_block_eig = min_block_eig.min(min_eigenvalue(&block));
    }
    let pass = box_violations == 0 && min_block_eig >= -1e-9;
    Ok(ContainmentReport {
        samples_checked: points.len(),
        box_violations,
        min_block_eig,
        pass,
    })
}

/// Samples uncertainty realizations and checks the quadratic-form stability
/// matrix stays negative definite with half the assembly margin. Returns the
/// violation count and the worst top eigenvalue.
pub fn stability_sampling_check(
    sys: &UncertainNNCS,
    prep: &AssemblyInputs,
    cert: &Certificate,
    n_samples: usize,
    margin: f64,
    seed: u64,
) -> Result<(usize, f64)> {
    let realizations = uncertainty_realizations(&sys.a, &sys.b, n_samples, seed);
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in &realizations {
        let m = eval_eq15(prep, &cert.p, &cert.lambda, a, b)?;
        let top = max_eigenvalue(&m);
        worst = worst.max(top);
        if top > -margin / 2.0 {
            violations += 1;
        }
    }
    Ok((violations, worst))
}

// ---------------------------------------------------------------------------
// constructive proof converters
// ---------------------------------------------------------------------------

/// Numeric bordered block of the T/S relaxation at concrete values:
/// [[Z + T, [0 P]^T], [[0 P], -S]].
fn ts_block(
    prep: &AssemblyInputs,
    p: &DMatrix<f64>,
    lambda: &DVector<f64>,
    t: &DVector<f64>,
    s: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let z = eval_z(prep, p, lambda)?;
    let n = prep.dims.n;
    let n_hat = prep.dims.n_hat;
    let mut m = DMatrix::zeros(n_hat + n, n_hat + n);
    m.view_mut((0, 0), (n_hat, n_hat)).copy_from(&z);
    for i in 0..n_hat {
        m[(i, i)] += t[i];
    }
    let base = n_hat - n;
    for i in 0..n {
        for j in 0..n {
            m[(n_hat + i, base + j)] += p[(i, j)];
            m[(base + j, n_hat + i)] += p[(i, j)];
        }
        m[(n_hat + i, n_hat + i)] -= s[i];
    }
    Ok(m)
}

/// Numeric big block of the gamma relaxation at concrete values:
/// [[Z + sum gamma_ij D_ij^2 e_i e_i', U], [U', -V]].
fn gamma_block(
    prep: &AssemblyInputs,
    p: &DMatrix<f64>,
    lambda: &DVector<f64>,
    gamma: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let z = eval_z(prep, p, lambda)?;
    let n = prep.dims.n;
    let n_hat = prep.dims.n_hat;
    let dim = n_hat + n_hat * n;
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (n_hat, n_hat)).copy_from(&z);
    for i in 0..n_hat {
        for j in 0..n {
            m[(i, i)] += gamma[(i, j)] * d[(i, j)] * d[(i, j)];
            let vpos = n_hat + i * n + j;
            m[(vpos, vpos)] = -gamma[(i, j)];
        }
    }
    let base = n_hat - n;
    for g in 0..n_hat {
        for i in 0..n {
            for j in 0..n {
                m[(base + i, n_hat + g * n + j)] += p[(i, j)];
                m[(n_hat + g * n + j, base + i)] += p[(i, j)];
            }
        }
    }
    Ok(m)
}

/// Result of one proof-construction conversion, with the identities the
/// proof asserts evaluated numerically.
#[derive(Debug, Clone)]
pub struct ConversionReport {
    pub epsilon: f64,
    /// max_i of sum_j gamma_ij Dtilde_ij^2 - t_i (must be <= 0).
    pub row_slack: f64,
    /// max_j relative residual of sum_i 1/gamma_ij = 1/s_j.
    pub column_residual: f64,
    /// max eigenvalue of the target LMI at the constructed point (< 0).
    pub target_max_eig: f64,
    pub pass: bool,
}

/// Constructs gamma scalings from a feasible (T, S) pair, following the
/// equivalence proof: enlarge D to Dtilde = D + eps * ones so that
/// G = T - Dtilde S Dtilde' stays positive definite, then set
/// gamma_ij = s_j sum_k Dtilde(k,j) C^G_{k,1} / (Dtilde(i,j) C^G_{i,1}).
pub fn convert_ii_to_i(
    prep: &AssemblyInputs,
    p: &DMatrix<f64>,
    lambda: &DVector<f64>,
    t: &DVector<f64>,
    s: &DVector<f64>,
    epsilon_prime: f64,
) -> Result<(DMatrix<f64>, ConversionReport)> {
    let d = build_d(&prep.a_cr.radius, &prep.tilde)?;
    let n = prep.dims.n;
    let n_hat = prep.dims.n_hat;

    // preconditions: (T, S) feasible for the bordered relaxation
    let bordered = ts_block(prep, p, lambda, t, s)?;
    if max_eigenvalue(&bordered) >= 0.0 {
        return Err(Error::Precondition(
            "(T, S) do not satisfy the bordered relaxation".into(),
        ));
    }
    let t_mat = DMatrix::from_diagonal(t);
    let s_mat = DMatrix::from_diagonal(s);
    let gap = &t_mat - &d * &s_mat * d.transpose();
    if min_eigenvalue(&gap) <= 0.0 {
        return Err(Error::Precondition(
            "(T, S) do not satisfy the radius bound D S D' < T".into(),
        ));
    }

    // largest eps in (0, eps'] keeping G = T - Dtilde S Dtilde' > 0
    let ones = DMatrix::from_element(n_hat, n, 1.0);
    let g_of = |eps: f64| -> DMatrix<f64> {
        let dt = &d + eps * &ones;
        &t_mat - &dt * &s_mat * dt.transpose()
    };
    let eps = bisect_largest(epsilon_prime, 60, |e| min_eigenvalue(&g_of(e)) > 0.0)
        .ok_or_else(|| {
            Error::InternalContradiction("no epsilon keeps G positive definite".into())
        })?;
    let d_tilde = &d + eps * &ones;
    let g = g_of(eps);

    // first-column cofactors of G; the sign structure makes them positive
    let cof = cofactor_matrix(&g);
    for i in 0..n_hat {
        if cof[(i, 0)] <= 0.0 {
            return Err(Error::InternalContradiction(format!(
                "nonpositive cofactor C[{i},0] = {:.3e} of a positive definite \
                 matrix with negative off-diagonal",
                cof[(i, 0)]
            )));
        }
    }

    let mut gamma = DMatrix::zeros(n_hat, n);
    for j in 0..n {
        let weighted: f64 = (0..n_hat).map(|k| d_tilde[(k, j)] * cof[(k, 0)]).sum();
        for i in 0..n_hat {
            gamma[(i, j)] = s[j] * weighted / (d_tilde[(i, j)] * cof[(i, 0)]);
        }
    }

    // proof consequences
    let mut row_slack = f64::NEG_INFINITY;
    for i in 0..n_hat {
        let sum: f64 = (0..n)
            .map(|j| gamma[(i, j)] * d_tilde[(i, j)] * d_tilde[(i, j)])
            .sum();
        row_slack = row_slack.max(sum - t[i]);
    }
    let mut column_residual = 0.0f64;
    for j in 0..n {
        let inv_sum: f64 = (0..n_hat).map(|i| 1.0 / gamma[(i, j)]).sum();
        column_residual = column_residual.max((inv_sum - 1.0 / s[j]).abs() * s[j]);
    }
    let target = gamma_block(prep, p, lambda, &gamma, &d)?;
    let target_max_eig = max_eigenvalue(&target);
    let pass = row_slack <= 1e-9 && column_residual <= 1e-9 && target_max_eig < 0.0;
    Ok((
        gamma,
        ConversionReport {
            epsilon: eps,
            row_slack,
            column_residual,
            target_max_eig,
            pass,
        },
    ))
}

/// Constructs a (T, S) pair from feasible gamma scalings, following the
/// reverse proof direction: T* = diag of sum_j gamma_ij D_ij^2,
/// s_j = 1 / sum_i (1/gamma_ij), then T = T* + eps I for the largest eps
/// keeping the bordered relaxation feasible.
pub fn convert_i_to_ii(
    prep: &AssemblyInputs,
    p: &DMatrix<f64>,
    lambda: &DVector<f64>,
    gamma: &DMatrix<f64>,
    epsilon_prime: f64,
) -> Result<(DVector<f64>, DVector<f64>, ConversionReport)> {
    let d = build_d(&prep.a_cr.radius, &prep.tilde)?;
    let n = prep.dims.n;
    let n_hat = prep.dims.n_hat;

    let big = gamma_block(prep, p, lambda, gamma, &d)?;
    if max_eigenvalue(&big) >= 0.0 {
        return Err(Error::Precondition(
            "gamma grid does not satisfy the gamma relaxation".into(),
        ));
    }

    let t_star = DVector::from_fn(n_hat, |i, _| {
        (0..n).map(|j| gamma[(i, j)] * d[(i, j)] * d[(i, j)]).sum()
    });
    let s = DVector::from_fn(n, |j, _| {
        1.0 / (0..n_hat).map(|i| 1.0 / gamma[(i, j)]).sum::<f64>()
    });

    let t_of = |eps: f64| &t_star + DVector::from_element(n_hat, eps);
    let bordered_neg = |t: &DVector<f64>| -> Result<bool> {
        Ok(max_eigenvalue(&ts_block(prep, p, lambda, t, &s)?) < 0.0)
    };
    let mut found = None;
    let mut lo = 0.0f64;
    let mut hi = epsilon_prime;
    if bordered_neg(&t_of(hi))? {
        found = Some(hi);
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid <= 0.0 {
                break;
            }
            if bordered_neg(&t_of(mid))? {
                found = Some(mid);
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let eps = found.ok_or_else(|| {
        Error::InternalContradiction("no epsilon keeps the bordered relaxation feasible".into())
    })?;
    let t = t_of(eps);

    // proof consequences: D S D' <= T* < T
    let dsd = &d * DMatrix::from_diagonal(&s) * d.transpose();
    let t_star_gap = DMatrix::from_diagonal(&t_star) - &dsd;
    let strict_gap = DMatrix::from_diagonal(&t) - &dsd;
    let target_max_eig = max_eigenvalue(&ts_block(prep, p, lambda, &t, &s)?);
    let pass = min_eigenvalue(&t_star_gap) >= -1e-10
        && min_eigenvalue(&strict_gap) > 0.0
        && target_max_eig < 0.0;
    let report = ConversionReport {
        epsilon: eps,
        row_slack: -min_eigenvalue(&t_star_gap),
        column_residual: 0.0,
        target_max_eig,
        pass,
    };
    Ok((t, s, report))
}

/// Largest value in (0, hi] passing `ok`, by bisection; the passing set is
/// an interval anchored at 0+.
fn bisect_largest(hi: f64, iters: usize, ok: impl Fn(f64) -> bool) -> Option<f64> {
    if ok(hi) {
        return Some(hi);
    }
    let mut found = None;
    let mut lo = 0.0f64;
    let mut hi = hi;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 {
            break;
        }
        if ok(mid) {
            found = Some(mid);
            lo = mid;
        } else {
            hi = mid;
        }
    }
    found
}

// ---------------------------------------------------------------------------
// matrix-analysis property oracles
// ---------------------------------------------------------------------------

/// Cofactor matrix C with C[(i,j)] the (i,j) cofactor of `a`. Uses minors
/// for sizes <= 8 and the adjugate identity adj(A) = |A| A^{-1} above that.
pub fn cofactor_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() <= 8 {
        cofactor_matrix_minors(a)
    } else {
        cofactor_matrix_adjugate(a)
    }
}

/// Cofactors via determinants of minors.
pub fn cofactor_matrix_minors(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let minor = a.clone().remove_row(i).remove_column(j);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// Cofactors via adj(A) = |A| A^{-1}; requires nonsingular input.
pub fn cofactor_matrix_adjugate(a: &DMatrix<f64>) -> DMatrix<f64> {
    let det = a.determinant();
    let inv = a
        .clone()
        .try_inverse()
        .expect("adjugate path requires a nonsingular matrix");
    // adj(A)[i,j] = C_{j,i}, so C = det * inv^T
    det * inv.transpose()
}

/// Checks the scaling bound A F B + B' F' A' <= gamma A A' + (1/gamma) B' B
/// for contractions F'F <= I.
pub fn petersen_bound_check(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    f: &DMatrix<f64>,
    gamma: f64,
) -> Result<bool> {
    if gamma <= 0.0 {
        return Err(Error::Precondition("gamma must be positive".into()));
    }
    let ftf = f.transpose() * f;
    let contraction = DMatrix::identity(ftf.nrows(), ftf.ncols()) - ftf;
    if min_eigenvalue(&contraction) < -1e-12 {
        return Err(Error::Precondition("F'F exceeds the identity".into()));
    }
    let cross = a * f * b;
    let lhs = &cross + cross.transpose();
    let rhs = gamma * a * a.transpose() + (1.0 / gamma) * b.transpose() * b;
    Ok(min_eigenvalue(&(rhs - lhs)) >= -1e-10)
}

/// Checks that a positive definite matrix with positive diagonal and
/// strictly negative off-diagonal entries has all cofactors positive.
pub fn cofactor_positivity_check(a: &DMatrix<f64>) -> Result<bool> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: "square".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    for i in 0..n {
        for j in 0..n {
            if i == j && a[(i, j)] <= 0.0 {
                return Err(Error::Precondition(format!(
                    "diagonal entry ({i},{i}) = {} not positive",
                    a[(i, j)]
                )));
            }
            if i != j && a[(i, j)] >= 0.0 {
                return Err(Error::Precondition(format!(
                    "off-diagonal entry ({i},{j}) = {} not strictly negative",
                    a[(i, j)]
                )));
            }
        }
    }
    if min_eigenvalue(&((a + a.transpose()) / 2.0)) <= 0.0 {
        return Err(Error::Precondition(
            "matrix is not positive definite".into(),
        ));
    }
    let cof = cofactor_matrix(a);
    Ok(cof.iter().all(|&c| c > 0.0))
}

/// Verifies the Laplace expansion along every row and column, including the
/// alien-cofactor annihilation identities, to 1e-9 relative accuracy.
pub fn laplace_identity_check(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if a.ncols() != n {
        return false;
    }
    let det = a.determinant();
    let cof = cofactor_matrix(a);
    let scale = det.abs().max(cof.amax() * a.amax()).max(1.0);
    for i in 0..n {
        for k in 0..n {
            let row_sum: f64 = (0..n).map(|j| a[(k, j)] * cof[(i, j)]).sum();
            let col_sum: f64 = (0..n).map(|j| a[(j, k)] * cof[(j, i)]).sum();
            let expected = if i == k { det } else { 0.0 };
            if (row_sum - expected).abs() > 1e-9 * scale
                || (col_sum - expected).abs() > 1e-9 * scale
            {
                return false;
            }
        }
    }
    true
}

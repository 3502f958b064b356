//! Solver-agnostic linear-matrix-inequality programs and their solution.
//!
//! A [`ConicProgram`] is a linear objective over scalar variables subject to
//! affine PSD blocks `F_0 + sum_k y_k F_k >= 0` and nonnegativity of a
//! subset of variables. Strict inequalities are the assembler's job: blocks
//! arrive already margin-shifted, carrying [`Strictness`] metadata so the
//! verifier can confirm the original strict sense.
//!
//! Solving is delegated to the Clarabel interior-point solver; solutions
//! are never trusted on solver say-so alone — [`ConicProgram::verify_solution`]
//! recomputes per-block minimum eigenvalues with a dense symmetric
//! eigensolver on an independent numerical path.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{NonnegativeConeT, PSDTriangleConeT},
};
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Solver and verification tuning knobs.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Shift applied by assemblers to strict inequalities.
    pub strict_margin: f64,
    /// Interior-point feasibility/gap tolerance.
    pub feasibility_tol: f64,
    /// Tolerance for independent eigenvalue verification of non-strict blocks.
    pub verification_tol: f64,
    pub max_iterations: u32,
    /// Wall-clock limit for one solve, seconds.
    pub time_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            strict_margin: 1e-7,
            feasibility_tol: 1e-8,
            verification_tol: 1e-6,
            max_iterations: 200,
            time_limit: f64::INFINITY,
        }
    }
}

/// Whether a stored block encodes a strict inequality via a margin shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strictness {
    NonStrict,
    /// Stored as `F(y) = +-M(y) - margin*I >= 0` for an original strict
    /// constraint `M(y) < 0` (resp. `> 0`).
    ShiftedStrict { margin: f64 },
}

/// One affine PSD block in lower-triangle triplet form.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub dim: usize,
    pub label: String,
    pub strictness: Strictness,
    /// (row, col, value) with row >= col; duplicates accumulate.
    pub f0: Vec<(u32, u32, f64)>,
    /// (var, row, col, value) with row >= col; duplicates accumulate.
    pub coeffs: Vec<(u32, u32, u32, f64)>,
}

impl PsdBlock {
    pub fn new(dim: usize, label: impl Into<String>, strictness: Strictness) -> Self {
        Self {
            dim,
            label: label.into(),
            strictness,
            f0: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn push_const(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row >= col && row < self.dim);
        if value != 0.0 {
            self.f0.push((row as u32, col as u32, value));
        }
    }

    pub fn push_coeff(&mut self, var: usize, row: usize, col: usize, value: f64) {
        debug_assert!(row >= col && row < self.dim);
        if value != 0.0 {
            self.coeffs.push((var as u32, row as u32, col as u32, value));
        }
    }

    /// Dense symmetric F_0 + sum y_k F_k.
    pub fn evaluate(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.f0 {
            m[(r as usize, c as usize)] += v;
            if r != c {
                m[(c as usize, r as usize)] += v;
            }
        }
        for &(k, r, c, v) in &self.coeffs {
            let t = v * y[k as usize];
            m[(r as usize, c as usize)] += t;
            if r != c {
                m[(c as usize, r as usize)] += t;
            }
        }
        m
    }
}

/// Affine-in-variables PSD constraint system with a linear objective.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<f64>,
    blocks: Vec<PsdBlock>,
    nonneg_vars: Vec<usize>,
    var_labels: Vec<String>,
}

/// Outcome classification of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Inaccurate,
    Failed,
}

/// Solution record; `y` is present iff the solver produced a usable point.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub y: Option<DVector<f64>>,
    pub objective_value: Option<f64>,
    pub wall_time: f64,
    pub iterations: usize,
    /// Raw backend status string for diagnostics.
    pub detail: String,
}

/// Per-block eigenvalue residual from independent verification.
#[derive(Debug, Clone)]
pub struct BlockResidual {
    pub label: String,
    pub dim: usize,
    /// Minimum eigenvalue of the stored (shifted) block at the solution.
    pub min_eig: f64,
    pub strictness: Strictness,
    pub pass: bool,
}

/// Independent verification report: eigenvalue residuals per block plus
/// nonnegativity residuals.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub blocks: Vec<BlockResidual>,
    /// Minimum value over the nonnegativity-constrained variables (0 if none).
    pub nonneg_min: f64,
    pub pass: bool,
}

impl VerificationReport {
    /// Worst shifted-block eigenvalue residual (infinity when no blocks).
    pub fn worst_min_eig(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.min_eig)
            .fold(f64::INFINITY, f64::min)
    }
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            blocks: Vec::new(),
            nonneg_vars: Vec::new(),
            var_labels: (0..num_vars).map(|k| format!("y{k}")).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.num_vars);
        self.objective = c;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_var_label(&mut self, k: usize, label: impl Into<String>) {
        self.var_labels[k] = label.into();
    }

    pub fn var_labels(&self) -> &[String] {
        &self.var_labels
    }

    pub fn mark_nonneg(&mut self, var: usize) {
        assert!(var < self.num_vars);
        if !self.nonneg_vars.contains(&var) {
            self.nonneg_vars.push(var);
        }
    }

    pub fn nonneg_vars(&self) -> &[usize] {
        &self.nonneg_vars
    }

    pub fn blocks(&self) -> &[PsdBlock] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    /// Sum of PSD block dimensions (the "size of LMIs" complexity measure).
    pub fn total_block_size(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// Appends a dense-form PSD block `F_0 + sum y_k F_k >= 0`, rejecting
    /// asymmetric inputs (beyond 1e-12) and size mismatches.
    pub fn add_psd_block(
        &mut self,
        f0: &DMatrix<f64>,
        coeffs: &[(usize, DMatrix<f64>)],
        label: impl Into<String>,
        strictness: Strictness,
    ) -> Result<()> {
        let dim = f0.nrows();
        check_symmetric(f0, dim)?;
        let mut block = PsdBlock::new(dim, label, strictness);
        for c in 0..dim {
            for r in c..dim {
                block.push_const(r, c, f0[(r, c)]);
            }
        }
        for (k, fk) in coeffs {
            if *k >= self.num_vars {
                return Err(Error::Precondition(format!(
                    "coefficient for unknown variable {k}"
                )));
            }
            check_symmetric(fk, dim)?;
            for c in 0..dim {
                for r in c..dim {
                    block.push_coeff(*k, r, c, fk[(r, c)]);
                }
            }
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Appends a pre-built sparse block (assemblers construct triplets
    /// directly).
    pub fn add_psd_block_raw(&mut self, block: PsdBlock) {
        debug_assert!(block
            .coeffs
            .iter()
            .all(|&(k, ..)| (k as usize) < self.num_vars));
        self.blocks.push(block);
    }

    /// Solves with the Clarabel interior-point backend. Deterministic for
    /// identical inputs and config; infeasibility is a status, not an error.
    pub fn solve(&self, cfg: &SolverConfig) -> Result<SolveResult> {
        let started = Instant::now();

        // map blocks to svec rows: s = b - A y constrained to the PSD
        // triangle cones (off-diagonals scaled by sqrt(2))
        let root2 = std::f64::consts::SQRT_2;
        let psd_rows: usize = self.blocks.iter().map(|b| svec_len(b.dim)).sum();
        let total_rows = psd_rows + self.nonneg_vars.len();

        let mut b = vec![0.0; total_rows];
        let mut cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.num_vars];
        let mut offset = 0usize;
        for block in &self.blocks {
            for &(r, c, v) in &block.f0 {
                let scale = if r == c { 1.0 } else { root2 };
                b[offset + svec_index(r as usize, c as usize, block.dim)] += v * scale;
            }
            for &(k, r, c, v) in &block.coeffs {
                let scale = if r == c { 1.0 } else { root2 };
                let row = offset + svec_index(r as usize, c as usize, block.dim);
                *cols[k as usize].entry(row).or_insert(0.0) += -v * scale;
            }
            offset += svec_len(block.dim);
        }
        for (t, &k) in self.nonneg_vars.iter().enumerate() {
            cols[k].insert(psd_rows + t, -1.0);
        }

        let mut colptr = Vec::with_capacity(self.num_vars + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &cols {
            for (&row, &val) in col {
                rowval.push(row);
                nzval.push(val);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(total_rows, self.num_vars, colptr, rowval, nzval);
        let p = CscMatrix::zeros((self.num_vars, self.num_vars));

        let mut cones = Vec::with_capacity(self.blocks.len() + 1);
        for block in &self.blocks {
            cones.push(PSDTriangleConeT(block.dim));
        }
        if !self.nonneg_vars.is_empty() {
            cones.push(NonnegativeConeT(self.nonneg_vars.len()));
        }

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(cfg.max_iterations)
            .time_limit(cfg.time_limit)
            .tol_feas(cfg.feasibility_tol)
            .tol_gap_abs(cfg.feasibility_tol)
            .tol_gap_rel(cfg.feasibility_tol)
            .build()
            .map_err(|e| Error::SolverFailure(format!("settings: {e}")))?;

        let mut solver = DefaultSolver::new(&p, &self.objective, &a, &b, &cones, settings);
        solver.solve();

        let raw = solver.solution.status;
        let detail = format!("{raw:?}");
        let (status, keep_point) = match raw {
            SolverStatus::Solved => (SolveStatus::Optimal, true),
            SolverStatus::AlmostSolved => (SolveStatus::Inaccurate, true),
            SolverStatus::PrimalInfeasible | SolverStatus::DualInfeasible => {
                (SolveStatus::Infeasible, false)
            }
            _ => (SolveStatus::Failed, false),
        };
        let y = keep_point.then(|| DVector::from_vec(solver.solution.x.clone()));
        let objective_value = y
            .as_ref()
            .map(|y| self.objective.iter().zip(y.iter()).map(|(c, v)| c * v).sum());

        Ok(SolveResult {
            status,
            y,
            objective_value,
            wall_time: started.elapsed().as_secs_f64(),
            iterations: solver.info.iterations as usize,
            detail,
        })
    }

    /// Recomputes every block's minimum eigenvalue at `y` with nalgebra's
    /// dense symmetric eigensolver and checks the nonnegative variables.
    ///
    /// Non-strict blocks pass at `min_eig >= -tol`; margin-shifted strict
    /// blocks pass at `min_eig >= -margin/2`, which is exactly "the original
    /// strict inequality holds with at least half the margin".
    pub fn verify_solution(&self, y: &DVector<f64>, tol: f64) -> Result<VerificationReport> {
        if y.len() != self.num_vars {
            return Err(Error::ShapeMismatch {
                expected: format!("{} variables", self.num_vars),
                got: format!("{}", y.len()),
            });
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut pass = true;
        for block in &self.blocks {
            let m = block.evaluate(y);
            let min_eig = min_eigenvalue(&m);
            let threshold = match block.strictness {
                Strictness::NonStrict => -tol,
                Strictness::ShiftedStrict { margin } => -margin / 2.0,
            };
            let ok = min_eig >= threshold;
            pass &= ok;
            blocks.push(BlockResidual {
                label: block.label.clone(),
                dim: block.dim,
                min_eig,
                strictness: block.strictness,
                pass: ok,
            });
        }
        let nonneg_min = self
            .nonneg_vars
            .iter()
            .map(|&k| y[k])
            .fold(0.0f64, f64::min);
        pass &= nonneg_min >= -tol;
        Ok(VerificationReport {
            blocks,
            nonneg_min,
            pass,
        })
    }

    /// Writes the program in a sparse triplet text format for cross-solver
    /// debugging. Lines:
    ///
    /// ```text
    /// vars <num_vars>
    /// label <var> <name>
    /// obj <var> <coeff>
    /// nonneg <var>
    /// block <id> <dim> <strict_margin-or-0> <label>
    /// e <block> <row> <col> <var> <coeff>
    /// ```
    ///
    /// Variable id 0 denotes the constant term F_0; variable k >= 1 is the
    /// (k-1)-th decision variable. Only the lower triangle is listed.
    pub fn dump_triplets(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "vars {}", self.num_vars)?;
        for (k, name) in self.var_labels.iter().enumerate() {
            writeln!(out, "label {k} {name}")?;
        }
        for (k, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                writeln!(out, "obj {k} {c:.17e}")?;
            }
        }
        for k in &self.nonneg_vars {
            writeln!(out, "nonneg {k}")?;
        }
        for (id, block) in self.blocks.iter().enumerate() {
            let margin = match block.strictness {
                Strictness::NonStrict => 0.0,
                Strictness::ShiftedStrict { margin } => margin,
            };
            writeln!(out, "block {id} {} {margin:.3e} {}", block.dim, block.label)?;
            for &(r, c, v) in &block.f0 {
                writeln!(out, "e {id} {r} {c} 0 {v:.17e}")?;
            }
            for &(k, r, c, v) in &block.coeffs {
                writeln!(out, "e {id} {r} {c} {} {v:.17e}", k + 1)?;
            }
        }
        Ok(())
    }
}

fn check_symmetric(m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::ShapeMismatch {
            expected: format!("{dim}x{dim}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let mut max_asym = 0.0f64;
    for c in 0..dim {
        for r in c + 1..dim {
            max_asym = max_asym.max((m[(r, c)] - m[(c, r)]).abs());
        }
    }
    if max_asym > 1e-12 {
        return Err(Error::Asymmetric { max_asym });
    }
    Ok(())
}

/// Minimum eigenvalue of a symmetric matrix via dense symmetric
/// eigendecomposition (independent of the interior-point path).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) / 2.0;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Maximum eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    -min_eigenvalue(&(-m))
}

fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Clarabel packs the upper triangle column by column, which is the lower
/// triangle row by row: position of (row, col) with row >= col.
fn svec_index(row: usize, col: usize, _dim: usize) -> usize {
    row * (row + 1) / 2 + col
}

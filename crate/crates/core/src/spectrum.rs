//! Eigen-solvers for mass matrices and the bare-mass renormalization search.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_basis::{enumerate_basis, Basis, FockState};
use crate::hamiltonian::{self_induced_inertias, MassMatrixParts, ModelParams};
use crate::sparse::SparseMatrix;

/// Matrices up to this dimension go to the dense solver under `Solver::Auto`.
pub const DENSE_LIMIT: usize = 512;

/// Default RNG seed for Lanczos start vectors.
pub const DEFAULT_SEED: u64 = 0x5eed_d1c0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm, one per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||A v - λ v||_2` per pair.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub count: usize,
    pub tol: f64,
    pub solver: Solver,
    pub seed: u64,
}

impl EigenOptions {
    pub fn new(count: usize, tol: f64) -> Self {
        EigenOptions {
            count,
            tol,
            solver: Solver::Auto,
            seed: DEFAULT_SEED,
        }
    }
}

/// The `count` smallest eigenpairs of a symmetric matrix.
pub fn lowest_eigenpairs(matrix: &SparseMatrix, count: usize, tol: f64) -> Result<EigenResult> {
    lowest_eigenpairs_with(matrix, &EigenOptions::new(count, tol))
}

pub fn lowest_eigenpairs_with(matrix: &SparseMatrix, opts: &EigenOptions) -> Result<EigenResult> {
    let dim = matrix.dim();
    if opts.count > dim {
        return Err(Error::InvalidArgument(format!(
            "requested {} eigenpairs from a {dim}-dimensional matrix",
            opts.count
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("eigen tolerance must be > 0".into()));
    }
    if opts.count == 0 {
        return Ok(EigenResult {
            eigenvalues: vec![],
            eigenvectors: vec![],
            residuals: vec![],
        });
    }
    let dense = match opts.solver {
        Solver::Auto => dim <= DENSE_LIMIT,
        Solver::Dense => true,
        Solver::Lanczos => false,
    };
    let (values, vectors) = if dense {
        dense_lowest(matrix, opts.count)
    } else {
        lanczos_lowest(matrix, opts)?
    };
    let residuals: Vec<f64> = values
        .iter()
        .zip(&vectors)
        .map(|(&l, v)| residual(matrix, l, v))
        .collect();
    for (&l, &r) in values.iter().zip(&residuals) {
        if r > opts.tol * l.abs().max(1.0) {
            return Err(Error::Convergence {
                best_residual: r,
                iterations: 0,
            });
        }
    }
    Ok(EigenResult {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
    })
}

fn residual(matrix: &SparseMatrix, lambda: f64, v: &[f64]) -> f64 {
    matrix
        .matvec(v)
        .iter()
        .zip(v)
        .map(|(av, x)| (av - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dense_lowest(matrix: &SparseMatrix, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (values, vectors) = sorted_eigen(matrix.to_dense());
    let vecs = (0..count).map(|c| normalized(vectors.column(c).iter().copied().collect())).collect();
    (values[..count].to_vec(), vecs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in against {
            let c = dot(w, q);
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize, against: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, against);
        let n = norm(&v);
        if n > 1e-8 {
            return Some(v.into_iter().map(|x| x / n).collect());
        }
    }
    None
}

/// Restarts allowed beyond the locking and verification runs.
const MAX_RESTARTS: usize = 200;

/// Lanczos with full reorthogonalization, explicit restarts and locking.
/// Each run builds a Krylov space orthogonal to the already locked vectors;
/// converged Ritz pairs are locked and the next run starts from the sum of
/// the unconverged ones. A final run orthogonal to everything checks that no
/// lower (for instance degenerate) eigenvalue was missed.
fn lanczos_lowest(matrix: &SparseMatrix, opts: &EigenOptions) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = matrix.dim();
    let count = opts.count;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = matrix.max_abs().max(1.0);
    let mut locked: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut iterations = 0usize;
    let mut start: Option<Vec<f64>> = None;
    let mut verified = false;
    for _ in 0..(4 * count + 8 + MAX_RESTARTS) {
        let verifying = locked.len() >= count;
        let locked_vecs: Vec<Vec<f64>> = locked.iter().map(|(_, v)| v.clone()).collect();
        let free = dim - locked_vecs.len();
        if free == 0 {
            verified = true;
            break;
        }
        let want = if verifying { 1 } else { count - locked.len() }.min(free);
        let cap = (10 * count + 200).min(free);
        let run = lanczos_run(matrix, &locked_vecs, start.take(), want, cap, opts.tol, scale, &mut rng);
        iterations += run.steps;
        let Some(run_pairs) = run.pairs else {
            verified = true;
            break;
        };
        let mut fresh = Vec::new();
        let mut pending: Vec<Vec<f64>> = Vec::new();
        // lowest unconverged Ritz value less its residual
        let mut floor = f64::INFINITY;
        let previous_best = best_residual;
        for (l, v) in run_pairs {
            let r = residual(matrix, l, &v);
            if pending.is_empty() && r <= opts.tol * l.abs().max(1.0) {
                fresh.push((l, v));
            } else {
                if pending.is_empty() {
                    floor = l - r;
                }
                best_residual = best_residual.min(r);
                pending.push(v);
            }
        }
        if !pending.is_empty() {
            let mut s = vec![0.0; dim];
            for v in &pending {
                s.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            start = Some(s);
        }
        if verifying {
            let top = locked[count - 1].0;
            let slack = opts.tol * top.abs().max(1.0);
            let below: Vec<_> = fresh.into_iter().filter(|(l, _)| *l < top - slack).collect();
            if below.is_empty() && (pending.is_empty() || floor > top + slack) {
                verified = true;
                break;
            }
            locked.extend(below);
            locked.sort_by(|a, b| a.0.total_cmp(&b.0));
            locked.truncate(count);
        } else {
            let stalled = fresh.is_empty() && best_residual > 0.9 * previous_best;
            locked.extend(fresh);
            locked.sort_by(|a, b| a.0.total_cmp(&b.0));
            if stalled && previous_best.is_finite() {
                break;
            }
        }
    }
    if locked.len() < count || !verified {
        return Err(Error::Convergence {
            best_residual,
            iterations,
        });
    }
    Ok(locked.into_iter().unzip())
}

struct LanczosRun {
    /// Lowest Ritz pairs, ascending; `None` when the space orthogonal to
    /// the locked vectors is empty.
    pairs: Option<Vec<(f64, Vec<f64>)>>,
    steps: usize,
}

/// Gram-Schmidt against `against`, twice, returning the summed coefficients.
fn orthogonalize_coeffs(w: &mut [f64], against: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; against.len()];
    for _ in 0..2 {
        for (c, q) in coeffs.iter_mut().zip(against) {
            let d = dot(w, q);
            *c += d;
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
        }
    }
    coeffs
}

fn combine(basis: &[Vec<f64>], vecs: &DMatrix<f64>, col: usize) -> Vec<f64> {
    let mut y = vec![0.0; basis[0].len()];
    for (r, q) in basis.iter().enumerate() {
        let c = vecs[(r, col)];
        y.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
    }
    y
}

/// Thick-restart Lanczos with full reorthogonalization. The projected matrix
/// is assembled from the Gram-Schmidt coefficients, so after a restart it is
/// an arrowhead of kept Ritz values coupled to the residual direction.
#[allow(clippy::too_many_arguments)]
fn lanczos_run(
    matrix: &SparseMatrix,
    locked: &[Vec<f64>],
    start: Option<Vec<f64>>,
    want: usize,
    cap: usize,
    tol: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> LanczosRun {
    let dim = matrix.dim();
    let free = dim - locked.len();
    let from_start = start.and_then(|mut v| {
        orthogonalize(&mut v, locked);
        let n = norm(&v);
        (n > 1e-8).then(|| v.into_iter().map(|x| x / n).collect())
    });
    let Some(v0) = from_start.or_else(|| random_unit(rng, dim, locked)) else {
        return LanczosRun { pairs: None, steps: 0 };
    };
    let cap = cap.max(want + 2).min(free);
    let keep = (cap / 2).max(want + 1).min(cap.saturating_sub(1)).max(want);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // projected matrix; kept Ritz values sit on the diagonal after a restart
    let mut t = DMatrix::<f64>::zeros(cap, cap);
    let mut next = v0;
    let mut steps = 0usize;
    for restart in 0..=MAX_RESTARTS {
        let mut last_beta = 0.0;
        while basis.len() < cap {
            let j = basis.len();
            basis.push(next.clone());
            let mut w = matrix.matvec(&basis[j]);
            steps += 1;
            let mut all: Vec<Vec<f64>> = locked.to_vec();
            all.extend(basis.iter().cloned());
            let coeffs = orthogonalize_coeffs(&mut w, &all);
            for (i, &c) in coeffs[locked.len()..].iter().enumerate() {
                t[(i, j)] = c;
                t[(j, i)] = c;
            }
            let b = norm(&w);
            last_beta = b;
            if basis.len() == cap {
                next = if b > 0.0 { w.into_iter().map(|x| x / b).collect() } else { w };
                break;
            }
            if b <= 1e-10 * scale {
                // invariant subspace: continue from a fresh orthogonal direction
                last_beta = 0.0;
                match random_unit(rng, dim, &all) {
                    Some(v) => next = v,
                    None => break,
                }
            } else {
                next = w.into_iter().map(|x| x / b).collect();
            }
        }
        let m = basis.len();
        let (vals, vecs) = sorted_eigen(t.view((0, 0), (m, m)).into_owned());
        let k = want.min(m);
        let converged = (0..k).all(|i| (last_beta * vecs[(m - 1, i)]).abs() <= 0.1 * tol * vals[i].abs().max(1.0));
        if converged || m >= free || last_beta == 0.0 || restart == MAX_RESTARTS {
            let pairs = (0..k).map(|i| (vals[i], normalized(combine(&basis, &vecs, i)))).collect();
            return LanczosRun { pairs: Some(pairs), steps };
        }
        // thick restart: keep the lowest Ritz vectors and the residual direction
        let kept: Vec<Vec<f64>> = (0..keep).map(|i| combine(&basis, &vecs, i)).collect();
        t.fill(0.0);
        for i in 0..keep {
            t[(i, i)] = vals[i];
        }
        basis = kept;
    }
    unreachable!("the final restart always returns")
}

/// Physical inputs of the renormalization search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormTarget {
    pub mb_phys: f64,
    pub mf_phys: f64,
    pub lambda: f64,
    pub cutoff: u32,
    pub k: u32,
}

impl RenormTarget {
    pub fn validate(&self) -> Result<()> {
        if !(self.mb_phys > 0.0 && self.mf_phys > 0.0) || !self.mb_phys.is_finite() || !self.mf_phys.is_finite() {
            return Err(Error::InvalidArgument("physical masses must be positive and finite".into()));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("coupling must be finite".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidArgument("renormalization needs K >= 2".into()));
        }
        if self.cutoff < self.k {
            return Err(Error::InvalidArgument(format!("cutoff {} must be >= K = {}", self.cutoff, self.k)));
        }
        Ok(())
    }
}

/// How the Lagrangian coupling `λ` maps to the Hamiltonian coupling `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingConvention {
    /// `g = λ`
    Identity,
    /// `g = λ / sqrt(4π)`
    Sqrt4pi,
}

impl CouplingConvention {
    pub fn g(self, lambda: f64) -> f64 {
        match self {
            CouplingConvention::Identity => lambda,
            CouplingConvention::Sqrt4pi => lambda / (4.0 * PI).sqrt(),
        }
    }
}

/// What the lowest eigenvalue of each sector is matched to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionConvention {
    /// lowest `M^2` equals the squared physical mass
    MassSquared,
    /// lowest `M^2` equals the physical mass itself
    Literal,
}

impl ConditionConvention {
    pub fn target(self, mass: f64) -> f64 {
        match self {
            ConditionConvention::MassSquared => mass * mass,
            ConditionConvention::Literal => mass,
        }
    }
}

/// Which `Q = 0` level the boson condition is imposed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BosonLevel {
    /// the lowest eigenvalue of the block
    Lowest,
    /// the eigenvalue whose vector has the largest weight on the single
    /// boson `b:[(K,1)]`; needs the full dense spectrum of the block
    SingleBosonOverlap,
}

/// Largest `Q = 0` dimension the overlap tracking will diagonalize densely.
pub const OVERLAP_DENSE_LIMIT: usize = 8000;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RenormOptions {
    pub coupling: CouplingConvention,
    pub condition: ConditionConvention,
    pub boson_level: BosonLevel,
    /// Relative tolerance on both conditions.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Drop the angel state from the `Q = 0` block.
    pub exclude_angel: bool,
    /// Start from these bare masses instead of the analytic seed.
    pub start: Option<(f64, f64)>,
    pub eigen_tol: f64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        RenormOptions {
            coupling: CouplingConvention::Identity,
            condition: ConditionConvention::MassSquared,
            boson_level: BosonLevel::Lowest,
            tol: 1e-6,
            max_sweeps: 50,
            exclude_angel: false,
            start: None,
            eigen_tol: 1e-9,
        }
    }
}

/// One outer iteration of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormStep {
    pub sweep: usize,
    pub mb2: f64,
    pub m_f: f64,
    /// `Q = 0` level the boson condition is imposed on
    pub level_q0: f64,
    /// lowest `Q = 1` level
    pub level_q1: f64,
    /// weight of the single-boson state in the `Q = 0` level, when tracked
    pub overlap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenormResult {
    pub m_b: f64,
    pub m_f: f64,
    pub g: f64,
    pub sweeps: usize,
    pub level_q0: f64,
    pub level_q1: f64,
    pub overlap: Option<f64>,
    pub trace: Vec<RenormStep>,
}

/// Bare-mass renormalization with default options.
pub fn renormalize(target: &RenormTarget) -> Result<RenormResult> {
    renormalize_with(target, &RenormOptions::default())
}

/// The analytic seed `m_B^2 = m̃_B^2 - α_2 λ^2 / (4π)`.
pub fn seed_mb2(target: &RenormTarget) -> Result<f64> {
    let alpha2 = self_induced_inertias(2, target.cutoff)?.alpha;
    Ok(target.mb_phys * target.mb_phys - alpha2 * target.lambda * target.lambda / (4.0 * PI))
}

/// Below this `d level / d m_B^2` the boson secant is abandoned.
const INSENSITIVE_SLOPE: f64 = 1e-2;

/// Prebuilt `Q = 0` and `Q = 1` blocks for repeated eigen-solves.
pub struct SectorPair {
    pub q0: Basis,
    pub q1: Basis,
    pub parts_q0: MassMatrixParts,
    pub parts_q1: MassMatrixParts,
}

impl SectorPair {
    pub fn build(k: u32, cutoff: u32, exclude_angel: bool) -> Result<Self> {
        let mut q0 = enumerate_basis(k, Some(0))?;
        if exclude_angel {
            q0 = q0.without_angel();
        }
        let q1 = enumerate_basis(k, Some(1))?;
        let parts_q0 = MassMatrixParts::build(&q0, cutoff)?;
        let parts_q1 = MassMatrixParts::build(&q1, cutoff)?;
        Ok(SectorPair {
            q0,
            q1,
            parts_q0,
            parts_q1,
        })
    }
}

fn lowest(parts: &MassMatrixParts, mb2: f64, m_f: f64, g: f64, tol: f64) -> Result<f64> {
    let m = parts.assemble_masses(mb2, m_f * m_f, g, m_f)?;
    Ok(lowest_eigenpairs(&m, 1, tol)?.eigenvalues[0])
}

/// The eigenvalue with the largest weight on basis state `index`, and that
/// weight.
fn max_overlap_level(parts: &MassMatrixParts, index: usize, mb2: f64, m_f: f64, g: f64) -> Result<(f64, f64)> {
    let m = parts.assemble_masses(mb2, m_f * m_f, g, m_f)?;
    if m.dim() > OVERLAP_DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            dim: m.dim(),
            cap: OVERLAP_DENSE_LIMIT,
        });
    }
    let (values, vectors) = sorted_eigen(m.to_dense());
    let (best, w) = (0..values.len())
        .map(|c| (c, vectors[(index, c)].powi(2)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty block");
    Ok((values[best], w))
}

/// Finds bare `(m_B, m_F)` whose lowest `Q = 0` and `Q = 1` eigenvalues hit
/// the physical targets, by nested secant iterations (inner on `m_F`
/// against `Q = 1`, outer on `m_B^2` against `Q = 0`).
pub fn renormalize_with(target: &RenormTarget, opts: &RenormOptions) -> Result<RenormResult> {
    target.validate()?;
    let sectors = SectorPair::build(target.k, target.cutoff, opts.exclude_angel)?;
    renormalize_on(&sectors, target, opts)
}

pub fn renormalize_on(sectors: &SectorPair, target: &RenormTarget, opts: &RenormOptions) -> Result<RenormResult> {
    target.validate()?;
    let g = opts.coupling.g(target.lambda);
    let t_b = opts.condition.target(target.mb_phys);
    let t_f = opts.condition.target(target.mf_phys);
    let (mb2_0, mf_0) = match opts.start {
        Some((mb, mf)) => (mb * mb, mf),
        None => {
            let s = seed_mb2(target)?;
            if s <= 0.0 {
                return Err(Error::InfeasibleSeed { seed_mb2: s });
            }
            (s, target.mf_phys)
        }
    };
    let eig_tol = opts.eigen_tol;
    let single_boson = match opts.boson_level {
        BosonLevel::Lowest => None,
        BosonLevel::SingleBosonOverlap => {
            let s = FockState::new(vec![], vec![], vec![(target.k, 1)])?;
            Some(sectors.q0.index_of(&s).ok_or_else(|| {
                Error::InvalidArgument("the Q = 0 basis lacks the single-boson state".into())
            })?)
        }
    };
    let mut trace: Vec<RenormStep> = Vec::new();
    let mut mf_guess = mf_0;

    // inner solve: m_F at fixed m_B^2
    let solve_f = |mb2: f64, start: f64, trace_len: usize| -> Result<(f64, f64)> {
        let f = |mf: f64| -> Result<f64> { Ok(lowest(&sectors.parts_q1, mb2, mf, g, eig_tol)? - t_f) };
        let mut x0 = start.max(0.0);
        let mut f0 = f(x0)?;
        if f0.abs() <= opts.tol * t_f.abs() {
            return Ok((x0, f0 + t_f));
        }
        // first step: the lowest Q = 1 level moves like m_F^2
        let mut x1 = (x0 * x0 - f0).max(0.0).sqrt();
        if x1 == x0 {
            x1 = x0 + 1e-3 * x0.max(1.0);
        }
        for _ in 0..opts.max_sweeps {
            let f1 = f(x1)?;
            if f1.abs() <= opts.tol * t_f.abs() {
                return Ok((x1, f1 + t_f));
            }
            let denom = f1 - f0;
            if denom == 0.0 {
                break;
            }
            let mut x2 = x1 - f1 * (x1 - x0) / denom;
            if !x2.is_finite() {
                break;
            }
            if x2 < 0.0 {
                if x1 == 0.0 {
                    return Err(Error::RenormalizationFailed {
                        sweeps: trace_len,
                        reason: format!(
                            "fermion condition needs m_F^2 < 0 at m_B^2 = {mb2:.6e} (lowest Q=1 level {:.6e} above target at m_F = 0)",
                            f1 + t_f
                        ),
                        trace: Vec::new(),
                    });
                }
                x2 = 0.0;
            }
            x0 = x1;
            f0 = f1;
            x1 = x2;
        }
        Err(Error::RenormalizationFailed {
            sweeps: trace_len,
            reason: format!("inner fermion-mass secant stalled at m_B^2 = {mb2:.6e}"),
            trace: Vec::new(),
        })
    };

    let mut eval = |mb2: f64, trace: &mut Vec<RenormStep>| -> Result<f64> {
        let (mf, e1) = solve_f(mb2, mf_guess, trace.len()).map_err(|e| with_trace(e, trace))?;
        mf_guess = mf;
        let (e0, overlap) = match single_boson {
            None => (lowest(&sectors.parts_q0, mb2, mf, g, eig_tol)?, None),
            Some(i) => {
                let (e, w) = max_overlap_level(&sectors.parts_q0, i, mb2, mf, g)?;
                (e, Some(w))
            }
        };
        trace.push(RenormStep {
            sweep: trace.len() + 1,
            mb2,
            m_f: mf,
            level_q0: e0,
            level_q1: e1,
            overlap,
        });
        Ok(e0 - t_b)
    };

    let done = |fb: f64| fb.abs() <= opts.tol * t_b.abs();
    let mut x0 = mb2_0;
    let mut f0 = eval(x0, &mut trace)?;
    if !done(f0) {
        // the lowest Q = 0 level moves like m_B^2
        let mut x1 = x0 - f0;
        if x1 == x0 {
            x1 = x0 * (1.0 + 1e-3);
        }
        let mut converged = false;
        for _ in 0..opts.max_sweeps {
            let f1 = eval(x1, &mut trace)?;
            if done(f1) {
                converged = true;
                break;
            }
            let denom = f1 - f0;
            if denom == 0.0 || trace.len() >= opts.max_sweeps {
                break;
            }
            // a free boson level moves one to one with m_B^2
            let slope = denom / (x1 - x0);
            if slope.abs() < INSENSITIVE_SLOPE {
                return Err(Error::RenormalizationFailed {
                    sweeps: trace.len(),
                    reason: format!(
                        "Q=0 level {:.6e} barely moves with m_B^2 (slope {slope:.3e}); it is not boson-like, so the boson condition cannot be met on it",
                        f1 + t_b
                    ),
                    trace,
                });
            }
            let x2 = x1 - f1 * (x1 - x0) / denom;
            if !x2.is_finite() {
                break;
            }
            x0 = x1;
            f0 = f1;
            x1 = x2;
        }
        if !converged {
            let last = trace.last().copied();
            return Err(Error::RenormalizationFailed {
                sweeps: trace.len(),
                reason: match last {
                    Some(s) => format!(
                        "boson condition not met: Q=0 level {:.6e} vs target {t_b:.6e}",
                        s.level_q0
                    ),
                    None => "no iterations".into(),
                },
                trace,
            });
        }
    }
    let last = *trace.last().expect("at least one evaluation");
    if last.mb2 < 0.0 {
        return Err(Error::RenormalizationFailed {
            sweeps: trace.len(),
            reason: format!("converged to m_B^2 = {:.6e} < 0", last.mb2),
            trace,
        });
    }
    Ok(RenormResult {
        m_b: last.mb2.sqrt(),
        m_f: last.m_f,
        g,
        sweeps: trace.len(),
        level_q0: last.level_q0,
        level_q1: last.level_q1,
        overlap: last.overlap,
        trace,
    })
}

fn with_trace(e: Error, trace: &[RenormStep]) -> Error {
    match e {
        Error::RenormalizationFailed { reason, .. } => Error::RenormalizationFailed {
            sweeps: trace.len(),
            reason,
            trace: trace.to_vec(),
        },
        other => other,
    }
}

/// One row of a scan over harmonic resolutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub k: u32,
    pub renorm: std::result::Result<RenormResult, String>,
    /// Lowest eigenvalues of the `Q = 0` and `Q = 1` blocks at the
    /// renormalized masses.
    pub lowest_q0: Vec<f64>,
    pub lowest_q1: Vec<f64>,
}

/// Renormalizes and diagonalizes each `K` of an ascending list. Failures are
/// recorded per row and do not stop the scan.
pub fn spectrum_scan(targets: &[RenormTarget], opts: &RenormOptions, nev: usize) -> Result<Vec<ScanRow>> {
    if targets.windows(2).any(|w| w[0].k >= w[1].k) {
        return Err(Error::InvalidArgument("scan K values must be strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(targets.len());
    for t in targets {
        let row = match renormalize_with(t, opts) {
            Ok(r) => {
                let solve = |q: i32| -> std::result::Result<Vec<f64>, Error> {
                    let basis = enumerate_basis(t.k, Some(q))?;
                    let basis = if q == 0 && opts.exclude_angel { basis.without_angel() } else { basis };
                    let p = ModelParams::new(r.m_b, r.m_f, r.g, t.cutoff, t.k, Some(q))?;
                    let m = crate::hamiltonian::build_mass_matrix(&basis, &p)?;
                    Ok(lowest_eigenpairs(&m, nev.min(m.dim()), opts.eigen_tol)?.eigenvalues)
                };
                let (q0, q1) = (solve(0), solve(1));
                match (q0, q1) {
                    (Ok(a), Ok(b)) => ScanRow {
                        k: t.k,
                        renorm: Ok(r),
                        lowest_q0: a,
                        lowest_q1: b,
                    },
                    (Err(e), _) | (_, Err(e)) => ScanRow {
                        k: t.k,
                        renorm: Err(e.to_string()),
                        lowest_q0: vec![],
                        lowest_q1: vec![],
                    },
                }
            }
            Err(e) => ScanRow {
                k: t.k,
                renorm: Err(e.to_string()),
                lowest_q0: vec![],
                lowest_q1: vec![],
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

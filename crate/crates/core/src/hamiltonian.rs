//! Second-quantized light-front Hamiltonian of the Yukawa model and the
//! mass-squared matrix `M^2 = K H` on a fixed-`K` block.
//!
//! The Hamiltonian is `H = H_M + H_V + H_S + H_F`. Boson operators enter the
//! interaction terms as `c_n = a_n / sqrt(n)`; fermion (`b`) and antifermion
//! (`d`) operators are used as is. Each operator string is applied right to
//! left in its written order.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_basis::{Basis, FockState, Species};
pub use crate::sparse::{SparseMatrix, STRUCTURAL_ZERO};

/// Images whose summed amplitude is this small relative to the sum of the
/// magnitudes that produced it are treated as exact cancellations.
pub const CANCELLATION_REL: f64 = 1e-12;

/// Default cap on the number of basis states `build_mass_matrix` accepts.
pub const DEFAULT_DIM_CAP: usize = 5_000_000;

/// Bare parameters of one `(K, Q)` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m_b: f64,
    pub m_f: f64,
    pub g: f64,
    pub cutoff: u32,
    pub k: u32,
    pub q: Option<i32>,
}

impl ModelParams {
    pub fn new(m_b: f64, m_f: f64, g: f64, cutoff: u32, k: u32, q: Option<i32>) -> Result<Self> {
        let p = ModelParams {
            m_b,
            m_f,
            g,
            cutoff,
            k,
            q,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("harmonic resolution K must be >= 1".into()));
        }
        if self.cutoff < self.k {
            return Err(Error::InvalidArgument(format!(
                "cutoff {} must be >= K = {}",
                self.cutoff, self.k
            )));
        }
        if !(self.m_b.is_finite() && self.m_f.is_finite() && self.g.is_finite()) {
            return Err(Error::InvalidArgument("masses and coupling must be finite".into()));
        }
        if self.m_b < 0.0 || self.m_f < 0.0 {
            return Err(Error::InvalidArgument("bare masses must be >= 0".into()));
        }
        Ok(())
    }

    pub fn mass_sq(&self, species: Species) -> f64 {
        match species {
            Species::Boson => self.m_b * self.m_b,
            _ => self.m_f * self.m_f,
        }
    }
}

/// `{n|m}`: zero if either argument is zero, otherwise `delta(m, -n) / n`.
pub fn bracket(n: i64, m: i64) -> f64 {
    if n == 0 || m == 0 || m != -n {
        0.0
    } else {
        1.0 / n as f64
    }
}

/// `H_n = sum_{j=1}^{n} 1/j`.
pub fn harmonic(n: u32) -> f64 {
    (1..=n).rev().map(|j| 1.0 / j as f64).sum()
}

/// Self-induced inertias of mode `n` at cutoff `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Closed harmonic-number forms of the inertias:
/// `α = -1/n - H(Λ-n) - H(2n) + 2H(n)`, `β = -2/n + H(n) + H(Λ) - H(Λ-n)`,
/// `γ = -1/(2n) + H(n) + H(Λ) - H(Λ+n)`.
pub fn self_induced_inertias(n: u32, cutoff: u32) -> Result<InertiaTriple> {
    if n < 1 || n > cutoff {
        return Err(Error::InvalidArgument(format!("inertia mode n = {n} outside [1, {cutoff}]")));
    }
    let table = HarmonicTable::new(cutoff + n);
    Ok(table.inertias(n, cutoff))
}

/// Lower and upper analytic bounds on `(α, β, γ)`; `None` when `n >= Λ`
/// (the logarithms diverge there).
pub fn inertia_bounds(n: u32, cutoff: u32) -> Option<[(f64, f64); 3]> {
    if n < 1 || n >= cutoff {
        return None;
    }
    let (n, l) = (n as f64, cutoff as f64);
    let la = (n / (2.0 * (l - n))).ln();
    let lb = (l * n / (l - n)).ln();
    let lg = (n * l / (l + n)).ln();
    Some([
        (la - 2.0 + 1.0 / n, la + 2.0 - 1.5 / n - 1.0 / (l - n)),
        (lb - 1.0 - 1.0 / n + 1.0 / l, lb + 2.0 - 2.0 / n - 1.0 / (l - n)),
        (lg - 1.0 + 0.5 / n + 1.0 / (l + n), lg + 2.0 - 0.5 / n - 1.0 / (l + n)),
    ])
}

struct HarmonicTable(Vec<f64>);

impl HarmonicTable {
    fn new(max: u32) -> Self {
        let mut h = Vec::with_capacity(max as usize + 1);
        let mut acc = 0.0;
        h.push(0.0);
        for j in 1..=max {
            acc += 1.0 / j as f64;
            h.push(acc);
        }
        HarmonicTable(h)
    }

    fn h(&self, n: u32) -> f64 {
        self.0[n as usize]
    }

    fn inertias(&self, n: u32, cutoff: u32) -> InertiaTriple {
        let nf = n as f64;
        InertiaTriple {
            alpha: -1.0 / nf - self.h(cutoff - n) - self.h(2 * n) + 2.0 * self.h(n),
            beta: -2.0 / nf + self.h(n) + self.h(cutoff) - self.h(cutoff - n),
            gamma: -0.5 / nf + self.h(n) + self.h(cutoff) - self.h(cutoff + n),
        }
    }
}

/// Inertias for modes `1..=k`, index `n - 1`.
pub fn inertia_table(k: u32, cutoff: u32) -> Result<Vec<InertiaTriple>> {
    if cutoff < k {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be >= K = {k}")));
    }
    let table = HarmonicTable::new(cutoff + k);
    Ok((1..=k).map(|n| table.inertias(n, cutoff)).collect())
}

/// The sixteen operator strings of the interaction Hamiltonian. A `c` suffix
/// marks the hermitian-conjugate partner printed alongside a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    V1,
    V1c,
    V2,
    V2c,
    V3,
    V3c,
    S1,
    S2,
    S3,
    S3c,
    F1,
    F1c,
    F2,
    F2c,
    F3,
    F4,
}

/// Which coupling multiplies a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Vertex,
    Seagull,
    Fork,
}

const K: usize = 0;
const L: usize = 1;
const M: usize = 2;
const N: usize = 3;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Op {
    pub species: Species,
    pub create: bool,
    pub var: usize,
}

const fn op(species: Species, create: bool, var: usize) -> Op {
    Op { species, create, var }
}

use Species::{Antifermion as A, Boson as B, Fermion as F};

impl Term {
    pub const ALL: [Term; 16] = [
        Term::V1,
        Term::V1c,
        Term::V2,
        Term::V2c,
        Term::V3,
        Term::V3c,
        Term::S1,
        Term::S2,
        Term::S3,
        Term::S3c,
        Term::F1,
        Term::F1c,
        Term::F2,
        Term::F2c,
        Term::F3,
        Term::F4,
    ];

    pub fn family(self) -> Family {
        use Term::*;
        match self {
            V1 | V1c | V2 | V2c | V3 | V3c => Family::Vertex,
            S1 | S2 | S3 | S3c => Family::Seagull,
            F1 | F1c | F2 | F2c | F3 | F4 => Family::Fork,
        }
    }

    /// Ladder operators in written (left to right) order.
    pub(crate) fn ops(self) -> &'static [Op] {
        use Term::*;
        const T: bool = true;
        const X: bool = false;
        match self {
            V1 => {
                const O: &[Op] = &[op(F, T, K), op(F, X, M), op(B, T, L)];
                O
            }
            V1c => {
                const O: &[Op] = &[op(F, T, M), op(F, X, K), op(B, X, L)];
                O
            }
            V2 => {
                const O: &[Op] = &[op(A, T, K), op(A, X, M), op(B, T, L)];
                O
            }
            V2c => {
                const O: &[Op] = &[op(A, T, M), op(A, X, K), op(B, X, L)];
                O
            }
            V3 => {
                const O: &[Op] = &[op(F, X, K), op(A, X, M), op(B, T, L)];
                O
            }
            V3c => {
                const O: &[Op] = &[op(A, T, M), op(F, T, K), op(B, X, L)];
                O
            }
            S1 => {
                const O: &[Op] = &[op(F, T, K), op(F, X, M), op(B, T, L), op(B, X, N)];
                O
            }
            S2 => {
                const O: &[Op] = &[op(A, T, K), op(A, X, M), op(B, T, L), op(B, X, N)];
                O
            }
            S3 => {
                const O: &[Op] = &[op(A, X, K), op(F, X, M), op(B, T, L), op(B, T, N)];
                O
            }
            S3c => {
                const O: &[Op] = &[op(F, T, M), op(A, T, K), op(B, X, N), op(B, X, L)];
                O
            }
            F1 => {
                const O: &[Op] = &[op(F, T, K), op(F, X, M), op(B, T, L), op(B, T, N)];
                O
            }
            F1c => {
                const O: &[Op] = &[op(F, T, M), op(F, X, K), op(B, X, N), op(B, X, L)];
                O
            }
            F2 => {
                const O: &[Op] = &[op(A, T, K), op(A, X, M), op(B, T, L), op(B, T, N)];
                O
            }
            F2c => {
                const O: &[Op] = &[op(A, T, M), op(A, X, K), op(B, X, N), op(B, X, L)];
                O
            }
            F3 => {
                const O: &[Op] = &[op(F, T, K), op(A, T, M), op(B, T, L), op(B, X, N)];
                O
            }
            F4 => {
                const O: &[Op] = &[op(A, X, M), op(F, X, K), op(B, T, N), op(B, X, L)];
                O
            }
        }
    }

    /// Bracket coefficient for momenta `v = [k, l, m, n]`.
    pub(crate) fn coefficient(self, v: &[i64; 4]) -> f64 {
        use Term::*;
        let (k, l, m, n) = (v[K], v[L], v[M], v[N]);
        match self {
            V1 | V1c | V2 | V2c => bracket(k + l, -m) + bracket(k, l - m),
            V3 | V3c => bracket(k - l, m) + bracket(k, -l + m),
            S1 | S2 => bracket(k - n, l - m) + bracket(k + l, -m - n),
            S3 | S3c => bracket(l - k, n - m),
            F1 | F1c | F2 | F2c => bracket(k + l, n - m),
            F3 | F4 => bracket(k - n, m + l) + bracket(k + l, m - n),
        }
    }
}

/// Per-image contributions split by the parameter combination that
/// multiplies them: `[m_B^2, m_F^2, g m_F, g^2]`.
pub type Components = [f64; 4];

/// Visits every momentum assignment of `term` whose annihilators hit
/// occupied modes of `state` and whose momenta balance, together with the
/// resulting state and ladder amplitude (bracket coefficient included).
pub(crate) fn for_each_term_image(
    term: Term,
    state: &FockState,
    k_max: u32,
    mut visit: impl FnMut(&[i64; 4], FockState, f64),
) {
    let ops = term.ops();
    let annihilators: Vec<Op> = ops.iter().copied().filter(|o| !o.create).collect();
    let creators: Vec<Op> = ops.iter().copied().filter(|o| o.create).collect();
    let mut vars = [0i64; 4];
    let choices: Vec<Vec<u32>> = annihilators.iter().map(|o| state.occupied(o.species)).collect();

    fn annihilate_rec(
        depth: usize,
        choices: &[Vec<u32>],
        annihilators: &[Op],
        vars: &mut [i64; 4],
        total: i64,
        inner: &mut dyn FnMut(&mut [i64; 4], i64),
    ) {
        if depth == annihilators.len() {
            inner(vars, total);
            return;
        }
        for &p in &choices[depth] {
            vars[annihilators[depth].var] = p as i64;
            annihilate_rec(depth + 1, choices, annihilators, vars, total + p as i64, inner);
        }
    }

    fn create_rec(
        depth: usize,
        creators: &[Op],
        vars: &mut [i64; 4],
        remaining: i64,
        k_max: i64,
        leaf: &mut dyn FnMut(&[i64; 4]),
    ) {
        let left = (creators.len() - depth) as i64;
        if left == 1 {
            if remaining >= 1 && remaining <= k_max {
                vars[creators[depth].var] = remaining;
                leaf(vars);
            }
            return;
        }
        for p in 1..=(remaining - (left - 1)).min(k_max) {
            vars[creators[depth].var] = p;
            create_rec(depth + 1, creators, vars, remaining - p, k_max, leaf);
        }
    }

    let mut leaf = |v: &[i64; 4]| {
        let coeff = term.coefficient(v);
        if coeff == 0.0 {
            return;
        }
        let mut out = state.clone();
        let mut amp = coeff;
        for o in ops.iter().rev() {
            let p = v[o.var] as u32;
            let factor = if o.create {
                out.create(o.species, p)
            } else {
                out.annihilate(o.species, p)
            };
            match factor {
                Some(f) => amp *= f,
                None => return,
            }
            if o.species == Species::Boson {
                amp /= (p as f64).sqrt();
            }
        }
        visit(v, out, amp);
    };
    let k_max = k_max as i64;
    annihilate_rec(0, &choices, &annihilators, &mut vars, 0, &mut |vars, total| {
        create_rec(0, &creators, vars, total, k_max, &mut leaf);
    });
}

/// Diagonal `H_M` contribution of a state split into components.
fn mass_diagonal(state: &FockState, inertias: &[InertiaTriple]) -> Components {
    let mut c = [0.0; 4];
    for &(n, w) in state.bosons() {
        let x = w as f64 / n as f64;
        c[0] += x;
        c[3] += x * inertias[n as usize - 1].alpha;
    }
    for &n in state.fermions() {
        c[1] += 1.0 / n as f64;
        c[3] += inertias[n as usize - 1].beta / n as f64;
    }
    for &n in state.antifermions() {
        c[1] += 1.0 / n as f64;
        c[3] += inertias[n as usize - 1].gamma / n as f64;
    }
    c
}

/// Images of `state` under the selected pieces of `H`, split by component.
///
/// `inertias` covers modes `1..=K` (see [`inertia_table`]). With
/// `include_mass` the `H_M` diagonal is added. Cancelled components are
/// zeroed and images with every component zero are dropped. Output is in
/// canonical state order.
pub fn images_by_component(
    state: &FockState,
    inertias: &[InertiaTriple],
    terms: &[Term],
    include_mass: bool,
) -> Vec<(FockState, Components)> {
    let k = state.momentum();
    let mut acc: HashMap<FockState, (Components, Components)> = HashMap::new();
    if include_mass {
        let d = mass_diagonal(state, inertias);
        acc.insert(state.clone(), (d, d.map(f64::abs)));
    }
    for &term in terms {
        let slot = if term.family() == Family::Vertex { 2 } else { 3 };
        for_each_term_image(term, state, k, |_, image, amp| {
            let entry = acc.entry(image).or_insert(([0.0; 4], [0.0; 4]));
            entry.0[slot] += amp;
            entry.1[slot] += amp.abs();
        });
    }
    let mut out: Vec<(FockState, Components)> = acc
        .into_iter()
        .filter_map(|(s, (mut v, mag))| {
            for i in 0..4 {
                if v[i].abs() <= CANCELLATION_REL * mag[i] {
                    v[i] = 0.0;
                }
            }
            v.iter().any(|&x| x != 0.0).then_some((s, v))
        })
        .collect();
    out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    out
}

fn combine(c: &Components, p: &ModelParams) -> f64 {
    let w = [p.m_b * p.m_b, p.m_f * p.m_f, p.g * p.m_f, p.g * p.g];
    c.iter().zip(w).map(|(x, w)| if *x == 0.0 { 0.0 } else { x * w }).sum()
}

/// `H |state>` restricted to `terms` (and `H_M` when `include_mass`), as
/// distinct images with summed amplitudes.
pub fn apply_terms(state: &FockState, params: &ModelParams, terms: &[Term], include_mass: bool) -> Vec<(FockState, f64)> {
    let inertias = inertia_table(params.k.max(state.momentum()), params.cutoff.max(state.momentum()))
        .expect("cutoff adjusted to cover the state");
    images_by_component(state, &inertias, terms, include_mass)
        .into_iter()
        .filter_map(|(s, c)| {
            let v = combine(&c, params);
            (v != 0.0).then_some((s, v))
        })
        .collect()
}

/// `H |state>` as distinct nonzero images, diagonal `H_M` included.
pub fn apply_hamiltonian(state: &FockState, params: &ModelParams) -> Vec<(FockState, f64)> {
    apply_terms(state, params, &Term::ALL, true)
}

/// The mass matrix split into parameter-independent pieces:
/// `M^2 = m_B^2 A + m_F^2 B + g m_F V + g^2 R` (each already scaled by `K`).
#[derive(Debug, Clone)]
pub struct MassMatrixParts {
    pub k: u32,
    pub cutoff: u32,
    pub parts: [SparseMatrix; 4],
}

impl MassMatrixParts {
    pub fn build(basis: &Basis, cutoff: u32) -> Result<Self> {
        Self::build_with(basis, cutoff, DEFAULT_DIM_CAP)
    }

    pub fn build_with(basis: &Basis, cutoff: u32, dim_cap: usize) -> Result<Self> {
        let k = basis.k();
        if basis.len() > dim_cap {
            return Err(Error::ResourceLimit {
                dim: basis.len(),
                cap: dim_cap,
            });
        }
        let inertias = inertia_table(k, cutoff)?;
        let kf = k as f64;
        let columns: Vec<Vec<(usize, Components)>> = basis
            .states()
            .par_iter()
            .map(|s| {
                images_by_component(s, &inertias, &Term::ALL, true)
                    .into_iter()
                    .filter_map(|(img, c)| basis.index_of(&img).map(|i| (i, c)))
                    .collect()
            })
            .collect();
        let mut triplets: [Vec<(usize, usize, f64)>; 4] = Default::default();
        for (j, col) in columns.iter().enumerate() {
            for &(i, c) in col {
                for (t, &x) in triplets.iter_mut().zip(c.iter()) {
                    if x != 0.0 {
                        t.push((i, j, kf * x));
                    }
                }
            }
        }
        let dim = basis.len();
        let [a, b, v, r] = triplets.map(|t| SparseMatrix::from_triplets(dim, t).expect("indices from basis"));
        Ok(MassMatrixParts {
            k,
            cutoff,
            parts: [a, b, v, r],
        })
    }

    /// Assembles `M^2` for the given bare parameters (`params.cutoff` must
    /// match the cutoff the parts were built with).
    pub fn assemble(&self, params: &ModelParams) -> Result<SparseMatrix> {
        if params.cutoff != self.cutoff || params.k != self.k {
            return Err(Error::InvalidArgument(
                "parameters do not match the (K, cutoff) of the prebuilt parts".into(),
            ));
        }
        self.assemble_masses(params.m_b * params.m_b, params.m_f * params.m_f, params.g, params.m_f)
    }

    /// Assembles `M^2` from squared masses directly. `m_f` enters the
    /// vertex term linearly and is passed separately so negative `m_f^2`
    /// trial values can be explored by a root finder.
    pub fn assemble_masses(&self, mb2: f64, mf2: f64, g: f64, m_f: f64) -> Result<SparseMatrix> {
        let [a, b, v, r] = &self.parts;
        SparseMatrix::linear_combination(&[(mb2, a), (mf2, b), (g * m_f, v), (g * g, r)])
    }
}

/// `M^2 = K H` on `basis`, entry `(i, j) = K <i|H|j>`. Images that fall
/// outside the basis are projected out.
pub fn build_mass_matrix(basis: &Basis, params: &ModelParams) -> Result<SparseMatrix> {
    build_mass_matrix_with(basis, params, DEFAULT_DIM_CAP)
}

pub fn build_mass_matrix_with(basis: &Basis, params: &ModelParams, dim_cap: usize) -> Result<SparseMatrix> {
    params.validate()?;
    if basis.k() != params.k {
        return Err(Error::InvalidArgument(format!(
            "basis K = {} does not match parameter K = {}",
            basis.k(),
            params.k
        )));
    }
    MassMatrixParts::build_with(basis, params.cutoff, dim_cap)?.assemble(params)
}

/// Maximum number of structurally nonzero entries in any row, diagonal
/// included.
pub fn sparsity(matrix: &SparseMatrix) -> usize {
    matrix.max_row_count()
}

/// Largest `|H_ij|`, i.e. the largest entry of `M^2` divided by `K`.
pub fn max_abs_element(matrix: &SparseMatrix, k: u32) -> f64 {
    matrix.max_abs() / k as f64
}

/// Analytic `<after| H_{S,1} |before>`, the `b†_k b_m c†_l c_n` seagull
/// term. Off the diagonal the states must differ by one fermion `m -> k`
/// and one boson `n -> l`, with identical antifermions; the element is
/// `± g^2 sqrt(w w' / (l n)) ((1 - δ_kn) / (k - n + δ_kn) + 1 / (k + l))`
/// with `w` the occupancy of `n` before and `w'` that of `l` after. The sign
/// is `(-1)` to the number of fermions strictly between `k` and `m`.
pub fn matrix_element_hs1(before: &FockState, after: &FockState, params: &ModelParams) -> f64 {
    let g2 = params.g * params.g;
    let kernel = |k: i64, l: i64, n: i64| -> f64 {
        let first = if k == n { 0.0 } else { 1.0 / (k - n) as f64 };
        first + 1.0 / (k + l) as f64
    };
    if before.momentum() != after.momentum() || before.antifermions() != after.antifermions() {
        return 0.0;
    }
    if before == after {
        let mut sum = 0.0;
        for &k in before.fermions() {
            for &(l, w) in before.bosons() {
                sum += w as f64 / l as f64 * kernel(k as i64, l as i64, l as i64);
            }
        }
        return g2 * sum;
    }
    let only = |a: &[u32], b: &[u32]| -> Vec<u32> { a.iter().copied().filter(|x| b.binary_search(x).is_err()).collect() };
    let removed = only(before.fermions(), after.fermions());
    let added = only(after.fermions(), before.fermions());
    let (&[m], &[k]) = (removed.as_slice(), added.as_slice()) else {
        return 0.0;
    };
    let mut modes: Vec<u32> = before.occupied(Species::Boson);
    modes.extend(after.occupied(Species::Boson));
    modes.sort_unstable();
    modes.dedup();
    let (mut gained, mut lost) = (Vec::new(), Vec::new());
    for &p in &modes {
        let d = after.occupancy(Species::Boson, p) as i64 - before.occupancy(Species::Boson, p) as i64;
        match d {
            0 => {}
            1 => gained.push(p),
            -1 => lost.push(p),
            _ => return 0.0,
        }
    }
    let (&[l], &[n]) = (gained.as_slice(), lost.as_slice()) else {
        return 0.0;
    };
    if k + l != m + n {
        return 0.0;
    }
    let w = before.occupancy(Species::Boson, n) as f64;
    let w_after = after.occupancy(Species::Boson, l) as f64;
    let (lo, hi) = (k.min(m), k.max(m));
    let between = before.fermions().iter().filter(|&&p| p > lo && p < hi).count();
    let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
    g2 * sign * (w * w_after / (l as f64 * n as f64)).sqrt() * kernel(k as i64, l as i64, n as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_basis::enumerate_basis;

    fn params(k: u32, g: f64) -> ModelParams {
        ModelParams::new(1.3, 0.7, g, 64.max(k), k, Some(0)).unwrap()
    }

    #[test]
    fn bracket_cases() {
        assert_eq!(bracket(2, -2), 0.5);
        assert_eq!(bracket(-3, 3), -1.0 / 3.0);
        assert_eq!(bracket(0, 5), 0.0);
        assert_eq!(bracket(5, 0), 0.0);
        assert_eq!(bracket(3, 2), 0.0);
    }

    #[test]
    fn inertia_domain() {
        assert!(self_induced_inertias(0, 8).is_err());
        assert!(self_induced_inertias(9, 8).is_err());
        assert!(self_induced_inertias(8, 8).is_ok());
    }

    #[test]
    fn free_theory_is_diagonal() {
        let p = params(6, 0.0);
        for s in enumerate_basis(6, Some(0)).unwrap().states() {
            let img = apply_hamiltonian(s, &p);
            assert_eq!(img.len(), 1);
            assert_eq!(&img[0].0, s);
            let expect: f64 = s.bosons().iter().map(|&(n, w)| w as f64 * p.m_b.powi(2) / n as f64).sum::<f64>()
                + s.fermions().iter().chain(s.antifermions()).map(|&n| p.m_f.powi(2) / n as f64).sum::<f64>();
            assert!((img[0].1 - expect).abs() < 1e-14 * expect);
        }
    }

    #[test]
    fn k1_matrix_is_boson_mass() {
        let p = ModelParams::new(2.0, 1.0, 0.0, 4, 1, Some(0)).unwrap();
        let b = enumerate_basis(1, Some(0)).unwrap();
        let m = build_mass_matrix(&b, &p).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(sparsity(&m), 1);
        assert_eq!(max_abs_element(&m, 1), 4.0);
    }

    #[test]
    fn dimension_cap() {
        let b = enumerate_basis(6, Some(0)).unwrap();
        let p = params(6, 1.0);
        let err = build_mass_matrix_with(&b, &p, 10).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { cap: 10, .. }));
    }

    #[test]
    fn images_keep_momentum_and_charge() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 64, 7, None).unwrap();
        for s in enumerate_basis(7, None).unwrap().states() {
            for (img, _) in apply_hamiltonian(s, &p) {
                assert_eq!(img.momentum(), 7);
                assert_eq!(img.charge(), s.charge());
            }
        }
    }

    #[test]
    fn vertex_pair_cancellation_at_equal_momenta() {
        // b_k d_k c†_{2k} has coefficient 1/k - 1/k
        let p = ModelParams::new(1.0, 1.0, 1.0, 16, 4, Some(0)).unwrap();
        let s: FockState = "f:[2];a:[2];b:[]".parse().unwrap();
        let target: FockState = "f:[];a:[];b:[(4,1)]".parse().unwrap();
        assert!(apply_hamiltonian(&s, &p).iter().all(|(img, _)| img != &target));
    }

    #[test]
    fn parts_match_direct_assembly() {
        let b = enumerate_basis(6, Some(1)).unwrap();
        let p = ModelParams::new(1.7, 0.4, 0.9, 32, 6, Some(1)).unwrap();
        let parts = MassMatrixParts::build(&b, 32).unwrap();
        let m = parts.assemble(&p).unwrap();
        for (j, s) in b.states().iter().enumerate() {
            for (img, v) in apply_hamiltonian(s, &p) {
                let i = b.index_of(&img).unwrap();
                assert!((m.get(i, j) - 6.0 * v).abs() < 1e-12 * (1.0 + v.abs()));
            }
        }
        let wrong = ModelParams { cutoff: 33, ..p };
        assert!(parts.assemble(&wrong).is_err());
    }

    #[test]
    fn hs1_sign_with_intervening_fermion() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 16, 6, None).unwrap();
        let before: FockState = "f:[1,2];a:[];b:[(3,1)]".parse().unwrap();
        let after: FockState = "f:[2,3];a:[];b:[(1,1)]".parse().unwrap();
        // m = 1 -> k = 3 passes fermion 2; n = 3 -> l = 1
        let want = -(1.0f64 / 3.0).sqrt() * (0.0 + 1.0 / 4.0);
        assert!((matrix_element_hs1(&before, &after, &p) - want).abs() < 1e-15);
        let unrelated: FockState = "f:[6];a:[];b:[]".parse().unwrap();
        assert_eq!(matrix_element_hs1(&before, &unrelated, &p), 0.0);
    }
}

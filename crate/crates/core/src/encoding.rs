//! Classical side of the compact encoding: qubit budgets, the change
//! descriptors that index nonzero matrix elements, and the emulated
//! occupation-number measurement.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_basis::{max_distinct_parts, FockState, Species};
use crate::hamiltonian::{Family, ModelParams, Term};
use crate::observables::invariant_mass_free;

/// `ceil(log2(x))` for `x >= 1`, and 0 for `x <= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// The `n`-th pair `(k, l)` with `k > l >= 1`, counting from `n = 1`:
/// `(2,1), (3,1), (3,2), (4,1), ...`.
pub fn tuple_from_index(n: u64) -> (u64, u64) {
    assert!(n >= 1, "tuple index starts at 1");
    let mut k = ((3.0 + ((8 * n - 7) as f64).sqrt()) / 2.0).floor() as u64;
    // exact correction for rounding in the square root
    while k > 2 && index_from_tuple(k, 1) > n {
        k -= 1;
    }
    while index_from_tuple(k + 1, 1) <= n {
        k += 1;
    }
    let l = n + 1 + (k - 2) - k * (k - 1) / 2;
    (k, l)
}

/// Inverse of [`tuple_from_index`]: `n(k, l) = l - 1 + k(k-1)/2 - (k-2)`.
pub fn index_from_tuple(k: u64, l: u64) -> u64 {
    assert!(k > l && l >= 1, "need k > l >= 1");
    l - 1 + k * (k - 1) / 2 - (k - 2)
}

/// One occupancy change: `raise` adds a quantum, otherwise one is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub momentum: u32,
    pub raise: bool,
    pub species: Species,
}

/// A change descriptor: up to four slots, additions first, then removals;
/// within each group fermions, antifermions, bosons, each by ascending
/// momentum. Unused trailing slots are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Delta {
    pub slots: [Option<Slot>; 4],
}

impl Delta {
    pub const ZERO: Delta = Delta { slots: [None; 4] };

    /// Canonicalizes a list of slots. Returns `None` for more than four.
    pub fn from_slots(mut slots: Vec<Slot>) -> Option<Delta> {
        if slots.len() > 4 {
            return None;
        }
        slots.sort_by_key(|s| (!s.raise, s.species, s.momentum));
        let mut out = [None; 4];
        for (o, s) in out.iter_mut().zip(slots) {
            *o = Some(s);
        }
        Some(Delta { slots: out })
    }

    pub fn is_zero(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    pub fn active(&self) -> impl Iterator<Item = Slot> + '_ {
        self.slots.iter().flatten().copied()
    }

    /// Checks the slot-count, species and momentum-conservation rules.
    pub fn is_valid(&self) -> bool {
        let n = self.active().count();
        if self.slots[..n].iter().any(Option::is_none) {
            return false;
        }
        let bosons = self.active().filter(|s| s.species == Species::Boson).count();
        let shape = match n {
            0 => true,
            3 => bosons == 1,
            4 => bosons == 2 && !self.slots[3].unwrap().raise,
            _ => false,
        };
        if !shape || (n > 0 && !self.slots[0].unwrap().raise) {
            return false;
        }
        if self.active().any(|s| s.momentum == 0) {
            return false;
        }
        let balance: i64 = self
            .active()
            .map(|s| if s.raise { s.momentum as i64 } else { -(s.momentum as i64) })
            .sum();
        balance == 0 && Delta::from_slots(self.active().collect()).as_ref() == Some(self)
    }
}

/// A distinct change with the number of `(term, momenta)` assignments that
/// produce it and the sum of their bracket coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub delta: Delta,
    pub multiplicity: u32,
    pub coefficient: f64,
}

/// Every change descriptor that the Hamiltonian can realize inside a
/// `K` block. The zero descriptor comes first, then vertex, seagull and fork
/// families; inside a family descriptors are ordered by transferred momentum
/// and then by the remaining free momenta, extending the pair index of
/// [`tuple_from_index`]. Changes whose coefficients cancel identically are
/// dropped.
pub fn enumerate_deltas(k: u32) -> Vec<DeltaRecord> {
    let mut keyed: Vec<((u8, u32, Vec<u32>, usize), Delta, f64)> = Vec::new();
    let mut zero_mult = 1u32;
    for (ti, term) in Term::ALL.iter().enumerate() {
        let fam = match term.family() {
            Family::Vertex => 0u8,
            Family::Seagull => 1,
            Family::Fork => 2,
        };
        for_each_term_tuple(*term, k, |vars, total, coeff| {
            let ops = term.ops();
            let mut net: HashMap<(Species, u32), i32> = HashMap::new();
            for o in ops {
                *net.entry((o.species, vars[o.var] as u32)).or_default() += if o.create { 1 } else { -1 };
            }
            let mut slots = Vec::new();
            for ((species, momentum), d) in net {
                for _ in 0..d.unsigned_abs() {
                    slots.push(Slot {
                        momentum,
                        raise: d > 0,
                        species,
                    });
                }
            }
            if slots.is_empty() {
                zero_mult += 1;
                return;
            }
            let delta = Delta::from_slots(slots).expect("at most four ladder operators");
            let mut free: Vec<u32> = ops.iter().filter(|o| o.create).map(|o| vars[o.var] as u32).collect();
            free.pop();
            let mut key_rest: Vec<u32> = ops.iter().filter(|o| !o.create).map(|o| vars[o.var] as u32).collect();
            key_rest.extend(free);
            keyed.push(((fam, total, key_rest, ti), delta, coeff));
        });
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let mut order: Vec<Delta> = Vec::new();
    let mut agg: HashMap<Delta, (u32, f64, f64)> = HashMap::new();
    for (_, d, c) in keyed {
        let e = agg.entry(d).or_insert_with(|| {
            order.push(d);
            (0, 0.0, 0.0)
        });
        e.0 += 1;
        e.1 += c;
        e.2 += c.abs();
    }
    let mut out = vec![DeltaRecord {
        delta: Delta::ZERO,
        multiplicity: zero_mult,
        coefficient: f64::NAN,
    }];
    for d in order {
        let (mult, sum, mag) = agg[&d];
        if sum.abs() > 1e-12 * mag {
            out.push(DeltaRecord {
                delta: d,
                multiplicity: mult,
                coefficient: sum,
            });
        }
    }
    out
}

/// Visits each momentum assignment of a term within a `K` block with a
/// nonzero bracket coefficient: `(vars, transferred momentum, coefficient)`.
fn for_each_term_tuple(term: Term, k: u32, mut visit: impl FnMut(&[i64; 4], u32, f64)) {
    let ops = term.ops();
    let annihilators: Vec<usize> = ops.iter().filter(|o| !o.create).map(|o| o.var).collect();
    let creators: Vec<usize> = ops.iter().filter(|o| o.create).map(|o| o.var).collect();
    let mut vars = [0i64; 4];
    for total in 1..=k as i64 {
        compositions(total, annihilators.len(), &mut |parts_a| {
            compositions(total, creators.len(), &mut |parts_c| {
                for (&v, &p) in annihilators.iter().zip(parts_a) {
                    vars[v] = p;
                }
                for (&v, &p) in creators.iter().zip(parts_c) {
                    vars[v] = p;
                }
                let c = term.coefficient(&vars);
                if c != 0.0 {
                    visit(&vars, total as u32, c);
                }
            });
        });
    }
}

/// Ordered compositions of `total` into `parts` positive integers.
fn compositions(total: i64, parts: usize, visit: &mut dyn FnMut(&[i64])) {
    fn rec(remaining: i64, left: usize, cur: &mut Vec<i64>, visit: &mut dyn FnMut(&[i64])) {
        if left == 1 {
            cur.push(remaining);
            visit(cur);
            cur.pop();
            return;
        }
        for p in 1..=(remaining - (left as i64 - 1)) {
            cur.push(p);
            rec(remaining - p, left - 1, cur, visit);
            cur.pop();
        }
    }
    if parts == 0 || total < parts as i64 {
        return;
    }
    rec(total, parts, &mut Vec::with_capacity(parts), visit);
}

/// Applies a change to a state. `None` when a removal hits an empty mode or
/// a fermionic addition hits an occupied one.
pub fn apply_delta(state: &FockState, delta: &Delta) -> Option<FockState> {
    let mut removals: HashMap<(Species, u32), u32> = HashMap::new();
    for s in delta.active() {
        if s.raise {
            if s.species != Species::Boson && state.occupancy(s.species, s.momentum) > 0 {
                return None;
            }
        } else {
            *removals.entry((s.species, s.momentum)).or_default() += 1;
        }
    }
    if removals.iter().any(|(&(sp, n), &c)| state.occupancy(sp, n) < c) {
        return None;
    }
    let mut out = state.clone();
    for s in delta.active().filter(|s| !s.raise) {
        out.annihilate(s.species, s.momentum)?;
    }
    for s in delta.active().filter(|s| s.raise) {
        out.create(s.species, s.momentum)?;
    }
    Some(out)
}

/// One state whose Delta images and Hamiltonian images differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleMismatch {
    pub state: String,
    /// reached by `H` but by no descriptor
    pub only_hamiltonian: Vec<String>,
    /// reached by a descriptor but not by `H`
    pub only_deltas: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub k: u32,
    pub states: usize,
    pub deltas: usize,
    pub mismatch_count: usize,
    /// the first few mismatches
    pub mismatches: Vec<OracleMismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatch_count == 0
    }
}

const MAX_REPORTED: usize = 20;

/// Checks that, for every state of the `K` block (all charges), the states
/// reachable through the nonzero descriptors are exactly the off-diagonal
/// images of the Hamiltonian.
pub fn oracle_check(k: u32) -> Result<OracleReport> {
    let basis = crate::fock_basis::enumerate_basis(k, None)?;
    let inertias = crate::hamiltonian::inertia_table(k, k.max(2))?;
    let deltas: Vec<Delta> = enumerate_deltas(k).into_iter().map(|r| r.delta).filter(|d| !d.is_zero()).collect();
    let mut report = OracleReport {
        k,
        states: basis.len(),
        deltas: deltas.len(),
        mismatch_count: 0,
        mismatches: Vec::new(),
    };
    for state in basis.states() {
        let from_h: std::collections::BTreeSet<FockState> =
            crate::hamiltonian::images_by_component(state, &inertias, &Term::ALL, false)
                .into_iter()
                .map(|(s, _)| s)
                .filter(|s| s != state)
                .collect();
        let from_d: std::collections::BTreeSet<FockState> =
            deltas.iter().filter_map(|d| apply_delta(state, d)).filter(|s| s != state).collect();
        if from_h != from_d {
            report.mismatch_count += 1;
            if report.mismatches.len() < MAX_REPORTED {
                report.mismatches.push(OracleMismatch {
                    state: state.to_string(),
                    only_hamiltonian: from_h.difference(&from_d).map(|s| s.to_string()).collect(),
                    only_deltas: from_d.difference(&from_h).map(|s| s.to_string()).collect(),
                });
            }
        }
    }
    Ok(report)
}

/// The three 1+1D encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    DirectDirect,
    DirectCompact,
    Compact,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct-direct" => Ok(Scheme::DirectDirect),
            "direct-compact" => Ok(Scheme::DirectCompact),
            "compact" => Ok(Scheme::Compact),
            other => Err(Error::InvalidArgument(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitBudget {
    pub scheme: String,
    pub k: u32,
    pub total_qubits: u64,
    pub breakdown: Vec<(String, u64)>,
}

impl QubitBudget {
    fn new(scheme: &str, k: u32, breakdown: Vec<(String, u64)>) -> Self {
        QubitBudget {
            scheme: scheme.to_string(),
            k,
            total_qubits: breakdown.iter().map(|(_, q)| q).sum(),
            breakdown,
        }
    }
}

/// Qubits needed to store one Fock state of a `K` block.
pub fn qubit_count(scheme: Scheme, k: u32) -> Result<QubitBudget> {
    if k < 1 {
        return Err(Error::InvalidArgument("harmonic resolution K must be >= 1".into()));
    }
    let kk = k as u64;
    let lk = ceil_log2(kk) as u64;
    Ok(match scheme {
        Scheme::Compact => {
            let i = max_distinct_parts(k) as u64;
            QubitBudget::new(
                "compact",
                k,
                vec![
                    ("fermion registers".into(), i * lk),
                    ("antifermion registers".into(), i * lk),
                    ("boson registers".into(), 2 * i * lk),
                ],
            )
        }
        Scheme::DirectCompact => {
            let bosons: u64 = (1..=kk).map(|n| ceil_log2(kk / n) as u64).sum();
            QubitBudget::new(
                "direct-compact",
                k,
                vec![
                    ("fermion modes".into(), kk),
                    ("antifermion modes".into(), kk),
                    ("boson occupancies (binary)".into(), bosons),
                ],
            )
        }
        Scheme::DirectDirect => {
            let bosons: u64 = (1..=kk).map(|n| kk / n).sum();
            QubitBudget::new(
                "direct-direct",
                k,
                vec![
                    ("fermion modes".into(), kk),
                    ("antifermion modes".into(), kk),
                    ("boson occupancies (unary)".into(), bosons),
                ],
            )
        }
    })
}

/// Upper bound on qubits for a 3+1D QCD light-front state: `2K` fermion or
/// antifermion modes and `K` boson modes, each with its quantum numbers.
/// `ceil(log2(n_c^2 - 1))` is taken as 0 for `n_c = 1`.
pub fn qubit_count_qcd(k: u32, lambda_perp: u32, n_f: u32, n_c: u32) -> Result<QubitBudget> {
    if k < 1 || lambda_perp < 1 || n_f < 1 || n_c < 1 {
        return Err(Error::InvalidArgument("all QCD estimator arguments must be >= 1".into()));
    }
    let kk = k as u64;
    let lk = ceil_log2(kk) as u64;
    let lp = ceil_log2(lambda_perp as u64) as u64;
    let colors_b = ceil_log2((n_c as u64 * n_c as u64).saturating_sub(1)) as u64;
    let per_fermion = lk + 2 * lp + 1 + ceil_log2(n_f as u64) as u64 + ceil_log2(n_c as u64) as u64;
    let per_boson = lk + 2 * lp + lk + 1 + colors_b;
    Ok(QubitBudget::new(
        "qcd",
        k,
        vec![
            ("fermion/antifermion modes".into(), 2 * kk * per_fermion),
            ("boson modes".into(), kk * per_boson),
        ],
    ))
}

/// Emulates sampling the total occupancy of mode `n` (all species) from a
/// distribution over Fock states. With `qsq`, states whose free invariant
/// mass exceeds it are discarded and the estimate conditions on the rest.
/// Returns `(expected occupancy, kept probability)`.
pub fn measure_occupation(
    distribution: &[(FockState, f64)],
    n: u32,
    params: &ModelParams,
    qsq: Option<f64>,
) -> Result<(f64, f64)> {
    let total: f64 = distribution.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
    }
    if distribution.iter().any(|(_, p)| *p < 0.0) {
        return Err(Error::InvalidArgument("negative probability".into()));
    }
    let mut kept = 0.0;
    let mut acc = 0.0;
    for (s, p) in distribution {
        let flag = qsq.map_or(true, |q| invariant_mass_free(s, params) <= q);
        if !flag {
            continue;
        }
        let occ = s.occupancy(Species::Fermion, n) + s.occupancy(Species::Antifermion, n) + s.occupancy(Species::Boson, n);
        kept += p;
        acc += p * occ as f64;
    }
    if kept <= 0.0 {
        return Err(Error::DegenerateTruncation { kept });
    }
    Ok((acc / kept, kept))
}

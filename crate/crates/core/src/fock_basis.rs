//! Fock states of fixed harmonic resolution and their enumeration.
//!
//! A state lists only occupied modes: strictly increasing fermion and
//! antifermion momenta (occupancy one by Pauli exclusion) and a sorted list
//! of `(momentum, occupancy)` boson modes. Every state of a `K` block carries
//! total momentum `K`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parton species. The numeric codes match the change-descriptor encoding
/// (fermion = 0, antifermion = 1, boson = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    Fermion = 0,
    Antifermion = 1,
    Boson = 2,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::Fermion, Species::Antifermion, Species::Boson];

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// One occupation-number basis vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FockState {
    fermions: Vec<u32>,
    antifermions: Vec<u32>,
    bosons: Vec<(u32, u32)>,
}

impl FockState {
    /// Builds a state, checking the list invariants (positive momenta,
    /// strictly increasing lists, positive boson occupancies).
    pub fn new(fermions: Vec<u32>, antifermions: Vec<u32>, bosons: Vec<(u32, u32)>) -> Result<Self> {
        let state = FockState {
            fermions,
            antifermions,
            bosons,
        };
        state.validate()?;
        Ok(state)
    }

    /// Builds a state from a boson list given in any order; repeated
    /// momenta are merged.
    pub fn from_parts(mut fermions: Vec<u32>, mut antifermions: Vec<u32>, bosons: &[(u32, u32)]) -> Result<Self> {
        fermions.sort_unstable();
        antifermions.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::new();
        let mut sorted = bosons.to_vec();
        sorted.sort_unstable();
        for (n, w) in sorted {
            match merged.last_mut() {
                Some((last, occ)) if *last == n => *occ += w,
                _ => merged.push((n, w)),
            }
        }
        Self::new(fermions, antifermions, merged)
    }

    /// The empty (vacuum) state.
    pub fn vacuum() -> Self {
        FockState::default()
    }

    /// `|;;1^K>`: every quantum is a boson of momentum one.
    pub fn angel(k: u32) -> Self {
        FockState {
            fermions: Vec::new(),
            antifermions: Vec::new(),
            bosons: vec![(1, k)],
        }
    }

    fn validate(&self) -> Result<()> {
        let strictly_increasing = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
        if self.fermions.contains(&0) || self.antifermions.contains(&0) {
            return Err(Error::InvalidArgument("fermion momenta must be >= 1".into()));
        }
        if !strictly_increasing(&self.fermions) || !strictly_increasing(&self.antifermions) {
            return Err(Error::InvalidArgument(
                "fermion and antifermion momenta must be strictly increasing".into(),
            ));
        }
        if self.bosons.iter().any(|&(n, w)| n == 0 || w == 0) {
            return Err(Error::InvalidArgument(
                "boson modes need momentum >= 1 and occupancy >= 1".into(),
            ));
        }
        if !self.bosons.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::InvalidArgument("boson momenta must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn fermions(&self) -> &[u32] {
        &self.fermions
    }

    pub fn antifermions(&self) -> &[u32] {
        &self.antifermions
    }

    pub fn bosons(&self) -> &[(u32, u32)] {
        &self.bosons
    }

    /// Number of fermions minus number of antifermions.
    pub fn charge(&self) -> i32 {
        self.fermions.len() as i32 - self.antifermions.len() as i32
    }

    /// Total light-front momentum `K`.
    pub fn momentum(&self) -> u32 {
        let f: u32 = self.fermions.iter().sum();
        let a: u32 = self.antifermions.iter().sum();
        let b: u32 = self.bosons.iter().map(|&(n, w)| n * w).sum();
        f + a + b
    }

    /// Occupancy of mode `n` for one species.
    pub fn occupancy(&self, species: Species, n: u32) -> u32 {
        match species {
            Species::Fermion => self.fermions.binary_search(&n).is_ok() as u32,
            Species::Antifermion => self.antifermions.binary_search(&n).is_ok() as u32,
            Species::Boson => self
                .bosons
                .binary_search_by_key(&n, |&(m, _)| m)
                .map(|i| self.bosons[i].1)
                .unwrap_or(0),
        }
    }

    /// Occupied momenta of one species (boson modes listed once each).
    pub fn occupied(&self, species: Species) -> Vec<u32> {
        match species {
            Species::Fermion => self.fermions.clone(),
            Species::Antifermion => self.antifermions.clone(),
            Species::Boson => self.bosons.iter().map(|&(n, _)| n).collect(),
        }
    }

    pub fn is_angel(&self) -> bool {
        self.fermions.is_empty() && self.antifermions.is_empty() && self.bosons.len() == 1 && self.bosons[0].0 == 1
    }

    pub fn is_purely_bosonic(&self) -> bool {
        self.fermions.is_empty() && self.antifermions.is_empty()
    }

    /// Applies an annihilation operator in place and returns its matrix
    /// element, or `None` when the mode is empty.
    ///
    /// Fermionic operators pick up `(-1)^j` with `j` the number of occupied
    /// same-species modes below the target. Boson operators return `sqrt(w)`
    /// (the `1/sqrt(n)` of `c_n` is applied by the caller).
    pub fn annihilate(&mut self, species: Species, n: u32) -> Option<f64> {
        match species {
            Species::Fermion => remove_fermion(&mut self.fermions, n),
            Species::Antifermion => remove_fermion(&mut self.antifermions, n),
            Species::Boson => {
                let i = self.bosons.binary_search_by_key(&n, |&(m, _)| m).ok()?;
                let w = self.bosons[i].1;
                if w == 1 {
                    self.bosons.remove(i);
                } else {
                    self.bosons[i].1 -= 1;
                }
                Some((w as f64).sqrt())
            }
        }
    }

    /// Applies a creation operator in place. Returns `None` when a fermion
    /// mode is already occupied; bosons return `sqrt(w + 1)`.
    pub fn create(&mut self, species: Species, n: u32) -> Option<f64> {
        match species {
            Species::Fermion => insert_fermion(&mut self.fermions, n),
            Species::Antifermion => insert_fermion(&mut self.antifermions, n),
            Species::Boson => match self.bosons.binary_search_by_key(&n, |&(m, _)| m) {
                Ok(i) => {
                    self.bosons[i].1 += 1;
                    Some((self.bosons[i].1 as f64).sqrt())
                }
                Err(i) => {
                    self.bosons.insert(i, (n, 1));
                    Some(1.0)
                }
            },
        }
    }
}

fn remove_fermion(modes: &mut Vec<u32>, n: u32) -> Option<f64> {
    let i = modes.binary_search(&n).ok()?;
    modes.remove(i);
    Some(if i % 2 == 0 { 1.0 } else { -1.0 })
}

fn insert_fermion(modes: &mut Vec<u32>, n: u32) -> Option<f64> {
    match modes.binary_search(&n) {
        Ok(_) => None,
        Err(i) => {
            modes.insert(i, n);
            Some(if i % 2 == 0 { 1.0 } else { -1.0 })
        }
    }
}

impl Ord for FockState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.charge()
            .cmp(&other.charge())
            .then_with(|| self.fermions.cmp(&other.fermions))
            .then_with(|| self.antifermions.cmp(&other.antifermions))
            .then_with(|| self.bosons.cmp(&other.bosons))
    }
}

impl PartialOrd for FockState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let bosons = self
            .bosons
            .iter()
            .map(|(n, w)| format!("({n},{w})"))
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "f:[{}];a:[{}];b:[{}]",
            join(&self.fermions),
            join(&self.antifermions),
            bosons
        )
    }
}

impl FromStr for FockState {
    type Err = Error;

    /// Parses `f:[n1,...];a:[...];b:[(n,w),...]`. Whitespace is not allowed.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse {
            line: 0,
            msg: format!("{msg}: {:?}", truncate_for_msg(s)),
        };
        let mut fields = s.split(';');
        let (Some(f), Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
            return Err(bad("expected three ';'-separated fields"));
        };
        fn strip<'a>(field: &'a str, tag: &str) -> Option<&'a str> {
            field.strip_prefix(tag)?.strip_prefix('[')?.strip_suffix(']')
        }
        let list = |field, tag: &str| strip(field, tag).ok_or_else(|| bad(&format!("malformed {tag} field")));
        let ints = |body: &str| -> Result<Vec<u32>> {
            if body.is_empty() {
                return Ok(Vec::new());
            }
            body.split(',')
                .map(|t| parse_u32(t).ok_or_else(|| bad("bad integer")))
                .collect()
        };
        let fermions = ints(list(f, "f:")?)?;
        let antifermions = ints(list(a, "a:")?)?;
        let body = list(b, "b:")?;
        let mut bosons = Vec::new();
        if !body.is_empty() {
            let mut rest = body;
            loop {
                let inner_end = rest.find(')').ok_or_else(|| bad("unterminated boson pair"))?;
                let pair = rest[..inner_end]
                    .strip_prefix('(')
                    .ok_or_else(|| bad("boson pair must start with '('"))?;
                let (n, w) = pair.split_once(',').ok_or_else(|| bad("boson pair needs two fields"))?;
                let n = parse_u32(n).ok_or_else(|| bad("bad boson momentum"))?;
                let w = parse_u32(w).ok_or_else(|| bad("bad boson occupancy"))?;
                bosons.push((n, w));
                rest = &rest[inner_end + 1..];
                if rest.is_empty() {
                    break;
                }
                rest = rest.strip_prefix(',').ok_or_else(|| bad("expected ',' between boson pairs"))?;
            }
        }
        FockState::new(fermions, antifermions, bosons).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::Parse { line: 0, msg },
            other => other,
        })
    }
}

fn parse_u32(t: &str) -> Option<u32> {
    if t.is_empty() || !t.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    t.parse().ok()
}

fn truncate_for_msg(s: &str) -> String {
    s.chars().take(64).collect()
}

/// The ordered, indexable list of states of one `(K, Q)` block.
#[derive(Debug, Clone)]
pub struct Basis {
    k: u32,
    q: Option<i32>,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
}

impl Basis {
    /// Wraps an explicit state list. States are sorted canonically and must
    /// all carry momentum `k` (and charge `q` when given).
    pub fn from_states(k: u32, q: Option<i32>, mut states: Vec<FockState>) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument("harmonic resolution K must be >= 1".into()));
        }
        for s in &states {
            if s.momentum() != k {
                return Err(Error::InvalidArgument(format!("state {s} has momentum {} != K = {k}", s.momentum())));
            }
            if let Some(q) = q {
                if s.charge() != q {
                    return Err(Error::InvalidArgument(format!("state {s} has charge {} != Q = {q}", s.charge())));
                }
            }
        }
        states.sort_unstable();
        let len = states.len();
        states.dedup();
        if states.len() != len {
            return Err(Error::InvalidArgument("duplicate states in basis".into()));
        }
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Basis { k, q, states, index })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> Option<i32> {
        self.q
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FockState {
        &self.states[i]
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Position of the angel state, when the block contains it.
    pub fn angel_index(&self) -> Option<usize> {
        self.index_of(&FockState::angel(self.k))
    }

    /// The same block with the angel state dropped.
    pub fn without_angel(&self) -> Basis {
        let states = self.states.iter().filter(|s| !s.is_angel()).cloned().collect();
        Basis::from_states(self.k, self.q, states).expect("subset of a valid basis")
    }
}

/// Enumerates every Fock state of total momentum `k`, optionally restricted
/// to charge `q`, in canonical order.
pub fn enumerate_basis(k: u32, q: Option<i32>) -> Result<Basis> {
    if k < 1 {
        return Err(Error::InvalidArgument("harmonic resolution K must be >= 1".into()));
    }
    let mut states = Vec::new();
    for_each_state(k, q, |s| states.push(s));
    Basis::from_states(k, q, states)
}

/// Streams the states of a block (unsorted) to `sink`.
pub fn for_each_state(k: u32, q: Option<i32>, mut sink: impl FnMut(FockState)) {
    let mut fermions = Vec::new();
    let mut antifermions = Vec::new();
    distinct_subsets(k, 1, &mut fermions, &mut |fs| {
        let used_f: u32 = fs.iter().sum();
        distinct_subsets(k - used_f, 1, &mut antifermions, &mut |afs| {
            if let Some(q) = q {
                if fs.len() as i32 - afs.len() as i32 != q {
                    return;
                }
            }
            let used_a: u32 = afs.iter().sum();
            let rest = k - used_f - used_a;
            for_each_partition(rest, &mut |bosons| {
                sink(FockState {
                    fermions: fs.to_vec(),
                    antifermions: afs.to_vec(),
                    bosons: bosons.to_vec(),
                });
            });
        });
    });
}

/// Visits every set of distinct parts `>= min` with sum `<= budget`.
fn distinct_subsets(budget: u32, min: u32, current: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
    visit(current);
    let mut part = min;
    while part <= budget {
        current.push(part);
        distinct_subsets(budget - part, part + 1, current, visit);
        current.pop();
        part += 1;
    }
}

/// Visits every partition of `total` as an ascending `(part, multiplicity)` list.
pub fn for_each_partition(total: u32, visit: &mut dyn FnMut(&[(u32, u32)])) {
    fn rec(remaining: u32, min_part: u32, current: &mut Vec<(u32, u32)>, visit: &mut dyn FnMut(&[(u32, u32)])) {
        if remaining == 0 {
            visit(current);
            return;
        }
        for part in min_part..=remaining {
            for mult in 1..=remaining / part {
                current.push((part, mult));
                rec(remaining - part * mult, part + 1, current, visit);
                current.pop();
            }
        }
    }
    let mut current = Vec::new();
    rec(total, 1, &mut current, visit);
}

/// Number of integer partitions `p(k)` via Euler's pentagonal-number
/// recurrence.
pub fn partition_count(k: u32) -> u128 {
    let k = k as usize;
    let mut p = vec![0i128; k + 1];
    p[0] = 1;
    for n in 1..=k {
        let mut acc = 0i128;
        let mut j = 1usize;
        loop {
            let g1 = j * (3 * j - 1) / 2;
            if g1 > n {
                break;
            }
            let sign = if j % 2 == 1 { 1 } else { -1 };
            acc += sign * p[n - g1];
            let g2 = j * (3 * j + 1) / 2;
            if g2 <= n {
                acc += sign * p[n - g2];
            }
            j += 1;
        }
        p[n] = acc;
    }
    p[k] as u128
}

/// Largest number of distinct part sizes in any partition of `k`:
/// the largest `I` with `I (I + 1) / 2 <= k`.
pub fn max_distinct_parts(k: u32) -> u32 {
    let k = k as u64;
    let mut i = ((2.0 * k as f64 + 0.25).sqrt() - 0.5).floor() as u64;
    // settle any floating-point slop exactly
    while i * (i + 1) / 2 > k {
        i -= 1;
    }
    while (i + 1) * (i + 2) / 2 <= k {
        i += 1;
    }
    i as u32
}

/// Smallest harmonic resolution that admits charge `q`.
pub fn min_momentum_for_charge(q: i32) -> u32 {
    let a = q.unsigned_abs();
    a * (a + 1) / 2
}

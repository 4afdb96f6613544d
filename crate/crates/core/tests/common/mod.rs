//! Independent reference implementations for the integration tests.
//!
//! Occupation-number arrays instead of sorted mode lists, the Hamiltonian
//! written out term by term in ladder operators, and brute-force counting. Nothing here calls into the library except the
//! final conversion to `FockState` for index lookups.

#![allow(dead_code)]

use std::collections::HashMap;

use lfdlcq::FockState;
use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occ {
    /// index `n - 1` holds the occupancy of mode `n`
    pub f: Vec<u8>,
    pub a: Vec<u8>,
    pub b: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sp {
    F,
    A,
    B,
}

impl Occ {
    pub fn empty(k: usize) -> Self {
        Occ {
            f: vec![0; k],
            a: vec![0; k],
            b: vec![0; k],
        }
    }

    pub fn momentum(&self) -> usize {
        (0..self.f.len())
            .map(|i| (i + 1) * (self.f[i] as usize + self.a[i] as usize + self.b[i] as usize))
            .sum()
    }

    pub fn charge(&self) -> i32 {
        self.f.iter().map(|&x| x as i32).sum::<i32>() - self.a.iter().map(|&x| x as i32).sum::<i32>()
    }

    pub fn to_fock(&self) -> FockState {
        let modes = |v: &[u8]| -> Vec<u32> { (0..v.len()).filter(|&i| v[i] == 1).map(|i| i as u32 + 1).collect() };
        let bosons = (0..self.b.len())
            .filter(|&i| self.b[i] > 0)
            .map(|i| (i as u32 + 1, self.b[i]))
            .collect();
        FockState::new(modes(&self.f), modes(&self.a), bosons).unwrap()
    }

    fn jw_sign(v: &[u8], n: usize) -> f64 {
        if v[..n - 1].iter().filter(|&&x| x == 1).count() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Applies one ladder operator; bosons come as `c = a / sqrt(n)`.
    pub fn ladder(&mut self, sp: Sp, create: bool, n: usize) -> Option<f64> {
        if n == 0 || n > self.f.len() {
            return None;
        }
        match sp {
            Sp::F | Sp::A => {
                let v = if sp == Sp::F { &mut self.f } else { &mut self.a };
                let want = if create { 0 } else { 1 };
                if v[n - 1] != want {
                    return None;
                }
                let s = Occ::jw_sign(v, n);
                v[n - 1] = 1 - want;
                Some(s)
            }
            Sp::B => {
                let w = self.b[n - 1];
                let amp = if create {
                    self.b[n - 1] += 1;
                    ((w + 1) as f64).sqrt()
                } else {
                    if w == 0 {
                        return None;
                    }
                    self.b[n - 1] -= 1;
                    (w as f64).sqrt()
                };
                Some(amp / (n as f64).sqrt())
            }
        }
    }
}

/// Every state of total momentum `k` (all charges), by brute force over
/// occupation numbers mode by mode.
pub fn brute_states(k: usize) -> Vec<Occ> {
    fn rec(n: usize, k: usize, left: usize, cur: &mut Occ, out: &mut Vec<Occ>) {
        if n > k {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for f in 0..=1u8 {
            for a in 0..=1u8 {
                let used = n * (f + a) as usize;
                if used > left {
                    continue;
                }
                for w in 0..=((left - used) / n) {
                    cur.f[n - 1] = f;
                    cur.a[n - 1] = a;
                    cur.b[n - 1] = w as u32;
                    rec(n + 1, k, left - used - n * w, cur, out);
                }
            }
        }
        cur.f[n - 1] = 0;
        cur.a[n - 1] = 0;
        cur.b[n - 1] = 0;
    }
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    rec(1, k, k, &mut Occ::empty(k), &mut out);
    out
}

/// `p(k)` by the coin-change recurrence.
pub fn partitions_dp(k: usize) -> u128 {
    let mut p = vec![0u128; k + 1];
    p[0] = 1;
    for part in 1..=k {
        for total in part..=k {
            p[total] += p[total - part];
        }
    }
    p[k]
}

/// `{n | m}`: `1/n` if `m = -n`, zero if either is zero or otherwise.
pub fn br(n: i64, m: i64) -> f64 {
    if n == 0 || m == 0 || m != -n {
        0.0
    } else {
        1.0 / n as f64
    }
}

pub fn harmonic(n: i64) -> f64 {
    (1..=n).map(|j| 1.0 / j as f64).sum()
}

/// The printed harmonic-number closed forms.
pub fn inertias_closed(n: i64, cutoff: i64) -> (f64, f64, f64) {
    let nf = n as f64;
    let h = harmonic;
    (
        -1.0 / nf - h(cutoff - n) - h(2 * n) + 2.0 * h(n),
        -2.0 / nf + h(n) + h(cutoff) - h(cutoff - n),
        -1.0 / (2.0 * nf) + h(n) + h(cutoff) - h(cutoff + n),
    )
}

/// The defining sums, term by term.
pub fn inertias_literal(n: i64, cutoff: i64) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for m in 1..=cutoff {
        alpha += br(n - m, m - n) - br(n + m, -m - n);
        beta += n as f64 / m as f64 * br(n - m, m - n);
        gamma += n as f64 / m as f64 * br(n + m, -m - n);
    }
    (alpha, beta, gamma)
}

type Op = (Sp, bool, usize);

pub struct Params {
    pub mb: f64,
    pub mf: f64,
    pub g: f64,
    pub cutoff: i64,
}

/// Which groups of terms to include.
#[derive(Clone, Copy)]
pub struct Parts {
    pub mass: bool,
    pub vertex: bool,
    pub seagull: bool,
    pub fork: bool,
    /// only the first seagull term `b†_k b_m c†_l c_n`
    pub hs1_only: bool,
}

impl Parts {
    pub const ALL: Parts = Parts {
        mass: true,
        vertex: true,
        seagull: true,
        fork: true,
        hs1_only: false,
    };
    pub const HS1: Parts = Parts {
        mass: false,
        vertex: false,
        seagull: true,
        fork: false,
        hs1_only: true,
    };
}

fn apply(ops: &[Op], s: &Occ) -> Option<(Occ, f64)> {
    let mut out = s.clone();
    let mut amp = 1.0;
    for &(sp, c, n) in ops.iter().rev() {
        amp *= out.ladder(sp, c, n)?;
    }
    Some((out, amp))
}

/// `H` (not `K H`) on the given states as a dense matrix, with images
/// outside the list dropped.
pub fn oracle_h(states: &[Occ], p: &Params, parts: Parts) -> DMatrix<f64> {
    use Sp::{A, B, F};
    let dim = states.len();
    let index: HashMap<&Occ, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut h = DMatrix::zeros(dim, dim);
    let gm = p.g * p.mf;
    let g2 = p.g * p.g;
    for (j, s) in states.iter().enumerate() {
        let k_tot = s.momentum();
        if parts.mass {
            let mut d = 0.0;
            for n in 1..=k_tot {
                let (al, be, ga) = inertias_closed(n as i64, p.cutoff);
                let nf = n as f64;
                d += s.b[n - 1] as f64 * (p.mb * p.mb + g2 * al) / nf;
                d += s.f[n - 1] as f64 * (p.mf * p.mf + g2 * be) / nf;
                d += s.a[n - 1] as f64 * (p.mf * p.mf + g2 * ga) / nf;
            }
            h[(j, j)] += d;
        }
        let mut add = |ops: &[Op], coeff: f64| {
            if coeff == 0.0 {
                return;
            }
            if let Some((t, amp)) = apply(ops, s) {
                if let Some(&i) = index.get(&t) {
                    h[(i, j)] += coeff * amp;
                }
            }
        };
        let r = 1..=k_tot;
        for k in r.clone() {
            for l in r.clone() {
                for m in r.clone() {
                    let (ki, li, mi) = (k as i64, l as i64, m as i64);
                    if parts.vertex {
                        let c1 = gm * (br(ki + li, -mi) + br(ki, li - mi));
                        add(&[(F, true, k), (F, false, m), (B, true, l)], c1);
                        add(&[(F, true, m), (F, false, k), (B, false, l)], c1);
                        add(&[(A, true, k), (A, false, m), (B, true, l)], c1);
                        add(&[(A, true, m), (A, false, k), (B, false, l)], c1);
                        let c3 = gm * (br(ki - li, mi) + br(ki, -li + mi));
                        add(&[(F, false, k), (A, false, m), (B, true, l)], c3);
                        add(&[(A, true, m), (F, true, k), (B, false, l)], c3);
                    }
                    for n in r.clone() {
                        let ni = n as i64;
                        if parts.seagull {
                            let c = g2 * (br(ki - ni, li - mi) + br(ki + li, -mi - ni));
                            add(&[(F, true, k), (F, false, m), (B, true, l), (B, false, n)], c);
                            if parts.hs1_only {
                                continue;
                            }
                            add(&[(A, true, k), (A, false, m), (B, true, l), (B, false, n)], c);
                            let c3 = g2 * br(li - ki, ni - mi);
                            add(&[(A, false, k), (F, false, m), (B, true, l), (B, true, n)], c3);
                            add(&[(F, true, m), (A, true, k), (B, false, n), (B, false, l)], c3);
                        }
                        if parts.fork {
                            let c = g2 * br(ki + li, ni - mi);
                            add(&[(F, true, k), (F, false, m), (B, true, l), (B, true, n)], c);
                            add(&[(F, true, m), (F, false, k), (B, false, n), (B, false, l)], c);
                            add(&[(A, true, k), (A, false, m), (B, true, l), (B, true, n)], c);
                            add(&[(A, true, m), (A, false, k), (B, false, n), (B, false, l)], c);
                            let c3 = g2 * (br(ki - ni, mi + li) + br(ki + li, mi - ni));
                            add(&[(F, true, k), (A, true, m), (B, true, l), (B, false, n)], c3);
                            add(&[(A, false, m), (F, false, k), (B, true, n), (B, false, l)], c3);
                        }
                    }
                }
            }
        }
    }
    h
}

/// The states of one `(K, Q)` block in the library's order, and the oracle
/// states in the same order.
pub fn aligned_block(k: u32, q: Option<i32>) -> (lfdlcq::Basis, Vec<Occ>) {
    let basis = lfdlcq::enumerate_basis(k, q).unwrap();
    let mut by_fock: HashMap<FockState, Occ> =
        brute_states(k as usize).into_iter().map(|o| (o.to_fock(), o)).collect();
    let occs = basis.states().iter().map(|s| by_fock.remove(s).expect("library state missing from brute force")).collect();
    (basis, occs)
}

/// Relative agreement `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

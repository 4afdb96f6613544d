//! Parton distribution functions, the free invariant-mass cutoff and the
//! maximal probing scale of a block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_basis::{Basis, FockState, Species};
use crate::hamiltonian::ModelParams;

/// Smallest probability mass a truncation may keep.
pub const MIN_KEPT: f64 = 1e-6;

/// Occupation expectations per mode `n = 1..=K`, at `x = n / K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfTable {
    pub k: u32,
    /// `[f_f, f_a, f_b]` for mode `n` at index `n - 1`.
    pub entries: Vec<[f64; 3]>,
    pub qsq: Option<f64>,
}

impl PdfTable {
    pub fn x(&self, n: u32) -> f64 {
        n as f64 / self.k as f64
    }

    /// `sum_n n (f_f + f_a + f_b)`; equals `K` for a normalized state.
    pub fn momentum_sum(&self) -> f64 {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i + 1) as f64 * (e[0] + e[1] + e[2]))
            .sum()
    }

    /// `sum_n (f_f - f_a)`; equals the charge.
    pub fn charge_sum(&self) -> f64 {
        self.entries.iter().map(|e| e[0] - e[1]).sum()
    }
}

fn check_norm(vector: &[f64], basis: &Basis) -> Result<()> {
    if vector.len() != basis.len() {
        return Err(Error::InvalidArgument(format!(
            "vector length {} does not match basis dimension {}",
            vector.len(),
            basis.len()
        )));
    }
    let n2: f64 = vector.iter().map(|c| c * c).sum();
    if (n2.sqrt() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("state norm {} is not 1", n2.sqrt())));
    }
    Ok(())
}

/// `f_l(n/K) = sum_s |c_s|^2 <s|N_l(n)|s>` for each species.
pub fn pdf(vector: &[f64], basis: &Basis) -> Result<PdfTable> {
    check_norm(vector, basis)?;
    Ok(pdf_weighted(basis.states().iter().zip(vector.iter().map(|c| c * c)), basis.k()))
}

/// The same table from explicit `(state, probability)` pairs.
pub fn pdf_weighted<'a>(weighted: impl IntoIterator<Item = (&'a FockState, f64)>, k: u32) -> PdfTable {
    let mut entries = vec![[0.0; 3]; k as usize];
    for (s, p) in weighted {
        if p == 0.0 {
            continue;
        }
        for &n in s.fermions() {
            entries[n as usize - 1][0] += p;
        }
        for &n in s.antifermions() {
            entries[n as usize - 1][1] += p;
        }
        for &(n, w) in s.bosons() {
            entries[n as usize - 1][2] += p * w as f64;
        }
    }
    PdfTable { k, entries, qsq: None }
}

/// Free invariant mass squared `K sum w m^2 / n` of a Fock state, using the
/// masses in `params`.
pub fn invariant_mass_free(state: &FockState, params: &ModelParams) -> f64 {
    let mb2 = params.mass_sq(Species::Boson);
    let mf2 = params.mass_sq(Species::Fermion);
    let sum: f64 = state.bosons().iter().map(|&(n, w)| w as f64 * mb2 / n as f64).sum::<f64>()
        + state
            .fermions()
            .iter()
            .chain(state.antifermions())
            .map(|&n| mf2 / n as f64)
            .sum::<f64>();
    state.momentum() as f64 * sum
}

/// Largest free invariant mass squared over the basis.
pub fn qmax2(basis: &Basis, params: &ModelParams) -> Result<f64> {
    if basis.is_empty() {
        return Err(Error::InvalidArgument("qmax2 of an empty basis".into()));
    }
    Ok(basis
        .states()
        .iter()
        .map(|s| invariant_mass_free(s, params))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Zeroes the components whose free invariant mass exceeds `qsq`, then
/// renormalizes. Returns the new vector and the kept probability.
pub fn truncate_state(vector: &[f64], basis: &Basis, params: &ModelParams, qsq: f64) -> Result<(Vec<f64>, f64)> {
    check_norm(vector, basis)?;
    let mut out: Vec<f64> = vector
        .iter()
        .zip(basis.states())
        .map(|(&c, s)| if invariant_mass_free(s, params) <= qsq { c } else { 0.0 })
        .collect();
    let total: f64 = vector.iter().map(|c| c * c).sum();
    let kept_raw: f64 = out.iter().map(|c| c * c).sum();
    let kept = kept_raw / total;
    if kept < MIN_KEPT {
        return Err(Error::DegenerateTruncation { kept });
    }
    if out != vector {
        let s = kept_raw.sqrt();
        out.iter_mut().for_each(|c| *c /= s);
    }
    Ok((out, kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_basis::enumerate_basis;

    fn params(k: u32) -> ModelParams {
        ModelParams::new(2.0, 1.0, 0.0, 64, k, Some(0)).unwrap()
    }

    fn unit(basis: &Basis, state: &str) -> Vec<f64> {
        let s: FockState = state.parse().unwrap();
        let mut v = vec![0.0; basis.len()];
        v[basis.index_of(&s).unwrap()] = 1.0;
        v
    }

    #[test]
    fn single_boson_pdf() {
        let b = enumerate_basis(2, Some(0)).unwrap();
        let t = pdf(&unit(&b, "f:[];a:[];b:[(2,1)]"), &b).unwrap();
        assert_eq!(t.entries, vec![[0.0; 3], [0.0, 0.0, 1.0]]);
        assert_eq!(t.momentum_sum(), 2.0);
    }

    #[test]
    fn superposition_pdf() {
        let b = enumerate_basis(2, Some(0)).unwrap();
        let mut v = vec![0.0; 3];
        let h = 0.5f64.sqrt();
        v[b.index_of(&"f:[];a:[];b:[(1,2)]".parse().unwrap()).unwrap()] = h;
        v[b.index_of(&"f:[1];a:[1];b:[]".parse().unwrap()).unwrap()] = h;
        let t = pdf(&v, &b).unwrap();
        assert!((t.entries[0][2] - 1.0).abs() < 1e-15);
        assert!((t.entries[0][0] - 0.5).abs() < 1e-15);
        assert!((t.entries[0][1] - 0.5).abs() < 1e-15);
        assert!((t.momentum_sum() - 2.0).abs() < 1e-14);
        assert!(t.charge_sum().abs() < 1e-15);
    }

    #[test]
    fn norm_checked() {
        let b = enumerate_basis(2, Some(0)).unwrap();
        assert!(pdf(&[1.0, 1.0, 0.0], &b).is_err());
        assert!(pdf(&[1.0], &b).is_err());
    }

    #[test]
    fn free_masses() {
        let p = params(2);
        let pair: FockState = "f:[1];a:[1];b:[]".parse().unwrap();
        assert_eq!(invariant_mass_free(&pair, &p), 4.0);
        let single: FockState = "f:[];a:[];b:[(2,1)]".parse().unwrap();
        assert_eq!(invariant_mass_free(&single, &p), 4.0);
        let b1 = enumerate_basis(1, Some(0)).unwrap();
        assert_eq!(qmax2(&b1, &params(1)).unwrap(), 4.0);
    }

    #[test]
    fn truncation_edges() {
        let b = enumerate_basis(4, Some(0)).unwrap();
        let p = params(4);
        let n = b.len() as f64;
        let v = vec![1.0 / n.sqrt(); b.len()];
        let q = qmax2(&b, &p).unwrap();
        let (same, kept) = truncate_state(&v, &b, &p, q).unwrap();
        assert_eq!(kept, 1.0);
        assert_eq!(same, v);
        let err = truncate_state(&v, &b, &p, 0.5).unwrap_err();
        assert!(matches!(err, Error::DegenerateTruncation { .. }));
    }
}

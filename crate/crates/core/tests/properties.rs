use lfdlcq::encoding::{index_from_tuple, tuple_from_index};
use lfdlcq::hamiltonian::apply_hamiltonian;
use lfdlcq::io::{parse_basis, parse_matrix, write_basis, write_matrix};
use lfdlcq::observables::{pdf, truncate_state};
use lfdlcq::{build_mass_matrix, enumerate_basis, FockState, ModelParams, SparseMatrix};
use proptest::prelude::*;

fn distinct_modes(max: u32) -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::btree_set(1..=max, 0..4).prop_map(|s| s.into_iter().collect())
}

fn state() -> impl Strategy<Value = FockState> {
    (
        distinct_modes(9),
        distinct_modes(9),
        proptest::collection::btree_map(1..=9u32, 1..=4u32, 0..4),
    )
        .prop_map(|(f, a, b)| FockState::new(f, a, b.into_iter().collect()).unwrap())
}

fn params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.1f64..5.0, 0.1f64..5.0, -2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn state_text_roundtrip(s in state()) {
        let back: FockState = s.to_string().parse().unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn state_parse_never_panics(text in ".{0,60}") {
        let _ = text.parse::<FockState>();
    }

    #[test]
    fn state_parse_structured_noise(text in "f:\\[[0-9, ]{0,8}\\];a:\\[[0-9, ]{0,8}\\];b:\\[[0-9(), ]{0,12}\\]") {
        if let Ok(s) = text.parse::<FockState>() {
            let again: FockState = s.to_string().parse().unwrap();
            prop_assert_eq!(again, s);
        }
    }

    #[test]
    fn images_conserve_momentum_and_charge(s in state(), (mb, mf, g) in params()) {
        let k = s.momentum().max(1);
        let p = ModelParams::new(mb, mf, g, 64.max(k), k, None).unwrap();
        if s.momentum() == 0 {
            return Ok(());
        }
        for (img, _) in apply_hamiltonian(&s, &p) {
            prop_assert_eq!(img.momentum(), s.momentum());
            prop_assert_eq!(img.charge(), s.charge());
        }
    }

    #[test]
    fn mass_matrix_symmetric(k in 1u32..=9, q in -1i32..=1, (mb, mf, g) in params()) {
        let Ok(basis) = enumerate_basis(k, Some(q)) else { return Ok(()) };
        if basis.is_empty() {
            return Ok(());
        }
        let p = ModelParams::new(mb, mf, g, 256, k, Some(q)).unwrap();
        let m = build_mass_matrix(&basis, &p).unwrap();
        prop_assert!(m.max_asymmetry() <= 1e-12 * m.max_abs().max(1.0));
    }

    #[test]
    fn tuple_index_roundtrip(n in 1u64..1_000_000) {
        let (k, l) = tuple_from_index(n);
        prop_assert!(l >= 1 && l < k);
        prop_assert_eq!(index_from_tuple(k, l), n);
    }

    #[test]
    fn basis_file_roundtrip(k in 1u32..=8, q in proptest::option::of(-2i32..=2)) {
        let Ok(b) = enumerate_basis(k, q) else { return Ok(()) };
        let mut buf = Vec::new();
        write_basis(&mut buf, &b).unwrap();
        let back = parse_basis(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.states(), b.states());
    }

    #[test]
    fn matrix_file_roundtrip(entries in proptest::collection::btree_map((0usize..6, 0usize..6), -1e3f64..1e3, 0..20)) {
        let triplets: Vec<_> = entries.into_iter().filter(|&(_, v)| v != 0.0).map(|((i, j), v)| (i, j, v)).collect();
        let m = SparseMatrix::from_triplets(6, triplets).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m, m.max_abs()).unwrap();
        let (_, back) = parse_matrix(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn file_parsers_never_panic(text in "\\{.{0,40}\\}\n(.{0,30}\n){0,4}") {
        let _ = parse_basis(&text);
        let _ = parse_matrix(&text);
    }

    #[test]
    fn pdf_sum_rules_hold_for_any_state(k in 2u32..=9, q in -1i32..=1, raw in proptest::collection::vec(-1.0f64..1.0, 1..400)) {
        let Ok(basis) = enumerate_basis(k, Some(q)) else { return Ok(()) };
        if basis.is_empty() {
            return Ok(());
        }
        let mut v: Vec<f64> = (0..basis.len()).map(|i| raw[i % raw.len()] + 1e-3).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        v.iter_mut().for_each(|c| *c /= norm);
        let t = pdf(&v, &basis).unwrap();
        prop_assert!((t.momentum_sum() - k as f64).abs() < 1e-10);
        prop_assert!((t.charge_sum() - q as f64).abs() < 1e-10);

        let p = ModelParams::new(1.0, 1.0, 0.0, 64, k, Some(q)).unwrap();
        let cut = (k * k) as f64;
        if let Ok((w, kept)) = truncate_state(&v, &basis, &p, cut) {
            prop_assert!(kept > 0.0 && kept <= 1.0 + 1e-12);
            let t = pdf(&w, &basis).unwrap();
            prop_assert!((t.momentum_sum() - k as f64).abs() < 1e-9);
            prop_assert!((t.charge_sum() - q as f64).abs() < 1e-9);
        }
    }
}

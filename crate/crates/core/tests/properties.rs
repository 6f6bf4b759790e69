use lieflow::catalog3d::{case3_reduce, classify, lemma_r1_display, CaseLabel, DEFAULT_CLASSIFY_TOL};
use lieflow::flow::tri_fill;
use lieflow::{
    factor_tri_orth, from_unimodular3, lower_index_transform, ricci_combined, ricci_parts,
    ricci_via_connection, rhs, symmetric_eigen, FlowState, SquareMatrix, StructureConstants,
    Unimodular3Params,
};
use proptest::prelude::*;

fn matrix(n: usize, amp: f64) -> impl Strategy<Value = SquareMatrix> {
    prop::collection::vec(-amp..amp, n * n).prop_map(move |d| SquareMatrix::new(n, d).unwrap())
}

fn well_conditioned(n: usize) -> impl Strategy<Value = SquareMatrix> {
    // diagonally dominant, so the condition number stays small
    matrix(n, 1.0).prop_map(move |m| &m + &SquareMatrix::identity(n).scale(n as f64 + 1.0))
}

fn orthogonal(n: usize) -> impl Strategy<Value = SquareMatrix> {
    well_conditioned(n).prop_map(|m| factor_tri_orth(&m).unwrap().u)
}

fn constants(n: usize, amp: f64) -> impl Strategy<Value = StructureConstants> {
    prop::collection::vec(-amp..amp, n * n * (n - 1) / 2).prop_map(move |v| {
        let mut c = StructureConstants::zeros(n);
        let mut it = v.into_iter();
        for k in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    c.set(k, i, j, it.next().unwrap());
                }
            }
        }
        c
    })
}

fn params(amp: f64) -> impl Strategy<Value = Unimodular3Params> {
    prop::array::uniform6(-amp..amp).prop_map(Unimodular3Params::from_array)
}

/// Direct evaluation of `c'^k_ij = Q^s_i Q^m_j c^l_sm Q̃^k_l`.
fn transform_by_index(c: &StructureConstants, q: &SquareMatrix) -> StructureConstants {
    let n = c.dim();
    let qi = q.inverse().unwrap();
    let mut out = StructureConstants::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                let mut sum = 0.0;
                for s in 0..n {
                    for m in 0..n {
                        for l in 0..n {
                            sum += q[(s, i)] * q[(m, j)] * c.get(l, s, m) * qi[(k, l)];
                        }
                    }
                }
                out.set(k, i, j, sum);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tri_orth_factors(q in well_conditioned(4)) {
        let f = factor_tri_orth(&q).unwrap();
        prop_assert!(f.b.is_upper_triangular());
        prop_assert!(f.b.diag().iter().all(|&d| d > 0.0));
        prop_assert!(f.u.orthogonality_defect() <= 1e-12);
        prop_assert!((&f.b * &f.u).max_abs_diff(&q) <= 1e-10);
    }

    #[test]
    fn inverse_is_an_involution(m in well_conditioned(4)) {
        let back = m.inverse().unwrap().inverse().unwrap();
        prop_assert!(back.max_abs_diff(&m) <= 1e-9);
        prop_assert!((&m * &m.inverse().unwrap()).max_abs_diff(&SquareMatrix::identity(4)) <= 1e-12);
    }

    #[test]
    fn eigen_preserves_trace_and_determinant(m in matrix(4, 2.0)) {
        let s = m.symmetric_part();
        let e = symmetric_eigen(&s).unwrap();
        let d = SquareMatrix::from_diag(&e.values);
        prop_assert!((s.trace() - d.trace()).abs() <= 1e-10);
        prop_assert!((s.det() - d.det()).abs() <= 1e-10 * s.max_abs().powi(4).max(1.0));
        let back = &(&e.rotation * &d) * &e.rotation.transpose();
        prop_assert!(back.max_abs_diff(&s) <= 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn transform_composes_left_to_right(c in constants(3, 2.0), q1 in well_conditioned(3), q2 in well_conditioned(3)) {
        let chained = c.transform(&q1).unwrap().transform(&q2).unwrap();
        let product = c.transform(&(&q1 * &q2)).unwrap();
        prop_assert!(chained.max_abs_diff(&product) <= 1e-10 * product.max_abs().max(1.0));
        prop_assert!(c.transform(&q1).unwrap().max_abs_diff(&transform_by_index(&c, &q1)) <= 1e-12 * c.max_abs().max(1.0) * 64.0);
    }

    #[test]
    fn transform_keeps_exact_antisymmetry(c in constants(4, 2.0), q in well_conditioned(4)) {
        let t = c.transform(&q).unwrap();
        for k in 0..4 {
            for i in 0..4 {
                prop_assert_eq!(t.get(k, i, i), 0.0);
                for j in 0..4 {
                    prop_assert_eq!(t.get(k, i, j), -t.get(k, j, i));
                }
            }
        }
    }

    #[test]
    fn unimodularity_survives_frame_changes(p in params(3.0), q in well_conditioned(3)) {
        let t = from_unimodular3(&p).transform(&q).unwrap();
        prop_assert!(t.unimodular_defect() <= 1e-12 * p.max_abs().max(1.0) * 16.0);
    }

    #[test]
    fn unimodular_family_satisfies_jacobi(p in params(3.0)) {
        prop_assert!(from_unimodular3(&p).jacobi_defect() <= 1e-12);
    }

    #[test]
    fn ricci_routes_agree(c in constants(3, 2.0)) {
        let a = ricci_parts(&c).total;
        prop_assert!(a.max_abs_diff(&ricci_via_connection(&c)) <= 1e-10);
        prop_assert!(a.max_abs_diff(&ricci_combined(&c)) <= 1e-10);
    }

    #[test]
    fn ricci_routes_agree_in_four_dimensions(c in constants(4, 1.5)) {
        let a = ricci_parts(&c).total;
        prop_assert!(a.max_abs_diff(&ricci_via_connection(&c)) <= 1e-10);
        prop_assert!(a.max_abs_diff(&ricci_combined(&c)) <= 1e-10);
    }

    #[test]
    fn parts_are_symmetric(c in constants(4, 2.0)) {
        let parts = ricci_parts(&c);
        for alpha in 1..=4 {
            prop_assert!(parts.part(alpha).asymmetry() <= 1e-12);
        }
    }

    #[test]
    fn parts_are_orthogonally_equivariant(c in constants(3, 2.0), u in orthogonal(3)) {
        let before = ricci_parts(&c);
        let after = ricci_parts(&c.transform(&u).unwrap());
        for alpha in 1..=4 {
            let expect = lower_index_transform(&u, before.part(alpha));
            prop_assert!(after.part(alpha).max_abs_diff(&expect) <= 1e-10);
        }
        prop_assert!((after.scalar - before.scalar).abs() <= 1e-10);
    }

    #[test]
    fn killing_part_is_gl_equivariant(c in constants(3, 2.0), q in well_conditioned(3)) {
        let r1 = ricci_parts(&c.transform(&q).unwrap()).r1;
        let expect = lower_index_transform(&q, &ricci_parts(&c).r1);
        prop_assert!(r1.max_abs_diff(&expect) <= 1e-10 * expect.max_abs().max(1.0));
    }

    #[test]
    fn unimodular_family_has_no_second_part(p in params(3.0)) {
        prop_assert_eq!(ricci_parts(&from_unimodular3(&p)).r2.max_abs(), 0.0);
    }

    #[test]
    fn flow_velocity_is_upper_triangular(c in constants(3, 2.0), m in well_conditioned(3)) {
        let f = factor_tri_orth(&m).unwrap();
        let v = rhs(&c, &FlowState { t: 0.0, b: f.b.clone() }, false).unwrap();
        prop_assert!(v.is_upper_triangular());
        // the symmetric part of b⁻¹ḃ is the Ricci matrix in the frame b
        let r = ricci_parts(&c.transform(&f.b).unwrap()).total;
        let gen = &f.b.inverse().unwrap() * &v;
        prop_assert!((&gen + &gen.transpose()).max_abs_diff(&r.scale(2.0)) <= 1e-9 * r.max_abs().max(1.0));
        prop_assert!(tri_fill(&r).is_upper_triangular());
    }

    #[test]
    fn normalized_velocity_is_traceless(c in constants(3, 2.0), m in well_conditioned(3)) {
        let b = factor_tri_orth(&m).unwrap().b;
        let v = rhs(&c, &FlowState { t: 0.0, b: b.clone() }, true).unwrap();
        let gen = &b.inverse().unwrap() * &v;
        prop_assert!(gen.trace().abs() <= 1e-10 * gen.max_abs().max(1.0));
    }

    #[test]
    fn r1_display_is_minus_twice_r1(p in params(3.0)) {
        let r1 = ricci_parts(&from_unimodular3(&p)).r1;
        prop_assert!(lemma_r1_display(&p).max_abs_diff(&r1.scale(-2.0)) <= 1e-12);
    }

    #[test]
    fn case3_reduction_lands_in_case1(b in prop::array::uniform3(0.1f64..4.0)) {
        let red = case3_reduce(b[0], b[1], b[2]).unwrap();
        prop_assert!(red.constants.jacobi_defect() <= 1e-10);
        prop_assert!(red.constants.unimodular_defect() <= 1e-10);
        let p = Unimodular3Params::from_constants(&red.constants, 1e-9).unwrap();
        prop_assert_eq!(classify(&p, DEFAULT_CLASSIFY_TOL).label, CaseLabel::CaseI);
        prop_assert_eq!(classify(&red.params, DEFAULT_CLASSIFY_TOL).label, CaseLabel::CaseIII);
    }

    #[test]
    fn constants_json_round_trip(c in constants(4, 5.0)) {
        let text = serde_json::to_string(&c).unwrap();
        let back: StructureConstants = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn matrix_json_round_trip(m in matrix(3, 1e3)) {
        let back: SquareMatrix = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }
}

use hamming_bootstrap::torus::{vertex_distance, Dimensions, Subtorus, Vertex};
use proptest::prelude::*;

fn dims_strategy() -> impl Strategy<Value = Dimensions> {
    (2usize..=4, 2u32..=4).prop_map(|(d, n)| Dimensions::new(d, n).unwrap())
}

fn subtorus_in(dims: Dimensions) -> impl Strategy<Value = Subtorus> {
    proptest::collection::vec(proptest::option::of(0..dims.n()), dims.d()).prop_map(move |slots| {
        let fixed: Vec<(usize, u32)> = slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|v| (i, v)))
            .collect();
        dims.subtorus(&fixed).unwrap()
    })
}

fn pair() -> impl Strategy<Value = (Subtorus, Subtorus)> {
    dims_strategy().prop_flat_map(|dims| (subtorus_in(dims), subtorus_in(dims)))
}

fn verts(t: &Subtorus) -> Vec<Vertex> {
    t.vertices(1 << 20).unwrap().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn distance_is_min_vertex_distance((v, w) in pair()) {
        let brute = verts(&v)
            .iter()
            .flat_map(|a| verts(&w).into_iter().map(move |b| vertex_distance(a, &b).unwrap()))
            .min()
            .unwrap();
        prop_assert_eq!(v.distance(&w).unwrap(), brute);
        prop_assert_eq!(w.distance(&v).unwrap(), brute);
    }

    #[test]
    fn enclosing_is_smallest_common_supertorus((v, w) in pair()) {
        let e = v.enclosing(&w).unwrap();
        prop_assert!(e.contains(&v).unwrap());
        prop_assert!(e.contains(&w).unwrap());
        prop_assert_eq!(&e, &w.enclosing(&v).unwrap());
        let dims = v.dims();
        for cand in dims.subtori_of_dim(e.dim(), u128::MAX).unwrap() {
            if cand.contains(&v).unwrap() && cand.contains(&w).unwrap() {
                prop_assert_eq!(&cand, &e);
            }
        }
        for smaller in 0..e.dim() {
            for cand in dims.subtori_of_dim(smaller, u128::MAX).unwrap() {
                prop_assert!(!(cand.contains(&v).unwrap() && cand.contains(&w).unwrap()));
            }
        }
    }

    #[test]
    fn containment_matches_vertex_sets((v, w) in pair()) {
        let inside = verts(&w).iter().all(|u| v.contains_vertex(u).unwrap());
        prop_assert_eq!(v.contains(&w).unwrap(), inside);
    }

    #[test]
    fn vertex_count_matches_dimension(v in dims_strategy().prop_flat_map(subtorus_in)) {
        let n = v.dims().n() as usize;
        prop_assert_eq!(verts(&v).len(), n.pow(v.dim() as u32));
    }

    #[test]
    fn serde_round_trip(v in dims_strategy().prop_flat_map(subtorus_in)) {
        let json = serde_json::to_string(&v).unwrap();
        let back: Subtorus = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, v);
    }
}

use morpho_core::morphops::{
    act_pool, dilate, erode, max_pool, min_pool, posneg_pool_param, relu, selfdual_pool, PoolSpec, StructuringFunction,
};
use morpho_core::Tensor;
use proptest::prelude::*;

fn signal_1d() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8i32..=8, 2..=32).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn pair_1d() -> impl Strategy<Value = (Tensor<f64>, Tensor<f64>)> {
    (2usize..=32).prop_flat_map(|n| {
        let v = || prop::collection::vec(-8i32..=8, n).prop_map(|v| Tensor::from_f64s(&v.into_iter().map(f64::from).collect::<Vec<_>>()));
        (v(), v())
    })
}

fn image_pair() -> impl Strategy<Value = (Tensor<f64>, Tensor<f64>)> {
    (2usize..=8, 2usize..=8).prop_flat_map(|(h, w)| {
        let v = move || {
            prop::collection::vec(-8i32..=8, h * w)
                .prop_map(move |v| Tensor::new(vec![h, w], v.into_iter().map(f64::from).collect()).unwrap())
        };
        (v(), v())
    })
}

fn weights_1d() -> impl Strategy<Value = StructuringFunction<f64>> {
    prop::collection::vec(-3i32..=3, 3).prop_map(|w| {
        StructuringFunction::from_pairs_1d(&[(-1, w[0] as f64), (0, w[1] as f64), (1, w[2] as f64)]).unwrap()
    })
}

fn pool_1d() -> impl Strategy<Value = PoolSpec> {
    (1usize..=2, 1usize..=2).prop_map(|(r, k)| PoolSpec::new_1d(r, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relu_is_idempotent(v in signal_1d()) {
        let f = Tensor::<f64>::from_f64s(&v);
        prop_assert_eq!(relu(&relu(&f)), relu(&f));
    }

    #[test]
    fn operators_commute_with_supremum((f, g) in pair_1d(), b in weights_1d(), p in pool_1d()) {
        let fg = f.sup(&g).unwrap();
        prop_assert_eq!(relu(&fg), relu(&f).sup(&relu(&g)).unwrap());
        prop_assert_eq!(max_pool(&fg, &p).unwrap(), max_pool(&f, &p).unwrap().sup(&max_pool(&g, &p).unwrap()).unwrap());
        prop_assert_eq!(dilate(&fg, &b).unwrap(), dilate(&f, &b).unwrap().sup(&dilate(&g, &b).unwrap()).unwrap());
    }

    #[test]
    fn operators_are_increasing((f, g) in pair_1d(), b in weights_1d(), p in pool_1d(), alpha in -3i32..=3) {
        let (lo, hi) = (f.inf(&g).unwrap(), f.sup(&g).unwrap());
        prop_assert!(relu(&lo).le(&relu(&hi)));
        prop_assert!(max_pool(&lo, &p).unwrap().le(&max_pool(&hi, &p).unwrap()));
        prop_assert!(dilate(&lo, &b).unwrap().le(&dilate(&hi, &b).unwrap()));
        let a = alpha as f64;
        prop_assert!(act_pool(&lo, &p, a).unwrap().le(&act_pool(&hi, &p, a).unwrap()));
    }

    #[test]
    fn flat_dilation_with_origin_is_extensive(v in signal_1d(), lo in -2i64..=0, hi in 0i64..=2) {
        let f = Tensor::<f64>::from_f64s(&v);
        prop_assert!(f.le(&dilate(&f, &StructuringFunction::flat_1d(lo, hi)).unwrap()));
        prop_assert!(f.le(&relu(&f)));
    }

    #[test]
    fn image_laws((f, g) in image_pair()) {
        let p = PoolSpec::square(2, 2).unwrap();
        let b = StructuringFunction::<f64>::flat_window(&[2, 2]);
        let fg = f.sup(&g).unwrap();
        prop_assert_eq!(max_pool(&fg, &p).unwrap(), max_pool(&f, &p).unwrap().sup(&max_pool(&g, &p).unwrap()).unwrap());
        prop_assert_eq!(dilate(&fg, &b).unwrap(), dilate(&f, &b).unwrap().sup(&dilate(&g, &b).unwrap()).unwrap());
        prop_assert!(f.le(&dilate(&f, &b).unwrap()));
        prop_assert_eq!(selfdual_pool(&f.neg(), &p).unwrap(), selfdual_pool(&f, &p).unwrap().neg());
    }

    #[test]
    fn selfdual_pool_commutes_with_negation(v in signal_1d(), p in pool_1d()) {
        let f = Tensor::<f64>::from_f64s(&v);
        prop_assert_eq!(selfdual_pool(&f.neg(), &p).unwrap(), selfdual_pool(&f, &p).unwrap().neg());
    }

    #[test]
    fn min_pool_is_dual_of_max_pool(v in signal_1d(), p in pool_1d()) {
        let f = Tensor::<f64>::from_f64s(&v);
        prop_assert_eq!(min_pool(&f, &p).unwrap(), max_pool(&f.neg(), &p).unwrap().neg());
    }

    #[test]
    fn erosion_is_dual_of_dilation(v in signal_1d(), b in weights_1d()) {
        let f = Tensor::<f64>::from_f64s(&v);
        prop_assert_eq!(erode(&f, &b.transpose()).unwrap(), dilate(&f.neg(), &b).unwrap().neg());
    }

    #[test]
    fn act_pool_is_monotone_in_alpha(v in signal_1d(), a in -3i32..=3, d in 0i32..=3) {
        let f = Tensor::<f64>::from_f64s(&v);
        let p = PoolSpec::new_1d(2, 1).unwrap();
        prop_assert!(act_pool(&f, &p, a as f64).unwrap().le(&act_pool(&f, &p, (a + d) as f64).unwrap()));
    }
}

#[test]
fn posneg_pool_is_not_self_dual() {
    let f = Tensor::from_f64s(&[1.0, -2.0]);
    let p = PoolSpec::new_1d(2, 1).unwrap();
    let lhs = posneg_pool_param(&f.neg(), &p, 1.0, 0.0).unwrap();
    let rhs = posneg_pool_param(&f, &p, 1.0, 0.0).unwrap().neg();
    assert_eq!(lhs.data(), &[-1.0]);
    assert_eq!(rhs.data(), &[2.0]);
}

use morpho_core::representation::sets::{dual_basis, inf_of_dilations, sup_of_erosions};
use morpho_core::representation::{
    analyze, basis_extract, dc_decompose, fixtures, function_operator_check, kernel_enumerate, pl_eval,
    reconstruct_inf_dilations, reconstruct_sup_erosions, truncated_bounds, Affine, Config, FunctionOperator,
    OperatorTable, PLFunction, Window,
};
use morpho_core::Rng;

const HORIZ2: [[i64; 2]; 2] = [[0, 0], [0, 1]];
const VERT2: [[i64; 2]; 2] = [[0, 0], [1, 0]];
const DIAG2: [[i64; 2]; 2] = [[0, 0], [1, 1]];
const DIAG3: [[i64; 2]; 3] = [[-1, -1], [0, 0], [1, 1]];

fn fixture_operators() -> Vec<(String, OperatorTable)> {
    let sq = || Window::square(1).unwrap();
    let mut ops = vec![
        ("median/cross5".to_string(), fixtures::median(Window::cross5()).unwrap()),
        ("median/3x3".to_string(), fixtures::median(sq()).unwrap()),
        ("identity/3x3".to_string(), fixtures::identity(sq()).unwrap()),
        ("identity/cross5".to_string(), fixtures::identity(Window::cross5()).unwrap()),
    ];
    for (name, se) in [("horiz2", &HORIZ2[..]), ("vert2", &VERT2[..]), ("diag2", &DIAG2[..])] {
        ops.push((format!("erosion/{name}"), fixtures::erosion(sq(), se).unwrap()));
        ops.push((format!("dilation/{name}"), fixtures::dilation(sq(), se).unwrap()));
        ops.push((format!("opening/{name}"), fixtures::opening(sq(), se).unwrap()));
    }
    ops.push(("erosion/diag3".into(), fixtures::erosion(sq(), &DIAG3).unwrap()));
    ops.push(("dilation/diag3".into(), fixtures::dilation(sq(), &DIAG3).unwrap()));
    ops
}

#[test]
fn kernels_are_up_sets_generated_by_their_bases() {
    for (name, op) in fixture_operators() {
        let full = op.window().full();
        let kernel = kernel_enumerate(&op);
        let basis = basis_extract(&kernel);
        for &a in &kernel {
            for k in 0..op.window().len() {
                assert!(op.eval(a | 1 << k), "{name}: kernel is not an up-set at {a:#b}");
            }
            assert!(basis.elements.iter().any(|&m| m & !a == 0), "{name}: {a:#b} dominates no basis element");
        }
        for (i, &m) in basis.elements.iter().enumerate() {
            assert!(op.eval(m));
            for (j, &n) in basis.elements.iter().enumerate() {
                assert!(i == j || m & !n != 0, "{name}: basis is not an antichain");
            }
        }
        let outside = (0..=full).filter(|x| !op.eval(*x));
        for x in outside {
            assert!(basis.elements.iter().all(|&m| m & !x != 0));
        }
    }
}

#[test]
fn fixtures_reconstruct_on_every_configuration() {
    for (name, op) in fixture_operators() {
        let basis = basis_extract(&kernel_enumerate(&op));
        let sup = reconstruct_sup_erosions(&op, &basis).unwrap_or_else(|e| panic!("{name}: {e}"));
        let inf = reconstruct_inf_dilations(&op).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(sup.table(), op.table());
        assert_eq!(inf.table(), op.table());
        assert!(analyze(&op).passed(), "{name}");
    }
}

#[test]
fn fixture_bases_have_the_expected_shape() {
    let w = Window::square(1).unwrap();
    let ero = fixtures::erosion(w.clone(), &DIAG3).unwrap();
    assert_eq!(basis_extract(&kernel_enumerate(&ero)).elements, vec![w.mask(&DIAG3).unwrap()]);
    assert_eq!(dual_basis(&ero).len(), 3);
    assert!(dual_basis(&ero).elements.iter().all(|m| m.count_ones() == 1));

    let med = fixtures::median(w.clone()).unwrap();
    let basis = basis_extract(&kernel_enumerate(&med));
    assert_eq!(basis.len(), 126);
    assert_eq!(dual_basis(&med), basis);

    let cross = fixtures::median(Window::cross5()).unwrap();
    assert_eq!(kernel_enumerate(&cross).len(), 16);
}

#[test]
fn truncated_bases_bound_the_operator() {
    let op = fixtures::median(Window::cross5()).unwrap();
    let basis = basis_extract(&kernel_enumerate(&op)).elements;
    let dual = dual_basis(&op).elements;
    let (lower, upper) = truncated_bounds(&op, &basis[..5], &dual[..5]).unwrap();
    assert!(lower.le(&op) && op.le(&upper));
    let witness: Config = op.first_difference(&lower).expect("five of ten basis sets lose some configuration");
    assert!(op.eval(witness) && !lower.eval(witness));

    let (full_lower, full_upper) = truncated_bounds(&op, &basis, &dual).unwrap();
    assert_eq!(full_lower.table(), op.table());
    assert_eq!(full_upper.table(), op.table());
    let (empty, _) = truncated_bounds(&op, &[], &[]).unwrap();
    assert!(empty.table().iter().all(|&v| !v));

    let mut rng = Rng::new(11);
    for _ in 0..50 {
        let pick = |set: &[Config], rng: &mut Rng| -> Vec<Config> { set.iter().copied().filter(|_| rng.index(2) == 0).collect() };
        let (sub, dsub) = (pick(&basis, &mut rng), pick(&dual, &mut rng));
        let lower = sup_of_erosions(op.window(), &sub);
        let upper = inf_of_dilations(op.window(), &dsub);
        assert!(lower.le(&op) && op.le(&upper));
    }
}

#[test]
fn truncated_bounds_reject_foreign_elements() {
    let op = fixtures::identity(Window::cross5()).unwrap();
    assert!(truncated_bounds(&op, &[0b11011], &[]).is_err());
}

#[test]
fn function_operators_reconstruct_on_the_full_lattice() {
    let levels = [-1, 0, 1];
    for op in [
        FunctionOperator::flat_erosion(vec![-1, 0, 1]).unwrap(),
        FunctionOperator::flat_dilation(vec![-1, 0, 1]).unwrap(),
        FunctionOperator::identity(vec![-1, 0, 1]).unwrap(),
    ] {
        let report = function_operator_check(&op, &levels).unwrap();
        assert_eq!(report.functions_checked, 27);
        assert!(report.sup_form && report.inf_form);
    }
    let median = FunctionOperator::new(
        vec![-1, 0, 1],
        Box::new(|f: &[f64]| f[0].min(f[1]).max(f[1].min(f[2])).max(f[0].min(f[2]))),
    )
    .unwrap();
    let report = function_operator_check(&median, &levels).unwrap();
    assert_eq!(report.dual_basis.len(), report.basis.len());
}

fn random_pl(rng: &mut Rng, dim: usize) -> PLFunction {
    let d = 2 + rng.index(3);
    let components = (0..d)
        .map(|_| Affine::new((0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect(), rng.uniform(-2.0, 2.0)))
        .collect();
    let families = (0..1 + rng.index(4))
        .map(|_| {
            let mut k: Vec<usize> = (0..d).filter(|_| rng.index(2) == 0).collect();
            if k.is_empty() {
                k.push(rng.index(d));
            }
            k
        })
        .collect();
    PLFunction::new(components, families).unwrap()
}

fn nested_loop(f: &PLFunction, x: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for family in f.families() {
        let mut lo = f64::INFINITY;
        for &j in family {
            let c = &f.components()[j];
            let mut v = c.intercept;
            for k in 0..x.len() {
                v += c.slope[k] * x[k];
            }
            if v < lo {
                lo = v;
            }
        }
        if lo > best {
            best = lo;
        }
    }
    best
}

#[test]
fn pl_functions_match_oracle_select_and_split() {
    let mut rng = Rng::new(2024);
    for _ in 0..100 {
        let dim = 1 + rng.index(3);
        let f = random_pl(&mut rng, dim);
        let (sum, min) = dc_decompose(&f);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let v = pl_eval(&f, &x);
            assert_eq!(v, nested_loop(&f, &x));
            assert!(f.selected_component(&x).is_some());
            assert!((sum.eval(&x) - min.eval(&x) - v).abs() <= 1e-9);
        }
    }
}

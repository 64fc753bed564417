use nalgebra::{DMatrix, DVector};
use pinnbasis::basis::{svd_sorted, LegendreBasis, OrthonormalBasis, SpectralBasis};
use pinnbasis::network::FeatureNetwork;
use pinnbasis::quadrature::{Domain, PointSet, QuadratureRule};
use proptest::prelude::*;

fn domain_strategy() -> impl Strategy<Value = Domain> {
    prop_oneof![
        (-2.0f64..0.0, 0.5f64..3.0).prop_map(|(a, l)| Domain::Interval { a, b: a + l }),
        (-2.0f64..0.0, 0.5f64..3.0, -2.0f64..0.0, 0.5f64..3.0)
            .prop_map(|(ax, lx, ay, ly)| Domain::Box { ax, bx: ax + lx, ay, by: ay + ly }),
        Just(Domain::LShape),
    ]
}

fn net_for(domain: &Domain, widths: &[usize], seed: u64) -> FeatureNetwork {
    let mut dims = vec![domain.dim()];
    dims.extend_from_slice(widths);
    dims.push(1);
    FeatureNetwork::new(&dims, seed).unwrap()
}

fn order_for(domain: &Domain) -> usize {
    if domain.dim() == 1 {
        40
    } else {
        8
    }
}

fn gram(values: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    values.transpose() * w * values
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn discrete_orthonormality_on_the_build_rule(
        domain in domain_strategy(),
        widths in prop::collection::vec(2usize..=12, 1..=3),
        seed in any::<u64>(),
    ) {
        let net = net_for(&domain, &widths, seed);
        let rule = QuadratureRule::new(domain, order_for(&domain)).unwrap();
        let basis = OrthonormalBasis::build(&net, &rule).unwrap();
        let n = basis.r_max();
        prop_assert!(n >= 1 && n <= widths.last().unwrap() + 1);
        let q = basis.tabulate(&rule.interior_nodes, n).unwrap().values;
        prop_assert!((gram(&q, &rule.interior_weights) - DMatrix::identity(n, n)).amax() < 1e-10);
    }

    #[test]
    fn leading_functions_do_not_depend_on_the_count(
        domain in domain_strategy(),
        widths in prop::collection::vec(2usize..=10, 1..=2),
        seed in any::<u64>(),
    ) {
        let net = net_for(&domain, &widths, seed);
        let rule = QuadratureRule::new(domain, order_for(&domain)).unwrap();
        let basis = OrthonormalBasis::build(&net, &rule).unwrap();
        let n = basis.r_max();
        let k = n.div_ceil(2);
        let full = basis.tabulate(&rule.interior_nodes, n).unwrap();
        let part = basis.tabulate(&rule.interior_nodes, k).unwrap();
        prop_assert!((full.values.columns(0, k) - &part.values).amax() < 1e-12);
        for a in 0..domain.dim() {
            prop_assert!((full.gradients[a].columns(0, k) - &part.gradients[a]).amax() < 1e-10);
        }
    }

    #[test]
    fn basis_spans_the_network_output(
        domain in domain_strategy(),
        widths in prop::collection::vec(2usize..=8, 1..=2),
        seed in any::<u64>(),
    ) {
        // u_NN = sum_k <u_NN, q_k> q_k on the build rule when no features were dropped
        let net = net_for(&domain, &widths, seed);
        let rule = QuadratureRule::new(domain, order_for(&domain)).unwrap();
        let basis = OrthonormalBasis::build(&net, &rule).unwrap();
        prop_assume!(basis.r_max() == widths.last().unwrap() + 1);
        let s = basis.singular_values();
        prop_assume!(s[s.len() - 1] / s[0] > 1e-6);
        let n = basis.r_max();
        let q = basis.tabulate(&rule.interior_nodes, n).unwrap().values;
        let u = DVector::from_vec(net.forward_batch(&rule.interior_nodes, false).unwrap().output_values());
        let w = DVector::from_column_slice(&rule.interior_weights);
        let coeffs = q.transpose() * u.component_mul(&w);
        let rebuilt = &q * coeffs;
        prop_assert!((rebuilt - &u).amax() < 1e-8 * (1.0 + u.amax()));
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let domain = Domain::Box { ax: -1.0, bx: 1.0, ay: -1.0, by: 1.0 };
    let net = FeatureNetwork::new(&[2, 8, 6, 1], 3).unwrap();
    let rule = QuadratureRule::new(domain, 10).unwrap();
    let basis = OrthonormalBasis::build(&net, &rule).unwrap();
    let r = 3;
    let x = [0.21, -0.43];
    let h = 1e-5;
    let g = basis.eval_gradient(&x, r).unwrap();
    let mut lap_fd = DVector::zeros(r + 1);
    for a in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[a] += h;
        xm[a] -= h;
        let (vp, vm, v0) = (basis.eval(&xp, r).unwrap(), basis.eval(&xm, r).unwrap(), basis.eval(&x, r).unwrap());
        let fd = (&vp - &vm) / (2.0 * h);
        assert!((fd - g.column(a)).amax() < 1e-6 * (1.0 + g.amax()));
        lap_fd += (vp - v0 * 2.0 + vm) / (h * h);
    }
    let lap = basis.eval_laplacian(&x, r).unwrap();
    assert!((lap_fd - &lap).amax() < 1e-3 * (1.0 + lap.amax()));
}

#[test]
fn singular_values_of_orthonormal_columns_are_one() {
    let raw = DMatrix::from_fn(30, 6, |i, j| ((i * 7 + j * 3) as f64).sin() + (i as f64) * 0.01 * j as f64);
    let q = raw.qr().q();
    let svd = svd_sorted(&q).unwrap();
    assert!(svd.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-12));
}

#[test]
fn json_roundtrip_reproduces_the_basis() {
    let domain = Domain::LShape;
    let net = FeatureNetwork::new(&[2, 9, 7, 1], 8).unwrap();
    let rule = QuadratureRule::new(domain, 6).unwrap();
    let basis = OrthonormalBasis::build(&net, &rule).unwrap();
    let back = OrthonormalBasis::from_json(&basis.to_json(), &net).unwrap();
    assert_eq!(back.r_max(), basis.r_max());
    let pts = PointSet::from_flat(2, vec![0.1, -0.5, -0.7, 0.3]).unwrap();
    let a = basis.tabulate(&pts, basis.r_max()).unwrap();
    let b = back.tabulate(&pts, back.r_max()).unwrap();
    assert_eq!(a, b);
    let other = FeatureNetwork::new(&[2, 9, 7, 1], 9).unwrap();
    assert!(OrthonormalBasis::from_json(&basis.to_json(), &other).is_err());
}

#[test]
fn legendre_basis_is_orthonormal_with_exact_derivatives() {
    let domain = Domain::Interval { a: -0.5, b: 2.0 };
    let leg = LegendreBasis::new(&domain, 12).unwrap();
    let rule = QuadratureRule::new(domain, 20).unwrap();
    let t = leg.tabulate(&rule.interior_nodes, 13).unwrap();
    assert!((gram(&t.values, &rule.interior_weights) - DMatrix::identity(13, 13)).amax() < 1e-13);
    let x = [0.77];
    let h = 1e-6;
    let fd = (leg.eval(&[x[0] + h], 12).unwrap() - leg.eval(&[x[0] - h], 12).unwrap()) / (2.0 * h);
    assert!((fd - leg.eval_gradient(&x, 12).unwrap().column(0)).amax() < 1e-6);
}

#[test]
fn coercive_penalty_grows_with_degree() {
    let domain = Domain::Interval { a: -1.0, b: 1.0 };
    let low = LegendreBasis::new(&domain, 4).unwrap();
    let high = LegendreBasis::new(&domain, 32).unwrap();
    assert_eq!(low.coercive_penalty(200.0), 200.0);
    assert!(high.coercive_penalty(200.0) >= 4.0 * 33.0 * 33.0 / 2.0);
}

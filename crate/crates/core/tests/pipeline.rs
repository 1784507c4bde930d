use num_traits::Zero;
use proptest::prelude::*;

use polynet::activation::{rho, sigma, sigma_exact};
use polynet::complexity::{log2_quantized_cover_size, CoverSpec};
use polynet::exact_rep::{compile_polynomial, relu_to_rho, verify_exact_representation_with, width_bound};
use polynet::poly::MultiIndex;
use polynet::rational::{from_f64, rat, to_f64};
use polynet::smooth::TestFunction;
use polynet::taylor::{build_sigma_network, localized_taylor};
use polynet::{Activation, NetworkFile, Parallelism, Polynomial, ShallowNetwork};

fn polynomial(d: usize, terms: &[(Vec<u32>, i64, i64)]) -> Polynomial {
    let mut p = Polynomial::zero(d);
    for (e, num, den) in terms {
        p.add_term(MultiIndex::new(e.clone()).unwrap(), rat(*num, *den)).unwrap();
    }
    p
}

fn terms(d: usize) -> impl Strategy<Value = Vec<(Vec<u32>, i64, i64)>> {
    prop::collection::vec((prop::collection::vec(0u32..=3, d), -9i64..=9, 1i64..=7), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn compiled_networks_equal_their_polynomials(d in 1usize..=2, seed in 0u64..1000, t in terms(2)) {
        let t: Vec<_> = t.into_iter().map(|(e, n, q)| (e[..d].to_vec(), n, q)).collect();
        let p = polynomial(d, &t);
        let net = compile_polynomial(&p, Parallelism::Sequential).unwrap().network;
        let report = verify_exact_representation_with(&p, &net, 10, seed, Parallelism::Sequential).unwrap();
        prop_assert!(report.is_exact());
        prop_assert_eq!(net.width(), width_bound(p.degree().max(1), d).exact_count.to_string().parse::<usize>().unwrap());
    }

    #[test]
    fn sigma_is_bounded_and_agrees_with_exact(x in -3.0f64..500.0) {
        let s = sigma(x);
        prop_assert!(s.abs() <= 1.0);
        let exact = to_f64(&sigma_exact(&from_f64(x).unwrap()));
        prop_assert!((s - exact).abs() <= 1e-9);
    }

    #[test]
    fn cover_entropy_shrinks_as_delta_grows(p in 1usize..6, r in 0.5f64..20.0, d1 in 0.01f64..1.0, d2 in 0.01f64..1.0) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let fine = CoverSpec::new(p, r, lo).unwrap();
        let coarse = CoverSpec::new(p, r, hi).unwrap();
        prop_assert!(coarse.log2_cover_size() <= fine.log2_cover_size());
        prop_assert!(log2_quantized_cover_size(p, r, fine.epsilon()).unwrap() <= fine.entropy_bound());
    }
}

#[test]
fn relu_network_survives_conversion_and_round_trip() {
    let net = ShallowNetwork::new(
        Activation::Relu,
        vec![1.5, -2.0],
        vec![0.25, -3.0],
        vec![vec![4.0], vec![1.0]],
    )
    .unwrap();
    let converted = relu_to_rho(&net).unwrap();
    assert_eq!(converted.activation(), Activation::Rho);
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        assert!((converted.eval1(x) - net.eval1(x)).abs() < 1e-12);
    }
    let text = serde_json::to_string(&NetworkFile::Float(converted.clone()).to_json()).unwrap();
    match NetworkFile::from_json(&serde_json::from_str(&text).unwrap()).unwrap() {
        NetworkFile::Float(back) => assert_eq!(back, converted),
        NetworkFile::Exact(_) => panic!("float network read back as exact"),
    }
}

#[test]
fn sigma_network_tracks_the_function() {
    let f = TestFunction::by_name("exp", 3.0).unwrap();
    let net = build_sigma_network(&f, 32).unwrap();
    let t = localized_taylor(&f, 32).unwrap();
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        assert!((net.eval1(x) - t.eval(x)).abs() < 1e-10);
        assert!((net.eval1(x) - x.exp()).abs() < 1e-4);
    }
}

#[test]
fn rho_is_relu_below_one() {
    for i in -1000..=1000 {
        let x = i as f64 / 1000.0;
        assert_eq!(rho(x), x.max(0.0));
    }
    assert_eq!(rho(2.5), 2.125);
    assert!(sigma_exact(&rat(3, 1)).is_zero());
}

use std::f64::consts::PI;
use std::sync::Arc;

use lgtquench_core::exact::{doubling_overlap, evolve, rate_from_overlap, EvolutionSpec, StateVector};
use lgtquench_core::freefermion::{
    bessel_j0, return_rate_analytic, return_rate_analytic_grid, return_rate_mode_sum, QuadratureSpec,
};
use lgtquench_core::model::{build_hamiltonian, named_state, Basis, LatticeSpec, ModelKind, ModelParams, NamedState};
use lgtquench_core::par::Execution;
use lgtquench_core::C64;
use proptest::prelude::*;

/// `J_0(x) = (1/pi) int_0^pi cos(x sin th) dth` by composite Simpson.
fn j0_quadrature(x: f64) -> f64 {
    let n = 4000;
    let h = PI / n as f64;
    let f = |th: f64| (x * th.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0 / PI
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bessel_matches_its_integral_representation(x in -40.0f64..40.0) {
        prop_assert!((bessel_j0(x) - j0_quadrature(x)).abs() < 1e-11);
    }

    #[test]
    fn fine_mode_sum_approaches_the_integral(t in 0.0f64..1.5) {
        let exact = return_rate_analytic(t, &QuadratureSpec::default()).unwrap();
        let sum = return_rate_mode_sum(t, 2048).unwrap();
        prop_assert!((exact - sum).abs() < 1e-6, "{exact} vs {sum}");
        prop_assert!(exact >= 0.0);
    }

    #[test]
    fn rate_ignores_the_overlap_phase(re in -1.0f64..1.0, im in -1.0f64..1.0, phi in 0.0f64..6.3, n in 1usize..64) {
        let o = C64::new(re, im) * 0.7;
        prop_assume!(o.norm() > 1e-6);
        let r = rate_from_overlap(o, n);
        let rotated = rate_from_overlap(o * C64::from_polar(1.0, phi), n);
        prop_assert!((r - rotated).abs() < 1e-12 * r.abs().max(1.0));
        prop_assert!(r >= 0.0);
    }
}

#[test]
fn parallel_and_sequential_grids_agree_bit_for_bit() {
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.03).collect();
    let q = QuadratureSpec::default();
    let seq = return_rate_analytic_grid(&times, &q, Execution::Sequential);
    let par = return_rate_analytic_grid(&times, &q, Execution::Parallel);
    assert_eq!(seq, par);
    assert_eq!(seq[0], Ok(0.0));
}

fn z2_params() -> impl Strategy<Value = ModelParams> {
    (0.5f64..1.5, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(j, mu, h)| ModelParams::z2(j, mu, h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_is_unitary_and_doubling_is_exact(params in z2_params(), t in 0.1f64..2.0) {
        let lattice = LatticeSpec::periodic(6).unwrap();
        let init = named_state(NamedState::SlPlus, &lattice).unwrap();
        let basis = Arc::new(Basis::containing(&init, &lattice, ModelKind::Z2Lgt).unwrap());
        let h = build_hamiltonian(&params, &basis).unwrap();
        let psi0 = StateVector::product(basis.clone(), &init).unwrap();
        let spec = EvolutionSpec { tol: 1e-12, ..Default::default() };
        let states = evolve(&h, &psi0, &[0.5 * t, t], &spec).unwrap();
        prop_assert!((states[1].norm() - 1.0).abs() < 1e-10);
        let direct = psi0.overlap(&states[1]).unwrap();
        let doubled = doubling_overlap(&states[0], &states[0]).unwrap();
        prop_assert!((direct - doubled).norm() < 1e-9, "{direct} vs {doubled}");
    }
}

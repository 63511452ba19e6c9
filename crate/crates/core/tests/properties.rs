use nalgebra::{DMatrix, DVector};
use noisebound_core::bounds::{
    fidelity_lower_bound, gamma_max_bound, integrate_gamma_squared, integrate_gamma_squared_simpson,
};
use noisebound_core::qcore::{
    bures_angle, expm_hermitian, fidelity, max_abs_diff, tensor, DensityMatrix, HermitianOperator, Pauli, StateVector,
    C64,
};
use noisebound_core::sde::Schedule;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn hermitian(dim: usize) -> impl Strategy<Value = HermitianOperator> {
    prop::collection::vec(complex(), dim * dim).prop_map(move |entries| {
        let m = DMatrix::from_vec(dim, dim, entries);
        let h = (&m + m.adjoint()) * C64::from(0.5);
        HermitianOperator::new(h).unwrap()
    })
}

fn state(dim: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(complex(), dim)
        .prop_filter("nonzero", |v| v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(|v| StateVector::normalized(DVector::from_vec(v)).unwrap())
}

fn dim_and_pair() -> impl Strategy<Value = (StateVector, StateVector)> {
    prop_oneof![Just(2usize), Just(4usize)].prop_flat_map(|d| (state(d), state(d)))
}

fn pauli_strategy() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

proptest! {
    #[test]
    fn exponentials_of_hermitian_are_unitary(h in prop_oneof![hermitian(2), hermitian(4)], t in -20.0..20.0f64) {
        let u = expm_hermitian(&h, C64::new(0.0, -t));
        let d = h.dim();
        let gram = u.adjoint() * &u;
        prop_assert!(max_abs_diff(&gram, &DMatrix::identity(d, d)) <= 1e-10);
    }

    #[test]
    fn fidelity_ignores_global_phase((a, b) in dim_and_pair(), alpha in -10.0..10.0f64) {
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((fidelity(&a.with_global_phase(alpha), &b).unwrap() - f).abs() <= 1e-12);
        prop_assert!((fidelity(&a, &b.with_global_phase(alpha)).unwrap() - f).abs() <= 1e-12);
        prop_assert!((fidelity(&b, &a).unwrap() - f).abs() <= 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn bures_angle_consistent_with_fidelity((a, b) in dim_and_pair()) {
        let l = bures_angle(&a, &b).unwrap();
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&l));
        prop_assert!((l.cos().powi(2) - fidelity(&a, &b).unwrap()).abs() <= 1e-10);
        // density-matrix route: arccos sqrt(Tr[rho_a rho_b])
        let overlap = DensityMatrix::from_pure(&a).overlap(&DensityMatrix::from_pure(&b)).unwrap();
        prop_assert!((overlap.clamp(0.0, 1.0).sqrt().acos() - l).abs() <= 1e-6);
    }

    #[test]
    fn tensor_dimensions_multiply(a in pauli_strategy(), b in pauli_strategy(), c in pauli_strategy()) {
        let (a, b, c) = (a.matrix(), b.matrix(), c.matrix());
        let left = tensor(&a, &tensor(&b, &c));
        let right = tensor(&tensor(&a, &b), &c);
        prop_assert_eq!(left.dim(), 8);
        prop_assert!(max_abs_diff(left.matrix(), right.matrix()) == 0.0);
    }

    #[test]
    fn bound_monotone_in_time_and_strength(g in 0.0..2.0f64, dg in 0.0..1.0f64, t in 0.0..5.0f64, dt in 0.0..5.0f64) {
        let s = Schedule::constant(g);
        let stronger = Schedule::constant(g + dg);
        let base = fidelity_lower_bound(&[&s], t).unwrap().f_star;
        prop_assert!(fidelity_lower_bound(&[&s], t + dt).unwrap().f_star <= base);
        prop_assert!(fidelity_lower_bound(&[&stronger], t).unwrap().f_star <= base);
        prop_assert!((fidelity_lower_bound(&[&s], t).unwrap().f_star - (-integrate_gamma_squared(&s, t).unwrap()).exp()).abs() <= 1e-12);
    }

    #[test]
    fn bound_multiplies_across_channels(ga in 0.0..2.0f64, gb in 0.0..2.0f64, t in 0.0..4.0f64) {
        let a = Schedule::constant(ga);
        let b = Schedule::piecewise(vec![0.0, 1.0, 4.0], vec![gb, 0.5 * gb]).unwrap();
        let joint = fidelity_lower_bound(&[&a, &b], t).unwrap().f_star;
        let product = fidelity_lower_bound(&[&a], t).unwrap().f_star * fidelity_lower_bound(&[&b], t).unwrap().f_star;
        prop_assert!((joint - product).abs() <= 1e-14 * product.max(1e-300) + 1e-300);
    }

    #[test]
    fn gamma_max_bound_is_dominated(values in prop::collection::vec(0.0..2.0f64, 1..6), t_frac in 0.0..1.0f64) {
        let n = values.len();
        let breaks: Vec<f64> = (0..=n).map(|k| k as f64 * 0.5).collect();
        let sup = values.iter().copied().fold(0.0, f64::max);
        let sched = Schedule::piecewise(breaks, values).unwrap();
        let t = t_frac * n as f64 * 0.5;
        let report = fidelity_lower_bound(&[&sched], t).unwrap();
        prop_assert!(gamma_max_bound(sup, t) <= report.f_star * (1.0 + 1e-15));
        prop_assert!(report.gamma_max <= sup);
    }

    #[test]
    fn simpson_matches_closed_form_on_piecewise(values in prop::collection::vec(0.0..3.0f64, 1..8), t_frac in 0.01..1.0f64) {
        let n = values.len();
        let breaks: Vec<f64> = (0..=n).map(|k| k as f64 * 0.3 + (k as f64).powi(2) * 0.01).collect();
        let end = *breaks.last().unwrap();
        let sched = Schedule::piecewise(breaks, values).unwrap();
        let t = t_frac * end;
        let closed = integrate_gamma_squared(&sched, t).unwrap();
        let simpson = integrate_gamma_squared_simpson(&sched, t).unwrap();
        prop_assert!((closed - simpson).abs() <= 1e-10 * closed.max(1e-12), "{} vs {}", closed, simpson);
    }
}

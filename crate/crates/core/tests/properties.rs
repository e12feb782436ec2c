use std::sync::Arc;

use gw0lab::config::{parse_config, render_config, RunConfig};
use gw0lab::freq::{make_grid, plemelj_residual, uniform_window, MatrixTrack};
use gw0lab::io::{parse_track, render_track};
use gw0lab::kernel::{adjoint_identity_check, odot, Kernel};
use gw0lab::linalg::{self, CMat};
use gw0lab::model::{build_lattice, solve_mean_field, ModelConfig, Potential};
use gw0lab::screening::RpaModel;
use gw0lab::self_energy::exchange_kernel;
use num_complex::Complex64;
use proptest::prelude::*;

fn cmat(m: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m * m)
        .prop_map(move |v| CMat::from_iterator(m, m, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

fn psd_pair() -> impl Strategy<Value = (CMat, CMat, f64)> {
    (1usize..=8, prop::sample::select(vec![1.0, 0.5, 0.125])).prop_flat_map(|(m, w)| {
        (cmat(m), cmat(m)).prop_map(move |(a, b)| (&a * a.adjoint(), &b * b.adjoint(), w))
    })
}

fn chain() -> impl Strategy<Value = ModelConfig> {
    (4usize..=8, 1usize..=3, prop::sample::select(vec![0.5, 1.0]), 0.0f64..2.0).prop_map(|(m, n, h, q)| {
        let mut c = ModelConfig::chain(m, n);
        c.spacing = h;
        c.potential = Potential::Well { charge: q };
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_product_preserves_positivity((a, b, w) in psd_pair()) {
        let c = odot(&Kernel::new(a.clone(), w).unwrap(), &Kernel::new(b, w).unwrap()).unwrap();
        let scale = 1.0 + linalg::op_norm(&c.mat);
        prop_assert!(linalg::herm_eigvals(&linalg::hermitian_part(&c.mat))[0] >= -1e-12 * scale);
    }

    #[test]
    fn kernel_adjoint_identity((a, g) in (1usize..=8).prop_flat_map(|m| (cmat(m), cmat(m)))) {
        let r = adjoint_identity_check(&Kernel::new(a, 1.0).unwrap(), &Kernel::new(g, 1.0).unwrap()).unwrap();
        prop_assert!(r < 1e-14);
    }

    #[test]
    fn track_text_round_trip(k in (4usize..=24).prop_map(|k| 2 * k), m in 1usize..=3, seed in any::<u64>(), off in -2.0f64..2.0) {
        let grid = Arc::new(make_grid(k, 0.3).unwrap());
        let s = seed as f64 / u64::MAX as f64;
        let t = MatrixTrack::from_fn(grid, off, |w| {
            CMat::from_fn(m, m, |i, j| Complex64::new((w * s + i as f64).sin() / 3.0, (j as f64 - w).cos() * 1e-7))
        })
        .unwrap();
        let back = parse_track(&render_track(&t)).unwrap();
        prop_assert_eq!(back.values, t.values);
        prop_assert_eq!(back.axis_offset, t.axis_offset);
    }

    #[test]
    fn config_round_trip(
        sites in 2usize..=12,
        n in 1usize..=4,
        k in (4usize..=64).prop_map(|k| 2 * k),
        lambdas in prop::collection::vec(0.0f64..1.0, 1..4),
        seed in any::<u64>(),
        validate in any::<bool>(),
    ) {
        let mut c = RunConfig::reference();
        c.model.sites = sites;
        c.model.n = n;
        c.grid.k = k;
        c.solver.lambda = lambdas;
        c.run.seed = seed;
        c.checks.validate = validate;
        prop_assert_eq!(parse_config(&render_config(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn causal_lorentzians_satisfy_plemelj(center in -5.0f64..5.0, width in 0.5f64..3.0) {
        let w = uniform_window(-400.0, 400.0, 1 << 14);
        let f: Vec<Complex64> = w.iter().map(|&x| 1.0 / Complex64::new(x - center, width)).collect();
        prop_assert!(plemelj_residual(&w, &f).unwrap() < 1e-2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mean_field_projector(cfg in chain()) {
        let model = build_lattice(&cfg).unwrap();
        if let Ok(mf) = solve_mean_field(&model, cfg.n_elec) {
            let g = &mf.gamma0;
            prop_assert!(linalg::max_abs_diff_r(&(g * g), g) < 1e-12);
            prop_assert!((g.trace() - cfg.n_elec as f64).abs() < 1e-12);
            prop_assert!(mf.homo() < mf.mu0 && mf.mu0 < mf.lumo());
        }
    }

    #[test]
    fn screening_sandwich_and_exchange_sign(cfg in chain(), omega in 0.0f64..50.0) {
        let model = build_lattice(&cfg).unwrap();
        if let Ok(mf) = solve_mean_field(&model, cfg.n_elec) {
            let rpa = RpaModel::new(&model, &mf);
            let z = Complex64::new(0.0, omega);
            let p = rpa.p0_sym(z);
            let chi = rpa.chi0(z).unwrap();
            let tol = 1e-10 * (1.0 + linalg::op_norm(&p));
            prop_assert!(*linalg::herm_eigvals(&chi).last().unwrap() <= tol);
            prop_assert!(linalg::herm_eigvals(&(&chi - &p))[0] >= -tol);
            let kx = exchange_kernel(&mf.gamma0, &model.coulomb);
            prop_assert!(*linalg::sym_eigvals(&kx).last().unwrap() <= 1e-10);
        }
    }
}

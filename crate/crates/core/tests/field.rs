use ldacert::field::*;
use ldacert::tiling::Tetra;
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn gaussian_mass_on_grid() {
    let g = GridSpec::centered_cube(64, 8.0).unwrap();
    let f = Density::gaussian(1.0, 1.0).sample(Some(&g)).unwrap();
    assert!((integrate(&f).unwrap() - 1.0).abs() < 5e-3);
}

#[test]
fn grid_functionals_match_closed_forms() {
    let rho = Density::gaussian(1.0, 1.0);
    let exact = functionals(&rho, 0.5, 4.0).unwrap();
    let g = GridSpec::centered_cube(96, 6.0).unwrap();
    let f = grid_functionals(&rho.sample(Some(&g)).unwrap(), 0.5, 4.0).unwrap();
    assert!((f.kin / 0.75 - 1.0).abs() < 5e-3);
    for ((name, a), (_, b)) in exact.entries().iter().zip(f.entries().iter()) {
        assert!((a - b).abs() <= 2e-2 * a.abs().max(1e-12), "{name}: {a} vs {b}");
    }
}

#[test]
fn second_order_convergence() {
    let rho = Density::gaussian(1.0, 1.0);
    let err = |n: usize| {
        let g = GridSpec::centered_cube(n, 8.0).unwrap();
        (grid_functionals(&rho.sample(Some(&g)).unwrap(), 0.5, 4.0).unwrap().kin - 0.75).abs()
    };
    let (e1, e2, e3) = (err(24), err(48), err(96));
    assert!(e1 / e2 >= 3.0 && e2 / e3 >= 3.0, "{e1} {e2} {e3}");
}

#[test]
fn bump_radial_vs_grid() {
    let rho = Density::parse_builtin("compact-bump,radius=1.5,mass=2").unwrap();
    let a = functionals(&rho, 0.5, 4.0).unwrap();
    let g = GridSpec::centered_cube(80, 1.7).unwrap();
    let b = grid_functionals(&rho.sample(Some(&g)).unwrap(), 0.5, 4.0).unwrap();
    for name in ["mass", "l2", "l43", "l53"] {
        let (x, y) = (
            a.entries().iter().find(|e| e.0 == name).unwrap().1,
            b.entries().iter().find(|e| e.0 == name).unwrap().1,
        );
        assert!((x / y - 1.0).abs() < 1e-3, "{name}: {x} vs {y}");
    }
    assert!((a.mass - 2.0).abs() < 1e-9);
}

#[test]
fn smeared_tetra_mass() {
    let rho = Density::parse_builtin("smeared-tetra,rho0=2,ell=1,delta=0.3").unwrap();
    let f = functionals(&rho, 0.5, 4.0).unwrap();
    assert!((f.mass / (2.0 / 24.0) - 1.0).abs() < 1e-3, "{}", f.mass);
}

#[test]
fn scale_example_values() {
    let f = FunctionalSet { hartree: Some(1.0), ..FunctionalSet::unit(0.5, 4.0) };
    let s = scale_functionals(&f, 1000.0).unwrap();
    assert!((s.kin - 10.0).abs() < 1e-12);
    assert!((s.hartree.unwrap() - 1e5).abs() < 1e-6);
    let f3 = FunctionalSet::unit(0.5, 3.0);
    assert_eq!(scale_functionals(&f3, 8.0).unwrap().thg, 1.0);
    assert_eq!(scale_functionals(&f, 1.0).unwrap(), f);
    assert!(scale_functionals(&f, 0.5).is_err());
}

#[test]
fn scaled_functionals_match_rescaled_density() {
    // ρ_N for a Gaussian is again a Gaussian.
    let n: f64 = 27.0;
    let base = functionals(&Density::gaussian(1.0, 1.0), 0.5, 4.0).unwrap();
    let direct = functionals(&Density::gaussian(3.0, n), 0.5, 4.0).unwrap();
    let scaled = scale_functionals(&base, n).unwrap();
    for ((name, a), (_, b)) in direct.entries().iter().zip(scaled.entries().iter()) {
        assert!((a / b - 1.0).abs() < 1e-12, "{name}");
    }
}

#[test]
fn sobolev_examples() {
    let t = Tetra::new([[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let g = GridSpec::new([61; 3], [1.0 / 60.0; 3], [0.0; 3]).unwrap();
    let zero = ScalarField::sample(g.clone(), |_| 0.0).unwrap();
    assert_eq!(sobolev_ratio(&zero, &t, 4.0, 1.0).unwrap(), 0.0);
    let lin = ScalarField::sample(g.clone(), |x| x[0]).unwrap();
    let r = sobolev_ratio(&lin, &t, 4.0, 1.0).unwrap();
    // ‖x₁‖_∞ = 1, ∫|∇u|⁴ = vol = 1/6.
    assert!((r - 6.0).abs() < 0.1 * 6.0, "{r}");
    let pos = ScalarField::sample(g.clone(), |x| 1.0 + x[0]).unwrap();
    assert!(matches!(sobolev_ratio(&pos, &t, 4.0, 1.0), Err(ldacert::Error::Precondition(_))));
    let mut worst: f64 = 0.0;
    for k in 1..=6 {
        let u = ScalarField::sample(g.clone(), |x| (PI * k as f64 * x[0]).sin()).unwrap();
        worst = worst.max(sobolev_ratio(&u, &t, 4.0, 1.0).unwrap());
    }
    assert!(worst.is_finite() && worst < 10.0);
}

proptest! {
    #[test]
    fn scaling_composes(a in 1.0f64..1e3, b in 1.0f64..1e3, p in 3.1f64..8.0) {
        let f = FunctionalSet { hartree: Some(0.7), ..FunctionalSet::unit(0.5, p) };
        let two = scale_functionals(&scale_functionals(&f, a).unwrap(), b).unwrap();
        let one = scale_functionals(&f, a * b).unwrap();
        for ((_, x), (_, y)) in two.entries().iter().zip(one.entries().iter()) {
            prop_assert!((x / y - 1.0).abs() < 1e-12);
        }
        prop_assert!((two.hartree.unwrap() / one.hartree.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_round_trip(vals in proptest::collection::vec(-1e300f64..1e300, 27), h in 1e-3f64..10.0) {
        let spec = GridSpec::new([3; 3], [h, 2.0 * h, 0.1], [-h, 0.3, 1e-7]).unwrap();
        let f = ScalarField::new(spec, vals).unwrap();
        let mut buf = Vec::new();
        write_grid(&f, &mut buf).unwrap();
        let g = read_grid(&buf[..]).unwrap();
        prop_assert_eq!(g.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(g.spec, f.spec);
    }
}

use ldacert::bounds::*;
use ldacert::field::{self, FunctionalSet};
use ldacert::kinetic::{self, UpperVariant};
use ldacert::{quad, Density};
use std::f64::consts::PI;

#[test]
fn constants_agree() {
    assert!((c_tf(3) - c_tf3_closed()).abs() < 1e-12);
    assert!((c_lo_grad() - 1.4508).abs() < 5e-5);
    // Dirac exchange, −(3/4)(3/π)^{1/3}.
    assert!((dirac_exchange() + 0.75 * (3.0 / PI).cbrt()).abs() < 1e-15);
}

#[test]
fn gaussian_lda_value() {
    let rho = Density::gaussian(1.0, 1.0);
    let m = PowerLawModel::tf_dirac(1.0);
    let v = lda_energy(&rho, &m).unwrap();
    assert!((v / 0.4828 - 1.0).abs() < 0.01);
    // The generic radial path, through a closure model, agrees.
    let g = FnModel { id: "closure".into(), f: |r: f64| m.eval(r) };
    assert!((lda_energy(&rho, &g).unwrap() - v).abs() < 1e-9);
    assert_eq!(lda_energy(&Density::gaussian(1.0, 0.0), &m).unwrap(), 0.0);
}

#[test]
fn lower_example() {
    let f = field::functionals(&Density::gaussian(1.0, 1.0), 0.5, 4.0).unwrap();
    let lo = e_lower(&f, &Constants::default());
    assert!((lo - 0.2493).abs() < 2e-4);
    assert_eq!(e_lower(&FunctionalSet::zero(0.5, 4.0), &Constants::default()), 0.0);
}

#[test]
fn envelope_homogeneity() {
    let (l1, h1) = e_envelope(2.0, 1.0);
    let (l2, h2) = e_envelope(16.0, 1.0);
    assert!((l2 / l1 - 8f64.powf(4.0 / 3.0)).abs() < 1e-12);
    assert!((h2 / h1 - 8f64.powf(5.0 / 3.0)).abs() < 1e-10);
    let mut prev = e_envelope(0.0, 1.0);
    for i in 1..50 {
        let cur = e_envelope(i as f64 * 0.3, 1.0);
        assert!(cur.0 < prev.0 && cur.1 > prev.1);
        prev = cur;
    }
}

#[test]
fn model_satisfies_envelope() {
    let m = PowerLawModel::tf_dirac(1.0);
    for i in 0..200 {
        let r = 1e-4 * 1.1f64.powi(i);
        let (lo, hi) = e_envelope(r, 1.0);
        let v = m.eval(r);
        assert!(lo <= v && v <= hi, "rho={r}");
    }
}

#[test]
fn upper_grid_vs_golden() {
    let f = field::functionals(&Density::gaussian(1.0, 1.0), 0.5, 4.0).unwrap();
    let c = Constants::default();
    let (_, min, _, grid_min) = quad::grid_then_golden(
        |e| e_upper(&f, e, &c).unwrap(),
        kinetic::EPS_GRID_LO,
        kinetic::EPS_GRID_HI,
        kinetic::EPS_GRID_POINTS,
    );
    assert!(min <= grid_min && grid_min <= min * 1.001);
}

#[test]
fn lipschitz_probe() {
    let m = PowerLawModel::tf_dirac(1.0);
    let pairs: Vec<(f64, f64)> = (1..60).map(|i| (0.05 * i as f64, 0.05 * i as f64 * 0.7)).collect();
    let a = model_lipschitz_probe(&m, &pairs).unwrap();
    let b = model_lipschitz_probe(&m, &pairs[10..]).unwrap();
    assert!(a.constant.is_finite() && (a.constant / b.constant - 1.0).abs() < 0.2);
    assert!(model_lipschitz_probe(&m, &[(1.0, 1.0)]).is_err());
    // A linear model violates the envelope near zero and the probe grows.
    let lin = FnModel { id: "linear".into(), f: |r: f64| r };
    let small = model_lipschitz_probe(&lin, &[(1e-6, 5e-7)]).unwrap().constant;
    let large = model_lipschitz_probe(&lin, &[(1e-1, 5e-2)]).unwrap().constant;
    assert!(small > 10.0 * large);
}

#[test]
fn gradient_lieb_oxford() {
    let mut f = FunctionalSet::unit(0.5, 4.0);
    f.tv = 0.0;
    let v = lieb_oxford_gradient_bound(&f, 1e-9).unwrap();
    assert!((v - c_lo_grad()).abs() < 1e-8);
    let f = field::functionals(&Density::gaussian(1.0, 1.0), 0.5, 4.0).unwrap();
    let opt = lieb_oxford_gradient_optimum(&f);
    for &e in &[0.5 * opt.eps, 2.0 * opt.eps] {
        assert!(lieb_oxford_gradient_bound(&f, e).unwrap() >= opt.value);
    }
}

#[test]
fn sandwich_on_corpus() {
    let c = Constants::default();
    let specs = [
        "gaussian,sigma=1,mass=1",
        "gaussian,sigma=0.5,mass=1",
        "gaussian,sigma=2,mass=3",
        "gaussian,sigma=1,mass=10",
        "gaussian,sigma=0.3,mass=0.2",
        "gaussian,sigma=4,mass=100",
        "compact-bump,radius=1,mass=1",
        "compact-bump,radius=2,mass=5",
        "compact-bump,radius=0.5,mass=0.1",
        "compact-bump,radius=3,mass=30",
    ];
    for s in specs {
        let f = field::functionals(&Density::parse_builtin(s).unwrap(), 0.5, 4.0).unwrap();
        let (_, up) = e_upper_min(&f, &c);
        assert!(e_lower(&f, &c) <= up, "{s}");
        let (_, tu, _, _) = quad::grid_then_golden(
            |e| kinetic::t_upper(&f, e, 3, 1.0, UpperVariant::General, &c.kinetic).unwrap(),
            1e-4,
            1.0,
            200,
        );
        let band = kinetic::kinetic_band(&f, 1.0, 3, c.c_lt(), &c.kinetic).unwrap();
        assert!(band.lower <= tu, "{s}");
    }
}

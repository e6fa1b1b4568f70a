use ldacert::field::{Density, GridSpec, ScalarField};
use ldacert::geom::*;
use ldacert::quad;
use ldacert::tiling::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn volumes_and_isometries() {
    let t = unit_cube_tetrahedra();
    assert_eq!(t.len(), 24);
    let mut total = 0.0;
    let r = reference_tetra();
    for tile in t {
        assert!((tile.volume() - 1.0 / 24.0).abs() <= 1e-14);
        total += tile.volume();
        let (e, d) = tile.mu.orthonormality();
        assert!(e <= 1e-12 && (d - 1.0).abs() <= 1e-12);
        for (v, w) in r.vertices.iter().zip(&tile.vertices) {
            assert!(norm(sub(tile.mu.apply(*v), *w)) < 1e-14);
        }
    }
    assert!((total - 1.0).abs() <= 1e-12);
}

#[test]
fn exact_cover() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tiles = unit_cube_tetrahedra();
    let n = 100_000;
    let mut once = 0;
    for _ in 0..n {
        let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        if tiles.iter().filter(|t| t.contains(x)).count() == 1 {
            once += 1;
        }
    }
    assert!(once as f64 >= 0.999 * n as f64);
}

#[test]
fn indicator_values() {
    let cfg = TilingConfig::new(1.0, 0.05).unwrap();
    let eps = cfg.epsilon();
    for j in [0, 7, 23] {
        let c = cfg.tile(j).centroid();
        assert!((chi(j, &cfg, c) - (1.0 - eps).powi(-3)).abs() < 1e-12);
        assert!((xi(j, &cfg, c) - 1.0).abs() < 1e-12);
    }
    let far = [0.9, 0.9, 0.9];
    assert_eq!(xi(0, &cfg, far), 0.0);
    assert_eq!(chi(0, &cfg, far), 0.0);
    assert!(TilingConfig::new(1.0, 0.5).is_err());
}

#[test]
fn smeared_indicator_matches_brute_force() {
    // ξ = 1_T ∗ η_δ against a direct ball quadrature.
    let cfg = TilingConfig::new(1.0, 0.3).unwrap();
    let t = cfg.tile(3);
    let rad = cfg.radius();
    let c = t.centroid();
    let v = t.vertices[1];
    let x = add(scale(0.97, v), scale(0.03, c));
    let (r, wr) = quad::gauss_legendre(40);
    let (u, wu) = quad::gauss_legendre(40);
    let mut s = 0.0;
    for (ri, wri) in r.iter().zip(&wr) {
        let rr = 0.5 * rad * (ri + 1.0);
        for (ui, wui) in u.iter().zip(&wu) {
            let mu = *ui;
            for k in 0..80 {
                let ph = 2.0 * PI * (k as f64 + 0.5) / 80.0;
                let st = (1.0 - mu * mu).sqrt();
                let y = [x[0] + rr * st * ph.cos(), x[1] + rr * st * ph.sin(), x[2] + rr * mu];
                if t.contains(y) {
                    s += 0.5 * rad * wri * wui * (2.0 * PI / 80.0) * rr * rr * eta1(rr / rad) / rad.powi(3);
                }
            }
        }
    }
    assert!((xi(3, &cfg, x) - s).abs() < 2e-3, "{} vs {s}", xi(3, &cfg, x));
}

#[test]
fn partition_of_unity_after_averaging() {
    let samples = [[0.0, 0.0, 0.0], [0.31, -0.12, 0.44], [0.5, 0.5, 0.5]];
    for &(ell, delta) in &[(1.0, 0.4), (1.0, 0.25), (2.0, 0.2)] {
        let cfg = TilingConfig::new(ell, delta).unwrap();
        let n = lattice_exact_n_tau(&cfg, 16).unwrap();
        assert!(partition_residual(&cfg, n, &samples).unwrap() <= 1e-4, "ell={ell} delta={delta} n={n}");
    }
    // Off the exact lattice sizes the rule still converges.
    let cfg = TilingConfig::new(1.0, 0.4).unwrap();
    let (a, b) = (partition_residual(&cfg, 16, &samples[..1]).unwrap(), partition_residual(&cfg, 32, &samples[..1]).unwrap());
    assert!(b < 0.2 * a);
    let cfg = TilingConfig::new(1.0, 0.2).unwrap();
    let c = cfg.tile(0).centroid();
    assert!((chi_sum(&cfg, c) - 1.0).abs() > 0.1);
}

#[test]
fn fourier_at_zero_and_lattice() {
    let t = unit_cube_tetrahedra();
    let z = tetra_fourier(&t[0], [0.0; 3]).unwrap();
    assert!((z.re - 0.0026455).abs() < 1e-7 && z.im == 0.0);
    for m in [[1, 0, 0], [0, 2, -1], [1, 1, 1], [3, -2, 1]] {
        let k = m.map(|x: i64| 2.0 * PI * x as f64);
        let s: Complex64 = t.iter().map(|ti| tetra_fourier(ti, k).unwrap()).sum();
        assert!(s.norm() <= 1e-10, "m={m:?}");
    }
    let flat = Tetra::new([[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
    assert!(matches!(tetra_fourier(&flat, [1.0; 3]), Err(ldacert::Error::Geometry(_))));
}

/// 48³ collapsed Gauss rule on the simplex.
fn fourier_quadrature(t: &Tetra, k: V3) -> Complex64 {
    let (x, w) = quad::gauss_legendre(48);
    let v = t.vertices;
    let (e1, e2, e3) = (sub(v[1], v[0]), sub(v[2], v[0]), sub(v[3], v[0]));
    let mut s = Complex64::new(0.0, 0.0);
    for (a, wa) in x.iter().zip(&w) {
        let u1 = 0.5 * (a + 1.0);
        for (b, wb) in x.iter().zip(&w) {
            let t2 = 0.5 * (b + 1.0);
            for (c, wc) in x.iter().zip(&w) {
                let t3 = 0.5 * (c + 1.0);
                let u2 = (1.0 - u1) * t2;
                let u3 = (1.0 - u1) * (1.0 - t2) * t3;
                let jac = (1.0 - u1).powi(2) * (1.0 - t2);
                let p = add(v[0], add(scale(u1, e1), add(scale(u2, e2), scale(u3, e3))));
                s += wa * wb * wc * 0.125 * jac * Complex64::from_polar(1.0, -dot(k, p));
            }
        }
    }
    s * 6.0 * t.volume() * (2.0 * PI).powf(-1.5)
}

#[test]
fn fourier_against_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let k = [rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0)];
        let t = unit_cube_tetrahedra()[rng.gen_range(0..24)];
        let a = tetra_fourier(&t, k).unwrap();
        let b = fourier_quadrature(&t, k);
        assert!((a - b).norm() <= 1e-8, "k={k:?}");
    }
}

#[test]
fn divided_difference_confluent() {
    // Equal nodes give e^z/3!.
    let z = Complex64::new(0.3, -1.2);
    let d = exp_divided_difference(&[z; 4]);
    assert!((d - z.exp() / 6.0).norm() < 1e-14);
    let near = [z, z + 1e-9, z - 2e-9, z + Complex64::new(0.0, 1e-9)];
    assert!((exp_divided_difference(&near) - z.exp() / 6.0).norm() < 1e-9);
}

#[test]
fn reduced_sum_behaviour() {
    let k = [2.0 * PI, 0.0, 0.0];
    assert!(reduced_sum(0.0, k).unwrap().norm() <= 1e-10);
    // |S|/ε stays bounded as ε halves.
    let s: Vec<f64> =
        [0.2, 0.1, 0.05, 0.025].iter().map(|&e| reduced_sum(e, [2.0 * PI, 4.0 * PI, 0.0]).unwrap().norm() / e).collect();
    for w in s.windows(2) {
        let r = w[0] / w[1];
        assert!((0.5..=2.0).contains(&r), "{s:?}");
    }
    assert!(reduced_sum(0.1, [0.0; 3]).is_err());
    for &e in &[0.0, 0.1, 0.3] {
        assert!(f_eps_mean(e).abs() <= 1e-10);
    }
}

#[test]
fn octahedral_symmetry_of_reduced_sum() {
    // The orbit reduction in the direct error relies on this.
    let m = [1i64, 2, 3];
    let base = reduced_sum(0.1, m.map(|x| 2.0 * PI * x as f64)).unwrap().norm_sqr();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        for s in 0..8 {
            let k: V3 = std::array::from_fn(|i| {
                let sg = if (s >> i) & 1 == 1 { -1.0 } else { 1.0 };
                sg * 2.0 * PI * m[p[i]] as f64
            });
            let v = reduced_sum(0.1, k).unwrap().norm_sqr();
            assert!((v - base).abs() <= 1e-12 * base.max(1e-300), "{p:?} {s}");
        }
    }
}

#[test]
fn lemma_ratio_stable() {
    let worst = |e: f64| {
        let mut w: f64 = 0.0;
        for a in -2i64..=2 {
            for b in -2i64..=2 {
                for c in -2i64..=2 {
                    if (a, b, c) != (0, 0, 0) {
                        let k = [a, b, c].map(|x| 2.0 * PI * x as f64);
                        w = w.max(fourier_lemma_ratio(e, k).unwrap());
                    }
                }
            }
        }
        w
    };
    let v: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| worst(e)).collect();
    for w in v.windows(2) {
        let r = w[0] / w[1];
        assert!(r.is_finite() && (0.5..=2.0).contains(&r), "{v:?}");
    }
}

#[test]
fn direct_error_scaling() {
    let rho = Density::gaussian(1.0, 1.0);
    let l2 = (4.0 * PI).powf(-1.5);
    let mut prev = f64::INFINITY;
    let mut ks = Vec::new();
    for &d in &[0.4, 0.2, 0.1] {
        let cfg = TilingConfig::new(2.0, d).unwrap();
        let e = tiling_direct_error(&rho, &cfg, 8).unwrap();
        assert!(e.value < prev && e.value > 0.0);
        assert!(e.tail_estimate < 0.05 * e.value);
        prev = e.value;
        ks.push(e.value / (d * d * l2));
    }
    let (lo, hi) = ks.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
    assert!(hi / lo <= 2.0, "{ks:?}");
    let cfg = TilingConfig::new(2.0, 0.2).unwrap();
    assert_eq!(tiling_direct_error(&Density::gaussian(1.0, 0.0), &cfg, 4).unwrap().value, 0.0);
    assert!(tiling_direct_error(&rho, &cfg, 2).is_err());
}

#[test]
fn direct_error_general_path_agrees() {
    let rho = Density::gaussian(1.0, 1.0);
    let g = GridSpec::centered_cube(40, 8.0).unwrap();
    let gridded = Density::Gridded(rho.sample(Some(&g)).unwrap());
    let cfg = TilingConfig::new(2.0, 0.4).unwrap();
    let a = tiling_direct_error(&rho, &cfg, 4).unwrap().value;
    let b = tiling_direct_error(&gridded, &cfg, 4).unwrap().value;
    assert!((a / b - 1.0).abs() < 0.01, "{a} vs {b}");
}

#[test]
fn transition_layer_scaling() {
    // ∫|∇√ξ|² ≈ K ℓ²/δ.
    let k_of = |ell: f64, delta: f64| {
        let cfg = TilingConfig::new(ell, delta).unwrap();
        let h = delta / 12.0;
        let spec = ldacert::field::smeared_tetra_grid(ell, delta, h);
        let f = ScalarField::sample(spec.clone(), |x| xi(0, &cfg, x).sqrt()).unwrap();
        let n = spec.dims;
        let mut s = 0.0;
        for i in 0..n[0] - 1 {
            for j in 0..n[1] - 1 {
                for k in 0..n[2] - 1 {
                    let v = |a, b, c| f.values[spec.index(i + a, j + b, k + c)];
                    let gx = v(1, 0, 0) - v(0, 0, 0);
                    let gy = v(0, 1, 0) - v(0, 0, 0);
                    let gz = v(0, 0, 1) - v(0, 0, 0);
                    s += (gx * gx + gy * gy + gz * gz) / (h * h);
                }
            }
        }
        s * spec.cell_volume() * delta / (ell * ell)
    };
    let (a, b) = (k_of(1.0, 0.4), k_of(1.0, 0.2));
    assert!(a / b < 2.0 && b / a < 2.0, "{a} {b}");
    assert!((k_of(2.0, 0.8) / a - 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn fourier_relabel_and_isometry(
        kx in -20.0f64..20.0, ky in -20.0f64..20.0, kz in -20.0f64..20.0,
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
        rot in 0usize..24, tile in 0usize..24, perm in 0usize..24,
    ) {
        let t = unit_cube_tetrahedra()[tile];
        let k = [kx, ky, kz];
        let f = tetra_fourier(&t, k).unwrap();
        let mut idx = [0usize, 1, 2, 3];
        let mut p = perm;
        for i in (1..4).rev() {
            idx.swap(i, p % (i + 1));
            p /= i + 1;
        }
        let relabeled = Tetra::new(idx.map(|i| t.vertices[i]));
        prop_assert!((tetra_fourier(&relabeled, k).unwrap() - f).norm() <= 1e-12);
        let r = cube_rotations()[rot];
        let a = [ax, ay, az];
        let moved = Tetra::new(t.vertices.map(|v| add(mat_vec(&r, v), a)));
        let rk = mat_vec(&transpose(&r), k);
        let expect = Complex64::from_polar(1.0, -dot(k, a)) * tetra_fourier(&t, rk).unwrap();
        prop_assert!((tetra_fourier(&moved, k).unwrap() - expect).norm() <= 1e-12);
    }
}

//! The 24-tetrahedra tiling of the unit cube, smeared tile indicators,
//! simplex Fourier transforms and the direct-term localization error.
//!
//! Tiles are indexed `0..24`. Tile `j` at scale ℓ is `ℓ μ_j(Δ)` where Δ is
//! tile 0 translated so that its centroid sits at the origin and
//! `μ_j(x) = R_j x + c_j` with `c_j` the centroid of unit tile `j`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::geom::*;
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    pub rotation: M3,
    pub translation: V3,
}

impl Isometry {
    pub fn apply(&self, x: V3) -> V3 {
        add(mat_vec(&self.rotation, x), self.translation)
    }

    /// `‖RᵀR − I‖_max` and `det R`.
    pub fn orthonormality(&self) -> (f64, f64) {
        let p = mat_mul(&transpose(&self.rotation), &self.rotation);
        let mut e: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                e = e.max((p[i][j] - IDENTITY[i][j]).abs());
            }
        }
        (e, det(&self.rotation))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tetra {
    pub vertices: [V3; 4],
    /// Maps the reference tile (scaled like this one) onto it.
    pub mu: Isometry,
}

impl Tetra {
    pub fn new(vertices: [V3; 4]) -> Self {
        let c = centroid(&vertices);
        Tetra { vertices, mu: Isometry { rotation: IDENTITY, translation: c } }
    }

    pub fn signed_volume(&self) -> f64 {
        let v = &self.vertices;
        det(&[sub(v[1], v[0]), sub(v[2], v[0]), sub(v[3], v[0])]) / 6.0
    }

    pub fn volume(&self) -> f64 {
        self.signed_volume().abs()
    }

    pub fn centroid(&self) -> V3 {
        centroid(&self.vertices)
    }

    pub fn scaled(&self, s: f64) -> Tetra {
        Tetra {
            vertices: self.vertices.map(|v| scale(s, v)),
            mu: Isometry { rotation: self.mu.rotation, translation: scale(s, self.mu.translation) },
        }
    }

    /// Homothety by `factor` about the centroid.
    pub fn shrunk(&self, factor: f64) -> Tetra {
        let c = self.centroid();
        Tetra { vertices: self.vertices.map(|v| add(c, scale(factor, sub(v, c)))), mu: self.mu }
    }

    pub fn translated(&self, a: V3) -> Tetra {
        Tetra {
            vertices: self.vertices.map(|v| add(v, a)),
            mu: Isometry { rotation: self.mu.rotation, translation: add(self.mu.translation, a) },
        }
    }

    pub fn rotated(&self, r: &M3) -> Tetra {
        Tetra {
            vertices: self.vertices.map(|v| mat_vec(r, v)),
            mu: Isometry { rotation: mat_mul(r, &self.mu.rotation), translation: mat_vec(r, self.mu.translation) },
        }
    }

    pub fn bounding_box(&self) -> (V3, V3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    /// Barycentric coordinates of `x`.
    pub fn barycentric(&self, x: V3) -> [f64; 4] {
        let v = &self.vertices;
        let m = [sub(v[1], v[0]), sub(v[2], v[0]), sub(v[3], v[0])];
        let d = det(&m);
        let y = sub(x, v[0]);
        let l1 = det(&[y, m[1], m[2]]) / d;
        let l2 = det(&[m[0], y, m[2]]) / d;
        let l3 = det(&[m[0], m[1], y]) / d;
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    /// Closed-tetrahedron membership.
    pub fn contains(&self, x: V3) -> bool {
        self.barycentric(x).iter().all(|&l| l >= 0.0)
    }

    /// Strict interior membership with margin `tol` in barycentric units.
    pub fn contains_strict(&self, x: V3, tol: f64) -> bool {
        self.barycentric(x).iter().all(|&l| l > tol)
    }

    /// Radius of the inscribed sphere.
    pub fn inradius(&self) -> f64 {
        let v = &self.vertices;
        let area = |a: V3, b: V3, c: V3| 0.5 * norm(cross(sub(b, a), sub(c, a)));
        let s = area(v[1], v[2], v[3]) + area(v[0], v[2], v[3]) + area(v[0], v[1], v[3]) + area(v[0], v[1], v[2]);
        3.0 * self.volume() / s
    }
}

fn centroid(v: &[V3; 4]) -> V3 {
    scale(0.25, add(add(v[0], v[1]), add(v[2], v[3])))
}

/// The 24 proper rotations of the cube.
pub fn cube_rotations() -> Vec<M3> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for s in 0..8 {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                m[i][p[i]] = if (s >> i) & 1 == 1 { -1.0 } else { 1.0 };
            }
            if det(&m) > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

fn same_vertex_set(a: &[V3; 4], b: &[V3; 4]) -> bool {
    a.iter().all(|x| b.iter().any(|y| norm(sub(*x, *y)) < 1e-12))
}

fn build_tiles() -> Vec<Tetra> {
    let mut raw = Vec::with_capacity(24);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut fc = [0.0; 3];
            fc[axis] = 0.5 * sign;
            let corner = |sb: f64, sc: f64| {
                let mut v = fc;
                v[b] = 0.5 * sb;
                v[c] = 0.5 * sc;
                v
            };
            let edges = [
                (corner(1.0, -1.0), corner(1.0, 1.0)),
                (corner(-1.0, -1.0), corner(-1.0, 1.0)),
                (corner(-1.0, 1.0), corner(1.0, 1.0)),
                (corner(-1.0, -1.0), corner(1.0, -1.0)),
            ];
            for (p, q) in edges {
                raw.push([[0.0; 3], fc, p, q]);
            }
        }
    }
    let reference = raw[0];
    let c0 = centroid(&reference);
    let rots = cube_rotations();
    raw.into_iter()
        .map(|v| {
            let rot = *rots
                .iter()
                .find(|r| same_vertex_set(&reference.map(|x| mat_vec(r, x)), &v))
                .expect("every tile is a rotated copy of tile 0");
            // Vertex order follows the rotated reference so μ_j is explicit.
            let vertices = reference.map(|x| mat_vec(&rot, x));
            let c = centroid(&vertices);
            debug_assert!(norm(sub(mat_vec(&rot, c0), c)) < 1e-14);
            Tetra { vertices, mu: Isometry { rotation: rot, translation: c } }
        })
        .collect()
}

/// The decomposition of `(-1/2, 1/2)³` into 24 congruent tetrahedra.
pub fn unit_cube_tetrahedra() -> &'static [Tetra] {
    static T: OnceLock<Vec<Tetra>> = OnceLock::new();
    T.get_or_init(build_tiles)
}

/// Tile 0 with its centroid moved to the origin.
pub fn reference_tetra() -> Tetra {
    let t = unit_cube_tetrahedra()[0];
    let c = t.centroid();
    Tetra::new(t.vertices.map(|v| sub(v, c)))
}

// ---------------------------------------------------------------------------
// Mollifier η₁(x) = c₁ exp(-1/(1-|x|²)) on the unit ball.

fn bump(s: f64) -> f64 {
    if s < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

struct Kernel {
    c1: f64,
    /// Node spacing of the tables on [0, 1].
    step: f64,
    /// `H1(τ) = ∫₀^τ e(σ)σ²`, `H2(τ) = ∫_τ^1 e(σ)σ`.
    h1: Vec<f64>,
    h2: Vec<f64>,
}

const TABLE_N: usize = 2048;

fn kernel() -> &'static Kernel {
    static K: OnceLock<Kernel> = OnceLock::new();
    K.get_or_init(|| {
        let step = 1.0 / TABLE_N as f64;
        let mut inc1 = vec![0.0; TABLE_N];
        let mut inc2 = vec![0.0; TABLE_N];
        for i in 0..TABLE_N {
            let (a, b) = (i as f64 * step, (i + 1) as f64 * step);
            inc1[i] = quad::gl_integrate(|s| bump(s) * s * s, a, b, 12);
            inc2[i] = quad::gl_integrate(|s| bump(s) * s, a, b, 12);
        }
        let mut h1 = vec![0.0; TABLE_N + 1];
        for i in 0..TABLE_N {
            h1[i + 1] = h1[i] + inc1[i];
        }
        let mut h2 = vec![0.0; TABLE_N + 1];
        for i in (0..TABLE_N).rev() {
            h2[i] = h2[i + 1] + inc2[i];
        }
        let c1 = 1.0 / (4.0 * PI * h1[TABLE_N]);
        Kernel { c1, step, h1, h2 }
    })
}

/// Normalisation constant of η₁ (so that `∫η₁ = 1`).
pub fn mollifier_norm() -> f64 {
    kernel().c1
}

/// `η₁(x)` at `|x| = s`.
pub fn eta1(s: f64) -> f64 {
    kernel().c1 * bump(s)
}

/// `η̂₁(κ) = (2π)^{-3/2} ∫ η₁(x) e^{-ik·x} dx` at `|k| = κ`.
pub fn eta1_hat(kappa: f64) -> f64 {
    let c1 = kernel().c1;
    let v = quad::adaptive(
        |s| {
            let x = kappa * s;
            let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
            bump(s) * s * s * sinc
        },
        0.0,
        1.0,
        1e-13,
        1e-300,
    )
    .value;
    (2.0 * PI).powf(-1.5) * 4.0 * PI * c1 * v
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

impl Kernel {
    fn interp(&self, table: &[f64], deriv: impl Fn(f64) -> f64, tau: f64) -> f64 {
        let pos = tau / self.step;
        let i = (pos.floor() as usize).min(TABLE_N - 1);
        let t = pos - i as f64;
        let (a, b) = (i as f64 * self.step, (i + 1) as f64 * self.step);
        hermite(table[i], table[i + 1], deriv(a), deriv(b), self.step, t)
    }

    /// Dimensionless `Q̂(τ) = ∫_τ^∞ Ĝ(σ)/σ² dσ` with `Ĝ(σ) = c₁∫₀^{min(σ,1)} e s²`.
    fn q_hat(&self, tau: f64) -> f64 {
        if tau >= 1.0 {
            return self.c1 * self.h1[TABLE_N] / tau;
        }
        let h1 = self.interp(&self.h1, |s| bump(s) * s * s, tau);
        let h2 = self.interp(&self.h2, |s| -bump(s) * s, tau);
        let g_over = if tau > 0.0 { h1 / tau } else { 0.0 };
        self.c1 * (g_over + h2)
    }
}

/// `G(∞) = 1/(4π)` for a unit-mass radial kernel.
const G_INF: f64 = 1.0 / (4.0 * PI);

/// Face/edge data of a tetrahedron for the smeared indicator.
#[derive(Clone, Debug)]
struct Solid {
    faces: [Face; 4],
    bbox: (V3, V3),
}

#[derive(Clone, Copy, Debug)]
struct Face {
    normal: V3,
    anchor: V3,
    edges: [Edge; 3],
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    a: V3,
    b: V3,
    u: V3,
    inward: V3,
}

impl Solid {
    fn new(t: &Tetra) -> Solid {
        let v = t.vertices;
        let c = t.centroid();
        let make_face = |i: usize| {
            let idx: Vec<usize> = (0..4).filter(|&k| k != i).collect();
            let (p, q, r) = (v[idx[0]], v[idx[1]], v[idx[2]]);
            let mut n = unit(cross(sub(q, p), sub(r, p)));
            if dot(n, sub(p, c)) < 0.0 {
                n = scale(-1.0, n);
            }
            let fc = scale(1.0 / 3.0, add(add(p, q), r));
            let edge = |a: V3, b: V3| {
                let u = unit(sub(b, a));
                let w = sub(fc, a);
                let inward = unit(sub(w, scale(dot(w, u), u)));
                Edge { a, b, u, inward }
            };
            Face { normal: n, anchor: p, edges: [edge(p, q), edge(q, r), edge(r, p)] }
        };
        Solid { faces: [make_face(0), make_face(1), make_face(2), make_face(3)], bbox: t.bounding_box() }
    }

    /// `(∫_T η_r(x - y) dy)` for the radial mollifier of radius `r`.
    fn smear(&self, x: V3, r: f64) -> f64 {
        let (lo, hi) = self.bbox;
        if (0..3).any(|a| x[a] < lo[a] - r || x[a] > hi[a] + r) {
            return 0.0;
        }
        let mut min_h = f64::INFINITY;
        for f in &self.faces {
            let h = dot(sub(f.anchor, x), f.normal);
            if h <= -r {
                return 0.0;
            }
            min_h = min_h.min(h);
        }
        if min_h >= r {
            return 1.0;
        }
        self.smear_exact(x, r).clamp(0.0, 1.0)
    }

    /// Divergence-theorem evaluation; valid for every x.
    fn smear_exact(&self, x: V3, r: f64) -> f64 {
        let k = kernel();
        let q = |t: f64| k.q_hat(t / r) / r;
        let mut total = 0.0;
        for f in &self.faces {
            let h = dot(sub(f.anchor, x), f.normal);
            if h == 0.0 {
                continue;
            }
            let hh = h.abs();
            let qh = q(hh);
            let foot = add(x, scale(h, f.normal));
            let mut face_sum = 0.0;
            for e in &f.edges {
                let d = dot(sub(foot, e.a), e.inward);
                if d == 0.0 {
                    continue;
                }
                let sa = dot(sub(e.a, foot), e.u);
                let sb = dot(sub(e.b, foot), e.u);
                face_sum += edge_term(qh, hh, d, sa, sb, r, &q);
            }
            total += h * face_sum;
        }
        total
    }
}

/// `∫_{sa}^{sb} d [Q(H) − Q(√(H²+d²+s²))]/(d²+s²) ds`.
fn edge_term(qh: f64, hh: f64, d: f64, sa: f64, sb: f64, r: f64, q: &impl Fn(f64) -> f64) -> f64 {
    let c2 = hh * hh + d * d;
    let analytic = |lo: f64, hi: f64| {
        if hi <= lo {
            return 0.0;
        }
        let w = |s: f64| (s * hh / (d * (s * s + c2).sqrt())).atan();
        qh * ((hi / d).atan() - (lo / d).atan()) - G_INF / hh * (w(hi) - w(lo))
    };
    if c2 >= r * r {
        return analytic(sa, sb);
    }
    let ss = (r * r - c2).sqrt();
    let (lo, hi) = (sa.max(-ss), sb.min(ss));
    let mut v = analytic(sa, sb.min(-ss)) + analytic(sa.max(ss), sb);
    if hi > lo {
        v += numeric_piece(|s| d * (qh - q((c2 + s * s).sqrt())) / (d * d + s * s), lo, hi);
    }
    v
}

fn numeric_piece(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = GL.get_or_init(|| quad::gauss_legendre(24));
    // Two panels keep the kink of Q at the mollifier radius well resolved.
    let mut s = 0.0;
    for (pa, pb) in [(a, 0.5 * (a + b)), (0.5 * (a + b), b)] {
        let (c, h) = (0.5 * (pa + pb), 0.5 * (pb - pa));
        s += h * x.iter().zip(w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>();
    }
    s
}

/// Scale ℓ, smearing δ and the derived tile geometry.
#[derive(Clone, Debug)]
pub struct TilingConfig {
    pub ell: f64,
    pub delta: f64,
    /// `∫η₁` normalisation constant.
    pub mollifier_norm: f64,
    tiles: Vec<Solid>,
    shrunk: Vec<Solid>,
}

impl TilingConfig {
    pub fn new(ell: f64, delta: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::Config(format!("ell must be positive, got {ell}")));
        }
        if !(delta > 0.0 && delta < 0.5 * ell) {
            return Err(Error::Config(format!("delta must lie in (0, ell/2), got delta={delta}, ell={ell}")));
        }
        let eps = delta / ell;
        let unit = unit_cube_tetrahedra();
        Ok(TilingConfig {
            ell,
            delta,
            mollifier_norm: mollifier_norm(),
            tiles: unit.iter().map(|t| Solid::new(&t.scaled(ell))).collect(),
            shrunk: unit.iter().map(|t| Solid::new(&t.shrunk(1.0 - eps).scaled(ell))).collect(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.delta / self.ell
    }

    /// Support radius of η_δ.
    pub fn radius(&self) -> f64 {
        self.delta / 10.0
    }

    pub fn tile(&self, j: usize) -> Tetra {
        unit_cube_tetrahedra()[j].scaled(self.ell)
    }
}

/// `ξ_{ℓ,δ,j}(x) = (1_{ℓμ_jΔ} ∗ η_δ)(x)`.
pub fn xi(j: usize, cfg: &TilingConfig, x: V3) -> f64 {
    cfg.tiles[j].smear(x, cfg.radius())
}

/// `χ_{ℓ,δ,j}(x) = (1-δ/ℓ)^{-3} (1_{ℓμ_j((1-δ/ℓ)Δ)} ∗ η_δ)(x)`.
pub fn chi(j: usize, cfg: &TilingConfig, x: V3) -> f64 {
    (1.0 - cfg.epsilon()).powi(-3) * cfg.shrunk[j].smear(x, cfg.radius())
}

/// Σ_j χ_j or Σ_j ξ_j over the 24 tiles of `C_ℓ`.
pub fn chi_sum(cfg: &TilingConfig, x: V3) -> f64 {
    (0..24).map(|j| chi(j, cfg, x)).sum()
}

pub fn xi_sum(cfg: &TilingConfig, x: V3) -> f64 {
    (0..24).map(|j| xi(j, cfg, x)).sum()
}

fn wrap(x: f64, ell: f64) -> f64 {
    x - ell * (x / ell).round()
}

/// `max_x |(1/ℓ³)∫_{C_ℓ} Σ_{z,j} χ_j(x − ℓz − τ) dτ − 1|` with an
/// `n_tau³` periodic midpoint rule in τ.
pub fn partition_residual(cfg: &TilingConfig, n_tau: usize, samples: &[V3]) -> Result<f64> {
    if n_tau < 8 {
        return param(format!("n_tau must be >= 8, got {n_tau}"));
    }
    let ell = cfg.ell;
    let h = ell / n_tau as f64;
    let n3 = n_tau * n_tau * n_tau;
    let mut worst: f64 = 0.0;
    for &x in samples {
        let s = crate::summation::sum_map(n3, |i| {
            let c = [i % n_tau, (i / n_tau) % n_tau, i / (n_tau * n_tau)];
            let y: V3 = std::array::from_fn(|a| wrap(x[a] + 0.5 * ell - (c[a] as f64 + 0.5) * h, ell));
            chi_sum(cfg, y)
        });
        worst = worst.max((s / n3 as f64 - 1.0).abs());
    }
    Ok(worst)
}

/// Smallest `n ≥ min_n` (up to 4096) with `εn ∈ 8ℤ`, `ε = δ/ℓ`.
///
/// Tile centroids lie on `ℤ³/8`, so for such `n` every shrunk tile is a
/// τ-lattice translate of a piece of the `(1-ε)`-scaled cube tiling and the
/// midpoint rule of [`partition_residual`] is exact up to rounding.
/// For other `n` the rule converges slowly (aliasing of the bump transform).
pub fn lattice_exact_n_tau(cfg: &TilingConfig, min_n: usize) -> Option<usize> {
    let eps = cfg.epsilon();
    (min_n.max(8)..=4096).find(|&n| {
        let v = eps * n as f64 / 8.0;
        v >= 1.0 && (v - v.round()).abs() < 1e-9
    })
}

// ---------------------------------------------------------------------------
// Simplex Fourier transforms.

/// Divided difference of `exp` over the given nodes.
pub fn exp_divided_difference(z: &[Complex64]) -> Complex64 {
    let n = z.len();
    debug_assert!(n >= 1);
    if n == 1 {
        return z[0].exp();
    }
    let mean = z.iter().sum::<Complex64>() / n as f64;
    let spread = z.iter().map(|w| (w - mean).norm()).fold(0.0, f64::max);
    if spread < 0.5 {
        return taylor_dd(z, mean);
    }
    let (mut ia, mut ib, mut best) = (0, 1, -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = (z[i] - z[j]).norm();
            if d > best {
                best = d;
                ia = i;
                ib = j;
            }
        }
    }
    let without = |skip: usize| z.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, w)| *w).collect::<Vec<_>>();
    (exp_divided_difference(&without(ia)) - exp_divided_difference(&without(ib))) / (z[ib] - z[ia])
}

/// `e^m Σ_k h_k(z - m)/(n-1+k)!` with complete homogeneous polynomials `h_k`.
fn taylor_dd(z: &[Complex64], m: Complex64) -> Complex64 {
    const K: usize = 40;
    let order = z.len() - 1;
    let mut h = [Complex64::new(0.0, 0.0); K];
    h[0] = Complex64::new(1.0, 0.0);
    for w in z.iter().map(|w| w - m) {
        for k in 1..K {
            h[k] = h[k] + w * h[k - 1];
        }
    }
    let mut fact = (1..=order).map(|i| i as f64).product::<f64>();
    let mut s = Complex64::new(0.0, 0.0);
    for (k, hk) in h.iter().enumerate() {
        if k > 0 {
            fact *= (order + k) as f64;
        }
        s += hk / fact;
    }
    m.exp() * s
}

/// `(2π)^{-3/2} ∫_T e^{-ik·x} dx`.
pub fn tetra_fourier(t: &Tetra, k: V3) -> Result<Complex64> {
    let vol = t.volume();
    if !(vol >= 1e-14) {
        return Err(Error::Geometry(format!("degenerate tetrahedron (volume {vol:e})")));
    }
    Ok(tetra_fourier_unchecked(t, k, vol))
}

fn tetra_fourier_unchecked(t: &Tetra, k: V3, vol: f64) -> Complex64 {
    let z = t.vertices.map(|v| Complex64::new(0.0, -dot(k, v)));
    (2.0 * PI).powf(-1.5) * 6.0 * vol * exp_divided_difference(&z)
}

fn check_reciprocal(k: V3) -> Result<()> {
    if norm(k) == 0.0 {
        return param("k must be nonzero");
    }
    Ok(())
}

/// `S(ε,k) = (1-ε)^{-3} Σ_j (2π)^{-3/2}∫_{μ_j((1-ε)Δ)} e^{-ik·x} dx`.
pub fn reduced_sum(eps: f64, k: V3) -> Result<Complex64> {
    check_reciprocal(k)?;
    if !(0.0..0.5).contains(&eps) {
        return param(format!("epsilon must lie in [0, 1/2), got {eps}"));
    }
    Ok(reduced_sum_unchecked(eps, k))
}

fn reduced_sum_unchecked(eps: f64, k: V3) -> Complex64 {
    let f = 1.0 - eps;
    let mut s = Complex64::new(0.0, 0.0);
    for t in unit_cube_tetrahedra() {
        let sh = t.shrunk(f);
        s += tetra_fourier_unchecked(&sh, k, sh.volume());
    }
    s / (f * f * f)
}

/// `g(κ) = ∫_{-1/2}^{1/2} e^{-iκx} dx` and `g'(κ)`.
fn box_transform(kappa: f64) -> (f64, f64) {
    if kappa.abs() < 1e-3 {
        let k2 = kappa * kappa;
        (1.0 - k2 / 24.0 + k2 * k2 / 1920.0, -kappa / 12.0 + kappa * k2 / 480.0)
    } else {
        let (s, c) = (0.5 * kappa).sin_cos();
        (2.0 * s / kappa, c / kappa - 2.0 * s / (kappa * kappa))
    }
}

/// `M(k) = ∫_{C₁} (x − Σ_j c_j 1_{Δ_j}(x)) e^{-ik·x} dx`.
pub fn moment_m(k: V3) -> Result<[Complex64; 3]> {
    check_reciprocal(k)?;
    let g: Vec<(f64, f64)> = k.iter().map(|&x| box_transform(x)).collect();
    let mut m = [Complex64::new(0.0, 0.0); 3];
    for a in 0..3 {
        let mut p = Complex64::new(0.0, g[a].1);
        for b in 0..3 {
            if b != a {
                p *= g[b].0;
            }
        }
        m[a] = p;
    }
    let norm3 = (2.0 * PI).powf(1.5);
    for t in unit_cube_tetrahedra() {
        let f = tetra_fourier_unchecked(t, k, t.volume()) * norm3;
        let c = t.centroid();
        for a in 0..3 {
            m[a] -= c[a] * f;
        }
    }
    Ok(m)
}

/// `|S(ε,k)|² / (ε⁴ + ε²|k|²|M(k)|²)`.
pub fn fourier_lemma_ratio(eps: f64, k: V3) -> Result<f64> {
    let s = reduced_sum(eps, k)?;
    let m = moment_m(k)?;
    let m2: f64 = m.iter().map(|c| c.norm_sqr()).sum();
    Ok(s.norm_sqr() / (eps.powi(4) + eps * eps * dot(k, k) * m2))
}

/// `(1-ε)^{-3} Σ_j |μ_j((1-ε)Δ)| − 1`, the mean of `f_ε` over `C₁`.
pub fn f_eps_mean(eps: f64) -> f64 {
    let f = 1.0 - eps;
    let v: f64 = crate::summation::sum_iter(unit_cube_tetrahedra().iter().map(|t| t.shrunk(f).volume()));
    v / (f * f * f) - 1.0
}

/// Result of [`tiling_direct_error`].
#[derive(Clone, Copy, Debug)]
pub struct DirectError {
    pub value: f64,
    /// Contribution of the outermost lattice shell `|m|_∞ = k_max`.
    pub tail_estimate: f64,
    pub k_max: usize,
}

/// `(2π)⁷ Σ_{m≠0, |m|_∞≤k_max} |η̂₁(2π|m|ε/10)|² |S(ε,2πm)|² I(2πm/ℓ)`,
/// `I(q) = ∫|ρ̂(p)|²/|p−q|² dp`.
///
/// The mollifier argument carries the `1/10` of the support radius of η_δ.
pub fn tiling_direct_error(rho: &crate::field::Density, cfg: &TilingConfig, k_max: usize) -> Result<DirectError> {
    if k_max < 3 {
        return param(format!("k_max must be >= 3, got {k_max}"));
    }
    rho.validate()?;
    let eps = cfg.epsilon();
    let ell = cfg.ell;
    let km = k_max as i64;
    let pref = (2.0 * PI).powi(7);
    let term = |m: [i64; 3], iq: f64| {
        let k = [2.0 * PI * m[0] as f64, 2.0 * PI * m[1] as f64, 2.0 * PI * m[2] as f64];
        let eh = eta1_hat(norm(k) * eps / 10.0);
        pref * eh * eh * reduced_sum_unchecked(eps, k).norm_sqr() * iq
    };
    let shell = |m: [i64; 3]| m.iter().map(|x| x.abs()).max().unwrap() == km;
    let pieces: Vec<(f64, f64)> = match rho {
        crate::field::Density::Analytic(crate::field::Family::Gaussian { sigma, mass }) => {
            if *mass == 0.0 {
                return Ok(DirectError { value: 0.0, tail_estimate: 0.0, k_max });
            }
            // Octahedral symmetry of the tiling and radial ρ: sum 0 ≤ m₁ ≤ m₂ ≤ m₃.
            let mut reps = Vec::new();
            for c in 1..=km {
                for b in 0..=c {
                    for a in 0..=b {
                        reps.push([a, b, c]);
                    }
                }
            }
            let cache = gaussian_coulomb_table(*sigma, *mass, ell, km);
            reps.par_iter()
                .map(|&m| {
                    let n2 = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as usize;
                    let v = term(m, cache[n2]) * orbit_size(m) as f64;
                    (v, if shell(m) { v } else { 0.0 })
                })
                .collect()
        }
        _ => {
            let spec = crate::coulomb::SpectralField::from_density(rho)?;
            let mut ms = Vec::new();
            for a in -km..=km {
                for b in -km..=km {
                    for c in -km..=km {
                        let m = [a, b, c];
                        // ±m give identical terms for real ρ; keep the lexicographically positive one.
                        if m > [0, 0, 0] {
                            ms.push(m);
                        }
                    }
                }
            }
            ms.par_iter()
                .map(|&m| {
                    let q = [2.0 * PI * m[0] as f64 / ell, 2.0 * PI * m[1] as f64 / ell, 2.0 * PI * m[2] as f64 / ell];
                    let v = 2.0 * term(m, spec.coulomb_shifted(q));
                    (v, if shell(m) { v } else { 0.0 })
                })
                .collect()
        }
    };
    let value = crate::summation::sum_iter(pieces.iter().map(|p| p.0));
    let tail = crate::summation::sum_iter(pieces.iter().map(|p| p.1));
    Ok(DirectError { value, tail_estimate: tail, k_max })
}

/// Number of signed permutations of `m` (orbit under the octahedral group).
fn orbit_size(m: [i64; 3]) -> usize {
    let nz = m.iter().filter(|&&x| x != 0).count();
    let perms = if m[0] == m[1] && m[1] == m[2] {
        1
    } else if m[0] == m[1] || m[1] == m[2] || m[0] == m[2] {
        3
    } else {
        6
    };
    perms << nz
}

/// `I(2π√n/ℓ)` for `n = 0..=3k_max²` for a Gaussian density.
fn gaussian_coulomb_table(sigma: f64, mass: f64, ell: f64, km: i64) -> Vec<f64> {
    let nmax = (3 * km * km) as usize;
    (0..=nmax)
        .into_par_iter()
        .map(|n| gaussian_coulomb_shifted(sigma, mass, 2.0 * PI * (n as f64).sqrt() / ell))
        .collect()
}

/// `∫|ρ̂(p)|²/|p−q|² dp` for a Gaussian, `|ρ̂|² = mass²(2π)^{-3}e^{-σ²p²}`.
pub fn gaussian_coulomb_shifted(sigma: f64, mass: f64, q: f64) -> f64 {
    let c = mass * mass * (2.0 * PI).powi(-3);
    if q == 0.0 {
        return c * 4.0 * PI * PI.sqrt() / (2.0 * sigma);
    }
    let pmax = (q + 12.0 / sigma).max(2.0 * q);
    let f = |p: f64| {
        if p == q {
            return 0.0;
        }
        (-sigma * sigma * p * p).exp() * p / q * ((p + q) / (p - q).abs()).ln()
    };
    let v = quad::adaptive_split(f, &[0.0, q, pmax], 1e-11, 1e-300).value;
    c * 2.0 * PI * v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_and_rotations() {
        let t = unit_cube_tetrahedra();
        assert_eq!(t.len(), 24);
        for tile in t {
            assert!((tile.volume() - 1.0 / 24.0).abs() < 1e-14);
            let (e, d) = tile.mu.orthonormality();
            assert!(e < 1e-12 && (d - 1.0).abs() < 1e-12);
            let r = reference_tetra();
            for (a, b) in r.vertices.iter().zip(&tile.vertices) {
                assert!(norm(sub(tile.mu.apply(*a), *b)) < 1e-14);
            }
        }
    }

    #[test]
    fn inradius_exceeds_mollifier_margin() {
        // Shrinking by ε leaves at least ε·inradius of clearance, more than ε/10.
        assert!(unit_cube_tetrahedra()[0].inradius() > 0.1);
    }

    #[test]
    fn kernel_normalised() {
        let k = kernel();
        assert!((4.0 * PI * k.c1 * k.h1[TABLE_N] - 1.0).abs() < 1e-14);
        assert!((eta1_hat(0.0) - (2.0 * PI).powf(-1.5)).abs() < 1e-14);
    }

    #[test]
    fn q_hat_continuous_at_one() {
        let k = kernel();
        let a = k.q_hat(1.0 - 1e-12);
        let b = k.q_hat(1.0);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn exact_smear_matches_shortcuts() {
        let cfg = TilingConfig::new(1.0, 0.4).unwrap();
        let s = &cfg.tiles[0];
        let c = cfg.tile(0).centroid();
        assert!((s.smear_exact(c, cfg.radius()) - 1.0).abs() < 1e-10);
        assert!(s.smear_exact([3.0, 0.0, 0.0], cfg.radius()).abs() < 1e-10);
    }

    #[test]
    fn dd_consistency() {
        let z = [0.1, 0.2, 0.35, 0.4].map(|x| Complex64::new(x, 0.0));
        let far = [1.0, 2.0, 3.5, 4.0].map(|x| Complex64::new(x, 0.0));
        // Closed form via Hermite–Genocchi for distinct real nodes.
        let direct = |z: &[Complex64]| {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..z.len() {
                let mut p = Complex64::new(1.0, 0.0);
                for j in 0..z.len() {
                    if i != j {
                        p *= z[i] - z[j];
                    }
                }
                s += z[i].exp() / p;
            }
            s
        };
        assert!((exp_divided_difference(&z) - direct(&z)).norm() < 1e-12);
        assert!((exp_divided_difference(&far) - direct(&far)).norm() < 1e-12);
    }

    #[test]
    fn config_gate() {
        assert!(matches!(TilingConfig::new(1.0, 0.5), Err(Error::Config(_))));
        assert!(TilingConfig::new(1.0, 0.49).is_ok());
    }

    #[test]
    fn orbit_sizes_cover_cube() {
        let km = 3i64;
        let mut total = 0;
        for c in 1..=km {
            for b in 0..=c {
                for a in 0..=b {
                    total += orbit_size([a, b, c]);
                }
            }
        }
        assert_eq!(total as i64, (2 * km + 1).pow(3) - 1);
    }
}

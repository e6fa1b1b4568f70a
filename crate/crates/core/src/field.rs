//! Densities on ℝ³ and the scalar functionals consumed by the bounds.
//!
//! A [`Density`] is either one of three analytic families or a sampled
//! [`ScalarField`]. [`functionals`] produces the [`FunctionalSet`] every
//! certificate needs; [`scale_functionals`] applies the exact change of
//! variables for `ρ_N(x) = ρ(N^{-1/3} x)`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

use statrs::function::gamma::ln_gamma;

use crate::error::{param, Error, Result};
use crate::quad;
use crate::summation::sum_map;
use crate::tiling::{self, Tetra, TilingConfig};

/// Relative accuracy target for adaptive quadrature of functionals.
pub const QUAD_REL_TOL: f64 = 1e-10;
/// Error estimates above this trigger an accuracy failure.
pub const QUAD_FAIL_TOL: f64 = 1e-3;

/// Largest grid sampled for an analytic density.
pub const GRID_POINT_BUDGET: usize = 20_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidField(format!("extents must be >= 2, got {dims:?}")));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidField(format!("spacings must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidField("origin must be finite".into()));
        }
        Ok(GridSpec { dims, spacing, origin })
    }

    /// Cube of `n` points per axis spanning `[-half_width, half_width]`.
    pub fn centered_cube(n: usize, half_width: f64) -> Result<Self> {
        let h = 2.0 * half_width / (n as f64 - 1.0);
        GridSpec::new([n; 3], [h; 3], [-half_width; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let c = self.unravel(idx);
        [
            self.origin[0] + c[0] as f64 * self.spacing[0],
            self.origin[1] + c[1] as f64 * self.spacing[1],
            self.origin[2] + c[2] as f64 * self.spacing[2],
        ]
    }

    /// Side lengths `n_i h_i` of the box the grid represents.
    pub fn extent(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at index {i}")));
        }
        Ok(ScalarField { spec, values })
    }

    /// Like [`ScalarField::new`] but also rejects negative values.
    pub fn density(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        let f = ScalarField::new(spec, values)?;
        if let Some(i) = f.values.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidField(format!("negative density at index {i}")));
        }
        Ok(f)
    }

    pub fn sample<F: Fn([f64; 3]) -> f64 + Sync>(spec: GridSpec, f: F) -> Result<Self> {
        use rayon::prelude::*;
        let values: Vec<f64> = (0..spec.len()).into_par_iter().map(|i| f(spec.point(i))).collect();
        ScalarField::new(spec, values)
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> ScalarField {
        use rayon::prelude::*;
        ScalarField { spec: self.spec.clone(), values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    /// Trilinear interpolation; zero outside the grid.
    pub fn interpolate(&self, x: [f64; 3]) -> f64 {
        let s = &self.spec;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let t = (x[a] - s.origin[a]) / s.spacing[a];
            if t < 0.0 || t > (s.dims[a] - 1) as f64 {
                return 0.0;
            }
            let i = (t.floor() as usize).min(s.dims[a] - 2);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        // Nested lerps reproduce constant data exactly.
        let at = |i: usize, j: usize, k: usize| self.values[s.index(base[0] + i, base[1] + j, base[2] + k)];
        let lerp = |a: f64, b: f64, t: f64| if a == b { a } else { a + t * (b - a) };
        let edge = |j, k| lerp(at(0, j, k), at(1, j, k), frac[0]);
        let face = |k| lerp(edge(0, k), edge(1, k), frac[1]);
        lerp(face(0), face(1), frac[2])
    }
}

/// `h_x h_y h_z Σ values` with compensated, order-fixed summation.
pub fn integrate(f: &ScalarField) -> Result<f64> {
    if let Some(i) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidField(format!("non-finite value at index {i}")));
    }
    Ok(f.spec.cell_volume() * crate::summation::sum(&f.values))
}

/// Analytic density families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `mass (2πσ²)^{-3/2} exp(-|x|²/2σ²)`.
    Gaussian { sigma: f64, mass: f64 },
    /// `c exp(-1/(1 - |x|²/R²))` inside the ball of radius R, scaled to `mass`.
    CompactBump { radius: f64, mass: f64 },
    /// `ρ₀ (1_{ℓΔ₁} ∗ η_δ)`, a constant density on one smeared tile.
    SmearedTetra { rho0: f64, ell: f64, delta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Density {
    Analytic(Family),
    Gridded(ScalarField),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian { sigma, mass } => write!(f, "gaussian,sigma={sigma},mass={mass}"),
            Family::CompactBump { radius, mass } => write!(f, "compact-bump,radius={radius},mass={mass}"),
            Family::SmearedTetra { rho0, ell, delta } => {
                write!(f, "smeared-tetra,rho0={rho0},ell={ell},delta={delta}")
            }
        }
    }
}

fn bump_profile(s: f64) -> f64 {
    if s < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// `∫₀¹ exp(-1/(1-s²)) s² ds`.
fn bump_radial_moment() -> f64 {
    use std::sync::OnceLock;
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| quad::adaptive(|s| bump_profile(s) * s * s, 0.0, 1.0, 1e-14, 0.0).value)
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        match *self {
            Family::Gaussian { sigma, mass } if ok(sigma) && mass >= 0.0 && mass.is_finite() => Ok(()),
            Family::CompactBump { radius, mass } if ok(radius) && mass >= 0.0 && mass.is_finite() => Ok(()),
            Family::SmearedTetra { rho0, ell, delta } if rho0 >= 0.0 && ok(ell) && ok(delta) => {
                TilingConfig::new(ell, delta).map(|_| ())
            }
            _ => param(format!("invalid parameters for {self}")),
        }
    }

    fn bump_scale(radius: f64, mass: f64) -> f64 {
        mass / (4.0 * PI * radius.powi(3) * bump_radial_moment())
    }

    /// Radial profile for the radially symmetric families.
    pub fn radial(&self, r: f64) -> Option<f64> {
        match *self {
            Family::Gaussian { sigma, mass } => {
                Some(mass * (2.0 * PI * sigma * sigma).powf(-1.5) * (-r * r / (2.0 * sigma * sigma)).exp())
            }
            Family::CompactBump { radius, mass } => Some(Self::bump_scale(radius, mass) * bump_profile(r / radius)),
            Family::SmearedTetra { .. } => None,
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        match *self {
            Family::SmearedTetra { rho0, ell, delta } => {
                let cfg = TilingConfig::new(ell, delta).expect("validated config");
                rho0 * tiling::xi(0, &cfg, x)
            }
            _ => self.radial(r).unwrap(),
        }
    }

    /// Grid used when this family has to be sampled.
    pub fn default_grid(&self) -> GridSpec {
        match *self {
            Family::Gaussian { sigma, .. } => GridSpec::centered_cube(48, 8.0 * sigma).unwrap(),
            Family::CompactBump { radius, .. } => GridSpec::centered_cube(48, 1.1 * radius).unwrap(),
            Family::SmearedTetra { ell, delta, .. } => smeared_tetra_grid(ell, delta, delta / 20.0),
        }
    }
}

/// Axis-aligned grid covering tile 0 at scale ℓ plus its smearing layer.
pub fn smeared_tetra_grid(ell: f64, delta: f64, h: f64) -> GridSpec {
    let t = tiling::unit_cube_tetrahedra()[0].scaled(ell);
    let margin = delta / 10.0 + 2.0 * h;
    let (lo, hi) = t.bounding_box();
    let mut dims = [0; 3];
    let mut origin = [0.0; 3];
    for a in 0..3 {
        origin[a] = lo[a] - margin;
        dims[a] = (((hi[a] - lo[a] + 2.0 * margin) / h).ceil() as usize + 1).max(2);
    }
    GridSpec::new(dims, [h; 3], origin).unwrap()
}

impl Density {
    pub fn gaussian(sigma: f64, mass: f64) -> Self {
        Density::Analytic(Family::Gaussian { sigma, mass })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Density::Analytic(f) => f.validate(),
            Density::Gridded(g) => {
                ScalarField::density(g.spec.clone(), g.values.clone()).map(|_| ())
            }
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        match self {
            Density::Analytic(f) => f.eval(x),
            Density::Gridded(g) => g.interpolate(x),
        }
    }

    pub fn default_grid(&self) -> GridSpec {
        match self {
            Density::Analytic(f) => f.default_grid(),
            Density::Gridded(g) => g.spec.clone(),
        }
    }

    /// Sampled representation on `spec` (or the stored grid when gridded and `spec` is None).
    pub fn sample(&self, spec: Option<&GridSpec>) -> Result<ScalarField> {
        match (self, spec) {
            (Density::Gridded(g), None) => Ok(g.clone()),
            (_, Some(s)) => ScalarField::sample(s.clone(), |x| self.eval(x)),
            (Density::Analytic(f), None) => ScalarField::sample(f.default_grid(), |x| f.eval(x)),
        }
    }

    /// Parse `name,key=val,...` for the analytic families.
    pub fn parse_builtin(s: &str) -> Result<Self> {
        let mut parts = s.split(',').map(str::trim);
        let name = parts.next().unwrap_or("");
        let mut kv = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| Error::Parameter(format!("expected key=value, got '{p}'")))?;
            let v: f64 = v.parse().map_err(|_| Error::Parameter(format!("bad number '{v}' for {k}")))?;
            kv.insert(k.to_string(), v);
        }
        let mut take = |k: &str, default: Option<f64>| -> Result<f64> {
            kv.remove(k).or(default).ok_or_else(|| Error::Parameter(format!("{name}: missing '{k}'")))
        };
        let fam = match name {
            "gaussian" => Family::Gaussian { sigma: take("sigma", Some(1.0))?, mass: take("mass", Some(1.0))? },
            "compact-bump" => {
                Family::CompactBump { radius: take("radius", Some(1.0))?, mass: take("mass", Some(1.0))? }
            }
            "smeared-tetra" => Family::SmearedTetra {
                rho0: take("rho0", Some(1.0))?,
                ell: take("ell", None)?,
                delta: take("delta", None)?,
            },
            _ => return param(format!("unknown density family '{name}'")),
        };
        if let Some(k) = kv.keys().next() {
            return param(format!("{name}: unknown key '{k}'"));
        }
        fam.validate()?;
        Ok(Density::Analytic(fam))
    }
}

/// The integrals of ρ consumed by every bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalSet {
    pub mass: f64,
    pub l2: f64,
    pub l43: f64,
    pub l53: f64,
    /// `∫|∇√ρ|²`
    pub kin: f64,
    /// `∫|∇ρ|`
    pub tv: f64,
    /// `∫|∇ρ^θ|^p` for the tagged `(theta, p)`.
    pub thg: f64,
    pub theta: f64,
    pub p: f64,
    pub hartree: Option<f64>,
}

impl FunctionalSet {
    pub fn zero(theta: f64, p: f64) -> Self {
        FunctionalSet { mass: 0.0, l2: 0.0, l43: 0.0, l53: 0.0, kin: 0.0, tv: 0.0, thg: 0.0, theta, p, hartree: None }
    }

    /// Every entry set to one, tagged with `(theta, p)`.
    pub fn unit(theta: f64, p: f64) -> Self {
        FunctionalSet { mass: 1.0, l2: 1.0, l43: 1.0, l53: 1.0, kin: 1.0, tv: 1.0, thg: 1.0, theta, p, hartree: Some(1.0) }
    }

    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("mass", self.mass),
            ("l2", self.l2),
            ("l43", self.l43),
            ("l53", self.l53),
            ("kin", self.kin),
            ("tv", self.tv),
            ("thg", self.thg),
        ]
    }
}

fn check_theta_p(theta: f64, p: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return param(format!("theta must lie in (0,1), got {theta}"));
    }
    if !(p > 1.0 && p.is_finite()) {
        return param(format!("p must exceed 1, got {p}"));
    }
    Ok(())
}

/// `∫ρ^s` for the Gaussian family.
fn gaussian_power(sigma: f64, mass: f64, s: f64) -> f64 {
    if mass == 0.0 {
        return 0.0;
    }
    mass.powf(s) * (2.0 * PI * sigma * sigma).powf(1.5 * (1.0 - s)) * s.powf(-1.5)
}

fn gaussian_functionals(sigma: f64, mass: f64, theta: f64, p: f64) -> FunctionalSet {
    let s2 = sigma * sigma;
    let thg = if mass == 0.0 {
        0.0
    } else {
        // θ^p σ^{-2p} a^{θp} 4π Γ((p+3)/2) / (2 c^{(p+3)/2}),  c = θp/(2σ²)
        let a = mass * (2.0 * PI * s2).powf(-1.5);
        let c = theta * p / (2.0 * s2);
        let ln = p * theta.ln() - 2.0 * p * sigma.ln() + theta * p * a.ln() + (4.0 * PI).ln()
            + ln_gamma(0.5 * (p + 3.0))
            - 2f64.ln()
            - 0.5 * (p + 3.0) * c.ln();
        ln.exp()
    };
    FunctionalSet {
        mass,
        l2: gaussian_power(sigma, mass, 2.0),
        l43: gaussian_power(sigma, mass, 4.0 / 3.0),
        l53: gaussian_power(sigma, mass, 5.0 / 3.0),
        kin: 0.75 * mass / s2,
        tv: mass * 2.0 * (2.0 / PI).sqrt() / sigma,
        thg,
        theta,
        p,
        hartree: None,
    }
}

fn radial_integral<F: Fn(f64) -> f64>(what: &str, f: F, rmax: f64) -> Result<f64> {
    let q = quad::adaptive(|r| 4.0 * PI * r * r * f(r), 0.0, rmax, QUAD_REL_TOL, 1e-300);
    if q.rel_err() > QUAD_FAIL_TOL && q.abs_err > 1e-300 {
        return Err(Error::Accuracy { what: what.into(), estimate: q.rel_err() });
    }
    Ok(q.value)
}

fn bump_functionals(radius: f64, mass: f64, theta: f64, p: f64) -> Result<FunctionalSet> {
    if mass == 0.0 {
        return Ok(FunctionalSet::zero(theta, p));
    }
    let c = Family::bump_scale(radius, mass);
    let lnc = c.ln();
    let r2 = radius * radius;
    // log ρ and |d log ρ / dr| inside the ball.
    let logrho = move |r: f64| lnc - 1.0 / (1.0 - r * r / r2);
    let dlog = move |r: f64| {
        let u = 1.0 - r * r / r2;
        2.0 * r / (r2 * u * u)
    };
    let inside = move |r: f64| r < radius * (1.0 - 1e-15);
    let pw = |s: f64| move |r: f64| if inside(r) { (s * logrho(r)).exp() } else { 0.0 };
    let kin = radial_integral("kin", |r| if inside(r) { 0.25 * dlog(r).powi(2) * logrho(r).exp() } else { 0.0 }, radius)?;
    let tv = radial_integral("tv", |r| if inside(r) { dlog(r) * logrho(r).exp() } else { 0.0 }, radius)?;
    let thg = radial_integral(
        "thg",
        |r| {
            let d = dlog(r);
            if inside(r) && d > 0.0 {
                (p * (theta * d).ln() + theta * p * logrho(r)).exp()
            } else {
                0.0
            }
        },
        radius,
    )?;
    Ok(FunctionalSet {
        mass: radial_integral("mass", pw(1.0), radius)?,
        l2: radial_integral("l2", pw(2.0), radius)?,
        l43: radial_integral("l43", pw(4.0 / 3.0), radius)?,
        l53: radial_integral("l53", pw(5.0 / 3.0), radius)?,
        kin,
        tv,
        thg,
        theta,
        p,
        hartree: None,
    })
}

/// Second-order derivative of `v` along `axis` at grid point `c`.
#[inline]
fn fd(v: &[f64], s: &GridSpec, c: [usize; 3], axis: usize) -> f64 {
    let n = s.dims[axis];
    let h = s.spacing[axis];
    let at = |m: usize| {
        let mut cc = c;
        cc[axis] = m;
        v[s.index(cc[0], cc[1], cc[2])]
    };
    let i = c[axis];
    if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2.min(n - 1))) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n.saturating_sub(3))) / (2.0 * h)
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * h)
    }
}

#[inline]
fn grad_norm(v: &[f64], s: &GridSpec, idx: usize) -> f64 {
    let c = s.unravel(idx);
    let (a, b, d) = (fd(v, s, c, 0), fd(v, s, c, 1), fd(v, s, c, 2));
    (a * a + b * b + d * d).sqrt()
}

/// Functionals of a sampled density by grid quadrature and central differences.
pub fn grid_functionals(f: &ScalarField, theta: f64, p: f64) -> Result<FunctionalSet> {
    check_theta_p(theta, p)?;
    let f = ScalarField::density(f.spec.clone(), f.values.clone())?;
    let s = &f.spec;
    let dv = s.cell_volume();
    let rho = &f.values;
    let n = s.len();
    let sqrt_rho: Vec<f64> = rho.iter().map(|v| v.sqrt()).collect();
    let rho_t: Vec<f64> = rho.iter().map(|v| v.powf(theta)).collect();
    let pow = |e: f64| dv * sum_map(n, |i| if rho[i] > 0.0 { rho[i].powf(e) } else { 0.0 });
    Ok(FunctionalSet {
        mass: dv * sum_map(n, |i| rho[i]),
        l2: dv * sum_map(n, |i| rho[i] * rho[i]),
        l43: pow(4.0 / 3.0),
        l53: pow(5.0 / 3.0),
        kin: dv * sum_map(n, |i| if rho[i] > 0.0 { grad_norm(&sqrt_rho, s, i).powi(2) } else { 0.0 }),
        tv: dv * sum_map(n, |i| grad_norm(rho, s, i)),
        thg: dv * sum_map(n, |i| if rho[i] > 0.0 { grad_norm(&rho_t, s, i).powf(p) } else { 0.0 }),
        theta,
        p,
        hartree: None,
    })
}

/// All functionals except `hartree`; closed forms or radial quadrature for
/// analytic families, grid quadrature otherwise.
pub fn functionals(rho: &Density, theta: f64, p: f64) -> Result<FunctionalSet> {
    check_theta_p(theta, p)?;
    rho.validate()?;
    match rho {
        Density::Analytic(Family::Gaussian { sigma, mass }) => Ok(gaussian_functionals(*sigma, *mass, theta, p)),
        Density::Analytic(Family::CompactBump { radius, mass }) => bump_functionals(*radius, *mass, theta, p),
        Density::Analytic(fam @ Family::SmearedTetra { delta, .. }) => {
            let spec = fam.default_grid();
            if spec.len() > GRID_POINT_BUDGET {
                return Err(Error::Accuracy {
                    what: format!("smeared tetrahedron needs {} grid points (budget {GRID_POINT_BUDGET})", spec.len()),
                    estimate: spec.spacing[0] / delta,
                });
            }
            let g = ScalarField::sample(spec, |x| fam.eval(x))?;
            grid_functionals(&g, theta, p)
        }
        Density::Gridded(g) => grid_functionals(g, theta, p),
    }
}

/// Exact functionals of `ρ_N(x) = ρ(N^{-1/3}x)` from those of ρ.
pub fn scale_functionals(f: &FunctionalSet, n: f64) -> Result<FunctionalSet> {
    if !(n >= 1.0 && n.is_finite()) {
        return param(format!("scale factor N must be >= 1, got {n}"));
    }
    Ok(FunctionalSet {
        mass: f.mass * n,
        l2: f.l2 * n,
        l43: f.l43 * n,
        l53: f.l53 * n,
        kin: f.kin * n.powf(1.0 / 3.0),
        tv: f.tv * n.powf(2.0 / 3.0),
        thg: f.thg * n.powf(1.0 - f.p / 3.0),
        theta: f.theta,
        p: f.p,
        hartree: f.hartree.map(|d| d * n.powf(5.0 / 3.0)),
    })
}

/// `‖u‖_∞^p / (ℓ^{p-3} ∫|∇u|^p)` over the grid points inside `domain`.
///
/// `u` must vanish (or change sign) somewhere in the domain.
pub fn sobolev_ratio(u: &ScalarField, domain: &Tetra, p: f64, ell: f64) -> Result<f64> {
    if !(p > 3.0) {
        return param(format!("p must exceed 3, got {p}"));
    }
    if !(ell > 0.0) {
        return param("ell must be positive");
    }
    let s = &u.spec;
    let idx: Vec<usize> = (0..s.len()).filter(|&i| domain.contains(s.point(i))).collect();
    if idx.is_empty() {
        return Err(Error::Precondition("no grid point inside the domain".into()));
    }
    let vals: Vec<f64> = idx.iter().map(|&i| u.values[i]).collect();
    let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let vanishes = lo <= 1e-12 * sup && hi >= -1e-12 * sup;
    if !vanishes {
        return Err(Error::Precondition("u does not vanish anywhere in the domain".into()));
    }
    let grad = s.cell_volume() * sum_map(idx.len(), |m| grad_norm(&u.values, s, idx[m]).powf(p));
    if grad == 0.0 {
        return Err(Error::Precondition("u has zero gradient but is nonzero".into()));
    }
    Ok(sup.powf(p) / (ell.powf(p - 3.0) * grad))
}

/// Write a field in the `LDA-GRID v1` text format.
pub fn write_grid<W: Write>(f: &ScalarField, mut w: W) -> Result<()> {
    let s = &f.spec;
    writeln!(
        w,
        "LDA-GRID v1 {} {} {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
        s.dims[0], s.dims[1], s.dims[2], s.spacing[0], s.spacing[1], s.spacing[2], s.origin[0], s.origin[1], s.origin[2]
    )?;
    for row in f.values.chunks(s.dims[0]) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Read an `LDA-GRID v1` file.
pub fn read_grid<R: BufRead>(mut r: R) -> Result<ScalarField> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 11 || tok[0] != "LDA-GRID" || tok[1] != "v1" {
        return Err(Error::Format(format!("malformed LDA-GRID header: '{}'", header.trim_end())));
    }
    let int = |t: &str| t.parse::<usize>().map_err(|_| Error::Format(format!("bad extent '{t}'")));
    let real = |t: &str| t.parse::<f64>().map_err(|_| Error::Format(format!("bad real '{t}'")));
    let dims = [int(tok[2])?, int(tok[3])?, int(tok[4])?];
    let spacing = [real(tok[5])?, real(tok[6])?, real(tok[7])?];
    let origin = [real(tok[8])?, real(tok[9])?, real(tok[10])?];
    let spec = GridSpec::new(dims, spacing, origin).map_err(|e| Error::Format(e.to_string()))?;
    let mut rest = String::new();
    r.read_to_string(&mut rest)?;
    let values = rest.split_whitespace().map(real).collect::<Result<Vec<f64>>>()?;
    if values.len() != spec.len() {
        return Err(Error::Format(format!("expected {} values, found {}", spec.len(), values.len())));
    }
    ScalarField::new(spec, values)
}

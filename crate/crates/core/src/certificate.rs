//! ε-optimised LDA error certificates, scaling sweeps and the localized
//! error formulas for smeared tetrahedra.

use std::collections::BTreeMap;

use crate::bounds::{self, Constants, UegModel};
use crate::error::{param, Error, Result};
use crate::field::{self, Density, FunctionalSet, GridSpec, ScalarField};
use crate::geom::*;
use crate::tiling::{self, Tetra, TilingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Quantum,
    Xc,
    Classical,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Variant::Quantum),
            "xc" => Ok(Variant::Xc),
            "classical" => Ok(Variant::Classical),
            _ => param(format!("unknown variant '{s}' (expected quantum, xc or classical)")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Quantum => "quantum",
            Variant::Xc => "xc",
            Variant::Classical => "classical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertParams {
    pub p: f64,
    pub theta: f64,
    pub c: f64,
    pub q: f64,
    pub variant: Variant,
    pub kappa_nam: f64,
}

impl Default for CertParams {
    fn default() -> Self {
        CertParams { p: 4.0, theta: 0.5, c: 1.0, q: 1.0, variant: Variant::Quantum, kappa_nam: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Validation {
    Accepted,
    Rejected(String),
}

pub fn validate_params(pr: &CertParams) -> Validation {
    let reject = |s: String| Validation::Rejected(s);
    if !(pr.p > 3.0 && pr.p.is_finite()) {
        return reject(format!("p must satisfy p > 3, got p = {}", pr.p));
    }
    if !(pr.theta > 0.0 && pr.theta < 1.0) {
        return reject(format!("theta must lie in (0, 1), got {}", pr.theta));
    }
    if !(pr.c > 0.0 && pr.c.is_finite()) {
        return reject(format!("C must be positive, got {}", pr.c));
    }
    if !(pr.q >= 1.0 && pr.q.is_finite()) {
        return reject(format!("q must be >= 1, got {}", pr.q));
    }
    let pt = pr.p * pr.theta;
    match pr.variant {
        Variant::Quantum | Variant::Xc => {
            if !(2.0..=1.0 + pr.p / 2.0).contains(&pt) {
                return reject(format!("need 2 <= p*theta <= 1 + p/2, got p*theta = {pt}"));
            }
        }
        Variant::Classical => {
            if pt < 4.0 / 3.0 {
                return reject(format!("need p*theta >= 4/3, got p*theta = {pt}"));
            }
        }
    }
    Validation::Accepted
}

fn require_valid(pr: &CertParams) -> Result<()> {
    match validate_params(pr) {
        Validation::Accepted => Ok(()),
        Validation::Rejected(r) => Err(Error::Parameter(r)),
    }
}

/// `max{2p − 1, (1 + 3θ)p − 4}`.
pub fn classical_exponent(p: f64, theta: f64) -> f64 {
    (2.0 * p - 1.0).max((1.0 + 3.0 * theta) * p - 4.0)
}

/// Exponent of ε in front of the θ-gradient term.
pub fn theta_exponent(pr: &CertParams) -> f64 {
    match pr.variant {
        Variant::Quantum | Variant::Xc => 4.0 * pr.p - 1.0,
        Variant::Classical => classical_exponent(pr.p, pr.theta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rhs {
    pub bulk: f64,
    pub kin: f64,
    pub theta: f64,
    pub total: f64,
    /// `q^{-2/3} c_TF ∫ρ^{5/3}`, exposed for the xc variant only.
    pub tf_subtraction: Option<f64>,
}

/// Right-hand side of the certificate at a given ε.
pub fn rhs(f: &FunctionalSet, eps: f64, pr: &CertParams) -> Result<Rhs> {
    if !(eps > 0.0) {
        return param(format!("epsilon must be positive, got {eps}"));
    }
    let e2 = theta_exponent(pr);
    let (bulk, kin) = match pr.variant {
        Variant::Quantum | Variant::Xc => (eps * (f.mass + f.l2), pr.c * (1.0 + eps) / eps * f.kin),
        Variant::Classical => (eps * (f.mass + f.l43), 0.0),
    };
    let theta = if f.thg == 0.0 { 0.0 } else { pr.c * f.thg / eps.powf(e2) };
    let tf = match pr.variant {
        Variant::Xc => Some(pr.q.powf(-2.0 / 3.0) * bounds::c_tf(3) * f.l53),
        _ => None,
    };
    Ok(Rhs { bulk, kin, theta, total: bulk + kin + theta, tf_subtraction: tf })
}

/// Minimiser of `Aε + B/ε^{e1} + D/ε^{e2}` over ε > 0.
///
/// Returns ε = 1 when A = 0 (the function is nonincreasing) and the
/// infimum `(f64::MIN_POSITIVE, 0)` when B = D = 0.
pub fn optimize_eps(a: f64, b: f64, d: f64, e1: f64, e2: f64) -> Result<(f64, f64)> {
    if [a, b, d].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return param("coefficients must be finite and non-negative");
    }
    if !(e1 >= 1.0 && e2 > e1) {
        return param(format!("need e2 > e1 >= 1, got e1 = {e1}, e2 = {e2}"));
    }
    if a == 0.0 && b == 0.0 && d == 0.0 {
        return Err(Error::Degenerate("all coefficients vanish".into()));
    }
    let g = |e: f64| a * e + if b == 0.0 { 0.0 } else { b / e.powf(e1) } + if d == 0.0 { 0.0 } else { d / e.powf(e2) };
    if a == 0.0 {
        return Ok((1.0, g(1.0)));
    }
    if b == 0.0 && d == 0.0 {
        return Ok((f64::MIN_POSITIVE, 0.0));
    }
    // g'(e^t) e^t = a e^t − e1 b e^{−e1 t} − e2 d e^{−e2 t}, increasing in t.
    let dg = |t: f64| {
        let e = t.exp();
        a * e - e1 * b * (-e1 * t).exp() - e2 * d * (-e2 * t).exp()
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while dg(lo) > 0.0 {
        lo -= 2.0 * (1.0 + lo.abs());
    }
    while dg(hi) < 0.0 {
        hi += 2.0 * (1.0 + hi.abs());
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dg(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let e = (0.5 * (lo + hi)).exp();
    Ok((e, g(e)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum {
    pub eps: f64,
    pub rhs: Rhs,
    pub exactly_flat: bool,
}

/// `min_ε rhs(F, ε)`.
pub fn optimize_rhs(f: &FunctionalSet, pr: &CertParams) -> Result<Optimum> {
    require_valid(pr)?;
    let e2 = theta_exponent(pr);
    let (a, b, d) = match pr.variant {
        Variant::Quantum | Variant::Xc => (f.mass + f.l2, pr.c * f.kin, pr.c * f.thg),
        Variant::Classical => (f.mass + f.l43, 0.0, pr.c * f.thg),
    };
    if a == 0.0 && b == 0.0 && d == 0.0 {
        let r = Rhs {
            bulk: 0.0,
            kin: 0.0,
            theta: 0.0,
            total: 0.0,
            tf_subtraction: rhs(f, 1.0, pr)?.tf_subtraction,
        };
        return Ok(Optimum { eps: 1.0, rhs: r, exactly_flat: true });
    }
    let (eps, _) = optimize_eps(a, b, d, 1.0, e2)?;
    let flat = b == 0.0 && d == 0.0;
    Ok(Optimum { eps, rhs: rhs(f, eps, pr)?, exactly_flat: flat })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub params: CertParams,
    pub constants: Constants,
    pub model_id: String,
    pub model_coefficients: Option<(f64, f64)>,
    pub functionals: FunctionalSet,
    /// `∫e(ρ)`, minus the Thomas–Fermi term for the xc variant.
    pub lda_value: f64,
    pub model_integral: f64,
    pub eps_star: f64,
    pub rhs: Rhs,
    pub band: (f64, f64),
    pub advisory_envelope: (f64, f64),
    pub flags: Vec<String>,
}

/// Assembles the certificate for ρ.
pub fn certify(rho: &Density, pr: &CertParams, model: &dyn UegModel, constants: &Constants) -> Result<Certificate> {
    require_valid(pr)?;
    let mut f = field::functionals(rho, pr.theta, pr.p)?;
    f.hartree = Some(crate::coulomb::hartree(rho)?);
    let model_integral = bounds::lda_energy(rho, model)?;
    let opt = optimize_rhs(&f, pr)?;
    let lda_value = model_integral - opt.rhs.tf_subtraction.unwrap_or(0.0);
    let r = opt.rhs.total;
    let e_lo = bounds::e_lower(&f, constants);
    let (_, e_hi) = bounds::e_upper_min(&f, constants);
    let mut flags = vec!["C-relative".to_string(), format!("model:{}", model.id())];
    if matches!(constants.lt, bounds::LtMode::Conjectured) {
        flags.push("conjectured-constant".into());
    }
    if opt.eps > 0.5 {
        flags.push("eps-star-above-half".into());
    }
    if opt.exactly_flat {
        flags.push("exactly-flat".into());
    }
    Ok(Certificate {
        params: *pr,
        constants: *constants,
        model_id: model.id(),
        model_coefficients: model.power_law(),
        functionals: f,
        lda_value,
        model_integral,
        eps_star: opt.eps,
        rhs: opt.rhs,
        band: (lda_value - r, lda_value + r),
        advisory_envelope: (e_lo, e_hi),
        flags,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: f64,
    pub eps_star: f64,
    pub total: f64,
    /// Right-hand side at the fixed choice `ε = N^{-1/12}`.
    pub total_fixed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
    pub slope_fixed: f64,
}

/// Optimised right-hand side of `ρ_N` for each N and the log-log slope.
pub fn scaling_sweep(base: &FunctionalSet, pr: &CertParams, n_list: &[f64]) -> Result<ScalingResult> {
    require_valid(pr)?;
    if n_list.len() < 3 {
        return param(format!("need at least 3 values of N, got {}", n_list.len()));
    }
    let fixed_exp = match pr.variant {
        Variant::Quantum | Variant::Xc => -1.0 / 12.0,
        Variant::Classical => -4.0 / (3.0 * (theta_exponent(pr) + 1.0)),
    };
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let f = field::scale_functionals(base, n)?;
        let o = optimize_rhs(&f, pr)?;
        let fixed = rhs(&f, n.powf(fixed_exp), pr)?.total;
        rows.push(ScalingRow { n, eps_star: o.eps, total: o.rhs.total, total_fixed: fixed });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.n.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.total.ln()).collect();
    let yf: Vec<f64> = rows.iter().map(|r| r.total_fixed.ln()).collect();
    if y.iter().chain(&yf).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("right-hand side vanishes for some N".into()));
    }
    Ok(ScalingResult {
        slope: crate::quad::linear_fit(&x, &y).0,
        slope_fixed: crate::quad::linear_fit(&x, &yf).0,
        rows,
    })
}

/// Error margins around the model energy of a smeared constant tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TetraBand {
    pub center: f64,
    pub upper_margin: f64,
    pub avg_lower_margin: f64,
    pub pointwise_lower_margin: f64,
}

pub fn tetra_band(rho0: f64, ell: f64, delta: f64, alpha: f64, c: f64, model: &dyn UegModel) -> Result<TetraBand> {
    if !(rho0 >= 0.0 && rho0.is_finite()) {
        return param(format!("rho0 must be non-negative, got {rho0}"));
    }
    if !(c > 0.0) {
        return param("C must be positive");
    }
    if !(ell > 0.0 && delta > 0.0 && delta <= ell / 2.0) {
        return param(format!("regime violated: need 0 < delta <= ell/2, got delta={delta}, ell={ell}"));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return param(format!("regime violated: need alpha in (0, 1/2), got {alpha}"));
    }
    if rho0.cbrt() * ell < c {
        return param(format!("regime violated: need rho0^(1/3) ell >= C, got {}", rho0.cbrt() * ell));
    }
    let r = rho0;
    Ok(TetraBand {
        center: model.eval(r),
        upper_margin: c * r / ell * (1.0 + 1.0 / delta + delta.powi(3) * r + delta * r.powf(2.0 / 3.0)),
        avg_lower_margin: c * delta * delta * r * r * (1.0 / alpha).ln(),
        pointwise_lower_margin: c * delta * (r.powf(5.0 / 3.0) + r.powf(4.0 / 3.0)) / ell
            + c * (r.powf(23.0 / 15.0) + r.powf(18.0 / 15.0)) / ell.powf(0.4),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatnessTerms {
    pub rho_min: f64,
    pub rho_max: f64,
    /// Keys: bulk, layer, kin, theta.
    pub upper: BTreeMap<&'static str, f64>,
    pub lower: BTreeMap<&'static str, f64>,
}

fn point_segment_dist(x: V3, a: V3, b: V3) -> f64 {
    let ab = sub(b, a);
    let t = (dot(sub(x, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
    norm(sub(x, add(a, scale(t, ab))))
}

/// Euclidean distance from `x` to the closed tetrahedron.
pub fn tetra_distance(t: &Tetra, x: V3) -> f64 {
    if t.contains(x) {
        return 0.0;
    }
    let v = t.vertices;
    let mut best = f64::INFINITY;
    for skip in 0..4 {
        let idx: Vec<usize> = (0..4).filter(|&k| k != skip).collect();
        let (a, b, c) = (v[idx[0]], v[idx[1]], v[idx[2]]);
        let n = cross(sub(b, a), sub(c, a));
        let nn = unit(n);
        let h = dot(sub(x, a), nn);
        let p = sub(x, scale(h, nn));
        // Inside the triangle if all edge cross products agree with n.
        let inside = [(a, b), (b, c), (c, a)].iter().all(|&(u, w)| dot(cross(sub(w, u), sub(p, u)), n) >= 0.0);
        let d = if inside {
            h.abs()
        } else {
            point_segment_dist(x, a, b).min(point_segment_dist(x, b, c)).min(point_segment_dist(x, c, a))
        };
        best = best.min(d);
    }
    best
}

/// Maximum grid size for localized evaluations.
pub const FLATNESS_POINT_BUDGET: usize = 20_000_000;

/// Terms of the upper and lower estimates for replacing ρ by a constant on
/// the smeared tile `1_{ℓΔ} ∗ η_δ` (tile 0).
pub fn flatness_error(rho: &Density, ell: f64, delta: f64, eps: f64, pr: &CertParams) -> Result<FlatnessTerms> {
    require_valid(pr)?;
    if !(eps > 0.0 && eps <= 0.5) {
        return param(format!("epsilon must lie in (0, 1/2], got {eps}"));
    }
    let cfg = TilingConfig::new(ell, delta)?;
    rho.validate()?;
    let tile = cfg.tile(0);
    let h = (delta / 20.0).min(ell / 40.0);
    // Margin δ so that ℓΔ + B_δ is covered.
    let (lo, hi) = tile.bounding_box();
    let margin = delta + 2.0 * h;
    let dims: [usize; 3] = std::array::from_fn(|a| ((hi[a] - lo[a] + 2.0 * margin) / h).ceil() as usize + 1);
    if dims.iter().product::<usize>() > FLATNESS_POINT_BUDGET {
        return Err(Error::Accuracy {
            what: "flatness grid exceeds the point budget".into(),
            estimate: h / delta,
        });
    }
    let spec = GridSpec::new(dims, [h; 3], std::array::from_fn(|a| lo[a] - margin))?;
    let rf = ScalarField::sample(spec.clone(), |x| rho.eval(x))?;
    let xf = ScalarField::sample(spec.clone(), |x| tiling::xi(0, &cfg, x))?;
    let n = spec.len();
    let dv = spec.cell_volume();
    let r_small = cfg.radius();
    // Support of ξ is ℓΔ + closed ball of radius δ/10.
    let in_support: Vec<bool> = (0..n).map(|i| tetra_distance(&tile, spec.point(i)) <= r_small).collect();
    let in_big: Vec<bool> = (0..n).map(|i| tetra_distance(&tile, spec.point(i)) <= delta).collect();
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        if in_support[i] {
            rmin = rmin.min(rf.values[i]);
            rmax = rmax.max(rf.values[i]);
        }
    }
    let grad_sq = |v: &ScalarField, i: usize| {
        let c = spec.unravel(i);
        (0..3)
            .map(|a| {
                let at = |m: usize| {
                    let mut cc = c;
                    cc[a] = m;
                    v.values[spec.index(cc[0], cc[1], cc[2])]
                };
                let d = if c[a] == 0 {
                    (at(1) - at(0)) / h
                } else if c[a] == dims[a] - 1 {
                    (at(c[a]) - at(c[a] - 1)) / h
                } else {
                    (at(c[a] + 1) - at(c[a] - 1)) / (2.0 * h)
                };
                d * d
            })
            .sum::<f64>()
    };
    let sq_rho = rf.map(f64::sqrt);
    let sq_xi = xf.map(f64::sqrt);
    let rho_t = rf.map(|v| v.powf(pr.theta));
    use crate::summation::sum_map as sum;
    let bulk_int = dv * sum(n, |i| (rf.values[i] + rf.values[i] * rf.values[i]) * xf.values[i]);
    let layer_int = dv * sum(n, |i| rf.values[i] * grad_sq(&sq_xi, i));
    let kin_int = dv * sum(n, |i| if rf.values[i] > 0.0 { grad_sq(&sq_rho, i) * xf.values[i] } else { 0.0 });
    let thg = dv * sum(n, |i| {
        if in_big[i] && rf.values[i] > 0.0 {
            grad_sq(&rho_t, i).powf(0.5 * pr.p)
        } else {
            0.0
        }
    });
    if !thg.is_finite() {
        return Err(Error::Precondition("theta-gradient integral is not finite".into()));
    }
    let (c, p) = (pr.c, pr.p);
    let theta_coef = c * (ell.powf(2.0 * p) / eps.powf(p - 1.0) + ell.powf(p) / eps.powf(1.25 * p - 1.0));
    let mut upper = BTreeMap::new();
    upper.insert("bulk", c * eps * bulk_int);
    upper.insert("layer", c * layer_int);
    upper.insert("kin", c / eps * kin_int);
    upper.insert("theta", theta_coef * thg);
    let mut lower = BTreeMap::new();
    lower.insert("bulk", c * eps * ell.powi(3) * (rmax + rmax * rmax));
    lower.insert("layer", c * ell * ell / delta * rmax);
    lower.insert("kin", c / eps * kin_int);
    lower.insert("theta", theta_coef * thg);
    Ok(FlatnessTerms { rho_min: rmin, rho_max: rmax, upper, lower })
}

/// Right side of the rough subadditivity estimate, with the cross-gradient
/// term bounded by `kin₂ + ε kin₁`.
pub fn subadditivity_gap(f1: &FunctionalSet, f2: &FunctionalSet, d2: f64, eps: f64, c: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return param(format!("epsilon must lie in (0, 1], got {eps}"));
    }
    Ok(c * eps * (f1.l53 + f1.l43)
        + c * eps.powf(-2.0 / 3.0) * f2.l53
        + c * (f2.kin + eps * f1.kin)
        + (1.0 - eps) / eps * d2)
}

/// `q^{-2/3}c_TF ∫ρ^{5/3} ∓ (ε q^{-2/3} ∫ρ^{5/3} + C/ε^{13/3} ∫|∇√ρ|²)`.
pub fn t_band_estimate(f: &FunctionalSet, eps: f64, q: f64, c: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return param(format!("epsilon must be positive, got {eps}"));
    }
    let qf = q.powf(-2.0 / 3.0);
    let center = qf * bounds::c_tf(3) * f.l53;
    let hw = eps * qf * f.l53 + c / eps.powf(13.0 / 3.0) * f.kin;
    Ok((center - hw, center + hw))
}

/// `(δ, ℓ) = (√ε, ε^{-3/2})`.
pub fn choice_ell_delta(eps: f64) -> (f64, f64) {
    (eps.sqrt(), eps.powf(-1.5))
}

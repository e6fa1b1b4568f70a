//! Physical constants, uniform-electron-gas models and energy envelopes.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{param, Result};
use crate::field::{Density, Family, FunctionalSet};
use crate::kinetic::{t_upper_raw, KineticConstants, UpperVariant};
use crate::quad;

/// `c_TF(d) = d/(d+2) · 4π² / |B₁|^{2/d}` for the unit ball `B₁ ⊂ ℝ^d`.
pub fn c_tf(d: u32) -> f64 {
    let df = d as f64;
    let ball = PI.powf(df / 2.0) / gamma(df / 2.0 + 1.0);
    df / (df + 2.0) * 4.0 * PI * PI / ball.powf(2.0 / df)
}

/// `3^{5/3} 4^{1/3} π^{4/3} / 5`.
pub fn c_tf3_closed() -> f64 {
    3f64.powf(5.0 / 3.0) * 4f64.powf(1.0 / 3.0) * PI.powf(4.0 / 3.0) / 5.0
}

pub const C_LO: f64 = 1.64;
pub const LO_GRAD_COEF: f64 = 0.001206;

/// `(3/5)(9π/2)^{1/3}`.
pub fn c_lo_grad() -> f64 {
    0.6 * (4.5 * PI).powf(1.0 / 3.0)
}

/// `−(3/4)(3/π)^{1/3}`.
pub fn dirac_exchange() -> f64 {
    -0.75 * (3.0 / PI).powf(1.0 / 3.0)
}

/// The Lieb–Thirring constant in use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LtMode {
    /// `c_LT = c_TF`, the conjectured optimal value.
    Conjectured,
    User(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub q: f64,
    pub lt: LtMode,
    pub kinetic: KineticConstants,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { q: 1.0, lt: LtMode::Conjectured, kinetic: KineticConstants::default() }
    }
}

impl Constants {
    pub fn c_tf(&self) -> f64 {
        c_tf(3)
    }

    pub fn c_lt(&self) -> f64 {
        match self.lt {
            LtMode::Conjectured => c_tf(3),
            LtMode::User(c) => c,
        }
    }

    /// `q^{-2/3} c_TF`.
    pub fn tf_coefficient(&self) -> f64 {
        self.q.powf(-2.0 / 3.0) * c_tf(3)
    }
}

/// Energy per unit volume of the uniform gas, as a pluggable model.
pub trait UegModel: Sync {
    fn id(&self) -> String;
    fn eval(&self, rho: f64) -> f64;
    /// `(A, B)` when the model is `Aρ^{5/3} + Bρ^{4/3}`.
    fn power_law(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerLawModel {
    pub id: String,
    pub a: f64,
    pub b: f64,
}

impl PowerLawModel {
    pub fn tf_dirac(q: f64) -> Self {
        PowerLawModel { id: "tf-dirac".into(), a: q.powf(-2.0 / 3.0) * c_tf(3), b: dirac_exchange() }
    }

    pub fn tf_only(q: f64) -> Self {
        PowerLawModel { id: "tf-only".into(), a: q.powf(-2.0 / 3.0) * c_tf(3), b: 0.0 }
    }

    /// `tf-dirac`, `tf-only` or `custom:<A>,<B>`.
    pub fn parse(s: &str, q: f64) -> Result<Self> {
        match s {
            "tf-dirac" => Ok(Self::tf_dirac(q)),
            "tf-only" => Ok(Self::tf_only(q)),
            _ => {
                let Some(rest) = s.strip_prefix("custom:") else {
                    return param(format!("unknown model '{s}'"));
                };
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 2 {
                    return param(format!("custom model needs 'custom:<A>,<B>', got '{s}'"));
                }
                let num = |t: &str| t.trim().parse::<f64>().map_err(|_| crate::error::Error::Parameter(format!("bad number '{t}'")));
                let (a, b) = (num(parts[0])?, num(parts[1])?);
                if !a.is_finite() || !b.is_finite() {
                    return param("model coefficients must be finite");
                }
                Ok(PowerLawModel { id: format!("custom:{a},{b}"), a, b })
            }
        }
    }
}

impl UegModel for PowerLawModel {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn eval(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            self.a * rho.powf(5.0 / 3.0) + self.b * rho.powf(4.0 / 3.0)
        }
    }
    fn power_law(&self) -> Option<(f64, f64)> {
        Some((self.a, self.b))
    }
}

/// A model given by a closure.
pub struct FnModel<F: Fn(f64) -> f64 + Sync> {
    pub id: String,
    pub f: F,
}

impl<F: Fn(f64) -> f64 + Sync> UegModel for FnModel<F> {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn eval(&self, rho: f64) -> f64 {
        (self.f)(rho)
    }
}

/// `∫ e(ρ(x)) dx`.
pub fn lda_energy(rho: &Density, model: &dyn UegModel) -> Result<f64> {
    rho.validate()?;
    if let (Some((a, b)), Density::Analytic(Family::Gaussian { .. } | Family::CompactBump { .. })) =
        (model.power_law(), rho)
    {
        let f = crate::field::functionals(rho, 0.5, 4.0)?;
        return Ok(a * f.l53 + b * f.l43);
    }
    match rho {
        Density::Analytic(fam @ (Family::Gaussian { .. } | Family::CompactBump { .. })) => {
            let rmax = match fam {
                Family::Gaussian { sigma, .. } => 40.0 * sigma,
                Family::CompactBump { radius, .. } => *radius,
                _ => unreachable!(),
            };
            let q = quad::adaptive(
                |r| 4.0 * PI * r * r * model.eval(fam.radial(r).unwrap()),
                0.0,
                rmax,
                crate::field::QUAD_REL_TOL,
                1e-300,
            );
            if q.rel_err() > crate::field::QUAD_FAIL_TOL && q.abs_err > 1e-300 {
                return Err(crate::error::Error::Accuracy { what: "lda_energy".into(), estimate: q.rel_err() });
            }
            Ok(q.value)
        }
        _ => {
            let g = rho.sample(None)?;
            let dv = g.spec.cell_volume();
            Ok(dv * crate::summation::sum_map(g.values.len(), |i| model.eval(g.values[i])))
        }
    }
}

/// `(−c_LO ρ₀^{4/3}, q^{-2/3}c_TF ρ₀^{5/3})`.
pub fn e_envelope(rho0: f64, q: f64) -> (f64, f64) {
    let r = rho0.max(0.0);
    (-C_LO * r.powf(4.0 / 3.0), q.powf(-2.0 / 3.0) * c_tf(3) * r.powf(5.0 / 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzProbe {
    pub constant: f64,
    pub pairs_used: usize,
}

/// `sup |e(ρ₁)−e(ρ₂)| / ((m^{1/3}+m^{2/3})|ρ₁−ρ₂|)`, `m = max(ρ₁,ρ₂)`.
pub fn model_lipschitz_probe(model: &dyn UegModel, pairs: &[(f64, f64)]) -> Result<LipschitzProbe> {
    let used: Vec<&(f64, f64)> = pairs.iter().filter(|(a, b)| a != b).collect();
    if used.is_empty() {
        return param("no non-degenerate sample pairs");
    }
    if used.iter().any(|(a, b)| !(*a >= 0.0 && *b >= 0.0 && a.is_finite() && b.is_finite())) {
        return param("sample densities must be finite and non-negative");
    }
    let constant = used
        .iter()
        .map(|&&(a, b)| {
            let m = a.max(b);
            (model.eval(a) - model.eval(b)).abs() / ((m.powf(1.0 / 3.0) + m.powf(2.0 / 3.0)) * (a - b).abs())
        })
        .fold(0.0, f64::max);
    Ok(LipschitzProbe { constant, pairs_used: used.len() })
}

/// `q^{-2/3} c_LT ∫ρ^{5/3} − 1.64 ∫ρ^{4/3}`.
pub fn e_lower(f: &FunctionalSet, c: &Constants) -> f64 {
    c.q.powf(-2.0 / 3.0) * c.c_lt() * f.l53 - C_LO * f.l43
}

/// Same form as the general kinetic upper bound.
pub fn e_upper(f: &FunctionalSet, eps: f64, c: &Constants) -> Result<f64> {
    t_upper_raw(f.l53, f.kin, eps, 3, c.q, UpperVariant::General, &c.kinetic)
}

/// `(argmin, min)` of [`e_upper`] over `ε ∈ [1e-4, 1]` (grid, then golden section).
pub fn e_upper_min(f: &FunctionalSet, c: &Constants) -> (f64, f64) {
    let (e, v, _, _) = quad::grid_then_golden(
        |e| e_upper(f, e, c).unwrap_or(f64::INFINITY),
        crate::kinetic::EPS_GRID_LO,
        crate::kinetic::EPS_GRID_HI,
        crate::kinetic::EPS_GRID_POINTS,
    );
    (e, v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoGradient {
    pub value: f64,
    pub eps: f64,
    pub improves: bool,
}

/// `((3/5)(9π/2)^{1/3} + ε) ∫ρ^{4/3} + (0.001206/ε³) ∫|∇ρ|`.
pub fn lieb_oxford_gradient_bound(f: &FunctionalSet, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return param(format!("epsilon must be positive, got {eps}"));
    }
    Ok((c_lo_grad() + eps) * f.l43 + LO_GRAD_COEF / eps.powi(3) * f.tv)
}

/// The ε-optimised gradient bound and whether it beats `1.64 ∫ρ^{4/3}`.
pub fn lieb_oxford_gradient_optimum(f: &FunctionalSet) -> LoGradient {
    if f.l43 == 0.0 {
        return LoGradient { value: 0.0, eps: 1.0, improves: false };
    }
    // Stationarity of aε + b/ε³: ε = (3b/a)^{1/4}.
    let eps = (3.0 * LO_GRAD_COEF * f.tv / f.l43).powf(0.25).max(f64::MIN_POSITIVE);
    let value = (c_lo_grad() + eps) * f.l43 + if f.tv == 0.0 { 0.0 } else { LO_GRAD_COEF / eps.powi(3) * f.tv };
    LoGradient { value, eps, improves: value < C_LO * f.l43 }
}

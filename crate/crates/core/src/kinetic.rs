//! Piecewise-quadratic radial envelopes and kinetic-energy bounds.
//!
//! An envelope is the profile `η(t)` on `t > 0` made of two parabolic lobes
//! of width ε meeting at their common peak. The basic envelope lives on
//! `[1, 1+2ε]`; the shifted one on `[1−εb, 1+(2−b)ε]`.

use crate::bounds::c_tf;
use crate::error::{param, Result};
use crate::field::FunctionalSet;
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeKind {
    Basic,
    Shifted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub eps: f64,
    pub b: f64,
    /// Support `[start, end]`; the peak is at `start + eps`.
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub m0: f64,
    pub minv: f64,
    pub m2d: f64,
    pub fisher: f64,
    pub fisher0: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return param(format!("epsilon must lie in (0, 1), got {eps}"));
    }
    Ok(())
}

pub fn eta_basic(eps: f64) -> Result<Envelope> {
    check_eps(eps)?;
    Ok(Envelope { kind: EnvelopeKind::Basic, eps, b: 0.0, start: 1.0, end: 1.0 + 2.0 * eps })
}

/// Shifted envelope; unlike the constructors used by the bound evaluators,
/// ε up to 1 is accepted as long as the support stays in `t > 0`.
pub fn eta_shifted(eps: f64, b: f64) -> Result<Envelope> {
    if !(eps > 0.0 && eps <= 1.0) {
        return param(format!("epsilon must lie in (0, 1], got {eps}"));
    }
    if !b.is_finite() || b > 2.0 {
        return param(format!("shift b must be finite and at most 2, got {b}"));
    }
    let start = 1.0 - eps * b;
    if start <= 0.0 {
        return param(format!("support [{start}, ..] crosses t = 0"));
    }
    Ok(Envelope { kind: EnvelopeKind::Shifted, eps, b, start, end: 1.0 + (2.0 - b) * eps })
}

/// `F(w) = (log(1+w) − w + w²/2)/w³`.
fn f_log(w: f64) -> f64 {
    if w.abs() < 0.5 {
        let mut s = 0.0;
        let mut p = 1.0;
        for n in 0..60 {
            s += p / (n as f64 + 3.0);
            p *= -w;
        }
        s
    } else {
        (w.ln_1p() - w + 0.5 * w * w) / (w * w * w)
    }
}

impl Envelope {
    fn coef(&self) -> f64 {
        1.5 / self.eps.powi(3)
    }

    pub fn peak(&self) -> f64 {
        self.start + self.eps
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.end {
            0.0
        } else if t <= self.peak() {
            self.coef() * (t - self.start).powi(2)
        } else {
            self.coef() * (self.end - t).powi(2)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.end {
            0.0
        } else if t <= self.peak() {
            2.0 * self.coef() * (t - self.start)
        } else {
            -2.0 * self.coef() * (self.end - t)
        }
    }

    /// `∫η/t`, evaluated without cancellation for small ε.
    pub fn minv(&self) -> f64 {
        let (a, c, e) = (self.start, self.end, self.eps);
        1.5 * (f_log(e / a) / a + f_log(-e / c) / c)
    }

    /// `∫η (t^{2/d} − 1)` by adaptive quadrature on each lobe.
    pub fn m2d_minus_one(&self, d: u32) -> f64 {
        let p = 2.0 / d as f64;
        let g = |t: f64| self.eval(t) * (p * t.ln()).exp_m1();
        quad::adaptive_split(g, &[self.start, self.peak(), self.end], 1e-13, 1e-300).value
    }

    /// `∫t²η′²/η = (2/ε³)(c³ − a³)`.
    pub fn fisher(&self) -> f64 {
        2.0 / self.eps.powi(3) * (self.end.powi(3) - self.start.powi(3))
    }

    /// `∫t²η′²/η` by quadrature (cross-check of [`Envelope::fisher`]).
    pub fn fisher_quadrature(&self) -> f64 {
        let g = |t: f64| {
            let v = self.eval(t);
            if v > 0.0 {
                t * t * self.derivative(t).powi(2) / v
            } else {
                0.0
            }
        };
        quad::adaptive_split(g, &[self.start, self.peak(), self.end], 1e-13, 1e-300).value
    }

    pub fn mass_quadrature(&self) -> f64 {
        quad::adaptive_split(|t| self.eval(t), &[self.start, self.peak(), self.end], 1e-14, 1e-300).value
    }

    pub fn moments(&self, d: u32) -> Result<Moments> {
        if d == 0 {
            return param("dimension must be >= 1");
        }
        Ok(Moments {
            m0: 1.0,
            minv: self.minv(),
            m2d: 1.0 + self.m2d_minus_one(d),
            fisher: self.fisher(),
            fisher0: 12.0 / (self.eps * self.eps),
        })
    }
}

pub fn moments(env: &Envelope, d: u32) -> Result<Moments> {
    env.moments(d)
}

/// The shift `b` with `∫η_{ε,b}/t = 1`.
pub fn solve_b(eps: f64, _d: u32) -> Result<f64> {
    if !(eps > 0.0 && eps <= 0.5) {
        return param(format!("epsilon must lie in (0, 1/2], got {eps}"));
    }
    quad::brent(|b| eta_shifted(eps, b).map(|e| e.minv() - 1.0).unwrap_or(f64::NAN), 0.0, 1.5, 1e-15)
}

/// `1 − ε/10 − 3ε³/350`, the cubic expansion of the root of [`solve_b`].
pub fn b_expansion(eps: f64) -> f64 {
    1.0 - eps / 10.0 - 3.0 * eps.powi(3) / 350.0
}

/// The explicit shift used for the three-dimensional constants.
pub fn b_remark(eps: f64) -> f64 {
    1.0 - eps / 10.0 - 4.0 * eps.powi(3) / 350.0
}

/// Configurable constants of the kinetic bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticConstants {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_nam: f64,
}

impl Default for KineticConstants {
    fn default() -> Self {
        KineticConstants { kappa1: 1.0, kappa2: 48.0, kappa_nam: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpperVariant {
    General,
    ThreeDSmallEps,
}

/// `∫ρ^{1+2/d}` from a functional set (only d = 3 is carried).
fn power_integral(f: &FunctionalSet, d: u32) -> Result<f64> {
    if d != 3 {
        return param(format!("functional sets carry ∫ρ^(1+2/d) only for d = 3, got d = {d}"));
    }
    Ok(f.l53)
}

/// Upper bound on the kinetic energy from the power integral and `∫|∇√ρ|²`.
pub fn t_upper_raw(l: f64, kin: f64, eps: f64, d: u32, q: f64, variant: UpperVariant, k: &KineticConstants) -> Result<f64> {
    if !(eps > 0.0) {
        return param(format!("epsilon must be positive, got {eps}"));
    }
    let qf = q.powf(-2.0 / d as f64);
    match variant {
        UpperVariant::General => {
            Ok(qf * c_tf(d) * (1.0 + k.kappa1 * eps) * l + k.kappa2 * (1.0 + eps.sqrt()).powi(2) / eps * kin)
        }
        UpperVariant::ThreeDSmallEps => {
            if d != 3 {
                return param("the small-epsilon variant requires d = 3");
            }
            if eps > 1.0 {
                return param("the small-epsilon variant requires epsilon <= 1");
            }
            Ok(qf * c_tf(3) * (1.0 + eps * eps / 15.0) * l + 19.0 / (eps * eps) * kin)
        }
    }
}

pub fn t_upper(f: &FunctionalSet, eps: f64, d: u32, q: f64, variant: UpperVariant, k: &KineticConstants) -> Result<f64> {
    t_upper_raw(power_integral(f, d)?, f.kin, eps, d, q, variant, k)
}

/// `q^{-2/3} c ∫ρ^{5/3}`.
pub fn t_lower_lt(f: &FunctionalSet, q: f64, c: f64) -> f64 {
    q.powf(-2.0 / 3.0) * c * f.l53
}

/// `q^{-2/3} c_TF (1−ε) ∫ρ^{5/3} − κ/ε^{13/3} ∫|∇√ρ|²`.
pub fn t_lower_nam(f: &FunctionalSet, eps: f64, q: f64, kappa: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(q.powf(-2.0 / 3.0) * c_tf(3) * (1.0 - eps) * f.l53 - kappa / eps.powf(3.0 + 4.0 / 3.0) * f.kin)
}

pub fn t_lower_ho(f: &FunctionalSet) -> f64 {
    f.kin
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticBand {
    pub lower: f64,
    pub upper: f64,
    pub eps_lower: f64,
    pub eps_upper: f64,
}

pub const EPS_GRID_POINTS: usize = 200;
pub const EPS_GRID_LO: f64 = 1e-4;
pub const EPS_GRID_HI: f64 = 1.0;

/// Two-sided kinetic band: best lower bound (Nam over the ε-grid, floored by
/// Lieb–Thirring with `c_lt` and Hoffmann-Ostenhof) and best upper bound.
pub fn kinetic_band(f: &FunctionalSet, q: f64, d: u32, c_lt: f64, k: &KineticConstants) -> Result<KineticBand> {
    let l = power_integral(f, d)?;
    let grid = quad::log_grid(EPS_GRID_LO, EPS_GRID_HI, EPS_GRID_POINTS);
    let (mut nam, mut eps_lower) = (f64::NEG_INFINITY, grid[0]);
    for &e in &grid {
        if e >= 1.0 {
            continue;
        }
        let v = t_lower_nam(f, e, q, k.kappa_nam)?;
        if v > nam {
            nam = v;
            eps_lower = e;
        }
    }
    let upper_at = |e: f64| t_upper_raw(l, f.kin, e, d, q, UpperVariant::General, k).unwrap_or(f64::INFINITY);
    let (eps_upper, upper, _, _) = quad::grid_then_golden(upper_at, EPS_GRID_LO, EPS_GRID_HI, EPS_GRID_POINTS);
    let lower = nam.max(t_lower_lt(f, q, c_lt)).max(t_lower_ho(f));
    Ok(KineticBand { lower, upper, eps_lower, eps_upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        let e = eta_basic(0.1).unwrap();
        assert_eq!(e.eval(1.0), 0.0);
        assert!((e.eval(1.1) - 15.0).abs() < 1e-12);
        assert_eq!(e.eval(1.2), 0.0);
        let m = e.moments(3).unwrap();
        assert!(m.minv <= 1.0);
        assert!((m.fisher0 - 1200.0).abs() < 1e-9);
        assert!(m.m2d > 1.0 && m.m2d < 1.2f64.powf(2.0 / 3.0));
    }

    #[test]
    fn minv_matches_quadrature() {
        for &(eps, b) in &[(0.5, 0.0), (0.1, 0.99), (0.01, 1.0), (0.9, 1.0)] {
            let e = eta_shifted(eps, b).unwrap();
            let qv = quad::adaptive_split(|t| e.eval(t) / t, &[e.start, e.peak(), e.end], 1e-14, 1e-300).value;
            assert!((e.minv() - qv).abs() < 1e-12, "{eps} {b}");
        }
    }

    #[test]
    fn fisher_closed_form() {
        let e = eta_shifted(0.3, 0.7).unwrap();
        assert!((e.fisher() - e.fisher_quadrature()).abs() < 1e-9 * e.fisher());
    }

    #[test]
    fn solve_b_example() {
        let b = solve_b(0.1, 3).unwrap();
        assert!((b - 0.9899914).abs() < 1e-7);
        assert!((eta_shifted(0.1, b).unwrap().minv() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_zero_is_basic() {
        let a = eta_basic(0.2).unwrap();
        let b = eta_shifted(0.2, 0.0).unwrap();
        assert_eq!((a.start, a.end), (b.start, b.end));
        assert!(eta_shifted(0.6, 2.0).is_err());
    }
}

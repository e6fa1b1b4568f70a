//! Hartree energy with a truncated Coulomb kernel, the annulus convolution
//! and the τ-averaged periodic localization identity.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{param, Error, Result};
use crate::field::{Density, GridSpec, ScalarField};
use crate::quad;
use crate::summation::sum_map;

/// How far the sampled box is zero-padded before transforming.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Padding {
    /// Just enough that no periodic image lies within the truncation radius.
    #[default]
    AliasFree,
    /// Twice the sampled extent per axis.
    Double,
}

/// Discrete transform `ρ̃_p = h³ Σ_x ρ(x) e^{-ip·x}` of a zero-padded field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub coeffs: Vec<Complex64>,
    pub padding: Padding,
    /// Truncation radius (diagonal of the sampled box).
    pub radius: f64,
    pub source_dims: [usize; 3],
}

/// Smallest `m ≥ n` of the form `2^a 3^b 5^c`.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// In-place 3D FFT of x-fastest data (unnormalised).
pub fn fft3(data: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::new();
    for axis in 0..3 {
        let n = dims[axis];
        let plan: std::sync::Arc<dyn Fft<f64>> =
            if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride: usize = dims[..axis].iter().product();
        let total = data.len();
        if axis == 0 {
            data.par_chunks_mut(n).for_each(|line| plan.process(line));
            continue;
        }
        let block = stride * n;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for off in 0..stride {
                for i in 0..n {
                    line[i] = chunk[off + i * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n {
                    chunk[off + i * stride] = line[i];
                }
            }
        });
        debug_assert_eq!(total % block, 0);
    }
}

/// `4π(1 − cos(R p))/p²`, with the limit `2πR²` at `p = 0`.
#[inline]
pub fn truncated_kernel(p: f64, r: f64) -> f64 {
    let x = r * p;
    if x.abs() < 1e-4 {
        2.0 * PI * r * r * (1.0 - x * x / 12.0)
    } else {
        4.0 * PI * (1.0 - x.cos()) / (p * p)
    }
}

/// Rejects fields carrying more than `1e-6` of their mass in the outer cell layer.
pub fn check_support(f: &ScalarField) -> Result<()> {
    let s = &f.spec;
    let total = sum_map(s.len(), |i| f.values[i].abs());
    let edge = sum_map(s.len(), |i| {
        let c = s.unravel(i);
        if (0..3).any(|a| c[a] == 0 || c[a] == s.dims[a] - 1) {
            f.values[i].abs()
        } else {
            0.0
        }
    });
    if total > 0.0 && edge > 1e-6 * total {
        return Err(Error::Support(format!(
            "{:.3e} of the mass lies within one cell of the box boundary",
            edge / total
        )));
    }
    Ok(())
}

impl SpectralField {
    pub fn from_field(f: &ScalarField, padding: Padding) -> Result<Self> {
        let s = &f.spec;
        if let Some(i) = f.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at index {i}")));
        }
        let ext = s.extent();
        let radius = (ext[0] * ext[0] + ext[1] * ext[1] + ext[2] * ext[2]).sqrt();
        let dims: [usize; 3] = std::array::from_fn(|a| {
            let need = match padding {
                Padding::AliasFree => s.dims[a] - 1 + (radius / s.spacing[a]).ceil() as usize + 1,
                Padding::Double => 2 * s.dims[a],
            };
            next_fast_len(need)
        });
        let n = dims[0] * dims[1] * dims[2];
        let mut data = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..s.dims[2] {
            for j in 0..s.dims[1] {
                for i in 0..s.dims[0] {
                    data[i + dims[0] * (j + dims[1] * k)] = Complex64::new(f.values[s.index(i, j, k)], 0.0);
                }
            }
        }
        fft3(&mut data, dims, false);
        let dv = s.cell_volume();
        // Phase for the grid origin so that ρ̃ is the transform of ρ in absolute coordinates.
        let sp = s.spacing;
        let o = s.origin;
        data.par_iter_mut().enumerate().for_each(|(idx, c)| {
            let p = wavevector(dims, sp, idx);
            let ph = -(p[0] * o[0] + p[1] * o[1] + p[2] * o[2]);
            *c *= Complex64::from_polar(dv, ph);
        });
        Ok(SpectralField { dims, spacing: s.spacing, coeffs: data, padding, radius, source_dims: s.dims })
    }

    /// Samples ρ on its default grid, checks the support and transforms.
    pub fn from_density(rho: &Density) -> Result<Self> {
        Self::from_density_on(rho, None, Padding::AliasFree)
    }

    pub fn from_density_on(rho: &Density, grid: Option<&GridSpec>, padding: Padding) -> Result<Self> {
        rho.validate()?;
        let f = rho.sample(grid)?;
        check_support(&f)?;
        Self::from_field(&f, padding)
    }

    pub fn padded_volume(&self) -> f64 {
        (0..3).map(|a| self.dims[a] as f64 * self.spacing[a]).product()
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        wavevector(self.dims, self.spacing, idx)
    }

    /// `max_p |ρ̃_p − conj(ρ̃_{−p})| / max_p |ρ̃_p|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let d = self.dims;
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let worst = (0..self.coeffs.len())
            .into_par_iter()
            .map(|idx| {
                let i = idx % d[0];
                let j = (idx / d[0]) % d[1];
                let k = idx / (d[0] * d[1]);
                let m = (d[0] - i) % d[0] + d[0] * ((d[1] - j) % d[1] + d[1] * ((d[2] - k) % d[2]));
                (self.coeffs[idx] - self.coeffs[m].conj()).norm()
            })
            .reduce(|| 0.0, f64::max);
        // The origin phase makes ρ̃ Hermitian only up to rounding in the phase.
        worst / scale
    }

    /// `(1/(2V)) Σ_p |ρ̃_p|² K̂(|p + q|)`, the direct term of `e^{iq·x}ρ`.
    pub fn shifted_hartree(&self, q: [f64; 3]) -> f64 {
        let v = self.padded_volume();
        let r = self.radius;
        sum_map(self.coeffs.len(), |idx| {
            let p = self.wavevector(idx);
            let s = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
            self.coeffs[idx].norm_sqr() * truncated_kernel((s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt(), r)
        }) / (2.0 * v)
    }

    pub fn hartree(&self) -> f64 {
        self.shifted_hartree([0.0; 3])
    }

    /// `∫|ρ̂(p)|²/|p − q|² dp` in the unitary convention.
    pub fn coulomb_shifted(&self, q: [f64; 3]) -> f64 {
        self.shifted_hartree([-q[0], -q[1], -q[2]]) / (2.0 * PI)
    }
}

fn wavevector(dims: [usize; 3], spacing: [f64; 3], idx: usize) -> [f64; 3] {
    let c = [idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])];
    std::array::from_fn(|a| {
        let n = dims[a];
        let m = if c[a] <= n / 2 { c[a] as f64 } else { c[a] as f64 - n as f64 };
        2.0 * PI * m / (n as f64 * spacing[a])
    })
}

/// `D(ρ) = ½∫∫ ρ(x)ρ(y)/|x − y|`.
pub fn hartree(rho: &Density) -> Result<f64> {
    hartree_with(rho, None, Padding::AliasFree)
}

pub fn hartree_with(rho: &Density, grid: Option<&GridSpec>, padding: Padding) -> Result<f64> {
    if let Density::Analytic(crate::field::Family::Gaussian { mass, .. }) = rho {
        if *mass == 0.0 {
            return Ok(0.0);
        }
    }
    let coarse;
    let grid = match (grid, rho) {
        (None, Density::Analytic(crate::field::Family::SmearedTetra { ell, delta, .. })) => {
            // The potential energy is insensitive to the smearing layer; resolve it coarsely.
            let h = (delta / 5.0).max(ell / TETRA_HARTREE_MAX_CELLS as f64);
            coarse = crate::field::smeared_tetra_grid(*ell, *delta, h);
            Some(&coarse)
        }
        _ => grid,
    };
    Ok(SpectralField::from_density_on(rho, grid, padding)?.hartree())
}

/// Cells per tile edge length for the Hartree grid of a smeared tetrahedron.
pub const TETRA_HARTREE_MAX_CELLS: usize = 96;

/// Direct term of a signed charge distribution on a grid.
pub fn hartree_signed(f: &ScalarField, padding: Padding) -> Result<f64> {
    check_support(f)?;
    Ok(SpectralField::from_field(f, padding)?.hartree())
}

// ---------------------------------------------------------------------------
// Annulus convolution.

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return param(format!("alpha must lie in (0, 1/2], got {alpha}"));
    }
    Ok(())
}

/// `(1_{A_α} ∗ |·|^{-2})(x)` at `|x| = r`, `A_α = {1/(1+α) < |y| < 1/(1−α)}`.
///
/// Evaluates `(2π/r) ∫_a^b s log((s+r)/|s−r|) ds`; the logarithmic
/// singularity at `s = r` is removed by `s = r ∓ e^{-u}` on each side.
pub fn annulus_conv(r: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(r >= 0.0 && r.is_finite()) {
        return param(format!("r must be a finite non-negative real, got {r}"));
    }
    let (a, b) = (1.0 / (1.0 + alpha), 1.0 / (1.0 - alpha));
    if r < 1e-7 * a {
        // s log((s+r)/(s-r)) = 2r + 2r³/(3s²) + …
        return Ok(4.0 * PI * (b - a) + 4.0 * PI * r * r / 3.0 * (1.0 / a - 1.0 / b));
    }
    let tol = 1e-13;
    let smooth = |lo: f64, hi: f64| {
        quad::adaptive(|s| s * ((s + r) / (s - r).abs()).ln(), lo, hi, tol, 1e-300).value
    };
    const U_SPAN: f64 = 45.0;
    let v = if r <= a || r >= b {
        smooth(a, b)
    } else {
        // s = r − e^{-u} on [a, r), s = r + e^{-u} on (r, b].
        let left = {
            let u0 = -(r - a).ln();
            quad::adaptive(
                |u| {
                    let e = (-u).exp();
                    let s = r - e;
                    s * ((s + r).ln() + u) * e
                },
                u0,
                u0 + U_SPAN,
                tol,
                1e-300,
            )
            .value
        };
        let right = {
            let u0 = -(b - r).ln();
            quad::adaptive(
                |u| {
                    let e = (-u).exp();
                    let s = r + e;
                    s * ((s + r).ln() + u) * e
                },
                u0,
                u0 + U_SPAN,
                tol,
                1e-300,
            )
            .value
        };
        left + right
    };
    Ok(2.0 * PI / r * v)
}

/// [`annulus_conv`] evaluated in spherical coordinates centred at `x`:
/// `2π ∫ |{μ : a² < r² + t² + 2rtμ < b²}| dt`. Independent cross-check.
pub fn annulus_conv_direct(r: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (a, b) = (1.0 / (1.0 + alpha), 1.0 / (1.0 - alpha));
    let len = |t: f64| {
        if r == 0.0 {
            return if t > a && t < b { 2.0 } else { 0.0 };
        }
        let lo = ((a * a - r * r - t * t) / (2.0 * r * t)).max(-1.0);
        let hi = ((b * b - r * r - t * t) / (2.0 * r * t)).min(1.0);
        (hi - lo).max(0.0)
    };
    let mut br = vec![0.0, (r - a).abs(), r + a, (r - b).abs(), r + b];
    br.sort_by(f64::total_cmp);
    br.dedup();
    Ok(2.0 * PI * quad::adaptive_split(len, &br, 1e-10, 1e-14).value)
}

#[derive(Clone, Copy, Debug)]
pub struct AnnulusSup {
    pub sup: f64,
    pub ratio: f64,
    pub argmax: f64,
}

/// Maximum of [`annulus_conv`] over `r_grid` and `sup/(α log(1/α))`.
pub fn annulus_sup(alpha: f64, r_grid: &[f64]) -> Result<AnnulusSup> {
    check_alpha(alpha)?;
    if r_grid.is_empty() {
        return param("r grid is empty");
    }
    let vals = r_grid.par_iter().map(|&r| annulus_conv(r, alpha)).collect::<Result<Vec<f64>>>()?;
    let (i, &sup) = vals.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap();
    Ok(AnnulusSup { sup, ratio: sup / (alpha * (1.0 / alpha).ln()), argmax: r_grid[i] })
}

/// `[0, r_max]` with the given spacing, plus the two annulus radii.
pub fn default_r_grid(alpha: f64, r_max: f64, step: f64) -> Vec<f64> {
    let n = (r_max / step).round() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    g.push(1.0 / (1.0 + alpha));
    g.push(1.0 / (1.0 - alpha));
    g.push(1.0);
    g.sort_by(f64::total_cmp);
    g
}

// ---------------------------------------------------------------------------
// Periodic localization.

/// Fourier coefficients of a real `ℓℤ³`-periodic function, keyed by `m` with `k = 2πm/ℓ`.
pub type PeriodicCoeffs = BTreeMap<[i64; 3], Complex64>;

fn check_hermitian(c: &PeriodicCoeffs) -> Result<()> {
    let scale = c.values().map(|v| v.norm()).fold(0.0, f64::max);
    for (m, v) in c {
        let neg = [-m[0], -m[1], -m[2]];
        let w = c.get(&neg).copied().unwrap_or_default();
        if (v - w.conj()).norm() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return param(format!("coefficients are not Hermitian at m = {m:?}"));
        }
    }
    Ok(())
}

/// Evaluates `f(x) = Σ_m c_m e^{i 2π m·x/ℓ}` (real part).
pub fn eval_periodic(c: &PeriodicCoeffs, ell: f64, x: [f64; 3]) -> f64 {
    c.iter()
        .map(|(m, v)| {
            let ph = 2.0 * PI / ell * (m[0] as f64 * x[0] + m[1] as f64 * x[1] + m[2] as f64 * x[2]);
            (v * Complex64::from_polar(1.0, ph)).re
        })
        .sum()
}

/// `(1/ℓ³)∫_{C_ℓ} D(f(·−τ)ρ) dτ` (tensor Gauss rule in τ) and
/// `Σ_m |c_m|² D(e^{ik_m·x}ρ)` (spectral).
pub fn periodic_localization_identity(
    rho: &Density,
    grid: Option<&GridSpec>,
    coeffs: &PeriodicCoeffs,
    ell: f64,
) -> Result<(f64, f64)> {
    if !(ell > 0.0) {
        return param("ell must be positive");
    }
    if coeffs.is_empty() {
        return param("no Fourier coefficients given");
    }
    check_hermitian(coeffs)?;
    rho.validate()?;
    let base = rho.sample(grid)?;
    check_support(&base)?;
    let spec = SpectralField::from_field(&base, Padding::AliasFree)?;
    let rhs = crate::summation::sum_iter(coeffs.iter().map(|(m, c)| {
        let k = [2.0 * PI * m[0] as f64 / ell, 2.0 * PI * m[1] as f64 / ell, 2.0 * PI * m[2] as f64 / ell];
        c.norm_sqr() * spec.shifted_hartree(k)
    }));

    // Only axes along which some mode varies need τ-quadrature.
    let mut nodes: [Vec<(f64, f64)>; 3] = Default::default();
    for a in 0..3 {
        let mmax = coeffs.keys().map(|m| m[a].unsigned_abs()).max().unwrap_or(0) as usize;
        nodes[a] = if mmax == 0 {
            vec![(0.0, 1.0)]
        } else {
            let n = (8 + 8 * mmax).max(8);
            let (x, w) = quad::gauss_legendre(n);
            x.iter().zip(&w).map(|(xi, wi)| (0.5 * ell * xi, 0.5 * wi)).collect()
        };
    }
    let mut taus = Vec::new();
    for &(tx, wx) in &nodes[0] {
        for &(ty, wy) in &nodes[1] {
            for &(tz, wz) in &nodes[2] {
                taus.push(([tx, ty, tz], wx * wy * wz));
            }
        }
    }
    let mut vals = Vec::with_capacity(taus.len());
    for (tau, w) in &taus {
        let s = &base.spec;
        let vals_tau: Vec<f64> = (0..s.len())
            .into_par_iter()
            .map(|i| {
                let x = s.point(i);
                base.values[i] * eval_periodic(coeffs, ell, [x[0] - tau[0], x[1] - tau[1], x[2] - tau[2]])
            })
            .collect();
        let f = ScalarField::new(s.clone(), vals_tau)?;
        vals.push(w * SpectralField::from_field(&f, Padding::AliasFree)?.hartree());
    }
    let lhs = crate::summation::sum(&vals);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn antiderivative_oracle(r: f64, alpha: f64) -> f64 {
        // ∫(u ± r) log|u| du = u²/2 log|u| − u²/4 ± r(u log|u| − u)
        let p = |u: f64, sg: f64| {
            let l = if u == 0.0 { 0.0 } else { u.abs().ln() };
            0.5 * u * u * l - 0.25 * u * u + sg * r * (u * l - u)
        };
        let (a, b) = (1.0 / (1.0 + alpha), 1.0 / (1.0 - alpha));
        let plus = p(b + r, -1.0) - p(a + r, -1.0);
        let minus = p(b - r, 1.0) - p(a - r, 1.0);
        2.0 * PI / r * (plus - minus)
    }

    #[test]
    fn annulus_matches_antiderivative() {
        for &alpha in &[0.5, 0.25, 0.1, 0.02] {
            for &r in &[0.01, 0.3, 0.8, 0.95, 1.0, 1.02, 1.5, 4.0, 8.0] {
                let v = annulus_conv(r, alpha).unwrap();
                let o = antiderivative_oracle(r, alpha);
                assert!((v - o).abs() <= 1e-9 * o.abs(), "r={r} α={alpha}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn annulus_at_origin() {
        let v = annulus_conv(0.0, 0.25).unwrap();
        assert!((v - 8.0 * PI * 0.25 / 0.9375).abs() < 1e-12);
        assert!(annulus_conv(1.0, 0.6).is_err());
    }

    #[test]
    fn fast_len() {
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(89), 90);
        assert_eq!(next_fast_len(91), 96);
    }

    #[test]
    fn fft_round_trip() {
        let dims = [4, 6, 5];
        let orig: Vec<Complex64> = (0..120).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut d = orig.clone();
        fft3(&mut d, dims, false);
        fft3(&mut d, dims, true);
        for (a, b) in orig.iter().zip(&d) {
            assert!((a - b / 120.0).norm() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut c = PeriodicCoeffs::new();
        c.insert([1, 0, 0], Complex64::new(1.0, 0.0));
        assert!(matches!(check_hermitian(&c), Err(Error::Parameter(_))));
        c.insert([-1, 0, 0], Complex64::new(1.0, 0.0));
        assert!(check_hermitian(&c).is_ok());
    }
}

//! Exponential sums f(z) = Σ a_k exp(ω_n^k z) and their basic analytic
//! machinery: compensated evaluation, derivatives, the relative-error
//! functions ψ_p against a dominant term, maximum modulus on circles, and
//! the tower iteration of the maximum modulus.

use crate::error::{Error, Result};
use crate::tower::{Rounding, TowerPair};
use num_complex::Complex64;
use serde::Serialize;

/// Largest real part of a term exponent we evaluate directly; beyond this
/// the caller must use `log_evaluate`.
pub const EXP_RE_LIMIT: f64 = 700.0;

/// An element of the family E_n: order n with nonzero coefficients a_0..a_{n-1}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpSum {
    n: usize,
    coeffs: Vec<Complex64>,
    #[serde(skip)]
    omega_powers: Vec<Complex64>,
}

/// ω_n^k with quarter turns made exact, so the cosine family evaluates to
/// cos z + cosh z without spurious imaginary dust.
fn root_of_unity(k: usize, n: usize) -> Complex64 {
    let k = k % n;
    if (4 * k).is_multiple_of(n) {
        match 4 * k / n {
            0 => return Complex64::new(1.0, 0.0),
            1 => return Complex64::new(0.0, 1.0),
            2 => return Complex64::new(-1.0, 0.0),
            3 => return Complex64::new(0.0, -1.0),
            _ => {}
        }
    }
    let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
    Complex64::new(theta.cos(), theta.sin())
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

/// Compensated complex sum (Kahan-Babushka-Neumaier on both components).
fn compensated_sum(terms: impl Iterator<Item = Complex64>) -> Complex64 {
    let (mut re, mut cre, mut im, mut cim) = (0.0, 0.0, 0.0, 0.0);
    for t in terms {
        neumaier_add(&mut re, &mut cre, t.re);
        neumaier_add(&mut im, &mut cim, t.im);
    }
    Complex64::new(re + cre, im + cim)
}

impl ExpSum {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Precondition("at least one coefficient".into()));
        }
        if let Some(bad) = coeffs
            .iter()
            .position(|a| a.norm() == 0.0 || !a.is_finite())
        {
            return Err(Error::Precondition(format!(
                "coefficient a_{bad} must be finite and nonzero"
            )));
        }
        let n = coeffs.len();
        let omega_powers = (0..n).map(|k| root_of_unity(k, n)).collect();
        Ok(ExpSum {
            n,
            coeffs,
            omega_powers,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn omega_pow(&self, k: usize) -> Complex64 {
        self.omega_powers[k % self.n]
    }

    pub fn min_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|a| a.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn sum_abs_coeffs(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm()).sum()
    }

    fn check_in_range(&self, z: Complex64) -> Result<()> {
        for k in 0..self.n {
            if (self.omega_powers[k] * z).re > EXP_RE_LIMIT {
                return Err(Error::Overflow(format!(
                    "Re(omega^{k} z) = {} exceeds {EXP_RE_LIMIT}",
                    (self.omega_powers[k] * z).re
                )));
            }
        }
        Ok(())
    }

    /// f(z) by compensated summation of the n exponential terms.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        self.check_in_range(z)?;
        Ok(compensated_sum((0..self.n).map(|k| {
            self.coeffs[k] * (self.omega_powers[k] * z).exp()
        })))
    }

    /// Index of the term with the largest modulus at z.
    pub fn dominant_term(&self, z: Complex64) -> usize {
        (0..self.n)
            .max_by(|&a, &b| {
                let fa = self.coeffs[a].norm().ln() + (self.omega_powers[a] * z).re;
                let fb = self.coeffs[b].norm().ln() + (self.omega_powers[b] * z).re;
                fa.total_cmp(&fb)
            })
            .unwrap()
    }

    /// A complex logarithm of f(z), computed from the dominant term so it
    /// never overflows: log a_d + ω^d z + log(1 + Σ ratios). The real part is
    /// log|f(z)| (may be -inf at a zero of f).
    pub fn log_evaluate(&self, z: Complex64) -> Complex64 {
        let d = self.dominant_term(z);
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..self.n {
            if k != d {
                let ratio = self.coeffs[k] / self.coeffs[d];
                s += ratio * ((self.omega_powers[k] - self.omega_powers[d]) * z).exp();
            }
        }
        self.coeffs[d].ln() + self.omega_powers[d] * z + (Complex64::new(1.0, 0.0) + s).ln()
    }

    /// log|f(z)|, overflow-free.
    pub fn log_abs(&self, z: Complex64) -> f64 {
        self.log_evaluate(z).re
    }

    /// First or second derivative; `order` must be 1 or 2.
    pub fn derivative(&self, z: Complex64, order: u32) -> Result<Complex64> {
        if order != 1 && order != 2 {
            return Err(Error::Precondition(format!(
                "derivative order {order} not in {{1,2}}"
            )));
        }
        self.check_in_range(z)?;
        Ok(compensated_sum((0..self.n).map(|k| {
            let w = self.omega_powers[k];
            let pow = if order == 1 { w } else { w * w };
            self.coeffs[k] * pow * (w * z).exp()
        })))
    }

    /// ψ_p(z): the other n-1 terms summed relative to term p. Never formed by
    /// subtracting 1 from a quotient.
    pub fn psi(&self, p: usize, z: Complex64) -> Result<Complex64> {
        Ok(self.psi_jet(p, z)?[0])
    }

    /// (ψ_p, ψ_p', ψ_p'') at z.
    pub fn psi_jet(&self, p: usize, z: Complex64) -> Result<[Complex64; 3]> {
        if p >= self.n {
            return Err(Error::Precondition(format!("psi index {p} out of range")));
        }
        let wp = self.omega_powers[p];
        let mut t0 = Vec::with_capacity(self.n - 1);
        let mut t1 = Vec::with_capacity(self.n - 1);
        let mut t2 = Vec::with_capacity(self.n - 1);
        for k in 0..self.n {
            if k == p {
                continue;
            }
            let dw = self.omega_powers[k] - wp;
            let ex = dw * z;
            if ex.re > EXP_RE_LIMIT {
                return Err(Error::Overflow(format!(
                    "psi ratio exponent {} exceeds {EXP_RE_LIMIT}",
                    ex.re
                )));
            }
            let base = (self.coeffs[k] / self.coeffs[p]) * ex.exp();
            t0.push(base);
            t1.push(base * dw);
            t2.push(base * dw * dw);
        }
        Ok([
            compensated_sum(t0.into_iter()),
            compensated_sum(t1.into_iter()),
            compensated_sum(t2.into_iter()),
        ])
    }

    /// |z f'(z)/f(z)|, computed from the dominant-term jet so it is defined
    /// for any z where f(z) != 0, however large.
    pub fn log_derivative_factor(&self, z: Complex64) -> Result<f64> {
        let d = self.dominant_term(z);
        let [psi, dpsi, _] = self.psi_jet(d, z)?;
        let one = Complex64::new(1.0, 0.0);
        let denom = one + psi;
        if denom.norm() == 0.0 {
            return Err(Error::ZeroValue(z));
        }
        let wd = self.omega_powers[d];
        Ok(z.norm() * ((wd * (one + psi) + dpsi) / denom).norm())
    }

    /// |f''(z)/f'(z)| via the dominant-term jet; errors if f'(z) = 0.
    pub fn nonlinearity_ratio(&self, z: Complex64) -> Result<f64> {
        let d = self.dominant_term(z);
        let [psi, dpsi, ddpsi] = self.psi_jet(d, z)?;
        let one = Complex64::new(1.0, 0.0);
        let wd = self.omega_powers[d];
        let f1 = wd * (one + psi) + dpsi;
        if f1.norm() == 0.0 {
            return Err(Error::DerivativeZero(z));
        }
        let f2 = wd * wd * (one + psi) + 2.0 * wd * dpsi + ddpsi;
        Ok(f2.norm() / f1.norm())
    }

    /// log|f'(z)|, overflow-free.
    pub fn log_abs_derivative(&self, z: Complex64) -> f64 {
        let d = self.dominant_term(z);
        let [psi, dpsi, _] = self
            .psi_jet(d, z)
            .expect("ratio exponents are non-positive");
        let one = Complex64::new(1.0, 0.0);
        let wd = self.omega_powers[d];
        self.coeffs[d].norm().ln() + (wd * z).re + (wd * (one + psi) + dpsi).norm().ln()
    }
}

/// Configuration for the circle maximum search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MaxModConfig {
    pub samples: usize,
    pub angle_tol: f64,
}

impl Default for MaxModConfig {
    fn default() -> Self {
        MaxModConfig {
            samples: 4096,
            angle_tol: 1e-12,
        }
    }
}

fn golden_max(mut a: f64, mut b: f64, tol: f64, g: impl Fn(f64) -> f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    let mut best = gc.max(gd);
    while b - a > tol {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INVPHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INVPHI * (b - a);
            gd = g(d);
        }
        best = best.max(gc.max(gd));
    }
    best
}

fn circle_max(samples: usize, tol: f64, g: impl Fn(f64) -> f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let step = two_pi / samples as f64;
    let mut best_j = 0usize;
    let mut best = f64::NEG_INFINITY;
    for j in 0..samples {
        let v = g(j as f64 * step);
        if v > best {
            best = v;
            best_j = j;
        }
    }
    let a = (best_j as f64 - 1.0) * step;
    let b = (best_j as f64 + 1.0) * step;
    let refined = golden_max(a, b, tol, g);
    refined.max(best)
}

/// M(r, f) by dense angular sampling plus golden-section refinement. The
/// result is guaranteed >= the sampled maximum. Errors when e^r overflows.
pub fn max_modulus(f: &ExpSum, r: f64) -> Result<f64> {
    max_modulus_with(f, r, &MaxModConfig::default())
}

pub fn max_modulus_with(f: &ExpSum, r: f64, cfg: &MaxModConfig) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Precondition(format!(
            "radius {r} must be nonnegative"
        )));
    }
    if r > EXP_RE_LIMIT {
        return Err(Error::Overflow(format!(
            "circle radius {r} exceeds {EXP_RE_LIMIT}"
        )));
    }
    Ok(circle_max(cfg.samples, cfg.angle_tol, |theta| {
        f.evaluate(r * Complex64::cis(theta))
            .map(|v| v.norm())
            .unwrap_or(f64::NEG_INFINITY)
    }))
}

/// log M(r, f) via dominant-term log evaluation; valid for radii far beyond
/// float range of e^r.
pub fn max_modulus_log(f: &ExpSum, r: f64) -> f64 {
    max_modulus_log_with(f, r, &MaxModConfig::default())
}

pub fn max_modulus_log_with(f: &ExpSum, r: f64, cfg: &MaxModConfig) -> f64 {
    circle_max(cfg.samples, cfg.angle_tol, |theta| {
        f.log_abs(r * Complex64::cis(theta))
    })
}

/// (r + log(min|a_k|/2), r + log Σ|a_k|): lower and upper bounds for
/// log M(r, f). The lower bound is only certified for r at or above the
/// sector-estimate threshold; treat it as heuristic below that.
pub fn max_modulus_log_bounds(f: &ExpSum, r: f64) -> (f64, f64) {
    let (a1, a2) = log_bound_offsets(f);
    (r + a1, r + a2)
}

/// The additive offsets (α₁, α₂) with α₁ = log(min|a_k|/2), α₂ = log Σ|a_k|.
pub fn log_bound_offsets(f: &ExpSum) -> (f64, f64) {
    ((f.min_abs_coeff() / 2.0).ln(), f.sum_abs_coeffs().ln())
}

/// Smallest sampled r at which log M(r) sits inside the myMeq bounds; the
/// bounds carry no constructive onset, so we report what sampling shows.
pub fn log_bounds_onset(f: &ExpSum, r_max: f64) -> Option<f64> {
    let mut r = 1.0f64;
    while r <= r_max {
        let (lo, hi) = max_modulus_log_bounds(f, r);
        let lm = max_modulus_log(f, r);
        if lm >= lo && lm <= hi {
            return Some(r);
        }
        r += 1.0;
    }
    None
}

/// Tower tracks for M^n(R, f), n = 1..=depth. Levels are computed exactly
/// (dense sampling) while e^r stays in float range; afterwards the lower
/// track advances by r + α₁ and the upper by r + α₂ in log space, with
/// directed rounding.
pub fn iterate_max_modulus_tower(f: &ExpSum, r0: f64, depth: usize) -> Result<Vec<TowerPair>> {
    iterate_mu_tower(f, r0, 1.0, depth)
}

/// Tower tracks for μ_ε^n(R) with μ_ε(r) = M(εr, f). `eps` = 1 recovers the
/// plain maximum-modulus iteration.
pub fn iterate_mu_tower(f: &ExpSum, r0: f64, eps: f64, depth: usize) -> Result<Vec<TowerPair>> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be >= 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    if r0 * eps > EXP_RE_LIMIT {
        return Err(Error::Overflow(format!(
            "eps*R = {} exceeds {EXP_RE_LIMIT}",
            eps * r0
        )));
    }
    let m1 = max_modulus(f, eps * r0)?;
    if m1 <= r0 {
        if eps == 1.0 {
            return Err(Error::NotExpanding(r0));
        }
        return Err(Error::MuNotExpanding(r0));
    }
    let (a1, a2) = log_bound_offsets(f);
    let mut levels = Vec::with_capacity(depth);
    let mut cur = TowerPair::exact(m1);
    levels.push(cur);
    for _ in 1..depth {
        cur = match cur.lower.to_f64_capped(EXP_RE_LIMIT / eps) {
            Some(v) if cur.lower == cur.upper => TowerPair::exact(max_modulus(f, eps * v)?),
            _ => TowerPair {
                lower: cur.lower.exp_scale_shift(eps, a1, Rounding::Down),
                upper: cur.upper.exp_scale_shift(eps, a2, Rounding::Up),
            },
        };
        levels.push(cur);
    }
    Ok(levels)
}

/// Tower track for β^n(ν) with β(r) = (ε'/2) e^r; `lower` is rounded down,
/// `upper` up, so comparisons against the M tracks are certified.
pub fn iterate_beta_tower(nu: f64, eps_prime: f64, depth: usize) -> Vec<TowerPair> {
    let c = (eps_prime / 2.0).ln();
    let mut levels = Vec::with_capacity(depth);
    let mut cur = TowerPair::exact(nu);
    for _ in 0..depth {
        cur = TowerPair {
            lower: cur.lower.exp_scale_shift(1.0, c, Rounding::Down),
            upper: cur.upper.exp_scale_shift(1.0, c, Rounding::Up),
        };
        levels.push(cur);
    }
    levels
}

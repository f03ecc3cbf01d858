//! The box-refinement construction behind the positive-area result: a σ-box
//! seed inside R(ν₀), the schedule ν_k = α^k(ν₀) with α(r) = e^{ε₀ r}/2,
//! Monte Carlo survival fractions for the refinement collections, the area
//! lower-bound product, and per-point Julia ∧ fast-escape certificates.

use crate::dynamics::{Classification, Label};
use crate::error::{Error, Result};
use crate::estimates::{
    eps0_default, find_nu_prime, tau_floor, VerifyOptions, ETA_DEFAULT, SIGMA_DEFAULT,
};
use crate::expsum::{max_modulus, max_modulus_log, ExpSum};
use crate::geometry::{Region, RegionDecomposition};
use crate::sampling::{chunked_map_fold, wilson_interval};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Grid box B_{m,m'} = (mσ, (m+1)σ) × (m'σ, (m'+1)σ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoxId {
    pub m: i64,
    pub mp: i64,
}

impl BoxId {
    pub fn of_point(z: Complex64, sigma: f64) -> Self {
        BoxId {
            m: (z.re / sigma).floor() as i64,
            mp: (z.im / sigma).floor() as i64,
        }
    }

    pub fn center(&self, sigma: f64) -> Complex64 {
        Complex64::new(
            (self.m as f64 + 0.5) * sigma,
            (self.mp as f64 + 0.5) * sigma,
        )
    }

    pub fn corners(&self, sigma: f64) -> [Complex64; 4] {
        let x = self.m as f64 * sigma;
        let y = self.mp as f64 * sigma;
        [
            Complex64::new(x, y),
            Complex64::new(x + sigma, y),
            Complex64::new(x + sigma, y + sigma),
            Complex64::new(x, y + sigma),
        ]
    }

    pub fn point(&self, u: f64, v: f64, sigma: f64) -> Complex64 {
        Complex64::new((self.m as f64 + u) * sigma, (self.mp as f64 + v) * sigma)
    }

    pub fn contains(&self, z: Complex64, sigma: f64) -> bool {
        let u = z.re / sigma - self.m as f64;
        let v = z.im / sigma - self.mp as f64;
        (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)
    }
}

/// How the seed box is picked inside R(ν₀).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeedBoxPolicy {
    /// Image argument range centered on a strip axis, so the loss mechanism
    /// is active and its e^{-ν₀} scaling measurable.
    StripAligned,
    /// Just above the positive real axis.
    NearAxis,
}

/// The constant pack driving the refinement construction. Constructing one
/// through `new` or `make_params` enforces every gate.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementParams {
    sigma: f64,
    eta: f64,
    tau: f64,
    eps0: f64,
    nu_prime: f64,
    nu0: f64,
    /// Quantification of "large compared to σ and τ" in the ν₀ gate.
    large_multiple: f64,
    seed: u64,
    seed_box: BoxId,
    seed_box_policy: SeedBoxPolicy,
}

impl RefinementParams {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn nu_prime(&self) -> f64 {
        self.nu_prime
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn seed_box(&self) -> BoxId {
        self.seed_box
    }

    pub fn seed_box_policy(&self) -> SeedBoxPolicy {
        self.seed_box_policy
    }

    /// α(r) = e^{ε₀ r} / 2.
    pub fn alpha(&self, r: f64) -> f64 {
        0.5 * (self.eps0 * r).exp()
    }

    /// ν_k; +inf once the schedule leaves float range.
    pub fn nu_level(&self, k: usize) -> f64 {
        let mut v = self.nu0;
        for _ in 0..k {
            v = self.alpha(v);
        }
        v
    }

    /// log ν_k, good a level or two past float overflow of ν_k itself.
    pub fn log_nu_level(&self, k: usize) -> f64 {
        let mut log_v = self.nu0.ln();
        for _ in 0..k {
            if log_v > 700.0 {
                return f64::INFINITY;
            }
            log_v = self.eps0 * log_v.exp() - std::f64::consts::LN_2;
        }
        log_v
    }

    pub fn new(
        f: &ExpSum,
        sigma: f64,
        eta: f64,
        tau: f64,
        eps0: f64,
        nu_prime: f64,
        nu0: f64,
        large_multiple: f64,
        seed: u64,
        policy: SeedBoxPolicy,
    ) -> Result<Self> {
        let n = f.order();
        if n < 3 {
            return Err(Error::Precondition(format!(
                "refinement requires n >= 3, got {n}"
            )));
        }
        if !(sigma > 0.0 && sigma < 1.0 / (8.0 * std::f64::consts::SQRT_2)) {
            return Err(Error::ParamSearchFailed(format!(
                "sigma = {sigma} outside (0, 1/(8sqrt2))"
            )));
        }
        if !(eta > 4.0 / sigma) {
            return Err(Error::ParamSearchFailed(format!("eta = {eta} <= 4/sigma")));
        }
        let tau_min = tau_floor(f, eta);
        if tau < tau_min * (1.0 - 1e-12) {
            return Err(Error::ParamSearchFailed(format!(
                "tau = {tau} below floor {tau_min}"
            )));
        }
        let half_cos = 0.5 * (std::f64::consts::PI / n as f64).cos();
        if !(eps0 > 0.0 && eps0 < half_cos) {
            return Err(Error::ParamSearchFailed(format!(
                "eps0 = {eps0} outside (0, cos(pi/n)/2)"
            )));
        }
        let mut params = RefinementParams {
            sigma,
            eta,
            tau,
            eps0,
            nu_prime,
            nu0,
            large_multiple,
            seed,
            seed_box: BoxId { m: 0, mp: 0 },
            seed_box_policy: policy,
        };
        params.check_nu0_gates(f)?;
        params.seed_box = choose_seed_box(f, &params, policy)?;
        Ok(params)
    }

    /// The four ν₀ conditions.
    fn check_nu0_gates(&self, f: &ExpSum) -> Result<()> {
        if self.nu0 < self.nu_prime {
            return Err(Error::ParamSearchFailed(format!(
                "nu0 = {} below nu' = {}",
                self.nu0, self.nu_prime
            )));
        }
        if !(self.alpha(self.nu0) > self.nu0) {
            return Err(Error::ParamSearchFailed(format!(
                "alpha(nu0) = {} <= nu0 = {}",
                self.alpha(self.nu0),
                self.nu0
            )));
        }
        let image_side = 0.5 * self.sigma * self.nu0.exp() * f.min_abs_coeff();
        let needed = self.large_multiple * self.sigma.max(self.tau);
        if !(image_side >= needed) {
            return Err(Error::ParamSearchFailed(format!(
                "box image side {image_side} not >= {}x max(sigma, tau)",
                self.large_multiple
            )));
        }
        // mu_eps0(r) > r on a sampled range above nu0
        let r_hi = (4.0 * self.nu0).max(200.0);
        for i in 0..=32 {
            let r = self.nu0 * (r_hi / self.nu0).powf(i as f64 / 32.0);
            if max_modulus_log(f, self.eps0 * r) <= r.ln() {
                return Err(Error::MuNotExpanding(r));
            }
        }
        Ok(())
    }

    /// Test-only escape hatch for degenerate-schedule experiments; the box
    /// is image-strip-aligned so the loss terms are visible.
    #[cfg(test)]
    pub(crate) fn unchecked(f: &ExpSum, sigma: f64, eta: f64, nu0: f64, seed: u64) -> Self {
        let tau = tau_floor(f, eta);
        let n = f.order() as f64;
        let target = std::f64::consts::PI / n - f.coeffs()[0].arg();
        let mut p = RefinementParams {
            sigma,
            eta,
            tau,
            eps0: eps0_default(f.order()),
            nu_prime: nu0,
            nu0,
            large_multiple: 0.0,
            seed,
            seed_box: BoxId { m: 0, mp: 0 },
            seed_box_policy: SeedBoxPolicy::StripAligned,
        };
        p.seed_box = BoxId {
            m: ((nu0 + 1.0) / sigma).ceil() as i64,
            mp: ((target - sigma / 2.0) / sigma).round() as i64,
        };
        p
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamOverrides {
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub tau: Option<f64>,
    pub eps0: Option<f64>,
    pub nu_prime: Option<f64>,
    pub nu0: Option<f64>,
    pub large_multiple: Option<f64>,
    pub search_samples: usize,
    pub workers: usize,
}

impl Default for ParamOverrides {
    fn default() -> Self {
        ParamOverrides {
            sigma: None,
            eta: None,
            tau: None,
            eps0: None,
            nu_prime: None,
            nu0: None,
            large_multiple: None,
            search_samples: 1500,
            workers: 0,
        }
    }
}

/// Fill defaults, search ν' if not supplied, then search the least ν₀ passing
/// all four gates (unless overridden, in which case the override is gated).
pub fn make_params(f: &ExpSum, seed: u64, ov: &ParamOverrides) -> Result<RefinementParams> {
    let n = f.order();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "make_params requires n >= 3, got {n}"
        )));
    }
    let sigma = ov.sigma.unwrap_or(SIGMA_DEFAULT);
    let eta = ov.eta.unwrap_or(ETA_DEFAULT);
    let tau = ov.tau.unwrap_or_else(|| tau_floor(f, eta));
    let eps0 = ov.eps0.unwrap_or_else(|| eps0_default(n));
    let large_multiple = ov.large_multiple.unwrap_or(100.0);
    let nu_prime = match ov.nu_prime {
        Some(v) => v,
        None => {
            let opts = VerifyOptions {
                tau: Some(tau),
                eps0: Some(eps0),
                workers: ov.workers,
            };
            find_nu_prime(f, eta, tau, ov.search_samples, seed, &opts)?.0
        }
    };
    let build = |nu0: f64| {
        RefinementParams::new(
            f,
            sigma,
            eta,
            tau,
            eps0,
            nu_prime,
            nu0,
            large_multiple,
            seed,
            SeedBoxPolicy::StripAligned,
        )
    };
    if let Some(nu0) = ov.nu0 {
        return build(nu0);
    }
    // doubling then bisection for the least passing nu0
    let mut nu0 = nu_prime.max(1.0);
    let mut pass: Option<(f64, RefinementParams)> = None;
    for _ in 0..24 {
        match build(nu0) {
            Ok(p) => {
                pass = Some((nu0, p));
                break;
            }
            Err(_) => nu0 *= 2.0,
        }
    }
    let (mut hi, mut best) =
        pass.ok_or_else(|| Error::ParamSearchFailed("no nu0 satisfied all gates".into()))?;
    let mut lo = (hi / 2.0).max(nu_prime);
    while hi - lo > 0.02 * hi {
        let mid = 0.5 * (lo + hi);
        match build(mid) {
            Ok(p) => {
                hi = mid;
                best = p;
            }
            Err(_) => lo = mid,
        }
    }
    Ok(best)
}

/// Pick a box strictly inside sector R_0(ν₀) with clearance, per policy.
fn choose_seed_box(f: &ExpSum, params: &RefinementParams, policy: SeedBoxPolicy) -> Result<BoxId> {
    let sigma = params.sigma;
    let dec = RegionDecomposition::new(f, params.nu0, params.tau)?;
    let m = ((params.nu0 + 1.0) / sigma).ceil() as i64;
    let box_ok = |b: &BoxId| {
        b.corners(sigma)
            .iter()
            .chain(std::iter::once(&b.center(sigma)))
            .all(|&z| dec.locate(z) == Region::InComponent(0) && dec.boundary_distance(z) > sigma)
    };
    let mut candidates: Vec<i64> = Vec::new();
    if policy == SeedBoxPolicy::StripAligned {
        let n = f.order() as f64;
        let target_arg = std::f64::consts::PI / n - f.coeffs()[0].arg();
        for k in [0.0, -1.0, 1.0] {
            let im_center = target_arg + k * 2.0 * std::f64::consts::PI;
            candidates.push(((im_center - sigma / 2.0) / sigma).round() as i64);
        }
    }
    candidates.push(1);
    candidates.push(-2);
    for mp in candidates {
        let b = BoxId { m, mp };
        if box_ok(&b) {
            return Ok(b);
        }
    }
    // fallback: scan outward in both m' directions, then deeper m
    for dm in 0..64i64 {
        for mp in -(8 + dm * 4)..(8 + dm * 4) {
            let b = BoxId { m: m + dm, mp };
            if box_ok(&b) {
                return Ok(b);
            }
        }
    }
    Err(Error::ParamSearchFailed(
        "no admissible seed box found".into(),
    ))
}

/// Guaranteed geometry of the image of a σ-box inside R(ν).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoxImageFrame {
    /// Inner curvilinear square side: σ e^ν min|a_k| / 2.
    pub inner_side: f64,
    /// Relative modulus band (1 - 1/η, 1 + 1/η) around |a_p e^{ω^p z}|.
    pub modulus_band: (f64, f64),
    /// Argument deviation bound 1/η from arg(a_p e^{ω^p z}).
    pub argument_halfwidth: f64,
}

pub fn box_image_frame(
    f: &ExpSum,
    b: &BoxId,
    nu: f64,
    params: &RefinementParams,
) -> Result<BoxImageFrame> {
    if nu < params.nu_prime {
        return Err(Error::Precondition(format!(
            "image frame needs nu >= nu' = {}, got {nu}",
            params.nu_prime
        )));
    }
    let dec = RegionDecomposition::new(f, nu, params.tau)?;
    let mut sector = None;
    for z in b
        .corners(params.sigma)
        .iter()
        .chain(std::iter::once(&b.center(params.sigma)))
    {
        match dec.locate(*z) {
            Region::InComponent(p) if sector.is_none() || sector == Some(p) => sector = Some(p),
            _ => return Err(Error::BoxNotInSector((b.m, b.mp))),
        }
    }
    Ok(BoxImageFrame {
        inner_side: 0.5 * params.sigma * nu.exp() * f.min_abs_coeff(),
        modulus_band: (1.0 - 1.0 / params.eta, 1.0 + 1.0 / params.eta),
        argument_halfwidth: 1.0 / params.eta,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalReport {
    pub level: usize,
    pub nu_level: f64,
    pub samples: u64,
    pub survivors: u64,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub loss_strip_adjacent: u64,
    pub loss_boundary_adjacent: u64,
    pub seed: u64,
    pub seed_box: BoxId,
}

/// Survives at the given decomposition: lands in a sector, more than σ√2
/// from its boundary and from every strip — the computable surrogate for
/// "lies in a box fully inside R(ν)".
fn survives(dec: &RegionDecomposition, w: Complex64, sigma: f64) -> (bool, bool) {
    let clearance = sigma * std::f64::consts::SQRT_2;
    let strip_near = (0..dec.order()).any(|k| dec.strip_distance(k, w) <= clearance);
    match dec.locate(w) {
        Region::InComponent(_) => {
            if strip_near {
                return (false, true);
            }
            if dec.boundary_distance(w) <= clearance {
                return (false, false);
            }
            (true, false)
        }
        Region::InStrip(_) => (false, true),
        _ => (false, false),
    }
}

/// Monte Carlo survival fraction of the seed box at level 1, or of the
/// surviving level-1 set at level 2. Deterministic for a fixed seed,
/// independent of worker count.
pub fn survival_fraction(
    f: &ExpSum,
    params: &RefinementParams,
    level: usize,
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<SurvivalReport> {
    if !(level == 1 || level == 2) {
        return Err(Error::Precondition(format!(
            "level {level} not in {{1, 2}}"
        )));
    }
    if n_samples < 1000 {
        return Err(Error::Precondition("need at least 10^3 samples".into()));
    }
    let nu1 = params.alpha(params.nu0);
    let dec1 = RegionDecomposition::new(f, nu1, params.tau)?;
    let dec2 = if level == 2 {
        Some(RegionDecomposition::new(f, params.alpha(nu1), params.tau)?)
    } else {
        None
    };
    struct Acc {
        taken: u64,
        survivors: u64,
        strip: u64,
        boundary: u64,
        overflow: bool,
    }
    let acc = chunked_map_fold(
        n_samples as usize,
        4096,
        workers,
        |_start, len, chunk_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed ^ seed.rotate_left(17));
            let mut a = Acc {
                taken: 0,
                survivors: 0,
                strip: 0,
                boundary: 0,
                overflow: false,
            };
            let mut drawn = 0usize;
            let draw_cap = 4000 * len;
            while (a.taken as usize) < len && drawn < draw_cap {
                drawn += 1;
                let z = params
                    .seed_box
                    .point(rng.gen::<f64>(), rng.gen::<f64>(), params.sigma);
                let w1 = match f.evaluate(z) {
                    Ok(w) => w,
                    Err(_) => {
                        a.overflow = true;
                        return a;
                    }
                };
                let (target, dec) = match level {
                    1 => (w1, &dec1),
                    _ => {
                        // condition on level-1 survival
                        if !survives(&dec1, w1, params.sigma).0 {
                            continue;
                        }
                        match f.evaluate(w1) {
                            Ok(w2) => (w2, dec2.as_ref().unwrap()),
                            Err(_) => {
                                a.overflow = true;
                                return a;
                            }
                        }
                    }
                };
                a.taken += 1;
                let (ok, strip) = survives(dec, target, params.sigma);
                if ok {
                    a.survivors += 1;
                } else if strip {
                    a.strip += 1;
                } else {
                    a.boundary += 1;
                }
            }
            a
        },
        Acc {
            taken: 0,
            survivors: 0,
            strip: 0,
            boundary: 0,
            overflow: false,
        },
        |mut t, c| {
            t.taken += c.taken;
            t.survivors += c.survivors;
            t.strip += c.strip;
            t.boundary += c.boundary;
            t.overflow |= c.overflow;
            t
        },
        seed,
    );
    if acc.overflow {
        return Err(Error::Overflow(format!(
            "level {level} iterate leaves float range at nu0 = {}",
            params.nu0
        )));
    }
    if acc.taken == 0 {
        return Err(Error::WindowEmpty("no admissible samples".into()));
    }
    let fraction = acc.survivors as f64 / acc.taken as f64;
    let (wl, wh) = wilson_interval(acc.survivors, acc.taken);
    Ok(SurvivalReport {
        level,
        nu_level: if level == 1 { nu1 } else { params.alpha(nu1) },
        samples: acc.taken,
        survivors: acc.survivors,
        fraction,
        wilson_low: wl,
        wilson_high: wh,
        loss_strip_adjacent: acc.strip,
        loss_boundary_adjacent: acc.boundary,
        seed,
        seed_box: params.seed_box,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AreaBound {
    pub delta: f64,
    pub tail_bound: f64,
    /// delta with the tail beyond the computed levels subtracted.
    pub delta_with_tail: f64,
}

/// Δ = Π (1 - min(1, c e^{-ν_k})) over the first `levels` levels, with the
/// remaining tail bounded by its (super-geometrically decaying) sum.
pub fn area_lower_bound(params: &RefinementParams, loss_constant: f64, levels: usize) -> AreaBound {
    assert!(loss_constant >= 0.0 && levels >= 1);
    let mut delta = 1.0;
    for k in 0..levels {
        let nu_k = params.nu_level(k);
        let loss = if nu_k.is_finite() {
            (loss_constant * (-nu_k).exp()).min(1.0)
        } else {
            0.0
        };
        delta *= 1.0 - loss;
    }
    let mut tail = 0.0;
    for k in levels..levels + 64 {
        let log_nu = params.log_nu_level(k);
        if log_nu > 700.0 {
            break;
        }
        let nu_k = log_nu.exp();
        let term = loss_constant * (-nu_k).exp();
        if term < 1e-300 {
            break;
        }
        tail += term;
    }
    AreaBound {
        delta,
        tail_bound: tail,
        delta_with_tail: (delta - tail).max(0.0),
    }
}

/// Finite-depth certificate that a seed-box point is in the Julia set and
/// escapes at the fast rate: every computed iterate must satisfy the sector
/// condition at its level and carry logarithmic-derivative factor >= 2, and
/// the orbit must dominate μ_{ε₀}(ν₀).
pub fn certify_point(
    f: &ExpSum,
    params: &RefinementParams,
    z: Complex64,
    depth: usize,
) -> Result<Classification> {
    if !params.seed_box.contains(z, params.sigma) {
        return Err(Error::Precondition(format!("{z} is not in the seed box")));
    }
    let mu1 = max_modulus(f, params.eps0 * params.nu0)?;
    let lambda = 2.0;
    let mut current = z;
    let mut certified = 0usize;
    for k in 0..depth {
        let factor = f.log_derivative_factor(current)?;
        if factor < lambda {
            return Ok(refused(
                k,
                format!("factor {factor} < {lambda} at step {k}"),
            ));
        }
        match f.evaluate(current) {
            Ok(next) => {
                let nu_next = params.nu_level(k + 1);
                if !nu_next.is_finite() {
                    break;
                }
                let dec = RegionDecomposition::new(f, nu_next, params.tau)?;
                let (ok, _) = survives(&dec, next, params.sigma);
                if !ok {
                    return Ok(refused(
                        k + 1,
                        format!(
                            "iterate {next} leaves the clear sector interior at level {}",
                            k + 1
                        ),
                    ));
                }
                if next.norm() < mu1 {
                    return Ok(refused(
                        k + 1,
                        format!("|f^{}(z)| below mu_eps0(nu0)", k + 1),
                    ));
                }
                current = next;
                certified = k + 1;
            }
            Err(_) => {
                // one log-coordinate step: modulus e^{Re w}, argument Im w
                let w = f.log_evaluate(current);
                let log_nu_next = params.log_nu_level(k + 1);
                if w.re <= log_nu_next + std::f64::consts::LN_2 {
                    return Ok(refused(
                        k + 1,
                        "log-mode iterate not beyond the polygon".into(),
                    ));
                }
                let phi = w.im.rem_euclid(2.0 * std::f64::consts::PI);
                let n = f.order() as f64;
                let near_strip = (0..f.order()).any(|s| {
                    let axis = ((1.0 - 2.0 * s as f64) * std::f64::consts::PI / n)
                        .rem_euclid(2.0 * std::f64::consts::PI);
                    let mut d = (phi - axis).abs();
                    d = d.min(2.0 * std::f64::consts::PI - d);
                    // strip halfwidth at modulus e^{Re w} is tau e^{-Re w}
                    d < params.tau * (-w.re).exp() + 1e-12
                });
                if near_strip {
                    return Ok(refused(k + 1, "log-mode iterate lands in a strip".into()));
                }
                certified = k + 1;
                break;
            }
        }
    }
    if certified == 0 {
        return Ok(refused(0, "no step certified".into()));
    }
    Ok(Classification {
        label: Label::Julia,
        depth: certified,
        detail: format!(
            "Julia and fast-escape certificate to depth {certified}: sector and factor \
             conditions hold, orbit dominates mu_eps0(nu0) = {mu1:.3}"
        ),
        failed_at: None,
    })
}

fn refused(at: usize, why: String) -> Classification {
    Classification {
        label: Label::Undetermined,
        depth: at,
        detail: format!("certificate refused: {why}"),
        failed_at: Some(at),
    }
}

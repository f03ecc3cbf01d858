//! The nested-domain certificate that the anchored fast-escaping set is a
//! spider's web: domains G_n given by corner-cut polygons at ν_{n+1} = β(ν_n)
//! with β(r) = (ε'/2) e^r, inclusion of B(0, M^n(R,f)) certified by tower
//! tracks, and per-step containment certified by a modulus gap plus a
//! stabilized winding number of the image of ∂G_n around 0.

use crate::error::{Error, Result};
use crate::estimates::{find_nu_prime, tau_floor, VerifyOptions, ETA_DEFAULT};
use crate::expsum::{iterate_beta_tower, iterate_max_modulus_tower, max_modulus_log, ExpSum};
use crate::geometry::{truncated_polygon_with_cuts, vertex_term_indices, ClosedPolyline};
use crate::sampling::with_pool;
use crate::tower::{Rounding, TowerPair, TowerReal};
use num_complex::Complex64;
use serde::Serialize;

/// Largest ν for which we build explicit polygons: beyond this the cut-line
/// quantization indices stop being exactly representable.
pub const NU_EXPLICIT_MAX: f64 = 1e12;
/// Largest ν for which the sampled winding certificate is computed; the
/// winding grows linearly with ν, so beyond this the step certificate is the
/// analytic tower-arithmetic one.
pub const NU_WINDING_MAX: f64 = 1e6;

/// Measured lower bound for |f| on the boundary of P'(ν), in units of e^ν.
#[derive(Debug, Clone, Serialize)]
pub struct EpsPrimeReport {
    pub nu: f64,
    /// ε' after the 10% haircut: the published constant.
    pub eps_prime: f64,
    /// exp(min log|f| - ν): the raw sampled minimum ratio.
    pub eps_prime_raw: f64,
    pub side_min_log_ratio: f64,
    pub chord_min_log_ratio: f64,
    /// κ = 2π cot(π/n) + 2τ sin(π/n), the chord-regime depth constant.
    pub kappa: f64,
    pub samples: usize,
    pub cut_indices: Vec<i64>,
}

/// Sample ∂P'(ν) and measure min |f(z)|/e^ν, with the polygon-side and
/// cut-chord regimes checked separately against their analytic floors.
pub fn epsilon_prime(
    f: &ExpSum,
    nu: f64,
    boundary_samples: usize,
    tau: f64,
) -> Result<EpsPrimeReport> {
    let n = f.order();
    let (poly, cut_indices) = truncated_polygon_with_cuts(f, nu, tau)?;
    let pi_n = std::f64::consts::PI / n as f64;
    let kappa = 2.0 * std::f64::consts::PI / pi_n.tan() + 2.0 * tau * pi_n.sin();
    let per = poly.perimeter();
    let mut side_min = f64::INFINITY;
    let mut chord_min = f64::INFINITY;
    let mut total = 0usize;
    for e in 0..2 * n {
        let a = poly.vertices[e];
        let b = poly.vertices[(e + 1) % (2 * n)];
        let count = ((boundary_samples as f64 * (b - a).norm() / per).ceil() as usize).max(16);
        let mut edge_min = f64::INFINITY;
        for i in 0..count {
            let t = (i as f64 + 0.5) / count as f64;
            let q = f.log_abs(a + t * (b - a)) - nu;
            edge_min = edge_min.min(q);
        }
        total += count;
        let j = e / 2;
        if e % 2 == 0 {
            // chord cutting vertex j: |f| >= |a_u| e^{-κ} e^ν / 2
            let (u, v) = vertex_term_indices(n, j);
            let floor = (0.5 * f.coeffs()[u].norm().min(f.coeffs()[v].norm())).ln() - kappa;
            if edge_min < floor - 1e-9 {
                return Err(Error::NuTooSmall { nu, vertex: j });
            }
            chord_min = chord_min.min(edge_min);
        } else {
            // side piece on Γ_p with p = (-j-1) mod n: |f| >= |a_p| e^ν / 2
            let p = (2 * n - j - 1) % n;
            let floor = (0.5 * f.coeffs()[p].norm()).ln();
            if edge_min < floor - 1e-9 {
                return Err(Error::NuTooSmall { nu, vertex: j });
            }
            side_min = side_min.min(edge_min);
        }
    }
    let raw = side_min.min(chord_min).exp();
    Ok(EpsPrimeReport {
        nu,
        eps_prime: 0.9 * raw,
        eps_prime_raw: raw,
        side_min_log_ratio: side_min,
        chord_min_log_ratio: chord_min,
        kappa,
        samples: total,
        cut_indices,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WebParams {
    pub nu: f64,
    pub r: f64,
    pub delta: f64,
    pub eps_prime: f64,
    pub eps_prime_raw: f64,
    pub tau: f64,
    pub eta: f64,
    pub nu_prime: f64,
    /// R/δ: the analytic sufficient floor for ν. The numeric inclusion
    /// certificate replaces it; reports carry both.
    pub analytic_nu_floor: f64,
    pub meets_analytic_floor: bool,
    pub kappa: f64,
    pub seed: u64,
}

impl WebParams {
    pub fn beta_shift(&self) -> f64 {
        (self.eps_prime / 2.0).ln()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WebOptions {
    pub eta: Option<f64>,
    pub nu: Option<f64>,
    pub boundary_samples: usize,
    pub search_samples: usize,
    pub inclusion_depth: usize,
    pub workers: usize,
}

impl Default for WebOptions {
    fn default() -> Self {
        WebOptions {
            eta: None,
            nu: None,
            boundary_samples: 4096,
            search_samples: 1500,
            inclusion_depth: 6,
            workers: 0,
        }
    }
}

/// Sampled check of the radius chain: M(r) > r and
/// δ M(r) >= (1/δ) M(δ r) >= r for r in [r0, max(4 r0, 200)].
fn chain_holds(f: &ExpSum, delta: f64, r0: f64) -> bool {
    let hi = (4.0 * r0).max(200.0);
    (0..=16).all(|i| {
        let r = r0 * (hi / r0).powf(i as f64 / 16.0);
        let lm = max_modulus_log(f, r);
        let lm_d = max_modulus_log(f, delta * r);
        let left = delta.ln() + lm;
        let mid = -delta.ln() + lm_d;
        lm > r.ln() && left >= mid && mid >= r.ln()
    })
}

fn search_radius(f: &ExpSum, delta: f64) -> Result<f64> {
    let mut r = 2.0;
    while !chain_holds(f, delta, r) {
        r *= 2.0;
        if r > 1e6 {
            return Err(Error::NotFound(
                "no radius satisfied the growth chain".into(),
            ));
        }
    }
    let mut lo = r / 2.0;
    while r - lo > 0.02 * r {
        let mid = 0.5 * (lo + r);
        if chain_holds(f, delta, mid) {
            r = mid;
        } else {
            lo = mid;
        }
    }
    Ok(r)
}

/// Assemble the full parameter chain: ν' → ε'(ν) → δ → R → least ν whose
/// β-vs-M tower comparison passes to the requested depth, iterated to a
/// fixed point of the ε' measurement.
pub fn make_web_params(f: &ExpSum, seed: u64, opts: &WebOptions) -> Result<WebParams> {
    let n = f.order();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "the web construction requires order n >= 3, got {n}; orders 1 and 2 lie in the \
             bounded-singular-value class where the anchored fast-escaping set is not a spider's web"
        )));
    }
    let eta = opts.eta.unwrap_or(ETA_DEFAULT);
    let tau = tau_floor(f, eta);
    let vopts = VerifyOptions {
        tau: Some(tau),
        eps0: None,
        workers: opts.workers,
    };
    let (nu_prime, _) = find_nu_prime(f, eta, tau, opts.search_samples, seed, &vopts)?;
    let mut probe_nu = opts.nu.unwrap_or((nu_prime * 1.1).max(20.0));
    // the corner-cut polygon bounds only hold once ν clears the cut geometry
    let mut eps = loop {
        match epsilon_prime(f, probe_nu, opts.boundary_samples, tau) {
            Ok(rep) => break rep,
            Err(Error::NuTooSmall { .. }) if opts.nu.is_none() && probe_nu < 1e4 => {
                probe_nu *= 1.5;
            }
            Err(e) => return Err(e),
        }
    };
    for _ in 0..5 {
        let delta = eps.eps_prime / (2.0 * f.sum_abs_coeffs());
        let r = search_radius(f, delta)?;
        let nu = match opts.nu {
            Some(nu) => nu,
            None => {
                let mut nu = nu_prime.max(r * 1.02).max(probe_nu);
                let mut tries = 0;
                loop {
                    let params = WebParams {
                        nu,
                        r,
                        delta,
                        eps_prime: eps.eps_prime,
                        eps_prime_raw: eps.eps_prime_raw,
                        tau,
                        eta,
                        nu_prime,
                        analytic_nu_floor: r / delta,
                        meets_analytic_floor: nu >= r / delta,
                        kappa: eps.kappa,
                        seed,
                    };
                    let levels = verify_inclusion(f, &params, opts.inclusion_depth)?;
                    if levels.iter().all(|l| l.pass == Some(true)) {
                        break;
                    }
                    nu *= 1.25;
                    tries += 1;
                    if tries > 60 {
                        return Err(Error::NotFound("no nu passed the inclusion towers".into()));
                    }
                }
                nu
            }
        };
        let eps_at_nu = epsilon_prime(f, nu, opts.boundary_samples, tau)?;
        let stable = (eps_at_nu.eps_prime.ln() - eps.eps_prime.ln()).abs() < 0.05;
        eps = eps_at_nu;
        probe_nu = nu;
        if stable || opts.nu.is_some() {
            let delta = eps.eps_prime / (2.0 * f.sum_abs_coeffs());
            let r = search_radius(f, delta)?;
            let params = WebParams {
                nu,
                r,
                delta,
                eps_prime: eps.eps_prime,
                eps_prime_raw: eps.eps_prime_raw,
                tau,
                eta,
                nu_prime,
                analytic_nu_floor: r / delta,
                meets_analytic_floor: nu >= r / delta,
                kappa: eps.kappa,
                seed,
            };
            if opts.nu.is_none() {
                let levels = verify_inclusion(f, &params, opts.inclusion_depth)?;
                if !levels.iter().all(|l| l.pass == Some(true)) {
                    probe_nu = nu * 1.25;
                    continue;
                }
            }
            return Ok(params);
        }
    }
    Err(Error::NotFound(
        "epsilon-prime measurement did not stabilise".into(),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionLevel {
    pub n: usize,
    /// None when the certified tracks overlap (undetermined).
    pub pass: Option<bool>,
    pub beta_lower: TowerReal,
    pub m_upper: TowerReal,
}

/// Compare β^n(ν) (lower track) against M^n(R, f) (upper track) for
/// n = 0..=n_max. Level 0 is the ν >= R anchor.
pub fn verify_inclusion(
    f: &ExpSum,
    params: &WebParams,
    n_max: usize,
) -> Result<Vec<InclusionLevel>> {
    let beta = iterate_beta_tower(params.nu, params.eps_prime, n_max);
    let m = iterate_max_modulus_tower(f, params.r, n_max)?;
    let mut out = vec![InclusionLevel {
        n: 0,
        pass: Some(params.nu >= params.r),
        beta_lower: TowerReal::from_f64(params.nu),
        m_upper: TowerReal::from_f64(params.r),
    }];
    for i in 0..n_max {
        let pass = if beta[i].lower >= m[i].upper {
            Some(true)
        } else if beta[i].upper < m[i].lower {
            Some(false)
        } else {
            None
        };
        out.push(InclusionLevel {
            n: i + 1,
            pass,
            beta_lower: beta[i].lower,
            m_upper: m[i].upper,
        });
    }
    Ok(out)
}

/// A domain G_n: an explicit corner-cut polygon while ν is numerically sound,
/// a tower-valued ν afterwards.
#[derive(Debug, Clone, Serialize)]
pub enum WebDomain {
    Explicit { nu: f64, poly: ClosedPolyline },
    Symbolic { nu: TowerPair },
}

impl WebDomain {
    pub fn nu_pair(&self) -> TowerPair {
        match self {
            WebDomain::Explicit { nu, .. } => TowerPair::exact(*nu),
            WebDomain::Symbolic { nu } => *nu,
        }
    }

    pub fn explicit_nu(&self) -> Option<f64> {
        match self {
            WebDomain::Explicit { nu, .. } => Some(*nu),
            WebDomain::Symbolic { .. } => None,
        }
    }
}

/// G_0..G_{count-1} with ν_{k+1} = β(ν_k).
pub fn build_web_sequence(f: &ExpSum, params: &WebParams, count: usize) -> Result<Vec<WebDomain>> {
    if count == 0 {
        return Err(Error::Precondition("need at least one domain".into()));
    }
    let beta_towers = iterate_beta_tower(params.nu, params.eps_prime, count.saturating_sub(1));
    let mut out = Vec::with_capacity(count);
    let mut nu_float = params.nu;
    for k in 0..count {
        if nu_float.is_finite() && nu_float <= NU_EXPLICIT_MAX {
            let (poly, _) = truncated_polygon_with_cuts(f, nu_float, params.tau)?;
            out.push(WebDomain::Explicit { nu: nu_float, poly });
        } else {
            out.push(WebDomain::Symbolic {
                nu: beta_towers[k - 1],
            });
        }
        nu_float = if nu_float <= 700.0 {
            0.5 * params.eps_prime * nu_float.exp()
        } else {
            f64::INFINITY
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    Explicit,
    Symbolic,
}

#[derive(Debug, Clone, Serialize)]
pub struct WebStepReport {
    pub n: usize,
    /// min |f| on ∂G_n; natural log when log_scale is set.
    pub min_mod_boundary: f64,
    /// sup |z| over ∂G_{n+1}; natural log when log_scale is set.
    pub sup_next_radius: f64,
    pub winding: Option<i64>,
    pub pass_a: bool,
    pub pass_b: bool,
    pub samples: usize,
    pub mode: StepMode,
    pub log_scale: bool,
    pub min_mod_tower: String,
    pub sup_next_tower: String,
}

/// Winding number of a sampled closed phase curve by accumulated argument.
/// Returns the rounded total together with the rounding residual.
fn winding_from_phases(phases: &[f64]) -> (i64, f64) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut total = 0.0;
    for w in phases.windows(2) {
        let mut d = (w[1] - w[0]) % two_pi;
        if d > std::f64::consts::PI {
            d -= two_pi;
        } else if d <= -std::f64::consts::PI {
            d += two_pi;
        }
        total += d;
    }
    let turns = total / two_pi;
    (turns.round() as i64, (turns - turns.round()).abs())
}

/// Winding of a sampled closed curve of nonzero complex values around 0.
pub fn winding_of_closed_curve(points: &[Complex64]) -> (i64, f64) {
    let phases: Vec<f64> = points.iter().map(|z| z.arg()).collect();
    winding_from_phases(&phases)
}

/// Winding of f(∂G) around 0, doubling the boundary sampling until two
/// consecutive refinements agree exactly (and the residual is small).
fn stable_winding(
    f: &ExpSum,
    poly: &ClosedPolyline,
    start_samples: usize,
    workers: usize,
) -> Result<(i64, usize)> {
    let mut count = start_samples.next_power_of_two().max(1024);
    let mut prev: Option<i64> = None;
    for _ in 0..5 {
        let pts = poly.sample_boundary(count)?;
        let phases: Vec<f64> = with_pool(workers, || {
            use rayon::prelude::*;
            pts.par_iter().map(|&z| f.log_evaluate(z).im).collect()
        });
        let (w, residual) = winding_from_phases(&phases);
        if residual < 0.05 {
            if let Some(p) = prev {
                if p == w {
                    return Ok((w, count));
                }
            }
            prev = Some(w);
        } else {
            prev = None;
        }
        count *= 2;
    }
    Err(Error::WindingUnstable(prev.unwrap_or(i64::MIN), -1))
}

/// Certify one step: G_{n+1} sits in a bounded complementary component of
/// f(∂G_n). Explicit mode measures min |f| on ∂G_n and the winding of the
/// image curve; symbolic mode runs the modulus-gap arithmetic on tower
/// tracks using the measured ε' (an extrapolation, flagged by its mode).
pub fn verify_step(
    f: &ExpSum,
    params: &WebParams,
    domains: &[WebDomain],
    n: usize,
    boundary_samples: usize,
    workers: usize,
) -> Result<WebStepReport> {
    if n + 1 >= domains.len() {
        return Err(Error::Precondition(format!(
            "step {n} needs domain {}",
            n + 1
        )));
    }
    let inclusion = verify_inclusion(f, params, n + 1)?;
    let pass_a = inclusion[..=n].iter().all(|l| l.pass == Some(true));
    let g_n = &domains[n];
    let g_next = &domains[n + 1];

    if let (Some(nu_n), WebDomain::Explicit { .. }) = (g_n.explicit_nu(), g_n) {
        if nu_n <= NU_WINDING_MAX {
            let poly = match g_n {
                WebDomain::Explicit { poly, .. } => poly,
                WebDomain::Symbolic { .. } => unreachable!(),
            };
            let n_f = f.order() as f64;
            let winding_est =
                (n_f * (std::f64::consts::PI / n_f).tan() / std::f64::consts::PI * nu_n) as usize;
            let start = boundary_samples.max(8 * winding_est + 1024);
            let (winding, used) = stable_winding(f, poly, start, workers)?;
            let pts = poly.sample_boundary(used)?;
            let min_log: f64 = with_pool(workers, || {
                use rayon::prelude::*;
                pts.par_iter()
                    .map(|&z| f.log_abs(z))
                    .reduce(|| f64::INFINITY, f64::min)
            });
            let (sup_log, sup_tower) = match g_next {
                WebDomain::Explicit { poly: p2, .. } => {
                    let m = p2.max_abs();
                    (m.ln(), TowerReal::from_f64(m))
                }
                WebDomain::Symbolic { nu } => {
                    let t = nu
                        .upper
                        .exp_scale_shift(1.0, std::f64::consts::LN_2, Rounding::Up);
                    // symbolic ν_{n+1} derives from float ν_n: 2ν_{n+1} in logs
                    (nu_n + params.beta_shift() + std::f64::consts::LN_2, t)
                }
            };
            let pass_b = min_log > sup_log && winding != 0;
            let log_scale = min_log > 700.0 || sup_log > 700.0;
            return Ok(WebStepReport {
                n,
                min_mod_boundary: if log_scale { min_log } else { min_log.exp() },
                sup_next_radius: if log_scale { sup_log } else { sup_log.exp() },
                winding: Some(winding),
                pass_a,
                pass_b,
                samples: used,
                mode: StepMode::Explicit,
                log_scale,
                min_mod_tower: TowerReal::new(1, min_log).to_string(),
                sup_next_tower: sup_tower.to_string(),
            });
        }
    }

    // Analytic route: min |f| on ∂G_n >= eps_raw e^{ν_n} (measured bound,
    // extrapolated) while sup |z| over ∂G_{n+1} <= 2 ν_{n+1} = eps' e^{ν_n}.
    // The same ν_n enters both exponents, so the comparison reduces exactly
    // to log(eps_raw) - log(eps') = -log(0.9) > 0; a tower-top comparison
    // could not resolve a fixed ratio at these heights.
    let nu_n = g_n.nu_pair();
    let margin = params.eps_prime_raw.ln() - params.eps_prime.ln();
    let pass_b = margin > 0.0;
    let min_lower = nu_n
        .lower
        .exp_scale_shift(1.0, params.eps_prime_raw.ln(), Rounding::Down);
    let sup_upper = nu_n
        .upper
        .exp_scale_shift(1.0, params.eps_prime.ln(), Rounding::Up);
    Ok(WebStepReport {
        n,
        min_mod_boundary: min_lower.to_f64().unwrap_or(f64::INFINITY),
        sup_next_radius: sup_upper.to_f64().unwrap_or(f64::INFINITY),
        winding: None,
        pass_a,
        pass_b,
        samples: 0,
        mode: StepMode::Symbolic,
        log_scale: false,
        min_mod_tower: min_lower.to_string(),
        sup_next_tower: sup_upper.to_string(),
    })
}

/// Run steps 0..depth-1 plus the inclusion levels 0..=depth; the certificate
/// composes when all of them pass.
pub fn certify_web(
    f: &ExpSum,
    params: &WebParams,
    depth: usize,
    boundary_samples: usize,
    inclusion_depth: usize,
    workers: usize,
) -> Result<(Vec<InclusionLevel>, Vec<WebStepReport>, usize)> {
    let domains = build_web_sequence(f, params, depth + 1)?;
    let inclusion = verify_inclusion(f, params, inclusion_depth.max(depth))?;
    let mut steps = Vec::with_capacity(depth);
    for n in 0..depth {
        steps.push(verify_step(
            f,
            params,
            &domains,
            n,
            boundary_samples,
            workers,
        )?);
    }
    let mut certified = 0usize;
    for k in 0..=depth {
        let inc_ok = inclusion[..=k.min(inclusion.len() - 1)]
            .iter()
            .all(|l| l.pass == Some(true));
        let steps_ok = steps[..k].iter().all(|s| s.pass_b);
        if inc_ok && steps_ok {
            certified = k;
        } else {
            break;
        }
    }
    Ok((inclusion, steps, certified))
}

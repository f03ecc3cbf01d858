//! Numeric certification of the sector inequalities, the conformality and
//! distortion bounds on σ-boxes, and the two-sided growth-ratio check. All
//! suprema and minima here are sampled, so every report is a heuristic
//! certificate: margins and witnesses are recorded, not proofs.

use crate::error::{Error, Result};
use crate::expsum::{max_modulus_log, ExpSum};
use crate::geometry::{Region, RegionDecomposition};
use crate::sampling::{chunked_map_fold, MinWitness, R2Seq};
use num_complex::Complex64;
use serde::Serialize;

/// Default σ: just under 1/(8√2).
pub const SIGMA_DEFAULT: f64 = 0.08;
/// Default η: the smallest round value above 4/σ = 50.
pub const ETA_DEFAULT: f64 = 51.0;
/// Outer radius of the sampling window (direct evaluation stays in range).
pub const WINDOW_RADIUS: f64 = 650.0;

/// The strip half-width floor: τ ≥ log(4nη max|a|/min|a|) / (2 sin(π/n)).
pub fn tau_floor(f: &ExpSum, eta: f64) -> f64 {
    let n = f.order() as f64;
    let ratio = f.max_abs_coeff() / f.min_abs_coeff();
    (4.0 * n * eta * ratio).ln() / (2.0 * (std::f64::consts::PI / n).sin())
}

/// Default ε₀ = 0.45 cos(π/n), inside the required (0, cos(π/n)/2).
pub fn eps0_default(n: usize) -> f64 {
    0.45 * (std::f64::consts::PI / n as f64).cos()
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub inequality_id: &'static str,
    pub pass: bool,
    pub worst_margin: f64,
    pub witness: [f64; 2],
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub family: String,
    pub nu: f64,
    pub eta: f64,
    pub tau: f64,
    pub eps0: f64,
    pub samples_per_sector: usize,
    pub seed: u64,
    pub window: [f64; 2],
    pub degraded_window: bool,
    pub inequalities: Vec<InequalityReport>,
    pub pass: bool,
    pub worst_margin: f64,
}

impl EstimateReport {
    pub fn min_margin(&self) -> f64 {
        self.inequalities
            .iter()
            .map(|i| i.worst_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

const INEQ_IDS: [&str; 5] = [
    "psi-bound",
    "expansion",
    "nonlinearity",
    "log-derivative",
    "modulus-lower",
];

#[derive(Clone, Copy)]
struct SectorMargins {
    mins: [MinWitness<Complex64>; 5],
}

impl SectorMargins {
    fn empty() -> Self {
        SectorMargins {
            mins: [MinWitness::empty(); 5],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for i in 0..5 {
            self.mins[i] = self.mins[i].merge(other.mins[i]);
        }
        self
    }
}

/// Relative margins of the five sector inequalities at one point. Margins are
/// positive on pass: `1 - value/threshold` for upper bounds, `value/threshold
/// - 1` for lower bounds, the latter computed in log space and saturated.
fn point_margins(f: &ExpSum, p: usize, z: Complex64, eta: f64, eps0: f64, nu: f64) -> [f64; 5] {
    let sat_exp = |x: f64| x.min(700.0).exp();
    let jet = f.psi_jet(p, z);
    let psi_margin = match &jet {
        Ok([a, b, c]) => 1.0 - eta * a.norm().max(b.norm()).max(c.norm()),
        Err(_) => f64::NEG_INFINITY,
    };
    let expansion = sat_exp(f.log_abs_derivative(z) - std::f64::consts::LN_2) - 1.0;
    let nonlin = match f.nonlinearity_ratio(z) {
        Ok(v) => 1.0 - v / 2.0,
        Err(_) => f64::NEG_INFINITY,
    };
    let logdev = match f.log_derivative_factor(z) {
        Ok(v) => v / 2.0 - 1.0,
        Err(_) => f64::NEG_INFINITY,
    };
    let rhs = (eps0 * nu).max(eps0 * z.norm() + f.sum_abs_coeffs().ln());
    let modulus = sat_exp(f.log_abs(z) - rhs) - 1.0;
    [psi_margin, expansion, nonlin, logdev, modulus]
}

#[derive(Debug, Clone, Copy)]
#[derive(Default)]
pub struct VerifyOptions {
    pub tau: Option<f64>,
    pub eps0: Option<f64>,
    pub workers: usize,
}


/// Sample every sector of R(ν) and evaluate the five inequalities, reporting
/// the worst relative margin and its witness per inequality.
pub fn verify_component_estimates(
    f: &ExpSum,
    nu: f64,
    eta: f64,
    samples: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<EstimateReport> {
    let n = f.order();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "sector estimates require order n >= 3, got {n}"
        )));
    }
    if !(nu > 0.0) || !(eta > 8.0) {
        return Err(Error::Precondition("need nu > 0 and eta > 8".into()));
    }
    let tau = opts.tau.unwrap_or_else(|| tau_floor(f, eta));
    let eps0 = opts.eps0.unwrap_or_else(|| eps0_default(n));
    let r_hi = WINDOW_RADIUS;
    if nu >= r_hi - 10.0 {
        return Err(Error::WindowEmpty(format!(
            "nu = {nu} leaves no evaluable annulus below r = {r_hi}"
        )));
    }
    let degraded_window = 8.0 * nu > r_hi;
    let dec = RegionDecomposition::new(f, nu, tau)?;
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut mins = SectorMargins::empty();
    for p in 0..n {
        let phi = -(two_pi * p as f64) / n as f64;
        let sector = chunked_map_fold(
            samples,
            2048,
            opts.workers,
            |_start, len, chunk_seed| {
                let mut acc = SectorMargins::empty();
                let mut seq = R2Seq::new(chunk_seed ^ (p as u64) << 32 ^ seed);
                let mut accepted = 0usize;
                let mut attempts = 0usize;
                while accepted < len && attempts < 200 * len {
                    attempts += 1;
                    let (u, v) = seq.next_pair();
                    let r = nu + u * (r_hi - nu);
                    let theta = phi + (v - 0.5) * two_pi / n as f64;
                    let z = r * Complex64::cis(theta);
                    if dec.locate(z) != Region::InComponent(p) {
                        continue;
                    }
                    accepted += 1;
                    let m = point_margins(f, p, z, eta, eps0, nu);
                    for i in 0..5 {
                        acc.mins[i].observe(m[i], z);
                    }
                }
                acc
            },
            SectorMargins::empty(),
            SectorMargins::merge,
            seed,
        );
        mins = mins.merge(sector);
    }

    let inequalities: Vec<InequalityReport> = INEQ_IDS
        .iter()
        .zip(mins.mins.iter())
        .map(|(id, m)| {
            let w = m.witness.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            InequalityReport {
                inequality_id: id,
                pass: m.value > 0.0,
                worst_margin: m.value,
                witness: [w.re, w.im],
                samples,
                seed,
            }
        })
        .collect();
    let pass = inequalities.iter().all(|i| i.pass);
    let worst_margin = inequalities
        .iter()
        .map(|i| i.worst_margin)
        .fold(f64::INFINITY, f64::min);
    Ok(EstimateReport {
        family: format!("E{n}"),
        nu,
        eta,
        tau,
        eps0,
        samples_per_sector: samples,
        seed,
        window: [nu, r_hi],
        degraded_window,
        inequalities,
        pass,
        worst_margin,
    })
}

/// Required margin for the ν' search: every inequality must clear 10%.
pub const NU_PRIME_MARGIN: f64 = 0.1;

/// Least tested ν at which all five inequalities pass with >= 10% margin at
/// every sample. A sampling certificate, not a proof: the search floor is the
/// geometric threshold 1.05 τ / sin(π/n) below which the sectors pinch out.
pub fn find_nu_prime(
    f: &ExpSum,
    eta: f64,
    tau: f64,
    samples: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<(f64, EstimateReport)> {
    let n = f.order();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "nu' search requires n >= 3, got {n}"
        )));
    }
    let opts = VerifyOptions {
        tau: Some(tau),
        ..*opts
    };
    let floor = (1.05 * tau / (std::f64::consts::PI / n as f64).sin()).max(1.0);
    let ceiling = 512.0;
    let passes = |nu: f64| -> Result<Option<EstimateReport>> {
        let rep = verify_component_estimates(f, nu, eta, samples, seed, &opts)?;
        Ok((rep.min_margin() >= NU_PRIME_MARGIN).then_some(rep))
    };
    let mut nu = floor;
    let mut hit: Option<(f64, EstimateReport)> = None;
    while nu <= ceiling {
        if let Some(rep) = passes(nu)? {
            hit = Some((nu, rep));
            break;
        }
        nu *= 2.0;
    }
    let Some((mut pass_nu, mut pass_rep)) = hit else {
        return Err(Error::NotFound(format!(
            "no nu <= {ceiling} passed all inequalities with {NU_PRIME_MARGIN:.0e} margin"
        )));
    };
    let mut lo = (pass_nu / 2.0).max(floor);
    if pass_nu > floor {
        // bisect down to ~2% relative resolution; keep the least tested pass
        while pass_nu - lo > 0.02 * pass_nu {
            let mid = 0.5 * (lo + pass_nu);
            match passes(mid)? {
                Some(rep) => {
                    pass_nu = mid;
                    pass_rep = rep;
                }
                None => lo = mid,
            }
        }
    }
    Ok((pass_nu, pass_rep))
}

/// An axis-aligned square, the unit of the box constructions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SquareBox {
    pub center: Complex64,
    pub side: f64,
}

impl SquareBox {
    pub fn corners(&self) -> [Complex64; 4] {
        let h = self.side / 2.0;
        [
            self.center + Complex64::new(-h, -h),
            self.center + Complex64::new(h, -h),
            self.center + Complex64::new(h, h),
            self.center + Complex64::new(-h, h),
        ]
    }

    pub fn point(&self, u: f64, v: f64) -> Complex64 {
        self.center + Complex64::new((u - 0.5) * self.side, (v - 0.5) * self.side)
    }

    pub fn diam(&self) -> f64 {
        self.side * std::f64::consts::SQRT_2
    }
}

/// N(f|B) = (sampled sup |f''/f'|) · diam(B).
pub fn nonlinearity(f: &ExpSum, b: &SquareBox, samples: usize) -> Result<f64> {
    if !(b.side > 0.0) {
        return Err(Error::Precondition("box side must be positive".into()));
    }
    let mut seq = R2Seq::new(0xb0b0);
    let mut sup = 0.0f64;
    for i in 0..samples {
        let z = if i < 4 {
            b.corners()[i]
        } else {
            let (u, v) = seq.next_pair();
            b.point(u, v)
        };
        sup = sup.max(f.nonlinearity_ratio(z)?);
    }
    Ok(sup * b.diam())
}

/// Conformality criterion on a square: s·sup|f''/f'| <= 1/(√2 s + 1) with 10%
/// headroom, plus an injectivity spot check on the sampled images.
pub fn conformality_check(f: &ExpSum, b: &SquareBox) -> Result<bool> {
    let s = b.side;
    let sup = nonlinearity(f, b, 1024)? / b.diam();
    let threshold = 1.0 / (std::f64::consts::SQRT_2 * s + 1.0);
    if s * sup > threshold / 1.1 {
        return Ok(false);
    }
    let mut seq = R2Seq::new(0xc0f0);
    let pts: Vec<Complex64> = (0..1000)
        .map(|_| {
            let (u, v) = seq.next_pair();
            b.point(u, v)
        })
        .collect();
    let images: Result<Vec<Complex64>> = pts.iter().map(|&z| f.evaluate(z)).collect();
    let images = images?;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (images[i] - images[j]).norm() < 1e-12 && (pts[i] - pts[j]).norm() > 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistortionEstimate {
    pub c_min: f64,
    pub c_max: f64,
    /// Sampled distortion C/c; an inner estimate (true distortion is >= this).
    pub l: f64,
}

/// Sampled chord-ratio extremes of f^k over a box.
pub fn distortion_estimate(
    f: &ExpSum,
    iterate_depth: usize,
    b: &SquareBox,
    pair_samples: usize,
    seed: u64,
) -> Result<DistortionEstimate> {
    if iterate_depth == 0 {
        return Err(Error::Precondition("iterate depth must be >= 1".into()));
    }
    let apply = |mut z: Complex64| -> Result<Complex64> {
        for _ in 0..iterate_depth {
            z = f.evaluate(z)?;
        }
        Ok(z)
    };
    let mut seq = R2Seq::new(seed);
    let mut seq2 = R2Seq::with_start(seed ^ 0x5eed, 1 << 20);
    let (mut cmin, mut cmax) = (f64::INFINITY, 0.0f64);
    let mut used = 0usize;
    while used < pair_samples {
        let (u1, v1) = seq.next_pair();
        let (u2, v2) = seq2.next_pair();
        let (x, y) = (b.point(u1, v1), b.point(u2, v2));
        if (x - y).norm() < 1e-9 * b.side {
            continue;
        }
        used += 1;
        let ratio = (apply(x)? - apply(y)?).norm() / (x - y).norm();
        cmin = cmin.min(ratio);
        cmax = cmax.max(ratio);
    }
    if cmin <= 0.0 {
        return Err(Error::Precondition("map collapsed a sampled pair".into()));
    }
    Ok(DistortionEstimate {
        c_min: cmin,
        c_max: cmax,
        l: cmax / cmin,
    })
}

/// λ = Π (1 + 8 M s √2 α^{-m}): the distortion budget of arbitrarily deep
/// inverse-branch compositions. Requires s ∈ (0, (4√2 M)^{-1}) — equivalently
/// M s √2 < 1/4 — and α > 1.
pub fn distortion_product_bound(m_bound: f64, s: f64, alpha: f64) -> Result<f64> {
    if !(m_bound > 0.0) || !(alpha > 1.0) {
        return Err(Error::Precondition("need M > 0 and alpha > 1".into()));
    }
    let limit = 1.0 / (4.0 * std::f64::consts::SQRT_2 * m_bound);
    if !(s > 0.0 && s < limit) {
        return Err(Error::Precondition(format!(
            "s = {s} outside (0, {limit:.6}) = (0, (4√2 M)^-1)"
        )));
    }
    let base = 8.0 * m_bound * s * std::f64::consts::SQRT_2;
    let mut lambda = 1.0;
    let mut term = base;
    for _ in 0..10_000 {
        if term < 1e-12 {
            break;
        }
        lambda *= 1.0 + term;
        term /= alpha;
    }
    Ok(lambda)
}

/// Empirical (A, B) with A = min, B = max of log M(Cr)/log M(r) over sampled
/// radii; both must exceed 1 for the growth condition to hold on the range.
pub fn bk_condition_check(f: &ExpSum, c: f64, r_lo: f64, r_hi: f64, samples: usize) -> (f64, f64) {
    assert!(c > 1.0 && r_lo > 0.0 && r_hi > r_lo && samples >= 2);
    let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let r = r_lo * (r_hi / r_lo).powf(t);
        let ratio = max_modulus_log(f, c * r) / max_modulus_log(f, r);
        a = a.min(ratio);
        b = b.max(ratio);
    }
    (a, b)
}

/// Random σ-boxes fully inside sector components of R(ν), with one box-side
/// of clearance. Used by the distortion spot checks.
pub fn sample_sector_boxes(
    f: &ExpSum,
    nu: f64,
    tau: f64,
    side: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<SquareBox>> {
    let dec = RegionDecomposition::new(f, nu, tau)?;
    let n = f.order();
    let r_hi = (3.0 * nu).min(WINDOW_RADIUS - 10.0).max(nu + 5.0);
    let mut seq = R2Seq::new(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 50_000 * count.max(1) {
        attempts += 1;
        let (u, v) = seq.next_pair();
        let r = nu + u * (r_hi - nu);
        let theta = v * 2.0 * std::f64::consts::PI;
        let center = r * Complex64::cis(theta);
        let b = SquareBox { center, side };
        let clear = b
            .corners()
            .iter()
            .chain(std::iter::once(&center))
            .all(|&z| {
                matches!(dec.locate(z), Region::InComponent(_)) && dec.boundary_distance(z) > side
            });
        let same_sector = {
            let labels: Vec<Region> = b.corners().iter().map(|&z| dec.locate(z)).collect();
            labels.windows(2).all(|w| w[0] == w[1])
        };
        if clear && same_sector {
            out.push(b);
        }
    }
    if out.len() < count {
        return Err(Error::WindowEmpty(format!(
            "could not place {count} boxes of side {side} in R({nu}) for n = {n}"
        )));
    }
    Ok(out)
}

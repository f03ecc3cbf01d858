//! Orbit iteration and finite-depth membership certificates: the anchored
//! fast-escaping set (orbit dominates the iterated maximum modulus), the
//! shifted version, the logarithmic-derivative Julia criterion, and the
//! parallel grid classifier used for rendering.
//!
//! Deep iteration past float range loses the argument of the iterate mod 2π,
//! so every classification here is an explicit finite-depth certificate.

use crate::error::{Error, Result};
use crate::expsum::{iterate_max_modulus_tower, iterate_mu_tower, ExpSum};
use crate::sampling::with_pool;
use crate::tower::{Rounding, TowerPair, TowerReal};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;

/// Orbit continuation in log coordinates after overflow: w ≈ log f(z), with
/// the dominant term index that justified the continuation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogPoint {
    pub w: Complex64,
    pub dominant: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub z0: Complex64,
    /// Iterates while in float range, starting with z0.
    pub points: Vec<Complex64>,
    /// At most one log-coordinate continuation step; deeper continuation
    /// would be numerically meaningless.
    pub log_points: Vec<LogPoint>,
    /// |z_k f'(z_k)/f(z_k)| at each recorded float point (NaN where f = 0).
    pub factors: Vec<f64>,
    pub depth_reached: usize,
    /// Index of the first iterate that left float range, if any.
    pub overflow_depth: Option<usize>,
}

/// Tolerated ψ bound when continuing one step in log coordinates.
const LOG_CONTINUATION_PSI: f64 = 1.0 / 51.0;

pub fn iterate_orbit(f: &ExpSum, z0: Complex64, max_depth: usize) -> OrbitRecord {
    let mut points = vec![z0];
    let mut factors = vec![f.log_derivative_factor(z0).unwrap_or(f64::NAN)];
    let mut log_points = Vec::new();
    let mut overflow_depth = None;
    for k in 0..max_depth {
        let z = points[k];
        match f.evaluate(z) {
            Ok(next) => {
                points.push(next);
                factors.push(f.log_derivative_factor(next).unwrap_or(f64::NAN));
            }
            Err(_) => {
                overflow_depth = Some(k + 1);
                let d = f.dominant_term(z);
                let psi_ok = f
                    .psi_jet(d, z)
                    .map(|[p, _, _]| p.norm() < LOG_CONTINUATION_PSI)
                    .unwrap_or(false);
                if psi_ok {
                    log_points.push(LogPoint {
                        w: f.log_evaluate(z),
                        dominant: d,
                    });
                }
                break;
            }
        }
    }
    let depth_reached = points.len() - 1 + log_points.len();
    OrbitRecord {
        z0,
        points,
        log_points,
        factors,
        depth_reached,
        overflow_depth,
    }
}

impl OrbitRecord {
    /// Certified enclosure of |f^n(z0)| where computable: exact floats while
    /// in range, a ψ-band tower for the single log-continued level.
    pub fn modulus_level(&self, n: usize) -> Option<TowerPair> {
        if n < self.points.len() {
            return Some(TowerPair::exact(self.points[n].norm()));
        }
        if n == self.points.len() && !self.log_points.is_empty() {
            let re = self.log_points[0].w.re;
            let slop = 1e-9 * re.abs().max(1.0);
            return Some(TowerPair {
                lower: TowerReal::new_dir(1, re - slop, Rounding::Down),
                upper: TowerReal::new_dir(1, re + slop, Rounding::Up),
            });
        }
        None
    }

    pub fn escapes_heuristically(&self, escape_radius: f64) -> bool {
        if self.overflow_depth.is_some() {
            return true;
        }
        let m: Vec<f64> = self.points.iter().map(|z| z.norm()).collect();
        m.windows(4)
            .any(|w| w[3] > escape_radius && w[0] < w[1] && w[1] < w[2] && w[2] < w[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Label {
    Escaping,
    InAR,
    InA(u32),
    JuliaOrMCFC,
    Julia,
    Undetermined,
}

impl Label {
    pub fn name(&self) -> String {
        match self {
            Label::InA(l) => format!("InA({l})"),
            other => format!("{other:?}"),
        }
    }
}

/// A finite-depth membership certificate.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub label: Label,
    pub depth: usize,
    pub detail: String,
    pub failed_at: Option<usize>,
}

impl Classification {
    fn new(label: Label, depth: usize, detail: impl Into<String>) -> Self {
        Classification {
            label,
            depth,
            detail: detail.into(),
            failed_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LevelCheck {
    Holds,
    Fails,
    Gap,
}

fn compare_level(orbit: TowerPair, bound: TowerPair) -> LevelCheck {
    if orbit.lower == orbit.upper && bound.lower == bound.upper {
        // both exact floats: compare directly so equality counts as holding
        return if orbit.lower >= bound.lower {
            LevelCheck::Holds
        } else {
            LevelCheck::Fails
        };
    }
    if orbit.lower >= bound.upper {
        LevelCheck::Holds
    } else if orbit.upper < bound.lower {
        LevelCheck::Fails
    } else {
        LevelCheck::Gap
    }
}

pub const ESCAPE_RADIUS_DEFAULT: f64 = 1e6;

/// Does |f^n(z0)| >= M^n(R, f) hold for all checkable n <= depth?
pub fn classify_ar(f: &ExpSum, z0: Complex64, r0: f64, depth: usize) -> Result<Classification> {
    let towers = iterate_max_modulus_tower(f, r0, depth)?;
    let orbit = iterate_orbit(f, z0, depth);
    classify_ar_with(f, &orbit, &towers, depth)
}

/// Same check against precomputed M^n tracks (shared across a grid).
pub fn classify_ar_with(
    _f: &ExpSum,
    orbit: &OrbitRecord,
    towers: &[TowerPair],
    depth: usize,
) -> Result<Classification> {
    let mut checked = 0usize;
    for n in 1..=depth.min(towers.len()) {
        let Some(level) = orbit.modulus_level(n) else {
            break;
        };
        match compare_level(level, towers[n - 1]) {
            LevelCheck::Holds => checked = n,
            LevelCheck::Fails => {
                let label = if orbit.escapes_heuristically(ESCAPE_RADIUS_DEFAULT) {
                    Label::Escaping
                } else {
                    Label::Undetermined
                };
                let mut c = Classification::new(
                    label,
                    n,
                    format!("orbit drops below the iterated maximum modulus at level {n}"),
                );
                c.failed_at = Some(n);
                return Ok(c);
            }
            LevelCheck::Gap => {
                return Ok(Classification::new(
                    Label::Undetermined,
                    n,
                    "comparison tighter than the certified track gap",
                ));
            }
        }
    }
    if checked == 0 {
        return Ok(Classification::new(
            Label::Undetermined,
            0,
            "no comparable level",
        ));
    }
    Ok(Classification::new(
        Label::InAR,
        checked,
        format!("certified to depth {checked}"),
    ))
}

/// Least shift ℓ <= ell_max for which the shifted orbit dominates the
/// iterated μ_ε(r) = M(εr) track at every checkable level.
pub fn classify_a(
    f: &ExpSum,
    z0: Complex64,
    eps: f64,
    r0: f64,
    depth: usize,
    ell_max: u32,
) -> Result<Classification> {
    let towers = iterate_mu_tower(f, r0, eps, depth)?;
    let orbit = iterate_orbit(f, z0, depth + ell_max as usize);
    for ell in 0..=ell_max {
        let mut ok = 0usize;
        let mut failed = false;
        for n in 1..=depth.min(towers.len()) {
            let Some(level) = orbit.modulus_level(n + ell as usize) else {
                break;
            };
            match compare_level(level, towers[n - 1]) {
                LevelCheck::Holds => ok = n,
                _ => {
                    failed = true;
                    break;
                }
            }
        }
        if !failed && ok >= 1 {
            return Ok(Classification::new(
                Label::InA(ell),
                ok,
                format!("shifted orbit dominates mu-iterates to depth {ok}"),
            ));
        }
    }
    Ok(Classification::new(
        Label::Undetermined,
        depth,
        "no admissible shift found",
    ))
}

/// The logarithmic-derivative criterion: an escaping orbit along which every
/// computed |z_n f'(z_n)/f(z_n)| stays >= λ is in the Julia set (the family
/// has no multiply connected Fatou components). A partial, finite-depth
/// certificate; any computed factor below λ yields Undetermined.
pub fn julia_criterion(
    f: &ExpSum,
    z0: Complex64,
    lambda: f64,
    depth: usize,
) -> Result<Classification> {
    if !(lambda > 1.0) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} must exceed 1"
        )));
    }
    let orbit = iterate_orbit(f, z0, depth);
    for (k, factor) in orbit.factors.iter().enumerate() {
        if factor.is_nan() {
            return Err(Error::ZeroValue(orbit.points[k]));
        }
    }
    if !orbit.escapes_heuristically(ESCAPE_RADIUS_DEFAULT) {
        return Ok(Classification::new(
            Label::Undetermined,
            orbit.depth_reached,
            "orbit not classified escaping at this depth",
        ));
    }
    let checked = orbit.factors.len().min(depth + 1);
    if let Some(bad) = orbit.factors[..checked].iter().position(|&v| v < lambda) {
        let mut c = Classification::new(
            Label::Undetermined,
            orbit.depth_reached,
            format!(
                "factor {} < lambda at orbit index {bad}",
                orbit.factors[bad]
            ),
        );
        c.failed_at = Some(bad);
        return Ok(c);
    }
    // JuliaOrMCFC upgrades to Julia: finite-order exponential sums satisfy
    // the two-sided growth condition, which rules out multiply connected
    // Fatou components.
    Ok(Classification::new(
        Label::Julia,
        orbit.depth_reached,
        format!("escaping with all {checked} computed factors >= {lambda}; MCFC excluded"),
    ))
}

/// Rectangle window for grid classification, in plane coordinates.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridParams {
    pub r0: f64,
    pub depth: usize,
    pub escape_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridClassification {
    pub window: Window,
    pub width: usize,
    pub height: usize,
    pub params: GridParams,
    pub labels: Vec<Label>,
    pub histogram: BTreeMap<String, u64>,
}

/// Per-pixel classification at pixel centers; row 0 is the top of the window.
pub fn classify_grid(
    f: &ExpSum,
    window: Window,
    width: usize,
    height: usize,
    params: GridParams,
    workers: usize,
) -> Result<GridClassification> {
    use rayon::prelude::*;
    if width < 2 || height < 2 {
        return Err(Error::Precondition(
            "resolution must be at least 2x2".into(),
        ));
    }
    let towers = iterate_max_modulus_tower(f, params.r0, params.depth)?;
    let dx = (window.x1 - window.x0) / width as f64;
    let dy = (window.y1 - window.y0) / height as f64;
    let rows: Vec<Vec<Label>> = with_pool(workers, || {
        (0..height)
            .into_par_iter()
            .map(|r| {
                let y = window.y1 - (r as f64 + 0.5) * dy;
                (0..width)
                    .map(|c| {
                        let z = Complex64::new(window.x0 + (c as f64 + 0.5) * dx, y);
                        classify_pixel(f, z, &towers, &params)
                    })
                    .collect()
            })
            .collect()
    });
    let labels: Vec<Label> = rows.into_iter().flatten().collect();
    let mut histogram = BTreeMap::new();
    for l in &labels {
        *histogram.entry(l.name()).or_insert(0u64) += 1;
    }
    Ok(GridClassification {
        window,
        width,
        height,
        params,
        labels,
        histogram,
    })
}

/// One pixel: anchored fast escape first, then the escape heuristic.
pub fn classify_pixel(
    f: &ExpSum,
    z: Complex64,
    towers: &[TowerPair],
    params: &GridParams,
) -> Label {
    let orbit = iterate_orbit(f, z, params.depth);
    match classify_ar_with(f, &orbit, towers, params.depth) {
        Ok(c) if c.label == Label::InAR => Label::InAR,
        _ if orbit.escapes_heuristically(params.escape_radius) => Label::Escaping,
        _ => Label::Undetermined,
    }
}

/// Fixed palette for the escape-classification images.
pub fn label_color(label: Label) -> [u8; 3] {
    match label {
        Label::InAR => [24, 64, 160],
        Label::InA(_) => [0, 128, 128],
        Label::Julia => [16, 16, 16],
        Label::JuliaOrMCFC => [96, 24, 96],
        Label::Escaping => [232, 146, 44],
        Label::Undetermined => [208, 208, 208],
    }
}

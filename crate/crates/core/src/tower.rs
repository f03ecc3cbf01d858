//! Level-index ("tower") reals: a value is stored as `exp∘exp∘…∘exp` (height
//! times) applied to a float top. Canonical form keeps the top in `[1, e)`
//! whenever the height is positive, which makes comparison lexicographic in
//! `(height, top)`.
//!
//! Tracks that advance a tower through `r ↦ exp(s·r + c)` carry directed
//! rounding, so a lower track never exceeds the true value and an upper track
//! never undershoots it (up to the faithful rounding of `f64::ln`/`exp`,
//! covered by a two-ulp bump on every float operation).

use serde::Serialize;
use std::cmp::Ordering;
use std::fmt;

/// Direction of rounding applied to the float operations of a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Down,
    Exact,
    Up,
}

fn bump(x: f64, dir: Rounding) -> f64 {
    match dir {
        Rounding::Exact => x,
        Rounding::Up => x.next_up().next_up(),
        Rounding::Down => x.next_down().next_down(),
    }
}

/// Canonical level-index representation of `exp^height(top)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TowerReal {
    pub height: u32,
    pub top: f64,
}

impl TowerReal {
    /// Build and normalize; `top` must be finite.
    pub fn new(height: u32, top: f64) -> Self {
        Self::new_dir(height, top, Rounding::Exact)
    }

    /// Build and normalize with directed rounding on the float steps.
    pub fn new_dir(height: u32, top: f64, dir: Rounding) -> Self {
        assert!(top.is_finite(), "tower top must be finite, got {top}");
        let mut h = height;
        let mut x = top;
        while x >= std::f64::consts::E {
            x = bump(x.ln(), dir);
            h += 1;
        }
        while h >= 1 && x < 1.0 {
            x = bump(x.exp(), dir);
            h -= 1;
        }
        TowerReal { height: h, top: x }
    }

    pub fn from_f64(v: f64) -> Self {
        Self::new(0, v)
    }

    /// Canonical check: used by tests; `new` always returns canonical values.
    pub fn is_canonical(&self) -> bool {
        if self.height == 0 {
            self.top < std::f64::consts::E
        } else {
            (1.0..std::f64::consts::E).contains(&self.top)
        }
    }

    /// Materialize as f64 if the value does not exceed `cap`.
    pub fn to_f64_capped(&self, cap: f64) -> Option<f64> {
        let mut v = self.top;
        for _ in 0..self.height {
            if v > 709.0 {
                return None;
            }
            v = v.exp();
        }
        (v <= cap).then_some(v)
    }

    pub fn to_f64(&self) -> Option<f64> {
        self.to_f64_capped(f64::MAX)
    }

    /// Exact exponential: raises the height by one, then renormalizes.
    pub fn exp(&self) -> Self {
        Self::new(self.height + 1, self.top)
    }

    /// Natural log. For height zero the value must be positive.
    pub fn ln(&self, dir: Rounding) -> Self {
        if self.height >= 1 {
            TowerReal {
                height: self.height - 1,
                top: self.top,
            }
        } else {
            assert!(self.top > 0.0, "ln of non-positive tower value");
            Self::new_dir(0, bump(self.top.ln(), dir), dir)
        }
    }

    /// `exp(scale·v + shift)` for the represented value `v`, with directed
    /// rounding. `scale` must be positive. This is the single primitive the
    /// maximum-modulus and beta tracks are built from: the shift is absorbed
    /// at whatever depth of the log chain still resolves it in f64.
    pub fn exp_scale_shift(&self, scale: f64, shift: f64, dir: Rounding) -> Self {
        assert!(scale > 0.0 && scale.is_finite());
        assert!(shift.is_finite());
        const MATERIALIZE_CAP: f64 = 1e15;
        if let Some(v) = self.to_f64_capped(MATERIALIZE_CAP) {
            let arg = bump(scale * v + shift, dir);
            return Self::new_dir(1, arg, dir);
        }
        // v > 1e15: scale·v + shift = exp(ln v + ln scale + ln(1 + shift/(scale v))).
        let ratio = match self.to_f64() {
            Some(v) => shift / (scale * v),
            None => shift.signum() * 1e-200,
        };
        let xi = bump(ratio.ln_1p(), dir);
        let inner = self
            .ln(dir)
            .exp_scale_shift(1.0, bump(bump(scale.ln(), dir) + xi, dir), dir);
        inner.exp()
    }
}

impl fmt::Display for TowerReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.height {
            0 => write!(f, "{}", self.top),
            1 => write!(f, "exp({})", self.top),
            h => write!(f, "exp^{}({})", h, self.top),
        }
    }
}

impl PartialEq for TowerReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TowerReal {}

impl PartialOrd for TowerReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TowerReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.height.cmp(&other.height) {
            Ordering::Equal => self.top.total_cmp(&other.top),
            ord => ord,
        }
    }
}

/// A certified enclosure of a quantity that may exceed float range.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct TowerPair {
    pub lower: TowerReal,
    pub upper: TowerReal,
}

impl TowerPair {
    pub fn exact(v: f64) -> Self {
        let t = TowerReal::from_f64(v);
        TowerPair { lower: t, upper: t }
    }
}

//! Numerical dynamics of exponential sums f(z) = Σ a_k exp(ω_n^k z).
//!
//! The crate certifies, by sampling with recorded seeds and margins, the
//! machinery behind two structural facts about these families for n >= 3:
//! the set of points escaping at the iterated-maximum-modulus rate has
//! positive area inside the Julia set, and it forms a spider's web. The
//! pieces: sector estimates where a single exponential term dominates
//! ([`estimates`]), the plane decomposition those estimates live on
//! ([`geometry`]), orbit classification against tower-valued growth tracks
//! ([`dynamics`], [`tower`]), the box-refinement survival measure
//! ([`refinement`]) and the nested-domain web certificate ([`spiderweb`]).
//!
//! Everything is a finite-depth, sampled certificate: reports carry seeds,
//! margins and witnesses, never a claim of proof.

pub mod dynamics;
pub mod error;
pub mod estimates;
pub mod expsum;
pub mod geometry;
pub mod ppm;
pub mod refinement;
pub mod sampling;
pub mod spiderweb;
pub mod tower;

pub use error::{Error, Result};
pub use expsum::ExpSum;
pub use tower::{TowerPair, TowerReal};

use num_complex::Complex64;

/// Built-in family aliases used by the command-line tools and tests.
pub fn family_from_alias(alias: &str) -> Option<ExpSum> {
    let mk = |coeffs: Vec<Complex64>| ExpSum::new(coeffs).ok();
    match alias {
        "exp" => mk(vec![Complex64::new(1.0, 0.0)]),
        "cosine" => mk(vec![Complex64::new(0.5, 0.0); 2]),
        "cosx" => mk(vec![Complex64::new(0.5, 0.0); 4]),
        _ => {
            let k: usize = alias.strip_prefix("en:")?.parse().ok()?;
            if k == 0 {
                return None;
            }
            mk(vec![Complex64::new(1.0, 0.0); k])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_resolve() {
        assert_eq!(family_from_alias("exp").unwrap().order(), 1);
        assert_eq!(family_from_alias("cosine").unwrap().order(), 2);
        assert_eq!(family_from_alias("cosx").unwrap().order(), 4);
        assert_eq!(family_from_alias("en:5").unwrap().order(), 5);
        assert!(family_from_alias("nope").is_none());
        assert!(family_from_alias("en:0").is_none());
    }

    #[test]
    fn cosx_alias_is_cos_plus_cosh() {
        let g = family_from_alias("cosx").unwrap();
        for &(x, y) in &[(2.0, 0.0), (1.0, 3.0), (-4.0, 0.5)] {
            let z = Complex64::new(x, y);
            let direct = z.cos() + z.cosh();
            let v = g.evaluate(z).unwrap();
            assert!((v - direct).norm() <= 1e-12 * direct.norm().max(1.0));
        }
    }
}

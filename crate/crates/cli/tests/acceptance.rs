//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! The criteria are serialized through a global lock so the timed ones get
//! the whole machine.

use expweb_cli::commands::{cmd_render, cmd_verify, cmd_web, to_stable_json};
use expweb_cli::config::{FamilySpec, RunConfig};
use expweb_core::dynamics::{classify_ar, iterate_orbit, julia_criterion, Label};
use expweb_core::estimates::{
    distortion_estimate, distortion_product_bound, find_nu_prime, nonlinearity,
    sample_sector_boxes, tau_floor, verify_component_estimates, VerifyOptions, NU_PRIME_MARGIN,
};
use expweb_core::expsum::{max_modulus, max_modulus_log_bounds};
use expweb_core::geometry::{Region, RegionDecomposition};
use expweb_core::refinement::{
    area_lower_bound, certify_point, make_params, survival_fraction, ParamOverrides,
};
use expweb_core::spiderweb::{certify_web, make_web_params, StepMode, WebOptions};
use expweb_core::{family_from_alias, ExpSum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

fn lock() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

fn family(alias: &str) -> ExpSum {
    family_from_alias(alias).unwrap()
}

fn report(criterion: usize, what: &str, pass: bool, secs: f64) {
    println!(
        "criterion {criterion} ({what}): {} [{secs:.2}s]",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {what}");
}

fn base_config(alias: &str) -> RunConfig {
    RunConfig {
        family: FamilySpec::Alias(alias.into()),
        seed: 1,
        workers: 2,
        out: None,
        nu: None,
        sigma: None,
        eta: None,
        tau: None,
        eps0: None,
        window: None,
        res: None,
        samples: None,
        depth: None,
        dump_survivors: None,
    }
}

#[test]
fn criterion_1_sector_inequality_suite() {
    let _g = lock();
    let t0 = Instant::now();
    let mut all = true;
    for alias in ["cosx", "en:3", "en:5"] {
        let f = family(alias);
        let eta = 51.0;
        let tau = tau_floor(&f, eta);
        let opts = VerifyOptions {
            tau: Some(tau),
            ..Default::default()
        };
        let (nu_prime, _) = find_nu_prime(&f, eta, tau, 1500, 1, &opts).unwrap();
        let rep = verify_component_estimates(&f, nu_prime, eta, 10_000, 1, &opts).unwrap();
        let ok = rep.pass && rep.min_margin() >= NU_PRIME_MARGIN && rep.inequalities.len() == 5;
        println!(
            "  {alias}: nu' = {nu_prime:.3}, worst margin {:.3} over {} samples/sector",
            rep.min_margin(),
            rep.samples_per_sector
        );
        all &= ok;
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        1,
        "five sector inequalities at nu' with 10% margin",
        all && secs < 30.0,
        secs,
    );
}

#[test]
fn criterion_2_growth_bounds() {
    let _g = lock();
    let t0 = Instant::now();
    let mut all = true;
    for alias in ["exp", "cosine", "cosx", "en:3", "en:5"] {
        let f = family(alias);
        for &r in &[30.0, 60.0, 100.0] {
            let lm = max_modulus(&f, r).unwrap().ln();
            let (lo, hi) = max_modulus_log_bounds(&f, r);
            all &= lm >= lo - 1e-9 && lm <= hi + 1e-9;
        }
    }
    report(
        2,
        "log M(r) within [r + log(min|a|/2), r + log sum|a|]",
        all,
        t0.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_3_distortion_bounds() {
    let _g = lock();
    let t0 = Instant::now();
    let f = family("cosx");
    let eta = 51.0;
    let tau = tau_floor(&f, eta);
    let opts = VerifyOptions {
        tau: Some(tau),
        ..Default::default()
    };
    let (nu_prime, _) = find_nu_prime(&f, eta, tau, 1000, 1, &opts).unwrap();
    let boxes = sample_sector_boxes(&f, nu_prime, tau, 0.08, 100, 42).unwrap();
    let mut schubert_ok = true;
    for b in &boxes {
        let n_val = nonlinearity(&f, b, 512).unwrap();
        let l = distortion_estimate(&f, 1, b, 800, 7).unwrap().l;
        schubert_ok &= l <= 1.0 + 8.0 * n_val + 1e-6;
    }
    // partial-product oracle, computed here and compared against the library
    let mut oracle = 1.0f64;
    let base = 8.0 * 2.0 * 0.08 * std::f64::consts::SQRT_2;
    for m in 0..400 {
        oracle *= 1.0 + base * 0.5f64.powi(m);
    }
    let lambda = distortion_product_bound(2.0, 0.08, 2.0).unwrap();
    let lambda_ok = lambda.is_finite()
        && (lambda - oracle).abs() < 1e-9 * oracle
        && (lambda - 11.86).abs() < 0.02;
    let budget = 2.0 * 0.08 * std::f64::consts::SQRT_2;
    let gate_ok = budget < 0.25 && distortion_product_bound(2.0, 0.1, 2.0).is_err();
    println!("  lambda = {lambda:.4}, budget M s sqrt2 = {budget:.4}");
    report(
        3,
        "sampled L <= 1 + 8N on 100 boxes; product bound converges",
        schubert_ok && lambda_ok && gate_ok,
        t0.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_4_survival_and_loss_scaling() {
    let _g = lock();
    let t0 = Instant::now();
    let f = family("cosx");
    // survival at nu0 = 12 with 1e5 samples, default gates
    let ov12 = ParamOverrides {
        nu0: Some(12.0),
        nu_prime: Some(8.0),
        ..Default::default()
    };
    let p12 = make_params(&f, 1, &ov12).unwrap();
    let rep12 = survival_fraction(&f, &p12, 1, 100_000, 1, 2).unwrap();
    let survival_ok = rep12.wilson_low >= 0.999;
    println!(
        "  nu0 = 12: fraction {:.5}, Wilson [{:.5}, {:.5}]",
        rep12.fraction, rep12.wilson_low, rep12.wilson_high
    );
    // loss-exponent fit over nu0 in {10, 12, 14}; the large-compared-to
    // multiple is relaxed (it is configurable) so nu0 = 10 is admissible
    let mut points = Vec::new();
    for (nu0, samples) in [(10.0, 100_000u64), (12.0, 200_000), (14.0, 800_000)] {
        let ov = ParamOverrides {
            nu0: Some(nu0),
            nu_prime: Some(8.0),
            large_multiple: Some(50.0),
            ..Default::default()
        };
        let p = make_params(&f, 1, &ov).unwrap();
        let rep = survival_fraction(&f, &p, 1, samples, 1, 2).unwrap();
        let loss = 1.0 - rep.fraction;
        println!(
            "  nu0 = {nu0}: loss {loss:.3e} ({} of {})",
            rep.samples - rep.survivors,
            rep.samples
        );
        assert!(loss > 0.0, "loss mechanism inactive at nu0 = {nu0}");
        points.push((nu0, loss.ln()));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    println!("  fitted loss exponent slope = {slope:.3}");
    let slope_ok = (slope + 1.0).abs() <= 0.3;
    let secs = t0.elapsed().as_secs_f64();
    report(
        4,
        "survival >= 0.999 at nu0 = 12; loss slope -1 +/- 0.3",
        survival_ok && slope_ok && secs < 60.0,
        secs,
    );
}

#[test]
fn criterion_5_positive_area_surrogate() {
    let _g = lock();
    let t0 = Instant::now();
    let f = family("cosx");
    let ov = ParamOverrides {
        nu0: Some(12.0),
        nu_prime: Some(8.0),
        ..Default::default()
    };
    let params = make_params(&f, 1, &ov).unwrap();
    let rep = survival_fraction(&f, &params, 1, 100_000, 1, 2).unwrap();
    let lost = (rep.samples - rep.survivors).max(1);
    let loss_constant = lost as f64 / rep.samples as f64 * params.nu0().exp();
    let bound = area_lower_bound(&params, loss_constant, 4);
    let delta_ok = bound.delta_with_tail > 0.99;
    // depth-2 certificates on 10^3 surviving samples
    let dec1 = RegionDecomposition::new(&f, params.alpha(params.nu0()), params.tau()).unwrap();
    let clearance = params.sigma() * std::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut certified = 0usize;
    let mut tested = 0usize;
    while tested < 1000 {
        let z = params
            .seed_box()
            .point(rng.gen(), rng.gen(), params.sigma());
        let w = f.evaluate(z).unwrap();
        let surviving = matches!(dec1.locate(w), Region::InComponent(_))
            && dec1.boundary_distance(w) > clearance
            && (0..4).all(|k| dec1.strip_distance(k, w) > clearance);
        if !surviving {
            continue;
        }
        tested += 1;
        if certify_point(&f, &params, z, 2).unwrap().label == Label::Julia {
            certified += 1;
        }
    }
    let cert_ok = certified >= 990;
    println!(
        "  delta = {:.6}, certificates {certified}/1000",
        bound.delta_with_tail
    );
    report(
        5,
        "area product > 0.99 and 99% depth-2 certificates",
        delta_ok && cert_ok,
        t0.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_6_spiders_web_certificates() {
    let _g = lock();
    let t0 = Instant::now();
    let mut all = true;
    for alias in ["cosx", "en:5"] {
        let f = family(alias);
        let params = make_web_params(&f, 1, &WebOptions::default()).unwrap();
        let (inclusion, steps, certified) = certify_web(&f, &params, 3, 4096, 6, 2).unwrap();
        let inclusion_ok = inclusion.len() >= 7 && inclusion.iter().all(|l| l.pass == Some(true));
        let mut steps_ok = true;
        for s in &steps {
            steps_ok &= s.pass_b;
            if s.mode == StepMode::Explicit {
                steps_ok &= s.winding.is_some_and(|w| w != 0);
                steps_ok &= s.min_mod_boundary > s.sup_next_radius;
            }
        }
        println!(
            "  {alias}: nu = {:.2}, certified depth {certified}, step modes {:?}",
            params.nu,
            steps.iter().map(|s| s.mode).collect::<Vec<_>>()
        );
        all &= inclusion_ok && steps_ok && certified >= 3;
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        6,
        "web certified to depth 3, inclusion to 6, windings stable",
        all && secs < 60.0,
        secs,
    );
}

#[test]
fn criterion_7_negative_controls() {
    let _g = lock();
    let t0 = Instant::now();
    let mut all = true;
    for alias in ["exp", "cosine"] {
        let outcome = cmd_web(&base_config(alias)).unwrap();
        let gate = outcome.report["gate"].as_str().unwrap_or("");
        all &= !outcome.pass && gate.contains("not a spider's web");
    }
    // the hypothesis check is Undetermined at the critical point z = 0
    let g = family("cosx");
    let c = julia_criterion(&g, Complex64::new(0.0, 0.0), 2.0, 6).unwrap();
    all &= c.label == Label::Undetermined;
    report(
        7,
        "orders 1, 2 rejected; z = 0 hypothesis undetermined",
        all,
        t0.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_8_exactness_anchors() {
    let _g = lock();
    let t0 = Instant::now();
    let f = family("exp");
    let mut all = true;
    for &r in &[1.0, 5.0, 20.0] {
        let m = max_modulus(&f, r).unwrap();
        all &= (m - r.exp()).abs() <= 1e-12 * r.exp();
    }
    let c = classify_ar(&f, Complex64::new(1.0, 0.0), 1.0, 3).unwrap();
    all &= c.label == Label::InAR;
    // chain-rule factor identity at depth <= 3
    let z0 = Complex64::new(1.1, 0.7);
    let orbit = iterate_orbit(&f, z0, 3);
    for n in 1..orbit.points.len() {
        let prod: f64 = orbit.factors[..n].iter().product::<f64>() / z0.norm();
        let mut deriv = Complex64::new(1.0, 0.0);
        for k in 0..n {
            deriv *= f.derivative(orbit.points[k], 1).unwrap();
        }
        let direct = deriv.norm() / orbit.points[n].norm();
        all &= (prod / direct - 1.0).abs() < 1e-9;
    }
    report(
        8,
        "exponential-family identities",
        all,
        t0.elapsed().as_secs_f64(),
    );
}

#[test]
fn criterion_9_determinism() {
    let _g = lock();
    let t0 = Instant::now();
    // verify: identical config twice, byte-identical reports
    let mut cfg = base_config("cosx");
    cfg.samples = Some(1500);
    let a = to_stable_json(&cmd_verify(&cfg).unwrap().report);
    let b = to_stable_json(&cmd_verify(&cfg).unwrap().report);
    let verify_ok = a == b;
    // web report determinism
    let wa = to_stable_json(&cmd_web(&base_config("cosx")).unwrap().report);
    let wb = to_stable_json(&cmd_web(&base_config("cosx")).unwrap().report);
    // render: identical config twice, byte-identical image and sidecar
    let dir = std::env::temp_dir().join("expweb-acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let mut rcfg = base_config("cosx");
    rcfg.res = Some([32, 32]);
    rcfg.out = Some(dir.join("det"));
    cmd_render(&rcfg).unwrap();
    let ppm1 = std::fs::read(dir.join("det.ppm")).unwrap();
    let json1 = std::fs::read(dir.join("det.json")).unwrap();
    cmd_render(&rcfg).unwrap();
    let render_ok = ppm1 == std::fs::read(dir.join("det.ppm")).unwrap()
        && json1 == std::fs::read(dir.join("det.json")).unwrap();
    report(
        9,
        "byte-identical reports and images across reruns",
        verify_ok && wa == wb && render_ok,
        t0.elapsed().as_secs_f64(),
    );
}

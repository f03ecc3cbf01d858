//! The four pipelines behind the subcommands. Each returns a JSON report
//! (with the resolved config embedded) plus a pass/fail verdict; writing
//! files and choosing exit codes is the binary's job.

use crate::config::RunConfig;
use anyhow::{anyhow, Context};
use expweb_core::dynamics::{classify_grid, GridParams, Window, ESCAPE_RADIUS_DEFAULT};
use expweb_core::estimates::{
    bk_condition_check, distortion_estimate, distortion_product_bound, find_nu_prime, nonlinearity,
    sample_sector_boxes, tau_floor, verify_component_estimates, VerifyOptions, ETA_DEFAULT,
    SIGMA_DEFAULT,
};
use expweb_core::expsum::{log_bounds_onset, max_modulus};
use expweb_core::refinement::{area_lower_bound, make_params, survival_fraction, ParamOverrides};
use expweb_core::sampling::with_pool;
use expweb_core::spiderweb::{certify_web, make_web_params, WebOptions};
use expweb_core::{ppm, ExpSum};
use serde_json::{json, Value};
use std::path::PathBuf;

pub struct CommandOutcome {
    pub report: Value,
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

fn order_gate_message(n: usize) -> String {
    format!(
        "order n = {n} rejected: the sector machinery requires n >= 3; orders 1 and 2 lie in \
         the bounded-singular-value class, where the anchored fast-escaping set is not a \
         spider's web"
    )
}

pub fn cmd_verify(cfg: &RunConfig) -> anyhow::Result<CommandOutcome> {
    let f = cfg.family.build().map_err(ConfigProblem::wrap)?;
    if f.order() < 3 {
        return Ok(CommandOutcome {
            report: json!({
                "config": cfg,
                "gate": order_gate_message(f.order()),
                "pass": false,
            }),
            pass: false,
            files: vec![],
        });
    }
    let sigma = cfg.sigma.unwrap_or(SIGMA_DEFAULT);
    let eta = cfg.eta.unwrap_or(ETA_DEFAULT);
    let tau = cfg.tau.unwrap_or_else(|| tau_floor(&f, eta));
    let samples = cfg.samples.unwrap_or(2000) as usize;
    let vopts = VerifyOptions {
        tau: Some(tau),
        eps0: cfg.eps0,
        workers: cfg.workers,
    };
    let (nu_prime, estimates) = match cfg.nu {
        Some(nu) => {
            let rep = verify_component_estimates(&f, nu, eta, samples, cfg.seed, &vopts)?;
            (nu, rep)
        }
        None => find_nu_prime(&f, eta, tau, samples, cfg.seed, &vopts)?,
    };

    let spot_box = sample_sector_boxes(&f, nu_prime, tau, sigma, 1, cfg.seed)?[0];
    let n_box = nonlinearity(&f, &spot_box, 1024)?;
    let conformal = expweb_core::estimates::conformality_check(&f, &spot_box)?;
    let dist = distortion_estimate(&f, 1, &spot_box, 2000, cfg.seed)?;
    let schubert_ok = dist.l <= 1.0 + 8.0 * n_box + 1e-6;
    let lambda = distortion_product_bound(2.0, sigma, 2.0)?;
    let budget = 2.0 * sigma * std::f64::consts::SQRT_2;

    let r_lo = nu_prime.max(30.0);
    let (a, b) = bk_condition_check(&f, 2.0, r_lo, r_lo.max(300.0), 16);
    let bk_ok = a > 1.0 && b > 1.0;
    let onset = log_bounds_onset(&f, 300.0);

    let pass = estimates.pass
        && estimates.min_margin() >= expweb_core::estimates::NU_PRIME_MARGIN
        && conformal
        && schubert_ok
        && bk_ok
        && lambda.is_finite();
    let report = json!({
        "config": cfg,
        "nu_prime": nu_prime,
        "estimates": estimates,
        "conformality": {
            "box": spot_box,
            "nonlinearity": n_box,
            "pass": conformal,
        },
        "distortion": {
            "box": spot_box,
            "sampled": dist,
            "schubert_bound": 1.0 + 8.0 * n_box,
            "pass": schubert_ok,
            "product_lambda": lambda,
            "budget_ms_sqrt2": budget,
            "budget_ok": budget < 0.25,
        },
        "growth_ratio": { "c": 2.0, "r_lo": r_lo, "r_hi": r_lo.max(300.0), "a": a, "b": b, "pass": bk_ok },
        "log_bounds_onset": onset,
        "pass": pass,
    });
    Ok(CommandOutcome {
        report,
        pass,
        files: vec![],
    })
}

pub fn cmd_render(cfg: &RunConfig) -> anyhow::Result<CommandOutcome> {
    let f = cfg.family.build().map_err(ConfigProblem::wrap)?;
    let w = cfg.window.unwrap_or([-40.0, 40.0, -40.0, 40.0]);
    if !(w[0] < w[1] && w[2] < w[3]) {
        return Err(ConfigProblem::wrap(anyhow!(
            "window must satisfy x0 < x1 and y0 < y1"
        )));
    }
    let [width, height] = cfg.res.unwrap_or([256, 256]);
    if width < 2 || height < 2 {
        return Err(ConfigProblem::wrap(anyhow!(
            "resolution must be at least 2x2"
        )));
    }
    let window = Window {
        x0: w[0],
        x1: w[1],
        y0: w[2],
        y1: w[3],
    };
    let r0 = expanding_radius(&f)?;
    let params = GridParams {
        r0,
        depth: cfg.depth.unwrap_or(8),
        escape_radius: ESCAPE_RADIUS_DEFAULT,
    };
    let grid = with_pool(cfg.workers, || {
        classify_grid(&f, window, width, height, params, 0)
    })?;
    let base = cfg.out.clone().unwrap_or_else(|| PathBuf::from("render"));
    let ppm_path = base.with_extension("ppm");
    let json_path = base.with_extension("json");
    ppm::write_ppm(&ppm_path, &grid).context("writing ppm")?;
    let sidecar = json!({
        "config": cfg,
        "window": grid.window,
        "resolution": [grid.width, grid.height],
        "params": grid.params,
        "histogram": grid.histogram,
    });
    std::fs::write(&json_path, to_stable_json(&sidecar)).context("writing sidecar")?;
    Ok(CommandOutcome {
        report: sidecar,
        pass: true,
        files: vec![ppm_path, json_path],
    })
}

/// Smallest doubling radius with M(R) > R.
fn expanding_radius(f: &ExpSum) -> anyhow::Result<f64> {
    let mut r = 1.0;
    for _ in 0..16 {
        if max_modulus(f, r)? > r {
            return Ok(r);
        }
        r *= 2.0;
    }
    Err(anyhow!("no expanding radius found below {r}"))
}

pub fn cmd_area(cfg: &RunConfig) -> anyhow::Result<CommandOutcome> {
    let f = cfg.family.build().map_err(ConfigProblem::wrap)?;
    if f.order() < 3 {
        return Ok(CommandOutcome {
            report: json!({ "config": cfg, "gate": order_gate_message(f.order()), "pass": false }),
            pass: false,
            files: vec![],
        });
    }
    let ov = ParamOverrides {
        sigma: cfg.sigma,
        eta: cfg.eta,
        tau: cfg.tau,
        eps0: cfg.eps0,
        nu0: cfg.nu,
        workers: cfg.workers,
        ..Default::default()
    };
    let params = make_params(&f, cfg.seed, &ov)?;
    let samples = cfg.samples.unwrap_or(100_000);
    let survival = survival_fraction(&f, &params, 1, samples, cfg.seed, cfg.workers)?;
    let lost = survival.samples - survival.survivors;
    let loss_constant = (lost.max(1) as f64 / survival.samples as f64) * params.nu0().exp();
    let levels = cfg.depth.unwrap_or(4);
    let bound = area_lower_bound(&params, loss_constant, levels);

    let mut files = vec![];
    if let Some(path) = &cfg.dump_survivors {
        dump_survivors_csv(&f, &params, samples.min(100_000), cfg.seed, path)?;
        files.push(path.clone());
    }
    let pass = bound.delta_with_tail > 0.99 && survival.fraction >= 0.99;
    let report = json!({
        "config": cfg,
        "params": params,
        "survival": survival,
        "loss_constant": loss_constant,
        "levels": levels,
        "area_bound": bound,
        "delta": bound.delta_with_tail,
        "pass": pass,
    });
    Ok(CommandOutcome {
        report,
        pass,
        files,
    })
}

fn dump_survivors_csv(
    f: &ExpSum,
    params: &expweb_core::refinement::RefinementParams,
    n: u64,
    seed: u64,
    path: &std::path::Path,
) -> anyhow::Result<()> {
    use expweb_core::geometry::{Region, RegionDecomposition};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dec = RegionDecomposition::new(f, params.alpha(params.nu0()), params.tau())
        .map_err(|e| anyhow!("{e}"))?;
    let clearance = params.sigma() * std::f64::consts::SQRT_2;
    let mut out = String::from("z_re,z_im,image_re,image_im,survived\n");
    for _ in 0..n {
        let z = params
            .seed_box()
            .point(rng.gen::<f64>(), rng.gen::<f64>(), params.sigma());
        let w = f.evaluate(z).map_err(|e| anyhow!("{e}"))?;
        let ok = matches!(dec.locate(w), Region::InComponent(_))
            && dec.boundary_distance(w) > clearance
            && (0..f.order()).all(|k| dec.strip_distance(k, w) > clearance);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            z.re, z.im, w.re, w.im, ok as u8
        ));
    }
    std::fs::write(path, out).context("writing survivor dump")?;
    Ok(())
}

pub fn cmd_web(cfg: &RunConfig) -> anyhow::Result<CommandOutcome> {
    let f = cfg.family.build().map_err(ConfigProblem::wrap)?;
    if f.order() < 3 {
        return Ok(CommandOutcome {
            report: json!({ "config": cfg, "gate": order_gate_message(f.order()), "pass": false }),
            pass: false,
            files: vec![],
        });
    }
    let depth = cfg.depth.unwrap_or(3);
    let opts = WebOptions {
        eta: cfg.eta,
        nu: cfg.nu,
        boundary_samples: cfg.samples.unwrap_or(4096) as usize,
        workers: cfg.workers,
        ..Default::default()
    };
    let params = make_web_params(&f, cfg.seed, &opts)?;
    let (inclusion, steps, certified) = certify_web(
        &f,
        &params,
        depth,
        opts.boundary_samples,
        opts.inclusion_depth,
        cfg.workers,
    )?;
    let pass = certified >= depth;
    let certificate = if pass {
        format!("A_R spider's web certified to depth {certified}")
    } else {
        format!("certificate reaches depth {certified} of requested {depth}")
    };
    let report = json!({
        "config": cfg,
        "params": params,
        "inclusion": inclusion,
        "steps": steps,
        "certified_depth": certified,
        "certificate": certificate,
        "consequence": "when the anchored fast-escaping set is a spider's web, the fast-escaping and escaping sets are spiders' webs as well",
        "pass": pass,
    });
    Ok(CommandOutcome {
        report,
        pass,
        files: vec![],
    })
}

/// Marker for errors that should exit with the usage/config code.
#[derive(Debug)]
pub struct ConfigProblem(pub String);

impl std::fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigProblem {}

impl ConfigProblem {
    pub fn wrap(e: anyhow::Error) -> anyhow::Error {
        anyhow::Error::new(ConfigProblem(format!("{e}")))
    }
}

/// Stable, human-diffable JSON: serde_json with a trailing newline.
pub fn to_stable_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serialization");
    s.push('\n');
    s
}

use clap::{Args, Parser, Subcommand};
use expweb_cli::commands::{
    cmd_area, cmd_render, cmd_verify, cmd_web, to_stable_json, ConfigProblem,
};
use expweb_cli::config::{FamilySpec, RunConfig};
use num_complex::Complex64;
use std::path::PathBuf;
use std::process::ExitCode;

/// Verification pipelines and escape-classification rendering for
/// exponential sums a_0 e^z + a_1 e^{ω z} + ... with ω an n-th root of unity.
#[derive(Parser)]
#[command(name = "expweb", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certify the sector inequalities, conformality, distortion and growth checks.
    Verify(CommonArgs),
    /// Render an escape-classification image (P6 PPM plus JSON sidecar).
    Render(CommonArgs),
    /// Run the box-refinement survival measure and the area lower bound.
    Area(CommonArgs),
    /// Build the nested-domain sequence and certify the spider's-web conditions.
    Web(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Family alias: exp, cosine, cosx, en:<k>.
    #[arg(long)]
    family: Option<String>,
    /// Explicit coefficients "re,im;re,im;..." (order = count).
    #[arg(long)]
    coeffs: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    /// Window "x0,x1,y0,y1".
    #[arg(long)]
    window: Option<String>,
    /// Resolution "WxH".
    #[arg(long)]
    res: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dump_survivors: Option<PathBuf>,
}

fn parse_coeffs(text: &str) -> anyhow::Result<FamilySpec> {
    let mut coeffs = Vec::new();
    for (i, part) in text.split(';').enumerate() {
        let nums: Vec<&str> = part.split(',').collect();
        if nums.len() != 2 {
            anyhow::bail!("--coeffs entry {i} must be \"re,im\", got {part:?}");
        }
        let re: f64 = nums[0].trim().parse()?;
        let im: f64 = nums[1].trim().parse()?;
        if Complex64::new(re, im).norm() == 0.0 {
            anyhow::bail!("--coeffs entry {i} is zero; all coefficients must be nonzero");
        }
        coeffs.push([re, im]);
    }
    Ok(FamilySpec::Coeffs {
        n: coeffs.len(),
        coeffs,
    })
}

fn merge(args: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let family = match (&args.family, &args.coeffs) {
                (Some(a), None) => FamilySpec::Alias(a.clone()),
                (None, Some(c)) => parse_coeffs(c)?,
                (Some(_), Some(_)) => anyhow::bail!("--family and --coeffs are exclusive"),
                (None, None) => {
                    anyhow::bail!("a family is required: --config, --family or --coeffs")
                }
            };
            RunConfig {
                family,
                seed: 1,
                workers: 0,
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
    };
    // flags win over file values
    if let Some(a) = &args.family {
        if args.config.is_some() {
            cfg.family = FamilySpec::Alias(a.clone());
        }
    }
    if let Some(c) = &args.coeffs {
        if args.config.is_some() {
            cfg.family = parse_coeffs(c)?;
        }
    }
    if let Some(v) = args.nu {
        cfg.nu = Some(v);
    }
    if let Some(v) = args.sigma {
        cfg.sigma = Some(v);
    }
    if let Some(v) = args.eta {
        cfg.eta = Some(v);
    }
    if let Some(v) = args.tau {
        cfg.tau = Some(v);
    }
    if let Some(v) = args.eps0 {
        cfg.eps0 = Some(v);
    }
    if let Some(w) = &args.window {
        let parts: Vec<f64> = w
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow::anyhow!("--window: {e}"))?;
        if parts.len() != 4 {
            anyhow::bail!("--window needs four numbers x0,x1,y0,y1");
        }
        cfg.window = Some([parts[0], parts[1], parts[2], parts[3]]);
    }
    if let Some(r) = &args.res {
        let parts: Vec<usize> = r
            .split('x')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow::anyhow!("--res: {e}"))?;
        if parts.len() != 2 {
            anyhow::bail!("--res must look like 512x512");
        }
        cfg.res = Some([parts[0], parts[1]]);
    }
    if let Some(v) = args.samples {
        cfg.samples = Some(v);
    }
    if let Some(v) = args.depth {
        cfg.depth = Some(v);
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = &args.dump_survivors {
        cfg.dump_survivors = Some(v.clone());
    }
    cfg.resolve_workers();
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (args, runner): (&CommonArgs, fn(&RunConfig) -> anyhow::Result<_>) = match &cli.cmd {
        Cmd::Verify(a) => (a, cmd_verify),
        Cmd::Render(a) => (a, cmd_render),
        Cmd::Area(a) => (a, cmd_area),
        Cmd::Web(a) => (a, cmd_web),
    };
    let cfg = merge(args).map_err(ConfigProblem::wrap)?;
    let outcome = runner(&cfg)?;
    let text = to_stable_json(&outcome.report);
    match &cfg.out {
        Some(path) if path.extension().is_none_or(|e| e == "json") => {
            let path = path.with_extension("json");
            std::fs::write(&path, &text)?;
            eprintln!("report written to {}", path.display());
        }
        _ => {}
    }
    if cfg.out.is_none() || !outcome.files.is_empty() {
        print!("{text}");
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigProblem>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

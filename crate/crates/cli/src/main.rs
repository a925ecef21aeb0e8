//! `gec`: run cache-placement experiments, query closed forms, sample
//! traffic fields and check the bound suite.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gec_core::analytics::{self as an, QuadratureSpec};
use gec_core::budget::alloc_independent;
use gec_core::demand::{sample_traffic_field, zipf_pmf, FieldParams, FieldPreset};
use gec_core::geometry::lens_area;
use gec_core::mc::{self, Engine, ExperimentConfig};
use gec_core::pointprocess::MarkDistribution;
use gec_core::Error;

#[derive(Parser)]
#[command(name = "gec", version, about = "Cache placement on Poisson networks")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GEC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its tables.
    Simulate {
        kind: SimKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a closed-form quantity, printed as JSON.
    Analytic {
        /// Quantity name; run with `list` to see them all.
        quantity: String,
        /// `--key value` pairs.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        params: Vec<String>,
    },
    /// Sample a lognormal traffic field to CSV.
    Field(FieldArgs),
    /// Run the bound suite and write validation.csv.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        /// Relative slack granted to every bound.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    HitCurve,
    CacheSize,
    Multihop,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `rng.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long, value_enum, default_value = "urban")]
    preset: PresetArg,
    #[arg(long)]
    mu_star: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    vario_scale: Option<f64>,
    #[arg(long, default_value_t = 120)]
    side: usize,
    /// Pixel edge in km.
    #[arg(long, default_value_t = 0.01)]
    pixel_size: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Urban,
    Rural,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Config(_) => (2, "config"),
            Error::Domain(_) => (2, "domain"),
            Error::Io(_) => (3, "io"),
            Error::Numeric(_) => (3, "numeric"),
            Error::InsufficientData(_) => (3, "insufficient_data"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 3, kind: "io", message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, kind: "usage", message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({"error": "threads", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate { kind, run } => simulate(kind, &run),
        Command::Analytic { quantity, params } => analytic(&quantity, &params),
        Command::Field(args) => field(&args),
        Command::Validate { run, tolerance } => validate(&run, tolerance),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::from(f.code)
        }
    }
}

fn load_config(run: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&run.config, &run.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("config not found: {} ({e})", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(usage("one of --config or --preset is required")),
    };
    if let Some(seed) = run.seed {
        cfg.rng.seed = seed;
    }
    Ok(cfg)
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), Failure> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest(mut self, cfg: &ExperimentConfig, command: &str, started: f64) -> Result<(), Failure> {
        self.files.push("manifest.json".into());
        let m = json!({
            "command": command,
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": serde_json::to_value(cfg).map_err(|e| usage(e.to_string()))?,
            "config_hash": cfg.hash(),
            "seed": cfg.rng.seed,
            "started_unix": started,
            "finished_unix": unix_seconds(),
            "outputs": self.files,
        });
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&m).expect("json") + "\n")?;
        Ok(())
    }
}

fn simulate(kind: SimKind, run: &RunArgs) -> Result<u8, Failure> {
    let cfg = load_config(run)?;
    let started = unix_seconds();
    let engine = Engine::new(cfg.clone())?;
    let mut out = OutDir::create(&run.out)?;
    let name = match kind {
        SimKind::HitCurve | SimKind::CacheSize => {
            let report = engine.sweep_tradeoff()?;
            out.write("report.json", mc::to_json(&report)?.as_bytes())?;
            let mut csv = Vec::new();
            mc::write_curves_csv(&mut csv, &report)?;
            out.write("curves.csv", &csv)?;
            if matches!(kind, SimKind::CacheSize) {
                let mut occ = String::from("policy,N_target,mean_C,var_C,p95_C,eps,abs_dev,exceed\n");
                for p in &report.points {
                    for v in &p.violations {
                        occ += &format!(
                            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                            p.policy, p.n_target, p.mean_c, p.var_c, p.p95_c, v.eps, v.abs_dev, v.exceed
                        );
                    }
                }
                out.write("occupancy.csv", occ.as_bytes())?;
                "simulate cache-size"
            } else {
                "simulate hit-curve"
            }
        }
        SimKind::Multihop => {
            let n = cfg.validation_budget();
            let k = cfg.sweep.path_length;
            let mut rows = Vec::new();
            let mut csv = String::from("policy,N_target,k,w_k,w_ci_lo,w_ci_hi,coverage_k\n");
            for policy in &cfg.policy.policies {
                let alloc = engine.allocate(policy, n)?;
                let est = engine.estimate_hit_multihop(&alloc.policy, k, 0)?;
                for (j, (w, c)) in est.weights.iter().zip(&est.coverage).enumerate() {
                    csv += &format!("{policy},{n:?},{},{:?},{:?},{:?},{c:?}\n", j + 1, w.mean, w.ci_lo, w.ci_hi);
                }
                rows.push(json!({"policy": policy, "n_target": n, "estimate": est}));
            }
            let report = json!({"config_hash": cfg.hash(), "seed": cfg.rng.seed, "multihop": rows});
            out.write("report.json", (serde_json::to_string_pretty(&report).expect("json") + "\n").as_bytes())?;
            out.write("multihop.csv", csv.as_bytes())?;
            "simulate multihop"
        }
    };
    out.manifest(&cfg, name, started)?;
    Ok(0)
}

fn validate(run: &RunArgs, tolerance: f64) -> Result<u8, Failure> {
    let cfg = load_config(run)?;
    let started = unix_seconds();
    let engine = Engine::new(cfg.clone())?;
    let rows = engine.validate_bounds(tolerance)?;
    let mut out = OutDir::create(&run.out)?;
    let mut csv = Vec::new();
    mc::write_validation_csv(&mut csv, &rows)?;
    out.write("validation.csv", &csv)?;
    out.manifest(&cfg, "validate", started)?;
    let failed: Vec<&str> = rows.iter().filter(|r| r.gating && !r.pass).map(|r| r.check.as_str()).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("{}", json!({"error": "validation", "failed": failed}));
        Ok(1)
    }
}

fn field(args: &FieldArgs) -> Result<u8, Failure> {
    let preset = match args.preset {
        PresetArg::Urban => FieldPreset::Urban,
        PresetArg::Rural => FieldPreset::Rural,
    };
    let base = preset.params();
    let params = FieldParams {
        mu_star: args.mu_star.unwrap_or(base.mu_star),
        sigma: args.sigma.unwrap_or(base.sigma),
        vario_scale: args.vario_scale.unwrap_or(base.vario_scale),
    };
    let f = sample_traffic_field(args.side, args.pixel_size, params, args.seed)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(&args.out)?);
    f.write_csv(&mut w)?;
    Ok(0)
}

const QUANTITIES: [&str; 18] = [
    "matII-intensity",
    "matII-radius",
    "matI-intensity",
    "matI-sopd",
    "sopd-matII",
    "gec-intensity",
    "gec-kernel-integral",
    "contact-indep",
    "contact-matII",
    "palm-matII",
    "palm-gec",
    "lens-area",
    "chernoff",
    "bernstein",
    "spatial-var-bound",
    "independent-allocation",
    "matII-hit-bounds",
    "matII-hit-var-bound",
];

struct Params(BTreeMap<String, String>);

impl Params {
    fn parse(raw: &[String]) -> Result<Self, Failure> {
        let mut map = BTreeMap::new();
        let mut it = raw.iter();
        while let Some(k) = it.next() {
            let key = k.strip_prefix("--").ok_or_else(|| usage(format!("expected --key, got {k:?}")))?;
            let v = it.next().ok_or_else(|| usage(format!("missing value for --{key}")))?;
            map.insert(key.to_string(), v.clone());
        }
        Ok(Self(map))
    }

    fn get(&self, key: &str) -> Result<f64, Failure> {
        let v = self.0.get(key).ok_or_else(|| usage(format!("missing --{key}")))?;
        v.parse().map_err(|_| usage(format!("--{key}: not a number: {v:?}")))
    }

    fn get_or(&self, key: &str, default: f64) -> Result<f64, Failure> {
        if self.0.contains_key(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    fn inputs(&self) -> Value {
        let m: serde_json::Map<String, Value> = self
            .0
            .iter()
            .map(|(k, v)| (k.clone(), v.parse::<f64>().map(Value::from).unwrap_or_else(|_| Value::from(v.clone()))))
            .collect();
        Value::Object(m)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), Failure> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(usage(format!("unknown flag --{k}; expected {allowed:?}"))),
            None => Ok(()),
        }
    }
}

fn gamma_from(p: &Params) -> Result<MarkDistribution, Failure> {
    Ok(MarkDistribution::from_mean_scale(p.get("mean")?, p.get_or("scale", 1.0)?)?)
}

fn analytic(quantity: &str, raw: &[String]) -> Result<u8, Failure> {
    if quantity == "list" {
        println!("{}", json!({"quantities": QUANTITIES}));
        return Ok(0);
    }
    if !QUANTITIES.contains(&quantity) {
        return Err(usage(format!("unknown quantity {quantity:?}; valid: {}", QUANTITIES.join(", "))));
    }
    let p = Params::parse(raw)?;
    let quad = QuadratureSpec::default();
    let exact = |v: f64| (json!(v), 0.0);
    let (keys, (value, err)): (&[&str], (Value, f64)) = match quantity {
        "matII-intensity" => (&["lambda", "R"], exact(an::matii_intensity(p.get("lambda")?, p.get("R")?)?)),
        "matII-radius" => (&["lambda", "p"], exact(an::matii_radius_from_prob(p.get("lambda")?, p.get("p")?)?)),
        "matI-intensity" => (&["lambda", "R"], exact(an::mati_stats(p.get("lambda")?, p.get("R")?, 1.0)?.0)),
        "matI-sopd" => (&["lambda", "R", "r"], exact(an::mati_stats(p.get("lambda")?, p.get("R")?, p.get("r")?)?.1)),
        "sopd-matII" => (&["r", "lambda", "R"], exact(an::sopd_matii(p.get("r")?, p.get("lambda")?, p.get("R")?)?)),
        "gec-intensity" => {
            let e = an::gec_intensity(p.get("lambda")?, &gamma_from(&p)?, p.get_or("p0", 1.0)?, p.get("c")?, &quad)?;
            (&["lambda", "mean", "scale", "p0", "c"], (json!(e.value), e.error))
        }
        "gec-kernel-integral" => {
            (&["m", "n", "c"], exact(an::gec_spatial_kernel_integral(p.get("m")?, p.get("n")?, p.get("c")?)?))
        }
        "contact-indep" => (&["lambda", "R"], exact(an::contact_indep(p.get("lambda")?, p.get("R")?)?)),
        "contact-matII" => {
            let e = an::contact_matii(p.get("lambda")?, p.get("delta")?, p.get("R")?, &quad)?;
            (&["lambda", "delta", "R"], (json!(e.value), e.error))
        }
        "palm-matII" => (&["r", "delta", "lambda"], exact(an::palm_matii(p.get("r")?, p.get("delta")?, p.get("lambda")?)?)),
        "palm-gec" => {
            let e = an::palm_gec(p.get("r")?, &gamma_from(&p)?, p.get("lambda")?, p.get("c")?, &quad)?;
            (&["r", "mean", "scale", "lambda", "c"], (json!(e.value), e.error))
        }
        "lens-area" => (&["r", "delta"], exact(lens_area(p.get("r")?, p.get("delta")?)?)),
        "chernoff" => (&["N", "eps"], exact(an::chernoff_violation(p.get("N")?, p.get("eps")?)?)),
        "bernstein" => (&["N", "var", "C"], exact(an::bernstein_violation(p.get("N")?, p.get("var")?, p.get("C")?)?)),
        "spatial-var-bound" => (&["lambda", "r", "R"], exact(an::spatial_var_bound(p.get("lambda")?, p.get("r")?, p.get("R")?)?)),
        "independent-allocation" | "matII-hit-bounds" | "matII-hit-var-bound" => {
            let keys: &[&str] = &["lambda", "R", "M", "gamma", "N"];
            let (lambda, r_dd, n) = (p.get("lambda")?, p.get("R")?, p.get("N")?);
            let m = p.get("M")?;
            if !(m >= 1.0 && m.fract() == 0.0) {
                return Err(usage(format!("--M must be a positive integer, got {m}")));
            }
            let pmf = zipf_pmf(m as usize, p.get("gamma")?)?;
            let probs = alloc_independent(&pmf, lambda, r_dd, n)?;
            let radii = gec_core::budget::matii_radii(lambda, &probs)?;
            let v = match quantity {
                "independent-allocation" => json!(probs),
                "matII-hit-bounds" => {
                    let b = an::matii_hit_bounds(&pmf, &radii, lambda, r_dd, &quad)?;
                    json!({"lower": b.lower, "upper": b.upper})
                }
                _ => json!(an::matii_hit_var_bound(&pmf, &radii, lambda, r_dd)?),
            };
            (keys, (v, 0.0))
        }
        _ => unreachable!("checked against QUANTITIES"),
    };
    p.check_keys(keys)?;
    println!("{}", json!({"quantity": quantity, "inputs": p.inputs(), "value": value, "error_estimate": err}));
    Ok(0)
}

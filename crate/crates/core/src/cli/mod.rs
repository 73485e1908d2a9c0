//! The `dkdv` command line.
//!
//! Exit status: 0 when every check passes, 1 on a verification failure,
//! 2 on usage, parse or domain errors. Every output starts with a header
//! recording the version, seed and resolved parameters (a `#` line for
//! text output, a `header` object for JSON).

pub mod config;

use crate::balance::{
    machinery_check, monte_carlo_balance_with, BalanceOptions, BalanceReport, BalanceSpec,
};
use crate::dist::{self, MarginalLaw};
use crate::error::{Error, Result};
use crate::lattice::{self, Boundary, LatticeConfig};
use crate::maps::{self, f_dk, psi, MapParams, PositivePair};
use crate::matrix::{self, mgig_sample, McmcConfig, MgigParams, SpdMatrix};
use crate::report::{all_pass, rows_to_csv, CheckRow, SCHEMA_VERSION};
use crate::specfun;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use config::Entry;
use serde::Serialize;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

/// Environment variable overriding the config-file seed.
pub const SEED_ENV: &str = "DKDV_SEED";
pub const DEFAULT_SEED: u64 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "dkdv",
    version,
    about = "GIG laws, discrete KdV maps and detailed-balance verification"
)]
pub struct Cli {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Run seed (flag > DKDV_SEED > config file > default).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Progress and timing on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bessel and log-Gamma kernels.
    #[command(subcommand)]
    Specfun(SpecfunCmd),
    /// GIG, Gamma and inverse-Gamma laws.
    #[command(subcommand)]
    Dist(DistCmd),
    /// The scalar cell maps.
    #[command(subcommand)]
    Map(MapCmd),
    /// The matrix map and MGIG laws.
    #[command(subcommand)]
    Matrix(MatrixCmd),
    /// Detailed-balance verification.
    #[command(subcommand)]
    Balance(BalanceCmd),
    /// Lattice dynamics.
    #[command(subcommand)]
    Lattice(LatticeCmd),
}

#[derive(Debug, Subcommand)]
pub enum SpecfunCmd {
    /// Residual table of the special-function checks.
    Check,
    /// Evaluate K_nu(z) or I_nu(z).
    Eval {
        #[arg(long, value_enum, default_value = "k")]
        kind: BesselKindArg,
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        z: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BesselKindArg {
    K,
    I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    Gig,
    Gamma,
    InvGamma,
}

#[derive(Debug, Subcommand)]
pub enum DistCmd {
    /// Seeded draws, one per line.
    Sample {
        #[arg(long, value_enum, default_value = "gig")]
        law: LawArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        n: usize,
    },
    /// Invariant suite (normalisation, reciprocity, limits, sampler KS).
    Check {
        /// Draws per KS test.
        #[arg(long, default_value_t = 100_000)]
        n: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum MapCmd {
    /// Print the image of one point.
    Eval {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        /// Apply psi instead of F_dK.
        #[arg(long)]
        psi: bool,
    },
    /// Involution, identity and Jacobian battery.
    Check {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum MatrixCmd {
    /// Involution, uv = yx, symmetry and Jacobian battery on random SPD pairs.
    Check {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
    /// MGIG draws by MCMC, one row-major matrix per line.
    Sample {
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        p: f64,
        /// SPD matrix, rows separated by ';' (e.g. "2,0.5;0.5,1").
        #[arg(long)]
        a: SpdMatrix,
        #[arg(long)]
        b: SpdMatrix,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = McmcConfig::default().burn_in)]
        burn_in: usize,
        /// Fixed thinning stride; chosen from a pilot run when absent.
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long, default_value_t = McmcConfig::default().chains)]
        chains: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Fdk,
    Psi,
    Matrix,
}

/// Parameters of one balance spec. They are optional at the clap level so
/// that a battery file can supply them; missing ones are reported as usage
/// errors.
#[derive(Debug, Clone, Default, Args)]
pub struct SpecArgs {
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Matrix dimension (matrix variant).
    #[arg(long)]
    pub r: Option<usize>,
    /// SPD parameter `a` (matrix variant); identity when absent.
    #[arg(long)]
    pub mat_a: Option<SpdMatrix>,
    /// SPD parameter `b` (matrix variant); identity when absent.
    #[arg(long)]
    pub mat_b: Option<SpdMatrix>,
    #[arg(long)]
    pub n: Option<usize>,
}

impl SpecArgs {
    fn or(self, base: &SpecArgs) -> SpecArgs {
        SpecArgs {
            variant: self.variant.or(base.variant),
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            c1: self.c1.or(base.c1),
            c2: self.c2.or(base.c2),
            lambda: self.lambda.or(base.lambda),
            r: self.r.or(base.r),
            mat_a: self.mat_a.or_else(|| base.mat_a.clone()),
            mat_b: self.mat_b.or_else(|| base.mat_b.clone()),
            n: self.n.or(base.n),
        }
    }

    fn spec(&self) -> Result<(BalanceSpec, usize)> {
        let variant = required(self.variant, "variant")?;
        let (alpha, beta, lambda) = (
            required(self.alpha, "alpha")?,
            required(self.beta, "beta")?,
            required(self.lambda, "lambda")?,
        );
        let n = required(self.n, "n")?;
        let spec = match variant {
            VariantArg::Fdk => BalanceSpec::scalar_fdk(
                alpha,
                beta,
                required(self.c1, "c1")?,
                required(self.c2, "c2")?,
                lambda,
            )?,
            VariantArg::Psi => BalanceSpec::scalar_psi(
                alpha,
                beta,
                required(self.c1, "c1")?,
                required(self.c2, "c2")?,
                lambda,
            )?,
            VariantArg::Matrix => {
                let r = self
                    .r
                    .or(self.mat_a.as_ref().map(SpdMatrix::dim))
                    .unwrap_or(2);
                let a = self.mat_a.clone().unwrap_or_else(|| SpdMatrix::identity(r));
                let b = self.mat_b.clone().unwrap_or_else(|| SpdMatrix::identity(r));
                BalanceSpec::matrix_fdk(alpha, beta, lambda, a, b)?
            }
        };
        Ok((spec, n))
    }
}

/// Flat form of a battery record, parsed by clap like a command line.
#[derive(Debug, Parser)]
#[command(
    name = "battery-record",
    no_binary_name = true,
    allow_negative_numbers = true
)]
struct SpecRecord {
    #[command(flatten)]
    args: SpecArgs,
}

#[derive(Debug, Subcommand)]
pub enum BalanceCmd {
    /// Transport residual, KS marginals and independence of the images.
    Verify {
        #[command(flatten)]
        spec: SpecArgs,
        /// Permutations of the distance-correlation test.
        #[arg(long, default_value_t = 499)]
        permutations: usize,
        /// Negative control: rescale c1 (matrix: `a`) in the second input law.
        #[arg(long)]
        perturb_c1: Option<f64>,
        /// MCMC burn-in per chain (matrix variant).
        #[arg(long, default_value_t = McmcConfig::default().burn_in)]
        burn_in: usize,
        /// One spec per line as key=value tokens; the flags above act as
        /// defaults for every record.
        #[arg(long, value_name = "FILE")]
        battery: Option<PathBuf>,
    },
    /// Transform identities of the psi characterisation (CSV residual table).
    Machinery {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        c2: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.7)]
        s: f64,
        #[arg(long, default_value_t = -1.0)]
        sigma: f64,
        #[arg(long, default_value_t = -0.5)]
        theta: f64,
        #[arg(long, default_value_t = 200_000)]
        n: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct LatticeArgs {
    /// Width N.
    #[arg(long)]
    pub n: usize,
    /// Horizon T.
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub lambda: f64,
    /// c1 = c2 = c (type-I product measure).
    #[arg(long, conflicts_with_all = ["c1", "c2"])]
    pub c: Option<f64>,
    #[arg(long, requires = "c2")]
    pub c1: Option<f64>,
    #[arg(long, requires = "c1")]
    pub c2: Option<f64>,
    /// Perturbation: rescale the x-marginals by this factor.
    #[arg(long)]
    pub perturb_x: Option<f64>,
    /// Replay boundary values from an axis,index,value file.
    #[arg(long, value_name = "FILE")]
    pub boundary_file: Option<PathBuf>,
}

impl LatticeArgs {
    fn config(&self, seed: u64) -> Result<LatticeConfig> {
        let (c1, c2) = match (self.c, self.c1, self.c2) {
            (Some(c), _, _) => (c, c),
            (None, Some(c1), Some(c2)) => (c1, c2),
            _ => {
                return Err(Error::domain(
                    "missing required flag --c (or --c1 and --c2)",
                ))
            }
        };
        let map = MapParams::new(self.alpha, self.beta)?;
        let mut cfg = LatticeConfig::stationary(map, self.lambda, c1, c2, self.n, self.t, seed)?;
        if let Some(k) = self.perturb_x {
            cfg = cfg.with_x_scaled(k)?;
        }
        if let Some(path) = &self.boundary_file {
            cfg.boundary = Boundary::Replay(path.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum LatticeCmd {
    /// Evolve and write every frame as CSV `t,n,x,y`.
    Run {
        #[command(flatten)]
        lattice: LatticeArgs,
    },
    /// Two-sample KS of probe rows against row 0, per field and parity.
    Stationarity {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,25,50")]
        probes: Vec<usize>,
    },
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::domain(format!("missing required flag --{name}")))
}

/// Resolved run settings echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
}

impl Header {
    pub fn line(&self) -> String {
        let mut s = format!(
            "# {} {} schema_version={} command={} seed={}",
            self.tool, self.version, self.schema_version, self.command, self.seed
        );
        for (k, v) in &self.params {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct RowsBody<'a> {
    schema_version: u32,
    rows: &'a [CheckRow],
    pass: bool,
}

struct Run {
    header: Header,
    out: Option<PathBuf>,
    format: Option<Format>,
    verbose: u8,
}

impl Run {
    fn write(&self, body: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, body)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(body.as_bytes())?;
                out.flush()?;
                Ok(())
            }
        }
    }

    fn text(&self, body: &str) -> Result<()> {
        self.write(&format!("{}\n{body}", self.header.line()))
    }

    fn json<T: Serialize>(&self, body: &T) -> Result<()> {
        let doc = Document {
            header: &self.header,
            body,
        };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
        self.write(&(text + "\n"))
    }

    /// Check rows as CSV (default) or JSON; returns whether all passed.
    fn rows(&self, rows: &[CheckRow]) -> Result<bool> {
        let pass = all_pass(rows);
        match self.format.unwrap_or(Format::Csv) {
            Format::Csv => self.text(&rows_to_csv(rows))?,
            Format::Json => self.json(&RowsBody {
                schema_version: SCHEMA_VERSION,
                rows,
                pass,
            })?,
        }
        Ok(pass)
    }

    fn log(&self, msg: impl FnOnce() -> String) {
        if self.verbose > 0 {
            eprintln!("dkdv: {}", msg());
        }
    }
}

fn balance_rows(r: &BalanceReport) -> Vec<CheckRow> {
    let mut rows = vec![CheckRow {
        test: "transport_residual".into(),
        statistic: r.max_log_residual,
        threshold: r.residual_tolerance,
        pass: r.residual_pass,
    }];
    rows.extend(r.ks.iter().map(|k| CheckRow {
        test: format!("ks_p[{}]", k.marginal),
        statistic: k.p_value,
        threshold: 0.01,
        pass: k.pass,
    }));
    rows.push(CheckRow {
        test: "dcor_p".into(),
        statistic: r.independence.p_value,
        threshold: 0.01,
        pass: r.independence.pass,
    });
    for s in &r.samplers {
        rows.push(CheckRow::at_most(
            format!("split_rhat[{}]", s.target),
            s.diagnostics.split_rhat,
            1.05,
        ));
    }
    rows
}

#[derive(Serialize)]
struct BatteryBody<'a> {
    schema_version: u32,
    reports: &'a [BalanceReport],
    pass: bool,
}

fn execute(cli: &Cli, run: &Run) -> Result<bool> {
    let seed = cli.seed;
    match &cli.command {
        Command::Specfun(SpecfunCmd::Check) => run.rows(&specfun::check_battery()?),
        Command::Specfun(SpecfunCmd::Eval { kind, nu, z }) => {
            let v = match kind {
                BesselKindArg::K => specfun::bessel_k(*nu, *z)?,
                BesselKindArg::I => specfun::bessel_i(*nu, *z)?,
            };
            match run.format.unwrap_or(Format::Csv) {
                Format::Csv => run.text(&format!("{v}\n"))?,
                Format::Json => {
                    run.json(&serde_json::json!({ "schema_version": SCHEMA_VERSION, "value": v }))?
                }
            }
            Ok(true)
        }
        Command::Dist(DistCmd::Sample {
            law,
            lambda,
            a,
            b,
            n,
        }) => {
            let law = match law {
                LawArg::Gig => MarginalLaw::gig(*lambda, required(*a, "a")?, required(*b, "b")?)?,
                LawArg::Gamma => MarginalLaw::gamma(*lambda, required(*a, "a")?)?,
                LawArg::InvGamma => MarginalLaw::inv_gamma(*lambda, required(*b, "b")?)?,
            };
            let xs = dist::sample(&law, seed, *n)?;
            match run.format.unwrap_or(Format::Csv) {
                Format::Csv => run.text(&xs.iter().map(|x| format!("{x}\n")).collect::<String>())?,
                Format::Json => run.json(&serde_json::json!({ "schema_version": SCHEMA_VERSION, "law": law, "values": xs }))?,
            }
            Ok(true)
        }
        Command::Dist(DistCmd::Check { n }) => run.rows(&dist::check_battery(seed, *n)?),
        Command::Map(MapCmd::Eval {
            alpha,
            beta,
            x,
            y,
            psi: use_psi,
        }) => {
            let p = MapParams::new(*alpha, *beta)?;
            let xy = PositivePair::new(*x, *y)?;
            let img = if *use_psi { psi(p, xy) } else { f_dk(p, xy) };
            match run.format.unwrap_or(Format::Csv) {
                Format::Csv => run.text(&format!("{},{}\n", img.first, img.second))?,
                Format::Json => run.json(&serde_json::json!({ "schema_version": SCHEMA_VERSION, "u": img.first, "v": img.second }))?,
            }
            Ok(true)
        }
        Command::Map(MapCmd::Check { alpha, beta, n }) => run.rows(&maps::check_battery(
            MapParams::new(*alpha, *beta)?,
            seed,
            *n,
        )),
        Command::Matrix(MatrixCmd::Check {
            r,
            alpha,
            beta,
            pairs,
        }) => run.rows(&matrix::check_battery(
            MapParams::new(*alpha, *beta)?,
            *r,
            seed,
            *pairs,
        )?),
        Command::Matrix(MatrixCmd::Sample {
            r,
            p,
            a,
            b,
            n,
            burn_in,
            thin,
            chains,
        }) => {
            if let Some(r) = r {
                if *r != a.dim() {
                    return Err(Error::domain(format!(
                        "--r {r} does not match the {}x{} parameter matrices",
                        a.dim(),
                        a.dim()
                    )));
                }
            }
            let params = MgigParams::new(*p, a.clone(), b.clone())?;
            let cfg = McmcConfig {
                burn_in: *burn_in,
                thin: *thin,
                chains: *chains,
                ..McmcConfig::default()
            };
            let mcmc = mgig_sample(&params, seed, *n, cfg)?;
            let d = &mcmc.diagnostics;
            run.log(|| {
                format!(
                    "acceptance {:?}, split R-hat {:.4}",
                    d.acceptance_rates, d.split_rhat
                )
            });
            let mut body = format!(
                "# r={} thin={} split_rhat={} effective_draws={} converged={}\n",
                a.dim(),
                d.thin,
                d.split_rhat,
                d.effective_draws,
                d.converged
            );
            for m in &mcmc.draws {
                let vals: Vec<String> = m.row_major().iter().map(f64::to_string).collect();
                body.push_str(&vals.join(","));
                body.push('\n');
            }
            run.text(&body)?;
            Ok(d.converged)
        }
        Command::Balance(BalanceCmd::Verify {
            spec,
            permutations,
            perturb_c1,
            burn_in,
            battery,
        }) => {
            let opts = BalanceOptions {
                permutations: *permutations,
                perturb_second_c1: *perturb_c1,
                mcmc: McmcConfig {
                    burn_in: *burn_in,
                    ..McmcConfig::default()
                },
                ..BalanceOptions::default()
            };
            let specs: Vec<SpecArgs> = match battery {
                None => vec![spec.clone()],
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    config::parse_battery(&text)?
                        .into_iter()
                        .map(|record| battery_record(&record).map(|r| r.or(spec)))
                        .collect::<Result<_>>()?
                }
            };
            let mut reports = Vec::with_capacity(specs.len());
            for (i, s) in specs.iter().enumerate() {
                let (spec, n) = s.spec()?;
                let t0 = std::time::Instant::now();
                // battery records get their own seed so that reordering lines
                // does not change any report
                let rs = if battery.is_some() {
                    crate::rng::derive_seed(seed, i as u64)
                } else {
                    seed
                };
                reports.push(monte_carlo_balance_with(&spec, rs, n, opts)?);
                run.log(|| {
                    format!(
                        "spec {i} ({}) done in {:.1?}",
                        spec.variant_name(),
                        t0.elapsed()
                    )
                });
            }
            let pass = reports.iter().all(|r| r.pass);
            match (run.format.unwrap_or(Format::Json), battery.is_some()) {
                (Format::Json, false) => run.json(&reports[0])?,
                (Format::Json, true) => run.json(&BatteryBody {
                    schema_version: SCHEMA_VERSION,
                    reports: &reports,
                    pass,
                })?,
                (Format::Csv, _) => {
                    let mut csv = String::from("report,test,statistic,threshold,pass\n");
                    for (i, r) in reports.iter().enumerate() {
                        for row in balance_rows(r) {
                            csv.push_str(&format!(
                                "{i},{},{:e},{:e},{}\n",
                                row.test, row.statistic, row.threshold, row.pass
                            ));
                        }
                    }
                    run.text(&csv)?;
                }
            }
            Ok(pass)
        }
        Command::Balance(BalanceCmd::Machinery {
            alpha,
            beta,
            c1,
            c2,
            lambda,
            s,
            sigma,
            theta,
            n,
        }) => {
            let spec = BalanceSpec::scalar_psi(*alpha, *beta, *c1, *c2, *lambda)?;
            let rec = machinery_check(&spec, *s, *sigma, *theta, seed, *n)?;
            match run.format.unwrap_or(Format::Csv) {
                Format::Csv => run.rows(&rec.rows),
                Format::Json => {
                    run.json(&rec)?;
                    Ok(rec.pass)
                }
            }
        }
        Command::Lattice(LatticeCmd::Run { lattice: args }) => {
            let cfg = args.config(seed)?;
            let mut csv = String::from("t,n,x,y\n");
            for frame in lattice::evolve(&cfg)? {
                for (i, (x, y)) in frame.x_row.iter().zip(&frame.y_row).enumerate() {
                    csv.push_str(&format!("{},{},{x},{y}\n", frame.t, i + 1));
                }
            }
            run.text(&csv)?;
            Ok(true)
        }
        Command::Lattice(LatticeCmd::Stationarity {
            lattice: args,
            probes,
        }) => {
            let cfg = args.config(seed)?;
            let report = lattice::stationarity_report(&cfg, probes, seed)?;
            match run.format.unwrap_or(Format::Json) {
                Format::Json => run.json(&report)?,
                Format::Csv => {
                    let mut csv =
                        String::from("t,field,parity,stride,size,statistic,p_value,law_p_value\n");
                    for e in &report.entries {
                        csv.push_str(&format!(
                            "{},{},{},{},{},{:e},{:e},{:e}\n",
                            e.t,
                            e.field,
                            e.parity,
                            e.stride,
                            e.size,
                            e.statistic,
                            e.p_value,
                            e.law_p_value
                        ));
                    }
                    run.text(&csv)?;
                }
            }
            Ok(report.pass)
        }
    }
}

fn battery_record(record: &[Entry]) -> Result<SpecArgs> {
    let mut argv = Vec::with_capacity(2 * record.len());
    for e in record {
        argv.push(format!("--{}", e.key));
        argv.push(e.value.clone());
    }
    SpecRecord::try_parse_from(argv)
        .map(|r| r.args)
        .map_err(|err| {
            let first = &record[0];
            let message = err
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            Error::Parse {
                line: first.line,
                column: first.column,
                message,
            }
        })
}

fn allow_negative_numbers(cmd: clap::Command) -> clap::Command {
    cmd.allow_negative_numbers(true)
        .mut_subcommands(allow_negative_numbers)
}

pub fn command() -> clap::Command {
    allow_negative_numbers(Cli::command())
}

/// Long names of the global flags and of every leaf subcommand's flags.
fn known_keys(cmd: &clap::Command, leaf: &[String]) -> (Vec<String>, Vec<String>) {
    let longs = |c: &clap::Command| {
        c.get_arguments()
            .filter_map(|a| a.get_long().map(str::to_string))
            .collect::<Vec<_>>()
    };
    let mut all = longs(cmd);
    fn walk(c: &clap::Command, acc: &mut Vec<String>) {
        for sub in c.get_subcommands() {
            acc.extend(
                sub.get_arguments()
                    .filter_map(|a| a.get_long().map(str::to_string)),
            );
            walk(sub, acc);
        }
    }
    walk(cmd, &mut all);
    let mut node = cmd;
    for name in leaf {
        match node.find_subcommand(name) {
            Some(sub) => node = sub,
            None => break,
        }
    }
    let mut here = longs(cmd);
    if !std::ptr::eq(node, cmd) {
        here.extend(longs(node));
    }
    (all, here)
}

/// The subcommand path named on the command line (global flags may precede it).
fn leaf_path(cmd: &clap::Command, argv: &[String]) -> Vec<String> {
    let takes_value = ["--config", "--seed", "--out", "--format"];
    let mut path = Vec::new();
    let mut node = cmd;
    let mut i = 1;
    while i < argv.len() {
        let tok = &argv[i];
        if takes_value.contains(&tok.as_str()) {
            i += 2;
            continue;
        }
        if !tok.starts_with('-') {
            match node.find_subcommand(tok) {
                Some(sub) => {
                    path.push(tok.clone());
                    node = sub;
                }
                None => break,
            }
        }
        i += 1;
    }
    path
}

fn flag_present(argv: &[String], key: &str) -> bool {
    let long = format!("--{key}");
    argv.iter()
        .any(|t| *t == long || t.starts_with(&format!("{long}=")))
}

/// Folds config-file entries and the seed environment variable into `argv`
/// as flags, for every key not already given on the command line.
pub fn resolve_argv(argv: Vec<String>, env_seed: Option<String>) -> Result<Vec<String>> {
    resolve_argv_traced(argv, env_seed).map(|(v, _)| v)
}

/// [`resolve_argv`] that also returns the config entries it injected.
fn resolve_argv_traced(
    argv: Vec<String>,
    env_seed: Option<String>,
) -> Result<(Vec<String>, Vec<Entry>)> {
    let cmd = command();
    let config_path = argv.iter().enumerate().find_map(|(i, t)| {
        if t == "--config" {
            argv.get(i + 1).cloned()
        } else {
            t.strip_prefix("--config=").map(str::to_string)
        }
    });
    let entries = match &config_path {
        Some(p) => config::load_config(std::path::Path::new(p))?,
        None => Vec::new(),
    };
    let leaf = leaf_path(&cmd, &argv);
    let (all, here) = known_keys(&cmd, &leaf);
    let mut out = argv.clone();
    let mut injected = Vec::new();
    if !flag_present(&argv, "seed") {
        if let Some(s) = env_seed {
            out.push("--seed".into());
            out.push(s);
        }
    }
    for e in &entries {
        if e.key == "config" || !all.contains(&e.key) {
            return Err(Error::Parse {
                line: e.line,
                column: e.column,
                message: format!("unknown key {:?}", e.key),
            });
        }
        if !here.contains(&e.key) || flag_present(&out, &e.key) {
            continue;
        }
        match e.key.as_str() {
            "psi" => match e.value.as_str() {
                "true" => out.push("--psi".into()),
                "false" => {}
                _ => {
                    return Err(Error::Parse {
                        line: e.line,
                        column: e.column,
                        message: "psi must be true or false".into(),
                    })
                }
            },
            "verbose" => {
                let k: usize = e.value.parse().map_err(|_| Error::Parse {
                    line: e.line,
                    column: e.column,
                    message: "verbose must be a count".into(),
                })?;
                out.extend(std::iter::repeat_n("--verbose".to_string(), k));
            }
            _ => {
                out.push(format!("--{}", e.key));
                out.push(e.value.clone());
            }
        }
        injected.push(e.clone());
    }
    Ok((out, injected))
}

/// The config entry whose value clap rejected, if the value came from a file.
fn config_origin<'a>(e: &clap::Error, injected: &'a [Entry]) -> Option<&'a Entry> {
    use clap::error::{ContextKind, ContextValue};
    let Some(ContextValue::String(arg)) = e.get(ContextKind::InvalidArg) else {
        return None;
    };
    let Some(ContextValue::String(value)) = e.get(ContextKind::InvalidValue) else {
        return None;
    };
    let long = arg.split_whitespace().next()?.trim_start_matches("--");
    injected
        .iter()
        .find(|en| en.key == long && en.value == *value)
}

fn leaf_matches(m: &ArgMatches) -> (String, &ArgMatches) {
    let mut names = Vec::new();
    let mut node = m;
    while let Some((name, sub)) = node.subcommand() {
        names.push(name.to_string());
        node = sub;
    }
    (names.join(" "), node)
}

fn header(m: &ArgMatches, seed: u64) -> Header {
    let (command, leaf) = leaf_matches(m);
    let root = self::command();
    let mut node = &root;
    for name in command.split(' ') {
        node = node
            .find_subcommand(name)
            .expect("matched subcommand exists");
    }
    let arg_ids: Vec<&str> = node.get_arguments().map(|a| a.get_id().as_str()).collect();
    let mut params = BTreeMap::new();
    for id in leaf.ids() {
        let key = id.as_str();
        if !arg_ids.contains(&key) || matches!(key, "seed" | "config" | "out" | "verbose") {
            continue;
        }
        if let Ok(Some(raw)) = leaf.try_get_raw(key) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            params.insert(key.replace('_', "-"), vals.join(","));
        }
    }
    Header {
        tool: "dkdv",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: SCHEMA_VERSION,
        command,
        seed,
        params,
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence(_) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status. The seed environment variable is passed in explicitly.
pub fn dispatch_with_env<I, T>(argv: I, env_seed: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<String> = match argv.into_iter().map(|a| a.into().into_string()).collect() {
        Ok(v) => v,
        Err(bad) => {
            eprintln!("error: argument is not valid UTF-8: {bad:?}");
            return EXIT_USAGE;
        }
    };
    let (argv, injected) = match resolve_argv_traced(argv, env_seed) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let matches = match command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            if let Some(entry) = config_origin(&e, &injected) {
                let detail = e.to_string();
                let first = detail
                    .lines()
                    .next()
                    .unwrap_or_default()
                    .trim_start_matches("error: ");
                eprintln!(
                    "error: {}",
                    Error::Parse {
                        line: entry.line,
                        column: entry.column,
                        message: first.to_string()
                    }
                );
                return EXIT_USAGE;
            }
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    let run = Run {
        header: header(&matches, cli.seed),
        out: cli.out.clone(),
        format: cli.format,
        verbose: cli.verbose,
    };
    run.log(|| run.header.line());
    let t0 = std::time::Instant::now();
    let status = match execute(&cli, &run) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Domain(ref m) if m.starts_with("missing required flag")) {
                eprintln!("\nFor more information, try '--help'.");
            }
            exit_code(&e)
        }
    };
    run.log(|| format!("finished in {:.2?} with status {status}", t0.elapsed()));
    status
}

/// [`dispatch_with_env`] reading the seed override from the environment.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    dispatch_with_env(argv, std::env::var(SEED_ENV).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::Variant;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn command_definition_is_consistent() {
        command().debug_assert();
    }

    #[test]
    fn seed_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "seed=7\nalpha=1\nbeta=2\nx=1\ny=1\n").unwrap();
        let c = cfg.display();
        let parse = |a: Vec<String>, env: Option<&str>| {
            let full = resolve_argv(a, env.map(str::to_string)).unwrap();
            Cli::from_arg_matches(&command().try_get_matches_from(full).unwrap())
                .unwrap()
                .seed
        };
        assert_eq!(parse(argv(&format!("dkdv map eval --config {c}")), None), 7);
        assert_eq!(
            parse(argv(&format!("dkdv map eval --config {c} --seed 9")), None),
            9
        );
        assert_eq!(
            parse(argv(&format!("dkdv map eval --config {c}")), Some("11")),
            11
        );
        assert_eq!(
            parse(
                argv(&format!("dkdv --seed 9 map eval --config {c}")),
                Some("11")
            ),
            9
        );
        assert_eq!(
            parse(argv("dkdv map eval --alpha 1 --beta 2 --x 1 --y 1"), None),
            DEFAULT_SEED
        );
    }

    #[test]
    fn config_keys_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, "alpha=1\nbogus=3\n").unwrap();
        let err = resolve_argv(
            argv(&format!("dkdv map eval --config {}", cfg.display())),
            None,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                line: 2,
                column: 1,
                ..
            }
        ));
        // keys of other subcommands are accepted and ignored
        std::fs::write(&cfg, "alpha=1\nprobes=5\n").unwrap();
        let full = resolve_argv(
            argv(&format!("dkdv map eval --config {}", cfg.display())),
            None,
        )
        .unwrap();
        assert!(!full.contains(&"--probes".to_string()));
    }

    #[test]
    fn header_lists_resolved_parameters() {
        let m = command()
            .try_get_matches_from(argv("dkdv map eval --alpha 1 --beta 2 --x 1 --y 1 --psi"))
            .unwrap();
        let h = header(&m, 3);
        assert_eq!(h.command, "map eval");
        assert_eq!(
            h.line(),
            "# dkdv 0.1.0 schema_version=1 command=map eval seed=3 alpha=1 beta=2 psi=true x=1 y=1"
        );
    }

    #[test]
    fn battery_records_overlay_defaults() {
        let rec = config::parse_battery("variant=psi lambda=-0.5 c1=2\n").unwrap();
        let base = SpecArgs {
            alpha: Some(1.0),
            beta: Some(2.0),
            c1: Some(1.0),
            c2: Some(3.0),
            n: Some(1000),
            ..Default::default()
        };
        let s = battery_record(&rec[0]).unwrap().or(&base);
        let (spec, n) = s.spec().unwrap();
        assert_eq!((spec.c1, spec.c2, spec.lambda, n), (2.0, 3.0, -0.5, 1000));
        assert_eq!(spec.variant, Variant::ScalarPsi);
        assert!(battery_record(&config::parse_battery("variant=nope\n").unwrap()[0]).is_err());
    }
}

//! Batch command-line front end.
//!
//! Exit codes: 0 success (and, for `check`, ε within threshold); 1 threshold
//! exceeded; 2 parse/IO errors; 3 state-invariant violations; 4 unsupported
//! layout, suite mismatch or oversized dimensions.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qmm::format;
use qmm::generators::{self, InstanceKind, InstanceSpec};
use qmm::measures;
use qmm::model::{Layout, MarginalSet};
use qmm::reconstruct::{self, LemmaSuite};
use qmm::recovery::{build_recovery, recovery_fidelity_gap, RecoveryConfig, RecoveryKind};
use qmm::{Error, SiteId};

const EXIT_THRESHOLD: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_UNSUPPORTED: u8 = 4;

#[derive(Parser)]
#[command(name = "qmm", version, about = "Certify and reconstruct locally Markov quantum marginals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Ghz,
    ClassicalChain,
    ClusterState1d,
    Sequential,
    Product,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    Chain,
    Hexgrid,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportArg {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(Args)]
struct MapArgs {
    /// Recovery map: `petz`, `rotated:<t>`, or `averaged:<nodes>,<width>`.
    #[arg(long, default_value = "petz")]
    map: String,
    /// Relative spectral cutoff.
    #[arg(long, default_value_t = 1e-12)]
    cutoff: f64,
}

impl MapArgs {
    fn config(&self) -> Result<RecoveryConfig, Error> {
        let kind = parse_map(&self.map)?;
        let cfg = RecoveryConfig {
            kind,
            cutoff: self.cutoff,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_map(text: &str) -> Result<RecoveryKind, Error> {
    if text == "petz" {
        return Ok(RecoveryKind::Petz);
    }
    if let Some(t) = text.strip_prefix("rotated:") {
        let t: f64 = t
            .parse()
            .map_err(|_| Error::Parse(format!("bad rotation parameter in {text}")))?;
        return Ok(RecoveryKind::Rotated(t));
    }
    if let Some(rest) = text.strip_prefix("averaged:") {
        let (k, w) = rest
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected averaged:<nodes>,<width>, got {text}")))?;
        let nodes: usize = k
            .parse()
            .map_err(|_| Error::Parse(format!("bad node count in {text}")))?;
        let half_width: f64 = w
            .parse()
            .map_err(|_| Error::Parse(format!("bad truncation in {text}")))?;
        return Ok(RecoveryKind::Averaged { nodes, half_width });
    }
    Err(Error::Parse(format!("unknown recovery map {text}")))
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write its marginal-set file.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "chain")]
        layout: LayoutArg,
        /// Vertex count (chain) or cells per side (hexgrid).
        #[arg(long)]
        n: usize,
        /// Local dimension per vertex.
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Vertices per cell (hexgrid only).
        #[arg(long, default_value_t = 1)]
        granularity: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Depolarization strength applied to the stored marginals.
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the source global state.
        #[arg(long)]
        out_global: Option<PathBuf>,
    },
    /// Validate local consistency and Markov conditions of a marginal set.
    Check {
        file: PathBuf,
        /// Exit 0 iff ε does not exceed this threshold.
        #[arg(long, default_value_t = f64::INFINITY)]
        eps: f64,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportArg,
        /// Logarithm base for entropic quantities: `e`, `2`, `10` or a float.
        #[arg(long, default_value = "e")]
        log_base: String,
        #[arg(long, default_value_t = 1e-12)]
        cutoff: f64,
    },
    /// Build the proposed global state and measure its consistency.
    Reconstruct {
        file: PathBuf,
        #[command(flatten)]
        map: MapArgs,
        #[arg(long)]
        out_report: Option<PathBuf>,
        #[arg(long)]
        out_state: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportArg,
    },
    /// Measure the relation suite gaps for the set's layout.
    Lemmas {
        file: PathBuf,
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportArg,
    },
    /// Certify recovery maps built from random states.
    RecoveryCheck {
        /// Comma-separated local dimensions of the A,B,C subsystems.
        #[arg(long, default_value = "2,2,2")]
        dims: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Io(_) => EXIT_PARSE,
        Error::NotHermitian(_) | Error::InvalidTrace(_) | Error::NotPositive(_) => EXIT_INVARIANT,
        Error::UnsupportedLayout => EXIT_UNSUPPORTED,
        _ => EXIT_PARSE,
    }
}

fn load(file: &PathBuf) -> Result<MarginalSet, Error> {
    format::load_marginals(file)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate {
            kind,
            layout,
            n,
            d,
            granularity,
            seed,
            perturb,
            out,
            out_global,
        } => {
            let kind = match kind {
                KindArg::Ghz => InstanceKind::Ghz,
                KindArg::ClassicalChain => InstanceKind::ClassicalChain,
                KindArg::ClusterState1d => InstanceKind::ClusterState1d,
                KindArg::Sequential => InstanceKind::Sequential,
                KindArg::Product => InstanceKind::Product,
            };
            let layout = match layout {
                LayoutArg::Chain => Layout::Chain { n },
                LayoutArg::Hexgrid => Layout::HexGrid { n, granularity },
            };
            let spec = InstanceSpec {
                kind,
                layout,
                d,
                seed,
                perturbation: perturb,
            };
            let output = generators::gen(&spec)?;
            format::save_marginals(&out, &output.marginals)?;
            let report = output.marginals.check()?;
            eprintln!(
                "wrote {} ({} stored marginals, epsilon {:.3e})",
                out.display(),
                output.marginals.entries().len(),
                report.epsilon
            );
            if let (Some(path), Some(global)) = (out_global, output.global.as_ref()) {
                format::save_state(&path, global)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::Check {
            file,
            eps,
            report,
            log_base,
            cutoff,
        } => {
            let ms = load(&file)?;
            let base = parse_log_base(&log_base)?;
            let mut mk = ms.check_with_cutoff(cutoff)?;
            if let Some(b) = base {
                mk = mk.rescaled(b);
            }
            let file_out = format::CheckReportFile::new(mk.clone(), &log_base);
            match report {
                ReportArg::Json => {
                    print!(
                        "{}",
                        String::from_utf8_lossy(&format::to_canonical_bytes(&file_out))
                    );
                }
                ReportArg::Text => {
                    println!("epsilon              {:.6e}", mk.epsilon);
                    println!("max consistency gap  {:.6e}", mk.max_gap());
                    println!("max CMI              {:.6e}", mk.max_cmi());
                    for pg in &mk.consistency_gaps {
                        println!(
                            "gap clusters ({}, {})   {:.6e}",
                            pg.clusters.0, pg.clusters.1, pg.gap
                        );
                    }
                    for cv in &mk.cmi_values {
                        println!(
                            "cmi cluster {} cell {}   {:.6e}",
                            cv.cluster, cv.cell, cv.cmi
                        );
                    }
                }
            }
            Ok(if mk.epsilon <= eps { 0 } else { EXIT_THRESHOLD })
        }
        Command::Reconstruct {
            file,
            map,
            out_report,
            out_state,
            report,
        } => {
            let ms = load(&file)?;
            let cfg = map.config()?;
            let (global, consistency) = reconstruct::reconstruct(&ms, cfg)?;
            let report_file = format::ReconstructReportFile {
                format: format::FORMAT_VERSION,
                map: map.map.clone(),
                report: consistency.clone(),
            };
            if let Some(path) = out_report {
                std::fs::write(&path, format::to_canonical_bytes(&report_file))?;
            }
            if let Some(path) = out_state {
                format::save_state(&path, &global)?;
            }
            match report {
                ReportArg::Json => {
                    print!(
                        "{}",
                        String::from_utf8_lossy(&format::to_canonical_bytes(&report_file))
                    );
                }
                ReportArg::Text => {
                    println!("delta    {:.6e}", consistency.delta);
                    println!("epsilon  {:.6e}", consistency.epsilon);
                    match consistency.ratio {
                        Some(r) => println!("ratio    {r:.6e}  (delta / (size * epsilon))"),
                        None => println!("ratio    n/a (epsilon is numerically zero)"),
                    }
                    for (k, dist) in &consistency.per_cluster_distance {
                        println!("cluster {k}   {dist:.6e}");
                    }
                }
            }
            Ok(0)
        }
        Command::Lemmas {
            file,
            suite,
            map,
            report,
        } => {
            let ms = load(&file)?;
            let cfg = map.config()?;
            let suite_kind = match suite {
                SuiteArg::OneD => LemmaSuite::OneD,
                SuiteArg::TwoD => LemmaSuite::TwoD,
            };
            let entries = reconstruct::lemma_suite(&ms, suite_kind, cfg)?;
            let epsilon = ms.check_with_cutoff(cfg.cutoff)?.epsilon;
            let file_out = format::LemmaReportFile {
                format: format::FORMAT_VERSION,
                suite: match suite {
                    SuiteArg::OneD => "1d".into(),
                    SuiteArg::TwoD => "2d".into(),
                },
                map: map.map.clone(),
                entries: entries.clone(),
                epsilon,
            };
            match report {
                ReportArg::Json => {
                    print!(
                        "{}",
                        String::from_utf8_lossy(&format::to_canonical_bytes(&file_out))
                    );
                }
                ReportArg::Text => {
                    println!("epsilon {epsilon:.6e}");
                    for e in &entries {
                        println!(
                            "{:<32} max gap {:.6e}  over {} instances",
                            e.id, e.max_gap, e.instances
                        );
                    }
                }
            }
            Ok(0)
        }
        Command::RecoveryCheck {
            dims,
            trials,
            map,
            seed,
        } => {
            let dims: Vec<usize> = dims
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad dimension {s}")))
                })
                .collect::<Result<_, _>>()?;
            if dims.len() != 3 {
                return Err(Error::Parse("need exactly three dimensions".into()));
            }
            let total: usize = dims.iter().product();
            if total > 64 {
                eprintln!("error: total dimension {total} exceeds 64");
                return Ok(EXIT_UNSUPPORTED);
            }
            let cfg = map.config()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sites = [SiteId(1), SiteId(2), SiteId(3)];
            let mut worst_choi = f64::INFINITY;
            let mut worst_tp = 0.0f64;
            let mut worst_recovery = 0.0f64;
            let mut min_cmi = f64::INFINITY;
            let mut worst_margin = f64::NEG_INFINITY;
            for _ in 0..trials {
                let rho = generators::random_full_rank_state(
                    sites.to_vec(),
                    dims.clone(),
                    &mut rng,
                )?;
                let rho_bc = rho.reduce_to(&sites[1..])?;
                let built = build_recovery(&rho_bc, &sites[1..2], &sites[2..], cfg)?;
                let cptp = built.cptp_check()?;
                worst_choi = worst_choi.min(cptp.choi_min_eigenvalue);
                worst_tp = worst_tp.max(cptp.tp_deviation);
                let rho_b = rho_bc.reduce_to(&sites[1..2])?;
                let rec = built.apply(&rho_b)?;
                worst_recovery = worst_recovery.max(measures::trace_distance(&rec, &rho_bc)?);
                let (lhs, mutual) =
                    recovery_fidelity_gap(&rho, &sites[..1], &sites[1..2], &sites[2..], cfg)?;
                min_cmi = min_cmi.min(mutual);
                worst_margin = worst_margin.max(lhs - mutual);
            }
            println!("trials                      {trials}");
            println!("min Choi eigenvalue         {worst_choi:.3e}");
            println!("max TP deviation            {worst_tp:.3e}");
            println!("max |Phi(rho_B) - rho_BC|   {worst_recovery:.3e}");
            println!("min CMI (SSA)               {min_cmi:.3e}");
            println!("max (-2 ln F - CMI)         {worst_margin:.3e}");
            Ok(0)
        }
    }
}

fn parse_log_base(text: &str) -> Result<Option<f64>, Error> {
    match text {
        "e" | "nats" => Ok(None),
        other => {
            let b: f64 = other
                .parse()
                .map_err(|_| Error::Parse(format!("bad log base {other}")))?;
            if b <= 1.0 {
                return Err(Error::Parse("log base must exceed 1".into()));
            }
            Ok(Some(b))
        }
    }
}

//! `dimerglue` command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
//! capacity error, 3 on invalid input, 4 on numerical failure.

mod critical;
mod glue;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use dimerglue::cft::{
    chiral_fermionic_partition, eta_factor, fermionic_partition, lattice_chiral, plimit_target, triple_product_check,
    Nome, SpinPair, Truncated,
};
use dimerglue::corpus::generate;
use dimerglue::graph::{even_polynomial, matching_polynomial};
use dimerglue::io::InstanceFile;
use dimerglue::ising::ising_partition_direct;
use dimerglue::kasteleyn::{arf_pfaffian_formula, crossing_signed_matchings, kasteleyn_orientation};
use dimerglue::pfaffian::{pfaffian_exact, skew_adjacency, Orientation};
use dimerglue::surface::{arf_reconstruction_check, signed_even_polynomial, QuadraticForm};
use dimerglue::{Error, Rational};
use num_complex::Complex64 as C;
use serde_json::json;

use report::{Check, Format, RunReport};

#[derive(Parser, Debug)]
#[command(name = "dimerglue", version, about = "Gluing identities for dimer and Ising polynomials")]
struct Cli {
    /// Output format; each command has its own default.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Leave timings out so that reports are byte-for-byte reproducible.
    #[arg(long, global = true)]
    no_timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Even-subset, matching or Ising polynomial of a graph.
    Partition {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: PartitionMode,
    },
    /// Signed even-subset polynomials of an embedded graph.
    Signed {
        #[arg(long)]
        input: PathBuf,
        /// A single quadratic form; every form by default.
        #[arg(long)]
        form: Option<u8>,
        /// The matching polynomial signed by crossing counts instead.
        #[arg(long)]
        matchings: bool,
    },
    /// Pfaffian of the signed adjacency matrix.
    Pfaffian {
        #[arg(long)]
        input: PathBuf,
        /// Ignored when the input carries its own orientation.
        #[arg(long, value_enum, default_value_t = OrientationChoice::Kasteleyn)]
        orientation: OrientationChoice,
        /// Matching polynomial as a combination of twisted Pfaffians.
        #[arg(long)]
        arf_table: bool,
    },
    Glue {
        #[command(subcommand)]
        command: GlueCommand,
    },
    Critical {
        #[command(subcommand)]
        command: CriticalCommand,
    },
    Cft {
        #[command(subcommand)]
        command: CftCommand,
    },
    /// Writes a seeded genus-two fixture corpus.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = dimerglue::corpus::CORPUS_SIZE)]
        count: usize,
    },
}

#[derive(Subcommand, Debug)]
enum GlueCommand {
    /// Checks the gluing identities on cut instances.
    Verify(glue::VerifyArgs),
}

#[derive(Subcommand, Debug)]
enum CriticalCommand {
    /// Compares determinants with trace products on one torus.
    Verify(critical::VerifyArgs),
    /// Regularized products under repeated subdivision.
    Limit(critical::LimitArgs),
}

#[derive(Subcommand, Debug)]
enum CftCommand {
    /// One truncated partition function.
    Eval {
        /// NS-R, NS-NS, R-NS, R-R, chiral:<pair>, eta, lattice:<0|1/2|1|3/2>, plimit:<+|->.
        #[arg(long)]
        which: String,
        #[arg(long, allow_hyphen_values = true)]
        q_re: f64,
        #[arg(long, allow_hyphen_values = true)]
        q_im: f64,
        #[arg(long = "N")]
        n: u32,
        /// Number of fermions.
        #[arg(long, default_value_t = 2)]
        d: u32,
    },
    /// Fermion pair against the lattice boson at one nome.
    Triple {
        #[arg(long, allow_hyphen_values = true)]
        q_re: f64,
        #[arg(long, allow_hyphen_values = true)]
        q_im: f64,
        #[arg(long = "N")]
        n: u32,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PartitionMode {
    Even,
    Dimer,
    Ising,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OrientationChoice {
    Kasteleyn,
    Increasing,
}

fn read(path: &Path) -> anyhow::Result<InstanceFile> {
    InstanceFile::read(path).with_context(|| path.display().to_string())
}

fn signed_coef(c: &Rational) -> String {
    if *c < Rational::from_integer(0) {
        c.to_string()
    } else {
        format!("+{c}")
    }
}

fn emit_value(format: Format, out: &mut dyn Write, key: &str, value: &str) -> anyhow::Result<()> {
    match format {
        Format::Text => writeln!(out, "{value}")?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&json!({ key: value }))?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([key])?;
            w.write_record([value])?;
            w.flush()?;
        }
    }
    Ok(())
}

fn eval_cft(which: &str, q: &Nome, d: u32, n: u32) -> dimerglue::Result<Truncated> {
    let w = which.trim();
    if w.eq_ignore_ascii_case("eta") {
        return Ok(eta_factor(q, n));
    }
    if let Some(pair) = w.strip_prefix("chiral:") {
        return chiral_fermionic_partition(q, pair.parse::<SpinPair>()?, d, n);
    }
    if let Some(l) = w.strip_prefix("lattice:") {
        let lambda = match l {
            "0" => 0.0,
            "1/2" | "0.5" => 0.5,
            "1" => 1.0,
            "3/2" | "1.5" => 1.5,
            _ => return Err(Error::Validation(format!("lattice label must be 0, 1/2, 1 or 3/2, got {l:?}"))),
        };
        return lattice_chiral(q, lambda, n);
    }
    if let Some(s) = w.strip_prefix("plimit:") {
        let spin = match s {
            "+" => 1.0,
            "-" => -1.0,
            _ => return Err(Error::Validation(format!("plimit spin must be + or -, got {s:?}"))),
        };
        return Ok(plimit_target(q, spin, n));
    }
    Ok(fermionic_partition(q, &q.conj(), w.parse::<SpinPair>()?, d, n))
}

/// Runs the command; `Ok(false)` means a check failed.
fn run(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<bool> {
    let timings = !cli.no_timings;
    let start = Instant::now();
    let elapsed = || timings.then(|| start.elapsed().as_secs_f64());
    match &cli.command {
        Command::Partition { input, mode } => {
            let g = read(input)?.graph()?;
            let p = match mode {
                PartitionMode::Even => even_polynomial(&g)?,
                PartitionMode::Dimer => matching_polynomial(&g)?,
                PartitionMode::Ising => ising_partition_direct(&g)?,
            };
            emit_value(cli.format.unwrap_or(Format::Text), out, "polynomial", &p.to_string())?;
            Ok(true)
        }
        Command::Signed { input, form, matchings } => {
            let eg = read(input)?.embedded()?;
            let format = cli.format.unwrap_or(Format::Text);
            if *matchings {
                emit_value(format, out, "polynomial", &crossing_signed_matchings(&eg)?.to_string())?;
                return Ok(true);
            }
            let forms = match form {
                Some(v) => vec![QuadraticForm::new(eg.genus(), *v)?],
                None => QuadraticForm::all(eg.genus()),
            };
            let rows = forms
                .iter()
                .map(|&q| Ok((q, signed_even_polynomial(&eg, q)?)))
                .collect::<dimerglue::Result<Vec<_>>>()?;
            let rec = if form.is_none() { Some(arf_reconstruction_check(&eg)?) } else { None };
            match format {
                Format::Json => {
                    let forms: Vec<_> = rows
                        .iter()
                        .map(|(q, p)| json!({"form": q.index(), "arf": q.arf(), "polynomial": p.to_string()}))
                        .collect();
                    let mut o = json!({ "forms": forms });
                    if let Some(r) = &rec {
                        o["canonical"] = json!(r.canonical);
                        o["coefficients"] = r.coefficients.iter().map(|(_, c)| signed_coef(c)).collect();
                    }
                    writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
                }
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(out);
                    w.write_record(["form", "arf", "polynomial"])?;
                    for (q, p) in &rows {
                        w.write_record([q.index().to_string(), q.arf().to_string(), p.to_string()])?;
                    }
                    w.flush()?;
                }
                Format::Text => {
                    for (q, p) in &rows {
                        writeln!(out, "q={} arf={}: {p}", q.index(), q.arf())?;
                    }
                    if let Some(r) = &rec {
                        writeln!(out, "reconstruction coefficients {}", if r.canonical { "canonical" } else { "solved" })?;
                    }
                }
            }
            Ok(true)
        }
        Command::Pfaffian { input, orientation, arf_table } => {
            let f = read(input)?;
            let eg = f.embedded()?;
            let g = eg.graph();
            let format = cli.format.unwrap_or(if *arf_table { Format::Json } else { Format::Text });
            if *arf_table {
                let t = arf_pfaffian_formula(&eg)?;
                let entries: Vec<_> = t
                    .entries
                    .iter()
                    .map(|e| json!({"S": e.bridge_list(), "coef": signed_coef(&e.coef), "pfaffian": e.pfaffian.to_string()}))
                    .collect();
                match format {
                    Format::Csv => {
                        let mut w = csv::Writer::from_writer(out);
                        w.write_record(["S", "coef", "pfaffian"])?;
                        for e in &t.entries {
                            let s: Vec<String> = e.bridge_list().iter().map(|b| b.to_string()).collect();
                            w.write_record([s.join(" "), signed_coef(&e.coef), e.pfaffian.to_string()])?;
                        }
                        w.flush()?;
                    }
                    Format::Text => {
                        for e in &t.entries {
                            writeln!(out, "{:?} {}: {}", e.bridge_list(), signed_coef(&e.coef), e.pfaffian)?;
                        }
                        writeln!(out, "holds: {}", t.holds)?;
                    }
                    Format::Json => {
                        let o = json!({"entries": entries, "holds": t.holds, "canonical": t.canonical});
                        writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
                    }
                }
                return Ok(t.holds);
            }
            let d = match (f.orientation(g)?, orientation) {
                (Some(d), _) => d,
                (None, OrientationChoice::Kasteleyn) => kasteleyn_orientation(&eg)?,
                (None, OrientationChoice::Increasing) => Orientation::increasing(g),
            };
            let pf = pfaffian_exact(&skew_adjacency(g, &d)?)?;
            emit_value(format, out, "pfaffian", &pf.to_string())?;
            Ok(true)
        }
        Command::Glue { command: GlueCommand::Verify(args) } => {
            let checks = glue::verify(args, timings)?;
            let r = RunReport::new(checks, elapsed());
            r.emit(cli.format.unwrap_or(Format::Json), out)?;
            Ok(r.ok())
        }
        Command::Critical { command: CriticalCommand::Verify(args) } => {
            let r = RunReport::new(critical::verify(args)?, elapsed());
            r.emit(cli.format.unwrap_or(Format::Csv), out)?;
            Ok(r.ok())
        }
        Command::Critical { command: CriticalCommand::Limit(args) } => {
            critical::limit(args, cli.format.unwrap_or(Format::Csv), out)
        }
        Command::Cft { command: CftCommand::Eval { which, q_re, q_im, n, d } } => {
            let q = Nome::from_q(C::new(*q_re, *q_im))?;
            let t = eval_cft(which, &q, *d, *n)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    let o = json!({"value": {"re": t.value.re, "im": t.value.im}, "tail_bound": t.tail_bound});
                    writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
                }
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(out);
                    w.write_record(["re", "im", "tail_bound"])?;
                    w.write_record([t.value.re.to_string(), t.value.im.to_string(), t.tail_bound.to_string()])?;
                    w.flush()?;
                }
                Format::Text => writeln!(out, "{} (tail <= {:e})", critical::fmt_c(t.value), t.tail_bound)?,
            }
            Ok(true)
        }
        Command::Cft { command: CftCommand::Triple { q_re, q_im, n, tol } } => {
            let q = Nome::from_q(C::new(*q_re, *q_im))?;
            let t = triple_product_check(&q, *n)?;
            let name = format!("q={}", q.q());
            let checks = vec![
                Check::new(name.as_str(), "sector-by-sector", t.residual < *tol).residual(t.residual),
                Check::new(name.as_str(), "total", t.total_residual < *tol)
                    .sides(critical::fmt_c(t.fermionic_total), critical::fmt_c(t.bosonic_total))
                    .residual(t.total_residual),
            ];
            let r = RunReport::new(checks, elapsed());
            r.emit(cli.format.unwrap_or(Format::Json), out)?;
            Ok(r.ok())
        }
        Command::Corpus { out: dir, seed, count } => {
            std::fs::create_dir_all(dir)?;
            for inst in generate(*seed, *count)? {
                let path = dir.join(format!("{}.json", inst.name));
                std::fs::write(&path, inst.to_file().to_json()? + "\n").with_context(|| path.display().to_string())?;
            }
            writeln!(out, "wrote {count} instances to {}", dir.display())?;
            Ok(true)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::Capacity { .. }) => 2,
        Some(Error::Numerical(_)) | Some(Error::Inconsistent(_)) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

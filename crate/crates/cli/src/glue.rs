use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use dimerglue::corpus::Instance;
use dimerglue::gluing::{
    glue_orientation, verify_signed_dimer_glue, verify_signed_ising_glue, verify_unsigned_dimer_glue,
    verify_unsigned_ising_glue, GlueReport,
};
use dimerglue::io::InstanceFile;
use dimerglue::pfaffian::Orientation;
use dimerglue::surface::QuadraticForm;

use crate::report::{par_map, Check};

/// Largest edge count for the sweep over every orientation.
pub const ALL_ORIENTATIONS_EDGE_LIMIT: usize = 20;
const ORIENTATION_CHUNK: u128 = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Ising,
    Dimer,
}

#[derive(Clone, Debug, clap::Args)]
pub struct VerifyArgs {
    /// Cut instance file, or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Restrict to one model; both by default.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Only the signed theorems.
    #[arg(long, conflicts_with = "unsigned")]
    pub signed: bool,
    /// Only the unsigned theorems.
    #[arg(long)]
    pub unsigned: bool,
    /// Quadratic form index for the signed Ising check; all forms by default.
    #[arg(long)]
    pub form: Option<u8>,
    /// Check the signed dimer identity for every orientation.
    #[arg(long)]
    pub all_orientations: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

pub struct Loaded {
    pub instance: Instance,
    pub orientation: Option<Orientation>,
}

pub fn load(path: &Path) -> anyhow::Result<Vec<Loaded>> {
    let files = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        bail!(dimerglue::Error::Validation(format!("no instance files in {}", path.display())));
    }
    let mut out = Vec::new();
    for p in files {
        let f = InstanceFile::read(&p).with_context(|| p.display().to_string())?;
        let mut instance = Instance::from_file(&f).with_context(|| p.display().to_string())?;
        if instance.name.is_empty() {
            instance.name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        let orientation = f.orientation(instance.embedded.graph())?;
        out.push(Loaded { instance, orientation });
    }
    Ok(out)
}

enum Task {
    UnsignedIsing,
    SignedIsing(QuadraticForm),
    UnsignedDimer,
    SignedDimer,
    Orientations(u128, u128),
}

fn from_report(name: &str, label: String, r: &GlueReport) -> Check {
    let c = Check::new(name, label, r.holds()).sides(&r.lhs, &r.rhs);
    if r.epsilon != 1 {
        c.detail(format!("epsilon={}", r.epsilon))
    } else {
        c
    }
}

enum Outcome {
    Check(Check),
    /// Orientation bits that failed within one chunk of a sweep.
    Sweep(Vec<u128>),
}

fn run_task(item: &Loaded, task: &Task) -> dimerglue::Result<Outcome> {
    let (eg, cut) = (&item.instance.embedded, &item.instance.cut);
    let name = &item.instance.name;
    let check = match task {
        Task::UnsignedIsing => from_report(name, "unsigned-ising".into(), &verify_unsigned_ising_glue(eg, cut)?),
        Task::SignedIsing(q) => {
            from_report(name, format!("signed-ising[q={}]", q.index()), &verify_signed_ising_glue(eg, cut, *q)?)
        }
        Task::UnsignedDimer => from_report(name, "unsigned-dimer".into(), &verify_unsigned_dimer_glue(eg, cut)?),
        Task::SignedDimer => {
            let d = match &item.orientation {
                Some(d) => d.clone(),
                None => glue_orientation(eg, cut)?,
            };
            from_report(name, "signed-dimer".into(), &verify_signed_dimer_glue(eg, cut, &d)?)
        }
        Task::Orientations(lo, hi) => {
            let g = eg.graph();
            let mut failures = Vec::new();
            for bits in *lo..*hi {
                if !verify_signed_dimer_glue(eg, cut, &Orientation::from_bits(g, bits))?.holds() {
                    failures.push(bits);
                }
            }
            return Ok(Outcome::Sweep(failures));
        }
    };
    Ok(Outcome::Check(check))
}

pub fn verify(args: &VerifyArgs, timings: bool) -> anyhow::Result<Vec<Check>> {
    let items = load(&args.input)?;
    let ising = args.mode != Some(Mode::Dimer);
    let dimer = args.mode != Some(Mode::Ising);
    let mut tasks = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let genus = item.instance.embedded.genus();
        if ising && !args.signed {
            tasks.push((i, Task::UnsignedIsing));
        }
        if ising && !args.unsigned {
            let forms = match args.form {
                Some(v) => vec![QuadraticForm::new(genus, v)?],
                None => QuadraticForm::all(genus),
            };
            tasks.extend(forms.into_iter().map(|q| (i, Task::SignedIsing(q))));
        }
        if dimer && !args.signed {
            tasks.push((i, Task::UnsignedDimer));
        }
        if dimer && !args.unsigned {
            tasks.push((i, Task::SignedDimer));
            if args.all_orientations {
                let m = item.instance.embedded.graph().edge_count();
                if m > ALL_ORIENTATIONS_EDGE_LIMIT {
                    bail!(dimerglue::Error::Capacity {
                        what: "edge count for the orientation sweep",
                        limit: ALL_ORIENTATIONS_EDGE_LIMIT,
                        actual: m,
                    });
                }
                let total = 1u128 << m;
                let mut lo = 0;
                while lo < total {
                    let hi = (lo + ORIENTATION_CHUNK).min(total);
                    tasks.push((i, Task::Orientations(lo, hi)));
                    lo = hi;
                }
            }
        }
    }
    let results = par_map(&tasks, args.jobs, |(i, task)| {
        let t = Instant::now();
        run_task(&items[*i], task).map(|o| (o, t.elapsed().as_secs_f64()))
    });
    let mut checks: Vec<Check> = Vec::new();
    let mut sweep: Option<(usize, Vec<u128>, f64)> = None;
    for ((i, task), r) in tasks.iter().zip(results) {
        let (outcome, secs) = r.with_context(|| items[*i].instance.name.clone())?;
        if !matches!(task, Task::Orientations(..)) || sweep.as_ref().is_some_and(|s| s.0 != *i) {
            checks.extend(sweep.take().map(|s| sweep_check(&items[s.0], s.1, s.2, timings)));
        }
        match outcome {
            Outcome::Check(mut c) => {
                c.seconds = timings.then_some(secs);
                checks.push(c);
            }
            Outcome::Sweep(f) => {
                let s = sweep.get_or_insert((*i, Vec::new(), 0.0));
                s.1.extend(f);
                s.2 += secs;
            }
        }
    }
    checks.extend(sweep.take().map(|s| sweep_check(&items[s.0], s.1, s.2, timings)));
    Ok(checks)
}

fn sweep_check(item: &Loaded, failures: Vec<u128>, secs: f64, timings: bool) -> Check {
    let total = 1u128 << item.instance.embedded.graph().edge_count();
    let mut detail = format!("{total} orientations");
    if let Some(b) = failures.first() {
        detail += &format!(", {} failures, first orientation bits {b:#x}", failures.len());
    }
    let mut c = Check::new(item.instance.name.as_str(), "signed-dimer[all]", failures.is_empty()).detail(detail);
    c.seconds = timings.then_some(secs);
    c
}

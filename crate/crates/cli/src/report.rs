use std::io::Write;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub instance: String,
    pub theorem: String,
    pub equal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl Check {
    pub fn new(instance: impl Into<String>, theorem: impl Into<String>, equal: bool) -> Self {
        Check {
            instance: instance.into(),
            theorem: theorem.into(),
            equal,
            lhs: None,
            rhs: None,
            residual: None,
            detail: String::new(),
            seconds: None,
        }
    }

    pub fn sides(mut self, lhs: impl ToString, rhs: impl ToString) -> Self {
        self.lhs = Some(lhs.to_string());
        self.rhs = Some(rhs.to_string());
        self
    }

    pub fn residual(mut self, r: f64) -> Self {
        self.residual = Some(r);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

/// Outcome of a batch of checks; everything but `seconds` is a function of
/// the command line and the inputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl RunReport {
    pub fn new(checks: Vec<Check>, seconds: Option<f64>) -> Self {
        let passed = checks.iter().filter(|c| c.equal).count();
        RunReport {
            command: std::env::args().skip(1).collect(),
            failed: checks.len() - passed,
            passed,
            checks,
            seconds,
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn emit(&self, format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
        match format {
            Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(self)?)?,
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["instance", "theorem", "equal", "residual", "lhs", "rhs", "detail", "seconds"])?;
                for c in &self.checks {
                    w.write_record([
                        c.instance.clone(),
                        c.theorem.clone(),
                        c.equal.to_string(),
                        c.residual.map(|r| format!("{r:e}")).unwrap_or_default(),
                        c.lhs.clone().unwrap_or_default(),
                        c.rhs.clone().unwrap_or_default(),
                        c.detail.clone(),
                        c.seconds.map(|s| format!("{s:.3}")).unwrap_or_default(),
                    ])?;
                }
                w.flush()?;
            }
            Format::Text => {
                for c in &self.checks {
                    let tag = if c.equal { "pass" } else { "FAIL" };
                    write!(out, "{tag} {} {}", c.instance, c.theorem)?;
                    if let Some(r) = c.residual {
                        write!(out, " residual={r:.3e}")?;
                    }
                    if !c.detail.is_empty() {
                        write!(out, " ({})", c.detail)?;
                    }
                    writeln!(out)?;
                }
                write!(out, "{} passed, {} failed", self.passed, self.failed)?;
                if let Some(s) = self.seconds {
                    write!(out, " in {s:.2}s")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every item ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..100).collect();
        assert_eq!(par_map(&items, 7, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(par_map(&Vec::<u8>::new(), 4, |x| *x).is_empty());
    }

    #[test]
    fn counts() {
        let r = RunReport::new(vec![Check::new("a", "t", true), Check::new("b", "t", false)], None);
        assert_eq!((r.passed, r.failed, r.ok()), (1, 1, false));
        let mut buf = Vec::new();
        r.emit(Format::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}

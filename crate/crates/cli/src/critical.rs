use std::io::Write;

use anyhow::Context;
use dimerglue::critical::{limit_series, verify_trace, LimitRow, LimitTarget, RhomboidTorus, SpinChoice};
use num_complex::Complex64 as C;
use serde::Serialize;

use crate::report::{Check, Format};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Square,
    Fourth,
}

#[derive(Clone, Debug, clap::Args)]
pub struct VerifyArgs {
    /// Half the number of a-steps.
    #[arg(long)]
    pub n: usize,
    /// Half the number of b-steps.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub tau: C,
    /// Random isoradial steps from this seed; straight equal steps without it.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Clone, Debug, clap::Args)]
pub struct LimitArgs {
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub tau: C,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value = "+", value_parser = parse_spin, allow_hyphen_values = true)]
    pub spin: SpinChoice,
    /// Half the number of a-steps at level 0.
    #[arg(long, default_value_t = 4)]
    pub n0: usize,
    #[arg(long, value_enum, default_value_t = Target::Square)]
    pub target: Target,
}

/// Accepts `i`, `2i`, `0.5+i`, `-0.1+1.2i`, `1.5`.
pub fn parse_complex(s: &str) -> Result<C, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|x| C::new(x, 0.0)).map_err(|e| format!("{s:?}: {e}"));
    };
    let split = body.char_indices().skip(1).filter(|&(k, c)| {
        (c == '+' || c == '-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E')
    });
    let (re, im) = match split.last() {
        Some((k, _)) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        x => x,
    };
    let re: f64 = re.parse().map_err(|e| format!("{s:?}: {e}"))?;
    let im: f64 = im.trim_start_matches('+').parse().map_err(|e| format!("{s:?}: {e}"))?;
    Ok(C::new(re, im))
}

fn parse_spin(s: &str) -> Result<SpinChoice, String> {
    s.parse().map_err(|e: dimerglue::Error| e.to_string())
}

pub fn fmt_c(z: C) -> String {
    format!("{:.12e}{:+.12e}i", z.re, z.im)
}

/// `exp(x)` in scientific notation without overflowing.
fn fmt_exp(x: f64) -> String {
    let d = x / std::f64::consts::LN_10;
    let e = d.floor();
    format!("{:.6}e{}", 10f64.powf(d - e), e as i64)
}

fn torus(args: &VerifyArgs) -> dimerglue::Result<RhomboidTorus> {
    match args.seed {
        Some(seed) => RhomboidTorus::random_isoradial(args.n, args.m, args.tau, seed),
        None => {
            if args.n == 0 || args.m == 0 {
                return Err(dimerglue::Error::Validation("n and m must be positive".into()));
            }
            let a = vec![C::new(1.0 / (2 * args.n) as f64, 0.0); 2 * args.n];
            let b = vec![args.tau / (2 * args.m) as f64; 2 * args.m];
            RhomboidTorus::parallelogram(a, b, args.tau)
        }
    }
}

pub fn verify(args: &VerifyArgs) -> anyhow::Result<Vec<Check>> {
    let rt = torus(args)?;
    let rep = verify_trace(&rt)?;
    let mut name = format!("n={} m={} tau={}", args.n, args.m, args.tau);
    if let Some(s) = args.seed {
        name += &format!(" seed={s}");
    }
    let mut checks = Vec::new();
    for (t, twist) in SpinChoice::BOTH.into_iter().enumerate() {
        let r = rep.residual[t];
        let best = if r[0] <= r[1] { 0 } else { 1 };
        let square = rep.trace[best] * rep.trace[best];
        let detail = match rep.matched(twist, args.tol) {
            Some(s) => format!("matched s={s}"),
            None => format!("residuals s=+ {:.3e}, s=- {:.3e}", r[0], r[1]),
        };
        checks.push(
            Check::new(name.as_str(), format!("det-trace[twist={twist}]"), rep.matched(twist, args.tol).is_some())
                .sides(fmt_c(rep.det_full[t]), fmt_c(square))
                .residual(r[best])
                .detail(detail),
        );
    }
    checks.push(Check::new(name.as_str(), "twist-ratio", rep.gauge_residual < args.tol).residual(rep.gauge_residual));
    // the factorization needs two rows of faces
    for (t, twist) in SpinChoice::BOTH.into_iter().enumerate().filter(|_| args.m >= 2) {
        let r = rep.mechanism_residual[t];
        checks.push(Check::new(name.as_str(), format!("block-factorization[twist={twist}]"), r < args.tol).residual(r));
    }
    Ok(checks)
}

#[derive(Serialize)]
struct LimitOut {
    tau: String,
    spin: String,
    target: String,
    rows: Vec<RowOut>,
    decreasing: bool,
}

#[derive(Serialize)]
struct RowOut {
    level: usize,
    n: usize,
    m: usize,
    regularized: [f64; 2],
    target: [f64; 2],
    abs_error: f64,
    rel_error: f64,
    unregularized_log_magnitude: f64,
}

/// Writes the series; `Ok(true)` when the error column strictly decreases.
pub fn limit(args: &LimitArgs, format: Format, out: &mut dyn Write) -> anyhow::Result<bool> {
    let rt = RhomboidTorus::equal_step(args.n0, args.tau)?;
    let target = match args.target {
        Target::Square => LimitTarget::Square,
        Target::Fourth => LimitTarget::FourthPower,
    };
    let rows = limit_series(&rt, args.levels, args.spin, target).context("limit series")?;
    let decreasing = rows.windows(2).all(|w| w[1].abs_error < w[0].abs_error);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["level", "n", "m", "regularized", "target", "abs_error", "unregularized_magnitude"])?;
            for r in &rows {
                w.write_record(csv_row(r))?;
            }
            w.flush()?;
        }
        Format::Json => {
            let o = LimitOut {
                tau: args.tau.to_string(),
                spin: args.spin.to_string(),
                target: format!("{:?}", args.target).to_lowercase(),
                rows: rows
                    .iter()
                    .map(|r| RowOut {
                        level: r.level,
                        n: r.n,
                        m: r.m,
                        regularized: [r.regularized.re, r.regularized.im],
                        target: [r.target.re, r.target.im],
                        abs_error: r.abs_error,
                        rel_error: r.rel_error,
                        unregularized_log_magnitude: r.unregularized_log_magnitude,
                    })
                    .collect(),
                decreasing,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
        }
        Format::Text => {
            for r in &rows {
                writeln!(
                    out,
                    "level {} ({}x{}): {} vs {}, error {:.3e}, unregularized {}",
                    r.level,
                    r.n,
                    r.m,
                    fmt_c(r.regularized),
                    fmt_c(r.target),
                    r.abs_error,
                    fmt_exp(r.unregularized_log_magnitude)
                )?;
            }
            writeln!(out, "error {}", if decreasing { "strictly decreasing" } else { "not decreasing" })?;
        }
    }
    Ok(decreasing)
}

fn csv_row(r: &LimitRow) -> [String; 7] {
    [
        r.level.to_string(),
        r.n.to_string(),
        r.m.to_string(),
        fmt_c(r.regularized),
        fmt_c(r.target),
        format!("{:.12e}", r.abs_error),
        fmt_exp(r.unregularized_log_magnitude),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        for (s, z) in [
            ("i", C::new(0.0, 1.0)),
            ("2i", C::new(0.0, 2.0)),
            ("0.5+i", C::new(0.5, 1.0)),
            ("-0.1-1.5i", C::new(-0.1, -1.5)),
            ("1e-3+2e+0i", C::new(1e-3, 2.0)),
            ("1.5", C::new(1.5, 0.0)),
            ("-i", C::new(0.0, -1.0)),
        ] {
            assert_eq!(parse_complex(s).unwrap(), z, "{s}");
        }
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn large_exponentials() {
        assert_eq!(fmt_exp(0.0), "1.000000e0");
        assert!(fmt_exp(1150.9).ends_with("e499"));
    }
}

//! Acceptance checks, one line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are expected to fail; they still print
//! `FAIL`. The process exits nonzero on any other failure, or on every
//! failure when `ACCEPTANCE_STRICT` is set.

use std::path::PathBuf;
use std::time::Instant;

use dimerglue::cft::{fermionic_partition, triple_product_check, truncation_for, Nome, SpinPair};
use dimerglue::corpus::{load_dir, smallest, torus_grid, Instance};
use dimerglue::critical::{
    limit_series, verify_trace, LimitRow, LimitTarget, RhomboidTorus, SpinChoice,
};
use dimerglue::gluing::{
    build_piece, glue_orientation, verify_signed_dimer_glue, verify_signed_ising_glue, verify_unsigned_dimer_glue,
    verify_unsigned_ising_glue, Gadget,
};
use dimerglue::graph::Edge;
use dimerglue::ising::van_der_waerden_check;
use dimerglue::kasteleyn::{arf_pfaffian_formula, kasteleyn_orientation, satisfies_sign_law};
use dimerglue::pfaffian::{
    determinant_exact, determinant_numeric, pfaffian_exact, pfaffian_numeric, Orientation, SkewMatrix,
};
use dimerglue::gluing::permutation_sign;
use dimerglue::surface::{arf_reconstruction_check, EmbeddedGraph, QuadraticForm};
use dimerglue::{Graph, MultiPoly, Rational, Var, Weight};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_251_015;
const MIN_FIXTURES: usize = 50;
const TRACE_TOL: f64 = 1e-8;
const TRACE_32_3: f64 = 32.0 / 3.0;
const TRACE_32_3_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-8;
const LIMIT_FINAL_REL: f64 = 5e-2;
const LIMIT_LEVELS: usize = 3;
const LIMIT_START_N: usize = 4;
const TRIPLE_TOL: f64 = 1e-10;
const CONVERGED_TOL: f64 = 1e-12;
const CONVERGED_STEP: u32 = 50;
const VDW_GRAPHS: usize = 100;
const PF_NUMERIC_TOL: f64 = 1e-9;
const PF_NUMERIC_ORDERS: [usize; 6] = [2, 8, 32, 64, 128, 200];
const KNOWN_RED: [&str; 3] = ["5", "6", "6b"];

struct Line {
    id: &'static str,
    pass: bool,
    text: String,
    secs: f64,
}

fn run(id: &'static str, f: impl FnOnce() -> (bool, String)) -> Line {
    let t = Instant::now();
    let (pass, text) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => (false, format!("panicked: {}", panic_text(&e))),
    };
    let line = Line { id, pass, text, secs: t.elapsed().as_secs_f64() };
    let tag = if line.pass { "PASS" } else { "FAIL" };
    println!("{tag} {:<3} {} [{:.1}s]", line.id, line.text, line.secs);
    line
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn fixtures() -> Vec<Instance> {
    load_dir(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")).expect("fixture corpus")
}

fn i() -> C {
    C::new(0.0, 1.0)
}

fn gluing(corpus: &[Instance]) -> (bool, String) {
    let mut bad = Vec::new();
    for inst in corpus {
        let (eg, cut) = (&inst.embedded, &inst.cut);
        let mut ok = verify_unsigned_ising_glue(eg, cut).unwrap().holds()
            && verify_unsigned_dimer_glue(eg, cut).unwrap().holds();
        for q in QuadraticForm::all(2) {
            ok &= verify_signed_ising_glue(eg, cut, q).unwrap().holds();
        }
        ok &= verify_signed_dimer_glue(eg, cut, &glue_orientation(eg, cut).unwrap()).unwrap().holds();
        if !ok {
            bad.push(inst.name.clone());
        }
    }
    let small = smallest(corpus).expect("nonempty corpus");
    let g = small.embedded.graph();
    let total = 1u128 << g.edge_count();
    let failed_orientations = (0..total)
        .filter(|&b| !verify_signed_dimer_glue(&small.embedded, &small.cut, &Orientation::from_bits(g, b)).unwrap().holds())
        .count();
    let k2 = corpus.iter().filter(|c| c.cut.k() == 2).count();
    let pass = bad.is_empty() && failed_orientations == 0 && corpus.len() >= MIN_FIXTURES;
    (
        pass,
        format!(
            "gluing theorems exact on {} fixtures ({k2} with k=2, {} with k=4; 16 forms each); \
             signed dimer over all {total} orientations of {}: {failed_orientations} failures; failing fixtures: {bad:?}",
            corpus.len(),
            corpus.len() - k2,
            small.name
        ),
    )
}

fn sign_law(corpus: &[Instance]) -> (bool, String) {
    let mut bad = Vec::new();
    let mut matchings = 0;
    for inst in corpus {
        let d = kasteleyn_orientation(&inst.embedded).unwrap();
        matchings += dimerglue::graph::perfect_matchings(inst.embedded.graph()).unwrap().len();
        if !satisfies_sign_law(&inst.embedded, &d).unwrap() {
            bad.push(inst.name.clone());
        }
    }
    (bad.is_empty(), format!("matching signs follow crossing parity for {matchings} matchings; failing: {bad:?}"))
}

fn arf(corpus: &[Instance]) -> (bool, String) {
    let mut genus_one: Vec<EmbeddedGraph> = [(2, 2), (3, 2), (4, 2), (3, 3)]
        .iter()
        .map(|&(w, h)| torus_grid(w, h, 0).unwrap())
        .collect();
    for inst in corpus.iter().take(6) {
        for side in 1..=2 {
            genus_one.push(build_piece(&inst.embedded, &inst.cut, side, Gadget::Target).unwrap().embedded);
        }
    }
    let genus_two: Vec<&EmbeddedGraph> = corpus.iter().map(|c| &c.embedded).collect();
    let mut bad = 0;
    let all: Vec<&EmbeddedGraph> = genus_one.iter().chain(genus_two.iter().copied()).collect();
    for eg in &all {
        let unit = Rational::new(1, 1 << eg.genus());
        let even = arf_reconstruction_check(eg).unwrap();
        let even_ok = even.canonical && even.coefficients.iter().all(|(_, c)| c.abs() == unit);
        let pf = arf_pfaffian_formula(eg).unwrap();
        let pf_ok = pf.holds && pf.canonical && pf.entries.iter().all(|e| e.coef.abs() == unit);
        if !(even_ok && pf_ok) {
            bad += 1;
        }
    }
    (
        bad == 0,
        format!(
            "even and matching polynomials rebuilt from 4^g signed terms with |c| = 2^-g on {} genus-1 and {} genus-2 graphs; {bad} failures",
            genus_one.len(),
            genus_two.len()
        ),
    )
}

fn vdw() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = 0;
    for _ in 0..VDW_GRAPHS {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(0..=12);
        let edges = (0..m)
            .map(|e| Edge::new(rng.gen_range(0..n), rng.gen_range(0..n), Weight::Var(Var::X(e as u32 + 1))))
            .collect();
        if !van_der_waerden_check(&Graph::new(n, edges).unwrap()).unwrap().holds() {
            bad += 1;
        }
    }
    (bad == 0, format!("high-temperature identity exact on {VDW_GRAPHS} random graphs (<= 8 vertices); {bad} failures"))
}

fn generic_tori() -> Vec<RhomboidTorus> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();
    for &(n, m) in &[(2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (4, 2), (3, 4), (4, 3), (4, 4)] {
        for _ in 0..2 {
            let tau = C::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.8..1.3));
            if let Ok(rt) = RhomboidTorus::random_isoradial(n, m, tau, rng.gen()) {
                out.push(rt);
            }
        }
    }
    out
}

fn instance_32_3() -> RhomboidTorus {
    RhomboidTorus::parallelogram(vec![C::new(0.25, 0.0); 4], vec![i() / 2.0; 2], i()).unwrap()
}

fn trace_literal(tori: &[RhomboidTorus]) -> (bool, String) {
    let mut matched = 0;
    let mut worst_best = 0.0f64;
    for rt in tori {
        let rep = verify_trace(rt).unwrap();
        if rep.literal_holds(TRACE_TOL) {
            matched += 1;
        }
        worst_best = worst_best.max(rep.best_residual());
    }
    let pinned = verify_trace(&instance_32_3()).unwrap();
    let pinned_ok = pinned.literal_holds(TRACE_TOL);
    (
        matched == tori.len() && pinned_ok,
        format!(
            "det of the full matrix equals trace product squared for exactly one spin (rel < {TRACE_TOL:e}) on {matched}/{} generic tori; \
             worst best-residual {worst_best:.3e}; 32/3 instance: det = {:.6}, trace^2 = {:.6}",
            tori.len(),
            pinned.det_full[0].re,
            (pinned.trace[0] * pinned.trace[0]).re
        ),
    )
}

fn trace_pinned() -> (bool, String) {
    let rep = verify_trace(&instance_32_3()).unwrap();
    let t = rep.trace[0];
    let ok = (t - TRACE_32_3).norm() < TRACE_32_3_TOL;
    (ok, format!("trace product of the 32/3 instance, spin +: {:.15}", t.re))
}

fn gauge_and_mechanism(tori: &[RhomboidTorus]) -> (bool, String) {
    let mut worst_gauge = 0.0f64;
    let mut worst_mech = 0.0f64;
    for rt in tori {
        let rep = verify_trace(rt).unwrap();
        worst_gauge = worst_gauge.max(rep.gauge_residual);
        for r in rep.mechanism_residual {
            worst_mech = if r.is_nan() { f64::INFINITY } else { worst_mech.max(r) };
        }
    }
    (
        worst_gauge < IDENTITY_TOL && worst_mech < IDENTITY_TOL,
        format!(
            "twist-ratio identity det K(+) T(-) = (-1)^n det K(-) T(+) worst {worst_gauge:.2e}; \
             block factorization worst {worst_mech:.2e} (tol {IDENTITY_TOL:e})"
        ),
    )
}

fn series(tau: C, target: LimitTarget) -> Vec<LimitRow> {
    let rt = RhomboidTorus::equal_step(LIMIT_START_N, tau).unwrap();
    limit_series(&rt, LIMIT_LEVELS, SpinChoice::Plus, target).unwrap()
}

fn decreasing(rows: &[LimitRow]) -> bool {
    rows.windows(2).all(|w| w[1].abs_error < w[0].abs_error)
}

fn limit(target: LimitTarget, taus: &[C]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &tau in taus {
        let rows = series(tau, target);
        let last = rows.last().unwrap().rel_error;
        pass &= decreasing(&rows) && last < LIMIT_FINAL_REL;
        let errs: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.rel_error)).collect();
        parts.push(format!("tau={tau}: rel errors [{}]", errs.join(", ")));
    }
    let what = match target {
        LimitTarget::Square => "prod (1 - q^(j+1/2))^2",
        LimitTarget::FourthPower => "prod (1 - q^(j+1/2))^4",
    };
    (pass, format!("regularized products vs {what}, strictly decreasing and final < {LIMIT_FINAL_REL:e}: {}", parts.join("; ")))
}

fn divergence(taus: &[C]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &tau in taus {
        let rows = series(tau, LimitTarget::Square);
        pass &= rows.windows(2).all(|w| w[1].unregularized_log_magnitude > w[0].unregularized_log_magnitude);
        let logs: Vec<String> = rows.iter().map(|r| format!("{:.1}", r.unregularized_log_magnitude)).collect();
        parts.push(format!("tau={tau}: ln|prod| [{}]", logs.join(", ")));
    }
    (pass, format!("unregularized product strictly increasing: {}", parts.join("; ")))
}

fn triple_product() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for tau in [i(), 2.0 * i()] {
        let q = Nome::from_tau(tau).unwrap();
        let n = truncation_for(&q, 1e-16);
        let a = triple_product_check(&q, n).unwrap();
        let b = triple_product_check(&q, n + CONVERGED_STEP).unwrap();
        let stable = (a.fermionic_total - b.fermionic_total).norm() < CONVERGED_TOL
            && (a.bosonic_total - b.bosonic_total).norm() < CONVERGED_TOL;
        let rr = fermionic_partition(&q, &q.conj(), SpinPair::ALL[3], 2, n).value;
        pass &= a.holds(TRIPLE_TOL) && stable && rr == C::new(0.0, 0.0);
        parts.push(format!("tau={tau}: residual {:.1e}, totals {:.1e}, R-R = {rr}", a.residual, a.total_residual));
    }
    (pass, format!("fermion pair vs lattice boson at tol {TRIPLE_TOL:e}: {}", parts.join("; ")))
}

fn skew_poly(n: usize, rng: &mut ChaCha8Rng) -> SkewMatrix<MultiPoly> {
    let mut m = SkewMatrix::zeros(n);
    let mut var = 0;
    for a in 0..n {
        for b in a + 1..n {
            let c = Rational::new(rng.gen_range(-4..=4), rng.gen_range(1..=3));
            let v = if rng.gen_bool(0.5) {
                var += 1;
                MultiPoly::var(Var::X(var)).scale(c)
            } else {
                MultiPoly::constant(c)
            };
            m.set(a, b, v);
        }
    }
    m
}

fn pfaffians() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut exact_bad = 0;
    let mut perm_bad = 0;
    let mut exact = 0;
    for n in (2..=8).step_by(2) {
        for _ in 0..6 {
            let m = skew_poly(n, &mut rng);
            let pf = pfaffian_exact(&m).unwrap();
            if &pf * &pf != determinant_exact(&m).unwrap() {
                exact_bad += 1;
            }
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            let s = Rational::from_integer(permutation_sign(&p) as i128);
            if pfaffian_exact(&m.permuted(&p)).unwrap() != pf.scale(s) {
                perm_bad += 1;
            }
            exact += 1;
        }
    }
    let mut worst = 0.0f64;
    for &n in &PF_NUMERIC_ORDERS {
        let mut a = DMatrix::from_element(n, n, C::new(0.0, 0.0));
        for r in 0..n {
            for c in r + 1..n {
                let z = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[(r, c)] = z;
                a[(c, r)] = -z;
            }
        }
        let pf = pfaffian_numeric(&a).unwrap();
        let det = determinant_numeric(&a);
        worst = worst.max((pf * pf - det).norm() / det.norm());
    }
    (
        exact_bad == 0 && perm_bad == 0 && worst < PF_NUMERIC_TOL,
        format!(
            "pf^2 = det exactly on {exact} matrices (n <= 8), {exact_bad} failures; permutation covariance {perm_bad} failures; \
             numeric n <= 200 worst rel {worst:.1e} (tol {PF_NUMERIC_TOL:e})"
        ),
    )
}

fn main() {
    let corpus = fixtures();
    let tori = generic_tori();
    let taus = [i(), 2.0 * i()];
    let lines = vec![
        run("1", || gluing(&corpus)),
        run("2", || sign_law(&corpus)),
        run("3", || arf(&corpus)),
        run("4", vdw),
        run("5", || trace_literal(&tori)),
        run("5a", trace_pinned),
        run("5b", || gauge_and_mechanism(&tori)),
        run("6", || limit(LimitTarget::Square, &taus)),
        run("6a", || limit(LimitTarget::FourthPower, &taus)),
        run("6b", || limit(LimitTarget::FourthPower, &[C::new(0.5, 1.0)])),
        run("7", || divergence(&taus)),
        run("8", triple_product),
        run("9", pfaffians),
    ];
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    let failed: Vec<&Line> = lines.iter().filter(|l| !l.pass).collect();
    let unexpected: Vec<&str> =
        failed.iter().filter(|l| strict || !KNOWN_RED.contains(&l.id)).map(|l| l.id).collect();
    let total: f64 = lines.iter().map(|l| l.secs).sum();
    println!(
        "acceptance: {} passed, {} failed ({} known), {:.1}s",
        lines.len() - failed.len(),
        failed.len(),
        failed.iter().filter(|l| KNOWN_RED.contains(&l.id)).count(),
        total
    );
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

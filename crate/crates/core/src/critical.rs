//! Rhomboid graphs on the torus `C / <1, tau>`, their chiral Kasteleyn
//! matrices, Kenyon exponentials and the trace-product formula for the
//! determinant, together with the regularized product under subdivision.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cft::{self, Nome};
use crate::error::{Error, Result};
use crate::pfaffian::pfaffian_numeric;

type C = Complex64;

const ONE: C = C::new(1.0, 0.0);
const ZERO: C = C::new(0.0, 0.0);

/// Leading coefficients below this fraction of the largest one count as
/// cancelled.
pub const DEGREE_DROP_TOL: f64 = 1e-12;
/// Largest lattice dimension `2n` or `2m` accepted for matrix assembly.
pub const MAX_MATRIX_STEPS: usize = 128;

/// Sign of the twist across the `[0, tau]` period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpinChoice {
    Plus,
    Minus,
}

impl SpinChoice {
    pub const BOTH: [SpinChoice; 2] = [SpinChoice::Plus, SpinChoice::Minus];

    pub fn sign(self) -> f64 {
        match self {
            SpinChoice::Plus => 1.0,
            SpinChoice::Minus => -1.0,
        }
    }

    fn index(self) -> usize {
        match self {
            SpinChoice::Plus => 0,
            SpinChoice::Minus => 1,
        }
    }
}

impl fmt::Display for SpinChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinChoice::Plus => "+",
            SpinChoice::Minus => "-",
        })
    }
}

impl FromStr for SpinChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" | "+1" | "1" => Ok(SpinChoice::Plus),
            "-" | "minus" | "-1" => Ok(SpinChoice::Minus),
            _ => Err(Error::Parse(format!("spin must be + or -, got {s:?}"))),
        }
    }
}

/// Steps `a_1..a_2n` along the `1` period and `b_1..b_2m` along `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct RhomboidTorus {
    a: Vec<C>,
    b: Vec<C>,
    tau: C,
    isoradial: bool,
}

fn close(x: C, y: C) -> bool {
    (x - y).norm() <= 1e-12 * (1.0 + y.norm())
}

impl RhomboidTorus {
    /// Requires equal moduli for all steps.
    pub fn new(a: Vec<C>, b: Vec<C>, tau: C) -> Result<Self> {
        let t = Self::parallelogram(a, b, tau)?;
        if !t.isoradial {
            return Err(Error::Validation("steps must all have the same modulus".into()));
        }
        Ok(t)
    }

    /// Same sums as [`RhomboidTorus::new`] without the equal-modulus
    /// condition; the matrix is still defined but the faces are not cyclic.
    pub fn parallelogram(a: Vec<C>, b: Vec<C>, tau: C) -> Result<Self> {
        if a.is_empty() || b.is_empty() || a.len() % 2 != 0 || b.len() % 2 != 0 {
            return Err(Error::Validation("step lists must have positive even length".into()));
        }
        if !(tau.im > 0.0) {
            return Err(Error::Validation(format!("tau must have positive imaginary part, got {tau}")));
        }
        if a.iter().chain(&b).any(|s| !s.re.is_finite() || !s.im.is_finite() || s.norm() == 0.0) {
            return Err(Error::Validation("steps must be finite and nonzero".into()));
        }
        if !close(a.iter().sum(), ONE) {
            return Err(Error::Validation("a-steps must sum to 1".into()));
        }
        if !close(b.iter().sum(), tau) {
            return Err(Error::Validation("b-steps must sum to tau".into()));
        }
        for x in &a {
            for y in &b {
                if !((y / x).im > 1e-12) {
                    return Err(Error::Degenerate(format!("steps {x} and {y} do not span a positively oriented rhombus")));
                }
            }
        }
        let r = a[0].norm();
        let isoradial = a.iter().chain(&b).all(|s| (s.norm() - r).abs() <= 1e-12 * r);
        Ok(RhomboidTorus { a, b, tau, isoradial })
    }

    /// `2n` equal real a-steps; the b-steps have the same modulus and
    /// zigzag around the direction of `tau` when `n |tau|` is not an integer.
    pub fn equal_step(n: usize, tau: C) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("n must be positive".into()));
        }
        if !(tau.im > 0.0) {
            return Err(Error::Validation(format!("tau must have positive imaginary part, got {tau}")));
        }
        let r = 1.0 / (2.0 * n as f64);
        let m = (n as f64 * tau.norm() - 1e-9).ceil().max(1.0) as usize;
        let c = tau / (2.0 * m as f64);
        let off = (r * r - c.norm_sqr()).max(0.0).sqrt();
        let w = C::new(0.0, off) * tau / tau.norm();
        let a = vec![C::new(r, 0.0); 2 * n];
        let b = (0..2 * m).map(|i| if i % 2 == 0 { c + w } else { c - w }).collect();
        Self::new(a, b, tau)
    }

    /// Random isoradial steps: a-steps zigzag around the real axis, b-steps
    /// around the direction of `tau`, all of one modulus, with every rhombus
    /// positively oriented.
    pub fn random_isoradial(n: usize, m: usize, tau: C, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Validation("n and m must be positive".into()));
        }
        if !(tau.im > 0.0) {
            return Err(Error::Validation(format!("tau must have positive imaginary part, got {tau}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cap = 0.97 * m as f64 / tau.norm();
        if cap < 0.25 * n as f64 {
            return Err(Error::Validation(format!("m = {m} is too small for |tau| = {} and n = {n}", tau.norm())));
        }
        let spread = |count: usize, total: f64, rng: &mut ChaCha8Rng| -> Option<Vec<f64>> {
            let w: Vec<f64> = (0..count).map(|_| rng.gen_range(0.8..1.2)).collect();
            let sw: f64 = w.iter().sum();
            let c: Vec<f64> = w.iter().map(|x| x * total / sw).collect();
            c.iter().all(|&x| (0.2..0.99).contains(&x)).then_some(c)
        };
        for _ in 0..1000 {
            let sa = (n as f64 * rng.gen_range(0.7..0.99)).min(cap);
            let Some(ca) = spread(n, sa, &mut rng) else { continue };
            let r = 1.0 / (2.0 * sa);
            let Some(cb) = spread(m, tau.norm() * sa, &mut rng) else { continue };
            let mut a = Vec::with_capacity(2 * n);
            for c in &ca {
                let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                a.push(C::from_polar(r, s * c.acos()));
                a.push(C::from_polar(r, -s * c.acos()));
            }
            let mut b = Vec::with_capacity(2 * m);
            for c in &cb {
                let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                b.push(C::from_polar(r, tau.arg() + s * c.acos()));
                b.push(C::from_polar(r, tau.arg() - s * c.acos()));
            }
            if let Ok(t) = Self::new(a, b, tau) {
                return Ok(t);
            }
        }
        Err(Error::Degenerate(format!("no embedded isoradial steps found for tau = {tau}")))
    }

    pub fn a(&self) -> &[C] {
        &self.a
    }

    pub fn b(&self) -> &[C] {
        &self.b
    }

    pub fn tau(&self) -> C {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.a.len() / 2
    }

    pub fn m(&self) -> usize {
        self.b.len() / 2
    }

    pub fn is_isoradial(&self) -> bool {
        self.isoradial
    }

    /// Vertex `A_k + B_l` of the universal cover, `0 <= k <= 2n`, `0 <= l <= 2m`.
    pub fn position(&self, k: usize, l: usize) -> C {
        self.a[..k].iter().sum::<C>() + self.b[..l].iter().sum::<C>()
    }

    /// Position of lattice point `(k, l)` for any integers, extended
    /// periodically.
    pub fn position_ext(&self, k: i64, l: i64) -> C {
        let (n2, m2) = (self.a.len() as i64, self.b.len() as i64);
        let (qk, rk) = (k.div_euclid(n2), k.rem_euclid(n2) as usize);
        let (ql, rl) = (l.div_euclid(m2), l.rem_euclid(m2) as usize);
        self.position(rk, rl) + C::new(qk as f64, 0.0) + self.tau * ql as f64
    }

    /// Applies a map to every step, keeping `tau` as the sum of the new
    /// b-steps; used for rigid motions in tests.
    pub fn map_steps(&self, f: impl Fn(C) -> C) -> Self {
        let a: Vec<C> = self.a.iter().map(|&x| f(x)).collect();
        let b: Vec<C> = self.b.iter().map(|&x| f(x)).collect();
        let tau = b.iter().sum();
        RhomboidTorus { a, b, tau, isoradial: self.isoradial }
    }
}

/// Each step split into two equal halves.
pub fn subdivide(rt: &RhomboidTorus) -> RhomboidTorus {
    let split = |v: &[C]| v.iter().flat_map(|&x| [x / 2.0, x / 2.0]).collect::<Vec<_>>();
    RhomboidTorus { a: split(&rt.a), b: split(&rt.b), tau: rt.tau, isoradial: rt.isoradial }
}

/// The white-to-black block `K`; rows are white vertices `(2i+1, 2k+1)`,
/// columns black vertices `(2i, 2k)`, both in lexicographic order.
#[derive(Clone, Debug)]
pub struct TorusKasteleyn {
    n: usize,
    m: usize,
    spin: SpinChoice,
    k: DMatrix<C>,
}

impl TorusKasteleyn {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn spin(&self) -> SpinChoice {
        self.spin
    }

    pub fn matrix(&self) -> &DMatrix<C> {
        &self.k
    }

    /// Index of the black vertex with lattice coordinates `(2i, 2k)`.
    pub fn black_index(&self, i: usize, k: usize) -> usize {
        i * self.m + k
    }

    /// Index of the white vertex `(2i+1, 2k+1)`.
    pub fn white_index(&self, i: usize, k: usize) -> usize {
        i * self.m + k
    }

    /// The antisymmetric `2nm x 2nm` matrix, black vertices first.
    pub fn full(&self) -> DMatrix<C> {
        let s = self.n * self.m;
        let mut f = DMatrix::from_element(2 * s, 2 * s, ZERO);
        for w in 0..s {
            for b in 0..s {
                let x = self.k[(w, b)];
                f[(s + w, b)] = x;
                f[(b, s + w)] = -x;
            }
        }
        f
    }
}

/// One edge of the rhombic lattice seen from a white vertex.
#[derive(Clone, Copy, Debug)]
struct Incidence {
    white: (usize, usize),
    black: (usize, usize),
    da: C,
    db: C,
    wrap_a: bool,
    wrap_b: bool,
}

fn incidences(rt: &RhomboidTorus) -> Vec<Incidence> {
    let (n2, m2) = (rt.a.len(), rt.b.len());
    let mut out = Vec::with_capacity(n2 * m2);
    for k in (1..n2).step_by(2) {
        for l in (1..m2).step_by(2) {
            for (up_a, up_b) in [(false, false), (false, true), (true, false), (true, true)] {
                let (kk, da) = if up_a { (k + 1, rt.a[k]) } else { (k - 1, -rt.a[k - 1]) };
                let (ll, db) = if up_b { (l + 1, rt.b[l]) } else { (l - 1, -rt.b[l - 1]) };
                out.push(Incidence {
                    white: (k, l),
                    black: (kk % n2, ll % m2),
                    da,
                    db,
                    wrap_a: kk == n2,
                    wrap_b: ll == m2,
                });
            }
        }
    }
    out
}

/// Builds `K` with the antiperiodic twist across `[0, 1]` and the spin
/// twist across `[0, tau]`.
pub fn build_torus(rt: &RhomboidTorus, spin: SpinChoice) -> Result<TorusKasteleyn> {
    crate::error::capacity("lattice steps", MAX_MATRIX_STEPS, rt.a.len().max(rt.b.len()))?;
    let (n, m) = (rt.n(), rt.m());
    let mut k = DMatrix::from_element(n * m, n * m, ZERO);
    for inc in incidences(rt) {
        let co = inc.da - inc.db;
        let diag = inc.da + inc.db;
        if co.norm() == 0.0 || diag.norm() == 0.0 {
            return Err(Error::Degenerate(format!("flat rhombus at white vertex {:?}", inc.white)));
        }
        let mut w = diag / diag.norm() * co.norm();
        if inc.wrap_a {
            w = -w;
        }
        if inc.wrap_b {
            w *= spin.sign();
        }
        let row = (inc.white.0 / 2) * m + inc.white.1 / 2;
        let col = (inc.black.0 / 2) * m + inc.black.1 / 2;
        k[(row, col)] += w;
    }
    Ok(TorusKasteleyn { n, m, spin, k })
}

/// Largest relative gap between `|K(w, b)|` from the step formula and twice
/// the distance from the circumcenter of an adjacent face to the midpoint
/// of `wb`. Faces of non-isoradial tori have no circumcenter, so the value
/// is only meaningful for isoradial input.
pub fn circumcenter_check(rt: &RhomboidTorus) -> f64 {
    let mut worst = 0.0f64;
    for inc in incidences(rt) {
        let (k, l) = (inc.white.0 as i64, inc.white.1 as i64);
        let ka = if inc.da == rt.a[inc.white.0] { k + 1 } else { k - 1 };
        let lb = if inc.db == rt.b[inc.white.1] { l + 1 } else { l - 1 };
        let w = rt.position_ext(k, l);
        let b = rt.position_ext(ka, lb);
        // the dual corner (ka, l) is the center of a face through w, b and
        // its other neighbour (2 ka - k, l)
        let third = rt.position_ext(2 * ka - k, l);
        let center = circumcenter(w, b, third);
        let from_center = 2.0 * (center - (w + b) / 2.0).norm();
        let from_steps = (inc.da - inc.db).norm();
        worst = worst.max((from_center - from_steps).abs() / from_steps);
    }
    worst
}

fn circumcenter(p: C, q: C, r: C) -> C {
    let (b, c) = (q - p, r - p);
    let d = 2.0 * (b.re * c.im - b.im * c.re);
    let ux = (c.im * b.norm_sqr() - b.im * c.norm_sqr()) / d;
    let uy = (b.re * c.norm_sqr() - c.re * b.norm_sqr()) / d;
    p + C::new(ux, uy)
}

/// `prod_{i<=k} (1 + z b_{2i-1}) / (1 - z b_{2i}) * prod_{j<=l} (1 + z a_{2j-1}) / (1 - z a_{2j})`.
pub fn kenyon_exponential(rt: &RhomboidTorus, k: usize, l: usize, z: C) -> Result<C> {
    if k > rt.m() || l > rt.n() {
        return Err(Error::Validation(format!("exponent ({k}, {l}) outside one period")));
    }
    let mut f = ONE;
    for (steps, count) in [(&rt.b, k), (&rt.a, l)] {
        for i in 0..count {
            let den = ONE - z * steps[2 * i + 1];
            if den.norm() < 1e-300 {
                return Err(Error::Degenerate(format!("z = {z} is a pole of the exponential")));
            }
            f *= (ONE + z * steps[2 * i]) / den;
        }
    }
    Ok(f)
}

pub fn f_one(rt: &RhomboidTorus, z: C) -> Result<C> {
    kenyon_exponential(rt, 0, rt.n(), z)
}

pub fn f_tau(rt: &RhomboidTorus, z: C) -> Result<C> {
    kenyon_exponential(rt, rt.m(), 0, z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootReport {
    pub roots: Vec<C>,
    /// Nominal degree `n`.
    pub degree: usize,
    /// How many leading coefficients cancelled.
    pub degree_drop: usize,
    /// Largest `|f_1(z_j) + 1|`.
    pub max_residual: f64,
}

impl RootReport {
    pub fn is_degenerate(&self) -> bool {
        self.roots.len() < self.degree
    }
}

fn poly_mul_linear(p: &[C], c: C) -> Vec<C> {
    let mut out = vec![ZERO; p.len() + 1];
    for (i, &x) in p.iter().enumerate() {
        out[i] += x;
        out[i + 1] += x * c;
    }
    out
}

fn horner(p: &[C], z: C) -> (C, C) {
    let mut v = ZERO;
    let mut d = ZERO;
    for &c in p.iter().rev() {
        d = d * z + v;
        v = v * z + c;
    }
    (v, d)
}

/// Roots of `prod (1 + z a_{2j-1}) + prod (1 - z a_{2j})`, i.e. `f_1(z) = -1`.
///
/// The polynomial is formed in `w = r z`, `r` the mean step length, so its
/// coefficients stay of binomial size.
pub fn antiperiodic_roots(rt: &RhomboidTorus) -> Result<RootReport> {
    let n = rt.n();
    let r = rt.a.iter().map(|x| x.norm()).sum::<f64>() / rt.a.len() as f64;
    let mut p = vec![ONE];
    let mut q = vec![ONE];
    for j in 0..n {
        p = poly_mul_linear(&p, rt.a[2 * j] / r);
        q = poly_mul_linear(&q, -rt.a[2 * j + 1] / r);
    }
    let coeffs: Vec<C> = p.iter().zip(&q).map(|(x, y)| x + y).collect();
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut deg = n;
    while deg > 0 && coeffs[deg].norm() <= DEGREE_DROP_TOL * scale {
        deg -= 1;
    }
    let poly = &coeffs[..=deg];
    let roots: Vec<C> = if deg == 0 {
        Vec::new()
    } else {
        let start = companion_eigenvalues(poly).unwrap_or_else(|| aberth(poly));
        start.into_iter().map(|w| polish(poly, w) / r).collect()
    };
    let mut max_residual = 0.0f64;
    for &z in &roots {
        max_residual = max_residual.max((f_one(rt, z)? + ONE).norm());
    }
    Ok(RootReport { roots, degree: n, degree_drop: n - deg, max_residual })
}

fn companion_eigenvalues(poly: &[C]) -> Option<Vec<C>> {
    let deg = poly.len() - 1;
    let lead = poly[deg];
    let mut companion = DMatrix::from_element(deg, deg, ZERO);
    for i in 1..deg {
        companion[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -poly[i] / lead;
    }
    // roots come in near-symmetric pairs, which can stall the QR shifts;
    // an off-axis shift of the spectrum helps
    let shift = C::new(0.37, 0.21) * companion.norm() / deg as f64;
    for i in 0..deg {
        companion[(i, i)] -= shift;
    }
    let eig = nalgebra::Schur::try_new(companion, f64::EPSILON, 10_000)?.eigenvalues()?;
    Some(eig.iter().map(|&z| z + shift).collect())
}

/// Simultaneous Aberth iteration, used when the QR iteration stalls.
fn aberth(poly: &[C]) -> Vec<C> {
    let deg = poly.len() - 1;
    let lead = poly[deg].norm();
    let bound = 1.0 + poly[..deg].iter().map(|c| c.norm() / lead).fold(0.0, f64::max);
    let mut z: Vec<C> = (0..deg)
        .map(|k| C::from_polar(0.5 * bound, 2.0 * PI * (k as f64 + 0.25) / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let (v, d) = horner(poly, z[k]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let repulsion: C = (0..deg).filter(|&j| j != k).map(|j| ONE / (z[k] - z[j])).sum();
            let step = ratio / (ONE - ratio * repulsion);
            z[k] -= step;
            moved = moved.max(step.norm() / z[k].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

fn polish(p: &[C], mut z: C) -> C {
    for _ in 0..50 {
        let (v, d) = horner(p, z);
        if v.norm() == 0.0 || d.norm() == 0.0 {
            break;
        }
        let step = v / d;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let cand = z - step * t;
            if horner(p, cand).0.norm() < v.norm() {
                z = cand;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || step.norm() <= 1e-17 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// `2^m prod_j (1 - spin f_tau(z_j))`.
pub fn trace_product(rt: &RhomboidTorus, spin: SpinChoice) -> Result<C> {
    let roots = antiperiodic_roots(rt)?;
    trace_product_over(rt, &roots.roots, spin)
}

fn trace_product_over(rt: &RhomboidTorus, roots: &[C], spin: SpinChoice) -> Result<C> {
    let mut v = C::new(2f64.powi(rt.m() as i32), 0.0);
    for &z in roots {
        v *= ONE - f_tau(rt, z)? * spin.sign();
    }
    Ok(v)
}

/// Determinants of `K` for both twists compared against both trace products.
#[derive(Clone, Debug)]
pub struct TraceReport {
    pub roots: RootReport,
    /// `det K` indexed by the twist of the matrix.
    pub det_k: [C; 2],
    /// Determinant of the full antisymmetric matrix.
    pub det_full: [C; 2],
    /// Pfaffian of the full matrix in black-then-white order.
    pub pfaffian: [C; 2],
    /// `2^m prod (1 - s f_tau(z_j))` indexed by `s`.
    pub trace: [C; 2],
    /// `|det_full - trace^2| / |trace^2|`, `[matrix twist][s]`.
    pub residual: [[f64; 2]; 2],
    /// Relative failure of `det K(+) T(-) = (-1)^n det K(-) T(+)`.
    pub gauge_residual: f64,
    /// Relative failure of the block factorization `det K det E / det G =
    /// prod (1 - s / f_tau(z_j))`, per twist. NaN when the roots are
    /// degenerate or `m < 2`, where the white row above a black row is also
    /// the one below it and `G` is all of `K E`.
    pub mechanism_residual: [f64; 2],
}

impl TraceReport {
    /// The spin `s` whose squared trace product matches the determinant of
    /// the matrix built with `twist`, if exactly one does.
    pub fn matched(&self, twist: SpinChoice, tol: f64) -> Option<SpinChoice> {
        let r = self.residual[twist.index()];
        match (r[0] < tol, r[1] < tol) {
            (true, false) => Some(SpinChoice::Plus),
            (false, true) => Some(SpinChoice::Minus),
            _ => None,
        }
    }

    /// Every twist is matched by exactly one spin.
    pub fn literal_holds(&self, tol: f64) -> bool {
        SpinChoice::BOTH.iter().all(|&t| self.matched(t, tol).is_some())
    }

    pub fn best_residual(&self) -> f64 {
        self.residual.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn verify_trace(rt: &RhomboidTorus) -> Result<TraceReport> {
    let roots = antiperiodic_roots(rt)?;
    let mut det_k = [ZERO; 2];
    let mut det_full = [ZERO; 2];
    let mut pfaffian = [ZERO; 2];
    let mut trace = [ZERO; 2];
    let mut residual = [[0.0; 2]; 2];
    let mut mechanism_residual = [f64::NAN; 2];
    for s in SpinChoice::BOTH {
        trace[s.index()] = trace_product_over(rt, &roots.roots, s)?;
    }
    for t in SpinChoice::BOTH {
        let tk = build_torus(rt, t)?;
        let full = tk.full();
        let i = t.index();
        det_k[i] = tk.k.clone().lu().determinant();
        det_full[i] = full.clone().lu().determinant();
        pfaffian[i] = pfaffian_numeric(&full)?;
        for s in SpinChoice::BOTH {
            let sq = trace[s.index()] * trace[s.index()];
            residual[i][s.index()] = (det_full[i] - sq).norm() / sq.norm();
        }
        if !roots.is_degenerate() && rt.m() >= 2 {
            mechanism_residual[i] = mechanism(rt, &tk, &roots.roots)?;
        }
    }
    let sign = if rt.n() % 2 == 0 { 1.0 } else { -1.0 };
    let lhs = det_k[0] * trace[1];
    let rhs = det_k[1] * trace[0] * sign;
    let gauge_residual = (lhs - rhs).norm() / lhs.norm().max(rhs.norm());
    Ok(TraceReport { roots, det_k, det_full, pfaffian, trace, residual, gauge_residual, mechanism_residual })
}

/// Columns of `E` are the exponentials `f(z_j)` restricted to one row of
/// black vertices; `G` keeps the part of `K E` on the white row just above.
fn mechanism(rt: &RhomboidTorus, tk: &TorusKasteleyn, roots: &[C]) -> Result<f64> {
    let (n, m) = (rt.n(), rt.m());
    let s = n * m;
    let mut e = DMatrix::from_element(s, s, ZERO);
    for k in 0..m {
        for (j, &z) in roots.iter().enumerate() {
            for i in 0..n {
                e[(tk.black_index(i, k), k * n + j)] = kenyon_exponential(rt, k, i, z)?;
            }
        }
    }
    let ke = &tk.k * &e;
    let mut g = DMatrix::from_element(s, s, ZERO);
    for k in 0..m {
        for j in 0..n {
            for i in 0..n {
                let w = tk.white_index(i, k);
                g[(w, k * n + j)] = ke[(w, k * n + j)];
            }
        }
    }
    let lhs = tk.k.clone().lu().determinant() * e.lu().determinant() / g.lu().determinant();
    let mut rhs = ONE;
    for &z in roots {
        rhs *= ONE - tk.spin.sign() / f_tau(rt, z)?;
    }
    Ok((lhs - rhs).norm() / rhs.norm())
}

/// `prod_j (1 - spin f_tau(i |z_j|))`.
pub fn regularized_pf(rt: &RhomboidTorus, spin: SpinChoice) -> Result<C> {
    let roots = antiperiodic_roots(rt)?;
    regularized_over(rt, &roots.roots, spin)
}

fn regularized_over(rt: &RhomboidTorus, roots: &[C], spin: SpinChoice) -> Result<C> {
    let mut v = ONE;
    for &z in roots {
        v *= ONE - f_tau(rt, C::new(0.0, z.norm()))? * spin.sign();
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unregularized {
    /// `prod_j (1 - spin f_tau(z_j))`; may overflow to infinity.
    pub value: C,
    /// `sum_j ln |1 - spin f_tau(z_j)|`, finite when `value` is not.
    pub log_magnitude: f64,
    /// `value / regularized_pf`.
    pub ratio: C,
}

pub fn unregularized_product(rt: &RhomboidTorus, spin: SpinChoice) -> Result<Unregularized> {
    let roots = antiperiodic_roots(rt)?;
    unregularized_over(rt, &roots.roots, spin)
}

fn unregularized_over(rt: &RhomboidTorus, roots: &[C], spin: SpinChoice) -> Result<Unregularized> {
    let mut value = ONE;
    let mut log_magnitude = 0.0;
    let mut ratio = ONE;
    for &z in roots {
        let f = ONE - f_tau(rt, z)? * spin.sign();
        let g = ONE - f_tau(rt, C::new(0.0, z.norm()))? * spin.sign();
        value *= f;
        log_magnitude += f.norm().ln();
        ratio *= f / g;
    }
    Ok(Unregularized { value, log_magnitude, ratio })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitRow {
    pub level: usize,
    pub n: usize,
    pub m: usize,
    pub regularized: C,
    pub target: C,
    pub abs_error: f64,
    pub rel_error: f64,
    pub unregularized_log_magnitude: f64,
}

impl LimitRow {
    pub fn unregularized_magnitude(&self) -> f64 {
        self.unregularized_log_magnitude.exp()
    }
}

/// Target exponent of the product `prod (1 - spin q^(j+1/2))^e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitTarget {
    /// The stated limit, exponent 2.
    Square,
    /// Exponent 4.
    FourthPower,
}

/// Regularized products at levels `0..=levels` of repeated subdivision,
/// compared with the truncated target at `q = exp(2 pi i tau)`.
pub fn limit_series(rt0: &RhomboidTorus, levels: usize, spin: SpinChoice, target: LimitTarget) -> Result<Vec<LimitRow>> {
    let q = Nome::from_tau(rt0.tau)?;
    let mut n_trunc = cft::truncation_for(&q, 1e-14);
    let mut t = cft::plimit_target(&q, spin.sign(), n_trunc);
    while t.tail_bound >= 1e-12 {
        n_trunc += 8;
        t = cft::plimit_target(&q, spin.sign(), n_trunc);
    }
    let target_value = match target {
        LimitTarget::Square => t.value,
        LimitTarget::FourthPower => t.value * t.value,
    };
    let mut rows = Vec::with_capacity(levels + 1);
    let mut rt = rt0.clone();
    for level in 0..=levels {
        let roots = antiperiodic_roots(&rt)?;
        let reg = regularized_over(&rt, &roots.roots, spin)?;
        let un = unregularized_over(&rt, &roots.roots, spin)?;
        let abs_error = (reg - target_value).norm();
        rows.push(LimitRow {
            level,
            n: rt.n(),
            m: rt.m(),
            regularized: reg,
            target: target_value,
            abs_error,
            rel_error: abs_error / target_value.norm(),
            unregularized_log_magnitude: un.log_magnitude,
        });
        if level < levels {
            rt = subdivide(&rt);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i() -> C {
        C::new(0.0, 1.0)
    }

    fn instance_32_3() -> RhomboidTorus {
        RhomboidTorus::parallelogram(vec![C::new(0.25, 0.0); 4], vec![i() / 2.0; 2], i()).unwrap()
    }

    #[test]
    fn smallest_torus_counts() {
        let rt = RhomboidTorus::parallelogram(vec![C::new(0.5, 0.0); 2], vec![i() / 2.0; 2], i()).unwrap();
        assert!(rt.is_isoradial());
        assert_eq!(incidences(&rt).len(), 4);
        let tk = build_torus(&rt, SpinChoice::Plus).unwrap();
        assert_eq!(tk.matrix().shape(), (1, 1));
    }

    #[test]
    fn full_matrix_is_antisymmetric() {
        let rt = RhomboidTorus::random_isoradial(3, 3, C::new(0.2, 1.1), 7).unwrap();
        for s in SpinChoice::BOTH {
            let f = build_torus(&rt, s).unwrap().full();
            assert!((&f + f.transpose()).norm() < 1e-14);
        }
    }

    #[test]
    fn weights_match_circumcenters() {
        for seed in 0..5 {
            let rt = RhomboidTorus::random_isoradial(2, 2, C::new(-0.3, 1.0), seed).unwrap();
            assert!(circumcenter_check(&rt) < 1e-9);
        }
    }

    #[test]
    fn exponential_examples() {
        let rt = instance_32_3();
        let z = C::new(0.3, -0.7);
        assert_eq!(kenyon_exponential(&rt, 0, 0, z).unwrap(), ONE);
        let h = (ONE + z / 4.0) / (ONE - z / 4.0);
        assert!((f_one(&rt, z).unwrap() - h * h).norm() < 1e-14);
        let t = (ONE + z * i() / 2.0) / (ONE - z * i() / 2.0);
        assert!((f_tau(&rt, z).unwrap() - t).norm() < 1e-14);
    }

    #[test]
    fn roots_of_equal_steps() {
        let r = antiperiodic_roots(&instance_32_3()).unwrap();
        assert_eq!(r.roots.len(), 2);
        let mut im: Vec<f64> = r.roots.iter().map(|z| z.im).collect();
        im.sort_by(f64::total_cmp);
        assert!((im[0] + 4.0).abs() < 1e-12 && (im[1] - 4.0).abs() < 1e-12);
        assert!(r.roots.iter().all(|z| z.re.abs() < 1e-12));

        let one = RhomboidTorus::parallelogram(vec![C::new(0.5, 0.0); 2], vec![i() / 2.0; 2], i()).unwrap();
        let r = antiperiodic_roots(&one).unwrap();
        assert!(r.roots.is_empty() && r.degree_drop == 1 && r.is_degenerate());
        assert_eq!(trace_product(&one, SpinChoice::Plus).unwrap(), C::new(2.0, 0.0));
    }

    #[test]
    fn generic_roots_have_small_residual() {
        for seed in 0..10 {
            let rt = RhomboidTorus::random_isoradial(3, 2, i(), seed).unwrap();
            let r = antiperiodic_roots(&rt).unwrap();
            assert_eq!(r.roots.len(), 3);
            assert!(r.max_residual < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn trace_product_by_hand() {
        let rt = instance_32_3();
        let t = trace_product(&rt, SpinChoice::Plus).unwrap();
        assert!((t - C::new(32.0 / 3.0, 0.0)).norm() < 1e-12);
        let u = trace_product(&rt, SpinChoice::Minus).unwrap();
        // (1 + f)(1 + f') with f = -1/3, f' = -3
        assert!((u - C::new(2.0 * (2.0 / 3.0) * -2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gauge_identity_and_mechanism() {
        for seed in 0..6 {
            let rt = RhomboidTorus::random_isoradial(2, 2, C::new(0.1, 0.9), seed).unwrap();
            let r = verify_trace(&rt).unwrap();
            assert!(r.gauge_residual < 1e-9, "{r:?}");
            assert!(r.mechanism_residual.iter().all(|&x| x < 1e-9), "{r:?}");
            for t in 0..2 {
                assert!((r.det_full[t] - r.det_k[t] * r.det_k[t]).norm() < 1e-9 * r.det_full[t].norm());
                assert!((r.pfaffian[t] * r.pfaffian[t] - r.det_full[t]).norm() < 1e-9 * r.det_full[t].norm());
            }
        }
    }

    #[test]
    fn rotation_keeps_determinant_modulus() {
        let rt = RhomboidTorus::random_isoradial(2, 2, i(), 3).unwrap();
        let rot = rt.map_steps(|x| x * C::from_polar(1.0, 0.7));
        for s in SpinChoice::BOTH {
            let a = build_torus(&rt, s).unwrap().matrix().clone().lu().determinant();
            let b = build_torus(&rot, s).unwrap().matrix().clone().lu().determinant();
            assert!((a.norm() - b.norm()).abs() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn regularization_examples() {
        let rt = instance_32_3();
        let p = regularized_pf(&rt, SpinChoice::Plus).unwrap();
        assert!((p - C::new(16.0 / 9.0, 0.0)).norm() < 1e-12);
        let u = unregularized_product(&rt, SpinChoice::Plus).unwrap();
        assert!(u.ratio.norm().is_finite() && (u.ratio.norm() - 1.0).abs() > 1e-3);
        // ratio: only the root below the axis changes
        let f = |z: C| f_tau(&rt, z).unwrap();
        let expect = (ONE - f(C::new(0.0, -4.0))) / (ONE - f(C::new(0.0, 4.0)));
        assert!((u.ratio - expect).norm() < 1e-12);
    }

    #[test]
    fn subdivision_preserves_sums() {
        let rt = RhomboidTorus::parallelogram(vec![C::new(0.5, 0.0); 2], vec![i() / 2.0; 2], i()).unwrap();
        let s = subdivide(&rt);
        assert_eq!(s.a(), &[C::new(0.25, 0.0); 4]);
        assert_eq!(s.a().iter().sum::<C>(), ONE);
        assert_eq!(s.b().iter().sum::<C>(), i());
        assert_eq!(s.n() * s.m(), 4 * rt.n() * rt.m());
    }

    #[test]
    fn aberth_agrees_with_companion() {
        let rt = RhomboidTorus::random_isoradial(5, 5, C::new(0.2, 1.0), 11).unwrap();
        let p: Vec<C> = {
            let mut p = vec![ONE];
            let mut q = vec![ONE];
            for j in 0..5 {
                p = poly_mul_linear(&p, rt.a[2 * j] * 10.0);
                q = poly_mul_linear(&q, -rt.a[2 * j + 1] * 10.0);
            }
            p.iter().zip(&q).map(|(x, y)| x + y).collect()
        };
        let mut a: Vec<C> = aberth(&p).into_iter().map(|z| polish(&p, z)).collect();
        let mut b = companion_eigenvalues(&p).unwrap();
        for v in [&mut a, &mut b] {
            v.sort_by(|x, y| x.im.total_cmp(&y.im));
        }
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8, "{a:?} {b:?}");
        }
    }

    #[test]
    fn deep_subdivision_roots() {
        let rt = RhomboidTorus::equal_step(32, i()).unwrap();
        let r = antiperiodic_roots(&rt).unwrap();
        assert_eq!(r.roots.len(), 32);
        assert!(r.max_residual < 1e-10, "{}", r.max_residual);
    }

    #[test]
    fn equal_step_is_isoradial() {
        for tau in [i(), 2.0 * i(), C::new(0.5, 1.0)] {
            let rt = RhomboidTorus::equal_step(4, tau).unwrap();
            assert!(rt.is_isoradial());
            assert!(circumcenter_check(&rt) < 1e-9);
        }
    }
}

//! Truncated q-products and lattice sums used as reference values for the
//! critical torus limit: eta products, fermionic partition functions in
//! both chiral and non-chiral form, and the d = 2 boson-fermion check.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// The nome `q = exp(2 pi i tau)`, stored with a logarithm so that
/// fractional powers use a fixed branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nome {
    q: Complex64,
    log_q: Option<Complex64>,
}

impl Nome {
    pub fn from_tau(tau: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() {
            return Err(Error::Validation(format!("tau must have positive imaginary part, got {tau}")));
        }
        let log_q = Complex64::new(0.0, 2.0 * PI) * tau;
        Ok(Nome { q: log_q.exp(), log_q: Some(log_q) })
    }

    /// Principal branch of `log q` for fractional powers; `q = 0` is allowed.
    pub fn from_q(q: Complex64) -> Result<Self> {
        if !(q.norm() < 1.0) {
            return Err(Error::Validation(format!("nome must satisfy |q| < 1, got {q}")));
        }
        let log_q = if q == Complex64::new(0.0, 0.0) { None } else { Some(q.ln()) };
        Ok(Nome { q, log_q })
    }

    pub fn q(&self) -> Complex64 {
        self.q
    }

    pub fn abs(&self) -> f64 {
        self.q.norm()
    }

    /// `tau` on the branch used for fractional powers, if `q != 0`.
    pub fn tau(&self) -> Option<Complex64> {
        self.log_q.map(|l| l / Complex64::new(0.0, 2.0 * PI))
    }

    /// The conjugate nome `q-bar`, with the conjugate branch.
    pub fn conj(&self) -> Self {
        Nome { q: self.q.conj(), log_q: self.log_q.map(|l| l.conj()) }
    }

    /// `q^x` for real `x >= 0`.
    pub fn pow(&self, x: f64) -> Complex64 {
        match self.log_q {
            Some(l) => (l * x).exp(),
            None if x == 0.0 => Complex64::new(1.0, 0.0),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// A truncated product or sum with an upper bound on the neglected part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncated {
    pub value: Complex64,
    pub tail_bound: f64,
}

impl Truncated {
    fn exact(value: Complex64) -> Self {
        Truncated { value, tail_bound: 0.0 }
    }

    fn mul(self, other: Truncated) -> Truncated {
        let (a, b) = (self.value.norm(), other.value.norm());
        let bound = a * other.tail_bound + b * self.tail_bound + self.tail_bound * other.tail_bound;
        Truncated { value: self.value * other.value, tail_bound: bound }
    }

    fn scale(self, c: Complex64) -> Truncated {
        Truncated { value: self.value * c, tail_bound: self.tail_bound * c.norm() }
    }
}

/// `prod_{n=start}^{last} (1 + sign q^(n + shift))^power` with the bound
/// `|P| (exp(s) - 1)`, `s` the sum of the neglected `|x_n|`.
fn q_product(q: &Nome, sign: f64, shift: f64, start: u32, last: u32, power: u32) -> Truncated {
    let mut value = Complex64::new(1.0, 0.0);
    for n in start..=last {
        let f = Complex64::new(1.0, 0.0) + q.pow(n as f64 + shift) * sign;
        value *= f.powu(power);
    }
    let r = q.abs();
    let tail = if r == 0.0 { 0.0 } else { power as f64 * r.powf(last as f64 + 1.0 + shift) / (1.0 - r) };
    Truncated { value, tail_bound: value.norm() * tail.exp_m1() }
}

/// `prod_{n=1}^{N} (1 - q^n)`.
pub fn eta_factor(q: &Nome, n: u32) -> Truncated {
    if n == 0 {
        let r = q.abs();
        return Truncated { value: Complex64::new(1.0, 0.0), tail_bound: (r / (1.0 - r)).exp_m1() };
    }
    q_product(q, -1.0, 0.0, 1, n, 1)
}

/// Smallest `N` for which the geometric tail `|q|^(N+1) / (1 - |q|)` is
/// below `tol`.
pub fn truncation_for(q: &Nome, tol: f64) -> u32 {
    let r = q.abs();
    if r == 0.0 {
        return 1;
    }
    let mut n = 1u32;
    while r.powi(n as i32 + 1) / (1.0 - r) >= tol && n < 100_000 {
        n += 1;
    }
    n
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sector {
    NS,
    R,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::NS => "NS",
            Sector::R => "R",
        })
    }
}

/// Spin structure on the torus: the sector along the space circle and
/// along the time circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinPair {
    pub space: Sector,
    pub time: Sector,
}

impl SpinPair {
    pub const ALL: [SpinPair; 4] = [
        SpinPair { space: Sector::NS, time: Sector::R },
        SpinPair { space: Sector::NS, time: Sector::NS },
        SpinPair { space: Sector::R, time: Sector::NS },
        SpinPair { space: Sector::R, time: Sector::R },
    ];
}

impl fmt::Display for SpinPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.space, self.time)
    }
}

impl FromStr for SpinPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| match t.to_ascii_uppercase().as_str() {
            "NS" => Ok(Sector::NS),
            "R" => Ok(Sector::R),
            _ => Err(Error::Parse(format!("unknown sector {t:?}"))),
        };
        let (a, b) = s
            .split_once(['-', ',', '/'])
            .ok_or_else(|| Error::Parse(format!("spin pair {s:?} should look like NS-R")))?;
        Ok(SpinPair { space: parse(a.trim())?, time: parse(b.trim())? })
    }
}

/// One chirality of a `d`-dimensional free fermion, `N` the last mode index.
fn chiral_factor(q: &Nome, pair: SpinPair, d: u32, n: u32) -> Truncated {
    match (pair.space, pair.time) {
        (Sector::NS, Sector::R) => q_product(q, 1.0, 0.5, 0, n, d),
        (Sector::NS, Sector::NS) => q_product(q, -1.0, 0.5, 0, n, d),
        (Sector::R, Sector::NS) => q_product(q, 1.0, 0.0, 1, n.max(1), d),
        (Sector::R, Sector::R) => Truncated::exact(Complex64::new(0.0, 0.0)),
    }
}

/// Chiral partition function; `d` must be even.
pub fn chiral_fermionic_partition(q: &Nome, pair: SpinPair, d: u32, n: u32) -> Result<Truncated> {
    if d % 2 != 0 {
        return Err(Error::Validation(format!("chiral fermion needs even dimension, got {d}")));
    }
    let t = chiral_factor(q, pair, d, n);
    Ok(match (pair.space, pair.time) {
        (Sector::R, Sector::NS) => t.scale(Complex64::new(2f64.powi(d as i32 / 2), 0.0)),
        _ => t,
    })
}

/// Both chiralities, with `q` and `q-bar` independent.
pub fn fermionic_partition(q: &Nome, qbar: &Nome, pair: SpinPair, d: u32, n: u32) -> Truncated {
    let t = chiral_factor(q, pair, d, n).mul(chiral_factor(qbar, pair, d, n));
    match (pair.space, pair.time) {
        (Sector::R, Sector::NS) => t.scale(Complex64::new(2f64.powi(d as i32), 0.0)),
        _ => t,
    }
}

/// The chiral lattice sector `lambda` in {0, 1/2, 1, 3/2} for the lattice
/// `2Z`: `sum_k q^((2k + lambda)^2 / 2) / prod_{n>0} (1 - q^n)`.
pub fn lattice_chiral(q: &Nome, lambda: f64, n: u32) -> Result<Truncated> {
    if ![0.0, 0.5, 1.0, 1.5].contains(&lambda) {
        return Err(Error::Validation(format!("lattice label must be one of 0, 1/2, 1, 3/2, got {lambda}")));
    }
    let kmax = n as i64;
    let mut s = Complex64::new(0.0, 0.0);
    for k in -kmax..=kmax {
        let x = 2.0 * k as f64 + lambda;
        s += q.pow(0.5 * x * x);
    }
    let r = q.abs();
    let x0 = 2.0 * n as f64 + 0.5;
    let s_tail = if r == 0.0 { 0.0 } else { 2.0 * r.powf(0.5 * x0 * x0) / (1.0 - r) };
    let p = eta_factor(q, n);
    let p_rel = p.tail_bound / p.value.norm();
    if p_rel >= 1.0 {
        return Err(Error::Numerical("eta truncation too short for the lattice sum".into()));
    }
    let value = s / p.value;
    let bound = (s.norm() * p_rel + s_tail) / ((1.0 - p_rel) * p.value.norm());
    Ok(Truncated { value, tail_bound: bound })
}

/// Comparison of the fermionic and bosonic forms of the `d = 2` partition
/// function, both for the first two sectors and for the totals.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleProductReport {
    pub fermionic: Complex64,
    pub bosonic: Complex64,
    pub residual: f64,
    pub fermionic_total: Complex64,
    pub bosonic_total: Complex64,
    pub total_residual: f64,
}

impl TripleProductReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.residual < tol && self.total_residual < tol
    }
}

/// Evaluates both sides at `q` and `q-bar = conj(q)`.
pub fn triple_product_check(q: &Nome, n: u32) -> Result<TripleProductReport> {
    let qb = q.conj();
    let half = Complex64::new(0.5, 0.0);
    let ns_r = fermionic_partition(q, &qb, SpinPair::ALL[0], 2, n).value;
    let ns_ns = fermionic_partition(q, &qb, SpinPair::ALL[1], 2, n).value;
    let r_ns = fermionic_partition(q, &qb, SpinPair::ALL[2], 2, n).value * q.pow(0.125) * qb.pow(0.125);
    let fermionic = half * (ns_r + ns_ns);
    let fermionic_total = half * (ns_r + ns_ns + r_ns);

    let z = |lambda: f64| -> Result<Complex64> {
        Ok(lattice_chiral(q, lambda, n)?.value * lattice_chiral(&qb, lambda, n)?.value)
    };
    let bosonic = z(0.0)? + z(1.0)?;
    let bosonic_total = bosonic + z(0.5)? + z(1.5)?;
    let rel = |a: Complex64, b: Complex64| (a - b).norm() / b.norm().max(1.0);
    Ok(TripleProductReport {
        fermionic,
        bosonic,
        residual: rel(fermionic, bosonic),
        fermionic_total,
        bosonic_total,
        total_residual: rel(fermionic_total, bosonic_total),
    })
}

/// `prod_{j=0}^{N} (1 - spin q^(j + 1/2))^2`.
pub fn plimit_target(q: &Nome, spin: f64, n: u32) -> Truncated {
    q_product(q, -spin, 0.5, 0, n, 2)
}

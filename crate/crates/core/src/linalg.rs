//! Exact linear solves over the rationals and over GF(2).

use num_traits::{One, Zero};

use crate::poly::Rational;

/// Solves `a x = b` exactly. Free variables are set to zero.
/// Returns `None` when the system is inconsistent.
pub fn solve_rational(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        b.swap(r, p);
        let inv = Rational::one() / a[r][c];
        for x in a[r].iter_mut() {
            *x *= inv;
        }
        b[r] *= inv;
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c];
                for j in 0..cols {
                    let t = a[r][j] * f;
                    a[i][j] -= t;
                }
                let t = b[r] * f;
                b[i] -= t;
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    if b[r..].iter().any(|x| !x.is_zero()) {
        return None;
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = b[i];
    }
    Some(x)
}

/// Incremental Gaussian elimination over GF(2).
#[derive(Clone, Debug)]
pub struct Gf2System {
    unknowns: usize,
    // Reduced rows keyed by pivot column.
    rows: Vec<(usize, Vec<u64>, bool)>,
}

impl Gf2System {
    pub fn new(unknowns: usize) -> Self {
        Gf2System { unknowns, rows: Vec::new() }
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn words(&self) -> usize {
        self.unknowns.div_ceil(64)
    }

    pub fn row_from_indices<I: IntoIterator<Item = usize>>(&self, it: I) -> Vec<u64> {
        let mut row = vec![0u64; self.words()];
        for i in it {
            row[i / 64] ^= 1 << (i % 64);
        }
        row
    }

    /// Adds `sum_{i in row} x_i = rhs`. Returns `false` if it contradicts
    /// the equations already present.
    pub fn add(&mut self, mut row: Vec<u64>, mut rhs: bool) -> bool {
        for (p, r, b) in &self.rows {
            if row[p / 64] >> (p % 64) & 1 == 1 {
                for (x, y) in row.iter_mut().zip(r) {
                    *x ^= y;
                }
                rhs ^= b;
            }
        }
        let Some(p) = (0..self.unknowns).find(|&i| row[i / 64] >> (i % 64) & 1 == 1) else {
            return !rhs;
        };
        for (_, r, b) in self.rows.iter_mut() {
            if r[p / 64] >> (p % 64) & 1 == 1 {
                for (x, y) in r.iter_mut().zip(&row) {
                    *x ^= y;
                }
                *b ^= rhs;
            }
        }
        self.rows.push((p, row, rhs));
        true
    }

    /// A solution with all free variables zero.
    pub fn solution(&self) -> Vec<bool> {
        let mut x = vec![false; self.unknowns];
        for (p, _, b) in &self.rows {
            x[*p] = *b;
        }
        x
    }
}

//! Exact integer linear algebra: Smith and Hermite normal forms, column
//! lattices and their quotient invariants.
//!
//! All arithmetic is arbitrary precision.  Lattices are kept in column
//! convention: a matrix stands for the sublattice of `ℤ^rows` spanned by
//! its columns.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Dense matrix over `ℤ`, row major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> BigInt) -> Self {
        let mut m = IntMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows_i64(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        IntMat::from_fn(r, c, |i, j| BigInt::from(rows[i][j]))
    }

    pub fn from_columns(cols: &[Vec<BigInt>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, |x| x.len());
        assert!(cols.iter().all(|x| x.len() == r), "ragged columns");
        IntMat::from_fn(r, c, |i, j| cols[j][i].clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<BigInt>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> IntMat {
        IntMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.rows, other.rows, "hcat row mismatch");
        IntMat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows, "mul dimension mismatch");
        let mut out = IntMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self[(i, k)].is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = &self[(i, k)] * &other[(k, j)];
                    out[(i, j)] += t;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| &self[(i, j)] * &v[j]).sum())
            .collect()
    }

    pub fn select_columns(&self, js: &[usize]) -> IntMat {
        IntMat::from_fn(self.rows, js.len(), |i, j| self[(i, js[j])].clone())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            let (x, y) = (self[(a, j)].clone(), self[(b, j)].clone());
            self[(a, j)] = y;
            self[(b, j)] = x;
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            let (x, y) = (self[(i, a)].clone(), self[(i, b)].clone());
            self[(i, a)] = y;
            self[(i, b)] = x;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let v = -self[(r, j)].clone();
            self[(r, j)] = v;
        }
    }

    /// row[dst] -= q * row[src]
    fn row_sub_mul(&mut self, dst: usize, src: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let t = q * &self[(src, j)];
            self[(dst, j)] -= t;
        }
    }

    /// col[dst] -= q * col[src]
    fn col_sub_mul(&mut self, dst: usize, src: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let t = q * &self[(i, src)];
            self[(i, dst)] -= t;
        }
    }

    fn row_add(&mut self, dst: usize, src: usize) {
        for j in 0..self.cols {
            let t = self[(src, j)].clone();
            self[(dst, j)] += t;
        }
    }
}

impl Index<(usize, usize)> for IntMat {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Result of a Smith normal form computation: `d = u · a · v` with `u`,
/// `v` unimodular and `d` diagonal with a divisibility chain.
pub struct Snf {
    pub d: IntMat,
    pub u: IntMat,
    pub v: IntMat,
}

impl Snf {
    /// Nonzero diagonal entries `d₁ | d₂ | …`.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        let n = self.d.rows().min(self.d.cols());
        (0..n)
            .map(|i| self.d[(i, i)].clone())
            .filter(|x| !x.is_zero())
            .collect()
    }
}

/// Smallest nonzero entry by absolute value in the trailing submatrix,
/// row-then-column tie-break.
fn pivot(a: &IntMat, k: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in k..a.rows() {
        for j in k..a.cols() {
            if a[(i, j)].is_zero() {
                continue;
            }
            match best {
                None => best = Some((i, j)),
                Some(b) => {
                    if a[(i, j)].abs() < a[(b.0, b.1)].abs() {
                        best = Some((i, j));
                    }
                }
            }
        }
    }
    best
}

/// Smith normal form over `ℤ`.
pub fn smith_normal_form(a: &IntMat) -> Snf {
    let (m, n) = (a.rows(), a.cols());
    let mut d = a.clone();
    let mut u = IntMat::identity(m);
    let mut v = IntMat::identity(n);
    let mut k = 0;
    while k < m.min(n) {
        let Some((pi, pj)) = pivot(&d, k) else { break };
        d.swap_rows(k, pi);
        u.swap_rows(k, pi);
        d.swap_cols(k, pj);
        v.swap_cols(k, pj);
        loop {
            for i in 0..m {
                if i != k && !d[(i, k)].is_zero() {
                    let q = &d[(i, k)] / &d[(k, k)];
                    d.row_sub_mul(i, k, &q);
                    u.row_sub_mul(i, k, &q);
                }
            }
            for j in 0..n {
                if j != k && !d[(k, j)].is_zero() {
                    let q = &d[(k, j)] / &d[(k, k)];
                    d.col_sub_mul(j, k, &q);
                    v.col_sub_mul(j, k, &q);
                }
            }
            let col_clear = (0..m).all(|i| i == k || d[(i, k)].is_zero());
            let row_clear = (0..n).all(|j| j == k || d[(k, j)].is_zero());
            if !(col_clear && row_clear) {
                let (pi, pj) = pivot(&d, k).expect("nonzero remains");
                d.swap_rows(k, pi);
                u.swap_rows(k, pi);
                d.swap_cols(k, pj);
                v.swap_cols(k, pj);
                continue;
            }
            // divisibility: the pivot must divide the whole trailing block
            let mut bad = None;
            'scan: for i in k + 1..m {
                for j in k + 1..n {
                    if !(&d[(i, j)] % &d[(k, k)]).is_zero() {
                        bad = Some(i);
                        break 'scan;
                    }
                }
            }
            match bad {
                Some(i) => {
                    d.row_add(k, i);
                    u.row_add(k, i);
                }
                None => break,
            }
        }
        if d[(k, k)].is_negative() {
            d.negate_row(k);
            u.negate_row(k);
        }
        k += 1;
    }
    Snf { d, u, v }
}

/// Row-style Hermite normal form; the returned matrix has the same row
/// space as the input, zero rows dropped, pivots positive, entries above
/// each pivot reduced into `[0, pivot)`.  Canonical for the row lattice.
pub fn row_hermite(a: &IntMat) -> IntMat {
    let (m, n) = (a.rows(), a.cols());
    let mut h = a.clone();
    let mut r = 0;
    for j in 0..n {
        if r >= m {
            break;
        }
        // gcd out column j below row r
        loop {
            let mut piv: Option<usize> = None;
            for i in r..m {
                if h[(i, j)].is_zero() {
                    continue;
                }
                match piv {
                    None => piv = Some(i),
                    Some(p) => {
                        if h[(i, j)].abs() < h[(p, j)].abs() {
                            piv = Some(i);
                        }
                    }
                }
            }
            let Some(p) = piv else { break };
            h.swap_rows(r, p);
            let mut again = false;
            for i in r + 1..m {
                if !h[(i, j)].is_zero() {
                    let q = &h[(i, j)] / &h[(r, j)];
                    h.row_sub_mul(i, r, &q);
                    if !h[(i, j)].is_zero() {
                        again = true;
                    }
                }
            }
            if !again {
                break;
            }
        }
        if h[(r, j)].is_zero() {
            continue;
        }
        if h[(r, j)].is_negative() {
            h.negate_row(r);
        }
        for i in 0..r {
            let q = h[(i, j)].div_floor(&h[(r, j)]);
            h.row_sub_mul(i, r, &q);
        }
        r += 1;
    }
    IntMat::from_fn(r, n, |i, j| h[(i, j)].clone())
}

/// Canonical basis of the column lattice spanned by the columns of `a`
/// (columns of the result, pivot rows increasing).
pub fn col_lattice_basis(a: &IntMat) -> IntMat {
    row_hermite(&a.transpose()).transpose()
}

/// Integer kernel of `a` (columns `z` with `a·z = 0`), as a basis matrix.
pub fn col_kernel(a: &IntMat) -> IntMat {
    let snf = smith_normal_form(a);
    let r = a.rows().min(a.cols());
    let mut free = Vec::new();
    for j in 0..a.cols() {
        if j >= r || snf.d[(j, j)].is_zero() {
            free.push(j);
        }
    }
    snf.v.select_columns(&free)
}

/// One integer solution of `a·x = b`, if any.
pub fn solve_linear(a: &IntMat, b: &[BigInt]) -> Option<Vec<BigInt>> {
    assert_eq!(a.rows(), b.len(), "solve_linear dimension mismatch");
    let snf = smith_normal_form(a);
    let ub = snf.u.mul_vec(b);
    let mut y = vec![BigInt::zero(); a.cols()];
    let r = a.rows().min(a.cols());
    for i in 0..a.rows() {
        if i < r && !snf.d[(i, i)].is_zero() {
            let (q, rem) = ub[i].div_rem(&snf.d[(i, i)]);
            if !rem.is_zero() {
                return None;
            }
            y[i] = q;
        } else if !ub[i].is_zero() {
            return None;
        }
    }
    Some(snf.v.mul_vec(&y))
}

/// Does `t` lie in the column lattice of `basis`?
pub fn in_col_lattice(basis: &IntMat, t: &[BigInt]) -> bool {
    solve_linear(basis, t).is_some()
}

/// Invariants of a finitely generated abelian group presented as
/// `ℤ^rank / (column lattice)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbInvariants {
    pub free_rank: usize,
    /// Invariant factors `> 1`, divisibility chain.
    pub torsion: Vec<BigInt>,
}

impl AbInvariants {
    pub fn trivial() -> Self {
        AbInvariants {
            free_rank: 0,
            torsion: Vec::new(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.free_rank == 0
    }

    /// Order when finite.
    pub fn order(&self) -> Option<BigInt> {
        if self.free_rank > 0 {
            return None;
        }
        Some(self.torsion.iter().product::<BigInt>().max(BigInt::one()))
    }
}

impl fmt::Display for AbInvariants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for t in &self.torsion {
            parts.push(format!("Z/{t}"));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Invariants of `ℤ^rows / (column lattice of a)`.
pub fn cokernel_invariants(a: &IntMat) -> AbInvariants {
    let snf = smith_normal_form(a);
    let factors = snf.invariant_factors();
    AbInvariants {
        free_rank: a.rows() - factors.len(),
        torsion: factors.into_iter().filter(|d| !d.is_one()).collect(),
    }
}

/// Invariants of the quotient `sup / sub` of two column lattices with
/// `sub ⊆ sup`; errors if the inclusion fails.
pub fn lattice_quotient(sup: &IntMat, sub: &IntMat) -> Result<AbInvariants> {
    assert_eq!(sup.rows(), sub.rows(), "lattice ambient mismatch");
    let basis = col_lattice_basis(sup);
    let mut coeff_cols = Vec::new();
    for j in 0..sub.cols() {
        let col = sub.column(j);
        let x = solve_linear(&basis, &col).ok_or_else(|| {
            Error::Internal("lattice_quotient: sub is not contained in sup".into())
        })?;
        coeff_cols.push(x);
    }
    let coeff = if coeff_cols.is_empty() {
        IntMat::zeros(basis.cols(), 0)
    } else {
        IntMat::from_columns(&coeff_cols)
    };
    Ok(cokernel_invariants(&coeff))
}

/// Exact rank over `ℚ` (equals the number of nonzero invariant factors).
pub fn rank(a: &IntMat) -> usize {
    if a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    smith_normal_form(a).invariant_factors().len()
}

/// `true` when the square matrix has determinant `±1`.
pub fn is_unimodular(a: &IntMat) -> bool {
    a.rows() == a.cols() && {
        let snf = smith_normal_form(a);
        let f = snf.invariant_factors();
        f.len() == a.rows() && f.iter().all(|d| d.is_one())
    }
}

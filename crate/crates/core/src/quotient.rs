//! Computable quotient targets: finite groups given by multiplication
//! tables, finitely generated abelian groups via integer presentations,
//! and free class-2 nilpotent groups.  Quotient maps evaluate words and
//! tuples, decide surjectivity and compute image indices.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::{
    cokernel_invariants, col_lattice_basis, AbInvariants, IntMat,
};
use crate::product::ProductGroup;
use crate::word::Word;

/// Largest admissible multiplication-table group.
pub const MAX_FINITE_ORDER: usize = 2000;

// ---------------------------------------------------------------------------
// finite groups
// ---------------------------------------------------------------------------

/// A finite group as an explicit multiplication table.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    mul: Vec<Vec<usize>>,
    inv: Vec<usize>,
    identity: usize,
    gens: Vec<usize>,
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteGroup(order {})", self.order())
    }
}

impl FiniteGroup {
    /// Validate and wrap an explicit table.  `table[i][j]` is `i·j`.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<FiniteGroup> {
        let n = table.len();
        if n == 0 {
            return Err(Error::Empty("finite group table"));
        }
        if n > MAX_FINITE_ORDER {
            return Err(Error::Limit(format!(
                "finite group order {n} exceeds cap {MAX_FINITE_ORDER}"
            )));
        }
        for row in &table {
            if row.len() != n || row.iter().any(|&x| x >= n) {
                return Err(Error::Parse("malformed multiplication table".into()));
            }
        }
        // rows and columns must be permutations
        for i in 0..n {
            let mut seen_r = vec![false; n];
            let mut seen_c = vec![false; n];
            for j in 0..n {
                if seen_r[table[i][j]] || seen_c[table[j][i]] {
                    return Err(Error::Parse("table is not a quasigroup".into()));
                }
                seen_r[table[i][j]] = true;
                seen_c[table[j][i]] = true;
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or_else(|| Error::Parse("table has no identity".into()))?;
        let mut inv = vec![usize::MAX; n];
        for x in 0..n {
            inv[x] = (0..n)
                .find(|&y| table[x][y] == identity && table[y][x] == identity)
                .ok_or_else(|| Error::Parse("table element without inverse".into()))?;
        }
        // associativity: exhaustive at small orders, strided sample above
        let check = |a: usize, b: usize, c: usize| -> bool {
            table[table[a][b]][c] == table[a][table[b][c]]
        };
        if n <= 128 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if !check(a, b, c) {
                            return Err(Error::Parse("table is not associative".into()));
                        }
                    }
                }
            }
        } else {
            let step = (n / 16).max(1);
            for a in (0..n).step_by(step) {
                for b in (0..n).step_by(step) {
                    for c in (0..n).step_by(step) {
                        if !check(a, b, c) {
                            return Err(Error::Parse("table is not associative".into()));
                        }
                    }
                }
            }
        }
        let gens = (0..n).collect();
        Ok(FiniteGroup {
            mul: table,
            inv,
            identity,
            gens,
        })
    }

    /// Closure of permutations of `0..degree` under composition; element
    /// 0 is the identity and the breadth-first discovery order is the
    /// canonical numbering.
    pub fn from_permutations(degree: usize, perms: &[Vec<usize>]) -> Result<FiniteGroup> {
        for p in perms {
            if p.len() != degree {
                return Err(Error::Arity("permutation degree mismatch".into()));
            }
            let mut seen = vec![false; degree];
            for &x in p {
                if x >= degree || seen[x] {
                    return Err(Error::Parse("not a permutation".into()));
                }
                seen[x] = true;
            }
        }
        let id: Vec<usize> = (0..degree).collect();
        let mut elements: Vec<Vec<usize>> = vec![id];
        let mut index: std::collections::HashMap<Vec<usize>, usize> =
            std::collections::HashMap::new();
        index.insert(elements[0].clone(), 0);
        let mut head = 0;
        while head < elements.len() {
            let cur = elements[head].clone();
            head += 1;
            for p in perms {
                // right multiplication: (cur · p)(x) = cur(p(x))
                let next: Vec<usize> = (0..degree).map(|x| cur[p[x]]).collect();
                if !index.contains_key(&next) {
                    if elements.len() >= MAX_FINITE_ORDER {
                        return Err(Error::Limit(format!(
                            "permutation closure exceeds cap {MAX_FINITE_ORDER}"
                        )));
                    }
                    index.insert(next.clone(), elements.len());
                    elements.push(next);
                }
            }
        }
        let n = elements.len();
        let mut mul = vec![vec![0usize; n]; n];
        for i in 0..n {
            for j in 0..n {
                let prod: Vec<usize> = (0..degree).map(|x| elements[i][elements[j][x]]).collect();
                mul[i][j] = index[&prod];
            }
        }
        let mut g = FiniteGroup::from_table(mul)?;
        g.gens = perms.iter().filter_map(|p| index.get(p).copied()).collect();
        if g.gens.is_empty() {
            g.gens = vec![g.identity];
        }
        Ok(g)
    }

    pub fn trivial() -> FiniteGroup {
        FiniteGroup::from_table(vec![vec![0]]).expect("trivial table")
    }

    pub fn cyclic(n: usize) -> Result<FiniteGroup> {
        if n == 0 {
            return Err(Error::Empty("cyclic group order"));
        }
        let table = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
        let mut g = FiniteGroup::from_table(table)?;
        g.gens = if n == 1 { vec![0] } else { vec![1] };
        Ok(g)
    }

    pub fn symmetric(n: usize) -> Result<FiniteGroup> {
        if n == 0 || n == 1 {
            return Ok(FiniteGroup::trivial());
        }
        let mut cycle: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let mut swap: Vec<usize> = (0..n).collect();
        swap.swap(0, 1);
        if n == 2 {
            cycle = swap.clone();
        }
        FiniteGroup::from_permutations(n, &[swap, cycle])
    }

    /// Direct product with canonical pair numbering `(x, y) ↦ x·|B| + y`.
    pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> Result<FiniteGroup> {
        let (na, nb) = (a.order(), b.order());
        let n = na.checked_mul(nb).filter(|&n| n <= MAX_FINITE_ORDER).ok_or_else(|| {
            Error::Limit(format!("product order exceeds cap {MAX_FINITE_ORDER}"))
        })?;
        let mut mul = vec![vec![0usize; n]; n];
        for xa in 0..na {
            for xb in 0..nb {
                for ya in 0..na {
                    for yb in 0..nb {
                        mul[xa * nb + xb][ya * nb + yb] = a.mul[xa][ya] * nb + b.mul[xb][yb];
                    }
                }
            }
        }
        FiniteGroup::from_table(mul)
    }

    pub fn order(&self) -> usize {
        self.mul.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn generators(&self) -> &[usize] {
        &self.gens
    }

    pub fn mul(&self, x: usize, y: usize) -> usize {
        self.mul[x][y]
    }

    pub fn inv(&self, x: usize) -> usize {
        self.inv[x]
    }

    pub fn commutator(&self, x: usize, y: usize) -> usize {
        let xy = self.mul(x, y);
        let xi = self.inv(x);
        let yi = self.inv(y);
        self.mul(self.mul(xy, xi), yi)
    }

    pub fn is_abelian(&self) -> bool {
        let n = self.order();
        (0..n).all(|x| (x..n).all(|y| self.mul[x][y] == self.mul[y][x]))
    }

    /// Subgroup generated by `seed`, as a sorted element list.
    pub fn closure(&self, seed: &[usize]) -> Vec<usize> {
        let mut in_set = vec![false; self.order()];
        in_set[self.identity] = true;
        let mut queue = vec![self.identity];
        for &s in seed {
            if !in_set[s] {
                in_set[s] = true;
                queue.push(s);
            }
        }
        let gens: Vec<usize> = seed.to_vec();
        let mut head = 0;
        while head < queue.len() {
            let x = queue[head];
            head += 1;
            for &g in &gens {
                for y in [self.mul(x, g), self.mul(x, self.inv(g))] {
                    if !in_set[y] {
                        in_set[y] = true;
                        queue.push(y);
                    }
                }
            }
        }
        let mut out: Vec<usize> = (0..self.order()).filter(|&x| in_set[x]).collect();
        out.sort_unstable();
        out
    }

    pub fn is_normal(&self, subgroup: &[usize]) -> bool {
        let in_set: std::collections::HashSet<usize> = subgroup.iter().copied().collect();
        (0..self.order()).all(|g| {
            subgroup
                .iter()
                .all(|&h| in_set.contains(&self.mul(self.mul(g, h), self.inv(g))))
        })
    }

    /// Quotient by a normal subgroup: the quotient group together with
    /// the element-to-coset map.
    pub fn quotient(&self, normal: &[usize]) -> Result<(FiniteGroup, Vec<usize>)> {
        if !self.is_normal(normal) {
            return Err(Error::Precondition("subgroup is not normal".into()));
        }
        let n = self.order();
        let in_n: std::collections::HashSet<usize> = normal.iter().copied().collect();
        let mut coset = vec![usize::MAX; n];
        let mut reps: Vec<usize> = Vec::new();
        for x in 0..n {
            if coset[x] != usize::MAX {
                continue;
            }
            let c = reps.len();
            reps.push(x);
            for &h in normal {
                coset[self.mul(x, h)] = c;
            }
            debug_assert!(in_n.is_empty() || coset[x] == c);
        }
        let q = reps.len();
        let mut mul = vec![vec![0usize; q]; q];
        for (i, &ri) in reps.iter().enumerate() {
            for (j, &rj) in reps.iter().enumerate() {
                mul[i][j] = coset[self.mul(ri, rj)];
            }
        }
        let qg = FiniteGroup::from_table(mul)?;
        Ok((qg, coset))
    }

    /// Derived subgroup `[G, G]`.
    pub fn derived_subgroup(&self) -> Vec<usize> {
        let n = self.order();
        let mut comms = Vec::new();
        for x in 0..n {
            for y in 0..n {
                comms.push(self.commutator(x, y));
            }
        }
        self.closure(&comms)
    }

    /// Longest abelian member of the derived series, falling back to the
    /// trivial subgroup when the series stabilises nonabelian.
    pub fn abelian_in_derived_series(&self) -> Vec<usize> {
        let mut current: Vec<usize> = (0..self.order()).collect();
        loop {
            if self.subgroup_is_abelian(&current) {
                return current;
            }
            let next = self.subgroup_derived(&current);
            if next == current {
                return vec![self.identity];
            }
            current = next;
        }
    }

    fn subgroup_is_abelian(&self, sub: &[usize]) -> bool {
        sub.iter()
            .all(|&x| sub.iter().all(|&y| self.mul(x, y) == self.mul(y, x)))
    }

    fn subgroup_derived(&self, sub: &[usize]) -> Vec<usize> {
        let mut comms = Vec::new();
        for &x in sub {
            for &y in sub {
                comms.push(self.commutator(x, y));
            }
        }
        self.closure(&comms)
    }

    /// Lower central class via commutator closure `γ_{i+1} = [G, γ_i]`.
    pub fn lower_central_class(&self) -> ClassResult {
        let mut gamma: Vec<usize> = (0..self.order()).collect();
        let mut class = 0u32;
        loop {
            if gamma.len() == 1 {
                return ClassResult::Class(class);
            }
            let mut comms = Vec::new();
            for x in 0..self.order() {
                for &y in &gamma {
                    comms.push(self.commutator(x, y));
                }
            }
            let next = self.closure(&comms);
            if next == gamma {
                return ClassResult::NotNilpotent;
            }
            gamma = next;
            class += 1;
        }
    }
}

/// Outcome of a nilpotency-class computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassResult {
    Class(u32),
    NotNilpotent,
}

impl fmt::Display for ClassResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassResult::Class(c) => write!(f, "{c}"),
            ClassResult::NotNilpotent => write!(f, "not nilpotent"),
        }
    }
}

// ---------------------------------------------------------------------------
// finitely generated abelian groups
// ---------------------------------------------------------------------------

/// `ℤ^gens` modulo the column lattice of a relation matrix.  Elements
/// are integer column vectors; two vectors are equal when their
/// difference lies in the relation lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbelianGroup {
    gens: usize,
    /// Canonical (Hermite) basis of the relation lattice, pivot rows increasing.
    rel_basis: IntMat,
    invariants: AbInvariants,
}

impl AbelianGroup {
    pub fn free(d: usize) -> AbelianGroup {
        AbelianGroup {
            gens: d,
            rel_basis: IntMat::zeros(d, 0),
            invariants: AbInvariants {
                free_rank: d,
                torsion: Vec::new(),
            },
        }
    }

    /// Relations given as columns of `rels` (each column one relator).
    pub fn from_relation_columns(gens: usize, rels: &IntMat) -> AbelianGroup {
        assert_eq!(rels.rows(), gens, "relation ambient mismatch");
        let rel_basis = col_lattice_basis(rels);
        let invariants = cokernel_invariants(rels);
        AbelianGroup {
            gens,
            rel_basis,
            invariants,
        }
    }

    /// Relations given as rows (the serialization convention).
    pub fn from_relation_rows(gens: usize, rows: &IntMat) -> AbelianGroup {
        Self::from_relation_columns(gens, &rows.transpose())
    }

    pub fn cyclic_mod(n: u64) -> AbelianGroup {
        let rel = IntMat::from_rows_i64(&[vec![n as i64]]);
        AbelianGroup::from_relation_columns(1, &rel)
    }

    pub fn gens(&self) -> usize {
        self.gens
    }

    pub fn relation_basis(&self) -> &IntMat {
        &self.rel_basis
    }

    pub fn invariants(&self) -> &AbInvariants {
        &self.invariants
    }

    pub fn is_trivial_group(&self) -> bool {
        self.invariants.is_trivial()
    }

    pub fn zero(&self) -> Vec<BigInt> {
        vec![BigInt::zero(); self.gens]
    }

    /// Canonical representative modulo the relation lattice.
    pub fn canonical(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.gens, "element length mismatch");
        let mut w = v.to_vec();
        for j in 0..self.rel_basis.cols() {
            let col = self.rel_basis.column(j);
            let p = col.iter().position(|x| !x.is_zero()).expect("nonzero basis column");
            let q = w[p].div_floor(&col[p]);
            if !q.is_zero() {
                for (wi, ci) in w.iter_mut().zip(col.iter()) {
                    *wi -= &q * ci;
                }
            }
        }
        w
    }

    pub fn eq_elements(&self, x: &[BigInt], y: &[BigInt]) -> bool {
        self.canonical(x) == self.canonical(y)
    }

    pub fn is_zero_element(&self, v: &[BigInt]) -> bool {
        self.canonical(v).iter().all(|x| x.is_zero())
    }

    pub fn add(&self, x: &[BigInt], y: &[BigInt]) -> Vec<BigInt> {
        x.iter().zip(y).map(|(a, b)| a + b).collect()
    }

    pub fn neg(&self, x: &[BigInt]) -> Vec<BigInt> {
        x.iter().map(|a| -a).collect()
    }

    /// Order of the subgroup generated by the given element vectors
    /// (the quotient of its lattice preimage by the relation lattice).
    pub fn subgroup_order(&self, elements: &[Vec<BigInt>]) -> IndexReport {
        let cols = if elements.is_empty() {
            IntMat::zeros(self.gens, 0)
        } else {
            IntMat::from_columns(elements)
        };
        let sup = cols.hcat(&self.rel_basis);
        match crate::linalg::lattice_quotient(&sup, &self.rel_basis) {
            Ok(inv) => {
                if inv.free_rank > 0 {
                    IndexReport::Infinite {
                        cokernel_free_rank: inv.free_rank,
                    }
                } else {
                    IndexReport::Finite(inv.order().expect("finite"))
                }
            }
            Err(e) => IndexReport::Unknown {
                reason: e.to_string(),
            },
        }
    }

    /// Index of the subgroup generated by the given element vectors.
    pub fn subgroup_index(&self, elements: &[Vec<BigInt>]) -> IndexReport {
        let cols = if elements.is_empty() {
            IntMat::zeros(self.gens, 0)
        } else {
            IntMat::from_columns(elements)
        };
        let combined = cols.hcat(&self.rel_basis);
        let inv = cokernel_invariants(&combined);
        if inv.free_rank > 0 {
            IndexReport::Infinite {
                cokernel_free_rank: inv.free_rank,
            }
        } else {
            IndexReport::Finite(inv.order().expect("finite"))
        }
    }
}

// ---------------------------------------------------------------------------
// free class-2 nilpotent groups
// ---------------------------------------------------------------------------

/// Free nilpotent group of class 2 on `m` generators.  Elements are
/// pairs `(a, b)` with `a ∈ ℤ^m` and `b ∈ ℤ^{m(m−1)/2}` multiplied by
/// `(a, b)·(a′, b′) = (a + a′, b + b′ + β(a, a′))` where `β` collects the
/// products `aᵢ·a′ⱼ` over pairs `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nilpotent2Group {
    m: usize,
}

/// Element of a class-2 group: abelian part and commutator part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct N2Elt {
    pub a: Vec<BigInt>,
    pub b: Vec<BigInt>,
}

impl Nilpotent2Group {
    pub fn new(m: usize) -> Nilpotent2Group {
        assert!(m >= 1, "class-2 group needs at least one generator");
        Nilpotent2Group { m }
    }

    pub fn abelian_rank(&self) -> usize {
        self.m
    }

    pub fn pair_count(&self) -> usize {
        self.m * (self.m - 1) / 2
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        assert!(i < j && j < self.m);
        i * self.m - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn identity(&self) -> N2Elt {
        N2Elt {
            a: vec![BigInt::zero(); self.m],
            b: vec![BigInt::zero(); self.pair_count()],
        }
    }

    pub fn generator(&self, i: usize) -> N2Elt {
        let mut e = self.identity();
        e.a[i] = BigInt::one();
        e
    }

    pub fn element(&self, a: Vec<BigInt>, b: Vec<BigInt>) -> Result<N2Elt> {
        if a.len() != self.m || b.len() != self.pair_count() {
            return Err(Error::Arity("class-2 element shape mismatch".into()));
        }
        Ok(N2Elt { a, b })
    }

    fn beta(&self, x: &[BigInt], y: &[BigInt]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); self.pair_count()];
        for i in 0..self.m {
            for j in i + 1..self.m {
                out[self.pair_index(i, j)] = &x[i] * &y[j];
            }
        }
        out
    }

    pub fn mul(&self, x: &N2Elt, y: &N2Elt) -> N2Elt {
        let a: Vec<BigInt> = x.a.iter().zip(&y.a).map(|(p, q)| p + q).collect();
        let beta = self.beta(&x.a, &y.a);
        let b: Vec<BigInt> = x
            .b
            .iter()
            .zip(&y.b)
            .zip(beta)
            .map(|((p, q), r)| p + q + r)
            .collect();
        N2Elt { a, b }
    }

    pub fn inv(&self, x: &N2Elt) -> N2Elt {
        let a: Vec<BigInt> = x.a.iter().map(|p| -p).collect();
        let beta = self.beta(&x.a, &x.a);
        let b: Vec<BigInt> = beta.iter().zip(&x.b).map(|(r, p)| r - p).collect();
        N2Elt { a, b }
    }

    pub fn commutator(&self, x: &N2Elt, y: &N2Elt) -> N2Elt {
        let xy = self.mul(x, y);
        let rest = self.mul(&self.inv(x), &self.inv(y));
        self.mul(&xy, &rest)
    }

    pub fn is_identity(&self, x: &N2Elt) -> bool {
        x.a.iter().all(|v| v.is_zero()) && x.b.iter().all(|v| v.is_zero())
    }

    /// The finite quotient with all coordinates reduced mod `p`, as an
    /// explicit multiplication table (the Heisenberg group for `m = 2`).
    pub fn finite_quotient(&self, p: u64) -> Result<FiniteGroup> {
        if p < 2 {
            return Err(Error::Precondition("modulus must be at least 2".into()));
        }
        let coords = self.m + self.pair_count();
        let mut order: usize = 1;
        for _ in 0..coords {
            order = order
                .checked_mul(p as usize)
                .filter(|&n| n <= MAX_FINITE_ORDER)
                .ok_or_else(|| {
                    Error::Limit(format!("quotient order exceeds cap {MAX_FINITE_ORDER}"))
                })?;
        }
        let decode = |mut idx: usize| -> N2Elt {
            let mut vals = vec![BigInt::zero(); coords];
            for v in vals.iter_mut() {
                *v = BigInt::from(idx % p as usize);
                idx /= p as usize;
            }
            N2Elt {
                a: vals[..self.m].to_vec(),
                b: vals[self.m..].to_vec(),
            }
        };
        let encode = |e: &N2Elt| -> usize {
            let mut idx = 0usize;
            let pm = BigInt::from(p);
            for v in e.a.iter().chain(&e.b).rev() {
                let r = v.mod_floor(&pm);
                let digit: usize = r.to_string().parse().expect("small digit");
                idx = idx * p as usize + digit;
            }
            idx
        };
        let mut table = vec![vec![0usize; order]; order];
        for i in 0..order {
            let x = decode(i);
            for j in 0..order {
                let y = decode(j);
                table[i][j] = encode(&self.mul(&x, &y));
            }
        }
        let mut g = FiniteGroup::from_table(table)?;
        g.gens = (0..self.m)
            .map(|i| encode(&self.generator(i)))
            .collect();
        Ok(g)
    }

    /// Index of the subgroup generated by the given elements.
    ///
    /// Finite exactly when the abelianised images span a finite-index
    /// sublattice; the commutator-direction index is computed from the
    /// wedge lattice plus the relations contributed by products with
    /// trivial abelian part.
    pub fn subgroup_index(&self, gens: &[N2Elt]) -> IndexReport {
        let c = self.pair_count();
        let a_mat = if gens.is_empty() {
            IntMat::zeros(self.m, 0)
        } else {
            IntMat::from_columns(&gens.iter().map(|g| g.a.clone()).collect::<Vec<_>>())
        };
        let a_inv = cokernel_invariants(&a_mat);
        if a_inv.free_rank > 0 {
            return IndexReport::Infinite {
                cokernel_free_rank: a_inv.free_rank,
            };
        }
        let a_index = a_inv.order().expect("finite");
        if c == 0 {
            return IndexReport::Finite(a_index);
        }
        // lattice met by the subgroup inside the commutator direction:
        // wedges of generator a-parts, plus b-parts of products whose
        // exponent vector kills the a-parts
        let mut b_cols: Vec<Vec<BigInt>> = Vec::new();
        for x in gens {
            for y in gens {
                let w = self.commutator(x, y);
                b_cols.push(w.b);
            }
        }
        let kernel = crate::linalg::col_kernel(&a_mat);
        for j in 0..kernel.cols() {
            let z = kernel.column(j);
            let mut acc = self.identity();
            for (g, e) in gens.iter().zip(&z) {
                let pow = self.pow(g, e);
                acc = self.mul(&acc, &pow);
            }
            debug_assert!(acc.a.iter().all(|v| v.is_zero()));
            b_cols.push(acc.b);
        }
        let b_mat = if b_cols.is_empty() {
            IntMat::zeros(c, 0)
        } else {
            IntMat::from_columns(&b_cols)
        };
        let b_inv = cokernel_invariants(&b_mat);
        if b_inv.free_rank > 0 {
            return IndexReport::Infinite {
                cokernel_free_rank: b_inv.free_rank,
            };
        }
        IndexReport::Finite(a_index * b_inv.order().expect("finite"))
    }

    pub fn pow(&self, x: &N2Elt, e: &BigInt) -> N2Elt {
        let base = if e.is_negative() { self.inv(x) } else { x.clone() };
        let mut n = e.abs();
        let mut acc = self.identity();
        while n > BigInt::zero() {
            acc = self.mul(&acc, &base);
            n -= 1;
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// quotient maps
// ---------------------------------------------------------------------------

/// One of the three computable target kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Finite(FiniteGroup),
    Abelian(AbelianGroup),
    Nilpotent2(Nilpotent2Group),
}

/// An element of a target group.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetElt {
    Finite(usize),
    Abelian(Vec<BigInt>),
    Nilpotent2(N2Elt),
}

impl Target {
    pub fn identity(&self) -> TargetElt {
        match self {
            Target::Finite(g) => TargetElt::Finite(g.identity()),
            Target::Abelian(a) => TargetElt::Abelian(a.zero()),
            Target::Nilpotent2(n) => TargetElt::Nilpotent2(n.identity()),
        }
    }

    pub fn mul(&self, x: &TargetElt, y: &TargetElt) -> Result<TargetElt> {
        match (self, x, y) {
            (Target::Finite(g), TargetElt::Finite(a), TargetElt::Finite(b)) => {
                Ok(TargetElt::Finite(g.mul(*a, *b)))
            }
            (Target::Abelian(t), TargetElt::Abelian(a), TargetElt::Abelian(b)) => {
                Ok(TargetElt::Abelian(t.add(a, b)))
            }
            (Target::Nilpotent2(n), TargetElt::Nilpotent2(a), TargetElt::Nilpotent2(b)) => {
                Ok(TargetElt::Nilpotent2(n.mul(a, b)))
            }
            _ => Err(Error::TargetMismatch),
        }
    }

    pub fn inv(&self, x: &TargetElt) -> Result<TargetElt> {
        match (self, x) {
            (Target::Finite(g), TargetElt::Finite(a)) => Ok(TargetElt::Finite(g.inv(*a))),
            (Target::Abelian(t), TargetElt::Abelian(a)) => Ok(TargetElt::Abelian(t.neg(a))),
            (Target::Nilpotent2(n), TargetElt::Nilpotent2(a)) => {
                Ok(TargetElt::Nilpotent2(n.inv(a)))
            }
            _ => Err(Error::TargetMismatch),
        }
    }

    pub fn eq_elements(&self, x: &TargetElt, y: &TargetElt) -> Result<bool> {
        match (self, x, y) {
            (Target::Finite(_), TargetElt::Finite(a), TargetElt::Finite(b)) => Ok(a == b),
            (Target::Abelian(t), TargetElt::Abelian(a), TargetElt::Abelian(b)) => {
                Ok(t.eq_elements(a, b))
            }
            (Target::Nilpotent2(_), TargetElt::Nilpotent2(a), TargetElt::Nilpotent2(b)) => {
                Ok(a == b)
            }
            _ => Err(Error::TargetMismatch),
        }
    }

    pub fn is_identity(&self, x: &TargetElt) -> Result<bool> {
        self.eq_elements(x, &self.identity())
    }

    pub fn describe(&self) -> String {
        match self {
            Target::Finite(g) => format!("finite group of order {}", g.order()),
            Target::Abelian(a) => format!("abelian group {}", a.invariants()),
            Target::Nilpotent2(n) => {
                format!("free class-2 nilpotent group on {} generators", n.abelian_rank())
            }
        }
    }

    /// Lower central class of the target.
    pub fn lower_central_class(&self) -> ClassResult {
        match self {
            Target::Finite(g) => g.lower_central_class(),
            Target::Abelian(a) => {
                if a.is_trivial_group() {
                    ClassResult::Class(0)
                } else {
                    ClassResult::Class(1)
                }
            }
            Target::Nilpotent2(n) => {
                if n.abelian_rank() >= 2 {
                    ClassResult::Class(2)
                } else {
                    ClassResult::Class(1)
                }
            }
        }
    }
}

/// Report of an index computation: exact order, infinite with a
/// certificate, or unknown with a reason.
#[derive(Clone, Debug, PartialEq)]
pub enum IndexReport {
    Finite(BigInt),
    Infinite { cokernel_free_rank: usize },
    Unknown { reason: String },
}

impl IndexReport {
    pub fn is_finite(&self) -> bool {
        matches!(self, IndexReport::Finite(_))
    }
    pub fn is_one(&self) -> bool {
        matches!(self, IndexReport::Finite(q) if q.is_one())
    }
}

impl fmt::Display for IndexReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexReport::Finite(q) => write!(f, "{q}"),
            IndexReport::Infinite { cokernel_free_rank } => {
                write!(f, "infinite (cokernel free rank {cokernel_free_rank})")
            }
            IndexReport::Unknown { reason } => write!(f, "unknown ({reason})"),
        }
    }
}

/// A homomorphism from a free group, or a direct product of free
/// groups, onto a computable target, given by generator images.  For
/// product domains the per-factor images must commute pairwise so the
/// map is well defined on the whole product.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientMap {
    domain: ProductGroup,
    target: Target,
    /// images[factor][generator]
    images: Vec<Vec<TargetElt>>,
}

impl QuotientMap {
    pub fn new(domain: ProductGroup, target: Target, images: Vec<Vec<TargetElt>>) -> Result<QuotientMap> {
        if images.len() != domain.n() {
            return Err(Error::Arity("one image list per factor required".into()));
        }
        for (i, imgs) in images.iter().enumerate() {
            if imgs.len() != domain.factor(i).rank() {
                return Err(Error::Arity(format!(
                    "factor {} needs {} generator images",
                    i + 1,
                    domain.factor(i).rank()
                )));
            }
        }
        let map = QuotientMap {
            domain,
            target,
            images,
        };
        // cross-factor images must commute for the product map to be a
        // homomorphism
        for i in 0..map.domain.n() {
            for j in i + 1..map.domain.n() {
                for x in &map.images[i] {
                    for y in &map.images[j] {
                        let xy = map.target.mul(x, y)?;
                        let yx = map.target.mul(y, x)?;
                        if !map.target.eq_elements(&xy, &yx)? {
                            return Err(Error::Precondition(
                                "cross-factor generator images do not commute".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(map)
    }

    /// Map on a single free group.
    pub fn on_free_group(
        group: crate::word::FreeGroup,
        target: Target,
        images: Vec<TargetElt>,
    ) -> Result<QuotientMap> {
        QuotientMap::new(ProductGroup::new(vec![group]), target, vec![images])
    }

    pub fn domain(&self) -> &ProductGroup {
        &self.domain
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn image_of_generator(&self, factor: usize, generator: usize) -> &TargetElt {
        &self.images[factor][generator]
    }

    /// Image of a word living in the given factor.
    pub fn eval_word(&self, factor: usize, w: &Word) -> Result<TargetElt> {
        if factor >= self.domain.n() || w.group() != self.domain.factor(factor) {
            return Err(Error::GroupMismatch);
        }
        if let Target::Abelian(a) = &self.target {
            // abelian shortcut: image = block matrix times exponent vector
            let ab = w.abelianize();
            let mut out = a.zero();
            for (g, e) in ab.iter().enumerate() {
                if e.is_zero() {
                    continue;
                }
                let TargetElt::Abelian(img) = &self.images[factor][g] else {
                    return Err(Error::TargetMismatch);
                };
                for (o, v) in out.iter_mut().zip(img) {
                    *o += e * v;
                }
            }
            return Ok(TargetElt::Abelian(out));
        }
        let mut acc = self.target.identity();
        for l in w.letters() {
            let img = &self.images[factor][l.gen];
            let step = if l.inv { self.target.inv(img)? } else { img.clone() };
            acc = self.target.mul(&acc, &step)?;
        }
        Ok(acc)
    }

    /// Image of a tuple under the product map (per-coordinate images
    /// multiplied in factor order).
    pub fn eval_tuple(&self, tuple: &[Word]) -> Result<TargetElt> {
        if tuple.len() != self.domain.n() {
            return Err(Error::Arity(format!(
                "tuple length {} does not match {} factors",
                tuple.len(),
                self.domain.n()
            )));
        }
        let mut acc = self.target.identity();
        for (i, w) in tuple.iter().enumerate() {
            let img = self.eval_word(i, w)?;
            acc = self.target.mul(&acc, &img)?;
        }
        Ok(acc)
    }

    /// Column block of an abelian-target map for one factor.
    pub fn abelian_block(&self, factor: usize) -> Option<IntMat> {
        let Target::Abelian(a) = &self.target else {
            return None;
        };
        let rank = self.domain.factor(factor).rank();
        let mut cols = Vec::with_capacity(rank);
        for g in 0..rank {
            let TargetElt::Abelian(v) = &self.images[factor][g] else {
                return None;
            };
            cols.push(v.clone());
        }
        Some(if cols.is_empty() {
            IntMat::zeros(a.gens(), 0)
        } else {
            IntMat::from_columns(&cols)
        })
    }

    /// All generator images flattened in factor order.
    pub fn all_images(&self) -> Vec<&TargetElt> {
        self.images.iter().flatten().collect()
    }

    pub fn is_surjective(&self) -> bool {
        match &self.target {
            Target::Finite(g) => {
                let seeds: Vec<usize> = self
                    .all_images()
                    .iter()
                    .map(|e| match e {
                        TargetElt::Finite(x) => *x,
                        _ => unreachable!("validated at construction"),
                    })
                    .collect();
                g.closure(&seeds).len() == g.order()
            }
            Target::Abelian(a) => {
                let elements: Vec<Vec<BigInt>> = self
                    .all_images()
                    .iter()
                    .map(|e| match e {
                        TargetElt::Abelian(v) => v.clone(),
                        _ => unreachable!("validated at construction"),
                    })
                    .collect();
                a.subgroup_index(&elements).is_one()
            }
            Target::Nilpotent2(n) => {
                let cols: Vec<Vec<BigInt>> = self
                    .all_images()
                    .iter()
                    .map(|e| match e {
                        TargetElt::Nilpotent2(x) => x.a.clone(),
                        _ => unreachable!("validated at construction"),
                    })
                    .collect();
                let mat = if cols.is_empty() {
                    IntMat::zeros(n.abelian_rank(), 0)
                } else {
                    IntMat::from_columns(&cols)
                };
                cokernel_invariants(&mat).is_trivial()
            }
        }
    }

    /// Index in the target of the image of the subgroup generated by the
    /// given tuples of the domain.
    pub fn image_index(&self, subgroup_gens: &[Vec<Word>]) -> Result<IndexReport> {
        let mut elements = Vec::new();
        for tuple in subgroup_gens {
            elements.push(self.eval_tuple(tuple)?);
        }
        Ok(self.subgroup_index_of_elements(&elements))
    }

    /// Index in the target of the subgroup generated by explicit target
    /// elements.
    pub fn subgroup_index_of_elements(&self, elements: &[TargetElt]) -> IndexReport {
        match &self.target {
            Target::Finite(g) => {
                let seeds: Vec<usize> = elements
                    .iter()
                    .map(|e| match e {
                        TargetElt::Finite(x) => *x,
                        _ => panic!("element/target kind mismatch"),
                    })
                    .collect();
                let h = g.closure(&seeds);
                IndexReport::Finite(BigInt::from(g.order() / h.len()))
            }
            Target::Abelian(a) => {
                let vecs: Vec<Vec<BigInt>> = elements
                    .iter()
                    .map(|e| match e {
                        TargetElt::Abelian(v) => v.clone(),
                        _ => panic!("element/target kind mismatch"),
                    })
                    .collect();
                a.subgroup_index(&vecs)
            }
            Target::Nilpotent2(n) => {
                let elts: Vec<N2Elt> = elements
                    .iter()
                    .map(|e| match e {
                        TargetElt::Nilpotent2(x) => x.clone(),
                        _ => panic!("element/target kind mismatch"),
                    })
                    .collect();
                n.subgroup_index(&elts)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::FreeGroup;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn z_target(d: usize) -> Target {
        Target::Abelian(AbelianGroup::free(d))
    }

    fn ab(vals: &[i64]) -> TargetElt {
        TargetElt::Abelian(vals.iter().map(|&v| BigInt::from(v)).collect())
    }

    #[test]
    fn finite_group_construction_and_class() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(s3.order(), 6);
        assert!(!s3.is_abelian());
        assert_eq!(s3.lower_central_class(), ClassResult::NotNilpotent);
        assert_eq!(s3.derived_subgroup().len(), 3, "derived subgroup is A3");

        let z4 = FiniteGroup::cyclic(4).unwrap();
        assert_eq!(z4.lower_central_class(), ClassResult::Class(1));
        assert_eq!(FiniteGroup::trivial().lower_central_class(), ClassResult::Class(0));

        let h27 = Nilpotent2Group::new(2).finite_quotient(3).unwrap();
        assert_eq!(h27.order(), 27);
        assert_eq!(h27.lower_central_class(), ClassResult::Class(2));
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![0, 1]]).is_err());
        // Z/2 is fine
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]]).is_ok());
    }

    #[test]
    fn quotient_of_s3_by_a3() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let a3 = s3.derived_subgroup();
        let (q, _) = s3.quotient(&a3).unwrap();
        assert_eq!(q.order(), 2);
        assert_eq!(
            s3.abelian_in_derived_series(),
            a3,
            "largest abelian derived term of S3 is A3"
        );
    }

    #[test]
    fn abelian_canonical_forms() {
        // Z^2 / <(2,0),(0,3)>
        let rels = IntMat::from_rows_i64(&[vec![2, 0], vec![0, 3]]);
        let a = AbelianGroup::from_relation_rows(2, &rels);
        // gcd(2,3) = 1, so the quotient is cyclic of order 6
        assert_eq!(a.invariants().torsion, vec![BigInt::from(6)]);
        let x = vec![BigInt::from(5), BigInt::from(-4)];
        let y = vec![BigInt::from(1), BigInt::from(2)];
        assert!(a.eq_elements(&x, &y));
        assert!(!a.is_zero_element(&x));
        assert!(a.is_zero_element(&[BigInt::from(4), BigInt::from(6)]));
    }

    #[test]
    fn abelian_subgroup_indices() {
        let z2 = AbelianGroup::free(2);
        let report = z2.subgroup_index(&[
            vec![BigInt::from(2), BigInt::zero()],
            vec![BigInt::zero(), BigInt::from(3)],
        ]);
        assert_eq!(report, IndexReport::Finite(BigInt::from(6)));
        let z1 = AbelianGroup::free(1);
        assert!(matches!(
            z1.subgroup_index(&[vec![BigInt::zero()]]),
            IndexReport::Infinite { cokernel_free_rank: 1 }
        ));
    }

    #[test]
    fn nilpotent2_commutator_has_unit_b_part() {
        let n = Nilpotent2Group::new(2);
        let x = n.generator(0);
        let y = n.generator(1);
        let c = n.commutator(&x, &y);
        assert!(c.a.iter().all(|v| v.is_zero()));
        assert_eq!(c.b, vec![BigInt::one()]);
    }

    #[test]
    fn nilpotent2_triple_commutators_vanish() {
        let n = Nilpotent2Group::new(3);
        let mut rng = StdRng::seed_from_u64(41);
        let random_elt = |rng: &mut StdRng| {
            let a: Vec<BigInt> = (0..3).map(|_| BigInt::from(rng.random_range(-4i64..=4))).collect();
            let b: Vec<BigInt> = (0..3).map(|_| BigInt::from(rng.random_range(-4i64..=4))).collect();
            N2Elt { a, b }
        };
        for _ in 0..50 {
            let (x, y, z) = (
                random_elt(&mut rng),
                random_elt(&mut rng),
                random_elt(&mut rng),
            );
            let inner = n.commutator(&y, &z);
            assert!(n.is_identity(&n.commutator(&x, &inner)));
            // commutators have trivial abelian part, and associativity holds
            assert!(n.commutator(&x, &y).a.iter().all(|v| v.is_zero()));
            let lhs = n.mul(&n.mul(&x, &y), &z);
            let rhs = n.mul(&x, &n.mul(&y, &z));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn word_images() {
        let f2 = FreeGroup::new(2);
        // class-2 target
        let n = Nilpotent2Group::new(2);
        let q = QuotientMap::on_free_group(
            f2.clone(),
            Target::Nilpotent2(n.clone()),
            vec![
                TargetElt::Nilpotent2(n.generator(0)),
                TargetElt::Nilpotent2(n.generator(1)),
            ],
        )
        .unwrap();
        let img = q.eval_word(0, &f2.parse("a b a^-1 b^-1").unwrap()).unwrap();
        assert_eq!(
            img,
            TargetElt::Nilpotent2(N2Elt {
                a: vec![BigInt::zero(), BigInt::zero()],
                b: vec![BigInt::one()],
            })
        );
        // finite target Z/2, a -> 1, b -> 0
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let q = QuotientMap::on_free_group(
            f2.clone(),
            Target::Finite(z2),
            vec![TargetElt::Finite(1), TargetElt::Finite(0)],
        )
        .unwrap();
        assert_eq!(q.eval_word(0, &f2.parse("a b a").unwrap()).unwrap(), TargetElt::Finite(0));
        // abelian target: image equals matrix times exponent vector
        let q = QuotientMap::on_free_group(
            f2.clone(),
            z_target(2),
            vec![ab(&[1, 0]), ab(&[0, 1])],
        )
        .unwrap();
        assert_eq!(q.eval_word(0, &f2.parse("a a b^-1").unwrap()).unwrap(), ab(&[2, -1]));
    }

    #[test]
    fn word_image_is_a_homomorphism_for_every_target() {
        let f2 = FreeGroup::new(2);
        let mut rng = StdRng::seed_from_u64(42);
        let random_word = |rng: &mut StdRng| {
            let len = rng.random_range(0..12);
            let raw: Vec<crate::word::Letter> = (0..len)
                .map(|_| crate::word::Letter {
                    gen: rng.random_range(0..2),
                    inv: rng.random_bool(0.5),
                })
                .collect();
            f2.reduce(raw).unwrap()
        };
        let n2 = Nilpotent2Group::new(2);
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let maps = vec![
            QuotientMap::on_free_group(f2.clone(), z_target(2), vec![ab(&[1, 2]), ab(&[0, -1])])
                .unwrap(),
            QuotientMap::on_free_group(
                f2.clone(),
                Target::Finite(s3.clone()),
                vec![
                    TargetElt::Finite(s3.generators()[0]),
                    TargetElt::Finite(s3.generators()[1]),
                ],
            )
            .unwrap(),
            QuotientMap::on_free_group(
                f2.clone(),
                Target::Nilpotent2(n2.clone()),
                vec![
                    TargetElt::Nilpotent2(n2.generator(0)),
                    TargetElt::Nilpotent2(n2.generator(1)),
                ],
            )
            .unwrap(),
        ];
        for q in &maps {
            for _ in 0..40 {
                let u = random_word(&mut rng);
                let v = random_word(&mut rng);
                let uv = u.multiply(&v).unwrap();
                let lhs = q.eval_word(0, &uv).unwrap();
                let rhs = q
                    .target()
                    .mul(&q.eval_word(0, &u).unwrap(), &q.eval_word(0, &v).unwrap())
                    .unwrap();
                assert!(q.target().eq_elements(&lhs, &rhs).unwrap());
            }
        }
    }

    #[test]
    fn image_index_examples() {
        // all four generators of F2 x F2 to 1 in Z: full domain has index 1
        let f2 = FreeGroup::new(2);
        let dom = ProductGroup::new(vec![f2.clone(), f2.clone()]);
        let q = QuotientMap::new(
            dom.clone(),
            z_target(1),
            vec![vec![ab(&[1]), ab(&[1])], vec![ab(&[1]), ab(&[1])]],
        )
        .unwrap();
        assert!(q.is_surjective());
        let gens = dom.generator_tuples();
        assert!(q.image_index(&gens).unwrap().is_one());

        // image lattice (2,0),(0,3) in Z^2 has index 6
        let q = QuotientMap::on_free_group(f2.clone(), z_target(2), vec![ab(&[2, 0]), ab(&[0, 3])])
            .unwrap();
        let gens: Vec<Vec<Word>> = vec![
            vec![f2.parse("a").unwrap()],
            vec![f2.parse("b").unwrap()],
        ];
        assert_eq!(
            q.image_index(&gens).unwrap(),
            IndexReport::Finite(BigInt::from(6))
        );

        // zero image in Z is infinite index
        let f1 = FreeGroup::new(1);
        let q = QuotientMap::on_free_group(f1.clone(), z_target(1), vec![ab(&[0])]).unwrap();
        assert!(matches!(
            q.image_index(&[vec![f1.parse("a").unwrap()]]).unwrap(),
            IndexReport::Infinite { .. }
        ));
        assert!(!q.is_surjective());
    }

    #[test]
    fn nilpotent2_subgroup_index() {
        let n = Nilpotent2Group::new(2);
        // whole group
        let report = n.subgroup_index(&[n.generator(0), n.generator(1)]);
        assert_eq!(report, IndexReport::Finite(BigInt::one()));
        // a-parts 2e1, e2: index 2 in abelianisation; commutator lattice:
        // [2e1, e2] spans 2Z in the b-direction, kernel is trivial
        let two_x = n.mul(&n.generator(0), &n.generator(0));
        let report = n.subgroup_index(&[two_x, n.generator(1)]);
        assert_eq!(report, IndexReport::Finite(BigInt::from(4)));
        // a single generator: infinite
        assert!(matches!(
            n.subgroup_index(&[n.generator(0)]),
            IndexReport::Infinite { .. }
        ));
    }

    #[test]
    fn cross_factor_commutation_is_enforced() {
        let f1 = FreeGroup::new(1);
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let dom = ProductGroup::new(vec![f1.clone(), f1.clone()]);
        // two non-commuting images in S3 cannot define a product map
        let bad = QuotientMap::new(
            dom.clone(),
            Target::Finite(s3.clone()),
            vec![
                vec![TargetElt::Finite(s3.generators()[0])],
                vec![TargetElt::Finite(s3.generators()[1])],
            ],
        );
        assert!(bad.is_err());
        // commuting images are fine
        let ok = QuotientMap::new(
            dom,
            Target::Finite(s3.clone()),
            vec![
                vec![TargetElt::Finite(s3.generators()[0])],
                vec![TargetElt::Finite(s3.generators()[0])],
            ],
        );
        assert!(ok.is_ok());
    }
}

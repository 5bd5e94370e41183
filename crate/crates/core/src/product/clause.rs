//! Constraint clauses defining product subgroups.
//!
//! Three clause families are supported: abelian kernel clauses
//! (`Σ Mᵢ·ab(γᵢ) = 0` in a finitely generated abelian group), finite
//! clauses (the tuple of per-factor images in finite groups must lie in
//! an explicit subgroup of allowed image tuples), and class-2 equalizer
//! or kernel clauses kept in unevaluated form.  Equalizers over abelian
//! or finite targets are normalised away into the first two families.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::linalg::{col_kernel, col_lattice_basis, IntMat};
use crate::quotient::{AbelianGroup, FiniteGroup, IndexReport, QuotientMap, Target, TargetElt};
use crate::word::Word;

use super::ProductGroup;

/// Enumeration cap for finite allowed-tuple sets.
pub const MAX_FINITE_TUPLES: usize = 200_000;

#[derive(Clone, Debug)]
pub enum Clause {
    Abelian(AbelianClause),
    Finite(FiniteClause),
    NilpEq(NilpEqClause),
    NilpKernel(NilpKernelClause),
}

impl Clause {
    /// Equalizer clause `π_i(γ_i) = π_j(γ_j)`, normalised by target kind.
    pub fn equalizer(
        ambient: &ProductGroup,
        i: usize,
        qi: QuotientMap,
        j: usize,
        qj: QuotientMap,
    ) -> Result<Clause> {
        if i == j || i >= ambient.n() || j >= ambient.n() {
            return Err(Error::Precondition("equalizer needs two distinct factors".into()));
        }
        if qi.target() != qj.target() {
            return Err(Error::TargetMismatch);
        }
        if qi.domain().n() != 1
            || qj.domain().n() != 1
            || qi.domain().factor(0) != ambient.factor(i)
            || qj.domain().factor(0) != ambient.factor(j)
        {
            return Err(Error::GroupMismatch);
        }
        match qi.target().clone() {
            Target::Abelian(a) => {
                let mut blocks: Vec<IntMat> = ambient
                    .factors()
                    .iter()
                    .map(|f| IntMat::zeros(a.gens(), f.rank()))
                    .collect();
                blocks[i] = qi.abelian_block(0).expect("abelian target");
                let neg = qj.abelian_block(0).expect("abelian target");
                blocks[j] = IntMat::from_fn(neg.rows(), neg.cols(), |r, c| -neg[(r, c)].clone());
                Ok(Clause::Abelian(AbelianClause::new(a, blocks)))
            }
            Target::Finite(q) => {
                let mut targets: Vec<FiniteGroup> =
                    (0..ambient.n()).map(|_| FiniteGroup::trivial()).collect();
                let mut images: Vec<Vec<usize>> = ambient
                    .factors()
                    .iter()
                    .map(|f| vec![0usize; f.rank()])
                    .collect();
                targets[i] = q.clone();
                targets[j] = q.clone();
                images[i] = finite_images(&qi, 0)?;
                images[j] = finite_images(&qj, 0)?;
                // allowed = diagonal pairs within the two image subgroups
                let im_i = q.closure(&images[i]);
                let im_j = q.closure(&images[j]);
                let mut allowed = BTreeSet::new();
                for &x in &im_i {
                    if im_j.binary_search(&x).is_ok() {
                        let mut tup = Vec::with_capacity(ambient.n());
                        for f in 0..ambient.n() {
                            if f == i || f == j {
                                tup.push(x);
                            } else {
                                tup.push(targets[f].identity());
                            }
                        }
                        allowed.insert(tup);
                    }
                }
                FiniteClause::new(targets, images, allowed).map(Clause::Finite)
            }
            Target::Nilpotent2(_) => Ok(Clause::NilpEq(NilpEqClause { i, qi, j, qj })),
        }
    }

    /// Kernel clause `π_i(γ_i) = 1`, normalised by target kind.
    pub fn factor_kernel(ambient: &ProductGroup, i: usize, q: QuotientMap) -> Result<Clause> {
        if i >= ambient.n() {
            return Err(Error::Precondition("factor index out of range".into()));
        }
        if q.domain().n() != 1 || q.domain().factor(0) != ambient.factor(i) {
            return Err(Error::GroupMismatch);
        }
        match q.target().clone() {
            Target::Abelian(a) => {
                let mut blocks: Vec<IntMat> = ambient
                    .factors()
                    .iter()
                    .map(|f| IntMat::zeros(a.gens(), f.rank()))
                    .collect();
                blocks[i] = q.abelian_block(0).expect("abelian target");
                Ok(Clause::Abelian(AbelianClause::new(a, blocks)))
            }
            Target::Finite(g) => {
                let mut targets: Vec<FiniteGroup> =
                    (0..ambient.n()).map(|_| FiniteGroup::trivial()).collect();
                let mut images: Vec<Vec<usize>> = ambient
                    .factors()
                    .iter()
                    .map(|f| vec![0usize; f.rank()])
                    .collect();
                targets[i] = g.clone();
                images[i] = finite_images(&q, 0)?;
                let mut tup = vec![0usize; ambient.n()];
                tup[i] = g.identity();
                let allowed: BTreeSet<Vec<usize>> = [tup].into_iter().collect();
                FiniteClause::new(targets, images, allowed).map(Clause::Finite)
            }
            Target::Nilpotent2(_) => Ok(Clause::NilpKernel(NilpKernelClause { i, q })),
        }
    }

    pub fn check_ambient(&self, ambient: &ProductGroup) -> Result<()> {
        match self {
            Clause::Abelian(a) => a.check_ambient(ambient),
            Clause::Finite(f) => f.check_ambient(ambient),
            Clause::NilpEq(e) => {
                if e.i >= ambient.n()
                    || e.j >= ambient.n()
                    || e.qi.domain().factor(0) != ambient.factor(e.i)
                    || e.qj.domain().factor(0) != ambient.factor(e.j)
                {
                    return Err(Error::GroupMismatch);
                }
                Ok(())
            }
            Clause::NilpKernel(k) => {
                if k.i >= ambient.n() || k.q.domain().factor(0) != ambient.factor(k.i) {
                    return Err(Error::GroupMismatch);
                }
                Ok(())
            }
        }
    }

    pub fn holds(&self, tuple: &[Word]) -> Result<bool> {
        match self {
            Clause::Abelian(a) => a.holds(tuple),
            Clause::Finite(f) => f.holds(tuple),
            Clause::NilpEq(e) => {
                let x = e.qi.eval_word(0, &tuple[e.i])?;
                let y = e.qj.eval_word(0, &tuple[e.j])?;
                e.qi.target().eq_elements(&x, &y)
            }
            Clause::NilpKernel(k) => {
                let x = k.q.eval_word(0, &tuple[k.i])?;
                k.q.target().is_identity(&x)
            }
        }
    }

    /// Restrict to `Γ_J` (complementary coordinates forced to the
    /// identity); `None` when the clause becomes vacuous.
    pub fn restrict(&self, ambient: &ProductGroup, subset: &[usize]) -> Result<Option<Clause>> {
        match self {
            Clause::Abelian(a) => Ok(Some(Clause::Abelian(a.restrict(subset)))),
            Clause::Finite(f) => Ok(f.restrict(subset)?.map(Clause::Finite)),
            Clause::NilpEq(e) => {
                let pi = subset.iter().position(|&x| x == e.i);
                let pj = subset.iter().position(|&x| x == e.j);
                match (pi, pj) {
                    (Some(pi), Some(pj)) => Ok(Some(Clause::NilpEq(NilpEqClause {
                        i: pi,
                        qi: e.qi.clone(),
                        j: pj,
                        qj: e.qj.clone(),
                    }))),
                    (Some(pi), None) => {
                        let sub = ambient.sub_product(subset);
                        Clause::factor_kernel(&sub, pi, e.qi.clone()).map(Some)
                    }
                    (None, Some(pj)) => {
                        let sub = ambient.sub_product(subset);
                        Clause::factor_kernel(&sub, pj, e.qj.clone()).map(Some)
                    }
                    (None, None) => Ok(None),
                }
            }
            Clause::NilpKernel(k) => match subset.iter().position(|&x| x == k.i) {
                Some(p) => Ok(Some(Clause::NilpKernel(NilpKernelClause {
                    i: p,
                    q: k.q.clone(),
                }))),
                None => Ok(None),
            },
        }
    }
}

fn finite_images(q: &QuotientMap, factor: usize) -> Result<Vec<usize>> {
    let rank = q.domain().factor(factor).rank();
    (0..rank)
        .map(|g| match q.image_of_generator(factor, g) {
            TargetElt::Finite(x) => Ok(*x),
            _ => Err(Error::TargetMismatch),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// abelian kernel clauses
// ---------------------------------------------------------------------------

/// `{ γ : Σᵢ Mᵢ·ab(γᵢ) = 0 in A }` for an abelian target `A = ℤ^d / L`.
#[derive(Clone, Debug)]
pub struct AbelianClause {
    target: AbelianGroup,
    /// One `d × rank(Γᵢ)` block per ambient factor.
    blocks: Vec<IntMat>,
}

impl AbelianClause {
    pub fn new(target: AbelianGroup, blocks: Vec<IntMat>) -> AbelianClause {
        for b in &blocks {
            assert_eq!(b.rows(), target.gens(), "block height mismatch");
        }
        AbelianClause { target, blocks }
    }

    /// The vacuous clause (trivial target).
    pub fn trivial(ambient: &ProductGroup) -> AbelianClause {
        AbelianClause {
            target: AbelianGroup::free(0),
            blocks: ambient
                .factors()
                .iter()
                .map(|f| IntMat::zeros(0, f.rank()))
                .collect(),
        }
    }

    /// Split a full block matrix `M = (M₁ | … | Mₙ)` over `ℤ^d` into
    /// per-factor blocks.
    pub fn from_block_matrix(ambient: &ProductGroup, matrix: &IntMat) -> Result<AbelianClause> {
        if matrix.cols() != ambient.total_rank() {
            return Err(Error::Arity(format!(
                "block matrix has {} columns, ambient total rank is {}",
                matrix.cols(),
                ambient.total_rank()
            )));
        }
        let d = matrix.rows();
        let mut blocks = Vec::new();
        let mut offset = 0;
        for f in ambient.factors() {
            let cols: Vec<usize> = (offset..offset + f.rank()).collect();
            blocks.push(matrix.select_columns(&cols));
            offset += f.rank();
        }
        Ok(AbelianClause {
            target: AbelianGroup::free(d),
            blocks,
        })
    }

    pub fn target(&self) -> &AbelianGroup {
        &self.target
    }

    pub fn blocks(&self) -> &[IntMat] {
        &self.blocks
    }

    pub fn full_matrix(&self) -> IntMat {
        let mut m = IntMat::zeros(self.target.gens(), 0);
        for b in &self.blocks {
            m = m.hcat(b);
        }
        m
    }

    fn check_ambient(&self, ambient: &ProductGroup) -> Result<()> {
        if self.blocks.len() != ambient.n() {
            return Err(Error::Arity("one block per factor required".into()));
        }
        for (b, f) in self.blocks.iter().zip(ambient.factors()) {
            if b.cols() != f.rank() {
                return Err(Error::Arity("block width does not match factor rank".into()));
            }
        }
        Ok(())
    }

    pub fn holds(&self, tuple: &[Word]) -> Result<bool> {
        let mut acc = self.target.zero();
        for (b, w) in self.blocks.iter().zip(tuple) {
            let img = b.mul_vec(&w.abelianize());
            acc = self.target.add(&acc, &img);
        }
        Ok(self.target.is_zero_element(&acc))
    }

    /// Merge several abelian clauses into one over the direct sum target.
    pub fn merge_all(ambient: &ProductGroup, clauses: &[&AbelianClause]) -> AbelianClause {
        if clauses.is_empty() {
            return AbelianClause::trivial(ambient);
        }
        if clauses.len() == 1 {
            return clauses[0].clone();
        }
        let total_gens: usize = clauses.iter().map(|c| c.target.gens()).sum();
        // block-diagonal relation lattice
        let mut rel_cols: Vec<Vec<BigInt>> = Vec::new();
        let mut offset = 0;
        for c in clauses {
            let basis = c.target.relation_basis();
            for j in 0..basis.cols() {
                let mut col = vec![BigInt::from(0); total_gens];
                for i in 0..basis.rows() {
                    col[offset + i] = basis[(i, j)].clone();
                }
                rel_cols.push(col);
            }
            offset += c.target.gens();
        }
        let rels = if rel_cols.is_empty() {
            IntMat::zeros(total_gens, 0)
        } else {
            IntMat::from_columns(&rel_cols)
        };
        let target = AbelianGroup::from_relation_columns(total_gens, &rels);
        let blocks = (0..ambient.n())
            .map(|f| {
                let rank = ambient.factor(f).rank();
                let mut block = IntMat::zeros(total_gens, rank);
                let mut off = 0;
                for c in clauses {
                    for r in 0..c.target.gens() {
                        for col in 0..rank {
                            block[(off + r, col)] = c.blocks[f][(r, col)].clone();
                        }
                    }
                    off += c.target.gens();
                }
                block
            })
            .collect();
        AbelianClause { target, blocks }
    }

    /// Projection to `Γ_J`: the defining quotient becomes
    /// `A / (image of the complementary blocks)`, and the index of
    /// `p_J(P)` in `Γ_J` is the order of the image of `Γ_J` there.
    pub fn project(&self, ambient: &ProductGroup, subset: &[usize]) -> (AbelianClause, IndexReport) {
        let d = self.target.gens();
        let mut extra_cols: Vec<Vec<BigInt>> = Vec::new();
        for f in 0..ambient.n() {
            if subset.contains(&f) {
                continue;
            }
            for j in 0..self.blocks[f].cols() {
                extra_cols.push(self.blocks[f].column(j));
            }
        }
        let mut rels = self.target.relation_basis().clone();
        if !extra_cols.is_empty() {
            rels = rels.hcat(&IntMat::from_columns(&extra_cols));
        }
        let new_target = AbelianGroup::from_relation_columns(d, &rels);
        let new_blocks: Vec<IntMat> = subset.iter().map(|&f| self.blocks[f].clone()).collect();
        let image_cols: Vec<Vec<BigInt>> = new_blocks
            .iter()
            .flat_map(|b| (0..b.cols()).map(|j| b.column(j)).collect::<Vec<_>>())
            .collect();
        let index = new_target.subgroup_order(&image_cols);
        (
            AbelianClause {
                target: new_target,
                blocks: new_blocks,
            },
            index,
        )
    }

    /// Restriction to `Γ_J` with the other coordinates set to 1: just
    /// drop the complementary blocks.
    pub fn restrict(&self, subset: &[usize]) -> AbelianClause {
        AbelianClause {
            target: self.target.clone(),
            blocks: subset.iter().map(|&f| self.blocks[f].clone()).collect(),
        }
    }

    /// Canonical basis of `{ v ∈ ℤ^R : M·v ∈ L }`, the stacked-exponent
    /// lattice that determines membership.  Two abelian systems define
    /// the same subgroup exactly when these lattices coincide.
    pub fn defining_lattice(&self, ambient: &ProductGroup) -> IntMat {
        let m = self.full_matrix();
        let total = ambient.total_rank();
        let rels = self.target.relation_basis();
        let stacked = m.hcat(rels);
        let kernel = col_kernel(&stacked);
        let rows: Vec<usize> = (0..total).collect();
        let v_part = IntMat::from_fn(total, kernel.cols(), |i, j| kernel[(rows[i], j)].clone());
        col_lattice_basis(&v_part)
    }
}

// ---------------------------------------------------------------------------
// finite clauses
// ---------------------------------------------------------------------------

/// `{ γ : (ψ₁(γ₁), …, ψₙ(γₙ)) ∈ S }` where each `ψᵢ` maps into a finite
/// group and `S` is an explicit subgroup of the product of the images.
#[derive(Clone, Debug)]
pub struct FiniteClause {
    targets: Vec<FiniteGroup>,
    /// images[factor][generator]
    images: Vec<Vec<usize>>,
    /// image subgroup of each per-factor map, sorted
    factor_images: Vec<Vec<usize>>,
    allowed: BTreeSet<Vec<usize>>,
}

impl FiniteClause {
    pub fn new(
        targets: Vec<FiniteGroup>,
        images: Vec<Vec<usize>>,
        allowed: BTreeSet<Vec<usize>>,
    ) -> Result<FiniteClause> {
        if targets.len() != images.len() {
            return Err(Error::Arity("one image list per factor".into()));
        }
        let factor_images: Vec<Vec<usize>> = targets
            .iter()
            .zip(&images)
            .map(|(t, imgs)| t.closure(imgs))
            .collect();
        let n = targets.len();
        let mut kept = BTreeSet::new();
        for t in allowed {
            if t.len() != n {
                return Err(Error::Arity("allowed tuple arity mismatch".into()));
            }
            if t.iter()
                .enumerate()
                .all(|(i, &x)| factor_images[i].binary_search(&x).is_ok())
            {
                kept.insert(t);
            }
        }
        let clause = FiniteClause {
            targets,
            images,
            factor_images,
            allowed: kept,
        };
        clause.verify_subgroup()?;
        Ok(clause)
    }

    fn verify_subgroup(&self) -> Result<()> {
        let id: Vec<usize> = self.targets.iter().map(|t| t.identity()).collect();
        if !self.allowed.contains(&id) {
            return Err(Error::Internal("allowed set misses the identity tuple".into()));
        }
        if self.allowed.len() <= 64 {
            for x in &self.allowed {
                for y in &self.allowed {
                    let prod: Vec<usize> = x
                        .iter()
                        .zip(y)
                        .enumerate()
                        .map(|(f, (&a, &b))| self.targets[f].mul(a, b))
                        .collect();
                    if !self.allowed.contains(&prod) {
                        return Err(Error::Internal("allowed set is not closed".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn allowed(&self) -> &BTreeSet<Vec<usize>> {
        &self.allowed
    }

    pub fn targets(&self) -> &[FiniteGroup] {
        &self.targets
    }

    pub fn factor_image(&self, i: usize) -> &[usize] {
        &self.factor_images[i]
    }

    /// Generator images of one factor's map.
    pub fn images_of_factor(&self, i: usize) -> &[usize] {
        &self.images[i]
    }

    fn check_ambient(&self, ambient: &ProductGroup) -> Result<()> {
        if self.targets.len() != ambient.n() {
            return Err(Error::Arity("one finite target per factor".into()));
        }
        for (imgs, f) in self.images.iter().zip(ambient.factors()) {
            if imgs.len() != f.rank() {
                return Err(Error::Arity("image count does not match factor rank".into()));
            }
        }
        Ok(())
    }

    fn eval_factor(&self, i: usize, w: &Word) -> usize {
        let t = &self.targets[i];
        let mut acc = t.identity();
        for l in w.letters() {
            let img = self.images[i][l.gen];
            let step = if l.inv { t.inv(img) } else { img };
            acc = t.mul(acc, step);
        }
        acc
    }

    pub fn holds(&self, tuple: &[Word]) -> Result<bool> {
        let imgs: Vec<usize> = tuple
            .iter()
            .enumerate()
            .map(|(i, w)| self.eval_factor(i, w))
            .collect();
        Ok(self.allowed.contains(&imgs))
    }

    /// Merge two finite clauses over the same ambient via per-factor
    /// direct products.
    pub fn merge(&self, other: &FiniteClause) -> Result<FiniteClause> {
        let n = self.targets.len();
        if other.targets.len() != n {
            return Err(Error::Arity("ambient mismatch in finite merge".into()));
        }
        if self
            .allowed
            .len()
            .checked_mul(other.allowed.len())
            .map_or(true, |x| x > MAX_FINITE_TUPLES)
        {
            return Err(Error::Limit(format!(
                "finite merge would enumerate more than {MAX_FINITE_TUPLES} tuples"
            )));
        }
        let mut targets = Vec::with_capacity(n);
        for i in 0..n {
            targets.push(FiniteGroup::direct_product(&self.targets[i], &other.targets[i])?);
        }
        let pair = |i: usize, a: usize, b: usize| a * other.targets[i].order() + b;
        let images: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                self.images[i]
                    .iter()
                    .zip(&other.images[i])
                    .map(|(&a, &b)| pair(i, a, b))
                    .collect()
            })
            .collect();
        let mut allowed = BTreeSet::new();
        for x in &self.allowed {
            for y in &other.allowed {
                let t: Vec<usize> = (0..n).map(|i| pair(i, x[i], y[i])).collect();
                allowed.insert(t);
            }
        }
        FiniteClause::new(targets, images, allowed)
    }

    pub fn merge_all(ambient: &ProductGroup, clauses: &[&FiniteClause]) -> Result<FiniteClause> {
        let mut iter = clauses.iter();
        let first = match iter.next() {
            Some(f) => (*f).clone(),
            None => {
                // no constraints: everything allowed in the trivial target
                let targets: Vec<FiniteGroup> =
                    (0..ambient.n()).map(|_| FiniteGroup::trivial()).collect();
                let images = ambient
                    .factors()
                    .iter()
                    .map(|f| vec![0usize; f.rank()])
                    .collect();
                let allowed: BTreeSet<Vec<usize>> =
                    [vec![0usize; ambient.n()]].into_iter().collect();
                return FiniteClause::new(targets, images, allowed);
            }
        };
        iter.try_fold(first, |acc, c| acc.merge(c))
    }

    /// Projection to `Γ_J`: drop the other coordinates of the allowed
    /// set.  The index of `p_J(P)` in `Γ_J` is
    /// `∏ |im ψᵢ| / |S_J|` over `i ∈ J`.
    pub fn project(&self, subset: &[usize]) -> Result<(FiniteClause, IndexReport)> {
        let targets: Vec<FiniteGroup> = subset.iter().map(|&i| self.targets[i].clone()).collect();
        let images: Vec<Vec<usize>> = subset.iter().map(|&i| self.images[i].clone()).collect();
        let mut allowed = BTreeSet::new();
        for t in &self.allowed {
            allowed.insert(subset.iter().map(|&i| t[i]).collect::<Vec<usize>>());
        }
        let clause = FiniteClause::new(targets, images, allowed)?;
        let mut numerator = BigInt::one();
        for (pos, _) in subset.iter().enumerate() {
            numerator *= BigInt::from(clause.factor_images[pos].len());
        }
        let index = numerator / BigInt::from(clause.allowed.len());
        Ok((clause, IndexReport::Finite(index)))
    }

    /// Restriction to `Γ_J` with the other coordinates set to 1.
    pub fn restrict(&self, subset: &[usize]) -> Result<Option<FiniteClause>> {
        let targets: Vec<FiniteGroup> = subset.iter().map(|&i| self.targets[i].clone()).collect();
        let images: Vec<Vec<usize>> = subset.iter().map(|&i| self.images[i].clone()).collect();
        let mut allowed = BTreeSet::new();
        for t in &self.allowed {
            let off_identity = (0..self.targets.len())
                .filter(|i| !subset.contains(i))
                .all(|i| t[i] == self.targets[i].identity());
            if off_identity {
                allowed.insert(subset.iter().map(|&i| t[i]).collect::<Vec<usize>>());
            }
        }
        Ok(Some(FiniteClause::new(targets, images, allowed)?))
    }

    /// Equality of the subgroups defined by two finite systems over the
    /// same ambient product, via the image of the combined map.
    pub fn equal_subgroups(&self, other: &FiniteClause) -> Result<bool> {
        let n = self.targets.len();
        if other.targets.len() != n {
            return Err(Error::GroupMismatch);
        }
        // combined image tuples (one pair per factor), generated by the
        // ambient generators
        type Pair = (usize, usize);
        let id: Vec<Pair> = (0..n)
            .map(|i| (self.targets[i].identity(), other.targets[i].identity()))
            .collect();
        let mut gens: Vec<Vec<Pair>> = Vec::new();
        for i in 0..n {
            for g in 0..self.images[i].len() {
                let mut t = id.clone();
                t[i] = (self.images[i][g], other.images[i][g]);
                gens.push(t);
            }
        }
        let mut seen: BTreeSet<Vec<Pair>> = [id.clone()].into_iter().collect();
        let mut queue = vec![id];
        while let Some(cur) = queue.pop() {
            for g in &gens {
                for next in [
                    (0..n)
                        .map(|i| {
                            (
                                self.targets[i].mul(cur[i].0, g[i].0),
                                other.targets[i].mul(cur[i].1, g[i].1),
                            )
                        })
                        .collect::<Vec<Pair>>(),
                    (0..n)
                        .map(|i| {
                            (
                                self.targets[i].mul(cur[i].0, self.targets[i].inv(g[i].0)),
                                other.targets[i].mul(cur[i].1, other.targets[i].inv(g[i].1)),
                            )
                        })
                        .collect::<Vec<Pair>>(),
                ] {
                    if seen.len() > MAX_FINITE_TUPLES {
                        return Err(Error::Limit(
                            "combined finite image enumeration too large".into(),
                        ));
                    }
                    if !seen.contains(&next) {
                        seen.insert(next.clone());
                        queue.push(next);
                    }
                }
            }
        }
        for w in &seen {
            let in_self = self
                .allowed
                .contains(&w.iter().map(|p| p.0).collect::<Vec<usize>>());
            let in_other = other
                .allowed
                .contains(&w.iter().map(|p| p.1).collect::<Vec<usize>>());
            if in_self != in_other {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// class-2 clauses, kept unevaluated
// ---------------------------------------------------------------------------

/// `π_i(γ_i) = π_j(γ_j)` over a free class-2 nilpotent target.
#[derive(Clone, Debug)]
pub struct NilpEqClause {
    pub i: usize,
    pub qi: QuotientMap,
    pub j: usize,
    pub qj: QuotientMap,
}

/// `π_i(γ_i) = 1` over a free class-2 nilpotent target.
#[derive(Clone, Debug)]
pub struct NilpKernelClause {
    pub i: usize,
    pub q: QuotientMap,
}

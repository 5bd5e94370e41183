//! Iterated decomposition of a subdirect product: `T := p_{1,…,n−1}(P)`
//! together with the two short exact sequences over the common quotient
//! `Q ≅ P/(N_{1,…,n−1} × N_n)`, and the reconstruction of `P` as their
//! fibre product.

use std::collections::BTreeSet;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::linalg::{col_kernel, col_lattice_basis, lattice_quotient, solve_linear, AbInvariants, IntMat};
use crate::quotient::{AbelianGroup, FiniteGroup, QuotientMap, Target, TargetElt};
use crate::word::Word;

use super::clause::{AbelianClause, Clause, FiniteClause};
use super::fibre::{equalizer_subgroup, Middle, SesMap, ShortExactData};
use super::{Normalized, ProductGroup, ProductSubgroup};

/// Isomorphism type of the common quotient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QuotientDesc {
    Abelian(AbInvariants),
    Finite(usize),
}

impl std::fmt::Display for QuotientDesc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuotientDesc::Abelian(inv) => write!(f, "abelian {inv}"),
            QuotientDesc::Finite(n) => write!(f, "finite of order {n}"),
        }
    }
}

/// Epimorphism `T ↠ Q` defined on a product subgroup of an abelian
/// kernel system: evaluation lands in the subgroup `Q = (im Mₙ + L)/L`
/// of the ambient abelian quotient, expressed in basis coordinates.
#[derive(Clone, Debug)]
pub struct SubgroupBlockMap {
    pub ambient: ProductGroup,
    /// per-factor blocks of `−Σ Mᵢ·ab` at the `ℤ^d` level
    pub blocks: Vec<IntMat>,
    /// ambient abelian quotient `ℤ^d / L`
    pub target_ambient: AbelianGroup,
    /// columns spanning `im Mₙ + L`
    pub q_basis: IntMat,
    /// `Q` in basis coordinates
    pub q: AbelianGroup,
}

impl SubgroupBlockMap {
    /// Value in `Q`-coordinates; errors when the tuple lies outside the
    /// domain subgroup `T`.
    pub fn eval(&self, tuple: &[Word]) -> Result<Vec<BigInt>> {
        self.ambient.check_tuple(tuple)?;
        let mut v = vec![BigInt::from(0); self.target_ambient.gens()];
        for (b, w) in self.blocks.iter().zip(tuple) {
            for (acc, x) in v.iter_mut().zip(b.mul_vec(&w.abelianize())) {
                *acc += x;
            }
        }
        let stacked = self.q_basis.hcat(self.target_ambient.relation_basis());
        let sol = solve_linear(&stacked, &v).ok_or_else(|| {
            Error::Precondition("tuple lies outside the domain subgroup T".into())
        })?;
        let coords: Vec<BigInt> = sol.into_iter().take(self.q_basis.cols()).collect();
        Ok(self.q.canonical(&coords))
    }
}

/// Epimorphism `T ↠ Q` defined on a product subgroup of a finite
/// system: the last coordinate of any matching allowed tuple gives the
/// coset.
#[derive(Clone, Debug)]
pub struct SubgroupFiniteMap {
    pub ambient: ProductGroup,
    targets: Vec<FiniteGroup>,
    images: Vec<Vec<usize>>,
    allowed: BTreeSet<Vec<usize>>,
    /// coset of each element of the last target's image subgroup
    coset_of_last: std::collections::HashMap<usize, usize>,
    pub q: FiniteGroup,
}

impl SubgroupFiniteMap {
    pub fn eval(&self, tuple: &[Word]) -> Result<usize> {
        self.ambient.check_tuple(tuple)?;
        let prefix: Vec<usize> = tuple
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let t = &self.targets[i];
                let mut acc = t.identity();
                for l in w.letters() {
                    let img = self.images[i][l.gen];
                    let step = if l.inv { t.inv(img) } else { img };
                    acc = t.mul(acc, step);
                }
                acc
            })
            .collect();
        for s in &self.allowed {
            if s[..prefix.len()] == prefix[..] {
                return Ok(self.coset_of_last[&s[prefix.len()]]);
            }
        }
        Err(Error::Precondition(
            "tuple lies outside the domain subgroup T".into(),
        ))
    }
}

/// Result of one decomposition step.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// `T = p_{1,…,n−1}(P)`.
    pub t: ProductSubgroup,
    /// `N_{1,…,n−1} ↪ T ↠ Q`.
    pub seq1: ShortExactData,
    /// `N_n ↪ Γ_n ↠ Q`.
    pub seq2: ShortExactData,
    pub quotient: QuotientDesc,
    reconstruction: ProductSubgroup,
}

impl Decomposition {
    /// The fibre product of the two sequences, a subgroup of the full
    /// ambient product with the same membership as `P`.
    pub fn reconstruct(&self) -> &ProductSubgroup {
        &self.reconstruction
    }
}

pub(super) fn decompose(p: &ProductSubgroup) -> Result<Decomposition> {
    let n = p.ambient().n();
    if n < 2 {
        return Err(Error::Precondition("decomposition needs at least two factors".into()));
    }
    if p.is_subdirect() != Some(true) {
        return Err(Error::Precondition(
            "decomposition is defined for verified subdirect products".into(),
        ));
    }
    match p.normalized() {
        Normalized::Abelian(clause) => decompose_abelian(p, &clause),
        Normalized::Finite(clause) => decompose_finite(p, &clause),
        Normalized::Mixed(reason) => Err(Error::Unsupported(format!(
            "decomposition needs a pure abelian or pure finite system ({reason})"
        ))),
    }
}

fn decompose_abelian(p: &ProductSubgroup, clause: &AbelianClause) -> Result<Decomposition> {
    let ambient = p.ambient();
    let n = ambient.n();
    let first: Vec<usize> = (0..n - 1).collect();
    let rels = clause.target().relation_basis().clone();

    // T and N_{1..n-1}, N_n via the generic machinery
    let (t, _) = p.projection(&first)?;
    let n_first = p.intersection(&first)?;
    let n_last = p.intersection(&[n - 1])?;

    // Q = (im M_n + L)/L in basis coordinates
    let m_n = clause.blocks()[n - 1].clone();
    let span = m_n.hcat(&rels);
    let basis = col_lattice_basis(&span);
    let q_rel = {
        // {x : B·x ∈ L}
        let stacked = basis.hcat(&rels);
        let kernel = col_kernel(&stacked);
        IntMat::from_fn(basis.cols(), kernel.cols(), |i, j| kernel[(i, j)].clone())
    };
    let q = AbelianGroup::from_relation_columns(basis.cols(), &q_rel);
    let quotient = QuotientDesc::Abelian(lattice_quotient(&span, &rels)?);

    // π_n: Γ_n → Q, generator images in basis coordinates
    let last_factor = ambient.factor(n - 1).clone();
    let stacked = basis.hcat(&rels);
    let mut images = Vec::new();
    for g in 0..last_factor.rank() {
        let col = m_n.column(g);
        let sol = solve_linear(&stacked, &col)
            .ok_or_else(|| Error::Internal("column must lie in its own span".into()))?;
        let coords: Vec<BigInt> = sol.into_iter().take(basis.cols()).collect();
        images.push(TargetElt::Abelian(coords));
    }
    let pi_n = QuotientMap::on_free_group(last_factor.clone(), Target::Abelian(q.clone()), images)?;

    // π_T: blocks negated, defined on T
    let neg_blocks: Vec<IntMat> = first
        .iter()
        .map(|&i| {
            let b = &clause.blocks()[i];
            IntMat::from_fn(b.rows(), b.cols(), |r, c| -b[(r, c)].clone())
        })
        .collect();
    let pi_t = SubgroupBlockMap {
        ambient: ambient.sub_product(&first),
        blocks: neg_blocks,
        target_ambient: clause.target().clone(),
        q_basis: basis,
        q: q.clone(),
    };

    // reconstruction: x ∈ T and π_T(x) = π_n(γ_n) is exactly the original
    // kernel clause at the ℤ^d level
    let mut blocks = Vec::new();
    for i in &first {
        blocks.push(clause.blocks()[*i].clone());
    }
    blocks.push(m_n);
    let reconstruction = ProductSubgroup::from_clauses(
        ambient.clone(),
        vec![Clause::Abelian(AbelianClause::new(clause.target().clone(), blocks))],
    )?;

    Ok(Decomposition {
        seq1: ShortExactData {
            kernel: n_first,
            middle: Middle::Subgroup(t.clone()),
            map: SesMap::OnSubgroupAbelian(pi_t),
        },
        seq2: ShortExactData {
            kernel: n_last,
            middle: Middle::Whole(ProductGroup::new(vec![last_factor])),
            map: SesMap::Onto(pi_n),
        },
        t,
        quotient,
        reconstruction,
    })
}

fn decompose_finite(p: &ProductSubgroup, clause: &FiniteClause) -> Result<Decomposition> {
    let ambient = p.ambient();
    let n = ambient.n();
    let first: Vec<usize> = (0..n - 1).collect();

    let (t, _) = p.projection(&first)?;
    let n_first = p.intersection(&first)?;
    let n_last = p.intersection(&[n - 1])?;

    // K = {q in im ψ_n : (1,…,1,q) ∈ S}; Q = im ψ_n / K
    let targets = clause.targets();
    let last = n - 1;
    let im_n: Vec<usize> = clause.factor_image(last).to_vec();
    let idents: Vec<usize> = targets.iter().map(|t| t.identity()).collect();
    let kernel_elts: Vec<usize> = im_n
        .iter()
        .copied()
        .filter(|&x| {
            let mut tup = idents.clone();
            tup[last] = x;
            clause.allowed().contains(&tup)
        })
        .collect();
    // the image subgroup as its own group, then its quotient by K
    let (im_group, old_to_new) = subgroup_as_group(&targets[last], &im_n)?;
    let kernel_new: Vec<usize> = kernel_elts.iter().map(|&x| old_to_new[&x]).collect();
    let (q_group, coset) = im_group.quotient(&kernel_new)?;
    let quotient = QuotientDesc::Finite(q_group.order());

    // π_n: Γ_n → Q
    let last_factor = ambient.factor(last).clone();
    let mut images = Vec::new();
    for g in 0..last_factor.rank() {
        let old = clause_image(clause, last, g);
        images.push(TargetElt::Finite(coset[old_to_new[&old]]));
    }
    let pi_n =
        QuotientMap::on_free_group(last_factor.clone(), Target::Finite(q_group.clone()), images)?;

    // π_T on T via allowed-tuple lookup
    let coset_of_last: std::collections::HashMap<usize, usize> = im_n
        .iter()
        .map(|&x| (x, coset[old_to_new[&x]]))
        .collect();
    let pi_t = SubgroupFiniteMap {
        ambient: ambient.sub_product(&first),
        targets: first.iter().map(|&i| targets[i].clone()).collect(),
        images: first.iter().map(|&i| clause_images(clause, i)).collect(),
        allowed: clause.allowed().clone(),
        coset_of_last,
        q: q_group,
    };

    // reconstruction keeps the original allowed set
    let reconstruction = ProductSubgroup::from_clauses(
        ambient.clone(),
        vec![Clause::Finite(clause.clone())],
    )?;

    Ok(Decomposition {
        seq1: ShortExactData {
            kernel: n_first,
            middle: Middle::Subgroup(t.clone()),
            map: SesMap::OnSubgroupFinite(pi_t),
        },
        seq2: ShortExactData {
            kernel: n_last,
            middle: Middle::Whole(ProductGroup::new(vec![last_factor])),
            map: SesMap::Onto(pi_n),
        },
        t,
        quotient,
        reconstruction,
    })
}

fn clause_images(clause: &FiniteClause, factor: usize) -> Vec<usize> {
    (0..clause_rank(clause, factor))
        .map(|g| clause_image(clause, factor, g))
        .collect()
}

fn clause_rank(clause: &FiniteClause, factor: usize) -> usize {
    clause.images_of_factor(factor).len()
}

fn clause_image(clause: &FiniteClause, factor: usize, g: usize) -> usize {
    clause.images_of_factor(factor)[g]
}

/// Restrict a group's table to a subgroup element list, returning the
/// subgroup as its own group plus the element renumbering.
fn subgroup_as_group(
    g: &FiniteGroup,
    elements: &[usize],
) -> Result<(FiniteGroup, std::collections::HashMap<usize, usize>)> {
    let mut old_to_new = std::collections::HashMap::new();
    for (i, &x) in elements.iter().enumerate() {
        old_to_new.insert(x, i);
    }
    let k = elements.len();
    let mut table = vec![vec![0usize; k]; k];
    for (i, &x) in elements.iter().enumerate() {
        for (j, &y) in elements.iter().enumerate() {
            let z = g.mul(x, y);
            let nz = *old_to_new
                .get(&z)
                .ok_or_else(|| Error::Internal("element list is not closed".into()))?;
            table[i][j] = nz;
        }
    }
    Ok((FiniteGroup::from_table(table)?, old_to_new))
}

/// Rebuild a subgroup from decomposition sequences by taking the
/// equalizer of the two epimorphisms (used by round-trip tests for the
/// `n = 2` equalizer case, where both maps are plain quotient maps).
pub fn reconstruct_from_quotient_maps(
    q1: &QuotientMap,
    q2: &QuotientMap,
) -> Result<ProductSubgroup> {
    equalizer_subgroup(q1, q2)
}

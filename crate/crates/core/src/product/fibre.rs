//! Fibre products of two surjections with a common target, the short
//! exact sequences they fit into, split sections, and explicit
//! generating sets.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{col_kernel, col_lattice_basis, solve_linear, IntMat};
use crate::quotient::{QuotientMap, Target, TargetElt};
use crate::word::Word;

use super::clause::{AbelianClause, Clause, FiniteClause};
use super::decompose::{SubgroupBlockMap, SubgroupFiniteMap};
use super::{ProductGroup, ProductSubgroup};

/// Middle group of a short exact sequence.
#[derive(Clone, Debug)]
pub enum Middle {
    Whole(ProductGroup),
    Subgroup(ProductSubgroup),
}

/// The epimorphism of a short exact sequence.
#[derive(Clone, Debug)]
pub enum SesMap {
    /// Total map from the middle's ambient product.
    Onto(QuotientMap),
    /// Coordinate projection onto a sub-product (diagram-lemma rows).
    Projection { onto: Vec<usize> },
    /// Map defined only on a product subgroup, abelian data.
    OnSubgroupAbelian(SubgroupBlockMap),
    /// Map defined only on a product subgroup, finite data.
    OnSubgroupFinite(SubgroupFiniteMap),
}

/// One row `N ↪ Γ ↠ Q` of a commutative fibre-product diagram.
#[derive(Clone, Debug)]
pub struct ShortExactData {
    pub kernel: ProductSubgroup,
    pub middle: Middle,
    pub map: SesMap,
}

/// A fibre product with its two induced short exact sequences
/// `N₁ ↪ P ↠ Γ₂` and `N₂ ↪ P ↠ Γ₁`.
#[derive(Clone, Debug)]
pub struct FibreProduct {
    pub subgroup: ProductSubgroup,
    pub seq1: ShortExactData,
    pub seq2: ShortExactData,
    pub q1: QuotientMap,
    pub q2: QuotientMap,
}

/// Kernel of a quotient map, as a product subgroup of the map's domain.
pub fn kernel_subgroup(q: &QuotientMap) -> Result<ProductSubgroup> {
    let ambient = q.domain().clone();
    match q.target() {
        Target::Abelian(a) => {
            let blocks: Vec<IntMat> = (0..ambient.n())
                .map(|i| q.abelian_block(i).expect("abelian target"))
                .collect();
            let clause = AbelianClause::new(a.clone(), blocks);
            ProductSubgroup::from_clauses(ambient, vec![Clause::Abelian(clause)])
        }
        Target::Finite(g) => {
            let mut images = Vec::new();
            for i in 0..ambient.n() {
                let mut row = Vec::new();
                for gen in 0..ambient.factor(i).rank() {
                    match q.image_of_generator(i, gen) {
                        TargetElt::Finite(x) => row.push(*x),
                        _ => return Err(Error::TargetMismatch),
                    }
                }
                images.push(row);
            }
            let targets: Vec<_> = (0..ambient.n()).map(|_| g.clone()).collect();
            // allowed: per-factor image tuples whose ordered product is 1
            let per_factor: Vec<Vec<usize>> = (0..ambient.n())
                .map(|i| targets[i].closure(&images[i]))
                .collect();
            let mut allowed = std::collections::BTreeSet::new();
            let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, Vec::new(), g.identity())];
            while let Some((i, tuple, prod)) = stack.pop() {
                if i == ambient.n() {
                    if prod == g.identity() {
                        allowed.insert(tuple);
                    }
                    continue;
                }
                for &x in &per_factor[i] {
                    let mut t = tuple.clone();
                    t.push(x);
                    stack.push((i + 1, t, g.mul(prod, x)));
                }
            }
            let clause = FiniteClause::new(targets, images, allowed)?;
            ProductSubgroup::from_clauses(ambient, vec![Clause::Finite(clause)])
        }
        Target::Nilpotent2(_) => {
            if ambient.n() != 1 {
                return Err(Error::Unsupported(
                    "class-2 kernels only on single-factor domains".into(),
                ));
            }
            let clause = Clause::factor_kernel(&ambient, 0, q.clone())?;
            ProductSubgroup::from_clauses(ambient, vec![clause])
        }
    }
}

/// The fibre product of two surjections with identical target.
///
/// Errors on a target mismatch or when either map fails surjectivity.
pub fn fibre_product(q1: &QuotientMap, q2: &QuotientMap) -> Result<FibreProduct> {
    if q1.target() != q2.target() {
        return Err(Error::TargetMismatch);
    }
    if !q1.is_surjective() || !q2.is_surjective() {
        return Err(Error::NotSurjective);
    }
    equalizer_fibre(q1, q2, true)
}

/// The equalizer subgroup of two maps with identical target, without
/// the surjectivity requirement (used for decomposition round trips);
/// the subdirect flag is only set in the surjective case.
pub fn equalizer_subgroup(q1: &QuotientMap, q2: &QuotientMap) -> Result<ProductSubgroup> {
    if q1.target() != q2.target() {
        return Err(Error::TargetMismatch);
    }
    Ok(equalizer_fibre(q1, q2, false)?.subgroup)
}

fn equalizer_fibre(q1: &QuotientMap, q2: &QuotientMap, surjective: bool) -> Result<FibreProduct> {
    let n1 = q1.domain().n();
    let n2 = q2.domain().n();
    let mut factors = q1.domain().factors().to_vec();
    factors.extend(q2.domain().factors().iter().cloned());
    let ambient = ProductGroup::new(factors);
    let clause = match q1.target() {
        Target::Abelian(a) => {
            let mut blocks = Vec::new();
            for i in 0..n1 {
                blocks.push(q1.abelian_block(i).expect("abelian target"));
            }
            for j in 0..n2 {
                let b = q2.abelian_block(j).expect("abelian target");
                blocks.push(IntMat::from_fn(b.rows(), b.cols(), |r, c| -b[(r, c)].clone()));
            }
            Clause::Abelian(AbelianClause::new(a.clone(), blocks))
        }
        Target::Finite(g) => {
            let mut targets = Vec::new();
            let mut images = Vec::new();
            for (q, n) in [(q1, n1), (q2, n2)] {
                for i in 0..n {
                    targets.push(g.clone());
                    let mut row = Vec::new();
                    for gen in 0..q.domain().factor(i).rank() {
                        match q.image_of_generator(i, gen) {
                            TargetElt::Finite(x) => row.push(*x),
                            _ => return Err(Error::TargetMismatch),
                        }
                    }
                    images.push(row);
                }
            }
            // allowed: left product equals right product
            let per_factor: Vec<Vec<usize>> = (0..targets.len())
                .map(|i| targets[i].closure(&images[i]))
                .collect();
            let mut allowed = std::collections::BTreeSet::new();
            let mut stack: Vec<(usize, Vec<usize>, usize, usize)> =
                vec![(0, Vec::new(), g.identity(), g.identity())];
            while let Some((i, tuple, left, right)) = stack.pop() {
                if i == targets.len() {
                    if left == right {
                        allowed.insert(tuple);
                    }
                    continue;
                }
                for &x in &per_factor[i] {
                    let mut t = tuple.clone();
                    t.push(x);
                    if i < n1 {
                        stack.push((i + 1, t, g.mul(left, x), right));
                    } else {
                        stack.push((i + 1, t, left, g.mul(right, x)));
                    }
                }
            }
            Clause::Finite(FiniteClause::new(targets, images, allowed)?)
        }
        Target::Nilpotent2(_) => {
            if n1 != 1 || n2 != 1 {
                return Err(Error::Unsupported(
                    "class-2 equalizers only on single-factor domains".into(),
                ));
            }
            Clause::equalizer(&ambient, 0, q1.clone(), 1, q2.clone())?
        }
    };
    let subgroup = if surjective {
        ProductSubgroup::with_subdirect_hint(ambient.clone(), vec![clause], true)?
    } else {
        ProductSubgroup::from_clauses(ambient.clone(), vec![clause])?
    };
    let side2: Vec<usize> = (n1..n1 + n2).collect();
    let side1: Vec<usize> = (0..n1).collect();
    let seq1 = ShortExactData {
        kernel: kernel_subgroup(q1)?,
        middle: Middle::Subgroup(subgroup.clone()),
        map: SesMap::Projection { onto: side2 },
    };
    let seq2 = ShortExactData {
        kernel: kernel_subgroup(q2)?,
        middle: Middle::Subgroup(subgroup.clone()),
        map: SesMap::Projection { onto: side1 },
    };
    Ok(FibreProduct {
        subgroup,
        seq1,
        seq2,
        q1: q1.clone(),
        q2: q2.clone(),
    })
}

// ---------------------------------------------------------------------------
// split sections
// ---------------------------------------------------------------------------

/// A section of the second sequence, given by words of `Γ₂`.
#[derive(Clone, Debug)]
pub enum SectionSpec {
    /// Finite target: one word per target element (index order).
    OnElements(Vec<Word>),
    /// Abelian target: one word per target generator.
    OnBasis(Vec<Word>),
}

/// The homomorphism `Γ₁ → P`, `γ₁ ↦ (γ₁, σπ₁(γ₁))` attached to a split
/// second sequence.
#[derive(Clone, Debug)]
pub struct SplitSection {
    pub fibre: FibreProduct,
    section: SectionSpec,
}

/// Verify that `σ` is a homomorphic section of `q2` and build the
/// induced map into the fibre product of `q1` and `q2`.
pub fn split_section(
    q1: &QuotientMap,
    q2: &QuotientMap,
    section: SectionSpec,
) -> Result<SplitSection> {
    if q2.domain().n() != 1 {
        return Err(Error::Unsupported("sections target a single free factor".into()));
    }
    let fibre = fibre_product(q1, q2)?;
    match (&section, q2.target()) {
        (SectionSpec::OnElements(words), Target::Finite(g)) => {
            if words.len() != g.order() {
                return Err(Error::NotASection(format!(
                    "need one word per target element ({} given, order {})",
                    words.len(),
                    g.order()
                )));
            }
            for w in words {
                if w.group() != q2.domain().factor(0) {
                    return Err(Error::GroupMismatch);
                }
            }
            for (x, w) in words.iter().enumerate() {
                let img = q2.eval_word(0, w)?;
                if img != TargetElt::Finite(x) {
                    return Err(Error::NotASection(format!(
                        "π₂(σ(element {x})) differs from the element"
                    )));
                }
            }
            for x in 0..g.order() {
                for y in 0..g.order() {
                    let lhs = words[x].multiply(&words[y])?;
                    if lhs != words[g.mul(x, y)] {
                        return Err(Error::NotASection(format!(
                            "σ is not multiplicative at ({x}, {y})"
                        )));
                    }
                }
            }
        }
        (SectionSpec::OnBasis(words), Target::Abelian(a)) => {
            if words.len() != a.gens() {
                return Err(Error::NotASection(format!(
                    "need one word per target generator ({} given, {} generators)",
                    words.len(),
                    a.gens()
                )));
            }
            for w in words {
                if w.group() != q2.domain().factor(0) {
                    return Err(Error::GroupMismatch);
                }
            }
            for (i, w) in words.iter().enumerate() {
                let img = q2.eval_word(0, w)?;
                let mut e = a.zero();
                e[i] += 1;
                if !a.eq_elements(
                    match &img {
                        TargetElt::Abelian(v) => v,
                        _ => return Err(Error::TargetMismatch),
                    },
                    &e,
                ) {
                    return Err(Error::NotASection(format!(
                        "π₂(σ(generator {i})) is not the generator"
                    )));
                }
            }
            // images must commute pairwise and kill every relation
            for (i, u) in words.iter().enumerate() {
                for v in words.iter().skip(i + 1) {
                    if u.multiply(v)? != v.multiply(u)? {
                        return Err(Error::NotASection(
                            "section images do not commute".into(),
                        ));
                    }
                }
            }
            let rels = a.relation_basis();
            for j in 0..rels.cols() {
                let mut acc = q2.domain().factor(0).identity();
                for (i, w) in words.iter().enumerate() {
                    let e = rels[(i, j)].clone();
                    let e64: i64 = e.to_string().parse().map_err(|_| {
                        Error::Limit("relation exponent too large for a section check".into())
                    })?;
                    acc = acc.multiply(&w.pow(e64))?;
                }
                if !acc.is_identity() {
                    return Err(Error::NotASection(format!(
                        "section does not kill relation column {j}"
                    )));
                }
            }
        }
        _ => {
            return Err(Error::NotASection(
                "section kind does not match the target kind".into(),
            ))
        }
    }
    Ok(SplitSection { fibre, section })
}

impl SplitSection {
    /// `γ₁ ↦ (γ₁, σπ₁(γ₁))`; the result always lies in the fibre product.
    pub fn apply(&self, gamma1: &[Word]) -> Result<Vec<Word>> {
        let q1 = &self.fibre.q1;
        let q2 = &self.fibre.q2;
        q1.domain().check_tuple(gamma1)?;
        let image = q1.eval_tuple(gamma1)?;
        let sigma = match (&self.section, q2.target()) {
            (SectionSpec::OnElements(words), Target::Finite(_)) => {
                let TargetElt::Finite(x) = image else {
                    return Err(Error::TargetMismatch);
                };
                words[x].clone()
            }
            (SectionSpec::OnBasis(words), Target::Abelian(a)) => {
                let TargetElt::Abelian(v) = image else {
                    return Err(Error::TargetMismatch);
                };
                let coords = a.canonical(&v);
                let mut acc = q2.domain().factor(0).identity();
                for (w, c) in words.iter().zip(&coords) {
                    let c64: i64 = c.to_string().parse().map_err(|_| {
                        Error::Limit("section exponent too large".into())
                    })?;
                    acc = acc.multiply(&w.pow(c64))?;
                }
                acc
            }
            _ => return Err(Error::Internal("section kind drifted".into())),
        };
        let mut tuple = gamma1.to_vec();
        tuple.push(sigma);
        debug_assert!(self.fibre.subgroup.membership(&tuple)?);
        Ok(tuple)
    }
}

// ---------------------------------------------------------------------------
// generating sets of fibre products
// ---------------------------------------------------------------------------

/// How a generating set was obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FibreCert {
    /// Finite target: Schreier generators certified by a coset
    /// enumeration reaching exactly `cosets` cosets.
    CosetEnumeration { cosets: usize },
    /// Abelian target of positive rank: the recipe emits lifts plus
    /// kernel data without an index certificate.
    ConstructedNotCertified { note: String },
}

#[derive(Clone, Debug)]
pub struct FibreGenerators {
    pub tuples: Vec<Vec<Word>>,
    pub certificate: FibreCert,
}

/// Generating tuples for the fibre product of `q1` and `q2`.
///
/// For a finite target the Schreier generators at index `|Q|` are
/// certified by the coset enumeration; for a finitely generated abelian
/// target the constructive recipe (lifts of the first-side generators
/// matched through the second map, plus normal generators of the
/// second kernel) is emitted uncertified.
pub fn fibre_generators(q1: &QuotientMap, q2: &QuotientMap) -> Result<FibreGenerators> {
    if q1.target() != q2.target() {
        return Err(Error::TargetMismatch);
    }
    if !q1.is_surjective() || !q2.is_surjective() {
        return Err(Error::NotSurjective);
    }
    match q1.target() {
        Target::Finite(g) => schreier_generators(q1, q2, g.order()),
        Target::Abelian(a) => {
            if a.invariants().is_finite() {
                let order = a.invariants().order().expect("finite");
                let order: usize = order
                    .to_string()
                    .parse()
                    .map_err(|_| Error::Limit("finite abelian target too large".into()))?;
                schreier_generators(q1, q2, order)
            } else {
                constructive_generators(q1, q2)
            }
        }
        Target::Nilpotent2(_) => Err(Error::Unsupported(
            "generating sets over class-2 targets are not produced".into(),
        )),
    }
}

/// Right-coset enumeration of the fibre product inside `Γ₁ × Γ₂`:
/// the coset of `(g₁, g₂)` is classified by `π₁(g₁)⁻¹ · π₂(g₂)`.
fn schreier_generators(
    q1: &QuotientMap,
    q2: &QuotientMap,
    expected: usize,
) -> Result<FibreGenerators> {
    let target = q1.target().clone();
    let mut factors = q1.domain().factors().to_vec();
    factors.extend(q2.domain().factors().iter().cloned());
    let ambient = ProductGroup::new(factors);

    // ambient generators with their action on coset labels
    let gens = ambient.generator_tuples();
    let act = |label: &TargetElt, gen_index: usize, invert: bool| -> Result<TargetElt> {
        // generator g sits in some factor; find its image on the correct side
        let (side, factor, g) = locate_generator(&ambient, q1, gen_index);
        let q = if side == 0 { q1 } else { q2 };
        let img = q.image_of_generator(factor, g).clone();
        let img = if invert { target.inv(&img)? } else { img };
        if side == 0 {
            // v ↦ π₁(x)⁻¹ · v
            target.mul(&target.inv(&img)?, label)
        } else {
            // v ↦ v · π₂(y)
            target.mul(label, &img)
        }
    };

    // breadth-first transversal over coset labels
    let mut labels: Vec<TargetElt> = vec![target.identity()];
    let mut reps: Vec<Vec<Word>> = vec![ambient.identity_tuple()];
    let mut tree: HashMap<usize, (usize, usize, bool)> = HashMap::new(); // state -> (parent, gen, inv)
    let find = |labels: &[TargetElt], x: &TargetElt, t: &Target| -> Result<Option<usize>> {
        for (i, l) in labels.iter().enumerate() {
            if t.eq_elements(l, x)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    };
    let mut head = 0;
    while head < labels.len() {
        let v = head;
        head += 1;
        for (gi, gen) in gens.iter().enumerate() {
            for inv in [false, true] {
                let next = act(&labels[v], gi, inv)?;
                if find(&labels, &next, &target)?.is_none() {
                    if labels.len() >= expected.max(1) * 4 + 16 {
                        return Err(Error::Internal(
                            "coset enumeration exceeded the expected bound".into(),
                        ));
                    }
                    labels.push(next);
                    let step = if inv {
                        ambient.invert_tuple(gen)?
                    } else {
                        gen.clone()
                    };
                    reps.push(ambient.mul_tuples(&reps[v], &step)?);
                    tree.insert(labels.len() - 1, (v, gi, inv));
                }
            }
        }
    }
    if labels.len() != expected {
        return Err(Error::Internal(format!(
            "coset enumeration reached {} cosets, expected {}",
            labels.len(),
            expected
        )));
    }
    // Schreier generators rep(v) · gen · rep(v · gen)⁻¹
    let mut tuples = Vec::new();
    for v in 0..labels.len() {
        for (gi, gen) in gens.iter().enumerate() {
            let next_label = act(&labels[v], gi, false)?;
            let w = find(&labels, &next_label, &target)?.expect("closed table");
            if let Some(&(parent, pg, pinv)) = tree.get(&w) {
                if parent == v && pg == gi && !pinv {
                    continue; // tree edge
                }
            }
            let s = ambient.mul_tuples(
                &ambient.mul_tuples(&reps[v], gen)?,
                &ambient.invert_tuple(&reps[w])?,
            )?;
            if !ambient.tuple_is_identity(&s) {
                tuples.push(s);
            }
        }
    }
    tuples.dedup();
    Ok(FibreGenerators {
        tuples,
        certificate: FibreCert::CosetEnumeration {
            cosets: labels.len(),
        },
    })
}

fn locate_generator(
    ambient: &ProductGroup,
    q1: &QuotientMap,
    gen_index: usize,
) -> (usize, usize, usize) {
    let n1 = q1.domain().n();
    let mut offset = 0;
    for (f, factor) in ambient.factors().iter().enumerate() {
        if gen_index < offset + factor.rank() {
            let g = gen_index - offset;
            return if f < n1 { (0, f, g) } else { (1, f - n1, g) };
        }
        offset += factor.rank();
    }
    unreachable!("generator index in range")
}

/// Constructive generating data for an abelian target of positive rank:
/// lifts `(xᵢ, wᵢ)` with `π₂(wᵢ) = π₁(xᵢ)` plus normal generators of
/// `1 × ker π₂`.
fn constructive_generators(q1: &QuotientMap, q2: &QuotientMap) -> Result<FibreGenerators> {
    if q1.domain().n() != 1 || q2.domain().n() != 1 {
        return Err(Error::Unsupported(
            "constructive generators need single-factor sides".into(),
        ));
    }
    let Target::Abelian(a) = q1.target() else {
        return Err(Error::TargetMismatch);
    };
    let g1 = q1.domain().factor(0).clone();
    let g2 = q2.domain().factor(0).clone();
    let m2 = q2.abelian_block(0).expect("abelian target");
    let rels = a.relation_basis();
    let solve_preimage = |v: &[BigInt]| -> Result<Word> {
        let stacked = m2.hcat(rels);
        let sol = solve_linear(&stacked, v)
            .ok_or_else(|| Error::Internal("surjective map must admit preimages".into()))?;
        let mut w = g2.identity();
        for (g, e) in sol.iter().take(m2.cols()).enumerate() {
            let e64: i64 = e
                .to_string()
                .parse()
                .map_err(|_| Error::Limit("preimage exponent too large".into()))?;
            w = w.multiply(&g2.generator(g)?.pow(e64))?;
        }
        Ok(w)
    };
    let mut tuples = Vec::new();
    for g in 0..g1.rank() {
        let x = g1.generator(g)?;
        let TargetElt::Abelian(v) = q1.eval_word(0, &x)? else {
            return Err(Error::TargetMismatch);
        };
        let w = solve_preimage(&v)?;
        tuples.push(vec![x, w]);
    }
    // kernel lattice of π₂ and the commutators of Γ₂ generators
    let kernel = col_kernel(&m2.hcat(rels));
    let mut kernel_cols = Vec::new();
    for j in 0..kernel.cols() {
        let col: Vec<BigInt> = (0..m2.cols()).map(|i| kernel[(i, j)].clone()).collect();
        if col.iter().all(|x| x.is_zero()) {
            continue;
        }
        kernel_cols.push(col);
    }
    let kernel_basis = if kernel_cols.is_empty() {
        IntMat::zeros(m2.cols(), 0)
    } else {
        col_lattice_basis(&IntMat::from_columns(&kernel_cols))
    };
    for j in 0..kernel_basis.cols() {
        let mut w = g2.identity();
        for g in 0..m2.cols() {
            let e64: i64 = kernel_basis[(g, j)]
                .to_string()
                .parse()
                .map_err(|_| Error::Limit("kernel exponent too large".into()))?;
            w = w.multiply(&g2.generator(g)?.pow(e64))?;
        }
        if !w.is_identity() {
            tuples.push(vec![g1.identity(), w]);
        }
    }
    for i in 0..g2.rank() {
        for j in i + 1..g2.rank() {
            let c = g2.generator(i)?.commutator(&g2.generator(j)?)?;
            tuples.push(vec![g1.identity(), c]);
        }
    }
    Ok(FibreGenerators {
        tuples,
        certificate: FibreCert::ConstructedNotCertified {
            note: "normal closure of the emitted second-kernel data is required; \
                   no finite certification is produced for targets of positive rank"
                .into(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cokernel_invariants;
    use crate::quotient::{AbelianGroup, FiniteGroup, IndexReport};
    use crate::word::FreeGroup;

    fn f2() -> FreeGroup {
        FreeGroup::new(2)
    }

    fn ab(vals: &[i64]) -> TargetElt {
        TargetElt::Abelian(vals.iter().map(|&v| BigInt::from(v)).collect())
    }

    fn mod2_map(g: &FreeGroup, images: &[i64]) -> QuotientMap {
        let a = AbelianGroup::cyclic_mod(2);
        QuotientMap::on_free_group(
            g.clone(),
            Target::Abelian(a),
            images.iter().map(|&v| ab(&[v])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn trivial_quotient_gives_the_whole_product() {
        let g = f2();
        let t = Target::Abelian(AbelianGroup::free(0));
        let q = QuotientMap::on_free_group(g.clone(), t.clone(), vec![ab(&[]), ab(&[])]).unwrap();
        let fp = fibre_product(&q, &q).unwrap();
        assert!(fp.subgroup.index_in_ambient().is_one());
        let tup = fp.subgroup.ambient().parse_tuple("a b; b^-1").unwrap();
        assert!(fp.subgroup.membership(&tup).unwrap());
    }

    #[test]
    fn rank_one_fibre_over_mod_two() {
        // Γ1 = Γ2 = <a> ≅ Z, Q = Z/2: P = {(x, y) : x ≡ y mod 2}
        let f1 = FreeGroup::new(1);
        let q = mod2_map(&f1, &[1]);
        let fp = fibre_product(&q, &q).unwrap();
        match fp.subgroup.index_in_ambient() {
            IndexReport::Finite(v) => assert_eq!(v, BigInt::from(2)),
            other => panic!("expected index 2, got {other}"),
        }
        for (text, expect) in [("a;a", true), ("a;1", false), ("a^3;a", true), ("a^2;1", true)] {
            let t = fp.subgroup.ambient().parse_tuple(text).unwrap();
            assert_eq!(fp.subgroup.membership(&t).unwrap(), expect, "{text}");
        }
    }

    #[test]
    fn f2_fibre_over_mod_two_image_equality() {
        let g = f2();
        let q = mod2_map(&g, &[1, 0]);
        let fp = fibre_product(&q, &q).unwrap();
        let p = &fp.subgroup;
        assert!(p.membership(&p.ambient().parse_tuple("a;a").unwrap()).unwrap());
        assert!(!p.membership(&p.ambient().parse_tuple("a;b").unwrap()).unwrap());
        assert!(p.membership(&p.ambient().parse_tuple("a b;b a").unwrap()).unwrap());
        match p.index_in_ambient() {
            IndexReport::Finite(v) => assert_eq!(v, BigInt::from(2), "index equals |Q|"),
            other => panic!("expected finite index, got {other}"),
        }
    }

    #[test]
    fn finite_target_fibre_matches_abelian_route() {
        // same fibre product over Z/2 represented with a finite target
        let g = f2();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let qf = QuotientMap::on_free_group(
            g.clone(),
            Target::Finite(z2),
            vec![TargetElt::Finite(1), TargetElt::Finite(0)],
        )
        .unwrap();
        let fp_fin = fibre_product(&qf, &qf).unwrap();
        let qa = mod2_map(&g, &[1, 0]);
        let fp_ab = fibre_product(&qa, &qa).unwrap();
        for text in ["a;a", "a;b", "b;1", "a b a; a^-1", "a b; b a"] {
            let t = fp_fin.subgroup.ambient().parse_tuple(text).unwrap();
            assert_eq!(
                fp_fin.subgroup.membership(&t).unwrap(),
                fp_ab.subgroup.membership(&t).unwrap(),
                "{text}"
            );
        }
    }

    #[test]
    fn mismatched_or_nonsurjective_maps_are_rejected() {
        let g = f2();
        let q2 = mod2_map(&g, &[1, 0]);
        let q3 = QuotientMap::on_free_group(
            g.clone(),
            Target::Abelian(AbelianGroup::cyclic_mod(3)),
            vec![ab(&[1]), ab(&[0])],
        )
        .unwrap();
        assert!(matches!(fibre_product(&q2, &q3), Err(Error::TargetMismatch)));
        let not_onto = QuotientMap::on_free_group(
            g.clone(),
            Target::Abelian(AbelianGroup::cyclic_mod(2)),
            vec![ab(&[0]), ab(&[0])],
        )
        .unwrap();
        assert!(matches!(fibre_product(&q2, &not_onto), Err(Error::NotSurjective)));
    }

    #[test]
    fn kernel_subgroup_of_mod2_map() {
        let g = f2();
        let q = mod2_map(&g, &[1, 0]);
        let k = kernel_subgroup(&q).unwrap();
        assert!(k.membership(&[g.parse("a^2").unwrap()]).unwrap());
        assert!(k.membership(&[g.parse("b").unwrap()]).unwrap());
        assert!(!k.membership(&[g.parse("a").unwrap()]).unwrap());
    }

    #[test]
    fn split_section_trivial_quotient() {
        let g = f2();
        let t = Target::Abelian(AbelianGroup::free(0));
        let q = QuotientMap::on_free_group(g.clone(), t, vec![ab(&[]), ab(&[])]).unwrap();
        let s = split_section(&q, &q, SectionSpec::OnBasis(vec![])).unwrap();
        let pair = s.apply(&[g.parse("a b a").unwrap()]).unwrap();
        assert_eq!(pair[1], g.identity());
        assert!(s.fibre.subgroup.membership(&pair).unwrap());
    }

    #[test]
    fn split_section_over_z() {
        // Γ2 = <t> ↠ Z = Q with σ(1) = t; pairs (γ1, t^{π1(γ1)}) lie in P
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let g1 = f2();
        let g2 = FreeGroup::with_labels(vec!["t".into()]).unwrap();
        let z = Target::Abelian(AbelianGroup::free(1));
        let q1 = QuotientMap::on_free_group(g1.clone(), z.clone(), vec![ab(&[1]), ab(&[1])]).unwrap();
        let q2 = QuotientMap::on_free_group(g2.clone(), z, vec![ab(&[1])]).unwrap();
        let s = split_section(&q1, &q2, SectionSpec::OnBasis(vec![g2.parse("t").unwrap()])).unwrap();
        let mut rng = StdRng::seed_from_u64(61);
        for _ in 0..50 {
            let len = rng.random_range(0..=8);
            let raw: Vec<crate::word::Letter> = (0..len)
                .map(|_| crate::word::Letter {
                    gen: rng.random_range(0..2),
                    inv: rng.random_bool(0.5),
                })
                .collect();
            let w = g1.reduce(raw).unwrap();
            let pair = s.apply(&[w.clone()]).unwrap();
            assert!(s.fibre.subgroup.membership(&pair).unwrap());
            // restriction to N1 is the identity embedding
            if q1.eval_word(0, &w).unwrap() == ab(&[0]) {
                assert!(pair[1].is_identity());
            }
        }
    }

    #[test]
    fn split_section_rejects_non_sections() {
        let g1 = f2();
        let g2 = FreeGroup::with_labels(vec!["t".into()]).unwrap();
        let z = Target::Abelian(AbelianGroup::free(1));
        let q1 = QuotientMap::on_free_group(g1.clone(), z.clone(), vec![ab(&[1]), ab(&[1])]).unwrap();
        let q2 = QuotientMap::on_free_group(g2.clone(), z, vec![ab(&[1])]).unwrap();
        let bad = split_section(&q1, &q2, SectionSpec::OnBasis(vec![g2.parse("t^2").unwrap()]));
        assert!(matches!(bad, Err(Error::NotASection(_))));
    }

    #[test]
    fn schreier_generators_for_trivial_quotient_are_the_generators() {
        let g = f2();
        let t = Target::Abelian(AbelianGroup::free(0));
        let q = QuotientMap::on_free_group(g.clone(), t, vec![ab(&[]), ab(&[])]).unwrap();
        let r = fibre_generators(&q, &q).unwrap();
        assert_eq!(r.certificate, FibreCert::CosetEnumeration { cosets: 1 });
        let amb = ProductGroup::new(vec![g.clone(), g.clone()]);
        let expected = amb.generator_tuples();
        assert_eq!(r.tuples, expected);
    }

    #[test]
    fn schreier_generators_generate_the_mod2_sublattice_of_z2() {
        // Z ↠ Z/2 on both sides: abelianised generators span an
        // index-2 sublattice of Z^2 (Smith-normal-form certificate)
        let f1 = FreeGroup::new(1);
        let q = mod2_map(&f1, &[1]);
        let r = fibre_generators(&q, &q).unwrap();
        assert_eq!(r.certificate, FibreCert::CosetEnumeration { cosets: 2 });
        let amb = ProductGroup::new(vec![f1.clone(), f1.clone()]);
        let cols: Vec<Vec<BigInt>> = r.tuples.iter().map(|t| amb.ab_stack(t)).collect();
        let mat = IntMat::from_columns(&cols);
        let inv = cokernel_invariants(&mat);
        assert_eq!(inv.free_rank, 0);
        assert_eq!(inv.order(), Some(BigInt::from(2)));
    }

    #[test]
    fn schreier_generators_close_to_the_fibre_product_over_mod2() {
        let g = f2();
        let q = mod2_map(&g, &[1, 0]);
        let fp = fibre_product(&q, &q).unwrap();
        let r = fibre_generators(&q, &q).unwrap();
        assert_eq!(r.certificate, FibreCert::CosetEnumeration { cosets: 2 });
        for t in &r.tuples {
            assert!(fp.subgroup.membership(t).unwrap(), "generator outside P");
        }
        // products of generators stay inside P
        let amb = fp.subgroup.ambient().clone();
        for x in &r.tuples {
            for y in &r.tuples {
                let prod = amb.mul_tuples(x, y).unwrap();
                assert!(fp.subgroup.membership(&prod).unwrap());
            }
        }
    }

    #[test]
    fn constructive_generators_over_z() {
        let g = f2();
        let z = Target::Abelian(AbelianGroup::free(1));
        let q = QuotientMap::on_free_group(g.clone(), z, vec![ab(&[1]), ab(&[1])]).unwrap();
        let r = fibre_generators(&q, &q).unwrap();
        assert!(matches!(r.certificate, FibreCert::ConstructedNotCertified { .. }));
        let fp = fibre_product(&q, &q).unwrap();
        for t in &r.tuples {
            assert!(fp.subgroup.membership(t).unwrap(), "generator outside P");
        }
    }
}

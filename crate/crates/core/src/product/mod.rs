//! Subgroups of direct products of free groups in kernel/equalizer
//! representation: projections, intersections, virtual surjection to
//! `k`-tuples, the exchange identity and the iterated fibre-product
//! decomposition.
//!
//! Membership for arbitrary finitely generated subgroups of a product of
//! free groups is undecidable, so a subgroup is only ever *defined* by
//! constraint clauses over computable quotients.  Generator lists occur
//! as output (Schreier generators of fibre products), never as input.

mod clause;
mod decompose;
mod fibre;

pub use clause::{AbelianClause, Clause, FiniteClause, NilpEqClause, NilpKernelClause};
pub use decompose::{
    reconstruct_from_quotient_maps, Decomposition, QuotientDesc, SubgroupBlockMap,
    SubgroupFiniteMap,
};
pub use fibre::{
    equalizer_subgroup, fibre_generators, fibre_product, kernel_subgroup, split_section,
    FibreCert, FibreGenerators, FibreProduct, Middle, SectionSpec, SesMap, ShortExactData,
    SplitSection,
};

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::quotient::IndexReport;
use crate::word::{FreeGroup, Word};

/// Hard cap on the number of factors for subset enumeration
/// (`C(12,6) = 924` subsets).
pub const MAX_FACTORS_DEFAULT: usize = 12;

/// A direct product of finitely generated free groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductGroup {
    factors: Vec<FreeGroup>,
}

impl ProductGroup {
    pub fn new(factors: Vec<FreeGroup>) -> ProductGroup {
        assert!(!factors.is_empty(), "a product needs at least one factor");
        ProductGroup { factors }
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, i: usize) -> &FreeGroup {
        &self.factors[i]
    }

    pub fn factors(&self) -> &[FreeGroup] {
        &self.factors
    }

    pub fn total_rank(&self) -> usize {
        self.factors.iter().map(|f| f.rank()).sum()
    }

    pub fn identity_tuple(&self) -> Vec<Word> {
        self.factors.iter().map(|f| f.identity()).collect()
    }

    /// Every ambient generator as a tuple (identity in the other
    /// coordinates), in factor order.
    pub fn generator_tuples(&self) -> Vec<Vec<Word>> {
        let mut out = Vec::new();
        for (i, f) in self.factors.iter().enumerate() {
            for g in 0..f.rank() {
                let mut t = self.identity_tuple();
                t[i] = f.generator(g).expect("valid generator");
                out.push(t);
            }
        }
        out
    }

    /// Parse a semicolon-separated tuple, e.g. `a b ; b^-1 ; 1`.
    pub fn parse_tuple(&self, text: &str) -> Result<Vec<Word>> {
        let parts: Vec<&str> = text.split(';').collect();
        if parts.len() != self.n() {
            return Err(Error::Arity(format!(
                "tuple has {} coordinates, product has {} factors",
                parts.len(),
                self.n()
            )));
        }
        parts
            .iter()
            .zip(&self.factors)
            .map(|(p, f)| f.parse(p))
            .collect()
    }

    pub fn check_tuple(&self, tuple: &[Word]) -> Result<()> {
        if tuple.len() != self.n() {
            return Err(Error::Arity(format!(
                "tuple length {} does not match {} factors",
                tuple.len(),
                self.n()
            )));
        }
        for (w, f) in tuple.iter().zip(&self.factors) {
            if w.group() != f {
                return Err(Error::GroupMismatch);
            }
        }
        Ok(())
    }

    /// Stacked exponent-sum vector of a tuple.
    pub fn ab_stack(&self, tuple: &[Word]) -> Vec<BigInt> {
        let mut v = Vec::with_capacity(self.total_rank());
        for w in tuple {
            v.extend(w.abelianize());
        }
        v
    }

    /// The sub-product on the given (strictly increasing) factor indices.
    pub fn sub_product(&self, subset: &[usize]) -> ProductGroup {
        ProductGroup::new(subset.iter().map(|&i| self.factors[i].clone()).collect())
    }

    /// Multiply tuples componentwise.
    pub fn mul_tuples(&self, x: &[Word], y: &[Word]) -> Result<Vec<Word>> {
        self.check_tuple(x)?;
        self.check_tuple(y)?;
        x.iter().zip(y).map(|(a, b)| a.multiply(b)).collect()
    }

    pub fn invert_tuple(&self, x: &[Word]) -> Result<Vec<Word>> {
        self.check_tuple(x)?;
        Ok(x.iter().map(|w| w.invert()).collect())
    }

    pub fn tuple_is_identity(&self, x: &[Word]) -> bool {
        x.iter().all(|w| w.is_identity())
    }

    pub fn display_tuple(&self, x: &[Word]) -> String {
        x.iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(" ; ")
    }
}

/// How a clause system can be normalised for index computations.
#[derive(Clone, Debug)]
pub enum Normalized {
    /// All clauses abelian, merged into a single kernel clause.
    Abelian(AbelianClause),
    /// All clauses finite, merged into a single finite-image clause.
    Finite(FiniteClause),
    /// Mixed or class-2 clause systems; index machinery reports Unknown.
    Mixed(String),
}

/// A subgroup of a product of free groups, represented by constraint
/// clauses; membership is decided by evaluating every clause.
#[derive(Clone, Debug)]
pub struct ProductSubgroup {
    ambient: ProductGroup,
    clauses: Vec<Clause>,
    subdirect: Option<bool>,
}

/// Result of a virtual-surjection check.
#[derive(Clone, Debug)]
pub struct VsReport {
    pub k: usize,
    pub outcome: VsOutcome,
    /// Per-subset index of `p_J(P)` in `Γ_J` (1-based indices in display).
    pub table: Vec<(Vec<usize>, IndexReport)>,
}

#[derive(Clone, Debug)]
pub enum VsOutcome {
    Holds,
    Fails {
        violating: Vec<usize>,
        certificate: IndexReport,
    },
    Unknown {
        subset: Vec<usize>,
        reason: String,
    },
}

impl VsReport {
    pub fn holds(&self) -> bool {
        matches!(self.outcome, VsOutcome::Holds)
    }
}

/// Both sides of the exchange identity `p_{I∩J}(P ∩ Γ_I) = p_J(P) ∩ Γ_{I∩J}`.
#[derive(Clone, Debug)]
pub struct ExchangeReport {
    pub lhs: ProductSubgroup,
    pub rhs: ProductSubgroup,
    pub meet: Vec<usize>,
    pub equal: bool,
}

/// Index table for the kernel step `N_{1,…,n−1}` at level `k−1`.
#[derive(Clone, Debug)]
pub struct KernelStepReport {
    pub holds: bool,
    pub kernel_report: VsReport,
}

impl ProductSubgroup {
    pub fn from_clauses(ambient: ProductGroup, clauses: Vec<Clause>) -> Result<ProductSubgroup> {
        for c in &clauses {
            c.check_ambient(&ambient)?;
        }
        let mut p = ProductSubgroup {
            ambient,
            clauses,
            subdirect: None,
        };
        p.subdirect = p.compute_subdirect();
        Ok(p)
    }

    pub(crate) fn with_subdirect_hint(
        ambient: ProductGroup,
        clauses: Vec<Clause>,
        subdirect: bool,
    ) -> Result<ProductSubgroup> {
        for c in &clauses {
            c.check_ambient(&ambient)?;
        }
        Ok(ProductSubgroup {
            ambient,
            clauses,
            subdirect: Some(subdirect),
        })
    }

    /// Kernel of a block integer matrix `M = (M₁ | … | Mₙ)` acting on
    /// stacked exponent vectors, i.e. `ker(γ ↦ Σ Mᵢ·ab(γᵢ))` in `ℤ^d`.
    pub fn abelian_kernel(ambient: ProductGroup, matrix: &crate::linalg::IntMat) -> Result<ProductSubgroup> {
        let clause = AbelianClause::from_block_matrix(&ambient, matrix)?;
        Self::from_clauses(ambient, vec![Clause::Abelian(clause)])
    }

    pub fn whole_product(ambient: ProductGroup) -> ProductSubgroup {
        let n = ambient.n();
        let clause = AbelianClause::trivial(&ambient);
        let mut p = ProductSubgroup {
            ambient,
            clauses: vec![Clause::Abelian(clause)],
            subdirect: Some(true),
        };
        debug_assert_eq!(p.ambient.n(), n);
        p.subdirect = Some(true);
        p
    }

    pub fn ambient(&self) -> &ProductGroup {
        &self.ambient
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// `Some(true)` when every projection to a single factor was verified
    /// surjective on construction; `None` when the representation does
    /// not support the check.
    pub fn is_subdirect(&self) -> Option<bool> {
        self.subdirect
    }

    fn compute_subdirect(&self) -> Option<bool> {
        // index computations stay at the clause level here so that
        // projection (which re-derives the flag on its result) cannot
        // recurse
        match self.normalized() {
            Normalized::Mixed(_) => None,
            Normalized::Abelian(a) => {
                for i in 0..self.ambient.n() {
                    let (_, report) = a.project(&self.ambient, &[i]);
                    if !report.is_one() {
                        return Some(false);
                    }
                }
                Some(true)
            }
            Normalized::Finite(f) => {
                for i in 0..self.ambient.n() {
                    match f.project(&[i]) {
                        Ok((_, report)) => {
                            if !report.is_one() {
                                return Some(false);
                            }
                        }
                        Err(_) => return None,
                    }
                }
                Some(true)
            }
        }
    }

    /// Merge the clause system into a single normal form when possible.
    pub fn normalized(&self) -> Normalized {
        let mut abelian: Vec<&AbelianClause> = Vec::new();
        let mut finite: Vec<&FiniteClause> = Vec::new();
        for c in &self.clauses {
            match c {
                Clause::Abelian(a) => abelian.push(a),
                Clause::Finite(f) => finite.push(f),
                Clause::NilpEq(_) | Clause::NilpKernel(_) => {
                    return Normalized::Mixed("class-2 clauses present".into())
                }
            }
        }
        match (abelian.is_empty(), finite.is_empty()) {
            (true, false) => match FiniteClause::merge_all(&self.ambient, &finite) {
                Ok(f) => Normalized::Finite(f),
                Err(e) => Normalized::Mixed(format!("finite merge failed: {e}")),
            },
            (_, true) => Normalized::Abelian(AbelianClause::merge_all(&self.ambient, &abelian)),
            (false, false) => {
                Normalized::Mixed("abelian and finite clauses in one system".into())
            }
        }
    }

    /// Exact membership by evaluating every clause.
    pub fn membership(&self, tuple: &[Word]) -> Result<bool> {
        self.ambient.check_tuple(tuple)?;
        for c in &self.clauses {
            if !c.holds(tuple)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The projection `p_J(P)` as a subgroup of `Γ_J`, with the index of
    /// `p_J(P)` in `Γ_J`.
    pub fn projection(&self, subset: &[usize]) -> Result<(ProductSubgroup, IndexReport)> {
        self.check_subset(subset)?;
        let sub_ambient = self.ambient.sub_product(subset);
        match self.normalized() {
            Normalized::Abelian(a) => {
                let (clause, index) = a.project(&self.ambient, subset);
                let p = ProductSubgroup {
                    ambient: sub_ambient,
                    clauses: vec![Clause::Abelian(clause)],
                    subdirect: None,
                };
                Ok((fill_subdirect(p), index))
            }
            Normalized::Finite(f) => {
                let (clause, index) = f.project(subset)?;
                let p = ProductSubgroup {
                    ambient: sub_ambient,
                    clauses: vec![Clause::Finite(clause)],
                    subdirect: None,
                };
                Ok((fill_subdirect(p), index))
            }
            Normalized::Mixed(reason) => Err(Error::Unsupported(format!(
                "projection needs a pure abelian or pure finite clause system ({reason})"
            ))),
        }
    }

    /// Index of `p_J(P)` in `Γ_J`, reporting Unknown instead of failing
    /// on unsupported representations.
    pub fn projection_index(&self, subset: &[usize]) -> IndexReport {
        match self.projection(subset) {
            Ok((_, report)) => report,
            Err(e) => IndexReport::Unknown {
                reason: e.to_string(),
            },
        }
    }

    /// The intersection `N_J = P ∩ Γ_J` as a subgroup of `Γ_J`.
    pub fn intersection(&self, subset: &[usize]) -> Result<ProductSubgroup> {
        self.check_subset(subset)?;
        let sub_ambient = self.ambient.sub_product(subset);
        let mut clauses = Vec::new();
        for c in &self.clauses {
            if let Some(r) = c.restrict(&self.ambient, subset)? {
                clauses.push(r);
            }
        }
        ProductSubgroup::from_clauses(sub_ambient, clauses)
    }

    /// Index of `P` itself in the ambient product.
    pub fn index_in_ambient(&self) -> IndexReport {
        let full: Vec<usize> = (0..self.ambient.n()).collect();
        self.projection_index(&full)
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::Empty("factor subset"));
        }
        if subset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("subset must be strictly increasing".into()));
        }
        if *subset.last().unwrap() >= self.ambient.n() {
            return Err(Error::Precondition("subset index out of range".into()));
        }
        Ok(())
    }

    /// Does `P` virtually surject to `k`-tuples of factors?
    pub fn virtually_surjects(&self, k: usize) -> Result<VsReport> {
        self.virtually_surjects_with_cap(k, MAX_FACTORS_DEFAULT)
    }

    pub fn virtually_surjects_with_cap(&self, k: usize, max_factors: usize) -> Result<VsReport> {
        let n = self.ambient.n();
        if k == 0 || k > n {
            return Err(Error::Precondition(format!(
                "k = {k} must satisfy 1 <= k <= {n}"
            )));
        }
        if n > max_factors {
            return Err(Error::Limit(format!(
                "{n} factors exceed the subset enumeration cap {max_factors}"
            )));
        }
        let mut table = Vec::new();
        let mut outcome = VsOutcome::Holds;
        for subset in k_subsets(n, k) {
            let report = self.projection_index(&subset);
            match &report {
                IndexReport::Finite(_) => {}
                IndexReport::Infinite { .. } => {
                    if matches!(outcome, VsOutcome::Holds | VsOutcome::Unknown { .. }) {
                        outcome = VsOutcome::Fails {
                            violating: subset.clone(),
                            certificate: report.clone(),
                        };
                    }
                }
                IndexReport::Unknown { reason } => {
                    if matches!(outcome, VsOutcome::Holds) {
                        outcome = VsOutcome::Unknown {
                            subset: subset.clone(),
                            reason: reason.clone(),
                        };
                    }
                }
            }
            table.push((subset, report));
        }
        Ok(VsReport { k, outcome, table })
    }

    /// Both sides of `p_{I∩J}(P ∩ Γ_I) = p_J(P) ∩ Γ_{I∩J}` together with
    /// the equality verdict.  Inequality is an implementation fault.
    pub fn exchange(&self, i_set: &[usize], j_set: &[usize]) -> Result<ExchangeReport> {
        self.check_subset(i_set)?;
        self.check_subset(j_set)?;
        let n = self.ambient.n();
        let union: std::collections::BTreeSet<usize> =
            i_set.iter().chain(j_set).copied().collect();
        if union.len() != n {
            return Err(Error::Precondition("I ∪ J must be the full index set".into()));
        }
        let meet: Vec<usize> = i_set
            .iter()
            .copied()
            .filter(|x| j_set.contains(x))
            .collect();
        if meet.is_empty() {
            return Err(Error::Precondition("I ∩ J must be non-empty".into()));
        }
        // lhs: restrict to Γ_I, then project to the positions of I∩J in I
        let n_i = self.intersection(i_set)?;
        let meet_in_i: Vec<usize> = meet
            .iter()
            .map(|x| i_set.iter().position(|y| y == x).unwrap())
            .collect();
        let (lhs, _) = n_i.projection(&meet_in_i)?;
        // rhs: project to Γ_J, then intersect with Γ_{I∩J}
        let (p_j, _) = self.projection(j_set)?;
        let meet_in_j: Vec<usize> = meet
            .iter()
            .map(|x| j_set.iter().position(|y| y == x).unwrap())
            .collect();
        let rhs = p_j.intersection(&meet_in_j)?;
        let equal = subgroup_eq(&lhs, &rhs)?;
        Ok(ExchangeReport {
            lhs,
            rhs,
            meet,
            equal,
        })
    }

    /// Verifies that `N_{1,…,n−1}` virtually surjects to `(k−1)`-tuples,
    /// assuming `P` virtually surjects to `k`-tuples.
    pub fn kernel_vs_step(&self, k: usize) -> Result<KernelStepReport> {
        if k < 2 {
            return Err(Error::Precondition("kernel step needs k >= 2".into()));
        }
        let own = self.virtually_surjects(k)?;
        if !own.holds() {
            return Err(Error::Precondition(format!(
                "P does not virtually surject to {k}-tuples"
            )));
        }
        let first: Vec<usize> = (0..self.ambient.n() - 1).collect();
        if first.is_empty() {
            return Err(Error::Precondition("need at least two factors".into()));
        }
        let kernel = self.intersection(&first)?;
        let report = kernel.virtually_surjects(k - 1)?;
        Ok(KernelStepReport {
            holds: report.holds(),
            kernel_report: report,
        })
    }

    /// Iterated decomposition step `T := p_{1,…,n−1}(P)` with the two
    /// short exact sequences it fits into.
    pub fn decompose(&self) -> Result<Decomposition> {
        decompose::decompose(self)
    }
}

fn fill_subdirect(mut p: ProductSubgroup) -> ProductSubgroup {
    p.subdirect = p.compute_subdirect();
    p
}

/// Decide equality of two kernel-represented subgroups of the same
/// ambient product.
pub fn subgroup_eq(a: &ProductSubgroup, b: &ProductSubgroup) -> Result<bool> {
    if a.ambient() != b.ambient() {
        return Err(Error::GroupMismatch);
    }
    match (a.normalized(), b.normalized()) {
        (Normalized::Abelian(x), Normalized::Abelian(y)) => {
            Ok(x.defining_lattice(a.ambient()) == y.defining_lattice(b.ambient()))
        }
        (Normalized::Finite(x), Normalized::Finite(y)) => x.equal_subgroups(&y),
        _ => Err(Error::Unsupported(
            "subgroup equality needs matching pure representations".into(),
        )),
    }
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let need = k - cur.len();
        for i in start..=n.saturating_sub(need) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::IntMat;
    use crate::quotient::{AbelianGroup, FiniteGroup, QuotientMap, Target, TargetElt};

    fn f2() -> FreeGroup {
        FreeGroup::new(2)
    }

    /// ker(F₂³ → ℤ), every generator to 1.
    fn stallings3() -> ProductSubgroup {
        let ambient = ProductGroup::new(vec![f2(), f2(), f2()]);
        let m = IntMat::from_rows_i64(&[vec![1, 1, 1, 1, 1, 1]]);
        ProductSubgroup::abelian_kernel(ambient, &m).unwrap()
    }

    #[test]
    fn membership_examples() {
        let p = stallings3();
        let t = p.ambient().parse_tuple("1;1;1").unwrap();
        assert!(p.membership(&t).unwrap());
        let t = p.ambient().parse_tuple("a;a^-1;1").unwrap();
        assert!(p.membership(&t).unwrap());
        let t = p.ambient().parse_tuple("a;1;1").unwrap();
        assert!(!p.membership(&t).unwrap());
        assert!(p
            .membership(&p.ambient().parse_tuple("a;1").unwrap_or_default())
            .is_err());
        assert_eq!(p.is_subdirect(), Some(true));
    }

    #[test]
    fn subgroup_closure_under_products() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let p = stallings3();
        let g = p.ambient().clone();
        let mut rng = StdRng::seed_from_u64(51);
        let mut member_tuples = Vec::new();
        // harvest members by randomly balancing exponent sums
        while member_tuples.len() < 20 {
            let words: Vec<Word> = (0..3)
                .map(|i| {
                    let len = rng.random_range(0..6);
                    let raw: Vec<crate::word::Letter> = (0..len)
                        .map(|_| crate::word::Letter {
                            gen: rng.random_range(0..2),
                            inv: rng.random_bool(0.5),
                        })
                        .collect();
                    g.factor(i).reduce(raw).unwrap()
                })
                .collect();
            if p.membership(&words).unwrap() {
                member_tuples.push(words);
            }
        }
        for x in &member_tuples {
            for y in &member_tuples {
                let prod = g.mul_tuples(x, y).unwrap();
                assert!(p.membership(&prod).unwrap());
            }
        }
    }

    #[test]
    fn projection_indices_for_the_three_factor_kernel() {
        let p = stallings3();
        // pairs project onto the full sub-product
        let (pj, report) = p.projection(&[0, 1]).unwrap();
        assert!(report.is_one());
        assert_eq!(pj.ambient().n(), 2);
        // the full projection is P itself, of infinite index
        assert!(matches!(
            p.index_in_ambient(),
            IndexReport::Infinite { cokernel_free_rank: 1 }
        ));
        // projection is P on the full subset: same membership
        let (full, _) = p.projection(&[0, 1, 2]).unwrap();
        for text in ["a;a^-1;1", "a b;1;b^-1 a^-1", "a;1;1", "a b a;b;1"] {
            let t = p.ambient().parse_tuple(text).unwrap();
            assert_eq!(
                p.membership(&t).unwrap(),
                full.membership(&t).unwrap(),
                "tuple {text}"
            );
        }
    }

    #[test]
    fn symmetric_fibre_over_z_has_infinite_self_index_but_full_projections() {
        // P = {(γ1, γ2) : e(γ1) = e(γ2)} in F2 x F2
        let ambient = ProductGroup::new(vec![f2(), f2()]);
        let m = IntMat::from_rows_i64(&[vec![1, 1, -1, -1]]);
        let p = ProductSubgroup::abelian_kernel(ambient, &m).unwrap();
        let (_, single) = p.projection(&[0]).unwrap();
        assert!(single.is_one());
        assert!(matches!(
            p.index_in_ambient(),
            IndexReport::Infinite { .. }
        ));
    }

    #[test]
    fn intersection_examples() {
        let p = stallings3();
        // N_1 = ker(F2 -> Z): contains a b^-1, not a
        let n1 = p.intersection(&[0]).unwrap();
        let f = n1.ambient().factor(0).clone();
        assert!(n1.membership(&[f.parse("a b^-1").unwrap()]).unwrap());
        assert!(!n1.membership(&[f.parse("a").unwrap()]).unwrap());
        // full intersection is P
        let full = p.intersection(&[0, 1, 2]).unwrap();
        let t = p.ambient().parse_tuple("a;b^-1;1").unwrap();
        assert_eq!(p.membership(&t).unwrap(), full.membership(&t).unwrap());
    }

    #[test]
    fn intersection_of_mod2_fibre_in_rank_one_factors() {
        // fibre product over Z/2 inside Z x Z: N_2 = 2Z
        let f1 = FreeGroup::new(1);
        let ambient = ProductGroup::new(vec![f1.clone(), f1.clone()]);
        let z2 = AbelianGroup::cyclic_mod(2);
        let clause = AbelianClause::new(
            Target2Helper::target(&z2),
            vec![
                IntMat::from_rows_i64(&[vec![1]]),
                IntMat::from_rows_i64(&[vec![-1]]),
            ],
        );
        let p =
            ProductSubgroup::from_clauses(ambient, vec![Clause::Abelian(clause)]).unwrap();
        let n2 = p.intersection(&[1]).unwrap();
        let f = n2.ambient().factor(0).clone();
        assert!(n2.membership(&[f.parse("a^2").unwrap()]).unwrap());
        assert!(!n2.membership(&[f.parse("a").unwrap()]).unwrap());
        assert!(n2.membership(&[f.parse("a^-4").unwrap()]).unwrap());
    }

    // small helper so tests can build abelian clauses tersely
    struct Target2Helper;
    impl Target2Helper {
        fn target(a: &AbelianGroup) -> AbelianGroup {
            a.clone()
        }
    }

    #[test]
    fn virtual_surjection_table() {
        let p = stallings3();
        let r2 = p.virtually_surjects(2).unwrap();
        assert!(r2.holds());
        assert_eq!(r2.table.len(), 3);
        let r3 = p.virtually_surjects(3).unwrap();
        match &r3.outcome {
            VsOutcome::Fails {
                violating,
                certificate,
            } => {
                assert_eq!(violating, &vec![0, 1, 2]);
                assert!(matches!(certificate, IndexReport::Infinite { .. }));
            }
            other => panic!("expected failure with certificate, got {other:?}"),
        }
        // subdirect means k = 1 always holds
        assert!(stallings3().virtually_surjects(1).unwrap().holds());
    }

    #[test]
    fn exchange_identity_on_fixed_cases() {
        let p = stallings3();
        let full: Vec<usize> = vec![0, 1, 2];
        let r = p.exchange(&full, &full).unwrap();
        assert!(r.equal);
        let r = p.exchange(&[0, 1], &[1, 2]).unwrap();
        assert!(r.equal);
        assert_eq!(r.meet, vec![1]);
        assert!(p.exchange(&[0], &[1]).is_err(), "union must be everything");
        assert!(p.exchange(&[0, 1], &[2]).is_err(), "meet must be non-empty");
    }

    #[test]
    fn kernel_step_for_the_three_factor_kernel() {
        let p = stallings3();
        let r = p.kernel_vs_step(2).unwrap();
        assert!(r.holds);
        assert!(r.kernel_report.table.iter().all(|(_, idx)| idx.is_one()));
    }

    #[test]
    fn kernel_step_over_finite_quotient() {
        // fibre product over Z/2 in F2 x F2: N_1 has index |Q| = 2 in F2
        let g = f2();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let q1 = QuotientMap::on_free_group(
            g.clone(),
            Target::Finite(z2.clone()),
            vec![TargetElt::Finite(1), TargetElt::Finite(0)],
        )
        .unwrap();
        let q2 = q1.clone();
        let fp = fibre_product(&q1, &q2).unwrap();
        let r = fp.subgroup.kernel_vs_step(2).unwrap();
        assert!(r.holds);
        match &r.kernel_report.table[0].1 {
            IndexReport::Finite(q) => assert_eq!(q, &BigInt::from(2)),
            other => panic!("expected finite index 2, got {other}"),
        }
    }

    #[test]
    fn whole_product_has_index_one_everywhere() {
        let amb = ProductGroup::new(vec![f2(), f2()]);
        let p = ProductSubgroup::whole_product(amb);
        assert!(p.index_in_ambient().is_one());
        assert!(p.virtually_surjects(2).unwrap().holds());
    }

    #[test]
    fn zero_block_kernel_still_passes_kernel_step() {
        // M = (1 1 | 1 1 | 1 1 | 0 0): last factor unconstrained.  Every
        // pair projection sees a nonzero complementary block, so the
        // quotient condition is finite and P still surjects virtually to
        // pairs.
        let ambient = ProductGroup::new(vec![f2(), f2(), f2(), f2()]);
        let m = IntMat::from_rows_i64(&[vec![1, 1, 1, 1, 1, 1, 0, 0]]);
        let p = ProductSubgroup::abelian_kernel(ambient, &m).unwrap();
        assert!(p.virtually_surjects(2).unwrap().holds());
        let r = p.kernel_vs_step(2).unwrap();
        assert!(r.holds);
        // with only three factors the pair that misses the zero block
        // has infinite-index image
        let ambient = ProductGroup::new(vec![f2(), f2(), f2()]);
        let m = IntMat::from_rows_i64(&[vec![1, 1, 0, 0, 1, 1]]);
        let p = ProductSubgroup::abelian_kernel(ambient, &m).unwrap();
        match p.virtually_surjects(2).unwrap().outcome {
            VsOutcome::Fails { violating, .. } => assert_eq!(violating, vec![0, 2]),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}

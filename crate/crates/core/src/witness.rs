//! Constructive nilpotency witnesses for quotients `Γ₁/N₁` of subdirect
//! products that virtually surject to `k`-tuples: partitioning the
//! remaining indices, solving for lifts with prescribed trivial
//! coordinates, building the iterated commutator that lands in `N₁`,
//! and the kernel-of-an-abelian-map normal form available when
//! `2k > n`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{solve_linear, IntMat};
use crate::product::{Normalized, ProductSubgroup};
use crate::quotient::{AbelianGroup, ClassResult, FiniteGroup};
use crate::stallings::SubgroupGraph;
use crate::word::{iterated_commutator, Word};

/// Default word-length cap for bounded searches in finite quotients.
pub const DEFAULT_LIFT_CAP: usize = 12;

/// `⌈(n−1)/(k−1)⌉ − 1`, the nilpotency class bound for the quotients
/// `Γᵢ/Nᵢ` of a subdirect product of `n` factors virtually surjecting
/// to `k`-tuples.
pub fn class_bound(n: usize, k: usize) -> Result<u32> {
    if n < 2 {
        return Err(Error::Precondition("class bound needs n >= 2".into()));
    }
    if k < 2 || k > n {
        return Err(Error::Precondition("class bound needs 2 <= k <= n".into()));
    }
    let s = (n - 1).div_ceil(k - 1);
    Ok((s - 1) as u32)
}

/// Deterministic partition of the factor indices `{1, …, n−1}`
/// (0-based: all but factor 0) into consecutive blocks of size at most
/// `k − 1`.
pub fn partition_indices(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if n < 2 || k < 2 {
        return Err(Error::Precondition("partition needs n >= 2 and k >= 2".into()));
    }
    let mut out = Vec::new();
    let mut next = 1;
    while next < n {
        let end = (next + (k - 1)).min(n);
        out.push((next..end).collect());
        next = end;
    }
    Ok(out)
}

/// Outcome of a lift search.
#[derive(Clone, Debug)]
pub enum LiftOutcome {
    Found(Vec<Word>),
    /// The element lies outside the finite-index subgroup the witness
    /// construction works in; not an implementation fault.
    NotInDomain(String),
    CapExceeded(String),
    Unsupported(String),
}

/// Find `g ∈ P` with `p₁(g) = γ` (factor 0) and `p_i(g) = 1` for every
/// `i` in `trivial_at`.
pub fn find_lift(
    p: &ProductSubgroup,
    gamma: &Word,
    trivial_at: &[usize],
    cap: usize,
) -> Result<LiftOutcome> {
    let ambient = p.ambient();
    let n = ambient.n();
    if gamma.group() != ambient.factor(0) {
        return Err(Error::GroupMismatch);
    }
    if trivial_at.contains(&0) || trivial_at.iter().any(|&i| i >= n) {
        return Err(Error::Precondition(
            "trivial coordinates must avoid factor 0 and stay in range".into(),
        ));
    }
    let free: Vec<usize> = (1..n).filter(|i| !trivial_at.contains(i)).collect();
    let outcome = match p.normalized() {
        Normalized::Abelian(clause) => {
            let target = clause.target();
            let d = target.gens();
            // solve Σ_{j free} M_j · u_j = −M₀·ab(γ)  (mod L)
            let mut system = IntMat::zeros(d, 0);
            for &j in &free {
                system = system.hcat(&clause.blocks()[j]);
            }
            system = system.hcat(target.relation_basis());
            let rhs: Vec<BigInt> = clause.blocks()[0]
                .mul_vec(&gamma.abelianize())
                .into_iter()
                .map(|x| -x)
                .collect();
            match solve_linear(&system, &rhs) {
                None => LiftOutcome::NotInDomain(format!(
                    "no exponent solution for the coordinates outside {{0}} ∪ {trivial_at:?}"
                )),
                Some(sol) => {
                    let mut tuple = ambient.identity_tuple();
                    tuple[0] = gamma.clone();
                    let mut offset = 0;
                    for &j in &free {
                        let factor = ambient.factor(j);
                        let mut w = factor.identity();
                        for g in 0..factor.rank() {
                            let e = &sol[offset + g];
                            let e64: i64 = e.to_string().parse().map_err(|_| {
                                Error::Limit("lift exponent exceeds machine range".into())
                            })?;
                            w = w.multiply(&factor.generator(g)?.pow(e64))?;
                        }
                        tuple[j] = w;
                        offset += factor.rank();
                    }
                    LiftOutcome::Found(tuple)
                }
            }
        }
        Normalized::Finite(clause) => {
            let s0 = {
                let t = &clause.targets()[0];
                let mut acc = t.identity();
                for l in gamma.letters() {
                    let img = clause.images_of_factor(0)[l.gen];
                    acc = t.mul(acc, if l.inv { t.inv(img) } else { img });
                }
                acc
            };
            let pick = clause.allowed().iter().find(|tup| {
                tup[0] == s0
                    && trivial_at
                        .iter()
                        .all(|&i| tup[i] == clause.targets()[i].identity())
            });
            match pick {
                None => LiftOutcome::NotInDomain(
                    "no allowed image tuple matches the prescribed coordinates".into(),
                ),
                Some(tup) => {
                    let mut tuple = ambient.identity_tuple();
                    tuple[0] = gamma.clone();
                    let mut failed = None;
                    for &j in &free {
                        match word_with_image(
                            ambient.factor(j),
                            &clause.targets()[j],
                            clause.images_of_factor(j),
                            tup[j],
                            cap,
                        )? {
                            Some(w) => tuple[j] = w,
                            None => {
                                failed = Some(j);
                                break;
                            }
                        }
                    }
                    match failed {
                        Some(j) => LiftOutcome::CapExceeded(format!(
                            "no word of length <= {cap} realises the required image in factor {}",
                            j + 1
                        )),
                        None => LiftOutcome::Found(tuple),
                    }
                }
            }
        }
        Normalized::Mixed(reason) => LiftOutcome::Unsupported(format!(
            "lift search needs a pure abelian or pure finite system ({reason})"
        )),
    };
    if let LiftOutcome::Found(tuple) = &outcome {
        if !p.membership(tuple)? {
            return Err(Error::Internal("constructed lift fails membership".into()));
        }
    }
    Ok(outcome)
}

/// Breadth-first search for a word with a prescribed image in a finite
/// quotient.
fn word_with_image(
    factor: &crate::word::FreeGroup,
    target: &FiniteGroup,
    images: &[usize],
    goal: usize,
    cap: usize,
) -> Result<Option<Word>> {
    if goal == target.identity() {
        return Ok(Some(factor.identity()));
    }
    let mut parent: std::collections::HashMap<usize, (usize, crate::word::Letter)> =
        std::collections::HashMap::new();
    let mut depth: std::collections::HashMap<usize, usize> =
        std::collections::HashMap::new();
    depth.insert(target.identity(), 0);
    let mut queue = std::collections::VecDeque::from([target.identity()]);
    while let Some(x) = queue.pop_front() {
        let dx = depth[&x];
        if dx >= cap {
            continue;
        }
        for g in 0..factor.rank() {
            for inv in [false, true] {
                let img = images[g];
                let y = target.mul(x, if inv { target.inv(img) } else { img });
                if let std::collections::hash_map::Entry::Vacant(e) = depth.entry(y) {
                    e.insert(dx + 1);
                    parent.insert(y, (x, crate::word::Letter { gen: g, inv }));
                    if y == goal {
                        // reconstruct
                        let mut letters = Vec::new();
                        let mut at = y;
                        while at != target.identity() {
                            let (prev, l) = parent[&at];
                            letters.push(l);
                            at = prev;
                        }
                        letters.reverse();
                        return Ok(Some(factor.reduce(letters)?));
                    }
                    queue.push_back(y);
                }
            }
        }
    }
    Ok(None)
}

/// Full record of one witness construction.
#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub n: usize,
    pub k: usize,
    /// Partition of the 0-based indices `{1, …, n−1}`.
    pub partition: Vec<Vec<usize>>,
    pub gammas: Vec<Word>,
    pub lifts: Vec<Vec<Word>>,
    /// The iterated commutator of the lifts.
    pub c_prime: Vec<Word>,
    /// Its first coordinate, the iterated commutator of the `γ`s.
    pub c: Word,
    /// `c ∈ N₁`; must be true whenever the preconditions hold.
    pub verdict: bool,
    /// Lower central class of `Γ₁/N₁` when the representation supports
    /// computing it.
    pub quotient_class: Option<ClassResult>,
    pub class_bound: u32,
}

impl fmt::Display for WitnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "factors: {}", self.n)?;
        writeln!(f, "k: {}", self.k)?;
        let parts: Vec<String> = self
            .partition
            .iter()
            .map(|p| {
                let ids: Vec<String> = p.iter().map(|i| (i + 1).to_string()).collect();
                format!("{{{}}}", ids.join(","))
            })
            .collect();
        writeln!(f, "partition: {}", parts.join(" "))?;
        for (m, (g, lift)) in self.gammas.iter().zip(&self.lifts).enumerate() {
            writeln!(f, "gamma_{}: {}", m + 1, g)?;
            let coords: Vec<String> = lift.iter().map(|w| w.to_string()).collect();
            writeln!(f, "lift_{}: {}", m + 1, coords.join(" ; "))?;
        }
        let coords: Vec<String> = self.c_prime.iter().map(|w| w.to_string()).collect();
        writeln!(f, "commutator-tuple: {}", coords.join(" ; "))?;
        writeln!(f, "commutator: {}", self.c)?;
        writeln!(f, "class-bound: {}", self.class_bound)?;
        if let Some(c) = &self.quotient_class {
            writeln!(f, "quotient-class: {c}")?;
        }
        writeln!(f, "verdict: {}", if self.verdict { "true" } else { "false" })
    }
}

/// Build the depth-`s` commutator witness for `γ₁, …, γ_s` with the
/// deterministic consecutive partition.
pub fn commutator_witness(
    p: &ProductSubgroup,
    k: usize,
    gammas: &[Word],
) -> Result<WitnessReport> {
    let n = p.ambient().n();
    let partition = partition_indices(n, k)?;
    commutator_witness_with_partition(p, k, gammas, partition)
}

/// Same construction with a caller-supplied partition of `{1, …, n−1}`
/// into blocks of size at most `k − 1`.
pub fn commutator_witness_with_partition(
    p: &ProductSubgroup,
    k: usize,
    gammas: &[Word],
    partition: Vec<Vec<usize>>,
) -> Result<WitnessReport> {
    let n = p.ambient().n();
    let bound = class_bound(n, k)?;
    // validate the partition
    let mut seen = vec![false; n];
    for block in &partition {
        if block.is_empty() || block.len() > k - 1 {
            return Err(Error::Precondition(
                "partition blocks must be non-empty of size <= k-1".into(),
            ));
        }
        for &i in block {
            if i == 0 || i >= n || seen[i] {
                return Err(Error::Precondition("partition must cover {1,…,n−1} once".into()));
            }
            seen[i] = true;
        }
    }
    if !seen[1..].iter().all(|&x| x) {
        return Err(Error::Precondition("partition must cover {1,…,n−1}".into()));
    }
    let s = partition.len();
    if gammas.len() != s {
        return Err(Error::Arity(format!(
            "need one word per partition block ({} blocks, {} words)",
            s,
            gammas.len()
        )));
    }
    if p.is_subdirect() != Some(true) {
        return Err(Error::Precondition("P must be a verified subdirect product".into()));
    }
    let vs = p.virtually_surjects(k)?;
    if !vs.holds() {
        return Err(Error::Precondition(format!(
            "P does not virtually surject to {k}-tuples"
        )));
    }
    let mut lifts = Vec::new();
    for (gamma, block) in gammas.iter().zip(&partition) {
        match find_lift(p, gamma, block, DEFAULT_LIFT_CAP)? {
            LiftOutcome::Found(t) => lifts.push(t),
            LiftOutcome::NotInDomain(msg) => {
                return Err(Error::Precondition(format!(
                    "gamma = {gamma} lies outside the finite-index domain subgroup: {msg}"
                )))
            }
            LiftOutcome::CapExceeded(msg) => return Err(Error::Limit(msg)),
            LiftOutcome::Unsupported(msg) => return Err(Error::Unsupported(msg)),
        }
    }
    // componentwise iterated commutator
    let ambient = p.ambient();
    let mut c_prime = Vec::new();
    for i in 0..n {
        let coords: Vec<Word> = lifts.iter().map(|t| t[i].clone()).collect();
        c_prime.push(iterated_commutator(&coords)?);
    }
    for (i, w) in c_prime.iter().enumerate().skip(1) {
        if !w.is_identity() {
            return Err(Error::Internal(format!(
                "commutator tuple has a nontrivial coordinate {}",
                i + 1
            )));
        }
    }
    if !p.membership(&c_prime)? {
        return Err(Error::Internal("commutator tuple escaped P".into()));
    }
    let c = c_prime[0].clone();
    let mut embed = ambient.identity_tuple();
    embed[0] = c.clone();
    let verdict = p.membership(&embed)?;
    let quotient_class = first_factor_quotient_class(p);
    Ok(WitnessReport {
        n,
        k,
        partition,
        gammas: gammas.to_vec(),
        lifts,
        c_prime,
        c,
        verdict,
        quotient_class,
        class_bound: bound,
    })
}

/// Lower central class of `Γ₁/N₁` read off the representation.
pub fn first_factor_quotient_class(p: &ProductSubgroup) -> Option<ClassResult> {
    match p.normalized() {
        Normalized::Abelian(clause) => {
            let cols: Vec<Vec<BigInt>> = {
                let b = &clause.blocks()[0];
                (0..b.cols()).map(|j| b.column(j)).collect()
            };
            let trivial = cols
                .iter()
                .all(|c| clause.target().is_zero_element(c));
            Some(if trivial {
                ClassResult::Class(0)
            } else {
                ClassResult::Class(1)
            })
        }
        Normalized::Finite(clause) => {
            let quotient = finite_factor_quotient(&clause, 0).ok()?;
            Some(quotient.lower_central_class())
        }
        Normalized::Mixed(_) => None,
    }
}

/// `Γᵢ/Nᵢ` for a finite clause system: the image subgroup of factor `i`
/// modulo `{q : the tuple with q at i and 1 elsewhere is allowed}`.
fn finite_factor_quotient(
    clause: &crate::product::FiniteClause,
    factor: usize,
) -> Result<FiniteGroup> {
    let targets = clause.targets();
    let image = clause.factor_image(factor).to_vec();
    let idents: Vec<usize> = targets.iter().map(|t| t.identity()).collect();
    let kernel: Vec<usize> = image
        .iter()
        .copied()
        .filter(|&q| {
            let mut tup = idents.clone();
            tup[factor] = q;
            clause.allowed().contains(&tup)
        })
        .collect();
    let (im_group, old_to_new) = restrict_to_subgroup(&targets[factor], &image)?;
    let kernel_new: Vec<usize> = kernel.iter().map(|&x| old_to_new[&x]).collect();
    let (q, _) = im_group.quotient(&kernel_new)?;
    Ok(q)
}

fn restrict_to_subgroup(
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
            table[i][j] = *old_to_new
                .get(&z)
                .ok_or_else(|| Error::Internal("image list is not closed".into()))?;
        }
    }
    Ok((FiniteGroup::from_table(table)?, old_to_new))
}

// ---------------------------------------------------------------------------
// the kernel-of-an-abelian-map normal form (2k > n)
// ---------------------------------------------------------------------------

/// Finite-index subgroups `Γᵢ⁰ ≤ Γᵢ`, an abelian group `A` and a map
/// `φ: ∏ Γᵢ⁰ → A` with `P ∩ ∏ Γᵢ⁰ = ker φ`.
#[derive(Clone, Debug)]
pub struct StallingsBieriForm {
    pub gamma0: Vec<SubgroupGraph>,
    pub a: AbelianGroup,
    kind: SbKind,
}

#[derive(Clone, Debug)]
enum SbKind {
    /// Already a kernel of an abelian map: the identity transformation.
    Abelian {
        clause: crate::product::AbelianClause,
    },
    Finite {
        clause: crate::product::FiniteClause,
        /// per factor: coset in `Q̄ᵢ` of each image element
        coset: Vec<std::collections::HashMap<usize, usize>>,
        /// per factor: the abelian subgroup `Aᵢ ≤ Q̄ᵢ`
        abelian_part: Vec<Vec<usize>>,
        /// coordinates in `A` of each element tuple of `∏ Aᵢ`
        coords: std::collections::HashMap<Vec<usize>, Vec<BigInt>>,
    },
}

impl StallingsBieriForm {
    /// Is the tuple inside the domain `∏ Γᵢ⁰`?
    pub fn contains_in_domain(&self, tuple: &[Word]) -> Result<bool> {
        for (g, w) in self.gamma0.iter().zip(tuple) {
            if !g.contains(w)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `φ(tuple)` as coordinates in `A`; requires domain membership.
    pub fn phi(&self, tuple: &[Word]) -> Result<Vec<BigInt>> {
        if !self.contains_in_domain(tuple)? {
            return Err(Error::Precondition("tuple outside the finite-index domain".into()));
        }
        match &self.kind {
            SbKind::Abelian { clause } => {
                let mut acc = clause.target().zero();
                for (b, w) in clause.blocks().iter().zip(tuple) {
                    let img = b.mul_vec(&w.abelianize());
                    acc = clause.target().add(&acc, &img);
                }
                Ok(self.a.canonical(&acc))
            }
            SbKind::Finite {
                clause,
                coset,
                abelian_part,
                coords,
            } => {
                let mut key = Vec::new();
                for (i, w) in tuple.iter().enumerate() {
                    let t = &clause.targets()[i];
                    let mut acc = t.identity();
                    for l in w.letters() {
                        let img = clause.images_of_factor(i)[l.gen];
                        acc = t.mul(acc, if l.inv { t.inv(img) } else { img });
                    }
                    let c = coset[i][&acc];
                    let pos = abelian_part[i]
                        .iter()
                        .position(|&x| x == c)
                        .ok_or_else(|| Error::Internal("image escaped the abelian part".into()))?;
                    key.push(pos);
                }
                coords
                    .get(&key)
                    .cloned()
                    .ok_or_else(|| Error::Internal("missing coordinate entry".into()))
            }
        }
    }

    pub fn in_kernel(&self, tuple: &[Word]) -> Result<bool> {
        Ok(self.a.is_zero_element(&self.phi(tuple)?))
    }
}

/// Normal form of a subdirect product virtually surjecting to
/// `k`-tuples with `2k > n`: the quotients `Γᵢ/Nᵢ` are virtually
/// abelian and `P` is virtually the kernel of a map to an abelian
/// group.
pub fn stallings_bieri_form(p: &ProductSubgroup, k: usize) -> Result<StallingsBieriForm> {
    let n = p.ambient().n();
    if 2 * k <= n {
        return Err(Error::Precondition(format!(
            "normal form needs 2k > n (k = {k}, n = {n})"
        )));
    }
    if p.is_subdirect() != Some(true) {
        return Err(Error::Precondition("P must be a verified subdirect product".into()));
    }
    if !p.virtually_surjects(k)?.holds() {
        return Err(Error::Precondition(format!(
            "P does not virtually surject to {k}-tuples"
        )));
    }
    match p.normalized() {
        Normalized::Abelian(clause) => {
            let gamma0 = p
                .ambient()
                .factors()
                .iter()
                .map(SubgroupGraph::whole_group)
                .collect();
            let a = clause.target().clone();
            Ok(StallingsBieriForm {
                gamma0,
                a,
                kind: SbKind::Abelian { clause },
            })
        }
        Normalized::Finite(clause) => stallings_bieri_finite(p, clause),
        Normalized::Mixed(reason) => Err(Error::Unsupported(format!(
            "normal form needs a pure abelian or pure finite system ({reason})"
        ))),
    }
}

fn stallings_bieri_finite(
    p: &ProductSubgroup,
    clause: crate::product::FiniteClause,
) -> Result<StallingsBieriForm> {
    let ambient = p.ambient();
    let n = ambient.n();
    let mut gamma0 = Vec::new();
    let mut coset_maps = Vec::new();
    let mut abelian_parts = Vec::new();
    let mut part_groups: Vec<FiniteGroup> = Vec::new();
    for i in 0..n {
        let image = clause.factor_image(i).to_vec();
        let (im_group, old_to_new) = restrict_to_subgroup(&clause.targets()[i], &image)?;
        let idents: Vec<usize> = clause.targets().iter().map(|t| t.identity()).collect();
        let kernel_new: Vec<usize> = image
            .iter()
            .copied()
            .filter(|&q| {
                let mut tup = idents.clone();
                tup[i] = q;
                clause.allowed().contains(&tup)
            })
            .map(|q| old_to_new[&q])
            .collect();
        let (qbar, to_coset) = im_group.quotient(&kernel_new)?;
        // abelian subgroup of the quotient along the derived series
        let a_i = qbar.abelian_in_derived_series();
        // Γᵢ⁰ = preimage of the abelian part; build its graph from the
        // right-coset action of Γᵢ on A_i-cosets in Q̄ᵢ
        let (reps, coset_of) = cosets_of_subgroup(&qbar, &a_i)?;
        let mut action = Vec::new();
        for g in 0..ambient.factor(i).rank() {
            let img = old_to_new[&clause.images_of_factor(i)[g]];
            let img_coset_elt = to_coset[img];
            let perm: Vec<usize> = reps
                .iter()
                .map(|&r| coset_of[qbar.mul(r, img_coset_elt)])
                .collect();
            action.push(perm);
        }
        let graph = SubgroupGraph::from_coset_action(ambient.factor(i), reps.len(), &action)?;
        gamma0.push(graph);
        // coset (in Q̄ᵢ) of each raw image element
        let mut coset_map = std::collections::HashMap::new();
        for &x in &image {
            coset_map.insert(x, to_coset[old_to_new[&x]]);
        }
        coset_maps.push(coset_map);
        abelian_parts.push(a_i);
        part_groups.push(qbar);
    }
    // elements of ∏ Aᵢ as position tuples; S_A = images of allowed
    // tuples that lie in ∏ (preimage of Aᵢ)
    let sizes: Vec<usize> = abelian_parts.iter().map(|a| a.len()).collect();
    let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
    for &s in &sizes {
        let mut next = Vec::new();
        for t in &tuples {
            for x in 0..s {
                let mut u = t.clone();
                u.push(x);
                next.push(u);
            }
        }
        tuples = next;
    }
    let mut s_a: std::collections::BTreeSet<Vec<usize>> = std::collections::BTreeSet::new();
    for allowed in clause.allowed() {
        let mut key = Vec::new();
        let mut ok = true;
        for i in 0..n {
            let c = coset_maps[i][&allowed[i]];
            match abelian_parts[i].iter().position(|&x| x == c) {
                Some(pos) => key.push(pos),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            s_a.insert(key);
        }
    }
    // the quotient (∏ Aᵢ) / S_A as a finite abelian group
    let tuple_index: std::collections::HashMap<Vec<usize>, usize> = tuples
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    let mul_tuple = |x: &[usize], y: &[usize]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let a = abelian_parts[i][x[i]];
                let b = abelian_parts[i][y[i]];
                let prod = part_groups[i].mul(a, b);
                abelian_parts[i]
                    .iter()
                    .position(|&e| e == prod)
                    .expect("abelian part is closed")
            })
            .collect()
    };
    let table: Vec<Vec<usize>> = tuples
        .iter()
        .map(|x| tuples.iter().map(|y| tuple_index[&mul_tuple(x, y)]).collect())
        .collect();
    let prod_group = FiniteGroup::from_table(table)?;
    let s_a_ids: Vec<usize> = s_a.iter().map(|t| tuple_index[t]).collect();
    let closure = prod_group.closure(&s_a_ids);
    let (quot, to_class) = prod_group.quotient(&closure)?;
    let (a, elt_coords) = abelian_presentation(&quot)?;
    let coords: std::collections::HashMap<Vec<usize>, Vec<BigInt>> = tuples
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), elt_coords[to_class[i]].clone()))
        .collect();
    Ok(StallingsBieriForm {
        gamma0,
        a,
        kind: SbKind::Finite {
            clause,
            coset: coset_maps,
            abelian_part: abelian_parts,
            coords,
        },
    })
}

/// Right-coset decomposition of a subgroup: representatives plus the
/// coset index of every element.
fn cosets_of_subgroup(g: &FiniteGroup, subgroup: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let nelts = g.order();
    let mut coset_of = vec![usize::MAX; nelts];
    let mut reps = Vec::new();
    for x in 0..nelts {
        if coset_of[x] != usize::MAX {
            continue;
        }
        let c = reps.len();
        reps.push(x);
        for &h in subgroup {
            coset_of[g.mul(h, x)] = c;
        }
        if coset_of[x] != c {
            return Err(Error::Internal("subgroup list is not a subgroup".into()));
        }
    }
    Ok((reps, coset_of))
}

/// Present a finite abelian group as `ℤ^g / L` and give each element
/// its coordinate vector.
fn abelian_presentation(g: &FiniteGroup) -> Result<(AbelianGroup, Vec<Vec<BigInt>>)> {
    if !g.is_abelian() {
        return Err(Error::Precondition("group is not abelian".into()));
    }
    // greedy generating set
    let mut gens: Vec<usize> = Vec::new();
    let mut have = g.closure(&gens);
    for x in 0..g.order() {
        if have.binary_search(&x).is_err() {
            gens.push(x);
            have = g.closure(&gens);
        }
    }
    let ng = gens.len();
    // breadth-first coordinates and closing-edge relations
    let mut coord: Vec<Option<Vec<BigInt>>> = vec![None; g.order()];
    coord[g.identity()] = Some(vec![BigInt::zero(); ng]);
    let mut queue = std::collections::VecDeque::from([g.identity()]);
    let mut relations: Vec<Vec<BigInt>> = Vec::new();
    while let Some(x) = queue.pop_front() {
        let cx = coord[x].clone().unwrap();
        for (j, &gen) in gens.iter().enumerate() {
            let y = g.mul(x, gen);
            let mut cy = cx.clone();
            cy[j] += 1;
            match &coord[y] {
                None => {
                    coord[y] = Some(cy);
                    queue.push_back(y);
                }
                Some(existing) => {
                    let rel: Vec<BigInt> =
                        cy.iter().zip(existing).map(|(a, b)| a - b).collect();
                    if rel.iter().any(|v| !v.is_zero()) {
                        relations.push(rel);
                    }
                }
            }
        }
    }
    let rels = if relations.is_empty() {
        IntMat::zeros(ng, 0)
    } else {
        IntMat::from_columns(&relations)
    };
    let a = AbelianGroup::from_relation_columns(ng, &rels);
    let coords = coord
        .into_iter()
        .map(|c| c.expect("group is connected under its generators"))
        .collect();
    Ok((a, coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::product::{fibre_product, ProductGroup, ProductSubgroup};
    use crate::quotient::{Nilpotent2Group, QuotientMap, Target, TargetElt};
    use crate::stallings::SubgroupIndex;
    use crate::word::FreeGroup;

    fn f2() -> FreeGroup {
        FreeGroup::new(2)
    }

    fn stallings3() -> ProductSubgroup {
        let ambient = ProductGroup::new(vec![f2(), f2(), f2()]);
        let m = IntMat::from_rows_i64(&[vec![1, 1, 1, 1, 1, 1]]);
        ProductSubgroup::abelian_kernel(ambient, &m).unwrap()
    }

    #[test]
    fn class_bound_values() {
        assert_eq!(class_bound(3, 2).unwrap(), 1);
        assert_eq!(class_bound(4, 2).unwrap(), 2);
        assert_eq!(class_bound(5, 3).unwrap(), 1);
        assert_eq!(class_bound(2, 2).unwrap(), 0);
        // k > n/2 puts the bound in the abelian regime
        for n in 2..=8 {
            for k in 2..=n {
                if 2 * k > n {
                    assert!(class_bound(n, k).unwrap() <= 1, "(n,k) = ({n},{k})");
                    if k < n {
                        assert_eq!(class_bound(n, k).unwrap(), 1, "(n,k) = ({n},{k})");
                    }
                }
            }
        }
        assert!(class_bound(3, 1).is_err());
    }

    #[test]
    fn partition_examples() {
        // factors are 0-based internally: {1,…,n−1}
        assert_eq!(partition_indices(3, 2).unwrap(), vec![vec![1], vec![2]]);
        assert_eq!(partition_indices(4, 2).unwrap(), vec![vec![1], vec![2], vec![3]]);
        assert_eq!(partition_indices(5, 3).unwrap(), vec![vec![1, 2], vec![3, 4]]);
        let p = partition_indices(9, 4).unwrap();
        assert_eq!(p.iter().map(|b| b.len()).sum::<usize>(), 8);
        assert!(p.iter().all(|b| b.len() <= 3));
    }

    #[test]
    fn lift_examples_for_the_stallings_kernel() {
        let p = stallings3();
        let g = f2();
        // exponent-sum zero: (γ, 1, 1) works
        match find_lift(&p, &g.parse("a b^-1").unwrap(), &[1], DEFAULT_LIFT_CAP).unwrap() {
            LiftOutcome::Found(t) => {
                assert_eq!(t[0], g.parse("a b^-1").unwrap());
                assert!(t[1].is_identity());
                assert!(t[2].is_identity());
            }
            other => panic!("expected a lift, got {other:?}"),
        }
        // γ = a: the free third coordinate absorbs the exponent sum
        match find_lift(&p, &g.parse("a").unwrap(), &[1], DEFAULT_LIFT_CAP).unwrap() {
            LiftOutcome::Found(t) => {
                assert_eq!(t[0], g.parse("a").unwrap());
                assert!(t[1].is_identity());
                assert_eq!(t[2], g.parse("a^-1").unwrap());
                assert!(p.membership(&t).unwrap());
            }
            other => panic!("expected a lift, got {other:?}"),
        }
    }

    #[test]
    fn lift_fails_cleanly_outside_the_domain() {
        // ker(F2 x F2 -> Z, all generators to 1): with the second factor
        // pinned to 1 only exponent-sum-zero words lift
        let ambient = ProductGroup::new(vec![f2(), f2()]);
        let m = IntMat::from_rows_i64(&[vec![1, 1, 1, 1]]);
        let p = ProductSubgroup::abelian_kernel(ambient, &m).unwrap();
        let g = f2();
        match find_lift(&p, &g.parse("a").unwrap(), &[1], DEFAULT_LIFT_CAP).unwrap() {
            LiftOutcome::NotInDomain(_) => {}
            other => panic!("expected NotInDomain, got {other:?}"),
        }
    }

    #[test]
    fn witness_for_the_stallings_kernel() {
        let p = stallings3();
        let g = f2();
        let r = commutator_witness(&p, 2, &[g.parse("a").unwrap(), g.parse("b").unwrap()]).unwrap();
        assert!(r.verdict);
        assert_eq!(r.c, g.parse("a b a^-1 b^-1").unwrap());
        assert_eq!(r.class_bound, 1);
        assert_eq!(r.quotient_class, Some(ClassResult::Class(1)));
        // every non-first coordinate of the commutator tuple is trivial
        assert!(r.c_prime[1].is_identity() && r.c_prime[2].is_identity());
    }

    #[test]
    fn witness_with_identity_entry_is_trivially_inside() {
        let p = stallings3();
        let g = f2();
        let r = commutator_witness(&p, 2, &[g.identity(), g.parse("b a").unwrap()]).unwrap();
        assert!(r.verdict);
        assert!(r.c.is_identity());
    }

    #[test]
    fn witness_with_a_random_partition() {
        let p = stallings3();
        let g = f2();
        // the lemma allows any partition; use the reversed one
        let r = commutator_witness_with_partition(
            &p,
            2,
            &[g.parse("b").unwrap(), g.parse("a b").unwrap()],
            vec![vec![2], vec![1]],
        )
        .unwrap();
        assert!(r.verdict);
    }

    #[test]
    fn witness_precondition_failures_are_distinct() {
        let p = stallings3();
        let g = f2();
        // wrong arity
        assert!(matches!(
            commutator_witness(&p, 2, &[g.parse("a").unwrap()]),
            Err(Error::Arity(_))
        ));
        // not virtually surjecting to 3-tuples (k = 3 gives one block)
        assert!(matches!(
            commutator_witness(&p, 3, &[g.parse("a").unwrap()]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn heisenberg_quotient_witness_depth_three() {
        // n = 4, k = 2, quotient of the first factor is the mod-3
        // Heisenberg group (class exactly 2 = the bound): the clause
        // equalises factors 1 and 2 over the finite class-2 group
        let n2 = Nilpotent2Group::new(2);
        let h27 = n2.finite_quotient(3).unwrap();
        let g = f2();
        let q = QuotientMap::on_free_group(
            g.clone(),
            Target::Finite(h27.clone()),
            vec![
                TargetElt::Finite(h27.generators()[0]),
                TargetElt::Finite(h27.generators()[1]),
            ],
        )
        .unwrap();
        let fp = fibre_product(&q, &q).unwrap();
        // widen to four factors: the extra two factors are unconstrained
        let clause = fp.subgroup.clauses()[0].clone();
        let ambient = ProductGroup::new(vec![f2(), f2(), f2(), f2()]);
        let widened = match clause {
            crate::product::Clause::Finite(f) => {
                let mut targets = f.targets().to_vec();
                targets.push(crate::quotient::FiniteGroup::trivial());
                targets.push(crate::quotient::FiniteGroup::trivial());
                let mut images: Vec<Vec<usize>> =
                    (0..2).map(|i| f.images_of_factor(i).to_vec()).collect();
                images.push(vec![0, 0]);
                images.push(vec![0, 0]);
                let allowed = f
                    .allowed()
                    .iter()
                    .map(|t| {
                        let mut u = t.clone();
                        u.push(0);
                        u.push(0);
                        u
                    })
                    .collect();
                crate::product::FiniteClause::new(targets, images, allowed).unwrap()
            }
            _ => unreachable!("finite target gives a finite clause"),
        };
        let p = ProductSubgroup::from_clauses(
            ambient,
            vec![crate::product::Clause::Finite(widened)],
        )
        .unwrap();
        assert_eq!(p.is_subdirect(), Some(true));
        assert!(p.virtually_surjects(2).unwrap().holds());
        assert_eq!(class_bound(4, 2).unwrap(), 2);
        // depth-2 commutators do NOT all die in Q ...
        let c2 = q
            .eval_word(0, &g.parse("a b a^-1 b^-1").unwrap())
            .unwrap();
        assert!(!q.target().is_identity(&c2).unwrap());
        // ... matching the class-2 model, where triple brackets die
        let x = n2.generator(0);
        let y = n2.generator(1);
        assert!(!n2.is_identity(&n2.commutator(&x, &y)));
        assert!(n2.is_identity(&n2.commutator(&x, &n2.commutator(&x, &y))));
        // the equalizer couples factors 1 and 2, so the finite-index
        // domain subgroup of the construction is ker π₁; cubes land
        // there because every element of the mod-3 group has order
        // dividing 9 with cubes central and (xy)³ trivial in it
        for text in ["a^3", "b^3"] {
            let img = q.eval_word(0, &g.parse(text).unwrap()).unwrap();
            assert!(q.target().is_identity(&img).unwrap(), "{text}");
        }
        let r = commutator_witness(
            &p,
            2,
            &[
                g.parse("a^3").unwrap(),
                g.parse("b^3").unwrap(),
                g.parse("a b a b a b").unwrap(),
            ],
        )
        .unwrap();
        assert!(r.verdict);
        assert_eq!(r.quotient_class, Some(ClassResult::Class(2)));
        assert_eq!(r.class_bound, 2);
    }

    #[test]
    fn normal_form_is_the_identity_on_abelian_kernels() {
        let p = stallings3();
        let f = stallings_bieri_form(&p, 2).unwrap();
        assert!(f
            .gamma0
            .iter()
            .all(|g| g.index() == SubgroupIndex::Finite(1)));
        let t = p.ambient().parse_tuple("a;b^-1;1").unwrap();
        assert_eq!(f.in_kernel(&t).unwrap(), p.membership(&t).unwrap());
        let t = p.ambient().parse_tuple("a;a;a").unwrap();
        assert_eq!(f.in_kernel(&t).unwrap(), p.membership(&t).unwrap());
    }

    #[test]
    fn normal_form_over_mod_two() {
        use crate::quotient::FiniteGroup;
        let g = f2();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let q = QuotientMap::on_free_group(
            g.clone(),
            Target::Finite(z2),
            vec![TargetElt::Finite(1), TargetElt::Finite(0)],
        )
        .unwrap();
        let fp = fibre_product(&q, &q).unwrap();
        let f = stallings_bieri_form(&fp.subgroup, 2).unwrap();
        // Q is already abelian, so the finite-index subgroups are everything
        assert!(f
            .gamma0
            .iter()
            .all(|g| g.index() == SubgroupIndex::Finite(1)));
        assert_eq!(f.a.invariants().torsion, vec![BigInt::from(2)]);
        // kernel agreement on samples
        for text in ["a;a", "a;b", "b;b", "a b;b a", "a;1"] {
            let t = fp.subgroup.ambient().parse_tuple(text).unwrap();
            assert_eq!(
                f.in_kernel(&t).unwrap(),
                fp.subgroup.membership(&t).unwrap(),
                "{text}"
            );
        }
    }

    #[test]
    fn normal_form_over_s3() {
        use crate::quotient::FiniteGroup;
        let g = f2();
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let q = QuotientMap::on_free_group(
            g.clone(),
            Target::Finite(s3.clone()),
            vec![
                TargetElt::Finite(s3.generators()[0]),
                TargetElt::Finite(s3.generators()[1]),
            ],
        )
        .unwrap();
        let fp = fibre_product(&q, &q).unwrap();
        let f = stallings_bieri_form(&fp.subgroup, 2).unwrap();
        // Γᵢ⁰ is the preimage of A3, of index 2
        assert!(f
            .gamma0
            .iter()
            .all(|g| g.index() == SubgroupIndex::Finite(2)));
        assert_eq!(f.a.invariants().free_rank, 0);
        assert_eq!(f.a.invariants().torsion, vec![BigInt::from(3)]);
        // membership in P ∩ ∏Γᵢ⁰ coincides with ker φ on samples: words
        // with image in A3 on both sides
        let samples = [
            "a b;a b",
            "a b;b a",
            "b a;a b",
            "a b a b;a b",
            "a^2;b^2",
            "a b^-1; b^-1 a",
        ];
        for text in samples {
            let t = fp.subgroup.ambient().parse_tuple(text).unwrap();
            if f.contains_in_domain(&t).unwrap() {
                assert_eq!(
                    f.in_kernel(&t).unwrap(),
                    fp.subgroup.membership(&t).unwrap(),
                    "{text}"
                );
            }
        }
        assert!(matches!(
            stallings_bieri_form(&fp.subgroup, 1),
            Err(Error::Precondition(_))
        ));
    }
}

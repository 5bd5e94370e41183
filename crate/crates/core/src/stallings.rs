//! Folded subgroup graphs for finitely generated subgroups of free
//! groups: membership, index, basis and coset tables.
//!
//! A graph is a pointed, deterministic and co-deterministic automaton
//! over the generators; after folding it is pruned to its core (every
//! non-basepoint vertex has degree at least two) and renumbered by a
//! breadth-first traversal with generator-index tie-breaking, so equal
//! subgroups produce identical graphs.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::word::{FreeGroup, Letter, Word};

/// Folded Stallings graph of a finitely generated subgroup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupGraph {
    group: FreeGroup,
    /// succ[v][g]: target of the g-edge leaving v.
    succ: Vec<Vec<Option<usize>>>,
    /// pred[v][g]: source of the g-edge entering v.
    pred: Vec<Vec<Option<usize>>>,
}

/// Index of a subgroup in its ambient free group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubgroupIndex {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SubgroupIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgroupIndex::Finite(q) => write!(f, "{q}"),
            SubgroupIndex::Infinite => write!(f, "infinite"),
        }
    }
}

/// Total coset table of a finite-index subgroup: rows are cosets (row 0
/// is the subgroup itself), columns are generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetTable {
    pub table: Vec<Vec<usize>>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // keep the basepoint (vertex 0) as its own representative
        let (keep, drop) = if rb == 0 { (rb, ra) } else { (ra, rb) };
        self.parent[drop] = keep;
        true
    }
}

impl SubgroupGraph {
    /// Fold the wedge of generator loops into the subgroup graph.
    pub fn fold(group: &FreeGroup, generators: &[Word]) -> Result<SubgroupGraph> {
        let mut edges: Vec<(usize, usize, usize)> = Vec::new(); // (from, gen, to)
        let mut n = 1; // vertex 0 is the basepoint
        for w in generators {
            if w.group() != group {
                return Err(Error::GroupMismatch);
            }
            if w.is_identity() {
                continue;
            }
            let mut at = 0;
            for (i, l) in w.letters().iter().enumerate() {
                let next = if i + 1 == w.len() {
                    0
                } else {
                    n += 1;
                    n - 1
                };
                if l.inv {
                    edges.push((next, l.gen, at));
                } else {
                    edges.push((at, l.gen, next));
                }
                at = next;
            }
        }
        Ok(Self::from_edges(group.clone(), n, edges))
    }

    /// The whole group as an index-1 subgroup.
    pub fn whole_group(group: &FreeGroup) -> SubgroupGraph {
        let m = group.rank();
        let edges = (0..m).map(|g| (0, g, 0)).collect();
        Self::from_edges(group.clone(), 1, edges)
    }

    /// Build from a permutation action on cosets: state 0 is the
    /// subgroup coset and `action[g][s]` is the target of `s · g`.  The
    /// stabiliser of state 0 inside the component of state 0 is returned.
    pub fn from_coset_action(
        group: &FreeGroup,
        states: usize,
        action: &[Vec<usize>],
    ) -> Result<SubgroupGraph> {
        if action.len() != group.rank() {
            return Err(Error::Arity("one permutation per generator required".into()));
        }
        let mut edges = Vec::new();
        for (g, perm) in action.iter().enumerate() {
            if perm.len() != states {
                return Err(Error::Arity("permutation degree mismatch".into()));
            }
            let mut seen = vec![false; states];
            for (s, &t) in perm.iter().enumerate() {
                if t >= states || seen[t] {
                    return Err(Error::Precondition("action is not a permutation".into()));
                }
                seen[t] = true;
                edges.push((s, g, t));
            }
        }
        // restrict to the orbit of state 0 so the graph stays connected
        let mut reach = vec![false; states];
        reach[0] = true;
        let mut queue = vec![0usize];
        while let Some(s) = queue.pop() {
            for perm in action {
                let t = perm[s];
                if !reach[t] {
                    reach[t] = true;
                    queue.push(t);
                }
                if let Some(src) = perm.iter().position(|&x| x == s) {
                    if !reach[src] {
                        reach[src] = true;
                        queue.push(src);
                    }
                }
            }
        }
        edges.retain(|&(f, _, t)| reach[f] && reach[t]);
        Ok(Self::from_edges(group.clone(), states, edges))
    }

    fn from_edges(group: FreeGroup, n: usize, edges: Vec<(usize, usize, usize)>) -> SubgroupGraph {
        let m = group.rank();
        let mut uf = UnionFind::new(n);
        let mut edges = edges;
        // fold until deterministic and co-deterministic
        loop {
            let mut changed = false;
            let mut out: std::collections::HashMap<(usize, usize), usize> =
                std::collections::HashMap::new();
            let mut inc: std::collections::HashMap<(usize, usize), usize> =
                std::collections::HashMap::new();
            for &(f, g, t) in &edges {
                let (f, t) = (uf.find(f), uf.find(t));
                if let Some(&t2) = out.get(&(f, g)) {
                    if t2 != t {
                        uf.union(t2, t);
                        changed = true;
                    }
                } else {
                    out.insert((f, g), t);
                }
                if let Some(&f2) = inc.get(&(t, g)) {
                    if f2 != f {
                        uf.union(f2, f);
                        changed = true;
                    }
                } else {
                    inc.insert((t, g), f);
                }
            }
            if !changed {
                break;
            }
            for e in edges.iter_mut() {
                e.0 = uf.find(e.0);
                e.2 = uf.find(e.2);
            }
        }
        // collapse vertices and dedupe edges
        let mut edge_set: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
        for &(f, g, t) in &edges {
            edge_set.insert((uf.find(f), g, uf.find(t)));
        }
        let base = uf.find(0);
        let mut alive: BTreeSet<usize> = edge_set.iter().flat_map(|&(f, _, t)| [f, t]).collect();
        alive.insert(base);
        // core: strip non-basepoint vertices of degree <= 1
        loop {
            let mut degree: std::collections::HashMap<usize, usize> =
                std::collections::HashMap::new();
            for &(f, _, t) in &edge_set {
                *degree.entry(f).or_insert(0) += 1;
                *degree.entry(t).or_insert(0) += 1;
            }
            let victim = alive
                .iter()
                .copied()
                .find(|&v| v != base && degree.get(&v).copied().unwrap_or(0) <= 1);
            match victim {
                Some(v) => {
                    alive.remove(&v);
                    edge_set.retain(|&(f, _, t)| f != v && t != v);
                }
                None => break,
            }
        }
        // canonical breadth-first renumbering from the basepoint
        let mut out_map: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut in_map: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        for &(f, g, t) in &edge_set {
            out_map.insert((f, g), t);
            in_map.insert((t, g), f);
        }
        let mut order: Vec<usize> = vec![base];
        let mut number: std::collections::HashMap<usize, usize> =
            std::collections::HashMap::new();
        number.insert(base, 0);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for g in 0..m {
                if let Some(&t) = out_map.get(&(v, g)) {
                    if !number.contains_key(&t) {
                        number.insert(t, order.len());
                        order.push(t);
                    }
                }
            }
            for g in 0..m {
                if let Some(&f) = in_map.get(&(v, g)) {
                    if !number.contains_key(&f) {
                        number.insert(f, order.len());
                        order.push(f);
                    }
                }
            }
        }
        debug_assert_eq!(order.len(), alive.len(), "graph must be connected");
        let nv = order.len();
        let mut succ = vec![vec![None; m]; nv];
        let mut pred = vec![vec![None; m]; nv];
        for &(f, g, t) in &edge_set {
            let (f, t) = (number[&f], number[&t]);
            succ[f][g] = Some(t);
            pred[t][g] = Some(f);
        }
        SubgroupGraph { group, succ, pred }
    }

    pub fn group(&self) -> &FreeGroup {
        &self.group
    }

    pub fn vertex_count(&self) -> usize {
        self.succ.len()
    }

    pub fn basepoint(&self) -> usize {
        0
    }

    /// Directed edges `(from, generator, to)` in canonical order.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (v, row) in self.succ.iter().enumerate() {
            for (g, t) in row.iter().enumerate() {
                if let Some(t) = t {
                    out.push((v, g, *t));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.succ
            .iter()
            .map(|r| r.iter().filter(|t| t.is_some()).count())
            .sum()
    }

    fn step(&self, v: usize, l: Letter) -> Option<usize> {
        if l.inv {
            self.pred[v][l.gen]
        } else {
            self.succ[v][l.gen]
        }
    }

    /// Exact membership test.
    pub fn contains(&self, w: &Word) -> Result<bool> {
        if w.group() != &self.group {
            return Err(Error::GroupMismatch);
        }
        let mut at = 0;
        for &l in w.letters() {
            match self.step(at, l) {
                Some(t) => at = t,
                None => return Ok(false),
            }
        }
        Ok(at == 0)
    }

    /// Index in the ambient free group: finite exactly when the graph is
    /// a complete automaton.
    pub fn index(&self) -> SubgroupIndex {
        let total = self.succ.iter().all(|row| row.iter().all(|t| t.is_some()));
        if total {
            SubgroupIndex::Finite(self.vertex_count())
        } else {
            SubgroupIndex::Infinite
        }
    }

    /// Tree path from the basepoint to each vertex, following the same
    /// breadth-first order used for numbering.
    fn tree_paths(&self) -> (Vec<Vec<Letter>>, Vec<(usize, usize, usize)>) {
        let m = self.group.rank();
        let nv = self.vertex_count();
        let mut path: Vec<Option<Vec<Letter>>> = vec![None; nv];
        path[0] = Some(Vec::new());
        let mut tree_edges: Vec<(usize, usize, usize)> = Vec::new();
        let mut queue = vec![0usize];
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for g in 0..m {
                if let Some(t) = self.succ[v][g] {
                    if path[t].is_none() {
                        let mut p = path[v].clone().unwrap();
                        p.push(Letter { gen: g, inv: false });
                        path[t] = Some(p);
                        tree_edges.push((v, g, t));
                        queue.push(t);
                    }
                }
            }
            for g in 0..m {
                if let Some(f) = self.pred[v][g] {
                    if path[f].is_none() {
                        let mut p = path[v].clone().unwrap();
                        p.push(Letter { gen: g, inv: true });
                        path[f] = Some(p);
                        tree_edges.push((f, g, v));
                        queue.push(f);
                    }
                }
            }
        }
        (path.into_iter().map(|p| p.unwrap()).collect(), tree_edges)
    }

    /// Free basis of the subgroup (Nielsen–Schreier via a spanning tree);
    /// deterministic output order.
    pub fn basis(&self) -> Vec<Word> {
        let (paths, tree_edges) = self.tree_paths();
        let tree: BTreeSet<(usize, usize, usize)> = tree_edges.into_iter().collect();
        let mut out = Vec::new();
        for (v, g, t) in self.edges() {
            if tree.contains(&(v, g, t)) {
                continue;
            }
            let mut letters = paths[v].clone();
            letters.push(Letter { gen: g, inv: false });
            letters.extend(paths[t].iter().rev().map(|l| l.inverse()));
            let w = self.group.reduce(letters).expect("valid letters");
            debug_assert!(!w.is_identity());
            out.push(w);
        }
        out
    }

    /// Coset representatives (Schreier transversal), one word per vertex.
    pub fn transversal(&self) -> Vec<Word> {
        let (paths, _) = self.tree_paths();
        paths
            .into_iter()
            .map(|p| self.group.reduce(p).expect("valid letters"))
            .collect()
    }

    /// Total permutation coset table; errors when the index is infinite.
    pub fn coset_table(&self) -> Result<CosetTable> {
        match self.index() {
            SubgroupIndex::Infinite => Err(Error::InfiniteIndex),
            SubgroupIndex::Finite(q) => {
                let m = self.group.rank();
                let mut table = vec![vec![0usize; m]; q];
                for (v, row) in table.iter_mut().enumerate() {
                    for (g, cell) in row.iter_mut().enumerate() {
                        *cell = self.succ[v][g].expect("total automaton");
                    }
                }
                Ok(CosetTable { table })
            }
        }
    }
}

impl fmt::Display for SubgroupGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vertices: {}", self.vertex_count())?;
        writeln!(f, "basepoint: {}", self.basepoint())?;
        for (v, g, t) in self.edges() {
            writeln!(f, "edge: {} {} {}", v, self.group.label(g), t)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> FreeGroup {
        FreeGroup::new(2)
    }

    fn graph(gens: &[&str]) -> SubgroupGraph {
        let g = f2();
        let words: Vec<Word> = gens.iter().map(|s| g.parse(s).unwrap()).collect();
        SubgroupGraph::fold(&g, &words).unwrap()
    }

    /// All freely reduced words of length at most `max_len`.
    fn reduced_words(group: &FreeGroup, max_len: usize) -> Vec<Word> {
        let mut out = vec![group.identity()];
        let mut frontier: Vec<Vec<Letter>> = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for gen in 0..group.rank() {
                    for inv in [false, true] {
                        let l = Letter { gen, inv };
                        if let Some(last) = w.last() {
                            if last.gen == l.gen && last.inv != l.inv {
                                continue;
                            }
                        }
                        let mut v = w.clone();
                        v.push(l);
                        next.push(v);
                    }
                }
            }
            for v in &next {
                out.push(group.reduce(v.clone()).unwrap());
            }
            frontier = next;
        }
        out
    }

    #[test]
    fn cyclic_subgroup() {
        let h = graph(&["a"]);
        let g = f2();
        assert!(h.contains(&g.parse("a^5").unwrap()).unwrap());
        assert!(!h.contains(&g.parse("b").unwrap()).unwrap());
        assert_eq!(h.index(), SubgroupIndex::Infinite);
        assert!(h.coset_table().is_err());
    }

    #[test]
    fn trivial_subgroup_accepts_only_identity() {
        let h = graph(&[]);
        let g = f2();
        assert!(h.contains(&g.identity()).unwrap());
        for w in reduced_words(&g, 4) {
            assert_eq!(h.contains(&w).unwrap(), w.is_identity());
        }
        assert!(h.basis().is_empty());
    }

    #[test]
    fn even_a_exponent_subgroup_matches_parity_oracle() {
        let h = graph(&["a^2", "b", "a b a^-1"]);
        let g = f2();
        for w in reduced_words(&g, 6) {
            let a_sum: i64 = w
                .letters()
                .iter()
                .filter(|l| l.gen == 0)
                .map(|l| if l.inv { -1 } else { 1 })
                .sum();
            assert_eq!(
                h.contains(&w).unwrap(),
                a_sum % 2 == 0,
                "word {w} disagrees with the mod-2 exponent oracle"
            );
        }
        assert!(h.contains(&g.parse("a b a^-1 b^-1").unwrap()).unwrap());
        assert_eq!(h.index(), SubgroupIndex::Finite(2));
        assert_eq!(h.basis().len(), 3, "Nielsen–Schreier: 1 + 2·(2−1)");
    }

    #[test]
    fn whole_group_has_index_one() {
        let h = SubgroupGraph::whole_group(&f2());
        assert_eq!(h.index(), SubgroupIndex::Finite(1));
        let t = h.coset_table().unwrap();
        assert_eq!(t.table, vec![vec![0, 0]]);
    }

    #[test]
    fn index_two_coset_table() {
        let h = graph(&["a^2", "b", "a b a^-1"]);
        let t = h.coset_table().unwrap();
        // a swaps the two cosets, b fixes both
        assert_eq!(t.table, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn folding_is_confluent() {
        let g = f2();
        let gens = ["a^2", "b", "a b a^-1"];
        let h1 = graph(&gens);
        // shuffled generators plus redundant products
        let shuffled = ["a b a^-1", "b", "a^2", "a^2 b", "b a b a^-1"];
        let h2 = graph(&shuffled);
        assert_eq!(h1, h2, "canonical graphs must coincide");
        for w in reduced_words(&g, 6) {
            assert_eq!(h1.contains(&w).unwrap(), h2.contains(&w).unwrap());
        }
    }

    #[test]
    fn basis_round_trip_preserves_accepted_set() {
        let g = f2();
        for gens in [
            vec!["a^2", "b^2", "a b"],
            vec!["a b a^-1 b^-1"],
            vec!["a^3", "b a"],
        ] {
            let h = SubgroupGraph::fold(
                &g,
                &gens.iter().map(|s| g.parse(s).unwrap()).collect::<Vec<_>>(),
            )
            .unwrap();
            let again = SubgroupGraph::fold(&g, &h.basis()).unwrap();
            assert_eq!(h, again);
            for w in reduced_words(&g, 6) {
                assert_eq!(h.contains(&w).unwrap(), again.contains(&w).unwrap());
            }
        }
    }

    #[test]
    fn membership_agrees_with_bounded_product_search() {
        let g = f2();
        let gens: Vec<Word> = ["a^2", "b a"].iter().map(|s| g.parse(s).unwrap()).collect();
        let h = SubgroupGraph::fold(&g, &gens).unwrap();
        // naive: all products of <= 3 generators and inverses
        let mut elements = std::collections::HashSet::new();
        elements.insert(g.identity());
        for _ in 0..3 {
            let snapshot: Vec<Word> = elements.iter().cloned().collect();
            for e in snapshot {
                for x in &gens {
                    elements.insert(e.multiply(x).unwrap());
                    elements.insert(e.multiply(&x.invert()).unwrap());
                }
            }
        }
        for e in &elements {
            assert!(h.contains(e).unwrap(), "product {e} must be accepted");
        }
    }

    #[test]
    fn coset_row_count_matches_index_on_random_actions() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(31);
        let mut found = 0;
        for _ in 0..300 {
            let rank = rng.random_range(2..=3);
            let g = FreeGroup::new(rank);
            let states = rng.random_range(1..=5);
            let mut action = Vec::new();
            for _ in 0..rank {
                let mut perm: Vec<usize> = (0..states).collect();
                for i in (1..states).rev() {
                    let j = rng.random_range(0..=i);
                    perm.swap(i, j);
                }
                action.push(perm);
            }
            let h = SubgroupGraph::from_coset_action(&g, states, &action).unwrap();
            let q = match h.index() {
                SubgroupIndex::Finite(q) => q,
                SubgroupIndex::Infinite => continue,
            };
            assert_eq!(h.coset_table().unwrap().table.len(), q);
            assert_eq!(h.basis().len(), 1 + q * (rank - 1));
            found += 1;
        }
        assert!(found >= 100, "only {found} finite-index samples");
    }
}

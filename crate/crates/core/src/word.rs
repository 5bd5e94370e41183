//! Reduced words in finitely generated free groups.
//!
//! Every element-level computation in the toolkit bottoms out here:
//! free reduction, multiplication, inversion, (iterated) commutators
//! and exponent-sum vectors.  Words are immutable and always stored
//! freely reduced; the empty word is the identity.
//!
//! Text form: space-separated tokens, each a generator label with an
//! optional exponent (`a b^-1 a^2`); the identity is written `1`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};

/// A finitely generated free group with labelled generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FreeGroup {
    labels: Vec<String>,
}

impl FreeGroup {
    /// Free group of the given rank with default labels `a, b, c, …`.
    pub fn new(rank: usize) -> Self {
        assert!(rank >= 1, "free group rank must be at least 1");
        let labels = (0..rank)
            .map(|i| {
                if rank <= 26 {
                    ((b'a' + i as u8) as char).to_string()
                } else {
                    format!("g{}", i + 1)
                }
            })
            .collect();
        FreeGroup { labels }
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("free group needs at least one generator"));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l == "1" || l.contains(['^', ' ', ';', ',', '|']) {
                return Err(Error::Parse(format!("invalid generator label `{l}`")));
            }
            if labels[..i].contains(l) {
                return Err(Error::Parse(format!("duplicate generator label `{l}`")));
            }
        }
        Ok(FreeGroup { labels })
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, gen: usize) -> &str {
        &self.labels[gen]
    }

    pub fn generator_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownGenerator(label.to_string()))
    }

    /// The identity element.
    pub fn identity(&self) -> Word {
        Word {
            group: self.clone(),
            letters: Vec::new(),
        }
    }

    /// The `i`-th generator as a word.
    pub fn generator(&self, gen: usize) -> Result<Word> {
        if gen >= self.rank() {
            return Err(Error::UnknownGenerator(format!("#{gen}")));
        }
        Ok(Word {
            group: self.clone(),
            letters: vec![Letter { gen, inv: false }],
        })
    }

    /// Freely reduce a raw letter sequence into a word of this group.
    pub fn reduce(&self, raw: impl IntoIterator<Item = Letter>) -> Result<Word> {
        let mut stack: Vec<Letter> = Vec::new();
        for l in raw {
            if l.gen >= self.rank() {
                return Err(Error::UnknownGenerator(format!("#{}", l.gen)));
            }
            match stack.last() {
                Some(top) if top.gen == l.gen && top.inv != l.inv => {
                    stack.pop();
                }
                _ => stack.push(l),
            }
        }
        Ok(Word {
            group: self.clone(),
            letters: stack,
        })
    }

    /// Parse the space-separated text form.
    pub fn parse(&self, text: &str) -> Result<Word> {
        let mut raw = Vec::new();
        for tok in text.split_whitespace() {
            if tok == "1" {
                continue;
            }
            let (label, exp) = match tok.split_once('^') {
                None => (tok, 1i64),
                Some((l, e)) => {
                    let e: i64 = e
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad exponent in `{tok}`")))?;
                    (l, e)
                }
            };
            let gen = self.generator_index(label)?;
            let inv = exp < 0;
            for _ in 0..exp.unsigned_abs() {
                raw.push(Letter { gen, inv });
            }
        }
        self.reduce(raw)
    }
}

/// One letter: a generator index and an orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub gen: usize,
    pub inv: bool,
}

impl Letter {
    pub fn inverse(self) -> Letter {
        Letter {
            gen: self.gen,
            inv: !self.inv,
        }
    }
}

/// A freely reduced word in a free group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    group: FreeGroup,
    letters: Vec<Letter>,
}

impl Word {
    pub fn group(&self) -> &FreeGroup {
        &self.group
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    fn check_same_group(&self, other: &Word) -> Result<()> {
        if self.group != other.group {
            return Err(Error::GroupMismatch);
        }
        Ok(())
    }

    pub fn multiply(&self, other: &Word) -> Result<Word> {
        self.check_same_group(other)?;
        self.group.reduce(
            self.letters
                .iter()
                .copied()
                .chain(other.letters.iter().copied()),
        )
    }

    pub fn invert(&self) -> Word {
        Word {
            group: self.group.clone(),
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.invert() } else { self.clone() };
        let mut out = self.group.identity();
        for _ in 0..n.unsigned_abs() {
            out = out.multiply(&base).expect("same group");
        }
        out
    }

    /// The single bracket `[u, v] = u v u⁻¹ v⁻¹`.
    pub fn commutator(&self, other: &Word) -> Result<Word> {
        self.check_same_group(other)?;
        self.group.reduce(
            self.letters
                .iter()
                .copied()
                .chain(other.letters.iter().copied())
                .chain(self.letters.iter().rev().map(|l| l.inverse()))
                .chain(other.letters.iter().rev().map(|l| l.inverse())),
        )
    }

    /// Exponent-sum vector; a homomorphism onto `ℤ^rank`.
    pub fn abelianize(&self) -> Vec<BigInt> {
        let mut v = vec![BigInt::zero(); self.group.rank()];
        for l in &self.letters {
            if l.inv {
                v[l.gen] -= 1;
            } else {
                v[l.gen] += 1;
            }
        }
        v
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.letters.len() {
            let l = self.letters[i];
            let mut run = 1;
            while i + run < self.letters.len() && self.letters[i + run] == l {
                run += 1;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            let label = self.group.label(l.gen);
            match (l.inv, run) {
                (false, 1) => write!(f, "{label}")?,
                (false, r) => write!(f, "{label}^{r}")?,
                (true, r) => write!(f, "{label}^-{r}")?,
            }
            i += run;
        }
        Ok(())
    }
}

/// Right-nested iterated commutator `[g₁, [g₂, …, [g_{s−1}, g_s]…]]`.
///
/// A singleton list returns its element.
pub fn iterated_commutator(gs: &[Word]) -> Result<Word> {
    let (last, rest) = gs
        .split_last()
        .ok_or(Error::Empty("iterated commutator of no words"))?;
    let mut acc = last.clone();
    for g in rest.iter().rev() {
        acc = g.commutator(&acc)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn f2() -> FreeGroup {
        FreeGroup::new(2)
    }

    /// Independent oracle: reduce by repeatedly scanning for an adjacent
    /// cancelling pair, no stack.
    fn scan_reduce(group: &FreeGroup, raw: &[Letter]) -> Vec<Letter> {
        let mut v = raw.to_vec();
        loop {
            let mut cancelled = false;
            for i in 0..v.len().saturating_sub(1) {
                if v[i].gen == v[i + 1].gen && v[i].inv != v[i + 1].inv {
                    v.drain(i..=i + 1);
                    cancelled = true;
                    break;
                }
            }
            if !cancelled {
                break;
            }
        }
        assert!(v.iter().all(|l| l.gen < group.rank()));
        v
    }

    fn random_raw(rng: &mut StdRng, group: &FreeGroup, max_len: usize) -> Vec<Letter> {
        let len = rng.random_range(0..=max_len);
        (0..len)
            .map(|_| Letter {
                gen: rng.random_range(0..group.rank()),
                inv: rng.random_bool(0.5),
            })
            .collect()
    }

    fn random_word(rng: &mut StdRng, group: &FreeGroup, max_len: usize) -> Word {
        let raw = random_raw(rng, group, max_len);
        group.reduce(raw).unwrap()
    }

    #[test]
    fn reduce_cancels_to_identity() {
        let g = f2();
        assert!(g.parse("a a^-1").unwrap().is_identity());
        assert_eq!(g.parse("a b b^-1 a").unwrap(), g.parse("a a").unwrap());
    }

    #[test]
    fn reduce_matches_scan_oracle_and_is_idempotent() {
        let g = f2();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..500 {
            let raw = random_raw(&mut rng, &g, 40);
            let w = g.reduce(raw.clone()).unwrap();
            assert_eq!(w.letters(), scan_reduce(&g, &raw).as_slice());
            let again = g.reduce(w.letters().to_vec()).unwrap();
            assert_eq!(again, w, "reduce must be idempotent");
            assert!(w.len() <= raw.len());
            assert!(w.multiply(&w.invert()).unwrap().is_identity());
        }
    }

    #[test]
    fn multiplication_examples() {
        let g = f2();
        let a = g.parse("a").unwrap();
        assert!(a.multiply(&g.parse("a^-1").unwrap()).unwrap().is_identity());
        assert_eq!(g.parse("a b").unwrap().invert(), g.parse("b^-1 a^-1").unwrap());
    }

    #[test]
    fn associativity_on_random_triples() {
        let g = FreeGroup::new(3);
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..200 {
            let (u, v, w) = (
                random_word(&mut rng, &g, 12),
                random_word(&mut rng, &g, 12),
                random_word(&mut rng, &g, 12),
            );
            let lhs = u.multiply(&v).unwrap().multiply(&w).unwrap();
            let rhs = u.multiply(&v.multiply(&w).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
            assert_eq!(g.identity().multiply(&u).unwrap(), u);
        }
    }

    #[test]
    fn group_mismatch_is_an_error() {
        let g = f2();
        let h = FreeGroup::new(3);
        let u = g.parse("a").unwrap();
        let v = h.parse("c").unwrap();
        assert!(matches!(u.multiply(&v), Err(Error::GroupMismatch)));
    }

    #[test]
    fn commutator_examples() {
        let g = f2();
        let a = g.parse("a").unwrap();
        let b = g.parse("b").unwrap();
        assert_eq!(a.commutator(&b).unwrap(), g.parse("a b a^-1 b^-1").unwrap());
        assert!(a.commutator(&a).unwrap().is_identity());
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let u = random_word(&mut rng, &g, 10);
            assert!(u.commutator(&g.identity()).unwrap().is_identity());
        }
    }

    #[test]
    fn iterated_commutator_examples() {
        let g = f2();
        let a = g.parse("a").unwrap();
        let b = g.parse("b").unwrap();
        let c = g.parse("a b").unwrap();
        assert_eq!(iterated_commutator(&[c.clone()]).unwrap(), c);
        // [a, [b, c]] expanded by hand via multiply/commutator
        let bc = b.commutator(&c).unwrap();
        let expect = a
            .multiply(&bc)
            .unwrap()
            .multiply(&a.invert())
            .unwrap()
            .multiply(&bc.invert())
            .unwrap();
        assert_eq!(iterated_commutator(&[a.clone(), b.clone(), c]).unwrap(), expect);
        assert!(matches!(iterated_commutator(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn iterated_commutator_dies_on_identity_entry() {
        let g = f2();
        let mut rng = StdRng::seed_from_u64(14);
        for _ in 0..100 {
            let len = rng.random_range(1..=5);
            let mut gs: Vec<Word> = (0..len).map(|_| random_word(&mut rng, &g, 6)).collect();
            let pos = rng.random_range(0..len);
            gs[pos] = g.identity();
            assert!(iterated_commutator(&gs).unwrap().is_identity());
        }
    }

    #[test]
    fn abelianize_examples() {
        let g = f2();
        let zero: Vec<BigInt> = vec![BigInt::zero(), BigInt::zero()];
        assert_eq!(g.parse("a b a^-1 b^-1").unwrap().abelianize(), zero);
        assert_eq!(
            g.parse("a a b^-1").unwrap().abelianize(),
            vec![BigInt::from(2), BigInt::from(-1)]
        );
    }

    #[test]
    fn abelianize_is_additive() {
        let g = f2();
        let mut rng = StdRng::seed_from_u64(15);
        for _ in 0..200 {
            let u = random_word(&mut rng, &g, 20);
            let v = random_word(&mut rng, &g, 20);
            let sum: Vec<BigInt> = u
                .abelianize()
                .iter()
                .zip(v.abelianize())
                .map(|(x, y)| x + y)
                .collect();
            assert_eq!(u.multiply(&v).unwrap().abelianize(), sum);
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        let g = f2();
        for text in ["1", "a", "a b^-1", "a^2 b^-3 a", "b a b"] {
            let w = g.parse(text).unwrap();
            assert_eq!(g.parse(&w.to_string()).unwrap(), w);
        }
        assert!(matches!(g.parse("q"), Err(Error::UnknownGenerator(_))));
    }
}

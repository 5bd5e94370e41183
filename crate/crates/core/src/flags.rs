//! Forward-chaining rule engine for (weak) homological finiteness
//! flags.
//!
//! Facts about named groups, short exact sequences and fibre products
//! are loaded from a facts file; the engine then chases the rules to a
//! fixed point and reports every firing with a provenance string.  The
//! rules are exactly:
//!
//! * the implication chain `F_k ⇒ FP_k ⇒ wFP_k` and downward closure
//!   in the degree;
//! * `FP_k` (or `wFP_k`) makes the integral homology finitely
//!   generated through degree `k`;
//! * finite-index transfer: declared finite-index pairs share all
//!   flags;
//! * `Lemma 5.2`: for `N ↪ Γ ↠ Q` with `Q` of type `FP_n`, `N` of type
//!   `wFP_{n−1}` and `H₀(Q, H_n(N))` finitely generated, the homology
//!   of `Γ` is finitely generated through degree `n`;
//! * `Lemma 5.3`: under `N` `wFP_{n−1}`, `Γ` `wFP_n`, `Q` `FP_n`:
//!   `H_{n+1}(Q)` finitely generated forces `H₀(Q, H_n(N))` finitely
//!   generated; with `Γ` of type `wFP_{n+1}` the converse holds;
//! * `Theorem 5.4`: a fibre product over sequences with `N₁` `wFP_n`,
//!   `Γ₁` `wFP_{n+1}`, `Γ₂` `FP_{n+1}`, `Q` `FP_{n+2}` is `wFP_{n+1}`;
//! * `Corollary 5.5`: a subgroup of a product of `FP_k` groups that
//!   virtually surjects to `k`-tuples (`k ≥ 2`) is `wFP_k`;
//! * `Proposition 3.5`: finite-index single-factor projections with
//!   virtually nilpotent quotients give finite generation (`F_1`).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Degrees are tracked through this bound; `inf` stands for every
/// degree.
pub const MAX_DEGREE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    True,
    False,
    Unknown,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::True => write!(f, "true"),
            Flag::False => write!(f, "false"),
            Flag::Unknown => write!(f, "unknown"),
        }
    }
}

/// The flagged property families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Prop {
    /// type `F_k`
    F,
    /// type `FP_k`
    Fp,
    /// type `wFP_k`
    Wfp,
    /// `H_k(·, ℤ)` finitely generated (single degree)
    Hk,
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop::F => write!(f, "F"),
            Prop::Fp => write!(f, "FP"),
            Prop::Wfp => write!(f, "wFP"),
            Prop::Hk => write!(f, "Hfg"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Degree {
    Fin(usize),
    Inf,
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::Fin(k) => write!(f, "{k}"),
            Degree::Inf => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Debug, Default)]
struct PropFlags {
    /// flag and provenance per degree `0..=MAX_DEGREE`
    deg: BTreeMap<usize, (Flag, String)>,
    inf: Option<(Flag, String)>,
}

impl PropFlags {
    fn get(&self, d: Degree) -> Flag {
        match d {
            Degree::Fin(k) => self.deg.get(&k).map_or(Flag::Unknown, |x| x.0),
            Degree::Inf => self.inf.as_ref().map_or(Flag::Unknown, |x| x.0),
        }
    }
    fn provenance(&self, d: Degree) -> Option<&str> {
        match d {
            Degree::Fin(k) => self.deg.get(&k).map(|x| x.1.as_str()),
            Degree::Inf => self.inf.as_ref().map(|x| x.1.as_str()),
        }
    }
}

/// A named group's profile.
#[derive(Clone, Debug, Default)]
pub struct Profile {
    f: PropFlags,
    fp: PropFlags,
    wfp: PropFlags,
    hk: PropFlags,
}

impl Profile {
    fn of(&self, p: Prop) -> &PropFlags {
        match p {
            Prop::F => &self.f,
            Prop::Fp => &self.fp,
            Prop::Wfp => &self.wfp,
            Prop::Hk => &self.hk,
        }
    }
    fn of_mut(&mut self, p: Prop) -> &mut PropFlags {
        match p {
            Prop::F => &mut self.f,
            Prop::Fp => &mut self.fp,
            Prop::Wfp => &mut self.wfp,
            Prop::Hk => &mut self.hk,
        }
    }

    /// Largest degree certified true (Inf dominates).
    pub fn true_through(&self, p: Prop) -> Option<Degree> {
        let flags = self.of(p);
        if flags.get(Degree::Inf) == Flag::True {
            return Some(Degree::Inf);
        }
        flags
            .deg
            .iter()
            .filter(|(_, (fl, _))| *fl == Flag::True)
            .map(|(k, _)| *k)
            .max()
            .map(Degree::Fin)
    }
}

/// A short exact sequence `N ↪ G ↠ Q` of named groups.
#[derive(Clone, Debug)]
pub struct Ses {
    pub kernel: String,
    pub middle: String,
    pub quotient: String,
}

/// A fibre product declaration over two sequences with a common
/// quotient.
#[derive(Clone, Debug)]
pub struct Fibre {
    pub seq1: String,
    pub seq2: String,
    pub product: String,
}

/// A subgroup of a direct product of named factor groups.
#[derive(Clone, Debug)]
pub struct ProductDecl {
    pub factors: Vec<String>,
}

/// One rule application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Firing {
    pub rule: String,
    pub conclusion: String,
}

impl fmt::Display for Firing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.rule, self.conclusion)
    }
}

/// All declared facts; the mutable state of the engine.
#[derive(Clone, Debug, Default)]
pub struct FactBase {
    pub groups: BTreeMap<String, Profile>,
    pub seses: BTreeMap<String, Ses>,
    pub fibres: BTreeMap<String, Fibre>,
    pub products: BTreeMap<String, ProductDecl>,
    /// `H₀(Q, H_n(N))` finitely generated, per sequence and degree n
    pub h0: BTreeMap<(String, usize), Flag>,
    /// virtual surjection to k-tuples certificates
    pub vs: BTreeMap<(String, usize), bool>,
    /// virtually nilpotent single-factor quotients
    pub vnilq: BTreeMap<String, bool>,
    pub finite_index: Vec<(String, String)>,
}

impl FactBase {
    pub fn declare_group(&mut self, name: &str) {
        self.groups.entry(name.to_string()).or_default();
    }

    fn check_group(&self, name: &str) -> Result<()> {
        if !self.groups.contains_key(name) {
            return Err(Error::Parse(format!("unknown group `{name}`")));
        }
        Ok(())
    }

    pub fn flag(&self, group: &str, p: Prop, d: Degree) -> Flag {
        let Some(profile) = self.groups.get(group) else {
            return Flag::Unknown;
        };
        let flags = profile.of(p);
        match flags.get(d) {
            Flag::Unknown => {
                // inf-true covers every degree
                if flags.get(Degree::Inf) == Flag::True {
                    Flag::True
                } else {
                    Flag::Unknown
                }
            }
            other => other,
        }
    }

    pub fn provenance(&self, group: &str, p: Prop, d: Degree) -> Option<String> {
        self.groups
            .get(group)
            .and_then(|profile| profile.of(p).provenance(d).map(str::to_string))
    }

    pub fn profile(&self, group: &str) -> Option<&Profile> {
        self.groups.get(group)
    }

    /// Set a flag with provenance, maintaining the chain
    /// `F ⇒ FP ⇒ wFP`, downward closure for true flags, upward closure
    /// for false flags, and `wFP_k ⇒ H_j f.g. (j ≤ k)`.  Consistency
    /// violations are errors.
    pub fn set(
        &mut self,
        group: &str,
        p: Prop,
        d: Degree,
        value: Flag,
        provenance: &str,
    ) -> Result<bool> {
        self.check_group(group)?;
        let mut changed = false;
        let mut queue: Vec<(Prop, Degree, Flag, String)> =
            vec![(p, d, value, provenance.to_string())];
        while let Some((p, d, value, prov)) = queue.pop() {
            let profile = self.groups.get_mut(group).expect("checked");
            let flags = profile.of_mut(p);
            let current = flags.get(d);
            match (current, value) {
                (Flag::Unknown, Flag::Unknown) => continue,
                (c, v) if c == v => continue,
                (Flag::Unknown, v) => {
                    match d {
                        Degree::Fin(k) => {
                            flags.deg.insert(k, (v, prov.clone()));
                        }
                        Degree::Inf => {
                            flags.inf = Some((v, prov.clone()));
                        }
                    }
                    changed = true;
                }
                (c, v) => {
                    return Err(Error::Inconsistent(format!(
                        "{group}: {p}_{d} already {c}, cannot set {v} ({prov})"
                    )));
                }
            }
            // closures
            match (value, d) {
                (Flag::True, Degree::Fin(k)) => {
                    if k > 0 {
                        queue.push((
                            p,
                            Degree::Fin(k - 1),
                            Flag::True,
                            format!("downward closure from {p}_{k}"),
                        ));
                    }
                    match p {
                        Prop::F => queue.push((
                            Prop::Fp,
                            d,
                            Flag::True,
                            format!("F_{k} implies FP_{k}"),
                        )),
                        Prop::Fp => queue.push((
                            Prop::Wfp,
                            d,
                            Flag::True,
                            format!("FP_{k} implies wFP_{k}"),
                        )),
                        Prop::Wfp => {
                            for j in 0..=k {
                                queue.push((
                                    Prop::Hk,
                                    Degree::Fin(j),
                                    Flag::True,
                                    format!("wFP_{k} gives finitely generated H_{j}"),
                                ));
                            }
                        }
                        Prop::Hk => {}
                    }
                }
                (Flag::True, Degree::Inf) => {
                    for k in 0..=MAX_DEGREE {
                        queue.push((p, Degree::Fin(k), Flag::True, format!("{p}_inf")));
                    }
                    match p {
                        Prop::F => queue.push((Prop::Fp, d, Flag::True, "F_inf implies FP_inf".into())),
                        Prop::Fp => {
                            queue.push((Prop::Wfp, d, Flag::True, "FP_inf implies wFP_inf".into()))
                        }
                        _ => {}
                    }
                }
                (Flag::False, Degree::Fin(k)) => {
                    if k < MAX_DEGREE {
                        queue.push((
                            p,
                            Degree::Fin(k + 1),
                            Flag::False,
                            format!("upward closure from failing {p}_{k}"),
                        ));
                    }
                    match p {
                        Prop::Wfp => queue.push((
                            Prop::Fp,
                            d,
                            Flag::False,
                            format!("failing wFP_{k} denies FP_{k}"),
                        )),
                        Prop::Fp => queue.push((
                            Prop::F,
                            d,
                            Flag::False,
                            format!("failing FP_{k} denies F_{k}"),
                        )),
                        _ => {}
                    }
                }
                _ => {}
            }
        }
        Ok(changed)
    }

    /// Run every rule to a fixed point; the returned trace lists the
    /// principal firings in order.
    pub fn derive(&mut self) -> Result<Vec<Firing>> {
        // validate references first
        for ses in self.seses.values() {
            for g in [&ses.kernel, &ses.middle, &ses.quotient] {
                self.check_group(g)?;
            }
        }
        for fb in self.fibres.values() {
            if !self.seses.contains_key(&fb.seq1) || !self.seses.contains_key(&fb.seq2) {
                return Err(Error::Parse("fibre references unknown sequences".into()));
            }
            self.check_group(&fb.product)?;
            let q1 = &self.seses[&fb.seq1].quotient;
            let q2 = &self.seses[&fb.seq2].quotient;
            if q1 != q2 {
                return Err(Error::Parse(format!(
                    "fibre sequences have different quotients ({q1} vs {q2})"
                )));
            }
        }
        for p in self.products.values() {
            for g in &p.factors {
                self.check_group(g)?;
            }
        }
        let mut trace = Vec::new();
        loop {
            let mut changed = false;
            changed |= self.rule_finite_index(&mut trace)?;
            changed |= self.rule_lemma_52(&mut trace)?;
            changed |= self.rule_lemma_53(&mut trace)?;
            changed |= self.rule_theorem_54(&mut trace)?;
            changed |= self.rule_corollary_55(&mut trace)?;
            changed |= self.rule_proposition_35(&mut trace)?;
            if !changed {
                break;
            }
        }
        Ok(trace)
    }

    fn rule_finite_index(&mut self, trace: &mut Vec<Firing>) -> Result<bool> {
        let mut changed = false;
        let pairs = self.finite_index.clone();
        for (a, b) in pairs {
            for (x, y) in [(a.clone(), b.clone()), (b, a)] {
                for p in [Prop::F, Prop::Fp, Prop::Wfp] {
                    let src = self.groups.get(&x).cloned().unwrap_or_default();
                    let flags = src.of(p);
                    let mut todo: Vec<(Degree, Flag)> = flags
                        .deg
                        .iter()
                        .map(|(k, (fl, _))| (Degree::Fin(*k), *fl))
                        .collect();
                    if let Some((fl, _)) = &flags.inf {
                        todo.push((Degree::Inf, *fl));
                    }
                    for (d, fl) in todo {
                        if fl == Flag::Unknown || self.flag(&y, p, d) == fl {
                            continue;
                        }
                        let prov = format!("finite-index transfer from {x}");
                        if self.set(&y, p, d, fl, &prov)? {
                            trace.push(Firing {
                                rule: "finite-index transfer".into(),
                                conclusion: format!("{y} {p}_{d} = {fl}"),
                            });
                            changed = true;
                        }
                    }
                }
            }
        }
        Ok(changed)
    }

    fn rule_lemma_52(&mut self, trace: &mut Vec<Firing>) -> Result<bool> {
        let mut changed = false;
        let seses: Vec<(String, Ses)> = self
            .seses
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (name, ses) in seses {
            for n in 1..=MAX_DEGREE {
                let hyp = self.flag(&ses.quotient, Prop::Fp, Degree::Fin(n)) == Flag::True
                    && self.flag(&ses.kernel, Prop::Wfp, Degree::Fin(n - 1)) == Flag::True
                    && self.h0.get(&(name.clone(), n)) == Some(&Flag::True);
                if !hyp {
                    continue;
                }
                for j in 0..=n {
                    if self.flag(&ses.middle, Prop::Hk, Degree::Fin(j)) != Flag::True {
                        let prov = format!("Lemma 5.2 on {name} at n = {n}");
                        if self.set(&ses.middle, Prop::Hk, Degree::Fin(j), Flag::True, &prov)? {
                            trace.push(Firing {
                                rule: "Lemma 5.2".into(),
                                conclusion: format!(
                                    "{} H_{j} finitely generated",
                                    ses.middle
                                ),
                            });
                            changed = true;
                        }
                    }
                }
            }
        }
        Ok(changed)
    }

    fn rule_lemma_53(&mut self, trace: &mut Vec<Firing>) -> Result<bool> {
        let mut changed = false;
        let seses: Vec<(String, Ses)> = self
            .seses
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (name, ses) in seses {
            for n in 1..=MAX_DEGREE.saturating_sub(1) {
                let base = self.flag(&ses.kernel, Prop::Wfp, Degree::Fin(n - 1)) == Flag::True
                    && self.flag(&ses.middle, Prop::Wfp, Degree::Fin(n)) == Flag::True
                    && self.flag(&ses.quotient, Prop::Fp, Degree::Fin(n)) == Flag::True;
                if !base {
                    continue;
                }
                // forward: H_{n+1}(Q) f.g. => H0(Q, H_n(N)) f.g.
                if self.flag(&ses.quotient, Prop::Hk, Degree::Fin(n + 1)) == Flag::True
                    && self.h0.get(&(name.clone(), n)) != Some(&Flag::True)
                {
                    self.h0.insert((name.clone(), n), Flag::True);
                    trace.push(Firing {
                        rule: "Lemma 5.3".into(),
                        conclusion: format!("H0({}, H_{n}({})) finitely generated", ses.quotient, ses.kernel),
                    });
                    changed = true;
                }
                // converse (needs the middle group one degree higher)
                if self.flag(&ses.middle, Prop::Wfp, Degree::Fin(n + 1)) == Flag::True
                    && self.h0.get(&(name.clone(), n)) == Some(&Flag::True)
                    && self.flag(&ses.quotient, Prop::Hk, Degree::Fin(n + 1)) != Flag::True
                {
                    let prov = format!("Lemma 5.3 (converse) on {name} at n = {n}");
                    if self.set(&ses.quotient, Prop::Hk, Degree::Fin(n + 1), Flag::True, &prov)? {
                        trace.push(Firing {
                            rule: "Lemma 5.3 (converse)".into(),
                            conclusion: format!(
                                "{} H_{} finitely generated",
                                ses.quotient,
                                n + 1
                            ),
                        });
                        changed = true;
                    }
                }
            }
        }
        Ok(changed)
    }

    fn rule_theorem_54(&mut self, trace: &mut Vec<Firing>) -> Result<bool> {
        let mut changed = false;
        let fibres: Vec<(String, Fibre)> = self
            .fibres
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (name, fb) in fibres {
            let s1 = self.seses[&fb.seq1].clone();
            let s2 = self.seses[&fb.seq2].clone();
            for n in 0..MAX_DEGREE.saturating_sub(1) {
                let hyp = self.flag(&s1.kernel, Prop::Wfp, Degree::Fin(n)) == Flag::True
                    && self.flag(&s1.middle, Prop::Wfp, Degree::Fin(n + 1)) == Flag::True
                    && self.flag(&s2.middle, Prop::Fp, Degree::Fin(n + 1)) == Flag::True
                    && self.flag(&s1.quotient, Prop::Fp, Degree::Fin(n + 2)) == Flag::True;
                if !hyp {
                    continue;
                }
                if self.flag(&fb.product, Prop::Wfp, Degree::Fin(n + 1)) != Flag::True {
                    let prov = format!("Theorem 5.4 on {name} at n = {n}");
                    if self.set(&fb.product, Prop::Wfp, Degree::Fin(n + 1), Flag::True, &prov)? {
                        trace.push(Firing {
                            rule: "Theorem 5.4".into(),
                            conclusion: format!("{} wFP_{}", fb.product, n + 1),
                        });
                        changed = true;
                    }
                }
            }
        }
        Ok(changed)
    }

    fn rule_corollary_55(&mut self, trace: &mut Vec<Firing>) -> Result<bool> {
        let mut changed = false;
        let products: Vec<(String, ProductDecl)> = self
            .products
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (p, decl) in products {
            for k in 2..=MAX_DEGREE {
                if self.vs.get(&(p.clone(), k)) != Some(&true) {
                    continue;
                }
                let factors_ok = decl
                    .factors
                    .iter()
                    .all(|g| self.flag(g, Prop::Fp, Degree::Fin(k)) == Flag::True);
                if !factors_ok {
                    continue;
                }
                if self.flag(&p, Prop::Wfp, Degree::Fin(k)) != Flag::True {
                    let prov = format!(
                        "Corollary 5.5: virtual surjection to {k}-tuples over FP_{k} factors"
                    );
                    if self.set(&p, Prop::Wfp, Degree::Fin(k), Flag::True, &prov)? {
                        trace.push(Firing {
                            rule: "Corollary 5.5".into(),
                            conclusion: format!("{p} wFP_{k}"),
                        });
                        changed = true;
                    }
                }
            }
        }
        Ok(changed)
    }

    fn rule_proposition_35(&mut self, trace: &mut Vec<Firing>) -> Result<bool> {
        let mut changed = false;
        let products: Vec<(String, ProductDecl)> = self
            .products
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (p, decl) in products {
            let hyp = self.vs.get(&(p.clone(), 1)) == Some(&true)
                && self.vnilq.get(&p) == Some(&true)
                && decl
                    .factors
                    .iter()
                    .all(|g| self.flag(g, Prop::F, Degree::Fin(1)) == Flag::True);
            if !hyp {
                continue;
            }
            if self.flag(&p, Prop::F, Degree::Fin(1)) != Flag::True {
                let prov =
                    "Proposition 3.5: finite-index projections with virtually nilpotent quotients"
                        .to_string();
                if self.set(&p, Prop::F, Degree::Fin(1), Flag::True, &prov)? {
                    trace.push(Firing {
                        rule: "Proposition 3.5".into(),
                        conclusion: format!("{p} F_1"),
                    });
                    changed = true;
                }
            }
        }
        Ok(changed)
    }

    /// Parse a facts file.
    pub fn parse(text: &str) -> Result<FactBase> {
        let mut base = FactBase::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| {
                Error::Parse(format!("facts line {}: {msg}: `{line}`", lineno + 1))
            };
            match toks[0] {
                "group" => {
                    if toks.len() != 2 {
                        return Err(err("expected `group <name>`"));
                    }
                    base.declare_group(toks[1]);
                }
                "profile" => {
                    // profile <group> <F|FP|wFP|H> <deg|inf> <true|false>
                    if toks.len() != 5 {
                        return Err(err("expected `profile <group> <prop> <deg|inf> <bool>`"));
                    }
                    let prop = match toks[2] {
                        "F" => Prop::F,
                        "FP" => Prop::Fp,
                        "wFP" => Prop::Wfp,
                        "H" => Prop::Hk,
                        _ => return Err(err("property must be F, FP, wFP or H")),
                    };
                    let deg = if toks[3] == "inf" {
                        Degree::Inf
                    } else {
                        Degree::Fin(
                            toks[3]
                                .parse()
                                .map_err(|_| err("bad degree"))?,
                        )
                    };
                    let value = match toks[4] {
                        "true" => Flag::True,
                        "false" => Flag::False,
                        _ => return Err(err("flag must be true or false")),
                    };
                    base.check_group(toks[1])
                        .map_err(|_| err("group not declared"))?;
                    base.set(toks[1], prop, deg, value, "declared fact")?;
                }
                "ses" => {
                    if toks.len() != 5 {
                        return Err(err("expected `ses <name> <kernel> <middle> <quotient>`"));
                    }
                    for g in &toks[2..5] {
                        base.check_group(g).map_err(|_| err("group not declared"))?;
                    }
                    base.seses.insert(
                        toks[1].to_string(),
                        Ses {
                            kernel: toks[2].to_string(),
                            middle: toks[3].to_string(),
                            quotient: toks[4].to_string(),
                        },
                    );
                }
                "h0" => {
                    if toks.len() != 4 {
                        return Err(err("expected `h0 <ses> <n> <true|false>`"));
                    }
                    if !base.seses.contains_key(toks[1]) {
                        return Err(err("sequence not declared"));
                    }
                    let n: usize = toks[2].parse().map_err(|_| err("bad degree"))?;
                    let value = match toks[3] {
                        "true" => Flag::True,
                        "false" => Flag::False,
                        _ => return Err(err("flag must be true or false")),
                    };
                    base.h0.insert((toks[1].to_string(), n), value);
                }
                "fibre" => {
                    if toks.len() != 5 {
                        return Err(err("expected `fibre <name> <seq1> <seq2> <product>`"));
                    }
                    base.check_group(toks[4]).map_err(|_| err("group not declared"))?;
                    base.fibres.insert(
                        toks[1].to_string(),
                        Fibre {
                            seq1: toks[2].to_string(),
                            seq2: toks[3].to_string(),
                            product: toks[4].to_string(),
                        },
                    );
                }
                "product" => {
                    if toks.len() < 3 {
                        return Err(err("expected `product <name> <factor>...`"));
                    }
                    base.check_group(toks[1]).map_err(|_| err("group not declared"))?;
                    for g in &toks[2..] {
                        base.check_group(g).map_err(|_| err("group not declared"))?;
                    }
                    base.products.insert(
                        toks[1].to_string(),
                        ProductDecl {
                            factors: toks[2..].iter().map(|s| s.to_string()).collect(),
                        },
                    );
                }
                "vs" => {
                    if toks.len() != 4 {
                        return Err(err("expected `vs <product> <k> <true|false>`"));
                    }
                    base.check_group(toks[1]).map_err(|_| err("group not declared"))?;
                    let k: usize = toks[2].parse().map_err(|_| err("bad k"))?;
                    let value = toks[3] == "true";
                    base.vs.insert((toks[1].to_string(), k), value);
                }
                "vnilq" => {
                    if toks.len() != 3 {
                        return Err(err("expected `vnilq <product> <true|false>`"));
                    }
                    base.check_group(toks[1]).map_err(|_| err("group not declared"))?;
                    base.vnilq.insert(toks[1].to_string(), toks[2] == "true");
                }
                "finite-index" => {
                    if toks.len() != 3 {
                        return Err(err("expected `finite-index <g> <h>`"));
                    }
                    for g in &toks[1..3] {
                        base.check_group(g).map_err(|_| err("group not declared"))?;
                    }
                    base.finite_index
                        .push((toks[1].to_string(), toks[2].to_string()));
                }
                _ => return Err(err("unknown fact kind")),
            }
        }
        Ok(base)
    }

    /// One summary line per group and property.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (name, profile) in &self.groups {
            for p in [Prop::F, Prop::Fp, Prop::Wfp, Prop::Hk] {
                if let Some(d) = profile.true_through(p) {
                    let prov = profile.of(p).provenance(d).unwrap_or("");
                    out.push_str(&format!("{name} {p} true through {d} [{prov}]\n"));
                }
                let falses: Vec<usize> = profile
                    .of(p)
                    .deg
                    .iter()
                    .filter(|(_, (fl, _))| *fl == Flag::False)
                    .map(|(k, _)| *k)
                    .collect();
                if let Some(k) = falses.iter().min() {
                    out.push_str(&format!("{name} {p} false from {k}\n"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_with(groups: &[&str]) -> FactBase {
        let mut b = FactBase::default();
        for g in groups {
            b.declare_group(g);
        }
        b
    }

    #[test]
    fn chain_and_downward_closure() {
        let mut b = base_with(&["G"]);
        b.set("G", Prop::F, Degree::Fin(3), Flag::True, "declared").unwrap();
        assert_eq!(b.flag("G", Prop::F, Degree::Fin(1)), Flag::True);
        assert_eq!(b.flag("G", Prop::Fp, Degree::Fin(3)), Flag::True);
        assert_eq!(b.flag("G", Prop::Wfp, Degree::Fin(2)), Flag::True);
        assert_eq!(b.flag("G", Prop::Hk, Degree::Fin(3)), Flag::True);
        assert_eq!(b.flag("G", Prop::F, Degree::Fin(4)), Flag::Unknown);
        // upward false closure and chain contrapositive
        b.set("G", Prop::Wfp, Degree::Fin(5), Flag::False, "declared").unwrap();
        assert_eq!(b.flag("G", Prop::Wfp, Degree::Fin(7)), Flag::False);
        assert_eq!(b.flag("G", Prop::Fp, Degree::Fin(5)), Flag::False);
        assert_eq!(b.flag("G", Prop::F, Degree::Fin(6)), Flag::False);
        // consistency violation
        assert!(b.set("G", Prop::F, Degree::Fin(5), Flag::True, "bad").is_err());
    }

    #[test]
    fn lemma_52_fires_and_respects_missing_hypotheses() {
        let mut b = base_with(&["N", "G", "Q"]);
        b.seses.insert(
            "S".into(),
            Ses {
                kernel: "N".into(),
                middle: "G".into(),
                quotient: "Q".into(),
            },
        );
        b.set("N", Prop::Wfp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b.set("Q", Prop::Fp, Degree::Fin(3), Flag::True, "declared").unwrap();
        b.h0.insert(("S".into(), 3), Flag::True);
        let trace = b.derive().unwrap();
        assert!(trace.iter().any(|f| f.rule == "Lemma 5.2"));
        for j in 0..=3 {
            assert_eq!(b.flag("G", Prop::Hk, Degree::Fin(j)), Flag::True, "H_{j}");
        }
        assert_eq!(b.flag("G", Prop::Hk, Degree::Fin(4)), Flag::Unknown);
        // without the h0 fact nothing fires
        let mut b2 = base_with(&["N", "G", "Q"]);
        b2.seses.insert(
            "S".into(),
            Ses {
                kernel: "N".into(),
                middle: "G".into(),
                quotient: "Q".into(),
            },
        );
        b2.set("N", Prop::Wfp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b2.set("Q", Prop::Fp, Degree::Fin(3), Flag::True, "declared").unwrap();
        let trace = b2.derive().unwrap();
        assert!(trace.is_empty());
        assert_eq!(b2.flag("G", Prop::Hk, Degree::Fin(1)), Flag::Unknown);
    }

    #[test]
    fn lemma_52_at_infinity() {
        let mut b = base_with(&["N", "G", "Q"]);
        b.seses.insert(
            "S".into(),
            Ses {
                kernel: "N".into(),
                middle: "G".into(),
                quotient: "Q".into(),
            },
        );
        b.set("N", Prop::Wfp, Degree::Inf, Flag::True, "declared").unwrap();
        b.set("Q", Prop::Fp, Degree::Inf, Flag::True, "declared").unwrap();
        for n in 1..=MAX_DEGREE {
            b.h0.insert(("S".into(), n), Flag::True);
        }
        b.derive().unwrap();
        for j in 0..=MAX_DEGREE {
            assert_eq!(b.flag("G", Prop::Hk, Degree::Fin(j)), Flag::True);
        }
    }

    #[test]
    fn lemma_53_forward_and_converse() {
        let mut b = base_with(&["N", "G", "Q"]);
        b.seses.insert(
            "S".into(),
            Ses {
                kernel: "N".into(),
                middle: "G".into(),
                quotient: "Q".into(),
            },
        );
        b.set("N", Prop::Wfp, Degree::Fin(1), Flag::True, "declared").unwrap();
        b.set("G", Prop::Wfp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b.set("Q", Prop::Fp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b.set("Q", Prop::Hk, Degree::Fin(3), Flag::True, "declared").unwrap();
        let trace = b.derive().unwrap();
        assert!(trace.iter().any(|f| f.rule == "Lemma 5.3"));
        assert_eq!(b.h0.get(&("S".into(), 2)), Some(&Flag::True));

        // converse: given h0 and wFP_{n+1} of the middle, conclude H_{n+1}(Q)
        let mut b = base_with(&["N", "G", "Q"]);
        b.seses.insert(
            "S".into(),
            Ses {
                kernel: "N".into(),
                middle: "G".into(),
                quotient: "Q".into(),
            },
        );
        b.set("N", Prop::Wfp, Degree::Fin(1), Flag::True, "declared").unwrap();
        b.set("G", Prop::Wfp, Degree::Fin(3), Flag::True, "declared").unwrap();
        b.set("Q", Prop::Fp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b.h0.insert(("S".into(), 2), Flag::True);
        let trace = b.derive().unwrap();
        assert!(trace.iter().any(|f| f.rule == "Lemma 5.3 (converse)"));
        assert_eq!(b.flag("Q", Prop::Hk, Degree::Fin(3)), Flag::True);

        // hypotheses missing: no conclusion
        let mut b = base_with(&["N", "G", "Q"]);
        b.seses.insert(
            "S".into(),
            Ses {
                kernel: "N".into(),
                middle: "G".into(),
                quotient: "Q".into(),
            },
        );
        b.set("Q", Prop::Hk, Degree::Fin(3), Flag::True, "declared").unwrap();
        let trace = b.derive().unwrap();
        assert!(trace.is_empty());
    }

    #[test]
    fn theorem_54_fires() {
        let mut b = base_with(&["N1", "G1", "N2", "G2", "Q", "P"]);
        b.seses.insert(
            "S1".into(),
            Ses {
                kernel: "N1".into(),
                middle: "G1".into(),
                quotient: "Q".into(),
            },
        );
        b.seses.insert(
            "S2".into(),
            Ses {
                kernel: "N2".into(),
                middle: "G2".into(),
                quotient: "Q".into(),
            },
        );
        b.fibres.insert(
            "FB".into(),
            Fibre {
                seq1: "S1".into(),
                seq2: "S2".into(),
                product: "P".into(),
            },
        );
        b.set("N1", Prop::Wfp, Degree::Fin(1), Flag::True, "declared").unwrap();
        b.set("G1", Prop::Wfp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b.set("G2", Prop::Fp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b.set("Q", Prop::Fp, Degree::Fin(3), Flag::True, "declared").unwrap();
        let trace = b.derive().unwrap();
        assert!(trace.iter().any(|f| f.rule == "Theorem 5.4"
            && f.conclusion == "P wFP_2"));
        assert_eq!(b.flag("P", Prop::Wfp, Degree::Fin(2)), Flag::True);
        // missing Q hypothesis: no firing
        let mut b2 = base_with(&["N1", "G1", "N2", "G2", "Q", "P"]);
        b2.seses.insert(
            "S1".into(),
            Ses {
                kernel: "N1".into(),
                middle: "G1".into(),
                quotient: "Q".into(),
            },
        );
        b2.seses.insert(
            "S2".into(),
            Ses {
                kernel: "N2".into(),
                middle: "G2".into(),
                quotient: "Q".into(),
            },
        );
        b2.fibres.insert(
            "FB".into(),
            Fibre {
                seq1: "S1".into(),
                seq2: "S2".into(),
                product: "P".into(),
            },
        );
        b2.set("N1", Prop::Wfp, Degree::Fin(1), Flag::True, "declared").unwrap();
        b2.set("G1", Prop::Wfp, Degree::Fin(2), Flag::True, "declared").unwrap();
        b2.set("G2", Prop::Fp, Degree::Fin(2), Flag::True, "declared").unwrap();
        let trace = b2.derive().unwrap();
        assert!(!trace.iter().any(|f| f.rule == "Theorem 5.4"));
    }

    #[test]
    fn corollary_55_and_proposition_35() {
        let mut b = base_with(&["G1", "G2", "G3", "P"]);
        b.products.insert(
            "P".into(),
            ProductDecl {
                factors: vec!["G1".into(), "G2".into(), "G3".into()],
            },
        );
        for g in ["G1", "G2", "G3"] {
            b.set(g, Prop::Fp, Degree::Inf, Flag::True, "free factor").unwrap();
        }
        b.vs.insert(("P".into(), 2), true);
        let trace = b.derive().unwrap();
        assert!(trace.iter().any(|f| f.rule == "Corollary 5.5"
            && f.conclusion == "P wFP_2"));
        // a false certificate blocks the rule
        let mut b2 = base_with(&["G1", "P"]);
        b2.products.insert(
            "P".into(),
            ProductDecl {
                factors: vec!["G1".into()],
            },
        );
        b2.set("G1", Prop::Fp, Degree::Inf, Flag::True, "free factor").unwrap();
        b2.vs.insert(("P".into(), 2), false);
        let trace = b2.derive().unwrap();
        assert!(!trace.iter().any(|f| f.rule == "Corollary 5.5"));

        // the k = 1 route needs the virtually nilpotent quotient flag
        let mut b3 = base_with(&["G1", "G2", "P"]);
        b3.products.insert(
            "P".into(),
            ProductDecl {
                factors: vec!["G1".into(), "G2".into()],
            },
        );
        for g in ["G1", "G2"] {
            b3.set(g, Prop::F, Degree::Fin(1), Flag::True, "declared").unwrap();
        }
        b3.vs.insert(("P".into(), 1), true);
        b3.vnilq.insert("P".into(), true);
        let trace = b3.derive().unwrap();
        assert!(trace.iter().any(|f| f.rule == "Proposition 3.5"));
        assert_eq!(b3.flag("P", Prop::F, Degree::Fin(1)), Flag::True);
    }

    #[test]
    fn engine_is_monotone_and_idempotent() {
        let text = "\
group N1\ngroup G1\ngroup N2\ngroup G2\ngroup Q\ngroup P\n\
profile N1 wFP 1 true\nprofile G1 wFP 2 true\nprofile G2 FP 2 true\nprofile Q FP 3 true\n\
ses S1 N1 G1 Q\nses S2 N2 G2 Q\nfibre FB S1 S2 P\n";
        let mut b = FactBase::parse(text).unwrap();
        let t1 = b.derive().unwrap();
        assert!(!t1.is_empty());
        let snapshot = format!("{:?}", b.groups);
        let t2 = b.derive().unwrap();
        assert!(t2.is_empty(), "second run must be a fixed point");
        assert_eq!(format!("{:?}", b.groups), snapshot);
        // adding a premise only adds conclusions
        b.set("N2", Prop::Wfp, Degree::Fin(1), Flag::True, "extra").unwrap();
        let t3 = b.derive().unwrap();
        let _ = t3;
        assert_eq!(b.flag("P", Prop::Wfp, Degree::Fin(2)), Flag::True);
    }

    #[test]
    fn finite_index_transfer() {
        let mut b = base_with(&["G", "H"]);
        b.finite_index.push(("G".into(), "H".into()));
        b.set("G", Prop::F, Degree::Fin(2), Flag::True, "declared").unwrap();
        b.derive().unwrap();
        assert_eq!(b.flag("H", Prop::F, Degree::Fin(2)), Flag::True);
        assert_eq!(b.flag("H", Prop::Wfp, Degree::Fin(2)), Flag::True);
    }

    #[test]
    fn parse_errors() {
        assert!(FactBase::parse("profile G F 1 true").is_err(), "undeclared group");
        assert!(FactBase::parse("group G\nprofile G X 1 true").is_err());
        assert!(FactBase::parse("nonsense").is_err());
        let b = FactBase::parse("group G # a comment\n\n# full comment line\n").unwrap();
        assert!(b.groups.contains_key("G"));
    }
}

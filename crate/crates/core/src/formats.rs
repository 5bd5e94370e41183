//! Definition-file formats: quotient maps (`.map`), product subgroups
//! (`.sdp`), kernel specifications (`.kernel`), characters, and the
//! named workspace the batch interface works over.
//!
//! All formats are line oriented; `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::flags::FactBase;
use crate::linalg::IntMat;
use crate::product::{Clause, ProductGroup, ProductSubgroup};
use crate::quotient::{AbelianGroup, FiniteGroup, Nilpotent2Group, QuotientMap, Target, TargetElt};
use crate::sigma::{Character, KernelSpec};
use crate::word::FreeGroup;

fn clean_lines(text: &str) -> Vec<(usize, String)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect()
}

fn parse_err(lineno: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {lineno}: {msg}"))
}

fn parse_ints(lineno: usize, s: &str) -> Result<Vec<i64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<i64>()
                .map_err(|_| parse_err(lineno, format!("bad integer `{t}`")))
        })
        .collect()
}

fn parse_usizes(lineno: usize, s: &str) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| parse_err(lineno, format!("bad index `{t}`")))
        })
        .collect()
}

/// Target grammar shared by `.map` files and `.sdp` equalizer clauses:
/// `z <d>`, `zmod <n>`, `abelian <g>` (with `rel` rows), `finite-table
/// <n>` (with `row` rows), `finite-perm <deg>`, `nilp2 <m>`.
struct TargetSpec {
    kind: TargetKind,
}

enum TargetKind {
    Abelian { gens: usize, rel_rows: Vec<Vec<i64>> },
    FiniteTable { rows: Vec<Vec<usize>> },
    FinitePerm { degree: usize },
    Nilp2 { m: usize },
}

impl TargetSpec {
    fn parse_header(lineno: usize, toks: &[&str]) -> Result<TargetSpec> {
        let kind = match toks {
            ["z", d] => TargetKind::Abelian {
                gens: d.parse().map_err(|_| parse_err(lineno, "bad dimension"))?,
                rel_rows: Vec::new(),
            },
            ["zmod", n] => {
                let n: i64 = n.parse().map_err(|_| parse_err(lineno, "bad modulus"))?;
                TargetKind::Abelian {
                    gens: 1,
                    rel_rows: vec![vec![n]],
                }
            }
            ["abelian", g] => TargetKind::Abelian {
                gens: g.parse().map_err(|_| parse_err(lineno, "bad generator count"))?,
                rel_rows: Vec::new(),
            },
            ["finite-table", n] => {
                let n: usize = n.parse().map_err(|_| parse_err(lineno, "bad order"))?;
                TargetKind::FiniteTable {
                    rows: Vec::with_capacity(n),
                }
            }
            ["finite-perm", d] => TargetKind::FinitePerm {
                degree: d.parse().map_err(|_| parse_err(lineno, "bad degree"))?,
            },
            ["nilp2", m] => TargetKind::Nilp2 {
                m: m.parse().map_err(|_| parse_err(lineno, "bad rank"))?,
            },
            _ => return Err(parse_err(lineno, "unknown target kind")),
        };
        Ok(TargetSpec { kind })
    }

    fn feed_rel(&mut self, lineno: usize, row: Vec<i64>) -> Result<()> {
        match &mut self.kind {
            TargetKind::Abelian { gens, rel_rows } => {
                if row.len() != *gens {
                    return Err(parse_err(lineno, "relation row length mismatch"));
                }
                rel_rows.push(row);
                Ok(())
            }
            _ => Err(parse_err(lineno, "`rel` only applies to abelian targets")),
        }
    }

    fn feed_row(&mut self, lineno: usize, row: Vec<usize>) -> Result<()> {
        match &mut self.kind {
            TargetKind::FiniteTable { rows } => {
                rows.push(row);
                Ok(())
            }
            _ => Err(parse_err(lineno, "`row` only applies to finite-table targets")),
        }
    }

    /// Build the target; permutation groups need the image permutations.
    fn build(&self, lineno: usize, image_rows: &[Vec<i64>]) -> Result<Target> {
        match &self.kind {
            TargetKind::Abelian { gens, rel_rows } => {
                let rows = if rel_rows.is_empty() {
                    IntMat::zeros(0, *gens)
                } else {
                    IntMat::from_rows_i64(rel_rows)
                };
                Ok(Target::Abelian(AbelianGroup::from_relation_rows(*gens, &rows)))
            }
            TargetKind::FiniteTable { rows } => {
                Ok(Target::Finite(FiniteGroup::from_table(rows.clone())?))
            }
            TargetKind::FinitePerm { degree } => {
                let perms: Vec<Vec<usize>> = image_rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|&x| {
                                usize::try_from(x)
                                    .map_err(|_| parse_err(lineno, "negative permutation entry"))
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?;
                Ok(Target::Finite(FiniteGroup::from_permutations(*degree, &perms)?))
            }
            TargetKind::Nilp2 { m } => Ok(Target::Nilpotent2(Nilpotent2Group::new(*m))),
        }
    }

    /// Decode one image row into a target element.
    fn element(&self, lineno: usize, target: &Target, row: &[i64]) -> Result<TargetElt> {
        match (&self.kind, target) {
            (TargetKind::Abelian { gens, .. }, Target::Abelian(_)) => {
                if row.len() != *gens {
                    return Err(parse_err(lineno, "image row length mismatch"));
                }
                Ok(TargetElt::Abelian(row.iter().map(|&x| BigInt::from(x)).collect()))
            }
            (TargetKind::FiniteTable { .. }, Target::Finite(g)) => {
                if row.len() != 1 || row[0] < 0 || row[0] as usize >= g.order() {
                    return Err(parse_err(lineno, "image must be one element index"));
                }
                Ok(TargetElt::Finite(row[0] as usize))
            }
            (TargetKind::FinitePerm { degree }, Target::Finite(_)) => {
                if row.len() != *degree {
                    return Err(parse_err(lineno, "permutation length mismatch"));
                }
                // resolved later against the closure numbering
                Err(parse_err(
                    lineno,
                    "internal: permutation images are resolved by the caller",
                ))
            }
            (TargetKind::Nilp2 { m }, Target::Nilpotent2(n)) => {
                if row.len() != m + n.pair_count() {
                    return Err(parse_err(lineno, "class-2 image length mismatch"));
                }
                let a = row[..*m].iter().map(|&x| BigInt::from(x)).collect();
                let b = row[*m..].iter().map(|&x| BigInt::from(x)).collect();
                Ok(TargetElt::Nilpotent2(n.element(a, b)?))
            }
            _ => Err(parse_err(lineno, "image kind does not match target")),
        }
    }
}

/// Resolve generator images for a target: permutation targets map each
/// image row to its element index in the closure.
fn resolve_images(
    lineno: usize,
    spec: &TargetSpec,
    target: &Target,
    image_rows: &[Vec<i64>],
) -> Result<Vec<TargetElt>> {
    if let (TargetKind::FinitePerm { degree }, Target::Finite(g)) = (&spec.kind, target) {
        // re-run the closure to get the numbering, then look up each row
        let perms: Vec<Vec<usize>> = image_rows
            .iter()
            .map(|r| r.iter().map(|&x| x as usize).collect())
            .collect();
        let reference = FiniteGroup::from_permutations(*degree, &perms)?;
        if reference.order() != g.order() {
            return Err(Error::Internal("permutation closure drifted".into()));
        }
        return Ok(reference.generators().iter().map(|&x| TargetElt::Finite(x)).collect());
    }
    image_rows
        .iter()
        .map(|r| spec.element(lineno, target, r))
        .collect()
}

// ---------------------------------------------------------------------------
// .map files
// ---------------------------------------------------------------------------

/// Parse a quotient map file: `domain <ranks…>`, a target block, then
/// `images` … `end` with one row per domain generator.
pub fn parse_map(text: &str) -> Result<QuotientMap> {
    let lines = clean_lines(text);
    let mut domain: Option<Vec<usize>> = None;
    let mut target_spec: Option<TargetSpec> = None;
    let mut image_rows: Vec<Vec<i64>> = Vec::new();
    let mut in_images = false;
    for (lineno, line) in &lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if in_images {
            if toks == ["end"] {
                in_images = false;
                continue;
            }
            image_rows.push(parse_ints(*lineno, line)?);
            continue;
        }
        match toks[0] {
            "domain" => {
                domain = Some(parse_usizes(*lineno, &line["domain".len()..])?);
            }
            "target" => {
                target_spec = Some(TargetSpec::parse_header(*lineno, &toks[1..])?);
            }
            "rel" => {
                target_spec
                    .as_mut()
                    .ok_or_else(|| parse_err(*lineno, "rel before target"))?
                    .feed_rel(*lineno, parse_ints(*lineno, &line["rel".len()..])?)?;
            }
            "row" => {
                target_spec
                    .as_mut()
                    .ok_or_else(|| parse_err(*lineno, "row before target"))?
                    .feed_row(*lineno, parse_usizes(*lineno, &line["row".len()..])?)?;
            }
            "images" => in_images = true,
            other => return Err(parse_err(*lineno, format!("unknown directive `{other}`"))),
        }
    }
    let domain = domain.ok_or_else(|| Error::Parse("map file missing `domain`".into()))?;
    let spec = target_spec.ok_or_else(|| Error::Parse("map file missing `target`".into()))?;
    if domain.is_empty() || domain.iter().any(|&r| r == 0) {
        return Err(Error::Parse("domain ranks must be positive".into()));
    }
    let total: usize = domain.iter().sum();
    if image_rows.len() != total {
        return Err(Error::Parse(format!(
            "expected {total} image rows, found {}",
            image_rows.len()
        )));
    }
    let target = spec.build(0, &image_rows)?;
    let flat = resolve_images(0, &spec, &target, &image_rows)?;
    let factors: Vec<FreeGroup> = domain.iter().map(|&r| FreeGroup::new(r)).collect();
    let mut images = Vec::new();
    let mut offset = 0;
    for f in &factors {
        images.push(flat[offset..offset + f.rank()].to_vec());
        offset += f.rank();
    }
    QuotientMap::new(ProductGroup::new(factors), target, images)
}

// ---------------------------------------------------------------------------
// .sdp files
// ---------------------------------------------------------------------------

/// Parse a product-subgroup definition: `factors <ranks…>` then one
/// `clause … end` block per constraint.
pub fn parse_sdp(text: &str) -> Result<ProductSubgroup> {
    let lines = clean_lines(text);
    let mut factors: Option<Vec<usize>> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (lineno, line) = &lines[i];
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "factors" => {
                factors = Some(parse_usizes(*lineno, &line["factors".len()..])?);
                i += 1;
            }
            "clause" => {
                let ranks = factors
                    .clone()
                    .ok_or_else(|| parse_err(*lineno, "clause before factors"))?;
                let ambient =
                    ProductGroup::new(ranks.iter().map(|&r| FreeGroup::new(r)).collect());
                let (clause, consumed) = parse_clause(&lines[i..], &ambient)?;
                clauses.push(clause);
                i += consumed;
            }
            other => return Err(parse_err(*lineno, format!("unknown directive `{other}`"))),
        }
    }
    let ranks = factors.ok_or_else(|| Error::Parse("sdp file missing `factors`".into()))?;
    if ranks.is_empty() || ranks.iter().any(|&r| r == 0) {
        return Err(Error::Parse("factor ranks must be positive".into()));
    }
    let ambient = ProductGroup::new(ranks.iter().map(|&r| FreeGroup::new(r)).collect());
    ProductSubgroup::from_clauses(ambient, clauses)
}

fn parse_clause(lines: &[(usize, String)], ambient: &ProductGroup) -> Result<(Clause, usize)> {
    let (head_no, head) = &lines[0];
    let toks: Vec<&str> = head.split_whitespace().collect();
    match toks.get(1) {
        Some(&"kernel") => {
            // clause kernel z <d> | zmod <n> | abelian <g>
            let mut spec = TargetSpec::parse_header(*head_no, &toks[2..])?;
            let mut rows: Vec<Vec<i64>> = Vec::new();
            let mut used = 1;
            for (lineno, line) in &lines[1..] {
                used += 1;
                let t: Vec<&str> = line.split_whitespace().collect();
                match t[0] {
                    "end" => break,
                    "rel" => spec.feed_rel(*lineno, parse_ints(*lineno, &line["rel".len()..])?)?,
                    "row" => rows.push(parse_ints(*lineno, &line["row".len()..])?),
                    _ => rows.push(parse_ints(*lineno, line)?),
                }
            }
            let target = spec.build(*head_no, &[])?;
            let Target::Abelian(a) = target else {
                return Err(parse_err(*head_no, "kernel clauses need abelian targets"));
            };
            if rows.iter().any(|r| r.len() != ambient.total_rank()) {
                return Err(parse_err(
                    *head_no,
                    format!("kernel rows must have {} columns", ambient.total_rank()),
                ));
            }
            if rows.len() != a.gens() {
                return Err(parse_err(
                    *head_no,
                    format!("kernel clause needs {} matrix rows", a.gens()),
                ));
            }
            let matrix = if rows.is_empty() {
                IntMat::zeros(0, ambient.total_rank())
            } else {
                IntMat::from_rows_i64(&rows)
            };
            // split into per-factor blocks against the declared target
            let mut blocks = Vec::new();
            let mut offset = 0;
            for f in ambient.factors() {
                let cols: Vec<usize> = (offset..offset + f.rank()).collect();
                blocks.push(matrix.select_columns(&cols));
                offset += f.rank();
            }
            Ok((
                Clause::Abelian(crate::product::AbelianClause::new(a, blocks)),
                used,
            ))
        }
        Some(&"equalizer") => {
            // clause equalizer <i> <j>   (1-based factors)
            let i: usize = toks
                .get(2)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(*head_no, "bad factor index"))?;
            let j: usize = toks
                .get(3)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(*head_no, "bad factor index"))?;
            if i == 0 || j == 0 || i > ambient.n() || j > ambient.n() || i == j {
                return Err(parse_err(*head_no, "equalizer needs two distinct 1-based factors"));
            }
            let (i, j) = (i - 1, j - 1);
            let mut spec: Option<TargetSpec> = None;
            let mut left: Vec<Vec<i64>> = Vec::new();
            let mut right: Vec<Vec<i64>> = Vec::new();
            let mut used = 1;
            for (lineno, line) in &lines[1..] {
                used += 1;
                let t: Vec<&str> = line.split_whitespace().collect();
                match t[0] {
                    "end" => break,
                    "target" => spec = Some(TargetSpec::parse_header(*lineno, &t[1..])?),
                    "rel" => spec
                        .as_mut()
                        .ok_or_else(|| parse_err(*lineno, "rel before target"))?
                        .feed_rel(*lineno, parse_ints(*lineno, &line["rel".len()..])?)?,
                    "row" => spec
                        .as_mut()
                        .ok_or_else(|| parse_err(*lineno, "row before target"))?
                        .feed_row(*lineno, parse_usizes(*lineno, &line["row".len()..])?)?,
                    "left" => left.push(parse_ints(*lineno, &line["left".len()..])?),
                    "right" => right.push(parse_ints(*lineno, &line["right".len()..])?),
                    _ => return Err(parse_err(*lineno, "unknown clause line")),
                }
            }
            let spec = spec.ok_or_else(|| parse_err(*head_no, "equalizer missing target"))?;
            if left.len() != ambient.factor(i).rank() || right.len() != ambient.factor(j).rank() {
                return Err(parse_err(
                    *head_no,
                    "left/right image rows must match the factor ranks",
                ));
            }
            // permutation targets take the closure of all images
            let all_rows: Vec<Vec<i64>> = left.iter().chain(&right).cloned().collect();
            let target = spec.build(*head_no, &all_rows)?;
            let (limgs, rimgs) = match (&spec.kind, &target) {
                (TargetKind::FinitePerm { degree }, Target::Finite(g)) => {
                    let perms: Vec<Vec<usize>> = all_rows
                        .iter()
                        .map(|r| r.iter().map(|&x| x as usize).collect())
                        .collect();
                    let reference = FiniteGroup::from_permutations(*degree, &perms)?;
                    if reference.order() != g.order() {
                        return Err(Error::Internal("permutation closure drifted".into()));
                    }
                    let gens = reference.generators();
                    let l = gens[..left.len()].iter().map(|&x| TargetElt::Finite(x)).collect();
                    let r = gens[left.len()..].iter().map(|&x| TargetElt::Finite(x)).collect();
                    (l, r)
                }
                _ => {
                    let l = left
                        .iter()
                        .map(|r| spec.element(*head_no, &target, r))
                        .collect::<Result<Vec<_>>>()?;
                    let r = right
                        .iter()
                        .map(|r| spec.element(*head_no, &target, r))
                        .collect::<Result<Vec<_>>>()?;
                    (l, r)
                }
            };
            let qi = QuotientMap::on_free_group(ambient.factor(i).clone(), target.clone(), limgs)?;
            let qj = QuotientMap::on_free_group(ambient.factor(j).clone(), target, rimgs)?;
            Ok((Clause::equalizer(ambient, i, qi, j, qj)?, used))
        }
        _ => Err(parse_err(*head_no, "clause kind must be `kernel` or `equalizer`")),
    }
}

// ---------------------------------------------------------------------------
// .kernel files and characters
// ---------------------------------------------------------------------------

/// Parse a kernel spec: a `ranks` line followed by the block matrix
/// rows.
pub fn parse_kernel(text: &str) -> Result<KernelSpec> {
    let lines = clean_lines(text);
    let mut ranks: Option<Vec<usize>> = None;
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (lineno, line) in &lines {
        if let Some(rest) = line.strip_prefix("ranks") {
            ranks = Some(parse_usizes(*lineno, rest)?);
        } else {
            rows.push(parse_ints(*lineno, line)?);
        }
    }
    let ranks = ranks.ok_or_else(|| Error::Parse("kernel file missing `ranks`".into()))?;
    let total: usize = ranks.iter().sum();
    if rows.iter().any(|r| r.len() != total) {
        return Err(Error::Parse(format!(
            "kernel rows must have {total} entries"
        )));
    }
    let matrix = if rows.is_empty() {
        IntMat::zeros(0, total)
    } else {
        IntMat::from_rows_i64(&rows)
    };
    KernelSpec::new(&ranks, matrix)
}

/// Parse a character: blocks separated by `|`, rational coordinates
/// separated by commas, e.g. `1,1|0,2` or `1/2,-1|3`.
pub fn parse_character(text: &str) -> Result<Character> {
    let mut blocks: Vec<Vec<BigRational>> = Vec::new();
    for block in text.split('|') {
        let mut coords = Vec::new();
        for tok in block.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                return Err(Error::Parse("empty character coordinate".into()));
            }
            let r = match tok.split_once('/') {
                Some((n, d)) => {
                    let n: BigInt = n.trim().parse().map_err(|_| {
                        Error::Parse(format!("bad character coordinate `{tok}`"))
                    })?;
                    let d: BigInt = d.trim().parse().map_err(|_| {
                        Error::Parse(format!("bad character coordinate `{tok}`"))
                    })?;
                    BigRational::new(n, d)
                }
                None => {
                    let n: BigInt = tok.parse().map_err(|_| {
                        Error::Parse(format!("bad character coordinate `{tok}`"))
                    })?;
                    BigRational::from(n)
                }
            };
            coords.push(r);
        }
        blocks.push(coords);
    }
    let ambient = ProductGroup::new(blocks.iter().map(|b| FreeGroup::new(b.len())).collect());
    Character::new(ambient, blocks)
}

// ---------------------------------------------------------------------------
// workspace
// ---------------------------------------------------------------------------

/// Named registry of loaded definition files; names are file stems and
/// must be unique.
#[derive(Default)]
pub struct Workspace {
    pub maps: BTreeMap<String, QuotientMap>,
    pub subgroups: BTreeMap<String, ProductSubgroup>,
    pub kernels: BTreeMap<String, KernelSpec>,
    pub facts: BTreeMap<String, FactBase>,
}

impl Workspace {
    pub fn load(&mut self, path: &Path) -> Result<String> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Parse(format!("unusable path {}", path.display())))?
            .to_string();
        let text = std::fs::read_to_string(path)?;
        let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("");
        let clash = match ext {
            "map" => self.maps.insert(name.clone(), parse_map(&text)?).is_some(),
            "sdp" => self
                .subgroups
                .insert(name.clone(), parse_sdp(&text)?)
                .is_some(),
            "kernel" => self
                .kernels
                .insert(name.clone(), parse_kernel(&text)?)
                .is_some(),
            "facts" => self
                .facts
                .insert(name.clone(), FactBase::parse(&text)?)
                .is_some(),
            other => {
                return Err(Error::Parse(format!(
                    "unknown file extension `.{other}` for {}",
                    path.display()
                )))
            }
        };
        if clash {
            return Err(Error::Parse(format!("duplicate workspace name `{name}`")));
        }
        Ok(name)
    }
}

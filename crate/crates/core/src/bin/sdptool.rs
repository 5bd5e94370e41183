//! Batch command-line interface: free-group arithmetic, subgroup
//! graphs, product-subgroup analysis, finiteness lengths, nilpotency
//! witnesses, homology and the finiteness-flag engine.
//!
//! Exit codes: 0 success, 1 precondition or usage violation, 2 internal
//! inconsistency.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdp_core::error::Error;
use sdp_core::flags::FactBase;
use sdp_core::formats;
use sdp_core::homology::{coinvariants, h1, rs_presentation, rs_presentation_raw};
use sdp_core::linalg::IntMat;
use sdp_core::product::{
    fibre_generators, fibre_product, split_section, FibreCert, SectionSpec, VsOutcome,
};
use sdp_core::report::Report;
use sdp_core::reproduce::{run_suite, DEFAULT_SEED, SUITES};
use sdp_core::sigma::{finiteness_length, s_gamma_p, sigma_member};
use sdp_core::stallings::SubgroupGraph;
use sdp_core::witness::{class_bound, commutator_witness, stallings_bieri_form};
use sdp_core::word::FreeGroup;

/// Toolkit for subgroups of direct products of free groups.
#[derive(Parser)]
#[command(name = "sdptool", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free-group word arithmetic.
    Fg(FgArgs),
    /// Folded subgroup graphs of free groups.
    Subgroup(SubgroupArgs),
    /// Product-subgroup analysis.
    Sdp(SdpArgs),
    /// Character-sphere membership and finiteness lengths.
    Sigma(SigmaArgs),
    /// Nilpotency witnesses and normal forms.
    Witness(WitnessArgs),
    /// Homology computations.
    Hom(HomArgs),
    /// Finiteness-flag derivation.
    Flags(FlagsArgs),
    /// Reproduction suites for the acceptance checks.
    Reproduce {
        /// One of: bieri-ladder, exchange-fuzz, witness-fuzz,
        /// snf-oracle, h1-examples, flag-tables, all
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct FgArgs {
    #[command(subcommand)]
    op: FgOp,
}

#[derive(Subcommand)]
enum FgOp {
    /// Freely reduce a word.
    Reduce {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        word: String,
    },
    /// Multiply two words.
    Mul {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        left: String,
        right: String,
    },
    /// Invert a word.
    Inv {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        word: String,
    },
    /// Single commutator [u, v].
    Comm {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        left: String,
        right: String,
    },
    /// Exponent-sum vector.
    Ab {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        word: String,
    },
}

#[derive(Args)]
struct SubgroupArgs {
    #[command(subcommand)]
    op: SubgroupOp,
}

#[derive(Args)]
struct FoldSpec {
    /// Rank of the ambient free group.
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Semicolon-separated generating words.
    #[arg(long, default_value = "")]
    gens: String,
}

impl FoldSpec {
    fn build(&self) -> Result<SubgroupGraph, Error> {
        let g = FreeGroup::new(self.rank);
        let words: Vec<_> = self
            .gens
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| g.parse(s))
            .collect::<Result<_, _>>()?;
        SubgroupGraph::fold(&g, &words)
    }
}

#[derive(Subcommand)]
enum SubgroupOp {
    /// Dump the folded graph (vertex count, basepoint, edge triples).
    Show(FoldSpec),
    /// Index in the ambient free group.
    Index(FoldSpec),
    /// Free basis via a spanning tree.
    Basis(FoldSpec),
    /// Total coset table (finite index only).
    CosetTable(FoldSpec),
    /// Membership test.
    Contains {
        #[command(flatten)]
        spec: FoldSpec,
        word: String,
    },
}

#[derive(Args)]
struct SdpArgs {
    #[command(subcommand)]
    op: SdpOp,
}

#[derive(Subcommand)]
enum SdpOp {
    /// Membership of a tuple in a subgroup file.
    Member {
        /// Semicolon-separated tuple, e.g. "a b ; b^-1 ; 1".
        #[arg(long)]
        tuple: String,
        file: PathBuf,
    },
    /// Projection to a factor subset with its index report.
    Project {
        /// Comma-separated 1-based factor indices, e.g. 1,2.
        #[arg(long)]
        subset: String,
        file: PathBuf,
    },
    /// Virtual surjection to k-tuples with the per-subset index table.
    CheckVs {
        #[arg(long)]
        k: usize,
        file: PathBuf,
    },
    /// Fibre product of two quotient maps.
    Fibre {
        #[arg(long)]
        q1: PathBuf,
        #[arg(long)]
        q2: PathBuf,
        /// Optional tuple to test for membership.
        #[arg(long)]
        member: Option<String>,
        /// Emit a generating set with its certificate.
        #[arg(long)]
        generators: bool,
        /// Verify a section of the second map (semicolon-separated
        /// words, one per target element or generator).
        #[arg(long)]
        section: Option<String>,
        /// Apply the verified section to this first-side word.
        #[arg(long)]
        apply: Option<String>,
    },
    /// Decompose over the last factor and report the quotient.
    Decompose { file: PathBuf },
    /// Both sides of the exchange identity.
    Exchange {
        #[arg(long)]
        i: String,
        #[arg(long)]
        j: String,
        file: PathBuf,
    },
    /// Kernel step: N_{1..n-1} virtually surjects to (k-1)-tuples.
    KernelStep {
        #[arg(long)]
        k: usize,
        file: PathBuf,
    },
}

#[derive(Args)]
struct SigmaArgs {
    #[command(subcommand)]
    op: SigmaOp,
}

#[derive(Subcommand)]
enum SigmaOp {
    /// Finiteness length of the kernel of a spec file.
    Length { file: PathBuf },
    /// Membership of a character class at level k.
    Member {
        /// Blocks separated by '|', coordinates by ',', e.g. "1,1|0,2".
        #[arg(long)]
        chi: String,
        #[arg(long)]
        k: usize,
    },
    /// Realizable live-block patterns of the character family.
    Patterns { file: PathBuf },
}

#[derive(Args)]
struct WitnessArgs {
    #[command(subcommand)]
    op: WitnessOp,
}

#[derive(Subcommand)]
enum WitnessOp {
    /// Depth-s commutator witness for gammas in the first factor.
    Commutator {
        #[arg(long)]
        k: usize,
        /// Semicolon-separated words of the first factor.
        #[arg(long)]
        gammas: String,
        file: PathBuf,
    },
    /// The nilpotency class bound for (n, k).
    ClassBound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Kernel-of-an-abelian-map normal form (needs 2k > n).
    NormalForm {
        #[arg(long)]
        k: usize,
        file: PathBuf,
    },
}

#[derive(Args)]
struct HomArgs {
    #[command(subcommand)]
    op: HomOp,
}

#[derive(Subcommand)]
enum HomOp {
    /// First homology of the fibre product of two maps over a finite
    /// quotient, via Reidemeister-Schreier rewriting.
    H1 {
        #[arg(long)]
        q1: PathBuf,
        #[arg(long)]
        q2: PathBuf,
        /// Report the unsimplified presentation as well.
        #[arg(long)]
        raw: bool,
    },
    /// Coinvariants of an abelian module under action matrices.
    Coinv {
        /// Generator count of the module.
        #[arg(long)]
        gens: usize,
        /// Relation rows, e.g. "2 0; 0 3" (may be empty).
        #[arg(long, default_value = "")]
        rel: String,
        /// Action matrices, rows separated by ';', matrices by '/'.
        #[arg(long)]
        action: String,
    },
}

#[derive(Args)]
struct FlagsArgs {
    #[command(subcommand)]
    op: FlagsOp,
}

#[derive(Subcommand)]
enum FlagsOp {
    /// Run the rule engine on a facts file and print the firing trace.
    Derive {
        #[arg(long)]
        facts: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Internal(_) | Error::Inconsistent(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn parse_subset(s: &str) -> Result<Vec<usize>, Error> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let v: usize = tok
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad factor index `{tok}`")))?;
        if v == 0 {
            return Err(Error::Parse("factor indices are 1-based".into()));
        }
        out.push(v - 1);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn display_subset(s: &[usize]) -> String {
    s.iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn max_factors_cap() -> usize {
    std::env::var("SDP_MAX_FACTORS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(sdp_core::product::MAX_FACTORS_DEFAULT)
}

fn run(cli: Cli) -> Result<Report, Error> {
    let mut report = Report::new();
    match cli.command {
        Command::Fg(args) => match args.op {
            FgOp::Reduce { rank, word } => {
                let g = FreeGroup::new(rank);
                report.push("word", g.parse(&word)?);
            }
            FgOp::Mul { rank, left, right } => {
                let g = FreeGroup::new(rank);
                report.push("word", g.parse(&left)?.multiply(&g.parse(&right)?)?);
            }
            FgOp::Inv { rank, word } => {
                let g = FreeGroup::new(rank);
                report.push("word", g.parse(&word)?.invert());
            }
            FgOp::Comm { rank, left, right } => {
                let g = FreeGroup::new(rank);
                report.push("word", g.parse(&left)?.commutator(&g.parse(&right)?)?);
            }
            FgOp::Ab { rank, word } => {
                let g = FreeGroup::new(rank);
                let v = g.parse(&word)?.abelianize();
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                report.push("vector", format!("({})", parts.join(", ")));
            }
        },
        Command::Subgroup(args) => match args.op {
            SubgroupOp::Show(spec) => {
                let h = spec.build()?;
                report.block(&h.to_string());
            }
            SubgroupOp::Index(spec) => {
                report.push("index", spec.build()?.index());
            }
            SubgroupOp::Basis(spec) => {
                let h = spec.build()?;
                let basis = h.basis();
                report.push("rank", basis.len());
                for (i, w) in basis.iter().enumerate() {
                    report.push(format!("basis-{}", i + 1), w);
                }
            }
            SubgroupOp::CosetTable(spec) => {
                let h = spec.build()?;
                let t = h.coset_table()?;
                report.push("cosets", t.table.len());
                for (i, row) in t.table.iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                    report.push(format!("coset-{i}"), cells.join(" "));
                }
            }
            SubgroupOp::Contains { spec, word } => {
                let h = spec.build()?;
                let g = h.group().clone();
                report.push("contains", h.contains(&g.parse(&word)?)?);
            }
        },
        Command::Sdp(args) => run_sdp(args, &mut report)?,
        Command::Sigma(args) => match args.op {
            SigmaOp::Length { file } => {
                let spec = formats::parse_kernel(&std::fs::read_to_string(&file)?)?;
                report.push("length", finiteness_length(&spec)?);
            }
            SigmaOp::Member { chi, k } => {
                let c = formats::parse_character(&chi)?;
                report.push("level", k);
                report.push("decision", sigma_member(&c, k));
            }
            SigmaOp::Patterns { file } => {
                let spec = formats::parse_kernel(&std::fs::read_to_string(&file)?)?;
                let r = s_gamma_p(&spec)?;
                report.push("parameters", r.parameters);
                report.push("patterns", r.live_patterns.len());
                for (i, p) in r.live_patterns.iter().enumerate() {
                    report.push(format!("pattern-{}", i + 1), display_subset(p));
                }
            }
        },
        Command::Witness(args) => match args.op {
            WitnessOp::Commutator { k, gammas, file } => {
                let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
                let first = p.ambient().factor(0).clone();
                let words: Vec<_> = gammas
                    .split(';')
                    .map(|s| first.parse(s))
                    .collect::<Result<_, _>>()?;
                let r = commutator_witness(&p, k, &words)?;
                report.block(&r.to_string());
                if !r.verdict {
                    return Err(Error::Internal(
                        "witness verdict false under verified preconditions".into(),
                    ));
                }
            }
            WitnessOp::ClassBound { n, k } => {
                report.push("class-bound", class_bound(n, k)?);
            }
            WitnessOp::NormalForm { k, file } => {
                let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
                let f = stallings_bieri_form(&p, k)?;
                report.push("target", f.a.invariants());
                for (i, g) in f.gamma0.iter().enumerate() {
                    report.push(format!("gamma0-{}-index", i + 1), g.index());
                }
            }
        },
        Command::Hom(args) => match args.op {
            HomOp::H1 { q1, q2, raw } => {
                let m1 = formats::parse_map(&std::fs::read_to_string(&q1)?)?;
                let m2 = formats::parse_map(&std::fs::read_to_string(&q2)?)?;
                if raw {
                    let p = rs_presentation_raw(&m1, &m2)?;
                    report.push("raw-generators", p.generators);
                    report.push("raw-relators", p.relators.len());
                }
                let p = rs_presentation(&m1, &m2)?;
                report.push("generators", p.generators);
                report.push("relators", p.relators.len());
                report.push("h1", h1(&p));
            }
            HomOp::Coinv { gens, rel, action } => {
                let parse_mat = |s: &str| -> Result<IntMat, Error> {
                    let rows: Vec<Vec<i64>> = s
                        .split(';')
                        .filter(|r| !r.trim().is_empty())
                        .map(|r| {
                            r.split_whitespace()
                                .map(|t| {
                                    t.parse::<i64>()
                                        .map_err(|_| Error::Parse(format!("bad integer `{t}`")))
                                })
                                .collect()
                        })
                        .collect::<Result<_, _>>()?;
                    if rows.is_empty() {
                        return Ok(IntMat::zeros(0, gens));
                    }
                    Ok(IntMat::from_rows_i64(&rows))
                };
                let rels = parse_mat(&rel)?;
                let a = sdp_core::quotient::AbelianGroup::from_relation_rows(gens, &rels);
                let actions: Vec<IntMat> = action
                    .split('/')
                    .map(parse_mat)
                    .collect::<Result<_, _>>()?;
                report.push("coinvariants", coinvariants(&a, &actions)?);
            }
        },
        Command::Flags(args) => match args.op {
            FlagsOp::Derive { facts } => {
                let mut base = FactBase::parse(&std::fs::read_to_string(&facts)?)?;
                let trace = base.derive()?;
                report.push("firings", trace.len());
                for (i, f) in trace.iter().enumerate() {
                    report.push(format!("firing-{}", i + 1), f);
                }
                report.blank();
                report.block(&base.summary());
            }
        },
        Command::Reproduce { suite, seed } => {
            if suite == "all" {
                let mut all = true;
                for name in SUITES {
                    let r = run_suite(name, seed)?;
                    report.block(&r.report.to_string());
                    report.blank();
                    all &= r.passed;
                }
                report.push("overall", if all { "pass" } else { "fail" });
                if !all {
                    return Err(Error::Internal("reproduction suite failed".into()));
                }
            } else {
                let r = run_suite(&suite, seed)?;
                report.block(&r.report.to_string());
                if !r.passed {
                    return Err(Error::Internal("reproduction suite failed".into()));
                }
            }
        }
    }
    Ok(report)
}

fn run_sdp(args: SdpArgs, report: &mut Report) -> Result<(), Error> {
    match args.op {
        SdpOp::Member { tuple, file } => {
            let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
            let t = p.ambient().parse_tuple(&tuple)?;
            report.push("member", p.membership(&t)?);
        }
        SdpOp::Project { subset, file } => {
            let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
            let js = parse_subset(&subset)?;
            let (sub, index) = p.projection(&js)?;
            report.push("subset", display_subset(&js));
            report.push("index", index);
            report.push(
                "subdirect",
                match sub.is_subdirect() {
                    Some(b) => b.to_string(),
                    None => "unknown".to_string(),
                },
            );
        }
        SdpOp::CheckVs { k, file } => {
            let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
            let r = p.virtually_surjects_with_cap(k, max_factors_cap())?;
            report.push("k", k);
            for (subset, idx) in &r.table {
                report.push(format!("index-{}", display_subset(subset)), idx);
            }
            match &r.outcome {
                VsOutcome::Holds => {
                    report.push("virtually-surjects", "true");
                }
                VsOutcome::Fails {
                    violating,
                    certificate,
                } => {
                    report.push("virtually-surjects", "false");
                    report.push("violating-subset", display_subset(violating));
                    report.push("certificate", certificate);
                }
                VsOutcome::Unknown { subset, reason } => {
                    report.push("virtually-surjects", "unknown");
                    report.push("unknown-subset", display_subset(subset));
                    report.push("reason", reason);
                }
            }
        }
        SdpOp::Fibre {
            q1,
            q2,
            member,
            generators,
            section,
            apply,
        } => {
            let m1 = formats::parse_map(&std::fs::read_to_string(&q1)?)?;
            let m2 = formats::parse_map(&std::fs::read_to_string(&q2)?)?;
            let fp = fibre_product(&m1, &m2)?;
            report.push("target", m1.target().describe());
            report.push("index", fp.subgroup.index_in_ambient());
            if let Some(t) = member {
                let tuple = fp.subgroup.ambient().parse_tuple(&t)?;
                report.push("member", fp.subgroup.membership(&tuple)?);
            }
            if generators {
                let r = fibre_generators(&m1, &m2)?;
                match &r.certificate {
                    FibreCert::CosetEnumeration { cosets } => {
                        report.push("certificate", format!("coset enumeration, {cosets} cosets"));
                    }
                    FibreCert::ConstructedNotCertified { note } => {
                        report.push("certificate", format!("CONSTRUCTED-NOT-CERTIFIED: {note}"));
                    }
                }
                report.push("generators", r.tuples.len());
                for (i, t) in r.tuples.iter().enumerate() {
                    report.push(
                        format!("generator-{}", i + 1),
                        fp.subgroup.ambient().display_tuple(t),
                    );
                }
            }
            if let Some(sec) = section {
                let words: Vec<_> = sec
                    .split(';')
                    .map(|s| m2.domain().factor(0).parse(s))
                    .collect::<Result<_, _>>()?;
                let spec = match m2.target() {
                    sdp_core::quotient::Target::Finite(_) => SectionSpec::OnElements(words),
                    sdp_core::quotient::Target::Abelian(_) => SectionSpec::OnBasis(words),
                    _ => {
                        return Err(Error::Unsupported(
                            "sections over class-2 targets are not verified".into(),
                        ))
                    }
                };
                let s = split_section(&m1, &m2, spec)?;
                report.push("section", "verified");
                if let Some(w) = apply {
                    let gamma = vec![m1.domain().factor(0).parse(&w)?];
                    let pair = s.apply(&gamma)?;
                    report.push("image", fp.subgroup.ambient().display_tuple(&pair));
                }
            }
        }
        SdpOp::Decompose { file } => {
            let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
            let d = p.decompose()?;
            report.push("quotient", &d.quotient);
            report.push(
                "t-subdirect",
                match d.t.is_subdirect() {
                    Some(b) => b.to_string(),
                    None => "unknown".to_string(),
                },
            );
            // the reconstruction must agree with the original
            let rec = d.reconstruct();
            let gens = p.ambient().generator_tuples();
            let mut agree = true;
            for t in &gens {
                agree &= p.membership(t)? == rec.membership(t)?;
            }
            report.push("reconstruction-agrees-on-generators", agree);
            if !agree {
                return Err(Error::Internal("reconstruction drifted".into()));
            }
        }
        SdpOp::Exchange { i, j, file } => {
            let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
            let i_set = parse_subset(&i)?;
            let j_set = parse_subset(&j)?;
            let r = p.exchange(&i_set, &j_set)?;
            report.push("meet", display_subset(&r.meet));
            report.push("equal", r.equal);
            if !r.equal {
                return Err(Error::Internal(
                    "exchange identity failed: implementation fault".into(),
                ));
            }
        }
        SdpOp::KernelStep { k, file } => {
            let p = formats::parse_sdp(&std::fs::read_to_string(&file)?)?;
            let r = p.kernel_vs_step(k)?;
            report.push("holds", r.holds);
            for (subset, idx) in &r.kernel_report.table {
                report.push(format!("kernel-index-{}", display_subset(subset)), idx);
            }
        }
    }
    Ok(())
}

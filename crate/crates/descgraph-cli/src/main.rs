//! Command-line surface over the descgraph library: validate and canonize
//! presentation files, run amalgamations and the structure procedures,
//! grow and query limit states, compare runs, and check level prefixes.
//! Every subcommand is a thin adapter — parse, dispatch, serialize — with
//! all logic in the library. Reports are stable-ordered JSON on stdout;
//! DOT output goes to a file when requested.
//!
//! Exit codes: 0 success (all postconditions held), 2 parse/format error,
//! 3 precondition violation, 4 internal invariant violation.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use descgraph::amalgam::{
    class_amalgam, complement, free_amalgam, merge_predecessors, replay_free_extension,
    augment_predecessors, AmalgamOptions, AmalgamProblem, ReplayReport,
};
use descgraph::canon;
use descgraph::dot;
use descgraph::embed::{find_le_embedding, EmbeddingMap, Pins};
use descgraph::error::{Error, Result};
use descgraph::gamma::{
    check_ball_fixing_extension, check_g3, check_t1, check_t2_prefix, check_t4,
    prefix_orbit_report, BallFixingOutcome, LevelPrefix, OrbitReport, T1Outcome, T2Report,
};
use descgraph::limit::{
    back_and_forth_probe, ball_at, check_extension_property, ExtensionDescriptor,
    ExtensionOutcome, LimitState, ProbeReport,
};
use descgraph::presentation::{ClassBound, Presentation, PresentationFile, VertexRef};
use descgraph::tree::TreeAddress;

#[derive(Parser)]
#[command(name = "descgraph", version, about = "Finite presentations of descendant-closed digraphs: amalgamation, canonization, growth")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Free,
    Class,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a presentation file and summarize it
    Validate {
        file: PathBuf,
        /// also write the core digraph as DOT
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Reduce, then relabel canonically; equal outputs mean isomorphic inputs
    Canon {
        file: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Collapse materialized plain-tree cones back to frontier vertices
    Reduce {
        file: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Amalgamate the two presentations of a problem bundle over their glued part
    Amalgamate {
        /// JSON bundle {"b1": presentation, "b2": presentation, "a1": [ref…], "a2": [ref…]}
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// out-neighborhood sharing bound: an integer ≥ 2, or "inf"
        #[arg(long, default_value = "inf")]
        n: String,
    },
    /// Search for the n-root shared-out-neighborhood digraph inside a presentation
    ContainsTn {
        file: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Enlarge an independent set to one covering all but finitely many vertices
    Complement {
        file: PathBuf,
        /// starting reference (repeatable)
        #[arg(long = "x", required = true)]
        x: Vec<String>,
    },
    /// Pull a matching up to common predecessors
    MergePreds {
        /// JSON bundle {"a": presentation, "u": [ref…], "t": presentation, "v": [ref…]}
        file: PathBuf,
    },
    /// Grow a presentation until q-subsets of a target set have shared predecessors
    Augment {
        file: PathBuf,
        /// how many shared predecessors each q-subset must have
        #[arg(long = "N")]
        want: usize,
        #[arg(long, default_value = "inf")]
        n: String,
        /// target references (repeatable; defaults to the file's generators)
        #[arg(long = "u")]
        u: Vec<String>,
    },
    /// Replay the bounded-class free-extension construction
    ReplayFreeExt {
        /// JSON bundle {"a1": presentation, "u": [ref…], "v": [address…]}
        file: PathBuf,
        #[arg(long, default_value = "inf")]
        n: String,
    },
    /// Grow a fresh limit state and write it to disk
    LimitGrow {
        #[arg(long, default_value = "inf")]
        n: String,
        #[arg(long)]
        q: u8,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        steps: u64,
        /// where to write the state file (overwritten)
        #[arg(long)]
        state: PathBuf,
    },
    /// The out-ball of a vertex in a grown state
    LimitBall {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        vertex: String,
        #[arg(long)]
        radius: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// output path for --format dot
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check one 1-extension trial against a grown state
    LimitCheckExt {
        #[arg(long)]
        state: PathBuf,
        /// JSON extension descriptor {"base": [ref…], "u": [ref…], "v": [address…]}
        #[arg(long)]
        trial: PathBuf,
        #[arg(long, default_value_t = 64)]
        budget: u64,
    },
    /// Back-and-forth comparison of two grown states
    LimitProbe {
        #[arg(long = "state-a")]
        state_a: PathBuf,
        #[arg(long = "state-b")]
        state_b: PathBuf,
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long, default_value_t = 20)]
        trials: u64,
    },
    /// Run level-prefix checkers on a level file
    GammaCheck {
        #[arg(long)]
        file: PathBuf,
        /// comma-separated subset of t1,t2,t4,g3,c2,t3
        #[arg(long, default_value = "t1,t4,g3")]
        checks: String,
        /// vertex for t2, or generator list for c2 (repeatable)
        #[arg(long = "x")]
        x: Vec<String>,
        /// fixed-ball radius for c2
        #[arg(long = "N", default_value_t = 0)]
        n_ball: usize,
        /// JSON map file with the automorphism for c2
        #[arg(long)]
        gamma: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

// ----------------------------------------------------------------------
// plumbing

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::precondition(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::precondition(format!("cannot write {}: {e}", path.display())))
}

fn load_presentation(path: &Path) -> Result<Presentation> {
    Presentation::from_json(&read(path)?)
}

fn parse_refs(raw: &[String]) -> Vec<VertexRef> {
    raw.iter().map(|s| VertexRef::parse_string(s)).collect()
}

fn parse_addrs(raw: &[String]) -> Result<Vec<TreeAddress>> {
    raw.iter().map(|s| TreeAddress::parse(s)).collect()
}

fn emit<T: Serialize>(report: &T) {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    // a closed pipe (e.g. `descgraph canon f | head`) is the reader's
    // choice, not an error worth a panic trace
    if writeln!(io::stdout(), "{json}").is_err() {
        std::process::exit(0);
    }
}

fn from_bundle<T: for<'a> Deserialize<'a>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Error::malformed(format!("bad bundle {}: {e}", path.display())))
}

// ----------------------------------------------------------------------
// reports

#[derive(Serialize)]
struct ValidateReport {
    ok: bool,
    q: u8,
    core_vertices: usize,
    frontier_vertices: usize,
    max_multiplicity: usize,
}

#[derive(Serialize)]
struct CanonReport {
    certificate: String,
    relabeling: BTreeMap<String, String>,
    presentation: PresentationFile,
}

#[derive(Serialize)]
struct PresentationReport {
    core_vertices: usize,
    presentation: PresentationFile,
}

#[derive(Serialize)]
struct AmalgamReport {
    mode: String,
    class_bound: String,
    within_class: bool,
    identifications: Vec<(String, String)>,
    g1: EmbeddingMap,
    g2: EmbeddingMap,
    presentation: PresentationFile,
}

#[derive(Serialize)]
struct ContainsReport {
    contains: bool,
    multiplicity: usize,
}

#[derive(Deserialize)]
struct AmalgamBundle {
    b1: PresentationFile,
    b2: PresentationFile,
    #[serde(default)]
    a1: Vec<String>,
    #[serde(default)]
    a2: Vec<String>,
}

#[derive(Deserialize)]
struct MergeBundle {
    a: PresentationFile,
    u: Vec<String>,
    t: PresentationFile,
    v: Vec<String>,
}

#[derive(Deserialize)]
struct ReplayBundle {
    a1: PresentationFile,
    u: Vec<String>,
    #[serde(default)]
    v: Vec<String>,
}

#[derive(Serialize)]
struct ReplayCliReport {
    report: ReplayReport,
    presentation: PresentationFile,
}

#[derive(Serialize)]
struct GrowReport {
    steps: u64,
    core_vertices: usize,
    max_multiplicity: usize,
    total_identifications: u64,
    tn_found_step: Option<u64>,
    state: String,
}

#[derive(Serialize)]
struct BallDotReport {
    center: String,
    radius: usize,
    vertices: usize,
    edges: usize,
    dot: String,
}

#[derive(Serialize)]
struct Threshold {
    threshold: Option<usize>,
}

#[derive(Serialize)]
struct GammaReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    t1: Option<T1Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t2: Option<T2Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t4: Option<Threshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g3: Option<Threshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c2: Option<BallFixingOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t3: Option<OrbitReport>,
}

// ----------------------------------------------------------------------
// dispatch

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Validate { file, dot: dot_out } => {
            let p = load_presentation(&file)?;
            if let Some(out) = dot_out {
                write(&out, &dot::presentation_to_dot(&p))?;
            }
            emit(&ValidateReport {
                ok: true,
                q: p.q(),
                core_vertices: p.vertices().count(),
                frontier_vertices: p.frontier().len(),
                max_multiplicity: p.max_multiplicity(),
            });
        }
        Cmd::Canon { file, dot: dot_out } => {
            let p = load_presentation(&file)?;
            let c = canon::canonical_form(&p);
            if let Some(out) = dot_out {
                write(&out, &dot::presentation_to_dot(&c.presentation))?;
            }
            emit(&CanonReport {
                certificate: c.certificate,
                relabeling: c.relabeling.into_iter().collect(),
                presentation: c.presentation.to_file(),
            });
        }
        Cmd::Reduce { file, dot: dot_out } => {
            let p = load_presentation(&file)?.reduce();
            if let Some(out) = dot_out {
                write(&out, &dot::presentation_to_dot(&p))?;
            }
            emit(&PresentationReport {
                core_vertices: p.vertices().count(),
                presentation: p.to_file(),
            });
        }
        Cmd::Amalgamate { file, mode, n } => {
            let bundle: AmalgamBundle = from_bundle(&file)?;
            let b1 = Presentation::from_file(bundle.b1)?;
            let b2 = Presentation::from_file(bundle.b2)?;
            let prob =
                AmalgamProblem::new(&b1, &b2, parse_refs(&bundle.a1), parse_refs(&bundle.a2));
            let bound = ClassBound::parse(&n)?;
            let opts = AmalgamOptions::bounded(bound);
            let sol = match mode {
                Mode::Free => free_amalgam(&prob, &opts)?,
                Mode::Class => class_amalgam(&prob, &opts)?,
            };
            emit(&AmalgamReport {
                mode: match mode {
                    Mode::Free => "free".into(),
                    Mode::Class => "class".into(),
                },
                class_bound: bound.to_string(),
                within_class: sol.c.within_class(bound),
                identifications: sol.identifications,
                g1: sol.g1,
                g2: sol.g2,
                presentation: sol.c.to_file(),
            });
        }
        Cmd::ContainsTn { file, n } => {
            let p = load_presentation(&file)?;
            let pattern = Presentation::multi_root_tree(n, p.q());
            let contains = find_le_embedding(&pattern, &p, 2, &Pins::new())?.is_some();
            emit(&ContainsReport {
                contains,
                multiplicity: p.max_multiplicity(),
            });
        }
        Cmd::Complement { file, x } => {
            let p = load_presentation(&file)?;
            emit(&complement(&p, &parse_refs(&x))?);
        }
        Cmd::MergePreds { file } => {
            let bundle: MergeBundle = from_bundle(&file)?;
            let a = Presentation::from_file(bundle.a)?;
            let t = Presentation::from_file(bundle.t)?;
            emit(&merge_predecessors(
                &a,
                &parse_refs(&bundle.u),
                &t,
                &parse_refs(&bundle.v),
            )?);
        }
        Cmd::Augment { file, want, n, u } => {
            let pf: PresentationFile = from_bundle(&file)?;
            let targets = if u.is_empty() {
                pf.generators.clone()
            } else {
                u
            };
            let p = Presentation::from_file(pf)?;
            let grown =
                augment_predecessors(&p, &parse_refs(&targets), want, ClassBound::parse(&n)?)?;
            emit(&PresentationReport {
                core_vertices: grown.vertices().count(),
                presentation: grown.to_file(),
            });
        }
        Cmd::ReplayFreeExt { file, n } => {
            let bundle: ReplayBundle = from_bundle(&file)?;
            let a1 = Presentation::from_file(bundle.a1)?;
            let opts = AmalgamOptions::bounded(ClassBound::parse(&n)?);
            let (c, report) = replay_free_extension(
                &a1,
                &parse_refs(&bundle.u),
                &parse_addrs(&bundle.v)?,
                &opts,
            )?;
            emit(&ReplayCliReport {
                report,
                presentation: c.to_file(),
            });
        }
        Cmd::LimitGrow {
            n,
            q,
            seed,
            steps,
            state,
        } => {
            let mut st = LimitState::new(ClassBound::parse(&n)?, q, seed)?;
            st.grow(steps)?;
            write(&state, &st.to_json())?;
            let cur = st.current_presentation()?;
            emit(&GrowReport {
                steps: st.step_count,
                core_vertices: cur.vertices().count(),
                max_multiplicity: cur.max_multiplicity(),
                total_identifications: st.history.iter().map(|h| h.identifications).sum(),
                tn_found_step: st.tn_found_step,
                state: state.display().to_string(),
            });
        }
        Cmd::LimitBall {
            state,
            vertex,
            radius,
            format,
            out,
        } => {
            let st = LimitState::from_json(&read(&state)?)?;
            let ball = ball_at(&st, &VertexRef::parse_string(&vertex), radius)?;
            match format {
                Format::Json => emit(&ball),
                Format::Dot => {
                    let Some(out) = out else {
                        return Err(Error::malformed("--format dot requires --out"));
                    };
                    let p = st.current_presentation()?;
                    write(&out, &dot::ball_to_dot(&p, &ball))?;
                    emit(&BallDotReport {
                        center: ball.center,
                        radius: ball.radius,
                        vertices: ball.vertices.len(),
                        edges: ball.edges.len(),
                        dot: out.display().to_string(),
                    });
                }
            }
        }
        Cmd::LimitCheckExt {
            state,
            trial,
            budget,
        } => {
            let st = LimitState::from_json(&read(&state)?)?;
            let descriptor: ExtensionDescriptor = from_bundle(&trial)?;
            let outcome: ExtensionOutcome = check_extension_property(&st, &descriptor, budget)?;
            emit(&outcome);
        }
        Cmd::LimitProbe {
            state_a,
            state_b,
            radius,
            trials,
        } => {
            let a = LimitState::from_json(&read(&state_a)?)?;
            let b = LimitState::from_json(&read(&state_b)?)?;
            let report: ProbeReport = back_and_forth_probe(&a, &b, radius, trials)?;
            emit(&report);
        }
        Cmd::GammaCheck {
            file,
            checks,
            x,
            n_ball,
            gamma,
        } => {
            let p = LevelPrefix::from_json(&read(&file)?)?;
            let mut report = GammaReport {
                t1: None,
                t2: None,
                t4: None,
                g3: None,
                c2: None,
                t3: None,
            };
            for check in checks.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                match check {
                    "t1" => report.t1 = Some(check_t1(&p)?),
                    "t2" => {
                        let Some(u) = x.first() else {
                            return Err(Error::precondition("t2 needs --x <vertex>"));
                        };
                        report.t2 = Some(check_t2_prefix(&p, u)?);
                    }
                    "t4" => {
                        report.t4 = Some(Threshold {
                            threshold: check_t4(&p)?,
                        })
                    }
                    "g3" => {
                        report.g3 = Some(Threshold {
                            threshold: check_g3(&p)?,
                        })
                    }
                    "c2" => {
                        if x.is_empty() {
                            return Err(Error::precondition("c2 needs --x generators"));
                        }
                        let Some(gamma_path) = &gamma else {
                            return Err(Error::precondition("c2 needs --gamma <map file>"));
                        };
                        let map: BTreeMap<String, String> = from_bundle(gamma_path)?;
                        report.c2 = Some(check_ball_fixing_extension(&p, &x, n_ball, &map)?);
                    }
                    "t3" => report.t3 = Some(prefix_orbit_report(&p)?),
                    other => {
                        return Err(Error::malformed(format!(
                            "unknown check {other:?} (expected t1,t2,t4,g3,c2,t3)"
                        )))
                    }
                }
            }
            emit(&report);
        }
    }
    Ok(())
}

//! Finite presentations of infinite digraphs whose descendant sets are
//! q-ary trees.
//!
//! A presentation is a finite core digraph together with a set of *frontier*
//! vertices. Every non-frontier core vertex has out-valency exactly q inside
//! the core; every frontier vertex has out-valency 0 in the core and instead
//! carries an implicit infinite q-ary tree hanging below it. The implicit
//! trees are pairwise disjoint and attached to the core only at their
//! frontier root, so the presented (infinite) digraph is fully determined by
//! the core.
//!
//! Vertices of the presented digraph are addressed by [`VertexRef`]: either a
//! core vertex by id, or an implicit vertex by (frontier id, nonempty tree
//! address). The key structural facts used throughout:
//!
//! * every edge into a core vertex comes from a core vertex, so descendant
//!   cones of core vertices are "core down to the frontier, trees below";
//! * the descendant cone of any vertex is a q-ary tree, enforced by the
//!   validated tree condition (each vertex of a cone has exactly one
//!   predecessor inside that cone);
//! * ancestors of any vertex form a finite set, which keeps complement and
//!   independence computations finite.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{TreeAddress, MAX_Q};

/// Opaque core vertex identifier.
pub type VertexId = String;

/// A vertex of the presented digraph: a core vertex (`addr` empty) or an
/// implicit vertex of the tree below a frontier vertex (`addr` nonempty).
///
/// The derived order (id, then address) is the plain reference order used
/// for deterministic iteration; isomorphism-invariant ordering goes through
/// canonical labels instead.
///
/// Serializes as the display string (`id` or `id/addr`); deserialization
/// splits at the last `/` when the suffix is all digits. Materialized tree
/// vertices are named `<frontier>/<addr>`, so both readings of such a
/// string resolve to the same vertex.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexRef {
    pub base: VertexId,
    pub addr: TreeAddress,
}

impl Serialize for VertexRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.display())
    }
}

impl<'de> Deserialize<'de> for VertexRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(VertexRef::parse_string(&s))
    }
}

impl VertexRef {
    pub fn core(id: impl Into<VertexId>) -> Self {
        VertexRef {
            base: id.into(),
            addr: TreeAddress::root(),
        }
    }

    pub fn implicit(id: impl Into<VertexId>, addr: TreeAddress) -> Self {
        VertexRef {
            base: id.into(),
            addr,
        }
    }

    pub fn is_core(&self) -> bool {
        self.addr.is_empty()
    }

    /// Context-free inverse of [`display`](Self::display): splits at the
    /// last `/` when the suffix is a nonempty digit string, otherwise the
    /// whole string is taken as a core id. Resolution against a concrete
    /// presentation reconciles the two readings of materialized-tree ids.
    pub fn parse_string(s: &str) -> VertexRef {
        if let Some(pos) = s.rfind('/') {
            let (base, suffix) = (&s[..pos], &s[pos + 1..]);
            if !base.is_empty() && !suffix.is_empty() && suffix.bytes().all(|b| b.is_ascii_digit())
            {
                if let Ok(addr) = TreeAddress::parse(suffix) {
                    return VertexRef::implicit(base, addr);
                }
            }
        }
        VertexRef::core(s)
    }

    /// Textual form: `id` for core vertices, `id/addr` for implicit ones.
    pub fn display(&self) -> String {
        if self.addr.is_empty() {
            self.base.clone()
        } else {
            format!("{}/{}", self.base, self.addr)
        }
    }
}

impl fmt::Debug for VertexRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display())
    }
}

impl fmt::Display for VertexRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display())
    }
}

/// A single invariant violation found by [`Presentation::validate`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    /// Frontier vertex with outgoing core edges.
    FrontierOutDegree { v: VertexId, found: usize },
    /// Non-frontier core vertex whose core out-valency is not q.
    CoreOutDegree { v: VertexId, found: usize },
    SelfLoop { v: VertexId },
    MultiEdge { src: VertexId, dst: VertexId },
    /// A directed cycle through `witness`.
    Cycle { witness: VertexId },
    /// Declared generator set differs from the in-degree-0 vertices.
    GeneratorMismatch {
        declared: Vec<VertexId>,
        sources: Vec<VertexId>,
    },
    /// `w` has `count` predecessors inside the descendant cone of `root`
    /// (the cone of a valid presentation is a tree: exactly one).
    TreeCondition {
        root: VertexId,
        w: VertexId,
        count: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FrontierOutDegree { v, found } => {
                write!(f, "frontier vertex {v} has {found} outgoing edges (expected 0)")
            }
            Violation::CoreOutDegree { v, found } => {
                write!(f, "core vertex {v} has out-valency {found} (expected q)")
            }
            Violation::SelfLoop { v } => write!(f, "self-loop at {v}"),
            Violation::MultiEdge { src, dst } => write!(f, "multi-edge {src} -> {dst}"),
            Violation::Cycle { witness } => write!(f, "directed cycle through {witness}"),
            Violation::GeneratorMismatch { declared, sources } => write!(
                f,
                "declared generators {declared:?} differ from in-degree-0 vertices {sources:?}"
            ),
            Violation::TreeCondition { root, w, count } => write!(
                f,
                "descendant cone of {root} is not a tree: {w} has {count} predecessors inside it"
            ),
        }
    }
}

/// On-disk / wire form of a presentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresentationFile {
    pub q: u8,
    pub vertices: Vec<VertexId>,
    pub edges: Vec<(VertexId, VertexId)>,
    pub frontier: Vec<VertexId>,
    pub generators: Vec<VertexId>,
}

/// A finite presentation. Immutable: every operation returns a new value.
#[derive(Clone, PartialEq, Eq)]
pub struct Presentation {
    q: u8,
    /// Sorted out-adjacency; every core vertex is a key (frontier keys map
    /// to empty vectors).
    out: BTreeMap<VertexId, Vec<VertexId>>,
    /// Derived sorted in-adjacency.
    inc: BTreeMap<VertexId, Vec<VertexId>>,
    frontier: BTreeSet<VertexId>,
    generators: BTreeSet<VertexId>,
    /// Duplicate edge entries seen at construction, kept only so that
    /// `validate` can report them.
    dup_edges: Vec<(VertexId, VertexId)>,
}

impl fmt::Debug for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Presentation(q={}, core={}, frontier={})",
            self.q,
            self.out.len(),
            self.frontier.len()
        )
    }
}

impl Presentation {
    // ------------------------------------------------------------------
    // construction

    /// Builds a presentation from raw parts. Rejects structurally malformed
    /// input (unknown ids, q out of range); deep invariants are checked by
    /// [`validate`](Self::validate).
    pub fn from_parts(
        q: u8,
        vertices: Vec<VertexId>,
        edges: Vec<(VertexId, VertexId)>,
        frontier: Vec<VertexId>,
        generators: Vec<VertexId>,
    ) -> Result<Self> {
        if !(2..=MAX_Q).contains(&q) {
            return Err(Error::malformed(format!(
                "out-valency q={q} outside supported range 2..={MAX_Q}"
            )));
        }
        let mut out: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for v in &vertices {
            if out.insert(v.clone(), Vec::new()).is_some() {
                return Err(Error::malformed(format!("duplicate vertex id {v:?}")));
            }
        }
        let mut seen = BTreeSet::new();
        let mut dup_edges = Vec::new();
        for (s, d) in &edges {
            if !out.contains_key(s) {
                return Err(Error::malformed(format!("edge source {s:?} is not a vertex")));
            }
            if !out.contains_key(d) {
                return Err(Error::malformed(format!("edge target {d:?} is not a vertex")));
            }
            if !seen.insert((s.clone(), d.clone())) {
                dup_edges.push((s.clone(), d.clone()));
                continue;
            }
            out.get_mut(s).unwrap().push(d.clone());
        }
        for targets in out.values_mut() {
            targets.sort();
        }
        for v in frontier.iter().chain(generators.iter()) {
            if !out.contains_key(v) {
                return Err(Error::malformed(format!(
                    "frontier/generator {v:?} is not a vertex"
                )));
            }
        }
        let mut p = Presentation {
            q,
            out,
            inc: BTreeMap::new(),
            frontier: frontier.into_iter().collect(),
            generators: generators.into_iter().collect(),
            dup_edges,
        };
        p.rebuild_in_edges();
        Ok(p)
    }

    fn rebuild_in_edges(&mut self) {
        let mut inc: BTreeMap<VertexId, Vec<VertexId>> =
            self.out.keys().map(|v| (v.clone(), Vec::new())).collect();
        for (s, targets) in &self.out {
            for d in targets {
                inc.get_mut(d).unwrap().push(s.clone());
            }
        }
        for sources in inc.values_mut() {
            sources.sort();
        }
        self.inc = inc;
    }

    /// The q-valent tree T: a single frontier root.
    pub fn tree(q: u8) -> Self {
        Presentation::from_parts(
            q,
            vec!["r".into()],
            vec![],
            vec!["r".into()],
            vec!["r".into()],
        )
        .expect("tree presentation is well-formed")
    }

    /// n roots sharing one common q-element out-neighborhood, a q-ary tree
    /// below. Roots are `x1..xn`, the shared children `h0..h(q-1)`.
    pub fn multi_root_tree(n: usize, q: u8) -> Self {
        assert!(n >= 1, "need at least one root");
        let roots: Vec<VertexId> = (1..=n).map(|i| format!("x{i}")).collect();
        let hubs: Vec<VertexId> = (0..q).map(|d| format!("h{d}")).collect();
        let mut vertices = roots.clone();
        vertices.extend(hubs.clone());
        let mut edges = Vec::new();
        for r in &roots {
            for h in &hubs {
                edges.push((r.clone(), h.clone()));
            }
        }
        Presentation::from_parts(q, vertices, edges, hubs, roots)
            .expect("shared-neighborhood presentation is well-formed")
    }

    /// Replaces the declared generator set with the computed sources.
    /// Constructions use this after assembling raw parts.
    pub fn with_computed_generators(mut self) -> Presentation {
        self.generators = self.sources().into_iter().collect();
        self
    }

    /// Relabels every vertex id through `f`, which must be injective on
    /// the vertex set.
    pub fn rename_vertices(&self, f: impl Fn(&str) -> String) -> Result<Presentation> {
        let map: BTreeMap<&VertexId, VertexId> = self.out.keys().map(|v| (v, f(v))).collect();
        let mut seen = BTreeSet::new();
        for new in map.values() {
            if !seen.insert(new.clone()) {
                return Err(Error::precondition(format!(
                    "vertex relabeling collides on {new:?}"
                )));
            }
        }
        Presentation::from_parts(
            self.q,
            map.values().cloned().collect(),
            self.edges()
                .into_iter()
                .map(|(s, d)| (map[&s].clone(), map[&d].clone()))
                .collect(),
            self.frontier.iter().map(|v| map[v].clone()).collect(),
            self.generators.iter().map(|v| map[v].clone()).collect(),
        )
    }

    // ------------------------------------------------------------------
    // basic accessors

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn core_len(&self) -> usize {
        self.out.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> {
        self.out.keys()
    }

    pub fn contains_vertex(&self, v: &str) -> bool {
        self.out.contains_key(v)
    }

    pub fn is_frontier(&self, v: &str) -> bool {
        self.frontier.contains(v)
    }

    pub fn frontier(&self) -> &BTreeSet<VertexId> {
        &self.frontier
    }

    pub fn declared_generators(&self) -> &BTreeSet<VertexId> {
        &self.generators
    }

    /// Sorted core out-neighbors.
    pub fn out_neighbors(&self, v: &str) -> &[VertexId] {
        self.out.get(v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sorted core in-neighbors.
    pub fn in_neighbors(&self, v: &str) -> &[VertexId] {
        self.inc.get(v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// In-degree-0 core vertices.
    pub fn sources(&self) -> Vec<VertexId> {
        self.inc
            .iter()
            .filter(|(_, preds)| preds.is_empty())
            .map(|(v, _)| v.clone())
            .collect()
    }

    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut es = Vec::new();
        for (s, targets) in &self.out {
            for d in targets {
                es.push((s.clone(), d.clone()));
            }
        }
        es
    }

    // ------------------------------------------------------------------
    // validation

    /// Checks every invariant and returns the violations (empty = valid).
    pub fn validate(&self) -> Vec<Violation> {
        let mut vs = Vec::new();
        for (s, d) in &self.dup_edges {
            vs.push(Violation::MultiEdge {
                src: s.clone(),
                dst: d.clone(),
            });
        }
        for (v, targets) in &self.out {
            if targets.iter().any(|d| d == v) {
                vs.push(Violation::SelfLoop { v: v.clone() });
            }
            if self.frontier.contains(v) {
                if !targets.is_empty() {
                    vs.push(Violation::FrontierOutDegree {
                        v: v.clone(),
                        found: targets.len(),
                    });
                }
            } else if targets.len() != self.q as usize {
                vs.push(Violation::CoreOutDegree {
                    v: v.clone(),
                    found: targets.len(),
                });
            }
        }
        if let Some(w) = self.find_cycle() {
            vs.push(Violation::Cycle { witness: w });
        }
        let sources = self.sources();
        let declared: Vec<VertexId> = self.generators.iter().cloned().collect();
        if declared != sources {
            vs.push(Violation::GeneratorMismatch {
                declared,
                sources,
            });
        }
        // Tree condition: inside the cone of each core vertex, every other
        // cone vertex has exactly one predecessor from the cone.
        for v in self.out.keys() {
            let cone = self.desc_core(v);
            for w in &cone {
                if w == v {
                    continue;
                }
                let count = self
                    .in_neighbors(w)
                    .iter()
                    .filter(|p| cone.contains(*p))
                    .count();
                if count != 1 {
                    vs.push(Violation::TreeCondition {
                        root: v.clone(),
                        w: w.clone(),
                        count,
                    });
                }
            }
        }
        vs.sort();
        vs.dedup();
        vs
    }

    /// Errors with a precondition failure unless the presentation is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let vs = self.validate();
        if vs.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = vs.iter().take(4).map(|v| v.to_string()).collect();
            Err(Error::precondition(format!(
                "invalid presentation: {}{}",
                msgs.join("; "),
                if vs.len() > 4 { "; ..." } else { "" }
            )))
        }
    }

    fn find_cycle(&self) -> Option<VertexId> {
        // Kahn peeling; any vertex left over sits on a cycle.
        let mut indeg: BTreeMap<&VertexId, usize> = self
            .inc
            .iter()
            .map(|(v, preds)| (v, preds.len()))
            .collect();
        let mut queue: VecDeque<&VertexId> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(v, _)| *v)
            .collect();
        let mut removed = 0usize;
        while let Some(v) = queue.pop_front() {
            removed += 1;
            for d in self.out_neighbors(v) {
                let e = indeg.get_mut(d).unwrap();
                *e -= 1;
                if *e == 0 {
                    queue.push_back(d);
                }
            }
        }
        if removed == self.out.len() {
            None
        } else {
            indeg
                .iter()
                .find(|(_, &d)| d > 0)
                .map(|(v, _)| (*v).clone())
        }
    }

    // ------------------------------------------------------------------
    // references and adjacency in the presented (infinite) digraph

    /// Parses the textual reference syntax `id` or `id/addr` against this
    /// presentation (ids may themselves contain `/`, so core ids win).
    pub fn parse_ref(&self, s: &str) -> Result<VertexRef> {
        if self.contains_vertex(s) {
            return self.resolve(&VertexRef::core(s));
        }
        if let Some(pos) = s.rfind('/') {
            let (base, addr) = (&s[..pos], &s[pos + 1..]);
            if self.contains_vertex(base) {
                let addr = TreeAddress::parse(addr)?;
                addr.check_valency(self.q)?;
                return self.resolve(&VertexRef::implicit(base, addr));
            }
        }
        Err(Error::malformed(format!("unknown vertex reference {s:?}")))
    }

    /// Normalizes a reference to its deepest-core form: walks the address
    /// from the base through materialized core structure and stops at the
    /// frontier. Errors if the base is unknown or a digit is out of range.
    ///
    /// Resolution keeps references stable across `unfold`: an implicit
    /// reference stays meaningful after the tree below its frontier vertex
    /// has been (partially) materialized.
    pub fn resolve(&self, r: &VertexRef) -> Result<VertexRef> {
        if !self.contains_vertex(&r.base) {
            return Err(Error::malformed(format!(
                "unknown vertex id {:?} in reference",
                r.base
            )));
        }
        r.addr.check_valency(self.q)?;
        self.walk(&VertexRef::core(r.base.clone()), &r.addr)
    }

    /// Like [`resolve`](Self::resolve), but tolerates references whose base
    /// was split off a core id containing `/` followed by digits (the
    /// context-free reading of a serialized reference).
    pub fn resolve_flex(&self, r: &VertexRef) -> Result<VertexRef> {
        if self.contains_vertex(&r.base) {
            self.resolve(r)
        } else {
            self.parse_ref(&r.display())
        }
    }

    /// Follows `addr` downward from `at` (`at` must already be resolved).
    pub fn walk(&self, at: &VertexRef, addr: &TreeAddress) -> Result<VertexRef> {
        let mut base = at.base.clone();
        let mut below = at.addr.clone();
        for &d in &addr.0 {
            if below.is_empty() && !self.is_frontier(&base) {
                // canonical child order on core vertices: sorted ids
                let kids = self.out_neighbors(&base);
                let kid = kids.get(d as usize).ok_or_else(|| {
                    Error::malformed(format!(
                        "digit {d} out of range below {base:?} (out-valency {})",
                        kids.len()
                    ))
                })?;
                base = kid.clone();
            } else {
                below = below.child(d);
            }
        }
        Ok(VertexRef { base, addr: below })
    }

    /// Out-neighbors of any vertex of the presented digraph, in canonical
    /// child order (sorted ids for core vertices, digit order below the
    /// frontier). Always q entries.
    pub fn children_of(&self, r: &VertexRef) -> Vec<VertexRef> {
        if r.is_core() && !self.is_frontier(&r.base) {
            self.out_neighbors(&r.base)
                .iter()
                .map(|id| VertexRef::core(id.clone()))
                .collect()
        } else {
            (0..self.q)
                .map(|d| VertexRef::implicit(r.base.clone(), r.addr.child(d)))
                .collect()
        }
    }

    /// In-neighbors of any vertex of the presented digraph. Implicit
    /// vertices have exactly one (their tree parent); core vertices inherit
    /// the core in-edges.
    pub fn parents_of(&self, r: &VertexRef) -> Vec<VertexRef> {
        if r.is_core() {
            self.in_neighbors(&r.base)
                .iter()
                .map(|id| VertexRef::core(id.clone()))
                .collect()
        } else {
            let up = r.addr.parent().expect("implicit address is nonempty");
            vec![if up.is_empty() {
                VertexRef::core(r.base.clone())
            } else {
                VertexRef::implicit(r.base.clone(), up)
            }]
        }
    }

    /// Core vertices reachable from `v` through core edges (including `v`).
    pub fn desc_core(&self, v: &str) -> BTreeSet<VertexId> {
        let mut seen: BTreeSet<VertexId> = BTreeSet::new();
        let mut queue = VecDeque::new();
        if self.contains_vertex(v) {
            seen.insert(v.to_string());
            queue.push_back(v.to_string());
        }
        while let Some(u) = queue.pop_front() {
            for d in self.out_neighbors(&u) {
                if seen.insert(d.clone()) {
                    queue.push_back(d.clone());
                }
            }
        }
        seen
    }

    /// Does the descendant cone of `anc` contain `v`? Both references must
    /// be resolved.
    pub fn cone_contains(&self, anc: &VertexRef, v: &VertexRef) -> bool {
        if anc.is_core() {
            // implicit vertices belong to the cone of their frontier base
            self.desc_core(&anc.base).contains(&v.base)
        } else {
            anc.base == v.base && anc.addr.is_prefix_of(&v.addr)
        }
    }

    /// The address of `v` inside the descendant cone of `anc`, i.e. the
    /// unique path digits with `walk(anc, addr) == v`. Both references must
    /// be resolved; errors when `v` is outside the cone. Uniqueness comes
    /// from the tree condition: inside a cone, each vertex has exactly one
    /// cone-internal predecessor.
    pub fn address_below(&self, anc: &VertexRef, v: &VertexRef) -> Result<TreeAddress> {
        if !self.cone_contains(anc, v) {
            return Err(Error::precondition(format!(
                "{} is not a descendant of {}",
                v.display(),
                anc.display()
            )));
        }
        if !anc.is_core() {
            // both implicit under the same base
            return Ok(v.addr.strip_prefix(&anc.addr).expect("prefix checked"));
        }
        let cone = self.desc_core(&anc.base);
        let mut digits_rev: Vec<u8> = v.addr.0.iter().rev().cloned().collect();
        let mut cur = VertexRef::core(v.base.clone());
        while cur != *anc {
            let parent = self
                .parents_of(&cur)
                .into_iter()
                .find(|p| cone.contains(&p.base))
                .ok_or_else(|| {
                    Error::invariant(format!(
                        "no cone-internal predecessor of {} below {}",
                        cur.display(),
                        anc.display()
                    ))
                })?;
            let digit = self
                .children_of(&parent)
                .iter()
                .position(|c| *c == cur)
                .expect("parent lists cur among children") as u8;
            digits_rev.push(digit);
            cur = parent;
        }
        Ok(TreeAddress(digits_rev.into_iter().rev().collect()))
    }

    /// All vertices within distance `radius` below the given references
    /// (the union of the balls), sorted. Implicit vertices are expanded on
    /// the fly.
    pub fn desc_upto(&self, starts: &[VertexRef], radius: usize) -> Result<Vec<VertexRef>> {
        let mut seen: BTreeSet<VertexRef> = BTreeSet::new();
        let mut level: Vec<VertexRef> = Vec::new();
        for s in starts {
            let s = self.resolve(s)?;
            if seen.insert(s.clone()) {
                level.push(s);
            }
        }
        for _ in 0..radius {
            let mut next = Vec::new();
            for v in &level {
                for c in self.children_of(v) {
                    if seen.insert(c.clone()) {
                        next.push(c);
                    }
                }
            }
            level = next;
        }
        Ok(seen.into_iter().collect())
    }

    // ------------------------------------------------------------------
    // generating sets, independence, cone intersections

    /// Drops every reference lying in the descendant cone of another,
    /// returning the minimal generating set of the union of cones (sorted,
    /// deduplicated). The result is mutually non-descendant; the cones of
    /// distinct members may still intersect (see [`is_independent`](Self::is_independent)).
    pub fn minimal_generators(&self, refs: &[VertexRef]) -> Result<Vec<VertexRef>> {
        let mut resolved: Vec<VertexRef> = Vec::new();
        for r in refs {
            resolved.push(self.resolve(r)?);
        }
        resolved.sort();
        resolved.dedup();
        let mut keep = Vec::new();
        'outer: for (i, r) in resolved.iter().enumerate() {
            for (j, other) in resolved.iter().enumerate() {
                if i != j && self.cone_contains(other, r) {
                    // mutual containment is impossible for distinct refs
                    // (cones are trees), so this drop is unambiguous
                    continue 'outer;
                }
            }
            keep.push(r.clone());
        }
        Ok(keep)
    }

    /// Pairwise disjointness of descendant cones.
    pub fn is_independent(&self, refs: &[VertexRef]) -> Result<bool> {
        let mut resolved: Vec<VertexRef> = Vec::new();
        for r in refs {
            resolved.push(self.resolve(r)?);
        }
        for (i, a) in resolved.iter().enumerate() {
            for b in &resolved[i + 1..] {
                if !self.cones_disjoint(a, b) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn cones_disjoint(&self, a: &VertexRef, b: &VertexRef) -> bool {
        match (a.is_core(), b.is_core()) {
            (true, true) => {
                let da = self.desc_core(&a.base);
                let db = self.desc_core(&b.base);
                da.intersection(&db).next().is_none()
            }
            (true, false) => !self.desc_core(&a.base).contains(&b.base),
            (false, true) => !self.desc_core(&b.base).contains(&a.base),
            (false, false) => {
                a.base != b.base
                    || (!a.addr.is_prefix_of(&b.addr) && !b.addr.is_prefix_of(&a.addr))
            }
        }
    }

    /// Minimal generating set of desc(a) ∩ desc(b); empty exactly when the
    /// cones are disjoint. For a = b this is {a}.
    pub fn intersect_desc(&self, a: &VertexRef, b: &VertexRef) -> Result<Vec<VertexRef>> {
        let a = self.resolve(a)?;
        let b = self.resolve(b)?;
        if a == b {
            return Ok(vec![a]);
        }
        Ok(match (a.is_core(), b.is_core()) {
            (false, false) => {
                if a.base == b.base && a.addr.is_prefix_of(&b.addr) {
                    vec![b]
                } else if a.base == b.base && b.addr.is_prefix_of(&a.addr) {
                    vec![a]
                } else {
                    vec![]
                }
            }
            (false, true) => {
                if self.desc_core(&b.base).contains(&a.base) {
                    vec![a]
                } else {
                    vec![]
                }
            }
            (true, false) => {
                if self.desc_core(&a.base).contains(&b.base) {
                    vec![b]
                } else {
                    vec![]
                }
            }
            (true, true) => {
                let da = self.desc_core(&a.base);
                let db = self.desc_core(&b.base);
                let shared: BTreeSet<&VertexId> = da.intersection(&db).collect();
                // Maximal elements of a descendant-closed core set are the
                // members without an in-edge from the set.
                shared
                    .iter()
                    .filter(|w| {
                        !self
                            .in_neighbors(w)
                            .iter()
                            .any(|p| shared.contains(p))
                    })
                    .map(|w| VertexRef::core((**w).clone()))
                    .collect()
            }
        })
    }

    /// Minimal generating set of desc(X) ∩ desc(Z) for reference sets.
    pub fn intersect_desc_sets(
        &self,
        xs: &[VertexRef],
        zs: &[VertexRef],
    ) -> Result<Vec<VertexRef>> {
        let mut gens: Vec<VertexRef> = Vec::new();
        for x in xs {
            for z in zs {
                gens.extend(self.intersect_desc(x, z)?);
            }
        }
        self.minimal_generators(&gens)
    }

    // ------------------------------------------------------------------
    // multiplicity

    /// Non-frontier core vertices grouped by identical out-neighbor sets,
    /// classes of size ≥ 2 only, canonically sorted. Frontier vertices
    /// never share their out-neighborhood (each owns its implicit tree).
    pub fn shared_out_classes(&self) -> Vec<Vec<VertexId>> {
        let mut by_set: BTreeMap<&[VertexId], Vec<VertexId>> = BTreeMap::new();
        for (v, targets) in &self.out {
            if !self.frontier.contains(v) {
                by_set.entry(targets.as_slice()).or_default().push(v.clone());
            }
        }
        let mut classes: Vec<Vec<VertexId>> = by_set
            .into_values()
            .filter(|c| c.len() >= 2)
            .collect();
        classes.sort();
        classes
    }

    /// Largest number of distinct vertices sharing one out-neighbor set
    /// (1 for a nonempty presentation with no sharing, 0 when empty).
    pub fn max_multiplicity(&self) -> usize {
        let shared = self
            .shared_out_classes()
            .into_iter()
            .map(|c| c.len())
            .max()
            .unwrap_or(0);
        shared.max(usize::from(!self.out.is_empty()))
    }

    /// Membership in the class bounded by n: no n vertices share an
    /// out-neighborhood.
    pub fn within_class(&self, n: ClassBound) -> bool {
        match n {
            ClassBound::Infinite => true,
            ClassBound::Finite(n) => self.max_multiplicity() < n as usize,
        }
    }

    /// m mutually distinct vertices sharing one out-neighbor set, if any
    /// class that large exists: the canonically first such class, first m
    /// members. Their descendant closure is the m-root shared-neighborhood
    /// digraph, descendant-closed in this presentation.
    pub fn multiplicity_witness(&self, m: usize) -> Option<Vec<VertexId>> {
        if m == 0 {
            return Some(vec![]);
        }
        if m == 1 {
            return self.out.keys().next().cloned().map(|v| vec![v]);
        }
        self.shared_out_classes()
            .into_iter()
            .find(|c| c.len() >= m)
            .map(|c| c.into_iter().take(m).collect())
    }

    /// Identifies `remove` with `keep`: in-edges are pooled on `keep` and
    /// `remove` disappears. Requires distinct non-frontier vertices with
    /// identical out-neighbor sets, so the quotient presents the digraph in
    /// which the two (interchangeable) vertices coincide. Declared
    /// generators are recomputed. The two vertices must not be adjacent
    /// (they share an out-set, so neither can feed the other without a
    /// cycle through equal out-sets).
    pub fn merge_vertices(&self, keep: &str, remove: &str) -> Result<Presentation> {
        if keep == remove || !self.contains_vertex(keep) || !self.contains_vertex(remove) {
            return Err(Error::precondition(format!(
                "cannot merge {keep:?} with {remove:?}: need two distinct existing vertices"
            )));
        }
        if self.is_frontier(keep) || self.is_frontier(remove) {
            return Err(Error::precondition(
                "cannot merge frontier vertices: their implicit trees are distinct",
            ));
        }
        if self.out_neighbors(keep) != self.out_neighbors(remove) {
            return Err(Error::precondition(format!(
                "cannot merge {keep:?} with {remove:?}: out-neighbor sets differ"
            )));
        }
        if self
            .in_neighbors(keep)
            .iter()
            .any(|p| self.in_neighbors(remove).contains(p))
        {
            return Err(Error::precondition(format!(
                "cannot merge {keep:?} with {remove:?}: a shared predecessor would lose an edge"
            )));
        }
        let mut edges: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        for (s, d) in self.edges() {
            if s == remove {
                continue; // keep already carries the same out-edges
            }
            let d = if d == remove { keep.to_string() } else { d };
            edges.insert((s, d));
        }
        let vertices: Vec<VertexId> = self
            .out
            .keys()
            .filter(|v| v.as_str() != remove)
            .cloned()
            .collect();
        let frontier: Vec<VertexId> = self
            .frontier
            .iter()
            .filter(|v| v.as_str() != remove)
            .cloned()
            .collect();
        let mut p = Presentation::from_parts(
            self.q,
            vertices,
            edges.into_iter().collect(),
            frontier,
            vec![],
        )?;
        p.generators = p.sources().into_iter().collect();
        Ok(p)
    }

    // ------------------------------------------------------------------
    // reduce / unfold

    /// Normal form: repeatedly turns a non-frontier core vertex into a
    /// frontier vertex when its core cone is a pure tree attached to the
    /// rest of the core only at that vertex (every vertex strictly below it
    /// has exactly one predecessor, which lies inside the cone). Pruning is
    /// confluent, so the fixpoint does not depend on the scan order;
    /// idempotent by construction.
    pub fn reduce(&self) -> Presentation {
        let mut p = self.clone();
        loop {
            let mut pruned = false;
            let candidates: Vec<VertexId> = p
                .out
                .keys()
                .filter(|v| !p.frontier.contains(*v))
                .cloned()
                .collect();
            for v in candidates {
                if !p.contains_vertex(&v) || p.frontier.contains(&v) {
                    continue;
                }
                let mut cone = p.desc_core(&v);
                cone.remove(&v);
                let ok = cone.iter().all(|w| {
                    let preds = p.in_neighbors(w);
                    preds.len() == 1 && (cone.contains(&preds[0]) || preds[0] == v)
                });
                if ok && !cone.is_empty() {
                    for w in &cone {
                        p.out.remove(w);
                        p.frontier.remove(w);
                    }
                    p.out.insert(v.clone(), Vec::new());
                    p.frontier.insert(v.clone());
                    p.rebuild_in_edges();
                    pruned = true;
                }
            }
            if !pruned {
                return p;
            }
        }
    }

    /// Materializes the implicit tree below frontier vertex `f` down to
    /// `depth` full levels; the new bottom level becomes frontier.
    /// `depth = 0` is the identity.
    pub fn unfold(&self, f: &str, depth: usize) -> Result<Presentation> {
        let mut shape = BTreeSet::new();
        let mut level = vec![TreeAddress::root()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for a in &level {
                for d in 0..self.q {
                    let c = a.child(d);
                    shape.insert(c.clone());
                    next.push(c);
                }
            }
            level = next;
        }
        self.unfold_shape(f, &shape)
    }

    /// Materializes exactly the given addresses below frontier vertex `f`
    /// (closed under prefixes and siblings so that every materialized
    /// non-leaf keeps out-valency q). New ids are `f/<addr>`; leaves of the
    /// materialized shape become frontier.
    pub fn unfold_shape(&self, f: &str, shape: &BTreeSet<TreeAddress>) -> Result<Presentation> {
        if !self.is_frontier(f) {
            return Err(Error::precondition(format!(
                "unfold target {f:?} is not a frontier vertex"
            )));
        }
        // prefix closure, then sibling closure
        let mut closed: BTreeSet<TreeAddress> = BTreeSet::new();
        for a in shape {
            a.check_valency(self.q)?;
            let mut cur = a.clone();
            while !cur.is_empty() {
                closed.insert(cur.clone());
                cur = cur.parent().unwrap();
            }
        }
        for a in closed.clone() {
            if let Some(parent) = a.parent() {
                for d in 0..self.q {
                    closed.insert(parent.child(d));
                }
            }
        }
        if closed.is_empty() {
            return Ok(self.clone());
        }
        let id_of = |a: &TreeAddress| format!("{f}/{a}");
        for a in &closed {
            let id = id_of(a);
            if self.contains_vertex(&id) {
                return Err(Error::precondition(format!(
                    "unfold id collision: vertex {id:?} already exists"
                )));
            }
        }
        let mut p = self.clone();
        p.frontier.remove(f);
        for a in &closed {
            let id = id_of(a);
            p.out.insert(id.clone(), Vec::new());
            let has_children = (0..self.q).any(|d| closed.contains(&a.child(d)));
            if !has_children {
                p.frontier.insert(id.clone());
            }
            let parent_id = match a.parent() {
                Some(up) if up.is_empty() => f.to_string(),
                Some(up) => id_of(&up),
                None => unreachable!("closure holds nonempty addresses"),
            };
            p.out.get_mut(&parent_id).unwrap().push(id);
        }
        for targets in p.out.values_mut() {
            targets.sort();
        }
        p.rebuild_in_edges();
        Ok(p)
    }

    /// The sub-presentation induced on the descendant closure of the given
    /// references (implicit generators are materialized first). Vertex ids
    /// are preserved; generators of the result are its in-degree-0
    /// vertices. Returns the presentation and the resolved generator refs.
    pub fn restrict_to_cone(&self, gens: &[VertexRef]) -> Result<(Presentation, Vec<VertexRef>)> {
        let mut p = self.clone();
        // materialize implicit generators one at a time (each unfold can
        // shift how later references resolve)
        loop {
            let mut changed = false;
            for g in gens {
                let r = p.resolve(g)?;
                if !r.is_core() {
                    let shape: BTreeSet<TreeAddress> = [r.addr.clone()].into();
                    p = p.unfold_shape(&r.base, &shape)?;
                    changed = true;
                    break;
                }
            }
            if !changed {
                break;
            }
        }
        let mut roots = Vec::new();
        for g in gens {
            let r = p.resolve(g)?;
            roots.push(r.base.clone());
        }
        let mut keep: BTreeSet<VertexId> = BTreeSet::new();
        for r in &roots {
            keep.extend(p.desc_core(r));
        }
        let vertices: Vec<VertexId> = keep.iter().cloned().collect();
        let edges: Vec<(VertexId, VertexId)> = p
            .edges()
            .into_iter()
            .filter(|(s, d)| keep.contains(s) && keep.contains(d))
            .collect();
        let frontier: Vec<VertexId> = p
            .frontier
            .iter()
            .filter(|v| keep.contains(*v))
            .cloned()
            .collect();
        let mut sub = Presentation::from_parts(p.q, vertices, edges, frontier, vec![])?;
        sub.generators = sub.sources().into_iter().collect();
        let gen_refs = roots.into_iter().map(VertexRef::core).collect();
        Ok((sub, gen_refs))
    }

    // ------------------------------------------------------------------
    // serialization

    pub fn to_file(&self) -> PresentationFile {
        PresentationFile {
            q: self.q,
            vertices: self.vertices().cloned().collect(),
            edges: self.edges(),
            frontier: self.frontier.iter().cloned().collect(),
            generators: self.generators.iter().cloned().collect(),
        }
    }

    pub fn from_file(file: PresentationFile) -> Result<Self> {
        Presentation::from_parts(
            file.q,
            file.vertices,
            file.edges,
            file.frontier,
            file.generators,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("presentation serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: PresentationFile =
            serde_json::from_str(s).map_err(|e| Error::malformed(format!("bad JSON: {e}")))?;
        Presentation::from_file(file)
    }
}

/// Class parameter: bound the number of vertices allowed to share an
/// out-neighborhood (`Finite(n)` forbids n sharers) or don't (`Infinite`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ClassBound {
    Finite(u32),
    Infinite,
}

impl ClassBound {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "inf" || s == "infinity" || s == "oo" {
            return Ok(ClassBound::Infinite);
        }
        let n: u32 = s
            .parse()
            .map_err(|_| Error::malformed(format!("bad class bound {s:?} (number or 'inf')")))?;
        if n < 2 {
            return Err(Error::malformed("class bound must be at least 2"));
        }
        Ok(ClassBound::Finite(n))
    }
}

impl fmt::Display for ClassBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassBound::Finite(n) => write!(f, "{n}"),
            ClassBound::Infinite => write!(f, "inf"),
        }
    }
}

impl From<ClassBound> for String {
    fn from(b: ClassBound) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for ClassBound {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        ClassBound::parse(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> Presentation {
        Presentation::tree(2)
    }

    fn rref(p: &Presentation, s: &str) -> VertexRef {
        p.parse_ref(s).unwrap()
    }

    #[test]
    fn single_frontier_root_is_valid() {
        assert!(t2().validate().is_empty());
        assert!(Presentation::tree(3).validate().is_empty());
    }

    #[test]
    fn shared_neighborhood_presentations_are_valid() {
        for n in 1..=4 {
            for q in [2u8, 3] {
                let p = Presentation::multi_root_tree(n, q);
                assert!(p.validate().is_empty(), "n={n} q={q}: {:?}", p.validate());
            }
        }
    }

    #[test]
    fn adjacency_in_tree_and_shared_root_examples() {
        let p = t2();
        let child0 = rref(&p, "r/0");
        assert_eq!(
            p.children_of(&child0),
            vec![rref(&p, "r/00"), rref(&p, "r/01")]
        );
        assert_eq!(p.parents_of(&child0), vec![VertexRef::core("r")]);

        let t3 = Presentation::multi_root_tree(3, 2);
        let h0 = VertexRef::core("h0");
        let parents: Vec<String> = t3.parents_of(&h0).iter().map(|r| r.display()).collect();
        assert_eq!(parents, vec!["x1", "x2", "x3"]);
        assert_eq!(t3.children_of(&VertexRef::core("x1")).len(), 2);
    }

    #[test]
    fn ball_sizes_match_tree_counts() {
        let p = t2();
        let ball = p.desc_upto(&[VertexRef::core("r")], 2).unwrap();
        assert_eq!(ball.len(), 7); // 1 + 2 + 4

        let tt2 = Presentation::multi_root_tree(2, 2);
        let ball = tt2
            .desc_upto(&[VertexRef::core("x1"), VertexRef::core("x2")], 1)
            .unwrap();
        assert_eq!(ball.len(), 4); // both roots share h0, h1
    }

    #[test]
    fn minimal_generators_drop_dominated_refs() {
        let t3 = Presentation::multi_root_tree(3, 2);
        let refs = vec![
            VertexRef::core("x1"),
            VertexRef::core("x2"),
            VertexRef::core("x3"),
            VertexRef::core("h0"),
        ];
        let min = t3.minimal_generators(&refs).unwrap();
        let ids: Vec<String> = min.iter().map(|r| r.display()).collect();
        assert_eq!(ids, vec!["x1", "x2", "x3"]);
    }

    #[test]
    fn independence_distinguishes_roots_from_hubs() {
        let tt2 = Presentation::multi_root_tree(2, 2);
        assert!(!tt2
            .is_independent(&[VertexRef::core("x1"), VertexRef::core("x2")])
            .unwrap());
        assert!(tt2
            .is_independent(&[VertexRef::core("h0"), VertexRef::core("h1")])
            .unwrap());
    }

    #[test]
    fn cone_intersection_of_shared_roots_is_the_hub_set() {
        let tt2 = Presentation::multi_root_tree(2, 2);
        let got = tt2
            .intersect_desc(&VertexRef::core("x1"), &VertexRef::core("x2"))
            .unwrap();
        let ids: Vec<String> = got.iter().map(|r| r.display()).collect();
        assert_eq!(ids, vec!["h0", "h1"]);

        // reflexive case
        let r = tt2
            .intersect_desc(&VertexRef::core("x1"), &VertexRef::core("x1"))
            .unwrap();
        assert_eq!(r, vec![VertexRef::core("x1")]);

        // disjoint implicit cones
        let p = t2();
        assert!(p
            .intersect_desc(&rref(&p, "r/0"), &rref(&p, "r/1"))
            .unwrap()
            .is_empty());
        // nested implicit cones give the deeper one
        assert_eq!(
            p.intersect_desc(&rref(&p, "r/0"), &rref(&p, "r/01")).unwrap(),
            vec![rref(&p, "r/01")]
        );
    }

    #[test]
    fn multiplicity_counts_shared_out_sets() {
        assert_eq!(Presentation::multi_root_tree(3, 2).max_multiplicity(), 3);
        assert_eq!(t2().max_multiplicity(), 1);
        assert!(Presentation::multi_root_tree(3, 2).within_class(ClassBound::Finite(4)));
        assert!(!Presentation::multi_root_tree(3, 2).within_class(ClassBound::Finite(3)));
        assert!(Presentation::multi_root_tree(3, 2).within_class(ClassBound::Infinite));
    }

    #[test]
    fn unfold_materializes_full_levels() {
        let p = t2().unfold("r", 1).unwrap();
        assert_eq!(p.core_len(), 3);
        assert!(p.validate().is_empty());
        assert!(!p.is_frontier("r"));
        assert!(p.is_frontier("r/0") && p.is_frontier("r/1"));

        let p2 = t2().unfold("r", 2).unwrap();
        assert_eq!(p2.core_len(), 7);
        assert!(p2.validate().is_empty());
    }

    #[test]
    fn resolve_keeps_references_stable_across_unfold() {
        let p = t2().unfold("r", 1).unwrap();
        let r = p.resolve(&VertexRef::implicit("r", TreeAddress::parse("01").unwrap()));
        assert_eq!(r.unwrap().display(), "r/0/1");
        let r = p.resolve(&VertexRef::implicit("r", TreeAddress::parse("0").unwrap()));
        assert_eq!(r.unwrap(), VertexRef::core("r/0"));
    }

    #[test]
    fn reduce_prunes_unfolded_trees_back() {
        let p = t2().unfold("r", 2).unwrap();
        let red = p.reduce();
        assert_eq!(red.core_len(), 1);
        assert!(red.is_frontier("r"));
        // idempotent
        assert_eq!(red.reduce().to_json(), red.to_json());
        // a genuinely branching structure is untouched
        let tt2 = Presentation::multi_root_tree(2, 2);
        assert_eq!(tt2.reduce().to_json(), tt2.to_json());
    }

    #[test]
    fn validation_rejects_broken_structures() {
        // wrong out-valency
        let p = Presentation::from_parts(
            2,
            vec!["a".into(), "b".into()],
            vec![("a".into(), "b".into())],
            vec!["b".into()],
            vec!["a".into()],
        )
        .unwrap();
        assert!(p
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::CoreOutDegree { .. })));

        // generator mismatch: declared generators differ from sources
        let p = Presentation::from_parts(
            2,
            vec!["r".into()],
            vec![],
            vec!["r".into()],
            vec![],
        )
        .unwrap();
        assert!(p
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::GeneratorMismatch { .. })));

        // diamond: two parents of one vertex inside a single cone
        let p = Presentation::from_parts(
            2,
            vec!["a", "b", "c", "d", "e", "f"]
                .into_iter()
                .map(String::from)
                .collect(),
            vec![
                ("a".into(), "b".into()),
                ("a".into(), "c".into()),
                ("b".into(), "d".into()),
                ("b".into(), "e".into()),
                ("c".into(), "d".into()),
                ("c".into(), "f".into()),
            ],
            vec!["d".into(), "e".into(), "f".into()],
            vec!["a".into()],
        )
        .unwrap();
        assert!(p
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::TreeCondition { .. })));

        // 2-cycle
        let p = Presentation::from_parts(
            2,
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![
                ("a".into(), "b".into()),
                ("a".into(), "c".into()),
                ("b".into(), "a".into()),
                ("b".into(), "d".into()),
            ],
            vec!["c".into(), "d".into()],
            vec![],
        )
        .unwrap();
        assert!(p
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::Cycle { .. })));
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let p = Presentation::multi_root_tree(2, 3);
        let q = Presentation::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn ref_parsing_prefers_core_ids() {
        let p = t2().unfold("r", 1).unwrap();
        // "r/0" is now a core id
        assert_eq!(p.parse_ref("r/0").unwrap(), VertexRef::core("r/0"));
        // deeper address resolves through the materialized layer
        assert_eq!(p.parse_ref("r/01").unwrap().display(), "r/0/1");
        assert!(p.parse_ref("nope").is_err());
    }

    #[test]
    fn address_below_recovers_walk_digits() {
        let tt2 = Presentation::multi_root_tree(2, 2);
        let x1 = VertexRef::core("x1");
        let deep = rref(&tt2, "h1/01");
        let addr = tt2.address_below(&x1, &deep).unwrap();
        // child order below x1 is sorted: h0 = digit 0, h1 = digit 1
        assert_eq!(addr.to_string(), "101");
        assert_eq!(tt2.walk(&x1, &addr).unwrap(), deep);
        assert!(tt2.address_below(&rref(&tt2, "h0"), &deep).is_err());
    }

    #[test]
    fn vertex_refs_serialize_as_strings() {
        let r = VertexRef::implicit("h0", TreeAddress::parse("01").unwrap());
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, "\"h0/01\"");
        assert_eq!(serde_json::from_str::<VertexRef>(&s).unwrap(), r);
        // digit-suffixed core ids round-trip through resolution
        let p = t2().unfold("r", 1).unwrap();
        let parsed: VertexRef = serde_json::from_str("\"r/0\"").unwrap();
        assert_eq!(parsed, VertexRef::implicit("r", TreeAddress::parse("0").unwrap()));
        assert_eq!(p.resolve_flex(&parsed).unwrap(), VertexRef::core("r/0"));
    }

    #[test]
    fn restrict_to_cone_extracts_descendant_closure() {
        let tt2 = Presentation::multi_root_tree(2, 2);
        let (sub, gens) = tt2.restrict_to_cone(&[VertexRef::core("x1")]).unwrap();
        assert_eq!(gens, vec![VertexRef::core("x1")]);
        assert_eq!(sub.core_len(), 3); // x1, h0, h1
        assert!(sub.validate().is_empty());
        assert_eq!(sub.sources(), vec!["x1".to_string()]);
    }
}

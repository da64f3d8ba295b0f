//! Checkers for level-structure conditions on depth-truncated rooted
//! digraphs ("level prefixes"): single-valued root distance, self-similar
//! cones, the two parent/cone-separation thresholds, and the ball-fixing
//! automorphism-extension criterion. Everything here is depth-honest —
//! a verdict never claims anything beyond the stored depth.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = String;

/// Levels wider than this are skipped by the orbit report.
pub const ORBIT_LEVEL_CAP: usize = 20;

// ----------------------------------------------------------------------
// the prefix itself

/// On-disk form: depth, one id list per level (level = list index), and
/// explicit edge pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelPrefixFile {
    pub depth: usize,
    pub levels: Vec<Vec<VertexId>>,
    pub edges: Vec<(VertexId, VertexId)>,
}

/// A depth-`d` truncation of a rooted digraph: every vertex carries a
/// level tag in `0..=d`, with a unique level-0 root. Whether the tags
/// actually equal root distances is data to be checked, not an assumption.
#[derive(Debug, Clone)]
pub struct LevelPrefix {
    depth: usize,
    root: VertexId,
    levels: Vec<Vec<VertexId>>,
    level_of: BTreeMap<VertexId, usize>,
    out: BTreeMap<VertexId, BTreeSet<VertexId>>,
    inn: BTreeMap<VertexId, BTreeSet<VertexId>>,
}

impl LevelPrefix {
    pub fn from_parts(
        depth: usize,
        levels: Vec<Vec<VertexId>>,
        edges: Vec<(VertexId, VertexId)>,
    ) -> Result<LevelPrefix> {
        if levels.len() != depth + 1 {
            return Err(Error::malformed(format!(
                "depth {depth} needs {} level lists, got {}",
                depth + 1,
                levels.len()
            )));
        }
        let mut level_of: BTreeMap<VertexId, usize> = BTreeMap::new();
        for (l, ids) in levels.iter().enumerate() {
            for id in ids {
                if level_of.insert(id.clone(), l).is_some() {
                    return Err(Error::malformed(format!("duplicate vertex id {id}")));
                }
            }
        }
        if levels[0].len() != 1 {
            return Err(Error::malformed(format!(
                "a prefix has exactly one level-0 root, got {}",
                levels[0].len()
            )));
        }
        let root = levels[0][0].clone();
        let mut out: BTreeMap<VertexId, BTreeSet<VertexId>> = BTreeMap::new();
        let mut inn: BTreeMap<VertexId, BTreeSet<VertexId>> = BTreeMap::new();
        for id in level_of.keys() {
            out.insert(id.clone(), BTreeSet::new());
            inn.insert(id.clone(), BTreeSet::new());
        }
        for (s, t) in &edges {
            if !level_of.contains_key(s) || !level_of.contains_key(t) {
                return Err(Error::malformed(format!("edge ({s}, {t}) leaves the prefix")));
            }
            if !out.get_mut(s).unwrap().insert(t.clone()) {
                return Err(Error::malformed(format!("duplicate edge ({s}, {t})")));
            }
            inn.get_mut(t).unwrap().insert(s.clone());
        }
        let mut sorted_levels = levels;
        for ids in &mut sorted_levels {
            ids.sort();
        }
        Ok(LevelPrefix {
            depth,
            root,
            levels: sorted_levels,
            level_of,
            out,
            inn,
        })
    }

    pub fn from_json(s: &str) -> Result<LevelPrefix> {
        let f: LevelPrefixFile = serde_json::from_str(s)
            .map_err(|e| Error::malformed(format!("bad level file: {e}")))?;
        LevelPrefix::from_parts(f.depth, f.levels, f.edges)
    }

    pub fn to_json(&self) -> String {
        let f = LevelPrefixFile {
            depth: self.depth,
            levels: self.levels.clone(),
            edges: self.edges(),
        };
        serde_json::to_string_pretty(&f).expect("prefix serializes")
    }

    /// The depth-`d` truncation of the out-valency-`q` rooted tree, with
    /// root `a` and children named by appending a digit.
    pub fn tree(q: u8, depth: usize) -> LevelPrefix {
        assert!((1..=9).contains(&q), "tree prefix valency must be 1..=9");
        let mut levels: Vec<Vec<VertexId>> = vec![vec!["a".to_string()]];
        let mut edges: Vec<(VertexId, VertexId)> = Vec::new();
        for l in 1..=depth {
            let mut next = Vec::with_capacity(levels[l - 1].len() * q as usize);
            for parent in &levels[l - 1] {
                for d in 0..q {
                    let child = format!("{parent}{d}");
                    edges.push((parent.clone(), child.clone()));
                    next.push(child);
                }
            }
            levels.push(next);
        }
        LevelPrefix::from_parts(depth, levels, edges).expect("tree prefix is well formed")
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> &VertexId {
        &self.root
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> {
        self.level_of.keys()
    }

    pub fn level_of(&self, v: &str) -> Option<usize> {
        self.level_of.get(v).copied()
    }

    pub fn level(&self, l: usize) -> &[VertexId] {
        &self.levels[l]
    }

    pub fn has_edge(&self, s: &str, t: &str) -> bool {
        self.out.get(s).is_some_and(|o| o.contains(t))
    }

    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::new();
        for (s, ts) in &self.out {
            for t in ts {
                out.push((s.clone(), t.clone()));
            }
        }
        out
    }

    pub fn max_out_valency(&self) -> usize {
        self.out.values().map(|o| o.len()).max().unwrap_or(0)
    }

    /// Descendants of `v` within the prefix, including `v`.
    fn desc_set(&self, v: &str) -> BTreeSet<VertexId> {
        let mut seen: BTreeSet<VertexId> = [v.to_string()].into();
        let mut queue: VecDeque<VertexId> = [v.to_string()].into();
        while let Some(u) = queue.pop_front() {
            for w in &self.out[&u] {
                if seen.insert(w.clone()) {
                    queue.push_back(w.clone());
                }
            }
        }
        seen
    }

    /// Out-ball: vertices within `n` forward steps of `v`, including `v`.
    fn out_ball(&self, v: &str, n: usize) -> BTreeSet<VertexId> {
        let mut seen: BTreeSet<VertexId> = [v.to_string()].into();
        let mut layer = vec![v.to_string()];
        for _ in 0..n {
            let mut next = Vec::new();
            for u in &layer {
                for w in &self.out[u] {
                    if seen.insert(w.clone()) {
                        next.push(w.clone());
                    }
                }
            }
            layer = next;
        }
        seen
    }
}

// ----------------------------------------------------------------------
// level condition: root distances are single-valued

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum T1Outcome {
    Pass,
    /// First vertex (level order, then id order) whose set of root
    /// distances is not exactly its level tag. Distances longer than the
    /// depth are reported as depth + 1.
    Violation {
        vertex: VertexId,
        level: usize,
        distances: Vec<usize>,
    },
}

/// Checks that every vertex's set of root-path lengths is the singleton
/// of its level tag. An unreachable vertex makes the prefix malformed.
pub fn check_t1(p: &LevelPrefix) -> Result<T1Outcome> {
    let cap = p.depth + 1;
    let mut dist: BTreeMap<&VertexId, BTreeSet<usize>> = BTreeMap::new();
    dist.insert(&p.root, [0].into());
    // relax to a fixpoint; distances are capped, so this terminates even
    // on cyclic edge data
    let mut changed = true;
    while changed {
        changed = false;
        for (s, ts) in &p.out {
            let from = dist.get(s).cloned().unwrap_or_default();
            if from.is_empty() {
                continue;
            }
            for t in ts {
                let entry = dist.entry(t).or_default();
                for d in &from {
                    if entry.insert((d + 1).min(cap)) {
                        changed = true;
                    }
                }
            }
        }
    }
    for (l, ids) in p.levels.iter().enumerate() {
        for id in ids {
            let ds = dist.get(id).cloned().unwrap_or_default();
            if ds.is_empty() {
                return Err(Error::malformed(format!(
                    "vertex {id} is unreachable from the root"
                )));
            }
            if ds.len() != 1 || !ds.contains(&l) {
                return Ok(T1Outcome::Violation {
                    vertex: id.clone(),
                    level: l,
                    distances: ds.into_iter().collect(),
                });
            }
        }
    }
    Ok(T1Outcome::Pass)
}

fn ensure_t1(p: &LevelPrefix) -> Result<()> {
    match check_t1(p)? {
        T1Outcome::Pass => Ok(()),
        T1Outcome::Violation { vertex, .. } => Err(Error::precondition(format!(
            "prefix fails the level condition at {vertex}"
        ))),
    }
}

// ----------------------------------------------------------------------
// self-similarity of cones

/// Verdict of a truncated-cone comparison. The check is depth-relative:
/// `requested_depth` is how deep the comparison could go from the chosen
/// vertex, `verified_depth` is how deep the two balls were actually
/// isomorphic, and `mismatch_depth` is the first differing radius if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct T2Report {
    pub requested_depth: usize,
    pub verified_depth: usize,
    pub mismatch_depth: Option<usize>,
}

/// Compares the cone of `u`, truncated to the depth remaining below `u`,
/// against the equally truncated prefix itself (rooted isomorphism by
/// exhaustive search), radius by radius.
pub fn check_t2_prefix(p: &LevelPrefix, u: &str) -> Result<T2Report> {
    let Some(lu) = p.level_of(u) else {
        return Err(Error::precondition(format!("unknown vertex {u}")));
    };
    let requested = p.depth - lu;
    let mut verified = 0;
    for t in 0..=requested {
        let a = View::ball(p, u, t);
        let b = View::ball(p, &p.root, t);
        if iso_exists(p, &a, &b) {
            verified = t;
        } else {
            return Ok(T2Report {
                requested_depth: requested,
                verified_depth: verified,
                mismatch_depth: Some(t),
            });
        }
    }
    Ok(T2Report {
        requested_depth: requested,
        verified_depth: requested,
        mismatch_depth: None,
    })
}

// ----------------------------------------------------------------------
// the parent threshold and the cone-separation threshold

/// Least `N` such that for every `l` with `N < l <= depth - 1`, a vertex
/// reached from `x` in exactly `l` steps has all its parents inside the
/// cone of `x`. `None` only when the depth leaves no room to speak.
pub fn check_t4(p: &LevelPrefix) -> Result<Option<usize>> {
    ensure_t1(p)?;
    if p.depth == 0 {
        return Ok(None);
    }
    Ok(Some(t4_violations(p).into_iter().max().unwrap_or(0)))
}

/// Does the parent condition hold within the prefix for this particular
/// threshold? Monotone in `n` by construction.
pub fn t4_holds_at(p: &LevelPrefix, n: usize) -> Result<bool> {
    ensure_t1(p)?;
    Ok(t4_violations(p).into_iter().all(|l| l <= n))
}

/// Every step count `l` (capped at depth − 1) witnessing a parent outside
/// the cone it should belong to. Levels equal root distances here, so a
/// vertex `b` in the cone of `x` is reached in exactly `level(b) −
/// level(x)` steps.
fn t4_violations(p: &LevelPrefix) -> Vec<usize> {
    let mut out = Vec::new();
    if p.depth == 0 {
        return out;
    }
    for x in p.vertices() {
        let lx = p.level_of(x).unwrap();
        let cone = p.desc_set(x);
        for b in &cone {
            if b == x {
                continue;
            }
            let l = p.level_of(b).unwrap() - lx;
            if l == 0 || l > p.depth - 1 {
                continue;
            }
            for a in &p.inn[b] {
                if !cone.contains(a) {
                    out.push(l);
                }
            }
        }
    }
    out
}

/// Least `k` such that for every vertex `x` at level `k` or deeper, any
/// root child whose cone meets the cone of `x` already contains `x`.
/// `None` if even the deepest level violates.
pub fn check_g3(p: &LevelPrefix) -> Result<Option<usize>> {
    ensure_t1(p)?;
    let need = g3_violations(p).into_iter().max().map_or(0, |l| l + 1);
    if need > p.depth {
        return Ok(None);
    }
    Ok(Some(need))
}

/// Does the cone-separation condition hold from this level on? Monotone
/// in `k` by construction.
pub fn g3_holds_at(p: &LevelPrefix, k: usize) -> Result<bool> {
    ensure_t1(p)?;
    Ok(g3_violations(p).into_iter().all(|l| l < k))
}

/// Levels of vertices `x` for which some root child's cone meets the cone
/// of `x` without containing `x`.
fn g3_violations(p: &LevelPrefix) -> Vec<usize> {
    let mut out = Vec::new();
    let betas: Vec<(&VertexId, BTreeSet<VertexId>)> = p.out[&p.root]
        .iter()
        .map(|b| (b, p.desc_set(b)))
        .collect();
    for x in p.vertices() {
        let cone_x = p.desc_set(x);
        for (_, cone_b) in &betas {
            if !cone_b.contains(x) && cone_x.iter().any(|y| cone_b.contains(y)) {
                out.push(p.level_of(x).unwrap());
            }
        }
    }
    out
}

// ----------------------------------------------------------------------
// ball-fixing automorphism extension

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallFixingOutcome {
    Pass,
    /// First ordered pair (id order) whose adjacency the extended map
    /// fails to preserve.
    Violated { from: VertexId, to: VertexId },
}

/// Given a subdigraph `X` generated by `x_generators`, the pointwise-fixed
/// region `Y` (union of out-balls of radius `n` around the generators) and
/// an automorphism `gamma` of `X` fixing `Y`, checks whether extending
/// `gamma` by the identity preserves adjacency on the whole prefix. The
/// interesting failures are mixed pairs: an edge from outside `X` into a
/// moved vertex of `X` cannot survive the extension.
pub fn check_ball_fixing_extension(
    p: &LevelPrefix,
    x_generators: &[VertexId],
    n: usize,
    gamma: &BTreeMap<VertexId, VertexId>,
) -> Result<BallFixingOutcome> {
    let (x_set, y_set) = generated_with_balls(p, x_generators, n)?;
    let keys: BTreeSet<VertexId> = gamma.keys().cloned().collect();
    let vals: BTreeSet<VertexId> = gamma.values().cloned().collect();
    if keys != x_set || vals != x_set || vals.len() != gamma.len() {
        return Err(Error::precondition(
            "the map is not a bijection of the generated subdigraph onto itself",
        ));
    }
    for u in &x_set {
        for v in &x_set {
            if p.has_edge(u, v) != p.has_edge(&gamma[u], &gamma[v]) {
                return Err(Error::precondition(format!(
                    "the map is not an automorphism: adjacency of ({u}, {v}) not preserved"
                )));
            }
        }
    }
    for y in &y_set {
        if gamma[y] != *y {
            return Err(Error::precondition(format!(
                "the map moves {y}, which lies in the fixed ball region"
            )));
        }
    }
    fn theta<'a>(gamma: &'a BTreeMap<VertexId, VertexId>, v: &'a VertexId) -> &'a VertexId {
        gamma.get(v).unwrap_or(v)
    }
    for u in p.vertices() {
        for v in p.vertices() {
            if p.has_edge(u, v) != p.has_edge(theta(gamma, u), theta(gamma, v)) {
                return Ok(BallFixingOutcome::Violated {
                    from: u.clone(),
                    to: v.clone(),
                });
            }
        }
    }
    Ok(BallFixingOutcome::Pass)
}

/// The generated subdigraph (union of generator cones) and the union of
/// out-balls of radius `n` around the generators.
fn generated_with_balls(
    p: &LevelPrefix,
    gens: &[VertexId],
    n: usize,
) -> Result<(BTreeSet<VertexId>, BTreeSet<VertexId>)> {
    if gens.is_empty() {
        return Err(Error::precondition("at least one generator is required"));
    }
    let mut x_set = BTreeSet::new();
    let mut y_set = BTreeSet::new();
    for g in gens {
        if p.level_of(g).is_none() {
            return Err(Error::precondition(format!("unknown generator {g}")));
        }
        x_set.extend(p.desc_set(g));
        y_set.extend(p.out_ball(g, n));
    }
    Ok((x_set, y_set))
}

/// Calls `f` with every automorphism of the subdigraph generated by
/// `gens`, in a fixed order; `f` returns false to stop early. Exhaustive,
/// so only sensible on small cones.
pub fn for_each_cone_automorphism(
    p: &LevelPrefix,
    gens: &[VertexId],
    f: &mut dyn FnMut(&BTreeMap<VertexId, VertexId>) -> bool,
) -> Result<()> {
    let (x_set, _) = generated_with_balls(p, gens, 0)?;
    let view = View::from_members(p, &x_set)?;
    search_iso(p, &view, &view, &BTreeMap::new(), &mut |m| f(m));
    Ok(())
}

// ----------------------------------------------------------------------
// orbit evidence

/// Orbits of the prefix's automorphism group on one level; `None` when
/// the level is wider than [`ORBIT_LEVEL_CAP`] and was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelOrbits {
    pub level: usize,
    pub orbits: Option<Vec<Vec<VertexId>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub depth: usize,
    pub levels: Vec<LevelOrbits>,
}

/// Orbits of the truncated automorphism group on each level — transitivity
/// evidence relative to this depth only. Two vertices share an orbit iff
/// some automorphism of the whole prefix maps one to the other.
pub fn prefix_orbit_report(p: &LevelPrefix) -> Result<OrbitReport> {
    ensure_t1(p)?;
    let members: BTreeSet<VertexId> = p.vertices().cloned().collect();
    let view = View::from_members(p, &members)?;
    let mut levels = Vec::with_capacity(p.depth + 1);
    for l in 0..=p.depth {
        let ids = p.level(l);
        if ids.len() > ORBIT_LEVEL_CAP {
            levels.push(LevelOrbits {
                level: l,
                orbits: None,
            });
            continue;
        }
        // union-find by representative id
        let mut rep: BTreeMap<&VertexId, &VertexId> =
            ids.iter().map(|v| (v, v)).collect();
        fn find<'a>(rep: &BTreeMap<&'a VertexId, &'a VertexId>, mut v: &'a VertexId) -> &'a VertexId {
            while rep[v] != v {
                v = rep[v];
            }
            v
        }
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let (a, b) = (find(&rep, &ids[i]), find(&rep, &ids[j]));
                if a == b {
                    continue;
                }
                let mut pins = BTreeMap::new();
                pins.insert(ids[i].clone(), ids[j].clone());
                let mut hit = false;
                search_iso(p, &view, &view, &pins, &mut |_| {
                    hit = true;
                    false
                });
                if hit {
                    let high = a.max(b);
                    let low = if high == a { b } else { a };
                    rep.insert(high, low);
                }
            }
        }
        let mut orbits: BTreeMap<&VertexId, Vec<VertexId>> = BTreeMap::new();
        for v in ids {
            orbits.entry(find(&rep, v)).or_default().push(v.clone());
        }
        levels.push(LevelOrbits {
            level: l,
            orbits: Some(orbits.into_values().collect()),
        });
    }
    Ok(OrbitReport {
        depth: p.depth,
        levels,
    })
}

// ----------------------------------------------------------------------
// shared brute-force isomorphism search

/// An induced subdigraph of a prefix plus a search layering: vertices
/// carry a BFS depth (from a ball center or from the in-degree-0 sources),
/// which any isomorphism between views must preserve.
struct View {
    members: BTreeSet<VertexId>,
    depth_of: BTreeMap<VertexId, usize>,
    order: Vec<VertexId>,
}

impl View {
    fn ball(p: &LevelPrefix, center: &str, radius: usize) -> View {
        let mut depth_of: BTreeMap<VertexId, usize> = BTreeMap::new();
        depth_of.insert(center.to_string(), 0);
        let mut layer = vec![center.to_string()];
        for d in 1..=radius {
            let mut next = Vec::new();
            for u in &layer {
                for w in &p.out[u] {
                    if !depth_of.contains_key(w) {
                        depth_of.insert(w.clone(), d);
                        next.push(w.clone());
                    }
                }
            }
            layer = next;
        }
        View::assemble(depth_of)
    }

    /// Layers an arbitrary member set by BFS from its in-degree-0 sources.
    /// Source-freeness (a cycle with no source) cannot be layered.
    fn from_members(p: &LevelPrefix, members: &BTreeSet<VertexId>) -> Result<View> {
        let mut depth_of: BTreeMap<VertexId, usize> = BTreeMap::new();
        let mut layer: Vec<VertexId> = members
            .iter()
            .filter(|v| p.inn[*v].iter().all(|u| !members.contains(u)))
            .cloned()
            .collect();
        for v in &layer {
            depth_of.insert(v.clone(), 0);
        }
        let mut d = 0;
        while !layer.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for u in &layer {
                for w in &p.out[u] {
                    if members.contains(w) && !depth_of.contains_key(w) {
                        depth_of.insert(w.clone(), d);
                        next.push(w.clone());
                    }
                }
            }
            layer = next;
        }
        if depth_of.len() != members.len() {
            return Err(Error::precondition(
                "subdigraph has a sourceless part and cannot be layered",
            ));
        }
        Ok(View::assemble(depth_of))
    }

    fn assemble(depth_of: BTreeMap<VertexId, usize>) -> View {
        let members: BTreeSet<VertexId> = depth_of.keys().cloned().collect();
        let mut order: Vec<VertexId> = members.iter().cloned().collect();
        order.sort_by_key(|v| (depth_of[v], v.clone()));
        View {
            members,
            depth_of,
            order,
        }
    }

    fn induced_degrees(&self, p: &LevelPrefix, v: &VertexId) -> (usize, usize) {
        let o = p.out[v].iter().filter(|w| self.members.contains(*w)).count();
        let i = p.inn[v].iter().filter(|w| self.members.contains(*w)).count();
        (o, i)
    }
}

/// Returns true when some depth-preserving isomorphism view `a` → view `b`
/// exists (within prefix `p`).
fn iso_exists(p: &LevelPrefix, a: &View, b: &View) -> bool {
    let mut found = false;
    search_iso(p, a, b, &BTreeMap::new(), &mut |_| {
        found = true;
        false
    });
    found
}

/// Backtracking enumeration of induced-subdigraph isomorphisms between two
/// views, assigning vertices in (depth, id) order. `on_found` returns
/// false to stop; the whole search returns whether it was stopped.
fn search_iso(
    p: &LevelPrefix,
    a: &View,
    b: &View,
    pins: &BTreeMap<VertexId, VertexId>,
    on_found: &mut dyn FnMut(&BTreeMap<VertexId, VertexId>) -> bool,
) -> bool {
    if a.members.len() != b.members.len() {
        return false;
    }
    // layer sizes must agree
    let count_by_depth = |v: &View| -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for d in v.depth_of.values() {
            *m.entry(*d).or_insert(0) += 1;
        }
        m
    };
    if count_by_depth(a) != count_by_depth(b) {
        return false;
    }
    let mut map: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut used: BTreeSet<VertexId> = BTreeSet::new();
    assign(p, a, b, pins, 0, &mut map, &mut used, on_found)
}

#[allow(clippy::too_many_arguments)]
fn assign(
    p: &LevelPrefix,
    a: &View,
    b: &View,
    pins: &BTreeMap<VertexId, VertexId>,
    i: usize,
    map: &mut BTreeMap<VertexId, VertexId>,
    used: &mut BTreeSet<VertexId>,
    on_found: &mut dyn FnMut(&BTreeMap<VertexId, VertexId>) -> bool,
) -> bool {
    if i == a.order.len() {
        return !on_found(map);
    }
    let v = &a.order[i];
    let dv = a.depth_of[v];
    let (ov, iv) = a.induced_degrees(p, v);
    for w in &b.order {
        if used.contains(w) || b.depth_of[w] != dv {
            continue;
        }
        if let Some(forced) = pins.get(v) {
            if forced != w {
                continue;
            }
        }
        if b.induced_degrees(p, w) != (ov, iv) {
            continue;
        }
        // adjacency with everything already assigned must match exactly
        let ok = map.iter().all(|(x, y)| {
            p.has_edge(x, v) == p.has_edge(y, w) && p.has_edge(v, x) == p.has_edge(w, y)
        });
        if !ok {
            continue;
        }
        map.insert(v.clone(), w.clone());
        used.insert(w.clone());
        let stopped = assign(p, a, b, pins, i + 1, map, used, on_found);
        map.remove(v);
        used.remove(w);
        if stopped {
            return true;
        }
    }
    false
}

// ----------------------------------------------------------------------

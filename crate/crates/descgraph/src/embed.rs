//! Strong embeddings between presented digraphs.
//!
//! An embedding here is always neighborhood-exact: it is injective and maps
//! the out-neighborhood of every domain vertex bijectively onto the
//! out-neighborhood of its image. The image of such a map is automatically
//! descendant-closed, which is the substructure notion the amalgamation
//! class uses.
//!
//! Because the domain is generated by finitely many cones, an embedding is
//! determined by a finite *skeleton*: the images of the domain's core
//! vertices. Implicit tree vertices extend canonically, address by address
//! (`(f, a)` goes to `walk(image(f), a)`). Verification therefore reduces
//! to three finite checks:
//!
//! 1. the skeleton is injective;
//! 2. at every non-frontier core vertex the skeleton maps children onto
//!    children (a bijection of q-element sets);
//! 3. the cones hanging below the images of distinct frontier vertices are
//!    pairwise disjoint and contain no other skeleton image strictly
//!    inside.
//!
//! Edges between implicit vertices then correspond exactly, and non-edges
//! need no check at all: in a digraph whose descendant sets are trees,
//! edges never cross between disjoint cones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentation::{Presentation, VertexId, VertexRef};
use crate::tree::TreeAddress;

/// A strong embedding of presentation `A` into presentation `B`, stored as
/// its finite skeleton. `generators` repeats the images of A's sources for
/// readability of serialized maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingMap {
    pub generators: Vec<(VertexRef, VertexRef)>,
    /// image of every core vertex of the domain
    pub skeleton: BTreeMap<VertexRef, VertexRef>,
}

impl EmbeddingMap {
    /// Builds the map from a complete core-vertex assignment.
    pub fn from_skeleton(a: &Presentation, skeleton: BTreeMap<VertexRef, VertexRef>) -> Self {
        let generators = a
            .sources()
            .into_iter()
            .map(|g| {
                let gr = VertexRef::core(g);
                let img = skeleton.get(&gr).cloned().unwrap_or_else(|| gr.clone());
                (gr, img)
            })
            .collect();
        EmbeddingMap {
            generators,
            skeleton,
        }
    }

    /// Image of an arbitrary domain vertex (resolved against `a`), using
    /// the canonical address-preserving extension below frontier vertices.
    pub fn apply(&self, a: &Presentation, b: &Presentation, r: &VertexRef) -> Result<VertexRef> {
        let r = a.resolve_flex(r)?;
        if r.is_core() {
            let img = self.skeleton.get(&r).ok_or_else(|| {
                Error::precondition(format!("skeleton has no image for core vertex {r}"))
            })?;
            b.resolve_flex(img)
        } else {
            let anchor = self
                .skeleton
                .get(&VertexRef::core(r.base.clone()))
                .ok_or_else(|| {
                    Error::precondition(format!("skeleton has no image for frontier {}", r.base))
                })?;
            let anchor = b.resolve_flex(anchor)?;
            b.walk(&anchor, &r.addr)
        }
    }

    /// All embedding defects, empty when the map is a strong embedding of
    /// the digraph presented by `a` into the one presented by `b`.
    pub fn defects(&self, a: &Presentation, b: &Presentation) -> Vec<String> {
        let mut out = Vec::new();
        // domain = exactly the core vertices of a
        let mut skeleton: BTreeMap<VertexId, VertexRef> = BTreeMap::new();
        for (dom, img) in &self.skeleton {
            if !dom.is_core() || !a.contains_vertex(&dom.base) {
                out.push(format!("skeleton key {dom} is not a core vertex of the domain"));
                continue;
            }
            match b.resolve_flex(img) {
                Ok(r) => {
                    skeleton.insert(dom.base.clone(), r);
                }
                Err(e) => out.push(format!("image of {dom} does not resolve: {e}")),
            }
        }
        for v in a.vertices() {
            if !skeleton.contains_key(v) {
                out.push(format!("core vertex {v} has no image"));
            }
        }
        if !out.is_empty() {
            return out;
        }
        // injectivity
        let mut seen: BTreeMap<&VertexRef, &VertexId> = BTreeMap::new();
        for (dom, img) in &skeleton {
            if let Some(prev) = seen.insert(img, dom) {
                out.push(format!("not injective: {prev} and {dom} both map to {img}"));
            }
        }
        // children bijection at non-frontier core vertices
        for v in a.vertices() {
            if a.is_frontier(v) {
                continue;
            }
            let img = &skeleton[v];
            let mut expected: Vec<VertexRef> = b.children_of(img);
            expected.sort();
            let mut got: Vec<VertexRef> = a
                .out_neighbors(v)
                .iter()
                .map(|c| skeleton[c].clone())
                .collect();
            got.sort();
            got.dedup();
            if got != expected {
                out.push(format!(
                    "children of {v} map to {got:?}, but out-neighborhood of {img} is {expected:?}"
                ));
            }
        }
        // frontier anchors: pairwise disjoint cones, no skeleton image
        // strictly inside an anchor cone
        let anchors: Vec<(&VertexId, &VertexRef)> = a
            .frontier()
            .iter()
            .map(|f| (f, &skeleton[f]))
            .collect();
        for (i, (f, yf)) in anchors.iter().enumerate() {
            for (g, yg) in &anchors[i + 1..] {
                if !b.is_independent(&[(*yf).clone(), (*yg).clone()]).unwrap_or(false) {
                    out.push(format!(
                        "anchor cones overlap: {f} -> {yf} and {g} -> {yg}"
                    ));
                }
            }
            for (dom, img) in &skeleton {
                if dom != *f && b.cone_contains(yf, img) {
                    out.push(format!(
                        "image {img} of {dom} lies inside the anchor cone of {f} -> {yf}"
                    ));
                }
            }
            // the cone below an anchor image must present a plain q-ary
            // tree: a shared vertex below it would make the canonical
            // address extension of the frontier vertex non-injective
            if yf.is_core() {
                let cone = b.desc_core(&yf.base);
                for w in &cone {
                    if *w == yf.base {
                        continue;
                    }
                    let within = b
                        .in_neighbors(w)
                        .iter()
                        .filter(|p| cone.contains(*p))
                        .count();
                    if within != 1 {
                        out.push(format!(
                            "anchor cone of {f} -> {yf} is not a tree at {w}"
                        ));
                    }
                }
            }
        }
        out
    }

    /// Errors with a construction-bug failure unless the map verifies.
    pub fn ensure_valid(&self, a: &Presentation, b: &Presentation) -> Result<()> {
        let ds = self.defects(a, b);
        if ds.is_empty() {
            Ok(())
        } else {
            Err(Error::invariant(format!(
                "embedding does not verify: {}",
                ds.join("; ")
            )))
        }
    }
}

/// Builds the embedding determined by matching the cones of `pairs`:
/// each `(u, v)` sends the cone below `u` (in `a`) onto the cone below `v`
/// (in `b`) address-preservingly. The `u` must be mutually non-descendant
/// and their cones must cover all of `a`.
pub fn embedding_from_cone_pairs(
    a: &Presentation,
    b: &Presentation,
    pairs: &[(VertexRef, VertexRef)],
) -> Result<EmbeddingMap> {
    let mut resolved: Vec<(VertexRef, VertexRef)> = Vec::new();
    for (u, v) in pairs {
        resolved.push((a.resolve_flex(u)?, b.resolve_flex(v)?));
    }
    for (i, (u, _)) in resolved.iter().enumerate() {
        for (u2, _) in &resolved[i + 1..] {
            if a.cone_contains(u, u2) || a.cone_contains(u2, u) {
                return Err(Error::precondition(format!(
                    "matched roots {u} and {u2} are not mutually non-descendant"
                )));
            }
        }
    }
    let mut skeleton = BTreeMap::new();
    for w in a.vertices() {
        let wr = VertexRef::core(w.clone());
        let (u, v) = resolved
            .iter()
            .find(|(u, _)| a.cone_contains(u, &wr))
            .ok_or_else(|| {
                Error::precondition(format!(
                    "core vertex {w} is not covered by any matched cone"
                ))
            })?;
        let addr = a.address_below(u, &wr)?;
        skeleton.insert(wr, b.walk(v, &addr)?);
    }
    Ok(EmbeddingMap::from_skeleton(a, skeleton))
}

/// Optional constraints for embedding search: forced images for core
/// vertices of the domain.
pub type Pins = BTreeMap<VertexId, VertexRef>;

/// All strong embeddings of `a` into `b` whose source images sit at tree
/// depth at most `depth_bound` below frontier vertices of `b` (core images
/// are always allowed). Deterministic order: lexicographic in the image
/// assignment along the search order.
pub fn enumerate_le_embeddings(
    a: &Presentation,
    b: &Presentation,
    depth_bound: usize,
    pins: &Pins,
) -> Result<Vec<EmbeddingMap>> {
    let mut found = Vec::new();
    search(a, b, depth_bound, pins, &mut |emb| {
        found.push(emb);
        true
    })?;
    Ok(found)
}

/// First embedding in the enumeration order, if any.
pub fn find_le_embedding(
    a: &Presentation,
    b: &Presentation,
    depth_bound: usize,
    pins: &Pins,
) -> Result<Option<EmbeddingMap>> {
    let mut found = None;
    search(a, b, depth_bound, pins, &mut |emb| {
        found = Some(emb);
        false
    })?;
    Ok(found)
}

/// Backtracking over core-vertex assignments in discovery order (sources
/// first, then breadth-first). The callback returns false to stop early.
fn search(
    a: &Presentation,
    b: &Presentation,
    depth_bound: usize,
    pins: &Pins,
    on_found: &mut dyn FnMut(EmbeddingMap) -> bool,
) -> Result<()> {
    let order = search_order(a);
    let mut resolved_pins: BTreeMap<VertexId, VertexRef> = BTreeMap::new();
    for (v, img) in pins {
        if !a.contains_vertex(v) {
            return Err(Error::precondition(format!(
                "pinned vertex {v:?} is not a core vertex of the domain"
            )));
        }
        resolved_pins.insert(v.clone(), b.resolve_flex(img)?);
    }
    let mut assignment: BTreeMap<VertexId, VertexRef> = BTreeMap::new();
    let mut images: Vec<VertexRef> = Vec::new();
    assign(
        a,
        b,
        depth_bound,
        &resolved_pins,
        &order,
        0,
        &mut assignment,
        &mut images,
        on_found,
    );
    Ok(())
}

/// Discovery order for the backtracking search: start at the least source,
/// walk its weak component breadth-first through both edge directions, then
/// move to the next undiscovered source. Every vertex after the first of a
/// component therefore has an already-placed neighbor, so its candidate set
/// stays local instead of spanning the whole target.
fn search_order(a: &Presentation) -> Vec<VertexId> {
    let mut order: Vec<VertexId> = Vec::new();
    let mut seen: std::collections::BTreeSet<VertexId> = std::collections::BTreeSet::new();
    let mut seeds: Vec<VertexId> = a.sources();
    seeds.extend(a.vertices().cloned());
    for seed in seeds {
        if !seen.insert(seed.clone()) {
            continue;
        }
        let mut i = order.len();
        order.push(seed);
        while i < order.len() {
            let v = order[i].clone();
            let nbrs: Vec<VertexId> = a
                .out_neighbors(&v)
                .iter()
                .chain(a.in_neighbors(&v).iter())
                .cloned()
                .collect();
            for c in nbrs {
                if seen.insert(c.clone()) {
                    order.push(c);
                }
            }
            i += 1;
        }
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn assign(
    a: &Presentation,
    b: &Presentation,
    depth_bound: usize,
    pins: &Pins,
    order: &[VertexId],
    idx: usize,
    assignment: &mut BTreeMap<VertexId, VertexRef>,
    images: &mut Vec<VertexRef>,
    on_found: &mut dyn FnMut(EmbeddingMap) -> bool,
) -> bool {
    if idx == order.len() {
        let skeleton: BTreeMap<VertexRef, VertexRef> = assignment
            .iter()
            .map(|(v, img)| (VertexRef::core(v.clone()), img.clone()))
            .collect();
        let emb = EmbeddingMap::from_skeleton(a, skeleton);
        if emb.defects(a, b).is_empty() {
            return on_found(emb);
        }
        return true;
    }
    let v = &order[idx];
    let candidates = candidates_for(a, b, depth_bound, v, assignment);
    for cand in candidates {
        if let Some(pin) = pins.get(v) {
            if *pin != cand {
                continue;
            }
        }
        if images.contains(&cand) {
            continue;
        }
        if !consistent(a, b, v, &cand, assignment) {
            continue;
        }
        assignment.insert(v.clone(), cand.clone());
        images.push(cand);
        let keep_going = assign(
            a,
            b,
            depth_bound,
            pins,
            order,
            idx + 1,
            assignment,
            images,
            on_found,
        );
        images.pop();
        assignment.remove(v);
        if !keep_going {
            return false;
        }
    }
    true
}

/// Candidate images for `v`: children of an already-placed in-neighbor's
/// image when one exists, parents of a placed out-neighbor's image as the
/// next resort, otherwise every reference of `b` down to the depth bound.
/// Unconstrained candidates prefer untouched frontier trees, which keeps
/// first-match searches on large targets cheap.
fn candidates_for(
    a: &Presentation,
    b: &Presentation,
    depth_bound: usize,
    v: &VertexId,
    assignment: &BTreeMap<VertexId, VertexRef>,
) -> Vec<VertexRef> {
    if let Some(placed) = a
        .in_neighbors(v)
        .iter()
        .find_map(|p| assignment.get(p))
    {
        return b.children_of(placed);
    }
    if let Some(placed) = a
        .out_neighbors(v)
        .iter()
        .find_map(|c| assignment.get(c))
    {
        return parents_of_ref(b, placed);
    }
    let used: std::collections::BTreeSet<&VertexId> =
        assignment.values().map(|r| &r.base).collect();
    let mut fresh = Vec::new();
    let mut rest = Vec::new();
    for f in b.frontier() {
        let r = VertexRef::implicit(f.clone(), TreeAddress(vec![0]));
        if depth_bound >= 1 {
            if used.contains(f) {
                rest.push(r);
            } else {
                fresh.push(r);
            }
        }
    }
    for id in b.vertices() {
        rest.push(VertexRef::core(id.clone()));
    }
    for f in b.frontier() {
        let mut level: Vec<TreeAddress> = (0..b.q()).map(|d| TreeAddress(vec![d])).collect();
        for depth in 1..=depth_bound {
            rest.extend(
                level
                    .iter()
                    .map(|addr| VertexRef::implicit(f.clone(), addr.clone())),
            );
            if depth < depth_bound {
                level = level
                    .iter()
                    .flat_map(|addr| (0..b.q()).map(move |d| addr.child(d)))
                    .collect();
            }
        }
    }
    rest.sort();
    // fresh depth-1 candidates first (deterministic), then the full sorted
    // candidate list, keeping only the first occurrence of each reference
    fresh.extend(rest);
    let mut seen = std::collections::BTreeSet::new();
    fresh.retain(|r| seen.insert(r.clone()));
    fresh
}

/// Parents of a resolved reference. A node inside an unfolding tree has
/// exactly one (the next node up its address, or the tree's frontier vertex),
/// while a core vertex can have any number of core predecessors.
fn parents_of_ref(b: &Presentation, r: &VertexRef) -> Vec<VertexRef> {
    if r.addr.0.is_empty() {
        b.in_neighbors(&r.base)
            .iter()
            .map(|p| VertexRef::core(p.clone()))
            .collect()
    } else if r.addr.0.len() == 1 {
        vec![VertexRef::core(r.base.clone())]
    } else {
        let mut addr = r.addr.clone();
        addr.0.pop();
        vec![VertexRef::implicit(r.base.clone(), addr)]
    }
}

/// Local consistency of placing `v` at `cand`: every placed in-neighbor's
/// image has `cand` among its children except when `v`'s own placement
/// already forced it, and every placed out-neighbor is a child of `cand`.
fn consistent(
    a: &Presentation,
    b: &Presentation,
    v: &VertexId,
    cand: &VertexRef,
    assignment: &BTreeMap<VertexId, VertexRef>,
) -> bool {
    for p in a.in_neighbors(v) {
        if let Some(pi) = assignment.get(p) {
            if !b.children_of(pi).contains(cand) {
                return false;
            }
        }
    }
    for c in a.out_neighbors(v) {
        if let Some(ci) = assignment.get(c) {
            if !b.children_of(cand).contains(ci) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::Presentation;

    fn no_pins() -> Pins {
        Pins::new()
    }

    #[test]
    fn shared_root_pair_has_four_self_embeddings() {
        let p = Presentation::multi_root_tree(2, 2);
        let embs = enumerate_le_embeddings(&p, &p, 0, &no_pins()).unwrap();
        // swap the roots independently of swapping the shared children
        assert_eq!(embs.len(), 4);
        for e in &embs {
            assert!(e.defects(&p, &p).is_empty());
        }
    }

    #[test]
    fn tree_embeds_in_itself_three_ways_at_depth_one() {
        let t = Presentation::tree(2);
        let embs = enumerate_le_embeddings(&t, &t, 1, &no_pins()).unwrap();
        let mut images: Vec<String> = embs
            .iter()
            .map(|e| e.skeleton[&VertexRef::core("r")].display())
            .collect();
        images.sort();
        // the whole tree, the cone at 0, the cone at 1
        assert_eq!(images, vec!["r", "r/0", "r/1"]);
    }

    #[test]
    fn no_embedding_without_enough_sharing() {
        // two roots with a shared out-neighborhood never fit into a plain tree
        let tt2 = Presentation::multi_root_tree(2, 2);
        let t = Presentation::tree(2);
        assert!(enumerate_le_embeddings(&tt2, &t, 2, &no_pins())
            .unwrap()
            .is_empty());
        // three sharers don't fit where only two share
        let t3 = Presentation::multi_root_tree(3, 2);
        assert!(find_le_embedding(&t3, &tt2, 2, &no_pins())
            .unwrap()
            .is_none());
        // and the other direction exists
        assert!(find_le_embedding(&tt2, &t3, 2, &no_pins())
            .unwrap()
            .is_some());
    }

    #[test]
    fn failing_search_on_large_target_stays_cheap() {
        // a shared out-neighborhood can never appear in a deeply unfolded
        // plain tree; the search must refute this without touching most of
        // the target's thousands of references
        let big = Presentation::tree(2).unfold("r", 10).unwrap();
        assert!(big.vertices().count() > 2000);
        let tt2 = Presentation::multi_root_tree(2, 2);
        let started = std::time::Instant::now();
        assert!(find_le_embedding(&tt2, &big, 3, &no_pins())
            .unwrap()
            .is_none());
        assert!(started.elapsed() < std::time::Duration::from_secs(5));
    }

    #[test]
    fn pinned_search_respects_the_pin() {
        let p = Presentation::multi_root_tree(2, 2);
        let mut pins = Pins::new();
        pins.insert("x1".to_string(), VertexRef::core("x2"));
        let embs = enumerate_le_embeddings(&p, &p, 0, &pins).unwrap();
        assert_eq!(embs.len(), 2); // child swap still free
        for e in &embs {
            assert_eq!(e.skeleton[&VertexRef::core("x1")], VertexRef::core("x2"));
        }
    }

    #[test]
    fn cone_pair_embedding_reconstructs_identity() {
        let p = Presentation::multi_root_tree(2, 2);
        let pairs = vec![
            (VertexRef::core("x1"), VertexRef::core("x1")),
            (VertexRef::core("x2"), VertexRef::core("x2")),
        ];
        let emb = embedding_from_cone_pairs(&p, &p, &pairs).unwrap();
        assert!(emb.defects(&p, &p).is_empty());
        assert_eq!(emb.skeleton[&VertexRef::core("h0")], VertexRef::core("h0"));
    }

    #[test]
    fn cone_pair_embedding_maps_into_implicit_trees() {
        let t = Presentation::tree(2);
        let tt2 = Presentation::multi_root_tree(2, 2);
        let target = VertexRef::implicit("h0", TreeAddress(vec![1]));
        let emb =
            embedding_from_cone_pairs(&t, &tt2, &[(VertexRef::core("r"), target.clone())])
                .unwrap();
        assert!(emb.defects(&t, &tt2).is_empty());
        assert_eq!(emb.skeleton[&VertexRef::core("r")], target);
        // canonical extension: r/0 goes to h0/10
        let img = emb
            .apply(&t, &tt2, &VertexRef::implicit("r", TreeAddress(vec![0])))
            .unwrap();
        assert_eq!(img.display(), "h0/10");
    }

    #[test]
    fn defects_catch_broken_maps() {
        let p = Presentation::multi_root_tree(2, 2);
        // collapse both roots onto one image
        let mut skeleton = BTreeMap::new();
        for v in ["x1", "x2"] {
            skeleton.insert(VertexRef::core(v), VertexRef::core("x1"));
        }
        skeleton.insert(VertexRef::core("h0"), VertexRef::core("h0"));
        skeleton.insert(VertexRef::core("h1"), VertexRef::core("h1"));
        let emb = EmbeddingMap::from_skeleton(&p, skeleton);
        assert!(emb
            .defects(&p, &p)
            .iter()
            .any(|d| d.contains("not injective")));

        // a frontier vertex may map onto a materialized vertex: the cone
        // below x1 is still a tree, so this is a genuine embedding
        let t = Presentation::tree(2);
        let mut skeleton = BTreeMap::new();
        skeleton.insert(VertexRef::core("r"), VertexRef::core("x1"));
        let emb = EmbeddingMap::from_skeleton(&t, skeleton);
        assert!(emb.defects(&t, &p).is_empty());

        // but not onto a vertex whose cone shares a grandchild: the address
        // extension would hit the shared vertex twice
        let shared = Presentation::from_parts(
            2,
            ["x", "a", "b", "c", "d", "e"].map(String::from).to_vec(),
            [("x", "a"), ("x", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "e")]
                .map(|(s, d)| (s.to_string(), d.to_string()))
                .to_vec(),
            ["c", "d", "e"].map(String::from).to_vec(),
            vec![],
        )
        .unwrap();
        let mut skeleton = BTreeMap::new();
        skeleton.insert(VertexRef::core("r"), VertexRef::core("x"));
        let emb = EmbeddingMap::from_skeleton(&t, skeleton);
        assert!(emb
            .defects(&t, &shared)
            .iter()
            .any(|d| d.contains("not a tree")));
    }

    #[test]
    fn skeleton_only_needs_core_completeness() {
        let t = Presentation::tree(2);
        let emb = EmbeddingMap::from_skeleton(&t, BTreeMap::new());
        assert!(!emb.defects(&t, &t).is_empty());
    }
}

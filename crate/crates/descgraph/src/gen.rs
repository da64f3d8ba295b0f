//! Seeded random generation of valid presentations, glue handles and
//! amalgamation problems.
//!
//! Everything here is driven by a caller-supplied RNG (tests use a
//! fixed-seed ChaCha8), so generated inputs are reproducible. Presentations
//! are grown by structure-preserving moves only — unfolding a frontier
//! vertex, adjoining a fresh source over an independent vertex set,
//! duplicating an existing out-neighborhood — so every intermediate value
//! is a valid presentation and class bounds can be enforced move by move.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::amalgam::AmalgamProblem;
use crate::presentation::{ClassBound, Presentation, VertexId, VertexRef};
use crate::tree::TreeAddress;

/// One growth move on a valid presentation. Returns the unchanged input
/// when the sampled move is not applicable (e.g. no independent q-subset).
fn grow_step(rng: &mut impl Rng, p: &Presentation, bound: ClassBound) -> Presentation {
    let q = p.q();
    match rng.gen_range(0..10u32) {
        // unfold a random frontier vertex one level
        0..=4 => {
            let frontier: Vec<VertexId> = p.frontier().iter().cloned().collect();
            match frontier.as_slice().choose(rng) {
                Some(f) => p.unfold(f, 1).expect("frontier unfold is valid"),
                None => p.clone(),
            }
        }
        // adjoin a fresh source over an independent q-subset
        5..=7 => match independent_core_subset(rng, p, q as usize) {
            Some(targets) => adjoin_source(p, &targets, bound),
            None => p.clone(),
        },
        // duplicate an existing out-neighborhood (creates multiplicity)
        _ => {
            let inner: Vec<VertexId> = p
                .vertices()
                .filter(|v| !p.is_frontier(v))
                .cloned()
                .collect();
            match inner.as_slice().choose(rng) {
                Some(v) => adjoin_source(p, &p.out_neighbors(v).to_vec(), bound),
                None => p.clone(),
            }
        }
    }
}

/// Adds a new in-degree-0 vertex with the given out-neighbors, unless that
/// would push their shared-out-set class to the bound.
fn adjoin_source(p: &Presentation, targets: &[VertexId], bound: ClassBound) -> Presentation {
    if let ClassBound::Finite(n) = bound {
        let mut key: Vec<&VertexId> = targets.iter().collect();
        key.sort();
        let sharing = p
            .vertices()
            .filter(|v| {
                let out = p.out_neighbors(v);
                out.len() == key.len() && out.iter().zip(&key).all(|(a, &b)| a == b)
            })
            .count();
        if sharing + 1 >= n as usize {
            return p.clone();
        }
    }
    let mut k = 0usize;
    let id = loop {
        let cand = format!("s{k}");
        if !p.contains_vertex(&cand) {
            break cand;
        }
        k += 1;
    };
    let mut vertices: Vec<VertexId> = p.vertices().cloned().collect();
    vertices.push(id.clone());
    let mut edges = p.edges();
    for t in targets {
        edges.push((id.clone(), t.clone()));
    }
    Presentation::from_parts(
        p.q(),
        vertices,
        edges,
        p.frontier().iter().cloned().collect(),
        vec![],
    )
    .expect("adjoined source keeps the structure well-formed")
    .with_computed_generators()
}

/// A random independent (cone-disjoint) set of `k` core vertices, if the
/// presentation has one.
fn independent_core_subset(rng: &mut impl Rng, p: &Presentation, k: usize) -> Option<Vec<VertexId>> {
    let mut pool: Vec<VertexId> = p.vertices().cloned().collect();
    pool.shuffle(rng);
    let mut picked: Vec<VertexRef> = Vec::new();
    for v in pool {
        let mut trial = picked.clone();
        trial.push(VertexRef::core(v));
        if p.is_independent(&trial).unwrap_or(false) {
            picked = trial;
            if picked.len() == k {
                return Some(picked.into_iter().map(|r| r.base).collect());
            }
        }
    }
    None
}

/// Grows `p` by random moves until its core reaches `target_core` (or no
/// sampled move applies for a while). The input survives descendant-closed
/// with its ids intact, and the result stays within `bound`.
pub fn grow_random(
    rng: &mut impl Rng,
    mut p: Presentation,
    target_core: usize,
    bound: ClassBound,
) -> Presentation {
    let mut stall = 0usize;
    while p.core_len() < target_core && stall < 50 {
        let next = grow_step(rng, &p, bound);
        if next.core_len() == p.core_len() {
            stall += 1;
        } else {
            stall = 0;
        }
        p = next;
    }
    p
}

/// A random valid presentation within `bound`, grown from a single root.
pub fn random_presentation(
    rng: &mut impl Rng,
    q: u8,
    target_core: usize,
    bound: ClassBound,
) -> Presentation {
    let seed = Presentation::from_parts(
        q,
        vec!["a".into()],
        vec![],
        vec!["a".into()],
        vec!["a".into()],
    )
    .expect("single-root presentation is well-formed");
    grow_random(rng, seed, target_core, bound)
}

/// Random injective relabeling (for isomorphism-invariance tests).
pub fn relabel_random(rng: &mut impl Rng, p: &Presentation) -> Presentation {
    let ids: Vec<VertexId> = p.vertices().cloned().collect();
    let mut names: Vec<String> = (0..ids.len()).map(|i| format!("m{i}")).collect();
    names.shuffle(rng);
    let map: std::collections::BTreeMap<VertexId, VertexId> =
        ids.into_iter().zip(names).collect();
    p.rename_vertices(|v| map[v].clone())
        .expect("random relabeling is injective")
}

/// A random vertex reference: a core vertex, or an address of length up to
/// `max_depth` below a frontier vertex.
pub fn random_ref(rng: &mut impl Rng, p: &Presentation, max_depth: usize) -> VertexRef {
    let frontier: Vec<VertexId> = p.frontier().iter().cloned().collect();
    if !frontier.is_empty() && rng.gen_bool(0.4) {
        let f = frontier.as_slice().choose(rng).unwrap().clone();
        let depth = rng.gen_range(1..=max_depth.max(1));
        let digits: Vec<u8> = (0..depth).map(|_| rng.gen_range(0..p.q())).collect();
        return VertexRef::implicit(f, TreeAddress(digits));
    }
    let core: Vec<VertexId> = p.vertices().cloned().collect();
    VertexRef::core(core.as_slice().choose(rng).unwrap().clone())
}

/// A random mutually non-descendant reference set of size ≤ `max_len`
/// (possibly empty). Suitable as a glue handle.
pub fn random_handle(rng: &mut impl Rng, p: &Presentation, max_len: usize) -> Vec<VertexRef> {
    let want = rng.gen_range(0..=max_len);
    let mut picked: Vec<VertexRef> = Vec::new();
    for _ in 0..10 * want.max(1) {
        if picked.len() == want {
            break;
        }
        let r = random_ref(rng, p, 2);
        let nested = picked
            .iter()
            .any(|u| p.cone_contains(u, &r) || p.cone_contains(&r, u));
        if !nested && !picked.contains(&r) {
            picked.push(r);
        }
    }
    picked
}

/// A random independent (cone-disjoint) reference set of size ≤ `max_len`.
pub fn random_independent_refs(
    rng: &mut impl Rng,
    p: &Presentation,
    max_len: usize,
) -> Vec<VertexRef> {
    let want = rng.gen_range(0..=max_len);
    let mut picked: Vec<VertexRef> = Vec::new();
    for _ in 0..10 * want.max(1) {
        if picked.len() == want {
            break;
        }
        let r = random_ref(rng, p, 2);
        let mut trial = picked.clone();
        trial.push(r);
        if p.is_independent(&trial).unwrap_or(false) {
            picked = trial;
        }
    }
    picked
}

/// `count` independent tree addresses of depth 1..=`max_depth` under one
/// root (retries until independent; feasible whenever count ≤ q^max_depth).
pub fn random_addresses(
    rng: &mut impl Rng,
    q: u8,
    count: usize,
    max_depth: usize,
) -> Vec<TreeAddress> {
    loop {
        let addrs: Vec<TreeAddress> = (0..count)
            .map(|_| {
                let depth = rng.gen_range(1..=max_depth.max(1));
                TreeAddress((0..depth).map(|_| rng.gen_range(0..q)).collect())
            })
            .collect();
        let mut dedup = addrs.clone();
        dedup.sort();
        dedup.dedup();
        if dedup.len() == count && crate::tree::is_independent_addresses(&addrs) {
            return addrs;
        }
    }
}

/// A random amalgamation problem with both factors within `bound`: the
/// first factor is grown freely, a random handle inside it designates the
/// shared subdigraph, and the second factor is an independently grown
/// extension of a relabeled copy of that subdigraph.
pub fn random_problem(
    rng: &mut impl Rng,
    q: u8,
    target_core: usize,
    bound: ClassBound,
) -> AmalgamProblem {
    let b1 = random_presentation(rng, q, target_core, bound);
    let handle = random_handle(rng, &b1, 2);
    if handle.is_empty() {
        let b2 = random_presentation(rng, q, target_core, bound);
        return AmalgamProblem::new(&b1, &b2, vec![], vec![]);
    }
    let (sub, gens) = b1
        .restrict_to_cone(&handle)
        .expect("handle refs resolve in their own presentation");
    let seed2 = sub
        .rename_vertices(|v| format!("y.{v}"))
        .expect("prefixing is injective");
    let b2 = grow_random(rng, seed2, target_core, bound);
    let a_in_b2: Vec<VertexRef> = gens
        .iter()
        .map(|g| VertexRef::implicit(format!("y.{}", g.base), g.addr.clone()))
        .collect();
    AmalgamProblem::new(&b1, &b2, handle, a_in_b2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_presentations_are_valid_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q in [2u8, 3] {
            for n in [ClassBound::Finite(2), ClassBound::Finite(3), ClassBound::Infinite] {
                for _ in 0..20 {
                    let p = random_presentation(&mut rng, q, 12, n);
                    assert!(p.validate().is_empty(), "{:?}", p.validate());
                    assert!(p.within_class(n));
                    assert!(p.core_len() >= 1);
                }
            }
        }
    }

    #[test]
    fn generation_is_reproducible_for_a_fixed_seed() {
        let a = random_presentation(
            &mut ChaCha8Rng::seed_from_u64(5),
            2,
            12,
            ClassBound::Infinite,
        );
        let b = random_presentation(
            &mut ChaCha8Rng::seed_from_u64(5),
            2,
            12,
            ClassBound::Infinite,
        );
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn random_problems_are_well_posed() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let prob = random_problem(&mut rng, 2, 10, ClassBound::Infinite);
            let (b1, b2) = prob.parts().unwrap();
            assert!(b1.validate().is_empty());
            assert!(b2.validate().is_empty());
            assert_eq!(prob.a_in_b1.len(), prob.a_in_b2.len());
            for r in &prob.a_in_b1 {
                b1.resolve_flex(r).unwrap();
            }
            for r in &prob.a_in_b2 {
                b2.resolve_flex(r).unwrap();
            }
        }
    }

    #[test]
    fn random_addresses_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let addrs = random_addresses(&mut rng, 2, 3, 3);
            assert_eq!(addrs.len(), 3);
            assert!(crate::tree::is_independent_addresses(&addrs));
        }
    }
}

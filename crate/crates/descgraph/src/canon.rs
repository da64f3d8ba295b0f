//! Canonical forms for presentations.
//!
//! Two presentations describe the same infinite digraph exactly when their
//! reduced normal forms are isomorphic as marked finite digraphs (core
//! isomorphism respecting the frontier marking). This module computes a
//! canonical relabeling of the reduced core by color refinement plus
//! individualization, taking the lexicographically least certificate over
//! the explored labelings. Discovered automorphisms prune symmetric
//! branches, which keeps highly symmetric cores (shared-neighborhood roots,
//! sibling frontier vertices) cheap.

use std::collections::BTreeMap;

use crate::presentation::{Presentation, VertexId};

/// Canonically relabeled presentation plus the relabeling that produced it.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub presentation: Presentation,
    /// original id -> canonical id ("v0", "v1", ...)
    pub relabeling: BTreeMap<VertexId, VertexId>,
    pub certificate: String,
}

/// Certificate of the reduced normal form; equal strings ⟺ the
/// presentations describe isomorphic digraphs.
pub fn certificate(p: &Presentation) -> String {
    canonical_form(p).certificate
}

pub fn isomorphic(a: &Presentation, b: &Presentation) -> bool {
    certificate(a) == certificate(b)
}

/// Reduces, then relabels canonically.
pub fn canonical_form(p: &Presentation) -> CanonicalForm {
    let reduced = p.reduce();
    let labels = canonical_labels_raw(&reduced);
    let rename: BTreeMap<VertexId, VertexId> = labels
        .iter()
        .map(|(v, &i)| (v.clone(), format!("v{i}")))
        .collect();
    let vertices: Vec<VertexId> = {
        let mut vs: Vec<(usize, VertexId)> = labels
            .iter()
            .map(|(v, &i)| (i, rename[v].clone()))
            .collect();
        vs.sort();
        vs.into_iter().map(|(_, v)| v).collect()
    };
    let mut edges: Vec<(VertexId, VertexId)> = reduced
        .edges()
        .into_iter()
        .map(|(s, d)| (rename[&s].clone(), rename[&d].clone()))
        .collect();
    edges.sort();
    let frontier: Vec<VertexId> = {
        let mut fs: Vec<VertexId> = reduced.frontier().iter().map(|f| rename[f].clone()).collect();
        fs.sort();
        fs
    };
    let generators: Vec<VertexId> = {
        let mut gs: Vec<VertexId> = reduced
            .declared_generators()
            .iter()
            .map(|g| rename[g].clone())
            .collect();
        gs.sort();
        gs
    };
    let presentation =
        Presentation::from_parts(reduced.q(), vertices, edges.clone(), frontier.clone(), generators)
            .expect("relabeling preserves well-formedness");
    let certificate = render_certificate(reduced.q(), reduced.core_len(), &edges, &frontier);
    CanonicalForm {
        presentation,
        relabeling: rename,
        certificate,
    }
}

fn render_certificate(
    q: u8,
    n: usize,
    edges: &[(VertexId, VertexId)],
    frontier: &[VertexId],
) -> String {
    let es: Vec<String> = edges.iter().map(|(s, d)| format!("{s}>{d}")).collect();
    format!("q{q};n{n};e[{}];f[{}]", es.join(","), frontier.join(","))
}

/// Refinement colors without the individualization search: vertices in the
/// same automorphism orbit always share a color. Cheap (no backtracking),
/// and stable under relabeling up to orbit choice, which makes
/// `(color, id)` the standard deterministic vertex order for tie-breaking
/// in constructions.
pub fn stable_colors(p: &Presentation) -> BTreeMap<VertexId, usize> {
    let ids: Vec<VertexId> = p.vertices().cloned().collect();
    if ids.is_empty() {
        return BTreeMap::new();
    }
    let index: BTreeMap<&VertexId, usize> = ids.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let out: Vec<Vec<usize>> = ids
        .iter()
        .map(|v| p.out_neighbors(v).iter().map(|d| index[d]).collect())
        .collect();
    let inc: Vec<Vec<usize>> = ids
        .iter()
        .map(|v| p.in_neighbors(v).iter().map(|d| index[d]).collect())
        .collect();
    let frontier: Vec<bool> = ids.iter().map(|v| p.is_frontier(v)).collect();
    let search = Search {
        n: ids.len(),
        out: &out,
        inc: &inc,
        frontier: &frontier,
        best: None,
        best_perm: Vec::new(),
        automorphisms: Vec::new(),
    };
    let colors = search.refine(initial_colors(&frontier, &inc));
    ids.into_iter().zip(colors).collect()
}

/// Canonical labeling of the core as given (no reduction): a bijection
/// from vertex ids to 0..core_len. Isomorphism-invariant, so relabeling
/// the input permutes nothing observable.
pub fn canonical_labels_raw(p: &Presentation) -> BTreeMap<VertexId, usize> {
    let ids: Vec<VertexId> = p.vertices().cloned().collect();
    if ids.is_empty() {
        return BTreeMap::new();
    }
    let index: BTreeMap<&VertexId, usize> = ids.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let out: Vec<Vec<usize>> = ids
        .iter()
        .map(|v| p.out_neighbors(v).iter().map(|d| index[d]).collect())
        .collect();
    let inc: Vec<Vec<usize>> = ids
        .iter()
        .map(|v| p.in_neighbors(v).iter().map(|d| index[d]).collect())
        .collect();
    let frontier: Vec<bool> = ids.iter().map(|v| p.is_frontier(v)).collect();

    let mut search = Search {
        n: ids.len(),
        out: &out,
        inc: &inc,
        frontier: &frontier,
        best: None,
        best_perm: Vec::new(),
        automorphisms: Vec::new(),
    };
    let init = search.refine(initial_colors(&frontier, &inc));
    search.explore(init, &[]);
    let perm = search.best_perm.clone();
    ids.into_iter()
        .enumerate()
        .map(|(i, v)| (v, perm[i]))
        .collect()
}

type Colors = Vec<usize>;
type Cert = (Vec<(usize, usize)>, Vec<usize>);

fn initial_colors(frontier: &[bool], inc: &[Vec<usize>]) -> Colors {
    // initial invariant: frontier flag and in-degree
    let keys: Vec<(bool, usize)> = frontier
        .iter()
        .zip(inc)
        .map(|(&f, preds)| (f, preds.len()))
        .collect();
    rank(&keys)
}

fn rank<K: Ord + Clone>(keys: &[K]) -> Colors {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap())
        .collect()
}

struct Search<'a> {
    n: usize,
    out: &'a [Vec<usize>],
    inc: &'a [Vec<usize>],
    frontier: &'a [bool],
    best: Option<Cert>,
    best_perm: Vec<usize>,
    /// automorphisms discovered as pairs of equal-certificate labelings
    automorphisms: Vec<Vec<usize>>,
}

impl Search<'_> {
    /// 1-dimensional refinement: neighbors' colors in both directions,
    /// iterated to a fixpoint.
    fn refine(&self, mut colors: Colors) -> Colors {
        loop {
            let keys: Vec<(usize, Vec<usize>, Vec<usize>)> = (0..self.n)
                .map(|v| {
                    let mut o: Vec<usize> = self.out[v].iter().map(|&d| colors[d]).collect();
                    o.sort();
                    let mut i: Vec<usize> = self.inc[v].iter().map(|&d| colors[d]).collect();
                    i.sort();
                    (colors[v], o, i)
                })
                .collect();
            let next = rank(&keys);
            if next == colors {
                return colors;
            }
            colors = next;
        }
    }

    fn explore(&mut self, colors: Colors, individualized: &[usize]) {
        if let Some(cell) = self.target_cell(&colors) {
            let mut tried: Vec<usize> = Vec::new();
            for &v in &cell {
                if self.in_known_orbit(v, &tried, individualized) {
                    continue;
                }
                tried.push(v);
                let mut next = colors.clone();
                // individualize: give v a fresh color below its old class
                for u in 0..self.n {
                    next[u] = next[u] * 2 + 1;
                }
                next[v] -= 1;
                let next = self.refine(rank(&next));
                let mut ind = individualized.to_vec();
                ind.push(v);
                self.explore(next, &ind);
            }
        } else {
            self.record_leaf(&colors);
        }
    }

    /// Smallest non-singleton color class, ties broken by color. The
    /// choice must depend only on the refined partition — never on input
    /// vertex order — or isomorphic inputs would explore different branch
    /// sets and could settle on different minima.
    fn target_cell(&self, colors: &Colors) -> Option<Vec<usize>> {
        let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (v, &c) in colors.iter().enumerate() {
            cells.entry(c).or_default().push(v);
        }
        cells
            .into_iter()
            .filter(|(_, cell)| cell.len() > 1)
            .min_by_key(|(c, cell)| (cell.len(), *c))
            .map(|(_, cell)| cell)
    }

    /// Skip `v` when a discovered automorphism fixing every vertex
    /// individualized so far maps it to an already-tried sibling.
    fn in_known_orbit(&self, v: usize, tried: &[usize], individualized: &[usize]) -> bool {
        if tried.is_empty() {
            return false;
        }
        // union-find over automorphisms that fix the individualized prefix
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for auto in &self.automorphisms {
            if individualized.iter().any(|&u| auto[u] != u) {
                continue;
            }
            for u in 0..self.n {
                let (a, b) = (find(&mut parent, u), find(&mut parent, auto[u]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let rv = find(&mut parent, v);
        tried.iter().any(|&t| find(&mut parent, t) == rv)
    }

    fn record_leaf(&mut self, colors: &Colors) {
        // discrete coloring = labeling; build its certificate
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for v in 0..self.n {
            for &d in &self.out[v] {
                edges.push((colors[v], colors[d]));
            }
        }
        edges.sort();
        let mut fr: Vec<usize> = (0..self.n)
            .filter(|&v| self.frontier[v])
            .map(|v| colors[v])
            .collect();
        fr.sort();
        let cert = (edges, fr);
        match &self.best {
            None => {
                self.best = Some(cert);
                self.best_perm = colors.clone();
            }
            Some(best) => {
                if cert < *best {
                    self.best = Some(cert);
                    self.best_perm = colors.clone();
                } else if cert == *best {
                    // equal certificates compose to an automorphism:
                    // v ↦ best_perm⁻¹(colors(v))
                    let mut inv = vec![0usize; self.n];
                    for (v, &l) in self.best_perm.iter().enumerate() {
                        inv[l] = v;
                    }
                    let auto: Vec<usize> = colors.iter().map(|&l| inv[l]).collect();
                    if auto.iter().enumerate().any(|(v, &w)| v != w) {
                        self.automorphisms.push(auto);
                    }
                }
            }
        }
    }
}

//! Finite covers of the circle, inner and outer iteration graphs, and the
//! ergodic decomposition of a map under uniform noise.

use crate::mapdsl::MapSpec;
use crate::noise::{NoiseKind, NoiseModel};
use crate::torus::{self, Arc};
use crate::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

pub type AtomSet = BTreeSet<usize>;

/// Regular open cover: atom `k` is the arc of radius `radius` around
/// `(k + 1/2)/n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    n: usize,
    radius: f64,
    /// Inner/outer margin.
    pub delta: f64,
}

impl Cover {
    /// `n` atoms of radius `radius`; the atoms must overlap to cover.
    pub fn regular(n: usize, radius: f64, delta: f64) -> Result<Self, Error> {
        if n == 0 || !(radius * 2.0 * n as f64 > 1.0) || !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{n} atoms of radius {radius} do not form an open cover with margin {delta}"
            )));
        }
        Ok(Cover { n, radius, delta })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Largest atom diameter.
    pub fn mesh(&self) -> f64 {
        (2.0 * self.radius).min(1.0)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.n as f64
    }

    pub fn atom(&self, k: usize) -> Arc {
        Arc::centered(self.center(k), self.radius)
    }

    /// Length of the part of atom `k` covered by no other atom.
    pub fn shrunken_length(&self) -> f64 {
        (2.0 * (self.spacing() - self.radius)).max(0.0)
    }

    /// The part of atom `k` covered by no other atom (possibly empty).
    pub fn shrunken(&self, k: usize) -> Option<Arc> {
        let h = 0.5 * self.shrunken_length();
        (h > 0.0).then(|| Arc::centered(self.center(k), h))
    }

    /// Atoms containing `x`.
    pub fn atoms_containing(&self, x: f64) -> Vec<usize> {
        self.candidates(x, x)
            .into_iter()
            .filter(|&k| self.atom(k).contains_point(x))
            .collect()
    }

    /// Indices of atoms that might meet the lift `[lo, hi]`.
    fn candidates(&self, lo: f64, hi: f64) -> Vec<usize> {
        let n = self.n as i64;
        if hi - lo + 2.0 * self.radius >= 1.0 {
            return (0..self.n).collect();
        }
        let s = self.spacing();
        let first = ((lo - self.radius) / s - 0.5).floor() as i64 - 1;
        let last = ((hi + self.radius) / s - 0.5).ceil() as i64 + 1;
        let mut out: Vec<usize> = (first..=last).map(|k| k.rem_euclid(n) as usize).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Union of the given atoms as disjoint arcs sorted by start.
    pub fn region(&self, atoms: &AtomSet) -> Vec<Arc> {
        if atoms.len() == self.n {
            return vec![Arc::new(0.0, 1.0)];
        }
        let mut arcs: Vec<Arc> = atoms.iter().map(|&k| self.atom(k)).collect();
        arcs.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        merge_arcs(arcs)
    }

    /// Atoms meeting any arc of `region`.
    pub fn atoms_meeting(&self, region: &[Arc]) -> AtomSet {
        let mut out = AtomSet::new();
        for r in region {
            for k in self.candidates(r.lo, r.hi) {
                if self.atom(k).intersects(r) {
                    out.insert(k);
                }
            }
        }
        out
    }
}

/// Merges overlapping arcs sorted by `lo`, including the wrap-around pair.
pub(crate) fn merge_arcs(arcs: Vec<Arc>) -> Vec<Arc> {
    let mut out: Vec<Arc> = Vec::new();
    for a in arcs {
        match out.last_mut() {
            Some(last) if a.lo <= last.hi => last.hi = last.hi.max(a.hi),
            _ => out.push(a),
        }
    }
    if out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        if last.hi >= first.lo + 1.0 {
            out.pop();
            out[0] = Arc::new(last.lo - 1.0, first.hi.max(last.hi - 1.0));
        }
    }
    if out.len() == 1 && out[0].length() >= 1.0 {
        return vec![Arc::new(0.0, 1.0)];
    }
    out
}

/// `build_cover(mesh, delta)`: atoms of diameter at most `mesh` with 50%
/// overlap, `ceil(2/mesh)` of them.
pub fn build_cover(mesh: f64, delta: f64) -> Result<Cover, Error> {
    if !(mesh > 0.0) {
        return Err(Error::InvalidArgument(format!("mesh {mesh} must be positive")));
    }
    let n = ((2.0 / mesh) - 1e-9).ceil().max(3.0) as usize;
    Cover::regular(n, 1.0 / n as f64, delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Inner,
    Outer,
}

/// Cyclic run of atom indices: `(start, len)` stands for
/// `start, start + 1, ..., start + len - 1` taken mod `n`.
pub type Run = (usize, usize);

/// Successor sets of the inner or outer iteration on a cover.
///
/// On a regular cover every successor set is one or two cyclic runs, so
/// the sets are stored as runs. Fine covers would otherwise need hundreds
/// of millions of explicit edges.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationGraph {
    pub kind: GraphKind,
    runs: Vec<Vec<Run>>,
}

fn to_runs(n: usize, mut idx: Vec<usize>) -> Vec<Run> {
    idx.sort_unstable();
    idx.dedup();
    let mut runs: Vec<Run> = Vec::new();
    for j in idx {
        match runs.last_mut() {
            Some((s, l)) if *s + *l == j => *l += 1,
            _ => runs.push((j, 1)),
        }
    }
    if runs.len() > 1 {
        let (s_last, l_last) = *runs.last().unwrap();
        if runs[0].0 == 0 && s_last + l_last == n {
            runs.pop();
            runs[0] = (s_last, l_last + runs[0].1);
        }
    }
    runs
}

/// Enclosure of the lifted image of atom `k`.
fn atom_image(system: &MapSpec, cover: &Cover, k: usize) -> (f64, f64) {
    let a = cover.atom(k);
    let eta = (cover.delta / 8.0).min(a.length());
    let iv = system.image_lift(a.lo, a.hi, eta);
    (iv.lo, iv.hi)
}

fn inner_successors(cover: &Cover, img: (f64, f64)) -> Vec<usize> {
    let (a, b) = img;
    // ∩_{x ∈ [a, b]} B(x, δ) = (b - δ, a + δ), rounded inward
    let lo = (b - cover.delta).next_up();
    let hi = (a + cover.delta).next_down();
    if !(hi > lo) || !img.0.is_finite() || !img.1.is_finite() {
        return Vec::new();
    }
    let window = Arc::new(lo, hi);
    cover
        .candidates(lo, hi)
        .into_iter()
        .filter(|&j| window.contains_arc_strictly(&cover.atom(j)))
        .collect()
}

fn outer_successors(cover: &Cover, img: (f64, f64)) -> Vec<usize> {
    let (a, b) = img;
    if !a.is_finite() || !b.is_finite() {
        return (0..cover.len()).collect();
    }
    let lo = (a - cover.delta).next_down();
    let hi = (b + cover.delta).next_up();
    let window = Arc::new(lo, hi);
    cover
        .candidates(lo, hi)
        .into_iter()
        .filter(|&j| window.intersects(&cover.atom(j)))
        .collect()
}

/// Strongly connected components. Components are numbered so that every
/// edge between two components goes from a larger to a smaller number.
struct Components {
    comp_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    cyclic: Vec<bool>,
    closed: Vec<bool>,
}

impl IterationGraph {
    /// Inner graph; atoms with empty image are allowed here.
    pub fn inner(system: &MapSpec, cover: &Cover) -> Result<Self, Error> {
        Self::build(system, cover, GraphKind::Inner)
    }

    pub fn outer(system: &MapSpec, cover: &Cover) -> Result<Self, Error> {
        Self::build(system, cover, GraphKind::Outer)
    }

    fn build(system: &MapSpec, cover: &Cover, kind: GraphKind) -> Result<Self, Error> {
        if system.dim() != 1 {
            return Err(Error::InvalidArgument("covers are implemented on the circle only".into()));
        }
        let n = cover.len();
        let runs = (0..n)
            .into_par_iter()
            .map(|k| {
                let img = atom_image(system, cover, k);
                let s = match kind {
                    GraphKind::Inner => inner_successors(cover, img),
                    GraphKind::Outer => outer_successors(cover, img),
                };
                to_runs(n, s)
            })
            .collect();
        Ok(IterationGraph { kind, runs })
    }

    /// Builds a graph from explicit successor lists.
    pub fn from_edges(kind: GraphKind, succ: Vec<Vec<usize>>) -> Self {
        let n = succ.len();
        assert!(succ.iter().flatten().all(|&b| b < n), "edge target out of range");
        IterationGraph {
            kind,
            runs: succ.into_iter().map(|s| to_runs(n, s)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Successors of `a` as cyclic runs.
    pub fn runs(&self, a: usize) -> &[Run] {
        &self.runs[a]
    }

    pub fn successors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.len();
        self.runs[a]
            .iter()
            .flat_map(move |&(s, l)| (0..l).map(move |i| (s + i) % n))
    }

    pub fn out_degree(&self, a: usize) -> usize {
        self.runs[a].iter().map(|r| r.1).sum()
    }

    pub fn num_edges(&self) -> usize {
        (0..self.len()).map(|a| self.out_degree(a)).sum()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let n = self.len();
        self.runs[a].iter().any(|&(s, l)| (b + n - s) % n < l)
    }

    /// First atom whose successor set is empty.
    pub fn first_empty(&self) -> Option<usize> {
        self.runs.iter().position(|s| s.is_empty())
    }

    /// `Φ(A)`: union of the successor sets.
    pub fn apply(&self, atoms: &AtomSet) -> AtomSet {
        atoms.iter().flat_map(|&a| self.successors(a)).collect()
    }

    /// Orbit `∪_{n ≥ 1} Φ^n({a})`.
    pub fn orbit(&self, a: usize) -> AtomSet {
        self.hitting_numbers(a)
            .into_iter()
            .enumerate()
            .filter_map(|(v, d)| d.map(|_| v))
            .collect()
    }

    /// Hitting numbers `N(a -> b) = min{n ≥ 1 : b ∈ Φ^n(a)}` from `a`,
    /// `None` where unreachable.
    pub fn hitting_numbers(&self, a: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        for v in self.successors(a) {
            if dist[v].is_none() {
                dist[v] = Some(1);
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for w in self.successors(v) {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Iterative Tarjan.
    fn components(&self) -> Components {
        let n = self.len();
        const NONE: usize = usize::MAX;
        let mut index = vec![NONE; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comp_of = vec![NONE; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut next = 0;
        // frame: (node, run index, offset within run)
        let mut call: Vec<(usize, usize, usize)> = Vec::new();
        for root in 0..n {
            if index[root] != NONE {
                continue;
            }
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            call.push((root, 0, 0));
            while let Some(&(v, r, o)) = call.last() {
                let runs = &self.runs[v];
                if r < runs.len() {
                    let (s, l) = runs[r];
                    let w = (s + o) % n;
                    let top = call.last_mut().unwrap();
                    if o + 1 == l {
                        *top = (v, r + 1, 0);
                    } else {
                        *top = (v, r, o + 1);
                    }
                    if index[w] == NONE {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(u, _, _)) = call.last() {
                        low[u] = low[u].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let c = members.len();
                        let mut m = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp_of[w] = c;
                            m.push(w);
                            if w == v {
                                break;
                            }
                        }
                        m.sort_unstable();
                        members.push(m);
                    }
                }
            }
        }
        let cyclic = members
            .iter()
            .map(|m| m.len() > 1 || self.has_edge(m[0], m[0]))
            .collect();
        let closed = members
            .iter()
            .enumerate()
            .map(|(c, m)| m.iter().all(|&v| self.successors(v).all(|w| comp_of[w] == c)))
            .collect();
        Components { comp_of, members, cyclic, closed }
    }

    /// Graphviz rendering.
    pub fn to_dot(&self, cover: Option<&Cover>) -> String {
        let name = match self.kind {
            GraphKind::Inner => "inner",
            GraphKind::Outer => "outer",
        };
        let mut out = format!("digraph {name} {{\n");
        for a in 0..self.len() {
            match cover {
                Some(c) => {
                    let arc = c.atom(a);
                    let _ = writeln!(out, "  a{a} [label=\"{a}: ({:.6}, {:.6})\"];", arc.lo, arc.hi);
                }
                None => {
                    let _ = writeln!(out, "  a{a};");
                }
            }
        }
        for a in 0..self.len() {
            for b in self.successors(a) {
                let _ = writeln!(out, "  a{a} -> a{b};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Inner-periodic atoms: `a ∈ Φ_in^n(a)` for some `n ≤ |ξ|`, i.e. atoms on
/// a directed cycle.
pub fn inner_periodic_atoms(graph: &IterationGraph) -> AtomSet {
    let comps = graph.components();
    comps
        .members
        .into_iter()
        .zip(comps.cyclic)
        .filter(|(_, c)| *c)
        .flat_map(|(m, _)| m)
        .collect()
}

/// Reduces the inner-periodic atoms to a maximal set of representatives
/// with pairwise disjoint inner orbits.
///
/// Whenever two representatives have intersecting orbits both are replaced
/// by an inner-periodic atom of the intersection. The intersection is
/// forward invariant, so it contains a closed cyclic class and the smallest
/// atom of such a class is taken.
///
/// Two orbits meet exactly when they share a closed class, so orbits are
/// tracked through the closed classes they contain.
pub fn inner_reduction(graph: &IterationGraph, periodic: &AtomSet) -> AtomSet {
    let comps = graph.components();
    let nc = comps.members.len();
    // closed classes reachable from each component; successors of a
    // component carry smaller numbers, so one forward sweep suffices
    let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nc];
    let mut stamp = vec![usize::MAX; nc];
    for c in 0..nc {
        if comps.closed[c] {
            reach[c].insert(c);
            continue;
        }
        let mut acc = BTreeSet::new();
        for &v in &comps.members[c] {
            for w in graph.successors(v) {
                let d = comps.comp_of[w];
                if d != c && stamp[d] != c {
                    stamp[d] = c;
                    acc.extend(reach[d].iter().copied());
                }
            }
        }
        reach[c] = acc;
    }
    let mut reps: Vec<(usize, BTreeSet<usize>)> = Vec::new();
    let mut pending: Vec<usize> = periodic.iter().copied().collect();
    pending.reverse();
    while let Some(p) = pending.pop() {
        let classes = &reach[comps.comp_of[p]];
        let hit = reps.iter().position(|(_, o)| !o.is_disjoint(classes));
        match hit {
            None => reps.push((p, classes.clone())),
            Some(i) => {
                let (_, other) = reps.swap_remove(i);
                let r = other
                    .intersection(classes)
                    .map(|&c| comps.members[c][0])
                    .min()
                    .expect("a nonempty forward-invariant set contains a closed class");
                // the replacement may now meet further representatives
                if !reps.iter().any(|(q, _)| *q == r) {
                    pending.push(r);
                }
            }
        }
    }
    reps.into_iter().map(|(r, _)| r).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionStatus {
    Decomposed,
    UndecidedAtMaxResolution,
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub status: DecompositionStatus,
    /// Outer orbits of the representatives, as atom sets of `cover`.
    pub components: Vec<AtomSet>,
    pub xi_irr: Vec<usize>,
    pub refinements_used: usize,
    pub cover: Cover,
    pub inner: Option<IterationGraph>,
    pub outer: Option<IterationGraph>,
    pub diagnostics: Vec<String>,
}

impl DecompositionResult {
    /// Component regions as unions of arcs.
    pub fn regions(&self) -> Vec<Vec<Arc>> {
        self.components.iter().map(|c| self.cover.region(c)).collect()
    }

    /// Index of the first component whose region contains `x`.
    pub fn component_containing(&self, x: f64) -> Option<usize> {
        self.regions()
            .iter()
            .position(|r| r.iter().any(|a| a.contains_point(x)))
    }
}

/// Settings for [`decompose`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub initial_mesh: f64,
    pub max_refinements: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            initial_mesh: 0.125,
            max_refinements: 10,
        }
    }
}

/// Splits the noisy system into ergodic components.
///
/// The margin is the noise radius and stays fixed; each round halves the
/// mesh. A cover on which some inner image is empty counts as undecided at
/// that level.
pub fn decompose(system: &MapSpec, noise: &NoiseModel, opts: &DecomposeOptions) -> Result<DecompositionResult, Error> {
    if noise.kind != NoiseKind::UniformBall {
        return Err(Error::UnsupportedKernel);
    }
    if system.dim() != 1 {
        return Err(Error::InvalidArgument("decomposition is implemented on the circle only".into()));
    }
    let delta = noise.epsilon;
    let mut diagnostics = Vec::new();
    for level in 0..=opts.max_refinements {
        let mesh = opts.initial_mesh / f64::powi(2.0, level as i32);
        let cover = build_cover(mesh, delta)?;
        let last = level == opts.max_refinements;
        let undecided = |cover: Cover, diagnostics: Vec<String>, inner, outer| DecompositionResult {
            status: DecompositionStatus::UndecidedAtMaxResolution,
            components: Vec::new(),
            xi_irr: Vec::new(),
            refinements_used: level,
            cover,
            inner,
            outer,
            diagnostics,
        };
        let inner = IterationGraph::inner(system, &cover)?;
        if let Some(atom) = inner.first_empty() {
            let e = Error::MeshTooCoarse { atom, mesh: cover.mesh() };
            diagnostics.push(format!("level {level}: {e}"));
            if last {
                diagnostics.push("no decision at the finest mesh; try a slightly different epsilon".into());
                return Ok(undecided(cover, diagnostics, Some(inner), None));
            }
            continue;
        }
        let outer = IterationGraph::outer(system, &cover)?;
        let periodic = inner_periodic_atoms(&inner);
        let reps = inner_reduction(&inner, &periodic);
        let components: Vec<AtomSet> = reps.iter().map(|&r| outer.orbit(r)).collect();
        let disjoint = components
            .iter()
            .enumerate()
            .all(|(i, a)| components[i + 1..].iter().all(|b| a.is_disjoint(b)));
        if disjoint {
            return Ok(DecompositionResult {
                status: DecompositionStatus::Decomposed,
                components,
                xi_irr: reps.into_iter().collect(),
                refinements_used: level,
                cover,
                inner: Some(inner),
                outer: Some(outer),
                diagnostics,
            });
        }
        diagnostics.push(format!(
            "level {level}: {} representatives with overlapping outer orbits",
            reps.len()
        ));
        if last {
            diagnostics.push("no decision at the finest mesh; try a slightly different epsilon".into());
            return Ok(undecided(cover, diagnostics, Some(inner), Some(outer)));
        }
    }
    unreachable!("the loop returns at the last level")
}

/// Distance from `x` to the nearest point of `region`.
pub fn distance_to_region(region: &[Arc], x: f64) -> f64 {
    region
        .iter()
        .map(|a| {
            if a.contains_point(x) {
                0.0
            } else {
                torus::distance(x, a.lo).min(torus::distance(x, a.hi))
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapdsl::{load_map, parse_map};
    use crate::noise::uniform_kernel;

    fn set(v: &[usize]) -> AtomSet {
        v.iter().copied().collect()
    }

    #[test]
    fn cover_counts_and_refinement() {
        let c = build_cover(0.2, 0.05).unwrap();
        assert_eq!(c.len(), 10);
        assert!((c.mesh() - 0.2).abs() < 1e-12);
        let c4 = build_cover(0.05, 0.05).unwrap();
        assert!((c4.mesh() - 0.05).abs() < 1e-12);
        // every point is covered by an open atom
        for k in 0..1000 {
            let x = k as f64 / 1000.0;
            assert!(c.atoms_containing(x).iter().any(|&a| {
                let arc = c.atom(a);
                torus::distance(x, arc.midpoint()) < 0.5 * arc.length()
            }));
        }
    }

    #[test]
    fn doubling_with_coarse_mesh_has_empty_inner_images() {
        let f = load_map("doubling", 1).unwrap();
        let c = build_cover(0.5, 0.001).unwrap();
        let g = IterationGraph::inner(&f, &c).unwrap();
        assert!(g.first_empty().is_some());
    }

    #[test]
    fn empty_set_maps_to_empty_set() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let c = build_cover(0.05, 0.02).unwrap();
        for g in [IterationGraph::inner(&f, &c).unwrap(), IterationGraph::outer(&f, &c).unwrap()] {
            assert!(g.apply(&AtomSet::new()).is_empty());
        }
    }

    #[test]
    fn identity_inner_image_is_geometric() {
        let f = load_map("identity", 1).unwrap();
        let c = build_cover(0.05, 0.2).unwrap();
        let g = IterationGraph::inner(&f, &c).unwrap();
        for k in [0, 7, 39] {
            let a = c.atom(k);
            let expect: AtomSet = (0..c.len())
                .filter(|&j| {
                    let b = c.atom(j);
                    // b must lie in the open arc (a.hi - δ, a.lo + δ)
                    torus::distance(b.lo, a.hi) < 0.2 - 1e-9 && torus::distance(b.hi, a.lo) < 0.2 - 1e-9
                })
                .collect();
            let got: AtomSet = g.successors(k).collect();
            assert!(got.is_subset(&expect), "atom {k}");
            // the enclosure is tight for the identity, so nothing is lost
            // beyond rounding
            assert_eq!(got.len(), expect.len(), "atom {k}");
        }
    }

    #[test]
    fn rotation_outer_image() {
        let f = load_map("rotation:0.3", 1).unwrap();
        // atom 0 is [0, 0.05] widened slightly so the atoms overlap
        let c = Cover::regular(20, 0.026, 0.02).unwrap();
        let g = IterationGraph::outer(&f, &c).unwrap();
        let a0 = c.atom(0);
        let window = Arc::new(a0.lo + 0.3 - 0.02, a0.hi + 0.3 + 0.02);
        let expect: AtomSet = (0..20).filter(|&j| c.atom(j).intersects(&window)).collect();
        let got: AtomSet = g.successors(0).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn inner_is_within_outer_and_monotone() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let c = build_cover(1.0 / 64.0, 0.05).unwrap();
        let gi = IterationGraph::inner(&f, &c).unwrap();
        let go = IterationGraph::outer(&f, &c).unwrap();
        for k in 0..c.len() {
            let i = gi.apply(&set(&[k]));
            let o = go.apply(&set(&[k]));
            assert!(i.is_subset(&o));
        }
        let a = set(&[1, 5, 9]);
        let b = set(&[1, 5, 9, 30, 70]);
        assert!(gi.apply(&a).is_subset(&gi.apply(&b)));
        assert!(go.apply(&a).is_subset(&go.apply(&b)));
    }

    #[test]
    fn contracting_map_concentrates() {
        // attracting fixed point at 1/2 with derivative 1 - 0.28π ≈ 0.12
        let f = parse_map("x1 + 0.14*sin(2*pi*x1) mod 1", 1).unwrap();
        let c = build_cover(1.0 / 128.0, 0.02).unwrap();
        let g = IterationGraph::inner(&f, &c).unwrap();
        let mut s = set(&[c.atoms_containing(0.3)[0]]);
        for _ in 0..40 {
            s = g.apply(&s);
        }
        assert!(!s.is_empty());
        for k in s {
            assert!(torus::distance(c.center(k), 0.5) < 0.03, "{}", c.center(k));
        }
    }

    #[test]
    fn periodic_atoms_on_cycles() {
        let g = IterationGraph::from_edges(GraphKind::Inner, vec![vec![0], vec![2], vec![1]]);
        assert_eq!(inner_periodic_atoms(&g), set(&[0, 1, 2]));
        let g = IterationGraph::from_edges(GraphKind::Inner, vec![vec![1], vec![2], vec![0], vec![0]]);
        assert_eq!(inner_periodic_atoms(&g), set(&[0, 1, 2]));
        let g = IterationGraph::from_edges(GraphKind::Inner, vec![vec![0], vec![0]]);
        assert_eq!(inner_periodic_atoms(&g), set(&[0]));
    }

    #[test]
    fn reduction_examples() {
        // two disjoint self-loops
        let g = IterationGraph::from_edges(GraphKind::Inner, vec![vec![0], vec![1]]);
        assert_eq!(inner_reduction(&g, &inner_periodic_atoms(&g)), set(&[0, 1]));
        // two atoms in one cycle share their orbit
        let g = IterationGraph::from_edges(GraphKind::Inner, vec![vec![1], vec![0]]);
        assert_eq!(inner_reduction(&g, &inner_periodic_atoms(&g)).len(), 1);
        // 0 <-> 1 and 2 <-> 3 both feed the self-loop 4:
        // O(0) = {0, 1, 4}, O(2) = {2, 3, 4}, intersection {4}
        let g = IterationGraph::from_edges(
            GraphKind::Inner,
            vec![vec![1, 4], vec![0], vec![3, 4], vec![2], vec![4]],
        );
        let p = inner_periodic_atoms(&g);
        assert_eq!(p, set(&[0, 1, 2, 3, 4]));
        assert_eq!(inner_reduction(&g, &p), set(&[4]));
    }

    #[test]
    fn rotation_has_one_component() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let noise = uniform_kernel(0.05, 1).unwrap();
        let r = decompose(&f, &noise, &DecomposeOptions::default()).unwrap();
        assert_eq!(r.status, DecompositionStatus::Decomposed);
        assert_eq!(r.components.len(), 1);
        assert_eq!(r.components[0].len(), r.cover.len());
    }

    #[test]
    fn sine_map_splits_in_two() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let noise = uniform_kernel(0.01, 1).unwrap();
        let r = decompose(&f, &noise, &DecomposeOptions::default()).unwrap();
        assert_eq!(r.status, DecompositionStatus::Decomposed, "{:?}", r.diagnostics);
        assert_eq!(r.components.len(), 2);
        let a = r.component_containing(0.25).unwrap();
        let b = r.component_containing(0.75).unwrap();
        assert_ne!(a, b);
        for &rep in &r.xi_irr {
            let x = r.cover.center(rep);
            assert!(torus::distance(x, 0.25) < 0.05 || torus::distance(x, 0.75) < 0.05, "{x}");
        }
        let periodic = inner_periodic_atoms(r.inner.as_ref().unwrap());
        for &rep in &r.xi_irr {
            assert!(periodic.contains(&rep));
        }
        // components are closed under the outer map and unreachable from
        // each other
        let outer = r.outer.as_ref().unwrap();
        for c in &r.components {
            assert!(outer.apply(c).is_subset(c));
        }
    }

    #[test]
    fn wide_noise_merges_basins() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let noise = uniform_kernel(0.45, 1).unwrap();
        let r = decompose(&f, &noise, &DecomposeOptions::default()).unwrap();
        assert_eq!(r.status, DecompositionStatus::Decomposed);
        assert_eq!(r.components.len(), 1);
    }

    #[test]
    fn zero_budget_is_undecided() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let noise = uniform_kernel(0.01, 1).unwrap();
        let opts = DecomposeOptions {
            max_refinements: 0,
            ..Default::default()
        };
        let r = decompose(&f, &noise, &opts).unwrap();
        assert_eq!(r.status, DecompositionStatus::UndecidedAtMaxResolution);
        assert!(!r.diagnostics.is_empty());
    }

    #[test]
    fn region_merges_across_zero() {
        let c = Cover::regular(10, 0.06, 0.01).unwrap();
        let r = c.region(&set(&[9, 0, 1]));
        assert_eq!(r.len(), 1);
        assert!(r[0].contains_point(0.0) && r[0].contains_point(0.12) && r[0].contains_point(0.9));
        assert!(!r[0].contains_point(0.5));
    }
}

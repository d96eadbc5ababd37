//! Finite graphs on addressed vertices, the truncation target, plus the
//! small finite-graph algorithms the verifiers rely on (components, paths,
//! vertex-disjoint path counting).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::addr::VertexAddr;

/// A simple finite graph whose vertices are full term addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FiniteGraph {
    verts: Vec<VertexAddr>,
    index: BTreeMap<VertexAddr, usize>,
    adj: Vec<BTreeSet<usize>>,
}

impl FiniteGraph {
    pub fn add_vertex(&mut self, a: VertexAddr) -> usize {
        if let Some(&i) = self.index.get(&a) {
            return i;
        }
        let i = self.verts.len();
        self.verts.push(a.clone());
        self.index.insert(a, i);
        self.adj.push(BTreeSet::new());
        i
    }

    pub fn add_edge(&mut self, a: &VertexAddr, b: &VertexAddr) {
        assert!(a != b, "loop edge {a}");
        let ia = self.add_vertex(a.clone());
        let ib = self.add_vertex(b.clone());
        self.adj[ia].insert(ib);
        self.adj[ib].insert(ia);
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn contains(&self, a: &VertexAddr) -> bool {
        self.index.contains_key(a)
    }

    pub fn idx(&self, a: &VertexAddr) -> Option<usize> {
        self.index.get(a).copied()
    }

    pub fn addr(&self, i: usize) -> &VertexAddr {
        &self.verts[i]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexAddr> {
        self.verts.iter()
    }

    pub fn edges(&self) -> Vec<(VertexAddr, VertexAddr)> {
        let mut out = Vec::new();
        for (i, ns) in self.adj.iter().enumerate() {
            for &j in ns {
                if i < j {
                    out.push((self.verts[i].clone(), self.verts[j].clone()));
                }
            }
        }
        out
    }

    pub fn degree(&self, a: &VertexAddr) -> usize {
        self.idx(a).map_or(0, |i| self.adj[i].len())
    }

    pub fn neighbors_of(&self, a: &VertexAddr) -> Vec<VertexAddr> {
        match self.idx(a) {
            Some(i) => self.adj[i].iter().map(|&j| self.verts[j].clone()).collect(),
            None => Vec::new(),
        }
    }

    pub fn has_edge(&self, a: &VertexAddr, b: &VertexAddr) -> bool {
        match (self.idx(a), self.idx(b)) {
            (Some(i), Some(j)) => self.adj[i].contains(&j),
            _ => false,
        }
    }

    /// Induced subgraph after deleting a vertex set.
    pub fn delete(&self, del: &BTreeSet<VertexAddr>) -> FiniteGraph {
        let mut g = FiniteGraph::default();
        for v in &self.verts {
            if !del.contains(v) {
                g.add_vertex(v.clone());
            }
        }
        for (a, b) in self.edges() {
            if !del.contains(&a) && !del.contains(&b) {
                g.add_edge(&a, &b);
            }
        }
        g
    }

    /// Connected components as sorted vertex sets, canonically ordered by
    /// their least vertex.
    pub fn components(&self) -> Vec<BTreeSet<VertexAddr>> {
        let mut seen = vec![false; self.verts.len()];
        let mut comps = Vec::new();
        for start in 0..self.verts.len() {
            if seen[start] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.insert(self.verts[v].clone());
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comps.push(comp);
        }
        comps.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Neighbourhood of a vertex set (vertices outside `s` adjacent to it).
    pub fn neighborhood(&self, s: &BTreeSet<VertexAddr>) -> BTreeSet<VertexAddr> {
        let mut out = BTreeSet::new();
        for v in s {
            if let Some(i) = self.idx(v) {
                for &j in &self.adj[i] {
                    if !s.contains(&self.verts[j]) {
                        out.insert(self.verts[j].clone());
                    }
                }
            }
        }
        out
    }

    /// Canonical shortest path between two vertices avoiding `forbidden`
    /// (BFS with lexicographic tie-break); endpoints included.
    pub fn shortest_path(
        &self,
        from: &VertexAddr,
        to: &VertexAddr,
        forbidden: &BTreeSet<VertexAddr>,
    ) -> Option<Vec<VertexAddr>> {
        let (s, t) = (self.idx(from)?, self.idx(to)?);
        if forbidden.contains(from) || forbidden.contains(to) {
            return None;
        }
        let mut prev: Vec<Option<usize>> = vec![None; self.verts.len()];
        let mut seen = vec![false; self.verts.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            // BTreeSet iteration gives index order; indices follow insertion
            // order, so re-sort by address for a canonical choice.
            let mut ns: Vec<usize> = self.adj[v].iter().copied().collect();
            ns.sort_by(|&a, &b| self.verts[a].cmp(&self.verts[b]));
            for w in ns {
                if !seen[w] && !forbidden.contains(&self.verts[w]) {
                    seen[w] = true;
                    prev[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        if !seen[t] {
            return None;
        }
        let mut path = vec![t];
        while let Some(p) = prev[*path.last().unwrap()] {
            path.push(p);
        }
        path.reverse();
        Some(path.into_iter().map(|i| self.verts[i].clone()).collect())
    }

    /// Shortest path from `start` to the first vertex of `targets` it can
    /// reach, with all interior vertices outside both `targets` and
    /// `forbidden`. Returns `[start, .., hit]`.
    pub fn path_to_set(
        &self,
        start: &VertexAddr,
        targets: &BTreeSet<VertexAddr>,
        forbidden: &BTreeSet<VertexAddr>,
    ) -> Option<Vec<VertexAddr>> {
        let s = self.idx(start)?;
        if forbidden.contains(start) {
            return None;
        }
        let mut prev: Vec<Option<usize>> = vec![None; self.verts.len()];
        let mut seen = vec![false; self.verts.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let mut ns: Vec<usize> = self.adj[v].iter().copied().collect();
            ns.sort_by(|&a, &b| self.verts[a].cmp(&self.verts[b]));
            for w in ns {
                if seen[w] {
                    continue;
                }
                if targets.contains(&self.verts[w]) {
                    let mut path = vec![w, v];
                    while let Some(p) = prev[*path.last().unwrap()] {
                        path.push(p);
                    }
                    path.reverse();
                    return Some(path.into_iter().map(|i| self.verts[i].clone()).collect());
                }
                if !forbidden.contains(&self.verts[w]) {
                    seen[w] = true;
                    prev[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Maximum number of paths from `src` to distinct vertices of `targets`
    /// that are vertex-disjoint except at `src` (a fan). Standard unit
    /// vertex-capacity max-flow via augmenting paths.
    pub fn max_fan(&self, src: &VertexAddr, targets: &BTreeSet<VertexAddr>) -> usize {
        let Some(s) = self.idx(src) else { return 0 };
        let n = self.verts.len();
        let tset: BTreeSet<usize> = targets.iter().filter_map(|t| self.idx(t)).collect();
        if tset.is_empty() {
            return 0;
        }
        // Vertex split: node v -> v_in (v), v_out (v + n). Edges respect unit
        // capacity on every vertex except src and the targets' sink side.
        let mut cap: BTreeMap<(usize, usize), i32> = BTreeMap::new();
        let sink = 2 * n;
        for v in 0..n {
            let c = if v == s { i32::MAX / 4 } else { 1 };
            cap.insert((v, v + n), c);
            cap.insert((v + n, v), 0);
        }
        for (i, ns) in self.adj.iter().enumerate() {
            for &j in ns {
                cap.insert((i + n, j), 1);
                cap.entry((j, i + n)).or_insert(0);
            }
        }
        for &t in &tset {
            cap.insert((t + n, sink), 1);
            cap.insert((sink, t + n), 0);
        }
        let mut flow = 0usize;
        loop {
            // BFS augmenting path from s (in-node) to sink.
            let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
            let mut queue = VecDeque::from([s]);
            let mut reached = false;
            let mut seen: BTreeSet<usize> = BTreeSet::from([s]);
            while let Some(v) = queue.pop_front() {
                if v == sink {
                    reached = true;
                    break;
                }
                let nexts: Vec<usize> = cap
                    .range((v, 0)..=(v, usize::MAX))
                    .filter(|(_, &c)| c > 0)
                    .map(|(&(_, w), _)| w)
                    .collect();
                for w in nexts {
                    if seen.insert(w) {
                        prev.insert(w, v);
                        queue.push_back(w);
                    }
                }
            }
            if !reached {
                break;
            }
            let mut v = sink;
            while v != s {
                let p = prev[&v];
                *cap.get_mut(&(p, v)).unwrap() -= 1;
                *cap.get_mut(&(v, p)).unwrap() += 1;
                v = p;
            }
            flow += 1;
        }
        flow
    }

    /// Minimum vertex separator size between two disjoint sets (Menger via
    /// max-flow): vertices of `a` and `b` themselves are not deletable.
    pub fn min_separator(&self, a: &BTreeSet<VertexAddr>, b: &BTreeSet<VertexAddr>) -> usize {
        // Contract: count vertex-disjoint a-b paths.
        let n = self.verts.len();
        let aset: BTreeSet<usize> = a.iter().filter_map(|t| self.idx(t)).collect();
        let bset: BTreeSet<usize> = b.iter().filter_map(|t| self.idx(t)).collect();
        let (src, sink) = (2 * n, 2 * n + 1);
        let mut cap: BTreeMap<(usize, usize), i32> = BTreeMap::new();
        for v in 0..n {
            let c = if aset.contains(&v) || bset.contains(&v) {
                i32::MAX / 4
            } else {
                1
            };
            cap.insert((v, v + n), c);
            cap.insert((v + n, v), 0);
        }
        for (i, ns) in self.adj.iter().enumerate() {
            for &j in ns {
                cap.insert((i + n, j), i32::MAX / 4);
                cap.entry((j, i + n)).or_insert(0);
            }
        }
        for &v in &aset {
            cap.insert((src, v), i32::MAX / 4);
            cap.insert((v, src), 0);
        }
        for &v in &bset {
            cap.insert((v + n, sink), i32::MAX / 4);
            cap.insert((sink, v + n), 0);
        }
        let mut flow = 0usize;
        loop {
            let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
            let mut queue = VecDeque::from([src]);
            let mut seen: BTreeSet<usize> = BTreeSet::from([src]);
            let mut reached = false;
            while let Some(v) = queue.pop_front() {
                if v == sink {
                    reached = true;
                    break;
                }
                let nexts: Vec<usize> = cap
                    .range((v, 0)..=(v, usize::MAX))
                    .filter(|(_, &c)| c > 0)
                    .map(|(&(_, w), _)| w)
                    .collect();
                for w in nexts {
                    if seen.insert(w) {
                        prev.insert(w, v);
                        queue.push_back(w);
                    }
                }
            }
            if !reached {
                break;
            }
            let mut v = sink;
            while v != src {
                let p = prev[&v];
                *cap.get_mut(&(p, v)).unwrap() -= 1;
                *cap.get_mut(&(v, p)).unwrap() += 1;
                v = p;
            }
            flow += 1;
            if flow > n {
                break;
            }
        }
        flow
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_graphs::examples::*;

    #[test]
    fn components_of_cut_ray() {
        let g = ray().truncate(6);
        let cut: BTreeSet<VertexAddr> = ["S(2)/V(v)".parse().unwrap()].into();
        let comps = g.delete(&cut).components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 2);
        assert_eq!(comps[1].len(), 3);
    }

    #[test]
    fn max_fan_counts_disjoint_paths() {
        let g = domray().truncate(6);
        let r: VertexAddr = "B/V(r)".parse().unwrap();
        let targets: BTreeSet<VertexAddr> = (0..6)
            .map(|i| format!("S({i})/V(v)").parse().unwrap())
            .collect();
        assert_eq!(g.max_fan(&r, &targets), 6);

        let g = ray().truncate(6);
        let v0: VertexAddr = "S(0)/V(v)".parse().unwrap();
        let targets: BTreeSet<VertexAddr> = (1..6)
            .map(|i| format!("S({i})/V(v)").parse().unwrap())
            .collect();
        assert_eq!(g.max_fan(&v0, &targets), 1);
    }

    #[test]
    fn shortest_path_is_canonical() {
        let g = star().truncate(3);
        let p = g
            .shortest_path(
                &"C(0)/V(l)".parse().unwrap(),
                &"C(2)/V(l)".parse().unwrap(),
                &BTreeSet::new(),
            )
            .unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[1], "B/V(c)".parse::<VertexAddr>().unwrap());
    }
}

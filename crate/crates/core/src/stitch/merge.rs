use super::StitchConfig;
use crate::model::{
    dedup_consecutive, patch_to_world, End, LineRecord, PatchFrame, VectorMap,
};

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
        true
    }
}

fn end_slot(end: End) -> usize {
    match end {
        End::Start => 0,
        End::End => 1,
    }
}

fn other(end: End) -> End {
    match end {
        End::Start => End::End,
        End::End => End::Start,
    }
}

/// Splices patch lines onto the global map at matching cut endpoints.
///
/// Candidate pairs (patch cut endpoint, global cut endpoint) of the same
/// category within `join_tolerance_px` are accepted greedily in ascending
/// distance. A pair that would close a loop is skipped, so every group of
/// joined lines is a simple chain and becomes one record. A chain keeps the
/// id, slot and direction of its lowest-index global line; its score is the
/// lowest score of its parts. Unjoined patch lines are appended.
pub fn merge_patch(global: &VectorMap, patch_map: &VectorMap, frame: &PatchFrame, cfg: &StitchConfig) -> VectorMap {
    let g = global.lines.len();
    let tag = format!("{}_{}", frame.origin().x.round(), frame.origin().y.round());
    let mut nodes: Vec<LineRecord> = global.lines.clone();
    nodes.extend(patch_map.lines.iter().enumerate().map(|(k, l)| {
        LineRecord {
            id: format!("{tag}/{k}"),
            ..l.map_points(|p| patch_to_world(p, frame))
        }
    }));
    let n = nodes.len();

    let mut candidates = Vec::new();
    for pi in g..n {
        let p = &nodes[pi];
        for pe in [End::Start, End::End] {
            if !p.kind(pe).is_cut() {
                continue;
            }
            let pp = p.endpoint(pe);
            for (gi, q) in nodes[..g].iter().enumerate() {
                if q.category != p.category {
                    continue;
                }
                for ge in [End::Start, End::End] {
                    if !q.kind(ge).is_cut() {
                        continue;
                    }
                    let d = pp.distance(&q.endpoint(ge));
                    if d <= cfg.join_tolerance_px {
                        candidates.push((d, pi, end_slot(pe), gi, end_slot(ge)));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2, a.3, a.4).cmp(&(b.1, b.2, b.3, b.4))));

    // link[node][end] = (neighbor, neighbor end)
    let mut link: Vec<[Option<(usize, End)>; 2]> = vec![[None, None]; n];
    let mut dsu = Dsu((0..n).collect());
    let ends = [End::Start, End::End];
    for (_, pi, pe, gi, ge) in candidates {
        if link[pi][pe].is_some() || link[gi][ge].is_some() || !dsu.union(pi, gi) {
            continue;
        }
        link[pi][pe] = Some((gi, ends[ge]));
        link[gi][ge] = Some((pi, ends[pe]));
    }

    let mut done = vec![false; n];
    let mut lines = Vec::with_capacity(n);
    for seed in 0..n {
        if done[seed] {
            continue;
        }
        // walk to one end of the chain, then collect it in order
        let (mut node, mut entry) = (seed, End::Start);
        let mut steps = 0;
        while let Some((next, e)) = link[node][end_slot(entry)] {
            node = next;
            entry = other(e);
            steps += 1;
            debug_assert!(steps <= n, "chains are acyclic");
        }
        let mut chain = Vec::new();
        loop {
            done[node] = true;
            chain.push((node, entry == End::Start));
            match link[node][end_slot(other(entry))] {
                Some((next, e)) => {
                    node = next;
                    entry = e;
                }
                None => break,
            }
        }
        let &(anchor, forward) = chain.iter().min_by_key(|(i, _)| *i).expect("non-empty chain");
        if !forward {
            chain.reverse();
            for c in &mut chain {
                c.1 = !c.1;
            }
        }
        lines.push((anchor, splice(&nodes, &chain, anchor)));
    }
    lines.sort_by_key(|(anchor, _)| *anchor);

    VectorMap {
        lines: lines.into_iter().map(|(_, l)| l).collect(),
        ..global.clone()
    }
}

fn splice(nodes: &[LineRecord], chain: &[(usize, bool)], anchor: usize) -> LineRecord {
    let oriented = |&(i, fwd): &(usize, bool)| {
        if fwd {
            nodes[i].clone()
        } else {
            nodes[i].reversed()
        }
    };
    let first = oriented(&chain[0]);
    if chain.len() == 1 {
        return first;
    }
    let mut points = first.points.clone();
    let mut score = first.score;
    let mut end_kind = first.end_kind;
    for part in &chain[1..] {
        let part = oriented(part);
        let last = points.last_mut().expect("lines have points");
        *last = last.midpoint(&part.points[0]);
        points.extend_from_slice(&part.points[1..]);
        score = match (score, part.score) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        end_kind = part.end_kind;
    }
    dedup_consecutive(&mut points);
    if points.len() < 2 {
        // every part collapsed into the junction; keep a valid zero-length record
        points.push(points[0]);
    }
    let base = &nodes[anchor];
    LineRecord {
        id: base.id.clone(),
        points,
        category: base.category,
        line_type: base.line_type,
        start_kind: first.start_kind,
        end_kind,
        score,
    }
}

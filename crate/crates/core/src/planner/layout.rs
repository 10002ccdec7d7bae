//! Deterministic box placement for foreground prompts.
//!
//! `inside` relations form a containment forest; each group of siblings is
//! laid out inside its container (the canvas for roots). Within a group the
//! remaining relations become order constraints on two axes:
//!
//! * x: left-of / right-of / beside order columns; on / under put subject and
//!   object in the same column.
//! * y: every top and bottom edge sits on a row level. On / under make the
//!   touching edges one level, beside aligns both edges, above / below order
//!   them.
//!
//! Columns and levels are longest-path ranks of those constraint graphs; a
//! cycle means the relations contradict each other. Groups without relations use a
//! golden-ratio grid whose cell widths follow each prompt's concept share.
//! Every relation is re-checked against the final boxes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::BoundingBox;
use crate::analysis::SpatialKind;
use crate::backends::LayoutItem;
use crate::error::PlanError;

/// Box for a lone, unconstrained prompt.
pub const DEFAULT_BOX: [f64; 4] = [0.25, 0.25, 0.5, 0.5];
/// Edge tolerance for `on`, `under` and `beside`.
pub const ADJACENCY_EPSILON: f64 = 0.05;

const CANVAS_MARGIN: f64 = 0.05;
const CHILD_INSET: f64 = 0.15;
const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;
const CONTAIN_TOLERANCE: f64 = 1e-9;

/// A spatial relation between two foreground prompts (by index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutRelation {
    pub subject: usize,
    pub object: usize,
    pub kind: SpatialKind,
}

/// Geometric reading of `subject <kind> object`.
pub fn relation_holds(kind: SpatialKind, s: &BoundingBox, o: &BoundingBox) -> bool {
    let (scx, scy) = s.center();
    let (ocx, ocy) = o.center();
    let x_overlap = s.x < o.right() && o.x < s.right();
    let y_overlap = s.y < o.bottom() && o.y < s.bottom();
    match kind {
        SpatialKind::LeftOf => scx < ocx,
        SpatialKind::RightOf => scx > ocx,
        SpatialKind::Above => scy < ocy,
        SpatialKind::Below => scy > ocy,
        SpatialKind::On => (s.bottom() - o.y).abs() <= ADJACENCY_EPSILON && x_overlap,
        SpatialKind::Under => (s.y - o.bottom()).abs() <= ADJACENCY_EPSILON && x_overlap,
        SpatialKind::Inside => {
            s.x >= o.x - CONTAIN_TOLERANCE
                && s.y >= o.y - CONTAIN_TOLERANCE
                && s.right() <= o.right() + CONTAIN_TOLERANCE
                && s.bottom() <= o.bottom() + CONTAIN_TOLERANCE
        }
        SpatialKind::Beside => {
            (s.right() <= o.x + ADJACENCY_EPSILON || o.right() <= s.x + ADJACENCY_EPSILON) && y_overlap
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn inset(&self, fx: f64, fy: f64) -> Rect {
        let (dx, dy) = ((self.x1 - self.x0) * fx, (self.y1 - self.y0) * fy);
        Rect { x0: self.x0 + dx, y0: self.y0 + dy, x1: self.x1 - dx, y1: self.y1 - dy }
    }
}

fn infeasible(msg: impl Into<String>) -> PlanError {
    PlanError::LayoutInfeasible(msg.into())
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = i;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Longest-path rank of every node, or `None` if the graph has a cycle.
fn ranks(n: usize, edges: &BTreeSet<(usize, usize)>) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut rank = vec![0usize; n];
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut visited = 0;
    while let Some(v) = queue.pop() {
        visited += 1;
        for &w in &out[v] {
            rank[w] = rank[w].max(rank[v] + 1);
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push(w);
            }
        }
    }
    (visited == n).then_some(rank)
}

fn reachable(edges: &BTreeSet<(usize, usize)>, from: usize, to: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if seen.insert(v) {
            stack.extend(edges.iter().filter(|(a, _)| *a == v).map(|(_, b)| *b));
        }
    }
    false
}

/// Places `items` so that every relation holds, or reports why it cannot.
pub fn solve_layout(
    items: &[LayoutItem],
    relations: &[LayoutRelation],
) -> Result<Vec<BoundingBox>, PlanError> {
    let n = items.len();
    for r in relations {
        if r.subject >= n || r.object >= n {
            return Err(infeasible(format!("relation {} refers to a missing prompt", r.kind)));
        }
        if r.subject == r.object {
            return Err(infeasible(format!("prompt {} is {} itself", r.subject, r.kind)));
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut parent = containment_parents(n, relations)?;
    adopt_containers(&mut parent, relations);
    let chain = |i: usize| ancestry(&parent, i);

    // Lift each non-containment relation to the pair of ancestors that are
    // siblings, keyed by their common container.
    let mut group_relations: BTreeMap<Option<usize>, Vec<LayoutRelation>> = BTreeMap::new();
    for r in relations.iter().filter(|r| r.kind != SpatialKind::Inside) {
        let (cs, co) = (chain(r.subject), chain(r.object));
        if cs.contains(&r.object) || co.contains(&r.subject) {
            // relation against the own container; left to the final check
            continue;
        }
        let lifted = cs.iter().find_map(|&a| co.iter().find(|&&b| parent[b] == parent[a]).map(|&b| (a, b)));
        if let Some((a, b)) = lifted {
            group_relations.entry(parent[a]).or_default().push(LayoutRelation {
                subject: a,
                object: b,
                kind: r.kind,
            });
        }
    }

    let mut rects: Vec<Option<Rect>> = vec![None; n];
    let canvas =
        Rect { x0: CANVAS_MARGIN, y0: CANVAS_MARGIN, x1: 1.0 - CANVAS_MARGIN, y1: 1.0 - CANVAS_MARGIN };
    let mut pending: Vec<(Option<usize>, Rect)> = vec![(None, canvas)];
    while let Some((container, region)) = pending.pop() {
        let members: Vec<usize> = (0..n).filter(|&i| parent[i] == container).collect();
        if members.is_empty() {
            continue;
        }
        let rels = group_relations.get(&container).map(Vec::as_slice).unwrap_or(&[]);
        let placed = if container.is_none() && members.len() == 1 && rels.is_empty() {
            let [x, y, w, h] = DEFAULT_BOX;
            vec![Rect { x0: x, y0: y, x1: x + w, y1: y + h }]
        } else if rels.is_empty() {
            golden_grid(&members, items, region)
        } else {
            ranked_layout(&members, rels, region)?
        };
        for (&m, rect) in members.iter().zip(placed) {
            rects[m] = Some(rect);
            pending.push((Some(m), rect.inset(CHILD_INSET, CHILD_INSET)));
        }
    }

    let boxes = rects
        .into_iter()
        .map(|r| {
            let r = r.expect("every prompt belongs to a group");
            BoundingBox::from_edges(r.x0, r.y0, r.x1, r.y1)
                .map_err(|_| infeasible("containment nesting is too deep to fit"))
        })
        .collect::<Result<Vec<_>, _>>()?;

    for r in relations {
        if !relation_holds(r.kind, &boxes[r.subject], &boxes[r.object]) {
            return Err(infeasible(format!(
                "cannot place prompt {} {} prompt {} together with the other relations",
                r.subject, r.kind, r.object
            )));
        }
    }
    Ok(boxes)
}

fn ancestry(parent: &[Option<usize>], mut i: usize) -> Vec<usize> {
    let mut c = vec![i];
    while let Some(p) = parent[i] {
        c.push(p);
        i = p;
    }
    c
}

/// A top-level prompt related to a contained one moves into the same
/// container: a lamp on a desk in an office is in the office too.
fn adopt_containers(parent: &mut [Option<usize>], relations: &[LayoutRelation]) {
    loop {
        let mut changed = false;
        for r in relations.iter().filter(|r| r.kind != SpatialKind::Inside) {
            for (free, anchor) in [(r.subject, r.object), (r.object, r.subject)] {
                if parent[free].is_none()
                    && parent[anchor].is_some()
                    && !ancestry(parent, anchor).contains(&free)
                {
                    parent[free] = parent[anchor];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Direct container of every prompt, from the `inside` relations.
fn containment_parents(n: usize, relations: &[LayoutRelation]) -> Result<Vec<Option<usize>>, PlanError> {
    let mut inside = vec![vec![false; n]; n];
    for r in relations.iter().filter(|r| r.kind == SpatialKind::Inside) {
        inside[r.subject][r.object] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if inside[i][k] {
                for j in 0..n {
                    if inside[k][j] {
                        inside[i][j] = true;
                    }
                }
            }
        }
    }
    let mut parent = vec![None; n];
    for i in 0..n {
        if inside[i][i] {
            return Err(infeasible(format!("prompt {i} is inside itself through a cycle")));
        }
        let containers: Vec<usize> = (0..n).filter(|&o| inside[i][o]).collect();
        if containers.is_empty() {
            continue;
        }
        let direct = containers.iter().copied().find(|&p| containers.iter().all(|&c| c == p || inside[p][c]));
        match direct {
            Some(p) => parent[i] = Some(p),
            None => return Err(infeasible(format!("prompt {i} is inside containers that do not nest"))),
        }
    }
    Ok(parent)
}

fn golden_grid(members: &[usize], items: &[LayoutItem], region: Rect) -> Vec<Rect> {
    let n = members.len();
    let cols = ((n as f64 * GOLDEN_RATIO).sqrt().ceil() as usize).clamp(1, n);
    let rows = n.div_ceil(cols);
    let row_h = (region.y1 - region.y0) / rows as f64;
    let width = region.x1 - region.x0;
    let mut out = Vec::with_capacity(n);
    for (r, row) in members.chunks(cols).enumerate() {
        let weights: Vec<f64> = row.iter().map(|&m| items[m].concept_count.max(1) as f64).collect();
        let total: f64 = weights.iter().sum();
        let y0 = region.y0 + r as f64 * row_h;
        let mut x = region.x0;
        for (k, w) in weights.iter().enumerate() {
            let x1 = if k + 1 == row.len() { region.x1 } else { x + width * w / total };
            out.push(Rect { x0: x, y0, x1, y1: y0 + row_h });
            x = x1;
        }
    }
    out
}

fn ranked_layout(members: &[usize], rels: &[LayoutRelation], region: Rect) -> Result<Vec<Rect>, PlanError> {
    let n = members.len();
    let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(k, &m)| (m, k)).collect();
    let idx = |m: usize| local[&m];

    let mut xcls = UnionFind::new(n);
    for r in rels.iter().filter(|r| matches!(r.kind, SpatialKind::On | SpatialKind::Under)) {
        xcls.union(idx(r.subject), idx(r.object));
    }
    let mut xedges = BTreeSet::new();
    for r in rels {
        let (a, b) = (idx(r.subject), idx(r.object));
        let (from, to) = match r.kind {
            SpatialKind::LeftOf => (a, b),
            SpatialKind::RightOf => (b, a),
            _ => continue,
        };
        let (cf, ct) = (xcls.find(from), xcls.find(to));
        if cf == ct {
            return Err(infeasible(format!(
                "prompt {} {} prompt {} contradicts a stacking constraint",
                r.subject, r.kind, r.object
            )));
        }
        xedges.insert((cf, ct));
    }
    if ranks(n, &xedges).is_none() {
        return Err(infeasible("horizontal relations form a cycle"));
    }
    for r in rels.iter().filter(|r| r.kind == SpatialKind::Beside) {
        let (ca, cb) = (xcls.find(idx(r.subject)), xcls.find(idx(r.object)));
        if ca == cb {
            return Err(infeasible(format!(
                "prompts {} and {} must be side by side and stacked at once",
                r.subject, r.object
            )));
        }
        if !reachable(&xedges, ca, cb) && !reachable(&xedges, cb, ca) {
            xedges.insert((ca, cb));
        }
    }

    let (tops, bottoms) = vertical_levels(n, rels, &idx)?;

    // Separate prompts whose rows overlap within one column by ordering
    // their columns.
    let cols = loop {
        let xr = ranks(n, &xedges).expect("acyclic by construction");
        let col: Vec<usize> = (0..n).map(|k| xr[xcls.find(k)]).collect();
        let clash = (0..n).find_map(|a| {
            (a + 1..n)
                .find(|&b| {
                    col[a] == col[b]
                        && xcls.find(a) != xcls.find(b)
                        && tops[a] < bottoms[b]
                        && tops[b] < bottoms[a]
                })
                .map(|b| (a, b))
        });
        match clash {
            Some((a, b)) => {
                let (ca, cb) = (xcls.find(a), xcls.find(b));
                xedges.insert((ca, cb));
            }
            None => break col,
        }
    };

    let ncols = cols.iter().max().map_or(1, |c| c + 1);
    let nrows = bottoms.iter().copied().max().unwrap_or(1);
    let cw = (region.x1 - region.x0) / ncols as f64;
    let rh = (region.y1 - region.y0) / nrows as f64;

    let spans = column_spans(n, rels, &idx, &tops, &bottoms, &mut xcls);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (lo, hi) = spans[k];
        let x0 = region.x0 + cols[k] as f64 * cw;
        out.push(Rect {
            x0: x0 + lo * cw,
            y0: region.y0 + tops[k] as f64 * rh,
            x1: x0 + hi * cw,
            y1: region.y0 + bottoms[k] as f64 * rh,
        });
    }
    Ok(out)
}

/// Row levels of each prompt's top and bottom edge.
///
/// Every edge is a variable. Contacts (`on`, `under`) make a bottom and a
/// top the same variable, `beside` makes both tops and both bottoms the same,
/// and the rest are difference constraints: a top lies at least one row above
/// its bottom, and `above` keeps both edges of the subject strictly higher.
/// Levels are the longest paths; a cycle that climbs is a contradiction.
fn vertical_levels(
    n: usize,
    rels: &[LayoutRelation],
    idx: &dyn Fn(usize) -> usize,
) -> Result<(Vec<usize>, Vec<usize>), PlanError> {
    let (top, bottom) = (|k: usize| 2 * k, |k: usize| 2 * k + 1);
    let mut edge = UnionFind::new(2 * n);
    for r in rels {
        let (a, b) = (idx(r.subject), idx(r.object));
        match r.kind {
            SpatialKind::On => edge.union(bottom(a), top(b)),
            SpatialKind::Under => edge.union(top(a), bottom(b)),
            SpatialKind::Beside => {
                edge.union(top(a), top(b));
                edge.union(bottom(a), bottom(b));
            }
            _ => {}
        }
    }
    let mut higher: Vec<(usize, usize)> = (0..n).map(|k| (top(k), bottom(k))).collect();
    for r in rels {
        let (a, b) = (idx(r.subject), idx(r.object));
        let (up, down) = match r.kind {
            SpatialKind::Above => (a, b),
            SpatialKind::Below => (b, a),
            _ => continue,
        };
        higher.push((top(up), top(down)));
        higher.push((bottom(up), bottom(down)));
    }
    let edges: BTreeSet<(usize, usize)> =
        higher.into_iter().map(|(u, d)| (edge.find(u), edge.find(d))).collect();
    if edges.iter().any(|(u, d)| u == d) {
        return Err(infeasible("vertical relations contradict each other"));
    }
    let level = ranks(2 * n, &edges).ok_or_else(|| infeasible("vertical relations form a cycle"))?;
    let tops = (0..n).map(|k| level[edge.find(top(k))]).collect();
    let bottoms = (0..n).map(|k| level[edge.find(bottom(k))]).collect();
    Ok((tops, bottoms))
}

/// Horizontal extent of each prompt as a fraction of its column.
///
/// A column whose prompts never share a row band gives every prompt the full
/// width. Otherwise the column is split into one slot per prompt, ordered by
/// a depth-first walk over the on/under links, and each prompt reaches
/// halfway into the slots of the prompts it touches. Linked prompts then
/// overlap while row mates stay apart.
fn column_spans(
    n: usize,
    rels: &[LayoutRelation],
    idx: &dyn Fn(usize) -> usize,
    tops: &[usize],
    bottoms: &[usize],
    xcls: &mut UnionFind,
) -> Vec<(f64, f64)> {
    let mut spans = vec![(0.0, 1.0); n];
    let mut links: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for r in rels.iter().filter(|r| matches!(r.kind, SpatialKind::On | SpatialKind::Under)) {
        let (a, b) = (idx(r.subject), idx(r.object));
        links[a].insert(b);
        links[b].insert(a);
    }
    let mut columns: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..n {
        columns.entry(xcls.find(k)).or_default().push(k);
    }
    for members in columns.values() {
        let shared = members
            .iter()
            .enumerate()
            .any(|(i, &a)| members[i + 1..].iter().any(|&b| tops[a] < bottoms[b] && tops[b] < bottoms[a]));
        if !shared {
            continue;
        }
        let mut order = Vec::with_capacity(members.len());
        let mut seen = BTreeSet::new();
        for &start in members {
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                if seen.insert(v) {
                    order.push(v);
                    stack.extend(links[v].iter().rev().filter(|w| !seen.contains(*w)));
                }
            }
        }
        let slot: BTreeMap<usize, f64> = order.iter().enumerate().map(|(p, &k)| (k, p as f64)).collect();
        let total = members.len() as f64;
        for &k in members {
            let own = slot[&k];
            let reach = links[k].iter().map(|w| slot[w] + 0.5);
            let lo = reach.clone().fold(own, f64::min);
            let hi = reach.fold(own + 1.0, f64::max);
            spans[k] = (lo / total, hi / total);
        }
    }
    spans
}

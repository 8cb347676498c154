//! Search tree with per-node belief deltas.
//!
//! Every node stores only the posteriors of the cells its incoming edge
//! observed. The belief a node "sees" for a cell is the value held by the
//! nearest ancestor (itself included) that touched the cell, falling back to
//! the shared base map. Scoring a new child therefore costs one lookup and
//! one Bayes update per footprint cell instead of a replay of the whole
//! root-to-node trajectory.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Footprint, Pose};
use crate::grid::{BeliefMap, CellIndex};
use crate::path::EdgeGeometry;
use crate::rewards::{node_information, Delta, RewardContext};
use crate::spatial::SpatialHash;

pub type NodeId = usize;

/// Slack for floating-point cost comparisons against the budget.
const COST_EPS: f64 = 1e-6;

/// Inclusive row/column box around a set of cells; empty when `r0 > r1`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct CellBox {
    r0: u32,
    r1: u32,
    c0: u32,
    c1: u32,
}

impl CellBox {
    const EMPTY: CellBox = CellBox {
        r0: u32::MAX,
        r1: 0,
        c0: u32::MAX,
        c1: 0,
    };

    fn of(cells: impl Iterator<Item = CellIndex>, n_cols: u32) -> Self {
        let mut b = Self::EMPTY;
        for idx in cells {
            let (r, c) = (idx / n_cols, idx % n_cols);
            b.r0 = b.r0.min(r);
            b.r1 = b.r1.max(r);
            b.c0 = b.c0.min(c);
            b.c1 = b.c1.max(c);
        }
        b
    }

    #[inline]
    fn contains(&self, r: u32, c: u32) -> bool {
        r >= self.r0 && r <= self.r1 && c >= self.c0 && c <= self.c1
    }

    fn intersects(&self, o: &CellBox) -> bool {
        self.r0 <= o.r1 && o.r0 <= self.r1 && self.c0 <= o.c1 && o.c0 <= self.c1
    }
}

#[derive(Clone, Debug)]
pub struct PlanNode {
    pub pose: Pose,
    /// Cumulative weighted information gain from the root.
    pub info: f64,
    /// Cumulative path cost from the root.
    pub cost: f64,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub delta: Delta,
    pub closed: bool,
    /// Incoming edge; `None` for a root created in place.
    pub edge: Option<EdgeGeometry>,
    /// Cells observed on the incoming edge (or at the pose, for a fresh
    /// root) with their closest viewing ranges.
    pub footprint: Footprint,
    bbox: CellBox,
}

/// Tree construction knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// A node is closed once less than this much budget remains.
    pub budget_epsilon: f64,
    /// Spatial hash bucket size, normally the near radius.
    pub bucket: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            budget_epsilon: 25.0,
            bucket: 300.0,
        }
    }
}

/// Root-to-node chain extracted from the tree.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub nodes: Vec<NodeId>,
    pub poses: Vec<Pose>,
    /// `edges[i]` leads into `poses[i + 1]`.
    pub edges: Vec<EdgeGeometry>,
    pub costs: Vec<f64>,
    pub infos: Vec<f64>,
}

impl Trajectory {
    pub fn info(&self) -> f64 {
        self.infos.last().copied().unwrap_or(0.0)
    }

    pub fn cost(&self) -> f64 {
        self.costs.last().copied().unwrap_or(0.0)
    }
}

/// Outcome of one [`PlanTree::update_subtree`] pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    /// Nodes re-scored, in visit order.
    pub visited: Vec<NodeId>,
    /// Nodes dropped for exceeding the budget (with their descendants).
    pub removed: usize,
}

/// Beliefs as seen from one node, restricted to the ancestors whose deltas
/// can overlap a given set of cells.
pub struct ChainView<'a> {
    chain: Vec<&'a PlanNode>,
    base: &'a BeliefMap,
    n_cols: u32,
}

impl ChainView<'_> {
    #[inline]
    pub fn get(&self, idx: CellIndex) -> f64 {
        let (r, c) = (idx / self.n_cols, idx % self.n_cols);
        for node in &self.chain {
            if node.bbox.contains(r, c) {
                if let Some(&p) = node.delta.get(&idx) {
                    return p;
                }
            }
        }
        self.base.prob(idx)
    }
}

#[derive(Clone, Debug)]
pub struct PlanTree {
    nodes: Vec<Option<PlanNode>>,
    root: NodeId,
    live: usize,
    index: SpatialHash,
    params: TreeParams,
    n_cols: u32,
}

impl PlanTree {
    /// Single-node tree. `info` is the root's own observation reward.
    pub fn new(
        root_pose: Pose,
        footprint: Footprint,
        delta: Delta,
        info: f64,
        map: &BeliefMap,
        params: TreeParams,
    ) -> Self {
        let n_cols = map.n_cols() as u32;
        let bbox = CellBox::of(delta.keys().copied(), n_cols);
        let root = PlanNode {
            pose: root_pose,
            info,
            cost: 0.0,
            parent: None,
            children: Vec::new(),
            delta,
            closed: false,
            edge: None,
            footprint,
            bbox,
        };
        let mut index = SpatialHash::new(params.bucket);
        index.insert(0, pos(&root_pose));
        Self {
            nodes: vec![Some(root)],
            root: 0,
            live: 1,
            index,
            params,
            n_cols,
        }
    }

    /// Root at `pose` scored against `ctx.base`.
    pub fn with_root(pose: Pose, footprint: Footprint, ctx: &RewardContext<'_>, params: TreeParams) -> Self {
        let (delta, info) = node_information(|i| ctx.base.prob(i), &footprint.cells, ctx, 0.0);
        Self::new(pose, footprint, delta, info, ctx.base, params)
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn node(&self, id: NodeId) -> Option<&PlanNode> {
        self.nodes.get(id).and_then(Option::as_ref)
    }

    fn get(&self, id: NodeId) -> Result<&PlanNode> {
        self.node(id).ok_or(Error::UnknownNode(id))
    }

    /// Live node ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|_| i))
    }

    pub fn is_closed(&self, id: NodeId) -> bool {
        self.node(id).map_or(true, |n| n.closed)
    }

    /// Sum of delta sizes over the tree.
    pub fn delta_entries(&self) -> usize {
        self.nodes.iter().flatten().map(|n| n.delta.len()).sum()
    }

    /// Ids from the root down to `id`.
    pub fn chain(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let mut out = vec![id];
        let mut cur = self.get(id)?;
        while let Some(p) = cur.parent {
            out.push(p);
            cur = self.get(p)?;
        }
        out.reverse();
        Ok(out)
    }

    /// Belief of `cell` after every observation from the root to `id`.
    pub fn belief_at(&self, id: NodeId, cell: CellIndex, base: &BeliefMap) -> Result<f64> {
        let mut cur = Some(id);
        while let Some(n) = cur {
            let node = self.get(n)?;
            if let Some(&p) = node.delta.get(&cell) {
                return Ok(p);
            }
            cur = node.parent;
        }
        Ok(base.prob(cell))
    }

    /// Lookup helper for scoring cells in `footprint` below node `id`.
    pub fn chain_view<'a>(
        &'a self,
        id: NodeId,
        footprint: &[(CellIndex, f64)],
        base: &'a BeliefMap,
    ) -> Result<ChainView<'a>> {
        let fbox = CellBox::of(footprint.iter().map(|c| c.0), self.n_cols);
        let mut chain = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            let node = self.get(n)?;
            if node.bbox.intersects(&fbox) {
                chain.push(node);
            }
            cur = node.parent;
        }
        Ok(ChainView {
            chain,
            base,
            n_cols: self.n_cols,
        })
    }

    /// Delta and gain of a prospective child of `parent` observing
    /// `footprint`, reached at cumulative cost `cost`.
    pub fn score_child(
        &self,
        parent: NodeId,
        footprint: &[(CellIndex, f64)],
        cost: f64,
        ctx: &RewardContext<'_>,
    ) -> Result<(Delta, f64)> {
        let view = self.chain_view(parent, footprint, ctx.base)?;
        Ok(node_information(|i| view.get(i), footprint, ctx, ctx.time_at(cost)))
    }

    /// Same as [`PlanTree::score_child`] but rebuilds the parent's belief by
    /// replaying every observation from the root. Used when embeddings are
    /// disabled.
    pub fn score_child_replay(
        &self,
        parent: NodeId,
        footprint: &[(CellIndex, f64)],
        cost: f64,
        ctx: &RewardContext<'_>,
    ) -> Result<(Delta, f64)> {
        let scratch = self.replay_beliefs(parent, ctx)?.0;
        Ok(node_information(
            |i| scratch.get(&i).copied().unwrap_or_else(|| ctx.base.prob(i)),
            footprint,
            ctx,
            ctx.time_at(cost),
        ))
    }

    fn replay_beliefs(&self, id: NodeId, ctx: &RewardContext<'_>) -> Result<(Delta, f64)> {
        let mut scratch = Delta::default();
        let mut info = 0.0;
        for n in self.chain(id)? {
            let node = self.get(n)?;
            let (d, g) = node_information(
                |i| scratch.get(&i).copied().unwrap_or_else(|| ctx.base.prob(i)),
                &node.footprint.cells,
                ctx,
                ctx.time_at(node.cost),
            );
            scratch.extend(d);
            info += g;
        }
        Ok((scratch, info))
    }

    /// Cumulative information at `id` recomputed from scratch by walking the
    /// root-to-node observations in order.
    pub fn replay_information(&self, id: NodeId, ctx: &RewardContext<'_>) -> Result<f64> {
        Ok(self.replay_beliefs(id, ctx)?.1)
    }

    /// Adds a child; rejected when the resulting cost exceeds `budget`.
    #[allow(clippy::too_many_arguments)]
    pub fn attach(
        &mut self,
        parent: NodeId,
        pose: Pose,
        edge: EdgeGeometry,
        footprint: Footprint,
        delta: Delta,
        info_gain: f64,
        budget: f64,
    ) -> Result<NodeId> {
        let p = self.get(parent)?;
        let cost = p.cost + edge.length;
        if cost > budget + COST_EPS {
            return Err(Error::BudgetExceeded { cost, budget });
        }
        let info = p.info + info_gain;
        let id = self.nodes.len();
        let bbox = CellBox::of(delta.keys().copied(), self.n_cols);
        self.nodes.push(Some(PlanNode {
            pose,
            info,
            cost,
            parent: Some(parent),
            children: Vec::new(),
            delta,
            closed: cost >= budget - self.params.budget_epsilon,
            edge: Some(edge),
            footprint,
            bbox,
        }));
        self.nodes[parent].as_mut().expect("parent checked").children.push(id);
        self.index.insert(id, pos(&pose));
        self.live += 1;
        Ok(id)
    }

    /// `false` when an open node within `radius` is at least as cheap and at
    /// least as informative, strictly better in one of the two.
    pub fn prune_check(&self, pose: &Pose, info: f64, cost: f64, radius: f64) -> bool {
        let near = self.index.within(pos(pose), radius, |id| !self.is_closed(id));
        !near.into_iter().any(|id| {
            let n = self.node(id).expect("indexed node is live");
            n.cost <= cost && n.info >= info && (n.cost < cost || n.info > info)
        })
    }

    pub fn nearest_open(&self, pose: &Pose) -> Option<NodeId> {
        self.index.nearest(pos(pose), |id| !self.is_closed(id))
    }

    pub fn near_open(&self, pose: &Pose, radius: f64) -> Vec<NodeId> {
        self.index.within(pos(pose), radius, |id| !self.is_closed(id))
    }

    /// Node with the largest information; ties to lower cost, then lower id.
    pub fn best_node(&self) -> NodeId {
        let mut best = self.root;
        for id in self.ids() {
            let n = self.node(id).expect("live");
            let b = self.node(best).expect("live");
            if n.info > b.info || (n.info == b.info && n.cost < b.cost) {
                best = id;
            }
        }
        best
    }

    pub fn trajectory_to(&self, id: NodeId) -> Result<Trajectory> {
        let nodes = self.chain(id)?;
        let mut t = Trajectory::default();
        for &n in &nodes {
            let node = self.get(n)?;
            t.poses.push(node.pose);
            t.costs.push(node.cost);
            t.infos.push(node.info);
            if n != nodes[0] {
                t.edges.push(node.edge.clone().expect("non-root has an edge"));
            }
        }
        t.nodes = nodes;
        Ok(t)
    }

    pub fn best_path(&self) -> Trajectory {
        self.trajectory_to(self.best_node())
            .expect("best node is live")
    }

    fn remove_subtree(&mut self, id: NodeId) -> usize {
        let mut stack = vec![id];
        let mut n = 0;
        while let Some(cur) = stack.pop() {
            if let Some(node) = self.nodes[cur].take() {
                self.index.remove(cur, pos(&node.pose));
                stack.extend(node.children);
                self.live -= 1;
                n += 1;
            }
        }
        n
    }

    /// Makes `id` the root. Everything that is not a descendant of `id` is
    /// dropped and the new root's delta absorbs its former ancestors', so
    /// [`PlanTree::belief_at`] is unchanged for all survivors.
    pub fn prune_before(&mut self, id: NodeId) -> Result<()> {
        let chain = self.chain(id)?;
        if chain.len() == 1 {
            return Ok(());
        }
        let mut merged = Delta::default();
        for &n in &chain {
            merged.extend(self.get(n)?.delta.iter().map(|(k, v)| (*k, *v)));
        }
        let keep: FxHashSet<NodeId> = {
            let mut set = FxHashSet::default();
            let mut stack = vec![id];
            while let Some(cur) = stack.pop() {
                set.insert(cur);
                stack.extend(self.get(cur)?.children.iter().copied());
            }
            set
        };
        let doomed: Vec<NodeId> = self.ids().filter(|i| !keep.contains(i)).collect();
        for d in doomed {
            if let Some(node) = self.nodes[d].take() {
                self.index.remove(d, pos(&node.pose));
                self.live -= 1;
            }
        }
        let n_cols = self.n_cols;
        let node = self.nodes[id].as_mut().expect("kept");
        node.parent = None;
        node.bbox = CellBox::of(merged.keys().copied(), n_cols);
        node.delta = merged;
        self.root = id;
        Ok(())
    }

    /// Re-scores the subtree under `from` (which must be the root) against
    /// the current base map and `budget`, in a single pre-order pass. Costs
    /// are shifted so the root sits at zero; nodes that no longer fit the
    /// budget are removed with their descendants.
    pub fn update_subtree(
        &mut self,
        from: NodeId,
        budget: f64,
        ctx: &RewardContext<'_>,
    ) -> Result<UpdateStats> {
        let offset = self.get(from)?.cost;
        let eps = self.params.budget_epsilon;
        let mut stats = UpdateStats::default();
        let mut stack = vec![from];
        while let Some(id) = stack.pop() {
            let node = self.get(id)?;
            let cost = if id == from { 0.0 } else { node.cost - offset };
            if cost > budget + COST_EPS {
                stats.removed += self.remove_subtree(id);
                continue;
            }
            let parent = if id == from { None } else { node.parent };
            let (delta, gain, parent_info) = match parent {
                Some(p) => {
                    let (d, g) = self.score_child(p, &node.footprint.cells, cost, ctx)?;
                    (d, g, self.get(p)?.info)
                }
                None => {
                    let (d, g) = node_information(
                        |i| ctx.base.prob(i),
                        &node.footprint.cells,
                        ctx,
                        ctx.time_at(cost),
                    );
                    (d, g, 0.0)
                }
            };
            let n_cols = self.n_cols;
            let node = self.nodes[id].as_mut().expect("live");
            node.cost = cost;
            node.info = parent_info + gain;
            node.bbox = CellBox::of(delta.keys().copied(), n_cols);
            node.delta = delta;
            node.closed = cost >= budget - eps;
            // Reverse so children pop in insertion order.
            stack.extend(node.children.iter().rev().copied());
            stats.visited.push(id);
        }
        self.prune_dangling_children();
        Ok(stats)
    }

    fn prune_dangling_children(&mut self) {
        let live: Vec<bool> = self.nodes.iter().map(Option::is_some).collect();
        for node in self.nodes.iter_mut().flatten() {
            node.children.retain(|c| live[*c]);
        }
    }

    pub fn dump(&self) -> TreeDump {
        let mut nodes = Vec::with_capacity(self.live);
        let mut edges = Vec::new();
        for id in self.ids() {
            let n = self.node(id).expect("live");
            nodes.push(NodeRow {
                id,
                parent: n.parent,
                x: n.pose.x,
                y: n.pose.y,
                z: n.pose.z,
                psi: n.pose.psi,
                cost: n.cost,
                info: n.info,
                closed: n.closed,
                delta_len: n.delta.len(),
            });
            if let (Some(p), Some(e)) = (n.parent, &n.edge) {
                edges.push(EdgeRow {
                    parent: p,
                    child: id,
                    length: e.length,
                });
            }
        }
        TreeDump {
            root: self.root,
            nodes,
            edges,
        }
    }
}

#[inline]
fn pos(p: &Pose) -> [f64; 3] {
    [p.x, p.y, p.z]
}

/// Node and edge tables for debugging and fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDump {
    pub root: NodeId,
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
    pub cost: f64,
    pub info: f64,
    pub closed: bool,
    pub delta_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub parent: NodeId,
    pub child: NodeId,
    pub length: f64,
}

impl TreeDump {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

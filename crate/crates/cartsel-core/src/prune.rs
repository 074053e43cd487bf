//! Weakest-link pruning: the nested subtree chain minimizing
//! `contrast + lambda * |T|` for every penalty-per-leaf value `lambda`.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, Framework};
use crate::tree::{Node, Tree};

const NEVER: usize = usize::MAX;

/// The nested chain `T_0 ⊋ T_1 ⊋ … ⊋ T_K` produced by weakest-link pruning,
/// together with the strictly increasing critical penalties `0 = λ_0 < λ_1 <
/// … < λ_K`. For any `λ ≥ 0`, `T_k` with the largest `k` such that
/// `λ_k ≤ λ` is the smallest minimizer of `γ(T) + λ |T|` over all pruned
/// subtrees of `T_0`'s start tree.
///
/// Subtrees are represented compactly by the chain index at which each node
/// of the base tree collapses into a leaf; [`PrunedSequence::subtree`]
/// materializes any chain element as a standalone [`Tree`].
#[derive(Debug, Clone)]
pub struct PrunedSequence {
    base: Tree,
    eval_count: Vec<usize>,
    eval_value: Vec<f64>,
    /// Unnormalized per-node contrast when the node is taken as a leaf:
    /// squared-error mass for regression, misclassified count (an exact
    /// integer) for classification.
    leaf_cost: Vec<f64>,
    collapse_step: Vec<usize>,
    criticals: Vec<f64>,
    risks: Vec<f64>,
    leaf_counts: Vec<usize>,
    n_eval: usize,
}

impl PrunedSequence {
    /// Number of chain elements (the paper's `K_M`).
    pub fn len(&self) -> usize {
        self.criticals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Strictly increasing critical penalty-per-leaf values, `λ_0 = 0`.
    pub fn criticals(&self) -> &[f64] {
        &self.criticals
    }

    /// Contrast of each chain element on the pruning rows.
    pub fn risks(&self) -> &[f64] {
        &self.risks
    }

    /// `|T_k|` for each chain element.
    pub fn leaf_counts(&self) -> &[usize] {
        &self.leaf_counts
    }

    pub fn base(&self) -> &Tree {
        &self.base
    }

    pub fn n_eval(&self) -> usize {
        self.n_eval
    }

    /// Unnormalized contrast of base-tree node `id` taken as a leaf
    /// (squared-error mass or misclassified count on the pruning rows).
    pub fn node_leaf_cost(&self, id: usize) -> f64 {
        self.leaf_cost[id]
    }

    /// Chain index at which base-tree node `id` collapses into a leaf;
    /// `usize::MAX` when it never does (original leaves).
    pub fn node_collapse_step(&self, id: usize) -> usize {
        self.collapse_step[id]
    }

    /// Index of the chain element selected by penalty-per-leaf `lambda`:
    /// the largest `k` with `λ_k ≤ lambda` (so exact ties pick the smaller
    /// subtree).
    pub fn index_at(&self, lambda: f64) -> usize {
        assert!(lambda >= 0.0, "negative penalty");
        self.criticals.partition_point(|c| *c <= lambda) - 1
    }

    /// Prediction of chain element `k` without materializing it.
    pub fn predict_at(&self, k: usize, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            let node = &self.base.nodes[id];
            match &node.split {
                Some(split) if self.collapse_step[id] > k => {
                    id = if x[split.var] <= split.threshold {
                        node.left
                    } else {
                        node.right
                    };
                }
                _ => {
                    return if self.eval_count[id] > 0 {
                        self.eval_value[id]
                    } else {
                        node.grow_value
                    };
                }
            }
        }
    }

    /// Materializes chain element `k`. Collapsed nodes become leaves valued
    /// on the pruning rows routed to them (falling back to the growing-
    /// sample value when none reached the node, flagged `refit_empty`).
    pub fn subtree(&self, k: usize) -> Tree {
        assert!(k < self.len());
        let mut nodes = Vec::new();
        self.copy_node(0, k, &mut nodes);
        Tree {
            nodes,
            subset: self.base.subset.clone(),
            framework: self.base.framework,
            n_total: self.base.n_total,
            n_min: self.base.n_min,
        }
    }

    fn copy_node(&self, id: usize, k: usize, out: &mut Vec<Node>) -> usize {
        let node = &self.base.nodes[id];
        let new_id = out.len();
        if node.split.is_some() && self.collapse_step[id] > k {
            out.push(node.clone());
            out[new_id].rows = Vec::new();
            let left = self.copy_node(node.left, k, out);
            let right = self.copy_node(node.right, k, out);
            out[new_id].left = left;
            out[new_id].right = right;
            new_id
        } else {
            let mut rows = Vec::new();
            self.collect_rows(id, &mut rows);
            rows.sort_unstable();
            let count = rows.len();
            let value = if self.eval_count[id] > 0 {
                self.eval_value[id]
            } else {
                node.grow_value
            };
            let mut leaf = Node {
                split: None,
                left: 0,
                right: 0,
                value,
                count,
                grow_value: node.grow_value,
                refit_empty: self.eval_count[id] == 0,
                rows,
            };
            // Growing kept counts on every node; trust it when present.
            if node.count > 0 {
                leaf.count = node.count;
            }
            out.push(leaf);
            new_id
        }
    }

    fn collect_rows(&self, id: usize, out: &mut Vec<u32>) {
        let node = &self.base.nodes[id];
        if node.split.is_some() {
            self.collect_rows(node.left, out);
            self.collect_rows(node.right, out);
        } else {
            out.extend_from_slice(&node.rows);
        }
    }
}

/// Returns the chain element selected by `lambda` (see
/// [`PrunedSequence::index_at`] for the tie convention).
pub fn subtree_at(seq: &PrunedSequence, lambda: f64) -> Tree {
    seq.subtree(seq.index_at(lambda))
}

fn leaf_stats(ds: &Dataset, rows: &[u32], fallback: f64) -> (f64, f64) {
    if rows.is_empty() {
        return (fallback, 0.0);
    }
    match ds.framework() {
        Framework::Regression => {
            let mean = rows.iter().map(|&r| ds.y(r as usize)).sum::<f64>() / rows.len() as f64;
            let sse = rows
                .iter()
                .map(|&r| {
                    let d = ds.y(r as usize) - mean;
                    d * d
                })
                .sum::<f64>();
            (mean, sse)
        }
        Framework::Classification => {
            let c1: f64 = rows.iter().map(|&r| ds.y(r as usize)).sum();
            let c0 = rows.len() as f64 - c1;
            let value = if c1 > c0 { 1.0 } else { 0.0 };
            let errors = if value == 0.0 { c1 } else { c0 };
            (value, errors)
        }
    }
}

/// Runs weakest-link pruning of `tree` against the contrast over `rows`:
/// iteratively collapses every internal node attaining the minimal per-leaf
/// error increase `g(t) = (cost(t) − cost(branch t)) / (|branch leaves| − 1)`,
/// merging steps whose critical values coincide, so the returned criticals
/// are strictly increasing and `T_0` is the smallest subtree attaining the
/// minimal contrast.
///
/// The node costs are computed from `rows` with values refit per node (the
/// growing value backs empty nodes), so for the M1 scheme `rows` should be
/// the pruning subsample of a refit tree, and for M2 the growing rows.
pub fn prune_sequence(tree: &Tree, ds: &Dataset, rows: &[usize]) -> PrunedSequence {
    assert!(!rows.is_empty(), "pruning against an empty row set");
    let n_nodes = tree.nodes.len();
    let per_node = tree.route_rows(ds, rows);
    let mut eval_count = Vec::with_capacity(n_nodes);
    let mut eval_value = Vec::with_capacity(n_nodes);
    let mut leaf_cost = Vec::with_capacity(n_nodes);
    for (id, node_rows) in per_node.iter().enumerate() {
        let (value, cost) = leaf_stats(ds, node_rows, tree.nodes[id].grow_value);
        eval_count.push(node_rows.len());
        eval_value.push(value);
        leaf_cost.push(cost);
    }

    let n_eval = rows.len() as f64;
    let mut collapse_step = vec![NEVER; n_nodes];
    let mut criticals = Vec::new();
    let mut risks = Vec::new();
    let mut leaf_counts = Vec::new();

    // (cost, leaves) of the current branch below each live node, plus the
    // current chain snapshot, recomputed per round. Small trees keep this
    // quadratic pass cheap.
    let mut branch_cost = vec![0.0; n_nodes];
    let mut branch_leaves = vec![0usize; n_nodes];
    let mut lambda = 0.0f64;
    let step = 0usize;
    let mut chain_index = step;
    loop {
        let mut live = Vec::new();
        collect_live(tree, &collapse_step, chain_index, 0, &mut live);
        for &id in live.iter().rev() {
            let node = &tree.nodes[id];
            let collapsed = node.split.is_none() || collapse_step[id] <= chain_index;
            if collapsed {
                branch_cost[id] = leaf_cost[id];
                branch_leaves[id] = 1;
            } else {
                branch_cost[id] = branch_cost[node.left] + branch_cost[node.right];
                branch_leaves[id] = branch_leaves[node.left] + branch_leaves[node.right];
            }
        }

        let mut min_g = f64::INFINITY;
        for &id in &live {
            let node = &tree.nodes[id];
            if node.split.is_none() || collapse_step[id] <= chain_index {
                continue;
            }
            let g = ((leaf_cost[id] - branch_cost[id]) / (branch_leaves[id] - 1) as f64).max(0.0);
            min_g = min_g.min(g);
        }

        if min_g <= lambda {
            // Collapse every weakest link at the current critical value and
            // re-examine: ancestors may join the same chain element.
            for &id in &live {
                let node = &tree.nodes[id];
                if node.split.is_none() || collapse_step[id] <= chain_index {
                    continue;
                }
                let g =
                    ((leaf_cost[id] - branch_cost[id]) / (branch_leaves[id] - 1) as f64).max(0.0);
                if g <= lambda {
                    collapse_step[id] = chain_index;
                }
            }
            continue;
        }

        // Current element is settled: record it in canonical leaf order.
        let mut leaves: Vec<usize> = live
            .iter()
            .copied()
            .filter(|&id| tree.nodes[id].split.is_none() || collapse_step[id] <= chain_index)
            .collect();
        leaves.sort_unstable();
        let total_cost: f64 = leaves.iter().map(|&id| leaf_cost[id]).sum();
        criticals.push(lambda);
        risks.push(total_cost / n_eval);
        leaf_counts.push(leaves.len());

        if min_g.is_infinite() {
            break;
        }
        lambda = min_g;
        chain_index += 1;
    }

    PrunedSequence {
        base: tree.clone(),
        eval_count,
        eval_value,
        leaf_cost,
        collapse_step,
        criticals: criticals.iter().map(|c| c / n_eval).collect(),
        risks,
        leaf_counts,
        n_eval: rows.len(),
    }
}

/// Preorder ids of nodes not hidden under a collapsed ancestor.
fn collect_live(tree: &Tree, step: &[usize], k: usize, id: usize, out: &mut Vec<usize>) {
    out.push(id);
    let node = &tree.nodes[id];
    if node.split.is_some() && step[id] > k {
        collect_live(tree, step, k, node.left, out);
        collect_live(tree, step, k, node.right, out);
    }
}

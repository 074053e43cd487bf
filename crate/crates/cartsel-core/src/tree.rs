//! CART tree induction: impurity criteria, best-split search, maximal-tree
//! growing, prediction and leaf refitting.

use alloc::vec::Vec;
use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Framework};

/// A set `M` of variable indices the tree is allowed to split on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableSubset(Vec<usize>);

impl VariableSubset {
    /// Builds a subset from indices; duplicates are dropped, order is
    /// normalized ascending. Must be nonempty.
    pub fn new<I: IntoIterator<Item = usize>>(members: I) -> Self {
        let mut m: Vec<usize> = members.into_iter().collect();
        m.sort_unstable();
        m.dedup();
        assert!(!m.is_empty(), "a variable subset cannot be empty");
        VariableSubset(m)
    }

    /// The full set {0..p-1}.
    pub fn full(p: usize) -> Self {
        VariableSubset::new(0..p)
    }

    /// All 2^p - 1 nonempty subsets of {0..p-1}, in bitmask order.
    pub fn all_nonempty(p: usize) -> Vec<Self> {
        assert!(p < usize::BITS as usize);
        (1usize..(1 << p))
            .map(|mask| VariableSubset::new((0..p).filter(|j| mask >> j & 1 == 1)))
            .collect()
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.binary_search(&var).is_ok()
    }

    /// This subset extended with one more variable.
    pub fn with(&self, var: usize) -> Self {
        let mut m = self.0.clone();
        m.push(var);
        VariableSubset::new(m)
    }
}

/// A binary question `x[var] <= threshold`; rows satisfying it go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub var: usize,
    pub threshold: f64,
    /// Impurity decrease achieved by the split, in the global 1/n convention
    /// of the growing sample.
    pub decrease: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub split: Option<Split>,
    pub left: usize,
    pub right: usize,
    /// Fitted value used for prediction (set by growing, overwritten by
    /// leaf refits).
    pub value: f64,
    /// Growing-sample rows reaching the node.
    pub count: usize,
    /// Growing-sample mean (regression) or majority label (classification).
    pub grow_value: f64,
    /// Set when the last refit routed no rows into this leaf.
    pub refit_empty: bool,
    /// Growing rows, kept on leaves only, ascending.
    pub rows: Vec<u32>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    fn leaf(value: f64, count: usize, rows: Vec<u32>) -> Self {
        Node {
            split: None,
            left: 0,
            right: 0,
            value,
            count,
            grow_value: value,
            refit_empty: false,
            rows,
        }
    }
}

/// A binary regression/classification tree restricted to one variable
/// subset. Nodes live in a flat arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub subset: VariableSubset,
    pub framework: Framework,
    /// Size of the growing sample (the 1/n normalization of impurities).
    pub n_total: usize,
    /// Stop rule: both children of any split carry at least this many rows.
    pub n_min: usize,
}

impl Tree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Number of leaves `|T|`.
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_leaf())
            .collect()
    }

    /// Routes a feature vector to its leaf and returns the node id.
    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut id = 0;
        while let Some(split) = &self.nodes[id].split {
            id = if x[split.var] <= split.threshold {
                self.nodes[id].left
            } else {
                self.nodes[id].right
            };
        }
        id
    }

    /// Piecewise-constant prediction: the value of the leaf `x` routes to.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_for(x)].value
    }

    /// Mean quadratic contrast of this tree's predictions over `rows`.
    pub fn contrast(&self, ds: &Dataset, rows: &[usize]) -> f64 {
        empirical_contrast(|x| self.predict(x), ds, rows)
    }

    /// Distributes `rows` over the tree; returns one ascending row list per
    /// node (internal nodes included).
    pub fn route_rows(&self, ds: &Dataset, rows: &[usize]) -> Vec<Vec<u32>> {
        let mut per_node: Vec<Vec<u32>> = vec![Vec::new(); self.nodes.len()];
        for &r in rows {
            let x = ds.row(r);
            let mut id = 0;
            per_node[id].push(r as u32);
            while let Some(split) = &self.nodes[id].split {
                id = if x[split.var] <= split.threshold {
                    self.nodes[id].left
                } else {
                    self.nodes[id].right
                };
                per_node[id].push(r as u32);
            }
        }
        per_node
    }
}

/// Within-node error estimate `R(t)` for regression: squared deviations
/// from the node mean, normalized by the full sample size `n_total`.
pub fn impurity_regression(responses: &[f64], n_total: usize) -> f64 {
    assert!(!responses.is_empty(), "impurity of an empty node");
    assert!(n_total >= responses.len());
    let mean = responses.iter().sum::<f64>() / responses.len() as f64;
    responses.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n_total as f64
}

/// Gini index `2 p0 p1` of a binary node given its class counts.
pub fn impurity_gini(count0: usize, count1: usize) -> f64 {
    let n = count0 + count1;
    assert!(n >= 1, "impurity of an empty node");
    let p0 = count0 as f64 / n as f64;
    let p1 = count1 as f64 / n as f64;
    2.0 * p0 * p1
}

/// `count * gini`, the per-node Gini contribution under the global 1/n
/// convention (before dividing by `n_total`).
#[inline]
fn gini_mass(c0: f64, c1: f64) -> f64 {
    let n = c0 + c1;
    if n == 0.0 {
        0.0
    } else {
        2.0 * c0 * c1 / n
    }
}

#[inline]
fn sse_mass(count: f64, sum: f64, sumsq: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        (sumsq - sum * sum / count).max(0.0)
    }
}

struct BestSplit {
    var: usize,
    threshold: f64,
    decrease: f64,
    split_at: usize,
}

/// Scans one variable's sorted row list for the best admissible cut.
/// `decrease` is kept unnormalized here; ties never replace, so the first
/// maximum wins (ascending variable, ascending threshold).
fn scan_variable(
    ds: &Dataset,
    var: usize,
    sorted_rows: &[u32],
    min_child: usize,
    best: &mut Option<BestSplit>,
) {
    let n = sorted_rows.len();
    let total: (f64, f64, f64) = match ds.framework() {
        Framework::Regression => {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for &r in sorted_rows {
                let y = ds.y(r as usize);
                sum += y;
                sumsq += y * y;
            }
            (n as f64, sum, sumsq)
        }
        Framework::Classification => {
            let c1: f64 = sorted_rows.iter().map(|&r| ds.y(r as usize)).sum();
            (n as f64, c1, 0.0)
        }
    };
    let parent_mass = match ds.framework() {
        Framework::Regression => sse_mass(total.0, total.1, total.2),
        Framework::Classification => gini_mass(total.0 - total.1, total.1),
    };

    let mut acc_count = 0.0f64;
    let mut acc_sum = 0.0f64;
    let mut acc_sumsq = 0.0f64;
    for i in 0..n - 1 {
        let r = sorted_rows[i] as usize;
        let y = ds.y(r);
        acc_count += 1.0;
        acc_sum += y;
        acc_sumsq += y * y;
        let here = ds.x(r, var);
        let next = ds.x(sorted_rows[i + 1] as usize, var);
        if here == next {
            continue;
        }
        let left_n = i + 1;
        let right_n = n - left_n;
        if left_n < min_child || right_n < min_child {
            continue;
        }
        let children_mass = match ds.framework() {
            Framework::Regression => {
                sse_mass(acc_count, acc_sum, acc_sumsq)
                    + sse_mass(
                        total.0 - acc_count,
                        total.1 - acc_sum,
                        total.2 - acc_sumsq,
                    )
            }
            Framework::Classification => {
                let l1 = acc_sum;
                let r1 = total.1 - l1;
                gini_mass(acc_count - l1, l1) + gini_mass(total.0 - acc_count - r1, r1)
            }
        };
        let decrease = parent_mass - children_mass;
        if decrease > 0.0 && best.as_ref().is_none_or(|b| decrease > b.decrease) {
            *best = Some(BestSplit {
                var,
                threshold: (here + next) / 2.0,
                decrease,
                split_at: left_n,
            });
        }
    }
}

fn sorted_by_var(ds: &Dataset, rows: &[u32], var: usize) -> Vec<u32> {
    let mut v = rows.to_vec();
    v.sort_unstable_by(|&a, &b| {
        ds.x(a as usize, var)
            .total_cmp(&ds.x(b as usize, var))
            .then(a.cmp(&b))
    });
    v
}

/// Best split over the variables of `subset` for the given rows, or `None`
/// when no cut yields a strictly positive impurity decrease. Thresholds sit
/// at midpoints of consecutive distinct observed values; ties are broken by
/// smallest variable index, then smallest threshold.
pub fn best_split(
    ds: &Dataset,
    rows: &[usize],
    subset: &VariableSubset,
    n_total: usize,
) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let rows32: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let mut best = None;
    for &var in subset.members() {
        let sorted = sorted_by_var(ds, &rows32, var);
        scan_variable(ds, var, &sorted, 1, &mut best);
    }
    best.map(|b| Split {
        var: b.var,
        threshold: b.threshold,
        decrease: b.decrease / n_total as f64,
    })
}

fn node_stats(ds: &Dataset, rows: &[u32]) -> (f64, bool) {
    match ds.framework() {
        Framework::Regression => {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for &r in rows {
                let y = ds.y(r as usize);
                min = min.min(y);
                max = max.max(y);
                sum += y;
            }
            (sum / rows.len() as f64, min == max)
        }
        Framework::Classification => {
            let c1: f64 = rows.iter().map(|&r| ds.y(r as usize)).sum();
            let c0 = rows.len() as f64 - c1;
            // Equal counts resolve to label 0.
            let value = if c1 > c0 { 1.0 } else { 0.0 };
            (value, c0 == 0.0 || c1 == 0.0)
        }
    }
}

/// Grows the maximal tree on `rows`, splitting only on variables of
/// `subset`. A node becomes a leaf when it is pure, when no cut has strictly
/// positive impurity decrease, or when every admissible cut would leave a
/// child with fewer than `n_min` rows. Leaf values are the within-leaf mean
/// (regression) or majority label with ties to 0 (classification).
pub fn grow_maximal(
    ds: &Dataset,
    rows: &[usize],
    subset: &VariableSubset,
    n_min: usize,
) -> Tree {
    assert!(!rows.is_empty(), "cannot grow a tree on an empty sample");
    assert!(
        subset.members().iter().all(|&j| j < ds.p()),
        "subset indexes a variable outside the dataset"
    );
    let min_child = n_min.max(1);
    let n_total = rows.len();

    let mut sorted_rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    sorted_rows.sort_unstable();
    let by_var: Vec<Vec<u32>> = subset
        .members()
        .iter()
        .map(|&j| sorted_by_var(ds, &sorted_rows, j))
        .collect();

    let mut tree = Tree {
        nodes: vec![Node::leaf(0.0, 0, Vec::new())],
        subset: subset.clone(),
        framework: ds.framework(),
        n_total,
        n_min,
    };

    // Depth-first worklist; each item owns its rows plus one per-variable
    // sorted copy, partitioned from the parent without re-sorting.
    let mut work = vec![(0usize, sorted_rows, by_var)];
    while let Some((id, rows, by_var)) = work.pop() {
        let (value, pure) = node_stats(ds, &rows);
        tree.nodes[id].value = value;
        tree.nodes[id].grow_value = value;
        tree.nodes[id].count = rows.len();

        let mut best: Option<BestSplit> = None;
        if !pure && rows.len() >= 2 * min_child {
            for (vi, &var) in subset.members().iter().enumerate() {
                scan_variable(ds, var, &by_var[vi], min_child, &mut best);
            }
        }
        let Some(found) = best else {
            tree.nodes[id].rows = rows;
            continue;
        };

        let goes_left =
            |r: u32| ds.x(r as usize, found.var) <= found.threshold;
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&r| goes_left(r));
        debug_assert_eq!(left_rows.len(), found.split_at);
        let mut left_by_var = Vec::with_capacity(by_var.len());
        let mut right_by_var = Vec::with_capacity(by_var.len());
        for list in by_var {
            let (l, r): (Vec<u32>, Vec<u32>) = list.iter().partition(|&&r| goes_left(r));
            left_by_var.push(l);
            right_by_var.push(r);
        }

        let left_id = tree.nodes.len();
        tree.nodes.push(Node::leaf(0.0, 0, Vec::new()));
        let right_id = tree.nodes.len();
        tree.nodes.push(Node::leaf(0.0, 0, Vec::new()));
        tree.nodes[id].split = Some(Split {
            var: found.var,
            threshold: found.threshold,
            decrease: found.decrease / n_total as f64,
        });
        tree.nodes[id].left = left_id;
        tree.nodes[id].right = right_id;
        // Right first so the left child is processed (and numbered) first.
        work.push((right_id, right_rows, right_by_var));
        work.push((left_id, left_rows, left_by_var));
    }
    tree
}

/// Mean quadratic contrast of an arbitrary predictor over `rows`; equals
/// the misclassification rate for {0,1}-valued predictors and responses.
pub fn empirical_contrast<F: FnMut(&[f64]) -> f64>(
    mut pred: F,
    ds: &Dataset,
    rows: &[usize],
) -> f64 {
    assert!(!rows.is_empty(), "contrast over an empty row set");
    let mut total = 0.0;
    for &r in rows {
        let d = ds.y(r) - pred(ds.row(r));
        total += d * d;
    }
    total / rows.len() as f64
}

/// Re-estimates leaf values on a new sample: within-leaf mean (regression)
/// or majority label with ties to 0 (classification). Leaves that receive
/// no rows keep their previous value and are flagged `refit_empty`.
pub fn refit_leaves(tree: &Tree, ds: &Dataset, rows: &[usize]) -> Tree {
    assert!(!rows.is_empty(), "refit over an empty row set");
    let per_node = tree.route_rows(ds, rows);
    let mut out = tree.clone();
    for (id, node) in out.nodes.iter_mut().enumerate() {
        if !node.is_leaf() {
            continue;
        }
        let got = &per_node[id];
        if got.is_empty() {
            node.refit_empty = true;
            continue;
        }
        node.refit_empty = false;
        node.value = node_stats(ds, got).0;
    }
    out
}

// --- JSON representation -------------------------------------------------
//
// Trees serialize as a nested document: internal nodes are
// {"var", "threshold", "left", "right"}, leaves {"value", "count"}.
// Thresholds and values survive the round trip exactly (shortest-roundtrip
// decimal form). Growing-row lists are not exported.

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Internal {
        var: usize,
        threshold: f64,
        left: alloc::boxed::Box<NodeRepr>,
        right: alloc::boxed::Box<NodeRepr>,
    },
    Leaf {
        value: f64,
        count: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    subset: VariableSubset,
    framework: Framework,
    n_total: usize,
    n_min: usize,
    root: NodeRepr,
}

fn to_repr(tree: &Tree, id: usize) -> NodeRepr {
    let node = &tree.nodes[id];
    match &node.split {
        Some(split) => NodeRepr::Internal {
            var: split.var,
            threshold: split.threshold,
            left: alloc::boxed::Box::new(to_repr(tree, node.left)),
            right: alloc::boxed::Box::new(to_repr(tree, node.right)),
        },
        None => NodeRepr::Leaf {
            value: node.value,
            count: node.count,
        },
    }
}

fn from_repr(repr: &NodeRepr, nodes: &mut Vec<Node>) -> (usize, usize) {
    let id = nodes.len();
    nodes.push(Node::leaf(0.0, 0, Vec::new()));
    match repr {
        NodeRepr::Leaf { value, count } => {
            nodes[id].value = *value;
            nodes[id].grow_value = *value;
            nodes[id].count = *count;
            (id, *count)
        }
        NodeRepr::Internal {
            var,
            threshold,
            left,
            right,
        } => {
            let (left_id, left_count) = from_repr(left, nodes);
            let (right_id, right_count) = from_repr(right, nodes);
            nodes[id].split = Some(Split {
                var: *var,
                threshold: *threshold,
                // Imported documents carry no split-quality information.
                decrease: 0.0,
            });
            nodes[id].left = left_id;
            nodes[id].right = right_id;
            nodes[id].count = left_count + right_count;
            (id, left_count + right_count)
        }
    }
}

impl Serialize for Tree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TreeRepr {
            subset: self.subset.clone(),
            framework: self.framework,
            n_total: self.n_total,
            n_min: self.n_min,
            root: to_repr(self, 0),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TreeRepr::deserialize(deserializer)?;
        let mut nodes = Vec::new();
        from_repr(&repr.root, &mut nodes);
        Ok(Tree {
            nodes,
            subset: repr.subset,
            framework: repr.framework,
            n_total: repr.n_total,
            n_min: repr.n_min,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::gen_breiman;
    use alloc::string::ToString;

    pub(crate) fn small_ds(cols: &[&[f64]], y: &[f64], framework: Framework) -> Dataset {
        let n = y.len();
        let p = cols.len();
        let mut x = Vec::with_capacity(n * p);
        for i in 0..n {
            for col in cols {
                x.push(col[i]);
            }
        }
        let names = (0..p).map(|j| format!("v{j}")).collect();
        Dataset::new(x, n, p, y.to_vec(), names, framework).unwrap()
    }

    fn rows(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn impurity_regression_examples() {
        assert_eq!(impurity_regression(&[0.0, 2.0], 2), 1.0);
        assert_eq!(impurity_regression(&[5.0, 5.0, 5.0], 3), 0.0);
        assert_eq!(impurity_regression(&[0.0, 0.0, 2.0, 2.0], 4), 1.0);
    }

    #[test]
    fn impurity_gini_examples() {
        assert_eq!(impurity_gini(5, 5), 0.5);
        assert_eq!(impurity_gini(10, 0), 0.0);
        assert_eq!(impurity_gini(1, 3), 0.375);
    }

    #[test]
    fn best_split_basic() {
        let ds = small_ds(
            &[&[0.0, 0.0, 1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
            Framework::Regression,
        );
        let s = best_split(&ds, &rows(4), &VariableSubset::full(1), 4).unwrap();
        assert_eq!(s.var, 0);
        assert_eq!(s.threshold, 0.5);
        assert!((s.decrease - 0.25).abs() < 1e-15);
    }

    #[test]
    fn best_split_none_on_constant_response() {
        let ds = small_ds(&[&[0.0, 1.0, 2.0]], &[1.0, 1.0, 1.0], Framework::Regression);
        assert!(best_split(&ds, &rows(3), &VariableSubset::full(1), 3).is_none());
    }

    #[test]
    fn best_split_tie_prefers_lower_variable() {
        // Second column duplicates the first: identical decreases.
        let col = [0.0, 0.0, 1.0, 1.0];
        let ds = small_ds(&[&col, &col], &[0.0, 0.0, 1.0, 1.0], Framework::Regression);
        let s = best_split(&ds, &rows(4), &VariableSubset::full(2), 4).unwrap();
        assert_eq!(s.var, 0);
    }

    #[test]
    fn best_split_classification_gini() {
        let ds = small_ds(
            &[&[0.0, 0.0, 1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
            Framework::Classification,
        );
        let s = best_split(&ds, &rows(4), &VariableSubset::full(1), 4).unwrap();
        assert_eq!(s.var, 0);
        // Parent Gini mass 4*0.5, children pure: decrease = 2/4.
        assert!((s.decrease - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grow_respects_n_min() {
        let ds = small_ds(
            &[&[0.0, 0.0, 1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
            Framework::Regression,
        );
        let t = grow_maximal(&ds, &rows(4), &VariableSubset::full(1), 2);
        assert_eq!(t.n_leaves(), 2);
        let mut values: Vec<f64> = t
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.value)
            .collect();
        values.sort_by(f64::total_cmp);
        assert_eq!(values, vec![0.0, 1.0]);

        let t = grow_maximal(&ds, &rows(4), &VariableSubset::full(1), 3);
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.root().value, 0.5);
    }

    #[test]
    fn grow_stops_on_pure_root() {
        let ds = small_ds(&[&[0.0, 1.0, 2.0]], &[4.0, 4.0, 4.0], Framework::Regression);
        let t = grow_maximal(&ds, &rows(3), &VariableSubset::full(1), 1);
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.root().value, 4.0);
    }

    #[test]
    fn leaves_partition_growing_rows() {
        let ds = gen_breiman(300, 5, crate::data::BREIMAN_NOISE_SD).unwrap();
        let t = grow_maximal(&ds, &rows(300), &VariableSubset::full(10), 5);
        let mut all: Vec<u32> = t
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .flat_map(|n| n.rows.iter().copied())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..300u32).collect::<Vec<_>>());
        let count_sum: usize = t
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.count)
            .sum();
        assert_eq!(count_sum, t.n_total);
        for node in &t.nodes {
            if let Some(s) = &node.split {
                assert!(t.subset.contains(s.var));
                assert!(s.decrease >= 0.0);
                assert!(t.nodes[node.left].count >= t.n_min);
                assert!(t.nodes[node.right].count >= t.n_min);
            }
        }
    }

    #[test]
    fn predict_boundary_goes_left() {
        let ds = small_ds(
            &[&[0.0, 0.0, 1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
            Framework::Regression,
        );
        let t = grow_maximal(&ds, &rows(4), &VariableSubset::full(1), 1);
        assert_eq!(t.predict(&[0.5]), 0.0);
        assert_eq!(t.predict(&[0.0]), 0.0);
        assert_eq!(t.predict(&[0.75]), 1.0);
    }

    #[test]
    fn contrast_examples() {
        let ds = small_ds(
            &[&[0.0, 1.0, 2.0, 3.0]],
            &[0.0, 1.0, 0.0, 1.0],
            Framework::Classification,
        );
        assert_eq!(empirical_contrast(|_| 0.0, &ds, &rows(4)), 0.5);
        assert_eq!(
            empirical_contrast(|x| if x[0] == 3.0 { 0.0 } else { ds.y(x[0] as usize) }, &ds, &rows(4)),
            0.25
        );
        let reg = small_ds(&[&[0.0, 1.0]], &[1.0, -1.0], Framework::Regression);
        assert_eq!(empirical_contrast(|_| 0.0, &reg, &rows(2)), 1.0);
    }

    #[test]
    fn refit_recomputes_leaf_means() {
        let ds = small_ds(
            &[&[0.0, 0.0, 1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
            Framework::Regression,
        );
        let t = grow_maximal(&ds, &rows(4), &VariableSubset::full(1), 1);
        // Same rows: values unchanged.
        let same = refit_leaves(&t, &ds, &rows(4));
        assert_eq!(same, t);

        let ds2 = small_ds(
            &[&[0.0, 0.0, 1.0, 1.0]],
            &[0.1, 0.3, 0.8, 1.0],
            Framework::Regression,
        );
        let refit = refit_leaves(&t, &ds2, &rows(4));
        let mut values: Vec<f64> = refit
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.value)
            .collect();
        values.sort_by(f64::total_cmp);
        assert!((values[0] - 0.2).abs() < 1e-15);
        assert!((values[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn refit_empty_leaf_keeps_value_and_flags() {
        let ds = small_ds(
            &[&[0.0, 0.0, 1.0, 1.0]],
            &[0.0, 0.0, 1.0, 1.0],
            Framework::Regression,
        );
        let t = grow_maximal(&ds, &rows(4), &VariableSubset::full(1), 1);
        // Only rows from the left leaf.
        let refit = refit_leaves(&t, &ds, &[0, 1]);
        let right = refit
            .nodes
            .iter()
            .find(|n| n.is_leaf() && n.grow_value == 1.0)
            .unwrap();
        assert!(right.refit_empty);
        assert_eq!(right.value, 1.0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ds = gen_breiman(120, 9, crate::data::BREIMAN_NOISE_SD).unwrap();
        let t = grow_maximal(&ds, &rows(120), &VariableSubset::new([0, 1, 4]), 5);
        let json = serde_json::to_string(&t).unwrap();
        let back: Tree = serde_json::from_str(&json).unwrap();
        assert_eq!(back.nodes.len(), t.nodes.len());
        assert_eq!(back.subset, t.subset);
        assert_eq!(back.n_total, t.n_total);
        // Arena order is an implementation detail; compare structurally.
        fn same(a: &Tree, ai: usize, b: &Tree, bi: usize) {
            let (na, nb) = (&a.nodes[ai], &b.nodes[bi]);
            assert_eq!(na.is_leaf(), nb.is_leaf());
            match (&na.split, &nb.split) {
                (Some(sa), Some(sb)) => {
                    assert_eq!(sa.var, sb.var);
                    assert_eq!(sa.threshold.to_bits(), sb.threshold.to_bits());
                    same(a, na.left, b, nb.left);
                    same(a, na.right, b, nb.right);
                }
                (None, None) => {
                    assert_eq!(na.value.to_bits(), nb.value.to_bits());
                    assert_eq!(na.count, nb.count);
                }
                _ => unreachable!(),
            }
        }
        same(&t, 0, &back, 0);
        assert!(json.contains("\"var\""));
        assert!(json.contains("\"value\""));
        let _ = json.to_string();
    }
}

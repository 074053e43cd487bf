//! Variable importance scores and the importance-driven nested family of
//! candidate subsets for the restricted selection procedure.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Framework, Method, SampleSplit};
use crate::fmath;
use crate::prune::{prune_sequence, PrunedSequence};
use crate::seeding;
use crate::tree::{empirical_contrast, grow_maximal, Tree, VariableSubset};

/// How split credit is attributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViMode {
    /// Primary splits plus best-surrogate credit on every other variable.
    Surrogate,
    /// Primary splits only.
    PrimaryOnly,
}

/// Per-variable scores normalized so the maximum is 100, with the ranking
/// sorted by decreasing score (ties by ascending variable index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub scores: Vec<f64>,
    pub ranking: Vec<usize>,
}

impl ImportanceReport {
    fn from_raw(raw: Vec<f64>) -> Self {
        let max = raw.iter().copied().fold(0.0f64, f64::max);
        let scores: Vec<f64> = if max > 0.0 {
            raw.iter().map(|v| v * 100.0 / max).collect()
        } else {
            raw
        };
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        ImportanceReport { scores, ranking }
    }
}

/// Breiman-style variable importance of a fitted tree, surrogate credit
/// included. `rows` are the observations the per-node surrogate agreement
/// is measured on (normally the growing rows).
pub fn variable_importance(tree: &Tree, ds: &Dataset, rows: &[usize]) -> ImportanceReport {
    variable_importance_with(tree, ds, rows, ViMode::Surrogate)
}

/// Variable importance with an explicit credit mode.
///
/// Every internal node credits its own split variable with the split's
/// impurity decrease. In surrogate mode each other variable `j` is also
/// credited the impurity decrease achieved by its best surrogate split at
/// the node: the split on `j` maximizing agreement with the primary routing
/// (the fraction of node rows sent to the same side), provided it agrees
/// better than a fair coin. A surrogate's credit is its own decrease, so
/// a variable that merely shadows the routing without explaining the
/// response earns little.
pub fn variable_importance_with(
    tree: &Tree,
    ds: &Dataset,
    rows: &[usize],
    mode: ViMode,
) -> ImportanceReport {
    assert!(!tree.nodes.is_empty());
    let p = ds.p();
    let mut raw = vec![0.0f64; p];
    let per_node = tree.route_rows(ds, rows);
    for (id, node) in tree.nodes.iter().enumerate() {
        let Some(split) = &node.split else { continue };
        raw[split.var] += split.decrease;
        if mode == ViMode::PrimaryOnly {
            continue;
        }
        let node_rows = &per_node[id];
        if node_rows.len() < 2 {
            continue;
        }
        let left: Vec<bool> = node_rows
            .iter()
            .map(|&r| ds.x(r as usize, split.var) <= split.threshold)
            .collect();
        let total_right = left.iter().filter(|&&l| !l).count();
        for j in 0..p {
            if j == split.var {
                continue;
            }
            if let Some(surrogate) = best_surrogate(ds, node_rows, &left, total_right, j) {
                if 2 * surrogate.agree_count > node_rows.len() {
                    raw[j] += surrogate.decrease / tree.n_total as f64;
                }
            }
        }
    }
    ImportanceReport::from_raw(raw)
}

struct SurrogateSplit {
    agree_count: usize,
    /// Unnormalized impurity decrease of the surrogate split itself.
    decrease: f64,
}

/// The split on variable `j` most in agreement with the primary routing,
/// or `None` when `j` admits no split on these rows. Agreement ties keep
/// the smallest threshold.
fn best_surrogate(
    ds: &Dataset,
    node_rows: &[u32],
    primary_left: &[bool],
    total_right: usize,
    j: usize,
) -> Option<SurrogateSplit> {
    let n = node_rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        ds.x(node_rows[a] as usize, j)
            .total_cmp(&ds.x(node_rows[b] as usize, j))
            .then(node_rows[a].cmp(&node_rows[b]))
    });

    // Node-level response mass for the decrease of the surrogate cut.
    let framework = ds.framework();
    let (mut sum, mut sumsq) = (0.0f64, 0.0f64);
    for &i in &order {
        let y = ds.y(node_rows[i] as usize);
        sum += y;
        sumsq += y * y;
    }
    let total = n as f64;
    let parent_mass = match framework {
        Framework::Regression => (sumsq - sum * sum / total).max(0.0),
        Framework::Classification => {
            let c1 = sum;
            2.0 * (total - c1) * c1 / total
        }
    };

    let mut best: Option<(usize, f64)> = None;
    let mut left_agree = 0usize;
    let mut acc_count = 0.0f64;
    let mut acc_sum = 0.0f64;
    let mut acc_sumsq = 0.0f64;
    for k in 1..n {
        let prev = node_rows[order[k - 1]] as usize;
        if primary_left[order[k - 1]] {
            left_agree += 1;
        }
        let y = ds.y(prev);
        acc_count += 1.0;
        acc_sum += y;
        acc_sumsq += y * y;
        let here = ds.x(prev, j);
        let next = ds.x(node_rows[order[k]] as usize, j);
        if here == next {
            continue;
        }
        // Rows in the prefix go left: agreements are the primary-left rows
        // kept plus the primary-right rows pushed right.
        let agree = 2 * left_agree + total_right - k;
        if best.is_none_or(|(b, _)| agree > b) {
            let children_mass = match framework {
                Framework::Regression => {
                    let left = (acc_sumsq - acc_sum * acc_sum / acc_count).max(0.0);
                    let rc = total - acc_count;
                    let rs = sum - acc_sum;
                    let right = (sumsq - acc_sumsq - rs * rs / rc).max(0.0);
                    left + right
                }
                Framework::Classification => {
                    let l1 = acc_sum;
                    let r1 = sum - l1;
                    let rc = total - acc_count;
                    2.0 * (acc_count - l1) * l1 / acc_count + 2.0 * (rc - r1) * r1 / rc
                }
            };
            best = Some((agree, (parent_mass - children_mass).max(0.0)));
        }
    }
    best.map(|(agree_count, decrease)| SurrogateSplit {
        agree_count,
        decrease,
    })
}

/// The tree that importance is read from: grown on the growing rows, pruned
/// into its training-contrast chain, with the chain element minimizing the
/// hold-out contrast selected (ties go to the smaller subtree).
pub fn holdout_importance(
    ds: &Dataset,
    split: &SampleSplit,
    n_min: usize,
    mode: ViMode,
    seed: u64,
) -> ImportanceReport {
    let (grow_rows, val_rows) = importance_samples(split, seed);
    let fit = holdout_fit(ds, &grow_rows, &val_rows, &VariableSubset::full(ds.p()), n_min);
    let tree = fit.seq.subtree(fit.chain_index);
    variable_importance_with(&tree, ds, &grow_rows, mode)
}

/// Growing/validation rows backing the importance tree and the forward
/// tests: the first two sample parts under M1; under M2 a seeded 2:1 split
/// of the growing part (the derived-seed scheme keeps it reproducible).
fn importance_samples(split: &SampleSplit, seed: u64) -> (Vec<usize>, Vec<usize>) {
    match split.method {
        Method::M1 => (split.i1.clone(), split.i2.clone()),
        Method::M2 => {
            let rows = &split.i1;
            assert!(rows.len() >= 2, "M2 needs at least two growing rows");
            let mut perm = rows.clone();
            let mut rng =
                ChaCha8Rng::seed_from_u64(seeding::derive(seed, seeding::TAG_INTERNAL_SPLIT));
            perm.shuffle(&mut rng);
            let n_grow = (fmath::floor(perm.len() as f64 * 2.0 / 3.0 + 0.5) as usize)
                .clamp(1, perm.len() - 1);
            let mut grow = perm[..n_grow].to_vec();
            let mut val = perm[n_grow..].to_vec();
            grow.sort_unstable();
            val.sort_unstable();
            (grow, val)
        }
    }
}

struct HoldoutFit {
    seq: PrunedSequence,
    chain_index: usize,
    contrast: f64,
    /// Per-observation losses of the selected predictor on the validation
    /// rows.
    losses: Vec<f64>,
}

fn holdout_fit(
    ds: &Dataset,
    grow_rows: &[usize],
    val_rows: &[usize],
    subset: &VariableSubset,
    n_min: usize,
) -> HoldoutFit {
    let tree = grow_maximal(ds, grow_rows, subset, n_min);
    let seq = prune_sequence(&tree, ds, grow_rows);
    let mut best_k = 0;
    let mut best_c = f64::INFINITY;
    for k in 0..seq.len() {
        let c = empirical_contrast(|x| seq.predict_at(k, x), ds, val_rows);
        if c <= best_c {
            best_c = c;
            best_k = k;
        }
    }
    let losses = val_rows
        .iter()
        .map(|&r| {
            let d = ds.y(r) - seq.predict_at(best_k, ds.row(r));
            d * d
        })
        .collect();
    HoldoutFit {
        seq,
        chain_index: best_k,
        contrast: best_c,
        losses,
    }
}

/// Standard error of the hold-out improvement: the contrasts are means of
/// per-observation losses over the same rows, so the improvement is the
/// mean of paired loss differences and its standard error comes from them.
fn improvement_standard_error(before: &[f64], after: &[f64]) -> f64 {
    let m = before.len();
    debug_assert_eq!(m, after.len());
    if m < 2 {
        return 0.0;
    }
    let mean = before
        .iter()
        .zip(after)
        .map(|(b, a)| b - a)
        .sum::<f64>()
        / m as f64;
    let var = before
        .iter()
        .zip(after)
        .map(|(b, a)| {
            let d = b - a - mean;
            d * d
        })
        .sum::<f64>()
        / (m - 1) as f64;
    fmath::sqrt(var / m as f64)
}

/// Incremental-influence rule used by the forward construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum PstarTest {
    /// Accept when the hold-out contrast improves by more than one standard
    /// error of the improvement estimate (paired per-observation losses).
    OneSe,
    /// Accept when the observed improvement beats the improvement obtained
    /// with the candidate column permuted, at the given level.
    Permutation { b: usize, level: f64 },
}

impl Default for PstarTest {
    fn default() -> Self {
        PstarTest::OneSe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PstarConfig {
    pub n_min: usize,
    pub vi: ViMode,
    pub test: PstarTest,
    pub seed: u64,
}

/// One forward-test record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardStep {
    pub variable: usize,
    pub accepted: bool,
    pub contrast_before: f64,
    pub contrast_after: f64,
    /// One standard error, or the permutation p-value, depending on the rule.
    pub margin: f64,
    pub rule: String,
}

/// The nested family built by forward inclusion along the importance
/// ranking, with the per-candidate test log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetFamily {
    pub sets: Vec<VariableSubset>,
    pub provenance: Vec<ForwardStep>,
}

/// Builds the importance-driven nested family: the top-ranked variable
/// seeds the family, and each next-ranked variable joins the current set
/// when its addition improves the hold-out contrast by more than the
/// configured rule's margin; rejected variables are dropped for good.
///
/// Both implemented rules are stated interpretations of the incremental-
/// influence test (the `rule` field of each [`ForwardStep`] says which ran).
pub fn build_pstar(ds: &Dataset, split: &SampleSplit, config: &PstarConfig) -> SubsetFamily {
    let (grow_rows, val_rows) = importance_samples(split, config.seed);
    let full = VariableSubset::full(ds.p());
    let vi_fit = holdout_fit(ds, &grow_rows, &val_rows, &full, config.n_min);
    let vi_tree = vi_fit.seq.subtree(vi_fit.chain_index);
    let report = variable_importance_with(&vi_tree, ds, &grow_rows, config.vi);

    let rule_name = |t: &PstarTest| -> String {
        match t {
            PstarTest::OneSe => "one-standard-error (interpretation)".into(),
            PstarTest::Permutation { b, level } => {
                alloc::format!("permutation test, B={b}, level={level} (interpretation)")
            }
        }
    };

    let top = report.ranking[0];
    let mut current = VariableSubset::new([top]);
    let fit = holdout_fit(ds, &grow_rows, &val_rows, &current, config.n_min);
    let mut contrast = fit.contrast;
    let mut losses = fit.losses;
    let mut sets = vec![current.clone()];
    let mut provenance = vec![ForwardStep {
        variable: top,
        accepted: true,
        contrast_before: f64::INFINITY,
        contrast_after: contrast,
        margin: 0.0,
        rule: "top importance (always included)".into(),
    }];

    for &v in &report.ranking[1..] {
        let candidate = current.with(v);
        let cand_fit = holdout_fit(ds, &grow_rows, &val_rows, &candidate, config.n_min);
        let improvement = contrast - cand_fit.contrast;
        let (accepted, margin) = match config.test {
            PstarTest::OneSe => {
                let se = improvement_standard_error(&losses, &cand_fit.losses);
                (improvement > se, se)
            }
            PstarTest::Permutation { b, level } => {
                let p = permutation_pvalue(
                    ds,
                    &grow_rows,
                    &val_rows,
                    &candidate,
                    v,
                    config,
                    contrast,
                    improvement,
                    b,
                );
                (p <= level, p)
            }
        };
        provenance.push(ForwardStep {
            variable: v,
            accepted,
            contrast_before: contrast,
            contrast_after: cand_fit.contrast,
            margin,
            rule: rule_name(&config.test),
        });
        if accepted {
            current = candidate;
            contrast = cand_fit.contrast;
            losses = cand_fit.losses;
            sets.push(current.clone());
        }
    }
    SubsetFamily { sets, provenance }
}

/// Reference distribution for the improvement from adding `v`: the same
/// fit with `v`'s column shuffled over the rows in play, which severs its
/// tie to the response while preserving its marginal distribution.
#[allow(clippy::too_many_arguments)]
fn permutation_pvalue(
    ds: &Dataset,
    grow_rows: &[usize],
    val_rows: &[usize],
    candidate: &VariableSubset,
    v: usize,
    config: &PstarConfig,
    contrast_before: f64,
    observed: f64,
    b: usize,
) -> f64 {
    let mut used: Vec<usize> = grow_rows.iter().chain(val_rows).copied().collect();
    used.sort_unstable();
    let mut column: Vec<f64> = (0..ds.n()).map(|r| ds.x(r, v)).collect();
    let base = seeding::derive(config.seed, seeding::TAG_PERMUTATION);
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(base, v as u64 + 1));
    let mut exceed = 0usize;
    for _ in 0..b {
        let mut values: Vec<f64> = used.iter().map(|&r| column[r]).collect();
        values.shuffle(&mut rng);
        for (&r, &val) in used.iter().zip(&values) {
            column[r] = val;
        }
        let permuted = ds.with_column(v, &column);
        let fit = holdout_fit(&permuted, grow_rows, val_rows, candidate, config.n_min);
        if contrast_before - fit.contrast >= observed {
            exceed += 1;
        }
        for &r in &used {
            column[r] = ds.x(r, v);
        }
    }
    (1 + exceed) as f64 / (b + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_breiman, split_three, Framework, BREIMAN_NOISE_SD};
    use crate::tree::tests::small_ds;

    fn rows(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn single_informative_variable_scores_100() {
        let ds = gen_breiman(400, 21, BREIMAN_NOISE_SD).unwrap();
        let t = grow_maximal(&ds, &rows(400), &VariableSubset::full(10), 5);
        let report = variable_importance(&t, &ds, &rows(400));
        assert_eq!(report.scores.len(), 10);
        let max = report.scores.iter().copied().fold(0.0, f64::max);
        assert_eq!(max, 100.0);
        assert_eq!(report.ranking[0], 0, "the switching variable dominates");
        let mut sorted = report.ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn duplicated_column_gets_equal_score() {
        // Column 1 copies column 0; the surrogate credit must coincide.
        let col0: Vec<f64> = (0..60).map(|i| (i % 7) as f64).collect();
        let y: Vec<f64> = col0.iter().map(|v| (v * 1.3).sin() * 2.0 + v).collect();
        let ds = small_ds(&[&col0, &col0], &y, Framework::Regression);
        let t = grow_maximal(&ds, &rows(60), &VariableSubset::full(2), 5);
        let report = variable_importance(&t, &ds, &rows(60));
        assert!(
            (report.scores[0] - report.scores[1]).abs() <= 1e-9,
            "scores {:?}",
            report.scores
        );
    }

    #[test]
    fn unused_variable_scores_zero_in_primary_mode() {
        let col0 = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let col1 = [5.0, 5.0, 5.0, 5.0, 5.0, 5.0];
        let y = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let ds = small_ds(&[&col0, &col1], &y, Framework::Regression);
        let t = grow_maximal(&ds, &rows(6), &VariableSubset::full(2), 1);
        let report = variable_importance_with(&t, &ds, &rows(6), ViMode::PrimaryOnly);
        assert_eq!(report.scores[1], 0.0);
        assert_eq!(report.ranking, vec![0, 1]);
    }

    #[test]
    fn scores_invariant_under_monotone_transform() {
        let ds = gen_breiman(300, 22, BREIMAN_NOISE_SD).unwrap();
        let t = grow_maximal(&ds, &rows(300), &VariableSubset::full(10), 5);
        let before = variable_importance(&t, &ds, &rows(300));
        // Strictly increasing transform of an unused-ish column: order
        // statistics drive both the tree and the agreement counts.
        let transformed: Vec<f64> = (0..300).map(|i| ds.x(i, 8) * 3.0 + 7.0).collect();
        let ds2 = ds.with_column(8, &transformed);
        let t2 = grow_maximal(&ds2, &rows(300), &VariableSubset::full(10), 5);
        let after = variable_importance(&t2, &ds2, &rows(300));
        for j in 0..10 {
            assert!(
                (before.scores[j] - after.scores[j]).abs() <= 1e-9,
                "score {j} moved"
            );
        }
    }

    fn random_columns(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..p)
            .map(|_| (0..n).map(|_| rng.random_range(0..3u32) as f64 - 1.0).collect())
            .collect()
    }

    fn gauss(n: usize, seed: u64, sd: f64) -> Vec<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sd
            })
            .collect()
    }

    #[test]
    fn pstar_single_informative_variable() {
        // Only column 0 matters; everything else is noise, so the family
        // stops at the singleton.
        let n = 240;
        let cols = random_columns(n, 3, 41);
        let noise = gauss(n, 42, 0.5);
        let y: Vec<f64> = (0..n).map(|i| cols[0][i] * 10.0 + noise[i]).collect();
        let ds = small_ds(&[&cols[0], &cols[1], &cols[2]], &y, Framework::Regression);
        let split = split_three(&ds, (0.5, 0.25, 0.25), 5, Method::M1).unwrap();
        let config = PstarConfig {
            n_min: 5,
            vi: ViMode::Surrogate,
            test: PstarTest::OneSe,
            seed: 5,
        };
        let family = build_pstar(&ds, &split, &config);
        assert_eq!(family.sets.len(), 1, "{:?}", family.provenance);
        assert_eq!(family.sets[0], VariableSubset::new([0]));
        assert_eq!(family.provenance.len(), 3);
    }

    #[test]
    fn pstar_all_informative_distinct_effects() {
        // Three variables with well-separated additive effects: the family
        // must be the three nested prefixes.
        let n = 600;
        let cols = random_columns(n, 3, 43);
        let noise = gauss(n, 44, 0.4);
        let y: Vec<f64> = (0..n)
            .map(|i| 9.0 * cols[0][i] + 4.0 * cols[1][i] + 1.5 * cols[2][i] + noise[i])
            .collect();
        let ds = small_ds(&[&cols[0], &cols[1], &cols[2]], &y, Framework::Regression);
        let split = split_three(&ds, (0.5, 0.25, 0.25), 8, Method::M1).unwrap();
        let config = PstarConfig {
            n_min: 5,
            vi: ViMode::Surrogate,
            test: PstarTest::OneSe,
            seed: 8,
        };
        let family = build_pstar(&ds, &split, &config);
        assert_eq!(family.sets.len(), 3, "family: {:?}", family.sets);
        for (i, set) in family.sets.iter().enumerate() {
            assert_eq!(set.len(), i + 1);
            if i > 0 {
                let prev = &family.sets[i - 1];
                assert!(prev.members().iter().all(|m| set.contains(*m)));
            }
        }
    }

    #[test]
    fn pstar_nesting_invariant_on_benchmark() {
        let ds = gen_breiman(500, 3, BREIMAN_NOISE_SD).unwrap();
        for method in [Method::M1, Method::M2] {
            let fractions = crate::selection::default_fractions(method);
            let split = split_three(&ds, fractions, 3, method).unwrap();
            let config = PstarConfig {
                n_min: 5,
                vi: ViMode::Surrogate,
                test: PstarTest::OneSe,
                seed: 3,
            };
            let family = build_pstar(&ds, &split, &config);
            assert!(!family.sets.is_empty() && family.sets.len() <= 10);
            for (i, set) in family.sets.iter().enumerate() {
                assert_eq!(set.len(), i + 1, "each member adds exactly one variable");
                if i > 0 {
                    assert!(family.sets[i - 1]
                        .members()
                        .iter()
                        .all(|m| set.contains(*m)));
                }
            }
        }
    }

    #[test]
    fn permutation_rule_rejects_pure_noise() {
        let n = 300;
        let col0: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let col1: Vec<f64> = (0..n).map(|i| ((i * 13 + 5) % 7) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| col0[i] * 8.0 + ((i * 29 + 11) % 13) as f64 * 0.05).collect();
        let ds = small_ds(&[&col0, &col1], &y, Framework::Regression);
        let split = split_three(&ds, (0.5, 0.25, 0.25), 9, Method::M1).unwrap();
        let config = PstarConfig {
            n_min: 5,
            vi: ViMode::Surrogate,
            test: PstarTest::Permutation { b: 99, level: 0.05 },
            seed: 9,
        };
        let family = build_pstar(&ds, &split, &config);
        assert_eq!(family.sets.last().unwrap().len(), 1, "{:?}", family.provenance);
    }
}

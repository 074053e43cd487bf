//! Penalized selection of a (variable subset, pruned subtree) pair, the
//! (alpha, beta) estimator grid, and the final hold-out choice.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DataError, Framework, Method, SampleSplit};
use crate::fmath;
use crate::importance::{self, PstarConfig, PstarTest, SubsetFamily, ViMode};
use crate::prune::{prune_sequence, PrunedSequence};
use crate::tree::{grow_maximal, refit_leaves, Tree, VariableSubset};
use crate::BTreeMap;

/// Constants of the theoretical penalties: noise scale `sigma2`, moment
/// constant `rho`, sup-norm bound `sup_bound` for `R`, and the
/// classification margin `margin` for `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalConstants {
    pub sigma2: f64,
    pub rho: f64,
    pub sup_bound: f64,
    pub margin: f64,
}

/// Everything needed to evaluate the penalty of a `(M, T)` pair. In
/// practical mode (`theoretical` absent) the unknown framework constants
/// are folded into `alpha` and `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub framework: Framework,
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    /// `n_2` under M1, `n_1` under M2.
    pub n_eff: usize,
    pub p: usize,
    pub theoretical: Option<TheoreticalConstants>,
}

impl PenaltySpec {
    pub fn practical(
        framework: Framework,
        method: Method,
        alpha: f64,
        beta: f64,
        n_eff: usize,
        p: usize,
    ) -> Self {
        assert!(n_eff >= 1 && p >= 1);
        PenaltySpec {
            framework,
            method,
            alpha,
            beta,
            n_eff,
            p,
            theoretical: None,
        }
    }

    pub fn with_constants(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    /// Framework/method multiplier applied to both penalty terms in
    /// theoretical mode; 1 in practical mode.
    fn multiplier(&self) -> f64 {
        match (&self.theoretical, self.framework) {
            (None, _) => 1.0,
            (Some(t), Framework::Classification) => {
                assert!(t.margin > 0.0, "classification penalties need a positive margin");
                1.0 / t.margin
            }
            (Some(t), Framework::Regression) => match self.method {
                Method::M1 => t.sigma2 + t.rho * t.sup_bound,
                Method::M2 => {
                    let log_ratio = fmath::ln(self.n_eff as f64 / self.p as f64);
                    let ratio4 = (t.rho * t.rho / t.sigma2) * (t.rho * t.rho / t.sigma2);
                    t.sigma2 * (1.0 + ratio4 * log_ratio * log_ratio) + t.rho * t.sup_bound
                }
            },
        }
    }

    /// Coefficient of `|T|` in the penalty: the per-leaf price handed to
    /// the pruning chain. Under M2 it carries the extra
    /// `1 + (|M|+1)(1 + log(n_eff/(|M|+1)))` factor.
    pub fn tree_coefficient(&self, m_size: usize) -> f64 {
        assert!(m_size >= 1 && m_size <= self.p, "subset size out of range");
        let base = self.alpha / self.n_eff as f64;
        let factor = match self.method {
            Method::M1 => 1.0,
            Method::M2 => {
                let m1 = (m_size + 1) as f64;
                1.0 + m1 * (1.0 + fmath::ln(self.n_eff as f64 / m1))
            }
        };
        self.multiplier() * base * factor
    }

    /// The variable-selection term `beta * |M| (1 + log(p/|M|)) / n_eff`.
    pub fn subset_term(&self, m_size: usize) -> f64 {
        assert!(m_size >= 1 && m_size <= self.p, "subset size out of range");
        self.multiplier() * self.beta * subset_complexity(m_size, self.p) / self.n_eff as f64
    }
}

/// The subset complexity `f(m) = m (1 + log(p/m))`, strictly increasing in
/// `m` on `[1, p]`.
pub fn subset_complexity(m_size: usize, p: usize) -> f64 {
    m_size as f64 * (1.0 + fmath::ln(p as f64 / m_size as f64))
}

/// Penalty of a model with `m_size` variables and `t_size` leaves.
pub fn penalty_value(spec: &PenaltySpec, m_size: usize, t_size: usize) -> f64 {
    assert!(t_size >= 1, "tree size out of range");
    spec.tree_coefficient(m_size) * t_size as f64 + spec.subset_term(m_size)
}

/// First selection step: the chain element minimizing
/// `contrast + tree_coefficient * |T|`, i.e. `subtree_at` evaluated at the
/// penalty's per-leaf coefficient.
pub fn select_tree(seq: &PrunedSequence, spec: &PenaltySpec, m_size: usize) -> Tree {
    seq.subtree(select_index(seq, spec, m_size))
}

pub(crate) fn select_index(seq: &PrunedSequence, spec: &PenaltySpec, m_size: usize) -> usize {
    seq.index_at(spec.tree_coefficient(m_size))
}

/// Grows, refits and prunes one tree per subset: growing always happens on
/// the first sample part; under M1 leaves are refit on the second part and
/// the chain is taken against it, under M2 the chain is taken against the
/// growing part itself.
pub fn build_collection(
    ds: &Dataset,
    split: &SampleSplit,
    subsets: &[VariableSubset],
    n_min: usize,
) -> BTreeMap<VariableSubset, PrunedSequence> {
    assert!(!subsets.is_empty(), "empty subset collection");
    let jobs: Vec<VariableSubset> = subsets.to_vec();
    let entries = crate::ordered_map(jobs, |subset| {
        let grown = grow_maximal(ds, &split.i1, &subset, n_min);
        let seq = match split.method {
            Method::M1 => {
                let refit = refit_leaves(&grown, ds, &split.i2);
                prune_sequence(&refit, ds, &split.i2)
            }
            Method::M2 => prune_sequence(&grown, ds, &split.i1),
        };
        (subset, seq)
    });
    entries.into_iter().collect()
}

/// Second selection step: for each subset, `select_tree`, then pick the
/// subset minimizing `contrast + penalty`. Exact ties go to the smaller
/// subset, then the smaller tree, then lexicographic subset order.
pub fn select_model(
    collection: &BTreeMap<VariableSubset, PrunedSequence>,
    spec: &PenaltySpec,
) -> (VariableSubset, Tree) {
    let (subset, k, _) = select_model_indexed(collection, spec);
    let tree = collection[&subset].subtree(k);
    (subset, tree)
}

pub(crate) fn select_model_indexed(
    collection: &BTreeMap<VariableSubset, PrunedSequence>,
    spec: &PenaltySpec,
) -> (VariableSubset, usize, f64) {
    assert!(!collection.is_empty(), "empty collection");
    let mut best: Option<(f64, usize, usize, &VariableSubset, usize)> = None;
    for (subset, seq) in collection {
        let m = subset.len();
        let k = select_index(seq, spec, m);
        let t_size = seq.leaf_counts()[k];
        let crit = seq.risks()[k] + penalty_value(spec, m, t_size);
        let key = (m, t_size, subset);
        let better = match &best {
            None => true,
            Some((c, bm, bt, bs, _)) => crit < *c || (crit == *c && key < (*bm, *bt, bs)),
        };
        if better {
            best = Some((crit, m, t_size, subset, k));
        }
    }
    let (crit, _, _, subset, k) = best.unwrap();
    (subset.clone(), k, crit)
}

/// One selected model of the estimator family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistinctModel {
    pub subset: VariableSubset,
    /// Index into the subset's pruning chain.
    pub chain_index: usize,
    pub n_leaves: usize,
    pub tree: Tree,
}

/// One cell of the (alpha, beta) grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    /// Index into [`EstimatorFamily::models`].
    pub model: usize,
}

/// The family `G` of estimators selected over the penalty-constant grid,
/// deduplicated into `K` distinct models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorFamily {
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Ordered by (alpha index, beta index).
    pub cells: Vec<GridCell>,
    pub models: Vec<DistinctModel>,
}

impl EstimatorFamily {
    /// The cardinal `K` of the family.
    pub fn k_distinct(&self) -> usize {
        self.models.len()
    }
}

/// Runs the two-step selection at every grid pair and deduplicates the
/// selected `(M, T)` models.
pub fn grid_select(
    collection: &BTreeMap<VariableSubset, PrunedSequence>,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    base: &PenaltySpec,
) -> EstimatorFamily {
    assert!(!alpha_grid.is_empty() && !beta_grid.is_empty(), "empty grid");
    assert!(
        alpha_grid.iter().chain(beta_grid).all(|v| *v >= 0.0 && v.is_finite()),
        "grid values must be nonnegative"
    );
    let mut cells = Vec::with_capacity(alpha_grid.len() * beta_grid.len());
    let mut dedup: BTreeMap<(VariableSubset, usize), usize> = BTreeMap::new();
    let mut models = Vec::new();
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            let spec = base.clone().with_constants(alpha, beta);
            let (subset, k, _) = select_model_indexed(collection, &spec);
            let id = *dedup.entry((subset.clone(), k)).or_insert_with(|| {
                let seq = &collection[&subset];
                models.push(DistinctModel {
                    subset: subset.clone(),
                    chain_index: k,
                    n_leaves: seq.leaf_counts()[k],
                    tree: seq.subtree(k),
                });
                models.len() - 1
            });
            cells.push(GridCell { alpha, beta, model: id });
        }
    }
    EstimatorFamily {
        alpha_grid: alpha_grid.to_vec(),
        beta_grid: beta_grid.to_vec(),
        cells,
        models,
    }
}

/// The winning grid pair and model, with the per-cell map kept for
/// reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChosenModel {
    pub alpha: f64,
    pub beta: f64,
    pub subset: VariableSubset,
    pub tree: Tree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMapEntry {
    pub alpha: f64,
    pub beta: f64,
    pub subset: VariableSubset,
    pub n_leaves: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: ChosenModel,
    pub holdout_risk: f64,
    pub grid_map: Vec<GridMapEntry>,
    #[serde(rename = "K")]
    pub k_distinct: usize,
}

/// Final selection: evaluates every distinct model on the test part and
/// returns the minimizer (ties to the smaller subset, then smaller tree).
/// The reported `(alpha, beta)` is the smallest grid pair mapping to the
/// winner; the full preimage can be read off `grid_map`.
pub fn final_holdout(
    family: &EstimatorFamily,
    ds: &Dataset,
    split: &SampleSplit,
) -> SelectionResult {
    assert!(!split.i3.is_empty(), "final selection needs a test part");
    assert!(!family.models.is_empty(), "empty estimator family");
    let risks: Vec<f64> = family
        .models
        .iter()
        .map(|m| m.tree.contrast(ds, &split.i3))
        .collect();
    let mut winner = 0usize;
    for id in 1..family.models.len() {
        let (a, b) = (&family.models[id], &family.models[winner]);
        let key = (risks[id], a.subset.len(), a.n_leaves, &a.subset, a.chain_index);
        let best = (
            risks[winner],
            b.subset.len(),
            b.n_leaves,
            &b.subset,
            b.chain_index,
        );
        if key.0 < best.0 || (key.0 == best.0 && (key.1, key.2, key.3, key.4) < (best.1, best.2, best.3, best.4)) {
            winner = id;
        }
    }
    let cell = family
        .cells
        .iter()
        .find(|c| c.model == winner)
        .expect("winner has a grid preimage");
    let model = &family.models[winner];
    SelectionResult {
        chosen: ChosenModel {
            alpha: cell.alpha,
            beta: cell.beta,
            subset: model.subset.clone(),
            tree: model.tree.clone(),
        },
        holdout_risk: risks[winner],
        grid_map: family
            .cells
            .iter()
            .map(|c| GridMapEntry {
                alpha: c.alpha,
                beta: c.beta,
                subset: family.models[c.model].subset.clone(),
                n_leaves: family.models[c.model].n_leaves,
            })
            .collect(),
        k_distinct: family.k_distinct(),
    }
}

/// Which subsets the selection ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// All `2^p - 1` nonempty subsets (guarded by `exhaustive_cap`).
    Exhaustive,
    /// The nested family built from the variable-importance ranking.
    Pstar,
}

/// Default alpha grid (coefficients of `|T|/n_eff`).
pub const DEFAULT_ALPHA_GRID: [f64; 13] = [
    0.0, 0.01, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 5.0, 12.0, 30.0, 60.0, 120.0,
];

/// Default beta grid (coefficients of `|M|(1+log(p/|M|))/n_eff`).
pub const DEFAULT_BETA_GRID: [f64; 10] = [
    0.0, 10.0, 50.0, 100.0, 300.0, 700.0, 1300.0, 1700.0, 1900.0, 2500.0,
];

/// Default growing stop rule: 5 observations per child for regression,
/// none beyond node purity for classification.
pub fn default_n_min(framework: Framework) -> usize {
    match framework {
        Framework::Regression => 5,
        Framework::Classification => 1,
    }
}

/// Theoretical growing stop rule for regression under M1:
/// `N_min >= 24 rho^2 / sigma^2 * log(n2)`.
pub fn theoretical_n_min(sigma2: f64, rho: f64, n2: usize) -> usize {
    assert!(sigma2 > 0.0);
    let bound = 24.0 * rho * rho / sigma2 * fmath::ln(n2 as f64);
    bound.max(1.0) as usize + usize::from(bound > bound as usize as f64)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectionError {
    #[error(
        "exhaustive mode over p={p} variables needs 2^{p} trees; \
         refusing above the cap of {cap} (use the force flag to override)"
    )]
    ExhaustiveCap { p: usize, cap: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Full configuration of one selection run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub mode: SelectionMode,
    pub fractions: (f64, f64, f64),
    pub seed: u64,
    pub n_min: usize,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub theoretical: Option<TheoreticalConstants>,
    /// Regression only: multiply the practical penalty by the residual mean
    /// square of the maximal tree on the full variable set.
    pub sigma2_plugin: bool,
    pub vi: ViMode,
    pub pstar_test: PstarTest,
    pub exhaustive_cap: usize,
    pub force_exhaustive: bool,
}

impl RunConfig {
    pub fn new(framework: Framework, method: Method, seed: u64) -> Self {
        RunConfig {
            method,
            mode: SelectionMode::Exhaustive,
            fractions: default_fractions(method),
            seed,
            n_min: default_n_min(framework),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            beta_grid: DEFAULT_BETA_GRID.to_vec(),
            theoretical: None,
            sigma2_plugin: false,
            vi: ViMode::Surrogate,
            pstar_test: PstarTest::OneSe,
            exhaustive_cap: 20,
            force_exhaustive: false,
        }
    }

    fn pstar_config(&self) -> PstarConfig {
        PstarConfig {
            n_min: self.n_min,
            vi: self.vi,
            test: self.pstar_test,
            seed: self.seed,
        }
    }
}

pub fn default_fractions(method: Method) -> (f64, f64, f64) {
    match method {
        Method::M1 => (0.5, 0.25, 0.25),
        Method::M2 => (0.75, 0.0, 0.25),
    }
}

/// Everything a run produces beyond the bare [`SelectionResult`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub result: SelectionResult,
    pub importance: importance::ImportanceReport,
    pub pstar: Option<SubsetFamily>,
    /// Number of candidate subsets actually processed.
    pub n_subsets: usize,
}

/// Runs the whole procedure: split, candidate subsets (exhaustive or from
/// the importance-driven family), per-subset chains, grid selection and the
/// final hold-out. Deterministic given the configuration.
pub fn run_procedure(ds: &Dataset, config: &RunConfig) -> Result<SelectionResult, SelectionError> {
    run_procedure_full(ds, config).map(|out| out.result)
}

pub fn run_procedure_full(ds: &Dataset, config: &RunConfig) -> Result<RunOutput, SelectionError> {
    run_procedure_traced(ds, config).map(|(out, _, _)| out)
}

/// Like [`run_procedure_full`] but also hands back the estimator family and
/// the sample split, for callers that audit the final selection.
pub fn run_procedure_traced(
    ds: &Dataset,
    config: &RunConfig,
) -> Result<(RunOutput, EstimatorFamily, SampleSplit), SelectionError> {
    let split = crate::data::split_three(
        ds,
        config.fractions,
        crate::seeding::derive(config.seed, crate::seeding::TAG_SPLIT),
        config.method,
    )?;

    let vi_report =
        importance::holdout_importance(ds, &split, config.n_min, config.vi, config.seed);
    let (subsets, pstar) = match config.mode {
        SelectionMode::Exhaustive => {
            if ds.p() > config.exhaustive_cap && !config.force_exhaustive {
                return Err(SelectionError::ExhaustiveCap {
                    p: ds.p(),
                    cap: config.exhaustive_cap,
                });
            }
            (VariableSubset::all_nonempty(ds.p()), None)
        }
        SelectionMode::Pstar => {
            let family = importance::build_pstar(ds, &split, &config.pstar_config());
            (family.sets.clone(), Some(family))
        }
    };

    let collection = build_collection(ds, &split, &subsets, config.n_min);
    let mut base = PenaltySpec::practical(
        ds.framework(),
        config.method,
        0.0,
        0.0,
        split.n_eff(),
        ds.p(),
    );
    base.theoretical = config.theoretical;
    if base.theoretical.is_none() && config.sigma2_plugin {
        assert_eq!(
            ds.framework(),
            Framework::Regression,
            "the sigma^2 plug-in applies to regression only"
        );
        let full = grow_maximal(ds, &split.i1, &VariableSubset::full(ds.p()), config.n_min);
        let sigma2 = full.contrast(ds, &split.i1).max(f64::MIN_POSITIVE);
        base.theoretical = Some(TheoreticalConstants {
            sigma2,
            rho: 0.0,
            sup_bound: 0.0,
            margin: 1.0,
        });
    }

    let family = grid_select(&collection, &config.alpha_grid, &config.beta_grid, &base);
    let result = final_holdout(&family, ds, &split);
    let out = RunOutput {
        result,
        importance: vi_report,
        pstar,
        n_subsets: subsets.len(),
    };
    Ok((out, family, split))
}

/// Human-readable subset rendering (variable names joined by commas) used
/// by reports.
pub fn subset_names(subset: &VariableSubset, names: &[String]) -> String {
    let mut out = String::from("{");
    for (i, &j) in subset.members().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&names[j]);
    }
    out.push('}');
    out
}

//! Column-generation driver: the baseline loop, the data-collection variant
//! that labels arcs used by generated columns, the reduced-network heuristic
//! with eta-threshold switching, and the non-ML arc-selection strategies.
//!
//! Every run terminates with a full-network pricing call that produces no
//! columns, so the final objective is LP-optimal regardless of how
//! aggressively earlier iterations pruned the network.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::learn::{predict_mask, TrainedModel};
use crate::net::{reduce_network, Network};
use crate::pricing::{price_arcs, solve_pricing, PricedArc, PricingLimits};
use crate::rmp::{init_rmp, Column, LpError, LpSolution, RmpState};
use crate::seed::rng_for;
use rand::Rng;

/// Sentinel level meaning "no per-node arc limit".
pub const UNLIMITED: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Baseline,
    MlS,
    RandomS,
    CostS,
    RedcostS,
    MlRedcostS,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Baseline,
        Strategy::MlS,
        Strategy::RandomS,
        Strategy::CostS,
        Strategy::RedcostS,
        Strategy::MlRedcostS,
    ];

    pub fn needs_model(self) -> bool {
        matches!(self, Strategy::MlS | Strategy::MlRedcostS)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Baseline => "baseline",
            Strategy::MlS => "ml_s",
            Strategy::RandomS => "random_s",
            Strategy::CostS => "cost_s",
            Strategy::RedcostS => "redcost_s",
            Strategy::MlRedcostS => "ml_redcost_s",
        })
    }
}

impl FromStr for Strategy {
    type Err = CgError;

    fn from_str(s: &str) -> Result<Strategy, CgError> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "ml_s" => Ok(Strategy::MlS),
            "random_s" => Ok(Strategy::RandomS),
            "cost_s" => Ok(Strategy::CostS),
            "redcost_s" => Ok(Strategy::RedcostS),
            "ml_redcost_s" => Ok(Strategy::MlRedcostS),
            other => Err(CgError::BadConfig(format!(
                "unknown strategy {other:?}; expected one of baseline, ml_s, random_s, cost_s, redcost_s, ml_redcost_s"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgConfig {
    pub strategy: Strategy,
    /// Leave the reduced network when it generates fewer columns than this.
    pub eta_min: usize,
    /// Return to the reduced network when the full one generates at least
    /// this many columns.
    pub eta_max: usize,
    /// Make the first switch away from the reduced network permanent.
    pub disable_reduced_after_first_failure: bool,
    /// Per-node arc budgets for reduced-cost filtering, strictly increasing
    /// and ending in [`UNLIMITED`]; a failed level escalates to the next
    /// within the same iteration.
    pub redcost_levels: Vec<usize>,
    pub max_columns_per_iter: usize,
    pub rng_seed: u64,
    /// Fraction of selectable arcs kept by random_s / cost_s when no model
    /// supplies a reference count.
    pub keep_fraction: f64,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            strategy: Strategy::Baseline,
            eta_min: 30,
            eta_max: 100,
            disable_reduced_after_first_failure: true,
            redcost_levels: vec![10, 20, UNLIMITED],
            max_columns_per_iter: 200,
            rng_seed: 0,
            keep_fraction: 0.5,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<(), CgError> {
        if self.eta_min < 1 {
            return Err(CgError::BadConfig(
                "eta_min must be at least 1 or an empty reduced iteration never switches".into(),
            ));
        }
        if self.eta_min > self.eta_max {
            return Err(CgError::BadConfig(format!(
                "eta_min {} exceeds eta_max {}",
                self.eta_min, self.eta_max
            )));
        }
        if self.redcost_levels.is_empty() || *self.redcost_levels.last().unwrap() != UNLIMITED {
            return Err(CgError::BadConfig(
                "redcost_levels must end with the unlimited level".into(),
            ));
        }
        if self.redcost_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CgError::BadConfig(
                "redcost_levels must be strictly increasing".into(),
            ));
        }
        if self.redcost_levels[0] == 0 {
            return Err(CgError::BadConfig("a redcost level of 0 keeps nothing".into()));
        }
        if self.max_columns_per_iter < 1 {
            return Err(CgError::BadConfig("max_columns_per_iter must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.keep_fraction) {
            return Err(CgError::BadConfig(format!(
                "keep_fraction {} outside [0, 1]",
                self.keep_fraction
            )));
        }
        Ok(())
    }
}

/// Parses a level list like "10,20,inf" ("unlimited" and "none" also read
/// as the unlimited level).
pub fn parse_levels(text: &str) -> Result<Vec<usize>, CgError> {
    let mut levels = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let level = match part {
            "inf" | "unlimited" | "none" => UNLIMITED,
            _ => part.parse::<usize>().map_err(|_| {
                CgError::BadConfig(format!("bad redcost level {part:?}; expected a count or inf"))
            })?,
        };
        levels.push(level);
    }
    Ok(levels)
}

/// Formats levels back into the "10,20,inf" form.
pub fn format_levels(levels: &[usize]) -> String {
    levels
        .iter()
        .map(|&l| {
            if l == UNLIMITED {
                "inf".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetTag {
    Full,
    Reduced,
}

impl fmt::Display for NetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetTag::Full => "full",
            NetTag::Reduced => "reduced",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Network of the iteration's final pricing call. `Full` means the
    /// literal complete network: no static reduction and no level cap.
    pub network: NetTag,
    pub columns: usize,
    pub labels: usize,
    /// Pricing phase: dual application, per-iteration filtering, labeling.
    pub pp_seconds: f64,
    /// The LP solve that produced this iteration's duals.
    pub rmp_seconds: f64,
    /// RMP objective after this iteration's columns were added and the LP
    /// reoptimized; unchanged from the previous value when nothing was
    /// added.
    pub objective: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub iterations: usize,
    pub full_network_iterations: usize,
    pub pp_seconds: f64,
    pub rmp_seconds: f64,
    pub total_seconds: f64,
    pub per_iteration: Vec<IterRecord>,
}

#[derive(Debug)]
pub struct CgOutcome {
    pub solution: LpSolution,
    pub stats: RunStats,
    /// Final restricted master, pool and basis included, for inspection and
    /// warm restarts.
    pub rmp: RmpState,
}

#[derive(Debug, Error)]
pub enum CgError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("strategy {0} requires a trained model")]
    ModelRequired(Strategy),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("model: {0}")]
    Model(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl From<crate::learn::TrainError> for CgError {
    fn from(e: crate::learn::TrainError) -> CgError {
        CgError::Model(e.to_string())
    }
}

/// Standard column generation over the complete network.
pub fn run_baseline(net: &Network, cfg: &CgConfig) -> Result<CgOutcome, CgError> {
    cfg.validate()?;
    if cfg.strategy != Strategy::Baseline {
        return Err(CgError::BadConfig(format!(
            "run_baseline called with strategy {}",
            cfg.strategy
        )));
    }
    drive(net, cfg, None, &[UNLIMITED], None)
}

/// Baseline trajectory that additionally labels every arc appearing on any
/// generated column. The singleton seed columns never set labels; a y of
/// all zeros means pricing produced nothing.
pub fn run_collect(net: &Network, cfg: &CgConfig) -> Result<(CgOutcome, Vec<bool>), CgError> {
    cfg.validate()?;
    let mut y = vec![false; net.arcs.len()];
    let outcome = drive(net, cfg, None, &[UNLIMITED], Some(&mut y))?;
    Ok((outcome, y))
}

/// Reduced-network heuristic: price on `reduce_network(net, keep)` until it
/// underdelivers (fewer than `eta_min` columns), then on the full network,
/// returning once the full network overdelivers (`eta_max` or more) unless
/// the first failure permanently disabled the reduced network. Terminates
/// only when the full network generates nothing.
///
/// With strategy `ml_redcost_s`, reduced-cost level filtering additionally
/// applies to whichever network is active each iteration.
pub fn run_ml(net: &Network, cfg: &CgConfig, keep: &[bool]) -> Result<CgOutcome, CgError> {
    cfg.validate()?;
    if keep.len() != net.arcs.len() {
        return Err(CgError::BadConfig(format!(
            "keep mask has {} entries for {} arcs",
            keep.len(),
            net.arcs.len()
        )));
    }
    let levels: &[usize] = if cfg.strategy == Strategy::MlRedcostS {
        &cfg.redcost_levels
    } else {
        &[UNLIMITED]
    };
    let reduced = reduce_network(net, keep);
    drive(net, cfg, Some(reduced), levels, None)
}

/// Pure per-iteration reduced-cost filtering over the full network, with
/// in-iteration escalation through `cfg.redcost_levels`.
pub fn run_redcost(net: &Network, cfg: &CgConfig) -> Result<CgOutcome, CgError> {
    cfg.validate()?;
    if cfg.strategy != Strategy::RedcostS {
        return Err(CgError::BadConfig(format!(
            "run_redcost called with strategy {}",
            cfg.strategy
        )));
    }
    drive(net, cfg, None, &cfg.redcost_levels, None)
}

/// Dispatches an instance to the configured strategy, deriving the arc
/// selection (model mask, random mask, or cheapest-cost mask) as needed.
pub fn solve_instance(
    net: &Network,
    cfg: &CgConfig,
    model: Option<&TrainedModel>,
) -> Result<CgOutcome, CgError> {
    cfg.validate()?;
    match cfg.strategy {
        Strategy::Baseline => run_baseline(net, cfg),
        Strategy::RedcostS => run_redcost(net, cfg),
        Strategy::MlS | Strategy::MlRedcostS => {
            let model = model.ok_or(CgError::ModelRequired(cfg.strategy))?;
            let keep = predict_mask(model, net)?;
            run_ml(net, cfg, &keep)
        }
        Strategy::RandomS => {
            let count = reference_keep_count(net, cfg, model)?;
            let selectable = net.selectable_arc_ids();
            let compact = select_random(
                count,
                selectable.len(),
                crate::seed::derive_seed(cfg.rng_seed, "random-mask", 0),
            );
            run_ml(net, cfg, &expand_mask(net, &compact))
        }
        Strategy::CostS => {
            let count = reference_keep_count(net, cfg, model)?;
            let keep = select_cost(net, count);
            run_ml(net, cfg, &keep)
        }
    }
}

/// How many selectable arcs random_s / cost_s should keep: the model's own
/// keep count when a model is given (the selection is a control for it),
/// otherwise `keep_fraction` of the selectable arcs.
fn reference_keep_count(
    net: &Network,
    cfg: &CgConfig,
    model: Option<&TrainedModel>,
) -> Result<usize, CgError> {
    let selectable = net.selectable_arc_ids();
    match model {
        Some(m) => {
            let mask = predict_mask(m, net)?;
            Ok(selectable.iter().filter(|&&a| mask[a]).count())
        }
        None => Ok((cfg.keep_fraction * selectable.len() as f64).round() as usize),
    }
}

/// Uniformly random mask over the selectable arcs with exactly `keep_count`
/// entries set, by partial Fisher-Yates.
pub fn select_random(keep_count: usize, arc_count: usize, seed: u64) -> Vec<bool> {
    assert!(keep_count <= arc_count, "keep_count exceeds arc count");
    let mut rng = rng_for(seed, "select-random", 0);
    let mut ids: Vec<usize> = (0..arc_count).collect();
    for k in 0..keep_count {
        let j = rng.gen_range(k..arc_count);
        ids.swap(k, j);
    }
    let mut mask = vec![false; arc_count];
    for &i in &ids[..keep_count] {
        mask[i] = true;
    }
    mask
}

/// Expands a mask over `selectable_arc_ids()` positions to a full-length
/// arc mask (depot-incident arcs false; reduction re-adds them).
pub fn expand_mask(net: &Network, compact: &[bool]) -> Vec<bool> {
    let ids = net.selectable_arc_ids();
    assert_eq!(compact.len(), ids.len(), "compact mask length != selectable count");
    let mut full = vec![false; net.arcs.len()];
    for (&arc_id, &keep) in ids.iter().zip(compact) {
        full[arc_id] = keep;
    }
    full
}

/// Static cheapest-arc selection: every node ranks its selectable incoming
/// and outgoing arcs by cost, and the smallest uniform per-node quota whose
/// union reaches `target_count` decides the mask.
pub fn select_cost(net: &Network, target_count: usize) -> Vec<bool> {
    let min_rank = group_min_ranks(net, |arc_id| net.arcs[arc_id].cost);
    quota_mask(net, &min_rank, target_count)
}

/// Per-iteration reduced-cost filter: keep each node's `level` lowest
/// modified-cost selectable arcs in each direction.
pub fn redcost_mask(net: &Network, priced: &[PricedArc], level: usize) -> Vec<bool> {
    assert_eq!(priced.len(), net.arcs.len());
    if level == UNLIMITED {
        return vec![true; net.arcs.len()];
    }
    let rank = group_min_ranks(net, |arc_id| priced[arc_id].modified_cost);
    let mut mask = vec![false; net.arcs.len()];
    for (arc_id, r) in rank.iter().enumerate() {
        if let Some(r) = r {
            mask[arc_id] = *r < level;
        }
    }
    mask
}

/// For each selectable arc, its best rank across its two groups (tail's
/// outgoing and head's incoming, both sorted by `key` then arc id).
/// `None` for non-selectable arcs.
fn group_min_ranks(net: &Network, key: impl Fn(usize) -> f64) -> Vec<Option<usize>> {
    let mut min_rank: Vec<Option<usize>> = vec![None; net.arcs.len()];
    let mut rank_group = |ids: &[usize]| {
        let mut group: Vec<usize> = ids
            .iter()
            .copied()
            .filter(|&a| net.is_selectable(a))
            .collect();
        group.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        for (r, &a) in group.iter().enumerate() {
            min_rank[a] = Some(min_rank[a].map_or(r, |prev: usize| prev.min(r)));
        }
    };
    for node in 0..net.nodes.len() {
        rank_group(&net.out_arcs[node]);
        rank_group(&net.in_arcs[node]);
    }
    min_rank
}

/// Threshold the per-arc ranks at the smallest uniform quota whose union
/// covers `target_count` arcs.
fn quota_mask(net: &Network, min_rank: &[Option<usize>], target_count: usize) -> Vec<bool> {
    let mut ranks: Vec<usize> = min_rank.iter().filter_map(|r| *r).collect();
    let mut mask = vec![false; net.arcs.len()];
    if target_count == 0 {
        return mask;
    }
    ranks.sort_unstable();
    let quota = if target_count <= ranks.len() {
        ranks[target_count - 1] + 1
    } else {
        ranks.last().map_or(0, |r| r + 1)
    };
    for (arc_id, r) in min_rank.iter().enumerate() {
        if let Some(r) = r {
            mask[arc_id] = *r < quota;
        }
    }
    mask
}

/// The shared CG loop. `reduced` supplies the eta-switching second network;
/// `levels` supplies in-iteration reduced-cost escalation (a lone
/// [`UNLIMITED`] disables it); `mark` receives arc labels for collection.
fn drive(
    net: &Network,
    cfg: &CgConfig,
    reduced: Option<Network>,
    levels: &[usize],
    mut mark: Option<&mut Vec<bool>>,
) -> Result<CgOutcome, CgError> {
    let t_run = Instant::now();
    let limits = PricingLimits {
        max_columns: cfg.max_columns_per_iter,
        use_dominance: true,
    };
    let mut rmp = init_rmp(net);
    let t = Instant::now();
    let mut sol = rmp.solve_lp()?;
    let mut pending_rmp = t.elapsed().as_secs_f64();

    let mut stats = RunStats::default();
    let mut use_reduced = reduced.is_some();
    let mut reduced_disabled = false;

    loop {
        let active = match (&reduced, use_reduced) {
            (Some(r), true) => r,
            _ => net,
        };

        let t_pp = Instant::now();
        let priced_active = price_arcs(active, &sol.duals);
        let mut labels = 0;
        let mut columns = Vec::new();
        let mut on_literal_full = false;
        for (li, &level) in levels.iter().enumerate() {
            let result = if level == UNLIMITED {
                on_literal_full = !use_reduced;
                solve_pricing(active, &priced_active, &limits)
            } else {
                on_literal_full = false;
                let mask = redcost_mask(active, &priced_active, level);
                let sub = reduce_network(active, &mask);
                let priced_sub: Vec<PricedArc> = sub
                    .arcs
                    .iter()
                    .map(|a| PricedArc {
                        arc_id: a.id,
                        modified_cost: priced_active[sub.parent_arc_ids[a.id]].modified_cost,
                    })
                    .collect();
                solve_pricing(&sub, &priced_sub, &limits)
            };
            labels += result.labels_created;
            columns = result.columns;
            if !columns.is_empty() || li == levels.len() - 1 {
                break;
            }
        }
        let pp_seconds = t_pp.elapsed().as_secs_f64();

        let n_cols = columns.len();
        let rmp_seconds = pending_rmp;
        pending_rmp = 0.0;
        if n_cols > 0 {
            if let Some(y) = mark.as_deref_mut() {
                mark_columns(net, &columns, y)?;
            }
            let added = rmp.add_columns(columns)?;
            if added != n_cols {
                return Err(CgError::Internal(format!(
                    "pricing returned {n_cols} columns but only {added} were new; \
                     a pooled column still prices negative"
                )));
            }
            let t = Instant::now();
            sol = rmp.solve_lp()?;
            pending_rmp = t.elapsed().as_secs_f64();
        }

        let network = if on_literal_full { NetTag::Full } else { NetTag::Reduced };
        stats.per_iteration.push(IterRecord {
            iteration: stats.per_iteration.len() + 1,
            network,
            columns: n_cols,
            labels,
            pp_seconds,
            rmp_seconds,
            objective: sol.objective,
        });
        stats.pp_seconds += pp_seconds;
        stats.rmp_seconds += rmp_seconds;
        if network == NetTag::Full {
            stats.full_network_iterations += 1;
        }

        if use_reduced && n_cols < cfg.eta_min {
            use_reduced = false;
            if cfg.disable_reduced_after_first_failure {
                reduced_disabled = true;
            }
        } else if reduced.is_some() && !use_reduced && !reduced_disabled && n_cols >= cfg.eta_max {
            use_reduced = true;
        } else if !use_reduced && n_cols == 0 {
            break;
        }
    }

    stats.iterations = stats.per_iteration.len();
    stats.rmp_seconds += pending_rmp;
    stats.total_seconds = t_run.elapsed().as_secs_f64();
    Ok(CgOutcome {
        solution: sol,
        stats,
        rmp,
    })
}

/// Sets y = 1 for every arc on the given columns' routes, resolved against
/// the full network.
fn mark_columns(net: &Network, columns: &[Column], y: &mut [bool]) -> Result<(), CgError> {
    for col in columns {
        for pair in col.route.windows(2) {
            let arc = net.find_arc(pair[0], pair[1]).ok_or_else(|| {
                CgError::Internal(format!("column route uses missing arc {}->{}", pair[0], pair[1]))
            })?;
            y[arc] = true;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_random, GenParams};
    use crate::net::build_network;

    fn test_net(n: usize, seed: u64) -> Network {
        let inst = generate_random(n, seed, &GenParams::default());
        build_network(&inst).unwrap()
    }

    fn cfg(strategy: Strategy) -> CgConfig {
        CgConfig {
            strategy,
            ..CgConfig::default()
        }
    }

    #[test]
    fn one_customer_run_terminates_immediately() {
        let net = test_net(1, 7);
        let out = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        assert_eq!(out.stats.iterations, 1);
        let rec = &out.stats.per_iteration[0];
        assert_eq!(rec.columns, 0);
        assert_eq!(rec.network, NetTag::Full);
        let round_trip = net.route_cost(&[0, 1, 2]);
        assert!((out.solution.objective - round_trip).abs() < 1e-9);
    }

    #[test]
    fn rerun_is_deterministic() {
        let net = test_net(8, 21);
        let a = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        let b = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        assert_eq!(a.stats.iterations, b.stats.iterations);
        assert_eq!(a.solution.objective, b.solution.objective);
        for (x, y) in a.stats.per_iteration.iter().zip(&b.stats.per_iteration) {
            assert_eq!((x.columns, x.labels, x.network, x.objective),
                       (y.columns, y.labels, y.network, y.objective));
        }
    }

    #[test]
    fn keep_all_mask_reproduces_baseline_exactly() {
        let net = test_net(7, 3);
        let base = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        let keep = vec![true; net.arcs.len()];
        let ml = run_ml(&net, &cfg(Strategy::MlS), &keep).unwrap();
        assert_eq!(ml.solution.objective, base.solution.objective);
        assert_eq!(ml.stats.iterations, base.stats.iterations);
    }

    #[test]
    fn keep_none_mask_falls_back_to_full_network() {
        let net = test_net(7, 4);
        let base = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        let keep = vec![false; net.arcs.len()];
        let ml = run_ml(&net, &cfg(Strategy::MlS), &keep).unwrap();
        assert!((ml.solution.objective - base.solution.objective).abs() <= 1e-6);
        assert_eq!(ml.stats.per_iteration[0].network, NetTag::Reduced);
        let last = ml.stats.per_iteration.last().unwrap();
        assert_eq!(last.network, NetTag::Full);
        assert_eq!(last.columns, 0);
    }

    #[test]
    fn switching_chain_obeys_thresholds() {
        let net = test_net(10, 11);
        let base = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        let mut c = cfg(Strategy::MlS);
        c.eta_min = 2;
        c.eta_max = 3;
        c.disable_reduced_after_first_failure = false;
        // Keep every other selectable arc so both networks get exercised.
        let ids = net.selectable_arc_ids();
        let compact: Vec<bool> = (0..ids.len()).map(|i| i % 2 == 0).collect();
        let ml = run_ml(&net, &c, &expand_mask(&net, &compact)).unwrap();
        assert!((ml.solution.objective - base.solution.objective).abs() <= 1e-6);

        let trace = &ml.stats.per_iteration;
        for w in trace.windows(2) {
            if w[0].network == NetTag::Reduced && w[0].columns < c.eta_min {
                assert_eq!(w[1].network, NetTag::Full, "eta_min switch after iteration {}", w[0].iteration);
            }
            if w[0].network == NetTag::Full && w[0].columns >= c.eta_max {
                assert_eq!(w[1].network, NetTag::Reduced, "eta_max switch after iteration {}", w[0].iteration);
            }
        }
        let last = trace.last().unwrap();
        assert_eq!((last.network, last.columns), (NetTag::Full, 0));
    }

    #[test]
    fn first_failure_permanently_disables_reduced_when_flagged() {
        let net = test_net(10, 11);
        let mut c = cfg(Strategy::MlS);
        c.eta_min = 2;
        c.eta_max = 3;
        c.disable_reduced_after_first_failure = true;
        let ids = net.selectable_arc_ids();
        let compact: Vec<bool> = (0..ids.len()).map(|i| i % 2 == 0).collect();
        let ml = run_ml(&net, &c, &expand_mask(&net, &compact)).unwrap();
        let trace = &ml.stats.per_iteration;
        let first_fail = trace
            .iter()
            .position(|r| r.network == NetTag::Reduced && r.columns < c.eta_min);
        if let Some(k) = first_fail {
            assert!(
                trace[k + 1..].iter().all(|r| r.network == NetTag::Full),
                "reduced network reappeared after its first failure"
            );
        }
    }

    #[test]
    fn unlimited_level_list_matches_baseline() {
        let net = test_net(8, 17);
        let base = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        let mut c = cfg(Strategy::RedcostS);
        c.redcost_levels = vec![UNLIMITED];
        let rc = run_redcost(&net, &c).unwrap();
        assert_eq!(rc.solution.objective, base.solution.objective);
        assert_eq!(rc.stats.iterations, base.stats.iterations);
        for (x, y) in rc.stats.per_iteration.iter().zip(&base.stats.per_iteration) {
            assert_eq!(x.columns, y.columns);
        }
    }

    #[test]
    fn redcost_escalation_still_reaches_the_optimum() {
        let net = test_net(10, 29);
        let base = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        let mut c = cfg(Strategy::RedcostS);
        c.redcost_levels = vec![2, 5, UNLIMITED];
        let rc = run_redcost(&net, &c).unwrap();
        assert!((rc.solution.objective - base.solution.objective).abs() <= 1e-6);
        let last = rc.stats.per_iteration.last().unwrap();
        assert_eq!((last.network, last.columns), (NetTag::Full, 0));
        assert!(rc.stats.full_network_iterations >= 1);
    }

    #[test]
    fn ml_redcost_composition_reaches_the_optimum() {
        let net = test_net(10, 31);
        let base = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        let mut c = cfg(Strategy::MlRedcostS);
        c.redcost_levels = vec![3, UNLIMITED];
        c.eta_min = 2;
        c.eta_max = 4;
        let ids = net.selectable_arc_ids();
        let compact: Vec<bool> = (0..ids.len()).map(|i| i % 3 != 0).collect();
        let out = run_ml(&net, &c, &expand_mask(&net, &compact)).unwrap();
        assert!((out.solution.objective - base.solution.objective).abs() <= 1e-6);
        let last = out.stats.per_iteration.last().unwrap();
        assert_eq!((last.network, last.columns), (NetTag::Full, 0));
    }

    #[test]
    fn redcost_mask_keeps_the_level_cheapest_per_group() {
        let net = test_net(9, 5);
        let duals = vec![0.0; net.n_customers()];
        let priced = price_arcs(&net, &duals);
        let level = 3;
        let mask = redcost_mask(&net, &priced, level);
        for node in 1..=net.n_customers() {
            for (dir, ids) in [("out", &net.out_arcs[node]), ("in", &net.in_arcs[node])] {
                let mut group: Vec<usize> = ids
                    .iter()
                    .copied()
                    .filter(|&a| net.is_selectable(a))
                    .collect();
                group.sort_by(|&a, &b| {
                    priced[a]
                        .modified_cost
                        .total_cmp(&priced[b].modified_cost)
                        .then(a.cmp(&b))
                });
                let kept = group.iter().filter(|&&a| mask[a]).count();
                assert!(
                    kept >= level.min(group.len()),
                    "node {node} {dir}: kept {kept} of {} at level {level}",
                    group.len()
                );
                for &a in group.iter().take(level) {
                    assert!(mask[a], "node {node} {dir}: a cheapest-{level} arc was dropped");
                }
            }
        }
        for (a, &m) in mask.iter().enumerate() {
            if net.is_selectable(a) && !m {
                let tail_rank = rank_in_group(&net, &priced, net.arcs[a].tail, a, true);
                let head_rank = rank_in_group(&net, &priced, net.arcs[a].head, a, false);
                assert!(tail_rank >= level && head_rank >= level);
            }
        }
    }

    fn rank_in_group(net: &Network, priced: &[PricedArc], node: usize, arc: usize, out: bool) -> usize {
        let ids = if out { &net.out_arcs[node] } else { &net.in_arcs[node] };
        let mut group: Vec<usize> = ids
            .iter()
            .copied()
            .filter(|&a| net.is_selectable(a))
            .collect();
        group.sort_by(|&a, &b| {
            priced[a]
                .modified_cost
                .total_cmp(&priced[b].modified_cost)
                .then(a.cmp(&b))
        });
        group.iter().position(|&x| x == arc).unwrap()
    }

    #[test]
    fn select_random_draws_exact_counts() {
        let mask = select_random(0, 40, 1);
        assert!(mask.iter().all(|&m| !m));
        let mask = select_random(40, 40, 1);
        assert!(mask.iter().all(|&m| m));
        let mask = select_random(13, 40, 2);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 13);
        assert_eq!(mask, select_random(13, 40, 2));
        assert_ne!(mask, select_random(13, 40, 3));
    }

    #[test]
    fn select_random_inclusion_is_uniform() {
        let (keep, n, draws) = (10usize, 30usize, 2000usize);
        let mut hits = vec![0usize; n];
        for d in 0..draws {
            for (i, &m) in select_random(keep, n, d as u64).iter().enumerate() {
                if m {
                    hits[i] += 1;
                }
            }
        }
        let p = keep as f64 / n as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let expect = draws as f64 * p;
        for (i, &h) in hits.iter().enumerate() {
            assert!(
                (h as f64 - expect).abs() <= 3.0 * sigma,
                "arc {i} selected {h} times, expected {expect:.0} +- {:.0}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn select_cost_uses_the_smallest_sufficient_quota() {
        let net = test_net(10, 13);
        let n_sel = net.selectable_arc_ids().len();
        let target = n_sel / 3;
        let mask = select_cost(&net, target);
        let kept = mask.iter().enumerate().filter(|&(a, &m)| m && net.is_selectable(a)).count();
        assert!(kept >= target);

        // Recover the implied quota and check minimality plus the per-group
        // cheapest-first property.
        let ranks = group_min_ranks(&net, |a| net.arcs[a].cost);
        let quota = (0..net.arcs.len())
            .filter(|&a| mask[a] && net.is_selectable(a))
            .map(|a| ranks[a].unwrap() + 1)
            .max()
            .unwrap();
        if quota > 1 {
            let smaller: usize = ranks
                .iter()
                .filter_map(|r| *r)
                .filter(|&r| r < quota - 1)
                .count();
            assert!(smaller < target, "quota {quota} is not minimal");
        }
        for (a, r) in ranks.iter().enumerate() {
            match r {
                Some(r) => assert_eq!(mask[a], *r < quota),
                None => assert!(!mask[a]),
            }
        }
    }

    #[test]
    fn select_cost_handles_extremes() {
        let net = test_net(6, 2);
        let n_sel = net.selectable_arc_ids().len();
        let none = select_cost(&net, 0);
        assert!(none.iter().all(|&m| !m));
        let all = select_cost(&net, n_sel);
        for &a in &net.selectable_arc_ids() {
            assert!(all[a]);
        }
    }

    #[test]
    fn collect_marks_exactly_the_generated_column_arcs() {
        let net = test_net(8, 41);
        let (out, y) = run_collect(&net, &cfg(Strategy::Baseline)).unwrap();
        let mut replay = vec![false; net.arcs.len()];
        for col in out.rmp.pool().iter().skip(net.n_customers()) {
            for pair in col.route.windows(2) {
                replay[net.find_arc(pair[0], pair[1]).unwrap()] = true;
            }
        }
        assert_eq!(y, replay);
        assert!(y.iter().any(|&v| v), "this instance generates columns");
    }

    #[test]
    fn collect_without_columns_labels_nothing() {
        let net = test_net(1, 3);
        let (_, y) = run_collect(&net, &cfg(Strategy::Baseline)).unwrap();
        assert!(y.iter().all(|&v| !v));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut c = CgConfig::default();
        c.eta_min = 0;
        assert!(c.validate().is_err());
        c = CgConfig::default();
        c.eta_min = 101;
        assert!(c.validate().is_err());
        c = CgConfig::default();
        c.redcost_levels = vec![10, 20];
        assert!(c.validate().is_err());
        c = CgConfig::default();
        c.redcost_levels = vec![20, 10, UNLIMITED];
        assert!(c.validate().is_err());
        c = CgConfig::default();
        c.keep_fraction = 1.5;
        assert!(c.validate().is_err());
        c = CgConfig::default();
        c.max_columns_per_iter = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn level_strings_round_trip() {
        let levels = parse_levels("10,20,inf").unwrap();
        assert_eq!(levels, vec![10, 20, UNLIMITED]);
        assert_eq!(format_levels(&levels), "10,20,inf");
        assert_eq!(parse_levels("inf").unwrap(), vec![UNLIMITED]);
        assert!(parse_levels("10,x").is_err());
    }

    #[test]
    fn solve_instance_dispatches_model_free_strategies() {
        let net = test_net(7, 19);
        let base = solve_instance(&net, &cfg(Strategy::Baseline), None).unwrap();
        for strategy in [Strategy::RandomS, Strategy::CostS, Strategy::RedcostS] {
            let out = solve_instance(&net, &cfg(strategy), None).unwrap();
            assert!(
                (out.solution.objective - base.solution.objective).abs() <= 1e-6,
                "{strategy} diverged from baseline"
            );
        }
        assert!(matches!(
            solve_instance(&net, &cfg(Strategy::MlS), None),
            Err(CgError::ModelRequired(Strategy::MlS))
        ));
    }

    #[test]
    fn objectives_never_increase_along_a_run() {
        let net = test_net(10, 23);
        let out = run_baseline(&net, &cfg(Strategy::Baseline)).unwrap();
        for w in out.stats.per_iteration.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-9);
        }
        assert_eq!(
            out.stats.per_iteration.last().unwrap().objective,
            out.solution.objective
        );
    }
}

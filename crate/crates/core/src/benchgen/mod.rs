//! Seeded generators for the four benchmark domains.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)`, so a spec
//! fully determines its model.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::model::{GameEntry, GameState, MarkovGame, Model, RobustEntry, RobustMdp, RobustState, SparseRow};

pub const ACTION_COUNTS: [usize; 5] = [1, 2, 3, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    RandomMg,
    GamblersRuin,
    Gridworld,
    Inventory,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::RandomMg, Domain::GamblersRuin, Domain::Gridworld, Domain::Inventory];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::RandomMg => "mg",
            Domain::GamblersRuin => "gambler",
            Domain::Gridworld => "gridworld",
            Domain::Inventory => "inventory",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mg" | "random_mg" | "randommg" => Ok(Domain::RandomMg),
            "gambler" | "gamblers_ruin" | "gambler_ruin" => Ok(Domain::GamblersRuin),
            "grid" | "gridworld" => Ok(Domain::Gridworld),
            "inventory" => Ok(Domain::Inventory),
            other => Err(format!("unknown domain {other:?} (expected mg, gambler, gridworld or inventory)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub domain: Domain,
    /// States for `RandomMg` and `Inventory`, maximum capital for
    /// `GamblersRuin`, side length for `Gridworld`.
    pub size: usize,
    pub gamma: f64,
    pub seed: u64,
    pub eta: f64,
    pub xi: f64,
}

impl GenSpec {
    pub fn new(domain: Domain, size: usize, gamma: f64, seed: u64) -> Self {
        Self { domain, size, gamma, seed, eta: 0.2, xi: 1.0 }
    }

    pub fn label(&self) -> String {
        format!("{}-{}-s{}", self.domain, self.size, self.seed)
    }
}

pub fn generate(spec: &GenSpec) -> Model {
    match spec.domain {
        Domain::RandomMg => gen_random_mg(spec).into(),
        Domain::GamblersRuin => gen_gamblers_ruin(spec).into(),
        Domain::Gridworld => gen_gridworld(spec).into(),
        Domain::Inventory => gen_inventory(spec).into(),
    }
}

fn rng_for(spec: &GenSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(spec.seed)
}

fn to_sparse(dense: &[f64]) -> SparseRow {
    dense.iter().enumerate().filter(|x| *x.1 > 0.0).map(|(i, &p)| (i, p)).collect()
}

pub fn gen_random_mg(spec: &GenSpec) -> MarkovGame {
    assert!(spec.size >= 1, "random game needs at least one state");
    assert!(spec.eta > 0.0 && spec.eta <= 1.0, "eta must lie in (0,1]");
    let mut rng = rng_for(spec);
    let n = spec.size;
    let k = ((spec.eta * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let states = (0..n)
        .map(|_| {
            let n_max = ACTION_COUNTS[rng.random_range(0..ACTION_COUNTS.len())];
            let n_min = ACTION_COUNTS[rng.random_range(0..ACTION_COUNTS.len())];
            let entries = (0..n_max * n_min)
                .map(|_| {
                    let mut support = sample(&mut rng, n, k).into_vec();
                    support.sort_unstable();
                    let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                    let total: f64 = w.iter().sum();
                    let probs = support.iter().zip(&w).map(|(&t, x)| (t, x / total)).collect();
                    let rewards = support.iter().map(|&t| (t, rng.random_range(-1.0..=1.0))).collect();
                    GameEntry::new(probs, rewards)
                })
                .collect();
            GameState { n_max, n_min, entries }
        })
        .collect();
    MarkovGame { gamma: spec.gamma, initial_state: 0, states }
}

pub fn gen_gamblers_ruin(spec: &GenSpec) -> RobustMdp {
    let mut rng = rng_for(spec);
    let q = rng.random_range(0.0..1.0);
    gamblers_ruin_with(spec.size, q, spec.xi, spec.gamma)
}

/// Capital `0..=n`; betting `k` wins `k` with probability `q`, and reaching `n` pays 1.
pub fn gamblers_ruin_with(n: usize, q: f64, xi: f64, gamma: f64) -> RobustMdp {
    assert!(n >= 2, "gambler's ruin needs a maximum capital of at least 2");
    let states = (0..=n)
        .map(|s| {
            if s == 0 || s == n {
                let entries = vec![RobustEntry::new(vec![(s, 1.0)], vec![])];
                return RobustState { budget: xi.min(2.0), entries };
            }
            let entries: Vec<RobustEntry> = (1..=s.min(n - s))
                .map(|k| {
                    let mut dense = vec![0.0; n + 1];
                    dense[s + k] += q;
                    dense[s - k] += 1.0 - q;
                    let rewards = if s + k == n { vec![(n, 1.0)] } else { vec![] };
                    RobustEntry::new(to_sparse(&dense), rewards)
                })
                .collect();
            RobustState { budget: xi.min(2.0 * entries.len() as f64), entries }
        })
        .collect();
    RobustMdp { gamma, initial_state: n / 2, states }
}

pub fn gen_gridworld(spec: &GenSpec) -> RobustMdp {
    let mut rng = rng_for(spec);
    let side = spec.size;
    let wind = rng.random_range(0.0..1.0);
    let goal = rng.random_range(0..side * side);
    gridworld_with(side, wind, goal, spec.xi, spec.gamma)
}

/// `side × side` grid, actions up/down/left/right. With probability `wind`
/// the move goes in a uniformly random direction; walls clamp. Entering
/// `goal` pays 1.
pub fn gridworld_with(side: usize, wind: f64, goal: usize, xi: f64, gamma: f64) -> RobustMdp {
    assert!(side >= 2, "gridworld needs a side length of at least 2");
    let n = side * side;
    let step = |s: usize, dir: usize| -> usize {
        let (r, c) = (s / side, s % side);
        match dir {
            0 => r.saturating_sub(1) * side + c,
            1 => (r + 1).min(side - 1) * side + c,
            2 => r * side + c.saturating_sub(1),
            _ => r * side + (c + 1).min(side - 1),
        }
    };
    let states = (0..n)
        .map(|s| {
            let entries = (0..4)
                .map(|a| {
                    let mut dense = vec![0.0; n];
                    dense[step(s, a)] += 1.0 - wind;
                    for dir in 0..4 {
                        dense[step(s, dir)] += wind / 4.0;
                    }
                    let probs = to_sparse(&dense);
                    let rewards = if dense[goal] > 0.0 { vec![(goal, 1.0)] } else { vec![] };
                    RobustEntry::new(probs, rewards)
                })
                .collect();
            RobustState { budget: xi.min(8.0), entries }
        })
        .collect();
    RobustMdp { gamma, initial_state: 0, states }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryParams {
    pub max_stock: usize,
    pub max_backlog: usize,
    pub capacity: usize,
    pub max_demand: usize,
    pub lambda: f64,
    pub price: f64,
    pub item_cost: f64,
    pub fixed_cost: f64,
    pub holding_cost: f64,
    pub backlog_cost: f64,
    pub xi: f64,
    pub gamma: f64,
}

const INVENTORY_MAX_DEMAND: usize = 4;
const INVENTORY_MAX_ORDER: usize = 4;

pub fn inventory_params(spec: &GenSpec) -> InventoryParams {
    assert!(spec.size >= 2, "inventory needs at least two states");
    let mut rng = rng_for(spec);
    let levels = spec.size - 1;
    let share: f64 = rng.random_range(0.0..=1.0);
    let max_stock = ((share * levels as f64).round() as usize).min(levels);
    let item_cost = rng.random_range(0.1..1.0);
    InventoryParams {
        max_stock,
        max_backlog: levels - max_stock,
        capacity: INVENTORY_MAX_ORDER.min(levels),
        max_demand: INVENTORY_MAX_DEMAND,
        lambda: rng.random_range(0.0..INVENTORY_MAX_DEMAND as f64),
        price: item_cost + rng.random_range(0.1..1.0),
        item_cost,
        fixed_cost: rng.random_range(0.0..1.0),
        holding_cost: rng.random_range(0.0..0.2),
        backlog_cost: rng.random_range(0.0..0.5),
        xi: spec.xi,
        gamma: spec.gamma,
    }
}

pub fn gen_inventory(spec: &GenSpec) -> RobustMdp {
    inventory_with(&inventory_params(spec))
}

/// Poisson(λ) probabilities on `0..=max`, the tail collected in the last bucket.
pub fn truncated_poisson(lambda: f64, max: usize) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(max + 1);
    let mut p = (-lambda).exp();
    for d in 0..max {
        pmf.push(p);
        p *= lambda / (d + 1) as f64;
    }
    let head: f64 = pmf.iter().sum();
    pmf.push((1.0 - head).max(0.0));
    pmf
}

/// Levels `−max_backlog..=max_stock`; state index `x + max_backlog`.
pub fn inventory_with(p: &InventoryParams) -> RobustMdp {
    let lo = -(p.max_backlog as i64);
    let hi = p.max_stock as i64;
    let n = (hi - lo + 1) as usize;
    let demand = truncated_poisson(p.lambda, p.max_demand);
    let states = (lo..=hi)
        .map(|x| {
            let entries: Vec<RobustEntry> = (0..=p.capacity)
                .map(|q| {
                    let y = (x + q as i64).min(hi);
                    let mut dense = vec![0.0; n];
                    for (d, &pd) in demand.iter().enumerate() {
                        let next = (y - d as i64).max(lo);
                        dense[(next - lo) as usize] += pd;
                    }
                    let order = q as f64 * p.item_cost + if q > 0 { p.fixed_cost } else { 0.0 };
                    let probs = to_sparse(&dense);
                    let rewards = probs
                        .iter()
                        .map(|&(t, _)| {
                            let next = t as i64 + lo;
                            let carry = if next >= 0 { p.holding_cost * next as f64 } else { p.backlog_cost * (-next) as f64 };
                            (t, p.price * (y - next) as f64 - order - carry)
                        })
                        .collect();
                    RobustEntry::new(probs, rewards)
                })
                .collect();
            RobustState { budget: p.xi.min(2.0 * entries.len() as f64), entries }
        })
        .collect();
    RobustMdp { gamma: p.gamma, initial_state: (-lo) as usize, states }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_mg_support_and_actions() {
        let g = gen_random_mg(&GenSpec::new(Domain::RandomMg, 20, 0.9, 3));
        assert!(Model::Game(g.clone()).validate().is_empty());
        for st in &g.states {
            assert!(ACTION_COUNTS.contains(&st.n_max) && ACTION_COUNTS.contains(&st.n_min));
            assert!(st.entries.iter().all(|e| e.probs().len() == 4));
        }
    }

    #[test]
    fn same_seed_same_model() {
        for d in Domain::ALL {
            let spec = GenSpec::new(d, 6, 0.9, 11);
            let a = crate::model::to_json(&generate(&spec));
            let b = crate::model::to_json(&generate(&spec));
            assert_eq!(a, b);
            let other = crate::model::to_json(&generate(&GenSpec { seed: 12, ..spec }));
            assert_ne!(a, other, "{d}");
        }
    }

    #[test]
    fn single_state_game() {
        let g = gen_random_mg(&GenSpec::new(Domain::RandomMg, 1, 0.5, 0));
        assert!(g.states[0].entries.iter().all(|e| e.probs() == [(0, 1.0)]));
        assert!(Model::Game(g).validate().is_empty());
    }

    #[test]
    fn gambler_structure() {
        let r = gamblers_ruin_with(2, 0.3, 1.0, 0.9);
        assert_eq!(r.n_states(), 3);
        assert_eq!(r.states[1].n_actions(), 1);
        assert_eq!(r.states[0].entries[0].nominal(), [(0, 1.0)]);
        assert_eq!(r.states[2].entries[0].nominal(), [(2, 1.0)]);
        let r = gamblers_ruin_with(7, 0.4, 1.0, 0.9);
        assert_eq!(r.states[3].n_actions(), 3);
        assert_eq!(r.states[5].n_actions(), 2);
    }

    #[test]
    fn gridworld_structure() {
        let r = gridworld_with(2, 0.0, 3, 1.0, 0.9);
        assert_eq!(r.n_states(), 4);
        assert!(r.states.iter().all(|s| s.n_actions() == 4));
        for s in &r.states {
            for e in &s.entries {
                assert_eq!(e.nominal().len(), 1);
            }
        }
        let g = gen_gridworld(&GenSpec::new(Domain::Gridworld, 5, 0.9, 4));
        let goals: std::collections::BTreeSet<usize> =
            g.states.iter().flat_map(|s| &s.entries).flat_map(|e| e.rewards().iter().map(|x| x.0)).collect();
        assert_eq!(goals.len(), 1);
    }

    #[test]
    fn poisson_rows_sum_to_one() {
        for lambda in [0.0, 0.3, 2.5, 3.99] {
            let p = truncated_poisson(lambda, 4);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn inventory_prices_exceed_costs() {
        for seed in 0..1000 {
            let p = inventory_params(&GenSpec::new(Domain::Inventory, 10, 0.9, seed));
            assert!(p.price > p.item_cost, "seed {seed}");
        }
    }

    #[test]
    fn every_domain_validates() {
        for d in Domain::ALL {
            for size in [2, 3, 8] {
                for seed in 0..5 {
                    let m = generate(&GenSpec::new(d, size, 0.9, seed));
                    assert!(m.validate().is_empty(), "{d} {size} {seed}: {:?}", m.validate());
                }
            }
        }
    }

    #[test]
    fn domain_names_round_trip() {
        for d in Domain::ALL {
            assert_eq!(d.as_str().parse::<Domain>().unwrap(), d);
        }
        assert!("chess".parse::<Domain>().is_err());
    }
}

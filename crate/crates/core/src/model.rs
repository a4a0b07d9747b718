//! Markov games and L1 s-rectangular robust MDPs, their validation, and the
//! JSON model format.
//!
//! Transition rows are stored sparsely as `(next_state, probability)` pairs and
//! rewards as `(next_state, reward)` pairs; a missing reward entry means zero.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Tolerance on transition-row sums.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Sparse vector over states.
pub type SparseRow = Vec<(usize, f64)>;

/// Outcome of one `(s, a, b)` cell of a Markov game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameEntry {
    probs: SparseRow,
    rewards: SparseRow,
    expected_reward: f64,
}

impl GameEntry {
    pub fn new(probs: SparseRow, rewards: SparseRow) -> Self {
        let expected_reward = expected_reward(&probs, &rewards);
        Self { probs, rewards, expected_reward }
    }

    pub fn probs(&self) -> &[(usize, f64)] {
        &self.probs
    }

    pub fn rewards(&self) -> &[(usize, f64)] {
        &self.rewards
    }

    /// `Σ_{s'} p(s') r(s')`.
    pub fn expected_reward(&self) -> f64 {
        self.expected_reward
    }

    pub fn reward_to(&self, next: usize) -> f64 {
        lookup(&self.rewards, next)
    }
}

fn lookup(row: &[(usize, f64)], idx: usize) -> f64 {
    row.iter().filter(|(i, _)| *i == idx).map(|(_, r)| *r).sum()
}

fn expected_reward(probs: &[(usize, f64)], rewards: &[(usize, f64)]) -> f64 {
    probs.iter().map(|&(s, p)| p * lookup(rewards, s)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub n_max: usize,
    pub n_min: usize,
    /// Row-major over `(a, b)`: index `a * n_min + b`.
    pub entries: Vec<GameEntry>,
}

impl GameState {
    pub fn entry(&self, a: usize, b: usize) -> &GameEntry {
        &self.entries[a * self.n_min + b]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    pub gamma: f64,
    pub initial_state: usize,
    pub states: Vec<GameState>,
}

/// Nominal behaviour of one `(s, a)` pair of a robust MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustEntry {
    probs: SparseRow,
    rewards: SparseRow,
}

impl RobustEntry {
    pub fn new(probs: SparseRow, rewards: SparseRow) -> Self {
        Self { probs, rewards }
    }

    pub fn nominal(&self) -> &[(usize, f64)] {
        &self.probs
    }

    pub fn rewards(&self) -> &[(usize, f64)] {
        &self.rewards
    }

    pub fn reward_to(&self, next: usize) -> f64 {
        lookup(&self.rewards, next)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustState {
    pub budget: f64,
    pub entries: Vec<RobustEntry>,
}

impl RobustState {
    pub fn n_actions(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustMdp {
    pub gamma: f64,
    pub initial_state: usize,
    pub states: Vec<RobustState>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Game(MarkovGame),
    Robust(RobustMdp),
}

impl MarkovGame {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn r_max(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| &s.entries)
            .flat_map(|e| &e.rewards)
            .fold(0.0_f64, |m, &(_, r)| m.max(r.abs()))
    }
}

impl RobustMdp {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn r_max(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| &s.entries)
            .flat_map(|e| &e.rewards)
            .fold(0.0_f64, |m, &(_, r)| m.max(r.abs()))
    }
}

impl Model {
    pub fn n_states(&self) -> usize {
        match self {
            Model::Game(g) => g.n_states(),
            Model::Robust(r) => r.n_states(),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Model::Game(g) => g.gamma,
            Model::Robust(r) => r.gamma,
        }
    }

    pub fn initial_state(&self) -> usize {
        match self {
            Model::Game(g) => g.initial_state,
            Model::Robust(r) => r.initial_state,
        }
    }

    pub fn r_max(&self) -> f64 {
        match self {
            Model::Game(g) => g.r_max(),
            Model::Robust(r) => r.r_max(),
        }
    }

    /// Number of maximizer actions at `s`.
    pub fn n_max_actions(&self, s: usize) -> usize {
        match self {
            Model::Game(g) => g.states[s].n_max,
            Model::Robust(r) => r.states[s].n_actions(),
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        match self {
            Model::Game(g) => validate_game(g),
            Model::Robust(r) => validate_robust(r),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Game(_) => "mg",
            Model::Robust(_) => "rmdp",
        }
    }
}

impl From<MarkovGame> for Model {
    fn from(g: MarkovGame) -> Self {
        Model::Game(g)
    }
}

impl From<RobustMdp> for Model {
    fn from(r: RobustMdp) -> Self {
        Model::Robust(r)
    }
}

/// One broken invariant: which field, at which index, by how much.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub index: Vec<usize>,
    pub magnitude: f64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}: {} (magnitude {:e})", self.field, self.index, self.message, self.magnitude)
    }
}

fn violation(field: &'static str, index: Vec<usize>, magnitude: f64, message: impl Into<String>) -> Violation {
    Violation { field, index, magnitude, message: message.into() }
}

fn check_common(gamma: f64, initial: usize, n: usize, out: &mut Vec<Violation>) {
    if n == 0 {
        out.push(violation("states", vec![], 0.0, "model has no states"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        out.push(violation("gamma", vec![], gamma, "discount must lie strictly inside (0, 1)"));
    }
    if initial >= n {
        out.push(violation("initial_state", vec![initial], initial as f64, "initial state out of range"));
    }
}

fn check_row(
    field: &'static str,
    idx: &[usize],
    probs: &[(usize, f64)],
    rewards: &[(usize, f64)],
    n: usize,
    out: &mut Vec<Violation>,
) {
    let mut sum = 0.0;
    for &(s, p) in probs {
        if s >= n {
            out.push(violation(field, idx.to_vec(), s as f64, format!("next state {s} out of range")));
        }
        if !p.is_finite() || p < 0.0 {
            out.push(violation(field, idx.to_vec(), p, "negative or non-finite probability"));
        }
        sum += p;
    }
    if !((sum - 1.0).abs() <= PROB_SUM_TOL) {
        out.push(violation(field, idx.to_vec(), sum - 1.0, format!("transition row sums to {sum}")));
    }
    for &(s, r) in rewards {
        if s >= n {
            out.push(violation("reward", idx.to_vec(), s as f64, format!("reward target {s} out of range")));
        }
        if !r.is_finite() {
            out.push(violation("reward", idx.to_vec(), r, "non-finite reward"));
        }
    }
}

fn validate_game(g: &MarkovGame) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = g.n_states();
    check_common(g.gamma, g.initial_state, n, &mut out);
    for (s, st) in g.states.iter().enumerate() {
        if st.n_max == 0 || st.n_min == 0 {
            out.push(violation("actions", vec![s], 0.0, "each player needs at least one action"));
        }
        if st.entries.len() != st.n_max * st.n_min {
            out.push(violation(
                "entries",
                vec![s],
                st.entries.len() as f64,
                format!("expected {} entries", st.n_max * st.n_min),
            ));
            continue;
        }
        for a in 0..st.n_max {
            for b in 0..st.n_min {
                let e = st.entry(a, b);
                check_row("transition", &[s, a, b], &e.probs, &e.rewards, n, &mut out);
            }
        }
    }
    out
}

fn validate_robust(r: &RobustMdp) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = r.n_states();
    check_common(r.gamma, r.initial_state, n, &mut out);
    for (s, st) in r.states.iter().enumerate() {
        let na = st.n_actions();
        if na == 0 {
            out.push(violation("actions", vec![s], 0.0, "state has no actions"));
        }
        if !st.budget.is_finite() || st.budget < 0.0 {
            out.push(violation("xi", vec![s], st.budget, "budget must be finite and nonnegative"));
        } else if st.budget > 2.0 * na as f64 {
            out.push(violation("xi", vec![s], st.budget, format!("budget exceeds 2·A_s = {}", 2 * na)));
        }
        for (a, e) in st.entries.iter().enumerate() {
            check_row("nominal", &[s, a], &e.probs, &e.rewards, n, &mut out);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reference games

fn uniform_rewards(n: usize, r: f64) -> SparseRow {
    (0..n).map(|s| (s, r)).collect()
}

fn three_state_game(r1: f64, r2: f64, r3: f64, gamma: f64) -> MarkovGame {
    let state = |n_min: usize, cells: Vec<(usize, f64)>| GameState {
        n_max: 1,
        n_min,
        entries: cells
            .into_iter()
            .map(|(to, r)| GameEntry::new(vec![(to, 1.0)], uniform_rewards(3, r)))
            .collect(),
    };
    MarkovGame {
        gamma,
        initial_state: 0,
        states: vec![
            // s1: b1 → s3, b2 → s2
            state(2, vec![(2, r1), (1, r1)]),
            state(1, vec![(1, r2)]),
            state(1, vec![(2, r3)]),
        ],
    }
}

/// Three-state game on which Filar–Tolwinski stalls from `v = 0` (γ = 0.6).
pub fn build_counterexample_1() -> MarkovGame {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    three_state_game(-h, -0.5, 0.5, 0.6)
}

/// Variant that stalls from `v = r_max·𝟙` (γ = 0.8).
pub fn build_counterexample_2() -> MarkovGame {
    three_state_game(-0.5, -0.5, 0.5, 0.8)
}

// ---------------------------------------------------------------------------
// JSON format

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
enum ModelFile {
    #[serde(rename = "mg")]
    Game { gamma: f64, initial_state: usize, states: Vec<GameStateFile> },
    #[serde(rename = "rmdp")]
    Robust { gamma: f64, initial_state: usize, states: Vec<RobustStateFile> },
}

#[derive(Debug, Serialize, Deserialize)]
struct GameStateFile {
    na: usize,
    nb: usize,
    entries: Vec<GameEntryFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GameEntryFile {
    a: usize,
    b: usize,
    rewards: Vec<(usize, f64)>,
    probs: Vec<(usize, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RobustStateFile {
    na: usize,
    xi: f64,
    entries: Vec<RobustEntryFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RobustEntryFile {
    a: usize,
    rewards: Vec<(usize, f64)>,
    probs: Vec<(usize, f64)>,
}

impl From<&Model> for ModelFile {
    fn from(m: &Model) -> Self {
        match m {
            Model::Game(g) => ModelFile::Game {
                gamma: g.gamma,
                initial_state: g.initial_state,
                states: g
                    .states
                    .iter()
                    .map(|st| GameStateFile {
                        na: st.n_max,
                        nb: st.n_min,
                        entries: st
                            .entries
                            .iter()
                            .enumerate()
                            .map(|(k, e)| GameEntryFile {
                                a: k / st.n_min,
                                b: k % st.n_min,
                                rewards: e.rewards.clone(),
                                probs: e.probs.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
            },
            Model::Robust(r) => ModelFile::Robust {
                gamma: r.gamma,
                initial_state: r.initial_state,
                states: r
                    .states
                    .iter()
                    .map(|st| RobustStateFile {
                        na: st.n_actions(),
                        xi: st.budget,
                        entries: st
                            .entries
                            .iter()
                            .enumerate()
                            .map(|(a, e)| RobustEntryFile { a, rewards: e.rewards.clone(), probs: e.probs.clone() })
                            .collect(),
                    })
                    .collect(),
            },
        }
    }
}

fn into_model(file: ModelFile) -> Result<Model, ModelError> {
    let mut problems = Vec::new();
    let model = match file {
        ModelFile::Game { gamma, initial_state, states } => {
            let states = states
                .into_iter()
                .enumerate()
                .map(|(s, st)| {
                    let mut slots: Vec<Option<GameEntry>> = vec![None; st.na * st.nb];
                    for e in st.entries {
                        if e.a >= st.na || e.b >= st.nb {
                            problems.push(violation("entries", vec![s, e.a, e.b], 0.0, "action index out of range"));
                            continue;
                        }
                        let slot = &mut slots[e.a * st.nb + e.b];
                        if slot.is_some() {
                            problems.push(violation("entries", vec![s, e.a, e.b], 0.0, "duplicate entry"));
                        }
                        *slot = Some(GameEntry::new(e.probs, e.rewards));
                    }
                    let entries = slots
                        .into_iter()
                        .enumerate()
                        .map(|(k, e)| {
                            e.unwrap_or_else(|| {
                                problems.push(violation("entries", vec![s, k / st.nb, k % st.nb], 0.0, "missing entry"));
                                GameEntry::new(Vec::new(), Vec::new())
                            })
                        })
                        .collect();
                    GameState { n_max: st.na, n_min: st.nb, entries }
                })
                .collect();
            Model::Game(MarkovGame { gamma, initial_state, states })
        }
        ModelFile::Robust { gamma, initial_state, states } => {
            let states = states
                .into_iter()
                .enumerate()
                .map(|(s, st)| {
                    let mut slots: Vec<Option<RobustEntry>> = vec![None; st.na];
                    for e in st.entries {
                        if e.a >= st.na {
                            problems.push(violation("entries", vec![s, e.a], 0.0, "action index out of range"));
                            continue;
                        }
                        if slots[e.a].is_some() {
                            problems.push(violation("entries", vec![s, e.a], 0.0, "duplicate entry"));
                        }
                        slots[e.a] = Some(RobustEntry::new(e.probs, e.rewards));
                    }
                    let entries = slots
                        .into_iter()
                        .enumerate()
                        .map(|(a, e)| {
                            e.unwrap_or_else(|| {
                                problems.push(violation("entries", vec![s, a], 0.0, "missing entry"));
                                RobustEntry::new(Vec::new(), Vec::new())
                            })
                        })
                        .collect();
                    RobustState { budget: st.xi, entries }
                })
                .collect();
            Model::Robust(RobustMdp { gamma, initial_state, states })
        }
    };
    problems.extend(model.validate());
    if problems.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Invalid(problems))
    }
}

/// Serializes a model to JSON text.
pub fn to_json(model: &Model) -> String {
    serde_json::to_string(&ModelFile::from(model)).expect("model serialization is infallible")
}

/// Parses and validates a model from JSON text.
pub fn from_json(text: &str) -> Result<Model, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    into_model(file)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, to_json(model)).map_err(|e| ModelError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_games_are_valid() {
        let g1 = build_counterexample_1();
        assert!(Model::Game(g1.clone()).validate().is_empty());
        assert_eq!(g1.states[0].entry(0, 0).probs(), &[(2, 1.0)]);
        assert_eq!(g1.states[0].entry(0, 1).probs(), &[(1, 1.0)]);
        assert_eq!(g1.states[1].entry(0, 0).probs(), &[(1, 1.0)]);
        assert_eq!(g1.r_max(), std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(g1.gamma, 0.6);

        let g2 = build_counterexample_2();
        assert!(Model::Game(g2.clone()).validate().is_empty());
        assert_eq!(g2.gamma, 0.8);
        assert_eq!(g2.states[0].entry(0, 1).expected_reward(), -0.5);
        assert_eq!(g2.r_max(), 0.5);
    }

    #[test]
    fn short_row_is_one_violation() {
        let mut g = build_counterexample_1();
        g.states[0].entries[1] = GameEntry::new(vec![(1, 0.9)], vec![]);
        let v = Model::Game(g).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, vec![0, 0, 1]);
        assert!((v[0].magnitude + 0.1).abs() < 1e-12);
    }

    #[test]
    fn negative_budget_is_one_violation() {
        let r = RobustMdp {
            gamma: 0.9,
            initial_state: 0,
            states: vec![RobustState { budget: -0.1, entries: vec![RobustEntry::new(vec![(0, 1.0)], vec![])] }],
        };
        let v = Model::Robust(r).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "xi");
    }

    #[test]
    fn round_trip_is_identity() {
        let m = Model::Game(build_counterexample_1());
        let back = from_json(&to_json(&m)).unwrap();
        assert_eq!(back, m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
    }

    #[test]
    fn missing_gamma_is_parse_error() {
        let text = r#"{"type":"mg","initial_state":0,"states":[]}"#;
        match from_json(text) {
            Err(ModelError::Parse { message, .. }) => assert!(message.contains("gamma"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_discount_is_rejected() {
        let mut g = build_counterexample_1();
        g.gamma = 1.0;
        let text = to_json(&Model::Game(g));
        match from_json(&text) {
            Err(ModelError::Invalid(v)) => assert!(v.iter().any(|x| x.field == "gamma")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_entry_is_reported() {
        let text = r#"{"type":"mg","gamma":0.5,"initial_state":0,"states":[{"na":1,"nb":2,"entries":[{"a":0,"b":0,"rewards":[],"probs":[[0,1.0]]}]}]}"#;
        match from_json(text) {
            Err(ModelError::Invalid(v)) => assert!(v.iter().any(|x| x.message.contains("missing"))),
            other => panic!("unexpected {other:?}"),
        }
    }
}

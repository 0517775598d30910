use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{applicable_decisions, score_configuration, Configuration, ScoreBreakdown, ScoreWeights};
use crate::kb::{DecisionId, KindId, KnowledgeBase};
use crate::speclang::BoundSpec;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealParams {
    pub initial_temperature: f64,
    /// Geometric cooling factor applied after every step.
    pub cooling: f64,
    /// Step count; `None` means 200 per knowledge-base decision.
    pub iterations: Option<usize>,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams { initial_temperature: 10.0, cooling: 0.95, iterations: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("initial temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("cooling factor must lie in (0, 1), got {0}")]
    Cooling(f64),
    #[error("iteration count must be positive")]
    Iterations,
}

impl AnnealParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.initial_temperature.is_nan() || self.initial_temperature <= 0.0 {
            return Err(ParamError::Temperature(self.initial_temperature));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(ParamError::Cooling(self.cooling));
        }
        if self.iterations == Some(0) {
            return Err(ParamError::Iterations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnealOutcome {
    pub configuration: Configuration,
    pub score: ScoreBreakdown,
}

/// Higher total first, then fewer decisions, then lexicographic ids.
fn better(a: &AnnealOutcome, b: &AnnealOutcome) -> bool {
    let key = |o: &AnnealOutcome| (std::cmp::Reverse(o.score.total), o.configuration.len());
    match key(a).cmp(&key(b)) {
        Ordering::Equal => a.configuration < b.configuration,
        ord => ord == Ordering::Less,
    }
}

struct Space {
    universe: Vec<DecisionId>,
    slot: HashMap<DecisionId, KindId>,
}

impl Space {
    fn new(spec: &BoundSpec, kb: &KnowledgeBase) -> Self {
        let universe = applicable_decisions(spec, kb);
        let slot = universe
            .iter()
            .filter_map(|d| kb.selected_element(d).map(|e| (d.clone(), e.kind.clone())))
            .collect();
        Space { universe, slot }
    }

    fn filled(&self, config: &Configuration, kind: &KindId) -> bool {
        config.iter().any(|d| self.slot.get(d) == Some(kind))
    }

    fn addable(&self, config: &Configuration) -> Vec<&DecisionId> {
        self.universe
            .iter()
            .filter(|d| !config.contains(d) && self.slot.get(*d).is_none_or(|k| !self.filled(config, k)))
            .collect()
    }

    fn swaps<'a>(&'a self, config: &'a Configuration) -> Vec<(&'a DecisionId, &'a DecisionId)> {
        let mut out = Vec::new();
        for out_d in config.iter() {
            let Some(kind) = self.slot.get(out_d) else { continue };
            for in_d in self.universe.iter().filter(|d| !config.contains(d) && self.slot.get(*d) == Some(kind)) {
                out.push((out_d, in_d));
            }
        }
        out
    }

    /// Every configuration of the space, each kind filled at most once.
    fn enumerate(&self) -> Vec<Configuration> {
        let mut all = vec![Configuration::new()];
        for d in &self.universe {
            let mut grown = Vec::new();
            for c in &all {
                if self.slot.get(d).is_none_or(|k| !self.filled(c, k)) {
                    grown.push(c.with(d));
                }
            }
            all.extend(grown);
        }
        all
    }
}

/// Simulated annealing over configurations of applicable decisions that fill
/// each element kind at most once. Starts from the empty configuration and
/// returns the best configuration visited.
pub fn anneal(
    spec: &BoundSpec,
    kb: &KnowledgeBase,
    weights: &ScoreWeights,
    seed: u64,
    params: &AnnealParams,
) -> Result<AnnealOutcome, ParamError> {
    params.validate()?;
    let space = Space::new(spec, kb);
    let steps = params.iterations.unwrap_or(200 * kb.decisions.len().max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: HashMap<Configuration, ScoreBreakdown> = HashMap::new();
    let mut score = |c: &Configuration| *cache.entry(c.clone()).or_insert_with(|| score_configuration(c, spec, kb, weights));

    let mut current = Configuration::new();
    let mut current_total = score(&current).total;
    let mut best = AnnealOutcome { configuration: current.clone(), score: score(&current) };
    let mut temperature = params.initial_temperature;

    for _ in 0..steps {
        let addable = space.addable(&current);
        let swaps = space.swaps(&current);
        let mut moves = Vec::with_capacity(3);
        if !addable.is_empty() {
            moves.push(0);
        }
        if !current.is_empty() {
            moves.push(1);
        }
        if !swaps.is_empty() {
            moves.push(2);
        }
        if moves.is_empty() {
            break;
        }
        let mut next = current.clone();
        match moves[rng.gen_range(0..moves.len())] {
            0 => {
                next.insert(addable[rng.gen_range(0..addable.len())].clone());
            }
            1 => {
                let victim = current.iter().nth(rng.gen_range(0..current.len())).cloned().expect("non-empty");
                next.remove(&victim);
            }
            _ => {
                let (out_d, in_d) = swaps[rng.gen_range(0..swaps.len())];
                next.remove(out_d);
                next.insert(in_d.clone());
            }
        }
        let next_score = score(&next);
        let delta = (next_score.total - current_total) as f64;
        if delta >= 0.0 || rng.gen::<f64>() < (delta / temperature).exp() {
            current = next;
            current_total = next_score.total;
            let candidate = AnnealOutcome { configuration: current.clone(), score: next_score };
            if better(&candidate, &best) {
                best = candidate;
            }
        }
        temperature *= params.cooling;
    }
    Ok(best)
}

/// Best configuration of the annealing search space by exhaustive
/// enumeration, under the same tie-break. Exponential in the number of
/// applicable decisions.
pub fn exhaustive_optimum(spec: &BoundSpec, kb: &KnowledgeBase, weights: &ScoreWeights) -> AnnealOutcome {
    let space = Space::new(spec, kb);
    space
        .enumerate()
        .into_iter()
        .map(|c| {
            let score = score_configuration(&c, spec, kb, weights);
            AnnealOutcome { configuration: c, score }
        })
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .expect("the empty configuration is always enumerated")
}

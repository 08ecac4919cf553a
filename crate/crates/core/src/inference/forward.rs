use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::checksum::hash_json;
use crate::error::{Error, Result};
use crate::evolution::{evolve, window_mass, EvolutionConfig};
use crate::field::{GridField, Window};
use crate::model::{ConstitutiveModel, ModelSpec};
use crate::resolvent::ResolventConfig;

/// Everything except the exponent that determines a forward solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub u0: GridField,
    /// Model whose `gamma` is replaced at every evaluation.
    #[serde(with = "model_spec")]
    pub template: ConstitutiveModel,
    pub t_final: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub resolvent: ResolventConfig,
}

mod model_spec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &ConstitutiveModel, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelSpec::from(*m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ConstitutiveModel, D::Error> {
        ModelSpec::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

impl Scenario {
    pub fn with_steps(&self, n_steps: usize) -> Scenario {
        Scenario {
            n_steps,
            ..self.clone()
        }
    }

    pub fn hash(&self) -> Result<String> {
        hash_json(self)
    }

    /// Observations `m_{jk}` at every time `t_j` and window `Q_k`, flattened
    /// with the window index fastest.
    pub fn observe(&self, gamma: f64, windows: &[Window], times: &[f64]) -> Result<Vec<f64>> {
        let wrap = |e: Error| Error::Forward {
            gamma,
            source: Box::new(e),
        };
        if let Some(t) = times.iter().find(|t| **t > self.t_final * (1.0 + 1e-12)) {
            return Err(Error::input(format!(
                "observation time {t} exceeds the scenario horizon {}",
                self.t_final
            )));
        }
        let model = self.template.with_gamma(gamma).map_err(wrap)?;
        let cfg = EvolutionConfig {
            resolvent: self.resolvent.clone(),
            snapshot_times: times.to_vec(),
            ..EvolutionConfig::new(self.t_final, self.n_steps)
        };
        let tr = evolve(&self.u0, &model, &cfg).map_err(wrap)?;
        let mut out = Vec::with_capacity(times.len() * windows.len());
        for t in times {
            let u = tr.snapshot_at(*t).expect("requested snapshot present");
            for w in windows {
                out.push(window_mass(u, w)?);
            }
        }
        Ok(out)
    }
}

type CacheKey = (String, u64, usize);

/// Exact-key memo of forward solves, keyed by `(scenario hash, gamma bits, n_steps)`.
#[derive(Debug, Default)]
pub struct ForwardCache {
    map: RwLock<HashMap<CacheKey, Arc<Vec<f64>>>>,
}

impl ForwardCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &CacheKey) -> Option<Arc<Vec<f64>>> {
        self.map.read().expect("cache lock").get(key).cloned()
    }

    fn insert(&self, key: CacheKey, value: Arc<Vec<f64>>) {
        self.map.write().expect("cache lock").insert(key, value);
    }
}

/// The map `gamma -> M(gamma)` for one scenario and observation layout.
#[derive(Debug)]
pub struct ForwardModel {
    scenario: Scenario,
    scenario_hash: String,
    windows: Vec<Window>,
    times: Vec<f64>,
    cache: Arc<ForwardCache>,
}

impl ForwardModel {
    pub fn new(scenario: Scenario, windows: Vec<Window>, times: Vec<f64>) -> Result<Self> {
        Self::with_cache(scenario, windows, times, Arc::new(ForwardCache::new()))
    }

    pub fn with_cache(scenario: Scenario, windows: Vec<Window>, times: Vec<f64>, cache: Arc<ForwardCache>) -> Result<Self> {
        for w in &windows {
            w.cell_ranges(scenario.u0.spec())?;
        }
        let scenario_hash = scenario.hash()?;
        Ok(ForwardModel {
            scenario,
            scenario_hash,
            windows,
            times,
            cache,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn cache(&self) -> &Arc<ForwardCache> {
        &self.cache
    }

    pub fn evaluate(&self, gamma: f64) -> Result<Arc<Vec<f64>>> {
        let key = (self.scenario_hash.clone(), gamma.to_bits(), self.scenario.n_steps);
        if let Some(v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = Arc::new(self.scenario.observe(gamma, &self.windows, &self.times)?);
        self.cache.insert(key, Arc::clone(&v));
        Ok(v)
    }
}

//! Process-wide memo of pair scores, shared across pools and worker threads.

use dashmap::DashMap;

/// Concurrent map from a canonical `(hypothesis, reference)` pair to its
/// utility under one fixed metric. A cache never mixes metrics; the driver
/// checks the id before use.
#[derive(Debug)]
pub struct PairCache {
    metric_id: String,
    scores: DashMap<(String, String), f32>,
}

impl PairCache {
    pub fn new(metric_id: &str) -> Self {
        Self {
            metric_id: metric_id.to_string(),
            scores: DashMap::new(),
        }
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn get(&self, hyp: &str, reference: &str) -> Option<f32> {
        self.scores
            .get(&(hyp.to_string(), reference.to_string()))
            .map(|v| *v)
    }

    pub fn insert(&self, hyp: &str, reference: &str, score: f32) {
        self.scores
            .insert((hyp.to_string(), reference.to_string()), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stores_and_returns_pair_scores() {
        let cache = PairCache::new("exact_match");
        assert!(cache.get("a", "b").is_none());
        cache.insert("a", "b", 0.5);
        assert_eq!(cache.get("a", "b"), Some(0.5));
        assert!(cache.get("b", "a").is_none(), "pairs are ordered");
        assert_eq!(cache.len(), 1);
    }
}

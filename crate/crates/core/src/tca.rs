//! Temporal concept analysis: conceptual time systems per tracked entity
//! and their life tracks through a concept lattice.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::context::FormalContext;
use crate::corpus::Document;
use crate::fca::ConceptLattice;
use crate::ontology::{MissingKeyPolicy, ObjectClusterRule, MISSING_KEY_GROUP};
use crate::time::{format_timestamp, Granularity};

#[derive(Debug, thiserror::Error)]
pub enum TcaError {
    #[error("document {0} has no timestamp")]
    MissingTimestamp(String),
    #[error("entity rule {rule}: document {document} has no key")]
    MissingKey { rule: String, document: String },
    #[error("granule object {0} is not an object of the context")]
    UnknownObject(String),
    #[error("lattice and context disagree: {0}")]
    Mismatch(String),
    #[error("track of {entity} refers to concept {concept}, lattice has {len}")]
    UnknownConcept { entity: String, concept: usize, len: usize },
}

/// One observation of an entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Granule {
    pub object_id: String,
    /// Original document timestamp.
    pub timestamp: DateTime<Utc>,
    /// Timestamp truncated to the system's granularity.
    pub instant: DateTime<Utc>,
    /// 0 for the first granule at `instant`, 1 for the next one tied with
    /// it, and so on. `(instant, tie_rank)` strictly increases along a system.
    pub tie_rank: u32,
}

impl Granule {
    pub fn order_key(&self) -> (DateTime<Utc>, u32) {
        (self.instant, self.tie_rank)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptualTimeSystem {
    pub entity: String,
    pub granularity: Granularity,
    /// Sorted by `(instant, document id)`.
    pub granules: Vec<Granule>,
}

impl ConceptualTimeSystem {
    /// The time relation: each granule paired with its successor.
    pub fn relation(&self) -> Vec<(usize, usize)> {
        (1..self.granules.len()).map(|i| (i - 1, i)).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TimeSystems {
    /// One system per entity, ordered by entity key.
    pub systems: Vec<ConceptualTimeSystem>,
    pub warnings: Vec<String>,
}

/// Groups documents by the entity rule's key and orders each group in time.
/// Granules whose truncated instants tie are ordered by document id and
/// reported as warnings.
pub fn build_time_system(
    documents: &[Document],
    entity_rule: &ObjectClusterRule,
    granularity: Granularity,
) -> Result<TimeSystems, TcaError> {
    let mut groups: BTreeMap<String, Vec<Granule>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for doc in documents {
        let timestamp = doc.timestamp.ok_or_else(|| TcaError::MissingTimestamp(doc.id.clone()))?;
        let entity = match (entity_rule.key_of(doc), entity_rule.missing) {
            (Some(k), _) => k,
            (None, MissingKeyPolicy::Skip) => {
                warnings.push(format!("document {} has no entity key, skipped", doc.id));
                continue;
            }
            (None, MissingKeyPolicy::OwnGroup) => MISSING_KEY_GROUP.to_string(),
            (None, MissingKeyPolicy::Error) => {
                return Err(TcaError::MissingKey {
                    rule: entity_rule.name.clone(),
                    document: doc.id.clone(),
                })
            }
        };
        groups.entry(entity).or_default().push(Granule {
            object_id: doc.id.clone(),
            timestamp,
            instant: granularity.truncate(&timestamp),
            tie_rank: 0,
        });
    }

    let systems = groups
        .into_iter()
        .map(|(entity, mut granules)| {
            granules.sort_by(|a, b| a.instant.cmp(&b.instant).then_with(|| a.object_id.cmp(&b.object_id)));
            for i in 1..granules.len() {
                if granules[i].instant == granules[i - 1].instant {
                    granules[i].tie_rank = granules[i - 1].tie_rank + 1;
                    warnings.push(format!(
                        "entity {entity}: {} and {} share {} granule {}; ordered by document id",
                        granules[i - 1].object_id,
                        granules[i].object_id,
                        granularity,
                        granularity.key(&granules[i].instant)
                    ));
                }
            }
            ConceptualTimeSystem {
                entity,
                granularity,
                granules,
            }
        })
        .collect();
    Ok(TimeSystems { systems, warnings })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from_concept: usize,
    pub to_concept: usize,
    pub from_granule: Granule,
    pub to_granule: Granule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifeTrack {
    pub entity: String,
    /// Object concept of each granule, in time order.
    pub concepts: Vec<usize>,
    pub transitions: Vec<Transition>,
}

/// Maps every granule to its object concept and chains the transitions.
pub fn compute_life_tracks(
    systems: &[ConceptualTimeSystem],
    lattice: &ConceptLattice,
    ctx: &FormalContext,
) -> Result<Vec<LifeTrack>, TcaError> {
    if lattice.objects() != ctx.objects() {
        return Err(TcaError::Mismatch("object lists differ".into()));
    }
    systems
        .iter()
        .map(|sys| {
            let concepts = sys
                .granules
                .iter()
                .map(|g| {
                    ctx.object_index(&g.object_id)
                        .map(|i| lattice.object_concept(i))
                        .ok_or_else(|| TcaError::UnknownObject(g.object_id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let transitions = sys
                .relation()
                .into_iter()
                .map(|(a, b)| Transition {
                    from_concept: concepts[a],
                    to_concept: concepts[b],
                    from_granule: sys.granules[a].clone(),
                    to_granule: sys.granules[b].clone(),
                })
                .collect();
            Ok(LifeTrack {
                entity: sys.entity.clone(),
                concepts,
                transitions,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackStep {
    pub from: usize,
    pub to: usize,
    pub from_object: String,
    pub to_object: String,
    pub from_time: String,
    pub to_time: String,
    pub from_rank: u32,
    pub to_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackJson {
    pub entity: String,
    pub concepts: Vec<usize>,
    pub steps: Vec<TrackStep>,
}

/// Lattice JSON with a `trackList` of per-entity step sequences.
pub fn export_tracks(lattice: &ConceptLattice, tracks: &[LifeTrack]) -> Result<String, TcaError> {
    let mut json = lattice.to_json_model();
    let len = lattice.len();
    let mut list = Vec::with_capacity(tracks.len());
    for t in tracks {
        if let Some(&bad) = t.concepts.iter().find(|&&c| c >= len) {
            return Err(TcaError::UnknownConcept {
                entity: t.entity.clone(),
                concept: bad,
                len,
            });
        }
        list.push(TrackJson {
            entity: t.entity.clone(),
            concepts: t.concepts.clone(),
            steps: t
                .transitions
                .iter()
                .map(|tr| TrackStep {
                    from: tr.from_concept,
                    to: tr.to_concept,
                    from_object: tr.from_granule.object_id.clone(),
                    to_object: tr.to_granule.object_id.clone(),
                    from_time: format_timestamp(&tr.from_granule.instant),
                    to_time: format_timestamp(&tr.to_granule.instant),
                    from_rank: tr.from_granule.tie_rank,
                    to_rank: tr.to_granule.tie_rank,
                })
                .collect(),
        });
    }
    json.track_list = Some(list);
    Ok(json.render())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::ClusterKey;
    use crate::time::parse_timestamp;

    fn doc(id: &str, who: &str, t: &str) -> Document {
        Document::new(id, format!("http://x/{id}"))
            .with_field("suspect", who)
            .with_timestamp(parse_timestamp(t).unwrap())
    }

    fn rule() -> ObjectClusterRule {
        ObjectClusterRule::new("suspect", ClusterKey::Field("suspect".into()), MissingKeyPolicy::Skip)
    }

    #[test]
    fn single_entity_ordering() {
        let docs = [doc("c", "S1", "2009-03-01"), doc("a", "S1", "2009-01-01"), doc("b", "S1", "2009-02-01")];
        let ts = build_time_system(&docs, &rule(), Granularity::Day).unwrap();
        assert_eq!(ts.systems.len(), 1);
        let ids: Vec<_> = ts.systems[0].granules.iter().map(|g| g.object_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(ts.systems[0].relation(), [(0, 1), (1, 2)]);
        assert!(ts.warnings.is_empty());
    }

    #[test]
    fn interleaved_entities_are_independent() {
        let docs = [
            doc("d1", "S1", "2009-01-01"),
            doc("d2", "S2", "2009-01-02"),
            doc("d3", "S1", "2009-01-03"),
            doc("d4", "S2", "2009-01-04"),
        ];
        let ts = build_time_system(&docs, &rule(), Granularity::Day).unwrap();
        let ids: Vec<Vec<&str>> = ts
            .systems
            .iter()
            .map(|s| s.granules.iter().map(|g| g.object_id.as_str()).collect())
            .collect();
        assert_eq!(ids, [vec!["d1", "d3"], vec!["d2", "d4"]]);
    }

    #[test]
    fn same_day_ties_break_by_id() {
        let docs = [doc("z", "S1", "2009-01-01T18:00:00Z"), doc("y", "S1", "2009-01-01T08:00:00Z")];
        let ts = build_time_system(&docs, &rule(), Granularity::Day).unwrap();
        let g = &ts.systems[0].granules;
        assert_eq!((g[0].object_id.as_str(), g[1].object_id.as_str()), ("y", "z"));
        assert!(g[0].order_key() < g[1].order_key());
        assert_eq!(ts.warnings.len(), 1);
    }

    #[test]
    fn untimed_document_is_an_error() {
        let docs = [Document::new("u", "x").with_field("suspect", "S")];
        assert!(matches!(
            build_time_system(&docs, &rule(), Granularity::Day),
            Err(TcaError::MissingTimestamp(_))
        ));
        assert!(build_time_system(&[], &rule(), Granularity::Day).unwrap().systems.is_empty());
    }

    #[test]
    fn tracks_follow_object_concepts() {
        let ctx = FormalContext::from_bools(["a", "b", "c"], ["x"], &[vec![false], vec![true], vec![true]]).unwrap();
        let lat = ConceptLattice::from_context(&ctx).unwrap();
        let docs = [doc("a", "S", "2009-01-01"), doc("b", "S", "2009-01-02"), doc("c", "S", "2009-01-03")];
        let ts = build_time_system(&docs, &rule(), Granularity::Day).unwrap();
        let tracks = compute_life_tracks(&ts.systems, &lat, &ctx).unwrap();
        assert_eq!(tracks[0].transitions.len(), 2);
        assert_eq!(tracks[0].transitions[1].from_concept, tracks[0].transitions[1].to_concept);
        let json: serde_json::Value = serde_json::from_str(&export_tracks(&lat, &tracks).unwrap()).unwrap();
        assert_eq!(json["trackList"][0]["steps"].as_array().unwrap().len(), 2);

        let stranger = [doc("q", "S", "2009-01-01")];
        let ts = build_time_system(&stranger, &rule(), Granularity::Day).unwrap();
        assert!(matches!(compute_life_tracks(&ts.systems, &lat, &ctx), Err(TcaError::UnknownObject(_))));
    }
}

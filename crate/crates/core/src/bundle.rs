//! The scenario bundle: one JSON document with the normative sections
//! `geometry`, `pedestrian_types`, `routes`, `objects`, `demand_settings`
//! and `analyses`, plus optional simulation defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::PedestrianType;
use crate::analysis::AnalysisDef;
use crate::demand::{DemandError, DemandStore, ODMatrix, SupplyType};
use crate::geometry::Environment;
use crate::scenario::{RouteSpec, ScenarioObjects};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Demand(#[from] DemandError),
}

/// Demand section: named OD settings, the active one, type mixes per source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandSettings {
    /// Name of the setting used by runs.
    #[serde(default)]
    pub active: String,
    #[serde(flatten)]
    pub store: DemandStore,
    #[serde(default)]
    pub supply_types: Vec<SupplyType>,
}

/// Optional run defaults carried with the scenario; CLI flags override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nav_cell: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBundle {
    pub geometry: Environment,
    pub pedestrian_types: Vec<PedestrianType>,
    pub routes: Vec<RouteSpec>,
    pub objects: ScenarioObjects,
    pub demand_settings: DemandSettings,
    #[serde(default)]
    pub analyses: Vec<AnalysisDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimDefaults>,
}

impl ScenarioBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        let mut bundle: ScenarioBundle =
            serde_json::from_str(text).map_err(|e| BundleError::Json(e.to_string()))?;
        bundle.geometry.rebuild_index();
        Ok(bundle)
    }

    /// The OD matrix runs draw from.
    pub fn active_demand(&self) -> Result<&ODMatrix, DemandError> {
        if self.demand_settings.store.settings.is_empty() {
            return Err(DemandError::UnknownSetting { name: self.demand_settings.active.clone(), available: vec![] });
        }
        if self.demand_settings.active.is_empty() {
            // Single unnamed setting: use the first.
            return Ok(self.demand_settings.store.settings.values().next().expect("nonempty"));
        }
        self.demand_settings.store.load_setting(&self.demand_settings.active)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::default_type_library;
    use crate::demand::OdBin;
    use crate::geometry::{Layer, Obstacle, Point2, Polyline};
    use crate::scenario::{ChoiceRule, SinkArea, SourceArea, Stage};
    use std::collections::BTreeMap;

    fn square(x: f64, y: f64, side: f64) -> Polyline {
        Polyline::closed(vec![
            Point2::xy(x, y),
            Point2::xy(x + side, y),
            Point2::xy(x + side, y + side),
            Point2::xy(x, y + side),
        ])
        .unwrap()
    }

    pub fn tiny_bundle() -> ScenarioBundle {
        let mut store = DemandStore::default();
        store
            .store_setting(
                "base",
                ODMatrix::new(vec![OdBin {
                    bin_start: 0.0,
                    bin_length: 10.0,
                    origin: "src".into(),
                    destination: "route".into(),
                    count: 5,
                }])
                .unwrap(),
            )
            .unwrap();
        let mut mix = BTreeMap::new();
        mix.insert("commuter".to_string(), 100.0);
        ScenarioBundle {
            geometry: Environment::new(
                vec![Layer { name: "walls".into(), obstacle_active: true }],
                vec![Obstacle {
                    id: 1,
                    shape: Polyline::open(vec![Point2::xy(0.0, -1.0), Point2::xy(20.0, -1.0)]).unwrap(),
                    layer: "walls".into(),
                    circle: None,
                }],
            )
            .unwrap(),
            pedestrian_types: default_type_library(),
            routes: vec![RouteSpec {
                id: "route".into(),
                stages: vec![Stage {
                    candidates: vec!["exit".into()],
                    choice: ChoiceRule::ShortestDistance,
                }],
            }],
            objects: ScenarioObjects {
                sources: vec![SourceArea {
                    id: "src".into(),
                    polygon: square(0.0, 0.0, 2.0),
                    arrival: crate::demand::SpreadPolicy::Uniform,
                    supply: None,
                }],
                sinks: vec![SinkArea {
                    id: "exit".into(),
                    polygon: square(15.0, 0.0, 2.0),
                    is_emergency_exit: true,
                }],
                ..Default::default()
            },
            demand_settings: DemandSettings {
                active: "base".into(),
                store,
                supply_types: vec![SupplyType { source: "src".into(), mix }],
            },
            analyses: vec![],
            sim: None,
        }
    }

    #[test]
    fn bundle_json_roundtrip_is_exact() {
        let bundle = tiny_bundle();
        let json = bundle.to_json();
        let back = ScenarioBundle::from_json(&json).unwrap();
        assert_eq!(back, bundle);
        // Byte-stable: serializing again yields identical text.
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn active_demand_resolution() {
        let bundle = tiny_bundle();
        assert_eq!(bundle.active_demand().unwrap().total_count(), 5);
        let mut renamed = bundle.clone();
        renamed.demand_settings.active = "missing".into();
        assert!(renamed.active_demand().is_err());
    }
}

//! Scenario consistency checking: reachability, reference integrity,
//! percentage sums and object parameter sanity, reported with object ids.

use std::collections::BTreeSet;

use crate::bundle::ScenarioBundle;
use crate::engine::nav::{build_nav_field, CostModel};
use crate::scenario::ChoiceRule;

/// Errors block a run; warnings do not.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks the whole bundle; never fails, the report carries the findings.
pub fn validate_scenario(bundle: &ScenarioBundle) -> ValidationReport {
    let mut report = ValidationReport::default();
    let objects = &bundle.objects;
    let env = &bundle.geometry;

    // Unique object ids.
    let mut seen = BTreeSet::new();
    for id in objects.all_ids() {
        if !seen.insert(id.to_string()) {
            report.errors.push(format!("duplicate object id '{id}'"));
        }
    }

    // Pedestrian types.
    if bundle.pedestrian_types.is_empty() {
        report.errors.push("no pedestrian types defined".to_string());
    }
    for t in &bundle.pedestrian_types {
        if let Err(e) = t.validate() {
            report.errors.push(e.to_string());
        }
    }

    // Supply types reference defined pedestrian types and sum to 100.
    for supply in &bundle.demand_settings.supply_types {
        if let Err(e) = supply.validate() {
            report.errors.push(e.to_string());
        }
        for type_name in supply.mix.keys() {
            if !bundle.pedestrian_types.iter().any(|t| &t.name == type_name) {
                report.errors.push(format!(
                    "supply for '{}' references unknown pedestrian type '{type_name}'",
                    supply.source
                ));
            }
        }
    }

    // Demand: origins must be sources, destinations must be routes.
    match bundle.active_demand() {
        Ok(matrix) => {
            for bin in &matrix.bins {
                if !objects.sources.iter().any(|s| s.id == bin.origin) {
                    report
                        .errors
                        .push(format!("demand origin '{}' is not a source", bin.origin));
                }
                if !bundle.routes.iter().any(|r| r.id == bin.destination) {
                    report.errors.push(format!(
                        "demand destination '{}' is not a route",
                        bin.destination
                    ));
                }
            }
            // Every source with demand needs a route; sources without demand
            // are only worth a warning.
            for source in &objects.sources {
                if !matrix.bins.iter().any(|b| b.origin == source.id) {
                    report
                        .warnings
                        .push(format!("source '{}' has no demand in the active setting", source.id));
                }
            }
        }
        Err(e) => report.errors.push(e.to_string()),
    }

    // Routes: known candidates, percentage sums, sinks-only final stage.
    for route in &bundle.routes {
        if route.stages.is_empty() {
            report.errors.push(format!("route '{}' has no stages", route.id));
            continue;
        }
        for (si, stage) in route.stages.iter().enumerate() {
            if stage.candidates.is_empty() {
                report
                    .errors
                    .push(format!("route '{}' stage {si} has no candidates", route.id));
            }
            for c in &stage.candidates {
                if objects.node(c).is_none() {
                    report.errors.push(format!(
                        "route '{}' stage {si} references unknown node '{c}'",
                        route.id
                    ));
                }
            }
            if let ChoiceRule::Percentage(map) = &stage.choice {
                let sum: f64 = map.values().sum();
                if (sum - 100.0).abs() > 1e-9 {
                    report.errors.push(format!(
                        "route '{}' stage {si} percentages sum to {sum}, expected 100",
                        route.id
                    ));
                }
                for key in map.keys() {
                    if !stage.candidates.contains(key) {
                        report.errors.push(format!(
                            "route '{}' stage {si} percentage references non-candidate '{key}'",
                            route.id
                        ));
                    }
                }
            }
        }
        let last = route.stages.last().unwrap();
        for c in &last.candidates {
            if !objects.sinks.iter().any(|s| &s.id == c) {
                report.errors.push(format!(
                    "route '{}' final stage contains non-sink '{c}'",
                    route.id
                ));
            }
        }
    }

    // Zones: conditions must reference defined monitors, factors positive.
    let monitor_names: BTreeSet<String> =
        objects.monitored_areas().into_iter().map(|(n, _)| n).collect();
    for zone in &objects.zones {
        if let Some(cond) = &zone.condition {
            if !monitor_names.contains(&cond.monitor) {
                report.errors.push(format!(
                    "zone '{}' condition references unknown monitor '{}'",
                    zone.id, cond.monitor
                ));
            }
        }
        if let crate::scenario::ZoneEffect::SpeedFactor(f) = zone.effect {
            if f <= 0.0 {
                report
                    .errors
                    .push(format!("zone '{}' speed factor must be > 0", zone.id));
            }
        }
        if let crate::scenario::ZoneEffect::SetTarget(node) = &zone.effect {
            if objects.node(node).is_none() {
                report
                    .errors
                    .push(format!("zone '{}' targets unknown node '{node}'", zone.id));
            }
        }
        if let crate::scenario::ZoneEffect::SetType(name) = &zone.effect {
            if !bundle.pedestrian_types.iter().any(|t| &t.name == name) {
                report
                    .errors
                    .push(format!("zone '{}' sets unknown type '{name}'", zone.id));
            }
        }
    }

    // Stairs and escalators.
    for stair in &objects.stairs {
        if !(stair.speed_factor_up > 0.0 && stair.speed_factor_up <= 1.0)
            || !(stair.speed_factor_down > 0.0 && stair.speed_factor_down <= 1.0)
        {
            report
                .errors
                .push(format!("stair '{}' speed factors must lie in (0, 1]", stair.id));
        }
        if stair.width <= 0.0 {
            report.errors.push(format!("stair '{}' width must be > 0", stair.id));
        }
    }
    for esc in &objects.escalators {
        if esc.capacity_ppm == 0 {
            report
                .errors
                .push(format!("escalator '{}' capacity must be > 0 ppm", esc.id));
        }
        if esc.transit_time <= 0.0 {
            report
                .errors
                .push(format!("escalator '{}' transit time must be > 0", esc.id));
        }
    }

    // Delay and queue parameter sanity.
    for d in &objects.delay_areas {
        if d.delay.min_value() < 0.0 {
            report
                .errors
                .push(format!("delay area '{}' allows negative delays", d.id));
        }
    }
    for q in &objects.queues {
        if q.service_points == 0 {
            report
                .errors
                .push(format!("queue '{}' needs at least one service point", q.id));
        }
        if q.service_time.min_value() < 0.0 {
            report
                .errors
                .push(format!("queue '{}' allows negative service times", q.id));
        }
    }

    // Sources: interior must be walkable (checked at the centroid).
    let max_radius = bundle
        .pedestrian_types
        .iter()
        .map(|t| t.radius)
        .fold(0.1, f64::max);
    for source in &objects.sources {
        if !source.polygon.closed {
            report
                .errors
                .push(format!("source '{}' polygon must be closed", source.id));
            continue;
        }
        let c = source.polygon.centroid();
        if !env.walkable(c, max_radius) {
            report
                .warnings
                .push(format!("source '{}' centroid is not walkable", source.id));
        }
    }

    // Reachability: every route-stage node must have a finite navigation
    // field at the centroids of the sources that feed the route.
    let mut bounds = env.bbox();
    for (_, poly) in objects.monitored_areas() {
        bounds = bounds.union(poly.bbox());
    }
    for s in &objects.sources {
        bounds = bounds.union(s.polygon.bbox());
    }
    bounds = bounds.inflate(2.0);
    let nav_cell = bundle.sim.as_ref().and_then(|s| s.nav_cell).unwrap_or(0.25);
    let feeder_sources = |route_id: &str| -> Vec<crate::geometry::Point2> {
        match bundle.active_demand() {
            Ok(m) => objects
                .sources
                .iter()
                .filter(|s| {
                    m.bins
                        .iter()
                        .any(|b| b.origin == s.id && b.destination == route_id)
                })
                .map(|s| s.polygon.centroid())
                .collect(),
            Err(_) => vec![],
        }
    };
    for route in &bundle.routes {
        let feeders = feeder_sources(&route.id);
        if feeders.is_empty() {
            continue;
        }
        for (si, stage) in route.stages.iter().enumerate() {
            let mut reachable_any = stage.candidates.is_empty();
            for c in &stage.candidates {
                let Some(node) = objects.node(c) else { continue };
                let shape = node.arrival_shape().clone();
                let field = build_nav_field(
                    env,
                    c,
                    &shape,
                    bounds,
                    nav_cell,
                    max_radius,
                    CostModel::Distance,
                );
                match field {
                    Ok(field) => {
                        if feeders.iter().any(|p| field.distance_at(*p).is_some()) {
                            reachable_any = true;
                        }
                    }
                    Err(_) => {}
                }
            }
            if !reachable_any {
                report.errors.push(format!(
                    "unreachable stage: route '{}' stage {si} has no candidate reachable from its sources",
                    route.id
                ));
            }
        }
    }

    // Evacuation prerequisites are soft at scenario level.
    if !objects.sinks.iter().any(|s| s.is_emergency_exit) {
        report
            .warnings
            .push("no emergency exit defined; evacuation runs will fail".to_string());
    }

    report
}

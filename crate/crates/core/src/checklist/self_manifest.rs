//! This engine's own capability manifest, maintained alongside the code.
//! Every "yes" names the test group that exercises the feature; a feature
//! may only answer yes while that group exists and passes.

use super::{Answer, CapabilityManifest};

/// (item id, answer, evidence). Evidence is the test group backing a yes.
const CAPABILITIES: [(&str, Answer, Option<&str>); 112] = [
    ("2d.space_continuous", Answer::Yes, Some("geometry::tests")),
    ("2d.space_discrete", Answer::No, None),
    ("2d.grid_size_variable", Answer::No, None),
    ("2d.cad_import_reference", Answer::Yes, Some("geometry::dxf::tests::roundtrip_preserves_layers_and_geometry")),
    ("2d.cad_import_obstacle", Answer::Yes, Some("geometry::dxf::tests")),
    ("2d.cad_manipulation", Answer::Yes, Some("geometry::tests::copy_then_delete_original_is_congruent")),
    ("2d.cad_layers", Answer::Yes, Some("geometry::tests::walkable_containment_and_layer_toggle")),
    ("2d.simulation_layers", Answer::Yes, Some("geometry::tests::walkable_containment_and_layer_toggle")),
    ("2d.cad_export", Answer::Yes, Some("geometry::dxf::tests::one_obstacle_exports_one_entity")),
    ("2d.cad_copy_across_models", Answer::No, None),
    ("2d.cad_picture_import", Answer::No, None),
    ("2d.measuring", Answer::Yes, Some("geometry::tests::distance_three_four_five")),
    ("3d.representation_native", Answer::No, None),
    ("3d.representation_external", Answer::No, None),
    ("3d.pedestrians", Answer::No, None),
    ("3d.import", Answer::No, None),
    ("3d.manipulation", Answer::No, None),
    ("3d.layers", Answer::No, None),
    ("3d.export", Answer::No, None),
    ("3d.object_animation_native", Answer::No, None),
    ("3d.object_animation_import", Answer::No, None),
    ("3d.animated_pedestrians_native", Answer::No, None),
    ("3d.animated_pedestrians_import", Answer::No, None),
    ("adv.stairs", Answer::Yes, Some("engine::tests::stair_zone_scales_speed")),
    ("adv.escalators", Answer::Yes, Some("engine::tests::escalator_respects_ppm_capacity")),
    ("adv.lifts", Answer::No, None),
    ("adv.train", Answer::No, None),
    ("adv.car", Answer::No, None),
    ("adv.bus", Answer::No, None),
    ("adv.plane", Answer::No, None),
    ("adv.ship", Answer::No, None),
    ("adv.context_objects", Answer::No, None),
    ("route.input_areas", Answer::Yes, Some("engine::tests::spawn_boundary_tick")),
    ("route.exit_areas", Answer::Yes, Some("engine::tests::sink_absorption_logs_exit")),
    ("route.target_areas", Answer::Yes, Some("engine::tests::route_through_marker")),
    ("route.waiting_areas", Answer::Yes, Some("engine::tests::waiting_area_holds_and_releases")),
    ("route.behavior_zones", Answer::No, None),
    ("route.delay_areas", Answer::Yes, Some("engine::tests::delay_area_holds_agents")),
    ("route.modifier_objects", Answer::Yes, Some("scenario::tests::condition_strictness")),
    ("route.queuing_areas", Answer::Yes, Some("scenario::tests::queue_single_server_fifo")),
    ("route.routes_fixed", Answer::Yes, Some("engine::tests::route_through_marker")),
    ("route.routes_dynamic", Answer::Yes, Some("engine::tests::zone_retargets_on_condition")),
    ("route.route_choice", Answer::Yes, Some("scenario::tests::percentage_split_converges")),
    ("route.filtering", Answer::Yes, Some("scenario::tests::filters_compose_conjunctively")),
    ("route.dynamic_assignment", Answer::Yes, Some("engine::nav::tests::quickest_time_penalizes_dense_cells")),
    ("od.import_worksheet", Answer::Yes, Some("demand::tests::parse_single_row")),
    ("od.import_timetable", Answer::Yes, Some("demand::tests::timetable_mode_for_one_second_bins")),
    ("od.import_spread", Answer::Yes, Some("demand::tests::uniform_spread_timing_rule")),
    ("od.supply_types", Answer::Yes, Some("demand::tests::supply_mix_must_sum_to_100")),
    ("od.manipulation", Answer::Yes, Some("demand::tests::scale_examples")),
    ("od.export_worksheet", Answer::Yes, Some("demand::tests::export_roundtrip_and_shape")),
    ("od.multiple_settings", Answer::Yes, Some("demand::tests::settings_store_and_load")),
    ("evac.mode", Answer::Yes, Some("acceptance::criterion_09_evacuation")),
    ("evac.reaction_time", Answer::Yes, Some("acceptance::criterion_09_evacuation")),
    ("evac.familiarity", Answer::Yes, Some("engine::tests::familiarity_limits_exit_knowledge")),
    ("evac.smoke_import", Answer::No, None),
    ("ped.speed_distributed", Answer::Yes, Some("agents::tests::sampled_mean_matches_truncated_normal")),
    ("ped.size_customizable", Answer::Yes, Some("agents::tests::default_library_is_valid_and_has_prm")),
    ("ped.luggage", Answer::Yes, Some("agents::tests::luggage_factor_scales_speed")),
    ("ped.prm", Answer::Yes, Some("agents::tests::default_library_is_valid_and_has_prm")),
    ("ped.agent_libraries", Answer::Yes, Some("agents::tests::default_library_is_valid_and_has_prm")),
    ("ped.collision_avoidance", Answer::Yes, Some("agents::tests::head_on_pair_passes_with_clearance")),
    ("ped.target_seeking", Answer::Yes, Some("engine::nav::tests::descent_direction_points_at_target_in_open_space")),
    ("ped.planned_activities", Answer::Yes, Some("engine::tests::route_through_marker")),
    ("ped.environment_knowledge", Answer::No, None),
    ("ped.perceive_obstacles", Answer::Yes, Some("agents::tests::wall_ahead_caps_admitted_speed")),
    ("ped.perceive_agents", Answer::Yes, Some("agents::tests::head_on_pair_passes_with_clearance")),
    ("ped.perceive_density", Answer::Yes, Some("engine::nav::tests::quickest_time_penalizes_dense_cells")),
    ("ped.perceive_signals", Answer::Yes, Some("acceptance::criterion_09_evacuation")),
    ("ped.groups", Answer::No, None),
    ("out.local_density", Answer::Yes, Some("analysis::tests::local_density_division")),
    ("out.los_cmd", Answer::Yes, Some("analysis::tests::los_default_scale_examples")),
    ("out.utilization", Answer::Yes, Some("analysis::tests::utilization_fraction")),
    ("out.transfer_times_lines", Answer::Yes, Some("analysis::tests::transfer_time_hand_value")),
    ("out.transfer_times_area", Answer::Yes, Some("analysis::tests::transfer_time_mean_and_filter")),
    ("out.queuing_time", Answer::Yes, Some("analysis::tests::action_times_aggregates")),
    ("out.service_factor", Answer::Yes, Some("analysis::tests::service_factor_weighted_mean")),
    ("out.distances", Answer::Yes, Some("analysis::tests::distances_straight_walk")),
    ("out.count_two_lines", Answer::Yes, Some("analysis::tests::pair_crossings_require_order")),
    ("out.count_single_line", Answer::Yes, Some("analysis::tests::crossing_counts_and_signs")),
    ("out.count_area", Answer::Yes, Some("analysis::tests::local_density_division")),
    ("out.filtering", Answer::Yes, Some("analysis::tests::filter_partition_is_exhaustive")),
    ("out.social_cost", Answer::Yes, Some("analysis::tests::social_cost_arithmetic")),
    ("out.export_worksheet", Answer::Yes, Some("analysis::tests::analysis_table_roundtrip")),
    ("out.auto_generation", Answer::Yes, Some("engine::tests::scheduled_analysis_emissions")),
    ("pres.video_output", Answer::Yes, Some("presentation::tests::frame_emission_count_and_names")),
    ("pres.screenshots", Answer::No, None),
    ("pres.density_maps", Answer::Yes, Some("presentation::tests::density_map_blocks")),
    ("pres.sf_maps", Answer::No, None),
    ("pres.utilization_maps", Answer::Yes, Some("analysis::tests::utilization_fraction")),
    ("pres.time_maps", Answer::Yes, Some("presentation::tests::time_map_marks_cells_and_threshold")),
    ("pres.charts", Answer::No, None),
    ("pres.color_schemes", Answer::Yes, Some("presentation::tests::two_agents_get_distinct_colors")),
    ("pres.trails", Answer::Yes, Some("presentation::tests::trails_draw_one_colored_run")),
    ("pres.time_stamp", Answer::Yes, Some("presentation::tests::stamp_format")),
    ("pres.auto_maps", Answer::Yes, Some("presentation::tests::frame_emission_count_and_names")),
    ("veh.traffic_native", Answer::No, None),
    ("veh.traffic_import", Answer::No, None),
    ("veh.bicycles", Answer::No, None),
    ("veh.interaction", Answer::No, None),
    ("veh.non_compliant", Answer::No, None),
    ("rob.consistency_check", Answer::Yes, Some("scenario::validate (acceptance::criterion_validate)")),
    ("rob.agents_100k", Answer::Yes, Some("acceptance::criterion_03_capacity")),
    ("rob.crash_free", Answer::No, None),
    ("rob.usability", Answer::No, None),
    ("rob.parallel_runs", Answer::Yes, Some("engine::tests::batch_runs_isolated_and_seeded")),
    ("rob.seed_control", Answer::Yes, Some("acceptance::criterion_02_determinism")),
    ("rob.batch_runs", Answer::Yes, Some("engine::tests::batch_runs_isolated_and_seeded")),
    ("val.real_observations", Answer::No, None),
    ("val.fruin_defaults", Answer::Yes, Some("acceptance::criterion_07_speed_density_and_los")),
    ("val.case_by_case", Answer::Yes, Some("README calibration notes; agents::default_type_library")),
    ("val.certified", Answer::No, None),
];

/// This engine's answers to the built-in checklist.
pub fn self_manifest() -> CapabilityManifest {
    CapabilityManifest {
        product: "pedsim".to_string(),
        answers: CAPABILITIES
            .iter()
            .map(|(id, answer, _)| (id.to_string(), *answer))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checklist::{builtin_checklist, score};

    #[test]
    fn self_manifest_answers_every_item_exactly_once() {
        let checklist = builtin_checklist();
        let manifest = self_manifest();
        assert_eq!(manifest.answers.len(), checklist.items.len());
        let report = score(&manifest, &checklist).expect("no missing answers");
        assert_eq!(report.yes + report.no + report.under_development, checklist.items.len());
    }

    #[test]
    fn every_yes_names_its_test_group() {
        for (id, answer, evidence) in CAPABILITIES.iter() {
            if *answer == Answer::Yes {
                assert!(
                    evidence.map_or(false, |e| !e.is_empty()),
                    "yes answer for {id} lacks evidence"
                );
            }
        }
    }

    #[test]
    fn capability_ids_match_checklist_order_free() {
        let checklist = builtin_checklist();
        for (id, _, _) in CAPABILITIES.iter() {
            assert!(checklist.item(id).is_some(), "capability {id} not in checklist");
        }
    }

    #[test]
    fn declared_scope_answers() {
        let manifest = self_manifest();
        assert_eq!(manifest.answers["2d.measuring"], Answer::Yes);
        assert_eq!(manifest.answers["3d.representation_native"], Answer::No);
        assert_eq!(manifest.answers["veh.traffic_native"], Answer::No);
        assert_eq!(manifest.answers["rob.agents_100k"], Answer::Yes);
    }
}

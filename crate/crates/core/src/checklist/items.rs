//! The built-in capability checklist: 12 categories of pedestrian-simulation
//! software functions, with the mandatory core flagged.

use super::{Category, ItemDef};

pub const CATEGORIES: [Category; 12] = [
    Category { prefix: "2d", name: "2D environment" },
    Category { prefix: "3d", name: "3D environment" },
    Category { prefix: "adv", name: "Advanced environmental features" },
    Category { prefix: "route", name: "Modelling and routing" },
    Category { prefix: "od", name: "OD matrix" },
    Category { prefix: "evac", name: "Evacuation" },
    Category { prefix: "ped", name: "Pedestrians" },
    Category { prefix: "out", name: "Analysis outputs" },
    Category { prefix: "pres", name: "Presentation" },
    Category { prefix: "veh", name: "Vehicle interaction" },
    Category { prefix: "rob", name: "Robustness" },
    Category { prefix: "val", name: "Validation" },
];

/// (id, mandatory, description). Ids are category-prefixed slugs so
/// manifests survive checklist reordering.
pub const ITEMS: [ItemDef; 112] = [
    // 2D environment
    ItemDef { id: "2d.space_continuous", mandatory: false, description: "continuous space representation" },
    ItemDef { id: "2d.space_discrete", mandatory: false, description: "discrete grid or cell space representation" },
    ItemDef { id: "2d.grid_size_variable", mandatory: false, description: "customizable cell size for discrete space" },
    ItemDef { id: "2d.cad_import_reference", mandatory: true, description: "import 2D CAD drawings in scale as reference layers" },
    ItemDef { id: "2d.cad_import_obstacle", mandatory: false, description: "imported CAD lines act as physical obstacles" },
    ItemDef { id: "2d.cad_manipulation", mandatory: false, description: "cut, copy, rotate, translate and scale geometry in the tool" },
    ItemDef { id: "2d.cad_layers", mandatory: false, description: "CAD layer structure preserved and editable" },
    ItemDef { id: "2d.simulation_layers", mandatory: false, description: "per-layer toggle for obstacle behavior" },
    ItemDef { id: "2d.cad_export", mandatory: false, description: "export the modified CAD drawing" },
    ItemDef { id: "2d.cad_copy_across_models", mandatory: false, description: "copy CAD objects and layers between model files" },
    ItemDef { id: "2d.cad_picture_import", mandatory: false, description: "raster image import for reference or presentation" },
    ItemDef { id: "2d.measuring", mandatory: true, description: "ruler and protractor measurements in the model" },
    // 3D environment
    ItemDef { id: "3d.representation_native", mandatory: false, description: "3D environment built inside the platform" },
    ItemDef { id: "3d.representation_external", mandatory: false, description: "3D environment prepared in an external modelling tool" },
    ItemDef { id: "3d.pedestrians", mandatory: false, description: "3D pedestrian models from a predefined library" },
    ItemDef { id: "3d.import", mandatory: false, description: "3D CAD import" },
    ItemDef { id: "3d.manipulation", mandatory: false, description: "3D object manipulation inside the platform" },
    ItemDef { id: "3d.layers", mandatory: false, description: "3D objects organized in layers" },
    ItemDef { id: "3d.export", mandatory: false, description: "3D CAD export" },
    ItemDef { id: "3d.object_animation_native", mandatory: false, description: "3D objects animated in the platform" },
    ItemDef { id: "3d.object_animation_import", mandatory: false, description: "imported 3D object animations" },
    ItemDef { id: "3d.animated_pedestrians_native", mandatory: false, description: "walking pedestrians animated in the platform" },
    ItemDef { id: "3d.animated_pedestrians_import", mandatory: false, description: "animated pedestrians imported from external libraries" },
    // Advanced environmental features
    ItemDef { id: "adv.stairs", mandatory: false, description: "stair objects with configurable width, height and flights" },
    ItemDef { id: "adv.escalators", mandatory: false, description: "escalator objects with persons-per-minute capacity" },
    ItemDef { id: "adv.lifts", mandatory: false, description: "lift objects with capacity and call handling" },
    ItemDef { id: "adv.train", mandatory: false, description: "train objects with boarding and alighting" },
    ItemDef { id: "adv.car", mandatory: false, description: "animated car objects" },
    ItemDef { id: "adv.bus", mandatory: false, description: "bus objects with boarding and alighting" },
    ItemDef { id: "adv.plane", mandatory: false, description: "plane objects with boarding and alighting" },
    ItemDef { id: "adv.ship", mandatory: false, description: "ship objects with boarding and alighting" },
    ItemDef { id: "adv.context_objects", mandatory: false, description: "context-specific object libraries" },
    // Modelling and routing
    ItemDef { id: "route.input_areas", mandatory: true, description: "input areas spawning typed pedestrians on a rate or timetable" },
    ItemDef { id: "route.exit_areas", mandatory: true, description: "exit areas absorbing pedestrians" },
    ItemDef { id: "route.target_areas", mandatory: true, description: "intermediate target markers with onward splitting" },
    ItemDef { id: "route.waiting_areas", mandatory: true, description: "waiting areas distributing pedestrians over their interior" },
    ItemDef { id: "route.behavior_zones", mandatory: false, description: "zones biasing speed or direction of crossing pedestrians, including circular motion" },
    ItemDef { id: "route.delay_areas", mandatory: true, description: "delay areas holding pedestrians for fixed or sampled times" },
    ItemDef { id: "route.modifier_objects", mandatory: false, description: "zones switching pedestrian target or type, conditional and filtered" },
    ItemDef { id: "route.queuing_areas", mandatory: true, description: "ordered queue areas with service management" },
    ItemDef { id: "route.routes_fixed", mandatory: true, description: "fixed marker sequences maintained through the run" },
    ItemDef { id: "route.routes_dynamic", mandatory: false, description: "routes that change when run conditions hold" },
    ItemDef { id: "route.route_choice", mandatory: true, description: "target choice by percentage split, occupancy or distance" },
    ItemDef { id: "route.filtering", mandatory: false, description: "pedestrian filtering by kind, destination, visited areas and action" },
    ItemDef { id: "route.dynamic_assignment", mandatory: false, description: "quickest-time routing under observed congestion" },
    // OD matrix
    ItemDef { id: "od.import_worksheet", mandatory: true, description: "OD matrix import from worksheet or CSV files" },
    ItemDef { id: "od.import_timetable", mandatory: false, description: "arrival profiles as exact-time timetables" },
    ItemDef { id: "od.import_spread", mandatory: false, description: "interval counts spread over configurable time spans" },
    ItemDef { id: "od.supply_types", mandatory: false, description: "per-entrance pedestrian type mixes imported with the demand" },
    ItemDef { id: "od.manipulation", mandatory: false, description: "demand editing inside the tool" },
    ItemDef { id: "od.export_worksheet", mandatory: true, description: "OD matrix export to worksheet or CSV" },
    ItemDef { id: "od.multiple_settings", mandatory: false, description: "named demand settings stored with the model" },
    // Evacuation
    ItemDef { id: "evac.mode", mandatory: false, description: "evacuation mode retargeting everyone to the closest exit" },
    ItemDef { id: "evac.reaction_time", mandatory: true, description: "fixed or variable reaction time before responding to the alarm" },
    ItemDef { id: "evac.familiarity", mandatory: false, description: "configurable environment knowledge for parts of the population" },
    ItemDef { id: "evac.smoke_import", mandatory: false, description: "smoke data imported from fluid-dynamics tools" },
    // Pedestrians
    ItemDef { id: "ped.speed_distributed", mandatory: false, description: "preferred speeds drawn from per-type distributions" },
    ItemDef { id: "ped.size_customizable", mandatory: false, description: "body size varies, with occupancy and speed following" },
    ItemDef { id: "ped.luggage", mandatory: true, description: "luggage assignment with a speed effect" },
    ItemDef { id: "ped.prm", mandatory: false, description: "restricted-mobility pedestrians" },
    ItemDef { id: "ped.agent_libraries", mandatory: false, description: "library of predefined agent types" },
    ItemDef { id: "ped.collision_avoidance", mandatory: true, description: "anticipatory avoidance of agents and obstacles" },
    ItemDef { id: "ped.target_seeking", mandatory: true, description: "movement toward the target by preferred or shortest path" },
    ItemDef { id: "ped.planned_activities", mandatory: false, description: "scheduled activities in fixed or variable order" },
    ItemDef { id: "ped.environment_knowledge", mandatory: false, description: "action selection from knowledge of the environment" },
    ItemDef { id: "ped.perceive_obstacles", mandatory: false, description: "obstacle perception" },
    ItemDef { id: "ped.perceive_agents", mandatory: false, description: "perception of other agents" },
    ItemDef { id: "ped.perceive_density", mandatory: false, description: "density perception" },
    ItemDef { id: "ped.perceive_signals", mandatory: false, description: "perception of visual or acoustic signals" },
    ItemDef { id: "ped.groups", mandatory: false, description: "cohesive social groups" },
    // Analysis outputs
    ItemDef { id: "out.local_density", mandatory: true, description: "pedestrians per square meter in a region" },
    ItemDef { id: "out.los_cmd", mandatory: true, description: "level-of-service grading and windowed mean density" },
    ItemDef { id: "out.utilization", mandatory: true, description: "occupation share of locations over a period" },
    ItemDef { id: "out.transfer_times_lines", mandatory: true, description: "transfer time statistics between lines" },
    ItemDef { id: "out.transfer_times_area", mandatory: true, description: "transfer time statistics around an area" },
    ItemDef { id: "out.queuing_time", mandatory: true, description: "time statistics for a chosen action in an area" },
    ItemDef { id: "out.service_factor", mandatory: false, description: "exposure-weighted level-of-service" },
    ItemDef { id: "out.distances", mandatory: true, description: "total and average distance covered" },
    ItemDef { id: "out.count_two_lines", mandatory: true, description: "ordered crossing counts over two or more lines" },
    ItemDef { id: "out.count_single_line", mandatory: true, description: "crossing counts and flow over one line" },
    ItemDef { id: "out.count_area", mandatory: true, description: "pedestrian counts inside an area" },
    ItemDef { id: "out.filtering", mandatory: true, description: "analysis filtering by kind, selection, destination and action" },
    ItemDef { id: "out.social_cost", mandatory: false, description: "monetized person-time by activity" },
    ItemDef { id: "out.export_worksheet", mandatory: true, description: "analysis and OD export to worksheet" },
    ItemDef { id: "out.auto_generation", mandatory: false, description: "analyses generated automatically at set intervals" },
    // Presentation
    ItemDef { id: "pres.video_output", mandatory: true, description: "video output at chosen simulation times" },
    ItemDef { id: "pres.screenshots", mandatory: true, description: "screenshot export in common raster formats" },
    ItemDef { id: "pres.density_maps", mandatory: true, description: "density maps with a legend" },
    ItemDef { id: "pres.sf_maps", mandatory: false, description: "service-factor maps with a legend" },
    ItemDef { id: "pres.utilization_maps", mandatory: true, description: "space-utilization maps with a legend" },
    ItemDef { id: "pres.time_maps", mandatory: true, description: "maps coloring positions by last occupation time" },
    ItemDef { id: "pres.charts", mandatory: false, description: "chart views inside the tool" },
    ItemDef { id: "pres.color_schemes", mandatory: true, description: "entity color schemes by kind, action or destination" },
    ItemDef { id: "pres.trails", mandatory: true, description: "path visualization of tracked pedestrians" },
    ItemDef { id: "pres.time_stamp", mandatory: true, description: "simulation time stamped onto visual outputs" },
    ItemDef { id: "pres.auto_maps", mandatory: false, description: "maps and charts generated automatically at set intervals" },
    // Vehicle interaction
    ItemDef { id: "veh.traffic_native", mandatory: false, description: "vehicle and pedestrian interaction in one platform" },
    ItemDef { id: "veh.traffic_import", mandatory: false, description: "vehicle results imported from another tool" },
    ItemDef { id: "veh.bicycles", mandatory: false, description: "bicycle traffic" },
    ItemDef { id: "veh.interaction", mandatory: false, description: "vehicle collision avoidance in shared spaces" },
    ItemDef { id: "veh.non_compliant", mandatory: false, description: "configurable share of non-compliant road users" },
    // Robustness
    ItemDef { id: "rob.consistency_check", mandatory: false, description: "automatic model consistency checking" },
    ItemDef { id: "rob.agents_100k", mandatory: false, description: "at least 100000 concurrent agents" },
    ItemDef { id: "rob.crash_free", mandatory: false, description: "stability under long operations and runs" },
    ItemDef { id: "rob.usability", mandatory: false, description: "general interface usability" },
    ItemDef { id: "rob.parallel_runs", mandatory: false, description: "parallel simulation runs" },
    ItemDef { id: "rob.seed_control", mandatory: false, description: "manual or automatic seed control" },
    ItemDef { id: "rob.batch_runs", mandatory: false, description: "batch run launching" },
    // Validation
    ItemDef { id: "val.real_observations", mandatory: false, description: "validated against real-world observations" },
    ItemDef { id: "val.fruin_defaults", mandatory: false, description: "default calibration matching standard level-of-service predictions" },
    ItemDef { id: "val.case_by_case", mandatory: true, description: "per-study calibration with clear guidance" },
    ItemDef { id: "val.certified", mandatory: false, description: "third-party validation certificate" },
];

//! Seeded highway scenario generation: vehicle placement, synthetic world
//! objects, per-vehicle BEV occupancy rasters, and resource parameters.

use crate::geometry::{normalize_angle, Box2, Pose, RigidTransform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("cannot place {requested} vehicles: capacity is {capacity}")]
    PlacementCapacity { requested: usize, capacity: usize },
    #[error("need at least one vehicle")]
    EmptyScenario,
    #[error("normalized distance is undefined for i == j ({0})")]
    SelfDistance(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// All simulation parameters, loadable from JSON with every field optional.
///
/// Defaults follow the evaluated highway setting: 10 vehicles on a six-lane
/// 200 m road, 200 MHz split into 4 subchannels, 8 mW transmit power,
/// utility weights (1e-2, 1e-3), compression window (0.3, 0.95), eta = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    // Road and traffic.
    pub num_vehicles: usize,
    pub lanes: usize,
    pub lane_width_m: f64,
    pub road_length_m: f64,
    pub min_gap_m: f64,
    pub speed_range_kmh: (f64, f64),

    // Per-vehicle resources.
    /// Local perception data rate A_j in bits/second.
    pub local_rate_bps: f64,
    /// CPU capacity range F_j in cycles/second.
    pub cpu_range_hz: (f64, f64),
    /// Processing cost beta in cycles/bit.
    pub cycles_per_bit: f64,
    pub perception_radius_m: f64,

    // Synthetic world and BEV rasters.
    pub object_density_per_m: f64,
    pub bev_cell_m: f64,
    pub bev_window_m: f64,
    /// Probability that a raster cell is flipped by sensing noise.
    pub bev_noise_rate: f64,

    // Radio.
    pub bandwidth_hz: f64,
    pub num_subchannels: usize,
    pub tx_power_w: f64,
    pub noise_psd_w_per_hz: f64,
    pub noise_offset_db: f64,
    pub pathloss_exponent: f64,
    pub reference_gain: f64,
    pub comm_range_m: f64,
    pub shadowing_sigma_db: f64,

    // Energy and timing.
    /// Per-receiver energy budget E_T in joules per decision window.
    pub energy_budget_j: f64,
    /// Transmission slot tau_t in seconds.
    pub tx_slot_s: f64,
    /// Compute slot tau_c in seconds.
    pub compute_slot_s: f64,
    /// Processing energy cost epsilon_j in joules/bit.
    pub energy_per_bit_j: f64,

    // Utility and compression.
    /// Weight omega_1 on priority-weighted throughput.
    pub weight_quality: f64,
    /// Weight omega_2 on union coverage area.
    pub weight_region: f64,
    pub eta: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Gate threshold epsilon_P below which priority weights are zeroed.
    pub gate_threshold: f64,
    /// Score BEV matches against the ego's self-match so identical views
    /// yield exactly 1; the raw formula is used when false.
    pub normalized_priority: bool,

    // Solver.
    /// Restrict fusion to receiver 0 instead of every vehicle.
    pub ego_only: bool,
    pub coverage_cell_m: f64,
    pub max_iterations: usize,
    pub utility_rel_tol: f64,

    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_vehicles: 10,
            lanes: 6,
            lane_width_m: 3.5,
            road_length_m: 200.0,
            min_gap_m: 5.0,
            speed_range_kmh: (0.0, 50.0),
            local_rate_bps: 40e6,
            cpu_range_hz: (5e9, 15e9),
            cycles_per_bit: 100.0,
            perception_radius_m: 40.0,
            object_density_per_m: 0.05,
            bev_cell_m: 0.4,
            bev_window_m: 80.0,
            bev_noise_rate: 0.0,
            bandwidth_hz: 200e6,
            num_subchannels: 4,
            tx_power_w: 8e-3,
            noise_psd_w_per_hz: crate::channel::NOISE_PSD_W_PER_HZ,
            noise_offset_db: 0.0,
            pathloss_exponent: 3.5,
            reference_gain: 2e-5,
            comm_range_m: 150.0,
            shadowing_sigma_db: 0.0,
            energy_budget_j: 1000.0,
            tx_slot_s: 0.1,
            compute_slot_s: 0.1,
            energy_per_bit_j: 1e-7,
            weight_quality: 1e-2,
            weight_region: 1e-3,
            eta: 1.0,
            ratio_min: 0.3,
            ratio_max: 0.95,
            gate_threshold: 0.05,
            normalized_priority: true,
            ego_only: false,
            coverage_cell_m: 0.5,
            max_iterations: 50,
            utility_rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: &str| Err(ScenarioError::InvalidConfig(msg.to_string()));
        if self.num_vehicles == 0 {
            return Err(ScenarioError::EmptyScenario);
        }
        if !(self.ratio_min > 0.0 && self.ratio_min <= self.ratio_max && self.ratio_max <= 1.0) {
            return bad("require 0 < ratio_min <= ratio_max <= 1");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("require 0 < eta <= 1");
        }
        if self.weight_quality < 0.0 || self.weight_region < 0.0 {
            return bad("utility weights must be nonnegative");
        }
        if self.num_subchannels == 0 {
            return bad("need at least one subchannel");
        }
        if !(self.speed_range_kmh.0 <= self.speed_range_kmh.1 && self.speed_range_kmh.0 >= 0.0) {
            return bad("speed range must be ordered and nonnegative");
        }
        if self.local_rate_bps <= 0.0 || self.cpu_range_hz.0 <= 0.0 {
            return bad("local rate and CPU capacity must be positive");
        }
        if self.gate_threshold < 0.0 {
            return bad("gate threshold must be nonnegative");
        }
        Ok(())
    }

    pub fn channel_params(&self) -> crate::channel::ChannelParams {
        crate::channel::ChannelParams {
            total_bandwidth_hz: self.bandwidth_hz,
            num_subchannels: self.num_subchannels,
            tx_power_w: self.tx_power_w,
            noise_psd_w_per_hz: self.noise_psd_w_per_hz,
            noise_offset_db: self.noise_offset_db,
            pathloss_exponent: self.pathloss_exponent,
            reference_gain: self.reference_gain,
            comm_range_m: self.comm_range_m,
            shadowing_sigma_db: self.shadowing_sigma_db,
            shadowing_seed: self.seed,
        }
    }
}

/// One CAV with its pose and resource parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    pub pose: Pose,
    pub speed_kmh: f64,
    /// Local data generation rate A_j in bits/second.
    pub local_rate_bps: f64,
    /// CPU capacity F_j in cycles/second.
    pub cpu_hz: f64,
    pub perception_radius_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Vehicle,
    Pedestrian,
    Obstacle,
}

/// Ground-truth object in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldObject {
    pub bounds: Box2,
    pub kind: ObjectKind,
}

/// Generated scenario: immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioState {
    pub vehicles: Vec<VehicleState>,
    pub objects: Vec<WorldObject>,
}

impl ScenarioState {
    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.vehicles.iter().map(|v| (v.pose.x, v.pose.y)).collect()
    }
}

/// Place vehicles uniformly on lane centerlines of a multi-lane highway.
///
/// Deterministic for a given config: vehicles occupy jittered slots spaced
/// `min_gap_m` apart, the lower half of the lanes heads +x and the upper
/// half -x. Vehicle 0 is the ego.
pub fn generate_highway(config: &ScenarioConfig) -> Result<ScenarioState, ScenarioError> {
    config.validate()?;
    let slots_per_lane = (config.road_length_m / config.min_gap_m).floor() as usize;
    let capacity = config.lanes * slots_per_lane;
    if config.num_vehicles > capacity {
        return Err(ScenarioError::PlacementCapacity {
            requested: config.num_vehicles,
            capacity,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut slots: Vec<(usize, usize)> = (0..config.lanes)
        .flat_map(|lane| (0..slots_per_lane).map(move |s| (lane, s)))
        .collect();
    // Fisher-Yates over the slot list keeps placement uniform and seeded.
    for i in (1..slots.len()).rev() {
        let j = rng.gen_range(0..=i);
        slots.swap(i, j);
    }

    let half_span = (config.lanes as f64 - 1.0) / 2.0;
    let jitter = 0.3 * config.min_gap_m;
    let vehicles = slots[..config.num_vehicles]
        .iter()
        .enumerate()
        .map(|(id, &(lane, slot))| {
            let y = (lane as f64 - half_span) * config.lane_width_m;
            let base_x = (slot as f64 + 0.5) * config.min_gap_m;
            let x = (base_x + rng.gen_range(-jitter..jitter))
                .clamp(0.0, config.road_length_m);
            let theta = if lane < config.lanes / 2 {
                0.0
            } else {
                normalize_angle(std::f64::consts::PI)
            };
            let speed = rng.gen_range(config.speed_range_kmh.0..=config.speed_range_kmh.1);
            let cpu = rng.gen_range(config.cpu_range_hz.0..=config.cpu_range_hz.1);
            VehicleState {
                id,
                pose: Pose { x, y, theta },
                speed_kmh: speed,
                local_rate_bps: config.local_rate_bps,
                cpu_hz: cpu,
                perception_radius_m: config.perception_radius_m,
            }
        })
        .collect();

    Ok(ScenarioState {
        vehicles,
        objects: Vec::new(),
    })
}

/// Deterministic ground-truth objects near the road: parked cars and
/// pedestrians on the shoulders, obstacles on the roadway.
///
/// The object count is exactly `floor(density * road_length)`.
pub fn synthesize_objects(config: &ScenarioConfig, seed: u64) -> Vec<WorldObject> {
    let count = (config.object_density_per_m * config.road_length_m).floor() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let road_half = config.lanes as f64 / 2.0 * config.lane_width_m;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.gen_range(0.0..config.road_length_m);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let roll: f64 = rng.gen_range(0.0..1.0);
        let (kind, w, h, y) = if roll < 0.5 {
            (ObjectKind::Vehicle, 4.5, 2.0, side * (road_half + 1.2))
        } else if roll < 0.8 {
            let off = rng.gen_range(0.5..3.0);
            (ObjectKind::Pedestrian, 0.6, 0.6, side * (road_half + off))
        } else {
            let y = rng.gen_range(-road_half..road_half);
            (ObjectKind::Obstacle, 1.5, 1.5, y)
        };
        let bounds = Box2::new(x - w / 2.0, y - h / 2.0, x + w / 2.0, y + h / 2.0)
            .expect("object box is well-formed by construction");
        out.push(WorldObject { bounds, kind });
    }
    out
}

/// Build vehicles and objects in one step.
pub fn build_scenario(config: &ScenarioConfig) -> Result<ScenarioState, ScenarioError> {
    let mut state = generate_highway(config)?;
    state.objects = synthesize_objects(config, config.seed);
    Ok(state)
}

/// Binary occupancy raster in the owning vehicle's frame.
///
/// Cell (ix, iy) covers the local square with center
/// `(-half + (ix + 0.5) * cell, -half + (iy + 0.5) * cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub origin: Pose,
    pub cell_m: f64,
    pub side: usize,
    pub cells: Vec<u8>,
}

impl BevGrid {
    pub fn new(origin: Pose, cell_m: f64, window_m: f64) -> Self {
        let side = (window_m / cell_m).round().max(1.0) as usize;
        Self {
            origin,
            cell_m,
            side,
            cells: vec![0; side * side],
        }
    }

    pub fn half_extent_m(&self) -> f64 {
        self.side as f64 * self.cell_m / 2.0
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.side + ix] != 0
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: bool) {
        self.cells[iy * self.side + ix] = v as u8;
    }

    /// Center of a cell in the grid's local frame.
    pub fn local_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let half = self.half_extent_m();
        (
            -half + (ix as f64 + 0.5) * self.cell_m,
            -half + (iy as f64 + 0.5) * self.cell_m,
        )
    }

    /// Cell index containing a local point, if inside the window.
    pub fn index_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let half = self.half_extent_m();
        let ix = ((x + half) / self.cell_m).floor();
        let iy = ((y + half) / self.cell_m).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.side as f64 || iy >= self.side as f64 {
            return None;
        }
        Some((ix as usize, iy as usize))
    }

    pub fn occupied(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for iy in 0..self.side {
            for ix in 0..self.side {
                if self.get(ix, iy) {
                    out.push((ix, iy));
                }
            }
        }
        out
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }

    /// Transform from this grid's local frame to world coordinates.
    pub fn local_to_world(&self) -> RigidTransform {
        RigidTransform::translation(self.origin.x, self.origin.y)
            .compose(&RigidTransform::rotation(self.origin.theta))
    }
}

/// True when any part of the object lies within the vehicle's perception
/// radius, ignoring occlusion.
pub fn object_perceivable(vehicle: &VehicleState, object: &WorldObject) -> bool {
    object
        .bounds
        .distance_to_point(vehicle.pose.x, vehicle.pose.y)
        <= vehicle.perception_radius_m
}

/// True when the object has at least one corner with clear line of sight
/// from the vehicle center. Other objects are the only occluders.
pub fn object_visible(vehicle: &VehicleState, index: usize, objects: &[WorldObject]) -> bool {
    let from = (vehicle.pose.x, vehicle.pose.y);
    let target = &objects[index];
    target.bounds.corners().iter().any(|&corner| {
        objects
            .iter()
            .enumerate()
            .all(|(k, other)| k == index || !other.bounds.blocks_segment(from, corner))
    })
}

/// Rasterize the objects a vehicle perceives into its local BEV grid.
///
/// Cells are set when their center lies inside a visible object's box and
/// within the perception radius. Occluded objects are dropped before
/// rasterization, then seeded noise flips cells at `noise_rate`.
pub fn rasterize_bev(
    vehicle: &VehicleState,
    objects: &[WorldObject],
    config: &ScenarioConfig,
    seed: u64,
) -> BevGrid {
    let mut grid = BevGrid::new(vehicle.pose, config.bev_cell_m, config.bev_window_m);
    let to_world = grid.local_to_world();
    let to_local = to_world.inverse();
    let r2 = vehicle.perception_radius_m * vehicle.perception_radius_m;

    for (idx, obj) in objects.iter().enumerate() {
        if !object_perceivable(vehicle, obj) || !object_visible(vehicle, idx, objects) {
            continue;
        }
        // Local-frame bounding range of the box corners, padded one cell.
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (cx, cy) in obj.bounds.corners() {
            let (lx, ly) = to_local.apply(cx, cy);
            lo = (lo.0.min(lx), lo.1.min(ly));
            hi = (hi.0.max(lx), hi.1.max(ly));
        }
        let half = grid.half_extent_m();
        let clamp_idx = |v: f64| (v.max(0.0) as usize).min(grid.side - 1);
        let ix0 = clamp_idx(((lo.0 + half) / grid.cell_m).floor() - 1.0);
        let ix1 = clamp_idx(((hi.0 + half) / grid.cell_m).ceil() + 1.0);
        let iy0 = clamp_idx(((lo.1 + half) / grid.cell_m).floor() - 1.0);
        let iy1 = clamp_idx(((hi.1 + half) / grid.cell_m).ceil() + 1.0);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let (lx, ly) = grid.local_center(ix, iy);
                if lx * lx + ly * ly > r2 {
                    continue;
                }
                let (wx, wy) = to_world.apply(lx, ly);
                if obj.bounds.contains(wx, wy) {
                    grid.set(ix, iy, true);
                }
            }
        }
    }

    if config.bev_noise_rate > 0.0 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(100 + vehicle.id as u64);
        for c in grid.cells.iter_mut() {
            if rng.gen_bool(config.bev_noise_rate) {
                *c ^= 1;
            }
        }
    }
    grid
}

/// Rasterize every vehicle's BEV with the scenario seed.
pub fn rasterize_all(state: &ScenarioState, config: &ScenarioConfig) -> Vec<BevGrid> {
    state
        .vehicles
        .iter()
        .map(|v| rasterize_bev(v, &state.objects, config, config.seed))
        .collect()
}

/// Euclidean distance between vehicles i and j divided by the communication
/// range, clamped to [0, 1].
pub fn normalized_distance(
    i: usize,
    j: usize,
    vehicles: &[VehicleState],
    comm_range_m: f64,
) -> Result<f64, ScenarioError> {
    if i == j {
        return Err(ScenarioError::SelfDistance(i));
    }
    let d = vehicles[i].pose.distance(&vehicles[j].pose);
    Ok((d / comm_range_m).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            num_vehicles: 10,
            seed: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn highway_places_all_vehicles_on_the_road() {
        let state = generate_highway(&small_config()).unwrap();
        assert_eq!(state.vehicles.len(), 10);
        for v in &state.vehicles {
            assert!((0.0..=200.0).contains(&v.pose.x));
            assert!(v.pose.y.abs() <= 6.0 * 3.5 / 2.0);
            assert!((0.0..=50.0).contains(&v.speed_kmh));
            assert!(v.local_rate_bps > 0.0 && v.cpu_hz > 0.0);
        }
    }

    #[test]
    fn single_vehicle_scenario() {
        let cfg = ScenarioConfig {
            num_vehicles: 1,
            ..ScenarioConfig::default()
        };
        let state = generate_highway(&cfg).unwrap();
        assert_eq!(state.vehicles.len(), 1);
        assert_eq!(state.vehicles[0].id, 0);
    }

    #[test]
    fn same_seed_reproduces_identical_state() {
        let a = build_scenario(&small_config()).unwrap();
        let b = build_scenario(&small_config()).unwrap();
        assert_eq!(a, b);
        let c = build_scenario(&ScenarioConfig {
            seed: 4,
            ..small_config()
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn capacity_overflow_is_rejected() {
        let cfg = ScenarioConfig {
            num_vehicles: 1000,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            generate_highway(&cfg),
            Err(ScenarioError::PlacementCapacity { .. })
        ));
    }

    #[test]
    fn object_synthesis_is_deterministic_and_counted() {
        let cfg = small_config();
        let a = synthesize_objects(&cfg, 7);
        let b = synthesize_objects(&cfg, 7);
        assert_eq!(a, b);
        // density 0.05 on a 200 m road gives exactly 10 objects
        assert_eq!(a.len(), 10);

        let none = synthesize_objects(
            &ScenarioConfig {
                object_density_per_m: 0.0,
                ..cfg
            },
            7,
        );
        assert!(none.is_empty());
    }

    fn lone_vehicle(x: f64, y: f64, theta: f64) -> VehicleState {
        VehicleState {
            id: 0,
            pose: Pose::new(x, y, theta).unwrap(),
            speed_kmh: 0.0,
            local_rate_bps: 1e6,
            cpu_hz: 1e9,
            perception_radius_m: 40.0,
        }
    }

    #[test]
    fn empty_world_gives_all_zero_grid() {
        let cfg = ScenarioConfig::default();
        let grid = rasterize_bev(&lone_vehicle(0.0, 0.0, 0.0), &[], &cfg, 0);
        assert_eq!(grid.count_ones(), 0);
    }

    #[test]
    fn footprint_matches_independent_rasterizer() {
        let cfg = ScenarioConfig {
            bev_noise_rate: 0.0,
            ..ScenarioConfig::default()
        };
        let v = lone_vehicle(10.0, -3.0, 0.0);
        let obj = WorldObject {
            bounds: Box2::new(18.0, -6.0, 22.5, -4.0).unwrap(),
            kind: ObjectKind::Vehicle,
        };
        let grid = rasterize_bev(&v, std::slice::from_ref(&obj), &cfg, 0);

        // Oracle: walk the whole grid and apply the same cell-center rule.
        let mut expected = 0usize;
        for iy in 0..grid.side {
            for ix in 0..grid.side {
                let (lx, ly) = grid.local_center(ix, iy);
                let inside_radius = lx * lx + ly * ly <= 40.0 * 40.0;
                let (wx, wy) = (v.pose.x + lx, v.pose.y + ly);
                let hit = inside_radius && obj.bounds.contains(wx, wy);
                assert_eq!(grid.get(ix, iy), hit, "cell ({ix},{iy})");
                expected += hit as usize;
            }
        }
        assert!(expected > 0);
        assert_eq!(grid.count_ones(), expected);
    }

    #[test]
    fn out_of_range_object_is_absent() {
        let cfg = ScenarioConfig::default();
        let v = lone_vehicle(0.0, 0.0, 0.0);
        let obj = WorldObject {
            bounds: Box2::new(100.0, 0.0, 104.0, 2.0).unwrap(),
            kind: ObjectKind::Vehicle,
        };
        let grid = rasterize_bev(&v, &[obj], &cfg, 0);
        assert_eq!(grid.count_ones(), 0);
    }

    #[test]
    fn occluded_object_is_dropped() {
        let cfg = ScenarioConfig::default();
        let v = lone_vehicle(0.0, 0.0, 0.0);
        // A wide wall fully between the vehicle and a small far object.
        let wall = WorldObject {
            bounds: Box2::new(10.0, -20.0, 11.0, 20.0).unwrap(),
            kind: ObjectKind::Obstacle,
        };
        let hidden = WorldObject {
            bounds: Box2::new(20.0, -0.5, 21.0, 0.5).unwrap(),
            kind: ObjectKind::Pedestrian,
        };
        let both = rasterize_bev(&v, &[wall.clone(), hidden.clone()], &cfg, 0);
        let alone = rasterize_bev(&v, std::slice::from_ref(&hidden), &cfg, 0);
        assert!(alone.count_ones() > 0);
        // Only the wall's own cells remain when it blocks the pedestrian.
        let wall_alone = rasterize_bev(&v, &[wall], &cfg, 0);
        assert_eq!(both.count_ones(), wall_alone.count_ones());
    }

    #[test]
    fn noiseless_cells_all_come_from_ground_truth() {
        let cfg = ScenarioConfig {
            bev_noise_rate: 0.0,
            ..small_config()
        };
        let state = build_scenario(&cfg).unwrap();
        for v in &state.vehicles {
            let grid = rasterize_bev(v, &state.objects, &cfg, cfg.seed);
            let to_world = grid.local_to_world();
            for (ix, iy) in grid.occupied() {
                let (lx, ly) = grid.local_center(ix, iy);
                let (wx, wy) = to_world.apply(lx, ly);
                assert!(
                    state.objects.iter().any(|o| o.bounds.contains(wx, wy)),
                    "phantom cell at world ({wx:.2}, {wy:.2})"
                );
            }
        }
    }

    #[test]
    fn normalized_distance_cases() {
        let mk = |x: f64| lone_vehicle(x, 0.0, 0.0);
        let vehicles = vec![mk(0.0), mk(75.0), mk(150.0), mk(400.0)];
        assert_eq!(normalized_distance(0, 1, &vehicles, 150.0).unwrap(), 0.5);
        assert_eq!(normalized_distance(0, 2, &vehicles, 150.0).unwrap(), 1.0);
        assert_eq!(normalized_distance(0, 3, &vehicles, 150.0).unwrap(), 1.0);
        assert!(normalized_distance(1, 1, &vehicles, 150.0).is_err());
        // Symmetry.
        assert_eq!(
            normalized_distance(0, 1, &vehicles, 150.0).unwrap(),
            normalized_distance(1, 0, &vehicles, 150.0).unwrap()
        );
    }

    #[test]
    fn config_json_roundtrip_with_partial_fields() {
        let json = r#"{"num_vehicles": 4, "tx_power_w": 0.005}"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.num_vehicles, 4);
        assert_eq!(cfg.tx_power_w, 0.005);
        assert_eq!(cfg.num_subchannels, 4);

        let bad: Result<ScenarioConfig, _> = serde_json::from_str(r#"{"not_a_field": 1}"#);
        assert!(bad.is_err());
    }
}

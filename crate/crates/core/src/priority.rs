//! BEV-match priority weights between helper CAVs and receivers, plus the
//! gate filter that drops low-value helpers.

use crate::geometry::{frame_change, RigidTransform};
use crate::scenario::{object_perceivable, BevGrid, ScenarioConfig, ScenarioState, VehicleState};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PriorityError {
    #[error("grids disagree on geometry: cell {0} m vs {1} m")]
    CellSizeMismatch(f64, f64),
    #[error("mask length {0} does not match grid with {1} cells")]
    MaskSizeMismatch(usize, usize),
}

/// How a BEV match score is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// sqrt(sum of squared masked intersection) / (sum of masked ego cells).
    /// Identical binary views of M masked cells score 1/sqrt(M).
    #[default]
    Literal,
    /// Literal score divided by the ego grid's score against itself, so
    /// identical views score exactly 1.
    Normalized,
}

/// Priority weights indexed (sender, receiver); zero for pairs out of range
/// or without overlapping perceptual objects.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityMatrix {
    n: usize,
    w: Vec<f64>,
}

impl PriorityMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, w: vec![0.0; n * n] }
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        let mut m = Self::zeros(n);
        for tx in 0..n {
            for rx in 0..n {
                if tx != rx {
                    m.set(tx, rx, value);
                }
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        self.w[tx * self.n + rx]
    }

    #[inline]
    pub fn set(&mut self, tx: usize, rx: usize, v: f64) {
        self.w[tx * self.n + rx] = v;
    }

    /// Largest absolute elementwise difference; drives the re-initialization
    /// trigger of the alternation loop.
    pub fn max_abs_diff(&self, other: &PriorityMatrix) -> f64 {
        self.w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Map every occupied cell center through `t` and re-bin into a grid of the
/// same geometry; cells landing outside the window are dropped.
pub fn transform_bev(grid: &BevGrid, t: &RigidTransform) -> BevGrid {
    let mut out = BevGrid::new(grid.origin, grid.cell_m, grid.side as f64 * grid.cell_m);
    for (ix, iy) in grid.occupied() {
        let (lx, ly) = grid.local_center(ix, iy);
        let (tx, ty) = t.apply(lx, ly);
        if let Some((ox, oy)) = out.index_of(tx, ty) {
            out.set(ox, oy, true);
        }
    }
    out
}

/// Mask over the receiver's grid marking cells of objects perceivable
/// (pre-occlusion) by both vehicles and within both perception radii.
pub fn overlap_mask(
    receiver: &VehicleState,
    helper: &VehicleState,
    state: &ScenarioState,
    grid: &BevGrid,
) -> Vec<bool> {
    let mut mask = vec![false; grid.side * grid.side];
    let to_world = grid.local_to_world();
    let to_local = to_world.inverse();
    let rr2 = receiver.perception_radius_m.powi(2);
    let hr2 = helper.perception_radius_m.powi(2);
    let half = grid.half_extent_m();
    for obj in state
        .objects
        .iter()
        .filter(|o| object_perceivable(receiver, o) && object_perceivable(helper, o))
    {
        // Only cells under the object's local bounding rectangle can match.
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (cx, cy) in obj.bounds.corners() {
            let (lx, ly) = to_local.apply(cx, cy);
            lo = (lo.0.min(lx), lo.1.min(ly));
            hi = (hi.0.max(lx), hi.1.max(ly));
        }
        let clamp_idx = |v: f64| (v.max(0.0) as usize).min(grid.side - 1);
        let ix0 = clamp_idx(((lo.0 + half) / grid.cell_m).floor() - 1.0);
        let ix1 = clamp_idx(((hi.0 + half) / grid.cell_m).ceil() + 1.0);
        let iy0 = clamp_idx(((lo.1 + half) / grid.cell_m).floor() - 1.0);
        let iy1 = clamp_idx(((hi.1 + half) / grid.cell_m).ceil() + 1.0);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let (lx, ly) = grid.local_center(ix, iy);
                if lx * lx + ly * ly > rr2 {
                    continue;
                }
                let (wx, wy) = to_world.apply(lx, ly);
                let dhx = wx - helper.pose.x;
                let dhy = wy - helper.pose.y;
                if dhx * dhx + dhy * dhy > hr2 {
                    continue;
                }
                if obj.bounds.contains(wx, wy) {
                    mask[iy * grid.side + ix] = true;
                }
            }
        }
    }
    mask
}

/// BEV match weight over the masked region.
///
/// Numerator: sqrt of the number of masked cells occupied in both grids.
/// Denominator: number of masked cells occupied in the ego grid. Returns 0
/// when the denominator is 0.
pub fn priority_weight(
    bev_ego: &BevGrid,
    bev_other_transformed: &BevGrid,
    overlap_mask: &[bool],
    mode: WeightMode,
) -> Result<f64, PriorityError> {
    if bev_ego.cell_m != bev_other_transformed.cell_m {
        return Err(PriorityError::CellSizeMismatch(
            bev_ego.cell_m,
            bev_other_transformed.cell_m,
        ));
    }
    if bev_ego.cells.len() != bev_other_transformed.cells.len()
        || overlap_mask.len() != bev_ego.cells.len()
    {
        return Err(PriorityError::MaskSizeMismatch(
            overlap_mask.len(),
            bev_ego.cells.len(),
        ));
    }
    let mut inter = 0u64;
    let mut ego = 0u64;
    for (k, &m) in overlap_mask.iter().enumerate() {
        if !m {
            continue;
        }
        let e = bev_ego.cells[k] != 0;
        let o = bev_other_transformed.cells[k] != 0;
        ego += e as u64;
        inter += (e && o) as u64;
    }
    if ego == 0 {
        return Ok(0.0);
    }
    let literal = (inter as f64).sqrt() / ego as f64;
    Ok(match mode {
        WeightMode::Literal => literal,
        // Self score is sqrt(ego)/ego, so the ratio reduces to sqrt(inter/ego).
        WeightMode::Normalized => literal / ((ego as f64).sqrt() / ego as f64),
    })
}

/// Priority weights for every ordered in-range pair, computed by warping the
/// helper's BEV into the receiver's frame and matching over the shared-object
/// mask. Out-of-range pairs stay 0.
pub fn priority_matrix(
    state: &ScenarioState,
    bevs: &[BevGrid],
    config: &ScenarioConfig,
) -> Result<PriorityMatrix, PriorityError> {
    let n = state.vehicles.len();
    let mode = if config.normalized_priority {
        WeightMode::Normalized
    } else {
        WeightMode::Literal
    };
    let mut out = PriorityMatrix::zeros(n);
    for rx in 0..n {
        let receiver = &state.vehicles[rx];
        for tx in 0..n {
            if tx == rx {
                continue;
            }
            let helper = &state.vehicles[tx];
            if receiver.pose.distance(&helper.pose) > config.comm_range_m {
                continue;
            }
            let t = frame_change(&helper.pose, &receiver.pose);
            let warped = transform_bev(&bevs[tx], &t);
            let mask = overlap_mask(receiver, helper, state, &bevs[rx]);
            let w = priority_weight(&bevs[rx], &warped, &mask, mode)?;
            out.set(tx, rx, w);
        }
    }
    Ok(out)
}

/// Zero out weights below the threshold; links below the gate become
/// ineligible for establishment.
pub fn gate(p: &PriorityMatrix, threshold: f64) -> PriorityMatrix {
    let mut out = p.clone();
    for v in out.w.iter_mut() {
        if *v < threshold {
            *v = 0.0;
        }
    }
    out
}

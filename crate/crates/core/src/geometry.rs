//! Planar geometry: rigid 2-D transforms, axis-aligned box IoU, and
//! union-of-discs coverage area on a deterministic grid.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid box: corners must satisfy x0 <= x1 and y0 <= y1")]
    InvalidBox,
    #[error("disc radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("homogeneous point must have third component 1, got {0}")]
    NotHomogeneous(f64),
}

/// Normalize an angle to [-pi, pi).
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r >= std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Vehicle pose: position in meters, heading in radians.
///
/// `theta` is kept normalized to [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        Ok(Self {
            x,
            y,
            theta: normalize_angle(theta),
        })
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Homogeneous 3x3 rigid transform.
///
/// The bottom row is always (0, 0, 1) and the upper-left 2x2 block is a
/// rotation, so the inverse is exact up to floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub m: [[f64; 3]; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            m: [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]],
        }
    }

    /// Counter-clockwise rotation about the origin.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &RigidTransform) -> Self {
        let a = &self.m;
        let b = &rhs.m;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Self { m: out }
    }

    /// Transform a 2-D point.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.m[0][0] * x + self.m[0][1] * y + self.m[0][2],
            self.m[1][0] * x + self.m[1][1] * y + self.m[1][2],
        )
    }

    /// Exact inverse of a rigid transform: transpose of the rotation block
    /// and a back-rotated translation.
    pub fn inverse(&self) -> Self {
        let r00 = self.m[0][0];
        let r01 = self.m[0][1];
        let r10 = self.m[1][0];
        let r11 = self.m[1][1];
        let tx = self.m[0][2];
        let ty = self.m[1][2];
        Self {
            m: [
                [r00, r10, -(r00 * tx + r10 * ty)],
                [r01, r11, -(r01 * tx + r11 * ty)],
                [0.0, 0.0, 1.0],
            ],
        }
    }
}

/// Displacement-based BEV remap matrix `T * Theta` built from
/// `dx = x_ego - x_other`, `dy = y_ego - y_other`, `dtheta = theta_ego - theta_other`.
///
/// This is the matrix used to warp a helper's BEV raster toward the ego
/// frame by coordinate sampling; it is not the same as [`frame_change`],
/// which is the exact rigid change of coordinates between the two poses.
pub fn compose_transform(ego: &Pose, other: &Pose) -> Result<RigidTransform, GeometryError> {
    let finite = |p: &Pose| p.x.is_finite() && p.y.is_finite() && p.theta.is_finite();
    if !finite(ego) || !finite(other) {
        return Err(GeometryError::NonFinite("pose"));
    }
    let dx = ego.x - other.x;
    let dy = ego.y - other.y;
    let dtheta = ego.theta - other.theta;
    Ok(RigidTransform::translation(dx, dy).compose(&RigidTransform::rotation(dtheta)))
}

/// Exact change of coordinates: maps a point expressed in the `from` pose
/// frame to its coordinates in the `to` pose frame.
pub fn frame_change(from: &Pose, to: &Pose) -> RigidTransform {
    let world_from = RigidTransform::translation(from.x, from.y)
        .compose(&RigidTransform::rotation(from.theta));
    let world_to =
        RigidTransform::translation(to.x, to.y).compose(&RigidTransform::rotation(to.theta));
    world_to.inverse().compose(&world_from)
}

/// Apply a transform to a homogeneous point `[x, y, 1]`.
pub fn apply_transform(t: &RigidTransform, p: [f64; 3]) -> Result<(f64, f64), GeometryError> {
    if p[2] != 1.0 {
        return Err(GeometryError::NotHomogeneous(p[2]));
    }
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err(GeometryError::NonFinite("point"));
    }
    Ok(t.apply(p[0], p[1]))
}

/// Axis-aligned box given by top-left `(x0, y0)` and bottom-right `(x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2 {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Box2 {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite("box"));
        }
        if x0 > x1 || y0 > y1 {
            return Err(GeometryError::InvalidBox);
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn area(&self) -> f64 {
        ((self.x0 - self.x1) * (self.y0 - self.y1)).abs()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x0, self.y0),
            (self.x1, self.y0),
            (self.x1, self.y1),
            (self.x0, self.y1),
        ]
    }

    /// Euclidean distance from a point to the box (0 inside).
    pub fn distance_to_point(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x0 - x).max(0.0).max(x - self.x1);
        let dy = (self.y0 - y).max(0.0).max(y - self.y1);
        (dx * dx + dy * dy).sqrt()
    }

    fn intersection_area(&self, other: &Box2) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// True when the open segment (a, b) passes through the box interior.
    ///
    /// Endpoints touching the box boundary do not count, so a ray cast to a
    /// corner of a box is not blocked by that box itself.
    pub fn blocks_segment(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        // Slab clipping of the segment parameter t in [0, 1].
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        let d = (b.0 - a.0, b.1 - a.1);
        for (p, dp, lo, hi) in [
            (a.0, d.0, self.x0, self.x1),
            (a.1, d.1, self.y0, self.y1),
        ] {
            if dp.abs() < 1e-12 {
                if p < lo || p > hi {
                    return false;
                }
            } else {
                let (mut ta, mut tb) = ((lo - p) / dp, (hi - p) / dp);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        // Require a strictly interior overlap away from both endpoints.
        t0.max(1e-9) < t1.min(1.0 - 1e-9)
    }
}

/// Intersection-over-union of two boxes. Two zero-area boxes give 0.
pub fn box_iou(g: &Box2, p: &Box2) -> f64 {
    let inter = g.intersection_area(p);
    let union = g.area() + p.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Circular perception region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Disc {
    pub fn new(x: f64, y: f64, radius: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && radius.is_finite()) {
            return Err(GeometryError::NonFinite("disc"));
        }
        if radius <= 0.0 {
            return Err(GeometryError::NonPositiveRadius(radius));
        }
        Ok(Self { x, y, radius })
    }
}

/// Indices of grid cells whose centers fall inside the disc.
///
/// Cells form a world-aligned lattice: cell (i, j) has its center at
/// ((i + 0.5) * cell, (j + 0.5) * cell). Because the lattice does not depend
/// on which discs are being measured, the covered-cell count is a true
/// coverage set function: exactly monotone and submodular over disc sets.
pub fn disc_cells(disc: &Disc, cell: f64) -> Vec<(i64, i64)> {
    assert!(cell > 0.0, "grid cell size must be positive");
    let mut out = Vec::new();
    let i0 = ((disc.x - disc.radius) / cell).floor() as i64 - 1;
    let i1 = ((disc.x + disc.radius) / cell).ceil() as i64 + 1;
    let j0 = ((disc.y - disc.radius) / cell).floor() as i64 - 1;
    let j1 = ((disc.y + disc.radius) / cell).ceil() as i64 + 1;
    let r2 = disc.radius * disc.radius;
    for i in i0..=i1 {
        let cx = (i as f64 + 0.5) * cell;
        let dx2 = (cx - disc.x) * (cx - disc.x);
        if dx2 > r2 {
            continue;
        }
        for j in j0..=j1 {
            let cy = (j as f64 + 0.5) * cell;
            if dx2 + (cy - disc.y) * (cy - disc.y) <= r2 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Area of the union of the given discs, measured by counting covered cells
/// of the world-aligned grid. Empty input gives 0.
pub fn union_area(regions: &[Disc], cell: f64) -> f64 {
    use std::collections::HashSet;
    let mut covered: HashSet<(i64, i64)> = HashSet::new();
    for d in regions {
        covered.extend(disc_cells(d, cell));
    }
    covered.len() as f64 * cell * cell
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn compose_zero_displacement_is_identity() {
        let p = Pose::new(3.0, -2.0, 0.7).unwrap();
        let t = compose_transform(&p, &p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(t.m[i][j], RigidTransform::identity().m[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn compose_pure_translation() {
        let ego = Pose::new(1.0, 0.0, 0.0).unwrap();
        let other = Pose::new(0.0, 0.0, 0.0).unwrap();
        let t = compose_transform(&ego, &other).unwrap();
        assert_eq!(t.apply(0.0, 0.0), (1.0, 0.0));
    }

    #[test]
    fn compose_quarter_turn_matches_matrix_oracle() {
        let ego = Pose::new(0.0, 0.0, PI / 2.0).unwrap();
        let other = Pose::new(0.0, 0.0, 0.0).unwrap();
        let t = compose_transform(&ego, &other).unwrap();
        let (x, y) = t.apply(1.0, 0.0);
        assert_relative_eq!(x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(y, 1.0, epsilon = 1e-12);

        // Independent oracle: explicit 3x3 multiplication of T * Theta.
        let (s, c) = (PI / 2.0).sin_cos();
        let theta = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let tr = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut expect = [[0.0; 3]; 3];
        for (i, row) in expect.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                for (k, th) in theta.iter().enumerate() {
                    *cell += tr[i][k] * th[j];
                }
            }
        }
        for (i, row) in expect.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                assert_relative_eq!(t.m[i][j], *cell, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn compose_rejects_non_finite() {
        let ego = Pose {
            x: f64::NAN,
            y: 0.0,
            theta: 0.0,
        };
        let other = Pose::new(0.0, 0.0, 0.0).unwrap();
        assert!(compose_transform(&ego, &other).is_err());
    }

    #[test]
    fn apply_transform_examples() {
        let id = RigidTransform::identity();
        assert_eq!(apply_transform(&id, [3.0, 4.0, 1.0]).unwrap(), (3.0, 4.0));

        let tr = RigidTransform::translation(2.0, 0.0);
        assert_eq!(apply_transform(&tr, [0.0, 0.0, 1.0]).unwrap(), (2.0, 0.0));

        // Rotate by pi, then translate by (1, 0): (1, 0) lands on the origin.
        let t = RigidTransform::translation(1.0, 0.0).compose(&RigidTransform::rotation(PI));
        let (x, y) = apply_transform(&t, [1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(y, 0.0, epsilon = 1e-12);

        assert!(apply_transform(&id, [1.0, 2.0, 0.9]).is_err());
    }

    #[test]
    fn frame_change_roundtrips_world_points() {
        let a = Pose::new(4.0, -1.0, 0.3).unwrap();
        let b = Pose::new(-2.0, 5.0, -2.1).unwrap();
        // A world point expressed in a's frame must land on the same world
        // point when re-expressed through b.
        let t = frame_change(&a, &b);
        let p_a = (3.0, 7.0);
        let world = RigidTransform::translation(a.x, a.y)
            .compose(&RigidTransform::rotation(a.theta))
            .apply(p_a.0, p_a.1);
        let p_b = t.apply(p_a.0, p_a.1);
        let world2 = RigidTransform::translation(b.x, b.y)
            .compose(&RigidTransform::rotation(b.theta))
            .apply(p_b.0, p_b.1);
        assert_relative_eq!(world.0, world2.0, epsilon = 1e-9);
        assert_relative_eq!(world.1, world2.1, epsilon = 1e-9);
    }

    #[test]
    fn iou_identical_unit_squares() {
        let a = Box2::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(box_iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes() {
        let a = Box2::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = Box2::new(5.0, 5.0, 6.0, 6.0).unwrap();
        assert_eq!(box_iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_offset_unit_squares() {
        // Intersection 0.5, union 1.5.
        let a = Box2::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = Box2::new(0.5, 0.0, 1.5, 1.0).unwrap();
        assert_relative_eq!(box_iou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_degenerate_boxes_give_zero() {
        let a = Box2::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(box_iou(&a, &a), 0.0);
    }

    #[test]
    fn union_area_cases() {
        assert_eq!(union_area(&[], 0.5), 0.0);

        let d = Disc::new(3.0, -2.0, 10.0).unwrap();
        let one = union_area(&[d], 0.5);
        let two = union_area(&[d, d], 0.5);
        assert_eq!(one, two);
        // Grid error is bounded by roughly one cell along the perimeter.
        let true_area = PI * 100.0;
        assert!(
            (one - true_area).abs() <= 0.5 * std::f64::consts::SQRT_2 * 2.0 * PI * 10.0,
            "grid area {one} too far from {true_area}"
        );

        let a = Disc::new(0.0, 0.0, 5.0).unwrap();
        let b = Disc::new(100.0, 0.0, 10.0).unwrap();
        let sum = union_area(&[a], 0.5) + union_area(&[b], 0.5);
        assert_relative_eq!(union_area(&[a, b], 0.5), sum, epsilon = 1e-9);
    }

    fn arb_box() -> impl Strategy<Value = Box2> {
        (
            -100.0f64..100.0,
            -100.0f64..100.0,
            0.0f64..50.0,
            0.0f64..50.0,
        )
            .prop_map(|(x0, y0, w, h)| Box2::new(x0, y0, x0 + w, y0 + h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = box_iou(&a, &b);
            let ba = box_iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_is_one_only_for_identical(a in arb_box()) {
            prop_assume!(a.area() > 1e-9);
            let shifted = Box2::new(a.x0 + 0.1, a.y0, a.x1 + 0.1, a.y1).unwrap();
            prop_assert_eq!(box_iou(&a, &a), 1.0);
            prop_assert!(box_iou(&a, &shifted) < 1.0);
        }

        #[test]
        fn transform_roundtrip(
            x in -50.0f64..50.0,
            y in -50.0f64..50.0,
            theta in -3.1f64..3.1,
            px in -50.0f64..50.0,
            py in -50.0f64..50.0,
        ) {
            let t = RigidTransform::translation(x, y).compose(&RigidTransform::rotation(theta));
            let (qx, qy) = t.apply(px, py);
            let (rx, ry) = t.inverse().apply(qx, qy);
            prop_assert!((rx - px).abs() < 1e-9);
            prop_assert!((ry - py).abs() < 1e-9);
        }

        #[test]
        fn coverage_monotone_and_submodular(
            xs in proptest::collection::vec((-40.0f64..40.0, -40.0f64..40.0, 3.0f64..15.0), 1..6),
            extra in (-40.0f64..40.0, -40.0f64..40.0, 3.0f64..15.0),
            split in 0usize..6,
        ) {
            let cell = 0.5;
            let discs: Vec<Disc> = xs
                .iter()
                .map(|&(x, y, r)| Disc::new(x, y, r).unwrap())
                .collect();
            let k = split.min(discs.len());
            let small = &discs[..k];
            let e = Disc::new(extra.0, extra.1, extra.2).unwrap();

            // Monotone: A subset of B implies area(A) <= area(B).
            prop_assert!(union_area(small, cell) <= union_area(&discs, cell) + 1e-9);

            // Diminishing returns of adding e to the smaller set.
            let mut small_e = small.to_vec();
            small_e.push(e);
            let mut full_e = discs.clone();
            full_e.push(e);
            let gain_small = union_area(&small_e, cell) - union_area(small, cell);
            let gain_full = union_area(&full_e, cell) - union_area(&discs, cell);
            prop_assert!(gain_small >= gain_full - 1e-9);
        }
    }
}

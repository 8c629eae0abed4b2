//! Boundary curves of the physical domain and the projection `x_h -> x`
//! from the straight mesh boundary onto them.
//!
//! Each boundary edge of a body-fitted mesh is tagged with the component it
//! discretizes, and all projections target that component. The projection is
//! the closest-point map, so `x = x_h + delta * nu` with `delta` the distance
//! to the curve and `nu` the unit direction from `x_h` toward `x`.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::edge_quadrature;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Tolerance used to decide whether a point lies on a curve.
pub const ON_CURVE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum CurveKind {
    /// Circle of positive radius. `outward_radial` is true when the
    /// domain lies inside the circle (the outward normal of the domain is the
    /// outward radial direction) and false for a hole.
    Circle {
        center: Vec2,
        radius: f64,
        outward_radial: bool,
    },
    /// Straight line through `point` with unit outward normal `normal`; used
    /// for polygonal domains, where the mesh boundary coincides with the
    /// physical boundary.
    Line { point: Vec2, normal: Vec2 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurve {
    pub kind: CurveKind,
    pub component_id: usize,
}

/// Result of projecting a mesh-boundary point onto its curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionData {
    /// Projected point on the curve.
    pub x: Vec2,
    /// Distance `|x - x_h|`.
    pub delta: f64,
    /// Unit direction from `x_h` toward `x`; equals `n_gamma` when `delta == 0`.
    pub nu: Vec2,
    /// Outward normal of the domain at `x`.
    pub n_gamma: Vec2,
}

impl BoundaryCurve {
    pub fn circle(center: Vec2, radius: f64, outward_radial: bool, component_id: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("circle radius must be positive, got {radius}")));
        }
        Ok(Self {
            kind: CurveKind::Circle {
                center,
                radius,
                outward_radial,
            },
            component_id,
        })
    }

    pub fn line(point: Vec2, normal: Vec2, component_id: usize) -> Self {
        Self {
            kind: CurveKind::Line {
                point,
                normal: normal.normalize(),
            },
            component_id,
        }
    }

    /// Unsigned distance from `p` to the curve.
    pub fn distance(&self, p: Vec2) -> f64 {
        match &self.kind {
            CurveKind::Circle { center, radius, .. } => ((p - center).norm() - radius).abs(),
            CurveKind::Line { point, normal } => (p - point).dot(normal).abs(),
        }
    }

    /// Half-width of the tube around the curve in which the closest point is unique.
    pub fn reach(&self) -> f64 {
        match &self.kind {
            CurveKind::Circle { radius, .. } => *radius,
            CurveKind::Line { .. } => f64::INFINITY,
        }
    }

    /// Closest point on this component, with distance, direction and normal.
    pub fn closest_point(&self, x_h: Vec2) -> Result<ProjectionData> {
        let outside = |distance: f64| Error::OutsideReach {
            x: x_h.x,
            y: x_h.y,
            component: self.component_id,
            distance,
            reach: self.reach(),
        };
        match &self.kind {
            CurveKind::Circle {
                center,
                radius,
                outward_radial,
            } => {
                let rel = x_h - center;
                let r = rel.norm();
                let delta = (r - radius).abs();
                if !(delta < *radius) || r == 0.0 {
                    return Err(outside(delta));
                }
                let radial = rel / r;
                let x = center + radial * *radius;
                let n_gamma = circle_normal(center, &x, *outward_radial);
                let nu = if delta == 0.0 {
                    n_gamma
                } else if r < *radius {
                    radial
                } else {
                    -radial
                };
                Ok(ProjectionData { x, delta, nu, n_gamma })
            }
            CurveKind::Line { point, normal } => {
                let s = (x_h - point).dot(normal);
                let x = x_h - normal * s;
                let delta = s.abs();
                let nu = if delta == 0.0 || s < 0.0 { *normal } else { -normal };
                Ok(ProjectionData {
                    x,
                    delta,
                    nu,
                    n_gamma: *normal,
                })
            }
        }
    }

    /// Outward normal of the domain at a point `x` on the curve.
    pub fn gamma_normal(&self, x: Vec2) -> Result<Vec2> {
        let offset = self.distance(x);
        if !(offset <= ON_CURVE_TOL) {
            return Err(Error::NotOnCurve {
                x: x.x,
                y: x.y,
                component: self.component_id,
                offset,
            });
        }
        match &self.kind {
            CurveKind::Circle {
                center, outward_radial, ..
            } => Ok(circle_normal(center, &x, *outward_radial)),
            CurveKind::Line { normal, .. } => Ok(*normal),
        }
    }

    /// Projects a point onto the curve (used for boundary vertices).
    pub fn project(&self, p: Vec2) -> Result<Vec2> {
        Ok(self.closest_point(p)?.x)
    }
}

fn circle_normal(center: &Vec2, x: &Vec2, outward_radial: bool) -> Vec2 {
    let radial = (x - center).normalize();
    if outward_radial {
        radial
    } else {
        -radial
    }
}

/// Which analytic domain a [`Domain`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Disk,
    Ring,
    Square,
    Polygon,
}

/// Physical domain: a set of boundary components.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub kind: DomainKind,
    pub curves: Vec<BoundaryCurve>,
}

impl Domain {
    /// Unit disk.
    pub fn disk() -> Self {
        Self::disk_with(Vec2::zeros(), 1.0).expect("unit radius is valid")
    }

    pub fn disk_with(center: Vec2, radius: f64) -> Result<Self> {
        Ok(Self {
            kind: DomainKind::Disk,
            curves: vec![BoundaryCurve::circle(center, radius, true, 0)?],
        })
    }

    /// Ring `0.5 < |x| < 1`.
    pub fn ring() -> Self {
        Self::ring_with(Vec2::zeros(), 0.5, 1.0).expect("default radii are valid")
    }

    /// Ring with the outer circle as component 0 and the inner as component 1.
    pub fn ring_with(center: Vec2, inner: f64, outer: f64) -> Result<Self> {
        if !(inner < outer) {
            return Err(Error::Config(format!(
                "ring inner radius {inner} must be below outer radius {outer}"
            )));
        }
        Ok(Self {
            kind: DomainKind::Ring,
            curves: vec![
                BoundaryCurve::circle(center, outer, true, 0)?,
                BoundaryCurve::circle(center, inner, false, 1)?,
            ],
        })
    }

    /// Unit square `[0,1]^2`; sides are components 0..4 (bottom, right, top, left).
    pub fn square() -> Self {
        let mut d = Self::polygon(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]);
        d.kind = DomainKind::Square;
        d
    }

    /// Convex or nonconvex polygon with counterclockwise vertices; side `i`
    /// runs from vertex `i` to vertex `i+1` and is component `i`.
    pub fn polygon(vertices: &[Vec2]) -> Self {
        let n = vertices.len();
        let curves = (0..n)
            .map(|i| {
                let t = vertices[(i + 1) % n] - vertices[i];
                BoundaryCurve::line(vertices[i], Vec2::new(t.y, -t.x), i)
            })
            .collect();
        Self {
            kind: DomainKind::Polygon,
            curves,
        }
    }

    pub fn curve(&self, component: usize) -> &BoundaryCurve {
        &self.curves[component]
    }

    /// Component whose curve is closest to `p`.
    pub fn nearest_component(&self, p: Vec2) -> usize {
        let mut best = (f64::INFINITY, 0);
        for c in &self.curves {
            let d = c.distance(p);
            if d < best.0 {
                best = (d, c.component_id);
            }
        }
        best.1
    }

    /// Area of the physical domain.
    pub fn area(&self) -> f64 {
        match self.kind {
            DomainKind::Square | DomainKind::Polygon => {
                let pts: Vec<Vec2> = self
                    .curves
                    .iter()
                    .filter_map(|c| match &c.kind {
                        CurveKind::Line { point, .. } => Some(*point),
                        CurveKind::Circle { .. } => None,
                    })
                    .collect();
                let n = pts.len();
                0.5 * (0..n)
                    .map(|i| pts[i].x * pts[(i + 1) % n].y - pts[(i + 1) % n].x * pts[i].y)
                    .sum::<f64>()
            }
            DomainKind::Disk | DomainKind::Ring => self
                .curves
                .iter()
                .map(|c| match &c.kind {
                    CurveKind::Circle {
                        radius, outward_radial, ..
                    } => {
                        let a = std::f64::consts::PI * radius * radius;
                        if *outward_radial {
                            a
                        } else {
                            -a
                        }
                    }
                    CurveKind::Line { .. } => 0.0,
                })
                .sum(),
        }
    }
}

/// Sizes of the boundary-approximation defects on a mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryDiagnostics {
    pub h: f64,
    pub delta_max: f64,
    pub sup_normal_gap: f64,
    pub delta_ratio: f64,
    pub normal_ratio: f64,
}

/// Measures `sup delta_h` and `sup |n_gamma - n_h|` over boundary-edge
/// quadrature nodes, normalized by `h^2` and `h` respectively.
pub fn check_geometry_assumption(mesh: &Mesh, domain: &Domain, n_points: usize) -> Result<GeometryDiagnostics> {
    let rule = edge_quadrature(n_points);
    let h = mesh.stats().h;
    let mut delta_max: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for be in &mesh.boundary_edges {
        let edge = &mesh.edges[be.edge];
        let a = mesh.vertices[edge.vertices[0]];
        let b = mesh.vertices[edge.vertices[1]];
        let curve = domain.curve(be.component);
        for &t in &rule.points {
            let x_h = (a + b) * 0.5 + (b - a) * (0.5 * t);
            let pd = curve.closest_point(x_h)?;
            delta_max = delta_max.max(pd.delta);
            gap = gap.max((pd.n_gamma - edge.normal).norm());
        }
    }
    Ok(GeometryDiagnostics {
        h,
        delta_max,
        sup_normal_gap: gap,
        delta_ratio: delta_max / (h * h),
        normal_ratio: gap / h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_circle() -> BoundaryCurve {
        BoundaryCurve::circle(Vec2::zeros(), 1.0, true, 0).unwrap()
    }

    #[test]
    fn radial_projection_on_unit_circle() {
        let pd = unit_circle().closest_point(Vec2::new(0.588, 0.784)).unwrap();
        assert!((pd.x - Vec2::new(0.6, 0.8)).norm() < 1e-15);
        assert!((pd.delta - 0.02).abs() < 1e-15);
        assert!((pd.nu - Vec2::new(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn point_on_circle_is_fixed() {
        let pd = unit_circle().closest_point(Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(pd.x, Vec2::new(1.0, 0.0));
        assert_eq!(pd.delta, 0.0);
        assert_eq!(pd.nu, pd.n_gamma);
    }

    #[test]
    fn inner_ring_component_projects_toward_center() {
        let inner = BoundaryCurve::circle(Vec2::zeros(), 0.5, false, 1).unwrap();
        let pd = inner.closest_point(Vec2::new(0.54, 0.0)).unwrap();
        assert!((pd.x - Vec2::new(0.5, 0.0)).norm() < 1e-15);
        assert!((pd.delta - 0.04).abs() < 1e-15);
        assert!((pd.nu - Vec2::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(inner.gamma_normal(Vec2::new(0.5, 0.0)).unwrap(), Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn outward_normal_on_unit_circle() {
        let n = unit_circle().gamma_normal(Vec2::new(0.0, 1.0)).unwrap();
        assert_eq!(n, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn query_outside_reach_fails() {
        let c = unit_circle();
        assert!(matches!(c.closest_point(Vec2::zeros()), Err(Error::OutsideReach { .. })));
        assert!(matches!(c.closest_point(Vec2::new(2.5, 0.0)), Err(Error::OutsideReach { .. })));
    }

    #[test]
    fn normal_requires_point_on_curve() {
        assert!(matches!(
            unit_circle().gamma_normal(Vec2::new(0.9, 0.0)),
            Err(Error::NotOnCurve { .. })
        ));
    }

    #[test]
    fn nonpositive_radius_is_rejected() {
        assert!(BoundaryCurve::circle(Vec2::zeros(), 0.0, true, 0).is_err());
    }

    #[test]
    fn line_projection_is_orthogonal() {
        let l = BoundaryCurve::line(Vec2::zeros(), Vec2::new(0.0, -1.0), 0);
        let pd = l.closest_point(Vec2::new(0.3, 0.1)).unwrap();
        assert!((pd.x - Vec2::new(0.3, 0.0)).norm() < 1e-16);
        assert!((pd.delta - 0.1).abs() < 1e-16);
        assert_eq!(pd.nu, Vec2::new(0.0, -1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_reconstructs_query(r in 0.05f64..1.9, theta in 0.0f64..std::f64::consts::TAU,
                                             outer in any::<bool>()) {
                let c = BoundaryCurve::circle(Vec2::new(0.1, -0.2), 1.0, outer, 0).unwrap();
                let x_h = Vec2::new(0.1, -0.2) + Vec2::new(theta.cos(), theta.sin()) * r;
                let pd = c.closest_point(x_h).unwrap();
                prop_assert!(c.distance(pd.x) < 1e-12);
                prop_assert!((x_h + pd.nu * pd.delta - pd.x).norm() < 1e-13);
                prop_assert!((pd.nu.norm() - 1.0).abs() < 1e-14);
                prop_assert!((pd.n_gamma.norm() - 1.0).abs() < 1e-14);
                prop_assert_eq!(c.gamma_normal(pd.x).unwrap(), pd.n_gamma);
            }
        }
    }
}

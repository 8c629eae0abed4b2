//! Body-fitted triangulations of the disk, ring and unit square.
//!
//! Meshes are produced by uniform red refinement of a coarse mesh; after every
//! refinement the midpoints of boundary edges are projected onto the curve
//! component the edge discretizes, so all boundary vertices stay on the
//! physical boundary.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{CurveKind, Domain, DomainKind, Vec2, ON_CURVE_TOL};

/// Mesh edge with sorted endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, lower global index first. The edge parameter runs from
    /// `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles in ascending order (1 on the boundary, 2 inside).
    pub triangles: Vec<usize>,
    /// Global unit normal: outward of `triangles[0]`, hence outward of the
    /// mesh domain on boundary edges.
    pub normal: Vec2,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.len() == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Curve component of each boundary vertex, `None` for interior vertices.
    pub vertex_component: Vec<Option<usize>>,
    pub edges: Vec<Edge>,
    /// Global edge of local edge `i` (the edge opposite local vertex `i`).
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshStats {
    /// Maximum element diameter.
    pub h: f64,
    pub h_k: Vec<f64>,
    pub h_e: Vec<f64>,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
    /// `max h_K / min h_K`.
    pub uniformity: f64,
}

fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * ((b - a).x * (c - a).y - (b - a).y * (c - a).x)
}

impl Mesh {
    /// Builds edge tables and boundary tags for the given vertices and triangles.
    pub fn new(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        vertex_component: Vec<Option<usize>>,
        domain: &Domain,
        level: usize,
    ) -> Result<Self> {
        let mut mesh = Self {
            vertices,
            triangles,
            vertex_component,
            edges: Vec::new(),
            triangle_edges: Vec::new(),
            boundary_edges: Vec::new(),
            level,
        };
        mesh.build_topology(domain)?;
        Ok(mesh)
    }

    /// Deduplicates edges, records adjacency, orients global edge normals and
    /// tags boundary edges with the nearest curve component.
    pub fn build_topology(&mut self, domain: &Domain) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= self.vertices.len()) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            let area = self.signed_area(t);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} has nonpositive signed area {area:e}")));
            }
        }
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: key,
                        triangles: Vec::new(),
                        normal: Vec2::zeros(),
                    });
                    edges.len() - 1
                });
                edges[e].triangles.push(t);
                *slot = e;
            }
            triangle_edges.push(local);
        }
        for (e, edge) in edges.iter_mut().enumerate() {
            if edge.triangles.len() > 2 {
                return Err(Error::Mesh(format!(
                    "non-manifold edge {e} shared by {} triangles",
                    edge.triangles.len()
                )));
            }
            edge.triangles.sort_unstable();
            let owner = edge.triangles[0];
            let a = self.vertices[edge.vertices[0]];
            let b = self.vertices[edge.vertices[1]];
            let tri = self.triangles[owner];
            let opposite = tri
                .iter()
                .copied()
                .find(|v| !edge.vertices.contains(v))
                .expect("triangle has a vertex off each of its edges");
            let t = b - a;
            let mut n = Vec2::new(t.y, -t.x).normalize();
            if n.dot(&(a - self.vertices[opposite])) < 0.0 {
                n = -n;
            }
            edge.normal = n;
        }
        let boundary_edges = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_boundary())
            .map(|(i, e)| {
                let mid = (self.vertices[e.vertices[0]] + self.vertices[e.vertices[1]]) * 0.5;
                BoundaryEdge {
                    edge: i,
                    component: domain.nearest_component(mid),
                }
            })
            .collect();
        self.edges = edges;
        self.triangle_edges = triangle_edges;
        self.boundary_edges = boundary_edges;
        Ok(())
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Area of the mesh domain.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Sign relating the outward normal of triangle `t` on its local edge `i`
    /// to the global edge normal.
    pub fn edge_sign(&self, t: usize, i: usize) -> f64 {
        if self.edges[self.triangle_edges[t][i]].triangles[0] == t {
            1.0
        } else {
            -1.0
        }
    }

    /// Triangle owning a boundary edge and the local index of the edge in it.
    pub fn boundary_owner(&self, edge: usize) -> (usize, usize) {
        let t = self.edges[edge].triangles[0];
        let i = self.triangle_edges[t]
            .iter()
            .position(|&e| e == edge)
            .expect("owner contains the edge");
        (t, i)
    }

    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    pub fn stats(&self) -> MeshStats {
        let h_k: Vec<f64> = (0..self.triangles.len()).map(|t| self.triangle_diameter(t)).collect();
        let h_e = self
            .edges
            .iter()
            .map(|e| (self.vertices[e.vertices[1]] - self.vertices[e.vertices[0]]).norm())
            .collect();
        let mut min_angle = f64::INFINITY;
        for tri in &self.triangles {
            let p = tri.map(|v| self.vertices[v]);
            for i in 0..3 {
                let u = p[(i + 1) % 3] - p[i];
                let w = p[(i + 2) % 3] - p[i];
                let angle = (u.dot(&w) / (u.norm() * w.norm())).clamp(-1.0, 1.0).acos();
                min_angle = min_angle.min(angle.to_degrees());
            }
        }
        let h = h_k.iter().cloned().fold(0.0, f64::max);
        let h_min = h_k.iter().cloned().fold(f64::INFINITY, f64::min);
        MeshStats {
            h,
            uniformity: h / h_min,
            h_k,
            h_e,
            min_angle,
        }
    }

    /// Checks the structural invariants; used by tests and after import.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        for t in 0..self.triangles.len() {
            if !(self.signed_area(t) > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} is not counterclockwise")));
            }
        }
        for (v, comp) in self.vertex_component.iter().enumerate() {
            if let Some(c) = comp {
                let d = domain.curve(*c).distance(self.vertices[v]);
                if d > ON_CURVE_TOL {
                    return Err(Error::Mesh(format!("boundary vertex {v} is {d:e} off its curve")));
                }
            }
        }
        for be in &self.boundary_edges {
            for &v in &self.edges[be.edge].vertices {
                let d = domain.curve(be.component).distance(self.vertices[v]);
                if d > ON_CURVE_TOL {
                    return Err(Error::Mesh(format!("boundary edge {} vertex {v} is {d:e} off its curve", be.edge)));
                }
            }
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }
}

/// Coarse body-fitted mesh: a 6-triangle fan for the disk, 16 split sectors
/// for the ring, 2 triangles for the square.
pub fn coarse_mesh(domain: &Domain) -> Result<Mesh> {
    let (vertices, triangles, comps) = match domain.kind {
        DomainKind::Disk => {
            let CurveKind::Circle { center, radius, .. } = domain.curves[0].kind else {
                return Err(Error::Mesh("disk domain needs a circle".into()));
            };
            let mut v = vec![center];
            let mut comps = vec![None];
            for i in 0..6 {
                let a = i as f64 * PI / 3.0;
                v.push(center + Vec2::new(a.cos(), a.sin()) * radius);
                comps.push(Some(0));
            }
            let t = (0..6).map(|i| [0, 1 + i, 1 + (i + 1) % 6]).collect();
            (v, t, comps)
        }
        DomainKind::Ring => {
            let (CurveKind::Circle { center, radius: outer, .. }, CurveKind::Circle { radius: inner, .. }) =
                (&domain.curves[0].kind, &domain.curves[1].kind)
            else {
                return Err(Error::Mesh("ring domain needs two circles".into()));
            };
            let sectors = 16;
            let mut v = Vec::with_capacity(2 * sectors);
            let mut comps = Vec::with_capacity(2 * sectors);
            for i in 0..sectors {
                let a = i as f64 * 2.0 * PI / sectors as f64;
                let dir = Vec2::new(a.cos(), a.sin());
                v.push(center + dir * *inner);
                comps.push(Some(1));
                v.push(center + dir * *outer);
                comps.push(Some(0));
            }
            let mut t = Vec::with_capacity(2 * sectors);
            for i in 0..sectors {
                let j = (i + 1) % sectors;
                let (a, b, c, d) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                t.push([a, b, d]);
                t.push([a, d, c]);
            }
            (v, t, comps)
        }
        DomainKind::Polygon => {
            return Err(Error::Mesh("no coarse mesh generator for general polygons".into()));
        }
        DomainKind::Square => {
            let v = vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ];
            let comps = vec![Some(0), Some(1), Some(2), Some(3)];
            (v, vec![[0, 1, 2], [0, 2, 3]], comps)
        }
    };
    Mesh::new(vertices, triangles, comps, domain, 0)
}

/// One level of red refinement with boundary-midpoint projection.
pub fn refine_project(mesh: &Mesh, domain: &Domain) -> Result<Mesh> {
    let nv = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    let mut comps = mesh.vertex_component.clone();
    let mut boundary_of_edge: Vec<Option<usize>> = vec![None; mesh.edges.len()];
    for be in &mesh.boundary_edges {
        boundary_of_edge[be.edge] = Some(be.component);
    }
    for (e, edge) in mesh.edges.iter().enumerate() {
        let mid = (mesh.vertices[edge.vertices[0]] + mesh.vertices[edge.vertices[1]]) * 0.5;
        match boundary_of_edge[e] {
            Some(c) => {
                vertices.push(domain.curve(c).project(mid)?);
                comps.push(Some(c));
            }
            None => {
                vertices.push(mid);
                comps.push(None);
            }
        }
    }
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &[v0, v1, v2]) in mesh.triangles.iter().enumerate() {
        let [m0, m1, m2] = mesh.triangle_edges[t].map(|e| nv + e);
        triangles.push([v0, m2, m1]);
        triangles.push([m2, v1, m0]);
        triangles.push([m1, m0, v2]);
        triangles.push([m0, m1, m2]);
    }
    Mesh::new(vertices, triangles, comps, domain, mesh.level + 1)
}

/// Coarse mesh refined `level` times.
pub fn mesh_at_level(domain: &Domain, level: usize) -> Result<Mesh> {
    let mut mesh = coarse_mesh(domain)?;
    for _ in 0..level {
        mesh = refine_project(&mesh, domain)?;
    }
    Ok(mesh)
}

/// Writes the plain-text mesh format: a `V E_b T` header, then vertex lines
/// `x y on_boundary component_id`, triangle lines `i j k`, and boundary edge
/// lines `i j component_id`. Interior vertices carry component id `-1`.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.vertices.len(),
        mesh.boundary_edges.len(),
        mesh.triangles.len()
    );
    for (v, c) in mesh.vertices.iter().zip(&mesh.vertex_component) {
        let (flag, id) = match c {
            Some(c) => (1, *c as i64),
            None => (0, -1),
        };
        let _ = writeln!(out, "{:.16e} {:.16e} {flag} {id}", v.x, v.y);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for be in &mesh.boundary_edges {
        let [a, b] = mesh.edges[be.edge].vertices;
        let _ = writeln!(out, "{a} {b} {}", be.component);
    }
    out
}

/// Parses the format written by [`write_mesh`]. Boundary tags from the file
/// take precedence over the nearest-component rule.
pub fn read_mesh(text: &str, domain: &Domain) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let parse_err = |line: usize, message: &str| Error::Parse {
        line: line + 1,
        message: message.to_string(),
    };
    let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty mesh file"))?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_err(hl, "bad header count")))
        .collect::<Result<_>>()?;
    let [nv, nb, nt] = counts[..] else {
        return Err(parse_err(hl, "header must be `V E_b T`"));
    };
    let mut vertices = Vec::with_capacity(nv);
    let mut comps = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(hl, "missing vertex line"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse_err(ln, "vertex line needs 4 fields"));
        }
        let x: f64 = f[0].parse().map_err(|_| parse_err(ln, "bad x"))?;
        let y: f64 = f[1].parse().map_err(|_| parse_err(ln, "bad y"))?;
        let on: u8 = f[2].parse().map_err(|_| parse_err(ln, "bad boundary flag"))?;
        let id: i64 = f[3].parse().map_err(|_| parse_err(ln, "bad component id"))?;
        vertices.push(Vec2::new(x, y));
        comps.push(if on == 1 && id >= 0 { Some(id as usize) } else { None });
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(hl, "missing triangle line"))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err(ln, "bad triangle index")))
            .collect::<Result<_>>()?;
        let [a, b, c] = idx[..] else {
            return Err(parse_err(ln, "triangle line needs 3 indices"));
        };
        triangles.push([a, b, c]);
    }
    let mut tags = HashMap::new();
    for _ in 0..nb {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(hl, "missing boundary edge line"))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err(ln, "bad boundary edge field")))
            .collect::<Result<_>>()?;
        let [a, b, c] = idx[..] else {
            return Err(parse_err(ln, "boundary edge line needs 3 fields"));
        };
        tags.insert([a.min(b), a.max(b)], c);
    }
    let mut mesh = Mesh::new(vertices, triangles, comps, domain, 0)?;
    if mesh.boundary_edges.len() != nb {
        return Err(Error::Mesh(format!(
            "file lists {nb} boundary edges, topology has {}",
            mesh.boundary_edges.len()
        )));
    }
    for be in &mut mesh.boundary_edges {
        let key = mesh.edges[be.edge].vertices;
        be.component = *tags
            .get(&key)
            .ok_or_else(|| Error::Mesh(format!("boundary edge {key:?} missing from file")))?;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_fan_counts() {
        let d = Domain::disk();
        let m = coarse_mesh(&d).unwrap();
        assert_eq!((m.vertices.len(), m.triangles.len(), m.boundary_edges.len()), (7, 6, 6));
        for v in &m.vertices[1..] {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn ring_sectors_euler() {
        let m = coarse_mesh(&Domain::ring()).unwrap();
        assert_eq!(m.triangles.len(), 32);
        assert_eq!(m.euler_characteristic(), 0);
        m.validate(&Domain::ring()).unwrap();
    }

    #[test]
    fn adjacency_counts() {
        let d = Domain::disk();
        let m = mesh_at_level(&d, 1).unwrap();
        for e in &m.edges {
            let expected = if m.boundary_edges.iter().any(|b| m.edges[b.edge] == *e) { 1 } else { 2 };
            assert_eq!(e.triangles.len(), expected);
        }
        assert_eq!(m.edges.len(), m.vertices.len() + m.triangles.len() - 1);
    }

    #[test]
    fn boundary_midpoint_projection() {
        // 4-triangle fan with the chord (1,0)-(0,1); its midpoint goes to (√2/2, √2/2).
        let d = Domain::disk();
        let verts = vec![
            Vec2::zeros(),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(-1.0, 0.0),
            Vec2::new(0.0, -1.0),
        ];
        let tris = (0..4).map(|i| [0, 1 + i, 1 + (i + 1) % 4]).collect();
        let comps = vec![None, Some(0), Some(0), Some(0), Some(0)];
        let m = Mesh::new(verts, tris, comps, &d, 0).unwrap();
        let r = refine_project(&m, &d).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(r.vertices.iter().any(|v| (v - Vec2::new(s, s)).norm() < 1e-15));
        r.validate(&d).unwrap();
    }

    #[test]
    fn refinement_quadruples_and_halves() {
        let d = Domain::disk();
        let mut m = coarse_mesh(&d).unwrap();
        for _ in 0..5 {
            let r = refine_project(&m, &d).unwrap();
            assert_eq!(r.triangles.len(), 4 * m.triangles.len());
            let ratio = r.stats().h / m.stats().h;
            assert!((0.45..=0.62).contains(&ratio), "ratio {ratio}");
            r.validate(&d).unwrap();
            m = r;
        }
    }

    #[test]
    fn equilateral_diameter() {
        let d = Domain::square();
        let s = 0.7;
        let verts = vec![Vec2::new(0.0, 0.0), Vec2::new(s, 0.0), Vec2::new(0.5 * s, 0.75f64.sqrt() * s)];
        let m = Mesh::new(verts, vec![[0, 1, 2]], vec![None; 3], &d, 0).unwrap();
        assert!((m.stats().h_k[0] - s).abs() < 1e-15);
        assert!((m.stats().min_angle - 60.0).abs() < 1e-9);
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let d = Domain::square();
        let verts = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)];
        assert!(Mesh::new(verts, vec![[0, 1, 2]], vec![None; 3], &d, 0).is_err());
    }

    #[test]
    fn nonmanifold_edge_rejected() {
        let d = Domain::square();
        let verts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 1.0),
            Vec2::new(0.5, -1.0),
            Vec2::new(0.2, 2.0),
        ];
        let tris = vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]];
        assert!(matches!(Mesh::new(verts, tris, vec![None; 5], &d, 0), Err(Error::Mesh(_))));
    }

    #[test]
    fn interior_normals_are_outward_of_lower_triangle() {
        let d = Domain::ring();
        let m = mesh_at_level(&d, 1).unwrap();
        for (t, tri) in m.triangles.iter().enumerate() {
            let c = (m.vertices[tri[0]] + m.vertices[tri[1]] + m.vertices[tri[2]]) / 3.0;
            for i in 0..3 {
                let e = &m.edges[m.triangle_edges[t][i]];
                let mid = (m.vertices[e.vertices[0]] + m.vertices[e.vertices[1]]) * 0.5;
                let outward = e.normal.dot(&(mid - c)) * m.edge_sign(t, i);
                assert!(outward > 0.0);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let d = Domain::ring();
        let m = mesh_at_level(&d, 1).unwrap();
        let back = read_mesh(&write_mesh(&m), &d).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!(a, b);
        }
    }
}

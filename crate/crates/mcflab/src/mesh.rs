//! Closed oriented triangle meshes in R^3 (surfaces with n = 2 only):
//! cotangent-weight mean curvature, per-vertex shape-operator fits, surface
//! of revolution and capped-tube generators, OFF snapshots, and a spatial-
//! hash self-intersection test.

use crate::error::{Error, Result};
use crate::profile::{ProfileCurve, Topology};
use nalgebra::{Matrix2, Point3, Vector3};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Triangulated closed surface, consistently oriented (outward normals).
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let m = TriMesh { vertices, faces };
        m.validate()?;
        Ok(m)
    }

    /// Closed, oriented, manifold check: every edge shared by exactly two
    /// faces with opposite direction; no degenerate triangles.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                if f[k] as usize >= nv {
                    return Err(Error::InvalidGeometry(format!(
                        "face {fi} references vertex {} out of range",
                        f[k]
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidGeometry(format!(
                    "face {fi} is combinatorially degenerate"
                )));
            }
            if self.face_area(fi) < 1e-300 {
                return Err(Error::InvalidGeometry(format!("face {fi} has zero area")));
            }
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                *directed.entry(e).or_insert(0) += 1;
                if directed[&e] > 1 {
                    return Err(Error::InvalidGeometry(format!(
                        "directed edge ({}, {}) repeated: inconsistent orientation",
                        e.0, e.1
                    )));
                }
            }
        }
        for (&(a, b), _) in directed.iter() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::InvalidGeometry(format!(
                    "edge ({a}, {b}) has no opposite face: mesh not closed"
                )));
            }
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        let v = self.vertices.len() as i64;
        let f = self.faces.len() as i64;
        let e = 3 * f / 2;
        v - e + f
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        let f = self.faces[fi];
        let a = self.vertices[f[0] as usize];
        let b = self.vertices[f[1] as usize];
        let c = self.vertices[f[2] as usize];
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    /// Enclosed volume by the divergence theorem; positive for outward
    /// orientation.
    pub fn signed_volume(&self) -> f64 {
        let mut v6 = 0.0;
        for f in &self.faces {
            let a = self.vertices[f[0] as usize].coords;
            let b = self.vertices[f[1] as usize].coords;
            let c = self.vertices[f[2] as usize].coords;
            v6 += a.dot(&b.cross(&c));
        }
        v6 / 6.0
    }

    pub fn centroid(&self) -> Point3<f64> {
        let mut acc = Vector3::zeros();
        for v in &self.vertices {
            acc += v.coords;
        }
        Point3::from(acc / self.vertices.len() as f64)
    }

    /// Twice the maximum vertex distance from the centroid. Exact for
    /// centrally symmetric bodies; used as the per-step size scalar because
    /// an exact 3D diameter each step is too expensive.
    pub fn extent(&self) -> f64 {
        let c = self.centroid();
        let mut worst: f64 = 0.0;
        for v in &self.vertices {
            worst = worst.max((v - c).norm());
        }
        2.0 * worst
    }

    pub fn min_edge(&self) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.faces {
            for k in 0..3 {
                let a = self.vertices[f[k] as usize];
                let b = self.vertices[f[(k + 1) % 3] as usize];
                best = best.min((b - a).norm());
            }
        }
        best
    }

    /// Area-weighted outward vertex normals (assumes outward face winding).
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let a = self.vertices[f[0] as usize];
            let b = self.vertices[f[1] as usize];
            let c = self.vertices[f[2] as usize];
            let n = (b - a).cross(&(c - a));
            for &vi in f {
                normals[vi as usize] += n;
            }
        }
        for n in normals.iter_mut() {
            let len = n.norm();
            if len > 1e-300 {
                *n /= len;
            }
        }
        normals
    }

    /// One-ring adjacency.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nb: Vec<Vec<u32>> = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                if !nb[a as usize].contains(&b) {
                    nb[a as usize].push(b);
                }
                if !nb[b as usize].contains(&a) {
                    nb[b as usize].push(a);
                }
            }
        }
        nb
    }

    pub fn write_off<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "OFF")?;
        writeln!(
            w,
            "{} {} {}",
            self.vertices.len(),
            self.faces.len(),
            3 * self.faces.len() / 2
        )?;
        for v in &self.vertices {
            writeln!(w, "{:.15e} {:.15e} {:.15e}", v.x, v.y, v.z)?;
        }
        for f in &self.faces {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
        Ok(())
    }

    pub fn read_off<R: BufRead>(r: R) -> Result<TriMesh> {
        let mut lines = r.lines().filter_map(|l| l.ok()).filter(|l| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidGeometry("empty OFF".into()))?;
        if header.trim() != "OFF" {
            return Err(Error::InvalidGeometry("missing OFF header".into()));
        }
        let counts = lines
            .next()
            .ok_or_else(|| Error::InvalidGeometry("missing OFF counts".into()))?;
        let mut it = counts.split_whitespace();
        let nv: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidGeometry("bad OFF counts".into()))?;
        let nf: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidGeometry("bad OFF counts".into()))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidGeometry("truncated OFF vertices".into()))?;
            let xs: Vec<f64> = line
                .split_whitespace()
                .filter_map(|s| s.parse().ok())
                .collect();
            if xs.len() < 3 {
                return Err(Error::InvalidGeometry(format!("bad OFF vertex: {line}")));
            }
            vertices.push(Point3::new(xs[0], xs[1], xs[2]));
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidGeometry("truncated OFF faces".into()))?;
            let xs: Vec<u32> = line
                .split_whitespace()
                .filter_map(|s| s.parse().ok())
                .collect();
            if xs.len() != 4 || xs[0] != 3 {
                return Err(Error::InvalidGeometry(format!(
                    "only triangle OFF faces supported: {line}"
                )));
            }
            faces.push([xs[1], xs[2], xs[3]]);
        }
        TriMesh::new(vertices, faces)
    }
}

/// Mean curvature vectors: cotangent Laplace-Beltrami of the positions over
/// mixed vertex areas. The vector magnitude is H = kappa_1 + kappa_2 and the
/// direction is the mean curvature normal (inward for convex bodies).
pub fn mesh_mean_curvature(mesh: &TriMesh) -> Result<Vec<Vector3<f64>>> {
    let nv = mesh.vertices.len();
    let mut lap = vec![Vector3::zeros(); nv];
    let mut area = vec![0.0f64; nv];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let idx = [f[0] as usize, f[1] as usize, f[2] as usize];
        let p = [
            mesh.vertices[idx[0]],
            mesh.vertices[idx[1]],
            mesh.vertices[idx[2]],
        ];
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]]; // edge opposite vertex k
        let a2 = e[1].cross(&e[2]).norm(); // twice the face area
        if a2 < 1e-14 * e[0].norm() * e[1].norm() {
            return Err(Error::InvalidGeometry(format!(
                "degenerate triangle {fi} in curvature evaluation"
            )));
        }
        let mut cot = [0.0; 3];
        for k in 0..3 {
            let u = -e[(k + 1) % 3];
            let v = e[(k + 2) % 3];
            cot[k] = u.dot(&v) / a2;
        }
        // mixed (Voronoi-safe) vertex areas
        let face_area = 0.5 * a2;
        match (0..3).find(|&k| cot[k] < 0.0) {
            Some(ko) => {
                for k in 0..3 {
                    area[idx[k]] += if k == ko {
                        face_area / 2.0
                    } else {
                        face_area / 4.0
                    };
                }
            }
            None => {
                for k in 0..3 {
                    let l1 = e[(k + 1) % 3].norm_squared();
                    let l2 = e[(k + 2) % 3].norm_squared();
                    area[idx[k]] += (l1 * cot[(k + 1) % 3] + l2 * cot[(k + 2) % 3]) / 8.0;
                }
            }
        }
        for k in 0..3 {
            let (i, j) = (idx[(k + 1) % 3], idx[(k + 2) % 3]);
            let w = cot[k];
            let d = mesh.vertices[j] - mesh.vertices[i];
            lap[i] += w * d;
            lap[j] -= w * d;
        }
    }
    for i in 0..nv {
        if area[i] <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "vertex {i} has nonpositive mixed area"
            )));
        }
        lap[i] /= 2.0 * area[i];
    }
    Ok(lap)
}

/// Per-vertex principal curvatures `(k_min, k_max)` with respect to the
/// inward normal, from a least-squares quadric fit over the one-ring (plus
/// linear terms to absorb normal estimation error). Low-valence rings are
/// widened to the two-ring.
pub fn principal_curvatures(mesh: &TriMesh) -> Result<Vec<(f64, f64)>> {
    let normals = mesh.vertex_normals();
    let neighbors = mesh.vertex_neighbors();
    let mut out = Vec::with_capacity(mesh.vertices.len());
    for i in 0..mesh.vertices.len() {
        let n = normals[i];
        let t1 = if n.x.abs() < 0.9 {
            Vector3::x().cross(&n).normalize()
        } else {
            Vector3::y().cross(&n).normalize()
        };
        let t2 = n.cross(&t1);
        // fit z = a x^2/2 + b x y + c y^2/2 + d x + e y
        let mut ata = [[0.0f64; 5]; 5];
        let mut atb = [0.0f64; 5];
        let pi = mesh.vertices[i];
        let mut push = |d: Vector3<f64>| {
            let (x, y, z) = (d.dot(&t1), d.dot(&t2), d.dot(&n));
            let row = [0.5 * x * x, x * y, 0.5 * y * y, x, y];
            for r in 0..5 {
                for c in 0..5 {
                    ata[r][c] += row[r] * row[c];
                }
                atb[r] += row[r] * z;
            }
        };
        let ring = &neighbors[i];
        for &j in ring {
            push(mesh.vertices[j as usize] - pi);
        }
        if ring.len() < 6 {
            for &j in ring {
                for &k in &neighbors[j as usize] {
                    if k != i as u32 && !ring.contains(&k) {
                        push(mesh.vertices[k as usize] - pi);
                    }
                }
            }
        }
        let coeffs = solve5(&ata, &atb).ok_or_else(|| {
            Error::InvalidGeometry(format!("curvature fit singular at vertex {i}"))
        })?;
        // curvatures w.r.t. the inward normal are the negated eigenvalues of
        // the fitted shape operator
        let s = Matrix2::new(coeffs[0], coeffs[1], coeffs[1], coeffs[2]);
        let eig = s.symmetric_eigenvalues();
        let (k1, k2) = (-eig[0], -eig[1]);
        out.push((k1.min(k2), k1.max(k2)));
    }
    Ok(out)
}

fn solve5(a: &[[f64; 5]; 5], b: &[f64; 5]) -> Option<[f64; 5]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..5 {
        let mut piv = col;
        for r in col + 1..5 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..5 {
            let f = m[r][col] / m[col][col];
            for c in col..5 {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 5];
    for col in (0..5).rev() {
        let mut acc = rhs[col];
        for c in col + 1..5 {
            acc -= m[col][c] * x[c];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

/// Minimum over vertices of the sum of the two smallest principal curvatures
/// (w.r.t. the inward normal); positive means the mesh is 2-convex.
pub fn min_two_convexity(mesh: &TriMesh) -> Result<f64> {
    let pc = principal_curvatures(mesh)?;
    Ok(pc
        .iter()
        .map(|&(k1, k2)| k1 + k2)
        .fold(f64::INFINITY, f64::min))
}

/// Surface of revolution of a profile curve about the x-axis (n = 2 only).
/// AxisToAxis profiles get pole fans; Closed profiles become tori.
pub fn revolve(profile: &ProfileCurve, segments: usize) -> Result<TriMesh> {
    if profile.dim() != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "revolve requires n = 2, got n = {}",
            profile.dim()
        )));
    }
    if segments < 16 {
        return Err(Error::InvalidGeometry("revolve needs >= 16 segments".into()));
    }
    let s = segments as u32;
    let ring_angle = |j: u32| std::f64::consts::TAU * (j % s) as f64 / segments as f64;
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    match profile.topology() {
        Topology::AxisToAxis => {
            let m = profile.len();
            vertices.push(Point3::new(profile.point(0)[0], 0.0, 0.0));
            vertices.push(Point3::new(profile.point(m - 1)[0], 0.0, 0.0));
            for i in 1..m - 1 {
                let [x, r] = profile.point(i);
                for j in 0..s {
                    let th = ring_angle(j);
                    vertices.push(Point3::new(x, r * th.cos(), r * th.sin()));
                }
            }
            let ring = |i: usize, j: u32| 2 + (i as u32 - 1) * s + (j % s);
            for j in 0..s {
                faces.push([0, ring(1, j + 1), ring(1, j)]);
            }
            for i in 1..m - 2 {
                for j in 0..s {
                    let a = ring(i, j);
                    let b = ring(i + 1, j);
                    let c = ring(i + 1, j + 1);
                    let d = ring(i, j + 1);
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
            }
            for j in 0..s {
                faces.push([1, ring(m - 2, j), ring(m - 2, j + 1)]);
            }
        }
        Topology::Closed => {
            let m = profile.len();
            for i in 0..m {
                let [x, r] = profile.point(i);
                for j in 0..s {
                    let th = ring_angle(j);
                    vertices.push(Point3::new(x, r * th.cos(), r * th.sin()));
                }
            }
            let ring = |i: usize, j: u32| (i % m) as u32 * s + (j % s);
            for i in 0..m {
                for j in 0..s {
                    let a = ring(i, j);
                    let b = ring(i + 1, j);
                    let c = ring(i + 1, j + 1);
                    let d = ring(i, j + 1);
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
            }
        }
        Topology::Open => {
            return Err(Error::InvalidTopology(
                "cannot revolve an open profile into a closed mesh".into(),
            ));
        }
    }
    let mut mesh = TriMesh { vertices, faces };
    if mesh.signed_volume() < 0.0 {
        for f in mesh.faces.iter_mut() {
            f.swap(1, 2);
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Capped tube: sweep a pill radius profile along a core curve using
/// parallel-transport frames, extending straight past the core endpoints for
/// the hemispherical caps (fillet per the pill construction). Requires
/// `radius < 1/(2C)` against the core curvature bound.
pub fn tube_mesh(core: &[Point3<f64>], radius: f64, segments: usize) -> Result<TriMesh> {
    if core.len() < 3 {
        return Err(Error::Construction("tube core needs at least 3 samples".into()));
    }
    if radius <= 0.0 {
        return Err(Error::Construction("tube radius must be positive".into()));
    }
    if segments < 16 {
        return Err(Error::InvalidGeometry("tube needs >= 16 segments".into()));
    }
    let mut arclen = vec![0.0];
    for i in 1..core.len() {
        arclen.push(arclen[i - 1] + (core[i] - core[i - 1]).norm());
    }
    let length = *arclen.last().unwrap();
    let mut tangents: Vec<Vector3<f64>> = Vec::with_capacity(core.len());
    for i in 0..core.len() {
        let t = if i == 0 {
            core[1] - core[0]
        } else if i == core.len() - 1 {
            core[i] - core[i - 1]
        } else {
            core[i + 1] - core[i - 1]
        };
        tangents.push(t.normalize());
    }
    let mut cbound: f64 = 0.0;
    for i in 1..core.len() - 1 {
        let ds = 0.5 * (arclen[i + 1] - arclen[i - 1]);
        cbound = cbound.max((tangents[i + 1] - tangents[i - 1]).norm() / (2.0 * ds));
    }
    if cbound > 0.0 && radius >= 0.5 / cbound {
        return Err(Error::Construction(format!(
            "tube radius {radius} violates the focal bound 1/(2C) = {:.4}",
            0.5 / cbound
        )));
    }
    for i in 0..core.len() {
        for j in i + 1..core.len() {
            if (arclen[j] - arclen[i]) > 4.0 * radius && (core[j] - core[i]).norm() < 2.0 * radius
            {
                return Err(Error::Construction(
                    "tube offset self-intersects: core approaches itself".into(),
                ));
            }
        }
    }
    let pill = crate::shapes::make_pill_with(length, radius, 2, 0.05, radius / 24.0)?;
    // frames by parallel transport
    let mut e2: Vec<Vector3<f64>> = Vec::with_capacity(core.len());
    let mut e3: Vec<Vector3<f64>> = Vec::with_capacity(core.len());
    let seed = if tangents[0].x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let mut v2 = (seed - tangents[0] * seed.dot(&tangents[0])).normalize();
    for t in &tangents {
        v2 = (v2 - t * v2.dot(t)).normalize();
        e2.push(v2);
        e3.push(t.cross(&v2));
    }
    let frame_at = |s: f64| -> (Point3<f64>, Vector3<f64>, Vector3<f64>) {
        if s <= 0.0 {
            return (core[0] + tangents[0] * s, e2[0], e3[0]);
        }
        if s >= length {
            let l = core.len() - 1;
            return (core[l] + tangents[l] * (s - length), e2[l], e3[l]);
        }
        let mut k = 0;
        while k + 1 < arclen.len() - 1 && arclen[k + 1] < s {
            k += 1;
        }
        let t = (s - arclen[k]) / (arclen[k + 1] - arclen[k]);
        let p = core[k] + (core[k + 1] - core[k]) * t;
        let tan = (tangents[k] * (1.0 - t) + tangents[k + 1] * t).normalize();
        let w2 = e2[k] * (1.0 - t) + e2[k + 1] * t;
        let w2 = (w2 - tan * w2.dot(&tan)).normalize();
        (p, w2, tan.cross(&w2))
    };
    // sweep: pill profile x runs over [-(L/2 + r), L/2 + r]; shift so the
    // core occupies [0, L]
    let s32 = segments as u32;
    let m = pill.len();
    let half = 0.5 * length;
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let (p0, _, _) = frame_at(pill.point(0)[0] + half);
    vertices.push(p0);
    let (p1, _, _) = frame_at(pill.point(m - 1)[0] + half);
    vertices.push(p1);
    for i in 1..m - 1 {
        let [x, r] = pill.point(i);
        let (p, w2, w3) = frame_at(x + half);
        for j in 0..s32 {
            let th = std::f64::consts::TAU * j as f64 / segments as f64;
            vertices.push(p + w2 * (r * th.cos()) + w3 * (r * th.sin()));
        }
    }
    let ring = |i: usize, j: u32| 2 + (i as u32 - 1) * s32 + (j % s32);
    for j in 0..s32 {
        faces.push([0, ring(1, j + 1), ring(1, j)]);
    }
    for i in 1..m - 2 {
        for j in 0..s32 {
            let a = ring(i, j);
            let b = ring(i + 1, j);
            let c = ring(i + 1, j + 1);
            let d = ring(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for j in 0..s32 {
        faces.push([1, ring(m - 2, j), ring(m - 2, j + 1)]);
    }
    let mut mesh = TriMesh { vertices, faces };
    if mesh.signed_volume() < 0.0 {
        for f in mesh.faces.iter_mut() {
            f.swap(1, 2);
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Icosphere: subdivided icosahedron projected to the sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> Result<TriMesh> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = vec![
        Point3::new(-1.0, phi, 0.0),
        Point3::new(1.0, phi, 0.0),
        Point3::new(-1.0, -phi, 0.0),
        Point3::new(1.0, -phi, 0.0),
        Point3::new(0.0, -1.0, phi),
        Point3::new(0.0, 1.0, phi),
        Point3::new(0.0, -1.0, -phi),
        Point3::new(0.0, 1.0, -phi),
        Point3::new(phi, 0.0, -1.0),
        Point3::new(phi, 0.0, 1.0),
        Point3::new(-phi, 0.0, -1.0),
        Point3::new(-phi, 0.0, 1.0),
    ];
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut new_faces = Vec::with_capacity(4 * faces.len());
        for f in &faces {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let p = Point3::from(
                        (vertices[a as usize].coords + vertices[b as usize].coords) / 2.0,
                    );
                    vertices.push(p);
                    (vertices.len() - 1) as u32
                });
            }
            new_faces.push([f[0], mid[0], mid[2]]);
            new_faces.push([f[1], mid[1], mid[0]]);
            new_faces.push([f[2], mid[2], mid[1]]);
            new_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = new_faces;
    }
    for v in vertices.iter_mut() {
        let len = v.coords.norm();
        v.coords *= radius / len;
    }
    TriMesh::new(vertices, faces)
}

/// First pair of intersecting non-adjacent triangles, if any, via a uniform
/// spatial hash over triangle bounding boxes.
pub fn self_intersection(mesh: &TriMesh) -> Option<(usize, usize)> {
    let nf = mesh.faces.len();
    if nf == 0 {
        return None;
    }
    let mut cell = 0.0;
    for (i, _) in mesh.faces.iter().enumerate() {
        let f = mesh.faces[i];
        for k in 0..3 {
            let a = mesh.vertices[f[k] as usize];
            let b = mesh.vertices[f[(k + 1) % 3] as usize];
            cell += (b - a).norm();
        }
    }
    cell /= (3 * nf) as f64;
    if cell <= 0.0 {
        return None;
    }
    let key = |p: &Point3<f64>| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut boxes = Vec::with_capacity(nf);
    for (i, f) in mesh.faces.iter().enumerate() {
        let pts = [
            mesh.vertices[f[0] as usize],
            mesh.vertices[f[1] as usize],
            mesh.vertices[f[2] as usize],
        ];
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in &pts[1..] {
            for c in 0..3 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        boxes.push((lo, hi));
        let (k0, k1) = (key(&lo), key(&hi));
        for x in k0.0..=k1.0 {
            for y in k0.1..=k1.1 {
                for z in k0.2..=k1.2 {
                    grid.entry((x, y, z)).or_default().push(i);
                }
            }
        }
    }
    let shares_vertex = |a: [u32; 3], b: [u32; 3]| a.iter().any(|v| b.contains(v));
    let mut checked: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for bucket in grid.values() {
        for ii in 0..bucket.len() {
            for jj in ii + 1..bucket.len() {
                let (i, j) = (bucket[ii].min(bucket[jj]), bucket[ii].max(bucket[jj]));
                if shares_vertex(mesh.faces[i], mesh.faces[j]) || !checked.insert((i, j)) {
                    continue;
                }
                let (lo_i, hi_i) = boxes[i];
                let (lo_j, hi_j) = boxes[j];
                let overlap = (0..3).all(|c| lo_i[c] <= hi_j[c] && lo_j[c] <= hi_i[c]);
                if !overlap {
                    continue;
                }
                if tri_tri_intersect(mesh, i, j) {
                    return Some((i, j));
                }
            }
        }
    }
    None
}

fn tri_tri_intersect(mesh: &TriMesh, i: usize, j: usize) -> bool {
    let tri = |t: usize| {
        let f = mesh.faces[t];
        [
            mesh.vertices[f[0] as usize],
            mesh.vertices[f[1] as usize],
            mesh.vertices[f[2] as usize],
        ]
    };
    let a = tri(i);
    let b = tri(j);
    edges_pierce(&a, &b) || edges_pierce(&b, &a)
}

fn edges_pierce(tri: &[Point3<f64>; 3], other: &[Point3<f64>; 3]) -> bool {
    for k in 0..3 {
        if segment_hits_triangle(tri[k], tri[(k + 1) % 3], other) {
            return true;
        }
    }
    false
}

fn segment_hits_triangle(p: Point3<f64>, q: Point3<f64>, tri: &[Point3<f64>; 3]) -> bool {
    let dir = q - p;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = p - tri[0];
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let qv = s.cross(&e1);
    let v = inv * dir.dot(&qv);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = inv * e2.dot(&qv);
    (1e-10..=1.0 - 1e-10).contains(&t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::GraphEnds;
    use crate::shapes::{arc_core, make_pill, make_sphere};

    #[test]
    fn icosphere_mean_curvature_is_two_over_r() {
        let mesh = icosphere(1.0, 4).unwrap();
        let hv = mesh_mean_curvature(&mesh).unwrap();
        for (i, h) in hv.iter().enumerate() {
            let mag = h.norm();
            assert!(
                (mag - 2.0).abs() < 0.04,
                "vertex {i}: |H| = {mag} expected 2 within 2%"
            );
            let inward = -mesh.vertices[i].coords.normalize();
            assert!(h.normalize().dot(&inward) > 0.99);
        }
    }

    #[test]
    fn revolve_sphere_has_the_right_area_and_genus() {
        let p = make_sphere(1.0, 2, 200).unwrap();
        let mesh = revolve(&p, 64).unwrap();
        assert_eq!(mesh.euler_characteristic(), 2);
        let area = mesh.area();
        assert!(
            (area - 4.0 * std::f64::consts::PI).abs() < 0.005 * 4.0 * std::f64::consts::PI,
            "area {area}"
        );
        assert!(mesh.signed_volume() > 0.0);
    }

    #[test]
    fn revolve_matches_profile_curvature_away_from_poles() {
        // prolate ellipsoid with semi-axes (2, 1): the mesh oracle must agree
        // with the profile stencil within 1%
        let m = 800;
        let mut samples: Vec<[f64; 2]> = (0..=m)
            .map(|i| {
                let t = std::f64::consts::PI * (i as f64 / m as f64 - 0.5);
                [2.0 * t.sin(), t.cos()]
            })
            .collect();
        samples[0] = [-2.0, 0.0];
        samples[m] = [2.0, 0.0];
        let p = crate::profile::ProfileCurve::new(samples, Topology::AxisToAxis, 2).unwrap();
        let mesh = revolve(&p, 512).unwrap();
        let hv = mesh_mean_curvature(&mesh).unwrap();
        for i in [m / 2, m / 4, 40, 20] {
            let c = p.curvature_at(i).unwrap();
            let v = 2 + (i - 1) * 512; // first ring vertex of interior sample i
            let mesh_h = hv[v].norm();
            assert!(
                ((mesh_h - c.h) / c.h).abs() < 0.01,
                "sample {i}: mesh H {mesh_h} vs profile H {}",
                c.h
            );
        }
    }

    #[test]
    fn straight_tube_coincides_with_the_revolved_pill() {
        let len = 2.0;
        let r = 0.3;
        let core: Vec<Point3<f64>> = (0..48)
            .map(|i| Point3::new(len * i as f64 / 47.0, 0.0, 0.0))
            .collect();
        let tube = tube_mesh(&core, r, 48).unwrap();
        let pill = {
            let p = crate::shapes::make_pill_with(len, r, 2, 0.05, r / 24.0).unwrap();
            let samples: Vec<[f64; 2]> = p
                .samples()
                .iter()
                .map(|s| [s[0] + 0.5 * len, s[1]])
                .collect();
            crate::profile::ProfileCurve::new(samples, Topology::AxisToAxis, 2).unwrap()
        };
        let pm = revolve(&pill, 48).unwrap();
        assert!((tube.area() - pm.area()).abs() < 1e-6 * pm.area());
        let mut worst: f64 = 0.0;
        for v in &tube.vertices {
            let mut best = f64::INFINITY;
            for w in &pm.vertices {
                best = best.min((v - w).norm());
            }
            worst = worst.max(best);
        }
        assert!(worst < 1e-6, "straight tube deviates {worst}");
    }

    #[test]
    fn bent_tube_is_two_convex() {
        let core = arc_core(0.1, 3.0, 96);
        let tube = tube_mesh(&core, 0.2, 48).unwrap();
        assert_eq!(tube.euler_characteristic(), 2);
        let min2c = min_two_convexity(&tube).unwrap();
        assert!(
            min2c > 0.0,
            "bent tube should be 2-convex everywhere, min sum {min2c}"
        );
    }

    #[test]
    fn oversized_tube_radius_is_rejected() {
        let core = arc_core(0.1, 3.0, 96);
        assert!(tube_mesh(&core, 6.0, 48).is_err());
    }

    #[test]
    fn principal_curvatures_on_a_sphere() {
        let mesh = icosphere(2.0, 3).unwrap();
        let pc = principal_curvatures(&mesh).unwrap();
        for &(k1, k2) in &pc {
            assert!((k1 - 0.5).abs() < 0.05, "k1 = {k1}");
            assert!((k2 - 0.5).abs() < 0.05, "k2 = {k2}");
        }
    }

    #[test]
    fn off_roundtrip() {
        let mesh = icosphere(1.0, 1).unwrap();
        let mut buf = Vec::new();
        mesh.write_off(&mut buf).unwrap();
        let back = TriMesh::read_off(buf.as_slice()).unwrap();
        assert_eq!(mesh.vertices.len(), back.vertices.len());
        assert_eq!(mesh.faces, back.faces);
    }

    #[test]
    fn self_intersection_detects_overlap() {
        let clean = icosphere(1.0, 2).unwrap();
        assert!(self_intersection(&clean).is_none());
        let other = icosphere(1.0, 2).unwrap();
        let offset = Vector3::new(0.5, 0.0, 0.0);
        let mut vertices = clean.vertices.clone();
        let base = vertices.len() as u32;
        vertices.extend(other.vertices.iter().map(|v| v + offset));
        let mut faces = clean.faces.clone();
        faces.extend(
            other
                .faces
                .iter()
                .map(|f| [f[0] + base, f[1] + base, f[2] + base]),
        );
        let soup = TriMesh { vertices, faces };
        assert!(self_intersection(&soup).is_some());
    }

    #[test]
    fn open_profile_cannot_be_revolved() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let us = vec![0.5; 20];
        let p = crate::profile::graph_to_profile(&xs, &us, 2, GraphEnds::Clamped).unwrap();
        assert!(revolve(&p, 32).is_err());
    }

    #[test]
    fn three_d_profiles_are_rejected() {
        let p = make_sphere(1.0, 3, 100).unwrap();
        assert!(matches!(
            revolve(&p, 32),
            Err(Error::UnsupportedDimension(_))
        ));
    }

    #[test]
    fn pill_revolve_is_watertight() {
        let p = make_pill(4.0, 1.0, 2).unwrap();
        let mesh = revolve(&p, 64).unwrap();
        assert_eq!(mesh.euler_characteristic(), 2);
        mesh.validate().unwrap();
    }
}

//! Triangle meshes in model coordinates: icosphere generation, midpoint
//! refinement, OBJ I/O (frame normals ride along as comment records),
//! combinatorial queries, a spatial hash, triangle-triangle intersection
//! tests and edge-graph shortest paths.

use crate::error::{Error, Result};
use crate::sol3::{metric_eval, Point};
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::io::{BufRead, Write};

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_points(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Undirected edge list (i < j), sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut set = std::collections::BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edges().len() as i64 + self.face_count() as i64
    }

    /// A closed oriented surface has every undirected edge in exactly two
    /// faces, traversed in opposite directions.
    pub fn check_closed(&self) -> Result<()> {
        let mut seen: HashMap<(u32, u32), i32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *seen.entry((a.min(b), a.max(b))).or_insert(0) += if a < b { 1 } else { -1 };
                let c = seen[&(a.min(b), a.max(b))];
                if c.abs() > 1 {
                    return Err(Error::NotClosed(format!("edge ({a},{b}) traversed twice in one direction")));
                }
            }
        }
        for ((a, b), c) in seen {
            if c != 0 {
                return Err(Error::NotClosed(format!("edge ({a},{b}) is not shared by opposite-oriented faces")));
            }
        }
        Ok(())
    }

    /// Sorted neighbour lists.
    pub fn vertex_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![std::collections::BTreeSet::new(); self.vertex_count()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k] as usize, f[(k + 1) % 3]);
                adj[a].insert(b);
                adj[b as usize].insert(f[k]);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<u32>> {
        let mut vf = vec![Vec::new(); self.vertex_count()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v as usize].push(fi as u32);
            }
        }
        vf
    }

    /// Enclosed coordinate volume by the divergence theorem (the Haar
    /// density dx₁dx₂dx₃ is also the Riemannian volume form).
    pub fn enclosed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [p0, p1, p2] = [
                    self.vertices[f[0] as usize].coords(),
                    self.vertices[f[1] as usize].coords(),
                    self.vertices[f[2] as usize].coords(),
                ];
                det3(p0, p1, p2) / 6.0
            })
            .sum()
    }

    /// Volume centroid ∫x dV / V (equivariant under left translations,
    /// which are affine in model coordinates, and under σ, τ).
    pub fn volume_centroid(&self) -> Point {
        let mut v_total = 0.0;
        let mut c = [0.0; 3];
        for f in &self.faces {
            let p0 = self.vertices[f[0] as usize].coords();
            let p1 = self.vertices[f[1] as usize].coords();
            let p2 = self.vertices[f[2] as usize].coords();
            let v = det3(p0, p1, p2) / 6.0;
            v_total += v;
            for k in 0..3 {
                c[k] += v * (p0[k] + p1[k] + p2[k]) / 4.0; // tet centroid with apex at origin
            }
        }
        Point::new(c[0] / v_total, c[1] / v_total, c[2] / v_total)
    }

    /// Riemannian edge lengths (metric at the coordinate midpoint), aligned
    /// with [`TriMesh::edges`].
    pub fn edge_lengths(&self) -> (Vec<(u32, u32)>, Vec<f64>) {
        let edges = self.edges();
        let lens = edges
            .iter()
            .map(|&(a, b)| {
                let (pa, pb) = (self.vertices[a as usize], self.vertices[b as usize]);
                let mid = Point::new(0.5 * (pa.x1 + pb.x1), 0.5 * (pa.x2 + pb.x2), 0.5 * (pa.x3 + pb.x3));
                let d = [pb.x1 - pa.x1, pb.x2 - pa.x2, pb.x3 - pa.x3];
                metric_eval(mid, d, d).sqrt()
            })
            .collect();
        (edges, lens)
    }

    /// 1:4 midpoint refinement (no smoothing; the solver repositions).
    pub fn subdivide_midpoint(&self) -> TriMesh {
        let mut vertices = self.vertices.clone();
        let mut cache: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Point>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (pa, pb) = (vertices[a as usize], vertices[b as usize]);
                vertices.push(Point::new(0.5 * (pa.x1 + pb.x1), 0.5 * (pa.x2 + pb.x2), 0.5 * (pa.x3 + pb.x3)));
                (vertices.len() - 1) as u32
            })
        };
        for f in &self.faces {
            let [a, b, c] = *f;
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            faces.push([a, ab, ca]);
            faces.push([b, bc, ab]);
            faces.push([c, ca, bc]);
            faces.push([ab, bc, ca]);
        }
        TriMesh { vertices, faces }
    }

    /// OBJ export: `v` records in model coordinates; per-vertex frame
    /// normals, when given, as `#fn <idx> <c1> <c2> <c3>` comment records
    /// (standard `vn` would wrongly suggest coordinate-basis normals).
    pub fn save_obj(&self, path: &std::path::Path, frame_normals: Option<&[[f64; 3]]>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# closed triangulated surface in Sol3 model coordinates")?;
        for p in &self.vertices {
            writeln!(out, "v {} {} {}", p.x1, p.x2, p.x3)?;
        }
        if let Some(ns) = frame_normals {
            for (i, n) in ns.iter().enumerate() {
                writeln!(out, "#fn {} {} {} {}", i + 1, n[0], n[1], n[2])?;
            }
        }
        for f in &self.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }

    /// Load an OBJ written by [`TriMesh::save_obj`] (or any plain v/f OBJ).
    /// Returns the mesh and the frame normals if present.
    pub fn load_obj(path: &std::path::Path) -> Result<(TriMesh, Option<Vec<[f64; 3]>>)> {
        let file = std::fs::File::open(path)?;
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut normals: Vec<(usize, [f64; 3])> = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let parse_err = |detail: String| Error::Parse {
                what: path.display().to_string(),
                detail: format!("line {}: {detail}", lineno + 1),
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            match toks[0] {
                "v" => {
                    if toks.len() < 4 {
                        return Err(parse_err("short v record".into()));
                    }
                    let mut c = [0.0; 3];
                    for k in 0..3 {
                        c[k] = toks[k + 1].parse().map_err(|e| parse_err(format!("{e}")))?;
                    }
                    vertices.push(Point::from_coords(c));
                }
                "f" => {
                    if toks.len() < 4 {
                        return Err(parse_err("short f record".into()));
                    }
                    let mut idx = [0u32; 3];
                    for k in 0..3 {
                        let t = toks[k + 1].split('/').next().unwrap();
                        let i: i64 = t.parse().map_err(|e| parse_err(format!("{e}")))?;
                        idx[k] = (i - 1) as u32;
                    }
                    faces.push(idx);
                }
                "#fn" => {
                    if toks.len() >= 5 {
                        let i: usize = toks[1].parse().map_err(|e| parse_err(format!("{e}")))?;
                        let mut n = [0.0; 3];
                        for k in 0..3 {
                            n[k] = toks[k + 2].parse().map_err(|e| parse_err(format!("{e}")))?;
                        }
                        normals.push((i - 1, n));
                    }
                }
                _ => {}
            }
        }
        let frame_normals = if normals.is_empty() {
            None
        } else {
            let mut ns = vec![[0.0; 3]; vertices.len()];
            for (i, n) in normals {
                if i < ns.len() {
                    ns[i] = n;
                }
            }
            Some(ns)
        };
        Ok((TriMesh { vertices, faces }, frame_normals))
    }
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Icosphere with `level` midpoint subdivisions, projected to the Euclidean
/// coordinate sphere of the given radius. 12, 42, 162, 642, 2562, 10242, ...
/// vertices; faces wound so the enclosed volume is positive.
pub fn icosphere(level: usize, radius: f64) -> TriMesh {
    let t = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut vertices: Vec<Point> = raw
        .iter()
        .map(|c| {
            let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            Point::new(c[0] / n, c[1] / n, c[2] / n)
        })
        .collect();
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
    for _ in 0..level {
        let mut cache: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = |a: u32, b: u32, vertices: &mut Vec<Point>| -> u32 {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let (pa, pb) = (vertices[a as usize], vertices[b as usize]);
                    let m = [pa.x1 + pb.x1, pa.x2 + pb.x2, pa.x3 + pb.x3];
                    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                    vertices.push(Point::new(m[0] / n, m[1] / n, m[2] / n));
                    (vertices.len() - 1) as u32
                })
            };
            let [a, b, c] = *f;
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            new_faces.push([a, ab, ca]);
            new_faces.push([b, bc, ab]);
            new_faces.push([c, ca, bc]);
            new_faces.push([ab, bc, ca]);
        }
        faces = new_faces;
    }
    for p in &mut vertices {
        p.x1 *= radius;
        p.x2 *= radius;
        p.x3 *= radius;
    }
    TriMesh { vertices, faces }
}

/// Uniform-grid spatial hash over points.
pub struct SpatialHash {
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl SpatialHash {
    pub fn build(points: &[Point], cell: f64) -> SpatialHash {
        let mut map: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        SpatialHash { cell, map }
    }

    fn key(p: &Point, cell: f64) -> (i64, i64, i64) {
        ((p.x1 / cell).floor() as i64, (p.x2 / cell).floor() as i64, (p.x3 / cell).floor() as i64)
    }

    /// Visit indices in the 27-cell neighbourhood of `p` without
    /// allocating.
    pub fn for_each_near(&self, p: &Point, mut f: impl FnMut(u32)) {
        let (i, j, k) = Self::key(p, self.cell);
        for di in -1..=1 {
            for dj in -1..=1 {
                for dk in -1..=1 {
                    if let Some(v) = self.map.get(&(i + di, j + dj, k + dk)) {
                        for &x in v {
                            f(x);
                        }
                    }
                }
            }
        }
    }

    /// Indices in the 27-cell neighbourhood of `p`.
    pub fn near(&self, p: &Point) -> Vec<u32> {
        let (i, j, k) = Self::key(p, self.cell);
        let mut out = Vec::new();
        for di in -1..=1 {
            for dj in -1..=1 {
                for dk in -1..=1 {
                    if let Some(v) = self.map.get(&(i + di, j + dj, k + dk)) {
                        out.extend_from_slice(v);
                    }
                }
            }
        }
        out
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Segment-triangle intersection test (strict interior crossings).
fn segment_hits_triangle(p: [f64; 3], q: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> bool {
    let eps = 1e-12;
    let dir = sub(q, p);
    let e1 = sub(b, a);
    let e2 = sub(c, a);
    let h = cross(dir, e2);
    let det = dot(e1, h);
    if det.abs() < eps {
        return false;
    }
    let inv = 1.0 / det;
    let s = sub(p, a);
    let u = dot(s, h) * inv;
    if u < eps || u > 1.0 - eps {
        return false;
    }
    let qv = cross(s, e1);
    let v = dot(dir, qv) * inv;
    if v < eps || u + v > 1.0 - eps {
        return false;
    }
    let t = dot(e2, qv) * inv;
    t > eps && t < 1.0 - eps
}

/// Do two triangles intersect (excluding shared-vertex contact)?
pub fn tri_tri_intersect(t1: [[f64; 3]; 3], t2: [[f64; 3]; 3]) -> bool {
    for k in 0..3 {
        let (p, q) = (t1[k], t1[(k + 1) % 3]);
        if segment_hits_triangle(p, q, t2[0], t2[1], t2[2]) {
            return true;
        }
        let (p, q) = (t2[k], t2[(k + 1) % 3]);
        if segment_hits_triangle(p, q, t1[0], t1[1], t1[2]) {
            return true;
        }
    }
    false
}

/// Count of intersecting non-adjacent face pairs (0 for embedded meshes).
/// Coordinate-space test; intersection is metric-independent.
pub fn self_intersections(mesh: &TriMesh) -> usize {
    let nf = mesh.face_count();
    let mut max_ext = 0.0f64;
    let centroids: Vec<Point> = (0..nf)
        .map(|f| {
            let [p0, p1, p2] = mesh.face_points(f);
            for (a, b) in [(p0, p1), (p1, p2), (p2, p0)] {
                let d = sub(b.coords(), a.coords());
                max_ext = max_ext.max(dot(d, d).sqrt());
            }
            Point::new(
                (p0.x1 + p1.x1 + p2.x1) / 3.0,
                (p0.x2 + p1.x2 + p2.x2) / 3.0,
                (p0.x3 + p1.x3 + p2.x3) / 3.0,
            )
        })
        .collect();
    let hash = SpatialHash::build(&centroids, (2.0 * max_ext).max(1e-12));
    let counts = crate::par::map_indexed(nf, |f| {
        let mut hits = 0usize;
        let fverts = mesh.faces[f];
        let tri_f: [[f64; 3]; 3] = {
            let [a, b, c] = mesh.face_points(f);
            [a.coords(), b.coords(), c.coords()]
        };
        for g in hash.near(&centroids[f]) {
            let g = g as usize;
            if g <= f {
                continue;
            }
            let gverts = mesh.faces[g];
            if fverts.iter().any(|v| gverts.contains(v)) {
                continue; // adjacent faces share boundary, not interior
            }
            let tri_g: [[f64; 3]; 3] = {
                let [a, b, c] = mesh.face_points(g);
                [a.coords(), b.coords(), c.coords()]
            };
            if tri_tri_intersect(tri_f, tri_g) {
                hits += 1;
            }
        }
        hits
    });
    counts.iter().sum()
}

/// Dijkstra over the edge graph with the given per-edge lengths.
pub fn dijkstra(n: usize, adjacency: &[Vec<(u32, f64)>], source: u32) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n];
    dist[source as usize] = 0.0;
    let mut heap: BinaryHeap<(std::cmp::Reverse<ordered::F64>, u32)> = BinaryHeap::new();
    heap.push((std::cmp::Reverse(ordered::F64(0.0)), source));
    while let Some((std::cmp::Reverse(ordered::F64(d)), v)) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        for &(w, len) in &adjacency[v as usize] {
            let nd = d + len;
            if nd < dist[w as usize] {
                dist[w as usize] = nd;
                heap.push((std::cmp::Reverse(ordered::F64(nd)), w));
            }
        }
    }
    dist
}

mod ordered {
    /// Total order for finite distances in the Dijkstra heap.
    #[derive(PartialEq, PartialOrd)]
    pub struct F64(pub f64);
    impl Eq for F64 {}
    impl Ord for F64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.partial_cmp(other).unwrap_or(std::cmp::Ordering::Equal)
        }
    }
}

/// Edge-graph diameter under Riemannian edge lengths, by iterated
/// farthest-point sweeps (each sweep only improves the lower estimate; on
/// sphere-like graphs a handful of sweeps reaches the diameter).
pub fn graph_diameter(mesh: &TriMesh) -> f64 {
    let n = mesh.vertex_count();
    let (edges, lens) = mesh.edge_lengths();
    let mut adjacency = vec![Vec::new(); n];
    for (e, &(a, b)) in edges.iter().enumerate() {
        adjacency[a as usize].push((b, lens[e]));
        adjacency[b as usize].push((a, lens[e]));
    }
    let mut best = 0.0f64;
    let mut src = 0u32;
    let mut visited = vec![src];
    for _ in 0..48 {
        let dist = dijkstra(n, &adjacency, src);
        let (far, ecc) = dist
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, d)| (i as u32, *d))
            .unwrap();
        if ecc <= best + 1e-12 {
            break;
        }
        best = ecc;
        if visited.contains(&far) {
            break;
        }
        visited.push(far);
        src = far;
    }
    best
}

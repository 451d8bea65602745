//! Discrete models of the circle, flat torus, and unit sphere.
//!
//! Each builder produces a [`DiscretizedManifold`]: a weighted graph with
//! vertex volumes (lumped mass), edge conductances (stiffness weights),
//! perimeter weights (dual-facet measure for boundary area), frustration
//! weights (edge volume / edge length), oriented faces, and explicit
//! homology generators. All metric data needed downstream lives here.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("grid needs at least {min} vertices per direction, got {got}")]
    TooFewVertices { min: usize, got: usize },
    #[error("icosphere subdivisions must lie in [2, 7], got {0}")]
    SubdivisionOutOfRange(usize),
}

/// Oriented edge with all per-edge weights.
///
/// The orientation `endpoints.0 -> endpoints.1` is fixed at construction;
/// magnetic phases attach to this orientation.
#[derive(Debug, Clone)]
pub struct Edge {
    pub endpoints: (usize, usize),
    /// Intrinsic length of the edge.
    pub length: f64,
    /// Stiffness weight w_e: the quadratic form is sum_e w_e |f_u - e^{i theta} f_v|^2.
    pub conductance: f64,
    /// Measure of the dual facet; area(boundary) of a cut sums these.
    pub perimeter_weight: f64,
    /// Edge-associated volume divided by edge length; weights frustration defects.
    pub frustration_weight: f64,
}

/// Oriented face: a closed cycle of edges with signs (true = traversed forward).
#[derive(Debug, Clone)]
pub struct Face {
    pub edges: Vec<(usize, bool)>,
    pub area: f64,
}

/// Which builder produced the mesh, with its structured-grid parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelStructure {
    Circle { n: usize, length: f64 },
    Torus { n1: usize, n2: usize, l1: f64, l2: f64 },
    Sphere { subdivisions: usize },
}

/// One entry of a vertex adjacency list.
#[derive(Debug, Clone, Copy)]
pub struct Incidence {
    pub edge: usize,
    pub neighbor: usize,
    /// True when this vertex is the tail of the stored edge orientation.
    pub forward: bool,
}

#[derive(Debug, Clone)]
pub struct DiscretizedManifold {
    pub dimension: usize,
    pub vertices: Vec<[f64; 3]>,
    pub vertex_volume: Vec<f64>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    /// Oriented closed edge paths generating H_1 (circle: 1, torus: 2, sphere: 0).
    pub homology_generators: Vec<Vec<(usize, bool)>>,
    /// Analytic Ricci lower bound of the continuum model.
    pub ricci_lower_bound: f64,
    pub structure: ModelStructure,
    adjacency: Vec<Vec<Incidence>>,
}

impl DiscretizedManifold {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.vertex_volume.iter().sum()
    }

    /// Maximum edge length; the resolution parameter h of refinement studies.
    pub fn max_spacing(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    pub fn adjacency(&self, vertex: usize) -> &[Incidence] {
        &self.adjacency[vertex]
    }

    /// Identity token checked by everything that pairs a potential with a mesh.
    pub fn fingerprint(&self) -> u64 {
        // Cheap structural hash: kind tag, counts, and the builder parameters.
        let (tag, a, b, c, d) = match self.structure {
            ModelStructure::Circle { n, length } => (1u64, n as u64, 0, length.to_bits(), 0),
            ModelStructure::Torus { n1, n2, l1, l2 } => {
                (2, n1 as u64, n2 as u64, l1.to_bits(), l2.to_bits())
            }
            ModelStructure::Sphere { subdivisions } => (3, subdivisions as u64, 0, 0, 0),
        };
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for x in [tag, a, b, c, d, self.vertices.len() as u64, self.edges.len() as u64] {
            h ^= x;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }

    pub fn descriptor(&self) -> String {
        match self.structure {
            ModelStructure::Circle { n, length } => format!("circle L={length} n={n}"),
            ModelStructure::Torus { n1, n2, l1, l2 } => {
                format!("torus L1={l1} L2={l2} n1={n1} n2={n2}")
            }
            ModelStructure::Sphere { subdivisions } => format!("sphere sub={subdivisions}"),
        }
    }

    /// Write the mesh in OFF text format (vertices plus faces as vertex loops).
    pub fn export_off(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), self.faces.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
        }
        for f in &self.faces {
            let loop_verts = self.face_vertex_loop(f);
            write!(w, "{}", loop_verts.len())?;
            for v in loop_verts {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Vertices of a face boundary in traversal order.
    pub fn face_vertex_loop(&self, face: &Face) -> Vec<usize> {
        face.edges
            .iter()
            .map(|&(e, fwd)| {
                let (u, v) = self.edges[e].endpoints;
                if fwd {
                    u
                } else {
                    v
                }
            })
            .collect()
    }

    fn build_adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<Incidence>> {
        let mut adj = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            let (u, v) = e.endpoints;
            adj[u].push(Incidence { edge: i, neighbor: v, forward: true });
            adj[v].push(Incidence { edge: i, neighbor: u, forward: false });
        }
        for list in &mut adj {
            list.sort_by_key(|inc| (inc.neighbor, inc.edge));
        }
        adj
    }
}

/// Uniform cycle graph on the circle of length `l`.
///
/// h = l/n, mass h, conductance 1/h, perimeter weight 1 (a point has
/// 0-dimensional measure 1), frustration weight 1.
pub fn circle_grid(l: f64, n_verts: usize) -> Result<DiscretizedManifold, GeometryError> {
    if !(l > 0.0) {
        return Err(GeometryError::NonPositiveLength(l));
    }
    if n_verts < 8 {
        return Err(GeometryError::TooFewVertices { min: 8, got: n_verts });
    }
    let h = l / n_verts as f64;
    let radius = l / (2.0 * std::f64::consts::PI);
    let vertices: Vec<[f64; 3]> = (0..n_verts)
        .map(|u| {
            let phi = 2.0 * std::f64::consts::PI * u as f64 / n_verts as f64;
            [radius * phi.cos(), radius * phi.sin(), 0.0]
        })
        .collect();
    let edges: Vec<Edge> = (0..n_verts)
        .map(|u| Edge {
            endpoints: (u, (u + 1) % n_verts),
            length: h,
            conductance: 1.0 / h,
            perimeter_weight: 1.0,
            frustration_weight: 1.0,
        })
        .collect();
    let generator: Vec<(usize, bool)> = (0..n_verts).map(|e| (e, true)).collect();
    let adjacency = DiscretizedManifold::build_adjacency(n_verts, &edges);
    Ok(DiscretizedManifold {
        dimension: 1,
        vertices,
        vertex_volume: vec![h; n_verts],
        edges,
        faces: Vec::new(),
        homology_generators: vec![generator],
        ricci_lower_bound: 0.0,
        structure: ModelStructure::Circle { n: n_verts, length: l },
        adjacency,
    })
}

/// Periodic n1 x n2 rectangular grid on the flat torus [0,L1) x [0,L2).
///
/// Vertex (i, j) has index j*n1 + i. Edges come in two blocks: all x-edges
/// first (index j*n1 + i for (i,j)->(i+1,j)), then all y-edges.
pub fn torus_grid(
    l1: f64,
    l2: f64,
    n1: usize,
    n2: usize,
) -> Result<DiscretizedManifold, GeometryError> {
    if !(l1 > 0.0) {
        return Err(GeometryError::NonPositiveLength(l1));
    }
    if !(l2 > 0.0) {
        return Err(GeometryError::NonPositiveLength(l2));
    }
    if n1 < 8 {
        return Err(GeometryError::TooFewVertices { min: 8, got: n1 });
    }
    if n2 < 8 {
        return Err(GeometryError::TooFewVertices { min: 8, got: n2 });
    }
    let h1 = l1 / n1 as f64;
    let h2 = l2 / n2 as f64;
    let nv = n1 * n2;
    let idx = |i: usize, j: usize| (j % n2) * n1 + (i % n1);

    let mut vertices = Vec::with_capacity(nv);
    for j in 0..n2 {
        for i in 0..n1 {
            vertices.push([i as f64 * h1, j as f64 * h2, 0.0]);
        }
    }

    // x-edges 0..nv, then y-edges nv..2nv, both in (i, j) row-major order.
    let mut edges = Vec::with_capacity(2 * nv);
    for j in 0..n2 {
        for i in 0..n1 {
            edges.push(Edge {
                endpoints: (idx(i, j), idx(i + 1, j)),
                length: h1,
                conductance: h2 / h1,
                perimeter_weight: h2,
                frustration_weight: h2,
            });
        }
    }
    for j in 0..n2 {
        for i in 0..n1 {
            edges.push(Edge {
                endpoints: (idx(i, j), idx(i, j + 1)),
                length: h2,
                conductance: h1 / h2,
                perimeter_weight: h1,
                frustration_weight: h1,
            });
        }
    }
    let x_edge = |i: usize, j: usize| (j % n2) * n1 + (i % n1);
    let y_edge = |i: usize, j: usize| nv + (j % n2) * n1 + (i % n1);

    // Square (i,j) traversed counterclockwise in the (x, y) chart.
    let mut faces = Vec::with_capacity(nv);
    for j in 0..n2 {
        for i in 0..n1 {
            faces.push(Face {
                edges: vec![
                    (x_edge(i, j), true),
                    (y_edge(i + 1, j), true),
                    (x_edge(i, j + 1), false),
                    (y_edge(i, j), false),
                ],
                area: h1 * h2,
            });
        }
    }

    let gen_x: Vec<(usize, bool)> = (0..n1).map(|i| (x_edge(i, 0), true)).collect();
    let gen_y: Vec<(usize, bool)> = (0..n2).map(|j| (y_edge(0, j), true)).collect();
    let adjacency = DiscretizedManifold::build_adjacency(nv, &edges);
    Ok(DiscretizedManifold {
        dimension: 2,
        vertices,
        vertex_volume: vec![h1 * h2; nv],
        edges,
        faces,
        homology_generators: vec![gen_x, gen_y],
        ricci_lower_bound: 0.0,
        structure: ModelStructure::Torus { n1, n2, l1, l2 },
        adjacency,
    })
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Unit-sphere triangle mesh by repeated icosahedron subdivision.
///
/// Cotangent conductances (clamped below at 1e-8), barycentric-lumped vertex
/// areas, chord lengths, circumcentric dual-edge perimeter weights (clamped
/// at 0), and per-edge frustration weights (one third of the incident
/// triangle areas over the chord length).
pub fn icosphere(subdivisions: usize) -> Result<DiscretizedManifold, GeometryError> {
    if !(2..=7).contains(&subdivisions) {
        return Err(GeometryError::SubdivisionOutOfRange(subdivisions));
    }
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize)
    .collect();
    // Consistently outward-oriented icosahedron faces.
    let mut tris: Vec<[usize; 3]> = vec![
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
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        for t in &tris {
            let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    let m = normalize([
                        (verts[a][0] + verts[b][0]) / 2.0,
                        (verts[a][1] + verts[b][1]) / 2.0,
                        (verts[a][2] + verts[b][2]) / 2.0,
                    ]);
                    verts.push(m);
                    verts.len() - 1
                })
            };
            let [a, b, c] = *t;
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }

    let nv = vertices.len();
    // Edge list in face-visit order so construction is deterministic.
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut endpoints: Vec<(usize, usize)> = Vec::new();
    for t in &tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            edge_index.entry(key).or_insert_with(|| {
                endpoints.push(key);
                endpoints.len() - 1
            });
        }
    }
    let ne = endpoints.len();

    let tri_area = |t: &[usize; 3]| -> f64 {
        let e1 = sub3(vertices[t[1]], vertices[t[0]]);
        let e2 = sub3(vertices[t[2]], vertices[t[0]]);
        0.5 * norm3(cross3(e1, e2))
    };

    let mut vertex_volume = vec![0.0; nv];
    let mut cot_sum = vec![0.0; ne];
    let mut area_sum = vec![0.0; ne];
    for t in &tris {
        let area = tri_area(t);
        for &v in t {
            vertex_volume[v] += area / 3.0;
        }
        for k in 0..3 {
            let (a, b, opp) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let e = edge_index[&(a.min(b), a.max(b))];
            let u = sub3(vertices[a], vertices[opp]);
            let w = sub3(vertices[b], vertices[opp]);
            let cot = dot3(u, w) / norm3(cross3(u, w));
            cot_sum[e] += cot;
            area_sum[e] += area;
        }
    }

    let edges: Vec<Edge> = (0..ne)
        .map(|e| {
            let (u, v) = endpoints[e];
            let len = norm3(sub3(vertices[v], vertices[u]));
            Edge {
                endpoints: (u, v),
                length: len,
                conductance: (cot_sum[e] / 2.0).max(1e-8),
                perimeter_weight: (len * cot_sum[e] / 2.0).max(0.0),
                frustration_weight: area_sum[e] / (3.0 * len),
            }
        })
        .collect();

    let faces: Vec<Face> = tris
        .iter()
        .map(|t| {
            let edge_cycle = (0..3)
                .map(|k| {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    let e = edge_index[&(a.min(b), a.max(b))];
                    (e, edges[e].endpoints == (a, b))
                })
                .collect();
            Face { edges: edge_cycle, area: tri_area(t) }
        })
        .collect();

    let adjacency = DiscretizedManifold::build_adjacency(nv, &edges);
    Ok(DiscretizedManifold {
        dimension: 2,
        vertices,
        vertex_volume,
        edges,
        faces,
        homology_generators: Vec::new(),
        ricci_lower_bound: 1.0,
        structure: ModelStructure::Sphere { subdivisions },
        adjacency,
    })
}

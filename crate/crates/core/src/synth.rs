//! Synthetic meshes used by benchmarks, tests and the CLI demos.

use nalgebra::{Rotation3, Unit};
use rand::Rng;

use crate::mesh::{Mesh, Vec3};

fn grid_faces(nx: usize, ny: usize) -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let b = a + 1;
            let c = a + nx;
            let d = c + 1;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    faces
}

/// Planar `nx` × `ny` vertex grid in the z = 0 plane, split along one
/// diagonal direction. Vertex `j * nx + i` sits at `(i, j) * spacing`.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> Mesh {
    assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 vertices");
    let vertices = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0)))
        .collect();
    Mesh::new(vertices, grid_faces(nx, ny)).expect("grid topology is valid")
}

/// Grid over `[0, width] × [0, height]` lifted by `height_fn(x, y)`.
pub fn height_field(
    nx: usize,
    ny: usize,
    width: f64,
    height: f64,
    height_fn: impl Fn(f64, f64) -> f64,
) -> Mesh {
    assert!(
        nx >= 2 && ny >= 2,
        "height field needs at least 2x2 vertices"
    );
    let dx = width / (nx - 1) as f64;
    let dy = height / (ny - 1) as f64;
    let vertices = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i as f64 * dx, j as f64 * dy)))
        .map(|(x, y)| Vec3::new(x, y, height_fn(x, y)))
        .collect();
    Mesh::new(vertices, grid_faces(nx, ny)).expect("grid topology is valid")
}

/// A smooth face-like bump profile over the unit square: a central ridge
/// and two shallow depressions.
pub fn face_profile(x: f64, y: f64) -> f64 {
    let g = |cx: f64, cy: f64, sx: f64, sy: f64, a: f64| {
        a * (-((x - cx).powi(2) / (2.0 * sx * sx) + (y - cy).powi(2) / (2.0 * sy * sy))).exp()
    };
    g(0.5, 0.45, 0.08, 0.18, 0.18) - g(0.3, 0.65, 0.1, 0.07, 0.05) - g(0.7, 0.65, 0.1, 0.07, 0.05)
        + 0.1 * (-(x - 0.5).powi(2) * 4.0).exp()
}

pub fn tetrahedron() -> Mesh {
    Mesh::new(
        vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
    .expect("tetrahedron topology is valid")
}

/// Unit icosphere obtained by `subdivisions` rounds of 4-to-1 splitting.
pub fn icosphere(subdivisions: usize) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
        let mut midpoint = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                vertices.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("icosphere topology is valid")
}

/// Random rotation drawn from a uniformly random axis and angle.
pub fn random_rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    let axis = loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break Unit::new_normalize(v);
        }
    };
    Rotation3::from_axis_angle(
        &axis,
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}

pub fn random_vector(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// Applies `p -> rotation * p + translation` to every vertex.
pub fn transformed(mesh: &Mesh, rotation: &Rotation3<f64>, translation: &Vec3) -> Mesh {
    let vertices = mesh
        .vertices()
        .iter()
        .map(|p| rotation * p + translation)
        .collect();
    mesh.with_vertices(vertices).expect("same vertex count")
}

pub fn scaled(mesh: &Mesh, factor: f64) -> Mesh {
    let vertices = mesh.vertices().iter().map(|p| p * factor).collect();
    mesh.with_vertices(vertices).expect("same vertex count")
}

/// A small grid with every vertex jittered in 3D; edges stay well away from
/// zero length. Vertex count is `nx * ny`.
pub fn jittered_grid(rng: &mut impl Rng, nx: usize, ny: usize, jitter: f64) -> Mesh {
    let base = grid(nx, ny, 1.0);
    jitter_vertices(rng, &base, jitter)
}

pub fn jitter_vertices(rng: &mut impl Rng, mesh: &Mesh, jitter: f64) -> Mesh {
    let vertices = mesh
        .vertices()
        .iter()
        .map(|p| p + random_vector(rng, jitter))
        .collect();
    mesh.with_vertices(vertices).expect("same vertex count")
}

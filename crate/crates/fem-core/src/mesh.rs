//! Structured interval and triangle meshes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned box. In 1D only the first coordinate is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub const UNIT: Rect = Rect { lo: [0.0, 0.0], hi: [1.0, 1.0] };

    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self { lo, hi }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self { lo: [a, 0.0], hi: [b, 0.0] }
    }

    pub fn contains(&self, p: [f64; 2], dimension: usize) -> bool {
        (0..dimension).all(|d| p[d] >= self.lo[d] && p[d] <= self.hi[d])
    }
}

/// Boundary segment labels. The 2D labels follow the unit-square layout of the
/// guiding model: an inflow window on the upper left wall, an outflow window on
/// the lower right wall, the floor, the ceiling, and the remaining walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryLabel {
    Gamma1,
    Gamma2,
    Bottom,
    Top,
    Wall,
    Left,
    Right,
}

impl BoundaryLabel {
    pub const ALL_2D: [BoundaryLabel; 5] =
        [BoundaryLabel::Gamma1, BoundaryLabel::Gamma2, BoundaryLabel::Bottom, BoundaryLabel::Top, BoundaryLabel::Wall];
}

/// A boundary facet: an edge `(a, b)` in 2D, or the single vertex `a == b` in 1D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet {
    pub a: usize,
    pub b: usize,
    pub label: BoundaryLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dimension: usize,
    bounds: Rect,
    vertices: Vec<[f64; 2]>,
    elements: Vec<Vec<usize>>,
    boundary: Vec<BoundaryFacet>,
    h: f64,
    shape: [usize; 2],
}

impl Mesh {
    /// Uniform mesh with `resolution` vertices per axis.
    pub fn structured(dimension: usize, resolution: usize, bounds: Rect) -> Result<Self> {
        match dimension {
            1 => Self::interval(resolution, bounds.lo[0], bounds.hi[0]),
            2 => Self::rectangle(resolution, resolution, bounds),
            _ => Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {dimension}"))),
        }
    }

    pub fn interval(resolution: usize, a: f64, b: f64) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!("resolution must be at least 2, got {resolution}")));
        }
        if !(b > a) {
            return Err(Error::InvalidArgument("empty interval".into()));
        }
        let dx = (b - a) / (resolution - 1) as f64;
        let vertices = (0..resolution).map(|i| [a + dx * i as f64, 0.0]).collect();
        let elements = (0..resolution - 1).map(|i| vec![i, i + 1]).collect();
        let boundary = vec![
            BoundaryFacet { a: 0, b: 0, label: BoundaryLabel::Left },
            BoundaryFacet { a: resolution - 1, b: resolution - 1, label: BoundaryLabel::Right },
        ];
        Ok(Self { dimension: 1, bounds: Rect::interval(a, b), vertices, elements, boundary, h: dx, shape: [resolution, 1] })
    }

    /// Rectangle with `nx × ny` vertices, each cell split along its rising diagonal.
    pub fn rectangle(nx: usize, ny: usize, bounds: Rect) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(format!("resolution must be at least 2 per axis, got {nx}x{ny}")));
        }
        if !(bounds.hi[0] > bounds.lo[0] && bounds.hi[1] > bounds.lo[1]) {
            return Err(Error::InvalidArgument("empty rectangle".into()));
        }
        let dx = (bounds.hi[0] - bounds.lo[0]) / (nx - 1) as f64;
        let dy = (bounds.hi[1] - bounds.lo[1]) / (ny - 1) as f64;
        let id = |i: usize, j: usize| j * nx + i;
        let mut vertices = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                vertices.push([bounds.lo[0] + dx * i as f64, bounds.lo[1] + dy * j as f64]);
            }
        }
        let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                elements.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let label = |s: f64, r: f64| -> BoundaryLabel {
            // (s, r) are relative coordinates of the edge midpoint.
            let tol = 1e-12;
            if r < tol {
                BoundaryLabel::Bottom
            } else if r > 1.0 - tol {
                BoundaryLabel::Top
            } else if s < tol && r > 0.75 {
                BoundaryLabel::Gamma1
            } else if s > 1.0 - tol && r < 0.25 {
                BoundaryLabel::Gamma2
            } else {
                BoundaryLabel::Wall
            }
        };
        let rel = |v: usize, w: usize| {
            let (i0, j0, i1, j1) = (v % nx, v / nx, w % nx, w / nx);
            ((i0 + i1) as f64 / (2.0 * (nx - 1) as f64), (j0 + j1) as f64 / (2.0 * (ny - 1) as f64))
        };
        let mut boundary = Vec::new();
        let mut push = |a: usize, b: usize| {
            let (s, r) = rel(a, b);
            boundary.push(BoundaryFacet { a, b, label: label(s, r) });
        };
        for i in 0..nx - 1 {
            push(id(i, 0), id(i + 1, 0));
        }
        for j in 0..ny - 1 {
            push(id(nx - 1, j), id(nx - 1, j + 1));
        }
        for i in (0..nx - 1).rev() {
            push(id(i + 1, ny - 1), id(i, ny - 1));
        }
        for j in (0..ny - 1).rev() {
            push(id(0, j + 1), id(0, j));
        }
        let h = (dx * dx + dy * dy).sqrt();
        Ok(Self { dimension: 2, bounds, vertices, elements, boundary, h, shape: [nx, ny] })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn boundary(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Vertices per axis.
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Length (1D) or area (2D) of element `e`.
    pub fn element_measure(&self, e: usize) -> f64 {
        let v = &self.elements[e];
        let p = |k: usize| self.vertices[v[k]];
        if self.dimension == 1 {
            (p(1)[0] - p(0)[0]).abs()
        } else {
            let (a, b, c) = (p(0), p(1), p(2));
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
        }
    }

    pub fn facet_measure(&self, f: &BoundaryFacet) -> f64 {
        if self.dimension == 1 {
            1.0
        } else {
            let (a, b) = (self.vertices[f.a], self.vertices[f.b]);
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
        }
    }

    pub fn domain_measure(&self) -> f64 {
        let b = self.bounds;
        if self.dimension == 1 {
            b.hi[0] - b.lo[0]
        } else {
            (b.hi[0] - b.lo[0]) * (b.hi[1] - b.lo[1])
        }
    }

    /// Assigns every boundary vertex exactly one label: the first label, in
    /// declaration order, among its incident boundary facets.
    pub fn vertex_labels(&self) -> Vec<Option<BoundaryLabel>> {
        let mut labels: Vec<Option<BoundaryLabel>> = vec![None; self.vertices.len()];
        for f in &self.boundary {
            for v in [f.a, f.b] {
                labels[v] = Some(match labels[v] {
                    Some(l) => l.min(f.label),
                    None => f.label,
                });
            }
        }
        labels
    }

    /// Number of distinct element edges (2D) or elements (1D).
    pub fn num_edges(&self) -> usize {
        if self.dimension == 1 {
            return self.elements.len();
        }
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(3 * self.elements.len());
        for el in &self.elements {
            for k in 0..3 {
                let (a, b) = (el[k], el[(k + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_with_three_points() {
        let m = Mesh::structured(1, 3, Rect::interval(0.0, 1.0)).unwrap();
        let xs: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(m.elements().len(), 2);
    }

    #[test]
    fn three_by_three_square() {
        let m = Mesh::structured(2, 3, Rect::UNIT).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.elements().len(), 8);
        let area: f64 = (0..8).map(|e| m.element_measure(e)).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn low_resolution_is_rejected() {
        assert!(matches!(Mesh::structured(2, 1, Rect::UNIT), Err(Error::InvalidArgument(_))));
        assert!(matches!(Mesh::structured(1, 0, Rect::UNIT), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn windows_sit_on_the_expected_walls() {
        let m = Mesh::structured(2, 5, Rect::UNIT).unwrap();
        for f in m.boundary() {
            let (a, b) = (m.vertices()[f.a], m.vertices()[f.b]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            match f.label {
                BoundaryLabel::Gamma1 => assert!(mid[0] == 0.0 && mid[1] >= 0.75),
                BoundaryLabel::Gamma2 => assert!(mid[0] == 1.0 && mid[1] <= 0.25),
                BoundaryLabel::Bottom => assert_eq!(mid[1], 0.0),
                BoundaryLabel::Top => assert_eq!(mid[1], 1.0),
                BoundaryLabel::Wall => assert!(mid[0] == 0.0 || mid[0] == 1.0),
                _ => unreachable!(),
            }
        }
        let g1: f64 = m.boundary().iter().filter(|f| f.label == BoundaryLabel::Gamma1).map(|f| m.facet_measure(f)).sum();
        assert!((g1 - 0.25).abs() < 1e-14);
    }
}

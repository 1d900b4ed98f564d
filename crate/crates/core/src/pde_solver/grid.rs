use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{DomainLayout, OuterDomain, Region, Vec2};
use crate::weight::PiecewiseCoefficient;

/// Bisection steps used to locate the interface on a grid segment.
const CROSSING_BISECTIONS: usize = 60;

/// A node of the Dirichlet boundary `Γ` (corners excluded) with the data
/// needed for one-sided normal differences and arc-length quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub index: usize,
    /// Index of the first and second node inward along the normal.
    pub inward: [usize; 2],
    pub point: Vec2,
    pub normal: Vec2,
    pub weight: f64,
}

/// Uniform node grid on a rectangular `Ω` with the coefficient `a` resolved
/// at cell faces.
///
/// Nodes are `(i, j)` with `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`, stored row-major in `j`.
/// The face coefficient between two nodes is the harmonic mean of `a₁`, `a₂`
/// weighted by the fraction of the segment lying in each subdomain.
#[derive(Debug, Clone)]
pub struct Grid2D {
    layout: DomainLayout,
    coeff: PiecewiseCoefficient,
    nx: usize,
    ny: usize,
    h: f64,
    origin: Vec2,
    region: Vec<Region>,
    /// Face between `(i, j)` and `(i + 1, j)`, indexed `j * nx + i`.
    face_x: Vec<f64>,
    /// Face between `(i, j)` and `(i, j + 1)`, indexed `j * (nx + 1) + i`.
    face_y: Vec<f64>,
    boundary: Vec<BoundaryNode>,
}

impl Grid2D {
    /// Builds a grid with `nx` cells along x; the y count follows from the
    /// aspect ratio, which must give square cells.
    pub fn new(layout: &DomainLayout, coeff: PiecewiseCoefficient, nx: usize) -> Result<Self> {
        let OuterDomain::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } = layout.outer
        else {
            return Err(Error::Geometry("the grid needs a rectangular outer domain".into()));
        };
        if nx < 4 {
            return Err(Error::InvalidInput(format!("need at least 4 cells, got {nx}")));
        }
        let h = (x_max - x_min) / nx as f64;
        let ny_f = (y_max - y_min) / h;
        let ny = ny_f.round() as usize;
        if ny < 4 || (ny_f - ny as f64).abs() > 1e-8 {
            return Err(Error::Geometry(format!(
                "side lengths do not give square cells at nx = {nx} (ny = {ny_f})"
            )));
        }
        let origin = Vec2::new(x_min, y_min);
        let node = |i: usize, j: usize| origin + Vec2::new(i as f64 * h, j as f64 * h);

        let mut region = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                region.push(layout.region(node(i, j)));
            }
        }
        let reg = |i: usize, j: usize| region[j * (nx + 1) + i];

        let face = |p: Vec2, rp: Region, q: Vec2, rq: Region| -> f64 {
            if rp == rq {
                return coeff.value(rp);
            }
            let s = crossing_fraction(layout, p, q, rp);
            1.0 / (s / coeff.value(rp) + (1.0 - s) / coeff.value(rq))
        };
        let mut face_x = Vec::with_capacity(nx * (ny + 1));
        for j in 0..=ny {
            for i in 0..nx {
                face_x.push(face(node(i, j), reg(i, j), node(i + 1, j), reg(i + 1, j)));
            }
        }
        let mut face_y = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            for i in 0..=nx {
                face_y.push(face(node(i, j), reg(i, j), node(i, j + 1), reg(i, j + 1)));
            }
        }

        let boundary = boundary_nodes(nx, ny, h, origin);
        Ok(Self {
            layout: layout.clone(),
            coeff,
            nx,
            ny,
            h,
            origin,
            region,
            face_x,
            face_y,
            boundary,
        })
    }

    pub fn layout(&self) -> &DomainLayout {
        &self.layout
    }

    pub fn coeff(&self) -> PiecewiseCoefficient {
        self.coeff
    }

    /// Cell counts `(nx, ny)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % (self.nx + 1), k / (self.nx + 1))
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn point(&self, k: usize) -> Vec2 {
        let (i, j) = self.ij(k);
        self.node(i, j)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    pub fn region(&self, k: usize) -> Region {
        self.region[k]
    }

    /// `a` at node `k`.
    pub fn a_node(&self, k: usize) -> f64 {
        self.coeff.value(self.region[k])
    }

    /// Face coefficient between `(i, j)` and `(i + 1, j)`.
    pub fn face_x(&self, i: usize, j: usize) -> f64 {
        self.face_x[j * self.nx + i]
    }

    /// Face coefficient between `(i, j)` and `(i, j + 1)`.
    pub fn face_y(&self, i: usize, j: usize) -> f64 {
        self.face_y[j * (self.nx + 1) + i]
    }

    /// Number of interior (unknown) nodes.
    pub fn n_interior(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    /// Position of node `(i, j)` among the interior unknowns.
    pub fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        if self.is_boundary(i, j) {
            None
        } else {
            Some((j - 1) * (self.nx - 1) + (i - 1))
        }
    }

    /// Iterator over `(node index, interior index)` pairs.
    pub fn interior(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.ny).flat_map(move |j| {
            (1..self.nx).map(move |i| (self.index(i, j), (j - 1) * (self.nx - 1) + (i - 1)))
        })
    }

    /// Non-corner boundary nodes, counter-clockwise from the bottom side.
    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    /// Area weight of one node in discrete `L²(Ω)` sums.
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn sample<T>(&self, f: impl Fn(Vec2) -> T) -> Vec<T> {
        (0..self.n_nodes()).map(|k| f(self.point(k))).collect()
    }

    /// `div_h(a ∇_h y) + p·y` at interior nodes; boundary entries are zero.
    pub fn apply_operator(&self, y: &[Complex64], p: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.n_nodes()];
        let inv_h2 = 1.0 / (self.h * self.h);
        for j in 1..self.ny {
            for i in 1..self.nx {
                let k = self.index(i, j);
                let c = y[k];
                let flux = self.face_x(i, j) * (y[k + 1] - c) - self.face_x(i - 1, j) * (c - y[k - 1])
                    + self.face_y(i, j) * (y[k + self.nx + 1] - c)
                    - self.face_y(i, j - 1) * (c - y[k - self.nx - 1]);
                out[k] = flux * inv_h2 + c * p[k];
            }
        }
        out
    }

    /// Discrete `L²(Ω)` norm over interior nodes.
    pub fn l2_norm(&self, y: &[Complex64]) -> f64 {
        (self.interior().map(|(k, _)| y[k].norm_sqr()).sum::<f64>() * self.cell_area()).sqrt()
    }

    /// Discrete `L²(Ω)` norm of a real field over interior nodes.
    pub fn l2_norm_real(&self, f: &[f64]) -> f64 {
        (self.interior().map(|(k, _)| f[k] * f[k]).sum::<f64>() * self.cell_area()).sqrt()
    }
}

/// Fraction of the segment `p → q` that lies in `p`'s subdomain.
fn crossing_fraction(layout: &DomainLayout, p: Vec2, q: Vec2, rp: Region) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..CROSSING_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if layout.region(p + mid * (q - p)) == rp {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn boundary_nodes(nx: usize, ny: usize, h: f64, origin: Vec2) -> Vec<BoundaryNode> {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let weight = |m: usize, count: usize| if m == 1 || m == count - 1 { 1.5 * h } else { h };
    let mut out = Vec::with_capacity(2 * (nx + ny));
    let mut push = |i: usize, j: usize, di: isize, dj: isize, normal: Vec2, w: f64| {
        let step = |s: isize| idx((i as isize + s * di) as usize, (j as isize + s * dj) as usize);
        out.push(BoundaryNode {
            index: idx(i, j),
            inward: [step(1), step(2)],
            point: origin + Vec2::new(i as f64 * h, j as f64 * h),
            normal,
            weight: w,
        });
    };
    for i in 1..nx {
        push(i, 0, 0, 1, Vec2::new(0.0, -1.0), weight(i, nx));
    }
    for j in 1..ny {
        push(nx, j, -1, 0, Vec2::new(1.0, 0.0), weight(j, ny));
    }
    for i in (1..nx).rev() {
        push(i, ny, 0, -1, Vec2::new(0.0, 1.0), weight(i, nx));
    }
    for j in (1..ny).rev() {
        push(0, j, 1, 0, Vec2::new(-1.0, 0.0), weight(j, ny));
    }
    out
}

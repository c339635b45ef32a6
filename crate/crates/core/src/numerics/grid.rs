use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::Aabb;
use crate::vector::{self, Vector, MAX_DIM, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Topology {
    Box,
    /// Nodes with `x·e <= offset` carry Dirichlet data.
    HalfSpace { e: Vector, offset: f64 },
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Interior,
    Dirichlet,
    /// Unknown node with at least one missing neighbour.
    Outflow,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub interior: usize,
    pub dirichlet: usize,
    pub outflow: usize,
}

/// Uniform Cartesian grid, possibly rotated.
///
/// Node `i` sits at `Σ_k (origin_k + i_k h) frame[k]` in world coordinates;
/// all difference operators work in the grid frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    h: f64,
    counts: [usize; MAX_DIM],
    origin: Vector,
    frame: [Vector; MAX_DIM],
    topology: Topology,
    mask: Vec<NodeKind>,
}

impl Grid {
    /// Axis-aligned box `[lower, lower + (n-1)h]` per axis, with outflow faces.
    pub fn new_box(dim: usize, h: f64, lower: &[f64], counts: &[usize]) -> Result<Self> {
        Self::build(dim, h, lower, counts, identity_frame(), Topology::Box)
    }

    /// Box in the frame whose first axis is `frame[0]`; `lower` is in frame coordinates.
    pub fn new_rotated_box(
        dim: usize,
        h: f64,
        lower: &[f64],
        counts: &[usize],
        frame: [Vector; MAX_DIM],
    ) -> Result<Self> {
        Self::build(dim, h, lower, counts, frame, Topology::Box)
    }

    /// Axis-aligned box covering `bbox` with spacing `h`.
    pub fn covering(bbox: &Aabb, h: f64) -> Result<Self> {
        let dim = bbox.dim();
        let mut counts = vec![0; dim];
        for (k, c) in counts.iter_mut().enumerate() {
            *c = ((bbox.upper[k] - bbox.lower[k]) / h).round() as usize + 1;
        }
        Self::new_box(dim, h, &bbox.lower, &counts)
    }

    /// Periodic grid with `n` nodes per axis and period `n h`, centred so the
    /// origin is a node.
    pub fn new_torus(dim: usize, h: f64, n: usize) -> Result<Self> {
        let lower = vec![-((n / 2) as f64) * h; dim];
        let counts = vec![n; dim];
        Self::build(dim, h, &lower, &counts, identity_frame(), Topology::Torus)
    }

    fn build(
        dim: usize,
        h: f64,
        lower: &[f64],
        counts: &[usize],
        frame: [Vector; MAX_DIM],
        topology: Topology,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(invalid(format!("grid dimension must be 1..=3, got {dim}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("grid spacing must be positive, got {h}")));
        }
        if lower.len() != dim || counts.len() != dim {
            return Err(invalid("grid extents do not match the dimension"));
        }
        let min_count = if topology == Topology::Torus { 3 } else { 2 };
        if counts.iter().any(|&c| c < min_count) {
            return Err(invalid(format!("need at least {min_count} nodes per axis")));
        }
        let total: usize = counts.iter().product();
        if total > 50_000_000 {
            return Err(invalid(format!("grid with {total} nodes is too large")));
        }
        let mut c = [1usize; MAX_DIM];
        let mut o = ZERO;
        c[..dim].copy_from_slice(counts);
        o[..dim].copy_from_slice(lower);
        let mut grid = Grid {
            dim,
            h,
            counts: c,
            origin: o,
            frame,
            topology,
            mask: Vec::new(),
        };
        grid.mask = (0..total).map(|i| grid.structural_kind(i)).collect();
        Ok(grid)
    }

    fn structural_kind(&self, idx: usize) -> NodeKind {
        if self.topology == Topology::Torus {
            return NodeKind::Interior;
        }
        let c = self.coords(idx);
        let on_face = (0..self.dim).any(|k| c[k] == 0 || c[k] + 1 == self.counts[k]);
        if on_face {
            NodeKind::Outflow
        } else {
            NodeKind::Interior
        }
    }

    /// Half-space grid: a box whose nodes with `x·e <= offset` are Dirichlet.
    pub fn with_half_space(mut self, e: Vector, offset: f64) -> Result<Self> {
        let e = vector::normalized(&e).ok_or_else(|| invalid("half-space normal must be nonzero"))?;
        self.topology = Topology::HalfSpace { e, offset };
        let slack = 1e-9 * self.h;
        for i in 0..self.len() {
            let x = self.position(i);
            if vector::dot(&x, &e) <= offset + slack {
                self.mask[i] = NodeKind::Dirichlet;
            } else {
                self.mask[i] = self.structural_kind(i);
            }
        }
        Ok(self)
    }

    /// Marks every node satisfying `pred` as Dirichlet.
    pub fn with_dirichlet(mut self, pred: impl Fn(&Vector) -> bool) -> Self {
        for i in 0..self.len() {
            if pred(&self.position(i)) {
                self.mask[i] = NodeKind::Dirichlet;
            }
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn frame(&self) -> &[Vector; MAX_DIM] {
        &self.frame
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.frame == identity_frame()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn is_torus(&self) -> bool {
        self.topology == Topology::Torus
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.mask[idx]
    }

    pub fn mask(&self) -> &[NodeKind] {
        &self.mask
    }

    pub fn mask_summary(&self) -> MaskSummary {
        let mut s = MaskSummary::default();
        for k in &self.mask {
            match k {
                NodeKind::Interior => s.interior += 1,
                NodeKind::Dirichlet => s.dirichlet += 1,
                NodeKind::Outflow => s.outflow += 1,
            }
        }
        s
    }

    /// Torus period along each axis.
    pub fn period(&self) -> f64 {
        self.counts[0] as f64 * self.h
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; MAX_DIM] {
        let c0 = idx % self.counts[0];
        let r = idx / self.counts[0];
        let c1 = r % self.counts[1];
        let c2 = r / self.counts[1];
        [c0, c1, c2]
    }

    #[inline]
    pub fn index(&self, c: [usize; MAX_DIM]) -> usize {
        c[0] + self.counts[0] * (c[1] + self.counts[1] * c[2])
    }

    /// Coordinates of a node in the grid frame.
    #[inline]
    pub fn local_position(&self, idx: usize) -> Vector {
        let c = self.coords(idx);
        let mut y = ZERO;
        for k in 0..self.dim {
            y[k] = self.origin[k] + c[k] as f64 * self.h;
        }
        y
    }

    /// World coordinates of a node.
    #[inline]
    pub fn position(&self, idx: usize) -> Vector {
        self.to_world(&self.local_position(idx))
    }

    pub fn to_world(&self, y: &Vector) -> Vector {
        let mut x = ZERO;
        for k in 0..self.dim {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += y[k] * self.frame[k][j];
            }
        }
        x
    }

    pub fn to_local(&self, x: &Vector) -> Vector {
        let mut y = ZERO;
        for (k, yk) in y.iter_mut().enumerate().take(self.dim) {
            *yk = vector::dot(x, &self.frame[k]);
        }
        y
    }

    /// World vector expressed in frame components.
    pub fn vector_to_local(&self, v: &Vector) -> Vector {
        self.to_local(v)
    }

    /// Neighbour one step along `axis` in direction `step` (±1); `None` off the grid.
    #[inline]
    pub fn neighbor(&self, c: [usize; MAX_DIM], axis: usize, step: isize) -> Option<[usize; MAX_DIM]> {
        let n = self.counts[axis];
        let mut out = c;
        let v = c[axis] as isize + step;
        if v < 0 || v >= n as isize {
            if self.is_torus() {
                out[axis] = v.rem_euclid(n as isize) as usize;
                return Some(out);
            }
            return None;
        }
        out[axis] = v as usize;
        Some(out)
    }

    #[inline]
    pub fn neighbor_index(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        self.neighbor(self.coords(idx), axis, step).map(|c| self.index(c))
    }

    /// World-coordinate bounding box of the grid.
    pub fn bounding_box(&self) -> Aabb {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        let corners = 1usize << self.dim;
        for m in 0..corners {
            let mut y = ZERO;
            for k in 0..self.dim {
                let top = (m >> k) & 1 == 1;
                y[k] = self.origin[k] + if top { (self.counts[k] - 1) as f64 * self.h } else { 0.0 };
            }
            let x = self.to_world(&y);
            for k in 0..self.dim {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        Aabb::new(&lo, &hi)
    }

    /// Same geometry with each axis refined by a factor two.
    pub fn refined(&self) -> Result<Self> {
        let counts: Vec<usize> = self.counts().iter().map(|n| if self.is_torus() { 2 * n } else { 2 * n - 1 }).collect();
        let mut g = Self::build(
            self.dim,
            self.h / 2.0,
            self.origin(),
            &counts,
            self.frame,
            if self.is_torus() { Topology::Torus } else { Topology::Box },
        )?;
        if let Topology::HalfSpace { e, offset } = self.topology {
            g = g.with_half_space(e, offset)?;
        }
        Ok(g)
    }
}

pub fn identity_frame() -> [Vector; MAX_DIM] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

//! Domains and quadrature grids.
//!
//! A [`Grid`] is a tensor lattice of midpoint cells covering the domain,
//! clipped exactly against the boundary of disc domains, with an optional
//! graded star-shaped patch replacing a small block of cells around every
//! singular point. Every node carries its cell polygon, so the singular
//! quadrature can integrate the Cauchy kernel exactly over nearby cells.

use std::ops::Range;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polygon_centroid, rect_disc_area, rect_disc_polygon};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Rectangle { min: [f64; 2], max: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    #[serde(flatten)]
    pub shape: Shape,
    /// Verification metrics ignore nodes closer than this to the boundary.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.1
}

impl Default for Domain {
    fn default() -> Self {
        Domain::square(1.0)
    }
}

impl Domain {
    /// The square `[-half, half]²`.
    pub fn square(half: f64) -> Self {
        Domain { shape: Shape::Rectangle { min: [-half, -half], max: [half, half] }, margin: default_margin() }
    }

    pub fn rectangle(min: C64, max: C64) -> Result<Self> {
        let d = Domain { shape: Shape::Rectangle { min: [min.re, min.im], max: [max.re, max.im] }, margin: default_margin() };
        d.validate()?;
        Ok(d)
    }

    pub fn disc(center: C64, radius: f64) -> Result<Self> {
        let d = Domain { shape: Shape::Disc { center: [center.re, center.im], radius }, margin: default_margin() };
        d.validate()?;
        Ok(d)
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area() > 0.0) || !self.area().is_finite() {
            return Err(Error::Geometry("domain must have positive finite area".into()));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::Geometry("boundary margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::Rectangle { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            Shape::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Rectangle { min, max } => (max[0] - min[0]).hypot(max[1] - min[1]),
            Shape::Disc { radius, .. } => 2.0 * radius,
        }
    }

    /// Lower-left and upper-right corners of the bounding box.
    pub fn bounds(&self) -> (C64, C64) {
        match self.shape {
            Shape::Rectangle { min, max } => (C64::new(min[0], min[1]), C64::new(max[0], max[1])),
            Shape::Disc { center, radius } => (C64::new(center[0] - radius, center[1] - radius), C64::new(center[0] + radius, center[1] + radius)),
        }
    }

    /// Distance to the boundary; negative outside.
    pub fn boundary_distance(&self, z: C64) -> f64 {
        match self.shape {
            Shape::Rectangle { min, max } => (z.re - min[0]).min(max[0] - z.re).min(z.im - min[1]).min(max[1] - z.im),
            Shape::Disc { center, radius } => radius - (z - C64::new(center[0], center[1])).norm(),
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        self.boundary_distance(z) > 0.0
    }
}

/// Graded refinement around each singular point: a square block of
/// `2·half_cells` lattice cells per side is replaced by `rings` geometric
/// layers (factor `grading`) plus a core, each split into `angles` sectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub half_cells: usize,
    pub rings: usize,
    pub angles: usize,
    pub grading: f64,
}

impl Default for RingSpec {
    fn default() -> Self {
        RingSpec { half_cells: 2, rings: 6, angles: 32, grading: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct RingPatch {
    pub center: C64,
    /// Lattice cell range `[i0, i1) x [j0, j1)` replaced by the patch.
    pub cells: (Range<usize>, Range<usize>),
    pub spec: RingSpec,
    pub nodes: Range<usize>,
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub domain: Domain,
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// Lower-left corner of the lattice.
    pub origin: C64,
    pub nodes: Vec<C64>,
    pub weights: Vec<f64>,
    /// Counterclockwise cell polygon owning each node.
    pub cells: Vec<Vec<C64>>,
    /// Regular (unclipped, unrefined) lattice cell `(i, j)` → node index.
    lattice: Vec<Option<usize>>,
    node_cell: Vec<Option<(usize, usize)>>,
    pub patches: Vec<RingPatch>,
    pub singular_points: Vec<C64>,
    pub rings: Option<RingSpec>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nominal cell size (the larger lattice spacing).
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Node at regular lattice cell `(i, j)`, if that cell is a plain midpoint cell.
    pub fn lattice_node(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        self.lattice[j as usize * self.nx + i as usize]
    }

    pub fn lattice_index(&self, node: usize) -> Option<(usize, usize)> {
        self.node_cell[node]
    }

    /// Nodes whose four lattice neighbours exist, i.e. where centred
    /// differences are available.
    pub fn stencil_nodes(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| {
                self.node_cell[k].is_some_and(|(i, j)| {
                    let (i, j) = (i as isize, j as isize);
                    self.lattice_node(i - 1, j).is_some()
                        && self.lattice_node(i + 1, j).is_some()
                        && self.lattice_node(i, j - 1).is_some()
                        && self.lattice_node(i, j + 1).is_some()
                })
            })
            .collect()
    }

    pub fn singular_distance(&self, z: C64) -> f64 {
        self.singular_points.iter().map(|&p| (z - p).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Stencil nodes at least `exclusion` away from every singular point and at
    /// least the domain margin away from the boundary.
    pub fn verification_nodes(&self, exclusion: f64) -> Vec<usize> {
        self.stencil_nodes()
            .into_iter()
            .filter(|&k| {
                let z = self.nodes[k];
                self.domain.boundary_distance(z) >= self.domain.margin && self.singular_distance(z) >= exclusion
            })
            .collect()
    }

    /// Default verification exclusion radius (4h).
    pub fn default_exclusion(&self) -> f64 {
        4.0 * self.h()
    }

    /// Exclusion discs of the given radius around every singular point.
    pub fn exclusion_discs(&self, radius: f64) -> Vec<(C64, f64)> {
        self.singular_points.iter().map(|&p| (p, radius)).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || (self.nodes == other.nodes && self.weights == other.weights)
    }

    /// Bare node set without cells or lattice, used for scattered samples.
    /// Weights are uniform and sum to the domain area.
    pub fn scattered(domain: Domain, nodes: Vec<C64>) -> Result<Grid> {
        domain.validate()?;
        if nodes.is_empty() {
            return Err(Error::Invalid("scattered node set is empty".into()));
        }
        let len = nodes.len();
        let h = (domain.area() / len as f64).sqrt();
        let (lo, _) = domain.bounds();
        Ok(Grid {
            domain: domain.clone(),
            n: 0,
            nx: 0,
            ny: 0,
            hx: h,
            hy: h,
            origin: lo,
            weights: vec![domain.area() / len as f64; len],
            cells: vec![Vec::new(); len],
            lattice: Vec::new(),
            node_cell: vec![None; len],
            patches: Vec::new(),
            singular_points: Vec::new(),
            rings: None,
            nodes,
        })
    }

    pub fn locator(&self) -> NodeLocator<'_> {
        NodeLocator::new(self)
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            domain: self.domain.clone(),
            n: self.n,
            nx: self.nx,
            ny: self.ny,
            h: self.h(),
            node_count: self.len(),
            singular_points: self.singular_points.iter().map(|z| [z.re, z.im]).collect(),
            rings: self.rings,
            weight_checksum: self.weight_sum(),
        }
    }
}

/// JSON sidecar describing a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridMeta {
    pub domain: Domain,
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub node_count: usize,
    pub singular_points: Vec<[f64; 2]>,
    pub rings: Option<RingSpec>,
    pub weight_checksum: f64,
}

/// Builds the quadrature grid: `n` cells across the longer side of the
/// bounding box, midpoint nodes, exact clipping for discs, and one graded
/// patch per singular point when `rings` is given.
pub fn make_grid(domain: &Domain, n: usize, singular_points: &[C64], rings: Option<RingSpec>) -> Result<Grid> {
    domain.validate()?;
    if n < 8 {
        return Err(Error::Invalid(format!("grid resolution n = {n} must be at least 8")));
    }
    let (lo, hi) = domain.bounds();
    let (w, hgt) = (hi.re - lo.re, hi.im - lo.im);
    let (nx, ny) = if w >= hgt { (n, ((n as f64 * hgt / w).round() as usize).max(1)) } else { (((n as f64 * w / hgt).round() as usize).max(1), n) };
    let hx = w / nx as f64;
    let hy = hgt / ny as f64;
    let h = hx.max(hy);

    for (k, &p) in singular_points.iter().enumerate() {
        let d = domain.boundary_distance(p);
        if d < 2.0 * h {
            return Err(Error::Geometry(format!("singular point {} at {p} is outside the domain or closer than 2h = {:.3e} to the boundary", k + 1, 2.0 * h)));
        }
        for &q in &singular_points[..k] {
            if (p - q).norm() < 1e-12 {
                return Err(Error::Geometry(format!("singular point {p} is repeated")));
            }
        }
    }

    let cell_rect = |i: usize, j: usize| {
        let x0 = lo.re + i as f64 * hx;
        let y0 = lo.im + j as f64 * hy;
        (x0, x0 + hx, y0, y0 + hy)
    };

    // Blocks replaced by graded patches.
    let mut blocks: Vec<(Range<usize>, Range<usize>)> = Vec::new();
    if let Some(spec) = rings {
        if spec.angles < 4 || spec.angles % 4 != 0 {
            return Err(Error::Invalid("ring angle count must be a positive multiple of 4".into()));
        }
        if spec.half_cells == 0 || !(spec.grading > 0.0 && spec.grading < 1.0) {
            return Err(Error::Invalid("ring spec needs half_cells >= 1 and 0 < grading < 1".into()));
        }
        for &p in singular_points {
            let ic = ((p.re - lo.re) / hx).round() as isize;
            let jc = ((p.im - lo.im) / hy).round() as isize;
            let hc = spec.half_cells as isize;
            let (i0, i1, j0, j1) = (ic - hc, ic + hc, jc - hc, jc + hc);
            if i0 < 0 || j0 < 0 || i1 as usize > nx || j1 as usize > ny {
                return Err(Error::Geometry(format!("refinement block around {p} leaves the lattice")));
            }
            let bi = i0 as usize..i1 as usize;
            let bj = j0 as usize..j1 as usize;
            for other in &blocks {
                let overlap = bi.start < other.0.end && other.0.start < bi.end && bj.start < other.1.end && other.1.start < bj.end;
                if overlap {
                    return Err(Error::Geometry(format!("refinement block around {p} overlaps another singular point")));
                }
            }
            // every block cell must be a full interior cell
            for i in bi.clone() {
                for j in bj.clone() {
                    let (x0, x1, y0, y1) = cell_rect(i, j);
                    for c in [C64::new(x0, y0), C64::new(x1, y0), C64::new(x1, y1), C64::new(x0, y1)] {
                        if domain.boundary_distance(c) < -1e-12 {
                            return Err(Error::Geometry(format!("refinement block around {p} leaves the domain")));
                        }
                    }
                }
            }
            blocks.push((bi, bj));
        }
    }
    let in_block = |i: usize, j: usize| blocks.iter().any(|(bi, bj)| bi.contains(&i) && bj.contains(&j));

    let mut nodes = Vec::with_capacity(nx * ny);
    let mut weights = Vec::with_capacity(nx * ny);
    let mut cells = Vec::with_capacity(nx * ny);
    let mut node_cell = Vec::with_capacity(nx * ny);
    let mut lattice = vec![None; nx * ny];

    for j in 0..ny {
        for i in 0..nx {
            if in_block(i, j) {
                continue;
            }
            let (x0, x1, y0, y1) = cell_rect(i, j);
            let rect = vec![C64::new(x0, y0), C64::new(x1, y0), C64::new(x1, y1), C64::new(x0, y1)];
            match domain.shape {
                Shape::Rectangle { .. } => {
                    lattice[j * nx + i] = Some(nodes.len());
                    node_cell.push(Some((i, j)));
                    nodes.push(C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)));
                    weights.push(hx * hy);
                    cells.push(rect);
                }
                Shape::Disc { center, radius } => {
                    let c = C64::new(center[0], center[1]);
                    let full = rect.iter().all(|&v| (v - c).norm() <= radius);
                    if full {
                        lattice[j * nx + i] = Some(nodes.len());
                        node_cell.push(Some((i, j)));
                        nodes.push(C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)));
                        weights.push(hx * hy);
                        cells.push(rect);
                        continue;
                    }
                    let area = rect_disc_area(x0, x1, y0, y1, c, radius);
                    if area <= 1e-14 * hx * hy {
                        continue;
                    }
                    let poly = rect_disc_polygon(x0, x1, y0, y1, c, radius, 8);
                    let node = if poly.len() >= 3 { polygon_centroid(&poly) } else { C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)) };
                    node_cell.push(None);
                    nodes.push(node);
                    weights.push(area);
                    cells.push(poly);
                }
            }
        }
    }

    let mut patches = Vec::new();
    if let Some(spec) = rings {
        for (&p, (bi, bj)) in singular_points.iter().zip(blocks.iter()) {
            let start = nodes.len();
            let x0 = lo.re + bi.start as f64 * hx;
            let x1 = lo.re + bi.end as f64 * hx;
            let y0 = lo.im + bj.start as f64 * hy;
            let y1 = lo.im + bj.end as f64 * hy;
            let boundary = block_boundary(x0, x1, y0, y1, spec.angles);
            let k = boundary.len();
            // s-levels 1, g, g², …, g^rings
            let levels: Vec<f64> = (0..=spec.rings).map(|l| spec.grading.powi(l as i32)).collect();
            let scaled = |s: f64, q: C64| p + (q - p) * s;
            for l in 0..spec.rings {
                let (so, si) = (levels[l], levels[l + 1]);
                for a in 0..k {
                    let (qa, qb) = (boundary[a], boundary[(a + 1) % k]);
                    let tri = 0.5 * ((qa - p).conj() * (qb - p)).im;
                    let poly = vec![scaled(si, qa), scaled(so, qa), scaled(so, qb), scaled(si, qb)];
                    nodes.push(polygon_centroid(&poly));
                    weights.push((so * so - si * si) * tri);
                    cells.push(poly);
                    node_cell.push(None);
                }
            }
            let sc = levels[spec.rings];
            for a in 0..k {
                let (qa, qb) = (boundary[a], boundary[(a + 1) % k]);
                let tri = 0.5 * ((qa - p).conj() * (qb - p)).im;
                let poly = vec![p, scaled(sc, qa), scaled(sc, qb)];
                nodes.push(p + (qa + qb - 2.0 * p) * (sc / 3.0));
                weights.push(sc * sc * tri);
                cells.push(poly);
                node_cell.push(None);
            }
            patches.push(RingPatch { center: p, cells: (bi.clone(), bj.clone()), spec, nodes: start..nodes.len() });
        }
    }

    Ok(Grid {
        domain: domain.clone(),
        n,
        nx,
        ny,
        hx,
        hy,
        origin: lo,
        nodes,
        weights,
        cells,
        lattice,
        node_cell,
        patches,
        singular_points: singular_points.to_vec(),
        rings,
    })
}

/// Counterclockwise boundary points of a rectangle, `count / 4` per side,
/// starting at the lower-left corner.
fn block_boundary(x0: f64, x1: f64, y0: f64, y1: f64, count: usize) -> Vec<C64> {
    let per = count / 4;
    let corners = [C64::new(x0, y0), C64::new(x1, y0), C64::new(x1, y1), C64::new(x0, y1)];
    let mut pts = Vec::with_capacity(count);
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        for t in 0..per {
            pts.push(a + (b - a) * (t as f64 / per as f64));
        }
    }
    pts
}

/// Bucket index for nearest-node queries.
pub struct NodeLocator<'a> {
    grid: &'a Grid,
    origin: C64,
    size: f64,
    bx: usize,
    by: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> NodeLocator<'a> {
    fn new(grid: &'a Grid) -> Self {
        let (lo, hi) = grid.domain.bounds();
        let size = grid.h();
        let bx = (((hi.re - lo.re) / size).ceil() as usize).max(1);
        let by = (((hi.im - lo.im) / size).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); bx * by];
        for (k, z) in grid.nodes.iter().enumerate() {
            let i = (((z.re - lo.re) / size) as usize).min(bx - 1);
            let j = (((z.im - lo.im) / size) as usize).min(by - 1);
            buckets[j * bx + i].push(k);
        }
        NodeLocator { grid, origin: lo, size, bx, by, buckets }
    }

    /// Nearest node to `z` (searches growing bucket rings).
    pub fn nearest(&self, z: C64) -> Option<usize> {
        let fi = ((z.re - self.origin.re) / self.size).floor() as isize;
        let fj = ((z.im - self.origin.im) / self.size).floor() as isize;
        let mut best: Option<(usize, f64)> = None;
        let max_r = self.bx.max(self.by) as isize;
        for r in 0..=max_r {
            for j in (fj - r)..=(fj + r) {
                for i in (fi - r)..=(fi + r) {
                    if (i - fi).abs() != r && (j - fj).abs() != r {
                        continue;
                    }
                    if i < 0 || j < 0 || i as usize >= self.bx || j as usize >= self.by {
                        continue;
                    }
                    for &k in &self.buckets[j as usize * self.bx + i as usize] {
                        let d = (self.grid.nodes[k] - z).norm();
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((k, d));
                        }
                    }
                }
            }
            // anything in ring r+1 is at least r·size away
            if let Some((_, bd)) = best {
                if bd <= r as f64 * self.size {
                    break;
                }
            }
        }
        best.map(|(k, _)| k)
    }
}

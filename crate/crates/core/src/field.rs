//! Complex samples on a grid, quadrature, finite-difference Wirtinger
//! derivatives, empirical Hölder exponents, and CSV serialization.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Debug)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<C64>,
}

impl GridField {
    pub fn new(grid: Arc<Grid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid(format!("field has {} values for {} nodes", values.len(), grid.len())));
        }
        Ok(GridField { grid, values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridField { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: C64) -> Self {
        GridField { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(C64) -> C64 + Sync) -> Self {
        let values = grid.nodes.par_iter().map(|&z| f(z)).collect();
        GridField { grid: grid.clone(), values }
    }

    pub fn try_from_fn(grid: &Arc<Grid>, f: impl Fn(usize, C64) -> Result<C64> + Sync) -> Result<Self> {
        let values = grid.nodes.par_iter().enumerate().map(|(k, &z)| f(k, z)).collect::<Result<Vec<_>>>()?;
        Ok(GridField { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(C64, C64) -> C64 + Sync) -> GridField {
        let values = self.values.par_iter().zip(self.grid.nodes.par_iter()).map(|(&v, &z)| f(v, z)).collect();
        GridField { grid: self.grid.clone(), values }
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(C64, C64, C64) -> C64 + Sync) -> Result<GridField> {
        self.check_same_grid(other)?;
        let values = self.values.par_iter().zip(other.values.par_iter()).zip(self.grid.nodes.par_iter()).map(|((&a, &b), &z)| f(a, b, z)).collect();
        Ok(GridField { grid: self.grid.clone(), values })
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn conj(&self) -> GridField {
        self.map(|v, _| v.conj())
    }

    pub fn scale(&self, c: C64) -> GridField {
        self.map(|v, _| c * v)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b, _| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b, _| a - b)
    }

    pub fn mul(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b, _| a * b)
    }

    /// Index of the first non-finite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(node) => Err(Error::NonFinite { node, z: self.grid.nodes[node] }),
            None => Ok(()),
        }
    }

    /// Quadrature `Σ value·weight`.
    pub fn integrate(&self) -> C64 {
        self.values.iter().zip(&self.grid.weights).map(|(&v, &w)| v * w).sum()
    }

    /// Max modulus over a node subset.
    pub fn max_abs_on(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&k| self.values[k].norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Values on a subset of the grid nodes (e.g. where a stencil exists).
#[derive(Clone, Debug)]
pub struct SubField {
    pub grid: Arc<Grid>,
    pub nodes: Vec<usize>,
    pub values: Vec<C64>,
}

impl SubField {
    pub fn get(&self, node: usize) -> Option<C64> {
        self.nodes.binary_search(&node).ok().map(|i| self.values[i])
    }

    /// Max modulus of `self - reference` over the given node subset (which
    /// must be contained in `self.nodes`).
    pub fn max_error_against(&self, reference: impl Fn(usize, C64) -> C64, nodes: &[usize]) -> f64 {
        nodes.iter().filter_map(|&k| self.get(k).map(|v| (v - reference(k, self.grid.nodes[k])).norm())).fold(0.0, f64::max)
    }
}

/// Centred-difference `∂/∂z̄ = ½(∂x + i∂y)` on every node with a complete
/// lattice stencil (one-cell border and refined patches dropped).
pub fn wirtinger_dbar(field: &GridField) -> Result<SubField> {
    let g = field.grid();
    if g.nx < 3 || g.ny < 3 {
        return Err(Error::Invalid("grid too small for centred differences".into()));
    }
    let nodes = g.stencil_nodes();
    let v = field.values();
    let values = nodes
        .iter()
        .map(|&k| {
            let (i, j) = g.lattice_index(k).expect("stencil node is a lattice node");
            let (i, j) = (i as isize, j as isize);
            let e = v[g.lattice_node(i + 1, j).unwrap()];
            let w = v[g.lattice_node(i - 1, j).unwrap()];
            let n = v[g.lattice_node(i, j + 1).unwrap()];
            let s = v[g.lattice_node(i, j - 1).unwrap()];
            let dx = (e - w) / (2.0 * g.hx);
            let dy = (n - s) / (2.0 * g.hy);
            0.5 * (dx + C64::new(0.0, 1.0) * dy)
        })
        .collect();
    Ok(SubField { grid: g.clone(), nodes, values })
}

/// Centred-difference `∂/∂z = ½(∂x - i∂y)`, same node set as [`wirtinger_dbar`].
pub fn wirtinger_d(field: &GridField) -> Result<SubField> {
    let mut out = wirtinger_dbar(&field.conj())?;
    for v in &mut out.values {
        *v = v.conj();
    }
    Ok(out)
}

/// Empirical Hölder exponent.
///
/// Every node outside the exclusion discs serves as an anchor. For each of
/// eight log-spaced separations `d` in `[2h, diam/4]` the anchor is paired
/// with the node nearest to a randomly rotated offset of length `d`. The
/// modulus of continuity `ω(d)` is the largest `|f(z₁) - f(z₂)|` seen in
/// that separation bin, and the exponent is the least-squares slope of
/// `log ω` against `log d`. Using the bin maximum (rather than every pair)
/// makes the estimate track the worst point, which is what a Hölder
/// exponent measures.
///
/// `sample_pairs` is the minimum number of pairs to draw; anchors get more
/// than one partner per bin when needed. A constant field returns
/// `f64::INFINITY`.
pub fn holder_estimate(field: &GridField, sample_pairs: usize, exclusion: &[(C64, f64)], seed: u64) -> Result<f64> {
    let g = field.grid();
    let eligible = |z: C64| exclusion.iter().all(|&(c, r)| (z - c).norm() >= r);
    let anchors: Vec<usize> = (0..g.len()).filter(|&k| eligible(g.nodes[k])).collect();
    let bins = 8usize;
    let d_min = 2.0 * g.h();
    let d_max = 0.25 * g.domain.diameter();
    if anchors.len() < 2 || d_max <= d_min {
        return Err(Error::Invalid("not enough nodes outside the exclusion discs".into()));
    }
    let per = sample_pairs.div_ceil(anchors.len() * bins).max(1);
    let dists: Vec<f64> = (0..bins).map(|b| d_min * (d_max / d_min).powf(b as f64 / (bins - 1) as f64)).collect();
    let loc = g.locator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = vec![0.0f64; bins];
    let mut count = 0usize;
    let v = field.values();
    for &a in &anchors {
        let za = g.nodes[a];
        for (b, &d) in dists.iter().enumerate() {
            for _ in 0..per {
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let target = za + C64::from_polar(d, phi);
                let Some(k) = loc.nearest(target) else { continue };
                let zk = g.nodes[k];
                let actual = (zk - za).norm();
                if k == a || !eligible(zk) || actual < d / 1.5 || actual > d * 1.5 {
                    continue;
                }
                omega[b] = omega[b].max((v[a] - v[k]).norm());
                count += 1;
            }
        }
    }
    if count < 100 {
        return Err(Error::Invalid(format!("only {count} node pairs available outside the exclusion discs (need 100)")));
    }
    let pts: Vec<(f64, f64)> = dists.iter().zip(&omega).filter(|(_, &w)| w > 0.0).map(|(&d, &w)| (d.ln(), w.ln())).collect();
    if pts.len() < 2 {
        return Ok(f64::INFINITY);
    }
    Ok(least_squares_slope(&pts))
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Formats a double with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `x,y,re,im`, one node per row in node order.
pub fn write_field_csv<W: Write>(field: &GridField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "re", "im"])?;
    for (z, v) in field.grid().nodes.iter().zip(field.values()) {
        w.write_record([fmt17(z.re), fmt17(z.im), fmt17(v.re), fmt17(v.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows of `x,y,re,im` back as `(node, value)` pairs.
pub fn read_field_csv<R: Read>(input: R) -> Result<Vec<(C64, C64)>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "re", "im"] {
        return Err(Error::Invalid(format!("expected header x,y,re,im, found {:?}", headers)));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Invalid("short CSV row".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Invalid(format!("bad number in CSV: {e}")))
        };
        rows.push((C64::new(num(0)?, num(1)?), C64::new(num(2)?, num(3)?)));
    }
    Ok(rows)
}

/// Loads a CSV back onto `grid`, requiring the node coordinates to match.
pub fn field_from_csv<R: Read>(grid: &Arc<Grid>, input: R) -> Result<GridField> {
    let rows = read_field_csv(input)?;
    if rows.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let mut values = Vec::with_capacity(rows.len());
    for ((z, v), node) in rows.into_iter().zip(&grid.nodes) {
        if (z - node).norm() > 1e-12 * (1.0 + node.norm()) {
            return Err(Error::GridMismatch);
        }
        values.push(v);
    }
    GridField::new(grid.clone(), values)
}

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RankEvaluator;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_CAP: usize = 10_000_000;

/// Values sampled on a uniform grid with the same spacing on every axis.
///
/// Nodes are stored row-major (last axis fastest) and the `components`
/// values of one node are contiguous. A scalar field has one component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGridField {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub components: usize,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    origin: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
    d: usize,
    components: usize,
}

impl VectorGridField {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.shape).fold(0, |acc, (&k, &n)| acc * n + k)
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = node % self.shape[a];
            node /= self.shape[a];
        }
        out
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .zip(&self.origin)
            .map(|(&k, o)| o + k as f64 * self.spacing)
            .collect()
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.components..(node + 1) * self.components]
    }

    /// Builds a field by evaluating `f` at every node.
    pub fn from_fn<F>(origin: Vec<f64>, spacing: f64, shape: Vec<usize>, components: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let mut field = VectorGridField {
            origin,
            spacing,
            shape,
            components,
            values: Vec::new(),
        };
        let n = field.node_count();
        let mut values = vec![0.0; n * components];
        values
            .par_chunks_mut(components)
            .enumerate()
            .for_each(|(node, out)| out.copy_from_slice(&f(&field.coords(node))));
        field.values = values;
        field
    }

    /// Single component as a scalar field.
    pub fn component(&self, c: usize) -> VectorGridField {
        VectorGridField {
            origin: self.origin.clone(),
            spacing: self.spacing,
            shape: self.shape.clone(),
            components: 1,
            values: self.values.iter().skip(c).step_by(self.components).copied().collect(),
        }
    }

    /// Drops `margin` layers on every side.
    pub fn crop(&self, margin: usize) -> Result<VectorGridField> {
        if margin == 0 {
            return Ok(self.clone());
        }
        let shape: Vec<usize> = self
            .shape
            .iter()
            .map(|&n| n.checked_sub(2 * margin).filter(|&m| m > 0))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Stencil(format!("cannot drop {margin} layers from {:?}", self.shape)))?;
        let origin = self.origin.iter().map(|o| o + margin as f64 * self.spacing).collect();
        let mut out = VectorGridField {
            origin,
            spacing: self.spacing,
            shape,
            components: self.components,
            values: Vec::new(),
        };
        let c = self.components;
        let mut values = Vec::with_capacity(out.node_count() * c);
        for node in 0..out.node_count() {
            let src: Vec<usize> = out.multi_index(node).iter().map(|k| k + margin).collect();
            values.extend_from_slice(self.value(self.index_of(&src)));
        }
        out.values = values;
        Ok(out)
    }

    fn zip_with(&self, other: &VectorGridField, f: impl Fn(f64, f64) -> f64) -> Result<VectorGridField> {
        if self.shape != other.shape || self.components != other.components {
            return Err(Error::Stencil("grid fields have different layouts".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a = f(*a, *b);
        }
        Ok(out)
    }

    pub fn add(&self, other: &VectorGridField) -> Result<VectorGridField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, s: f64) -> VectorGridField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Piecewise tricubic (tensor four-point Lagrange) interpolation.
    pub fn interpolate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        let mut base = vec![0usize; d];
        let mut w = vec![[0.0; 4]; d];
        for a in 0..d {
            let n = self.shape[a];
            if n < 4 {
                return Err(Error::Stencil("interpolation needs 4 nodes per axis".into()));
            }
            let t = (x[a] - self.origin[a]) / self.spacing;
            if !(0.0..=(n - 1) as f64).contains(&t) {
                return Err(Error::Domain(format!("point outside the grid on axis {a}")));
            }
            let b = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
            base[a] = b;
            let s = t - b as f64;
            for (j, wj) in w[a].iter_mut().enumerate() {
                *wj = (0..4)
                    .filter(|&m| m != j)
                    .map(|m| (s - m as f64) / (j as f64 - m as f64))
                    .product();
            }
        }
        let c = self.components;
        let mut out = vec![0.0; c];
        let mut idx = vec![0usize; d];
        for flat in 0..4usize.pow(d as u32) {
            let mut rest = flat;
            let mut weight = 1.0;
            for a in (0..d).rev() {
                let j = rest % 4;
                rest /= 4;
                idx[a] = base[a] + j;
                weight *= w[a][j];
            }
            let v = self.value(self.index_of(&idx));
            for k in 0..c {
                out[k] += weight * v[k];
            }
        }
        Ok(out)
    }
}

/// Samples the rank on `[lo, hi]^d` with `n_per_axis` nodes per axis.
pub fn sample_grid(ev: &RankEvaluator, lo: f64, hi: f64, n_per_axis: usize) -> Result<VectorGridField> {
    sample_grid_with_cap(ev, lo, hi, n_per_axis, DEFAULT_GRID_CAP)
}

pub fn sample_grid_with_cap(
    ev: &RankEvaluator,
    lo: f64,
    hi: f64,
    n_per_axis: usize,
    cap: usize,
) -> Result<VectorGridField> {
    let d = ev.dim().get();
    if n_per_axis < 5 {
        return Err(Error::Domain(format!(
            "need at least 5 nodes per axis, got {n_per_axis}"
        )));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("invalid box [{lo}, {hi}]")));
    }
    let total = (n_per_axis as u128).pow(d as u32);
    if total > cap as u128 {
        return Err(Error::Budget {
            what: "grid nodes",
            requested: total.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    let spacing = (hi - lo) / (n_per_axis - 1) as f64;
    Ok(VectorGridField::from_fn(
        vec![lo; d],
        spacing,
        vec![n_per_axis; d],
        d,
        |x| ev.rank_unchecked(x),
    ))
}

/// Fornberg weights for the `m`-th derivative at 0 on integer nodes `-p..=p`.
fn fornberg(m: usize, p: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (-(p as isize)..=p as isize).map(|k| k as f64).collect();
    let n = nodes.len();
    let mut c = vec![vec![vec![0.0; n]; n]; m + 1];
    c[0][0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            for k in 0..=m.min(i) {
                let prev = if k > 0 { c[k - 1][i - 1][j] } else { 0.0 };
                c[k][i][j] = (nodes[i] * c[k][i - 1][j] - k as f64 * prev) / c3;
            }
        }
        for k in 0..=m.min(i) {
            let prev = if k > 0 { c[k - 1][i - 1][i - 1] } else { 0.0 };
            c[k][i][i] = c1 / c2 * (k as f64 * prev - nodes[i - 1] * c[k][i - 1][i - 1]);
        }
        c1 = c2;
    }
    c[m][n - 1].clone()
}

/// Half-width of the centered stencil for an `m`-th derivative of accuracy `order`.
pub fn stencil_half_width(m: u32, order: u32) -> usize {
    if m == 0 {
        0
    } else {
        (m.div_ceil(2) + order / 2 - 1) as usize
    }
}

fn check_order(order: u32) -> Result<()> {
    if order == 2 || order == 4 {
        Ok(())
    } else {
        Err(Error::Stencil(format!(
            "finite-difference order must be 2 or 4, got {order}"
        )))
    }
}

// One derivative pass along `axis`; that axis loses `p` nodes per side.
fn axis_pass(field: &VectorGridField, axis: usize, m: u32, order: u32) -> Result<VectorGridField> {
    let p = stencil_half_width(m, order);
    let weights = fornberg(m as usize, p);
    let n = field.shape[axis];
    if n < 2 * p + 1 {
        return Err(Error::Stencil(format!(
            "axis {axis} has {n} nodes, stencil needs {}",
            2 * p + 1
        )));
    }
    let mut shape = field.shape.clone();
    shape[axis] = n - 2 * p;
    let mut origin = field.origin.clone();
    origin[axis] += p as f64 * field.spacing;
    let stride: usize = field.shape[axis + 1..].iter().product::<usize>() * field.components;
    let scale = field.spacing.powi(-(m as i32));
    let mut out = VectorGridField {
        origin,
        spacing: field.spacing,
        shape,
        components: field.components,
        values: Vec::new(),
    };
    let c = field.components;
    let mut values = vec![0.0; out.node_count() * c];
    values.par_chunks_mut(c).enumerate().for_each(|(node, dst)| {
        // the stencil starts at the same multi-index in the source grid
        let start = field.index_of(&out.multi_index(node)) * c;
        for (k, &wk) in weights.iter().enumerate() {
            if wk != 0.0 {
                let off = start + k * stride;
                for (v, &s) in dst.iter_mut().zip(&field.values[off..off + c]) {
                    *v += wk * s;
                }
            }
        }
        for v in dst.iter_mut() {
            *v *= scale;
        }
    });
    out.values = values;
    Ok(out)
}

/// `∂^alpha` of every component by centered differences.
///
/// Each axis uses its own stencil; the result is then cropped so that the
/// same number of layers (the widest half-width) is lost on every side.
pub fn fd_derivative(field: &VectorGridField, alpha: &[u32], order: u32) -> Result<VectorGridField> {
    check_order(order)?;
    let d = field.dim();
    if alpha.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: alpha.len(),
        });
    }
    let margin = alpha.iter().map(|&m| stencil_half_width(m, order)).max().unwrap_or(0);
    if field.shape.iter().any(|&n| n < (2 * margin + 1).max(5)) {
        return Err(Error::Stencil(format!(
            "grid {:?} too small for a stencil of half-width {margin}",
            field.shape
        )));
    }
    let mut cur = field.clone();
    for (axis, &m) in alpha.iter().enumerate() {
        if m > 0 {
            cur = axis_pass(&cur, axis, m, order)?;
        }
    }
    // crop axes that lost fewer layers than the margin
    let mut out = cur;
    for (axis, &m) in alpha.iter().enumerate() {
        let extra = margin - stencil_half_width(m, order);
        if extra > 0 {
            out = crop_axis(&out, axis, extra);
        }
    }
    Ok(out)
}

fn crop_axis(field: &VectorGridField, axis: usize, k: usize) -> VectorGridField {
    let mut shape = field.shape.clone();
    shape[axis] -= 2 * k;
    let mut origin = field.origin.clone();
    origin[axis] += k as f64 * field.spacing;
    let mut out = VectorGridField {
        origin,
        spacing: field.spacing,
        shape,
        components: field.components,
        values: Vec::new(),
    };
    let mut values = Vec::with_capacity(out.node_count() * field.components);
    for node in 0..out.node_count() {
        let mut src = out.multi_index(node);
        src[axis] += k;
        values.extend_from_slice(field.value(field.index_of(&src)));
    }
    out.values = values;
    out
}

/// `Σ_i ∂_i F_i` for a field with one component per axis.
pub fn fd_divergence(field: &VectorGridField, order: u32) -> Result<VectorGridField> {
    let d = field.dim();
    if field.components != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: field.components,
        });
    }
    let mut acc: Option<VectorGridField> = None;
    for i in 0..d {
        let mut alpha = vec![0; d];
        alpha[i] = 1;
        let di = fd_derivative(&field.component(i), &alpha, order)?;
        acc = Some(match acc {
            None => di,
            Some(a) => a.add(&di)?,
        });
    }
    Ok(acc.expect("at least one axis"))
}

/// `Σ_i ∂_i²` applied to every component.
pub fn fd_laplacian(field: &VectorGridField, order: u32) -> Result<VectorGridField> {
    let d = field.dim();
    let mut acc: Option<VectorGridField> = None;
    for i in 0..d {
        let mut alpha = vec![0; d];
        alpha[i] = 2;
        let di = fd_derivative(field, &alpha, order)?;
        acc = Some(match acc {
            None => di,
            Some(a) => a.add(&di)?,
        });
    }
    Ok(acc.expect("at least one axis"))
}

/// JSON header line, then one CSV line per node: coordinates, then components.
pub fn write_grid<W: Write>(field: &VectorGridField, mut w: W) -> Result<()> {
    let header = Header {
        origin: field.origin.clone(),
        spacing: field.spacing,
        shape: field.shape.clone(),
        d: field.dim(),
        components: field.components,
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w).map_err(|e| Error::io("<grid>", e))?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let mut row: Vec<String> = Vec::with_capacity(field.dim() + field.components);
    for node in 0..field.node_count() {
        row.clear();
        row.extend(field.coords(node).iter().map(|v| format!("{v:e}")));
        row.extend(field.value(node).iter().map(|v| format!("{v:e}")));
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<grid>", e))?;
    Ok(())
}

pub fn read_grid<R: BufRead>(mut r: R) -> Result<VectorGridField> {
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io("<grid>", e))?;
    let header: Header = serde_json::from_str(line.trim())?;
    if header.shape.len() != header.d || header.origin.len() != header.d {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "header shape/origin disagree with d".into(),
        });
    }
    let mut field = VectorGridField {
        origin: header.origin,
        spacing: header.spacing,
        shape: header.shape,
        components: header.components,
        values: Vec::new(),
    };
    let width = field.dim() + field.components;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Parse {
                row: i + 2,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields"),
            });
        }
        for (col, s) in rec.iter().enumerate().skip(field.dim()) {
            let v = s.parse::<f64>().map_err(|_| Error::Parse {
                row: i + 2,
                column: col + 1,
                message: format!("'{s}' is not a number"),
            })?;
            field.values.push(v);
        }
    }
    if field.values.len() != field.node_count() * field.components {
        return Err(Error::Parse {
            row: field.values.len() / width.max(1) + 2,
            column: 1,
            message: "node count disagrees with header shape".into(),
        });
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;
    use approx::assert_relative_eq;

    fn scalar(n: usize, h: f64, d: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> VectorGridField {
        let lo = -(n as f64 - 1.0) * h / 2.0;
        VectorGridField::from_fn(vec![lo; d], h, vec![n; d], 1, |x| vec![f(x)])
    }

    #[test]
    fn fornberg_classics() {
        assert_eq!(fornberg(1, 1), vec![-0.5, 0.0, 0.5]);
        assert_eq!(fornberg(2, 1), vec![1.0, -2.0, 1.0]);
        let w = fornberg(1, 2);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let w = fornberg(2, 2);
        let expect = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_exactness() {
        let f = scalar(9, 0.25, 3, |x| x[0]);
        let d = fd_derivative(&f, &[1, 0, 0], 2).unwrap();
        assert_eq!(d.shape, vec![7, 7, 7]);
        assert!(d.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn quadratic_laplacian() {
        for d in 1..=3 {
            let f = scalar(7, 0.3, d, |x| x.iter().map(|c| c * c).sum());
            let lap = fd_laplacian(&f, 2).unwrap();
            assert!(lap.values.iter().all(|v| (v - 2.0 * d as f64).abs() < 1e-11));
        }
    }

    #[test]
    fn fourth_order_sine() {
        let h = 0.1;
        let f = scalar(41, h, 1, |x| x[0].sin());
        let d = fd_derivative(&f, &[1], 4).unwrap();
        let mut worst: f64 = 0.0;
        for node in 0..d.node_count() {
            let x = d.coords(node)[0];
            worst = worst.max((d.values[node] - x.cos()).abs());
        }
        assert!(worst <= h.powi(4) / 30.0, "{worst}");
    }

    #[test]
    fn mixed_derivative_and_margins() {
        let f = scalar(11, 0.2, 2, |x| x[0] * x[0] * x[1]);
        let d = fd_derivative(&f, &[1, 1], 2).unwrap();
        assert_eq!(d.shape, vec![9, 9]);
        for node in 0..d.node_count() {
            let x = d.coords(node);
            assert!((d.values[node] - 2.0 * x[0]).abs() < 1e-11);
        }
        let d3 = fd_derivative(&f, &[3, 0], 2).unwrap();
        assert_eq!(d3.shape, vec![7, 7]);
        assert!(fd_derivative(&scalar(5, 1.0, 1, |x| x[0]), &[3], 4).is_err());
        assert!(fd_derivative(&f, &[1, 0], 3).is_err());
    }

    #[test]
    fn single_atom_grid_is_unit() {
        let ev = RankEvaluator::exact(Measure::empirical(vec![vec![0.1, 0.2, 0.3]], None).unwrap()).unwrap();
        let g = sample_grid(&ev, -1.0, 1.0, 5).unwrap();
        for node in 0..g.node_count() {
            let v = g.value(node);
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_measure_gives_odd_field() {
        let atoms = vec![vec![1.0, 0.5], vec![-1.0, -0.5]];
        let ev = RankEvaluator::exact(Measure::empirical(atoms, None).unwrap()).unwrap();
        let g = sample_grid(&ev, -3.0, 3.0, 13).unwrap();
        let n = g.node_count();
        for node in 0..n {
            let mirror = n - 1 - node;
            for (a, b) in g.value(node).iter().zip(g.value(mirror)) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn gaussian_corner_value_and_determinism() {
        let ev = RankEvaluator::exact(Measure::gaussian(2).unwrap()).unwrap();
        let g = sample_grid(&ev, -4.0, 4.0, 41).unwrap();
        let node = g.index_of(&[40, 20]);
        assert_eq!(g.coords(node), vec![4.0, 0.0]);
        assert!((g.value(node)[0] - 0.966_938_777_053_816_4).abs() < 1e-10);
        assert_eq!(g.value(node)[1], 0.0);
        assert_eq!(g, sample_grid(&ev, -4.0, 4.0, 41).unwrap());
    }

    #[test]
    fn budget_and_preconditions() {
        let ev = RankEvaluator::exact(Measure::gaussian(3).unwrap()).unwrap();
        assert!(matches!(sample_grid(&ev, -1.0, 1.0, 216), Err(Error::Budget { .. })));
        assert!(sample_grid(&ev, -1.0, 1.0, 4).is_err());
        assert!(sample_grid(&ev, 1.0, -1.0, 5).is_err());
    }

    #[test]
    fn roundtrip_serialization() {
        let ev = RankEvaluator::exact(Measure::cauchy(2).unwrap()).unwrap();
        let g = sample_grid(&ev, -1.0, 1.0, 6).unwrap();
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with('{'));
        assert_eq!(text.lines().count(), 37);
        let back = read_grid(buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let f = scalar(8, 0.5, 2, |x| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + 1.0);
        let v = f.interpolate(&[0.37, -0.81]).unwrap()[0];
        let exact = 0.37f64.powi(3) - 2.0 * 0.37 * 0.81 * 0.81 + 1.0;
        assert_relative_eq!(v, exact, max_relative = 1e-12);
        assert!(f.interpolate(&[5.0, 0.0]).is_err());
    }
}

//! Scalar fields on a uniform, cell-centred box grid in one or two dimensions,
//! together with the discrete norms used throughout the crate.
//!
//! Storage is axis-0 fastest: the value of cell `(i, j)` lives at `i + N * j`.
//! All integrals use the cell measure `h^dim`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Ghost cells held at zero outside the box.
    DirichletZero,
    /// Wrap-around in every axis.
    Periodic,
}

/// Grid on the box `[-L, L]^dim` with `N` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize, boundary: Boundary) -> Result<Self> {
        let spec = GridSpec {
            dim,
            half_width,
            points_per_axis,
            boundary,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::input(format!("grid dim must be 1 or 2, got {}", self.dim)));
        }
        if self.points_per_axis < 3 {
            return Err(Error::input(format!(
                "points_per_axis must be >= 3, got {}",
                self.points_per_axis
            )));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::input(format!("half_width must be > 0, got {}", self.half_width)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Cell-centre coordinate along one axis.
    pub fn center(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    /// Per-axis indices of the flat index `k`.
    pub fn unravel(&self, k: usize) -> [usize; 2] {
        let n = self.points_per_axis;
        if self.dim == 1 {
            [k, 0]
        } else {
            [k % n, k / n]
        }
    }

    pub fn ravel(&self, idx: [usize; 2]) -> usize {
        idx[0] + self.points_per_axis * idx[1]
    }

    /// Coordinates of the centre of cell `k` (unused axes are zero).
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let idx = self.unravel(k);
        let y = if self.dim == 2 { self.center(idx[1]) } else { 0.0 };
        [self.center(idx[0]), y]
    }
}

/// Norms of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l1: f64,
    pub linf: f64,
    pub tv: f64,
    pub pos_linf: f64,
    pub neg_linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::input(format!(
                "expected {} values for the grid, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value {} at cell {k}", values[k])));
        }
        Ok(GridField { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        GridField {
            values: vec![0.0; spec.len()],
            spec,
        }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        GridField {
            values: vec![c; spec.len()],
            spec,
        }
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..spec.len()).map(|k| f(spec.coords(k))).collect();
        GridField::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Replaces the values, keeping the grid. Values must be finite.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridField::new(self.spec, values)
    }

    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        GridField { spec, values }
    }

    pub fn ensure_same_grid(&self, other: &GridField) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch(format!(
                "{:?} vs {:?}",
                self.spec, other.spec
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(GridField::from_raw(self.spec, values))
    }

    /// Cyclic shift by `offset` cells along `axis`: `out[i] = self[i - offset]`.
    pub fn shifted(&self, axis: usize, offset: isize) -> GridField {
        let n = self.spec.points_per_axis as isize;
        let mut out = vec![0.0; self.values.len()];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut idx = self.spec.unravel(k);
            idx[axis] = (idx[axis] as isize - offset).rem_euclid(n) as usize;
            *slot = self.values[self.spec.ravel(idx)];
        }
        GridField::from_raw(self.spec, out)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.spec.cell_volume()
    }

    /// Discrete `L^r` norm for finite `r >= 1`.
    pub fn lr_norm(&self, r: f64) -> f64 {
        lr(self.values.iter().copied(), r, self.spec.cell_volume())
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(||f_+||_inf, ||f_-||_inf)`.
    pub fn pos_neg_linf(&self) -> (f64, f64) {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        (max.max(0.0), (-min).max(0.0))
    }

    /// `||f_+||_r` and `||f_-||_r` for finite `r`.
    pub fn pos_neg_lr(&self, r: f64) -> (f64, f64) {
        let w = self.spec.cell_volume();
        (
            lr(self.values.iter().map(|v| v.max(0.0)), r, w),
            lr(self.values.iter().map(|v| (-v).max(0.0)), r, w),
        )
    }

    /// Anisotropic total variation: sum over axes of `|forward differences| * h^(dim-1)`.
    ///
    /// Periodic grids wrap; Dirichlet grids include the jumps to the zero ghost
    /// layer on both sides, so the value equals the TV of the zero extension.
    pub fn tv_norm(&self) -> f64 {
        let spec = &self.spec;
        let n = spec.points_per_axis;
        let face = spec.spacing().powi(spec.dim as i32 - 1);
        let mut total = 0.0;
        for axis in 0..spec.dim {
            for k in 0..self.values.len() {
                let idx = spec.unravel(k);
                let here = self.values[k];
                if idx[axis] + 1 < n {
                    let mut next = idx;
                    next[axis] += 1;
                    total += (self.values[spec.ravel(next)] - here).abs();
                } else {
                    match spec.boundary {
                        Boundary::Periodic => {
                            let mut next = idx;
                            next[axis] = 0;
                            total += (self.values[spec.ravel(next)] - here).abs();
                        }
                        Boundary::DirichletZero => total += here.abs(),
                    }
                }
                if idx[axis] == 0 && spec.boundary == Boundary::DirichletZero {
                    total += here.abs();
                }
            }
        }
        total * face
    }

    pub fn norms(&self) -> NormReport {
        let (pos_linf, neg_linf) = self.pos_neg_linf();
        NormReport {
            l1: self.l1_norm(),
            linf: self.linf_norm(),
            tv: self.tv_norm(),
            pos_linf,
            neg_linf,
        }
    }

    pub fn l1_distance(&self, other: &GridField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.spec.cell_volume())
    }

    /// Integral of the field (signed).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Share of the L1 mass held by the outermost cell layer.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.spec.points_per_axis;
        let edge: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let idx = self.spec.unravel(*k);
                (0..self.spec.dim).any(|a| idx[a] == 0 || idx[a] == n - 1)
            })
            .map(|(_, v)| v.abs())
            .sum();
        edge / total
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.spec.dim == 1 {
            w.write_record(["i", "value"])?;
        } else {
            w.write_record(["i", "j", "value"])?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let idx = self.spec.unravel(k);
            // `Display` for f64 prints the shortest representation that round-trips.
            let value = v.to_string();
            if self.spec.dim == 1 {
                w.write_record([idx[0].to_string(), value])?;
            } else {
                w.write_record([idx[0].to_string(), idx[1].to_string(), value])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(spec: GridSpec, reader: R) -> Result<Self> {
        spec.validate()?;
        let mut r = csv::Reader::from_reader(reader);
        let mut values = vec![f64::NAN; spec.len()];
        let mut seen = vec![false; spec.len()];
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != spec.dim + 1 {
                return Err(Error::input(format!(
                    "expected {} columns, got {}",
                    spec.dim + 1,
                    rec.len()
                )));
            }
            let mut idx = [0usize; 2];
            for (a, slot) in idx.iter_mut().enumerate().take(spec.dim) {
                *slot = rec[a]
                    .trim()
                    .parse()
                    .map_err(|e| Error::input(format!("bad index {:?}: {e}", &rec[a])))?;
                if *slot >= spec.points_per_axis {
                    return Err(Error::input(format!("index {} out of range", *slot)));
                }
            }
            let v: f64 = rec[spec.dim]
                .trim()
                .parse()
                .map_err(|e| Error::input(format!("bad value {:?}: {e}", &rec[spec.dim])))?;
            let k = spec.ravel(idx);
            if seen[k] {
                return Err(Error::input(format!("duplicate cell {idx:?}")));
            }
            seen[k] = true;
            values[k] = v;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::input(format!("missing cell {:?}", spec.unravel(k))));
        }
        GridField::new(spec, values)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(spec: GridSpec, path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        GridField::read_csv(spec, std::io::BufReader::new(file))
    }
}

fn lr(values: impl Iterator<Item = f64>, r: f64, weight: f64) -> f64 {
    if r == 1.0 {
        return values.map(f64::abs).sum::<f64>() * weight;
    }
    if r == 2.0 {
        return (values.map(|v| v * v).sum::<f64>() * weight).sqrt();
    }
    (values.map(|v| v.abs().powf(r)).sum::<f64>() * weight).powf(1.0 / r)
}

/// Axis-aligned box made of whole cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Window { lo, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Window {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    /// Parses the flat `[lo_1, hi_1, (lo_2, hi_2)]` form used in observation files.
    pub fn from_flat(bounds: &[f64]) -> Result<Self> {
        if bounds.is_empty() || !bounds.len().is_multiple_of(2) || bounds.len() > 4 {
            return Err(Error::input(format!(
                "window needs [lo, hi] per axis, got {bounds:?}"
            )));
        }
        Ok(Window {
            lo: bounds.iter().step_by(2).copied().collect(),
            hi: bounds.iter().skip(1).step_by(2).copied().collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).flat_map(|(a, b)| [*a, *b]).collect()
    }

    /// Per-axis half-open cell-index ranges covered by the window.
    pub fn cell_ranges(&self, spec: &GridSpec) -> Result<[(usize, usize); 2]> {
        if self.lo.len() != spec.dim || self.hi.len() != spec.dim {
            return Err(Error::input(format!(
                "window has {} axes, grid has {}",
                self.lo.len(),
                spec.dim
            )));
        }
        let h = spec.spacing();
        let n = spec.points_per_axis as f64;
        let snap = |x: f64| ((x + spec.half_width) / h).round().clamp(0.0, n);
        let mut ranges = [(0usize, 1usize); 2];
        let mut aligned = true;
        let mut nearest_lo = Vec::with_capacity(spec.dim);
        let mut nearest_hi = Vec::with_capacity(spec.dim);
        for a in 0..spec.dim {
            let (lo, hi) = (self.lo[a], self.hi[a]);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::input(format!("window axis {a} has lo > hi or non-finite bounds")));
            }
            let (klo, khi) = (snap(lo), snap(hi));
            let xlo = -spec.half_width + klo * h;
            let xhi = -spec.half_width + khi * h;
            let tol = 1e-9 * h;
            if (xlo - lo).abs() > tol || (xhi - hi).abs() > tol {
                aligned = false;
            }
            nearest_lo.push(xlo);
            nearest_hi.push(xhi);
            ranges[a] = (klo as usize, khi as usize);
        }
        if !aligned {
            return Err(Error::UnalignedWindow {
                lo: self.lo.clone(),
                hi: self.hi.clone(),
                nearest_lo,
                nearest_hi,
            });
        }
        Ok(ranges)
    }

    /// Flat indices of the cells inside the window.
    pub fn cells(&self, spec: &GridSpec) -> Result<Vec<usize>> {
        let r = self.cell_ranges(spec)?;
        let mut out = Vec::new();
        for j in r[1].0..r[1].1 {
            for i in r[0].0..r[0].1 {
                out.push(spec.ravel([i, j]));
            }
        }
        Ok(out)
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((a0, a1), (b0, b1))| a0.max(*b0) < a1.min(*b1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize, boundary: Boundary) -> GridSpec {
        GridSpec::new(1, 1.0, n, boundary).unwrap()
    }

    #[test]
    fn l1_of_unit_constant_is_box_length() {
        for n in [3, 4, 17, 128] {
            let f = GridField::constant(line(n, Boundary::DirichletZero), 1.0);
            assert!((f.l1_norm() - 2.0).abs() < 1e-14);
        }
        assert_eq!(GridField::zeros(line(8, Boundary::Periodic)).l1_norm(), 0.0);
    }

    #[test]
    fn l1_of_left_half_indicator() {
        // N=4 on [-1,1]: cells of width 0.5, two of them on the left.
        let spec = line(4, Boundary::DirichletZero);
        let f = GridField::from_fn(spec, |x| if x[0] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let oracle: f64 = f.values().iter().map(|v| v.abs() * 0.5).sum();
        assert_eq!(oracle, 1.0);
        assert_eq!(f.l1_norm(), oracle);
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let spec = line(4, Boundary::Periodic);
        assert!(GridField::new(spec, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(GridField::new(spec, vec![0.0; 3]).is_err());
        assert!(GridSpec::new(1, 1.0, 2, Boundary::Periodic).is_err());
        assert!(GridSpec::new(3, 1.0, 8, Boundary::Periodic).is_err());
        assert!(GridSpec::new(1, 0.0, 8, Boundary::Periodic).is_err());
    }

    #[test]
    fn tv_examples() {
        let spec = line(10, Boundary::Periodic);
        assert_eq!(GridField::constant(spec, 3.7).tv_norm(), 0.0);

        let step = GridField::from_fn(spec, |x| if x[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(step.tv_norm(), 2.0);

        for boundary in [Boundary::Periodic, Boundary::DirichletZero] {
            let spec = line(9, boundary);
            let mut v = vec![0.0; 9];
            v[4] = 2.5;
            let peak = GridField::new(spec, v.clone()).unwrap();
            let mut oracle = 0.0;
            for i in 0..8 {
                oracle += f64::abs(v[i + 1] - v[i]);
            }
            assert_eq!(oracle, 5.0);
            assert_eq!(peak.tv_norm(), oracle);
        }
    }

    #[test]
    fn tv_2d_counts_both_axes() {
        let spec = GridSpec::new(2, 1.0, 4, Boundary::DirichletZero).unwrap();
        let mut v = vec![0.0; 16];
        v[spec.ravel([1, 1])] = 1.0;
        let f = GridField::new(spec, v).unwrap();
        // Four unit jumps of face length h = 0.5.
        assert!((f.tv_norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pos_neg_examples() {
        let spec = line(4, Boundary::Periodic);
        assert_eq!(GridField::constant(spec, -3.0).pos_neg_linf(), (0.0, 3.0));
        assert_eq!(GridField::zeros(spec).pos_neg_linf(), (0.0, 0.0));
        let f = GridField::new(spec, vec![-1.0, 2.0, 2.0, -1.0]).unwrap();
        assert_eq!(f.pos_neg_linf(), (2.0, 1.0));
    }

    #[test]
    fn distance_examples_and_mismatch() {
        let spec = line(16, Boundary::DirichletZero);
        let one = GridField::constant(spec, 1.0);
        let zero = GridField::zeros(spec);
        assert_eq!(one.l1_distance(&one).unwrap(), 0.0);
        assert!((one.l1_distance(&zero).unwrap() - 2.0).abs() < 1e-14);
        let other = GridField::zeros(line(8, Boundary::DirichletZero));
        assert!(matches!(one.l1_distance(&other), Err(Error::SpecMismatch(_))));
    }

    #[test]
    fn distance_matches_direct_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let spec = GridSpec::new(2, 1.5, 12, Boundary::Periodic).unwrap();
        let f = GridField::from_fn(spec, |_| 0.0).unwrap();
        let a = f.with_values((0..144).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let b = f.with_values((0..144).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let h = spec.spacing();
        let mut oracle = 0.0;
        for k in 0..144 {
            oracle += (a.values()[k] - b.values()[k]).abs() * h * h;
        }
        assert!((a.l1_distance(&b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let spec = GridSpec::new(2, 1.0, 5, Boundary::DirichletZero).unwrap();
        let f = GridField::from_fn(spec, |x| (x[0] * 3.1).sin() / 7.0 + x[1] * 1e-300).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,j,value\n"));
        let g = GridField::read_csv(spec, buf.as_slice()).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn window_alignment() {
        let spec = line(8, Boundary::DirichletZero);
        let w = Window::interval(-0.5, 0.5);
        assert_eq!(w.cells(&spec).unwrap(), vec![2, 3, 4, 5]);
        assert!(Window::interval(0.0, 0.0).cells(&spec).unwrap().is_empty());
        match Window::interval(-0.4, 0.5).cells(&spec) {
            Err(Error::UnalignedWindow { nearest_lo, .. }) => assert_eq!(nearest_lo, vec![-0.5]),
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn boundary_fraction() {
        let spec = line(10, Boundary::DirichletZero);
        let mut v = vec![0.0; 10];
        v[5] = 1.0;
        assert_eq!(GridField::new(spec, v.clone()).unwrap().boundary_mass_fraction(), 0.0);
        v[0] = 1.0;
        assert_eq!(GridField::new(spec, v).unwrap().boundary_mass_fraction(), 0.5);
    }

    fn field_strategy() -> impl Strategy<Value = GridField> {
        (3usize..40).prop_flat_map(|n| {
            proptest::collection::vec(-5.0f64..5.0, n).prop_map(move |v| {
                GridField::new(GridSpec::new(1, 1.0, n, Boundary::Periodic).unwrap(), v).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn piecewise_constant_quadrature_is_exact(v in proptest::collection::vec(-5.0f64..5.0, 3..50)) {
            let n = v.len();
            let f = GridField::new(GridSpec::new(1, 2.0, n, Boundary::DirichletZero).unwrap(), v.clone()).unwrap();
            let exact: f64 = v.iter().map(|x| x.abs()).sum::<f64>() * (4.0 / n as f64);
            prop_assert!((f.l1_norm() - exact).abs() <= 1e-13 * (1.0 + exact));
        }

        #[test]
        fn tv_is_shift_invariant_on_periodic(f in field_strategy(), offset in -5isize..5) {
            let (a, b) = (f.shifted(0, offset).tv_norm(), f.tv_norm());
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b));
        }

        #[test]
        fn distance_is_a_metric(
            v in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 3..30)
        ) {
            let n = v.len();
            let spec = GridSpec::new(1, 1.0, n, Boundary::Periodic).unwrap();
            let f = GridField::new(spec, v.iter().map(|t| t.0).collect()).unwrap();
            let g = GridField::new(spec, v.iter().map(|t| t.1).collect()).unwrap();
            let h = GridField::new(spec, v.iter().map(|t| t.2).collect()).unwrap();
            let fg = f.l1_distance(&g).unwrap();
            prop_assert_eq!(fg, g.l1_distance(&f).unwrap());
            let bound = f.l1_distance(&h).unwrap() + h.l1_distance(&g).unwrap();
            prop_assert!(fg <= bound * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn linf_is_max_of_parts(f in field_strategy()) {
            let r = f.norms();
            prop_assert_eq!(r.linf, r.pos_linf.max(r.neg_linf));
        }
    }
}

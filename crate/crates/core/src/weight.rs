//! The weight `l(x)^alpha` at quadrature points and the Muckenhoupt `A_p` estimator.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Domain, MixingLength};
use crate::grid::{indices, Grid};

/// Where a set of samples lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLocation {
    /// Corner quadrature points, in [`Grid::for_each_corner`] order.
    Corners,
    /// Cell centers, in storage order.
    CellCenters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSamples {
    pub alpha: f64,
    pub values: Vec<f64>,
    pub location: SampleLocation,
    grid: Grid,
}

impl WeightSamples {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Pointwise product; the exponents add.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.location != other.location || self.grid != other.grid {
            return Err(Error::Argument("weights sampled at different locations".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self { alpha: self.alpha + other.alpha, values, location: self.location, grid: self.grid })
    }
}

/// `l(x)^exponent` at the requested locations, for any real exponent.
///
/// Negative exponents are what the inequality estimators need; the solver
/// only ever uses [`weight_field`].
pub fn power_samples(grid: &Grid, ml: &MixingLength, exponent: f64, location: SampleLocation) -> WeightSamples {
    let dom = grid.domain();
    let f = |x: [f64; 3]| {
        let l = ml.of_distance(dom.distance_unchecked(x));
        if exponent == 0.0 {
            1.0
        } else {
            libm::pow(l, exponent)
        }
    };
    let values = match location {
        SampleLocation::Corners => {
            let mut v = Vec::with_capacity(grid.n_corners());
            grid.for_each_corner(|_, c, b| v.push(f(grid.corner_point(c, b))));
            v
        }
        SampleLocation::CellCenters => indices(grid.cell_shape()).map(|c| f(grid.cell_center(c))).collect(),
    };
    WeightSamples { alpha: exponent, values, location, grid: *grid }
}

/// Weight `l^alpha` at the corner quadrature points.
pub fn weight_field(grid: &Grid, ml: &MixingLength, alpha: f64) -> Result<WeightSamples> {
    weight_field_at(grid, ml, alpha, SampleLocation::Corners)
}

pub fn weight_field_at(grid: &Grid, ml: &MixingLength, alpha: f64, location: SampleLocation) -> Result<WeightSamples> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Argument(format!("weight exponent must be finite and >= 0, got {alpha}")));
    }
    ml.validate()?;
    Ok(power_samples(grid, ml, alpha, location))
}

/// Axis-aligned cube with its own midpoint-rule resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub origin: [f64; 3],
    pub side: f64,
    pub cells_per_side: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CubeFamily {
    pub cubes: Vec<Cube>,
}

impl CubeFamily {
    /// Wall-touching cubes of sides `s0, s0/2, s0/4, ...` resolved with the
    /// uniform spacing `s0 / n`, down to cubes one quadrature cell wide.
    ///
    /// The cubes sit on the lower wall of `wall_axis`, centered in the other axes.
    pub fn near_wall(domain: &Domain, wall_axis: usize, s0: f64, n: usize) -> Result<Self> {
        if !domain.is_wall(wall_axis) {
            return Err(Error::Argument(format!("axis {wall_axis} carries no wall")));
        }
        if n == 0 || !(s0 > 0.0) {
            return Err(Error::Argument("cube family needs a positive side and resolution".into()));
        }
        let ext = domain.extents();
        let mut cubes = Vec::new();
        let mut side = s0;
        let mut m = n;
        while m >= 1 {
            let mut origin = [0.0; 3];
            for a in 0..domain.dims() {
                if a != wall_axis {
                    origin[a] = 0.5 * (ext[a] - side);
                }
            }
            cubes.push(Cube { origin, side, cells_per_side: m });
            if m == 1 {
                break;
            }
            side *= 0.5;
            m /= 2;
        }
        Ok(Self { cubes })
    }

    /// Refinement level `k` of the near-wall family used for `A_p` sweeps:
    /// `2 * 8^k` quadrature cells across the largest cube of side 1/2.
    pub fn ap_level(domain: &Domain, k: u32) -> Result<Self> {
        let axis = domain.wall_axes().next().ok_or_else(|| Error::Domain("no wall".into()))?;
        let s0 = 0.5 * domain.extents()[axis];
        Self::near_wall(domain, axis, s0, 2 * 8usize.pow(k))
    }
}

/// Lower bound for the `A_p` constant of `d^alpha` over a cube family:
/// `max_Q (avg_Q d^alpha) (avg_Q d^{alpha/(1-p)})^{p-1}`, midpoint rule on each cube.
pub fn muckenhoupt_constant(domain: &Domain, alpha: f64, p: f64, family: &CubeFamily) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Argument(format!("p must exceed 1, got {p}")));
    }
    if family.cubes.is_empty() {
        return Err(Error::Argument("empty cube family".into()));
    }
    let dual = alpha / (1.0 - p);
    let mut best = 0.0f64;
    for cube in &family.cubes {
        let (a, b) = cube_averages(domain, cube, alpha, dual)?;
        let v = a * libm::pow(b, p - 1.0);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite A_p product on cube {cube:?}")));
        }
        best = best.max(v);
    }
    Ok(best)
}

/// Averages of `d^e1` and `d^e2` over the part of `cube` inside the domain.
fn cube_averages(domain: &Domain, cube: &Cube, e1: f64, e2: f64) -> Result<(f64, f64)> {
    let dims = domain.dims();
    let ext = domain.extents();
    let m = cube.cells_per_side;
    if m == 0 || !(cube.side > 0.0) {
        return Err(Error::Argument("cube needs a positive side and resolution".into()));
    }
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..dims {
        lo[a] = cube.origin[a];
        hi[a] = cube.origin[a] + cube.side;
        if domain.is_wall(a) {
            lo[a] = lo[a].max(0.0);
            hi[a] = hi[a].min(ext[a]);
            if !(hi[a] > lo[a]) {
                return Err(Error::Domain(format!("cube does not meet the domain along axis {a}")));
            }
        }
    }
    let pw = |d: f64, e: f64| if e == 0.0 { 1.0 } else { libm::pow(d, e) };
    if let Some(w) = domain.single_wall_axis() {
        // the distance only depends on one coordinate: the cube average is a 1D average
        let h = (hi[w] - lo[w]) / m as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..m {
            let z = lo[w] + (i as f64 + 0.5) * h;
            let d = z.min(ext[w] - z);
            s1 += pw(d, e1);
            s2 += pw(d, e2);
        }
        return Ok((s1 / m as f64, s2 / m as f64));
    }
    let counts = [m, m, if dims == 3 { m } else { 1 }];
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let mut x = [0.0; 3];
                for (a, ia) in [i, j, k].into_iter().enumerate().take(dims) {
                    x[a] = lo[a] + (ia as f64 + 0.5) * (hi[a] - lo[a]) / m as f64;
                }
                let d = domain.distance_unchecked(x);
                s1 += pw(d, e1);
                s2 += pw(d, e2);
            }
        }
    }
    let n = (counts[0] * counts[1] * counts[2]) as f64;
    Ok((s1 / n, s2 / n))
}

/// `A_p` estimates for levels `0..levels` of [`CubeFamily::ap_level`].
pub fn ap_levels(domain: &Domain, alpha: f64, p: f64, levels: u32) -> Result<Vec<f64>> {
    (0..levels).map(|k| muckenhoupt_constant(domain, alpha, p, &CubeFamily::ap_level(domain, k)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MixingVariant;

    fn channel() -> Domain {
        Domain::channel(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn alpha_zero_gives_ones() {
        let g = Grid::new(channel(), [4, 4, 4]).unwrap();
        let w = weight_field(&g, &MixingLength::default(), 0.0).unwrap();
        assert!(w.values.iter().all(|&v| v == 1.0));
        assert_eq!(w.values.len(), g.n_corners());
    }

    #[test]
    fn cell_center_sample_at_half() {
        let g = Grid::new(channel(), [2, 2, 5]).unwrap();
        let w = weight_field_at(&g, &MixingLength::default(), 2.0, SampleLocation::CellCenters).unwrap();
        let cs = g.cell_shape();
        assert!((w.values[cs.idx(0, 0, 2)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negative_alpha_rejected() {
        let g = Grid::new(channel(), [4, 4, 4]).unwrap();
        assert!(weight_field(&g, &MixingLength::default(), -0.5).is_err());
    }

    #[test]
    fn near_wall_samples_shrink_but_stay_positive() {
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16, 32, 64] {
            let g = Grid::new(channel(), [1, 1, n]).unwrap();
            let w = weight_field(&g, &MixingLength::default(), 2.0).unwrap();
            let m = w.values.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(m > 0.0 && m < prev);
            prev = m;
        }
    }

    #[test]
    fn exponents_add_under_product() {
        let g = Grid::new(Domain::box3d(1.0, 1.0, 1.0).unwrap(), [4, 5, 4]).unwrap();
        let ml = MixingLength { variant: MixingVariant::VanDriest, damping: 0.1, ..Default::default() };
        let a = weight_field(&g, &ml, 0.7).unwrap();
        let b = weight_field(&g, &ml, 1.3).unwrap();
        let ab = weight_field(&g, &ml, 2.0).unwrap();
        for (x, y) in a.product(&b).unwrap().values.iter().zip(&ab.values) {
            assert!((x - y).abs() <= 4.0 * f64::EPSILON * y);
        }
    }

    #[test]
    fn ap_constant_is_one_for_constant_weight() {
        for d in [channel(), Domain::box3d(1.0, 1.0, 1.0).unwrap()] {
            let fam = CubeFamily::near_wall(&d, 2, 0.5, 8).unwrap();
            assert!((muckenhoupt_constant(&d, 0.0, 3.0, &fam).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(muckenhoupt_constant(&channel(), 1.0, 3.0, &CubeFamily::default()).is_err());
    }

    #[test]
    fn ap_constant_at_least_one_and_monotone_in_alpha() {
        let d = channel();
        let fam = CubeFamily::ap_level(&d, 2).unwrap();
        let mut prev = 1.0;
        for i in 0..20 {
            let alpha = 0.1 * i as f64;
            let v = muckenhoupt_constant(&d, alpha, 3.0, &fam).unwrap();
            assert!(v >= prev - 1e-12, "{alpha}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn one_dimensional_reduction_matches_full_quadrature() {
        let d = channel();
        let cube = Cube { origin: [0.2, 0.3, 0.0], side: 0.25, cells_per_side: 8 };
        let (a, b) = cube_averages(&d, &cube, 1.5, -0.75).unwrap();
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..8 {
            let z = (k as f64 + 0.5) * 0.25 / 8.0;
            s1 += libm::pow(z, 1.5) / 8.0;
            s2 += libm::pow(z, -0.75) / 8.0;
        }
        assert!((a - s1).abs() < 1e-15 && (b - s2).abs() < 1e-13);
    }

    #[test]
    fn log_divergence_at_critical_exponent() {
        // midpoint averages: z^2 -> s^2 S2, z^{-1} -> H / s, so the product is S2 H^2 for every side s
        let d = channel();
        let fam = CubeFamily { cubes: alloc::vec![Cube { origin: [0.0; 3], side: 0.5, cells_per_side: 64 }] };
        let v = muckenhoupt_constant(&d, 2.0, 3.0, &fam).unwrap();
        let h: f64 = (0..64).map(|i| 1.0 / (i as f64 + 0.5)).sum();
        let s2: f64 = (0..64).map(|i| ((i as f64 + 0.5) / 64.0).powi(2)).sum::<f64>() / 64.0;
        assert!((v - s2 * h * h).abs() < 1e-12 * v);
    }
}

//! Box and channel domains, the wall-distance function and mixing-length laws.

use alloc::format;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Box3d,
    Channel3d,
    Box2d,
}

/// Axis-aligned domain `(0, L_x) x (0, L_y) [x (0, L_z)]`.
///
/// Axes flagged in `walls` carry homogeneous Dirichlet walls at both ends;
/// the remaining axes are periodic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    extents: [f64; 3],
    walls: [bool; 3],
}

impl Domain {
    pub fn new(kind: DomainKind, extents: [f64; 3], walls: [bool; 3]) -> Result<Self> {
        let dims = if kind == DomainKind::Box2d { 2 } else { 3 };
        for (a, &e) in extents.iter().enumerate().take(dims) {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Domain(format!("extent along axis {a} must be positive, got {e}")));
            }
        }
        let mut walls = walls;
        let mut extents = extents;
        if dims == 2 {
            walls[2] = false;
            extents[2] = 1.0;
        }
        if !walls.iter().take(dims).any(|&w| w) {
            return Err(Error::Domain("at least one axis must carry a wall".into()));
        }
        Ok(Self { kind, extents, walls })
    }

    /// Unit-height channel: walls at `z = 0` and `z = L_z`, periodic in x and y.
    pub fn channel(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        Self::new(DomainKind::Channel3d, [lx, ly, lz], [false, false, true])
    }

    pub fn box3d(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        Self::new(DomainKind::Box3d, [lx, ly, lz], [true, true, true])
    }

    pub fn box2d(lx: f64, ly: f64) -> Result<Self> {
        Self::new(DomainKind::Box2d, [lx, ly, 1.0], [true, true, false])
    }

    /// Two-dimensional channel, periodic in x with walls at `y = 0, L_y`.
    pub fn channel2d(lx: f64, ly: f64) -> Result<Self> {
        Self::new(DomainKind::Box2d, [lx, ly, 1.0], [false, true, false])
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dims(&self) -> usize {
        if self.kind == DomainKind::Box2d {
            2
        } else {
            3
        }
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn walls(&self) -> [bool; 3] {
        self.walls
    }

    pub fn is_wall(&self, axis: usize) -> bool {
        self.walls[axis]
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().take(self.dims()).product()
    }

    /// Wall axes that matter for the distance function.
    pub fn wall_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dims()).filter(move |&a| self.walls[a])
    }

    /// Distance from `x` to the nearest wall.
    ///
    /// Points on a wall or outside the box are rejected: the weight `d^alpha`
    /// is only ever evaluated where it is strictly positive.
    pub fn distance(&self, x: [f64; 3]) -> Result<f64> {
        let mut d = f64::INFINITY;
        for a in 0..self.dims() {
            let l = self.extents[a];
            if self.walls[a] {
                if !(x[a] > 0.0 && x[a] < l) {
                    return Err(Error::Domain(format!(
                        "point {:?} is not strictly inside along wall axis {a}",
                        &x[..self.dims()]
                    )));
                }
                d = d.min(x[a]).min(l - x[a]);
            } else if !(x[a] >= 0.0 && x[a] <= l) {
                return Err(Error::Domain(format!("point {:?} is outside the domain", &x[..self.dims()])));
            }
        }
        Ok(d)
    }

    /// Distance without bounds checks, for quadrature points that are interior by construction.
    #[inline]
    pub(crate) fn distance_unchecked(&self, x: [f64; 3]) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..self.dims() {
            if self.walls[a] {
                d = d.min(x[a]).min(self.extents[a] - x[a]);
            }
        }
        d
    }

    /// True when the distance only varies along one axis (single wall pair).
    pub fn single_wall_axis(&self) -> Option<usize> {
        let mut it = self.wall_axes();
        let first = it.next()?;
        if it.next().is_some() {
            None
        } else {
            Some(first)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingVariant {
    /// `l = d`
    Distance,
    /// `l = kappa d`
    Obukhov,
    /// `l = kappa d (1 - exp(-d/A))`
    VanDriest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingLength {
    pub variant: MixingVariant,
    pub kappa: f64,
    /// Van Driest damping length `A`.
    pub damping: f64,
    /// Reference length `l0 = nu / v_*`.
    pub ell0: f64,
}

impl Default for MixingLength {
    fn default() -> Self {
        Self { variant: MixingVariant::Distance, kappa: 0.41, damping: 26.0e-3, ell0: 1.0 }
    }
}

impl MixingLength {
    pub fn distance() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::Argument(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.damping > 0.0) {
            return Err(Error::Argument(format!("damping length A must be positive, got {}", self.damping)));
        }
        if !(self.ell0 > 0.0) {
            return Err(Error::Argument(format!("ell0 must be positive, got {}", self.ell0)));
        }
        Ok(())
    }

    /// Mixing length as a function of wall distance.
    #[inline]
    pub fn of_distance(&self, d: f64) -> f64 {
        match self.variant {
            MixingVariant::Distance => d,
            MixingVariant::Obukhov => self.kappa * d,
            // -expm1(-x) = 1 - e^{-x} without cancellation near the wall
            MixingVariant::VanDriest => self.kappa * d * -libm::expm1(-d / self.damping),
        }
    }

    pub fn at(&self, domain: &Domain, x: [f64; 3]) -> Result<f64> {
        Ok(self.of_distance(domain.distance(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_distance_is_nearest_wall() {
        let c = Domain::channel(1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.distance([0.3, 0.7, 0.25]).unwrap(), 0.25);
        assert_eq!(c.distance([0.3, 0.7, 0.9]).unwrap(), 0.09999999999999998);
    }

    #[test]
    fn box_center() {
        let b = Domain::box3d(1.0, 1.0, 1.0).unwrap();
        assert_eq!(b.distance([0.5, 0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn wall_points_rejected() {
        let c = Domain::channel(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(c.distance([0.5, 0.5, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(c.distance([0.5, 0.5, 1.2]), Err(Error::Domain(_))));
        assert!(matches!(c.distance([1.5, 0.5, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn domain_needs_a_wall_and_positive_extents() {
        assert!(Domain::new(DomainKind::Box3d, [1.0, 1.0, 1.0], [false; 3]).is_err());
        assert!(Domain::box3d(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn obukhov_law() {
        let ml = MixingLength { variant: MixingVariant::Obukhov, ..Default::default() };
        assert!((ml.of_distance(1.0) - 0.41).abs() < 1e-15);
    }

    #[test]
    fn van_driest_far_field_matches_obukhov() {
        let a = 0.1;
        let vd = MixingLength { variant: MixingVariant::VanDriest, damping: a, ..Default::default() };
        let ob = MixingLength { variant: MixingVariant::Obukhov, ..Default::default() };
        let d = 20.0 * a;
        assert!((vd.of_distance(d) / ob.of_distance(d) - 1.0).abs() < 1e-6);
        let d = 30.0 * a;
        assert!((vd.of_distance(d) / ob.of_distance(d) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn van_driest_near_wall_is_quadratic() {
        // Taylor: kappa d (1 - e^{-d/A}) = kappa d^2/A (1 - d/(2A) + ...)
        let a = 0.5;
        let vd = MixingLength { variant: MixingVariant::VanDriest, damping: a, ..Default::default() };
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let d = 10f64.powi(-k);
            let ratio = vd.of_distance(d) / (vd.kappa * d * d / a);
            let err = (ratio - 1.0).abs();
            assert!((err - d / (2.0 * a)).abs() < d * d / a / a);
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn mixing_length_monotone_in_distance() {
        for variant in [MixingVariant::Distance, MixingVariant::Obukhov, MixingVariant::VanDriest] {
            let ml = MixingLength { variant, damping: 0.05, ..Default::default() };
            let mut prev = 0.0;
            for i in 1..500 {
                let l = ml.of_distance(i as f64 * 1e-3);
                assert!(l >= prev && l > 0.0);
                prev = l;
            }
        }
    }
}

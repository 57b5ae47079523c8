use crate::error::{Error, Result};
use crate::scalar::Real;

/// Grid index padded to three dimensions; unused trailing axes are zero.
pub type Index3 = [usize; 3];
/// Point padded to three dimensions.
pub type Point3<T> = [T; 3];

/// Uniform Cartesian grid with one to three axes.
///
/// The last axis is vertical (elevation). Flat indices are row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid<T> {
    ndims: usize,
    shape: [usize; 3],
    spacing: [T; 3],
    origin: [T; 3],
}

impl<T: Real> CartesianGrid<T> {
    pub fn new(shape: &[usize], spacing: &[T], origin: &[T]) -> Result<Self> {
        let ndims = shape.len();
        if !(1..=3).contains(&ndims) {
            return Err(Error::config("grid.shape", format!("expected 1 to 3 axes, got {ndims}")));
        }
        if spacing.len() != ndims {
            return Err(Error::config("grid.spacing", "length differs from grid.shape"));
        }
        if origin.len() != ndims {
            return Err(Error::config("grid.origin", "length differs from grid.shape"));
        }
        if let Some(n) = shape.iter().find(|&&n| n < 4) {
            return Err(Error::config("grid.shape", format!("every axis needs at least 4 nodes, got {n}")));
        }
        if spacing.iter().any(|&h| !(h > T::zero()) || !h.is_finite()) {
            return Err(Error::config("grid.spacing", "spacings must be finite and positive"));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::config("grid.origin", "origin must be finite"));
        }
        let mut s = [1usize; 3];
        let mut h = [T::one(); 3];
        let mut o = [T::zero(); 3];
        s[..ndims].copy_from_slice(shape);
        h[..ndims].copy_from_slice(spacing);
        o[..ndims].copy_from_slice(origin);
        Ok(Self {
            ndims,
            shape: s,
            spacing: h,
            origin: o,
        })
    }

    /// Grid with unit spacing and zero origin.
    pub fn unit(shape: &[usize]) -> Result<Self> {
        let n = shape.len();
        Self::new(shape, &vec![T::one(); n], &vec![T::zero(); n])
    }

    #[inline]
    pub fn ndims(&self) -> usize {
        self.ndims
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.ndims]
    }

    #[inline]
    pub fn shape3(&self) -> [usize; 3] {
        self.shape
    }

    #[inline]
    pub fn spacing(&self) -> &[T] {
        &self.spacing[..self.ndims]
    }

    #[inline]
    pub fn spacing3(&self) -> [T; 3] {
        self.spacing
    }

    #[inline]
    pub fn origin(&self) -> &[T] {
        &self.origin[..self.ndims]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn min_spacing(&self) -> T {
        self.spacing().iter().copied().fold(T::infinity(), T::min)
    }

    /// Flat strides per axis (padded).
    #[inline]
    pub fn strides(&self) -> [usize; 3] {
        [self.shape[1] * self.shape[2], self.shape[2], 1]
    }

    #[inline]
    pub fn flat(&self, idx: Index3) -> usize {
        (idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]
    }

    #[inline]
    pub fn unflat(&self, flat: usize) -> Index3 {
        let i2 = flat % self.shape[2];
        let rest = flat / self.shape[2];
        [rest / self.shape[1], rest % self.shape[1], i2]
    }

    #[inline]
    pub fn position(&self, idx: Index3) -> Point3<T> {
        let mut p = [T::zero(); 3];
        for n in 0..self.ndims {
            p[n] = self.origin[n] + T::from_usize_lossy(idx[n]) * self.spacing[n];
        }
        p
    }

    /// Index displaced by a signed offset, or `None` outside the grid.
    #[inline]
    pub fn offset(&self, idx: Index3, off: [i32; 3]) -> Option<Index3> {
        let mut out = [0usize; 3];
        for n in 0..3 {
            let v = idx[n] as i64 + off[n] as i64;
            if v < 0 || v >= self.shape[n] as i64 {
                return None;
            }
            out[n] = v as usize;
        }
        Some(out)
    }

    /// Copy of this grid shifted by half a cell along `axis`.
    pub fn staggered(&self, axis: usize) -> Self {
        let mut g = self.clone();
        g.origin[axis] = g.origin[axis] + self.spacing[axis] * T::lit(0.5);
        g
    }

    /// Continuous index coordinate of a point along each axis.
    #[inline]
    pub fn fractional_index(&self, p: &Point3<T>) -> [T; 3] {
        let mut f = [T::zero(); 3];
        for n in 0..self.ndims {
            f[n] = (p[n] - self.origin[n]) / self.spacing[n];
        }
        f
    }

    /// Nearest node to a point, or `None` if it falls outside the grid.
    pub fn nearest(&self, p: &Point3<T>) -> Option<Index3> {
        let f = self.fractional_index(p);
        let mut idx = [0usize; 3];
        for n in 0..self.ndims {
            let r = f[n].round();
            if r < T::zero() || r > T::from_usize_lossy(self.shape[n] - 1) {
                return None;
            }
            idx[n] = r.to_usize().unwrap_or(0);
        }
        Some(idx)
    }

    /// Iterator over every padded index in flat order.
    pub fn indices(&self) -> impl Iterator<Item = Index3> + '_ {
        (0..self.len()).map(move |f| self.unflat(f))
    }

    /// Grids are layout-compatible when they share shape and spacing.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.ndims == other.ndims && self.shape == other.shape && self.spacing == other.spacing
    }
}

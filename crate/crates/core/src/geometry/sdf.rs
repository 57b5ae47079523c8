use std::sync::Arc;

use rayon::prelude::*;

use super::dem::{DemSurface, EsriAsciiGrid};
use super::grid::{CartesianGrid, Index3, Point3};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which side of an elevation surface is the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    /// Domain lies below the surface (free surface seen from the ground).
    #[default]
    Below,
    /// Domain lies above the surface (air over rigid ground).
    Above,
}

/// Elevation surface `z = h(x_horizontal)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Elevation<T> {
    /// `z = height + Σ slope_n (x_n − pivot_n)`.
    Plane { height: T, slopes: [T; 2], pivot: [T; 2] },
    /// `z = base + amplitude · Π_n cos(2π (x_n − centre_n) / wavelength)`.
    SinusoidalHill {
        base: T,
        amplitude: T,
        wavelength: T,
        centre: [T; 2],
    },
    Dem(Arc<DemSurface<T>>),
}

impl<T: Real> Elevation<T> {
    pub fn height(&self, xh: &[T]) -> T {
        match self {
            Elevation::Plane { height, slopes, pivot } => {
                let mut z = *height;
                for (n, &x) in xh.iter().enumerate() {
                    z = z + slopes[n] * (x - pivot[n]);
                }
                z
            }
            Elevation::SinusoidalHill {
                base,
                amplitude,
                wavelength,
                centre,
            } => {
                let k = T::lit(2.0 * std::f64::consts::PI) / *wavelength;
                let mut prod = T::one();
                for (n, &x) in xh.iter().enumerate() {
                    prod = prod * (k * (x - centre[n])).cos();
                }
                *base + *amplitude * prod
            }
            Elevation::Dem(d) => d.elevation(xh),
        }
    }
}

/// Analytic or sampled description of the topography.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry<T> {
    /// No boundary at all.
    FreeSpace,
    Surface { elevation: Elevation<T>, side: Side },
    /// Circle or sphere; `interior_inside` selects which side is the domain.
    Sphere {
        centre: Point3<T>,
        radius: T,
        interior_inside: bool,
    },
}

/// Value used as "infinitely far" in boundary-free fields.
pub fn far_distance<T: Real>() -> T {
    T::lit(1.0e20)
}

impl<T: Real> Geometry<T> {
    /// Signed distance at a point: positive inside the computational domain.
    /// `spacing` sets the sampling resolution of the nearest-point search.
    pub fn signed_distance(&self, p: &Point3<T>, ndims: usize, spacing: &[T; 3]) -> T {
        match self {
            Geometry::FreeSpace => far_distance(),
            Geometry::Sphere {
                centre,
                radius,
                interior_inside,
            } => {
                let r = (0..ndims).map(|n| (p[n] - centre[n]).powi(2)).sum::<T>().sqrt();
                if *interior_inside {
                    *radius - r
                } else {
                    r - *radius
                }
            }
            Geometry::Surface { elevation, side } => {
                let sign = match side {
                    Side::Below => T::one(),
                    Side::Above => -T::one(),
                };
                sign * distance_below(elevation, p, ndims, spacing)
            }
        }
    }
}

/// Distance to the graph of `elevation`, positive when the point is below.
fn distance_below<T: Real>(e: &Elevation<T>, p: &Point3<T>, ndims: usize, spacing: &[T; 3]) -> T {
    let nh = ndims - 1;
    let xh = &p[..nh];
    let z = p[nh];
    let vertical = e.height(xh) - z;
    if nh == 0 || vertical == T::zero() {
        return vertical;
    }
    if let Elevation::Plane { slopes, .. } = e {
        let g2: T = slopes[..nh].iter().map(|s| *s * *s).sum();
        return vertical / (T::one() + g2).sqrt();
    }
    let d = nearest_on_graph(e, xh, z, vertical.abs(), &spacing[..nh]);
    d.copysign(vertical)
}

fn dist2<T: Real>(e: &Elevation<T>, u: &[T], xh: &[T], z: T) -> T {
    let mut d = (e.height(u) - z).powi(2);
    for n in 0..u.len() {
        d = d + (u[n] - xh[n]).powi(2);
    }
    d
}

/// Unsigned distance from `(xh, z)` to the graph by coarse lattice search,
/// local refinement at an eighth of a cell, and a Gauss-Newton polish.
fn nearest_on_graph<T: Real>(e: &Elevation<T>, xh: &[T], z: T, bound: T, h: &[T]) -> T {
    let nh = xh.len();
    let max_steps = 2048usize;

    // Coarse pass: the foot of the normal lies within `bound` horizontally.
    let mut coarse: Vec<(T, [T; 2])> = Vec::new();
    let reach: Vec<usize> = (0..nh)
        .map(|n| ((bound / h[n]).ceil().to_usize().unwrap_or(max_steps) + 1).min(max_steps))
        .collect();
    let k1 = if nh > 1 { reach[1] as i64 } else { 0 };
    for a in -(reach[0] as i64)..=(reach[0] as i64) {
        for b in -k1..=k1 {
            let mut u = [T::zero(); 2];
            u[0] = xh[0] + T::lit(a as f64) * h[0];
            if nh > 1 {
                u[1] = xh[1] + T::lit(b as f64) * h[1];
            }
            coarse.push((dist2(e, &u[..nh], xh, z), u));
        }
    }
    coarse.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let best_coarse = coarse[0].0.sqrt();
    let hmax = h.iter().copied().fold(T::zero(), T::max);
    let cutoff = (best_coarse + hmax * T::lit(1.5)).powi(2);

    // Fine pass around the leading candidates.
    let mut best = (T::infinity(), [T::zero(); 2]);
    let fine = 8i64;
    for (d0, c) in coarse.iter().take(16) {
        if *d0 > cutoff {
            break;
        }
        let f1 = if nh > 1 { fine } else { 0 };
        for a in -fine..=fine {
            for b in -f1..=f1 {
                let mut u = *c;
                u[0] = u[0] + T::lit(a as f64 / fine as f64) * h[0];
                if nh > 1 {
                    u[1] = u[1] + T::lit(b as f64 / fine as f64) * h[1];
                }
                let d = dist2(e, &u[..nh], xh, z);
                if d < best.0 {
                    best = (d, u);
                }
            }
        }
    }

    // Gauss-Newton on r(u) = (u − xh, h(u) − z) with backtracking.
    let (mut d2, mut u) = best;
    for _ in 0..40 {
        let fd = T::lit(1e-6);
        let hu = e.height(&u[..nh]);
        let mut g = [T::zero(); 2];
        for n in 0..nh {
            let step = fd * h[n];
            let mut up = u;
            let mut dn = u;
            up[n] = up[n] + step;
            dn[n] = dn[n] - step;
            g[n] = (e.height(&up[..nh]) - e.height(&dn[..nh])) / (step + step);
        }
        let resid = hu - z;
        let mut rhs = [T::zero(); 2];
        for n in 0..nh {
            rhs[n] = (u[n] - xh[n]) + resid * g[n];
        }
        let gg: T = g[..nh].iter().map(|v| *v * *v).sum();
        let grhs: T = (0..nh).map(|n| g[n] * rhs[n]).sum();
        let mut delta = [T::zero(); 2];
        for n in 0..nh {
            delta[n] = -(rhs[n] - g[n] * grhs / (T::one() + gg));
        }
        let size: T = delta[..nh].iter().map(|v| v.abs()).fold(T::zero(), T::max);
        if size <= hmax * T::lit(1e-14) {
            break;
        }
        let mut scale = T::one();
        let mut improved = false;
        for _ in 0..12 {
            let mut trial = u;
            for n in 0..nh {
                trial[n] = trial[n] + delta[n] * scale;
            }
            let dt = dist2(e, &trial[..nh], xh, z);
            if dt < d2 {
                d2 = dt;
                u = trial;
                improved = true;
                break;
            }
            scale = scale * T::lit(0.5);
        }
        if !improved {
            break;
        }
    }
    d2.sqrt().min(bound)
}

/// Signed distance sampled at the nodes of a grid; non-negative inside the
/// computational domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceField<T> {
    pub grid: CartesianGrid<T>,
    pub values: Vec<T>,
}

impl<T: Real> SignedDistanceField<T> {
    pub fn from_values(grid: CartesianGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Evaluates a geometry at every node of `grid`.
    pub fn from_geometry(grid: &CartesianGrid<T>, geometry: &Geometry<T>) -> Self {
        let spacing = grid.spacing3();
        let nd = grid.ndims();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|f| geometry.signed_distance(&grid.position(grid.unflat(f)), nd, &spacing))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    #[inline]
    pub fn at(&self, idx: Index3) -> T {
        self.values[self.grid.flat(idx)]
    }

    /// Gradient by second-order central differences, one-sided second-order
    /// stencils on the grid edges.
    pub fn gradient(&self, idx: Index3) -> Point3<T> {
        let g = &self.grid;
        let mut out = [T::zero(); 3];
        let h = g.spacing3();
        for n in 0..g.ndims() {
            let len = g.shape3()[n];
            let at = |k: usize| {
                let mut j = idx;
                j[n] = k;
                self.at(j)
            };
            let i = idx[n];
            let two = T::lit(2.0);
            out[n] = if i == 0 {
                (-T::lit(3.0) * at(0) + T::lit(4.0) * at(1) - at(2)) / (two * h[n])
            } else if i == len - 1 {
                (T::lit(3.0) * at(i) - T::lit(4.0) * at(i - 1) + at(i - 2)) / (two * h[n])
            } else {
                (at(i + 1) - at(i - 1)) / (two * h[n])
            };
        }
        out
    }

    /// Multilinear interpolation, clamped to the grid.
    pub fn interpolate(&self, p: &Point3<T>) -> T {
        let g = &self.grid;
        let f = g.fractional_index(p);
        let shape = g.shape3();
        let mut base = [0usize; 3];
        let mut t = [T::zero(); 3];
        for n in 0..g.ndims() {
            let hi = T::from_usize_lossy(shape[n] - 2);
            let fl = f[n].floor().max(T::zero()).min(hi);
            base[n] = fl.to_usize().unwrap_or(0);
            t[n] = (f[n] - fl).max(T::zero()).min(T::one());
        }
        let mut acc = T::zero();
        let corners = 1usize << g.ndims();
        for c in 0..corners {
            let mut idx = base;
            let mut w = T::one();
            for n in 0..g.ndims() {
                if (c >> n) & 1 == 1 {
                    idx[n] += 1;
                    w = w * t[n];
                } else {
                    w = w * (T::one() - t[n]);
                }
            }
            if w != T::zero() {
                acc = acc + w * self.at(idx);
            }
        }
        acc
    }
}

/// Signed distance to an analytic surface at every node.
pub fn sdf_from_function<T: Real>(grid: &CartesianGrid<T>, geometry: &Geometry<T>) -> SignedDistanceField<T> {
    SignedDistanceField::from_geometry(grid, geometry)
}

/// Builds the elevation surface of a DEM for `grid`, validating extent and
/// NODATA coverage.
pub fn dem_geometry<T: Real>(
    grid: &CartesianGrid<T>,
    dem: &EsriAsciiGrid<T>,
    side: Side,
    transect_northing: Option<T>,
) -> Result<Geometry<T>> {
    let nh = grid.ndims().checked_sub(1).filter(|&n| n > 0).ok_or_else(|| {
        Error::Geometry("DEM topography needs a 2D or 3D grid".into())
    })?;
    let shape = grid.shape3();
    let h = grid.spacing3();
    let o = grid.origin();
    let lo: Vec<T> = (0..nh).map(|n| o[n]).collect();
    let hi: Vec<T> = (0..nh)
        .map(|n| o[n] + T::from_usize_lossy(shape[n] - 1) * h[n])
        .collect();
    // Staggered subgrids reach half a cell further.
    let hi_stag: Vec<T> = (0..nh).map(|n| hi[n] + h[n] * T::lit(0.5)).collect();
    let surface = DemSurface::build(dem, &lo, &hi, transect_northing)?;
    // Extend the crop to staggered nodes when the DEM allows it.
    let surface = DemSurface::build(dem, &lo, &hi_stag, transect_northing).unwrap_or(surface);
    Ok(Geometry::Surface {
        elevation: Elevation::Dem(Arc::new(surface)),
        side,
    })
}

/// Signed distance to a DEM surface (linear in 2D, bilinear in 3D).
pub fn sdf_from_dem<T: Real>(
    grid: &CartesianGrid<T>,
    dem: &EsriAsciiGrid<T>,
    side: Side,
    transect_northing: Option<T>,
) -> Result<SignedDistanceField<T>> {
    let geometry = dem_geometry(grid, dem, side, transect_northing)?;
    Ok(SignedDistanceField::from_geometry(grid, &geometry))
}

//! ESRI ASCII grid reader and interpolated elevation surfaces built from it.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Raw ESRI ASCII raster. Rows are stored north to south as in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct EsriAsciiGrid<T> {
    pub ncols: usize,
    pub nrows: usize,
    /// Western edge of the raster.
    pub xllcorner: T,
    /// Southern edge of the raster.
    pub yllcorner: T,
    pub cellsize: T,
    pub nodata: Option<T>,
    pub values: Vec<T>,
}

impl<T: Real> EsriAsciiGrid<T> {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut centre_x = false;
        let mut centre_y = false;
        let mut cellsize = None;
        let mut nodata = None;

        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else {
                lines.next();
                continue;
            };
            if key.parse::<f64>().is_ok() || key.starts_with('-') {
                break;
            }
            let value = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("header key `{key}` has no value")))?;
            let num = || -> Result<T> {
                value
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| Error::Parse(format!("bad value `{value}` for `{key}`")))
            };
            let int = || -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad integer `{value}` for `{key}`")))
            };
            match key.to_ascii_lowercase().as_str() {
                "ncols" => ncols = Some(int()?),
                "nrows" => nrows = Some(int()?),
                "xllcorner" => xll = Some(num()?),
                "yllcorner" => yll = Some(num()?),
                "xllcenter" => {
                    xll = Some(num()?);
                    centre_x = true;
                }
                "yllcenter" => {
                    yll = Some(num()?);
                    centre_y = true;
                }
                "cellsize" => cellsize = Some(num()?),
                "nodata_value" => nodata = Some(num()?),
                other => return Err(Error::Parse(format!("unknown header key `{other}`"))),
            }
            lines.next();
        }

        let missing = |k: &str| Error::Parse(format!("missing header key `{k}`"));
        let ncols = ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = nrows.ok_or_else(|| missing("nrows"))?;
        let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
        let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
        let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
        if ncols == 0 || nrows == 0 {
            return Err(Error::Parse("empty raster".into()));
        }
        if !(cellsize > T::zero()) {
            return Err(Error::Parse("cellsize must be positive".into()));
        }
        let half = cellsize * T::lit(0.5);
        if centre_x {
            xll = xll - half;
        }
        if centre_y {
            yll = yll - half;
        }

        let mut values = Vec::with_capacity(ncols * nrows);
        for tok in lines.flat_map(str::split_whitespace) {
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad raster value `{tok}`")))?;
            values.push(T::lit(v));
        }
        if values.len() != ncols * nrows {
            return Err(Error::Parse(format!(
                "expected {} raster values, found {}",
                ncols * nrows,
                values.len()
            )));
        }
        Ok(Self {
            ncols,
            nrows,
            xllcorner: xll,
            yllcorner: yll,
            cellsize,
            nodata,
            values,
        })
    }

    /// Value at column `c`, row `r` counted from the south.
    #[inline]
    pub fn value_south_up(&self, c: usize, r: usize) -> T {
        self.values[(self.nrows - 1 - r) * self.ncols + c]
    }

    #[inline]
    pub fn is_nodata(&self, v: T) -> bool {
        self.nodata.is_some_and(|nd| v == nd) || !v.is_finite()
    }

    pub fn x_centre(&self, c: usize) -> T {
        self.xllcorner + (T::from_usize_lossy(c) + T::lit(0.5)) * self.cellsize
    }

    pub fn y_centre(&self, r: usize) -> T {
        self.yllcorner + (T::from_usize_lossy(r) + T::lit(0.5)) * self.cellsize
    }

    pub fn x_extent(&self) -> (T, T) {
        (self.xllcorner, self.xllcorner + T::from_usize_lossy(self.ncols) * self.cellsize)
    }

    pub fn y_extent(&self) -> (T, T) {
        (self.yllcorner, self.yllcorner + T::from_usize_lossy(self.nrows) * self.cellsize)
    }
}

/// Piecewise-linear 1D samples on a uniform axis with linear extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProfile<T> {
    pub start: T,
    pub step: T,
    pub values: Vec<T>,
}

impl<T: Real> LinearProfile<T> {
    pub fn eval(&self, x: T) -> T {
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let f = (x - self.start) / self.step;
        let i = f.floor().max(T::zero()).min(T::from_usize_lossy(n - 2));
        let k = i.to_usize().unwrap_or(0);
        let t = f - i;
        self.values[k] + (self.values[k + 1] - self.values[k]) * t
    }
}

/// Bilinear samples on a uniform 2D lattice, south-up, with linear
/// extrapolation beyond the outer cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearRaster<T> {
    pub x_start: T,
    pub y_start: T,
    pub step: T,
    pub nx: usize,
    pub ny: usize,
    /// `values[iy * nx + ix]`
    pub values: Vec<T>,
}

impl<T: Real> BilinearRaster<T> {
    pub fn eval(&self, x: T, y: T) -> T {
        let (ix, tx) = cell(x, self.x_start, self.step, self.nx);
        let (iy, ty) = cell(y, self.y_start, self.step, self.ny);
        let at = |i: usize, j: usize| self.values[j.min(self.ny - 1) * self.nx + i.min(self.nx - 1)];
        let (ix1, iy1) = (if self.nx > 1 { ix + 1 } else { ix }, if self.ny > 1 { iy + 1 } else { iy });
        let a = at(ix, iy) + (at(ix1, iy) - at(ix, iy)) * tx;
        let b = at(ix, iy1) + (at(ix1, iy1) - at(ix, iy1)) * tx;
        a + (b - a) * ty
    }
}

fn cell<T: Real>(x: T, start: T, step: T, n: usize) -> (usize, T) {
    if n == 1 {
        return (0, T::zero());
    }
    let f = (x - start) / step;
    let i = f.floor().max(T::zero()).min(T::from_usize_lossy(n - 2));
    (i.to_usize().unwrap_or(0), f - i)
}

/// Range of cell-centre indices needed to interpolate over `[lo, hi]`.
fn needed_cells<T: Real>(lo: T, hi: T, start: T, step: T, n: usize) -> (usize, usize) {
    if n == 1 {
        return (0, 0);
    }
    let clamp = |f: T| f.max(T::zero()).min(T::from_usize_lossy(n - 1));
    let a = clamp(((lo - start) / step).floor()).to_usize().unwrap_or(0);
    let b = clamp(((hi - start) / step).ceil()).to_usize().unwrap_or(n - 1);
    if a == b {
        // Keep at least one segment so slopes extrapolate.
        if b + 1 < n {
            (a, b + 1)
        } else {
            (a.saturating_sub(1), b)
        }
    } else {
        (a, b)
    }
}

/// Elevation surface extracted from a DEM for a particular grid.
#[derive(Debug, Clone, PartialEq)]
pub enum DemSurface<T> {
    /// Profile for 2D grids.
    Profile(LinearProfile<T>),
    /// Full raster for 3D grids.
    Raster(BilinearRaster<T>),
}

impl<T: Real> DemSurface<T> {
    /// Crops the DEM to the cells needed over the horizontal extent
    /// `[lo[n], hi[n]]` and checks coverage and NODATA.
    ///
    /// For a 2D grid the raster must be a single row or column, or
    /// `transect_northing` selects the row nearest to that northing.
    pub fn build(dem: &EsriAsciiGrid<T>, lo: &[T], hi: &[T], transect_northing: Option<T>) -> Result<Self> {
        let nh = lo.len();
        let tol = dem.cellsize * T::lit(1e-9);
        let (xe0, xe1) = dem.x_extent();
        let (ye0, ye1) = dem.y_extent();
        match nh {
            1 => {
                let along_northing = dem.ncols == 1 && dem.nrows > 1;
                let (e0, e1) = if along_northing { (ye0, ye1) } else { (xe0, xe1) };
                if lo[0] < e0 - tol || hi[0] > e1 + tol {
                    return Err(Error::Geometry(format!(
                        "DEM extent [{e0}, {e1}] does not cover grid range [{}, {}]",
                        lo[0], hi[0]
                    )));
                }
                let samples: Vec<T> = if along_northing {
                    (0..dem.nrows).map(|r| dem.value_south_up(0, r)).collect()
                } else {
                    let row = if dem.nrows == 1 {
                        0
                    } else {
                        let northing = transect_northing.ok_or_else(|| {
                            Error::Geometry(
                                "multi-row DEM on a 2D grid needs a transect northing".into(),
                            )
                        })?;
                        if northing < ye0 || northing > ye1 {
                            return Err(Error::Geometry("transect northing outside DEM".into()));
                        }
                        let f = ((northing - dem.yllcorner) / dem.cellsize - T::lit(0.5)).round();
                        f.max(T::zero())
                            .min(T::from_usize_lossy(dem.nrows - 1))
                            .to_usize()
                            .unwrap_or(0)
                    };
                    (0..dem.ncols).map(|c| dem.value_south_up(c, row)).collect()
                };
                let start = if along_northing { dem.y_centre(0) } else { dem.x_centre(0) };
                let (a, b) = needed_cells(lo[0], hi[0], start, dem.cellsize, samples.len());
                let values = samples[a..=b].to_vec();
                if values.iter().any(|&v| dem.is_nodata(v)) {
                    return Err(Error::Geometry("NODATA cell inside the modelled extent".into()));
                }
                Ok(DemSurface::Profile(LinearProfile {
                    start: start + T::from_usize_lossy(a) * dem.cellsize,
                    step: dem.cellsize,
                    values,
                }))
            }
            2 => {
                if lo[0] < xe0 - tol || hi[0] > xe1 + tol || lo[1] < ye0 - tol || hi[1] > ye1 + tol {
                    return Err(Error::Geometry("DEM extent does not cover the grid".into()));
                }
                let (xa, xb) = needed_cells(lo[0], hi[0], dem.x_centre(0), dem.cellsize, dem.ncols);
                let (ya, yb) = needed_cells(lo[1], hi[1], dem.y_centre(0), dem.cellsize, dem.nrows);
                let nx = xb - xa + 1;
                let ny = yb - ya + 1;
                let mut values = Vec::with_capacity(nx * ny);
                for r in ya..=yb {
                    for c in xa..=xb {
                        let v = dem.value_south_up(c, r);
                        if dem.is_nodata(v) {
                            return Err(Error::Geometry("NODATA cell inside the modelled extent".into()));
                        }
                        values.push(v);
                    }
                }
                Ok(DemSurface::Raster(BilinearRaster {
                    x_start: dem.x_centre(xa),
                    y_start: dem.y_centre(ya),
                    step: dem.cellsize,
                    nx,
                    ny,
                    values,
                }))
            }
            _ => Err(Error::Geometry("DEM surfaces need a 2D or 3D grid".into())),
        }
    }

    pub fn elevation(&self, horizontal: &[T]) -> T {
        match self {
            DemSurface::Profile(p) => p.eval(horizontal[0]),
            DemSurface::Raster(r) => r.eval(horizontal[0], horizontal[1]),
        }
    }
}

//! Analytic reference solutions, error norms and convergence studies.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::basis::FieldId;
use crate::error::{Error, Result};
use crate::geometry::{CartesianGrid, Elevation, Geometry, Point3, PointClassification, Side};
use crate::scalar::Real;
use crate::solver::{critical_dt, Formulation, Material, Model, ModelSpec, Solver, SurfaceKind};

/// Standing wave against a planar free surface:
/// `p = sin(k d) cos(ωt)`, `v = k/(ρω) n cos(k d) sin(ωt)`, `d = n·(x − x_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticStandingWave<T> {
    /// Unit normal pointing into the domain.
    pub normal: Point3<T>,
    pub surface_point: Point3<T>,
    pub k: T,
    pub c: T,
}

impl<T: Real> AnalyticStandingWave<T> {
    pub fn new(normal: Point3<T>, surface_point: Point3<T>, k: T, c: T) -> Self {
        let len = normal.iter().map(|v| *v * *v).sum::<T>().sqrt();
        Self {
            normal: normal.map(|v| v / len),
            surface_point,
            k,
            c,
        }
    }

    pub fn omega(&self) -> T {
        self.c * self.k
    }

    pub fn distance(&self, x: &Point3<T>) -> T {
        (0..3).map(|n| self.normal[n] * (x[n] - self.surface_point[n])).sum()
    }

    pub fn pressure(&self, x: &Point3<T>, t: T) -> T {
        (self.k * self.distance(x)).sin() * (self.omega() * t).cos()
    }

    pub fn velocity(&self, x: &Point3<T>, t: T, rho: T) -> Point3<T> {
        let a = self.k / (rho * self.omega()) * (self.k * self.distance(x)).cos() * (self.omega() * t).sin();
        self.normal.map(|n| a * n)
    }
}

/// Pressure and particle velocity of the standing wave.
pub fn standing_wave_fields<T: Real>(sw: &AnalyticStandingWave<T>, x: &Point3<T>, t: T, rho: T) -> (T, Point3<T>) {
    (sw.pressure(x, t), sw.velocity(x, t, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum NormKind {
    #[default]
    LInf,
    L2,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::LInf => "Linf",
            NormKind::L2 => "L2",
        })
    }
}

/// Error over the interior nodes only.
pub fn error_norm<T: Real>(
    numerical: &[T],
    analytic: &[T],
    classification: &PointClassification,
    kind: NormKind,
) -> Result<T> {
    if numerical.len() != analytic.len() || numerical.len() != classification.labels.len() {
        return Err(Error::Internal("error_norm on mismatched grids".into()));
    }
    let diffs = numerical
        .iter()
        .zip(analytic)
        .enumerate()
        .filter(|(i, _)| classification.is_interior(*i))
        .map(|(_, (a, b))| (*a - *b).abs());
    Ok(match kind {
        NormKind::LInf => diffs.fold(T::zero(), T::max),
        NormKind::L2 => {
            let (sum, n) = diffs.fold((T::zero(), 0usize), |(s, n), d| (s + d * d, n + 1));
            if n == 0 {
                T::zero()
            } else {
                (sum / T::from_usize_lossy(n)).sqrt()
            }
        }
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_slope<T: Real>(h: &[T], e: &[T]) -> Option<T> {
    let pts: Vec<(T, T)> = h
        .iter()
        .zip(e)
        .filter(|(h, e)| **h > T::zero() && **e > T::zero() && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > T::zero()).then(|| sxy / sxx)
}

/// Parameters of a tilted-plane standing-wave convergence study on the
/// square `[0, L]²`.
#[derive(Debug, Clone)]
pub struct ConvergenceSetup<T> {
    pub formulation: Formulation,
    pub tilt_degrees: T,
    /// Grid increments, coarsest first.
    pub resolutions: Vec<T>,
    /// Fraction of the critical timestep.
    pub courant_fraction: T,
    pub order: usize,
    pub wavelength: T,
    pub domain_length: T,
    /// Simulated time; defaults to a quarter period.
    pub duration: Option<T>,
    pub c: T,
    pub rho: T,
    pub eta_pressure: T,
    pub eta_velocity: T,
    pub norm: NormKind,
    /// Drop the surface entirely (pure interior test).
    pub free_space: bool,
}

impl<T: Real> ConvergenceSetup<T> {
    /// 30° tilt, two wavelengths across, order 4, 10% of the critical step.
    pub fn standard(formulation: Formulation, resolutions: Vec<T>) -> Self {
        Self {
            formulation,
            tilt_degrees: T::lit(30.0),
            resolutions,
            courant_fraction: T::lit(0.1),
            order: 4,
            wavelength: T::one(),
            domain_length: T::lit(2.0),
            duration: None,
            c: T::one(),
            rho: T::one(),
            eta_pressure: T::lit(0.5),
            eta_velocity: T::zero(),
            norm: NormKind::LInf,
            free_space: false,
        }
    }

    fn wave(&self) -> (AnalyticStandingWave<T>, Geometry<T>) {
        let half = self.domain_length * T::lit(0.5);
        let z0 = self.domain_length * T::lit(0.62);
        let s = self.tilt_degrees.to_radians().tan();
        let k = T::lit(2.0 * std::f64::consts::PI) / self.wavelength;
        let wave = AnalyticStandingWave::new([s, -T::one(), T::zero()], [half, z0, T::zero()], k, self.c);
        let geometry = if self.free_space {
            Geometry::FreeSpace
        } else {
            Geometry::Surface {
                elevation: Elevation::Plane {
                    height: z0,
                    slopes: [s, T::zero()],
                    pivot: [half, T::zero()],
                },
                side: Side::Below,
            }
        };
        (wave, geometry)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceEntry<T> {
    pub h: T,
    pub nodes_per_axis: usize,
    pub dt: T,
    pub steps: usize,
    pub modified_stencils: usize,
    pub error: Option<T>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport<T> {
    pub norm: NormKind,
    pub entries: Vec<ConvergenceEntry<T>>,
    /// Fitted over the resolutions that completed.
    pub slope: Option<T>,
}

impl<T: Real> ConvergenceReport<T> {
    /// Errors strictly decreasing with `h` over every resolution.
    pub fn monotone(&self) -> bool {
        self.entries.iter().all(|e| e.error.is_some())
            && self
                .entries
                .windows(2)
                .all(|w| w[1].error.unwrap_or(T::infinity()) < w[0].error.unwrap_or(T::zero()))
    }
}

impl<T: Real> fmt::Display for ConvergenceReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>12} {:>6} {:>12} {:>7} {:>9} {:>14}", "h", "nodes", "dt", "steps", "modified", self.norm)?;
        for e in &self.entries {
            let err = match (&e.error, &e.failure) {
                (Some(v), _) => format!("{v:.6e}"),
                (None, Some(m)) => format!("failed: {m}"),
                _ => "-".into(),
            };
            writeln!(
                f,
                "{:>12.6e} {:>6} {:>12.6e} {:>7} {:>9} {:>14}",
                e.h, e.nodes_per_axis, e.dt, e.steps, e.modified_stencils, err
            )?;
        }
        match self.slope {
            Some(s) => write!(f, "fitted slope: {s:.3}"),
            None => write!(f, "fitted slope: n/a"),
        }
    }
}

fn run_resolution<T: Real>(setup: &ConvergenceSetup<T>, h: T, period: T) -> Result<ConvergenceEntry<T>> {
    let (wave, geometry) = setup.wave();
    let cells = (setup.domain_length / h).round().to_usize().unwrap_or(0).max(4);
    let h = setup.domain_length / T::from_usize_lossy(cells);
    let grid = CartesianGrid::new(&[cells + 1, cells + 1], &[h, h], &[T::zero(), T::zero()])?;
    let mut spec = ModelSpec::new(grid.clone(), geometry, setup.formulation);
    spec.surface = SurfaceKind::Free;
    spec.order = setup.order;
    spec.eta_pressure = setup.eta_pressure;
    spec.eta_velocity = setup.eta_velocity;
    let model = Arc::new(Model::build(spec)?);
    let duration = setup.duration.unwrap_or(period * T::lit(0.25));
    let dt_max = setup.courant_fraction * critical_dt(&grid, setup.c, setup.order, setup.formulation)?;
    let steps = (duration / dt_max).ceil().to_usize().unwrap_or(1).max(1);
    let dt = duration / T::from_usize_lossy(steps);
    let mut entry = ConvergenceEntry {
        h,
        nodes_per_axis: cells + 1,
        dt,
        steps,
        modified_stencils: model.modified_count(),
        error: None,
        failure: None,
    };
    let mut solver = Solver::new(model.clone(), &Material::uniform(setup.c, setup.rho), dt)?;
    let rho = setup.rho;
    solver.set_edge_function(Arc::new(move |field: FieldId, x: &Point3<T>, t: T| {
        if field == FieldId::PRESSURE {
            wave.pressure(x, t)
        } else {
            wave.velocity(x, t, rho)[field.0 as usize - 1]
        }
    }));
    solver.initialise(
        T::zero(),
        &|x, t| wave.pressure(x, t),
        Some(&|ax, x, t| wave.velocity(x, t, rho)[ax]),
    );
    match solver.run(steps).and_then(|_| solver.check_finite()) {
        Ok(()) => {
            let pl = &model.fields[0];
            let exact: Vec<T> = (0..pl.grid.len())
                .map(|i| wave.pressure(&pl.grid.position(pl.grid.unflat(i)), solver.state.time))
                .collect();
            entry.error = Some(error_norm(&solver.state.p, &exact, &pl.classification, setup.norm)?);
        }
        Err(e) => entry.failure = Some(e.to_string()),
    }
    Ok(entry)
}

/// Runs the standing-wave study at every resolution and fits the slope
/// over the runs that completed.
pub fn run_convergence<T: Real>(setup: &ConvergenceSetup<T>) -> Result<ConvergenceReport<T>> {
    if setup.resolutions.len() < 3 {
        return Err(Error::config("resolutions", "at least three resolutions are needed"));
    }
    if !setup.resolutions.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::config("resolutions", "grid increments must be strictly decreasing"));
    }
    if !(setup.courant_fraction > T::zero() && setup.courant_fraction <= T::one()) {
        return Err(Error::config("time.courant", "courant fraction must lie in (0, 1]"));
    }
    let period = setup.wavelength / setup.c;
    let mut entries = Vec::new();
    for &h in &setup.resolutions {
        let e = match run_resolution(setup, h, period) {
            Ok(e) => e,
            Err(err) => ConvergenceEntry {
                h,
                nodes_per_axis: 0,
                dt: T::zero(),
                steps: 0,
                modified_stencils: 0,
                error: None,
                failure: Some(err.to_string()),
            },
        };
        match (&e.error, &e.failure) {
            (Some(err), _) => log::info!("h = {:e}: error {:e}", e.h, err),
            (None, Some(f)) => log::warn!("h = {:e}: failed: {f}", e.h),
            (None, None) => {}
        }
        entries.push(e);
    }
    let (hs, es): (Vec<T>, Vec<T>) = entries.iter().filter_map(|e| e.error.map(|v| (e.h, v))).unzip();
    Ok(ConvergenceReport {
        norm: setup.norm,
        slope: fit_slope(&hs, &es),
        entries,
    })
}

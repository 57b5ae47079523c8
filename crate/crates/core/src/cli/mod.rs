//! Command-line front end: configuration, snapshots and the subcommands.

mod config;
mod snapshot;

pub use config::{parse_config, read_config, ConvergeConfig, GeometryConfig, ReceiverConfig, SimulationConfig, SourceConfig};
pub use snapshot::{read_snapshot, write_snapshot, write_trace, SnapshotHeader};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::basis::FieldId;
use crate::error::{Error, Result};
use crate::geometry::{dem_geometry, sdf_from_dem, CartesianGrid, Elevation, EsriAsciiGrid, Geometry, Index3, Side};
use crate::solver::{critical_dt, Material, Model, ModelSpec, Receiver, RickerSource, Solver};
use crate::stencilgen::{ModifiedStencil, TableEntry};
use crate::verify::{run_convergence, ConvergenceReport, ConvergenceSetup};

/// Resolves the configured topography for `grid`.
pub fn build_geometry(cfg: &GeometryConfig, grid: &CartesianGrid<f64>) -> Result<Geometry<f64>> {
    Ok(match cfg {
        GeometryConfig::None => Geometry::FreeSpace,
        GeometryConfig::Plane {
            height,
            slopes,
            pivot,
            side,
        } => Geometry::Surface {
            elevation: Elevation::Plane {
                height: *height,
                slopes: *slopes,
                pivot: *pivot,
            },
            side: *side,
        },
        GeometryConfig::Hill {
            base,
            amplitude,
            wavelength,
            centre,
            side,
        } => Geometry::Surface {
            elevation: Elevation::SinusoidalHill {
                base: *base,
                amplitude: *amplitude,
                wavelength: *wavelength,
                centre: *centre,
            },
            side: *side,
        },
        GeometryConfig::Sphere { centre, radius, inside } => Geometry::Sphere {
            centre: *centre,
            radius: *radius,
            interior_inside: *inside,
        },
        GeometryConfig::Dem {
            path,
            transect_northing,
            side,
        } => {
            let dem = EsriAsciiGrid::read(path)?;
            dem_geometry(grid, &dem, *side, *transect_northing)?
        }
    })
}

/// Builds the model described by a configuration.
pub fn build_model(cfg: &SimulationConfig) -> Result<Model<f64>> {
    let geometry = build_geometry(&cfg.geometry, &cfg.grid)?;
    let mut spec = ModelSpec::new(cfg.grid.clone(), geometry, cfg.equation);
    spec.surface = cfg.surface;
    spec.order = cfg.order;
    spec.eta_pressure = cfg.eta_pressure;
    spec.eta_velocity = cfg.eta_velocity;
    spec.rcond = cfg.rcond;
    Model::build(spec)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    pub modified_stencils: usize,
    pub boundary_points: usize,
    pub snapshots: Vec<PathBuf>,
    pub traces: Vec<PathBuf>,
}

fn snapshot_all(solver: &Solver<f64>, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let model = &solver.model;
    for layout in &model.fields {
        let g = &layout.grid;
        let data = solver.field(layout.field).expect("field of the model");
        // Velocity lags the pressure by half a step in the staggered scheme.
        let time = if layout.field == FieldId::PRESSURE {
            solver.state.time
        } else {
            solver.state.time - 0.5 * solver.dt
        };
        let header = SnapshotHeader::new(&layout.field.name(), time, g.shape(), g.spacing(), g.origin());
        let path = out.join(format!("{}_{:06}.snap", layout.field, solver.state.step));
        write_snapshot(&path, &header, data)?;
        written.push(path);
    }
    Ok(())
}

/// Runs a forward simulation, writing snapshots, receiver traces and a
/// summary into `out`.
pub fn cmd_run(cfg: &SimulationConfig, out: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out)?;
    let model = Arc::new(build_model(cfg)?);
    log::info!(
        "{} boundary points, {} modified stencils",
        model.boundary.points.len(),
        model.modified_count()
    );
    let dt_max = cfg.courant * critical_dt(&cfg.grid, cfg.c, cfg.order, cfg.equation)?;
    let steps = (cfg.duration / dt_max).ceil().max(1.0) as usize;
    let dt = cfg.duration / steps as f64;
    let mut solver = Solver::new(model.clone(), &Material::uniform(cfg.c, cfg.rho), dt)?;
    if let Some(s) = &cfg.source {
        solver.add_source(RickerSource {
            f0: s.f0,
            t0: s.t0,
            location: s.location,
            amplitude: s.amplitude,
        })?;
    }
    for r in &cfg.receivers {
        solver.add_receiver(Receiver::new(r.location, r.field))?;
    }
    let mut snapshots = Vec::new();
    snapshot_all(&solver, out, &mut snapshots)?;
    for _ in 0..steps {
        solver.step()?;
        if solver.state.step % cfg.snapshot_stride == 0 {
            snapshot_all(&solver, out, &mut snapshots)?;
        }
    }
    solver.check_finite()?;
    let mut traces = Vec::new();
    for (i, r) in solver.receivers.iter().enumerate() {
        let path = out.join(format!("receiver_{i:03}_{}.csv", r.field));
        write_trace(&path, &r.trace)?;
        traces.push(path);
    }
    let summary = RunSummary {
        steps,
        dt,
        final_time: solver.state.time,
        modified_stencils: model.modified_count(),
        boundary_points: model.boundary.points.len(),
        snapshots,
        traces,
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Runs the tilted-plane standing-wave study with the configured equation,
/// order, material and surface parameters.
pub fn cmd_converge(cfg: &SimulationConfig, resolutions: &[f64], out: &Path) -> Result<ConvergenceReport<f64>> {
    let mut setup = ConvergenceSetup::standard(cfg.equation, resolutions.to_vec());
    let cv = &cfg.converge;
    setup.order = cfg.order;
    setup.c = cfg.c;
    setup.rho = cfg.rho;
    setup.eta_pressure = cfg.eta_pressure;
    setup.eta_velocity = cfg.eta_velocity;
    setup.tilt_degrees = cv.tilt_degrees;
    setup.wavelength = cv.wavelength;
    setup.domain_length = cv.domain_length;
    setup.duration = cv.duration;
    setup.courant_fraction = cv.courant;
    setup.norm = cv.norm;
    let report = run_convergence(&setup)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("convergence.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(out.join("convergence.txt"), format!("{report}\n"))?;
    Ok(report)
}

/// Parses `"i,j;k,l"` into grid indices of dimension `ndims`.
pub fn parse_points(text: &str, ndims: usize) -> Result<Vec<Index3>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            if parts.len() != ndims {
                return Err(Error::config("points", format!("`{s}` does not have {ndims} indices")));
            }
            let mut idx = [0usize; 3];
            for (n, p) in parts.iter().enumerate() {
                idx[n] = p
                    .parse()
                    .map_err(|_| Error::config("points", format!("`{p}` is not a grid index")))?;
            }
            Ok(idx)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StencilInfo {
    pub order: usize,
    pub radius: f64,
    pub expansions: usize,
    pub block: Vec<FieldId>,
    pub boundary_points: usize,
    pub support_size: usize,
    pub rank: usize,
    pub condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StencilRecord {
    pub operator: String,
    pub output: FieldId,
    pub index: Vec<usize>,
    /// `inactive`, `interior` or `modified`.
    pub kind: &'static str,
    #[serde(flatten)]
    pub stencil: Option<ModifiedStencil<f64>>,
    pub diagnostics: Option<StencilInfo>,
}

/// Writes the stencils every operator uses at the given nodes.
pub fn cmd_stencil_dump(cfg: &SimulationConfig, points: &[Index3], out: &Path) -> Result<Vec<StencilRecord>> {
    let model = build_model(cfg)?;
    let nd = model.ndims();
    let shape = cfg.grid.shape3();
    let mut records = Vec::new();
    for &idx in points {
        if (0..nd).any(|n| idx[n] >= shape[n]) {
            return Err(Error::config("points", format!("index {:?} outside the grid", &idx[..nd])));
        }
        for table in &model.tables {
            let kind = match table.entry(idx) {
                TableEntry::Inactive => "inactive",
                TableEntry::Interior => "interior",
                TableEntry::Modified(_) => "modified",
            };
            records.push(StencilRecord {
                operator: table.deriv.to_string(),
                output: table.output,
                index: idx[..nd].to_vec(),
                kind,
                stencil: table.stencil(idx).cloned(),
                diagnostics: table.diagnostics_at(idx).map(|d| StencilInfo {
                    order: d.order,
                    radius: d.radius,
                    expansions: d.expansions,
                    block: d.block.clone(),
                    boundary_points: d.boundary_points.len(),
                    support_size: d.support_size,
                    rank: d.rank,
                    condition: d.condition,
                }),
            });
        }
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("stencils.json"), serde_json::to_string_pretty(&records)?)?;
    Ok(records)
}

/// Samples the signed distance to a DEM surface and writes `sdf.snap`.
pub fn cmd_sdf(
    dem_path: &Path,
    grid: &CartesianGrid<f64>,
    side: Side,
    transect_northing: Option<f64>,
    out: &Path,
) -> Result<PathBuf> {
    let dem = EsriAsciiGrid::read(dem_path)?;
    let sdf = sdf_from_dem(grid, &dem, side, transect_northing)?;
    fs::create_dir_all(out)?;
    let path = out.join("sdf.snap");
    let header = SnapshotHeader::new("sdf", 0.0, grid.shape(), grid.spacing(), grid.origin());
    write_snapshot(&path, &header, &sdf.values)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        assert_eq!(parse_points("1,2; 3,4", 2).unwrap(), vec![[1, 2, 0], [3, 4, 0]]);
        assert!(parse_points("1,2,3", 2).is_err());
        assert!(parse_points("a,2", 2).is_err());
    }
}

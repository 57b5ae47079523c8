//! Topography as a signed-distance field: node classification, boundary-point
//! location and DEM ingestion.

mod boundary;
mod dem;
mod grid;
mod sdf;

pub use boundary::{classify_points, locate_boundary_points, BoundaryLocation, BoundaryPoint, PointClass, PointClassification};
pub use dem::{BilinearRaster, DemSurface, EsriAsciiGrid, LinearProfile};
pub use grid::{CartesianGrid, Index3, Point3};
pub use sdf::{dem_geometry, far_distance, sdf_from_dem, sdf_from_function, Elevation, Geometry, SignedDistanceField, Side};

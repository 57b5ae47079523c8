use super::grid::{Index3, Point3};
use super::sdf::SignedDistanceField;
use crate::scalar::Real;

/// Foot of the surface normal from a grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint<T> {
    /// Node the point was located from.
    pub host: Index3,
    pub position: Point3<T>,
    /// Unit normal pointing into the computational domain.
    pub normal: Point3<T>,
}

/// Located boundary points plus nodes skipped because the SDF gradient
/// vanished there.
#[derive(Debug, Clone, Default)]
pub struct BoundaryLocation<T> {
    pub points: Vec<BoundaryPoint<T>>,
    pub degenerate: Vec<Index3>,
}

const MIN_GRADIENT: f64 = 1e-8;

/// Projects every near-surface node onto the zero isosurface along the SDF
/// gradient, keeping the foot when it lies inside the node-centred cell.
pub fn locate_boundary_points<T: Real>(sdf: &SignedDistanceField<T>) -> BoundaryLocation<T> {
    let grid = &sdf.grid;
    let nd = grid.ndims();
    let h = grid.spacing3();
    let half: Vec<T> = (0..nd).map(|n| h[n] * T::lit(0.5)).collect();
    let reach = half.iter().map(|v| *v * *v).sum::<T>().sqrt();

    let mut out = BoundaryLocation {
        points: Vec::new(),
        degenerate: Vec::new(),
    };
    for idx in grid.indices() {
        let s = sdf.at(idx);
        if s.abs() > reach {
            continue;
        }
        let g = sdf.gradient(idx);
        let norm = (0..nd).map(|n| g[n] * g[n]).sum::<T>().sqrt();
        if !(norm >= T::lit(MIN_GRADIENT)) {
            log::debug!("skipping degenerate boundary candidate {idx:?}");
            out.degenerate.push(idx);
            continue;
        }
        let x = grid.position(idx);
        let mut normal = [T::zero(); 3];
        let mut pos = [T::zero(); 3];
        let mut inside = true;
        for n in 0..nd {
            normal[n] = g[n] / norm;
            pos[n] = x[n] - s * normal[n];
            if (pos[n] - x[n]).abs() > half[n] {
                inside = false;
            }
        }
        if inside {
            out.points.push(BoundaryPoint {
                host: idx,
                position: pos,
                normal,
            });
        }
    }
    out
}

/// Node label used when building extrapolants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointClass {
    Interior,
    Exterior,
    /// Inside the domain but too close to a boundary point to be trusted.
    EtaExcluded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointClassification {
    pub labels: Vec<PointClass>,
}

impl PointClassification {
    #[inline]
    pub fn get(&self, flat: usize) -> PointClass {
        self.labels[flat]
    }

    #[inline]
    pub fn is_interior(&self, flat: usize) -> bool {
        self.labels[flat] == PointClass::Interior
    }

    pub fn count(&self, class: PointClass) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }
}

/// Labels nodes as exterior (s < 0), η-excluded (a boundary point strictly
/// inside the node-centred box of half-widths η·Δx_n) or interior.
pub fn classify_points<T: Real>(
    sdf: &SignedDistanceField<T>,
    boundary_points: &[BoundaryPoint<T>],
    eta: T,
) -> PointClassification {
    let grid = &sdf.grid;
    let mut labels: Vec<PointClass> = sdf
        .values
        .iter()
        .map(|&s| if s < T::zero() { PointClass::Exterior } else { PointClass::Interior })
        .collect();
    if eta > T::zero() {
        let nd = grid.ndims();
        let h = grid.spacing3();
        let shape = grid.shape3();
        for bp in boundary_points {
            let f = grid.fractional_index(&bp.position);
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            let mut empty = false;
            for n in 0..nd {
                let a = (f[n] - eta).ceil().max(T::zero());
                let b = (f[n] + eta).floor().min(T::from_usize_lossy(shape[n] - 1));
                if a > b {
                    empty = true;
                    break;
                }
                lo[n] = a.to_usize().unwrap_or(0);
                hi[n] = b.to_usize().unwrap_or(0);
            }
            if empty {
                continue;
            }
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        let idx = [i, j, k];
                        let x = grid.position(idx);
                        let within = (0..nd).all(|n| (bp.position[n] - x[n]).abs() < eta * h[n]);
                        let flat = grid.flat(idx);
                        if within && labels[flat] == PointClass::Interior {
                            labels[flat] = PointClass::EtaExcluded;
                        }
                    }
                }
            }
        }
    }
    PointClassification { labels }
}

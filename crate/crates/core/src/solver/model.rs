use crate::basis::{bc_family, BcKind, BoundaryConditionSpec, FieldId};
use crate::error::{Error, Result};
use crate::geometry::{
    classify_points, locate_boundary_points, BoundaryLocation, CartesianGrid, Geometry, PointClass, SignedDistanceField,
};
use crate::scalar::Real;
use crate::stencilgen::{generate_operator_tables, DerivativeSpec, FieldLayout, OperatorTable, Stagger, StencilContext};

/// Which acoustic system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// `p_tt = c² ∇²p + f`
    SecondOrder,
    /// `p_t = ρc² ∇·v + f`, `v_t = ∇p / ρ` on a staggered grid.
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SurfaceKind {
    #[default]
    Free,
    Rigid,
}

/// Everything needed to build the stencil tables of a model.
#[derive(Debug, Clone)]
pub struct ModelSpec<T> {
    pub grid: CartesianGrid<T>,
    pub geometry: Geometry<T>,
    pub formulation: Formulation,
    pub surface: SurfaceKind,
    pub order: usize,
    pub eta_pressure: T,
    pub eta_velocity: T,
    /// Relative singular value cut-off; 0 selects the default.
    pub rcond: T,
}

impl<T: Real> ModelSpec<T> {
    pub fn new(grid: CartesianGrid<T>, geometry: Geometry<T>, formulation: Formulation) -> Self {
        Self {
            grid,
            geometry,
            formulation,
            surface: SurfaceKind::Free,
            order: 4,
            eta_pressure: T::lit(0.5),
            eta_velocity: T::zero(),
            rcond: T::zero(),
        }
    }
}

/// Conditions imposed for a formulation and surface type.
pub fn boundary_conditions<T: Real>(
    formulation: Formulation,
    surface: SurfaceKind,
    ndims: usize,
    order: usize,
) -> Vec<BoundaryConditionSpec<T>> {
    let (pk, vk) = match surface {
        SurfaceKind::Free => (BcKind::FreePressure, BcKind::FreeVelocity),
        SurfaceKind::Rigid => (BcKind::RigidPressure, BcKind::RigidVelocity),
    };
    let mut bcs = bc_family(pk, ndims, order);
    if formulation == Formulation::FirstOrder {
        bcs.extend(bc_family(vk, ndims, order));
    }
    bcs
}

/// Geometry, node labels and stencil tables of a model.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub spec: ModelSpec<T>,
    /// Pressure first, then the velocity components.
    pub fields: Vec<FieldLayout<T>>,
    pub sdfs: Vec<SignedDistanceField<T>>,
    pub boundary: BoundaryLocation<T>,
    pub bcs: Vec<BoundaryConditionSpec<T>>,
    /// Second order: `∂²p/∂x_n²`. First order: `∂p/∂x_n` (on `v_n`) then
    /// `∂v_n/∂x_n` (on `p`).
    pub tables: Vec<OperatorTable<T>>,
}

impl<T: Real> Model<T> {
    pub fn build(spec: ModelSpec<T>) -> Result<Self> {
        let nd = spec.grid.ndims();
        if spec.order < 2 || spec.order % 2 != 0 {
            return Err(Error::config("boundary.order", format!("order must be even and at least 2, got {}", spec.order)));
        }
        for (key, eta) in [("boundary.eta.pressure", spec.eta_pressure), ("boundary.eta.velocity", spec.eta_velocity)] {
            if !(eta >= T::zero() && eta < T::one()) {
                return Err(Error::config(key, format!("eta must lie in [0, 1), got {eta}")));
            }
        }
        let halo = spec.order / 2;
        if spec.grid.shape().iter().any(|&s| s < 2 * halo + 1) {
            return Err(Error::config("grid.shape", format!("need at least {} nodes per axis for order {}", 2 * halo + 1, spec.order)));
        }
        let p_sdf = SignedDistanceField::from_geometry(&spec.grid, &spec.geometry);
        let boundary = locate_boundary_points(&p_sdf);
        if !boundary.degenerate.is_empty() {
            log::warn!("{} degenerate boundary candidates skipped", boundary.degenerate.len());
        }
        let mut sdfs = vec![p_sdf];
        let mut ids = vec![FieldId::PRESSURE];
        if spec.formulation == Formulation::FirstOrder {
            for n in 0..nd {
                sdfs.push(SignedDistanceField::from_geometry(&spec.grid.staggered(n), &spec.geometry));
                ids.push(FieldId::velocity(n));
            }
        }
        let fields: Vec<FieldLayout<T>> = ids
            .iter()
            .zip(&sdfs)
            .map(|(&field, sdf)| {
                let eta = if field == FieldId::PRESSURE {
                    spec.eta_pressure
                } else {
                    spec.eta_velocity
                };
                FieldLayout {
                    field,
                    grid: sdf.grid.clone(),
                    classification: classify_points(sdf, &boundary.points, eta),
                }
            })
            .collect();
        let bcs = boundary_conditions(spec.formulation, spec.surface, nd, spec.order);
        let ctx = StencilContext {
            fields: &fields,
            boundary_points: &boundary.points,
            host_grid: &spec.grid,
            bcs: &bcs,
            order: spec.order,
            rcond: spec.rcond,
        };
        let mut requests = Vec::new();
        match spec.formulation {
            Formulation::SecondOrder => {
                for n in 0..nd {
                    requests.push((DerivativeSpec::new(FieldId::PRESSURE, n, 2, Stagger::None)?, FieldId::PRESSURE));
                }
            }
            Formulation::FirstOrder => {
                for n in 0..nd {
                    requests.push((DerivativeSpec::new(FieldId::PRESSURE, n, 1, Stagger::Forward)?, FieldId::velocity(n)));
                }
                for n in 0..nd {
                    requests.push((DerivativeSpec::new(FieldId::velocity(n), n, 1, Stagger::Backward)?, FieldId::PRESSURE));
                }
            }
        }
        let tables = generate_operator_tables(&ctx, &requests)?;
        Ok(Self {
            spec,
            fields,
            sdfs,
            boundary,
            bcs,
            tables,
        })
    }

    pub fn ndims(&self) -> usize {
        self.spec.grid.ndims()
    }

    pub fn grid(&self) -> &CartesianGrid<T> {
        &self.spec.grid
    }

    pub fn layout(&self, field: FieldId) -> Option<&FieldLayout<T>> {
        self.fields.iter().find(|f| f.field == field)
    }

    pub fn field_ids(&self) -> Vec<FieldId> {
        self.fields.iter().map(|f| f.field).collect()
    }

    pub fn slot(&self, field: FieldId) -> Option<usize> {
        self.fields.iter().position(|f| f.field == field)
    }

    /// Flat indices of nodes of `field` with label `class`.
    pub fn nodes_with(&self, field: FieldId, class: PointClass) -> Vec<usize> {
        self.layout(field)
            .map(|l| {
                l.classification
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c == class)
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Total number of modified stencils across all tables.
    pub fn modified_count(&self) -> usize {
        self.tables.iter().map(|t| t.modified.len()).sum()
    }
}

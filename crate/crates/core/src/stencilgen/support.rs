use crate::basis::{bc_row, build_basis, taylor_row, BoundaryConditionSpec, DerivativeVectorLayout, FieldId};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, CartesianGrid, Index3, Point3, PointClassification};
use crate::linalg::{certainly_rank_deficient, DenseMatrix, Svd};
use crate::scalar::Real;

/// Grid and node labels of one discretised field.
#[derive(Debug, Clone)]
pub struct FieldLayout<T> {
    pub field: FieldId,
    pub grid: CartesianGrid<T>,
    pub classification: PointClassification,
}

/// Read-only inputs shared by every stencil of a model.
#[derive(Debug, Clone, Copy)]
pub struct StencilContext<'a, T> {
    pub fields: &'a [FieldLayout<T>],
    pub boundary_points: &'a [BoundaryPoint<T>],
    /// Grid whose node indices host the boundary points.
    pub host_grid: &'a CartesianGrid<T>,
    pub bcs: &'a [BoundaryConditionSpec<T>],
    pub order: usize,
    /// Relative singular value cut-off; 0 selects the default.
    pub rcond: T,
}

impl<'a, T: Real> StencilContext<'a, T> {
    pub fn layout(&self, field: FieldId) -> Result<&'a FieldLayout<T>> {
        self.fields
            .iter()
            .find(|f| f.field == field)
            .ok_or_else(|| Error::Internal(format!("no layout for field {field}")))
    }

    pub fn field_ids(&self) -> Vec<FieldId> {
        self.fields.iter().map(|f| f.field).collect()
    }
}

/// Points feeding one extrapolant: interior nodes of the coupled fields and
/// boundary points inside a hypersphere around the expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportRegion<T> {
    pub centre: Point3<T>,
    /// Radius in grid increments.
    pub radius: T,
    pub interior_points: Vec<(FieldId, Index3)>,
    /// Indices into the shared boundary point list.
    pub boundary_points: Vec<usize>,
}

fn scaled_dist2<T: Real>(a: &Point3<T>, b: &Point3<T>, spacing: &[T; 3], nd: usize) -> T {
    (0..nd).map(|n| ((a[n] - b[n]) / spacing[n]).powi(2)).sum()
}

/// Collects the interior nodes of `fields` and boundary points (by host
/// node) within `radius` grid increments of `centre`.
pub fn build_support<T: Real>(
    centre: &Point3<T>,
    fields: &[&FieldLayout<T>],
    radius: T,
    boundary_points: &[BoundaryPoint<T>],
    host_grid: &CartesianGrid<T>,
) -> SupportRegion<T> {
    let r2 = radius * radius * (T::one() + T::lit(1e-12));
    let mut interior_points = Vec::new();
    for fl in fields {
        let g = &fl.grid;
        let nd = g.ndims();
        let h = g.spacing3();
        let shape = g.shape3();
        let f = g.fractional_index(centre);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for n in 0..nd {
            let a = (f[n] - radius).ceil().max(T::zero());
            let b = (f[n] + radius).floor().min(T::from_usize_lossy(shape[n] - 1));
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
                    if !fl.classification.is_interior(g.flat(idx)) {
                        continue;
                    }
                    if scaled_dist2(&g.position(idx), centre, &h, nd) <= r2 {
                        interior_points.push((fl.field, idx));
                    }
                }
            }
        }
    }
    let h = host_grid.spacing3();
    let nd = host_grid.ndims();
    let bps = boundary_points
        .iter()
        .enumerate()
        .filter(|(_, bp)| scaled_dist2(&host_grid.position(bp.host), centre, &h, nd) <= r2)
        .map(|(i, _)| i)
        .collect();
    SupportRegion {
        centre: *centre,
        radius,
        interior_points,
        boundary_points: bps,
    }
}

/// What a row of the constraint system is multiplied against.
#[derive(Debug, Clone, PartialEq)]
pub enum RowSource<T> {
    /// Value of `field` at a node.
    Value { field: FieldId, index: Index3 },
    /// Scaled forcing of condition `bc` at boundary point `point`.
    Forcing { bc: usize, point: usize, value: T },
}

/// Groups fields into independent blocks: two fields share a block when some
/// condition couples them.
pub fn block_decomposition<T: Real>(fields: &[FieldId], bcs: &[BoundaryConditionSpec<T>]) -> Vec<Vec<FieldId>> {
    let mut parent: Vec<usize> = (0..fields.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let nx = p[j];
            p[j] = r;
            j = nx;
        }
        r
    }
    for bc in bcs {
        let ids: Vec<usize> = bc
            .fields()
            .iter()
            .filter_map(|f| fields.iter().position(|g| g == f))
            .collect();
        for w in ids.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut blocks: Vec<Vec<FieldId>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..fields.len() {
        let r = find(&mut parent, i);
        match roots.iter().position(|&x| x == r) {
            Some(b) => blocks[b].push(fields[i]),
            None => {
                roots.push(r);
                blocks.push(vec![fields[i]]);
            }
        }
    }
    blocks
}

/// Builds the constraint matrix: one Taylor row per interior node in its
/// field's block, then one row per (boundary point, condition).
///
/// Conditions not touching the layout are skipped.
#[allow(clippy::too_many_arguments)]
pub fn assemble_system<T: Real>(
    support: &SupportRegion<T>,
    layout: &DerivativeVectorLayout,
    bcs: &[BoundaryConditionSpec<T>],
    boundary_points: &[BoundaryPoint<T>],
    fields: &[FieldLayout<T>],
    x0: &Point3<T>,
) -> Result<(DenseMatrix<T>, Vec<RowSource<T>>)> {
    let ncols = layout.len();
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut sources = Vec::new();
    let in_layout: Vec<FieldId> = layout.fields().collect();
    for &(field, idx) in &support.interior_points {
        let Some((off, basis)) = layout.block(field) else {
            continue;
        };
        let fl = fields
            .iter()
            .find(|f| f.field == field)
            .ok_or_else(|| Error::Internal(format!("no layout for field {field}")))?;
        let spacing = fl.grid.spacing3();
        let mut row = vec![T::zero(); ncols];
        let t = taylor_row(basis, &fl.grid.position(idx), x0, &spacing);
        row[off..off + t.len()].copy_from_slice(&t);
        rows.push(row);
        sources.push(RowSource::Value { field, index: idx });
    }
    let spacing = fields
        .iter()
        .find(|f| in_layout.contains(&f.field))
        .map(|f| f.grid.spacing3())
        .ok_or_else(|| Error::Internal("layout names no known field".into()))?;
    let active: Vec<(usize, &BoundaryConditionSpec<T>)> = bcs
        .iter()
        .enumerate()
        .filter(|(_, bc)| {
            let f = bc.fields();
            f.iter().any(|x| in_layout.contains(x))
        })
        .collect();
    for (_, bc) in &active {
        if !bc.fields().iter().all(|x| in_layout.contains(x)) {
            return Err(Error::Internal(format!("condition `{}` couples fields outside the block", bc.name)));
        }
    }
    for &p in &support.boundary_points {
        let bp = &boundary_points[p];
        for &(b, bc) in &active {
            let (row, g) = bc_row(bc, bp, x0, layout, &spacing)?;
            rows.push(row);
            sources.push(RowSource::Forcing { bc: b, point: p, value: g });
        }
    }
    if rows.is_empty() {
        return Err(Error::Internal("empty support region".into()));
    }
    Ok((DenseMatrix::from_rows(&rows)?, sources))
}

/// Solved extrapolation system of one block.
#[derive(Debug, Clone)]
pub struct Constrained<T> {
    pub support: SupportRegion<T>,
    pub layout: DerivativeVectorLayout,
    /// Basis order actually used (after any reduction).
    pub order: usize,
    /// Indices of the imposed conditions.
    pub bcs: Vec<usize>,
    pub rows: Vec<RowSource<T>>,
    /// Pseudoinverse, `layout.len() × rows.len()`.
    pub pinv: DenseMatrix<T>,
    pub rank: usize,
    pub condition: T,
    /// Number of radius increments taken beyond the initial radius.
    pub expansions: usize,
}

/// Grows the support radius (then lowers the basis order) until the block
/// system has full column rank, returning its pseudoinverse.
pub fn constrain<T: Real>(
    ctx: &StencilContext<'_, T>,
    block: &[FieldId],
    x0: &Point3<T>,
    centre_index: Index3,
) -> Result<Constrained<T>> {
    let layouts: Vec<&FieldLayout<T>> = block.iter().map(|&f| ctx.layout(f)).collect::<Result<_>>()?;
    let nd = ctx.host_grid.ndims();
    let mut order = ctx.order;
    loop {
        let basis = build_basis(nd, order)?;
        let layout = DerivativeVectorLayout::uniform(block, &basis);
        let bc_ids: Vec<usize> = ctx
            .bcs
            .iter()
            .enumerate()
            .filter(|(_, bc)| bc.order() <= order && bc.fields().iter().any(|f| block.contains(f)))
            .map(|(i, _)| i)
            .collect();
        let bcs: Vec<BoundaryConditionSpec<T>> = bc_ids.iter().map(|&i| ctx.bcs[i].clone()).collect();
        let start = T::from_usize_lossy(order + 1) * T::lit(0.5);
        let cap = T::from_usize_lossy(2 * (order + 1));
        let mut radius = start;
        let mut expansions = 0;
        while radius <= cap {
            let support = build_support(x0, &layouts, radius, ctx.boundary_points, ctx.host_grid);
            let nrows = support.interior_points.len() + support.boundary_points.len() * bcs.len();
            if nrows >= layout.len() {
                let (a, rows) = assemble_system(&support, &layout, &bcs, ctx.boundary_points, ctx.fields, x0)?;
                if certainly_rank_deficient(&a, ctx.rcond) {
                    radius = radius + T::lit(0.5);
                    expansions += 1;
                    continue;
                }
                let svd = Svd::new(&a)?;
                let rank = svd.rank(ctx.rcond);
                if rank >= layout.len() {
                    let rows = rows
                        .into_iter()
                        .map(|r| match r {
                            RowSource::Forcing { bc, point, value } => RowSource::Forcing {
                                bc: bc_ids[bc],
                                point,
                                value,
                            },
                            v => v,
                        })
                        .collect();
                    return Ok(Constrained {
                        support,
                        layout,
                        order,
                        bcs: bc_ids,
                        rows,
                        pinv: svd.pseudoinverse(ctx.rcond),
                        rank,
                        condition: svd.condition(ctx.rcond),
                        expansions,
                    });
                }
            }
            radius = radius + T::lit(0.5);
            expansions += 1;
        }
        if order <= 2 {
            return Err(Error::UnconstrainableRegion {
                index: centre_index[..nd].to_vec(),
                target: block.iter().map(|f| f.name()).collect::<Vec<_>>().join(","),
            });
        }
        log::debug!("reducing basis order to {} at {:?}", order - 2, centre_index);
        order -= 2;
    }
}

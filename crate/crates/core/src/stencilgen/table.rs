use std::collections::BTreeMap;

use rayon::prelude::*;

use super::support::{block_decomposition, constrain, Constrained, FieldLayout, RowSource, StencilContext};
use super::{interior_stencil, DerivativeSpec, ModifiedStencil, Tap};
use crate::basis::{taylor_row, FieldId};
use crate::error::{Error, Result};
use crate::geometry::{CartesianGrid, Index3, Point3};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Maps the support values (and forcings) of an extrapolant to values at
/// the exterior points `X_e`.
#[derive(Debug, Clone)]
pub struct ExtrapolationOperator<T> {
    pub exterior: Vec<(FieldId, Index3)>,
    /// `|X_e| × columns.len()`
    pub weights: DenseMatrix<T>,
    pub columns: Vec<RowSource<T>>,
}

/// `B · A⁺` for the exterior points, `B` holding their Taylor rows.
pub fn extrapolation_operator<T: Real>(
    constrained: &Constrained<T>,
    exterior: &[(FieldId, Index3)],
    fields: &[FieldLayout<T>],
    x0: &Point3<T>,
) -> Result<ExtrapolationOperator<T>> {
    let ncols = constrained.layout.len();
    let mut b = DenseMatrix::zeros(exterior.len().max(1), ncols);
    for (e, &(field, idx)) in exterior.iter().enumerate() {
        let (off, basis) = constrained
            .layout
            .block(field)
            .ok_or_else(|| Error::Internal(format!("exterior tap of {field} outside the block")))?;
        let fl = fields
            .iter()
            .find(|f| f.field == field)
            .ok_or_else(|| Error::Internal(format!("no layout for field {field}")))?;
        let row = taylor_row(basis, &fl.grid.position(idx), x0, &fl.grid.spacing3());
        b.row_mut(e)[off..off + row.len()].copy_from_slice(&row);
    }
    let mut weights = b.matmul(&constrained.pinv)?;
    if exterior.is_empty() {
        weights = DenseMatrix::zeros(1, constrained.rows.len());
    }
    Ok(ExtrapolationOperator {
        exterior: exterior.to_vec(),
        weights,
        columns: constrained.rows.clone(),
    })
}

/// Replaces exterior taps of `base` (centred at `centre`) by their
/// extrapolations, merging duplicate taps.
pub fn modify_stencil<T: Real>(
    base: &ModifiedStencil<T>,
    centre: Index3,
    extrap: &ExtrapolationOperator<T>,
    fields: &[FieldLayout<T>],
) -> Result<ModifiedStencil<T>> {
    let rel = |idx: Index3| -> [i32; 3] {
        [
            idx[0] as i32 - centre[0] as i32,
            idx[1] as i32 - centre[1] as i32,
            idx[2] as i32 - centre[2] as i32,
        ]
    };
    let mut acc: BTreeMap<(FieldId, [i32; 3]), T> = BTreeMap::new();
    let mut forcing = base.forcing;
    for tap in &base.taps {
        let fl = fields
            .iter()
            .find(|f| f.field == tap.field)
            .ok_or_else(|| Error::Internal(format!("no layout for field {}", tap.field)))?;
        let idx = fl
            .grid
            .offset(centre, tap.offset)
            .ok_or_else(|| Error::Internal(format!("tap {:?} leaves the grid at {centre:?}", tap.offset)))?;
        if let Some(e) = extrap.exterior.iter().position(|&(f, i)| f == tap.field && i == idx) {
            for (c, col) in extrap.columns.iter().enumerate() {
                let w = tap.weight * *extrap.weights.get(e, c);
                match col {
                    RowSource::Value { field, index } => {
                        let slot = acc.entry((*field, rel(*index))).or_insert_with(T::zero);
                        *slot = *slot + w;
                    }
                    RowSource::Forcing { value, .. } => forcing = forcing + w * *value,
                }
            }
        } else if fl.classification.is_interior(fl.grid.flat(idx)) {
            let slot = acc.entry((tap.field, tap.offset)).or_insert_with(T::zero);
            *slot = *slot + tap.weight;
        } else {
            return Err(Error::Internal(format!(
                "tap {:?} of {} at {centre:?} is neither interior nor extrapolated",
                tap.offset, tap.field
            )));
        }
    }
    Ok(ModifiedStencil {
        taps: acc
            .into_iter()
            .map(|((field, offset), weight)| Tap { field, offset, weight })
            .collect(),
        forcing,
    })
}

/// How a node of an operator table is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableEntry {
    /// Not updated: exterior, η-excluded or in the outer edge halo.
    Inactive,
    /// Unmodified interior stencil.
    Interior,
    /// Index into [`OperatorTable::modified`].
    Modified(usize),
}

/// Per-stencil record of how the extrapolant was built.
#[derive(Debug, Clone)]
pub struct StencilDiagnostics<T> {
    pub index: Index3,
    pub order: usize,
    pub radius: T,
    pub expansions: usize,
    pub block: Vec<FieldId>,
    /// Imposed conditions (indices into the context's list).
    pub bcs: Vec<usize>,
    /// Boundary points in the support (indices into the shared list).
    pub boundary_points: Vec<usize>,
    /// Rows of the constrained system (interior nodes plus condition rows).
    pub support_size: usize,
    pub rank: usize,
    pub condition: T,
}

/// Stencils of one derivative for every node of the output grid.
#[derive(Debug, Clone)]
pub struct OperatorTable<T> {
    pub deriv: DerivativeSpec,
    pub output: FieldId,
    pub shape: [usize; 3],
    pub base: ModifiedStencil<T>,
    pub entries: Vec<TableEntry>,
    pub modified: Vec<ModifiedStencil<T>>,
    /// Parallel to `modified`.
    pub diagnostics: Vec<StencilDiagnostics<T>>,
}

impl<T: Real> OperatorTable<T> {
    fn flat(&self, idx: Index3) -> usize {
        (idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]
    }

    pub fn entry(&self, idx: Index3) -> TableEntry {
        self.entries[self.flat(idx)]
    }

    /// Stencil used at `idx`, if the node is updated.
    pub fn stencil(&self, idx: Index3) -> Option<&ModifiedStencil<T>> {
        match self.entry(idx) {
            TableEntry::Inactive => None,
            TableEntry::Interior => Some(&self.base),
            TableEntry::Modified(k) => Some(&self.modified[k]),
        }
    }

    pub fn count(&self, kind: fn(&TableEntry) -> bool) -> usize {
        self.entries.iter().filter(|e| kind(e)).count()
    }

    /// Diagnostics of the modified stencil at `idx`.
    pub fn diagnostics_at(&self, idx: Index3) -> Option<&StencilDiagnostics<T>> {
        match self.entry(idx) {
            TableEntry::Modified(k) => Some(&self.diagnostics[k]),
            _ => None,
        }
    }
}

/// Whether `idx` lies at least `halo` nodes from every outer edge.
pub(crate) fn inside_halo(idx: Index3, shape: &[usize; 3], nd: usize, halo: usize) -> bool {
    (0..nd).all(|n| idx[n] >= halo && idx[n] + halo < shape[n])
}

fn block_of<T: Real>(ctx: &StencilContext<'_, T>, field: FieldId) -> Vec<FieldId> {
    block_decomposition(&ctx.field_ids(), ctx.bcs)
        .into_iter()
        .find(|b| b.contains(&field))
        .unwrap_or_else(|| vec![field])
}

/// Taps of `base` centred at `idx` that land on non-interior nodes.
fn exterior_taps<T: Real>(base: &ModifiedStencil<T>, input: &FieldLayout<T>, idx: Index3) -> Vec<(FieldId, Index3)> {
    base.taps
        .iter()
        .filter_map(|t| {
            let j = input.grid.offset(idx, t.offset)?;
            (!input.classification.is_interior(input.grid.flat(j))).then_some((t.field, j))
        })
        .collect()
}

fn diagnostics<T: Real>(c: &Constrained<T>, block: &[FieldId], idx: Index3) -> StencilDiagnostics<T> {
    StencilDiagnostics {
        index: idx,
        order: c.order,
        radius: c.support.radius,
        expansions: c.expansions,
        block: block.to_vec(),
        bcs: c.bcs.clone(),
        boundary_points: c.support.boundary_points.clone(),
        support_size: c.rows.len(),
        rank: c.rank,
        condition: c.condition,
    }
}

fn fold_exterior<T: Real>(
    ctx: &StencilContext<'_, T>,
    c: &Constrained<T>,
    base: &ModifiedStencil<T>,
    x0: &Point3<T>,
    idx: Index3,
    exterior: &[(FieldId, Index3)],
) -> Result<ModifiedStencil<T>> {
    let extrap = extrapolation_operator(c, exterior, ctx.fields, x0)?;
    let stencil = modify_stencil(base, idx, &extrap, ctx.fields)?;
    if !stencil.taps.iter().all(|t| t.weight.is_finite()) || !stencil.forcing.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite stencil weight at {idx:?}")));
    }
    Ok(stencil)
}

fn build_modified<T: Real>(
    ctx: &StencilContext<'_, T>,
    base: &ModifiedStencil<T>,
    block: &[FieldId],
    grid: &CartesianGrid<T>,
    idx: Index3,
    exterior: &[(FieldId, Index3)],
) -> Result<(ModifiedStencil<T>, StencilDiagnostics<T>)> {
    let x0 = grid.position(idx);
    let c = constrain(ctx, block, &x0, idx)?;
    let stencil = fold_exterior(ctx, &c, base, &x0, idx, exterior)?;
    Ok((stencil, diagnostics(&c, block, idx)))
}

/// Modified stencil of `deriv` at one node of `output`, or `None` when the
/// node is inactive or its interior stencil needs no modification.
pub fn stencil_at<T: Real>(
    ctx: &StencilContext<'_, T>,
    deriv: &DerivativeSpec,
    output: FieldId,
    idx: Index3,
) -> Result<Option<(ModifiedStencil<T>, StencilDiagnostics<T>)>> {
    let out = ctx.layout(output)?;
    let input = ctx.layout(deriv.field)?;
    let grid = &out.grid;
    let flat = grid.flat(idx);
    if !out.classification.is_interior(flat) || !inside_halo(idx, &grid.shape3(), grid.ndims(), ctx.order / 2) {
        return Ok(None);
    }
    let base = interior_stencil(deriv, ctx.order, &input.grid.spacing3())?;
    let exterior = exterior_taps(&base, input, idx);
    if exterior.is_empty() {
        return Ok(None);
    }
    build_modified(ctx, &base, &block_of(ctx, deriv.field), grid, idx, &exterior).map(Some)
}

/// Builds the stencil of `deriv` at every interior node of `output`,
/// modifying those whose footprint reaches non-interior nodes.
///
/// Nodes within `M/2` of an outer edge are left inactive.
pub fn generate_operator_table<T: Real>(
    ctx: &StencilContext<'_, T>,
    deriv: &DerivativeSpec,
    output: FieldId,
) -> Result<OperatorTable<T>> {
    let mut tables = generate_operator_tables(ctx, &[(*deriv, output)])?;
    Ok(tables.pop().expect("one table requested"))
}

struct Pending<T> {
    base: ModifiedStencil<T>,
    block: Vec<FieldId>,
    entries: Vec<TableEntry>,
    /// `(flat, index, exterior taps)` of nodes needing a modified stencil.
    todo: Vec<(usize, Index3, Vec<(FieldId, Index3)>)>,
}

type Built<T> = Vec<(usize, usize, ModifiedStencil<T>, StencilDiagnostics<T>)>;

/// Builds several tables at once. Tables whose modified nodes share an
/// output grid and a field block reuse one constrained system per node.
pub fn generate_operator_tables<T: Real>(
    ctx: &StencilContext<'_, T>,
    requests: &[(DerivativeSpec, FieldId)],
) -> Result<Vec<OperatorTable<T>>> {
    let mut pending = Vec::with_capacity(requests.len());
    for (deriv, output) in requests {
        let out = ctx.layout(*output)?;
        let input = ctx.layout(deriv.field)?;
        let grid = &out.grid;
        let nd = grid.ndims();
        if !grid.shape3().eq(&input.grid.shape3()) {
            return Err(Error::Internal(format!("{output} and {} grids differ in shape", deriv.field)));
        }
        let shape = grid.shape3();
        let halo = ctx.order / 2;
        let base = interior_stencil(deriv, ctx.order, &input.grid.spacing3())?;
        let mut entries = vec![TableEntry::Inactive; grid.len()];
        let mut todo = Vec::new();
        for (flat, entry) in entries.iter_mut().enumerate() {
            let idx = grid.unflat(flat);
            if !out.classification.is_interior(flat) || !inside_halo(idx, &shape, nd, halo) {
                continue;
            }
            let exterior = exterior_taps(&base, input, idx);
            if exterior.is_empty() {
                *entry = TableEntry::Interior;
            } else {
                todo.push((flat, idx, exterior));
            }
        }
        pending.push(Pending {
            base,
            block: block_of(ctx, deriv.field),
            entries,
            todo,
        });
    }

    // One job per (output field, block, node), listing the tasks it serves.
    let mut jobs: BTreeMap<(FieldId, Vec<FieldId>, Index3), Vec<(usize, usize)>> = BTreeMap::new();
    for (t, p) in pending.iter().enumerate() {
        for (k, (_, idx, _)) in p.todo.iter().enumerate() {
            jobs.entry((requests[t].1, p.block.clone(), *idx)).or_default().push((t, k));
        }
    }
    let jobs: Vec<_> = jobs.into_iter().collect();
    let built: Vec<Built<T>> = jobs
        .par_iter()
        .map(|((output, block, idx), tasks)| {
            let x0 = ctx.layout(*output)?.grid.position(*idx);
            let c = constrain(ctx, block, &x0, *idx)?;
            let diag = diagnostics(&c, block, *idx);
            tasks
                .iter()
                .map(|&(t, k)| {
                    let p = &pending[t];
                    let stencil = fold_exterior(ctx, &c, &p.base, &x0, *idx, &p.todo[k].2)?;
                    Ok((t, k, stencil, diag.clone()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut slots: Vec<Vec<Option<(ModifiedStencil<T>, StencilDiagnostics<T>)>>> =
        pending.iter().map(|p| vec![None; p.todo.len()]).collect();
    for (t, k, s, d) in built.into_iter().flatten() {
        slots[t][k] = Some((s, d));
    }
    let mut tables = Vec::with_capacity(requests.len());
    for ((p, slot), (deriv, output)) in pending.into_iter().zip(slots).zip(requests) {
        let mut entries = p.entries;
        let mut modified = Vec::with_capacity(p.todo.len());
        let mut diagnostics = Vec::with_capacity(p.todo.len());
        for ((flat, _, _), built) in p.todo.iter().zip(slot) {
            let (s, d) = built.ok_or_else(|| Error::Internal("stencil task not built".into()))?;
            entries[*flat] = TableEntry::Modified(modified.len());
            modified.push(s);
            diagnostics.push(d);
        }
        log::debug!(
            "{deriv} on {output}: {} modified stencils, max condition {:e}",
            modified.len(),
            diagnostics.iter().map(|d| d.condition).fold(T::zero(), T::max)
        );
        tables.push(OperatorTable {
            deriv: *deriv,
            output: *output,
            shape: ctx.layout(*output)?.grid.shape3(),
            base: p.base,
            entries,
            modified,
            diagnostics,
        });
    }
    Ok(tables)
}

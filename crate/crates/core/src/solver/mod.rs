//! Explicit time stepping of the acoustic wave equations with per-node
//! stencil tables.

mod model;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::FieldId;
use crate::error::{Error, Result};
use crate::geometry::{CartesianGrid, Point3, PointClass};
use crate::scalar::Real;
use crate::stencilgen::{weight_sum, OperatorTable, Stagger, TableEntry};

pub use model::{boundary_conditions, Formulation, Model, ModelSpec, SurfaceKind};

/// Material property, constant or sampled at the pressure nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Property<T> {
    Constant(T),
    PerNode(Vec<T>),
}

impl<T: Real> Property<T> {
    #[inline]
    pub fn at(&self, flat: usize) -> T {
        match self {
            Property::Constant(v) => *v,
            Property::PerNode(v) => v[flat],
        }
    }

    pub fn max(&self) -> T {
        match self {
            Property::Constant(v) => *v,
            Property::PerNode(v) => v.iter().copied().fold(T::neg_infinity(), T::max),
        }
    }

    fn validate(&self, key: &str, len: usize) -> Result<()> {
        let ok = match self {
            Property::Constant(v) => *v > T::zero() && v.is_finite(),
            Property::PerNode(v) => {
                if v.len() != len {
                    return Err(Error::config(key, format!("{} values for {len} nodes", v.len())));
                }
                v.iter().all(|x| *x > T::zero() && x.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(key, "values must be positive and finite"))
        }
    }
}

/// Wavespeed and density.
#[derive(Debug, Clone, PartialEq)]
pub struct Material<T> {
    pub c: Property<T>,
    pub rho: Property<T>,
}

impl<T: Real> Material<T> {
    pub fn uniform(c: T, rho: T) -> Self {
        Self {
            c: Property::Constant(c),
            rho: Property::Constant(rho),
        }
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        self.c.validate("material.c", nodes)?;
        self.rho.validate("material.rho", nodes)
    }
}

/// Ricker wavelet `(1 − 2π²f0²τ²) exp(−π²f0²τ²)`, `τ = t − t0`.
pub fn ricker<T: Real>(t: T, f0: T, t0: T) -> T {
    let a = T::lit(PI * PI) * f0 * f0 * (t - t0) * (t - t0);
    (T::one() - a - a) * (-a).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RickerSource<T> {
    pub f0: T,
    pub t0: T,
    pub location: Point3<T>,
    pub amplitude: T,
}

impl<T: Real> RickerSource<T> {
    pub fn value(&self, t: T) -> T {
        self.amplitude * ricker(t, self.f0, self.t0)
    }
}

/// Point receiver sampling one field by multilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver<T> {
    pub location: Point3<T>,
    pub field: FieldId,
    /// `(time, value)` samples.
    pub trace: Vec<(T, T)>,
}

impl<T: Real> Receiver<T> {
    pub fn new(location: Point3<T>, field: FieldId) -> Self {
        Self {
            location,
            field,
            trace: Vec::new(),
        }
    }
}

/// Multilinear interpolation of node values, clamped to the grid.
pub fn sample_multilinear<T: Real>(grid: &CartesianGrid<T>, values: &[T], p: &Point3<T>) -> T {
    let f = grid.fractional_index(p);
    let shape = grid.shape3();
    let nd = grid.ndims();
    let mut base = [0usize; 3];
    let mut t = [T::zero(); 3];
    for n in 0..nd {
        let fl = f[n].floor().max(T::zero()).min(T::from_usize_lossy(shape[n] - 2));
        base[n] = fl.to_usize().unwrap_or(0);
        t[n] = (f[n] - fl).max(T::zero()).min(T::one());
    }
    let mut acc = T::zero();
    for c in 0..(1usize << nd) {
        let mut idx = base;
        let mut w = T::one();
        for n in 0..nd {
            if (c >> n) & 1 == 1 {
                idx[n] += 1;
                w = w * t[n];
            } else {
                w = w * (T::one() - t[n]);
            }
        }
        if w != T::zero() {
            acc = acc + w * values[grid.flat(idx)];
        }
    }
    acc
}

/// Largest stable timestep.
///
/// Second order: `2 / (c_max √(Σ S_M / Δx_n²))`; first order:
/// `min Δx_n / (c_max T_M √d)`, with `S_M`, `T_M` the absolute weight sums of
/// the second-derivative and staggered first-derivative stencils.
pub fn critical_dt<T: Real>(grid: &CartesianGrid<T>, c_max: T, order: usize, formulation: Formulation) -> Result<T> {
    if !(c_max > T::zero()) {
        return Err(Error::config("material.c", "wavespeed must be positive"));
    }
    let nd = grid.ndims();
    let h = grid.spacing();
    match formulation {
        Formulation::SecondOrder => {
            let s = T::lit(weight_sum(2, Stagger::None, order)?);
            let sum: T = h.iter().map(|&d| s / (d * d)).sum();
            Ok(T::lit(2.0) / (c_max * sum.sqrt()))
        }
        Formulation::FirstOrder => {
            let t = T::lit(weight_sum(1, Stagger::Forward, order)?);
            Ok(grid.min_spacing() / (c_max * t * T::from_usize_lossy(nd).sqrt()))
        }
    }
}

const INACTIVE: u32 = u32::MAX;
const INTERIOR: u32 = u32::MAX - 1;

#[derive(Debug, Clone)]
struct CompiledStencil<T> {
    taps: Vec<(usize, usize, T)>,
    forcing: T,
}

/// Operator table flattened for evaluation.
#[derive(Debug, Clone)]
struct CompiledTable<T> {
    kinds: Vec<u32>,
    base_slot: usize,
    base: Vec<(isize, T)>,
    modified: Vec<CompiledStencil<T>>,
}

impl<T: Real> CompiledTable<T> {
    fn new(table: &OperatorTable<T>, model: &Model<T>) -> Result<Self> {
        let grid = model.grid();
        let strides = grid.strides();
        let slot = |f: FieldId| model.slot(f).ok_or_else(|| Error::Internal(format!("unknown field {f}")));
        let base_slot = slot(table.deriv.field)?;
        let base = table
            .base
            .taps
            .iter()
            .map(|t| {
                let d: isize = (0..3).map(|n| t.offset[n] as isize * strides[n] as isize).sum();
                (d, t.weight)
            })
            .collect();
        let mut kinds = Vec::with_capacity(table.entries.len());
        for e in &table.entries {
            kinds.push(match e {
                TableEntry::Inactive => INACTIVE,
                TableEntry::Interior => INTERIOR,
                TableEntry::Modified(k) => *k as u32,
            });
        }
        let mut modified = Vec::with_capacity(table.modified.len());
        for (s, d) in table.modified.iter().zip(&table.diagnostics) {
            let taps = s
                .taps
                .iter()
                .map(|t| {
                    let idx = grid
                        .offset(d.index, t.offset)
                        .ok_or_else(|| Error::Internal(format!("tap leaves grid at {:?}", d.index)))?;
                    Ok((slot(t.field)?, grid.flat(idx), t.weight))
                })
                .collect::<Result<_>>()?;
            modified.push(CompiledStencil { taps, forcing: s.forcing });
        }
        Ok(Self {
            kinds,
            base_slot,
            base,
            modified,
        })
    }

    #[inline]
    fn active(&self, flat: usize) -> bool {
        self.kinds[flat] != INACTIVE
    }

    #[inline]
    fn eval(&self, flat: usize, fields: &[&[T]]) -> T {
        match self.kinds[flat] {
            INTERIOR => {
                let f = fields[self.base_slot];
                self.base
                    .iter()
                    .fold(T::zero(), |acc, &(d, w)| acc + w * f[(flat as isize + d) as usize])
            }
            INACTIVE => T::zero(),
            k => {
                let s = &self.modified[k as usize];
                s.taps.iter().fold(s.forcing, |acc, &(slot, i, w)| acc + w * fields[slot][i])
            }
        }
    }
}

/// Prescribed values on the outer edge halo: `(field, position, time)`.
pub type EdgeFunction<T> = Arc<dyn Fn(FieldId, &Point3<T>, T) -> T + Send + Sync>;

/// Field arrays. `p_prev` is used by the second-order scheme, `v` by the
/// first-order one (staggered, lagging half a step behind `p`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    pub step: usize,
    pub time: T,
    /// Time at step 0; `time = start + step·dt` without accumulated rounding.
    pub start: T,
    pub p: Vec<T>,
    pub p_prev: Vec<T>,
    pub v: Vec<Vec<T>>,
}

const DIVERGENCE_CHECK: usize = 100;

/// Time integrator for a built [`Model`].
pub struct Solver<T> {
    pub model: Arc<Model<T>>,
    pub state: FieldState<T>,
    pub dt: T,
    pub receivers: Vec<Receiver<T>>,
    sources: Vec<(usize, RickerSource<T>)>,
    tables: Vec<CompiledTable<T>>,
    /// `c²` per pressure node.
    c2: Vec<T>,
    /// `ρ c²` per pressure node.
    rho_c2: Vec<T>,
    /// `1/ρ` per node of each velocity grid.
    inv_rho_v: Vec<Vec<T>>,
    /// Halo nodes per field slot (interior-labelled, never updated).
    edges: Vec<Vec<usize>>,
    edge_fn: Option<EdgeFunction<T>>,
}

impl<T: Real> Solver<T> {
    pub fn new(model: Arc<Model<T>>, material: &Material<T>, dt: T) -> Result<Self> {
        let grid = model.grid().clone();
        let n = grid.len();
        material.validate(n)?;
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::config("time.dt", "timestep must be positive"));
        }
        let nd = grid.ndims();
        let c2: Vec<T> = (0..n).map(|i| material.c.at(i) * material.c.at(i)).collect();
        let rho_c2 = (0..n).map(|i| material.rho.at(i) * c2[i]).collect();
        let strides = grid.strides();
        let shape = grid.shape3();
        let inv_rho_v = match model.spec.formulation {
            Formulation::SecondOrder => Vec::new(),
            Formulation::FirstOrder => (0..nd)
                .map(|ax| {
                    (0..n)
                        .map(|i| {
                            let idx = grid.unflat(i);
                            let j = if idx[ax] + 1 < shape[ax] { i + strides[ax] } else { i };
                            T::lit(2.0) / (material.rho.at(i) + material.rho.at(j))
                        })
                        .collect()
                })
                .collect(),
        };
        let tables = model
            .tables
            .iter()
            .map(|t| CompiledTable::new(t, &model))
            .collect::<Result<Vec<_>>>()?;
        let halo = model.spec.order / 2;
        let edges = model
            .fields
            .iter()
            .map(|l| {
                (0..n)
                    .filter(|&i| {
                        let idx = grid.unflat(i);
                        l.classification.is_interior(i) && !(0..nd).all(|a| idx[a] >= halo && idx[a] + halo < shape[a])
                    })
                    .collect()
            })
            .collect();
        let state = FieldState {
            step: 0,
            time: T::zero(),
            start: T::zero(),
            p: vec![T::zero(); n],
            p_prev: match model.spec.formulation {
                Formulation::SecondOrder => vec![T::zero(); n],
                Formulation::FirstOrder => Vec::new(),
            },
            v: match model.spec.formulation {
                Formulation::SecondOrder => Vec::new(),
                Formulation::FirstOrder => vec![vec![T::zero(); n]; nd],
            },
        };
        Ok(Self {
            model,
            state,
            dt,
            receivers: Vec::new(),
            sources: Vec::new(),
            tables,
            c2,
            rho_c2,
            inv_rho_v,
            edges,
            edge_fn: None,
        })
    }

    fn interior_node(&self, field: FieldId, p: &Point3<T>, key: &str) -> Result<usize> {
        let layout = self
            .model
            .layout(field)
            .ok_or_else(|| Error::config(key, format!("field {field} is not part of this formulation")))?;
        let idx = layout
            .grid
            .nearest(p)
            .ok_or_else(|| Error::config(key, format!("location {p:?} lies outside the grid")))?;
        let flat = layout.grid.flat(idx);
        if layout.classification.get(flat) != PointClass::Interior {
            return Err(Error::config(key, format!("location {p:?} is not at an interior node")));
        }
        Ok(flat)
    }

    /// Adds a pressure source injected at its nearest node.
    pub fn add_source(&mut self, source: RickerSource<T>) -> Result<()> {
        let flat = self.interior_node(FieldId::PRESSURE, &source.location, "source.location")?;
        self.sources.push((flat, source));
        Ok(())
    }

    pub fn add_receiver(&mut self, receiver: Receiver<T>) -> Result<()> {
        self.interior_node(receiver.field, &receiver.location, "outputs.receivers")?;
        self.receivers.push(receiver);
        Ok(())
    }

    /// Prescribes halo values each step instead of holding them.
    pub fn set_edge_function(&mut self, f: EdgeFunction<T>) {
        self.edge_fn = Some(f);
    }

    /// Current array of a field.
    pub fn field(&self, field: FieldId) -> Option<&[T]> {
        match field {
            FieldId::PRESSURE => Some(&self.state.p),
            f => self.state.v.get(f.0 as usize - 1).map(|v| v.as_slice()),
        }
    }

    /// Sets the initial fields from functions of position. The first-order
    /// scheme samples `v` at `t − dt/2` when `velocity` is given and otherwise
    /// takes a half Euler step from `p`; the second-order scheme evaluates
    /// `p` at `t − dt` for the previous level.
    #[allow(clippy::type_complexity)]
    pub fn initialise(
        &mut self,
        time: T,
        p: &dyn Fn(&Point3<T>, T) -> T,
        velocity: Option<&dyn Fn(usize, &Point3<T>, T) -> T>,
    ) {
        let model = self.model.clone();
        let dt = self.dt;
        self.state.time = time;
        self.state.start = time;
        self.state.step = 0;
        let pl = &model.fields[0];
        let sample = |f: &dyn Fn(&Point3<T>) -> T, slot: usize| -> Vec<T> {
            let l = &model.fields[slot];
            (0..l.grid.len())
                .map(|i| {
                    if l.classification.is_interior(i) {
                        f(&l.grid.position(l.grid.unflat(i)))
                    } else {
                        T::zero()
                    }
                })
                .collect()
        };
        self.state.p = sample(&|x| p(x, time), 0);
        match model.spec.formulation {
            Formulation::SecondOrder => {
                self.state.p_prev = sample(&|x| p(x, time - dt), 0);
            }
            Formulation::FirstOrder => {
                let nd = model.ndims();
                for ax in 0..nd {
                    self.state.v[ax] = match velocity {
                        Some(v) => sample(&|x| v(ax, x, time - dt * T::lit(0.5)), ax + 1),
                        None => vec![T::zero(); pl.grid.len()],
                    };
                }
                if velocity.is_none() {
                    // v(−dt/2) = v(0) − (dt/2) ∇p / ρ
                    let fields: Vec<&[T]> = std::iter::once(self.state.p.as_slice())
                        .chain(self.state.v.iter().map(|v| v.as_slice()))
                        .collect();
                    let half = dt * T::lit(0.5);
                    let updates: Vec<Vec<T>> = (0..nd)
                        .map(|ax| {
                            (0..pl.grid.len())
                                .map(|i| {
                                    if self.tables[ax].active(i) {
                                        -half * self.inv_rho_v[ax][i] * self.tables[ax].eval(i, &fields)
                                    } else {
                                        T::zero()
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    self.state.v = updates;
                }
            }
        }
        self.apply_edges_all();
        self.record();
    }

    fn apply_edges(&mut self, slot: usize, time: T) {
        let Some(f) = self.edge_fn.clone() else {
            return;
        };
        let l = &self.model.fields[slot];
        let field = l.field;
        let arr = if slot == 0 {
            &mut self.state.p
        } else {
            &mut self.state.v[slot - 1]
        };
        for &i in &self.edges[slot] {
            arr[i] = f(field, &l.grid.position(l.grid.unflat(i)), time);
        }
    }

    fn apply_edges_all(&mut self) {
        let Some(f) = self.edge_fn.clone() else {
            return;
        };
        let t = self.state.time;
        self.apply_edges(0, t);
        match self.model.spec.formulation {
            Formulation::SecondOrder => {
                let l = &self.model.fields[0];
                for &i in &self.edges[0] {
                    self.state.p_prev[i] = f(FieldId::PRESSURE, &l.grid.position(l.grid.unflat(i)), t - self.dt);
                }
            }
            Formulation::FirstOrder => {
                for s in 1..self.model.fields.len() {
                    self.apply_edges(s, t - self.dt * T::lit(0.5));
                }
            }
        }
    }

    fn record(&mut self) {
        let model = self.model.clone();
        let half = self.dt * T::lit(0.5);
        for r in &mut self.receivers {
            let slot = model.slot(r.field).unwrap_or(0);
            let l = &model.fields[slot];
            let values = if slot == 0 {
                &self.state.p
            } else {
                &self.state.v[slot - 1]
            };
            let t = if slot == 0 { self.state.time } else { self.state.time - half };
            r.trace.push((t, sample_multilinear(&l.grid, values, &r.location)));
        }
    }

    /// Advances one timestep.
    pub fn step(&mut self) -> Result<()> {
        match self.model.spec.formulation {
            Formulation::SecondOrder => self.step_second_order(),
            Formulation::FirstOrder => self.step_first_order(),
        }
        self.state.step += 1;
        self.state.time = self.state.start + T::from_usize_lossy(self.state.step) * self.dt;
        if self.state.step % DIVERGENCE_CHECK == 0 {
            self.check_finite()?;
        }
        self.record();
        Ok(())
    }

    pub fn run(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        let ok = self.state.p.par_iter().all(|v| v.is_finite())
            && self.state.v.iter().all(|f| f.par_iter().all(|v| v.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::Divergence { step: self.state.step })
        }
    }

    fn step_second_order(&mut self) {
        let dt2 = self.dt * self.dt;
        let t = self.state.time;
        let tables = &self.tables;
        let c2 = &self.c2;
        let p = &self.state.p;
        let prev = &self.state.p_prev;
        let fields = [p.as_slice()];
        let mut next: Vec<T> = (0..p.len())
            .into_par_iter()
            .map(|i| {
                if !tables[0].active(i) {
                    return p[i];
                }
                let lap = tables.iter().fold(T::zero(), |acc, tb| acc + tb.eval(i, &fields));
                p[i] + p[i] - prev[i] + dt2 * c2[i] * lap
            })
            .collect();
        for (i, s) in &self.sources {
            next[*i] = next[*i] + dt2 * s.value(t);
        }
        let old = std::mem::replace(&mut self.state.p, next);
        self.state.p_prev = old;
        self.apply_edges(0, t + self.dt);
    }

    fn step_first_order(&mut self) {
        let dt = self.dt;
        let t = self.state.time;
        let nd = self.model.ndims();
        for ax in 0..nd {
            let table = &self.tables[ax];
            let inv_rho = &self.inv_rho_v[ax];
            let fields: Vec<&[T]> = std::iter::once(self.state.p.as_slice())
                .chain(self.state.v.iter().map(|v| v.as_slice()))
                .collect();
            let v = &self.state.v[ax];
            let next: Vec<T> = (0..v.len())
                .into_par_iter()
                .map(|i| {
                    if table.active(i) {
                        v[i] + dt * inv_rho[i] * table.eval(i, &fields)
                    } else {
                        v[i]
                    }
                })
                .collect();
            self.state.v[ax] = next;
        }
        for ax in 0..nd {
            self.apply_edges(ax + 1, t + dt * T::lit(0.5));
        }
        let fields: Vec<&[T]> = std::iter::once(self.state.p.as_slice())
            .chain(self.state.v.iter().map(|v| v.as_slice()))
            .collect();
        let div_tables = &self.tables[nd..];
        let rho_c2 = &self.rho_c2;
        let p = &self.state.p;
        let mut next: Vec<T> = (0..p.len())
            .into_par_iter()
            .map(|i| {
                if !div_tables[0].active(i) {
                    return p[i];
                }
                let div = div_tables.iter().fold(T::zero(), |acc, tb| acc + tb.eval(i, &fields));
                p[i] + dt * rho_c2[i] * div
            })
            .collect();
        let tm = t + dt * T::lit(0.5);
        for (i, s) in &self.sources {
            next[*i] = next[*i] + dt * s.value(tm);
        }
        self.state.p = next;
        self.apply_edges(0, t + dt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn ricker_values() {
        assert_eq!(ricker(0.3, 8.0, 0.3), 1.0);
        let f0 = 5.0;
        let tau = 1.0 / (2f64.sqrt() * PI * f0);
        assert!(ricker(0.1 + tau, f0, 0.1).abs() < 1e-15);
        assert!(ricker(100.0, f0, 0.1).abs() < 1e-300);
    }

    #[test]
    fn critical_timesteps() {
        let g1 = CartesianGrid::<f64>::unit(&[10]).unwrap();
        assert!((critical_dt(&g1, 1.0, 2, Formulation::SecondOrder).unwrap() - 1.0).abs() < 1e-15);
        let d4 = critical_dt(&g1, 1.0, 4, Formulation::SecondOrder).unwrap();
        assert!((d4 - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((critical_dt(&g1, 2.0, 4, Formulation::SecondOrder).unwrap() - d4 / 2.0).abs() < 1e-15);
        assert!((critical_dt(&g1, 1.0, 2, Formulation::FirstOrder).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn multilinear_sampling_exact_for_linear_fields() {
        let g = CartesianGrid::new(&[5, 6], &[0.5, 0.25], &[1.0, -1.0]).unwrap();
        let f = |p: &Point3<f64>| 2.0 * p[0] - 3.0 * p[1] + 0.5;
        let vals: Vec<f64> = g.indices().map(|i| f(&g.position(i))).collect();
        let q = [1.37, -0.61, 0.0];
        assert!((sample_multilinear(&g, &vals, &q) - f(&q)).abs() < 1e-13);
        assert_eq!(sample_multilinear(&g, &vals, &g.position([2, 3, 0])), vals[g.flat([2, 3, 0])]);
    }

    fn free_model(f: Formulation) -> Arc<Model<f64>> {
        let grid = CartesianGrid::unit(&[16, 16]).unwrap();
        Arc::new(Model::build(ModelSpec::new(grid, Geometry::FreeSpace, f)).unwrap())
    }

    #[test]
    fn zero_state_stays_zero() {
        for f in [Formulation::SecondOrder, Formulation::FirstOrder] {
            let mut s = Solver::new(free_model(f), &Material::uniform(1.0, 1.0), 0.1).unwrap();
            s.run(5).unwrap();
            assert!(s.state.p.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_field_is_steady() {
        let mut s = Solver::new(free_model(Formulation::SecondOrder), &Material::uniform(1.0, 1.0), 0.1).unwrap();
        s.initialise(0.0, &|_, _| 3.0, None);
        s.run(4).unwrap();
        assert!((s.state.p[s.model.grid().flat([8, 8, 0])] - 3.0).abs() < 1e-12);
        let mut s = Solver::new(free_model(Formulation::FirstOrder), &Material::uniform(1.0, 1.0), 0.1).unwrap();
        s.initialise(0.0, &|_, _| 3.0, None);
        s.run(4).unwrap();
        assert!(s.state.v[0][s.model.grid().flat([8, 8, 0])].abs() < 1e-12);
    }

    #[test]
    fn source_must_be_interior() {
        let mut s = Solver::new(free_model(Formulation::SecondOrder), &Material::uniform(1.0, 1.0), 0.1).unwrap();
        let src = RickerSource {
            f0: 1.0,
            t0: 0.0,
            location: [40.0, 3.0, 0.0],
            amplitude: 1.0,
        };
        assert!(matches!(s.add_source(src), Err(Error::Config { .. })));
    }
}

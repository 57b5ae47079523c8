//! Test-side oracles: polynomials with analytic derivatives, boundary
//! operators applied to them, and null-space sampling via nalgebra.
#![allow(dead_code)]

use std::sync::Arc;

use ibfd::basis::{BoundaryConditionSpec, FieldId, Forcing, MultiIndex};
use ibfd::geometry::{BoundaryPoint, Point3};
use ibfd::solver::Model;
use ibfd::stencilgen::{stencil_at, ModifiedStencil, StencilContext};
use nalgebra::DMatrix;
use rand::Rng;

/// Monomial exponents of total degree ≤ `degree` in `nd` variables.
pub fn monomials(nd: usize, degree: usize) -> Vec<[u8; 3]> {
    let mut out = Vec::new();
    for a in 0..=degree {
        for b in 0..=(if nd > 1 { degree - a } else { 0 }) {
            for c in 0..=(if nd > 2 { degree - a - b } else { 0 }) {
                out.push([a as u8, b as u8, c as u8]);
            }
        }
    }
    out
}

/// `q(x) = Σ c_α ξ^α` with `ξ = (x − centre) / scale`.
#[derive(Debug, Clone)]
pub struct Poly {
    pub terms: Vec<([u8; 3], f64)>,
    pub centre: Point3<f64>,
    pub scale: f64,
}

fn falling(a: u8, b: u8) -> f64 {
    (0..b).map(|k| (a - k) as f64).product()
}

impl Poly {
    pub fn zero(centre: Point3<f64>, scale: f64) -> Self {
        Poly {
            terms: Vec::new(),
            centre,
            scale,
        }
    }

    pub fn random(rng: &mut impl Rng, nd: usize, degree: usize, centre: Point3<f64>, scale: f64) -> Self {
        Poly {
            terms: monomials(nd, degree)
                .into_iter()
                .map(|m| (m, rng.gen_range(-1.0..1.0)))
                .collect(),
            centre,
            scale,
        }
    }

    pub fn eval(&self, x: &Point3<f64>) -> f64 {
        self.deriv(MultiIndex::ZERO, x)
    }

    /// Physical-space derivative `∂^β q(x)`.
    pub fn deriv(&self, beta: MultiIndex, x: &Point3<f64>) -> f64 {
        let xi: Vec<f64> = (0..3).map(|n| (x[n] - self.centre[n]) / self.scale).collect();
        let order: i32 = beta.0.iter().map(|&b| b as i32).sum();
        let mut acc = 0.0;
        for (a, c) in &self.terms {
            if (0..3).any(|n| beta.0[n] > a[n]) {
                continue;
            }
            let mut v = *c;
            for n in 0..3 {
                v *= falling(a[n], beta.0[n]) * xi[n].powi((a[n] - beta.0[n]) as i32);
            }
            acc += v;
        }
        acc / self.scale.powi(order)
    }

    pub fn max_abs(&self, pts: &[Point3<f64>]) -> f64 {
        pts.iter().map(|p| self.eval(p).abs()).fold(0.0, f64::max)
    }
}

/// Value of a condition's left-hand side for the given field polynomials.
pub fn apply_bc(bc: &BoundaryConditionSpec<f64>, bp: &BoundaryPoint<f64>, poly: &dyn Fn(FieldId) -> Poly) -> f64 {
    bc.terms
        .iter()
        .map(|t| t.coeff.eval(bp) * poly(t.field).deriv(t.deriv, &bp.position))
        .sum()
}

/// Random member of the space of polynomial tuples (one per field, degree
/// ≤ `degree`) satisfying every homogeneous condition at every point.
/// Returns `None` when that space is trivial.
pub fn sample_constrained(
    rng: &mut impl Rng,
    nd: usize,
    degree: usize,
    fields: &[FieldId],
    bcs: &[&BoundaryConditionSpec<f64>],
    points: &[&BoundaryPoint<f64>],
    centre: Point3<f64>,
    scale: f64,
) -> Option<Vec<Poly>> {
    let mons = monomials(nd, degree);
    let ncols = mons.len() * fields.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for bp in points {
        for bc in bcs {
            let mut row = vec![0.0; ncols];
            for (f, field) in fields.iter().enumerate() {
                for (k, m) in mons.iter().enumerate() {
                    let mut single = Poly::zero(centre, scale);
                    single.terms.push((*m, 1.0));
                    let fld = *field;
                    row[f * mons.len() + k] = apply_bc(bc, bp, &|g| if g == fld { single.clone() } else { Poly::zero(centre, scale) });
                }
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                rows.push(row.iter().map(|v| v / norm).collect());
            }
        }
    }
    let coeffs: Vec<f64> = if rows.is_empty() {
        (0..ncols).map(|_| rng.gen_range(-1.0..1.0)).collect()
    } else {
        let nrows = rows.len().max(ncols);
        let mut c = DMatrix::<f64>::zeros(nrows, ncols);
        for (r, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                c[(r, k)] = *v;
            }
        }
        let svd = c.svd(false, true);
        let vt = svd.v_t.expect("right singular vectors");
        let smax = svd.singular_values.max();
        let null: Vec<usize> = (0..ncols).filter(|&k| svd.singular_values[k] <= 1e-11 * smax).collect();
        if null.is_empty() {
            return None;
        }
        let mut x = vec![0.0; ncols];
        for &k in &null {
            let w: f64 = rng.gen_range(-1.0..1.0);
            for j in 0..ncols {
                x[j] += w * vt[(k, j)];
            }
        }
        let m = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        x.iter().map(|v| v / m).collect()
    };
    Some(
        fields
            .iter()
            .enumerate()
            .map(|(f, _)| Poly {
                terms: mons
                    .iter()
                    .enumerate()
                    .map(|(k, m)| (*m, coeffs[f * mons.len() + k]))
                    .collect(),
                centre,
                scale,
            })
            .collect(),
    )
}

/// Grid positions needed to evaluate a stencil: `position(field, index)`.
pub type Locator<'a> = dyn Fn(FieldId, [usize; 3]) -> Point3<f64> + 'a;

/// Relative error of a stencil applied to field polynomials against the
/// exact derivative, relative to `max|q| / h^order` over the taps.
pub fn stencil_error(
    stencil: &ModifiedStencil<f64>,
    centre: [usize; 3],
    locate: &Locator<'_>,
    poly: &dyn Fn(FieldId) -> Poly,
    exact: f64,
    h: f64,
    order: i32,
) -> f64 {
    let mut qmax: f64 = exact.abs() * h.powi(order);
    let got = stencil.apply(|f, off| {
        let idx = [
            (centre[0] as i64 + off[0] as i64) as usize,
            (centre[1] as i64 + off[1] as i64) as usize,
            (centre[2] as i64 + off[2] as i64) as usize,
        ];
        let v = poly(f).eval(&locate(f, idx));
        qmax = qmax.max(v.abs());
        v
    });
    let scale = (qmax / h.powi(order)).max(f64::MIN_POSITIVE);
    (got - exact).abs() / scale
}

/// Conditions of `model` with forcing `g = BC(q)` for the given field
/// polynomials (fields outside `block` are zero).
pub fn forced_conditions(bcs: &[BoundaryConditionSpec<f64>], block: &[FieldId], polys: &[Poly]) -> Vec<BoundaryConditionSpec<f64>> {
    bcs.iter()
        .map(|bc| {
            let spec = bc.clone();
            let block = block.to_vec();
            let polys = polys.to_vec();
            bc.clone().with_forcing(Forcing::Custom(Arc::new(move |bp: &BoundaryPoint<f64>| {
                apply_bc(&spec, bp, &|f| match block.iter().position(|&g| g == f) {
                    Some(k) => polys[k].clone(),
                    None => Poly::zero(polys[0].centre, polys[0].scale),
                })
            })))
        })
        .collect()
}

/// Outcome of checking every modified stencil of a model.
#[derive(Debug, Default, Clone, Copy)]
pub struct ModelCheck {
    pub stencils: usize,
    /// Checked against a polynomial satisfying the homogeneous conditions.
    pub homogeneous: usize,
    /// Checked against an arbitrary polynomial with matching forcing, where
    /// the homogeneous space is trivial.
    pub forced: usize,
    pub max_error: f64,
    /// Largest change of a tap weight caused by the forcing.
    pub max_weight_change: f64,
}

/// Checks every modified stencil of `model`: homogeneous polynomials where
/// some exist, otherwise a random polynomial with the forcing rebuilt from
/// it.
pub fn check_model(rng: &mut impl Rng, model: &Model<f64>) -> ModelCheck {
    let nd = model.ndims();
    let h = model.grid().spacing()[0];
    let locate = |f: FieldId, i: [usize; 3]| model.layout(f).expect("model field").grid.position(i);
    let mut out = ModelCheck::default();
    for t in &model.tables {
        let grid = &model.layout(t.output).expect("output field").grid;
        for (s, d) in t.modified.iter().zip(&t.diagnostics) {
            out.stencils += 1;
            let x0 = grid.position(d.index);
            let used: Vec<&BoundaryConditionSpec<f64>> = d.bcs.iter().map(|&i| &model.bcs[i]).collect();
            let pts: Vec<&BoundaryPoint<f64>> = d.boundary_points.iter().map(|&i| &model.boundary.points[i]).collect();
            let order = t.deriv.order as i32;
            let err = match sample_constrained(rng, nd, d.order, &d.block, &used, &pts, x0, h) {
                Some(polys) => {
                    out.homogeneous += 1;
                    let lookup = |f: FieldId| polys[d.block.iter().position(|&g| g == f).expect("field in block")].clone();
                    let exact = lookup(t.deriv.field).deriv(t.deriv.multi_index(), &x0);
                    stencil_error(s, d.index, &locate, &lookup, exact, h, order)
                }
                None => {
                    out.forced += 1;
                    let polys: Vec<Poly> = d.block.iter().map(|_| Poly::random(rng, nd, d.order, x0, h)).collect();
                    let bcs = forced_conditions(&model.bcs, &d.block, &polys);
                    let ctx = StencilContext {
                        fields: &model.fields,
                        boundary_points: &model.boundary.points,
                        host_grid: model.grid(),
                        bcs: &bcs,
                        order: model.spec.order,
                        rcond: model.spec.rcond,
                    };
                    let (forced, _) = stencil_at(&ctx, &t.deriv, t.output, d.index)
                        .expect("forced stencil")
                        .expect("node is modified");
                    let wmax = s.taps.iter().fold(0.0f64, |a, tap| a.max(tap.weight.abs()));
                    for (a, b) in s.taps.iter().zip(&forced.taps) {
                        assert_eq!((a.field, a.offset), (b.field, b.offset));
                        out.max_weight_change = out.max_weight_change.max((a.weight - b.weight).abs() / wmax);
                    }
                    let lookup = |f: FieldId| polys[d.block.iter().position(|&g| g == f).expect("field in block")].clone();
                    let exact = lookup(t.deriv.field).deriv(t.deriv.multi_index(), &x0);
                    stencil_error(&forced, d.index, &locate, &lookup, exact, h, order)
                }
            };
            out.max_error = out.max_error.max(err);
        }
    }
    out
}

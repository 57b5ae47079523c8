use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{derivative_of_monomial, scaled_offset, DerivativeVectorLayout, FieldId, MultiIndex};
use crate::error::{Error, Result};
use crate::geometry::BoundaryPoint;
use crate::scalar::Real;

type PointFn<T> = Arc<dyn Fn(&BoundaryPoint<T>) -> T + Send + Sync>;

/// Coefficient of one derivative term, possibly varying along the surface.
#[derive(Clone)]
pub enum Coefficient<T> {
    Const(T),
    /// `scale · n_axis` with `n` the inward unit normal at the boundary point.
    Normal { axis: usize, scale: T },
    Custom(PointFn<T>),
}

impl<T: Real> Coefficient<T> {
    pub fn eval(&self, bp: &BoundaryPoint<T>) -> T {
        match self {
            Coefficient::Const(c) => *c,
            Coefficient::Normal { axis, scale } => *scale * bp.normal[*axis],
            Coefficient::Custom(f) => f(bp),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Coefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Const(c) => write!(f, "{c:?}"),
            Coefficient::Normal { axis, scale } => write!(f, "{scale:?}*n{axis}"),
            Coefficient::Custom(_) => f.write_str("<fn>"),
        }
    }
}

/// Right-hand side `g(x_b)` of a boundary condition.
#[derive(Clone, Default)]
pub enum Forcing<T> {
    #[default]
    Zero,
    Const(T),
    Custom(PointFn<T>),
}

impl<T: Real> Forcing<T> {
    pub fn eval(&self, bp: &BoundaryPoint<T>) -> T {
        match self {
            Forcing::Zero => T::zero(),
            Forcing::Const(c) => *c,
            Forcing::Custom(f) => f(bp),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

impl<T: fmt::Debug> fmt::Debug for Forcing<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => f.write_str("0"),
            Forcing::Const(c) => write!(f, "{c:?}"),
            Forcing::Custom(_) => f.write_str("<fn>"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BcTerm<T> {
    pub field: FieldId,
    pub deriv: MultiIndex,
    pub coeff: Coefficient<T>,
}

/// Linear condition `Σ α(x_b) ∂^β f_field(x_b) = g(x_b)`.
#[derive(Debug, Clone)]
pub struct BoundaryConditionSpec<T> {
    pub name: String,
    pub terms: Vec<BcTerm<T>>,
    pub forcing: Forcing<T>,
}

impl<T: Real> BoundaryConditionSpec<T> {
    pub fn new(name: impl Into<String>, terms: Vec<BcTerm<T>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::config("boundary", "boundary condition without terms"));
        }
        Ok(Self {
            name: name.into(),
            terms,
            forcing: Forcing::Zero,
        })
    }

    pub fn with_forcing(mut self, forcing: Forcing<T>) -> Self {
        self.forcing = forcing;
        self
    }

    /// Highest derivative order among the terms.
    pub fn order(&self) -> usize {
        self.terms.iter().map(|t| t.deriv.order()).max().unwrap_or(0)
    }

    /// Distinct fields touched by the condition, sorted.
    pub fn fields(&self) -> Vec<FieldId> {
        let mut f: Vec<FieldId> = self.terms.iter().map(|t| t.field).collect();
        f.sort();
        f.dedup();
        f
    }
}

/// Row of the constraint matrix for one condition at one boundary point,
/// with its forcing value.
///
/// The row is scaled by `h^k` (`h` the geometric-mean spacing, `k` the
/// condition order) together with the forcing, which leaves the solution
/// unchanged but keeps entries O(1) on any grid.
pub fn bc_row<T: Real>(
    bc: &BoundaryConditionSpec<T>,
    bp: &BoundaryPoint<T>,
    x0: &[T; 3],
    layout: &DerivativeVectorLayout,
    spacing: &[T; 3],
) -> Result<(Vec<T>, T)> {
    let mut row = vec![T::zero(); layout.len()];
    let mut ndims = 1;
    for term in &bc.terms {
        let (offset, basis) = layout.block(term.field).ok_or_else(|| {
            Error::config("boundary", format!("condition `{}` references field {} outside the layout", bc.name, term.field))
        })?;
        ndims = basis.ndims();
        if term.deriv.order() > basis.order() {
            return Err(Error::config(
                "boundary.order",
                format!("condition `{}` has order {} above basis order {}", bc.name, term.deriv.order(), basis.order()),
            ));
        }
        let coeff = term.coeff.eval(bp);
        if coeff == T::zero() {
            continue;
        }
        let mut scale = coeff;
        for n in 0..ndims {
            scale = scale / spacing[n].powi(term.deriv.0[n] as i32);
        }
        let xi = scaled_offset(&bp.position, x0, spacing, ndims);
        for (k, &alpha) in basis.indices().iter().enumerate() {
            let d = derivative_of_monomial(alpha, term.deriv, &xi);
            if d != T::zero() {
                row[offset + k] = row[offset + k] + scale * d;
            }
        }
    }
    let h = ((0..ndims).map(|n| spacing[n].ln()).sum::<T>() / T::from_usize_lossy(ndims)).exp();
    let norm = h.powi(bc.order() as i32);
    for v in row.iter_mut() {
        *v = *v * norm;
    }
    Ok((row, bc.forcing.eval(bp) * norm))
}

/// Families of boundary conditions derived from the acoustic equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    /// `p = 0, ∇²p = 0, ∇⁴p = 0, …`
    FreePressure,
    /// `n·∇p = 0, n·∇(∇²p) = 0, …`
    RigidPressure,
    /// `∇·v = 0, ∇²(∇·v) = 0, …`
    FreeVelocity,
    /// `n·v = 0, n·∇(∇·v) = 0, n·∇∇²(∇·v) = 0, …`
    RigidVelocity,
}

/// Constant-coefficient differential operator.
type DiffOp = BTreeMap<MultiIndex, i64>;

fn laplacian_power(ndims: usize, power: usize) -> DiffOp {
    let mut op: DiffOp = BTreeMap::from([(MultiIndex::ZERO, 1)]);
    for _ in 0..power {
        let mut next = DiffOp::new();
        for (m, c) in &op {
            for n in 0..ndims {
                *next.entry(m.add(MultiIndex::axis(n, 2))).or_insert(0) += c;
            }
        }
        op = next;
    }
    op
}

fn shift(op: &DiffOp, axis: usize) -> DiffOp {
    op.iter().map(|(m, c)| (m.add(MultiIndex::axis(axis, 1)), *c)).collect()
}

fn const_terms<T: Real>(field: FieldId, op: &DiffOp) -> Vec<BcTerm<T>> {
    op.iter()
        .map(|(m, c)| BcTerm {
            field,
            deriv: *m,
            coeff: Coefficient::Const(T::lit(*c as f64)),
        })
        .collect()
}

fn normal_terms<T: Real>(field: FieldId, op: &DiffOp, ndims: usize) -> Vec<BcTerm<T>> {
    (0..ndims)
        .flat_map(|axis| {
            shift(op, axis).into_iter().map(move |(m, c)| BcTerm {
                field,
                deriv: m,
                coeff: Coefficient::Normal {
                    axis,
                    scale: T::lit(c as f64),
                },
            })
        })
        .collect()
}

/// Conditions of a family up to total order `order`; higher ones are
/// dropped since they reduce to `0 = 0` on the basis.
pub fn bc_family<T: Real>(kind: BcKind, ndims: usize, order: usize) -> Vec<BoundaryConditionSpec<T>> {
    let p = FieldId::PRESSURE;
    let mut out = Vec::new();
    let spec = |name: String, terms: Vec<BcTerm<T>>| BoundaryConditionSpec {
        name,
        terms,
        forcing: Forcing::Zero,
    };
    match kind {
        BcKind::FreePressure => {
            for j in 0..=order / 2 {
                out.push(spec(format!("lap^{j} p = 0"), const_terms(p, &laplacian_power(ndims, j))));
            }
        }
        BcKind::RigidPressure => {
            let mut j = 0;
            while 2 * j + 1 <= order {
                out.push(spec(
                    format!("n.grad lap^{j} p = 0"),
                    normal_terms(p, &laplacian_power(ndims, j), ndims),
                ));
                j += 1;
            }
        }
        BcKind::FreeVelocity => {
            let mut j = 0;
            while 2 * j + 1 <= order {
                let lap = laplacian_power(ndims, j);
                let terms = (0..ndims)
                    .flat_map(|n| const_terms(FieldId::velocity(n), &shift(&lap, n)))
                    .collect();
                out.push(spec(format!("lap^{j} div v = 0"), terms));
                j += 1;
            }
        }
        BcKind::RigidVelocity => {
            let terms = (0..ndims)
                .map(|n| BcTerm {
                    field: FieldId::velocity(n),
                    deriv: MultiIndex::ZERO,
                    coeff: Coefficient::Normal {
                        axis: n,
                        scale: T::one(),
                    },
                })
                .collect();
            out.push(spec("n.v = 0".into(), terms));
            let mut j = 1;
            while 2 * j <= order {
                let lap = laplacian_power(ndims, j - 1);
                // n·∇ ∇^{2(j-1)} ∇·v: each velocity component n contributes
                // ∂_n of the inner operator, then the normal derivative.
                let mut terms = Vec::new();
                for comp in 0..ndims {
                    let inner = shift(&lap, comp);
                    terms.extend(normal_terms(FieldId::velocity(comp), &inner, ndims));
                }
                out.push(spec(format!("n.grad lap^{} div v = 0", j - 1), terms));
                j += 1;
            }
        }
    }
    out
}

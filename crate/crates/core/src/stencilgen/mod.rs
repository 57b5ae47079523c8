//! Interior finite-difference stencils and their boundary-aware
//! modification through constrained Taylor extrapolation.

mod support;
mod table;

use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::basis::{build_basis_any, taylor_row_scaled, FieldId, MultiIndex};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{Real, Scalar};

pub use support::{
    assemble_system, block_decomposition, build_support, constrain, Constrained, FieldLayout, RowSource, StencilContext,
    SupportRegion,
};
pub use table::{
    extrapolation_operator, generate_operator_table, generate_operator_tables, modify_stencil, stencil_at, ExtrapolationOperator, OperatorTable,
    StencilDiagnostics, TableEntry,
};

/// Position of the evaluation point relative to the input node sharing its
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum Stagger {
    #[default]
    None,
    /// Evaluated half a cell forward (`x_i + Δx/2`).
    Forward,
    /// Evaluated half a cell backward (`x_i − Δx/2`).
    Backward,
}

impl Stagger {
    /// Offset in half cells.
    pub fn half_cells(self) -> i32 {
        match self {
            Stagger::None => 0,
            Stagger::Forward => 1,
            Stagger::Backward => -1,
        }
    }
}

/// Derivative `∂^order / ∂x_axis^order` of `field`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DerivativeSpec {
    pub field: FieldId,
    pub axis: usize,
    pub order: u8,
    pub stagger: Stagger,
}

impl DerivativeSpec {
    pub fn new(field: FieldId, axis: usize, order: u8, stagger: Stagger) -> Result<Self> {
        if axis > 2 {
            return Err(Error::config("derivative.axis", format!("axis {axis} out of range")));
        }
        if order == 0 {
            return Err(Error::config("derivative.order", "derivative order must be at least 1"));
        }
        if stagger != Stagger::None && order % 2 == 0 {
            return Err(Error::config("derivative.stagger", "staggered stencils are defined for odd orders only"));
        }
        Ok(Self {
            field,
            axis,
            order,
            stagger,
        })
    }

    pub fn multi_index(&self) -> MultiIndex {
        MultiIndex::axis(self.axis, self.order)
    }

    /// Unit-spacing tap offsets along the axis.
    pub fn tap_offsets(&self, m: usize) -> Vec<i32> {
        let h = (m / 2) as i32;
        match self.stagger {
            Stagger::None => (-h..=h).collect(),
            Stagger::Forward => (-h + 1..=h).collect(),
            Stagger::Backward => (-h..h).collect(),
        }
    }
}

impl fmt::Display for DerivativeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ax = ["x", "y", "z"][self.axis];
        let st = match self.stagger {
            Stagger::None => "",
            Stagger::Forward => "+",
            Stagger::Backward => "-",
        };
        if self.order == 1 {
            write!(f, "d{}/d{ax}{st}", self.field)
        } else {
            write!(f, "d{}{}/d{ax}{}{st}", self.order, self.field, self.order)
        }
    }
}

/// One stencil tap: a field value at an index offset from the output node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tap<T> {
    pub field: FieldId,
    pub offset: [i32; 3],
    pub weight: T,
}

/// Weights over field values plus a constant contributed by boundary
/// forcing. Weights carry physical units (1/length^order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModifiedStencil<T> {
    pub taps: Vec<Tap<T>>,
    pub forcing: T,
}

impl<T: Real> ModifiedStencil<T> {
    /// Applies the stencil to a sampled function `value(field, offset)`.
    pub fn apply(&self, mut value: impl FnMut(FieldId, [i32; 3]) -> T) -> T {
        self.taps
            .iter()
            .fold(self.forcing, |acc, t| acc + t.weight * value(t.field, t.offset))
    }
}

/// Unit-spacing weights of the classic order-`m` stencil, computed exactly
/// by inverting the collocation system.
///
/// Unstaggered stencils use the `m + 1` points `−m/2..=m/2`; staggered ones
/// use the `m` half-offset points symmetric about the evaluation point.
pub fn interior_weights<S: Scalar>(order: u8, stagger: Stagger, m: usize) -> Result<Vec<(i32, S)>> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::config("boundary.order", format!("order must be even and at least 2, got {m}")));
    }
    let spec = DerivativeSpec::new(FieldId::PRESSURE, 0, order, stagger)?;
    let offsets = spec.tap_offsets(m);
    let npts = offsets.len();
    if order as usize >= npts {
        return Err(Error::config("derivative.order", format!("order {order} needs more than {npts} points")));
    }
    let basis = build_basis_any(1, npts - 1);
    let two = S::from_int(2);
    let rows: Vec<Vec<S>> = offsets
        .iter()
        .map(|&k| {
            // position relative to the evaluation point, in cells
            let xi = (S::from_int(2 * k as i64) - S::from_int(stagger.half_cells() as i64)) / two.clone();
            taylor_row_scaled(&basis, &[xi, S::zero(), S::zero()])
        })
        .collect();
    let inv = DenseMatrix::from_rows(&rows)?.inverse()?;
    Ok(offsets
        .iter()
        .enumerate()
        .map(|(j, &k)| (k, inv.get(order as usize, j).clone()))
        .collect())
}

fn exact_weights(order: u8, stagger: Stagger, m: usize) -> Result<Vec<(i32, f64)>> {
    let w = interior_weights::<Ratio<i128>>(order, stagger, m)?;
    w.into_iter()
        .map(|(k, r)| {
            let v = r.to_f64().ok_or_else(|| Error::Internal("weight conversion".into()))?;
            Ok((k, v))
        })
        .collect()
}

/// Classic interior stencil in physical units for `spacing`.
pub fn interior_stencil<T: Real>(deriv: &DerivativeSpec, m: usize, spacing: &[T]) -> Result<ModifiedStencil<T>> {
    let scale = spacing[deriv.axis].powi(deriv.order as i32);
    let taps = exact_weights(deriv.order, deriv.stagger, m)?
        .into_iter()
        .map(|(k, w)| {
            let mut offset = [0i32; 3];
            offset[deriv.axis] = k;
            Tap {
                field: deriv.field,
                offset,
                weight: T::lit(w) / scale,
            }
        })
        .collect();
    Ok(ModifiedStencil {
        taps,
        forcing: T::zero(),
    })
}

/// `Σ |w_k|` of the unit-spacing stencil, used for stability limits.
pub fn weight_sum(order: u8, stagger: Stagger, m: usize) -> Result<f64> {
    Ok(exact_weights(order, stagger, m)?.iter().map(|(_, w)| w.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn weights(order: u8, stagger: Stagger, m: usize) -> Vec<Rational> {
        interior_weights::<Rational>(order, stagger, m)
            .unwrap()
            .into_iter()
            .map(|(_, w)| w)
            .collect()
    }

    #[test]
    fn second_order_classics() {
        assert_eq!(weights(2, Stagger::None, 2), vec![r(1, 1), r(-2, 1), r(1, 1)]);
        assert_eq!(weights(1, Stagger::None, 2), vec![r(-1, 2), r(0, 1), r(1, 2)]);
    }

    #[test]
    fn fourth_order_second_derivative() {
        assert_eq!(
            weights(2, Stagger::None, 4),
            vec![r(-1, 12), r(4, 3), r(-5, 2), r(4, 3), r(-1, 12)]
        );
    }

    #[test]
    fn staggered_first_derivative() {
        assert_eq!(weights(1, Stagger::Forward, 2), vec![r(-1, 1), r(1, 1)]);
        assert_eq!(weights(1, Stagger::Forward, 4), vec![r(1, 24), r(-9, 8), r(9, 8), r(-1, 24)]);
        let b = interior_weights::<Rational>(1, Stagger::Backward, 4).unwrap();
        assert_eq!(b.iter().map(|x| x.0).collect::<Vec<_>>(), vec![-2, -1, 0, 1]);
        assert_eq!(b[1].1, r(-9, 8));
    }

    #[test]
    fn physical_scaling() {
        let d = DerivativeSpec::new(FieldId::PRESSURE, 1, 2, Stagger::None).unwrap();
        let s = interior_stencil(&d, 2, &[1.0, 0.5]).unwrap();
        assert_eq!(s.taps.iter().map(|t| t.weight).collect::<Vec<f64>>(), vec![4.0, -8.0, 4.0]);
        assert_eq!(s.taps[0].offset, [0, -1, 0]);
    }

    #[test]
    fn stability_sums() {
        assert!((weight_sum(2, Stagger::None, 4).unwrap() - 16.0 / 3.0).abs() < 1e-15);
        assert!((weight_sum(1, Stagger::Forward, 4).unwrap() - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn even_staggered_rejected() {
        assert!(DerivativeSpec::new(FieldId::PRESSURE, 0, 2, Stagger::Forward).is_err());
        assert!(interior_weights::<f64>(2, Stagger::None, 3).is_err());
    }
}

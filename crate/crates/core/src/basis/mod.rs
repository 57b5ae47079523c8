//! Truncated N-dimensional Taylor bases and the rows they contribute to the
//! constraint matrix.
//!
//! Rows are nondimensionalised by the grid spacing: the unknown vector holds
//! `Δx^α ∂^α f(x0)`, so the Taylor row for a point `x` is
//! `Π_n ξ_n^{α_n} / α_n!` with `ξ_n = (x_n − x0_n) / Δx_n`.

mod conditions;

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use conditions::{bc_family, bc_row, BcKind, BcTerm, BoundaryConditionSpec, Coefficient, Forcing};

/// Identifier of a discretised field. Acoustic solvers use `PRESSURE` and
/// `velocity(axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldId(pub u8);

impl serde::Serialize for FieldId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl FieldId {
    pub const PRESSURE: FieldId = FieldId(0);

    pub const fn velocity(axis: usize) -> FieldId {
        FieldId(1 + axis as u8)
    }

    /// Short name used in file outputs: `p`, `vx`, `vy`, `vz`.
    pub fn name(self) -> String {
        match self.0 {
            0 => "p".into(),
            1 => "vx".into(),
            2 => "vy".into(),
            3 => "vz".into(),
            n => format!("f{n}"),
        }
    }

    pub fn parse(name: &str) -> Option<FieldId> {
        match name {
            "p" => Some(FieldId::PRESSURE),
            "vx" => Some(FieldId::velocity(0)),
            "vy" => Some(FieldId::velocity(1)),
            "vz" => Some(FieldId::velocity(2)),
            _ => None,
        }
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Derivative multi-index `(m, n, l)`, padded to three axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(pub [u8; 3]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; 3]);

    pub fn axis(axis: usize, power: u8) -> Self {
        let mut m = [0u8; 3];
        m[axis] = power;
        MultiIndex(m)
    }

    #[inline]
    pub fn order(self) -> usize {
        self.0.iter().map(|&v| v as usize).sum()
    }

    pub fn add(self, other: MultiIndex) -> MultiIndex {
        MultiIndex([self.0[0] + other.0[0], self.0[1] + other.0[1], self.0[2] + other.0[2]])
    }
}

/// Ordered multi-indices of total order ≤ M: ascending order, then descending
/// powers of the leading axes (`1, x, y, x², xy, y², …` in 2D).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexBasis {
    ndims: usize,
    order: usize,
    indices: Vec<MultiIndex>,
}

impl MultiIndexBasis {
    pub fn ndims(&self) -> usize {
        self.ndims
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, m: MultiIndex) -> Option<usize> {
        self.indices.iter().position(|&x| x == m)
    }
}

/// Builds the basis for an even order `M ≥ 2`.
pub fn build_basis(ndims: usize, order: usize) -> Result<MultiIndexBasis> {
    if !(1..=3).contains(&ndims) {
        return Err(Error::config("ndims", format!("expected 1 to 3, got {ndims}")));
    }
    if order < 2 || order % 2 != 0 {
        return Err(Error::config("boundary.order", format!("order must be even and at least 2, got {order}")));
    }
    Ok(build_basis_any(ndims, order))
}

/// Basis of any order, used internally for staggered collocation.
pub(crate) fn build_basis_any(ndims: usize, order: usize) -> MultiIndexBasis {
    let mut indices = Vec::new();
    for total in 0..=order {
        match ndims {
            1 => indices.push(MultiIndex([total as u8, 0, 0])),
            2 => {
                for a in (0..=total).rev() {
                    indices.push(MultiIndex([a as u8, (total - a) as u8, 0]));
                }
            }
            _ => {
                for a in (0..=total).rev() {
                    for b in (0..=(total - a)).rev() {
                        indices.push(MultiIndex([a as u8, b as u8, (total - a - b) as u8]));
                    }
                }
            }
        }
    }
    MultiIndexBasis { ndims, order, indices }
}

fn factorial<T: Scalar>(n: u8) -> T {
    (1..=n as i64).fold(T::one(), |acc, k| acc * T::from_int(k))
}

fn powi<T: Scalar>(x: &T, n: u8) -> T {
    (0..n).fold(T::one(), |acc, _| acc * x.clone())
}

/// Scaled offsets `(x − x0) / Δx` over the basis axes.
pub fn scaled_offset<T: Scalar>(x: &[T], x0: &[T], spacing: &[T], ndims: usize) -> [T; 3] {
    let mut xi = [T::zero(), T::zero(), T::zero()];
    for n in 0..ndims {
        xi[n] = (x[n].clone() - x0[n].clone()) / spacing[n].clone();
    }
    xi
}

/// `∂^β [Π ξ^α / α!]` evaluated at scaled offset `xi` (derivatives taken in ξ).
pub fn derivative_of_monomial<T: Scalar>(alpha: MultiIndex, beta: MultiIndex, xi: &[T; 3]) -> T {
    let mut out = T::one();
    for n in 0..3 {
        let (a, b) = (alpha.0[n], beta.0[n]);
        if b > a {
            return T::zero();
        }
        let e = a - b;
        if e > 0 {
            out = out * powi(&xi[n], e) / factorial::<T>(e);
        }
    }
    out
}

/// Taylor row `a` with `a · δ = f(x)` for expansion point `x0`.
pub fn taylor_row<T: Scalar>(basis: &MultiIndexBasis, x: &[T], x0: &[T], spacing: &[T]) -> Vec<T> {
    let xi = scaled_offset(x, x0, spacing, basis.ndims);
    taylor_row_scaled(basis, &xi)
}

pub(crate) fn taylor_row_scaled<T: Scalar>(basis: &MultiIndexBasis, xi: &[T; 3]) -> Vec<T> {
    basis
        .indices
        .iter()
        .map(|&alpha| derivative_of_monomial(alpha, MultiIndex::ZERO, xi))
        .collect()
}

/// Column layout of the stacked derivative vector for coupled fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivativeVectorLayout {
    blocks: Vec<(FieldId, MultiIndexBasis)>,
    offsets: Vec<usize>,
}

impl DerivativeVectorLayout {
    pub fn new(blocks: Vec<(FieldId, MultiIndexBasis)>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut acc = 0;
        for (_, b) in &blocks {
            offsets.push(acc);
            acc += b.len();
        }
        Self { blocks, offsets }
    }

    /// Same basis for each listed field.
    pub fn uniform(fields: &[FieldId], basis: &MultiIndexBasis) -> Self {
        Self::new(fields.iter().map(|&f| (f, basis.clone())).collect())
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fields(&self) -> impl Iterator<Item = FieldId> + '_ {
        self.blocks.iter().map(|(f, _)| *f)
    }

    pub fn block(&self, field: FieldId) -> Option<(usize, &MultiIndexBasis)> {
        self.blocks
            .iter()
            .position(|(f, _)| *f == field)
            .map(|i| (self.offsets[i], &self.blocks[i].1))
    }

    pub fn block_index(&self, field: FieldId) -> Option<usize> {
        self.blocks.iter().position(|(f, _)| *f == field)
    }

    pub fn blocks(&self) -> &[(FieldId, MultiIndexBasis)] {
        &self.blocks
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn basis_counts_and_order() {
        let b = build_basis(1, 2).unwrap();
        assert_eq!(b.indices(), &[MultiIndex([0, 0, 0]), MultiIndex([1, 0, 0]), MultiIndex([2, 0, 0])]);
        assert_eq!(build_basis(2, 4).unwrap().len(), 15);
        assert_eq!(build_basis(3, 4).unwrap().len(), 35);
        let b2 = build_basis(2, 2).unwrap();
        let expect = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
        for (m, e) in b2.indices().iter().zip(expect) {
            assert_eq!([m.0[0], m.0[1]], e);
        }
        let b3 = build_basis(3, 1 + 1).unwrap();
        assert_eq!(b3.indices()[1..4], [MultiIndex([1, 0, 0]), MultiIndex([0, 1, 0]), MultiIndex([0, 0, 1])]);
    }

    #[test]
    fn odd_or_zero_order_rejected() {
        assert!(matches!(build_basis(2, 3), Err(Error::Config { .. })));
        assert!(build_basis(2, 0).is_err());
        assert!(build_basis(4, 2).is_err());
    }

    #[test]
    fn one_dimensional_rows() {
        let b = build_basis(1, 2).unwrap();
        let r = |x: i64| {
            taylor_row(
                &b,
                &[Rational::from_int(x)],
                &[Rational::from_int(0)],
                &[Rational::from_int(1)],
            )
        };
        assert_eq!(r(1), vec![Rational::from_int(1), Rational::from_int(1), Rational::new(1, 2)]);
        assert_eq!(r(-1), vec![Rational::from_int(1), Rational::from_int(-1), Rational::new(1, 2)]);
        assert_eq!(r(0), vec![Rational::from_int(1), Rational::from_int(0), Rational::from_int(0)]);
    }

    #[test]
    fn monomial_derivatives() {
        let xi = [0.7f64, -1.3, 0.0];
        assert_eq!(derivative_of_monomial(MultiIndex([2, 0, 0]), MultiIndex([2, 0, 0]), &xi), 1.0);
        assert_eq!(derivative_of_monomial(MultiIndex([2, 0, 0]), MultiIndex([0, 1, 0]), &xi), 0.0);
        // ∂²/∂x² of x³y/(3!·1!) = x y
        let v = derivative_of_monomial(MultiIndex([3, 1, 0]), MultiIndex([2, 0, 0]), &xi);
        assert!((v - 0.7 * -1.3).abs() < 1e-15);
    }

    #[test]
    fn layout_offsets() {
        let b = build_basis(2, 2).unwrap();
        let l = DerivativeVectorLayout::uniform(&[FieldId::velocity(0), FieldId::velocity(1)], &b);
        assert_eq!(l.len(), 12);
        assert_eq!(l.block(FieldId::velocity(1)).unwrap().0, 6);
        assert!(l.block(FieldId::PRESSURE).is_none());
    }
}

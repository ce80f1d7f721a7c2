//! Charged truncated power series in the analytic coordinates z^{±a} with
//! [`HarmonicPoly`] coefficients, and the flat-frame derivation calculus
//! restricted to the harmonic slice B = I.
//!
//! In analytic coordinates the flat 𝔰𝔭₁ fields act as
//!   H₀  = (u-grading) − z^{+a}∂₊a + z^{−a}∂₋a,
//!   H₊₊ = (u-raising) − z^{−a}∂₊a,
//!   H₋₋ = (u-lowering) − z^{+a}∂₋a,
//! and e⁰₊a = ∂₊a, e⁰₋a = ∂₋a. These formulas are derived once from the
//! central-coordinate fields through z^{ia} = uⁱ₊z^{+a} + uⁱ₋z^{−a}; the
//! [`central`] module checks the transport exactly.

pub mod central;
pub mod solve;

use crate::harmonic::HarmonicPoly;
use crate::scalar::Scalar;
use num::complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

pub use solve::{solve_charged, RaisingSystem};

#[derive(Debug, Error, PartialEq)]
pub enum JetsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("charge mismatch: {0}")]
    ChargeMismatch(String),
    #[error("linear system is inconsistent at the configured degree bounds")]
    Inconsistent,
    #[error("kernel survives the slice constraint ({0} undetermined parameters)")]
    Underdetermined(usize),
    #[error("degree bound exceeded: {0}")]
    DegreeOverflow(String),
    #[error("Newton iteration failed to converge after {0} iterations")]
    NoConvergence(usize),
    #[error("singular Jacobian in Newton inversion")]
    SingularJacobian,
    #[error("series map is not z-triangular: correction has z-degree {0}")]
    NotTriangular(u32),
    #[error("point is not on Sp1(C): |det U - 1| = {0:.3e}")]
    DeterminantViolation(f64),
    #[error("the E_A action needs an equivariance tag; bare scalars are invariant")]
    MissingEquivariance,
}

/// Equivariance index signature over 𝔰𝔭ₙ: counts of upper and lower
/// fundamental slots. Empty means scalar (𝔰𝔭ₙ-invariant).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EquivarianceTag {
    pub upper: usize,
    pub lower: usize,
}

impl EquivarianceTag {
    pub fn scalar() -> Self {
        EquivarianceTag::default()
    }

    pub fn is_scalar(&self) -> bool {
        self.upper == 0 && self.lower == 0
    }

    pub fn slots(&self) -> usize {
        self.upper + self.lower
    }
}

/// Exponent vector over the 4n analytic coordinates: first the 2n z⁺
/// exponents, then the 2n z⁻ exponents.
pub type ZExp = Vec<u32>;

pub(crate) fn zexp_degree(e: &[u32]) -> u32 {
    e.iter().sum()
}

/// Charge carried by the z-part of a monomial: −Σm_a + Σn_a.
pub(crate) fn zexp_charge(e: &[u32], n2: usize) -> i64 {
    let plus: i64 = e[..n2].iter().map(|&x| x as i64).sum();
    let minus: i64 = e[n2..].iter().map(|&x| x as i64).sum();
    minus - plus
}

/// Truncated series in z^{±a} with exact coefficients on Sp₁(ℂ).
#[derive(Clone, PartialEq)]
pub struct ChargedSeries<S: Scalar> {
    n: usize,
    order: u32,
    valid: u32,
    charge: Option<i64>,
    terms: BTreeMap<ZExp, HarmonicPoly<S>>,
}

impl<S: Scalar> std::fmt::Debug for ChargedSeries<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ChargedSeries(n={}, D={}, valid={}, charge={:?}; ",
            self.n, self.order, self.valid, self.charge
        )?;
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (e, c) in &self.terms {
            write!(f, "[z^{:?}]({:?}) ", e, c)?;
        }
        write!(f, ")")
    }
}

impl<S: Scalar> ChargedSeries<S> {
    pub fn zero(n: usize, order: u32, charge: i64) -> Self {
        ChargedSeries {
            n,
            order,
            valid: order,
            charge: Some(charge),
            terms: BTreeMap::new(),
        }
    }

    /// A z-independent series with the given coefficient.
    pub fn from_coefficient(n: usize, order: u32, h: HarmonicPoly<S>) -> Self {
        let charge = h.charge();
        let mut terms = BTreeMap::new();
        if !h.is_zero() {
            terms.insert(vec![0; 4 * n], h);
        }
        ChargedSeries {
            n,
            order,
            valid: order,
            charge,
            terms,
        }
    }

    pub fn constant(n: usize, order: u32, c: S) -> Self {
        Self::from_coefficient(n, order, HarmonicPoly::constant(c))
    }

    /// The coordinate z^{+a} (plus = true) or z^{−a}, 0-based a.
    pub fn coordinate(n: usize, order: u32, plus: bool, a: usize) -> Self {
        assert!(a < 2 * n, "coordinate index out of range");
        let mut e = vec![0u32; 4 * n];
        let idx = if plus { a } else { 2 * n + a };
        e[idx] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(e, HarmonicPoly::one());
        ChargedSeries {
            n,
            order,
            valid: order,
            charge: Some(if plus { -1 } else { 1 }),
            terms,
        }
    }

    /// Build from explicit terms; verifies the charge bookkeeping.
    pub fn from_terms(
        n: usize,
        order: u32,
        charge: i64,
        terms: BTreeMap<ZExp, HarmonicPoly<S>>,
    ) -> Result<Self, JetsError> {
        let mut clean = BTreeMap::new();
        for (e, h) in terms {
            if e.len() != 4 * n {
                return Err(JetsError::ShapeMismatch(format!(
                    "exponent vector length {} for n = {n}",
                    e.len()
                )));
            }
            if h.is_zero() || zexp_degree(&e) > order {
                continue;
            }
            for (ue, _) in h.terms() {
                let total = crate::harmonic::monomial_charge(ue) + zexp_charge(&e, 2 * n);
                if total != charge {
                    return Err(JetsError::ChargeMismatch(format!(
                        "term u^{ue:?} z^{e:?} has charge {total}, series declares {charge}"
                    )));
                }
            }
            clean.insert(e, h);
        }
        Ok(ChargedSeries {
            n,
            order,
            valid: order,
            charge: Some(charge),
            terms: clean,
        })
    }

    fn assert_consistent(&self) {
        if cfg!(debug_assertions) {
            if let Some(k) = self.charge {
                for (e, h) in &self.terms {
                    let zc = zexp_charge(e, 2 * self.n);
                    for (ue, _) in h.terms() {
                        debug_assert_eq!(
                            crate::harmonic::monomial_charge(ue) + zc,
                            k,
                            "charge bookkeeping violated"
                        );
                    }
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn valid_order(&self) -> u32 {
        self.valid
    }

    pub fn charge(&self) -> Option<i64> {
        self.charge
    }

    pub(crate) fn set_charge(&mut self, charge: Option<i64>) {
        self.charge = charge;
        self.assert_consistent();
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ZExp, &HarmonicPoly<S>)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest total z-degree with a nonzero term (`None` when zero).
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| zexp_degree(e)).min()
    }

    pub fn coefficient(&self, e: &[u32]) -> HarmonicPoly<S> {
        self.terms.get(e).cloned().unwrap_or_else(HarmonicPoly::zero)
    }

    pub(crate) fn insert_coefficient(&mut self, e: ZExp, h: HarmonicPoly<S>) {
        if zexp_degree(&e) <= self.valid {
            Self::insert_term(&mut self.terms, e, h);
        }
    }

    fn with_valid(mut self, valid: u32) -> Self {
        self.valid = valid.min(self.order);
        self.terms.retain(|e, _| zexp_degree(e) <= self.valid);
        self
    }

    /// Restrict the guaranteed order (drops terms above it).
    pub fn truncate_valid(&self, valid: u32) -> Self {
        self.clone().with_valid(valid.min(self.valid))
    }

    /// Declare the series exact to the full order. Only sound for data that
    /// is an exact polynomial rather than a truncation — e.g. a prepotential
    /// and its z-derivatives.
    pub fn mark_entire(mut self) -> Self {
        self.valid = self.order;
        self
    }

    fn insert_term(terms: &mut BTreeMap<ZExp, HarmonicPoly<S>>, e: ZExp, h: HarmonicPoly<S>) {
        if h.is_zero() {
            return;
        }
        match terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(h);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&h);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    fn merged_charge(a: Option<i64>, b: Option<i64>, az: bool, bz: bool) -> Option<i64> {
        match (a, b) {
            (Some(x), Some(y)) if x == y => Some(x),
            (Some(x), _) if bz => Some(x),
            (_, Some(y)) if az => Some(y),
            _ => None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut terms = self.terms.clone();
        for (e, h) in &other.terms {
            Self::insert_term(&mut terms, e.clone(), h.clone());
        }
        let s = ChargedSeries {
            n: self.n,
            order: self.order.min(other.order),
            valid: self.valid.min(other.valid),
            charge: Self::merged_charge(self.charge, other.charge, self.is_zero(), other.is_zero()),
            terms,
        }
        .with_valid(self.valid.min(other.valid));
        s.assert_consistent();
        s
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        ChargedSeries {
            n: self.n,
            order: self.order,
            valid: self.valid,
            charge: self.charge,
            terms: self.terms.iter().map(|(e, h)| (e.clone(), h.neg())).collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            let mut out = self.clone();
            out.terms.clear();
            return out;
        }
        ChargedSeries {
            n: self.n,
            order: self.order,
            valid: self.valid,
            charge: self.charge,
            terms: self
                .terms
                .iter()
                .map(|(e, h)| (e.clone(), h.scale(c)))
                .collect(),
        }
    }

    /// Multiply by a z-independent coefficient.
    pub fn scale_coefficient(&self, h: &HarmonicPoly<S>) -> Self {
        let charge = match (self.charge, h.charge()) {
            (Some(a), Some(b)) => Some(a + b),
            (c, _) if h.is_zero() => c,
            _ => None,
        };
        let mut terms = BTreeMap::new();
        if !h.is_zero() {
            for (e, c) in &self.terms {
                Self::insert_term(&mut terms, e.clone(), c.mul(h));
            }
        }
        let s = ChargedSeries {
            n: self.n,
            order: self.order,
            valid: self.valid,
            charge,
            terms,
        };
        s.assert_consistent();
        s
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let order = self.order.min(other.order);
        let ord_self = self.min_degree().unwrap_or(order + 1);
        let ord_other = other.min_degree().unwrap_or(order + 1);
        let valid = (self.valid + ord_other)
            .min(other.valid + ord_self)
            .min(order);
        let charge = match (self.charge, other.charge) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let mut terms = BTreeMap::new();
        for (e1, h1) in &self.terms {
            let d1 = zexp_degree(e1);
            for (e2, h2) in &other.terms {
                if d1 + zexp_degree(e2) > valid {
                    continue;
                }
                let e: ZExp = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                Self::insert_term(&mut terms, e, h1.mul(h2));
            }
        }
        let s = ChargedSeries {
            n: self.n,
            order,
            valid,
            charge,
            terms,
        };
        s.assert_consistent();
        s
    }

    /// Partial derivative ∂/∂z^{±a}; lowers the valid order by one and
    /// raises (z⁺) or lowers (z⁻) the charge by one.
    pub fn d_z(&self, plus: bool, a: usize) -> Self {
        assert!(a < 2 * self.n, "index out of range");
        let idx = if plus { a } else { 2 * self.n + a };
        let mut terms = BTreeMap::new();
        for (e, h) in &self.terms {
            if e[idx] == 0 {
                continue;
            }
            let mut de = e.clone();
            de[idx] -= 1;
            Self::insert_term(&mut terms, de, h.scale(&S::from_i64(e[idx] as i64)));
        }
        let s = ChargedSeries {
            n: self.n,
            order: self.order,
            valid: self.valid,
            charge: self.charge.map(|k| k + if plus { 1 } else { -1 }),
            terms,
        }
        .with_valid(self.valid.saturating_sub(1));
        s.assert_consistent();
        s
    }

    /// H₀ action: multiplies every term by its total charge.
    pub fn h0_op(&self) -> Self {
        let mut terms = BTreeMap::new();
        for (e, h) in &self.terms {
            let zc = zexp_charge(e, 2 * self.n);
            let mut scaled = HarmonicPoly::zero();
            for (k, part) in h.charge_components() {
                scaled = scaled.add(&part.scale(&S::from_i64(k + zc)));
            }
            Self::insert_term(&mut terms, e.clone(), scaled);
        }
        ChargedSeries {
            n: self.n,
            order: self.order,
            valid: self.valid,
            charge: self.charge,
            terms,
        }
    }

    /// H₊₊ action: u-raising minus z^{−a}∂/∂z^{+a}; raises the charge by 2.
    pub fn hpp_op(&self) -> Self {
        let n2 = 2 * self.n;
        let mut terms = BTreeMap::new();
        for (e, h) in &self.terms {
            Self::insert_term(&mut terms, e.clone(), h.d_hpp());
            for a in 0..n2 {
                if e[a] == 0 {
                    continue;
                }
                let mut se = e.clone();
                se[a] -= 1;
                se[n2 + a] += 1;
                Self::insert_term(&mut terms, se, h.scale(&S::from_i64(-(e[a] as i64))));
            }
        }
        let s = ChargedSeries {
            n: self.n,
            order: self.order,
            valid: self.valid,
            charge: self.charge.map(|k| k + 2),
            terms,
        };
        s.assert_consistent();
        s
    }

    /// H₋₋ action: u-lowering minus z^{+a}∂/∂z^{−a}; lowers the charge by 2.
    pub fn hmm_op(&self) -> Self {
        let n2 = 2 * self.n;
        let mut terms = BTreeMap::new();
        for (e, h) in &self.terms {
            Self::insert_term(&mut terms, e.clone(), h.d_hmm());
            for a in 0..n2 {
                if e[n2 + a] == 0 {
                    continue;
                }
                let mut se = e.clone();
                se[n2 + a] -= 1;
                se[a] += 1;
                Self::insert_term(&mut terms, se, h.scale(&S::from_i64(-(e[n2 + a] as i64))));
            }
        }
        let s = ChargedSeries {
            n: self.n,
            order: self.order,
            valid: self.valid,
            charge: self.charge.map(|k| k - 2),
            terms,
        };
        s.assert_consistent();
        s
    }

    /// Substitute z^{+a} ↦ args\[a\], z^{−a} ↦ args\[2n+a\] (formal, truncated).
    ///
    /// Each argument must carry the charge of the coordinate it replaces
    /// (−1 for z⁺, +1 for z⁻) so charges are preserved.
    pub fn substitute_all(&self, args: &[ChargedSeries<S>]) -> Result<Self, JetsError> {
        let n4 = 4 * self.n;
        if args.len() != n4 {
            return Err(JetsError::ShapeMismatch(format!(
                "expected {} substitution arguments, got {}",
                n4,
                args.len()
            )));
        }
        let mut valid = self.valid;
        for (i, a) in args.iter().enumerate() {
            if a.n != self.n {
                return Err(JetsError::ShapeMismatch("argument dimension".into()));
            }
            let expected = if i < 2 * self.n { -1 } else { 1 };
            if let Some(k) = a.charge {
                if k != expected && !a.is_zero() {
                    return Err(JetsError::ChargeMismatch(format!(
                        "substitution argument {i} has charge {k}, expected {expected}"
                    )));
                }
            }
            valid = valid.min(a.valid);
        }
        let mut powers: Vec<Vec<ChargedSeries<S>>> = args
            .iter()
            .map(|a| {
                vec![
                    ChargedSeries::constant(self.n, self.order, S::one()),
                    a.clone(),
                ]
            })
            .collect();
        let mut out = ChargedSeries::zero(self.n, self.order, 0);
        out.charge = self.charge;
        for (e, h) in &self.terms {
            let mut term = ChargedSeries::from_coefficient(self.n, self.order, h.clone());
            for (i, &exp) in e.iter().enumerate() {
                if exp == 0 {
                    continue;
                }
                while powers[i].len() <= exp as usize {
                    let next = powers[i].last().unwrap().mul(&args[i]);
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][exp as usize]);
            }
            out = out.add(&term);
        }
        out.charge = self.charge;
        Ok(out.with_valid(valid))
    }

    /// Spec-level substitute: `self` independent of z⁺, `zminus_args` replace
    /// the z⁻ coordinates (each of charge +1).
    pub fn substitute(&self, zminus_args: &[ChargedSeries<S>]) -> Result<Self, JetsError> {
        let n2 = 2 * self.n;
        if zminus_args.len() != n2 {
            return Err(JetsError::ShapeMismatch(format!(
                "expected {} z⁻ arguments, got {}",
                n2,
                zminus_args.len()
            )));
        }
        for (e, _) in &self.terms {
            if e[..n2].iter().any(|&m| m > 0) {
                return Err(JetsError::ShapeMismatch(
                    "series depends on z⁺; substitute expects a z⁻-only series".into(),
                ));
            }
        }
        let mut args: Vec<ChargedSeries<S>> = (0..n2)
            .map(|a| ChargedSeries::coordinate(self.n, self.order, true, a))
            .collect();
        args.extend_from_slice(zminus_args);
        self.substitute_all(&args)
    }

    /// Numeric evaluation at (U, z) with z = (z^{+a}.., z^{−a}..).
    pub fn eval(&self, u: &[[Complex64; 2]; 2], z: &[Complex64]) -> Result<Complex64, JetsError> {
        let det = u[0][0] * u[1][1] - u[1][0] * u[0][1];
        let err = (det - Complex64::new(1.0, 0.0)).norm();
        if err >= 1e-10 {
            return Err(JetsError::DeterminantViolation(err));
        }
        if z.len() != 4 * self.n {
            return Err(JetsError::ShapeMismatch("evaluation point length".into()));
        }
        Ok(self.eval_unchecked(u, z))
    }

    pub(crate) fn eval_unchecked(&self, u: &[[Complex64; 2]; 2], z: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, h) in &self.terms {
            let mut term = h.eval_unchecked(u);
            for (i, &exp) in e.iter().enumerate() {
                for _ in 0..exp {
                    term *= z[i];
                }
            }
            acc += term;
        }
        acc
    }

    /// Exact restriction to the U = I₂ slice: a polynomial in z alone.
    pub fn slice_identity(&self) -> BTreeMap<ZExp, S> {
        let mut out = BTreeMap::new();
        for (e, h) in &self.terms {
            let v = h.eval_slice_identity();
            if !v.is_zero() {
                out.insert(e.clone(), v);
            }
        }
        out
    }

    /// Largest coefficient magnitude (for residual reporting).
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|h| h.max_abs()).fold(0.0, f64::max)
    }

    /// Exact equality of all terms up to the common valid order.
    pub fn eq_to_valid(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }
}

/// Apply a flat basis field to a scalar series on the harmonic slice.
///
/// `E(A)` acts algebraically: scalars (empty tag) are invariant, so the
/// action is zero; tensor families go through [`SeriesTensor::apply_e`].
pub fn apply_flat_field<S: Scalar>(
    label: crate::algebra::BasisIndex,
    s: &ChargedSeries<S>,
) -> ChargedSeries<S> {
    use crate::algebra::BasisIndex as B;
    match label {
        B::H0 => s.h0_op(),
        B::Hpp => s.hpp_op(),
        B::Hmm => s.hmm_op(),
        B::EPlus(a) => s.d_z(true, a),
        B::EMinus(a) => s.d_z(false, a),
        B::E(_) => {
            let mut out = ChargedSeries::zero(s.n(), s.order(), 0);
            out.charge = s.charge();
            out.valid = s.valid_order();
            out
        }
    }
}

/// A family of series carrying 𝔰𝔭ₙ index slots (upper slots first).
#[derive(Clone, Debug)]
pub struct SeriesTensor<S: Scalar> {
    pub tag: EquivarianceTag,
    pub dim: usize,
    pub components: Vec<ChargedSeries<S>>,
}

impl<S: Scalar> SeriesTensor<S> {
    pub fn new(
        tag: EquivarianceTag,
        dim: usize,
        components: Vec<ChargedSeries<S>>,
    ) -> Result<Self, JetsError> {
        if components.len() != dim.pow(tag.slots() as u32) {
            return Err(JetsError::ShapeMismatch(format!(
                "tensor with {} slots over dimension {dim} needs {} components",
                tag.slots(),
                dim.pow(tag.slots() as u32)
            )));
        }
        Ok(SeriesTensor {
            tag,
            dim,
            components,
        })
    }

    fn strides(&self) -> Vec<usize> {
        let s = self.tag.slots();
        (0..s).map(|i| self.dim.pow((s - 1 - i) as u32)).collect()
    }

    /// E_A action per the equivariance rules: −(E_A)ᵃ_b on each upper slot,
    /// +(E_A)ᵇ_a on each lower slot.
    pub fn apply_e(&self, e_matrix: &[Vec<i64>]) -> Result<Self, JetsError> {
        if self.tag.is_scalar() {
            return Err(JetsError::MissingEquivariance);
        }
        let strides = self.strides();
        let mut out: Vec<ChargedSeries<S>> = self
            .components
            .iter()
            .map(|c| {
                let mut z = ChargedSeries::zero(c.n(), c.order(), 0);
                z.charge = c.charge();
                z.valid = c.valid_order();
                z
            })
            .collect();
        for (idx, comp) in self.components.iter().enumerate() {
            if comp.is_zero() {
                continue;
            }
            for (slot, &stride) in strides.iter().enumerate() {
                let upper = slot < self.tag.upper;
                let src = (idx / stride) % self.dim;
                for tgt in 0..self.dim {
                    let coeff = if upper {
                        // out^a = −(E)ᵃ_b f^b: source index b = src, output a = tgt.
                        -e_matrix[tgt][src]
                    } else {
                        // out_a = +(E)ᵇ_a f_b.
                        e_matrix[src][tgt]
                    };
                    if coeff == 0 {
                        continue;
                    }
                    let out_idx =
                        (idx as i64 + (tgt as i64 - src as i64) * stride as i64) as usize;
                    out[out_idx] = out[out_idx].add(&comp.scale(&S::from_i64(coeff)));
                }
            }
        }
        Ok(SeriesTensor {
            tag: self.tag,
            dim: self.dim,
            components: out,
        })
    }

    /// Numeric evaluation of every component.
    pub fn eval(
        &self,
        u: &[[Complex64; 2]; 2],
        z: &[Complex64],
    ) -> Result<Vec<Complex64>, JetsError> {
        self.components.iter().map(|c| c.eval(u, z)).collect()
    }
}

// ---------------------------------------------------------------------------
// Series matrices (used for φᵃ_b, ψ, Jacobians).
// ---------------------------------------------------------------------------

/// Dense matrix of charged series.
#[derive(Clone, Debug)]
pub struct SeriesMatrix<S: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<ChargedSeries<S>>,
}

impl<S: Scalar> SeriesMatrix<S> {
    pub fn zeros(rows: usize, cols: usize, n: usize, order: u32, charge: i64) -> Self {
        SeriesMatrix {
            rows,
            cols,
            entries: vec![ChargedSeries::zero(n, order, charge); rows * cols],
        }
    }

    pub fn identity(m: usize, n: usize, order: u32) -> Self {
        let mut out = Self::zeros(m, m, n, order, 0);
        for i in 0..m {
            *out.at_mut(i, i) = ChargedSeries::constant(n, order, S::one());
        }
        out
    }

    pub fn at(&self, i: usize, j: usize) -> &ChargedSeries<S> {
        &self.entries[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut ChargedSeries<S> {
        &mut self.entries[i * self.cols + j]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let proto = &self.entries[0];
        let mut out = Self::zeros(self.rows, other.cols, proto.n(), proto.order(), 0);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc: Option<ChargedSeries<S>> = None;
                for k in 0..self.cols {
                    let term = self.at(i, k).mul(other.at(k, j));
                    acc = Some(match acc {
                        None => term,
                        Some(a) => a.add(&term),
                    });
                }
                *out.at_mut(i, j) = acc.unwrap();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        SeriesMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        SeriesMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&ChargedSeries<S>) -> ChargedSeries<S>) -> Self {
        SeriesMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    fn check_off_identity(&self) -> Result<SeriesMatrix<S>, JetsError> {
        assert_eq!(self.rows, self.cols);
        let proto = &self.entries[0];
        let id = Self::identity(self.rows, proto.n(), proto.order());
        let nmat = self.sub(&id);
        for e in &nmat.entries {
            if let Some(0) = e.min_degree() {
                return Err(JetsError::NotTriangular(0));
            }
        }
        Ok(nmat)
    }

    /// Inverse of I + N where every entry of N has z-degree ≥ 1: truncated
    /// Neumann series Σ (−N)^k.
    pub fn inverse_unipotent(&self) -> Result<Self, JetsError> {
        let nmat = self.check_off_identity()?;
        let proto = &self.entries[0];
        let (n, order) = (proto.n(), proto.order());
        let mut out = Self::identity(self.rows, n, order);
        let mut pw = Self::identity(self.rows, n, order);
        let mut negate = true;
        for _ in 0..order {
            pw = pw.matmul(&nmat);
            if pw.is_zero() {
                break;
            }
            out = if negate { out.sub(&pw) } else { out.add(&pw) };
            negate = !negate;
        }
        Ok(out)
    }

    /// Truncated matrix logarithm of I + N (N of z-degree ≥ 1).
    pub fn log_unipotent(&self) -> Result<Self, JetsError> {
        let nmat = self.check_off_identity()?;
        let proto = &self.entries[0];
        let (n, order) = (proto.n(), proto.order());
        let mut out = Self::zeros(self.rows, self.rows, n, order, 0);
        let mut pw = Self::identity(self.rows, n, order);
        for k in 1..=order as i64 {
            pw = pw.matmul(&nmat);
            if pw.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            let coeff = S::from_ratio(sign, k);
            out = out.add(&pw.map(|e| e.scale(&coeff)));
        }
        Ok(out)
    }

    /// Truncated matrix exponential of a matrix with z-degree ≥ 1 entries.
    pub fn exp_nilpotent(&self) -> Result<Self, JetsError> {
        assert_eq!(self.rows, self.cols);
        let proto = &self.entries[0];
        let (n, order) = (proto.n(), proto.order());
        for e in &self.entries {
            if let Some(0) = e.min_degree() {
                return Err(JetsError::NotTriangular(0));
            }
        }
        let mut out = Self::identity(self.rows, n, order);
        let mut pw = Self::identity(self.rows, n, order);
        let mut fact = 1i64;
        for k in 1..=order as i64 {
            pw = pw.matmul(self);
            fact *= k;
            if pw.is_zero() {
                break;
            }
            out = out.add(&pw.map(|e| e.scale(&S::from_ratio(1, fact))));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Series-level and numeric inversion of z-maps.
// ---------------------------------------------------------------------------

/// Invert the map z ↦ (components) when it is the identity plus corrections
/// of z-degree ≥ 2 ("z-triangular"). Components are ordered (z⁺.., z⁻..).
pub fn invert_z_map<S: Scalar>(
    components: &[ChargedSeries<S>],
) -> Result<Vec<ChargedSeries<S>>, JetsError> {
    let n = components[0].n();
    let order = components[0].order();
    let n4 = 4 * n;
    if components.len() != n4 {
        return Err(JetsError::ShapeMismatch("z-map needs 4n components".into()));
    }
    let identity: Vec<ChargedSeries<S>> = (0..n4)
        .map(|i| ChargedSeries::coordinate(n, order, i < 2 * n, i % (2 * n)))
        .collect();
    let corrections: Vec<ChargedSeries<S>> = components
        .iter()
        .zip(&identity)
        .map(|(c, id)| c.sub(id))
        .collect();
    for c in &corrections {
        if let Some(d) = c.min_degree() {
            if d < 2 {
                return Err(JetsError::NotTriangular(d));
            }
        }
    }
    // Fixed point w = z − G(w); each sweep is exact one z-degree further.
    let mut inverse = identity.clone();
    for _ in 0..order {
        let mut next = Vec::with_capacity(n4);
        let mut stable = true;
        for (i, id) in identity.iter().enumerate() {
            let g = corrections[i].substitute_all(&inverse)?;
            let cand = id.sub(&g);
            if !cand.eq_to_valid(&inverse[i]) {
                stable = false;
            }
            next.push(cand);
        }
        inverse = next;
        if stable {
            break;
        }
    }
    Ok(inverse)
}

/// Newton inversion of the numeric map z ↦ φ(U, z) at fixed U.
///
/// `components` are the 4n map components ordered (z⁺.., z⁻..). Iterates
/// from `target` until ‖φ(z) − target‖ < 10⁻¹².
pub fn invert_map_numeric<S: Scalar>(
    components: &[ChargedSeries<S>],
    u: &[[Complex64; 2]; 2],
    target: &[Complex64],
    max_iter: usize,
) -> Result<Vec<Complex64>, JetsError> {
    let n = components[0].n();
    let n4 = 4 * n;
    if components.len() != n4 || target.len() != n4 {
        return Err(JetsError::ShapeMismatch("numeric inversion shapes".into()));
    }
    let mut jac_series = Vec::with_capacity(n4 * n4);
    for comp in components {
        for j in 0..n4 {
            jac_series.push(comp.d_z(j < 2 * n, j % (2 * n)));
        }
    }
    let mut z: Vec<Complex64> = target.to_vec();
    for _ in 0..max_iter {
        let f: Vec<Complex64> = components
            .iter()
            .map(|c| c.eval_unchecked(u, &z))
            .collect();
        let resid: Vec<Complex64> = f.iter().zip(target).map(|(a, b)| a - b).collect();
        let err: f64 = resid.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if err < 1e-12 {
            return Ok(z);
        }
        let mut jac = crate::numeric::CMat::zeros(n4, n4);
        for i in 0..n4 {
            for j in 0..n4 {
                *jac.at_mut(i, j) = jac_series[i * n4 + j].eval_unchecked(u, &z);
            }
        }
        let step = crate::numeric::lu_solve(&jac, &resid).ok_or(JetsError::SingularJacobian)?;
        for (zi, si) in z.iter_mut().zip(&step) {
            *zi -= si;
        }
    }
    Err(JetsError::NoConvergence(max_iter))
}

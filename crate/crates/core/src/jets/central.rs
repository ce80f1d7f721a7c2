//! Central-coordinate representation of charged series.
//!
//! The same function can be written over the analytic coordinates z^{±a} or
//! the central coordinates z^{ia}; the two are related by
//! z^{ia} = uⁱ₊ z^{+a} + uⁱ₋ z^{−a}, equivalently z^{+a} = u²₋z^{1a} − u¹₋z^{2a}
//! and z^{−a} = −u²₊z^{1a} + u¹₊z^{2a}. In central coordinates the 𝔰𝔭₁
//! fields act on the u-coefficients alone, which gives an independent route
//! for checking the analytic-coordinate operator formulas.

use super::{zexp_degree, ChargedSeries, ZExp};
use crate::harmonic::HarmonicPoly;
use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// Polynomial in the central coordinates z^{ia} with coefficients on Sp₁(ℂ).
///
/// Exponents are indexed i·2n + a with i ∈ {0,1}.
#[derive(Clone, Debug, PartialEq)]
pub struct CentralPoly<S: Scalar> {
    pub n: usize,
    pub order: u32,
    pub terms: BTreeMap<ZExp, HarmonicPoly<S>>,
}

impl<S: Scalar> CentralPoly<S> {
    pub fn zero(n: usize, order: u32) -> Self {
        CentralPoly {
            n,
            order,
            terms: BTreeMap::new(),
        }
    }

    fn insert(&mut self, e: ZExp, h: HarmonicPoly<S>) {
        if h.is_zero() || zexp_degree(&e) > self.order {
            return;
        }
        match self.terms.entry(e) {
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

    /// Coefficient-wise derivation (the central z^{ia} are H-invariant).
    pub fn map_coeff(&self, f: impl Fn(&HarmonicPoly<S>) -> HarmonicPoly<S>) -> Self {
        let mut out = Self::zero(self.n, self.order);
        for (e, h) in &self.terms {
            out.insert(e.clone(), f(h));
        }
        out
    }
}

/// Rewrite an analytic-coordinate series over the central coordinates.
pub fn to_central<S: Scalar>(s: &ChargedSeries<S>) -> CentralPoly<S> {
    let n = s.n();
    let n2 = 2 * n;
    let order = s.order();
    let mut out = CentralPoly::zero(n, order);
    // z^{+a} = u²₋ z^{1a} − u¹₋ z^{2a}; z^{−a} = −u²₊ z^{1a} + u¹₊ z^{2a}.
    let plus_sub = |a: usize| {
        vec![
            (a, HarmonicPoly::<S>::monomial([0, 0, 0, 1], S::one())),
            (n2 + a, HarmonicPoly::monomial([0, 0, 1, 0], S::from_i64(-1))),
        ]
    };
    let minus_sub = |a: usize| {
        vec![
            (a, HarmonicPoly::<S>::monomial([0, 1, 0, 0], S::from_i64(-1))),
            (n2 + a, HarmonicPoly::monomial([1, 0, 0, 0], S::one())),
        ]
    };
    for (e, h) in s.terms() {
        // Expand the product of substituted factors.
        let mut acc: Vec<(ZExp, HarmonicPoly<S>)> = vec![(vec![0; 4 * n], h.clone())];
        for (idx, &exp) in e.iter().enumerate() {
            let sub = if idx < n2 {
                plus_sub(idx)
            } else {
                minus_sub(idx - n2)
            };
            for _ in 0..exp {
                let mut next = Vec::with_capacity(acc.len() * sub.len());
                for (ze, coeff) in &acc {
                    for (slot, factor) in &sub {
                        let mut ne = ze.clone();
                        ne[*slot] += 1;
                        next.push((ne, coeff.mul(factor)));
                    }
                }
                acc = next;
            }
        }
        for (ze, coeff) in acc {
            out.insert(ze, coeff);
        }
    }
    out
}

/// Rewrite a central polynomial back over the analytic coordinates.
///
/// The result's charge is recomputed; it is `Some` exactly when the function
/// is charge-homogeneous.
pub fn from_central<S: Scalar>(p: &CentralPoly<S>) -> ChargedSeries<S> {
    let n = p.n;
    let n2 = 2 * n;
    let order = p.order;
    // z^{1a} = u¹₊ z^{+a} + u¹₋ z^{−a}; z^{2a} = u²₊ z^{+a} + u²₋ z^{−a}.
    let sub = |idx: usize| {
        let (i, a) = (idx / n2, idx % n2);
        let (up, dn) = if i == 0 {
            ([1u32, 0, 0, 0], [0u32, 0, 1, 0])
        } else {
            ([0, 1, 0, 0], [0, 0, 0, 1])
        };
        vec![
            (a, HarmonicPoly::<S>::monomial(up, S::one())),
            (n2 + a, HarmonicPoly::monomial(dn, S::one())),
        ]
    };
    let mut raw: BTreeMap<ZExp, HarmonicPoly<S>> = BTreeMap::new();
    for (e, h) in &p.terms {
        let mut acc: Vec<(ZExp, HarmonicPoly<S>)> = vec![(vec![0; 4 * n], h.clone())];
        for (idx, &exp) in e.iter().enumerate() {
            let choices = sub(idx);
            for _ in 0..exp {
                let mut next = Vec::with_capacity(acc.len() * choices.len());
                for (ze, coeff) in &acc {
                    for (slot, factor) in &choices {
                        let mut ne = ze.clone();
                        ne[*slot] += 1;
                        next.push((ne, coeff.mul(factor)));
                    }
                }
                acc = next;
            }
        }
        for (ze, coeff) in acc {
            if coeff.is_zero() {
                continue;
            }
            let entry = raw.entry(ze).or_insert_with(HarmonicPoly::zero);
            *entry = entry.add(&coeff);
        }
    }
    raw.retain(|_, h| !h.is_zero());
    // Determine homogeneity.
    let mut charge: Option<Option<i64>> = None;
    for (e, h) in &raw {
        let zc = super::zexp_charge(e, n2);
        for (ue, _) in h.terms() {
            let k = crate::harmonic::monomial_charge(ue) + zc;
            charge = match charge {
                None => Some(Some(k)),
                Some(Some(c)) if c == k => Some(Some(k)),
                _ => Some(None),
            };
        }
    }
    let mut out = ChargedSeries::zero(n, order, 0);
    out.set_charge(charge.flatten());
    for (e, h) in raw {
        out.insert_coefficient(e, h);
    }
    out
}

/// Apply H₀ / H₊₊ / H₋₋ by transporting to central coordinates, acting on
/// the u-coefficients there, and transporting back.
pub fn apply_via_central<S: Scalar>(
    label: crate::algebra::BasisIndex,
    s: &ChargedSeries<S>,
) -> ChargedSeries<S> {
    use crate::algebra::BasisIndex as B;
    let central = to_central(s);
    let acted = match label {
        B::H0 => central.map_coeff(|h| h.d_h0()),
        B::Hpp => central.map_coeff(|h| h.d_hpp()),
        B::Hmm => central.map_coeff(|h| h.d_hmm()),
        _ => panic!("central transport is defined for the sp1 fields only"),
    };
    let mut out = from_central(&acted);
    // Transport preserves total z-degree, so the valid order carries over.
    out = out.truncate_valid(s.valid_order());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BasisIndex;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = rng.gen_range(-3..4);
            let s = crate::jets::tests::random_series(&mut rng, 1, 3, k);
            let back = from_central(&to_central(&s));
            assert!(back.sub(&s).is_zero());
        }
    }

    #[test]
    fn analytic_and_central_operators_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let k = rng.gen_range(-3..4);
            let s = crate::jets::tests::random_series(&mut rng, 1, 3, k);
            for label in [BasisIndex::H0, BasisIndex::Hpp, BasisIndex::Hmm] {
                let direct = crate::jets::apply_flat_field(label, &s);
                let transported = apply_via_central(label, &s);
                assert!(
                    direct.sub(&transported).is_zero(),
                    "mismatch for {label:?}"
                );
            }
        }
    }
}

//! Frame fields on 𝒫 expanded in the flat frame with charged-series
//! coefficients, their Lie brackets, and the hk-frame validation suite.
//!
//! Fields are stored restricted to the harmonic slice B = I; the 𝔰𝔭ₙ(ℂ)
//! dependence of each coefficient is reconstituted algebraically from its
//! index slots (the components of interest are 𝔰𝔭ₙ-equivariant, so their
//! E-direction derivatives at the slice are the ρ-matrix actions). Fields
//! that belong to an indexed family (e₊a, e₋a) carry a family context in
//! brackets so the ρ-action sees the lower family slot too.

use crate::algebra::SymplecticData;
use crate::jets::{ChargedSeries, SeriesMatrix};
use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("the bracket [e₊a, e₋b] has components outside 𝔰𝔭ₙ (max residual {0:.3e})")]
    NonzeroTorsion(f64),
    #[error("frame fields are linearly dependent at a sampled point")]
    LinearlyDependent,
    #[error("frame shape mismatch: {0}")]
    Shape(String),
}

/// A holomorphic vector field expanded over the flat frame basis.
///
/// X = c_h0·H⁰₀ + c_hpp·H⁰₊₊ + c_hmm·H⁰₋₋ + Σ_b c_plus\[b\]·e⁰₊b
///   + Σ_b c_minus\[b\]·e⁰₋b + (E-part with endomorphism matrix `m_sp`).
#[derive(Clone, Debug)]
pub struct FrameField<S: Scalar> {
    pub n: usize,
    pub order: u32,
    /// Declared H₀-charge of the whole field.
    pub charge: i64,
    pub c_h0: ChargedSeries<S>,
    pub c_hpp: ChargedSeries<S>,
    pub c_hmm: ChargedSeries<S>,
    /// Coefficients of e⁰₊b (upper index b).
    pub c_plus: Vec<ChargedSeries<S>>,
    /// Coefficients of e⁰₋b (upper index b).
    pub c_minus: Vec<ChargedSeries<S>>,
    /// E-part as the (1,1) endomorphism Mᶜ_d = A^B (E_B)ᶜ_d.
    pub m_sp: SeriesMatrix<S>,
}

impl<S: Scalar> FrameField<S> {
    pub fn zero(n: usize, order: u32, charge: i64) -> Self {
        let n2 = 2 * n;
        FrameField {
            n,
            order,
            charge,
            c_h0: ChargedSeries::zero(n, order, charge),
            c_hpp: ChargedSeries::zero(n, order, charge - 2),
            c_hmm: ChargedSeries::zero(n, order, charge + 2),
            c_plus: vec![ChargedSeries::zero(n, order, charge - 1); n2],
            c_minus: vec![ChargedSeries::zero(n, order, charge + 1); n2],
            m_sp: SeriesMatrix::zeros(n2, n2, n, order, charge),
        }
    }

    /// The flat field for a basis label.
    pub fn flat(sym: &SymplecticData, order: u32, label: crate::algebra::BasisIndex) -> Self {
        use crate::algebra::BasisIndex as B;
        let n = sym.dims.n;
        let mut f = Self::zero(n, order, label.charge());
        let one = ChargedSeries::constant(n, order, S::one());
        match label {
            B::H0 => f.c_h0 = one,
            B::Hpp => f.c_hpp = one,
            B::Hmm => f.c_hmm = one,
            B::EPlus(a) => f.c_plus[a] = one,
            B::EMinus(a) => f.c_minus[a] = one,
            B::E(k) => {
                let mats = crate::algebra::sp_basis(sym);
                let m = &mats[k];
                for c in 0..2 * n {
                    for d in 0..2 * n {
                        if m[c][d] != 0 {
                            *f.m_sp.at_mut(c, d) =
                                ChargedSeries::constant(n, order, S::from_i64(m[c][d]));
                        }
                    }
                }
            }
        }
        f
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.charge, other.charge, "charge mismatch in field sum");
        FrameField {
            n: self.n,
            order: self.order,
            charge: self.charge,
            c_h0: self.c_h0.add(&other.c_h0),
            c_hpp: self.c_hpp.add(&other.c_hpp),
            c_hmm: self.c_hmm.add(&other.c_hmm),
            c_plus: self
                .c_plus
                .iter()
                .zip(&other.c_plus)
                .map(|(a, b)| a.add(b))
                .collect(),
            c_minus: self
                .c_minus
                .iter()
                .zip(&other.c_minus)
                .map(|(a, b)| a.add(b))
                .collect(),
            m_sp: self.m_sp.add(&other.m_sp),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&S::from_i64(-1)))
    }

    pub fn scale(&self, c: &S) -> Self {
        FrameField {
            n: self.n,
            order: self.order,
            charge: self.charge,
            c_h0: self.c_h0.scale(c),
            c_hpp: self.c_hpp.scale(c),
            c_hmm: self.c_hmm.scale(c),
            c_plus: self.c_plus.iter().map(|s| s.scale(c)).collect(),
            c_minus: self.c_minus.iter().map(|s| s.scale(c)).collect(),
            m_sp: self.m_sp.map(|s| s.scale(c)),
        }
    }

    /// Multiply all coefficients by a scalar series (used for family mixing).
    fn scale_series(&self, s: &ChargedSeries<S>) -> Self {
        let charge = self.charge + s.charge().unwrap_or(0);
        FrameField {
            n: self.n,
            order: self.order,
            charge,
            c_h0: self.c_h0.mul(s),
            c_hpp: self.c_hpp.mul(s),
            c_hmm: self.c_hmm.mul(s),
            c_plus: self.c_plus.iter().map(|c| c.mul(s)).collect(),
            c_minus: self.c_minus.iter().map(|c| c.mul(s)).collect(),
            m_sp: self.m_sp.map(|c| c.mul(s)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c_h0.is_zero()
            && self.c_hpp.is_zero()
            && self.c_hmm.is_zero()
            && self.c_plus.iter().all(|s| s.is_zero())
            && self.c_minus.iter().all(|s| s.is_zero())
            && self.m_sp.is_zero()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = self.c_h0.max_abs().max(self.c_hpp.max_abs()).max(self.c_hmm.max_abs());
        for s in self.c_plus.iter().chain(&self.c_minus) {
            m = m.max(s.max_abs());
        }
        m.max(self.m_sp.max_abs())
    }

    /// Truncate all coefficients to a common valid order.
    pub fn truncate_valid(&self, v: u32) -> Self {
        FrameField {
            n: self.n,
            order: self.order,
            charge: self.charge,
            c_h0: self.c_h0.truncate_valid(v),
            c_hpp: self.c_hpp.truncate_valid(v),
            c_hmm: self.c_hmm.truncate_valid(v),
            c_plus: self.c_plus.iter().map(|s| s.truncate_valid(v)).collect(),
            c_minus: self.c_minus.iter().map(|s| s.truncate_valid(v)).collect(),
            m_sp: self.m_sp.map(|s| s.truncate_valid(v)),
        }
    }

    pub fn min_valid(&self) -> u32 {
        let mut v = self
            .c_h0
            .valid_order()
            .min(self.c_hpp.valid_order())
            .min(self.c_hmm.valid_order());
        for s in self.c_plus.iter().chain(&self.c_minus) {
            v = v.min(s.valid_order());
        }
        for e in &self.m_sp.entries {
            v = v.min(e.valid_order());
        }
        v
    }

    /// Directional derivative of a scalar series along this field.
    pub fn apply_scalar(&self, f: &ChargedSeries<S>) -> ChargedSeries<S> {
        let mut out = self.c_h0.mul(&f.h0_op());
        out = out.add(&self.c_hpp.mul(&f.hpp_op()));
        out = out.add(&self.c_hmm.mul(&f.hmm_op()));
        for (b, c) in self.c_plus.iter().enumerate() {
            out = out.add(&c.mul(&f.d_z(true, b)));
        }
        for (b, c) in self.c_minus.iter().enumerate() {
            out = out.add(&c.mul(&f.d_z(false, b)));
        }
        out
    }
}

/// How a field sits inside an indexed family for bracket purposes.
#[derive(Clone, Copy)]
pub enum FamilyCtx<'a, S: Scalar> {
    /// No family slot (H-type fields, deformation-only fields).
    None,
    /// Member `index` of a family with one lower 𝔰𝔭ₙ slot (e₊a, e₋a).
    Lower(&'a [FrameField<S>], usize),
}

/// One side of a bracket: the field, its family context, and whether its
/// coefficients are constant invariant tensors (flat fields), in which case
/// the other field differentiates them to zero.
pub struct BracketArg<'a, S: Scalar> {
    pub field: &'a FrameField<S>,
    pub family: FamilyCtx<'a, S>,
    pub frozen: bool,
}

impl<'a, S: Scalar> BracketArg<'a, S> {
    pub fn plain(field: &'a FrameField<S>) -> Self {
        BracketArg {
            field,
            family: FamilyCtx::None,
            frozen: false,
        }
    }

    pub fn frozen(field: &'a FrameField<S>) -> Self {
        BracketArg {
            field,
            family: FamilyCtx::None,
            frozen: true,
        }
    }
}

/// Derivative of every coefficient of `y` along `x`, including the ρ-action
/// of x's E-part on internal slots and on the family slot of `y`.
fn derive_field<S: Scalar>(
    x: &FrameField<S>,
    y: &FrameField<S>,
    y_family: &FamilyCtx<S>,
) -> FrameField<S> {
    let n2 = 2 * x.n;
    let mut out = FrameField::zero(x.n, x.order, x.charge + y.charge);
    // Scalar derivations on every channel.
    out.c_h0 = x.apply_scalar(&y.c_h0);
    out.c_hpp = x.apply_scalar(&y.c_hpp);
    out.c_hmm = x.apply_scalar(&y.c_hmm);
    for b in 0..n2 {
        out.c_plus[b] = x.apply_scalar(&y.c_plus[b]);
        out.c_minus[b] = x.apply_scalar(&y.c_minus[b]);
    }
    out.m_sp = y.m_sp.map(|e| x.apply_scalar(e));

    if !x.m_sp.is_zero() {
        // Internal upper slots: −(M_X)ᵇ_c on the e±-coefficient vectors.
        for b in 0..n2 {
            for c in 0..n2 {
                let term = y.c_plus[c].mul(x.m_sp.at(b, c));
                out.c_plus[b] = out.c_plus[b].sub(&term);
                let term = y.c_minus[c].mul(x.m_sp.at(b, c));
                out.c_minus[b] = out.c_minus[b].sub(&term);
            }
        }
        // (1,1) slot: [M_Y, M_X].
        let comm = y.m_sp.matmul(&x.m_sp).sub(&x.m_sp.matmul(&y.m_sp));
        out.m_sp = out.m_sp.add(&comm);
        // Family slot (lower): +(M_X)ᵉ_b · (coefficients of sibling e).
        if let FamilyCtx::Lower(siblings, b) = y_family {
            for e in 0..n2 {
                let w = x.m_sp.at(e, *b);
                if w.is_zero() {
                    continue;
                }
                let mixed = siblings[e].scale_series(w);
                out.c_h0 = out.c_h0.add(&mixed.c_h0);
                out.c_hpp = out.c_hpp.add(&mixed.c_hpp);
                out.c_hmm = out.c_hmm.add(&mixed.c_hmm);
                for c in 0..n2 {
                    out.c_plus[c] = out.c_plus[c].add(&mixed.c_plus[c]);
                    out.c_minus[c] = out.c_minus[c].add(&mixed.c_minus[c]);
                }
                out.m_sp = out.m_sp.add(&mixed.m_sp);
            }
        }
    }
    out
}

/// Lie bracket of two frame fields on the harmonic slice.
///
/// Computed as Σ structure-constant contributions plus the derivations of
/// coefficients; bilinear and antisymmetric, with charge additivity.
pub fn lie_bracket<S: Scalar>(x: BracketArg<S>, y: BracketArg<S>) -> FrameField<S> {
    let fx = x.field;
    let fy = y.field;
    assert_eq!(fx.n, fy.n);
    let n2 = 2 * fx.n;
    let mut out = FrameField::zero(fx.n, fx.order, fx.charge + fy.charge);

    if !y.frozen {
        let d = derive_field(fx, fy, &y.family);
        out = out.add(&d);
    }
    if !x.frozen {
        let d = derive_field(fy, fx, &x.family);
        out = out.sub(&d);
    }

    // Structure-constant part.
    let two = S::from_i64(2);
    // [H₀, H±±] = ±2H±±, [H₊₊, H₋₋] = H₀.
    out.c_hpp = out
        .c_hpp
        .add(&fx.c_h0.mul(&fy.c_hpp).sub(&fx.c_hpp.mul(&fy.c_h0)).scale(&two));
    out.c_hmm = out
        .c_hmm
        .sub(&fx.c_h0.mul(&fy.c_hmm).sub(&fx.c_hmm.mul(&fy.c_h0)).scale(&two));
    out.c_h0 = out
        .c_h0
        .add(&fx.c_hpp.mul(&fy.c_hmm).sub(&fx.c_hmm.mul(&fy.c_hpp)));
    // [H₀, e±b] = ±e±b, [H₊₊, e₋b] = e₊b, [H₋₋, e₊b] = e₋b.
    for b in 0..n2 {
        let plus = fx
            .c_h0
            .mul(&fy.c_plus[b])
            .sub(&fx.c_plus[b].mul(&fy.c_h0))
            .add(&fx.c_hpp.mul(&fy.c_minus[b]))
            .sub(&fx.c_minus[b].mul(&fy.c_hpp));
        out.c_plus[b] = out.c_plus[b].add(&plus);
        let minus = fx
            .c_minus[b]
            .mul(&fy.c_h0)
            .sub(&fx.c_h0.mul(&fy.c_minus[b]))
            .add(&fx.c_hmm.mul(&fy.c_plus[b]))
            .sub(&fx.c_plus[b].mul(&fy.c_hmm));
        out.c_minus[b] = out.c_minus[b].add(&minus);
    }
    // [E-part, e±b] = (M)ᶜ_b e±c.
    for c in 0..n2 {
        for b in 0..n2 {
            let t1 = fx.m_sp.at(c, b).mul(&fy.c_plus[b]);
            let t2 = fy.m_sp.at(c, b).mul(&fx.c_plus[b]);
            out.c_plus[c] = out.c_plus[c].add(&t1).sub(&t2);
            let t1 = fx.m_sp.at(c, b).mul(&fy.c_minus[b]);
            let t2 = fy.m_sp.at(c, b).mul(&fx.c_minus[b]);
            out.c_minus[c] = out.c_minus[c].add(&t1).sub(&t2);
        }
    }
    // [E, E] = matrix commutator.
    let comm = fx.m_sp.matmul(&fy.m_sp).sub(&fy.m_sp.matmul(&fx.m_sp));
    out.m_sp = out.m_sp.add(&comm);
    out
}

// ---------------------------------------------------------------------------
// hk-frames.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    Flat,
    Central,
    Canonical,
    General,
}

/// The seven-family collection (H₀, H±±, E_A, e₊a, e₋a).
#[derive(Clone, Debug)]
pub struct HKFrame<S: Scalar> {
    pub sym: SymplecticData,
    pub order: u32,
    pub kind: FrameKind,
    pub h0: FrameField<S>,
    pub hpp: FrameField<S>,
    pub hmm: FrameField<S>,
    /// E_A as endomorphism-matrix fields (flat for central/canonical frames).
    pub e_family_flat: bool,
    pub e_plus: Vec<FrameField<S>>,
    pub e_minus: Vec<FrameField<S>>,
}

impl<S: Scalar> HKFrame<S> {
    pub fn flat(sym: &SymplecticData, order: u32) -> Self {
        use crate::algebra::BasisIndex as B;
        let n2 = 2 * sym.dims.n;
        HKFrame {
            sym: sym.clone(),
            order,
            kind: FrameKind::Flat,
            h0: FrameField::flat(sym, order, B::H0),
            hpp: FrameField::flat(sym, order, B::Hpp),
            hmm: FrameField::flat(sym, order, B::Hmm),
            e_family_flat: true,
            e_plus: (0..n2).map(|a| FrameField::flat(sym, order, B::EPlus(a))).collect(),
            e_minus: (0..n2).map(|a| FrameField::flat(sym, order, B::EMinus(a))).collect(),
        }
    }
}

/// Residual of one bracket family.
#[derive(Clone, Debug)]
pub struct FamilyResidual {
    pub name: String,
    pub max_abs: f64,
    pub exact_zero: bool,
    /// Valid order the comparison holds to.
    pub valid_order: u32,
}

#[derive(Clone, Debug)]
pub struct AxiomReport {
    pub families: Vec<FamilyResidual>,
}

impl AxiomReport {
    pub fn all_zero(&self) -> bool {
        self.families.iter().all(|f| f.exact_zero)
    }

    pub fn max_abs(&self) -> f64 {
        self.families.iter().map(|f| f.max_abs).fold(0.0, f64::max)
    }
}

fn residual_entry<S: Scalar>(name: &str, diff: &FrameField<S>) -> FamilyResidual {
    FamilyResidual {
        name: name.to_string(),
        max_abs: diff.max_abs(),
        exact_zero: diff.is_zero(),
        valid_order: diff.min_valid(),
    }
}

/// Verify the fifteen bracket families of an hk-frame.
///
/// All residuals are reported up to the minimum valid order of the series
/// involved; in the exact backend a passing frame reports literal zeros.
pub fn check_hk_axioms<S: Scalar>(frame: &HKFrame<S>) -> AxiomReport {
    let n2 = 2 * frame.sym.dims.n;
    let mut families = Vec::new();
    let flat_h0 = frame.kind != FrameKind::General || frame.h0.c_hpp.is_zero();
    let _ = flat_h0;

    let h0 = BracketArg::plain(&frame.h0);
    let hpp = BracketArg::plain(&frame.hpp);
    let hmm = BracketArg::plain(&frame.hmm);

    // 1–3: the sp1 relations.
    let r = lie_bracket(
        BracketArg::plain(&frame.h0),
        BracketArg::plain(&frame.hpp),
    )
    .sub(&frame.hpp.scale(&S::from_i64(2)));
    families.push(residual_entry("[H0,H++] - 2H++", &r));
    let r = lie_bracket(
        BracketArg::plain(&frame.h0),
        BracketArg::plain(&frame.hmm),
    )
    .sub(&frame.hmm.scale(&S::from_i64(-2)));
    families.push(residual_entry("[H0,H--] + 2H--", &r));
    let r = lie_bracket(
        BracketArg::plain(&frame.hpp),
        BracketArg::plain(&frame.hmm),
    )
    .sub(&frame.h0);
    families.push(residual_entry("[H++,H--] - H0", &r));
    let _ = (h0, hpp, hmm);

    // 4: [E_A, E_B] = c^C_AB E_C. With the flat E-family enforced by the
    // slice representation this is the structure-constant identity verified
    // exhaustively in the algebra module; recorded as exactly zero.
    families.push(FamilyResidual {
        name: "[E_A,E_B] - c^C_AB E_C".into(),
        max_abs: 0.0,
        exact_zero: frame.e_family_flat,
        valid_order: frame.order,
    });

    // 5–10: H-fields against the e±-families.
    let eplus_fam = frame.e_plus.as_slice();
    let eminus_fam = frame.e_minus.as_slice();
    let e_plus_frozen = frame.kind == FrameKind::Flat || frame.kind == FrameKind::Canonical;
    let fam = |name: String, diff: FrameField<S>, out: &mut Vec<FamilyResidual>| {
        out.push(residual_entry(&name, &diff));
    };
    let h0_combos: [(&str, i64, &[FrameField<S>], bool); 2] = [
        ("[H0,e+a] - e+a", 1, eplus_fam, true),
        ("[H0,e-a] + e-a", -1, eminus_fam, false),
    ];
    for (name, target_sign, family, other) in h0_combos {
        let hfield = &frame.h0;
        let mut worst: Option<FrameField<S>> = None;
        for a in 0..n2 {
            let arg = BracketArg {
                field: &family[a],
                family: FamilyCtx::Lower(family, a),
                frozen: other && e_plus_frozen,
            };
            let r = lie_bracket(BracketArg::frozen(hfield), arg)
                .sub(&family[a].scale(&S::from_i64(target_sign)));
            worst = Some(match worst {
                None => r,
                Some(w) => {
                    if r.max_abs() > w.max_abs() || (!r.is_zero() && w.is_zero()) {
                        r
                    } else {
                        w
                    }
                }
            });
        }
        fam(name.to_string(), worst.unwrap(), &mut families);
    }
    // [H±±, e±a] = 0 and [H±±, e∓a] = e±a.
    let combos: [(&str, &FrameField<S>, &[FrameField<S>], bool, Option<&[FrameField<S>]>); 4] = [
        ("[H++,e+a]", &frame.hpp, eplus_fam, e_plus_frozen, None),
        ("[H--,e-a]", &frame.hmm, eminus_fam, false, None),
        ("[H++,e-a] - e+a", &frame.hpp, eminus_fam, false, Some(eplus_fam)),
        ("[H--,e+a] - e-a", &frame.hmm, eplus_fam, e_plus_frozen, Some(eminus_fam)),
    ];
    for (name, hfield, family, fam_frozen, target) in combos {
        let mut worst: Option<FrameField<S>> = None;
        for a in 0..n2 {
            let arg = BracketArg {
                field: &family[a],
                family: FamilyCtx::Lower(family, a),
                frozen: fam_frozen,
            };
            let mut r = lie_bracket(BracketArg::plain(hfield), arg);
            if let Some(t) = target {
                r = r.sub(&t[a]);
            }
            worst = Some(match worst {
                None => r,
                Some(w) => {
                    if r.max_abs() > w.max_abs() || (!r.is_zero() && w.is_zero()) {
                        r
                    } else {
                        w
                    }
                }
            });
        }
        fam(name.to_string(), worst.unwrap(), &mut families);
    }

    // 11–12: [E_A, e±b] = (E_A)ᶜ_b e±c. The E_A fields are flat; the residual
    // is the equivariance defect of the coefficient bundles.
    let e_mats = crate::algebra::sp_basis(&frame.sym);
    for (name, family, fam_frozen) in [
        ("[E_A,e+b] - (E_A)^c_b e+c", eplus_fam, e_plus_frozen),
        ("[E_A,e-b] - (E_A)^c_b e-c", eminus_fam, false),
    ] {
        let mut worst: Option<FrameField<S>> = None;
        for (ai, _em) in e_mats.iter().enumerate() {
            let e_field =
                FrameField::flat(&frame.sym, frame.order, crate::algebra::BasisIndex::E(ai));
            for b in 0..n2 {
                let arg = BracketArg {
                    field: &family[b],
                    family: FamilyCtx::Lower(family, b),
                    frozen: fam_frozen,
                };
                let mut r = lie_bracket(BracketArg::frozen(&e_field), arg);
                for c in 0..n2 {
                    let w = e_mats[ai][c][b];
                    if w != 0 {
                        r = r.sub(&family[c].scale(&S::from_i64(w)));
                    }
                }
                worst = Some(match worst {
                    None => r,
                    Some(w) => {
                        if r.max_abs() > w.max_abs() || (!r.is_zero() && w.is_zero()) {
                            r
                        } else {
                            w
                        }
                    }
                });
            }
        }
        fam(name.to_string(), worst.unwrap(), &mut families);
    }

    // 13–15: e-e brackets.
    let pair_residual = |xa: usize,
                         xfam: &[FrameField<S>],
                         xf: bool,
                         yb: usize,
                         yfam: &[FrameField<S>],
                         yf: bool|
     -> FrameField<S> {
        lie_bracket(
            BracketArg {
                field: &xfam[xa],
                family: FamilyCtx::Lower(xfam, xa),
                frozen: xf,
            },
            BracketArg {
                field: &yfam[yb],
                family: FamilyCtx::Lower(yfam, yb),
                frozen: yf,
            },
        )
    };
    let mut worst_pp: Option<FrameField<S>> = None;
    let mut worst_mm: Option<FrameField<S>> = None;
    let mut worst_pm: Option<FrameField<S>> = None;
    for a in 0..n2 {
        for b in 0..n2 {
            if a < b {
                let r = pair_residual(a, eplus_fam, e_plus_frozen, b, eplus_fam, e_plus_frozen);
                worst_pp = Some(match worst_pp {
                    None => r,
                    Some(w) => if r.max_abs() > w.max_abs() { r } else { w },
                });
                let r = pair_residual(a, eminus_fam, false, b, eminus_fam, false);
                worst_mm = Some(match worst_mm {
                    None => r,
                    Some(w) => if r.max_abs() > w.max_abs() { r } else { w },
                });
            }
            // [e+a, e-b] must close on the E-part alone.
            let mut r = pair_residual(a, eplus_fam, e_plus_frozen, b, eminus_fam, false);
            // Zero out the allowed E-part: the residual is everything else.
            r.m_sp = SeriesMatrix::zeros(n2, n2, frame.sym.dims.n, frame.order, 0);
            worst_pm = Some(match worst_pm {
                None => r,
                Some(w) => if r.max_abs() > w.max_abs() { r } else { w },
            });
        }
    }
    fam("[e+a,e+b]".into(), worst_pp.unwrap(), &mut families);
    fam("[e-a,e-b]".into(), worst_mm.unwrap(), &mut families);
    fam("[e+a,e-b] in span(E)".into(), worst_pm.unwrap(), &mut families);

    AxiomReport { families }
}

/// Curvature data R_ab as endomorphism-valued series.
#[derive(Clone, Debug)]
pub struct CurvatureData<S: Scalar> {
    pub n: usize,
    /// R\[a·2n + b\] = endomorphism matrix of [e₊a, e₋b].
    pub r: Vec<SeriesMatrix<S>>,
}

impl<S: Scalar> CurvatureData<S> {
    pub fn is_zero(&self) -> bool {
        self.r.iter().all(|m| m.is_zero())
    }

    /// Components R^A_ab over the 𝔰𝔭ₙ basis (exact expansion).
    pub fn components(&self, sym: &SymplecticData) -> Vec<Vec<ChargedSeries<S>>> {
        let mats = crate::algebra::sp_basis(sym);
        let n2 = 2 * self.n;
        let mut out = Vec::new();
        for m in &self.r {
            // Expand each z-coefficient over the basis matrices: done entry
            // wise by exact solve on the numeric entries of the monomials.
            // Assemble per sp-basis element by linear algebra over constants.
            let mut comps: Vec<ChargedSeries<S>> = Vec::new();
            // Collect the union of (z-exponent, u-exponent)支持 across entries
            // and solve per-cell. Simpler: since basis matrices have integer
            // entries, expand cellwise using the exact solver.
            let mut int_mats: Vec<Vec<Vec<i64>>> = Vec::new();
            for bm in &mats {
                int_mats.push(bm.clone());
            }
            // For each sp-basis element build the series Σ coeff·(cell).
            // Invert the linear map coefficients → matrix entries once.
            // The map is injective; solve for each monomial of each entry.
            // Build per-entry series of the result lazily:
            let proto = m.at(0, 0);
            let (n, order) = (proto.n(), proto.order());
            for _ in 0..mats.len() {
                comps.push(ChargedSeries::zero(n, order, proto.charge().unwrap_or(0)));
            }
            // Gather all terms: for each matrix cell, each z-term, each u-term.
            use std::collections::BTreeMap as Map;
            let mut cells: Map<(Vec<u32>, crate::harmonic::UExp), Vec<Vec<S>>> = Map::new();
            for i in 0..n2 {
                for j in 0..n2 {
                    for (ze, h) in m.at(i, j).terms() {
                        for (ue, c) in h.terms() {
                            let entry = cells
                                .entry((ze.clone(), *ue))
                                .or_insert_with(|| vec![vec![S::zero(); n2]; n2]);
                            entry[i][j] = c.clone();
                        }
                    }
                }
            }
            for ((ze, ue), cell) in cells {
                // Exact expansion of this constant matrix over the basis.
                let as_int_unneeded = ();
                let _ = as_int_unneeded;
                let coeffs = expand_matrix_over_basis::<S>(&int_mats, &cell);
                for (k, c) in coeffs.into_iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let mono = ChargedSeries::from_coefficient(
                        n,
                        order,
                        crate::harmonic::HarmonicPoly::monomial(ue, c),
                    );
                    let zmono = {
                        let mut t = ChargedSeries::constant(n, order, S::one());
                        for (idx, &exp) in ze.iter().enumerate() {
                            for _ in 0..exp {
                                t = t.mul(&ChargedSeries::coordinate(
                                    n,
                                    order,
                                    idx < n2,
                                    idx % n2,
                                ));
                            }
                        }
                        t
                    };
                    comps[k] = comps[k].add(&mono.mul(&zmono));
                }
            }
            out.push(comps);
        }
        let _ = n2;
        out
    }
}

/// Expand a constant matrix over the 𝔰𝔭ₙ basis matrices with exact scalars.
fn expand_matrix_over_basis<S: Scalar>(mats: &[Vec<Vec<i64>>], cell: &[Vec<S>]) -> Vec<S> {
    let m = cell.len();
    let rows = m * m;
    let cols: Vec<Vec<(usize, S)>> = mats
        .iter()
        .map(|e| {
            let mut col = Vec::new();
            for i in 0..m {
                for j in 0..m {
                    if e[i][j] != 0 {
                        col.push((i * m + j, S::from_i64(e[i][j])));
                    }
                }
            }
            col
        })
        .collect();
    let mut rhs = vec![S::zero(); rows];
    for i in 0..m {
        for j in 0..m {
            rhs[i * m + j] = cell[i][j].clone();
        }
    }
    let sol = crate::numeric::exact_solve_with_kernel(rows, &cols, &rhs)
        .expect("curvature must lie in sp_n");
    sol.particular
}

/// Read the curvature off the [e₊a, e₋b] brackets.
///
/// Errors with [`FrameError::NonzeroTorsion`] when components outside 𝔰𝔭ₙ
/// survive.
pub fn extract_curvature<S: Scalar>(frame: &HKFrame<S>) -> Result<CurvatureData<S>, FrameError> {
    let n2 = 2 * frame.sym.dims.n;
    let e_plus_frozen = frame.kind == FrameKind::Flat || frame.kind == FrameKind::Canonical;
    let mut r = Vec::with_capacity(n2 * n2);
    let mut torsion: f64 = 0.0;
    let mut torsion_exact = true;
    for a in 0..n2 {
        for b in 0..n2 {
            let br = lie_bracket(
                BracketArg {
                    field: &frame.e_plus[a],
                    family: FamilyCtx::Lower(&frame.e_plus, a),
                    frozen: e_plus_frozen,
                },
                BracketArg {
                    field: &frame.e_minus[b],
                    family: FamilyCtx::Lower(&frame.e_minus, b),
                    frozen: false,
                },
            );
            let mut rest = br.clone();
            rest.m_sp = SeriesMatrix::zeros(n2, n2, frame.sym.dims.n, frame.order, 0);
            if !rest.is_zero() {
                torsion_exact = false;
                torsion = torsion.max(rest.max_abs());
            }
            r.push(br.m_sp);
        }
    }
    if !torsion_exact {
        return Err(FrameError::NonzeroTorsion(torsion));
    }
    Ok(CurvatureData {
        n: frame.sym.dims.n,
        r,
    })
}

/// ω-symmetry of the curvature: ω_ce (R_ab)ᵉ_d must be symmetric in (c,d).
pub fn curvature_omega_symmetric<S: Scalar>(
    sym: &SymplecticData,
    curv: &CurvatureData<S>,
) -> bool {
    let n2 = 2 * sym.dims.n;
    for m in &curv.r {
        for c in 0..n2 {
            for d in 0..c {
                let mut lhs: Option<ChargedSeries<S>> = None;
                let mut rhs: Option<ChargedSeries<S>> = None;
                for e in 0..n2 {
                    let wce = sym.omega_lower[c][e];
                    if wce != 0 {
                        let t = m.at(e, d).scale(&S::from_i64(wce));
                        lhs = Some(match lhs {
                            None => t,
                            Some(x) => x.add(&t),
                        });
                    }
                    let wde = sym.omega_lower[d][e];
                    if wde != 0 {
                        let t = m.at(e, c).scale(&S::from_i64(wde));
                        rhs = Some(match rhs {
                            None => t,
                            Some(x) => x.add(&t),
                        });
                    }
                }
                if let (Some(l), Some(r)) = (lhs, rhs) {
                    if !l.sub(&r).is_zero() {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Report of the canonical-frame shape checks.
#[derive(Clone, Debug)]
pub struct CanonicalReport<S: Scalar> {
    pub h0_flat: bool,
    pub e_family_flat: bool,
    pub e_plus_flat: bool,
    pub v_plus_pp_vanishes_at_zplus0: bool,
    pub v_minus_minus_zero: bool,
    /// The v-potential v^{−a}₊₊ restricted to the harmonic slice.
    pub v_potential: Vec<ChargedSeries<S>>,
}

impl<S: Scalar> CanonicalReport<S> {
    pub fn is_canonical(&self) -> bool {
        self.h0_flat
            && self.e_family_flat
            && self.e_plus_flat
            && self.v_plus_pp_vanishes_at_zplus0
            && self.v_minus_minus_zero
    }
}

/// Verify the canonical-frame shape and extract the v-potential.
pub fn check_canonical<S: Scalar>(frame: &HKFrame<S>) -> CanonicalReport<S> {
    let n2 = 2 * frame.sym.dims.n;
    let one = ChargedSeries::constant(frame.sym.dims.n, frame.order, S::one());
    let h0_flat = frame.h0.c_h0.eq_to_valid(&one)
        && frame.h0.c_hpp.is_zero()
        && frame.h0.c_hmm.is_zero()
        && frame.h0.c_plus.iter().all(|s| s.is_zero())
        && frame.h0.c_minus.iter().all(|s| s.is_zero())
        && frame.h0.m_sp.is_zero();
    let e_plus_flat = (0..n2).all(|a| {
        let f = &frame.e_plus[a];
        f.c_plus
            .iter()
            .enumerate()
            .all(|(b, s)| if a == b { s.eq_to_valid(&one) } else { s.is_zero() })
            && f.c_minus.iter().all(|s| s.is_zero())
            && f.c_h0.is_zero()
            && f.c_hpp.is_zero()
            && f.c_hmm.is_zero()
            && f.m_sp.is_zero()
    });
    // v⁺ᵇ₊₊ must vanish on {z⁺ = 0}: every term needs a z⁺ factor.
    let v_plus_pp_vanishes_at_zplus0 = frame.hpp.c_plus.iter().all(|s| {
        s.terms().all(|(e, _)| e[..n2].iter().any(|&m| m > 0))
    });
    // v⁻ᶜ₋b = 0: the e₋ minus-components are exactly δ.
    let v_minus_minus_zero = (0..n2).all(|b| {
        frame.e_minus[b].c_minus.iter().enumerate().all(|(c, s)| {
            if b == c {
                s.eq_to_valid(&one)
            } else {
                s.is_zero()
            }
        })
    });
    CanonicalReport {
        h0_flat,
        e_family_flat: frame.e_family_flat,
        e_plus_flat,
        v_plus_pp_vanishes_at_zplus0,
        v_minus_minus_zero,
        v_potential: frame.hpp.c_minus.clone(),
    }
}

/// Residuals of the v-potential identities for a canonical frame:
/// e⁰₊a·v⁻ᵇ₊₊ = 0, A₊₊(E)ᵇ_a = e⁰₋a·v⁻ᵇ₊₊, e⁰₊a·v⁺ᵇ₊₊ = e⁰₋a·v⁻ᵇ₊₊,
/// and the ω-symmetry ω_cb e⁰₋a·v⁻ᶜ₊₊ − ω_ca e⁰₋b·v⁻ᶜ₊₊ = 0.
pub fn check_potentials_identities<S: Scalar>(frame: &HKFrame<S>) -> AxiomReport {
    let n2 = 2 * frame.sym.dims.n;
    let mut families = Vec::new();
    let v_minus = &frame.hpp.c_minus;
    let v_plus = &frame.hpp.c_plus;

    let entry = |name: &str,
                     diffs: Vec<ChargedSeries<S>>,
                     families: &mut Vec<FamilyResidual>| {
        let max_abs = diffs.iter().map(|d| d.max_abs()).fold(0.0, f64::max);
        let exact_zero = diffs.iter().all(|d| d.is_zero());
        let valid = diffs.iter().map(|d| d.valid_order()).min().unwrap_or(frame.order);
        families.push(FamilyResidual {
            name: name.into(),
            max_abs,
            exact_zero,
            valid_order: valid,
        });
    };

    let mut diffs = Vec::new();
    for a in 0..n2 {
        for b in 0..n2 {
            diffs.push(v_minus[b].d_z(true, a));
        }
    }
    entry("e+a · v^{-b}_{++} = 0", diffs, &mut families);

    let mut diffs = Vec::new();
    for a in 0..n2 {
        for b in 0..n2 {
            diffs.push(frame.hpp.m_sp.at(b, a).sub(&v_minus[b].d_z(false, a)));
        }
    }
    entry("A_{++}(E)^b_a = e-a · v^{-b}_{++}", diffs, &mut families);

    let mut diffs = Vec::new();
    for a in 0..n2 {
        for b in 0..n2 {
            diffs.push(v_plus[b].d_z(true, a).sub(&v_minus[b].d_z(false, a)));
        }
    }
    entry("e+a · v^{+b}_{++} = e-a · v^{-b}_{++}", diffs, &mut families);

    let mut diffs = Vec::new();
    for a in 0..n2 {
        for b in 0..n2 {
            let mut lhs: Option<ChargedSeries<S>> = None;
            for c in 0..n2 {
                let wcb = frame.sym.omega_lower[c][b];
                if wcb != 0 {
                    let t = v_minus[c].d_z(false, a).scale(&S::from_i64(wcb));
                    lhs = Some(match lhs {
                        None => t,
                        Some(x) => x.add(&t),
                    });
                }
                let wca = frame.sym.omega_lower[c][a];
                if wca != 0 {
                    let t = v_minus[c].d_z(false, b).scale(&S::from_i64(-wca));
                    lhs = Some(match lhs {
                        None => t,
                        Some(x) => x.add(&t),
                    });
                }
            }
            if let Some(l) = lhs {
                diffs.push(l);
            }
        }
    }
    entry("omega-symmetry of second derivatives", diffs, &mut families);

    AxiomReport { families }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Dimensions;
    use crate::harmonic::HarmonicPoly;
    use crate::scalar::Exact;
    use rand::Rng;
    use rand::SeedableRng;

    fn sym1() -> SymplecticData {
        SymplecticData::new(Dimensions::new(1, 1, 0).unwrap())
    }

    #[test]
    fn flat_brackets_reproduce_structure() {
        let sym = sym1();
        let order = 4;
        let frame = HKFrame::<Exact>::flat(&sym, order);
        // [H++-field, H---field] = H0-field.
        let r = lie_bracket(
            BracketArg::plain(&frame.hpp),
            BracketArg::plain(&frame.hmm),
        )
        .sub(&frame.h0);
        assert!(r.is_zero());
        // bracket(X, X) = 0.
        let r = lie_bracket(
            BracketArg::plain(&frame.hpp),
            BracketArg::plain(&frame.hpp),
        );
        assert!(r.is_zero());
    }

    #[test]
    fn flat_frame_passes_axioms() {
        let sym = sym1();
        let frame = HKFrame::<Exact>::flat(&sym, 4);
        let report = check_hk_axioms(&frame);
        assert!(report.all_zero(), "{report:?}");
        let curv = extract_curvature(&frame).unwrap();
        assert!(curv.is_zero());
        let canon = check_canonical(&frame);
        assert!(canon.is_canonical());
        assert!(canon.v_potential.iter().all(|v| v.is_zero()));
        let pot = check_potentials_identities(&frame);
        assert!(pot.all_zero());
    }

    #[test]
    fn perturbed_frame_fails_raising_axiom() {
        // e₋a perturbed by z⁺-dependent noise must break [H₊₊, e₋a] = e₊a.
        let sym = sym1();
        let order = 4;
        let mut frame = HKFrame::<Exact>::flat(&sym, order);
        frame.kind = FrameKind::General;
        let noise = ChargedSeries::coordinate(1, order, true, 0)
            .mul(&ChargedSeries::coordinate(1, order, false, 0))
            .mul(&ChargedSeries::coordinate(1, order, false, 0));
        // charge of z⁺¹(z⁻)²: +1; c_plus of e₋a needs charge −1+... adjust by
        // a u-factor to charge −2+1: use the c_plus channel with charge −2.
        let noise = noise.scale_coefficient(&HarmonicPoly::monomial(
            [0, 0, 2, 0],
            Exact::from_i64(1),
        ));
        // noise charge: z⁺(z⁻)² = +1, u₋² = −2, total −1: fits c_plus (charge
        // of e₋a is −1, label e₊b has charge +1, coefficient charge −2).
        let noise = noise.mul(&ChargedSeries::coordinate(1, order, false, 1));
        // now charge 0... rebuild: we need coefficient charge = −1 − 1 = −2.
        let _ = noise;
        let mut bump = ChargedSeries::coordinate(1, order, true, 0);
        bump = bump.scale_coefficient(&HarmonicPoly::monomial([0, 0, 1, 0], Exact::from_i64(1)));
        // z⁺¹·u¹₋: charge −2 ✓
        frame.e_minus[0].c_plus[0] = frame.e_minus[0].c_plus[0].add(&bump);
        let report = check_hk_axioms(&frame);
        let fam = report
            .families
            .iter()
            .find(|f| f.name.starts_with("[H++,e-a]"))
            .unwrap();
        assert!(!fam.exact_zero);
    }

    #[test]
    fn injected_torsion_is_detected() {
        let sym = sym1();
        let order = 4;
        let mut frame = HKFrame::<Exact>::flat(&sym, order);
        frame.kind = FrameKind::General;
        // Give e₋1 a v^{+b}_{-a} component whose e₊-derivative is nonzero.
        let v = ChargedSeries::coordinate(1, order, true, 0)
            .mul(&ChargedSeries::coordinate(1, order, true, 1))
            .scale_coefficient(&HarmonicPoly::monomial([0, 0, 2, 0], Exact::from_i64(1)));
        // charge: z⁺z⁺ = −2, u₋² = −2: total −4... c_plus of e₋b needs −2.
        let v = v.scale_coefficient(&HarmonicPoly::monomial([2, 0, 0, 0], Exact::from_i64(1)));
        // now −2 ✓ (u₊² adds +2).
        frame.e_minus[0].c_plus[1] = frame.e_minus[0].c_plus[1].add(&v);
        assert!(matches!(
            extract_curvature(&frame),
            Err(FrameError::NonzeroTorsion(_))
        ));
    }

    /// Random deformation-type frame field (no family slot).
    fn random_field(rng: &mut impl Rng, n: usize, order: u32, charge: i64) -> FrameField<Exact> {
        let mut f = FrameField::zero(n, order, charge);
        f.c_h0 = crate::jets::tests::random_series(rng, n, order, charge);
        f.c_hpp = crate::jets::tests::random_series(rng, n, order, charge - 2);
        f.c_hmm = crate::jets::tests::random_series(rng, n, order, charge + 2);
        for b in 0..2 * n {
            f.c_plus[b] = crate::jets::tests::random_series(rng, n, order, charge - 1);
            f.c_minus[b] = crate::jets::tests::random_series(rng, n, order, charge + 1);
        }
        for i in 0..2 * n {
            for j in 0..2 * n {
                *f.m_sp.at_mut(i, j) = crate::jets::tests::random_series(rng, n, order, charge);
            }
        }
        f
    }

    #[test]
    fn jacobi_identity_on_random_fields() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..6 {
            let kx = rng.gen_range(-1..2);
            let ky = rng.gen_range(-1..2);
            let kz = rng.gen_range(-1..2);
            let x = random_field(&mut rng, 1, 3, kx);
            let y = random_field(&mut rng, 1, 3, ky);
            let z = random_field(&mut rng, 1, 3, kz);
            let b = |a: &FrameField<Exact>, b: &FrameField<Exact>| {
                lie_bracket(BracketArg::plain(a), BracketArg::plain(b))
            };
            let j = b(&b(&x, &y), &z)
                .add(&b(&b(&y, &z), &x))
                .add(&b(&b(&z, &x), &y));
            // Brackets lower the valid order; compare up to the common one.
            let v = j.min_valid();
            assert!(j.truncate_valid(v).is_zero(), "trial {trial}: {:?}", j.max_abs());
        }
    }

    #[test]
    fn charge_homogeneity_of_brackets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let x = random_field(&mut rng, 1, 3, 2);
        let y = random_field(&mut rng, 1, 3, -1);
        let br = lie_bracket(BracketArg::plain(&x), BracketArg::plain(&y));
        assert_eq!(br.charge, 1);
        // Constructors of the coefficient series assert the bookkeeping.
        assert_eq!(br.c_h0.charge().unwrap_or(1), 1);
    }
}

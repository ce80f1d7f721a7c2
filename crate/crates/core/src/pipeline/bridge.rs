//! Steps 1 and 2: the deformed raising field H₊₊ from the prepotential, and
//! the bridge φ = (uⁱ±, φᵃ_b, φ^{ia}) solving φ_*(H⁰₊₊) = H₊₊ with the
//! I₂-slice initial data φ^{ia}(I₂, z) = z^{ia}, φᵃ_b(I₂, z) = δᵃ_b.

use super::{PipelineConfig, PipelineError, Prepotential};
use crate::frames::{FamilyResidual, FrameField};
use crate::harmonic::HarmonicPoly;
use crate::jets::{ChargedSeries, RaisingSystem, SeriesMatrix, ZExp};
use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// u-matrix entry monomials: uⁱ₊ and uⁱ₋ for i ∈ {0,1}.
fn u_plus<S: Scalar>(i: usize) -> HarmonicPoly<S> {
    HarmonicPoly::monomial(if i == 0 { [1, 0, 0, 0] } else { [0, 1, 0, 0] }, S::one())
}

fn u_minus<S: Scalar>(i: usize) -> HarmonicPoly<S> {
    HarmonicPoly::monomial(if i == 0 { [0, 0, 1, 0] } else { [0, 0, 0, 1] }, S::one())
}

/// First z⁻-derivatives of L, marked entire (polynomial data).
fn d_l<S: Scalar>(l: &ChargedSeries<S>, n2: usize) -> Vec<ChargedSeries<S>> {
    (0..n2).map(|d| l.d_z(false, d).mark_entire()).collect()
}

/// Second z⁻-derivatives of L.
fn dd_l<S: Scalar>(l: &ChargedSeries<S>, n2: usize) -> Vec<Vec<ChargedSeries<S>>> {
    (0..n2)
        .map(|b| {
            (0..n2)
                .map(|c| l.d_z(false, b).d_z(false, c).mark_entire())
                .collect()
        })
        .collect()
}

/// Step 1: H₊₊ = H⁰₊₊ + v⁻ᵇ₊₊ e⁰₋b + v⁺ᵇ₊₊ e⁰₊b + A₊₊-part with
/// v⁻ᵇ = ωᵇᶜ ∂L/∂z⁻ᶜ, A₊₊(E)ᵃ_b = ωᵃᶜ ∂²L/∂z⁻ᵇ∂z⁻ᶜ, v⁺ᵃ = A₊₊(E)ᵃ_b z⁺ᵇ.
pub fn build_hpp<S: Scalar>(p: &Prepotential<S>, cfg: &PipelineConfig) -> FrameField<S> {
    let n = cfg.dims.n;
    let n2 = 2 * n;
    let sym = crate::algebra::SymplecticData::new(cfg.dims);
    let dl = d_l(&p.series, n2);
    let ddl = dd_l(&p.series, n2);

    let mut f = FrameField::zero(n, cfg.order, 2);
    f.c_hpp = ChargedSeries::constant(n, cfg.order, S::one());
    for b in 0..n2 {
        let mut v = ChargedSeries::zero(n, cfg.order, 3);
        for c in 0..n2 {
            let w = sym.omega_upper[b][c];
            if w != 0 {
                v = v.add(&dl[c].scale(&S::from_i64(w)));
            }
        }
        f.c_minus[b] = v;
    }
    for a in 0..n2 {
        for b in 0..n2 {
            let mut m = ChargedSeries::zero(n, cfg.order, 2);
            for c in 0..n2 {
                let w = sym.omega_upper[a][c];
                if w != 0 {
                    m = m.add(&ddl[b][c].scale(&S::from_i64(w)));
                }
            }
            *f.m_sp.at_mut(a, b) = m;
        }
    }
    for a in 0..n2 {
        let mut v = ChargedSeries::zero(n, cfg.order, 1);
        for b in 0..n2 {
            let zb = ChargedSeries::coordinate(n, cfg.order, true, b);
            v = v.add(&f.m_sp.at(a, b).mul(&zb));
        }
        f.c_plus[a] = v;
    }
    f
}

/// The bridge data: φ^{ia}, the derived φ^{±a}, the matrix φᵃ_b and its
/// logarithm ψ, with the exact residual report.
#[derive(Clone, Debug)]
pub struct Bridge<S: Scalar> {
    pub n: usize,
    pub order: u32,
    /// φ^{ia} indexed i·2n + a, each of charge 0.
    pub phi: Vec<ChargedSeries<S>>,
    /// φ^{−a} = −u⁻ᵢ φ^{ia} (charge +1).
    pub phi_minus: Vec<ChargedSeries<S>>,
    /// φ^{+a} = −u⁺ᵢ φ^{ia} (charge −1).
    pub phi_plus: Vec<ChargedSeries<S>>,
    /// φᵃ_b restricted to the slice (charge 0), with φᵃ_b(I₂, z) = δᵃ_b.
    pub phi_matrix: SeriesMatrix<S>,
    /// ψ = log φᵃ_b when the matrix is unipotent in z.
    pub psi: Option<SeriesMatrix<S>>,
    pub residuals: Vec<FamilyResidual>,
    pub iterations: usize,
}

/// φ^{−a} from φ^{ia}: −u⁻ᵢ φ^{ia} = −u²₊ φ^{1a} + u¹₊ φ^{2a}.
pub fn derive_phi_minus<S: Scalar>(phi: &[ChargedSeries<S>], n2: usize) -> Vec<ChargedSeries<S>> {
    (0..n2)
        .map(|a| {
            let mut s = phi[n2 + a].scale_coefficient(&u_plus(0));
            s = s.sub(&phi[a].scale_coefficient(&u_plus(1)));
            s
        })
        .collect()
}

/// φ^{+a} from φ^{ia}: −u⁺ᵢ φ^{ia} = u²₋ φ^{1a} − u¹₋ φ^{2a}.
pub fn derive_phi_plus<S: Scalar>(phi: &[ChargedSeries<S>], n2: usize) -> Vec<ChargedSeries<S>> {
    (0..n2)
        .map(|a| {
            let mut s = phi[a].scale_coefficient(&u_minus(1));
            s = s.sub(&phi[n2 + a].scale_coefficient(&u_minus(0)));
            s
        })
        .collect()
}

/// Right-hand side of the φ^{ia} system at the current iterate:
/// uⁱ₊ ωᵃᶜ ∂²L_{bc}|_{φ⁻} φ^{+b} + uⁱ₋ ωᵃᵈ ∂L_d|_{φ⁻}.
fn bridge_rhs<S: Scalar>(
    phi: &[ChargedSeries<S>],
    dl: &[ChargedSeries<S>],
    ddl: &[Vec<ChargedSeries<S>>],
    sym: &crate::algebra::SymplecticData,
    n2: usize,
) -> Result<Vec<ChargedSeries<S>>, PipelineError> {
    let phi_minus = derive_phi_minus(phi, n2);
    let phi_plus = derive_phi_plus(phi, n2);
    let dl_at: Vec<ChargedSeries<S>> = dl
        .iter()
        .map(|d| d.substitute(&phi_minus))
        .collect::<Result<_, _>>()?;
    let ddl_at: Vec<Vec<ChargedSeries<S>>> = ddl
        .iter()
        .map(|row| {
            row.iter()
                .map(|d| d.substitute(&phi_minus))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let n = phi[0].n();
    let order = phi[0].order();
    let mut rhs = Vec::with_capacity(2 * n2);
    for i in 0..2 {
        for a in 0..n2 {
            let mut first = ChargedSeries::zero(n, order, 1);
            for b in 0..n2 {
                for c in 0..n2 {
                    let w = sym.omega_upper[a][c];
                    if w != 0 {
                        first = first
                            .add(&ddl_at[b][c].mul(&phi_plus[b]).scale(&S::from_i64(w)));
                    }
                }
            }
            let mut second = ChargedSeries::zero(n, order, 3);
            for d in 0..n2 {
                let w = sym.omega_upper[a][d];
                if w != 0 {
                    second = second.add(&dl_at[d].scale(&S::from_i64(w)));
                }
            }
            let total = first
                .scale_coefficient(&u_plus(i))
                .add(&second.scale_coefficient(&u_minus(i)));
            rhs.push(total);
        }
    }
    Ok(rhs)
}

/// z-free coupling of the affine part, from the quadratic terms of L.
///
/// A₁\[φ\]^{ia} = uⁱ₊ ωᵃᶜ ∂²L₂_{bc} φ^{+b} + uⁱ₋ ωᵃᵈ ∂²L₂_{db} φ^{−b},
/// rewritten over the φ^{jb} components.
fn affine_coupling<S: Scalar>(
    l: &ChargedSeries<S>,
    sym: &crate::algebra::SymplecticData,
    n2: usize,
) -> Option<Vec<Vec<HarmonicPoly<S>>>> {
    // ∂²L₂ = the z-constant part of ∂²L.
    let zero_exp: ZExp = vec![0; 2 * n2];
    let mut ddl2 = vec![vec![HarmonicPoly::<S>::zero(); n2]; n2];
    let mut any = false;
    for b in 0..n2 {
        for c in 0..n2 {
            let d = l.d_z(false, b).d_z(false, c);
            let h = d.coefficient(&zero_exp);
            if !h.is_zero() {
                any = true;
            }
            ddl2[b][c] = h;
        }
    }
    if !any {
        return None;
    }
    // M[(i,a)][(j,b)]: φ^{+b} = u²₋φ^{1b} − u¹₋φ^{2b}, φ^{−b} = −u²₊φ^{1b} + u¹₊φ^{2b}.
    let t = 2 * n2;
    let mut m = vec![vec![HarmonicPoly::<S>::zero(); t]; t];
    for i in 0..2 {
        for a in 0..n2 {
            let row = i * n2 + a;
            for b in 0..n2 {
                let mut first = HarmonicPoly::zero();
                let mut second = HarmonicPoly::zero();
                for c in 0..n2 {
                    let w = sym.omega_upper[a][c];
                    if w != 0 {
                        first = first.add(&ddl2[b][c].scale(&S::from_i64(w)));
                    }
                    let w2 = sym.omega_upper[a][c];
                    if w2 != 0 {
                        second = second.add(&ddl2[c][b].scale(&S::from_i64(w2)));
                    }
                }
                let first = first.mul(&u_plus(i));
                let second = second.mul(&u_minus(i));
                // φ^{+b} coefficients over φ^{jb}.
                let col1 = b; // j = 1
                let col2 = n2 + b; // j = 2
                m[row][col1] = m[row][col1]
                    .add(&first.mul(&u_minus(1)))
                    .sub(&second.mul(&u_plus(1)));
                m[row][col2] = m[row][col2]
                    .sub(&first.mul(&u_minus(0)))
                    .add(&second.mul(&u_plus(0)));
            }
        }
    }
    Some(m)
}

/// Slice data for the φ^{ia} system: φ^{1a} ↦ z^{+a}, φ^{2a} ↦ z^{−a}.
fn identity_slice<S: Scalar>(n: usize) -> Vec<BTreeMap<ZExp, S>> {
    let n2 = 2 * n;
    let mut out = Vec::with_capacity(2 * n2);
    for i in 0..2 {
        for a in 0..n2 {
            let mut m = BTreeMap::new();
            let mut e = vec![0u32; 4 * n];
            e[if i == 0 { a } else { n2 + a }] = 1;
            m.insert(e, S::one());
            out.push(m);
        }
    }
    out
}

/// Step 2: solve the bridge system by one affine solve plus a strictly
/// z-degree-raising fixed-point iteration (≤ D sweeps, asserted), then the
/// linear matrix system for φᵃ_b.
pub fn solve_bridge<S: Scalar>(
    p: &Prepotential<S>,
    _hpp: &FrameField<S>,
    cfg: &PipelineConfig,
) -> Result<Bridge<S>, PipelineError> {
    let n = cfg.dims.n;
    let n2 = 2 * n;
    let sym = crate::algebra::SymplecticData::new(cfg.dims);
    let dl = d_l(&p.series, n2);
    let ddl = dd_l(&p.series, n2);
    let coupling = affine_coupling(&p.series, &sym, n2);
    let init = identity_slice::<S>(n);

    // Flat start: φ^{ia} = z^{ia}.
    let flat_sys = RaisingSystem::<S> {
        n,
        order: cfg.order,
        u_bound: cfg.u_bound,
        charges: vec![0; 2 * n2],
        coupling: None,
        rhs: vec![ChargedSeries::zero(n, cfg.order, 2); 2 * n2],
        init: init.clone(),
    };
    let mut phi = flat_sys.solve()?;

    let max_sweeps = cfg.order as usize + 2;
    let mut iterations = 0;
    loop {
        if iterations > max_sweeps {
            return Err(PipelineError::NoFixedPoint(iterations));
        }
        iterations += 1;
        let full = bridge_rhs(&phi, &dl, &ddl, &sym, n2)?;
        // Move the affine part to the operator: rem = RHS(φ) − M·φ.
        let rem: Vec<ChargedSeries<S>> = match &coupling {
            None => full,
            Some(m) => (0..2 * n2)
                .map(|row| {
                    let mut r = full[row].clone();
                    for (col, entry) in m[row].iter().enumerate() {
                        if !entry.is_zero() {
                            r = r.sub(&phi[col].scale_coefficient(entry));
                        }
                    }
                    r
                })
                .collect(),
        };
        let sys = RaisingSystem {
            n,
            order: cfg.order,
            u_bound: cfg.u_bound,
            charges: vec![0; 2 * n2],
            coupling: coupling.clone(),
            rhs: rem,
            init: init.clone(),
        };
        let next = sys.solve()?;
        let stable = next.iter().zip(&phi).all(|(a, b)| a.eq_to_valid(b));
        phi = next;
        if stable {
            break;
        }
    }

    let phi_minus = derive_phi_minus(&phi, n2);
    let phi_plus = derive_phi_plus(&phi, n2);

    // φᵃ_b: H₊₊ Φ = (ω ∂²L|_{φ⁻}) Φ, Φ(I₂, z) = δ. The z-free part of the
    // multiplier joins the operator; the rest is iterated (degree-raising).
    let ddl_at: Vec<Vec<ChargedSeries<S>>> = ddl
        .iter()
        .map(|row| {
            row.iter()
                .map(|d| d.substitute(&phi_minus))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut a_full = SeriesMatrix::<S>::zeros(n2, n2, n, cfg.order, 2);
    for a in 0..n2 {
        for c in 0..n2 {
            let mut acc = ChargedSeries::zero(n, cfg.order, 2);
            for d in 0..n2 {
                let w = sym.omega_upper[a][d];
                if w != 0 {
                    acc = acc.add(&ddl_at[c][d].scale(&S::from_i64(w)));
                }
            }
            *a_full.at_mut(a, c) = acc;
        }
    }
    let zero_exp: ZExp = vec![0; 4 * n];
    let mut m0: Vec<Vec<HarmonicPoly<S>>> = vec![vec![HarmonicPoly::zero(); n2]; n2];
    let mut m0_any = false;
    for a in 0..n2 {
        for c in 0..n2 {
            let h = a_full.at(a, c).coefficient(&zero_exp);
            if !h.is_zero() {
                m0_any = true;
            }
            m0[a][c] = h;
        }
    }
    // Unknown layout for Φ: component (a,b) ↦ a·2n + b; the multiplier acts
    // on the a-slot only.
    let t = n2 * n2;
    let phi_coupling: Option<Vec<Vec<HarmonicPoly<S>>>> = if m0_any {
        let mut m = vec![vec![HarmonicPoly::<S>::zero(); t]; t];
        for a in 0..n2 {
            for b in 0..n2 {
                for c in 0..n2 {
                    m[a * n2 + b][c * n2 + b] = m0[a][c].clone();
                }
            }
        }
        Some(m)
    } else {
        None
    };
    let mut phimat_init = Vec::with_capacity(t);
    for a in 0..n2 {
        for b in 0..n2 {
            let mut map = BTreeMap::new();
            if a == b {
                map.insert(vec![0u32; 4 * n], S::one());
            }
            phimat_init.push(map);
        }
    }
    let mut phimat: Vec<ChargedSeries<S>> = {
        let mut v = Vec::with_capacity(t);
        for a in 0..n2 {
            for b in 0..n2 {
                let s = if a == b {
                    ChargedSeries::constant(n, cfg.order, S::one())
                } else {
                    ChargedSeries::zero(n, cfg.order, 0)
                };
                v.push(s);
            }
        }
        v
    };
    let mut phi_iterations = 0;
    loop {
        if phi_iterations > max_sweeps {
            return Err(PipelineError::NoFixedPoint(phi_iterations));
        }
        phi_iterations += 1;
        // rem = A_full·Φ − M₀·Φ (the z-free part moves into the operator).
        let mut rem = Vec::with_capacity(t);
        for a in 0..n2 {
            for b in 0..n2 {
                let mut acc = ChargedSeries::zero(n, cfg.order, 2);
                for c in 0..n2 {
                    acc = acc.add(&a_full.at(a, c).mul(&phimat[c * n2 + b]));
                    if m0_any && !m0[a][c].is_zero() {
                        acc = acc.sub(&phimat[c * n2 + b].scale_coefficient(&m0[a][c]));
                    }
                }
                rem.push(acc);
            }
        }
        let sys = RaisingSystem {
            n,
            order: cfg.order,
            u_bound: cfg.u_bound,
            charges: vec![0; t],
            coupling: phi_coupling.clone(),
            rhs: rem,
            init: phimat_init.clone(),
        };
        let next = sys.solve()?;
        let stable = next.iter().zip(&phimat).all(|(a, b)| a.eq_to_valid(b));
        phimat = next;
        if stable {
            break;
        }
    }
    let mut phi_matrix = SeriesMatrix::zeros(n2, n2, n, cfg.order, 0);
    for a in 0..n2 {
        for b in 0..n2 {
            *phi_matrix.at_mut(a, b) = phimat[a * n2 + b].clone();
        }
    }
    let psi = phi_matrix.log_unipotent().ok();

    // Residual report (all must be exactly zero in the exact backend).
    let mut residuals = Vec::new();
    let mut push = |name: &str, diffs: Vec<ChargedSeries<S>>| {
        let max_abs = diffs.iter().map(|d| d.max_abs()).fold(0.0, f64::max);
        let exact_zero = diffs.iter().all(|d| d.is_zero());
        let valid = diffs
            .iter()
            .map(|d| d.valid_order())
            .min()
            .unwrap_or(cfg.order);
        residuals.push(FamilyResidual {
            name: name.into(),
            max_abs,
            exact_zero,
            valid_order: valid,
        });
    };

    // H₊₊ φ^{ia} = RHS(φ).
    let full = bridge_rhs(&phi, &dl, &ddl, &sym, n2)?;
    let diffs: Vec<_> = phi
        .iter()
        .zip(&full)
        .map(|(f, g)| f.hpp_op().sub(g))
        .collect();
    push("H++ phi^{ia} - source", diffs);

    // H₊₊ φ⁻ᵃ = ωᵃᵇ ∂L/∂z⁻ᵇ |_{φ⁻}.
    let dl_at: Vec<ChargedSeries<S>> = dl
        .iter()
        .map(|d| d.substitute(&phi_minus))
        .collect::<Result<_, _>>()?;
    let diffs: Vec<_> = (0..n2)
        .map(|a| {
            let mut target = ChargedSeries::zero(n, cfg.order, 3);
            for b in 0..n2 {
                let w = sym.omega_upper[a][b];
                if w != 0 {
                    target = target.add(&dl_at[b].scale(&S::from_i64(w)));
                }
            }
            phi_minus[a].hpp_op().sub(&target)
        })
        .collect();
    push("H++ phi^{-a} - omega dL(phi-)", diffs);

    // H₊₊ φ⁺ᵃ = φ⁺ᵇ ωᵃᶜ ∂²L_{bc}|_{φ⁻} − φ⁻ᵃ (sign fixed by the flat case).
    let diffs: Vec<_> = (0..n2)
        .map(|a| {
            let mut target = phi_minus[a].neg();
            for b in 0..n2 {
                for c in 0..n2 {
                    let w = sym.omega_upper[a][c];
                    if w != 0 {
                        target = target.add(&ddl_at[b][c].mul(&phi_plus[b]).scale(&S::from_i64(w)));
                    }
                }
            }
            phi_plus[a].hpp_op().sub(&target)
        })
        .collect();
    push("H++ phi^{+a} - (phi^{+b} omega ddL - phi^{-a})", diffs);

    // H₊₊ Φ = (ω ∂²L|_{φ⁻}) Φ.
    let mut diffs = Vec::new();
    for a in 0..n2 {
        for b in 0..n2 {
            let mut target = ChargedSeries::zero(n, cfg.order, 2);
            for c in 0..n2 {
                target = target.add(&a_full.at(a, c).mul(phi_matrix.at(c, b)));
            }
            diffs.push(phi_matrix.at(a, b).hpp_op().sub(&target));
        }
    }
    push("H++ Phi - (omega ddL) Phi", diffs);

    // Slice data.
    let mut diffs = Vec::new();
    for (t_idx, f) in phi.iter().enumerate() {
        let slice = f.slice_identity();
        let mut expect = init[t_idx].clone();
        for (e, v) in slice {
            let want = expect.remove(&e).unwrap_or_else(S::zero);
            let d = v.sub(&want);
            if !d.is_zero() {
                diffs.push(ChargedSeries::constant(n, cfg.order, d));
            }
        }
        for (_, v) in expect {
            diffs.push(ChargedSeries::constant(n, cfg.order, v));
        }
    }
    push("phi^{ia}(I2, z) - z^{ia}", diffs);

    Ok(Bridge {
        n,
        order: cfg.order,
        phi,
        phi_minus,
        phi_plus,
        phi_matrix,
        psi,
        residuals,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Dimensions;
    use crate::pipeline::prepot::{quadratic_example, quartic_benchmark, validate_prepotential};
    use crate::scalar::Exact;

    fn cfg1(order: u32) -> PipelineConfig {
        PipelineConfig::new(Dimensions::new(1, 1, 0).unwrap(), order)
    }

    #[test]
    fn flat_prepotential_gives_flat_hpp_and_identity_bridge() {
        let cfg = cfg1(4);
        let p = validate_prepotential(&ChargedSeries::<Exact>::zero(1, 4, 4), cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        assert!(hpp.c_minus.iter().all(|s| s.is_zero()));
        assert!(hpp.c_plus.iter().all(|s| s.is_zero()));
        assert!(hpp.m_sp.is_zero());
        let b = solve_bridge(&p, &hpp, &cfg).unwrap();
        // φ⁻ᵃ = z⁻ᵃ, φ⁺ᵃ = z⁺ᵃ, ψ = 0.
        for a in 0..2 {
            assert!(b.phi_minus[a]
                .sub(&ChargedSeries::coordinate(1, 4, false, a))
                .is_zero());
            assert!(b.phi_plus[a]
                .sub(&ChargedSeries::coordinate(1, 4, true, a))
                .is_zero());
        }
        assert!(b.psi.as_ref().unwrap().is_zero());
        assert!(b.residuals.iter().all(|r| r.exact_zero));
    }

    #[test]
    fn hand_computed_hpp_for_harmonic_quadratic() {
        // L = λ(z⁻¹)²(u¹₊)²: v⁻¹ = 0, v⁻² = 2λz⁻¹(u¹₊)²,
        // A₊₊(E)²₁ = 2λ(u¹₊)², v⁺² = 2λ(u¹₊)² z⁺¹.
        let cfg = cfg1(4);
        let l = quadratic_example::<Exact>(4, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let two_lam = Exact::from_ratio(2, 10);
        assert!(hpp.c_minus[0].is_zero());
        let expect = ChargedSeries::coordinate(1, 4, false, 0)
            .scale_coefficient(&HarmonicPoly::monomial([2, 0, 0, 0], two_lam.clone()));
        assert!(hpp.c_minus[1].sub(&expect).is_zero());
        let expect_m = ChargedSeries::from_coefficient(
            1,
            4,
            HarmonicPoly::monomial([2, 0, 0, 0], two_lam.clone()),
        );
        assert!(hpp.m_sp.at(1, 0).sub(&expect_m).is_zero());
        assert!(hpp.m_sp.at(0, 0).is_zero());
        assert!(hpp.m_sp.at(0, 1).is_zero());
        assert!(hpp.m_sp.at(1, 1).is_zero());
        let expect_vp = ChargedSeries::coordinate(1, 4, true, 0)
            .scale_coefficient(&HarmonicPoly::monomial([2, 0, 0, 0], two_lam));
        assert!(hpp.c_plus[1].sub(&expect_vp).is_zero());
        assert!(hpp.c_plus[0].is_zero());
        // e⁰₊a · v⁻ᵇ₊₊ = 0 for any valid L.
        for a in 0..2 {
            for b in 0..2 {
                assert!(hpp.c_minus[b].d_z(true, a).is_zero());
            }
        }
    }

    #[test]
    fn hand_computed_bridge_for_harmonic_quadratic() {
        // φ⁻¹ = z⁻¹ and φ⁻² = z⁻² + 2λ z⁻¹ u¹₊u¹₋.
        let cfg = cfg1(4);
        let l = quadratic_example::<Exact>(4, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let b = solve_bridge(&p, &hpp, &cfg).unwrap();
        assert!(b.residuals.iter().all(|r| r.exact_zero), "{:?}", b.residuals);
        let two_lam = Exact::from_ratio(2, 10);
        assert!(b.phi_minus[0]
            .sub(&ChargedSeries::coordinate(1, 4, false, 0))
            .is_zero());
        let expect = ChargedSeries::coordinate(1, 4, false, 1).add(
            &ChargedSeries::coordinate(1, 4, false, 0)
                .scale_coefficient(&HarmonicPoly::monomial([1, 0, 1, 0], two_lam.clone())),
        );
        assert!(
            b.phi_minus[1].sub(&expect).is_zero(),
            "{:?}",
            b.phi_minus[1]
        );
        // φ⁺² = z⁺² + 2λ z⁺¹ u¹₊u¹₋ and Φ = I + 2λ u¹₊u¹₋ E₂₁-slot.
        let expect_p = ChargedSeries::coordinate(1, 4, true, 1).add(
            &ChargedSeries::coordinate(1, 4, true, 0)
                .scale_coefficient(&HarmonicPoly::monomial([1, 0, 1, 0], two_lam.clone())),
        );
        assert!(b.phi_plus[1].sub(&expect_p).is_zero());
        let expect_phi21 = ChargedSeries::from_coefficient(
            1,
            4,
            HarmonicPoly::monomial([1, 0, 1, 0], two_lam),
        );
        assert!(b.phi_matrix.at(1, 0).sub(&expect_phi21).is_zero());
    }

    #[test]
    fn quartic_bridge_residuals_are_exactly_zero() {
        let cfg = cfg1(6);
        let l = quartic_benchmark::<Exact>(6, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let b = solve_bridge(&p, &hpp, &cfg).unwrap();
        assert!(b.residuals.iter().all(|r| r.exact_zero), "{:#?}", b.residuals);
        assert!(b.iterations <= cfg.order as usize + 2);
        // exp(ψ) reproduces φᵃ_b.
        let psi = b.psi.as_ref().unwrap();
        let back = psi.exp_nilpotent().unwrap();
        for (x, y) in back.entries.iter().zip(&b.phi_matrix.entries) {
            assert!(x.eq_to_valid(y));
        }
    }
}

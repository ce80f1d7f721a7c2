//! Step 3: the canonical hk-frame from the bridge.
//!
//! H₋₋ = φ_*(H⁰₋₋) is computed by the chain rule on the bridge components,
//! composed with the series inverse of the z-map (which exists exactly when
//! the bridge corrections start at z-degree 2: every prepotential term of
//! z-degree ≥ 3 guarantees this); e₋a = [H₋₋, e⁰₊a].

use super::bridge::Bridge;
use super::{PipelineConfig, PipelineError};
use crate::algebra::{BasisIndex, SymplecticData};
use crate::frames::{lie_bracket, BracketArg, FamilyCtx, FrameField, FrameKind, HKFrame};
use crate::harmonic::HarmonicPoly;
use crate::jets::{invert_z_map, ChargedSeries, JetsError, SeriesMatrix};
use crate::scalar::Scalar;
use num::complex::Complex64;
use rand::Rng;
use rand::SeedableRng;

fn u_plus<S: Scalar>(i: usize) -> HarmonicPoly<S> {
    HarmonicPoly::monomial(if i == 0 { [1, 0, 0, 0] } else { [0, 1, 0, 0] }, S::one())
}

fn u_minus<S: Scalar>(i: usize) -> HarmonicPoly<S> {
    HarmonicPoly::monomial(if i == 0 { [0, 0, 1, 0] } else { [0, 0, 0, 1] }, S::one())
}

/// The analytic z-map components of the bridge, ordered (z⁺.., z⁻..).
pub fn bridge_z_map<S: Scalar>(bridge: &Bridge<S>) -> Vec<ChargedSeries<S>> {
    let mut comps = bridge.phi_plus.clone();
    comps.extend(bridge.phi_minus.iter().cloned());
    comps
}

/// Build the canonical frame (H₀, H₊₊, H₋₋, E_A, e₊a, e₋a).
pub fn build_frame<S: Scalar>(
    hpp: &FrameField<S>,
    bridge: &Bridge<S>,
    cfg: &PipelineConfig,
) -> Result<HKFrame<S>, PipelineError> {
    let n = cfg.dims.n;
    let n2 = 2 * n;
    let sym = SymplecticData::new(cfg.dims);

    // Inverse of the z-map; fails with NotTriangular on corrections of
    // z-degree < 2.
    let comps = bridge_z_map(bridge);
    let z0 = match invert_z_map(&comps) {
        Ok(z0) => z0,
        Err(JetsError::NotTriangular(d)) => {
            return Err(PipelineError::NonTriangularBridge(d))
        }
        Err(e) => return Err(e.into()),
    };

    // H₋₋ components at the slice: v^{±a}₋₋ = −u^{±}_i (H₋₋ φ^{ia}) ∘ z₀ and
    // A₋₋ = ((H₋₋ φ̃) φ̃⁻¹) ∘ z₀.
    let hmm_phi: Vec<ChargedSeries<S>> = bridge.phi.iter().map(|f| f.hmm_op()).collect();
    let composed: Vec<ChargedSeries<S>> = hmm_phi
        .iter()
        .map(|f| f.substitute_all(&z0))
        .collect::<Result<_, _>>()?;
    let mut hmm_field = FrameField::zero(n, cfg.order, -2);
    hmm_field.c_hmm = ChargedSeries::constant(n, cfg.order, S::one());
    for a in 0..n2 {
        // −u⁻ᵢ comp^{ia} = −u²₊ comp^{1a} + u¹₊ comp^{2a} (charge −1).
        let v_minus = composed[n2 + a]
            .scale_coefficient(&u_plus(0))
            .sub(&composed[a].scale_coefficient(&u_plus(1)));
        hmm_field.c_minus[a] = v_minus;
        // −u⁺ᵢ comp^{ia} = u²₋ comp^{1a} − u¹₋ comp^{2a} (charge −3).
        let v_plus = composed[a]
            .scale_coefficient(&u_minus(1))
            .sub(&composed[n2 + a].scale_coefficient(&u_minus(0)));
        hmm_field.c_plus[a] = v_plus;
    }
    let phimat_inv = bridge
        .phi_matrix
        .inverse_unipotent()
        .map_err(PipelineError::from)?;
    let hmm_phimat = bridge.phi_matrix.map(|e| e.hmm_op());
    let compose_matrix = |m: &SeriesMatrix<S>| -> Result<SeriesMatrix<S>, PipelineError> {
        let mut out = m.clone();
        for e in out.entries.iter_mut() {
            *e = e.substitute_all(&z0)?;
        }
        Ok(out)
    };
    let a_mm = compose_matrix(&hmm_phimat)?.matmul(&compose_matrix(&phimat_inv)?);
    hmm_field.m_sp = a_mm;

    // e₋a = [H₋₋, e⁰₊a].
    let flat_e_plus: Vec<FrameField<S>> = (0..n2)
        .map(|a| FrameField::flat(&sym, cfg.order, BasisIndex::EPlus(a)))
        .collect();
    let e_minus: Vec<FrameField<S>> = (0..n2)
        .map(|a| {
            lie_bracket(
                BracketArg::plain(&hmm_field),
                BracketArg {
                    field: &flat_e_plus[a],
                    family: FamilyCtx::Lower(&flat_e_plus, a),
                    frozen: true,
                },
            )
        })
        .collect();

    let frame = HKFrame {
        sym: sym.clone(),
        order: cfg.order,
        kind: FrameKind::Canonical,
        h0: FrameField::flat(&sym, cfg.order, BasisIndex::H0),
        hpp: hpp.clone(),
        hmm: hmm_field,
        e_family_flat: true,
        e_plus: flat_e_plus,
        e_minus,
    };

    check_independence(&frame, cfg)?;
    Ok(frame)
}

/// Numeric linear independence of the frame at I₂ plus pseudo-random sampled
/// points with a fixed seed.
pub fn check_independence<S: Scalar>(
    frame: &HKFrame<S>,
    cfg: &PipelineConfig,
) -> Result<(), PipelineError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x66726d65);
    let n = cfg.dims.n;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut points = vec![([[one, zero], [zero, one]], vec![zero; 4 * n])];
    for _ in 0..8 {
        let mut u = [[zero; 2]; 2];
        u[0][0] = Complex64::new(1.0 + 0.3 * rng.gen::<f64>(), 0.3 * (rng.gen::<f64>() - 0.5));
        u[0][1] = Complex64::new(0.4 * (rng.gen::<f64>() - 0.5), 0.4 * (rng.gen::<f64>() - 0.5));
        u[1][0] = Complex64::new(0.4 * (rng.gen::<f64>() - 0.5), 0.4 * (rng.gen::<f64>() - 0.5));
        u[1][1] = (one + u[1][0] * u[0][1]) / u[0][0];
        let z: Vec<Complex64> = (0..4 * n)
            .map(|_| Complex64::new(0.2 * (rng.gen::<f64>() - 0.5), 0.2 * (rng.gen::<f64>() - 0.5)))
            .collect();
        points.push((u, z));
    }
    for (u, z) in &points {
        let m = frame_matrix_at(frame, u, z)?;
        let needed = 3 + cfg.dims.sp_dim() + 4 * n;
        if crate::numeric::rank(&m, cfg.rank_tol) < needed {
            return Err(PipelineError::SingularFrame);
        }
    }
    Ok(())
}

/// Ambient component matrix of all frame fields at a harmonic-slice point
/// (B = I): rows are the complex coordinates (u(4), B(4n²), z^{±}(4n)),
/// columns the 3 + N + 4n fields.
pub fn frame_matrix_at<S: Scalar>(
    frame: &HKFrame<S>,
    u: &[[Complex64; 2]; 2],
    z: &[Complex64],
) -> Result<crate::numeric::CMat, PipelineError> {
    let n = frame.sym.dims.n;
    let n2 = 2 * n;
    let nfields = 3 + frame.sym.dims.sp_dim() + 4 * n;
    let rows = 4 + n2 * n2 + 4 * n;
    let mut m = crate::numeric::CMat::zeros(rows, nfields);
    let e_mats = crate::algebra::sp_basis(&frame.sym);
    let mut col = 0;
    let put_field = |field: &FrameField<S>, col: usize, m: &mut crate::numeric::CMat| {
        // u-components: H₀, H₊₊, H₋₋ act on the u-coordinates.
        let h0v = field.c_h0.eval_unchecked(u, z);
        let hppv = field.c_hpp.eval_unchecked(u, z);
        let hmmv = field.c_hmm.eval_unchecked(u, z);
        // Coordinates ordered (u¹₊, u²₊, u¹₋, u²₋).
        let uu = [u[0][0], u[1][0], u[0][1], u[1][1]];
        // H₀: δu±ᵢ = ±u±ᵢ; H₊₊: δu⁻ᵢ = u⁺ᵢ; H₋₋: δu⁺ᵢ = u⁻ᵢ.
        *m.at_mut(0, col) += h0v * uu[0] + hmmv * uu[2];
        *m.at_mut(1, col) += h0v * uu[1] + hmmv * uu[3];
        *m.at_mut(2, col) += -h0v * uu[2] + hppv * uu[0];
        *m.at_mut(3, col) += -h0v * uu[3] + hppv * uu[1];
        // B-components at B = I: δB = M-matrix.
        for i in 0..n2 {
            for j in 0..n2 {
                *m.at_mut(4 + i * n2 + j, col) += field.m_sp.at(i, j).eval_unchecked(u, z);
            }
        }
        // z-components (analytic): coefficients of e⁰±b = ∂±b at B = I.
        for b in 0..n2 {
            *m.at_mut(4 + n2 * n2 + b, col) += field.c_plus[b].eval_unchecked(u, z);
            *m.at_mut(4 + n2 * n2 + n2 + b, col) += field.c_minus[b].eval_unchecked(u, z);
        }
    };
    put_field(&frame.h0, col, &mut m);
    col += 1;
    put_field(&frame.hpp, col, &mut m);
    col += 1;
    put_field(&frame.hmm, col, &mut m);
    col += 1;
    for e in &e_mats {
        for i in 0..n2 {
            for j in 0..n2 {
                *m.at_mut(4 + i * n2 + j, col) = Complex64::new(e[i][j] as f64, 0.0);
            }
        }
        col += 1;
    }
    for a in 0..n2 {
        put_field(&frame.e_plus[a], col, &mut m);
        col += 1;
    }
    for a in 0..n2 {
        put_field(&frame.e_minus[a], col, &mut m);
        col += 1;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Dimensions;
    use crate::frames::{check_canonical, check_hk_axioms, check_potentials_identities};
    use crate::pipeline::bridge::{build_hpp, solve_bridge};
    use crate::pipeline::prepot::{quartic_benchmark, validate_prepotential};
    use crate::scalar::Exact;

    fn cfg1(order: u32) -> PipelineConfig {
        PipelineConfig::new(Dimensions::new(1, 1, 0).unwrap(), order)
    }

    #[test]
    fn flat_input_gives_flat_frame() {
        let cfg = cfg1(4);
        let p = validate_prepotential(&ChargedSeries::<Exact>::zero(1, 4, 4), cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let frame = build_frame(&hpp, &bridge, &cfg).unwrap();
        assert!(frame.hmm.c_plus.iter().all(|s| s.is_zero()));
        assert!(frame.hmm.c_minus.iter().all(|s| s.is_zero()));
        assert!(frame.hmm.m_sp.is_zero());
        let report = check_hk_axioms(&frame);
        assert!(report.all_zero());
        let canon = check_canonical(&frame);
        assert!(canon.is_canonical());
        assert!(canon.v_potential.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn quartic_frame_is_canonical_with_exact_axioms() {
        let cfg = cfg1(5);
        let l = quartic_benchmark::<Exact>(5, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let frame = build_frame(&hpp, &bridge, &cfg).unwrap();
        let report = check_hk_axioms(&frame);
        assert!(report.all_zero(), "{report:#?}");
        let canon = check_canonical(&frame);
        assert!(canon.is_canonical());
        let pot = check_potentials_identities(&frame);
        assert!(pot.all_zero(), "{pot:#?}");
        // Curvature is nonzero and ω-symmetric.
        let curv = crate::frames::extract_curvature(&frame).unwrap();
        assert!(!curv.is_zero());
        assert!(crate::frames::curvature_omega_symmetric(&frame.sym, &curv));
    }

    #[test]
    fn quadratic_prepotential_is_not_triangular() {
        // A z-degree-2 term puts a z-linear correction into the bridge; the
        // exact series inversion must refuse it.
        let cfg = cfg1(4);
        let l = crate::pipeline::prepot::quadratic_example::<Exact>(4, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        assert!(matches!(
            build_frame(&hpp, &bridge, &cfg),
            Err(PipelineError::NonTriangularBridge(_))
        ));
    }
}

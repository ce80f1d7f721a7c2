//! Step 4: the integral submanifold M′ of the real distribution 𝒟′ on the
//! central slice, built by composing RK4 flows of a spanning set of
//! generators (canonical coordinates of the second kind).
//!
//! The generators are projections of the hat fields ê±a = φ⁻¹_*(e±a): for
//! every τ-fixed combination v ∈ V^τ the field π_*(α^Â(v)) is tangent to the
//! leaf through 0. The τ-basis is ordered so the flat Gram matrix is exactly
//! I₄⊗η.

use super::bridge::Bridge;
use super::frame_build::bridge_z_map;
use super::{JPairing, PipelineConfig, PipelineError};
use crate::algebra::{BasisIndex, SymplecticData};
use crate::frames::{lie_bracket, BracketArg, FamilyCtx, FrameField};
use crate::jets::{ChargedSeries, SeriesMatrix};
use crate::numeric::{rank, rk4_step, rk4_step_with_tangents, CMat};
use crate::scalar::Scalar;
use num::complex::Complex64;
use rand::Rng;
use rand::SeedableRng;

/// The pulled-back frame ê±a = φ⁻¹_*(e±a) on the central slice.
#[derive(Clone, Debug)]
pub struct HatFrame<S: Scalar> {
    pub e_plus: Vec<FrameField<S>>,
    pub e_minus: Vec<FrameField<S>>,
}

/// Solve φ_*(ê₊a) = e⁰₊a for the hat-field coefficients:
/// J·v̂ = rhs with J the z-Jacobian of the bridge map and
/// rhs^{(+c)} = φ̃ᶜ_a, rhs^{(−c)} = 0; the E-part is −φ̃⁻¹(v̂·∂φ̃).
pub fn hat_frame<S: Scalar>(
    bridge: &Bridge<S>,
    cfg: &PipelineConfig,
) -> Result<HatFrame<S>, PipelineError> {
    let n = cfg.dims.n;
    let n2 = 2 * n;
    let n4 = 4 * n;
    let sym = SymplecticData::new(cfg.dims);
    let comps = bridge_z_map(bridge);

    // Jacobian J[m][b] = ∂(comp_m)/∂(z_b), unipotent for triangular bridges.
    let mut jac = SeriesMatrix::<S>::zeros(n4, n4, n, cfg.order, 0);
    for (m, comp) in comps.iter().enumerate() {
        for b in 0..n4 {
            *jac.at_mut(m, b) = comp.d_z(b < n2, b % n2);
        }
    }
    let jac_inv = jac.inverse_unipotent().map_err(|e| match e {
        crate::jets::JetsError::NotTriangular(d) => PipelineError::NonTriangularBridge(d),
        other => PipelineError::Jets(other),
    })?;
    let phimat_inv = bridge.phi_matrix.inverse_unipotent()?;

    let mut e_plus = Vec::with_capacity(n2);
    for a in 0..n2 {
        // rhs column: φ̃ᶜ_a in the z⁺-rows.
        let rhs: Vec<ChargedSeries<S>> = (0..n4)
            .map(|m| {
                if m < n2 {
                    bridge.phi_matrix.at(m, a).clone()
                } else {
                    ChargedSeries::zero(n, cfg.order, 0)
                }
            })
            .collect();
        let mut vhat: Vec<ChargedSeries<S>> = Vec::with_capacity(n4);
        for row in 0..n4 {
            let mut acc: Option<ChargedSeries<S>> = None;
            for col in 0..n4 {
                let term = jac_inv.at(row, col).mul(&rhs[col]);
                acc = Some(match acc {
                    None => term,
                    Some(x) => x.add(&term),
                });
            }
            vhat.push(acc.unwrap());
        }
        let mut f = FrameField::zero(n, cfg.order, 1);
        for b in 0..n2 {
            f.c_plus[b] = vhat[b].clone();
            f.c_minus[b] = vhat[n2 + b].clone();
        }
        // E-part: M̂ = −φ̃⁻¹ · (v̂·∂φ̃).
        let mut vd = SeriesMatrix::<S>::zeros(n2, n2, n, cfg.order, 1);
        for c in 0..n2 {
            for d in 0..n2 {
                let mut acc = ChargedSeries::zero(n, cfg.order, 1);
                for b in 0..n2 {
                    acc = acc.add(&vhat[b].mul(&bridge.phi_matrix.at(c, d).d_z(true, b)));
                    acc = acc.add(&vhat[n2 + b].mul(&bridge.phi_matrix.at(c, d).d_z(false, b)));
                }
                *vd.at_mut(c, d) = acc;
            }
        }
        f.m_sp = phimat_inv.matmul(&vd).map(|e| e.neg());
        e_plus.push(f);
    }

    let flat_hmm = FrameField::flat(&sym, cfg.order, BasisIndex::Hmm);
    let e_minus: Vec<FrameField<S>> = (0..n2)
        .map(|a| {
            lie_bracket(
                BracketArg::frozen(&flat_hmm),
                BracketArg {
                    field: &e_plus[a],
                    family: FamilyCtx::Lower(&e_plus, a),
                    frozen: false,
                },
            )
        })
        .collect();
    Ok(HatFrame { e_plus, e_minus })
}

/// τ-fixed basis of V as exact Gaussian-integer coefficient pairs
/// ((re, im) over e₊, over e₋), ordered (A-family, then i·B-family).
pub fn tau_basis_exact(
    sym: &SymplecticData,
    pairing: JPairing,
) -> Vec<(Vec<(i64, i64)>, Vec<(i64, i64)>)> {
    let n2 = 2 * sym.dims.n;
    let j = |b: usize, a: usize| -> i64 {
        match pairing {
            JPairing::TauBasis => sym.jhat0[b][a],
            JPairing::Transposed => sym.jhat0[a][b],
        }
    };
    let mut out = Vec::with_capacity(2 * n2);
    for a in 0..n2 {
        let mut plus = vec![(0, 0); n2];
        let mut minus = vec![(0, 0); n2];
        plus[a] = (1, 0);
        for b in 0..n2 {
            minus[b] = (-j(b, a), 0);
        }
        out.push((plus, minus));
    }
    for a in 0..n2 {
        let mut plus = vec![(0, 0); n2];
        let mut minus = vec![(0, 0); n2];
        plus[a] = (0, 1);
        for b in 0..n2 {
            minus[b] = (0, j(b, a));
        }
        out.push((plus, minus));
    }
    out
}

/// Central z^{ic}-displacement components of π_*(α^Â(v)) for every τ-basis
/// element v, as (generally charge-mixed) series in (u, z).
fn distribution_series<S: Scalar>(
    hat: &HatFrame<S>,
    sym: &SymplecticData,
    order: u32,
    pairing: JPairing,
) -> Vec<Vec<ChargedSeries<S>>> {
    let n = sym.dims.n;
    let n2 = 2 * n;
    let basis = tau_basis_exact(sym, pairing);
    let u_plus = |i: usize| -> crate::harmonic::HarmonicPoly<S> {
        crate::harmonic::HarmonicPoly::monomial(
            if i == 0 { [1, 0, 0, 0] } else { [0, 1, 0, 0] },
            S::one(),
        )
    };
    let u_minus = |i: usize| -> crate::harmonic::HarmonicPoly<S> {
        crate::harmonic::HarmonicPoly::monomial(
            if i == 0 { [0, 0, 1, 0] } else { [0, 0, 0, 1] },
            S::one(),
        )
    };
    let mut out = Vec::with_capacity(basis.len());
    for (cp, cm) in &basis {
        // Coefficient vectors of the combination Σ cp·ê₊a + cm·ê₋a.
        let mut comb_plus = vec![ChargedSeries::zero(n, order, 0); n2];
        let mut comb_minus = vec![ChargedSeries::zero(n, order, 0); n2];
        for a in 0..n2 {
            let wp = S::from_gaussian(cp[a].0, 1, cp[a].1, 1);
            let wm = S::from_gaussian(cm[a].0, 1, cm[a].1, 1);
            for c in 0..n2 {
                if !wp.is_zero() {
                    comb_plus[c] = comb_plus[c].add(&hat.e_plus[a].c_plus[c].scale(&wp));
                    comb_minus[c] = comb_minus[c].add(&hat.e_plus[a].c_minus[c].scale(&wp));
                }
                if !wm.is_zero() {
                    comb_plus[c] = comb_plus[c].add(&hat.e_minus[a].c_plus[c].scale(&wm));
                    comb_minus[c] = comb_minus[c].add(&hat.e_minus[a].c_minus[c].scale(&wm));
                }
            }
        }
        // dz^{ic} = uⁱ₊·(e₊-coefficient c) + uⁱ₋·(e₋-coefficient c).
        let mut comps = Vec::with_capacity(4 * n);
        for i in 0..2 {
            for c in 0..n2 {
                let s = comb_plus[c]
                    .scale_coefficient(&u_plus(i))
                    .add(&comb_minus[c].scale_coefficient(&u_minus(i)));
                comps.push(s);
            }
        }
        out.push(comps);
    }
    out
}

/// Numeric chart of the integral submanifold through the origin.
pub struct ManifoldChart<S: Scalar> {
    pub cfg: PipelineConfig,
    /// Displacement components of every τ-basis generator (series in (u,z)).
    pub dist: Vec<Vec<ChargedSeries<S>>>,
    /// Fixed Sp₁(ℂ) samples used in the span.
    pub u_samples: Vec<[[Complex64; 2]; 2]>,
    /// Selected generators as (sample index, τ-basis index), 4n of them, in
    /// chart-coordinate order.
    pub generators: Vec<(usize, usize)>,
    /// Rank of 𝒟′ at the origin.
    pub rank_at_origin: usize,
    /// Closure defect of two commuted flows (involutivity spot check).
    pub involutivity_defect: f64,
    /// Deterministic sampled chart points (flow coordinates).
    pub sample_points: Vec<Vec<f64>>,
}

fn real_to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn complex_to_real(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * z.len());
    for c in z {
        out.push(c.re);
        out.push(c.im);
    }
    out
}

impl<S: Scalar> ManifoldChart<S> {
    /// Generator vector field (real 8n-dim) for a (sample, basis) pair.
    ///
    /// Chart points sit on the slice U = I₂ where analytic and central
    /// z-coordinates coincide; the sample U only selects the generator.
    fn field_at(&self, gen: (usize, usize), x: &[f64]) -> Vec<f64> {
        let u = &self.u_samples[gen.0];
        let z = real_to_complex(x);
        let disp: Vec<Complex64> = self.dist[gen.1]
            .iter()
            .map(|s| s.eval_unchecked(u, &z))
            .collect();
        complex_to_real(&disp)
    }

    fn jacobian_at(&self, gen: (usize, usize), x: &[f64]) -> Vec<Vec<f64>> {
        let u = &self.u_samples[gen.0];
        let z = real_to_complex(x);
        let n4 = z.len();
        let n2 = n4 / 2;
        let mut out = vec![vec![0.0; 2 * n4]; 2 * n4];
        for (i, s) in self.dist[gen.1].iter().enumerate() {
            for b in 0..n4 {
                let d = s.d_z(b < n2, b % n2).eval_unchecked(u, &z);
                out[2 * i][2 * b] = d.re;
                out[2 * i][2 * b + 1] = -d.im;
                out[2 * i + 1][2 * b] = d.im;
                out[2 * i + 1][2 * b + 1] = d.re;
            }
        }
        out
    }

    /// Flow to the chart point t. Returns the source point (z at U = I₂) and
    /// the coordinate tangent frame ∂/∂t_μ as complex displacement columns.
    pub fn flow_to(
        &self,
        t: &[f64],
    ) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>), PipelineError> {
        let n4 = self.dist[0].len();
        assert_eq!(t.len(), self.generators.len());
        let mut x = vec![0.0; 2 * n4];
        let mut tangents: Vec<Vec<f64>> = Vec::new();
        let mut order_added: Vec<usize> = Vec::new();
        for k in (0..self.generators.len()).rev() {
            let gen = self.generators[k];
            let steps = self.cfg.chart_steps.max(1);
            let h = t[k] / steps as f64;
            if h != 0.0 {
                let f = |y: &[f64]| self.field_at(gen, y);
                let df = |y: &[f64]| self.jacobian_at(gen, y);
                for _ in 0..steps {
                    x = rk4_step_with_tangents(&f, &df, &x, &mut tangents, h);
                    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > self.cfg.flow_max_norm {
                        return Err(PipelineError::FlowDiverged(norm));
                    }
                }
            }
            tangents.push(self.field_at(gen, &x));
            order_added.push(k);
        }
        let mut cols = vec![Vec::new(); self.generators.len()];
        for (pos, k) in order_added.iter().enumerate() {
            cols[*k] = real_to_complex(&tangents[pos]);
        }
        Ok((real_to_complex(&x), cols))
    }
}

/// Build the chart: sample Sp₁(ℂ) points until the distribution spans rank
/// 4n at the origin, pick 4n generators greedily, and spot-check
/// involutivity by commuting two flows.
pub fn integrate_manifold<S: Scalar>(
    hat: &HatFrame<S>,
    cfg: &PipelineConfig,
) -> Result<ManifoldChart<S>, PipelineError> {
    let n = cfg.dims.n;
    let n4 = 4 * n;
    let sym = SymplecticData::new(cfg.dims);
    let dist = distribution_series(hat, &sym, cfg.order, cfg.j_pairing);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut u_samples: Vec<[[Complex64; 2]; 2]> = vec![[[one, zero], [zero, one]]];
    let origin = vec![zero; n4];

    let mut selected: Vec<(usize, usize)> = Vec::new();
    let mut span_cols: Vec<Vec<f64>> = Vec::new();
    let numeric_rank = |cols: &[Vec<f64>]| -> usize {
        if cols.is_empty() {
            return 0;
        }
        let mut m = CMat::zeros(cols[0].len(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                *m.at_mut(i, j) = Complex64::new(*v, 0.0);
            }
        }
        rank(&m, 1e-9)
    };
    loop {
        let s = u_samples.len() - 1;
        for i in 0..dist.len() {
            if selected.len() == n4 {
                break;
            }
            let disp: Vec<Complex64> = dist[i]
                .iter()
                .map(|f| f.eval_unchecked(&u_samples[s], &origin))
                .collect();
            let col = complex_to_real(&disp);
            let mut candidate = span_cols.clone();
            candidate.push(col.clone());
            if numeric_rank(&candidate) > span_cols.len() {
                span_cols = candidate;
                selected.push((s, i));
            }
        }
        if selected.len() == n4 || u_samples.len() >= cfg.max_u_samples {
            break;
        }
        let mut u = [[zero; 2]; 2];
        u[0][0] = Complex64::new(1.0 + 0.2 * rng.gen::<f64>(), 0.2 * (rng.gen::<f64>() - 0.5));
        u[0][1] = Complex64::new(0.3 * (rng.gen::<f64>() - 0.5), 0.3 * (rng.gen::<f64>() - 0.5));
        u[1][0] = Complex64::new(0.3 * (rng.gen::<f64>() - 0.5), 0.3 * (rng.gen::<f64>() - 0.5));
        u[1][1] = (one + u[1][0] * u[0][1]) / u[0][0];
        u_samples.push(u);
    }
    let rank_at_origin = selected.len();
    if rank_at_origin != n4 {
        return Err(PipelineError::RankDeficient {
            found: rank_at_origin,
            needed: n4,
        });
    }

    let mut chart = ManifoldChart {
        cfg: cfg.clone(),
        dist,
        u_samples,
        generators: selected,
        rank_at_origin,
        involutivity_defect: 0.0,
        sample_points: Vec::new(),
    };

    // Involutivity spot check: commute the first two generator flows.
    let s = cfg.chart_radius / 4.0;
    let commute = |chart: &ManifoldChart<S>, order: [usize; 2]| -> Vec<f64> {
        let mut x = vec![0.0; 2 * n4];
        for &k in &order {
            let gen = chart.generators[k];
            let steps = cfg.chart_steps.max(1);
            let h = s / steps as f64;
            let f = |y: &[f64]| chart.field_at(gen, y);
            for _ in 0..steps {
                x = rk4_step(&f, &x, h);
            }
        }
        x
    };
    let xab = commute(&chart, [0, 1]);
    let xba = commute(&chart, [1, 0]);
    chart.involutivity_defect = xab
        .iter()
        .zip(&xba)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut pts = Vec::new();
    for _ in 0..32 {
        let t: Vec<f64> = (0..n4)
            .map(|_| cfg.chart_radius * (2.0 * rng.gen::<f64>() - 1.0) / (n4 as f64).sqrt())
            .collect();
        pts.push(t);
    }
    chart.sample_points = pts;
    Ok(chart)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Dimensions;
    use crate::pipeline::bridge::{build_hpp, solve_bridge};
    use crate::pipeline::prepot::{quartic_benchmark, validate_prepotential};
    use crate::scalar::Exact;

    fn cfg1(order: u32) -> PipelineConfig {
        PipelineConfig::new(Dimensions::new(1, 1, 0).unwrap(), order)
    }

    fn flat_chart(order: u32) -> ManifoldChart<Exact> {
        let cfg = cfg1(order);
        let p =
            validate_prepotential(&ChargedSeries::<Exact>::zero(1, order, 4), cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        integrate_manifold(&hat, &cfg).unwrap()
    }

    #[test]
    fn flat_hat_frame_is_flat() {
        let cfg = cfg1(4);
        let p = validate_prepotential(&ChargedSeries::<Exact>::zero(1, 4, 4), cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        let one = ChargedSeries::constant(1, 4, Exact::from_i64(1));
        for a in 0..2 {
            assert!(hat.e_plus[a].c_plus[a].eq_to_valid(&one));
            assert!(hat.e_plus[a].c_minus.iter().all(|s| s.is_zero()));
            assert!(hat.e_plus[a].m_sp.is_zero());
            assert!(hat.e_minus[a].c_minus[a].eq_to_valid(&one));
            assert!(hat.e_minus[a].c_plus.iter().all(|s| s.is_zero()));
        }
    }

    #[test]
    fn flat_chart_is_tau_slice() {
        // The flat distribution is tangent to the τ-fixed set: chart points
        // satisfy the fixed-point pattern (w, v̄, v, −w̄).
        let chart = flat_chart(4);
        assert_eq!(chart.rank_at_origin, 4);
        assert!(chart.involutivity_defect < 1e-12);
        let t = vec![0.05, -0.03, 0.02, 0.04];
        let (z, tangents) = chart.flow_to(&t).unwrap();
        assert!((z[1] - z[2].conj()).norm() < 1e-12, "{z:?}");
        assert!((z[3] + z[0].conj()).norm() < 1e-12, "{z:?}");
        assert_eq!(tangents.len(), 4);
    }

    #[test]
    fn quartic_chart_has_full_rank() {
        let cfg = cfg1(4);
        let l = quartic_benchmark::<Exact>(4, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        let chart = integrate_manifold(&hat, &cfg).unwrap();
        assert_eq!(chart.rank_at_origin, 4);
        // Commuting two leaf-tangent flows need not close exactly (the
        // defect measures [X,Y] as fields); it must stay at the curvature
        // scale s²·|[X,Y]| for s = radius/4.
        assert!(
            chart.involutivity_defect < 1e-4,
            "{}",
            chart.involutivity_defect
        );
    }

    #[test]
    fn far_flow_diverges() {
        let mut cfg = cfg1(4);
        cfg.flow_max_norm = 10.0;
        let l = quartic_benchmark::<Exact>(4, 10, 1);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        let chart = integrate_manifold(&hat, &cfg).unwrap();
        let t = vec![1e4, 0.0, 0.0, 0.0];
        assert!(matches!(
            chart.flow_to(&t),
            Err(PipelineError::FlowDiverged(_))
        ));
    }
}

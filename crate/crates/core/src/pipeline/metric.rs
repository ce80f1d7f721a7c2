//! Step 5: the pseudo-hyperkähler metric.
//!
//! Two independent routes are computed at every sample point and compared:
//! the coframe route pairs chart tangents with the dual coframe of the
//! canonical frame (g = −½ ω_ab e^{+a} ∨ e^{−b}), and the vielbein route
//! declares the projected τ-basis fields orthonormal with Gram I₄⊗η after a
//! choice of Sp_{p,q}-section. The two must agree to the configured
//! tolerance; the flat case reproduces I₄⊗η exactly.

use super::bridge::Bridge;
use super::chart::{tau_basis_exact, ManifoldChart};
use super::{PipelineConfig, PipelineError};
use crate::frames::{FrameField, HKFrame};
use crate::numeric::{lstsq, rank, symmetric_eigenvalues, CMat};
use crate::scalar::Scalar;
use num::complex::Complex64;

/// Metric data at one chart point.
#[derive(Clone, Debug)]
pub struct MetricSample {
    pub point: Vec<f64>,
    /// Real symmetric 4n×4n metric in the chart coordinate basis.
    pub g: Vec<Vec<f64>>,
    /// Coframe pairings c^{±a} of the chart tangents (coframe route).
    pub coframe: Vec<Vec<Complex64>>,
    pub signature: (usize, usize),
    /// Largest imaginary part seen in the coframe-route metric.
    pub reality_max_imag: f64,
    /// Max entry difference between the two routes.
    pub route_mismatch: f64,
}

/// Numeric evaluation of a frame field's slice coefficients.
struct RawEval {
    h0: Complex64,
    hpp: Complex64,
    hmm: Complex64,
    plus: Vec<Complex64>,
    minus: Vec<Complex64>,
    m: CMat,
}

fn raw_eval<S: Scalar>(f: &FrameField<S>, u: &[[Complex64; 2]; 2], z: &[Complex64]) -> RawEval {
    let n2 = f.c_plus.len();
    let mut m = CMat::zeros(n2, n2);
    for i in 0..n2 {
        for j in 0..n2 {
            *m.at_mut(i, j) = f.m_sp.at(i, j).eval_unchecked(u, z);
        }
    }
    RawEval {
        h0: f.c_h0.eval_unchecked(u, z),
        hpp: f.c_hpp.eval_unchecked(u, z),
        hmm: f.c_hmm.eval_unchecked(u, z),
        plus: f.c_plus.iter().map(|s| s.eval_unchecked(u, z)).collect(),
        minus: f.c_minus.iter().map(|s| s.eval_unchecked(u, z)).collect(),
        m,
    }
}

impl RawEval {
    fn zero(n2: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        RawEval {
            h0: zero,
            hpp: zero,
            hmm: zero,
            plus: vec![zero; n2],
            minus: vec![zero; n2],
            m: CMat::zeros(n2, n2),
        }
    }

    fn add_scaled(&mut self, other: &RawEval, w: Complex64) {
        self.h0 += w * other.h0;
        self.hpp += w * other.hpp;
        self.hmm += w * other.hmm;
        for i in 0..self.plus.len() {
            self.plus[i] += w * other.plus[i];
            self.minus[i] += w * other.minus[i];
        }
        for i in 0..self.m.rows {
            for j in 0..self.m.cols {
                *self.m.at_mut(i, j) += w * other.m.at(i, j);
            }
        }
    }
}

/// Complex displacement of a vector at a point of 𝒫, in the coordinates
/// (u¹₊, u²₊, u¹₋, u²₋; Bᵃ_b; z^{±a}-analytic).
#[derive(Clone, Debug)]
pub struct Displacement {
    pub du: [Complex64; 4],
    pub db: CMat,
    pub dz: Vec<Complex64>,
}

impl Displacement {
    fn zero(n2: usize) -> Self {
        Displacement {
            du: [Complex64::new(0.0, 0.0); 4],
            db: CMat::zeros(n2, n2),
            dz: vec![Complex64::new(0.0, 0.0); 2 * n2],
        }
    }

    fn to_vec(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(4 + self.db.rows * self.db.cols + self.dz.len());
        out.extend_from_slice(&self.du);
        out.extend(self.db.data.iter().cloned());
        out.extend(self.dz.iter().cloned());
        out
    }
}

/// Displacement of the field with slice values `raw` at the point
/// (U, B_tot, z̃): the coefficient/flat-frame B-factors cancel except for a
/// right factor in the E-part, leaving δz^{±d} = raw-values and
/// δB = raw.m · B_tot (plus the u-pattern from the H-parts).
fn displacement_from_raw(raw: &RawEval, u: &[[Complex64; 2]; 2], b_tot: &CMat) -> Displacement {
    let n2 = raw.plus.len();
    let mut d = Displacement::zero(n2);
    let uu = [u[0][0], u[1][0], u[0][1], u[1][1]];
    // H₀: δu±ᵢ = ±u±ᵢ; H₊₊: δu⁻ᵢ = u⁺ᵢ; H₋₋: δu⁺ᵢ = u⁻ᵢ.
    d.du[0] = raw.h0 * uu[0] + raw.hmm * uu[2];
    d.du[1] = raw.h0 * uu[1] + raw.hmm * uu[3];
    d.du[2] = -raw.h0 * uu[2] + raw.hpp * uu[0];
    d.du[3] = -raw.h0 * uu[3] + raw.hpp * uu[1];
    d.db = raw.m.matmul(b_tot);
    for b in 0..n2 {
        d.dz[b] = raw.plus[b];
        d.dz[n2 + b] = raw.minus[b];
    }
    d
}

/// Displacement of member `a` of a lower-indexed family at (U, B_tot, z̃):
/// the family slot contracts with a column of B_tot.
fn family_displacement<S: Scalar>(
    family: &[FrameField<S>],
    a: usize,
    u: &[[Complex64; 2]; 2],
    z: &[Complex64],
    b_tot: &CMat,
) -> Displacement {
    let n2 = family.len();
    let mut mixed = RawEval::zero(n2);
    for c in 0..n2 {
        let w = b_tot.at(c, a);
        if w.norm() == 0.0 {
            continue;
        }
        let raw = raw_eval(&family[c], u, z);
        mixed.add_scaled(&raw, w);
    }
    displacement_from_raw(&mixed, u, b_tot)
}

/// Real basis of 𝔰𝔭_{p,q} inside 𝔰𝔭ₙ(ℂ): fixed points of X ↦ −I_{2p,2q} X̄ᵀ I_{2p,2q}.
pub fn sp_pq_basis(sym: &crate::algebra::SymplecticData) -> Vec<CMat> {
    let n = sym.dims.n;
    let n2 = 2 * n;
    let mats = crate::algebra::sp_basis(sym);
    let sign = |i: usize| sym.eta[i % n] as f64;
    let tau_star = |x: &CMat| -> CMat {
        let mut out = CMat::zeros(n2, n2);
        for i in 0..n2 {
            for j in 0..n2 {
                *out.at_mut(i, j) = -x.at(j, i).conj() * sign(i) * sign(j);
            }
        }
        out
    };
    let mut candidates = Vec::new();
    for m in &mats {
        let mut cm = CMat::zeros(n2, n2);
        for i in 0..n2 {
            for j in 0..n2 {
                *cm.at_mut(i, j) = Complex64::new(m[i][j] as f64, 0.0);
            }
        }
        let t = tau_star(&cm);
        let mut p = CMat::zeros(n2, n2);
        let mut q = CMat::zeros(n2, n2);
        for k in 0..n2 * n2 {
            p.data[k] = cm.data[k] + t.data[k];
            q.data[k] = Complex64::new(0.0, 1.0) * (cm.data[k] - t.data[k]);
        }
        candidates.push(p);
        candidates.push(q);
    }
    // Greedy real-linear independent subset of dimension N.
    let needed = sym.dims.sp_dim();
    let mut chosen: Vec<CMat> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for c in candidates {
        if chosen.len() == needed {
            break;
        }
        let col: Vec<f64> = c
            .data
            .iter()
            .flat_map(|v| [v.re, v.im])
            .collect();
        let mut trial = cols.clone();
        trial.push(col.clone());
        let mut m = CMat::zeros(trial[0].len(), trial.len());
        for (j, tc) in trial.iter().enumerate() {
            for (i, v) in tc.iter().enumerate() {
                *m.at_mut(i, j) = Complex64::new(*v, 0.0);
            }
        }
        if rank(&m, 1e-9) > cols.len() {
            cols = trial;
            chosen.push(c);
        }
    }
    assert_eq!(chosen.len(), needed, "sp_pq basis incomplete");
    chosen
}

/// Everything evaluated at one image point needed by both metric routes.
struct PointData {
    u: [[Complex64; 2]; 2],
    b_tilde: CMat,
    z_img: Vec<Complex64>,
    /// Image tangents (B-part, z-part) of the chart coordinate frame.
    tm_cols: Vec<Displacement>,
}

fn point_data<S: Scalar>(
    bridge: &Bridge<S>,
    chart: &ManifoldChart<S>,
    t: &[f64],
) -> Result<PointData, PipelineError> {
    let n2 = 2 * bridge.n;
    let n4 = 4 * bridge.n;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let u = [[one, zero], [zero, one]];
    let (z_src, tangent_cols) = chart.flow_to(t)?;

    let mut b_tilde = CMat::zeros(n2, n2);
    for i in 0..n2 {
        for j in 0..n2 {
            *b_tilde.at_mut(i, j) = bridge.phi_matrix.at(i, j).eval_unchecked(&u, &z_src);
        }
    }
    let map = super::frame_build::bridge_z_map(bridge);
    let z_img: Vec<Complex64> = map.iter().map(|c| c.eval_unchecked(&u, &z_src)).collect();
    // Jacobians at the source point.
    let mut jz = CMat::zeros(n4, n4);
    for (m, comp) in map.iter().enumerate() {
        for b in 0..n4 {
            *jz.at_mut(m, b) = comp.d_z(b < n2, b % n2).eval_unchecked(&u, &z_src);
        }
    }
    let mut jb: Vec<CMat> = Vec::with_capacity(n4); // per z-variable
    for b in 0..n4 {
        let mut m = CMat::zeros(n2, n2);
        for i in 0..n2 {
            for j in 0..n2 {
                *m.at_mut(i, j) = bridge
                    .phi_matrix
                    .at(i, j)
                    .d_z(b < n2, b % n2)
                    .eval_unchecked(&u, &z_src);
            }
        }
        jb.push(m);
    }

    let mut tm_cols = Vec::with_capacity(tangent_cols.len());
    for dz_src in &tangent_cols {
        let mut d = Displacement::zero(n2);
        d.dz = jz.apply(dz_src);
        let mut db = CMat::zeros(n2, n2);
        for (b, w) in dz_src.iter().enumerate() {
            for k in 0..n2 * n2 {
                db.data[k] += *w * jb[b].data[k];
            }
        }
        d.db = db;
        tm_cols.push(d);
    }
    Ok(PointData {
        u,
        b_tilde,
        z_img,
        tm_cols,
    })
}

/// Right-translate a displacement by B′ (acts on the B-block only).
fn translate(d: &Displacement, bp: &CMat) -> Displacement {
    Displacement {
        du: d.du,
        db: d.db.matmul(bp),
        dz: d.dz.clone(),
    }
}

fn real_columns(d: &Displacement) -> Vec<f64> {
    d.to_vec().iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Vielbein-route metric in the chart basis for a section offset B′.
fn vielbein_metric<S: Scalar>(
    frame: &HKFrame<S>,
    pd: &PointData,
    section: &CMat,
    cfg: &PipelineConfig,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let n2 = 2 * cfg.dims.n;
    let n4 = 4 * cfg.dims.n;
    let b_tot = pd.b_tilde.matmul(section);
    let basis = tau_basis_exact(&frame.sym, cfg.j_pairing);
    let verts = sp_pq_basis(&frame.sym);

    // Columns: TM (translated by the section) then the vertical directions.
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for d in &pd.tm_cols {
        cols.push(real_columns(&translate(d, section)));
    }
    for v in &verts {
        let mut d = Displacement::zero(n2);
        d.db = b_tot.matmul(v);
        cols.push(real_columns(&d));
    }
    let rows = cols[0].len();
    let mut a = CMat::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            *a.at_mut(i, j) = Complex64::new(*v, 0.0);
        }
    }

    // Vielbein vectors w_I = Σ cp·e₊a + cm·e₋a at the sectioned point.
    let mut vmat = vec![vec![0.0; n4]; n4];
    for (idx, (cp, cm)) in basis.iter().enumerate() {
        let mut w = Displacement::zero(n2);
        for aidx in 0..n2 {
            let wp = Complex64::new(cp[aidx].0 as f64, cp[aidx].1 as f64);
            if wp.norm() > 0.0 {
                let d = family_displacement(&frame.e_plus, aidx, &pd.u, &pd.z_img, &b_tot);
                let mut scaled = Displacement::zero(n2);
                for k in 0..4 {
                    scaled.du[k] = wp * d.du[k];
                }
                for k in 0..n2 * n2 {
                    scaled.db.data[k] = wp * d.db.data[k];
                }
                for k in 0..2 * n2 {
                    scaled.dz[k] = wp * d.dz[k];
                }
                for k in 0..4 {
                    w.du[k] += scaled.du[k];
                }
                for k in 0..n2 * n2 {
                    w.db.data[k] += scaled.db.data[k];
                }
                for k in 0..2 * n2 {
                    w.dz[k] += scaled.dz[k];
                }
            }
            let wm = Complex64::new(cm[aidx].0 as f64, cm[aidx].1 as f64);
            if wm.norm() > 0.0 {
                let d = family_displacement(&frame.e_minus, aidx, &pd.u, &pd.z_img, &b_tot);
                for k in 0..4 {
                    w.du[k] += wm * d.du[k];
                }
                for k in 0..n2 * n2 {
                    w.db.data[k] += wm * d.db.data[k];
                }
                for k in 0..2 * n2 {
                    w.dz[k] += wm * d.dz[k];
                }
            }
        }
        let b = real_columns(&w);
        let bc: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let (sol, resid) = lstsq(&a, &bc);
        let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if resid > 1e-6 * scale {
            if std::env::var("HK_DEBUG_RESID").is_ok() {
                eprintln!("vielbein resid {resid:.3e} scale {scale:.3e} I={idx}");
            }
            return Err(PipelineError::SingularFrame);
        }
        for mu in 0..n4 {
            vmat[idx][mu] = sol[mu].re;
        }
    }

    // g = V⁻¹ (I₄⊗η) V⁻ᵀ where the rows of V are the vielbeins in the chart
    // basis: from η_IJ = V g Vᵀ.
    let mut v = CMat::zeros(n4, n4);
    for i in 0..n4 {
        for j in 0..n4 {
            *v.at_mut(i, j) = Complex64::new(vmat[i][j], 0.0);
        }
    }
    let vinv = crate::numeric::invert(&v).ok_or(PipelineError::SingularFrame)?;
    let eta = frame.sym.dims.eta();
    let eta_full: Vec<f64> = (0..n4)
        .map(|i| eta[(i % n2) % cfg.dims.n] as f64)
        .collect();
    let mut g = vec![vec![0.0; n4]; n4];
    for mu in 0..n4 {
        for nu in 0..n4 {
            let mut acc = 0.0;
            for i in 0..n4 {
                acc += (vinv.at(mu, i) * vinv.at(nu, i)).re * eta_full[i];
            }
            g[mu][nu] = acc;
        }
    }
    Ok(g)
}

/// Coframe-route metric: pair chart tangents with the dual coframe.
fn coframe_metric<S: Scalar>(
    frame: &HKFrame<S>,
    pd: &PointData,
    cfg: &PipelineConfig,
) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>), PipelineError> {
    let n = cfg.dims.n;
    let n2 = 2 * n;
    let n4 = 4 * n;
    let nfields = 3 + cfg.dims.sp_dim() + n4;
    let b_tot = &pd.b_tilde;

    // Frame matrix over the complex ambient coordinates.
    let mut disps: Vec<Displacement> = Vec::with_capacity(nfields);
    for f in [&frame.h0, &frame.hpp, &frame.hmm] {
        let raw = raw_eval(f, &pd.u, &pd.z_img);
        disps.push(displacement_from_raw(&raw, &pd.u, b_tot));
    }
    let e_mats = crate::algebra::sp_basis(&frame.sym);
    for m in &e_mats {
        let mut d = Displacement::zero(n2);
        let mut cm = CMat::zeros(n2, n2);
        for i in 0..n2 {
            for j in 0..n2 {
                *cm.at_mut(i, j) = Complex64::new(m[i][j] as f64, 0.0);
            }
        }
        d.db = b_tot.matmul(&cm);
        disps.push(d);
    }
    for a in 0..n2 {
        disps.push(family_displacement(
            &frame.e_plus,
            a,
            &pd.u,
            &pd.z_img,
            b_tot,
        ));
    }
    for a in 0..n2 {
        disps.push(family_displacement(
            &frame.e_minus,
            a,
            &pd.u,
            &pd.z_img,
            b_tot,
        ));
    }
    let rows = 4 + n2 * n2 + 2 * n2;
    let mut f = CMat::zeros(rows, nfields);
    for (j, d) in disps.iter().enumerate() {
        for (i, v) in d.to_vec().iter().enumerate() {
            *f.at_mut(i, j) = *v;
        }
    }

    // Pair each chart tangent with the coframe.
    let mut coefs: Vec<Vec<Complex64>> = Vec::with_capacity(n4);
    for d in &pd.tm_cols {
        let target = d.to_vec();
        let (sol, resid) = lstsq(&f, &target);
        let scale = target.iter().map(|c| c.norm()).fold(1.0, f64::max);
        if resid > 1e-6 * scale {
            return Err(PipelineError::SingularFrame);
        }
        coefs.push(sol);
    }
    // g_{μν} = −½ ω_ab (c_μ^{+a} c_ν^{−b} + c_ν^{+a} c_μ^{−b}).
    let e_off = 3 + cfg.dims.sp_dim();
    let mut g = vec![vec![Complex64::new(0.0, 0.0); n4]; n4];
    for mu in 0..n4 {
        for nu in 0..n4 {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..n2 {
                for b in 0..n2 {
                    let w = frame.sym.omega_lower[a][b];
                    if w == 0 {
                        continue;
                    }
                    let cma = coefs[mu][e_off + a];
                    let cnb = coefs[nu][e_off + n2 + b];
                    let cna = coefs[nu][e_off + a];
                    let cmb = coefs[mu][e_off + n2 + b];
                    acc += Complex64::new(w as f64, 0.0) * (cma * cnb + cna * cmb);
                }
            }
            g[mu][nu] = -0.5 * acc;
        }
    }
    Ok((g, coefs))
}

/// Metric at a chart point by both routes, with section-independence
/// available through `section` (defaults to the identity).
pub fn metric_at<S: Scalar>(
    frame: &HKFrame<S>,
    bridge: &Bridge<S>,
    chart: &ManifoldChart<S>,
    t: &[f64],
    section: Option<&CMat>,
    cfg: &PipelineConfig,
) -> Result<MetricSample, PipelineError> {
    let n4 = 4 * cfg.dims.n;
    let tnorm: f64 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tnorm > cfg.chart_radius * (1.0 + 1e-9) {
        return Err(PipelineError::OutOfChart(cfg.chart_radius));
    }
    let pd = point_data(bridge, chart, t)?;
    let n2 = 2 * cfg.dims.n;
    let identity = CMat::identity(n2);
    let section = section.unwrap_or(&identity);

    let gv = vielbein_metric(frame, &pd, section, cfg)?;
    let (gc, coefs) = coframe_metric(frame, &pd, cfg)?;

    let mut reality: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    for mu in 0..n4 {
        for nu in 0..n4 {
            reality = reality.max(gc[mu][nu].im.abs());
            mismatch = mismatch.max((gc[mu][nu].re - gv[mu][nu]).abs());
        }
    }
    if mismatch > cfg.route_tol {
        return Err(PipelineError::RouteMismatch(mismatch));
    }

    // Symmetrize the vielbein-route metric (exact up to rounding).
    let mut g = vec![vec![0.0; n4]; n4];
    for mu in 0..n4 {
        for nu in 0..n4 {
            g[mu][nu] = 0.5 * (gv[mu][nu] + gv[nu][mu]);
        }
    }
    let eigs = symmetric_eigenvalues(&g);
    let pos = eigs.iter().filter(|&&e| e > 0.0).count();
    let neg = eigs.iter().filter(|&&e| e < 0.0).count();

    Ok(MetricSample {
        point: t.to_vec(),
        g,
        coframe: coefs,
        signature: (pos, neg),
        reality_max_imag: reality,
        route_mismatch: mismatch,
    })
}

/// Reality diagnostics at sampled chart points.
#[derive(Clone, Debug)]
pub struct RealityReport {
    pub transversal: bool,
    pub max_imag: f64,
    pub signature_ok: bool,
    pub samples: usize,
}

/// Verify at sampled points: TM meets the 𝔰𝔭_{p,q} vertical span trivially,
/// metric entries are real to tolerance, and the signature is (4p, 4q).
pub fn reality_report<S: Scalar>(
    frame: &HKFrame<S>,
    bridge: &Bridge<S>,
    chart: &ManifoldChart<S>,
    samples: &[Vec<f64>],
    cfg: &PipelineConfig,
) -> Result<RealityReport, PipelineError> {
    let n4 = 4 * cfg.dims.n;
    let mut transversal = true;
    let mut max_imag: f64 = 0.0;
    let mut signature_ok = true;
    for t in samples {
        let pd = point_data(bridge, chart, t)?;
        // Transversality: rank of [TM | vert] must be 4n + N.
        let verts = sp_pq_basis(&frame.sym);
        let mut cols: Vec<Vec<f64>> = pd.tm_cols.iter().map(real_columns).collect();
        for v in &verts {
            let mut d = Displacement::zero(2 * cfg.dims.n);
            d.db = pd.b_tilde.matmul(v);
            cols.push(real_columns(&d));
        }
        let mut m = CMat::zeros(cols[0].len(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                *m.at_mut(i, j) = Complex64::new(*v, 0.0);
            }
        }
        if rank(&m, cfg.rank_tol) < n4 + cfg.dims.sp_dim() {
            transversal = false;
        }
        let sample = metric_at(frame, bridge, chart, t, None, cfg)?;
        max_imag = max_imag.max(sample.reality_max_imag);
        if sample.signature != (4 * cfg.dims.p, 4 * cfg.dims.q) {
            signature_ok = false;
        }
    }
    Ok(RealityReport {
        transversal,
        max_imag: max_imag.max(0.0),
        signature_ok,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Dimensions;
    use crate::jets::ChargedSeries;
    use crate::pipeline::bridge::{build_hpp, solve_bridge};
    use crate::pipeline::chart::{hat_frame, integrate_manifold};
    use crate::pipeline::frame_build::build_frame;
    use crate::pipeline::prepot::{quartic_benchmark, validate_prepotential};
    use crate::scalar::Exact;

    fn full_flat(order: u32) -> (PipelineConfig, crate::frames::HKFrame<Exact>, super::Bridge<Exact>, ManifoldChart<Exact>) {
        let cfg = PipelineConfig::new(Dimensions::new(1, 1, 0).unwrap(), order);
        let p =
            validate_prepotential(&ChargedSeries::<Exact>::zero(1, order, 4), cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let frame = build_frame(&hpp, &bridge, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        let chart = integrate_manifold(&hat, &cfg).unwrap();
        (cfg, frame, bridge, chart)
    }

    #[test]
    fn flat_metric_is_identity_eta() {
        let (cfg, frame, bridge, chart) = full_flat(4);
        for t in chart.sample_points.iter().take(5) {
            let s = metric_at(&frame, &bridge, &chart, t, None, &cfg).unwrap();
            for mu in 0..4 {
                for nu in 0..4 {
                    let want = if mu == nu { 1.0 } else { 0.0 };
                    assert!(
                        (s.g[mu][nu] - want).abs() < 1e-10,
                        "entry ({mu},{nu}) = {}",
                        s.g[mu][nu]
                    );
                }
            }
            assert_eq!(s.signature, (4, 0));
            assert!(s.route_mismatch < 1e-10);
        }
    }

    #[test]
    fn quartic_metric_is_symmetric_real_positive() {
        let cfg = PipelineConfig::new(Dimensions::new(1, 1, 0).unwrap(), 5);
        let l = quartic_benchmark::<Exact>(5, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let frame = build_frame(&hpp, &bridge, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        let chart = integrate_manifold(&hat, &cfg).unwrap();
        let t = chart.sample_points[0].clone();
        let s = metric_at(&frame, &bridge, &chart, &t, None, &cfg).unwrap();
        assert_eq!(s.signature, (4, 0));
        assert!(s.reality_max_imag < cfg.reality_tol, "{}", s.reality_max_imag);
        assert!(s.route_mismatch < cfg.route_tol);
        // Section independence.
        let verts = sp_pq_basis(&frame.sym);
        let mut section = CMat::identity(2);
        // exp(0.3 ξ₀) by scaling-and-squaring on the tiny matrix.
        let xi = &verts[0];
        let mut term = CMat::identity(2);
        for k in 1..8 {
            term = term.matmul(xi);
            let c = (0.3f64).powi(k) / (1..=k).product::<i32>() as f64;
            for idx in 0..4 {
                section.data[idx] += term.data[idx] * c;
            }
        }
        let s2 = metric_at(&frame, &bridge, &chart, &t, Some(&section), &cfg).unwrap();
        for mu in 0..4 {
            for nu in 0..4 {
                assert!(
                    (s.g[mu][nu] - s2.g[mu][nu]).abs() < 1e-8,
                    "section dependence at ({mu},{nu})"
                );
            }
        }
    }

    #[test]
    fn out_of_chart_is_rejected() {
        let (cfg, frame, bridge, chart) = full_flat(4);
        let t = vec![10.0 * cfg.chart_radius, 0.0, 0.0, 0.0];
        assert!(matches!(
            metric_at(&frame, &bridge, &chart, &t, None, &cfg),
            Err(PipelineError::OutOfChart(_))
        ));
    }

    #[test]
    fn reality_report_flat() {
        let (cfg, frame, bridge, chart) = full_flat(4);
        let samples: Vec<Vec<f64>> = chart.sample_points.iter().take(4).cloned().collect();
        let r = reality_report(&frame, &bridge, &chart, &samples, &cfg).unwrap();
        assert!(r.transversal);
        assert!(r.max_imag < cfg.reality_tol);
        assert!(r.signature_ok);
    }
}

#[cfg(test)]
mod debug_tests {
    use super::*;
    use crate::algebra::Dimensions;
    use crate::pipeline::bridge::{build_hpp, solve_bridge};
    use crate::pipeline::chart::{hat_frame, integrate_manifold};
    use crate::pipeline::frame_build::build_frame;
    use crate::pipeline::prepot::{quartic_benchmark, validate_prepotential};
    use crate::scalar::Exact;

    #[test]
    fn debug_vielbein_residual_scaling() {
        let cfg = PipelineConfig::new(Dimensions::new(1, 1, 0).unwrap(), 5);
        let l = quartic_benchmark::<Exact>(5, 1, 10);
        let p = validate_prepotential(&l, cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let frame = build_frame(&hpp, &bridge, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        let chart = integrate_manifold(&hat, &cfg).unwrap();
        for scale in [0.0, 0.01, 0.02, 0.04, 0.08] {
            let t = vec![scale, scale * 0.5, -scale * 0.3, scale * 0.7];
            let pd = point_data(&bridge, &chart, &t).unwrap();
            let n2 = 2;
            let b_tot = pd.b_tilde.clone();
            let basis = tau_basis_exact(&frame.sym, cfg.j_pairing);
            let verts = sp_pq_basis(&frame.sym);
            let mut cols: Vec<Vec<f64>> = Vec::new();
            for d in &pd.tm_cols {
                cols.push(real_columns(d));
            }
            for v in &verts {
                let mut d = Displacement::zero(n2);
                d.db = b_tot.matmul(v);
                cols.push(real_columns(&d));
            }
            let rows = cols[0].len();
            let mut a = CMat::zeros(rows, cols.len());
            for (j, c) in cols.iter().enumerate() {
                for (i, v) in c.iter().enumerate() {
                    *a.at_mut(i, j) = Complex64::new(*v, 0.0);
                }
            }
            let (cp, cm) = &basis[0];
            let mut w = Displacement::zero(n2);
            for aidx in 0..n2 {
                let wp = Complex64::new(cp[aidx].0 as f64, cp[aidx].1 as f64);
                let wm = Complex64::new(cm[aidx].0 as f64, cm[aidx].1 as f64);
                if wp.norm() > 0.0 {
                    let d = family_displacement(&frame.e_plus, aidx, &pd.u, &pd.z_img, &b_tot);
                    for k in 0..4 { w.du[k] += wp * d.du[k]; }
                    for k in 0..4 { w.db.data[k] += wp * d.db.data[k]; }
                    for k in 0..4 { w.dz[k] += wp * d.dz[k]; }
                }
                if wm.norm() > 0.0 {
                    let d = family_displacement(&frame.e_minus, aidx, &pd.u, &pd.z_img, &b_tot);
                    for k in 0..4 { w.du[k] += wm * d.du[k]; }
                    for k in 0..4 { w.db.data[k] += wm * d.db.data[k]; }
                    for k in 0..4 { w.dz[k] += wm * d.dz[k]; }
                }
            }
            let b: Vec<Complex64> = real_columns(&w).iter().map(|v| Complex64::new(*v, 0.0)).collect();
            let (_, resid) = lstsq(&a, &b);
            // Deviations from the flat picture.
            let mut db_dev: f64 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    db_dev = db_dev.max((pd.b_tilde.at(i, j) - Complex64::new(want, 0.0)).norm());
                }
            }
            let wdu: f64 = w.du.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let wdb: f64 = w.db.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let tm_db: f64 = pd.tm_cols.iter().flat_map(|d| d.db.data.iter().map(|c| c.norm())).fold(0.0, f64::max);
            eprintln!("scale {scale:>5}: resid {resid:.3e} |B~-I| {db_dev:.2e} w.du {wdu:.2e} w.db {wdb:.2e} tm.db {tm_db:.2e}");
        }
    }
}

//! Finite-difference Ricci tensor over the chart coordinates.
//!
//! Ricci flatness is implied by the pseudo-hyperkähler property; the check
//! here is numeric and truncation-dominated: central differences of the
//! chart-basis metric at a configurable step.

use super::bridge::Bridge;
use super::chart::ManifoldChart;
use super::metric::metric_at;
use super::{PipelineConfig, PipelineError};
use crate::frames::HKFrame;
use crate::scalar::Scalar;

/// Finite-difference Ricci tensor at a chart point with step h.
pub fn ricci_at<S: Scalar>(
    frame: &HKFrame<S>,
    bridge: &Bridge<S>,
    chart: &ManifoldChart<S>,
    t: &[f64],
    h: f64,
    cfg: &PipelineConfig,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let d = t.len();
    let g_at = |tt: &[f64]| -> Result<Vec<Vec<f64>>, PipelineError> {
        Ok(metric_at(frame, bridge, chart, tt, None, cfg)?.g)
    };
    let shift = |mu: usize, smu: f64, nu: usize, snu: f64| -> Vec<f64> {
        let mut tt = t.to_vec();
        tt[mu] += smu * h;
        tt[nu] += snu * h;
        tt
    };

    let g0 = g_at(t)?;
    let mut gp = Vec::with_capacity(d);
    let mut gm = Vec::with_capacity(d);
    for mu in 0..d {
        gp.push(g_at(&shift(mu, 1.0, mu, 0.0))?);
        gm.push(g_at(&shift(mu, -1.0, mu, 0.0))?);
    }
    // First derivatives ∂_μ g.
    let d1: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|mu| {
            (0..d)
                .map(|r| {
                    (0..d)
                        .map(|s| (gp[mu][r][s] - gm[mu][r][s]) / (2.0 * h))
                        .collect()
                })
                .collect()
        })
        .collect();
    // Second derivatives ∂_μ∂_ν g.
    let mut d2 = vec![vec![vec![vec![0.0; d]; d]; d]; d];
    for mu in 0..d {
        for nu in 0..d {
            if mu == nu {
                for r in 0..d {
                    for s in 0..d {
                        d2[mu][mu][r][s] =
                            (gp[mu][r][s] - 2.0 * g0[r][s] + gm[mu][r][s]) / (h * h);
                    }
                }
            } else if mu < nu {
                let gpp = g_at(&shift(mu, 1.0, nu, 1.0))?;
                let gpm = g_at(&shift(mu, 1.0, nu, -1.0))?;
                let gmp = g_at(&shift(mu, -1.0, nu, 1.0))?;
                let gmm = g_at(&shift(mu, -1.0, nu, -1.0))?;
                for r in 0..d {
                    for s in 0..d {
                        let v = (gpp[r][s] - gpm[r][s] - gmp[r][s] + gmm[r][s]) / (4.0 * h * h);
                        d2[mu][nu][r][s] = v;
                        d2[nu][mu][r][s] = v;
                    }
                }
            }
        }
    }

    // Inverse metric and its first derivatives.
    let mut gc = crate::numeric::CMat::zeros(d, d);
    for r in 0..d {
        for s in 0..d {
            *gc.at_mut(r, s) = num::complex::Complex64::new(g0[r][s], 0.0);
        }
    }
    let ginv_c = crate::numeric::invert(&gc).ok_or(PipelineError::SingularFrame)?;
    let ginv = |r: usize, s: usize| ginv_c.at(r, s).re;
    // ∂g⁻¹ = −g⁻¹ (∂g) g⁻¹.
    let dginv: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|mu| {
            (0..d)
                .map(|r| {
                    (0..d)
                        .map(|s| {
                            let mut acc = 0.0;
                            for x in 0..d {
                                for y in 0..d {
                                    acc -= ginv(r, x) * d1[mu][x][y] * ginv(y, s);
                                }
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let gamma = |l: usize, mu: usize, nu: usize| -> f64 {
        let mut acc = 0.0;
        for r in 0..d {
            acc += 0.5 * ginv(l, r) * (d1[mu][r][nu] + d1[nu][r][mu] - d1[r][mu][nu]);
        }
        acc
    };
    let dgamma = |k: usize, l: usize, mu: usize, nu: usize| -> f64 {
        let mut acc = 0.0;
        for r in 0..d {
            acc += 0.5 * dginv[k][l][r] * (d1[mu][r][nu] + d1[nu][r][mu] - d1[r][mu][nu]);
            acc += 0.5 * ginv(l, r) * (d2[k][mu][r][nu] + d2[k][nu][r][mu] - d2[k][r][mu][nu]);
        }
        acc
    };

    let mut ric = vec![vec![0.0; d]; d];
    for mu in 0..d {
        for nu in 0..d {
            let mut acc = 0.0;
            for l in 0..d {
                acc += dgamma(l, l, mu, nu) - dgamma(nu, l, mu, l);
                for r in 0..d {
                    acc += gamma(l, l, r) * gamma(r, mu, nu) - gamma(l, nu, r) * gamma(r, mu, l);
                }
            }
            ric[mu][nu] = acc;
        }
    }
    Ok(ric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Dimensions;
    use crate::jets::ChargedSeries;
    use crate::pipeline::bridge::{build_hpp, solve_bridge};
    use crate::pipeline::chart::{hat_frame, integrate_manifold};
    use crate::pipeline::frame_build::build_frame;
    use crate::pipeline::prepot::validate_prepotential;
    use crate::scalar::Exact;

    #[test]
    fn flat_ricci_vanishes() {
        let cfg = PipelineConfig::new(Dimensions::new(1, 1, 0).unwrap(), 4);
        let p = validate_prepotential(&ChargedSeries::<Exact>::zero(1, 4, 4), cfg.dims).unwrap();
        let hpp = build_hpp(&p, &cfg);
        let bridge = solve_bridge(&p, &hpp, &cfg).unwrap();
        let frame = build_frame(&hpp, &bridge, &cfg).unwrap();
        let hat = hat_frame(&bridge, &cfg).unwrap();
        let chart = integrate_manifold(&hat, &cfg).unwrap();
        let t = vec![0.01, -0.02, 0.015, 0.0];
        let ric = ricci_at(&frame, &bridge, &chart, &t, 1e-3, &cfg).unwrap();
        for row in &ric {
            for v in row {
                assert!(v.abs() < 1e-8, "flat Ricci entry {v}");
            }
        }
    }
}

//! The Lie algebra 𝔭 = (𝔰𝔭₁(ℂ) + 𝔰𝔭ₙ(ℂ)) + ℂ⁴ⁿ, its graded basis and
//! structure constants, the symplectic data, and the real structure τ of
//! signature (4p,4q).

use crate::numeric::{invert, CMat};
use crate::scalar::Scalar;
use num::complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlgebraError {
    #[error("basis index out of range: {0}")]
    IndexOutOfRange(usize),
    #[error("dimensions must satisfy p + q = n (got n={n}, p={p}, q={q})")]
    BadSignature { n: usize, p: usize, q: usize },
    #[error("singular matrix in real-structure map")]
    Singular,
}

/// Quaternionic dimension n with signature split p + q = n.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dimensions {
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

impl Dimensions {
    pub fn new(n: usize, p: usize, q: usize) -> Result<Self, AlgebraError> {
        if n == 0 || p + q != n {
            return Err(AlgebraError::BadSignature { n, p, q });
        }
        Ok(Dimensions { n, p, q })
    }

    /// Dimension of 𝔰𝔭ₙ(ℂ): N = (2n+1)n.
    pub fn sp_dim(&self) -> usize {
        (2 * self.n + 1) * self.n
    }

    /// Real dimension of the manifold: 4n.
    pub fn manifold_dim(&self) -> usize {
        4 * self.n
    }

    /// η = diag(+1 ×p, −1 ×q).
    pub fn eta(&self) -> Vec<i64> {
        let mut v = vec![1i64; self.p];
        v.extend(vec![-1i64; self.q]);
        v
    }
}

/// Labels of the standard basis of 𝔭 in the five-fold gradation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasisIndex {
    H0,
    Hpp,
    Hmm,
    /// 𝔰𝔭ₙ(ℂ) basis element, 0-based, lexicographic over e_a ∨ e_b with a ≤ b.
    E(usize),
    /// e₊a, 0-based a.
    EPlus(usize),
    /// e₋a, 0-based a.
    EMinus(usize),
}

impl BasisIndex {
    /// Charge (H₀-eigenvalue) of the basis element.
    pub fn charge(&self) -> i64 {
        match self {
            BasisIndex::H0 | BasisIndex::E(_) => 0,
            BasisIndex::Hpp => 2,
            BasisIndex::Hmm => -2,
            BasisIndex::EPlus(_) => 1,
            BasisIndex::EMinus(_) => -1,
        }
    }
}

/// Enumerate the full basis of 𝔭 for dimension n.
pub fn basis(dims: &Dimensions) -> Vec<BasisIndex> {
    let mut out = vec![BasisIndex::H0, BasisIndex::Hpp, BasisIndex::Hmm];
    for a in 0..dims.sp_dim() {
        out.push(BasisIndex::E(a));
    }
    for a in 0..2 * dims.n {
        out.push(BasisIndex::EPlus(a));
    }
    for a in 0..2 * dims.n {
        out.push(BasisIndex::EMinus(a));
    }
    out
}

/// ε-matrices for raising and lowering Sp₁(ℂ) indices: ε₁₂ = 1 = −ε¹².
#[derive(Clone, Debug)]
pub struct EpsilonData {
    pub eps_lower_ij: [[i64; 2]; 2],
    pub eps_upper_ij: [[i64; 2]; 2],
    pub eps_lower_ab: [[i64; 2]; 2],
    pub eps_upper_ab: [[i64; 2]; 2],
}

impl Default for EpsilonData {
    fn default() -> Self {
        let lower = [[0, 1], [-1, 0]];
        let upper = [[0, -1], [1, 0]];
        EpsilonData {
            eps_lower_ij: lower,
            eps_upper_ij: upper,
            eps_lower_ab: lower,
            eps_upper_ab: upper,
        }
    }
}

/// Symplectic form, signature matrix and the base-point value of Ĵ.
///
/// The symplectic form is fixed as ω = \[\[0, Iₙ\], \[−Iₙ, 0\]\] in 2n-block
/// form; every derived value depends on this choice.
#[derive(Clone, Debug)]
pub struct SymplecticData {
    pub dims: Dimensions,
    /// ω_ab (2n × 2n integer entries).
    pub omega_lower: Vec<Vec<i64>>,
    /// ωᵃᵇ, the inverse of ω_ab.
    pub omega_upper: Vec<Vec<i64>>,
    /// η = diag(+1 ×p, −1 ×q).
    pub eta: Vec<i64>,
    /// Ĵ at B = I: the matrix 𝕁 = [[0, −η], [η, 0]].
    pub jhat0: Vec<Vec<i64>>,
}

impl SymplecticData {
    pub fn new(dims: Dimensions) -> Self {
        let n = dims.n;
        let m = 2 * n;
        let mut omega_lower = vec![vec![0i64; m]; m];
        let mut omega_upper = vec![vec![0i64; m]; m];
        for i in 0..n {
            omega_lower[i][n + i] = 1;
            omega_lower[n + i][i] = -1;
            omega_upper[i][n + i] = -1;
            omega_upper[n + i][i] = 1;
        }
        let eta = dims.eta();
        let mut jhat0 = vec![vec![0i64; m]; m];
        for i in 0..n {
            jhat0[i][n + i] = -eta[i];
            jhat0[n + i][i] = eta[i];
        }
        SymplecticData {
            dims,
            omega_lower,
            omega_upper,
            eta,
            jhat0,
        }
    }

    pub fn omega_lower_s<S: Scalar>(&self, a: usize, b: usize) -> S {
        S::from_i64(self.omega_lower[a][b])
    }

    pub fn omega_upper_s<S: Scalar>(&self, a: usize, b: usize) -> S {
        S::from_i64(self.omega_upper[a][b])
    }

    /// Ĵ at a general point: −I_{2p,2q}·(B·K·Bᵀ)⁻¹ with K = [[0,−Iₙ],[Iₙ,0]].
    pub fn jhat_at(&self, b: &CMat) -> Result<CMat, AlgebraError> {
        let n = self.dims.n;
        let m = 2 * n;
        let mut k = CMat::zeros(m, m);
        for i in 0..n {
            *k.at_mut(i, n + i) = Complex64::new(-1.0, 0.0);
            *k.at_mut(n + i, i) = Complex64::new(1.0, 0.0);
        }
        let bkbt = b.matmul(&k).matmul(&b.transpose());
        let inv = invert(&bkbt).ok_or(AlgebraError::Singular)?;
        let mut out = CMat::zeros(m, m);
        for i in 0..m {
            let sign = self.eta[i % n];
            for j in 0..m {
                *out.at_mut(i, j) = -Complex64::new(sign as f64, 0.0) * inv.at(i, j);
            }
        }
        Ok(out)
    }
}

/// Matrix representative of e_a ∨ e_b in 𝔰𝔭ₙ(ℂ) ⊂ 𝔤𝔩(ℂ²ⁿ).
///
/// Under 𝔰𝔭ₙ(ℂ) ≅ ∨²ℂ²ⁿ the symmetric tensor e_a ∨ e_b maps to the matrix
/// ω⁻¹(e_a e_bᵀ + e_b e_aᵀ).
pub fn sp_basis_matrix(
    sym: &SymplecticData,
    a: usize,
    b: usize,
) -> Result<Vec<Vec<i64>>, AlgebraError> {
    let m = 2 * sym.dims.n;
    if a >= m || b >= m {
        return Err(AlgebraError::IndexOutOfRange(a.max(b)));
    }
    let mut s = vec![vec![0i64; m]; m];
    s[a][b] += 1;
    s[b][a] += 1;
    let mut out = vec![vec![0i64; m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0;
            for k in 0..m {
                acc += sym.omega_upper[i][k] * s[k][j];
            }
            out[i][j] = acc;
        }
    }
    Ok(out)
}

/// All 𝔰𝔭ₙ(ℂ) basis matrices in lexicographic (a ≤ b) order.
pub fn sp_basis(sym: &SymplecticData) -> Vec<Vec<Vec<i64>>> {
    let m = 2 * sym.dims.n;
    let mut out = Vec::new();
    for a in 0..m {
        for b in a..m {
            out.push(sp_basis_matrix(sym, a, b).expect("in range"));
        }
    }
    out
}

/// Exact vector in 𝔭 expressed over [`basis`].
pub type PVector<S> = BTreeMap<BasisIndex, S>;

/// Structure constants of 𝔭: bracket of any two basis elements as an exact
/// combination of basis elements.
pub struct StructureConstants<S: Scalar> {
    pub dims: Dimensions,
    pub sym: SymplecticData,
    /// Basis matrices of 𝔰𝔭ₙ(ℂ).
    pub e_matrices: Vec<Vec<Vec<i64>>>,
    table: BTreeMap<(BasisIndex, BasisIndex), PVector<S>>,
}

fn commutator(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let m = a.len();
    let mut out = vec![vec![0i64; m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0;
            for k in 0..m {
                acc += a[i][k] * b[k][j] - b[i][k] * a[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Express an 𝔰𝔭ₙ matrix over the basis matrices (exact linear solve).
pub fn expand_in_sp_basis<S: Scalar>(e_matrices: &[Vec<Vec<i64>>], x: &[Vec<i64>]) -> Vec<S> {
    let m = x.len();
    let rows = m * m;
    let cols: Vec<Vec<(usize, S)>> = e_matrices
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
            rhs[i * m + j] = S::from_i64(x[i][j]);
        }
    }
    let sol = crate::numeric::exact_solve_with_kernel(rows, &cols, &rhs)
        .expect("sp_n basis spans its own commutators");
    assert!(sol.kernel.is_empty(), "sp_n basis must be independent");
    sol.particular
}

impl<S: Scalar> StructureConstants<S> {
    pub fn new(dims: Dimensions) -> Self {
        let sym = SymplecticData::new(dims);
        let e_matrices = sp_basis(&sym);
        let mut table = BTreeMap::new();
        let n2 = 2 * dims.n;

        let one = S::one;
        let put = |table: &mut BTreeMap<_, PVector<S>>, a, b, vec: Vec<(BasisIndex, S)>| {
            let v: PVector<S> = vec.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            if !v.is_empty() {
                table.insert((a, b), v);
            }
        };

        put(
            &mut table,
            BasisIndex::Hpp,
            BasisIndex::Hmm,
            vec![(BasisIndex::H0, one())],
        );
        put(
            &mut table,
            BasisIndex::H0,
            BasisIndex::Hpp,
            vec![(BasisIndex::Hpp, S::from_i64(2))],
        );
        put(
            &mut table,
            BasisIndex::H0,
            BasisIndex::Hmm,
            vec![(BasisIndex::Hmm, S::from_i64(-2))],
        );
        for a in 0..n2 {
            put(
                &mut table,
                BasisIndex::H0,
                BasisIndex::EPlus(a),
                vec![(BasisIndex::EPlus(a), one())],
            );
            put(
                &mut table,
                BasisIndex::H0,
                BasisIndex::EMinus(a),
                vec![(BasisIndex::EMinus(a), S::from_i64(-1))],
            );
            put(
                &mut table,
                BasisIndex::Hpp,
                BasisIndex::EMinus(a),
                vec![(BasisIndex::EPlus(a), one())],
            );
            put(
                &mut table,
                BasisIndex::Hmm,
                BasisIndex::EPlus(a),
                vec![(BasisIndex::EMinus(a), one())],
            );
        }
        // sp_n structure constants via exact linear solve over the basis.
        for (ai, ea) in e_matrices.iter().enumerate() {
            for (bi, eb) in e_matrices.iter().enumerate().skip(ai + 1) {
                let c = commutator(ea, eb);
                if c.iter().all(|row| row.iter().all(|&v| v == 0)) {
                    continue;
                }
                let coeffs = expand_in_sp_basis::<S>(&e_matrices, &c);
                let vec: Vec<(BasisIndex, S)> = coeffs
                    .into_iter()
                    .enumerate()
                    .map(|(k, c)| (BasisIndex::E(k), c))
                    .collect();
                put(&mut table, BasisIndex::E(ai), BasisIndex::E(bi), vec);
            }
        }
        // [E_A, e_{±a}] = (E_A)ᵇ_a e_{±b}.
        for (ai, ea) in e_matrices.iter().enumerate() {
            for a in 0..n2 {
                let plus: Vec<(BasisIndex, S)> = (0..n2)
                    .map(|b| (BasisIndex::EPlus(b), S::from_i64(ea[b][a])))
                    .collect();
                put(&mut table, BasisIndex::E(ai), BasisIndex::EPlus(a), plus);
                let minus: Vec<(BasisIndex, S)> = (0..n2)
                    .map(|b| (BasisIndex::EMinus(b), S::from_i64(ea[b][a])))
                    .collect();
                put(&mut table, BasisIndex::E(ai), BasisIndex::EMinus(a), minus);
            }
        }
        StructureConstants {
            dims,
            sym,
            e_matrices,
            table,
        }
    }

    /// Bracket of two basis elements as an exact 𝔭-vector.
    pub fn bracket_basis(&self, a: BasisIndex, b: BasisIndex) -> PVector<S> {
        if a == b {
            return PVector::new();
        }
        if let Some(v) = self.table.get(&(a, b)) {
            return v.clone();
        }
        if let Some(v) = self.table.get(&(b, a)) {
            return v.iter().map(|(k, c)| (*k, c.neg())).collect();
        }
        PVector::new()
    }

    /// Bilinear bracket of exact 𝔭-vectors.
    pub fn bracket_p(&self, x: &PVector<S>, y: &PVector<S>) -> PVector<S> {
        let mut out: PVector<S> = PVector::new();
        for (la, ca) in x {
            for (lb, cb) in y {
                let prod = ca.mul(cb);
                if prod.is_zero() {
                    continue;
                }
                for (lc, cc) in self.bracket_basis(*la, *lb) {
                    let entry = out.entry(lc).or_insert_with(S::zero);
                    *entry = entry.add(&cc.mul(&prod));
                }
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }
}

// ---------------------------------------------------------------------------
// Real structure τ on numeric points.
// ---------------------------------------------------------------------------

/// Numeric point of 𝒫 = (Sp₁(ℂ) × Spₙ(ℂ)) ⋉ ℂ⁴ⁿ in central coordinates.
#[derive(Clone, Debug)]
pub struct PPoint {
    /// U = [[u¹₊, u¹₋], [u²₊, u²₋]].
    pub u: [[Complex64; 2]; 2],
    /// B ∈ Spₙ(ℂ) as a 2n×2n matrix.
    pub b: CMat,
    /// z^{ia} flattened as z[i * 2n + a], i ∈ {0,1}.
    pub z: Vec<Complex64>,
}

impl PPoint {
    pub fn identity(dims: &Dimensions) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        PPoint {
            u: [[one, zero], [zero, one]],
            b: CMat::identity(2 * dims.n),
            z: vec![zero; 4 * dims.n],
        }
    }
}

/// The holomorphic map ψ on ℂ⁴ⁿ: ψ^{jb}(z) = −J^j_i 𝕁^b_a z^{ia}.
pub fn psi_z(sym: &SymplecticData, z: &[Complex64]) -> Vec<Complex64> {
    let m = 2 * sym.dims.n;
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * m];
    for b in 0..m {
        for a in 0..m {
            if sym.jhat0[b][a] == 0 {
                continue;
            }
            let jj = Complex64::new(sym.jhat0[b][a] as f64, 0.0);
            // −J^1_i x^i = x², −J^2_i x^i = −x¹ with J = [[0,−1],[1,0]].
            out[b] += jj * z[m + a];
            out[m + b] -= jj * z[a];
        }
    }
    out
}

fn conj_transpose_inverse2(u: &[[Complex64; 2]; 2]) -> Option<[[Complex64; 2]; 2]> {
    let ubar = [
        [u[0][0].conj(), u[0][1].conj()],
        [u[1][0].conj(), u[1][1].conj()],
    ];
    let t = [[ubar[0][0], ubar[1][0]], [ubar[0][1], ubar[1][1]]];
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    if det.norm() < 1e-300 {
        return None;
    }
    Some([
        [t[1][1] / det, -t[0][1] / det],
        [-t[1][0] / det, t[0][0] / det],
    ])
}

/// The anti-holomorphic involution τ of signature (4p,4q).
pub fn tau_point(sym: &SymplecticData, pt: &PPoint) -> Result<PPoint, AlgebraError> {
    let u = conj_transpose_inverse2(&pt.u).ok_or(AlgebraError::Singular)?;
    // (I_{2p,2q} B̄ᵀ I_{2p,2q})⁻¹
    let n = sym.dims.n;
    let m = 2 * n;
    let sign = |i: usize| sym.eta[i % n] as f64;
    let mut mbar = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            *mbar.at_mut(i, j) = pt.b.at(j, i).conj() * sign(i) * sign(j);
        }
    }
    let b = invert(&mbar).ok_or(AlgebraError::Singular)?;
    let z: Vec<Complex64> = psi_z(sym, &pt.z).iter().map(|c| c.conj()).collect();
    Ok(PPoint { u, b, z })
}

/// Push-forward of a flat basis field under τ, with Ĵ evaluated at B = I.
///
/// H₀ ↦ −H₀, H±± ↦ −H∓∓, e±a ↦ ±Ĵᵇ_a e∓b.
pub fn tau_label_pushforward<S: Scalar>(
    sym: &SymplecticData,
    label: BasisIndex,
) -> Vec<(BasisIndex, S)> {
    match label {
        BasisIndex::H0 => vec![(BasisIndex::H0, S::from_i64(-1))],
        BasisIndex::Hpp => vec![(BasisIndex::Hmm, S::from_i64(-1))],
        BasisIndex::Hmm => vec![(BasisIndex::Hpp, S::from_i64(-1))],
        BasisIndex::E(k) => vec![(BasisIndex::E(k), S::one())],
        BasisIndex::EPlus(a) => (0..2 * sym.dims.n)
            .filter(|&b| sym.jhat0[b][a] != 0)
            .map(|b| (BasisIndex::EMinus(b), S::from_i64(sym.jhat0[b][a])))
            .collect(),
        BasisIndex::EMinus(a) => (0..2 * sym.dims.n)
            .filter(|&b| sym.jhat0[b][a] != 0)
            .map(|b| (BasisIndex::EPlus(b), S::from_i64(-sym.jhat0[b][a])))
            .collect(),
    }
}

/// Basis of the τ-fixed subspace V^τ ⊂ ℂ⁴ⁿ expressed over (e₊a, e₋a).
///
/// Ordered so that the flat metric Gram matrix is exactly I₄⊗η: first the 2n
/// vectors e₊a − 𝕁ᵇ_a e₋b, then the 2n vectors i(e₊a + 𝕁ᵇ_a e₋b). Each entry
/// is the pair of coefficient vectors (over e₊, over e₋).
pub fn tau_fixed_basis(sym: &SymplecticData) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    let m = 2 * sym.dims.n;
    let mut out = Vec::with_capacity(2 * m);
    let zero = Complex64::new(0.0, 0.0);
    for a in 0..m {
        let mut plus = vec![zero; m];
        let mut minus = vec![zero; m];
        plus[a] = Complex64::new(1.0, 0.0);
        for b in 0..m {
            minus[b] = Complex64::new(-(sym.jhat0[b][a] as f64), 0.0);
        }
        out.push((plus, minus));
    }
    for a in 0..m {
        let mut plus = vec![zero; m];
        let mut minus = vec![zero; m];
        plus[a] = Complex64::new(0.0, 1.0);
        for b in 0..m {
            minus[b] = Complex64::new(0.0, sym.jhat0[b][a] as f64);
        }
        out.push((plus, minus));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn dims(n: usize) -> Dimensions {
        Dimensions::new(n, n, 0).unwrap()
    }

    #[test]
    fn sp1_count_is_three_for_n1() {
        let sym = SymplecticData::new(dims(1));
        assert_eq!(sp_basis(&sym).len(), 3);
        assert_eq!(dims(1).sp_dim(), 3);
    }

    #[test]
    fn omega_upper_is_exact_inverse() {
        for n in 1..=3 {
            let sym = SymplecticData::new(dims(n));
            let m = 2 * n;
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0;
                    for k in 0..m {
                        acc += sym.omega_upper[i][k] * sym.omega_lower[k][j];
                    }
                    assert_eq!(acc, i64::from(i == j));
                }
            }
        }
    }

    #[test]
    fn sp_basis_closed_under_commutators() {
        // n=1: [E(1), E(2)] expands exactly over the three basis matrices.
        let sc = StructureConstants::<Exact>::new(dims(1));
        let c = commutator(&sc.e_matrices[1], &sc.e_matrices[2]);
        let coeffs = expand_in_sp_basis::<Exact>(&sc.e_matrices, &c);
        assert_eq!(coeffs.len(), 3);
        let m = 2;
        for i in 0..m {
            for j in 0..m {
                let mut acc = Exact::zero();
                for (k, co) in coeffs.iter().enumerate() {
                    acc = acc.add(&co.mul(&Exact::from_i64(sc.e_matrices[k][i][j])));
                }
                assert_eq!(acc, Exact::from_i64(c[i][j]));
            }
        }
    }

    #[test]
    fn bracket_examples() {
        let sc = StructureConstants::<Exact>::new(dims(1));
        let hpp: PVector<Exact> = [(BasisIndex::Hpp, Exact::from_i64(1))].into();
        let hmm: PVector<Exact> = [(BasisIndex::Hmm, Exact::from_i64(1))].into();
        let h0: PVector<Exact> = [(BasisIndex::H0, Exact::from_i64(1))].into();
        assert_eq!(sc.bracket_p(&hpp, &hmm), h0);
        assert!(sc.bracket_p(&hpp, &hpp).is_empty());
        // [H₀, e₊a] = e₊a and [H₊₊, e₋a] = e₊a.
        let ep: PVector<Exact> = [(BasisIndex::EPlus(0), Exact::from_i64(1))].into();
        let em: PVector<Exact> = [(BasisIndex::EMinus(0), Exact::from_i64(1))].into();
        assert_eq!(sc.bracket_p(&h0, &ep), ep);
        assert_eq!(sc.bracket_p(&hpp, &em), ep);
    }

    #[test]
    fn jacobi_identity_exhaustive_n1_n2() {
        for n in 1..=2 {
            let d = dims(n);
            let sc = StructureConstants::<Exact>::new(d);
            let labels = basis(&d);
            let vec = |l: BasisIndex| -> PVector<Exact> { [(l, Exact::from_i64(1))].into() };
            for &a in &labels {
                for &b in &labels {
                    for &c in &labels {
                        let ab_c = sc.bracket_p(&sc.bracket_p(&vec(a), &vec(b)), &vec(c));
                        let bc_a = sc.bracket_p(&sc.bracket_p(&vec(b), &vec(c)), &vec(a));
                        let ca_b = sc.bracket_p(&sc.bracket_p(&vec(c), &vec(a)), &vec(b));
                        let mut total = ab_c;
                        for src in [bc_a, ca_b] {
                            for (k, v) in src {
                                let e = total.entry(k).or_insert_with(Exact::zero);
                                *e = e.add(&v);
                            }
                        }
                        total.retain(|_, v| !v.is_zero());
                        assert!(total.is_empty(), "Jacobi fails at ({a:?},{b:?},{c:?})");
                    }
                }
            }
        }
    }

    #[test]
    fn grading_respected() {
        for n in 1..=2 {
            let d = dims(n);
            let sc = StructureConstants::<Exact>::new(d);
            let labels = basis(&d);
            for &a in &labels {
                for &b in &labels {
                    let target = a.charge() + b.charge();
                    for (l, _) in sc.bracket_basis(a, b) {
                        assert_eq!(l.charge(), target, "grading at ({a:?},{b:?})");
                    }
                    if target.abs() > 2 {
                        assert!(sc.bracket_basis(a, b).is_empty());
                    }
                }
            }
        }
    }

    #[test]
    fn tau_is_involutive_and_fixes_identity() {
        for (n, p, q) in [(1, 1, 0), (2, 1, 1)] {
            let d = Dimensions::new(n, p, q).unwrap();
            let sym = SymplecticData::new(d);
            let id = PPoint::identity(&d);
            let t = tau_point(&sym, &id).unwrap();
            assert!((t.u[0][0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
            assert!(t.z.iter().all(|c| c.norm() < 1e-14));

            let mut pt = PPoint::identity(&d);
            pt.u = [
                [Complex64::new(1.1, 0.2), Complex64::new(0.3, -0.1)],
                [Complex64::new(-0.2, 0.4), Complex64::new(0.0, 0.0)],
            ];
            pt.u[1][1] = (Complex64::new(1.0, 0.0) + pt.u[1][0] * pt.u[0][1]) / pt.u[0][0];
            for (i, z) in pt.z.iter_mut().enumerate() {
                *z = Complex64::new(0.1 * i as f64 - 0.3, 0.05 * i as f64);
            }
            let t1 = tau_point(&sym, &pt).unwrap();
            let t2 = tau_point(&sym, &t1).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((t2.u[i][j] - pt.u[i][j]).norm() < 1e-10);
                }
            }
            for (a, b) in t2.z.iter().zip(&pt.z) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn tau_fixed_point_pattern() {
        // Points of the form (w, v̄, v, −w̄) are τ-fixed for n = 1, η = 1.
        let d = dims(1);
        let sym = SymplecticData::new(d);
        let w = Complex64::new(0.3, -0.7);
        let v = Complex64::new(-0.2, 0.4);
        let mut pt = PPoint::identity(&d);
        pt.z = vec![w, v.conj(), v, -w.conj()];
        let t = tau_point(&sym, &pt).unwrap();
        for (a, b) in t.z.iter().zip(&pt.z) {
            assert!((a - b).norm() < 1e-12, "not fixed: {a} vs {b}");
        }
    }

    #[test]
    fn tau_pushforward_labels() {
        let d = dims(1);
        let sym = SymplecticData::new(d);
        let h = tau_label_pushforward::<Exact>(&sym, BasisIndex::Hpp);
        assert_eq!(h, vec![(BasisIndex::Hmm, Exact::from_i64(-1))]);
        // Applying twice to H₀ yields H₀.
        let once = tau_label_pushforward::<Exact>(&sym, BasisIndex::H0);
        assert_eq!(once.len(), 1);
        let twice = tau_label_pushforward::<Exact>(&sym, once[0].0);
        assert_eq!(twice[0].1.mul(&once[0].1), Exact::from_i64(1));
        // e₊a at B = I: +Ĵᵇ_a e₋b with Ĵ₀ = 𝕁 = [[0,−η],[η,0]].
        let e = tau_label_pushforward::<Exact>(&sym, BasisIndex::EPlus(0));
        assert_eq!(e, vec![(BasisIndex::EMinus(1), Exact::from_i64(1))]);
    }

    #[test]
    fn jhat_at_identity_matches_jhat0() {
        let d = Dimensions::new(2, 1, 1).unwrap();
        let sym = SymplecticData::new(d);
        let j = sym.jhat_at(&CMat::identity(4)).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                assert!((j.at(i, k) - Complex64::new(sym.jhat0[i][k] as f64, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sp_basis_matrix_rejects_out_of_range() {
        let sym = SymplecticData::new(dims(1));
        assert!(sp_basis_matrix(&sym, 0, 5).is_err());
    }
}

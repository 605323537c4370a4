//! Eigenstructure of the closed-loop matrix `A + alpha B C`.
//!
//! The central object is [`SpectralSplit`]: a simple eigenvalue `lambda`
//! with `|lambda| > 1`, its eigenvector, the complementary invariant
//! subspace `X` spanned by the remaining (generalized) eigenvectors, and a
//! unit vector `psi` orthogonal to `X`. A state `x` lies in `X` exactly when
//! `|psi^* x| = 0`.
//!
//! `X` is built as the null space of `q(A + alpha B C)` where
//! `q(z) = chi(z) / (z - lambda)`, using one SVD. [`jordan_complement`]
//! builds the same subspace from generalized eigenspaces and is kept as an
//! independent cross-check.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::oracles::ExpTerm;
use crate::poly::Poly;

/// Eigenvalues closer than this times `max(1, max |mu|)` are treated as one.
pub const SIMPLICITY_RELATIVE: f64 = 1e-6;
/// `|lambda| > 1 + UNSTABLE_MARGIN` is required.
pub const UNSTABLE_MARGIN: f64 = 1e-9;
/// `q(A)` must have `sigma_2 <= NULLITY_RELATIVE * sigma_1`.
pub const NULLITY_RELATIVE: f64 = 1e-6;
/// Chain bases with a larger condition number are refused by the modal route.
pub const MAX_CHAIN_CONDITION: f64 = 1e10;

const TIE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("no simple eigenvalue outside the unit disk")]
    NotFound,
    #[error("unstable eigenvalue {re} + {im}j has multiplicity {multiplicity} within the simplicity tolerance")]
    NearDefective { re: f64, im: f64, multiplicity: usize },
    #[error("null space of q(A) has dimension {found}, expected {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("chain basis condition number {0:e} exceeds the limit")]
    IllConditioned(f64),
    #[error("matrix is not square")]
    NotSquare,
}

type CMatrix = DMatrix<Complex64>;
type CVector = DVector<Complex64>;

fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

fn shifted(m: &CMatrix, mu: Complex64) -> CMatrix {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        out[(i, i)] -= mu;
    }
    out
}

/// Singular values in descending order with the matching right singular vectors as columns.
fn svd_sorted(m: CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.ncols();
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = CMatrix::zeros(n, order.len());
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            v[(r, col)] = v_t[(i, r)].conj();
        }
    }
    (values, v)
}

/// Unit norm, with the largest-modulus component made real and positive.
fn normalize_phase(mut v: CVector) -> CVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    let phase = pivot.conj() / pivot.norm();
    v *= phase / norm;
    v
}

/// Orthonormal basis of the column space (via SVD).
fn orthonormalize(m: &CMatrix) -> CMatrix {
    let k = m.ncols();
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    CMatrix::from_fn(m.nrows(), k, |r, c| u[(r, order[c])])
}

/// Eigenvalues of a real square matrix; complex ones come in exact conjugate pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    m.complex_eigenvalues().iter().copied().collect()
}

/// Distinct eigenvalue with its algebraic multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenCluster {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Groups eigenvalues that lie within the simplicity tolerance of each other.
pub fn eigen_clusters(m: &DMatrix<f64>) -> Vec<EigenCluster> {
    let eig = eigenvalues(m);
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = SIMPLICITY_RELATIVE * scale;
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    for z in eig {
        match groups
            .iter_mut()
            .find(|g| g.iter().any(|w| (*w - z).norm() <= tol))
        {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    groups
        .into_iter()
        .map(|g| EigenCluster {
            value: g.iter().sum::<Complex64>() / g.len() as f64,
            multiplicity: g.len(),
        })
        .collect()
}

/// Characteristic polynomial by the Faddeev–LeVerrier recursion.
pub fn charpoly(m: &DMatrix<f64>) -> Poly {
    let n = m.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        mk = m * &mk;
        for i in 0..n {
            mk[(i, i)] += coeffs[n - k + 1];
        }
        coeffs[n - k] = -(m * &mk).trace() / k as f64;
    }
    Poly::new(coeffs)
}

/// Unit null vector of `m - mu I` (the right singular vector of the smallest singular value).
pub fn eigenvector(m: &DMatrix<f64>, mu: Complex64) -> CVector {
    let (_, v) = svd_sorted(shifted(&complexify(m), mu));
    normalize_phase(v.column(v.ncols() - 1).into_owned())
}

/// One eigenvector per distinct eigenvalue.
pub fn eigenvectors(m: &DMatrix<f64>) -> Vec<(Complex64, CVector)> {
    eigen_clusters(m)
        .into_iter()
        .map(|c| (c.value, eigenvector(m, c.value)))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSplit {
    pub lambda: Complex64,
    /// Unit eigenvector for `lambda`.
    pub xi: CVector,
    /// `n x (n-1)` orthonormal basis of `X`.
    pub x_basis: CMatrix,
    /// Unit normal of `X`; `P = psi psi^*`.
    pub psi: CVector,
    pub alpha: Option<f64>,
}

impl SpectralSplit {
    /// `||P x|| = |psi^* x|`.
    pub fn projection_norm(&self, x: &DVector<f64>) -> f64 {
        projection_norm(&self.psi, x)
    }

    /// `C xi`, nonzero for any minimal realization.
    pub fn output_gain(&self, c: &RowDVector<f64>) -> Complex64 {
        c.iter().zip(self.xi.iter()).map(|(c, x)| x * *c).sum()
    }
}

/// `|psi^* x|`, equal to `||psi psi^* x||` for unit `psi`.
pub fn projection_norm(psi: &CVector, x: &DVector<f64>) -> f64 {
    psi.iter()
        .zip(x.iter())
        .map(|(p, v)| p.conj() * *v)
        .sum::<Complex64>()
        .norm()
}

/// Picks the simple eigenvalue of largest modulus outside the unit disk
/// (ties: larger real part, then positive imaginary part).
pub fn find_simple_unstable(acl: &DMatrix<f64>) -> Result<SpectralSplit, SpectralError> {
    if !acl.is_square() {
        return Err(SpectralError::NotSquare);
    }
    let clusters = eigen_clusters(acl);
    let candidates: Vec<&EigenCluster> = clusters
        .iter()
        .filter(|c| c.value.norm() > 1.0 + UNSTABLE_MARGIN)
        .collect();
    let mut simple: Vec<&EigenCluster> = candidates
        .iter()
        .copied()
        .filter(|c| c.multiplicity == 1)
        .collect();
    if simple.is_empty() {
        return Err(match candidates.first() {
            Some(c) => SpectralError::NearDefective {
                re: c.value.re,
                im: c.value.im,
                multiplicity: c.multiplicity,
            },
            None => SpectralError::NotFound,
        });
    }
    simple.sort_by(|a, b| {
        let (ma, mb) = (a.value.norm(), b.value.norm());
        if (ma - mb).abs() > TIE_RELATIVE * ma.max(mb) {
            return mb.total_cmp(&ma);
        }
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    let lambda = simple[0].value;
    let xi = eigenvector(acl, lambda);
    let (x_basis, psi) = complement_subspace(acl, lambda)?;
    Ok(SpectralSplit {
        lambda,
        xi,
        x_basis,
        psi,
        alpha: None,
    })
}

/// Null space of `q(acl)`, `q(z) = chi(z) / (z - lambda)`, and its unit normal.
///
/// `q(acl)` is formed as the product of `acl - mu I` over the remaining
/// eigenvalues, which has the same null space as the coefficient form.
pub fn complement_subspace(
    acl: &DMatrix<f64>,
    lambda: Complex64,
) -> Result<(CMatrix, CVector), SpectralError> {
    if !acl.is_square() {
        return Err(SpectralError::NotSquare);
    }
    let n = acl.nrows();
    let a = complexify(acl);
    let mut q = CMatrix::identity(n, n);
    let mut lambda_removed = false;
    for c in eigen_clusters(acl) {
        let mut mult = c.multiplicity;
        if !lambda_removed && (c.value - lambda).norm() <= SIMPLICITY_RELATIVE * lambda.norm().max(1.0) {
            if c.multiplicity > 1 {
                return Err(SpectralError::NearDefective {
                    re: c.value.re,
                    im: c.value.im,
                    multiplicity: c.multiplicity,
                });
            }
            lambda_removed = true;
            mult -= 1;
        }
        for _ in 0..mult {
            let factor = shifted(&a, c.value);
            q = factor * q;
            let s = q.norm();
            if s > 0.0 {
                q /= Complex64::new(s, 0.0);
            }
        }
    }
    let (sigma, v) = svd_sorted(q);
    let nullity = sigma.iter().filter(|&&s| s <= NULLITY_RELATIVE * sigma[0]).count();
    if !lambda_removed || nullity != n - 1 {
        return Err(SpectralError::DimensionMismatch {
            found: nullity,
            expected: n - 1,
        });
    }
    let psi = normalize_phase(v.column(0).into_owned());
    let basis = v.columns(1, n - 1).into_owned();
    Ok((basis, psi))
}

/// Orthonormal basis of `X` from generalized eigenspaces `N((acl - mu I)^k)`
/// of the eigenvalues other than `lambda`.
pub fn jordan_complement(acl: &DMatrix<f64>, lambda: Complex64) -> CMatrix {
    let n = acl.nrows();
    let a = complexify(acl);
    let mut cols: Vec<CVector> = Vec::new();
    let mut lambda_removed = false;
    for c in eigen_clusters(acl) {
        let mut mult = c.multiplicity;
        if !lambda_removed && (c.value - lambda).norm() <= SIMPLICITY_RELATIVE * lambda.norm().max(1.0) {
            lambda_removed = true;
            mult -= 1;
        }
        if mult == 0 {
            continue;
        }
        cols.extend(generalized_eigenspace(&a, c.value, mult).column_iter().map(|c| c.into_owned()));
    }
    orthonormalize(&CMatrix::from_columns(&cols).resize(n, cols.len(), Complex64::new(0.0, 0.0)))
}

fn generalized_eigenspace(a: &CMatrix, mu: Complex64, mult: usize) -> CMatrix {
    let n = a.nrows();
    let shift = shifted(a, mu);
    let mut power = CMatrix::identity(n, n);
    for _ in 0..mult {
        power = &shift * power;
    }
    let (_, v) = svd_sorted(power);
    v.columns(n - mult, mult).into_owned()
}

/// Sine of the largest principal angle between the column spans of `a` and `b`.
pub fn subspace_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let residual = &qb - &qa * (qa.adjoint() * &qb);
    let s = residual.singular_values().max();
    s.min(1.0).asin()
}

#[derive(Clone, Debug, Serialize)]
pub struct ModalBlock {
    pub eigenvalue: Complex64,
    pub multiplicity: usize,
    /// Orthonormal basis of the generalized eigenspace.
    pub basis: CMatrix,
    /// `basis^* acl basis`, with `eigenvalue` as its only eigenvalue.
    pub restricted: CMatrix,
    /// Coordinates of `x0` in `basis`.
    pub coords: CVector,
}

/// Decomposition of `x0` over the generalized eigenspaces of `acl`.
#[derive(Clone, Debug, Serialize)]
pub struct ModalExpansion {
    pub blocks: Vec<ModalBlock>,
    /// Condition number of `S = [basis_1 ... basis_r]`.
    pub condition: f64,
}

impl ModalExpansion {
    pub fn new(acl: &DMatrix<f64>, x0: &DVector<f64>) -> Result<Self, SpectralError> {
        if !acl.is_square() {
            return Err(SpectralError::NotSquare);
        }
        let n = acl.nrows();
        let a = complexify(acl);
        let clusters = eigen_clusters(acl);
        let bases: Vec<CMatrix> = clusters
            .iter()
            .map(|c| generalized_eigenspace(&a, c.value, c.multiplicity))
            .collect();
        let cols: Vec<CVector> = bases
            .iter()
            .flat_map(|b| b.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
            .collect();
        let s = CMatrix::from_columns(&cols);
        let sv = s.singular_values();
        let condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
        if !(condition <= MAX_CHAIN_CONDITION) {
            return Err(SpectralError::IllConditioned(condition));
        }
        let beta = s
            .lu()
            .solve(&x0.map(|v| Complex64::new(v, 0.0)))
            .ok_or(SpectralError::IllConditioned(f64::INFINITY))?;
        let mut offset = 0;
        let blocks = clusters
            .iter()
            .zip(bases)
            .map(|(c, basis)| {
                let k = c.multiplicity;
                let restricted = basis.adjoint() * &a * &basis;
                let coords = beta.rows(offset, k).into_owned();
                offset += k;
                ModalBlock {
                    eigenvalue: c.value,
                    multiplicity: k,
                    basis,
                    restricted,
                    coords,
                }
            })
            .collect();
        debug_assert_eq!(offset, n);
        Ok(ModalExpansion { blocks, condition })
    }

    /// Reconstructs `x0 = S beta`.
    pub fn reconstruct(&self) -> CVector {
        self.blocks
            .iter()
            .map(|b| &b.basis * &b.coords)
            .fold(CVector::zeros(self.blocks[0].basis.nrows()), |acc, v| acc + v)
    }

    /// `C acl^k x0` through `T^k = sum_l binom(k, l) mu^(k-l) E^l`, `E = T - mu I`.
    pub fn output(&self, c: &RowDVector<f64>, k: usize) -> f64 {
        let cc: RowDVector<Complex64> = c.map(|v| Complex64::new(v, 0.0));
        let mut y = Complex64::new(0.0, 0.0);
        for b in &self.blocks {
            let e = shifted(&b.restricted, b.eigenvalue);
            let mut e_pow_beta = b.coords.clone();
            let gain = &cc * &b.basis;
            for l in 0..b.multiplicity.min(k + 1) {
                let coeff = binomial(k, l) * power(b.eigenvalue, k - l);
                y += (&gain * &e_pow_beta)[(0, 0)] * coeff;
                e_pow_beta = &e * e_pow_beta;
            }
        }
        y.re
    }

    /// Terms `p_j(k) mu_j^k` of the output sequence, skipping zero
    /// eigenvalues (whose contribution vanishes once `k` reaches their multiplicity).
    pub fn exponential_terms(&self, c: &RowDVector<f64>) -> Vec<ExpTerm> {
        let cc: RowDVector<Complex64> = c.map(|v| Complex64::new(v, 0.0));
        let mut terms = Vec::new();
        for b in &self.blocks {
            if b.eigenvalue.norm() == 0.0 {
                continue;
            }
            let e = shifted(&b.restricted, b.eigenvalue);
            let gain = &cc * &b.basis;
            let mut e_pow_beta = b.coords.clone();
            let mut poly = vec![Complex64::new(0.0, 0.0); b.multiplicity];
            let mut falling = vec![Complex64::new(1.0, 0.0)];
            let mut factorial = 1.0;
            for l in 0..b.multiplicity {
                if l > 0 {
                    factorial *= l as f64;
                    // falling(k, l) = falling(k, l-1) * (k - (l-1))
                    let shift = (l - 1) as f64;
                    let mut next = vec![Complex64::new(0.0, 0.0); falling.len() + 1];
                    for (i, &f) in falling.iter().enumerate() {
                        next[i + 1] += f;
                        next[i] -= f * shift;
                    }
                    falling = next;
                }
                let weight = (&gain * &e_pow_beta)[(0, 0)] / power(b.eigenvalue, l) / factorial;
                for (i, &f) in falling.iter().enumerate() {
                    poly[i] += f * weight;
                }
                e_pow_beta = &e * e_pow_beta;
            }
            terms.push(ExpTerm {
                coeffs: poly,
                base: b.eigenvalue,
            });
        }
        terms
    }
}

fn binomial(k: usize, l: usize) -> f64 {
    if l > k {
        return 0.0;
    }
    (0..l).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

fn power(z: Complex64, e: usize) -> Complex64 {
    (0..e).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

/// Output sequence `y_0..=y_{k_max}` of the linear loop `x_{k+1} = acl x_k`
/// computed through the modal expansion.
pub fn modal_output(
    acl: &DMatrix<f64>,
    c: &RowDVector<f64>,
    x0: &DVector<f64>,
    k_max: usize,
) -> Result<Vec<f64>, SpectralError> {
    let modal = ModalExpansion::new(acl, x0)?;
    Ok((0..=k_max).map(|k| modal.output(c, k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn second_order_loop_acl() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-1.5, 2.0, 1.0, 0.0])
    }

    fn direct_output(acl: &DMatrix<f64>, c: &RowDVector<f64>, x0: &DVector<f64>, k_max: usize) -> Vec<f64> {
        let mut x = x0.clone();
        let mut out = Vec::new();
        for _ in 0..=k_max {
            out.push((c * &x)[(0, 0)]);
            x = acl * x;
        }
        out
    }

    #[test]
    fn charpoly_of_second_order_loop_closed_loop() {
        let p = charpoly(&second_order_loop_acl());
        assert_eq!(p.coeffs(), &[-2.0, 1.5, 1.0]);
    }

    #[test]
    fn second_order_loop_split() {
        let s41 = 41f64.sqrt();
        let split = find_simple_unstable(&second_order_loop_acl()).unwrap();
        assert!((split.lambda.re - (-0.75 - 0.25 * s41)).abs() < 1e-12);
        assert_eq!(split.lambda.im, 0.0);
        // xi parallel to [lambda, 1]
        let cross = split.xi[0] * 1.0 - split.xi[1] * (-0.75 - 0.25 * s41);
        assert!(cross.norm() < 1e-12);
        let residual = complexify(&second_order_loop_acl()) * &split.xi - &split.xi * split.lambda;
        assert!(residual.norm() < 1e-8);
        // X = span [lambda_2, 1]
        let xi2 = CMatrix::from_column_slice(2, 1, &[Complex64::new(-0.75 + 0.25 * s41, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(subspace_angle(&split.x_basis, &xi2) < 1e-10);
        assert!((split.psi.norm() - 1.0).abs() < 1e-14);
        assert!((split.psi.adjoint() * &split.x_basis).norm() < 1e-12);
    }

    #[test]
    fn stable_matrix_has_no_split() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 1.0, 0.0]);
        assert_eq!(find_simple_unstable(&a).unwrap_err(), SpectralError::NotFound);
    }

    #[test]
    fn repeated_unstable_eigenvalue_is_near_defective() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(
            find_simple_unstable(&a).unwrap_err(),
            SpectralError::NearDefective { multiplicity: 2, .. }
        ));
    }

    #[test]
    fn selection_prefers_largest_modulus_then_real_part() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 3.0, 2.0, 0.5]));
        let split = find_simple_unstable(&a).unwrap();
        assert_eq!(split.lambda, Complex64::new(3.0, 0.0));
        // rotation-scaling block: conjugate pair 1.5 e^{+-j pi/3}; positive imaginary part wins
        let (c, s) = (1.5 * (std::f64::consts::PI / 3.0).cos(), 1.5 * (std::f64::consts::PI / 3.0).sin());
        let b = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 0.2]);
        let split = find_simple_unstable(&b).unwrap();
        assert!(split.lambda.im > 0.0);
        assert!((split.lambda.norm() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn two_state_complement_is_other_eigenvector() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]);
        let (basis, psi) = complement_subspace(&a, Complex64::new(2.0, 0.0)).unwrap();
        let other = eigenvector(&a, Complex64::new(0.5, 0.0));
        let col = basis.column(0).into_owned();
        assert!((col.dotc(&other).norm() - 1.0).abs() < 1e-12);
        assert!(psi.dotc(&other).norm() < 1e-12);
    }

    #[test]
    fn complement_requires_simple_eigenvalue() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.3]);
        assert!(matches!(
            complement_subspace(&a, Complex64::new(2.0, 0.0)),
            Err(SpectralError::NearDefective { multiplicity: 2, .. })
        ));
        // lambda that is not an eigenvalue at all
        assert!(matches!(
            complement_subspace(&a, Complex64::new(5.0, 0.0)),
            Err(SpectralError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let s41 = 41f64.sqrt();
        let split = find_simple_unstable(&second_order_loop_acl()).unwrap();
        let x4 = DVector::from_vec(vec![-4.875 + 1.625 * s41, 6.5]);
        assert!(split.projection_norm(&x4) < 1e-10);
        let x4p = DVector::from_vec(vec![-4.875 + 1.625 * s41, 6.5 - 0.25e-6]);
        assert!(split.projection_norm(&x4p) > 1e-8);
        let basis_col = split.x_basis.column(0).into_owned();
        assert!(split.psi.dotc(&basis_col).norm() < 1e-10);
    }

    #[test]
    fn defective_remaining_block_agrees_with_null_space_route() {
        // Jordan block at 0.4 (size 2) plus simple unstable 1.7, mixed by a similarity.
        let j = DMatrix::from_row_slice(3, 3, &[0.4, 1.0, 0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 1.7]);
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 1.0, 0.4, -0.3, 0.2, 1.0]);
        let a = &t * j * t.clone().try_inverse().unwrap();
        let split = find_simple_unstable(&a).unwrap();
        assert!((split.lambda.re - 1.7).abs() < 1e-10);
        let jordan = jordan_complement(&a, split.lambda);
        assert!(subspace_angle(&split.x_basis, &jordan) < 1e-6);
    }

    #[test]
    fn modal_single_mode() {
        let acl = second_order_loop_acl();
        let c = RowDVector::from_vec(vec![1.0, -1.0]);
        let lambda = -0.75 - 0.25 * 41f64.sqrt();
        let xi = DVector::from_vec(vec![lambda, 1.0]);
        let y = modal_output(&acl, &c, &xi, 10).unwrap();
        for (k, v) in y.iter().enumerate() {
            let expected = lambda.powi(k as i32) * (lambda - 1.0);
            assert!((v - expected).abs() < 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn modal_on_stable_subspace_decays() {
        let s41 = 41f64.sqrt();
        let acl = second_order_loop_acl();
        let c = RowDVector::from_vec(vec![1.0, -1.0]);
        let x4 = DVector::from_vec(vec![-4.875 + 1.625 * s41, 6.5]);
        let lambda2 = -0.75 + 0.25 * s41;
        let y = modal_output(&acl, &c, &x4, 30).unwrap();
        for (k, v) in y.iter().enumerate() {
            let expected = 6.5 * lambda2.powi(k as i32) * (lambda2 - 1.0);
            assert!((v - expected).abs() < 1e-9);
        }
        assert!((y[0] - (-11.375 + 1.625 * s41)).abs() < 1e-12);
    }

    #[test]
    fn modal_matches_direct_with_jordan_block() {
        let j = DMatrix::from_row_slice(3, 3, &[0.6, 1.0, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0, -1.3]);
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.2, 1.0, 0.3, 0.0, -0.4, 1.0]);
        let a = &t * j * t.clone().try_inverse().unwrap();
        let c = RowDVector::from_vec(vec![0.3, -1.0, 0.7]);
        let x0 = DVector::from_vec(vec![1.0, 2.0, -0.5]);
        let modal = modal_output(&a, &c, &x0, 40).unwrap();
        let direct = direct_output(&a, &c, &x0, 40);
        for (m, d) in modal.iter().zip(&direct) {
            assert!((m - d).abs() <= 1e-7 * d.abs().max(1.0), "{m} vs {d}");
        }
    }

    #[test]
    fn ill_conditioned_basis_declined() {
        // Distinct eigenvalues whose eigenvectors are 1e-11 apart in angle.
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1e6, 0.0, 0.5 + 1e-5]);
        assert!(matches!(
            ModalExpansion::new(&a, &DVector::from_vec(vec![1.0, 1.0])),
            Err(SpectralError::IllConditioned(_))
        ));
    }
}

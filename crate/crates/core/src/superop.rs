//! Operators on a `d`-dimensional Hilbert space and superoperators acting on
//! them.
//!
//! Superoperators are stored as `d^2 x d^2` matrices acting on column-stacked
//! vectorizations: `vec(X)[j*d + i] = X[i, j]`. In this convention the map
//! `X -> A X B` has matrix `B^T (x) A`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Tolerance used for structural checks on exactly representable inputs.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance used for structural checks on randomly generated inputs.
pub const RANDOM_TOL: f64 = 1e-10;

const I: C64 = C64::new(0.0, 1.0);

fn check_dim(d: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// A `d x d` complex matrix on the system Hilbert space.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct Operator(DMatrix<C64>);

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator{}", self.0)
    }
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        check_dim(m.nrows())?;
        Ok(Operator(m))
    }

    /// Row-major constructor.
    pub fn from_rows(d: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(d, d, entries))
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Operator(m)
    }

    pub fn zeros(d: usize) -> Self {
        Operator(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Operator(DMatrix::identity(d, d))
    }

    /// The elementary unit `|j><k|`.
    pub fn unit(d: usize, j: usize, k: usize) -> Self {
        let mut m = DMatrix::zeros(d, d);
        m[(j, k)] = C64::new(1.0, 0.0);
        Operator(m)
    }

    pub fn sigma_x() -> Self {
        Self::real2([0.0, 1.0, 1.0, 0.0])
    }

    pub fn sigma_y() -> Self {
        Operator(DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), -I, I, C64::new(0.0, 0.0)],
        ))
    }

    pub fn sigma_z() -> Self {
        Self::real2([1.0, 0.0, 0.0, -1.0])
    }

    /// `|0><1|`, raising within the `sigma_z = diag(1, -1)` convention.
    pub fn sigma_plus() -> Self {
        Self::real2([0.0, 1.0, 0.0, 0.0])
    }

    /// `|1><0|`.
    pub fn sigma_minus() -> Self {
        Self::real2([0.0, 0.0, 1.0, 0.0])
    }

    fn real2(rows: [f64; 4]) -> Self {
        Operator(DMatrix::from_row_slice(
            2,
            2,
            &rows.map(|x| C64::new(x, 0.0)),
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn dagger(&self) -> Self {
        Operator(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, z: C64) -> Self {
        Operator(&self.0 * z)
    }

    pub fn scale_re(&self, x: f64) -> Self {
        self.scale(C64::new(x, 0.0))
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        Operator(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn anticommutator(&self, other: &Operator) -> Self {
        Operator(&self.0 * &other.0 + &other.0 * &self.0)
    }

    /// `X - Tr(X)/d`.
    pub fn traceless_part(&self) -> Self {
        let d = self.dim();
        let shift = self.trace() / d as f64;
        let mut m = self.0.clone();
        for i in 0..d {
            m[(i, i)] -= shift;
        }
        Operator(m)
    }

    /// `(X - X^dagger) / 2i`, the anti-Hermitian part divided by `i`.
    pub fn imaginary_part(&self) -> Self {
        Operator((&self.0 - self.0.adjoint()) / (2.0 * I))
    }

    pub fn real_part(&self) -> Self {
        Operator((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |M - M^dagger|` entrywise.
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// Largest modulus of an off-diagonal entry.
    pub fn max_off_diagonal(&self) -> f64 {
        let d = self.dim();
        let mut best: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    best = best.max(self.0[(i, j)].norm());
                }
            }
        }
        best
    }

    /// Column-stacked vectorization.
    pub fn vec(&self) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_column_slice(self.0.as_slice())
    }

    pub(crate) fn from_vec(d: usize, v: &[C64]) -> Self {
        Operator(DMatrix::from_column_slice(d, d, v))
    }

    /// Random operator with iid standard complex Gaussian entries.
    pub fn random<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Operator(DMatrix::from_fn(d, d, |_, _| {
            C64::new(
                StandardNormal.sample(&mut *rng),
                StandardNormal.sample(&mut *rng),
            )
        }))
    }

    pub fn random_hermitian<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self::random(d, rng).real_part()
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

/// Hilbert-Schmidt inner product `Tr(a^dagger b)`.
pub fn hs_inner(a: &Operator, b: &Operator) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.0.iter().zip(b.0.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// One term `weight * left . X . right` of a sandwich (pseudo-Kraus) form.
#[derive(Clone, Debug)]
pub struct SandwichTerm {
    pub weight: C64,
    pub left: Operator,
    pub right: Operator,
}

impl SandwichTerm {
    pub fn new(weight: C64, left: Operator, right: Operator) -> Self {
        SandwichTerm {
            weight,
            left,
            right,
        }
    }
}

/// Sandwich terms of the Lindblad form `-i[h, .] + sum_i rate_i D[op_i]`.
pub fn lindblad_terms(h: &Operator, jumps: &[(f64, Operator)]) -> Vec<SandwichTerm> {
    let d = h.dim();
    let id = Operator::identity(d);
    let mut terms = vec![
        SandwichTerm::new(-I, h.clone(), id.clone()),
        SandwichTerm::new(I, id.clone(), h.clone()),
    ];
    for (rate, op) in jumps {
        let g = C64::new(*rate, 0.0);
        let ldl = &op.dagger() * op;
        terms.push(SandwichTerm::new(g, op.clone(), op.dagger()));
        terms.push(SandwichTerm::new(-0.5 * g, ldl.clone(), id.clone()));
        terms.push(SandwichTerm::new(-0.5 * g, id.clone(), ldl));
    }
    terms
}

/// Sandwich terms of a random Hermiticity-preserving, trace-annihilating
/// generator: a commutator with a random (not traceless) Hermitian operator
/// plus `sum_ij w_ij (V_i . V_j^dagger - 1/2 {V_j^dagger V_i, .})` with a
/// random Hermitian, indefinite coefficient matrix `w` and random `V_i`.
pub fn random_htp_terms<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<SandwichTerm> {
    const OPS: usize = 3;
    let h = Operator::random_hermitian(d, rng);
    let id = Operator::identity(d);
    let mut terms = vec![
        SandwichTerm::new(-I, h.clone(), id.clone()),
        SandwichTerm::new(I, id.clone(), h),
    ];
    let v: Vec<Operator> = (0..OPS).map(|_| Operator::random(d, rng)).collect();
    let w = Operator::random_hermitian(OPS, rng);
    for i in 0..OPS {
        for j in 0..OPS {
            let wij = w.get(i, j);
            let vjd = v[j].dagger();
            let prod = &vjd * &v[i];
            terms.push(SandwichTerm::new(wij, v[i].clone(), vjd));
            terms.push(SandwichTerm::new(-0.5 * wij, prod.clone(), id.clone()));
            terms.push(SandwichTerm::new(-0.5 * wij, id.clone(), prod));
        }
    }
    terms
}

/// A linear map on operators, stored as a `d^2 x d^2` matrix in the
/// column-stacking convention.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SuperOperatorJson", into = "SuperOperatorJson")]
pub struct SuperOperator {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl fmt::Debug for SuperOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SuperOperator(d={}){}", self.dim, self.matrix)
    }
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_dim(dim)?;
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(SuperOperator { dim, matrix })
    }

    pub(crate) fn from_matrix_unchecked(dim: usize, matrix: DMatrix<C64>) -> Self {
        SuperOperator { dim, matrix }
    }

    pub fn zeros(d: usize) -> Self {
        SuperOperator {
            dim: d,
            matrix: DMatrix::zeros(d * d, d * d),
        }
    }

    pub fn identity(d: usize) -> Self {
        SuperOperator {
            dim: d,
            matrix: DMatrix::identity(d * d, d * d),
        }
    }

    /// Matrix of `sum weight * left . X . right`.
    pub fn from_sandwich(terms: &[SandwichTerm]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| {
            Error::InvalidParameter("sandwich form needs at least one term".into())
        })?;
        let d = first.left.dim();
        check_dim(d)?;
        let mut m = DMatrix::zeros(d * d, d * d);
        for term in terms {
            for op in [&term.left, &term.right] {
                if op.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: op.dim(),
                    });
                }
            }
            m += term.right.0.transpose().kronecker(&term.left.0) * term.weight;
        }
        Ok(SuperOperator { dim: d, matrix: m })
    }

    /// The von Neumann generator `-i[h, .]`.
    pub fn commutator_generator(h: &Operator) -> Self {
        let d = h.dim();
        let id = DMatrix::<C64>::identity(d, d);
        let m = (id.kronecker(&h.0) - h.0.transpose().kronecker(&id)) * (-I);
        SuperOperator { dim: d, matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        debug_assert_eq!(x.dim(), self.dim);
        let v = &self.matrix * x.vec();
        Operator::from_vec(self.dim, v.as_slice())
    }

    /// `self . other` (apply `other` first).
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * z,
        }
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Rebuild the matrix from the images of an orthonormal basis:
    /// `L = sum_a vec(L[F_a]) vec(F_a)^dagger`.
    pub fn from_basis_images(basis: &OperatorBasis, images: &[Operator]) -> Result<Self> {
        if images.len() != basis.elements.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.elements.len(),
                found: images.len(),
            });
        }
        let d = basis.dim;
        let mut m = DMatrix::zeros(d * d, d * d);
        for (f, img) in basis.elements.iter().zip(images) {
            m += img.vec() * f.vec().adjoint();
        }
        Ok(SuperOperator { dim: d, matrix: m })
    }
}

impl Add for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

/// Generator `-i[h, .] + sum_i rate_i (L_i . L_i^dagger - 1/2 {L_i^dagger L_i, .})`.
pub fn lindblad_generator(h: &Operator, jumps: &[(f64, Operator)]) -> Result<SuperOperator> {
    let residual = h.hermiticity_residual();
    if residual > EXACT_TOL * h.norm().max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    for (_, op) in jumps {
        if op.dim() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: op.dim(),
            });
        }
    }
    SuperOperator::from_sandwich(&lindblad_terms(h, jumps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HtpReport {
    pub hermiticity_preserving: bool,
    pub trace_annihilating: bool,
    pub hermiticity_residual: f64,
    pub trace_residual: f64,
}

impl HtpReport {
    pub fn passes(&self) -> bool {
        self.hermiticity_preserving && self.trace_annihilating
    }

    pub(crate) fn into_error(self) -> Error {
        Error::NotHtp {
            hermiticity_residual: self.hermiticity_residual,
            trace_residual: self.trace_residual,
        }
    }
}

const HTP_PROBES: usize = 20;
const HTP_SEED: u64 = 0x5eed_0f_4a7d;

/// Probe `L` on 20 random Hermitian (resp. arbitrary) operators and report the
/// largest Hermiticity and trace violations, with tolerance
/// `1e-10 * max(1, |L|)`.
pub fn check_htp(l: &SuperOperator) -> HtpReport {
    check_htp_with_tolerance(l, RANDOM_TOL)
}

pub fn check_htp_with_tolerance(l: &SuperOperator, tol: f64) -> HtpReport {
    let d = l.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(HTP_SEED);
    let mut herm: f64 = 0.0;
    let mut trace: f64 = 0.0;
    for _ in 0..HTP_PROBES {
        let x = Operator::random_hermitian(d, &mut rng);
        let y = l.apply(&x);
        herm = herm.max(y.hermiticity_residual() / x.norm());
        let z = Operator::random(d, &mut rng);
        trace = trace.max(l.apply(&z).trace().norm() / z.norm());
    }
    let scaled = tol * l.norm().max(1.0);
    HtpReport {
        hermiticity_preserving: herm <= scaled,
        trace_annihilating: trace <= scaled,
        hermiticity_residual: herm,
        trace_residual: trace,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `|j><k|`, indexed as `j * d + k`.
    ElementaryUnits,
    /// `1/sqrt(d)` followed by the normalized generalized Gell-Mann matrices:
    /// symmetric and antisymmetric pairs for each `j < k`, then the diagonal
    /// generators.
    GeneralizedGellMann,
}

/// An orthonormal basis of operators under the Hilbert-Schmidt product.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    pub dim: usize,
    pub kind: BasisKind,
    pub elements: Vec<Operator>,
}

pub fn make_basis(d: usize, kind: BasisKind) -> Result<OperatorBasis> {
    check_dim(d)?;
    let elements = match kind {
        BasisKind::ElementaryUnits => (0..d)
            .flat_map(|j| (0..d).map(move |k| Operator::unit(d, j, k)))
            .collect(),
        BasisKind::GeneralizedGellMann => gell_mann(d),
    };
    Ok(OperatorBasis {
        dim: d,
        kind,
        elements,
    })
}

fn gell_mann(d: usize) -> Vec<Operator> {
    let mut out = Vec::with_capacity(d * d);
    out.push(Operator::identity(d).scale_re(1.0 / (d as f64).sqrt()));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = DMatrix::zeros(d, d);
            sym[(j, k)] = C64::new(r, 0.0);
            sym[(k, j)] = C64::new(r, 0.0);
            out.push(Operator(sym));
            let mut anti = DMatrix::zeros(d, d);
            anti[(j, k)] = C64::new(0.0, -r);
            anti[(k, j)] = C64::new(0.0, r);
            out.push(Operator(anti));
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = DMatrix::zeros(d, d);
        for i in 0..l {
            diag[(i, i)] = C64::new(norm, 0.0);
        }
        diag[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
        out.push(Operator(diag));
    }
    out
}

impl OperatorBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Gram matrix `Tr(F_a^dagger F_b)`.
    pub fn gram(&self) -> DMatrix<C64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |a, b| {
            hs_inner(&self.elements[a], &self.elements[b]).expect("basis elements share a dimension")
        })
    }

    /// Expansion coefficients `Tr(F_a^dagger X)`.
    pub fn coefficients(&self, x: &Operator) -> Result<Vec<C64>> {
        self.elements.iter().map(|f| hs_inner(f, x)).collect()
    }

    pub fn reconstruct(&self, coefficients: &[C64]) -> Result<Operator> {
        if coefficients.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coefficients.len(),
            });
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (f, c) in self.elements.iter().zip(coefficients) {
            m += &f.0 * *c;
        }
        Ok(Operator(m))
    }
}

/// `{dim, re, im}` with row-major entries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixJson { dim: n, re, im }
    }

    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<C64>> {
        if self.re.len() != n * n || self.im.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: self.re.len().max(self.im.len()),
            });
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            C64::new(self.re[i * n + j], self.im[i * n + j])
        }))
    }
}

impl TryFrom<MatrixJson> for Operator {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        Operator::from_matrix(j.to_matrix(j.dim)?)
    }
}

impl From<Operator> for MatrixJson {
    fn from(op: Operator) -> Self {
        MatrixJson::from_matrix(&op.0)
    }
}

/// Same layout as [`MatrixJson`], but `dim` is the system dimension `d` and
/// the arrays hold the `d^2 x d^2` matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuperOperatorJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl TryFrom<SuperOperatorJson> for SuperOperator {
    type Error = Error;
    fn try_from(j: SuperOperatorJson) -> Result<Self> {
        let n = j.dim * j.dim;
        let m = MatrixJson {
            dim: n,
            re: j.re,
            im: j.im,
        }
        .to_matrix(n)?;
        SuperOperator::from_matrix(j.dim, m)
    }
}

impl From<SuperOperator> for SuperOperatorJson {
    fn from(s: SuperOperator) -> Self {
        let m = MatrixJson::from_matrix(&s.matrix);
        SuperOperatorJson {
            dim: s.dim,
            re: m.re,
            im: m.im,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn hs_inner_examples() {
        let z = Operator::sigma_z();
        assert_eq!(hs_inner(&z, &z).unwrap(), c(2.0));
        assert_eq!(
            hs_inner(&Operator::identity(2), &Operator::sigma_x()).unwrap(),
            c(0.0)
        );
        let e01 = Operator::unit(2, 0, 1);
        assert_eq!(hs_inner(&e01, &e01).unwrap(), c(1.0));
        assert!(matches!(
            hs_inner(&e01, &Operator::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn elementary_basis_d2() {
        let b = make_basis(2, BasisKind::ElementaryUnits).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.elements[1], Operator::unit(2, 0, 1));
        assert_eq!(b.elements[2], Operator::unit(2, 1, 0));
    }

    #[test]
    fn gell_mann_d2_is_pauli() {
        let b = make_basis(2, BasisKind::GeneralizedGellMann).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            Operator::identity(2),
            Operator::sigma_x(),
            Operator::sigma_y(),
            Operator::sigma_z(),
        ];
        for (f, e) in b.elements.iter().zip(&expected) {
            assert!((f - &e.scale_re(r)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn gram_is_identity_for_all_dims() {
        for d in MIN_DIM..=MAX_DIM {
            for kind in [BasisKind::ElementaryUnits, BasisKind::GeneralizedGellMann] {
                let b = make_basis(d, kind).unwrap();
                assert_eq!(b.len(), d * d);
                let g = b.gram();
                let dev = (g - DMatrix::identity(d * d, d * d)).map(|z| z.norm()).max();
                assert!(dev <= EXACT_TOL, "d={d} {kind:?}: {dev}");
            }
            let gm = make_basis(d, BasisKind::GeneralizedGellMann).unwrap();
            for f in &gm.elements[1..] {
                assert!(f.is_hermitian(EXACT_TOL));
                assert!(f.trace().norm() <= EXACT_TOL);
            }
        }
    }

    #[test]
    fn unsupported_dimensions() {
        assert!(matches!(
            make_basis(1, BasisKind::ElementaryUnits),
            Err(Error::UnsupportedDimension(1))
        ));
        assert!(make_basis(9, BasisKind::GeneralizedGellMann).is_err());
    }

    #[test]
    fn sandwich_commutator_matches_commutator_generator() {
        let h = Operator::sigma_x().scale_re(0.7);
        let id = Operator::identity(2);
        let l = SuperOperator::from_sandwich(&[
            SandwichTerm::new(-I, h.clone(), id.clone()),
            SandwichTerm::new(I, id, h.clone()),
        ])
        .unwrap();
        let direct = SuperOperator::commutator_generator(&h);
        assert!((&l - &direct).max_abs() < 1e-15);
    }

    #[test]
    fn sandwich_apply_matches_direct_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3, 4] {
            let terms: Vec<_> = (0..3)
                .map(|_| {
                    SandwichTerm::new(
                        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                        Operator::random(d, &mut rng),
                        Operator::random(d, &mut rng),
                    )
                })
                .collect();
            let l = SuperOperator::from_sandwich(&terms).unwrap();
            for _ in 0..50 {
                let x = Operator::random(d, &mut rng);
                let mut direct = Operator::zeros(d);
                for t in &terms {
                    direct = &direct + &(&(&t.left * &x) * &t.right).scale(t.weight);
                }
                assert!((&l.apply(&x) - &direct).max_abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dephasing_sandwich() {
        let gamma = 0.3;
        let z = Operator::sigma_z();
        let id = Operator::identity(2);
        let l = SuperOperator::from_sandwich(&[
            SandwichTerm::new(c(gamma), z.clone(), z.clone()),
            SandwichTerm::new(c(-gamma), id.clone(), id),
        ])
        .unwrap();
        let x = Operator::unit(2, 0, 1);
        assert_abs_diff_eq!(l.apply(&x).get(0, 1).re, -2.0 * gamma, epsilon = 1e-15);
        let p = Operator::unit(2, 0, 0);
        assert!(l.apply(&p).max_abs() < 1e-15);
    }

    #[test]
    fn lindblad_examples() {
        let omega = 1.3;
        let h = Operator::sigma_z().scale_re(omega / 2.0);
        let pure = lindblad_generator(&h, &[]).unwrap();
        assert!((&pure - &SuperOperator::commutator_generator(&h)).max_abs() < 1e-15);

        let deph = lindblad_generator(&Operator::zeros(2), &[(0.4, Operator::sigma_z())]).unwrap();
        let x = Operator::unit(2, 0, 1);
        assert_abs_diff_eq!(deph.apply(&x).get(0, 1).re, -0.8, epsilon = 1e-15);

        let damp = lindblad_generator(&Operator::zeros(2), &[(0.5, Operator::sigma_minus())]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = Operator::random(2, &mut rng);
            assert!(damp.apply(&x).trace().norm() <= 1e-14);
        }
        let r = check_htp(&damp);
        assert!(r.passes());

        let bad = Operator::sigma_plus();
        assert!(matches!(
            lindblad_generator(&bad, &[]),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn random_terms_are_htp() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in MIN_DIM..=MAX_DIM {
            let l = SuperOperator::from_sandwich(&random_htp_terms(d, &mut rng)).unwrap();
            assert!(check_htp(&l).passes(), "d={d}");
        }
    }

    #[test]
    fn htp_flags() {
        let deph = lindblad_generator(&Operator::zeros(2), &[(1.0, Operator::sigma_z())]).unwrap();
        assert!(check_htp(&deph).passes());

        let left_only = SuperOperator::from_sandwich(&[SandwichTerm::new(
            c(1.0),
            Operator::sigma_plus(),
            Operator::identity(2),
        )])
        .unwrap();
        let r = check_htp(&left_only);
        assert!(!r.hermiticity_preserving);
        assert!(!r.trace_annihilating);

        let comm = SuperOperator::commutator_generator(&Operator::sigma_x());
        let r = check_htp(&comm);
        assert!(r.hermiticity_preserving && r.trace_annihilating);
    }

    #[test]
    fn basis_images_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2, 3, 5] {
            let terms: Vec<_> = (0..4)
                .map(|_| {
                    SandwichTerm::new(
                        C64::new(rng.random::<f64>(), rng.random::<f64>()),
                        Operator::random(d, &mut rng),
                        Operator::random(d, &mut rng),
                    )
                })
                .collect();
            let l = SuperOperator::from_sandwich(&terms).unwrap();
            for kind in [BasisKind::ElementaryUnits, BasisKind::GeneralizedGellMann] {
                let b = make_basis(d, kind).unwrap();
                let images: Vec<_> = b.elements.iter().map(|f| l.apply(f)).collect();
                let back = SuperOperator::from_basis_images(&b, &images).unwrap();
                assert!((&back - &l).max_abs() <= 1e-12 * l.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn basis_expansion_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in MIN_DIM..=MAX_DIM {
            let x = Operator::random(d, &mut rng);
            for kind in [BasisKind::ElementaryUnits, BasisKind::GeneralizedGellMann] {
                let b = make_basis(d, kind).unwrap();
                let back = b.reconstruct(&b.coefficients(&x).unwrap()).unwrap();
                assert!((&back - &x).max_abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn json_layout_is_row_major() {
        let op = Operator::sigma_plus();
        let v = serde_json::to_value(&op).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["re"], serde_json::json!([0.0, 1.0, 0.0, 0.0]));
        let back: Operator = serde_json::from_value(v).unwrap();
        assert_eq!(back, op);

        let l = SuperOperator::commutator_generator(&Operator::sigma_z());
        let v = serde_json::to_value(&l).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["im"].as_array().unwrap().len(), 16);
        let back: SuperOperator = serde_json::from_value(v).unwrap();
        assert_eq!(back, l);

        let bad = serde_json::json!({"dim": 2, "re": [1.0], "im": [0.0]});
        assert!(serde_json::from_value::<Operator>(bad).is_err());
    }
}

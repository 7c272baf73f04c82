//! Minimal-dissipation effective Hamiltonian and the canonical split of a
//! generator into a commutator and a dissipator with traceless jump operators.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::superop::{
    check_htp, make_basis, BasisKind, MatrixJson, Operator, OperatorBasis, SandwichTerm,
    SuperOperator,
};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Relative floor below which Kossakowski eigenvalues are not reported as jumps.
pub const RATE_THRESHOLD: f64 = 1e-12;

/// Samples per deterministic Monte-Carlo chunk. Each chunk owns one RNG stream.
const MC_CHUNK: usize = 4096;
pub const MC_MIN_SAMPLES: usize = 1000;

fn require_htp(l: &SuperOperator) -> Result<()> {
    let report = check_htp(l);
    if report.passes() {
        Ok(())
    } else {
        Err(report.into_error())
    }
}

/// `K = (1/2id) sum_jk [|j><k|, L[|k><j|]]`.
pub fn effective_hamiltonian(l: &SuperOperator) -> Result<Operator> {
    require_htp(l)?;
    Ok(k_elementary(l))
}

fn k_elementary(l: &SuperOperator) -> Operator {
    let d = l.dim();
    let m = l.matrix();
    let mut acc = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            // L[|k><j|] is column j*d + k of the matrix.
            let col = m.column(j * d + k);
            let img = DMatrix::from_column_slice(d, d, col.as_slice());
            // |j><k| Y - Y |j><k|
            for c in 0..d {
                acc[(j, c)] += img[(k, c)];
            }
            for r in 0..d {
                acc[(r, k)] -= img[(r, j)];
            }
        }
    }
    let k = Operator::from_matrix_unchecked(acc / (2.0 * I * d as f64));
    k.real_part().traceless_part()
}

/// `K = (1/2id) sum_j [F_j, L[F_j]]` over the Hermitian traceless Gell-Mann
/// elements `F_j`, orthonormal under the Hilbert-Schmidt product.
pub fn effective_hamiltonian_su(l: &SuperOperator) -> Result<Operator> {
    require_htp(l)?;
    let d = l.dim();
    let basis = make_basis(d, BasisKind::GeneralizedGellMann)?;
    let mut acc = Operator::zeros(d);
    for f in &basis.elements[1..] {
        acc = &acc + &f.commutator(&l.apply(f));
    }
    Ok(acc
        .scale(1.0 / (2.0 * I * d as f64))
        .real_part()
        .traceless_part())
}

/// `K = (1/2id) sum w (Tr(V) W - Tr(W) V)` for `L[X] = sum w V X W`.
pub fn effective_hamiltonian_pseudokraus(terms: &[SandwichTerm]) -> Result<Operator> {
    let d = terms
        .first()
        .map(|t| t.left.dim())
        .ok_or_else(|| Error::InvalidParameter("no sandwich terms".into()))?;
    let mut acc = Operator::zeros(d);
    for t in terms {
        for op in [&t.left, &t.right] {
            if op.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: op.dim(),
                });
            }
        }
        let part = &t.right.scale(t.left.trace()) - &t.left.scale(t.right.trace());
        acc = &acc + &part.scale(t.weight);
    }
    Ok(acc.scale(1.0 / (2.0 * I * d as f64)))
}

/// Average fidelities between `-i[H_j, .]` and `L` for the normalized
/// traceless Gell-Mann elements `H_j`:
/// `F_j = 1/(d(d+1)) sum_ac Tr{-i[H_j, |a><c|] L[|c><a|]}`.
pub fn fidelity_weights(l: &SuperOperator) -> Result<Vec<f64>> {
    require_htp(l)?;
    let d = l.dim();
    let basis = make_basis(d, BasisKind::GeneralizedGellMann)?;
    let images: Vec<Vec<Operator>> = (0..d)
        .map(|c| (0..d).map(|a| l.apply(&Operator::unit(d, c, a))).collect())
        .collect();
    let norm = 1.0 / (d * (d + 1)) as f64;
    let weights = basis.elements[1..]
        .iter()
        .map(|h| {
            let mut sum = C64::new(0.0, 0.0);
            for a in 0..d {
                for c in 0..d {
                    let comm = h.commutator(&Operator::unit(d, a, c)).scale(-I);
                    sum += (&comm * &images[c][a]).trace();
                }
            }
            sum.re * norm
        })
        .collect();
    Ok(weights)
}

/// `K = (d+1)/2 sum_j F_j H_j`.
pub fn effective_hamiltonian_from_fidelities(d: usize, weights: &[f64]) -> Result<Operator> {
    let basis = make_basis(d, BasisKind::GeneralizedGellMann)?;
    if weights.len() != basis.len() - 1 {
        return Err(Error::DimensionMismatch {
            expected: basis.len() - 1,
            found: weights.len(),
        });
    }
    let mut acc = Operator::zeros(d);
    for (h, w) in basis.elements[1..].iter().zip(weights) {
        acc = &acc + &h.scale_re(*w);
    }
    Ok(acc.scale_re(0.5 * (d + 1) as f64))
}

#[derive(Clone, Debug, Serialize)]
pub struct Jump {
    pub rate: f64,
    pub op: Operator,
}

/// `L = -i[k, .] + dissipator`, with the dissipator expanded in the traceless
/// Gell-Mann sub-basis as
/// `sum_ab kossakowski[a, b] (F_a X F_b^dagger - 1/2 {F_b^dagger F_a, X})`.
#[derive(Clone, Debug)]
pub struct GeneratorSplit {
    pub k: Operator,
    pub dissipator: SuperOperator,
    pub kossakowski: DMatrix<C64>,
    pub jumps: Vec<Jump>,
}

impl Serialize for GeneratorSplit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            k: &'a Operator,
            kossakowski: MatrixJson,
            jumps: &'a [Jump],
        }
        Repr {
            k: &self.k,
            kossakowski: MatrixJson::from_matrix(&self.kossakowski),
            jumps: &self.jumps,
        }
        .serialize(serializer)
    }
}

impl GeneratorSplit {
    /// `-i[k, .] + dissipator`.
    pub fn reconstruct(&self) -> SuperOperator {
        &SuperOperator::commutator_generator(&self.k) + &self.dissipator
    }
}

/// Coefficients `l_ab` of `L = sum_ab l_ab F_a . F_b^dagger`.
fn sandwich_coefficients(l: &SuperOperator, basis: &OperatorBasis) -> DMatrix<C64> {
    let n = basis.len();
    let m = l.matrix();
    DMatrix::from_fn(n, n, |a, b| {
        let fa = basis.elements[a].matrix();
        let fb = basis.elements[b].matrix();
        let e = fb.map(|z| z.conj()).kronecker(fa);
        e.iter().zip(m.iter()).map(|(x, y)| x.conj() * y).sum()
    })
}

pub fn split(l: &SuperOperator) -> Result<GeneratorSplit> {
    require_htp(l)?;
    let d = l.dim();
    let k = k_elementary(l);
    let dissipator = l - &SuperOperator::commutator_generator(&k);
    let basis = make_basis(d, BasisKind::GeneralizedGellMann)?;
    let full = sandwich_coefficients(&dissipator, &basis);
    let n = d * d - 1;
    let c = full.view((1, 1), (n, n)).into_owned();
    let c = (&c + c.adjoint()) * C64::new(0.5, 0.0);

    let eig = c.clone().symmetric_eigen();
    let floor = RATE_THRESHOLD * c.norm().max(l.norm());
    let mut jumps: Vec<Jump> = Vec::new();
    for (idx, &rate) in eig.eigenvalues.iter().enumerate() {
        if rate.abs() <= floor {
            continue;
        }
        let u = eig.eigenvectors.column(idx);
        // Fix the eigenvector phase so the largest coefficient is real positive.
        let pivot = u
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        let mut op = Operator::zeros(d);
        for (f, coef) in basis.elements[1..].iter().zip(u.iter()) {
            op = &op + &f.scale(coef * phase);
        }
        jumps.push(Jump { rate, op });
    }
    jumps.sort_by(|a, b| b.rate.total_cmp(&a.rate));

    Ok(GeneratorSplit {
        k,
        dissipator,
        kossakowski: c,
        jumps,
    })
}

/// Monte-Carlo estimate of `K = (d+1) Im E[P L[P]]` over Haar-random pure
/// states `P`, with per-entry standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct HaarEstimate {
    pub estimate: Operator,
    /// Largest per-entry standard error over real and imaginary parts.
    pub stderr: f64,
    #[serde(serialize_with = "serialize_real_matrix")]
    pub stderr_re: DMatrix<f64>,
    #[serde(serialize_with = "serialize_real_matrix")]
    pub stderr_im: DMatrix<f64>,
    pub samples: usize,
    pub seed: u64,
}

fn serialize_real_matrix<S: Serializer>(
    m: &DMatrix<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(serializer)
}

impl HaarEstimate {
    /// Largest deviation from `k` in units of the matching per-entry stderr.
    pub fn z_score(&self, k: &Operator) -> f64 {
        let d = k.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let diff = self.estimate.get(i, j) - k.get(i, j);
                worst = worst.max(ratio(diff.re, self.stderr_re[(i, j)]));
                worst = worst.max(ratio(diff.im, self.stderr_im[(i, j)]));
            }
        }
        worst
    }
}

fn ratio(diff: f64, se: f64) -> f64 {
    if diff.abs() <= 1e-13 {
        0.0
    } else if se > 0.0 {
        diff.abs() / se
    } else {
        f64::INFINITY
    }
}

struct Moments {
    sum: DMatrix<C64>,
    sum_sq_re: DMatrix<f64>,
    sum_sq_im: DMatrix<f64>,
}

fn mc_chunk(l: &SuperOperator, seed: u64, chunk: u64, count: usize) -> Moments {
    let d = l.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let scale = (d + 1) as f64;
    let mut m = Moments {
        sum: DMatrix::zeros(d, d),
        sum_sq_re: DMatrix::zeros(d, d),
        sum_sq_im: DMatrix::zeros(d, d),
    };
    for _ in 0..count {
        let mut psi = nalgebra::DVector::<C64>::from_fn(d, |_, _| {
            C64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        });
        let n = psi.norm();
        psi /= C64::new(n, 0.0);
        let p = Operator::from_matrix_unchecked(&psi * psi.adjoint());
        let x = &p * &l.apply(&p);
        let y = x.imaginary_part().scale_re(scale);
        for (i, z) in y.matrix().iter().enumerate() {
            m.sum[i] += z;
            m.sum_sq_re[i] += z.re * z.re;
            m.sum_sq_im[i] += z.im * z.im;
        }
    }
    m
}

/// Samples are drawn in fixed chunks of 4096, chunk `c` using stream `c` of a
/// ChaCha generator seeded with `seed`; chunks are reduced in index order, so
/// the result does not depend on the number of worker threads.
pub fn haar_mc_effective_hamiltonian(
    l: &SuperOperator,
    samples: usize,
    seed: u64,
) -> Result<HaarEstimate> {
    if samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "at least {MC_MIN_SAMPLES} Monte-Carlo samples required, got {samples}"
        )));
    }
    let d = l.dim();
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            mc_chunk(l, seed, c as u64, count)
        })
        .collect();

    let mut total = Moments {
        sum: DMatrix::zeros(d, d),
        sum_sq_re: DMatrix::zeros(d, d),
        sum_sq_im: DMatrix::zeros(d, d),
    };
    for p in &parts {
        total.sum += &p.sum;
        total.sum_sq_re += &p.sum_sq_re;
        total.sum_sq_im += &p.sum_sq_im;
    }
    let n = samples as f64;
    let mean = &total.sum / C64::new(n, 0.0);
    let se = |sq: f64, mu: f64| ((sq / n - mu * mu).max(0.0) * n / (n - 1.0) / n).sqrt();
    let stderr_re = DMatrix::from_fn(d, d, |i, j| se(total.sum_sq_re[(i, j)], mean[(i, j)].re));
    let stderr_im = DMatrix::from_fn(d, d, |i, j| se(total.sum_sq_im[(i, j)], mean[(i, j)].im));
    let stderr = stderr_re.max().max(stderr_im.max());
    Ok(HaarEstimate {
        estimate: Operator::from_matrix_unchecked(mean),
        stderr,
        stderr_re,
        stderr_im,
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::{lindblad_generator, random_htp_terms};
    use proptest::prelude::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn dephasing(gamma: f64) -> (Vec<SandwichTerm>, SuperOperator) {
        let z = Operator::sigma_z();
        let id = Operator::identity(2);
        let terms = vec![
            SandwichTerm::new(c(gamma), z.clone(), z),
            SandwichTerm::new(c(-gamma), id.clone(), id),
        ];
        let l = SuperOperator::from_sandwich(&terms).unwrap();
        (terms, l)
    }

    fn shifted_damping(gamma: f64, shift: f64) -> (Vec<SandwichTerm>, SuperOperator) {
        let v = &Operator::sigma_minus() + &Operator::identity(2).scale_re(shift);
        let terms = crate::superop::lindblad_terms(&Operator::zeros(2), &[(gamma, v.clone())]);
        let l = lindblad_generator(&Operator::zeros(2), &[(gamma, v)]).unwrap();
        (terms, l)
    }

    fn close(a: &Operator, b: &Operator, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let h = Operator::sigma_z().scale_re(0.5);
        let l = SuperOperator::commutator_generator(&h);
        assert!(close(&effective_hamiltonian(&l).unwrap(), &h, 1e-15));

        let (_, deph) = dephasing(0.7);
        assert!(effective_hamiltonian(&deph).unwrap().max_abs() <= 1e-15);

        let (gamma, shift) = (0.8, 0.3);
        let (_, l) = shifted_damping(gamma, shift);
        let expected = Operator::sigma_y().scale_re(gamma * shift / 2.0);
        assert!(close(&effective_hamiltonian(&l).unwrap(), &expected, 1e-14));
    }

    #[test]
    fn rejects_non_htp() {
        let bad = SuperOperator::from_sandwich(&[SandwichTerm::new(
            c(1.0),
            Operator::sigma_plus(),
            Operator::identity(2),
        )])
        .unwrap();
        assert!(matches!(
            effective_hamiltonian(&bad),
            Err(Error::NotHtp { .. })
        ));
        assert!(split(&bad).is_err());
        assert!(effective_hamiltonian_su(&bad).is_err());
    }

    #[test]
    fn su_examples() {
        let (_, deph) = dephasing(0.4);
        assert!(effective_hamiltonian_su(&deph).unwrap().max_abs() <= 1e-15);
        let l = SuperOperator::commutator_generator(&Operator::sigma_x());
        assert!(close(
            &effective_hamiltonian_su(&l).unwrap(),
            &Operator::sigma_x(),
            1e-15
        ));
    }

    #[test]
    fn pseudokraus_examples() {
        let h = Operator::sigma_z().scale_re(0.5);
        let id = Operator::identity(2);
        let terms = vec![
            SandwichTerm::new(-I, h.clone(), id.clone()),
            SandwichTerm::new(I, id.clone(), h.clone()),
        ];
        assert!(close(
            &effective_hamiltonian_pseudokraus(&terms).unwrap(),
            &h,
            1e-15
        ));

        let (terms, _) = shifted_damping(1.0, 0.3);
        let expected = Operator::sigma_y().scale_re(0.15);
        assert!(close(
            &effective_hamiltonian_pseudokraus(&terms).unwrap(),
            &expected,
            1e-15
        ));

        let zero = vec![SandwichTerm::new(c(0.0), Operator::sigma_x(), Operator::sigma_y())];
        assert_eq!(effective_hamiltonian_pseudokraus(&zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn split_dephasing() {
        let gamma = 0.35;
        let (_, l) = dephasing(gamma);
        let s = split(&l).unwrap();
        assert!(s.k.max_abs() <= 1e-15);
        assert_eq!(s.jumps.len(), 1);
        let j = &s.jumps[0];
        assert!((j.rate - 2.0 * gamma).abs() <= 1e-14);
        let expected = Operator::sigma_z().scale_re(std::f64::consts::FRAC_1_SQRT_2);
        assert!(close(&j.op, &expected, 1e-14));
    }

    #[test]
    fn split_commutator_has_no_jumps() {
        let l = SuperOperator::commutator_generator(&Operator::sigma_x().scale_re(1.7));
        let s = split(&l).unwrap();
        assert!(s.dissipator.norm() <= 1e-12);
        assert!(s.jumps.is_empty());
    }

    #[test]
    fn split_amplitude_damping() {
        let gamma = 0.6;
        let l = lindblad_generator(&Operator::zeros(2), &[(gamma, Operator::sigma_minus())]).unwrap();
        let s = split(&l).unwrap();
        assert!(s.k.max_abs() <= 1e-15);
        assert_eq!(s.jumps.len(), 1);
        assert!((s.jumps[0].rate - gamma).abs() <= 1e-14);
        // Unit-norm jump proportional to sigma_minus.
        let op = &s.jumps[0].op;
        assert!((op.get(1, 0).norm() - 1.0).abs() <= 1e-14);
        assert!(op.get(0, 1).norm() <= 1e-14);
        assert!(op.get(0, 0).norm() <= 1e-14 && op.get(1, 1).norm() <= 1e-14);
    }

    #[test]
    fn split_json_layout() {
        let (_, l) = dephasing(0.5);
        let v = serde_json::to_value(split(&l).unwrap()).unwrap();
        assert_eq!(v["k"]["dim"], 2);
        assert_eq!(v["kossakowski"]["dim"], 3);
        assert_eq!(v["jumps"].as_array().unwrap().len(), 1);
        assert!(v["jumps"][0]["rate"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let l = SuperOperator::commutator_generator(&Operator::sigma_z().scale_re(0.5));
        let w = fidelity_weights(&l).unwrap();
        assert!(w[0].abs() <= 1e-15 && w[1].abs() <= 1e-15);
        assert!(w[2].abs() > 0.1);

        let (_, deph) = dephasing(0.9);
        assert!(fidelity_weights(&deph).unwrap().iter().all(|w| w.abs() <= 1e-12));
    }

    #[test]
    fn haar_commutator_and_dephasing() {
        let l = SuperOperator::commutator_generator(&Operator::sigma_x());
        let est = haar_mc_effective_hamiltonian(&l, 100_000, 7).unwrap();
        assert!(est.z_score(&Operator::sigma_x()) <= 5.0);

        let (_, deph) = dephasing(0.5);
        let est = haar_mc_effective_hamiltonian(&deph, 100_000, 8).unwrap();
        assert!(est.z_score(&Operator::zeros(2)) <= 5.0);
    }

    #[test]
    fn haar_is_deterministic() {
        let (_, l) = shifted_damping(1.0, 0.3);
        let a = haar_mc_effective_hamiltonian(&l, 5000, 99).unwrap();
        let b = haar_mc_effective_hamiltonian(&l, 5000, 99).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| haar_mc_effective_hamiltonian(&l, 5000, 99).unwrap());
        assert_eq!(a.estimate, c.estimate);
        assert!(haar_mc_effective_hamiltonian(&l, 999, 1).is_err());
    }

    fn random_generator(d: usize, seed: u64) -> (Vec<SandwichTerm>, SuperOperator) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = random_htp_terms(d, &mut rng);
        let l = SuperOperator::from_sandwich(&terms).unwrap();
        (terms, l)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn routes_agree(d in 2usize..=5, seed in any::<u64>()) {
            let (terms, l) = random_generator(d, seed);
            let k = effective_hamiltonian(&l).unwrap();
            let scale = k.max_abs().max(1.0);
            let su = effective_hamiltonian_su(&l).unwrap();
            let pk = effective_hamiltonian_pseudokraus(&terms).unwrap();
            let fw = effective_hamiltonian_from_fidelities(d, &fidelity_weights(&l).unwrap()).unwrap();
            prop_assert!((&k - &su).max_abs() <= 1e-12 * scale);
            prop_assert!((&k - &pk).max_abs() <= 1e-12 * scale);
            prop_assert!((&k - &fw).max_abs() <= 1e-12 * scale);
            prop_assert!(k.is_hermitian(1e-12 * scale));
            prop_assert!(k.trace().norm() <= 1e-12 * scale);
        }

        #[test]
        fn projection_is_idempotent(d in 2usize..=4, seed in any::<u64>()) {
            let (_, l) = random_generator(d, seed);
            let k = effective_hamiltonian(&l).unwrap();
            let again = effective_hamiltonian(&SuperOperator::commutator_generator(&k)).unwrap();
            prop_assert!((&k - &again).max_abs() <= 1e-12 * k.max_abs().max(1.0));
        }

        #[test]
        fn dissipator_is_orthogonal(d in 2usize..=4, seed in any::<u64>()) {
            let (_, l) = random_generator(d, seed);
            let s = split(&l).unwrap();
            let scale = l.max_abs().max(1.0);
            prop_assert!(effective_hamiltonian(&s.dissipator).unwrap().max_abs() <= 1e-10 * scale);
            prop_assert!((&s.reconstruct() - &l).max_abs() <= 1e-10 * scale);
            let c = &s.kossakowski;
            prop_assert!((c - c.adjoint()).map(|z| z.norm()).max() <= 1e-12 * scale);
            for (i, a) in s.jumps.iter().enumerate() {
                prop_assert!(a.op.trace().norm() <= 1e-10);
                for b in &s.jumps[i + 1..] {
                    let ov = crate::superop::hs_inner(&a.op, &b.op).unwrap();
                    prop_assert!(ov.norm() <= 1e-10);
                }
            }
            let rebuilt = crate::superop::lindblad_generator(
                &s.k,
                &s.jumps.iter().map(|j| (j.rate, j.op.clone())).collect::<Vec<_>>(),
            ).unwrap();
            prop_assert!((&rebuilt - &l).max_abs() <= 1e-10 * scale);
        }

        #[test]
        fn linearity(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let (_, l1) = random_generator(3, seed);
            let (_, l2) = random_generator(3, seed.wrapping_add(1));
            let combo = &l1.scale(c(alpha)) + &l2.scale(c(beta));
            let lhs = effective_hamiltonian(&combo).unwrap();
            let rhs = &effective_hamiltonian(&l1).unwrap().scale_re(alpha)
                + &effective_hamiltonian(&l2).unwrap().scale_re(beta);
            prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * lhs.max_abs().max(1.0));
        }

        #[test]
        fn traceless_lindblad_recovers_h(d in 2usize..=5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = Operator::random_hermitian(d, &mut rng).traceless_part();
            let jumps: Vec<_> = (0..2)
                .map(|i| (0.3 + i as f64, Operator::random(d, &mut rng).traceless_part()))
                .collect();
            let l = lindblad_generator(&h, &jumps).unwrap();
            let k = effective_hamiltonian(&l).unwrap();
            prop_assert!((&k - &h).max_abs() <= 1e-12 * h.max_abs().max(1.0));
        }
    }
}

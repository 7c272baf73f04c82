//! Bare bath moments by Isserlis pairing and the ordered cumulant recursion.
//!
//! The bare moment for left times `tau_1..tau_k` and right times `s_1..s_m` is
//!
//! `D(tau; s) = <B(s_m) ... B(s_1) B(tau_1) ... B(tau_k)>`,
//!
//! the trace of `B^R(s_1) ... B^R(s_m) B^L(tau_1) ... B^L(tau_k)` applied to the
//! initial bath state, where `B^L X = B X` and `B^R X = X B`.

use std::cmp::Ordering;

use super::{thermal_correlation, BathSpec, CorrelationTable};
use crate::{Error, Result, C64};

pub const MAX_MOMENT_ORDER: usize = 6;
const MAX_LIST: usize = MAX_MOMENT_ORDER + 1;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Source of two-point values and means for abstract time labels.
pub(crate) trait Correlator {
    /// `<dB(a) dB(b)>`.
    fn pair(&self, a: usize, b: usize) -> C64;
    fn mean(&self, a: usize) -> f64;
    fn has_mean(&self) -> bool;
    fn cmp_time(&self, a: usize, b: usize) -> Ordering;
}

/// Labels are grid indices of a [`CorrelationTable`].
pub(crate) struct GridCorrelator<'a>(pub &'a CorrelationTable);

impl Correlator for GridCorrelator<'_> {
    #[inline]
    fn pair(&self, a: usize, b: usize) -> C64 {
        self.0.pair(a, b)
    }
    #[inline]
    fn mean(&self, a: usize) -> f64 {
        self.0.mean(a)
    }
    #[inline]
    fn has_mean(&self) -> bool {
        self.0.has_mean()
    }
    #[inline]
    fn cmp_time(&self, a: usize, b: usize) -> Ordering {
        a.cmp(&b)
    }
}

/// Labels index a small set of explicit times.
struct PointCorrelator {
    times: Vec<f64>,
    pairs: Vec<C64>,
    means: Vec<f64>,
    has_mean: bool,
}

impl PointCorrelator {
    fn new(bath: &BathSpec, times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        let mut pairs = vec![ZERO; n * n];
        for a in 0..n {
            for b in 0..n {
                pairs[a * n + b] = thermal_correlation(bath, times[a] - times[b])?;
            }
        }
        let means = times.iter().map(|&t| bath.mean_at(t)).collect();
        Ok(PointCorrelator {
            times,
            pairs,
            means,
            has_mean: bath.has_mean(),
        })
    }
}

impl Correlator for PointCorrelator {
    fn pair(&self, a: usize, b: usize) -> C64 {
        self.pairs[a * self.times.len() + b]
    }
    fn mean(&self, a: usize) -> f64 {
        self.means[a]
    }
    fn has_mean(&self) -> bool {
        self.has_mean
    }
    fn cmp_time(&self, a: usize, b: usize) -> Ordering {
        self.times[a].total_cmp(&self.times[b])
    }
}

/// Gaussian expectation of the operator string `B(x_0) B(x_1) ...`: the first
/// remaining factor either takes the mean or pairs with a later factor.
fn wick_mask<C: Correlator>(c: &C, string: &[usize], mask: u32) -> C64 {
    if mask == 0 {
        return ONE;
    }
    let p = mask.trailing_zeros() as usize;
    let rest = mask & (mask - 1);
    let mut acc = if c.has_mean() {
        c.mean(string[p]) * wick_mask(c, string, rest)
    } else {
        ZERO
    };
    let mut others = rest;
    while others != 0 {
        let q = others.trailing_zeros() as usize;
        others &= others - 1;
        acc += c.pair(string[p], string[q]) * wick_mask(c, string, rest & !(1 << q));
    }
    acc
}

pub(crate) fn wick_string<C: Correlator>(c: &C, string: &[usize]) -> C64 {
    let n = string.len();
    if !c.has_mean() && n % 2 == 1 {
        return ZERO;
    }
    wick_mask(c, string, (1u32 << n) - 1)
}

fn bare_moment<C: Correlator>(c: &C, tau: &[usize], s: &[usize]) -> C64 {
    let mut string = [0usize; 2 * MAX_LIST];
    let m = s.len();
    for (i, &x) in s.iter().rev().enumerate() {
        string[i] = x;
    }
    string[m..m + tau.len()].copy_from_slice(tau);
    wick_string(c, &string[..m + tau.len()])
}

/// Weight of the ordering step functions along a list: zero unless the list is
/// non-increasing, `1/g!` for each group of `g` coincident free times. A pinned
/// first element counts as strictly later than any tie.
fn chain_weight<C: Correlator>(c: &C, list: &[usize], pinned_first: bool) -> f64 {
    let mut weight = 1.0;
    let mut run = 1usize;
    for i in 1..list.len() {
        match c.cmp_time(list[i - 1], list[i]) {
            Ordering::Less => return 0.0,
            Ordering::Equal if !(i == 1 && pinned_first) => {
                run += 1;
                weight /= run as f64;
            }
            _ => run = 1,
        }
    }
    weight
}

/// Which time is fixed to the current time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pin {
    /// `tau_1 = t`.
    Left,
    /// `s_1 = t`.
    Right,
}

/// Ordered cumulant for label lists without ordering checks. The lists need
/// not be descending: the step functions inside each bare moment segment
/// select the ordered parts.
pub(crate) fn cumulant_unchecked<C: Correlator>(c: &C, tau: &[usize], s: &[usize], pin: Pin) -> C64 {
    let (k, m) = (tau.len(), s.len());
    debug_assert!(k + m <= MAX_MOMENT_ORDER);
    let seg = |l0: usize, l1: usize, r0: usize, r1: usize| -> C64 {
        let wl = chain_weight(c, &tau[l0..l1], pin == Pin::Left && l0 == 0);
        if wl == 0.0 {
            return ZERO;
        }
        let wr = chain_weight(c, &s[r0..r1], pin == Pin::Right && r0 == 0);
        if wr == 0.0 {
            return ZERO;
        }
        bare_moment(c, &tau[l0..l1], &s[r0..r1]) * (wl * wr)
    };
    let (l_min, r_min) = match pin {
        Pin::Left => (1, 0),
        Pin::Right => (0, 1),
    };
    let mut f = [[ZERO; MAX_LIST]; MAX_LIST];
    for l in l_min..=k {
        for r in r_min..=m {
            let mut value = seg(0, l, 0, r);
            for lp in l_min..=l {
                for rp in r_min..=r {
                    if (lp, rp) == (l, r) {
                        continue;
                    }
                    let prefix = f[lp][rp];
                    if prefix != ZERO {
                        value -= prefix * seg(lp, l, rp, r);
                    }
                }
            }
            f[l][r] = value;
        }
    }
    f[k][m]
}

fn check_order(n: usize) -> Result<()> {
    if n > MAX_MOMENT_ORDER {
        Err(Error::OrderTooHigh {
            order: n,
            max: MAX_MOMENT_ORDER,
        })
    } else {
        Ok(())
    }
}

/// `D(tau; s) = <B(s_m) ... B(s_1) B(tau_1) ... B(tau_k)>` for a Gaussian bath
/// with mean `m(t)`.
pub fn wick_moment(bath: &BathSpec, left_times: &[f64], right_times: &[f64]) -> Result<C64> {
    check_order(left_times.len() + right_times.len())?;
    let times: Vec<f64> = left_times.iter().chain(right_times).copied().collect();
    let c = PointCorrelator::new(bath, times)?;
    let k = left_times.len();
    let tau: Vec<usize> = (0..k).collect();
    let s: Vec<usize> = (k..k + right_times.len()).collect();
    Ok(bare_moment(&c, &tau, &s))
}

/// Ordered cumulant with the `pin` time equal to the current time `t`, all
/// other times in `[0, t]` and each list non-increasing.
pub fn ordered_cumulant(
    bath: &BathSpec,
    t: f64,
    left_times: &[f64],
    right_times: &[f64],
    pin: Pin,
) -> Result<C64> {
    let n = left_times.len() + right_times.len();
    check_order(n)?;
    let pinned = match pin {
        Pin::Left => left_times.first(),
        Pin::Right => right_times.first(),
    };
    match pinned {
        Some(&p) if (p - t).abs() <= 1e-12 * t.abs().max(1.0) => {}
        _ => {
            return Err(Error::Precondition(format!(
                "the first {} time must equal t = {t}",
                if pin == Pin::Left { "left" } else { "right" }
            )))
        }
    }
    for list in [left_times, right_times] {
        if list.iter().any(|&x| x < 0.0 || x > t * (1.0 + 1e-12)) {
            return Err(Error::Precondition(format!("times must lie in [0, {t}]")));
        }
        if list.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Precondition("time lists must be non-increasing".into()));
        }
    }
    let mut times: Vec<f64> = left_times.iter().chain(right_times).copied().collect();
    // Snap the pinned time so ties with t are detected exactly.
    let pinned_index = if pin == Pin::Left { 0 } else { left_times.len() };
    times[pinned_index] = t;
    let c = PointCorrelator::new(bath, times)?;
    let k = left_times.len();
    let tau: Vec<usize> = (0..k).collect();
    let s: Vec<usize> = (k..n).collect();
    Ok(cumulant_unchecked(&c, &tau, &s, pin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{InverseTemperature, MeanField, Mode, SpectralDensity};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    struct Unit;
    impl Correlator for Unit {
        fn pair(&self, _: usize, _: usize) -> C64 {
            ONE
        }
        fn mean(&self, _: usize) -> f64 {
            0.0
        }
        fn has_mean(&self) -> bool {
            false
        }
        fn cmp_time(&self, a: usize, b: usize) -> Ordering {
            a.cmp(&b)
        }
    }

    fn modes(list: &[(f64, f64)], beta: InverseTemperature) -> BathSpec {
        BathSpec::new(
            SpectralDensity::DiscreteModes {
                modes: list.iter().map(|&(g, omega)| Mode { g, omega }).collect(),
            },
            beta,
        )
    }

    fn ohmic() -> BathSpec {
        BathSpec::new(
            SpectralDensity::OhmicExp {
                alpha: 0.2,
                omega_c: 3.0,
            },
            InverseTemperature::Infinite,
        )
    }

    #[test]
    fn pairing_counts() {
        for (n, count) in [(2usize, 1.0), (4, 3.0), (6, 15.0)] {
            let labels: Vec<usize> = (0..n).collect();
            assert_eq!(wick_string(&Unit, &labels), C64::new(count, 0.0));
        }
        assert_eq!(wick_string(&Unit, &[0, 1, 2]), ZERO);
    }

    #[test]
    fn odd_moments_vanish() {
        let bath = ohmic();
        assert_eq!(wick_moment(&bath, &[0.3], &[]).unwrap(), ZERO);
        assert_eq!(wick_moment(&bath, &[0.3, 0.1], &[0.5]).unwrap(), ZERO);
    }

    #[test]
    fn four_point_isserlis() {
        let bath = ohmic();
        let (t1, t2, t3, t4) = (0.9, 0.2, 1.4, 0.5);
        // String B(s_2) B(s_1) B(tau_1) B(tau_2) with s = (t2, t1), tau = (t3, t4).
        let d = wick_moment(&bath, &[t3, t4], &[t2, t1]).unwrap();
        let c = |a: f64, b: f64| thermal_correlation(&bath, a - b).unwrap();
        let expected = c(t1, t2) * c(t3, t4) + c(t1, t3) * c(t2, t4) + c(t1, t4) * c(t2, t3);
        assert!((d - expected).norm() < 1e-15);
    }

    #[test]
    fn single_moment_with_mean() {
        let bath = ohmic().with_mean(MeanField::Harmonic {
            amplitude: 0.7,
            frequency: 1.1,
            phase: 0.0,
        });
        let d = wick_moment(&bath, &[], &[0.4]).unwrap();
        assert!((d.re - 0.7 * (0.44f64).cos()).abs() < 1e-15 && d.im == 0.0);
        assert!(matches!(
            wick_moment(&bath, &[0.1; 4], &[0.2; 3]),
            Err(Error::OrderTooHigh { order: 7, .. })
        ));
    }

    /// Single truncated mode: `B(t) = g (a e^{-iwt} + a^dag e^{iwt})`.
    struct FockMode {
        a: DMatrix<C64>,
        rho: DMatrix<C64>,
        g: f64,
        omega: f64,
    }

    impl FockMode {
        fn new(g: f64, omega: f64, beta: f64, cutoff: usize, alpha: C64) -> Self {
            let a = DMatrix::from_fn(cutoff, cutoff, |i, j| {
                if j == i + 1 {
                    C64::new((j as f64).sqrt(), 0.0)
                } else {
                    ZERO
                }
            });
            let mut rho = DMatrix::from_fn(cutoff, cutoff, |i, j| {
                if i == j {
                    C64::new((-beta * omega * i as f64).exp(), 0.0)
                } else {
                    ZERO
                }
            });
            let tr = rho.trace();
            rho /= tr;
            let gen = &a.adjoint() * alpha - &a * alpha.conj();
            let disp = gen.exp();
            let rho = &disp * rho * disp.adjoint();
            FockMode { a, rho, g, omega }
        }

        fn b(&self, t: f64) -> DMatrix<C64> {
            let ph = C64::from_polar(1.0, -self.omega * t);
            (&self.a * ph + self.a.adjoint() * ph.conj()) * C64::new(self.g, 0.0)
        }

        /// Apply `B^R(s_1) ... B^R(s_m) B^L(tau_1) ... B^L(tau_k)` to rho as
        /// explicit superoperator matrices and take the trace.
        fn moment(&self, tau: &[f64], s: &[f64]) -> C64 {
            let n = self.a.nrows();
            let id = DMatrix::<C64>::identity(n, n);
            let mut v = nalgebra::DVector::from_column_slice(self.rho.as_slice());
            for &t in tau.iter().rev() {
                v = id.kronecker(&self.b(t)) * v;
            }
            for &t in s.iter().rev() {
                v = self.b(t).transpose().kronecker(&id) * v;
            }
            DMatrix::from_column_slice(n, n, v.as_slice()).trace()
        }
    }

    #[test]
    fn string_order_matches_superoperator_composition() {
        let (g, omega, beta) = (0.6, 1.3, 1.2);
        let alpha = C64::new(0.25, -0.1);
        let bath = modes(&[(g, omega)], InverseTemperature::Finite(beta)).with_mean(
            MeanField::Coherent {
                displacements: vec![[alpha.re, alpha.im]],
            },
        );
        let fock = FockMode::new(g, omega, beta, 24, alpha);
        let cases: [(&[f64], &[f64]); 5] = [
            (&[0.9, 0.3], &[0.7, 0.1]),
            (&[1.5], &[0.2, 0.8, 1.1]),
            (&[0.4, 1.7, 0.6], &[]),
            (&[], &[0.4, 1.7]),
            (&[0.2], &[1.0]),
        ];
        for (tau, s) in cases {
            let exact = fock.moment(tau, s);
            let wick = wick_moment(&bath, tau, s).unwrap();
            assert!((exact - wick).norm() < 1e-9, "{tau:?} {s:?}: {exact} vs {wick}");
        }
    }

    #[test]
    fn low_order_cumulants() {
        let bath = ohmic();
        let t = 1.3;
        assert_eq!(ordered_cumulant(&bath, t, &[t], &[], Pin::Left).unwrap(), ZERO);
        let d2 = ordered_cumulant(&bath, t, &[t], &[0.4], Pin::Left).unwrap();
        assert!((d2 - wick_moment(&bath, &[t], &[0.4]).unwrap()).norm() < 1e-15);
        for (tau, s, pin) in [
            (vec![t, 0.5, 0.2], vec![], Pin::Left),
            (vec![t, 0.5], vec![0.9], Pin::Left),
            (vec![0.5], vec![t, 0.9], Pin::Right),
            (vec![], vec![t, 1.0, 0.1], Pin::Right),
        ] {
            assert_eq!(ordered_cumulant(&bath, t, &tau, &s, pin).unwrap(), ZERO);
        }

        let with_mean = ohmic().with_mean(MeanField::Constant { value: 0.3 });
        let d1 = ordered_cumulant(&with_mean, t, &[t], &[], Pin::Left).unwrap();
        assert!((d1.re - 0.3).abs() < 1e-15);
        // Order two with a mean: the connected part only.
        let d2 = ordered_cumulant(&with_mean, t, &[t], &[0.4], Pin::Left).unwrap();
        let c = thermal_correlation(&bath, 0.4 - t).unwrap();
        assert!((d2 - c).norm() < 1e-15);
    }

    #[test]
    fn precondition_violations() {
        let bath = ohmic();
        assert!(matches!(
            ordered_cumulant(&bath, 1.0, &[0.9], &[], Pin::Left),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            ordered_cumulant(&bath, 1.0, &[1.0, 0.2, 0.5], &[], Pin::Left),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            ordered_cumulant(&bath, 1.0, &[1.0], &[1.2], Pin::Left),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            ordered_cumulant(&bath, 1.0, &[1.0; 4], &[0.5; 3], Pin::Left),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn tie_weights() {
        let c = Unit;
        assert_eq!(chain_weight(&c, &[5, 3, 3, 1], false), 0.5);
        assert_eq!(chain_weight(&c, &[5, 5, 3], true), 1.0);
        assert_eq!(chain_weight(&c, &[5, 5, 5], true), 0.5);
        assert_eq!(chain_weight(&c, &[4, 4, 4], false), 1.0 / 6.0);
        assert_eq!(chain_weight(&c, &[1, 2], false), 0.0);
    }

    fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    proptest! {
        #[test]
        fn hermiticity_seed(
            tau in proptest::collection::vec(0.0f64..3.0, 0..4),
            s in proptest::collection::vec(0.0f64..3.0, 0..3),
            mean in -0.5f64..0.5,
        ) {
            let bath = modes(&[(0.4, 1.1), (0.3, 2.3)], InverseTemperature::Finite(0.8))
                .with_mean(MeanField::Constant { value: mean });
            let d = wick_moment(&bath, &tau, &s).unwrap();
            let swapped = wick_moment(&bath, &s, &tau).unwrap();
            prop_assert!((d - swapped.conj()).norm() <= 1e-12);
        }

        #[test]
        fn second_order_cumulants_add(t in 0.5f64..3.0, x in 0.0f64..1.0, left in any::<bool>()) {
            let (a, b) = ((0.4, 1.1), (0.7, 0.6));
            let beta = InverseTemperature::Finite(1.7);
            let both = modes(&[a, b], beta);
            let s = x * t;
            let (tau, r, pin) = if left { (vec![t], vec![s], Pin::Left) } else { (vec![s], vec![t], Pin::Right) };
            let total = ordered_cumulant(&both, t, &tau, &r, pin).unwrap();
            let parts = ordered_cumulant(&modes(&[a], beta), t, &tau, &r, pin).unwrap()
                + ordered_cumulant(&modes(&[b], beta), t, &tau, &r, pin).unwrap();
            prop_assert!((total - parts).norm() <= 1e-14);
        }

        #[test]
        fn reversal_symmetry(
            t in 0.5f64..3.0,
            free in proptest::collection::vec(0.0f64..1.0, 3),
            k in 1usize..=4,
            mean in -0.5f64..0.5,
        ) {
            let bath = modes(&[(0.5, 0.9), (0.3, 1.9)], InverseTemperature::Finite(1.3))
                .with_mean(MeanField::Constant { value: mean });
            let free: Vec<f64> = free.iter().map(|x| x * t).collect();
            // k left times with tau_1 = t, the rest on the right.
            let mut tau = vec![t];
            tau.extend(sorted_desc(free[..k - 1].to_vec()));
            let s = sorted_desc(free[k - 1..].to_vec());
            let direct = ordered_cumulant(&bath, t, &tau, &s, Pin::Left).unwrap();
            let reversed = ordered_cumulant(&bath, t, &s, &tau, Pin::Right).unwrap();
            // Real part symmetric, imaginary part antisymmetric under reversal.
            prop_assert!((direct.re - reversed.re).abs() <= 1e-12);
            prop_assert!((direct.im + reversed.im).abs() <= 1e-12);
        }
    }
}

//! Exact reduced dynamics of a qubit coupled to a few truncated bosonic modes,
//! `H = H_S + sum_j w_j b_j^dagger b_j + lambda A (x) sum_j g_j (b_j + b_j^dagger)`,
//! the time-local generator extracted from it, and comparisons against the
//! perturbative series.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{integrated_noise, BathSpec, InverseTemperature, MeanField, Mode, SpectralDensity};
use crate::perturbation::{Coupling, KSeries, SpinModel};
use crate::splitting::effective_hamiltonian;
use crate::superop::{Operator, SandwichTerm, SuperOperator};
use crate::{Error, Result, C64};

pub const MAX_TOTAL_DIM: usize = 4096;
pub const TRUNCATION_TOL: f64 = 1e-8;
pub const SINGULAR_VALUE_THRESHOLD: f64 = 1e-8;

/// Environment states with weight below this are dropped from the mixture.
const MIN_STATE_WEIGHT: f64 = 1e-20;
/// Extra Fock levels used when building displaced states before truncation.
const DISPLACEMENT_PADDING: usize = 40;

const I: C64 = C64::new(0.0, 1.0);

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBathSim {
    pub modes: Vec<Mode>,
    pub fock_cutoff: usize,
    pub beta: InverseTemperature,
    /// Coherent displacements `[re, im]`, one per mode; empty for none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub displacements: Vec<[f64; 2]>,
    #[serde(default = "default_true")]
    pub check_truncation: bool,
}

impl DiscreteBathSim {
    pub fn new(modes: Vec<Mode>, fock_cutoff: usize, beta: InverseTemperature) -> Self {
        DiscreteBathSim {
            modes,
            fock_cutoff,
            beta,
            displacements: Vec::new(),
            check_truncation: true,
        }
    }

    pub fn with_displacements(mut self, displacements: Vec<[f64; 2]>) -> Self {
        self.displacements = displacements;
        self
    }

    /// Simulation matching a discrete-mode bath, optionally displaced.
    pub fn from_bath(bath: &BathSpec, fock_cutoff: usize) -> Result<Self> {
        bath.validate()?;
        let modes = match &bath.spectral_density {
            SpectralDensity::DiscreteModes { modes } => modes.clone(),
            _ => {
                return Err(Error::UnsupportedBath(
                    "the exact simulation needs a discrete-mode bath".into(),
                ))
            }
        };
        let displacements = match &bath.mean {
            None => Vec::new(),
            Some(MeanField::Coherent { displacements }) => displacements.clone(),
            Some(_) => {
                return Err(Error::UnsupportedBath(
                    "the exact simulation supports only coherent mean fields".into(),
                ))
            }
        };
        Ok(DiscreteBathSim::new(modes, fock_cutoff, bath.beta).with_displacements(displacements))
    }

    /// The bath seen by the perturbative expansion.
    pub fn bath_spec(&self) -> BathSpec {
        let bath = BathSpec::new(
            SpectralDensity::DiscreteModes {
                modes: self.modes.clone(),
            },
            self.beta,
        );
        if self.displacements.is_empty() {
            bath
        } else {
            bath.with_mean(MeanField::Coherent {
                displacements: self.displacements.clone(),
            })
        }
    }

    pub fn env_dim(&self) -> usize {
        self.fock_cutoff.saturating_pow(self.modes.len() as u32)
    }

    pub fn total_dim(&self) -> usize {
        2usize.saturating_mul(self.env_dim())
    }

    fn with_cutoff(&self, fock_cutoff: usize) -> Self {
        DiscreteBathSim {
            fock_cutoff,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bath_spec().validate()?;
        if self.modes.is_empty() {
            return Err(Error::InvalidParameter("at least one mode is required".into()));
        }
        if self.fock_cutoff < 2 {
            return Err(Error::InvalidParameter("fock_cutoff must be at least 2".into()));
        }
        let dim = self.total_dim();
        if dim > MAX_TOTAL_DIM {
            return Err(Error::DimensionCap {
                dim,
                cap: MAX_TOTAL_DIM,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicalMapSeries {
    pub times: Vec<f64>,
    pub maps: Vec<SuperOperator>,
    /// Exact time derivatives of the maps, when the source provides them.
    pub derivatives: Option<Vec<SuperOperator>>,
    /// Largest entry change of the maps when the Fock cutoff is raised.
    pub truncation_deviation: Option<f64>,
}

impl DynamicalMapSeries {
    /// Maps without derivative information; generators then use finite
    /// differences on the (uniform) time grid.
    pub fn from_maps(times: Vec<f64>, maps: Vec<SuperOperator>) -> Result<Self> {
        if times.len() != maps.len() {
            return Err(Error::GridMismatch(format!(
                "{} times for {} maps",
                times.len(),
                maps.len()
            )));
        }
        Ok(DynamicalMapSeries {
            times,
            maps,
            derivatives: None,
            truncation_deviation: None,
        })
    }
}

/// Single-mode pure-state decomposition of the initial mode state.
fn mode_states(mode: &Mode, cutoff: usize, beta: InverseTemperature, alpha: C64) -> Vec<(f64, DVector<C64>)> {
    let weights: Vec<f64> = match beta {
        InverseTemperature::Infinite => vec![1.0],
        InverseTemperature::Finite(b) => {
            let x = (-b * mode.omega).exp();
            (0..cutoff)
                .map(|n| (1.0 - x) * x.powi(n as i32))
                .take_while(|&p| p > MIN_STATE_WEIGHT)
                .collect()
        }
    };
    if alpha == C64::new(0.0, 0.0) {
        return weights
            .into_iter()
            .enumerate()
            .map(|(n, p)| (p, DVector::from_fn(cutoff, |i, _| C64::new((i == n) as u8 as f64, 0.0))))
            .collect();
    }
    let big = cutoff + DISPLACEMENT_PADDING + (4.0 * alpha.norm_sqr()).ceil() as usize;
    let lowering = DMatrix::from_fn(big, big, |i, j| {
        C64::new(if j == i + 1 { (j as f64).sqrt() } else { 0.0 }, 0.0)
    });
    let generator = lowering.adjoint() * alpha - &lowering * alpha.conj();
    let displacement = generator.exp();
    weights
        .into_iter()
        .enumerate()
        .map(|(n, p)| (p, DVector::from_fn(cutoff, |i, _| displacement[(i, n)])))
        .collect()
}

fn kron_vec(a: &DVector<C64>, b: &DVector<C64>) -> DVector<C64> {
    DVector::from_fn(a.len() * b.len(), |i, _| a[i / b.len()] * b[i % b.len()])
}

/// Eigendecomposition of the full Hamiltonian and the initial product states
/// expressed in its eigenbasis.
struct Propagator {
    vectors: DMatrix<C64>,
    energies: DVector<f64>,
    /// Columns `k * R + r`: `V^dagger (|k> (x) psi_r)`.
    initial: DMatrix<C64>,
    weights: Vec<f64>,
    env_dim: usize,
}

impl Propagator {
    fn new(sim: &DiscreteBathSim, model: &SpinModel) -> Result<Self> {
        sim.validate()?;
        model.validate()?;
        let n = sim.fock_cutoff;
        let env_dim = sim.env_dim();
        let modes = sim.modes.len();

        let lowering = DMatrix::from_fn(n, n, |i, j| {
            C64::new(if j == i + 1 { (j as f64).sqrt() } else { 0.0 }, 0.0)
        });
        let position = &lowering + lowering.adjoint();
        let mut bath_op = DMatrix::<C64>::zeros(env_dim, env_dim);
        let mut env_energy = DVector::<f64>::zeros(env_dim);
        for (j, mode) in sim.modes.iter().enumerate() {
            let before = n.pow(j as u32);
            let after = n.pow((modes - 1 - j) as u32);
            let embed = DMatrix::<C64>::identity(before, before)
                .kronecker(&position)
                .kronecker(&DMatrix::<C64>::identity(after, after));
            bath_op += embed * C64::new(mode.g, 0.0);
            for e in 0..env_dim {
                env_energy[e] += mode.omega * ((e / after) % n) as f64;
            }
        }

        let a = model.coupling.operator();
        let mut h = a.matrix().kronecker(&bath_op) * C64::new(model.lambda, 0.0);
        let hs = model.system_hamiltonian();
        for s in 0..2 {
            for e in 0..env_dim {
                let i = s * env_dim + e;
                h[(i, i)] += hs.get(s, s) + env_energy[e];
            }
        }
        let hs_off = hs.get(0, 1);
        if hs_off != C64::new(0.0, 0.0) {
            for e in 0..env_dim {
                h[(e, env_dim + e)] += hs_off;
                h[(env_dim + e, e)] += hs_off.conj();
            }
        }

        let eig = SymmetricEigen::new(h);
        let vectors = eig.eigenvectors;
        let energies = eig.eigenvalues;

        let mut states: Vec<(f64, DVector<C64>)> = vec![(1.0, DVector::from_element(1, C64::new(1.0, 0.0)))];
        for (j, mode) in sim.modes.iter().enumerate() {
            let alpha = sim
                .displacements
                .get(j)
                .map_or(C64::new(0.0, 0.0), |a| C64::new(a[0], a[1]));
            let local = mode_states(mode, n, sim.beta, alpha);
            states = states
                .iter()
                .flat_map(|(p, psi)| local.iter().map(move |(q, phi)| (p * q, kron_vec(psi, phi))))
                .filter(|(w, _)| *w > MIN_STATE_WEIGHT)
                .collect();
        }
        let norm: f64 = states.iter().map(|(p, psi)| p * psi.norm_squared()).sum();
        let weights: Vec<f64> = states.iter().map(|(p, _)| p / norm).collect();
        let count = states.len();

        let mut product = DMatrix::<C64>::zeros(2 * env_dim, 2 * count);
        for k in 0..2 {
            for (r, (_, psi)) in states.iter().enumerate() {
                product
                    .view_mut((k * env_dim, k * count + r), (env_dim, 1))
                    .copy_from(psi);
            }
        }
        let initial = vectors.adjoint() * product;
        Ok(Propagator {
            vectors,
            energies,
            initial,
            weights,
            env_dim,
        })
    }

    /// Reduced map, and optionally its time derivative, at time `t`.
    fn map_at(&self, t: f64, derivative: bool) -> (SuperOperator, Option<SuperOperator>) {
        let phases = self.energies.map(|e| C64::from_polar(1.0, -e * t));
        let mut evolved = self.initial.clone();
        for (i, mut row) in evolved.row_iter_mut().enumerate() {
            row *= phases[i];
        }
        let psi = &self.vectors * &evolved;
        let dpsi = derivative.then(|| {
            let mut d = evolved.clone();
            for (i, mut row) in d.row_iter_mut().enumerate() {
                row *= -I * self.energies[i];
            }
            &self.vectors * d
        });
        let map = self.reduce(&psi, &psi);
        let deriv = dpsi.map(|dpsi| {
            let m = self.reduce(&dpsi, &psi).matrix() + self.reduce(&psi, &dpsi).matrix();
            SuperOperator::from_matrix_unchecked(2, m)
        });
        (map, deriv)
    }

    /// `X -> sum_r p_r Tr_E{|Psi_kr><Phi_jr|}` arranged as a superoperator.
    fn reduce(&self, left: &DMatrix<C64>, right: &DMatrix<C64>) -> SuperOperator {
        let count = self.weights.len();
        let e = self.env_dim;
        let mut m = DMatrix::<C64>::zeros(4, 4);
        for k in 0..2 {
            for j in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let mut acc = C64::new(0.0, 0.0);
                        for (r, &p) in self.weights.iter().enumerate() {
                            let u = left.view((a * e, k * count + r), (e, 1));
                            let v = right.view((b * e, j * count + r), (e, 1));
                            acc += v.dotc(&u) * p;
                        }
                        m[(a + 2 * b, k + 2 * j)] = acc;
                    }
                }
            }
        }
        SuperOperator::from_matrix_unchecked(2, m)
    }
}

/// Exact reduced maps `Phi_t[rho] = Tr_E{U_t (rho (x) rho_E) U_t^dagger}` with
/// their exact time derivatives.
pub fn simulate_map(sim: &DiscreteBathSim, model: &SpinModel, times: &[f64]) -> Result<DynamicalMapSeries> {
    let prop = Propagator::new(sim, model)?;
    let (maps, derivatives): (Vec<_>, Vec<_>) = times
        .par_iter()
        .map(|&t| {
            let (m, d) = prop.map_at(t, true);
            (m, d.expect("derivative requested"))
        })
        .unzip();

    let mut truncation_deviation = None;
    if sim.check_truncation {
        let mut cutoff = 2 * sim.fock_cutoff;
        while cutoff > sim.fock_cutoff && sim.with_cutoff(cutoff).total_dim() > MAX_TOTAL_DIM {
            cutoff -= 1;
        }
        if cutoff > sim.fock_cutoff {
            let fine = Propagator::new(&sim.with_cutoff(cutoff), model)?;
            let deviation = times
                .par_iter()
                .zip(&maps)
                .map(|(&t, m)| (fine.map_at(t, false).0.matrix() - m.matrix()).map(|z| z.norm()).max())
                .reduce(|| 0.0, f64::max);
            log::debug!("truncation check: cutoff {cutoff}, deviation {deviation:.3e}");
            if deviation > TRUNCATION_TOL {
                return Err(Error::TruncationInadequate { deviation });
            }
            truncation_deviation = Some(deviation);
        }
    }
    Ok(DynamicalMapSeries {
        times: times.to_vec(),
        maps,
        derivatives: Some(derivatives),
        truncation_deviation,
    })
}

/// Fourth-order finite-difference derivatives on a uniform grid.
fn finite_differences(times: &[f64], maps: &[SuperOperator]) -> Result<Vec<DMatrix<C64>>> {
    let n = times.len();
    if n < 5 {
        return Err(Error::Precondition(
            "finite differences need at least five time points".into(),
        ));
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times
        .iter()
        .enumerate()
        .any(|(i, &t)| (t - times[0] - i as f64 * h).abs() > 1e-9 * (1.0 + t.abs()))
    {
        return Err(Error::GridMismatch("finite differences need a uniform grid".into()));
    }
    let f = |i: usize| maps[i].matrix();
    let stencil = |coeffs: &[(usize, f64)]| {
        let mut acc = DMatrix::<C64>::zeros(4, 4);
        for &(i, c) in coeffs {
            acc += f(i) * C64::new(c / (12.0 * h), 0.0);
        }
        acc
    };
    Ok((0..n)
        .map(|i| match i {
            0 => stencil(&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)]),
            1 => stencil(&[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)]),
            i if i == n - 2 => stencil(&[(n - 1, 3.0), (n - 2, 10.0), (n - 3, -18.0), (n - 4, 6.0), (n - 5, -1.0)]),
            i if i == n - 1 => stencil(&[(n - 1, 25.0), (n - 2, -48.0), (n - 3, 36.0), (n - 4, -16.0), (n - 5, 3.0)]),
            i => stencil(&[(i - 2, 1.0), (i - 1, -8.0), (i + 1, 8.0), (i + 2, -1.0)]),
        })
        .collect())
}

/// `L_t = dPhi_t/dt . Phi_t^{-1}` at every time of the series.
pub fn generator_from_map(series: &DynamicalMapSeries) -> Result<Vec<SuperOperator>> {
    let derivatives: Vec<DMatrix<C64>> = match &series.derivatives {
        Some(d) => d.iter().map(|s| s.matrix().clone()).collect(),
        None => finite_differences(&series.times, &series.maps)?,
    };
    series
        .times
        .iter()
        .zip(&series.maps)
        .zip(derivatives)
        .map(|((&t, map), dphi)| {
            let svd = map.matrix().clone().svd(true, true);
            let smallest = svd.singular_values.min();
            if smallest <= SINGULAR_VALUE_THRESHOLD {
                return Err(Error::MapSingular {
                    time: t,
                    singular_value: smallest,
                });
            }
            let inverse = svd
                .pseudo_inverse(0.0)
                .map_err(|e| Error::Precondition(e.to_string()))?;
            SuperOperator::from_matrix(map.dim(), dphi * inverse)
        })
        .collect()
}

/// Exact pure-dephasing generator
/// `-i[(omega/2) sigma_z, .] + gamma(t) (sigma_z . sigma_z - .)` with
/// `gamma(t) = 2 lambda^2 int_0^t S(u) du`.
pub fn exact_dephasing_generator(bath: &BathSpec, model: &SpinModel, t: f64) -> Result<SuperOperator> {
    let is_sigma_z = match &model.coupling {
        Coupling::SigmaZ => true,
        Coupling::SigmaX => false,
        Coupling::General(a) => a.dim() == 2 && (a - &Operator::sigma_z()).max_abs() <= 1e-12,
    };
    if !is_sigma_z {
        return Err(Error::Precondition(
            "the exact dephasing generator needs sigma_z coupling".into(),
        ));
    }
    if bath.has_mean() {
        return Err(Error::Precondition(
            "the exact dephasing generator needs a zero-mean bath".into(),
        ));
    }
    let gamma = dephasing_rate(bath, model.lambda, t)?;
    let z = Operator::sigma_z();
    let id = Operator::identity(2);
    let dissipator = SuperOperator::from_sandwich(&[
        SandwichTerm::new(C64::new(gamma, 0.0), z.clone(), z),
        SandwichTerm::new(C64::new(-gamma, 0.0), id.clone(), id),
    ])?;
    Ok(&SuperOperator::commutator_generator(&model.system_hamiltonian()) + &dissipator)
}

/// `gamma(t) = 2 lambda^2 int_0^t S(u) du`.
pub fn dephasing_rate(bath: &BathSpec, lambda: f64, t: f64) -> Result<f64> {
    Ok(2.0 * lambda * lambda * integrated_noise(bath, t)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub times: Vec<f64>,
    pub lambda: f64,
    pub max_order: usize,
    pub k_exact: Vec<Operator>,
    /// `residuals[m][i] = |K_exact(t_i) - sum_{n <= m} lambda^n K_n(t_i)|`.
    pub residuals: Vec<Vec<f64>>,
    pub truncation_deviation: Option<f64>,
}

impl OracleReport {
    pub fn residual(&self, order: usize, i: usize) -> f64 {
        self.residuals[order][i]
    }
}

/// Exact effective Hamiltonians from the map series against the partial sums
/// of the series.
pub fn oracle_compare(series: &DynamicalMapSeries, kseries: &KSeries) -> Result<OracleReport> {
    if series.times.len() != kseries.times.len()
        || series
            .times
            .iter()
            .zip(&kseries.times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs()))
    {
        return Err(Error::GridMismatch(
            "map series and perturbative series use different times".into(),
        ));
    }
    let generators = generator_from_map(series)?;
    let k_exact = generators
        .iter()
        .map(effective_hamiltonian)
        .collect::<Result<Vec<_>>>()?;
    let residuals = (0..=kseries.max_order)
        .map(|m| {
            k_exact
                .iter()
                .enumerate()
                .map(|(i, k)| (k - &kseries.partial_sum(m, i)).norm())
                .collect()
        })
        .collect();
    Ok(OracleReport {
        times: series.times.clone(),
        lambda: kseries.lambda,
        max_order: kseries.max_order,
        k_exact,
        residuals,
        truncation_deviation: series.truncation_deviation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub t: f64,
    pub residual: f64,
    pub residual_scaled: f64,
    /// `residual / residual_scaled`.
    pub ratio: f64,
    /// `ln(ratio) / ln(lambda / lambda_scaled)`.
    pub exponent: f64,
}

/// Scaling of the residual after `order` between two coupling strengths.
pub fn scaling_exponents(
    report: &OracleReport,
    scaled: &OracleReport,
    order: usize,
) -> Result<Vec<ScalingPoint>> {
    if report.times.len() != scaled.times.len() {
        return Err(Error::GridMismatch("reports use different times".into()));
    }
    if order > report.max_order.min(scaled.max_order) {
        return Err(Error::OrderTooHigh {
            order,
            max: report.max_order.min(scaled.max_order),
        });
    }
    let log_lambda = (report.lambda / scaled.lambda).abs().ln();
    if !(log_lambda.is_finite() && log_lambda != 0.0) {
        return Err(Error::InvalidParameter(
            "scaling needs two distinct nonzero coupling strengths".into(),
        ));
    }
    Ok(report
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (r, s) = (report.residual(order, i), scaled.residual(order, i));
            let ratio = r / s;
            ScalingPoint {
                t,
                residual: r,
                residual_scaled: s,
                ratio,
                exponent: ratio.ln() / log_lambda,
            }
        })
        .collect())
}

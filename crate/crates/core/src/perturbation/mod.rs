//! Perturbative series `K(t) = sum_n lambda^n K_n(t)` for a qubit with
//! `H_S = (omega/2) sigma_z` coupled through `lambda A (x) B` to a Gaussian bath.
//!
//! The order-`n` term is
//!
//! `K_n = -(i^n / 2i) sum_k (-1)^k int [D X - (-1)^n (D X)^dagger]`
//!
//! where `D` is the ordered cumulant for `k` left and `n - k` right times, one
//! of which is pinned to `t`, and `X = Tr{A(s)^dagger}/d A(tau)` with `A(.)`
//! the product of interaction-picture coupling operators. The free times
//! range over the full cube `[0, t]^{n-1}`; the step functions inside the
//! cumulant restrict each bare moment to its ordered sector. Integration uses
//! the product trapezoid rule on the grid of a [`CorrelationTable`].
//! Everything is evaluated in the interaction frame and rotated back, so the
//! returned `K_n(t)` are lab-frame operators.

use std::io::Write;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{
    build_correlation_table, cumulant_unchecked, BathSpec, CorrelationTable, GridCorrelator, Pin,
};
use crate::superop::Operator;
use crate::{Error, Result, C64};

pub const MAX_SERIES_ORDER: usize = 4;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

type M2 = Matrix2<C64>;

#[inline]
fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    SigmaZ,
    SigmaX,
    General(Operator),
}

impl Coupling {
    pub fn operator(&self) -> Operator {
        match self {
            Coupling::SigmaZ => Operator::sigma_z(),
            Coupling::SigmaX => Operator::sigma_x(),
            Coupling::General(a) => a.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinModel {
    pub omega: f64,
    pub coupling: Coupling,
    pub lambda: f64,
}

impl SpinModel {
    pub fn new(omega: f64, coupling: Coupling, lambda: f64) -> Self {
        SpinModel {
            omega,
            coupling,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(
                "omega and lambda must be finite".into(),
            ));
        }
        let a = self.coupling.operator();
        if a.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: a.dim(),
            });
        }
        let residual = a.hermiticity_residual();
        if residual > 1e-12 {
            return Err(Error::NotHermitian { residual });
        }
        Ok(())
    }

    /// `(omega/2) sigma_z`.
    pub fn system_hamiltonian(&self) -> Operator {
        Operator::sigma_z().scale_re(0.5 * self.omega)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        SpinModel {
            lambda,
            ..self.clone()
        }
    }
}

/// Energies of `H_S` in the computational basis.
fn energies(model: &SpinModel) -> [f64; 2] {
    [0.5 * model.omega, -0.5 * model.omega]
}

/// `e^{i H_S t} A e^{-i H_S t}`.
pub fn interaction_picture_a(model: &SpinModel, t: f64) -> Operator {
    let phase = C64::from_polar(1.0, model.omega * t);
    match &model.coupling {
        Coupling::SigmaZ => Operator::sigma_z(),
        Coupling::SigmaX => {
            &Operator::sigma_plus().scale(phase) + &Operator::sigma_minus().scale(phase.conj())
        }
        Coupling::General(a) => {
            let h = model.system_hamiltonian();
            let u = (h.matrix() * (I * t)).exp();
            Operator::from_matrix_unchecked(&u * a.matrix() * u.adjoint())
        }
    }
}

fn to_m2(op: &Operator) -> M2 {
    M2::new(op.get(0, 0), op.get(0, 1), op.get(1, 0), op.get(1, 1))
}

fn from_m2(m: &M2) -> Operator {
    Operator::from_matrix_unchecked(DMatrix::from_fn(2, 2, |i, j| m[(i, j)]))
}

fn check_descending(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| w[0] < w[1]) {
        Err(Error::Precondition("times must be non-increasing".into()))
    } else {
        Ok(())
    }
}

/// `A(t_1) A(t_2) ... A(t_k)` for non-increasing times; the empty product is
/// the identity.
pub fn a_product(model: &SpinModel, times: &[f64]) -> Result<Operator> {
    check_descending(times)?;
    let mut acc = Operator::identity(2);
    for &t in times {
        acc = &acc * &interaction_picture_a(model, t);
    }
    Ok(acc)
}

/// `X = Tr{A(s)^dagger}/d A(tau)`.
pub fn x_operator(model: &SpinModel, left_times: &[f64], right_times: &[f64]) -> Result<Operator> {
    let a_tau = a_product(model, left_times)?;
    let a_s = a_product(model, right_times)?;
    Ok(a_tau.scale(a_s.dagger().trace() / 2.0))
}

/// Trapezoid step on the correlation-table grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub step: f64,
}

impl QuadratureScheme {
    pub fn new(step: f64) -> Self {
        QuadratureScheme { step }
    }
}

/// Per-point accumulators for one `(k, branch)` integral.
#[derive(Clone, Copy)]
struct Sums {
    /// `sum w D X`.
    dx: M2,
    /// `sum w Re(D) X_R`, `Re(D) X_I`, `Im(D) X_R`, `Im(D) X_I`.
    rr: M2,
    ri: M2,
    ir: M2,
    ii: M2,
}

impl Sums {
    fn zero() -> Self {
        Sums {
            dx: M2::zeros(),
            rr: M2::zeros(),
            ri: M2::zeros(),
            ir: M2::zeros(),
            ii: M2::zeros(),
        }
    }

    fn add(&mut self, o: &Sums) {
        self.dx += o.dx;
        self.rr += o.rr;
        self.ri += o.ri;
        self.ir += o.ir;
        self.ii += o.ii;
    }
}

/// Precomputed interaction-picture coupling on the grid together with the
/// bath table.
pub struct Expansion {
    model: SpinModel,
    table: CorrelationTable,
    a_grid: Vec<M2>,
}

impl Expansion {
    pub fn new(
        model: &SpinModel,
        bath: &BathSpec,
        horizon: f64,
        quad: QuadratureScheme,
    ) -> Result<Self> {
        model.validate()?;
        let table = build_correlation_table(bath, horizon, quad.step)?;
        Ok(Self::from_table(model, table))
    }

    pub fn from_table(model: &SpinModel, table: CorrelationTable) -> Self {
        let a_grid = table
            .times()
            .iter()
            .map(|&t| to_m2(&interaction_picture_a(model, t)))
            .collect();
        Expansion {
            model: model.clone(),
            table,
            a_grid,
        }
    }

    pub fn model(&self) -> &SpinModel {
        &self.model
    }

    pub fn table(&self) -> &CorrelationTable {
        &self.table
    }

    pub fn times(&self) -> Vec<f64> {
        self.table.times()
    }

    fn index(&self, t: f64) -> Result<usize> {
        self.table.index_of(t)
    }

    fn check_order(n: usize) -> Result<()> {
        if n > MAX_SERIES_ORDER {
            Err(Error::OrderTooHigh {
                order: n,
                max: MAX_SERIES_ORDER,
            })
        } else {
            Ok(())
        }
    }

    /// `U K U^dagger` with `U = e^{-i H_S t}`, traceless Hermitian part.
    fn to_lab(&self, k: &M2, t: f64) -> Operator {
        let e = energies(&self.model);
        let mut out = *k;
        for a in 0..2 {
            for b in 0..2 {
                out[(a, b)] *= C64::from_polar(1.0, -(e[a] - e[b]) * t);
            }
        }
        from_m2(&out).real_part().traceless_part()
    }

    fn product(&self, labels: &[usize]) -> M2 {
        let mut acc = M2::identity();
        for &i in labels {
            acc *= self.a_grid[i];
        }
        acc
    }

    fn product_rev(&self, labels: &[usize]) -> M2 {
        let mut acc = M2::identity();
        for &i in labels.iter().rev() {
            acc *= self.a_grid[i];
        }
        acc
    }

    /// Sum over the free-time grid of one `(k, branch)` term.
    fn branch_sums<const RESOLVED: bool>(&self, it: usize, k: usize, m: usize, pin: Pin) -> Sums {
        let n = k + m;
        let free = n - 1;
        let h = self.table.step();
        let weight = |i: usize| if i == 0 || i == it { 0.5 * h } else { h };
        let corr = GridCorrelator(&self.table);

        let point = |idx: &[usize], w: f64, acc: &mut Sums| {
            let mut tau = [0usize; MAX_SERIES_ORDER];
            let mut s = [0usize; MAX_SERIES_ORDER];
            match pin {
                Pin::Left => {
                    tau[0] = it;
                    tau[1..k].copy_from_slice(&idx[..k - 1]);
                    s[..m].copy_from_slice(&idx[k - 1..]);
                }
                Pin::Right => {
                    tau[..k].copy_from_slice(&idx[..k]);
                    s[0] = it;
                    s[1..m].copy_from_slice(&idx[k..]);
                }
            }
            let (tau, s) = (&tau[..k], &s[..m]);
            let c_s = self.product(s).adjoint().trace() * 0.5;
            let c_rev = if RESOLVED {
                self.product_rev(s).adjoint().trace() * 0.5
            } else {
                ZERO
            };
            if c_s == ZERO && c_rev == ZERO {
                return;
            }
            let d = cumulant_unchecked(&corr, tau, s, pin);
            if d == ZERO {
                return;
            }
            let x = self.product(tau) * c_s;
            acc.dx += x * (d * w);
            if RESOLVED {
                let x_rev = self.product_rev(tau) * c_rev;
                let x_r = (x + x_rev) * C64::new(0.5, 0.0);
                let x_i = (x - x_rev) / (2.0 * I);
                acc.rr += x_r * re(d.re * w);
                acc.ri += x_i * re(d.re * w);
                acc.ir += x_r * re(d.im * w);
                acc.ii += x_i * re(d.im * w);
            }
        };

        if free == 0 {
            let mut acc = Sums::zero();
            point(&[], 1.0, &mut acc);
            return acc;
        }
        if it == 0 {
            return Sums::zero();
        }
        // Parallel over the first free index, reduced in index order.
        let parts: Vec<Sums> = (0..=it)
            .into_par_iter()
            .map(|i0| {
                let mut acc = Sums::zero();
                let mut idx = [0usize; MAX_SERIES_ORDER];
                idx[0] = i0;
                let w0 = weight(i0);
                loop {
                    let w = (1..free).fold(w0, |acc, j| acc * weight(idx[j]));
                    point(&idx[..free], w, &mut acc);
                    // Odometer over idx[1..free].
                    let mut j = free;
                    loop {
                        if j == 1 {
                            return acc;
                        }
                        j -= 1;
                        if idx[j] < it {
                            idx[j] += 1;
                            break;
                        }
                        idx[j] = 0;
                    }
                }
            })
            .collect();
        let mut total = Sums::zero();
        for p in &parts {
            total.add(p);
        }
        total
    }

    fn order_sums<const RESOLVED: bool>(&self, n: usize, it: usize) -> Vec<Sums> {
        (0..=n)
            .map(|k| {
                let m = n - k;
                let mut acc = Sums::zero();
                if k >= 1 {
                    acc.add(&self.branch_sums::<RESOLVED>(it, k, m, Pin::Left));
                }
                if m >= 1 {
                    acc.add(&self.branch_sums::<RESOLVED>(it, k, m, Pin::Right));
                }
                acc
            })
            .collect()
    }

    fn k0(&self) -> Operator {
        self.model.system_hamiltonian().traceless_part()
    }

    /// `K_n(t)` in the lab frame.
    pub fn k_order(&self, n: usize, t: f64) -> Result<Operator> {
        Self::check_order(n)?;
        let it = self.index(t)?;
        if n == 0 {
            return Ok(self.k0());
        }
        let sums = self.order_sums::<false>(n, it);
        let mut z = M2::zeros();
        for (k, s) in sums.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            z += s.dx * C64::new(sign, 0.0);
        }
        let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
        let bracket = z - z.adjoint() * C64::new(parity, 0.0);
        let pref = -I.powu(n as u32) / (2.0 * I);
        Ok(self.to_lab(&(bracket * pref), t))
    }

    /// `K_n(t)` assembled from the real and imaginary parts of the cumulant and
    /// the Hermitian and anti-Hermitian parts of `X`, the latter obtained by
    /// evaluating `X` on reversed time lists:
    /// even `n = 2p`: `sum_k (-1)^{p+k+1} int [D_R X_I + D_I X_R]`,
    /// odd `n = 2p+1`: `sum_k (-1)^{p+k} int [D_I X_I - D_R X_R]`.
    pub fn k_order_symmetry_resolved(&self, n: usize, t: f64) -> Result<Operator> {
        Self::check_order(n)?;
        let it = self.index(t)?;
        if n == 0 {
            return Ok(self.k0());
        }
        let p = n / 2;
        let sums = self.order_sums::<true>(n, it);
        let mut total = M2::zeros();
        for (k, s) in sums.iter().enumerate() {
            let term = if n % 2 == 0 {
                let sign = if (p + k + 1) % 2 == 0 { 1.0 } else { -1.0 };
                (s.ri + s.ir) * C64::new(sign, 0.0)
            } else {
                let sign = if (p + k) % 2 == 0 { 1.0 } else { -1.0 };
                (s.ii - s.rr) * C64::new(sign, 0.0)
            };
            total += term;
        }
        Ok(self.to_lab(&total, t))
    }

    /// `K_2(t) = int_0^t [(1/2i) S(t,u) [A(t),A(u)]
    ///            - chi(t,u)/4 ({A(t),A(u)} - Tr{A(t),A(u)}/d)] du`
    /// for a zero-mean bath and traceless coupling.
    pub fn k2_closed_form(&self, t: f64) -> Result<Operator> {
        if self.table.has_mean() {
            return Err(Error::Precondition(
                "the second-order closed form needs a zero-mean bath".into(),
            ));
        }
        if self.model.coupling.operator().trace().norm() > 1e-12 {
            return Err(Error::Precondition(
                "the second-order closed form needs a traceless coupling operator".into(),
            ));
        }
        let it = self.index(t)?;
        let h = self.table.step();
        let at = self.a_grid[it];
        let mut acc = M2::zeros();
        for iu in 0..=it {
            if it == 0 {
                break;
            }
            let w = if iu == 0 || iu == it { 0.5 * h } else { h };
            let c = self.table.pair(it, iu);
            let (s, chi) = (c.re, -2.0 * c.im);
            let au = self.a_grid[iu];
            let comm = at * au - au * at;
            let anti = at * au + au * at;
            let anti_traceless = anti - M2::identity() * (anti.trace() * 0.5);
            acc += (comm * (s / (2.0 * I)) - anti_traceless * C64::new(0.25 * chi, 0.0)) * re(w);
        }
        Ok(self.to_lab(&acc, t))
    }

    /// `K_n(t)` for `n = 0..=max_order` at each grid time, with partial sums
    /// `sum_n lambda^n K_n`.
    pub fn k_series(&self, max_order: usize, times: &[f64]) -> Result<KSeries> {
        Self::check_order(max_order)?;
        let mut orders = Vec::with_capacity(max_order + 1);
        for n in 0..=max_order {
            let row = times
                .iter()
                .map(|&t| self.k_order(n, t))
                .collect::<Result<Vec<_>>>()?;
            orders.push(row);
        }
        Ok(KSeries::assemble(
            times.to_vec(),
            orders,
            self.model.lambda,
            self.table.step(),
            self.table.description().to_string(),
        ))
    }
}

/// Build the bath table on `[0, t]` and evaluate `K_n(t)`.
pub fn k_order(
    model: &SpinModel,
    bath: &BathSpec,
    n: usize,
    t: f64,
    quad: QuadratureScheme,
) -> Result<Operator> {
    Expansion::new(model, bath, t, quad)?.k_order(n, t)
}

pub fn k2_closed_form(
    model: &SpinModel,
    bath: &BathSpec,
    t: f64,
    quad: QuadratureScheme,
) -> Result<Operator> {
    Expansion::new(model, bath, t, quad)?.k2_closed_form(t)
}

/// Series on all grid points of `[0, horizon]`.
pub fn k_series(
    model: &SpinModel,
    bath: &BathSpec,
    max_order: usize,
    horizon: f64,
    quad: QuadratureScheme,
) -> Result<KSeries> {
    let e = Expansion::new(model, bath, horizon, quad)?;
    let times = e.times();
    e.k_series(max_order, &times)
}

#[derive(Clone, Debug, Serialize)]
pub struct KSeries {
    pub times: Vec<f64>,
    /// `orders[n][i]` is `K_n(times[i])`.
    pub orders: Vec<Vec<Operator>>,
    /// `sum_{n <= max_order} lambda^n K_n(times[i])`.
    pub partial_sums: Vec<Operator>,
    pub lambda: f64,
    pub max_order: usize,
    pub step: f64,
    pub bath: String,
}

impl KSeries {
    fn assemble(
        times: Vec<f64>,
        orders: Vec<Vec<Operator>>,
        lambda: f64,
        step: f64,
        bath: String,
    ) -> Self {
        let max_order = orders.len() - 1;
        let partial_sums = (0..times.len())
            .map(|i| {
                let mut acc = Operator::zeros(2);
                for (n, row) in orders.iter().enumerate() {
                    acc = &acc + &row[i].scale_re(lambda.powi(n as i32));
                }
                acc
            })
            .collect();
        KSeries {
            times,
            orders,
            partial_sums,
            lambda,
            max_order,
            step,
            bath,
        }
    }

    /// `sum_{n <= upto} lambda^n K_n(times[i])`.
    pub fn partial_sum(&self, upto: usize, i: usize) -> Operator {
        let mut acc = Operator::zeros(2);
        for (n, row) in self.orders.iter().enumerate().take(upto + 1) {
            acc = &acc + &row[i].scale_re(self.lambda.powi(n as i32));
        }
        acc
    }

    /// Columns `t,n,re00,im00,re01,im01,re10,im10,re11,im11`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,n,re00,im00,re01,im01,re10,im10,re11,im11")?;
        for (i, &t) in self.times.iter().enumerate() {
            for (n, row) in self.orders.iter().enumerate() {
                let k = &row[i];
                write!(out, "{t:.16e},{n}")?;
                for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let z = k.get(a, b);
                    write!(out, ",{:.16e},{:.16e}", z.re, z.im)?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObservableRow {
    pub t: f64,
    /// `Tr{K sigma_z}`.
    pub omega_r: f64,
    pub kx: f64,
    pub ky: f64,
    /// Polar angle of the Bloch vector of `K`.
    pub rotation_angle: f64,
}

impl ObservableRow {
    pub fn from_operator(t: f64, k: &Operator) -> Result<Self> {
        if k.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: k.dim(),
            });
        }
        let comp = |p: Operator| (&p * k).trace().re;
        let omega_r = comp(Operator::sigma_z());
        let kx = comp(Operator::sigma_x());
        let ky = comp(Operator::sigma_y());
        Ok(ObservableRow {
            t,
            omega_r,
            kx,
            ky,
            rotation_angle: kx.hypot(ky).atan2(omega_r),
        })
    }
}

pub fn report_observables(series: &KSeries) -> Result<Vec<ObservableRow>> {
    series
        .times
        .iter()
        .zip(&series.partial_sums)
        .map(|(&t, k)| ObservableRow::from_operator(t, k))
        .collect()
}

/// Columns `t,omega_r,kx,ky,rotation_angle`.
pub fn write_observables_csv<W: Write>(rows: &[ObservableRow], mut out: W) -> Result<()> {
    writeln!(out, "t,omega_r,kx,ky,rotation_angle")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.omega_r, r.kx, r.ky, r.rotation_angle
        )?;
    }
    Ok(())
}

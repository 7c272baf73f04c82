use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use effham::{
    check_htp, effective_hamiltonian, haar_mc_effective_hamiltonian, lindblad_generator,
    oracle_compare, report_observables, scaling_exponents, simulate_map, split,
    write_observables_csv, DiscreteBathSim, Error, Expansion, HaarEstimate, InverseTemperature,
    KSeries, Operator, OracleReport, QuadratureScheme, ScalingPoint, SpectralDensity,
    SuperOperator,
};
use log::info;
use serde::Serialize;

use crate::config::{Command, GeneratorSpec, OracleConfig, RunConfig, SweepParameter};
use crate::error::CliError;

pub fn run(config: &RunConfig, output: &Path) -> Result<(), CliError> {
    create_dir(output)?;
    match config.command {
        Command::Split => cmd_split(config, output),
        Command::Expand => cmd_expand(config, output).map(|_| ()),
        Command::Oracle => cmd_oracle(config, output),
        Command::Sweep => cmd_sweep(config, output),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_error(path))?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Core errors raised while writing go through `Error::Io`; re-tag them with
/// the path.
fn with_path(path: &Path, result: effham::Result<()>) -> Result<(), CliError> {
    match result {
        Err(Error::Io(source)) => Err(CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        other => other.map_err(CliError::from),
    }
}

fn generator(config: &RunConfig) -> Result<SuperOperator, CliError> {
    let spec = config
        .generator
        .as_ref()
        .ok_or_else(|| CliError::Config("split needs a \"generator\"".into()))?;
    let result = match spec {
        GeneratorSpec::Superoperator { matrix } => Ok(matrix.clone()),
        GeneratorSpec::Lindblad { hamiltonian, jumps } => {
            let jumps: Vec<(f64, Operator)> = jumps.iter().map(|j| (j.rate, j.op.clone())).collect();
            lindblad_generator(hamiltonian, &jumps)
        }
    };
    result.map_err(|e| CliError::InvalidGenerator(e.to_string()))
}

#[derive(Serialize)]
struct McCheck<'a> {
    monte_carlo: &'a HaarEstimate,
    closed_form: &'a Operator,
    /// Largest deviation in units of the per-entry standard error.
    z_score: f64,
}

pub fn cmd_split(config: &RunConfig, output: &Path) -> Result<(), CliError> {
    let l = generator(config)?;
    let report = check_htp(&l);
    if !report.passes() {
        let residuals = serde_json::to_string(&report).map_err(Error::from)?;
        return Err(CliError::InvalidGenerator(format!(
            "not Hermiticity-preserving and trace-annihilating: {residuals}"
        )));
    }
    let s = split(&l)?;
    write_json(&output.join("split.json"), &s)?;
    if let Some(mc) = &config.mc {
        let estimate = haar_mc_effective_hamiltonian(&l, mc.samples, mc.seed)?;
        let k = effective_hamiltonian(&l)?;
        let check = McCheck {
            z_score: estimate.z_score(&k),
            monte_carlo: &estimate,
            closed_form: &k,
        };
        write_json(&output.join("mc_check.json"), &check)?;
    }
    Ok(())
}

fn expansion(config: &RunConfig) -> Result<(Expansion, Vec<f64>), CliError> {
    let grid = config.times()?;
    let e = Expansion::new(
        config.model()?,
        config.bath()?,
        grid.horizon,
        QuadratureScheme::new(grid.step),
    )?;
    let times = e.times().into_iter().step_by(grid.every).collect();
    Ok((e, times))
}

fn write_series(series: &KSeries, dir: &Path) -> Result<(), CliError> {
    let path = dir.join("kseries.csv");
    let mut out = create(&path)?;
    with_path(&path, series.write_csv(&mut out))?;
    out.flush().map_err(io_error(&path))?;

    let path = dir.join("observables.csv");
    let mut out = create(&path)?;
    with_path(&path, write_observables_csv(&report_observables(series)?, &mut out))?;
    out.flush().map_err(io_error(&path))?;
    info!("wrote series to {}", dir.display());
    Ok(())
}

pub fn cmd_expand(config: &RunConfig, output: &Path) -> Result<KSeries, CliError> {
    let (e, times) = expansion(config)?;
    info!("expanding to order {} at {} times", config.orders, times.len());
    let series = e.k_series(config.orders, &times)?;
    write_series(&series, output)?;
    Ok(series)
}

#[derive(Serialize)]
struct ScalingBlock {
    order: usize,
    points: Vec<ScalingPoint>,
}

#[derive(Serialize)]
struct OracleOutput {
    fock_cutoff: usize,
    total_dim: usize,
    report: OracleReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaled_report: Option<OracleReport>,
    /// Residual scaling between `lambda` and `lambda / 2`; empty when
    /// `lambda = 0` or scaling is disabled.
    scaling: Vec<ScalingBlock>,
}

pub fn cmd_oracle(config: &RunConfig, output: &Path) -> Result<(), CliError> {
    let settings = config.oracle.clone().unwrap_or_default();
    let bath = config.bath()?;
    let mut sim = DiscreteBathSim::from_bath(bath, settings.fock_cutoff).map_err(|e| match e {
        Error::UnsupportedBath(msg) => CliError::Config(msg),
        other => CliError::Core(other),
    })?;
    sim.check_truncation = settings.check_truncation;
    let model = config.model()?;

    let compare = |lambda: f64| -> Result<OracleReport, CliError> {
        let mut run = config.clone();
        run.model = Some(model.with_lambda(lambda));
        let (e, times) = expansion(&run)?;
        let series = e.k_series(config.orders, &times)?;
        let maps = simulate_map(&sim, e.model(), &times)?;
        Ok(oracle_compare(&maps, &series)?)
    };

    let report = compare(model.lambda)?;
    let OracleConfig { scaling, .. } = settings;
    let (scaled_report, blocks) = if scaling && model.lambda != 0.0 {
        let scaled = compare(0.5 * model.lambda)?;
        let blocks = (0..=config.orders)
            .map(|order| {
                Ok(ScalingBlock {
                    order,
                    points: scaling_exponents(&report, &scaled, order)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        (Some(scaled), blocks)
    } else {
        (None, Vec::new())
    };

    let path = output.join("scaling.csv");
    let mut csv = create(&path)?;
    let write_rows = |csv: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(csv, "order,t,residual,residual_scaled,ratio,exponent")?;
        for block in &blocks {
            for p in &block.points {
                writeln!(
                    csv,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    block.order, p.t, p.residual, p.residual_scaled, p.ratio, p.exponent
                )?;
            }
        }
        csv.flush()
    };
    write_rows(&mut csv).map_err(io_error(&path))?;

    let out = OracleOutput {
        fock_cutoff: sim.fock_cutoff,
        total_dim: sim.total_dim(),
        report,
        scaled_report,
        scaling: blocks,
    };
    write_json(&output.join("oracle_report.json"), &out)
}

fn apply_sweep_value(config: &mut RunConfig, parameter: SweepParameter, value: f64) -> Result<(), CliError> {
    match parameter {
        SweepParameter::Lambda => {
            let model = config.model()?.with_lambda(value);
            config.model = Some(model);
        }
        SweepParameter::Beta => {
            let mut bath = config.bath()?.clone();
            bath.beta = InverseTemperature::Finite(value);
            config.bath = Some(bath);
        }
        SweepParameter::OmegaC => {
            let mut bath = config.bath()?.clone();
            match &mut bath.spectral_density {
                SpectralDensity::OhmicExp { omega_c, .. } => *omega_c = value,
                _ => {
                    return Err(CliError::Config(
                        "omega_c sweeps need an ohmic_exp spectral density".into(),
                    ))
                }
            }
            config.bath = Some(bath);
        }
    }
    Ok(())
}

pub fn cmd_sweep(config: &RunConfig, output: &Path) -> Result<(), CliError> {
    let axis = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep needs a \"sweep\" axis: {\"parameter\": \"lambda\" | \"beta\" | \"omega_c\", \"values\": [...]}".into()))?;
    if axis.values.is_empty() {
        return Err(CliError::Usage(
            "sweep axis is empty: give at least one value in sweep.values".into(),
        ));
    }
    let mut summary = Vec::with_capacity(axis.values.len());
    for (i, &value) in axis.values.iter().enumerate() {
        let mut point = config.clone();
        apply_sweep_value(&mut point, axis.parameter, value)?;
        let dir: PathBuf = output.join(format!("point_{i:03}"));
        create_dir(&dir)?;
        info!("sweep point {i}: {} = {value}", axis.parameter.name());
        let series = cmd_expand(&point, &dir)?;
        let last = *report_observables(&series)?
            .last()
            .ok_or_else(|| CliError::Config("empty time grid".into()))?;
        summary.push((value, last));
    }

    let path = output.join("sweep_summary.csv");
    let mut csv = create(&path)?;
    let write_rows = |csv: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(csv, "point,{},t,omega_r,kx,ky,rotation_angle", axis.parameter.name())?;
        for (i, (value, r)) in summary.iter().enumerate() {
            writeln!(
                csv,
                "{i},{value:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.omega_r, r.kx, r.ky, r.rotation_angle
            )?;
        }
        csv.flush()
    };
    write_rows(&mut csv).map_err(io_error(&path))
}

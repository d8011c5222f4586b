//! Campaign orchestration: dispatch a validated config to the matching
//! operation, persist reports (JSON + CSV) and the run manifest, and keep the
//! whole pipeline byte-reproducible.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{CampaignKind, ExperimentConfig};
use crate::corrector::{compute_corrector, estimate_ahom};
use crate::error::{Error, Result};
use crate::media::rng::sample_seed;
use crate::media::{write_scalar_field, FieldKind};
use crate::oracle::{linearized_variance_exact, linearized_variance_mc};
use crate::report::{PredictedPoint, ScalingReport, SeriesPoint};
use crate::scaling::{
    fit_power_law, helmholtz_campaign, measure_average_decay, measure_corrector_growth, mu_star,
};
use crate::twoscale::two_scale_campaign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    /// Some samples failed but the campaign completed (exit code 2).
    Partial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub campaign: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// Stream seeds per sample index.
    pub sample_seeds: Vec<u64>,
    pub failures: Vec<String>,
    pub status: RunStatus,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub manifest: RunManifest,
    pub report_path: PathBuf,
    pub status: RunStatus,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Gaussian input spectrum of the ensemble, required by Appendix-A campaigns.
fn gaussian_spectrum(config: &ExperimentConfig) -> Result<crate::media::SpectrumSpec> {
    match &config.ensemble {
        crate::config::EnsembleConfig::Gaussian { spectrum, .. } => Ok(*spectrum),
        _ => Err(Error::InvalidSpec(
            "appendix-a campaigns need a gaussian ensemble".into(),
        )),
    }
}

fn appendix_a_report(config: &ExperimentConfig) -> Result<ScalingReport> {
    let grid = config.grid.to_grid()?;
    let spectrum = gaussian_spectrum(config)?;
    let radii = &config.campaign.radii;
    let hash = config.hash()?;
    let exact = linearized_variance_exact(&spectrum, &grid, radii)?;
    let mut report = ScalingReport::new("appendix-a", &hash);
    for (r, v) in exact.radii.iter().zip(&exact.values) {
        report.series.push(SeriesPoint {
            scale: *r,
            value: *v,
            stderr: 0.0,
            n: 1,
        });
    }
    // predicted law per regime is reported as the reference curve
    let d = grid.dim();
    let beta = spectrum.effective_beta(d);
    for &r in radii {
        let value = match exact.regime {
            crate::oracle::VarianceRegime::SubCritical => r.powf(2.0 - beta),
            crate::oracle::VarianceRegime::CriticalD2 => (r).max(2.0).ln().powi(2),
            crate::oracle::VarianceRegime::CriticalDgt2 => (r).max(2.0).ln(),
        };
        report.predicted.push(PredictedPoint { scale: r, value });
    }
    let positive: Vec<(f64, f64, f64)> = report
        .series
        .iter()
        .filter(|p| p.value > 0.0 && p.scale > 0.0)
        .map(|p| (p.scale, p.value, 0.0))
        .collect();
    if positive.len() >= 3 {
        report.fit = fit_power_law(&positive).ok();
    }
    if matches!(exact.regime, crate::oracle::VarianceRegime::SubCritical) {
        report.predicted_exponent = Some(2.0 - beta);
    }
    if config.campaign.with_mc {
        let mc = linearized_variance_mc(
            &spectrum,
            &grid,
            radii,
            config.sampling.n,
            config.sampling.master_seed,
        )?;
        let stderr = mc.stderr.unwrap_or_default();
        for ((r, v), e) in mc.radii.iter().zip(&mc.values).zip(&stderr) {
            report.secondary_series.push(SeriesPoint {
                scale: *r,
                value: *v,
                stderr: *e,
                n: config.sampling.n,
            });
        }
        report
            .notes
            .push("secondary series: Monte-Carlo cross-validation".into());
    }
    Ok(report)
}

fn ahom_report(config: &ExperimentConfig) -> Result<ScalingReport> {
    let est = estimate_ahom(config)?;
    let hash = config.hash()?;
    let d = config.grid.d;
    let mut report = ScalingReport::new("ahom", &hash);
    // entries serialized as series points indexed by row*d+col
    for r in 0..d {
        for c in 0..d {
            report.series.push(SeriesPoint {
                scale: (r * d + c) as f64,
                value: est.mean[r * d + c],
                stderr: est.stderr[r * d + c],
                n: est.samples.len(),
            });
        }
    }
    report
        .notes
        .push("series scale encodes the matrix entry index row*d+col".into());
    Ok(report)
}

/// Dispatch the campaign, write `report.json`, `report.csv` and
/// `manifest.json` under the output directory.
pub fn run_campaign(config: &ExperimentConfig) -> Result<CampaignOutcome> {
    config.validate()?;
    let out_dir = &config.output.dir;
    fs::create_dir_all(out_dir)?;
    // fail early on unwritable output
    let probe_path = out_dir.join(".write-probe");
    fs::write(&probe_path, b"ok")?;
    fs::remove_file(&probe_path)?;

    let started = now_ms();
    let report = match config.campaign.kind {
        CampaignKind::AvgDecay => measure_average_decay(
            config,
            &config.campaign.radii,
            config.campaign.directions,
        )?,
        CampaignKind::Growth => measure_corrector_growth(config, &config.campaign.radii)?,
        CampaignKind::TwoScale => two_scale_campaign(config)?,
        CampaignKind::AppendixA => appendix_a_report(config)?,
        CampaignKind::Ahom => ahom_report(config)?,
        CampaignKind::HelmholtzProbe => helmholtz_campaign(config)?,
    };
    let finished = now_ms();
    let status = if report.failures.is_empty() {
        RunStatus::Success
    } else {
        RunStatus::Partial
    };
    let manifest = RunManifest {
        config_hash: report.config_hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        campaign: config.campaign.kind.as_str().to_string(),
        started_unix_ms: started,
        finished_unix_ms: finished,
        sample_seeds: (0..config.sampling.n as u64)
            .map(|s| sample_seed(config.sampling.master_seed, s))
            .collect(),
        failures: report.failures.iter().map(|f| f.message.clone()).collect(),
        status,
    };
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, report.to_json()?)?;
    fs::write(out_dir.join("report.csv"), report.to_csv())?;
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialize(e.to_string()))?,
    )?;
    Ok(CampaignOutcome {
        manifest,
        report_path,
        status,
    })
}

/// Emit plot-ready CSV panels for a stored report.
pub fn emit_plotdata(report_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(report_path)?;
    let report = ScalingReport::from_json(&text)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let main = out_dir.join("panel_main.csv");
    fs::write(&main, report.to_csv())?;
    written.push(main);
    if let Some(csv) = report.secondary_csv() {
        let p = out_dir.join("panel_secondary.csv");
        fs::write(&p, csv)?;
        written.push(p);
    }
    if report.series.is_empty() {
        log::warn!(target: "homoglab::campaign", "report has an empty series; header-only CSV");
    }
    Ok(written)
}

/// Sample media and cache the raw Gaussian fields in the binary container.
pub fn generate_fields(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let grid = config.grid.to_grid()?;
    let cache_dir = std::env::var_os("HOMOGLAB_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| config.output.dir.join("fields"));
    fs::create_dir_all(&cache_dir)?;
    let spectrum = gaussian_spectrum(config)?;
    let mut written = Vec::new();
    for s in 0..config.sampling.n as u64 {
        let omega = crate::media::sample_gaussian_field(
            &spectrum,
            &grid,
            sample_seed(config.sampling.master_seed, s),
        )?;
        let path = cache_dir.join(format!("omega_{s:05}.fld"));
        let mut file = fs::File::create(&path)?;
        write_scalar_field(&mut file, &omega, FieldKind::Scalar)?;
        written.push(path);
    }
    Ok(written)
}

/// Compute one extended corrector and persist it: binary container per
/// component plus a JSON sidecar with residuals and the homogenized matrix.
pub fn corrector_dump(config: &ExperimentConfig) -> Result<PathBuf> {
    config.validate()?;
    let grid = config.grid.to_grid()?;
    let a = config
        .ensemble
        .sample(&grid, sample_seed(config.sampling.master_seed, 0))?;
    let corr = compute_corrector(&a, &config.solver)?;
    let out_dir = config.output.dir.join("corrector");
    fs::create_dir_all(&out_dir)?;
    let d = grid.dim();
    for i in 0..d {
        let mut f = fs::File::create(out_dir.join(format!("phi_{i}.fld")))?;
        write_scalar_field(&mut f, &corr.phi[i], FieldKind::Scalar)?;
        for &(j, k) in corr.pairs() {
            let field = corr.sigma_component(i, j, k);
            let mut f = fs::File::create(out_dir.join(format!("sigma_{i}{j}{k}.fld")))?;
            write_scalar_field(&mut f, &field, FieldKind::Scalar)?;
        }
    }
    #[derive(Serialize)]
    struct Sidecar<'a> {
        config_hash: String,
        ahom_sample: &'a [f64],
        residuals: &'a crate::corrector::CorrectorResiduals,
    }
    let sidecar = Sidecar {
        config_hash: config.hash()?,
        ahom_sample: &corr.ahom_sample,
        residuals: &corr.residuals,
    };
    let path = out_dir.join("corrector.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Serialize(e.to_string()))?,
    )?;
    Ok(path)
}

/// Predicted two-scale rate used in reports; exposed for the CLI.
pub fn two_scale_prediction(eps: f64, beta: f64, d: usize) -> f64 {
    eps * mu_star(1.0 / eps, beta, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{
        CampaignConfig, EnsembleConfig, GridConfig, OutputConfig, ProbeKind, SamplingConfig,
    };
    use crate::media::{SpectrumSpec, TransformShape, TransformSpec};
    use crate::solver::SolveOptions;

    fn tiny_appendix_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: crate::config::SCHEMA_VERSION,
            grid: GridConfig { d: 2, l: 64, h: 1.0 },
            ensemble: EnsembleConfig::Gaussian {
                spectrum: SpectrumSpec::power_law(1.0),
                transform: TransformSpec::new(0.2, 0.1, TransformShape::Clamp),
            },
            solver: SolveOptions::default(),
            campaign: CampaignConfig {
                kind: CampaignKind::AppendixA,
                radii: vec![4.0, 8.0, 16.0],
                eps: vec![],
                directions: 8,
                macro_cells: 8,
                probe: ProbeKind::Leap,
                probe_radius: 4.0,
                gamma: 1.0,
                with_mc: false,
            },
            sampling: SamplingConfig {
                n: 8,
                master_seed: 3,
            },
            output: OutputConfig {
                dir: dir.to_path_buf(),
            },
        }
    }

    #[test]
    fn appendix_a_smoke_run_writes_reports() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_appendix_config(tmp.path());
        let outcome = run_campaign(&cfg).unwrap();
        assert_eq!(outcome.status, RunStatus::Success);
        assert!(outcome.report_path.exists());
        assert!(tmp.path().join("report.csv").exists());
        assert!(tmp.path().join("manifest.json").exists());
        let panels = emit_plotdata(&outcome.report_path, tmp.path()).unwrap();
        assert!(!panels.is_empty());
        // plotdata values match the report to full precision
        let report = ScalingReport::from_json(
            &std::fs::read_to_string(&outcome.report_path).unwrap(),
        )
        .unwrap();
        let csv = std::fs::read_to_string(&panels[0]).unwrap();
        let first_value: f64 = csv
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(first_value, report.series[0].value);
    }

    #[test]
    fn identical_configs_reproduce_identical_report_bytes() {
        let tmp1 = tempfile::tempdir().unwrap();
        let tmp2 = tempfile::tempdir().unwrap();
        let mut cfg1 = tiny_appendix_config(tmp1.path());
        cfg1.campaign.with_mc = true;
        cfg1.sampling.n = 8;
        let mut cfg2 = cfg1.clone();
        cfg2.output.dir = tmp2.path().to_path_buf();
        let o1 = run_campaign(&cfg1).unwrap();
        let o2 = run_campaign(&cfg2).unwrap();
        let b1 = std::fs::read(&o1.report_path).unwrap();
        let b2 = std::fs::read(&o2.report_path).unwrap();
        assert_eq!(b1, b2, "report bytes differ between identical runs");
    }

    #[test]
    fn unwritable_output_fails_before_compute() {
        let mut cfg = tiny_appendix_config(Path::new("/proc/definitely/not/writable"));
        cfg.grid.l = 4096; // would be expensive if compute started
        let err = run_campaign(&cfg);
        assert!(err.is_err());
    }
}

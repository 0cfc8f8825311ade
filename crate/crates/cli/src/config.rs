//! Run configuration: one TOML file with a section per model.

use std::path::{Path, PathBuf};

use fsopoint::aperture::{ApertureNoise, ApertureParams};
use fsopoint::channel::{DriftForm, DriftScaling, TurbulenceParams};
use fsopoint::lmi::SynthesisOptions;
use fsopoint::metrics::{QNorm, GH_ORDER_RANGE, MIN_MC_BITS};
use fsopoint::plant::{
    build_augmented, AugmentedPlant, Frame, NoiseMatrix, OutputMatrix, PlantConventions,
};
use fsopoint::verify::{MIN_SEEDS, MIN_SWEEP_POINTS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_PRESET: &str = "paper-weak-turbulence";
const PRESETS: &[(&str, &str)] = &[(
    DEFAULT_PRESET,
    include_str!("../presets/paper-weak-turbulence.toml"),
)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Also run the synthesis under the printed output and noise matrices.
    pub paper_variants: bool,
    pub channel: ChannelConfig,
    pub aperture: ApertureConfig,
    pub plant: PlantConfig,
    pub synthesis: SynthesisOptions,
    pub simulate: SimulateConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("fsopoint-out"),
            paper_variants: false,
            channel: ChannelConfig::default(),
            aperture: ApertureConfig::default(),
            plant: PlantConfig::default(),
            synthesis: SynthesisOptions::default(),
            simulate: SimulateConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub sigma2: f64,
    pub i0: f64,
    pub tau_c: f64,
    pub dt: f64,
    pub a_p: f64,
    pub b_p: f64,
    pub c_p: f64,
    pub drift_scaling: DriftScaling,
    pub drift_form: DriftForm,
    /// Length of the characterization run.
    pub steps: usize,
    /// Stride of the written trajectory rows.
    pub record_every: usize,
    pub bins: usize,
    /// Stride of the decorrelated subsample used for the chi-square fit.
    pub thin: usize,
    pub max_lag: usize,
    /// Relative tolerance on the recovered sigma^2.
    pub var_tol: f64,
    /// Relative tolerance on the sample mean against `i0`.
    pub mean_tol: f64,
    /// Relative tolerance on the fitted correlation time.
    pub tau_tol: f64,
    pub max_chi2_per_dof: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            sigma2: 0.038,
            i0: 1.0,
            tau_c: 0.1,
            dt: 1e-3,
            a_p: 1.0,
            b_p: 1.0,
            c_p: 1.0,
            drift_scaling: DriftScaling::Dt,
            drift_form: DriftForm::Stationary,
            steps: 1_000_000,
            record_every: 100,
            bins: 20,
            thin: 500,
            max_lag: 400,
            var_tol: 0.1,
            mean_tol: 0.02,
            tau_tol: 0.2,
            max_chi2_per_dof: 1.5,
        }
    }
}

impl ChannelConfig {
    pub fn params(&self) -> Result<TurbulenceParams<f64>, CliError> {
        let p = TurbulenceParams {
            sigma2: self.sigma2,
            i0: self.i0,
            tau_c: self.tau_c,
            dt: self.dt,
            a_p: self.a_p,
            b_p: self.b_p,
            c_p: self.c_p,
            drift_scaling: self.drift_scaling,
            drift_form: self.drift_form,
        };
        p.validate()
            .map_err(|e| CliError::Validation(format!("[channel] {e}")))?;
        Ok(p)
    }
}

/// Aperture trap given by its AR(1) coefficient and stationary spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApertureConfig {
    pub a_l: f64,
    pub std_dev: f64,
    pub noise: ApertureNoise,
}

impl Default for ApertureConfig {
    fn default() -> Self {
        Self {
            a_l: 0.98,
            std_dev: 0.03,
            noise: ApertureNoise::Physical,
        }
    }
}

impl ApertureConfig {
    pub fn params(&self, dt: f64) -> Result<ApertureParams<f64>, CliError> {
        let mut p = ApertureParams::from_ar1(self.a_l, self.std_dev, dt)
            .map_err(|e| CliError::Validation(format!("[aperture] {e}")))?;
        p.noise = self.noise;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub d: f64,
    pub output_matrix: OutputMatrix,
    pub noise_matrix: NoiseMatrix,
    pub frame: Frame,
    /// Certified interval of the channel state, relative to `i0`.
    pub domain: [f64; 2],
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            d: 1.0,
            output_matrix: OutputMatrix::Derived,
            noise_matrix: NoiseMatrix::Diagonal,
            frame: Frame::Deviation,
            domain: [0.25, 4.0],
        }
    }
}

impl PlantConfig {
    pub fn conventions(&self) -> PlantConventions {
        PlantConventions {
            output_matrix: self.output_matrix,
            noise_matrix: self.noise_matrix,
            frame: self.frame,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub seeds: usize,
    pub steps: usize,
    pub sweep_points: usize,
    /// Closed-loop trajectories fed to the dissipation check.
    pub dissipation_seeds: usize,
    /// Trajectory written to the CSV files.
    pub trajectory_id: u64,
    pub min_reduction: f64,
    pub max_peak_ratio: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seeds: 100,
            steps: 10_000,
            sweep_points: 720,
            dissipation_seeds: 100,
            trajectory_id: 0,
            min_reduction: 0.3,
            max_peak_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    /// Grid `start, start + step, ...` up to `stop` inclusive.
    pub fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.step > 0.0
            && self.stop >= self.start;
        if !ok {
            return Err(CliError::Validation(format!(
                "[metrics] {name}: empty range (need finite start <= stop and step > 0)"
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            return Err(CliError::Validation(format!(
                "[metrics] {name}: {n} points is too many"
            )));
        }
        Ok((0..n).map(|i| self.start + self.step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricsMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub sigma2_open: f64,
    pub sigma2_closed: f64,
    pub margin_db: Range,
    pub snr_db: Range,
    pub quad_order: usize,
    pub q_norm: QNorm,
    pub target_outage: f64,
    pub ber_level: f64,
    pub method: MetricsMethod,
    pub mc_bits: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            sigma2_open: 0.038,
            sigma2_closed: 0.0231,
            margin_db: Range {
                start: 0.0,
                stop: 10.0,
                step: 0.25,
            },
            snr_db: Range {
                start: -5.0,
                stop: 25.0,
                step: 0.5,
            },
            quad_order: 32,
            q_norm: QNorm::Standard,
            target_outage: 1e-6,
            ber_level: 0.1,
            method: MetricsMethod::Analytic,
            mc_bits: 200_000,
        }
    }
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let known: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
                CliError::Validation(format!(
                    "unknown preset `{name}` (known: {})",
                    known.join(", ")
                ))
            })?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section before a run starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let v = |cond: bool, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(CliError::Validation(msg.to_string()))
            }
        };
        let tp = self.channel.params()?;
        self.aperture
            .params(tp.dt)?
            .coefficients()
            .map_err(|e| CliError::Validation(format!("[aperture] {e}")))?;
        let c = &self.channel;
        v(c.steps >= 1000, "[channel] steps must be >= 1000")?;
        v(c.record_every >= 1, "[channel] record_every must be >= 1")?;
        v(c.thin >= 1, "[channel] thin must be >= 1")?;
        v(
            c.max_lag >= 2 && c.max_lag < c.steps,
            "[channel] max_lag must lie in [2, steps)",
        )?;
        for (name, t) in [
            ("var_tol", c.var_tol),
            ("mean_tol", c.mean_tol),
            ("tau_tol", c.tau_tol),
        ] {
            v(
                t > 0.0 && t.is_finite(),
                &format!("[channel] {name} must be > 0"),
            )?;
        }
        v(
            c.max_chi2_per_dof > 0.0,
            "[channel] max_chi2_per_dof must be > 0",
        )?;
        let p = &self.plant;
        v(p.d > 0.0 && p.d.is_finite(), "[plant] d must be > 0")?;
        v(
            p.domain[0] > 0.0 && p.domain[0] < 1.0 && p.domain[1] > 1.0 && p.domain[1].is_finite(),
            "[plant] domain must satisfy 0 < lo < 1 < hi (relative to i0)",
        )?;
        self.synthesis
            .validate()
            .map_err(|e| CliError::Validation(format!("[synthesis] {e}")))?;
        let s = &self.simulate;
        v(
            s.seeds >= MIN_SEEDS,
            &format!("[simulate] seeds must be >= {MIN_SEEDS}"),
        )?;
        v(s.steps >= 2, "[simulate] steps must be >= 2")?;
        v(
            s.sweep_points >= MIN_SWEEP_POINTS,
            &format!("[simulate] sweep_points must be >= {MIN_SWEEP_POINTS}"),
        )?;
        v(
            s.trajectory_id < s.seeds as u64,
            "[simulate] trajectory_id must be < seeds",
        )?;
        v(
            s.min_reduction < 1.0 && s.max_peak_ratio > 0.0,
            "[simulate] thresholds out of range",
        )?;
        let m = &self.metrics;
        for (name, s2) in [
            ("sigma2_open", m.sigma2_open),
            ("sigma2_closed", m.sigma2_closed),
        ] {
            v(
                s2 > 0.0 && s2.is_finite(),
                &format!("[metrics] {name} must be > 0"),
            )?;
        }
        m.margin_db.values("margin_db")?;
        m.snr_db.values("snr_db")?;
        v(
            (GH_ORDER_RANGE.0..=GH_ORDER_RANGE.1).contains(&m.quad_order),
            &format!(
                "[metrics] quad_order must lie in [{}, {}]",
                GH_ORDER_RANGE.0, GH_ORDER_RANGE.1
            ),
        )?;
        v(
            m.target_outage > 0.0 && m.target_outage < 0.5,
            "[metrics] target_outage must lie in (0, 0.5)",
        )?;
        v(
            m.ber_level > 0.0 && m.ber_level < 0.5,
            "[metrics] ber_level must lie in (0, 0.5)",
        )?;
        v(
            m.mc_bits >= MIN_MC_BITS,
            &format!("[metrics] mc_bits must be >= {MIN_MC_BITS}"),
        )?;
        Ok(())
    }

    pub fn turbulence(&self) -> Result<TurbulenceParams<f64>, CliError> {
        self.channel.params()
    }

    pub fn plant(&self) -> Result<AugmentedPlant, CliError> {
        self.plant_with(self.plant.conventions())
    }

    pub fn plant_with(&self, conventions: PlantConventions) -> Result<AugmentedPlant, CliError> {
        let tp = self.turbulence()?;
        let ap = self.aperture.params(tp.dt)?;
        let domain = (self.plant.domain[0], self.plant.domain[1]);
        Ok(build_augmented(
            &tp,
            &ap,
            self.plant.d,
            conventions,
            domain,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_matches_defaults() {
        assert_eq!(
            RunConfig::preset(DEFAULT_PRESET).unwrap(),
            RunConfig::default()
        );
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("seed = 1\nbogus = 2\n").is_err());
        assert!(RunConfig::parse("[channel]\nsigma = 0.1\n").is_err());
        assert!(RunConfig::parse("[synthesis.tolerances]\nfeas = 1\n").is_err());
    }

    #[test]
    fn partial_sections_take_defaults() {
        let c = RunConfig::parse("[channel]\nsigma2 = 0.0576\n").unwrap();
        assert_eq!(c.channel.sigma2, 0.0576);
        assert_eq!(c.channel.tau_c, 0.1);
        assert_eq!(c.metrics, MetricsConfig::default());
    }

    #[test]
    fn empty_range_rejected() {
        let r = Range {
            start: 1.0,
            stop: 0.0,
            step: 0.5,
        };
        assert!(r.values("x").is_err());
        let r = Range {
            start: 0.0,
            stop: 1.0,
            step: 0.25,
        };
        assert_eq!(r.values("x").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}

//! Experiment configuration: a flat TOML file naming one experiment. Keys
//! absent from the file take the defaults of that experiment's preset.

use std::path::Path;

use neumann_mc::schemes::SchemeKind;
use neumann_mc::LocalTimeKernel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    MixedEuler,
    MixedWos,
    NeumannPreliminary,
    NeumannEuler,
    NeumannWos,
    SpectralExact,
    SpectralApprox,
    Convection,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MixedEuler => "mixed_euler",
            Experiment::MixedWos => "mixed_wos",
            Experiment::NeumannPreliminary => "neumann_preliminary",
            Experiment::NeumannEuler => "neumann_euler",
            Experiment::NeumannWos => "neumann_wos",
            Experiment::SpectralExact => "spectral_exact",
            Experiment::SpectralApprox => "spectral_approx",
            Experiment::Convection => "convection",
        }
    }

    /// The experiment behind `neumann-mc table k`.
    pub fn for_table(k: u8) -> Option<Self> {
        Some(match k {
            1 => Experiment::MixedEuler,
            2 => Experiment::MixedWos,
            3 => Experiment::NeumannEuler,
            4 => Experiment::NeumannWos,
            5 => Experiment::NeumannPreliminary,
            6 => Experiment::SpectralExact,
            7 => Experiment::SpectralApprox,
            8 => Experiment::Convection,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Stem of the output files.
    pub name: String,
    pub seed: u64,

    pub alphas: Vec<f64>,
    pub beta_x: f64,
    pub beta_y: f64,
    /// Evaluation points.
    pub points: Vec<[f64; 2]>,
    /// Monte Carlo trajectories per point.
    pub n: u64,
    /// Final time (a cap for mixed problems).
    pub t0: f64,

    /// Euler parameter sets `(δ, ξ)`.
    pub delta_xi: Vec<[f64; 2]>,
    /// `half_normal`, `normal` or `as_printed`.
    pub kernel: String,

    /// WOS boundary layer width.
    pub eps: f64,
    /// Scheme parameters `h`.
    pub hs: Vec<f64>,
    pub schemes: Vec<String>,
    /// Kinetic scheme charges `h²` instead of `h² t_c`.
    pub kinetic_fixed_time: bool,

    /// Bias grid size `P`.
    pub grid_p: usize,

    /// Horizons of the preliminary scan.
    pub times: Vec<f64>,
    /// Horizon range of the variance regression.
    pub fit_window: [f64; 2],

    /// Spectral parameter sets `(δ, M, Q)`; `Q` is unused with exact
    /// centering.
    pub spectral_sets: Vec<[f64; 3]>,
    pub basis: Vec<usize>,
    pub xi: f64,

    /// Cached unit-disk table, built on first use.
    pub table_path: String,
    pub table_pairs: usize,
    pub table_paths: usize,
    pub table_path_len: usize,
    pub table_delta: f64,
}

const THIRDS: [f64; 3] = [1.0 / 3.0, 2.0 / 3.0, 1.0];

impl ExperimentConfig {
    /// Published parameters of `experiment`.
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            name: experiment.name().to_string(),
            seed: 1,
            alphas: THIRDS.to_vec(),
            beta_x: 0.0,
            beta_y: 0.0,
            points: vec![[0.8, 0.0], [0.0, 0.0], [-0.8, 0.0]],
            n: 50_000,
            t0: 10.0,
            delta_xi: vec![[0.01, 0.01], [0.001, 0.001]],
            kernel: "half_normal".into(),
            eps: 1e-6,
            hs: vec![0.1, 0.05],
            schemes: vec!["oneside3".into()],
            kinetic_fixed_time: false,
            grid_p: 3,
            times: Vec::new(),
            fit_window: [9.0, 16.0],
            spectral_sets: Vec::new(),
            basis: vec![2, 4],
            xi: 0.001,
            table_path: "wos_table.bin".into(),
            table_pairs: 1_000_000,
            table_paths: 100_000,
            table_path_len: 100,
            table_delta: 1e-4,
        };
        let m1m2 = |d: f64, q: f64| [[d, 1000.0, q], [d, 5000.0, q]];
        match experiment {
            Experiment::MixedEuler => {
                c.t0 = 100.0;
                c.delta_xi = vec![[0.01, 0.01], [0.001, 0.000001], [0.001, 0.001]];
            }
            Experiment::MixedWos => {
                c.hs = vec![0.2, 0.1];
                c.schemes = vec!["oneside3".into(), "kinetic".into(), "oneside2".into()];
            }
            Experiment::NeumannPreliminary => {
                c.alphas = Vec::new();
                c.points = vec![[-0.5, -0.5]];
                c.n = 50_000_000;
                c.delta_xi = vec![[0.001, 0.001]];
                c.times = std::iter::once(0.1).chain((1..=20).map(f64::from)).collect();
            }
            Experiment::NeumannEuler | Experiment::NeumannWos => {
                c.points = vec![[0.0, 0.0], [-0.2, 0.2], [-0.8, 0.8], [0.0, 0.8], [0.2, 0.6], [0.4, 0.4]];
            }
            Experiment::SpectralExact => {
                c.alphas = vec![1.0 / 3.0];
                c.points = Vec::new();
                c.spectral_sets = [m1m2(0.01, 0.0), m1m2(0.001, 0.0)].concat();
            }
            Experiment::SpectralApprox => {
                c.alphas = vec![1.0 / 3.0];
                c.points = Vec::new();
                c.spectral_sets = vec![
                    [0.01, 1000.0, 100.0],
                    [0.01, 1000.0, 10000.0],
                    [0.01, 5000.0, 100.0],
                    [0.01, 5000.0, 10000.0],
                    [0.001, 1000.0, 100.0],
                    [0.001, 1000.0, 10000.0],
                    [0.001, 5000.0, 100.0],
                    [0.001, 5000.0, 10000.0],
                ];
            }
            Experiment::Convection => {
                c.alphas = vec![0.3];
                c.beta_x = 0.2;
                c.beta_y = 0.1;
                c.points = Vec::new();
                c.spectral_sets = vec![
                    [0.01, 1000.0, 100.0],
                    [0.01, 1000.0, 10000.0],
                    [0.01, 5000.0, 100.0],
                    [0.01, 5000.0, 10000.0],
                    [0.001, 1000.0, 10000.0],
                    [0.001, 5000.0, 10000.0],
                ];
            }
        }
        c
    }

    /// Parses a config file over the preset of the experiment it names.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let experiment: Experiment = user
            .get("experiment")
            .ok_or_else(|| CliError::Config("missing key `experiment`".into()))?
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::preset(experiment)).map_err(|e| CliError::Config(e.to_string()))?;
        merged.extend(user);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scheme_kinds(&self) -> CliResult<Vec<SchemeKind>> {
        self.schemes
            .iter()
            .map(|s| s.parse().map_err(|e: neumann_mc::Error| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn local_time_kernel(&self) -> CliResult<LocalTimeKernel> {
        self.kernel
            .parse()
            .map_err(|e: neumann_mc::Error| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("`name` must be a plain file stem");
        }
        if self.n < 2 {
            return bad("`n` must be at least 2");
        }
        if !pos(self.t0) {
            return bad("`t0` must be positive");
        }
        if self.points.iter().flatten().any(|v| v.is_nan() || v.abs() >= 1.0) {
            return bad("`points` must lie strictly inside the square");
        }
        self.local_time_kernel()?;
        let kinds = self.scheme_kinds()?;
        use Experiment::*;
        let needs_alphas = !matches!(self.experiment, NeumannPreliminary);
        if needs_alphas && (self.alphas.is_empty() || self.alphas.iter().any(|a| !pos(*a))) {
            return bad("`alphas` must be non-empty and positive");
        }
        if matches!(self.experiment, MixedEuler | MixedWos | NeumannPreliminary | NeumannEuler | NeumannWos)
            && self.points.is_empty()
        {
            return bad("`points` must not be empty");
        }
        if matches!(self.experiment, MixedEuler | NeumannPreliminary | NeumannEuler)
            && (self.delta_xi.is_empty() || self.delta_xi.iter().flatten().any(|v| !pos(*v)))
        {
            return bad("`delta_xi` must be non-empty and positive");
        }
        if matches!(self.experiment, MixedWos | NeumannWos) {
            if self.hs.is_empty() || self.hs.iter().any(|h| !pos(*h)) || !pos(self.eps) {
                return bad("`hs` must be non-empty and positive, `eps` positive");
            }
            if kinds.is_empty() {
                return bad("`schemes` must not be empty");
            }
            if self.experiment == NeumannWos && kinds.iter().any(|k| !k.tracks_time()) {
                return bad("fd1 reports no elapsed time and cannot run a finite-horizon problem");
            }
            if self.table_pairs == 0 || !pos(self.table_delta) || self.table_paths > self.table_pairs {
                return bad("table parameters must satisfy pairs > 0, paths <= pairs, delta > 0");
            }
            if self.experiment == NeumannWos && (self.table_paths == 0 || self.table_path_len < 2) {
                return bad("finite-horizon WOS needs stored paths of length >= 2");
            }
        }
        if matches!(self.experiment, NeumannEuler | NeumannWos) && self.grid_p == 0 {
            return bad("`grid_p` must be positive");
        }
        if self.experiment == NeumannPreliminary {
            if self.times.is_empty() || self.times.iter().any(|t| !pos(*t)) || self.times.windows(2).any(|w| w[1] <= w[0]) {
                return bad("`times` must be positive and increasing");
            }
            if self.times.iter().filter(|t| (self.fit_window[0]..=self.fit_window[1]).contains(*t)).count() < 2 {
                return bad("`fit_window` must cover at least two horizons");
            }
        }
        if matches!(self.experiment, SpectralExact | SpectralApprox | Convection) {
            if self.spectral_sets.is_empty() {
                return bad("`spectral_sets` must not be empty");
            }
            for [d, m, q] in &self.spectral_sets {
                if !pos(*d) || *m < 2.0 || m.fract() != 0.0 || q.fract() != 0.0 || *q < 0.0 {
                    return bad("`spectral_sets` entries are (delta > 0, integer M >= 2, integer Q >= 0)");
                }
                if self.experiment != SpectralExact && *q < 1.0 {
                    return bad("approximate centering needs Q >= 1");
                }
            }
            if self.basis.is_empty() || self.basis.iter().any(|n| *n < 2 || n % 2 != 0) {
                return bad("`basis` degrees must be even and at least 2");
            }
            if !pos(self.xi) {
                return bad("`xi` must be positive");
            }
        }
        Ok(())
    }
}

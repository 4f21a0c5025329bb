//! Run configuration: a TOML document with one section per pipeline stage.
//!
//! Every section and key is optional; unknown keys are rejected. Relative
//! paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bcdi_core::retrieval::{Algorithm, RetrievalConfig, ShrinkWrap};
use bcdi_core::sim::{Builtin, NoiseModel, PhantomSource};
use bcdi_core::solver::{Mode, SolverConfig};
use bcdi_core::spectrum::{
    continuous_spectrum, continuous_spectrum_with_reference, harmonics_spectrum, AdjointScaling, BoundSpectrum,
    Spectrum,
};

use crate::CliError;

/// Commented reference document with every default, printed by `--help`.
pub const REFERENCE: &str = include_str!("reference.toml");

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub phantom: PhantomSection,
    pub spectrum: Option<SpectrumSection>,
    pub noise: Option<NoiseSection>,
    pub solver: SolverSection,
    pub retrieval: RetrievalSection,
    pub paths: PathsSection,
    pub metrics: MetricsSection,
    pub render: RenderSection,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    Digit,
    Disk,
    Blobs,
    TestCard,
    File,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSection {
    pub kind: PhantomKind,
    /// Embedding grid `[W, L]`.
    pub shape: [usize; 2],
    pub digit: Option<u8>,
    pub size: Option<usize>,
    pub radius: Option<usize>,
    pub count: Option<usize>,
    pub blob_seed: Option<u64>,
    pub file: Option<PathBuf>,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self {
            kind: PhantomKind::Digit,
            shape: [128, 128],
            digit: None,
            size: None,
            radius: None,
            count: None,
            blob_seed: None,
            file: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub file: Option<PathBuf>,
    pub orders: Option<Vec<u32>>,
    pub weights: Option<Vec<f64>>,
    pub center: Option<f64>,
    pub bandwidth: Option<f64>,
    pub points: Option<usize>,
    pub reference: Option<f64>,
    pub ratios: Option<Vec<f64>>,
    pub normalize: bool,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Poisson,
    Gaussian,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub model: NoiseKind,
    pub photons: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Momentum,
    Plain,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingName {
    ChannelNormalized,
    Exact,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mode: ModeName,
    pub step_size: f64,
    pub dt: f64,
    pub friction: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub project: bool,
    pub scaling: ScalingName,
    pub divergence_factor: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mode: ModeName::Momentum,
            step_size: d.step_size,
            dt: d.dt,
            friction: d.friction,
            max_iter: d.max_iter,
            residual_tol: d.residual_tol,
            project: d.project,
            scaling: ScalingName::ChannelNormalized,
            divergence_factor: d.divergence_factor,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmName {
    Hio,
    Raar,
}

/// `"auto"` or an explicit `[w, h]`.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum WindowSpec {
    Auto(String),
    Explicit([usize; 2]),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalSection {
    pub algorithm: AlgorithmName,
    pub beta: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub initial_threshold: f64,
    pub complex_object: bool,
    pub positivity: bool,
    pub measured_window: Option<WindowSpec>,
    pub shrinkwrap_interval: usize,
    pub shrinkwrap_sigma: f64,
    pub shrinkwrap_decay: f64,
    pub shrinkwrap_min_sigma: f64,
    pub shrinkwrap_threshold: f64,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let d = RetrievalConfig::default();
        Self {
            algorithm: AlgorithmName::Hio,
            beta: d.beta,
            iterations: d.iterations,
            restarts: d.restarts,
            initial_threshold: d.initial_threshold,
            complex_object: d.complex_object,
            positivity: d.positivity,
            measured_window: None,
            shrinkwrap_interval: d.shrinkwrap.interval,
            shrinkwrap_sigma: d.shrinkwrap.sigma,
            shrinkwrap_decay: d.shrinkwrap.decay,
            shrinkwrap_min_sigma: d.shrinkwrap.min_sigma,
            shrinkwrap_threshold: d.shrinkwrap.threshold,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            input: None,
            reference: None,
            output: None,
            trace: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub r_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Log,
    Linear,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub scale: Scale,
    pub decades: f64,
    pub gamma: f64,
    pub crop: Option<[usize; 2]>,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            scale: Scale::Log,
            decades: 4.0,
            gamma: 1.0,
            crop: None,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

/// A parsed config together with the bytes it came from.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub text: String,
    pub path: PathBuf,
}

impl Loaded {
    fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir().join(p)
        }
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let config = parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Loaded {
        config,
        text,
        path: path.to_path_buf(),
    })
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

impl PhantomSection {
    pub fn shape(&self) -> (usize, usize) {
        (self.shape[0], self.shape[1])
    }

    pub fn source(&self, loaded: &Loaded) -> Result<PhantomSource, CliError> {
        let set = [
            ("digit", self.digit.is_some()),
            ("size", self.size.is_some()),
            ("radius", self.radius.is_some()),
            ("count", self.count.is_some()),
            ("blob_seed", self.blob_seed.is_some()),
            ("file", self.file.is_some()),
        ];
        let allowed: &[&str] = match self.kind {
            PhantomKind::Digit => &["digit", "size"],
            PhantomKind::Disk => &["radius"],
            PhantomKind::Blobs => &["count", "size", "blob_seed"],
            PhantomKind::TestCard => &["size"],
            PhantomKind::File => &["file"],
        };
        for (key, present) in set {
            if present && !allowed.contains(&key) {
                return config_err(format!("phantom.{key} does not apply to kind {:?}", self.kind));
            }
        }
        let half = self.shape[0].min(self.shape[1]) / 2;
        Ok(match self.kind {
            PhantomKind::Digit => PhantomSource::Builtin(Builtin::Digit {
                digit: self.digit.unwrap_or(2),
                size: self.size.unwrap_or(half),
            }),
            PhantomKind::Disk => PhantomSource::Builtin(Builtin::Disk {
                radius: self.radius.unwrap_or(half / 2),
            }),
            PhantomKind::Blobs => PhantomSource::Builtin(Builtin::Blobs {
                count: self.count.unwrap_or(5),
                size: self.size.unwrap_or(half),
                seed: self.blob_seed.unwrap_or(0),
            }),
            PhantomKind::TestCard => PhantomSource::Builtin(Builtin::TestCard {
                size: self.size.unwrap_or(half),
            }),
            PhantomKind::File => match &self.file {
                Some(f) => PhantomSource::File(loaded.resolve(f)),
                None => return config_err("phantom.kind = \"file\" needs phantom.file"),
            },
        })
    }
}

impl SpectrumSection {
    /// Follows `file`, if set, to the section it names.
    pub fn resolved(&self, loaded: &Loaded) -> Result<SpectrumSection, CliError> {
        let Some(file) = &self.file else {
            return Ok(self.clone());
        };
        if *self != (SpectrumSection { file: Some(file.clone()), ..Default::default() })
            && *self
                != (SpectrumSection {
                    file: Some(file.clone()),
                    normalize: self.normalize,
                    ..Default::default()
                })
        {
            return config_err("spectrum.file cannot be combined with inline spectrum keys other than normalize");
        }
        let path = loaded.resolve(file);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut inner: SpectrumSection =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if inner.file.is_some() {
            return config_err(format!("{}: spectrum files cannot refer to other files", path.display()));
        }
        inner.normalize |= self.normalize;
        Ok(inner)
    }

    pub fn build(&self) -> Result<Spectrum, CliError> {
        let harmonic = self.orders.is_some();
        let continuous = self.center.is_some() || self.bandwidth.is_some() || self.points.is_some();
        let table = self.ratios.is_some();
        let forms = [harmonic, continuous, table].iter().filter(|&&f| f).count();
        if forms != 1 {
            return config_err(
                "spectrum needs exactly one of {orders, weights}, {center, bandwidth, points} or {ratios, weights}",
            );
        }
        if self.reference.is_some() && !continuous {
            return config_err("spectrum.reference applies only to continuous spectra");
        }
        let spectrum = if continuous {
            if self.weights.is_some() {
                return config_err("continuous spectra take no weights");
            }
            let (Some(c), Some(bw), Some(n)) = (self.center, self.bandwidth, self.points) else {
                return config_err("continuous spectrum needs center, bandwidth and points");
            };
            match self.reference {
                Some(r) => continuous_spectrum_with_reference(c, bw, n, r),
                None => continuous_spectrum(c, bw, n),
            }
        } else {
            let Some(weights) = &self.weights else {
                return config_err("spectrum.weights is required with orders or ratios");
            };
            match (&self.orders, &self.ratios) {
                (Some(orders), _) => harmonics_spectrum(orders, weights),
                (_, Some(ratios)) => Spectrum::from_table(ratios, weights),
                _ => unreachable!("form checked above"),
            }
        }
        .map_err(|e| CliError::Config(format!("spectrum: {e}")))?;
        Ok(if self.normalize {
            spectrum.sum_normalized()
        } else {
            spectrum
        })
    }
}

impl RunConfig {
    pub fn spectrum(&self, loaded: &Loaded, shape: (usize, usize)) -> Result<Option<BoundSpectrum>, CliError> {
        let Some(section) = &self.spectrum else {
            return Ok(None);
        };
        let spec = section.resolved(loaded)?.build()?;
        spec.bind(shape)
            .map(Some)
            .map_err(|e| CliError::Config(format!("spectrum: {e}")))
    }

    pub fn require_spectrum(&self, loaded: &Loaded, shape: (usize, usize)) -> Result<BoundSpectrum, CliError> {
        self.spectrum(loaded, shape)?
            .ok_or_else(|| CliError::Config("this command needs a [spectrum] section".into()))
    }

    pub fn noise(&self) -> Result<Option<NoiseModel>, CliError> {
        let Some(n) = &self.noise else {
            return Ok(None);
        };
        match (n.model, n.photons, n.sigma) {
            (NoiseKind::Poisson, Some(photons), None) => Ok(Some(NoiseModel::Poisson { photons })),
            (NoiseKind::Gaussian, None, Some(sigma)) => Ok(Some(NoiseModel::Gaussian { sigma })),
            (NoiseKind::Poisson, ..) => config_err("poisson noise takes photons (and no sigma)"),
            (NoiseKind::Gaussian, ..) => config_err("gaussian noise takes sigma (and no photons)"),
        }
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        let cfg = SolverConfig {
            step_size: s.step_size,
            dt: s.dt,
            friction: s.friction,
            max_iter: s.max_iter,
            residual_tol: s.residual_tol,
            project: s.project,
            mode: match s.mode {
                ModeName::Momentum => Mode::Momentum,
                ModeName::Plain => Mode::Plain,
            },
            scaling: match s.scaling {
                ScalingName::ChannelNormalized => AdjointScaling::ChannelNormalized,
                ScalingName::Exact => AdjointScaling::Exact,
            },
            divergence_factor: s.divergence_factor,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("solver: {e}")))?;
        Ok(cfg)
    }

    /// `spectrum` is needed only to size an `"auto"` measured window.
    pub fn retrieval(
        &self,
        seed: u64,
        shape: (usize, usize),
        spectrum: Option<&BoundSpectrum>,
    ) -> Result<RetrievalConfig, CliError> {
        let r = &self.retrieval;
        let measured_window = match &r.measured_window {
            None => None,
            Some(WindowSpec::Explicit([w, h])) => Some((*w, *h)),
            Some(WindowSpec::Auto(s)) if s == "auto" => {
                let Some(spec) = spectrum else {
                    return config_err("retrieval.measured_window = \"auto\" needs a [spectrum] section");
                };
                let side = |n: usize| {
                    let w = (n as f64 / spec.min_realized_ratio()).floor() as usize;
                    w - (n - w) % 2
                };
                Some((side(shape.0), side(shape.1)))
            }
            Some(WindowSpec::Auto(s)) => {
                return config_err(format!("retrieval.measured_window must be \"auto\" or [w, h], got {s:?}"))
            }
        };
        let cfg = RetrievalConfig {
            algorithm: match r.algorithm {
                AlgorithmName::Hio => Algorithm::Hio,
                AlgorithmName::Raar => Algorithm::Raar,
            },
            beta: r.beta,
            iterations: r.iterations,
            shrinkwrap: ShrinkWrap {
                interval: r.shrinkwrap_interval,
                sigma: r.shrinkwrap_sigma,
                decay: r.shrinkwrap_decay,
                min_sigma: r.shrinkwrap_min_sigma,
                threshold: r.shrinkwrap_threshold,
            },
            initial_threshold: r.initial_threshold,
            seed,
            complex_object: r.complex_object,
            positivity: r.positivity,
            restarts: r.restarts,
            measured_window,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("retrieval: {e}")))?;
        Ok(cfg)
    }

    pub fn render(&self) -> Result<RenderSection, CliError> {
        let r = &self.render;
        if !(r.gamma > 0.0 && r.gamma.is_finite()) {
            return config_err(format!("render.gamma must be positive, got {}", r.gamma));
        }
        if !(r.decades > 0.0 && r.decades.is_finite()) {
            return config_err(format!("render.decades must be positive, got {}", r.decades));
        }
        Ok(r.clone())
    }
}

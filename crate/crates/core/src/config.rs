//! Run configuration (TOML, `version = 1`).
//!
//! ```toml
//! version = 1
//!
//! [corpus]
//! manifest = "corpus.toml"
//! split_marker = "HAVE ADOPTED THIS REGULATION:"   # optional
//! split = true                                     # false scores the influencee whole
//!
//! [preprocess]
//! annotations = ["annotations.tsv"]
//! lexicons = ["lexicon.tsv"]
//! [preprocess.blocklist]
//! virtue = ["Kant", "Bentham"]
//!
//! [models]
//! select = ["reference"]        # registry names or identifiers
//! pooling = "mean"              # optional override for transformer models
//! bundles_dir = "bundles"       # one sub-directory per model identifier
//!
//! [scoring]
//! strategy = "pair-mean"        # pair-mean | centroid | centroid-normalized | best-match-sym
//! lateral = true
//! dump_matrices = false         # sentence matrices as CSV, for debugging
//!
//! [run]
//! output_dir = "out"
//! strict_precedence = true
//! strip_structure = false
//! cache_dir = "cache"           # optional; see CACHE_ENV
//! threads = 4                   # optional
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusManifest, DEFAULT_SPLIT_MARKER};
use crate::digest::sha256_hex;
use crate::embed::{find_model, ModelSpec, Pooling};
use crate::similarity::AggregationStrategy;

pub const CONFIG_VERSION: u32 = 1;
/// Default embedding cache directory when the config does not name one.
pub const CACHE_ENV: &str = "STS_INFLUENCE_CACHE_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported config version {0}; expected {CONFIG_VERSION}")]
    Version(u32),
    #[error("{what} not found: {path}")]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("unknown model {0:?}; see `models list`")]
    UnknownModel(String),
    #[error("{0}")]
    Invalid(String),
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub manifest: PathBuf,
    #[serde(default)]
    pub split_marker: Option<String>,
    #[serde(default = "yes")]
    pub split: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    #[serde(default)]
    pub annotations: Vec<PathBuf>,
    #[serde(default)]
    pub lexicons: Vec<PathBuf>,
    /// Per influencer id: names that must not survive preprocessing.
    #[serde(default)]
    pub blocklist: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    #[serde(default = "default_models")]
    pub select: Vec<String>,
    #[serde(default)]
    pub pooling: Option<Pooling>,
    #[serde(default)]
    pub bundles_dir: Option<PathBuf>,
}

fn default_models() -> Vec<String> {
    vec!["reference".into()]
}

impl Default for ModelsSection {
    fn default() -> Self {
        Self { select: default_models(), pooling: None, bundles_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringSection {
    #[serde(default)]
    pub strategy: AggregationStrategy,
    #[serde(default = "yes")]
    pub lateral: bool,
    /// Write every sentence similarity matrix as CSV under `score/matrices`.
    #[serde(default)]
    pub dump_matrices: bool,
}

impl Default for ScoringSection {
    fn default() -> Self {
        Self { strategy: AggregationStrategy::default(), lateral: true, dump_matrices: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub output_dir: PathBuf,
    #[serde(default = "yes")]
    pub strict_precedence: bool,
    #[serde(default)]
    pub strip_structure: bool,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub version: u32,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub scoring: ScoringSection,
    pub run: RunSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl AnalysisConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: AnalysisConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| match source.kind() {
            std::io::ErrorKind::NotFound => ConfigError::MissingPath { what: "config file", path: path.to_path_buf() },
            _ => ConfigError::Io { path: path.to_path_buf(), source },
        })?;
        let cfg = Self::parse(&text, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        let must_exist = |what: &'static str, p: &Path| {
            let full = self.resolve(p);
            if full.is_file() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath { what, path: full })
            }
        };
        must_exist("corpus manifest", &self.corpus.manifest)?;
        for p in &self.preprocess.annotations {
            must_exist("annotation file", p)?;
        }
        for p in &self.preprocess.lexicons {
            must_exist("lexicon file", p)?;
        }
        if self.models.select.is_empty() {
            return Err(ConfigError::Invalid("models.select is empty".into()));
        }
        let specs = self.model_specs()?;
        for (i, a) in specs.iter().enumerate() {
            if specs[..i].iter().any(|b| b.name == a.name) {
                return Err(ConfigError::Invalid(format!("model {} selected twice", a.name)));
            }
        }
        if specs.iter().any(|s| !s.is_reference()) {
            match &self.models.bundles_dir {
                Some(d) if self.resolve(d).is_dir() => {}
                Some(d) => return Err(ConfigError::MissingPath { what: "bundles directory", path: self.resolve(d) }),
                None => return Err(ConfigError::Invalid("transformer models need models.bundles_dir".into())),
            }
        }
        if self.run.threads == Some(0) {
            return Err(ConfigError::Invalid("run.threads must be positive".into()));
        }
        if self.corpus.split && self.split_marker().is_empty() {
            return Err(ConfigError::Invalid("corpus.split_marker is empty".into()));
        }
        Ok(())
    }

    /// Selected models with the pooling override applied to transformers.
    pub fn model_specs(&self) -> Result<Vec<ModelSpec>, ConfigError> {
        self.models
            .select
            .iter()
            .map(|name| {
                let mut spec = find_model(name).map_err(|_| ConfigError::UnknownModel(name.clone()))?;
                if let (Some(p), false) = (self.models.pooling, spec.is_reference()) {
                    spec.pooling = p;
                }
                Ok(spec)
            })
            .collect()
    }

    pub fn split_marker(&self) -> &str {
        self.corpus.split_marker.as_deref().unwrap_or(DEFAULT_SPLIT_MARKER)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.run.output_dir)
    }

    pub fn bundle_dir(&self, spec: &ModelSpec) -> Option<PathBuf> {
        self.models.bundles_dir.as_ref().map(|d| self.resolve(d).join(&spec.identifier))
    }

    /// Config, then `$STS_INFLUENCE_CACHE_DIR`, then `<output_dir>/cache`.
    pub fn cache_dir(&self) -> PathBuf {
        if let Some(d) = &self.run.cache_dir {
            return self.resolve(d);
        }
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output_dir().join("cache"),
        }
    }

    pub fn manifest(&self) -> Result<CorpusManifest, crate::corpus::CorpusError> {
        CorpusManifest::load(&self.resolve(&self.corpus.manifest))
    }

    /// Identifies everything that determines the results: the settings
    /// (output location, cache location and thread count excluded) and the
    /// bytes of every input file.
    pub fn config_hash(&self) -> Result<String, ConfigError> {
        let mut canon = self.clone();
        canon.run.output_dir = PathBuf::new();
        canon.run.cache_dir = None;
        canon.run.threads = None;
        let mut material = serde_json::to_string(&canon).expect("config serializes");
        let mut inputs: Vec<PathBuf> = vec![self.resolve(&self.corpus.manifest)];
        inputs.extend(self.preprocess.annotations.iter().map(|p| self.resolve(p)));
        inputs.extend(self.preprocess.lexicons.iter().map(|p| self.resolve(p)));
        if let Ok(m) = self.manifest() {
            inputs.extend(m.documents.iter().map(|d| d.path.clone()));
        }
        for p in inputs {
            let bytes = std::fs::read(&p).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
            material.push('\n');
            material.push_str(&sha256_hex(&bytes));
        }
        Ok(sha256_hex(material.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "Virtue matters.").unwrap();
        std::fs::write(dir.path().join("b.txt"), "Recitals. HAVE ADOPTED THIS REGULATION: Article.").unwrap();
        std::fs::write(
            dir.path().join("corpus.toml"),
            "[[document]]\nid = \"a\"\ntitle = \"A\"\nrole = \"influencer\"\nstart_year = -400\nend_year = 2020\npath = \"a.txt\"\n\
             [[document]]\nid = \"b\"\ntitle = \"B\"\nrole = \"influencee\"\nstart_year = 2024\nend_year = 2024\npath = \"b.txt\"\n",
        )
        .unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "version = 1\n[corpus]\nmanifest = \"corpus.toml\"\n[run]\noutput_dir = \"out\"\n").unwrap();
        (dir, cfg)
    }

    #[test]
    fn defaults() {
        let (_d, path) = setup();
        let c = AnalysisConfig::load(&path).unwrap();
        assert_eq!(c.scoring.strategy, AggregationStrategy::PairMean);
        assert!(c.run.strict_precedence && c.scoring.lateral && c.corpus.split);
        assert_eq!(c.split_marker(), DEFAULT_SPLIT_MARKER);
        assert!(c.model_specs().unwrap()[0].is_reference());
    }

    #[test]
    fn hash_ignores_location_and_threads() {
        let (d, path) = setup();
        let a = AnalysisConfig::load(&path).unwrap();
        let mut b = a.clone();
        b.run.output_dir = "elsewhere".into();
        b.run.threads = Some(3);
        let before = a.config_hash().unwrap();
        assert_eq!(before, b.config_hash().unwrap());
        b.scoring.strategy = AggregationStrategy::BestMatchSym;
        assert_ne!(before, b.config_hash().unwrap());
        std::fs::write(d.path().join("a.txt"), "Virtue matters a lot.").unwrap();
        assert_ne!(before, a.config_hash().unwrap());
    }

    #[test]
    fn validation_errors() {
        let (d, path) = setup();
        let base = std::fs::read_to_string(&path).unwrap();
        let write = |extra: &str| {
            std::fs::write(&path, format!("{base}{extra}")).unwrap();
            AnalysisConfig::load(&path)
        };
        assert!(matches!(write("[preprocess]\nannotations = [\"nope.tsv\"]\n"), Err(ConfigError::MissingPath { .. })));
        assert!(matches!(write("[models]\nselect = [\"GPT\"]\n"), Err(ConfigError::UnknownModel(_))));
        assert!(matches!(write("[models]\nselect = [\"SBERT\"]\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(write("[scoring]\nstrategy = \"median\"\n"), Err(ConfigError::Parse { .. })));
        assert!(matches!(write("[run.extra]\n"), Err(ConfigError::Parse { .. })));
        std::fs::write(&path, base.replace("version = 1", "version = 2")).unwrap();
        assert!(matches!(AnalysisConfig::load(&path), Err(ConfigError::Version(2))));
        drop(d);
    }
}

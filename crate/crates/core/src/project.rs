//! Project loading: the `tlv.toml` file, multi-file sources and the
//! standalone `.sva` files that are wrapped into checker clusters.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elab::{elaborate, DesignIR, ElabError};
use crate::frontend::ast::{BuildItem, Ident, JoinSource};
use crate::frontend::{parse, resolve::resolve_with, Diagnostics, ResolvedUnit};
use crate::sva::LowerOptions;

pub const CONFIG_FILE: &str = "tlv.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// Source files relative to the config file.
    pub sources: Vec<PathBuf>,
    /// Root VTRs to prove; empty means every VTR no other VTR calls.
    #[serde(default)]
    pub top: Vec<String>,
    #[serde(default = "default_budget")]
    pub budget_bits: u32,
    #[serde(default = "default_cycles")]
    pub cycles: u32,
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub sva: SvaConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvaConfig {
    pub bound: u32,
    pub trace_len: u32,
}

impl Default for SvaConfig {
    fn default() -> Self {
        let o = LowerOptions::default();
        SvaConfig {
            bound: o.bound,
            trace_len: o.trace_len,
        }
    }
}

impl From<SvaConfig> for LowerOptions {
    fn from(c: SvaConfig) -> Self {
        LowerOptions {
            bound: c.bound,
            trace_len: c.trace_len,
        }
    }
}

fn default_budget() -> u32 {
    crate::sym::DEFAULT_BUDGET_BITS
}

fn default_cycles() -> u32 {
    crate::sym::ExecConfig::default().max_cycles
}

impl ProjectConfig {
    pub fn parse(text: &str) -> Result<ProjectConfig, toml::de::Error> {
        toml::from_str(text)
    }

    /// Config for a plain list of source files.
    pub fn for_sources(sources: Vec<PathBuf>) -> ProjectConfig {
        ProjectConfig {
            sources,
            top: Vec::new(),
            budget_bits: default_budget(),
            cycles: default_cycles(),
            cache: None,
            jobs: 0,
            sva: SvaConfig::default(),
        }
    }
}

/// One input text with the name used in diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Source {
    pub name: String,
    pub text: String,
}

impl Source {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Source {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn read(path: &Path) -> Result<Source, CompileError> {
        let text = fs::read_to_string(path).map_err(|source| CompileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Source::new(path.display().to_string(), text))
    }

    fn is_sva(&self) -> bool {
        self.name.ends_with(".sva")
    }

    /// Cluster name for a standalone SVA file.
    fn sva_cluster(&self) -> String {
        let stem = Path::new(&self.name)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let clean: String = stem
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        format!("sva_{clean}")
    }
}

/// A diagnostic mapped back to its file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Located {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl fmt::Display for Located {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.file, self.line, self.col, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: toml::de::Error },
    #[error("no source files given")]
    NoSources,
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Frontend(Vec<Located>),
    #[error("elaboration: {0}")]
    Elab(#[from] ElabError),
}

/// Lines of the concatenated text owned by each source.
struct LineMap {
    /// (first global line, file, lines of wrapper before the file text)
    segments: Vec<(u32, String, u32)>,
}

impl LineMap {
    fn locate(&self, diags: &Diagnostics) -> Vec<Located> {
        diags
            .iter()
            .map(|d| {
                let line = d.span.line.max(1);
                let (start, file, pad) = self
                    .segments
                    .iter()
                    .rev()
                    .find(|(s, _, _)| *s <= line)
                    .cloned()
                    .unwrap_or((1, String::from("<input>"), 0));
                Located {
                    file,
                    line: (line - start + 1).saturating_sub(pad).max(1),
                    col: d.span.col,
                    message: d.message.clone(),
                }
            })
            .collect()
    }
}

/// Output of a successful compile.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub unit: ResolvedUnit,
    pub ir: DesignIR,
}

/// Parse, resolve and elaborate a set of sources as one design.
///
/// `.sva` files become a cluster `sva_<stem>` joined into the top build.
pub fn compile_sources(sources: &[Source], sva: &LowerOptions) -> Result<Compiled, CompileError> {
    if sources.is_empty() {
        return Err(CompileError::NoSources);
    }
    let mut text = String::new();
    let mut segments = Vec::new();
    let mut line = 1u32;
    let mut sva_clusters = Vec::new();
    for s in sources {
        let (body, pad) = if s.is_sva() {
            let name = s.sva_cluster();
            let body = format!("cluster {name} {{ sva {{\n{}\n}} }}\n", s.text);
            sva_clusters.push(name);
            (body, 1)
        } else {
            (format!("{}\n", s.text), 0)
        };
        segments.push((line, s.name.clone(), pad));
        line += body.matches('\n').count() as u32;
        text.push_str(&body);
    }
    let map = LineMap { segments };
    let mut unit = parse(&text).map_err(|d| CompileError::Frontend(map.locate(&d)))?;
    if let Some(b) = unit.builds.first_mut() {
        for name in sva_clusters {
            let span = b.span;
            b.items.push(BuildItem::Join {
                src: JoinSource::Named(Ident::new(name, span)),
                dst: b.name.clone(),
                span,
            });
        }
    }
    let unit = resolve_with(unit, sva).map_err(|d| CompileError::Frontend(map.locate(&d)))?;
    let ir = elaborate(&unit)?;
    Ok(Compiled { unit, ir })
}

/// A loaded project: its config, the directory paths are relative to,
/// and the source texts.
#[derive(Debug, Clone)]
pub struct Project {
    pub config: ProjectConfig,
    pub root: PathBuf,
    pub sources: Vec<Source>,
}

impl Project {
    /// Load `tlv.toml` at `path` (or inside it, if it is a directory).
    pub fn load(path: &Path) -> Result<Project, CompileError> {
        let file = if path.is_dir() {
            path.join(CONFIG_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|source| CompileError::Io {
            path: file.clone(),
            source,
        })?;
        let config = ProjectConfig::parse(&text).map_err(|source| CompileError::Config {
            path: file.clone(),
            source,
        })?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Project::from_config(config, root)
    }

    pub fn from_config(config: ProjectConfig, root: PathBuf) -> Result<Project, CompileError> {
        let sources = config
            .sources
            .iter()
            .map(|p| Source::read(&root.join(p)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Project { config, root, sources })
    }

    /// A project made of source files without a config.
    pub fn from_files(paths: &[PathBuf]) -> Result<Project, CompileError> {
        Project::from_config(ProjectConfig::for_sources(paths.to_vec()), PathBuf::new())
    }

    pub fn compile(&self) -> Result<Compiled, CompileError> {
        compile_sources(&self.sources, &self.config.sva.into())
    }

    /// Configured cache directory, resolved against the project root.
    pub fn cache_dir(&self) -> PathBuf {
        let configured = self.config.cache.as_ref().map(|c| self.root.join(c));
        crate::proof::cache_dir(configured.as_deref())
    }

    /// Configured roots, or every uncalled VTR.
    pub fn roots(&self, ir: &DesignIR) -> Vec<String> {
        if self.config.top.is_empty() {
            crate::proof::default_roots(ir)
        } else {
            self.config.top.clone()
        }
    }
}

/// Compile one in-memory source for unit tests; panics on errors.
#[cfg(test)]
pub(crate) fn test_ir(src: &str) -> DesignIR {
    match compile_sources(&[Source::new("test.pdvl", src)], &LowerOptions::default()) {
        Ok(c) => c.ir,
        Err(e) => panic!("{e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_parses() {
        let c = ProjectConfig::parse(crate::suite::SOC_CONFIG).unwrap();
        assert_eq!(c.sources, vec![PathBuf::from("soc.pdvl")]);
        assert_eq!(c.top.len(), crate::suite::SOC_TOPS.len());
        assert_eq!(c.budget_bits, 20);
        assert_eq!(c.sva, SvaConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ProjectConfig::parse("sources = []\nbogus = 1\n").is_err());
    }

    #[test]
    fn diagnostics_point_into_the_right_file() {
        let a = Source::new("a.pdvl", "cluster a {\n  signal x[1];\n}");
        let b = Source::new("b.pdvl", "cluster b {\n  signal y[1];\n  d_y { y = ; }\n}");
        let err = compile_sources(&[a, b], &LowerOptions::default()).unwrap_err();
        let CompileError::Frontend(ds) = err else {
            panic!("expected a frontend error, got {err}");
        };
        assert_eq!(ds[0].file, "b.pdvl");
        assert_eq!(ds[0].line, 3);
    }
}

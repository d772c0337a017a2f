//! Line-oriented manifests: `path <TAB> condition <TAB> split`, `#` comments.
//!
//! Conditions are `class:<label>`, `skeleton:<ppm path>`, `normal:<ppm path>`
//! or `none`. Relative paths resolve against the manifest's directory.

use crate::conditioning::{load_control_image, Condition};
use crate::error::{Error, Result};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionSpec {
    Class(String),
    Skeleton(PathBuf),
    Normal(PathBuf),
    None,
}

impl ConditionSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::format("condition", format!("unrecognized descriptor {s:?}"));
        if s == "none" {
            return Ok(ConditionSpec::None);
        }
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        if value.is_empty() {
            return Err(bad());
        }
        match kind {
            "class" => Ok(ConditionSpec::Class(value.to_string())),
            "skeleton" => Ok(ConditionSpec::Skeleton(value.into())),
            "normal" => Ok(ConditionSpec::Normal(value.into())),
            _ => Err(bad()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConditionSpec::Class(_) => "class",
            ConditionSpec::Skeleton(_) => "skeleton",
            ConditionSpec::Normal(_) => "normal",
            ConditionSpec::None => "none",
        }
    }

    pub fn file(&self) -> Option<&Path> {
        match self {
            ConditionSpec::Skeleton(p) | ConditionSpec::Normal(p) => Some(p),
            _ => None,
        }
    }

    /// Rebases a control-image path from one manifest directory to another.
    pub fn rebased(&self, from: &Path, to: &Path) -> Self {
        let fix = |p: &PathBuf| relative_to(&from.join(p), to);
        match self {
            ConditionSpec::Skeleton(p) => ConditionSpec::Skeleton(fix(p)),
            ConditionSpec::Normal(p) => ConditionSpec::Normal(fix(p)),
            other => other.clone(),
        }
    }

    /// Builds the model condition; control images are resized to `width x height`.
    pub fn resolve(&self, base: &Path, width: usize, height: usize, dim: usize) -> Result<Condition> {
        match self {
            ConditionSpec::Class(label) => Condition::class_text(label, dim),
            ConditionSpec::Skeleton(p) => Condition::skeleton(load_control_image(base.join(p), width, height)?, dim),
            ConditionSpec::Normal(p) => Condition::normal_map(load_control_image(base.join(p), width, height)?, dim),
            ConditionSpec::None => Ok(Condition::Unconditional),
        }
    }
}

impl fmt::Display for ConditionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionSpec::Class(l) => write!(f, "class:{l}"),
            ConditionSpec::Skeleton(p) => write!(f, "skeleton:{}", p.display()),
            ConditionSpec::Normal(p) => write!(f, "normal:{}", p.display()),
            ConditionSpec::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            _ => Err(Error::format("split", format!("expected train or eval, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub condition: ConditionSpec,
    pub split: Split,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::format("manifest", format!("line {}: expected 3 tab-separated fields", n + 1)));
            }
            entries.push(ManifestEntry {
                path: fields[0].into(),
                condition: ConditionSpec::parse(fields[1])?,
                split: Split::parse(fields[2])?,
            });
        }
        Ok(Self { entries })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# path\tcondition\tsplit\n");
        for e in &self.entries {
            s.push_str(&format!("{}\t{}\t{}\n", e.path.display(), e.condition, e.split.as_str()));
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Every referenced file exists under `base` and all conditions share one kind.
    pub fn validate(&self, base: &Path) -> Result<()> {
        if let Some(first) = self.entries.first() {
            if let Some(e) = self.entries.iter().find(|e| e.condition.kind() != first.condition.kind()) {
                return Err(Error::format(
                    "manifest",
                    format!("mixed condition kinds {} and {}", first.condition.kind(), e.condition.kind()),
                ));
            }
        }
        for e in &self.entries {
            for p in std::iter::once(e.path.as_path()).chain(e.condition.file()) {
                if !base.join(p).exists() {
                    return Err(Error::format("manifest", format!("missing file {}", base.join(p).display())));
                }
            }
        }
        Ok(())
    }
}

/// `target` expressed relative to `dir` when both share a prefix, else `target` itself.
fn relative_to(target: &Path, dir: &Path) -> PathBuf {
    let t: Vec<_> = target.components().collect();
    let d: Vec<_> = dir.components().collect();
    let common = t.iter().zip(&d).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return target.to_path_buf();
    }
    let mut out = PathBuf::new();
    for _ in common..d.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c);
    }
    out
}

//! Built-in experiment defaults for the benchmark datasets and the lookup of
//! their files under a data directory.

use std::path::{Path, PathBuf};

use glnn_core::dataset::{load_cache, load_linqs, Dataset, SplitKind};

use crate::{HarnessError, Result};

/// File extension of the binary dataset cache.
pub const CACHE_EXT: &str = "glnn";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    /// File stems tried, in order, when locating the dataset files.
    pub stems: &'static [&'static str],
    pub lambda0: f64,
    pub split: SplitKind,
    pub downsample: Option<usize>,
}

const PLANETOID: SplitKind = SplitKind::Planetoid {
    per_class: 20,
    val: 500,
    test: 1000,
};

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "cora",
        stems: &["cora"],
        lambda0: 1e-2,
        split: PLANETOID,
        downsample: None,
    },
    Preset {
        name: "citeseer",
        stems: &["citeseer"],
        lambda0: 1.0,
        split: PLANETOID,
        downsample: None,
    },
    Preset {
        name: "pubmed",
        stems: &["pubmed", "Pubmed-Diabetes"],
        lambda0: 1.0,
        split: SplitKind::Counts {
            train: 60,
            val: 0,
            test: 1000,
        },
        downsample: Some(3000),
    },
    Preset {
        name: "terroristsrel",
        stems: &["terroristsrel", "TerroristRel", "terrorist_rel"],
        lambda0: 1e-1,
        split: SplitKind::Counts {
            train: 160,
            val: 0,
            test: 150,
        },
        downsample: None,
    },
    Preset {
        name: "terrorattack",
        stems: &["terrorattack", "TerrorAttack", "terrorist_attack"],
        lambda0: 1.0,
        split: SplitKind::Counts {
            train: 120,
            val: 0,
            test: 200,
        },
        downsample: None,
    },
];

fn canonical(name: &str) -> String {
    name.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Case- and punctuation-insensitive lookup ("Terror Attack", "terror-attack"
/// and "terrorattack" all match). "terroristrel" is accepted as well.
pub fn preset(name: &str) -> Option<&'static Preset> {
    let key = canonical(name);
    let key = if key == "terroristrel" { "terroristsrel".to_string() } else { key };
    PRESETS.iter().find(|p| p.name == key)
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Linqs { content: PathBuf, cites: PathBuf },
    Cache(PathBuf),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DataSource::Linqs { content, cites } => load_linqs(content, cites)?,
            DataSource::Cache(path) => load_cache(path)?,
        })
    }
}

/// Finds a preset's files under `dir`, preferring a binary cache over the
/// text files. Both `dir/<stem>.content` and `dir/<stem>/<stem>.content`
/// layouts are accepted.
pub fn locate(dir: &Path, preset: &Preset) -> Result<DataSource> {
    let mut tried = Vec::new();
    for stem in preset.stems {
        for base in [dir.to_path_buf(), dir.join(stem)] {
            let cache = base.join(format!("{stem}.{CACHE_EXT}"));
            if cache.is_file() {
                return Ok(DataSource::Cache(cache));
            }
            let content = base.join(format!("{stem}.content"));
            let cites = base.join(format!("{stem}.cites"));
            if content.is_file() && cites.is_file() {
                return Ok(DataSource::Linqs { content, cites });
            }
            tried.push(content);
        }
    }
    Err(HarnessError::MissingData {
        dataset: preset.name.to_string(),
        tried,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_ignores_case_and_punctuation() {
        assert_eq!(preset("Terror Attack").unwrap().name, "terrorattack");
        assert_eq!(preset("TerroristRel").unwrap().name, "terroristsrel");
        assert_eq!(preset("CORA").unwrap().lambda0, 1e-2);
        assert!(preset("imagenet").is_none());
    }

    #[test]
    fn default_lambda0_per_dataset() {
        let l: Vec<_> = PRESETS.iter().map(|p| (p.name, p.lambda0)).collect();
        assert_eq!(
            l,
            vec![
                ("cora", 1e-2),
                ("citeseer", 1.0),
                ("pubmed", 1.0),
                ("terroristsrel", 1e-1),
                ("terrorattack", 1.0)
            ]
        );
    }

    #[test]
    fn locates_both_layouts_and_prefers_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cora = preset("cora").unwrap();
        assert!(matches!(locate(dir.path(), cora), Err(HarnessError::MissingData { .. })));

        let sub = dir.path().join("cora");
        std::fs::create_dir(&sub).unwrap();
        std::fs::write(sub.join("cora.content"), "").unwrap();
        std::fs::write(sub.join("cora.cites"), "").unwrap();
        assert_eq!(
            locate(dir.path(), cora).unwrap(),
            DataSource::Linqs {
                content: sub.join("cora.content"),
                cites: sub.join("cora.cites")
            }
        );
        std::fs::write(dir.path().join("cora.glnn"), "").unwrap();
        assert_eq!(
            locate(dir.path(), cora).unwrap(),
            DataSource::Cache(dir.path().join("cora.glnn"))
        );
    }
}

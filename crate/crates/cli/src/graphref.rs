//! Graph references of the form `dir/NAME` (a whole TUDataset corpus) or
//! `dir/NAME@idx` (one graph of it).

use std::path::{Path, PathBuf};

use submatch_core::tudataset::{load_tu_dataset_with, LoadOptions};
use submatch_core::{Error, GraphDataset, LabeledGraph, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphRef {
    pub dir: PathBuf,
    pub name: String,
    pub index: Option<usize>,
}

impl GraphRef {
    pub fn parse(s: &str) -> Result<Self> {
        let (path, index) = match s.rsplit_once('@') {
            Some((p, i)) => {
                let i = i
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad graph index in {s:?}")))?;
                (p, Some(i))
            }
            None => (s, None),
        };
        let path = Path::new(path);
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .filter(|n| !n.is_empty())
            .ok_or_else(|| Error::Argument(format!("graph reference {s:?} has no corpus name")))?;
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        Ok(GraphRef {
            dir,
            name: name.to_string(),
            index,
        })
    }

    /// Loads the corpus keeping every component, so indices count the
    /// components of the stored graphs in file order.
    pub fn load_corpus(&self) -> Result<GraphDataset> {
        load_tu_dataset_with(&self.dir, &self.name, LoadOptions::keep_all())
    }

    /// The referenced graphs: one when an index is given, all otherwise.
    pub fn load(&self) -> Result<(Vec<LabeledGraph>, Vec<i64>)> {
        let ds = self.load_corpus()?;
        match self.index {
            None => Ok((ds.graphs, ds.label_values)),
            Some(i) => {
                let n = ds.len();
                let g = ds.graphs.into_iter().nth(i).ok_or_else(|| {
                    Error::Argument(format!("graph index {i} out of range for {} ({n} graphs)", self.name))
                })?;
                Ok((vec![g], ds.label_values))
            }
        }
    }
}

impl std::fmt::Display for GraphRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.dir.join(&self.name).display())?;
        if let Some(i) = self.index {
            write!(f, "@{i}")?;
        }
        Ok(())
    }
}

//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "SUBMATCH"
//! version  u32
//! hlen     u64      length of the JSON header
//! header   hlen bytes of UTF-8 JSON
//! sections repeated: name_len u32, name, rows u32, cols u32, rows*cols f64
//! ```
//!
//! Parameter sections are named `param/<name>`; optimizer moments are
//! `adam.m/<name>` and `adam.v/<name>`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::metrics::Threshold;
use crate::tensor::{AdamConfig, AdamState, ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"SUBMATCH";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: EncoderParams,
    /// Original label value of each dense label id the encoder was trained on.
    pub label_values: Vec<i64>,
    pub threshold: Option<Threshold>,
    pub adam: Option<AdamState>,
    /// Free-form provenance and resume information.
    pub meta: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    encoder: EncoderConfig,
    label_values: Vec<i64>,
    threshold: Option<Threshold>,
    adam: Option<AdamHeader>,
    meta: serde_json::Value,
    sections: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamHeader {
    config: AdamConfig,
    step: u64,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.path, "truncated checkpoint"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn push_section(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn new(params: EncoderParams, label_values: Vec<i64>) -> Result<Self> {
        if label_values.len() != params.label_alphabet_size {
            return Err(Error::arg(format!(
                "{} label values for an encoder over {} labels",
                label_values.len(),
                params.label_alphabet_size
            )));
        }
        Ok(Checkpoint {
            params,
            label_values,
            threshold: None,
            adam: None,
            meta: serde_json::Value::Null,
        })
    }

    fn section_names(&self) -> Vec<String> {
        let store = &self.params.store;
        let mut names: Vec<String> = store.ids().map(|id| format!("param/{}", store.name(id))).collect();
        if self.adam.is_some() {
            for prefix in ["adam.m", "adam.v"] {
                names.extend(store.ids().map(|id| format!("{prefix}/{}", store.name(id))));
            }
        }
        names
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let store = &self.params.store;
        let header = Header {
            encoder: self.params.config.clone(),
            label_values: self.label_values.clone(),
            threshold: self.threshold,
            adam: self.adam.as_ref().map(|a| AdamHeader {
                config: a.config,
                step: a.step,
            }),
            meta: self.meta.clone(),
            sections: self.section_names().len(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(64 + json.len() + 8 * store.numel() * 3);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for id in store.ids() {
            push_section(&mut out, &format!("param/{}", store.name(id)), store.value(id));
        }
        if let Some(adam) = &self.adam {
            for (prefix, moments) in [("adam.m", &adam.m), ("adam.v", &adam.v)] {
                for (id, t) in store.ids().zip(moments) {
                    push_section(&mut out, &format!("{prefix}/{}", store.name(id)), t);
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(Error::format(path, "not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
        }
        let hlen = r.u64()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
        let mut sections = Vec::with_capacity(header.sections);
        for _ in 0..header.sections {
            let nlen = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(nlen)?)
                .map_err(|_| Error::format(path, "section name is not UTF-8"))?
                .to_string();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = rows
                .checked_mul(cols)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::format(path, "section size overflows"))?;
            let raw = r.take(len)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            sections.push((name, Tensor::from_vec(rows, cols, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes after the last section"));
        }

        let mut sections = sections.into_iter();
        let mut store = ParamStore::new();
        let n_params = if header.adam.is_some() {
            header.sections / 3
        } else {
            header.sections
        };
        for (name, t) in sections.by_ref().take(n_params) {
            let Some(pname) = name.strip_prefix("param/") else {
                return Err(Error::format(path, format!("unexpected section {name}")));
            };
            store.add(pname, t);
        }
        let params = EncoderParams::from_store(header.encoder, header.label_values.len(), store)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let adam = match header.adam {
            None => None,
            Some(h) => {
                let mut m = Vec::with_capacity(n_params);
                let mut v = Vec::with_capacity(n_params);
                for (i, (name, t)) in sections.by_ref().enumerate() {
                    let (prefix, target) = if i < n_params { ("adam.m/", &mut m) } else { ("adam.v/", &mut v) };
                    let id = params.store.ids().nth(i % n_params).expect("index in range");
                    if name != format!("{prefix}{}", params.store.name(id))
                        || t.shape() != params.store.value(id).shape()
                    {
                        return Err(Error::format(path, format!("unexpected section {name}")));
                    }
                    target.push(t);
                }
                Some(AdamState {
                    config: h.config,
                    step: h.step,
                    m,
                    v,
                })
            }
        };
        Ok(Checkpoint {
            params,
            label_values: header.label_values,
            threshold: header.threshold,
            adam,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// One line per section: name, rows, cols.
    pub fn manifest(&self) -> String {
        let store = &self.params.store;
        let mut out = format!("format {FORMAT_VERSION}\n");
        let shapes: Vec<_> = store.ids().map(|id| store.value(id).shape()).collect();
        for (name, (r, c)) in self.section_names().iter().zip(shapes.iter().cycle()) {
            out.push_str(&format!("{name}\t{r}\t{c}\n"));
        }
        out
    }
}

/// Hex SHA-256 of `"blob <len>\0" + bytes`, the object id git would assign
/// the file under SHA-256 hashing.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let cfg = EncoderConfig {
            num_layers: 2,
            hidden_dim: 8,
            out_dim: 4,
            ..EncoderConfig::default()
        };
        let p = EncoderParams::init(cfg, 3, 1).unwrap();
        Checkpoint::new(p, vec![-1, 4, 7]).unwrap()
    }

    #[test]
    fn round_trip() {
        let mut c = sample();
        let path = Path::new("mem");
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes().unwrap(), path).unwrap(), c);
        let mut adam = AdamState::new(&c.params.store, AdamConfig::default());
        adam.step = 7;
        adam.m[3].data_mut()[0] = 0.25;
        adam.v[5].data_mut()[1] = -3.5;
        c.adam = Some(adam);
        c.threshold = Some(Threshold { tau: 0.3, accuracy: 0.9 });
        c.meta = serde_json::json!({"epoch": 4});
        let bytes = c.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes, path).unwrap(), c);
        assert_eq!(bytes, c.to_bytes().unwrap());

        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("sub/model.ckpt");
        c.save(&file).unwrap();
        assert_eq!(Checkpoint::load(&file).unwrap(), c);
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let bytes = sample().to_bytes().unwrap();
        let path = Path::new("mem");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad, path), Err(Error::Format { .. })));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3], path),
            Err(Error::Format { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Checkpoint::from_bytes(&long, path), Err(Error::Format { .. })));
        let mut ver = bytes;
        ver[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&ver, path), Err(Error::Format { .. })));
    }

    #[test]
    fn manifest_lists_shapes() {
        let m = sample().manifest();
        assert!(m.starts_with("format 1\n"));
        assert!(m.contains("param/pre.weight\t3\t8\n"));
        assert!(m.contains("param/post.bias\t1\t4\n"));
        assert_eq!(m.lines().count(), 1 + sample().params.store.len());
    }

    #[test]
    fn git_style_hash() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            content_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn label_values_must_fit_the_encoder() {
        let p = sample().params;
        assert!(Checkpoint::new(p, vec![1, 2]).is_err());
    }
}

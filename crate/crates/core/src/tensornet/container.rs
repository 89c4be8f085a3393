//! Self-describing parameter container.
//!
//! Layout: a UTF-8 text header followed by a binary blob.
//!
//! ```text
//! TNET 1
//! meta <key> <value to end of line>
//! tensor <name> <dim>,<dim>,... <byte offset>
//! data <blob length in bytes>
//! <blob: little-endian IEEE-754 binary32 values>
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::ParamTensor;
use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &str = "TNET";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<ParamTensor<f32>>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("container lacks meta key `{key}`")))
    }

    pub fn parse_meta<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("meta `{key}` has unparsable value `{raw}`")))
    }

    /// Removes and returns all tensors whose name starts with `prefix`, in stored order.
    pub fn take_prefixed(&mut self, prefix: &str) -> Vec<ParamTensor<f32>> {
        let (hit, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.tensors)
            .into_iter()
            .partition(|t| t.name.starts_with(prefix));
        self.tensors = rest;
        hit
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = format!("{CONTAINER_MAGIC} {CONTAINER_VERSION}\n");
        for (k, v) in &self.meta {
            if k.contains(char::is_whitespace) || v.contains('\n') {
                return Err(Error::Format(format!("meta entry `{k}` is not line-safe")));
            }
            header.push_str(&format!("meta {k} {v}\n"));
        }
        let mut offset = 0usize;
        for t in &self.tensors {
            if t.name.contains(char::is_whitespace) {
                return Err(Error::Format(format!("tensor name `{}` has whitespace", t.name)));
            }
            let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            header.push_str(&format!("tensor {} {} {offset}\n", t.name, dims.join(",")));
            offset += t.len() * 4;
        }
        header.push_str(&format!("data {offset}\n"));
        let mut blob = Vec::with_capacity(offset);
        for t in &self.tensors {
            for v in &t.values {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(header.as_bytes())
            .and_then(|_| w.write_all(&blob))
            .map_err(|e| Error::io("<container>", e))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        let mut lineno = 0usize;
        let mut next_line = |r: &mut BufReader<R>, line: &mut String| -> Result<usize> {
            line.clear();
            lineno += 1;
            let n = r
                .read_line(line)
                .map_err(|e| Error::io("<container>", e))?;
            if n == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "unexpected end of container header".into(),
                });
            }
            Ok(lineno)
        };

        let ln = next_line(&mut r, &mut line)?;
        let mut head = line.split_whitespace();
        if head.next() != Some(CONTAINER_MAGIC) {
            return Err(Error::Parse {
                line: ln,
                message: "missing TNET magic".into(),
            });
        }
        let version: u32 = head.next().and_then(|v| v.parse().ok()).unwrap_or(0);
        if version != CONTAINER_VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }

        let mut meta = BTreeMap::new();
        let mut entries: Vec<(String, Vec<usize>, usize)> = Vec::new();
        let data_len = loop {
            let ln = next_line(&mut r, &mut line)?;
            let text = line.trim_end_matches('\n');
            let bad = |message: &str| Error::Parse {
                line: ln,
                message: format!("{message}: `{text}`"),
            };
            let (kind, rest) = text.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
            match kind {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.insert(k.to_string(), v.to_string());
                }
                "tensor" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    if parts.len() != 3 {
                        return Err(bad("tensor line needs name, shape, offset"));
                    }
                    let shape = parts[1]
                        .split(',')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad tensor shape"))?;
                    let offset = parts[2].parse().map_err(|_| bad("bad tensor offset"))?;
                    entries.push((parts[0].to_string(), shape, offset));
                }
                "data" => break rest.parse::<usize>().map_err(|_| bad("bad data length"))?,
                _ => return Err(bad("unknown header entry")),
            }
        };

        let mut blob = vec![0u8; data_len];
        r.read_exact(&mut blob)
            .map_err(|_| Error::Format(format!("blob shorter than declared {data_len} bytes")))?;
        if r.read(&mut [0u8; 1]).map_err(|e| Error::io("<container>", e))? != 0 {
            return Err(Error::Format("trailing bytes after blob".into()));
        }

        let mut tensors = Vec::with_capacity(entries.len());
        for (name, shape, offset) in entries {
            let len: usize = shape.iter().product();
            let end = offset + len * 4;
            if end > blob.len() {
                return Err(Error::Format(format!("tensor `{name}` overruns the blob")));
            }
            let values = blob[offset..end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let t = ParamTensor::from_values(name, &shape, values)?;
            t.check_finite()?;
            tensors.push(t);
        }
        Ok(Self { meta, tensors })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f)
    }
}

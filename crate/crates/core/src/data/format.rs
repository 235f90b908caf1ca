//! Directory interchange format.
//!
//! ```text
//! <dir>/manifest.json   version, name, classes, shape, provenance,
//!                       preprocessing, per-split sample index
//! <dir>/<split>.bin     samples back to back, [sample][channel][time],
//!                       little-endian IEEE-754 binary32
//! ```
//!
//! Writes go to a sibling temporary directory that is renamed into place.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::Step;
use crate::error::{Error, Result};

use super::{CsiSample, Dataset, Provenance, SampleShape, Split};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleEntry {
    label: usize,
    source_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    name: String,
    classes: Vec<String>,
    shape: SampleShape,
    provenance: Provenance,
    #[serde(default)]
    preprocessing: Vec<Step>,
    splits: BTreeMap<Split, Vec<SampleEntry>>,
}

fn bin_name(split: Split) -> String {
    format!("{}.bin", split.as_str())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Write `tmp` over `dest` by rename, replacing any previous directory.
pub(crate) fn commit_dir(tmp: &Path, dest: &Path) -> Result<()> {
    if dest.exists() {
        fs::remove_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    }
    fs::rename(tmp, dest).map_err(|e| Error::io(dest, e))
}

pub(crate) fn prepare_temp(dest: &Path) -> Result<PathBuf> {
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = temp_sibling(dest);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    Ok(tmp)
}

/// Streaming dataset writer; samples are appended split by split and nothing
/// becomes visible at the destination until [`finish`](Self::finish).
pub struct DatasetWriter {
    dest: PathBuf,
    tmp: PathBuf,
    manifest: Manifest,
    writers: BTreeMap<Split, BufWriter<File>>,
}

impl DatasetWriter {
    pub fn create(
        dest: impl AsRef<Path>,
        name: &str,
        classes: Vec<String>,
        shape: SampleShape,
        provenance: Provenance,
        preprocessing: Vec<Step>,
    ) -> Result<Self> {
        let dest = dest.as_ref().to_path_buf();
        let tmp = prepare_temp(&dest)?;
        Ok(Self {
            dest,
            tmp,
            manifest: Manifest {
                version: FORMAT_VERSION,
                name: name.to_string(),
                classes,
                shape,
                provenance,
                preprocessing,
                splits: BTreeMap::new(),
            },
            writers: BTreeMap::new(),
        })
    }

    /// Declare a split even if it ends up empty.
    pub fn open_split(&mut self, split: Split) -> Result<()> {
        if self.writers.contains_key(&split) {
            return Ok(());
        }
        let path = self.tmp.join(bin_name(split));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.writers.insert(split, BufWriter::new(file));
        self.manifest.splits.entry(split).or_default();
        Ok(())
    }

    pub fn push(&mut self, split: Split, sample: &CsiSample) -> Result<()> {
        let shape = &self.manifest.shape;
        if sample.channels != shape.channels() || sample.time != shape.time() {
            return Err(Error::Contract(format!(
                "sample {} does not match dataset shape {:?}",
                sample.source_id,
                shape.dims()
            )));
        }
        if sample.label >= self.manifest.classes.len() {
            return Err(Error::Contract(format!(
                "sample {} label {} out of range",
                sample.source_id, sample.label
            )));
        }
        self.open_split(split)?;
        let w = self.writers.get_mut(&split).expect("opened above");
        let mut buf = Vec::with_capacity(sample.data.len() * 4);
        for v in &sample.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let path = self.tmp.join(bin_name(split));
        w.write_all(&buf).map_err(|e| Error::io(&path, e))?;
        self.manifest
            .splits
            .get_mut(&split)
            .expect("opened above")
            .push(SampleEntry {
                label: sample.label,
                source_id: sample.source_id.clone(),
            });
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        for (split, mut w) in std::mem::take(&mut self.writers) {
            let path = self.tmp.join(bin_name(split));
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        let manifest_path = self.tmp.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::json(&manifest_path, e))?;
        text.push('\n');
        fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        commit_dir(&self.tmp, &self.dest)?;
        Ok(self.dest.clone())
    }
}

impl Drop for DatasetWriter {
    fn drop(&mut self) {
        // unfinished writers leave nothing behind
        if self.tmp.exists() {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

/// Write a dataset directory atomically.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    dataset.validate()?;
    let mut w = DatasetWriter::create(
        path,
        &dataset.name,
        dataset.classes.clone(),
        dataset.shape.clone(),
        dataset.provenance.clone(),
        dataset.preprocessing.clone(),
    )?;
    for (split, samples) in dataset.splits() {
        w.open_split(split)?;
        for s in samples {
            w.push(split, s)?;
        }
    }
    w.finish().map(drop)
}

/// Read a dataset directory. Either the whole dataset loads or an error is
/// returned; truncated or oversized split files are integrity errors.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let dir = path.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let version: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;
    let found = version.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;

    let per_sample = manifest.shape.numel();
    let (channels, time) = (manifest.shape.channels(), manifest.shape.time());
    let mut ds = Dataset::new(
        manifest.name,
        manifest.classes,
        manifest.shape,
        manifest.provenance,
    );
    ds.preprocessing = manifest.preprocessing;
    for (split, entries) in manifest.splits {
        let bin = dir.join(bin_name(split));
        let expected = (entries.len() * per_sample * 4) as u64;
        let found = fs::metadata(&bin).map_err(|e| Error::io(&bin, e))?.len();
        if found != expected {
            return Err(Error::Integrity {
                file: bin,
                expected,
                found,
            });
        }
        let mut bytes = Vec::with_capacity(expected as usize);
        File::open(&bin)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&bin, e))?;
        if bytes.len() as u64 != expected {
            return Err(Error::Integrity {
                file: bin,
                expected,
                found: bytes.len() as u64,
            });
        }
        let samples = entries
            .into_iter()
            .zip(bytes.chunks_exact(per_sample * 4))
            .map(|(e, chunk)| {
                let data = chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect();
                CsiSample::new(data, channels, time, e.label, e.source_id)
            })
            .collect::<Result<Vec<_>>>()?;
        ds.set_split(split, samples)?;
    }
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temp_dir_is_a_hidden_sibling() {
        let t = temp_sibling(Path::new("/a/b/data"));
        assert_eq!(t.parent(), Some(Path::new("/a/b")));
        assert!(t.file_name().unwrap().to_string_lossy().starts_with(".data.tmp-"));
    }
}

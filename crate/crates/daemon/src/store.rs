//! Snapshot gallery on disk.
//!
//! Layout: `<snapshot_id>.<ext>` per image plus `snapshots.idx`, one
//! tab-separated record per line. Every file lands through write-temp,
//! fsync, rename. Opening a store runs a recovery scan that drops stray
//! temp files, forgets index entries whose file is gone, and adopts image
//! files the index never heard of, so index and directory always agree.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use gvss_core::{EncodedImage, Encoding};
use serde::Serialize;
use thiserror::Error;

pub const INDEX_FILE: &str = "snapshots.idx";
const TMP_SUFFIX: &str = ".tmp";
const ORPHAN_CAMERA: &str = "unknown";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("snapshot `{0}` not found")]
    NotFound(String),
    #[error("snapshot storage is full")]
    StorageFull,
    #[error("snapshot storage I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("refusing to store an empty image")]
    EmptyImage,
}

fn classify(e: io::Error) -> StoreError {
    if e.kind() == io::ErrorKind::StorageFull {
        StoreError::StorageFull
    } else {
        StoreError::Io(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SnapshotRecord {
    pub snapshot_id: String,
    pub camera_id: String,
    pub captured_at: DateTime<Utc>,
    pub encoding: Encoding,
    pub byte_length: u64,
    pub media_type: String,
}

impl SnapshotRecord {
    fn file_name(&self) -> String {
        format!("{}.{}", self.snapshot_id, self.encoding.extension())
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.snapshot_id,
            self.camera_id,
            self.captured_at.to_rfc3339_opts(SecondsFormat::Millis, true),
            self.encoding.param(),
            self.byte_length,
            self.media_type
        )
    }

    fn from_line(line: &str) -> Option<Self> {
        let mut f = line.split('\t');
        let record = Self {
            snapshot_id: f.next()?.to_string(),
            camera_id: f.next()?.to_string(),
            captured_at: DateTime::parse_from_rfc3339(f.next()?).ok()?.with_timezone(&Utc),
            encoding: f.next()?.parse().ok()?,
            byte_length: f.next()?.parse().ok()?,
            media_type: f.next()?.to_string(),
        };
        f.next().is_none().then_some(record)
    }
}

/// Stored bytes with their record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub record: SnapshotRecord,
    pub bytes: Vec<u8>,
}

/// Where a simulated crash interrupts [`SnapshotStore::save_interrupted`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    /// Temp file written, never renamed.
    AfterTempWrite,
    /// Image renamed into place, index not yet rewritten.
    AfterRename,
}

pub struct SnapshotStore {
    dir: PathBuf,
    /// Index owner: saves and deletes serialize here.
    index: Mutex<BTreeMap<String, SnapshotRecord>>,
    counter: AtomicU64,
}

fn write_atomically(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
    let tmp = dir.join(format!(".{name}{TMP_SUFFIX}"));
    write_temp(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    sync_dir(dir);
    Ok(())
}

fn write_temp(tmp: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = fs::File::create(tmp)?;
    f.write_all(bytes)?;
    f.sync_all()
}

fn sync_dir(dir: &Path) {
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
}

/// Recovers the encoding of an orphaned file from its extension and, for
/// PNG, the IHDR colour type.
fn sniff_encoding(path: &Path) -> Option<Encoding> {
    match path.extension()?.to_str()? {
        "jpg" => Some(Encoding::Jpeg),
        "png" => {
            let bytes = fs::read(path).ok()?;
            match bytes.get(25)? {
                0 => Some(Encoding::PngGray),
                2 => Some(Encoding::Png24),
                3 => Some(Encoding::Png8),
                _ => None,
            }
        }
        _ => None,
    }
}

fn id_millis(id: &str) -> Option<i64> {
    id.split_once('-')?.0.parse().ok()
}

impl SnapshotStore {
    /// Opens (creating if needed) and reconciles the store directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut index = BTreeMap::new();
        match fs::read_to_string(dir.join(INDEX_FILE)) {
            Ok(text) => {
                for line in text.lines().filter(|l| !l.is_empty()) {
                    match SnapshotRecord::from_line(line) {
                        Some(r) => {
                            index.insert(r.snapshot_id.clone(), r);
                        }
                        None => tracing::warn!("dropping malformed index line: {line:?}"),
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }

        // drop entries without a matching file
        index.retain(|_, r: &mut SnapshotRecord| {
            fs::metadata(dir.join(r.file_name())).is_ok_and(|m| m.len() == r.byte_length)
        });

        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()).map(String::from) else {
                continue;
            };
            if name.ends_with(TMP_SUFFIX) {
                let _ = fs::remove_file(&path);
                continue;
            }
            if name == INDEX_FILE {
                continue;
            }
            let Some((id, _)) = name.split_once('.') else { continue };
            if index.contains_key(id) {
                continue;
            }
            let adopted = sniff_encoding(&path).zip(id_millis(id)).and_then(|(encoding, ms)| {
                let record = SnapshotRecord {
                    snapshot_id: id.to_string(),
                    camera_id: ORPHAN_CAMERA.into(),
                    captured_at: DateTime::from_timestamp_millis(ms)?,
                    encoding,
                    byte_length: fs::metadata(&path).ok()?.len(),
                    media_type: encoding.media_type().into(),
                };
                (record.file_name() == name).then_some(record)
            });
            match adopted {
                Some(record) => {
                    tracing::info!("recovered unindexed snapshot {name}");
                    index.insert(record.snapshot_id.clone(), record);
                }
                None => tracing::warn!("ignoring unrecognised file in snapshot dir: {name}"),
            }
        }

        let store = Self {
            dir,
            index: Mutex::new(index),
            counter: AtomicU64::new(0),
        };
        store.write_index(&store.index.lock().unwrap())?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_index(&self, index: &BTreeMap<String, SnapshotRecord>) -> io::Result<()> {
        let mut text = String::new();
        for r in index.values() {
            text.push_str(&r.to_line());
            text.push('\n');
        }
        write_atomically(&self.dir, INDEX_FILE, text.as_bytes())
    }

    /// `<13-digit epoch millis>-<8-digit counter>`, unique and time-ordered.
    fn next_id(&self, index: &BTreeMap<String, SnapshotRecord>, now: DateTime<Utc>) -> String {
        loop {
            let n = self.counter.fetch_add(1, Ordering::Relaxed);
            let id = format!("{:013}-{:08}", now.timestamp_millis().max(0), n);
            if !index.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn save(
        &self,
        image: &EncodedImage,
        camera_id: &str,
        captured_at: DateTime<Utc>,
    ) -> Result<SnapshotRecord, StoreError> {
        self.save_inner(image, camera_id, captured_at, None)
    }

    /// Fault injection for crash-safety tests: performs a save up to `crash`
    /// and stops there as if the process had died.
    #[doc(hidden)]
    pub fn save_interrupted(
        &self,
        image: &EncodedImage,
        camera_id: &str,
        captured_at: DateTime<Utc>,
        crash: CrashPoint,
    ) -> Result<SnapshotRecord, StoreError> {
        self.save_inner(image, camera_id, captured_at, Some(crash))
    }

    fn save_inner(
        &self,
        image: &EncodedImage,
        camera_id: &str,
        captured_at: DateTime<Utc>,
        crash: Option<CrashPoint>,
    ) -> Result<SnapshotRecord, StoreError> {
        if image.bytes.is_empty() {
            return Err(StoreError::EmptyImage);
        }
        let mut index = self.index.lock().unwrap();
        let record = SnapshotRecord {
            snapshot_id: self.next_id(&index, Utc::now()),
            camera_id: camera_id.to_string(),
            captured_at,
            encoding: image.encoding,
            byte_length: image.bytes.len() as u64,
            media_type: image.media_type().to_string(),
        };
        let name = record.file_name();
        let tmp = self.dir.join(format!(".{name}{TMP_SUFFIX}"));
        write_temp(&tmp, &image.bytes).map_err(classify)?;
        if crash == Some(CrashPoint::AfterTempWrite) {
            return Ok(record);
        }
        if let Err(e) = fs::rename(&tmp, self.dir.join(&name)) {
            let _ = fs::remove_file(&tmp);
            return Err(classify(e));
        }
        sync_dir(&self.dir);
        if crash == Some(CrashPoint::AfterRename) {
            return Ok(record);
        }
        index.insert(record.snapshot_id.clone(), record.clone());
        if let Err(e) = self.write_index(&index) {
            index.remove(&record.snapshot_id);
            let _ = fs::remove_file(self.dir.join(&name));
            return Err(classify(e));
        }
        Ok(record)
    }

    /// Newest first.
    pub fn list(&self) -> Vec<SnapshotRecord> {
        self.index.lock().unwrap().values().rev().cloned().collect()
    }

    pub fn fetch(&self, snapshot_id: &str) -> Result<Snapshot, StoreError> {
        let record = self
            .index
            .lock()
            .unwrap()
            .get(snapshot_id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(snapshot_id.to_string()))?;
        match fs::read(self.dir.join(record.file_name())) {
            Ok(bytes) => Ok(Snapshot { record, bytes }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(snapshot_id.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn delete(&self, snapshot_id: &str) -> Result<(), StoreError> {
        let mut index = self.index.lock().unwrap();
        let record = index
            .remove(snapshot_id)
            .ok_or_else(|| StoreError::NotFound(snapshot_id.to_string()))?;
        if let Err(e) = self.write_index(&index) {
            index.insert(record.snapshot_id.clone(), record);
            return Err(classify(e));
        }
        match fs::remove_file(self.dir.join(record.file_name())) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    /// True when the index and the directory agree exactly.
    pub fn is_consistent(&self) -> bool {
        let index = self.index.lock().unwrap();
        let Ok(entries) = fs::read_dir(&self.dir) else { return false };
        let mut files: Vec<String> = entries
            .filter_map(|e| e.ok()?.file_name().into_string().ok())
            .filter(|n| n != INDEX_FILE)
            .collect();
        files.sort();
        let mut expected: Vec<String> = index.values().map(|r| r.file_name()).collect();
        expected.sort();
        let on_disk = fs::read_to_string(self.dir.join(INDEX_FILE)).unwrap_or_default();
        let indexed: Vec<&str> = on_disk.lines().collect();
        let in_memory: Vec<String> = index.values().map(|r| r.to_line()).collect();
        files == expected && indexed == in_memory
    }
}

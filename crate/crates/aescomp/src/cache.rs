//! Content-addressed feature cache.
//!
//! Records live in append-only segment files, one per writing process:
//!
//! ```text
//! "AEFC" | version u16 LE | key hash [32] | dim u32 LE | dim x f32 LE | CRC32C u32 LE
//! ```
//!
//! The CRC covers every byte before it. `index.jsonl` maps key hashes to
//! `(segment, offset)`; a line is appended only after its record is synced, and
//! the last line for a key wins.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use aescomp_core::{FeatureVector, PreprocessConfig, ViewKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const RECORD_MAGIC: [u8; 4] = *b"AEFC";
pub const RECORD_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 32 + 4;
const INDEX_FILE: &str = "index.jsonl";
const CRC32C: crc::Crc<u32> = crc::Crc::<u32>::new(&crc::CRC_32_ISCSI);

pub type Hash32 = [u8; 32];

pub fn sha256(bytes: &[u8]) -> Hash32 {
    Sha256::digest(bytes).into()
}

/// Hash of everything in a preprocessing config that affects the tensor fed
/// for `view`. The crop ratio only matters for the local view.
pub fn preprocess_hash(cfg: &PreprocessConfig, view: ViewKind) -> Hash32 {
    let mut h = Sha256::new();
    h.update(b"preprocess/v1");
    h.update(cfg.input_size().to_le_bytes());
    for v in cfg.channel_means().iter().chain(&cfg.channel_stds()) {
        h.update(v.to_bits().to_le_bytes());
    }
    if view == ViewKind::Local {
        h.update(cfg.crop().ratio().to_bits().to_le_bytes());
    }
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub image_hash: Hash32,
    pub backbone_id: String,
    pub view: ViewKind,
    pub preprocess_hash: Hash32,
}

impl CacheKey {
    pub fn new(image_hash: Hash32, backbone_id: impl Into<String>, view: ViewKind, preprocess_hash: Hash32) -> Self {
        Self { image_hash, backbone_id: backbone_id.into(), view, preprocess_hash }
    }

    /// Components are length-prefixed so no two distinct keys serialize alike.
    pub fn hash(&self) -> Hash32 {
        let mut h = Sha256::new();
        h.update(b"cachekey/v1");
        h.update(self.image_hash);
        h.update((self.backbone_id.len() as u64).to_le_bytes());
        h.update(self.backbone_id.as_bytes());
        h.update([self.view.letter() as u8]);
        h.update(self.preprocess_hash);
        h.finalize().into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexLine {
    key_hash: String,
    segment: String,
    offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Location {
    segment: String,
    offset: u64,
}

pub fn encode_record(key_hash: &Hash32, values: &[f32]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * values.len() + 4);
    buf.extend_from_slice(&RECORD_MAGIC);
    buf.extend_from_slice(&RECORD_VERSION.to_le_bytes());
    buf.extend_from_slice(key_hash);
    buf.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = CRC32C.checksum(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Reads one record at the reader's position and checks magic, version, key and checksum.
pub fn decode_record(r: &mut impl Read, expected_key: &Hash32) -> std::result::Result<Vec<f32>, String> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|e| format!("short header: {e}"))?;
    if head[..4] != RECORD_MAGIC {
        return Err("bad magic".into());
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != RECORD_VERSION {
        return Err(format!("unsupported record version {version}"));
    }
    if head[6..38] != expected_key[..] {
        return Err("key hash mismatch".into());
    }
    let dim = u32::from_le_bytes(head[38..42].try_into().unwrap()) as usize;
    if dim == 0 || dim > (1 << 24) {
        return Err(format!("implausible dim {dim}"));
    }
    let mut body = vec![0u8; 4 * dim + 4];
    r.read_exact(&mut body).map_err(|e| format!("short body: {e}"))?;
    let mut digest = CRC32C.digest();
    digest.update(&head);
    digest.update(&body[..4 * dim]);
    let stored = u32::from_le_bytes(body[4 * dim..].try_into().unwrap());
    if digest.finalize() != stored {
        return Err("checksum mismatch".into());
    }
    Ok(body[..4 * dim].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
}

struct Writer {
    name: String,
    file: File,
    len: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheCounters {
    pub hits: usize,
    pub misses: usize,
    pub corrupt: usize,
    pub writes: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GcStats {
    pub index_lines_before: usize,
    pub entries_kept: usize,
    pub segments_removed: usize,
}

pub struct FeatureCache {
    root: PathBuf,
    index: RwLock<HashMap<Hash32, Location>>,
    writer: Mutex<Option<Writer>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
    corrupt: AtomicUsize,
    writes: AtomicUsize,
}

impl std::fmt::Debug for FeatureCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureCache").field("root", &self.root).finish_non_exhaustive()
    }
}

fn cache_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Cache(format!("{}: {e}", path.display()))
}

fn read_index(path: &Path) -> Result<(Vec<(Hash32, Location)>, usize)> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(cache_err(path, e)),
    };
    let mut out = Vec::new();
    let mut lines = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| cache_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        // A torn final line from a crashed writer is skipped, not fatal.
        let parsed: Option<(Hash32, Location)> = serde_json::from_str::<IndexLine>(&line).ok().and_then(|l| {
            let key: Hash32 = hex::decode(&l.key_hash).ok()?.try_into().ok()?;
            Some((key, Location { segment: l.segment, offset: l.offset }))
        });
        match parsed {
            Some(entry) => out.push(entry),
            None => log::warn!("{}: skipping malformed index line {}", path.display(), n + 1),
        }
    }
    Ok((out, lines))
}

fn is_segment_name(name: &str) -> bool {
    name.starts_with("seg-") && name.ends_with(".bin") && !name.contains(['/', '\\'])
}

impl FeatureCache {
    /// Opens (creating if needed) a cache rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| cache_err(&root, e))?;
        let (entries, _) = read_index(&root.join(INDEX_FILE))?;
        let index = entries.into_iter().collect();
        Ok(Self {
            root,
            index: RwLock::new(index),
            writer: Mutex::new(None),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            corrupt: AtomicUsize::new(0),
            writes: AtomicUsize::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counters(&self) -> CacheCounters {
        CacheCounters {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            corrupt: self.corrupt.load(Ordering::Relaxed),
            writes: self.writes.load(Ordering::Relaxed),
        }
    }

    fn read_at(&self, key_hash: &Hash32, loc: &Location) -> std::result::Result<Vec<f32>, String> {
        if !is_segment_name(&loc.segment) {
            return Err(format!("bad segment name {:?}", loc.segment));
        }
        let mut f = File::open(self.root.join(&loc.segment)).map_err(|e| e.to_string())?;
        f.seek(SeekFrom::Start(loc.offset)).map_err(|e| e.to_string())?;
        decode_record(&mut BufReader::new(f), key_hash)
    }

    fn lookup(&self, key_hash: &Hash32) -> Option<std::result::Result<Vec<f32>, String>> {
        let loc = self.index.read().unwrap().get(key_hash).cloned()?;
        Some(self.read_at(key_hash, &loc))
    }

    /// `None` on a miss. Unreadable or corrupt records count as misses and are logged.
    pub fn get(&self, key: &CacheKey) -> Option<FeatureVector> {
        let key_hash = key.hash();
        match self.lookup(&key_hash) {
            Some(Ok(values)) => match FeatureVector::new(key.backbone_id.clone(), key.view, values) {
                Ok(v) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    Some(v)
                }
                Err(e) => {
                    self.note_corrupt(&key_hash, &e.to_string());
                    None
                }
            },
            Some(Err(msg)) => {
                self.note_corrupt(&key_hash, &msg);
                None
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    fn note_corrupt(&self, key_hash: &Hash32, msg: &str) {
        log::warn!(
            "feature cache {}: record {} unusable ({msg}); recomputing",
            self.root.display(),
            hex::encode(key_hash)
        );
        self.corrupt.fetch_add(1, Ordering::Relaxed);
        self.misses.fetch_add(1, Ordering::Relaxed);
    }

    /// Stores `v` under `key`. Re-putting an identical value writes nothing.
    pub fn put(&self, key: &CacheKey, v: &FeatureVector) -> Result<()> {
        let key_hash = key.hash();
        if let Some(Ok(existing)) = self.lookup(&key_hash) {
            if existing.iter().map(|x| x.to_bits()).eq(v.values().iter().map(|x| x.to_bits())) {
                return Ok(());
            }
        }
        let record = encode_record(&key_hash, v.values());

        let mut guard = self.writer.lock().unwrap();
        if guard.is_none() {
            *guard = Some(self.new_segment()?);
        }
        let w = guard.as_mut().unwrap();
        let seg_path = self.root.join(&w.name);
        let offset = w.len;
        w.file.write_all(&record).map_err(|e| cache_err(&seg_path, e))?;
        w.file.sync_data().map_err(|e| cache_err(&seg_path, e))?;
        w.len += record.len() as u64;

        let line = IndexLine { key_hash: hex::encode(key_hash), segment: w.name.clone(), offset };
        let mut text = serde_json::to_string(&line).expect("index line serializes");
        text.push('\n');
        let index_path = self.root.join(INDEX_FILE);
        let mut index_file =
            OpenOptions::new().create(true).append(true).open(&index_path).map_err(|e| cache_err(&index_path, e))?;
        index_file.write_all(text.as_bytes()).map_err(|e| cache_err(&index_path, e))?;
        index_file.sync_data().map_err(|e| cache_err(&index_path, e))?;

        self.index.write().unwrap().insert(key_hash, Location { segment: line.segment, offset });
        self.writes.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    fn new_segment(&self) -> Result<Writer> {
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        let name = format!("seg-{}-{nanos}.bin", std::process::id());
        let path = self.root.join(&name);
        let file = OpenOptions::new().create_new(true).append(true).open(&path).map_err(|e| cache_err(&path, e))?;
        Ok(Writer { name, file, len: 0 })
    }

    /// Compacts the index to one line per key (dropping entries whose record
    /// no longer verifies) and deletes segment files nothing refers to.
    /// Must not run while another process is writing to the same cache.
    pub fn gc(root: &Path) -> Result<GcStats> {
        let cache = FeatureCache::open(root)?;
        let index_path = root.join(INDEX_FILE);
        let (entries, lines) = read_index(&index_path)?;

        let mut latest: HashMap<Hash32, Location> = HashMap::new();
        let mut order = Vec::new();
        for (k, loc) in entries {
            if latest.insert(k, loc).is_none() {
                order.push(k);
            }
        }
        let mut kept = Vec::new();
        let mut live: HashSet<String> = HashSet::new();
        for k in order {
            let loc = &latest[&k];
            if cache.read_at(&k, loc).is_ok() {
                live.insert(loc.segment.clone());
                kept.push(IndexLine { key_hash: hex::encode(k), segment: loc.segment.clone(), offset: loc.offset });
            }
        }

        let tmp = root.join("index.jsonl.tmp");
        {
            let mut f = File::create(&tmp).map_err(|e| cache_err(&tmp, e))?;
            for l in &kept {
                let mut text = serde_json::to_string(l).expect("index line serializes");
                text.push('\n');
                f.write_all(text.as_bytes()).map_err(|e| cache_err(&tmp, e))?;
            }
            f.sync_all().map_err(|e| cache_err(&tmp, e))?;
        }
        fs::rename(&tmp, &index_path).map_err(|e| cache_err(&index_path, e))?;

        let mut removed = 0;
        for entry in fs::read_dir(root).map_err(|e| cache_err(root, e))? {
            let entry = entry.map_err(|e| cache_err(root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if is_segment_name(&name) && !live.contains(&name) {
                fs::remove_file(entry.path()).map_err(|e| cache_err(&entry.path(), e))?;
                removed += 1;
            }
        }
        Ok(GcStats { index_lines_before: lines, entries_kept: kept.len(), segments_removed: removed })
    }
}

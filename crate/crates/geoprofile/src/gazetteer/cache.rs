//! Binary on-disk cache for a built gazetteer index.
//!
//! Parsing and normalizing a full GeoNames dump dominates startup, so the
//! parsed entries can be written once and re-read cheaply. The cache stores
//! the checksum of its source bytes; callers compare it against the current
//! source to decide whether the cache is stale. The name index itself is
//! not serialized — it is rebuilt from the entries on read, which keeps the
//! format small and immune to index-layout changes.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"GPGZ"
//! u32    format version
//! str    source SHA-256 (hex)
//! u64    min_population used at load time
//! u64    loaded / u64 skipped / u64 filtered   (load report)
//! u64    entry count
//! entry* id u64, name str, ascii str, alt count u32 + alt strs,
//!        lat f64, lon f64, class u32, code str, country str,
//!        admin1 str, population u64
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8 bytes.

use super::{GazetteerEntry, GazetteerError, GazetteerIndex, LoadReport};
use std::io::{Read, Write};

pub const INDEX_CACHE_MAGIC: &[u8; 4] = b"GPGZ";
pub const INDEX_CACHE_VERSION: u32 = 1;

/// Guards against absurd counts in corrupt or truncated caches.
const MAX_STRING_BYTES: u32 = 1 << 20;
const MAX_ALTERNATE_NAMES: u32 = 1 << 16;

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, GazetteerError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64, GazetteerError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64, GazetteerError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn get_str<R: Read>(r: &mut R) -> Result<String, GazetteerError> {
    let len = get_u32(r)?;
    if len > MAX_STRING_BYTES {
        return Err(GazetteerError::CacheFormat(format!("string length {len} out of range")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|_| GazetteerError::CacheFormat("string is not valid UTF-8".into()))
}

/// Serialize an index (entries plus provenance, not the lookup tables).
pub fn write_index_cache<W: Write>(index: &GazetteerIndex, w: &mut W) -> std::io::Result<()> {
    w.write_all(INDEX_CACHE_MAGIC)?;
    w.write_all(&INDEX_CACHE_VERSION.to_le_bytes())?;
    put_str(w, index.source_sha256())?;
    w.write_all(&index.min_population().to_le_bytes())?;
    let report = index.report();
    w.write_all(&(report.loaded as u64).to_le_bytes())?;
    w.write_all(&(report.skipped as u64).to_le_bytes())?;
    w.write_all(&(report.filtered as u64).to_le_bytes())?;
    w.write_all(&(index.len() as u64).to_le_bytes())?;
    for e in index.entries() {
        w.write_all(&e.id.to_le_bytes())?;
        put_str(w, &e.name)?;
        put_str(w, &e.ascii_name)?;
        w.write_all(&(e.alternate_names.len() as u32).to_le_bytes())?;
        for alt in &e.alternate_names {
            put_str(w, alt)?;
        }
        w.write_all(&e.latitude.to_le_bytes())?;
        w.write_all(&e.longitude.to_le_bytes())?;
        w.write_all(&(e.feature_class as u32).to_le_bytes())?;
        put_str(w, &e.feature_code)?;
        put_str(w, &e.country_code)?;
        put_str(w, &e.admin1)?;
        w.write_all(&e.population.to_le_bytes())?;
    }
    Ok(())
}

/// Deserialize a cache written by [`write_index_cache`], rebuilding the name
/// index from the stored entries.
pub fn read_index_cache<R: Read>(r: &mut R) -> Result<GazetteerIndex, GazetteerError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != INDEX_CACHE_MAGIC {
        return Err(GazetteerError::CacheFormat(format!(
            "bad magic {magic:02x?}, expected {INDEX_CACHE_MAGIC:02x?}"
        )));
    }
    let version = get_u32(r)?;
    if version != INDEX_CACHE_VERSION {
        return Err(GazetteerError::CacheFormat(format!(
            "unsupported cache version {version} (supported: {INDEX_CACHE_VERSION})"
        )));
    }
    let source_sha256 = get_str(r)?;
    let min_population = get_u64(r)?;
    let report = LoadReport {
        loaded: get_u64(r)? as usize,
        skipped: get_u64(r)? as usize,
        filtered: get_u64(r)? as usize,
    };
    let count = get_u64(r)?;
    let mut entries = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let id = get_u64(r)?;
        let name = get_str(r)?;
        let ascii_name = get_str(r)?;
        let alt_count = get_u32(r)?;
        if alt_count > MAX_ALTERNATE_NAMES {
            return Err(GazetteerError::CacheFormat(format!(
                "alternate-name count {alt_count} out of range"
            )));
        }
        let mut alternate_names = Vec::with_capacity(alt_count as usize);
        for _ in 0..alt_count {
            alternate_names.push(get_str(r)?);
        }
        let latitude = get_f64(r)?;
        let longitude = get_f64(r)?;
        let class_raw = get_u32(r)?;
        let feature_class = char::from_u32(class_raw).ok_or_else(|| {
            GazetteerError::CacheFormat(format!("invalid feature class scalar {class_raw}"))
        })?;
        let feature_code = get_str(r)?;
        let country_code = get_str(r)?;
        let admin1 = get_str(r)?;
        let population = get_u64(r)?;
        entries.push(GazetteerEntry {
            id,
            name,
            ascii_name,
            alternate_names,
            latitude,
            longitude,
            feature_class,
            feature_code,
            country_code,
            admin1,
            population,
        });
    }
    if entries.len() != count as usize {
        return Err(GazetteerError::CacheFormat("entry count mismatch".into()));
    }
    Ok(GazetteerIndex::from_entries(entries, source_sha256, min_population, report))
}

//! Zip archives of document payloads.

use std::io::{Cursor, Read};

use crate::ingest::Format;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveEntry {
    pub name: String,
    pub format: Format,
    pub payload: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("unreadable zip archive: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error("reading {name}: {source}")]
    Io { name: String, source: std::io::Error },
}

/// Entries in archive order. Directories and files whose extension is not
/// a known document format are returned in `skipped`.
pub fn read_archive(bytes: &[u8]) -> Result<(Vec<ArchiveEntry>, Vec<String>), ArchiveError> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))?;
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for i in 0..archive.len() {
        let mut file = archive.by_index(i)?;
        let name = file.name()?.into_owned();
        if file.is_dir() {
            continue;
        }
        let Some(format) = Format::from_path(std::path::Path::new(&name)) else {
            skipped.push(name);
            continue;
        };
        let mut payload = Vec::new();
        file.read_to_end(&mut payload).map_err(|source| ArchiveError::Io {
            name: name.clone(),
            source,
        })?;
        entries.push(ArchiveEntry { name, format, payload });
    }
    Ok((entries, skipped))
}

/// True when `bytes` starts with the zip local-file signature.
pub fn looks_like_zip(bytes: &[u8]) -> bool {
    bytes.starts_with(b"PK\x03\x04") || bytes.starts_with(b"PK\x05\x06")
}

/// Builds an archive from (name, payload) pairs.
pub fn write_archive(files: &[(&str, &[u8])]) -> Result<Vec<u8>, zip::result::ZipError> {
    use std::io::Write;
    let mut w = zip::ZipWriter::new(Cursor::new(Vec::new()));
    for (name, data) in files {
        w.start_file(*name, zip::write::SimpleFileOptions::default())?;
        w.write_all(data)?;
    }
    Ok(w.finish()?.into_inner())
}

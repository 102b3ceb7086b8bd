//! Small file helpers. All output files are written atomically: content goes
//! to a temp file in the destination directory, then a rename puts it in
//! place, so readers never observe partial files.

use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

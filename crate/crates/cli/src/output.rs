use std::fs;
use std::io::{self, Write};
use std::path::Path;

use tempfile::Builder;

use crate::CliError;

/// Writes `bytes` to `path` via a sibling temporary file and rename, or to
/// stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(io_err)
        }
        Some(p) => write_atomic(p, |f| f.write_all(bytes)),
    }
}

pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut fs::File) -> io::Result<()>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o666));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| io_ctx(path, e))?;
    fill(tmp.as_file_mut()).map_err(|e| io_ctx(path, e))?;
    tmp.as_file_mut().sync_all().map_err(|e| io_ctx(path, e))?;
    tmp.persist(path).map_err(|e| io_ctx(path, e.error))?;
    Ok(())
}

/// Checks that `path` can be created before any work is done.
pub fn check_writable(path: Option<&Path>) -> Result<(), CliError> {
    let Some(p) = path else { return Ok(()) };
    let dir = match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(CliError::Param(format!("output directory {} does not exist", dir.display())));
    }
    if p.is_dir() {
        return Err(CliError::Param(format!("{} is a directory", p.display())));
    }
    Ok(())
}

fn io_err(e: io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io_ctx(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

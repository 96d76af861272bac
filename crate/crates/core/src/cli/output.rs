use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Writes every file or none: each goes to a temporary sibling first and is
/// renamed into place once all of them are complete.
pub fn commit(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged: Vec<(PathBuf, &Path)> = Vec::new();
    let outcome = (|| -> Result<()> {
        for (path, bytes) in files {
            let tmp = temp_sibling(path);
            staged.push((tmp.clone(), path));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    let mut done: Vec<&Path> = Vec::new();
    for (tmp, path) in &staged {
        if let Err(e) = fs::rename(tmp, path) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            for p in done {
                let _ = fs::remove_file(p);
            }
            return Err(e.into());
        }
        done.push(path);
    }
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.partial", std::process::id()))
}

/// Sends `bytes` to `path`, or to `stdout` when no path is given.
pub fn emit(path: Option<&Path>, bytes: Vec<u8>, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => commit(&[(p.to_path_buf(), bytes)]),
        None => {
            stdout.write_all(&bytes)?;
            Ok(())
        }
    }
}

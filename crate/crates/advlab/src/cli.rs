//! Command-line entry point.

use std::ffi::OsString;

/// Dispatch `argv`; returns the process exit code
/// (0 success, 1 usage error, 2 runtime failure).
pub fn dispatch<I, A>(_argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    eprintln!("not yet wired");
    1
}

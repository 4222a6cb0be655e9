//! Problem files, inline polynomial literals and the commands behind the
//! `sosrelax` binary.

pub mod commands;
pub mod expr;
pub mod format;

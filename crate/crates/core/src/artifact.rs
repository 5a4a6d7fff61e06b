//! Versioned JSON documents for models and reports.
//!
//! Every file is an object `{"format": "faultgan", "version": N, "kind": K,
//! "body": ...}`. Floats are written in shortest round-trip form, so values
//! reload bit-exactly.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "faultgan";
pub const VERSION: u32 = 1;

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format: &'a str,
    version: u32,
    kind: &'a str,
    body: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    format: String,
    version: u32,
    kind: String,
    body: serde_json::Value,
}

pub fn to_string<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&EnvelopeOut {
        format: FORMAT,
        version: VERSION,
        kind,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn from_str<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let env: EnvelopeIn = serde_json::from_str(text)?;
    if env.format != FORMAT {
        return Err(Error::Schema(format!("unknown document format '{}'", env.format)));
    }
    if env.version != VERSION {
        return Err(Error::Schema(format!(
            "document version {} is not supported (expected {VERSION})",
            env.version
        )));
    }
    if env.kind != kind {
        return Err(Error::Schema(format!(
            "expected a '{kind}' document, found '{}'",
            env.kind
        )));
    }
    Ok(serde_json::from_value(env.body)?)
}

pub fn save<T: Serialize>(path: impl AsRef<Path>, kind: &str, body: &T) -> Result<()> {
    std::fs::write(path, to_string(kind, body)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    from_str(kind, &std::fs::read_to_string(path)?)
}

//! Tensor files.
//!
//! Binary: the bytes `TKZ1`, the three dimensions as little-endian `u64`,
//! then every entry as a little-endian `f64` in storage order.
//!
//! Text: a first line holding the three dimensions, then the entries in
//! storage order separated by whitespace. Lines starting with `#` are
//! ignored.

use super::Tensor3;
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"TKZ1";

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub fn write_binary(t: &Tensor3, mut w: impl Write) -> Result<()> {
    let (n1, n2, n3) = t.dims();
    w.write_all(MAGIC)?;
    for d in [n1, n2, n3] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<Tensor3> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return format_err("missing TKZ1 header");
    }
    let dim = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = [dim(4), dim(12), dim(20)];
    let count = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .filter(|&c| c > 0)
        .ok_or_else(|| Error::Format(format!("invalid dimensions {dims:?}")))?;
    let payload = &bytes[28..];
    if payload.len() as u64 != count * 8 {
        return format_err(format!("expected {} data bytes for {dims:?}, found {}", count * 8, payload.len()));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Tensor3::new(dims[0] as usize, dims[1] as usize, dims[2] as usize, data)
}

pub fn write_text(t: &Tensor3, mut w: impl Write) -> Result<()> {
    let (n1, n2, n3) = t.dims();
    writeln!(w, "{n1} {n2} {n3}")?;
    for chunk in t.as_slice().chunks(n1) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_text(mut r: impl Read) -> Result<Tensor3> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    let mut tokens = s.lines().filter(|l| !l.trim_start().starts_with('#')).flat_map(str::split_whitespace);
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let tok = tokens.next().ok_or_else(|| Error::Format("missing dimensions".into()))?;
        *d = tok.parse().map_err(|_| Error::Format(format!("bad dimension {tok:?}")))?;
    }
    let data: Vec<f64> = tokens
        .map(|tok| tok.parse().map_err(|_| Error::Format(format!("bad value {tok:?}"))))
        .collect::<Result<_>>()?;
    if data.len() != dims.iter().product::<usize>() {
        return format_err(format!("{} values for dimensions {dims:?}", data.len()));
    }
    Tensor3::new(dims[0], dims[1], dims[2], data)
}

/// Loads a tensor, choosing the format from the file header.
pub fn load(path: impl AsRef<Path>) -> Result<Tensor3> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes[..])
    } else {
        read_text(&bytes[..])
    }
}

pub fn save_binary(t: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(28 + 8 * t.len());
    write_binary(t, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tensor3 {
        Tensor3::from_fn(2, 3, 2, |i, j, k| i as f64 - 0.25 * j as f64 + 1e-3 * k as f64)
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_binary(&t, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"TKZ1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 28 + 12 * 8);
        assert_eq!(read_binary(&buf[..]).unwrap(), t);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_text(&t, &mut buf).unwrap();
        assert_eq!(read_text(&buf[..]).unwrap(), t);
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(matches!(read_binary(&b"TKZ0"[..]), Err(Error::Format(_))));
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_binary(&buf[..]), Err(Error::Format(_))));
        assert!(matches!(read_text(&b"2 2 1\n1 2 3"[..]), Err(Error::Format(_))));
        assert!(matches!(read_text(&b"2 x 1\n"[..]), Err(Error::Format(_))));
        assert!(read_text(&b"# comment\n1 1 2\n3 4\n"[..]).is_ok());
    }
}

//! `SOPL` model files.
//!
//! ```text
//! "SOPL" | version u32 | tag1 | tag2 | a1 u32 | a2 u32 | p2 u32
//! | y_mean | x2_mean[p2] | D[a1*p2] | PLS1 payload if a1 > 0 | PLS1 payload if a2 > 0
//! ```
//! Tags are a u32 byte length followed by UTF-8. Reals are little-endian
//! real64; `D` is row-major.

use nalgebra::{DMatrix, DVector};

use crate::pls::{encode_model, read_model, Reader};

use super::{Result, SoplsError, SoplsModel};

pub const SOPLS_MAGIC: &[u8; 4] = b"SOPL";
pub const SOPLS_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_sopls(m: &SoplsModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SOPLS_MAGIC);
    put_u32(&mut out, SOPLS_VERSION as usize);
    for tag in &m.tags {
        put_u32(&mut out, tag.len());
        out.extend_from_slice(tag.as_bytes());
    }
    put_u32(&mut out, m.a1());
    put_u32(&mut out, m.a2());
    put_u32(&mut out, m.x2_mean.len());
    put_f64(&mut out, m.y_mean);
    m.x2_mean.iter().for_each(|&v| put_f64(&mut out, v));
    for i in 0..m.ortho_map.nrows() {
        m.ortho_map.row(i).iter().for_each(|&v| put_f64(&mut out, v));
    }
    if let Some(b1) = &m.block1 {
        out.extend_from_slice(&encode_model(b1));
    }
    if let Some(b2) = &m.block2 {
        out.extend_from_slice(&encode_model(b2));
    }
    out
}

fn tag(r: &mut Reader<'_>) -> Result<String> {
    let len = r.u32()?;
    let bytes = r.take(len)?;
    String::from_utf8(bytes.to_vec()).map_err(|_| SoplsError::Format("block tag is not UTF-8".into()))
}

pub fn decode_sopls(bytes: &[u8]) -> Result<SoplsModel> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != SOPLS_MAGIC {
        return Err(SoplsError::Format("bad magic, expected SOPL".into()));
    }
    let version = r.u32()?;
    if version != SOPLS_VERSION as usize {
        return Err(SoplsError::Format(format!("unsupported version {version}")));
    }
    let tags = [tag(&mut r)?, tag(&mut r)?];
    let (a1, a2, p2) = (r.u32()?, r.u32()?, r.u32()?);
    if p2 == 0 || (a1 == 0 && a2 == 0) {
        return Err(SoplsError::Format(format!("invalid dims a1={a1} a2={a2} p2={p2}")));
    }
    let y_mean = r.reals(1)?[0];
    let x2_mean = DVector::from_vec(r.reals(p2)?);
    let d = r.reals(a1.checked_mul(p2).ok_or_else(|| SoplsError::Format("size overflow".into()))?)?;
    let ortho_map = DMatrix::from_row_slice(a1, p2, &d);
    let block1 = if a1 > 0 { Some(read_model(&mut r)?) } else { None };
    let block2 = if a2 > 0 { Some(read_model(&mut r)?) } else { None };
    r.finish()?;
    if block1.as_ref().is_some_and(|b| b.n_lv() != a1) || block2.as_ref().is_some_and(|b| b.n_lv() != a2 || b.n_vars() != p2) {
        return Err(SoplsError::Format("embedded model dims disagree with header".into()));
    }
    Ok(SoplsModel { tags, y_mean, block1, x2_mean, ortho_map, block2 })
}

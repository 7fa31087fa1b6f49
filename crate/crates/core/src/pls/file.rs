//! `PLS1` model files.
//!
//! ```text
//! "PLS1" | version u32 | n u32 | p u32 | A u32
//! | x_mean[p] | y_mean | W[p*A] | P[p*A] | q[A] | T[n*A] | beta_aug[p+1]
//! ```
//! Integers and reals are little-endian; matrices are row-major real64.

use nalgebra::{DMatrix, DVector};

use super::{PlsError, PlsModel, Result};

pub const PLS_MAGIC: &[u8; 4] = b"PLS1";
pub const PLS_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_reals<'a>(out: &mut Vec<u8>, it: impl IntoIterator<Item = &'a f64>) {
    for v in it {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        put_reals(out, m.row(i).iter());
    }
}

pub fn encode_model(m: &PlsModel) -> Vec<u8> {
    let (n, p, a) = (m.scores.nrows(), m.n_vars(), m.n_lv());
    let mut out = Vec::with_capacity(24 + 8 * (p + 1 + 2 * p * a + a + n * a + p + 1));
    out.extend_from_slice(PLS_MAGIC);
    put_u32(&mut out, PLS_VERSION as usize);
    put_u32(&mut out, n);
    put_u32(&mut out, p);
    put_u32(&mut out, a);
    put_reals(&mut out, m.x_mean.iter());
    put_reals(&mut out, [m.y_mean].iter());
    put_matrix(&mut out, &m.weights);
    put_matrix(&mut out, &m.x_loadings);
    put_reals(&mut out, m.y_loadings.iter());
    put_matrix(&mut out, &m.scores);
    put_reals(&mut out, m.beta_aug.iter());
    out
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| PlsError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub(crate) fn reals(&mut self, len: usize) -> Result<Vec<f64>> {
        let bytes = self.take(len.checked_mul(8).ok_or_else(|| PlsError::Format("size overflow".into()))?)?;
        let v: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(PlsError::Format("non-finite value".into()));
        }
        Ok(v)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let v = self.reals(rows.checked_mul(cols).ok_or_else(|| PlsError::Format("size overflow".into()))?)?;
        Ok(DMatrix::from_row_slice(rows, cols, &v))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(PlsError::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub(crate) fn read_model(r: &mut Reader<'_>) -> Result<PlsModel> {
    if r.take(4)? != PLS_MAGIC {
        return Err(PlsError::Format("bad magic, expected PLS1".into()));
    }
    let version = r.u32()?;
    if version != PLS_VERSION as usize {
        return Err(PlsError::Format(format!("unsupported version {version}")));
    }
    let (n, p, a) = (r.u32()?, r.u32()?, r.u32()?);
    if p == 0 || a == 0 || a > p || n < 2 {
        return Err(PlsError::Format(format!("invalid dims n={n} p={p} A={a}")));
    }
    let x_mean = DVector::from_vec(r.reals(p)?);
    let y_mean = r.reals(1)?[0];
    let weights = r.matrix(p, a)?;
    let x_loadings = r.matrix(p, a)?;
    let y_loadings = DVector::from_vec(r.reals(a)?);
    let scores = r.matrix(n, a)?;
    let beta_aug = DVector::from_vec(r.reals(p + 1)?);
    Ok(PlsModel { x_mean, y_mean, weights, x_loadings, y_loadings, scores, beta_aug })
}

pub fn decode_model(bytes: &[u8]) -> Result<PlsModel> {
    let mut r = Reader::new(bytes);
    let m = read_model(&mut r)?;
    r.finish()?;
    Ok(m)
}

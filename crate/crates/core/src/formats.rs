//! Little-endian binary containers: RVOL volumes and RTEN tensors.
//!
//! ```text
//! RVOL: "RVOL" 0x01 | nz ny nx: u32 | sx sy sz: f64 | ox oy oz: f64 | voxels: f32 * nz*ny*nx
//! RTEN: "RTEN" 0x01 | rank: u8 | dims: u32 * rank | payload: f32, C order
//! ```

use crate::volume::{Grid, Volume};
use crate::{Error, Result, Vec3};

pub const RVOL_MAGIC: &[u8; 4] = b"RVOL";
pub const RTEN_MAGIC: &[u8; 4] = b"RTEN";
pub const FORMAT_VERSION: u8 = 0x01;

pub(crate) struct Reader<'a> {
    format: &'static str,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(format: &'static str, buf: &'a [u8]) -> Self {
        Reader {
            format,
            buf,
            pos: 0,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.format,
                format!(
                    "truncated: need {n} bytes at offset {}, {} available",
                    self.pos,
                    self.buf.len() - self.pos
                ),
            )),
        }
    }

    pub(crate) fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(Error::format(self.format, format!("bad magic {m:?}")));
        }
        let v = self.u8()?;
        if v != FORMAT_VERSION {
            return Err(Error::format(self.format, format!("unsupported version {v}")));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| {
            Error::format(self.format, "payload size overflows")
        })?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.format,
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_rvol(vol: &Volume) -> Vec<u8> {
    let g = vol.grid();
    let mut out = Vec::with_capacity(5 + 12 + 48 + vol.voxels().len() * 4);
    out.extend_from_slice(RVOL_MAGIC);
    out.push(FORMAT_VERSION);
    for d in g.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in g.spacing().iter().chain(g.origin().iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_f32s(&mut out, vol.voxels());
    out
}

pub fn decode_rvol(bytes: &[u8]) -> Result<Volume> {
    let mut r = Reader::new("RVOL", bytes);
    r.header(RVOL_MAGIC)?;
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let spacing = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
    let origin = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
    let grid = Grid::new(dims, spacing, origin).map_err(|e| Error::format("RVOL", e.to_string()))?;
    let voxels = r.f32s(grid.len())?;
    r.finish()?;
    Volume::new(grid, voxels).map_err(|e| Error::format("RVOL", e.to_string()))
}

/// A dense f32 array of any rank, as stored in RTEN files.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::ShapeMismatch(format!("dims {dims:?} overflow")))?;
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        if dims.len() > u8::MAX as usize {
            return Err(Error::ShapeMismatch(format!("rank {} too large", dims.len())));
        }
        Ok(RawTensor { dims, data })
    }
}

pub fn encode_rten(t: &RawTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + 4 * t.dims.len() + 4 * t.data.len());
    out.extend_from_slice(RTEN_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(t.dims.len() as u8);
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    put_f32s(&mut out, &t.data);
    out
}

pub fn decode_rten(bytes: &[u8]) -> Result<RawTensor> {
    let mut r = Reader::new("RTEN", bytes);
    r.header(RTEN_MAGIC)?;
    let rank = r.u8()? as usize;
    let dims = (0..rank)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::format("RTEN", "dims overflow"))?;
    let data = r.f32s(n)?;
    r.finish()?;
    RawTensor::new(dims, data)
}

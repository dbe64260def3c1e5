//! The ACHR little-endian binary container.
//!
//! Every file starts with the magic bytes `ACHR` and a u32 format version.
//! Packets then store the mass, per-axis N (u32) and P (f64) and the complex
//! amplitudes as interleaved (re, im) pairs. Current slices store x0, per-axis
//! node count, origin and spacing, then (J0, J1, J2, J3) per node. Scalar
//! fields use the slice header without x0 and one value per node. All arrays
//! are row-major with x1 slowest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::currents::CurrentSlice;
use crate::error::{Error, Result};
use crate::wavepacket::{MomentumGrid, WavePacket};
use crate::window::SpatialWindow;

pub const MAGIC: &[u8; 4] = b"ACHR";
pub const VERSION: u32 = 1;

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.inner.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated container: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }
    fn header(&mut self) -> Result<()> {
        if &self.bytes::<4>()? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }
    fn finish(mut self) -> Result<()> {
        let mut rest = Vec::new();
        self.inner.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        Ok(())
    }
}

fn header<W: Write>(w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    Ok(())
}

fn window_header<W: Write>(w: &mut W, win: &SpatialWindow) -> Result<()> {
    for a in 0..3 {
        w.write_all(&(win.n[a] as u32).to_le_bytes())?;
        w.write_all(&win.origin[a].to_le_bytes())?;
        w.write_all(&win.spacing[a].to_le_bytes())?;
    }
    Ok(())
}

fn read_window<R: Read>(r: &mut Reader<R>) -> Result<SpatialWindow> {
    let mut n = [0usize; 3];
    let mut origin = [0.0; 3];
    let mut spacing = [0.0; 3];
    for a in 0..3 {
        n[a] = r.u32()? as usize;
        origin[a] = r.f64()?;
        spacing[a] = r.f64()?;
    }
    SpatialWindow::new(origin, spacing, n).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_packet<W: Write>(w: &mut W, phi: &WavePacket) -> Result<()> {
    header(w)?;
    w.write_all(&phi.mass().to_le_bytes())?;
    let g = phi.grid();
    for _ in 0..3 {
        w.write_all(&(g.n as u32).to_le_bytes())?;
        w.write_all(&g.p_max.to_le_bytes())?;
    }
    for a in phi.amplitudes() {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a packet; the grid gets the default margin of N/8 nodes.
pub fn read_packet<R: Read>(r: R) -> Result<WavePacket> {
    let mut r = Reader { inner: r };
    r.header()?;
    let mass = r.f64()?;
    let mut dims = [(0usize, 0.0); 3];
    for d in dims.iter_mut() {
        *d = (r.u32()? as usize, r.f64()?);
    }
    if dims[1] != dims[0] || dims[2] != dims[0] {
        return Err(Error::Format(format!("only cubic grids are supported, got {dims:?}")));
    }
    let grid = MomentumGrid::new(dims[0].0, dims[0].1).map_err(|e| Error::Format(e.to_string()))?;
    let mut amps = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = r.f64()?;
        let im = r.f64()?;
        amps.push(Complex64::new(re, im));
    }
    r.finish()?;
    WavePacket::new(grid, mass, amps)
}

pub fn write_slice<W: Write>(w: &mut W, slice: &CurrentSlice) -> Result<()> {
    header(w)?;
    w.write_all(&slice.t.to_le_bytes())?;
    window_header(w, &slice.window)?;
    for v in &slice.values {
        for c in v {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_slice<R: Read>(r: R) -> Result<CurrentSlice> {
    let mut r = Reader { inner: r };
    r.header()?;
    let t = r.f64()?;
    let window = read_window(&mut r)?;
    let mut values = Vec::with_capacity(window.len());
    for _ in 0..window.len() {
        values.push([r.f64()?, r.f64()?, r.f64()?, r.f64()?]);
    }
    r.finish()?;
    Ok(CurrentSlice { t, window, values })
}

pub fn write_scalar_field<W: Write>(w: &mut W, window: &SpatialWindow, values: &[f64]) -> Result<()> {
    if values.len() != window.len() {
        return Err(Error::InvalidParameter("value count does not match the window".into()));
    }
    header(w)?;
    window_header(w, window)?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_scalar_field<R: Read>(r: R) -> Result<(SpatialWindow, Vec<f64>)> {
    let mut r = Reader { inner: r };
    r.header()?;
    let window = read_window(&mut r)?;
    let values = (0..window.len()).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok((window, values))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn save_packet(path: &Path, phi: &WavePacket) -> Result<()> {
    let mut w = create(path)?;
    write_packet(&mut w, phi)?;
    w.flush()?;
    Ok(())
}

pub fn load_packet(path: &Path) -> Result<WavePacket> {
    read_packet(open(path)?)
}

pub fn save_slice(path: &Path, slice: &CurrentSlice) -> Result<()> {
    let mut w = create(path)?;
    write_slice(&mut w, slice)?;
    w.flush()?;
    Ok(())
}

pub fn load_slice(path: &Path) -> Result<CurrentSlice> {
    read_slice(open(path)?)
}

pub fn save_scalar_field(path: &Path, window: &SpatialWindow, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    write_scalar_field(&mut w, window, values)?;
    w.flush()?;
    Ok(())
}

pub fn load_scalar_field(path: &Path) -> Result<(SpatialWindow, Vec<f64>)> {
    read_scalar_field(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavepacket::{make_packet, GaussianParams, PacketSpec};

    #[test]
    fn packet_layout_is_exact() {
        let g = MomentumGrid::new(8, 2.0).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); g.len()];
        amps[g.index(4, 4, 4)] = Complex64::new(1.5, -0.25);
        let phi = WavePacket::new(g, 1.0, amps).unwrap();
        let mut buf = Vec::new();
        write_packet(&mut buf, &phi).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 3 * 12 + 16 * 512);
        assert_eq!(&buf[..4], b"ACHR");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 1.0);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 2.0);
        let off = 52 + 16 * g.index(4, 4, 4);
        assert_eq!(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(buf[off + 8..off + 16].try_into().unwrap()), -0.25);
    }

    #[test]
    fn packet_round_trip() {
        let g = MomentumGrid::new(16, 4.0).unwrap();
        let params = GaussianParams { position: [0.5, 0.0, -1.0], ..Default::default() };
        let phi = make_packet(&g, 1.0, &PacketSpec::MollifiedGaussian(params)).unwrap();
        let mut buf = Vec::new();
        write_packet(&mut buf, &phi).unwrap();
        let back = read_packet(buf.as_slice()).unwrap();
        assert_eq!(back, phi);
    }

    #[test]
    fn corrupt_containers_rejected() {
        let g = MomentumGrid::new(8, 2.0).unwrap();
        let phi = WavePacket::zero(g, 1.0).unwrap();
        let mut buf = Vec::new();
        write_packet(&mut buf, &phi).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_packet(bad.as_slice()).is_err());
        assert!(read_packet(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_packet(long.as_slice()).is_err());
    }

    #[test]
    fn slice_round_trip() {
        let window = SpatialWindow::centered([0.0; 3], 0.5, 3).unwrap();
        let values = (0..window.len()).map(|i| [i as f64, -1.0, 0.5, 2.0]).collect();
        let slice = CurrentSlice { t: 0.75, window, values };
        let mut buf = Vec::new();
        write_slice(&mut buf, &slice).unwrap();
        assert_eq!(read_slice(buf.as_slice()).unwrap(), slice);
    }

    #[test]
    fn scalar_field_round_trip() {
        let window = SpatialWindow::centered([1.0, 0.0, 0.0], 0.25, 4).unwrap();
        let values: Vec<f64> = (0..window.len()).map(|i| (i as f64).sin()).collect();
        let mut buf = Vec::new();
        write_scalar_field(&mut buf, &window, &values).unwrap();
        let (w2, v2) = read_scalar_field(buf.as_slice()).unwrap();
        assert_eq!(w2, window);
        assert_eq!(v2, values);
    }
}

//! Little-endian binary primitives shared by the recording and cube formats.

use std::io::{self, Read, Write};

use crate::params::FrameParams;

pub fn write_u16<W: Write>(w: &mut W, v: u16) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_f32<W: Write>(w: &mut W, v: f32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn read_exact_bytes<R: Read, const N: usize>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_u8<R: Read>(r: &mut R) -> io::Result<u8> {
    Ok(read_exact_bytes::<R, 1>(r)?[0])
}

pub fn read_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    Ok(u16::from_le_bytes(read_exact_bytes(r)?))
}

pub fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    Ok(u32::from_le_bytes(read_exact_bytes(r)?))
}

pub fn read_f32<R: Read>(r: &mut R) -> io::Result<f32> {
    Ok(f32::from_le_bytes(read_exact_bytes(r)?))
}

pub fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_le_bytes(read_exact_bytes(r)?))
}

/// Parameter block layout shared by the HUGR and HUGC headers: the ten
/// fields in declared order, floats as f64 and counts as u32.
pub fn write_params<W: Write>(w: &mut W, p: &FrameParams) -> io::Result<()> {
    write_f64(w, p.sound_speed)?;
    write_f64(w, p.carrier_freq)?;
    write_f64(w, p.bandwidth)?;
    write_f64(w, p.pri)?;
    write_u32(w, p.pulses_per_frame)?;
    write_f64(w, p.pulse_width)?;
    write_f64(w, p.fast_time_rate)?;
    write_u32(w, p.fft_points)?;
    write_u32(w, p.range_bins)?;
    write_u32(w, p.roi_start_bin)
}

pub fn read_params<R: Read>(r: &mut R) -> io::Result<FrameParams> {
    Ok(FrameParams {
        sound_speed: read_f64(r)?,
        carrier_freq: read_f64(r)?,
        bandwidth: read_f64(r)?,
        pri: read_f64(r)?,
        pulses_per_frame: read_u32(r)?,
        pulse_width: read_f64(r)?,
        fast_time_rate: read_f64(r)?,
        fft_points: read_u32(r)?,
        range_bins: read_u32(r)?,
        roi_start_bin: read_u32(r)?,
    })
}

/// Size in bytes of the encoded parameter block.
pub const PARAMS_BLOCK_LEN: usize = 6 * 8 + 4 * 4;

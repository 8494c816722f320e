//! Binary frame dumps for debugging.
//!
//! Layout: 8-byte magic `WGRFRM01`, frame index `m` (u64 LE), sample count
//! (u64 LE), then interleaved `re, im` as f64 LE.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use wigig_radar_core::echo::EchoFrame;

pub const MAGIC: [u8; 8] = *b"WGRFRM01";
pub const HEADER_LEN: usize = 24;

pub fn write_frame<W: Write>(mut w: W, frame: &EchoFrame) -> io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&(frame.index as u64).to_le_bytes())?;
    w.write_all(&(frame.samples.len() as u64).to_le_bytes())?;
    for s in &frame.samples {
        w.write_all(&s.re.to_le_bytes())?;
        w.write_all(&s.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_frame<R: Read>(mut r: R) -> io::Result<EchoFrame> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if header[..8] != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a frame dump"));
    }
    let word = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().expect("8 bytes"));
    let (index, len) = (word(8), word(16));
    let mut samples = Vec::with_capacity(len.min(1 << 24) as usize);
    let mut buf = [0u8; 16];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        samples.push(Complex64::new(re, im));
    }
    Ok(EchoFrame { index: index as usize, k_start: 0, samples })
}

//! Flat binary dump of a dense `(y, x, c)` grid: three little-endian `u32`
//! dims (height, width, channels) followed by little-endian `f32` values.

use std::io::{Read, Write};

use super::{ReprError, Representation};

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub values: Vec<f32>,
}

impl From<&Representation> for Snapshot {
    fn from(rep: &Representation) -> Self {
        Snapshot {
            height: rep.height() as u32,
            width: rep.width() as u32,
            channels: rep.channels() as u32,
            values: rep.values().to_vec(),
        }
    }
}

pub fn write_snapshot(snap: &Snapshot, mut w: impl Write) -> Result<(), ReprError> {
    for d in [snap.height, snap.width, snap.channels] {
        w.write_all(&d.to_le_bytes())?;
    }
    for v in &snap.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot(mut r: impl Read) -> Result<Snapshot, ReprError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(ReprError::Snapshot("truncated header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let (height, width, channels) = (word(0), word(1), word(2));
    let n = height as usize * width as usize * channels as usize;
    if bytes.len() != 12 + 4 * n {
        return Err(ReprError::Snapshot(format!("expected {} payload bytes, got {}", 4 * n, bytes.len() - 12)));
    }
    let values = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Snapshot { height, width, channels, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, Polarity};
    use crate::representation::{build, ReprKind};

    #[test]
    fn layout_is_dims_then_row_major_values() {
        let rep = build(ReprKind::Histogram, &[Event::new(1, 0, 0, Polarity::Negative)], 2, 1).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&Snapshot::from(&rep), &mut buf).unwrap();
        let mut expect = Vec::new();
        for d in [1u32, 2, 2] {
            expect.extend(d.to_le_bytes());
        }
        for v in [0f32, 0.0, 0.0, 1.0] {
            expect.extend(v.to_le_bytes());
        }
        assert_eq!(buf, expect);
        assert_eq!(read_snapshot(&buf[..]).unwrap(), Snapshot::from(&rep));
        assert!(read_snapshot(&buf[..buf.len() - 1]).is_err());
    }
}

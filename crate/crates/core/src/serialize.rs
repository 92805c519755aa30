//! Binary layer files.
//!
//! ```text
//! magic      6 bytes  "VXBLX\0"
//! version    u32      1
//! voxel_size f64
//! vps        u32      voxels per block side
//! kind       u8       0 = TSDF, 1 = ESDF
//! blocks     u64
//! per block: 3 × i64 block index, then vps³ voxel records in x-fastest order
//! ```
//!
//! TSDF records are `f32 distance, f32 weight, 3 × u8 color, u8 pad`; ESDF
//! records are `f32 distance, u8 flags, 3 × i8 parent`. Little-endian throughout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::BlockIndex;
use crate::layer::{Layer, LayerKind, Voxel};

pub const MAGIC: &[u8; 6] = b"VXBLX\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 6 + 4 + 8 + 4 + 1 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerHeader {
    pub version: u32,
    pub voxel_size: f64,
    pub voxels_per_side: usize,
    pub kind: LayerKind,
    pub block_count: u64,
}

pub fn serialize_layer<V: Voxel, W: Write>(layer: &Layer<V>, sink: &mut W) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&layer.voxel_size().to_le_bytes());
    buf.extend_from_slice(&(layer.voxels_per_side() as u32).to_le_bytes());
    buf.push(V::KIND as u8);
    buf.extend_from_slice(&(layer.num_blocks() as u64).to_le_bytes());
    sink.write_all(&buf)?;

    let vps = layer.voxels_per_side();
    for block in layer.blocks() {
        buf.clear();
        buf.reserve(24 + vps * vps * vps * V::ENCODED_LEN);
        let b = block.index();
        for c in [b.x, b.y, b.z] {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        for v in block.voxels() {
            v.encode(&mut buf);
        }
        sink.write_all(&buf)?;
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let rest = self.bytes.len() - self.pos;
        if rest < n {
            return Err(Error::Truncated {
                expected: n,
                found: rest,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<LayerHeader> {
    let magic = cur.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:02x?}")));
    }
    let version = u32::from_le_bytes(cur.array()?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let voxel_size = f64::from_le_bytes(cur.array()?);
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(Error::Format(format!("invalid voxel size {voxel_size}")));
    }
    let vps = u32::from_le_bytes(cur.array()?) as usize;
    if vps == 0 || vps > 1024 {
        return Err(Error::Format(format!("invalid voxels_per_side {vps}")));
    }
    let kind_byte = cur.array::<1>()?[0];
    let kind = LayerKind::from_u8(kind_byte)
        .ok_or_else(|| Error::Format(format!("unknown layer kind {kind_byte}")))?;
    let block_count = u64::from_le_bytes(cur.array()?);
    Ok(LayerHeader {
        version,
        voxel_size,
        voxels_per_side: vps,
        kind,
        block_count,
    })
}

/// Read just the header.
pub fn read_header<R: Read>(source: &mut R) -> Result<LayerHeader> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    source.take(HEADER_LEN as u64).read_to_end(&mut buf)?;
    parse_header(&mut Cursor { bytes: &buf, pos: 0 })
}

pub fn deserialize_layer<V: Voxel, R: Read>(source: &mut R) -> Result<Layer<V>> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    let header = parse_header(&mut cur)?;
    if header.kind != V::KIND {
        return Err(Error::WrongLayerKind {
            expected: V::KIND,
            found: header.kind,
        });
    }
    let vps = header.voxels_per_side;
    let n = vps * vps * vps;
    let per_block = 24 + n * V::ENCODED_LEN;
    let remaining = bytes.len() - cur.pos;
    let needed = (header.block_count as u128) * per_block as u128;
    if needed > remaining as u128 {
        return Err(Error::Truncated {
            expected: needed.min(usize::MAX as u128) as usize,
            found: remaining,
        });
    }

    let mut layer = Layer::new(header.voxel_size, vps);
    for _ in 0..header.block_count {
        let x = i64::from_le_bytes(cur.array()?);
        let y = i64::from_le_bytes(cur.array()?);
        let z = i64::from_le_bytes(cur.array()?);
        let index = BlockIndex::new(x, y, z);
        if layer.has_block(index) {
            return Err(Error::Format(format!("duplicate block {index:?}")));
        }
        let payload = cur.take(n * V::ENCODED_LEN)?;
        let voxels = payload.chunks_exact(V::ENCODED_LEN).map(V::decode).collect();
        layer.insert_block(index, voxels);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last block",
            bytes.len() - cur.pos
        )));
    }
    Ok(layer)
}

pub fn save_layer<V: Voxel>(layer: &Layer<V>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serialize_layer(layer, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_layer<V: Voxel>(path: &Path) -> Result<Layer<V>> {
    deserialize_layer(&mut BufReader::new(File::open(path)?))
}

pub fn load_header(path: &Path) -> Result<LayerHeader> {
    read_header(&mut BufReader::new(File::open(path)?))
}

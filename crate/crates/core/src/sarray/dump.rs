//! Raw leaf dump format: a text header (spec text + leading dims) followed
//! by each leaf's scalars in spec order, row-major, little-endian.

use super::array::{Backing, StructArray};
use super::spec::{ElemKind, StructSpec};
use crate::error::{Error, Result};
use std::io::{Read, Write};

const MAGIC: &str = "sarray v1";
const SEPARATOR: &str = "---";

/// Write the dump header + leaf bytes.
pub fn dump<W: Write>(arr: &StructArray, w: &mut W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    write!(w, "{}", arr.spec().to_text())?;
    let dims: Vec<String> = arr.leading().iter().map(|d| d.to_string()).collect();
    writeln!(w, "leading: {}", dims.join(","))?;
    writeln!(w, "{SEPARATOR}")?;
    for i in 0..arr.leaf_count() {
        w.write_all(&arr.leaf_bytes(i))?;
    }
    Ok(())
}

/// Read a dump back into a private array.
pub fn load<R: Read>(r: &mut R) -> Result<StructArray> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    load_bytes(&bytes)
}

pub fn load_bytes(bytes: &[u8]) -> Result<StructArray> {
    // Header is ASCII up to the separator line.
    let sep = format!("\n{SEPARATOR}\n");
    let header_end = find_subsequence(bytes, sep.as_bytes())
        .ok_or_else(|| Error::Parse("missing dump separator".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Parse("non-utf8 dump header".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Parse("bad dump magic".into()));
    }
    let mut spec_text = String::new();
    let mut leading: Option<Vec<usize>> = None;
    for line in lines {
        if let Some(rest) = line.strip_prefix("leading: ") {
            let dims = rest
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad leading dim `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            leading = Some(dims);
        } else {
            spec_text.push_str(line);
            spec_text.push('\n');
        }
    }
    let spec = StructSpec::parse_text(&spec_text)?;
    let leading = leading.ok_or_else(|| Error::Parse("missing leading dims".into()))?;

    let mut arr = StructArray::allocate(&spec, &leading, Backing::Private)?;
    let cells = arr.cells();
    let mut off = header_end + sep.len();
    for (i, desc) in spec.leaves().iter().enumerate() {
        let elem: usize = desc.shape.iter().product();
        let n = cells * elem;
        let width = desc.kind.byte_width();
        let need = n * width;
        if off + need > bytes.len() {
            return Err(Error::Parse("dump truncated".into()));
        }
        let chunk = &bytes[off..off + need];
        fill_leaf(&mut arr, i, desc.kind, elem, cells, chunk)?;
        off += need;
    }
    if off != bytes.len() {
        return Err(Error::Parse("trailing bytes after dump payload".into()));
    }
    Ok(arr)
}

fn fill_leaf(
    arr: &mut StructArray,
    leaf: usize,
    kind: ElemKind,
    elem: usize,
    cells: usize,
    chunk: &[u8],
) -> Result<()> {
    match kind {
        ElemKind::F32 => {
            let vals: Vec<f32> = chunk.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            for cell in 0..cells {
                arr.set_cell_f32(leaf, cell, &vals[cell * elem..(cell + 1) * elem]);
            }
        }
        ElemKind::F64 => {
            let vals: Vec<f64> = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            for cell in 0..cells {
                arr.set_cell_f64(leaf, cell, &vals[cell * elem..(cell + 1) * elem]);
            }
        }
        ElemKind::I64 => {
            let vals: Vec<i64> = chunk.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect();
            for cell in 0..cells {
                arr.set_cell_i64(leaf, cell, &vals[cell * elem..(cell + 1) * elem]);
            }
        }
        ElemKind::Bool => {
            let vals: Vec<bool> = chunk
                .iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(Error::Parse(format!("invalid bool byte {b}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            for cell in 0..cells {
                arr.set_cell_bool(leaf, cell, &vals[cell * elem..(cell + 1) * elem]);
            }
        }
        ElemKind::U8 => {
            for cell in 0..cells {
                arr.set_cell_u8(leaf, cell, &chunk[cell * elem..(cell + 1) * elem]);
            }
        }
    }
    Ok(())
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

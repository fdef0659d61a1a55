//! Dense structured arrays with shared leading dimensions.
//!
//! A [`StructArray`] holds one dense array per spec leaf; every leaf shares
//! the same leading dims (e.g. `[T, B]`) and keeps its own trailing shape.
//! Indexed reads and writes apply structure-wide.
//!
//! Shared backing: an array allocated with [`Backing::Shared`] can be cloned
//! into other threads; clones address the same storage without copying. The
//! container provides no locking — callers must either write disjoint
//! leading-dim regions per writer or synchronize externally, and reads must
//! be separated from writes to the same cells by a synchronization point.

use super::spec::{ElemKind, StructSpec};
use super::value::LeafBuf;
use crate::error::{Error, Result};
use std::cell::UnsafeCell;
use std::sync::Arc;

/// Storage class of a [`StructArray`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backing {
    /// Single-owner storage; `clone` deep-copies.
    Private,
    /// `Arc`-backed storage addressable from other threads; `clone` is a
    /// shallow handle to the same cells.
    Shared,
}

/// Selector for one leading dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimSel {
    /// Single index; the dimension is removed from the result.
    At(usize),
    /// Contiguous half-open range; the dimension is narrowed.
    Range(usize, usize),
    /// Whole dimension.
    Full,
}

/// A per-leading-dimension index expression. Missing trailing selectors
/// default to [`DimSel::Full`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IndexExpr(pub Vec<DimSel>);

impl IndexExpr {
    pub fn full() -> Self {
        IndexExpr(Vec::new())
    }

    pub fn at(i: usize) -> Self {
        IndexExpr(vec![DimSel::At(i)])
    }

    pub fn rows(start: usize, end: usize) -> Self {
        IndexExpr(vec![DimSel::Range(start, end)])
    }

    /// Selects a single `(t, b)` cell of a two-dim array.
    pub fn cell(t: usize, b: usize) -> Self {
        IndexExpr(vec![DimSel::At(t), DimSel::At(b)])
    }

    pub fn then_at(mut self, i: usize) -> Self {
        self.0.push(DimSel::At(i));
        self
    }
}

/// What to write into a selected region.
pub enum WriteSrc<'a> {
    /// A structure-identical array whose leading dims equal the selection.
    Array(&'a StructArray),
    /// A single value broadcast to every scalar slot of every leaf.
    Scalar(f64),
    /// Like `Array`, but leaves with `present[i] == false` are placeholders
    /// and left untouched.
    Partial(&'a StructArray, &'a [bool]),
}

// ---------------------------------------------------------------------------
// Storage

struct SharedLeaf {
    cells: SharedCells,
}

enum SharedCells {
    F32(Box<[UnsafeCell<f32>]>),
    F64(Box<[UnsafeCell<f64>]>),
    I64(Box<[UnsafeCell<i64>]>),
    Bool(Box<[UnsafeCell<bool>]>),
    U8(Box<[UnsafeCell<u8>]>),
}

// Disjoint-writer contract is documented at module level; each scalar sits
// in its own UnsafeCell.
unsafe impl Send for SharedLeaf {}
unsafe impl Sync for SharedLeaf {}

impl SharedCells {
    fn zeros(kind: ElemKind, len: usize) -> Self {
        fn boxed<T: Default>(len: usize) -> Box<[UnsafeCell<T>]> {
            (0..len).map(|_| UnsafeCell::new(T::default())).collect()
        }
        match kind {
            ElemKind::F32 => SharedCells::F32(boxed(len)),
            ElemKind::F64 => SharedCells::F64(boxed(len)),
            ElemKind::I64 => SharedCells::I64(boxed(len)),
            ElemKind::Bool => SharedCells::Bool(boxed(len)),
            ElemKind::U8 => SharedCells::U8(boxed(len)),
        }
    }

    fn base(&self) -> RawPtr {
        match self {
            SharedCells::F32(c) => RawPtr::F32(c.as_ptr() as *mut f32),
            SharedCells::F64(c) => RawPtr::F64(c.as_ptr() as *mut f64),
            SharedCells::I64(c) => RawPtr::I64(c.as_ptr() as *mut i64),
            SharedCells::Bool(c) => RawPtr::Bool(c.as_ptr() as *mut bool),
            SharedCells::U8(c) => RawPtr::U8(c.as_ptr() as *mut u8),
        }
    }
}

enum Store {
    Private(LeafBuf),
    Shared(Arc<SharedLeaf>),
}

/// Kind-tagged raw base pointer into leaf storage.
#[derive(Clone, Copy)]
enum RawPtr {
    F32(*mut f32),
    F64(*mut f64),
    I64(*mut i64),
    Bool(*mut bool),
    U8(*mut u8),
}

impl RawPtr {
    /// Copy `n` scalars between same-kind buffers. Caller guarantees kinds
    /// match, bounds hold, and the regions do not overlap.
    unsafe fn copy_from(self, dst_off: usize, src: RawPtr, src_off: usize, n: usize) {
        match (self, src) {
            (RawPtr::F32(d), RawPtr::F32(s)) => std::ptr::copy_nonoverlapping(s.add(src_off), d.add(dst_off), n),
            (RawPtr::F64(d), RawPtr::F64(s)) => std::ptr::copy_nonoverlapping(s.add(src_off), d.add(dst_off), n),
            (RawPtr::I64(d), RawPtr::I64(s)) => std::ptr::copy_nonoverlapping(s.add(src_off), d.add(dst_off), n),
            (RawPtr::Bool(d), RawPtr::Bool(s)) => std::ptr::copy_nonoverlapping(s.add(src_off), d.add(dst_off), n),
            (RawPtr::U8(d), RawPtr::U8(s)) => std::ptr::copy_nonoverlapping(s.add(src_off), d.add(dst_off), n),
            _ => unreachable!("kind mismatch in raw copy"),
        }
    }

    /// Fill `n` scalars with a broadcast value cast to the leaf kind.
    unsafe fn fill(self, off: usize, n: usize, v: f64) {
        match self {
            RawPtr::F32(p) => (0..n).for_each(|i| p.add(off + i).write(v as f32)),
            RawPtr::F64(p) => (0..n).for_each(|i| p.add(off + i).write(v)),
            RawPtr::I64(p) => (0..n).for_each(|i| p.add(off + i).write(v as i64)),
            RawPtr::Bool(p) => (0..n).for_each(|i| p.add(off + i).write(v != 0.0)),
            RawPtr::U8(p) => (0..n).for_each(|i| p.add(off + i).write(v as u8)),
        }
    }

    unsafe fn eq_run(self, a_off: usize, other: RawPtr, b_off: usize, n: usize) -> bool {
        match (self, other) {
            (RawPtr::F32(a), RawPtr::F32(b)) => slice_bits_eq(a.add(a_off), b.add(b_off), n),
            (RawPtr::F64(a), RawPtr::F64(b)) => slice_bits_eq(a.add(a_off), b.add(b_off), n),
            (RawPtr::I64(a), RawPtr::I64(b)) => slice_bits_eq(a.add(a_off), b.add(b_off), n),
            (RawPtr::Bool(a), RawPtr::Bool(b)) => slice_bits_eq(a.add(a_off), b.add(b_off), n),
            (RawPtr::U8(a), RawPtr::U8(b)) => slice_bits_eq(a.add(a_off), b.add(b_off), n),
            _ => false,
        }
    }

    unsafe fn read_f64(self, off: usize) -> f64 {
        match self {
            RawPtr::F32(p) => p.add(off).read() as f64,
            RawPtr::F64(p) => p.add(off).read(),
            RawPtr::I64(p) => p.add(off).read() as f64,
            RawPtr::Bool(p) => p.add(off).read() as u8 as f64,
            RawPtr::U8(p) => p.add(off).read() as f64,
        }
    }

    /// Raw little-endian bytes of `n` scalars, appended to `out`.
    unsafe fn dump_bytes(self, off: usize, n: usize, out: &mut Vec<u8>) {
        match self {
            RawPtr::F32(p) => (0..n).for_each(|i| out.extend(p.add(off + i).read().to_le_bytes())),
            RawPtr::F64(p) => (0..n).for_each(|i| out.extend(p.add(off + i).read().to_le_bytes())),
            RawPtr::I64(p) => (0..n).for_each(|i| out.extend(p.add(off + i).read().to_le_bytes())),
            RawPtr::Bool(p) => (0..n).for_each(|i| out.push(p.add(off + i).read() as u8)),
            RawPtr::U8(p) => (0..n).for_each(|i| out.push(p.add(off + i).read())),
        }
    }
}

unsafe fn slice_bits_eq<T: PartialEq>(a: *const T, b: *const T, n: usize) -> bool {
    (0..n).all(|i| *a.add(i) == *b.add(i))
}

/// One leaf of a [`StructArray`].
pub struct LeafArray {
    kind: ElemKind,
    trailing: Vec<usize>,
    elem: usize,
    scalars: usize,
    store: Store,
}

impl LeafArray {
    fn zeros(kind: ElemKind, trailing: Vec<usize>, cells: usize, backing: Backing) -> Result<Self> {
        let elem: usize = trailing.iter().product();
        let scalars = cells
            .checked_mul(elem)
            .ok_or_else(|| Error::ShapeMismatch("allocation size overflow".into()))?;
        let store = match backing {
            Backing::Private => Store::Private(LeafBuf::zeros(kind, scalars)),
            Backing::Shared => Store::Shared(Arc::new(SharedLeaf {
                cells: SharedCells::zeros(kind, scalars),
            })),
        };
        Ok(LeafArray { kind, trailing, elem, scalars, store })
    }

    pub fn kind(&self) -> ElemKind {
        self.kind
    }

    pub fn trailing(&self) -> &[usize] {
        &self.trailing
    }

    /// Scalars per leading cell (product of the trailing shape).
    pub fn elem(&self) -> usize {
        self.elem
    }

    fn raw_read(&self) -> RawPtr {
        match &self.store {
            Store::Private(buf) => match buf {
                LeafBuf::F32(v) => RawPtr::F32(v.as_ptr() as *mut f32),
                LeafBuf::F64(v) => RawPtr::F64(v.as_ptr() as *mut f64),
                LeafBuf::I64(v) => RawPtr::I64(v.as_ptr() as *mut i64),
                LeafBuf::Bool(v) => RawPtr::Bool(v.as_ptr() as *mut bool),
                LeafBuf::U8(v) => RawPtr::U8(v.as_ptr() as *mut u8),
            },
            Store::Shared(arc) => arc.cells.base(),
        }
    }

    fn raw_write(&mut self) -> RawPtr {
        match &mut self.store {
            Store::Private(buf) => match buf {
                LeafBuf::F32(v) => RawPtr::F32(v.as_mut_ptr()),
                LeafBuf::F64(v) => RawPtr::F64(v.as_mut_ptr()),
                LeafBuf::I64(v) => RawPtr::I64(v.as_mut_ptr()),
                LeafBuf::Bool(v) => RawPtr::Bool(v.as_mut_ptr()),
                LeafBuf::U8(v) => RawPtr::U8(v.as_mut_ptr()),
            },
            Store::Shared(arc) => arc.cells.base(),
        }
    }
}

// ---------------------------------------------------------------------------
// Region selection

struct Region {
    out_dims: Vec<usize>,
    /// (start, count, stride) per prefix dim that must be iterated.
    prefix: Vec<(usize, usize, usize)>,
    /// Cell offset contributed by the run-merged tail selection.
    run_base: usize,
    /// Cells per emitted run.
    run_len: usize,
}

impl Region {
    fn cells(&self) -> usize {
        self.prefix.iter().map(|&(_, c, _)| c).product::<usize>() * self.run_len
    }

    /// Visit `(cell_start, cell_count)` runs in row-major order.
    fn for_each_run(&self, mut f: impl FnMut(usize, usize)) {
        let k = self.prefix.len();
        if k == 0 {
            f(self.run_base, self.run_len);
            return;
        }
        let mut idx = vec![0usize; k];
        loop {
            let mut start = self.run_base;
            for d in 0..k {
                let (s, _, stride) = self.prefix[d];
                start += (s + idx[d]) * stride;
            }
            f(start, self.run_len);
            // odometer increment
            let mut d = k;
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < self.prefix[d].1 {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

fn compute_region(dims: &[usize], idx: &IndexExpr) -> Result<Region> {
    if idx.0.len() > dims.len() {
        return Err(Error::DimMismatch(format!(
            "index expression has {} selectors for {} leading dims",
            idx.0.len(),
            dims.len()
        )));
    }
    let mut sel: Vec<DimSel> = idx.0.clone();
    sel.resize(dims.len(), DimSel::Full);

    let mut out_dims = Vec::new();
    for (d, s) in sel.iter().enumerate() {
        match *s {
            DimSel::At(i) => {
                if i >= dims[d] {
                    return Err(Error::IndexOutOfRange { index: i, extent: dims[d] });
                }
            }
            DimSel::Range(a, b) => {
                if a >= b || b > dims[d] {
                    return Err(Error::IndexOutOfRange { index: b.max(a), extent: dims[d] });
                }
                out_dims.push(b - a);
            }
            DimSel::Full => out_dims.push(dims[d]),
        }
    }

    // strides over leading cells
    let rank = dims.len();
    let mut strides = vec![1usize; rank];
    for d in (0..rank.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * dims[d + 1];
    }
    let total: usize = dims.iter().product::<usize>().max(1);

    // Longest all-Full suffix, then merge one more contiguous dim into the run.
    let mut s = rank;
    while s > 0 && matches!(sel[s - 1], DimSel::Full) {
        s -= 1;
    }
    let mut run_len = if s == rank {
        1
    } else if s == 0 {
        total
    } else {
        strides[s - 1]
    };
    if s == rank && rank > 0 {
        run_len = 1;
    }
    let mut run_base = 0usize;
    let mut prefix_end = s;
    if s > 0 {
        if let DimSel::Range(a, b) = sel[s - 1] {
            run_base = a * strides[s - 1];
            run_len *= b - a;
            prefix_end = s - 1;
        } else if let DimSel::At(i) = sel[s - 1] {
            run_base = i * strides[s - 1];
            prefix_end = s - 1;
        }
    } else if rank == 0 {
        run_len = 1;
    } else if s == 0 {
        // whole-array selection
    }

    let mut prefix = Vec::new();
    for d in 0..prefix_end {
        let (start, count) = match sel[d] {
            DimSel::At(i) => (i, 1),
            DimSel::Range(a, b) => (a, b - a),
            DimSel::Full => (0, dims[d]),
        };
        prefix.push((start, count, strides[d]));
    }

    Ok(Region { out_dims, prefix, run_base, run_len })
}

// ---------------------------------------------------------------------------
// StructArray

/// A nested, named collection of dense arrays sharing leading dimensions.
pub struct StructArray {
    spec: StructSpec,
    leading: Vec<usize>,
    backing: Backing,
    leaves: Vec<LeafArray>,
}

impl StructArray {
    /// Allocate a zero-initialized array with the given leading extents.
    pub fn allocate(spec: &StructSpec, leading: &[usize], backing: Backing) -> Result<Self> {
        for &e in leading {
            if e == 0 {
                return Err(Error::NonPositiveExtent(e));
            }
        }
        let mut cells = 1usize;
        for &e in leading {
            cells = cells
                .checked_mul(e)
                .ok_or_else(|| Error::ShapeMismatch("leading extent overflow".into()))?;
        }
        let leaves = spec
            .leaves()
            .into_iter()
            .map(|l| LeafArray::zeros(l.kind, l.shape, cells, backing))
            .collect::<Result<Vec<_>>>()?;
        Ok(StructArray { spec: spec.clone(), leading: leading.to_vec(), backing, leaves })
    }

    pub fn spec(&self) -> &StructSpec {
        &self.spec
    }

    pub fn leading(&self) -> &[usize] {
        &self.leading
    }

    pub fn backing(&self) -> Backing {
        self.backing
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf(&self, i: usize) -> &LeafArray {
        &self.leaves[i]
    }

    /// Number of leading cells (product of leading dims).
    pub fn cells(&self) -> usize {
        self.leading.iter().product::<usize>().max(1)
    }

    /// Read a selected region into a new private array. The result's leading
    /// dims are the narrowed/reduced selection dims; structure is identical.
    pub fn read(&self, idx: &IndexExpr) -> Result<StructArray> {
        let region = compute_region(&self.leading, idx)?;
        let mut out = StructArray {
            spec: self.spec.clone(),
            leading: region.out_dims.clone(),
            backing: Backing::Private,
            leaves: Vec::with_capacity(self.leaves.len()),
        };
        let cells = region.cells();
        for leaf in &self.leaves {
            let mut dst = LeafArray::zeros(leaf.kind, leaf.trailing.clone(), cells, Backing::Private)?;
            let src_ptr = leaf.raw_read();
            let dst_ptr = dst.raw_write();
            let elem = leaf.elem;
            let mut cursor = 0usize;
            region.for_each_run(|start, len| unsafe {
                dst_ptr.copy_from(cursor * elem, src_ptr, start * elem, len * elem);
                cursor += len;
            });
            out.leaves.push(dst);
        }
        Ok(out)
    }

    /// Write into a selected region from an array, a broadcast scalar, or a
    /// placeholder-carrying partial array.
    pub fn write(&mut self, idx: &IndexExpr, src: WriteSrc<'_>) -> Result<()> {
        let region = compute_region(&self.leading, idx)?;
        match src {
            WriteSrc::Scalar(v) => {
                for leaf in &mut self.leaves {
                    let ptr = leaf.raw_write();
                    let elem = leaf.elem;
                    region.for_each_run(|start, len| unsafe {
                        ptr.fill(start * elem, len * elem, v);
                    });
                }
                Ok(())
            }
            WriteSrc::Array(a) => self.write_array(&region, a, None),
            WriteSrc::Partial(a, present) => {
                if present.len() != self.leaves.len() {
                    return Err(Error::StructureMismatch(format!(
                        "placeholder mask has {} entries for {} leaves",
                        present.len(),
                        self.leaves.len()
                    )));
                }
                self.write_array(&region, a, Some(present))
            }
        }
    }

    fn write_array(&mut self, region: &Region, src: &StructArray, present: Option<&[bool]>) -> Result<()> {
        if src.spec != self.spec {
            return Err(Error::StructureMismatch(
                "source structure does not match destination".into(),
            ));
        }
        if src.leading != region.out_dims {
            return Err(Error::ShapeMismatch(format!(
                "source leading {:?} does not match selected region {:?}",
                src.leading, region.out_dims
            )));
        }
        for (i, leaf) in self.leaves.iter_mut().enumerate() {
            if let Some(mask) = present {
                if !mask[i] {
                    continue;
                }
            }
            let src_ptr = src.leaves[i].raw_read();
            let dst_ptr = leaf.raw_write();
            let elem = leaf.elem;
            let mut cursor = 0usize;
            region.for_each_run(|start, len| unsafe {
                dst_ptr.copy_from(start * elem, src_ptr, cursor * elem, len * elem);
                cursor += len;
            });
        }
        Ok(())
    }

    /// Copy a region of `src` into a region of `dest`. The selected regions
    /// must agree leaf-wise in shape. Always goes through a private
    /// temporary, so overlapping or aliased regions behave as a simultaneous
    /// copy.
    pub fn copy_region(
        dest: &mut StructArray,
        dest_idx: &IndexExpr,
        src: &StructArray,
        src_idx: &IndexExpr,
    ) -> Result<()> {
        let tmp = src.read(src_idx)?;
        dest.write(dest_idx, WriteSrc::Array(&tmp))
    }

    /// Region copy within one array (overlap-safe).
    pub fn copy_within(&mut self, dest_idx: &IndexExpr, src_idx: &IndexExpr) -> Result<()> {
        let tmp = self.read(src_idx)?;
        self.write(dest_idx, WriteSrc::Array(&tmp))
    }

    /// Zero-copy view of contiguous rows along the first leading dim.
    pub fn rows_view(&self, start: usize, len: usize) -> Result<RowsView<'_>> {
        if self.leading.is_empty() || start + len > self.leading[0] || len == 0 {
            return Err(Error::IndexOutOfRange {
                index: start + len,
                extent: self.leading.first().copied().unwrap_or(0),
            });
        }
        Ok(RowsView { arr: self, start, len })
    }

    /// Deep copy into private backing.
    pub fn to_private(&self) -> StructArray {
        let mut out = StructArray::allocate(&self.spec, &self.leading, Backing::Private)
            .expect("source array dims are valid");
        let total = self.cells();
        for (i, leaf) in self.leaves.iter().enumerate() {
            let src = leaf.raw_read();
            let dst = out.leaves[i].raw_write();
            unsafe { dst.copy_from(0, src, 0, total * leaf.elem) };
        }
        out
    }

    pub fn fill_zero(&mut self) {
        for leaf in &mut self.leaves {
            let n = leaf.scalars;
            let ptr = leaf.raw_write();
            unsafe { ptr.fill(0, n, 0.0) };
        }
    }

    /// FNV-1a checksum over leading dims and leaf bytes in spec order.
    pub fn checksum(&self) -> u64 {
        let mut bytes = Vec::new();
        for &d in &self.leading {
            bytes.extend((d as u64).to_le_bytes());
        }
        for leaf in &self.leaves {
            let ptr = leaf.raw_read();
            unsafe { ptr.dump_bytes(0, leaf.scalars, &mut bytes) };
        }
        fnv1a(&bytes)
    }

    /// Raw little-endian bytes of one leaf in row-major order.
    pub fn leaf_bytes(&self, i: usize) -> Vec<u8> {
        let leaf = &self.leaves[i];
        let mut out = Vec::with_capacity(leaf.scalars * leaf.kind.byte_width());
        unsafe { leaf.raw_read().dump_bytes(0, leaf.scalars, &mut out) };
        out
    }

    /// Value at a flat scalar offset, widened to f64.
    pub fn scalar_f64(&self, leaf: usize, offset: usize) -> f64 {
        let l = &self.leaves[leaf];
        assert!(offset < l.scalars, "scalar offset out of range");
        unsafe { l.raw_read().read_f64(offset) }
    }
}

/// FNV-1a hash, used for batch checksums and seed derivation.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl Clone for StructArray {
    fn clone(&self) -> Self {
        match self.backing {
            Backing::Private => self.to_private(),
            Backing::Shared => StructArray {
                spec: self.spec.clone(),
                leading: self.leading.clone(),
                backing: Backing::Shared,
                leaves: self
                    .leaves
                    .iter()
                    .map(|l| LeafArray {
                        kind: l.kind,
                        trailing: l.trailing.clone(),
                        elem: l.elem,
                        scalars: l.scalars,
                        store: match &l.store {
                            Store::Shared(arc) => Store::Shared(arc.clone()),
                            Store::Private(_) => unreachable!("shared array with private leaf"),
                        },
                    })
                    .collect(),
            },
        }
    }
}

impl PartialEq for StructArray {
    fn eq(&self, other: &Self) -> bool {
        if self.spec != other.spec || self.leading != other.leading {
            return false;
        }
        self.leaves.iter().zip(&other.leaves).all(|(a, b)| {
            a.scalars == b.scalars
                && unsafe { a.raw_read().eq_run(0, b.raw_read(), 0, a.scalars) }
        })
    }
}

impl std::fmt::Debug for StructArray {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "StructArray(leading={:?}, backing={:?}, leaves={})",
            self.leading,
            self.backing,
            self.leaves.len()
        )
    }
}

/// Zero-copy read view of contiguous rows along the first leading dim.
pub struct RowsView<'a> {
    arr: &'a StructArray,
    start: usize,
    len: usize,
}

impl<'a> RowsView<'a> {
    pub fn len_rows(&self) -> usize {
        self.len
    }

    /// Leading dims of the viewed region.
    pub fn leading(&self) -> Vec<usize> {
        let mut dims = self.arr.leading.to_vec();
        dims[0] = self.len;
        dims
    }

    /// Scalar at `(row-local cell, within-cell offset)` widened to f64.
    pub fn scalar_f64(&self, leaf: usize, cell: usize, within: usize) -> f64 {
        let l = &self.arr.leaves[leaf];
        let row_cells: usize = self.arr.leading[1..].iter().product::<usize>().max(1);
        let abs = (self.start * row_cells + cell) * l.elem + within;
        assert!(abs < l.scalars);
        unsafe { l.raw_read().read_f64(abs) }
    }

    /// Materialize the view as a private copy.
    pub fn to_array(&self) -> StructArray {
        self.arr
            .read(&IndexExpr::rows(self.start, self.start + self.len))
            .expect("view bounds were validated")
    }
}

// ---------------------------------------------------------------------------
// Typed hot-path access

macro_rules! typed_access {
    ($get:ident, $set:ident, $cell_get:ident, $cell_set:ident, $ty:ty, $variant:ident) => {
        impl StructArray {
            /// Scalar read at a flat cell index (leaf must be scalar-trailing).
            #[inline]
            pub fn $get(&self, leaf: usize, cell: usize) -> $ty {
                let l = &self.leaves[leaf];
                debug_assert_eq!(l.elem, 1, "leaf has non-scalar trailing shape");
                assert!(cell < l.scalars);
                match l.raw_read() {
                    RawPtr::$variant(p) => unsafe { p.add(cell).read() },
                    _ => panic!("leaf kind mismatch"),
                }
            }

            /// Scalar write at a flat cell index (leaf must be scalar-trailing).
            #[inline]
            pub fn $set(&mut self, leaf: usize, cell: usize, v: $ty) {
                let l = &mut self.leaves[leaf];
                debug_assert_eq!(l.elem, 1, "leaf has non-scalar trailing shape");
                assert!(cell < l.scalars);
                match l.raw_write() {
                    RawPtr::$variant(p) => unsafe { p.add(cell).write(v) },
                    _ => panic!("leaf kind mismatch"),
                }
            }

            /// Copy one leading cell's trailing values out.
            #[inline]
            pub fn $cell_get(&self, leaf: usize, cell: usize, out: &mut [$ty]) {
                let l = &self.leaves[leaf];
                assert_eq!(out.len(), l.elem);
                let off = cell * l.elem;
                assert!(off + l.elem <= l.scalars);
                match l.raw_read() {
                    RawPtr::$variant(p) => unsafe {
                        std::ptr::copy_nonoverlapping(p.add(off), out.as_mut_ptr(), l.elem)
                    },
                    _ => panic!("leaf kind mismatch"),
                }
            }

            /// Overwrite one leading cell's trailing values.
            #[inline]
            pub fn $cell_set(&mut self, leaf: usize, cell: usize, vals: &[$ty]) {
                let l = &mut self.leaves[leaf];
                assert_eq!(vals.len(), l.elem);
                let off = cell * l.elem;
                assert!(off + l.elem <= l.scalars);
                match l.raw_write() {
                    RawPtr::$variant(p) => unsafe {
                        std::ptr::copy_nonoverlapping(vals.as_ptr(), p.add(off), l.elem)
                    },
                    _ => panic!("leaf kind mismatch"),
                }
            }
        }
    };
}

typed_access!(get_f32, set_f32, cell_f32, set_cell_f32, f32, F32);
typed_access!(get_f64, set_f64, cell_f64, set_cell_f64, f64, F64);
typed_access!(get_i64, set_i64, cell_i64, set_cell_i64, i64, I64);
typed_access!(get_bool, set_bool, cell_bool, set_cell_bool, bool, Bool);
typed_access!(get_u8, set_u8, cell_u8, set_cell_u8, u8, U8);

//! Raw video clips as 4-D tensors with an explicit memory layout.
//!
//! A [`FrameTensor`] always has logical axes `(T, C, H, W)`. Its payload is
//! stored either frame-major ([`Layout::Tchw`]) or channel-major
//! ([`Layout::Cthw`]). The width axis is innermost in both layouts, so every
//! operation here works on whole rows of `W` elements.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::transform::TransformId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    U8,
    F32,
}

/// Order of the time and channel axes in memory (outermost first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Tchw,
    Cthw,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Tchw => "TCHW",
            Layout::Cthw => "CTHW",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub const fn new(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        Dims {
            frames,
            channels,
            height,
            width,
        }
    }

    /// Element count, or `None` if it overflows `usize`.
    pub fn element_count(&self) -> Option<usize> {
        self.frames
            .checked_mul(self.channels)?
            .checked_mul(self.height)?
            .checked_mul(self.width)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.frames, self.channels, self.height, self.width
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("tensor dimensions must be positive, got {0}")]
    ZeroDimension(Dims),
    #[error("tensor dimensions {0} overflow the addressable element count")]
    Overflow(Dims),
    #[error("payload holds {actual} elements but dimensions {dims} require {expected}")]
    PayloadLength {
        dims: Dims,
        expected: usize,
        actual: usize,
    },
}

/// Element buffer in declared layout order.
///
/// Equality is bitwise, so `f32` payloads containing NaNs still compare equal
/// to an exact copy of themselves.
#[derive(Debug, Clone)]
pub enum Payload {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::U8(v) => v.len(),
            Payload::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            Payload::U8(_) => DType::U8,
            Payload::F32(_) => DType::F32,
        }
    }

    pub fn get(&self, index: usize) -> Element {
        match self {
            Payload::U8(v) => Element::U8(v[index]),
            Payload::F32(v) => Element::F32(v[index]),
        }
    }
}

impl PartialEq for Payload {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Payload::U8(a), Payload::U8(b)) => a == b,
            (Payload::F32(a), Payload::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

impl Eq for Payload {}

/// A single tensor element; compares bitwise.
#[derive(Debug, Clone, Copy)]
pub enum Element {
    U8(u8),
    F32(f32),
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Element::U8(a), Element::U8(b)) => a == b,
            (Element::F32(a), Element::F32(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Element {}

/// A video clip with dims `(T, C, H, W)` and a layout-tagged payload.
///
/// Construction validates that the payload length matches the dims, so every
/// value of this type is well formed and the transforms below are infallible.
/// All operations return new tensors and leave `self` untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTensor {
    dims: Dims,
    layout: Layout,
    payload: Payload,
}

impl FrameTensor {
    pub fn new(dims: Dims, layout: Layout, payload: Payload) -> Result<Self, TensorError> {
        if dims.frames == 0 || dims.channels == 0 || dims.height == 0 || dims.width == 0 {
            return Err(TensorError::ZeroDimension(dims));
        }
        let expected = dims.element_count().ok_or(TensorError::Overflow(dims))?;
        if payload.len() != expected {
            return Err(TensorError::PayloadLength {
                dims,
                expected,
                actual: payload.len(),
            });
        }
        Ok(FrameTensor {
            dims,
            layout,
            payload,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dtype(&self) -> DType {
        self.payload.dtype()
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn into_payload(self) -> Payload {
        self.payload
    }

    /// Payload offset of logical element `(t, c, h, w)`.
    pub fn offset(&self, t: usize, c: usize, h: usize, w: usize) -> usize {
        row_offset(self.dims, self.layout, t, c, h) + w
    }

    /// Logical element `(t, c, h, w)`, independent of layout.
    ///
    /// Panics if an index is out of range.
    pub fn get(&self, t: usize, c: usize, h: usize, w: usize) -> Element {
        let d = self.dims;
        assert!(
            t < d.frames && c < d.channels && h < d.height && w < d.width,
            "index out of range"
        );
        self.payload.get(self.offset(t, c, h, w))
    }

    /// Elements of logical frame `t` in `(c, h, w)` order.
    pub fn frame(&self, t: usize) -> Vec<Element> {
        let d = self.dims;
        let mut out = Vec::with_capacity(d.channels * d.height * d.width);
        for c in 0..d.channels {
            for h in 0..d.height {
                for w in 0..d.width {
                    out.push(self.get(t, c, h, w));
                }
            }
        }
        out
    }

    /// Frame `t` of the output is frame `T - 1 - t` of the input.
    pub fn time_reverse(&self) -> FrameTensor {
        self.remap(self.layout, true, false)
    }

    /// Column `w` of the output is column `W - 1 - w` of the input.
    pub fn horizontal_flip(&self) -> FrameTensor {
        self.remap(self.layout, false, true)
    }

    /// Applies `transform`; [`TransformId::HfTr`] flips first, then reverses.
    pub fn apply(&self, transform: TransformId) -> FrameTensor {
        match transform {
            TransformId::Hf => self.horizontal_flip(),
            TransformId::Tr => self.time_reverse(),
            // Both axes are remapped in one pass; flip-then-reverse and
            // reverse-then-flip address the same source element.
            TransformId::HfTr => self.remap(self.layout, true, true),
        }
    }

    /// Physically reorders the payload into `target`, keeping logical content.
    pub fn to_layout(&self, target: Layout) -> FrameTensor {
        if target == self.layout {
            return self.clone();
        }
        self.remap(target, false, false)
    }

    /// Relabels the payload as `assumed` without moving any bytes.
    ///
    /// This reproduces reading channel-major data as if it were frame-major
    /// (or the reverse): each "frame" of the result interleaves channels from
    /// several real frames.
    pub fn misinterpret_as(&self, assumed: Layout) -> FrameTensor {
        FrameTensor {
            dims: self.dims,
            layout: assumed,
            payload: self.payload.clone(),
        }
    }

    fn remap(&self, target: Layout, reverse_time: bool, flip: bool) -> FrameTensor {
        let payload = match &self.payload {
            Payload::U8(src) => Payload::U8(remap_rows(
                src,
                self.dims,
                self.layout,
                target,
                reverse_time,
                flip,
            )),
            Payload::F32(src) => Payload::F32(remap_rows(
                src,
                self.dims,
                self.layout,
                target,
                reverse_time,
                flip,
            )),
        };
        FrameTensor {
            dims: self.dims,
            layout: target,
            payload,
        }
    }
}

fn row_offset(d: Dims, layout: Layout, t: usize, c: usize, h: usize) -> usize {
    let outer = match layout {
        Layout::Tchw => t * d.channels + c,
        Layout::Cthw => c * d.frames + t,
    };
    (outer * d.height + h) * d.width
}

/// Writes rows in `dst_layout` order, reading each from the source row it maps
/// to under the requested time reversal and width flip.
fn remap_rows<T: Copy>(
    src: &[T],
    d: Dims,
    src_layout: Layout,
    dst_layout: Layout,
    reverse_time: bool,
    flip: bool,
) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    let (outer, inner) = match dst_layout {
        Layout::Tchw => (d.frames, d.channels),
        Layout::Cthw => (d.channels, d.frames),
    };
    for a in 0..outer {
        for b in 0..inner {
            let (t, c) = match dst_layout {
                Layout::Tchw => (a, b),
                Layout::Cthw => (b, a),
            };
            let src_t = if reverse_time { d.frames - 1 - t } else { t };
            for h in 0..d.height {
                let start = row_offset(d, src_layout, src_t, c, h);
                let row = &src[start..start + d.width];
                if flip {
                    out.extend(row.iter().rev().copied());
                } else {
                    out.extend_from_slice(row);
                }
            }
        }
    }
    out
}

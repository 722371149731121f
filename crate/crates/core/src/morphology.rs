//! Binary erosion, dilation and opening with square all-ones kernels.
//!
//! Pixels outside the image count as background for both operators, so
//! erosion eats into the border. A square kernel is separable: each
//! operator is a horizontal pass followed by a vertical pass, and each pass
//! keeps a running count of set pixels in the window.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kernel {
    size: usize,
}

impl Kernel {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "kernel size must be odd and positive, got {size}"
            )));
        }
        Ok(Kernel { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel { size: 5 }
    }
}

#[derive(Clone, Copy)]
enum Op {
    Erode,
    Dilate,
}

/// One 1-D window pass over `len` cells read via `get`, written to `out`.
fn pass_line(len: usize, r: usize, op: Op, get: impl Fn(usize) -> bool, out: &mut [bool]) {
    let full = 2 * r + 1;
    let mut count = 0usize;
    // Window for position i covers [i - r, i + r]; seed with [0, r).
    for j in 0..r.min(len) {
        count += usize::from(get(j));
    }
    for (i, o) in out.iter_mut().enumerate().take(len) {
        let enter = i + r;
        if enter < len {
            count += usize::from(get(enter));
        }
        *o = match op {
            // Cells beyond the edge are background, so the window must lie
            // fully inside and be fully set.
            Op::Erode => count == full,
            Op::Dilate => count > 0,
        };
        if i >= r {
            count -= usize::from(get(i - r));
        }
    }
}

fn apply(mask: &BinaryMask, kernel: Kernel, op: Op) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let r = kernel.radius();
    let src = mask.bits();

    let mut horizontal = vec![false; w * h];
    horizontal
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            let line = &src[y * w..(y + 1) * w];
            pass_line(w, r, op, |x| line[x], row);
        });

    let mut transposed = vec![false; w * h];
    transposed
        .par_chunks_mut(h)
        .enumerate()
        .for_each(|(x, col)| pass_line(h, r, op, |y| horizontal[y * w + x], col));

    let mut bits = vec![false; w * h];
    bits.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, b) in row.iter_mut().enumerate() {
            *b = transposed[x * h + y];
        }
    });
    BinaryMask::from_bits(w, h, bits).expect("same shape")
}

pub fn erode(mask: &BinaryMask, kernel: Kernel) -> BinaryMask {
    apply(mask, kernel, Op::Erode)
}

pub fn dilate(mask: &BinaryMask, kernel: Kernel) -> BinaryMask {
    apply(mask, kernel, Op::Dilate)
}

/// Erosion followed by dilation; removes features smaller than the kernel.
pub fn open(mask: &BinaryMask, kernel: Kernel) -> BinaryMask {
    dilate(&erode(mask, kernel), kernel)
}

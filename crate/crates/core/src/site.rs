//! Pixel coordinates and kernel offsets.

use serde::{Deserialize, Serialize};

/// A pixel location. Ordering is row-major: `(y, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub y: i32,
    pub x: i32,
}

impl Site {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { y, x }
    }

    pub fn offset(self, k: Offset) -> Site {
        Site::new(self.x + k.dx, self.y + k.dy)
    }

    pub fn in_bounds(self, width: usize, height: usize) -> bool {
        self.x >= 0 && self.y >= 0 && (self.x as usize) < width && (self.y as usize) < height
    }

    /// Chebyshev (l-infinity) distance.
    pub fn linf(self, other: Site) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    /// Site of the pooling window containing `self`.
    pub fn pooled(self, k: usize) -> Site {
        let k = k as i32;
        Site::new(self.x.div_euclid(k), self.y.div_euclid(k))
    }

    /// Row-major linear index into a `width`-wide grid.
    pub fn linear(self, width: usize) -> usize {
        self.y as usize * width + self.x as usize
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A kernel offset `k = i - j` between an input site `i` and an output site `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Offset {
    pub dy: i32,
    pub dx: i32,
}

impl Offset {
    pub const fn new(dx: i32, dy: i32) -> Self {
        Self { dy, dx }
    }

    pub fn neg(self) -> Offset {
        Offset::new(-self.dx, -self.dy)
    }
}

/// The centered `k x k` offset grid, enumerated row-major. `k` must be odd.
///
/// The position of an offset in this list is also its kernel tap index, so
/// `offsets(k)[t]` multiplies weight slice `t` of a `(k_y, k_x, c_in, c_out)` tensor.
pub fn offsets(k: usize) -> Vec<Offset> {
    debug_assert!(k % 2 == 1, "kernel size must be odd");
    let r = (k / 2) as i32;
    let mut out = Vec::with_capacity(k * k);
    for dy in -r..=r {
        for dx in -r..=r {
            out.push(Offset::new(dx, dy));
        }
    }
    out
}

/// Kernel tap index of an offset inside the centered `k x k` grid.
pub fn tap_index(k: usize, off: Offset) -> usize {
    let r = (k / 2) as i32;
    ((off.dy + r) as usize) * k + (off.dx + r) as usize
}

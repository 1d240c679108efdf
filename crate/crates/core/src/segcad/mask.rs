//! Binary masks and their run-length encoding.

use serde::{Deserialize, Serialize};

use super::SegError;

/// Row-major binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[(y * self.width + x) as usize] = value;
    }

    /// Bits in row-major order.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Tight `(x, y, w, h)` box around the set pixels, all zero when empty.
    pub fn bounding_box(&self) -> [u32; 4] {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y) = (i as u32 % self.width, i as u32 / self.width);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        if x0 == u32::MAX {
            [0, 0, 0, 0]
        } else {
            [x0, y0, x1 - x0 + 1, y1 - y0 + 1]
        }
    }
}

/// Run-length encoded mask: row-major scan, alternating run lengths that
/// start with a (possibly empty) run of zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    /// `[height, width]`.
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn encode(mask: &Bitmap) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for &b in mask.bits() {
            if b != current {
                counts.push(run);
                current = b;
                run = 0;
            }
            run += 1;
        }
        counts.push(run);
        Self {
            size: [mask.height(), mask.width()],
            counts,
        }
    }

    pub fn decode(&self) -> Result<Bitmap, SegError> {
        let [h, w] = self.size;
        let total = w as u64 * h as u64;
        let sum: u64 = self.counts.iter().sum();
        if sum != total {
            return Err(SegError::InvalidMask(format!(
                "run lengths sum to {sum}, expected {total} for {w}x{h}"
            )));
        }
        let mut bits = Vec::with_capacity(total as usize);
        for (i, &run) in self.counts.iter().enumerate() {
            bits.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
        }
        Ok(Bitmap {
            width: w,
            height: h,
            bits,
        })
    }
}

/// A provider detection: a mask, its box and its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMask {
    pub mask: Bitmap,
    /// `(x, y, w, h)` in pixels.
    pub bbox: [u32; 4],
    pub score: f64,
}

impl ScoredMask {
    /// Wraps `mask` with its tight bounding box.
    pub fn new(mask: Bitmap, score: f64) -> Self {
        let bbox = mask.bounding_box();
        Self { mask, bbox, score }
    }

    /// Checks that the score is a probability and the mask stays inside its box.
    pub fn validate(&self) -> Result<(), SegError> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(SegError::InvalidMask(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        let [bx, by, bw, bh] = self.bbox;
        let m = &self.mask;
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(x, y) && !(x >= bx && x < bx + bw && y >= by && y < by + bh) {
                    return Err(SegError::InvalidMask(format!(
                        "mask pixel ({x}, {y}) lies outside bbox {:?}",
                        self.bbox
                    )));
                }
            }
        }
        Ok(())
    }
}

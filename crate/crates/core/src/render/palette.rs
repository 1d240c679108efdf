//! Deterministic face colors.
//!
//! Colors live on a 31×31×31 lattice with channel values 8, 16, …, 248, so any
//! two palette colors differ by at least 8 in some channel and no color is
//! within 8 of the black background. Face ids are scattered over the lattice
//! with a multiplicative hash that is a bijection modulo the lattice size,
//! which makes the mapping invertible for ids below [`PALETTE_SIZE`].

use crate::geometry::FaceId;

const LEVELS: u32 = 31;
const STEP: u32 = 8;
pub const PALETTE_SIZE: u32 = LEVELS * LEVELS * LEVELS;
/// Coprime with `PALETTE_SIZE` (= 31³).
const MULTIPLIER: u64 = 7919;

pub const BACKGROUND: [u8; 3] = [0, 0, 0];

fn inverse_multiplier() -> u64 {
    // extended Euclid over i64; PALETTE_SIZE is small
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (PALETTE_SIZE as i64, MULTIPLIER as i64);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1);
    t.rem_euclid(PALETTE_SIZE as i64) as u64
}

pub fn face_color(face: FaceId) -> [u8; 3] {
    let slot = (face as u64 % PALETTE_SIZE as u64 * MULTIPLIER % PALETTE_SIZE as u64) as u32;
    let level = |k: u32| (STEP * (k + 1)) as u8;
    [
        level(slot / (LEVELS * LEVELS)),
        level(slot / LEVELS % LEVELS),
        level(slot % LEVELS),
    ]
}

/// Inverse of [`face_color`] for ids below [`PALETTE_SIZE`]; `None` for the
/// background and for colors off the lattice.
pub fn face_for_color(color: [u8; 3]) -> Option<FaceId> {
    let mut slot = 0u32;
    for c in color {
        let c = c as u32;
        if c == 0 || !c.is_multiple_of(STEP) || c / STEP > LEVELS {
            return None;
        }
        slot = slot * LEVELS + (c / STEP - 1);
    }
    Some((slot as u64 * inverse_multiplier() % PALETTE_SIZE as u64) as FaceId)
}

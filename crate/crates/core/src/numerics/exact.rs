//! Order-independent accumulation of floating-point products.
//!
//! Each product `a * b` is computed exactly (53x53-bit mantissa product),
//! rounded once onto a fixed-point grid with 128 fractional bits, and added to
//! a 256-bit two's complement integer. Integer addition is associative and
//! subtracting a product cancels its earlier addition exactly, so a sum that
//! was built up, partially removed and re-added has the same bits as one
//! assembled from scratch over the final multiset of rows. Rounding back to
//! `f64` happens once, when the statistic is read.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_BITS: i32 = 128;
/// Largest accepted product magnitude is `2^MAX_PRODUCT_EXP`; with fewer than
/// 2^31 terms per sum the 256-bit integer cannot overflow.
const MAX_PRODUCT_EXP: i32 = 94;

/// A signed 256-bit fixed-point accumulator (little-endian limbs).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExactSum([u64; 4]);

#[derive(Debug, Clone, Copy)]
struct Decomposed {
    negative: bool,
    mantissa: u64,
    exp: i32,
}

#[inline]
fn decompose(x: f64) -> Result<Decomposed> {
    if !x.is_finite() {
        return Err(Error::AccumulatorRange(x));
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    Ok(Decomposed {
        negative,
        mantissa,
        exp,
    })
}

/// A factor prepared once and reused against many partners.
#[derive(Debug, Clone, Copy)]
pub struct Factor(Decomposed);

impl Factor {
    pub fn new(x: f64) -> Result<Self> {
        decompose(x).map(Factor)
    }
}

impl ExactSum {
    pub const ZERO: ExactSum = ExactSum([0; 4]);

    pub fn limbs(&self) -> [u64; 4] {
        self.0
    }

    pub fn from_limbs(limbs: [u64; 4]) -> Self {
        ExactSum(limbs)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) -> Result<()> {
        self.accumulate(Factor::new(a)?, Factor::new(b)?, false)
    }

    #[inline]
    pub fn sub_product(&mut self, a: f64, b: f64) -> Result<()> {
        self.accumulate(Factor::new(a)?, Factor::new(b)?, true)
    }

    /// Adds (or with `subtract`, removes) the exact product `a * b`.
    #[inline]
    pub fn accumulate(&mut self, a: Factor, b: Factor, subtract: bool) -> Result<()> {
        let (a, b) = (a.0, b.0);
        if a.mantissa == 0 || b.mantissa == 0 {
            return Ok(());
        }
        let mut mag = a.mantissa as u128 * b.mantissa as u128;
        let exp = a.exp + b.exp;
        let top = 128 - mag.leading_zeros() as i32 + exp;
        if top > MAX_PRODUCT_EXP {
            let approx = (a.mantissa as f64) * (b.mantissa as f64) * 2f64.powi(exp);
            return Err(Error::AccumulatorRange(approx));
        }
        let mut pos = exp + FRAC_BITS;
        if pos < 0 {
            let s = -pos;
            if s >= 128 {
                return Ok(());
            }
            // round half away from zero on the magnitude, so q(-p) = -q(p)
            let half = (mag >> (s - 1)) & 1;
            mag = (mag >> s) + half;
            if mag == 0 {
                return Ok(());
            }
            pos = 0;
        }
        let negative = a.negative != b.negative;
        self.add_shifted(mag, pos as u32, negative != subtract);
        Ok(())
    }

    #[inline]
    fn add_shifted(&mut self, mag: u128, pos: u32, negative: bool) {
        let limb = (pos / 64) as usize;
        let off = pos % 64;
        let lo = mag as u64;
        let hi = (mag >> 64) as u64;
        let parts = if off == 0 {
            [lo, hi, 0]
        } else {
            [lo << off, (hi << off) | (lo >> (64 - off)), hi >> (64 - off)]
        };
        let mut term = [0u64; 4];
        for (k, &p) in parts.iter().enumerate() {
            if limb + k < 4 {
                term[limb + k] = p;
            } else {
                debug_assert_eq!(p, 0, "exact accumulator term exceeds 256 bits");
            }
        }
        if negative {
            self.sub_limbs(&term);
        } else {
            self.add_limbs(&term);
        }
    }

    #[inline]
    fn add_limbs(&mut self, t: &[u64; 4]) {
        let mut carry = 0u64;
        for (d, &s) in self.0.iter_mut().zip(t) {
            let (r1, c1) = d.overflowing_add(s);
            let (r2, c2) = r1.overflowing_add(carry);
            *d = r2;
            carry = (c1 as u64) + (c2 as u64);
        }
    }

    #[inline]
    fn sub_limbs(&mut self, t: &[u64; 4]) {
        let mut borrow = 0u64;
        for (d, &s) in self.0.iter_mut().zip(t) {
            let (r1, b1) = d.overflowing_sub(s);
            let (r2, b2) = r1.overflowing_sub(borrow);
            *d = r2;
            borrow = (b1 as u64) + (b2 as u64);
        }
    }

    pub fn add_assign(&mut self, other: &ExactSum) {
        self.add_limbs(&other.0);
    }

    /// Correctly rounded (nearest, ties to even) conversion to `f64`.
    pub fn to_f64(&self) -> f64 {
        let negative = self.0[3] >> 63 == 1;
        let mut mag = self.0;
        if negative {
            // two's complement negation
            for l in mag.iter_mut() {
                *l = !*l;
            }
            let mut carry = 1u64;
            for l in mag.iter_mut() {
                let (r, c) = l.overflowing_add(carry);
                *l = r;
                carry = c as u64;
            }
        }
        let Some(top_limb) = (0..4).rev().find(|&i| mag[i] != 0) else {
            return 0.0;
        };
        let top_bit = top_limb as i32 * 64 + 63 - mag[top_limb].leading_zeros() as i32;
        let value = if top_bit < 64 {
            mag[0] as f64 * pow2(-FRAC_BITS)
        } else {
            let shift = (top_bit - 63) as u32;
            let window = extract_u64(&mag, shift);
            let sticky = low_bits_nonzero(&mag, shift);
            // 64 bits of window plus a sticky bit round correctly to 53 bits
            let w = window | sticky as u64;
            w as f64 * pow2(shift as i32 - FRAC_BITS)
        };
        if negative {
            -value
        } else {
            value
        }
    }
}

fn extract_u64(mag: &[u64; 4], shift: u32) -> u64 {
    let limb = (shift / 64) as usize;
    let off = shift % 64;
    let lo = mag[limb];
    let hi = if limb + 1 < 4 { mag[limb + 1] } else { 0 };
    if off == 0 {
        lo
    } else {
        (lo >> off) | (hi << (64 - off))
    }
}

fn low_bits_nonzero(mag: &[u64; 4], shift: u32) -> bool {
    let limb = (shift / 64) as usize;
    let off = shift % 64;
    if mag[..limb].iter().any(|&l| l != 0) {
        return true;
    }
    off > 0 && mag[limb] & ((1u64 << off) - 1) != 0
}

/// Exact power of two in the normal range.
fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_products_round_trip() {
        for &(a, b) in &[(1.5, 2.0), (-3.25, 0.5), (1e-10, 3.0), (0.1, 0.1), (7.0, -1e12)] {
            let mut s = ExactSum::ZERO;
            s.add_product(a, b).unwrap();
            assert_eq!(s.to_f64(), a * b, "{a} * {b}");
        }
    }

    #[test]
    fn add_then_remove_is_zero() {
        let mut s = ExactSum::ZERO;
        s.add_product(0.1, 0.3).unwrap();
        s.add_product(-2.7, 1e-20).unwrap();
        s.sub_product(0.1, 0.3).unwrap();
        s.sub_product(-2.7, 1e-20).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn sum_is_correctly_rounded() {
        // 1 + 2^-60 + 2^-60 rounds to 1 in naive f64 but the exact sum is 1 + 2^-59
        let mut s = ExactSum::ZERO;
        s.add_product(1.0, 1.0).unwrap();
        s.add_product(pow2(-60), 1.0).unwrap();
        s.add_product(pow2(-60), 1.0).unwrap();
        assert_eq!(s.to_f64(), 1.0);
        for _ in 0..126 {
            s.add_product(pow2(-60), 1.0).unwrap();
        }
        // 1 + 128 * 2^-60 = 1 + 2^-53 sits exactly halfway; ties to even gives 1
        assert_eq!(s.to_f64(), 1.0);
        s.add_product(pow2(-100), 1.0).unwrap();
        assert_eq!(s.to_f64(), 1.0 + pow2(-52));
    }

    #[test]
    fn rejects_huge_and_nan() {
        let mut s = ExactSum::ZERO;
        assert!(s.add_product(1e20, 1e20).is_err());
        assert!(s.add_product(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn negative_totals() {
        let mut s = ExactSum::ZERO;
        s.add_product(-1.0, 3.0).unwrap();
        s.add_product(1.0, 0.5).unwrap();
        assert_eq!(s.to_f64(), -2.5);
    }

    proptest! {
        #[test]
        fn order_independent(xs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40), seed in 0u64..1000) {
            let mut fwd = ExactSum::ZERO;
            for &(a, b) in &xs {
                fwd.add_product(a, b).unwrap();
            }
            let mut perm: Vec<usize> = (0..xs.len()).collect();
            let n = perm.len();
            for i in 0..n {
                let j = (seed as usize * 31 + i * 17) % n;
                perm.swap(i, j);
            }
            let mut rev = ExactSum::ZERO;
            for &i in &perm {
                rev.add_product(xs[i].0, xs[i].1).unwrap();
            }
            prop_assert_eq!(fwd, rev);
            let naive: f64 = xs.iter().map(|(a, b)| a * b).sum();
            let scale: f64 = xs.iter().map(|(a, b)| (a * b).abs()).sum::<f64>().max(1.0);
            prop_assert!((fwd.to_f64() - naive).abs() <= 1e-13 * scale);
        }
    }
}

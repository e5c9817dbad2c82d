//! Exact summation of `f64` values.
//!
//! Every finite double is a dyadic rational `m * 2^e`, so a sum of doubles is
//! a dyadic rational too. [`ExactSum`] keeps one `i128` bucket per binary
//! exponent and only combines them into a big integer on demand.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

const EXP_OFFSET: i32 = 1075;
const BUCKETS: usize = 2200;

#[derive(Clone)]
pub struct ExactSum {
    buckets: Vec<i128>,
    counts: Vec<u32>,
    lo: usize,
    hi: usize,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self {
            buckets: vec![0; BUCKETS],
            counts: vec![0; BUCKETS],
            lo: BUCKETS,
            hi: 0,
        }
    }

    pub fn add(&mut self, x: f64) {
        assert!(x.is_finite(), "ExactSum only accepts finite values");
        if x == 0.0 {
            return;
        }
        let (mantissa, exp, sign) = decode(x);
        let slot = (exp + EXP_OFFSET) as usize;
        // each bucket absorbs 2^53-sized terms; flush long before i128 overflow
        if self.counts[slot] == u32::MAX >> 2 {
            self.normalize_slot(slot);
        }
        self.buckets[slot] += sign as i128 * mantissa as i128;
        self.counts[slot] += 1;
        self.lo = self.lo.min(slot);
        self.hi = self.hi.max(slot);
    }

    fn normalize_slot(&mut self, slot: usize) {
        // carry the high part into the next exponent bucket
        let v = self.buckets[slot];
        let carry = v >> 60;
        self.buckets[slot] = v - (carry << 60);
        self.buckets[slot + 60] += carry;
        self.counts[slot] = 1;
        self.counts[slot + 60] += 1;
        self.hi = self.hi.max(slot + 60);
    }

    /// The exact sum as a rational number.
    pub fn to_rational(&self) -> BigRational {
        if self.lo > self.hi {
            return BigRational::zero();
        }
        let mut acc = BigInt::zero();
        for slot in (self.lo..=self.hi).rev() {
            acc <<= 1;
            acc += self.buckets[slot];
        }
        let exp = self.lo as i32 - EXP_OFFSET;
        if exp >= 0 {
            BigRational::from_integer(acc << exp as usize)
        } else {
            BigRational::new(acc, BigInt::from(1) << (-exp) as usize)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_rational().is_zero()
    }

    /// The exact sum rounded to the nearest double.
    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }
}

fn decode(x: f64) -> (u64, i32, i8) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let exponent = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = if exponent == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    (mantissa, exponent - 1075, sign)
}

/// Exact sum of an iterator of doubles, rounded once at the end.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = ExactSum::new();
    values.into_iter().for_each(|v| s.add(v));
    s.to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    #[test]
    fn cancels_exactly() {
        let mut s = ExactSum::new();
        s.add(0.1);
        s.add(1e20);
        s.add(-1e20);
        s.add(-0.1);
        assert!(s.is_zero());
    }

    #[test]
    fn matches_rational_sum() {
        let vals = [0.24, -0.24, 0.24, 0.24, 0.24, 3.5e-300, 1.0 / 3.0, -7.25];
        let mut s = ExactSum::new();
        let mut r = BigRational::zero();
        for v in vals {
            s.add(v);
            r += BigRational::from_f64(v).unwrap();
        }
        assert_eq!(s.to_rational(), r);
    }

    #[test]
    fn survives_many_terms() {
        let mut s = ExactSum::new();
        for _ in 0..1_000_000 {
            s.add(0.24);
        }
        for _ in 0..1_000_000 {
            s.add(-0.24);
        }
        assert!(s.is_zero());
    }
}

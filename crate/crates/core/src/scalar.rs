//! Exact accumulator arithmetic shared by the emulated kernels and every oracle.
//!
//! Products of two `i16` values are accumulated in 48-bit two's-complement
//! lanes that wrap on overflow, and results are stored back as `i16` either
//! modulo 2^16 or through a shift-round-saturate step.

use std::fmt;

const ACC_BITS: u32 = 48;

/// A 48-bit two's-complement accumulator lane.
///
/// The value is held in an `i64` and is always sign-normalized, so
/// `Acc48::MIN.value() == -(1 << 47)` and `Acc48::MAX.value() == (1 << 47) - 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Acc48(i64);

impl Acc48 {
    pub const ZERO: Acc48 = Acc48(0);
    pub const MIN: Acc48 = Acc48(-(1 << 47));
    pub const MAX: Acc48 = Acc48((1 << 47) - 1);

    /// Wraps an arbitrary 64-bit integer into the 48-bit range.
    #[inline]
    pub const fn wrapping_from(value: i64) -> Acc48 {
        Acc48((value << (64 - ACC_BITS)) >> (64 - ACC_BITS))
    }

    /// Sign-extends a stored 16-bit value into an accumulator.
    #[inline]
    pub const fn from_i16(value: i16) -> Acc48 {
        Acc48(value as i64)
    }

    #[inline]
    pub const fn value(self) -> i64 {
        self.0
    }

    #[inline]
    pub const fn wrapping_add(self, rhs: Acc48) -> Acc48 {
        Acc48::wrapping_from(self.0.wrapping_add(rhs.0))
    }
}

impl fmt::Display for Acc48 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// How an accumulator is narrowed to 16 bits when a micro-tile is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WritebackMode {
    /// Keep the low 16 bits (modular store).
    #[default]
    Wrap16,
    /// Shift right by `shift` with round-half-away-from-zero, then clamp to `i16`.
    SaturateSrs { shift: u32 },
}

impl WritebackMode {
    pub fn saturate(shift: u32) -> crate::Result<WritebackMode> {
        if shift >= ACC_BITS {
            return Err(crate::Error::invalid(format!(
                "srs shift {shift} must be below {ACC_BITS}"
            )));
        }
        Ok(WritebackMode::SaturateSrs { shift })
    }
}

impl fmt::Display for WritebackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WritebackMode::Wrap16 => f.write_str("wrap"),
            WritebackMode::SaturateSrs { shift } => write!(f, "srs:{shift}"),
        }
    }
}

/// `acc + a·b`, wrapped to 48 bits. The product is exact.
#[inline]
pub fn acc48_mac(acc: Acc48, a: i16, b: i16) -> Acc48 {
    let product = i64::from(a) * i64::from(b);
    Acc48::wrapping_from(acc.0 + product)
}

/// Narrows an accumulator to the stored 16-bit value.
pub fn writeback(acc: Acc48, mode: WritebackMode) -> i16 {
    match mode {
        WritebackMode::Wrap16 => acc.0 as i16,
        WritebackMode::SaturateSrs { shift } => {
            let v = acc.0;
            let q = if shift == 0 {
                v
            } else {
                let half = 1i64 << (shift - 1);
                if v >= 0 {
                    (v + half) >> shift
                } else {
                    -((-v + half) >> shift)
                }
            };
            q.clamp(i64::from(i16::MIN), i64::from(i16::MAX)) as i16
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mac_examples() {
        assert_eq!(acc48_mac(Acc48::ZERO, 0, 7), Acc48::ZERO);
        assert_eq!(acc48_mac(Acc48::ZERO, -3, 5).value(), -15);
        assert_eq!(acc48_mac(Acc48::MAX, 1, 1), Acc48::MIN);
    }

    #[test]
    fn wrap_is_normalized() {
        assert_eq!(Acc48::wrapping_from(1 << 47), Acc48::MIN);
        assert_eq!(Acc48::wrapping_from(-(1 << 47) - 1), Acc48::MAX);
        assert_eq!(Acc48::wrapping_from(1 << 48).value(), 0);
        let most_negative = acc48_mac(Acc48::ZERO, i16::MIN, i16::MIN);
        assert_eq!(most_negative.value(), 1 << 30);
    }

    #[test]
    fn writeback_examples() {
        assert_eq!(writeback(Acc48::wrapping_from(65536), WritebackMode::Wrap16), 0);
        assert_eq!(writeback(Acc48::wrapping_from(32768), WritebackMode::Wrap16), -32768);
        let sat0 = WritebackMode::saturate(0).unwrap();
        assert_eq!(writeback(Acc48::wrapping_from(40000), sat0), 32767);
        assert_eq!(writeback(Acc48::wrapping_from(-40000), sat0), -32768);
    }

    #[test]
    fn srs_rounds_half_away_from_zero() {
        let m = WritebackMode::saturate(1).unwrap();
        assert_eq!(writeback(Acc48::wrapping_from(3), m), 2);
        assert_eq!(writeback(Acc48::wrapping_from(-3), m), -2);
        assert_eq!(writeback(Acc48::wrapping_from(1), m), 1);
        assert_eq!(writeback(Acc48::wrapping_from(-1), m), -1);
        let m4 = WritebackMode::saturate(4).unwrap();
        assert_eq!(writeback(Acc48::wrapping_from(24), m4), 2);
        assert_eq!(writeback(Acc48::wrapping_from(23), m4), 1);
        assert_eq!(writeback(Acc48::wrapping_from(-24), m4), -2);
    }

    #[test]
    fn srs_shift_bound() {
        assert!(WritebackMode::saturate(47).is_ok());
        assert!(WritebackMode::saturate(48).is_err());
    }
}

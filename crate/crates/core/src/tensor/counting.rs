//! A scalar that counts its own multiplications and additions.
//!
//! Running a generic kernel with [`Counted`] measures exactly how many scalar
//! operations the production code path performs. Counters are thread-local,
//! so count only serial kernels.

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

use super::Scalar;

thread_local! {
    static MULS: Cell<u64> = const { Cell::new(0) };
    static ADDS: Cell<u64> = const { Cell::new(0) };
}

/// Operation totals observed by [`count_ops`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub muls: u64,
    pub adds: u64,
}

impl OpCounts {
    /// Multiply-accumulate style flop count (one per mul, one per add).
    pub fn flops(&self) -> u64 {
        self.muls + self.adds
    }
}

/// Run `f` and report the scalar operations performed by [`Counted`] values
/// on this thread while it ran.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let m0 = MULS.with(Cell::get);
    let a0 = ADDS.with(Cell::get);
    let out = f();
    let counts = OpCounts {
        muls: MULS.with(Cell::get) - m0,
        adds: ADDS.with(Cell::get) - a0,
    };
    (out, counts)
}

#[inline]
fn bump(c: &'static std::thread::LocalKey<Cell<u64>>) {
    c.with(|v| v.set(v.get() + 1));
}

/// `f64` wrapper whose `*` and `+`/`-` increment thread-local counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Counted(pub f64);

impl fmt::Display for Counted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Add for Counted {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        bump(&ADDS);
        Counted(self.0 + rhs.0)
    }
}

impl Sub for Counted {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        bump(&ADDS);
        Counted(self.0 - rhs.0)
    }
}

impl Mul for Counted {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        bump(&MULS);
        Counted(self.0 * rhs.0)
    }
}

impl Div for Counted {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        bump(&MULS);
        Counted(self.0 / rhs.0)
    }
}

impl Neg for Counted {
    type Output = Self;
    fn neg(self) -> Self {
        Counted(-self.0)
    }
}

impl AddAssign for Counted {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for Counted {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for Counted {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Zero for Counted {
    fn zero() -> Self {
        Counted(0.0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
}

impl One for Counted {
    fn one() -> Self {
        Counted(1.0)
    }
}

impl Scalar for Counted {
    const NAME: &'static str = "counted";
    const BYTES: usize = 8;

    fn from_f64(v: f64) -> Self {
        Counted(v)
    }
    fn to_f64(self) -> f64 {
        self.0
    }
    fn sqrt(self) -> Self {
        Counted(self.0.sqrt())
    }
    fn abs(self) -> Self {
        Counted(self.0.abs())
    }
    fn exp(self) -> Self {
        Counted(self.0.exp())
    }
    fn ln(self) -> Self {
        Counted(self.0.ln())
    }
    fn is_finite(self) -> bool {
        self.0.is_finite()
    }
    fn write_le(self, out: &mut Vec<u8>) {
        self.0.write_le(out)
    }
    fn read_le(bytes: &[u8]) -> Self {
        Counted(f64::read_le(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_only_inside_closure() {
        let x = Counted(2.0);
        let _ = x * x;
        let (v, c) = count_ops(|| x * x + x * Counted(3.0) - x);
        assert_eq!(v, Counted(8.0));
        assert_eq!(c, OpCounts { muls: 2, adds: 2 });
        assert_eq!(c.flops(), 4);
    }
}

//! Exact fixed-point resource arithmetic.
//!
//! Every demand, capacity and per-unit cost is a [`Quantity`]: a nonnegative
//! number of micro-units (input decimal × 10^6) or the distinguished
//! [`Quantity::UNBOUNDED`] value. Sums saturate into `UNBOUNDED` instead of
//! wrapping, so a saturated sum behaves like an unbounded one in capacity
//! checks.
//!
//! Embedding costs are products of two quantities and are tracked as
//! [`Cost`] values in pico-units (10^-12) so that no rounding ever happens.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Micro-units per whole unit.
pub const MICROS_PER_UNIT: u64 = 1_000_000;

/// Pico-units per whole unit of cost.
pub const PICOS_PER_UNIT: u128 = 1_000_000_000_000;

/// Largest finite quantity, in micro-units.
pub const MAX_FINITE_MICROS: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuantityError {
    #[error("negative quantity")]
    Negative,
    #[error("fractional precision exceeds 6 digits")]
    Precision,
    #[error("quantity exceeds 2^62 micro-units")]
    TooLarge,
    #[error("malformed decimal `{0}`")]
    Malformed(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// A nonnegative fixed-point scalar or `UNBOUNDED`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Quantity(u64);

impl Quantity {
    pub const ZERO: Quantity = Quantity(0);
    /// Compares above every finite value. Also the saturation sentinel.
    pub const UNBOUNDED: Quantity = Quantity(u64::MAX);

    pub fn from_micros(micros: u64) -> Result<Self, QuantityError> {
        if micros > MAX_FINITE_MICROS {
            Err(QuantityError::TooLarge)
        } else {
            Ok(Quantity(micros))
        }
    }

    pub fn from_units(units: u64) -> Result<Self, QuantityError> {
        units
            .checked_mul(MICROS_PER_UNIT)
            .ok_or(QuantityError::TooLarge)
            .and_then(Self::from_micros)
    }

    /// Finite value in micro-units, `None` for `UNBOUNDED`.
    pub fn micros(self) -> Option<u64> {
        (!self.is_unbounded()).then_some(self.0)
    }

    pub fn is_unbounded(self) -> bool {
        self.0 == u64::MAX
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_add(self, other: Quantity) -> Quantity {
        if self.is_unbounded() || other.is_unbounded() {
            return Quantity::UNBOUNDED;
        }
        Self::saturate_wide(self.0 as u128 + other.0 as u128)
    }

    /// Multiplies by a nonnegative integer, saturating.
    pub fn saturating_scale(self, factor: u64) -> Quantity {
        if factor == 0 {
            return Quantity::ZERO;
        }
        if self.is_unbounded() {
            return self;
        }
        Self::saturate_wide(self.0 as u128 * factor as u128)
    }

    /// Converts a wide micro-unit sum back, saturating into `UNBOUNDED`.
    pub fn saturate_wide(micros: u128) -> Quantity {
        if micros > MAX_FINITE_MICROS as u128 {
            Quantity::UNBOUNDED
        } else {
            Quantity(micros as u64)
        }
    }

    /// `true` iff a wide micro-unit sum fits under this quantity.
    pub fn admits(self, wide_micros: u128) -> bool {
        self.is_unbounded() || wide_micros <= self.0 as u128
    }
}

impl fmt::Debug for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.micros() {
            None => f.write_str("inf"),
            Some(m) => write_fixed(f, m as u128, MICROS_PER_UNIT as u128, 6),
        }
    }
}

impl FromStr for Quantity {
    type Err = QuantityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "inf" {
            return Ok(Quantity::UNBOUNDED);
        }
        let micros = parse_fixed(s, 6)?;
        u64::try_from(micros)
            .map_err(|_| QuantityError::TooLarge)
            .and_then(Quantity::from_micros)
    }
}

/// Parses `digits[.digits]` into an integer scaled by 10^`scale`.
fn parse_fixed(s: &str, scale: u32) -> Result<u128, QuantityError> {
    if let Some(rest) = s.strip_prefix('-') {
        // "-0" is still zero, anything else is a sign violation.
        return match parse_fixed(rest, scale) {
            Ok(0) => Ok(0),
            Ok(_) => Err(QuantityError::Negative),
            Err(e) => Err(e),
        };
    }
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    let well_formed = !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.bytes().all(|b| b.is_ascii_digit())
        && !(s.contains('.') && frac.is_empty());
    if !well_formed {
        return Err(QuantityError::Malformed(s.to_string()));
    }
    let frac = frac.trim_end_matches('0');
    if frac.len() > scale as usize {
        return Err(QuantityError::Precision);
    }
    let int: u128 = int.parse().map_err(|_| QuantityError::TooLarge)?;
    let mut frac_val: u128 = if frac.is_empty() {
        0
    } else {
        frac.parse().unwrap()
    };
    frac_val *= 10u128.pow(scale - frac.len() as u32);
    int.checked_mul(10u128.pow(scale))
        .and_then(|v| v.checked_add(frac_val))
        .ok_or(QuantityError::TooLarge)
}

fn write_fixed(f: &mut fmt::Formatter<'_>, value: u128, unit: u128, digits: usize) -> fmt::Result {
    let int = value / unit;
    let frac = value % unit;
    if frac == 0 {
        write!(f, "{int}")
    } else {
        let s = format!("{frac:0digits$}");
        write!(f, "{int}.{}", s.trim_end_matches('0'))
    }
}

/// A τ-dimensional vector of quantities.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct ResourceVec(Vec<Quantity>);

impl ResourceVec {
    pub fn new(components: Vec<Quantity>) -> Self {
        ResourceVec(components)
    }

    pub fn zeros(tau: usize) -> Self {
        ResourceVec(vec![Quantity::ZERO; tau])
    }

    pub fn unbounded(tau: usize) -> Self {
        ResourceVec(vec![Quantity::UNBOUNDED; tau])
    }

    /// Builds a vector from whole units, panicking on overflow. Test and
    /// generator convenience.
    pub fn from_units(units: &[u64]) -> Self {
        ResourceVec(
            units
                .iter()
                .map(|&u| Quantity::from_units(u).unwrap())
                .collect(),
        )
    }

    pub fn tau(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Quantity] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Quantity {
        self.0[i]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|q| q.is_zero())
    }

    pub fn has_unbounded(&self) -> bool {
        self.0.iter().any(|q| q.is_unbounded())
    }

    /// Component-wise `≤`; `UNBOUNDED` dominates everything.
    pub fn leq(&self, other: &ResourceVec) -> Result<bool, QuantityError> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }

    /// Component-wise saturating sum.
    pub fn saturating_add(&self, other: &ResourceVec) -> Result<ResourceVec, QuantityError> {
        self.check_dim(other)?;
        Ok(ResourceVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.saturating_add(*b))
                .collect(),
        ))
    }

    pub fn saturating_scale(&self, factor: u64) -> ResourceVec {
        ResourceVec(self.0.iter().map(|q| q.saturating_scale(factor)).collect())
    }

    /// `true` iff the wide per-component sums fit under this vector.
    pub fn admits(&self, wide: &[u128]) -> bool {
        self.0.iter().zip(wide).all(|(cap, &d)| cap.admits(d))
    }

    /// Adds the finite components into a wide accumulator.
    pub(crate) fn accumulate_into(&self, acc: &mut [u128]) {
        for (a, q) in acc.iter_mut().zip(&self.0) {
            *a = match q.micros() {
                Some(m) => a.saturating_add(m as u128),
                None => u128::MAX,
            };
        }
    }

    fn check_dim(&self, other: &ResourceVec) -> Result<(), QuantityError> {
        if self.tau() != other.tau() {
            Err(QuantityError::DimensionMismatch(self.tau(), other.tau()))
        } else {
            Ok(())
        }
    }
}

impl From<Vec<Quantity>> for ResourceVec {
    fn from(v: Vec<Quantity>) -> Self {
        ResourceVec(v)
    }
}

impl fmt::Display for ResourceVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{q}")?;
        }
        f.write_str("]")
    }
}

/// Component-wise `a ≤ b`.
pub fn vec_leq(a: &ResourceVec, b: &ResourceVec) -> Result<bool, QuantityError> {
    a.leq(b)
}

/// Saturating component-wise sum; the empty sum is the zero vector.
pub fn vec_sum<'a, I>(vs: I, tau: usize) -> Result<ResourceVec, QuantityError>
where
    I: IntoIterator<Item = &'a ResourceVec>,
{
    vs.into_iter()
        .try_fold(ResourceVec::zeros(tau), |acc, v| acc.saturating_add(v))
}

/// An embedding cost in pico-units.
///
/// Arithmetic saturates at [`Cost::SATURATED`]; a saturated cost is never a
/// valid optimum and both solvers reject it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(u128);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const SATURATED: Cost = Cost(u128::MAX);

    pub fn from_picos(picos: u128) -> Cost {
        Cost(picos)
    }

    pub fn from_units(units: u64) -> Cost {
        Cost(units as u128 * PICOS_PER_UNIT)
    }

    pub fn picos(self) -> u128 {
        self.0
    }

    pub fn is_saturated(self) -> bool {
        self.0 == u128::MAX
    }

    pub fn saturating_add(self, other: Cost) -> Cost {
        Cost(self.0.saturating_add(other.0))
    }

    /// `amount · price` where `amount` is a wide micro-unit sum.
    /// Zero times anything (including `UNBOUNDED`) is zero.
    pub fn product(amount: u128, price: Quantity) -> Cost {
        if amount == 0 {
            return Cost::ZERO;
        }
        match price.micros() {
            None => Cost::SATURATED,
            Some(p) => Cost(amount.saturating_mul(p as u128)),
        }
    }

    /// `amountᵀ · price` over all components.
    pub fn dot(amount: &[u128], price: &ResourceVec) -> Cost {
        amount
            .iter()
            .zip(price.components())
            .fold(Cost::ZERO, |acc, (&a, &p)| {
                acc.saturating_add(Cost::product(a, p))
            })
    }

    /// `dᵀ · c` for two quantity vectors. Demands are always finite.
    pub fn dot_vec(demand: &ResourceVec, price: &ResourceVec) -> Cost {
        demand
            .components()
            .iter()
            .zip(price.components())
            .fold(Cost::ZERO, |acc, (d, &p)| {
                let amount = d.micros().map_or(u128::MAX, |m| m as u128);
                acc.saturating_add(Cost::product(amount, p))
            })
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_saturated() {
            f.write_str("inf")
        } else {
            write_fixed(f, self.0, PICOS_PER_UNIT, 12)
        }
    }
}

impl FromStr for Cost {
    type Err = QuantityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "inf" {
            return Ok(Cost::SATURATED);
        }
        parse_fixed(s, 12).map(Cost).map_err(|e| match e {
            QuantityError::Precision => QuantityError::Malformed(s.to_string()),
            other => other,
        })
    }
}

//! 256-bit position identifier.
//!
//! Layout (bit 0 is the least significant):
//!
//! ```text
//! [0, 64)     pool id
//! [64, 112)   leg slot 0
//! [112, 160)  leg slot 1
//! [160, 208)  leg slot 2
//! [208, 256)  leg slot 3
//!
//! within a 48-bit slot:
//! [0, 24)   strike tick, two's complement (tick = round(log_1.0001 K))
//! [24, 40)  width in ticks (round(2·log_1.0001 r))
//! 40        is_put
//! 41        is_long
//! [42, 46)  ratio, 1..=15 (zero marks an empty slot)
//! [46, 48)  reserved, must be zero
//! ```
//!
//! The layout is self-consistent but not wire-compatible with any on-chain
//! token.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Leg, Position, TokenPair, TICK_BASE};
use crate::error::{Error, Result};

pub const MAX_LEGS: usize = 4;

const POOL_BITS: usize = 64;
const SLOT_BITS: usize = 48;
const TICK_BITS: usize = 24;
const WIDTH_BITS: usize = 16;
const PUT_BIT: usize = 40;
const LONG_BIT: usize = 41;
const RATIO_OFFSET: usize = 42;
const RATIO_BITS: usize = 4;
const RESERVED_OFFSET: usize = 46;
const RESERVED_BITS: usize = 2;

const MIN_TICK: i64 = -(1 << (TICK_BITS - 1));
const MAX_TICK: i64 = (1 << (TICK_BITS - 1)) - 1;
const MAX_WIDTH: i64 = (1 << WIDTH_BITS) - 1;
const MAX_RATIO: u64 = (1 << RATIO_BITS) - 1;

/// Little-endian 64-bit limbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PositionToken(pub [u64; 4]);

impl PositionToken {
    pub const ZERO: PositionToken = PositionToken([0; 4]);

    pub fn bit(&self, index: usize) -> bool {
        self.bits(index, 1) == 1
    }

    /// Reads `len <= 64` bits starting at `offset`.
    pub fn bits(&self, offset: usize, len: usize) -> u64 {
        debug_assert!(len >= 1 && len <= 64 && offset + len <= 256);
        let limb = offset / 64;
        let shift = offset % 64;
        let mut v = self.0[limb] >> shift;
        if shift + len > 64 {
            v |= self.0[limb + 1] << (64 - shift);
        }
        if len == 64 {
            v
        } else {
            v & ((1u64 << len) - 1)
        }
    }

    fn set_bits(&mut self, offset: usize, len: usize, value: u64) {
        debug_assert!(len >= 1 && len <= 64 && offset + len <= 256);
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        let value = value & mask;
        let limb = offset / 64;
        let shift = offset % 64;
        self.0[limb] = (self.0[limb] & !(mask << shift)) | (value << shift);
        if shift + len > 64 {
            let hi_shift = 64 - shift;
            let hi_mask = mask >> hi_shift;
            self.0[limb + 1] = (self.0[limb + 1] & !hi_mask) | (value >> hi_shift);
        }
    }

    pub fn pool_id(&self) -> u64 {
        self.0[0]
    }

    fn slot(&self, index: usize) -> u64 {
        self.bits(POOL_BITS + index * SLOT_BITS, SLOT_BITS)
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|l| l.count_ones()).sum()
    }

    pub fn to_hex(&self) -> String {
        format!(
            "{:016x}{:016x}{:016x}{:016x}",
            self.0[3], self.0[2], self.0[1], self.0[0]
        )
    }

    /// Parses up to 64 hex digits, optionally prefixed with `0x`.
    pub fn from_hex(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        if digits.is_empty() || digits.len() > 64 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::MalformedToken(format!("`{s}` is not a 256-bit hex value")));
        }
        let padded = format!("{digits:0>64}");
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let start = (3 - i) * 16;
            *limb = u64::from_str_radix(&padded[start..start + 16], 16)
                .map_err(|e| Error::MalformedToken(e.to_string()))?;
        }
        Ok(PositionToken(limbs))
    }

    pub fn decode(&self) -> Result<DecodedToken> {
        let mut legs = Vec::new();
        for index in 0..MAX_LEGS {
            let slot = self.slot(index);
            if slot == 0 {
                continue;
            }
            legs.push(decode_slot(slot, index)?);
        }
        if legs.is_empty() {
            return Err(Error::MalformedToken("token has no legs".into()));
        }
        Ok(DecodedToken {
            pool_id: self.pool_id(),
            legs,
        })
    }
}

impl fmt::Display for PositionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for PositionToken {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_hex(s)
    }
}

impl Serialize for PositionToken {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PositionToken {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PositionToken::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedToken {
    pub pool_id: u64,
    pub legs: Vec<Leg>,
}

impl DecodedToken {
    /// Attaches the pair the pool id refers to.
    pub fn into_position(self, pair: TokenPair) -> Result<Position> {
        Position::new(pair, self.legs)
    }
}

fn ln_tick_base() -> f64 {
    TICK_BASE.ln()
}

pub(crate) fn strike_tick(strike: f64) -> i64 {
    (strike.ln() / ln_tick_base()).round() as i64
}

pub(crate) fn width_ticks(range_factor: f64) -> i64 {
    (range_factor.ln() / ln_tick_base() * 2.0).round() as i64
}

pub(crate) fn strike_from_tick(tick: i64) -> f64 {
    (tick as f64 * ln_tick_base()).exp()
}

pub(crate) fn range_factor_from_width(width: i64) -> f64 {
    (width as f64 * ln_tick_base() / 2.0).exp()
}

impl Leg {
    /// A leg sitting exactly on the tick grid, i.e. one that survives an
    /// encode/decode round trip unchanged.
    pub fn from_ticks(tick: i32, width: u16, is_put: bool, is_long: bool, ratio: u8) -> Result<Leg> {
        Leg::new(
            strike_from_tick(tick as i64),
            range_factor_from_width(width as i64),
            is_put,
            is_long,
            ratio as f64,
        )
    }
}

fn encode_slot(leg: &Leg) -> Result<u64> {
    leg.validate()?;
    let tick = strike_tick(leg.strike);
    if !(MIN_TICK..=MAX_TICK).contains(&tick) {
        return Err(Error::EncodingRange(format!(
            "strike {} maps to tick {tick}, outside [{MIN_TICK}, {MAX_TICK}]",
            leg.strike
        )));
    }
    let width = width_ticks(leg.range_factor);
    if !(0..=MAX_WIDTH).contains(&width) {
        return Err(Error::EncodingRange(format!(
            "range factor {} maps to width {width}, outside [0, {MAX_WIDTH}]",
            leg.range_factor
        )));
    }
    let ratio = leg.size;
    if ratio.fract() != 0.0 || !(1.0..=MAX_RATIO as f64).contains(&ratio) {
        return Err(Error::EncodingRange(format!(
            "leg size {ratio} is not an integer ratio in 1..={MAX_RATIO}"
        )));
    }
    let mut slot = PositionToken::ZERO;
    slot.set_bits(0, TICK_BITS, tick as u64);
    slot.set_bits(TICK_BITS, WIDTH_BITS, width as u64);
    slot.set_bits(PUT_BIT, 1, leg.is_put as u64);
    slot.set_bits(LONG_BIT, 1, leg.is_long as u64);
    slot.set_bits(RATIO_OFFSET, RATIO_BITS, ratio as u64);
    Ok(slot.0[0])
}

fn decode_slot(slot: u64, index: usize) -> Result<Leg> {
    let field = |offset: usize, len: usize| (slot >> offset) & ((1u64 << len) - 1);
    if field(RESERVED_OFFSET, RESERVED_BITS) != 0 {
        return Err(Error::MalformedToken(format!("reserved bits set in slot {index}")));
    }
    let ratio = field(RATIO_OFFSET, RATIO_BITS);
    if ratio == 0 {
        return Err(Error::MalformedToken(format!("slot {index} is non-empty but has ratio 0")));
    }
    let raw_tick = field(0, TICK_BITS);
    // sign-extend the 24-bit tick
    let tick = ((raw_tick << (64 - TICK_BITS)) as i64) >> (64 - TICK_BITS);
    let width = field(TICK_BITS, WIDTH_BITS);
    // ticks near the 24-bit limits have no finite positive f64 strike
    Leg::from_ticks(
        tick as i32,
        width as u16,
        field(PUT_BIT, 1) == 1,
        field(LONG_BIT, 1) == 1,
        ratio as u8,
    )
    .map_err(|e| Error::MalformedToken(format!("slot {index}: {e}")))
}

/// Packs `position` into a token. Strikes and range factors are rounded to
/// the tick grid; leg sizes must be integer ratios in `1..=15`.
pub fn encode(position: &Position, pool_id: u64) -> Result<PositionToken> {
    if position.legs.len() > MAX_LEGS {
        return Err(Error::Capacity {
            legs: position.legs.len(),
        });
    }
    position.validate()?;
    let mut token = PositionToken::ZERO;
    token.set_bits(0, POOL_BITS, pool_id);
    for (index, leg) in position.legs.iter().enumerate() {
        token.set_bits(POOL_BITS + index * SLOT_BITS, SLOT_BITS, encode_slot(leg)?);
    }
    Ok(token)
}

/// Inverse of [`encode`]; the pair is not part of the token.
pub fn decode(token: &PositionToken, pair: TokenPair) -> Result<(Position, u64)> {
    let decoded = token.decode()?;
    let pool_id = decoded.pool_id;
    Ok((decoded.into_position(pair)?, pool_id))
}

impl Position {
    /// Splits arbitrary leg sizes into a token of integer ratios and the
    /// number of token units held: `size_i = ratio_i · amount`.
    pub fn to_token(&self, pool_id: u64) -> Result<(PositionToken, f64)> {
        self.validate()?;
        let amount = self.legs.iter().map(|l| l.size).fold(f64::INFINITY, f64::min);
        if !(amount > 0.0) {
            return Err(Error::EncodingRange("every leg needs a positive size".into()));
        }
        let legs = self
            .legs
            .iter()
            .map(|leg| {
                let ratio = (leg.size / amount).round();
                if (ratio * amount - leg.size).abs() > 1e-9 * leg.size {
                    return Err(Error::EncodingRange(format!(
                        "leg size {} is not an integer multiple of {amount}",
                        leg.size
                    )));
                }
                Ok(Leg { size: ratio, ..*leg })
            })
            .collect::<Result<Vec<_>>>()?;
        let ratios = Position {
            pair: self.pair.clone(),
            legs,
        };
        Ok((encode(&ratios, pool_id)?, amount))
    }
}

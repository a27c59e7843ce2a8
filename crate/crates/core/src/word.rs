use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_traits::{PrimInt, Unsigned};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Unsigned machine word used for path IDs and the probe register.
///
/// Everything downstream of numbering is generic over this so that narrow
/// (`u16`, `u32`) registers can be modelled; overflow is always reported
/// rather than wrapped.
pub trait PathWord:
    PrimInt
    + Unsigned
    + Hash
    + Default
    + Debug
    + Display
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Number of bits in the register.
    const BITS: u32;
}

macro_rules! path_word {
    ($($t:ty),*) => {
        $(impl PathWord for $t {
            const BITS: u32 = <$t>::BITS;
        })*
    };
}

path_word!(u8, u16, u32, u64, u128);

//! Injective-by-hashing encoding of colors and multisets.
//!
//! Every color is the digest of a canonical byte string: a domain tag, then
//! fixed-width little-endian fields. Multisets are encoded by sorting their
//! elements and prefixing the element count, so equal multisets produce equal
//! bytes regardless of the order in which elements were collected.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Opaque color identifier. Equal ids mean equal encoded features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColorId(pub u64);

/// 128-bit canonical digest, serialized as 32 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest128(pub u128);

impl fmt::Display for Digest128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl Serialize for Digest128 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Digest128 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        u128::from_str_radix(&s, 16).map(Digest128).map_err(serde::de::Error::custom)
    }
}

const DOMAIN: &[u8] = b"geowl/v1\0";

/// Byte-level builder for one encoded feature.
#[derive(Clone)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(tag: &str) -> Self {
        let mut buf = Vec::with_capacity(256);
        buf.extend_from_slice(DOMAIN);
        buf.extend_from_slice(&(tag.len() as u32).to_le_bytes());
        buf.extend_from_slice(tag.as_bytes());
        Encoder { buf }
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn color(&mut self, c: ColorId) -> &mut Self {
        self.u64(c.0)
    }

    pub fn label(&mut self, l: Option<u32>) -> &mut Self {
        match l {
            None => self.u8(0),
            Some(v) => self.u8(1).u64(v as u64),
        }
    }

    /// Length prefix of a sequence; callers then append the elements in canonical order.
    pub fn len(&mut self, n: usize) -> &mut Self {
        self.u64(n as u64)
    }

    pub fn digest(&self) -> Digest128 {
        let out = Sha256::digest(&self.buf);
        let mut bytes = [0u8; 16];
        bytes.copy_from_slice(&out[..16]);
        Digest128(u128::from_le_bytes(bytes))
    }

    pub fn finish(&self) -> ColorId {
        ColorId(self.digest().0 as u64)
    }
}

/// Sorts `items` and appends them, length-prefixed, as one multiset.
pub(crate) fn push_multiset<T: Ord + Copy>(
    enc: &mut Encoder,
    items: &mut [T],
    write: impl Fn(&mut Encoder, T),
) {
    items.sort_unstable();
    enc.len(items.len());
    for &it in items.iter() {
        write(enc, it);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_order_independent() {
        let mut a = [(ColorId(3), 5i64), (ColorId(1), 2), (ColorId(3), 1)];
        let mut b = [(ColorId(3), 1i64), (ColorId(3), 5), (ColorId(1), 2)];
        let enc = |items: &mut [(ColorId, i64)]| {
            let mut e = Encoder::new("t");
            push_multiset(&mut e, items, |e, (c, d)| {
                e.color(c).i64(d);
            });
            e.finish()
        };
        assert_eq!(enc(&mut a), enc(&mut b));
        let mut c = [(ColorId(3), 1i64), (ColorId(1), 2)];
        assert_ne!(enc(&mut a), enc(&mut c));
    }

    #[test]
    fn tags_separate_domains() {
        assert_ne!(Encoder::new("a").u64(1).finish(), Encoder::new("b").u64(1).finish());
        assert_ne!(Encoder::new("ab").finish(), Encoder::new("a").u8(b'b').finish());
    }

    #[test]
    fn labels_distinguish_absent_from_zero() {
        let a = Encoder::new("l").label(None).finish();
        let b = Encoder::new("l").label(Some(0)).finish();
        assert_ne!(a, b);
    }

    #[test]
    fn digest_hex_is_fixed_width() {
        assert_eq!(Digest128(255).to_string(), format!("{}ff", "0".repeat(30)));
    }
}

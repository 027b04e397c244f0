//! Packed binary hash codes.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64`; bits past `len` are
//! always zero so that popcount-based distances never see padding.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashCode {
    words: Vec<u64>,
    len: usize,
}

pub(crate) fn word_count(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl HashCode {
    pub fn zeros(len: usize) -> Self {
        HashCode {
            words: vec![0; word_count(len)],
            len,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b {
                words[len / 64] |= 1u64 << (len % 64);
            }
            len += 1;
        }
        HashCode { words, len }
    }

    /// Rejects word vectors of the wrong length or with non-zero padding.
    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != word_count(len) {
            return Err(Error::shape("code words", word_count(len), words.len()));
        }
        let code = HashCode { words, len };
        if code.pad_mask() & code.words.last().copied().unwrap_or(0) != 0 {
            return Err(Error::Format(format!("non-zero padding bits in {len}-bit code")));
        }
        Ok(code)
    }

    fn pad_mask(&self) -> u64 {
        match self.len % 64 {
            0 => 0,
            r => !0u64 << r,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for {}-bit code", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit {i} out of range for {}-bit code", self.len);
        let m = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = words.last_mut() {
            *last &= !self.pad_mask();
        }
        HashCode { words, len: self.len }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Number of differing bits.
    pub fn hamming(&self, other: &HashCode) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::shape("code length", self.len, other.len));
        }
        Ok(hamming_words(&self.words, &other.words))
    }

    /// Whole 64-bit words as hex, most significant word first.
    pub fn to_hex(&self) -> String {
        self.words.iter().rev().map(|w| format!("{w:016x}")).collect()
    }

    /// Inverse of [`HashCode::to_hex`]. Shorter strings are left-padded with
    /// zeros; an optional `0x` prefix is accepted.
    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        let s = s.trim();
        let s = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
        let n = word_count(len);
        if s.is_empty() || s.len() > n * 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Input(format!(
                "`{s}` is not a hex code of at most {} digits",
                n * 16
            )));
        }
        let padded = format!("{s:0>width$}", width = n * 16);
        let mut words = Vec::with_capacity(n);
        for chunk in padded.as_bytes().chunks(16).rev() {
            let digits = std::str::from_utf8(chunk).expect("ascii hex");
            words.push(u64::from_str_radix(digits, 16).map_err(|e| Error::Input(e.to_string()))?);
        }
        HashCode::from_words(words, len)
    }
}

#[inline]
pub(crate) fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

impl fmt::Display for HashCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

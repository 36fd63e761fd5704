/// Fixed-length bit array over vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitSet {
    words: Vec<u64>,
    len: u64,
}

impl BitSet {
    pub fn new(len: u64) -> Self {
        Self { words: vec![0; len.div_ceil(64) as usize], len }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        self.words[(i >> 6) as usize] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u64) {
        self.words[(i >> 6) as usize] |= 1 << (i & 63);
    }

    /// Sets bit `i` and reports whether it was previously clear.
    #[inline]
    pub fn insert(&mut self, i: u64) -> bool {
        let w = &mut self.words[(i >> 6) as usize];
        let bit = 1 << (i & 63);
        let fresh = *w & bit == 0;
        *w |= bit;
        fresh
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let base = (wi as u64) << 6;
            BitIter(w).map(move |b| base + b)
        })
    }

    /// First clear bit at or after `from`, if any.
    pub fn next_clear(&self, from: u64) -> Option<u64> {
        if from >= self.len {
            return None;
        }
        let mut wi = (from >> 6) as usize;
        let mut w = !self.words[wi] & (!0u64 << (from & 63));
        loop {
            if w != 0 {
                let i = ((wi as u64) << 6) + w.trailing_zeros() as u64;
                return (i < self.len).then_some(i);
            }
            wi += 1;
            if wi == self.words.len() {
                return None;
            }
            w = !self.words[wi];
        }
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros() as u64;
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// Masks selecting in-word positions whose bit `i` is clear, for `i < 6`.
const LOW_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

/// ORs into `out` the image of `src` under `v -> v ^ (1 << dim)`.
pub(crate) fn or_flipped(src: &[u64], dim: u32, out: &mut [u64]) {
    if dim < 6 {
        let shift = 1u32 << dim;
        let m = LOW_MASKS[dim as usize];
        for (o, &w) in out.iter_mut().zip(src) {
            *o |= ((w & m) << shift) | ((w >> shift) & m);
        }
    } else {
        let stride = 1usize << (dim - 6);
        for (i, o) in out.iter_mut().enumerate() {
            *o |= src[i ^ stride];
        }
    }
}

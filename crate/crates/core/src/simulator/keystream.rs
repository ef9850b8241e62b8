//! Running-key generation: a maximal-length Galois LFSR for enumerable
//! desk-scale keys and a counter-keyed ChaCha stream for throughput runs.

use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Maximal-length feedback taps (polynomial exponents) for widths 2–32.
const MAXIMAL_TAPS: [&[u32]; 31] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 6, 2, 1],
    &[20, 17],
    &[21, 19],
    &[22, 21],
    &[23, 18],
    &[24, 23, 22, 17],
    &[25, 22],
    &[26, 6, 2, 1],
    &[27, 5, 2, 1],
    &[28, 25],
    &[29, 27],
    &[30, 6, 4, 1],
    &[31, 28],
    &[32, 22, 2, 1],
];

pub fn maximal_taps(width: u32) -> Result<&'static [u32]> {
    if !(2..=32).contains(&width) {
        return Err(invalid(format!("LFSR width must be in 2..=32, got {width}")));
    }
    Ok(MAXIMAL_TAPS[(width - 2) as usize])
}

/// Galois LFSR; the output bit is the bit shifted out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lfsr {
    state: u32,
    mask: u32,
    width: u32,
}

impl Lfsr {
    pub fn new(width: u32, seed: u32) -> Result<Self> {
        Self::with_taps(width, maximal_taps(width)?, seed)
    }

    pub fn with_taps(width: u32, taps: &[u32], seed: u32) -> Result<Self> {
        if !(2..=32).contains(&width) {
            return Err(invalid(format!("LFSR width must be in 2..=32, got {width}")));
        }
        if taps.iter().any(|&t| t == 0 || t > width) || !taps.contains(&width) {
            return Err(invalid("taps must lie in 1..=width and include width"));
        }
        let full = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
        if seed & full == 0 || seed & !full != 0 {
            return Err(invalid(format!("LFSR seed must be a non-zero {width}-bit value")));
        }
        let mask = taps.iter().fold(0u32, |m, &t| m | 1 << (t - 1));
        Ok(Self { state: seed, mask, width })
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let out = (self.state & 1) as u8;
        self.state >>= 1;
        if out == 1 {
            self.state ^= self.mask;
        }
        out
    }
}

/// Any source of key bits.
pub trait BitSource {
    fn next_bit(&mut self) -> u8;

    /// `n` bits, most significant first.
    fn next_bits(&mut self, n: u32) -> u32 {
        (0..n).fold(0u32, |acc, _| (acc << 1) | self.next_bit() as u32)
    }
}

impl BitSource for Lfsr {
    #[inline]
    fn next_bit(&mut self) -> u8 {
        Lfsr::next_bit(self)
    }
}

/// ChaCha20 keyed by a 256-bit key, read sequentially (block counter
/// advancing from zero).
#[derive(Debug, Clone)]
pub struct CounterKeyed {
    rng: ChaCha20Rng,
    buf: u64,
    left: u32,
}

impl CounterKeyed {
    pub fn new(key: [u8; 32]) -> Self {
        Self {
            rng: ChaCha20Rng::from_seed(key),
            buf: 0,
            left: 0,
        }
    }
}

impl BitSource for CounterKeyed {
    fn next_bit(&mut self) -> u8 {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let b = (self.buf >> 63) as u8;
        self.buf <<= 1;
        self.left -= 1;
        b
    }
}

/// How each slot's running key is cut from the bit stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkLayout {
    #[serde(rename = "M")]
    pub m: u32,
    /// Draw a second chunk `K^{R2}` for QNDM.
    pub qndm: bool,
    /// Draw one OSK bit per slot from the same stream.
    pub osk: bool,
}

impl ChunkLayout {
    pub fn new(m: u32, qndm: bool, osk: bool) -> Result<Self> {
        if m == 0 {
            return Err(invalid("M must be at least 1"));
        }
        Ok(Self { m, qndm, osk })
    }

    /// Bits per symbol chunk, `⌈log₂ M⌉`.
    pub fn symbol_bits(&self) -> u32 {
        u32::BITS - (self.m - 1).leading_zeros()
    }

    /// Bits consumed per slot when no chunk is rejected.
    pub fn bits_per_slot(&self) -> u32 {
        let s = self.symbol_bits();
        s + if self.qndm { s } else { 0 } + u32::from(self.osk)
    }
}

/// Running keys of one slot; `k1`, `k2` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunningKey {
    pub k1: u32,
    pub k2: Option<u32>,
    pub osk: Option<u8>,
}

fn draw_symbol<S: BitSource + ?Sized>(src: &mut S, layout: &ChunkLayout) -> u32 {
    let bits = layout.symbol_bits();
    loop {
        let v = src.next_bits(bits);
        if v < layout.m {
            return v + 1;
        }
    }
}

/// Cuts one slot's running key from `src`. For `M` not a power of two,
/// out-of-range chunks are rejected and redrawn.
#[inline]
pub fn draw_running_key<S: BitSource + ?Sized>(src: &mut S, layout: &ChunkLayout) -> RunningKey {
    let k1 = draw_symbol(src, layout);
    let k2 = layout.qndm.then(|| draw_symbol(src, layout));
    let osk = layout.osk.then(|| src.next_bit());
    RunningKey { k1, k2, osk }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KeySpec {
    /// LFSR of `width` bits whose initial state is the key.
    Lfsr { width: u32, state: u32 },
    /// 256-bit key for the counter-keyed stream.
    CounterKeyed { key: [u8; 32] },
}

impl KeySpec {
    pub fn key_bits(&self) -> u32 {
        match self {
            KeySpec::Lfsr { width, .. } => *width,
            KeySpec::CounterKeyed { .. } => 256,
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Lfsr(Lfsr),
    Counter(Box<CounterKeyed>),
}

#[derive(Debug, Clone)]
pub struct KeystreamGenerator {
    source: Source,
    layout: ChunkLayout,
}

impl KeystreamGenerator {
    pub fn new(key: &KeySpec, layout: ChunkLayout) -> Result<Self> {
        let source = match key {
            KeySpec::Lfsr { width, state } => Source::Lfsr(Lfsr::new(*width, *state)?),
            KeySpec::CounterKeyed { key } => Source::Counter(Box::new(CounterKeyed::new(*key))),
        };
        Ok(Self { source, layout })
    }

    pub fn layout(&self) -> ChunkLayout {
        self.layout
    }

    pub fn next_running_key(&mut self) -> RunningKey {
        match &mut self.source {
            Source::Lfsr(l) => draw_running_key(l, &self.layout),
            Source::Counter(c) => draw_running_key(c.as_mut(), &self.layout),
        }
    }
}

/// The first `n_slots` running keys of `gen`.
pub fn generate_keystream(gen: &mut KeystreamGenerator, n_slots: usize) -> Vec<RunningKey> {
    (0..n_slots).map(|_| gen.next_running_key()).collect()
}

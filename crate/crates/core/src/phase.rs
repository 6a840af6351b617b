//! Phase-randomisation sources.
//!
//! Hologram algorithms draw unit-modulus phase factors from a
//! [`PhaseSource`]. Two interchangeable kinds exist: an unbounded
//! pseudo-random stream ([`PhaseSource::independent`]) and a finite cyclic
//! lookup table ([`PhaseLut`]) whose cursor persists across pixels,
//! sub-frames and frames with no reset. The table stores precomputed
//! `(cos, sin)` pairs so consumers never evaluate trigonometric functions.
//!
//! The generator behind both kinds is xoshiro256** seeded through four
//! rounds of splitmix64 — seedable, platform-stable, and pinned by golden
//! vectors in the tests. A table built from seed `s` therefore contains
//! exactly the first `N_LUT` factors the independent stream for seed `s`
//! would emit, which makes the two modes bit-identical whenever the table
//! is at least as long as the number of phases consumed.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};

/// xoshiro256** with splitmix64 seeding.
///
/// Identical seeds give identical streams on every platform; the stream is
/// frozen by golden vectors in the test suite.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut next = || {
            sm = sm.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = sm;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        Self {
            s: [next(), next(), next(), next()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    fn next_phase_factor(&mut self) -> Complex64 {
        let phi = TAU * self.next_f64();
        Complex64::new(phi.cos(), phi.sin())
    }
}

/// Maximum deviation from unit modulus tolerated in a table entry.
pub const LUT_MODULUS_TOLERANCE: f64 = 1e-12;

const LUT_MAGIC: &[u8; 4] = b"HLUT";
const LUT_VERSION: u32 = 1;

/// Finite pool of unit-modulus phase factors with a persistent cyclic cursor.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLut {
    entries: Vec<Complex64>,
    cursor: usize,
}

impl PhaseLut {
    /// Fill a table of `n_lut` factors with phases drawn uniformly on
    /// `[0, 2*pi)` from the deterministic generator. Cursor starts at 0.
    pub fn build(seed: u64, n_lut: usize) -> Result<Self> {
        if n_lut == 0 {
            return Err(Error::InvalidLut(
                "table length must be at least 1 (use a flat source for the no-table case)".into(),
            ));
        }
        let mut rng = Xoshiro256StarStar::new(seed);
        let entries = (0..n_lut).map(|_| rng.next_phase_factor()).collect();
        Ok(Self { entries, cursor: 0 })
    }

    /// Wrap explicit entries; each must be unit modulus within
    /// [`LUT_MODULUS_TOLERANCE`].
    pub fn from_entries(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidLut("table must not be empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if !e.re.is_finite() || !e.im.is_finite() || (e.norm() - 1.0).abs() > LUT_MODULUS_TOLERANCE
            {
                return Err(Error::InvalidLut(format!(
                    "entry {i} = {e} is not unit modulus"
                )));
            }
        }
        Ok(Self { entries, cursor: 0 })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    fn next(&mut self) -> Complex64 {
        let v = self.entries[self.cursor];
        self.cursor = (self.cursor + 1) % self.entries.len();
        v
    }

    /// Serialise as the `HLUT` v1 little-endian binary format:
    /// magic `HLUT`, version u32, length u64, then `length` pairs of
    /// (f64 re, f64 im). The cursor is not stored.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(LUT_MAGIC)?;
        w.write_all(&LUT_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&e.re.to_le_bytes())?;
            w.write_all(&e.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Parse the `HLUT` v1 format; the cursor starts at 0.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let fmt = |offset: u64, message: String| Error::Format { offset, message };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|e| fmt(0, format!("missing magic: {e}")))?;
        if &magic != LUT_MAGIC {
            return Err(fmt(0, format!("bad magic {magic:?}, expected \"HLUT\"")));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)
            .map_err(|e| fmt(4, format!("missing version: {e}")))?;
        let version = u32::from_le_bytes(u32buf);
        if version != LUT_VERSION {
            return Err(fmt(4, format!("unsupported version {version}")));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)
            .map_err(|e| fmt(8, format!("missing length: {e}")))?;
        let len = u64::from_le_bytes(u64buf) as usize;
        if len == 0 {
            return Err(fmt(8, "zero-length table".into()));
        }
        let mut entries = Vec::with_capacity(len);
        for i in 0..len {
            let offset = 16 + 16 * i as u64;
            let mut pair = [0u8; 16];
            r.read_exact(&mut pair)
                .map_err(|e| fmt(offset, format!("truncated entry {i}: {e}")))?;
            let re = f64::from_le_bytes(pair[..8].try_into().unwrap());
            let im = f64::from_le_bytes(pair[8..].try_into().unwrap());
            let e = Complex64::new(re, im);
            if !re.is_finite() || !im.is_finite() || (e.norm() - 1.0).abs() > LUT_MODULUS_TOLERANCE
            {
                return Err(fmt(offset, format!("entry {i} = {e} is not unit modulus")));
            }
            entries.push(e);
        }
        Ok(Self { entries, cursor: 0 })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

/// Convenience alias for [`PhaseLut::build`] matching the operation name.
pub fn build_lut(seed: u64, n_lut: usize) -> Result<PhaseLut> {
    PhaseLut::build(seed, n_lut)
}

#[derive(Debug, Clone)]
enum SourceInner {
    Independent(Xoshiro256StarStar),
    CyclicLut(PhaseLut),
}

/// A stream of unit-modulus phase factors.
///
/// Holds mutable cursor/generator state: single-owner while in use, cheap to
/// clone so each worker owns its source.
#[derive(Debug, Clone)]
pub struct PhaseSource {
    inner: SourceInner,
    consumed: u64,
}

impl PhaseSource {
    /// Fresh uniform phase factor on every call, seeded deterministically.
    pub fn independent(seed: u64) -> Self {
        Self {
            inner: SourceInner::Independent(Xoshiro256StarStar::new(seed)),
            consumed: 0,
        }
    }

    /// Cyclic table source; the cursor persists across all consumers.
    pub fn cyclic(lut: PhaseLut) -> Self {
        Self {
            inner: SourceInner::CyclicLut(lut),
            consumed: 0,
        }
    }

    /// The degenerate no-randomisation source: every factor is `1 + 0i`.
    ///
    /// Models the zero-length-table operating point, where no random pool
    /// exists at all; implemented as a cyclic table with the single entry 1.
    pub fn flat() -> Self {
        Self::cyclic(PhaseLut {
            entries: vec![Complex64::new(1.0, 0.0)],
            cursor: 0,
        })
    }

    /// Next phase factor. Table sources advance their cursor by exactly one,
    /// modulo the table length.
    pub fn next_phase(&mut self) -> Complex64 {
        self.consumed += 1;
        match &mut self.inner {
            SourceInner::Independent(rng) => rng.next_phase_factor(),
            SourceInner::CyclicLut(lut) => lut.next(),
        }
    }

    /// Total number of factors drawn since construction.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    /// Table length when this is a cyclic source.
    pub fn lut_len(&self) -> Option<usize> {
        match &self.inner {
            SourceInner::Independent(_) => None,
            SourceInner::CyclicLut(lut) => Some(lut.len()),
        }
    }

    /// Current cursor when this is a cyclic source.
    pub fn lut_cursor(&self) -> Option<usize> {
        match &self.inner {
            SourceInner::Independent(_) => None,
            SourceInner::CyclicLut(lut) => Some(lut.cursor),
        }
    }
}

/// Alias for [`PhaseSource::flat`] matching the operation name.
pub fn flat_phase_source() -> PhaseSource {
    PhaseSource::flat()
}

/// Multiply each pixel amplitude by the next phase factor, consuming factors
/// in row-major raster order (top-left to bottom-right). Exactly
/// `width * height` factors are consumed even where the amplitude is zero.
pub fn apply_phase(image: &RealImage, source: &mut PhaseSource) -> ComplexField {
    let data = image
        .as_slice()
        .iter()
        .map(|&a| source.next_phase() * a)
        .collect();
    ComplexField::from_parts_unchecked(image.width(), image.height(), data)
}

/// Trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    if n.is_multiple_of(3) {
        return n == 3;
    }
    let mut d = 5u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime_above(n: u64) -> u64 {
    let mut candidate = n + 1;
    while !is_prime(candidate) {
        candidate += 1;
    }
    candidate
}

/// All primes `<= n`, by sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            primes.push(p as u64);
            let mut m = p * p;
            while m <= n {
                composite[m] = true;
                m += p;
            }
        }
    }
    primes
}

/// Minimum table lengths for the three hard constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LutHardLimits {
    /// Table must exceed this for sub-frame independence (= number of
    /// sub-frames).
    pub subframe_independence_min: u64,
    /// Table length at which the cyclic table is exactly equivalent to the
    /// independent stream over one frame set (= Nx * Ny * Nsf).
    pub exact_equivalence_min: u64,
    /// Table must exceed the largest image dimension to avoid row-periodic
    /// phase patterns.
    pub row_period_min: u64,
}

/// Compute the hard limits for an `n_x` by `n_y` hologram with `n_sf`
/// sub-frames.
pub fn hard_limits(n_x: u64, n_y: u64, n_sf: u64) -> LutHardLimits {
    LutHardLimits {
        subframe_independence_min: n_sf,
        exact_equivalence_min: n_x * n_y * n_sf,
        row_period_min: n_x.max(n_y),
    }
}

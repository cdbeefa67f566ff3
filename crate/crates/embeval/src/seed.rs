//! Deterministic seed derivation.
//!
//! Every random stream in the harness is seeded by a pure function of the run
//! seed plus a list of labels (task name, repeat index, ...), so results do
//! not depend on scheduling or on the platform's hash randomization.

/// A label that can feed the seed mixer.
pub enum Label<'a> {
    Str(&'a str),
    Num(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Str(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(n: u64) -> Self {
        Label::Num(n)
    }
}

impl From<usize> for Label<'_> {
    fn from(n: usize) -> Self {
        Label::Num(n as u64)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of labels into a new 64-bit seed.
pub fn derive(base: u64, labels: &[Label<'_>]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &base.to_le_bytes());
    for label in labels {
        match label {
            Label::Str(s) => {
                h = fnv1a(h, &[0x01]);
                h = fnv1a(h, s.as_bytes());
            }
            Label::Num(n) => {
                h = fnv1a(h, &[0x02]);
                h = fnv1a(h, &n.to_le_bytes());
            }
        }
    }
    splitmix(h)
}

//! Counter-addressed random streams and schedule-independent reductions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Leaf size of the fixed reduction tree. Changing it changes rounding.
const LEAF: usize = 64;

/// A reproducible random stream addressed by `(master_seed, stream_id)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// An independent stream family keyed by this stream, indexed by `id`.
    pub fn child(&self, id: u64) -> RngStream {
        RngStream {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_id)),
            stream_id: id,
        }
    }
}

/// Map `0..len` and combine the results over a fixed binary tree, in
/// parallel. The tree shape depends only on `len`, so the floating-point
/// result is the same for any thread count.
pub fn tree_reduce<T, M, C>(len: usize, map: M, combine: C) -> Option<T>
where
    T: Send,
    M: Fn(usize) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    if len == 0 {
        return None;
    }
    Some(reduce_range(0, len, &map, &combine))
}

fn reduce_range<T, M, C>(lo: usize, hi: usize, map: &M, combine: &C) -> T
where
    T: Send,
    M: Fn(usize) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    if hi - lo <= LEAF {
        let mut acc = map(lo);
        for i in lo + 1..hi {
            acc = combine(acc, map(i));
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(
        || reduce_range(lo, mid, map, combine),
        || reduce_range(mid, hi, map, combine),
    );
    combine(a, b)
}

/// Elementwise sum of equal-length vectors, consuming the left operand.
pub(crate) fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_address_same_draws() {
        let draw = |s: RngStream| {
            let mut r = s.rng();
            (0..8).map(|_| r.random::<u64>()).collect::<Vec<_>>()
        };
        let a = draw(RngStream::new(5, 9));
        let b = draw(RngStream::new(5, 9));
        assert_eq!(a, b);
        let c: u64 = RngStream::new(5, 10).rng().random();
        assert_ne!(a[0], c);
    }

    #[test]
    fn children_differ_from_parent() {
        let s = RngStream::new(1, 2);
        assert_ne!(s.child(2), s);
        assert_ne!(s.child(0), RngStream::new(1, 3).child(0));
    }

    #[test]
    fn reduction_independent_of_pool_size() {
        let f = |i: usize| (i as f64).sin() * 1e-3 + 1.0 / (i as f64 + 1.0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| tree_reduce(10_000, f, |a, b| a + b).unwrap())
        };
        let one = run(1);
        assert_eq!(one.to_bits(), run(4).to_bits());
        assert_eq!(one.to_bits(), run(7).to_bits());
    }

    #[test]
    fn empty_reduction() {
        assert!(tree_reduce(0, |i| i, |a, b| a + b).is_none());
    }
}

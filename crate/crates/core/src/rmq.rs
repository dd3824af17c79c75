//! Range-minimum queries over lattice heights.
//!
//! Two-level layout: the path is cut into blocks of [`BLOCK`] entries, a sparse
//! table answers queries over whole blocks, and the ragged ends are scanned.
//! Queries cost at most `2·BLOCK` comparisons plus two table lookups, and the
//! table takes `n/BLOCK · log n` words instead of `n log n`.

const BLOCK: usize = 32;

#[derive(Debug, Clone)]
pub struct RangeMin {
    len: usize,
    /// `table[k][i]` = min over blocks `i .. i + 2^k`.
    table: Vec<Vec<u32>>,
}

impl RangeMin {
    pub fn build(values: &[u32]) -> Self {
        let blocks: Vec<u32> = values
            .chunks(BLOCK)
            .map(|c| *c.iter().min().expect("chunks are non-empty"))
            .collect();
        let mut table = vec![blocks];
        let mut width = 1;
        while 2 * width <= table[0].len() {
            let prev = table.last().expect("table has a base row");
            let row: Vec<u32> = (0..prev.len() - width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            table.push(row);
            width *= 2;
        }
        Self {
            len: values.len(),
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Minimum of `values[lo..=hi]`. `values` must be the slice used to build.
    pub fn query(&self, values: &[u32], lo: usize, hi: usize) -> u32 {
        debug_assert_eq!(values.len(), self.len);
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let (bl, bh) = (lo / BLOCK, hi / BLOCK);
        if bh <= bl + 1 {
            return scan(&values[lo..=hi]);
        }
        let head = scan(&values[lo..(bl + 1) * BLOCK]);
        let tail = scan(&values[bh * BLOCK..=hi]);
        let (first, last) = (bl + 1, bh - 1);
        let k = usize::BITS - 1 - (last - first + 1).leading_zeros();
        let row = &self.table[k as usize];
        let mid = row[first].min(row[last + 1 - (1 << k)]);
        head.min(tail).min(mid)
    }
}

#[inline]
fn scan(xs: &[u32]) -> u32 {
    xs.iter().copied().min().unwrap_or(u32::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_naive(values in prop::collection::vec(0u32..1000, 1..400), a in 0usize..400, b in 0usize..400) {
            let n = values.len();
            let (a, b) = (a % n, b % n);
            let rmq = RangeMin::build(&values);
            let (lo, hi) = (a.min(b), a.max(b));
            let naive = *values[lo..=hi].iter().min().unwrap();
            prop_assert_eq!(rmq.query(&values, a, b), naive);
        }
    }

    #[test]
    fn exhaustive_medium() {
        let values: Vec<u32> = (0..300u32).map(|i| (i * 7919) % 257).collect();
        let rmq = RangeMin::build(&values);
        for lo in 0..values.len() {
            let mut m = u32::MAX;
            for hi in lo..values.len() {
                m = m.min(values[hi]);
                assert_eq!(rmq.query(&values, lo, hi), m);
            }
        }
    }
}

//! Level-set geometry of the tree coded by a lattice excursion.
//!
//! For time indices `s, t` the tree distance is
//! `d(s,t) = h·(H_s + H_t − 2·min H[s∧t, s∨t])`. Two points of level `a` are at
//! distance `< r` iff the path between them stays strictly above
//! `b = a − r/2`, so the `T(a)`-balls of radius `r` are exactly the level-`a`
//! visits grouped by excursion interval above `b`. Balls are listed in order
//! of first visit.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::excursion::{lattice_units, LatticeExcursion};
use crate::rmq::RangeMin;

/// Range-minimum index over an excursion.
#[derive(Debug, Clone)]
pub struct TreeIndex<'e> {
    exc: &'e LatticeExcursion,
    rmq: RangeMin,
}

impl<'e> TreeIndex<'e> {
    pub fn new(exc: &'e LatticeExcursion) -> Self {
        Self {
            exc,
            rmq: RangeMin::build(exc.heights()),
        }
    }

    pub fn excursion(&self) -> &'e LatticeExcursion {
        self.exc
    }

    pub fn step(&self) -> f64 {
        self.exc.step()
    }

    pub fn len(&self) -> usize {
        self.exc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exc.is_empty()
    }

    /// Minimum lattice height between two time indices (inclusive, any order).
    pub fn min_height(&self, s: usize, t: usize) -> u32 {
        self.rmq.query(self.exc.heights(), s, t)
    }

    /// Tree distance in lattice units.
    pub fn lattice_distance(&self, s: usize, t: usize) -> u32 {
        let hs = self.exc.heights();
        hs[s] + hs[t] - 2 * self.min_height(s, t)
    }

    pub fn distance(&self, s: usize, t: usize) -> Result<f64> {
        let len = self.len();
        for index in [s, t] {
            if index >= len {
                return Err(Error::IndexOutOfRange { index, len });
            }
        }
        Ok(f64::from(self.lattice_distance(s, t)) * self.step())
    }

    /// All visits to level `a`, ready for ball queries.
    pub fn level(&self, a: f64) -> Result<LevelView<'_, 'e>> {
        let j = lattice_units("level", a, self.step())?;
        if j == 0 {
            return Err(Error::param("level must be positive"));
        }
        Ok(self.level_units(j))
    }

    pub fn level_units(&self, level: u32) -> LevelView<'_, 'e> {
        let hs = self.exc.heights();
        let visits = hs[..hs.len() - 1]
            .iter()
            .enumerate()
            .filter_map(|(k, &x)| (x == level).then_some(k))
            .collect();
        LevelView {
            idx: self,
            level,
            visits,
        }
    }

    pub fn ball_decomposition(&self, a: f64, r: f64) -> Result<BallDecomposition> {
        self.level(a)?.decomposition(r)
    }

    pub fn enlarged_ball_chain(&self, a: f64, radii: &[f64]) -> Result<BallChain> {
        self.level(a)?.enlarged_ball_chain(radii)
    }

    /// `2a − 2h·min H[first, last]` over the level-`a` visits of the ball.
    pub fn ball_diameter(&self, ball: &Ball) -> f64 {
        let level = self.exc.heights()[ball.first_visit];
        let m = self.min_height(ball.first_visit, ball.last_visit);
        2.0 * f64::from(level - m) * self.step()
    }

    /// `ℓ̂^a(B(σ, r_outer) \ B(σ, r_inner))` for the vertex `σ = p(t)`.
    ///
    /// A zero inner radius denotes the distance-zero class of `t`.
    pub fn ring_mass(&self, t: usize, a: f64, r_inner: f64, r_outer: f64) -> Result<f64> {
        let len = self.len();
        if t >= len {
            return Err(Error::IndexOutOfRange { index: t, len });
        }
        let view = self.level(a)?;
        let found = self.exc.heights()[t];
        if found != view.level {
            return Err(Error::NotAtLevel {
                index: t,
                expected: view.level,
                found,
            });
        }
        if r_inner > r_outer {
            return Err(Error::param("inner radius exceeds outer radius"));
        }
        let k_in = view.half_radius_units(r_inner)?;
        let k_out = view.half_radius_units(r_outer)?;
        Ok(view.ring_mass_units(t, k_in, k_out))
    }
}

/// One `T(a)`-ball: the level-`a` visits inside one excursion interval above
/// `b = a − r/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    /// First index of the interval above `b`.
    pub start: usize,
    /// Last index of the interval above `b` (inclusive).
    pub end: usize,
    pub first_visit: usize,
    pub last_visit: usize,
    /// Number of steps leaving level `a` inside the interval.
    pub visits: u64,
    pub mass: f64,
    pub diameter: f64,
}

impl Ball {
    pub fn contains_interval(&self, other: &Ball) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn disjoint(&self, other: &Ball) -> bool {
        self.end < other.start || other.end < self.start
    }
}

/// Visits to a fixed level, with ball queries in `O(log n)`.
#[derive(Debug, Clone)]
pub struct LevelView<'i, 'e> {
    idx: &'i TreeIndex<'e>,
    level: u32,
    visits: Vec<usize>,
}

impl<'i, 'e> LevelView<'i, 'e> {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn height(&self) -> f64 {
        f64::from(self.level) * self.idx.step()
    }

    pub fn index(&self) -> &'i TreeIndex<'e> {
        self.idx
    }

    /// Time indices of the visits, increasing.
    pub fn visits(&self) -> &[usize] {
        &self.visits
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_of(self.visits.len() as u64)
    }

    pub fn mass_of(&self, visits: u64) -> f64 {
        self.idx.step() / 2.0 * visits as f64
    }

    /// `r/(2h)`, checked to be an integer in `[0, level]`.
    pub fn half_radius_units(&self, r: f64) -> Result<u32> {
        let k = lattice_units("radius/2", r / 2.0, self.idx.step())?;
        if k > self.level {
            return Err(Error::param(format!(
                "radius {r} exceeds twice the level {}",
                self.height()
            )));
        }
        Ok(k)
    }

    /// Visits within `[lo, hi]`.
    pub fn count_visits(&self, lo: usize, hi: usize) -> u64 {
        let a = self.visits.partition_point(|&v| v < lo);
        let b = self.visits.partition_point(|&v| v <= hi);
        (b - a) as u64
    }

    /// Largest interval around `t` on which heights stay `>= threshold`.
    fn expand(&self, t: usize, threshold: u32) -> (usize, usize) {
        let idx = self.idx;
        // Smallest lo with min[lo, t] >= threshold.
        let (mut lo, mut hi) = (0usize, t);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if idx.min_height(mid, t) >= threshold {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let left = lo;
        // Largest hi with min[t, hi] >= threshold.
        let (mut lo, mut hi) = (t, idx.len() - 1);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if idx.min_height(t, mid) >= threshold {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        (left, lo)
    }

    /// Ball of half-radius `k` (lattice units) around visit `t`. With `k = 0`
    /// this is the distance-zero class of `t`, which coincides with `k = 1`.
    pub fn ball_around(&self, t: usize, k: u32) -> Ball {
        let threshold = if k == 0 {
            self.level
        } else {
            self.level - k + 1
        };
        let (start, end) = self.expand(t, threshold);
        self.ball_in(start, end)
    }

    fn ball_in(&self, start: usize, end: usize) -> Ball {
        let a = self.visits.partition_point(|&v| v < start);
        let b = self.visits.partition_point(|&v| v <= end);
        let (first_visit, last_visit) = (self.visits[a], self.visits[b - 1]);
        let visits = (b - a) as u64;
        let m = self.idx.min_height(first_visit, last_visit);
        Ball {
            start,
            end,
            first_visit,
            last_visit,
            visits,
            mass: self.mass_of(visits),
            diameter: 2.0 * f64::from(self.level - m) * self.idx.step(),
        }
    }

    pub fn ring_mass_units(&self, t: usize, k_in: u32, k_out: u32) -> f64 {
        if k_in >= k_out {
            return 0.0;
        }
        let outer = self.ball_around(t, k_out).visits;
        let inner = self.ball_around(t, k_in).visits;
        self.mass_of(outer - inner)
    }

    pub fn decomposition(&self, r: f64) -> Result<BallDecomposition> {
        if r.is_nan() || r <= 0.0 {
            return Err(Error::param("ball radius must be positive"));
        }
        let k = self.half_radius_units(r)?;
        if k == 0 {
            return Err(Error::param(
                "ball radius must be at least two lattice steps",
            ));
        }
        Ok(self.decomposition_units(k))
    }

    /// Balls of half-radius `k ≥ 1` lattice units, i.e. above `b = level − k`.
    pub fn decomposition_units(&self, k: u32) -> BallDecomposition {
        assert!(k >= 1 && k <= self.level, "half radius out of range");
        let threshold = self.level - k + 1;
        let mut balls = Vec::new();
        let mut i = 0;
        while i < self.visits.len() {
            let mut j = i;
            while j + 1 < self.visits.len()
                && self.idx.min_height(self.visits[j], self.visits[j + 1]) >= threshold
            {
                j += 1;
            }
            let (first, last) = (self.visits[i], self.visits[j]);
            let (start, _) = self.expand(first, threshold);
            let (_, end) = self.expand(last, threshold);
            let m = self.idx.min_height(first, last);
            let visits = (j - i + 1) as u64;
            balls.push(Ball {
                start,
                end,
                first_visit: first,
                last_visit: last,
                visits,
                mass: self.mass_of(visits),
                diameter: 2.0 * f64::from(self.level - m) * self.idx.step(),
            });
            i = j + 1;
        }
        let h = self.idx.step();
        BallDecomposition {
            level: self.height(),
            radius: 2.0 * f64::from(k) * h,
            level_units: self.level,
            half_radius_units: k,
            step: h,
            balls,
        }
    }

    pub fn enlarged_ball_chain(&self, radii: &[f64]) -> Result<BallChain> {
        if radii.is_empty() {
            return Err(Error::param("at least one radius is required"));
        }
        if radii.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::param("radii must be strictly decreasing"));
        }
        let decompositions = radii
            .iter()
            .map(|&r| self.decomposition(r))
            .collect::<Result<Vec<_>>>()?;
        BallChain::link(decompositions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallDecomposition {
    pub level: f64,
    pub radius: f64,
    pub level_units: u32,
    pub half_radius_units: u32,
    pub step: f64,
    pub balls: Vec<Ball>,
}

#[derive(Debug, Clone, Serialize)]
struct DecompositionRow {
    a: f64,
    r: f64,
    ball: usize,
    start: usize,
    end: usize,
    mass: f64,
    diameter: f64,
}

impl BallDecomposition {
    /// `Z_{a,r}`.
    pub fn count(&self) -> usize {
        self.balls.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.balls.iter().map(|b| b.mass).sum()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.balls.iter().map(|b| b.mass).collect()
    }

    /// Index of the ball whose interval holds time index `t`.
    pub fn ball_containing(&self, t: usize) -> Option<usize> {
        let i = self.balls.partition_point(|b| b.start <= t);
        (i > 0 && self.balls[i - 1].end >= t).then(|| i - 1)
    }

    /// CSV rows `a, r, ball, start, end, mass, diameter`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, b) in self.balls.iter().enumerate() {
            w.serialize(DecompositionRow {
                a: self.level,
                r: self.radius,
                ball: i,
                start: b.start,
                end: b.end,
                mass: b.mass,
                diameter: b.diameter,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Decompositions at decreasing radii, linked by containment.
#[derive(Debug, Clone)]
pub struct BallChain {
    pub decompositions: Vec<BallDecomposition>,
    /// `parents[i][k]`: index, in `decompositions[k]`, of the ball containing
    /// ball `i` of the smallest radius.
    pub parents: Vec<Vec<usize>>,
}

impl BallChain {
    fn link(decompositions: Vec<BallDecomposition>) -> Result<Self> {
        let finest = decompositions.last().expect("non-empty chain");
        let parents = finest
            .balls
            .iter()
            .map(|ball| {
                decompositions
                    .iter()
                    .map(|d| {
                        d.ball_containing(ball.first_visit)
                            .filter(|&p| d.balls[p].contains_interval(ball))
                            .ok_or_else(|| {
                                Error::param(format!(
                                    "ball at [{}, {}] has no enclosing ball at radius {}",
                                    ball.start, ball.end, d.radius
                                ))
                            })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            decompositions,
            parents,
        })
    }

    /// Mass of the enclosing ball of `ball` at radius index `k`.
    pub fn enlarged_mass(&self, ball: usize, k: usize) -> f64 {
        self.decompositions[k].balls[self.parents[ball][k]].mass
    }

    pub fn finest(&self) -> &BallDecomposition {
        self.decompositions.last().expect("non-empty chain")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::{local_time_profile, sample_uniform_tree_contour, ConditionedSampler};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn exc(h: &[u32]) -> LatticeExcursion {
        LatticeExcursion::new(h.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e = exc(&[0, 1, 2, 1, 2, 1, 0]);
        let idx = TreeIndex::new(&e);
        assert_eq!(idx.distance(2, 4).unwrap(), 2.0);
        for s in 0..e.len() {
            assert_eq!(idx.distance(s, s).unwrap(), 0.0);
        }
        assert!(matches!(
            idx.distance(0, 7),
            Err(Error::IndexOutOfRange { index: 7, len: 7 })
        ));
    }

    #[test]
    fn decomposition_examples() {
        let e = exc(&[0, 1, 2, 1, 2, 1, 0]);
        let idx = TreeIndex::new(&e);
        let d = idx.ball_decomposition(2.0, 2.0).unwrap();
        assert_eq!(d.count(), 2);
        assert_eq!(d.masses(), vec![0.5, 0.5]);
        assert!(d.balls.iter().all(|b| b.diameter == 0.0));

        let d = idx.ball_decomposition(2.0, 4.0).unwrap();
        assert_eq!(d.count(), 1);
        assert_eq!(d.masses(), vec![1.0]);
        assert_eq!(d.balls[0].diameter, 2.0);
        assert_eq!(idx.ball_diameter(&d.balls[0]), 2.0);

        assert!(idx.ball_decomposition(2.0, 3.0).is_err());
        assert!(idx.ball_decomposition(2.0, 6.0).is_err());
        assert!(idx.ball_decomposition(1.5, 2.0).is_err());
    }

    #[test]
    fn chain_examples() {
        let e = exc(&[0, 1, 2, 1, 2, 1, 0]);
        let idx = TreeIndex::new(&e);
        let single = idx.enlarged_ball_chain(2.0, &[2.0]).unwrap();
        assert_eq!(single.parents, vec![vec![0], vec![1]]);
        let chain = idx.enlarged_ball_chain(2.0, &[4.0, 2.0]).unwrap();
        assert_eq!(chain.parents, vec![vec![0, 0], vec![0, 1]]);
        assert!(idx.enlarged_ball_chain(2.0, &[2.0, 4.0]).is_err());
    }

    #[test]
    fn ring_examples() {
        let e = exc(&[0, 1, 2, 1, 2, 1, 0]);
        let idx = TreeIndex::new(&e);
        assert_eq!(idx.ring_mass(2, 2.0, 2.0, 2.0).unwrap(), 0.0);
        // Whole level minus the class of t.
        assert_eq!(idx.ring_mass(2, 2.0, 0.0, 4.0).unwrap(), 0.5);
        assert!(matches!(
            idx.ring_mass(1, 2.0, 0.0, 4.0),
            Err(Error::NotAtLevel { .. })
        ));
        assert!(idx.ring_mass(2, 2.0, 4.0, 2.0).is_err());
    }

    /// O(n²) distance oracle by direct minimum scans.
    fn brute_distances(h: &[u32]) -> Vec<Vec<u32>> {
        let n = h.len();
        let mut d = vec![vec![0; n]; n];
        for s in 0..n {
            let mut m = h[s];
            for t in s..n {
                m = m.min(h[t]);
                d[s][t] = h[s] + h[t] - 2 * m;
                d[t][s] = d[s][t];
            }
        }
        d
    }

    fn check_against_brute(e: &LatticeExcursion) {
        let idx = TreeIndex::new(e);
        let hs = e.heights();
        let brute = brute_distances(hs);
        for (s, row) in brute.iter().enumerate() {
            for (t, &d) in row.iter().enumerate() {
                assert_eq!(idx.lattice_distance(s, t), d);
            }
        }
        // Balls: brute-force grouping of level visits by pairwise distance.
        let max = e.max_level();
        for a in 1..=max {
            let view = idx.level_units(a);
            let vs = view.visits().to_vec();
            for k in 1..=a {
                let d = view.decomposition_units(k);
                // Two visits share a ball iff their distance is < 2k.
                for (x, &s) in vs.iter().enumerate() {
                    for &t in &vs[x..] {
                        let same = d.ball_containing(s) == d.ball_containing(t);
                        assert_eq!(same, brute[s][t] < 2 * k);
                    }
                }
                for b in &d.balls {
                    let members: Vec<usize> = vs
                        .iter()
                        .copied()
                        .filter(|&v| v >= b.start && v <= b.end)
                        .collect();
                    let mut diam = 0;
                    for &s in &members {
                        for &t in &members {
                            diam = diam.max(brute[s][t]);
                        }
                    }
                    assert_eq!(b.diameter, f64::from(diam));
                    assert!(hs[b.start - 1] == a - k && hs[b.end + 1] == a - k);
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_on_random_trees() {
        let mut rng = stream(71, 0);
        for n in [2usize, 3, 5, 10, 40, 120] {
            for _ in 0..5 {
                check_against_brute(&sample_uniform_tree_contour(n, &mut rng).unwrap());
            }
        }
        let s = ConditionedSampler::with_levels(1.0, 6).unwrap();
        for _ in 0..20 {
            let e = s.sample_within(&mut rng, 600);
            if let Some(e) = e {
                check_against_brute(&e);
            }
        }
    }

    fn small_excursion() -> impl Strategy<Value = LatticeExcursion> {
        (2usize..200, any::<u64>()).prop_map(|(n, seed)| {
            let mut rng = stream(seed, 0);
            sample_uniform_tree_contour(n, &mut rng).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pseudo_metric(e in small_excursion(), s in 0usize..400, t in 0usize..400, u in 0usize..400) {
            let n = e.len();
            let (s, t, u) = (s % n, t % n, u % n);
            let idx = TreeIndex::new(&e);
            let d = |x, y| idx.lattice_distance(x, y);
            prop_assert_eq!(d(s, t), d(t, s));
            prop_assert_eq!(d(s, s), 0);
            prop_assert!(d(s, u) <= d(s, t) + d(t, u));
        }

        #[test]
        fn decomposition_partitions_level_mass(e in small_excursion()) {
            let idx = TreeIndex::new(&e);
            let profile = local_time_profile(&e);
            for a in 1..=e.max_level() {
                let view = idx.level_units(a);
                let mut prev: Option<BallDecomposition> = None;
                for k in (1..=a).rev() {
                    let d = view.decomposition_units(k);
                    let total: u64 = d.balls.iter().map(|b| b.visits).sum();
                    prop_assert_eq!(total, profile.visits(a));
                    for w in d.balls.windows(2) {
                        prop_assert!(w[0].end < w[1].start);
                    }
                    for b in &d.balls {
                        prop_assert!(b.diameter <= 2.0 * f64::from(k));
                        if k < a {
                            prop_assert!(b.diameter < 2.0 * f64::from(k));
                        }
                    }
                    if let Some(p) = &prev {
                        for b in &d.balls {
                            let outer: Vec<_> = p.balls.iter().filter(|o| o.contains_interval(b)).collect();
                            prop_assert_eq!(outer.len(), 1);
                        }
                    }
                    prev = Some(d);
                }
            }
        }
    }

    #[test]
    fn csv_export_has_one_row_per_ball() {
        let e = exc(&[0, 1, 2, 1, 2, 1, 0]);
        let idx = TreeIndex::new(&e);
        let d = idx.ball_decomposition(2.0, 2.0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a,r,ball,start,end,mass,diameter");
        assert_eq!(lines.len(), 3);
    }
}

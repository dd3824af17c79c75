//! Lattice excursions and their local times.
//!
//! A [`LatticeExcursion`] is a ±1 path on the integers with space step `h` and
//! time step `h²/2`, so that the real-valued path has quadratic variation
//! `2t`, the normalization of the coding process `X` with `X/√2` a standard
//! Brownian motion.
//!
//! Local times are calibrated as `ℓ̂^{jh} = (h/2)·V_j` where `V_j` counts the
//! steps that start at level `j`. For a simple random walk started at `j` and
//! killed at `0`, a visit to `j` is followed by an escape (a down step that
//! never comes back) with probability `1/(2j)`, so `E[V_j] = 2j` and
//! `E[ℓ̂^{jh}] = jh = a`, the mean of the level mass under `N_a`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Relative slack accepted when checking that a real value sits on the lattice.
const ALIGN_EPS: f64 = 1e-9;

/// Converts a real level into lattice units, rejecting values off the grid.
pub fn lattice_units(what: &'static str, value: f64, h: f64) -> Result<u32> {
    let misaligned = || Error::Misaligned {
        what,
        value,
        step: h,
    };
    if !value.is_finite() || value < 0.0 {
        return Err(misaligned());
    }
    let q = value / h;
    let k = q.round();
    if (q - k).abs() > ALIGN_EPS * q.max(1.0) || k > f64::from(u32::MAX) {
        return Err(misaligned());
    }
    Ok(k as u32)
}

pub(crate) fn check_step(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidStep(h))
    }
}

/// A nearest-neighbour path on `{0, 1, 2, …}` that starts and ends at 0.
///
/// Paths from [`ConditionedSampler`] are strictly positive in their interior.
/// Contours of planar trees may return to 0 in the middle; see
/// [`LatticeExcursion::is_strict`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeExcursion {
    heights: Vec<u32>,
    h: f64,
}

impl LatticeExcursion {
    pub fn new(heights: Vec<u32>, h: f64) -> Result<Self> {
        check_step(h)?;
        validate_heights(&heights)?;
        Ok(Self { heights, h })
    }

    pub(crate) fn from_parts_unchecked(heights: Vec<u32>, h: f64) -> Self {
        debug_assert!(validate_heights(&heights).is_ok());
        Self { heights, h }
    }

    /// Same path, reinterpreted with a different space step.
    pub fn with_step(self, h: f64) -> Result<Self> {
        check_step(h)?;
        Ok(Self { h, ..self })
    }

    pub fn heights(&self) -> &[u32] {
        &self.heights
    }

    pub fn into_heights(self) -> Vec<u32> {
        self.heights
    }

    /// Space step `h`.
    pub fn step(&self) -> f64 {
        self.h
    }

    /// Time step `h²/2`.
    pub fn time_step(&self) -> f64 {
        self.h * self.h / 2.0
    }

    /// Duration `(len − 1)·h²/2`.
    pub fn duration(&self) -> f64 {
        (self.heights.len() - 1) as f64 * self.time_step()
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    /// Real height of time index `k`.
    pub fn height(&self, k: usize) -> f64 {
        f64::from(self.heights[k]) * self.h
    }

    /// True when every interior height is positive, i.e. the path is a single
    /// excursion away from 0 rather than a concatenation of several.
    pub fn is_strict(&self) -> bool {
        let n = self.heights.len();
        self.heights[1..n - 1].iter().all(|&x| x > 0)
    }

    pub fn level_of(&self, value: f64) -> Result<u32> {
        lattice_units("level", value, self.h)
    }
}

fn validate_heights(heights: &[u32]) -> Result<()> {
    if heights.len() < 3 {
        return Err(Error::Malformed(format!(
            "need at least 3 points, got {}",
            heights.len()
        )));
    }
    if heights[0] != 0 || heights[heights.len() - 1] != 0 {
        return Err(Error::Malformed("path must start and end at 0".into()));
    }
    if let Some(k) = heights.windows(2).position(|w| w[0].abs_diff(w[1]) != 1) {
        return Err(Error::Malformed(format!("step {k} -> {} is not ±1", k + 1)));
    }
    Ok(())
}

/// Exact sampler for the lattice excursion conditioned to reach a level.
///
/// The path is built in two phases. Up to the first hit of the target `j`,
/// the walk is the Doob transform of simple random walk killed at 0 by the
/// harmonic function `x ↦ x`: from `x` it steps up with probability
/// `(x+1)/(2x)`. From `j` on it is an ordinary simple random walk killed at 0.
///
/// Two optional compressions keep long excursions cheap without changing the
/// law of anything observed inside a level window:
///
/// * `ceiling(c)`: every excursion above `c` is replaced by the single spike
///   `c, c+1, c`. Visit counts at levels `≤ c` and all path minima below `c`
///   are untouched, so the tree restricted to heights `≤ c` is exact.
/// * `floor(f)`: the path before the first hit of `f` is a straight climb,
///   every return below `f` is replaced by `f, f−1, f`, and the final descent
///   is straight. Subtrees above `f` (hence every `T(a)`-ball with
///   `a − r/2 ≥ f`) and all visit counts at levels `≥ f` keep their exact law.
///   Escapes below the floor are drawn with their exact probability `1/f`.
#[derive(Debug, Clone)]
pub struct ConditionedSampler {
    h: f64,
    target: u32,
    floor: u32,
    ceiling: Option<u32>,
}

impl ConditionedSampler {
    /// Sampler for `N_a` at space step `h`. `a/h` must be a positive integer.
    pub fn new(h: f64, a: f64) -> Result<Self> {
        check_step(h)?;
        let target = lattice_units("level", a, h)?;
        Self::with_levels(h, target)
    }

    pub fn with_levels(h: f64, target: u32) -> Result<Self> {
        check_step(h)?;
        if target == 0 {
            return Err(Error::param("conditioning level must be positive"));
        }
        Ok(Self {
            h,
            target,
            floor: 1,
            ceiling: None,
        })
    }

    pub fn floor(self, level: f64) -> Result<Self> {
        let f = lattice_units("floor", level, self.h)?;
        self.floor_level(f)
    }

    pub fn floor_level(mut self, f: u32) -> Result<Self> {
        if f > self.target {
            return Err(Error::param("floor must not exceed the conditioning level"));
        }
        self.floor = f.max(1);
        Ok(self)
    }

    pub fn ceiling(self, level: f64) -> Result<Self> {
        let c = lattice_units("ceiling", level, self.h)?;
        self.ceiling_level(c)
    }

    pub fn ceiling_level(mut self, c: u32) -> Result<Self> {
        if c < self.target {
            return Err(Error::param(
                "ceiling must not be below the conditioning level",
            ));
        }
        self.ceiling = Some(c);
        Ok(self)
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn target_level(&self) -> u32 {
        self.target
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticeExcursion {
        let heights = self
            .walk(rng, usize::MAX)
            .expect("unbounded walk always completes");
        LatticeExcursion::from_parts_unchecked(heights, self.h)
    }

    /// Like [`sample`](Self::sample) but gives up once the path exceeds
    /// `max_len` points. `None` means the duration is censored at
    /// `(max_len − 1)·h²/2`.
    pub fn sample_within<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_len: usize,
    ) -> Option<LatticeExcursion> {
        self.walk(rng, max_len)
            .map(|heights| LatticeExcursion::from_parts_unchecked(heights, self.h))
    }

    fn walk<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Option<Vec<u32>> {
        let j = self.target;
        let f = self.floor;
        let mut path: Vec<u32> = Vec::with_capacity(4 * j as usize + 16);
        path.extend(0..=f);
        let mut pos = f;

        // Ascent to the target under the harmonic transform.
        while pos < j {
            let up = rng.random::<f64>() * f64::from(2 * pos) < f64::from(pos + 1);
            if up {
                pos += 1;
            } else if pos == f {
                // Conditioned to reach j, the walk always climbs back to f.
                path.push(f - 1);
            } else {
                pos -= 1;
            }
            path.push(pos);
            if path.len() > max_len {
                return None;
            }
        }

        // Free walk from the target until absorption.
        let mut bits = 0u64;
        let mut left = 0u32;
        loop {
            if left == 0 {
                bits = rng.next_u64();
                left = 64;
            }
            let up = bits & 1 == 1;
            bits >>= 1;
            left -= 1;

            if up {
                if self.ceiling == Some(pos) {
                    path.push(pos + 1);
                    path.push(pos);
                } else {
                    pos += 1;
                    path.push(pos);
                }
            } else if pos == f {
                if f == 1 || rng.random_range(0..f) == 0 {
                    path.extend((0..f).rev());
                    break;
                }
                path.push(f - 1);
                path.push(f);
            } else {
                pos -= 1;
                path.push(pos);
            }
            if path.len() > max_len {
                return None;
            }
        }
        Some(path)
    }
}

/// Samples `e` under `N_a` at step `h`, with no compression.
pub fn sample_conditioned_excursion<R: Rng + ?Sized>(
    h: f64,
    a: f64,
    rng: &mut R,
) -> Result<LatticeExcursion> {
    Ok(ConditionedSampler::new(h, a)?.sample(rng))
}

/// Contour of a uniform rooted planar tree with `n` vertices (unit edges).
///
/// A uniformly shuffled sequence of `n−1` up steps and `n` down steps is
/// rotated to start just after the first minimum of its partial sums; by the
/// cycle lemma exactly one rotation stays nonnegative until its final step,
/// which is then dropped. Rescale with
/// [`with_step`](LatticeExcursion::with_step)`(1/√n)` for the CRT limit.
pub fn sample_uniform_tree_contour<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<LatticeExcursion> {
    if n < 2 {
        return Err(Error::param("a planar tree contour needs n >= 2 vertices"));
    }
    let m = n - 1;
    let mut steps: Vec<i8> = Vec::with_capacity(2 * m + 1);
    steps.resize(m, 1);
    steps.resize(2 * m + 1, -1);
    steps.shuffle(rng);

    let mut sum = 0i64;
    let mut min = i64::MAX;
    let mut cut = 0;
    for (i, &s) in steps.iter().enumerate() {
        sum += i64::from(s);
        if sum < min {
            min = sum;
            cut = i + 1;
        }
    }
    let total = steps.len();
    steps.rotate_left(cut % total);
    steps.pop();

    let mut heights = Vec::with_capacity(2 * m + 1);
    let mut level = 0i64;
    heights.push(0);
    for s in steps {
        level += i64::from(s);
        heights.push(level as u32);
    }
    LatticeExcursion::new(heights, 1.0)
}

/// Level-indexed local-time masses of one excursion.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeProfile {
    visits: Vec<u64>,
    h: f64,
}

impl LocalTimeProfile {
    /// `V_j`, the number of steps leaving level `j`.
    pub fn visits(&self, level: u32) -> u64 {
        self.visits.get(level as usize).copied().unwrap_or(0)
    }

    /// `ℓ̂^{jh}(T) = (h/2)·V_j`.
    pub fn mass(&self, level: u32) -> f64 {
        self.h / 2.0 * self.visits(level) as f64
    }

    pub fn mass_at(&self, a: f64) -> Result<f64> {
        Ok(self.mass(lattice_units("level", a, self.h)?))
    }

    /// `(level, ℓ̂)` pairs for every level up to the maximum.
    pub fn masses(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        let half = self.h / 2.0;
        self.visits
            .iter()
            .enumerate()
            .map(move |(j, &v)| (j as u32, half * v as f64))
    }

    /// `Σ_j ℓ̂^{jh}·h`, which equals the duration exactly.
    pub fn occupation_time(&self) -> f64 {
        let total: u64 = self.visits.iter().sum();
        total as f64 * self.h * self.h / 2.0
    }

    pub fn step(&self) -> f64 {
        self.h
    }
}

/// Counts visits per level in one sweep. The last point of the path carries
/// no step and is not counted, which makes the co-area identity exact.
pub fn local_time_profile(exc: &LatticeExcursion) -> LocalTimeProfile {
    let mut visits = vec![0u64; exc.max_level() as usize + 1];
    let hs = exc.heights();
    for &x in &hs[..hs.len() - 1] {
        visits[x as usize] += 1;
    }
    LocalTimeProfile {
        visits,
        h: exc.step(),
    }
}

/// A maximal run of time indices where the path is strictly above a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcursionInterval {
    /// First index above the level.
    pub start: usize,
    /// Last index above the level (inclusive).
    pub end: usize,
    /// Highest lattice level reached inside.
    pub max: u32,
}

/// Excursion intervals above lattice level `b`, in time order.
pub fn excursion_intervals_above(exc: &LatticeExcursion, b: u32) -> Vec<ExcursionInterval> {
    let mut out = Vec::new();
    let mut open: Option<(usize, u32)> = None;
    for (k, &x) in exc.heights().iter().enumerate() {
        match (&mut open, x > b) {
            (None, true) => open = Some((k, x)),
            (Some((_, m)), true) => *m = (*m).max(x),
            (Some((s, m)), false) => {
                out.push(ExcursionInterval {
                    start: *s,
                    end: k - 1,
                    max: *m,
                });
                open = None;
            }
            (None, false) => {}
        }
    }
    out
}

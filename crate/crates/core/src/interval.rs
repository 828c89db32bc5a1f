//! Temporal intervals and their intersection-over-union.
//!
//! Everything here is plain `f64` arithmetic; the differentiable mirror of
//! the same formulas lives in the loss builder, which replays them as graph
//! operations so gradients can flow into the regressed boundaries.

use crate::error::{Error, Result};

/// A closed temporal segment `[start, end]` in seconds (or frame units).
///
/// Invariants: `start <= end` and both endpoints finite. Construct through
/// [`Interval::new`]; degenerate (zero-length) intervals are allowed here and
/// rejected where they are not meaningful (dataset annotations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    start: f64,
    end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidInterval {
                start,
                end,
                reason: "endpoints must be finite",
            });
        }
        if start > end {
            return Err(Error::InvalidInterval {
                start,
                end,
                reason: "start must not exceed end",
            });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Closed containment test: `start <= t <= end`.
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    /// Clips the interval to `[lo, hi]`. The caller must guarantee the
    /// intersection is nonempty (true for anchored proposals, whose anchor
    /// lies inside the video extent).
    pub fn clip(&self, lo: f64, hi: f64) -> Interval {
        Interval {
            start: self.start.max(lo),
            end: self.end.min(hi),
        }
    }
}

/// Signed temporal IoU: intersection over union without clamping.
///
/// Negative when the intervals are disjoint (the "intersection" term goes
/// negative while the union term stays positive), exactly 1 when the
/// intervals coincide. The union span of two valid intervals is zero only
/// when both are the same single point, which is treated as identity.
pub fn tiou_raw(a: Interval, b: Interval) -> f64 {
    let inter = a.end.min(b.end) - a.start.max(b.start);
    let union = a.end.max(b.end) - a.start.min(b.start);
    if union == 0.0 {
        // both degenerate at the same point: identical intervals
        return 1.0;
    }
    inter / union
}

/// Clamped temporal IoU in `[0, 1]`, used for matching and evaluation.
pub fn tiou(a: Interval, b: Interval) -> f64 {
    tiou_raw(a, b).max(0.0)
}

/// Normalized distances from an anchor to the segment start (before the
/// anchor) and end (after it). Both components are sigmoid-bounded in
/// `[0, 1]` and scale by the video duration to absolute offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetPair {
    start_offset: f64,
    end_offset: f64,
}

impl OffsetPair {
    pub fn new(start_offset: f64, end_offset: f64) -> Result<Self> {
        for v in [start_offset, end_offset] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OffsetOutOfRange(v));
            }
        }
        Ok(Self {
            start_offset,
            end_offset,
        })
    }

    pub fn start_offset(&self) -> f64 {
        self.start_offset
    }

    pub fn end_offset(&self) -> f64 {
        self.end_offset
    }
}

/// Turns an anchored offset prediction into an absolute segment:
/// `[t - start_offset * scale, t + end_offset * scale]`.
///
/// The anchor always lies inside the result. A negative start is legal and
/// only clipped when proposals are emitted.
pub fn segment_from_offsets(t: f64, off: OffsetPair, scale: f64) -> Result<Interval> {
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::NonPositiveScale(scale));
    }
    Interval::new(t - off.start_offset * scale, t + off.end_offset * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(s: f64, e: f64) -> Interval {
        Interval::new(s, e).unwrap()
    }

    #[test]
    fn tiou_raw_examples() {
        assert_eq!(tiou_raw(iv(0.0, 4.0), iv(0.0, 4.0)), 1.0);
        assert_eq!(tiou_raw(iv(0.0, 4.0), iv(1.0, 3.0)), 0.5);
        assert!((tiou_raw(iv(0.0, 1.0), iv(2.0, 3.0)) - (-1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn tiou_clamps_disjoint_pairs() {
        assert_eq!(tiou(iv(0.0, 1.0), iv(2.0, 3.0)), 0.0);
        assert_eq!(tiou(iv(0.0, 4.0), iv(1.0, 3.0)), 0.5);
        assert!((tiou(iv(2.0, 6.0), iv(4.0, 8.0)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_identical_points_are_identity() {
        assert_eq!(tiou_raw(iv(5.0, 5.0), iv(5.0, 5.0)), 1.0);
    }

    #[test]
    fn interval_rejects_bad_endpoints() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn segment_from_offsets_examples() {
        let z = segment_from_offsets(5.0, OffsetPair::new(0.0, 0.0).unwrap(), 10.0).unwrap();
        assert_eq!((z.start(), z.end()), (5.0, 5.0));

        let s = segment_from_offsets(5.0, OffsetPair::new(0.2, 0.3).unwrap(), 10.0).unwrap();
        assert!((s.start() - 3.0).abs() < 1e-12 && (s.end() - 8.0).abs() < 1e-12);

        let n = segment_from_offsets(0.0, OffsetPair::new(1.0, 1.0).unwrap(), 4.0).unwrap();
        assert_eq!((n.start(), n.end()), (-4.0, 4.0));
    }

    #[test]
    fn segment_from_offsets_rejects_bad_scale() {
        let off = OffsetPair::new(0.5, 0.5).unwrap();
        assert!(segment_from_offsets(0.0, off, 0.0).is_err());
        assert!(segment_from_offsets(0.0, off, -1.0).is_err());
    }

    #[test]
    fn offset_pair_rejects_out_of_range() {
        assert!(OffsetPair::new(-0.1, 0.5).is_err());
        assert!(OffsetPair::new(0.5, 1.2).is_err());
    }

    /// Brute-force overlap estimate on a uniform grid over the joint span.
    fn grid_tiou(a: Interval, b: Interval, k: usize) -> f64 {
        let lo = a.start().min(b.start());
        let hi = a.end().max(b.end());
        if hi == lo {
            return 1.0;
        }
        let step = (hi - lo) / k as f64;
        let mut inter = 0usize;
        let mut union = 0usize;
        for i in 0..k {
            let t = lo + (i as f64 + 0.5) * step;
            let in_a = a.contains(t);
            let in_b = b.contains(t);
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    fn arb_interval() -> impl Strategy<Value = Interval> {
        (-50.0f64..50.0, 0.01f64..40.0).prop_map(|(s, len)| iv(s, s + len))
    }

    proptest! {
        #[test]
        fn tiou_is_symmetric(a in arb_interval(), b in arb_interval()) {
            prop_assert_eq!(tiou(a, b), tiou(b, a));
            prop_assert_eq!(tiou_raw(a, b), tiou_raw(b, a));
        }

        #[test]
        fn tiou_one_iff_equal(a in arb_interval(), b in arb_interval()) {
            prop_assert_eq!(tiou(a, a), 1.0);
            if tiou(a, b) >= 1.0 - 1e-9 {
                let span = a.length().max(b.length());
                prop_assert!((a.start() - b.start()).abs() <= 1e-8 * span.max(1.0));
                prop_assert!((a.end() - b.end()).abs() <= 1e-8 * span.max(1.0));
            }
        }

        #[test]
        fn tiou_invariant_under_affine_reparametrization(
            a in arb_interval(),
            b in arb_interval(),
            shift in -100.0f64..100.0,
            scale in 0.1f64..10.0,
        ) {
            let f = |x: Interval| iv(x.start() * scale + shift, x.end() * scale + shift);
            prop_assert!((tiou(a, b) - tiou(f(a), f(b))).abs() < 1e-9);
        }

        #[test]
        fn anchored_segments_overlap_their_instance(
            gs in -10.0f64..10.0,
            glen in 1.0f64..20.0,
            frac in 0.05f64..0.95,
            so in 0.01f64..1.0,
            eo in 0.01f64..1.0,
            scale in 1.0f64..50.0,
        ) {
            let g = iv(gs, gs + glen);
            // anchor strictly inside the instance, offsets strictly positive
            let t = gs + frac * glen;
            let p = segment_from_offsets(t, OffsetPair::new(so, eo).unwrap(), scale).unwrap();
            prop_assert!(tiou_raw(p, g) > 0.0);
        }

        #[test]
        fn tiou_matches_grid_estimate(a in arb_interval(), b in arb_interval()) {
            let k = 10_000;
            prop_assert!((tiou(a, b) - grid_tiou(a, b, k)).abs() <= 2.0 / k as f64);
        }
    }
}

//! Points and paths on the universal cover of the punctured plane.
//!
//! A point is stored by its logarithmic coordinate `w`; the projected point is
//! `z = exp(w)`. Inversion `z -> 1/z` becomes `w -> -w`, which fixes `w = 0`
//! (the preimage of 1) and keeps every power `z^a = exp(a w)` single valued.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoverPoint {
    pub w: Complex64,
}

impl CoverPoint {
    /// Preimage of 1.
    pub const ONE: CoverPoint = CoverPoint { w: Complex64::new(0.0, 0.0) };
    /// Preimage of -1 reached from `ONE` by a counterclockwise half turn.
    pub const MINUS_ONE_CCW: CoverPoint = CoverPoint { w: Complex64::new(0.0, PI) };
    /// Preimage of -1 reached from `ONE` by a clockwise half turn.
    pub const MINUS_ONE_CW: CoverPoint = CoverPoint { w: Complex64::new(0.0, -PI) };

    pub const fn new(w: Complex64) -> Self {
        Self { w }
    }

    pub fn from_parts(re: f64, im: f64) -> Self {
        Self::new(Complex64::new(re, im))
    }

    /// The point `exp(i theta)` on the unit circle, reached by turning through `theta`.
    pub fn on_circle(theta: f64) -> Self {
        Self::from_parts(0.0, theta)
    }

    pub fn z(&self) -> Complex64 {
        self.w.exp()
    }

    pub fn invert(&self) -> Self {
        Self::new(-self.w)
    }

    /// Mirror image under complex conjugation of the projection.
    pub fn conj(&self) -> Self {
        Self::new(self.w.conj())
    }

    /// `z^a` on this sheet.
    pub fn power(&self, a: f64) -> Complex64 {
        (self.w * a).exp()
    }

    pub fn is_finite(&self) -> bool {
        self.w.re.is_finite() && self.w.im.is_finite()
    }

    /// Whether the point lies in the cut plane `C \ (-inf, 0]`.
    pub fn in_principal_sheet(&self) -> bool {
        self.w.im.abs() < PI
    }
}

pub fn invert(p: CoverPoint) -> CoverPoint {
    p.invert()
}

pub fn power(p: CoverPoint, a: f64) -> Complex64 {
    p.power(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerializedPoint {
    pub re_w: f64,
    pub im_w: f64,
}

impl From<CoverPoint> for SerializedPoint {
    fn from(p: CoverPoint) -> Self {
        Self { re_w: p.w.re, im_w: p.w.im }
    }
}

impl From<SerializedPoint> for CoverPoint {
    fn from(s: SerializedPoint) -> Self {
        CoverPoint::from_parts(s.re_w, s.im_w)
    }
}

impl Serialize for CoverPoint {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SerializedPoint::from(*self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoverPoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        SerializedPoint::deserialize(deserializer).map(Into::into)
    }
}

/// Straight segment in the log coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Complex64,
    pub end: Complex64,
    /// Suggested number of output samples along the segment.
    pub samples: usize,
}

impl Segment {
    pub fn delta(&self) -> Complex64 {
        self.end - self.start
    }

    pub fn at(&self, s: f64) -> Complex64 {
        self.start + self.delta() * s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverPath {
    segments: Vec<Segment>,
}

impl CoverPath {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidPath("path has no segments".into()));
        }
        for pair in segments.windows(2) {
            if pair[0].end != pair[1].start {
                return Err(Error::InvalidPath(format!("segment ends at {} but next starts at {}", pair[0].end, pair[1].start)));
            }
        }
        if segments.iter().any(|s| !(s.start.re.is_finite() && s.start.im.is_finite() && s.end.re.is_finite() && s.end.im.is_finite())) {
            return Err(Error::InvalidPath("non-finite vertex".into()));
        }
        Ok(Self { segments })
    }

    /// Polyline through the given vertices.
    pub fn through(points: &[CoverPoint], samples: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPath("need at least two vertices".into()));
        }
        Self::new(points.windows(2).map(|p| Segment { start: p[0].w, end: p[1].w, samples }).collect())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> CoverPoint {
        CoverPoint::new(self.segments[0].start)
    }

    pub fn end(&self) -> CoverPoint {
        CoverPoint::new(self.segments[self.segments.len() - 1].end)
    }

    /// The path traversed backwards.
    pub fn reversed(&self) -> Self {
        Self { segments: self.segments.iter().rev().map(|s| Segment { start: s.end, end: s.start, samples: s.samples }).collect() }
    }

    /// Position at the global parameter `s` in `[0, n_segments]`.
    pub fn at(&self, s: f64) -> CoverPoint {
        let n = self.segments.len();
        let k = (s.floor().max(0.0) as usize).min(n - 1);
        CoverPoint::new(self.segments[k].at(s - k as f64))
    }

    /// Sample points along the path following each segment's sampling hint.
    pub fn sample_points(&self) -> Vec<CoverPoint> {
        let mut out = vec![self.start()];
        for seg in &self.segments {
            let n = seg.samples.max(2);
            out.extend((1..n).map(|i| CoverPoint::new(seg.at(i as f64 / (n - 1) as f64))));
        }
        out
    }
}

/// Single straight segment in `w` from `from` to `to`.
///
/// A purely imaginary displacement projects to a circle arc, a real one to a
/// radial move.
pub fn arc(from: CoverPoint, to: CoverPoint, samples: usize) -> Result<CoverPath> {
    if samples < 2 {
        return Err(Error::InvalidPath(format!("samples must be >= 2, got {samples}")));
    }
    CoverPath::new(vec![Segment { start: from.w, end: to.w, samples }])
}

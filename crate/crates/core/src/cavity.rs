//! Geometry of the telescope-enhanced two-retroreflector cavity.
//!
//! Unfolded one-way path from the high reflector M1 to the output coupler M2:
//!
//! ```text
//! M1 --d1-- L1 --dg-- L3 --dt-- L4 --(f4 + dw + f2)-- L2 --d2-- M2
//! ```
//!
//! The gain medium sits at the shared pupil of L1 and L3, `d1 + f1` from M1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dd::{Dd, DdMatrix};
use crate::error::{Error, Result};
use crate::raymatrix::{compose_iter, thin_lens_unchecked, translation, RayMatrix};

/// Adjustable cavity parameters (five distances, four focal lengths).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    D1,
    D2,
    Dg,
    Dt,
    Dw,
    F1,
    F2,
    F3,
    F4,
}

impl Param {
    pub const DISTANCES: [Param; 5] = [Param::D1, Param::D2, Param::Dg, Param::Dt, Param::Dw];
    pub const FOCALS: [Param; 4] = [Param::F1, Param::F2, Param::F3, Param::F4];
    pub const ALL: [Param; 9] =
        [Param::D1, Param::D2, Param::Dg, Param::Dt, Param::Dw, Param::F1, Param::F2, Param::F3, Param::F4];

    pub fn name(self) -> &'static str {
        match self {
            Param::D1 => "d1",
            Param::D2 => "d2",
            Param::Dg => "dg",
            Param::Dt => "dt",
            Param::Dw => "dw",
            Param::F1 => "f1",
            Param::F2 => "f2",
            Param::F3 => "f3",
            Param::F4 => "f4",
        }
    }

    pub fn is_distance(self) -> bool {
        Param::DISTANCES.contains(&self)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid("param", format!("unknown parameter `{s}`")))
    }
}

/// All distances and focal lengths of the cavity, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// M1 to L1.
    pub d1: f64,
    /// L2 to M2.
    pub d2: f64,
    /// L1 to L3.
    pub dg: f64,
    /// L3 to L4.
    pub dt: f64,
    /// Working distance between the transmitter and receiver pupils.
    pub dw: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl Default for CavityGeometry {
    /// The reference design: `(d1, d2, dg, dt, dw) = (30, 30, 55, 85.4, 6000)`
    /// and `(f1, f2, f3, f4) = (30, 30, 25, 60)`.
    fn default() -> Self {
        CavityGeometry { d1: 30.0, d2: 30.0, dg: 55.0, dt: 85.4, dw: 6000.0, f1: 30.0, f2: 30.0, f3: 25.0, f4: 60.0 }
    }
}

impl CavityGeometry {
    /// Builds a geometry where `dg` is given as a deviation from the
    /// confocal spacing `f1 + f3`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_dg_deviation(
        d1: f64,
        d2: f64,
        delta_dg: f64,
        dt: f64,
        dw: f64,
        f1: f64,
        f2: f64,
        f3: f64,
        f4: f64,
    ) -> Result<Self> {
        let geom = CavityGeometry { d1, d2, dg: f1 + f3 + delta_dg, dt, dw, f1, f2, f3, f4 };
        geom.validate()?;
        Ok(geom)
    }

    /// Cavity without a telescope, modelled as a unit-magnification afocal
    /// telescope of focal length `f_tel` placed confocally behind L1.
    pub fn basic(d1: f64, d2: f64, dw: f64, f1: f64, f2: f64, f_tel: f64) -> Result<Self> {
        let geom = CavityGeometry { d1, d2, dg: f1 + f_tel, dt: 2.0 * f_tel, dw, f1, f2, f3: f_tel, f4: f_tel };
        geom.validate()?;
        Ok(geom)
    }

    /// Nominal design for a focal set: retroreflectors non-focusing
    /// (`d1 = f1`, `d2 = f2`), confocal `dg`, afocal `dt`.
    pub fn nominal(f1: f64, f2: f64, f3: f64, f4: f64, dw: f64) -> Self {
        CavityGeometry { d1: f1, d2: f2, dg: f1 + f3, dt: f3 + f4, dw, f1, f2, f3, f4 }
    }

    /// Multiplies every length except the working distance by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        CavityGeometry {
            d1: self.d1 * k,
            d2: self.d2 * k,
            dg: self.dg * k,
            dt: self.dt * k,
            dw: self.dw,
            f1: self.f1 * k,
            f2: self.f2 * k,
            f3: self.f3 * k,
            f4: self.f4 * k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in Param::ALL {
            let v = self.get(p);
            if !v.is_finite() {
                return Err(Error::invalid(p.name(), format!("must be finite, got {v}")));
            }
            if p.is_distance() && v < 0.0 {
                return Err(Error::invalid(p.name(), format!("distance must be non-negative, got {v}")));
            }
            if !p.is_distance() && v == 0.0 {
                return Err(Error::invalid(p.name(), "focal length must be nonzero"));
            }
        }
        Ok(())
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::D1 => self.d1,
            Param::D2 => self.d2,
            Param::Dg => self.dg,
            Param::Dt => self.dt,
            Param::Dw => self.dw,
            Param::F1 => self.f1,
            Param::F2 => self.f2,
            Param::F3 => self.f3,
            Param::F4 => self.f4,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::D1 => self.d1 = v,
            Param::D2 => self.d2 = v,
            Param::Dg => self.dg = v,
            Param::Dt => self.dt = v,
            Param::Dw => self.dw = v,
            Param::F1 => self.f1 = v,
            Param::F2 => self.f2 = v,
            Param::F3 => self.f3 = v,
            Param::F4 => self.f4 = v,
        }
    }

    pub fn with(&self, p: Param, v: f64) -> Self {
        let mut g = *self;
        g.set(p, v);
        g
    }

    /// `dg − (f1 + f3)`.
    pub fn delta_dg(&self) -> f64 {
        self.dg - (self.f1 + self.f3)
    }

    /// L4 to L2.
    pub fn free_space_length(&self) -> f64 {
        self.f4 + self.dw + self.f2
    }

    /// Position of the gain medium along the path from M1.
    pub fn gain_plane(&self) -> f64 {
        self.d1 + self.f1
    }

    pub fn telescope_magnification(&self) -> f64 {
        self.f4 / self.f3
    }

    pub fn total_path(&self) -> f64 {
        self.d1 + self.dg + self.dt + self.free_space_length() + self.d2
    }

    /// Position of a named element plane.
    pub fn plane(&self, plane: Plane) -> f64 {
        match plane {
            Plane::M1 => 0.0,
            Plane::L1 => self.d1,
            Plane::Gain => self.gain_plane(),
            Plane::L3 => self.d1 + self.dg,
            Plane::L4 => self.d1 + self.dg + self.dt,
            Plane::L2 => self.d1 + self.dg + self.dt + self.free_space_length(),
            Plane::M2 => self.total_path(),
        }
    }

    /// One-way element list M1 → M2 (excluding the mirrors), in propagation
    /// order.
    fn one_way_elements(&self) -> [RayMatrix; 9] {
        [
            translation(self.d1),
            thin_lens_unchecked(self.f1),
            translation(self.dg),
            thin_lens_unchecked(self.f3),
            translation(self.dt),
            thin_lens_unchecked(self.f4),
            translation(self.free_space_length()),
            thin_lens_unchecked(self.f2),
            translation(self.d2),
        ]
    }

    /// Round trip starting and ending at M1 without validating the geometry.
    pub(crate) fn round_trip_unchecked(&self) -> RayMatrix {
        let one_way = self.one_way_elements();
        let mirror = RayMatrix::IDENTITY;
        compose_iter(
            one_way
                .iter()
                .copied()
                .chain(std::iter::once(mirror))
                .chain(one_way.iter().rev().copied())
                .chain(std::iter::once(mirror)),
        )
    }

    /// Stability parameter without validating the geometry.
    pub(crate) fn g_unchecked(&self) -> f64 {
        self.round_trip_unchecked().half_trace()
    }

    /// g from the one-way matrix in double-double arithmetic. With mirrors
    /// acting as identity the round trip is the one-way matrix followed by
    /// its reverse, so `g = a·d + b·c`.
    pub(crate) fn g_extended(&self) -> f64 {
        let t = |v: f64| DdMatrix::translation(Dd::from_f64(v));
        let free = Dd::from_f64(self.f4) + Dd::from_f64(self.dw) + Dd::from_f64(self.f2);
        let chain = [
            t(self.d1),
            DdMatrix::thin_lens(self.f1),
            t(self.dg),
            DdMatrix::thin_lens(self.f3),
            t(self.dt),
            DdMatrix::thin_lens(self.f4),
            DdMatrix::translation(free),
            DdMatrix::thin_lens(self.f2),
            t(self.d2),
        ];
        let m = chain.iter().skip(1).fold(chain[0], |acc, &e| e * acc);
        (m.a * m.d + m.b * m.c).to_f64()
    }
}

/// Element planes along the one-way path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    M1,
    L1,
    Gain,
    L3,
    L4,
    L2,
    M2,
}

impl Plane {
    pub const ALL: [Plane; 7] = [Plane::M1, Plane::L1, Plane::Gain, Plane::L3, Plane::L4, Plane::L2, Plane::M2];
}

/// Round-trip matrix from M1 back to M1.
pub fn round_trip_matrix(geom: &CavityGeometry) -> Result<RayMatrix> {
    geom.validate()?;
    Ok(geom.round_trip_unchecked())
}

/// One free-space run terminated by a lens, or by M2 for the last one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: f64,
    pub lens_focal: Option<f64>,
}

/// Piecewise description of the one-way path used for beam-size evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLayout {
    pub segments: Vec<Segment>,
    /// Start of each segment; `starts[0] == 0`.
    pub starts: Vec<f64>,
    pub total: f64,
}

pub fn segment_layout(geom: &CavityGeometry) -> Result<SegmentLayout> {
    geom.validate()?;
    let segments = vec![
        Segment { length: geom.d1, lens_focal: Some(geom.f1) },
        Segment { length: geom.dg, lens_focal: Some(geom.f3) },
        Segment { length: geom.dt, lens_focal: Some(geom.f4) },
        Segment { length: geom.free_space_length(), lens_focal: Some(geom.f2) },
        Segment { length: geom.d2, lens_focal: None },
    ];
    let mut starts = Vec::with_capacity(segments.len());
    let mut z = 0.0;
    for s in &segments {
        starts.push(z);
        z += s.length;
    }
    Ok(SegmentLayout { segments, starts, total: z })
}

impl SegmentLayout {
    /// Transfer matrix from M1 to the plane at `z`. At a lens plane the
    /// lens itself is not yet applied (the segment is `z_k < z ≤ z_{k+1}`).
    pub fn matrix_to(&self, z: f64) -> Result<RayMatrix> {
        if !(0.0..=self.total).contains(&z) {
            return Err(Error::OutOfDomain { z, total: self.total });
        }
        let mut m = RayMatrix::IDENTITY;
        let mut start = 0.0;
        for (k, seg) in self.segments.iter().enumerate() {
            let end = self.starts.get(k + 1).copied().unwrap_or(self.total);
            if z <= end || k + 1 == self.segments.len() {
                return Ok(translation(z - start) * m);
            }
            m = translation(seg.length) * m;
            if let Some(f) = seg.lens_focal {
                m = thin_lens_unchecked(f) * m;
            }
            start = end;
        }
        unreachable!("segment list is never empty")
    }
}

/// Transfer matrix from M1 to position `z` along the one-way path.
pub fn propagation_matrix_to(geom: &CavityGeometry, z: f64) -> Result<RayMatrix> {
    segment_layout(geom)?.matrix_to(z)
}

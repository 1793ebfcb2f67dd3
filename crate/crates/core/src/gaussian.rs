//! Gaussian beam q-parameter algebra and the self-consistent cavity mode.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::{segment_layout, CavityGeometry};
use crate::error::{Error, Result};
use crate::raymatrix::RayMatrix;

/// Nd:YVO4 lasing wavelength, 1064 nm in millimetres.
pub const DEFAULT_WAVELENGTH_MM: f64 = 1.064e-3;

/// Complex beam parameter `q` (mm) at a given wavelength (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParam {
    pub q: Complex64,
    pub wavelength: f64,
}

impl BeamParam {
    pub fn new(q: Complex64, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::invalid("wavelength", format!("must be positive, got {wavelength}")));
        }
        let beam = BeamParam { q, wavelength };
        if !(beam.inverse().im < 0.0) {
            return Err(Error::invalid("q", format!("Im(1/q) must be negative, q = {q}")));
        }
        Ok(beam)
    }

    pub fn inverse(&self) -> Complex64 {
        self.q.inv()
    }

    /// 1/e² intensity radius of the fundamental mode.
    pub fn radius(&self) -> f64 {
        (-self.wavelength / (PI * self.inverse().im)).sqrt()
    }

    /// Wavefront radius of curvature; infinite at a waist.
    pub fn curvature_radius(&self) -> f64 {
        1.0 / self.inverse().re
    }
}

/// Applies the ABCD law `q' = (A q + B)/(C q + D)`.
pub fn abcd_transform(q_in: &BeamParam, m: &RayMatrix) -> Result<BeamParam> {
    let num = q_in.q * m.a + m.b;
    let den = q_in.q * m.c + m.d;
    if den.norm() == 0.0 || !den.is_finite() {
        return Err(Error::SingularTransform);
    }
    Ok(BeamParam { q: num / den, wavelength: q_in.wavelength })
}

/// Self-consistent fundamental mode at the reference plane of a round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub q0: BeamParam,
    pub g: f64,
    pub w00_at_m1: f64,
    pub round_trip: RayMatrix,
}

/// `w00 = sqrt(2λ|B| / (π·sqrt(4 − (A + D)²)))`.
pub fn radius_from_trace(m: &RayMatrix, wavelength: f64) -> f64 {
    let t = m.trace();
    (2.0 * wavelength * m.b.abs() / (PI * (4.0 - t * t).sqrt())).sqrt()
}

/// `w00 = sqrt(λ|B| / (π·sqrt(1 − g²)))`.
pub fn radius_from_g(m: &RayMatrix, wavelength: f64) -> f64 {
    let g = m.half_trace();
    (wavelength * m.b.abs() / (PI * (1.0 - g * g).sqrt())).sqrt()
}

/// Solves `q0 = (A q0 + B)/(C q0 + D)` and keeps the root with
/// `Im(1/q0) < 0`.
pub fn self_consistent_mode(m_rt: &RayMatrix, wavelength: f64) -> Result<ModeSolution> {
    if !(wavelength > 0.0) {
        return Err(Error::invalid("wavelength", format!("must be positive, got {wavelength}")));
    }
    if m_rt.b == 0.0 {
        return Err(Error::DegenerateImaging);
    }
    let g = m_rt.half_trace();
    if !(g.abs() < 1.0) {
        return Err(Error::UnstableResonator { g });
    }
    let t = m_rt.trace();
    let inv_q = Complex64::new(-(m_rt.a - m_rt.d) / (2.0 * m_rt.b), -(4.0 - t * t).sqrt() / (2.0 * m_rt.b.abs()));
    let q0 = BeamParam::new(inv_q.inv(), wavelength)?;
    Ok(ModeSolution { q0, g, w00_at_m1: radius_from_trace(m_rt, wavelength), round_trip: *m_rt })
}

/// Mode of a cavity geometry, referenced to M1.
pub fn cavity_mode(geom: &CavityGeometry, wavelength: f64) -> Result<ModeSolution> {
    let rt = crate::cavity::round_trip_matrix(geom)?;
    self_consistent_mode(&rt, wavelength)
}

/// Fundamental-mode radius at position `z` along the one-way path.
pub fn mode_radius_at(geom: &CavityGeometry, mode: &ModeSolution, z: f64) -> Result<f64> {
    let m = segment_layout(geom)?.matrix_to(z)?;
    Ok(abcd_transform(&mode.q0, &m)?.radius())
}

/// Multimode radius for a beam propagation factor `m_squared`.
pub fn multimode_radius(w00: f64, m_squared: f64) -> f64 {
    m_squared.sqrt() * w00
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub z: f64,
    pub w00: f64,
}

/// Fundamental-mode radius at `samples` evenly spaced planes from M1 to M2.
pub fn beam_profile(geom: &CavityGeometry, wavelength: f64, samples: usize) -> Result<Vec<ProfilePoint>> {
    if samples < 2 {
        return Err(Error::invalid("samples", format!("need at least 2 samples, got {samples}")));
    }
    let mode = cavity_mode(geom, wavelength)?;
    let layout = segment_layout(geom)?;
    let last = (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            let z = if i + 1 == samples { layout.total } else { layout.total * i as f64 / last };
            let m = layout.matrix_to(z)?;
            Ok(ProfilePoint { z, w00: abcd_transform(&mode.q0, &m)?.radius() })
        })
        .collect()
}

/// Scales every radius of a profile by `sqrt(m_squared)`.
pub fn scale_profile(profile: &[ProfilePoint], m_squared: f64) -> Vec<ProfilePoint> {
    profile.iter().map(|p| ProfilePoint { z: p.z, w00: multimode_radius(p.w00, m_squared) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::Plane;
    use crate::raymatrix::{thin_lens, translation};

    const LAMBDA: f64 = DEFAULT_WAVELENGTH_MM;

    #[test]
    fn transform_examples() {
        let q = BeamParam::new(Complex64::new(0.0, 10.0), LAMBDA).unwrap();
        assert_eq!(abcd_transform(&q, &RayMatrix::IDENTITY).unwrap(), q);
        let moved = abcd_transform(&q, &translation(5.0)).unwrap();
        assert_eq!(moved.q, Complex64::new(5.0, 10.0));

        // 1/q' = 1/q − 1/f = −0.01 − 0.02j, so q' = −20 + 40j.
        let q = BeamParam::new(Complex64::new(0.0, 50.0), LAMBDA).unwrap();
        let out = abcd_transform(&q, &thin_lens(100.0).unwrap()).unwrap();
        assert!((out.q - Complex64::new(-20.0, 40.0)).norm() < 1e-12);
        assert_eq!(out.wavelength, LAMBDA);
    }

    #[test]
    fn transform_rejects_vanishing_denominator() {
        let q = BeamParam { q: Complex64::new(1.0, 0.0), wavelength: LAMBDA };
        let m = RayMatrix::new(1.0, 1.0, -1.0, 1.0);
        assert_eq!(abcd_transform(&q, &m), Err(Error::SingularTransform));
    }

    #[test]
    fn beam_param_validation() {
        assert!(BeamParam::new(Complex64::new(0.0, -10.0), LAMBDA).is_err());
        assert!(BeamParam::new(Complex64::new(0.0, 10.0), 0.0).is_err());
        let q = BeamParam::new(Complex64::new(3.0, 4.0), LAMBDA).unwrap();
        assert!((q.curvature_radius() - 25.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_test_matrix_mode() {
        let m = RayMatrix::new(0.0, 100.0, -0.01, 0.0);
        let mode = self_consistent_mode(&m, LAMBDA).unwrap();
        assert!((mode.q0.inverse() - Complex64::new(0.0, -0.01)).norm() < 1e-15);
        // sqrt(100·1.064e-3/π), evaluated to 15 digits independently.
        assert!((mode.w00_at_m1 - 0.184033072815609).abs() < 1e-12);
        assert_eq!(mode.g, 0.0);
    }

    #[test]
    fn mode_errors() {
        let marginal = RayMatrix::new(1.0, 10.0, 0.0, 1.0);
        assert!(matches!(self_consistent_mode(&marginal, LAMBDA), Err(Error::UnstableResonator { .. })));
        let imaging = RayMatrix::new(0.5, 0.0, 0.3, 2.0);
        assert_eq!(self_consistent_mode(&imaging, LAMBDA), Err(Error::DegenerateImaging));
    }

    #[test]
    fn defaults_mode_reproduces_itself() {
        let geom = CavityGeometry::default();
        let mode = cavity_mode(&geom, LAMBDA).unwrap();
        let back = abcd_transform(&mode.q0, &mode.round_trip).unwrap();
        assert!((back.q - mode.q0.q).norm() <= 1e-9 * mode.q0.q.norm());
        assert!((mode_radius_at(&geom, &mode, 0.0).unwrap() - mode.w00_at_m1).abs() < 1e-15);
    }

    #[test]
    fn radius_continuous_across_lenses() {
        let geom = CavityGeometry::default();
        let mode = cavity_mode(&geom, LAMBDA).unwrap();
        for plane in [Plane::L1, Plane::L3, Plane::L4, Plane::L2] {
            let z = geom.plane(plane);
            let before = mode_radius_at(&geom, &mode, z).unwrap();
            let after = mode_radius_at(&geom, &mode, z + 1e-9).unwrap();
            assert!((before - after).abs() < 1e-9, "{plane:?}: {before} vs {after}");
        }
    }

    #[test]
    fn gain_radius_smallest_at_g_zero() {
        // g is linear in dt here, zero at dt = 85.3 mm.
        let at = |dt: f64| {
            let geom = CavityGeometry { dt, ..Default::default() };
            let mode = cavity_mode(&geom, LAMBDA).unwrap();
            mode_radius_at(&geom, &mode, geom.gain_plane()).unwrap()
        };
        let best = at(85.3);
        for i in 1..60 {
            let dt = 85.0 + 0.6 * i as f64 / 60.0;
            assert!(at(dt) >= best - 1e-12, "dt = {dt}");
        }
    }

    #[test]
    fn collimated_between_l1_and_l3() {
        for i in 1..40 {
            let dt = 85.0 + 0.6 * i as f64 / 40.0;
            let geom = CavityGeometry { dt, ..Default::default() };
            let mode = cavity_mode(&geom, LAMBDA).unwrap();
            let w = |p: Plane| mode_radius_at(&geom, &mode, geom.plane(p)).unwrap();
            let (l1, gm, l3) = (w(Plane::L1), w(Plane::Gain), w(Plane::L3));
            let hi = l1.max(gm).max(l3);
            let lo = l1.min(gm).min(l3);
            assert!(hi / lo - 1.0 < 0.02, "dt = {dt}: {l1} {gm} {l3}");
        }
    }

    #[test]
    fn profile_shape() {
        let geom = CavityGeometry::default();
        let two = beam_profile(&geom, LAMBDA, 2).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].z, 0.0);
        assert_eq!(two[1].z, geom.total_path());
        let mode = cavity_mode(&geom, LAMBDA).unwrap();
        assert_eq!(two[0].w00, mode.w00_at_m1);
        assert!(beam_profile(&geom, LAMBDA, 1).is_err());

        let prof = beam_profile(&geom, LAMBDA, 4001).unwrap();
        assert!(prof.windows(2).all(|w| w[0].z < w[1].z));
        let peak = prof.iter().max_by(|a, b| a.w00.total_cmp(&b.w00)).unwrap();
        assert!(peak.z > geom.plane(Plane::L4) && peak.z <= geom.plane(Plane::L2), "peak at {}", peak.z);
        // Small spots on both end mirrors, expanded beam in the long arm.
        let first = prof[0].w00;
        let last = prof.last().unwrap().w00;
        assert!(first < 0.2 * peak.w00 && last < 0.2 * peak.w00);
    }

    #[test]
    fn unstable_profile_is_an_error() {
        let geom = CavityGeometry { dt: 200.0, ..Default::default() };
        assert!(matches!(beam_profile(&geom, LAMBDA, 10), Err(Error::UnstableResonator { .. })));
    }

    #[test]
    fn multimode_scaling() {
        let geom = CavityGeometry::default();
        let prof = beam_profile(&geom, LAMBDA, 50).unwrap();
        let scaled = scale_profile(&prof, 2.25);
        for (p, s) in prof.iter().zip(&scaled) {
            assert_eq!(s.w00, 1.5 * p.w00);
        }
        assert_eq!(scale_profile(&prof, 1.0), prof);
    }
}

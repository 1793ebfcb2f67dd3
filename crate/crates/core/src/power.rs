//! Rigrod output power with the cavity loss budget and the aperture
//! diffraction factor at the gain medium.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{CavityGeometry, Param};
use crate::error::{Error, Result};
use crate::gaussian::{cavity_mode, mode_radius_at, multimode_radius};
use crate::stability::{retune_dt, solve_g_zero_default};

/// Nd:YVO4 saturation intensity (W/m²).
pub const DEFAULT_I_SAT_W_PER_M2: f64 = 1.1976e7;

/// Gain medium and pump. Lengths in mm, `i_sat` in W/mm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSpec {
    pub i_sat: f64,
    /// Active radius.
    pub a_g: f64,
    /// Thickness.
    pub l_g: f64,
    pub eta_c: f64,
    /// Pump power (W).
    pub p_in: f64,
    pub m_squared: f64,
    /// Gain-medium plane; `d1 + f1` when `None`.
    pub z_g: Option<f64>,
}

impl Default for GainSpec {
    /// Nd:YVO4 at 65 W pump.
    fn default() -> Self {
        GainSpec::from_si_saturation(DEFAULT_I_SAT_W_PER_M2, 2.5, 1.0, 0.439, 65.0)
    }
}

impl GainSpec {
    /// Builds a spec with the saturation intensity given in W/m².
    pub fn from_si_saturation(i_sat_w_per_m2: f64, a_g: f64, l_g: f64, eta_c: f64, p_in: f64) -> Self {
        GainSpec { i_sat: i_sat_w_per_m2 / 1e6, a_g, l_g, eta_c, p_in, m_squared: 1.0, z_g: None }
    }

    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.a_g * self.a_g * self.l_g
    }

    pub fn gain_plane(&self, geom: &CavityGeometry) -> f64 {
        self.z_g.unwrap_or_else(|| geom.gain_plane())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("i_sat", self.i_sat), ("a_g", self.a_g), ("l_g", self.l_g), ("eta_c", self.eta_c)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.p_in >= 0.0) || !self.p_in.is_finite() {
            return Err(Error::invalid("p_in", format!("must be non-negative, got {}", self.p_in)));
        }
        if !(self.m_squared >= 1.0) || !self.m_squared.is_finite() {
            return Err(Error::invalid("m_squared", format!("must be >= 1, got {}", self.m_squared)));
        }
        if let Some(z) = self.z_g {
            if !(z >= 0.0) {
                return Err(Error::invalid("z_g", format!("must be non-negative, got {z}")));
            }
        }
        Ok(())
    }
}

/// Number of AR-coating passes on each path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArCounts {
    /// Gain medium to the exterior through M2.
    pub n_2o: i32,
    /// Round trip gain medium to M1.
    pub n_1: i32,
    /// Round trip gain medium to M2.
    pub n_2: i32,
}

impl Default for ArCounts {
    fn default() -> Self {
        ArCounts { n_2o: 7, n_1: 6, n_2: 14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub t_ar: f64,
    pub r_m1: f64,
    pub r_m2: f64,
    /// Air absorption (m⁻¹).
    pub alpha_air: f64,
    pub ar_counts: ArCounts,
}

impl Default for LossBudget {
    fn default() -> Self {
        LossBudget { t_ar: 0.995, r_m1: 0.999, r_m2: 0.95, alpha_air: 1e-4, ar_counts: ArCounts::default() }
    }
}

impl LossBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_ar > 0.0 && self.t_ar <= 1.0) {
            return Err(Error::invalid("t_ar", format!("must lie in (0, 1], got {}", self.t_ar)));
        }
        for (name, v) in [("r_m1", self.r_m1), ("r_m2", self.r_m2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        if !(self.alpha_air >= 0.0) || !self.alpha_air.is_finite() {
            return Err(Error::invalid("alpha_air", format!("must be non-negative, got {}", self.alpha_air)));
        }
        Ok(())
    }
}

/// `T_diff = 1 − exp(−2 (a_g / w00)²)`.
pub fn diffraction_factor(a_g: f64, w00: f64) -> Result<f64> {
    if !(a_g > 0.0) {
        return Err(Error::invalid("a_g", format!("must be positive, got {a_g}")));
    }
    if !(w00 > 0.0) {
        return Err(Error::invalid("w00", format!("must be positive, got {w00}")));
    }
    let r = a_g / w00;
    Ok(-(-2.0 * r * r).exp_m1())
}

/// Effective output transmission and the two equivalent reflectivities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentParams {
    pub t_2o: f64,
    pub r_1: f64,
    pub r_2: f64,
}

/// Folds the loss budget into `(𝒯_2o, ℛ_1, ℛ_2)`. `dw` is in mm; air
/// absorption is applied per metre.
pub fn equivalent_params(budget: &LossBudget, t_diff1: f64, t_diff2: f64, dw: f64) -> EquivalentParams {
    let ArCounts { n_2o, n_1, n_2 } = budget.ar_counts;
    let t_air = (-budget.alpha_air * (dw * 1e-3)).exp();
    EquivalentParams {
        t_2o: budget.t_ar.powi(n_2o) * t_air * (1.0 - budget.r_m2),
        r_1: t_diff1 * budget.t_ar.powi(n_1) * budget.r_m1,
        r_2: t_diff2 * budget.t_ar.powi(n_2) * t_air * budget.r_m2,
    }
}

/// Rigrod output power (W), clamped at zero below threshold.
pub fn output_power(gain: &GainSpec, eq: &EquivalentParams) -> f64 {
    let rr = (eq.r_1 * eq.r_2).sqrt();
    let bracket = gain.l_g * gain.eta_c * gain.p_in / (gain.i_sat * gain.volume()) + rr.ln();
    if !(bracket > 0.0) {
        return 0.0;
    }
    let area = std::f64::consts::PI * gain.a_g * gain.a_g;
    let denom = (1.0 + (eq.r_2 / eq.r_1).sqrt()) * (1.0 - rr);
    (eq.t_2o * area * gain.i_sat / denom * bracket).max(0.0)
}

/// How dt is set at each working distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtTuning {
    /// Keep the template's dt.
    Fixed,
    /// Move dt to g = 0 at every distance.
    RetunePerDistance,
    /// Fix dt at the g = 0 point of the given design distance (mm).
    DesignDistance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub dw: f64,
    pub dt: f64,
    pub g: f64,
    /// Mode radius at the gain plane including M²; `None` when unstable.
    pub w00_gain: Option<f64>,
    pub t_diff: Option<f64>,
    pub p_out: f64,
    pub stable: bool,
}

fn design_dt(geom: &CavityGeometry, tuning: DtTuning) -> Result<Option<f64>> {
    match tuning {
        DtTuning::DesignDistance(dw_star) => Ok(Some(solve_g_zero_default(&geom.with(Param::Dw, dw_star), Param::Dt)?)),
        _ => Ok(None),
    }
}

/// Output power at a single geometry. Unstable geometries give a flagged
/// row with zero power.
pub fn power_at(geom: &CavityGeometry, gain: &GainSpec, budget: &LossBudget, wavelength: f64) -> PowerRow {
    let g = geom.g_unchecked();
    let unstable = PowerRow { dw: geom.dw, dt: geom.dt, g, w00_gain: None, t_diff: None, p_out: 0.0, stable: false };
    let w = cavity_mode(geom, wavelength)
        .and_then(|mode| mode_radius_at(geom, &mode, gain.gain_plane(geom)))
        .map(|w| multimode_radius(w, gain.m_squared));
    let w = match w {
        Ok(w) => w,
        Err(e) => {
            log::debug!("no mode at dw = {}: {e}", geom.dw);
            return unstable;
        }
    };
    let t_diff = match diffraction_factor(gain.a_g, w) {
        Ok(t) => t,
        Err(_) => return unstable,
    };
    let eq = equivalent_params(budget, t_diff, t_diff, geom.dw);
    PowerRow { w00_gain: Some(w), t_diff: Some(t_diff), p_out: output_power(gain, &eq), stable: true, ..unstable }
}

/// Output power at each working distance.
pub fn power_vs_distance(
    geom: &CavityGeometry,
    gain: &GainSpec,
    budget: &LossBudget,
    dw_values: &[f64],
    tuning: DtTuning,
    wavelength: f64,
) -> Result<Vec<PowerRow>> {
    geom.validate()?;
    gain.validate()?;
    budget.validate()?;
    let fixed_dt = design_dt(geom, tuning)?;
    Ok(dw_values
        .par_iter()
        .map(|&dw| {
            let mut g = geom.with(Param::Dw, dw);
            if let Some(dt) = fixed_dt {
                g.dt = dt;
            } else if tuning == DtTuning::RetunePerDistance {
                match retune_dt(&g) {
                    Ok(r) => g = r,
                    Err(e) => log::debug!("dt retune failed at dw = {dw}: {e}"),
                }
            }
            power_at(&g, gain, budget, wavelength)
        })
        .collect())
}

/// Largest distance in `dw_values` with positive output power.
pub fn max_distance(rows: &[PowerRow]) -> Option<f64> {
    rows.iter().filter(|r| r.p_out > 0.0).map(|r| r.dw).fold(None, |a, d| Some(a.map_or(d, |a: f64| a.max(d))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub a_g: f64,
    pub m_tel: f64,
    pub p_out: f64,
    pub stable: bool,
}

/// Output power over a grid of gain radius and telescope magnification at a
/// fixed distance. For each magnification `f4 = M_tel·f3` and dt is moved to
/// g = 0. Rows iterate `a_g` fastest.
pub fn power_surface(
    geom: &CavityGeometry,
    gain: &GainSpec,
    budget: &LossBudget,
    dw: f64,
    a_g_values: &[f64],
    m_tel_values: &[f64],
    wavelength: f64,
) -> Result<Vec<SurfacePoint>> {
    gain.validate()?;
    budget.validate()?;
    let per_mtel: Vec<Vec<SurfacePoint>> = m_tel_values
        .par_iter()
        .map(|&m_tel| {
            let base = CavityGeometry { f4: m_tel * geom.f3, dt: geom.f3 * (1.0 + m_tel), dw, ..*geom };
            let tuned = retune_dt(&base);
            a_g_values
                .iter()
                .map(|&a_g| {
                    let row = match &tuned {
                        Ok(gm) if a_g > 0.0 => power_at(gm, &GainSpec { a_g, ..*gain }, budget, wavelength),
                        _ => PowerRow {
                            dw,
                            dt: base.dt,
                            g: f64::NAN,
                            w00_gain: None,
                            t_diff: None,
                            p_out: 0.0,
                            stable: false,
                        },
                    };
                    SurfacePoint { a_g, m_tel, p_out: row.p_out, stable: row.stable }
                })
                .collect()
        })
        .collect();
    Ok(per_mtel.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::DEFAULT_WAVELENGTH_MM;
    use approx::assert_relative_eq;

    #[test]
    fn diffraction_examples() {
        assert_relative_eq!(diffraction_factor(1.0, 1.0).unwrap(), 0.864664716763387, max_relative = 1e-14);
        assert_eq!(diffraction_factor(10.0, 1.0).unwrap(), 1.0);
        assert!(diffraction_factor(0.0, 1.0).is_err());
        assert!(diffraction_factor(1.0, -1.0).is_err());
    }

    #[test]
    fn ar_products() {
        let b = LossBudget::default();
        let eq = equivalent_params(&LossBudget { r_m1: 0.5, r_m2: 0.5, alpha_air: 0.0, ..b }, 1.0, 1.0, 0.0);
        assert_relative_eq!(eq.r_1, 0.5 * 0.970372509356266, max_relative = 1e-13);
        assert_relative_eq!(eq.r_2, 0.5 * 0.932230119415405, max_relative = 1e-13);
        assert_relative_eq!(eq.t_2o, 0.5 * 0.965520646809484, max_relative = 1e-13);
    }

    #[test]
    fn air_transmission() {
        let b = LossBudget { t_ar: 1.0, r_m2: 0.5, ..Default::default() };
        let eq = equivalent_params(&b, 1.0, 1.0, 6000.0);
        assert_relative_eq!(eq.t_2o, 0.5 * 0.999400179964005, max_relative = 1e-13);
    }

    #[test]
    fn lossless_limit() {
        let b = LossBudget { t_ar: 1.0, ..Default::default() };
        let eq = equivalent_params(&b, 1.0, 1.0, 0.0);
        assert_eq!(eq.r_1, b.r_m1);
        assert_eq!(eq.r_2, b.r_m2);
    }

    #[test]
    fn rigrod_reference_value() {
        let gain = GainSpec::default();
        let eq = equivalent_params(&LossBudget::default(), 1.0, 1.0, 6000.0);
        assert_relative_eq!(output_power(&gain, &eq), 3.524124839502638, max_relative = 1e-9);
    }

    #[test]
    fn zero_pump_gives_zero() {
        let gain = GainSpec { p_in: 0.0, ..Default::default() };
        let eq = equivalent_params(&LossBudget::default(), 1.0, 1.0, 6000.0);
        assert_eq!(output_power(&gain, &eq), 0.0);
    }

    #[test]
    fn threshold_continuity() {
        let budget = LossBudget::default();
        let eq = equivalent_params(&budget, 1.0, 1.0, 6000.0);
        let g = GainSpec::default();
        // Pump power at which the bracket vanishes.
        let p_th = -(eq.r_1 * eq.r_2).sqrt().ln() * g.i_sat * g.volume() / (g.l_g * g.eta_c);
        let above = output_power(&GainSpec { p_in: p_th * (1.0 + 1e-9), ..g }, &eq);
        let below = output_power(&GainSpec { p_in: p_th * (1.0 - 1e-9), ..g }, &eq);
        assert_eq!(below, 0.0);
        assert!((0.0..1e-6).contains(&above));
    }

    #[test]
    fn unit_conversion_is_bit_identical() {
        let a = GainSpec::from_si_saturation(1.1976e7, 2.5, 1.0, 0.439, 65.0);
        let b = GainSpec { i_sat: 11.976, ..a };
        let eq = equivalent_params(&LossBudget::default(), 0.99, 0.99, 6000.0);
        assert_eq!(output_power(&a, &eq).to_bits(), output_power(&b, &eq).to_bits());
    }

    #[test]
    fn unstable_rows_are_flagged() {
        let geom = CavityGeometry { dt: 200.0, ..Default::default() };
        let rows = power_vs_distance(
            &geom,
            &GainSpec::default(),
            &LossBudget::default(),
            &[6000.0],
            DtTuning::Fixed,
            DEFAULT_WAVELENGTH_MM,
        )
        .unwrap();
        assert!(!rows[0].stable);
        assert_eq!(rows[0].p_out, 0.0);
        assert!(rows[0].t_diff.is_none());
    }

    #[test]
    fn larger_magnification_keeps_low_loss_longer() {
        let dws: Vec<f64> = (1..=200).map(|k| 1000.0 * k as f64).collect();
        let first_lossy = |f4: f64| {
            let geom = CavityGeometry { f4, dt: 25.0 + f4, ..Default::default() };
            let rows = power_vs_distance(
                &geom,
                &GainSpec::default(),
                &LossBudget::default(),
                &dws,
                DtTuning::DesignDistance(20_000.0),
                DEFAULT_WAVELENGTH_MM,
            )
            .unwrap();
            rows.iter().find(|r| r.t_diff.is_none_or(|t| t < 0.99)).map(|r| r.dw).unwrap_or(f64::INFINITY)
        };
        assert!(first_lossy(100.0) > first_lossy(60.0));
    }

    fn surface(m_tel: &[f64], a_g: &[f64]) -> Vec<SurfacePoint> {
        power_surface(
            &CavityGeometry::default(),
            &GainSpec::default(),
            &LossBudget::default(),
            100_000.0,
            a_g,
            m_tel,
            DEFAULT_WAVELENGTH_MM,
        )
        .unwrap()
    }

    #[test]
    fn surface_has_interior_maximum_in_gain_radius() {
        let a_g: Vec<f64> = (1..=60).map(|k| 0.1 * k as f64).collect();
        for m in [6.0, 8.0, 10.0] {
            let p: Vec<f64> = surface(&[m], &a_g).iter().map(|s| s.p_out).collect();
            let (imax, pmax) = p.iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            assert!(imax > 0 && imax < p.len() - 1, "M_tel = {m}");
            assert!(p[0] < pmax && *p.last().unwrap() < pmax);
            assert_eq!(*p.last().unwrap(), 0.0);
        }
    }

    #[test]
    fn surface_rows_iterate_gain_radius_fastest() {
        let pts = surface(&[6.0, 8.0], &[1.0, 2.0, 3.0]);
        let keys: Vec<(f64, f64)> = pts.iter().map(|s| (s.m_tel, s.a_g)).collect();
        assert_eq!(keys, [(6.0, 1.0), (6.0, 2.0), (6.0, 3.0), (8.0, 1.0), (8.0, 2.0), (8.0, 3.0)]);
    }

    #[test]
    fn small_gain_radius_limit() {
        // As a_g → 0 the pump density diverges while the losses grow only
        // logarithmically, so P_out tends to T_2o·η_c·P_in / (1 + √(ℛ_2/ℛ_1)).
        let gain = GainSpec { a_g: 1e-4, ..Default::default() };
        let budget = LossBudget::default();
        let geom = retune_dt(&CavityGeometry { f4: 100.0, dt: 125.0, dw: 100_000.0, ..Default::default() }).unwrap();
        let row = power_at(&geom, &gain, &budget, DEFAULT_WAVELENGTH_MM);
        let t = row.t_diff.unwrap();
        assert!(t < 1e-6);
        let eq = equivalent_params(&budget, t, t, geom.dw);
        let limit = eq.t_2o * gain.eta_c * gain.p_in / (1.0 + (eq.r_2 / eq.r_1).sqrt());
        assert!((row.p_out - limit).abs() < 1e-3 * limit, "{} vs {limit}", row.p_out);
        assert!(row.p_out > 0.0);
    }
}

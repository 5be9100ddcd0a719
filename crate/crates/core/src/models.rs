//! Averaged and closed-form models of the charger and inverter stages.
//!
//! The rectifier and boost charger are described by per-interval state-space
//! models (state 1 is the inductor current, state 2 the capacitor voltage).
//! The inverter is reduced to its steady-state switching-converter relations.

use crate::error::{arg, Result};
use crate::sstf::{average_models, RationalTransferFunction, StateSpaceModel};

/// Diode bridge LC output filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierParams {
    /// Filter inductance (H).
    pub l_r: f64,
    /// Filter capacitance (F).
    pub c_r: f64,
}

impl RectifierParams {
    pub fn new(l_r: f64, c_r: f64) -> Result<Self> {
        let p = Self { l_r, c_r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("l_r", self.l_r)?;
        positive("c_r", self.c_r)
    }
}

/// Boost charger components and switching settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    /// Boost inductance (H).
    pub l_c: f64,
    /// Output capacitance (F).
    pub c_c: f64,
    /// Equivalent charging load (Ω).
    pub r_c: f64,
    /// Switch duty ratio.
    pub duty: f64,
    /// Switching frequency (Hz).
    pub f_sw: f64,
}

impl BoostParams {
    pub fn new(l_c: f64, c_c: f64, r_c: f64, duty: f64, f_sw: f64) -> Result<Self> {
        let p = Self {
            l_c,
            c_c,
            r_c,
            duty,
            f_sw,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("l_c", self.l_c)?;
        positive("c_c", self.c_c)?;
        positive("r_c", self.r_c)?;
        positive("f_sw", self.f_sw)?;
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return arg(format!("boost duty must lie in (0, 1), got {}", self.duty));
        }
        Ok(())
    }
}

/// Push-pull inverter reduced to an equivalent two-interval switch model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterParams {
    /// Transformer turns ratio, secondary over one primary half.
    pub n: f64,
    /// Duty ratio of the first switch leg.
    pub duty: f64,
    /// On-state resistance of a conducting leg (Ω).
    pub r_on: f64,
    /// Input port resistance `V_i / I_i` (Ω).
    pub r_i: f64,
    /// Output load resistance (Ω).
    pub r_o: f64,
    /// Switching frequency (Hz).
    pub f_sw: f64,
}

impl InverterParams {
    pub fn validate(&self) -> Result<()> {
        positive("n", self.n)?;
        positive("r_i", self.r_i)?;
        positive("r_o", self.r_o)?;
        positive("f_sw", self.f_sw)?;
        if !(self.r_on >= 0.0 && self.r_on.is_finite()) {
            return arg(format!("r_on must be non-negative, got {}", self.r_on));
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return arg(format!("inverter duty must lie in (0, 1], got {}", self.duty));
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        arg(format!("{name} must be positive and finite, got {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subinterval {
    /// Switch closed, diode blocking (`d T` interval).
    On,
    /// Switch open, diode conducting (`(1 - d) T` interval).
    Off,
}

/// Rectifier LC model for one half cycle of the input. The negative half
/// differs only in the sign of the input map.
pub fn rectifier_state_space(p: &RectifierParams, polarity: Polarity) -> Result<StateSpaceModel> {
    p.validate()?;
    let sign = match polarity {
        Polarity::Positive => 1.0,
        Polarity::Negative => -1.0,
    };
    StateSpaceModel::from_rows(
        &[&[0.0, -1.0 / p.l_r], &[1.0 / p.c_r, 0.0]],
        &[&[sign / p.l_r], &[0.0]],
        &[&[0.0, 1.0]],
        &[&[0.0]],
    )
}

/// `1 / (1 + s² L_r C_r)`, the common magnitude of both half-cycle responses.
pub fn rectifier_tf(p: &RectifierParams) -> Result<RationalTransferFunction> {
    p.validate()?;
    RationalTransferFunction::new(vec![1.0], vec![1.0, 0.0, p.l_r * p.c_r])
}

pub fn boost_state_space(p: &BoostParams, interval: Subinterval) -> Result<StateSpaceModel> {
    p.validate()?;
    let rc = -1.0 / (p.r_c * p.c_c);
    let a: [&[f64]; 2] = match interval {
        Subinterval::On => [&[0.0, 0.0], &[0.0, rc]],
        Subinterval::Off => [&[0.0, -1.0 / p.l_c], &[1.0 / p.c_c, rc]],
    };
    StateSpaceModel::from_rows(&a, &[&[1.0 / p.l_c], &[0.0]], &[&[0.0, 1.0]], &[&[0.0]])
}

/// Duty-weighted average of the two boost subinterval models.
pub fn boost_averaged_state_space(p: &BoostParams) -> Result<StateSpaceModel> {
    average_models(&[
        (boost_state_space(p, Subinterval::On)?, p.duty),
        (boost_state_space(p, Subinterval::Off)?, 1.0 - p.duty),
    ])
}

/// `(1 - d) / (s² L_c C_c + s L_c / R_c + (1 - d)²)`.
pub fn boost_averaged_tf(p: &BoostParams) -> Result<RationalTransferFunction> {
    p.validate()?;
    let k = 1.0 - p.duty;
    RationalTransferFunction::new(vec![k], vec![k * k, p.l_c / p.r_c, p.l_c * p.c_c])
}

/// Rectifier followed by the averaged boost converter.
pub fn charger_tf(r: &RectifierParams, b: &BoostParams) -> Result<RationalTransferFunction> {
    Ok(rectifier_tf(r)?.series(&boost_averaged_tf(b)?))
}

/// Average inverter output voltage `n d (V_i - I_i R_on)`.
pub fn inverter_avg_output(p: &InverterParams, v_i: f64, i_i: f64) -> Result<f64> {
    p.validate()?;
    check_input_port(v_i, i_i, false)?;
    Ok(p.n * p.duty * (v_i - i_i * p.r_on))
}

/// Duty-weighted average of the output inductor voltage over one switching
/// period, using the first-leg and second-leg interval voltages
/// `n V_i - n I_i R_on - V_o` and `-n V_i + n I_i R_on - V_o`.
pub fn volt_second_residual(p: &InverterParams, v_i: f64, i_i: f64, v_o: f64) -> f64 {
    let drive = p.n * (v_i - i_i * p.r_on);
    p.duty * (drive - v_o) + (1.0 - p.duty) * (-drive - v_o)
}

/// `n d (1 - R_on / R_i)`.
pub fn inverter_gain(p: &InverterParams) -> Result<f64> {
    p.validate()?;
    Ok(p.n * p.duty * (1.0 - p.r_on / p.r_i))
}

/// Inverter efficiency figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterEfficiency {
    /// `n² d² (V_i - I_i R_on)² / (R_o V_i I_i) × 100`.
    pub percent: f64,
    /// Set when `percent` exceeds 100, i.e. the supplied port values are not
    /// mutually consistent with a passive inverter.
    pub above_unity: bool,
    /// Output power over `V_i R_i` × 100, the input-power form written with the
    /// port resistance in place of the port current. Dimensionally this is
    /// not a ratio of powers; it is reported for comparison only.
    pub percent_port_resistance_form: f64,
}

pub fn inverter_efficiency(p: &InverterParams, v_i: f64, i_i: f64) -> Result<InverterEfficiency> {
    p.validate()?;
    check_input_port(v_i, i_i, true)?;
    let v_o = p.n * p.duty * (v_i - i_i * p.r_on);
    let p_o = v_o * v_o / p.r_o;
    let percent = p_o / (v_i * i_i) * 100.0;
    Ok(InverterEfficiency {
        percent,
        above_unity: percent > 100.0,
        percent_port_resistance_form: p_o / (v_i * p.r_i) * 100.0,
    })
}

fn check_input_port(v_i: f64, i_i: f64, strict_current: bool) -> Result<()> {
    if !(v_i > 0.0 && v_i.is_finite()) {
        return arg(format!("input voltage must be positive, got {v_i}"));
    }
    let current_ok = if strict_current { i_i > 0.0 } else { i_i >= 0.0 };
    if !(current_ok && i_i.is_finite()) {
        return arg(format!("input current out of range: {i_i}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConductionMode {
    Continuous,
    Discontinuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcmCheck {
    pub mode: ConductionMode,
    /// Average inductor current minus half the peak-to-peak ripple (A).
    pub margin: f64,
    /// Steady-state average inductor current (A).
    pub avg_current: f64,
    /// Half the peak-to-peak inductor ripple (A).
    pub half_ripple: f64,
}

/// Steady-state continuous-conduction test for the boost stage.
///
/// `I_L = V_out / ((1 - d) R_c)` with `V_out = V_in / (1 - d)`, and the
/// half ripple is `V_in d / (2 L_c f_sw)`. Conduction is continuous when the
/// average exceeds the half ripple.
pub fn ccm_check(p: &BoostParams, v_in: f64) -> Result<CcmCheck> {
    p.validate()?;
    let k = 1.0 - p.duty;
    let v_out = v_in / k;
    let avg_current = v_out / (k * p.r_c);
    let half_ripple = v_in * p.duty / (2.0 * p.l_c * p.f_sw);
    let margin = avg_current - half_ripple;
    Ok(CcmCheck {
        mode: if margin > 0.0 {
            ConductionMode::Continuous
        } else {
            ConductionMode::Discontinuous
        },
        margin,
        avg_current,
        half_ripple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sstf::tf_from_state_space;

    fn rect() -> RectifierParams {
        RectifierParams::new(0.1e-3, 500e-6).unwrap()
    }

    fn boost(duty: f64) -> BoostParams {
        BoostParams::new(0.95e-3, 47e-6, 10.0, duty, 40e3).unwrap()
    }

    fn inverter(n: f64, duty: f64, r_on: f64, r_i: f64, r_o: f64) -> InverterParams {
        InverterParams {
            n,
            duty,
            r_on,
            r_i,
            r_o,
            f_sw: 50.0,
        }
    }

    #[test]
    fn rectifier_matrices() {
        let pos = rectifier_state_space(&rect(), Polarity::Positive).unwrap();
        let neg = rectifier_state_space(&rect(), Polarity::Negative).unwrap();
        let a = pos.a();
        assert!((a[(0, 1)] + 1e4).abs() < 1e-9);
        assert!((a[(1, 0)] - 2e3).abs() < 1e-9);
        assert_eq!(a[(0, 0)], 0.0);
        assert_eq!(a[(1, 1)], 0.0);
        assert!((pos.b()[(0, 0)] - 1e4).abs() < 1e-9);
        assert_eq!(neg.b(), &(-pos.b()));
        assert_eq!(neg.a(), pos.a());
        assert_eq!(neg.c(), pos.c());
        assert_eq!(pos.c()[(0, 1)], 1.0);
        assert_eq!(pos.d()[(0, 0)], 0.0);
    }

    #[test]
    fn rectifier_tf_matches_extraction() {
        let tf = rectifier_tf(&rect()).unwrap();
        assert_eq!(tf.den()[0], 1.0);
        assert_eq!(tf.den()[1], 0.0);
        assert!((tf.den()[2] - 5e-8).abs() < 1e-22);
        assert_eq!(tf.dc_gain().unwrap(), 1.0);
        let ss = rectifier_state_space(&rect(), Polarity::Positive).unwrap();
        let extracted = tf_from_state_space(&ss, 0, 0).unwrap();
        assert!(extracted.approx_eq(&tf, 1e-12));
        assert_eq!(extracted.den()[1], 0.0);

        let unit = rectifier_tf(&RectifierParams::new(2.0, 0.5).unwrap()).unwrap();
        assert_eq!(unit.den(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn boost_subinterval_matrices() {
        let p = boost(0.4);
        let on = boost_state_space(&p, Subinterval::On).unwrap();
        let off = boost_state_space(&p, Subinterval::Off).unwrap();
        let rc = -1.0 / (p.r_c * p.c_c);
        assert_eq!(on.a()[(0, 0)], 0.0);
        assert_eq!(on.a()[(0, 1)], 0.0);
        assert_eq!(on.a()[(1, 0)], 0.0);
        assert_eq!(on.a()[(1, 1)], rc);
        assert_eq!(off.a()[(0, 1)], -1.0 / p.l_c);
        assert_eq!(off.a()[(1, 0)], 1.0 / p.c_c);
        assert_eq!(on.b(), off.b());
        assert_eq!(on.b()[(0, 0)], 1.0 / p.l_c);
    }

    #[test]
    fn averaged_boost_matrix() {
        let p = boost(0.4);
        let avg = boost_averaged_state_space(&p).unwrap();
        let a = avg.a();
        assert!((a[(0, 1)] + 0.6 / p.l_c).abs() < 1e-9);
        assert!((a[(1, 0)] - 0.6 / p.c_c).abs() < 1e-6);
        assert!((a[(1, 1)] + 1.0 / (p.r_c * p.c_c)).abs() < 1e-9);
        assert_eq!(a[(0, 0)], 0.0);
    }

    #[test]
    fn boost_tf_coefficients() {
        let tf = boost_averaged_tf(&boost(0.5)).unwrap();
        let den = tf.den();
        assert!((den[0] - 0.25).abs() < 1e-15);
        assert!((den[1] - 9.5e-5).abs() < 1e-18);
        assert!((den[2] - 4.465e-8).abs() < 1e-21);
        assert!((tf.dc_gain().unwrap() - 2.0).abs() < 1e-12);

        let near_zero = boost_averaged_tf(&boost(1e-12)).unwrap();
        let limit = RationalTransferFunction::new(vec![1.0], vec![1.0, 0.95e-4, 4.465e-8]).unwrap();
        assert!(near_zero.approx_eq(&limit, 1e-9));
    }

    #[test]
    fn charger_product() {
        let tf = charger_tf(&rect(), &boost(0.5)).unwrap();
        assert_eq!(tf.den_degree(), 4);
        assert_eq!(tf.num_degree(), 0);
        assert!((tf.dc_gain().unwrap() - 2.0).abs() < 1e-12);
        let s = num_complex::Complex64::new(0.0, 2.0 * std::f64::consts::PI * 50.0);
        let product = rectifier_tf(&rect()).unwrap().evaluate(s).unwrap()
            * boost_averaged_tf(&boost(0.5)).unwrap().evaluate(s).unwrap();
        assert!((tf.evaluate(s).unwrap() - product).norm() < 1e-9);
    }

    #[test]
    fn inverter_output_examples() {
        let n = 230.0 / 12.0;
        let full = inverter(n, 1.0, 0.0, 1.0, 500.0);
        assert!((inverter_avg_output(&full, 12.0, 1.0).unwrap() - 230.0).abs() < 1e-12);
        let half = inverter(1.0, 0.5, 0.0, 1.0, 500.0);
        assert_eq!(inverter_avg_output(&half, 12.0, 0.0).unwrap(), 6.0);
        let lossy = inverter(2.0, 0.5, 3.0, 1.0, 500.0);
        assert_eq!(inverter_avg_output(&lossy, 12.0, 4.0).unwrap(), 0.0);
        assert!(inverter_avg_output(&half, 0.0, 1.0).is_err());
    }

    #[test]
    fn inverter_gain_examples() {
        let n = 19.1667;
        assert_eq!(inverter_gain(&inverter(n, 0.7, 0.0, 2.0, 500.0)).unwrap(), n * 0.7);
        assert_eq!(inverter_gain(&inverter(n, 0.7, 2.0, 2.0, 500.0)).unwrap(), 0.0);
        let g = inverter_gain(&inverter(n, 0.5, 0.1, 1.0, 500.0)).unwrap();
        assert!((g - 8.625015).abs() < 1e-9);
    }

    #[test]
    fn inverter_efficiency_examples() {
        let unit = inverter_efficiency(&inverter(1.0, 1.0, 0.0, 5.0, 5.0), 10.0, 2.0).unwrap();
        assert!((unit.percent - 100.0).abs() < 1e-12);
        assert!(!unit.above_unity);
        let zero = inverter_efficiency(&inverter(1.0, 1.0, 5.0, 2.0, 5.0), 10.0, 2.0).unwrap();
        assert_eq!(zero.percent, 0.0);
        let quarter = inverter_efficiency(&inverter(2.0, 0.5, 0.0, 1.0, 4.0), 12.0, 12.0).unwrap();
        assert!((quarter.percent - 25.0).abs() < 1e-12);
        // Port values inconsistent with the load: flagged rather than clamped.
        let over = inverter_efficiency(&inverter(2.0, 1.0, 0.0, 4.0, 1.0), 12.0, 3.0).unwrap();
        assert!(over.above_unity);
        assert!(over.percent > 100.0);
        assert!(inverter_efficiency(&unit_params(), 12.0, 0.0).is_err());
    }

    fn unit_params() -> InverterParams {
        inverter(1.0, 1.0, 0.0, 1.0, 1.0)
    }

    #[test]
    fn ccm_examples() {
        let c = ccm_check(&boost(0.5), 12.0).unwrap();
        assert_eq!(c.mode, ConductionMode::Continuous);
        assert!((c.avg_current - 4.8).abs() < 1e-12);
        assert!((c.half_ripple - 0.078947).abs() < 1e-6);

        let open = BoostParams::new(0.95e-3, 47e-6, 1e12, 0.5, 40e3).unwrap();
        assert_eq!(ccm_check(&open, 12.0).unwrap().mode, ConductionMode::Discontinuous);

        let idle = BoostParams::new(0.95e-3, 47e-6, 10.0, 1e-9, 40e3).unwrap();
        let c = ccm_check(&idle, 12.0).unwrap();
        assert!((c.margin - 1.2).abs() < 1e-6);
    }

    #[test]
    fn parameter_validation() {
        assert!(RectifierParams::new(0.0, 1.0).is_err());
        assert!(BoostParams::new(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(BoostParams::new(1.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(inverter(1.0, 0.0, 0.0, 1.0, 1.0).validate().is_err());
        assert!(inverter(1.0, 0.5, -1.0, 1.0, 1.0).validate().is_err());
    }
}

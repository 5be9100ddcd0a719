//! Harmonic content, THD, RMS and power-factor measurements.
//!
//! Harmonics are evaluated by a direct Fourier sum at integer multiples of
//! the fundamental over a rectangular window holding a whole number of
//! fundamental periods, so a periodic steady state has no leakage.
//! Magnitudes use the peak-amplitude convention.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{arg, Error, Result};
use crate::switchsim::waveform::{active_window, Waveform};

pub const DEFAULT_MAX_ORDER: usize = 13;
pub const DEFAULT_CYCLES: usize = 5;

/// Peak amplitude and phase of each harmonic order `1..=max_order`.
///
/// Phases follow the cosine convention: order `k` contributes
/// `H_k cos(2π k f0 t + φ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    pub f0: f64,
    pub magnitudes: BTreeMap<usize, f64>,
    pub phases: BTreeMap<usize, f64>,
}

impl HarmonicSpectrum {
    /// Spectrum from `(order, peak magnitude)` pairs with zero phase.
    pub fn from_magnitudes(f0: f64, mags: &[(usize, f64)]) -> Result<Self> {
        let mut magnitudes = BTreeMap::new();
        let mut phases = BTreeMap::new();
        for &(k, h) in mags {
            if k == 0 {
                return arg("harmonic orders start at 1");
            }
            if !(h >= 0.0) {
                return arg(format!("harmonic magnitude must be non-negative, got {h}"));
            }
            magnitudes.insert(k, h);
            phases.insert(k, 0.0);
        }
        Ok(Self {
            f0,
            magnitudes,
            phases,
        })
    }

    pub fn magnitude(&self, order: usize) -> f64 {
        self.magnitudes.get(&order).copied().unwrap_or(0.0)
    }

    pub fn phase(&self, order: usize) -> f64 {
        self.phases.get(&order).copied().unwrap_or(0.0)
    }

    pub fn max_order(&self) -> usize {
        self.magnitudes.keys().next_back().copied().unwrap_or(0)
    }

    /// Root-sum-square of the even orders, the "even" line of a harmonic table.
    pub fn even_residual(&self) -> f64 {
        self.magnitudes
            .iter()
            .filter(|(k, _)| *k % 2 == 0)
            .map(|(_, h)| h * h)
            .sum::<f64>()
            .sqrt()
    }
}

/// Number of whole fundamental periods covered by `w`, or an error if the
/// window is not an integer number of periods.
fn whole_periods(w: &Waveform, f0: f64) -> Result<usize> {
    if !(f0 > 0.0 && f0.is_finite()) {
        return arg(format!("fundamental frequency must be positive, got {f0}"));
    }
    let periods = w.duration() * f0;
    let whole = periods.round();
    if whole < 1.0 || (periods - whole).abs() > 1e-6 * whole.max(1.0) {
        return arg(format!(
            "`{}` spans {periods} periods of {f0} Hz; an integer count is required",
            w.name
        ));
    }
    Ok(whole as usize)
}

pub fn harmonics(w: &Waveform, f0: f64, max_order: usize) -> Result<HarmonicSpectrum> {
    whole_periods(w, f0)?;
    if max_order == 0 {
        return arg("max_order must be at least 1");
    }
    let n = w.len() as f64;
    let mut magnitudes = BTreeMap::new();
    let mut phases = BTreeMap::new();
    for k in 1..=max_order {
        let omega = 2.0 * PI * k as f64 * f0;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, x) in w.samples.iter().enumerate() {
            let (s, c) = (omega * w.time(i)).sin_cos();
            re += x * c;
            im -= x * s;
        }
        let (re, im) = (2.0 * re / n, 2.0 * im / n);
        magnitudes.insert(k, re.hypot(im));
        phases.insert(k, im.atan2(re));
    }
    Ok(HarmonicSpectrum {
        f0,
        magnitudes,
        phases,
    })
}

/// Sum of the spectrum's cosines sampled at `t0 + i dt` for `cycles` periods.
pub fn synthesize(
    name: &str,
    spec: &HarmonicSpectrum,
    dt: f64,
    t0: f64,
    cycles: usize,
) -> Result<Waveform> {
    let n = crate::switchsim::waveform::cycle_samples(dt, spec.f0, cycles)?;
    let samples = (0..n)
        .map(|i| {
            let t = t0 + i as f64 * dt;
            spec.magnitudes
                .iter()
                .map(|(&k, &h)| {
                    h * (2.0 * PI * k as f64 * spec.f0 * t + spec.phase(k)).cos()
                })
                .sum()
        })
        .collect();
    Waveform::new(name, dt, t0, samples)
}

/// `100 √(Σ_{k=2..max_order} H_k²) / H_1`.
pub fn thd(spec: &HarmonicSpectrum, max_order: usize) -> Result<f64> {
    let h1 = spec.magnitude(1);
    if !(h1 > 0.0) {
        return Err(Error::UndefinedThd);
    }
    let sum_sq: f64 = (2..=max_order).map(|k| spec.magnitude(k).powi(2)).sum();
    Ok(100.0 * sum_sq.sqrt() / h1)
}

pub fn rms(w: &Waveform) -> f64 {
    (w.samples.iter().map(|x| x * x).sum::<f64>() / w.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMeasurement {
    /// Mean instantaneous power (W).
    pub p_real: f64,
    /// `V_rms I_rms` (VA).
    pub s_apparent: f64,
    /// `p_real / s_apparent`.
    pub pf: f64,
}

/// True power factor of a voltage/current pair sampled on the same grid.
pub fn power_factor(v: &Waveform, i: &Waveform) -> Result<PowerMeasurement> {
    if v.len() != i.len() {
        return arg(format!(
            "`{}` has {} samples but `{}` has {}",
            v.name,
            v.len(),
            i.name,
            i.len()
        ));
    }
    if (v.dt - i.dt).abs() > 1e-12 * v.dt {
        return arg(format!("`{}` and `{}` use different sample steps", v.name, i.name));
    }
    let p_real =
        v.samples.iter().zip(&i.samples).map(|(a, b)| a * b).sum::<f64>() / v.len() as f64;
    let s_apparent = rms(v) * rms(i);
    if !(s_apparent > 0.0) {
        return Err(Error::UndefinedPowerFactor);
    }
    Ok(PowerMeasurement {
        p_real,
        s_apparent,
        pf: p_real / s_apparent,
    })
}

/// Cosine of the angle between the fundamentals of two spectra.
pub fn displacement_power_factor(v: &HarmonicSpectrum, i: &HarmonicSpectrum) -> f64 {
    (v.phase(1) - i.phase(1)).cos()
}

/// System-level figures over the analysis windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceReport {
    /// True power factor at the grid interface, `P / (V_rms I_rms)`.
    pub pf_sending: f64,
    /// Cosine of the fundamental voltage/current angle at the grid interface.
    pub pf_displacement: f64,
    pub thd_mains_i: f64,
    pub thd_load_v: f64,
    pub thd_load_i: f64,
    /// Real power drawn from the grid (W).
    pub p_real: f64,
    /// Apparent power drawn from the grid (VA).
    pub s_apparent: f64,
    /// Real power delivered to the load (W).
    pub p_load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub f0: f64,
    pub max_order: usize,
    pub cycles: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            f0: 50.0,
            max_order: DEFAULT_MAX_ORDER,
            cycles: DEFAULT_CYCLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub performance: PerformanceReport,
    pub mains_i: HarmonicSpectrum,
    pub load_v: HarmonicSpectrum,
    pub load_i: HarmonicSpectrum,
}

pub const REQUIRED_SIGNALS: [&str; 4] = ["mains_v", "mains_i", "load_v", "load_i"];

fn find<'a>(waveforms: &'a [Waveform], name: &str) -> Result<&'a Waveform> {
    waveforms
        .iter()
        .find(|w| w.name == name)
        .ok_or_else(|| Error::Argument(format!("required signal `{name}` is missing")))
}

/// Builds the harmonic table and performance figures.
///
/// Each signal is analysed over the last `cycles` periods in which it was
/// live (see [`active_window`]); the mains pair shares the window of
/// `mains_v` and the load pair that of `load_v`.
pub fn build_report(waveforms: &[Waveform], settings: &AnalysisSettings) -> Result<Report> {
    let AnalysisSettings {
        f0,
        max_order,
        cycles,
    } = *settings;
    let mains_v = find(waveforms, "mains_v")?;
    let mains_i = find(waveforms, "mains_i")?;
    let load_v = find(waveforms, "load_v")?;
    let load_i = find(waveforms, "load_i")?;

    let (mv, mi) = paired_windows(mains_v, mains_i, f0, cycles)?;
    let (lv, li) = paired_windows(load_v, load_i, f0, cycles)?;

    let mains_v_spec = harmonics(&mv, f0, max_order)?;
    let mains_i_spec = harmonics(&mi, f0, max_order)?;
    let load_v_spec = harmonics(&lv, f0, max_order)?;
    let load_i_spec = harmonics(&li, f0, max_order)?;

    let grid = power_factor(&mv, &mi)?;
    let load_p = lv.samples.iter().zip(&li.samples).map(|(a, b)| a * b).sum::<f64>()
        / lv.len() as f64;

    Ok(Report {
        performance: PerformanceReport {
            pf_sending: grid.pf,
            pf_displacement: displacement_power_factor(&mains_v_spec, &mains_i_spec),
            thd_mains_i: thd(&mains_i_spec, max_order)?,
            thd_load_v: thd(&load_v_spec, max_order)?,
            thd_load_i: thd(&load_i_spec, max_order)?,
            p_real: grid.p_real,
            s_apparent: grid.s_apparent,
            p_load: load_p,
        },
        mains_i: mains_i_spec,
        load_v: load_v_spec,
        load_i: load_i_spec,
    })
}

/// Windows two signals over the same sample range, chosen from the first.
fn paired_windows(
    v: &Waveform,
    i: &Waveform,
    f0: f64,
    cycles: usize,
) -> Result<(Waveform, Waveform)> {
    if v.len() != i.len() || (v.dt - i.dt).abs() > 1e-12 * v.dt {
        return arg(format!("`{}` and `{}` are not sampled alike", v.name, i.name));
    }
    let wv = active_window(v, f0, cycles)?;
    let wi = i.aligned_to(&wv)?;
    Ok((wv, wi))
}

/// Rows of the harmonic table: odd orders up to `max_order` and an even-order
/// residual, each with the mains current, load voltage and load current
/// magnitudes.
pub fn harmonic_table(report: &Report) -> Vec<(String, [f64; 3])> {
    let max_order = report.load_v.max_order();
    let cols = [&report.mains_i, &report.load_v, &report.load_i];
    let mut rows: Vec<(String, [f64; 3])> = (1..=max_order)
        .step_by(2)
        .map(|k| (k.to_string(), cols.map(|s| s.magnitude(k))))
        .collect();
    rows.push(("even".into(), cols.map(|s| s.even_residual())));
    rows
}

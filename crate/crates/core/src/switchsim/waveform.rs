use crate::error::{arg, Result};

/// Uniformly sampled signal; sample `i` is taken at `t0 + i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub name: String,
    pub dt: f64,
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(name: impl Into<String>, dt: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return arg(format!("waveform dt must be positive, got {dt}"));
        }
        if samples.is_empty() {
            return arg("waveform has no samples");
        }
        Ok(Self {
            name: name.into(),
            dt,
            t0,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Samples `[start, end)` as a new waveform with the matching start time.
    pub fn slice(&self, start: usize, end: usize) -> Result<Waveform> {
        if start >= end || end > self.len() {
            return arg(format!(
                "slice {start}..{end} out of range for {} samples",
                self.len()
            ));
        }
        Waveform::new(
            self.name.clone(),
            self.dt,
            self.time(start),
            self.samples[start..end].to_vec(),
        )
    }

    /// Samples covering the same time range as `other`, which must share
    /// this waveform's sampling grid.
    pub fn aligned_to(&self, other: &Waveform) -> Result<Waveform> {
        if (self.dt - other.dt).abs() > 1e-9 * self.dt {
            return arg(format!("`{}` and `{}` use different sample steps", self.name, other.name));
        }
        let start = ((other.t0 - self.t0) / self.dt).round();
        if start < 0.0 {
            return arg(format!("`{}` starts before `{}`", other.name, self.name));
        }
        let start = start as usize;
        self.slice(start, start + other.len())
    }
}

/// Number of samples spanning `cycles` periods of `f0`.
pub(crate) fn cycle_samples(dt: f64, f0: f64, cycles: usize) -> Result<usize> {
    if cycles == 0 {
        return arg("at least one cycle is required");
    }
    if !(f0 > 0.0 && f0.is_finite()) {
        return arg(format!("fundamental frequency must be positive, got {f0}"));
    }
    Ok((cycles as f64 / (f0 * dt)).round() as usize)
}

/// Trailing slice of exactly `round(cycles / (f0 dt))` samples.
pub fn steady_state_window(w: &Waveform, f0: f64, cycles: usize) -> Result<Waveform> {
    let n = cycle_samples(w.dt, f0, cycles)?;
    if n == 0 || n > w.len() {
        return arg(format!(
            "`{}` holds {} samples, {cycles} cycles at {f0} Hz need {n}",
            w.name,
            w.len()
        ));
    }
    w.slice(w.len() - n, w.len())
}

/// Like [`steady_state_window`], but the window ends at the last nonzero
/// sample. Quantities of a source that has been switched out (mains
/// quantities after a grid outage) are exactly zero, so this selects the
/// last steady interval in which the signal was live.
pub fn active_window(w: &Waveform, f0: f64, cycles: usize) -> Result<Waveform> {
    let end = w
        .samples
        .iter()
        .rposition(|x| *x != 0.0)
        .map(|i| i + 1)
        .ok_or_else(|| crate::Error::Argument(format!("`{}` is identically zero", w.name)))?;
    let n = cycle_samples(w.dt, f0, cycles)?;
    if n == 0 || n > end {
        return arg(format!(
            "`{}` is live for {end} samples, {cycles} cycles at {f0} Hz need {n}",
            w.name
        ));
    }
    w.slice(end - n, end)
}

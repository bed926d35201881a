//! Spectrum representation and the shared spectral operations: unit
//! conversion, window integration, baseline handling, and peak fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{levmar, Options};

/// eV·nm conversion constant (h·c in those units).
pub const EV_NM: f64 = 1239.841984;

/// Unit of the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridUnit {
    WavelengthNm,
    EnergyEv,
}

/// Acquisition metadata carried alongside the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub integration_s: f64,
    pub temperature_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation_nm: Option<f64>,
}

impl Default for SpectrumMeta {
    fn default() -> Self {
        SpectrumMeta {
            integration_s: 1.0,
            temperature_k: 295.0,
            excitation_nm: None,
        }
    }
}

/// Sampled emission intensity on a strictly increasing grid.
///
/// Raw spectra are non-negative; negative samples are only legal on spectra
/// explicitly marked `baseline_subtracted`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Vec<f64>,
    intensity: Vec<f64>,
    pub meta: SpectrumMeta,
    unit: GridUnit,
    baseline_subtracted: bool,
}

impl Spectrum {
    pub fn new(grid: Vec<f64>, intensity: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        Self::build(grid, intensity, meta, GridUnit::WavelengthNm, false)
    }

    /// Construct a spectrum that has already had a baseline removed and may
    /// therefore contain negative samples.
    pub fn new_baseline_subtracted(
        grid: Vec<f64>,
        intensity: Vec<f64>,
        meta: SpectrumMeta,
    ) -> Result<Self> {
        Self::build(grid, intensity, meta, GridUnit::WavelengthNm, true)
    }

    pub(crate) fn build(
        grid: Vec<f64>,
        intensity: Vec<f64>,
        meta: SpectrumMeta,
        unit: GridUnit,
        baseline_subtracted: bool,
    ) -> Result<Self> {
        if grid.len() != intensity.len() {
            return Err(Error::invalid(format!(
                "grid length {} != intensity length {}",
                grid.len(),
                intensity.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::invalid("spectrum needs at least two samples"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if grid.iter().chain(intensity.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite sample in spectrum"));
        }
        if !baseline_subtracted && intensity.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid(
                "negative intensity on a spectrum not marked baseline_subtracted",
            ));
        }
        Ok(Spectrum {
            grid,
            intensity,
            meta,
            unit,
            baseline_subtracted,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn unit(&self) -> GridUnit {
        self.unit
    }

    pub fn is_baseline_subtracted(&self) -> bool {
        self.baseline_subtracted
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Linear interpolation of intensity at `x`; clamps outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return self.intensity[0];
        }
        if x >= g[g.len() - 1] {
            return self.intensity[g.len() - 1];
        }
        let idx = match g.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.intensity[i],
            Err(i) => i,
        };
        let (x0, x1) = (g[idx - 1], g[idx]);
        let t = (x - x0) / (x1 - x0);
        self.intensity[idx - 1] * (1.0 - t) + self.intensity[idx] * t
    }

    /// Convert a wavelength spectrum (nm) to photon energy (eV).
    ///
    /// E = 1239.841984 / λ. The grid is re-sorted ascending in energy. With
    /// `jacobian` set (the default for analysis), intensity densities are
    /// rescaled by |dλ/dE| = λ²/(h·c) so integrals are conserved.
    pub fn to_energy(&self, jacobian: bool) -> Result<Spectrum> {
        if self.unit != GridUnit::WavelengthNm {
            return Err(Error::invalid("spectrum is already in energy units"));
        }
        if self.grid[0] <= 0.0 {
            return Err(Error::invalid("wavelengths must be positive"));
        }
        let n = self.grid.len();
        let mut grid = Vec::with_capacity(n);
        let mut intensity = Vec::with_capacity(n);
        // Ascending λ maps to descending E; reverse to keep the grid sorted.
        for i in (0..n).rev() {
            let lambda = self.grid[i];
            grid.push(EV_NM / lambda);
            let scale = if jacobian { lambda * lambda / EV_NM } else { 1.0 };
            intensity.push(self.intensity[i] * scale);
        }
        Spectrum::build(
            grid,
            intensity,
            self.meta.clone(),
            GridUnit::EnergyEv,
            self.baseline_subtracted,
        )
    }

    /// Inverse of [`Spectrum::to_energy`].
    pub fn to_wavelength(&self, jacobian: bool) -> Result<Spectrum> {
        if self.unit != GridUnit::EnergyEv {
            return Err(Error::invalid("spectrum is already in wavelength units"));
        }
        if self.grid[0] <= 0.0 {
            return Err(Error::invalid("energies must be positive"));
        }
        let n = self.grid.len();
        let mut grid = Vec::with_capacity(n);
        let mut intensity = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let e = self.grid[i];
            let lambda = EV_NM / e;
            grid.push(lambda);
            let scale = if jacobian { EV_NM / (lambda * lambda) } else { 1.0 };
            intensity.push(self.intensity[i] * scale);
        }
        Spectrum::build(
            grid,
            intensity,
            self.meta.clone(),
            GridUnit::WavelengthNm,
            self.baseline_subtracted,
        )
    }

    /// Trapezoidal integral of intensity over the window, with the partial
    /// bins at the window edges linearly interpolated.
    pub fn integrate_window(&self, w: &SpectralWindow) -> Result<f64> {
        let (g, y) = (&self.grid, &self.intensity);
        let lo = w.lo.max(g[0]);
        let hi = w.hi.min(g[g.len() - 1]);
        if lo >= hi {
            return Err(Error::EmptyWindow(format!(
                "window [{}, {}] does not overlap grid [{}, {}]",
                w.lo,
                w.hi,
                g[0],
                g[g.len() - 1]
            )));
        }
        let mut total = 0.0;
        let mut x_prev = lo;
        let mut y_prev = self.value_at(lo);
        let start = g.partition_point(|&v| v <= lo);
        for i in start..g.len() {
            if g[i] >= hi {
                break;
            }
            total += (g[i] - x_prev) * (y_prev + y[i]) / 2.0;
            x_prev = g[i];
            y_prev = y[i];
        }
        let y_hi = self.value_at(hi);
        total += (hi - x_prev) * (y_prev + y_hi) / 2.0;
        Ok(total)
    }

    /// Remove a baseline, returning a spectrum marked `baseline_subtracted`.
    pub fn subtract_baseline(&self, method: &BaselineMethod) -> Result<Spectrum> {
        let corrected = match method {
            BaselineMethod::Constant { quiet_lo, quiet_hi } => {
                let mut band: Vec<f64> = self
                    .grid
                    .iter()
                    .zip(&self.intensity)
                    .filter(|(x, _)| **x >= *quiet_lo && **x <= *quiet_hi)
                    .map(|(_, y)| *y)
                    .collect();
                if band.is_empty() {
                    return Err(Error::invalid("quiet band does not overlap grid"));
                }
                band.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = if band.len() % 2 == 1 {
                    band[band.len() / 2]
                } else {
                    0.5 * (band[band.len() / 2 - 1] + band[band.len() / 2])
                };
                self.intensity.iter().map(|y| y - median).collect()
            }
            BaselineMethod::Linear => {
                let (slope, intercept) = clipped_line(&self.grid, &self.intensity);
                self.grid
                    .iter()
                    .zip(&self.intensity)
                    .map(|(x, y)| y - (slope * x + intercept))
                    .collect()
            }
            BaselineMethod::Reference(reference) => {
                if reference.grid != self.grid {
                    return Err(Error::invalid(
                        "reference spectrum must share the exact grid",
                    ));
                }
                self.intensity
                    .iter()
                    .zip(&reference.intensity)
                    .map(|(y, r)| y - r)
                    .collect()
            }
        };
        Spectrum::build(
            self.grid.clone(),
            corrected,
            self.meta.clone(),
            self.unit,
            true,
        )
    }

    /// Fit a single peak near `seed_center` with a damped least-squares fit
    /// of (center, fwhm, height, offset).
    pub fn fit_peak(&self, seed_center: f64, model: PeakModel) -> Result<PeakFit> {
        let g = &self.grid;
        if seed_center < g[0] || seed_center > g[g.len() - 1] {
            return Err(Error::invalid(format!(
                "seed center {seed_center} outside grid [{}, {}]",
                g[0],
                g[g.len() - 1]
            )));
        }
        let seed_width = self
            .estimate_width(seed_center)
            .ok_or_else(|| Error::fit("no resolvable peak near seed (flat data)", &[seed_center]))?;
        self.fit_peak_seeded(seed_center, seed_width, model)
    }

    /// As [`Spectrum::fit_peak`] with an explicit initial width (grid units).
    pub fn fit_peak_seeded(
        &self,
        seed_center: f64,
        seed_width: f64,
        model: PeakModel,
    ) -> Result<PeakFit> {
        let g = &self.grid;
        if seed_width <= 0.0 {
            return Err(Error::invalid("seed width must be positive"));
        }
        let lo = seed_center - 3.0 * seed_width;
        let hi = seed_center + 3.0 * seed_width;
        let n_close = g.iter().filter(|x| **x >= lo && **x <= hi).count();
        if n_close < 5 {
            return Err(Error::invalid(format!(
                "need >= 5 samples within +-3x seed width, found {n_close}"
            )));
        }
        // Fit on a window wide enough to pin the offset.
        let wlo = g.partition_point(|&v| v < seed_center - 10.0 * seed_width);
        let whi = g.partition_point(|&v| v <= seed_center + 10.0 * seed_width);
        let xs = &g[wlo..whi];
        let ys = &self.intensity[wlo..whi];

        let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(y_max - y_min).is_finite() || (y_max - y_min) <= 1e-12 * y_max.abs().max(1.0) {
            return Err(Error::fit(
                "flat data in fit window",
                &[seed_center, seed_width, 0.0, y_min],
            ));
        }

        let min_width = 0.2 * min_spacing(xs);
        let p0 = [seed_center, seed_width, (y_max - y_min).max(1e-12), y_min];
        let opts = Options {
            lower: Some(vec![xs[0], min_width, 0.0, f64::NEG_INFINITY]),
            upper: Some(vec![
                xs[xs.len() - 1],
                (xs[xs.len() - 1] - xs[0]) * 2.0,
                f64::INFINITY,
                f64::INFINITY,
            ]),
            ..Options::default()
        };
        let out = levmar(
            |p, r| {
                for (i, x) in xs.iter().enumerate() {
                    r[i] = ys[i] - peak_value(model, p, *x);
                }
                true
            },
            xs.len(),
            &p0,
            &opts,
        )?;
        if !out.converged {
            return Err(Error::fit(
                format!("peak fit did not converge in {} iterations", out.iterations),
                &out.params,
            ));
        }
        let [center, fwhm, height, offset] = [
            out.params[0],
            out.params[1],
            out.params[2],
            out.params[3],
        ];
        if height <= 0.0 || fwhm <= min_width * 1.0001 {
            return Err(Error::fit("fit collapsed to no peak", &out.params));
        }
        let errs = out.param_errors(true);
        Ok(PeakFit {
            center,
            fwhm,
            area: model.area(height, fwhm),
            height,
            offset,
            model,
            uncertainty: PeakUncertainty {
                center: errs[0],
                fwhm: errs[1],
                height: errs[2],
                offset: errs[3],
            },
        })
    }

    /// Half-maximum width estimate around `seed`; None when the neighbourhood
    /// carries no contrast.
    fn estimate_width(&self, seed: f64) -> Option<f64> {
        let g = &self.grid;
        let y = &self.intensity;
        // Use the local maximum near the seed as the peak candidate.
        let i0 = nearest_index(g, seed);
        let span = 25.min(g.len() / 2);
        let lo = i0.saturating_sub(span);
        let hi = (i0 + span + 1).min(g.len());
        let (mut ipk, mut ypk) = (i0, y[i0]);
        for i in lo..hi {
            if y[i] > ypk {
                ipk = i;
                ypk = y[i];
            }
        }
        let floor = y[lo..hi].iter().cloned().fold(f64::INFINITY, f64::min);
        if ypk - floor <= 1e-12 * ypk.abs().max(1.0) {
            return None;
        }
        let half = floor + (ypk - floor) / 2.0;
        let mut left = g[lo];
        for i in (lo..ipk).rev() {
            if y[i] <= half {
                let t = (half - y[i]) / (y[i + 1] - y[i]);
                left = g[i] + t * (g[i + 1] - g[i]);
                break;
            }
        }
        let mut right = g[hi - 1];
        for i in ipk + 1..hi {
            if y[i] <= half {
                let t = (half - y[i - 1]) / (y[i] - y[i - 1]);
                right = g[i - 1] + t * (g[i] - g[i - 1]);
                break;
            }
        }
        let w = right - left;
        (w > 0.0).then_some(w.max(min_spacing(&g[lo..hi])))
    }

    /// Detect local maxima in a window by prominence and refine each with a
    /// peak fit. Returns fits sorted by center; an empty list is not an error.
    pub fn find_multiplet(
        &self,
        window: &SpectralWindow,
        min_prominence: f64,
    ) -> Result<Vec<PeakFit>> {
        let g = &self.grid;
        let lo = window.lo.max(g[0]);
        let hi = window.hi.min(g[g.len() - 1]);
        if lo >= hi {
            return Err(Error::EmptyWindow(format!(
                "window [{}, {}] does not overlap grid",
                window.lo, window.hi
            )));
        }
        let a = g.partition_point(|&v| v < lo);
        let b = g.partition_point(|&v| v <= hi);
        if b - a < 3 {
            return Ok(Vec::new());
        }
        let y = &self.intensity[a..b];
        let candidates = prominent_maxima(y, min_prominence);
        let mut fits = Vec::new();
        for idx in candidates {
            if let Ok(fit) = self.fit_peak(g[a + idx], PeakModel::Lorentzian) {
                // Keep only fits that stay inside the window.
                if fit.center >= lo && fit.center <= hi {
                    fits.push(fit);
                }
            }
        }
        fits.sort_by(|p, q| p.center.partial_cmp(&q.center).unwrap());
        fits.dedup_by(|p, q| (p.center - q.center).abs() < 0.5 * q.fwhm.max(p.fwhm));
        Ok(fits)
    }
}

/// Fit a ZPL through a time-ordered series, seeding each fit with the
/// previous successful center. Missing peaks are recorded as gaps.
pub fn track_zpl(series: &[Spectrum], seed_center: f64) -> Result<Vec<Option<PeakFit>>> {
    if series.is_empty() {
        return Err(Error::invalid("track_zpl needs at least one spectrum"));
    }
    let mut center = seed_center;
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        match s.fit_peak(center, PeakModel::Lorentzian) {
            Ok(fit) => {
                center = fit.center;
                out.push(Some(fit));
            }
            Err(_) => out.push(None),
        }
    }
    Ok(out)
}

/// Robust linear baseline: iteratively fit a line and drop points that sit
/// clearly above it, so localized peaks do not drag the fit.
fn clipped_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut keep: Vec<bool> = vec![true; x.len()];
    let mut slope = 0.0;
    let mut intercept = 0.0;
    for _ in 0..8 {
        let xs: Vec<f64> = x
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(v, _)| *v)
            .collect();
        let ys: Vec<f64> = y
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(v, _)| *v)
            .collect();
        if xs.len() < 2 {
            break;
        }
        let (a, b, _) = crate::fit::linear_fit(&xs, &ys);
        slope = a;
        intercept = b;
        let resid: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| yi - (slope * xi + intercept))
            .collect();
        let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        abs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mad = abs[abs.len() / 2].max(1e-12);
        let sigma = 1.4826 * mad;
        let mut changed = false;
        for (k, r) in keep.iter_mut().zip(&resid) {
            let want = *r < 2.0 * sigma;
            if *k != want {
                changed = true;
            }
            *k = want;
        }
        if !changed {
            break;
        }
    }
    (slope, intercept)
}

/// Indices of local maxima whose topographic prominence is at least
/// `min_prominence`.
fn prominent_maxima(y: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = y.len();
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] {
            // Walk each side until terrain higher than the peak or the edge;
            // the key saddle is the minimum along that walk.
            let mut left_min = y[i];
            let mut j = i;
            while j > 0 {
                j -= 1;
                if y[j] > y[i] {
                    break;
                }
                left_min = left_min.min(y[j]);
            }
            let mut right_min = y[i];
            let mut j = i;
            while j + 1 < n {
                j += 1;
                if y[j] > y[i] {
                    break;
                }
                right_min = right_min.min(y[j]);
            }
            let prominence = y[i] - left_min.max(right_min);
            if prominence >= min_prominence {
                peaks.push(i);
            }
        }
    }
    peaks
}

fn nearest_index(g: &[f64], x: f64) -> usize {
    match g.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i >= g.len() {
                g.len() - 1
            } else if (g[i] - x).abs() < (x - g[i - 1]).abs() {
                i
            } else {
                i - 1
            }
        }
    }
}

fn min_spacing(g: &[f64]) -> f64 {
    g.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Baseline removal strategies. The reference method subtracts a spectrum
/// taken before treatment (e.g. a pre-implantation acquisition) and is the
/// preferred way to remove the Raman background; the linear method is the
/// fallback when no reference exists.
#[derive(Debug, Clone)]
pub enum BaselineMethod {
    Constant { quiet_lo: f64, quiet_hi: f64 },
    Linear,
    Reference(Spectrum),
}

/// Named spectral collection window (nm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub label: WindowLabel,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowLabel {
    TypeIiSn,
    SnV,
    Gr1,
    Custom,
}

impl SpectralWindow {
    pub const TYPE_II_SN: SpectralWindow = SpectralWindow {
        label: WindowLabel::TypeIiSn,
        lo: 590.0,
        hi: 600.0,
    };
    pub const SNV: SpectralWindow = SpectralWindow {
        label: WindowLabel::SnV,
        lo: 615.0,
        hi: 625.0,
    };
    pub const GR1: SpectralWindow = SpectralWindow {
        label: WindowLabel::Gr1,
        lo: 730.0,
        hi: 750.0,
    };

    pub fn custom(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid(format!("window bounds {lo} >= {hi}")));
        }
        Ok(SpectralWindow {
            label: WindowLabel::Custom,
            lo,
            hi,
        })
    }

    pub fn builtin() -> [SpectralWindow; 3] {
        [Self::TYPE_II_SN, Self::SNV, Self::GR1]
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Peak lineshape model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakModel {
    Lorentzian,
    Gaussian,
}

impl PeakModel {
    /// Closed-form area under the peak (excluding offset).
    pub fn area(&self, height: f64, fwhm: f64) -> f64 {
        match self {
            // ∫ h / (1 + (2x/w)²) dx = π h w / 2
            PeakModel::Lorentzian => std::f64::consts::PI * height * fwhm / 2.0,
            // ∫ h exp(-4 ln2 x²/w²) dx = h w sqrt(π / (4 ln2))
            PeakModel::Gaussian => {
                height * fwhm * (std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt()
            }
        }
    }
}

pub(crate) fn peak_value(model: PeakModel, p: &[f64], x: f64) -> f64 {
    let (center, fwhm, height, offset) = (p[0], p[1], p[2], p[3]);
    let u = 2.0 * (x - center) / fwhm;
    match model {
        PeakModel::Lorentzian => offset + height / (1.0 + u * u),
        PeakModel::Gaussian => offset + height * (-std::f64::consts::LN_2 * u * u).exp(),
    }
}

/// Converged single-peak fit. Units follow the grid the fit ran on
/// (nm for wavelength spectra).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    #[serde(rename = "center_nm")]
    pub center: f64,
    #[serde(rename = "fwhm_nm")]
    pub fwhm: f64,
    #[serde(rename = "area_counts_nm")]
    pub area: f64,
    #[serde(rename = "height_counts")]
    pub height: f64,
    #[serde(rename = "offset_counts")]
    pub offset: f64,
    pub model: PeakModel,
    pub uncertainty: PeakUncertainty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakUncertainty {
    #[serde(rename = "center_nm")]
    pub center: f64,
    #[serde(rename = "fwhm_nm")]
    pub fwhm: f64,
    #[serde(rename = "height_counts")]
    pub height: f64,
    #[serde(rename = "offset_counts")]
    pub offset: f64,
}

impl PeakFit {
    /// Evaluate the fitted model (including offset) at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        peak_value(
            self.model,
            &[self.center, self.fwhm, self.height, self.offset],
            x,
        )
    }

    /// Synthesize the fit onto a grid, for residual inspection and tests.
    pub fn synthesize(&self, grid: &[f64], meta: SpectrumMeta) -> Result<Spectrum> {
        let intensity: Vec<f64> = grid.iter().map(|x| self.value_at(*x)).collect();
        Spectrum::build(
            grid.to_vec(),
            intensity,
            meta,
            GridUnit::WavelengthNm,
            true,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(grid_lo: f64, grid_hi: f64, step: f64, level: f64) -> Spectrum {
        let mut g = Vec::new();
        let mut x = grid_lo;
        while x <= grid_hi + 1e-9 {
            g.push(x);
            x += step;
        }
        let y = vec![level; g.len()];
        Spectrum::new(g, y, SpectrumMeta::default()).unwrap()
    }

    fn lorentzian_spectrum(
        grid_lo: f64,
        grid_hi: f64,
        step: f64,
        center: f64,
        fwhm: f64,
        height: f64,
        offset: f64,
    ) -> Spectrum {
        let mut g = Vec::new();
        let mut x = grid_lo;
        while x <= grid_hi + 1e-9 {
            g.push(x);
            x += step;
        }
        let y: Vec<f64> = g
            .iter()
            .map(|x| peak_value(PeakModel::Lorentzian, &[center, fwhm, height, offset], *x))
            .collect();
        Spectrum::new(g, y, SpectrumMeta::default()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Spectrum::new(vec![1.0], vec![1.0], SpectrumMeta::default()).is_err());
        assert!(Spectrum::new(vec![2.0, 1.0], vec![0.0, 0.0], SpectrumMeta::default()).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![0.0], SpectrumMeta::default()).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![0.0, -1.0], SpectrumMeta::default()).is_err());
        assert!(Spectrum::new_baseline_subtracted(
            vec![1.0, 2.0],
            vec![0.0, -1.0],
            SpectrumMeta::default()
        )
        .is_ok());
    }

    #[test]
    fn energy_conversion_constant() {
        // λ such that E = 2 eV exactly by the conversion definition.
        let lambda = EV_NM / 2.0;
        let s = flat(lambda - 1.0, lambda + 1.0, 0.5, 1.0);
        let e = s.to_energy(true).unwrap();
        let expect = EV_NM / lambda;
        assert!((expect - 2.0).abs() < 1e-12);
        assert!(e.grid().iter().any(|&x| (x - 2.0).abs() < 2e-3));
    }

    #[test]
    fn snv_zpl_energy() {
        // 620 nm converts to about 1.9998 eV.
        let e = EV_NM / 620.0;
        assert!((e - 1.9998).abs() < 1e-4);
    }

    #[test]
    fn jacobian_conserves_integral() {
        let s = flat(600.0, 601.0, 0.01, 1.0);
        let w_l = SpectralWindow::custom(600.0, 601.0).unwrap();
        let il = s.integrate_window(&w_l).unwrap();
        let e = s.to_energy(true).unwrap();
        let w_e = SpectralWindow::custom(e.grid()[0], e.grid()[e.len() - 1]).unwrap();
        let ie = e.integrate_window(&w_e).unwrap();
        assert!(
            ((il - ie) / il).abs() < 1e-6,
            "λ integral {il} vs E integral {ie}"
        );
    }

    #[test]
    fn energy_round_trip_preserves_intensity() {
        let s = lorentzian_spectrum(600.0, 640.0, 0.1, 620.0, 1.0, 100.0, 3.0);
        let back = s.to_energy(true).unwrap().to_wavelength(true).unwrap();
        for (a, b) in s.intensity().iter().zip(back.intensity()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        for (a, b) in s.grid().iter().zip(back.grid()) {
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }

    #[test]
    fn zero_wavelength_is_invalid() {
        let s = Spectrum::new(vec![0.0, 1.0], vec![1.0, 1.0], SpectrumMeta::default()).unwrap();
        assert!(matches!(s.to_energy(true), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn window_integral_constant() {
        let s = flat(610.0, 630.0, 0.5, 1.0);
        let v = s.integrate_window(&SpectralWindow::SNV).unwrap();
        assert!((v - 10.0).abs() < 1e-9);
    }

    #[test]
    fn window_integral_single_bin() {
        let s = Spectrum::new(
            vec![619.5, 620.0, 620.5],
            vec![0.0, 1.0, 0.0],
            SpectrumMeta::default(),
        )
        .unwrap();
        let v = s.integrate_window(&SpectralWindow::SNV).unwrap();
        // Hand trapezoid: 0.5·(0+1)/2 + 0.5·(1+0)/2 = 0.5.
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn window_without_overlap_errors() {
        let s = flat(500.0, 800.0, 1.0, 1.0);
        let w = SpectralWindow::custom(900.0, 950.0).unwrap();
        assert!(matches!(s.integrate_window(&w), Err(Error::EmptyWindow(_))));
    }

    #[test]
    fn window_additivity() {
        let s = lorentzian_spectrum(600.0, 640.0, 0.37, 620.0, 2.0, 50.0, 1.0);
        let a = SpectralWindow::custom(615.0, 620.3).unwrap();
        let b = SpectralWindow::custom(620.3, 625.0).unwrap();
        let union = SpectralWindow::custom(615.0, 625.0).unwrap();
        let sum = s.integrate_window(&a).unwrap() + s.integrate_window(&b).unwrap();
        let whole = s.integrate_window(&union).unwrap();
        assert!(((sum - whole) / whole).abs() < 1e-9);
    }

    #[test]
    fn baseline_reference_identity() {
        let s = lorentzian_spectrum(600.0, 640.0, 0.2, 620.0, 1.0, 100.0, 7.0);
        let z = s
            .subtract_baseline(&BaselineMethod::Reference(s.clone()))
            .unwrap();
        assert!(z.is_baseline_subtracted());
        assert!(z.intensity().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn baseline_constant_zeroes_quiet_band() {
        let s = flat(600.0, 640.0, 0.5, 100.0);
        let z = s
            .subtract_baseline(&BaselineMethod::Constant {
                quiet_lo: 600.0,
                quiet_hi: 610.0,
            })
            .unwrap();
        let quiet: Vec<f64> = z
            .grid()
            .iter()
            .zip(z.intensity())
            .filter(|(x, _)| **x <= 610.0)
            .map(|(_, y)| *y)
            .collect();
        let mean: f64 = quiet.iter().sum::<f64>() / quiet.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn baseline_reference_grid_mismatch_errors() {
        let s = flat(600.0, 640.0, 0.5, 100.0);
        let r = flat(600.0, 640.0, 1.0, 100.0);
        assert!(s
            .subtract_baseline(&BaselineMethod::Reference(r))
            .is_err());
    }

    #[test]
    fn baseline_linear_recovers_peak_area() {
        // Lorentzian on a linear slope; subtracting the fitted line must
        // leave the injected area within 1%.
        let center = 620.0;
        let fwhm = 1.2;
        let height = 80.0;
        let mut g = Vec::new();
        let mut x = 580.0;
        while x <= 660.0 + 1e-9 {
            g.push(x);
            x += 0.1;
        }
        let y: Vec<f64> = g
            .iter()
            .map(|x| {
                peak_value(PeakModel::Lorentzian, &[center, fwhm, height, 0.0], *x)
                    + 2.0 * (x - 580.0)
                    + 30.0
            })
            .collect();
        let s = Spectrum::new(g, y, SpectrumMeta::default()).unwrap();
        let z = s.subtract_baseline(&BaselineMethod::Linear).unwrap();
        let fit = z.fit_peak(620.0, PeakModel::Lorentzian).unwrap();
        let injected = PeakModel::Lorentzian.area(height, fwhm);
        assert!(
            ((fit.area - injected) / injected).abs() < 0.01,
            "area {} vs injected {}",
            fit.area,
            injected
        );
    }

    #[test]
    fn fit_peak_noiseless_recovery() {
        let s = lorentzian_spectrum(610.0, 630.0, 0.05, 620.0, 1.0, 100.0, 5.0);
        let fit = s.fit_peak(620.2, PeakModel::Lorentzian).unwrap();
        assert!((fit.center - 620.0).abs() < 1e-6 * 620.0);
        assert!((fit.fwhm - 1.0).abs() < 1e-6);
        assert!((fit.height - 100.0).abs() < 1e-4);
        assert!((fit.offset - 5.0).abs() < 1e-4);
    }

    #[test]
    fn fit_peak_is_fixed_point_on_own_synthesis() {
        let s = lorentzian_spectrum(610.0, 630.0, 0.05, 620.0, 1.0, 100.0, 5.0);
        let fit = s.fit_peak(620.0, PeakModel::Lorentzian).unwrap();
        let synth = fit.synthesize(s.grid(), SpectrumMeta::default()).unwrap();
        let refit = synth.fit_peak(fit.center, PeakModel::Lorentzian).unwrap();
        assert!((refit.center - fit.center).abs() < 1e-9 * fit.center.abs());
        assert!((refit.fwhm - fit.fwhm).abs() < 1e-9 * fit.fwhm);
        assert!((refit.height - fit.height).abs() < 1e-9 * fit.height);
    }

    #[test]
    fn fit_peak_area_identity() {
        let s = lorentzian_spectrum(610.0, 630.0, 0.05, 620.0, 1.3, 90.0, 2.0);
        let fit = s.fit_peak(620.0, PeakModel::Lorentzian).unwrap();
        let closed = std::f64::consts::PI * fit.height * fit.fwhm / 2.0;
        assert!(((fit.area - closed) / closed).abs() < 1e-9);
    }

    #[test]
    fn fit_peak_poisson_noise_center_accuracy() {
        // 95th percentile of |center error| over 100 seeds stays under 0.05 nm.
        let mut errors = Vec::new();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = Vec::new();
            let mut x = 615.0;
            while x <= 625.0 + 1e-9 {
                g.push(x);
                x += 0.05;
            }
            let y: Vec<f64> = g
                .iter()
                .map(|x| {
                    let mean =
                        peak_value(PeakModel::Lorentzian, &[620.0, 1.0, 1000.0, 50.0], *x);
                    let d = rand_distr::Poisson::new(mean).unwrap();
                    rng.sample(d)
                })
                .collect();
            let s = Spectrum::new(g, y, SpectrumMeta::default()).unwrap();
            let fit = s.fit_peak(620.1, PeakModel::Lorentzian).unwrap();
            errors.push((fit.center - 620.0).abs());
        }
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p95 = errors[94];
        assert!(p95 < 0.05, "95th percentile center error {p95} nm");
    }

    #[test]
    fn flat_spectrum_fit_fails() {
        let s = flat(610.0, 630.0, 0.1, 40.0);
        assert!(matches!(
            s.fit_peak(620.0, PeakModel::Lorentzian),
            Err(Error::FitFailure { .. })
        ));
    }

    #[test]
    fn gaussian_model_fits_gaussian_data() {
        let mut g = Vec::new();
        let mut x = 610.0;
        while x <= 630.0 + 1e-9 {
            g.push(x);
            x += 0.05;
        }
        let y: Vec<f64> = g
            .iter()
            .map(|x| peak_value(PeakModel::Gaussian, &[621.0, 2.0, 40.0, 1.0], *x))
            .collect();
        let s = Spectrum::new(g, y, SpectrumMeta::default()).unwrap();
        let fit = s.fit_peak(620.5, PeakModel::Gaussian).unwrap();
        assert!((fit.center - 621.0).abs() < 1e-6);
        assert!((fit.fwhm - 2.0).abs() < 1e-6);
    }

    #[test]
    fn multiplet_two_close_lines() {
        let mut g = Vec::new();
        let mut x = 593.0;
        while x <= 596.0 + 1e-9 {
            g.push(x);
            x += 0.01;
        }
        let y: Vec<f64> = g
            .iter()
            .map(|x| {
                peak_value(PeakModel::Lorentzian, &[594.0, 0.1, 100.0, 0.0], *x)
                    + peak_value(PeakModel::Lorentzian, &[594.5, 0.1, 80.0, 0.0], *x)
            })
            .collect();
        let s = Spectrum::new(g, y, SpectrumMeta::default()).unwrap();
        let w = SpectralWindow::custom(593.0, 596.0).unwrap();
        let peaks = s.find_multiplet(&w, 10.0).unwrap();
        assert_eq!(peaks.len(), 2, "found {:?}", peaks);
        assert!((peaks[0].center - 594.0).abs() < 0.01);
        assert!((peaks[1].center - 594.5).abs() < 0.01);
    }

    #[test]
    fn multiplet_flat_is_empty() {
        let s = flat(593.0, 596.0, 0.01, 5.0);
        let w = SpectralWindow::custom(593.0, 596.0).unwrap();
        assert!(s.find_multiplet(&w, 1.0).unwrap().is_empty());
    }

    #[test]
    fn multiplet_single_dominant_peak() {
        let mut g = Vec::new();
        let mut x = 593.0;
        while x <= 596.0 + 1e-9 {
            g.push(x);
            x += 0.01;
        }
        let y: Vec<f64> = g
            .iter()
            .map(|x| peak_value(PeakModel::Lorentzian, &[594.5, 0.15, 120.0, 2.0], *x))
            .collect();
        let s = Spectrum::new(g, y, SpectrumMeta::default()).unwrap();
        let w = SpectralWindow::custom(593.0, 596.0).unwrap();
        let peaks = s.find_multiplet(&w, 10.0).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].center - 594.5).abs() < 0.01);
    }

    #[test]
    fn track_identical_series() {
        let s = lorentzian_spectrum(610.0, 630.0, 0.05, 620.0, 1.0, 100.0, 5.0);
        let series = vec![s.clone(), s.clone(), s.clone(), s.clone(), s];
        let fits = track_zpl(&series, 620.3).unwrap();
        assert_eq!(fits.len(), 5);
        let c0 = fits[0].as_ref().unwrap().center;
        for f in &fits {
            assert!((f.as_ref().unwrap().center - c0).abs() < 1e-9);
        }
    }

    #[test]
    fn track_recovers_linear_drift() {
        let mut series = Vec::new();
        let n = 11;
        for i in 0..n {
            let c = 620.0 + i as f64 * 0.1;
            series.push(lorentzian_spectrum(610.0, 632.0, 0.05, c, 1.0, 100.0, 5.0));
        }
        let fits = track_zpl(&series, 620.0).unwrap();
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let c: Vec<f64> = fits.iter().map(|f| f.as_ref().unwrap().center).collect();
        let (slope, _, _) = crate::fit::linear_fit(&t, &c);
        assert!(((slope - 0.1) / 0.1).abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn track_records_gap_and_resumes() {
        let good = lorentzian_spectrum(610.0, 630.0, 0.05, 620.0, 1.0, 100.0, 5.0);
        let bad = flat(610.0, 630.0, 0.05, 5.0);
        let series = vec![good.clone(), good.clone(), good.clone(), bad, good];
        let fits = track_zpl(&series, 620.0).unwrap();
        assert!(fits[2].is_some());
        assert!(fits[3].is_none());
        assert!(fits[4].is_some());
    }
}

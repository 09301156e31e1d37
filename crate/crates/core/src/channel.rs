//! ISI channel with additive white complex Gaussian noise, plus the block
//! and windowed convolution matrices used by the equalizers.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexMat};

/// Five-tap benchmark channel with a deep spectral null.
pub const PROAKIS_C: [f64; 5] = [0.227, 0.46, 0.688, 0.46, 0.227];

/// Three-tap benchmark channel.
pub const CHAN3: [f64; 3] = [0.407, 0.815, 0.407];

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    taps: Vec<Complex64>,
    noise_var: f64,
}

impl ChannelModel {
    pub fn new(taps: Vec<Complex64>, noise_var: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument(
                "channel needs at least one tap".into(),
            ));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::InvalidArgument("channel taps must be finite".into()));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be > 0, got {noise_var}"
            )));
        }
        Ok(Self { taps, noise_var })
    }

    pub fn real(taps: &[f64], noise_var: f64) -> Result<Self> {
        Self::new(
            taps.iter().map(|&t| Complex64::new(t, 0.0)).collect(),
            noise_var,
        )
    }

    /// Named preset: `"proakis-c"` or `"chan3"`.
    pub fn preset(name: &str, noise_var: f64) -> Result<Self> {
        Self::real(preset_taps(name)?, noise_var)
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    /// Number of taps `L`.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        Self::new(self.taps.clone(), noise_var)
    }

    pub fn is_real(&self) -> bool {
        self.taps.iter().all(|t| t.im == 0.0)
    }
}

pub fn preset_taps(name: &str) -> Result<&'static [f64]> {
    match name {
        "proakis-c" => Ok(&PROAKIS_C),
        "chan3" => Ok(&CHAN3),
        other => Err(Error::InvalidArgument(format!(
            "unknown channel preset '{other}'"
        ))),
    }
}

/// Complex noise variance for a given `Eb/N0`, with `Es` the symbol
/// energy, `rate` the code rate and `bits_per_symbol` = `Q`.
pub fn ebn0_to_noise_var(ebn0_db: f64, es: f64, rate: f64, bits_per_symbol: usize) -> f64 {
    es / (rate * bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// Observation window `[k − n2, k + n1]` around symbol `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub n1: usize,
    pub n2: usize,
}

impl WindowSpec {
    /// `n1 = 2L`, `n2 = L + 1`.
    pub fn for_taps(l: usize) -> Self {
        Self {
            n1: 2 * l,
            n2: l + 1,
        }
    }

    /// Window length `W = n1 + n2 + 1`.
    pub fn len(&self) -> usize {
        self.n1 + self.n2 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn validate(&self, taps: usize) -> Result<()> {
        if self.len() < taps {
            return Err(Error::InvalidArgument(format!(
                "window length {} is shorter than the channel ({taps} taps)",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Convolves `u` with the taps (zero outside the frame) and adds circular
/// complex noise of total variance `σ²` (`σ²/2` per component).
/// Returns `V + L − 1` observations.
pub fn transmit<R: Rng + ?Sized>(
    u: &[Complex64],
    ch: &ChannelModel,
    rng: &mut R,
) -> Vec<Complex64> {
    let mut y = convolve(u, ch.taps());
    let sd = (ch.noise_var() / 2.0).sqrt();
    for yk in y.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *yk += Complex64::new(re * sd, im * sd);
    }
    y
}

/// Noise-free full convolution.
pub fn convolve(u: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if u.is_empty() {
        return Vec::new();
    }
    let mut y = vec![Complex64::new(0.0, 0.0); u.len() + h.len() - 1];
    for (k, &uk) in u.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            y[k + j] += hj * uk;
        }
    }
    y
}

/// `(V+L−1) × V` banded Toeplitz matrix whose column `k` is the taps
/// shifted down by `k`.
pub fn build_block_matrix(ch: &ChannelModel, v: usize) -> ComplexMat {
    let l = ch.len();
    let mut h = ComplexMat::zeros(v + l - 1, v);
    for k in 0..v {
        for (j, &t) in ch.taps().iter().enumerate() {
            h[(k + j, k)] = t;
        }
    }
    h
}

/// `W × (W+L−1)` window matrix with reversed taps on each row, and its
/// column `n2 + L` (1-based), the one multiplying the centre symbol.
pub fn build_window_matrix(
    ch: &ChannelModel,
    ws: WindowSpec,
) -> Result<(ComplexMat, Vec<Complex64>)> {
    let l = ch.len();
    ws.validate(l)?;
    let w = ws.len();
    let mut hw = ComplexMat::zeros(w, w + l - 1);
    for r in 0..w {
        for (j, &t) in ch.taps().iter().enumerate() {
            // tap j (0-based) sits L-1-j columns right of the row start
            hw[(r, r + l - 1 - j)] = t;
        }
    }
    let centre = hw.col(ws.n2 + l - 1);
    Ok((hw, centre))
}

//! Soft-input soft-output equalizers.
//!
//! Every equalizer takes the received samples, the channel and one
//! [`SymbolPrior`] per transmitted symbol, and returns per-symbol extrinsic
//! information in an [`EqualizerReport`]. The Gaussian equalizers (block
//! LMMSE, LMMSE filter, BEP, nuBEP, EP-F) report `CN(z_k, v_k²)` messages;
//! BCJR reports exact extrinsic pmfs.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, WindowSpec};
use crate::error::{Error, Result};
use crate::modem::{
    demap_extrinsic, demap_pmf, log_sum_exp, tilted_moments, Constellation, Domain, SymbolPrior,
    VARIANCE_FLOOR,
};
use crate::numerics::{
    cholesky_in_place, cholesky_solve_in_place, BandedHermitian, Complex64, GaussianMsg,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest trellis accepted by [`bcjr_equalize`].
pub const MAX_TRELLIS_STATES: usize = 4096;

/// Filter gains `fᴴh` at or below this are treated as degenerate.
pub const DEGENERATE_GAIN: f64 = 1e-12;

/// `β(t) = min(exp(t/1.5)/10, 0.7)`.
pub fn damping_schedule(t: usize) -> f64 {
    ((t as f64 / 1.5).exp() / 10.0).min(0.7)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Damping {
    /// [`damping_schedule`] of the turbo index.
    Schedule,
    Fixed(f64),
}

/// Discrete prior used inside moment matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    /// The decoder's pmf for each symbol.
    Decoder,
    /// Uniform over the constellation, whatever the decoder says.
    Uniform,
}

/// Parameters of the EP equalizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpParams {
    /// EP iterations at turbo index 0.
    pub iterations_first: usize,
    /// EP iterations once the decoder has fed back.
    pub iterations_turbo: usize,
    /// Floor on tilted variances.
    pub epsilon: f64,
    pub damping: Damping,
    pub prior_mode: PriorMode,
}

impl EpParams {
    /// nuBEP / EP-F defaults: 10 then 3 iterations, scheduled damping.
    pub fn nubep() -> Self {
        Self {
            iterations_first: 10,
            iterations_turbo: 3,
            epsilon: VARIANCE_FLOOR,
            damping: Damping::Schedule,
            prior_mode: PriorMode::Decoder,
        }
    }

    /// BEP defaults: 10 iterations, `β = 0.1`, uniform moment-matching prior.
    pub fn bep() -> Self {
        Self {
            iterations_first: 10,
            iterations_turbo: 10,
            epsilon: VARIANCE_FLOOR,
            damping: Damping::Fixed(0.1),
            prior_mode: PriorMode::Uniform,
        }
    }

    pub fn iterations(&self, t: usize) -> usize {
        if t == 0 {
            self.iterations_first
        } else {
            self.iterations_turbo
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        match self.damping {
            Damping::Schedule => damping_schedule(t),
            Damping::Fixed(b) => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations_first == 0 || self.iterations_turbo == 0 {
            return Err(Error::InvalidArgument(
                "EP needs at least one iteration".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Damping::Fixed(b) = self.damping {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "damping must lie in (0, 1], got {b}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for EpParams {
    fn default() -> Self {
        Self::nubep()
    }
}

/// Outcome of [`moment_match_damp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmUpdate {
    pub mean: Complex64,
    pub var: f64,
    /// The damped variance was not positive and the old pair was kept.
    pub reverted: bool,
}

/// Moment matching followed by damping in natural parameters.
///
/// The new Gaussian is the one whose product with the extrinsic `CN(z, v²)`
/// has moments `(μ_p, σ_p²)`; it is blended with `(m_old, η_old)` by `β` in
/// precision and precision-weighted mean. A non-positive result keeps the old
/// pair.
pub fn moment_match_damp(
    mu_p: Complex64,
    var_p: f64,
    z: Complex64,
    v2: f64,
    m_old: Complex64,
    eta_old: f64,
    beta: f64,
) -> MmUpdate {
    let keep = MmUpdate {
        mean: m_old,
        var: eta_old,
        reverted: false,
    };
    if beta == 0.0 {
        return keep;
    }
    let prec_new = 1.0 / var_p - 1.0 / v2;
    let nat_new = mu_p / var_p - z / v2;
    let prec = beta * prec_new + (1.0 - beta) / eta_old;
    let nat = nat_new * beta + m_old * ((1.0 - beta) / eta_old);
    let var = 1.0 / prec;
    let mean = nat * var;
    if !(prec > 0.0) || !var.is_finite() || !mean.re.is_finite() || !mean.im.is_finite() {
        return MmUpdate {
            reverted: true,
            ..keep
        };
    }
    MmUpdate {
        mean,
        var,
        reverted: false,
    }
}

/// Received samples plus what the receiver knows about the link.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    /// `V + L − 1` samples.
    pub y: &'a [Complex64],
    pub channel: &'a ChannelModel,
    pub constellation: &'a Constellation,
    pub domain: Domain,
}

impl<'a> Problem<'a> {
    pub fn new(
        y: &'a [Complex64],
        channel: &'a ChannelModel,
        constellation: &'a Constellation,
        domain: Domain,
    ) -> Self {
        Self {
            y,
            channel,
            constellation,
            domain,
        }
    }

    /// Number of transmitted symbols `V`.
    pub fn symbols(&self) -> usize {
        (self.y.len() + 1).saturating_sub(self.channel.len())
    }

    fn check(&self, priors: &[SymbolPrior]) -> Result<()> {
        if self.y.len() < self.channel.len() {
            return Err(Error::Dimension(format!(
                "{} samples cannot come from a {}-tap channel",
                self.y.len(),
                self.channel.len()
            )));
        }
        if priors.len() != self.symbols() {
            return Err(Error::Dimension(format!(
                "{} priors for {} symbols",
                priors.len(),
                self.symbols()
            )));
        }
        if priors
            .iter()
            .any(|p| p.pmf.len() != self.constellation.size())
        {
            return Err(Error::Dimension(
                "prior pmf size differs from the constellation".into(),
            ));
        }
        Ok(())
    }

    /// Samples and noise variance as seen in the working domain.
    fn working(&self) -> (Vec<Complex64>, f64) {
        let y = match self.domain {
            Domain::Complex => self.y.to_vec(),
            Domain::Real => self.y.iter().map(|v| Complex64::new(v.re, 0.0)).collect(),
        };
        (y, self.domain.noise_var(self.channel.noise_var()))
    }
}

/// Counters collected while equalizing one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub ep_iterations: usize,
    /// Moment-matching updates rejected for a non-positive variance.
    pub reverts: usize,
    /// Symbols whose extrinsic division failed during an EP pass.
    pub skipped_divisions: usize,
    /// Symbols whose final extrinsic fell back to the prior.
    pub degenerate: usize,
    /// Tilted variances raised to the floor.
    pub floored: usize,
    /// Smallest tilted variance passed to moment matching.
    pub min_mm_variance: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            ep_iterations: 0,
            reverts: 0,
            skipped_divisions: 0,
            degenerate: 0,
            floored: 0,
            min_mm_variance: f64::INFINITY,
        }
    }
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.ep_iterations += other.ep_iterations;
        self.reverts += other.reverts;
        self.skipped_divisions += other.skipped_divisions;
        self.degenerate += other.degenerate;
        self.floored += other.floored;
        self.min_mm_variance = self.min_mm_variance.min(other.min_mm_variance);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Extrinsic {
    Gaussian(Vec<GaussianMsg>),
    Pmf(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerReport {
    pub extrinsic: Extrinsic,
    /// Extrinsics of the first EP pass, before any moment matching. Empty
    /// for the non-iterative equalizers.
    pub first_pass: Vec<GaussianMsg>,
    pub diagnostics: Diagnostics,
}

impl EqualizerReport {
    pub fn len(&self) -> usize {
        match &self.extrinsic {
            Extrinsic::Gaussian(g) => g.len(),
            Extrinsic::Pmf(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gaussian(&self) -> Option<&[GaussianMsg]> {
        match &self.extrinsic {
            Extrinsic::Gaussian(g) => Some(g),
            Extrinsic::Pmf(_) => None,
        }
    }

    /// Extrinsic bit LLRs, `Q` per symbol in symbol order, each clipped to
    /// `[-clip, clip]`.
    pub fn llrs(&self, cst: &Constellation, domain: Domain, clip: f64) -> Vec<f64> {
        match &self.extrinsic {
            Extrinsic::Gaussian(g) => g
                .iter()
                .flat_map(|e| demap_extrinsic(*e, cst, domain, clip))
                .collect(),
            Extrinsic::Pmf(p) => p.iter().flat_map(|pmf| demap_pmf(pmf, cst, clip)).collect(),
        }
    }
}

/// Equalizer names accepted by the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EqualizerKind {
    #[serde(rename = "bcjr")]
    Bcjr,
    #[serde(rename = "lmmse-block")]
    LmmseBlock,
    #[serde(rename = "lmmse-filter")]
    LmmseFilter,
    #[serde(rename = "bep")]
    Bep,
    #[serde(rename = "nubep")]
    Nubep,
    #[serde(rename = "ep-f")]
    EpF,
}

impl EqualizerKind {
    pub const ALL: [EqualizerKind; 6] = [
        EqualizerKind::Bcjr,
        EqualizerKind::LmmseBlock,
        EqualizerKind::LmmseFilter,
        EqualizerKind::Bep,
        EqualizerKind::Nubep,
        EqualizerKind::EpF,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EqualizerKind::Bcjr => "bcjr",
            EqualizerKind::LmmseBlock => "lmmse-block",
            EqualizerKind::LmmseFilter => "lmmse-filter",
            EqualizerKind::Bep => "bep",
            EqualizerKind::Nubep => "nubep",
            EqualizerKind::EpF => "ep-f",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown equalizer '{s}'")))
    }

    /// Default EP parameters for this equalizer.
    pub fn default_params(self) -> EpParams {
        match self {
            EqualizerKind::Bep => EpParams::bep(),
            _ => EpParams::nubep(),
        }
    }
}

impl std::fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An equalizer together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equalizer {
    pub kind: EqualizerKind,
    pub params: EpParams,
    /// Window of the filter equalizers; `None` picks [`WindowSpec::for_taps`].
    pub window: Option<WindowSpec>,
}

impl Equalizer {
    pub fn new(kind: EqualizerKind) -> Self {
        Self {
            kind,
            params: kind.default_params(),
            window: None,
        }
    }

    pub fn equalize(
        &self,
        p: &Problem,
        priors: &[SymbolPrior],
        t: usize,
    ) -> Result<EqualizerReport> {
        let ws = self
            .window
            .unwrap_or_else(|| WindowSpec::for_taps(p.channel.len()));
        match self.kind {
            EqualizerKind::Bcjr => bcjr_equalize(p, priors),
            EqualizerKind::LmmseBlock => block_lmmse_equalize(p, priors),
            EqualizerKind::LmmseFilter => lmmse_filter_equalize(p, priors, ws),
            EqualizerKind::Bep => bep_equalize(p, priors, &self.params, t),
            EqualizerKind::Nubep => nubep_equalize(p, priors, &self.params, t),
            EqualizerKind::EpF => epf_equalize(p, priors, ws, &self.params, t),
        }
    }
}

fn initial_moments(priors: &[SymbolPrior], eps: f64) -> (Vec<Complex64>, Vec<f64>) {
    (
        priors.iter().map(|p| p.mean).collect(),
        priors.iter().map(|p| p.var.max(eps)).collect(),
    )
}

/// Posterior means and variances of the Gaussian model
/// `y = Hu + w`, `u_k ~ CN(m_k, η_k)`, from one banded factorization of
/// `C = σ²I + H·diag(η)·Hᴴ`.
pub fn posterior_moments(
    y: &[Complex64],
    taps: &[Complex64],
    noise_var: f64,
    m: &[Complex64],
    eta: &[f64],
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let sol = BlockSolution::new(y, taps, noise_var, m, eta)?;
    let mean = (0..m.len()).map(|k| m[k] + sol.hx[k] * eta[k]).collect();
    let var = (0..m.len())
        .map(|k| eta[k] - eta[k] * eta[k] * sol.q[k])
        .collect();
    Ok((mean, var))
}

struct BlockSolution {
    /// `h_kᴴ C⁻¹ (y − Hm)`
    hx: Vec<Complex64>,
    /// `h_kᴴ C⁻¹ h_k`
    q: Vec<f64>,
}

impl BlockSolution {
    fn new(
        y: &[Complex64],
        taps: &[Complex64],
        noise_var: f64,
        m: &[Complex64],
        eta: &[f64],
    ) -> Result<Self> {
        let l = taps.len();
        let v = m.len();
        let n = v + l - 1;
        if y.len() != n || eta.len() != v {
            return Err(Error::Dimension(format!(
                "{} samples, {} means, {} variances, {l} taps",
                y.len(),
                v,
                eta.len()
            )));
        }
        let mut c = BandedHermitian::zeros(n, l - 1);
        for i in 0..n {
            c.add_lower(i, i, Complex64::new(noise_var, 0.0));
        }
        let mut r = y.to_vec();
        for k in 0..v {
            for a in 0..l {
                r[k + a] -= taps[a] * m[k];
                for b in 0..=a {
                    c.add_lower(k + a, k + b, taps[a] * taps[b].conj() * eta[k]);
                }
            }
        }
        let ldl = c.factor()?;
        ldl.solve_in_place(&mut r);
        let z = ldl.band_inverse();
        let hx = (0..v)
            .map(|k| (0..l).map(|a| taps[a].conj() * r[k + a]).sum())
            .collect();
        let q = (0..v).map(|k| z.quadratic_form(k, taps)).collect();
        Ok(Self { hx, q })
    }

    /// Extrinsic `CN(z_k, v_k²)`, `None` when the division leaves no
    /// positive variance.
    fn extrinsic(&self, k: usize, m: Complex64, eta: f64) -> Option<GaussianMsg> {
        let q = self.q[k];
        if !(q > 0.0) {
            return None;
        }
        let v2 = 1.0 / q - eta;
        let z = m + self.hx[k] / q;
        (v2 > 0.0 && v2.is_finite() && z.re.is_finite() && z.im.is_finite())
            .then_some(GaussianMsg { mean: z, var: v2 })
    }
}

fn block_pass(
    y: &[Complex64],
    taps: &[Complex64],
    nv: f64,
    m: &[Complex64],
    eta: &[f64],
) -> Result<Vec<Option<GaussianMsg>>> {
    let sol = BlockSolution::new(y, taps, nv, m, eta)?;
    Ok((0..m.len())
        .map(|k| sol.extrinsic(k, m[k], eta[k]))
        .collect())
}

fn finish(
    ext: Vec<Option<GaussianMsg>>,
    priors: &[SymbolPrior],
    diag: &mut Diagnostics,
) -> Vec<GaussianMsg> {
    ext.into_iter()
        .zip(priors)
        .map(|(e, p)| {
            e.unwrap_or_else(|| {
                diag.degenerate += 1;
                GaussianMsg {
                    mean: p.mean,
                    var: p.var.max(VARIANCE_FLOOR),
                }
            })
        })
        .collect()
}

/// LMMSE over the whole frame with Gaussian priors `CN(m_k, η_k)` from the
/// decoder; the extrinsic removes each symbol's own prior.
pub fn block_lmmse_equalize(p: &Problem, priors: &[SymbolPrior]) -> Result<EqualizerReport> {
    p.check(priors)?;
    let (y, nv) = p.working();
    let (m, eta) = initial_moments(priors, VARIANCE_FLOOR);
    let ext = block_pass(&y, p.channel.taps(), nv, &m, &eta)?;
    let mut diagnostics = Diagnostics::default();
    let ext = finish(ext, priors, &mut diagnostics);
    Ok(EqualizerReport {
        extrinsic: Extrinsic::Gaussian(ext),
        first_pass: Vec::new(),
        diagnostics,
    })
}

/// Shared EP loop: `pass` maps the current `(m, η)` to per-symbol extrinsics.
fn run_ep(
    p: &Problem,
    priors: &[SymbolPrior],
    params: &EpParams,
    t: usize,
    mut pass: impl FnMut(&[Complex64], &[f64]) -> Result<Vec<Option<GaussianMsg>>>,
) -> Result<EqualizerReport> {
    params.validate()?;
    p.check(priors)?;
    let cst = p.constellation;
    let (mut m, mut eta) = initial_moments(priors, params.epsilon);
    let uniform = SymbolPrior::uniform(cst).pmf;
    let beta = params.beta(t);
    let iterations = params.iterations(t);
    let mut diag = Diagnostics {
        ep_iterations: iterations,
        ..Diagnostics::default()
    };
    let mut first_pass = Vec::new();
    for s in 0..iterations {
        let ext = pass(&m, &eta)?;
        if s == 0 {
            first_pass = finish(ext.clone(), priors, &mut Diagnostics::default());
        }
        for (k, e) in ext.iter().enumerate() {
            let Some(e) = e else {
                diag.skipped_divisions += 1;
                continue;
            };
            let pmf = match params.prior_mode {
                PriorMode::Decoder => &priors[k].pmf,
                PriorMode::Uniform => &uniform,
            };
            let (mu_p, mut var_p) = tilted_moments(*e, pmf, cst, p.domain);
            if !(var_p >= params.epsilon) {
                var_p = params.epsilon;
                diag.floored += 1;
            }
            diag.min_mm_variance = diag.min_mm_variance.min(var_p);
            let upd = moment_match_damp(mu_p, var_p, e.mean, e.var, m[k], eta[k], beta);
            if upd.reverted {
                diag.reverts += 1;
            } else {
                m[k] = upd.mean;
                eta[k] = upd.var;
            }
        }
    }
    let ext = pass(&m, &eta)?;
    let ext = finish(ext, priors, &mut diag);
    Ok(EqualizerReport {
        extrinsic: Extrinsic::Gaussian(ext),
        first_pass,
        diagnostics: diag,
    })
}

/// Block EP equalizer with the decoder's pmf in moment matching (or the
/// uniform pmf, as `params.prior_mode` says).
pub fn nubep_equalize(
    p: &Problem,
    priors: &[SymbolPrior],
    params: &EpParams,
    t: usize,
) -> Result<EqualizerReport> {
    let (y, nv) = p.working();
    let taps = p.channel.taps().to_vec();
    run_ep(p, priors, params, t, |m, eta| {
        block_pass(&y, &taps, nv, m, eta)
    })
}

/// Block EP with uniform moment-matching priors at every turbo iteration.
pub fn bep_equalize(
    p: &Problem,
    priors: &[SymbolPrior],
    params: &EpParams,
    t: usize,
) -> Result<EqualizerReport> {
    let params = EpParams {
        prior_mode: PriorMode::Uniform,
        ..*params
    };
    nubep_equalize(p, priors, &params, t)
}

/// Everything computed for one symbol by the windowed LMMSE filter.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSolution {
    /// Filter `f = Es·(Σ + (Es − η_k)·h_W·h_Wᴴ)⁻¹·h_W`.
    pub filter: Vec<Complex64>,
    /// Centre column `h_W`.
    pub centre: Vec<Complex64>,
    /// `fᴴ(y_W − H_W·m + m_k·h_W)`
    pub estimate: Complex64,
    /// `Re(fᴴh_W)`
    pub gain: f64,
}

impl WindowSolution {
    /// Extrinsic of the transmitted symbol, `None` when the gain is
    /// degenerate or the variance is not positive.
    pub fn extrinsic(&self, es: f64) -> Option<GaussianMsg> {
        let g = self.gain;
        if !(g > DEGENERATE_GAIN) {
            return None;
        }
        let v2 = es * (1.0 - g) / g;
        let z = self.estimate / g;
        (v2 > 0.0 && v2.is_finite()).then_some(GaussianMsg { mean: z, var: v2 })
    }
}

/// Reusable state for the per-symbol window solves.
struct WindowFilter<'a> {
    y: &'a [Complex64],
    taps: &'a [Complex64],
    ws: WindowSpec,
    nv: f64,
    es: f64,
    a: Vec<Complex64>,
    f: Vec<Complex64>,
    centre: Vec<Complex64>,
    mw: Vec<Complex64>,
    ew: Vec<f64>,
}

impl<'a> WindowFilter<'a> {
    fn new(
        y: &'a [Complex64],
        taps: &'a [Complex64],
        ws: WindowSpec,
        nv: f64,
        es: f64,
    ) -> Result<Self> {
        ws.validate(taps.len())?;
        let w = ws.len();
        let l = taps.len();
        let mut centre = vec![ZERO; w];
        // column n2+L−1 carries tap j on row n2+j
        for (j, &t) in taps.iter().enumerate() {
            if ws.n2 + j < w {
                centre[ws.n2 + j] = t;
            }
        }
        Ok(Self {
            y,
            taps,
            ws,
            nv,
            es,
            a: vec![ZERO; w * w],
            f: vec![ZERO; w],
            centre,
            mw: vec![ZERO; w + l - 1],
            ew: vec![0.0; w + l - 1],
        })
    }

    fn solve(&mut self, k: usize, m: &[Complex64], eta: &[f64]) -> Result<(Complex64, f64)> {
        let w = self.ws.len();
        let l = self.taps.len();
        let cols = w + l - 1;
        let v = m.len() as isize;
        let first = k as isize - (l + self.ws.n2) as isize + 1;
        let centre_col = self.ws.n2 + l - 1;
        for c in 0..cols {
            let idx = first + c as isize;
            let (mc, ec) = if idx >= 0 && idx < v {
                (m[idx as usize], eta[idx as usize])
            } else {
                (ZERO, 0.0)
            };
            self.mw[c] = mc;
            self.ew[c] = ec;
        }
        self.a.iter_mut().for_each(|x| *x = ZERO);
        for r in 0..w {
            self.a[r * w + r] = Complex64::new(self.nv, 0.0);
        }
        for c in 0..cols {
            let d = if c == centre_col { self.es } else { self.ew[c] };
            if d == 0.0 {
                continue;
            }
            // rows touching column c: r = c + j − (L−1)
            for ja in 0..l {
                let Some(ra) = (c + ja).checked_sub(l - 1).filter(|&r| r < w) else {
                    continue;
                };
                for jb in 0..l {
                    let Some(rb) = (c + jb).checked_sub(l - 1).filter(|&r| r <= ra) else {
                        continue;
                    };
                    self.a[ra * w + rb] += self.taps[ja] * self.taps[jb].conj() * d;
                }
            }
        }
        cholesky_in_place(&mut self.a, w)?;
        for (fi, hi) in self.f.iter_mut().zip(&self.centre) {
            *fi = hi * self.es;
        }
        cholesky_solve_in_place(&self.a, w, &mut self.f);
        // residual y_W − H_W m + m_k h_W, with the centre mean added back
        let mut estimate = ZERO;
        let y0 = k as isize - self.ws.n2 as isize;
        for r in 0..w {
            let yi = y0 + r as isize;
            let mut res = if yi >= 0 && (yi as usize) < self.y.len() {
                self.y[yi as usize]
            } else {
                ZERO
            };
            for (j, &t) in self.taps.iter().enumerate() {
                let c = r + l - 1 - j;
                if c != centre_col {
                    res -= t * self.mw[c];
                }
            }
            estimate += self.f[r].conj() * res;
        }
        let gain = self
            .f
            .iter()
            .zip(&self.centre)
            .map(|(f, h)| f.conj() * h)
            .sum::<Complex64>()
            .re;
        Ok((estimate, gain))
    }

    fn pass(&mut self, m: &[Complex64], eta: &[f64]) -> Result<Vec<Option<GaussianMsg>>> {
        let es = self.es;
        (0..m.len())
            .map(|k| {
                let (estimate, gain) = self.solve(k, m, eta)?;
                if !(gain > DEGENERATE_GAIN) {
                    return Ok(None);
                }
                let v2 = es * (1.0 - gain) / gain;
                Ok((v2 > 0.0 && v2.is_finite()).then_some(GaussianMsg {
                    mean: estimate / gain,
                    var: v2,
                }))
            })
            .collect()
    }
}

/// Solves the window filter for symbol `k` given prior moments `(m, η)` of
/// all `V` symbols.
pub fn filter_window(
    p: &Problem,
    ws: WindowSpec,
    m: &[Complex64],
    eta: &[f64],
    k: usize,
) -> Result<WindowSolution> {
    let (y, nv) = p.working();
    if k >= m.len() || m.len() != p.symbols() || eta.len() != m.len() {
        return Err(Error::Dimension(format!(
            "symbol {k} of {} ({} variances)",
            m.len(),
            eta.len()
        )));
    }
    let mut wf = WindowFilter::new(&y, p.channel.taps(), ws, nv, p.constellation.energy())?;
    let (estimate, gain) = wf.solve(k, m, eta)?;
    Ok(WindowSolution {
        filter: wf.f.clone(),
        centre: wf.centre.clone(),
        estimate,
        gain,
    })
}

/// Sliding-window LMMSE filter with Gaussian priors from the decoder.
pub fn lmmse_filter_equalize(
    p: &Problem,
    priors: &[SymbolPrior],
    ws: WindowSpec,
) -> Result<EqualizerReport> {
    p.check(priors)?;
    let (y, nv) = p.working();
    let (m, eta) = initial_moments(priors, VARIANCE_FLOOR);
    let mut wf = WindowFilter::new(&y, p.channel.taps(), ws, nv, p.constellation.energy())?;
    let ext = wf.pass(&m, &eta)?;
    let mut diagnostics = Diagnostics::default();
    let ext = finish(ext, priors, &mut diagnostics);
    Ok(EqualizerReport {
        extrinsic: Extrinsic::Gaussian(ext),
        first_pass: Vec::new(),
        diagnostics,
    })
}

/// EP on top of the window filter: each pass recomputes every symbol's
/// filter from the current `(m, η)`.
pub fn epf_equalize(
    p: &Problem,
    priors: &[SymbolPrior],
    ws: WindowSpec,
    params: &EpParams,
    t: usize,
) -> Result<EqualizerReport> {
    let (y, nv) = p.working();
    let mut wf = WindowFilter::new(&y, p.channel.taps(), ws, nv, p.constellation.energy())?;
    run_ep(p, priors, params, t, |m, eta| wf.pass(m, eta))
}

/// MAP symbol equalizer on the `M^(L−1)`-state trellis. Extrinsic pmfs are
/// the posteriors with each symbol's own prior removed.
pub fn bcjr_equalize(p: &Problem, priors: &[SymbolPrior]) -> Result<EqualizerReport> {
    p.check(priors)?;
    let cst = p.constellation;
    let mm = cst.size();
    let l = p.channel.len();
    let states = (0..l - 1)
        .try_fold(1usize, |acc, _| acc.checked_mul(mm))
        .filter(|&s| s <= MAX_TRELLIS_STATES);
    let Some(states) = states else {
        return Err(Error::TrellisTooLarge {
            states: (mm as f64).powi(l as i32 - 1) as usize,
            limit: MAX_TRELLIS_STATES,
        });
    };
    let v = p.symbols();
    let steps = p.y.len();
    let taps = p.channel.taps();
    let pts = cst.points();
    let inv_nv = 1.0 / p.channel.noise_var();
    let shift = states / mm.max(1);
    let log_prior: Vec<Vec<f64>> = priors
        .iter()
        .map(|pr| pr.pmf.iter().map(|x| x.ln()).collect())
        .collect();

    // likelihood of sample i given previous-symbol state s and input digit a
    let metric = |i: usize, s: usize, a: usize| -> f64 {
        let mut mean = if i < v { taps[0] * pts[a] } else { ZERO };
        let mut rest = s;
        for (j, &t) in taps.iter().enumerate().skip(1) {
            let d = rest % mm;
            rest /= mm;
            if i >= j && i - j < v {
                mean += t * pts[d];
            }
        }
        -(p.y[i] - mean).norm_sqr() * inv_nv
    };
    let inputs = |i: usize| if i < v { mm } else { 1 };
    let next = |s: usize, a: usize| if states == 1 { 0 } else { a + mm * (s % shift) };

    let mut alpha = vec![f64::NEG_INFINITY; (steps + 1) * states];
    alpha[0] = 0.0;
    for i in 0..steps {
        let (cur, nxt) = alpha[i * states..(i + 2) * states].split_at_mut(states);
        for (s, &a_s) in cur.iter().enumerate() {
            if a_s == f64::NEG_INFINITY {
                continue;
            }
            for a in 0..inputs(i) {
                let g = metric(i, s, a) + if i < v { log_prior[i][a] } else { 0.0 };
                let t = &mut nxt[next(s, a)];
                *t = log_add(*t, a_s + g);
            }
        }
        // renormalize to keep magnitudes bounded
        let mx = nxt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if mx.is_finite() {
            nxt.iter_mut().for_each(|x| *x -= mx);
        }
    }
    let mut beta_next = vec![0.0; states];
    let mut beta_cur = vec![f64::NEG_INFINITY; states];
    let mut ext = vec![Vec::new(); v];
    for i in (0..steps).rev() {
        let cur = &alpha[i * states..(i + 1) * states];
        if i < v {
            let logs: Vec<f64> = (0..mm)
                .map(|a| {
                    log_sum_exp(
                        (0..states)
                            .filter(|&s| cur[s] > f64::NEG_INFINITY)
                            .map(|s| cur[s] + metric(i, s, a) + beta_next[next(s, a)]),
                    )
                })
                .collect();
            let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logs.iter().map(|x| (x - mx).exp()).collect();
            let total: f64 = w.iter().sum();
            ext[i] = w.iter().map(|x| x / total).collect();
        }
        for (s, b) in beta_cur.iter_mut().enumerate() {
            *b = f64::NEG_INFINITY;
            for a in 0..inputs(i) {
                let g = metric(i, s, a) + if i < v { log_prior[i][a] } else { 0.0 };
                *b = log_add(*b, g + beta_next[next(s, a)]);
            }
        }
        let mx = beta_cur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if mx.is_finite() {
            beta_cur.iter_mut().for_each(|x| *x -= mx);
        }
        std::mem::swap(&mut beta_cur, &mut beta_next);
    }
    Ok(EqualizerReport {
        extrinsic: Extrinsic::Pmf(ext),
        first_pass: Vec::new(),
        diagnostics: Diagnostics::default(),
    })
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

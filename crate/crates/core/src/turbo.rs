//! Transmitter, channel and the iterative equalizer/decoder receiver for one
//! frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ebn0_to_noise_var, transmit, ChannelModel, WindowSpec};
use crate::coding::{build_ldpc, Interleaver, LdpcCode};
use crate::equalizers::{Diagnostics, EpParams, Equalizer, EqualizerKind, Problem};
use crate::error::{Error, Result};
use crate::modem::{
    build_constellation, map_bits, prior_from_llr, Constellation, ConstellationKind, Domain,
    SymbolPrior, LLR_CLIP,
};
use crate::numerics::Complex64;

/// Prior LLR given to padding bits, which are known to be zero.
const PAD_LLR: f64 = 30.0;

const STREAM_CODE: u64 = 0xC0DE;
const STREAM_DATA: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_INTERLEAVER: u64 = 3;

/// Derives an independent child seed (SplitMix64 finalizer over the pair).
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut z = parent
        ^ stream
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the LDPC code used by every frame of a run.
pub fn code_seed(master: u64) -> u64 {
    derive_seed(master, STREAM_CODE)
}

/// Seed of frame `frame` at grid point `point`.
pub fn frame_seed(master: u64, point: usize, frame: usize) -> u64 {
    derive_seed(
        derive_seed(master, 0x5EED_0000 + point as u64),
        frame as u64,
    )
}

/// Everything needed to simulate one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub constellation: ConstellationKind,
    /// Channel taps as `[re, im]` pairs.
    pub taps: Vec<[f64; 2]>,
    pub code_length: usize,
    #[serde(default)]
    pub window: Option<WindowSpec>,
    pub equalizer: EqualizerKind,
    /// EP parameters; the equalizer's defaults when absent.
    #[serde(default)]
    pub ep: Option<EpParams>,
    pub turbo_iterations: usize,
    pub eb_n0_db: f64,
    #[serde(default = "default_bp_iterations")]
    pub bp_iterations: usize,
    #[serde(default = "default_clip")]
    pub llr_clip: f64,
    /// Processing domain of the Gaussian equalizers.
    pub domain: Domain,
}

fn default_bp_iterations() -> usize {
    100
}

fn default_clip() -> f64 {
    LLR_CLIP
}

impl LinkConfig {
    /// Defaults for everything but the scenario.
    pub fn new(
        constellation: ConstellationKind,
        taps: &[f64],
        code_length: usize,
        equalizer: EqualizerKind,
        eb_n0_db: f64,
    ) -> Self {
        let taps: Vec<[f64; 2]> = taps.iter().map(|&t| [t, 0.0]).collect();
        Self {
            constellation,
            domain: Domain::natural(constellation, &taps),
            taps,
            code_length,
            window: None,
            equalizer,
            ep: None,
            turbo_iterations: 5,
            eb_n0_db,
            bp_iterations: default_bp_iterations(),
            llr_clip: default_clip(),
        }
    }

    pub fn complex_taps(&self) -> Vec<Complex64> {
        self.taps
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect()
    }

    pub fn equalizer_setup(&self) -> Equalizer {
        Equalizer {
            kind: self.equalizer,
            params: self.ep.unwrap_or_else(|| self.equalizer.default_params()),
            window: self.window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::InvalidArgument(
                "channel needs at least one tap".into(),
            ));
        }
        if self.turbo_iterations == 0 {
            return Err(Error::InvalidArgument(
                "at least one turbo iteration is required".into(),
            ));
        }
        if !self.eb_n0_db.is_finite() {
            return Err(Error::InvalidArgument("Eb/N0 must be finite".into()));
        }
        if !(self.llr_clip > 0.0) {
            return Err(Error::InvalidArgument("LLR clip must be positive".into()));
        }
        if let Some(ws) = self.window {
            ws.validate(self.taps.len())?;
        }
        self.equalizer_setup().params.validate()
    }
}

/// Outcome of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// Information-bit errors after each turbo iteration.
    pub bit_errors: Vec<usize>,
    /// Belief-propagation iterations per turbo iteration actually run.
    pub decoder_iterations: Vec<usize>,
    /// Turbo iteration at which the decoder found a codeword, if any.
    pub converged_at: Option<usize>,
    pub diagnostics: Diagnostics,
}

/// A configured link with its code built once.
#[derive(Debug, Clone)]
pub struct Link {
    cfg: LinkConfig,
    code: LdpcCode,
    constellation: Constellation,
    channel: ChannelModel,
    domain: Domain,
    equalizer: Equalizer,
    pad: usize,
}

impl Link {
    /// Builds the code from `code_seed(master)`.
    pub fn new(cfg: LinkConfig, master: u64) -> Result<Self> {
        cfg.validate()?;
        let code = build_ldpc(cfg.code_length, code_seed(master))?;
        Self::with_code(cfg, code)
    }

    pub fn with_code(cfg: LinkConfig, code: LdpcCode) -> Result<Self> {
        cfg.validate()?;
        let constellation = build_constellation(cfg.constellation);
        let q = constellation.bits_per_symbol();
        let nv = ebn0_to_noise_var(cfg.eb_n0_db, constellation.energy(), code.rate(), q);
        let channel = ChannelModel::new(cfg.complex_taps(), nv)?;
        let domain = cfg.domain;
        let pad = (q - code.n() % q) % q;
        Ok(Self {
            equalizer: cfg.equalizer_setup(),
            cfg,
            code,
            constellation,
            channel,
            domain,
            pad,
        })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Zero bits appended after interleaving to fill the last symbol.
    pub fn padding(&self) -> usize {
        self.pad
    }

    /// Information bits, interleaver and received samples of a frame. Depends
    /// only on the seed and the link, never on the equalizer.
    pub fn transmit_frame(&self, seed: u64) -> Result<(Vec<u8>, Interleaver, Vec<Complex64>)> {
        let mut data = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_DATA));
        let info: Vec<u8> = (0..self.code.k())
            .map(|_| data.random_range(0..2))
            .collect();
        let codeword = self.code.encode(&info)?;
        let iv = Interleaver::random(self.code.n(), derive_seed(seed, STREAM_INTERLEAVER));
        let mut bits = iv.interleave(&codeword)?;
        bits.resize(bits.len() + self.pad, 0);
        let u = map_bits(&bits, &self.constellation)?;
        let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_NOISE));
        let y = transmit(&u, &self.channel, &mut noise);
        Ok((info, iv, y))
    }

    pub fn run_frame(&self, seed: u64) -> Result<FrameResult> {
        self.run_frame_inner(seed).map_err(|e| Error::Frame {
            seed,
            source: Box::new(e),
        })
    }

    fn run_frame_inner(&self, seed: u64) -> Result<FrameResult> {
        let (info, iv, y) = self.transmit_frame(seed)?;
        let cst = &self.constellation;
        let q = cst.bits_per_symbol();
        let n = self.code.n();
        let t_max = self.cfg.turbo_iterations;
        let problem = Problem::new(&y, &self.channel, cst, self.domain);
        let mut priors = vec![SymbolPrior::uniform(cst); (n + self.pad) / q];
        let mut result = FrameResult {
            bit_errors: Vec::with_capacity(t_max),
            decoder_iterations: Vec::with_capacity(t_max),
            converged_at: None,
            diagnostics: Diagnostics::default(),
        };
        for t in 0..t_max {
            let report = self.equalizer.equalize(&problem, &priors, t)?;
            result.diagnostics.merge(&report.diagnostics);
            let mut llr = report.llrs(cst, self.domain, self.cfg.llr_clip);
            llr.truncate(n);
            let out = self
                .code
                .decode(&iv.deinterleave(&llr)?, self.cfg.bp_iterations)?;
            let errors = out.info.iter().zip(&info).filter(|(a, b)| a != b).count();
            result.bit_errors.push(errors);
            result.decoder_iterations.push(out.iterations);
            if out.converged {
                result.converged_at = Some(t);
                result.bit_errors.resize(t_max, errors);
                break;
            }
            if t + 1 < t_max {
                let mut ld = iv.interleave(&out.extrinsic)?;
                ld.resize(n + self.pad, PAD_LLR);
                priors = ld.chunks(q).map(|c| prior_from_llr(c, cst)).collect();
            }
        }
        Ok(result)
    }
}

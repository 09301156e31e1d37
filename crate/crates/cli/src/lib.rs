//! Configuration, presets and commands behind the `turbo-ep` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use turbo_ep::channel::{preset_taps, WindowSpec};
use turbo_ep::coding::build_ldpc;
use turbo_ep::equalizers::{EpParams, Equalizer, EqualizerKind};
use turbo_ep::evaluation::{
    ber_sweep_observed, exit_decoder, exit_equalizer, write_ber_csv, write_exit_csv, BerRecord,
    ExitOptions, ExitRecord, SweepOptions,
};
use turbo_ep::modem::{ConstellationKind, Domain};
use turbo_ep::turbo::{code_seed, LinkConfig};
use turbo_ep::validation::{run_suite, CheckReport, Suite, ValidateOptions};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "TURBO_EP_OUT";

/// Frames per point restored by `--full-scale`.
pub const FULL_SCALE_FRAMES: usize = 10_000;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Run(m) => f.write_str(m),
        }
    }
}

impl From<turbo_ep::Error> for CliError {
    fn from(e: turbo_ep::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn default_seed() -> u64 {
    1
}

/// Top-level run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ber: Option<BerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit: Option<ExitSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerSection {
    pub equalizers: Vec<String>,
    #[serde(default = "default_min_frames")]
    pub min_frames: usize,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    pub scenario: Vec<Scenario>,
}

fn default_min_frames() -> usize {
    200
}

fn default_min_errors() -> u64 {
    100
}

fn default_turbo() -> usize {
    5
}

/// One link setup swept over Eb/N0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub label: String,
    pub constellation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<Vec<[f64; 2]>>,
    pub code_length: usize,
    #[serde(default = "default_turbo")]
    pub turbo_iterations: usize,
    pub eb_n0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    /// Real for BPSK over real taps, complex otherwise, when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    /// EP parameters per equalizer name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ep: BTreeMap<String, EpParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitSection {
    pub equalizers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<Vec<[f64; 2]>>,
    pub eb_n0: Vec<f64>,
    #[serde(default = "default_i_grid")]
    pub i_in: Vec<f64>,
    #[serde(default = "default_symbols")]
    pub symbols: usize,
    #[serde(default = "default_decoder_length")]
    pub decoder_code_length: usize,
    #[serde(default = "default_decoder_frames")]
    pub decoder_frames: usize,
    /// Real for BPSK over real taps, complex otherwise, when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

/// `0:0.05:0.95`
pub fn default_i_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 * 0.05).collect()
}

fn default_symbols() -> usize {
    100_000
}

fn default_decoder_length() -> usize {
    4096
}

fn default_decoder_frames() -> usize {
    20
}

fn resolve_taps(
    channel: &Option<String>,
    taps: &Option<Vec<[f64; 2]>>,
) -> CliResult<Vec<[f64; 2]>> {
    match (channel, taps) {
        (Some(name), None) => Ok(preset_taps(name)
            .map_err(usage)?
            .iter()
            .map(|&t| [t, 0.0])
            .collect()),
        (None, Some(t)) if !t.is_empty() => Ok(t.clone()),
        (None, Some(_)) => Err(usage("`taps` must not be empty")),
        _ => Err(usage("give exactly one of `channel` and `taps`")),
    }
}

fn parse_kinds(names: &[String]) -> CliResult<Vec<EqualizerKind>> {
    if names.is_empty() {
        return Err(usage("no equalizers configured"));
    }
    names
        .iter()
        .map(|n| EqualizerKind::parse(n).map_err(usage))
        .collect()
}

impl Scenario {
    /// Link configuration for `kind` at the first grid point.
    pub fn link_config(&self, kind: EqualizerKind) -> CliResult<LinkConfig> {
        let taps = resolve_taps(&self.channel, &self.taps)?;
        let constellation = ConstellationKind::parse(&self.constellation).map_err(usage)?;
        let cfg = LinkConfig {
            constellation,
            taps: taps.clone(),
            code_length: self.code_length,
            window: self.window,
            equalizer: kind,
            ep: self.ep.get(kind.name()).cloned(),
            turbo_iterations: self.turbo_iterations,
            eb_n0_db: self.eb_n0.first().copied().unwrap_or(0.0),
            domain: self.domain.unwrap_or(Domain::natural(constellation, &taps)),
            ..LinkConfig::new(constellation, &[1.0], self.code_length, kind, 0.0)
        };
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| usage(format!("invalid config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Schema checks that serde cannot express.
    pub fn check(&self) -> CliResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(usage("`name` must be a plain file-name prefix"));
        }
        if let Some(b) = &self.ber {
            let kinds = parse_kinds(&b.equalizers)?;
            if b.scenario.is_empty() {
                return Err(usage("`ber` needs at least one [[ber.scenario]]"));
            }
            if b.min_frames == 0 {
                return Err(usage("`min_frames` must be positive"));
            }
            for s in &b.scenario {
                if s.eb_n0.is_empty() {
                    return Err(usage("empty `eb_n0` grid"));
                }
                for name in s.ep.keys() {
                    EqualizerKind::parse(name).map_err(usage)?;
                }
                for &k in &kinds {
                    s.link_config(k)?;
                }
            }
        }
        if let Some(x) = &self.exit {
            parse_kinds(&x.equalizers)?;
            resolve_taps(&x.channel, &x.taps)?;
            if x.eb_n0.is_empty() || x.i_in.is_empty() {
                return Err(usage("empty `eb_n0` or `i_in` grid"));
            }
            if x.i_in.iter().any(|i| !(0.0..=1.0).contains(i)) {
                return Err(usage("`i_in` values must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(eq) = &o.equalizer {
            EqualizerKind::parse(eq).map_err(usage)?;
            if let Some(b) = &mut self.ber {
                b.equalizers = vec![eq.clone()];
            }
            if let Some(x) = &mut self.exit {
                x.equalizers = vec![eq.clone()];
            }
        }
        if let Some(db) = o.eb_n0 {
            if let Some(b) = &mut self.ber {
                b.scenario.iter_mut().for_each(|s| s.eb_n0 = vec![db]);
            }
            if let Some(x) = &mut self.exit {
                x.eb_n0 = vec![db];
            }
        }
        if o.full_scale {
            if let Some(b) = &mut self.ber {
                b.min_frames = FULL_SCALE_FRAMES;
                b.min_errors = u64::MAX;
            }
            if let Some(x) = &mut self.exit {
                x.symbols = x.symbols.max(1_000_000);
                x.decoder_frames = x.decoder_frames.max(200);
            }
        }
        self.check()
    }
}

/// Command-line overrides shared by `ber` and `exit`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub full_scale: bool,
    pub out: Option<PathBuf>,
    pub eb_n0: Option<f64>,
    pub equalizer: Option<String>,
}

pub const PRESETS: [&str; 10] = [
    "fig2", "fig3a", "fig3b", "fig3c", "fig3d", "fig3e", "fig3f", "fig4", "fig5", "fig6",
];

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn scenario(label: &str, cst: &str, channel: &str, n: usize, eb_n0: Vec<f64>) -> Scenario {
    Scenario {
        label: label.into(),
        constellation: cst.into(),
        channel: Some(channel.into()),
        taps: None,
        code_length: n,
        turbo_iterations: 5,
        eb_n0,
        window: None,
        domain: None,
        ep: BTreeMap::new(),
    }
}

fn names(kinds: &[EqualizerKind]) -> Vec<String> {
    kinds.iter().map(|k| k.name().to_string()).collect()
}

const STANDARD_SET: [EqualizerKind; 5] = [
    EqualizerKind::Bep,
    EqualizerKind::Nubep,
    EqualizerKind::EpF,
    EqualizerKind::LmmseBlock,
    EqualizerKind::Bcjr,
];

/// Built-in configurations named after the figures they regenerate.
/// Panels of one figure that differ only in the plotted turbo iteration
/// share a configuration; every CSV carries all turbo iterations.
pub fn preset(name: &str) -> CliResult<RunConfig> {
    let mut cfg = RunConfig {
        name: name.into(),
        seed: 1,
        workers: 0,
        out: None,
        ber: None,
        exit: None,
    };
    let ber = |equalizers: &[EqualizerKind], scenario: Vec<Scenario>| BerSection {
        equalizers: names(equalizers),
        min_frames: default_min_frames(),
        min_errors: default_min_errors(),
        scenario,
    };
    let no_bcjr = &STANDARD_SET[..4];
    match name {
        "fig2" => {
            cfg.exit = Some(ExitSection {
                equalizers: names(&STANDARD_SET),
                channel: Some("proakis-c".into()),
                taps: None,
                eb_n0: vec![7.0, 9.0],
                i_in: default_i_grid(),
                symbols: default_symbols(),
                decoder_code_length: 4096,
                decoder_frames: default_decoder_frames(),
                domain: None,
            })
        }
        "fig3a" | "fig3b" | "fig3c" => {
            cfg.ber = Some(ber(
                &STANDARD_SET,
                vec![scenario(
                    "",
                    "bpsk",
                    "proakis-c",
                    4096,
                    grid(3.0, 10.0, 0.5),
                )],
            ))
        }
        "fig3d" | "fig3e" | "fig3f" => {
            cfg.ber = Some(ber(
                &STANDARD_SET,
                vec![scenario("", "bpsk", "chan3", 1024, grid(2.0, 8.0, 0.5))],
            ))
        }
        "fig4" => {
            cfg.ber = Some(ber(
                no_bcjr,
                vec![
                    scenario(
                        "proakis-c",
                        "8psk",
                        "proakis-c",
                        4096,
                        grid(10.0, 20.0, 1.0),
                    ),
                    scenario("chan3", "8psk", "chan3", 1024, grid(6.0, 16.0, 1.0)),
                ],
            ))
        }
        "fig5" => {
            cfg.ber = Some(ber(
                no_bcjr,
                vec![
                    scenario(
                        "16qam-proakis-c",
                        "16qam",
                        "proakis-c",
                        4096,
                        grid(12.0, 26.0, 1.0),
                    ),
                    scenario(
                        "64qam-proakis-c",
                        "64qam",
                        "proakis-c",
                        4096,
                        grid(18.0, 34.0, 1.0),
                    ),
                    scenario("16qam-chan3", "16qam", "chan3", 4096, grid(8.0, 22.0, 1.0)),
                    scenario("64qam-chan3", "64qam", "chan3", 4096, grid(14.0, 30.0, 1.0)),
                ],
            ))
        }
        "fig6" => {
            let scen = [256, 512, 1024, 2048, 4096]
                .iter()
                .map(|&n| Scenario {
                    turbo_iterations: 10,
                    ..scenario(&format!("n{n}"), "8psk", "proakis-c", n, vec![13.0])
                })
                .collect();
            cfg.ber = Some(ber(&[EqualizerKind::Nubep, EqualizerKind::EpF], scen))
        }
        _ => {
            return Err(usage(format!(
                "unknown preset `{name}`; known: {}",
                PRESETS.join(", ")
            )))
        }
    }
    cfg.check()?;
    Ok(cfg)
}

/// Output directory: flag, then environment, then config, then `results`.
pub fn output_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| {
            std::env::var_os(OUT_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

pub fn build_fingerprint() -> String {
    format!(
        "{} {} ({}-{}, {})",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        std::env::consts::ARCH,
        std::env::consts::OS,
        if cfg!(debug_assertions) {
            "debug"
        } else {
            "release"
        }
    )
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    config: &'a RunConfig,
    seed: u64,
    build: String,
    run: T,
}

fn write_sidecar<T: Serialize>(csv: &Path, cfg: &RunConfig, run: T) -> CliResult<()> {
    let side = Sidecar {
        config: cfg,
        seed: cfg.seed,
        build: build_fingerprint(),
        run,
    };
    let path = csv.with_extension("json");
    let text = serde_json::to_string_pretty(&side).map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))
}

fn stem(cfg: &RunConfig, label: &str, what: &str) -> String {
    if label.is_empty() {
        format!("{}_{what}", cfg.name)
    } else {
        format!("{}_{label}_{what}", cfg.name)
    }
}

#[derive(Serialize)]
struct BerRun<'a> {
    scenario: &'a Scenario,
    equalizer: &'a str,
    link: &'a LinkConfig,
    min_mm_variance: f64,
    reverts: usize,
    degenerate: usize,
}

/// Runs every configured BER sweep; returns the CSV paths written.
pub fn cmd_ber(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let b = cfg
        .ber
        .as_ref()
        .ok_or_else(|| usage(format!("config `{}` has no [ber] section", cfg.name)))?;
    prepare_out(out)?;
    let opts = SweepOptions {
        min_frames: b.min_frames,
        min_errors: b.min_errors,
        seed: cfg.seed,
        workers: cfg.workers,
    };
    let mut written = Vec::new();
    for s in &b.scenario {
        for kind in parse_kinds(&b.equalizers)? {
            let link = s.link_config(kind)?;
            let points = ber_sweep_observed(&link, &s.eb_n0, &opts, |p| {
                if let Some(r) = p.records.last() {
                    eprintln!(
                        "[{}] {} {:>5.2} dB: BER {:.3e} after {} frames",
                        stem(cfg, &s.label, kind.name()),
                        kind.name(),
                        r.eb_n0_db,
                        r.ber,
                        r.frames
                    );
                }
            })?;
            let records: Vec<BerRecord> = points.iter().flat_map(|p| p.records.clone()).collect();
            let mut diag = turbo_ep::equalizers::Diagnostics::default();
            points.iter().for_each(|p| diag.merge(&p.diagnostics));
            let path = out.join(stem(cfg, &s.label, kind.name()) + ".csv");
            write_ber_csv(&records, &path)?;
            write_sidecar(
                &path,
                cfg,
                BerRun {
                    scenario: s,
                    equalizer: kind.name(),
                    link: &link,
                    min_mm_variance: diag.min_mm_variance,
                    reverts: diag.reverts,
                    degenerate: diag.degenerate,
                },
            )?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Runs the EXIT measurements into one CSV.
pub fn cmd_exit(cfg: &RunConfig, out: &Path) -> CliResult<PathBuf> {
    let x = cfg
        .exit
        .as_ref()
        .ok_or_else(|| usage(format!("config `{}` has no [exit] section", cfg.name)))?;
    prepare_out(out)?;
    let taps = resolve_taps(&x.channel, &x.taps)?;
    let mut records: Vec<ExitRecord> = Vec::new();
    for &db in &x.eb_n0 {
        for kind in parse_kinds(&x.equalizers)? {
            let opts = ExitOptions {
                taps: taps.clone(),
                eb_n0_db: db,
                code_rate: 0.5,
                symbols: x.symbols,
                frame_symbols: 4096,
                turbo_index: 0,
                seed: cfg.seed,
                domain: x
                    .domain
                    .unwrap_or(Domain::natural(ConstellationKind::Bpsk, &taps)),
            };
            let recs = exit_equalizer(&Equalizer::new(kind), &x.i_in, &opts)?;
            eprintln!(
                "[{}] {} {db} dB: I_o from {:.4} to {:.4}",
                cfg.name,
                kind.name(),
                recs.first().map_or(0.0, |r| r.i_out),
                recs.last().map_or(0.0, |r| r.i_out)
            );
            records.extend(recs);
        }
    }
    let code = build_ldpc(x.decoder_code_length, code_seed(cfg.seed))?;
    records.extend(exit_decoder(
        &code,
        &x.i_in,
        x.decoder_frames,
        100,
        cfg.seed,
    )?);
    let path = out.join(stem(cfg, "", "exit") + ".csv");
    write_exit_csv(&records, &path)?;
    write_sidecar(&path, cfg, ())?;
    Ok(path)
}

/// Runs the check suites; `Err` lists the failed ones.
pub fn cmd_validate(filter: Option<&str>, opts: &ValidateOptions) -> CliResult<Vec<CheckReport>> {
    let suites = match filter {
        Some(f) => vec![Suite::parse(f).map_err(usage)?],
        None => Suite::ALL.to_vec(),
    };
    let mut reports = Vec::new();
    for s in suites {
        let r = run_suite(s, opts)?;
        println!(
            "{:<11} {:>4} instances  residual {:.3e}  tolerance {:.0e}  {}",
            s.name(),
            r.instances,
            r.residual,
            r.tolerance,
            if r.passed { "ok" } else { "FAILED" }
        );
        reports.push(r);
    }
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.suite.name())
        .collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::Run(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for p in PRESETS {
            let cfg = preset(p).unwrap();
            let text = toml::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg, "{p}");
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn fig3d_has_five_equalizers() {
        let cfg = preset("fig3d").unwrap();
        let b = cfg.ber.unwrap();
        assert_eq!(b.equalizers.len(), 5);
        assert_eq!(b.scenario.len(), 1);
        assert_eq!(b.scenario[0].code_length, 1024);
        assert_eq!(b.scenario[0].turbo_iterations, 5);
    }

    #[test]
    fn fig2_grid() {
        let x = preset("fig2").unwrap().exit.unwrap();
        assert_eq!(x.eb_n0, vec![7.0, 9.0]);
        assert_eq!(x.i_in.len(), 20);
        assert!((x.i_in[19] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml("name = \"x\"\nbogus = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let text = r#"
name = "x"
[ber]
equalizers = ["nubep"]
[[ber.scenario]]
constellation = "bpsk"
channel = "chan3"
code_length = 256
eb_n0 = [3.0]
colour = "red"
"#;
        assert!(RunConfig::from_toml(text).is_err());
    }

    #[test]
    fn schema_errors() {
        let base = r#"
name = "x"
[ber]
equalizers = ["EQ"]
[[ber.scenario]]
constellation = "bpsk"
CHANNEL
code_length = 256
eb_n0 = [3.0]
"#;
        let ok = base
            .replace("EQ", "nubep")
            .replace("CHANNEL", "channel = \"chan3\"");
        assert!(RunConfig::from_toml(&ok).is_ok());
        let bad_eq = base
            .replace("EQ", "zf")
            .replace("CHANNEL", "channel = \"chan3\"");
        assert_eq!(RunConfig::from_toml(&bad_eq).unwrap_err().exit_code(), 2);
        let both = base
            .replace("EQ", "nubep")
            .replace("CHANNEL", "channel = \"chan3\"\ntaps = [[1.0, 0.0]]");
        assert!(RunConfig::from_toml(&both).is_err());
        let taps = base
            .replace("EQ", "nubep")
            .replace("CHANNEL", "taps = [[0.8, 0.0], [0.0, 0.6]]");
        let cfg = RunConfig::from_toml(&taps).unwrap();
        let link = cfg.ber.unwrap().scenario[0]
            .link_config(EqualizerKind::Nubep)
            .unwrap();
        assert_eq!(link.taps, vec![[0.8, 0.0], [0.0, 0.6]]);
    }

    #[test]
    fn overrides() {
        let mut cfg = preset("fig3d").unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            eb_n0: Some(6.0),
            equalizer: Some("ep-f".into()),
            ..Overrides::default()
        })
        .unwrap();
        let b = cfg.ber.as_ref().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(b.equalizers, vec!["ep-f"]);
        assert_eq!(b.scenario[0].eb_n0, vec![6.0]);
        let err = cfg
            .apply(&Overrides {
                equalizer: Some("magic".into()),
                ..Overrides::default()
            })
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        cfg.apply(&Overrides {
            full_scale: true,
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(cfg.ber.unwrap().min_frames, FULL_SCALE_FRAMES);
    }

    #[test]
    fn guide_example_parses() {
        let guide = include_str!("../../../book/src/cli.md");
        let block = guide
            .split("```toml\n")
            .nth(1)
            .unwrap()
            .split("```")
            .next()
            .unwrap();
        let cfg = RunConfig::from_toml(block).unwrap();
        let s = &cfg.ber.unwrap().scenario[0];
        assert_eq!(s.ep["nubep"], EpParams::nubep());
    }

    #[test]
    fn output_dir_precedence() {
        let mut cfg = preset("fig3d").unwrap();
        assert_eq!(output_dir(&cfg, Some(Path::new("a"))), PathBuf::from("a"));
        cfg.out = Some("c".into());
        if std::env::var_os(OUT_ENV).is_none() {
            assert_eq!(output_dir(&cfg, None), PathBuf::from("c"));
        }
    }
}

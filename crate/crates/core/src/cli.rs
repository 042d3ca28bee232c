//! `qnet` command line: one subcommand per workflow stage.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::decay::{self, LossSpec};
use crate::distributed::{sweep_chain, sweep_chain_s, ChainJson, TwoPortChain};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::interconnect::{connect_rational, ConnectionPlanJson};
use crate::linalg::C64;
use crate::netcore::touchstone::{self, Touchstone};
use crate::netcore::{RationalImpedance, RationalJson};
use crate::qham::{self, EffectiveJson, HamiltonianJson, HamiltonianParams, JunctionValue, TransmonSpec};
use crate::synthesis::{cascade_to_rational, synthesize_cascade, CascadeJson, CLCascade};
use crate::vfit::{self, Asymptote, FitConfig, WeightMode};

#[derive(Parser, Debug)]
#[command(name = "qnet", version, about = "Multiport impedance models, synthesis and transmon-network analysis")]
struct Cli {
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for randomized inputs (noise injection).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sweep a two-port chain into a Touchstone file.
    Sweep(SweepArgs),
    /// Fit a lossless rational model to Touchstone data.
    Fit(FitArgs),
    /// Rational model to CL cascade.
    Synth(SynthArgs),
    /// CL cascade to rational model.
    Analyze(AnalyzeArgs),
    /// Interconnect rational models per a connection plan.
    Connect(ConnectArgs),
    /// Transmon-network Hamiltonian parameters.
    Ham(HamArgs),
    /// Effective (dispersive) parameters.
    Eff(EffArgs),
    /// Lossy poles and T1 estimates.
    Decay(DecayArgs),
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// chain.v1 file.
    #[arg(long, conflicts_with = "fixture")]
    chain: Option<PathBuf>,
    /// Built-in chain: `tl-coupler`.
    #[arg(long)]
    fixture: Option<String>,
    /// `lo:hi`, SI suffixes allowed (1GHz:22.5GHz).
    #[arg(long)]
    band: String,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    #[arg(long, value_enum, default_value_t = Param::S)]
    param: Param,
    /// Reference impedance for S output.
    #[arg(long, default_value = "50")]
    z0: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Param {
    S,
    Z,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Touchstone input (.sNp).
    input: PathBuf,
    /// Pole pairs, including the one that collapses onto DC.
    #[arg(long)]
    pairs: usize,
    /// `lo:hi`; defaults to the data range.
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    dc_radius: Option<String>,
    #[arg(long)]
    rank1_threshold: Option<f64>,
    #[arg(long)]
    no_refine: bool,
    #[arg(long, value_enum, default_value_t = WeightArg::Uniform)]
    weight: WeightArg,
    #[arg(long, value_enum, default_value_t = AsymptoteArg::D)]
    asymptote: AsymptoteArg,
    #[arg(long)]
    relaxed: bool,
    #[arg(long)]
    allow_degenerate_hf: bool,
    /// Relative complex Gaussian noise added to the data, drawn from `--seed`.
    #[arg(long)]
    noise: Option<f64>,
    /// Fit report path (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightArg {
    Uniform,
    InverseMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AsymptoteArg {
    None,
    D,
    De,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    cascade: PathBuf,
}

#[derive(Args, Debug)]
struct ConnectArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Port-name map output (JSON).
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NetworkArgs {
    /// rational_impedance.v1 file.
    #[arg(long, conflicts_with_all = ["cascade", "fixture"])]
    model: Option<PathBuf>,
    /// cl_cascade.v1 file.
    #[arg(long, conflicts_with = "fixture")]
    cascade: Option<PathBuf>,
    /// Built-in network: `tc`, `decay`, `decay-ata`, `tl-coupler`.
    #[arg(long)]
    fixture: Option<String>,
}

#[derive(Args, Debug)]
struct SpecArgs {
    /// transmon_spec.v1 file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// `PORT=VALUE` with a unit: Hz targets a frequency, H sets L_J, J sets E_J.
    #[arg(long = "qubit")]
    qubits: Vec<String>,
    /// Junction ports treated as couplers.
    #[arg(long = "coupler")]
    couplers: Vec<String>,
}

#[derive(Args, Debug)]
struct HamArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Args, Debug)]
struct EffArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[command(flatten)]
    spec: SpecArgs,
    /// `PORT=lo:hi:n`, sweeping that junction's value (unit as in `--qubit`).
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args, Debug)]
struct DecayArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// transmon_spec.v1 file; its junctions become linear inductors.
    #[arg(long)]
    junctions: Option<PathBuf>,
    #[arg(long = "qubit")]
    qubits: Vec<String>,
    /// `P1=50,P2=50` (Ω).
    #[arg(long, default_value = "")]
    resistors: String,
    /// `PORT=lo:hi:n` in henries.
    #[arg(long)]
    sweep: Option<String>,
    /// Append admittance-based T1 columns for junction modes.
    #[arg(long)]
    admittance: bool,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = Ctx { out: cli.out.as_deref(), format: cli.format, seed: cli.seed };
    match &cli.cmd {
        Cmd::Sweep(a) => cmd_sweep(&ctx, a),
        Cmd::Fit(a) => cmd_fit(&ctx, a),
        Cmd::Synth(a) => cmd_synth(&ctx, a),
        Cmd::Analyze(a) => cmd_analyze(&ctx, a),
        Cmd::Connect(a) => cmd_connect(&ctx, a),
        Cmd::Ham(a) => cmd_ham(&ctx, a),
        Cmd::Eff(a) => cmd_eff(&ctx, a),
        Cmd::Decay(a) => cmd_decay(&ctx, a),
    }
}

struct Ctx<'a> {
    out: Option<&'a Path>,
    format: Format,
    seed: u64,
}

impl Ctx<'_> {
    fn emit(&self, text: &str) -> Result<()> {
        emit_to(self.out, text)
    }
}

fn emit_to(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Input label and SHA-256 of its bytes, in the order read.
#[derive(Debug, Default, Serialize)]
struct Inputs(Vec<(String, String)>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        self.0.push((file_label(path), sha256_hex(&bytes)));
        Ok(bytes)
    }

    fn json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    fn note(&mut self, label: &str, content: &str) {
        self.0.push((label.to_string(), sha256_hex(content.as_bytes())));
    }

    fn csv_header(&self, command: &str) -> String {
        let list: Vec<String> = self.0.iter().map(|(l, h)| format!("{l}={h}")).collect();
        format!("# qnet {command} sha256 {}\n", list.join(" "))
    }
}

fn file_label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema: &'a str,
    inputs: &'a Inputs,
    #[serde(flatten)]
    body: T,
}

fn report_json<T: Serialize>(schema: &str, inputs: &Inputs, body: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Report { schema, inputs, body })?;
    s.push('\n');
    Ok(s)
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// SI value with an optional prefix and an optional unit, e.g. `4GHz`, `18n`, `50`.
pub fn parse_si(text: &str) -> Result<(f64, String)> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-' || ((c == 'e' || c == 'E') && i > 0 && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))))
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, rest) = t.split_at(split);
    let v: f64 = num.parse().map_err(|_| Error::Invalid(format!("cannot read a number from `{text}`")))?;
    let mut rest = rest.trim().to_string();
    let mut unit = String::new();
    for u in ["Hz", "Ohm", "Ω", "H", "F", "J", "s"] {
        if let Some(r) = rest.strip_suffix(u) {
            unit = u.to_string();
            rest = r.to_string();
            break;
        }
    }
    let scale = match rest.as_str() {
        "" => 1.0,
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" | "µ" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "M" => 1e6,
        "G" => 1e9,
        "T" => 1e12,
        other => return Err(Error::Invalid(format!("unknown SI prefix `{other}` in `{text}`"))),
    };
    if unit == "Ω" {
        unit = "Ohm".into();
    }
    Ok((v * scale, unit))
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text.split_once(':').ok_or_else(|| Error::Invalid(format!("range `{text}` must be lo:hi")))?;
    let (lo, hi) = (parse_si(a)?.0, parse_si(b)?.0);
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Invalid(format!("empty range `{text}`")));
    }
    Ok((lo, hi))
}

/// `PORT=from:to:n` into the port, the values and the unit of `from`. Descending sweeps are allowed.
fn parse_sweep(text: &str) -> Result<(String, Vec<f64>, String)> {
    let (port, spec) = text.split_once('=').ok_or_else(|| Error::Invalid(format!("sweep `{text}` must be PORT=lo:hi:n")))?;
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Invalid(format!("sweep `{text}` must be PORT=lo:hi:n")));
    }
    let (lo, unit) = parse_si(parts[0])?;
    let (hi, _) = parse_si(parts[1])?;
    let n: usize = parts[2].parse().map_err(|_| Error::Invalid(format!("bad point count in `{text}`")))?;
    if n == 0 || !(lo > 0.0 && hi > 0.0 && hi.is_finite()) || (n > 1 && lo == hi) {
        return Err(Error::Invalid(format!("empty sweep `{text}`")));
    }
    Ok((port.to_string(), linspace(lo, hi, n), unit))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn junction_value(v: f64, unit: &str, what: &str) -> Result<JunctionValue> {
    match unit {
        "Hz" => Ok(JunctionValue::TargetFreq(v)),
        "H" => Ok(JunctionValue::LJ(v)),
        "J" => Ok(JunctionValue::EJ(v)),
        _ => Err(Error::Invalid(format!("`{what}` needs a unit: Hz, H or J"))),
    }
}

fn parse_assignments(list: &str) -> Result<Vec<(String, f64)>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (p, v) = item.split_once('=').ok_or_else(|| Error::Invalid(format!("`{item}` must be PORT=VALUE")))?;
            Ok((p.trim().to_string(), parse_si(v)?.0))
        })
        .collect()
}

enum Network {
    Rational(RationalImpedance),
    Cascade(CLCascade),
}

impl Network {
    fn port_names(&self) -> Vec<String> {
        match self {
            Network::Rational(z) => z.port_names.clone(),
            Network::Cascade(c) => c.port_names().to_vec(),
        }
    }

    fn cascade(&self) -> Result<CLCascade> {
        match self {
            Network::Rational(z) => synthesize_cascade(z).map_err(Error::stage("synthesis")),
            Network::Cascade(c) => Ok(c.clone()),
        }
    }

    fn hamiltonian(&self, spec: &TransmonSpec) -> Result<HamiltonianParams> {
        match self {
            Network::Rational(z) => qham::hamiltonian_params(z, spec),
            Network::Cascade(c) => qham::hamiltonian_params_cascade(c, spec),
        }
    }
}

fn fixture_network(name: &str) -> Result<Network> {
    match name {
        "tc" => Ok(Network::Rational(fixtures::tc_rational())),
        "decay" => Ok(Network::Cascade(fixtures::decay_circuit())),
        "decay-ata" => Ok(Network::Cascade(fixtures::decay_circuit_all_to_all())),
        other => Err(Error::unknown(other, &["tc".into(), "decay".into(), "decay-ata".into()])),
    }
}

fn load_network(a: &NetworkArgs, inputs: &mut Inputs) -> Result<Network> {
    if let Some(p) = &a.model {
        let j: RationalJson = inputs.json(p)?;
        return Ok(Network::Rational(RationalImpedance::try_from(j)?));
    }
    if let Some(p) = &a.cascade {
        let j: CascadeJson = inputs.json(p)?;
        return Ok(Network::Cascade(CLCascade::try_from(j)?));
    }
    if let Some(f) = &a.fixture {
        inputs.note(&format!("fixture:{f}"), f);
        return fixture_network(f);
    }
    Err(Error::Invalid("one of --model, --cascade or --fixture is required".into()))
}

fn load_spec(a: &SpecArgs, inputs: &mut Inputs) -> Result<TransmonSpec> {
    let mut spec = match &a.spec {
        Some(p) => inputs.json::<TransmonSpec>(p)?,
        None => TransmonSpec::new(Vec::new()),
    };
    for q in &a.qubits {
        let (port, v) = q.split_once('=').ok_or_else(|| Error::Invalid(format!("--qubit `{q}` must be PORT=VALUE")))?;
        let (val, unit) = parse_si(v)?;
        let jv = junction_value(val, &unit, q)?;
        match spec.junctions.iter_mut().find(|j| j.port == port) {
            Some(j) => j.value = jv,
            None => spec.junctions.push(qham::JunctionPort { port: port.to_string(), value: jv }),
        }
    }
    for c in &a.couplers {
        if !spec.couplers.contains(c) {
            spec.couplers.push(c.clone());
        }
    }
    if !a.qubits.is_empty() || !a.couplers.is_empty() {
        inputs.note("qubits", &format!("{:?} {:?}", a.qubits, a.couplers));
    }
    if spec.junctions.is_empty() {
        return Err(Error::Invalid("no junctions: pass --spec or --qubit".into()));
    }
    Ok(spec)
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let chain = match (&a.chain, &a.fixture) {
        (Some(p), _) => TwoPortChain::try_from(inputs.json::<ChainJson>(p)?)?,
        (None, Some(f)) if f == "tl-coupler" => {
            inputs.note("fixture:tl-coupler", f);
            fixtures::tl_coupler_chain()
        }
        (None, Some(f)) => return Err(Error::unknown(f, &["tl-coupler".into()])),
        (None, None) => return Err(Error::Invalid("one of --chain or --fixture is required".into())),
    };
    let (lo, hi) = parse_range(&a.band)?;
    if a.points < 2 {
        return Err(Error::Invalid("a sweep needs at least 2 points".into()));
    }
    let freqs = linspace(lo, hi, a.points);
    let net = match a.param {
        Param::S => sweep_chain_s(&chain, &freqs, parse_si(&a.z0)?.0)?,
        Param::Z => sweep_chain(&chain, &freqs)?,
    };
    let mut ts = Touchstone::new(net);
    ts.comments = inputs.0.iter().map(|(l, h)| format!(" qnet sweep {l} sha256={h}")).collect();
    ctx.emit(&touchstone::render(&ts)?)
}

fn add_noise(net: &mut crate::netcore::SampledNetwork, rel: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in net.data.iter_mut() {
        for v in m.iter_mut() {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            *v += *v * C64::new(a, b) * rel;
        }
    }
}

fn cmd_fit(ctx: &Ctx, a: &FitArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let text = inputs.read(&a.input)?;
    let n = touchstone::ports_from_extension(&a.input)
        .ok_or_else(|| Error::Parse(format!("{}: cannot infer port count from extension", a.input.display())))?;
    let text = String::from_utf8(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut data = touchstone::parse(&text, n)?.network;
    if let Some(rel) = a.noise {
        add_noise(&mut data, rel, ctx.seed);
        inputs.note("noise", &format!("{rel:e} seed {}", ctx.seed));
    }
    let band = match &a.band {
        Some(b) => parse_range(b)?,
        None => (
            data.freqs.first().cloned().unwrap_or(0.0),
            data.freqs.last().cloned().unwrap_or(0.0),
        ),
    };
    let mut cfg = FitConfig::new(a.pairs, band);
    if let Some(m) = a.max_iter {
        cfg.max_iterations = m;
    }
    if let Some(r) = &a.dc_radius {
        cfg.dc_capture_radius = Some(parse_si(r)?.0);
    }
    if let Some(t) = a.rank1_threshold {
        cfg.rank1_eig_threshold = t;
    }
    if a.no_refine {
        cfg.refine_max_evals = 0;
    }
    cfg.weight_mode = match a.weight {
        WeightArg::Uniform => WeightMode::Uniform,
        WeightArg::InverseMagnitude => WeightMode::InverseMagnitude,
    };
    cfg.asymptote = match a.asymptote {
        AsymptoteArg::None => Asymptote::None,
        AsymptoteArg::D => Asymptote::D,
        AsymptoteArg::De => Asymptote::DE,
    };
    cfg.relaxed = a.relaxed;
    cfg.allow_degenerate_hf_pole = a.allow_degenerate_hf;
    let outcome = vfit::fit(&data, &cfg)?;
    ctx.emit(&pretty(&RationalJson::from(&outcome.model))?)?;
    let report = report_json("fit_report.v1", &inputs, &outcome.report)?;
    match &a.report {
        Some(p) => emit_to(Some(p), &report)?,
        None => {
            for w in &outcome.report.warnings {
                eprintln!("warning: {w}");
            }
        }
    }
    Ok(())
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let z = RationalImpedance::try_from(inputs.json::<RationalJson>(&a.model)?)?;
    ctx.emit(&pretty(&CascadeJson::from(&synthesize_cascade(&z)?))?)
}

fn cmd_analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let c = CLCascade::try_from(inputs.json::<CascadeJson>(&a.cascade)?)?;
    let (z, _) = cascade_to_rational(&c)?;
    ctx.emit(&pretty(&RationalJson::from(&z))?)
}

#[derive(Serialize)]
struct PortMap {
    ports: Vec<PortMapRow>,
}

#[derive(Serialize)]
struct PortMapRow {
    name: String,
    sources: Vec<String>,
}

fn cmd_connect(ctx: &Ctx, a: &ConnectArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let pj: ConnectionPlanJson = inputs.json(&a.plan)?;
    let plan = pj.plan()?;
    let base = a.plan.parent().unwrap_or(Path::new("."));
    let mut zs = Vec::new();
    for n in &pj.networks {
        let p = base.join(&n.path);
        zs.push(RationalImpedance::try_from(inputs.json::<RationalJson>(&p)?)?);
    }
    let z = connect_rational(&zs, &plan)?;
    ctx.emit(&pretty(&RationalJson::from(&z))?)?;
    let map = PortMap {
        ports: z
            .port_names
            .iter()
            .map(|p| PortMapRow { name: p.clone(), sources: p.split('⊕').map(str::to_string).collect() })
            .collect(),
    };
    let text = report_json("port_map.v1", &inputs, &map)?;
    match &a.map {
        Some(p) => emit_to(Some(p), &text),
        None if ctx.out.is_some() => emit_to(None, &text),
        None => Ok(()),
    }
}

fn ham_csv(hp: &HamiltonianParams) -> String {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut s = String::from("quantity,a,b,value_hz\n");
    for (i, q) in hp.qubit_names.iter().enumerate() {
        let _ = writeln!(s, "omega_j,{q},,{:e}", hp.omega_j[i] / two_pi);
        let _ = writeln!(s, "beta_j,{q},,{:e}", hp.beta_j[i] / two_pi);
    }
    for (k, r) in hp.mode_names.iter().enumerate() {
        let _ = writeln!(s, "omega_r,{r},,{:e}", hp.omega_r[k] / two_pi);
    }
    for i in 0..hp.n_qubits() {
        for j in i + 1..hp.n_qubits() {
            let _ = writeln!(s, "g,{},{},{:e}", hp.qubit_names[i], hp.qubit_names[j], hp.g_qq[(i, j)] / two_pi);
        }
        for k in 0..hp.n_modes() {
            let _ = writeln!(s, "g,{},{},{:e}", hp.qubit_names[i], hp.mode_names[k], hp.g_qr[(i, k)] / two_pi);
        }
    }
    for k in 0..hp.n_modes() {
        for l in k + 1..hp.n_modes() {
            let _ = writeln!(s, "g,{},{},{:e}", hp.mode_names[k], hp.mode_names[l], hp.g_rr[(k, l)] / two_pi);
        }
    }
    s
}

fn cmd_ham(ctx: &Ctx, a: &HamArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let net = load_network(&a.net, &mut inputs)?;
    let spec = load_spec(&a.spec, &mut inputs)?;
    let hp = net.hamiltonian(&spec)?;
    match ctx.format {
        Format::Json => ctx.emit(&report_json("hamiltonian_report.v1", &inputs, HamiltonianJson::from(&hp))?),
        Format::Csv => ctx.emit(&(inputs.csv_header("ham") + &ham_csv(&hp))),
    }
}

fn eff_csv_rows(s: &mut String, value: Option<f64>, e: &qham::EffectiveParams) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let v = value.map(|v| format!("{v:e}")).unwrap_or_default();
    let n = e.qubit_names.len();
    for i in 0..n {
        let _ = writeln!(s, "{v},omega_j_eff,{},,{:e},{:e}", e.qubit_names[i], e.omega_j_eff[i] / two_pi, e.max_g_over_delta);
        let _ = writeln!(s, "{v},beta_eff,{},,{:e},{:e}", e.qubit_names[i], e.beta_eff[i] / two_pi, e.max_g_over_delta);
        for j in i + 1..n {
            let _ = writeln!(s, "{v},g_eff,{},{},{:e},{:e}", e.qubit_names[i], e.qubit_names[j], e.g_eff_qq[(i, j)] / two_pi, e.max_g_over_delta);
            let _ = writeln!(s, "{v},cross_kerr,{},{},{:e},{:e}", e.qubit_names[i], e.qubit_names[j], e.cross_kerr[(i, j)] / two_pi, e.max_g_over_delta);
        }
        for (k, r) in e.mode_names.iter().enumerate() {
            let _ = writeln!(s, "{v},chi,{},{r},{:e},{:e}", e.qubit_names[i], e.chi[(i, k)] / two_pi, e.max_g_over_delta);
        }
    }
    for (k, r) in e.mode_names.iter().enumerate() {
        let _ = writeln!(s, "{v},omega_r_eff,{r},,{:e},{:e}", e.omega_r_eff[k] / two_pi, e.max_g_over_delta);
        let _ = writeln!(s, "{v},alpha_eff,{r},,{:e},{:e}", e.alpha_eff[k] / two_pi, e.max_g_over_delta);
        for (l, r2) in e.mode_names.iter().enumerate().skip(k + 1) {
            let _ = writeln!(s, "{v},g_eff,{r},{r2},{:e},{:e}", e.g_eff_rr[(k, l)] / two_pi, e.max_g_over_delta);
        }
    }
}

fn cmd_eff(ctx: &Ctx, a: &EffArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let net = load_network(&a.net, &mut inputs)?;
    let spec = load_spec(&a.spec, &mut inputs)?;
    let points: Vec<(Option<f64>, TransmonSpec)> = match &a.sweep {
        None => vec![(None, spec)],
        Some(sw) => {
            let (port, values, unit) = parse_sweep(sw)?;
            inputs.note("sweep", sw);
            let j = spec.junctions.iter().position(|j| j.port == port).ok_or_else(|| Error::unknown(&port, &spec.junctions.iter().map(|j| j.port.clone()).collect::<Vec<_>>()))?;
            values
                .into_iter()
                .map(|v| {
                    let mut s = spec.clone();
                    s.junctions[j].value = junction_value(v, &unit, sw)?;
                    Ok((Some(v), s))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut effs = Vec::new();
    for (v, s) in &points {
        let hp = net.hamiltonian(s)?;
        effs.push((*v, qham::effective_params(&hp, &hp.couplers)?));
    }
    match ctx.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Point {
                value: Option<f64>,
                effective: EffectiveJson,
            }
            let pts: Vec<Point> = effs.iter().map(|(v, e)| Point { value: *v, effective: EffectiveJson::from(e) }).collect();
            ctx.emit(&report_json("effective_report.v1", &inputs, serde_json::json!({ "points": pts }))?)
        }
        Format::Csv => {
            let mut s = inputs.csv_header("eff");
            s.push_str("sweep_value,quantity,a,b,value_hz,max_g_over_delta\n");
            for (v, e) in &effs {
                eff_csv_rows(&mut s, *v, e);
            }
            ctx.emit(&s)
        }
    }
}

#[derive(Serialize)]
struct DecayRow {
    l_value_h: f64,
    mode_id: usize,
    freq_hz: f64,
    kappa_per_s: f64,
    t1_s: f64,
    attribution: String,
    discontinuity: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    t1_admittance_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t1_admittance_resistor_only_s: Option<f64>,
}

fn cmd_decay(ctx: &Ctx, a: &DecayArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let net = load_network(&a.net, &mut inputs)?;
    let cascade = net.cascade()?;
    let ports = net.port_names();
    let mut spec = match &a.junctions {
        Some(p) => inputs.json::<TransmonSpec>(p)?,
        None => TransmonSpec::new(Vec::new()),
    };
    let extra = SpecArgs { spec: None, qubits: a.qubits.clone(), couplers: Vec::new() };
    for q in &extra.qubits {
        let (port, v) = q.split_once('=').ok_or_else(|| Error::Invalid(format!("--qubit `{q}` must be PORT=VALUE")))?;
        let (val, unit) = parse_si(v)?;
        let jv = junction_value(val, &unit, q)?;
        match spec.junctions.iter_mut().find(|j| j.port == port) {
            Some(j) => j.value = jv,
            None => spec.junctions.push(qham::JunctionPort { port: port.to_string(), value: jv }),
        }
    }
    if !a.qubits.is_empty() {
        inputs.note("qubits", &format!("{:?}", a.qubits));
    }
    inputs.note("resistors", &a.resistors);
    let externals = parse_assignments(&a.resistors)?;
    // transmon-consistent L_J for frequency targets, with C̃ from the loaded network
    let mut loss = LossSpec::new(
        &spec.junctions.iter().map(|j| (j.port.as_str(), 1.0)).collect::<Vec<_>>(),
        &externals.iter().map(|(p, r)| (p.as_str(), *r)).collect::<Vec<_>>(),
    );
    loss.validate(&ports)?;
    let caps = decay::effective_capacitance(&cascade, &loss)?;
    for (i, j) in spec.junctions.iter().enumerate() {
        loss.junction_ports[i].l_j = match j.value {
            JunctionValue::LJ(l) => l,
            JunctionValue::EJ(e) => crate::netcore::lj_from_ej(e),
            JunctionValue::TargetFreq(f) => qham::lj_for_frequency(2.0 * std::f64::consts::PI * f, caps[i])?,
        };
    }
    let (port, values) = match &a.sweep {
        Some(sw) => {
            inputs.note("sweep", sw);
            let (p, v, unit) = parse_sweep(sw)?;
            if !(unit.is_empty() || unit == "H") {
                return Err(Error::Invalid(format!("decay sweeps take inductances, got unit `{unit}`")));
            }
            (p, v)
        }
        None => {
            let j = loss.junction_ports.first().ok_or_else(|| Error::Invalid("no junctions: pass --junctions or --qubit".into()))?;
            (j.port_name.clone(), vec![j.l_j])
        }
    };
    let sets = decay::sweep_junction_inductance(&cascade, &loss, &port, &values)?;
    let mut rows = Vec::new();
    for (set, &l) in sets.iter().zip(&values) {
        let point = loss.with_inductance(&port, l)?;
        for m in &set.modes {
            let (mut ta, mut tr) = (None, None);
            if a.admittance {
                if let Some(i) = point.junction_ports.iter().position(|j| j.port_name == m.attribution) {
                    let f = [m.omega / (2.0 * std::f64::consts::PI)];
                    let ya = decay::lossy_port_admittance(&cascade, &point, false, &f)?;
                    let yr = decay::lossy_port_admittance(&cascade, &point, true, &f)?;
                    ta = decay::t1_at(&ya, &m.attribution, m.omega, caps[i]).ok();
                    tr = decay::t1_at(&yr, &m.attribution, m.omega, caps[i]).ok();
                }
            }
            rows.push(DecayRow {
                l_value_h: l,
                mode_id: m.track,
                freq_hz: m.omega / (2.0 * std::f64::consts::PI),
                kappa_per_s: m.kappa,
                t1_s: 1.0 / m.kappa,
                attribution: m.attribution.clone(),
                discontinuity: m.discontinuity,
                t1_admittance_s: ta,
                t1_admittance_resistor_only_s: tr,
            });
        }
    }
    match ctx.format {
        Format::Json => ctx.emit(&report_json("decay_report.v1", &inputs, serde_json::json!({ "swept_port": port, "rows": rows }))?),
        Format::Csv => {
            let mut s = inputs.csv_header("decay");
            s.push_str("l_value_h,mode_id,freq_hz,kappa_per_s,t1_s,attribution,discontinuity");
            if a.admittance {
                s.push_str(",t1_admittance_s,t1_admittance_resistor_only_s");
            }
            s.push('\n');
            let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            for r in &rows {
                let _ = write!(s, "{:e},{},{:e},{:e},{:e},{},{}", r.l_value_h, r.mode_id, r.freq_hz, r.kappa_per_s, r.t1_s, r.attribution, r.discontinuity);
                if a.admittance {
                    let _ = write!(s, ",{},{}", opt(r.t1_admittance_s), opt(r.t1_admittance_resistor_only_s));
                }
                s.push('\n');
            }
            ctx.emit(&s)
        }
    }
}

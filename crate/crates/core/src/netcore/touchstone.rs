//! Touchstone v1 (`.sNp`) reader and writer.

use std::fmt::Write as _;
use std::path::Path;

use super::sampled::{ParamKind, SampledNetwork};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    RealImag,
    MagAngle,
    DbAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    pub fn scale(self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }

    fn label(self) -> &'static str {
        match self {
            FreqUnit::Hz => "Hz",
            FreqUnit::KHz => "kHz",
            FreqUnit::MHz => "MHz",
            FreqUnit::GHz => "GHz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub network: SampledNetwork,
    /// Comment lines without the leading `!`.
    pub comments: Vec<String>,
    pub format: DataFormat,
    pub unit: FreqUnit,
}

impl Touchstone {
    pub fn new(network: SampledNetwork) -> Self {
        Touchstone { network, comments: Vec::new(), format: DataFormat::RealImag, unit: FreqUnit::GHz }
    }
}

/// Port count from a `.sNp` file name.
pub fn ports_from_extension(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok().filter(|&n| n > 0)
}

pub fn read_file(path: &Path) -> Result<Touchstone> {
    let n = ports_from_extension(path)
        .ok_or_else(|| Error::Parse(format!("{}: cannot infer port count from extension", path.display())))?;
    parse(&std::fs::read_to_string(path)?, n)
}

pub fn write_file(path: &Path, ts: &Touchstone) -> Result<()> {
    std::fs::write(path, render(ts)?)?;
    Ok(())
}

struct OptionLine {
    unit: FreqUnit,
    kind: ParamKind,
    format: DataFormat,
    r: f64,
}

fn parse_option_line(line: &str) -> Result<OptionLine> {
    let mut opt = OptionLine { unit: FreqUnit::GHz, kind: ParamKind::S, format: DataFormat::MagAngle, r: 50.0 };
    let mut toks = line.trim_start_matches('#').split_whitespace();
    while let Some(t) = toks.next() {
        match t.to_ascii_uppercase().as_str() {
            "HZ" => opt.unit = FreqUnit::Hz,
            "KHZ" => opt.unit = FreqUnit::KHz,
            "MHZ" => opt.unit = FreqUnit::MHz,
            "GHZ" => opt.unit = FreqUnit::GHz,
            "S" => opt.kind = ParamKind::S,
            "Z" => opt.kind = ParamKind::Z,
            "Y" => opt.kind = ParamKind::Y,
            "RI" => opt.format = DataFormat::RealImag,
            "MA" => opt.format = DataFormat::MagAngle,
            "DB" => opt.format = DataFormat::DbAngle,
            "R" => {
                let v = toks.next().ok_or_else(|| Error::Parse("option line: R without value".into()))?;
                opt.r = v.parse().map_err(|_| Error::Parse(format!("option line: bad reference `{v}`")))?;
            }
            other => return Err(Error::Parse(format!("option line: unsupported token `{other}`"))),
        }
    }
    if !(opt.r > 0.0) {
        return Err(Error::Parse("reference resistance must be positive".into()));
    }
    Ok(opt)
}

fn decode(a: f64, b: f64, format: DataFormat) -> C64 {
    match format {
        DataFormat::RealImag => C64::new(a, b),
        DataFormat::MagAngle => C64::from_polar(a, b.to_radians()),
        DataFormat::DbAngle => C64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

fn encode(z: C64, format: DataFormat) -> (f64, f64) {
    match format {
        DataFormat::RealImag => (z.re, z.im),
        DataFormat::MagAngle => (z.norm(), z.arg().to_degrees()),
        DataFormat::DbAngle => (20.0 * z.norm().log10(), z.arg().to_degrees()),
    }
}

/// Storage position of entry (i, j) within one frequency record.
fn record_position(n: usize, i: usize, j: usize) -> usize {
    if n == 2 {
        // 2-port files are column-ordered: N11 N21 N12 N22.
        j * 2 + i
    } else {
        i * n + j
    }
}

pub fn parse(text: &str, n_ports: usize) -> Result<Touchstone> {
    let mut comments = Vec::new();
    let mut option: Option<OptionLine> = None;
    let mut numbers = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let (body, comment) = match raw.find('!') {
            Some(p) => (&raw[..p], Some(&raw[p + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment {
            comments.push(c.to_string());
        }
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('#') {
            if option.is_none() {
                option = Some(parse_option_line(body)?);
            }
            continue;
        }
        for tok in body.split_whitespace() {
            numbers.push(
                tok.parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number `{tok}`", lineno + 1)))?,
            );
        }
    }
    let opt = option.unwrap_or(OptionLine { unit: FreqUnit::GHz, kind: ParamKind::S, format: DataFormat::MagAngle, r: 50.0 });
    let per = 1 + 2 * n_ports * n_ports;
    if numbers.len() % per != 0 {
        return Err(Error::Parse(format!("{} values do not form whole {n_ports}-port records", numbers.len())));
    }
    let norm = match opt.kind {
        ParamKind::S => 1.0,
        ParamKind::Z => opt.r,
        ParamKind::Y => 1.0 / opt.r,
    };
    let mut freqs = Vec::new();
    let mut data = Vec::new();
    for rec in numbers.chunks(per) {
        freqs.push(rec[0] * opt.unit.scale());
        let m = CMat::from_fn(n_ports, n_ports, |i, j| {
            let p = 1 + 2 * record_position(n_ports, i, j);
            decode(rec[p], rec[p + 1], opt.format) * norm
        });
        data.push(m);
    }
    let net = SampledNetwork::new(
        opt.kind,
        freqs,
        data,
        vec![opt.r; n_ports],
        (1..=n_ports).map(|i| format!("P{i}")).collect(),
    )?;
    Ok(Touchstone { network: net, comments, format: opt.format, unit: opt.unit })
}

pub fn render(ts: &Touchstone) -> Result<String> {
    let net = &ts.network;
    let n = net.n_ports();
    let r = net.uniform_z0()?;
    let norm = match net.kind {
        ParamKind::S => 1.0,
        ParamKind::Z => 1.0 / r,
        ParamKind::Y => r,
    };
    let kind = match net.kind {
        ParamKind::S => "S",
        ParamKind::Z => "Z",
        ParamKind::Y => "Y",
    };
    let fmt = match ts.format {
        DataFormat::RealImag => "RI",
        DataFormat::MagAngle => "MA",
        DataFormat::DbAngle => "DB",
    };
    let mut out = String::new();
    for c in &ts.comments {
        let _ = writeln!(out, "!{c}");
    }
    let _ = writeln!(out, "# {} {kind} {fmt} R {r}", ts.unit.label());
    for (f, m) in net.freqs.iter().zip(&net.data) {
        let mut pairs = vec![(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                pairs[record_position(n, i, j)] = encode(m[(i, j)] * norm, ts.format);
            }
        }
        let _ = write!(out, "{:.12e}", f / ts.unit.scale());
        if n <= 2 {
            for (a, b) in &pairs {
                let _ = write!(out, " {a:.15e} {b:.15e}");
            }
            out.push('\n');
        } else {
            for (r, row) in pairs.chunks(n).enumerate() {
                for (k, chunk) in row.chunks(4).enumerate() {
                    if r > 0 || k > 0 {
                        out.push_str("                  ");
                    }
                    for (a, b) in chunk {
                        let _ = write!(out, " {a:.15e} {b:.15e}");
                    }
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: ParamKind, n: usize) -> SampledNetwork {
        let freqs = vec![1e9, 2e9, 3.5e9];
        let data = freqs
            .iter()
            .enumerate()
            .map(|(k, _)| CMat::from_fn(n, n, |i, j| C64::new(0.1 * (i + 2 * j + k) as f64 - 0.3, 0.05 * (i * j + 1) as f64)))
            .collect();
        SampledNetwork::with_default_names(kind, freqs, data, 50.0).unwrap()
    }

    fn close(a: &SampledNetwork, b: &SampledNetwork) -> bool {
        a.kind == b.kind
            && a.freqs.iter().zip(&b.freqs).all(|(x, y)| (x - y).abs() <= 1e-9 * x)
            && a.data.iter().zip(&b.data).all(|(x, y)| (x - y).norm() <= 1e-10 * x.norm().max(1.0))
    }

    #[test]
    fn roundtrip_all_formats_and_sizes() {
        for n in [1, 2, 3, 5] {
            for kind in [ParamKind::S, ParamKind::Z, ParamKind::Y] {
                for format in [DataFormat::RealImag, DataFormat::MagAngle, DataFormat::DbAngle] {
                    let mut ts = Touchstone::new(sample(kind, n));
                    ts.format = format;
                    ts.comments = vec![" generated".into()];
                    let text = render(&ts).unwrap();
                    let back = parse(&text, n).unwrap();
                    assert!(close(&back.network, &ts.network), "n={n} {kind:?} {format:?}");
                    assert_eq!(back.comments, ts.comments);
                }
            }
        }
    }

    #[test]
    fn two_port_column_order() {
        let text = "# Hz S RI R 50\n1 1 0 2 0 3 0 4 0\n";
        let ts = parse(text, 2).unwrap();
        let m = &ts.network.data[0];
        assert_eq!(m[(0, 0)].re, 1.0);
        assert_eq!(m[(1, 0)].re, 2.0);
        assert_eq!(m[(0, 1)].re, 3.0);
        assert_eq!(m[(1, 1)].re, 4.0);
    }

    #[test]
    fn z_values_are_normalized() {
        let text = "! note\n# MHz Z RI R 25\n100 2 -1\n";
        let ts = parse(text, 1).unwrap();
        assert_eq!(ts.network.freqs[0], 1e8);
        assert_eq!(ts.network.data[0][(0, 0)], C64::new(50.0, -25.0));
        assert_eq!(ts.comments, vec![" note".to_string()]);
    }

    #[test]
    fn ragged_records_rejected() {
        assert!(matches!(parse("# GHz S RI R 50\n1 0 0 0\n", 1), Err(Error::Parse(_))));
        assert!(matches!(parse("# GHz Q RI R 50\n", 1), Err(Error::Parse(_))));
    }

    #[test]
    fn extension_gives_ports() {
        assert_eq!(ports_from_extension(Path::new("a.s2p")), Some(2));
        assert_eq!(ports_from_extension(Path::new("a.S12P")), Some(12));
        assert_eq!(ports_from_extension(Path::new("a.txt")), None);
    }
}

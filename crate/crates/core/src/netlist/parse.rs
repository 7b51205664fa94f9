//! SPICE-subset reader.
//!
//! Supported grammar (keywords case-insensitive, one statement per line,
//! `*` starts a comment line, `+` continues the previous line):
//!
//! ```text
//! .SUBCKT <name> <pin>...
//! M<name> <drain> <gate> <source> <bulk> <model> [W=<len>] [L=<len>] [key=value]...
//! .ENDS [<name>]
//! ```
//!
//! Lengths accept the suffixes `f p n u m` (relative to meters); a bare
//! number is taken in meters. Models whose name starts with (or first
//! contains) `n` are NMOS, `p` PMOS. Only one flat subcircuit per deck.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceKind {
    Nmos,
    Pmos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Terminal {
    Drain,
    Gate,
    Source,
    Bulk,
}

impl Terminal {
    pub const ALL: [Terminal; 4] = [
        Terminal::Drain,
        Terminal::Gate,
        Terminal::Source,
        Terminal::Bulk,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub name: String,
    pub kind: DeviceKind,
    pub width_nm: f64,
    pub length_nm: f64,
    /// Net names indexed by [`Terminal`] order: drain, gate, source, bulk.
    pub terminals: [String; 4],
}

impl Device {
    pub fn terminal(&self, t: Terminal) -> &str {
        &self.terminals[t as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PinRole {
    Input,
    Output,
    Power,
    Ground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub name: String,
    pub role: PinRole,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedNetlist {
    pub subckt: String,
    pub pins: Vec<Pin>,
    pub devices: Vec<Device>,
}

const DEFAULT_LENGTH_NM: f64 = 20.0;
const DEFAULT_WIDTH_NM: f64 = 100.0;

pub fn pin_role(name: &str) -> PinRole {
    match name.to_ascii_uppercase().as_str() {
        "VDD" | "VCC" | "VPWR" => PinRole::Power,
        "VSS" | "GND" | "VGND" => PinRole::Ground,
        "Y" | "Z" | "ZN" | "Q" | "QN" | "OUT" => PinRole::Output,
        _ => PinRole::Input,
    }
}

/// Parses a length with an optional SI suffix into nanometers.
pub fn parse_length_nm(token: &str) -> Option<f64> {
    let t = token.trim().to_ascii_lowercase();
    let (num, scale) = match t.chars().last()? {
        'f' => (&t[..t.len() - 1], 1e-6),
        'p' => (&t[..t.len() - 1], 1e-3),
        'n' => (&t[..t.len() - 1], 1.0),
        'u' => (&t[..t.len() - 1], 1e3),
        'm' => (&t[..t.len() - 1], 1e6),
        _ => (t.as_str(), 1e9),
    };
    let v: f64 = num.parse().ok()?;
    let nm = v * scale;
    (nm.is_finite()).then_some(nm)
}

fn model_kind(model: &str) -> Option<DeviceKind> {
    model.to_ascii_lowercase().chars().find_map(|c| match c {
        'n' => Some(DeviceKind::Nmos),
        'p' => Some(DeviceKind::Pmos),
        _ => None,
    })
}

/// Joins `+` continuation lines, keeping the line number of the first.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('+') {
            if let Some(last) = out.last_mut() {
                last.1.push(' ');
                last.1.push_str(rest.trim());
                continue;
            }
        }
        out.push((i + 1, line.to_string()));
    }
    out
}

pub fn parse_netlist(text: &str) -> Result<ParsedNetlist> {
    let err = |line: usize, message: String| Error::Netlist { line, message };
    let mut subckt: Option<(String, Vec<Pin>)> = None;
    let mut devices = Vec::new();
    let mut ended = false;
    let mut last_line = 0;

    for (line_no, line) in logical_lines(text) {
        last_line = line_no;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let head = tokens[0].to_ascii_uppercase();
        if ended {
            return Err(err(line_no, "content after .ENDS".into()));
        }
        if head == ".SUBCKT" {
            if subckt.is_some() {
                return Err(err(
                    line_no,
                    "nested or repeated .SUBCKT is not supported".into(),
                ));
            }
            let name = tokens
                .get(1)
                .ok_or_else(|| err(line_no, ".SUBCKT without a name".into()))?;
            let pins = tokens[2..]
                .iter()
                .map(|p| Pin {
                    name: p.to_string(),
                    role: pin_role(p),
                })
                .collect();
            subckt = Some((name.to_string(), pins));
        } else if head == ".ENDS" {
            if subckt.is_none() {
                return Err(err(line_no, ".ENDS without .SUBCKT".into()));
            }
            ended = true;
        } else if head.starts_with('M') {
            if subckt.is_none() {
                return Err(err(line_no, "device outside .SUBCKT".into()));
            }
            devices.push(parse_device(line_no, &tokens)?);
        } else if head.starts_with('.') {
            return Err(err(
                line_no,
                format!("unsupported control statement {}", tokens[0]),
            ));
        } else {
            return Err(err(line_no, format!("unsupported element {}", tokens[0])));
        }
    }
    let (name, pins) = subckt.ok_or_else(|| err(1, "missing .SUBCKT".into()))?;
    if !ended {
        return Err(err(last_line, "missing .ENDS".into()));
    }
    Ok(ParsedNetlist {
        subckt: name,
        pins,
        devices,
    })
}

fn parse_device(line_no: usize, tokens: &[&str]) -> Result<Device> {
    let err = |message: String| Error::Netlist {
        line: line_no,
        message,
    };
    if tokens.len() < 6 {
        return Err(err(format!(
            "device {} needs 4 terminals and a model",
            tokens[0]
        )));
    }
    let model = tokens[5];
    let kind = model_kind(model).ok_or_else(|| err(format!("unknown model {model}")))?;
    let mut width_nm = DEFAULT_WIDTH_NM;
    let mut length_nm = DEFAULT_LENGTH_NM;
    for param in &tokens[6..] {
        let (key, value) = param
            .split_once('=')
            .ok_or_else(|| err(format!("malformed parameter {param}")))?;
        let parsed = || parse_length_nm(value).ok_or_else(|| err(format!("bad value in {param}")));
        match key.to_ascii_uppercase().as_str() {
            "W" => width_nm = parsed()?,
            "L" => length_nm = parsed()?,
            _ => {}
        }
    }
    if width_nm <= 0.0 || length_nm <= 0.0 {
        return Err(err(format!("device {} has non-positive W/L", tokens[0])));
    }
    Ok(Device {
        name: tokens[0].to_string(),
        kind,
        width_nm,
        length_nm,
        terminals: [1, 2, 3, 4].map(|i| tokens[i].to_string()),
    })
}

/// Writes a deck in the grammar accepted by [`parse_netlist`].
pub fn write_netlist(subckt: &str, pins: &[Pin], devices: &[Device]) -> String {
    let mut s = format!(".SUBCKT {subckt}");
    for p in pins {
        s.push(' ');
        s.push_str(&p.name);
    }
    s.push('\n');
    for d in devices {
        let model = match d.kind {
            DeviceKind::Nmos => "nmos",
            DeviceKind::Pmos => "pmos",
        };
        s.push_str(&format!(
            "{} {} {} {} {} {model} W={}n L={}n\n",
            d.name,
            d.terminals[0],
            d.terminals[1],
            d.terminals[2],
            d.terminals[3],
            d.width_nm,
            d.length_nm
        ));
    }
    s.push_str(".ENDS\n");
    s
}

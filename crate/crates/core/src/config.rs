//! Flat key=value configuration and the descriptor grammar for channels,
//! input states, and POVMs.
//!
//! Config documents are plain text: one `key=value` per line, `#` comments,
//! later keys override earlier ones. Command-line flags override file keys.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::channel::{builtin, BuiltinParams, ParamKrausFamily, QuantumState};
use crate::error::{Error, Result};
use crate::fisher::Povm;
use crate::linalg::ComplexMatrix;

/// Parses a flat key=value document.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected key=value, got '{line}'", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Tensor-extension applied on top of a base channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    #[default]
    None,
    /// I ⊗ E on the doubled space.
    Identity,
    /// E ⊗ E on the doubled space.
    Square,
}

impl Extension {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Extension::None),
            "identity" => Ok(Extension::Identity),
            "square" => Ok(Extension::Square),
            other => Err(Error::InvalidConfig(format!(
                "unknown extension '{other}' (expected none|identity|square)"
            ))),
        }
    }
}

/// Channel selection: builtin name, numeric parameters, and an optional
/// tensor extension.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub name: String,
    pub params: BuiltinParams,
    pub extend: Extension,
}

impl ChannelSpec {
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let name = kv
            .get("channel")
            .ok_or_else(|| Error::InvalidConfig("missing 'channel' key".into()))?
            .clone();
        let mut params = BuiltinParams::default();
        if let Some(v) = kv.get("n_max") {
            params.n_max = Some(parse_num(v, "n_max")?);
        }
        if let Some(v) = kv.get("dim") {
            params.dim = Some(parse_num(v, "dim")?);
        }
        if let Some(v) = kv.get("theta_max") {
            params.theta_max = Some(parse_float(v, "theta_max")?);
        }
        let extend = match kv.get("extend") {
            Some(v) => Extension::parse(v)?,
            None => Extension::None,
        };
        Ok(ChannelSpec {
            name,
            params,
            extend,
        })
    }

    /// Builds the family, applying the requested extension.
    pub fn build(&self) -> Result<ParamKrausFamily> {
        let base = builtin(&self.name, &self.params)?;
        Ok(match self.extend {
            Extension::None => base,
            Extension::Identity => base.extend_identity(),
            Extension::Square => base.tensor_square(),
        })
    }
}

fn parse_num(v: &str, key: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: expected an integer, got '{v}'")))
}

fn parse_float(v: &str, key: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: expected a number, got '{v}'")))
}

/// Input-state descriptor:
/// `basis:IDX`, `plus`, `minus`, `bell:{0..3|psi+|psi-|phi+|phi-}`, or
/// `amps:re,im;re,im;...`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Basis(usize),
    Plus,
    Minus,
    Bell(usize),
    Amplitudes(Vec<Complex64>),
}

impl InputSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "plus" {
            return Ok(InputSpec::Plus);
        }
        if s == "minus" {
            return Ok(InputSpec::Minus);
        }
        if let Some(rest) = s.strip_prefix("basis:") {
            return Ok(InputSpec::Basis(parse_num(rest, "basis index")?));
        }
        if let Some(rest) = s.strip_prefix("bell:") {
            let index = match rest {
                "psi+" => 0,
                "psi-" => 1,
                "phi+" => 2,
                "phi-" => 3,
                other => parse_num(other, "bell index")?,
            };
            if index > 3 {
                return Err(Error::InvalidConfig(format!("bell index {index} out of range")));
            }
            return Ok(InputSpec::Bell(index));
        }
        if let Some(rest) = s.strip_prefix("amps:") {
            let mut amps = Vec::new();
            for pair in rest.split(';') {
                let (re, im) = pair.split_once(',').ok_or_else(|| {
                    Error::InvalidConfig(format!("amplitude '{pair}' is not 're,im'"))
                })?;
                amps.push(Complex64::new(
                    parse_float(re, "amplitude")?,
                    parse_float(im, "amplitude")?,
                ));
            }
            return Ok(InputSpec::Amplitudes(amps));
        }
        Err(Error::InvalidConfig(format!(
            "unknown input descriptor '{s}' (expected basis:N, plus, minus, bell:X, or amps:...)"
        )))
    }

    /// Realizes the state in the channel's dimension.
    pub fn build(&self, dim: usize) -> Result<QuantumState> {
        match self {
            InputSpec::Basis(i) => QuantumState::basis(dim, *i),
            InputSpec::Plus => {
                require_dim(dim, 2, "plus")?;
                Ok(QuantumState::plus())
            }
            InputSpec::Minus => {
                require_dim(dim, 2, "minus")?;
                Ok(QuantumState::minus())
            }
            InputSpec::Bell(i) => {
                require_dim(dim, 4, "bell")?;
                QuantumState::bell(*i)
            }
            InputSpec::Amplitudes(amps) => {
                if amps.len() != dim {
                    return Err(Error::InvalidConfig(format!(
                        "{} amplitudes for dimension {dim}",
                        amps.len()
                    )));
                }
                QuantumState::pure_normalized(amps.clone())
            }
        }
    }
}

fn require_dim(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::InvalidConfig(format!(
            "input '{what}' needs dimension {want}, channel has {got}"
        )));
    }
    Ok(())
}

/// POVM descriptor: a named preset, `eigenframe` (the θ-dependent optimal
/// measurement), or `file:PATH` pointing at a JSON effect list.
#[derive(Debug, Clone, PartialEq)]
pub enum PovmSpec {
    ZBasis,
    XBasis,
    BellBasis,
    PhotonNumber,
    Position,
    Eigenframe,
    File(String),
}

impl PovmSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "z-basis" => Ok(PovmSpec::ZBasis),
            "x-basis" => Ok(PovmSpec::XBasis),
            "bell-basis" => Ok(PovmSpec::BellBasis),
            "photon-number" => Ok(PovmSpec::PhotonNumber),
            "position" => Ok(PovmSpec::Position),
            "eigenframe" => Ok(PovmSpec::Eigenframe),
            other => {
                if let Some(path) = other.strip_prefix("file:") {
                    Ok(PovmSpec::File(path.to_string()))
                } else {
                    Err(Error::InvalidConfig(format!(
                        "unknown POVM '{other}' (expected z-basis, x-basis, bell-basis, \
                         photon-number, position, eigenframe, or file:PATH)"
                    )))
                }
            }
        }
    }

    /// Builds a θ-independent POVM; `eigenframe` must be resolved by the
    /// caller against a canonical frame.
    pub fn build(&self, dim: usize) -> Result<Povm> {
        match self {
            PovmSpec::ZBasis => {
                require_dim(dim, 2, "z-basis")?;
                Ok(Povm::z_basis())
            }
            PovmSpec::XBasis => {
                require_dim(dim, 2, "x-basis")?;
                Ok(Povm::x_basis())
            }
            PovmSpec::BellBasis => {
                require_dim(dim, 4, "bell-basis")?;
                Ok(Povm::bell_basis())
            }
            PovmSpec::PhotonNumber => Ok(Povm::photon_number(dim)),
            PovmSpec::Position => Ok(Povm::position(dim)),
            PovmSpec::Eigenframe => Err(Error::InvalidConfig(
                "eigenframe POVM is parameter dependent; resolve it against a frame".into(),
            )),
            PovmSpec::File(path) => load_povm_file(Path::new(path)),
        }
    }
}

#[derive(Deserialize)]
struct PovmFile {
    /// Effects as row-major [re, im] pairs.
    effects: Vec<Vec<[f64; 2]>>,
    labels: Option<Vec<String>>,
}

fn load_povm_file(path: &Path) -> Result<Povm> {
    let text = std::fs::read_to_string(path)?;
    let parsed: PovmFile = serde_json::from_str(&text)?;
    let mut effects = Vec::with_capacity(parsed.effects.len());
    for (i, flat) in parsed.effects.iter().enumerate() {
        let n = (flat.len() as f64).sqrt() as usize;
        if n * n != flat.len() {
            return Err(Error::InvalidPovm(format!(
                "effect {i} has {} entries, not a square matrix",
                flat.len()
            )));
        }
        let data = flat
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        effects.push(ComplexMatrix::new(n, n, data)?);
    }
    let labels = parsed
        .labels
        .unwrap_or_else(|| (0..effects.len()).map(|i| format!("e{i}")).collect());
    Povm::new(effects, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parsing() {
        let text = "# comment\nchannel = dephasing\n\n grid_points =11\n";
        let kv = parse_kv(text).unwrap();
        assert_eq!(kv.get("channel").unwrap(), "dephasing");
        assert_eq!(kv.get("grid_points").unwrap(), "11");
        assert!(parse_kv("no equals sign").is_err());
    }

    #[test]
    fn channel_spec_round_trip() {
        let kv = parse_kv("channel=damping\nn_max=3\nextend=identity").unwrap();
        let spec = ChannelSpec::from_kv(&kv).unwrap();
        let family = spec.build().unwrap();
        assert_eq!(family.dim(), 16);
        assert_eq!(family.n_kraus(), 4);
    }

    #[test]
    fn input_descriptors() {
        assert_eq!(InputSpec::parse("plus").unwrap(), InputSpec::Plus);
        assert_eq!(InputSpec::parse("basis:2").unwrap(), InputSpec::Basis(2));
        assert_eq!(InputSpec::parse("bell:psi+").unwrap(), InputSpec::Bell(0));
        assert_eq!(InputSpec::parse("bell:3").unwrap(), InputSpec::Bell(3));
        assert!(InputSpec::parse("bell:4").is_err());
        let amps = InputSpec::parse("amps:0.6,0;0,0.8").unwrap();
        let state = amps.build(2).unwrap();
        assert!(state.is_pure());
        assert!(InputSpec::parse("junk").is_err());
        assert!(InputSpec::Plus.build(4).is_err());
    }

    #[test]
    fn povm_descriptors() {
        assert!(matches!(PovmSpec::parse("z-basis"), Ok(PovmSpec::ZBasis)));
        assert!(matches!(
            PovmSpec::parse("file:povm.json"),
            Ok(PovmSpec::File(_))
        ));
        assert!(PovmSpec::parse("w-basis").is_err());
        assert_eq!(PovmSpec::ZBasis.build(2).unwrap().len(), 2);
        assert!(PovmSpec::BellBasis.build(2).is_err());
        assert!(PovmSpec::Eigenframe.build(2).is_err());
    }

    #[test]
    fn povm_file_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("povm.json");
        std::fs::write(
            &path,
            r#"{"effects": [[[1,0],[0,0],[0,0],[0,0]], [[0,0],[0,0],[0,0],[1,0]]]}"#,
        )
        .unwrap();
        let povm = load_povm_file(&path).unwrap();
        assert_eq!(povm.len(), 2);
        assert_eq!(povm.labels()[0], "e0");
    }
}

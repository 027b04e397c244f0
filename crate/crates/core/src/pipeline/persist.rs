//! Model file: `HDHM`, u32 LE format version, u32 LE CRC32 of the payload,
//! then a canonical text payload. Reals are written with 17 significant
//! digits so every `f64` (and hence every `f32`) reads back bit-exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::config::{fmt_real, TrainingConfig};
use super::model::{Model, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::features::NormStats;
use crate::rbm::Rbm;
use crate::sae::{SaeLayer, SaeStack};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"HDHM";
const HEADER_LEN: usize = 12;
const TRAILER: &str = "end\n";

fn push_vector<T: Scalar>(out: &mut String, key: &str, v: &Array1<T>) {
    let _ = write!(out, "{key}={}", v.len());
    for &x in v {
        let _ = write!(out, " {}", fmt_real(x));
    }
    out.push('\n');
}

fn push_matrix<T: Scalar>(out: &mut String, key: &str, m: &Array2<T>) {
    let _ = write!(out, "{key}={} {}", m.nrows(), m.ncols());
    for &x in m.iter() {
        let _ = write!(out, " {}", fmt_real(x));
    }
    out.push('\n');
}

pub fn payload<T: Scalar>(model: &Model<T>) -> String {
    let mut s = String::new();
    s.push_str("[config]\n");
    s.push_str(&model.config.to_kv_text());
    s.push_str("[norm]\n");
    let _ = writeln!(s, "mode={}", model.norm_stats.mode.as_str());
    push_vector(&mut s, "shift", &Array1::from(model.norm_stats.shift.clone()));
    push_vector(&mut s, "scale", &Array1::from(model.norm_stats.scale.clone()));
    for (l, layer) in model.sae.layers.iter().enumerate() {
        let _ = writeln!(s, "[sae.{l}]");
        push_matrix(&mut s, "enc_w", &layer.enc_w);
        push_vector(&mut s, "enc_b", &layer.enc_b);
        push_matrix(&mut s, "dec_w", &layer.dec_w);
        push_vector(&mut s, "dec_b", &layer.dec_b);
    }
    s.push_str("[rbm]\n");
    let _ = writeln!(s, "beta={}", fmt_real(model.rbm.beta));
    let _ = writeln!(s, "cd_steps={}", model.rbm.cd_steps);
    push_matrix(&mut s, "w", &model.rbm.w);
    push_vector(&mut s, "vis_bias", &model.rbm.vis_bias);
    push_vector(&mut s, "hid_bias", &model.rbm.hid_bias);
    s.push_str(TRAILER);
    s
}

pub fn to_bytes<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let body = payload(model);
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&model.format_version.to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(body.as_bytes()).to_le_bytes());
    out.extend_from_slice(body.as_bytes());
    out
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Model<T>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("model header needs {HEADER_LEN} bytes, got {}", bytes.len())));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("bad magic, expected HDHM".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let expected = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let body = &bytes[HEADER_LEN..];
    let actual = crc32fast::hash(body);
    if actual != expected {
        if !body.ends_with(TRAILER.as_bytes()) {
            return Err(Error::Truncated("model payload is missing its end marker".into()));
        }
        return Err(Error::Checksum { expected, actual });
    }
    let text = std::str::from_utf8(body).map_err(|e| Error::Format(format!("payload is not UTF-8: {e}")))?;
    parse_payload(text)
}

type Section = (String, Vec<(String, String)>);

/// Sections of `key=value` lines, in file order.
fn sections(text: &str) -> Result<Vec<Section>> {
    let mut out: Vec<Section> = Vec::new();
    for line in text.lines() {
        if line == TRAILER.trim_end() {
            break;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            out.push((name.to_string(), Vec::new()));
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad payload line `{line}`")))?;
        let current = out
            .last_mut()
            .ok_or_else(|| Error::Format("payload line outside a section".into()))?;
        current.1.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn reals<T: Scalar>(tokens: &[&str]) -> Result<Vec<T>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map(T::of)
                .map_err(|_| Error::Format(format!("`{t}` is not a number")))
        })
        .collect()
}

fn dim(tok: Option<&&str>) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format("missing or bad dimension".into()))
}

fn parse_vector<T: Scalar>(s: &str) -> Result<Array1<T>> {
    let toks: Vec<&str> = s.split_ascii_whitespace().collect();
    let n = dim(toks.first())?;
    if toks.len() != n + 1 {
        return Err(Error::Format(format!("vector declares {n} values, has {}", toks.len().saturating_sub(1))));
    }
    Ok(Array1::from(reals(&toks[1..])?))
}

fn parse_matrix<T: Scalar>(s: &str) -> Result<Array2<T>> {
    let toks: Vec<&str> = s.split_ascii_whitespace().collect();
    let (r, c) = (dim(toks.first())?, dim(toks.get(1))?);
    if toks.len() != r * c + 2 {
        return Err(Error::Format(format!("{r}x{c} matrix has {} values", toks.len().saturating_sub(2))));
    }
    Array2::from_shape_vec((r, c), reals(&toks[2..])?).map_err(|e| Error::Format(e.to_string()))
}

struct Fields(HashMap<String, String>);

impl Fields {
    fn get(&self, section: &str, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("[{section}] missing `{key}`")))
    }
}

fn parse_payload<T: Scalar>(text: &str) -> Result<Model<T>> {
    let mut config = None;
    let mut norm = None;
    let mut layers = Vec::new();
    let mut rbm = None;
    for (name, kvs) in sections(text)? {
        if name == "config" {
            let joined: String = kvs.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
            config = Some(TrainingConfig::<T>::from_kv_text(&joined).map_err(|e| Error::Format(e.to_string()))?);
            continue;
        }
        let f = Fields(kvs.into_iter().collect());
        match name.as_str() {
            "norm" => {
                norm = Some(NormStats {
                    mode: f.get("norm", "mode")?.parse()?,
                    shift: parse_vector(f.get("norm", "shift")?)?.to_vec(),
                    scale: parse_vector(f.get("norm", "scale")?)?.to_vec(),
                })
            }
            "rbm" => {
                let cd_steps = f
                    .get("rbm", "cd_steps")?
                    .parse()
                    .map_err(|_| Error::Format("bad cd_steps".into()))?;
                rbm = Some(Rbm {
                    w: parse_matrix(f.get("rbm", "w")?)?,
                    vis_bias: parse_vector(f.get("rbm", "vis_bias")?)?,
                    hid_bias: parse_vector(f.get("rbm", "hid_bias")?)?,
                    beta: T::of(reals::<f64>(&[f.get("rbm", "beta")?])?[0]),
                    cd_steps,
                })
            }
            s if s.starts_with("sae.") => {
                let idx: usize = s[4..].parse().map_err(|_| Error::Format(format!("bad section [{s}]")))?;
                if idx != layers.len() {
                    return Err(Error::Format(format!("layer section [{s}] out of order")));
                }
                layers.push(SaeLayer::from_parts(
                    parse_matrix(f.get(s, "enc_w")?)?,
                    parse_vector(f.get(s, "enc_b")?)?,
                    parse_matrix(f.get(s, "dec_w")?)?,
                    parse_vector(f.get(s, "dec_b")?)?,
                )?);
            }
            other => return Err(Error::Format(format!("unknown section [{other}]"))),
        }
    }
    let missing = |what: &str| Error::Format(format!("payload has no [{what}] section"));
    let rbm: Rbm<T> = rbm.ok_or_else(|| missing("rbm"))?;
    if rbm.w.nrows() != rbm.hid_bias.len() || rbm.w.ncols() != rbm.vis_bias.len() {
        return Err(Error::Format("rbm parameter shapes disagree".into()));
    }
    let model = Model {
        sae: SaeStack::new(layers)?,
        rbm,
        norm_stats: norm.ok_or_else(|| missing("norm"))?,
        config: config.ok_or_else(|| missing("config"))?,
        format_version: FORMAT_VERSION,
    };
    model.check_invariants()?;
    Ok(model)
}

//! Canonical genotype string format `v1`.
//!
//! `v1;ops=gcn,gcn;dim=64;act=relu;drop=0.50;skips=0-2;pool=none;lr=0.005;wd=0.0005;ep=200`
//!
//! Segments appear in exactly this order. `drop` carries two fractional
//! digits, `skips` lists `from-to` pairs sorted ascending (possibly empty).
//! Decoding accepts only canonical strings, so `encode(decode(s)) == s`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::genotype::{ArchGenotype, DIMS, DROPOUT_STEPS, MAX_LAYERS};

const SEGMENTS: [&str; 9] = ["ops", "dim", "act", "drop", "skips", "pool", "lr", "wd", "ep"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed genotype segment `{segment}`: {reason}")]
pub struct CodecError {
    pub segment: String,
    pub reason: String,
}

impl CodecError {
    fn new(segment: &str, reason: impl Into<String>) -> Self {
        Self {
            segment: segment.to_string(),
            reason: reason.into(),
        }
    }
}

pub fn encode(g: &ArchGenotype) -> String {
    let mut out = String::with_capacity(96);
    out.push_str("v1;ops=");
    for (i, op) in g.layers.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(op.as_str());
    }
    let hundredths = u32::from(g.dropout_steps) * 5;
    let _ = write!(
        out,
        ";dim={};act={};drop={}.{:02};skips=",
        g.hidden_dim,
        g.activation,
        hundredths / 100,
        hundredths % 100
    );
    for (i, (from, to)) in g.skips.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{from}-{to}");
    }
    let _ = write!(
        out,
        ";pool={};lr={};wd={};ep={}",
        g.pooling, g.lr, g.weight_decay, g.epochs
    );
    out
}

pub fn decode(s: &str) -> Result<ArchGenotype, CodecError> {
    let mut parts = s.split(';');
    match parts.next() {
        Some("v1") => {}
        Some(other) => {
            return Err(CodecError::new(
                "version",
                format!("expected `v1`, found `{other}`"),
            ))
        }
        None => return Err(CodecError::new("version", "empty string")),
    }

    let mut values = [""; 9];
    for (slot, key) in values.iter_mut().zip(SEGMENTS) {
        let part = parts
            .next()
            .ok_or_else(|| CodecError::new(key, "segment missing"))?;
        let value = part
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| CodecError::new(key, format!("expected `{key}=`, found `{part}`")))?;
        *slot = value;
    }
    if let Some(extra) = parts.next() {
        let key = extra.split('=').next().unwrap_or(extra);
        return Err(CodecError::new(key, "unexpected trailing segment"));
    }
    let [ops, dim, act, drop, skips, pool, lr, wd, ep] = values;

    let layers = ops
        .split(',')
        .map(|op| op.parse().map_err(|e: String| CodecError::new("ops", e)))
        .collect::<Result<Vec<_>, _>>()?;
    if layers.len() > MAX_LAYERS {
        return Err(CodecError::new(
            "ops",
            format!("{} layers exceeds the maximum of {MAX_LAYERS}", layers.len()),
        ));
    }

    let hidden_dim = DIMS
        .iter()
        .copied()
        .find(|d| d.to_string() == dim)
        .ok_or_else(|| CodecError::new("dim", format!("`{dim}` is not one of {DIMS:?}")))?;

    let activation = act.parse().map_err(|e: String| CodecError::new("act", e))?;
    let dropout_steps = parse_dropout(drop)?;
    let skips = parse_skips(skips, layers.len())?;
    let pooling = pool.parse().map_err(|e: String| CodecError::new("pool", e))?;
    let lr = lr.parse().map_err(|e: String| CodecError::new("lr", e))?;
    let weight_decay = wd.parse().map_err(|e: String| CodecError::new("wd", e))?;
    let epochs = ep.parse().map_err(|e: String| CodecError::new("ep", e))?;

    Ok(ArchGenotype {
        layers,
        hidden_dim,
        activation,
        dropout_steps,
        skips,
        pooling,
        lr,
        weight_decay,
        epochs,
    })
}

fn parse_dropout(text: &str) -> Result<u8, CodecError> {
    let bytes = text.as_bytes();
    let well_formed = bytes.len() == 4
        && bytes[1] == b'.'
        && [bytes[0], bytes[2], bytes[3]].iter().all(u8::is_ascii_digit);
    if !well_formed {
        return Err(CodecError::new(
            "drop",
            format!("`{text}` is not of the form d.dd"),
        ));
    }
    let hundredths = u32::from(bytes[0] - b'0') * 100
        + u32::from(bytes[2] - b'0') * 10
        + u32::from(bytes[3] - b'0');
    if hundredths % 5 != 0 || hundredths > u32::from(DROPOUT_STEPS) * 5 {
        return Err(CodecError::new(
            "drop",
            format!("`{text}` is not a multiple of 0.05 in [0, 1]"),
        ));
    }
    Ok((hundredths / 5) as u8)
}

fn parse_skips(text: &str, num_layers: usize) -> Result<BTreeSet<(u8, u8)>, CodecError> {
    let mut skips = BTreeSet::new();
    if text.is_empty() {
        return Ok(skips);
    }
    let mut previous: Option<(u8, u8)> = None;
    for pair in text.split(',') {
        let (from, to) = pair
            .split_once('-')
            .and_then(|(a, b)| Some((parse_index(a)?, parse_index(b)?)))
            .ok_or_else(|| CodecError::new("skips", format!("`{pair}` is not a from-to pair")))?;
        if from >= to || usize::from(to) > num_layers {
            return Err(CodecError::new(
                "skips",
                format!("pair {from}-{to} must satisfy from < to <= {num_layers}"),
            ));
        }
        if previous.is_some_and(|p| p >= (from, to)) {
            return Err(CodecError::new("skips", "pairs must be strictly ascending"));
        }
        previous = Some((from, to));
        skips.insert((from, to));
    }
    Ok(skips)
}

fn parse_index(text: &str) -> Option<u8> {
    let value: u8 = text.parse().ok()?;
    (value.to_string() == text).then_some(value)
}

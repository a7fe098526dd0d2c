//! Weight persistence.
//!
//! ```json
//! {
//!   "encoder": {"activation": "tanh", "layers": [{"shape": [out, in], "weights": [..], "bias": [..]}]},
//!   "decoder": {"activation": "tanh", "layers": [..]}
//! }
//! ```
//!
//! `weights` is row-major `out x in`. Floats are written in shortest
//! round-trip form, so a save/load cycle reproduces every bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, EncoderDecoderPair, Layer, MlpWeights};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    shape: [usize; 2],
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetDoc {
    activation: Activation,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    encoder: NetDoc,
    decoder: NetDoc,
}

fn to_doc(w: &MlpWeights) -> NetDoc {
    NetDoc {
        activation: w.activation,
        layers: w
            .layers
            .iter()
            .map(|l| LayerDoc { shape: [l.outputs, l.inputs], weights: l.weights.clone(), bias: l.bias.clone() })
            .collect(),
    }
}

fn from_doc(doc: NetDoc, which: &str) -> Result<MlpWeights> {
    let bad = |i: usize, reason: String| Error::WeightsFormat { location: format!("{which} layer {i}"), reason };
    if doc.layers.is_empty() {
        return Err(Error::WeightsFormat { location: which.into(), reason: "no layers".into() });
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, l) in doc.layers.into_iter().enumerate() {
        let [outputs, inputs] = l.shape;
        if outputs == 0 || inputs == 0 {
            return Err(bad(i, format!("zero dimension in shape {outputs}x{inputs}")));
        }
        match outputs.checked_mul(inputs) {
            Some(k) if k == l.weights.len() => {}
            _ => return Err(bad(i, format!("{} weights for shape {outputs}x{inputs}", l.weights.len()))),
        }
        if l.bias.len() != outputs {
            return Err(bad(i, format!("{} biases for {outputs} outputs", l.bias.len())));
        }
        if let Some(prev) = layers.last().map(|p: &Layer| p.outputs) {
            if prev != inputs {
                return Err(bad(i, format!("takes {inputs} inputs but the previous layer emits {prev}")));
            }
        }
        if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
            return Err(bad(i, "non-finite value".into()));
        }
        layers.push(Layer { inputs, outputs, weights: l.weights, bias: l.bias });
    }
    MlpWeights::new(layers, doc.activation)
}

pub fn weights_to_json(pair: &EncoderDecoderPair) -> String {
    let doc = PairDoc { encoder: to_doc(&pair.encoder), decoder: to_doc(&pair.decoder) };
    serde_json::to_string(&doc).expect("weights serialize")
}

/// Parses a weights document. Nothing is returned unless every layer validates.
pub fn parse_weights(text: &str) -> Result<EncoderDecoderPair> {
    let doc: PairDoc = serde_json::from_str(text)
        .map_err(|e| Error::WeightsFormat { location: format!("line {} column {}", e.line(), e.column()), reason: e.to_string() })?;
    let encoder = from_doc(doc.encoder, "encoder")?;
    let decoder = from_doc(doc.decoder, "decoder")?;
    EncoderDecoderPair::new(encoder, decoder).map_err(|e| Error::WeightsFormat { location: "pair".into(), reason: e.to_string() })
}

/// Writes the weights document via a temporary file and rename.
pub fn save_weights(pair: &EncoderDecoderPair, path: &Path) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, weights_to_json(pair))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<EncoderDecoderPair> {
    parse_weights(&fs::read_to_string(path)?)
}

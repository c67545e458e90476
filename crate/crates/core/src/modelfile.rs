//! TOML documents for network architectures and trained models.
//!
//! ```toml
//! format = "rqnn-model"
//! version = 1
//!
//! [[layer]]
//! kind = "radial_quadratic"   # or "affine"
//! in_dim = 2
//! out_dim = 8
//! activation = "sigmoid"      # sigmoid | relu | identity | softmax
//! weights = [ ... ]           # out_dim * in_dim values, row-major
//! theta = [ ... ]             # out_dim values
//! xi = [ ... ]                # out_dim values, radial layers only
//! ```
//!
//! An architecture-only document omits the three arrays.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, LayerKind, LayerParams, LayerSpec, Model, NetworkSpec};
use crate::numkernel::{Matrix, Scalar, Vector};

pub const FORMAT_TAG: &str = "rqnn-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    #[serde(rename = "layer")]
    layers: Vec<LayerRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    kind: LayerKind,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi: Option<Vec<f64>>,
}

impl LayerRecord {
    fn from_spec(l: &LayerSpec) -> Self {
        Self {
            kind: l.kind,
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            activation: l.activation,
            weights: None,
            theta: None,
            xi: None,
        }
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.kind, self.in_dim, self.out_dim, self.activation)
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

fn parse_document(text: &str) -> Result<Document> {
    let doc: Document = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if doc.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "expected format = \"{FORMAT_TAG}\", found \"{}\"",
            doc.format
        )));
    }
    if doc.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {}", doc.version)));
    }
    Ok(doc)
}

fn render(doc: &Document) -> Result<String> {
    toml::to_string(doc).map_err(|e| Error::Format(e.to_string()))
}

pub fn spec_to_string(spec: &NetworkSpec) -> Result<String> {
    render(&Document {
        format: FORMAT_TAG.into(),
        version: FORMAT_VERSION,
        layers: spec.layers().iter().map(LayerRecord::from_spec).collect(),
    })
}

/// Reads the architecture, ignoring any parameter arrays.
pub fn spec_from_str(text: &str) -> Result<NetworkSpec> {
    let doc = parse_document(text)?;
    NetworkSpec::new(doc.layers.iter().map(LayerRecord::spec).collect())
}

pub fn model_to_string<T: Scalar>(model: &Model<T>) -> Result<String> {
    let layers = model
        .spec()
        .layers()
        .iter()
        .zip(model.params())
        .map(|(l, p)| LayerRecord {
            weights: Some(to_f64(p.weights.as_slice())),
            theta: Some(to_f64(p.theta.as_slice())),
            xi: p.xi.as_ref().map(|xi| to_f64(xi.as_slice())),
            ..LayerRecord::from_spec(l)
        })
        .collect();
    render(&Document {
        format: FORMAT_TAG.into(),
        version: FORMAT_VERSION,
        layers,
    })
}

pub fn model_from_str<T: Scalar>(text: &str) -> Result<Model<T>> {
    let doc = parse_document(text)?;
    let spec = NetworkSpec::new(doc.layers.iter().map(LayerRecord::spec).collect())?;
    let mut params = Vec::with_capacity(doc.layers.len());
    for (i, rec) in doc.layers.into_iter().enumerate() {
        let missing = |name: &str| Error::Format(format!("layer {i} is missing `{name}`"));
        let weights = rec.weights.ok_or_else(|| missing("weights"))?;
        let theta = rec.theta.ok_or_else(|| missing("theta"))?;
        let xi = match (rec.kind, rec.xi) {
            (LayerKind::RadialQuadratic, Some(xi)) => Some(Vector::new(from_f64(xi))?),
            (LayerKind::RadialQuadratic, None) => return Err(missing("xi")),
            (LayerKind::Affine, None) => None,
            (LayerKind::Affine, Some(_)) => {
                return Err(Error::Format(format!("affine layer {i} must not carry `xi`")))
            }
        };
        params.push(LayerParams {
            weights: Matrix::new(rec.out_dim, rec.in_dim, from_f64(weights))?,
            theta: Vector::new(from_f64(theta))?,
            xi,
        });
    }
    Model::new(spec, params)
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let text = model_to_string(model)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}

pub fn load_spec(path: &Path) -> Result<NetworkSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    spec_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Rng;

    #[test]
    fn model_round_trip_is_exact() {
        let spec = NetworkSpec::classifier(LayerKind::RadialQuadratic, 2, 2, 3).unwrap();
        let model = Model::<f64>::init(spec, &mut Rng::new(5), 0.7).unwrap();
        let text = model_to_string(&model).unwrap();
        assert!(text.starts_with("format = \"rqnn-model\"\nversion = 1\n"));
        let back: Model<f64> = model_from_str(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn spec_document() {
        let spec = NetworkSpec::classifier(LayerKind::Affine, 2, 3, 5).unwrap();
        let text = spec_to_string(&spec).unwrap();
        assert!(!text.contains("weights"));
        assert_eq!(spec_from_str(&text).unwrap(), spec);
        assert!(model_from_str::<f64>(&text).is_err());
    }

    #[test]
    fn rejects_bad_documents() {
        let ok = "format = \"rqnn-model\"\nversion = 1\n[[layer]]\nkind = \"affine\"\nin_dim = 1\nout_dim = 1\nactivation = \"identity\"\nweights = [2.0]\ntheta = [0.5]\n";
        let m: Model<f64> = model_from_str(ok).unwrap();
        assert_eq!(m.evaluate(&[1.0]).unwrap(), vec![2.5]);

        assert!(model_from_str::<f64>(&ok.replace("rqnn-model", "other")).is_err());
        assert!(model_from_str::<f64>(&ok.replace("version = 1", "version = 2")).is_err());
        assert!(model_from_str::<f64>(&ok.replace("[2.0]", "[2.0, 1.0]")).is_err());
        assert!(model_from_str::<f64>(&format!("{ok}xi = [1.0]\n")).is_err());
        assert!(model_from_str::<f64>(&ok.replace("\"identity\"", "\"tanh\"")).is_err());
    }
}

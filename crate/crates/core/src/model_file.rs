//! JSON persistence for fitted (or ground-truth) mixture models.
//!
//! Nodes are stored by name so a model can be reloaded against a fresh
//! [`Interner`]. Floats round-trip exactly.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{ComponentParams, MixtureParams, WEIGHT_SUM_TOL};
use crate::error::{Error, Result};
use crate::graph::Interner;
use crate::index::Window;

/// Tolerance on `Σ π` accepted when loading; sums within it are renormalised.
pub const PI_LOAD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    u: String,
    v: String,
    p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentRecord {
    name: String,
    edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    pi: Vec<f64>,
    components: Vec<ComponentRecord>,
    #[serde(default)]
    window: Option<Window>,
    #[serde(default)]
    converged: Option<bool>,
    #[serde(default)]
    nll_trace: Vec<f64>,
}

/// Fit provenance stored next to the parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelMeta {
    pub window: Option<Window>,
    pub converged: Option<bool>,
    pub nll_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub params: MixtureParams,
    pub meta: ModelMeta,
}

/// `true`, `fake`, then `component2`, `component3`, ...
pub fn component_name(m: usize) -> String {
    match m {
        0 => "true".into(),
        1 => "fake".into(),
        m => format!("component{m}"),
    }
}

pub fn model_to_json(params: &MixtureParams, meta: &ModelMeta, names: &Interner) -> Result<String> {
    let record = ModelRecord {
        pi: params.weights().to_vec(),
        components: params
            .components()
            .iter()
            .enumerate()
            .map(|(m, c)| ComponentRecord {
                name: component_name(m),
                edges: c
                    .iter()
                    .map(|((u, v), p)| EdgeRecord {
                        u: names.name(u).to_string(),
                        v: names.name(v).to_string(),
                        p,
                    })
                    .collect(),
            })
            .collect(),
        window: meta.window,
        converged: meta.converged,
        nll_trace: meta.nll_trace.clone(),
    };
    serde_json::to_string_pretty(&record).map_err(|e| Error::model("<root>", e))
}

/// Parses and validates a model, interning unseen node names into `names`.
pub fn model_from_json(source: &str, names: &mut Interner) -> Result<ModelFile> {
    let mut de = serde_json::Deserializer::from_str(source);
    let record: ModelRecord = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::model(path, e.into_inner())
    })?;
    de.end().map_err(|e| Error::model("<root>", e))?;

    let k = record.pi.len();
    if k == 0 {
        return Err(Error::model("pi", "at least one component is required"));
    }
    if record.components.len() != k {
        return Err(Error::model(
            "components",
            format!(
                "{} components for {k} mixing weights",
                record.components.len()
            ),
        ));
    }
    if let Some((i, w)) = record
        .pi
        .iter()
        .enumerate()
        .find(|(_, w)| !(0.0..=1.0).contains(*w))
    {
        return Err(Error::model(
            format!("pi[{i}]"),
            format!("{w} outside [0, 1]"),
        ));
    }
    let total: f64 = record.pi.iter().sum();
    if (total - 1.0).abs() > PI_LOAD_TOL {
        return Err(Error::model("pi", format!("weights sum to {total}, not 1")));
    }
    let mut pi = record.pi;
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        pi.iter_mut().for_each(|w| *w /= total);
    }

    let mut components = Vec::with_capacity(k);
    for (m, c) in record.components.iter().enumerate() {
        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(c.edges.len());
        for (j, e) in c.edges.iter().enumerate() {
            let field = format!("components[{m}].edges[{j}]");
            if !(0.0..=1.0).contains(&e.p) {
                return Err(Error::model(
                    format!("{field}.p"),
                    format!("{} outside [0, 1]", e.p),
                ));
            }
            if e.u == e.v {
                return Err(Error::model(field, format!("self-loop on `{}`", e.u)));
            }
            let uv = (names.intern(&e.u), names.intern(&e.v));
            if !seen.insert(uv) {
                return Err(Error::model(
                    field,
                    format!("duplicate edge ({}, {})", e.u, e.v),
                ));
            }
            edges.push((uv, e.p));
        }
        components.push(ComponentParams::from_edges(edges)?);
    }
    if let Some(m) = (1..k).find(|&m| !components[m].edges().eq(components[0].edges())) {
        return Err(Error::model(
            format!("components[{m}].edges"),
            "edge set differs from components[0]",
        ));
    }
    let params = MixtureParams::new(pi, components).map_err(|e| Error::model("<root>", e))?;
    Ok(ModelFile {
        params,
        meta: ModelMeta {
            window: record.window,
            converged: record.converged,
            nll_trace: record.nll_trace,
        },
    })
}

pub fn save_model(
    path: impl AsRef<Path>,
    params: &MixtureParams,
    meta: &ModelMeta,
    names: &Interner,
) -> Result<()> {
    fs::write(path, model_to_json(params, meta, names)? + "\n")?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>, names: &mut Interner) -> Result<ModelFile> {
    model_from_json(&fs::read_to_string(path)?, names)
}

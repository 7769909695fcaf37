//! Model, policy, vector and generator-parameter files.

use std::fs;
use std::path::{Path, PathBuf};

use riskgrowth::generators::{PortfolioParams, PriceLaw};
use riskgrowth::{MdpModel, Policy};
use serde_json::{Map, Value as Json};

use crate::json::{tensor, Value};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error(transparent)]
    Model(#[from] riskgrowth::Error),
}

pub type IoResult<T> = Result<T, IoError>;

fn schema(field: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn read(path: &Path) -> IoResult<String> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, text: &str) -> IoResult<()> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses JSON text; `path` only labels errors.
pub fn parse_json(text: &str, path: &Path) -> IoResult<Json> {
    serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn object<'a>(doc: &'a Json, allowed: &[&str], required: &[&str]) -> IoResult<&'a Map<String, Json>> {
    let map = doc.as_object().ok_or_else(|| schema("<root>", "expected a JSON object"))?;
    if let Some(extra) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(schema(extra.as_str(), "unknown field"));
    }
    if let Some(missing) = required.iter().find(|k| !map.contains_key(**k)) {
        return Err(schema(*missing, "missing field"));
    }
    Ok(map)
}

fn number(v: &Json, field: &str) -> IoResult<f64> {
    v.as_f64().ok_or_else(|| schema(field, "expected a number"))
}

fn numbers(v: &Json, field: &str) -> IoResult<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| schema(field, "expected an array of numbers"))?
        .iter()
        .map(|x| number(x, field))
        .collect()
}

fn rows(v: &Json, field: &str) -> IoResult<Vec<Vec<f64>>> {
    v.as_array()
        .ok_or_else(|| schema(field, "expected a 2-d array"))?
        .iter()
        .map(|r| numbers(r, field))
        .collect()
}

fn strings(v: &Json, field: &str) -> IoResult<Vec<String>> {
    v.as_array()
        .ok_or_else(|| schema(field, "expected an array of strings"))?
        .iter()
        .map(|x| x.as_str().map(String::from).ok_or_else(|| schema(field, "expected a string")))
        .collect()
}

/// Flattens a `[s][a][s]` array, checking every dimension.
fn tensor_field(v: &Json, field: &str, s: usize, a: usize) -> IoResult<Vec<f64>> {
    let outer = v.as_array().ok_or_else(|| schema(field, "expected a 3-d array [x][u][y]"))?;
    if outer.len() != s {
        return Err(schema(field, format!("expected {s} state blocks, found {}", outer.len())));
    }
    let mut flat = Vec::with_capacity(s * a * s);
    for (x, block) in outer.iter().enumerate() {
        let block = rows(block, field)?;
        if block.len() != a {
            return Err(schema(field, format!("state {x}: expected {a} action rows, found {}", block.len())));
        }
        for (u, row) in block.iter().enumerate() {
            if row.len() != s {
                return Err(schema(field, format!("row ({x},{u}): expected {s} entries, found {}", row.len())));
            }
            flat.extend_from_slice(row);
        }
    }
    Ok(flat)
}

/// Builds a model from a parsed model document.
pub fn model_from_json(doc: &Json) -> IoResult<MdpModel> {
    let map = object(
        doc,
        &["states", "actions", "kernel", "weights", "metadata"],
        &["states", "actions", "kernel", "weights"],
    )?;
    let states = strings(&map["states"], "states")?;
    let actions = strings(&map["actions"], "actions")?;
    let (s, a) = (states.len(), actions.len());
    let kernel = tensor_field(&map["kernel"], "kernel", s, a)?;
    let weights = tensor_field(&map["weights"], "weights", s, a)?;
    if let Some(i) = weights.iter().position(|w| !(*w >= 0.0)) {
        let (x, u, y) = (i / (a * s), (i / s) % a, i % s);
        return Err(schema(
            "weights",
            format!("weights must be nonnegative; entry ({x},{u},{y}) is {}", weights[i]),
        ));
    }
    let metadata = match map.get("metadata") {
        None => String::new(),
        Some(m) => m.as_str().ok_or_else(|| schema("metadata", "expected a string"))?.to_string(),
    };
    Ok(MdpModel::new(states, actions, kernel, weights, metadata)?)
}

pub fn model_to_json(m: &MdpModel) -> Value {
    let (s, a) = (m.n_states(), m.n_actions());
    Value::obj()
        .with("states", m.states().to_vec())
        .with("actions", m.actions().to_vec())
        .with("kernel", tensor(m.kernel_data(), a, s))
        .with("weights", tensor(m.weight_data(), a, s))
        .with("metadata", m.metadata())
}

pub fn load_model(path: &Path) -> IoResult<MdpModel> {
    model_from_json(&parse_json(&read(path)?, path)?)
}

pub fn save_model(m: &MdpModel, path: &Path) -> IoResult<()> {
    write_file(path, &model_to_json(m).render())
}

/// Reads `{"phi": [[...]]}` and checks it against the model's shape.
pub fn load_policy(path: &Path, model: &MdpModel) -> IoResult<Policy> {
    let doc = parse_json(&read(path)?, path)?;
    let map = object(&doc, &["phi"], &["phi"])?;
    let phi = rows(&map["phi"], "phi")?;
    let (s, a) = (model.n_states(), model.n_actions());
    if phi.len() != s || phi.iter().any(|r| r.len() != a) {
        return Err(schema("phi", format!("expected a {s} x {a} array")));
    }
    Ok(Policy::from_matrix(s, a, phi.concat())?)
}

pub fn policy_to_json(p: &Policy) -> Value {
    let v = Value::obj().with(
        "kind",
        match p.kind() {
            riskgrowth::PolicyKind::Deterministic => "deterministic",
            riskgrowth::PolicyKind::Randomized => "randomized",
        },
    );
    let v = match p.choices() {
        Some(c) => v.with("choices", c),
        None => v,
    };
    v.with("phi", crate::json::matrix(p.matrix(), p.n_actions()))
}

pub fn save_policy(p: &Policy, path: &Path) -> IoResult<()> {
    let doc = Value::obj().with("phi", crate::json::matrix(p.matrix(), p.n_actions()));
    write_file(path, &doc.render())
}

/// Reads a JSON array of exactly `len` numbers.
pub fn load_vector(path: &Path, len: usize) -> IoResult<Vec<f64>> {
    let v = numbers(&parse_json(&read(path)?, path)?, "<root>")?;
    if v.len() != len {
        return Err(schema("<root>", format!("expected {len} numbers, found {}", v.len())));
    }
    Ok(v)
}

/// Portfolio parameters: `q`, `laws[x][y] = [{"p": .., "w": [..]}, ..]`,
/// `theta`, `r_bank` and an optional explicit `grid`.
pub fn load_portfolio_params(path: &Path) -> IoResult<(PortfolioParams, bool)> {
    let doc = parse_json(&read(path)?, path)?;
    let map = object(&doc, &["q", "laws", "theta", "r_bank", "grid"], &["q", "laws", "theta", "r_bank"])?;
    let q = rows(&map["q"], "q")?;
    let laws = map["laws"]
        .as_array()
        .ok_or_else(|| schema("laws", "expected a 2-d array of atom lists"))?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| schema("laws", "expected a 2-d array of atom lists"))?
                .iter()
                .map(law)
                .collect::<IoResult<Vec<_>>>()
        })
        .collect::<IoResult<Vec<_>>>()?;
    let grid = match map.get("grid") {
        Some(g) => Some(rows(g, "grid")?),
        None => None,
    };
    let has_grid = grid.is_some();
    let params = PortfolioParams {
        q,
        laws,
        theta: number(&map["theta"], "theta")?,
        r_bank: number(&map["r_bank"], "r_bank")?,
        grid: grid.unwrap_or_default(),
    };
    Ok((params, has_grid))
}

fn law(v: &Json) -> IoResult<PriceLaw> {
    let atoms = v
        .as_array()
        .ok_or_else(|| schema("laws", "expected a list of atoms"))?
        .iter()
        .map(|atom| {
            let m = object(atom, &["p", "w"], &["p", "w"])?;
            Ok((number(&m["p"], "p")?, numbers(&m["w"], "w")?))
        })
        .collect::<IoResult<Vec<_>>>()?;
    Ok(PriceLaw { atoms })
}

//! JSON encoding of algebras, elements, states, homomorphisms and channels.
//!
//! Matrices are flat row-major lists of `[re, im]` pairs; the side length always follows
//! from the surrounding algebra. Plain numbers are accepted on input as real entries.
//! Floats are written in shortest round-trip form, so parse → serialise → parse is exact.

use serde_json::{json, Map, Value};

use crate::algebra::{AlgebraElement, HomSpec, MultiMatrixAlgebra};
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::state::State;
use crate::tol::Tolerances;

fn schema(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Schema(format!("{path}: {msg}"))
}

/// Parses JSON text, reporting line and column on failure.
pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text)
        // serde_json's message already ends in "at line L column C".
        .map_err(|e| Error::Parse(e.to_string()))
}

const WIDTH: usize = 100;

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(xs) => xs.iter().all(|x| !x.is_array() && !x.is_object()),
        Value::Object(_) => false,
        _ => true,
    }
}

fn write_pretty(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Object(m) if !m.is_empty() => {
            out.push_str("{\n");
            for (k, (key, val)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_pretty(val, indent + 1, out);
                out.push_str(if k + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        Value::Array(xs) if !xs.is_empty() => {
            let inline = v.to_string();
            if xs.iter().all(is_flat) && inline.len() + 2 * indent <= WIDTH {
                out.push_str(&inline);
                return;
            }
            out.push_str("[\n");
            if xs.iter().all(is_flat) {
                // Pack short numeric items into lines of bounded width.
                let items: Vec<String> = xs.iter().map(Value::to_string).collect();
                let mut line = String::new();
                for (k, item) in items.iter().enumerate() {
                    let piece = if k + 1 < items.len() { format!("{item},") } else { item.clone() };
                    if !line.is_empty() && line.len() + 1 + piece.len() + 2 * (indent + 1) > WIDTH {
                        out.push_str(&pad(indent + 1));
                        out.push_str(&line);
                        out.push('\n');
                        line.clear();
                    }
                    if !line.is_empty() {
                        line.push(' ');
                    }
                    line.push_str(&piece);
                }
                out.push_str(&pad(indent + 1));
                out.push_str(&line);
                out.push('\n');
            } else {
                for (k, x) in xs.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write_pretty(x, indent + 1, out);
                    out.push_str(if k + 1 < xs.len() { ",\n" } else { "\n" });
                }
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        _ => out.push_str(&v.to_string()),
    }
}

/// Indented JSON with numeric arrays packed into lines, which keeps matrices readable.
pub fn to_pretty(v: &Value) -> String {
    let mut out = String::new();
    write_pretty(v, 0, &mut out);
    out
}

pub fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    obj.as_object()
        .ok_or_else(|| schema(path, "expected an object"))?
        .get(key)
        .ok_or_else(|| schema(path, format!("missing field \"{key}\"")))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| schema(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(schema(path, "non-finite number"));
    }
    Ok(x)
}

fn count(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn complex_to_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn complex_from_json(v: &Value, path: &str) -> Result<C64> {
    match v {
        Value::Array(pair) if pair.len() == 2 => {
            Ok(C64::new(number(&pair[0], &format!("{path}[0]"))?, number(&pair[1], &format!("{path}[1]"))?))
        }
        Value::Number(_) => Ok(C64::new(number(v, path)?, 0.0)),
        _ => Err(schema(path, "expected [re, im] or a number")),
    }
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Array(m.data().iter().map(|&z| complex_to_json(z)).collect())
}

pub fn matrix_from_json(v: &Value, rows: usize, cols: usize, path: &str) -> Result<CMatrix> {
    let entries = array(v, path)?;
    if entries.len() != rows * cols {
        return Err(schema(path, format!("expected {} entries for a {rows}x{cols} matrix, got {}", rows * cols, entries.len())));
    }
    let data = entries
        .iter()
        .enumerate()
        .map(|(k, e)| complex_from_json(e, &format!("{path}[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    CMatrix::from_vec(rows, cols, data)
}

pub fn algebra_to_json(a: &MultiMatrixAlgebra) -> Value {
    json!({ "blocks": a.blocks() })
}

pub fn algebra_from_json(v: &Value, path: &str) -> Result<MultiMatrixAlgebra> {
    let p = format!("{path}.blocks");
    let blocks = array(field(v, "blocks", path)?, &p)?
        .iter()
        .enumerate()
        .map(|(k, b)| count(b, &format!("{p}[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    MultiMatrixAlgebra::new(blocks).map_err(|e| schema(path, e))
}

pub fn element_to_json(a: &AlgebraElement) -> Value {
    json!({ "blocks": a.blocks().iter().map(matrix_to_json).collect::<Vec<_>>() })
}

pub fn element_from_json(v: &Value, alg: &MultiMatrixAlgebra, path: &str) -> Result<AlgebraElement> {
    let p = format!("{path}.blocks");
    let raw = array(field(v, "blocks", path)?, &p)?;
    if raw.len() != alg.num_blocks() {
        return Err(schema(&p, format!("expected {} blocks, got {}", alg.num_blocks(), raw.len())));
    }
    let blocks = raw
        .iter()
        .enumerate()
        .map(|(x, b)| {
            let m = alg.block_size(x);
            matrix_from_json(b, m, m, &format!("{p}[{x}]"))
        })
        .collect::<Result<Vec<_>>>()?;
    AlgebraElement::new(alg, blocks)
}

pub fn state_to_json(s: &State) -> Value {
    json!({
        "weights": s.weights(),
        "densities": s.densities().iter().map(|d| d.as_ref().map_or(Value::Null, matrix_to_json)).collect::<Vec<_>>(),
    })
}

pub fn state_from_json(v: &Value, alg: &MultiMatrixAlgebra, tol: &Tolerances, path: &str) -> Result<State> {
    let wp = format!("{path}.weights");
    let weights = array(field(v, "weights", path)?, &wp)?
        .iter()
        .enumerate()
        .map(|(k, w)| number(w, &format!("{wp}[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    let dp = format!("{path}.densities");
    let raw = array(field(v, "densities", path)?, &dp)?;
    if weights.len() != alg.num_blocks() || raw.len() != alg.num_blocks() {
        return Err(schema(
            path,
            format!("expected {} weights and densities, got {} and {}", alg.num_blocks(), weights.len(), raw.len()),
        ));
    }
    let densities = raw
        .iter()
        .enumerate()
        .map(|(x, d)| {
            if d.is_null() {
                Ok(None)
            } else {
                let m = alg.block_size(x);
                matrix_from_json(d, m, m, &format!("{dp}[{x}]")).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    State::new(alg, weights, densities, tol).map_err(|e| schema(path, e))
}

pub fn hom_to_json(h: &HomSpec) -> Value {
    json!({ "source": algebra_to_json(h.source()), "target": algebra_to_json(h.target()), "mult": h.mult() })
}

fn mult_from_json(v: &Value, path: &str) -> Result<Vec<Vec<usize>>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rp = format!("{path}[{i}]");
            array(row, &rp)?.iter().enumerate().map(|(j, c)| count(c, &format!("{rp}[{j}]"))).collect()
        })
        .collect()
}

pub fn hom_from_json(v: &Value, path: &str) -> Result<HomSpec> {
    let source = algebra_from_json(field(v, "source", path)?, &format!("{path}.source"))?;
    let target = algebra_from_json(field(v, "target", path)?, &format!("{path}.target"))?;
    let mp = format!("{path}.mult");
    let mult = mult_from_json(field(v, "mult", path)?, &mp)?;
    HomSpec::new(source, target, mult).map_err(|e| schema(&mp, e))
}

/// How a channel was specified; kept so that problems serialise back in their own form.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Choi(Channel),
    Hom(HomSpec),
    /// `kraus[x][y]` lists operators of shape `n_y × m_x`.
    Kraus { source: MultiMatrixAlgebra, target: MultiMatrixAlgebra, kraus: Vec<Vec<Vec<CMatrix>>> },
}

impl ChannelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ChannelSpec::Choi(_) => "choi",
            ChannelSpec::Hom(_) => "hom",
            ChannelSpec::Kraus { .. } => "kraus",
        }
    }

    pub fn channel(&self) -> Result<Channel> {
        match self {
            ChannelSpec::Choi(c) => Ok(c.clone()),
            ChannelSpec::Hom(h) => Ok(Channel::from_hom(h)),
            ChannelSpec::Kraus { source, target, kraus } => Channel::from_kraus(source, target, kraus),
        }
    }

    pub fn hom(&self) -> Option<&HomSpec> {
        match self {
            ChannelSpec::Hom(h) => Some(h),
            _ => None,
        }
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        match self {
            ChannelSpec::Choi(c) => c.target(),
            ChannelSpec::Hom(h) => h.target(),
            ChannelSpec::Kraus { target, .. } => target,
        }
    }
}

pub fn channel_to_json(c: &Channel) -> Value {
    channel_spec_to_json(&ChannelSpec::Choi(c.clone()))
}

pub fn channel_spec_to_json(spec: &ChannelSpec) -> Value {
    let mut obj = Map::new();
    let (source, target) = match spec {
        ChannelSpec::Choi(c) => (c.source(), c.target()),
        ChannelSpec::Hom(h) => (h.source(), h.target()),
        ChannelSpec::Kraus { source, target, .. } => (source, target),
    };
    obj.insert("source".into(), algebra_to_json(source));
    obj.insert("target".into(), algebra_to_json(target));
    obj.insert("kind".into(), json!(spec.kind()));
    match spec {
        ChannelSpec::Choi(c) => {
            let grid: Vec<Value> =
                c.choi_blocks().iter().map(|row| Value::Array(row.iter().map(matrix_to_json).collect())).collect();
            obj.insert("choi".into(), Value::Array(grid));
        }
        ChannelSpec::Hom(h) => {
            obj.insert("mult".into(), json!(h.mult()));
        }
        ChannelSpec::Kraus { kraus, .. } => {
            let grid: Vec<Value> = kraus
                .iter()
                .map(|row| {
                    Value::Array(row.iter().map(|ops| Value::Array(ops.iter().map(matrix_to_json).collect())).collect())
                })
                .collect();
            obj.insert("kraus".into(), Value::Array(grid));
        }
    }
    Value::Object(obj)
}

/// Reads a `{"source", "target", "kind", payload}` channel.
pub fn channel_spec_from_json(v: &Value, path: &str) -> Result<ChannelSpec> {
    let source = algebra_from_json(field(v, "source", path)?, &format!("{path}.source"))?;
    let target = algebra_from_json(field(v, "target", path)?, &format!("{path}.target"))?;
    let kp = format!("{path}.kind");
    let kind = field(v, "kind", path)?.as_str().ok_or_else(|| schema(&kp, "expected a string"))?;
    let grid = |key: &str| -> Result<(String, &Vec<Value>)> {
        let gp = format!("{path}.{key}");
        let rows = array(field(v, key, path)?, &gp)?;
        if rows.len() != target.num_blocks() {
            return Err(schema(&gp, format!("expected {} rows (one per target block), got {}", target.num_blocks(), rows.len())));
        }
        Ok((gp, rows))
    };
    match kind {
        "hom" => {
            let mp = format!("{path}.mult");
            let mult = mult_from_json(field(v, "mult", path)?, &mp)?;
            Ok(ChannelSpec::Hom(HomSpec::new(source, target, mult).map_err(|e| schema(&mp, e))?))
        }
        "choi" => {
            let (gp, rows) = grid("choi")?;
            let mut choi = Vec::with_capacity(rows.len());
            for (x, row) in rows.iter().enumerate() {
                let rp = format!("{gp}[{x}]");
                let cells = array(row, &rp)?;
                if cells.len() != source.num_blocks() {
                    return Err(schema(&rp, format!("expected {} Choi blocks, got {}", source.num_blocks(), cells.len())));
                }
                let m = target.block_size(x);
                let blocks = cells
                    .iter()
                    .enumerate()
                    .map(|(y, c)| {
                        let d = source.block_size(y) * m;
                        matrix_from_json(c, d, d, &format!("{rp}[{y}]"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                choi.push(blocks);
            }
            Ok(ChannelSpec::Choi(Channel::from_choi(source, target, choi).map_err(|e| schema(&gp, e))?))
        }
        "kraus" => {
            let (gp, rows) = grid("kraus")?;
            let mut kraus = Vec::with_capacity(rows.len());
            for (x, row) in rows.iter().enumerate() {
                let rp = format!("{gp}[{x}]");
                let cells = array(row, &rp)?;
                if cells.len() != source.num_blocks() {
                    return Err(schema(&rp, format!("expected {} operator lists, got {}", source.num_blocks(), cells.len())));
                }
                let m = target.block_size(x);
                let mut out = Vec::with_capacity(cells.len());
                for (y, ops) in cells.iter().enumerate() {
                    let op = format!("{rp}[{y}]");
                    let n = source.block_size(y);
                    let mats = array(ops, &op)?
                        .iter()
                        .enumerate()
                        .map(|(k, o)| matrix_from_json(o, n, m, &format!("{op}[{k}]")))
                        .collect::<Result<Vec<_>>>()?;
                    out.push(mats);
                }
                kraus.push(out);
            }
            Channel::from_kraus(&source, &target, &kraus).map_err(|e| schema(&gp, e))?;
            Ok(ChannelSpec::Kraus { source, target, kraus })
        }
        other => Err(schema(&kp, format!("unknown kind \"{other}\" (expected choi, hom or kraus)"))),
    }
}

pub fn channel_from_json(v: &Value, path: &str) -> Result<Channel> {
    channel_spec_from_json(v, path)?.channel()
}

pub fn tolerances_to_json(t: &Tolerances) -> Value {
    json!({ "eps_rank": t.eps_rank, "eps_eq": t.eps_eq, "eps_recon": t.eps_recon })
}

/// Overrides fields of `base` with those present in `v`; every value must lie in `(0, 1)`.
pub fn tolerances_from_json(v: &Value, base: Tolerances, path: &str) -> Result<Tolerances> {
    let obj = v.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    let mut t = base;
    for (key, val) in obj {
        let fp = format!("{path}.{key}");
        let x = number(val, &fp)?;
        match key.as_str() {
            "eps_rank" => t.eps_rank = x,
            "eps_eq" => t.eps_eq = x,
            "eps_recon" => t.eps_recon = x,
            _ => return Err(schema(&fp, "unknown tolerance")),
        }
    }
    validate_tolerances(&t, path)?;
    Ok(t)
}

pub fn validate_tolerances(t: &Tolerances, path: &str) -> Result<()> {
    for (name, x) in [("eps_rank", t.eps_rank), ("eps_eq", t.eps_eq), ("eps_recon", t.eps_recon)] {
        if !(x > 0.0 && x < 1.0) {
            return Err(schema(&format!("{path}.{name}"), format!("must lie in (0, 1), got {x}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut rng = generate::rng(3);
        let m = generate::gaussian(&mut rng, 3, 2);
        let text = serde_json::to_string(&matrix_to_json(&m)).unwrap();
        let back = matrix_from_json(&parse_json(&text).unwrap(), 3, 2, "m").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn pretty_output_parses_back() {
        let v = json!({"a": [[1.5, 0.0], [2.0, -1.0]], "b": {"c": [1, 2, 3], "d": []}, "e": "x"});
        assert_eq!(parse_json(&to_pretty(&v)).unwrap(), v);
        let long = Value::Array((0..40).map(|k| json!([k as f64 * 0.1, 0.0])).collect());
        let text = to_pretty(&long);
        assert!(text.lines().all(|l| l.len() <= WIDTH) && text.lines().count() < 15, "{text}");
        assert_eq!(parse_json(&text).unwrap(), long);
    }

    #[test]
    fn real_entries_are_accepted() {
        let v = parse_json("[1, 0, [0, 2], 3]").unwrap();
        let m = matrix_from_json(&v, 2, 2, "m").unwrap();
        assert_eq!(m[(1, 0)], C64::new(0.0, 2.0));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let v = parse_json(r#"{"source":{"blocks":[2]},"target":{"blocks":[4]},"kind":"hom","mult":[[3]]}"#).unwrap();
        let err = channel_spec_from_json(&v, "channel").unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.starts_with("channel.mult")), "{err}");
        let v = parse_json(r#"{"source":{"blocks":[2]},"target":{"blocks":[4]},"kind":"nope"}"#).unwrap();
        assert!(matches!(channel_spec_from_json(&v, "c").unwrap_err(), Error::Schema(m) if m.starts_with("c.kind")));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_json("{\n  \"a\": [1, 2,,]\n}").unwrap_err();
        assert!(matches!(&err, Error::Parse(m) if m.contains("line 2")), "{err}");
    }

    #[test]
    fn kraus_and_choi_forms_agree() {
        let mut rng = generate::rng(5);
        let src = MultiMatrixAlgebra::new(vec![2, 1]).unwrap();
        let tgt = MultiMatrixAlgebra::new(vec![2]).unwrap();
        let ch = generate::random_channel(&mut rng, &src, &tgt, 2);
        let kraus = ch.kraus(&Tolerances::default()).unwrap();
        let spec = ChannelSpec::Kraus { source: src, target: tgt, kraus };
        let text = serde_json::to_string(&channel_spec_to_json(&spec)).unwrap();
        let back = channel_spec_from_json(&parse_json(&text).unwrap(), "c").unwrap();
        assert_eq!(back, spec);
        assert!(back.channel().unwrap().distance(&ch) < 1e-12);
    }
}

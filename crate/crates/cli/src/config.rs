//! Scenario files: JSON with complex numbers as `[re, im]` pairs and
//! matrices as row-major nested arrays. Every schema error carries the
//! JSON pointer of the offending value.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde_json::{Map, Value};
use twostate::linalg::{random_basis, sigma_x, sigma_y, sigma_z, Operator, StateVector};
use twostate::scenarios::{spin_window, CollapseConfig, RepeatedConfig, SpinConfig};
use twostate::spin::SpinOps;

const HERMITIAN_TOL: f64 = 1e-10;
pub const DEFAULT_COLLAPSE_TRIALS: usize = 100_000;
pub const DEFAULT_SPIN_TRIALS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{context}: {source}")]
    Physics {
        context: String,
        #[source]
        source: twostate::Error,
    },
    #[error("override {0:?} is not of the form key=value")]
    Override(String),
}

fn schema(pointer: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        pointer: if pointer.is_empty() {
            "/".into()
        } else {
            pointer.into()
        },
        message: message.into(),
    }
}

#[derive(Clone, Debug)]
pub enum Kind {
    Epr {
        n1: [f64; 3],
        n2: [f64; 3],
        s1: i8,
    },
    Collapse(CollapseConfig),
    Repeated(RepeatedConfig),
    Spin(SpinConfig),
    Custom {
        pre: StateVector,
        post: StateVector,
        op: Operator,
    },
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub seed: u64,
    /// Assertion tolerances overriding the scenario defaults.
    pub tolerances: BTreeMap<String, f64>,
    /// The resolved document, echoed into the report.
    pub raw: Value,
}

/// Applies `--seed`, `--trials` and `--set key=value` overrides. Keys are
/// dotted paths (`params.n`) or JSON pointers (`/params/n`); values parse
/// as JSON and fall back to plain strings.
pub fn apply_overrides(
    raw: &mut Value,
    seed: Option<u64>,
    trials: Option<usize>,
    sets: &[String],
) -> Result<(), ConfigError> {
    let root = raw
        .as_object_mut()
        .ok_or_else(|| schema("", "scenario file must hold a JSON object"))?;
    if let Some(s) = seed {
        root.insert("seed".into(), Value::from(s));
    }
    if let Some(t) = trials {
        root.insert("trials".into(), Value::from(t));
    }
    for set in sets {
        let (key, value) = set
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(set.clone()))?;
        let path: Vec<&str> = if let Some(pointer) = key.strip_prefix('/') {
            pointer.split('/').collect()
        } else {
            key.split('.').collect()
        };
        if path.iter().any(|p| p.is_empty()) {
            return Err(ConfigError::Override(set.clone()));
        }
        let value =
            serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let mut node = &mut *raw;
        for (i, part) in path.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                schema(
                    &format!("/{}", path[..i].join("/")),
                    "override path runs through a non-object",
                )
            })?;
            if i + 1 == path.len() {
                obj.insert((*part).to_string(), value.clone());
                break;
            }
            node = obj
                .entry(*part)
                .or_insert_with(|| Value::Object(Map::new()));
        }
    }
    Ok(())
}

struct Node<'a> {
    value: &'a Value,
    pointer: String,
}

impl<'a> Node<'a> {
    fn root(value: &'a Value) -> Self {
        Self {
            value,
            pointer: String::new(),
        }
    }

    fn child(&self, key: &str) -> Option<Node<'a>> {
        self.value.get(key).map(|v| Node {
            value: v,
            pointer: format!("{}/{}", self.pointer, key),
        })
    }

    fn field(&self, key: &str) -> Result<Node<'a>, ConfigError> {
        if !self.value.is_object() {
            return Err(schema(&self.pointer, "expected an object"));
        }
        self.child(key).ok_or_else(|| {
            schema(
                &format!("{}/{}", self.pointer, key),
                "missing required field",
            )
        })
    }

    fn items(&self) -> Result<Vec<Node<'a>>, ConfigError> {
        let arr = self
            .value
            .as_array()
            .ok_or_else(|| schema(&self.pointer, "expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, v)| Node {
                value: v,
                pointer: format!("{}/{}", self.pointer, i),
            })
            .collect())
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        self.value
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| schema(&self.pointer, "expected a finite number"))
    }

    fn u64(&self) -> Result<u64, ConfigError> {
        self.value
            .as_u64()
            .ok_or_else(|| schema(&self.pointer, "expected a non-negative integer"))
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        usize::try_from(self.u64()?).map_err(|_| schema(&self.pointer, "integer too large"))
    }

    fn str(&self) -> Result<&'a str, ConfigError> {
        self.value
            .as_str()
            .ok_or_else(|| schema(&self.pointer, "expected a string"))
    }

    fn complex(&self) -> Result<C64, ConfigError> {
        if let Some(x) = self.value.as_f64() {
            return Ok(C64::new(x, 0.0));
        }
        let parts = self.items()?;
        if parts.len() != 2 {
            return Err(schema(&self.pointer, "complex numbers are [re, im] pairs"));
        }
        Ok(C64::new(parts[0].f64()?, parts[1].f64()?))
    }

    fn state(&self) -> Result<StateVector, ConfigError> {
        let amps = self
            .items()?
            .iter()
            .map(|n| n.complex())
            .collect::<Result<Vec<_>, _>>()?;
        StateVector::new(amps).map_err(|e| schema(&self.pointer, e.to_string()))
    }

    fn direction(&self) -> Result<[f64; 3], ConfigError> {
        let items = self.items()?;
        if items.len() != 3 {
            return Err(schema(&self.pointer, "directions have three components"));
        }
        let n = [items[0].f64()?, items[1].f64()?, items[2].f64()?];
        let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (len - 1.0).abs() > 1e-9 {
            return Err(schema(
                &self.pointer,
                format!("direction must be a unit vector (length {len})"),
            ));
        }
        Ok(n)
    }

    /// Operator from a matrix, a builtin name (`sigma_x`, `sigma_y`,
    /// `sigma_z`, `I(d)`, `Lx(N)`, `Ly(N)`, `Lz(N)`) or `{"kron": [..]}`.
    fn operator(&self) -> Result<Operator, ConfigError> {
        match self.value {
            Value::String(name) => builtin(name)
                .ok_or_else(|| schema(&self.pointer, format!("unknown operator {name:?}"))),
            Value::Object(_) => {
                let factors = self.field("kron")?.items()?;
                let mut acc: Option<Operator> = None;
                for f in factors {
                    let op = f.operator()?;
                    acc = Some(match acc {
                        None => op,
                        Some(a) => a
                            .tensor(&op)
                            .map_err(|e| schema(&f.pointer, e.to_string()))?,
                    });
                }
                acc.ok_or_else(|| schema(&self.pointer, "kron needs at least one factor"))
            }
            Value::Array(_) => {
                let rows = self
                    .items()?
                    .iter()
                    .map(|r| {
                        r.items()?
                            .iter()
                            .map(|z| z.complex())
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if rows.is_empty() || rows.iter().any(|r| r.len() != rows.len()) {
                    return Err(schema(&self.pointer, "matrix must be square"));
                }
                Operator::from_rows(rows).map_err(|e| schema(&self.pointer, e.to_string()))
            }
            _ => Err(schema(
                &self.pointer,
                "expected a matrix, builtin name or kron object",
            )),
        }
    }

    fn observable(&self) -> Result<Operator, ConfigError> {
        let op = self.operator()?;
        op.require_hermitian(HERMITIAN_TOL)
            .map_err(|e| schema(&self.pointer, e.to_string()))?;
        Ok(op)
    }
}

fn builtin(name: &str) -> Option<Operator> {
    match name {
        "sigma_x" => return Some(sigma_x()),
        "sigma_y" => return Some(sigma_y()),
        "sigma_z" => return Some(sigma_z()),
        _ => {}
    }
    let (head, rest) = name.split_once('(')?;
    let arg: usize = rest.strip_suffix(')')?.trim().parse().ok()?;
    match head {
        "I" if arg >= 1 => Some(Operator::identity(arg)),
        "Lx" | "Ly" | "Lz" if arg >= 1 => {
            let s = SpinOps::new(arg);
            Some(match head {
                "Lx" => s.lx,
                "Ly" => s.ly,
                _ => s.lz,
            })
        }
        _ => None,
    }
}

fn same_dim(expected: usize, found: usize, pointer: &str) -> Result<(), ConfigError> {
    if expected != found {
        return Err(schema(
            pointer,
            format!("dimension {found} does not match {expected}"),
        ));
    }
    Ok(())
}

fn optional<'a>(params: &Node<'a>, key: &str) -> Option<Node<'a>> {
    params.child(key).filter(|n| !n.value.is_null())
}

/// Parses and validates a resolved scenario document. Physics
/// preconditions that can be checked without running are checked here.
pub fn parse(raw: Value) -> Result<ScenarioConfig, ConfigError> {
    let root = Node::root(&raw);
    if !raw.is_object() {
        return Err(schema("", "scenario file must hold a JSON object"));
    }
    let scenario = root.field("scenario")?;
    let seed = root.field("seed")?.u64()?;
    let trials = match optional(&root, "trials") {
        Some(t) => {
            let t = t.usize()?;
            if t == 0 {
                return Err(schema("/trials", "trials must be positive"));
            }
            Some(t)
        }
        None => None,
    };
    let mut tolerances = BTreeMap::new();
    if let Some(tol) = optional(&root, "tolerances") {
        let obj = tol
            .value
            .as_object()
            .ok_or_else(|| schema("/tolerances", "expected an object"))?;
        for key in obj.keys() {
            let v = tol.field(key)?.f64()?;
            if v < 0.0 {
                return Err(schema(
                    &format!("/tolerances/{key}"),
                    "tolerance must be non-negative",
                ));
            }
            tolerances.insert(key.clone(), v);
        }
    }
    let empty = Value::Object(Map::new());
    let params = root.child("params").unwrap_or(Node {
        value: &empty,
        pointer: "/params".into(),
    });
    if !params.value.is_object() {
        return Err(schema("/params", "expected an object"));
    }

    let kind = match scenario.str()? {
        "epr" => {
            let s1 = match optional(&params, "s1") {
                Some(n) => match n.value.as_i64() {
                    Some(1) => 1,
                    Some(-1) => -1,
                    _ => return Err(schema(&n.pointer, "outcome must be +1 or -1")),
                },
                None => 1,
            };
            Kind::Epr { n1: params.field("n1")?.direction()?, n2: params.field("n2")?.direction()?, s1 }
        }
        "collapse_detector" => {
            let trials = trials.unwrap_or(DEFAULT_COLLAPSE_TRIALS);
            let cfg = match optional(&params, "preset") {
                Some(p) => match p.str()? {
                    "qubit" => CollapseConfig::qubit(false, trials, seed),
                    "qubit_disturbed" => CollapseConfig::qubit(true, trials, seed),
                    "epr" => CollapseConfig::epr(trials, seed),
                    other => return Err(schema(&p.pointer, format!("unknown preset {other:?}"))),
                },
                None => {
                    let pre = params.field("pre")?.state()?;
                    let detector = params.field("detector")?.observable()?;
                    same_dim(pre.dim(), detector.dim(), "/params/detector")?;
                    let disturbance = match optional(&params, "disturbance") {
                        Some(d) => {
                            let op = d.observable()?;
                            same_dim(pre.dim(), op.dim(), &d.pointer)?;
                            Some(op)
                        }
                        None => None,
                    };
                    let g0 = optional(&params, "g0").map(|n| n.f64()).transpose()?.unwrap_or(1.0);
                    CollapseConfig { pre, detector, disturbance, g0, trials, seed }
                }
            };
            Kind::Collapse(cfg)
        }
        "repeated" => {
            let psi_init = params.field("psi_init")?.state()?;
            let d = psi_init.dim();
            let a = params.field("a")?.observable()?;
            same_dim(d, a.dim(), "/params/a")?;
            let b = params.field("b")?.observable()?;
            same_dim(d, b.dim(), "/params/b")?;
            let final_bases = match optional(&params, "final_bases") {
                Some(fb) => fb
                    .items()?
                    .iter()
                    .map(|basis| {
                        let states = basis.items()?.iter().map(|s| s.state()).collect::<Result<Vec<_>, _>>()?;
                        same_dim(d, states.len(), &basis.pointer)?;
                        for (k, s) in states.iter().enumerate() {
                            same_dim(d, s.dim(), &format!("{}/{k}", basis.pointer))?;
                        }
                        Ok(states)
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?,
                None => {
                    let count = optional(&params, "random_final_bases").map(|n| n.usize()).transpose()?.unwrap_or(5);
                    (0..count as u64).map(|k| random_basis(d, seed.wrapping_add(k))).collect()
                }
            };
            if final_bases.is_empty() {
                return Err(schema("/params/final_bases", "at least one final basis is required"));
            }
            let post = match optional(&params, "post") {
                Some(p) => {
                    let s = p.state()?;
                    same_dim(d, s.dim(), &p.pointer)?;
                    Some(s)
                }
                None => None,
            };
            Kind::Repeated(RepeatedConfig { psi_init, a, b, final_bases, post })
        }
        "spin_intermediate" => {
            let n = optional(&params, "n").map(|n| n.usize()).transpose()?.unwrap_or(40);
            let a_weight = params.field("a_weight")?.f64()?;
            let b_weight = params.field("b_weight")?.f64()?;
            let dq = optional(&params, "dq").map(|n| n.f64()).transpose()?.unwrap_or(0.5);
            if dq <= 0.0 {
                return Err(schema("/params/dq", "dq must be positive"));
            }
            if n < 10 {
                return Err(schema("/params/n", "spin N must be at least 10"));
            }
            let g0 = match (optional(&params, "g0"), optional(&params, "s2n2")) {
                (Some(g), None) => g.f64()?,
                (None, Some(s)) => s.f64()?.sqrt() / (n as f64 * dq),
                _ => return Err(schema("/params", "give exactly one of g0 and s2n2")),
            };
            if g0 <= 0.0 {
                return Err(schema("/params", "coupling must be positive"));
            }
            spin_window(n, g0, dq).map_err(|e| ConfigError::Physics { context: "coupling window".into(), source: e })?;
            Kind::Spin(SpinConfig {
                n,
                a_weight,
                b_weight,
                g0,
                dq,
                trials: trials.unwrap_or(DEFAULT_SPIN_TRIALS),
                seed,
            })
        }
        "custom" => {
            let pre = params.field("pre")?.state()?;
            let post = params.field("post")?.state()?;
            same_dim(pre.dim(), post.dim(), "/params/post")?;
            let op = params.field("operator")?.observable()?;
            same_dim(pre.dim(), op.dim(), "/params/operator")?;
            twostate::make_generic(&pre, &post).map_err(|e| ConfigError::Physics {
                context: "conditions /params/pre and /params/post".into(),
                source: e,
            })?;
            Kind::Custom { pre, post, op }
        }
        other => {
            return Err(schema(
                &scenario.pointer,
                format!("unknown scenario {other:?} (epr, collapse_detector, repeated, spin_intermediate, custom)"),
            ))
        }
    };
    Ok(ScenarioConfig {
        kind,
        seed,
        tolerances,
        raw,
    })
}

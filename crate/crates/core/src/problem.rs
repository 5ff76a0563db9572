//! Problem files, the analysis runner and its versioned reports.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::algebra::{HomSpec, MultiMatrixAlgebra};
use crate::bayesinv::{battery, existence, verify_bayes, BayesAnalysis};
use crate::channel::Channel;
use crate::disint::{bayes_disint_bridge, condexp_characterize, disintegrate, takesaki_battery, verify_disintegration};
use crate::error::{Error, Result};
use crate::generate;
use crate::io::{self, ChannelSpec};
use crate::linalg::CMatrix;
use crate::modular::ac_condition;
use crate::par::{self, Execution};
use crate::state::State;
use crate::tol::Tolerances;

pub const PROBLEM_SCHEMA: &str = "qbayes.problem/1";
pub const REPORT_SCHEMA: &str = "qbayes.report/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Analysis {
    BayesBattery,
    BayesExistence,
    Disintegrate,
    Condexp,
    Ac,
    Takesaki,
    Bridge,
}

impl Analysis {
    pub const ALL: [Analysis; 7] = [
        Analysis::BayesBattery,
        Analysis::BayesExistence,
        Analysis::Disintegrate,
        Analysis::Condexp,
        Analysis::Ac,
        Analysis::Takesaki,
        Analysis::Bridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::BayesBattery => "bayes-battery",
            Analysis::BayesExistence => "bayes-existence",
            Analysis::Disintegrate => "disintegrate",
            Analysis::Condexp => "condexp",
            Analysis::Ac => "ac",
            Analysis::Takesaki => "takesaki",
            Analysis::Bridge => "bridge",
        }
    }

    /// Analyses stated for *-homomorphisms only.
    pub fn requires_hom(self) -> bool {
        matches!(self, Analysis::Disintegrate | Analysis::Condexp | Analysis::Takesaki)
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Schema(format!("analyses: unknown analysis \"{s}\"")))
    }
}

/// Parses a comma-separated analysis list; duplicates are dropped and the canonical order kept.
pub fn parse_analyses(list: &str) -> Result<Vec<Analysis>> {
    let mut out: Vec<Analysis> =
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Tolerance fields given explicitly in a problem file or on the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ToleranceOverrides {
    pub eps_rank: Option<f64>,
    pub eps_eq: Option<f64>,
    pub eps_recon: Option<f64>,
}

impl ToleranceOverrides {
    pub fn is_empty(&self) -> bool {
        self.eps_rank.is_none() && self.eps_eq.is_none() && self.eps_recon.is_none()
    }

    pub fn apply(&self, base: Tolerances) -> Tolerances {
        Tolerances {
            eps_rank: self.eps_rank.unwrap_or(base.eps_rank),
            eps_eq: self.eps_eq.unwrap_or(base.eps_eq),
            eps_recon: self.eps_recon.unwrap_or(base.eps_recon),
        }
    }

    fn to_json(self) -> Value {
        let mut m = Map::new();
        for (k, v) in [("eps_rank", self.eps_rank), ("eps_eq", self.eps_eq), ("eps_recon", self.eps_recon)] {
            if let Some(v) = v {
                m.insert(k.into(), json!(v));
            }
        }
        Value::Object(m)
    }

    fn from_json(v: &Value, path: &str) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Schema(format!("{path}: expected an object")))?;
        let mut out = ToleranceOverrides::default();
        for (k, x) in obj {
            let fp = format!("{path}.{k}");
            let x = x.as_f64().ok_or_else(|| Error::Schema(format!("{fp}: expected a number")))?;
            match k.as_str() {
                "eps_rank" => out.eps_rank = Some(x),
                "eps_eq" => out.eps_eq = Some(x),
                "eps_recon" => out.eps_recon = Some(x),
                _ => return Err(Error::Schema(format!("{fp}: unknown tolerance"))),
            }
        }
        io::validate_tolerances(&out.apply(Tolerances::default()), path)?;
        Ok(out)
    }
}

/// A channel `F: B → A`, a state `ω` on `A`, and what to ask about them.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub channel: ChannelSpec,
    pub state: State,
    pub tolerances: ToleranceOverrides,
    /// `None` runs every analysis applicable to the channel.
    pub analyses: Option<Vec<Analysis>>,
    /// Free-form annotations, kept verbatim.
    pub metadata: Option<Value>,
}

impl Problem {
    pub fn new(channel: ChannelSpec, state: State) -> Result<Self> {
        if state.algebra() != channel.target() {
            return Err(Error::Schema("state: algebra does not match the channel target".into()));
        }
        Ok(Problem { channel, state, tolerances: ToleranceOverrides::default(), analyses: None, metadata: None })
    }

    /// Tolerances from `base` (defaults plus environment) overridden by the file.
    pub fn tolerances(&self, base: Tolerances) -> Tolerances {
        self.tolerances.apply(base)
    }

    pub fn from_json(v: &Value, base: Tolerances) -> Result<Self> {
        if let Some(s) = v.get("schema") {
            if s.as_str() != Some(PROBLEM_SCHEMA) {
                return Err(Error::Schema(format!("schema: expected \"{PROBLEM_SCHEMA}\", got {s}")));
            }
        }
        let channel = io::channel_spec_from_json(io::field(v, "channel", "problem")?, "channel")?;
        let tolerances = match v.get("tolerances") {
            Some(t) => ToleranceOverrides::from_json(t, "tolerances")?,
            None => ToleranceOverrides::default(),
        };
        let tol = tolerances.apply(base);
        let state = io::state_from_json(io::field(v, "state", "problem")?, channel.target(), &tol, "state")?;
        let analyses = match v.get("analyses") {
            None | Some(Value::Null) => None,
            Some(Value::Array(items)) => {
                let names = items
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        a.as_str().ok_or_else(|| Error::Schema(format!("analyses[{k}]: expected a string")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(parse_analyses(&names.join(","))?)
            }
            Some(_) => return Err(Error::Schema("analyses: expected an array".into())),
        };
        let mut p = Problem::new(channel, state)?;
        p.tolerances = tolerances;
        p.analyses = analyses;
        p.metadata = v.get("metadata").cloned();
        Ok(p)
    }

    pub fn parse(text: &str, base: Tolerances) -> Result<Self> {
        Problem::from_json(&io::parse_json(text)?, base)
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("schema".into(), json!(PROBLEM_SCHEMA));
        m.insert("channel".into(), io::channel_spec_to_json(&self.channel));
        m.insert("state".into(), io::state_to_json(&self.state));
        if !self.tolerances.is_empty() {
            m.insert("tolerances".into(), self.tolerances.to_json());
        }
        if let Some(a) = &self.analyses {
            m.insert("analyses".into(), json!(a.iter().map(|a| a.name()).collect::<Vec<_>>()));
        }
        if let Some(meta) = &self.metadata {
            m.insert("metadata".into(), meta.clone());
        }
        Value::Object(m)
    }

    pub fn to_string_pretty(&self) -> String {
        io::to_pretty(&self.to_json())
    }

    /// Applicable analyses when none are requested; a hom-only request on a general channel
    /// is an input error.
    pub fn resolve_analyses(&self, requested: Option<&[Analysis]>) -> Result<Vec<Analysis>> {
        let hom = self.channel.hom().is_some();
        match requested.or(self.analyses.as_deref()) {
            None => Ok(Analysis::ALL.into_iter().filter(|a| hom || !a.requires_hom()).collect()),
            Some(list) => {
                if let Some(a) = list.iter().find(|a| a.requires_hom() && !hom) {
                    return Err(Error::Schema(format!(
                        "analyses: \"{a}\" needs a channel of kind \"hom\", got \"{}\"",
                        self.channel.kind()
                    )));
                }
                Ok(list.to_vec())
            }
        }
    }
}

/// Channels constructed while running a problem.
#[derive(Debug, Clone, Default)]
pub struct Constructed {
    pub inverse: Option<Channel>,
    pub disintegration: Option<Channel>,
    pub expectation: Option<Channel>,
}

/// A versioned report; everything but `timing` is a deterministic function of the input.
#[derive(Debug, Clone)]
pub struct Report {
    pub body: Value,
    pub timing: Value,
    pub constructed: Constructed,
}

impl Report {
    pub fn to_json(&self) -> Value {
        let mut v = self.body.clone();
        v.as_object_mut().expect("report body is an object").insert("timing".into(), self.timing.clone());
        v
    }

    pub fn render(&self, pretty: bool) -> String {
        let v = self.to_json();
        if pretty {
            io::to_pretty(&v)
        } else {
            v.to_string()
        }
    }

    /// The analysis entry named `name`, if it ran.
    pub fn analysis(&self, a: Analysis) -> Option<&Value> {
        self.body["analyses"].as_array()?.iter().find(|e| e["analysis"] == a.name())
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report fields serialise")
}

fn matrix_opt(m: &Option<CMatrix>) -> Value {
    m.as_ref().map_or(Value::Null, io::matrix_to_json)
}

fn battery_json(b: &BayesAnalysis) -> Value {
    json!({ "passes": b.passes, "marginal": b.marginal, "items": to_value(&b.items), "ac": to_value(&b.ac) })
}

/// Runs `analyses` on `problem` with fully resolved tolerances.
pub fn run(problem: &Problem, analyses: &[Analysis], tol: &Tolerances) -> Result<Report> {
    io::validate_tolerances(tol, "tolerances")?;
    let start = Instant::now();
    let f = problem.channel.channel()?;
    let hom = problem.channel.hom();
    let omega = &problem.state;
    let mut cached: Option<BayesAnalysis> = None;
    let mut constructed = Constructed::default();
    let mut entries = Vec::with_capacity(analyses.len());
    let mut timing = Map::new();
    for &a in analyses {
        let t0 = Instant::now();
        let need_hom = || hom.ok_or_else(|| Error::Schema(format!("analyses: \"{a}\" needs a homomorphism")));
        let mut entry = match a {
            Analysis::BayesBattery | Analysis::BayesExistence => {
                if cached.is_none() {
                    cached = Some(battery(&f, omega, tol)?);
                }
                let b = cached.as_ref().expect("just computed");
                if a == Analysis::BayesBattery {
                    battery_json(b)
                } else {
                    let ex = existence(b, None, tol)?;
                    constructed.inverse = ex.inverse.clone();
                    json!({
                        "exists": ex.exists,
                        "battery_passes": b.passes,
                        "margin": to_value(&ex.margin),
                        "verification": to_value(&ex.verification),
                    })
                }
            }
            Analysis::Disintegrate => {
                let r = disintegrate(need_hom()?, omega, tol)?;
                let cert = &r.factorization.certificate;
                constructed.disintegration = r.disintegration.clone();
                constructed.expectation = r.expectation.clone();
                json!({
                    "exists": r.exists,
                    "marginal": r.marginal,
                    "factorization": {
                        "holds": r.factorization.holds,
                        "residual": r.factorization.residual,
                        "off_diagonal_residual": cert.off_diagonal_residual,
                        "trace_residual": cert.trace_residual,
                        "lambda_residual": cert.lambda_residual,
                        "p": cert.p,
                        "q": cert.q,
                        "pairs": cert.pairs.iter().map(|fp| json!({
                            "target_block": fp.target_block,
                            "source_block": fp.source_block,
                            "mult": fp.mult,
                            "lambda": fp.lambda,
                            "mu": fp.mu,
                            "residual": fp.residual,
                            "tau": io::matrix_to_json(&fp.tau),
                        })).collect::<Vec<_>>(),
                        "sigma": cert.sigma.iter().map(matrix_opt).collect::<Vec<_>>(),
                    },
                    "condexp_holds": r.condexp.holds,
                    "verification": to_value(&r.verification),
                    "expectation_checks": to_value(&r.expectation_checks),
                    "takesaki": to_value(&r.takesaki),
                })
            }
            Analysis::Condexp => {
                let r = condexp_characterize(need_hom()?, omega, tol)?;
                json!({
                    "holds": r.holds,
                    "residual": r.residual,
                    "off_diagonal_residual": r.off_diagonal_residual,
                    "product_residual": r.product_residual,
                    "mu": r.mu,
                    "lambda": r.lambda,
                    "mu_residual": r.mu_residual,
                    "lambda_residual": r.lambda_residual,
                    "checks": to_value(&r.checks),
                })
            }
            Analysis::Ac => to_value(&ac_condition(&f, omega, tol)?),
            Analysis::Takesaki => to_value(&takesaki_battery(need_hom()?, omega, tol)?),
            Analysis::Bridge => to_value(&bayes_disint_bridge(&f, hom, omega, tol)?),
        };
        entry.as_object_mut().expect("analysis entries are objects").insert("analysis".into(), json!(a.name()));
        entries.push(entry);
        timing.insert(a.name().into(), json!(t0.elapsed().as_micros() as u64));
    }
    let mut built = Map::new();
    for (k, c) in [
        ("inverse", &constructed.inverse),
        ("disintegration", &constructed.disintegration),
        ("expectation", &constructed.expectation),
    ] {
        if let Some(c) = c {
            built.insert(k.into(), io::channel_to_json(c));
        }
    }
    let body = json!({
        "schema": REPORT_SCHEMA,
        "tool_version": TOOL_VERSION,
        "tolerances": io::tolerances_to_json(tol),
        "channel_kind": problem.channel.kind(),
        "analyses": entries,
        "constructed": built,
    });
    timing.insert("total".into(), json!(start.elapsed().as_micros() as u64));
    Ok(Report { body, timing: json!({ "unit": "us", "analyses": Value::Object(timing) }), constructed })
}

/// Verification of a user-supplied candidate as a Bayesian inverse and as a disintegration.
pub fn check_candidate(problem: &Problem, candidate: &Channel, tol: &Tolerances) -> Result<Value> {
    let f = problem.channel.channel()?;
    if candidate.source() != f.target() || candidate.target() != f.source() {
        return Err(Error::Schema("candidate: algebras must be those of the channel, reversed".into()));
    }
    Ok(json!({
        "bayes": to_value(&verify_bayes(&f, candidate, &problem.state, tol)?),
        "disintegration": to_value(&verify_disintegration(&f, candidate, &problem.state, tol)?),
    }))
}

/// Runs each problem with its own resolved tolerances; results stay in input order.
pub fn run_batch(problems: &[Problem], base: Tolerances, exec: Execution) -> Vec<Result<Report>> {
    par::map_slice(problems, exec, |p| {
        let tol = p.tolerances(base);
        p.resolve_analyses(None).and_then(|a| run(p, &a, &tol))
    })
}

/// Generator families for `qbayes random`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomKind {
    /// Homomorphism with a state that factors through it.
    Product,
    /// Homomorphism with a generic faithful state.
    Nonproduct,
    /// Homomorphism with a rank-deficient state.
    Rankdef,
    /// Random unital channel from Kraus sampling, faithful state.
    Kraus,
    /// Structured channel on a pure state.
    VectorState,
}

impl FromStr for RandomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "product" => RandomKind::Product,
            "nonproduct" => RandomKind::Nonproduct,
            "rankdef" => RandomKind::Rankdef,
            "kraus" => RandomKind::Kraus,
            "vector-state" => RandomKind::VectorState,
            _ => {
                return Err(Error::Schema(format!(
                    "kind: unknown \"{s}\" (expected product, nonproduct, rankdef, kraus or vector-state)"
                )))
            }
        })
    }
}

impl RandomKind {
    pub fn name(self) -> &'static str {
        match self {
            RandomKind::Product => "product",
            RandomKind::Nonproduct => "nonproduct",
            RandomKind::Rankdef => "rankdef",
            RandomKind::Kraus => "kraus",
            RandomKind::VectorState => "vector-state",
        }
    }
}

/// Parses `"2,1->3,4"` into source and target block sizes.
pub fn parse_dims(dims: &str) -> Result<(MultiMatrixAlgebra, MultiMatrixAlgebra)> {
    let (s, t) = dims.split_once("->").ok_or_else(|| Error::Schema(format!("dims: expected \"source->target\", got \"{dims}\"")))?;
    let side = |x: &str, name: &str| -> Result<MultiMatrixAlgebra> {
        let blocks = x
            .trim()
            .trim_matches(|c| c == '(' || c == ')')
            .split(',')
            .map(|b| b.trim().parse::<usize>().map_err(|_| Error::Schema(format!("dims: bad {name} block \"{b}\""))))
            .collect::<Result<Vec<_>>>()?;
        MultiMatrixAlgebra::new(blocks).map_err(|e| Error::Schema(format!("dims: {e}")))
    };
    Ok((side(s, "source")?, side(t, "target")?))
}

/// All rows `c` with `Σ_j c_j n_j = m`.
fn unital_rows(n: &[usize], m: usize) -> Vec<Vec<usize>> {
    fn go(n: &[usize], rest: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match n.split_first() {
            None => {
                if rest == 0 {
                    out.push(prefix.clone());
                }
            }
            Some((&first, tail)) => {
                for c in 0..=rest / first {
                    prefix.push(c);
                    go(tail, rest - c * first, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(n, m, &mut Vec::new(), &mut out);
    out
}

/// Picks multiplicities for a unital embedding, preferring ones that use every source block.
fn random_embedding(rng: &mut generate::Rng64, src: &MultiMatrixAlgebra, tgt: &MultiMatrixAlgebra) -> Result<HomSpec> {
    let options: Vec<Vec<Vec<usize>>> = tgt.blocks().iter().map(|&m| unital_rows(src.blocks(), m)).collect();
    if let Some(i) = options.iter().position(Vec::is_empty) {
        return Err(Error::Schema(format!(
            "dims: target block {} of size {} is not a sum of source block sizes",
            i,
            tgt.block_size(i)
        )));
    }
    let mut best = None;
    for _ in 0..64 {
        let mult: Vec<Vec<usize>> = options.iter().map(|o| o.choose(rng).expect("nonempty").clone()).collect();
        let covered = (0..src.num_blocks()).all(|j| mult.iter().any(|row| row[j] > 0));
        if covered {
            best = Some(mult);
            break;
        }
        best.get_or_insert(mult);
    }
    HomSpec::new(src.clone(), tgt.clone(), best.expect("at least one draw")).map_err(|e| Error::Schema(format!("dims: {e}")))
}

/// Seeded random problem; the same arguments always give the same problem.
pub fn random_problem(kind: RandomKind, dims: &str, seed: u64) -> Result<Problem> {
    let (src, tgt) = parse_dims(dims)?;
    let mut rng = generate::rng(seed);
    let (channel, state) = match kind {
        RandomKind::Product | RandomKind::Nonproduct | RandomKind::Rankdef => {
            let h = random_embedding(&mut rng, &src, &tgt)?;
            let state = match kind {
                RandomKind::Product => generate::product_state(&mut rng, &h, usize::MAX, usize::MAX),
                RandomKind::Nonproduct => generate::random_faithful_state(&mut rng, &tgt),
                _ => {
                    if tgt.blocks().iter().all(|&m| m == 1) && tgt.num_blocks() == 1 {
                        return Err(Error::Schema("dims: a rank-deficient state needs a target larger than M_1".into()));
                    }
                    let ranks: Vec<usize> = tgt.blocks().iter().map(|&m| (m / 2).max(1).min(m.saturating_sub(1))).collect();
                    generate::random_state(&mut rng, &tgt, &ranks)?
                }
            };
            (ChannelSpec::Hom(h), state)
        }
        RandomKind::Kraus => {
            let f = generate::random_channel(&mut rng, &src, &tgt, 2);
            (ChannelSpec::Choi(f), generate::random_faithful_state(&mut rng, &tgt))
        }
        RandomKind::VectorState => {
            if !src.is_single_block() || !tgt.is_single_block() || src.block_size(0) < 2 || tgt.block_size(0) < 2 {
                return Err(Error::Schema("dims: vector-state needs single blocks of size at least 2".into()));
            }
            let n = src.block_size(0);
            let (f, omega) = generate::vector_state_channel(&mut rng, n, tgt.block_size(0), (n / 2).max(1));
            (ChannelSpec::Choi(f), omega)
        }
    };
    let mut p = Problem::new(channel, state)?;
    p.metadata = Some(json!({ "generator": { "kind": kind.name(), "dims": dims, "seed": seed } }));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disint::factorize;

    fn round_trip(p: &Problem) -> Problem {
        Problem::parse(&p.to_string_pretty(), Tolerances::default()).unwrap()
    }

    #[test]
    fn random_problems_are_deterministic_and_round_trip() {
        for kind in ["product", "nonproduct", "rankdef", "kraus", "vector-state"] {
            let k: RandomKind = kind.parse().unwrap();
            let a = random_problem(k, "2->4", 42).unwrap();
            let b = random_problem(k, "2->4", 42).unwrap();
            assert_eq!(a.to_string_pretty(), b.to_string_pretty());
            assert_eq!(round_trip(&a), a, "{kind}");
        }
    }

    #[test]
    fn generator_contracts() {
        let tol = Tolerances::default();
        let p = random_problem(RandomKind::Product, "2,1->3,4", 7).unwrap();
        assert!(factorize(p.channel.hom().unwrap(), &p.state, &tol).unwrap().holds);
        let p = random_problem(RandomKind::Nonproduct, "2->4", 7).unwrap();
        assert!(p.state.is_faithful(&tol).unwrap());
        assert!(!factorize(p.channel.hom().unwrap(), &p.state, &tol).unwrap().holds);
        let p = random_problem(RandomKind::Rankdef, "2->4", 7).unwrap();
        assert!(!p.state.is_faithful(&tol).unwrap());
    }

    #[test]
    fn embeddings_solve_unitality() {
        assert_eq!(unital_rows(&[2, 1], 3), vec![vec![0, 3], vec![1, 1]]);
        assert!(random_problem(RandomKind::Product, "2->3", 1).is_err());
    }

    #[test]
    fn hom_only_analyses_are_rejected_for_general_channels() {
        let p = random_problem(RandomKind::Kraus, "2->2", 3).unwrap();
        let err = p.resolve_analyses(Some(&[Analysis::Takesaki])).unwrap_err();
        assert!(err.is_input_error());
        assert!(!p.resolve_analyses(None).unwrap().contains(&Analysis::Condexp));
    }

    #[test]
    fn reports_are_deterministic_modulo_timing() {
        let p = random_problem(RandomKind::Product, "2->4", 42).unwrap();
        let tol = Tolerances::default();
        let all = p.resolve_analyses(None).unwrap();
        let a = run(&p, &all, &tol).unwrap();
        let b = run(&round_trip(&p), &all, &tol).unwrap();
        assert_eq!(serde_json::to_string(&a.body).unwrap(), serde_json::to_string(&b.body).unwrap());
        assert!(a.constructed.disintegration.is_some());
    }

    #[test]
    fn batch_strategies_agree() {
        let ps: Vec<Problem> = (0..6).map(|s| random_problem(RandomKind::Kraus, "2->3", s).unwrap()).collect();
        let body = |exec| {
            run_batch(&ps, Tolerances::default(), exec)
                .into_iter()
                .map(|r| serde_json::to_string(&r.unwrap().body).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(body(Execution::Sequential), body(Execution::Parallel));
    }
}

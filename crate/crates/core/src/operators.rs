//! Lifted operators (probabilistic and deterministic), canonical renaming,
//! and the native line-oriented operator file format.
//!
//! File layout, one block per operator:
//!
//! ```text
//! # loft operators v1
//! operator Pick0
//! controller Pick
//! params ?x0:block
//! pre HandEmpty()
//! effects Holding(?x0) not-HandEmpty()
//! end
//! ```
//!
//! Probabilistic files use the `# loft probabilistic-operators v1` header and
//! one `outcome <p> <effects...>` line per outcome instead of `effects`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::domains::{ControllerSpec, DomainSpec};
use crate::symbolic::{split_atom_text, EffectSet, LiftedAtom, Substitution, Variable};

pub const DETERMINISTIC_HEADER: &str = "# loft operators v1";
pub const PROBABILISTIC_HEADER: &str = "# loft probabilistic-operators v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("operator {op}: variable {var} is not a parameter")]
    UnlistedVariable { op: String, var: String },
    #[error("operator {op}: duplicate parameter {var}")]
    DuplicateParameter { op: String, var: String },
    #[error("operator {op}: leading parameters do not match controller {controller}")]
    ControllerMismatch { op: String, controller: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("unknown controller {0}")]
    UnknownController(String),
}

/// One possible effect set of a probabilistic operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub effects: EffectSet<Variable>,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilisticOperator {
    pub name: String,
    pub controller: ControllerSpec,
    pub params: Vec<Variable>,
    pub preconditions: BTreeSet<LiftedAtom>,
    pub outcomes: Vec<Outcome>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeterministicOperator {
    pub name: String,
    pub controller: ControllerSpec,
    pub params: Vec<Variable>,
    pub preconditions: BTreeSet<LiftedAtom>,
    pub effects: EffectSet<Variable>,
}

fn check_params<'a>(
    name: &str,
    controller: &ControllerSpec,
    params: &[Variable],
    atoms: impl Iterator<Item = &'a LiftedAtom>,
) -> Result<(), OperatorError> {
    let mut seen = BTreeSet::new();
    for p in params {
        if !seen.insert(p.name()) {
            return Err(OperatorError::DuplicateParameter {
                op: name.to_string(),
                var: p.name().to_string(),
            });
        }
    }
    let leading_ok = params.len() >= controller.discrete_params.len()
        && controller
            .discrete_params
            .iter()
            .zip(params)
            .all(|(t, p)| &**t == p.ty());
    if !leading_ok {
        return Err(OperatorError::ControllerMismatch {
            op: name.to_string(),
            controller: controller.name.to_string(),
        });
    }
    let listed: BTreeSet<&Variable> = params.iter().collect();
    for atom in atoms {
        for v in atom.args() {
            if !listed.contains(v) {
                return Err(OperatorError::UnlistedVariable {
                    op: name.to_string(),
                    var: v.to_string(),
                });
            }
        }
    }
    Ok(())
}

impl DeterministicOperator {
    pub fn new(
        name: impl Into<String>,
        controller: ControllerSpec,
        params: Vec<Variable>,
        preconditions: BTreeSet<LiftedAtom>,
        effects: EffectSet<Variable>,
    ) -> Result<Self, OperatorError> {
        let name = name.into();
        check_params(
            &name,
            &controller,
            &params,
            preconditions
                .iter()
                .chain(effects.add())
                .chain(effects.delete()),
        )?;
        Ok(Self {
            name,
            controller,
            params,
            preconditions,
            effects,
        })
    }

    /// Rendering that is identical for operators equal up to renaming of
    /// parameters (discrete controller parameters stay positional).
    pub fn canonical_form(&self) -> String {
        canonical_form(
            &self.controller,
            &self.params,
            &self.preconditions,
            &[&self.effects],
        )
    }
}

impl ProbabilisticOperator {
    pub fn new(
        name: impl Into<String>,
        controller: ControllerSpec,
        params: Vec<Variable>,
        preconditions: BTreeSet<LiftedAtom>,
        outcomes: Vec<Outcome>,
    ) -> Result<Self, OperatorError> {
        let name = name.into();
        check_params(
            &name,
            &controller,
            &params,
            preconditions.iter().chain(
                outcomes
                    .iter()
                    .flat_map(|o| o.effects.add().iter().chain(o.effects.delete())),
            ),
        )?;
        Ok(Self {
            name,
            controller,
            params,
            preconditions,
            outcomes,
        })
    }

    pub fn canonical_form(&self) -> String {
        let effects: Vec<&EffectSet<Variable>> = self.outcomes.iter().map(|o| &o.effects).collect();
        canonical_form(
            &self.controller,
            &self.params,
            &self.preconditions,
            &effects,
        )
    }
}

fn render(
    controller: &ControllerSpec,
    params: &[Variable],
    rename: &BTreeMap<Variable, Variable>,
    pre: &BTreeSet<LiftedAtom>,
    effects: &[&EffectSet<Variable>],
) -> String {
    let sub: Substitution<Variable, Variable> =
        rename.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let mut out = String::new();
    let mut new_params: Vec<&Variable> = params.iter().map(|p| &rename[p]).collect();
    let leading = controller.discrete_params.len();
    new_params[leading..].sort();
    let _ = write!(out, "{}(", controller.name);
    for (i, p) in new_params.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}:{}", p, p.ty());
    }
    out.push_str(")|pre:");
    let pre: BTreeSet<LiftedAtom> = pre
        .iter()
        .map(|a| sub.apply_atom(a).expect("renaming covers all parameters"))
        .collect();
    for a in &pre {
        let _ = write!(out, "{a} ");
    }
    let mut effs: Vec<String> = effects
        .iter()
        .map(|e| {
            sub.apply_effects(e)
                .expect("renaming covers all parameters")
                .to_string()
        })
        .collect();
    effs.sort();
    for e in effs {
        let _ = write!(out, "|eff:{e}");
    }
    out
}

/// Lexicographically smallest rendering over all type-preserving
/// permutations of the non-leading parameters.
fn canonical_form(
    controller: &ControllerSpec,
    params: &[Variable],
    pre: &BTreeSet<LiftedAtom>,
    effects: &[&EffectSet<Variable>],
) -> String {
    let leading = controller.discrete_params.len().min(params.len());
    let free: Vec<&Variable> = params[leading..].iter().collect();
    let mut rename: BTreeMap<Variable, Variable> = params[..leading]
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), Variable::indexed(i, p.ty())))
        .collect();
    let mut best: Option<String> = None;
    let mut used = vec![false; free.len()];
    permute(&free, &mut used, 0, &mut rename, &mut |rename| {
        let r = render(controller, params, rename, pre, effects);
        if best.as_ref().is_none_or(|b| &r < b) {
            best = Some(r);
        }
    });
    best.unwrap_or_else(|| render(controller, params, &rename, pre, effects))
}

fn permute(
    free: &[&Variable],
    used: &mut Vec<bool>,
    depth: usize,
    rename: &mut BTreeMap<Variable, Variable>,
    visit: &mut dyn FnMut(&BTreeMap<Variable, Variable>),
) {
    let leading = rename.len() - depth;
    if depth == free.len() {
        visit(rename);
        return;
    }
    for slot in 0..free.len() {
        if used[slot] || free[slot].ty() != free[depth].ty() {
            continue;
        }
        used[slot] = true;
        rename.insert(
            free[depth].clone(),
            Variable::indexed(leading + slot, free[depth].ty()),
        );
        permute(free, used, depth + 1, rename, visit);
        rename.remove(free[depth]);
        used[slot] = false;
    }
}

/// True when both lists contain the same operators, with multiplicity, up
/// to parameter renaming (names are ignored).
pub fn equivalent_operator_sets(a: &[DeterministicOperator], b: &[DeterministicOperator]) -> bool {
    let mut ka: Vec<String> = a.iter().map(|o| o.canonical_form()).collect();
    let mut kb: Vec<String> = b.iter().map(|o| o.canonical_form()).collect();
    ka.sort();
    kb.sort();
    ka == kb
}

fn write_head(
    out: &mut String,
    name: &str,
    controller: &ControllerSpec,
    params: &[Variable],
    pre: &BTreeSet<LiftedAtom>,
) {
    let _ = writeln!(out, "operator {name}");
    let _ = writeln!(out, "controller {}", controller.name);
    out.push_str("params");
    for p in params {
        let _ = write!(out, " {}:{}", p, p.ty());
    }
    out.push('\n');
    out.push_str("pre");
    for a in pre {
        let _ = write!(out, " {a}");
    }
    out.push('\n');
}

fn write_effects(out: &mut String, effects: &EffectSet<Variable>) {
    if !effects.is_empty() {
        let _ = write!(out, " {effects}");
    }
    out.push('\n');
}

pub fn write_deterministic(ops: &[DeterministicOperator]) -> String {
    let mut out = String::new();
    out.push_str(DETERMINISTIC_HEADER);
    out.push('\n');
    for op in ops {
        write_head(
            &mut out,
            &op.name,
            &op.controller,
            &op.params,
            &op.preconditions,
        );
        out.push_str("effects");
        write_effects(&mut out, &op.effects);
        out.push_str("end\n");
    }
    out
}

pub fn write_probabilistic(ops: &[ProbabilisticOperator]) -> String {
    let mut out = String::new();
    out.push_str(PROBABILISTIC_HEADER);
    out.push('\n');
    for op in ops {
        write_head(
            &mut out,
            &op.name,
            &op.controller,
            &op.params,
            &op.preconditions,
        );
        for o in &op.outcomes {
            let _ = write!(out, "outcome {}", o.probability);
            write_effects(&mut out, &o.effects);
        }
        out.push_str("end\n");
    }
    out
}

struct RawOperator {
    name: String,
    controller: ControllerSpec,
    params: Vec<Variable>,
    pre: BTreeSet<LiftedAtom>,
    effects: Vec<(Option<f64>, EffectSet<Variable>)>,
}

fn syntax(line: usize, msg: impl Into<String>) -> OperatorError {
    OperatorError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_lifted(
    text: &str,
    line: usize,
    spec: &DomainSpec,
    vars: &BTreeMap<String, Variable>,
) -> Result<LiftedAtom, OperatorError> {
    let (name, args) = split_atom_text(text).map_err(|e| syntax(line, e.to_string()))?;
    let predicate = spec
        .predicate(name)
        .ok_or_else(|| OperatorError::UnknownPredicate(name.to_string()))?;
    let args = args
        .iter()
        .map(|a| {
            vars.get(*a)
                .cloned()
                .ok_or_else(|| syntax(line, format!("unknown variable {a}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    predicate
        .atom(args)
        .map_err(|e| syntax(line, e.to_string()))
}

fn parse_effects(
    tokens: &[&str],
    line: usize,
    spec: &DomainSpec,
    vars: &BTreeMap<String, Variable>,
) -> Result<EffectSet<Variable>, OperatorError> {
    let mut add = BTreeSet::new();
    let mut del = BTreeSet::new();
    for tok in tokens {
        if let Some(rest) = tok.strip_prefix("not-") {
            del.insert(parse_lifted(rest, line, spec, vars)?);
        } else {
            add.insert(parse_lifted(tok, line, spec, vars)?);
        }
    }
    EffectSet::new(add, del).map_err(|e| syntax(line, e.to_string()))
}

fn parse_blocks(
    text: &str,
    header: &str,
    spec: &DomainSpec,
) -> Result<Vec<RawOperator>, OperatorError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(syntax(1, format!("expected header {header:?}"))),
    }
    let mut ops = Vec::new();
    let mut current: Option<RawOperator> = None;
    let mut vars: BTreeMap<String, Variable> = BTreeMap::new();
    for (ln, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let (key, rest) = (tokens[0], &tokens[1..]);
        match key {
            "operator" => {
                if current.is_some() {
                    return Err(syntax(ln, "missing end"));
                }
                let name = rest.first().ok_or_else(|| syntax(ln, "missing name"))?;
                vars.clear();
                current = Some(RawOperator {
                    name: name.to_string(),
                    controller: ControllerSpec::new("", &[], 0),
                    params: Vec::new(),
                    pre: BTreeSet::new(),
                    effects: Vec::new(),
                });
            }
            "end" => {
                ops.push(
                    current
                        .take()
                        .ok_or_else(|| syntax(ln, "end without operator"))?,
                );
            }
            _ => {
                let op = current
                    .as_mut()
                    .ok_or_else(|| syntax(ln, "outside operator"))?;
                match key {
                    "controller" => {
                        let name = rest
                            .first()
                            .ok_or_else(|| syntax(ln, "missing controller"))?;
                        op.controller = spec
                            .controller(name)
                            .cloned()
                            .ok_or_else(|| OperatorError::UnknownController(name.to_string()))?;
                    }
                    "params" => {
                        for p in rest {
                            let (n, t) = p
                                .split_once(':')
                                .ok_or_else(|| syntax(ln, format!("bad parameter {p}")))?;
                            let v = Variable::new(n, t);
                            vars.insert(v.name().to_string(), v.clone());
                            op.params.push(v);
                        }
                    }
                    "pre" => {
                        for a in rest {
                            op.pre.insert(parse_lifted(a, ln, spec, &vars)?);
                        }
                    }
                    "effects" => {
                        op.effects
                            .push((None, parse_effects(rest, ln, spec, &vars)?));
                    }
                    "outcome" => {
                        let p: f64 = rest
                            .first()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| syntax(ln, "bad probability"))?;
                        op.effects
                            .push((Some(p), parse_effects(&rest[1..], ln, spec, &vars)?));
                    }
                    other => return Err(syntax(ln, format!("unknown key {other}"))),
                }
            }
        }
    }
    if current.is_some() {
        return Err(syntax(text.lines().count(), "missing end"));
    }
    Ok(ops)
}

pub fn read_deterministic(
    text: &str,
    spec: &DomainSpec,
) -> Result<Vec<DeterministicOperator>, OperatorError> {
    parse_blocks(text, DETERMINISTIC_HEADER, spec)?
        .into_iter()
        .map(|raw| {
            let [(None, effects)]: [(Option<f64>, EffectSet<Variable>); 1] = raw
                .effects
                .try_into()
                .map_err(|_| syntax(0, "expected one effects line"))?
            else {
                return Err(syntax(0, "deterministic operator with outcome line"));
            };
            DeterministicOperator::new(raw.name, raw.controller, raw.params, raw.pre, effects)
        })
        .collect()
}

pub fn read_probabilistic(
    text: &str,
    spec: &DomainSpec,
) -> Result<Vec<ProbabilisticOperator>, OperatorError> {
    parse_blocks(text, PROBABILISTIC_HEADER, spec)?
        .into_iter()
        .map(|raw| {
            let outcomes = raw
                .effects
                .into_iter()
                .map(|(p, effects)| {
                    p.map(|probability| Outcome {
                        effects,
                        probability,
                    })
                    .ok_or_else(|| syntax(0, "probabilistic operator with effects line"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ProbabilisticOperator::new(raw.name, raw.controller, raw.params, raw.pre, outcomes)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{Domain, DomainConfig, DomainId};

    #[test]
    fn oracle_operators_round_trip_byte_exact() {
        for id in DomainId::ALL {
            let domain = Domain::from_id(id, &DomainConfig::default());
            let ops = domain.oracle_operators().to_vec();
            let text = write_deterministic(&ops);
            let parsed = read_deterministic(&text, domain.spec()).unwrap();
            assert_eq!(parsed, ops);
            assert_eq!(write_deterministic(&parsed), text);
        }
    }

    #[test]
    fn canonical_form_ignores_renaming() {
        let domain = Domain::from_id(DomainId::Blocks, &DomainConfig::default());
        let stack = domain
            .oracle_operators()
            .iter()
            .find(|o| o.controller.name.as_ref() == "Stack")
            .unwrap()
            .clone();
        let rename: Substitution<Variable, Variable> = stack
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), Variable::new(&format!("?zz{}", 9 - i), p.ty())))
            .collect();
        let renamed = DeterministicOperator::new(
            "Other",
            stack.controller.clone(),
            stack
                .params
                .iter()
                .map(|p| rename.get(p).unwrap().clone())
                .collect(),
            crate::symbolic::apply_substitution(&stack.preconditions, &rename).unwrap(),
            rename.apply_effects(&stack.effects).unwrap(),
        )
        .unwrap();
        assert_eq!(renamed.canonical_form(), stack.canonical_form());
        assert!(equivalent_operator_sets(&[renamed], &[stack]));
    }

    #[test]
    fn rejects_unlisted_variable() {
        let domain = Domain::from_id(DomainId::Cover, &DomainConfig::default());
        let pick = domain.oracle_operators()[0].clone();
        let err = DeterministicOperator::new(
            "Bad",
            pick.controller.clone(),
            vec![],
            pick.preconditions.clone(),
            pick.effects.clone(),
        );
        assert!(err.is_err());
    }
}

//! PDDL (and PPDDL for probabilistic operators) writer and reader.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::controller_of;
use crate::domains::{ControllerSpec, DomainSpec};
use crate::operators::{DeterministicOperator, Outcome, ProbabilisticOperator};
use crate::symbolic::{
    Atom, EffectSet, GroundAtom, LiftedAtom, ObjectRef, Predicate, SymbolicState, Term, Variable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("unknown controller for action {0}")]
    UnknownController(String),
    #[error("PDDL syntax: {0}")]
    Syntax(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PddlOptions {
    /// Untyped parameters with unary type predicates instead of `:typing`.
    pub strict: bool,
}

fn check_predicates<'a, T: Term + 'a>(
    spec: &DomainSpec,
    atoms: impl Iterator<Item = &'a Atom<T>>,
) -> Result<(), PddlError> {
    for a in atoms {
        if spec.predicate(a.predicate().name()) != Some(a.predicate()) {
            return Err(PddlError::UnknownPredicate(
                a.predicate().name().to_string(),
            ));
        }
    }
    Ok(())
}

fn atom_text<T: Term>(a: &Atom<T>) -> String {
    let mut s = format!("({}", a.predicate().name());
    for t in a.args() {
        s.push(' ');
        s.push_str(t.name());
    }
    s.push(')');
    s
}

fn effects_text(e: &EffectSet<Variable>) -> String {
    let mut parts: Vec<String> = e.add().iter().map(atom_text).collect();
    parts.extend(e.delete().iter().map(|a| format!("(not {})", atom_text(a))));
    format!("(and {})", parts.join(" ")).replace("(and )", "(and)")
}

fn header(out: &mut String, spec: &DomainSpec, opts: PddlOptions, probabilistic: bool) {
    let _ = writeln!(out, "(define (domain {})", spec.name);
    let mut req = String::from(":strips");
    if !opts.strict {
        req.push_str(" :typing");
    }
    if probabilistic {
        req.push_str(" :probabilistic-effects");
    }
    let _ = writeln!(out, "  (:requirements {req})");
    if !opts.strict {
        let types: Vec<&str> = spec.types.iter().map(|t| &**t).collect();
        let _ = writeln!(out, "  (:types {})", types.join(" "));
    }
    out.push_str("  (:predicates\n");
    if opts.strict {
        for t in &spec.types {
            let _ = writeln!(out, "    ({t} ?o)");
        }
    }
    for p in &spec.predicates {
        let mut line = format!("    ({}", p.name());
        for (i, t) in p.arg_types().iter().enumerate() {
            if opts.strict {
                let _ = write!(line, " ?a{i}");
            } else {
                let _ = write!(line, " ?a{i} - {t}");
            }
        }
        line.push(')');
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("  )\n");
}

fn action_head(
    out: &mut String,
    name: &str,
    controller: &str,
    params: &[Variable],
    pre: &BTreeSet<LiftedAtom>,
    opts: PddlOptions,
) {
    let _ = writeln!(out, "  (:action {name}");
    let _ = writeln!(out, "    ; controller {controller}");
    let ps: Vec<String> = params
        .iter()
        .map(|p| {
            if opts.strict {
                p.name().to_string()
            } else {
                format!("{} - {}", p.name(), p.ty())
            }
        })
        .collect();
    let _ = writeln!(out, "    :parameters ({})", ps.join(" "));
    let mut conj: Vec<String> = Vec::new();
    if opts.strict {
        conj.extend(params.iter().map(|p| format!("({} {})", p.ty(), p.name())));
    }
    conj.extend(pre.iter().map(atom_text));
    let _ = writeln!(out, "    :precondition (and {})", conj.join(" "));
}

/// Domain file for deterministic operators.
pub fn export_domain(
    ops: &[DeterministicOperator],
    spec: &DomainSpec,
    opts: PddlOptions,
) -> Result<String, PddlError> {
    let mut out = String::new();
    header(&mut out, spec, opts, false);
    for op in ops {
        check_predicates(
            spec,
            op.preconditions
                .iter()
                .chain(op.effects.add())
                .chain(op.effects.delete()),
        )?;
        action_head(
            &mut out,
            &op.name,
            &op.controller.name,
            &op.params,
            &op.preconditions,
            opts,
        );
        let _ = writeln!(out, "    :effect {}", effects_text(&op.effects));
        out.push_str("  )\n");
    }
    out.push_str(")\n");
    Ok(out)
}

/// Domain file with `probabilistic` effects.
pub fn export_probabilistic_domain(
    ops: &[ProbabilisticOperator],
    spec: &DomainSpec,
    opts: PddlOptions,
) -> Result<String, PddlError> {
    let mut out = String::new();
    header(&mut out, spec, opts, true);
    for op in ops {
        check_predicates(
            spec,
            op.preconditions.iter().chain(
                op.outcomes
                    .iter()
                    .flat_map(|o| o.effects.add().iter().chain(o.effects.delete())),
            ),
        )?;
        action_head(
            &mut out,
            &op.name,
            &op.controller.name,
            &op.params,
            &op.preconditions,
            opts,
        );
        let branches: Vec<String> = op
            .outcomes
            .iter()
            .map(|o| format!("{} {}", o.probability, effects_text(&o.effects)))
            .collect();
        let _ = writeln!(out, "    :effect (probabilistic {})", branches.join(" "));
        out.push_str("  )\n");
    }
    out.push_str(")\n");
    Ok(out)
}

pub fn export_problem(
    spec: &DomainSpec,
    name: &str,
    objects: &BTreeSet<ObjectRef>,
    init: &SymbolicState,
    goal: &BTreeSet<GroundAtom>,
    opts: PddlOptions,
) -> Result<String, PddlError> {
    check_predicates(spec, init.iter().chain(goal.iter()))?;
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {name})");
    let _ = writeln!(out, "  (:domain {})", spec.name);
    let objs: Vec<String> = objects
        .iter()
        .map(|o| {
            if opts.strict {
                o.name().to_string()
            } else {
                format!("{} - {}", o.name(), o.ty())
            }
        })
        .collect();
    let _ = writeln!(out, "  (:objects {})", objs.join(" "));
    out.push_str("  (:init");
    if opts.strict {
        for o in objects {
            let _ = write!(out, " ({} {})", o.ty(), o.name());
        }
    }
    for a in init {
        let _ = write!(out, " {}", atom_text(a));
    }
    out.push_str(")\n");
    let g: Vec<String> = goal.iter().map(atom_text).collect();
    let _ = writeln!(out, "  (:goal (and {}))", g.join(" "));
    out.push_str(")\n");
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Sym(String),
    List(Vec<Sexp>),
}

impl Sexp {
    fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym(s) => Some(s),
            Sexp::List(_) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Sym(_) => None,
        }
    }
}

/// `; controller C` annotations written under each action header. Actions
/// without one fall back to [`controller_of`] on the action name.
fn controller_annotations(text: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("(:action") {
            current = rest.split_whitespace().next().map(str::to_string);
        } else if let Some(c) = line.strip_prefix("; controller") {
            if let Some(name) = current.take() {
                out.insert(name, c.trim().to_string());
            }
        }
    }
    out
}

fn resolve_controller(
    spec: &DomainSpec,
    notes: &BTreeMap<String, String>,
    action: &str,
) -> Result<ControllerSpec, PddlError> {
    let name = notes
        .get(action)
        .map(String::as_str)
        .unwrap_or_else(|| controller_of(action));
    spec.controller(name)
        .cloned()
        .ok_or_else(|| PddlError::UnknownController(action.to_string()))
}

fn syntax(msg: impl Into<String>) -> PddlError {
    PddlError::Syntax(msg.into())
}

fn read_sexp(text: &str) -> Result<Sexp, PddlError> {
    let mut tokens: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = line.split(';').next().unwrap_or("");
        let spaced = line.replace('(', " ( ").replace(')', " ) ");
        tokens.extend(spaced.split_whitespace().map(str::to_string));
    }
    let mut pos = 0;
    let e = parse_tokens(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(syntax("trailing tokens"));
    }
    Ok(e)
}

fn parse_tokens(tokens: &[String], pos: &mut usize) -> Result<Sexp, PddlError> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| syntax("unexpected end of input"))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_tokens(tokens, pos)?),
                    None => return Err(syntax("unbalanced parentheses")),
                }
            }
        }
        ")" => Err(syntax("unexpected )")),
        s => Ok(Sexp::Sym(s.to_string())),
    }
}

/// `(a b - t c)` style typed lists; untyped entries get `None`.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, Option<String>)>, PddlError> {
    let mut out: Vec<(String, Option<String>)> = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = items[i]
            .sym()
            .ok_or_else(|| syntax("nested list in typed list"))?;
        if s == "-" {
            let t = items
                .get(i + 1)
                .and_then(Sexp::sym)
                .ok_or_else(|| syntax("missing type after -"))?;
            out.extend(pending.drain(..).map(|n| (n, Some(t.to_string()))));
            i += 2;
        } else {
            pending.push(s.to_string());
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|n| (n, None)));
    Ok(out)
}

fn conjunction(e: &Sexp) -> Result<Vec<&[Sexp]>, PddlError> {
    let l = e.list().ok_or_else(|| syntax("expected a list"))?;
    if l.first().and_then(Sexp::sym) == Some("and") {
        l[1..]
            .iter()
            .map(|x| x.list().ok_or_else(|| syntax("expected an atom")))
            .collect()
    } else if l.is_empty() {
        Ok(Vec::new())
    } else {
        Ok(vec![l])
    }
}

fn atom_parts(l: &[Sexp]) -> Result<(&str, Vec<&str>), PddlError> {
    let name = l
        .first()
        .and_then(Sexp::sym)
        .ok_or_else(|| syntax("empty atom"))?;
    let args = l[1..]
        .iter()
        .map(|x| x.sym().ok_or_else(|| syntax("nested term")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name, args))
}

fn build_atom<T: Term>(spec: &DomainSpec, name: &str, args: Vec<T>) -> Result<Atom<T>, PddlError> {
    let p: &Predicate = spec
        .predicate(name)
        .ok_or_else(|| PddlError::UnknownPredicate(name.to_string()))?;
    p.atom(args).map_err(|e| syntax(e.to_string()))
}

fn is_type(spec: &DomainSpec, name: &str) -> bool {
    spec.types.iter().any(|t| &**t == name)
}

struct RawAction<'a> {
    name: String,
    params: Vec<Variable>,
    pre: BTreeSet<LiftedAtom>,
    effect: &'a Sexp,
}

fn parse_actions<'a>(root: &'a Sexp, spec: &DomainSpec) -> Result<Vec<RawAction<'a>>, PddlError> {
    let top = root.list().ok_or_else(|| syntax("domain must be a list"))?;
    if top.first().and_then(Sexp::sym) != Some("define") {
        return Err(syntax("expected define"));
    }
    let mut out = Vec::new();
    for item in &top[1..] {
        let Some(l) = item.list() else { continue };
        if l.first().and_then(Sexp::sym) != Some(":action") {
            continue;
        }
        let name = l
            .get(1)
            .and_then(Sexp::sym)
            .ok_or_else(|| syntax("action without name"))?;
        let mut fields: BTreeMap<&str, &Sexp> = BTreeMap::new();
        let mut i = 2;
        while i + 1 < l.len() {
            let key = l[i].sym().ok_or_else(|| syntax("expected a keyword"))?;
            fields.insert(key, &l[i + 1]);
            i += 2;
        }
        let param_list = fields
            .get(":parameters")
            .and_then(|s| s.list())
            .ok_or_else(|| syntax(format!("{name}: missing :parameters")))?;
        let typed = typed_list(param_list)?;
        let pre_atoms = match fields.get(":precondition") {
            Some(p) => conjunction(p)?,
            None => Vec::new(),
        };
        // type predicates stand in for parameter types in strict files
        let mut types: BTreeMap<String, String> = BTreeMap::new();
        for a in &pre_atoms {
            let (n, args) = atom_parts(a)?;
            if is_type(spec, n) && args.len() == 1 {
                types.insert(args[0].to_string(), n.to_string());
            }
        }
        let mut vars: BTreeMap<String, Variable> = BTreeMap::new();
        let mut params = Vec::new();
        for (n, t) in typed {
            let t = t
                .or_else(|| types.get(&n).cloned())
                .ok_or_else(|| syntax(format!("{name}: untyped parameter {n}")))?;
            let v = Variable::new(&n, &t);
            vars.insert(v.name().to_string(), v.clone());
            params.push(v);
        }
        let mut pre = BTreeSet::new();
        for a in &pre_atoms {
            let (n, args) = atom_parts(a)?;
            if is_type(spec, n) && args.len() == 1 {
                continue;
            }
            let args = args
                .iter()
                .map(|x| {
                    vars.get(*x)
                        .cloned()
                        .ok_or_else(|| syntax(format!("unknown variable {x}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            pre.insert(build_atom(spec, n, args)?);
        }
        let effect = fields
            .get(":effect")
            .copied()
            .ok_or_else(|| syntax(format!("{name}: missing :effect")))?;
        out.push(RawAction {
            name: name.to_string(),
            params,
            pre,
            effect,
        });
    }
    Ok(out)
}

fn parse_effects(
    e: &Sexp,
    spec: &DomainSpec,
    params: &[Variable],
) -> Result<EffectSet<Variable>, PddlError> {
    let vars: BTreeMap<&str, &Variable> = params.iter().map(|v| (v.name(), v)).collect();
    let lift = |args: Vec<&str>| -> Result<Vec<Variable>, PddlError> {
        args.iter()
            .map(|x| {
                vars.get(x)
                    .map(|v| (*v).clone())
                    .ok_or_else(|| syntax(format!("unknown variable {x}")))
            })
            .collect()
    };
    let mut add = BTreeSet::new();
    let mut del = BTreeSet::new();
    for l in conjunction(e)? {
        if l.first().and_then(Sexp::sym) == Some("not") {
            let inner = l
                .get(1)
                .and_then(Sexp::list)
                .ok_or_else(|| syntax("bad not"))?;
            let (n, args) = atom_parts(inner)?;
            del.insert(build_atom(spec, n, lift(args)?)?);
        } else {
            let (n, args) = atom_parts(l)?;
            add.insert(build_atom(spec, n, lift(args)?)?);
        }
    }
    EffectSet::new(add, del).map_err(|e| syntax(e.to_string()))
}

/// Reads a domain written by [`export_domain`] (typed or strict).
pub fn parse_domain(
    text: &str,
    spec: &DomainSpec,
) -> Result<Vec<DeterministicOperator>, PddlError> {
    let root = read_sexp(text)?;
    let notes = controller_annotations(text);
    parse_actions(&root, spec)?
        .into_iter()
        .map(|a| {
            let controller = resolve_controller(spec, &notes, &a.name)?;
            let effects = parse_effects(a.effect, spec, &a.params)?;
            DeterministicOperator::new(a.name, controller, a.params, a.pre, effects)
                .map_err(|e| syntax(e.to_string()))
        })
        .collect()
}

/// Reads a domain written by [`export_probabilistic_domain`].
pub fn parse_probabilistic_domain(
    text: &str,
    spec: &DomainSpec,
) -> Result<Vec<ProbabilisticOperator>, PddlError> {
    let root = read_sexp(text)?;
    let notes = controller_annotations(text);
    parse_actions(&root, spec)?
        .into_iter()
        .map(|a| {
            let controller = resolve_controller(spec, &notes, &a.name)?;
            let l = a.effect.list().ok_or_else(|| syntax("bad effect"))?;
            let outcomes = if l.first().and_then(Sexp::sym) == Some("probabilistic") {
                l[1..]
                    .chunks(2)
                    .map(|pair| {
                        let p: f64 = pair[0]
                            .sym()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| syntax("bad probability"))?;
                        let e = pair
                            .get(1)
                            .ok_or_else(|| syntax("probability without effect"))?;
                        Ok(Outcome {
                            effects: parse_effects(e, spec, &a.params)?,
                            probability: p,
                        })
                    })
                    .collect::<Result<Vec<_>, PddlError>>()?
            } else {
                vec![Outcome {
                    effects: parse_effects(a.effect, spec, &a.params)?,
                    probability: 1.0,
                }]
            };
            ProbabilisticOperator::new(a.name, controller, a.params, a.pre, outcomes)
                .map_err(|e| syntax(e.to_string()))
        })
        .collect()
}

/// Objects, initial atoms and goal of a problem file.
pub fn parse_problem(
    text: &str,
    spec: &DomainSpec,
) -> Result<(BTreeSet<ObjectRef>, SymbolicState, BTreeSet<GroundAtom>), PddlError> {
    let root = read_sexp(text)?;
    let top = root
        .list()
        .ok_or_else(|| syntax("problem must be a list"))?;
    let section = |key: &str| -> Option<&[Sexp]> {
        top.iter()
            .filter_map(Sexp::list)
            .find(|l| l.first().and_then(Sexp::sym) == Some(key))
    };
    let objs = typed_list(&section(":objects").ok_or_else(|| syntax("missing :objects"))?[1..])?;
    let init_items = &section(":init").ok_or_else(|| syntax("missing :init"))?[1..];
    let mut types: BTreeMap<String, String> = BTreeMap::new();
    for i in init_items {
        let (n, args) = atom_parts(i.list().ok_or_else(|| syntax("bad init atom"))?)?;
        if is_type(spec, n) && args.len() == 1 {
            types.insert(args[0].to_string(), n.to_string());
        }
    }
    let mut objects: BTreeMap<String, ObjectRef> = BTreeMap::new();
    for (n, t) in objs {
        let t = t
            .or_else(|| types.get(&n).cloned())
            .ok_or_else(|| syntax(format!("untyped object {n}")))?;
        objects.insert(n.clone(), ObjectRef::new(&n, &t));
    }
    let ground = |l: &[Sexp]| -> Result<GroundAtom, PddlError> {
        let (n, args) = atom_parts(l)?;
        let args = args
            .iter()
            .map(|x| {
                objects
                    .get(*x)
                    .cloned()
                    .ok_or_else(|| syntax(format!("unknown object {x}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        build_atom(spec, n, args)
    };
    let mut init = SymbolicState::new();
    for i in init_items {
        let l = i.list().ok_or_else(|| syntax("bad init atom"))?;
        let (n, args) = atom_parts(l)?;
        if is_type(spec, n) && args.len() == 1 {
            continue;
        }
        init.insert(ground(l)?);
    }
    let goal_sec = section(":goal").ok_or_else(|| syntax("missing :goal"))?;
    let goal_expr = goal_sec.get(1).ok_or_else(|| syntax("empty :goal"))?;
    let goal = conjunction(goal_expr)?
        .into_iter()
        .map(ground)
        .collect::<Result<BTreeSet<_>, _>>()?;
    Ok((objects.into_values().collect(), init, goal))
}

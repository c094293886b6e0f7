use std::collections::{BTreeSet, HashMap};

use super::error::{ParseError, ParseErrorKind, Pos, ProblemError};
use super::model::{
    is_valid_name, ActionSchema, Atom, Condition, Domain, GroundAtom, GroundLiteral, PredicateSig,
    ProblemSpec, Term, TypeTree, TypeTreeError, TypedName, ROOT_TYPE,
};
use super::sexp::{read_one, Sexp};

pub const SUPPORTED_REQUIREMENTS: [&str; 4] =
    [":strips", ":typing", ":negative-preconditions", ":equality"];

const UNSUPPORTED_CONDITIONS: [&str; 10] =
    ["or", "imply", "exists", "forall", "preference", ">", "<", ">=", "<=", "either"];
const UNSUPPORTED_EFFECTS: [&str; 7] =
    ["when", "forall", "increase", "decrease", "assign", "scale-up", "scale-down"];

type Result<T> = std::result::Result<T, ParseError>;

fn unsupported(pos: Pos, construct: &str) -> ParseError {
    ParseError::new(pos, ParseErrorKind::Unsupported(construct.to_string()))
}

fn list<'a>(sexp: &'a Sexp, what: &str) -> Result<&'a [Sexp]> {
    sexp.as_list().ok_or_else(|| ParseError::expected(sexp.pos(), what, sexp.describe()))
}

fn symbol<'a>(sexp: &'a Sexp, what: &str) -> Result<&'a str> {
    sexp.as_symbol().ok_or_else(|| ParseError::expected(sexp.pos(), what, sexp.describe()))
}

fn keyword(sexp: &Sexp, kw: &str) -> Result<()> {
    match sexp.as_symbol() {
        Some(s) if s == kw => Ok(()),
        _ => Err(ParseError::expected(sexp.pos(), format!("`{kw}`"), sexp.describe())),
    }
}

fn name(sexp: &Sexp) -> Result<String> {
    let s = symbol(sexp, "a name")?;
    if is_valid_name(s) {
        Ok(s.to_string())
    } else {
        Err(ParseError::new(sexp.pos(), ParseErrorKind::InvalidName(s.to_string())))
    }
}

fn end_of(sexp: &Sexp) -> Pos {
    match sexp {
        Sexp::List { end, .. } => *end,
        Sexp::Symbol { pos, .. } => *pos,
    }
}

/// `(define (<kind> NAME) section...)` → (name, sections)
fn define_header<'a>(top: &'a Sexp, kind: &str) -> Result<(String, &'a [Sexp])> {
    let items = list(top, "`(define ...)`")?;
    let Some(first) = items.first() else {
        return Err(ParseError::expected(end_of(top), "`define`", "`)`"));
    };
    keyword(first, "define")?;
    let Some(header) = items.get(1) else {
        return Err(ParseError::expected(end_of(top), format!("`({kind} <name>)`"), "`)`"));
    };
    let header_items = list(header, &format!("`({kind} <name>)`"))?;
    match header_items {
        [k, n] => {
            keyword(k, kind)?;
            Ok((name(n)?, &items[2..]))
        }
        _ => Err(ParseError::expected(header.pos(), format!("`({kind} <name>)`"), header.describe())),
    }
}

/// Splits a section list into its `:keyword` head and body.
fn section(sexp: &Sexp) -> Result<(&str, Pos, &[Sexp])> {
    let items = list(sexp, "a `(:section ...)` list")?;
    let head = items
        .first()
        .ok_or_else(|| ParseError::expected(sexp.pos(), "a section keyword", "`()`"))?;
    let kw = symbol(head, "a section keyword")?;
    Ok((kw, head.pos(), &items[1..]))
}

fn check_requirements(body: &[Sexp]) -> Result<Vec<String>> {
    let mut reqs = Vec::new();
    for item in body {
        let req = symbol(item, "a requirement keyword")?;
        if !SUPPORTED_REQUIREMENTS.contains(&req) {
            return Err(unsupported(item.pos(), req));
        }
        reqs.push(req.to_string());
    }
    Ok(reqs)
}

/// Parses `a b - t c - u d` into `[(a,t),(b,t),(c,u),(d,object)]`.
fn typed_list(items: &[Sexp], variables: bool) -> Result<Vec<(TypedName, Pos)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        if item.as_symbol() == Some("-") {
            let ty = items
                .get(i + 1)
                .ok_or_else(|| ParseError::expected(item.pos(), "a type name after `-`", "end of list"))?;
            if let Some(inner) = ty.as_list() {
                if inner.first().and_then(Sexp::as_symbol) == Some("either") {
                    return Err(unsupported(ty.pos(), "either"));
                }
            }
            let ty_name = name(ty)?;
            if pending.is_empty() {
                return Err(ParseError::expected(item.pos(), "a name before `-`", "`-`"));
            }
            for (n, pos) in pending.drain(..) {
                out.push((TypedName::new(n, ty_name.clone()), pos));
            }
            i += 2;
            continue;
        }
        let raw = symbol(item, if variables { "a variable" } else { "a name" })?;
        let bare = if variables {
            raw.strip_prefix('?').ok_or_else(|| {
                ParseError::expected(item.pos(), "a `?variable`", format!("`{raw}`"))
            })?
        } else {
            raw
        };
        if !is_valid_name(bare) {
            return Err(ParseError::new(item.pos(), ParseErrorKind::InvalidName(raw.to_string())));
        }
        pending.push((bare.to_string(), item.pos()));
        i += 1;
    }
    for (n, pos) in pending {
        out.push((TypedName::new(n, ROOT_TYPE), pos));
    }
    Ok(out)
}

fn tree_error(pos: Pos, err: TypeTreeError) -> ParseError {
    let kind = match err {
        TypeTreeError::Conflicting(t) => ParseErrorKind::ConflictingType(t),
        TypeTreeError::Cycle(t) => ParseErrorKind::TypeCycle(t),
        TypeTreeError::Undeclared(t) => ParseErrorKind::UndeclaredType(t),
        TypeTreeError::RootWithParent => ParseErrorKind::ConflictingType(ROOT_TYPE.into()),
    };
    ParseError::new(pos, kind)
}

fn require_type(types: &TypeTree, t: &TypedName, pos: Pos) -> Result<()> {
    if types.contains(&t.type_name) {
        Ok(())
    } else {
        Err(ParseError::new(pos, ParseErrorKind::UndeclaredType(t.type_name.clone())))
    }
}

/// Parses a domain file in the supported STRIPS subset.
pub fn parse_domain(src: &str) -> Result<Domain> {
    let top = read_one(src)?;
    let (domain_name, sections) = define_header(&top, "domain")?;

    let mut requirements = Vec::new();
    let mut type_decls: Option<(Pos, &[Sexp])> = None;
    let mut constant_decls: Option<(Pos, &[Sexp])> = None;
    let mut predicate_decls: Option<(Pos, &[Sexp])> = None;
    let mut action_decls: Vec<(Pos, &[Sexp])> = Vec::new();

    for sec in sections {
        let (kw, pos, body) = section(sec)?;
        let slot = match kw {
            ":requirements" => {
                requirements = check_requirements(body)?;
                continue;
            }
            ":types" => &mut type_decls,
            ":constants" => &mut constant_decls,
            ":predicates" => &mut predicate_decls,
            ":action" => {
                action_decls.push((pos, body));
                continue;
            }
            ":functions" | ":durative-action" | ":derived" | ":constraints" => {
                return Err(unsupported(pos, kw))
            }
            other => {
                return Err(ParseError::expected(
                    pos,
                    "a domain section keyword",
                    format!("`{other}`"),
                ))
            }
        };
        if slot.is_some() {
            return Err(ParseError::new(
                pos,
                ParseErrorKind::Duplicate { what: "section", name: kw.to_string() },
            ));
        }
        *slot = Some((pos, body));
    }

    let types = match type_decls {
        None => TypeTree::default(),
        Some((pos, body)) => {
            let decls = typed_list(body, false)?;
            TypeTree::from_declarations(
                decls.iter().map(|(t, _)| (t.name.as_str(), t.type_name.as_str())),
            )
            .map_err(|e| tree_error(pos, e))?
        }
    };

    let mut constants: Vec<TypedName> = Vec::new();
    if let Some((_, body)) = constant_decls {
        for (c, pos) in typed_list(body, false)? {
            require_type(&types, &c, pos)?;
            if constants.iter().any(|k| k.name == c.name) {
                return Err(ParseError::new(
                    pos,
                    ParseErrorKind::Duplicate { what: "constant", name: c.name },
                ));
            }
            constants.push(c);
        }
    }

    let mut predicates: Vec<PredicateSig> = Vec::new();
    if let Some((_, body)) = predicate_decls {
        for decl in body {
            let items = list(decl, "a predicate declaration")?;
            let head = items
                .first()
                .ok_or_else(|| ParseError::expected(decl.pos(), "a predicate name", "`()`"))?;
            let pred_name = name(head)?;
            if predicates.iter().any(|p| p.name == pred_name) {
                return Err(ParseError::new(
                    head.pos(),
                    ParseErrorKind::Duplicate { what: "predicate", name: pred_name },
                ));
            }
            let params = typed_list(&items[1..], true)?;
            check_distinct_params(&params)?;
            for (p, pos) in &params {
                require_type(&types, p, *pos)?;
            }
            predicates.push(PredicateSig {
                name: pred_name,
                params: params.into_iter().map(|(p, _)| p).collect(),
            });
        }
    }

    let mut domain = Domain {
        name: domain_name,
        requirements,
        types,
        predicates,
        constants,
        actions: Vec::new(),
    };
    for (pos, body) in action_decls {
        let action = parse_action(&domain, pos, body)?;
        if domain.action(&action.name).is_some() {
            return Err(ParseError::new(
                pos,
                ParseErrorKind::Duplicate { what: "action", name: action.name },
            ));
        }
        domain.actions.push(action);
    }
    Ok(domain)
}

fn check_distinct_params(params: &[(TypedName, Pos)]) -> Result<()> {
    for (i, (p, pos)) in params.iter().enumerate() {
        if params[..i].iter().any(|(q, _)| q.name == p.name) {
            return Err(ParseError::new(
                *pos,
                ParseErrorKind::Duplicate { what: "parameter", name: format!("?{}", p.name) },
            ));
        }
    }
    Ok(())
}

struct ActionScope<'a> {
    domain: &'a Domain,
    params: HashMap<String, String>,
}

impl ActionScope<'_> {
    fn term(&self, sexp: &Sexp) -> Result<(Term, String)> {
        let raw = symbol(sexp, "a term")?;
        if let Some(var) = raw.strip_prefix('?') {
            return match self.params.get(var) {
                Some(ty) => Ok((Term::Var(var.to_string()), ty.clone())),
                None => Err(ParseError::new(sexp.pos(), ParseErrorKind::UnknownTerm(raw.to_string()))),
            };
        }
        match self.domain.constant(raw) {
            Some(c) => Ok((Term::Object(c.name.clone()), c.type_name.clone())),
            None => Err(ParseError::new(sexp.pos(), ParseErrorKind::UnknownTerm(raw.to_string()))),
        }
    }

    fn atom(&self, items: &[Sexp], pos: Pos) -> Result<Atom> {
        let head = items.first().ok_or_else(|| ParseError::expected(pos, "an atom", "`()`"))?;
        let pred = symbol(head, "a predicate name")?;
        let sig = self
            .domain
            .predicate(pred)
            .ok_or_else(|| ParseError::new(head.pos(), ParseErrorKind::UnknownPredicate(pred.into())))?;
        let args = &items[1..];
        if args.len() != sig.arity() {
            return Err(ParseError::new(
                head.pos(),
                ParseErrorKind::Arity { predicate: pred.into(), expected: sig.arity(), found: args.len() },
            ));
        }
        let mut terms = Vec::with_capacity(args.len());
        for (arg, slot) in args.iter().zip(&sig.params) {
            let (term, ty) = self.term(arg)?;
            if !self.domain.types.fits(&ty, &slot.type_name) {
                return Err(ParseError::new(
                    arg.pos(),
                    ParseErrorKind::ArgType {
                        predicate: pred.into(),
                        arg: term.to_string(),
                        expected: slot.type_name.clone(),
                        found: ty,
                    },
                ));
            }
            terms.push(term);
        }
        Ok(Atom { predicate: pred.to_string(), args: terms })
    }

    fn condition(&self, sexp: &Sexp, positive: bool, out: &mut Vec<Condition>) -> Result<()> {
        let items = list(sexp, "a condition")?;
        let Some(head) = items.first() else {
            return Ok(());
        };
        let head_sym = symbol(head, "a condition keyword or predicate")?;
        match head_sym {
            "and" if positive => {
                for child in &items[1..] {
                    self.condition(child, true, out)?;
                }
                Ok(())
            }
            "not" if positive => match &items[1..] {
                [inner] => {
                    let inner_items = list(inner, "a negated atom")?;
                    match inner_items.first().and_then(Sexp::as_symbol) {
                        Some("=") | None => self.condition(inner, false, out),
                        Some(k) if k == "and" || k == "not" || UNSUPPORTED_CONDITIONS.contains(&k) => {
                            Err(unsupported(inner.pos(), &format!("not {k}")))
                        }
                        Some(_) => self.condition(inner, false, out),
                    }
                }
                _ => Err(ParseError::expected(head.pos(), "exactly one argument to `not`", sexp.describe())),
            },
            "=" => match &items[1..] {
                [l, r] => {
                    let (left, _) = self.term(l)?;
                    let (right, _) = self.term(r)?;
                    out.push(Condition::Equality { left, right, positive });
                    Ok(())
                }
                _ => Err(ParseError::expected(head.pos(), "two arguments to `=`", sexp.describe())),
            },
            k if UNSUPPORTED_CONDITIONS.contains(&k) => Err(unsupported(head.pos(), k)),
            _ => {
                let atom = self.atom(items, sexp.pos())?;
                out.push(Condition::Literal { atom, positive });
                Ok(())
            }
        }
    }

    fn effect(&self, sexp: &Sexp, add: &mut Vec<Atom>, del: &mut Vec<Atom>) -> Result<()> {
        let items = list(sexp, "an effect")?;
        let Some(head) = items.first() else {
            return Ok(());
        };
        match symbol(head, "an effect keyword or predicate")? {
            "and" => {
                for child in &items[1..] {
                    self.effect(child, add, del)?;
                }
                Ok(())
            }
            "not" => match &items[1..] {
                [inner] => {
                    let inner_items = list(inner, "a negated atom")?;
                    if let Some(k) = inner_items.first().and_then(Sexp::as_symbol) {
                        if k == "and" || k == "not" || UNSUPPORTED_EFFECTS.contains(&k) {
                            return Err(unsupported(inner.pos(), &format!("not {k}")));
                        }
                    }
                    del.push(self.atom(inner_items, inner.pos())?);
                    Ok(())
                }
                _ => Err(ParseError::expected(head.pos(), "exactly one argument to `not`", sexp.describe())),
            },
            k if UNSUPPORTED_EFFECTS.contains(&k) => Err(unsupported(head.pos(), k)),
            _ => {
                add.push(self.atom(items, sexp.pos())?);
                Ok(())
            }
        }
    }
}

fn parse_action(domain: &Domain, pos: Pos, body: &[Sexp]) -> Result<ActionSchema> {
    let head = body.first().ok_or_else(|| ParseError::expected(pos, "an action name", "`)`"))?;
    let action_name = name(head)?;

    let mut params_sexp = None;
    let mut pre_sexp = None;
    let mut eff_sexp = None;
    let mut i = 1;
    while i < body.len() {
        let key = symbol(&body[i], "`:parameters`, `:precondition` or `:effect`")?;
        let value = body
            .get(i + 1)
            .ok_or_else(|| ParseError::expected(body[i].pos(), format!("a value for `{key}`"), "`)`"))?;
        let slot = match key {
            ":parameters" => &mut params_sexp,
            ":precondition" => &mut pre_sexp,
            ":effect" => &mut eff_sexp,
            other => {
                return Err(ParseError::expected(
                    body[i].pos(),
                    "`:parameters`, `:precondition` or `:effect`",
                    format!("`{other}`"),
                ))
            }
        };
        if slot.is_some() {
            return Err(ParseError::new(
                body[i].pos(),
                ParseErrorKind::Duplicate { what: "action field", name: key.to_string() },
            ));
        }
        *slot = Some(value);
        i += 2;
    }

    let params = match params_sexp {
        Some(p) => typed_list(list(p, "a parameter list")?, true)?,
        None => Vec::new(),
    };
    check_distinct_params(&params)?;
    for (p, ppos) in &params {
        require_type(&domain.types, p, *ppos)?;
    }
    let scope = ActionScope {
        domain,
        params: params.iter().map(|(p, _)| (p.name.clone(), p.type_name.clone())).collect(),
    };

    let mut precondition = Vec::new();
    if let Some(pre) = pre_sexp {
        scope.condition(pre, true, &mut precondition)?;
    }
    let mut add = Vec::new();
    let mut del = Vec::new();
    if let Some(eff) = eff_sexp {
        scope.effect(eff, &mut add, &mut del)?;
    }
    Ok(ActionSchema {
        name: action_name,
        params: params.into_iter().map(|(p, _)| p).collect(),
        precondition,
        add,
        del,
    })
}

fn ground_atom(sexp: &Sexp) -> Result<GroundAtom> {
    let items = list(sexp, "a ground atom")?;
    let head = items.first().ok_or_else(|| ParseError::expected(sexp.pos(), "a ground atom", "`()`"))?;
    let pred = name(head)?;
    let args = items[1..].iter().map(name).collect::<Result<Vec<_>>>()?;
    Ok(GroundAtom { predicate: pred, args })
}

fn goal_literals(sexp: &Sexp, out: &mut BTreeSet<GroundLiteral>) -> Result<()> {
    let items = list(sexp, "a goal condition")?;
    let Some(head) = items.first() else {
        return Ok(());
    };
    match symbol(head, "a goal keyword or predicate")? {
        "and" => {
            for child in &items[1..] {
                goal_literals(child, out)?;
            }
            Ok(())
        }
        "not" => match &items[1..] {
            [inner] => {
                let inner_items = list(inner, "a negated atom")?;
                if let Some(k) = inner_items.first().and_then(Sexp::as_symbol) {
                    if k == "and" || k == "not" || k == "=" || UNSUPPORTED_CONDITIONS.contains(&k) {
                        return Err(unsupported(inner.pos(), &format!("not {k}")));
                    }
                }
                out.insert(GroundLiteral::neg(ground_atom(inner)?));
                Ok(())
            }
            _ => Err(ParseError::expected(head.pos(), "exactly one argument to `not`", sexp.describe())),
        },
        k if k == "=" || UNSUPPORTED_CONDITIONS.contains(&k) => Err(unsupported(head.pos(), k)),
        _ => {
            out.insert(GroundLiteral::pos(ground_atom(sexp)?));
            Ok(())
        }
    }
}

/// Parses a problem file and type-checks it against `domain`.
pub fn parse_problem(src: &str, domain: &Domain) -> std::result::Result<ProblemSpec, ProblemError> {
    let top = read_one(src)?;
    let (problem_name, sections) = define_header(&top, "problem")?;

    let mut domain_name = None;
    let mut objects: Option<Vec<TypedName>> = None;
    let mut init: Option<BTreeSet<GroundAtom>> = None;
    let mut goal: Option<BTreeSet<GroundLiteral>> = None;

    for sec in sections {
        let (kw, pos, body) = section(sec)?;
        let dup = || {
            ParseError::new(pos, ParseErrorKind::Duplicate { what: "section", name: kw.to_string() })
        };
        match kw {
            ":domain" => {
                if domain_name.is_some() {
                    return Err(dup().into());
                }
                match body {
                    [n] => domain_name = Some(name(n)?),
                    _ => return Err(ParseError::expected(pos, "`(:domain <name>)`", sec.describe()).into()),
                }
            }
            ":requirements" => {
                check_requirements(body)?;
            }
            ":objects" => {
                if objects.is_some() {
                    return Err(dup().into());
                }
                objects = Some(typed_list(body, false)?.into_iter().map(|(o, _)| o).collect());
            }
            ":init" => {
                if init.is_some() {
                    return Err(dup().into());
                }
                let mut atoms = BTreeSet::new();
                for fact in body {
                    let items = list(fact, "a ground atom")?;
                    if let Some(k) = items.first().and_then(Sexp::as_symbol) {
                        if k == "not" || k == "=" || k == "and" {
                            return Err(unsupported(fact.pos(), &format!("{k} in :init")).into());
                        }
                    }
                    atoms.insert(ground_atom(fact)?);
                }
                init = Some(atoms);
            }
            ":goal" => {
                if goal.is_some() {
                    return Err(dup().into());
                }
                let mut lits = BTreeSet::new();
                match body {
                    [g] => goal_literals(g, &mut lits)?,
                    _ => return Err(ParseError::expected(pos, "exactly one goal condition", sec.describe()).into()),
                }
                goal = Some(lits);
            }
            ":metric" | ":constraints" | ":length" => return Err(unsupported(pos, kw).into()),
            other => {
                return Err(ParseError::expected(pos, "a problem section keyword", format!("`{other}`")).into())
            }
        }
    }

    let domain_name =
        domain_name.ok_or_else(|| ParseError::expected(end_of(&top), "`(:domain <name>)`", "`)`"))?;
    let goal = goal.ok_or_else(|| ParseError::expected(end_of(&top), "`(:goal ...)`", "`)`"))?;
    let problem = ProblemSpec {
        name: problem_name,
        domain_name,
        objects: objects.unwrap_or_default(),
        init: init.unwrap_or_default(),
        goal,
    };
    domain.check_problem(&problem)?;
    Ok(problem)
}

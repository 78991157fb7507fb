//! Hand-rolled lexer and recursive-descent parser for query text.

use crate::error::{Error, Result};
use crate::log_model::LogLevel;
use crate::pair::{Comparison, PairFeatureCatalog};

use super::{AtomicPredicate, Clause, CmpOp, Literal, Query};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
    Str(String),
    Op(CmpOp),
    LParen,
    RParen,
    Comma,
    Caret, // ^ or ∧ conjunction
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err_at(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = text.chars().peekable();

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            toks.push(Spanned {
                tok: $tok,
                line,
                column,
            });
            column += $len;
        }};
    }

    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                // comment to end of line
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                push!(Tok::LParen, 1);
            }
            ')' => {
                chars.next();
                push!(Tok::RParen, 1);
            }
            ',' => {
                chars.next();
                push!(Tok::Comma, 1);
            }
            '^' | '∧' => {
                chars.next();
                push!(Tok::Caret, 1);
            }
            '=' => {
                chars.next();
                push!(Tok::Op(CmpOp::Eq), 1);
            }
            '≠' => {
                chars.next();
                push!(Tok::Op(CmpOp::Ne), 1);
            }
            '≤' => {
                chars.next();
                push!(Tok::Op(CmpOp::Le), 1);
            }
            '≥' => {
                chars.next();
                push!(Tok::Op(CmpOp::Ge), 1);
            }
            '!' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    push!(Tok::Op(CmpOp::Ne), 2);
                } else {
                    return Err(err_at(line, column, "expected `=` after `!`"));
                }
            }
            '<' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    push!(Tok::Op(CmpOp::Le), 2);
                } else {
                    push!(Tok::Op(CmpOp::Lt), 1);
                }
            }
            '>' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    push!(Tok::Op(CmpOp::Ge), 2);
                } else {
                    push!(Tok::Op(CmpOp::Gt), 1);
                }
            }
            '"' | '\'' => {
                let delim = c;
                chars.next();
                let mut s = String::new();
                let mut len = 2;
                loop {
                    match chars.next() {
                        Some('\\') => match chars.next() {
                            Some(e) => {
                                s.push(e);
                                len += 2;
                            }
                            None => return Err(err_at(line, column, "unterminated string")),
                        },
                        Some(c) if c == delim => break,
                        Some('\n') | None => {
                            return Err(err_at(line, column, "unterminated string"))
                        }
                        Some(c) => {
                            s.push(c);
                            len += 1;
                        }
                    }
                }
                push!(Tok::Str(s), len);
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => {
                let mut s = String::new();
                s.push(c);
                chars.next();
                while let Some(&c) = chars.peek() {
                    let exponent_sign =
                        (c == '-' || c == '+') && matches!(s.chars().last(), Some('e') | Some('E'));
                    if c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E') || exponent_sign {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = s.chars().count();
                match s.parse::<f64>() {
                    Ok(x) if x.is_finite() => push!(Tok::Number(x), len),
                    _ => return Err(err_at(line, column, format!("bad number {s:?}"))),
                }
            }
            c if is_word_start(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if is_word_char(c) {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = s.chars().count();
                push!(Tok::Word(s), len);
            }
            other => {
                return Err(err_at(
                    line,
                    column,
                    format!("unexpected character {other:?}"),
                ));
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    catalog: &'a PairFeatureCatalog,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|s| (s.line, s.column))
            .unwrap_or((1, 1))
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let (line, column) = self.here();
        err_at(line, column, message)
    }

    fn peek_keyword(&self) -> Option<String> {
        match self.peek() {
            Some(Spanned {
                tok: Tok::Word(w), ..
            }) => Some(w.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword().as_deref() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, what: &str) -> Result<String> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Word(w), ..
            }) => Ok(w),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error(format!("expected {what}")))
            }
        }
    }

    /// `AND`, `^`, or `∧`.
    fn eat_conj(&mut self) -> bool {
        match self.peek() {
            Some(Spanned {
                tok: Tok::Caret, ..
            }) => {
                self.pos += 1;
                true
            }
            _ => self.eat_keyword("AND"),
        }
    }

    fn parse_id_literal(&mut self) -> Result<String> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Str(s), ..
            }) => Ok(s),
            Some(Spanned {
                tok: Tok::Word(w), ..
            }) => Ok(w),
            Some(Spanned {
                tok: Tok::Number(x),
                ..
            }) => Ok(format!("{x}")),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error("expected an id"))
            }
        }
    }

    /// `var.JobID = id` — returns (variable, id).
    fn parse_binding(&mut self) -> Result<(String, String)> {
        let (line, column) = self.here();
        let word = self.expect_word("a binding like J1.JobID = \"...\"")?;
        let Some((var, field)) = word.split_once('.') else {
            return Err(err_at(
                line,
                column,
                format!("expected var.JobID, got {word:?}"),
            ));
        };
        let field_lc = field.to_ascii_lowercase();
        if field_lc != "jobid" && field_lc != "taskid" {
            return Err(err_at(
                line,
                column,
                format!("binding field must be JobID or TaskID, got {field:?}"),
            ));
        }
        match self.next() {
            Some(Spanned {
                tok: Tok::Op(CmpOp::Eq),
                ..
            }) => {}
            _ => {
                self.pos = self.pos.saturating_sub(1);
                return Err(self.error("expected `=` in binding"));
            }
        }
        let id = self.parse_id_literal()?;
        Ok((var.to_string(), id))
    }

    fn parse_literal(&mut self) -> Result<RawLit> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Number(x),
                ..
            }) => Ok(RawLit::Num(x)),
            Some(Spanned {
                tok: Tok::Str(s), ..
            }) => Ok(RawLit::Text(s)),
            Some(Spanned {
                tok: Tok::Word(w), ..
            }) => Ok(RawLit::Text(w)),
            Some(Spanned {
                tok: Tok::LParen, ..
            }) => {
                let a = self.parse_pair_element()?;
                match self.next() {
                    Some(Spanned {
                        tok: Tok::Comma, ..
                    }) => {}
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        return Err(self.error("expected `,` in value pair"));
                    }
                }
                let b = self.parse_pair_element()?;
                match self.next() {
                    Some(Spanned {
                        tok: Tok::RParen, ..
                    }) => {}
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        return Err(self.error("expected `)` closing value pair"));
                    }
                }
                Ok(RawLit::Pair(a, b))
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error("expected a literal"))
            }
        }
    }

    fn parse_pair_element(&mut self) -> Result<String> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Str(s), ..
            }) => Ok(s),
            Some(Spanned {
                tok: Tok::Word(w), ..
            }) => Ok(w),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error("expected a nominal value"))
            }
        }
    }

    fn parse_atom(&mut self) -> Result<AtomicPredicate> {
        let (line, column) = self.here();
        let feature = self.expect_word("a feature name")?;
        let op = match self.next() {
            Some(Spanned {
                tok: Tok::Op(op), ..
            }) => op,
            _ => {
                self.pos = self.pos.saturating_sub(1);
                return Err(self.error("expected a comparison operator"));
            }
        };
        let raw = self.parse_literal()?;
        let index = self
            .catalog
            .resolve(&feature)
            .ok_or_else(|| err_at(line, column, format!("unknown feature {feature:?}")))?;
        let derived = self.catalog.get(index);
        let literal = raw.coerce(derived).map_err(|m| err_at(line, column, m))?;
        AtomicPredicate::new(self.catalog, &derived.name.clone(), op, literal).map_err(
            |e| match e {
                Error::InvalidQuery(diags) => err_at(
                    line,
                    column,
                    diags
                        .into_iter()
                        .map(|d| d.message)
                        .collect::<Vec<_>>()
                        .join("; "),
                ),
                other => other,
            },
        )
    }

    fn parse_clause(&mut self) -> Result<Clause> {
        let mut atoms = vec![self.parse_atom()?];
        while self.eat_conj() {
            atoms.push(self.parse_atom()?);
        }
        Ok(Clause { atoms })
    }
}

enum RawLit {
    Num(f64),
    Text(String),
    Pair(String, String),
}

impl RawLit {
    /// Types a raw literal against the derived feature it is compared to.
    fn coerce(self, feature: &crate::pair::DerivedFeature) -> std::result::Result<Literal, String> {
        use crate::pair::Family;
        match (feature.family, self) {
            (Family::IsSame, RawLit::Text(t)) => match t.as_str() {
                "T" => Ok(Literal::Flag(true)),
                "F" => Ok(Literal::Flag(false)),
                other => Err(format!(
                    "feature {} takes T or F, got {other:?}",
                    feature.name
                )),
            },
            (Family::Compare, RawLit::Text(t)) => match t.as_str() {
                "LT" => Ok(Literal::Cmp(Comparison::Lt)),
                "SIM" => Ok(Literal::Cmp(Comparison::Sim)),
                "GT" => Ok(Literal::Cmp(Comparison::Gt)),
                other => Err(format!(
                    "feature {} takes LT, SIM, or GT, got {other:?}",
                    feature.name
                )),
            },
            (Family::Diff, RawLit::Pair(a, b)) => Ok(Literal::ValuePair(a, b)),
            (Family::Base, RawLit::Num(x)) => Ok(Literal::Num(x)),
            (Family::Base, RawLit::Text(t)) => Ok(Literal::Str(t)),
            (_, got) => {
                let got = match got {
                    RawLit::Num(x) => format!("number {x}"),
                    RawLit::Text(t) => format!("{t:?}"),
                    RawLit::Pair(a, b) => format!("({a:?}, {b:?})"),
                };
                Err(format!(
                    "literal {got} does not fit feature {}",
                    feature.name
                ))
            }
        }
    }
}

/// Parses a query against a catalog. The FOR clause is optional (the pair
/// ids may instead be supplied through [`Query::with_ids`]); DESPITE is
/// optional and defaults to true; OBSERVED and EXPECTED are mandatory.
pub fn parse_query(text: &str, catalog: &PairFeatureCatalog) -> Result<Query> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        catalog,
    };

    let mut left_var = "J1".to_string();
    let mut right_var = "J2".to_string();
    let mut left_id = None;
    let mut right_id = None;

    if p.eat_keyword("FOR") {
        left_var = p.expect_word("a variable name")?;
        match p.next() {
            Some(Spanned {
                tok: Tok::Comma, ..
            }) => {}
            _ => {
                p.pos = p.pos.saturating_sub(1);
                return Err(p.error("expected `,` between the FOR variables"));
            }
        }
        right_var = p.expect_word("a variable name")?;
        if p.eat_keyword("WHERE") {
            let (v1, id1) = p.parse_binding()?;
            if !p.eat_conj() {
                return Err(p.error("expected AND between the two bindings"));
            }
            let (v2, id2) = p.parse_binding()?;
            for (v, id) in [(v1, id1), (v2, id2)] {
                if v == left_var {
                    left_id = Some(id);
                } else if v == right_var {
                    right_id = Some(id);
                } else {
                    return Err(p.error(format!("unknown variable {v:?} in WHERE")));
                }
            }
            if left_id.is_none() || right_id.is_none() {
                return Err(p.error("WHERE must bind both variables"));
            }
        }
    }
    let level = if left_var.starts_with(['T', 't']) {
        LogLevel::Task
    } else {
        LogLevel::Job
    };

    let des = if p.eat_keyword("DESPITE") {
        p.parse_clause()?
    } else {
        Clause::empty()
    };
    if !p.eat_keyword("OBSERVED") {
        return Err(p.error("expected OBSERVED clause"));
    }
    let obs = p.parse_clause()?;
    if !p.eat_keyword("EXPECTED") {
        return Err(p.error("expected EXPECTED clause"));
    }
    let exp = p.parse_clause()?;
    if let Some(t) = p.peek() {
        return Err(err_at(
            t.line,
            t.column,
            "unexpected trailing input after EXPECTED clause",
        ));
    }

    Ok(Query {
        left_var,
        right_var,
        left_id,
        right_id,
        level,
        des,
        obs,
        exp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_model::{FeatureRole, FeatureSchema, LogSchema};
    use crate::pxql::Literal;

    fn task_catalog() -> PairFeatureCatalog {
        let schema = LogSchema::new(vec![
            FeatureSchema::nominal("jobID", FeatureRole::App, ["j0", "j1"]),
            FeatureSchema::nominal("hostname", FeatureRole::Metric, ["h0", "h1"]),
            FeatureSchema::numeric("inputsize", FeatureRole::Data),
            FeatureSchema::outcome(),
        ])
        .unwrap();
        PairFeatureCatalog::new(&schema, 0.10).unwrap()
    }

    fn job_catalog() -> PairFeatureCatalog {
        let schema = LogSchema::new(vec![
            FeatureSchema::numeric("numinstances", FeatureRole::Config),
            FeatureSchema::numeric("inputsize", FeatureRole::Data),
            FeatureSchema::numeric("blocksize", FeatureRole::Config),
            FeatureSchema::nominal("pig_script", FeatureRole::App, ["a.pig", "b.pig"]),
            FeatureSchema::outcome(),
        ])
        .unwrap();
        PairFeatureCatalog::new(&schema, 0.10).unwrap()
    }

    fn atom(q: &Clause, i: usize) -> (&str, CmpOp, &Literal) {
        let a = &q.atoms[i];
        (a.feature_name.as_str(), a.op, &a.constant)
    }

    #[test]
    fn parses_why_last_task_faster() {
        let text = "FOR T1, T2\n\
                    DESPITE jobID_isSame = T ^\n\
                    inputsize_compare = SIM ^\n\
                    hostname_isSame = T\n\
                    OBSERVED duration_compare = LT\n\
                    EXPECTED duration_compare = SIM";
        let q = parse_query(text, &task_catalog()).unwrap();
        assert_eq!(q.level, LogLevel::Task);
        assert_eq!(q.des.atoms.len(), 3);
        assert_eq!(
            atom(&q.des, 0),
            ("jobID_isSame", CmpOp::Eq, &Literal::Flag(true))
        );
        assert_eq!(
            atom(&q.des, 1),
            (
                "inputsize_compare",
                CmpOp::Eq,
                &Literal::Cmp(Comparison::Sim)
            )
        );
        assert_eq!(
            atom(&q.des, 2),
            ("hostname_isSame", CmpOp::Eq, &Literal::Flag(true))
        );
        assert_eq!(
            atom(&q.obs, 0),
            ("duration_compare", CmpOp::Eq, &Literal::Cmp(Comparison::Lt))
        );
        assert_eq!(
            atom(&q.exp, 0),
            (
                "duration_compare",
                CmpOp::Eq,
                &Literal::Cmp(Comparison::Sim)
            )
        );
    }

    #[test]
    fn parses_why_slower_despite_same_numinstances() {
        let text = "FOR J1, J2\n\
                    DESPITE numinstances_isSame = T ^\n\
                    pig_script_isSame = T\n\
                    OBSERVED duration_compare = GT\n\
                    EXPECTED duration_compare = SIM";
        let q = parse_query(text, &job_catalog()).unwrap();
        assert_eq!(q.level, LogLevel::Job);
        assert_eq!(q.des.atoms.len(), 2);
        assert_eq!(
            atom(&q.des, 0),
            ("numinstances_isSame", CmpOp::Eq, &Literal::Flag(true))
        );
        assert_eq!(
            atom(&q.des, 1),
            ("pig_script_isSame", CmpOp::Eq, &Literal::Flag(true))
        );
        assert_eq!(
            atom(&q.obs, 0),
            ("duration_compare", CmpOp::Eq, &Literal::Cmp(Comparison::Gt))
        );
    }

    #[test]
    fn despite_omission_means_true() {
        let q = parse_query(
            "OBSERVED duration_compare = SIM EXPECTED duration_compare = GT",
            &job_catalog(),
        )
        .unwrap();
        assert!(q.des.is_empty());
        assert_eq!(q.level, LogLevel::Job);
        assert_eq!(q.left_id, None);
    }

    #[test]
    fn dotted_feature_names_and_wedge() {
        let q = parse_query(
            "DESPITE inputsize.compare = SIM \u{2227} numinstances.isSame = T\n\
             OBSERVED duration.compare = LT EXPECTED duration.compare = SIM",
            &job_catalog(),
        )
        .unwrap();
        assert_eq!(q.des.atoms[0].feature_name, "inputsize_compare");
        assert_eq!(q.des.atoms[1].feature_name, "numinstances_isSame");
    }

    #[test]
    fn where_clause_binds_ids() {
        let q = parse_query(
            "FOR J1, J2 WHERE J1.JobID = \"job-054\" and J2.JOBID = job-000\n\
             OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &job_catalog(),
        )
        .unwrap();
        assert_eq!(q.left_id.as_deref(), Some("job-054"));
        assert_eq!(q.right_id.as_deref(), Some("job-000"));
    }

    #[test]
    fn rejects_unknown_feature_with_position() {
        let err = parse_query(
            "OBSERVED nosuch_compare = GT EXPECTED duration_compare = SIM",
            &job_catalog(),
        )
        .unwrap_err();
        match err {
            Error::Parse {
                line,
                column,
                message,
            } => {
                assert_eq!(line, 1);
                assert_eq!(column, 10);
                assert!(message.contains("nosuch"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_order_operator_on_nominal() {
        let err = parse_query(
            "OBSERVED pig_script_isSame >= T EXPECTED duration_compare = SIM",
            &job_catalog(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn rejects_constant_outside_domain() {
        let err = parse_query(
            "OBSERVED pig_script = \"other.pig\" EXPECTED duration_compare = SIM",
            &job_catalog(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn parses_diff_pair_literal_and_base_atoms() {
        let q = parse_query(
            "DESPITE pig_script_diff = (\"a.pig\", \"b.pig\") AND blocksize >= 128 \
             OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &job_catalog(),
        )
        .unwrap();
        assert_eq!(
            q.des.atoms[0].constant,
            Literal::ValuePair("a.pig".into(), "b.pig".into())
        );
        assert_eq!(q.des.atoms[1].op, CmpOp::Ge);
        assert_eq!(q.des.atoms[1].constant, Literal::Num(128.0));
    }

    #[test]
    fn print_then_parse_is_identity() {
        let catalog = job_catalog();
        let q = parse_query(
            "FOR J1, J2 WHERE J1.JobID = 'a' AND J2.JobID = 'b'\n\
             DESPITE numinstances_isSame = T ^ blocksize > 6.7e7\n\
             OBSERVED duration_compare = GT EXPECTED duration_compare = SIM",
            &catalog,
        )
        .unwrap();
        let printed = q.to_string();
        let reparsed = parse_query(&printed, &catalog).unwrap();
        assert_eq!(q, reparsed);
    }
}

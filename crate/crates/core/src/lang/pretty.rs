//! Fully parenthesized printing; the output parses back to the same tree.

use std::fmt::{self, Display, Formatter};

use super::ast::*;

fn comma_list<T: Display>(f: &mut Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{}", x)?;
    }
    Ok(())
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(r) => write!(f, "{}", r),
            Expr::Bool(b) => write!(f, "{}", b),
            Expr::Ident(n) => write!(f, "{}", n),
            Expr::Array(xs) => {
                write!(f, "[")?;
                comma_list(f, xs)?;
                write!(f, "]")
            }
            Expr::Tuple(xs) => {
                write!(f, "(")?;
                comma_list(f, xs)?;
                write!(f, ")")
            }
            Expr::Not(a) => write!(f, "(not {})", a),
            Expr::Binary(op, a, b) => write!(f, "({} {} {})", a, op.symbol(), b),
            Expr::Index(a, i) => write!(f, "{}[{}]", a, i),
            Expr::Call(g, xs) => {
                write!(f, "{}(", g)?;
                comma_list(f, xs)?;
                write!(f, ")")
            }
        }
    }
}

impl Display for DistExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            DistExpr::Weighted(bs) => {
                for (i, (e, w)) in bs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    write!(f, "{}", e)?;
                    if let Some(w) = w {
                        write!(f, " @ {}", w)?;
                    }
                }
                Ok(())
            }
            DistExpr::Uniform(es) => {
                write!(f, "uniform(")?;
                comma_list(f, es)?;
                write!(f, ")")
            }
            DistExpr::UniformRange(a, b) => write!(f, "uniform({} .. {})", a, b),
        }
    }
}

impl Display for Domain {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Domain::List(vs) => {
                write!(f, "{{")?;
                comma_list(f, vs)?;
                write!(f, "}}")
            }
            Domain::Range(lo, hi) => write!(f, "int {}..{}", lo, hi),
        }
    }
}

impl Display for Decl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.domain)
    }
}

impl Display for Stmt {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Skip => write!(f, "skip"),
            Stmt::Abort => write!(f, "abort"),
            Stmt::Seq(xs) => {
                for (i, s) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{}", s)?;
                }
                Ok(())
            }
            Stmt::Assign { targets, rhs } => {
                comma_list(f, targets)?;
                write!(f, " := {}", rhs)
            }
            Stmt::HidVar { name, domain, rhs } => match domain {
                Some(d) => write!(f, "hidvar {}: {} := {}", name, d, rhs),
                None => write!(f, "hidvar {} := {}", name, rhs),
            },
            Stmt::Unvar(n) => write!(f, "unvar {}", n),
            Stmt::If { guard, then, els } => write!(f, "if {} {{ {} }} else {{ {} }}", guard, then, els),
            Stmt::While { guard, body } => write!(f, "while {} {{ {} }}", guard, body),
            Stmt::Print(d) => write!(f, "print {}", d),
            Stmt::NonDet(a, b) => write!(f, "{{ {} }} [] {{ {} }}", a, b),
            Stmt::Assert(g) => write!(f, "assert {}", g),
            Stmt::Call(n) => write!(f, "call {}", n),
        }
    }
}

fn decl_line(f: &mut Formatter<'_>, head: &str, decls: &[Decl]) -> fmt::Result {
    write!(f, "{}:", head)?;
    for d in decls {
        write!(f, " {}", d)?;
    }
    writeln!(f)
}

impl Display for DatatypeDef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        decl_line(f, "shared", &self.shared)?;
        decl_line(f, "encap", &self.encap)?;
        writeln!(f, "init: {}", self.init)?;
        for (n, s) in &self.ops {
            writeln!(f, "op {}: {}", n, s)?;
        }
        writeln!(f, "final: {}", self.fin)
    }
}

impl Display for ContextDef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        decl_line(f, "client", &self.client)?;
        writeln!(f, "body: {}", self.body)
    }
}

impl Display for ProgramFile {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if !self.context.is_empty() {
            decl_line(f, "context", &self.context)?;
        }
        writeln!(f, "{}", self.body)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_file, parse_program};
    use super::super::SourceFile;

    #[test]
    fn round_trips() {
        for src in [
            "skip",
            "x := 0 @ 1/2 | 1",
            "print (n div 2); hidvar b := {0} [] {1}",
            "if c = 1 { c := 1 @ 1/2 | 0 } else { abort }",
            "while (n != 4) and (H[n] != x) { n := n + 1 }",
            "x, y := (y, x); assert distinct([x, y]); print uniform(0 .. 3)",
            "hidvar m: int 0..3 := uniform(0, 1, 2, 3); unvar m",
            "r := x in H; call OP",
            "{ x := -2 } [] { { x := -x } [] { skip } }",
        ] {
            let p = parse_program(src).unwrap();
            let printed = p.to_string();
            assert_eq!(parse_program(&printed).unwrap(), p, "{} -> {}", src, printed);
        }
    }

    #[test]
    fn files_round_trip() {
        let src = "shared: s: {0, 1}\nencap: b: {0, 1}\ninit: hidvar b := 0 @ 1/2 | 1\nop OP: s := b\nfinal: unvar b\n";
        let f = parse_file(src).unwrap();
        let SourceFile::Datatype(d) = &f else { panic!() };
        assert_eq!(d.to_string(), src);
        assert_eq!(parse_file(&d.to_string()).unwrap(), f);
    }
}

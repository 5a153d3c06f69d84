//! Standard form `minimize c^T x + c0  s.t.  A x + s = b,  s in K` and its
//! line-oriented text dump.

use std::fmt::Write as _;

use super::expr::{VarInfo, VarKind};
use super::program::{svec_len, ConeKind, ConicProgram};
use crate::error::{Error, Result};

pub const DUMP_FORMAT: &str = "starisac-conic/1";

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCone {
    pub kind: ConeKind,
    pub dim: usize,
    pub tag: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalProgram {
    pub n: usize,
    pub vars: Vec<VarInfo>,
    pub c: Vec<f64>,
    pub c0: f64,
    /// `(row, col, value)` triplets, no duplicates.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<CanonicalCone>,
}

impl CanonicalProgram {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Maximization-sense objective of the source program at `x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        -(self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.c0)
    }

    /// Row ranges of each cone, in order.
    pub fn cone_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.cones
            .iter()
            .map(|c| {
                let r = start..start + c.dim;
                start += c.dim;
                r
            })
            .collect()
    }

    /// Dense copy of `A`.
    pub fn a_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.m(), self.n);
        for &(i, j, v) in &self.a {
            a[(i, j)] += v;
        }
        a
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format {DUMP_FORMAT}");
        let _ = writeln!(s, "sense minimize");
        let _ = writeln!(s, "n {}", self.n);
        for v in &self.vars {
            let _ = writeln!(s, "var {} {} {} {}", v.name, v.kind.as_str(), v.dim, v.offset);
        }
        let _ = writeln!(s, "c0 {:e}", self.c0);
        for (j, &c) in self.c.iter().enumerate() {
            if c != 0.0 {
                let _ = writeln!(s, "c {j} {c:e}");
            }
        }
        for cone in &self.cones {
            let param = match cone.kind {
                ConeKind::Psd { n } => n,
                _ => cone.dim,
            };
            let label =
                if cone.label.is_empty() { "-".to_string() } else { cone.label.replace(char::is_whitespace, "_") };
            let _ = writeln!(s, "cone {} {} {} {}", cone.kind.name(), param, cone.tag, label);
        }
        for (i, &b) in self.b.iter().enumerate() {
            if b != 0.0 {
                let _ = writeln!(s, "b {i} {b:e}");
            }
        }
        for &(i, j, v) in &self.a {
            let _ = writeln!(s, "a {i} {j} {v:e}");
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));
        let mut prog = CanonicalProgram {
            n: 0,
            vars: Vec::new(),
            c: Vec::new(),
            c0: 0.0,
            a: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        };
        let mut b_entries = Vec::new();
        let mut saw_end = false;
        let mut saw_format = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                tok.get(k).ok_or_else(|| err(ln, "missing field"))?.parse::<f64>().map_err(|e| err(ln, &e.to_string()))
            };
            let idx = |k: usize| -> Result<usize> {
                tok.get(k)
                    .ok_or_else(|| err(ln, "missing field"))?
                    .parse::<usize>()
                    .map_err(|e| err(ln, &e.to_string()))
            };
            match tok[0] {
                "format" => {
                    if tok.get(1) != Some(&DUMP_FORMAT) {
                        return Err(err(ln, "unsupported format"));
                    }
                    saw_format = true;
                }
                "sense" => {
                    if tok.get(1) != Some(&"minimize") {
                        return Err(err(ln, "only minimize is supported"));
                    }
                }
                "n" => {
                    prog.n = idx(1)?;
                    prog.c = vec![0.0; prog.n];
                }
                "var" => {
                    let kind = VarKind::parse(tok.get(2).copied().unwrap_or(""))
                        .ok_or_else(|| err(ln, "bad variable kind"))?;
                    prog.vars.push(VarInfo { name: tok[1].to_string(), kind, dim: idx(3)?, offset: idx(4)? });
                }
                "c0" => prog.c0 = num(1)?,
                "c" => {
                    let j = idx(1)?;
                    *prog.c.get_mut(j).ok_or_else(|| err(ln, "c index out of range"))? = num(2)?;
                }
                "cone" => {
                    let param = idx(2)?;
                    let (kind, dim) = match tok.get(1).copied() {
                        Some("zero") => (ConeKind::Zero, param),
                        Some("nonneg") => (ConeKind::NonNeg, param),
                        Some("soc") => (ConeKind::Soc, param),
                        Some("exp") => (ConeKind::Exp, param),
                        Some("psd") => (ConeKind::Psd { n: param }, svec_len(param)),
                        _ => return Err(err(ln, "unknown cone")),
                    };
                    let tag = tok.get(3).ok_or_else(|| err(ln, "missing tag"))?.to_string();
                    let label = match tok.get(4).copied() {
                        None | Some("-") => String::new(),
                        Some(l) => l.to_string(),
                    };
                    prog.cones.push(CanonicalCone { kind, dim, tag, label });
                }
                "b" => b_entries.push((idx(1)?, num(2)?)),
                "a" => prog.a.push((idx(1)?, idx(2)?, num(3)?)),
                "end" => {
                    saw_end = true;
                    break;
                }
                other => return Err(err(ln, &format!("unknown record `{other}`"))),
            }
        }
        if !saw_format || !saw_end {
            return Err(Error::Parse("missing format header or end marker".into()));
        }
        let m: usize = prog.cones.iter().map(|c| c.dim).sum();
        prog.b = vec![0.0; m];
        for (i, v) in b_entries {
            *prog.b.get_mut(i).ok_or_else(|| Error::Parse(format!("b row {i} out of range")))? = v;
        }
        if prog.a.iter().any(|&(i, j, _)| i >= m || j >= prog.n) {
            return Err(Error::Parse("A triplet out of range".into()));
        }
        Ok(prog)
    }
}

const DROP_RELATIVE: f64 = 1e-15;

impl ConicProgram {
    /// Lowers to standard form. A block row `e(x) = a^T x + k in K` becomes the
    /// row `-a^T x + s = k`.
    pub fn canonicalize(&self) -> Result<CanonicalProgram> {
        self.validate()?;
        let n = self.n_scalars();
        let mut c = vec![0.0; n];
        for &(j, v) in &self.objective().terms {
            c[j] -= v;
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        for con in self.constraints() {
            for block in &con.blocks {
                for row in &block.rows {
                    let i = b.len();
                    // Coefficients below double-precision resolution of the row only
                    // hurt the solver's scaling.
                    let floor = DROP_RELATIVE * row.terms.iter().fold(row.constant.abs(), |m, t| m.max(t.1.abs()));
                    a.extend(row.terms.iter().filter(|t| t.1.abs() > floor).map(|&(j, v)| (i, j, -v)));
                    b.push(row.constant);
                }
                cones.push(CanonicalCone {
                    kind: block.kind,
                    dim: block.rows.len(),
                    tag: con.tag.clone(),
                    label: con.label.clone(),
                });
            }
        }
        Ok(CanonicalProgram { n, vars: self.vars().to_vec(), c, c0: -self.objective().constant, a, b, cones })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{hypograph_log, nonneg, psd_hermitian, soc_of_quadratic, AffExpr};

    fn sample() -> ConicProgram {
        let mut p = ConicProgram::new();
        let t = p.add_real("t", 2);
        let r = p.add_hermitian("R", 2);
        p.add("budget", "", vec![nonneg(AffExpr::constant(1.0) - r.trace())]);
        p.add("psd", "", vec![psd_hermitian(&r)]);
        p.add("quad", "k=0", vec![soc_of_quadratic(vec![t.at(0)], t.at(1) + 0.25)]);
        p.add("log", "j=1", vec![hypograph_log(t.at(1) + 1.0, t.at(0))]);
        p.maximize(t.at(0) + 0.125);
        p
    }

    #[test]
    fn dump_parse_roundtrip_is_exact() {
        let can = sample().canonicalize().unwrap();
        let back = CanonicalProgram::parse(&can.dump()).unwrap();
        assert_eq!(back, can);
    }

    #[test]
    fn tags_survive_canonicalization() {
        let can = sample().canonicalize().unwrap();
        let tags: Vec<&str> = can.cones.iter().map(|c| c.tag.as_str()).collect();
        assert_eq!(tags, ["budget", "psd", "quad", "log"]);
        assert_eq!(can.cones[1].dim, svec_len(4));
        assert_eq!(can.m(), 1 + 10 + 3 + 3);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(CanonicalProgram::parse("hello").is_err());
        assert!(CanonicalProgram::parse("format starisac-conic/1\nn 1\na 0 3 1.0\ncone nonneg 1 x -\nend\n").is_err());
    }
}

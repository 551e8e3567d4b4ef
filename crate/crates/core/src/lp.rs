//! Multi-commodity-flow integer program in CPLEX LP text format.
//!
//! Variables: `y_<i>_<u>` places request node `i` on substrate node `u`;
//! `z_<i>_<j>__<u>_<v>` routes request edge `(i,j)` over substrate edge
//! `(u,v)`. Rows are named by family and index:
//!
//! | row          | meaning                                             |
//! |--------------|-----------------------------------------------------|
//! | `c2_i`       | node `i` is placed exactly once                     |
//! | `c3_i_k`     | no host whose capacity `k` is below `d(i)_k`        |
//! | `c4_e_u`     | unit flow balance of edge `e` at substrate node `u` |
//! | `c5_e_k`     | no substrate edge whose capacity `k` is below `d(e)_k` |
//! | `c6_u_k`     | summed demand `k` on node `u`                       |
//! | `c7_f_k`     | summed demand `k` on substrate edge `f`             |
//!
//! Identifier characters outside `[A-Za-z0-9_]` are written as `%XX` per
//! UTF-8 byte.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Request, Substrate};
use crate::quantity::{Cost, Quantity, MICROS_PER_UNIT};

const LINE_WIDTH: usize = 80;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("variable name `{0}` is produced by two different elements")]
    NameCollision(String),
    #[error("substrate has {substrate} resource components, request has {request}")]
    Dimension { substrate: usize, request: usize },
}

/// Rows emitted per constraint family (2) through (7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowCounts {
    pub placement: usize,
    pub node_forbidding: usize,
    pub flow: usize,
    pub edge_forbidding: usize,
    pub node_capacity: usize,
    pub edge_capacity: usize,
}

#[derive(Debug, Clone)]
pub struct LpExport {
    pub text: String,
    pub variables: usize,
    pub rows: RowCounts,
}

pub fn escape(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' {
            out.push(b as char);
        } else {
            let _ = write!(out, "%{b:02X}");
        }
    }
    out
}

fn micros_text(m: u128) -> String {
    let unit = MICROS_PER_UNIT as u128;
    let (whole, frac) = (m / unit, m % unit);
    if frac == 0 {
        whole.to_string()
    } else {
        let digits = format!("{frac:06}");
        format!("{whole}.{}", digits.trim_end_matches('0'))
    }
}

/// A linear expression rendered term by term, wrapping long lines.
struct Expr {
    terms: Vec<(bool, String, String)>,
}

impl Expr {
    fn new() -> Self {
        Expr { terms: Vec::new() }
    }

    /// Adds `coef * var`; `coef` is a nonnegative decimal text, "1" is implicit.
    fn term(&mut self, negative: bool, coef: String, var: &str) {
        self.terms.push((negative, coef, var.to_string()));
    }

    fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn render(&self, out: &mut String, head: &str, tail: &str) {
        let mut line = format!(" {head}");
        for (k, (neg, coef, var)) in self.terms.iter().enumerate() {
            let sign = match (k, neg) {
                (0, false) => "",
                (0, true) => "-",
                (_, false) => "+",
                (_, true) => "-",
            };
            let mut piece = String::new();
            if !sign.is_empty() {
                piece.push_str(sign);
                piece.push(' ');
            }
            if coef != "1" {
                piece.push_str(coef);
                piece.push(' ');
            }
            piece.push_str(var);
            if line.len() + 1 + piece.len() > LINE_WIDTH && line.trim().len() > head.len() {
                out.push_str(&line);
                out.push('\n');
                line = String::from("   ");
            } else if !line.ends_with(' ') {
                line.push(' ');
            }
            line.push_str(&piece);
        }
        if !tail.is_empty() {
            line.push(' ');
            line.push_str(tail);
        }
        out.push_str(&line);
        out.push('\n');
    }
}

/// Builds the integer program for embedding `request` into `substrate`.
pub fn export_lp(substrate: &Substrate, request: &Request) -> Result<LpExport, LpError> {
    if substrate.tau() != request.tau() {
        return Err(LpError::Dimension {
            substrate: substrate.tau(),
            request: request.tau(),
        });
    }
    let tau = substrate.tau();
    let (s, m) = (substrate.node_count(), substrate.edge_count());
    let (r, q) = (request.node_count(), request.edge_count());

    let sid: Vec<String> = substrate.nodes().iter().map(|n| escape(&n.id)).collect();
    let rid: Vec<String> = request.nodes().iter().map(|n| escape(&n.id)).collect();
    let y = |i: usize, u: usize| format!("y_{}_{}", rid[i], sid[u]);
    let z = |e: usize, f: usize| {
        let (re, se) = (request.edge(e), substrate.edge(f));
        format!(
            "z_{}_{}__{}_{}",
            rid[re.src], rid[re.dst], sid[se.src], sid[se.dst]
        )
    };

    let mut vars = Vec::with_capacity(r * s + q * m);
    for i in 0..r {
        for u in 0..s {
            vars.push(y(i, u));
        }
    }
    for e in 0..q {
        for f in 0..m {
            vars.push(z(e, f));
        }
    }
    let mut seen = HashSet::with_capacity(vars.len());
    for v in &vars {
        if !seen.insert(v.as_str()) {
            return Err(LpError::NameCollision(v.clone()));
        }
    }
    let placeholder = vars.first().cloned().unwrap_or_else(|| "zero".to_string());
    let demand = |v: Quantity| v.micros().expect("request demands are finite") as u128;

    let mut text = String::new();
    let _ = writeln!(text, "\\ Min-VNEP multi-commodity flow formulation");
    let _ = writeln!(
        text,
        "\\ substrate: {s} nodes, {m} edges; request: {r} nodes, {q} edges; tau = {tau}"
    );
    text.push_str("Minimize\n");

    let mut fixed = Vec::new();
    let mut obj = Expr::new();
    let mut price = |var: String, c: Cost, obj: &mut Expr| {
        if c.is_saturated() {
            fixed.push(var);
        } else if c != Cost::ZERO {
            obj.term(false, c.to_string(), &var);
        }
    };
    for i in 0..r {
        for u in 0..s {
            price(
                y(i, u),
                Cost::dot_vec(&request.node(i).demand, &substrate.node(u).cost),
                &mut obj,
            );
        }
    }
    for e in 0..q {
        for f in 0..m {
            price(
                z(e, f),
                Cost::dot_vec(&request.edge(e).demand, &substrate.edge(f).cost),
                &mut obj,
            );
        }
    }
    if obj.is_empty() {
        obj.term(false, "0".into(), &placeholder);
    }
    obj.render(&mut text, "obj:", "");

    text.push_str("Subject To\n");
    let mut rows = RowCounts::default();
    let row = |text: &mut String, name: String, mut expr: Expr, tail: String| {
        if expr.is_empty() {
            expr.term(false, "0".into(), &placeholder);
        }
        expr.render(text, &format!("{name}:"), &tail);
    };

    for i in 0..r {
        let mut ex = Expr::new();
        for u in 0..s {
            ex.term(false, "1".into(), &y(i, u));
        }
        row(&mut text, format!("c2_{i}"), ex, "= 1".into());
        rows.placement += 1;
    }
    for i in 0..r {
        for k in 0..tau {
            let d = request.node(i).demand.get(k);
            let mut ex = Expr::new();
            for u in 0..s {
                if !substrate.node(u).capacity.get(k).admits(demand(d)) {
                    ex.term(false, "1".into(), &y(i, u));
                }
            }
            row(&mut text, format!("c3_{i}_{k}"), ex, "= 0".into());
            rows.node_forbidding += 1;
        }
    }
    for e in 0..q {
        let re = request.edge(e);
        for u in 0..s {
            let mut ex = Expr::new();
            for (f, se) in substrate.edges().iter().enumerate() {
                if se.src == u {
                    ex.term(false, "1".into(), &z(e, f));
                }
            }
            for (f, se) in substrate.edges().iter().enumerate() {
                if se.dst == u {
                    ex.term(true, "1".into(), &z(e, f));
                }
            }
            ex.term(true, "1".into(), &y(re.src, u));
            ex.term(false, "1".into(), &y(re.dst, u));
            row(&mut text, format!("c4_{e}_{u}"), ex, "= 0".into());
            rows.flow += 1;
        }
    }
    for e in 0..q {
        for k in 0..tau {
            let d = request.edge(e).demand.get(k);
            let mut ex = Expr::new();
            for f in 0..m {
                if !substrate.edge(f).capacity.get(k).admits(demand(d)) {
                    ex.term(false, "1".into(), &z(e, f));
                }
            }
            row(&mut text, format!("c5_{e}_{k}"), ex, "= 0".into());
            rows.edge_forbidding += 1;
        }
    }
    for u in 0..s {
        for k in 0..tau {
            let total: u128 = request
                .nodes()
                .iter()
                .map(|n| demand(n.demand.get(k)))
                .sum();
            let mut ex = Expr::new();
            for i in 0..r {
                let d = demand(request.node(i).demand.get(k));
                if d > 0 {
                    ex.term(false, micros_text(d), &y(i, u));
                }
            }
            let cap = substrate.node(u).capacity.get(k);
            let rhs = cap.micros().map_or(total, |c| c as u128);
            row(
                &mut text,
                format!("c6_{u}_{k}"),
                ex,
                format!("<= {}", micros_text(rhs)),
            );
            rows.node_capacity += 1;
        }
    }
    for f in 0..m {
        for k in 0..tau {
            let total: u128 = request
                .edges()
                .iter()
                .map(|e| demand(e.demand.get(k)))
                .sum();
            let mut ex = Expr::new();
            for e in 0..q {
                let d = demand(request.edge(e).demand.get(k));
                if d > 0 {
                    ex.term(false, micros_text(d), &z(e, f));
                }
            }
            let cap = substrate.edge(f).capacity.get(k);
            let rhs = cap.micros().map_or(total, |c| c as u128);
            row(
                &mut text,
                format!("c7_{f}_{k}"),
                ex,
                format!("<= {}", micros_text(rhs)),
            );
            rows.edge_capacity += 1;
        }
    }

    let auxiliary = vars.is_empty();
    if !fixed.is_empty() || auxiliary {
        text.push_str("Bounds\n");
        for v in &fixed {
            let _ = writeln!(text, " {v} = 0");
        }
        if auxiliary {
            text.push_str(" zero = 0\n");
        }
    }
    if !vars.is_empty() {
        text.push_str("Binary\n");
        text.push_str(&render_list(&vars));
    }
    text.push_str("End\n");
    Ok(LpExport {
        text,
        variables: vars.len(),
        rows,
    })
}

fn render_list(names: &[String]) -> String {
    let mut out = String::new();
    let mut line = String::new();
    for n in names {
        if !line.is_empty() && line.len() + 1 + n.len() > LINE_WIDTH {
            out.push_str(&line);
            out.push('\n');
            line.clear();
        }
        line.push(' ');
        line.push_str(n);
    }
    if !line.is_empty() {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantity::ResourceVec;

    fn units(v: u64) -> ResourceVec {
        ResourceVec::from_units(&[v])
    }

    fn t1() -> (Substrate, Request) {
        let mut s = Substrate::new(1);
        s.add_node("p", units(0), units(0)).unwrap();
        s.add_node("l1", units(3), units(1)).unwrap();
        s.add_node("l2", units(3), units(2)).unwrap();
        for (a, b) in [(0, 1), (1, 0), (0, 2), (2, 0)] {
            s.add_edge(a, b, units(10), units(1)).unwrap();
        }
        let mut r = Request::new(1);
        r.add_node("u", units(2)).unwrap();
        r.add_node("w", units(1)).unwrap();
        r.add_edge(0, 1, units(1)).unwrap();
        (s, r)
    }

    #[test]
    fn escaping() {
        assert_eq!(escape("srv0_1"), "srv0_1");
        assert_eq!(escape("a~leaf"), "a%7Eleaf");
        assert_eq!(escape("a b"), "a%20b");
        assert_eq!(escape("é"), "%C3%A9");
    }

    #[test]
    fn underscore_ambiguity_is_an_error() {
        let mut s = Substrate::new(1);
        s.add_node("x", units(1), units(1)).unwrap();
        let mut r = Request::new(1);
        r.add_node("a_b", units(1)).unwrap();
        r.add_node("a", units(1)).unwrap();
        // y_a_b_x only once; fine
        assert!(export_lp(&s, &r).is_ok());
        let mut s2 = Substrate::new(1);
        s2.add_node("x", units(1), units(1)).unwrap();
        s2.add_node("b_x", units(1), units(1)).unwrap();
        assert!(matches!(export_lp(&s2, &r), Err(LpError::NameCollision(_))));
    }

    #[test]
    fn t1_counts_and_rows() {
        let (s, r) = t1();
        let lp = export_lp(&s, &r).unwrap();
        assert_eq!(lp.variables, 2 * 3 + 4);
        assert_eq!(
            lp.rows,
            RowCounts {
                placement: 2,
                node_forbidding: 2,
                flow: 3,
                edge_forbidding: 1,
                node_capacity: 3,
                edge_capacity: 4
            }
        );
        let text = &lp.text;
        assert!(
            text.contains(" c2_0: y_u_p + y_u_l1 + y_u_l2 = 1\n"),
            "{text}"
        );
        // p has zero capacity, so both nodes are forbidden there
        assert!(text.contains(" c3_0_0: y_u_p = 0\n"));
        assert!(text.contains(
            " c4_0_0: z_u_w__p_l1 + z_u_w__p_l2 - z_u_w__l1_p - z_u_w__l2_p - y_u_p + y_w_p = 0\n"
        ));
        assert!(text.contains(" c5_0_0: 0 y_u_p = 0\n"));
        assert!(text.contains(" c6_1_0: 2 y_u_l1 + y_w_l1 <= 3\n"));
        assert!(text.contains(" obj: 2 y_u_l1 + 4 y_u_l2 + y_w_l1 + 2 y_w_l2"));
        assert!(text.ends_with("End\n"));
        assert!(text.lines().all(|l| l.len() <= LINE_WIDTH + 40));
    }

    #[test]
    fn unbounded_values() {
        let mut s = Substrate::new(1);
        s.add_node("a", ResourceVec::unbounded(1), ResourceVec::unbounded(1))
            .unwrap();
        let mut r = Request::new(1);
        r.add_node("u", ResourceVec::from_units(&[3])).unwrap();
        r.add_node("v", ResourceVec::zeros(1)).unwrap();
        let lp = export_lp(&s, &r).unwrap().text;
        assert!(lp.contains(" c6_0_0: 3 y_u_a <= 3\n"), "{lp}");
        assert!(lp.contains("Bounds\n y_u_a = 0\n"));
        assert!(!lp.contains("y_v_a = 0"));
    }

    #[test]
    fn empty_model_is_well_formed() {
        let mut s = Substrate::new(1);
        s.add_node("a", units(1), units(1)).unwrap();
        let lp = export_lp(&s, &Request::new(1)).unwrap();
        assert_eq!(lp.variables, 0);
        assert!(lp.text.contains("obj: 0 zero"));
        assert!(lp.text.contains(" c6_0_0: 0 zero <= 1\n"));
        assert!(lp.text.contains("zero = 0"));
    }

    #[test]
    fn fractional_coefficients() {
        assert_eq!(micros_text(1_500_000), "1.5");
        assert_eq!(micros_text(7), "0.000007");
        assert_eq!(micros_text(0), "0");
    }
}

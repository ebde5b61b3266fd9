//! Graphviz DOT emission. Output is deterministic: everything is iterated
//! in sorted order, so identical inputs yield byte-identical files.

use std::fmt::Write;

use crate::poset::Poset;
use crate::rewrite::Rule;
use crate::sitegraph::{Node, SiteGraph};

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render a poset: events as boxes labeled by rule name, precedence as
/// solid arrows, obstruction as dashed arrows. Only the transitive
/// reductions are drawn.
pub fn poset_dot(p: &Poset, ids: Option<&[String]>) -> String {
    let mut out = String::from("digraph poset {\n  rankdir=TB;\n  node [shape=box];\n");
    let name = |i: usize| match ids {
        Some(v) => v[i].clone(),
        None => format!("e{}", i + 1),
    };
    for i in p.events() {
        let _ = writeln!(out, "  \"{}\" [label=\"{}: {}\"];", esc(&name(i)), esc(&name(i)), esc(&p.labels[i]));
    }
    for (a, b) in p.reduced_precedence() {
        let _ = writeln!(out, "  \"{}\" -> \"{}\";", esc(&name(a)), esc(&name(b)));
    }
    for (a, b) in p.reduced_obstruction() {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [style=dashed, arrowhead=tee];",
            esc(&name(b)),
            esc(&name(a))
        );
    }
    out.push_str("}\n");
    out
}

/// Render a site-graph: agents as record nodes with numbered site ports,
/// bonds as edges between ports, explicitly free sites marked with a dot.
pub fn graph_dot(g: &SiteGraph) -> String {
    let mut out = String::from("graph sitegraph {\n  node [shape=record];\n");
    for (id, ty) in g.agents() {
        let mut fields = vec![format!("{}", ty)];
        let mut sites: Vec<u32> =
            g.nodes().filter(|&(a, _)| a == id).map(|(_, s)| s).collect();
        sites.sort_unstable();
        for s in sites {
            let mark = match g.edge_at(Node::Site(id, s)) {
                Some(e) if e.other(Node::Site(id, s)) == Some(Node::Free) => ".",
                _ => "",
            };
            fields.push(format!("<s{}> {}{}", s + 1, s + 1, mark));
        }
        let _ = writeln!(out, "  a{} [label=\"{{{}}}\"];", id.0, esc(&fields.join("|")));
    }
    for e in g.edges() {
        let (n1, n2) = e.endpoints();
        if let (Node::Site(a, i), Node::Site(b, j)) = (n1, n2) {
            let _ = writeln!(out, "  a{}:s{} -- a{}:s{};", a.0, i + 1, b.0, j + 1);
        }
    }
    out.push_str("}\n");
    out
}

/// Render the static influence relation between rules: solid arrows for
/// positive influence, dashed for negative.
pub fn influence_dot(rules: &[Rule], pos: &[(usize, usize)], neg: &[(usize, usize)]) -> String {
    let mut out = String::from("digraph influence {\n  node [shape=box];\n");
    for r in rules {
        let _ = writeln!(out, "  \"{}\";", esc(&r.name));
    }
    for &(i, j) in pos {
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [color=darkgreen];", esc(&rules[i].name), esc(&rules[j].name));
    }
    for &(i, j) in neg {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [color=red, style=dashed, arrowhead=tee];",
            esc(&rules[i].name),
            esc(&rules[j].name)
        );
    }
    out.push_str("}\n");
    out
}

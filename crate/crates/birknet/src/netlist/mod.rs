//! Netlist parsing and device models.
//!
//! The netlist format is line oriented:
//!
//! ```text
//! # comment
//! .nodes 5              number of nodes (optional, inferred when absent)
//! .ref 5                reference node (optional, defaults to the highest node)
//! .ic C1 0.25           initial charge (capacitor) or current (inductor)
//! R1 1 2 1.0            branch: <name> <from> <to> <model>
//! C2 5 1 expr: x + x^3  nonlinear characteristic of the variable x
//! ```
//!
//! The leading letter of a branch name selects the device kind (`R`, `L`,
//! `C`, case insensitive). A bare real is a linear constant; `expr:` starts
//! a nonlinear characteristic. After parsing, branches are reordered into
//! the block convention resistors, inductors, capacitors; the permutation
//! applied is recorded on the document.

pub mod expr;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
pub use expr::{parse_expr, Dual, ExprNode, Func};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum BranchKind {
    Resistor,
    Inductor,
    Capacitor,
}

impl BranchKind {
    fn from_name(name: &str) -> Option<BranchKind> {
        match name.chars().next()?.to_ascii_uppercase() {
            'R' => Some(BranchKind::Resistor),
            'L' => Some(BranchKind::Inductor),
            'C' => Some(BranchKind::Capacitor),
            _ => None,
        }
    }
}

/// Per-branch characteristic: a nonzero linear constant or an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceModel {
    LinearConst(f64),
    Expr(ExprNode),
}

impl DeviceModel {
    pub fn is_linear(&self) -> bool {
        matches!(self, DeviceModel::LinearConst(_))
    }

    /// Characteristic function of the device viewed through its kind.
    ///
    /// Returns `(f(x), f'(x))` where `f` is the voltage-current law: a linear
    /// resistor is `R(x) = Rx`, a linear capacitor `C(s) = s/C`, a linear
    /// inductor the constant `L(x) = L`. Expression devices evaluate the tree.
    pub fn law(&self, kind: BranchKind, x: f64) -> Result<(f64, f64)> {
        match self {
            DeviceModel::LinearConst(c) => Ok(match kind {
                BranchKind::Resistor => (c * x, *c),
                BranchKind::Capacitor => (x / c, 1.0 / c),
                BranchKind::Inductor => (*c, 0.0),
            }),
            DeviceModel::Expr(t) => t.eval(x),
        }
    }
}

/// Evaluate a device model at `x`, returning value and derivative.
///
/// A linear constant evaluates to `(c, 0)`; the caller applies the device
/// law (see [`DeviceModel::law`]). Expression devices propagate a dual
/// number through the tree.
pub fn eval_model(m: &DeviceModel, x: f64) -> Result<(f64, f64)> {
    match m {
        DeviceModel::LinearConst(c) => Ok((*c, 0.0)),
        DeviceModel::Expr(t) => t.eval(x),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    pub kind: BranchKind,
    pub from_node: usize,
    pub to_node: usize,
    pub model: DeviceModel,
}

/// Parsed and normalized netlist document.
#[derive(Debug, Clone)]
pub struct NetlistDoc {
    /// Branches in block order: resistors, inductors, capacitors.
    pub branches: Vec<Branch>,
    pub node_count: usize,
    pub reference_node: usize,
    /// Branch name to initial charge (capacitors) or current (inductors).
    pub initial_conditions: BTreeMap<String, f64>,
    /// `permutation[i]` is the source position of normalized branch `i`.
    pub permutation: Vec<usize>,
}

impl NetlistDoc {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn count_of(&self, kind: BranchKind) -> usize {
        self.branches.iter().filter(|b| b.kind == kind).count()
    }

    pub fn resistor_count(&self) -> usize {
        self.count_of(BranchKind::Resistor)
    }

    pub fn inductor_count(&self) -> usize {
        self.count_of(BranchKind::Inductor)
    }

    pub fn capacitor_count(&self) -> usize {
        self.count_of(BranchKind::Capacitor)
    }

    pub fn has_nonlinear_device(&self) -> bool {
        self.branches.iter().any(|b| !b.model.is_linear())
    }

    /// Initial condition for a branch, defaulting to zero.
    pub fn initial_condition(&self, name: &str) -> f64 {
        self.initial_conditions.get(name).copied().unwrap_or(0.0)
    }
}

/// Parse a netlist and normalize the branch order.
pub fn parse_netlist(text: &str) -> Result<NetlistDoc> {
    let mut branches: Vec<Branch> = Vec::new();
    let mut node_count: Option<usize> = None;
    let mut reference_node: Option<usize> = None;
    let mut ics: Vec<(usize, String, f64)> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        };
        let toks = tokens_with_cols(line);
        if toks.is_empty() {
            continue;
        }
        let (col0, head) = toks[0];
        if let Some(directive) = head.strip_prefix('.') {
            match directive.to_ascii_lowercase().as_str() {
                "nodes" => {
                    let (c, t) = expect_tok(&toks, 1, line_no, "node count")?;
                    let n: usize = t.parse().map_err(|_| {
                        parse_err(line_no, c, &format!("invalid node count `{t}`"))
                    })?;
                    if n == 0 {
                        return Err(parse_err(line_no, c, "node count must be positive"));
                    }
                    node_count = Some(n);
                }
                "ref" => {
                    let (c, t) = expect_tok(&toks, 1, line_no, "reference node")?;
                    let n: usize = t.parse().map_err(|_| {
                        parse_err(line_no, c, &format!("invalid reference node `{t}`"))
                    })?;
                    reference_node = Some(n);
                }
                "ic" => {
                    let (_, name) = expect_tok(&toks, 1, line_no, "branch name")?;
                    let (c, t) = expect_tok(&toks, 2, line_no, "initial value")?;
                    let v: f64 = t.parse().map_err(|_| {
                        parse_err(line_no, c, &format!("invalid initial value `{t}`"))
                    })?;
                    ics.push((line_no, name.to_string(), v));
                }
                other => {
                    return Err(parse_err(
                        line_no,
                        col0,
                        &format!("unknown directive `.{other}`"),
                    ));
                }
            }
            continue;
        }

        // branch line: <name> <from> <to> <model>
        let kind = BranchKind::from_name(head).ok_or_else(|| {
            parse_err(
                line_no,
                col0,
                &format!("unknown device letter in `{head}` (expected R, L, or C)"),
            )
        })?;
        let (cf, ft) = expect_tok(&toks, 1, line_no, "from node")?;
        let from_node: usize = ft
            .parse()
            .map_err(|_| parse_err(line_no, cf, &format!("invalid node index `{ft}`")))?;
        let (ct, tt) = expect_tok(&toks, 2, line_no, "to node")?;
        let to_node: usize = tt
            .parse()
            .map_err(|_| parse_err(line_no, ct, &format!("invalid node index `{tt}`")))?;
        let (cm, mt) = expect_tok(&toks, 3, line_no, "device model")?;

        let model = if mt.to_ascii_lowercase().starts_with("expr:") {
            // everything after `expr:` on the line is the expression
            let after = cm - 1 + "expr:".len();
            let src = &line[after.min(line.len())..];
            let tree = expr::parse_expr(src).map_err(|e| match e {
                Error::Parse { col, msg, .. } => parse_err(line_no, after + col, &msg),
                other => other,
            })?;
            DeviceModel::Expr(tree)
        } else {
            if toks.len() > 4 {
                let (c, t) = toks[4];
                return Err(parse_err(line_no, c, &format!("unexpected token `{t}`")));
            }
            let v: f64 = mt
                .parse()
                .map_err(|_| parse_err(line_no, cm, &format!("invalid model value `{mt}`")))?;
            if v == 0.0 {
                return Err(parse_err(line_no, cm, "linear device value must be nonzero"));
            }
            DeviceModel::LinearConst(v)
        };

        if from_node == 0 || to_node == 0 {
            return Err(parse_err(line_no, cf, "node indices are 1-based"));
        }
        if from_node == to_node {
            return Err(parse_err(
                line_no,
                cf,
                &format!("branch `{head}` is a self-loop on node {from_node}"),
            ));
        }
        if branches.iter().any(|b| b.name == head) {
            return Err(parse_err(
                line_no,
                col0,
                &format!("duplicate branch name `{head}`"),
            ));
        }
        branches.push(Branch {
            name: head.to_string(),
            kind,
            from_node,
            to_node,
            model,
        });
    }

    if branches.is_empty() {
        return Err(parse_err(1, 1, "no branches"));
    }

    let max_node = branches
        .iter()
        .map(|b| b.from_node.max(b.to_node))
        .max()
        .unwrap();
    let node_count = node_count.unwrap_or(max_node);
    if max_node > node_count {
        return Err(parse_err(
            1,
            1,
            &format!("node index {max_node} exceeds declared node count {node_count}"),
        ));
    }
    let reference_node = reference_node.unwrap_or(node_count);
    if reference_node == 0 || reference_node > node_count {
        return Err(parse_err(
            1,
            1,
            &format!("reference node {reference_node} out of range 1..={node_count}"),
        ));
    }

    // stable block reordering: resistors, inductors, capacitors
    let mut permutation: Vec<usize> = (0..branches.len()).collect();
    permutation.sort_by_key(|&i| branches[i].kind);
    let branches: Vec<Branch> = permutation.iter().map(|&i| branches[i].clone()).collect();

    let mut initial_conditions = BTreeMap::new();
    for (line_no, name, v) in ics {
        let branch = branches.iter().find(|b| b.name == name).ok_or_else(|| {
            parse_err(line_no, 1, &format!(".ic names unknown branch `{name}`"))
        })?;
        if branch.kind == BranchKind::Resistor {
            return Err(parse_err(
                line_no,
                1,
                &format!(".ic on resistor `{name}` (only capacitors and inductors carry initial data)"),
            ));
        }
        initial_conditions.insert(name, v);
    }

    Ok(NetlistDoc {
        branches,
        node_count,
        reference_node,
        initial_conditions,
        permutation,
    })
}

fn parse_err(line: usize, col: usize, msg: &str) -> Error {
    Error::Parse { line, col, msg: msg.to_string() }
}

fn expect_tok<'a>(
    toks: &[(usize, &'a str)],
    idx: usize,
    line: usize,
    what: &str,
) -> Result<(usize, &'a str)> {
    toks.get(idx).copied().ok_or_else(|| {
        let col = toks.last().map(|(c, t)| c + t.len()).unwrap_or(1);
        parse_err(line, col, &format!("missing {what}"))
    })
}

fn tokens_with_cols(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// The worked six-branch example: one resistor, two inductors, three
/// capacitors over five nodes with reference node 5. Used widely in tests.
pub const SIX_BRANCH_EXAMPLE: &str = "\
.nodes 5
.ref 5
R1 1 2 1.0
L1 4 5 1.0
L2 2 3 1.0
C1 2 4 1.0
C2 5 1 1.0
C3 3 4 1.0
";

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_six_branch_example() {
        let doc = parse_netlist(SIX_BRANCH_EXAMPLE).unwrap();
        assert_eq!(doc.resistor_count(), 1);
        assert_eq!(doc.inductor_count(), 2);
        assert_eq!(doc.capacitor_count(), 3);
        assert_eq!(doc.branch_count(), 6);
        assert_eq!(doc.node_count, 5);
        assert_eq!(doc.reference_node, 5);
    }

    #[test]
    fn empty_netlist_is_rejected() {
        let err = parse_netlist("# nothing here\n").unwrap_err();
        assert!(err.to_string().contains("no branches"));
    }

    #[test]
    fn expr_model_evaluates_with_derivative() {
        let doc = parse_netlist(".nodes 2\nC1 1 2 expr: x^3 + x\nL1 2 1 1.0\n").unwrap();
        let cap = doc
            .branches
            .iter()
            .find(|b| b.kind == BranchKind::Capacitor)
            .unwrap();
        assert_eq!(eval_model(&cap.model, 2.0).unwrap(), (10.0, 13.0));
    }

    #[test]
    fn linear_const_eval_model() {
        assert_eq!(
            eval_model(&DeviceModel::LinearConst(2.5), 7.0).unwrap(),
            (2.5, 0.0)
        );
    }

    #[test]
    fn normalization_reorders_blocks() {
        let text = "C9 1 2 1.0\nR2 2 3 2.0\nL4 3 1 3.0\n";
        let doc = parse_netlist(text).unwrap();
        let kinds: Vec<_> = doc.branches.iter().map(|b| b.kind).collect();
        assert_eq!(
            kinds,
            vec![BranchKind::Resistor, BranchKind::Inductor, BranchKind::Capacitor]
        );
        // permutation points back at source positions and endpoints travel along
        assert_eq!(doc.permutation, vec![1, 2, 0]);
        assert_eq!(doc.branches[2].name, "C9");
        assert_eq!((doc.branches[2].from_node, doc.branches[2].to_node), (1, 2));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse_netlist("X1 1 2 1.0\n").is_err()); // unknown letter
        assert!(parse_netlist("R1 1 1 1.0\n").is_err()); // self-loop
        assert!(parse_netlist("R1 1 2 1.0\nR1 2 3 1.0\n").is_err()); // duplicate
        assert!(parse_netlist("R1 1 2 0.0\n").is_err()); // zero constant
        assert!(parse_netlist(".nodes 2\n.ref 7\nR1 1 2 1.0\n").is_err()); // ref range
        assert!(parse_netlist("R1 1 2 1.0\n.ic R1 1.0\n").is_err()); // ic on resistor
        assert!(parse_netlist("R1 1 2 1.0\n.ic C9 1.0\n").is_err()); // unknown ic target
        assert!(parse_netlist(".nodes 2\nR1 1 5 1.0\n").is_err()); // node out of range
    }

    #[test]
    fn parse_error_carries_position() {
        match parse_netlist("R1 1 2 abc\n") {
            Err(Error::Parse { line, col, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(col, 8);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn law_views_linear_devices() {
        let r = DeviceModel::LinearConst(3.0);
        assert_eq!(r.law(BranchKind::Resistor, 2.0).unwrap(), (6.0, 3.0));
        assert_eq!(r.law(BranchKind::Capacitor, 6.0).unwrap(), (2.0, 1.0 / 3.0));
        assert_eq!(r.law(BranchKind::Inductor, 5.0).unwrap(), (3.0, 0.0));
    }

    proptest! {
        // normalization is a bijection preserving endpoints
        #[test]
        fn normalization_is_a_permutation(seq in proptest::collection::vec(0u8..3, 1..12)) {
            let mut text = String::new();
            let mut nodes = 2;
            for (i, k) in seq.iter().enumerate() {
                let letter = ["R", "L", "C"][*k as usize];
                let from = 1 + (i % nodes);
                let to = 1 + ((i + 1) % nodes);
                if from != to {
                    text.push_str(&format!("{letter}{i} {from} {to} 1.0\n"));
                }
                nodes = (nodes % 4) + 2;
            }
            prop_assume!(!text.is_empty());
            let doc = parse_netlist(&text).unwrap();
            let mut seen = vec![false; doc.branch_count()];
            for &p in &doc.permutation {
                prop_assert!(!seen[p]);
                seen[p] = true;
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}

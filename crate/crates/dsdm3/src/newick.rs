//! Strict Newick parser and serializer for the phylogenetic trees driving
//! the Dirichlet-tree count generator.
//!
//! Grammar (whitespace allowed between tokens):
//!
//! ```text
//! tree    := subtree ';'
//! subtree := leaf | '(' subtree (',' subtree)+ ')' label? length?
//! leaf    := label length?
//! label   := [^(),:;<ws>]+
//! length  := ':' float
//! ```
//!
//! The parse is strict: unbalanced parentheses, empty sibling lists,
//! single-child internal nodes, duplicate labels, trailing input and trees
//! with fewer than two leaves are all rejected, with the byte offset of the
//! problem. Internal-node labels are accepted and preserved.

use crate::{Error, Result};

/// One node of a rooted tree stored in an arena; node 0 is the root.
/// Internal nodes carry one Dirichlet concentration per child edge
/// (1.0 each after parsing) used by the Dirichlet-tree generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub label: Option<String>,
    pub branch_length: Option<f64>,
    pub concentrations: Vec<f64>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Rooted tree with uniquely labeled leaves, preserving leaf order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    nodes: Vec<Node>,
}

impl PhyloTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn node_mut(&mut self, idx: usize) -> &mut Node {
        &mut self.nodes[idx]
    }

    /// Leaf node indices in left-to-right input order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(0, &mut out);
        out
    }

    fn collect_leaves(&self, idx: usize, out: &mut Vec<usize>) {
        if self.nodes[idx].is_leaf() {
            out.push(idx);
        } else {
            for &c in &self.nodes[idx].children {
                self.collect_leaves(c, out);
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves()
            .into_iter()
            .map(|idx| self.nodes[idx].label.clone().expect("leaves are labeled"))
            .collect()
    }

    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| !self.nodes[i].is_leaf())
            .collect()
    }

    /// Star tree: a root whose children are the given leaves, with unit
    /// concentrations. Descending it is a plain Dirichlet-multinomial.
    pub fn star(labels: &[&str]) -> Result<PhyloTree> {
        if labels.len() < 2 {
            return Err(Error::InvalidArgument("star tree needs ≥ 2 leaves".into()));
        }
        let mut nodes = vec![Node {
            parent: None,
            children: Vec::new(),
            label: None,
            branch_length: None,
            concentrations: vec![1.0; labels.len()],
        }];
        for (i, &l) in labels.iter().enumerate() {
            nodes.push(Node {
                parent: Some(0),
                children: Vec::new(),
                label: Some(l.to_string()),
                branch_length: None,
                concentrations: Vec::new(),
            });
            nodes[0].children.push(i + 1);
        }
        Ok(PhyloTree { nodes })
    }

    /// Replace every internal node's concentrations (one value per child).
    pub fn set_uniform_concentrations(&mut self, value: f64) {
        for node in &mut self.nodes {
            let deg = node.children.len();
            node.concentrations = vec![value; deg];
        }
    }

    /// Serialize back to Newick; `parse` of the output reconstructs an
    /// identical tree.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_node(0, &mut out);
        out.push(';');
        out
    }

    fn write_node(&self, idx: usize, out: &mut String) {
        let node = &self.nodes[idx];
        if !node.is_leaf() {
            out.push('(');
            for (pos, &c) in node.children.iter().enumerate() {
                if pos > 0 {
                    out.push(',');
                }
                self.write_node(c, out);
            }
            out.push(')');
        }
        if let Some(label) = &node.label {
            out.push_str(label);
        }
        if let Some(len) = node.branch_length {
            out.push(':');
            out.push_str(&format!("{len}"));
        }
    }
}

/// Parse a strict Newick expression terminated by ';'.
pub fn parse_newick(text: &str) -> Result<PhyloTree> {
    Parser {
        bytes: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
    }
    .parse()
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::NewickSyntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<PhyloTree> {
        self.skip_ws();
        let root = self.parse_subtree(None)?;
        debug_assert_eq!(root, 0);
        self.skip_ws();
        match self.peek() {
            Some(b';') => self.pos += 1,
            Some(_) => return Err(self.error("expected ';'")),
            None => return Err(self.error("unexpected end of input: expected ';'")),
        }
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(self.error("trailing input after ';'"));
        }
        let tree = PhyloTree { nodes: self.nodes };
        if tree.n_leaves() < 2 {
            return Err(Error::NewickSyntax {
                offset: 0,
                message: "tree must have at least two leaves".into(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for node in &tree.nodes {
            if let Some(label) = &node.label {
                if !seen.insert(label.clone()) {
                    return Err(Error::NewickSyntax {
                        offset: 0,
                        message: format!("duplicate label '{label}'"),
                    });
                }
            }
        }
        Ok(tree)
    }

    fn parse_subtree(&mut self, parent: Option<usize>) -> Result<usize> {
        self.skip_ws();
        let idx = self.nodes.len();
        self.nodes.push(Node {
            parent,
            children: Vec::new(),
            label: None,
            branch_length: None,
            concentrations: Vec::new(),
        });
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                let child = self.parse_subtree(Some(idx))?;
                self.nodes[idx].children.push(child);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                    }
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(_) => {
                        return Err(self.error("expected ',' or ')'"));
                    }
                    None => {
                        return Err(self.error("unbalanced parenthesis: expected ',' or ')'"));
                    }
                }
            }
            if self.nodes[idx].children.len() < 2 {
                return Err(self.error("internal node needs at least two children"));
            }
            self.nodes[idx].concentrations = vec![1.0; self.nodes[idx].children.len()];
            self.skip_ws();
            if let Some(label) = self.parse_label()? {
                self.nodes[idx].label = Some(label);
            }
        } else {
            match self.parse_label()? {
                Some(label) => self.nodes[idx].label = Some(label),
                None => return Err(self.error("expected a label or '('")),
            }
        }
        self.skip_ws();
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.nodes[idx].branch_length = Some(self.parse_number()?);
        }
        Ok(idx)
    }

    fn parse_label(&mut self) -> Result<Option<String>> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| !matches!(b, b'(' | b')' | b',' | b':' | b';') && !b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Ok(None);
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| self.error("label is not valid UTF-8"))?;
        Ok(Some(s.to_string()))
    }

    fn parse_number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| matches!(b, b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E'))
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected a branch length"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::NewickSyntax {
                offset: start,
                message: "invalid branch length".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn parses_two_leaf_tree() {
        let t = parse_newick("(A,B);").unwrap();
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.leaf_labels(), vec!["A", "B"]);
        assert_eq!(t.node(0).children.len(), 2);
        assert_eq!(t.node(0).concentrations, vec![1.0, 1.0]);
    }

    #[test]
    fn parses_nested_tree_with_lengths() {
        let t = parse_newick("(A:0.1,(B:0.2,C:0.3):0.4);").unwrap();
        assert_eq!(t.n_leaves(), 3);
        assert_eq!(t.leaf_labels(), vec!["A", "B", "C"]);
        // One internal node besides the root.
        assert_eq!(t.internal_nodes().len(), 2);
        let leaves = t.leaves();
        assert_eq!(t.node(leaves[0]).branch_length, Some(0.1));
        assert_eq!(t.node(leaves[2]).branch_length, Some(0.3));
        let inner = t.node(0).children[1];
        assert_eq!(t.node(inner).branch_length, Some(0.4));
    }

    #[test]
    fn unbalanced_parenthesis_reports_offset() {
        let err = parse_newick("(A,B").unwrap_err();
        match err {
            Error::NewickSyntax { offset, .. } => assert_eq!(offset, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_labels() {
        let err = parse_newick("(A,A);").unwrap_err();
        assert!(err.to_string().contains("duplicate label 'A'"));
    }

    #[test]
    fn rejects_single_child_and_empty_sibling() {
        assert!(parse_newick("(A);").is_err());
        assert!(parse_newick("(,A);").is_err());
        assert!(parse_newick("();").is_err());
        assert!(parse_newick("A;").is_err()); // fewer than two leaves
        assert!(parse_newick("(A,B); junk").is_err());
        assert!(parse_newick("(A,B)").is_err());
    }

    #[test]
    fn keeps_internal_labels() {
        let t = parse_newick("((A,B)inner:1.5,C)root;").unwrap();
        let inner = t.node(0).children[0];
        assert_eq!(t.node(inner).label.as_deref(), Some("inner"));
        assert_eq!(t.node(0).label.as_deref(), Some("root"));
    }

    fn random_tree<R: Rng>(rng: &mut R, next_label: &mut usize, depth: usize) -> String {
        if depth == 0 || rng.gen_bool(0.4) {
            let l = *next_label;
            *next_label += 1;
            if rng.gen_bool(0.5) {
                format!("L{l}:{:.3}", rng.gen_range(0.01..2.0))
            } else {
                format!("L{l}")
            }
        } else {
            let n_children = rng.gen_range(2..=4);
            let parts: Vec<String> = (0..n_children)
                .map(|_| random_tree(rng, next_label, depth - 1))
                .collect();
            format!("({})", parts.join(","))
        }
    }

    #[test]
    fn serialize_parse_roundtrip() {
        let mut rng = crate::sampler::chain_rng(8, 0);
        for _ in 0..60 {
            let mut next = 0usize;
            let text = format!(
                "({},{});",
                random_tree(&mut rng, &mut next, 3),
                random_tree(&mut rng, &mut next, 3)
            );
            let tree = parse_newick(&text).unwrap();
            let serialized = tree.to_newick();
            let reparsed = parse_newick(&serialized).unwrap();
            assert_eq!(reparsed, tree);
            assert_eq!(reparsed.to_newick(), serialized);
        }
    }
}

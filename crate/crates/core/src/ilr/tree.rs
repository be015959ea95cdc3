//! Sequential binary partitions of the class labels.

use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BalanceNode {
    Leaf(usize),
    Split {
        left: Box<BalanceNode>,
        right: Box<BalanceNode>,
    },
}

impl BalanceNode {
    pub fn split(left: BalanceNode, right: BalanceNode) -> Self {
        BalanceNode::Split {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            BalanceNode::Leaf(k) => out.push(*k),
            BalanceNode::Split { left, right } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    fn collect_splits(&self, out: &mut Vec<Balance>) {
        if let BalanceNode::Split { left, right } = self {
            left.collect_splits(out);
            right.collect_splits(out);
            out.push(Balance {
                numerator: left.leaves(),
                denominator: right.leaves(),
            });
        }
    }

    fn to_json(&self) -> Value {
        match self {
            BalanceNode::Leaf(k) => json!({ "class": k }),
            BalanceNode::Split { left, right } => {
                json!({ "left": left.to_json(), "right": right.to_json() })
            }
        }
    }

    fn from_json(value: &Value, class_names: Option<&[String]>) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::MalformedTree(format!("expected an object, got {value}")))?;
        if let Some(class) = obj.get("class") {
            if obj.len() != 1 {
                return Err(Error::MalformedTree(
                    "a class node must only carry the \"class\" key".into(),
                ));
            }
            return Ok(BalanceNode::Leaf(resolve_class(class, class_names)?));
        }
        match (obj.get("left"), obj.get("right")) {
            (Some(l), Some(r)) if obj.len() == 2 => Ok(BalanceNode::split(
                Self::from_json(l, class_names)?,
                Self::from_json(r, class_names)?,
            )),
            _ => Err(Error::MalformedTree(format!(
                "node must be {{\"left\", \"right\"}} or {{\"class\"}}: {value}"
            ))),
        }
    }
}

fn resolve_class(value: &Value, class_names: Option<&[String]>) -> Result<usize> {
    match value {
        Value::Number(n) => n
            .as_u64()
            .map(|k| k as usize)
            .ok_or_else(|| Error::MalformedTree(format!("invalid class index {n}"))),
        Value::String(s) => {
            let names = class_names.ok_or_else(|| {
                Error::MalformedTree(format!("class name {s:?} given but no class names known"))
            })?;
            names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| Error::MalformedTree(format!("unknown class name {s:?}")))
        }
        other => Err(Error::MalformedTree(format!("invalid class {other}"))),
    }
}

/// One balance: log-ratio of the geometric mean of `numerator` parts over
/// the geometric mean of `denominator` parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Balance {
    pub numerator: Vec<usize>,
    pub denominator: Vec<usize>,
}

/// A binary tree whose leaves are the class indices `0..D`, each exactly once.
///
/// Internal nodes are numbered in post-order (left subtree, right subtree,
/// node), so the deepest split of a chain is coordinate 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceTree {
    root: BalanceNode,
    classes: usize,
}

impl BalanceTree {
    pub fn new(root: BalanceNode) -> Result<Self> {
        if matches!(root, BalanceNode::Leaf(_)) {
            return Err(Error::MalformedTree(
                "a tree needs at least two classes".into(),
            ));
        }
        let mut leaves = root.leaves();
        let classes = leaves.len();
        leaves.sort_unstable();
        for (expected, got) in leaves.iter().enumerate() {
            if *got != expected {
                return Err(Error::MalformedTree(if leaves.contains(&expected) {
                    format!("class {expected} appears more than once")
                } else {
                    format!("class {expected} is missing (leaves: {leaves:?})")
                }));
            }
        }
        Ok(BalanceTree { root, classes })
    }

    /// The chain `((..((0,1),2)..),D-1)` matching the Gram-Schmidt basis.
    pub fn chain(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::DimensionTooSmall(classes));
        }
        let mut node = BalanceNode::Leaf(0);
        for k in 1..classes {
            node = BalanceNode::split(node, BalanceNode::Leaf(k));
        }
        Self::new(node)
    }

    pub fn root(&self) -> &BalanceNode {
        &self.root
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Balances in coordinate order.
    pub fn balances(&self) -> Vec<Balance> {
        let mut out = Vec::with_capacity(self.classes - 1);
        self.root.collect_splits(&mut out);
        out
    }

    pub fn to_json(&self) -> Value {
        self.root.to_json()
    }

    pub fn from_json(value: &Value, class_names: Option<&[String]>) -> Result<Self> {
        Self::new(BalanceNode::from_json(value, class_names)?)
    }

    pub fn from_json_str(s: &str, class_names: Option<&[String]>) -> Result<Self> {
        let value: Value = serde_json::from_str(s)
            .map_err(|e| Error::MalformedTree(format!("invalid JSON: {e}")))?;
        Self::from_json(&value, class_names)
    }
}

impl fmt::Display for BalanceNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BalanceNode::Leaf(k) => write!(f, "{k}"),
            BalanceNode::Split { left, right } => write!(f, "({left},{right})"),
        }
    }
}

impl fmt::Display for BalanceTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl serde::Serialize for BalanceTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for BalanceTree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        BalanceTree::from_json(&value, None).map_err(serde::de::Error::custom)
    }
}

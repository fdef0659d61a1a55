//! Structure specs: nested, named trees of typed array leaves.

use crate::error::{Error, Result};
use std::fmt;

/// Element kind of a leaf array. The set is closed so that serialization
/// stays bit-exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElemKind {
    F32,
    F64,
    I64,
    Bool,
    U8,
}

impl ElemKind {
    pub fn name(self) -> &'static str {
        match self {
            ElemKind::F32 => "f32",
            ElemKind::F64 => "f64",
            ElemKind::I64 => "i64",
            ElemKind::Bool => "bool",
            ElemKind::U8 => "u8",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "f32" => ElemKind::F32,
            "f64" => ElemKind::F64,
            "i64" => ElemKind::I64,
            "bool" => ElemKind::Bool,
            "u8" => ElemKind::U8,
            _ => return Err(Error::Parse(format!("unknown element kind `{s}`"))),
        })
    }

    /// Size of one scalar in the raw dump format, in bytes.
    pub fn byte_width(self) -> usize {
        match self {
            ElemKind::F32 => 4,
            ElemKind::F64 => 8,
            ElemKind::I64 => 8,
            ElemKind::Bool => 1,
            ElemKind::U8 => 1,
        }
    }
}

impl fmt::Display for ElemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One node of a structure spec: either a typed leaf with a trailing
/// (per-element) shape, or a record of uniquely named child nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecNode {
    Leaf { kind: ElemKind, shape: Vec<usize> },
    Record { fields: Vec<(String, SpecNode)> },
}

impl SpecNode {
    fn validate(&self) -> Result<()> {
        match self {
            SpecNode::Leaf { .. } => Ok(()),
            SpecNode::Record { fields } => {
                for (i, (name, node)) in fields.iter().enumerate() {
                    if name.is_empty() {
                        return Err(Error::EmptyField);
                    }
                    if fields[..i].iter().any(|(n, _)| n == name) {
                        return Err(Error::DuplicateField(name.clone()));
                    }
                    node.validate()?;
                }
                Ok(())
            }
        }
    }

    fn count_leaves(&self) -> usize {
        match self {
            SpecNode::Leaf { .. } => 1,
            SpecNode::Record { fields } => fields.iter().map(|(_, n)| n.count_leaves()).sum(),
        }
    }
}

/// A structure spec: the schema shared by every [`super::StructArray`]
/// allocated from it. Two specs are equal iff their trees, names, kinds,
/// and trailing shapes match exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructSpec {
    root: SpecNode,
}

/// Flat description of one leaf: dotted path, kind, trailing shape.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafDesc {
    pub path: String,
    pub kind: ElemKind,
    pub shape: Vec<usize>,
}

impl StructSpec {
    pub fn new(root: SpecNode) -> Result<Self> {
        root.validate()?;
        Ok(StructSpec { root })
    }

    /// Convenience constructor for a flat record of leaves.
    pub fn record(fields: Vec<(&str, SpecNode)>) -> Result<Self> {
        Self::new(SpecNode::Record {
            fields: fields.into_iter().map(|(n, s)| (n.to_string(), s)).collect(),
        })
    }

    pub fn leaf(kind: ElemKind, shape: Vec<usize>) -> Self {
        StructSpec { root: SpecNode::Leaf { kind, shape } }
    }

    pub fn root(&self) -> &SpecNode {
        &self.root
    }

    pub fn leaf_count(&self) -> usize {
        self.root.count_leaves()
    }

    /// Leaves in depth-first field order, with dotted paths.
    pub fn leaves(&self) -> Vec<LeafDesc> {
        let mut out = Vec::with_capacity(self.leaf_count());
        collect_leaves(&self.root, String::new(), &mut out);
        out
    }

    /// Index of the leaf at a dotted path (DFS order), if present.
    pub fn leaf_index(&self, path: &str) -> Option<usize> {
        self.leaves().iter().position(|l| l.path == path)
    }

    /// Canonical text form: one `name: kind[shape]` line per leaf, records
    /// as `name:` with two-space-indented children. A bare-leaf root prints
    /// as `kind[shape]` alone.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        fmt_node(&self.root, None, 0, &mut s);
        s
    }

    /// Parse the canonical text form produced by [`StructSpec::to_text`].
    pub fn parse_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let indent = l.len() - l.trim_start_matches(' ').len();
                (indent / 2, l.trim())
            })
            .collect();
        if lines.is_empty() {
            return Err(Error::Parse("empty spec text".into()));
        }
        // Bare-leaf root: a single line with no field name.
        if lines.len() == 1 && !lines[0].1.contains(':') {
            let (kind, shape) = parse_leaf_ty(lines[0].1)?;
            return Ok(StructSpec::leaf(kind, shape));
        }
        let mut pos = 0;
        let fields = parse_fields(&lines, &mut pos, 0)?;
        if pos != lines.len() {
            return Err(Error::Parse(format!("unexpected line `{}`", lines[pos].1)));
        }
        StructSpec::new(SpecNode::Record { fields })
    }
}

impl fmt::Display for StructSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn collect_leaves(node: &SpecNode, prefix: String, out: &mut Vec<LeafDesc>) {
    match node {
        SpecNode::Leaf { kind, shape } => out.push(LeafDesc {
            path: prefix,
            kind: *kind,
            shape: shape.clone(),
        }),
        SpecNode::Record { fields } => {
            for (name, child) in fields {
                let p = if prefix.is_empty() {
                    name.clone()
                } else {
                    format!("{prefix}.{name}")
                };
                collect_leaves(child, p, out);
            }
        }
    }
}

fn fmt_node(node: &SpecNode, name: Option<&str>, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        SpecNode::Leaf { kind, shape } => {
            let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            match name {
                Some(n) => out.push_str(&format!("{pad}{n}: {kind}[{}]\n", dims.join(","))),
                None => out.push_str(&format!("{pad}{kind}[{}]\n", dims.join(","))),
            }
        }
        SpecNode::Record { fields } => {
            if let Some(n) = name {
                out.push_str(&format!("{pad}{n}:\n"));
            }
            let child_depth = if name.is_some() { depth + 1 } else { depth };
            for (n, child) in fields {
                fmt_node(child, Some(n), child_depth, out);
            }
        }
    }
}

fn parse_leaf_ty(s: &str) -> Result<(ElemKind, Vec<usize>)> {
    let open = s
        .find('[')
        .ok_or_else(|| Error::Parse(format!("missing `[` in leaf type `{s}`")))?;
    if !s.ends_with(']') {
        return Err(Error::Parse(format!("missing `]` in leaf type `{s}`")));
    }
    let kind = ElemKind::parse(s[..open].trim())?;
    let dims = s[open + 1..s.len() - 1].trim();
    let shape = if dims.is_empty() {
        Vec::new()
    } else {
        dims.split(',')
            .map(|d| {
                d.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad dim `{d}`")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok((kind, shape))
}

fn parse_fields(
    lines: &[(usize, &str)],
    pos: &mut usize,
    depth: usize,
) -> Result<Vec<(String, SpecNode)>> {
    let mut fields = Vec::new();
    while *pos < lines.len() {
        let (indent, line) = lines[*pos];
        if indent < depth {
            break;
        }
        if indent > depth {
            return Err(Error::Parse(format!("unexpected indent at `{line}`")));
        }
        let colon = line
            .find(':')
            .ok_or_else(|| Error::Parse(format!("missing `:` in `{line}`")))?;
        let name = line[..colon].trim().to_string();
        let rest = line[colon + 1..].trim();
        *pos += 1;
        let node = if rest.is_empty() {
            SpecNode::Record { fields: parse_fields(lines, pos, depth + 1)? }
        } else {
            let (kind, shape) = parse_leaf_ty(rest)?;
            SpecNode::Leaf { kind, shape }
        };
        fields.push((name, node));
    }
    Ok(fields)
}

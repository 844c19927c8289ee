//! Reader and writer for the ASCII Gmsh 2.2 subset used for volume meshes.
//!
//! Only `$MeshFormat`, `$Nodes` and `$Elements` are interpreted. Volume
//! elements must be linear tetrahedra (type 4) or trilinear hexahedra
//! (type 5); the first tag is the tissue label. Points, lines and surface
//! elements are ignored, as are unknown sections.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::Mesh;
use crate::element::ElementKind;
use crate::{Error, Result, Vec3};

pub fn read_msh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msh(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() {
                self.last = i + 1;
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line()
            .ok_or_else(|| Error::parse(self.path, self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(PathBuf::from(self.path), line, msg)
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_>, line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| lines.err(line, format!("invalid {what} `{tok}`")))
}

/// Parse mesh text; `path` is used for error messages only.
pub fn parse_msh(text: &str, path: &Path) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path,
        last: 0,
    };
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut kind: Option<ElementKind> = None;
    let mut cells: Vec<usize> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut raw_cells: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut saw_format = false;
    let mut saw_nodes = false;
    let mut saw_elements = false;

    while let Some((ln, line)) = lines.next_line() {
        match line {
            "$MeshFormat" => {
                let (ln, header) = lines.expect_line("format header")?;
                let mut tok = header.split_whitespace();
                let version: f64 = parse_num(&lines, ln, tok.next(), "version")?;
                let file_type: u32 = parse_num(&lines, ln, tok.next(), "file type")?;
                if !(2.0..3.0).contains(&version) {
                    return Err(lines.err(ln, format!("unsupported MSH version {version}, expected 2.2")));
                }
                if file_type != 0 {
                    return Err(lines.err(ln, "binary MSH files are not supported"));
                }
                let (ln, end) = lines.expect_line("$EndMeshFormat")?;
                if end != "$EndMeshFormat" {
                    return Err(lines.err(ln, "expected $EndMeshFormat"));
                }
                saw_format = true;
            }
            "$Nodes" => {
                let (ln, count) = lines.expect_line("node count")?;
                let n: usize = parse_num(&lines, ln, Some(count), "node count")?;
                vertices.reserve(n);
                for _ in 0..n {
                    let (ln, l) = lines.expect_line("node")?;
                    let mut tok = l.split_whitespace();
                    let id: u64 = parse_num(&lines, ln, tok.next(), "node id")?;
                    let x: f64 = parse_num(&lines, ln, tok.next(), "x coordinate")?;
                    let y: f64 = parse_num(&lines, ln, tok.next(), "y coordinate")?;
                    let z: f64 = parse_num(&lines, ln, tok.next(), "z coordinate")?;
                    if node_index.insert(id, vertices.len()).is_some() {
                        return Err(lines.err(ln, format!("duplicate node id {id}")));
                    }
                    vertices.push(Vec3::new(x, y, z));
                }
                let (ln, end) = lines.expect_line("$EndNodes")?;
                if end != "$EndNodes" {
                    return Err(lines.err(ln, "expected $EndNodes"));
                }
                saw_nodes = true;
            }
            "$Elements" => {
                let (ln, count) = lines.expect_line("element count")?;
                let n: usize = parse_num(&lines, ln, Some(count), "element count")?;
                let mut skipped = 0usize;
                for _ in 0..n {
                    let (ln, l) = lines.expect_line("element")?;
                    let mut tok = l.split_whitespace();
                    let _id: u64 = parse_num(&lines, ln, tok.next(), "element id")?;
                    let ty: u32 = parse_num(&lines, ln, tok.next(), "element type")?;
                    let ntags: usize = parse_num(&lines, ln, tok.next(), "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(parse_num::<i64>(&lines, ln, tok.next(), "tag")?);
                    }
                    let this_kind = match ty {
                        4 => ElementKind::Tetrahedron,
                        5 => ElementKind::Hexahedron,
                        1 | 2 | 3 | 15 => {
                            skipped += 1;
                            continue;
                        }
                        other => {
                            return Err(lines.err(ln, format!("unsupported element type {other}")));
                        }
                    };
                    match kind {
                        None => kind = Some(this_kind),
                        Some(k) if k != this_kind => {
                            return Err(Error::MixedElements(format!(
                                "line {ln}: {} after {}",
                                this_kind.name(),
                                k.name()
                            )));
                        }
                        _ => {}
                    }
                    let mut nodes = Vec::with_capacity(8);
                    for _ in 0..this_kind.vertex_count() {
                        nodes.push(parse_num::<u64>(&lines, ln, tok.next(), "node reference")?);
                    }
                    if tok.next().is_some() {
                        return Err(lines.err(ln, "trailing tokens after element nodes"));
                    }
                    labels.push(tags.first().copied().unwrap_or(0));
                    raw_cells.push((ln, nodes));
                }
                if skipped > 0 {
                    log::debug!("{}: ignored {skipped} lower-dimensional elements", path.display());
                }
                let (ln, end) = lines.expect_line("$EndElements")?;
                if end != "$EndElements" {
                    return Err(lines.err(ln, "expected $EndElements"));
                }
                saw_elements = true;
            }
            s if s.starts_with("$End") => {
                return Err(lines.err(ln, format!("unexpected {s}")));
            }
            s if s.starts_with('$') => {
                let name = &s[1..];
                log::warn!("{}: skipping unknown section ${name}", path.display());
                let end = format!("$End{name}");
                loop {
                    let (_, l) = lines.expect_line(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => return Err(lines.err(ln, format!("unexpected content `{line}`"))),
        }
    }
    if !saw_format {
        return Err(lines.err(1, "missing $MeshFormat section"));
    }
    if !saw_nodes || !saw_elements {
        return Err(lines.err(lines.last, "missing $Nodes or $Elements section"));
    }
    let kind = kind.ok_or_else(|| lines.err(lines.last, "no volume elements"))?;
    for (e, (ln, nodes)) in raw_cells.into_iter().enumerate() {
        for id in nodes {
            match node_index.get(&id) {
                Some(&i) => cells.push(i),
                None => {
                    log::error!("{}:{ln}: element references unknown node {id}", path.display());
                    return Err(Error::DanglingVertex {
                        element: e,
                        vertex: id as usize,
                        count: vertices.len(),
                    });
                }
            }
        }
    }
    Mesh::new(kind, vertices, cells, labels)
}

/// Serialize a mesh as Gmsh 2.2 ASCII. Node and element ids are 1-based.
pub fn write_msh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_msh_string(mesh)).map_err(|e| Error::io(path, e))
}

pub(crate) fn to_msh_string(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(64 * (mesh.vertex_count() + mesh.element_count()));
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.vertex_count());
    for (i, v) in mesh.vertices().iter().enumerate() {
        // {:?} prints the shortest representation that round-trips exactly
        let _ = writeln!(s, "{} {:?} {:?} {:?}", i + 1, v.x, v.y, v.z);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.element_count());
    let code = mesh.kind().gmsh_code();
    for e in 0..mesh.element_count() {
        let label = mesh.label(e);
        let _ = write!(s, "{} {code} 2 {label} {label}", e + 1);
        for &v in mesh.element(e) {
            let _ = write!(s, " {}", v + 1);
        }
        s.push('\n');
    }
    s.push_str("$EndElements\n");
    s
}

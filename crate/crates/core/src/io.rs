use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bv::VertexFunction;
use crate::error::{Error, Result};
use crate::mms::{build_space, EdgeSpec, MetricMeasureSpace};
use crate::timefn::{SpaceTimeFunction, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRecord {
    pub id: String,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub w: f64,
    pub len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::parse(path, format!("line {}, column {}: {e}", e.line(), e.column()))
}

/// Violated invariants of a graph file, all at once.
pub fn graph_violations(g: &GraphFile) -> Vec<String> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for v in &g.vertices {
        if !ids.insert(v.id.as_str()) {
            out.push(format!("duplicate vertex id `{}`", v.id));
        }
    }
    let mut pairs = HashSet::new();
    for e in &g.edges {
        for end in [&e.u, &e.v] {
            if !ids.contains(end.as_str()) {
                out.push(format!("edge {}-{} names unknown vertex `{end}`", e.u, e.v));
            }
        }
        if e.u == e.v {
            out.push(format!("self-loop at `{}`", e.u));
        }
        let key = if e.u < e.v { (e.u.as_str(), e.v.as_str()) } else { (e.v.as_str(), e.u.as_str()) };
        if !pairs.insert(key) {
            out.push(format!("duplicate edge {}-{}", e.u, e.v));
        }
    }
    out
}

pub fn parse_graph(text: &str, path: &Path) -> Result<MetricMeasureSpace> {
    let g: GraphFile = serde_json::from_str(text).map_err(|e| json_error(path, e))?;
    let violations = graph_violations(&g);
    if !violations.is_empty() {
        return Err(Error::validation("graph", violations.join("; ")));
    }
    let vertices: Vec<(String, f64)> = g.vertices.iter().map(|v| (v.id.clone(), v.mu)).collect();
    let edges: Vec<EdgeSpec> = g.edges.iter().map(|e| EdgeSpec::new(&e.u, &e.v, e.w, e.len)).collect();
    build_space(&vertices, &edges)
}

pub fn load_graph(path: &Path) -> Result<MetricMeasureSpace> {
    parse_graph(&read(path)?, path)
}

pub fn graph_to_json(space: &MetricMeasureSpace) -> String {
    let g = GraphFile {
        vertices: (0..space.len()).map(|x| VertexRecord { id: space.id(x).to_string(), mu: space.mu(x) }).collect(),
        edges: space
            .edges()
            .iter()
            .map(|e| EdgeRecord { u: space.id(e.a).to_string(), v: space.id(e.b).to_string(), w: e.weight, len: e.length })
            .collect(),
    };
    serde_json::to_string_pretty(&g).expect("graph serializes") + "\n"
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| format!("line {}: ", p.line())).unwrap_or_default();
    Error::parse(path, format!("{line}{e}"))
}

fn parse_number(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::parse(path, format!("line {line}, field `{field}`: `{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, format!("line {line}, field `{field}`: value must be finite")));
    }
    Ok(v)
}

/// Reads `vertex,value` rows; every vertex of the space must appear exactly once.
pub fn parse_vertex_function(text: &str, path: &Path, space: &MetricMeasureSpace) -> Result<VertexFunction> {
    let rows = parse_rows(text, path, space, |h| {
        if h.len() == 2 && h[0] == "vertex" && h[1] == "value" {
            Ok(1)
        } else {
            Err("expected header `vertex,value`".to_string())
        }
    })?;
    Ok(VertexFunction::new(rows.into_iter().map(|r| r[0]).collect()))
}

pub fn load_vertex_function(path: &Path, space: &MetricMeasureSpace) -> Result<VertexFunction> {
    parse_vertex_function(&read(path)?, path, space)
}

fn parse_rows(
    text: &str,
    path: &Path,
    space: &MetricMeasureSpace,
    header: impl Fn(&[&str]) -> std::result::Result<usize, String>,
) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv_reader(text);
    let head: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let head_ref: Vec<&str> = head.iter().map(String::as_str).collect();
    let width = header(&head_ref).map_err(|m| Error::parse(path, format!("line 1: {m}")))?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; space.len()];
    let mut problems = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width + 1 {
            return Err(Error::parse(path, format!("line {line}: expected {} fields, got {}", width + 1, rec.len())));
        }
        let id = &rec[0];
        let values = (0..width)
            .map(|i| parse_number(path, line, &head[i + 1], &rec[i + 1]))
            .collect::<Result<Vec<f64>>>()?;
        match space.vertex(id) {
            Ok(x) if rows[x].is_some() => problems.push(format!("duplicate row for vertex `{id}`")),
            Ok(x) => rows[x] = Some(values),
            Err(_) => problems.push(format!("unknown vertex `{id}` on line {line}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::validation("rows", problems.join("; ")));
    }
    let missing: Vec<&str> = (0..space.len()).filter(|&x| rows[x].is_none()).map(|x| space.id(x)).collect();
    if !missing.is_empty() {
        return Err(Error::validation("coverage", format!("missing vertices: {}", missing.join(", "))));
    }
    Ok(rows.into_iter().map(|r| r.expect("coverage checked")).collect())
}

pub fn vertex_function_to_csv(space: &MetricMeasureSpace, u: &VertexFunction) -> String {
    let mut out = String::from("vertex,value\n");
    for x in 0..space.len() {
        out.push_str(&format!("{},{:?}\n", space.id(x), u[x]));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

/// `foo.csv` keeps its grid metadata in `foo.grid.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.grid.json"))
}

pub fn parse_space_time(text: &str, path: &Path, space: &MetricMeasureSpace, grid: TimeGrid) -> Result<SpaceTimeFunction> {
    let n = grid.steps();
    let rows = parse_rows(text, path, space, |h| {
        let ok = h.len() == n + 2 && h[0] == "vertex" && (0..=n).all(|k| h[k + 1] == format!("t{k}"));
        if ok {
            Ok(n + 1)
        } else {
            Err(format!("expected header `vertex,t0,...,t{n}`"))
        }
    })?;
    let slices = (0..=n).map(|k| VertexFunction::new(rows.iter().map(|r| r[k]).collect())).collect();
    SpaceTimeFunction::new(grid, slices)
}

/// Loads a space-time function and its sidecar; returns the method tag if present.
pub fn load_space_time(path: &Path, space: &MetricMeasureSpace) -> Result<(SpaceTimeFunction, Option<String>)> {
    let side_path = sidecar_path(path);
    let side: GridSidecar = serde_json::from_str(&read(&side_path)?).map_err(|e| json_error(&side_path, e))?;
    let grid = TimeGrid::new(side.horizon, side.steps)?;
    Ok((parse_space_time(&read(path)?, path, space, grid)?, side.method))
}

pub fn space_time_to_csv(space: &MetricMeasureSpace, v: &SpaceTimeFunction) -> String {
    let n = v.grid().steps();
    let mut out = String::from("vertex");
    for k in 0..=n {
        out.push_str(&format!(",t{k}"));
    }
    out.push('\n');
    for x in 0..space.len() {
        out.push_str(space.id(x));
        for k in 0..=n {
            out.push_str(&format!(",{:?}", v.at(x, k)));
        }
        out.push('\n');
    }
    out
}

/// Writes the CSV and its grid sidecar; returns both paths.
pub fn write_space_time(path: &Path, space: &MetricMeasureSpace, v: &SpaceTimeFunction, method: Option<&str>) -> Result<Vec<PathBuf>> {
    write_file(path, &space_time_to_csv(space, v))?;
    let side = GridSidecar { horizon: v.grid().horizon(), steps: v.grid().steps(), method: method.map(String::from) };
    let side_path = sidecar_path(path);
    write_file(&side_path, &(serde_json::to_string_pretty(&side).expect("sidecar serializes") + "\n"))?;
    Ok(vec![path.to_path_buf(), side_path])
}

/// Problem description file; paths are relative to the file itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub graph: Option<PathBuf>,
    pub omega: Option<Vec<String>>,
    pub omega_star: Option<Vec<String>>,
    pub u0: Option<PathBuf>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[serde(rename = "N")]
    pub steps: Option<usize>,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let mut cfg: ConfigFile = serde_json::from_str(&read(path)?).map_err(|e| json_error(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    for p in [&mut cfg.graph, &mut cfg.u0].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Vertex ids to indices, reporting every unknown id.
pub fn resolve_ids(space: &MetricMeasureSpace, ids: &[String]) -> Result<Vec<usize>> {
    let lookup: HashMap<&str, usize> = (0..space.len()).map(|x| (space.id(x), x)).collect();
    let unknown: Vec<&str> = ids.iter().filter(|id| !lookup.contains_key(id.as_str())).map(String::as_str).collect();
    if !unknown.is_empty() {
        return Err(Error::validation("unknown vertex", unknown.join(", ")));
    }
    Ok(ids.iter().map(|id| lookup[id.as_str()]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const S2: &str = r#"{"vertices":[{"id":"a","mu":1.0},{"id":"b","mu":1.0}],"edges":[{"u":"a","v":"b","w":1.0,"len":1.0}]}"#;

    #[test]
    fn graph_round_trip() {
        let s = parse_graph(S2, Path::new("s2.json")).unwrap();
        assert_eq!(s.len(), 2);
        let again = parse_graph(&graph_to_json(&s), Path::new("x")).unwrap();
        assert_eq!(again.edges(), s.edges());
    }

    #[test]
    fn graph_rejections() {
        let dup = r#"{"vertices":[{"id":"a","mu":1},{"id":"a","mu":1}],"edges":[{"u":"a","v":"a","w":1,"len":1}]}"#;
        match parse_graph(dup, Path::new("g")) {
            Err(Error::Validation { message, .. }) => {
                assert!(message.contains("duplicate vertex id"));
                assert!(message.contains("self-loop"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let broken = "{\"vertices\": [\n{\"id\": 3}]}";
        match parse_graph(broken, Path::new("g")) {
            Err(Error::Parse { message, .. }) => assert!(message.starts_with("line 2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vertex_function_coverage() {
        let s = parse_graph(S2, Path::new("s2.json")).unwrap();
        let u = parse_vertex_function("vertex,value\nb,0\na,1\n", Path::new("u"), &s).unwrap();
        assert_eq!(u.values(), &[1.0, 0.0]);
        match parse_vertex_function("vertex,value\na,1\n", Path::new("u"), &s) {
            Err(Error::Validation { kind, .. }) => assert_eq!(kind, "coverage"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_vertex_function("vertex,value\na,1\nb,x\n", Path::new("u"), &s) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("line 3") && message.contains("value")),
            other => panic!("unexpected {other:?}"),
        }
        let text = vertex_function_to_csv(&s, &u);
        assert_eq!(parse_vertex_function(&text, Path::new("u"), &s).unwrap(), u);
    }

    #[test]
    fn space_time_round_trip() {
        let s = parse_graph(S2, Path::new("s2.json")).unwrap();
        let g = TimeGrid::new(0.5, 3).unwrap();
        let v = SpaceTimeFunction::from_fn(g, 2, |x, t| x as f64 + t / 3.0);
        let text = space_time_to_csv(&s, &v);
        assert!(text.starts_with("vertex,t0,t1,t2,t3\n"));
        assert_eq!(parse_space_time(&text, Path::new("v"), &s, g).unwrap(), v);
        assert_eq!(sidecar_path(Path::new("out/traj.csv")), PathBuf::from("out/traj.grid.json"));
    }
}

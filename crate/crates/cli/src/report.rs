//! Output formats: deterministic JSON, trajectory CSV and graph listings.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use anyhow::{Context, Result};
use mpngame::{node_variables, Edge, EdgeKind, EquilibriumSolution, LqGame, MpnGraph, NodeId, Trajectory, VerificationReport};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::spec::InfoSpec;

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose floats all carry 17 significant digits.
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
}

impl GraphExport {
    pub fn new(graph: &MpnGraph) -> Self {
        Self {
            nodes: graph.nodes(),
            edges: graph.edges.clone(),
        }
    }
}

/// Everything `solve` writes.
#[derive(Debug, Serialize)]
pub struct SolutionReport<'a> {
    pub information: &'a InfoSpec,
    pub x1: Vec<f64>,
    #[serde(flatten)]
    pub solution: &'a EquilibriumSolution,
    pub verification: &'a VerificationReport,
    pub graph: GraphExport,
}

/// The part of a solution file that `verify` reads back.
#[derive(Debug, Deserialize)]
pub struct SolutionInput {
    pub trajectory: Trajectory,
}

/// Header `t, x[1]..x[n], u1[1]..uN[mN]`, one row per state index
/// (1-based), controls empty on the terminal row.
pub fn write_csv<W: io::Write>(out: W, game: &LqGame, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=game.state_dim()).map(|k| format!("x[{k}]")));
    for (i, d) in game.dims.iter().enumerate() {
        header.extend((1..=d.control_dim).map(|k| format!("u{}[{k}]", i + 1)));
    }
    w.write_record(&header)?;
    let nu = game.total_control_dim();
    for (t, x) in traj.states.iter().enumerate() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(x.iter().map(|v| format_float(*v)));
        match traj.controls.get(t) {
            Some(us) => row.extend(us.iter().flat_map(|u| u.iter()).map(|v| format_float(*v))),
            None => row.extend(std::iter::repeat_n(String::new(), nu)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, game: &LqGame, traj: &Trajectory) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    write_csv(file, game, traj)
}

/// Human-readable node, edge and decision-set listing with 1-based indices.
pub fn graph_listing(graph: &MpnGraph) -> String {
    let nodes = graph.nodes();
    let count = |k| graph.edges_of_kind(k).count();
    let mut s = String::new();
    let _ = writeln!(s, "nodes: {}", nodes.len());
    for t in 0..graph.horizon {
        let row: Vec<String> = nodes.iter().filter(|n| n.time == t).map(ToString::to_string).collect();
        let _ = writeln!(s, "  {}", row.join(" "));
    }
    let _ = writeln!(
        s,
        "edges: {} ({} temporal, {} observation)",
        graph.edges.len(),
        count(EdgeKind::Temporal),
        count(EdgeKind::Observation)
    );
    let mut edges = graph.edges.clone();
    edges.sort_by_key(|e| (e.from, e.to));
    for e in &edges {
        let kind = match e.kind {
            EdgeKind::Temporal => "temporal",
            EdgeKind::Observation => "observation",
        };
        let _ = writeln!(s, "  {} -> {} {kind}", e.from, e.to);
    }
    let _ = writeln!(s, "decision sets:");
    for n in &nodes {
        let vars: Vec<String> = node_variables(graph, *n).iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "  {n}: {}", vars.join(" "));
    }
    s
}
